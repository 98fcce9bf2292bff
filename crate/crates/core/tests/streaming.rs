//! Peak heap use while streaming a corpus much larger than the cap.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use traitcooc::corpus::split::split_file;
use traitcooc::corpus::{corpus_stats, create_corpus, open_corpus, ConlluWriter, SplitAssigner};
use traitcooc::synth::{generate_corpus, PlantedWorld, SentenceMix, WorldSpec};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

const CAP: usize = 4 << 20;

fn measure<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let base = LIVE.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let out = f();
    (out, PEAK.load(Ordering::Relaxed).saturating_sub(base))
}

#[test]
fn stats_and_split_stay_under_memory_cap() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.conllu");
    let world = PlantedWorld::new(&WorldSpec::default());
    let mut writer = ConlluWriter::new(create_corpus(&path).unwrap());
    let mut expected_sentences = 0u64;
    for chunk in 0..20 {
        let mut part = generate_corpus(&world, &SentenceMix::default(), 5000, 100 + chunk).unwrap();
        for s in &mut part {
            s.id = format!("c{chunk}-{}", s.id);
            writer.write(s).unwrap();
        }
        expected_sentences += part.len() as u64;
    }
    writer.finish().unwrap().finish().unwrap();
    let size = std::fs::metadata(&path).unwrap().len() as usize;
    assert!(size > 8 * CAP, "input of {size} bytes is too small for the check");

    let (stats, peak) = measure(|| corpus_stats(open_corpus(&path).unwrap()).unwrap());
    assert_eq!(stats.sentences, expected_sentences);
    assert!(peak < CAP, "corpus_stats peaked at {peak} bytes");

    let assigner = SplitAssigner::new(0.8, 1).unwrap();
    let (split, peak) = measure(|| {
        split_file(&path, &dir.path().join("main.conllu"), &dir.path().join("reserve.conllu"), &assigner).unwrap()
    });
    assert_eq!(split.counts.total(), expected_sentences);
    assert!(peak < CAP, "split_file peaked at {peak} bytes");
}
