use std::sync::atomic::{AtomicU32, Ordering};

use num_traits::Float;

/// Row-major input and output matrices as seen by the update kernel.
pub trait Weights<T: Float> {
    fn dim(&self) -> usize;
    /// `acc += a * input[row]`
    fn add_input_to(&self, row: u32, a: T, acc: &mut [T]);
    /// `acc += a * output[row]`
    fn add_output_to(&self, row: u32, a: T, acc: &mut [T]);
    fn output_dot(&self, row: u32, x: &[T]) -> T;
    /// `input[row] += a * x`
    fn axpy_input(&mut self, row: u32, a: T, x: &[T]);
    /// `output[row] += a * x`
    fn axpy_output(&mut self, row: u32, a: T, x: &[T]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights<T> {
    pub dim: usize,
    pub input: Vec<T>,
    pub output: Vec<T>,
}

impl<T: Float> DenseWeights<T> {
    fn span(&self, row: u32) -> std::ops::Range<usize> {
        let s = row as usize * self.dim;
        s..s + self.dim
    }
}

impl<T: Float> Weights<T> for DenseWeights<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn add_input_to(&self, row: u32, a: T, acc: &mut [T]) {
        for (o, &v) in acc.iter_mut().zip(&self.input[self.span(row)]) {
            *o = *o + a * v;
        }
    }

    fn add_output_to(&self, row: u32, a: T, acc: &mut [T]) {
        for (o, &v) in acc.iter_mut().zip(&self.output[self.span(row)]) {
            *o = *o + a * v;
        }
    }

    fn output_dot(&self, row: u32, x: &[T]) -> T {
        self.output[self.span(row)]
            .iter()
            .zip(x)
            .fold(T::zero(), |s, (&a, &b)| s + a * b)
    }

    fn axpy_input(&mut self, row: u32, a: T, x: &[T]) {
        let span = self.span(row);
        for (o, &v) in self.input[span].iter_mut().zip(x) {
            *o = *o + a * v;
        }
    }

    fn axpy_output(&mut self, row: u32, a: T, x: &[T]) {
        let span = self.span(row);
        for (o, &v) in self.output[span].iter_mut().zip(x) {
            *o = *o + a * v;
        }
    }
}

/// f32 matrices shared between training threads without locks. Updates
/// race benignly: a lost update costs accuracy, never memory safety.
#[derive(Debug)]
pub struct SharedWeights {
    dim: usize,
    input: Vec<AtomicU32>,
    output: Vec<AtomicU32>,
}

fn load(x: &AtomicU32) -> f32 {
    f32::from_bits(x.load(Ordering::Relaxed))
}

fn store(x: &AtomicU32, v: f32) {
    x.store(v.to_bits(), Ordering::Relaxed);
}

impl SharedWeights {
    pub fn new(dense: DenseWeights<f32>) -> Self {
        let wrap = |v: Vec<f32>| v.into_iter().map(|x| AtomicU32::new(x.to_bits())).collect();
        SharedWeights {
            dim: dense.dim,
            input: wrap(dense.input),
            output: wrap(dense.output),
        }
    }

    pub fn into_dense(self) -> DenseWeights<f32> {
        let unwrap = |v: Vec<AtomicU32>| v.into_iter().map(|x| f32::from_bits(x.into_inner())).collect();
        DenseWeights {
            dim: self.dim,
            input: unwrap(self.input),
            output: unwrap(self.output),
        }
    }

    fn row<'a>(&self, m: &'a [AtomicU32], row: u32) -> &'a [AtomicU32] {
        let s = row as usize * self.dim;
        &m[s..s + self.dim]
    }
}

impl Weights<f32> for &SharedWeights {
    fn dim(&self) -> usize {
        self.dim
    }

    fn add_input_to(&self, row: u32, a: f32, acc: &mut [f32]) {
        for (o, v) in acc.iter_mut().zip(self.row(&self.input, row)) {
            *o += a * load(v);
        }
    }

    fn add_output_to(&self, row: u32, a: f32, acc: &mut [f32]) {
        for (o, v) in acc.iter_mut().zip(self.row(&self.output, row)) {
            *o += a * load(v);
        }
    }

    fn output_dot(&self, row: u32, x: &[f32]) -> f32 {
        self.row(&self.output, row)
            .iter()
            .zip(x)
            .map(|(a, b)| load(a) * b)
            .sum()
    }

    fn axpy_input(&mut self, row: u32, a: f32, x: &[f32]) {
        for (o, &v) in self.row(&self.input, row).iter().zip(x) {
            store(o, load(o) + a * v);
        }
    }

    fn axpy_output(&mut self, row: u32, a: f32, x: &[f32]) {
        for (o, &v) in self.row(&self.output, row).iter().zip(x) {
            store(o, load(o) + a * v);
        }
    }
}

fn sigmoid<T: Float>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus<T: Float>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// One training example: a context bag and the words to score against it,
/// each with its label (true for the centre word, false for noise).
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub context: &'a [u32],
    pub targets: &'a [(u32, bool)],
}

/// Logistic negative-sampling loss of one example at the current weights.
pub fn example_loss<T: Float, W: Weights<T>>(w: &W, ex: Example<'_>) -> T {
    let mut h = vec![T::zero(); w.dim()];
    mean_context(w, ex.context, &mut h);
    ex.targets
        .iter()
        .map(|&(j, label)| {
            let s = w.output_dot(j, &h);
            if label {
                softplus(-s)
            } else {
                softplus(s)
            }
        })
        .fold(T::zero(), |a, b| a + b)
}

fn mean_context<T: Float, W: Weights<T>>(w: &W, context: &[u32], h: &mut [T]) {
    h.iter_mut().for_each(|x| *x = T::zero());
    let inv = T::one() / T::from(context.len()).expect("context size fits");
    for &c in context {
        w.add_input_to(c, inv, h);
    }
}

/// Scratch buffers reused across [`cbow_update`] calls.
#[derive(Debug, Clone)]
pub struct Scratch<T> {
    h: Vec<T>,
    err: Vec<T>,
    grads: Vec<T>,
}

impl<T: Float> Scratch<T> {
    pub fn new(dim: usize) -> Self {
        Scratch {
            h: vec![T::zero(); dim],
            err: vec![T::zero(); dim],
            grads: Vec::new(),
        }
    }
}

/// One stochastic gradient step on [`example_loss`]; returns the loss before
/// the step.
///
/// All scores are computed from the pre-update output rows, so the step is
/// exactly `-lr` times the gradient even when a word appears more than once
/// among the targets or in the context.
pub fn cbow_update<T: Float, W: Weights<T>>(w: &mut W, ex: Example<'_>, lr: T, scratch: &mut Scratch<T>) -> T {
    debug_assert!(!ex.context.is_empty());
    let Scratch { h, err, grads } = scratch;
    mean_context(w, ex.context, h);
    err.iter_mut().for_each(|x| *x = T::zero());
    grads.clear();
    let mut loss = T::zero();
    for &(j, label) in ex.targets {
        let s = w.output_dot(j, h);
        let (g, l) = if label {
            (sigmoid(s) - T::one(), softplus(-s))
        } else {
            (sigmoid(s), softplus(s))
        };
        loss = loss + l;
        grads.push(g);
        w.add_output_to(j, g, err);
    }
    for (&(j, _), &g) in ex.targets.iter().zip(grads.iter()) {
        w.axpy_output(j, -lr * g, h);
    }
    let step = -lr / T::from(ex.context.len()).expect("context size fits");
    for &c in ex.context {
        w.axpy_input(c, step, err);
    }
    loss
}
