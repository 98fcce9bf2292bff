use crate::error::{Error, Result};

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "{rows}×{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.as_ref().len() != cols {
                return Err(Error::Parameter("ragged feature rows".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// The rows at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmParams {
    pub c: f64,
    /// Solver iterations are capped at `max_epochs × n`.
    pub max_epochs: usize,
    /// Stop when the largest KKT violation falls below this.
    pub tol: f64,
}

impl Default for LinearSvmParams {
    fn default() -> Self {
        LinearSvmParams {
            c: 1.0,
            max_epochs: 1000,
            tol: 1e-4,
        }
    }
}

/// `w·x + b`; positive means class +1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub w: Vec<f64>,
    pub b: f64,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

/// `(1/n) Σ max(0, 1 − y(w·x + b)) + ‖w‖² / (2Cn)`
pub fn svm_objective(x: &Matrix, y: &[bool], w: &[f64], b: f64, c: f64) -> f64 {
    let n = x.rows() as f64;
    let hinge: f64 = (0..x.rows())
        .map(|i| {
            let s = if y[i] { 1.0 } else { -1.0 };
            (1.0 - s * (dot(w, x.row(i)) + b)).max(0.0)
        })
        .sum();
    hinge / n + dot(w, w) / (2.0 * c * n)
}

/// Trains one binary L2-regularized hinge-loss SVM with an unregularized
/// bias. Solves the dual by SMO with second-order working-set selection,
/// then refits the bias exactly for the final weights.
pub fn train_binary(x: &Matrix, y: &[bool], params: &LinearSvmParams) -> Result<BinarySvm> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::Parameter(format!("{n} rows but {} labels", y.len())));
    }
    if !(params.c > 0.0) {
        return Err(Error::Parameter("C must be positive".into()));
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::Probe("binary SVM needs examples of both classes".into()));
    }
    let c = params.c;
    let s: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = dot(x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let mut alpha = vec![0.0; n];
    // Gradient of ½αᵀQα − Σα with Q_ij = s_i s_j K_ij.
    let mut grad = vec![-1.0; n];
    let up = |a: f64, si: f64| (si > 0.0 && a < c) || (si < 0.0 && a > 0.0);
    let low = |a: f64, si: f64| (si > 0.0 && a > 0.0) || (si < 0.0 && a < c);
    let max_iter = params.max_epochs.max(1) * n.max(1);
    let mut converged = false;
    for _ in 0..max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if up(alpha[t], s[t]) && -s[t] * grad[t] > gmax {
                gmax = -s[t] * grad[t];
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], s[t]) {
                continue;
            }
            let v = -s[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let diff = gmax - v;
                let quad = (k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t]).max(1e-12);
                let gain = -diff * diff / quad;
                if gain < best {
                    best = gain;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < params.tol {
            converged = true;
            break;
        }
        let quad = (k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j]).max(1e-12);
        let (ai, aj) = (alpha[i], alpha[j]);
        // Move along s_i Δα_i = −s_j Δα_j, clipped to the box.
        let step = (-s[i] * grad[i] + s[j] * grad[j]) / quad;
        let mut di = s[i] * step;
        di = di.clamp(-ai, c - ai);
        let mut dj = -s[i] * s[j] * di;
        if aj + dj < 0.0 || aj + dj > c {
            dj = dj.clamp(-aj, c - aj);
            di = -s[i] * s[j] * dj;
        }
        alpha[i] = (ai + di).clamp(0.0, c);
        alpha[j] = (aj + dj).clamp(0.0, c);
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += s[t] * (s[i] * k[t * n + i] * di + s[j] * k[t * n + j] * dj);
        }
    }
    if !converged {
        log::warn!("SVM solver hit the iteration cap before reaching tolerance {}", params.tol);
    }

    let mut w = vec![0.0; x.cols()];
    for t in 0..n {
        if alpha[t] != 0.0 {
            for (wk, xk) in w.iter_mut().zip(x.row(t)) {
                *wk += alpha[t] * s[t] * xk;
            }
        }
    }
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = s[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if up(alpha[t], s[t]) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    let b = refit_bias(x, &s, &w, -rho);
    Ok(BinarySvm { w, b })
}

/// Minimizes the hinge sum over the bias for fixed weights; keeps `b0`
/// unless a breakpoint is strictly better.
fn refit_bias(x: &Matrix, s: &[f64], w: &[f64], b0: f64) -> f64 {
    let scores: Vec<f64> = (0..x.rows()).map(|i| dot(w, x.row(i))).collect();
    let hinge = |b: f64| -> f64 {
        scores
            .iter()
            .zip(s)
            .map(|(sc, si)| (1.0 - si * (sc + b)).max(0.0))
            .sum()
    };
    let mut best = (hinge(b0), b0);
    for (sc, si) in scores.iter().zip(s) {
        let b = si - sc;
        let v = hinge(b);
        if v < best.0 - 1e-12 {
            best = (v, b);
        }
    }
    best.1
}

/// One-vs-rest linear SVM over classes `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub classes: Vec<usize>,
    /// One model per class; a single model when there are two classes.
    pub models: Vec<BinarySvm>,
}

impl LinearSvm {
    pub fn predict(&self, x: &[f64]) -> usize {
        if self.classes.len() == 2 {
            return if self.models[0].decision(x) > 0.0 {
                self.classes[1]
            } else {
                self.classes[0]
            };
        }
        let mut best = (f64::NEG_INFINITY, self.classes[0]);
        for (m, &cls) in self.models.iter().zip(&self.classes) {
            let d = m.decision(x);
            if d > best.0 {
                best = (d, cls);
            }
        }
        best.1
    }

    pub fn accuracy(&self, x: &Matrix, labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let hits = (0..x.rows()).filter(|&i| self.predict(x.row(i)) == labels[i]).count();
        hits as f64 / labels.len() as f64
    }
}

pub fn train_linear_svm(x: &Matrix, labels: &[usize], params: &LinearSvmParams) -> Result<LinearSvm> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Probe("SVM training needs at least two classes".into()));
    }
    let models = if classes.len() == 2 {
        let y: Vec<bool> = labels.iter().map(|&l| l == classes[1]).collect();
        vec![train_binary(x, &y, params)?]
    } else {
        classes
            .iter()
            .map(|&cls| {
                let y: Vec<bool> = labels.iter().map(|&l| l == cls).collect();
                train_binary(x, &y, params)
            })
            .collect::<Result<_>>()?
    };
    Ok(LinearSvm { classes, models })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<bool>) {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.5], [0.2, 1.0], [3.0, 3.0], [2.5, 4.0], [4.0, 2.0]]).unwrap();
        (x, vec![false, false, false, true, true, true])
    }

    #[test]
    fn separable_points_are_classified() {
        let (x, y) = toy();
        let m = train_binary(&x, &y, &LinearSvmParams::default()).unwrap();
        for i in 0..x.rows() {
            assert_eq!(m.decision(x.row(i)) > 0.0, y[i]);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let (x, _) = toy();
        assert!(train_binary(&x, &[true; 6], &LinearSvmParams::default()).is_err());
        assert!(train_linear_svm(&x, &[2; 6], &LinearSvmParams::default()).is_err());
    }

    #[test]
    fn one_vs_rest_on_three_clusters() {
        let x = Matrix::from_rows(&[
            [5.0, 0.0],
            [6.0, 0.5],
            [0.0, 5.0],
            [0.5, 6.0],
            [-5.0, -5.0],
            [-6.0, -5.5],
        ])
        .unwrap();
        let labels = [0, 0, 1, 1, 2, 2];
        let m = train_linear_svm(&x, &labels, &LinearSvmParams::default()).unwrap();
        assert_eq!(m.models.len(), 3);
        assert_eq!(m.accuracy(&x, &labels), 1.0);
    }
}
