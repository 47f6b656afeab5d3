//! Multinomial logistic regression with an L2 penalty on the weights,
//! fitted by L-BFGS with a backtracking line search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAD_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 1000;
const HISTORY: usize = 10;

/// `k` classes over `d` features. Parameters are laid out as `k` weight rows
/// followed by `k` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Softmax {
    pub classes: usize,
    pub dim: usize,
    pub params: Vec<f64>,
}

impl Softmax {
    pub fn weights(&self, class: usize) -> &[f64] {
        &self.params[class * self.dim..(class + 1) * self.dim]
    }

    pub fn bias(&self, class: usize) -> f64 {
        self.params[self.classes * self.dim + class]
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        scores(&self.params, self.classes, self.dim, x)
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.scores(x);
        softmax_in_place(&mut s);
        s
    }
}

fn scores(params: &[f64], k: usize, d: usize, x: &[f64]) -> Vec<f64> {
    (0..k)
        .map(|c| {
            let w = &params[c * d..(c + 1) * d];
            w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + params[k * d + c]
        })
        .collect()
}

fn softmax_in_place(s: &mut [f64]) {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in s.iter_mut() {
        *v = (*v - m).exp();
        z += *v;
    }
    for v in s.iter_mut() {
        *v /= z;
    }
}

/// Mean cross-entropy plus `reg / 2 * |W|^2` (biases unpenalized).
pub struct Objective<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [usize],
    pub classes: usize,
    pub dim: usize,
    pub reg: f64,
}

impl Objective<'_> {
    pub fn n_params(&self) -> usize {
        self.classes * (self.dim + 1)
    }

    pub fn value_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (k, d) = (self.classes, self.dim);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n = self.x.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in self.x.iter().zip(self.y) {
            let mut s = scores(params, k, d, x);
            let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - s[y];
            for (c, v) in s.iter_mut().enumerate() {
                let p = (*v - lse).exp();
                let r = (p - if c == y { 1.0 } else { 0.0 }) / n;
                for (g, xi) in grad[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *g += r * xi;
                }
                grad[k * d + c] += r;
            }
        }
        loss /= n;
        let mut penalty = 0.0;
        for (g, w) in grad[..k * d].iter_mut().zip(&params[..k * d]) {
            penalty += w * w;
            *g += self.reg * w;
        }
        loss + 0.5 * self.reg * penalty
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes the objective from `init` (zeros when `None`).
pub fn fit(obj: &Objective<'_>, init: Option<&[f64]>) -> Result<(Vec<f64>, FitReport)> {
    let n = obj.n_params();
    let mut x = init.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if x.len() != n {
        return Err(Error::Dimension { expected: n, found: x.len() });
    }
    let mut g = vec![0.0; n];
    let mut f = obj.value_and_grad(&x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS && l2_norm(&g) >= GRAD_TOLERANCE {
        iterations += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let a = dot(s, &q) / dot(y, s);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y), a) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = dot(y, &q) / dot(y, s);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }

        let mut step = if s_hist.is_empty() { 1.0 / inf_norm(&g).max(1.0) } else { 1.0 };
        let mut f_new;
        loop {
            x_new.iter_mut().zip(&x).zip(&dir).for_each(|((xn, xi), di)| *xn = xi + step * di);
            f_new = obj.value_and_grad(&x_new, &mut g_new);
            if f_new <= f + 1e-4 * step * slope || step < 1e-20 {
                break;
            }
            step *= 0.5;
        }
        if !f_new.is_finite() {
            return Err(Error::NonFinite("logistic regression loss diverged".into()));
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let converged_flat = f - f_new <= f64::EPSILON * f.abs().max(1.0) && step < 1e-12;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        if dot(&s, &y) > 1e-300 {
            if s_hist.len() == HISTORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        if converged_flat {
            break;
        }
    }
    Ok((
        x,
        FitReport {
            loss: f,
            grad_norm: l2_norm(&g),
            iterations,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let means = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
        (0..n)
            .map(|i| {
                let c = i % 3;
                let x = means[c].iter().map(|m| m + rng.random_range(-1.0..1.0)).collect();
                (x, c)
            })
            .unzip()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = blobs(30, 1);
        let obj = Objective { x: &x, y: &y, classes: 3, dim: 3, reg: 0.1 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p: Vec<f64> = (0..obj.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; p.len()];
        obj.value_and_grad(&p, &mut g);
        let mut scratch = vec![0.0; p.len()];
        for i in 0..p.len() {
            let h = 1e-6;
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (obj.value_and_grad(&a, &mut scratch) - obj.value_and_grad(&b, &mut scratch)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn converges_to_tolerance() {
        let (x, y) = blobs(90, 3);
        let obj = Objective { x: &x, y: &y, classes: 3, dim: 3, reg: 1.0 / 90.0 };
        let (_, rep) = fit(&obj, None).unwrap();
        assert!(rep.grad_norm < GRAD_TOLERANCE, "{rep:?}");
    }
}
