//! The skip-gram negative-sampling update for one (center, context) pair.
//!
//! Pair loss: `-log σ(u_c·v_w) - Σ_n log σ(-u_n·v_w)`.

use num_traits::Float;

use crate::matrix::Matrix;

#[inline]
pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<F: Float>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Scores one target row against the center vector, updates the target in
/// place and accumulates the center's step into `center_step`. Returns the
/// target's loss term evaluated before the update.
#[inline]
pub fn target_step<F: Float>(center: &[F], target: &mut [F], label: bool, lr: F, center_step: &mut [F]) -> F {
    let score = dot(center, target);
    let (truth, loss) = if label {
        (F::one(), softplus(-score))
    } else {
        (F::zero(), softplus(score))
    };
    let g = (truth - sigmoid(score)) * lr;
    for ((acc, u), &v) in center_step.iter_mut().zip(target.iter_mut()).zip(center) {
        *acc = *acc + g * *u;
        *u = *u + g * v;
    }
    loss
}

/// Loss of one training pair without touching the parameters.
pub fn pair_loss<F: Float>(
    input: &Matrix<F>,
    output: &Matrix<F>,
    center: u32,
    context: u32,
    negatives: &[u32],
) -> F {
    let v = input.row(center as usize);
    let mut loss = softplus(-dot(v, output.row(context as usize)));
    for &n in negatives {
        loss = loss + softplus(dot(v, output.row(n as usize)));
    }
    loss
}

/// Analytic gradients of [`pair_loss`], one entry per target position.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGradients<F> {
    pub center: Vec<F>,
    pub context: Vec<F>,
    pub negatives: Vec<Vec<F>>,
}

pub fn pair_gradients<F: Float>(
    input: &Matrix<F>,
    output: &Matrix<F>,
    center: u32,
    context: u32,
    negatives: &[u32],
) -> PairGradients<F> {
    let v = input.row(center as usize);
    let d = v.len();
    let mut grad_v = vec![F::zero(); d];
    let mut per_target = |row: &[F], label: bool| -> Vec<F> {
        let coeff = sigmoid(dot(v, row)) - if label { F::one() } else { F::zero() };
        for (g, &u) in grad_v.iter_mut().zip(row) {
            *g = *g + coeff * u;
        }
        v.iter().map(|&x| coeff * x).collect()
    };
    let context_grad = per_target(output.row(context as usize), true);
    let negative_grads = negatives
        .iter()
        .map(|&n| per_target(output.row(n as usize), false))
        .collect();
    PairGradients {
        center: grad_v,
        context: context_grad,
        negatives: negative_grads,
    }
}

/// One SGD step on a training pair. Updates the center's input row and the
/// context/negative output rows; returns the loss before the update.
pub fn pair_step<F: Float>(
    input: &mut Matrix<F>,
    output: &mut Matrix<F>,
    center: u32,
    context: u32,
    negatives: &[u32],
    lr: F,
) -> F {
    let d = input.cols();
    let mut step = vec![F::zero(); d];
    let v = input.row(center as usize).to_vec();
    let mut loss = target_step(&v, output.row_mut(context as usize), true, lr, &mut step);
    for &n in negatives {
        loss = loss + target_step(&v, output.row_mut(n as usize), false, lr, &mut step);
    }
    for (x, s) in input.row_mut(center as usize).iter_mut().zip(step) {
        *x = *x + s;
    }
    loss
}
