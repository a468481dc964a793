//! The fixed set of differentiable operations the model is built from.
//!
//! Each forward has a matching backward that maps the upstream gradient to
//! gradients of the inputs. There is no tape; the model composes these by
//! hand and replays them in reverse.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{CawaError, Result};

/// out = input · weight + bias, input [n×p], weight [p×q], bias [q].
pub fn linear<S: Scalar>(input: &Tensor<S>, weight: &Tensor<S>, bias: &Tensor<S>) -> Result<Tensor<S>> {
    let (n, p) = (input.rows(), input.cols());
    let (wp, q) = (weight.rows(), weight.cols());
    if p != wp || bias.len() != q {
        return Err(CawaError::Shape(format!(
            "linear: input {:?} weight {:?} bias {:?}",
            input.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    let mut out = Tensor::zeros(&[n, q]);
    for i in 0..n {
        let xi = input.row(i);
        let oi = out.row_mut(i);
        oi.copy_from_slice(bias.data());
        for (k, &x) in xi.iter().enumerate() {
            let wr = weight.row(k);
            for j in 0..q {
                oi[j] += x * wr[j];
            }
        }
    }
    Ok(out)
}

/// Gradients of `linear`. Accumulates into `grad_weight`/`grad_bias`
/// (optimizer-owned buffers) and returns the input gradient.
pub fn linear_backward<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    upstream: &Tensor<S>,
    grad_weight: &mut Tensor<S>,
    grad_bias: &mut Tensor<S>,
) -> Tensor<S> {
    let (n, p) = (input.rows(), input.cols());
    let q = weight.cols();
    debug_assert_eq!(upstream.shape(), &[n, q]);
    let mut grad_input = Tensor::zeros(&[n, p]);
    for i in 0..n {
        let gi = upstream.row(i);
        let xi = input.row(i);
        for j in 0..q {
            grad_bias.data_mut()[j] += gi[j];
        }
        for k in 0..p {
            let wr = weight.row(k);
            let mut acc = S::zero();
            for j in 0..q {
                acc += gi[j] * wr[j];
                *grad_weight.at_mut(k, j) += xi[k] * gi[j];
            }
            grad_input.row_mut(i)[k] = acc;
        }
    }
    grad_input
}

/// out = input · weight, no bias (used by the residual skip projection).
pub fn matmul<S: Scalar>(input: &Tensor<S>, weight: &Tensor<S>) -> Result<Tensor<S>> {
    let zero_bias = Tensor::zeros(&[weight.cols()]);
    linear(input, weight, &zero_bias)
}

pub fn matmul_backward<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    upstream: &Tensor<S>,
    grad_weight: &mut Tensor<S>,
) -> Tensor<S> {
    let mut discard_bias = Tensor::zeros(&[weight.cols()]);
    linear_backward(input, weight, upstream, grad_weight, &mut discard_bias)
}

/// Elementwise max(0, x). Subgradient at 0 is 0.
pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| {
        if *v < S::zero() {
            *v = S::zero();
        }
    });
    out
}

pub fn relu_backward<S: Scalar>(pre_activation: &Tensor<S>, upstream: &Tensor<S>) -> Tensor<S> {
    let mut out = upstream.clone();
    for (g, &x) in out.data_mut().iter_mut().zip(pre_activation.data()) {
        if x <= S::zero() {
            *g = S::zero();
        }
    }
    out
}

/// Row-wise softmax with max-subtraction.
pub fn softmax_rows<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let mut out = x.clone();
    for i in 0..x.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
        let mut sum = S::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Softmax Jacobian applied row-wise: g = y ⊙ (upstream − ⟨upstream, y⟩).
pub fn softmax_rows_backward<S: Scalar>(output: &Tensor<S>, upstream: &Tensor<S>) -> Tensor<S> {
    let mut grad = Tensor::zeros(output.shape());
    for i in 0..output.rows() {
        let y = output.row(i);
        let g = upstream.row(i);
        let dot: S = y.iter().zip(g).map(|(&a, &b)| a * b).sum();
        for (j, out) in grad.row_mut(i).iter_mut().enumerate() {
            *out = y[j] * (g[j] - dot);
        }
    }
    grad
}

/// Elementwise logistic sigmoid.
pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let mut out = x.clone();
    out.data_mut().iter_mut().for_each(|v| *v = S::one() / (S::one() + (-*v).exp()));
    out
}

pub fn sigmoid_backward<S: Scalar>(output: &Tensor<S>, upstream: &Tensor<S>) -> Tensor<S> {
    let mut grad = upstream.clone();
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        *g = *g * y * (S::one() - y);
    }
    grad
}

/// Average pooling along the row (sentence) axis with truncated windows:
/// out[i] = mean of rows in [i−k/2, i+k/2] ∩ [0, n−1]. Output length equals
/// input length. `kernel` must be odd.
pub fn avg_pool1d<S: Scalar>(x: &Tensor<S>, kernel: usize) -> Tensor<S> {
    assert!(kernel % 2 == 1, "pool kernel must be odd");
    let (n, c) = (x.rows(), x.cols());
    let half = kernel / 2;
    let mut out = Tensor::zeros(&[n, c]);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let w = S::from_f64((hi - lo + 1) as f64);
        let oi = out.row_mut(i);
        for r in lo..=hi {
            for (o, &v) in oi.iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        oi.iter_mut().for_each(|o| *o = *o / w);
    }
    out
}

pub fn avg_pool1d_backward<S: Scalar>(n: usize, kernel: usize, upstream: &Tensor<S>) -> Tensor<S> {
    let half = kernel / 2;
    let c = upstream.cols();
    let mut grad = Tensor::zeros(&[n, c]);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let w = S::from_f64((hi - lo + 1) as f64);
        let gi = upstream.row(i);
        for r in lo..=hi {
            for (g, &u) in grad.row_mut(r).iter_mut().zip(gi) {
                *g += u / w;
            }
        }
    }
    grad
}

/// Inverted dropout. In training, zeroes each entry with probability `rate`
/// and scales survivors by 1/(1−rate); the returned mask already carries the
/// scaling and is reused by the backward pass. In evaluation the output is
/// the input and the mask is all ones.
pub fn dropout<S: Scalar>(
    x: &Tensor<S>,
    rate: f64,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<S>, Tensor<S>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(CawaError::InvalidInput(format!("dropout rate {rate} outside [0,1)")));
    }
    let mut mask = Tensor::zeros(x.shape());
    if training && rate > 0.0 {
        let keep = S::from_f64(1.0 / (1.0 - rate));
        for m in mask.data_mut() {
            *m = if rng.gen::<f64>() < rate { S::zero() } else { keep };
        }
    } else {
        mask.fill(S::one());
    }
    let mut out = x.clone();
    for (o, &m) in out.data_mut().iter_mut().zip(mask.data()) {
        *o = *o * m;
    }
    Ok((out, mask))
}

pub fn dropout_backward<S: Scalar>(mask: &Tensor<S>, upstream: &Tensor<S>) -> Tensor<S> {
    let mut grad = upstream.clone();
    for (g, &m) in grad.data_mut().iter_mut().zip(mask.data()) {
        *g = *g * m;
    }
    grad
}
