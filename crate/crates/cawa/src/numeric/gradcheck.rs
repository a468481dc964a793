//! Finite-difference gradient checker.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::scalar::Scalar;
use super::tensor::Parameter;

/// A loss whose reverse-mode gradients can be checked. Implementations must
/// be deterministic (dropout off) so that repeated `loss()` calls agree.
pub trait GradCheckTarget<S: Scalar> {
    fn loss(&mut self) -> S;
    /// Zeroes gradients and runs a full backward pass.
    fn compute_grads(&mut self);
    fn params(&mut self) -> Vec<&mut Parameter<S>>;
}

/// Compares reverse-mode gradients against central finite differences on
/// `probe_count` randomly chosen coordinates. Returns the maximum relative
/// error, with a small floor in the denominator so near-zero gradients are
/// compared absolutely.
pub fn gradient_check<S: Scalar>(
    target: &mut impl GradCheckTarget<S>,
    probe_count: usize,
    step: S,
    seed: u64,
) -> S {
    target.compute_grads();
    let analytic: Vec<Vec<S>> = target.params().iter().map(|p| p.grad.data().to_vec()).collect();
    let sizes: Vec<usize> = analytic.iter().map(|g| g.len()).collect();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return S::zero(); // zero-parameter model: vacuous pass
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = S::zero();
    for _ in 0..probe_count {
        let flat = rng.gen_range(0..total);
        let (pi, ci) = locate(&sizes, flat);

        let orig = target.params()[pi].value.data()[ci];
        target.params()[pi].value.data_mut()[ci] = orig + step;
        let plus = target.loss();
        target.params()[pi].value.data_mut()[ci] = orig - step;
        let minus = target.loss();
        target.params()[pi].value.data_mut()[ci] = orig;

        let fd = (plus - minus) / (S::from_f64(2.0) * step);
        let g = analytic[pi][ci];
        let denom = g.abs().max(fd.abs()).max(S::from_f64(1e-3));
        let err = (g - fd).abs() / denom;
        max_err = max_err.max(err);
    }
    max_err
}

fn locate(sizes: &[usize], mut flat: usize) -> (usize, usize) {
    for (i, &n) in sizes.iter().enumerate() {
        if flat < n {
            return (i, flat);
        }
        flat -= n;
    }
    unreachable!("flat index out of range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::tensor::Tensor;

    /// ½‖x‖², gradient x.
    struct Quadratic {
        x: Parameter<f64>,
    }

    impl GradCheckTarget<f64> for Quadratic {
        fn loss(&mut self) -> f64 {
            0.5 * self.x.value.data().iter().map(|v| v * v).sum::<f64>()
        }
        fn compute_grads(&mut self) {
            self.x.zero_grad();
            let vals = self.x.value.data().to_vec();
            self.x.grad.data_mut().copy_from_slice(&vals);
        }
        fn params(&mut self) -> Vec<&mut Parameter<f64>> {
            vec![&mut self.x]
        }
    }

    struct Empty;
    impl GradCheckTarget<f64> for Empty {
        fn loss(&mut self) -> f64 {
            1.0
        }
        fn compute_grads(&mut self) {}
        fn params(&mut self) -> Vec<&mut Parameter<f64>> {
            vec![]
        }
    }

    #[test]
    fn quadratic_passes_tightly() {
        let x = Tensor::from_vec(&[5], vec![1.3, -0.4, 2.0, 0.0, -1.7]).unwrap();
        let mut q = Quadratic { x: Parameter::new(x) };
        let err = gradient_check(&mut q, 50, 1e-5, 9);
        assert!(err <= 1e-8, "err {err}");
    }

    #[test]
    fn zero_parameter_model_is_vacuous_pass() {
        assert_eq!(gradient_check(&mut Empty, 10, 1e-5, 0), 0.0);
    }
}
