//! Central-difference gradient checking in `f64`.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::{Module, Param};
use super::NnError;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Finite-difference half step.
    pub step: f64,
    /// Check at most this many randomly chosen entries per parameter tensor.
    pub max_entries: Option<usize>,
    /// Gradients smaller than this are compared in absolute terms.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_entries: None,
            floor: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

fn with_param<M: Module<f64> + ?Sized, R>(
    module: &mut M,
    target: usize,
    f: impl FnOnce(&mut Param<f64>) -> R,
) -> R {
    let mut f = Some(f);
    let mut out = None;
    let mut idx = 0;
    module.visit_mut("", &mut |_, p| {
        if p.is_trainable() {
            if idx == target {
                out = Some((f.take().expect("visited once"))(p));
            }
            idx += 1;
        }
    });
    out.expect("parameter index in range")
}

/// Compares analytic gradients against central differences.
///
/// `loss` evaluates the scalar objective; when its flag is set it must also
/// run the backward pass so that every trainable parameter's `grad` holds
/// `dL/dθ` (gradients are zeroed beforehand).
pub fn gradcheck<M, F>(
    module: &mut M,
    cfg: &GradCheckConfig,
    mut loss: F,
) -> Result<GradCheckReport, NnError>
where
    M: Module<f64> + ?Sized,
    F: FnMut(&mut M, bool) -> Result<f64, NnError>,
{
    module.zero_grad();
    loss(module, true)?;
    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    module.visit("", &mut |name, p| {
        if p.is_trainable() {
            analytic.push((name.to_string(), p.grad.data().to_vec()));
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (pi, (name, grads)) in analytic.iter().enumerate() {
        let indices: Vec<usize> = match cfg.max_entries {
            Some(k) if k < grads.len() => index::sample(&mut rng, grads.len(), k).into_vec(),
            _ => (0..grads.len()).collect(),
        };
        for j in indices {
            let orig = with_param(module, pi, |p| p.value.data()[j]);
            with_param(module, pi, |p| p.value.data_mut()[j] = orig + cfg.step);
            let plus = loss(module, false)?;
            with_param(module, pi, |p| p.value.data_mut()[j] = orig - cfg.step);
            let minus = loss(module, false)?;
            with_param(module, pi, |p| p.value.data_mut()[j] = orig);

            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = grads[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.checked += 1;
            if rel > report.max_rel_error || !rel.is_finite() {
                report.max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
                report.worst_param = name.clone();
                report.worst_index = j;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Linear, Tensor};

    struct Harness {
        lin: Linear<f64>,
        x: Param<f64>,
        proj: Vec<f64>,
        corrupt: bool,
    }

    impl Module<f64> for Harness {
        fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<f64>)) {
            self.lin.visit(prefix, f);
            f("x", &self.x);
        }

        fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
            self.lin.visit_mut(prefix, f);
            f("x", &mut self.x);
        }
    }

    fn objective(h: &mut Harness, backward: bool) -> Result<f64, NnError> {
        let y = h.lin.forward(&h.x.value)?;
        let l = y.data().iter().zip(&h.proj).map(|(a, b)| a * b).sum();
        if backward {
            let mut dy = Tensor::from_vec(y.shape(), h.proj.clone())?;
            if h.corrupt {
                dy.data_mut()[0] *= 1.5;
            }
            let dx = h.lin.backward(&h.x.value, &dy)?;
            h.x.grad.add_assign(&dx);
        }
        Ok(l)
    }

    fn harness(corrupt: bool) -> Harness {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        Harness {
            lin: Linear::new(5, 3, &mut rng),
            x: Param::new(Tensor::uniform(&[2, 5], 1.0, &mut rng)),
            proj: vec![0.3, -1.2, 0.7, 2.0, -0.4, 1.1],
            corrupt,
        }
    }

    #[test]
    fn linear_layer_passes() {
        let report =
            gradcheck(&mut harness(false), &GradCheckConfig::default(), objective).unwrap();
        assert_eq!(report.checked, 15 + 3 + 10);
        assert!(report.passes(1e-6), "{report:?}");
    }

    #[test]
    fn corrupted_backward_is_caught() {
        let report = gradcheck(&mut harness(true), &GradCheckConfig::default(), objective).unwrap();
        assert!(!report.passes(1e-5), "{report:?}");
        assert!(report.max_rel_error > 0.1);
    }
}
