use super::param::Module;
use super::tensor::Scalar;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Moments<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> Moments<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }
}

/// One bias-corrected Adam update of `theta` at 1-based timestep `t`.
pub fn adam_update<T: Scalar>(
    theta: &mut [T],
    grad: &[T],
    state: &mut Moments<T>,
    t: u64,
    cfg: &AdamConfig,
) {
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let one = T::one();
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    // lr * m_hat / (sqrt(v_hat) + eps) with the corrections folded in.
    let step = T::from_f64_lossy(cfg.lr / bc1);
    let inv_bc2 = T::from_f64_lossy(1.0 / bc2);
    let eps = T::from_f64_lossy(cfg.eps);
    for (((p, &g), m), v) in theta
        .iter_mut()
        .zip(grad)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        *p -= step * *m / ((*v * inv_bc2).sqrt() + eps);
    }
}

/// Adam over every trainable parameter of a module. Moment buffers follow
/// the module's visiting order.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub t: u64,
    state: Vec<Moments<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            t: 0,
            state: Vec::new(),
        }
    }

    /// Applies one update from the accumulated gradients. Fails without
    /// touching any parameter if a gradient is not finite.
    pub fn step<M: Module<T> + ?Sized>(&mut self, module: &mut M) -> Result<(), NnError> {
        let mut bad = None;
        module.visit("", &mut |name, p| {
            if bad.is_none() && p.is_trainable() && !p.grad.all_finite() {
                bad = Some(name.to_string());
            }
        });
        if let Some(param) = bad {
            return Err(NnError::NonFiniteGradient { param });
        }
        self.t += 1;
        let (t, cfg) = (self.t, self.config);
        let state = &mut self.state;
        let mut idx = 0;
        module.visit_mut("", &mut |_, p| {
            if !p.is_trainable() {
                return;
            }
            if state.len() == idx {
                state.push(Moments::zeros(p.value.len()));
            }
            adam_update(p.value.data_mut(), p.grad.data(), &mut state[idx], t, &cfg);
            idx += 1;
        });
        Ok(())
    }
}
