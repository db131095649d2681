use super::Tensor;

/// A trainable tensor together with its most recent gradient.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Tensor>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Self { name: name.into(), value, grad: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.01, weight_decay: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with an L2 penalty folded into the gradient (`g + wd * w`).
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Parameters without a gradient are left untouched.
    /// The parameter list must keep the same order between calls.
    pub fn step(&mut self, params: &mut [Parameter]) {
        if self.first.len() != params.len() {
            self.first = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let AdamConfig { lr, weight_decay, beta1, beta2, eps } = self.config;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let Some(grad) = p.grad.as_ref() else { continue };
            for (((w, &g), m), v) in p.value.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut())
            {
                let g = g + weight_decay * *w;
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(value: f64, grad: f64) -> Vec<Parameter> {
        let mut p = Parameter::new("w", Tensor::scalar(value));
        p.grad = Some(Tensor::scalar(grad));
        vec![p]
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = scalar_param(1.0, 1.0);
        let mut adam = Adam::new(AdamConfig { weight_decay: 0.0, ..AdamConfig::default() });
        adam.step(&mut params);
        // m_hat = g, v_hat = g^2 on the first step.
        let expected = 1.0 - 0.01 * 1.0 / (1.0 + 1e-8);
        assert!((params[0].value.item() - expected).abs() < 1e-15);
        assert!((params[0].value.item() - 0.99).abs() < 1e-9);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut params = scalar_param(0.7, 0.0);
        let mut adam = Adam::new(AdamConfig { weight_decay: 0.0, ..AdamConfig::default() });
        adam.step(&mut params);
        assert_eq!(params[0].value.item(), 0.7);
    }

    #[test]
    fn missing_gradient_is_skipped() {
        let mut params = vec![Parameter::new("w", Tensor::scalar(3.0))];
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params);
        assert_eq!(params[0].value.item(), 3.0);
    }

    #[test]
    fn identical_state_gives_identical_result() {
        let mut a = scalar_param(0.3, -0.2);
        let mut b = a.clone();
        let mut opt_a = Adam::new(AdamConfig::default());
        let mut opt_b = opt_a.clone();
        opt_a.step(&mut a);
        opt_b.step(&mut b);
        assert_eq!(a[0].value.item().to_bits(), b[0].value.item().to_bits());
    }

    #[test]
    fn weight_decay_pulls_toward_zero() {
        let mut params = scalar_param(2.0, 0.0);
        let mut adam = Adam::new(AdamConfig { weight_decay: 0.1, ..AdamConfig::default() });
        adam.step(&mut params);
        assert!(params[0].value.item() < 2.0);
    }
}
