/// Bias-corrected adaptive-moment optimizer over a flat parameter slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one descent step along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "optimizer/parameter shape mismatch");
        assert_eq!(grads.len(), self.m.len(), "optimizer/gradient shape mismatch");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_signed_learning_rate() {
        for g in [3.0, -0.01, 250.0] {
            let mut opt = Adam::new(1, 1e-3);
            let mut p = [0.5];
            opt.step(&mut p, &[g]);
            let expected = 0.5 - 1e-3 * g.signum();
            assert!((p[0] - expected).abs() < 1e-9, "g={g}: {}", p[0]);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut opt = Adam::new(3, 0.1);
        let mut p = [1.0, -2.0, 3.0];
        for _ in 0..10 {
            opt.step(&mut p, &[0.0; 3]);
        }
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn constant_gradient_descends() {
        let mut opt = Adam::new(2, 0.01);
        let mut p = [0.0, 0.0];
        for _ in 0..100 {
            opt.step(&mut p, &[2.0, -0.5]);
        }
        assert!(p[0] < -0.5 && p[1] > 0.5);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut opt = Adam::new(1, 0.05);
        let mut p = [3.0];
        for _ in 0..2000 {
            let g = 2.0 * (p[0] - 1.25);
            opt.step(&mut p, &[g]);
        }
        assert!((p[0] - 1.25).abs() < 1e-3);
    }
}
