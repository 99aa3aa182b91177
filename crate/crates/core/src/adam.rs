//! Adam over flat parameter slices, plus a triangular cyclic learning rate.

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64) -> Self {
        assert!((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2), "betas must lie in [0, 1)");
        Self {
            beta1,
            beta2,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Bias-corrected update direction for `grads` (without the learning rate).
    pub fn direction(&mut self, grads: &[f64]) -> Vec<f64> {
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        grads
            .iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&g, (m, v))| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                m_hat / (v_hat.sqrt() + self.eps)
            })
            .collect()
    }

    /// In-place descent step.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), grads.len());
        let dir = self.direction(grads);
        for (p, d) in params.iter_mut().zip(dir) {
            *p -= lr * d;
        }
    }
}

/// Triangular wave between `min` and `max` with the given period in
/// iterations; starts at `min`, peaks at half period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicLr {
    pub min: f64,
    pub max: f64,
    pub period: usize,
}

impl CyclicLr {
    pub fn at(&self, iteration: usize) -> f64 {
        if self.period < 2 {
            return self.min;
        }
        let phase = (iteration % self.period) as f64 / self.period as f64;
        let tri = 1.0 - (2.0 * phase - 1.0).abs();
        self.min + (self.max - self.min) * tri
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_step_has_unit_magnitude() {
        let mut adam = Adam::new(2, 0.9, 0.9);
        let mut p = [1.0, -1.0];
        adam.step(&mut p, &[0.3, -20.0], 0.1);
        assert_relative_eq!(p[0], 0.9, epsilon = 1e-6);
        assert_relative_eq!(p[1], -0.9, epsilon = 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::new(1, 0.9, 0.9);
        let mut x = [5.0];
        for k in 0..2000 {
            let lr = if k < 1000 { 0.1 } else { 0.001 };
            let g = [2.0 * (x[0] - 1.5)];
            adam.step(&mut x, &g, lr);
        }
        assert!((x[0] - 1.5).abs() < 1e-2);
    }

    #[test]
    fn cyclic_schedule_shape() {
        let lr = CyclicLr {
            min: 1e-2,
            max: 1e-1,
            period: 50,
        };
        assert_relative_eq!(lr.at(0), 1e-2);
        assert_relative_eq!(lr.at(25), 1e-1);
        assert_relative_eq!(lr.at(50), 1e-2);
        for k in 0..500 {
            let v = lr.at(k);
            assert!((1e-2 - 1e-15..=1e-1 + 1e-15).contains(&v));
        }
    }
}
