use crate::codec::{ByteReader, ByteWriter};
use crate::{Error, Result};

/// Bias-corrected ADAM state for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.len(), "parameter/moment length mismatch");
        assert_eq!(grads.len(), self.len(), "gradient/moment length mismatch");
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }

    pub fn write(&self, w: &mut ByteWriter) {
        for x in [self.learning_rate, self.beta1, self.beta2, self.epsilon] {
            w.f64(x);
        }
        w.f64s(&self.first_moment);
        w.f64s(&self.second_moment);
        w.u64(self.step_count);
    }

    pub fn read(r: &mut ByteReader) -> Result<Self> {
        let learning_rate = r.f64()?;
        let beta1 = r.f64()?;
        let beta2 = r.f64()?;
        let epsilon = r.f64()?;
        let first_moment = r.f64s()?;
        let second_moment = r.f64s()?;
        if first_moment.len() != second_moment.len() {
            return Err(Error::Checkpoint("ADAM moment lengths differ".into()));
        }
        let step_count = r.u64()?;
        Ok(Self { learning_rate, beta1, beta2, epsilon, first_moment, second_moment, step_count })
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = AdamState::new(2, 0.01);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[3.0, -0.2]);
        assert_relative_eq!(p[0], 1.0 - 0.01, epsilon = 1e-9);
        assert_relative_eq!(p[1], -1.0 + 0.01, epsilon = 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = AdamState::new(3, 0.1);
        let mut p = vec![0.5, 1.5, -2.0];
        adam.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![0.5, 1.5, -2.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn three_steps_match_scalar_recurrence() {
        let (lr, b1, b2, eps, g) = (0.05, 0.9, 0.999, 1e-8, 0.7);
        let mut adam = AdamState::new(1, lr);
        let mut p = [2.0];
        let (mut m, mut v, mut x) = (0.0, 0.0, 2.0);
        for t in 1..=3 {
            adam.step(&mut p, &[g]);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - f64::powi(b1, t));
            let vh = v / (1.0 - f64::powi(b2, t));
            x -= lr * mh / (vh.sqrt() + eps);
            assert_eq!(p[0], x);
        }
    }

    #[test]
    fn constant_gradient_step_size_tends_to_lr() {
        let mut adam = AdamState::new(1, 1e-3);
        let mut p = [0.0];
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            adam.step(&mut p, &[0.37]);
            last = before - p[0];
        }
        assert_relative_eq!(last, 1e-3, max_relative = 1e-6);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert_relative_eq!(g[0], 0.6);
        assert_relative_eq!(g[1], 0.8);
        let mut small = vec![0.1];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.1]);
    }
}
