use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for a fixed list of parameter tensors.
///
/// Parameters that receive no gradient on a step (frozen) keep their
/// moments and their own bias-correction counter untouched.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    param_steps: Vec<u64>,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        AdamState {
            config,
            step: 0,
            param_steps: vec![0; params.len()],
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. `grads[i] == None` skips parameter `i`.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Option<&[f64]>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::shape(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.numel() != self.m[i].len() || g.is_some_and(|g| g.len() != p.numel()) {
                return Err(Error::shape(format!("adam parameter {i} changed shape")));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
        } = self.config;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let Some(g) = g else { continue };
            self.param_steps[i] += 1;
            let t = self.param_steps[i] as i32;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((w, &gj), mj), vj) in p.data_mut().iter_mut().zip(*g).zip(m).zip(v) {
                *mj = b1 * *mj + (1.0 - b1) * gj;
                *vj = b2 * *vj + (1.0 - b2) * gj * gj;
                let mhat = *mj / c1;
                let vhat = *vj / c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(x: f64) -> Vec<Tensor> {
        vec![Tensor::new(vec![1], vec![x]).unwrap()]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap()];
        let before = p.clone();
        let mut st = AdamState::new(AdamConfig::default(), &p);
        for _ in 0..5 {
            st.step(&mut p, &[Some(&[0.0, 0.0, 0.0])]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Bias correction makes mhat = g and vhat = g², so the step is
        // lr * g / (|g| + eps).
        for g in [3.0, -0.25, 1e3] {
            let mut p = scalar_param(1.0);
            let mut st = AdamState::new(AdamConfig::default(), &p);
            st.step(&mut p, &[Some(&[g])]).unwrap();
            let delta = p[0].data()[0] - 1.0;
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!((delta - expected).abs() < 1e-15, "{delta} vs {expected}");
            assert_eq!(delta.signum(), -g.signum());
        }
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        let mut p = scalar_param(0.0);
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(cfg, &p);
        for _ in 0..200 {
            let w = p[0].data()[0];
            let g = 2.0 * (w - 3.0);
            st.step(&mut p, &[Some(&[g])]).unwrap();
        }
        assert!((p[0].data()[0] - 3.0).abs() < 0.1, "{}", p[0].data()[0]);
    }

    #[test]
    fn skipped_params_keep_their_counter() {
        let mut p = vec![
            Tensor::new(vec![1], vec![0.0]).unwrap(),
            Tensor::new(vec![1], vec![0.0]).unwrap(),
        ];
        let mut st = AdamState::new(AdamConfig::default(), &p);
        st.step(&mut p, &[Some(&[1.0]), None]).unwrap();
        st.step(&mut p, &[Some(&[1.0]), None]).unwrap();
        assert_eq!(p[1].data()[0], 0.0);
        // A first real update on the second tensor is still a full lr step.
        st.step(&mut p, &[None, Some(&[1.0])]).unwrap();
        assert!((p[1].data()[0] + 1e-3).abs() < 1e-10);
        assert_eq!(st.step_count(), 3);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = scalar_param(0.0);
        let mut st = AdamState::new(AdamConfig::default(), &p);
        assert!(st.step(&mut p, &[Some(&[1.0, 2.0])]).is_err());
    }
}
