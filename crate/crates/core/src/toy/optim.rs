//! SGD and bias-corrected Adam over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerSpec {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerSpec {
    pub fn adam(lr: f64) -> Self {
        Self::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Self::Sgd { lr } | Self::Adam { lr, .. } => lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub spec: OptimizerSpec,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(spec: OptimizerSpec, params: usize) -> Self {
        let n = if matches!(spec, OptimizerSpec::Adam { .. }) { params } else { 0 };
        Self {
            spec,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Parameter step `theta_{t+1} - theta_t` the next update would take for
    /// `grad`, without touching the state.
    pub fn step_delta(&self, grad: &[f64]) -> Result<Vec<f64>> {
        self.step_delta_with_lr(grad, self.spec.lr())
    }

    pub fn step_delta_with_lr(&self, grad: &[f64], lr: f64) -> Result<Vec<f64>> {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(UdsError::NonFiniteUpdate { what: "gradient".into() });
        }
        match self.spec {
            OptimizerSpec::Sgd { .. } => Ok(grad.iter().map(|g| -lr * g).collect()),
            OptimizerSpec::Adam { beta1, beta2, eps, .. } => {
                if self.m.len() != grad.len() {
                    return Err(UdsError::DimensionMismatch {
                        expected: format!("{} gradient entries", self.m.len()),
                        actual: format!("{}", grad.len()),
                    });
                }
                let t = self.t + 1;
                let c1 = 1.0 - beta1.powf(t as f64);
                let c2 = 1.0 - beta2.powf(t as f64);
                Ok(grad
                    .iter()
                    .zip(self.m.iter().zip(&self.v))
                    .map(|(&g, (&m, &v))| {
                        let m = beta1 * m + (1.0 - beta1) * g;
                        let v = beta2 * v + (1.0 - beta2) * g * g;
                        let m_hat = if c1 > 0.0 { m / c1 } else { m };
                        let v_hat = if c2 > 0.0 { v / c2 } else { v };
                        -lr * m_hat / (v_hat.sqrt() + eps)
                    })
                    .collect())
            }
        }
    }

    /// Applies one update in place.
    pub fn apply_update(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != grad.len() {
            return Err(UdsError::DimensionMismatch {
                expected: format!("{} gradient entries", theta.len()),
                actual: format!("{}", grad.len()),
            });
        }
        let delta = self.step_delta(grad)?;
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(UdsError::NonFiniteUpdate { what: "parameter update".into() });
        }
        if let OptimizerSpec::Adam { beta1, beta2, .. } = self.spec {
            for ((m, v), &g) in self.m.iter_mut().zip(self.v.iter_mut()).zip(grad) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
            }
        }
        self.t += 1;
        for (p, d) in theta.iter_mut().zip(delta) {
            *p += d;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_zero_grad_keeps_params() {
        let mut s = OptimizerState::new(OptimizerSpec::Sgd { lr: 0.5 }, 3);
        let mut theta = vec![1.0, -2.0, 3.0];
        s.apply_update(&mut theta, &[0.0; 3]).unwrap();
        assert_eq!(theta, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn adam_first_step_closed_form() {
        let spec = OptimizerSpec::adam(0.01);
        let mut s = OptimizerState::new(spec, 3);
        let g = [0.3, -2.0, 1e-3];
        let mut theta = vec![0.0; 3];
        s.apply_update(&mut theta, &g).unwrap();
        for (t, &gi) in theta.iter().zip(&g) {
            let want = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((t - want).abs() < 1e-15, "{t} vs {want}");
        }
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_step_delta_matches_apply() {
        let mut s = OptimizerState::new(OptimizerSpec::adam(0.1), 2);
        let mut theta = vec![0.0, 0.0];
        s.apply_update(&mut theta, &[1.0, -1.0]).unwrap();
        let before = theta.clone();
        let pred = s.step_delta(&[0.5, 0.25]).unwrap();
        s.apply_update(&mut theta, &[0.5, 0.25]).unwrap();
        for i in 0..2 {
            assert!((theta[i] - (before[i] + pred[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = OptimizerState::new(OptimizerSpec::Sgd { lr: 1.0 }, 1);
        assert!(s.apply_update(&mut [0.0], &[f64::NAN]).is_err());
        assert!(s.apply_update(&mut [0.0], &[1.0, 2.0]).is_err());
    }
}
