use super::Parameters;
use crate::error::{Error, Result};

/// Adam with bias correction, over any [`Parameters`] value.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: Parameters + ?Sized>(params: &P, lr: f64) -> Self {
        let shapes: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update. Fails without touching anything if a gradient is not finite
    /// or shapes disagree.
    pub fn step<P, G>(&mut self, params: &mut P, grads: &G) -> Result<()>
    where
        P: Parameters + ?Sized,
        G: Parameters + ?Sized,
    {
        let gs = grads.param_slices();
        if gs.len() != self.first.len()
            || gs.iter().zip(&self.first).any(|(g, m)| g.len() != m.len())
        {
            return Err(Error::Dimension {
                what: "Adam gradient tensors",
                expected: self.first.iter().map(Vec::len).sum(),
                got: gs.iter().map(|g| g.len()).sum(),
            });
        }
        for (t, g) in gs.iter().enumerate() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite gradient {} at tensor {t}, index {i}",
                    g[i]
                )));
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let mut ps = params.param_slices_mut();
        if ps.len() != gs.len() {
            return Err(Error::Dimension {
                what: "Adam parameter tensors",
                expected: gs.len(),
                got: ps.len(),
            });
        }
        for (t, p) in ps.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.first[t], &mut self.second[t], gs[t]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Plain flat vector, handy for scalar parameters (log-std) and tests.
impl Parameters for Vec<f64> {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}
