use crate::error::{Error, Result};
use crate::gnn::{Model, Scalar};

/// Adam moments for every parameter tensor of a [`Model`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new<F: Scalar>(model: &Model<F>, lr: f64) -> Self {
        let zeros: Vec<Vec<f32>> = model.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }

    /// One bias-corrected Adam update of `model` from `grads`.
    pub fn step<F: Scalar>(&mut self, model: &mut Model<F>, grads: &Model<F>) -> Result<()> {
        let g = grads.tensors();
        let p = model.tensors_mut();
        if p.len() != self.m.len()
            || g.len() != p.len()
            || p.iter().zip(&g).zip(&self.m).any(|((p, (_, g)), m)| p.len() != g.len() || p.len() != m.len())
        {
            return Err(Error::Shape("optimizer state does not match model".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        let step_size = self.lr / c1;
        let c2_sqrt = c2.sqrt();
        for (((param, (_, grad)), m), v) in p.into_iter().zip(g).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..param.len() {
                let gi = grad[i].as_f64();
                let mi = b1 * f64::from(m[i]) + (1.0 - b1) * gi;
                let vi = b2 * f64::from(v[i]) + (1.0 - b2) * gi * gi;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let delta = step_size * mi / (vi.sqrt() / c2_sqrt + self.eps);
                param[i] = param[i] - F::of(delta);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::ModelConfig;
    use crate::graph::FeatureMode;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut m = Model::<f32>::init(ModelConfig::small(FeatureMode::Perfect), 1).unwrap();
        let before = m.clone();
        let g = m.zeros_like();
        let mut a = AdamState::new(&m, 1e-3);
        a.step(&mut m, &g).unwrap();
        assert_eq!(m, before);
        assert_eq!(a.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut m = Model::<f64>::init(ModelConfig::small(FeatureMode::Perfect), 1).unwrap();
        let before = m.clone();
        let mut g = m.zeros_like();
        g.convs[0].bias[0] = 0.3;
        g.convs[0].bias[1] = -2.0;
        let mut a = AdamState::new(&m, 1e-3);
        a.step(&mut m, &g).unwrap();
        let d0 = m.convs[0].bias[0] - before.convs[0].bias[0];
        let d1 = m.convs[0].bias[1] - before.convs[0].bias[1];
        assert!((d0 + 1e-3).abs() < 1e-9, "{d0}");
        assert!((d1 - 1e-3).abs() < 1e-9, "{d1}");
    }

    #[test]
    fn shape_mismatch() {
        let mut m = Model::<f32>::init(ModelConfig::small(FeatureMode::Perfect), 1).unwrap();
        let other = Model::<f32>::init(ModelConfig::small(FeatureMode::Circuit), 1).unwrap();
        let mut a = AdamState::new(&other, 1e-3);
        let g = m.zeros_like();
        assert!(matches!(a.step(&mut m, &g), Err(Error::Shape(_))));
    }
}
