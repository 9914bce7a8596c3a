use super::params::ModelParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Plain SGD (no momentum) with step decay at fractions of the epoch budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub base_lr: f64,
    /// `(epoch fraction, multiplier)`: once `epoch ≥ fraction · max_epochs`
    /// the multiplier applies.
    pub schedule: Vec<(f64, f64)>,
    pub max_epochs: usize,
    pub epoch: usize,
}

impl SgdState {
    pub fn new(base_lr: f64, schedule: Vec<(f64, f64)>, max_epochs: usize) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::param("base_lr", format!("must be positive, got {base_lr}")));
        }
        if schedule
            .iter()
            .any(|&(f, m)| !(0.0..=1.0).contains(&f) || !(m > 0.0 && m.is_finite()))
        {
            return Err(Error::param("schedule", format!("bad entries {schedule:?}")));
        }
        Ok(Self {
            base_lr,
            schedule,
            max_epochs,
            epoch: 0,
        })
    }

    /// Decay by 0.1 at 70 % and again at 90 % of the epoch budget.
    pub fn step_decay(base_lr: f64, max_epochs: usize) -> Result<Self> {
        Self::new(base_lr, vec![(0.7, 0.1), (0.9, 0.1)], max_epochs)
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.schedule
            .iter()
            .filter(|&&(frac, _)| epoch as f64 >= (frac * self.max_epochs as f64 - 1e-9).ceil())
            .fold(self.base_lr, |lr, &(_, mult)| lr * mult)
    }

    pub fn lr(&self) -> f64 {
        self.lr_at(self.epoch)
    }
}

/// `p ← p − lr · g` for every tensor, gradients given in parameter order.
pub fn sgd_step(params: &mut ModelParams, grads: &[Tensor], state: &SgdState) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::InvalidInput(format!(
            "{} gradients for {} parameter tensors",
            grads.len(),
            params.len()
        )));
    }
    for ((name, p), g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::InvalidInput(format!(
                "gradient for `{name}` has shape {:?}, parameter has {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    let lr = state.lr();
    for (p, g) in params.tensors_mut().zip(grads) {
        for (v, &d) in p.data_mut().iter_mut().zip(g.data()) {
            *v -= lr * d;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_on_quadratic() {
        // f(w) = w², f'(1) = 2.
        let mut p = ModelParams::from_tensors(vec![("w".into(), Tensor::new(vec![1], vec![1.0]).unwrap())]);
        let st = SgdState::new(0.1, vec![], 1).unwrap();
        sgd_step(&mut p, &[Tensor::new(vec![1], vec![2.0]).unwrap()], &st).unwrap();
        assert!((p.get("w").unwrap().data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn decay_schedule_thresholds() {
        let mut st = SgdState::step_decay(0.005, 100).unwrap();
        st.set_epoch(69);
        assert!((st.lr() - 0.005).abs() < 1e-15);
        st.set_epoch(70);
        assert!((st.lr() - 0.0005).abs() < 1e-15);
        st.set_epoch(89);
        assert!((st.lr() - 0.0005).abs() < 1e-15);
        st.set_epoch(90);
        assert!((st.lr() - 0.00005).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_bit_exact_noop() {
        let t = Tensor::new(vec![3], vec![1.25, -3.5e-7, 42.0]).unwrap();
        let mut p = ModelParams::from_tensors(vec![("w".into(), t.clone())]);
        let st = SgdState::new(0.3, vec![], 1).unwrap();
        sgd_step(&mut p, &[Tensor::zeros(&[3])], &st).unwrap();
        assert_eq!(p.get("w").unwrap(), &t);
    }

    #[test]
    fn misaligned_gradients_rejected() {
        let mut p = ModelParams::from_tensors(vec![("w".into(), Tensor::zeros(&[2]))]);
        let st = SgdState::new(0.1, vec![], 1).unwrap();
        assert!(sgd_step(&mut p, &[], &st).is_err());
        assert!(sgd_step(&mut p, &[Tensor::zeros(&[3])], &st).is_err());
    }
}
