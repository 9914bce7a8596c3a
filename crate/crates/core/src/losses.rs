//! Student objective: classification + feature distillation + pairwise
//! covariance alignment across domains.

use crate::diffengine::{Graph, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl LossWeights {
    pub const ERM: LossWeights = LossWeights { gamma1: 0.0, gamma2: 0.0 };

    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        for (name, v) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { gamma1, gamma2 })
    }

    pub fn is_erm(&self) -> bool {
        self.gamma1 == 0.0 && self.gamma2 == 0.0
    }
}

/// Per-domain feature matrices sharing a column count, each with at least 2 rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainFeatureSet {
    matrices: Vec<Tensor>,
}

impl DomainFeatureSet {
    pub fn new(matrices: Vec<Tensor>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InsufficientDomains(0));
        };
        if first.rank() != 2 {
            return Err(Error::InvalidInput(format!("feature matrix must be rank 2, got {:?}", first.shape())));
        }
        let d = first.shape()[1];
        for m in &matrices {
            if m.rank() != 2 || m.shape()[1] != d {
                return Err(Error::InvalidInput(format!(
                    "feature matrices disagree on width: {:?} vs d = {d}",
                    m.shape()
                )));
            }
            if m.shape()[0] < 2 {
                return Err(Error::InsufficientSamples(m.shape()[0]));
            }
        }
        Ok(Self { matrices })
    }

    pub fn n_domains(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].shape()[1]
    }

    pub fn matrices(&self) -> &[Tensor] {
        &self.matrices
    }
}

/// Batch-mean cross-entropy of integer labels.
pub fn cross_entropy(g: &mut Graph, logits: Var, labels: &[usize]) -> Result<Var> {
    g.softmax_cross_entropy(logits, labels)
}

/// Mean squared feature difference. The teacher side must be frozen.
pub fn mse_distill(g: &mut Graph, student: Var, teacher: Var) -> Result<Var> {
    if g.requires_grad(teacher) {
        return Err(Error::InvalidInput("teacher features must not require gradients".into()));
    }
    if g.shape(student) != g.shape(teacher) {
        return Err(Error::InvalidInput(format!(
            "student features {:?} vs teacher features {:?}",
            g.shape(student),
            g.shape(teacher)
        )));
    }
    g.mse(student, teacher)
}

/// `C = (1/N)(VᵀV − (1/N)(1ᵀV)ᵀ(1ᵀV))` for a `(N×d)` feature matrix.
pub fn domain_covariance(g: &mut Graph, v: Var) -> Result<Var> {
    let shape = g.shape(v).to_vec();
    let &[n, _d] = shape.as_slice() else {
        return Err(Error::InvalidInput(format!("feature matrix must be rank 2, got {shape:?}")));
    };
    if n < 2 {
        return Err(Error::InsufficientSamples(n));
    }
    let inv_n = 1.0 / n as f64;
    let ones = g.constant(Tensor::new(vec![1, n], vec![1.0; n])?)?;
    let col_sums = g.matmul(ones, v)?;
    let col_sums_t = g.transpose(col_sums)?;
    let outer = g.matmul(col_sums_t, col_sums)?;
    let outer = g.scale(outer, inv_n)?;
    let vt = g.transpose(v)?;
    let gram = g.matmul(vt, v)?;
    let centred = g.subtract(gram, outer)?;
    g.scale(centred, inv_n)
}

/// Mean over unordered domain pairs of `‖C_u − C_v‖²_F / (4d²)`.
pub fn coral_align(g: &mut Graph, groups: &[Var]) -> Result<Var> {
    if groups.len() < 2 {
        return Err(Error::InsufficientDomains(groups.len()));
    }
    let d = g.shape(groups[0]).get(1).copied().unwrap_or(0);
    if groups.iter().any(|&v| g.shape(v).len() != 2 || g.shape(v)[1] != d) {
        return Err(Error::InvalidInput("domain feature groups disagree on width".into()));
    }
    let covs = groups.iter().map(|&v| domain_covariance(g, v)).collect::<Result<Vec<_>>>()?;
    let mut total: Option<Var> = None;
    for u in 0..covs.len() {
        for w in u + 1..covs.len() {
            let diff = g.subtract(covs[u], covs[w])?;
            let sq = g.frobenius_sq(diff)?;
            total = Some(match total {
                None => sq,
                Some(t) => g.add(t, sq)?,
            });
        }
    }
    let n = groups.len() as f64;
    let factor = 2.0 / (n * (n - 1.0)) / (4.0 * (d * d) as f64);
    g.scale(total.expect("at least one pair"), factor)
}

/// `coral_align` evaluated outside any training graph.
pub fn coral_align_value(set: &DomainFeatureSet) -> Result<f64> {
    let mut g = Graph::new();
    let vars = set
        .matrices()
        .iter()
        .map(|m| g.constant(m.clone()))
        .collect::<Result<Vec<_>>>()?;
    let l = coral_align(&mut g, &vars)?;
    Ok(g.value(l).item())
}

/// `cls + γ1·mse + γ2·align`. Terms that are `None` contribute nothing.
pub fn total_student_loss(
    g: &mut Graph,
    cls: Var,
    mse: Option<Var>,
    align: Option<Var>,
    weights: LossWeights,
) -> Result<Var> {
    for (name, term) in [("loss_cls", Some(cls)), ("loss_mse", mse), ("loss_align", align)] {
        if let Some(v) = term {
            if !g.value(v).is_scalar() {
                return Err(Error::InvalidInput(format!("{name} must be scalar, got {:?}", g.shape(v))));
            }
            if !g.value(v).is_finite() {
                return Err(Error::Numeric { node: name.into() });
            }
        }
    }
    let mut total = cls;
    for (term, w) in [(mse, weights.gamma1), (align, weights.gamma2)] {
        if let Some(v) = term {
            if w != 0.0 {
                let s = g.scale(v, w)?;
                total = g.add(total, s)?;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(&[3, 4])).unwrap();
        let l = cross_entropy(&mut g, z, &[0, 1, 3]).unwrap();
        assert!((g.value(l).item() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_decreases_with_margin() {
        let loss = |margin: f64| {
            let mut g = Graph::new();
            let z = g.constant(t(&[1, 2], &[margin, 0.0])).unwrap();
            let l = cross_entropy(&mut g, z, &[0]).unwrap();
            g.value(l).item()
        };
        assert!(loss(10.0) < loss(1.0));
        assert!(loss(10.0) > 0.0);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(&[1, 2])).unwrap();
        assert!(matches!(cross_entropy(&mut g, z, &[2]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn mse_examples() {
        let mut g = Graph::new();
        let a = g.param(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let b = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let c = g.constant(t(&[2, 2], &[0.0, 1.0, 2.0, 3.0])).unwrap();
        let same = mse_distill(&mut g, a, b).unwrap();
        let plus_one = mse_distill(&mut g, a, c).unwrap();
        assert_eq!(g.value(same).item(), 0.0);
        assert_eq!(g.value(plus_one).item(), 1.0);
        let grads = g.backward(plus_one).unwrap();
        assert!(grads.get(c).is_none());
        assert!(grads.get(a).is_some());
        // A trainable teacher is refused.
        assert!(mse_distill(&mut g, c, a).is_err());
        let wrong = g.constant(Tensor::zeros(&[1, 4])).unwrap();
        assert!(mse_distill(&mut g, a, wrong).is_err());
    }

    #[test]
    fn covariance_hand_example() {
        let mut g = Graph::new();
        let v = g.constant(t(&[2, 2], &[1.0, 0.0, -1.0, 0.0])).unwrap();
        let c = domain_covariance(&mut g, v).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 0.0, 0.0, 0.0]);

        let same = g.constant(t(&[3, 2], &[2.0, 5.0, 2.0, 5.0, 2.0, 5.0])).unwrap();
        let c = domain_covariance(&mut g, same).unwrap();
        assert!(g.value(c).data().iter().all(|v| v.abs() < 1e-12));

        let one = g.constant(t(&[1, 2], &[1.0, 2.0])).unwrap();
        assert!(matches!(domain_covariance(&mut g, one), Err(Error::InsufficientSamples(1))));
    }

    #[test]
    fn coral_two_domain_coefficient() {
        let a = t(&[2, 2], &[1.0, 0.0, -1.0, 0.0]);
        let b = t(&[2, 2], &[0.0, 2.0, 0.0, -2.0]);
        // C_a = diag(1, 0), C_b = diag(0, 4): ‖·‖² = 17, d = 2.
        let set = DomainFeatureSet::new(vec![a.clone(), b]).unwrap();
        assert!((coral_align_value(&set).unwrap() - 17.0 / 16.0).abs() < 1e-12);
        let same = DomainFeatureSet::new(vec![a.clone(), a.clone(), a]).unwrap();
        assert_eq!(coral_align_value(&same).unwrap(), 0.0);
    }

    #[test]
    fn coral_needs_two_domains() {
        let mut g = Graph::new();
        let v = g.constant(Tensor::zeros(&[3, 2])).unwrap();
        assert!(matches!(coral_align(&mut g, &[v]), Err(Error::InsufficientDomains(1))));
        assert!(DomainFeatureSet::new(vec![Tensor::zeros(&[1, 2])]).is_err());
        assert!(DomainFeatureSet::new(vec![Tensor::zeros(&[2, 2]), Tensor::zeros(&[2, 3])]).is_err());
    }

    #[test]
    fn total_loss_arithmetic() {
        let mut g = Graph::new();
        let cls = g.constant(Tensor::scalar(1.0)).unwrap();
        let mse = g.constant(Tensor::scalar(2.0)).unwrap();
        let align = g.constant(Tensor::scalar(3.0)).unwrap();
        let w = LossWeights::new(0.5, 0.1).unwrap();
        let l = total_student_loss(&mut g, cls, Some(mse), Some(align), w).unwrap();
        assert!((g.value(l).item() - 2.3).abs() < 1e-12);
        let erm = total_student_loss(&mut g, cls, Some(mse), Some(align), LossWeights::ERM).unwrap();
        assert_eq!(erm, cls);
    }

    #[test]
    fn weights_validated() {
        assert!(LossWeights::new(-0.1, 0.0).is_err());
        assert!(LossWeights::new(0.0, f64::NAN).is_err());
        assert!(LossWeights::new(0.0, 0.0).unwrap().is_erm());
    }
}
