//! Mirror maps, Bregman divergences, the per-state proximal step and simplex projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{l1_norm, l2_norm};
use crate::mdp::Policy;
use crate::scalar::Real;

/// Potential generating the Bregman geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MirrorKind {
    /// `h(p) = Σ p log p`; divergence is KL, step is the softmax update.
    NegativeEntropy,
    /// `h(p) = ½‖p‖²`; step is a Euclidean projection.
    SquaredL2,
}

/// Mirror map with its strong-convexity constant and reference norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorMap<T> {
    pub kind: MirrorKind,
    pub lambda: T,
    pub norm_p: u32,
}

impl<T: Real> MirrorMap<T> {
    pub fn new(kind: MirrorKind) -> Self {
        match kind {
            MirrorKind::NegativeEntropy => Self::negative_entropy(),
            MirrorKind::SquaredL2 => Self::squared_l2(),
        }
    }

    pub fn negative_entropy() -> Self {
        Self {
            kind: MirrorKind::NegativeEntropy,
            lambda: T::one(),
            norm_p: 1,
        }
    }

    pub fn squared_l2() -> Self {
        Self {
            kind: MirrorKind::SquaredL2,
            lambda: T::one(),
            norm_p: 2,
        }
    }

    /// Norm the map is strongly convex against.
    pub fn ref_norm(&self, x: &[T]) -> T {
        match self.norm_p {
            1 => l1_norm(x),
            _ => l2_norm(x),
        }
    }

    /// `D_h(p‖q)`.
    pub fn bregman(&self, p: &[T], q: &[T]) -> Result<T> {
        if p.len() != q.len() {
            return Err(Error::invalid("bregman", "length mismatch"));
        }
        match self.kind {
            MirrorKind::SquaredL2 => {
                let half = T::lit(0.5);
                Ok(half * p.iter().zip(q).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>())
            }
            MirrorKind::NegativeEntropy => {
                let mut acc = T::zero();
                for (&a, &b) in p.iter().zip(q) {
                    if a > T::zero() {
                        if b <= T::zero() {
                            return Err(Error::DivergenceInfinite);
                        }
                        acc = acc + a * (a / b).ln();
                    }
                    acc = acc - a + b;
                }
                Ok(acc.max(T::zero()))
            }
        }
    }

    /// `argmax_p { η⟨p, q_row⟩ - D_h(p‖π_row) }` over the simplex.
    pub fn pmd_step(&self, pi_row: &[T], q_row: &[T], eta: T) -> Result<Vec<T>> {
        if pi_row.len() != q_row.len() || pi_row.is_empty() {
            return Err(Error::invalid("pmd_step", "row lengths differ or are empty"));
        }
        if !(eta >= T::zero()) || !eta.is_finite() {
            return Err(Error::invalid("eta", format!("{eta} must be finite and nonnegative")));
        }
        match self.kind {
            MirrorKind::NegativeEntropy => {
                if pi_row.iter().any(|&p| !(p > T::zero())) {
                    return Err(Error::invalid("pi_row", "entropy step needs a strictly positive row"));
                }
                if eta == T::zero() {
                    return Ok(pi_row.to_vec());
                }
                let logits: Vec<T> = pi_row.iter().zip(q_row).map(|(&p, &q)| p.ln() + eta * q).collect();
                let top = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                let w: Vec<T> = logits.iter().map(|&l| (l - top).exp()).collect();
                let z: T = w.iter().copied().sum();
                let floor = T::lit(1e-300).max(T::min_positive_value());
                Ok(w.into_iter().map(|x| (x / z).max(floor)).collect())
            }
            MirrorKind::SquaredL2 => {
                if eta == T::zero() {
                    return Ok(pi_row.to_vec());
                }
                let v: Vec<T> = pi_row.iter().zip(q_row).map(|(&p, &q)| p + eta * q).collect();
                project_simplex(&v)
            }
        }
    }

    /// Applies [`MirrorMap::pmd_step`] to every state.
    pub fn pmd_update(&self, pi: &Policy<T>, q: &[T], eta: T) -> Result<Policy<T>> {
        let na = pi.num_actions();
        let rows = (0..pi.num_states())
            .map(|s| self.pmd_step(pi.row(s), &q[s * na..(s + 1) * na], eta))
            .collect::<Result<Vec<_>>>()?;
        Policy::from_rows(rows)
    }

    /// `max_s D_h(p(·|s)‖q(·|s))`.
    pub fn max_divergence(&self, p: &Policy<T>, q: &Policy<T>) -> Result<T> {
        (0..p.num_states()).try_fold(T::zero(), |m, s| Ok(m.max(self.bregman(p.row(s), q.row(s))?)))
    }
}

/// Euclidean projection onto the probability simplex by the sorted-threshold rule.
///
/// Candidates whose threshold margin is within a few ulps of zero are left
/// out of the support, so a row whose exact projection is a vertex comes
/// back as an exact one-hot vector.
pub fn project_simplex<T: Real>(v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::invalid("v", "cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("v", "entries must be finite"));
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].partial_cmp(&v[i]).expect("finite").then(i.cmp(&j)));

    let scale = v.iter().fold(T::one(), |m, x| m.max(x.abs()));
    let slack = T::epsilon() * T::lit(8.0) * scale;
    let mut cum = T::zero();
    let mut support = 1;
    let mut tau = v[order[0]] - T::one();
    for (j, &i) in order.iter().enumerate() {
        cum = cum + v[i];
        let t = (cum - T::one()) / T::count(j + 1);
        if j == 0 || v[i] - t > slack {
            support = j + 1;
            tau = t;
        }
    }
    let mut out = vec![T::zero(); v.len()];
    if support == 1 {
        out[order[0]] = T::one();
        return Ok(out);
    }
    for &i in &order[..support] {
        out[i] = (v[i] - tau).max(T::zero());
    }
    Ok(out)
}

/// Per-state shift bound `η ‖Q(s,·)‖₁ / λ` on `‖π⁺(·|s) - π(·|s)‖∞`.
pub fn shift_bound<T: Real>(map: &MirrorMap<T>, q_row: &[T], eta: T) -> T {
    eta * l1_norm(q_row) / map.lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bregman_examples() {
        let ent = MirrorMap::<f64>::negative_entropy();
        let l2 = MirrorMap::<f64>::squared_l2();
        assert_eq!(ent.bregman(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(l2.bregman(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((ent.bregman(&[1.0, 0.0], &[0.1, 0.9]).unwrap() - 10f64.ln()).abs() < 1e-15);
        assert_eq!(ent.bregman(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::DivergenceInfinite));
    }

    #[test]
    fn softmax_closed_form() {
        let ent = MirrorMap::<f64>::negative_entropy();
        let out = ent.pmd_step(&[0.5, 0.5], &[1.0, 0.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((out[0] - e / (1.0 + e)).abs() < 1e-15);
        assert!((out[1] - 1.0 / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn entropy_step_rejects_boundary_rows() {
        let ent = MirrorMap::<f64>::negative_entropy();
        assert!(ent.pmd_step(&[1.0, 0.0], &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]).unwrap(), vec![0.2, 0.3, 0.5]);
        let third = project_simplex::<f64>(&[4.0, 4.0, 4.0]).unwrap();
        assert!(third.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[5.0, 1.0, -3.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(project_simplex::<f64>(&[]).is_err());
    }

    #[test]
    fn constant_shift_leaves_row() {
        let pi = [0.2, 0.5, 0.3];
        for map in [MirrorMap::<f64>::negative_entropy(), MirrorMap::squared_l2()] {
            let out = map.pmd_step(&pi, &[2.0, 2.0, 2.0], 3.0).unwrap();
            for (a, b) in out.iter().zip(&pi) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
