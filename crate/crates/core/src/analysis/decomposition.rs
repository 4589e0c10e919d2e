//! Pathwise decomposition of the critic bias `⟨π*(·|s) - π_k(·|s), Q^{π_k}(s,·) - Q^k(s,·)⟩`
//! into a start term and four families of per-iteration terms.
//!
//! With `A_j = I - αΣ_j(I - γP^{π_j}_{SA})` and `J_s` the projector onto the
//! rows of state `s`, the critic error obeys
//! `Q^{π_j} - Q^j = A_j(Q^{π_j} - Q^{j-1}) - αω̄_{j-1}`, and unrolling it gives
//! `lhs = B_0 + Σ_j (C_j + D_j + E_j - F_j)` exactly for every realization.

use serde::{Deserialize, Serialize};

use crate::algo::{AlgoKind, RunResult};
use crate::chain::{composed_weights, BehaviorModel};
use crate::error::{Error, Result};
use crate::linalg::{dot, sub, Matrix};
use crate::mdp::{policy_value, transition_matrix_sa, Policy, QVec, TabularMdp};
use crate::scalar::Real;

/// Terms of the decomposition at one `(k, s)`; `c[j-1]` holds `C_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDecomposition<T> {
    pub k: usize,
    pub state: usize,
    pub lhs: T,
    pub b0: T,
    pub c: Vec<T>,
    pub d: Vec<T>,
    pub e: Vec<T>,
    pub f: Vec<T>,
    /// `|lhs - (b0 + Σ_j (c_j + d_j + e_j - f_j))|`.
    pub residual: T,
}

impl<T: Real> BiasDecomposition<T> {
    pub fn rhs(&self) -> T {
        let mut acc = self.b0;
        for j in 0..self.c.len() {
            acc = acc + self.c[j] + self.d[j] + self.e[j] - self.f[j];
        }
        acc
    }

    /// Whether `residual <= tol (1 + |lhs|)`.
    pub fn holds(&self, tol: T) -> bool {
        self.residual <= tol * (T::one() + self.lhs.abs())
    }
}

struct Prepared<T> {
    na: usize,
    pis: Vec<Policy<T>>,
    /// `A_j` for `j = 0..=k`.
    a: Vec<Matrix<T>>,
    /// `Q^{π_j}` for `j = 0..=k`.
    q_pi: Vec<QVec<T>>,
    q: Vec<QVec<T>>,
    omega: Vec<QVec<T>>,
    pi_star: Vec<T>,
}

fn prepare<T: Real>(
    run: &RunResult<T>,
    k: usize,
    mdp: &TabularMdp<T>,
    behavior: &BehaviorModel<T>,
    alpha: T,
    pi_star: &Policy<T>,
    s: usize,
) -> Result<Prepared<T>> {
    if run.kind == AlgoKind::BatchQ {
        return Err(Error::invalid("run", "decomposition needs a TD-PMD run, got batch Q-learning"));
    }
    if run.trace.len() <= k {
        return Err(Error::TraceTooShort {
            need: k,
            have: run.trace.len().saturating_sub(1),
        });
    }
    if s >= mdp.num_states() {
        return Err(Error::invalid("state", format!("{s} out of range")));
    }
    let n = mdp.num_pairs();
    let gamma = mdp.gamma();
    let mut a = Vec::with_capacity(k + 1);
    let mut q_pi = Vec::with_capacity(k + 1);
    for rec in &run.trace[..=k] {
        let weights = match run.kind {
            AlgoKind::Approximate => composed_weights(mdp, &behavior.pi_b, &rec.pi_k)?,
            _ => behavior.sigma.clone(),
        };
        let p = transition_matrix_sa(mdp, &rec.pi_k);
        a.push(Matrix::from_fn(n, n, |i, j| {
            let id = if i == j { T::one() } else { T::zero() };
            id - alpha * weights[i] * (id - gamma * p[(i, j)])
        }));
        q_pi.push(policy_value(mdp, &rec.pi_k)?.1);
    }
    Ok(Prepared {
        na: mdp.num_actions(),
        pis: run.trace[..=k].iter().map(|r| r.pi_k.clone()).collect(),
        a,
        q_pi,
        q: run.trace[..=k].iter().map(|r| r.q_k.clone()).collect(),
        omega: run.trace[..k].iter().map(|r| r.omega_bar.clone()).collect(),
        pi_star: pi_star.probs().to_vec(),
    })
}

/// `J_s (x - y)` for policies stored as state-major vectors.
fn state_block<T: Real>(x: &[T], y: &[T], s: usize, na: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for i in s * na..(s + 1) * na {
        out[i] = x[i] - y[i];
    }
    out
}

fn apply_transpose_pow<T: Real>(a: &Matrix<T>, mut v: Vec<T>, p: usize) -> Vec<T> {
    for _ in 0..p {
        v = a.vec_mul(&v);
    }
    v
}

/// Decomposes the bias at iteration `k` and state `s` of a TD-PMD run.
///
/// `Σ_j` is the stationary weight of `behavior` for expected TD-PMD and the
/// composed weight `ν^{π_b∘π_j} π_b` for approximate TD-PMD; `alpha` must be
/// the critic step of the run.
pub fn bias_decomposition<T: Real>(
    run: &RunResult<T>,
    k: usize,
    mdp: &TabularMdp<T>,
    behavior: &BehaviorModel<T>,
    alpha: T,
    pi_star: &Policy<T>,
    s: usize,
) -> Result<BiasDecomposition<T>> {
    let p = prepare(run, k, mdp, behavior, alpha, pi_star, s)?;
    let na = p.na;
    let u = |j: usize| state_block(&p.pi_star, p.pis[j].probs(), s, na);
    let err = |j: usize| sub(&p.q_pi[j], &p.q[j]);

    let lhs = dot(&u(k), &err(k));
    let b0 = dot(&apply_transpose_pow(&p.a[0], u(0), k), &err(0));
    let (mut c, mut d, mut e, mut f) = (vec![], vec![], vec![], vec![]);
    for j in 1..=k {
        let pw = k - j + 1;
        let uj = u(j);
        let prev_err = err(j - 1);
        c.push(dot(
            &apply_transpose_pow(&p.a[j], uj.clone(), pw),
            &sub(&p.q_pi[j], &p.q_pi[j - 1]),
        ));
        let shift = state_block(p.pis[j - 1].probs(), p.pis[j].probs(), s, na);
        d.push(dot(&apply_transpose_pow(&p.a[j], shift, pw), &prev_err));
        let u_prev = u(j - 1);
        let cur = apply_transpose_pow(&p.a[j], u_prev.clone(), pw);
        let old = apply_transpose_pow(&p.a[j - 1], u_prev, pw);
        e.push(dot(&sub(&cur, &old), &prev_err));
        let scaled: Vec<T> = p.omega[j - 1].iter().map(|&w| alpha * w).collect();
        f.push(dot(&apply_transpose_pow(&p.a[j], uj, pw - 1), &scaled));
    }
    Ok(finish(k, s, lhs, b0, c, d, e, f))
}

/// Same decomposition built from explicit matrices: `E_s` selects the rows of
/// state `s`, `J_s = E_sᵀE_s`, and powers of `A_j` are formed in full.
pub fn bias_decomposition_explicit<T: Real>(
    run: &RunResult<T>,
    k: usize,
    mdp: &TabularMdp<T>,
    behavior: &BehaviorModel<T>,
    alpha: T,
    pi_star: &Policy<T>,
    s: usize,
) -> Result<BiasDecomposition<T>> {
    let p = prepare(run, k, mdp, behavior, alpha, pi_star, s)?;
    let na = p.na;
    let n = mdp.num_pairs();
    let e_s = Matrix::from_fn(na, n, |a, i| if i == s * na + a { T::one() } else { T::zero() });
    let j_s = e_s.transpose().matmul(&e_s);
    let inner = |m: &Matrix<T>, x: &[T], y: &[T], z: &[T]| {
        let v = j_s.mul_vec(&sub(x, y));
        dot(&m.transpose().mul_vec(&v), z)
    };
    let pis: Vec<&[T]> = p.pis.iter().map(|x| x.probs()).collect();
    let err = |j: usize| sub(&p.q_pi[j], &p.q[j]);

    let lhs = dot(&e_s.mul_vec(&sub(&p.pi_star, pis[k])), &e_s.mul_vec(&err(k)));
    let b0 = inner(&p.a[0].pow(k), &p.pi_star, pis[0], &err(0));
    let (mut c, mut d, mut e, mut f) = (vec![], vec![], vec![], vec![]);
    for j in 1..=k {
        let pw = k - j + 1;
        let aj = p.a[j].pow(pw);
        c.push(inner(&aj, &p.pi_star, pis[j], &sub(&p.q_pi[j], &p.q_pi[j - 1])));
        d.push(inner(&aj, pis[j - 1], pis[j], &err(j - 1)));
        let diff = aj.sub(&p.a[j - 1].pow(pw));
        e.push(inner(&diff, &p.pi_star, pis[j - 1], &err(j - 1)));
        let scaled: Vec<T> = p.omega[j - 1].iter().map(|&w| alpha * w).collect();
        f.push(inner(&p.a[j].pow(pw - 1), &p.pi_star, pis[j], &scaled));
    }
    Ok(finish(k, s, lhs, b0, c, d, e, f))
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    k: usize,
    state: usize,
    lhs: T,
    b0: T,
    c: Vec<T>,
    d: Vec<T>,
    e: Vec<T>,
    f: Vec<T>,
) -> BiasDecomposition<T> {
    let mut out = BiasDecomposition {
        k,
        state,
        lhs,
        b0,
        c,
        d,
        e,
        f,
        residual: T::zero(),
    };
    out.residual = (out.lhs - out.rhs()).abs();
    out
}
