//! Trace-preserving renormalization of a random transfer operator into a
//! quantum channel, its fixed state, and expander parameters.

use faer::{c64, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    eig_by_modulus, eigs_by_modulus, hermitian_eigenvalues, hermitize, matvec, operator_norm, sort_by_modulus,
    upper_gap_iterative, DENSE_LIMIT, ITERATIVE_TOL,
};
use crate::transfer::{apply_cp, apply_cp_adjoint, TransferKind, TransferOperator};

/// Eigenvalues of `Sigma` below this fraction of the largest count as zero.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Where `Sigma^{-1/2}` goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `K_x Sigma^{-1/2}`: trace preserving.
    TracePreserving,
    /// `Sigma^{-1/2} K_x`, i.e. `X -> Sigma^{-1/2} T(X) Sigma^{-1/2}`.
    /// Same spectrum, not trace preserving in general.
    Literal,
}

#[derive(Debug, Clone)]
pub struct Channel {
    op: TransferOperator,
    pub normalization: Option<Normalization>,
    /// `|sum_x K_x* K_x - Id|`.
    pub tp_residual: f64,
    /// Number of nonzero Kraus operators, an upper bound on the Choi rank.
    pub kraus_rank: usize,
}

impl Channel {
    /// Channel `X -> sum_x K_x X K_x*` on `D x D` matrices.
    pub fn from_kraus(kraus: Vec<Mat<c64>>) -> Result<Self> {
        let dd = kraus.first().map(|k| k.nrows()).unwrap_or(0);
        let op = TransferOperator::from_kraus(TransferKind::Mps, dd, 1, 1.0, kraus)?;
        Ok(Self::wrap(op, None))
    }

    fn wrap(op: TransferOperator, normalization: Option<Normalization>) -> Self {
        let dd = op.space_dim();
        let id = Mat::<c64>::identity(dd, dd);
        let s = apply_cp_adjoint(&op, id.as_ref()).expect("square identity") - &id;
        let tp_residual = operator_norm(s.as_ref()).unwrap_or(f64::INFINITY);
        let kraus_rank = op.kraus().iter().filter(|k| k.norm_max() > 0.0).count();
        Self { op, normalization, tp_residual, kraus_rank }
    }

    /// `X -> Tr(X) Id/D`, with Kraus operators `|i><j|/sqrt(D)`.
    pub fn depolarizing(bond_dim: usize) -> Result<Self> {
        if bond_dim == 0 {
            return Err(Error::invalid("D must be positive"));
        }
        let w = 1.0 / (bond_dim as f64).sqrt();
        let kraus = (0..bond_dim * bond_dim)
            .map(|ij| {
                let mut k = Mat::<c64>::zeros(bond_dim, bond_dim);
                k[(ij / bond_dim, ij % bond_dim)] = c64::new(w, 0.0);
                k
            })
            .collect();
        Self::from_kraus(kraus)
    }

    pub fn bond_dim(&self) -> usize {
        self.op.space_dim()
    }

    pub fn kraus(&self) -> &[Mat<c64>] {
        self.op.kraus()
    }

    /// The channel as a transfer operator (`sum_x K_x (x) conj K_x`).
    pub fn as_transfer(&self) -> &TransferOperator {
        &self.op
    }

    pub fn matrix_form(&self) -> Result<&Mat<c64>> {
        self.op.matrix_form()
    }

    pub fn apply(&self, x: MatRef<'_, c64>) -> Result<Mat<c64>> {
        let dd = self.bond_dim();
        if dd * dd <= DENSE_LIMIT {
            if x.nrows() != dd || x.ncols() != dd {
                return Err(Error::invalid(format!("expected a {dd}x{dd} matrix")));
            }
            let m = self.op.matrix_form()?;
            let v: Vec<c64> = (0..dd * dd).map(|ij| x[(ij / dd, ij % dd)]).collect();
            let y = matvec(m.as_ref(), &v);
            let out = Mat::from_fn(dd, dd, |i, j| y[i * dd + j]);
            let herm = (&x - x.adjoint()).norm_max() <= 1e-12 * x.norm_max();
            Ok(if herm { hermitize(out.as_ref()) } else { out })
        } else {
            apply_cp(&self.op, x)
        }
    }

    /// Eigenvalues of the matrix form, largest modulus first. Large channels
    /// only get the two leading ones.
    pub fn leading_eigenvalues(&self) -> Result<Vec<c64>> {
        let n = self.bond_dim() * self.bond_dim();
        if n <= DENSE_LIMIT {
            // Hermiticity preserving, so the real form has the same spectrum
            // and a real eigensolve is several times cheaper.
            let r = hermitian_real_form(self.op.matrix_form()?.as_ref(), self.bond_dim());
            let mut ev = r.eigenvalues().map_err(|_| Error::numerical("dense eigenvalues", f64::NAN))?;
            sort_by_modulus(&mut ev);
            Ok(ev)
        } else {
            let s = upper_gap_iterative(&self.op, ITERATIVE_TOL)?;
            Ok(vec![s.lambda1, c64::new(s.lambda2_modulus, 0.0)])
        }
    }
}

/// Orthonormal Hermitian basis of `D x D` matrices as sparse row-major
/// vectors: `|i><i|`, then `(|i><j| + |j><i|)/sqrt 2` and
/// `i(|i><j| - |j><i|)/sqrt 2` for `i < j`.
fn hermitian_basis(dd: usize) -> Vec<Vec<(usize, c64)>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out: Vec<Vec<(usize, c64)>> = (0..dd).map(|i| vec![(i * dd + i, c64::new(1.0, 0.0))]).collect();
    for i in 0..dd {
        for j in i + 1..dd {
            out.push(vec![(i * dd + j, c64::new(h, 0.0)), (j * dd + i, c64::new(h, 0.0))]);
            out.push(vec![(i * dd + j, c64::new(0.0, h)), (j * dd + i, c64::new(0.0, -h))]);
        }
    }
    out
}

/// Matrix of a Hermiticity-preserving map in the basis above: real, and
/// unitarily similar to the row-major matrix form `m`.
pub fn hermitian_real_form(m: MatRef<'_, c64>, dd: usize) -> Mat<f64> {
    let basis = hermitian_basis(dd);
    Mat::from_fn(dd * dd, dd * dd, |a, b| {
        let mut z = c64::new(0.0, 0.0);
        for &(p, cp) in &basis[a] {
            for &(q, cq) in &basis[b] {
                z += cp.conj() * m[(p, q)] * cq;
            }
        }
        z.re
    })
}

/// `Sigma = prefactor * sum_x K_x* K_x`, i.e. `(1/d) sum_x G_x* G_x` for an
/// MPS transfer operator.
pub fn sigma(t: &TransferOperator) -> Mat<c64> {
    let n = t.space_dim();
    let id = Mat::<c64>::identity(n, n);
    hermitize(apply_cp_adjoint(t, id.as_ref()).expect("square identity").as_ref())
}

/// `Sigma^{-1/2}` through the Hermitian eigendecomposition.
fn inverse_sqrt(s: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let e = s.self_adjoint_eigen(Side::Lower).map_err(|_| Error::numerical("Sigma eigendecomposition", f64::NAN))?;
    let n = s.nrows();
    let vals: Vec<f64> = (0..n).map(|i| e.S().column_vector()[i].re).collect();
    let max = vals.iter().cloned().fold(0.0, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > SIGMA_FLOOR * max) {
        return Err(Error::Degenerate(format!("Sigma is near-singular: eigenvalues in [{min:e}, {max:e}]")));
    }
    let u = e.U();
    let w = Mat::from_fn(n, n, |i, k| u[(i, k)] * (1.0 / vals[k].sqrt()));
    Ok(hermitize((&w * u.adjoint()).as_ref()))
}

/// Renormalize `T` into a channel. The trace-preserving form uses Kraus
/// operators `sqrt(prefactor) K_x Sigma^{-1/2}`; the literal form
/// `sqrt(prefactor) Sigma^{-1/2} K_x`. The two are `S o T` and `T o S` for
/// `S(X) = Sigma^{-1/2} X Sigma^{-1/2}`, hence isospectral.
pub fn normalize_channel(t: &TransferOperator, normalization: Normalization) -> Result<Channel> {
    let s = inverse_sqrt(sigma(t).as_ref())?;
    let p = c64::new(t.prefactor().sqrt(), 0.0);
    let kraus = t
        .kraus()
        .iter()
        .map(|k| {
            let k = k * faer::Scale(p);
            match normalization {
                Normalization::TracePreserving => &k * &s,
                Normalization::Literal => &s * &k,
            }
        })
        .collect();
    let op = TransferOperator::from_kraus(t.kind(), t.bond_dim(), t.sites(), 1.0, kraus)?;
    Ok(Channel::wrap(op, Some(normalization)))
}

/// `M_phi[i][j] = phi[i*D + j]`; Hilbert-Schmidt norm equal to `|phi|`.
pub fn vec_to_matrix(phi: &[c64]) -> Result<Mat<c64>> {
    let dd = (phi.len() as f64).sqrt().round() as usize;
    if dd * dd != phi.len() || dd == 0 {
        return Err(Error::invalid(format!("vector length {} is not a square", phi.len())));
    }
    Ok(Mat::from_fn(dd, dd, |i, j| phi[i * dd + j]))
}

pub fn matrix_to_vec(m: MatRef<'_, c64>) -> Vec<c64> {
    let n = m.ncols();
    (0..m.nrows() * n).map(|ij| m[(ij / n, ij % n)]).collect()
}

fn hs_norm(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub rho: Mat<c64>,
    /// `Tr(rho^2)`.
    pub purity: f64,
    /// `-ln Tr(rho^2)`, a lower bound on the von Neumann entropy.
    pub entropy_lower_bound: f64,
    pub iterations: usize,
    /// `|T(rho)/Tr T(rho) - rho|_2`.
    pub residual: f64,
}

/// Iterate the channel from `Id/D`, Hermitizing and renormalizing the trace
/// after each step, until `|T(rho) - rho|_2 <= tol`.
pub fn fixed_point(channel: &Channel, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    let dd = channel.bond_dim();
    let mut rho = Mat::<c64>::identity(dd, dd) * faer::Scale(c64::new(1.0 / dd as f64, 0.0));
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = channel.apply(rho.as_ref())?;
        let tr = trace(y.as_ref());
        if tr.norm() < 1e-300 {
            return Err(Error::Degenerate("channel maps the state to zero".into()));
        }
        let y = hermitize((y * faer::Scale(tr.inv())).as_ref());
        residual = hs_norm((&y - &rho).as_ref());
        if residual <= tol {
            let purity = (&rho * &rho).as_ref().diagonal().column_vector().iter().map(|z| z.re).sum::<f64>();
            return Ok(FixedPoint { rho, purity, entropy_lower_bound: -purity.ln(), iterations: it, residual });
        }
        rho = y;
    }
    Err(Error::numerical(format!("fixed point after {max_iter} iterations"), residual))
}

/// Expander parameters `(m, k, eps)` of a channel: `m = 1/Tr(rho^2)`, so
/// `log m <= S(rho)`; `k` the Kraus count; `eps = |lambda2|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpanderParams {
    pub m_lower: f64,
    pub k: usize,
    pub eps: f64,
}

pub fn expander_report(channel: &Channel, fp: &FixedPoint) -> Result<ExpanderParams> {
    let ev = channel.leading_eigenvalues()?;
    let eps = ev.get(1).map(|z| z.norm()).unwrap_or(0.0);
    Ok(ExpanderParams { m_lower: 1.0 / fp.purity, k: channel.kraus_rank, eps })
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<Mat<c64>>,
    /// `|T^s(rho0) - rho_hat|_2` for `s = 0..=t`.
    pub distances: Vec<f64>,
    /// Largest `|Tr T^s(rho0) - Tr rho0|` along the way.
    pub trace_drift: f64,
}

pub fn iterate_channel(channel: &Channel, rho0: MatRef<'_, c64>, t: usize, fp: &FixedPoint) -> Result<Trajectory> {
    let ev = hermitian_eigenvalues(rho0)?;
    let tr0 = trace(rho0);
    if ev[0] < -1e-10 || (tr0 - c64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::invalid("rho0 must be a density matrix"));
    }
    let mut states = vec![rho0.to_owned()];
    let mut distances = vec![hs_norm((rho0 - &fp.rho).as_ref())];
    let mut trace_drift = 0.0f64;
    for s in 0..t {
        let next = channel.apply(states[s].as_ref())?;
        trace_drift = trace_drift.max((trace(next.as_ref()) - tr0).norm());
        distances.push(hs_norm((&next - &fp.rho).as_ref()));
        states.push(next);
    }
    Ok(Trajectory { states, distances, trace_drift })
}

/// `|A - B/lambda1(B)|` in the `2 -> 2` norm, i.e. the operator norm of the
/// difference of matrix forms (row-major vec is a Hilbert-Schmidt isometry).
pub fn two_to_two_distance(channel: &Channel, t: &TransferOperator) -> Result<f64> {
    let a = channel.matrix_form()?;
    let b = t.matrix_form()?;
    if a.nrows() != b.nrows() {
        return Err(Error::invalid("channel and transfer operator act on different spaces"));
    }
    let l1 = eigs_by_modulus(b.as_ref())?[0];
    let diff = a - b * faer::Scale(l1.inv());
    operator_norm(diff.as_ref())
}

/// Dominant eigenvector of the matrix form, as a unit-trace matrix.
pub fn dominant_state(channel: &Channel) -> Result<Mat<c64>> {
    let (_, vecs) = eig_by_modulus(channel.matrix_form()?.as_ref())?;
    let phi: Vec<c64> = (0..vecs.nrows()).map(|i| vecs[(i, 0)]).collect();
    let m = vec_to_matrix(&phi)?;
    let tr = trace(m.as_ref());
    Ok(m * faer::Scale(tr.inv()))
}
