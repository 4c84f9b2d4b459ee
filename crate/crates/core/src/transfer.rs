//! Transfer operators in Kraus form, with the `D^{2N} x D^{2N}` matrix form
//! built on first use.
//!
//! Matrices on `C^n (x) C^n` are vectorized row-major: `vec(X)[i*n + j] = X[i][j]`,
//! so that `(K (x) conj K) vec(X) = vec(K X K*)`.

use std::sync::OnceLock;

use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rand_gauss::{MpsTensor, PepsTensor};
use crate::spectral::{
    dot, gap_certificate, hermitize, matvec, max_entangled, operator_norm, upper_gap, upper_gap_iterative,
    GapCertificate, LinearOperator, SpectralSummary, DENSE_LIMIT, ITERATIVE_TOL,
};
use crate::tensors::peps_column_operators;

/// Largest matrix form (rows) that will be materialized.
pub const MATRIX_FORM_LIMIT: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferKind {
    Mps,
    PepsColumn,
    PepsColumnIndependent,
}

#[derive(Debug)]
pub struct TransferOperator {
    kind: TransferKind,
    bond_dim: usize,
    sites: usize,
    prefactor: f64,
    kraus: Vec<Mat<c64>>,
    matrix: OnceLock<Mat<c64>>,
}

impl Clone for TransferOperator {
    fn clone(&self) -> Self {
        let matrix = OnceLock::new();
        if let Some(m) = self.matrix.get() {
            let _ = matrix.set(m.clone());
        }
        Self {
            kind: self.kind,
            bond_dim: self.bond_dim,
            sites: self.sites,
            prefactor: self.prefactor,
            kraus: self.kraus.clone(),
            matrix,
        }
    }
}

impl TransferOperator {
    /// `prefactor * sum_x K_x (x) conj(K_x)` on `(C^D)^{(x)N}`.
    pub fn from_kraus(
        kind: TransferKind,
        bond_dim: usize,
        sites: usize,
        prefactor: f64,
        kraus: Vec<Mat<c64>>,
    ) -> Result<Self> {
        let dim = crate::tensors::checked_pow(bond_dim, sites)
            .ok_or_else(|| Error::Resource("bond space overflows".into()))?;
        if kraus.is_empty() {
            return Err(Error::invalid("need at least one Kraus operator"));
        }
        if kraus.iter().any(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(Error::invalid(format!("Kraus operators must be {dim}x{dim}")));
        }
        if !(prefactor.is_finite() && prefactor > 0.0) {
            return Err(Error::invalid("prefactor must be positive"));
        }
        Ok(Self { kind, bond_dim, sites, prefactor, kraus, matrix: OnceLock::new() })
    }

    pub fn kind(&self) -> TransferKind {
        self.kind
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn kraus(&self) -> &[Mat<c64>] {
        &self.kraus
    }

    /// Dimension `D^N` of the space the CP map acts on.
    pub fn space_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    /// Matrix form, built once and cached.
    pub fn matrix_form(&self) -> Result<&Mat<c64>> {
        let n = self.space_dim();
        if n * n > MATRIX_FORM_LIMIT {
            return Err(Error::Resource(format!("matrix form would be {0}x{0}", n * n)));
        }
        Ok(self.matrix.get_or_init(|| self.assemble()))
    }

    // realign(A A*) with A[(i,k), x] = K_x[i,k]
    fn assemble(&self) -> Mat<c64> {
        let n = self.space_dim();
        let a = Mat::from_fn(n * n, self.kraus.len(), |ik, x| self.kraus[x][(ik / n, ik % n)]);
        let mut g = Mat::<c64>::zeros(n * n, n * n);
        // A A* is Hermitian: form the lower triangle only.
        triangular::matmul(
            g.as_mut(),
            BlockStructure::TriangularLower,
            Accum::Replace,
            a.as_ref(),
            BlockStructure::Rectangular,
            a.adjoint(),
            BlockStructure::Rectangular,
            c64::new(self.prefactor, 0.0),
            Par::Seq,
        );
        let gram = |r: usize, c: usize| if r >= c { g[(r, c)] } else { g[(c, r)].conj() };
        Mat::from_fn(n * n, n * n, |ij, kl| {
            let (i, j, k, l) = (ij / n, ij % n, kl / n, kl % n);
            gram(i * n + k, j * n + l)
        })
    }

    /// `prefactor * sum_x K_x X K_x*`, or the adjoint map `sum_x K_x* X K_x`.
    fn cp(&self, x: MatRef<'_, c64>, adjoint: bool) -> Mat<c64> {
        let n = self.space_dim();
        let m = self.kraus.len();
        let k = |i: usize, r: usize, c: usize| {
            if adjoint {
                self.kraus[i][(c, r)].conj()
            } else {
                self.kraus[i][(r, c)]
            }
        };
        // X [K_1* ... K_m*], then contract against [K_1 ... K_m].
        let h = Mat::from_fn(n, n * m, |r, c| k(c / n, c % n, r).conj());
        let mut xh = Mat::<c64>::zeros(n, n * m);
        matmul(xh.as_mut(), Accum::Replace, x, h.as_ref(), c64::new(1.0, 0.0), Par::Seq);
        let cat = Mat::from_fn(n, n * m, |r, c| k(c / n, r, c % n));
        let v = Mat::from_fn(n * m, n, |r, c| xh[(r % n, (r / n) * n + c)]);
        let mut y = Mat::<c64>::zeros(n, n);
        matmul(y.as_mut(), Accum::Replace, cat.as_ref(), v.as_ref(), c64::new(self.prefactor, 0.0), Par::Seq);
        y
    }

    fn apply_vec(&self, x: &[c64], y: &mut [c64], adjoint: bool) {
        let n = self.space_dim();
        let xm = Mat::from_fn(n, n, |i, j| x[i * n + j]);
        let ym = self.cp(xm.as_ref(), adjoint);
        for i in 0..n {
            for j in 0..n {
                y[i * n + j] = ym[(i, j)];
            }
        }
    }
}

impl LinearOperator for TransferOperator {
    fn dim(&self) -> usize {
        self.space_dim() * self.space_dim()
    }
    fn apply(&self, x: &[c64], y: &mut [c64]) {
        self.apply_vec(x, y, false);
    }
    fn apply_adjoint(&self, x: &[c64], y: &mut [c64]) {
        self.apply_vec(x, y, true);
    }
}

/// `T = (1/d) sum_x K_x (x) conj K_x` with `K_x = sqrt(d)` times the raw
/// slice, so that `T = sum_x G_x (x) conj G_x` for the sampled slices.
pub fn mps_transfer(t: &MpsTensor) -> TransferOperator {
    let d = t.d() as f64;
    let kraus = t.slices().into_iter().map(|s| s * faer::Scale(c64::new(d.sqrt(), 0.0))).collect();
    TransferOperator::from_kraus(TransferKind::Mps, t.bond_dim(), 1, 1.0 / d, kraus).expect("valid tensor")
}

fn column_transfer(kind: TransferKind, tensors: &[&PepsTensor]) -> Result<TransferOperator> {
    let n = tensors.len();
    let d = tensors[0].d() as f64;
    let dd = tensors[0].bond_dim();
    let dim = crate::tensors::checked_pow(dd, n).ok_or_else(|| Error::Resource("bond space overflows".into()))?;
    let s = c64::new(d.powf(n as f64 / 2.0), 0.0);
    let kraus = peps_column_operators(tensors)?
        .into_iter()
        .map(|a| Mat::from_fn(dim, dim, |i, j| a[i * dim + j] * s))
        .collect();
    TransferOperator::from_kraus(kind, dd, n, d.powi(-(n as i32)), kraus)
}

/// Column transfer operator `T_N` on `(C^D)^{(x)N}`, one translation-invariant
/// tensor on every site. Kraus operators are indexed by physical strings in
/// lexicographic order; vertical bonds close periodically.
pub fn peps_transfer(t: &PepsTensor, sites: usize) -> Result<TransferOperator> {
    if sites == 0 {
        return Err(Error::invalid("N must be positive"));
    }
    column_transfer(TransferKind::PepsColumn, &vec![t; sites])
}

/// Column transfer operator with an independent tensor on each row.
pub fn peps_transfer_independent(tensors: &[PepsTensor]) -> Result<TransferOperator> {
    if tensors.is_empty() {
        return Err(Error::invalid("N must be positive"));
    }
    column_transfer(TransferKind::PepsColumnIndependent, &tensors.iter().collect::<Vec<_>>())
}

/// `prefactor * sum_x K_x X K_x*`. A Hermitian input gives an exactly
/// Hermitian output.
pub fn apply_cp(t: &TransferOperator, x: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let n = t.space_dim();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::invalid(format!("expected a {n}x{n} matrix")));
    }
    let y = t.cp(x, false);
    let herm_dev = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (x[(i, j)] - x[(j, i)].conj()).norm())
        .fold(0.0, f64::max);
    let scale = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| x[(i, j)].norm()).fold(0.0, f64::max);
    if herm_dev <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        Ok(hermitize(y.as_ref()))
    } else {
        Ok(y)
    }
}

/// Adjoint (Heisenberg picture) map `prefactor * sum_x K_x* X K_x`.
pub fn apply_cp_adjoint(t: &TransferOperator, x: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let n = t.space_dim();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::invalid(format!("expected a {n}x{n} matrix")));
    }
    Ok(t.cp(x, true))
}

/// `psi^{(x)N}` laid out to match the row index of `T`.
pub fn psi_vector(t: &TransferOperator) -> Vec<c64> {
    max_entangled(t.space_dim())
}

/// `<psi^{(x)N}| T |psi^{(x)N}>`, with the imaginary part checked.
pub fn overlap_psi(t: &TransferOperator) -> Result<f64> {
    let psi = psi_vector(t);
    let mut tpsi = vec![c64::new(0.0, 0.0); psi.len()];
    t.apply(&psi, &mut tpsi);
    let v = dot(&psi, &tpsi);
    if v.im.abs() > 1e-10 * (1.0 + v.re.abs()) {
        return Err(Error::numerical("overlap with psi is not real", v.im.abs()));
    }
    Ok(v.re)
}

/// `(|T (Id - psi psi*)|, |(Id - psi psi*) T|)`.
pub fn deflated_norms(t: &TransferOperator) -> Result<(f64, f64)> {
    let m = t.matrix_form()?;
    let psi = psi_vector(t);
    deflated_norms_of(m.as_ref(), &psi)
}

pub(crate) fn deflated_norms_of(m: MatRef<'_, c64>, psi: &[c64]) -> Result<(f64, f64)> {
    let n = m.nrows();
    let mpsi = matvec(m, psi);
    let psim = matvec(m.adjoint(), psi);
    let right = Mat::from_fn(n, n, |i, j| m[(i, j)] - mpsi[i] * psi[j].conj());
    let left = Mat::from_fn(n, n, |i, j| m[(i, j)] - psi[i] * psim[j].conj());
    Ok((operator_norm(right.as_ref())?, operator_norm(left.as_ref())?))
}

/// Spectral summary of `T` and the gap certificate built from `T(Id)` and
/// `psi^{(x)N}`.
pub fn transfer_gap(t: &TransferOperator) -> Result<(SpectralSummary, GapCertificate)> {
    let m = t.matrix_form()?;
    let summary = if m.nrows() <= DENSE_LIMIT { upper_gap(m.as_ref())? } else { upper_gap_iterative(t, ITERATIVE_TOL)? };
    let id = Mat::<c64>::identity(t.space_dim(), t.space_dim());
    let image = apply_cp(t, id.as_ref())?;
    let cert = gap_certificate(m.as_ref(), image.as_ref(), &psi_vector(t))?;
    Ok((summary, cert))
}

/// The PEPS tensor read as an MPS with physical index `(x, l, r)` and bond
/// indices `(a, b)`, divided by `sqrt(D)`. Its transfer operator `T~`
/// satisfies `<psi^N| T_N |psi^N> = Tr(T~^N)`.
pub fn peps_as_mps(t: &PepsTensor) -> MpsTensor {
    let dd = t.bond_dim();
    let s = 1.0 / (dd as f64).sqrt();
    let e = t.entries().iter().map(|z| z * s).collect();
    MpsTensor::new(t.d() * dd * dd, dd, e).expect("reshape keeps shape")
}

/// `Tr(M^n)` by repeated products.
pub fn trace_power(m: MatRef<'_, c64>, n: usize) -> c64 {
    let dim = m.nrows();
    if n == 0 {
        return c64::new(dim as f64, 0.0);
    }
    let mut p = m.to_owned();
    for _ in 1..n {
        let mut q = Mat::<c64>::zeros(dim, dim);
        matmul(q.as_mut(), Accum::Replace, p.as_ref(), m, c64::new(1.0, 0.0), Par::Seq);
        p = q;
    }
    (0..dim).map(|i| p[(i, i)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rand_gauss::{sample_mps_tensor, sample_peps_tensor, SeedSpec};
    use crate::spectral::{eigs_by_modulus, upper_gap_dense};
    use crate::tensors::{block_mps, mps_state, peps_state};

    fn seed(i: u64) -> SeedSpec {
        SeedSpec::new(5, i, "transfer")
    }

    fn brute_mps(t: &MpsTensor) -> Mat<c64> {
        let dd = t.bond_dim();
        Mat::from_fn(dd * dd, dd * dd, |ij, kl| {
            let (i, j, k, l) = (ij / dd, ij % dd, kl / dd, kl % dd);
            (0..t.d()).map(|x| t.entry(x, i, k) * t.entry(x, j, l).conj()).sum()
        })
    }

    #[test]
    fn scalar_transfer() {
        let g = c64::new(0.3, -0.4);
        let t = MpsTensor::new(1, 1, vec![g]).unwrap();
        let op = mps_transfer(&t);
        assert!((op.matrix_form().unwrap()[(0, 0)] - g.norm_sqr()).norm() < 1e-15);
        assert!((overlap_psi(&op).unwrap() - g.norm_sqr()).abs() < 1e-15);
        let p = PepsTensor::new(1, 1, vec![g]).unwrap();
        let op = peps_transfer(&p, 1).unwrap();
        assert!((op.matrix_form().unwrap()[(0, 0)] - g.norm_sqr()).norm() < 1e-15);
        // a column of three scalars
        let op = peps_transfer(&p, 3).unwrap();
        assert!((op.matrix_form().unwrap()[(0, 0)] - g.norm_sqr().powi(3)).norm() < 1e-15);
    }

    #[test]
    fn mps_matrix_form_matches_loops() {
        let t = sample_mps_tensor(&seed(0), 4, 3).unwrap();
        let op = mps_transfer(&t);
        assert!((op.matrix_form().unwrap() - brute_mps(&t)).norm_max() < 1e-14);
    }

    #[test]
    fn mean_transfer_is_psi_projector() {
        let (d, dd, n) = (10, 3, 10_000);
        let mut sum = Mat::<c64>::zeros(9, 9);
        let mut sq = Mat::<f64>::zeros(9, 9);
        for i in 0..n {
            let m = brute_mps(&sample_mps_tensor(&seed(1000 + i), d, dd).unwrap());
            sum += &m;
            sq += Mat::<f64>::from_fn(9, 9, |a, b| m[(a, b)].norm_sqr());
        }
        let psi = max_entangled(dd);
        for a in 0..9 {
            for b in 0..9 {
                let mean = sum[(a, b)] / n as f64;
                let var = sq[(a, b)] / n as f64 - mean.norm_sqr();
                let sigma = (var / n as f64).sqrt();
                let want = psi[a] * psi[b].conj();
                assert!((mean - want).norm() <= 4.0 * sigma + 1e-12, "({a},{b}) {mean} vs {want}");
            }
        }
    }

    #[test]
    fn transfer_power_and_states() {
        let t = sample_mps_tensor(&seed(2), 3, 2).unwrap();
        let m = mps_transfer(&t).matrix_form().unwrap().clone();
        let norm = mps_state(&t, 6).unwrap().norm_sqr();
        let tr = trace_power(m.as_ref(), 6);
        assert!((tr.re - norm).abs() <= 1e-10 * norm && tr.im.abs() <= 1e-10 * norm);

        let b = block_mps(&t, 2).unwrap();
        let mb = mps_transfer(&b).matrix_form().unwrap().clone();
        assert!((&mb - &m * &m).norm_max() < 1e-12);
    }

    #[test]
    fn cp_matches_matrix_form() {
        let t = sample_mps_tensor(&seed(3), 5, 3).unwrap();
        let op = mps_transfer(&t);
        let x = crate::rand_gauss::sample_complex_gaussian_matrix(&seed(4), 3, 3, 1.0).unwrap();
        let y = apply_cp(&op, x.as_ref()).unwrap();
        let vx: Vec<c64> = (0..9).map(|i| x[(i / 3, i % 3)]).collect();
        let vy = matvec(op.matrix_form().unwrap().as_ref(), &vx);
        for i in 0..9 {
            assert!((vy[i] - y[(i / 3, i % 3)]).norm() < 1e-12);
        }
        let z = apply_cp(&op, Mat::<c64>::zeros(3, 3).as_ref()).unwrap();
        assert_eq!(z.norm_max(), 0.0);
        // adjoint map
        let mut ya = vec![c64::new(0.0, 0.0); 9];
        op.apply_adjoint(&vx, &mut ya);
        let want = matvec(op.matrix_form().unwrap().adjoint(), &vx);
        assert!(ya.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn cp_hermitian_output() {
        let t = sample_mps_tensor(&seed(5), 6, 4).unwrap();
        let op = mps_transfer(&t);
        let g = crate::rand_gauss::sample_complex_gaussian_matrix(&seed(6), 4, 4, 1.0).unwrap();
        let x = &g * g.adjoint();
        let y = apply_cp(&op, x.as_ref()).unwrap();
        assert!((&y - y.adjoint()).norm_max() == 0.0);
        let lmin = crate::spectral::hermitian_eigenvalues(y.as_ref()).unwrap()[0];
        assert!(lmin >= -1e-10 * operator_norm(x.as_ref()).unwrap());
    }

    #[test]
    fn overlap_and_deflation_match_dense() {
        let t = sample_mps_tensor(&seed(7), 7, 3).unwrap();
        let op = mps_transfer(&t);
        let m = op.matrix_form().unwrap();
        let psi = max_entangled(3);
        let dense = dot(&psi, &matvec(m.as_ref(), &psi));
        assert!((overlap_psi(&op).unwrap() - dense.re).abs() < 1e-12);

        let proj = Mat::from_fn(9, 9, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            c64::new(id, 0.0) - psi[i] * psi[j].conj()
        });
        let (r, l) = deflated_norms(&op).unwrap();
        assert!((r - operator_norm((m * &proj).as_ref()).unwrap()).abs() < 1e-12);
        assert!((l - operator_norm((&proj * m).as_ref()).unwrap()).abs() < 1e-12);
    }

    fn psi_projector_op(dd: usize) -> TransferOperator {
        // Kraus e_i e_j^* / sqrt(D) realise X -> Tr(X) Id / D, whose matrix is |psi><psi|.
        let kraus = (0..dd * dd)
            .map(|ij| Mat::from_fn(dd, dd, |r, c| if r == ij / dd && c == ij % dd { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) }))
            .collect();
        TransferOperator::from_kraus(TransferKind::Mps, dd, 1, 1.0 / dd as f64, kraus).unwrap()
    }

    #[test]
    fn psi_projector_gap() {
        let op = psi_projector_op(3);
        let psi = max_entangled(3);
        let m = op.matrix_form().unwrap();
        assert!((0..9).all(|i| (0..9).all(|j| (m[(i, j)] - psi[i] * psi[j].conj()).norm() < 1e-15)));
        let (r, l) = deflated_norms(&op).unwrap();
        assert!(r < 1e-14 && l < 1e-14);
        let (s, c) = transfer_gap(&op).unwrap();
        assert!((s.gap - 1.0).abs() < 1e-12);
        assert!(c.applicable && (c.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_is_sound() {
        for i in 0..30 {
            let t = sample_mps_tensor(&seed(100 + i), 400, 4).unwrap();
            let (s, c) = transfer_gap(&mps_transfer(&t)).unwrap();
            if c.applicable {
                assert!(c.bound <= s.gap + 1e-9);
            }
        }
    }

    #[test]
    fn conjugate_spectrum() {
        let t = sample_mps_tensor(&seed(8), 3, 3).unwrap();
        let m = mps_transfer(&t).matrix_form().unwrap().clone();
        // F T F* swaps the two tensor factors and equals conj(T).
        let n = 3;
        let swap = |i: usize| (i % n) * n + i / n;
        let f = Mat::from_fn(9, 9, |i, j| m[(swap(i), swap(j))]);
        let mut a: Vec<f64> = eigs_by_modulus(m.as_ref()).unwrap().iter().map(|z| z.norm()).collect();
        let mut b: Vec<f64> = eigs_by_modulus(f.as_ref()).unwrap().iter().map(|z| z.norm()).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
        assert!((&f - Mat::from_fn(9, 9, |i, j| m[(i, j)].conj())).norm_max() < 1e-14);
    }

    fn brute_peps_column(tensors: &[&PepsTensor]) -> Mat<c64> {
        // T_N[(l,l'),(r,r')] = sum_x sum_{a,b} prod_i g^i_{x_i l_i r_i a_{i-1} a_i} conj(g^i_{x_i l'_i r'_i b_{i-1} b_i})
        let n = tensors.len();
        let (d, dd) = (tensors[0].d(), tensors[0].bond_dim());
        let dim = dd.pow(n as u32);
        let dig = |mut v: usize, base: usize| {
            let mut o = vec![0; n];
            for p in (0..n).rev() {
                o[p] = v % base;
                v /= base;
            }
            o
        };
        Mat::from_fn(dim * dim, dim * dim, |row, col| {
            let (l, lp, r, rp) = (dig(row / dim, dd), dig(row % dim, dd), dig(col / dim, dd), dig(col % dim, dd));
            let mut acc = c64::new(0.0, 0.0);
            for xi in 0..d.pow(n as u32) {
                let x = dig(xi, d);
                for ai in 0..dim {
                    let a = dig(ai, dd);
                    for bi in 0..dim {
                        let b = dig(bi, dd);
                        let mut p = c64::new(1.0, 0.0);
                        for i in 0..n {
                            let up = (i + n - 1) % n;
                            p *= tensors[i].entry(x[i], l[i], r[i], a[up], a[i])
                                * tensors[i].entry(x[i], lp[i], rp[i], b[up], b[i]).conj();
                        }
                        acc += p;
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn peps_matrix_form_matches_loops() {
        let ts: Vec<PepsTensor> = (0..2).map(|i| sample_peps_tensor(&seed(20 + i), 5, 2).unwrap()).collect();
        let op = peps_transfer_independent(&ts).unwrap();
        let brute = brute_peps_column(&[&ts[0], &ts[1]]);
        assert!((op.matrix_form().unwrap() - &brute).norm_max() < 1e-12);

        let same = peps_transfer_independent(&[ts[0].clone(), ts[0].clone()]).unwrap();
        let ti = peps_transfer(&ts[0], 2).unwrap();
        assert_eq!(same.matrix_form().unwrap(), ti.matrix_form().unwrap());
        let one = peps_transfer_independent(&ts[..1]).unwrap();
        assert_eq!(one.matrix_form().unwrap(), peps_transfer(&ts[0], 1).unwrap().matrix_form().unwrap());
    }

    #[test]
    fn peps_identities() {
        let t = sample_peps_tensor(&seed(30), 5, 2).unwrap();
        let op = peps_transfer(&t, 3).unwrap();
        let m = op.matrix_form().unwrap();

        let tt = mps_transfer(&peps_as_mps(&t));
        let lhs = overlap_psi(&op).unwrap();
        let rhs = trace_power(tt.matrix_form().unwrap().as_ref(), 3);
        assert!((lhs - rhs.re).abs() <= 1e-10 * lhs.abs() && rhs.im.abs() <= 1e-10 * lhs.abs());

        for p in 1..=4 {
            let tr = trace_power(m.as_ref(), p);
            assert!(tr.im.abs() <= 1e-10 * tr.norm(), "Tr(T^{p}) = {tr}");
        }
    }

    #[test]
    fn peps_torus_norm_is_trace() {
        let t = sample_peps_tensor(&seed(40), 2, 2).unwrap();
        let m = peps_transfer(&t, 2).unwrap().matrix_form().unwrap().clone();
        let norm = peps_state(&t, 2).unwrap().norm_sqr();
        let tr = trace_power(m.as_ref(), 2);
        assert!((tr.re - norm).abs() <= 1e-10 * norm);
    }

    #[test]
    fn iterative_gap_on_transfer() {
        let t = sample_peps_tensor(&seed(50), 5, 2).unwrap();
        let op = peps_transfer(&t, 3).unwrap();
        let dense = upper_gap_dense(op.matrix_form().unwrap().as_ref()).unwrap();
        let it = upper_gap_iterative(&op, 1e-10).unwrap();
        assert!((dense.gap - it.gap).abs() < 1e-8, "{} vs {}", dense.gap, it.gap);
        assert!((dense.s1 - it.s1).abs() < 1e-8);
    }
}
