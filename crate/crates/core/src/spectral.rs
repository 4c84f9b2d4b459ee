//! Eigenvalues by modulus, singular values, realignment, Krylov solvers and
//! the upper-gap certificate.

use faer::linalg::matmul::matmul;
use faer::traits::Conjugate;
use faer::{c64, Accum, Mat, MatRef, Par, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rand_gauss::complex_gaussian_vec;

/// Matrices up to this dimension go through the dense Schur path.
pub const DENSE_LIMIT: usize = 4096;
pub const DENSE_TOL: f64 = 1e-10;
pub const ITERATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub lambda1: c64,
    pub lambda2_modulus: f64,
    /// `|lambda1| - lambda2_modulus`.
    pub gap: f64,
    pub s1: f64,
    pub s2: f64,
    pub method: SolverMethod,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub delta: f64,
    pub epsilon: f64,
    pub eta: f64,
    /// `1 - 2 delta - epsilon - 2 eta`, reported even when not applicable.
    pub bound: f64,
    pub applicable: bool,
}

// ---------------------------------------------------------------- vectors

pub(crate) fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha * x`
pub(crate) fn axpy(alpha: c64, x: &[c64], y: &mut [c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scale(alpha: c64, x: &mut [c64]) {
    x.iter_mut().for_each(|z| *z *= alpha);
}

fn random_unit(n: usize, salt: u64) -> Vec<c64> {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0000 ^ salt);
    let mut v = complex_gaussian_vec(&mut rng, n, 1.0);
    let nv = norm(&v);
    scale(c64::new(1.0 / nv, 0.0), &mut v);
    v
}

/// `M x` for a dense matrix and a slice.
pub fn matvec<T: Conjugate<Canonical = c64>>(m: MatRef<'_, T>, x: &[c64]) -> Vec<c64> {
    let mut y = vec![c64::new(0.0, 0.0); m.nrows()];
    matvec_into(m, x, &mut y);
    y
}

pub(crate) fn matvec_into<T: Conjugate<Canonical = c64>>(m: MatRef<'_, T>, x: &[c64], y: &mut [c64]) {
    let xr = MatRef::from_column_major_slice(x, x.len(), 1);
    let yr = faer::MatMut::from_column_major_slice_mut(y, m.nrows(), 1);
    matmul(yr, Accum::Replace, m, xr, c64::new(1.0, 0.0), Par::Seq);
}

/// Column `j` of a matrix as an owned vector.
pub fn column(m: MatRef<'_, c64>, j: usize) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

// ---------------------------------------------------------------- ordering

/// Modulus descending, then real part descending, then imaginary part descending.
fn modulus_order(a: &c64, b: &c64) -> std::cmp::Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

pub fn sort_by_modulus(v: &mut [c64]) {
    v.sort_by(modulus_order);
}

fn check_square(m: MatRef<'_, c64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    Ok(m.nrows())
}

fn check_finite(m: MatRef<'_, c64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::invalid("matrix has non-finite entries"));
            }
        }
    }
    Ok(())
}

/// All eigenvalues, largest modulus first.
pub fn eigs_by_modulus(m: MatRef<'_, c64>) -> Result<Vec<c64>> {
    check_square(m)?;
    check_finite(m)?;
    let mut ev = m.eigenvalues().map_err(|_| Error::numerical("dense eigenvalues", f64::NAN))?;
    sort_by_modulus(&mut ev);
    Ok(ev)
}

/// Eigenvalues and right eigenvectors (unit columns), largest modulus first.
pub fn eig_by_modulus(m: MatRef<'_, c64>) -> Result<(Vec<c64>, Mat<c64>)> {
    check_square(m)?;
    check_finite(m)?;
    let e = m.eigen().map_err(|_| Error::numerical("dense eigendecomposition", f64::NAN))?;
    let n = m.nrows();
    let s = e.S().column_vector();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| modulus_order(&s[a], &s[b]));
    let vals = idx.iter().map(|&i| s[i]).collect();
    let u = e.U();
    let mut vecs = Mat::from_fn(n, n, |i, j| u[(i, idx[j])]);
    for j in 0..n {
        let nj = (0..n).map(|i| vecs[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if nj > 0.0 {
            for i in 0..n {
                vecs[(i, j)] /= nj;
            }
        }
    }
    Ok((vals, vecs))
}

/// Descending singular values.
pub fn singular_values(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s = m.singular_values().map_err(|_| Error::numerical("singular values", f64::NAN))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Largest singular value.
pub fn operator_norm(m: MatRef<'_, c64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Number of singular values above `max(rows, cols) * eps * s1`.
pub fn numerical_rank(s: &[f64], rows: usize, cols: usize) -> usize {
    let Some(&s1) = s.first() else { return 0 };
    let thresh = rows.max(cols) as f64 * f64::EPSILON * s1;
    s.iter().filter(|&&x| x > thresh).count()
}

/// Orthonormal basis of the numerical range of `m`, together with all
/// singular values (descending) and the numerical rank.
pub fn range_basis(m: MatRef<'_, c64>) -> Result<(Mat<c64>, Vec<f64>, usize)> {
    check_finite(m)?;
    let svd = m.thin_svd().map_err(|_| Error::numerical("thin SVD", f64::NAN))?;
    let k = m.nrows().min(m.ncols());
    let sv = svd.S().column_vector();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].re.total_cmp(&sv[a].re));
    let s: Vec<f64> = order.iter().map(|&i| sv[i].re.max(0.0)).collect();
    let rank = numerical_rank(&s, m.nrows(), m.ncols());
    let u = svd.U();
    let basis = Mat::from_fn(m.nrows(), rank, |i, j| u[(i, order[j])]);
    Ok((basis, s, rank))
}

/// `R(M)_{(i,j),(k,l)} = M_{(i,k),(j,l)}` for an `nm x nm` matrix; the result
/// is `n^2 x m^2`.
pub fn realign(m: MatRef<'_, c64>, n: usize, mm: usize) -> Result<Mat<c64>> {
    if m.nrows() != n * mm || m.ncols() != n * mm {
        return Err(Error::invalid(format!(
            "realign expects a {0}x{0} matrix, got {1}x{2}",
            n * mm,
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(Mat::from_fn(n * n, mm * mm, |row, col| {
        let (i, j) = (row / n, row % n);
        let (k, l) = (col / mm, col % mm);
        m[(i * mm + k, j * mm + l)]
    }))
}

/// `(1/sqrt(D)) sum_a |a a>` in `C^D (x) C^D`.
pub fn max_entangled(bond_dim: usize) -> Vec<c64> {
    let mut v = vec![c64::new(0.0, 0.0); bond_dim * bond_dim];
    let w = 1.0 / (bond_dim as f64).sqrt();
    for a in 0..bond_dim {
        v[a * bond_dim + a] = c64::new(w, 0.0);
    }
    v
}

/// Eigenvalues of `(A + A*)/2`, ascending, after checking that `A` is
/// Hermitian to `1e-8` relative in operator norm.
pub fn hermitian_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let h = hermitize_checked(a)?;
    let mut ev = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::numerical("hermitian eigenvalues", f64::NAN))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub(crate) fn hermitize_checked(a: MatRef<'_, c64>) -> Result<Mat<c64>> {
    check_square(a)?;
    check_finite(a)?;
    let skew = a - a.adjoint();
    let na = operator_norm(a)?;
    let ns = operator_norm(skew.as_ref())?;
    if ns > 1e-8 * na {
        return Err(Error::invalid(format!("matrix is not Hermitian: |A - A*| = {ns:e}, |A| = {na:e}")));
    }
    Ok(hermitize(a))
}

pub(crate) fn hermitize(a: MatRef<'_, c64>) -> Mat<c64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

// ---------------------------------------------------------------- gaps

/// Upper spectral gap, choosing the dense path up to [`DENSE_LIMIT`].
pub fn upper_gap(m: MatRef<'_, c64>) -> Result<SpectralSummary> {
    let n = check_square(m)?;
    if n <= DENSE_LIMIT {
        upper_gap_dense(m)
    } else {
        upper_gap_iterative(&DenseOp(m), ITERATIVE_TOL)
    }
}

pub fn upper_gap_dense(m: MatRef<'_, c64>) -> Result<SpectralSummary> {
    let n = check_square(m)?;
    let ev = eigs_by_modulus(m)?;
    let sv = singular_values(m)?;
    let lambda1 = ev[0];
    // A 1x1 matrix has no second eigenvalue; it is taken to be 0.
    let l2 = if n > 1 { ev[1].norm() } else { 0.0 };
    let s2 = if n > 1 { sv[1] } else { 0.0 };
    Ok(SpectralSummary {
        lambda1,
        lambda2_modulus: l2,
        gap: lambda1.norm() - l2,
        s1: sv[0],
        s2,
        method: SolverMethod::Dense,
        residual: 0.0,
    })
}

/// A square operator known only through products with it and its adjoint.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[c64], y: &mut [c64]);
    fn apply_adjoint(&self, x: &[c64], y: &mut [c64]);
}

pub struct DenseOp<'a>(pub MatRef<'a, c64>);

impl LinearOperator for DenseOp<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[c64], y: &mut [c64]) {
        matvec_into(self.0, x, y);
    }
    fn apply_adjoint(&self, x: &[c64], y: &mut [c64]) {
        matvec_into(self.0.adjoint(), x, y);
    }
}

/// Krylov route: the dominant eigenpair by restarted Arnoldi, then `|lambda2|`
/// as the dominant eigenvalue of `M (Id - v v*)`, whose spectrum is that of
/// `M` with `lambda1` replaced by 0. Singular values from Lanczos on `M*M`.
pub fn upper_gap_iterative(op: &dyn LinearOperator, tol: f64) -> Result<SpectralSummary> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let apply = |x: &[c64], y: &mut [c64]| op.apply(x, y);
    let (lambda1, v1, r1) = dominant_eigpair(&apply, n, tol, 1)?;
    let (l2, r2) = if n > 1 {
        let deflated = |x: &[c64], y: &mut [c64]| {
            let mut z = x.to_vec();
            axpy(-dot(&v1, x), &v1, &mut z);
            op.apply(&z, y);
        };
        let (l2, _, r2) = dominant_eigpair(&deflated, n, tol, 2)?;
        (l2.norm(), r2)
    } else {
        (0.0, 0.0)
    };

    let gram = |x: &[c64], y: &mut [c64]| {
        let mut t = vec![c64::new(0.0, 0.0); n];
        op.apply(x, &mut t);
        op.apply_adjoint(&t, y);
        y.iter_mut().for_each(|z| *z = -*z);
    };
    let k = n.min(2);
    let scale = lambda1.norm().max(1e-300);
    let sv = lowest_eigpairs_hermitian(&gram, n, k, tol * scale * scale)?;
    let s1 = (-sv.values[0]).max(0.0).sqrt();
    let s2 = if k > 1 { (-sv.values[1]).max(0.0).sqrt() } else { 0.0 };
    Ok(SpectralSummary {
        lambda1,
        lambda2_modulus: l2,
        gap: lambda1.norm() - l2,
        s1,
        s2,
        method: SolverMethod::Iterative,
        residual: r1.max(r2),
    })
}

/// Largest-modulus eigenpair by explicitly restarted Arnoldi.
/// Returns `(lambda, unit eigenvector, residual |Mv - lambda v|)`.
pub fn dominant_eigpair(
    apply: &dyn Fn(&[c64], &mut [c64]),
    n: usize,
    tol: f64,
    salt: u64,
) -> Result<(c64, Vec<c64>, f64)> {
    let kdim = n.min(80);
    let max_restarts = 400;
    let mut v = random_unit(n, salt);
    let mut best = f64::INFINITY;
    let mut w = vec![c64::new(0.0, 0.0); n];
    for _ in 0..max_restarts {
        let mut basis: Vec<Vec<c64>> = vec![v.clone()];
        let mut h = Mat::<c64>::zeros(kdim + 1, kdim);
        let mut m_eff = kdim;
        let mut hscale = 0.0f64;
        for j in 0..kdim {
            apply(&basis[j], &mut w);
            // Two passes of classical Gram-Schmidt.
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = dot(b, &w);
                    axpy(-c, b, &mut w);
                    h[(i, j)] += c;
                }
            }
            let beta = norm(&w);
            hscale = hscale.max((0..=j).map(|i| h[(i, j)].norm()).fold(beta, f64::max));
            if beta <= 1e-14 * hscale.max(1e-300) || j + 1 == n {
                m_eff = j + 1;
                break;
            }
            h[(j + 1, j)] = c64::new(beta, 0.0);
            let mut next = w.clone();
            scale(c64::new(1.0 / beta, 0.0), &mut next);
            basis.push(next);
        }
        let hm = h.as_ref().submatrix(0, 0, m_eff, m_eff);
        let (vals, vecs) = eig_by_modulus(hm)?;
        let theta = vals[0];
        let mut y = vec![c64::new(0.0, 0.0); n];
        for i in 0..m_eff {
            axpy(vecs[(i, 0)], &basis[i], &mut y);
        }
        let ny = norm(&y);
        scale(c64::new(1.0 / ny, 0.0), &mut y);
        apply(&y, &mut w);
        axpy(-theta, &y, &mut w);
        let res = norm(&w);
        best = best.min(res);
        if res <= tol * theta.norm().max(1e-300) || res <= 1e-300 {
            return Ok((theta, y, res));
        }
        v = y;
    }
    Err(Error::numerical("restarted Arnoldi", best))
}

// ---------------------------------------------------------------- Hermitian Krylov

#[derive(Debug, Clone)]
pub struct HermitianEigs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<c64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

/// The `count` smallest eigenvalues of a Hermitian operator, ascending.
pub fn lowest_eigs_hermitian(
    apply: &dyn Fn(&[c64], &mut [c64]),
    dim: usize,
    count: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    Ok(lowest_eigpairs_hermitian(apply, dim, count, tol)?.values)
}

/// Block Lanczos with full reorthogonalization and thick restarts.
///
/// The basis is grown by the residuals of the wanted Ritz pairs, so
/// eigenvalues with multiplicity up to `count` are resolved. Each returned
/// pair satisfies `|Hv - lambda v| <= tol`.
pub fn lowest_eigpairs_hermitian(
    apply: &dyn Fn(&[c64], &mut [c64]),
    dim: usize,
    count: usize,
    tol: f64,
) -> Result<HermitianEigs> {
    if count == 0 || count > dim {
        return Err(Error::invalid(format!("need 1 <= count <= dim, got count={count}, dim={dim}")));
    }
    let max_basis = dim.min((4 * count).max(48));
    let max_matvecs = 50_000usize.max(20 * dim.min(2000));
    let zero = c64::new(0.0, 0.0);

    let mut basis: Vec<Vec<c64>> = Vec::new();
    let mut images: Vec<Vec<c64>> = Vec::new();
    // proj[j][i] = <v_i, H v_j>
    let mut proj: Vec<Vec<c64>> = Vec::new();
    let mut matvecs = 0usize;
    let mut salt = 100u64;

    let push = |cand: Vec<c64>,
                    basis: &mut Vec<Vec<c64>>,
                    images: &mut Vec<Vec<c64>>,
                    proj: &mut Vec<Vec<c64>>,
                    matvecs: &mut usize|
     -> bool {
        let mut v = cand;
        let n0 = norm(&v);
        if n0 == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(b, &v);
                axpy(-c, b, &mut v);
            }
        }
        let nv = norm(&v);
        if nv <= 1e-10 * n0 {
            return false;
        }
        scale(c64::new(1.0 / nv, 0.0), &mut v);
        let mut hv = vec![zero; dim];
        apply(&v, &mut hv);
        *matvecs += 1;
        let mut col: Vec<c64> = basis.iter().map(|b| dot(b, &hv)).collect();
        col.push(dot(&v, &hv));
        // Keep the projected matrix Hermitian by filling the new row too.
        for (j, pj) in proj.iter_mut().enumerate() {
            pj.push(col[j].conj());
        }
        basis.push(v);
        images.push(hv);
        proj.push(col);
        true
    };

    for i in 0..count {
        let v = random_unit(dim, 7 + i as u64);
        push(v, &mut basis, &mut images, &mut proj, &mut matvecs);
    }

    let mut best = f64::INFINITY;
    loop {
        let k = basis.len();
        let hm = Mat::from_fn(k, k, |i, j| (proj[j][i] + proj[i][j].conj()) * 0.5);
        let eig = hm
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::numerical("projected eigenproblem", best))?;
        let theta: Vec<f64> = (0..k).map(|i| eig.S().column_vector()[i].re).collect();
        let s = eig.U();
        let want = count.min(k);

        let ritz = |j: usize, src: &Vec<Vec<c64>>| {
            let mut x = vec![zero; dim];
            for i in 0..k {
                axpy(s[(i, j)], &src[i], &mut x);
            }
            x
        };
        let mut xs = Vec::with_capacity(want);
        let mut rs = Vec::with_capacity(want);
        let mut res = Vec::with_capacity(want);
        for j in 0..want {
            let x = ritz(j, &basis);
            let mut r = ritz(j, &images);
            axpy(c64::new(-theta[j], 0.0), &x, &mut r);
            res.push(norm(&r));
            xs.push(x);
            rs.push(r);
        }
        let worst = res.iter().copied().fold(0.0, f64::max);
        best = best.min(worst);
        if want == count && worst <= tol {
            return Ok(HermitianEigs { values: theta[..count].to_vec(), vectors: xs, residuals: res, matvecs });
        }
        if k == dim && want == count {
            // The basis spans everything; what is left is rounding.
            return Err(Error::numerical("Lanczos (full basis, tolerance below rounding)", worst));
        }
        if matvecs > max_matvecs {
            return Err(Error::numerical("Lanczos iteration budget", best));
        }

        if k + count > max_basis {
            let keep = k.min((count + count).max(max_basis / 2));
            let new_basis: Vec<Vec<c64>> = (0..keep).map(|j| ritz(j, &basis)).collect();
            let new_images: Vec<Vec<c64>> = (0..keep).map(|j| ritz(j, &images)).collect();
            basis = new_basis;
            images = new_images;
            proj = (0..keep)
                .map(|j| (0..keep).map(|i| if i == j { c64::new(theta[j], 0.0) } else { zero }).collect())
                .collect();
        }

        let mut added = false;
        for (j, r) in rs.into_iter().enumerate() {
            if res[j] > tol {
                added |= push(r, &mut basis, &mut images, &mut proj, &mut matvecs);
            }
        }
        if !added && basis.len() < dim {
            salt += 1;
            added = push(random_unit(dim, salt), &mut basis, &mut images, &mut proj, &mut matvecs);
        }
        if !added && basis.len() >= dim {
            // Nothing left to add; one more Rayleigh-Ritz pass decides.
            continue;
        }
    }
}

// ---------------------------------------------------------------- certificate

/// Lower bound on the upper gap of `M` from the positive map's image of the
/// identity and a candidate dominant vector `phi`.
pub fn gap_certificate(
    m: MatRef<'_, c64>,
    cp_identity_image: MatRef<'_, c64>,
    phi: &[c64],
) -> Result<GapCertificate> {
    let n = check_square(m)?;
    let k = check_square(cp_identity_image)?;
    if k * k != n || phi.len() != n {
        return Err(Error::invalid(format!(
            "certificate dimensions: M is {n}x{n}, image is {k}x{k}, phi has {}",
            phi.len()
        )));
    }
    let lmin = hermitian_eigenvalues(cp_identity_image)?[0];
    let delta = (1.0 - lmin).max(0.0);

    let mphi = matvec(m, phi);
    let epsilon = (dot(phi, &mphi).norm() - 1.0).max(0.0);

    // M (Id - phi phi*) = M - (M phi) phi*,  (Id - phi phi*) M = M - phi (phi* M)
    let phim: Vec<c64> = matvec(m.adjoint(), phi);
    let right = Mat::from_fn(n, n, |i, j| m[(i, j)] - mphi[i] * phi[j].conj());
    let left = Mat::from_fn(n, n, |i, j| m[(i, j)] - phi[i] * phim[j].conj());
    let eta = operator_norm(right.as_ref())?.max(operator_norm(left.as_ref())?);

    let bound = 1.0 - 2.0 * delta - epsilon - 2.0 * eta;
    let ok = |x: f64| (0.0..0.2).contains(&x);
    Ok(GapCertificate { delta, epsilon, eta, bound, applicable: ok(delta) && ok(epsilon) && ok(eta) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rand_gauss::{sample_complex_gaussian_matrix, SeedSpec};

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn gauss(i: u64, r: usize, col: usize) -> Mat<c64> {
        sample_complex_gaussian_matrix(&SeedSpec::new(11, i, "spectral"), r, col, 1.0).unwrap()
    }

    fn diag(v: &[c64]) -> Mat<c64> {
        Mat::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] } else { c(0.0, 0.0) })
    }

    #[test]
    fn diagonal_ordering() {
        let m = diag(&[c(1.0, 0.0), c(0.0, -2.0), c(3.0, 0.0)]);
        let ev = eigs_by_modulus(m.as_ref()).unwrap();
        let want = [c(3.0, 0.0), c(0.0, -2.0), c(1.0, 0.0)];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn ties_are_deterministic() {
        let mut v = vec![c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)];
        sort_by_modulus(&mut v);
        assert_eq!(v, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn scalar_matrix() {
        let m = Mat::from_fn(1, 1, |_, _| c(0.5, 0.0));
        assert_eq!(eigs_by_modulus(m.as_ref()).unwrap(), vec![c(0.5, 0.0)]);
        let s = upper_gap(m.as_ref()).unwrap();
        assert!((s.gap - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_matches_quadratic_formula() {
        let m = gauss(1, 2, 2);
        let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let tr = a + d;
        let det = a * d - b * cc;
        let disc = (tr * tr - det * 4.0).sqrt();
        let mut roots = vec![(tr + disc) * 0.5, (tr - disc) * 0.5];
        sort_by_modulus(&mut roots);
        let ev = eigs_by_modulus(m.as_ref()).unwrap();
        for (x, y) in ev.iter().zip(&roots) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn gap_of_diagonal() {
        let m = diag(&[c(1.0, 0.0), c(0.3, 0.0), c(0.1, 0.0)]);
        let s = upper_gap(m.as_ref()).unwrap();
        assert!((s.gap - 0.7).abs() < 1e-12);
        assert_eq!(s.method, SolverMethod::Dense);
    }

    #[test]
    fn iterative_path_matches_dense() {
        // A random similarity transform of a spectrum with a clear second
        // eigenvalue; the rest of the spectrum is random inside |z| < 0.5.
        let n = 200;
        let g = gauss(2, n, n);
        let mut lam: Vec<c64> = (0..n).map(|i| g[(i, 0)] * (0.5 / (1.0 + g[(i, 0)].norm()))).collect();
        lam[0] = c(1.3, 0.2);
        lam[1] = c(-0.2, 0.8);
        let p = Mat::from_fn(n, n, |i, j| g[(i, j)] * (0.1 / (n as f64).sqrt()) + if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let pinv = faer::linalg::solvers::DenseSolveCore::inverse(&p.partial_piv_lu());
        let m = &p * diag(&lam) * &pinv;
        let dense = upper_gap_dense(m.as_ref()).unwrap();
        let iter = upper_gap_iterative(&DenseOp(m.as_ref()), 1e-12).unwrap();
        assert!((dense.gap - iter.gap).abs() < 1e-8, "{} vs {}", dense.gap, iter.gap);
        assert!((dense.s1 - iter.s1).abs() < 1e-8);
        assert!((dense.s2 - iter.s2).abs() < 1e-6);
    }

    #[test]
    fn singular_values_basic() {
        let m = diag(&[c(2.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(singular_values(m.as_ref()).unwrap(), vec![2.0, 1.0]);
        let u = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let v = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let r1 = Mat::from_fn(2, 3, |i, j| u[i] * v[j].conj());
        let s = singular_values(r1.as_ref()).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14 && s[1].abs() < 1e-14);
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(Mat::<c64>::identity(5, 5).as_ref()).unwrap() - 1.0).abs() < 1e-14);
        let m = diag(&[c(0.2, 0.0), c(-5.0, 0.0)]);
        assert!((operator_norm(m.as_ref()).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn operator_norm_matches_power_iteration() {
        let m = gauss(3, 30, 30);
        let g = m.adjoint() * &m;
        let mut v = vec![c(1.0, 0.0); 30];
        let mut lam = 0.0;
        for _ in 0..5000 {
            let w = matvec(g.as_ref(), &v);
            lam = norm(&w);
            v = w.into_iter().map(|z| z / lam).collect();
        }
        assert!((lam.sqrt() - operator_norm(m.as_ref()).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn realign_examples() {
        let d = 3;
        let psi = max_entangled(d);
        let p = Mat::from_fn(d * d, d * d, |i, j| psi[i] * psi[j].conj());
        let r = realign(p.as_ref(), d, d).unwrap();
        for i in 0..d * d {
            for j in 0..d * d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((r[(i, j)] * d as f64 - c(want, 0.0)).norm() < 1e-14);
            }
        }
        let m = gauss(4, 6, 6);
        assert!(realign(m.as_ref(), 2, 2).is_err());
        let r = realign(m.as_ref(), 2, 3).unwrap();
        assert_eq!((r.nrows(), r.ncols()), (4, 9));
        let m9 = gauss(5, 9, 9);
        assert_eq!(realign(realign(m9.as_ref(), 3, 3).unwrap().as_ref(), 3, 3).unwrap(), m9);
    }

    #[test]
    fn max_entangled_norm() {
        assert_eq!(max_entangled(1), vec![c(1.0, 0.0)]);
        for d in 1..=64 {
            assert!((norm(&max_entangled(d)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_diagonal_and_projector() {
        let n = 50;
        let apply = |x: &[c64], y: &mut [c64]| {
            for i in 0..n {
                y[i] = x[i] * i as f64;
            }
        };
        let v = lowest_eigs_hermitian(&apply, n, 2, 1e-10).unwrap();
        assert!(v[0].abs() < 1e-9 && (v[1] - 1.0).abs() < 1e-9);

        // rank-17 projector in 20 dimensions: three zeros, then ones.
        let q = gauss(6, 20, 17).qr().compute_thin_Q();
        let p = &q * q.adjoint();
        let apply = |x: &[c64], y: &mut [c64]| matvec_into(p.as_ref(), x, y);
        let v = lowest_eigs_hermitian(&apply, 20, 4, 1e-10).unwrap();
        for (a, b) in v.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-9, "{v:?}");
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 300;
        let g = gauss(7, n, n);
        let h = hermitize(g.as_ref());
        let apply = |x: &[c64], y: &mut [c64]| matvec_into(h.as_ref(), x, y);
        let got = lowest_eigpairs_hermitian(&apply, n, 3, 1e-9).unwrap();
        let want = hermitian_eigenvalues(h.as_ref()).unwrap();
        for i in 0..3 {
            assert!((got.values[i] - want[i]).abs() < 1e-8, "{} vs {}", got.values[i], want[i]);
            assert!(got.residuals[i] <= 1e-9);
        }
    }

    #[test]
    fn lanczos_rejects_bad_count() {
        let apply = |x: &[c64], y: &mut [c64]| y.copy_from_slice(x);
        assert!(lowest_eigs_hermitian(&apply, 3, 4, 1e-8).is_err());
    }

    #[test]
    fn certificate_rank_one() {
        let d = 3;
        let psi = max_entangled(d);
        let m = Mat::from_fn(d * d, d * d, |i, j| psi[i] * psi[j].conj());
        // X -> Tr(X) Id / D maps Id to Id.
        let id = Mat::<c64>::identity(d, d);
        let cert = gap_certificate(m.as_ref(), id.as_ref(), &psi).unwrap();
        assert!(cert.delta.abs() < 1e-12 && cert.epsilon.abs() < 1e-12 && cert.eta < 1e-12);
        assert!(cert.applicable && (cert.bound - 1.0).abs() < 1e-11);
        assert!((upper_gap(m.as_ref()).unwrap().gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_gate() {
        let d = 2;
        let psi = max_entangled(d);
        let m = Mat::from_fn(4, 4, |i, j| psi[i] * psi[j].conj() * 1.3);
        let cert = gap_certificate(m.as_ref(), Mat::<c64>::identity(2, 2).as_ref(), &psi).unwrap();
        assert!((cert.epsilon - 0.3).abs() < 1e-12);
        assert!(!cert.applicable);
        assert!((cert.bound - 0.7).abs() < 1e-9);
        assert!(gap_certificate(m.as_ref(), Mat::<c64>::identity(3, 3).as_ref(), &psi).is_err());
    }

    #[test]
    fn hermitian_check_rejects_skew() {
        let m = Mat::from_fn(2, 2, |i, j| if i < j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(hermitian_eigenvalues(m.as_ref()).is_err());
    }
}
