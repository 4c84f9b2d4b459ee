//! Parent Hamiltonians of random MPS (ring) and PEPS (torus): the two-site
//! map `Q`, the operators `W` and `M = Q*Q`, the local ground projector, the
//! three-site commutator, and matrix-free gap computation.

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rand_gauss::{MpsTensor, PepsTensor};
use crate::spectral::{
    hermitian_eigenvalues, lowest_eigpairs_hermitian, range_basis, singular_values,
};
use crate::tensors::{checked_pow, mps_chain_matrix, peps_patch_matrix};

pub const HAMILTONIAN_TOL: f64 = 1e-9;
/// Largest Hilbert space the Krylov driver will work in.
pub const KRYLOV_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Mps,
    PepsVertical,
    PepsHorizontal,
}

/// Projector `Pi = basis basis*` onto the two-site ground space.
#[derive(Debug, Clone)]
pub struct GroundProjector {
    pub d: usize,
    pub rank: usize,
    /// Rank the map would have if injective (its number of columns).
    pub expected_rank: usize,
    pub basis: Mat<c64>,
    pub orientation: Orientation,
    /// Singular values of the two-site map, descending.
    pub singular_values: Vec<f64>,
    /// `|P~ - Pi|` with `P~ = scale * Q Q*`.
    pub p_tilde_distance: f64,
    /// Orthonormal basis (columns) of the single-site physical subspace the
    /// ground space lives in, when known.
    pub site_support: Option<Mat<c64>>,
}

impl GroundProjector {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.expected_rank
    }

    pub fn with_site_support(mut self, support: Mat<c64>) -> Result<Self> {
        if support.nrows() != self.d || support.ncols() == 0 || support.ncols() > self.d {
            return Err(Error::invalid("site support must be d x u with 1 <= u <= d"));
        }
        self.site_support = Some(support);
        Ok(self)
    }

    /// Dense `d^2 x d^2` projector.
    pub fn projector(&self) -> Mat<c64> {
        &self.basis * self.basis.adjoint()
    }

    /// The same projector expressed in the site-support basis `U`:
    /// `(U* (x) U*) basis`. Without a support this is the basis itself.
    pub fn reduced_basis(&self) -> Mat<c64> {
        let Some(u) = &self.site_support else { return self.basis.clone() };
        let (d, k) = (self.d, u.ncols());
        let mut out = Mat::<c64>::zeros(k * k, self.rank);
        for a in 0..self.rank {
            // B_a as a d x d matrix; reduced block is U* B_a conj(U)
            let b = Mat::from_fn(d, d, |i, j| self.basis[(i * d + j, a)]);
            let left = u.adjoint() * &b;
            let red = &left * u.conjugate();
            for i in 0..k {
                for j in 0..k {
                    out[(i * k + j, a)] = red[(i, j)];
                }
            }
        }
        out
    }
}

/// Range projector of a two-site map. `scale` is the factor in `P~ = scale Q Q*`
/// (`D` for MPS, `D^3` for PEPS).
pub fn ground_projector(q: MatRef<'_, c64>, orientation: Orientation, scale: f64) -> Result<GroundProjector> {
    let rows = q.nrows();
    let d = (rows as f64).sqrt().round() as usize;
    if d * d != rows {
        return Err(Error::invalid(format!("two-site map has {rows} rows, not a square")));
    }
    let (basis, s, rank) = range_basis(q)?;
    let p_tilde_distance = s
        .iter()
        .enumerate()
        .map(|(i, &x)| (scale * x * x - if i < rank { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    Ok(GroundProjector {
        d,
        rank,
        expected_rank: q.ncols(),
        basis,
        orientation,
        singular_values: s,
        p_tilde_distance,
        site_support: None,
    })
}

/// `Q : C^D (x) C^D -> C^d (x) C^d`, column `l*D + r` is the two-site
/// contraction with open bonds `l, r`.
pub fn two_site_map(t: &MpsTensor) -> Result<Mat<c64>> {
    mps_chain_matrix(t, 2)
}

/// `W = chi~* chi~` on `C^D (x) C^D`, entry `((l,r),(l',r')) = sum_x conj(g_{xlr}) g_{xl'r'}`.
pub fn w_operator(t: &MpsTensor) -> Mat<c64> {
    let s = t.site_map();
    s.adjoint() * &s
}

/// `M = Q* Q`.
pub fn m_operator(t: &MpsTensor) -> Result<Mat<c64>> {
    let q = two_site_map(t)?;
    Ok(q.adjoint() * &q)
}

/// Two-site PEPS map with six open boundary legs of each site pair.
pub fn peps_two_site_map(t: &PepsTensor, orientation: Orientation) -> Result<Mat<c64>> {
    match orientation {
        Orientation::PepsHorizontal => peps_patch_matrix(t, 1, 2),
        Orientation::PepsVertical => peps_patch_matrix(t, 2, 1),
        Orientation::Mps => Err(Error::invalid("PEPS map needs a PEPS orientation")),
    }
}

fn support_of(site_map: MatRef<'_, c64>) -> Result<Mat<c64>> {
    Ok(range_basis(site_map)?.0)
}

pub fn mps_ground_projector(t: &MpsTensor) -> Result<GroundProjector> {
    let q = two_site_map(t)?;
    ground_projector(q.as_ref(), Orientation::Mps, t.bond_dim() as f64)?.with_site_support(support_of(t.site_map().as_ref())?)
}

pub fn peps_ground_projector(t: &PepsTensor, orientation: Orientation) -> Result<GroundProjector> {
    let q = peps_two_site_map(t, orientation)?;
    let scale = (t.bond_dim() as f64).powi(3);
    ground_projector(q.as_ref(), orientation, scale)?.with_site_support(support_of(t.site_map().as_ref())?)
}

/// `|[Pi_12 (x) Id_3, Id_1 (x) Pi_23]|`.
///
/// Both projectors act within `U^{(x)3}`, `U` the site support, and vanish
/// against each other on its complement, so the commutator is computed
/// there. For projectors `P = XX*`, `Q = YY*` one has
/// `|[P, Q]| = |P Q (Id - P)| = |(X*Y) ((Id - XX*) Y)*|`; forming
/// `(Id - XX*) Y` explicitly avoids the cancellation that `sqrt(1 - cos^2)`
/// suffers when principal angles are tiny. Large supports (PEPS) fall back
/// to `max cos sin` over the singular values of `X*Y`, accurate to about
/// `1e-8` absolute.
pub fn commutator_norm(proj: &GroundProjector) -> Result<f64> {
    commutator_norm_with(proj, 200_000)
}

fn commutator_norm_with(proj: &GroundProjector, dense_limit: usize) -> Result<f64> {
    let bm = proj.reduced_basis();
    let u = proj.site_support.as_ref().map_or(proj.d, |s| s.ncols());
    let r = proj.rank;
    if r == 0 {
        return Ok(0.0);
    }
    let blocks: Vec<Mat<c64>> = (0..r).map(|a| Mat::from_fn(u, u, |i, j| bm[(i * u + j, a)])).collect();
    // A = X*Y, rows (a, k) = B_a (x) f_k, cols (j, b) = f_j (x) B_b
    let mut a = Mat::<c64>::zeros(r * u, u * r);
    for (al, ba) in blocks.iter().enumerate() {
        let ca = ba.conjugate();
        for (be, bb) in blocks.iter().enumerate() {
            let p = ca * bb;
            for j in 0..u {
                for k in 0..u {
                    a[(al * u + k, j * r + be)] = p[(j, k)];
                }
            }
        }
    }
    let u3 = u * u * u;
    if r * u * u3 > dense_limit {
        return Ok(singular_values(a.as_ref())?
            .iter()
            .map(|&c| {
                let c = c.clamp(0.0, 1.0);
                c * (1.0 - c * c).sqrt()
            })
            .fold(0.0, f64::max));
    }
    // E = Y - X A, rows (x, y, z) of U^3
    let mut e = Mat::<c64>::zeros(u3, u * r);
    for j in 0..u {
        for (be, bb) in blocks.iter().enumerate() {
            for y in 0..u {
                for z in 0..u {
                    e[((j * u + y) * u + z, j * r + be)] = bb[(y, z)];
                }
            }
        }
    }
    for z in 0..u {
        let az = Mat::from_fn(r, u * r, |al, c| a[(al * u + z, c)]);
        let xa = &bm * &az;
        for xy in 0..u * u {
            for c in 0..u * r {
                e[(xy * u + z, c)] -= xa[(xy, c)];
            }
        }
    }
    let m = &a * e.adjoint();
    Ok(singular_values(m.as_ref())?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "n")]
pub enum Geometry {
    Ring(usize),
    Torus(usize),
}

impl Geometry {
    pub fn sites(&self) -> usize {
        match *self {
            Geometry::Ring(n) => n,
            Geometry::Torus(n) => n * n,
        }
    }

    /// Edges with the projector to use: `false` horizontal/ring, `true`
    /// vertical. Torus sites are numbered `row * N + col`; horizontal edges
    /// come first, both row-major.
    pub fn edges(&self) -> Vec<(usize, usize, bool)> {
        match *self {
            Geometry::Ring(n) => (0..n).map(|i| (i, (i + 1) % n, false)).collect(),
            Geometry::Torus(n) => {
                let s = |r: usize, c: usize| (r % n) * n + c % n;
                let mut e = Vec::with_capacity(2 * n * n);
                for r in 0..n {
                    for c in 0..n {
                        e.push((s(r, c), s(r, c + 1), false));
                    }
                }
                for r in 0..n {
                    for c in 0..n {
                        e.push((s(r, c), s(r + 1, c), true));
                    }
                }
                e
            }
        }
    }

    /// Energy of any state with a site outside the site support: every edge
    /// touching that site contributes 1.
    fn sector_floor(&self) -> f64 {
        match self {
            Geometry::Ring(_) => 2.0,
            Geometry::Torus(_) => 4.0,
        }
    }
}

/// `H = sum_e (Id - Pi_e)`.
#[derive(Debug, Clone)]
pub struct ParentHamiltonian {
    pub geometry: Geometry,
    pub site_dim: usize,
    pub horizontal: GroundProjector,
    pub vertical: Option<GroundProjector>,
}

impl ParentHamiltonian {
    pub fn ring(proj: GroundProjector, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("a ring needs at least two sites"));
        }
        Ok(Self { geometry: Geometry::Ring(n), site_dim: proj.d, horizontal: proj, vertical: None })
    }

    pub fn torus(horizontal: GroundProjector, vertical: GroundProjector, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("a torus needs N >= 2"));
        }
        if horizontal.d != vertical.d {
            return Err(Error::invalid("projectors disagree on d"));
        }
        Ok(Self { geometry: Geometry::Torus(n), site_dim: horizontal.d, horizontal, vertical: Some(vertical) })
    }

    pub fn dim(&self) -> Result<usize> {
        checked_pow(self.site_dim, self.geometry.sites())
            .filter(|&n| n <= KRYLOV_LIMIT)
            .ok_or_else(|| Error::Resource(format!("{}^{} exceeds the Krylov budget", self.site_dim, self.geometry.sites())))
    }

    fn projector_for(&self, vertical: bool) -> &GroundProjector {
        if vertical {
            self.vertical.as_ref().unwrap_or(&self.horizontal)
        } else {
            &self.horizontal
        }
    }

    /// The Hamiltonian restricted to `(span U)^{(x) sites}`, written in the
    /// site-support basis. `None` when some projector has no site support or
    /// the supports already fill `C^d`.
    pub fn reduced(&self) -> Option<ParentHamiltonian> {
        let u_h = self.horizontal.site_support.as_ref()?;
        if let Some(v) = &self.vertical {
            let u_v = v.site_support.as_ref()?;
            if u_v.ncols() != u_h.ncols() || (u_v - u_h).norm_max() > 1e-12 {
                return None;
            }
        }
        let u = u_h.ncols();
        if u >= self.site_dim {
            return None;
        }
        let shrink = |p: &GroundProjector| GroundProjector {
            d: u,
            rank: p.rank,
            expected_rank: p.expected_rank,
            basis: p.reduced_basis(),
            orientation: p.orientation,
            singular_values: p.singular_values.clone(),
            p_tilde_distance: p.p_tilde_distance,
            site_support: None,
        };
        Some(ParentHamiltonian {
            geometry: self.geometry,
            site_dim: u,
            horizontal: shrink(&self.horizontal),
            vertical: self.vertical.as_ref().map(shrink),
        })
    }
}

pub fn mps_parent_hamiltonian(t: &MpsTensor, n: usize) -> Result<ParentHamiltonian> {
    ParentHamiltonian::ring(mps_ground_projector(t)?, n)
}

pub fn peps_parent_hamiltonian(t: &PepsTensor, n: usize) -> Result<ParentHamiltonian> {
    let h = peps_ground_projector(t, Orientation::PepsHorizontal)?;
    let v = peps_ground_projector(t, Orientation::PepsVertical)?;
    ParentHamiltonian::torus(h, v, n)
}

/// `H v`, edge by edge: gather the two-site blocks, subtract their
/// projection, scatter back. `H` is never formed.
pub fn hamiltonian_matvec(h: &ParentHamiltonian, v: &[c64]) -> Result<Vec<c64>> {
    let n = h.dim()?;
    if v.len() != n {
        return Err(Error::invalid(format!("vector has length {}, expected {n}", v.len())));
    }
    let mut out = vec![c64::new(0.0, 0.0); n];
    matvec_into(h, v, &mut out);
    Ok(out)
}

fn matvec_into(h: &ParentHamiltonian, v: &[c64], out: &mut [c64]) {
    let d = h.site_dim;
    let sites = h.geometry.sites();
    let rest = d.pow(sites as u32 - 2);
    let stride = |s: usize| d.pow((sites - 1 - s) as u32);
    out.iter_mut().for_each(|z| *z = c64::new(0.0, 0.0));
    for (s1, s2, vertical) in h.geometry.edges() {
        let b = &h.projector_for(vertical).basis;
        let (st1, st2) = (stride(s1), stride(s2));
        // offsets of the remaining sites, in increasing site order
        let others: Vec<usize> = (0..sites).filter(|&s| s != s1 && s != s2).map(stride).collect();
        let bases: Vec<usize> = (0..rest)
            .map(|mut r| {
                let mut off = 0;
                for &st in others.iter().rev() {
                    off += (r % d) * st;
                    r /= d;
                }
                off
            })
            .collect();
        let mut w = Mat::from_fn(d * d, rest, |x, r| v[bases[r] + (x / d) * st1 + (x % d) * st2]);
        let mut c = Mat::<c64>::zeros(b.ncols(), rest);
        matmul(c.as_mut(), Accum::Replace, b.adjoint(), w.as_ref(), c64::new(1.0, 0.0), Par::Seq);
        matmul(w.as_mut(), Accum::Add, b.as_ref(), c.as_ref(), c64::new(-1.0, 0.0), Par::Seq);
        for (r, &base) in bases.iter().enumerate() {
            for x in 0..d * d {
                out[base + (x / d) * st1 + (x % d) * st2] += w[(x, r)];
            }
        }
    }
}

/// Dense `H`, assembled column by column from the matvec.
pub fn hamiltonian_dense(h: &ParentHamiltonian) -> Result<Mat<c64>> {
    let n = h.dim()?;
    if n > crate::spectral::DENSE_LIMIT {
        return Err(Error::Resource(format!("dense Hamiltonian would be {n}x{n}")));
    }
    let mut m = Mat::<c64>::zeros(n, n);
    let mut e = vec![c64::new(0.0, 0.0); n];
    let mut col = vec![c64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = c64::new(1.0, 0.0);
        matvec_into(h, &e, &mut col);
        e[j] = c64::new(0.0, 0.0);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpectrum {
    pub ground_energy: f64,
    /// Second smallest eigenvalue.
    pub gap: f64,
    /// Solved in the site-support sector.
    pub reduced: bool,
    pub residual: f64,
    pub matvecs: usize,
}

/// Ground energy and gap. When the local ground spaces sit inside
/// `U (x) U` for a proper subspace `U` of `C^d`, `H` splits into sectors by
/// which sites lie in `U`; any sector with a site outside `U` has energy at
/// least the number of edges at a site (attained), so the gap is
/// `min(floor, lambda_2)` of the Hamiltonian restricted to `U^{(x) N}`.
pub fn hamiltonian_gap(h: &ParentHamiltonian) -> Result<HamiltonianSpectrum> {
    match h.reduced() {
        Some(r) if r.dim()? == 1 => {
            let e = [c64::new(1.0, 0.0)];
            let mut he = [c64::new(0.0, 0.0)];
            matvec_into(&r, &e, &mut he);
            Ok(HamiltonianSpectrum {
                ground_energy: he[0].re,
                gap: h.geometry.sector_floor(),
                reduced: true,
                residual: 0.0,
                matvecs: 1,
            })
        }
        Some(r) => {
            let mut s = hamiltonian_gap_full(&r)?;
            s.gap = s.gap.min(h.geometry.sector_floor());
            s.reduced = true;
            Ok(s)
        }
        None => hamiltonian_gap_full(h),
    }
}

/// Two lowest eigenvalues by block Lanczos on the full space.
pub fn hamiltonian_gap_full(h: &ParentHamiltonian) -> Result<HamiltonianSpectrum> {
    let n = h.dim()?;
    if n < 2 {
        return Err(Error::invalid("Hilbert space too small for a gap"));
    }
    let apply = |x: &[c64], y: &mut [c64]| matvec_into(h, x, y);
    let e = lowest_eigpairs_hermitian(&apply, n, 2, HAMILTONIAN_TOL)?;
    Ok(HamiltonianSpectrum {
        ground_energy: e.values[0],
        gap: e.values[1],
        reduced: false,
        residual: e.residuals.iter().copied().fold(0.0, f64::max),
        matvecs: e.matvecs,
    })
}

/// `lambda_min(H^2 - (1 - 4c) H)` on a dense instance.
pub fn h_squared_margin(h: &ParentHamiltonian, commutator: f64) -> Result<f64> {
    let m = hamiltonian_dense(h)?;
    let m2 = &m * &m;
    let a = m2 - &m * faer::Scale(c64::new(1.0 - 4.0 * commutator, 0.0));
    Ok(hermitian_eigenvalues(a.as_ref())?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rand_gauss::{sample_complex_gaussian_matrix, sample_mps_tensor, sample_peps_tensor, SeedSpec};
    use crate::spectral::{norm, operator_norm, realign};
    use crate::tensors::{mps_state, peps_state};

    fn seed(i: u64) -> SeedSpec {
        SeedSpec::new(9, i, "parent")
    }

    #[test]
    fn scalar_maps() {
        let g = c64::new(0.6, 0.2);
        let t = MpsTensor::new(1, 1, vec![g]).unwrap();
        assert!((two_site_map(&t).unwrap()[(0, 0)] - g * g).norm() < 1e-15);
        assert!((w_operator(&t)[(0, 0)] - g.norm_sqr()).norm() < 1e-15);
        let p = PepsTensor::new(1, 1, vec![g]).unwrap();
        let q = peps_two_site_map(&p, Orientation::PepsVertical).unwrap();
        assert!((q[(0, 0)] - g * g).norm() < 1e-15);
    }

    #[test]
    fn q_applies_to_boundaries() {
        let t = sample_mps_tensor(&seed(0), 4, 2).unwrap();
        let q = two_site_map(&t).unwrap();
        for i in 0..20 {
            let u = sample_complex_gaussian_matrix(&seed(10 + i), 4, 1, 1.0).unwrap();
            let qu = &q * &u;
            for x1 in 0..4 {
                for x2 in 0..4 {
                    let mut want = c64::new(0.0, 0.0);
                    for l in 0..2 {
                        for r in 0..2 {
                            for a in 0..2 {
                                want += t.entry(x1, l, a) * t.entry(x2, a, r) * u[(l * 2 + r, 0)];
                            }
                        }
                    }
                    assert!((qu[(x1 * 4 + x2, 0)] - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn m_is_realigned_square_of_w() {
        let t = sample_mps_tensor(&seed(1), 5, 3).unwrap();
        let m = m_operator(&t).unwrap();
        let dd = 3;
        let brute = Mat::from_fn(9, 9, |lr, lr2| {
            let (l, r, l2, r2) = (lr / dd, lr % dd, lr2 / dd, lr2 % dd);
            let mut acc = c64::new(0.0, 0.0);
            for x1 in 0..5 {
                for x2 in 0..5 {
                    for a in 0..dd {
                        for b in 0..dd {
                            acc += (t.entry(x1, l, a) * t.entry(x2, a, r)).conj() * t.entry(x1, l2, b) * t.entry(x2, b, r2);
                        }
                    }
                }
            }
            acc
        });
        assert!((&m - &brute).norm_max() < 1e-13);
        let rw = realign(w_operator(&t).as_ref(), dd, dd).unwrap();
        let via = realign((&rw * &rw).as_ref(), dd, dd).unwrap();
        assert!((&m - &via).norm_max() < 1e-13);
    }

    #[test]
    fn mean_w_is_identity_over_d() {
        let (d, dd, n) = (64, 2, 10_000);
        let mut sum = Mat::<c64>::zeros(4, 4);
        let mut sq = Mat::<f64>::zeros(4, 4);
        for i in 0..n {
            let w = w_operator(&sample_mps_tensor(&seed(1000 + i), d, dd).unwrap()) * faer::Scale(c64::new(dd as f64, 0.0));
            sum += &w;
            sq += Mat::<f64>::from_fn(4, 4, |a, b| w[(a, b)].norm_sqr());
        }
        for a in 0..4 {
            for b in 0..4 {
                let mean = sum[(a, b)] / n as f64;
                let sigma = ((sq[(a, b)] / n as f64 - mean.norm_sqr()) / n as f64).sqrt();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((mean - want).norm() <= 4.0 * sigma);
            }
        }
    }

    #[test]
    fn projector_basics() {
        for i in 0..100 {
            let t = sample_mps_tensor(&seed(200 + i), 5, 2).unwrap();
            let p = mps_ground_projector(&t).unwrap();
            assert_eq!(p.rank, 4);
            assert!(p.is_full_rank());
            let gram = p.basis.adjoint() * &p.basis;
            assert!((gram - Mat::<c64>::identity(4, 4)).norm_max() < 1e-12);
            if i < 5 {
                let pi = p.projector();
                let q = two_site_map(&t).unwrap();
                assert!((&pi * &q - &q).norm_max() < 1e-12);
                assert!((&pi * &pi - &pi).norm_max() < 1e-12);
                assert!((&pi - pi.adjoint()).norm_max() < 1e-12);
            }
        }
    }

    #[test]
    fn p_tilde_distance_is_dense_norm() {
        let t = sample_mps_tensor(&seed(300), 6, 2).unwrap();
        let q = two_site_map(&t).unwrap();
        let p = mps_ground_projector(&t).unwrap();
        let pt = &q * q.adjoint() * faer::Scale(c64::new(2.0, 0.0));
        let dense = operator_norm((pt - p.projector()).as_ref()).unwrap();
        assert!((dense - p.p_tilde_distance).abs() < 1e-12);
    }

    fn dense_commutator(p: &GroundProjector) -> f64 {
        let d = p.d;
        let pi = p.projector();
        let id = Mat::<c64>::identity(d, d);
        let kron = |a: &Mat<c64>, b: &Mat<c64>| {
            let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
            Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
        };
        let p1 = kron(&pi, &id);
        let p2 = kron(&id, &pi);
        operator_norm((&p1 * &p2 - &p2 * &p1).as_ref()).unwrap()
    }

    #[test]
    fn commutator_examples() {
        // Pi = Id
        let id = ground_projector(Mat::<c64>::identity(9, 9).as_ref(), Orientation::Mps, 1.0).unwrap();
        assert!(commutator_norm(&id).unwrap() < 1e-14);

        // product tensor g_{xlr} = u_x v_l w_r
        let u = [c64::new(0.3, 0.1), c64::new(-0.5, 0.2), c64::new(0.1, 0.7)];
        let t = MpsTensor::from_fn(3, 2, |x, l, r| u[x] * c64::new(1.0 + l as f64, 0.0) * c64::new(0.5 - r as f64, 0.3)).unwrap();
        let p = mps_ground_projector(&t).unwrap();
        assert_eq!(p.rank, 1);
        let (fast, slow) = (commutator_norm(&p).unwrap(), dense_commutator(&p));
        assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");

        for i in 0..5 {
            let t = sample_mps_tensor(&seed(400 + i), 3, 2).unwrap();
            let p = mps_ground_projector(&t).unwrap();
            let fast = commutator_norm(&p).unwrap();
            let slow = dense_commutator(&p);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
            // unreduced path
            let mut bare = p.clone();
            bare.site_support = None;
            assert!((commutator_norm(&bare).unwrap() - slow).abs() < 1e-12);
        }
        for i in 0..3 {
            let t = sample_mps_tensor(&seed(450 + i), 5, 2).unwrap();
            let p = mps_ground_projector(&t).unwrap();
            assert!((commutator_norm(&p).unwrap() - dense_commutator(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn commutator_paths_agree() {
        let t = sample_mps_tensor(&seed(470), 6, 2).unwrap();
        let p = mps_ground_projector(&t).unwrap();
        let a = commutator_norm_with(&p, usize::MAX).unwrap();
        let b = commutator_norm_with(&p, 0).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn peps_commutators() {
        let t = sample_peps_tensor(&seed(480), 17, 2).unwrap();
        for o in [Orientation::PepsHorizontal, Orientation::PepsVertical] {
            let c = commutator_norm(&peps_ground_projector(&t, o).unwrap()).unwrap();
            assert!(c.is_finite() && (0.0..=0.5).contains(&c));
        }
    }

    #[test]
    fn peps_two_site_maps() {
        let t = sample_peps_tensor(&seed(500), 9, 1).unwrap();
        let q = peps_two_site_map(&t, Orientation::PepsHorizontal).unwrap();
        for x1 in 0..9 {
            for x2 in 0..9 {
                assert!((q[(x1 * 9 + x2, 0)] - t.entry(x1, 0, 0, 0, 0) * t.entry(x2, 0, 0, 0, 0)).norm() < 1e-14);
            }
        }
        let t = sample_peps_tensor(&seed(501), 17, 2).unwrap();
        let q = peps_two_site_map(&t, Orientation::PepsVertical).unwrap();
        assert_eq!((q.nrows(), q.ncols()), (289, 64));
        // legs: left(top), left(bottom), right(top), right(bottom), up, down
        let (x1, x2, col) = (3, 11, 0b101101);
        let b = |k: usize| (col >> (5 - k)) & 1;
        let mut want = c64::new(0.0, 0.0);
        for mid in 0..2 {
            want += t.entry(x1, b(0), b(2), b(4), mid) * t.entry(x2, b(1), b(3), mid, b(5));
        }
        assert!((q[(x1 * 17 + x2, col)] - want).norm() < 1e-14);
    }

    #[test]
    fn peps_rank() {
        for i in 0..20 {
            let t = sample_peps_tensor(&seed(600 + i), 17, 2).unwrap();
            for o in [Orientation::PepsHorizontal, Orientation::PepsVertical] {
                assert_eq!(peps_ground_projector(&t, o).unwrap().rank, 64);
            }
        }
    }

    #[test]
    fn ring_hamiltonian() {
        let t = sample_mps_tensor(&seed(700), 5, 2).unwrap();
        let h = mps_parent_hamiltonian(&t, 3).unwrap();
        let dense = hamiltonian_dense(&h).unwrap();
        assert!((&dense - dense.adjoint()).norm_max() < 1e-12);
        for i in 0..20 {
            let v = sample_complex_gaussian_matrix(&seed(710 + i), 125, 1, 1.0).unwrap();
            let v: Vec<c64> = (0..125).map(|k| v[(k, 0)]).collect();
            let hv = hamiltonian_matvec(&h, &v).unwrap();
            let want = crate::spectral::matvec(dense.as_ref(), &v);
            assert!(hv.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-12));
        }
        // frustration free
        let chi = mps_state(&t, 3).unwrap();
        let hv = hamiltonian_matvec(&h, chi.amplitudes()).unwrap();
        assert!(norm(&hv) <= 1e-8 * norm(chi.amplitudes()) * 3.0);

        let ev = hermitian_eigenvalues(dense.as_ref()).unwrap();
        assert!(ev[0] > -1e-8 && ev[ev.len() - 1] <= 3.0 + 1e-8);
        let full = hamiltonian_gap_full(&h).unwrap();
        assert!((full.ground_energy - ev[0]).abs() < 1e-6 && (full.gap - ev[1]).abs() < 1e-6);
        let red = hamiltonian_gap(&h).unwrap();
        assert!(red.reduced);
        assert!((red.gap - ev[1]).abs() < 1e-6, "{} vs {}", red.gap, ev[1]);
        assert!(ev[1] > 10.0 * HAMILTONIAN_TOL && ev[0].abs() <= 1e-6);
    }

    #[test]
    fn identity_projector_gives_zero() {
        let id = ground_projector(Mat::<c64>::identity(4, 4).as_ref(), Orientation::Mps, 1.0).unwrap();
        let h = ParentHamiltonian::ring(id, 4).unwrap();
        assert_eq!(hamiltonian_dense(&h).unwrap().norm_max(), 0.0);
    }

    #[test]
    fn translation_invariance() {
        let t = sample_mps_tensor(&seed(800), 3, 2).unwrap();
        let h = mps_parent_hamiltonian(&t, 5).unwrap();
        let v = sample_complex_gaussian_matrix(&seed(801), 243, 1, 1.0).unwrap();
        let v: Vec<c64> = (0..243).map(|k| v[(k, 0)]).collect();
        let shift = |x: &[c64]| (0..243).map(|i| x[(i % 81) * 3 + i / 81]).collect::<Vec<_>>();
        let a = hamiltonian_matvec(&h, &shift(&v)).unwrap();
        let b = shift(&hamiltonian_matvec(&h, &v).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() <= 1e-10 * norm(&v)));
    }

    #[test]
    fn larger_reductions_agree_with_full() {
        for (i, n) in [4usize, 5].iter().enumerate() {
            let t = sample_mps_tensor(&seed(900 + i as u64), 5, 2).unwrap();
            let h = mps_parent_hamiltonian(&t, *n).unwrap();
            let full = hamiltonian_gap_full(&h).unwrap();
            let red = hamiltonian_gap(&h).unwrap();
            assert!((full.gap - red.gap).abs() < 1e-6, "N={n}: {} vs {}", full.gap, red.gap);
            assert!(full.ground_energy.abs() < 1e-6);
        }
    }

    #[test]
    fn h_squared_inequality() {
        let t = sample_mps_tensor(&seed(950), 5, 2).unwrap();
        let p = mps_ground_projector(&t).unwrap();
        let c = commutator_norm(&p).unwrap();
        let h = ParentHamiltonian::ring(p, 4).unwrap();
        assert!(h_squared_margin(&h, c).unwrap() >= -1e-8);
    }

    #[test]
    fn torus_edges_and_ground_state() {
        let g = Geometry::Torus(3);
        let e = g.edges();
        assert_eq!(e.len(), 18);
        assert_eq!(e[2], (2, 0, false));
        assert_eq!(e[9], (0, 3, true));
        assert_eq!(e[17], (8, 2, true));

        // small torus: d=2, D=1 keeps the space at 16 dims
        let t = sample_peps_tensor(&seed(960), 2, 1).unwrap();
        let h = peps_parent_hamiltonian(&t, 2).unwrap();
        let chi = peps_state(&t, 2).unwrap();
        let hv = hamiltonian_matvec(&h, chi.amplitudes()).unwrap();
        assert!(norm(&hv) <= 1e-10 * norm(chi.amplitudes()));
        let ev = hermitian_eigenvalues(hamiltonian_dense(&h).unwrap().as_ref()).unwrap();
        let s = hamiltonian_gap(&h).unwrap();
        assert!((s.gap - ev[1]).abs() < 1e-6, "{} vs {}", s.gap, ev[1]);
    }
}
