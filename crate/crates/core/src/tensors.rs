//! Exact contraction of MPS rings and PEPS tori, blocking, and injectivity
//! maps.
//!
//! State amplitudes are stored row-major in the site index: site 0 is the
//! most significant digit. On the torus, site `(row, col)` is number
//! `row * N + col`.

use std::path::Path;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::rand_gauss::{MpsTensor, PepsTensor};
use crate::spectral::{numerical_rank, singular_values};

/// Default cap on the number of complex amplitudes a contraction may produce.
pub const DEFAULT_BUDGET: usize = 200_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    site_dim: usize,
    num_sites: usize,
    amplitudes: Vec<c64>,
}

impl StateVector {
    pub fn new(site_dim: usize, num_sites: usize, amplitudes: Vec<c64>) -> Result<Self> {
        let want = checked_pow(site_dim, num_sites)
            .ok_or_else(|| Error::Resource(format!("{site_dim}^{num_sites} overflows")))?;
        if amplitudes.len() != want {
            return Err(Error::invalid(format!("expected {want} amplitudes, got {}", amplitudes.len())));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("amplitudes must be finite"));
        }
        Ok(Self { site_dim, num_sites, amplitudes })
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<c64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// CSV dump with columns `index,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "re", "im"])?;
        for (i, z) in self.amplitudes.iter().enumerate() {
            w.write_record([i.to_string(), z.re.to_string(), z.im.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc = 1usize;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

pub(crate) fn budget_check(what: &str, count: Option<usize>, budget: usize) -> Result<usize> {
    match count {
        Some(n) if n <= budget => Ok(n),
        Some(n) => Err(Error::Resource(format!("{what} needs {n} amplitudes, budget is {budget}"))),
        None => Err(Error::Resource(format!("{what} size overflows"))),
    }
}

/// Row-major `n x n` product `a b`.
fn small_mm(a: &[c64], b: &[c64], n: usize, out: &mut [c64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = c64::new(0.0, 0.0);
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = s;
        }
    }
}

/// Calls `f(index, G_{x_1} ... G_{x_L})` for every string in lexicographic
/// order. `slices[x]` are row-major `n x n` matrices. Prefix products are
/// cached so each step costs one matrix product per changed digit.
fn for_each_chain_product(slices: &[Vec<c64>], n: usize, len: usize, mut f: impl FnMut(usize, &[c64])) {
    let d = slices.len();
    if len == 0 {
        let mut id = vec![c64::new(0.0, 0.0); n * n];
        (0..n).for_each(|i| id[i * n + i] = c64::new(1.0, 0.0));
        f(0, &id);
        return;
    }
    let mut digits = vec![0usize; len];
    // prefix[k] = G_{x_1} ... G_{x_{k+1}}
    let mut prefix: Vec<Vec<c64>> = vec![vec![c64::new(0.0, 0.0); n * n]; len];
    let mut from = 0;
    let mut index = 0usize;
    loop {
        for k in from..len {
            if k == 0 {
                prefix[0].copy_from_slice(&slices[digits[0]]);
            } else {
                let (done, rest) = prefix.split_at_mut(k);
                small_mm(&done[k - 1], &slices[digits[k]], n, &mut rest[0]);
            }
        }
        f(index, &prefix[len - 1]);
        index += 1;
        // odometer
        let mut k = len;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < d {
                break;
            }
            digits[k] = 0;
        }
        from = k;
    }
}

fn row_major_slices(t: &MpsTensor) -> Vec<Vec<c64>> {
    let b2 = t.bond_dim() * t.bond_dim();
    t.entries().chunks(b2).map(|c| c.to_vec()).collect()
}

/// Ring contraction `amp(x_1..x_N) = Tr(G_{x_1} ... G_{x_N})` of arbitrary
/// square matrices indexed by a physical label.
pub(crate) fn ring_state(slices: &[Vec<c64>], n: usize, sites: usize, budget: usize) -> Result<Vec<c64>> {
    if sites == 0 {
        return Err(Error::invalid("need at least one site"));
    }
    let total = budget_check("ring state", checked_pow(slices.len(), sites), budget)?;
    let mut amps = vec![c64::new(0.0, 0.0); total];
    // Contract all but the last site, then close the trace against each slice.
    let d = slices.len();
    for_each_chain_product(slices, n, sites - 1, |idx, p| {
        for (x, g) in slices.iter().enumerate() {
            let mut tr = c64::new(0.0, 0.0);
            for i in 0..n {
                for k in 0..n {
                    tr += p[i * n + k] * g[k * n + i];
                }
            }
            amps[idx * d + x] = tr;
        }
    });
    Ok(amps)
}

pub fn mps_state(t: &MpsTensor, sites: usize) -> Result<StateVector> {
    mps_state_with_budget(t, sites, DEFAULT_BUDGET)
}

pub fn mps_state_with_budget(t: &MpsTensor, sites: usize, budget: usize) -> Result<StateVector> {
    let amps = ring_state(&row_major_slices(t), t.bond_dim(), sites, budget)?;
    StateVector::new(t.d(), sites, amps)
}

/// Column operators `A_x = sum_a (x)_i slice(x_i; a_{i-1}, a_i)` for a column
/// of `tensors.len()` sites, one tensor per row, vertical bonds periodic.
/// Each is `D^N x D^N` (row-major, site 0 most significant); `x` runs over
/// `d^N` strings in lexicographic order.
pub fn peps_column_operators(tensors: &[&PepsTensor]) -> Result<Vec<Vec<c64>>> {
    let n = tensors.len();
    if n == 0 {
        return Err(Error::invalid("a column needs at least one site"));
    }
    let d = tensors[0].d();
    let dd = tensors[0].bond_dim();
    if tensors.iter().any(|t| t.d() != d || t.bond_dim() != dd) {
        return Err(Error::invalid("column tensors must share d and D"));
    }
    let dim = budget_check("column operator", checked_pow(dd, n), DEFAULT_BUDGET)?;
    let count = budget_check("column operators", checked_pow(d, n).and_then(|c| c.checked_mul(dim * dim)), DEFAULT_BUDGET)?
        / (dim * dim);
    let mut out = Vec::with_capacity(count);
    let mut xs = vec![0usize; n];
    let mut bonds = vec![0usize; n];
    for xi in 0..count {
        let mut rem = xi;
        for i in (0..n).rev() {
            xs[i] = rem % d;
            rem /= d;
        }
        let mut a = vec![c64::new(0.0, 0.0); dim * dim];
        for bi in 0..dim {
            let mut rem = bi;
            for i in (0..n).rev() {
                bonds[i] = rem % dd;
                rem /= dd;
            }
            // site i: up bond b_{i-1}, down bond b_i (indices mod n)
            for row in 0..dim {
                for col in 0..dim {
                    let mut p = c64::new(1.0, 0.0);
                    let (mut rr, mut cc) = (row, col);
                    for i in (0..n).rev() {
                        let (l, r) = (rr % dd, cc % dd);
                        rr /= dd;
                        cc /= dd;
                        let up = bonds[(i + n - 1) % n];
                        p *= tensors[i].entry(xs[i], l, r, up, bonds[i]);
                    }
                    a[row * dim + col] += p;
                }
            }
        }
        out.push(a);
    }
    Ok(out)
}

/// Torus contraction. Columns are contracted into an MPS over column strings
/// whose bond is `D^N`; the ring of columns is then closed and the result is
/// permuted to row-major site order. No normalization factor is applied, so
/// the squared norm equals `Tr(T_N^N)`.
pub fn peps_state(t: &PepsTensor, n: usize) -> Result<StateVector> {
    peps_state_with_budget(t, n, DEFAULT_BUDGET)
}

pub fn peps_state_with_budget(t: &PepsTensor, n: usize, budget: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(Error::invalid("N must be positive"));
    }
    let d = t.d();
    let total = budget_check("torus state", checked_pow(d, n * n), budget)?;
    let cols = peps_column_operators(&vec![t; n])?;
    let bond = checked_pow(t.bond_dim(), n).unwrap();
    let chain = ring_state(&cols, bond, n, budget)?;
    let dn = cols.len();
    let mut amps = vec![c64::new(0.0, 0.0); total];
    for (ci, z) in chain.into_iter().enumerate() {
        // ci = sum_c X_c dn^{n-1-c},   X_c = sum_r x_{r,c} d^{n-1-r}
        let mut digits = vec![0usize; n * n];
        let mut rem = ci;
        for c in (0..n).rev() {
            let mut xc = rem % dn;
            rem /= dn;
            for r in (0..n).rev() {
                digits[r * n + c] = xc % d;
                xc /= d;
            }
        }
        let idx = digits.iter().fold(0usize, |acc, &x| acc * d + x);
        amps[idx] = z;
    }
    StateVector::new(d, n * n, amps)
}

/// A linear map from boundary legs to physical strings, with its singular
/// values and numerical rank.
#[derive(Debug, Clone)]
pub struct InjectivityMap {
    pub matrix: Mat<c64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

impl InjectivityMap {
    fn from_matrix(matrix: Mat<c64>) -> Result<Self> {
        let singular_values = singular_values(matrix.as_ref())?;
        let rank = numerical_rank(&singular_values, matrix.nrows(), matrix.ncols());
        Ok(Self { matrix, singular_values, rank })
    }

    /// Full column rank.
    pub fn is_injective(&self) -> bool {
        self.rank == self.matrix.ncols()
    }
}

/// `d^L x D^2` matrix of `(a_1, a_{L+1}) -> sum g_{x_1 a_1 a_2} ... g_{x_L a_L a_{L+1}}`;
/// column index is `a_1 * D + a_{L+1}`.
pub fn mps_injectivity_map(t: &MpsTensor, len: usize) -> Result<InjectivityMap> {
    InjectivityMap::from_matrix(mps_chain_matrix(t, len)?)
}

pub(crate) fn mps_chain_matrix(t: &MpsTensor, len: usize) -> Result<Mat<c64>> {
    if len == 0 {
        return Err(Error::invalid("L must be positive"));
    }
    let b2 = t.bond_dim() * t.bond_dim();
    let rows = budget_check("injectivity map", checked_pow(t.d(), len), DEFAULT_BUDGET)?;
    budget_check("injectivity map", rows.checked_mul(b2), DEFAULT_BUDGET)?;
    let mut m = Mat::<c64>::zeros(rows, b2);
    for_each_chain_product(&row_major_slices(t), t.bond_dim(), len, |idx, p| {
        for (c, z) in p.iter().enumerate() {
            m[(idx, c)] = *z;
        }
    });
    Ok(m)
}

/// Map of a `K x L` patch (K rows, L columns, open boundary) from its
/// `2(K+L)` boundary legs to `d^{KL}` physical strings.
///
/// Boundary legs are ordered: left legs of rows `0..K`, right legs of rows
/// `0..K`, top legs of columns `0..L`, bottom legs of columns `0..L`; the
/// first listed leg is the most significant digit.
pub fn peps_injectivity_map(t: &PepsTensor, k: usize, l: usize) -> Result<InjectivityMap> {
    InjectivityMap::from_matrix(peps_patch_matrix(t, k, l)?)
}

#[derive(Clone, Copy)]
enum Leg {
    Boundary(usize),
    Internal(usize),
}

pub(crate) fn peps_patch_matrix(t: &PepsTensor, k: usize, l: usize) -> Result<Mat<c64>> {
    if k == 0 || l == 0 {
        return Err(Error::invalid("K and L must be positive"));
    }
    let (d, dd) = (t.d(), t.bond_dim());
    let sites = k * l;
    let nb = 2 * (k + l);
    let n_h = k * (l - 1);
    let n_v = (k - 1) * l;
    let rows = budget_check("patch map", checked_pow(d, sites), DEFAULT_BUDGET)?;
    let cols = budget_check("patch map", checked_pow(dd, nb), DEFAULT_BUDGET)?;
    let internal = budget_check("patch map", checked_pow(dd, n_h + n_v), DEFAULT_BUDGET)?;
    budget_check("patch map", rows.checked_mul(cols).and_then(|x| x.checked_mul(internal)), 50 * DEFAULT_BUDGET)?;

    // legs[s] = (l, r, a, b) for site s = i*l + j
    let mut legs = Vec::with_capacity(sites);
    for i in 0..k {
        for j in 0..l {
            let left = if j == 0 { Leg::Boundary(i) } else { Leg::Internal(i * (l - 1) + j - 1) };
            let right = if j == l - 1 { Leg::Boundary(k + i) } else { Leg::Internal(i * (l - 1) + j) };
            let up = if i == 0 { Leg::Boundary(2 * k + j) } else { Leg::Internal(n_h + (i - 1) * l + j) };
            let down = if i == k - 1 { Leg::Boundary(2 * k + l + j) } else { Leg::Internal(n_h + i * l + j) };
            legs.push([left, right, up, down]);
        }
    }
    let digits = |mut v: usize, base: usize, len: usize| {
        let mut out = vec![0usize; len];
        for p in (0..len).rev() {
            out[p] = v % base;
            v /= base;
        }
        out
    };
    let mut m = Mat::<c64>::zeros(rows, cols);
    for row in 0..rows {
        let xs = digits(row, d, sites);
        for col in 0..cols {
            let bnd = digits(col, dd, nb);
            let mut acc = c64::new(0.0, 0.0);
            for iv in 0..internal {
                let inn = digits(iv, dd, n_h + n_v);
                let val = |leg: Leg| match leg {
                    Leg::Boundary(p) => bnd[p],
                    Leg::Internal(p) => inn[p],
                };
                let mut p = c64::new(1.0, 0.0);
                for (s, lg) in legs.iter().enumerate() {
                    p *= t.entry(xs[s], val(lg[0]), val(lg[1]), val(lg[2]), val(lg[3]));
                }
                acc += p;
            }
            m[(row, col)] = acc;
        }
    }
    Ok(m)
}

/// Blocked tensor of physical dimension `d^L` whose slices are the products
/// `G_{x_1} ... G_{x_L}`.
pub fn block_mps(t: &MpsTensor, len: usize) -> Result<MpsTensor> {
    let m = mps_chain_matrix(t, len)?;
    let b2 = t.bond_dim() * t.bond_dim();
    let mut e = Vec::with_capacity(m.nrows() * b2);
    for i in 0..m.nrows() {
        for c in 0..b2 {
            e.push(m[(i, c)]);
        }
    }
    MpsTensor::new(m.nrows(), t.bond_dim(), e)
}
