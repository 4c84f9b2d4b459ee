//! Connected two-point functions, computed by direct contraction of the
//! state and through transfer-operator traces, plus decay-rate fits.

use std::f64::consts::PI;

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rand_gauss::{complex_gaussian, SeedSpec};
use crate::spectral::{hermitian_eigenvalues, operator_norm};
use crate::tensors::StateVector;
use crate::transfer::TransferOperator;

/// Tr(T^N) below this modulus means the state is numerically zero.
pub const DEGENERATE_NORM: f64 = 1e-30;
/// Values at or below this fraction of the largest value are treated as zero
/// by the fit.
pub const FIT_FLOOR: f64 = 1e-12;

/// Hermitian observable stored as `(row, col, value)` triplets, so that
/// structured operators on large `d` stay cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub dim: usize,
    pub label: String,
    pub entries: Vec<(usize, usize, c64)>,
    /// Operator norm.
    pub norm: f64,
}

impl Observable {
    pub fn from_dense(label: impl Into<String>, a: MatRef<'_, c64>) -> Result<Self> {
        let ev = hermitian_eigenvalues(a)?;
        let n = a.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = if i == j { c64::new(a[(i, i)].re, 0.0) } else { (a[(i, j)] + a[(j, i)].conj()) * 0.5 };
                if v != c64::new(0.0, 0.0) {
                    entries.push((i, j, v));
                }
            }
        }
        let norm = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
        Ok(Self { dim: n, label: label.into(), entries, norm })
    }

    pub fn identity(dim: usize) -> Self {
        let entries = (0..dim).map(|i| (i, i, c64::new(1.0, 0.0))).collect();
        Self { dim, label: "id".into(), entries, norm: 1.0 }
    }

    /// `diag(cos(2 pi k j / d))` and `diag(sin(...))`: Hermitian parts of the
    /// `k`-th power of the clock matrix.
    pub fn clock(dim: usize, k: usize, sine: bool) -> Self {
        let f = |j: usize| {
            let t = 2.0 * PI * ((k * j) % dim) as f64 / dim as f64;
            if sine {
                t.sin()
            } else {
                t.cos()
            }
        };
        let entries: Vec<_> = (0..dim).map(|j| (j, j, c64::new(f(j), 0.0))).filter(|e| e.2.re != 0.0).collect();
        let norm = (0..dim).map(|j| f(j).abs()).fold(0.0, f64::max);
        let label = format!("clock{}-{k}", if sine { "-sin" } else { "-cos" });
        Self { dim, label, entries, norm }
    }

    /// `(X^k + X^-k)/2` or `(X^k - X^-k)/(2i)` for the cyclic shift `X`. Same
    /// spectrum as the clock counterpart.
    pub fn shift(dim: usize, k: usize, sine: bool) -> Self {
        let mut acc = std::collections::BTreeMap::<(usize, usize), c64>::new();
        // X e_j = e_{j+1}
        let (plus, minus) = if sine { (c64::new(0.0, -0.5), c64::new(0.0, 0.5)) } else { (c64::new(0.5, 0.0), c64::new(0.5, 0.0)) };
        for j in 0..dim {
            *acc.entry(((j + k) % dim, j)).or_default() += plus;
            *acc.entry(((j + dim - k % dim) % dim, j)).or_default() += minus;
        }
        let entries = acc.into_iter().filter(|(_, v)| v.norm() > 1e-15).map(|((i, j), v)| (i, j, v)).collect();
        let norm = Self::clock(dim, k, sine).norm;
        let label = format!("shift{}-{k}", if sine { "-sin" } else { "-cos" });
        Self { dim, label, entries, norm }
    }

    /// Random Hermitian observable with unit operator norm. Small dimensions
    /// get a dense GUE sample; larger ones a direct sum of random `2 x 2` GUE
    /// blocks on a random pairing of basis states.
    pub fn random(seed: &SeedSpec, dim: usize) -> Result<Self> {
        let mut rng = seed.rng();
        let label = format!("random-{}", seed.trial_index);
        if dim <= 64 {
            let g = Mat::from_fn(dim, dim, |_, _| complex_gaussian(&mut rng, 1.0));
            let h = Mat::from_fn(dim, dim, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5);
            let n = operator_norm(h.as_ref())?;
            let mut o = Self::from_dense(label, (h * faer::Scale(c64::new(1.0 / n, 0.0))).as_ref())?;
            o.norm = 1.0;
            return Ok(o);
        }
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..dim).collect();
        perm.shuffle(&mut rng);
        let mut entries = Vec::with_capacity(2 * dim);
        let mut norm = 0.0f64;
        for pair in perm.chunks(2) {
            if let [i, j] = *pair {
                let a = complex_gaussian(&mut rng, 1.0).re;
                let b = complex_gaussian(&mut rng, 1.0).re;
                let z = complex_gaussian(&mut rng, 1.0);
                // eigenvalues (a+b)/2 +- sqrt(((a-b)/2)^2 + |z|^2)
                let r = (((a - b) / 2.0).powi(2) + z.norm_sqr()).sqrt();
                norm = norm.max(((a + b) / 2.0).abs() + r);
                entries.extend([(i, i, c64::new(a, 0.0)), (j, j, c64::new(b, 0.0)), (i, j, z), (j, i, z.conj())]);
            } else {
                let a = complex_gaussian(&mut rng, 1.0).re;
                norm = norm.max(a.abs());
                entries.push((pair[0], pair[0], c64::new(a, 0.0)));
            }
        }
        entries.iter_mut().for_each(|e| e.2 /= norm);
        entries.sort_by_key(|e| (e.0, e.1));
        Ok(Self { dim, label, entries, norm: 1.0 })
    }

    /// Probe family: clock and shift cosines/sines for `k = 1, 2`, then
    /// `randoms` random observables.
    pub fn probe_family(seed: &SeedSpec, dim: usize, randoms: usize) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for k in 1..=2usize.min(dim.saturating_sub(1)) {
            for sine in [false, true] {
                for o in [Self::clock(dim, k, sine), Self::shift(dim, k, sine)] {
                    if o.norm > 1e-12 {
                        out.push(o);
                    }
                }
            }
        }
        for i in 0..randoms {
            out.push(Self::random(&seed.child(&format!("obs{i}")), dim)?);
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        let entries = self.entries.iter().map(|&(i, j, v)| (i, j, v * s)).collect();
        Self { dim: self.dim, label: self.label.clone(), entries, norm: self.norm * s.abs() }
    }
}

/// `A` applied on the listed sites (first listed = most significant digit of
/// the observable's index).
fn apply_local(state: &StateVector, a: &Observable, sites: &[usize], v: &[c64]) -> Result<Vec<c64>> {
    let d = state.site_dim();
    let n = state.num_sites();
    if sites.iter().any(|&s| s >= n) {
        return Err(Error::invalid("site index out of range"));
    }
    let mut seen = sites.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != sites.len() {
        return Err(Error::invalid("repeated site in support"));
    }
    if d.checked_pow(sites.len() as u32) != Some(a.dim) {
        return Err(Error::invalid(format!("observable of dimension {} does not act on {} sites", a.dim, sites.len())));
    }
    let stride = |s: usize| d.pow((n - 1 - s) as u32);
    let offset = |mut idx: usize| {
        let mut off = 0;
        for &s in sites.iter().rev() {
            off += (idx % d) * stride(s);
            idx /= d;
        }
        off
    };
    let local: Vec<usize> = (0..a.dim).map(offset).collect();
    let others: Vec<usize> = (0..n).filter(|s| !sites.contains(s)).map(stride).collect();
    let rest = d.pow(others.len() as u32);
    let mut out = vec![c64::new(0.0, 0.0); v.len()];
    for mut r in 0..rest {
        let mut base = 0;
        for &st in others.iter().rev() {
            base += (r % d) * st;
            r /= d;
        }
        for &(i, j, val) in &a.entries {
            out[base + local[i]] += val * v[base + local[j]];
        }
    }
    Ok(out)
}

fn braket(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|<A A'>/<1> - <A><A'>/<1>^2|` with unnormalized expectations in the state.
pub fn correlation_direct(
    state: &StateVector,
    a: &Observable,
    r: &[usize],
    a2: &Observable,
    r2: &[usize],
) -> Result<f64> {
    if r.iter().any(|s| r2.contains(s)) {
        return Err(Error::invalid("supports overlap"));
    }
    let psi = state.amplitudes();
    let one = braket(psi, psi).re;
    if one < DEGENERATE_NORM {
        return Err(Error::Degenerate("state has zero norm".into()));
    }
    let av = apply_local(state, a, r, psi)?;
    let a2v = apply_local(state, a2, r2, psi)?;
    // All three expectations are real for Hermitian, commuting A and A'.
    // Taking real parts of symmetric brackets makes the result exactly
    // symmetric in the two observables.
    let ea = braket(psi, &av).re;
    let ea2 = braket(psi, &a2v).re;
    let eaa = braket(&av, &a2v).re;
    Ok((eaa / one - ea * ea2 / (one * one)).abs())
}

/// `A~ = prefactor * sum_{x,y} A_{yx} K_x (x) conj(K_y)`: the transfer
/// operator with `A` inserted between ket and bra layers. `A = Id` gives
/// `T`. `A~` is not Hermitian; its realignment is, and as a map on
/// matrices it preserves Hermiticity.
pub fn boundary_operator(t: &TransferOperator, a: &Observable) -> Result<Mat<c64>> {
    let k = t.kraus();
    if a.dim != k.len() {
        return Err(Error::invalid(format!("observable has dimension {}, transfer operator has {} Kraus operators", a.dim, k.len())));
    }
    let n = t.space_dim();
    // realign(sum A_{yx} vec(K_x) vec(K_y)*) = realign(V A^T V*)
    let v = Mat::from_fn(n * n, k.len(), |ik, x| k[x][(ik / n, ik % n)]);
    let mut at_vs = Mat::<c64>::zeros(k.len(), n * n);
    // (A^T V*)[x, :] = sum_y A_{yx} conj(V[:, y])
    for &(y, x, val) in &a.entries {
        for c in 0..n * n {
            at_vs[(x, c)] += val * v[(c, y)].conj();
        }
    }
    let mut g = Mat::<c64>::zeros(n * n, n * n);
    matmul(g.as_mut(), Accum::Replace, v.as_ref(), at_vs.as_ref(), c64::new(t.prefactor(), 0.0), Par::Seq);
    Ok(Mat::from_fn(n * n, n * n, |ij, kl| {
        let (i, j, k2, l) = (ij / n, ij % n, kl / n, kl % n);
        g[(i * n + k2, j * n + l)]
    }))
}

fn mat_powers(m: MatRef<'_, c64>, max: usize) -> Vec<Mat<c64>> {
    let n = m.nrows();
    let mut out = vec![Mat::<c64>::identity(n, n)];
    for p in 1..=max {
        let mut q = Mat::<c64>::zeros(n, n);
        matmul(q.as_mut(), Accum::Replace, out[p - 1].as_ref(), m, c64::new(1.0, 0.0), Par::Seq);
        out.push(q);
    }
    out
}

fn trace_of_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let n = a.nrows();
    let mut s = c64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// `gamma(k)` for `k = 0..=N-2` from traces:
/// `|Tr(A~ T^k A~' T^{N-k-2})/Tr(T^N) - Tr(A~ T^{N-1}) Tr(A~' T^{N-1})/Tr(T^N)^2|`.
pub fn correlation_profile_transfer(
    t: MatRef<'_, c64>,
    at: MatRef<'_, c64>,
    at2: MatRef<'_, c64>,
    n: usize,
) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("need N >= 2"));
    }
    let pw = mat_powers(t, n);
    let z = (0..t.nrows()).map(|i| pw[n][(i, i)]).sum::<c64>();
    if z.norm() < DEGENERATE_NORM {
        return Err(Error::Degenerate(format!("Tr(T^N) = {z}")));
    }
    let ea = trace_of_product(at, pw[n - 1].as_ref());
    let ea2 = trace_of_product(at2, pw[n - 1].as_ref());
    let disc = ea * ea2 / (z * z);
    (0..=n - 2)
        .map(|k| {
            let left = at * &pw[k];
            let right = at2 * &pw[n - k - 2];
            Ok((trace_of_product(left.as_ref(), right.as_ref()) / z - disc).norm())
        })
        .collect()
}

pub fn correlation_transfer(
    t: MatRef<'_, c64>,
    at: MatRef<'_, c64>,
    at2: MatRef<'_, c64>,
    k: usize,
    n: usize,
) -> Result<f64> {
    if n < 2 || k > n - 2 {
        return Err(Error::invalid(format!("need 0 <= k <= N-2, got k={k}, N={n}")));
    }
    Ok(correlation_profile_transfer(t, at, at2, n)?[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryBound {
    pub value: f64,
    /// Whether `k <= k'` and `log(n)/log(1/eps) - 2 <= k'` hold.
    pub applicable: bool,
}

/// `10 eps^k |A| |A'| / (|lambda|^2 (1 - eps^k)^2)`.
pub fn corollary_bound(
    lambda_modulus: f64,
    eps: f64,
    k: usize,
    k2: usize,
    norm_a: f64,
    norm_a2: f64,
    n: usize,
) -> Result<CorollaryBound> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(lambda_modulus > 0.0) {
        return Err(Error::invalid("lambda must be nonzero"));
    }
    let ek = eps.powi(k as i32);
    let value = 10.0 * ek * norm_a * norm_a2 / (lambda_modulus * lambda_modulus * (1.0 - ek).powi(2));
    let applicable = k <= k2 && (n as f64).ln() / (1.0 / eps).ln() - 2.0 <= k2 as f64;
    Ok(CorollaryBound { value, applicable })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Decay rate per site, `-slope` of `ln gamma(k)`.
    pub rate: f64,
    /// `1/rate`; `None` stands for infinity (no decay).
    pub length: Option<f64>,
    /// Inclusive window `[first, last]` of separations used.
    pub window: (usize, usize),
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
}

/// Default window: from 1 to the largest `k` with `gamma(k) > 1e-12 gamma(0)`,
/// additionally capped at `cap` when given.
pub fn default_window(values: &[f64], cap: Option<usize>) -> (usize, usize) {
    let g0 = values.first().copied().unwrap_or(0.0);
    let mut last = values.iter().rposition(|&g| g > FIT_FLOOR * g0).unwrap_or(0);
    if let Some(c) = cap {
        last = last.min(c);
    }
    (1.min(last), last)
}

/// Least-squares slope of `ln gamma(k)` against `k` over the window.
pub fn correlation_length_fit(values: &[f64], window: (usize, usize)) -> Result<DecayFit> {
    let (a, b) = window;
    if b >= values.len() || a > b {
        return Err(Error::invalid(format!("window {a}..={b} outside {} values", values.len())));
    }
    let floor = FIT_FLOOR * values.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = (a..=b)
        .filter(|&k| values[k] > floor && values[k] > 0.0)
        .map(|k| (k as f64, values[k].ln()))
        .collect();
    if pts.is_empty() {
        return Err(Error::numerical("all correlation values are below the fit floor", 0.0));
    }
    if pts.len() < 3 {
        return Err(Error::invalid(format!("need at least 3 points above the floor, have {}", pts.len())));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / m).sqrt();
    let rate = if slope.abs() < 1e-14 { 0.0 } else { -slope };
    let length = if rate > 0.0 { Some(1.0 / rate) } else { None };
    Ok(DecayFit { rate, length, window, residual })
}
