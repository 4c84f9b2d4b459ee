//! Seeded complex Gaussian sampling.
//!
//! Every random object in the crate is drawn from a [`SeedSpec`], which hashes
//! `(master_seed, trial_index, stream_label)` into a ChaCha20 key. Streams are
//! therefore independent of scheduling order and of each other.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub trial_index: u64,
    pub stream_label: String,
}

impl SeedSpec {
    pub fn new(master_seed: u64, trial_index: u64, stream_label: impl Into<String>) -> Self {
        Self { master_seed, trial_index, stream_label: stream_label.into() }
    }

    /// A sub-stream whose label extends this one, e.g. `"mps"` -> `"mps/obs"`.
    pub fn child(&self, suffix: &str) -> Self {
        Self {
            master_seed: self.master_seed,
            trial_index: self.trial_index,
            stream_label: format!("{}/{}", self.stream_label, suffix),
        }
    }

    /// SHA-256 of the little-endian seed, trial index, label length and label.
    /// The length prefix keeps `("a", "b/c")`-style labels from colliding.
    pub fn derived_key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.master_seed.to_le_bytes());
        h.update(self.trial_index.to_le_bytes());
        h.update((self.stream_label.len() as u64).to_le_bytes());
        h.update(self.stream_label.as_bytes());
        h.finalize().into()
    }

    /// First eight bytes of the derived key, for reporting in CSV rows.
    pub fn derived_seed(&self) -> u64 {
        let k = self.derived_key();
        u64::from_le_bytes(k[..8].try_into().unwrap())
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.derived_key())
    }
}

/// One complex Gaussian with `E|g|^2 = variance`, via Box-Muller in polar form:
/// `|g|^2 / variance` is exactly Exp(1) and the phase is uniform.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> c64 {
    // 1 - U lies in (0, 1], so the logarithm is finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-u1.ln() * variance).sqrt();
    let theta = std::f64::consts::TAU * u2;
    c64::new(r * theta.cos(), r * theta.sin())
}

/// `n` i.i.d. draws, in stream order.
pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> Vec<c64> {
    (0..n).map(|_| complex_gaussian(rng, variance)).collect()
}

fn check_variance(variance: f64) -> Result<()> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::invalid(format!("variance must be finite and >= 0, got {variance}")));
    }
    Ok(())
}

/// Entrywise i.i.d. complex Gaussian matrix, filled in row-major order.
pub fn sample_complex_gaussian_matrix(
    seed: &SeedSpec,
    rows: usize,
    cols: usize,
    variance: f64,
) -> Result<Mat<c64>> {
    check_variance(variance)?;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("matrix dimensions must be positive"));
    }
    let v = complex_gaussian_vec(&mut seed.rng(), rows * cols, variance);
    Ok(Mat::from_fn(rows, cols, |i, j| v[i * cols + j]))
}

/// Random MPS site tensor `chi[x, l, r]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsTensor {
    d: usize,
    bond_dim: usize,
    entries: Vec<c64>,
}

impl MpsTensor {
    pub fn new(d: usize, bond_dim: usize, entries: Vec<c64>) -> Result<Self> {
        if d == 0 || bond_dim == 0 {
            return Err(Error::invalid("d and D must be positive"));
        }
        if entries.len() != d * bond_dim * bond_dim {
            return Err(Error::invalid(format!(
                "expected {} entries for d={d}, D={bond_dim}, got {}",
                d * bond_dim * bond_dim,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("tensor entries must be finite"));
        }
        Ok(Self { d, bond_dim, entries })
    }

    pub fn from_fn(d: usize, bond_dim: usize, f: impl Fn(usize, usize, usize) -> c64) -> Result<Self> {
        let mut e = Vec::with_capacity(d * bond_dim * bond_dim);
        for x in 0..d {
            for l in 0..bond_dim {
                for r in 0..bond_dim {
                    e.push(f(x, l, r));
                }
            }
        }
        Self::new(d, bond_dim, e)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn entries(&self) -> &[c64] {
        &self.entries
    }

    pub fn entry(&self, x: usize, l: usize, r: usize) -> c64 {
        let dd = self.bond_dim;
        self.entries[(x * dd + l) * dd + r]
    }

    /// The D x D matrix `(l, r) -> chi[x, l, r]`.
    pub fn slice(&self, x: usize) -> Mat<c64> {
        Mat::from_fn(self.bond_dim, self.bond_dim, |l, r| self.entry(x, l, r))
    }

    pub fn slices(&self) -> Vec<Mat<c64>> {
        (0..self.d).map(|x| self.slice(x)).collect()
    }

    /// The d x D^2 matrix with row `x` and column `l*D + r`.
    pub fn site_map(&self) -> Mat<c64> {
        let b2 = self.bond_dim * self.bond_dim;
        Mat::from_fn(self.d, b2, |x, c| self.entries[x * b2 + c])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: c64) -> Self {
        Self { d: self.d, bond_dim: self.bond_dim, entries: self.entries.iter().map(|z| z * s).collect() }
    }
}

/// Random PEPS site tensor `chi[x, l, r, a, b]`: `l, r` are the horizontal
/// legs, `a` the bond shared with the site above and `b` with the site below.
#[derive(Debug, Clone, PartialEq)]
pub struct PepsTensor {
    d: usize,
    bond_dim: usize,
    entries: Vec<c64>,
}

impl PepsTensor {
    pub fn new(d: usize, bond_dim: usize, entries: Vec<c64>) -> Result<Self> {
        if d == 0 || bond_dim == 0 {
            return Err(Error::invalid("d and D must be positive"));
        }
        let want = d * bond_dim.pow(4);
        if entries.len() != want {
            return Err(Error::invalid(format!("expected {want} entries, got {}", entries.len())));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("tensor entries must be finite"));
        }
        Ok(Self { d, bond_dim, entries })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn entries(&self) -> &[c64] {
        &self.entries
    }

    pub fn entry(&self, x: usize, l: usize, r: usize, a: usize, b: usize) -> c64 {
        let dd = self.bond_dim;
        self.entries[(((x * dd + l) * dd + r) * dd + a) * dd + b]
    }

    /// Horizontal slice `(l, r) -> chi[x, l, r, a, b]` for fixed vertical legs.
    pub fn slice(&self, x: usize, a: usize, b: usize) -> Mat<c64> {
        Mat::from_fn(self.bond_dim, self.bond_dim, |l, r| self.entry(x, l, r, a, b))
    }

    /// The d x D^4 matrix with row `x` and column `((l*D + r)*D + a)*D + b`.
    pub fn site_map(&self) -> Mat<c64> {
        let b4 = self.bond_dim.pow(4);
        Mat::from_fn(self.d, b4, |x, c| self.entries[x * b4 + c])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Entries i.i.d. with variance `1/(dD)`.
pub fn sample_mps_tensor(seed: &SeedSpec, d: usize, bond_dim: usize) -> Result<MpsTensor> {
    if d == 0 || bond_dim == 0 {
        return Err(Error::invalid("d and D must be positive"));
    }
    let var = 1.0 / (d * bond_dim) as f64;
    let e = complex_gaussian_vec(&mut seed.rng(), d * bond_dim * bond_dim, var);
    MpsTensor::new(d, bond_dim, e)
}

/// Entries i.i.d. with variance `1/(dD^2)`.
pub fn sample_peps_tensor(seed: &SeedSpec, d: usize, bond_dim: usize) -> Result<PepsTensor> {
    if d == 0 || bond_dim == 0 {
        return Err(Error::invalid("d and D must be positive"));
    }
    let var = 1.0 / (d * bond_dim * bond_dim) as f64;
    let e = complex_gaussian_vec(&mut seed.rng(), d * bond_dim.pow(4), var);
    PepsTensor::new(d, bond_dim, e)
}
