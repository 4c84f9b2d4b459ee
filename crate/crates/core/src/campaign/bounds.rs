//! Closed-form bound expressions with their stated constants. Bounds whose
//! constants are unspecified come back with `value: None` and their scaling
//! exponents in `inputs`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// `P(quantity beyond value) <= probability_bound`.
    Probability,
    /// A bound on an expectation.
    Expectation,
    /// Only the scaling is known.
    Structural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub kind: BoundKind,
    pub statement: String,
    /// `None` when the expression involves an unspecified constant.
    pub value: Option<f64>,
    /// Failure probability clamped to `[0, 1]`; `None` when not computable.
    pub probability_bound: Option<f64>,
    /// Probability expression at least 1, or gap expression at most 0.
    pub vacuous: bool,
    pub formula_inputs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub d: Option<usize>,
    #[serde(rename = "D")]
    pub bond_dim: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub eps: Option<f64>,
    /// Wishart size `n` and parameter `s`.
    pub wishart_n: Option<usize>,
    pub wishart_s: Option<usize>,
}

pub const BOUND_NAMES: &[&str] = &[
    "gap-mps",
    "mps-cp",
    "mps-1",
    "mps-2",
    "trace-t",
    "wishart",
    "sigma",
    "peps-cp",
    "peps-1",
    "peps-2",
    "gap-peps",
    "eta",
    "gap-h",
    "gap-h-peps",
];

fn need<T: Copy>(v: Option<T>, name: &str, bound: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(format!("bound {bound} needs parameter {name}")))
}

struct Builder {
    r: BoundReport,
}

impl Builder {
    fn new(name: &str, kind: BoundKind, statement: &str) -> Self {
        Self {
            r: BoundReport {
                bound_name: name.into(),
                kind,
                statement: statement.into(),
                value: None,
                probability_bound: None,
                vacuous: false,
                formula_inputs: BTreeMap::new(),
            },
        }
    }

    fn input(mut self, k: &str, v: f64) -> Self {
        self.r.formula_inputs.insert(k.into(), v);
        self
    }

    fn value(mut self, v: f64) -> Self {
        self.r.value = Some(v);
        self
    }

    /// Lower bound on a gap or spectrum: vacuous when not positive.
    fn lower_value(mut self, v: f64) -> Self {
        self.r.value = Some(v);
        self.r.vacuous |= v <= 0.0;
        self
    }

    fn probability(mut self, p: f64) -> Self {
        self.r.vacuous |= !(p < 1.0);
        self.r.probability_bound = Some(p.clamp(0.0, 1.0));
        self.r.formula_inputs.insert("raw_probability".into(), p);
        self
    }

    /// Probability with an unspecified constant: treated as vacuous.
    fn unknown_probability(mut self) -> Self {
        self.r.vacuous = true;
        self
    }

    fn done(self) -> BoundReport {
        self.r
    }
}

/// Evaluate a named bound.
pub fn paper_bounds(name: &str, p: &BoundParams) -> Result<BoundReport> {
    let df = |p: &BoundParams, b: &str| need(p.d, "d", b).map(|d| d as f64);
    let bf = |p: &BoundParams, b: &str| need(p.bond_dim, "D", b).map(|d| d as f64);
    let nf = |p: &BoundParams, b: &str| need(p.n, "N", b).map(|d| d as f64);
    let r = match name {
        "gap-mps" => {
            let (d, dd) = (df(p, name)?, bf(p, name)?);
            Builder::new(name, BoundKind::Probability, "Delta(T) >= 1 - 95/sqrt(d) with probability >= 1 - 10 exp(-D/72)")
                .input("d", d)
                .input("D", dd)
                .lower_value(1.0 - 95.0 / d.sqrt())
                .probability(10.0 * (-dd / 72.0).exp())
                .done()
        }
        "mps-cp" => {
            let (d, dd) = (df(p, name)?, bf(p, name)?);
            Builder::new(name, BoundKind::Probability, "|T(Id) - Id| <= 6/sqrt(d) with probability >= 1 - 2 exp(-D/4)")
                .input("d", d)
                .input("D", dd)
                .value(6.0 / d.sqrt())
                .probability(2.0 * (-dd / 4.0).exp())
                .done()
        }
        "mps-1" => Builder::new(name, BoundKind::Expectation, "E <psi|T|psi> = 1").value(1.0).done(),
        "mps-2" => {
            let d = df(p, name)?;
            Builder::new(name, BoundKind::Expectation, "E |T(Id - psi psi*)| <= 40/sqrt(d)")
                .input("d", d)
                .value(40.0 / d.sqrt())
                .done()
        }
        "trace-t" => {
            let d = df(p, name)?;
            let eps = need(p.eps, "eps", name)?;
            if !(eps > 0.0) {
                return Err(Error::invalid("trace-t needs eps > 0"));
            }
            Builder::new(name, BoundKind::Probability, "Tr(T) <= (1 + eps)^2 with probability >= 1 - exp(-d eps^2)")
                .input("d", d)
                .input("eps", eps)
                .value((1.0 + eps).powi(2))
                .probability((-d * eps * eps).exp())
                .done()
        }
        "wishart" => {
            let n = need(p.wishart_n, "wishart_n", name)? as f64;
            let s = need(p.wishart_s, "wishart_s", name)? as f64;
            Builder::new(name, BoundKind::Probability, "|W/s - Id| <= 6 sqrt(n/s) with probability >= 1 - 2 exp(-n/4)")
                .input("n", n)
                .input("s", s)
                .value(6.0 * (n / s).sqrt())
                .probability(2.0 * (-n / 4.0).exp())
                .done()
        }
        "sigma" => {
            // D x D Wishart of parameter dD, rescaled.
            let (d, dd) = (df(p, name)?, bf(p, name)?);
            Builder::new(name, BoundKind::Probability, "|Sigma - Id| <= 6/sqrt(d) with probability >= 1 - 2 exp(-D/4)")
                .input("d", d)
                .input("D", dd)
                .value(6.0 / d.sqrt())
                .probability(2.0 * (-dd / 4.0).exp())
                .done()
        }
        "peps-cp" => {
            let (d, dd, n) = (df(p, name)?, bf(p, name)?, nf(p, name)?);
            let dev = (1.0 + 28.0 * dd / d.sqrt()).powf(n) * 28.0 / d.sqrt();
            Builder::new(
                name,
                BoundKind::Probability,
                "T_N(Id) >= (1 - (1 + 28D/sqrt(d))^N 28/sqrt(d)) Id with probability >= 1 - (D+1)^{2N} (N+2) exp(-cD)",
            )
            .input("d", d)
            .input("D", dd)
            .input("N", n)
            .input("deviation", dev)
            .lower_value(1.0 - dev)
            .unknown_probability()
            .done()
        }
        "peps-1" => {
            let (d, dd, n) = (df(p, name)?, bf(p, name)?, nf(p, name)?);
            let v = 42.0 * n / d.sqrt() + dd * dd * (84.0 / d.sqrt()).powf(n);
            Builder::new(
                name,
                BoundKind::Probability,
                "|<psi|T_N|psi> - 1| <= 42N/sqrt(d) + D^2 (84/sqrt(d))^N with probability >= 1 - 6 exp(-D^3/72)",
            )
            .input("d", d)
            .input("D", dd)
            .input("N", n)
            .value(v)
            .probability(6.0 * (-dd.powi(3) / 72.0).exp())
            .done()
        }
        "peps-2" => {
            let (d, dd, n) = (df(p, name)?, bf(p, name)?, nf(p, name)?);
            let at_eta0 = (1.0 + 93.0 * dd / d.sqrt()).powf(n) * 60.0 * n / d.sqrt();
            Builder::new(
                name,
                BoundKind::Probability,
                "|T_N(Id - psi psi*)| <= (1 + eta)(1 + 93D/sqrt(d))^N 60N/sqrt(d), eta with an unspecified constant",
            )
            .input("d", d)
            .input("D", dd)
            .input("N", n)
            .input("value_at_eta_zero", at_eta0)
            .unknown_probability()
            .done()
        }
        "gap-peps" => {
            let (d, dd, n) = (df(p, name)?, bf(p, name)?, nf(p, name)?);
            let s = d.sqrt();
            let at_eta0 = 1.0
                - 2.0 * (1.0 + 28.0 * dd / s).powf(n) * 28.0 / s
                - 42.0 * n / s
                - dd * dd * (84.0 / s).powf(n)
                - 3.0 * (1.0 + 93.0 * dd / s).powf(n) * 60.0 * n / s;
            let mut b = Builder::new(
                name,
                BoundKind::Probability,
                "Delta(T_N) >= 1 - 2(1+28D/sqrt(d))^N 28/sqrt(d) - 42N/sqrt(d) - D^2 (84/sqrt(d))^N - 3(1+eta)(1+93D/sqrt(d))^N 60N/sqrt(d)",
            )
            .input("d", d)
            .input("D", dd)
            .input("N", n)
            // eta >= 0, so this is an upper bound on the bound itself.
            .input("value_at_eta_zero", at_eta0)
            .unknown_probability();
            if n > 1.0 {
                b = b.input("alpha", d.ln() / n.ln()).input("beta", dd.ln() / n.ln());
            }
            b.r.vacuous |= at_eta0 <= 0.0;
            b.done()
        }
        "eta" => {
            let (d, dd, n) = (df(p, name)?, bf(p, name)?, nf(p, name)?);
            let prefactor = (4.0 * d.sqrt() * n).powf(2.0 * (n + 1.0)) * (1.0 + 41.0 / d.sqrt()).powf(n - 1.0) * 20.0 * n / d.sqrt();
            Builder::new(name, BoundKind::Structural, "eta = (4 sqrt(d) N)^{2(N+1)} (1 + 41/sqrt(d))^{N-1} 20N/sqrt(d) exp(-c D^3/d)")
                .input("d", d)
                .input("D", dd)
                .input("N", n)
                .input("prefactor", prefactor)
                .input("exponent_D3_over_d", dd.powi(3) / d)
                .unknown_probability()
                .done()
        }
        "gap-h" => {
            let (d, dd) = (df(p, name)?, bf(p, name)?);
            let mut b = Builder::new(name, BoundKind::Structural, "Delta(H) >= 1 - C/D^{tau-5} for d >= D^{2 tau}, tau > 5")
                .input("d", d)
                .input("D", dd)
                .unknown_probability();
            if dd > 1.0 {
                let tau = d.ln() / (2.0 * dd.ln());
                b = b.input("tau", tau).input("exponent", tau - 5.0);
            }
            b.done()
        }
        "gap-h-peps" => {
            let (d, dd) = (df(p, name)?, bf(p, name)?);
            let mut b = Builder::new(name, BoundKind::Structural, "Delta(H) >= 1 - C/D^{2 tau-13} for d >= D^{4 tau}, tau > 13/2")
                .input("d", d)
                .input("D", dd)
                .unknown_probability();
            if dd > 1.0 {
                let tau = d.ln() / (4.0 * dd.ln());
                b = b.input("tau", tau).input("exponent", 2.0 * tau - 13.0);
            }
            b.done()
        }
        other => return Err(Error::invalid(format!("unknown bound {other:?}; known: {}", BOUND_NAMES.join(", ")))),
    };
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mps(d: usize, dd: usize) -> BoundParams {
        BoundParams { d: Some(d), bond_dim: Some(dd), ..Default::default() }
    }

    #[test]
    fn gap_mps_values() {
        let b = paper_bounds("gap-mps", &mps(40000, 8)).unwrap();
        assert!((b.value.unwrap() - 0.525).abs() < 1e-15);
        assert!(b.vacuous, "10 exp(-8/72) > 1");
        let b = paper_bounds("gap-mps", &mps(1 << 60, 400)).unwrap();
        assert!(b.value.unwrap() > 1.0 - 1e-6);
        assert!(!b.vacuous);
    }

    #[test]
    fn wishart_values() {
        let p = BoundParams { wishart_n: Some(4), wishart_s: Some(400), ..Default::default() };
        let b = paper_bounds("wishart", &p).unwrap();
        assert!((b.value.unwrap() - 0.6).abs() < 1e-15);
        assert!((b.probability_bound.unwrap() - 0.7357588823428847).abs() < 1e-12);
        assert!(!b.vacuous);
        let p = BoundParams { wishart_n: Some(1), wishart_s: Some(400), ..Default::default() };
        let b = paper_bounds("wishart", &p).unwrap();
        assert!(b.vacuous);
        assert_eq!(b.probability_bound, Some(1.0));
    }

    #[test]
    fn structural_bounds_have_no_value() {
        let p = BoundParams { d: Some(17), bond_dim: Some(2), n: Some(2), ..Default::default() };
        for name in ["gap-peps", "peps-2", "eta", "gap-h", "gap-h-peps"] {
            let b = paper_bounds(name, &p).unwrap();
            assert_eq!(b.value, None, "{name}");
        }
        let b = paper_bounds("peps-cp", &p).unwrap();
        assert!(b.vacuous && b.value.unwrap() < 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(paper_bounds("nope", &mps(4, 2)), Err(Error::InvalidParameter(_))));
        assert!(matches!(paper_bounds("peps-cp", &mps(4, 2)), Err(Error::InvalidParameter(_))));
        for name in BOUND_NAMES {
            let p = BoundParams {
                d: Some(100),
                bond_dim: Some(4),
                n: Some(3),
                eps: Some(0.1),
                wishart_n: Some(16),
                wishart_s: Some(1600),
            };
            let b = paper_bounds(name, &p).unwrap();
            if let Some(pb) = b.probability_bound {
                assert!((0.0..=1.0).contains(&pb));
            }
        }
    }
}
