//! Summary statistics and pass/fail checks for a finished campaign.

use std::collections::BTreeMap;

use serde::Serialize;

use super::bounds::{paper_bounds, BoundParams, BoundReport};
use super::{Experiment, ExperimentConfig, Point, SweepParam, Tolerances, TrialRecord};
use crate::error::Result;

pub const SCHEMA_VERSION: &str = "1.0";

/// Added to the binomial standard-error allowance of frequency checks.
const FREQUENCY_SLACK: f64 = 0.01;
/// Exact identities are checked to this accuracy.
const IDENTITY_TOL: f64 = 1e-10;
const SLOPE_TARGET: f64 = -0.5;
const SLOPE_TOL: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub q05: Option<f64>,
    pub q95: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        if v.is_empty() {
            return Stats { count: 0, mean: None, median: None, min: None, max: None, q05: None, q95: None };
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Stats {
            count: v.len(),
            mean: Some(mean),
            median: Some(quantile(&v, 0.5)),
            min: Some(v[0]),
            max: Some(v[v.len() - 1]),
            q05: Some(quantile(&v, 0.05)),
            q95: Some(quantile(&v, 0.95)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// Empirical violation frequency against a probability bound.
    Frequency,
    /// The probability is vacuous or unknown: every trial must satisfy the value.
    ValueOnly,
    Mean,
    /// An exact or deterministic property of every trial.
    Property,
    Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub kind: CheckKind,
    pub status: CheckStatus,
    pub detail: String,
    /// Frequency, mean, worst value or slope, depending on `kind`.
    pub observed: Option<f64>,
    pub allowed: Option<f64>,
    pub violations: Option<usize>,
    pub n: usize,
}

impl CheckResult {
    fn skipped(name: &str, kind: CheckKind, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            kind,
            status: CheckStatus::Skipped,
            detail: detail.into(),
            observed: None,
            allowed: None,
            violations: None,
            n: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

fn status(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Every value satisfies `ok`. The worst value by `score` is reported.
fn property(name: &str, detail: &str, values: &[f64], ok: impl Fn(f64) -> bool, worst_high: bool) -> CheckResult {
    if values.is_empty() {
        return CheckResult::skipped(name, CheckKind::Property, "no values");
    }
    let bad = values.iter().filter(|&&v| !ok(v)).count();
    let worst = if worst_high {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    CheckResult {
        name: name.into(),
        kind: CheckKind::Property,
        status: status(bad == 0),
        detail: detail.into(),
        observed: Some(worst),
        allowed: None,
        violations: Some(bad),
        n: values.len(),
    }
}

fn at_most(name: &str, values: &[f64], limit: f64) -> CheckResult {
    let mut c = property(name, &format!("every trial <= {limit:e}"), values, |v| v <= limit, true);
    c.allowed = Some(limit);
    c
}

fn at_least(name: &str, values: &[f64], limit: f64) -> CheckResult {
    let mut c = property(name, &format!("every trial >= {limit:e}"), values, |v| v >= limit, false);
    c.allowed = Some(limit);
    c
}

fn mean_at_most(name: &str, values: &[f64], limit: f64) -> CheckResult {
    let s = Stats::of(values);
    let Some(mean) = s.mean else { return CheckResult::skipped(name, CheckKind::Mean, "no values") };
    CheckResult {
        name: name.into(),
        kind: CheckKind::Mean,
        status: status(mean <= limit),
        detail: format!("mean <= {limit}"),
        observed: Some(mean),
        allowed: Some(limit),
        violations: None,
        n: s.count,
    }
}

fn mean_near(name: &str, values: &[f64], center: f64, tol: f64) -> CheckResult {
    let s = Stats::of(values);
    let Some(mean) = s.mean else { return CheckResult::skipped(name, CheckKind::Mean, "no values") };
    CheckResult {
        name: name.into(),
        kind: CheckKind::Mean,
        status: status((mean - center).abs() <= tol),
        detail: format!("|mean - {center}| <= {tol}"),
        observed: Some(mean),
        allowed: Some(tol),
        violations: None,
        n: s.count,
    }
}

/// Compare a bound against per-trial values. `upper` means the quantity
/// should stay below the bound value.
///
/// With a usable probability the empirical violation frequency must not
/// exceed it by more than two binomial standard errors plus a fixed slack.
/// With a vacuous or unknown probability every trial must satisfy the value.
pub fn frequency_check(name: &str, bound: &BoundReport, values: &[f64], upper: bool) -> CheckResult {
    let Some(limit) = bound.value else {
        return CheckResult::skipped(name, CheckKind::Frequency, "bound has no numeric value");
    };
    if !upper && limit <= 0.0 {
        return CheckResult::skipped(name, CheckKind::ValueOnly, "vacuous: lower bound not positive");
    }
    if values.is_empty() {
        return CheckResult::skipped(name, CheckKind::Frequency, "no values");
    }
    let beyond = |v: f64| if upper { v > limit } else { v < limit };
    let bad = values.iter().filter(|&&v| beyond(v)).count();
    let n = values.len();
    match bound.probability_bound.filter(|_| !bound.vacuous) {
        Some(p) => {
            let freq = bad as f64 / n as f64;
            let allowed = p + 2.0 * (freq * (1.0 - freq) / n as f64).sqrt() + FREQUENCY_SLACK;
            CheckResult {
                name: name.into(),
                kind: CheckKind::Frequency,
                status: status(freq <= allowed),
                detail: format!("P({} {limit}) <= {p}", if upper { ">" } else { "<" }),
                observed: Some(freq),
                allowed: Some(allowed),
                violations: Some(bad),
                n,
            }
        }
        None => CheckResult {
            name: name.into(),
            kind: CheckKind::ValueOnly,
            status: status(bad == 0),
            detail: format!("probability vacuous; every trial {} {limit}", if upper { "<=" } else { ">=" }),
            observed: Some(bad as f64 / n as f64),
            allowed: Some(0.0),
            violations: Some(bad),
            n,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub point: Point,
    pub trials: usize,
    pub flagged: usize,
    pub flags: BTreeMap<String, usize>,
    pub stats: BTreeMap<String, Stats>,
    pub bounds: Vec<BoundReport>,
    pub checks: Vec<CheckResult>,
}

impl PointSummary {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn median(&self, column: &str) -> Option<f64> {
        self.stats.get(column).and_then(|s| s.median)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema_version: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub points: Vec<PointSummary>,
    pub trends: Vec<CheckResult>,
    pub trials_total: usize,
    pub flagged: usize,
    /// More than half of the trials were flagged.
    pub campaign_failed: bool,
    /// Every flag is a resource-limit error.
    pub resource_limited: bool,
    pub all_checks_passed: bool,
    pub wall_time_ms: f64,
}

impl Summary {
    pub fn trend(&self, name: &str) -> Option<&CheckResult> {
        self.trends.iter().find(|c| c.name == name)
    }
}

fn bound_params(p: &Point, tol: &Tolerances) -> BoundParams {
    BoundParams {
        d: Some(p.d),
        bond_dim: Some(p.bond_dim),
        n: p.n,
        eps: Some(tol.eps()),
        wishart_n: Some(p.bond_dim * p.bond_dim),
        wishart_s: Some(p.d),
    }
}

fn bound_names(exp: Experiment) -> &'static [&'static str] {
    match exp {
        Experiment::MpsGap => &["gap-mps", "mps-cp", "mps-1", "mps-2"],
        Experiment::OverlapCheck => &["mps-1"],
        Experiment::TraceCheck => &["trace-t"],
        Experiment::WishartCheck => &["wishart"],
        Experiment::PepsGap | Experiment::PepsGapIndependent => &["peps-cp", "peps-1", "peps-2", "gap-peps", "eta"],
        Experiment::PepsCpCheck => &["peps-cp"],
        Experiment::ParentGapMps => &["gap-h"],
        Experiment::ParentGapPeps => &["gap-h-peps"],
        Experiment::Correlations => &[],
        Experiment::Expander => &["sigma"],
    }
}

/// The positive-map lower bound on `lambda_min T(Id)`. When the bound is
/// vacuous the weaker floor from the tolerances is checked instead.
fn cp_check(bound: &BoundReport, lambda_min: &[f64], tol: &Tolerances) -> CheckResult {
    let v = bound.value.unwrap_or(f64::NAN);
    if v > 0.0 {
        frequency_check("peps-cp", bound, lambda_min, false)
    } else {
        let floor = tol.get("lambda-min-floor");
        let mut c = at_least("peps-cp", lambda_min, floor);
        c.kind = CheckKind::ValueOnly;
        c.detail = format!("bound value {v:.3} not positive; every trial lambda_min >= {floor}");
        c
    }
}

fn point_checks(exp: Experiment, p: &Point, tol: &Tolerances, bounds: &[BoundReport], col: &dyn Fn(&str) -> Vec<f64>) -> Vec<CheckResult> {
    let b = |name: &str| bounds.iter().find(|x| x.bound_name == name).expect("bound evaluated");
    let d = p.d as f64;
    let dd = p.bond_dim as f64;
    let certificate = || {
        let applicable = col("cert_applicable");
        let bound = col("cert_bound");
        let gap = col("gap");
        let slack: Vec<f64> = (0..applicable.len().min(bound.len()).min(gap.len()))
            .filter(|&i| applicable[i] > 0.5)
            .map(|i| gap[i] - bound[i])
            .collect();
        property("certificate", "applicable certificate <= gap", &slack, |s| s >= -IDENTITY_TOL, false)
    };
    let mut out = Vec::new();
    match exp {
        Experiment::MpsGap => {
            out.push(frequency_check("gap-mps", b("gap-mps"), &col("gap"), false));
            out.push(frequency_check("mps-cp", b("mps-cp"), &col("cp_deviation"), true));
            out.push(mean_near("mps-1", &col("overlap"), 1.0, tol.get("mean-tolerance")));
            out.push(mean_at_most("mps-2", &col("deflated_right"), b("mps-2").value.unwrap_or(40.0 / d.sqrt())));
            out.push(certificate());
        }
        Experiment::OverlapCheck => {
            out.push(mean_near("mps-1", &col("overlap"), 1.0, tol.get("mean-tolerance")));
            let re = col("overlap");
            let im = col("overlap_im");
            let rel: Vec<f64> = re.iter().zip(&im).map(|(r, i)| i.abs() / (1.0 + r.abs())).collect();
            out.push(at_most("overlap-real", &rel, IDENTITY_TOL));
        }
        Experiment::TraceCheck => out.push(frequency_check("trace-t", b("trace-t"), &col("trace_t"), true)),
        Experiment::WishartCheck => out.push(frequency_check("wishart", b("wishart"), &col("deviation"), true)),
        Experiment::PepsGap | Experiment::PepsGapIndependent => {
            out.push(cp_check(b("peps-cp"), &col("cp_lambda_min"), tol));
            let dev: Vec<f64> = col("overlap").iter().map(|o| (o - 1.0).abs()).collect();
            out.push(frequency_check("peps-1", b("peps-1"), &dev, true));
            if exp == Experiment::PepsGap {
                out.push(at_most("trace-identity", &col("trace_tilde_rel_error"), IDENTITY_TOL));
            }
            out.push(at_most("real-trace", &col("real_trace_max"), IDENTITY_TOL));
            out.push(at_most("kraus-matrix", &col("kraus_matrix_error"), 1e-12));
            out.push(certificate());
            let g = b("gap-peps");
            let skip = if g.vacuous { "vacuous at this point" } else { "constant unspecified" };
            out.push(CheckResult::skipped("gap-peps", CheckKind::ValueOnly, skip));
        }
        Experiment::PepsCpCheck => out.push(cp_check(b("peps-cp"), &col("cp_lambda_min"), tol)),
        Experiment::ParentGapMps => {
            let rank = col("rank");
            let expected = col("expected_rank");
            let miss: Vec<f64> = rank.iter().zip(&expected).map(|(r, e)| (r - e).abs()).collect();
            out.push(at_most("injective", &miss, 0.0));
            out.push(at_most("frustration-free", &col("ground_energy"), 1e-6));
            // Lowest Krylov eigenvalue always, full dense spectrum where it was computed.
            let lowest: Vec<f64> = col("ground_energy").into_iter().chain(col("dense_min_eigenvalue")).collect();
            out.push(at_least("positive-semidefinite", &lowest, -1e-8));
            out.push(property("positive-gap", "every trial gap > 0", &col("gap"), |g| g > 0.0, false));
            out.push(at_most("dense-agreement", &col("dense_gap_error"), 1e-6));
            out.push(at_least("h2-inequality", &col("h2_margin"), -1e-8));
        }
        Experiment::ParentGapPeps => {
            let expected = col("expected_rank");
            for (name, c) in [("injective-horizontal", "rank_horizontal"), ("injective-vertical", "rank_vertical")] {
                let miss: Vec<f64> = col(c).iter().zip(&expected).map(|(r, e)| (r - e).abs()).collect();
                out.push(at_most(name, &miss, 0.0));
            }
            out.push(at_most("frustration-free", &col("ground_energy"), 1e-6));
            out.push(property("positive-gap", "every trial gap > 0", &col("gap"), |g| g > 0.0, false));
            let comm: Vec<f64> = col("commutator_horizontal").into_iter().chain(col("commutator_vertical")).collect();
            out.push(property("commutator-finite", "commutators finite", &comm, f64::is_finite, true));
        }
        Experiment::Correlations => {
            out.push(at_most("fit-rate", &col("fit_rate_rel_error").iter().map(|x| x.abs()).collect::<Vec<_>>(), 0.15));
            out.push(at_most("envelope", &col("envelope_violations"), 0.0));
            let rel = col("relative_gap");
            let ratio = col("decay_ratio_max");
            let gapped: Vec<f64> =
                rel.iter().zip(&ratio).filter(|(g, _)| **g >= 0.5).map(|(_, r)| *r).collect();
            out.push(at_most("decay-envelope", &gapped, 1.0));
            out.push(at_most("path-equivalence", &col("path_error"), 1e-9));
        }
        Experiment::Expander => {
            out.push(frequency_check("sigma", b("sigma"), &col("sigma_deviation"), true));
            out.push(at_most("trace-preserving", &col("tp_residual"), IDENTITY_TOL));
            out.push(at_most("purity", &col("purity"), tol.get("purity-factor") / dd));
            out.push(at_most("eps", &col("eps"), tol.get("eps-max")));
            out.push(at_least("m-lower", &col("m_lower"), dd / 2.0));
            out.push(at_most("iterate-contraction", &col("iterate_violations"), 0.0));
        }
    }
    out
}

fn monotone(name: &str, xs: &[f64], medians: &[Option<f64>], increasing: bool, strict: bool) -> CheckResult {
    if medians.iter().any(Option::is_none) || medians.len() < 2 {
        return CheckResult::skipped(name, CheckKind::Trend, "missing medians");
    }
    let m: Vec<f64> = medians.iter().map(|x| x.unwrap()).collect();
    let bad = m
        .windows(2)
        .filter(|w| {
            let step = if increasing { w[1] - w[0] } else { w[0] - w[1] };
            if strict {
                step <= 0.0
            } else {
                step < 0.0
            }
        })
        .count();
    let dir = match (increasing, strict) {
        (true, true) => "increasing",
        (true, false) => "nondecreasing",
        (false, true) => "decreasing",
        (false, false) => "nonincreasing",
    };
    CheckResult {
        name: name.into(),
        kind: CheckKind::Trend,
        status: status(bad == 0),
        detail: format!("medians {dir} over d = {xs:?}"),
        observed: None,
        allowed: None,
        violations: Some(bad),
        n: m.len(),
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn trends(config: &ExperimentConfig, points: &[PointSummary]) -> Vec<CheckResult> {
    let Some(sweep) = &config.sweep else { return Vec::new() };
    if sweep.param != SweepParam::D || points.len() < 2 {
        return Vec::new();
    }
    let xs: Vec<f64> = points.iter().map(|p| p.point.d as f64).collect();
    let med = |c: &str| points.iter().map(|p| p.median(c)).collect::<Vec<_>>();
    match config.experiment {
        Experiment::MpsGap => vec![monotone("gap-trend", &xs, &med("gap"), true, false)],
        Experiment::ParentGapMps => vec![
            monotone("gap-trend", &xs, &med("gap"), true, false),
            monotone("p-tilde-trend", &xs, &med("p_tilde_distance"), false, true),
            monotone("commutator-trend", &xs, &med("commutator"), false, true),
        ],
        Experiment::Expander => {
            let m = med("two_to_two_distance");
            if m.iter().any(|x| !x.is_some_and(|v| v > 0.0)) {
                return vec![CheckResult::skipped("distance-slope", CheckKind::Trend, "missing medians")];
            }
            let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            let ly: Vec<f64> = m.iter().map(|x| x.unwrap().ln()).collect();
            let slope = ls_slope(&lx, &ly);
            vec![CheckResult {
                name: "distance-slope".into(),
                kind: CheckKind::Trend,
                status: status((slope - SLOPE_TARGET).abs() <= SLOPE_TOL),
                detail: format!("log-log slope of median distance vs d within {SLOPE_TARGET} +- {SLOPE_TOL}"),
                observed: Some(slope),
                allowed: Some(SLOPE_TOL),
                violations: None,
                n: m.len(),
            }]
        }
        _ => Vec::new(),
    }
}

pub(crate) fn summarize(
    config: &ExperimentConfig,
    tol: &Tolerances,
    points: &[Point],
    columns: &[String],
    records: &[TrialRecord],
    wall_time_ms: f64,
) -> Result<Summary> {
    let exp = config.experiment;
    let mut out = Vec::new();
    for p in points {
        let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.point == *p).collect();
        let ok: Vec<&TrialRecord> = rows.iter().copied().filter(|r| r.flag.is_none()).collect();
        let col = |name: &str| -> Vec<f64> {
            let j = columns.iter().position(|c| c == name).expect("known column");
            ok.iter().map(|r| r.metrics[j]).filter(|x| !x.is_nan()).collect()
        };
        let mut flags = BTreeMap::new();
        for r in &rows {
            if let Some(f) = &r.flag {
                let class = f.split(':').next().unwrap_or("error").to_string();
                *flags.entry(class).or_insert(0) += 1;
            }
        }
        let stats = columns.iter().map(|c| (c.clone(), Stats::of(&col(c)))).collect();
        let params = bound_params(p, tol);
        let bounds = bound_names(exp).iter().map(|n| paper_bounds(n, &params)).collect::<Result<Vec<_>>>()?;
        let checks = point_checks(exp, p, tol, &bounds, &col);
        out.push(PointSummary {
            point: *p,
            trials: rows.len(),
            flagged: rows.len() - ok.len(),
            flags,
            stats,
            bounds,
            checks,
        });
    }
    let trends = trends(config, &out);
    let flagged: usize = out.iter().map(|p| p.flagged).sum();
    let resource: usize = out.iter().map(|p| p.flags.get("resource").copied().unwrap_or(0)).sum();
    let campaign_failed = 2 * flagged > records.len();
    let all_checks_passed =
        !campaign_failed && out.iter().flat_map(|p| &p.checks).chain(&trends).all(CheckResult::passed);
    Ok(Summary {
        schema_version: SCHEMA_VERSION.into(),
        experiment: exp,
        config: config.clone(),
        points: out,
        trends,
        trials_total: records.len(),
        flagged,
        campaign_failed,
        resource_limited: flagged > 0 && resource == flagged,
        all_checks_passed,
        wall_time_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_small_sets() {
        let s = Stats::of(&[3.0, 1.0, 2.0, f64::NAN]);
        assert_eq!(s.count, 3);
        assert_eq!(s.median, Some(2.0));
        assert_eq!(s.mean, Some(2.0));
        assert_eq!(s.q05, Some(1.1));
        assert_eq!(Stats::of(&[]).mean, None);
    }

    #[test]
    fn frequency_modes() {
        let p = BoundParams { wishart_n: Some(4), wishart_s: Some(400), ..Default::default() };
        let w = paper_bounds("wishart", &p).unwrap();
        // Probability 2e^{-1} is usable: half the trials may exceed.
        let vals = [0.0, 1.0, 0.0, 1.0];
        let c = frequency_check("w", &w, &vals, true);
        assert_eq!((c.kind, c.status), (CheckKind::Frequency, CheckStatus::Pass));
        let c = frequency_check("w", &w, &[1.0; 4], true);
        assert_eq!(c.status, CheckStatus::Fail);

        let g = paper_bounds("gap-mps", &BoundParams { d: Some(40_000), bond_dim: Some(4), ..Default::default() }).unwrap();
        assert!(g.vacuous);
        let c = frequency_check("g", &g, &[0.9, 0.6], false);
        assert_eq!((c.kind, c.status), (CheckKind::ValueOnly, CheckStatus::Pass));
        let c = frequency_check("g", &g, &[0.9, 0.5], false);
        assert_eq!(c.status, CheckStatus::Fail);

        let g = paper_bounds("gap-mps", &BoundParams { d: Some(100), bond_dim: Some(4), ..Default::default() }).unwrap();
        assert_eq!(frequency_check("g", &g, &[0.1], false).status, CheckStatus::Skipped);
    }

    #[test]
    fn slope_and_monotone() {
        let x: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        assert!((ls_slope(&x, &y) + 0.5).abs() < 1e-14);
        let xs = [1.0, 2.0, 3.0];
        assert!(monotone("m", &xs, &[Some(1.0), Some(1.0), Some(2.0)], true, false).passed());
        assert!(!monotone("m", &xs, &[Some(1.0), Some(1.0), Some(2.0)], true, true).passed());
        assert!(monotone("m", &xs, &[Some(3.0), Some(2.0), Some(1.0)], false, true).passed());
    }
}
