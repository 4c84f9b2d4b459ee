//! Seeded Monte Carlo campaigns: configuration, parallel trial execution,
//! bound checks, and CSV / JSON / SVG output.
//!
//! Every trial draws from `SeedSpec::new(master_seed, trial_index, experiment)`
//! and runs single-threaded, so the trial CSV depends only on the config.
//! Wall-clock times go to a separate `timings.csv`.

mod bounds;
mod plot;
mod report;
mod trials;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bounds::{paper_bounds, BoundKind, BoundParams, BoundReport, BOUND_NAMES};
pub use plot::{emit_plot, PlotKind, PlotSpec};
pub use report::{frequency_check, ls_slope, CheckKind, CheckResult, CheckStatus, PointSummary, Stats, Summary};

use crate::error::{Error, Result};
use crate::rand_gauss::SeedSpec;

/// Published schema for `summary.json`.
pub const SUMMARY_SCHEMA: &str = include_str!("../../../../schemas/summary.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    MpsGap,
    PepsGap,
    PepsGapIndependent,
    ParentGapMps,
    ParentGapPeps,
    Correlations,
    Expander,
    WishartCheck,
    OverlapCheck,
    TraceCheck,
    PepsCpCheck,
}

const GAP_COLUMNS: [&str; 17] = [
    "lambda1_re",
    "lambda1_im",
    "lambda2_modulus",
    "gap",
    "s1",
    "s2",
    "overlap",
    "deflated_right",
    "deflated_left",
    "cp_deviation",
    "cp_lambda_min",
    "trace_t",
    "cert_delta",
    "cert_epsilon",
    "cert_eta",
    "cert_bound",
    "cert_applicable",
];

const PEPS_GAP_COLUMNS: [&str; 20] = [
    "lambda1_re",
    "lambda1_im",
    "lambda2_modulus",
    "gap",
    "s1",
    "s2",
    "overlap",
    "deflated_right",
    "deflated_left",
    "cp_deviation",
    "cp_lambda_min",
    "trace_t",
    "cert_delta",
    "cert_epsilon",
    "cert_eta",
    "cert_bound",
    "cert_applicable",
    "trace_tilde_rel_error",
    "real_trace_max",
    "kraus_matrix_error",
];

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::MpsGap,
        Experiment::PepsGap,
        Experiment::PepsGapIndependent,
        Experiment::ParentGapMps,
        Experiment::ParentGapPeps,
        Experiment::Correlations,
        Experiment::Expander,
        Experiment::WishartCheck,
        Experiment::OverlapCheck,
        Experiment::TraceCheck,
        Experiment::PepsCpCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::MpsGap => "mps_gap",
            Experiment::PepsGap => "peps_gap",
            Experiment::PepsGapIndependent => "peps_gap_independent",
            Experiment::ParentGapMps => "parent_gap_mps",
            Experiment::ParentGapPeps => "parent_gap_peps",
            Experiment::Correlations => "correlations",
            Experiment::Expander => "expander",
            Experiment::WishartCheck => "wishart_check",
            Experiment::OverlapCheck => "overlap_check",
            Experiment::TraceCheck => "trace_check",
            Experiment::PepsCpCheck => "peps_cp_check",
        }
    }

    /// Smallest admissible `N`, or `None` when `N` is unused.
    pub fn min_n(self) -> Option<usize> {
        match self {
            Experiment::PepsGap | Experiment::PepsGapIndependent | Experiment::PepsCpCheck => Some(1),
            Experiment::ParentGapMps | Experiment::ParentGapPeps => Some(2),
            Experiment::Correlations => Some(3),
            _ => None,
        }
    }

    /// Measured columns, after the common `trial_index, seed, d, D, N, flag`.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Experiment::MpsGap => &GAP_COLUMNS,
            Experiment::PepsGap | Experiment::PepsGapIndependent => &PEPS_GAP_COLUMNS,
            Experiment::OverlapCheck => &["overlap", "overlap_im"],
            Experiment::TraceCheck => &["trace_t"],
            Experiment::WishartCheck => &["n", "s", "deviation"],
            Experiment::PepsCpCheck => &["cp_deviation", "cp_lambda_min"],
            Experiment::ParentGapMps => &[
                "rank",
                "expected_rank",
                "p_tilde_distance",
                "commutator",
                "ground_energy",
                "gap",
                "reduced",
                "residual",
                "dense_gap_error",
                "dense_min_eigenvalue",
                "h2_margin",
            ],
            Experiment::ParentGapPeps => &[
                "rank_horizontal",
                "rank_vertical",
                "expected_rank",
                "p_tilde_horizontal",
                "p_tilde_vertical",
                "commutator_horizontal",
                "commutator_vertical",
                "ground_energy",
                "gap",
                "reduced",
                "residual",
            ],
            Experiment::Correlations => &[
                "lambda1_modulus",
                "lambda2_over_lambda1",
                "relative_gap",
                "fit_rate_median",
                "fit_rate_target",
                "fit_rate_rel_error",
                "fit_failures",
                "envelope_violations",
                "decay_ratio_max",
                "path_error",
                "pairs",
            ],
            Experiment::Expander => &[
                "sigma_deviation",
                "tp_residual",
                "eps",
                "purity",
                "m_lower",
                "kraus_rank",
                "iterations",
                "fp_residual",
                "iterate_violations",
                "trace_drift",
                "two_to_two_distance",
            ],
        }
    }

    /// Long-form side table: file name and header.
    fn side_table(self) -> Option<(&'static str, &'static [&'static str])> {
        match self {
            Experiment::Correlations => Some((
                "profile.csv",
                &["trial_index", "seed", "d", "D", "N", "k", "distance", "observable_id", "gamma", "lambda2_over_lambda1"],
            )),
            Experiment::Expander => {
                Some(("trajectory.csv", &["trial_index", "seed", "d", "D", "t", "distance", "bound"]))
            }
            _ => None,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "d")]
    D,
    #[serde(rename = "D")]
    BondDim,
    #[serde(rename = "N")]
    N,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<usize>,
}

/// Campaign configuration, read from JSON. Keys are snake_case; the
/// kebab-case spellings `master-seed` and `output-dir` are accepted too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub d: usize,
    #[serde(rename = "D")]
    pub bond_dim: usize,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub trials: usize,
    #[serde(alias = "master-seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_output_dir", alias = "output-dir")]
    pub output_dir: PathBuf,
    /// Worker threads; defaults to the number of CPUs. Never affects output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Known `tolerances` keys with their defaults.
pub const TOLERANCE_KEYS: &[(&str, f64)] = &[
    ("eps", 0.1),
    ("mean-tolerance", 0.01),
    ("fit-cap", f64::NAN),
    ("observable-pairs", 20.0),
    ("random-observables", 10.0),
    ("path-check-limit", 1e6),
    ("dense-check-max-dim", 729.0),
    ("h2-max-dim", 1024.0),
    ("iterate-steps", 10.0),
    ("iterate-floor", 1e-12),
    ("fixed-point-tol", 1e-13),
    ("fixed-point-max-iter", 10_000.0),
    ("distance-max-bond", 16.0),
    ("lambda-min-floor", 0.5),
    ("purity-factor", 2.0),
    ("eps-max", 0.1),
];

#[derive(Debug, Clone, Default)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Tolerances {
    pub fn new(map: &BTreeMap<String, f64>) -> Result<Self> {
        for (k, v) in map {
            if !TOLERANCE_KEYS.iter().any(|(name, _)| name == k) {
                return Err(Error::invalid(format!("unknown tolerance {k:?}")));
            }
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::invalid(format!("tolerance {k} must be finite and nonnegative")));
            }
        }
        Ok(Self(map.clone()))
    }

    pub fn get(&self, key: &str) -> f64 {
        self.0.get(key).copied().unwrap_or_else(|| {
            TOLERANCE_KEYS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).expect("known tolerance key")
        })
    }

    fn count(&self, key: &str) -> usize {
        self.get(key).round() as usize
    }

    pub fn eps(&self) -> f64 {
        self.get("eps")
    }
    pub fn fit_cap(&self) -> Option<usize> {
        let v = self.get("fit-cap");
        (!v.is_nan()).then(|| v.round() as usize)
    }
    pub fn observable_pairs(&self) -> usize {
        self.count("observable-pairs").max(1)
    }
    pub fn random_observables(&self) -> usize {
        self.count("random-observables")
    }
    pub fn path_check_limit(&self) -> f64 {
        self.get("path-check-limit")
    }
    pub fn dense_check_max_dim(&self) -> usize {
        self.count("dense-check-max-dim")
    }
    pub fn h2_max_dim(&self) -> usize {
        self.count("h2-max-dim")
    }
    pub fn iterate_steps(&self) -> usize {
        self.count("iterate-steps")
    }
    pub fn iterate_floor(&self) -> f64 {
        self.get("iterate-floor")
    }
    pub fn fixed_point_tol(&self) -> f64 {
        self.get("fixed-point-tol")
    }
    pub fn fixed_point_max_iter(&self) -> usize {
        self.count("fixed-point-max-iter")
    }
    pub fn distance_max_bond(&self) -> usize {
        self.count("distance-max-bond")
    }
}

/// One parameter point of a (possibly swept) campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub d: usize,
    #[serde(rename = "D")]
    pub bond_dim: usize,
    #[serde(rename = "N")]
    pub n: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.d == 0 || self.bond_dim == 0 {
            return Err(Error::invalid("dimensions must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be at least 1"));
        }
        Tolerances::new(&self.tolerances)?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::invalid("sweep needs at least one value"));
            }
            if s.values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("sweep values must be strictly increasing"));
            }
            if s.values[0] == 0 {
                return Err(Error::invalid("sweep values must be at least 1"));
            }
            if s.param == SweepParam::N && self.experiment.min_n().is_none() {
                return Err(Error::invalid(format!("{} does not use N", self.experiment)));
            }
        }
        if let Some(min) = self.experiment.min_n() {
            for p in self.points() {
                match p.n {
                    None => return Err(Error::invalid(format!("{} needs N", self.experiment))),
                    Some(n) if n < min => {
                        return Err(Error::invalid(format!("{} needs N >= {min}, got {n}", self.experiment)))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Point> {
        let base = Point {
            d: self.d,
            bond_dim: self.bond_dim,
            n: if self.experiment.min_n().is_some() { self.n } else { None },
        };
        match &self.sweep {
            None => vec![base],
            Some(s) => s
                .values
                .iter()
                .map(|&v| match s.param {
                    SweepParam::D => Point { d: v, ..base },
                    SweepParam::BondDim => Point { bond_dim: v, ..base },
                    SweepParam::N => Point { n: Some(v), ..base },
                })
                .collect(),
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub derived_seed: u64,
    pub point: Point,
    /// Error class and message for a trial that failed.
    pub flag: Option<String>,
    pub metrics: Vec<f64>,
    pub wall_time_ms: f64,
    #[serde(skip)]
    extra: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub summary: Summary,
    pub records: Vec<TrialRecord>,
    pub columns: Vec<String>,
    pub trials_csv: PathBuf,
    pub summary_json: PathBuf,
}

impl CampaignResult {
    /// Values of a column for unflagged trials at one point, NaN dropped.
    pub fn column(&self, point: usize, name: &str) -> Vec<f64> {
        let Some(j) = self.columns.iter().position(|c| c == name) else { return Vec::new() };
        let p = self.summary.points[point].point;
        self.records
            .iter()
            .filter(|r| r.point == p && r.flag.is_none())
            .map(|r| r.metrics[j])
            .filter(|x| !x.is_nan())
            .collect()
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x == 0.0 || (1e-5..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn flag_of(e: &Error) -> String {
    let class = match e {
        Error::InvalidParameter(_) => "invalid",
        Error::Numerical { .. } => "numerical",
        Error::Degenerate(_) => "degenerate",
        Error::Resource(_) => "resource",
        _ => "error",
    };
    format!("{class}: {e}")
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Run every trial, write `trials.csv`, `summary.json`, the schema, the
/// timings and any side tables into the output directory.
pub fn run_campaign(config: &ExperimentConfig) -> Result<CampaignResult> {
    config.validate()?;
    let tol = Tolerances::new(&config.tolerances)?;
    let exp = config.experiment;
    let points = config.points();
    let trials = config.trials as u64;
    faer::set_global_parallelism(faer::Par::Seq);

    let jobs: Vec<(u64, Point)> = points
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| (0..trials).map(move |t| (pi as u64 * trials + t, *p)))
        .collect();
    let run = |&(idx, p): &(u64, Point)| {
        let seed = SeedSpec::new(config.master_seed, idx, exp.name());
        let start = Instant::now();
        let out = trials::run_trial(exp, &p, &seed, &tol);
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        let (metrics, flag, extra) = match out {
            Ok(o) => (o.metrics, None, o.extra),
            Err(e) => (vec![f64::NAN; exp.columns().len()], Some(flag_of(&e)), Vec::new()),
        };
        TrialRecord { trial_index: idx, derived_seed: seed.derived_seed(), point: p, flag, metrics, wall_time_ms, extra }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let wall = Instant::now();
    let mut records: Vec<TrialRecord> = pool.install(|| jobs.par_iter().map(run).collect());
    records.sort_by_key(|r| r.trial_index);
    let wall_ms = wall.elapsed().as_secs_f64() * 1e3;

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let columns: Vec<String> = exp.columns().iter().map(|s| s.to_string()).collect();
    let header: Vec<String> =
        ["trial_index", "seed", "d", "D", "N", "flag"].iter().map(|s| s.to_string()).chain(columns.iter().cloned()).collect();
    let trials_csv = dir.join("trials.csv");
    write_csv(
        &trials_csv,
        &header,
        records.iter().map(|r| {
            let mut row = vec![
                r.trial_index.to_string(),
                r.derived_seed.to_string(),
                r.point.d.to_string(),
                r.point.bond_dim.to_string(),
                r.point.n.map(|n| n.to_string()).unwrap_or_default(),
                r.flag.clone().unwrap_or_default(),
            ];
            row.extend(r.metrics.iter().map(|&x| fmt_real(x)));
            row
        }),
    )?;
    write_csv(
        &dir.join("timings.csv"),
        &["trial_index".to_string(), "wall_time_ms".to_string()],
        records.iter().map(|r| vec![r.trial_index.to_string(), format!("{:.3}", r.wall_time_ms)]),
    )?;
    if let Some((name, head)) = exp.side_table() {
        let head: Vec<String> = head.iter().map(|s| s.to_string()).collect();
        write_csv(
            &dir.join(name),
            &head,
            records.iter().flat_map(|r| {
                r.extra.iter().map(move |row| std::iter::once(r.trial_index.to_string()).chain(row.iter().cloned()).collect())
            }),
        )?;
    }

    let summary = report::summarize(config, &tol, &points, &columns, &records, wall_ms)?;
    let summary_json = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&summary_json, text + "\n").map_err(|e| Error::io(&summary_json, e))?;
    let schema_path = dir.join("summary.schema.json");
    fs::write(&schema_path, SUMMARY_SCHEMA).map_err(|e| Error::io(&schema_path, e))?;

    Ok(CampaignResult { summary, records, columns, trials_csv, summary_json })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(exp: Experiment, dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            experiment: exp,
            d: 6,
            bond_dim: 2,
            n: Some(4),
            trials: 3,
            master_seed: 42,
            tolerances: BTreeMap::new(),
            sweep: None,
            output_dir: dir.to_path_buf(),
            threads: Some(1),
        }
    }

    #[test]
    fn config_round_trip_and_validation() {
        let text = r#"{"experiment": "mps_gap", "d": 100, "D": 4, "trials": 5, "master_seed": 7,
                       "sweep": {"param": "d", "values": [100, 400]}, "tolerances": {"eps": 0.2}}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.points().len(), 2);
        assert_eq!(c.points()[1].d, 400);
        assert_eq!(c.points()[0].n, None);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);

        let bad = [
            r#"{"experiment": "mps_gap", "d": 100, "D": 4, "trials": 0, "master-seed": 7}"#,
            r#"{"experiment": "mps_gap", "d": 0, "D": 4, "trials": 1, "master-seed": 7}"#,
            r#"{"experiment": "nope", "d": 1, "D": 4, "trials": 1, "master-seed": 7}"#,
            r#"{"experiment": "parent_gap_mps", "d": 5, "D": 2, "trials": 1, "master-seed": 7}"#,
            r#"{"experiment": "mps_gap", "d": 5, "D": 2, "trials": 1, "master-seed": 7, "sweep": {"param": "d", "values": [5, 5]}}"#,
            r#"{"experiment": "mps_gap", "d": 5, "D": 2, "trials": 1, "master-seed": 7, "tolerances": {"bogus": 1}}"#,
            r#"{"experiment": "mps_gap", "d": 5, "D": 2, "trials": 1, "master-seed": 7, "extra": 1}"#,
        ];
        for b in bad {
            let e = ExperimentConfig::from_json(b).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{b}: {e}");
        }
    }

    #[test]
    fn real_formatting_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-300, 3.3e-7, 0.1 + 0.2, 1e20, f64::MIN_POSITIVE, 123456.789] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_real(f64::NAN), "");
    }

    #[test]
    fn single_trial_campaigns() {
        let tmp = tempfile::tempdir().unwrap();
        let schema: serde_json::Value = serde_json::from_str(SUMMARY_SCHEMA).unwrap();
        let validator = jsonschema::validator_for(&schema).unwrap();
        for exp in Experiment::ALL {
            let dir = tmp.path().join(exp.name());
            let mut c = config(exp, &dir);
            c.trials = 1;
            if exp == Experiment::ParentGapPeps {
                c.d = 3;
                c.n = Some(2);
            }
            if matches!(exp, Experiment::PepsGap | Experiment::PepsGapIndependent | Experiment::PepsCpCheck) {
                c.n = Some(2);
            }
            let r = run_campaign(&c).unwrap();
            assert_eq!(r.records.len(), 1);
            assert!(r.records[0].flag.is_none(), "{exp}: {:?}", r.records[0].flag);
            let text = fs::read_to_string(&r.trials_csv).unwrap();
            assert_eq!(text.lines().count(), 2, "{exp}");
            assert_eq!(text.lines().next().unwrap().split(',').count(), 6 + exp.columns().len());
            let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&r.summary_json).unwrap()).unwrap();
            assert_eq!(s["experiment"], exp.name());
            assert!(validator.is_valid(&s), "{exp}: {:?}", validator.iter_errors(&s).map(|e| e.to_string()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let tmp = tempfile::tempdir().unwrap();
        let mut bytes = Vec::new();
        for threads in [1, 3] {
            let mut c = config(Experiment::Correlations, &tmp.path().join(format!("t{threads}")));
            c.trials = 4;
            c.threads = Some(threads);
            c.sweep = Some(Sweep { param: SweepParam::D, values: vec![3, 5] });
            let r = run_campaign(&c).unwrap();
            bytes.push((fs::read(&r.trials_csv).unwrap(), fs::read(c.output_dir.join("profile.csv")).unwrap()));
        }
        assert_eq!(bytes[0], bytes[1]);
    }

    #[test]
    fn failures_are_flagged_not_fatal() {
        let tmp = tempfile::tempdir().unwrap();
        // 5^30 basis states: every trial hits the Krylov budget.
        let mut c = config(Experiment::ParentGapMps, tmp.path());
        c.d = 5;
        c.n = Some(30);
        let r = run_campaign(&c).unwrap();
        assert!(r.records.iter().all(|x| x.flag.as_deref().unwrap().starts_with("resource")));
        assert!(r.summary.campaign_failed && r.summary.resource_limited);
        assert!(!r.summary.all_checks_passed);
        let text = fs::read_to_string(&r.trials_csv).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
