use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use randtn_core::campaign::{emit_plot, fmt_real, CheckStatus, PlotSpec, Summary};
use randtn_core::rand_gauss::{sample_mps_tensor, sample_peps_tensor};
use randtn_core::{run_campaign, Error, Experiment, ExperimentConfig, SeedSpec};

#[derive(Parser)]
#[command(name = "randtn", version, about = "Random tensor network spectral experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Physical dimension.
    #[arg(long = "d")]
    d: usize,
    /// Bond dimension.
    #[arg(long = "D")]
    bond_dim: usize,
    /// Chain length or torus side.
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (output does not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Tolerance override, e.g. `--tol eps=0.2`. Repeatable.
    #[arg(long = "tol", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected key=value")?;
    Ok((k.to_string(), v.parse::<f64>().map_err(|e| e.to_string())?))
}

#[derive(Subcommand)]
enum Cmd {
    /// Write i.i.d. Gaussian MPS tensors as CSV.
    SampleMps(Common),
    /// Write i.i.d. Gaussian PEPS tensors as CSV.
    SamplePeps(Common),
    /// Transfer-operator gap of random MPS.
    GapMps(Common),
    /// Gap of the N-column PEPS transfer operator.
    GapPeps {
        #[command(flatten)]
        common: Common,
        /// Independent tensor per row instead of one shared tensor.
        #[arg(long)]
        independent: bool,
    },
    /// Spectral gap of the parent Hamiltonian (ring for MPS, N x N torus for PEPS).
    ParentGap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        peps: bool,
    },
    /// Two-point correlation profiles and decay-rate fits.
    Correlations(Common),
    /// Expander properties of the normalized transfer channel.
    Expander(Common),
    /// Wishart concentration with n = D^2, s = d.
    Wishart(Common),
    /// Run a campaign from a JSON config.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Plot two CSV columns as SVG.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Defaults to the CSV path with an `.svg` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config(exp: Experiment, c: &Common) -> ExperimentConfig {
    ExperimentConfig {
        experiment: exp,
        d: c.d,
        bond_dim: c.bond_dim,
        n: c.n,
        trials: c.trials,
        master_seed: c.seed,
        tolerances: c.tol.iter().cloned().collect::<BTreeMap<_, _>>(),
        sweep: None,
        output_dir: c.out_dir.clone(),
        threads: c.threads,
    }
}

fn report(s: &Summary, dir: &Path) -> i32 {
    for p in &s.points {
        let n = p.point.n.map(|n| format!(" N={n}")).unwrap_or_default();
        println!("d={} D={}{n}: {} trials, {} flagged", p.point.d, p.point.bond_dim, p.trials, p.flagged);
        for c in &p.checks {
            print_check(c);
        }
    }
    for c in &s.trends {
        print_check(c);
    }
    println!("wrote {}", dir.display());
    if s.campaign_failed {
        eprintln!("campaign failed: {} of {} trials flagged", s.flagged, s.trials_total);
        return if s.resource_limited { 4 } else { 3 };
    }
    0
}

fn print_check(c: &randtn_core::campaign::CheckResult) {
    let status = match c.status {
        CheckStatus::Pass => "pass",
        CheckStatus::Fail => "FAIL",
        CheckStatus::Skipped => "skip",
    };
    let obs = c.observed.map(|v| format!(" observed={v:.6e}")).unwrap_or_default();
    println!("  [{status}] {}: {}{obs}", c.name, c.detail);
}

fn campaign(cfg: ExperimentConfig) -> Result<i32, Error> {
    let r = run_campaign(&cfg)?;
    Ok(report(&r.summary, &cfg.output_dir))
}

fn sample(c: &Common, peps: bool) -> Result<i32, Error> {
    if c.trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    fs::create_dir_all(&c.out_dir).map_err(|e| Error::Io { path: c.out_dir.clone(), source: e })?;
    let name = if peps { "peps_tensors.csv" } else { "mps_tensors.csv" };
    let path = c.out_dir.join(name);
    let io = |e| Error::Io { path: path.clone(), source: e };
    let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
    // Flat index: (x, l, r) row-major for MPS, (x, l, r, up, down) for PEPS.
    writeln!(w, "trial_index,seed,index,re,im").map_err(io)?;
    let label = if peps { "sample_peps" } else { "sample_mps" };
    for t in 0..c.trials as u64 {
        let s = SeedSpec::new(c.seed, t, label);
        let entries = if peps {
            sample_peps_tensor(&s, c.d, c.bond_dim)?.entries().to_vec()
        } else {
            sample_mps_tensor(&s, c.d, c.bond_dim)?.entries().to_vec()
        };
        for (i, z) in entries.iter().enumerate() {
            writeln!(w, "{t},{},{i},{},{}", s.derived_seed(), fmt_real(z.re), fmt_real(z.im)).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.cmd {
        Cmd::SampleMps(c) => sample(&c, false),
        Cmd::SamplePeps(c) => sample(&c, true),
        Cmd::GapMps(c) => campaign(config(Experiment::MpsGap, &c)),
        Cmd::GapPeps { common, independent } => {
            let exp = if independent { Experiment::PepsGapIndependent } else { Experiment::PepsGap };
            campaign(config(exp, &common))
        }
        Cmd::ParentGap { common, peps } => {
            let exp = if peps { Experiment::ParentGapPeps } else { Experiment::ParentGapMps };
            campaign(config(exp, &common))
        }
        Cmd::Correlations(c) => campaign(config(Experiment::Correlations, &c)),
        Cmd::Expander(c) => campaign(config(Experiment::Expander, &c)),
        Cmd::Wishart(c) => campaign(config(Experiment::WishartCheck, &c)),
        Cmd::Campaign { config, out_dir, threads, seed, trials } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.output_dir = out_dir.unwrap_or(cfg.output_dir);
            cfg.threads = threads.or(cfg.threads);
            cfg.master_seed = seed.unwrap_or(cfg.master_seed);
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.validate()?;
            campaign(cfg)
        }
        Cmd::Plot { csv, spec, out } => {
            let text = fs::read_to_string(&spec).map_err(|e| Error::Io { path: spec.clone(), source: e })?;
            let spec: PlotSpec = serde_json::from_str(&text)?;
            let out = out.unwrap_or_else(|| csv.with_extension("svg"));
            for s in emit_plot(&csv, &spec, &out)? {
                let tau = s.tau.map(|t| format!(" tau={t:.9}")).unwrap_or_default();
                println!("series {:?}: {} points{tau}", s.label, s.points);
            }
            println!("wrote {}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
