//! `rlpp`: track inspection, training, evaluation, comparison and export.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;

use rlpp_core::config::ConfigError;
use rlpp_core::harness::{
    self, compare_metrics, export_artifacts, lap_statistics, read_lap_times, read_summary, write_summary, Controller, EvalRun, HarnessError,
    SummaryRow,
};
use rlpp_core::par::Exec;
use rlpp_core::sac::{self, digest_json, Checkpoint, SacError, TrainOptions};
use rlpp_core::track::{load_track, write_raceline, Circuit, TrackLayout};
use rlpp_core::{env::RacingEnv, RunConfig};

#[derive(Parser)]
#[command(name = "rlpp", version, about = "Residual RL racing lab")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Inspect a track or generate its velocity profile.
    Track {
        #[command(subcommand)]
        cmd: TrackCmd,
    },
    /// Train a residual policy with SAC.
    Train {
        #[command(flatten)]
        common: Common,
        /// Override `sac.total_steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Drive consecutive laps and summarize them.
    Eval {
        #[command(flatten)]
        common: Common,
        /// `pp` or `rlpp`.
        #[arg(long, default_value = "pp")]
        controller: String,
        /// Policy checkpoint, required for `rlpp`
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Override `eval.laps`.
        #[arg(long)]
        laps: Option<usize>,
        /// Evaluate this many consecutive seeds concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Compare two result tables (summary.csv or laps.csv).
    Compare {
        /// Baseline table
        #[arg(long)]
        a: PathBuf,
        /// Candidate table
        #[arg(long)]
        b: PathBuf,
        /// Reference controller whose gap `b` should close.
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        /// Measured lap times for the sim gap of `a` and `b`.
        #[arg(long, requires = "real_b")]
        real_a: Option<f64>,
        #[arg(long, requires = "real_a")]
        real_b: Option<f64>,
    },
    /// Render telemetry CSVs and plots from an evaluation's run.json.
    Export {
        #[command(flatten)]
        common: Common,
        /// run.json written by `eval`
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Subcommand)]
enum TrackCmd {
    /// Validate track files and print a geometry summary.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Centerline CSV (instead of a config).
        #[arg(long, conflicts_with = "config")]
        track: Option<PathBuf>,
    },
    /// Generate the velocity profile and write raceline.csv.
    Profile {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overrides `out`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override `pp.d_la` [m]
    #[arg(long = "d-la", allow_negative_numbers = true)]
    d_la: Option<f64>,
    /// Override `pp.alpha_v`
    #[arg(long = "alpha-v", allow_negative_numbers = true)]
    alpha_v: Option<f64>,
    /// Override `residual.alpha_rl`
    #[arg(long = "alpha-rl", allow_negative_numbers = true)]
    alpha_rl: Option<f64>,
}

/// Error class and message; the class picks the exit code.
enum Failure {
    Parse(String),
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Invalid(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Invalid(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Parse { .. } => Failure::Parse(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<SacError> for Failure {
    fn from(e: SacError) -> Self {
        match e {
            SacError::InvalidConfig(_) | SacError::Dimension { .. } | SacError::Version { .. } | SacError::Integrity(_) => {
                Failure::Invalid(e.to_string())
            }
            SacError::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => Failure::Invalid(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::UnknownController(_)
            | HarnessError::MissingCheckpoint
            | HarnessError::NonPositiveTime(_)
            | HarnessError::DegenerateGap { .. } => Failure::Invalid(e.to_string()),
            HarnessError::Policy(s) => s.into(),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Load the config, apply flag overrides, validate.
fn effective_config(c: &Common) -> Result<RunConfig, Failure> {
    if !c.config.is_file() {
        return Err(Failure::Invalid(format!("config file not found: {}", c.config.display())));
    }
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(v) = c.d_la {
        cfg.pp.d_la = v;
    }
    if let Some(v) = c.alpha_v {
        cfg.pp.alpha_v = v;
    }
    if let Some(v) = c.alpha_rl {
        cfg.residual.alpha_rl = v;
    }
    Ok(cfg)
}

fn prepare_out(cfg: &RunConfig, dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    let p = dir.join("effective_config.json");
    fs::write(&p, cfg.to_json_pretty()).map_err(|e| runtime(format!("{}: {e}", p.display())))
}

fn circuit(cfg: &RunConfig) -> Result<Arc<Circuit>, Failure> {
    Ok(Arc::new(cfg.build_circuit()?))
}

fn track_summary(track: &TrackLayout, circuit: Option<&Circuit>) {
    let pts = track.points();
    let kmax = pts.iter().map(|p| p.kappa.abs()).fold(0.0, f64::max);
    let wl = pts.iter().map(|p| p.w_left).fold(f64::INFINITY, f64::min);
    let wr = pts.iter().map(|p| p.w_right).fold(f64::INFINITY, f64::min);
    println!("points        {}", pts.len());
    println!("closed        {}", track.closed());
    println!("length        {:.3} m", track.total_length());
    println!("min w_left    {wl:.3} m");
    println!("min w_right   {wr:.3} m");
    println!("max |kappa|   {kmax:.4} 1/m");
    if let Some(c) = circuit {
        let rl = c.raceline();
        let v: Vec<f64> = rl.points().iter().map(|p| p.v_ref).collect();
        println!("raceline      {:.3} m", rl.total_length());
        println!("v_ref range   {:.3} .. {:.3} m/s", v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(0.0, f64::max));
        println!("profile lap   {:.3} s", profile_lap_time(c));
    }
}

/// Lap time implied by the reference speed profile (trapezoidal in 1/v).
fn profile_lap_time(c: &Circuit) -> f64 {
    let n = 4000;
    let ds = c.length() / n as f64;
    (0..n).map(|i| ds / c.query((i as f64 + 0.5) * ds).v_ref.max(1e-6)).sum()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Track { cmd: TrackCmd::Check { config, track } } => match (config, track) {
            (Some(path), _) => {
                if !path.is_file() {
                    return Err(Failure::Invalid(format!("config file not found: {}", path.display())));
                }
                let cfg = RunConfig::load(&path)?;
                cfg.validate()?;
                let c = circuit(&cfg)?;
                track_summary(c.track(), Some(&c));
                Ok(())
            }
            (None, Some(path)) => {
                if !path.is_file() {
                    return Err(Failure::Invalid(format!("file not found: {}", path.display())));
                }
                let t = load_track(&path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
                track_summary(&t, None);
                Ok(())
            }
            (None, None) => Err(Failure::Parse("track check needs --config or --track".into())),
        },
        Cmd::Track { cmd: TrackCmd::Profile { common } } => {
            let cfg = effective_config(&common)?;
            cfg.validate()?;
            let c = circuit(&cfg)?;
            prepare_out(&cfg, &cfg.out)?;
            let p = cfg.out.join("raceline.csv");
            let f = fs::File::create(&p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
            write_raceline(f, c.raceline()).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
            println!("wrote {} (profile lap {:.3} s)", p.display(), profile_lap_time(&c));
            Ok(())
        }
        Cmd::Train { common, steps } => {
            let mut cfg = effective_config(&common)?;
            if let Some(s) = steps {
                cfg.sac.total_steps = s;
            }
            cfg.validate()?;
            let c = circuit(&cfg)?;
            prepare_out(&cfg, &cfg.out)?;
            let params = cfg.env_params();
            let mut env = RacingEnv::new(c, params, cfg.seed).map_err(runtime)?;
            let metrics_path = cfg.out.join("metrics.csv");
            let mut metrics = fs::File::create(&metrics_path).map_err(|e| runtime(format!("{}: {e}", metrics_path.display())))?;
            let total = cfg.sac.total_steps as u64;
            let mut progress = |step: u64| {
                if step.is_multiple_of(10_000) || step == total {
                    info!("step {step}/{total}");
                }
            };
            let opts = TrainOptions {
                exec: Exec::default(),
                metrics: Some(&mut metrics),
                checkpoint_path: Some(cfg.out.join("checkpoint.json")),
                env_digest: digest_json(&params),
                progress: Some(&mut progress),
            };
            let outcome = sac::train(&mut env, &cfg.sac, cfg.seed, opts)?;
            let last: Vec<_> = outcome.metrics.iter().rev().take(10).collect();
            let mean = last.iter().map(|r| r.ep_reward).sum::<f64>() / last.len().max(1) as f64;
            println!("trained {} steps, {} episodes, recent mean episode reward {mean:.3}", total, outcome.metrics.len());
            println!("checkpoint {}", cfg.out.join("checkpoint.json").display());
            Ok(())
        }
        Cmd::Eval { common, controller, checkpoint, laps, parallel } => {
            let mut cfg = effective_config(&common)?;
            if let Some(l) = laps {
                cfg.eval.laps = l;
            }
            cfg.validate()?;
            let c = circuit(&cfg)?;
            let params = cfg.env_params();
            let policy = match (controller.as_str(), &checkpoint) {
                ("rlpp", Some(p)) => {
                    if !p.is_file() {
                        return Err(Failure::Invalid(format!("checkpoint not found: {}", p.display())));
                    }
                    let obs_dim = params.env.observation.dim();
                    Some(Checkpoint::load_checked(p, obs_dim)?.policy()?)
                }
                _ => None,
            };
            let ctrl = Controller::from_name(&controller, policy)?;
            let n = parallel.max(1) as u64;
            let seeds: Vec<u64> = (cfg.seed..cfg.seed + n).collect();
            let runs = harness::run_seeds(if n > 1 { Exec::Parallel } else { Exec::Sequential }, &c, &params, &ctrl, &cfg.eval, &seeds);
            prepare_out(&cfg, &cfg.out)?;
            let mut rows = Vec::new();
            for (seed, r) in seeds.iter().zip(runs) {
                let r = r?;
                let dir = if n > 1 { cfg.out.join(format!("seed_{seed}")) } else { cfg.out.clone() };
                let stats = lap_statistics(&r.laps, cfg.eval.std).ok();
                export_artifacts(&r, stats.as_ref(), &c, &dir)?;
                let rp = dir.join("run.json");
                fs::write(&rp, serde_json::to_string(&r).map_err(runtime)?).map_err(|e| runtime(format!("{}: {e}", rp.display())))?;
                match &stats {
                    Some(s) => {
                        println!(
                            "{} seed {seed}: {} laps, t_mean {:.4} s, t_std {:.4}, t_min {:.4}, t_max {:.4}, violations {}{}",
                            r.controller,
                            s.n_laps,
                            s.t_mean,
                            s.t_std,
                            s.t_min,
                            s.t_max,
                            s.n_violations,
                            if r.partial { " (partial run)" } else { "" }
                        );
                        rows.push(SummaryRow::new(&r.controller, s));
                    }
                    None => println!("{} seed {seed}: no complete lap (collision {}, timeout {})", r.controller, r.collision, r.timed_out),
                }
            }
            if n > 1 {
                let p = cfg.out.join("summary.csv");
                let f = fs::File::create(&p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
                write_summary(f, &rows).map_err(runtime)?;
            }
            Ok(())
        }
        Cmd::Compare { a, b, reference, real_a, real_b } => {
            let ta = mean_time(&a)?;
            let tb = mean_time(&b)?;
            let tr = reference.as_deref().map(mean_time).transpose()?;
            let cmp = compare_metrics(ta, tb, real_a.zip(real_b), tr)?;
            println!("t_a {ta:.4} s, t_b {tb:.4} s");
            println!("improvement {:.3}%", cmp.improvement);
            if let (Some(ga), Some(gb)) = (cmp.sim_gap_a, cmp.sim_gap_b) {
                println!("sim_gap_a {ga:.3}%");
                println!("sim_gap_b {gb:.3}%");
            }
            if let Some(g) = cmp.gap_closure {
                println!("gap_closure {g:.3}%");
            }
            Ok(())
        }
        Cmd::Export { common, run } => {
            let cfg = effective_config(&common)?;
            cfg.validate()?;
            if !run.is_file() {
                return Err(Failure::Invalid(format!("run file not found: {}", run.display())));
            }
            let text = fs::read_to_string(&run).map_err(|e| runtime(format!("{}: {e}", run.display())))?;
            let r: EvalRun = serde_json::from_str(&text).map_err(|e| Failure::Parse(format!("{}: {e}", run.display())))?;
            let c = circuit(&cfg)?;
            prepare_out(&cfg, &cfg.out)?;
            let stats = lap_statistics(&r.laps, cfg.eval.std).ok();
            let files = export_artifacts(&r, stats.as_ref(), &c, &cfg.out)?;
            println!("wrote {} files to {}", files.len(), cfg.out.display());
            Ok(())
        }
    }
}

/// Mean lap time from a summary table (first row) or a laps table.
fn mean_time(path: &Path) -> Result<f64, Failure> {
    if !path.is_file() {
        return Err(Failure::Invalid(format!("file not found: {}", path.display())));
    }
    let header = fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let first = header.lines().next().unwrap_or_default();
    let bad = |e: HarnessError| Failure::Parse(format!("{}: {e}", path.display()));
    if first.split(',').any(|c| c == "t_mean") {
        let rows = read_summary(path).map_err(bad)?;
        rows.first().map(|r| r.t_mean).ok_or_else(|| Failure::Invalid(format!("{}: empty table", path.display())))
    } else {
        let times = read_lap_times(path).map_err(bad)?;
        if times.is_empty() {
            return Err(Failure::Invalid(format!("{}: empty table", path.display())));
        }
        Ok(times.iter().sum::<f64>() / times.len() as f64)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RLPP_LOG", "info")).format_timestamp_secs().init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
