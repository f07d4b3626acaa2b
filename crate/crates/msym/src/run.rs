//! Command dispatch shared by the binary and the tests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;

use msym_core::qwiener::QWienerField;
use msym_core::rbf::{BoundaryRule, DiffOperator, Kernel};

use crate::checks::{check_tableau, verify_mscl, CheckError};
use crate::config::{Command, ConfigError, ExperimentConfig};
use crate::mc::{run_energy, run_ladder, McError, Problem};
use crate::output::{atomic_write, csv, git_describe, sha256_hex, Manifest};

/// Command-line arguments.
#[derive(Debug, Clone, Parser)]
#[command(name = "msym", version, about = "Multi-symplectic integrators for stochastic Hamiltonian PDEs")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the config path count.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for Monte Carlo runs.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Failure of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or invalid configuration (exit 2).
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A solve diverged or blew up (exit 3).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A conservation or tableau check failed (exit 4).
    #[error("check failed: {0}")]
    Check(String),
    /// Artifact I/O failed (exit 1).
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Config(c) => CliError::Config(c),
            McError::Noise(n) => CliError::Config(ConfigError::new("time", n.to_string())),
            McError::Pool(p) => CliError::Io(std::io::Error::other(p)),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<CheckError> for CliError {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Config(c) => CliError::Config(c),
            CheckError::Mc(m) => m.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Loads a config file and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.paths {
        cfg.paths = p;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

struct Artifacts<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        atomic_write(&self.dir.join(name), text.as_bytes())?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Runs the command described by `cli`, printing a summary and writing the
/// artifacts. Returns the lines printed.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let started = Instant::now();
    let cfg = load_config(cli)?;
    let dir = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "out".into()));
    let mut art = Artifacts { dir: &dir, written: Vec::new() };
    let mut lines = Vec::new();
    let mut emit = |s: String| {
        println!("{s}");
        lines.push(s);
    };
    let mut failure = None;
    let summary: serde_json::Value = match cfg.command {
        Command::Convergence => {
            let p = Problem::from_config(&cfg)?;
            let ladder = run_ladder(&p, &cfg.time.ladder, cfg.time.reference_dt, cfg.paths, cfg.seed, cli.threads)?;
            let mut rows = Vec::new();
            for (i, l) in ladder.levels.iter().enumerate() {
                emit(format!("level {} dt={} error={} stderr={}", i + 1, sci(l.dt), sci(l.error), sci(l.stderr)));
                rows.push(vec![(i + 1).to_string(), sci(l.dt), sci(l.dt.log2()), sci(l.error), sci(l.error.log2()), sci(l.stderr)]);
            }
            art.write("ladder.csv", &csv(&["level", "dt", "log2_dt", "error", "log2_error", "stderr"], &rows))?;
            match ladder.fit {
                Some(f) => emit(format!("slope={:.4} stderr={:.4}", f.slope, f.stderr)),
                None => emit("slope=undefined (errors vanish)".into()),
            }
            serde_json::json!({
                "paths": ladder.paths,
                "reference_dt": cfg.time.reference_dt,
                "levels": ladder.levels.iter().map(|l| serde_json::json!({"dt": l.dt, "error": l.error, "stderr": l.stderr})).collect::<Vec<_>>(),
                "slope": ladder.fit.map(|f| f.slope),
                "slope_stderr": ladder.fit.map(|f| f.stderr),
            })
        }
        Command::Energy => {
            let p = Problem::from_config(&cfg)?;
            let e = run_energy(&p, cfg.time.dt, cfg.paths, cfg.seed, cli.threads)?;
            let rows: Vec<Vec<String>> =
                e.t.iter().zip(&e.energy).enumerate().map(|(n, (t, v))| vec![n.to_string(), sci(*t), sci(*v)]).collect();
            art.write("energy.csv", &csv(&["step", "t", "energy"], &rows))?;
            emit(format!("energy slope={} intercept={} r2={:.6}", sci(e.fit.slope), sci(e.fit.intercept), e.fit.r2));
            serde_json::json!({"paths": e.paths, "slope": e.fit.slope, "intercept": e.fit.intercept, "r2": e.fit.r2})
        }
        Command::VerifyMscl => {
            let rep = verify_mscl(&cfg)?;
            let rows: Vec<Vec<String>> = rep
                .residuals
                .iter()
                .enumerate()
                .map(|(n, r)| vec![n.to_string(), sci(r.residual), sci(r.temporal), sci(r.spatial)])
                .collect();
            art.write("residuals.csv", &csv(&["step", "value", "temporal", "spatial"], &rows))?;
            let max = rep.max();
            let label = rep.residuals.first().map_or("none", |r| r.label);
            emit(format!("mscl residual {label}: max={} threshold={}", sci(max), sci(cfg.verify.threshold)));
            if !(max <= cfg.verify.threshold) {
                failure = Some(format!("conservation residual {max:e} exceeds {:e}", cfg.verify.threshold));
            }
            serde_json::json!({"max_residual": max, "threshold": cfg.verify.threshold, "steps": rep.residuals.len()})
        }
        Command::CheckTableau => {
            let rep = check_tableau(&cfg)?;
            let rows: Vec<Vec<String>> = rep.entries.iter().map(|(n, v)| vec![n.to_string(), sci(*v)]).collect();
            for (n, v) in &rep.entries {
                emit(format!("condition {n}: residual={}", sci(*v)));
            }
            art.write("residuals.csv", &csv(&["condition", "value"], &rows))?;
            let fails = rep.failures(cfg.tableau.tol);
            if !fails.is_empty() {
                failure = Some(format!("conditions violated at tol {:e}: {}", cfg.tableau.tol, fails.join(", ")));
            }
            serde_json::json!({"max_residual": rep.max_residual(), "tol": cfg.tableau.tol, "failures": fails})
        }
        Command::BuildDiffop => {
            let (xl, xr, cells) = (cfg.grid.x_left, cfg.grid.x_right, cfg.grid.cells);
            let h = (xr - xl) / cells as f64;
            let full: Vec<f64> = (0..=cells).map(|j| xl + j as f64 * h).collect();
            let kernel = Kernel::new(cfg.kernel_kind()?, cfg.rbf.shape).map_err(|e| ConfigError::new("rbf.shape", e.to_string()))?;
            let op = DiffOperator::assemble(&kernel, &full, cfg.rbf.stencil, 1, BoundaryRule::HomogeneousDirichlet)
                .map_err(|e| ConfigError::new("rbf", e.to_string()))?;
            let rows: Vec<Vec<String>> =
                op.entries().map(|(i, j, w)| vec![i.to_string(), j.to_string(), format!("{w:.17e}")]).collect();
            art.write("diffop.csv", &csv(&["row", "col", "weight"], &rows))?;
            emit(format!("operator dim={} entries={}", op.dim(), rows.len()));
            serde_json::json!({"dim": op.dim(), "entries": rows.len()})
        }
        Command::SampleNoise => {
            let p = Problem::from_config(&cfg)?;
            let field = QWienerField::sample(&p.basis, p.nodes(), p.t_final, cfg.time.dt, cfg.seed).map_err(McError::from)?;
            let mut rows = Vec::new();
            field.for_each_increment(|n, i, v| rows.push(vec![n.to_string(), i.to_string(), format!("{v:.17e}")]));
            art.write("noise.csv", &csv(&["step", "node_index", "increment"], &rows))?;
            emit(format!("noise steps={} nodes={}", field.steps(), field.nodes().len()));
            serde_json::json!({"steps": field.steps(), "nodes": field.nodes().len()})
        }
    };
    write_manifest(&mut art, &cfg, summary, started)?;
    match failure {
        Some(f) => Err(CliError::Check(f)),
        None => Ok(lines),
    }
}

fn write_manifest(art: &mut Artifacts<'_>, cfg: &ExperimentConfig, summary: serde_json::Value, started: Instant) -> Result<(), CliError> {
    let resolved = serde_json::to_vec(cfg).map_err(std::io::Error::other)?;
    let command = serde_json::to_value(cfg.command).map_err(std::io::Error::other)?;
    let mut outputs = art.written.clone();
    outputs.push("manifest.json".into());
    let m = Manifest {
        command: command.as_str().unwrap_or_default().to_string(),
        config: cfg,
        config_sha256: sha256_hex(&resolved),
        seed: cfg.seed,
        git_describe: git_describe().to_string(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        outputs,
        summary,
    };
    let text = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
    art.write("manifest.json", &text)
}
