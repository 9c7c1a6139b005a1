//! `h2conformal`: run reduction experiments and write CSV/JSON artifacts.
//!
//! Exit codes: 0 when every order converged, 2 when some order did not,
//! 1 on configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use h2conformal::experiment::{self, RunConfig};
use h2conformal::Error;

#[derive(Parser)]
#[command(name = "h2conformal", version, about = "H2-optimal reduction with conformally mapped pole domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Schrödinger chain (n = 1000) on the upper half-plane.
    Schrodinger(Flags),
    /// Undamped wave equation inside a thin ellipse around the imaginary axis.
    Wave(Flags),
    /// Everything from a config file (unset keys fall back to the Schrödinger preset).
    Custom(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// Config file with `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reduced orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<usize>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// identity | mobius-disk | rotation-upper-half | joukowski-ellipse
    #[arg(long)]
    map: Option<String>,
    /// Ellipse center, e.g. -5e-3 or 1+2j.
    #[arg(long = "map-c", allow_hyphen_values = true)]
    map_c: Option<String>,
    /// Ellipse scale, e.g. 1.5e4j.
    #[arg(long = "map-M", allow_hyphen_values = true)]
    map_m: Option<String>,
    /// Ellipse radius (> 1).
    #[arg(long = "map-R")]
    map_r: Option<f64>,
    /// Wave model at 5000 grid points (n = 10000).
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    n_grid: Option<usize>,
    /// Worker threads for the per-order runs (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Initial shifts from a file; `{r}` is replaced by the order.
    #[arg(long)]
    shift_file: Option<PathBuf>,
    /// Imaginary-part scale of the wave shift recipe.
    #[arg(long)]
    shift_scale: Option<f64>,
    /// Simulation horizon.
    #[arg(long)]
    t_final: Option<f64>,
    /// abort | reflect: handling of reduced poles that leave the domain.
    #[arg(long)]
    on_escape: Option<String>,
    /// Skip the time-domain simulations.
    #[arg(long)]
    no_sim: bool,
}

impl Flags {
    /// Flags rendered as config lines so both sources share one parser.
    fn as_config(&self) -> String {
        let mut lines = Vec::new();
        let mut push = |k: &str, v: String| lines.push(format!("{k} = {v}"));
        if let Some(r) = &self.r {
            push("r", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        }
        if let Some(v) = self.tol {
            push("tol", v.to_string());
        }
        if let Some(v) = self.maxit {
            push("maxit", v.to_string());
        }
        if let Some(v) = self.seed {
            push("seed", v.to_string());
        }
        if let Some(v) = &self.out {
            push("output_dir", v.display().to_string());
        }
        if let Some(v) = &self.map {
            push("map", v.clone());
        }
        if let Some(v) = &self.map_c {
            push("map_c", v.clone());
        }
        if let Some(v) = &self.map_m {
            push("map_M", v.clone());
        }
        if let Some(v) = self.map_r {
            push("map_R", v.to_string());
        }
        if let Some(v) = self.n_grid {
            push("n_grid", v.to_string());
        }
        if let Some(v) = &self.shift_file {
            push("shift_file", v.display().to_string());
        }
        if let Some(v) = self.shift_scale {
            push("shift_scale", v.to_string());
        }
        if let Some(v) = self.t_final {
            push("t_final", v.to_string());
        }
        if let Some(v) = &self.on_escape {
            push("on_escape", v.clone());
        }
        if self.no_sim {
            push("simulate", "false".into());
        }
        lines.join("\n")
    }
}

fn build_config(command: &Command) -> Result<(RunConfig, usize), Error> {
    let (base, flags) = match command {
        Command::Schrodinger(f) => (RunConfig::schrodinger_preset(), f),
        Command::Wave(f) => (RunConfig::wave_preset(f.full_scale), f),
        Command::Custom(f) => {
            if f.config.is_none() {
                return Err(Error::Config { line: None, field: "config".into(), message: "custom runs need --config".into() });
            }
            (RunConfig::schrodinger_preset(), f)
        }
    };
    let mut cfg = base;
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: None,
            field: "config".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        cfg = experiment::parse_config(&text, cfg)?;
    }
    cfg = experiment::parse_config(&flags.as_config(), cfg).map_err(|e| match e {
        // Line numbers of the synthesized flag text mean nothing to the user.
        Error::Config { field, message, .. } => Error::Config { line: None, field: format!("--{field}"), message },
        e => e,
    })?;
    Ok((cfg, flags.jobs))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, jobs) = match build_config(&cli.command) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    let report = match pool.install(|| experiment::run(&cfg)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    println!("{} (n = {}), map {}", report.model, report.n, report.map);
    println!("{:>4}  {:>12}  {:>5}  {:>9}", "r", "rel_error", "iter", "converged");
    for rec in &report.records {
        let err = rec.rel_error.map(|e| format!("{e:.4e}")).unwrap_or_else(|| "-".into());
        println!("{:>4}  {:>12}  {:>5}  {:>9}", rec.r, err, rec.iterations, rec.converged);
        if let Some(msg) = &rec.error {
            println!("      note: {msg}");
        }
    }
    println!("artifacts in {}", cfg.output_dir.display());
    ExitCode::from(report.exit_code() as u8)
}
