//! Command-line front end: `simulate`, `validate`, `lift` and `plot-data`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_override, ConfigError, ExperimentConfig};
use crate::kinetic::{solve_pathwise, SolveOptions};
use crate::roughpath::{lift_pwl, PwlPath};
use crate::validation::{parse_suites, SuiteError, SuiteReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_SUITE_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rough-scl", version, about = "Scalar conservation laws driven by rough paths")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "ROUGH_SCL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the configured experiment and write snapshots, ledger and manifest.
    Simulate {
        config: PathBuf,
        /// Output directory; defaults to `output.dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Config overrides `--dotted.key=value`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run a validation suite (or `all`) and write its reports.
    Validate {
        suite: String,
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Hölder norm, Chen check and Lévy areas of a path CSV `t,z1,...,zM`.
    Lift {
        csv: PathBuf,
        #[arg(long, default_value_t = 0.4)]
        alpha: f64,
    },
    /// Re-export the series of report JSON files as CSV files.
    PlotData {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "plot-data")]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => EXIT_CONFIG,
            CliError::Solver(_) | CliError::Write { .. } => EXIT_SOLVER,
        }
    }
}

impl From<SuiteError> for CliError {
    fn from(e: SuiteError) -> Self {
        match e {
            SuiteError::Config(c) => CliError::Config(c),
            SuiteError::Precondition(_) => CliError::Input(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(write_err(path))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Write { path: path.to_path_buf(), source: e.into() }
}

fn load(config: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let ov = overrides
        .iter()
        .map(|a| parse_override(a).map(|(k, v)| (k.to_string(), v.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentConfig::load(config, &ov)?)
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config_hash: String,
    seed: u64,
    substeps: usize,
    total_dissipation: f64,
    files: Vec<String>,
    config: &'a ExperimentConfig,
}

fn simulate(config: &Path, out: Option<PathBuf>, overrides: &[String]) -> Result<i32, CliError> {
    let cfg = load(config, overrides)?;
    let flux = cfg.flux()?;
    let z = cfg.driver()?;
    let grid = cfg.grid(&flux, &z)?;
    let u0 = cfg.initial_field(&grid);
    let sol = solve_pathwise(&u0, &flux, &z, &grid, cfg.time.horizon, &SolveOptions { step: cfg.step_options() })
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir).map_err(write_err(&dir))?;
    let mut files = Vec::new();
    if cfg.output.wants("csv") {
        let p = dir.join("snapshots.csv");
        sol.write_snapshots_csv(&grid, create(&p)?).map_err(csv_err(&p))?;
        let p = dir.join("ledger.csv");
        sol.ledger.write_csv(create(&p)?).map_err(csv_err(&p))?;
        files.extend(["snapshots.csv".to_string(), "ledger.csv".to_string()]);
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.hash(),
        seed: cfg.driver.seed,
        substeps: sol.substeps,
        total_dissipation: sol.ledger.total_mass,
        files,
        config: &cfg,
    };
    let p = dir.join("manifest.json");
    let mut w = create(&p)?;
    serde_json::to_writer_pretty(&mut w, &manifest)
        .map_err(|e| CliError::Write { path: p.clone(), source: e.into() })?;
    writeln!(w).and_then(|_| w.flush()).map_err(write_err(&p))?;
    println!("wrote {} ({} substeps, dissipation {:.6e})", dir.display(), sol.substeps, sol.ledger.total_mass);
    Ok(EXIT_OK)
}

fn write_report(report: &SuiteReport, dir: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.output.wants("json") {
        let p = dir.join(format!("{}.json", report.suite));
        fs::write(&p, report.to_json() + "\n").map_err(write_err(&p))?;
    }
    if cfg.output.wants("csv") {
        for (name, series) in &report.series {
            let p = dir.join(format!("{}_{name}.csv", report.suite));
            series.write_csv(create(&p)?).map_err(csv_err(&p))?;
        }
    }
    Ok(())
}

fn validate(suite: &str, config: &Path, out: Option<PathBuf>, overrides: &[String]) -> Result<i32, CliError> {
    let suites = parse_suites(suite).map_err(|e| CliError::Input(e.to_string()))?;
    let cfg = load(config, overrides)?;
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir).map_err(write_err(&dir))?;
    let mut code = EXIT_OK;
    for s in suites {
        log::info!("running {s}");
        match s.run(&cfg) {
            Ok(report) => {
                write_report(&report, &dir, &cfg)?;
                println!("{} {} ({:.1?})", if report.pass { "PASS" } else { "FAIL" }, report.suite, report.elapsed);
                for c in &report.checks {
                    let rel = match c.relation {
                        crate::validation::Relation::AtMost => "<=",
                        crate::validation::Relation::AtLeast => ">=",
                    };
                    println!(
                        "  {} {}: {:.6e} {rel} {:.6e}",
                        if c.pass { "ok  " } else { "FAIL" },
                        c.name,
                        c.value,
                        c.threshold
                    );
                }
                if !report.pass && code == EXIT_OK {
                    code = EXIT_SUITE_FAILED;
                }
            }
            Err(e) => {
                let e = CliError::from(e);
                eprintln!("error: {s}: {e}");
                // Configuration and solver errors outrank check failures.
                if code == EXIT_OK || code == EXIT_SUITE_FAILED {
                    code = e.code();
                }
            }
        }
    }
    Ok(code)
}

fn lift(csv: &Path, alpha: f64) -> Result<i32, CliError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CliError::Input(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let file = File::open(csv).map_err(|e| CliError::Input(format!("{}: {e}", csv.display())))?;
    let path = PwlPath::read_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", csv.display())))?;
    let lifted = lift_pwl(&path, 2).map_err(|e| CliError::Input(e.to_string()))?;
    let norm = lifted.holder_norm(alpha).map_err(|e| CliError::Input(e.to_string()))?;
    println!("holder_norm {norm:.12e}");
    println!("chen_error {:.12e}", lifted.chen_defect(64));
    let total = lifted.sig(0, lifted.len() - 1);
    for i in 0..path.dim() {
        for j in i + 1..path.dim() {
            println!("levy_area[{},{}] {:.12e}", i + 1, j + 1, total.levy_area(i, j));
        }
    }
    Ok(EXIT_OK)
}

fn plot_data(reports: &[PathBuf], out: &Path) -> Result<i32, CliError> {
    fs::create_dir_all(out).map_err(write_err(out))?;
    for path in reports {
        let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let bad = |what: &str| CliError::Input(format!("{}: {what}", path.display()));
        let suite = doc.get("suite").and_then(|v| v.as_str()).ok_or_else(|| bad("missing `suite`"))?;
        let series = doc.get("series").and_then(|v| v.as_object()).ok_or_else(|| bad("missing `series`"))?;
        for (name, s) in series {
            let s: crate::validation::Series =
                serde_json::from_value(s.clone()).map_err(|e| bad(&format!("series `{name}`: {e}")))?;
            let p = out.join(format!("{suite}_{name}.csv"));
            s.write_csv(create(&p)?).map_err(csv_err(&p))?;
            println!("{}", p.display());
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Simulate { config, out, overrides } => simulate(&config, out, &overrides),
        Command::Validate { suite, config, out, overrides } => validate(&suite, &config, out, &overrides),
        Command::Lift { csv, alpha } => lift(&csv, alpha),
        Command::PlotData { reports, out } => plot_data(&reports, &out),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
