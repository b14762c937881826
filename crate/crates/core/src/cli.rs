//! The `transport` command line: `estimate`, `simulate` and `diagnose`.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 model fitting
//! failure, 3 inference or simulation failure. Errors are written to stderr
//! as a single JSON object.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{load_csv, CsvSchema, ObservationTable, TreatmentLevel};
use crate::diagnostics::{test_mean_homogeneity, HomogeneityReport};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorKind, ModelSpec, TreatmentSpec};
use crate::inference::{bootstrap_ci, BootstrapConfig, ResamplingScheme};
use crate::nuisance::Design;
use crate::simulation::{run_grid, GridConfig};

pub const TOOL_VERSION: &str = concat!("transportability ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "transport", version, about = "Transport trial results to a target population")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate potential outcome means and contrasts in the target population.
    Estimate(EstimateArgs),
    /// Run the Monte Carlo study over a scenario grid.
    Simulate(SimulateArgs),
    /// Test whether outcome means agree across trials within each arm.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SchemaArgs {
    #[arg(long, default_value = "trial")]
    pub trial_col: String,
    #[arg(long, default_value = "treatment")]
    pub treatment_col: String,
    #[arg(long, default_value = "outcome")]
    pub outcome_col: String,
}

impl SchemaArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            trial: self.trial_col.clone(),
            treatment: self.treatment_col.clone(),
            outcome: self.outcome_col.clone(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, default_value = "augmented")]
    pub estimator: EstimatorKind,
    /// Treatment levels to report; all observed levels by default.
    #[arg(long = "arm", value_delimiter = ',')]
    pub arms: Vec<TreatmentLevel>,
    /// Contrasts as `a:b` (estimate of a minus b); every arm against the
    /// first by default.
    #[arg(long = "contrast", value_delimiter = ',')]
    pub contrasts: Vec<String>,
    /// Covariates entering every working model; all by default.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Known randomization probabilities as `level=prob`, used instead of a
    /// fitted treatment model.
    #[arg(long, value_delimiter = ',')]
    pub known_treatment: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub replicates: usize,
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "pooled")]
    pub scheme: ResamplingScheme,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// TOML scenario grid.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in grid: `desk` or `full`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub oracle_draw_size: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Arms to test; all observed levels by default.
    #[arg(long = "arm", value_delimiter = ',')]
    pub arms: Vec<TreatmentLevel>,
    /// Covariates in the outcome model; all by default.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            if code == 0 {
                let _ = write!(stdout, "{e}");
            } else {
                let _ = write!(stderr, "{e}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Diagnose(a) => cmd_diagnose(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let detail = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": e.exit_code(),
            });
            let _ = writeln!(stderr, "{detail}");
            e.exit_code()
        }
    }
}

fn emit(text: &str, output: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            std::fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e)),
    }
}

fn covariate_columns(table: &ObservationTable, names: &[String]) -> Result<Vec<usize>> {
    if names.is_empty() {
        return Ok((0..table.n_covariates()).collect());
    }
    names
        .iter()
        .map(|n| {
            table
                .column_index(n)
                .ok_or_else(|| Error::Validation(format!("unknown covariate '{n}'")))
        })
        .collect()
}

fn parse_contrast(s: &str) -> Result<(TreatmentLevel, TreatmentLevel)> {
    let bad = || Error::Config(format!("contrast '{s}' is not of the form a:b"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn parse_known(items: &[String]) -> Result<BTreeMap<TreatmentLevel, f64>> {
    items
        .iter()
        .map(|s| {
            let bad = || Error::Config(format!("known treatment probability '{s}' is not of the form level=prob"));
            let (a, p) = s.split_once('=').ok_or_else(bad)?;
            Ok((a.trim().parse().map_err(|_| bad())?, p.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

pub fn cmd_estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> Result<()> {
    let table = load_csv(&args.input, &args.schema.schema())?;
    let arms = if args.arms.is_empty() {
        table.treatment_levels().to_vec()
    } else {
        args.arms.clone()
    };
    let contrasts: Vec<(TreatmentLevel, TreatmentLevel)> = if args.contrasts.is_empty() {
        arms.iter().skip(1).map(|&a| (a, arms[0])).collect()
    } else {
        args.contrasts.iter().map(|s| parse_contrast(s)).collect::<Result<_>>()?
    };

    let p = table.n_covariates();
    let columns = covariate_columns(&table, &args.covariates)?;
    let design = Design::from_columns(p, &columns)?;
    let mut spec = ModelSpec {
        outcome_design: design.clone(),
        participation_design: design.clone(),
        treatment: TreatmentSpec::Fitted { design },
        ..ModelSpec::main_effects(p)
    };
    if !args.known_treatment.is_empty() {
        spec = spec.with_known_treatment(parse_known(&args.known_treatment)?);
    }

    let mut report = if args.no_bootstrap {
        estimate(&table, &spec, args.estimator, &arms, &contrasts)?
    } else {
        let config = BootstrapConfig {
            replicates: args.replicates,
            level: args.level,
            master_seed: args.seed,
            scheme: args.scheme,
            workers: args.workers,
        };
        bootstrap_ci(&table, &spec, args.estimator, &arms, &contrasts, &config)?
    };

    let covariates: Vec<&str> = columns.iter().map(|&j| table.covariate_names()[j].as_str()).collect();
    let prov = &mut report.provenance;
    prov.insert("command".into(), "estimate".into());
    prov.insert("input".into(), args.input.display().to_string());
    prov.insert(
        "schema".into(),
        format!(
            "trial={} treatment={} outcome={}",
            args.schema.trial_col, args.schema.treatment_col, args.schema.outcome_col
        ),
    );
    prov.insert("covariates".into(), covariates.join(","));
    prov.insert("known_treatment".into(), args.known_treatment.join(","));
    prov.insert("bootstrap".into(), (!args.no_bootstrap).to_string());
    prov.insert("seed".into(), args.seed.to_string());
    if !args.no_bootstrap {
        prov.insert("replicates".into(), args.replicates.to_string());
        prov.insert("level".into(), args.level.to_string());
        prov.insert("scheme".into(), args.scheme.label().into());
    }
    let mut text = report.to_json()?;
    text.push('\n');
    emit(&text, args.output.as_deref(), stdout)
}

#[derive(Serialize)]
struct SimulationManifest<'a> {
    tool_version: &'a str,
    master_seed: u64,
    replications: usize,
    oracle_draw_size: Option<usize>,
    source: String,
    files: Vec<String>,
    summary: &'a crate::simulation::SimulationSummary,
}

pub fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let (mut grid, source) = match (&args.config, &args.preset) {
        (Some(path), _) => (GridConfig::load(path)?, path.display().to_string()),
        (None, Some(name)) => (GridConfig::preset(name)?, format!("preset:{name}")),
        (None, None) => return Err(Error::Config("either --config or --preset is required".into())),
    };
    if let Some(r) = args.replications {
        grid.replications = r;
    }
    if let Some(s) = args.seed {
        grid.master_seed = s;
    }
    if args.oracle_draw_size.is_some() {
        grid.oracle_draw_size = args.oracle_draw_size;
    }
    let mut options = grid.options();
    options.workers = args.workers;
    let summary = run_grid(&grid.scenarios()?, &options)?;
    let written = summary.write_tables(&args.output_dir)?;

    let files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    let manifest = SimulationManifest {
        tool_version: TOOL_VERSION,
        master_seed: grid.master_seed,
        replications: grid.replications,
        oracle_draw_size: grid.oracle_draw_size,
        source,
        files: files.clone(),
        summary: &summary,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    let path = args.output_dir.join("summary.json");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    for f in files.iter().chain(std::iter::once(&"summary.json".to_string())) {
        writeln!(stdout, "{}", args.output_dir.join(f).display()).map_err(|e| Error::io(Path::new("<stdout>"), e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DiagnosticFile {
    tool_version: &'static str,
    provenance: BTreeMap<String, String>,
    reports: Vec<HomogeneityReport>,
}

pub fn cmd_diagnose(args: &DiagnoseArgs, stdout: &mut dyn Write) -> Result<()> {
    let table = load_csv(&args.input, &args.schema.schema())?;
    let arms = if args.arms.is_empty() {
        table.treatment_levels().to_vec()
    } else {
        args.arms.clone()
    };
    let columns = covariate_columns(&table, &args.covariates)?;
    let design = Design::from_columns(table.n_covariates(), &columns)?;
    let reports = arms
        .iter()
        .map(|&a| test_mean_homogeneity(&table, a, &design))
        .collect::<Result<Vec<_>>>()?;
    let covariates: Vec<&str> = columns.iter().map(|&j| table.covariate_names()[j].as_str()).collect();
    let provenance = BTreeMap::from([
        ("command".to_string(), "diagnose".to_string()),
        ("input".to_string(), args.input.display().to_string()),
        (
            "arms".to_string(),
            arms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(","),
        ),
        ("covariates".to_string(), covariates.join(",")),
    ]);
    let file = DiagnosticFile {
        tool_version: TOOL_VERSION,
        provenance,
        reports,
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    emit(&text, args.output.as_deref(), stdout)
}
