use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use regboot::analysis::{
    analyze, coverage_study, emit_curves, resolve_adjustment, AnalysisConfig, CiTarget,
    Directional, Grid, DEFAULT_SPAGHETTI,
};
use regboot::bootstrap::{ResamplePlan, DEFAULT_RESAMPLES};
use regboot::hypothesis::Hypothesis;
use regboot::synth::{synth_generate, SynthParams};
use regboot::{exit, Dataset, Error, ModelSpec};

#[derive(Parser, Debug)]
#[command(name = "regboot", version)]
#[command(about = "Bootstrap confidence levels for hypotheses about regression model shape")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit, bootstrap, and report coefficient intervals and hypothesis confidences.
    Analyze(AnalyzeArgs),
    /// Export the fitted curve and resample curves over a grid.
    Curves(CurvesArgs),
    /// Generate a synthetic dataset from a known quadratic population.
    Synth(SynthArgs),
    /// Monte Carlo coverage of classical and percentile intervals for the curvature.
    Coverage(CoverageArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long)]
    focal: String,
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Comma-separated control column names.
    #[arg(long, value_delimiter = ',')]
    controls: Vec<String>,
    /// Factor on the centered focal variable (results stay on raw powers).
    #[arg(long)]
    center: bool,
    /// Hold a control at a fixed value for predictions: `name=value`.
    /// Controls not listed are held at their sample mean.
    #[arg(long = "adjust", value_name = "NAME=VALUE")]
    adjust: Vec<String>,
}

#[derive(Args, Debug)]
struct ResampleArgs {
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = regboot::bootstrap::DEFAULT_MAX_REDRAWS)]
    max_redraws: usize,
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, env = "REGBOOT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    resample: ResampleArgs,
    /// `name=predicate`, `name=builtin`, or a bare builtin
    /// (inverted_u, negative, negative(X), optimum_in(a,b)). Repeatable;
    /// replaces the default set.
    #[arg(long = "hypothesis", value_name = "NAME=EXPR")]
    hypotheses: Vec<String>,
    /// `coef` or `coef,level`. Repeatable; defaults to every coefficient at 0.95.
    #[arg(long = "ci", value_name = "COEF[,LEVEL]")]
    ci: Vec<String>,
    /// `coef:negative` or `coef:positive`; adds a p-value confidence entry.
    #[arg(long = "direction", value_name = "COEF:SIGN")]
    direction: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    resample: ResampleArgs,
    /// `min:max:step`; defaults to the observed focal range in 100 steps.
    #[arg(long = "curve-grid")]
    curve_grid: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SPAGHETTI)]
    spaghetti: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PopulationArgs {
    /// JSON file with population parameters; defaults to a built-in inverted U.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "noise-sd")]
    noise_sd: Option<f64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    population: PopulationArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CoverageArgs {
    #[command(flatten)]
    population: PopulationArgs,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 500)]
    resamples: usize,
    /// First dataset seed; rep `r` uses `seed + r`.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Coverage(a) => cmd_coverage(a),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn model_spec(m: &ModelArgs) -> Result<ModelSpec, Error> {
    let spec = ModelSpec {
        response: m.response.clone(),
        focal: m.focal.clone(),
        degree: m.degree,
        controls: m.controls.iter().filter(|c| !c.is_empty()).cloned().collect(),
        center_focal: m.center,
    };
    spec.validate()?;
    Ok(spec)
}

fn plan(r: &ResampleArgs) -> Result<ResamplePlan, Error> {
    if r.resamples == 0 {
        return Err(Error::Config("--resamples must be at least 1".into()));
    }
    Ok(ResamplePlan {
        b: r.resamples,
        seed: r.seed,
        max_redraws_per_replicate: r.max_redraws,
    })
}

/// Means for every control, overridden by `--adjust name=value` pairs.
fn adjustment(ds: &Dataset, spec: &ModelSpec, pairs: &[String]) -> Result<Option<Vec<f64>>, Error> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let (mut values, _) = resolve_adjustment(ds, spec, None)?;
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected NAME=VALUE, got `{pair}`")))?;
        let k = spec
            .controls
            .iter()
            .position(|c| c == name.trim())
            .ok_or_else(|| Error::Config(format!("`{name}` is not a control")))?;
        values[k] = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad value in `--adjust {pair}`")))?;
    }
    Ok(Some(values))
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), Error> {
    let spec = model_spec(&a.model)?;
    let ds = Dataset::load_csv(&a.model.data)?;
    let mut config = AnalysisConfig::new(&a.model.data, spec, plan(&a.resample)?);
    if !a.hypotheses.is_empty() {
        config.hypotheses = a
            .hypotheses
            .iter()
            .map(|h| {
                Hypothesis::from_arg(h).map_err(|e| match e {
                    regboot::hypothesis::HypothesisError::Parse(p) => {
                        let text = h.split_once('=').map_or(h.as_str(), |(_, t)| t);
                        Error::Config(format!("in hypothesis `{h}`: {}", p.render(text)))
                    }
                    other => other.into(),
                })
            })
            .collect::<Result<_, _>>()?;
    }
    config.ci = a.ci.iter().map(|s| s.parse()).collect::<Result<Vec<CiTarget>, _>>()?;
    config.directional = a
        .direction
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<Directional>, _>>()?;
    config.adjustment = adjustment(&ds, &config.spec, &a.model.adjust)?;
    config.workers = a.resample.workers;
    let report = analyze(&ds, &config)?;
    let text = match a.format {
        Format::Json => report.to_json(),
        Format::Csv => report.coefficients_csv(),
    };
    write_output(a.out.as_deref(), &text)
}

fn cmd_curves(a: CurvesArgs) -> Result<(), Error> {
    let spec = model_spec(&a.model)?;
    let ds = Dataset::load_csv(&a.model.data)?;
    let grid = match &a.curve_grid {
        Some(g) => g.parse::<Grid>()?,
        None => {
            let x = ds.column(&spec.focal)?;
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Grid::new(lo, hi, (hi - lo) / 100.0)?
        }
    };
    let adj = match adjustment(&ds, &spec, &a.model.adjust)? {
        Some(v) => v,
        None => resolve_adjustment(&ds, &spec, None)?.0,
    };
    let table = emit_curves(&ds, &spec, &plan(&a.resample)?, &grid, a.spaghetti, &adj)?;
    let text = match a.format {
        Format::Csv => table.to_csv()?,
        Format::Json => table.to_json(),
    };
    write_output(a.out.as_deref(), &text)
}

fn population(p: &PopulationArgs) -> Result<SynthParams, Error> {
    let mut params = match &p.params {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthParams::default(),
    };
    if let Some(n) = p.n {
        params.n = n;
    }
    if let Some(sd) = p.noise_sd {
        params.noise_sd = sd;
    }
    Ok(params)
}

fn cmd_synth(a: SynthArgs) -> Result<(), Error> {
    let ds = synth_generate(&population(&a.population)?, a.seed)?;
    write_output(a.out.as_deref(), &ds.to_csv())
}

fn cmd_coverage(a: CoverageArgs) -> Result<(), Error> {
    let params = population(&a.population)?;
    let table = coverage_study(&params, a.reps, a.level, a.resamples, a.seed)?;
    let text = match a.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&table).expect("coverage serializes");
            s.push('\n');
            s
        }
        Format::Csv => format!(
            "method,covered,reps,coverage,mean_width\nclassical,{},{},{},{}\npercentile,{},{},{},{}\n",
            table.classical_covered,
            table.reps,
            table.classical_coverage,
            table.mean_classical_width,
            table.percentile_covered,
            table.reps,
            table.percentile_coverage,
            table.mean_percentile_width,
        ),
    };
    write_output(a.out.as_deref(), &text)
}
