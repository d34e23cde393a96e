mod grid;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ssreg::ingest::artifact::{read_model, read_ss, write_model, write_ss, ColumnMeta, ModelArtifact, StatsArtifact};
use ssreg::ingest::synth::{generate_synthetic, SynthConfig};
use ssreg::ingest::read_column;
use ssreg::{
    accumulate_shards, fit_boxcox_all, fit_linear, fit_ridge, fit_weighted, mse, predict_dataset, ridge_trace,
    select_boxcox, AnyStats, DataFormat, Dataset, Error, ErrorCategory, FitResult, ModelKind, RidgeTrace, SchemaSpec,
    StatsSpec, DEFAULT_BATCH_SIZE, DEFAULT_TRACE_TAU,
};

use grid::parse_grid;

#[derive(Parser)]
#[command(name = "ssreg", version, about = "Single-pass regression from sufficient statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset and print the true coefficients.
    Simulate(SimulateArgs),
    /// Fit a model in one pass over the data, or from statistics files.
    Fit(FitArgs),
    /// Predict every row of a dataset with a saved model.
    Predict(PredictArgs),
    /// Print the mean squared error between predictions and truth.
    Evaluate(EvaluateArgs),
    /// Compute, merge or subtract sufficient-statistics files.
    #[command(subcommand)]
    Suffstats(SuffstatsCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: u64,
    /// Number of features, excluding the intercept.
    #[arg(long)]
    p: usize,
    /// Comma-separated coefficients; p+1 values include a leading intercept.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Map responses to positive values for Box-Cox fits.
    #[arg(long)]
    positive_y: bool,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to binary for `.bin` outputs, CSV otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModelArg {
    Linear,
    Weighted,
    Boxcox,
    Ridge,
}

#[derive(Args, Clone)]
struct SchemaArgs {
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long)]
    weight: Option<String>,
    /// Comma-separated feature columns; defaults to all other columns.
    #[arg(long)]
    features: Option<String>,
    /// Prepend a constant column.
    #[arg(long)]
    intercept: bool,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
}

impl SchemaArgs {
    fn spec(&self) -> SchemaSpec {
        SchemaSpec {
            response: Some(self.response.clone()),
            weight: self.weight.clone(),
            features: self.features.as_ref().map(|f| f.split(',').map(|s| s.trim().to_string()).collect()),
            intercept: self.intercept,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Data file; repeat for shards.
    #[arg(long, conflicts_with = "ss")]
    data: Vec<PathBuf>,
    /// Sufficient-statistics file; repeat to merge before fitting.
    #[arg(long)]
    ss: Vec<PathBuf>,
    #[command(flatten)]
    schema: SchemaArgs,
    /// Box-Cox powers or ridge parameters: `start:stop:step` or `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Single ridge parameter.
    #[arg(long, conflicts_with = "grid")]
    lambda: Option<f64>,
    /// Ridge-trace stabilization threshold.
    #[arg(long, default_value_t = DEFAULT_TRACE_TAU)]
    tau: f64,
    /// Model file for single fits, output directory for grid fits.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print run metrics as a JSON line on stderr.
    #[arg(long)]
    verbose: bool,
    /// Scan shards on separate threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Map Box-Cox predictions back to the response scale.
    #[arg(long)]
    inverse_transform: bool,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long, default_value = "prediction")]
    pred_column: String,
}

#[derive(Subcommand)]
enum SuffstatsCommand {
    /// Stream one data file into a statistics file.
    Compute {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add statistics files.
    Merge {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove `part` from `full`.
    Subtract {
        full: PathBuf,
        part: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.category() {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Numeric => 4,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

type CliResult<T = ()> = Result<T, CliError>;

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError { code: 3, message: format!("{}: no such file", path.display()) })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Suffstats(c) => suffstats(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| config_error(format!("`{s}` is not a number"))))
        .collect()
}

fn simulate(a: SimulateArgs) -> CliResult {
    let format = match a.format {
        Some(FormatArg::Bin) => DataFormat::Binary,
        Some(FormatArg::Csv) => DataFormat::Csv,
        None if a.out.extension().is_some_and(|e| e == "bin") => DataFormat::Binary,
        None => DataFormat::Csv,
    };
    let cfg = SynthConfig {
        n: a.n,
        p: a.p,
        beta: a.beta.as_deref().map(parse_list).transpose()?,
        sigma: a.sigma,
        seed: a.seed,
        positive_y: a.positive_y,
        format,
    };
    let truth = generate_synthetic(&cfg, &a.out)?;
    println!(
        "{}",
        json!({
            "beta": truth.beta,
            "intercept": truth.intercept,
            "positive_scale": truth.positive_scale,
            "seed": a.seed,
            "out": a.out,
        })
    );
    Ok(())
}

fn stats_spec(model: ModelArg, grid: Option<&str>) -> CliResult<StatsSpec> {
    Ok(match model {
        ModelArg::Linear | ModelArg::Ridge => StatsSpec::Linear,
        ModelArg::Weighted => StatsSpec::Weighted,
        ModelArg::Boxcox => {
            let text = grid.ok_or_else(|| config_error("--grid is required for Box-Cox models"))?;
            StatsSpec::BoxCox(parse_grid(text)?)
        }
    })
}

fn open_shards(paths: &[PathBuf], schema: &SchemaArgs, weighted: bool) -> CliResult<Vec<Dataset>> {
    if weighted && schema.weight.is_none() {
        return Err(config_error("--weight is required for weighted models"));
    }
    for p in paths {
        require_file(p)?;
    }
    let spec = schema.spec();
    Ok(paths.iter().map(|p| Dataset::open(p, &spec)).collect::<Result<Vec<_>, _>>()?)
}

fn default_columns(p: usize) -> ColumnMeta {
    ColumnMeta { features: (1..=p).map(|i| format!("x{i}")).collect(), intercept: false, response: None, weight: None }
}

fn summary(fit: &FitResult<f64>) -> String {
    let param = match (fit.kind, fit.param) {
        (ModelKind::BoxCox, Some(c)) => format!(" c={c}"),
        (ModelKind::Ridge, Some(l)) => format!(" lambda={l}"),
        _ => String::new(),
    };
    format!(
        "model={}{} n={} p={} sigma2={} score={} generalized_inverse={}{}",
        fit.kind,
        param,
        fit.n,
        fit.p,
        fit.sigma2,
        fit.score,
        fit.used_generalized_inverse,
        if fit.degenerate { " degenerate=true" } else { "" }
    )
}

fn param_file(prefix: &str, v: f64) -> String {
    format!("model_{prefix}_{v}.json")
}

fn fit(a: FitArgs) -> CliResult {
    if a.data.is_empty() && a.ss.is_empty() {
        return Err(config_error("one of --data or --ss is required"));
    }
    if a.model == ModelArg::Ridge && a.grid.is_none() && a.lambda.is_none() {
        return Err(config_error("ridge fits need --lambda or --grid"));
    }
    if a.model != ModelArg::Ridge && a.lambda.is_some() {
        return Err(config_error("--lambda applies only to ridge models"));
    }
    let t0 = Instant::now();
    let mut passes: Vec<u64> = Vec::new();
    let (mut rows, mut batches) = (None, None);
    let artifact = if !a.data.is_empty() {
        let spec = stats_spec(a.model, a.grid.as_deref())?;
        let shards = open_shards(&a.data, &a.schema, a.model == ModelArg::Weighted)?;
        let (stats, metrics) = accumulate_shards(&shards, &spec, a.schema.batch_size, a.parallel)?;
        passes = shards.iter().map(Dataset::passes).collect();
        rows = Some(metrics.rows);
        batches = Some(metrics.batches);
        StatsArtifact { stats, columns: Some(ColumnMeta::from_schema(shards[0].schema())) }
    } else {
        for p in &a.ss {
            require_file(p)?;
        }
        let mut acc = read_ss(&a.ss[0])?;
        for path in &a.ss[1..] {
            acc = acc.combine(&read_ss(path)?, false)?;
        }
        acc
    };
    let scan_seconds = t0.elapsed().as_secs_f64();
    let columns = artifact.columns.clone().unwrap_or_else(|| default_columns(artifact.stats.p()));

    let t1 = Instant::now();
    let outcome = fit_stats(&a, &artifact.stats)?;
    let fit_seconds = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let models = match &outcome {
        Outcome::Single(f) => {
            let out = a.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
            write_model(&out, &ModelArtifact::from_fit(f, &columns))?;
            eprintln!("{}", summary(f));
            1
        }
        Outcome::BoxCox(fits, selected) => {
            let dir = grid_dir(&a)?;
            let entries: Vec<Value> = fits
                .iter()
                .map(|f| {
                    let file = param_file("c", f.c);
                    write_model(dir.join(&file), &ModelArtifact::from_fit(&f.fit, &columns))?;
                    Ok(json!({
                        "c": f.c,
                        "profile_loglik": score_json(f.profile_loglik),
                        "sigma2": f.fit.sigma2,
                        "degenerate": f.fit.degenerate,
                        "file": file,
                    }))
                })
                .collect::<CliResult<_>>()?;
            let best = &fits[*selected];
            write_model(dir.join("selected.json"), &ModelArtifact::from_fit(&best.fit, &columns))?;
            write_json(
                &dir.join("report.json"),
                &json!({
                    "model_kind": "boxcox",
                    "selection_rule": "max-profile-loglik; ties prefer smaller |c|",
                    "selected_c": best.c,
                    "selected_index": selected,
                    "used_generalized_inverse": best.fit.used_generalized_inverse,
                    "n": best.fit.n,
                    "p": best.fit.p,
                    "fits": entries,
                }),
            )?;
            eprintln!("fitted {} Box-Cox models; selected c={}", fits.len(), best.c);
            eprintln!("{}", summary(&best.fit));
            fits.len()
        }
        Outcome::Trace(trace) => {
            let dir = grid_dir(&a)?;
            let mut entries = Vec::new();
            for f in &trace.rows {
                let l = f.param.unwrap_or(0.0);
                let file = param_file("lambda", l);
                write_model(dir.join(&file), &ModelArtifact::from_fit(f, &columns))?;
                entries.push(json!({ "lambda": l, "score": score_json(f.score), "sigma2": f.sigma2, "file": file }));
            }
            write_model(dir.join("selected.json"), &ModelArtifact::from_fit(trace.selected(), &columns))?;
            write_trace_csv(&dir.join("ridge_trace.csv"), trace, &design_names(&columns))?;
            write_json(
                &dir.join("report.json"),
                &json!({
                    "model_kind": "ridge",
                    "selection_rule": RidgeTrace::<f64>::SELECTION_RULE,
                    "tau": trace.tau,
                    "selected_lambda": trace.selected_lambda,
                    "selected_index": trace.selected_index,
                    "warning": trace.warning,
                    "n": trace.selected().n,
                    "p": trace.selected().p,
                    "fits": entries,
                }),
            )?;
            if let Some(w) = &trace.warning {
                eprintln!("warning: {w}");
            }
            eprintln!("fitted {} ridge models; selected lambda={}", trace.rows.len(), trace.selected_lambda);
            eprintln!("{}", summary(trace.selected()));
            trace.rows.len()
        }
    };
    let write_seconds = t2.elapsed().as_secs_f64();

    if a.verbose {
        eprintln!(
            "{}",
            json!({
                "command": "fit",
                "passes": passes.iter().copied().max().unwrap_or(0),
                "passes_per_file": passes,
                "rows": rows,
                "batches": batches,
                "batch_size": a.schema.batch_size,
                "models": models,
                "seconds": { "scan": scan_seconds, "fit": fit_seconds, "write": write_seconds },
            })
        );
    }
    Ok(())
}

enum Outcome {
    Single(FitResult<f64>),
    BoxCox(Vec<ssreg::BoxCoxFit<f64>>, usize),
    Trace(RidgeTrace<f64>),
}

fn fit_stats(a: &FitArgs, stats: &AnyStats) -> CliResult<Outcome> {
    let wrong_kind = || config_error(format!("{} statistics cannot fit a {} model", stats.kind(), model_name(a.model)));
    Ok(match (a.model, stats) {
        (ModelArg::Linear, AnyStats::Linear(s)) => Outcome::Single(fit_linear(s)?),
        (ModelArg::Weighted, AnyStats::Weighted(s)) => Outcome::Single(fit_weighted(s)?),
        (ModelArg::Ridge, AnyStats::Linear(s)) => match (a.lambda, &a.grid) {
            (Some(l), _) => Outcome::Single(fit_ridge(s, l)?),
            (None, Some(g)) => Outcome::Trace(ridge_trace(s, &parse_grid(g)?, a.tau)?),
            (None, None) => unreachable!("checked before scanning"),
        },
        (ModelArg::Boxcox, AnyStats::BoxCox(s)) => {
            if let Some(g) = &a.grid {
                if parse_grid(g)? != s.grid() {
                    return Err(Error::GridMismatch.into());
                }
            }
            let fits = fit_boxcox_all(s)?;
            if fits.len() == 1 {
                Outcome::Single(fits.into_iter().next().unwrap().fit)
            } else {
                let best = select_boxcox(&fits)?;
                let idx = fits.iter().position(|f| std::ptr::eq(f, best)).unwrap();
                Outcome::BoxCox(fits, idx)
            }
        }
        _ => return Err(wrong_kind()),
    })
}

fn model_name(m: ModelArg) -> &'static str {
    match m {
        ModelArg::Linear => "linear",
        ModelArg::Weighted => "weighted",
        ModelArg::Boxcox => "boxcox",
        ModelArg::Ridge => "ridge",
    }
}

fn grid_dir(a: &FitArgs) -> CliResult<PathBuf> {
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from("fit_out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn score_json(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else if v < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

fn write_json(path: &Path, v: &Value) -> CliResult {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn design_names(c: &ColumnMeta) -> Vec<String> {
    let mut names = Vec::new();
    if c.intercept {
        names.push(ssreg::ingest::INTERCEPT_NAME.to_string());
    }
    names.extend(c.features.iter().cloned());
    names
}

fn write_trace_csv(path: &Path, trace: &RidgeTrace<f64>, names: &[String]) -> CliResult {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "lambda,score,sigma2")?;
    for name in names {
        write!(w, ",beta[{name}]")?;
    }
    writeln!(w)?;
    for f in &trace.rows {
        write!(w, "{},{},{}", f.param.unwrap_or(0.0), f.score, f.sigma2)?;
        for b in &f.beta {
            write!(w, ",{b}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult {
    require_file(&a.model)?;
    require_file(&a.data)?;
    let model = read_model(&a.model)?;
    let fit = model.to_fit()?;
    let spec = SchemaSpec {
        response: None,
        weight: None,
        features: Some(model.column_names.clone()),
        intercept: model.intercept_flag,
    };
    let dataset = Dataset::open(&a.data, &spec)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    writeln!(w, "prediction")?;
    predict_dataset(&fit, &dataset, a.batch_size, a.inverse_transform, |v| {
        writeln!(w, "{v}")?;
        Ok(())
    })?;
    w.flush()?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> CliResult {
    require_file(&a.pred)?;
    require_file(&a.truth)?;
    let pred = read_column(&a.pred, &a.pred_column)?;
    let truth = read_column(&a.truth, &a.response)?;
    println!("{}", mse(&truth, &pred)?);
    Ok(())
}

fn suffstats(c: SuffstatsCommand) -> CliResult {
    match c {
        SuffstatsCommand::Compute { model, data, schema, grid, out } => {
            let spec = stats_spec(model, grid.as_deref())?;
            let shards = open_shards(std::slice::from_ref(&data), &schema, model == ModelArg::Weighted)?;
            let (stats, metrics) = accumulate_shards(&shards, &spec, schema.batch_size, false)?;
            let artifact = StatsArtifact { stats, columns: Some(ColumnMeta::from_schema(shards[0].schema())) };
            write_ss(&out, &artifact)?;
            eprintln!("kind={} n={} p={} rows={}", artifact.stats.kind(), artifact.stats.n(), artifact.stats.p(), metrics.rows);
        }
        SuffstatsCommand::Merge { inputs, out } => {
            for p in &inputs {
                require_file(p)?;
            }
            let mut acc = read_ss(&inputs[0])?;
            for path in &inputs[1..] {
                acc = acc.combine(&read_ss(path)?, false)?;
            }
            write_ss(&out, &acc)?;
            eprintln!("kind={} n={} p={}", acc.stats.kind(), acc.stats.n(), acc.stats.p());
        }
        SuffstatsCommand::Subtract { full, part, out } => {
            require_file(&full)?;
            require_file(&part)?;
            let acc = read_ss(&full)?.combine(&read_ss(&part)?, true)?;
            write_ss(&out, &acc)?;
            eprintln!("kind={} n={} p={}", acc.stats.kind(), acc.stats.n(), acc.stats.p());
        }
    }
    Ok(())
}
