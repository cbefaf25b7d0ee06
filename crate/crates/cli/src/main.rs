use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaugerisk::geometry::{self, DispersionOptions, FanoInputs, RateBreakdown};
use gaugerisk::harness::{self, ExperimentConfig, Format, Report};
use gaugerisk::matcore::{fmt_real, svd_values, Matrix, Seed};
use gaugerisk::models;
use gaugerisk::{gauges::GaugeContext, Error, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "gaugerisk", version, about = "Matrix norms, minimax rates and Monte Carlo risk experiments")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (a directory for `construct`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Experiment configuration (JSON) for `risk` commands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gauge and matrix norm evaluation.
    Norm {
        #[command(subcommand)]
        action: NormAction,
    },
    /// Minimax rate formulas.
    Rate(RateArgs),
    /// Kullback-Leibler divergences between two parameters.
    Kl(KlArgs),
    /// Monte Carlo risk experiments.
    Risk {
        #[command(subcommand)]
        action: RiskAction,
    },
    /// Monte Carlo Gaussian width of a unit norm ball.
    Width(WidthArgs),
    /// The Fano constant, and optionally a Fano lower bound.
    Fano(FanoArgs),
    /// Dispersion matrices and packing families.
    Construct {
        #[command(subcommand)]
        action: ConstructAction,
    },
}

#[derive(Subcommand)]
enum NormAction {
    /// Evaluates a gauge on a vector or the induced norm of a matrix.
    Eval {
        #[arg(long)]
        gauge: String,
        /// Matrix file (`.csv`, or JSON `{rows, cols, entries}`).
        #[arg(long, conflicts_with = "values")]
        matrix: Option<PathBuf>,
        /// Comma-separated vector.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RateKind {
    Oracle,
    Submatrix,
    Covariance,
    Poisson,
    Completion,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long, value_enum)]
    kind: RateKind,
    #[arg(long)]
    gauge: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KlKind {
    GaussianMean,
    Covariance,
    Poisson,
    Completion,
}

#[derive(Args)]
struct KlArgs {
    #[arg(long, value_enum)]
    kind: KlKind,
    /// First parameter (matrix file).
    #[arg(long)]
    first: PathBuf,
    /// Second parameter (matrix file).
    #[arg(long)]
    second: PathBuf,
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of sampled entries (completion).
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum RiskAction {
    /// Runs the experiment in `--config`.
    Run,
    /// Repeats the experiment in `--config` along one parameter axis.
    Sweep {
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct WidthArgs {
    #[arg(long)]
    gauge: String,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
}

#[derive(Args)]
struct FanoArgs {
    /// Dimension for the Fano constant.
    #[arg(long)]
    d: u64,
    #[arg(long, requires_all = ["dkl", "log_packing"])]
    epsilon: Option<f64>,
    /// KL diameter in nats.
    #[arg(long)]
    dkl: Option<f64>,
    /// Log packing number in nats.
    #[arg(long)]
    log_packing: Option<f64>,
}

#[derive(Subcommand)]
enum ConstructAction {
    /// Dispersion matrix for `--matrix`, or for the identity of size `--identity`.
    Dispersion {
        #[arg(long, conflicts_with = "identity")]
        matrix: Option<PathBuf>,
        #[arg(long)]
        identity: Option<usize>,
        /// Comma-separated gauges to certify.
        #[arg(long, value_delimiter = ',', default_value = "S1,S2,Sinf")]
        gauges: Vec<String>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Packing of sparse unit-Frobenius matrices.
    Packing {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        gauge: String,
    },
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        Matrix::from_csv(&text)
    } else {
        Matrix::from_json(&text)
    }
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("--{flag} is required here")))
}

fn gauge(name: &str, dim: usize) -> Result<GaugeContext> {
    GaugeContext::parse(name, dim)
}

/// Flattens a JSON object into one header line and one value line.
fn flat_csv(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect();
                out.push((prefix.to_string(), parts.join(";")));
            }
            other => out.push((prefix.to_string(), scalar(other))),
        }
    }
    fn scalar(v: &Value) -> String {
        match v {
            Value::Number(n) => n.as_f64().filter(|_| n.is_f64()).map(fmt_real).unwrap_or_else(|| n.to_string()),
            Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            other => other.to_string(),
        }
    }
    let mut cells = Vec::new();
    walk("", value, &mut cells);
    let (head, row): (Vec<String>, Vec<String>) = cells.into_iter().unzip();
    format!("{}\n{}\n", head.join(","), row.join(","))
}

struct Output {
    path: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn write(&self, text: &str) -> Result<()> {
        match &self.path {
            Some(path) => std::fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }

    fn value(&self, value: &Value) -> Result<()> {
        match self.format {
            Format::Json => self.write(&(serde_json::to_string_pretty(value)? + "\n")),
            Format::Csv => self.write(&flat_csv(value)),
        }
    }

    fn report(&self, report: &Report) -> Result<()> {
        self.write(&harness::render_report(report, self.format)?)
    }

    /// Writes `manifest` plus one CSV per matrix into the output directory, or
    /// the manifest alone to stdout.
    fn construction(&self, manifest: Value, matrices: &[(String, &Matrix)]) -> Result<()> {
        let Some(dir) = &self.path else {
            return self.value(&manifest);
        };
        std::fs::create_dir_all(dir)?;
        for (name, m) in matrices {
            std::fs::write(dir.join(name), m.to_csv())?;
        }
        let mut manifest = manifest;
        manifest["files"] = json!(matrices.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}

fn rate(args: &RateArgs) -> Result<RateBreakdown> {
    let s = args.s.unwrap_or(args.k);
    match args.kind {
        RateKind::Oracle => geometry::rate_oracle_mean(&gauge(&args.gauge, args.k.min(s))?, args.k, s, args.sigma),
        RateKind::Submatrix => {
            let (p, m) = (need(args.p, "p")?, need(args.m, "m")?);
            let breakdown = geometry::rate_submatrix(&gauge(&args.gauge, args.k.min(s))?, args.k, s, p, m)?;
            Ok(breakdown.scaled(args.sigma * args.sigma, "sigma^2"))
        }
        RateKind::Covariance => geometry::rate_covariance(&gauge(&args.gauge, args.k)?, args.k, need(args.n, "n")?, need(args.lambda, "lambda")?),
        RateKind::Poisson => geometry::rate_poisson(&gauge(&args.gauge, args.k.min(s))?, args.k, s, need(args.lambda, "lambda")?),
        RateKind::Completion => geometry::rate_completion(
            &gauge(&args.gauge, args.k.min(s))?,
            args.k,
            s,
            need(args.r, "r")?,
            need(args.n, "n")?,
            args.sigma,
            need(args.a, "a")?,
        ),
    }
}

fn kl(args: &KlArgs) -> Result<Value> {
    let (a, b) = (read_matrix(&args.first)?, read_matrix(&args.second)?);
    Ok(match args.kind {
        KlKind::GaussianMean => json!(models::kl_gaussian_mean(&a, &b, need(args.sigma, "sigma")?)?),
        KlKind::Covariance => json!(models::kl_covariance(&a, &b)?),
        KlKind::Poisson => {
            let exact = models::kl_poisson(&a, &b)?;
            json!({ "value": exact.value, "exact": exact.exact, "chi_square_bound": models::poisson_chi_square(&a, &b)? })
        }
        KlKind::Completion => {
            let kl = models::kl_completion_upper(&a, &b, need(args.n, "n")?, need(args.sigma, "sigma")?)?;
            json!({ "value": kl.bound.value, "exact": kl.bound.exact, "loose_bound": kl.loose_bound })
        }
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = need(cli.config.as_ref(), "config")?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(master) = cli.seed {
        config.seed = Seed::new(master, 0);
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    let format: Format = cli.format.parse()?;
    let seed = Seed::new(cli.seed.unwrap_or(0), 0);
    let out = Output { path: cli.out.clone(), format };
    if cli.config.is_some() && !matches!(cli.command, Command::Risk { .. }) {
        return Err(Error::Config("--config only applies to risk commands".into()));
    }
    match &cli.command {
        Command::Norm { action: NormAction::Eval { gauge: name, matrix, values } } => {
            let value = match (matrix, values) {
                (Some(path), None) => {
                    let a = read_matrix(path)?;
                    let ctx = gauge(name, a.min_dim())?;
                    json!({ "gauge": name, "dim": ctx.dim(), "norm": ctx.norm(&a)?, "singular_values": svd_values(&a)? })
                }
                (None, Some(x)) => {
                    let ctx = gauge(name, x.len())?;
                    json!({ "gauge": name, "dim": ctx.dim(), "norm": ctx.eval(x)? })
                }
                _ => return Err(Error::Config("give exactly one of --matrix or --values".into())),
            };
            out.value(&value)
        }
        Command::Rate(args) => out.value(&json!(rate(args)?)),
        Command::Kl(args) => out.value(&kl(args)?),
        Command::Risk { action } => {
            let config = load_config(cli)?;
            let out = Output { path: cli.out.clone().or_else(|| config.output_path.clone().map(PathBuf::from)), format };
            match action {
                RiskAction::Run => out.report(&Report::Risk(harness::run_risk(&config)?)),
                RiskAction::Sweep { axis, values } => {
                    let table = harness::sweep(&config, axis, values)?;
                    if let Ok(fit) = harness::fit_slope(&table) {
                        eprintln!("log-log slope {:.4} (stderr {:.4})", fit.slope, fit.stderr);
                    }
                    out.report(&Report::Sweep(table))
                }
            }
        }
        Command::Width(args) => {
            let ctx = gauge(&args.gauge, args.k.min(args.s))?;
            let (mean, stderr) = geometry::gaussian_width_mc(&ctx, args.k, args.s, args.reps, seed)?;
            out.value(&json!({ "gauge": args.gauge, "k": args.k, "s": args.s, "reps": args.reps, "mean": mean, "stderr": stderr }))
        }
        Command::Fano(args) => {
            let mut value = json!({ "d": args.d, "constant": geometry::fano_constant(args.d)? });
            if let (Some(epsilon), Some(dkl), Some(log_packing)) = (args.epsilon, args.dkl, args.log_packing) {
                let inputs = FanoInputs { epsilon, dkl_diameter: dkl, log_packing };
                value["probability"] = json!(geometry::fano_probability(&inputs)?);
                value["bound"] = json!(geometry::fano_bound(&inputs)?);
            }
            out.value(&value)
        }
        Command::Construct { action: ConstructAction::Dispersion { matrix, identity, gauges, trials } } => {
            let d = match (matrix, identity) {
                (Some(path), None) => read_matrix(path)?,
                (None, Some(n)) => Matrix::identity(*n),
                _ => return Err(Error::Config("give exactly one of --matrix or --identity".into())),
            };
            let contexts = gauges.iter().map(|g| gauge(g, d.min_dim())).collect::<Result<Vec<_>>>()?;
            let opts = DispersionOptions { num_trials: *trials, ..DispersionOptions::default() };
            let result = geometry::construct_dispersion(&d, &contexts, seed, opts)?;
            let manifest = json!({
                "construction": "dispersion",
                "rows": result.w.rows(),
                "cols": result.w.cols(),
                "c0": result.c0,
                "j_removed": result.j_removed,
                "frobenius_w": result.w.frobenius_norm(),
                "frobenius_d": d.frobenius_norm(),
                "certificate": result.certificate,
            });
            out.construction(manifest, &[("w.csv".to_string(), &result.w)])
        }
        Command::Construct { action: ConstructAction::Packing { p, m, k, s, gauge: name } } => {
            let ctx = gauge(name, (*p).min(*m))?;
            let family = geometry::construct_packing(*p, *m, *k, *s, &ctx, seed)?;
            let manifest = json!({
                "construction": "packing",
                "members": family.members.len(),
                "gauge": family.gauge,
                "branch": family.branch,
                "min_pairwise_norm": family.min_pairwise_norm,
                "log_cardinality": family.log_cardinality,
                "c1": family.c1,
                "lipschitz": family.lipschitz,
            });
            let files: Vec<(String, &Matrix)> =
                family.members.iter().enumerate().map(|(i, m)| (format!("member_{i:04}.csv"), m)).collect();
            out.construction(manifest, &files)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
