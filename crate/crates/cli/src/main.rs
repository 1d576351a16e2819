mod config;
mod error;
mod input;
mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use countrate::datagen::{
    gen_graded_pairs, gen_panel, load_m5, naive_one_day_model, simple_28_day_model, DateRange,
    GenSpec, RateLaw,
};
use countrate::reference::log_grid;
use countrate::{Grade, MetricKind, PredictionPair, Rater, ReferenceEngine, TruncationPolicy};

use config::{RunConfig, SubPoissonSetting};
use error::CliError;
use report::{GroupReport, InputSummary, RatingReport, ToolInfo};

#[derive(Parser)]
#[command(name = "countrate", version, about = "Rate count forecasts against Poisson-noise references")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate a CSV of (id, prediction, actual) pairs.
    Evaluate(EvaluateArgs),
    /// Write a synthetic pairs CSV.
    Simulate(SimulateArgs),
    /// Export reference curves per metric and grade.
    Curves(CurvesArgs),
}

#[derive(Args)]
struct RatingFlags {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_bins: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    /// Comma-separated list, e.g. MAE,RMRPS.
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<MetricKind>>,
}

impl RatingFlags {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(v) = self.n_bins {
            cfg.n_bins = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.clip {
            cfg.clip = v;
        }
        if let Some(v) = &self.metrics {
            cfg.metrics = v.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Extra input columns to rate separately (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    group_by: Vec<String>,
    #[arg(long)]
    noise_metric: Option<MetricKind>,
    /// "flag" or a critical score in [0, 100].
    #[arg(long)]
    sub_poissonian: Option<SubPoissonSetting>,
    /// Full precision numbers instead of 6 significant digits.
    #[arg(long)]
    raw: bool,
    /// Also write SVG plots per group.
    #[arg(long)]
    svg: bool,
    #[command(flatten)]
    rating: RatingFlags,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Model {
    /// Predictions are the true rates; Poisson actuals.
    Poisson,
    /// Predictions are the true rates; gamma-Poisson actuals of --grade.
    Graded,
    /// Yesterday's count on a simulated (or M5) panel.
    Naive1d,
    /// Trailing 28-day weekday average on a simulated (or M5) panel.
    Simple28,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    n_series: usize,
    /// Fixed rate for every series; otherwise log-uniform between the bounds.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    rate_low: f64,
    #[arg(long, default_value_t = 50.0)]
    rate_high: f64,
    #[arg(long)]
    grade: Option<Grade>,
    #[arg(long, default_value_t = 1.0)]
    bias: f64,
    /// Panel length for the time-series models.
    #[arg(long, default_value_t = 56)]
    days: usize,
    #[arg(long, default_value_t = 28)]
    horizon: usize,
    /// Use the M5 files in this directory instead of a simulated panel.
    #[arg(long)]
    m5_dir: Option<PathBuf>,
    /// First day (ISO date) loaded from M5.
    #[arg(long)]
    from: Option<String>,
    /// Last day (ISO date) loaded from M5.
    #[arg(long)]
    to: Option<String>,
    #[command(flatten)]
    rating: RatingFlags,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    rate_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    rate_max: f64,
    #[arg(long, default_value_t = 25)]
    points: usize,
    #[arg(long)]
    raw: bool,
    #[command(flatten)]
    rating: RatingFlags,
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let mut cfg = args.rating.run_config()?;
    if !args.group_by.is_empty() {
        cfg.group_by = args.group_by.clone();
    }
    if let Some(k) = args.noise_metric {
        cfg.noise_metric = k;
    }
    if let Some(s) = args.sub_poissonian {
        cfg.sub_poissonian = s;
    }
    if let Some(d) = &args.output_dir {
        cfg.output_dir = d.clone();
    }
    let rater = Rater::new(cfg.validate()?)?;

    let pairs = input::read_pairs(&args.input, &cfg.group_by)?;
    let n_pairs = pairs.len();
    let groups = input::split_groups(pairs);
    let mut reports = Vec::with_capacity(groups.len());
    for (labels, pairs) in groups {
        let rating = rater.rate(&pairs)?;
        reports.push(GroupReport::new(labels, &rating));
    }
    let report = RatingReport {
        schema_version: report::SCHEMA_VERSION,
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        input: InputSummary {
            source: args.input.display().to_string(),
            n_pairs,
            n_clipped: reports.iter().map(|g| g.n_clipped).sum(),
            total_prediction: reports.iter().map(|g| g.total_prediction).sum(),
            total_actual: reports.iter().map(|g| g.total_actual).sum(),
            n_groups: reports.len(),
        },
        config: cfg.clone(),
        groups: reports,
    };

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    report::write_atomic(&dir.join("report.json"), report::report_json(&report, args.raw)?.as_bytes())?;
    report::write_atomic(&dir.join("buckets.csv"), &report::buckets_csv(&report, args.raw)?)?;
    report::write_atomic(&dir.join("plot_metrics.csv"), &report::plot_metrics_csv(&report, args.raw)?)?;
    report::write_atomic(
        &dir.join("plot_bias.csv"),
        &report::plot_bias_csv(&report, cfg.bias_plot_clip, args.raw)?,
    )?;
    if args.svg {
        write_svgs(&report, dir, cfg.bias_plot_clip)?;
    }
    for g in &report.groups {
        let o = &g.overall;
        println!(
            "{}: noise {} ({}), bias {} ({}), bias factor {}",
            g.name,
            o.noise_score.map_or("n/a".into(), |s| format!("{s:.1}")),
            o.noise_grade.map_or("n/a", |g| g.name()),
            o.bias_score.map_or("n/a".into(), |s| format!("{s:.1}")),
            o.bias_grade.map_or("n/a", |g| g.name()),
            o.bias_factor.map_or("n/a".into(), |f| format!("{f:.4}")),
        );
    }
    Ok(())
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn write_svgs(report: &RatingReport, dir: &Path, bias_clip: f64) -> Result<(), CliError> {
    for g in &report.groups {
        let noise = g.overall.noise_metric;
        let mut refs: Vec<svg::Line> = Grade::ALL
            .iter()
            .map(|grade| svg::Line {
                label: grade.name().into(),
                points: Vec::new(),
            })
            .collect();
        let mut points = Vec::new();
        for b in &g.buckets {
            let Some(m) = b.metrics.iter().find(|m| m.metric == noise) else { continue };
            for (line, value) in refs.iter_mut().zip(m.references.to_array()) {
                line.points.push((b.center_rate, value));
            }
            if let Some(y) = m.achieved {
                points.push(svg::Point { x: b.center_rate, y, weight: b.weight });
            }
        }
        let plot = svg::Plot {
            title: format!("{noise} per bucket, {}", g.name),
            y_label: noise.to_string(),
            log_y: true,
            y_range: None,
            points,
            lines: refs,
        };
        report::write_atomic(&dir.join(format!("noise_{}.svg", slug(&g.name))), svg::render(&plot).as_bytes())?;

        let points = g
            .buckets
            .iter()
            .filter_map(|b| {
                Some(svg::Point {
                    x: b.center_rate,
                    y: b.bias_factor?.clamp(1.0 / bias_clip, bias_clip),
                    weight: b.weight,
                })
            })
            .collect();
        let xs: Vec<f64> = g.buckets.iter().map(|b| b.center_rate).collect();
        let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        let plot = svg::Plot {
            title: format!("bias factor per bucket, {}", g.name),
            y_label: "bias factor".into(),
            log_y: true,
            y_range: Some((1.0 / bias_clip, bias_clip)),
            points,
            lines: vec![svg::Line {
                label: "unbiased".into(),
                points: vec![(lo, 1.0), (hi, 1.0)],
            }],
        };
        report::write_atomic(&dir.join(format!("bias_{}.svg", slug(&g.name))), svg::render(&plot).as_bytes())?;
    }
    Ok(())
}

fn write_pairs(path: &Path, pairs: &[PredictionPair]) -> Result<(), CliError> {
    let group_cols: Vec<String> = pairs
        .first()
        .map(|p| p.groups.keys().cloned().collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io(e.to_string());
    let mut header = vec!["id".to_string(), "prediction".into(), "actual".into()];
    header.extend(group_cols.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for p in pairs {
        let mut row = vec![p.id.clone(), format!("{}", p.prediction), p.actual.to_string()];
        row.extend(group_cols.iter().map(|c| p.groups.get(c).cloned().unwrap_or_default()));
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    report::write_atomic(path, &bytes)
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = args.rating.run_config()?;
    cfg.validate()?;
    let ladder = cfg.ladder()?;
    let spec = GenSpec {
        seed: args.seed.unwrap_or(cfg.seed),
        n_series: args.n_series,
        rate_law: match args.rate {
            Some(r) => RateLaw::Fixed(r),
            None => RateLaw::LogUniform {
                low: args.rate_low,
                high: args.rate_high,
            },
        },
        grade: args.grade,
        bias_multiplier: args.bias,
    };
    let pairs = match args.model {
        Model::Poisson => {
            if args.grade.is_some_and(|g| g != Grade::Perfect) {
                return Err(CliError::config("--model poisson takes no --grade; use --model graded"));
            }
            gen_graded_pairs(&spec, &ladder)?
        }
        Model::Graded => {
            if args.grade.is_none() {
                return Err(CliError::config("--model graded needs --grade"));
            }
            gen_graded_pairs(&spec, &ladder)?
        }
        Model::Naive1d | Model::Simple28 => {
            let panel = match &args.m5_dir {
                Some(dir) => {
                    let range = match (&args.from, &args.to) {
                        (Some(a), Some(b)) => Some(DateRange::new(a.clone(), b.clone())),
                        (None, None) => None,
                        _ => return Err(CliError::config("--from and --to go together")),
                    };
                    load_m5(dir, range.as_ref())?
                }
                None => gen_panel(&spec, args.days, None, &ladder)?.panel,
            };
            if args.model == Model::Naive1d {
                if panel.n_days() < 2 {
                    return Err(CliError::config("the naive model needs at least 2 days"));
                }
                naive_one_day_model(&panel)
            } else {
                simple_28_day_model(&panel, args.horizon)?
            }
        }
    };
    write_pairs(&args.output, &pairs)?;
    println!("wrote {} pairs to {}", pairs.len(), args.output.display());
    Ok(())
}

fn curves(args: CurvesArgs) -> Result<(), CliError> {
    let cfg = args.rating.run_config()?;
    cfg.validate()?;
    let ladder = cfg.ladder()?;
    let grid = log_grid(args.rate_min, args.rate_max, args.points)?;
    if let Some(r) = grid.iter().find(|r| **r > countrate::dist::MAX_RATE) {
        return Err(CliError::config(format!("rate {r} exceeds the supported maximum of 1e5")));
    }
    let engine = ReferenceEngine::new(ladder, TruncationPolicy::default());
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io(e.to_string());
    w.write_record(["metric", "grade", "rate", "variance", "value"]).map_err(io)?;
    for &kind in &cfg.metrics {
        for grade in Grade::ALL {
            let curve = engine.reference_curve(kind, grade, &grid)?;
            for p in curve.points {
                w.write_record([
                    kind.to_string(),
                    grade.name().to_string(),
                    report::fmt_num(p.rate, args.raw),
                    report::fmt_num(ladder.grade_variance(grade, p.rate), args.raw),
                    report::fmt_num(p.value, args.raw),
                ])
                .map_err(io)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    report::write_atomic(&args.output, &bytes)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(a) => evaluate(a),
        Command::Simulate(a) => simulate(a),
        Command::Curves(a) => curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
