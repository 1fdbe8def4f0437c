use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dpmhp_core::datasets::{
    fig1_mixture, sample_call_center, sample_conditional_surrogate, sample_mixture, standard_normal_1d,
    surrogate_mixture, SURROGATE_FEATURES,
};
use dpmhp_core::evaluation::conditional_moment_curve;
use dpmhp_core::metrics::default_delta;
use dpmhp_core::quantizer::fit_hypotheses;
use dpmhp_core::rng::{derive_seed, stream};
use dpmhp_core::{train, Dataset, MhpModel, NetworkSpec, PointSet};
use serde::{Deserialize, Serialize};

use crate::config::{Config, DataKind, MetricKind};
use crate::error::{CliError, CliResult};
use crate::experiments::{self, all_passed, Check, CompareReport, ShareFile};
use crate::formats::{self, DatasetSidecar, Samples, SCHEMA_VERSION};
use crate::parallel;

#[derive(Debug, Parser)]
#[command(name = "dpmhp", version, about = "Distribution-preserving multiple hypotheses prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for evaluation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic dataset to CSV with a JSON sidecar.
    GenData {
        #[arg(long, value_enum)]
        kind: Option<DataKind>,
        #[arg(long)]
        k: Option<usize>,
        /// File stem; defaults to the dataset kind.
        #[arg(long)]
        name: Option<String>,
    },
    /// Place hypotheses directly on the labels of a dataset.
    FitQuantizer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        metric: Option<MetricKind>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        /// Samples used for the share report; defaults to the fitted data.
        #[arg(long)]
        assign: Option<PathBuf>,
    },
    /// Train an MHP network.
    TrainMhp {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        metric: Option<MetricKind>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a trained model on a test set.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Second model; writes the side-by-side NLL table.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Run the named experiments end to end and check their thresholds.
    Repro {
        #[arg(long, value_delimiter = ',', value_enum)]
        experiments: Option<Vec<Experiment>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    Fig1,
    Density,
    Callcenter,
    #[value(name = "table1-surrogate")]
    Table1Surrogate,
}

impl Experiment {
    pub const DEFAULT: [Experiment; 3] = [Experiment::Fig1, Experiment::Callcenter, Experiment::Table1Surrogate];

    fn dir_name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Density => "density",
            Experiment::Callcenter => "callcenter",
            Experiment::Table1Surrogate => "table1-surrogate",
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.render().to_string())),
    };
    run(cli)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = Config::load(cli.common.config.as_deref())?;
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        cfg.threads = Some(t);
    }
    let out = cli.common.out.as_path();
    match cli.command {
        Command::GenData { kind, k, name } => {
            if let Some(kind) = kind {
                cfg.gen_data.kind = kind;
            }
            if let Some(k) = k {
                cfg.gen_data.k = k;
            }
            let stem = name.unwrap_or_else(|| cfg.gen_data.kind.name().to_owned());
            gen_data(&cfg, out, &stem)
        }
        Command::FitQuantizer { data, metric, n, delta, assign } => {
            if let Some(m) = metric {
                cfg.quantizer.metric = m;
            }
            if let Some(n) = n {
                cfg.quantizer.n = n;
            }
            if delta.is_some() {
                cfg.quantizer.delta = delta;
            }
            fit_quantizer(&cfg, &data, assign.as_deref(), out)
        }
        Command::TrainMhp { data, metric, n, delta, epochs } => {
            if let Some(m) = metric {
                cfg.mhp.metric = m;
            }
            if let Some(n) = n {
                cfg.mhp.network.n_hypotheses = n;
            }
            if delta.is_some() {
                cfg.mhp.delta = delta;
            }
            if let Some(e) = epochs {
                cfg.mhp.train.epochs = e;
            }
            train_mhp(&cfg, &data, out)
        }
        Command::Eval { model, test, compare } => eval(&cfg, &model, &test, compare.as_deref(), out),
        Command::Repro { experiments } => {
            let list = experiments.unwrap_or_else(|| Experiment::DEFAULT.to_vec());
            repro(&cfg, &list, out)
        }
    }
}

pub fn gen_data(cfg: &Config, out: &Path, stem: &str) -> CliResult<()> {
    let g = &cfg.gen_data;
    let seed = cfg.seed;
    let (samples, parameters) = match g.kind {
        DataKind::CallCenter => (
            Samples::conditional(sample_call_center(&g.call_center, g.k, seed)?),
            serde_json::to_value(g.call_center).unwrap_or_default(),
        ),
        DataKind::Fig1 => {
            let m = fig1_mixture();
            (Samples::unconditional(sample_mixture(&m, g.k, seed)?), serde_json::to_value(m.components()).unwrap_or_default())
        }
        DataKind::Normal => {
            let m = standard_normal_1d();
            (Samples::unconditional(sample_mixture(&m, g.k, seed)?), serde_json::to_value(m.components()).unwrap_or_default())
        }
        DataKind::Surrogate => (Samples::conditional(sample_conditional_surrogate(g.k, seed)?), serde_json::Value::Null),
    };
    formats::ensure_dir(out)?;
    let csv = out.join(format!("{stem}.csv"));
    let side = DatasetSidecar {
        schema_version: SCHEMA_VERSION,
        kind: g.kind.name().to_owned(),
        k: g.k,
        seed,
        feature_dim: samples.feature_dim(),
        label_dim: samples.labels.dim(),
        parameters,
    };
    formats::write_dataset(&csv, &samples, &side)?;
    println!("wrote {} and {}", csv.display(), formats::sidecar_path(&csv).display());
    Ok(())
}

pub fn fit_quantizer(cfg: &Config, data: &Path, assign: Option<&Path>, out: &Path) -> CliResult<()> {
    let q = &cfg.quantizer;
    let labels = formats::read_dataset(data)?.labels;
    let delta = q.delta.unwrap_or_else(|| default_delta(&labels, cfg.seed));
    let metric = q.metric.with_delta(delta);
    let tc = q.train.build(metric, derive_seed(cfg.seed, "quantizer"));
    let hyps = fit_hypotheses(&labels, q.n, metric, &tc)?;
    let reference = match assign {
        Some(p) => formats::read_dataset(p)?.labels,
        None => labels,
    };
    let report = parallel::voronoi_shares(&hyps, &reference, cfg.threads())?;
    formats::ensure_dir(out)?;
    formats::write_hypotheses(&out.join("hypotheses.csv"), &hyps)?;
    formats::write_json(&out.join("shares.json"), &ShareFile::new(&report))?;
    println!(
        "{} N={} chi_square_vs_uniform={:.3} max/min share={:.3}",
        metric.name(),
        q.n,
        report.chi_square_vs_uniform,
        report.spread_ratio()
    );
    Ok(())
}

pub fn train_mhp(cfg: &Config, data_path: &Path, out: &Path) -> CliResult<()> {
    let m = &cfg.mhp;
    let data: Dataset = formats::read_dataset(data_path)?.into_dataset(data_path)?;
    for (want, got, what) in [(m.input_dim, data.feature_dim(), "input"), (m.label_dim, data.label_dim(), "label")] {
        if let Some(w) = want {
            if w != got {
                return Err(CliError::Data(format!("config {what}_dim is {w} but {} has {got}", data_path.display())));
            }
        }
    }
    let spec = NetworkSpec::new(
        data.feature_dim(),
        m.network.hidden.clone(),
        m.network.activation,
        m.network.n_hypotheses,
        data.label_dim(),
    )?;
    let delta = m.delta.unwrap_or_else(|| default_delta(&data.labels, cfg.seed));
    let tc = m.train.build(m.metric.with_delta(delta), derive_seed(cfg.seed, "train-mhp"));
    let outcome = train(&spec, &data, &tc)?;
    formats::ensure_dir(out)?;
    formats::write_model(&out.join("model.json"), &outcome.model)?;
    formats::write_history(&out.join("history.csv"), &outcome.history)?;
    println!(
        "{} trained {} epochs, final loss {:.6}",
        tc.metric.name(),
        outcome.history.len(),
        outcome.history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalShares {
    pub x: Vec<f64>,
    #[serde(flatten)]
    pub report: dpmhp_core::evaluation::ShareReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SharesFile {
    pub schema_version: u32,
    pub entries: Vec<ConditionalShares>,
}

/// Fresh draws from the conditional law at `x`, when the generator is known.
fn conditional_samples(cfg: &Config, kind: &str, x: &[f64], k: usize, seed: u64) -> CliResult<Option<PointSet>> {
    let mut r = stream(seed, "eval-shares");
    match kind {
        "call-center" if x.len() == 1 => {
            let m = cfg.eval.call_center;
            let ys: Vec<f64> = (0..k).map(|_| m.sample_y(x[0], &mut r)).collect();
            Ok(Some(PointSet::from_scalars(&ys)?))
        }
        "surrogate" if x.len() == SURROGATE_FEATURES => {
            Ok(Some(sample_mixture(&surrogate_mixture(x)?, k, derive_seed(seed, "eval-shares"))?))
        }
        _ => Ok(None),
    }
}

fn default_share_inputs(kind: &str) -> Vec<Vec<f64>> {
    match kind {
        "call-center" => vec![vec![6.5], vec![13.0], vec![19.5]],
        "surrogate" => vec![vec![0.0; SURROGATE_FEATURES]],
        _ => Vec::new(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NllFile {
    schema_version: u32,
    metric: String,
    norm: dpmhp_core::evaluation::NllReport,
    kde: dpmhp_core::evaluation::NllReport,
}

pub fn eval(cfg: &Config, model_path: &Path, test_path: &Path, compare: Option<&Path>, out: &Path) -> CliResult<()> {
    let model: MhpModel = formats::read_model(model_path)?;
    let test = formats::read_dataset(test_path)?.into_dataset(test_path)?;
    if model.spec().input_dim != test.feature_dim() || model.spec().label_dim != test.label_dim() {
        return Err(CliError::Data(format!(
            "model maps {} -> {} dimensions but {} has {} -> {}",
            model.spec().input_dim,
            model.spec().label_dim,
            test_path.display(),
            test.feature_dim(),
            test.label_dim()
        )));
    }
    let other = compare.map(formats::read_model).transpose()?;
    if let Some(o) = &other {
        if o.spec().input_dim != test.feature_dim() || o.spec().label_dim != test.label_dim() {
            return Err(CliError::Data("comparison model does not match the test set dimensions".into()));
        }
    }
    formats::ensure_dir(out)?;
    let threads = cfg.threads();
    let bw = cfg.eval.bandwidth;
    let (norm, kde) = parallel::conditional_nll(&model, &test, bw, threads)?;
    let name = model.metric.name();
    formats::write_json(
        &out.join("nll.json"),
        &NllFile {
            schema_version: SCHEMA_VERSION,
            metric: name.to_owned(),
            norm: norm.clone(),
            kde: kde.clone(),
        },
    )?;
    println!("{name}: NLL norm {:.4} kde {:.4}", norm.nll_per_sample, kde.nll_per_sample);

    if model.spec().input_dim == 1 && model.spec().label_dim == 1 {
        let rows = conditional_moment_curve(&model, &cfg.eval.x_grid.values(), &cfg.eval.call_center)?;
        formats::write_moment_curve(&out.join("moments.csv"), &rows)?;
    }

    let kind = formats::read_sidecar(test_path).map(|s| s.kind).unwrap_or_default();
    let inputs = if cfg.eval.share_inputs.is_empty() {
        default_share_inputs(&kind)
    } else {
        cfg.eval.share_inputs.clone()
    };
    let mut entries = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        if x.len() != model.spec().input_dim {
            return Err(CliError::Usage(format!("share input {i} has {} coordinates", x.len())));
        }
        let seed = derive_seed(cfg.seed.wrapping_add(i as u64), "eval-shares");
        if let Some(samples) = conditional_samples(cfg, &kind, x, cfg.eval.share_samples, seed)? {
            let hyps = model.forward(x)?;
            entries.push(ConditionalShares {
                x: x.clone(),
                report: parallel::voronoi_shares(&hyps, &samples, threads)?,
            });
        }
    }
    if !entries.is_empty() {
        formats::write_json(&out.join("shares.json"), &SharesFile { schema_version: SCHEMA_VERSION, entries })?;
    }

    if let Some(o) = other {
        let second = parallel::conditional_nll(&o, &test, bw, threads)?;
        let rows = CompareReport::new(&[(name, (norm, kde)), (o.metric.name(), second)]);
        formats::write_json(&out.join("compare.json"), &rows)?;
        for r in &rows.rows {
            println!("{:>4}  norm {:.4}  kde {:.4}", r.metric, r.norm, r.kde);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReproSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub passed: bool,
    pub experiments: Vec<ExperimentSummary>,
}

pub fn repro(cfg: &Config, list: &[Experiment], out: &Path) -> CliResult<()> {
    formats::ensure_dir(out)?;
    formats::write_json(&out.join("config.json"), cfg)?;
    let threads = cfg.threads();
    let mut summaries = Vec::with_capacity(list.len());
    for &exp in list {
        let dir = out.join(exp.dir_name());
        formats::ensure_dir(&dir)?;
        let started = Instant::now();
        let checks = match exp {
            Experiment::Fig1 => experiments::fig1(&cfg.fig1, cfg.seed, threads, Some(&dir))?.checks,
            Experiment::Density => experiments::density_exponent(&cfg.density, cfg.seed, Some(&dir))?.checks,
            Experiment::Callcenter => experiments::call_center(&cfg.callcenter, cfg.seed, Some(&dir))?.checks,
            Experiment::Table1Surrogate => experiments::table1(&cfg.table1, cfg.seed, threads, Some(&dir))?.checks,
        };
        for c in &checks {
            println!("{} {}: {} ({})", if c.passed { "PASS" } else { "FAIL" }, exp.dir_name(), c.name, c.detail);
        }
        eprintln!("{} finished in {:.1?}", exp.dir_name(), started.elapsed());
        summaries.push(ExperimentSummary {
            name: exp.dir_name().to_owned(),
            passed: all_passed(&checks),
            checks,
        });
    }
    let passed = summaries.iter().all(|s| s.passed);
    formats::write_json(
        &out.join("summary.json"),
        &ReproSummary {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            passed,
            experiments: summaries,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Numerical("one or more acceptance thresholds failed; see summary.json".into()))
    }
}
