//! Named experiments. Each one generates its data from the master seed,
//! fits or trains both metrics with identical settings, evaluates, and
//! returns a report whose `checks` list the pass/fail thresholds. When an
//! output directory is given, all artifacts are written there.

use std::path::Path;

use dpmhp_core::datasets::{
    fig1_mixture, sample_call_center, sample_conditional_surrogate, sample_mixture, standard_normal_1d,
};
use dpmhp_core::evaluation::{
    conditional_moment_curve, density_exponent_ks, moment_curve_errors, moment_probe_gap, MomentProbe, MomentRow,
    NllReport, ShareReport,
};
use dpmhp_core::metrics::default_delta;
use dpmhp_core::quantizer::fit_hypotheses;
use dpmhp_core::rng::derive_seed;
use dpmhp_core::{train, Dataset, HypothesisSet, NetworkSpec, PointSet, WtaMetric};
use serde::{Deserialize, Serialize};

use crate::config::{CallCenterConfig, DensityConfig, Fig1Config, NetworkSettings, Table1Config};
use crate::error::{CliError, CliResult};
use crate::formats::{self, DatasetSidecar, Samples, SCHEMA_VERSION};
use crate::parallel;

/// One pass/fail threshold of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn less(name: &str, lhs_name: &str, lhs: f64, rhs_name: &str, rhs: f64) -> Self {
        let passed = lhs < rhs;
        let op = if passed { "<" } else { ">=" };
        Check {
            name: name.to_owned(),
            passed,
            detail: format!("{lhs_name} = {lhs:.6} {op} {rhs_name} = {rhs:.6}"),
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn both_metrics(delta: f64) -> [WtaMetric; 2] {
    [WtaMetric::SquaredEuclidean, WtaMetric::LogDistance { delta }]
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sidecar(kind: &str, k: usize, seed: u64, feature_dim: usize, label_dim: usize, parameters: serde_json::Value) -> DatasetSidecar {
    DatasetSidecar {
        schema_version: SCHEMA_VERSION,
        kind: kind.to_owned(),
        k,
        seed,
        feature_dim,
        label_dim,
        parameters,
    }
}

fn network_spec(net: &NetworkSettings, input_dim: usize, label_dim: usize) -> CliResult<NetworkSpec> {
    Ok(NetworkSpec::new(input_dim, net.hidden.clone(), net.activation, net.n_hypotheses, label_dim)?)
}

// ---------------------------------------------------------------------------
// Unconditional placement on the three-component mixture

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareSummary {
    pub chi_square_vs_uniform: f64,
    pub fraction_in_band: f64,
    pub spread_ratio: f64,
    /// `|mean_i y_i[j]² − E y[j]²|` for `j = 0, 1`.
    pub second_moment_gaps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Run {
    pub seed: u64,
    pub delta: f64,
    pub l2: ShareSummary,
    pub ldp: ShareSummary,
    pub chi_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Report {
    pub schema_version: u32,
    pub n: usize,
    pub runs: Vec<Fig1Run>,
    pub median_ldp_fraction_in_band: f64,
    pub median_chi_ratio: f64,
    pub checks: Vec<Check>,
}

fn summarize(hyps: &HypothesisSet, report: &ShareReport, reference: &PointSet) -> CliResult<ShareSummary> {
    let gaps = (0..hyps.dim())
        .map(|index| moment_probe_gap(hyps, &MomentProbe::SecondMoment { index }, reference))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ShareSummary {
        chi_square_vs_uniform: report.chi_square_vs_uniform,
        fraction_in_band: report.fraction_within(0.5, 2.0),
        spread_ratio: report.spread_ratio(),
        second_moment_gaps: gaps,
    })
}

pub fn fig1(cfg: &Fig1Config, seed: u64, threads: usize, out: Option<&Path>) -> CliResult<Fig1Report> {
    if cfg.seeds == 0 {
        return Err(CliError::Usage("fig1 needs at least one seed".into()));
    }
    let mixture = fig1_mixture();
    let mut runs = Vec::with_capacity(cfg.seeds);
    for i in 0..cfg.seeds as u64 {
        let run_seed = derive_seed(seed.wrapping_add(i), "fig1-run");
        let train_set = sample_mixture(&mixture, cfg.train_samples, derive_seed(run_seed, "fig1-train"))?;
        let assign = sample_mixture(&mixture, cfg.assignment_samples, derive_seed(run_seed, "fig1-assign"))?;
        let delta = default_delta(&train_set, run_seed);
        let mut summaries = Vec::with_capacity(2);
        for metric in both_metrics(delta) {
            let tc = cfg.quantizer.build(metric, derive_seed(run_seed, "fig1-quantizer"));
            let hyps = fit_hypotheses(&train_set, cfg.n, metric, &tc)?;
            let report = parallel::voronoi_shares(&hyps, &assign, threads)?;
            if let (Some(dir), 0) = (out, i) {
                formats::write_hypotheses(&dir.join(format!("hypotheses_{}.csv", metric.name())), &hyps)?;
                formats::write_json(&dir.join(format!("shares_{}.json", metric.name())), &ShareFile::new(&report))?;
            }
            summaries.push(summarize(&hyps, &report, &assign)?);
        }
        if let (Some(dir), 0) = (out, i) {
            let side = sidecar("fig1", cfg.train_samples, derive_seed(run_seed, "fig1-train"), 0, 2, serde_json::to_value(mixture.components()).unwrap_or_default());
            formats::write_dataset(&dir.join("train.csv"), &Samples::unconditional(train_set.clone()), &side)?;
        }
        let ldp = summaries.pop().expect("two summaries");
        let l2 = summaries.pop().expect("two summaries");
        runs.push(Fig1Run {
            seed: run_seed,
            delta,
            chi_ratio: ldp.chi_square_vs_uniform / l2.chi_square_vs_uniform,
            l2,
            ldp,
        });
    }
    let fractions: Vec<f64> = runs.iter().map(|r| r.ldp.fraction_in_band).collect();
    let ratios: Vec<f64> = runs.iter().map(|r| r.chi_ratio).collect();
    let (med_fraction, med_ratio) = (median(&fractions), median(&ratios));
    let checks = vec![
        Check {
            name: "ldp shares in [0.5/N, 2/N]".into(),
            passed: med_fraction >= cfg.min_fraction_in_band,
            detail: format!(
                "median fraction {med_fraction:.4} {} {}",
                if med_fraction >= cfg.min_fraction_in_band { ">=" } else { "<" },
                cfg.min_fraction_in_band
            ),
        },
        Check::less("ldp chi-square well below l2", "median chi ratio", med_ratio, "limit", cfg.max_chi_ratio),
    ];
    let report = Fig1Report {
        schema_version: SCHEMA_VERSION,
        n: cfg.n,
        runs,
        median_ldp_fraction_in_band: med_fraction,
        median_chi_ratio: med_ratio,
        checks,
    };
    if let Some(dir) = out {
        formats::write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

/// A [`ShareReport`] tagged with the schema version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShareFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: ShareReport,
}

impl ShareFile {
    pub fn new(report: &ShareReport) -> Self {
        ShareFile {
            schema_version: SCHEMA_VERSION,
            report: report.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Density exponent on the 1-D normal

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsPair {
    /// Against the CDF of `p`.
    pub ks_p: f64,
    /// Against the CDF of `p^{1/3}`.
    pub ks_p_third: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub schema_version: u32,
    pub n: usize,
    pub delta: f64,
    pub l2: KsPair,
    pub ldp: KsPair,
    pub checks: Vec<Check>,
}

pub fn density_exponent(cfg: &DensityConfig, seed: u64, out: Option<&Path>) -> CliResult<DensityReport> {
    let normal = standard_normal_1d();
    let train_set = sample_mixture(&normal, cfg.train_samples, derive_seed(seed, "density-train"))?;
    let delta = default_delta(&train_set, seed);
    let grid: Vec<f64> = (0..=4000).map(|i| -10.0 + 0.005 * f64::from(i)).collect();
    let pdf: Vec<f64> = grid.iter().map(|&y| normal.pdf(&[y])).collect();
    let mut pairs = Vec::with_capacity(2);
    for metric in both_metrics(delta) {
        let tc = cfg.quantizer.build(metric, derive_seed(seed, "density-quantizer"));
        let hyps = fit_hypotheses(&train_set, cfg.n, metric, &tc)?;
        if let Some(dir) = out {
            formats::write_hypotheses(&dir.join(format!("hypotheses_{}.csv", metric.name())), &hyps)?;
        }
        pairs.push(KsPair {
            ks_p: density_exponent_ks(&hyps, &grid, &pdf, 1.0)?,
            ks_p_third: density_exponent_ks(&hyps, &grid, &pdf, 1.0 / 3.0)?,
        });
    }
    let ldp = pairs.pop().expect("two runs");
    let l2 = pairs.pop().expect("two runs");
    let checks = vec![
        Check::less("l2 set follows p^(1/3)", "KS(l2, p^1/3)", l2.ks_p_third, "KS(l2, p)", l2.ks_p),
        Check::less("ldp set follows p", "KS(ldp, p)", ldp.ks_p, "KS(ldp, p^1/3)", ldp.ks_p_third),
        Check::less("ldp KS against p is small", "KS(ldp, p)", ldp.ks_p, "limit", cfg.max_ldp_ks),
    ];
    let report = DensityReport {
        schema_version: SCHEMA_VERSION,
        n: cfg.n,
        delta,
        l2,
        ldp,
        checks,
    };
    if let Some(dir) = out {
        formats::write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Call center

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentErrors {
    pub mean_relative_error: f64,
    pub variance_relative_error: f64,
    pub final_loss: f64,
    pub alive_hypotheses: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallCenterReport {
    pub schema_version: u32,
    pub n_hypotheses: usize,
    pub delta: f64,
    pub l2: MomentErrors,
    pub ldp: MomentErrors,
    pub checks: Vec<Check>,
}

pub fn call_center(cfg: &CallCenterConfig, seed: u64, out: Option<&Path>) -> CliResult<CallCenterReport> {
    let data_seed = derive_seed(seed, "callcenter-data");
    let data = sample_call_center(&cfg.model, cfg.train_samples, data_seed)?;
    let delta = default_delta(&data.labels, seed);
    let spec = network_spec(&cfg.network, 1, 1)?;
    let grid = cfg.x_grid.values();
    if let Some(dir) = out {
        let side = sidecar("call-center", cfg.train_samples, data_seed, 1, 1, serde_json::to_value(cfg.model).unwrap_or_default());
        formats::write_dataset(&dir.join("train.csv"), &Samples::conditional(data.clone()), &side)?;
    }
    let mut errors = Vec::with_capacity(2);
    for metric in both_metrics(delta) {
        let tc = cfg.train.build(metric, derive_seed(seed, "callcenter-train"));
        let outcome = train(&spec, &data, &tc)?;
        let rows: Vec<MomentRow> = conditional_moment_curve(&outcome.model, &grid, &cfg.model)?;
        let (mean_err, var_err) = moment_curve_errors(&rows);
        if let Some(dir) = out {
            let name = metric.name();
            formats::write_model(&dir.join(format!("model_{name}.json")), &outcome.model)?;
            formats::write_history(&dir.join(format!("history_{name}.csv")), &outcome.history)?;
            formats::write_moment_curve(&dir.join(format!("moments_{name}.csv")), &rows)?;
        }
        errors.push(MomentErrors {
            mean_relative_error: mean_err,
            variance_relative_error: var_err,
            final_loss: outcome.history.last().copied().unwrap_or(f64::NAN),
            alive_hypotheses: outcome.final_epoch_wins.iter().filter(|&&w| w > 0).count(),
        });
    }
    let ldp = errors.pop().expect("two runs");
    let l2 = errors.pop().expect("two runs");
    let checks = vec![
        Check::less("ldp mean error below l2", "ldp", ldp.mean_relative_error, "l2", l2.mean_relative_error),
        Check::less("ldp mean error below limit", "ldp", ldp.mean_relative_error, "limit", cfg.max_ldp_mean_error),
        Check::less(
            "ldp variance error below l2",
            "ldp",
            ldp.variance_relative_error,
            "l2",
            l2.variance_relative_error,
        ),
    ];
    let report = CallCenterReport {
        schema_version: SCHEMA_VERSION,
        n_hypotheses: cfg.network.n_hypotheses,
        delta,
        l2,
        ldp,
        checks,
    };
    if let Some(dir) = out {
        formats::write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Conditional NLL on the surrogate

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NllRow {
    pub metric: String,
    pub norm: f64,
    pub kde: f64,
}

/// Side-by-side NLL of two models: the four numbers of the comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub test_count: u64,
    pub rows: Vec<NllRow>,
    pub details: Vec<NllReport>,
}

impl CompareReport {
    pub fn new(models: &[(&str, (NllReport, NllReport))]) -> Self {
        let test_count = models.first().map_or(0, |(_, (n, _))| n.test_count);
        CompareReport {
            schema_version: SCHEMA_VERSION,
            test_count,
            rows: models
                .iter()
                .map(|(name, (n, k))| NllRow {
                    metric: (*name).to_owned(),
                    norm: n.nll_per_sample,
                    kde: k.nll_per_sample,
                })
                .collect(),
            details: models.iter().flat_map(|(_, (n, k))| [n.clone(), k.clone()]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub schema_version: u32,
    pub delta: f64,
    pub comparison: CompareReport,
    pub final_losses: Vec<f64>,
    pub checks: Vec<Check>,
}

pub fn table1(cfg: &Table1Config, seed: u64, threads: usize, out: Option<&Path>) -> CliResult<Table1Report> {
    let (train_seed, test_seed) = (derive_seed(seed, "table1-train"), derive_seed(seed, "table1-test"));
    let train_data: Dataset = sample_conditional_surrogate(cfg.train_samples, train_seed)?;
    let test_data = sample_conditional_surrogate(cfg.test_samples, test_seed)?;
    if let Some(dir) = out {
        for (name, d, s) in [("train", &train_data, train_seed), ("test", &test_data, test_seed)] {
            let side = sidecar("surrogate", d.len(), s, d.feature_dim(), 2, serde_json::Value::Null);
            formats::write_dataset(&dir.join(format!("{name}.csv")), &Samples::conditional(d.clone()), &side)?;
        }
    }
    let delta = default_delta(&train_data.labels, seed);
    let spec = network_spec(&cfg.network, train_data.feature_dim(), 2)?;
    let mut results = Vec::with_capacity(2);
    let mut final_losses = Vec::with_capacity(2);
    for metric in both_metrics(delta) {
        let tc = cfg.train.build(metric, derive_seed(seed, "table1-model"));
        let outcome = train(&spec, &train_data, &tc)?;
        if let Some(dir) = out {
            formats::write_model(&dir.join(format!("model_{}.json", metric.name())), &outcome.model)?;
            formats::write_history(&dir.join(format!("history_{}.csv", metric.name())), &outcome.history)?;
        }
        final_losses.push(outcome.history.last().copied().unwrap_or(f64::NAN));
        results.push((metric.name(), parallel::conditional_nll(&outcome.model, &test_data, cfg.bandwidth, threads)?));
    }
    let comparison = CompareReport::new(&results);
    let (l2, ldp) = (&comparison.rows[0], &comparison.rows[1]);
    let checks = vec![
        Check::less("ldp NLL below l2 (Norm)", "ldp", ldp.norm, "l2", l2.norm),
        Check::less("ldp NLL below l2 (KDE)", "ldp", ldp.kde, "l2", l2.kde),
    ];
    let report = Table1Report {
        schema_version: SCHEMA_VERSION,
        delta,
        comparison,
        final_losses,
        checks,
    };
    if let Some(dir) = out {
        formats::write_json(&dir.join("compare.json"), &report.comparison)?;
        formats::write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}
