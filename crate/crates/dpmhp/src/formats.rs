//! On-disk formats.
//!
//! | artifact      | format                                                   |
//! |---------------|----------------------------------------------------------|
//! | dataset       | CSV `x0..x{m-1},y0..y{n-1}` plus `<stem>.json` sidecar    |
//! | hypotheses    | CSV `h0..h{n-1}`, one row per hypothesis                 |
//! | model         | JSON: spec, standardization, metric, parameters          |
//! | moment curve  | CSV `x,hyp_mean,true_mean,hyp_var,true_var`              |
//! | loss history  | CSV `epoch,loss`                                         |
//! | reports       | JSON objects carrying `schema_version`                   |
//!
//! Floats are written in Rust's shortest round-trip form, so files are
//! byte-stable and parse back to the same bits.

use std::fs;
use std::path::{Path, PathBuf};

use dpmhp_core::evaluation::MomentRow;
use dpmhp_core::{Dataset, HypothesisSet, MhpModel, PointSet};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Generation parameters stored next to a dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub schema_version: u32,
    pub kind: String,
    pub k: usize,
    pub seed: u64,
    pub feature_dim: usize,
    pub label_dim: usize,
    pub parameters: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub model: MhpModel,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}", dir.display()), e))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::data(format!("cannot write {}", path.display()), e))
}

fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut w = csv_writer(path)?;
    let fail = |e: csv::Error| CliError::data(format!("cannot write {}", path.display()), e);
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row.into_iter().map(|v| v.to_string())).map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::data(format!("cannot write {}", path.display()), e))
}

/// Header and numeric rows of a CSV file.
fn read_rows(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let fail = |e: csv::Error| CliError::data(format!("cannot read {}", path.display()), e);
    let mut r = csv::Reader::from_path(path).map_err(fail)?;
    let header: Vec<String> = r.headers().map_err(fail)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(fail)?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::data(format!("{} row {}", path.display(), i + 1), e))?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

fn check_numbered(header: &[String], prefix: &str, path: &Path) -> CliResult<()> {
    if header.iter().cloned().eq(numbered(prefix, header.len())) {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{}: expected header {prefix}0..{prefix}{}",
            path.display(),
            header.len().saturating_sub(1)
        )))
    }
}

/// Rows of a dataset file. Unconditional data has no `x` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub features: Option<PointSet>,
    pub labels: PointSet,
}

impl Samples {
    pub fn conditional(data: Dataset) -> Self {
        Samples {
            features: Some(data.features),
            labels: data.labels,
        }
    }

    pub fn unconditional(labels: PointSet) -> Self {
        Samples { features: None, labels }
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, PointSet::dim)
    }

    /// Paired view; fails for unconditional data.
    pub fn into_dataset(self, path: &Path) -> CliResult<Dataset> {
        let features = self
            .features
            .ok_or_else(|| CliError::Data(format!("{}: dataset has no x columns", path.display())))?;
        Dataset::new(features, self.labels).map_err(|e| CliError::data(path.display(), e))
    }
}

pub fn write_dataset(csv: &Path, samples: &Samples, sidecar: &DatasetSidecar) -> CliResult<()> {
    let m = samples.feature_dim();
    let header: Vec<String> = numbered("x", m).chain(numbered("y", samples.labels.dim())).collect();
    let rows = (0..samples.labels.len()).map(|i| {
        let x = samples.features.as_ref().map_or(&[][..], |f| f.point(i));
        x.iter().chain(samples.labels.point(i)).copied().collect::<Vec<_>>()
    });
    write_rows(csv, &header, rows)?;
    write_json(&sidecar_path(csv), sidecar)
}

pub fn read_dataset(csv: &Path) -> CliResult<Samples> {
    let (header, rows) = read_rows(csv)?;
    let m = header.iter().take_while(|h| h.starts_with('x')).count();
    check_numbered(&header[..m], "x", csv)?;
    check_numbered(&header[m..], "y", csv)?;
    let n = header.len() - m;
    if n == 0 {
        return Err(CliError::Data(format!("{}: needs at least one y column", csv.display())));
    }
    let mut xs = Vec::with_capacity(rows.len() * m);
    let mut ys = Vec::with_capacity(rows.len() * n);
    for row in &rows {
        xs.extend_from_slice(&row[..m]);
        ys.extend_from_slice(&row[m..]);
    }
    let wrap = |e| CliError::data(csv.display(), e);
    let features = if m > 0 { Some(PointSet::new(m, xs).map_err(wrap)?) } else { None };
    Ok(Samples {
        features,
        labels: PointSet::new(n, ys).map_err(wrap)?,
    })
}

pub fn read_sidecar(csv: &Path) -> Option<DatasetSidecar> {
    read_json(&sidecar_path(csv)).ok()
}

pub fn write_hypotheses(path: &Path, hyps: &HypothesisSet) -> CliResult<()> {
    let header: Vec<String> = numbered("h", hyps.dim()).collect();
    write_rows(path, &header, hyps.iter().map(<[f64]>::to_vec))
}

pub fn read_hypotheses(path: &Path) -> CliResult<HypothesisSet> {
    let (header, rows) = read_rows(path)?;
    check_numbered(&header, "h", path)?;
    PointSet::new(header.len(), rows.concat()).map_err(|e| CliError::data(path.display(), e))
}

pub fn write_moment_curve(path: &Path, rows: &[MomentRow]) -> CliResult<()> {
    let header = ["x", "hyp_mean", "true_mean", "hyp_var", "true_var"].map(String::from);
    write_rows(path, &header, rows.iter().map(|r| [r.x, r.hyp_mean, r.true_mean, r.hyp_var, r.true_var]))
}

pub fn write_history(path: &Path, history: &[f64]) -> CliResult<()> {
    let header = ["epoch", "loss"].map(String::from);
    write_rows(path, &header, history.iter().enumerate().map(|(i, l)| [i as f64, *l]))
}

pub fn write_model(path: &Path, model: &MhpModel) -> CliResult<()> {
    write_json(
        path,
        &ModelFile {
            schema_version: SCHEMA_VERSION,
            model: model.clone(),
        },
    )
}

pub fn read_model(path: &Path) -> CliResult<MhpModel> {
    let file: ModelFile = read_json(path)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Data(format!("{}: unsupported schema_version {}", path.display(), file.schema_version)));
    }
    file.model.validate().map_err(|e| CliError::data(path.display(), e))?;
    Ok(file.model)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(path.display(), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}", path.display()), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path.display(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpmhp_core::datasets::sample_call_center;
    use dpmhp_core::{init_network, Activation, NetworkSpec, WtaMetric};

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data = sample_call_center(&Default::default(), 200, 1).unwrap();
        let side = DatasetSidecar {
            schema_version: SCHEMA_VERSION,
            kind: "call-center".into(),
            k: 200,
            seed: 1,
            feature_dim: 1,
            label_dim: 1,
            parameters: serde_json::Value::Null,
        };
        let path = dir.path().join("d.csv");
        write_dataset(&path, &Samples::conditional(data.clone()), &side).unwrap();
        assert_eq!(read_dataset(&path).unwrap().into_dataset(&path).unwrap(), data);
        assert_eq!(read_sidecar(&path).unwrap(), side);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x0,y0\n"));

        let labels = PointSet::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        write_dataset(&path, &Samples::unconditional(labels.clone()), &side).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("y0,y1\n"));
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, Samples::unconditional(labels));
        assert_eq!(back.into_dataset(&path).unwrap_err().code(), 2);
    }

    #[test]
    fn hypotheses_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let h = PointSet::new(2, vec![0.1, -2.5, 1e-17, 3.0]).unwrap();
        let path = dir.path().join("h.csv");
        write_hypotheses(&path, &h).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("h0,h1\n"));
        assert_eq!(read_hypotheses(&path).unwrap(), h);
    }

    #[test]
    fn model_round_trip_keeps_forward_bits() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NetworkSpec::new(3, vec![5], Activation::Tanh, 4, 2).unwrap();
        let model = MhpModel::from_params(init_network(&spec, 3).unwrap(), WtaMetric::LogDistance { delta: 0.01 });
        let path = dir.path().join("m.json");
        write_model(&path, &model).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back, model);
        let x = [0.3, -0.1, 0.7];
        assert_eq!(back.forward(&x).unwrap(), model.forward(&x).unwrap());
    }

    #[test]
    fn bad_headers_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x0,y1\n1,2\n").unwrap();
        assert_eq!(read_dataset(&path).unwrap_err().code(), 2);
        fs::write(&path, "x0,y0\n1,abc\n").unwrap();
        assert_eq!(read_dataset(&path).unwrap_err().code(), 2);
        assert_eq!(read_dataset(&dir.path().join("missing.csv")).unwrap_err().code(), 2);
    }
}
