//! CSV matrices, dataset directories and file hashing.

use std::fs::File;
use std::path::{Path, PathBuf};

use gmc::synthdata::{MultimodalDataset, Split, SynthConfig};
use gmc::Tensor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const DATASET_FILE: &str = "dataset.json";
pub const LABELS_FILE: &str = "labels.csv";

/// Shortest text with 17 significant digits; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn modality_file(m: usize) -> String {
    format!("modality_{}.csv", m + 1)
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    }
}

/// Writes rows of strings under `header`.
pub fn write_table<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `t` with columns `{prefix}0, {prefix}1, ...`.
pub fn write_matrix(path: &Path, prefix: &str, t: &Tensor) -> Result<()> {
    let (rows, cols) = t.dims2()?;
    let header: Vec<String> = (0..cols).map(|j| format!("{prefix}{j}")).collect();
    write_table(
        path,
        &header,
        (0..rows).map(|i| t.row(i).iter().map(|&v| fmt_f64(v))),
    )
}

/// Reads a matrix written by [`write_matrix`], checking the header.
pub fn read_matrix(path: &Path, prefix: &str) -> Result<Tensor> {
    let mut r = reader(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let cols = header.len();
    for (j, h) in header.iter().enumerate() {
        if h != format!("{prefix}{j}") {
            return Err(CliError::format(
                path,
                format!("column {j} is `{h}`, expected `{prefix}{j}`"),
            ));
        }
    }
    if cols == 0 {
        return Err(CliError::format(path, "no columns"));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::format(
                    path,
                    format!("row {i}, column {j}: `{field}` is not a number"),
                )
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::format(path, "no rows"));
    }
    Ok(Tensor::matrix(rows, cols, data)?)
}

/// Contents of `dataset.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInfo {
    pub n_samples: usize,
    pub n_classes: usize,
    pub modality_dims: Vec<usize>,
    pub modality_files: Vec<String>,
    pub labels_file: String,
    pub generator: SynthConfig,
}

/// Writes one CSV per modality, the labels file and `dataset.json`.
/// Returns the written file names in order.
pub fn write_dataset(
    dir: &Path,
    ds: &MultimodalDataset,
    generator: &SynthConfig,
) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for m in 0..ds.modality_count() {
        let name = modality_file(m);
        write_matrix(&dir.join(&name), "x", ds.modality(m))?;
        files.push(name);
    }
    let header = ["index", "label", "split"].map(String::from);
    write_table(
        &dir.join(LABELS_FILE),
        &header,
        (0..ds.len()).map(|i| {
            [
                i.to_string(),
                ds.labels()[i].to_string(),
                ds.split_of(i).to_string(),
            ]
        }),
    )?;
    let info = DatasetInfo {
        n_samples: ds.len(),
        n_classes: ds.n_classes(),
        modality_dims: ds.input_dims(),
        modality_files: files.clone(),
        labels_file: LABELS_FILE.to_string(),
        generator: generator.clone(),
    };
    write_json(&dir.join(DATASET_FILE), &info)?;
    files.push(LABELS_FILE.to_string());
    files.push(DATASET_FILE.to_string());
    Ok(files)
}

/// A dataset read back from disk with the paths it came from.
pub struct LoadedDataset {
    pub dataset: MultimodalDataset,
    pub info: DatasetInfo,
    pub files: Vec<PathBuf>,
}

pub fn read_dataset(dir: &Path) -> Result<LoadedDataset> {
    let info_path = dir.join(DATASET_FILE);
    let info: DatasetInfo = read_json(&info_path)?;
    if info.modality_files.len() != info.modality_dims.len() {
        return Err(CliError::format(
            &info_path,
            "one file per modality dimension is required",
        ));
    }
    let mut files = vec![info_path.clone()];
    let mut modalities = Vec::new();
    for (name, &dim) in info.modality_files.iter().zip(&info.modality_dims) {
        let path = dir.join(name);
        let t = read_matrix(&path, "x")?;
        if t.cols() != dim || t.rows() != info.n_samples {
            return Err(CliError::format(
                &path,
                format!(
                    "{}×{} matrix, expected {}×{dim}",
                    t.rows(),
                    t.cols(),
                    info.n_samples
                ),
            ));
        }
        modalities.push(t);
        files.push(path);
    }
    let labels_path = dir.join(&info.labels_file);
    let mut r = reader(&labels_path)?;
    let header = r.headers().map_err(|e| csv_err(&labels_path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["index", "label", "split"] {
        return Err(CliError::format(
            &labels_path,
            "header must be `index,label,split`",
        ));
    }
    let mut labels = Vec::new();
    let mut split = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(&labels_path, e))?;
        let bad = |what: &str| CliError::format(&labels_path, format!("row {i}: bad {what}"));
        if rec.get(0).and_then(|s| s.parse::<usize>().ok()) != Some(i) {
            return Err(bad("index"));
        }
        labels.push(
            rec.get(1)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| bad("label"))?,
        );
        split.push(match rec.get(2) {
            Some("train") => Split::Train,
            Some("test") => Split::Test,
            _ => return Err(bad("split")),
        });
    }
    if labels.len() != info.n_samples {
        return Err(CliError::format(
            &labels_path,
            format!("{} rows, expected {}", labels.len(), info.n_samples),
        ));
    }
    files.push(labels_path);
    let dataset = MultimodalDataset::from_parts(info.n_classes, labels, modalities, split)?;
    Ok(LoadedDataset {
        dataset,
        info,
        files,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serialises");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
}

/// Lowercase hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips_exactly() {
        for x in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            f64::MAX,
            5e-324,
            0.0,
            -0.0,
            123_456_789.123_456_79,
        ] {
            let back: f64 = fmt_f64(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
    }

    #[test]
    fn matrix_round_trip_and_header_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let t = Tensor::matrix(2, 3, vec![1.0, -2.5, 0.1, 1e-17, 3.0, -0.0]).unwrap();
        write_matrix(&path, "z", &t).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("z0,z1,z2\n"));
        assert_eq!(read_matrix(&path, "z").unwrap(), t);
        assert!(matches!(
            read_matrix(&path, "x"),
            Err(CliError::Format { .. })
        ));
    }

    #[test]
    fn ragged_or_non_numeric_rows_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "z0,z1\n1,2\n3\n").unwrap();
        assert!(matches!(
            read_matrix(&path, "z"),
            Err(CliError::Format { .. })
        ));
        std::fs::write(&path, "z0,z1\n1,oops\n").unwrap();
        assert!(matches!(
            read_matrix(&path, "z"),
            Err(CliError::Format { .. })
        ));
    }
}
