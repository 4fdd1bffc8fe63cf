//! CSV dataset ingestion and emission.
//!
//! Datasets are headered CSV files whose feature columns parse as reals; one
//! optional column (default name `class`) carries class labels and passes
//! through untouched. Column order is preserved on output, so a perturbed
//! file keeps the input header verbatim.

use std::path::Path;

use anyhow::{bail, Context, Result};
use distpab_core::{DataMatrix, Matrix};

/// A parsed CSV dataset, remembering the original column layout.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub data: DataMatrix,
    /// All column names in file order, including the label column.
    pub columns: Vec<String>,
    /// Index of the label column within `columns`, if present.
    pub label_idx: Option<usize>,
}

impl Dataset {
    pub fn feature_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != self.label_idx)
            .map(|(_, name)| name.as_str())
            .collect()
    }

    /// Replaces the features, keeping layout and labels.
    pub fn with_features(&self, features: Matrix) -> Result<Dataset> {
        Ok(Dataset {
            data: self.data.with_features(features)?,
            columns: self.columns.clone(),
            label_idx: self.label_idx,
        })
    }

    /// Replaces the whole data matrix (labels included), keeping layout.
    pub fn with_data(&self, data: DataMatrix) -> Dataset {
        Dataset {
            data,
            columns: self.columns.clone(),
            label_idx: self.label_idx,
        }
    }

    /// Drops constant feature columns (std below the normalization floor),
    /// returning the retained dataset and the names of dropped columns.
    pub fn drop_constant_columns(&self) -> Result<(Dataset, Vec<String>)> {
        let features = self.data.features();
        let stds = distpab_core::stats::column_stds(features);
        let keep: Vec<usize> = (0..features.cols())
            .filter(|&j| stds[j] >= distpab_core::stats::STD_FLOOR)
            .collect();
        if keep.len() == features.cols() {
            return Ok((self.clone(), Vec::new()));
        }
        let feature_names: Vec<String> =
            self.feature_names().iter().map(|s| s.to_string()).collect();
        let dropped: Vec<String> = (0..features.cols())
            .filter(|j| !keep.contains(j))
            .map(|j| feature_names[j].clone())
            .collect();

        let mut data = Vec::with_capacity(features.rows() * keep.len());
        for i in 0..features.rows() {
            for &j in &keep {
                data.push(features.get(i, j));
            }
        }
        let reduced = Matrix::from_vec(features.rows(), keep.len(), data)?;

        let mut columns = Vec::new();
        let mut label_idx = None;
        let mut feature_pos = 0usize;
        for (i, name) in self.columns.iter().enumerate() {
            if Some(i) == self.label_idx {
                label_idx = Some(columns.len());
                columns.push(name.clone());
            } else {
                if keep.contains(&feature_pos) {
                    columns.push(name.clone());
                }
                feature_pos += 1;
            }
        }
        Ok((
            Dataset {
                data: DataMatrix::new(reduced, self.data.labels().map(<[_]>::to_vec))?,
                columns,
                label_idx,
            },
            dropped,
        ))
    }
}

/// Reads a CSV dataset. `label_col` names the pass-through label column; a
/// file without that column is treated as unlabeled.
pub fn read_csv(path: &Path, label_col: &str) -> Result<Dataset> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let columns: Vec<String> = reader
        .headers()
        .context("missing header row")?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = columns.iter().position(|c| c == label_col);
    let n_features = columns.len() - usize::from(label_idx.is_some());
    if n_features < 2 {
        bail!(
            "{}: need at least 2 feature columns, found {n_features}",
            path.display()
        );
    }

    let mut values = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let line = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".into());
        for (i, field) in record.iter().enumerate() {
            if Some(i) == label_idx {
                labels.push(field.to_string());
            } else {
                let v: f64 = field.trim().parse().with_context(|| {
                    format!(
                        "{} line {line}: column '{}' value '{field}' is not numeric",
                        path.display(),
                        columns[i]
                    )
                })?;
                if !v.is_finite() {
                    bail!(
                        "{} line {line}: column '{}' holds non-finite value {field}",
                        path.display(),
                        columns[i]
                    );
                }
                values.push(v);
            }
        }
        rows += 1;
    }
    if rows < 2 {
        bail!(
            "{}: need at least 2 data rows, found {rows}",
            path.display()
        );
    }
    let features = Matrix::from_vec(rows, n_features, values)?;
    let data = DataMatrix::new(features, label_idx.map(|_| labels))?;
    Ok(Dataset {
        data,
        columns,
        label_idx,
    })
}

/// Writes a dataset back to CSV with its original column layout.
pub fn write_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    writer.write_record(&dataset.columns)?;
    let features = dataset.data.features();
    let labels = dataset.data.labels();
    let mut feature_positions = Vec::new();
    for (i, _) in dataset.columns.iter().enumerate() {
        if Some(i) != dataset.label_idx {
            feature_positions.push(i);
        }
    }
    for row in 0..features.rows() {
        let mut record: Vec<String> = vec![String::new(); dataset.columns.len()];
        for (j, &pos) in feature_positions.iter().enumerate() {
            record[pos] = format!("{}", features.get(row, j));
        }
        if let (Some(idx), Some(labels)) = (dataset.label_idx, labels) {
            record[idx] = labels[row].clone();
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn roundtrip_preserves_header_and_labels() {
        let f = write_file("a,b,class\n1.5,2,x\n3,4.25,y\n");
        let ds = read_csv(f.path(), "class").unwrap();
        assert_eq!(ds.columns, vec!["a", "b", "class"]);
        assert_eq!(ds.data.labels().unwrap(), ["x", "y"]);
        assert_eq!(ds.data.features().get(1, 1), 4.25);

        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(out.path(), &ds).unwrap();
        let back = read_csv(out.path(), "class").unwrap();
        assert_eq!(back.columns, ds.columns);
        assert_eq!(back.data, ds.data);
    }

    #[test]
    fn label_column_in_the_middle_keeps_position() {
        let f = write_file("a,class,b\n1,x,2\n3,y,4\n");
        let ds = read_csv(f.path(), "class").unwrap();
        assert_eq!(ds.label_idx, Some(1));
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(out.path(), &ds).unwrap();
        let text = std::fs::read_to_string(out.path()).unwrap();
        assert!(text.starts_with("a,class,b\n"));
        assert!(text.contains("1,x,2"));
    }

    #[test]
    fn parse_error_reports_line_and_column() {
        let f = write_file("a,b\n1,2\n3,oops\n");
        let err = read_csv(f.path(), "class").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("'b'"), "{msg}");
    }

    #[test]
    fn too_few_rows_or_columns_rejected() {
        let f = write_file("a,b\n1,2\n");
        assert!(read_csv(f.path(), "class").is_err());
        let f = write_file("a,class\n1,x\n2,y\n");
        assert!(read_csv(f.path(), "class").is_err());
    }

    #[test]
    fn drop_constant_removes_flat_column() {
        let f = write_file("a,b,c,class\n1,7,2,x\n2,7,3,y\n3,7,9,x\n");
        let ds = read_csv(f.path(), "class").unwrap();
        let (kept, dropped) = ds.drop_constant_columns().unwrap();
        assert_eq!(dropped, vec!["b"]);
        assert_eq!(kept.columns, vec!["a", "c", "class"]);
        assert_eq!(kept.data.features().cols(), 2);
    }
}
