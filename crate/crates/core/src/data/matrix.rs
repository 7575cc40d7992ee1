//! Window-level feature table and its CSV form.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::DataError;

const PROVENANCE: [&str; 3] = ["subject_id", "segment_index", "window_index"];

#[derive(Debug, Clone)]
pub struct FeatureRow {
    pub subject_id: String,
    pub segment_index: u8,
    pub window_index: u32,
    pub values: Vec<f64>,
}

fn same_value(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
}

impl PartialEq for FeatureRow {
    fn eq(&self, other: &Self) -> bool {
        self.subject_id == other.subject_id
            && self.segment_index == other.segment_index
            && self.window_index == other.window_index
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| same_value(*a, *b))
    }
}

/// Rows are windows, columns are named features. NaN marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if PROVENANCE.contains(&c.as_str()) || !seen.insert(c.as_str()) {
                return Err(DataError::DuplicateColumn(c.clone()));
            }
        }
        Ok(Self {
            columns,
            rows: Vec::new(),
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[FeatureRow] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.values[j]).collect())
    }

    pub fn push(&mut self, row: FeatureRow) -> Result<(), DataError> {
        if row.values.len() != self.columns.len() {
            return Err(DataError::RowWidth {
                expected: self.columns.len(),
                got: row.values.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = FeatureRow>) -> Result<(), DataError> {
        for r in rows {
            self.push(r)?;
        }
        Ok(())
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> DataError + '_ {
    move |source| DataError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_feature_matrix(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header = PROVENANCE
        .iter()
        .map(|s| s.to_string())
        .chain(m.columns.iter().cloned());
    w.write_record(header).map_err(csv_err(path))?;
    for row in &m.rows {
        let mut rec = vec![
            row.subject_id.clone(),
            row.segment_index.to_string(),
            row.window_index.to_string(),
        ];
        rec.extend(row.values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    let bytes = w.into_inner().map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes.as_slice());
    let header = r.headers().map_err(csv_err(path))?.clone();
    let malformed = |line: usize, message: String| DataError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    if header.len() < 3 || header.iter().take(3).ne(PROVENANCE.iter().copied()) {
        return Err(malformed(1, "header must start with subject_id,segment_index,window_index".into()));
    }
    let mut m = FeatureMatrix::new(header.iter().skip(3).map(str::to_string).collect())?;
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != header.len() {
            return Err(malformed(line, format!("expected {} fields, got {}", header.len(), rec.len())));
        }
        let segment_index = rec[1]
            .parse()
            .map_err(|_| malformed(line, format!("bad segment_index {:?}", &rec[1])))?;
        let window_index = rec[2]
            .parse()
            .map_err(|_| malformed(line, format!("bad window_index {:?}", &rec[2])))?;
        let values = rec
            .iter()
            .skip(3)
            .map(|f| f.parse::<f64>().map_err(|_| malformed(line, format!("not a number: {f:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        m.push(FeatureRow {
            subject_id: rec[0].to_string(),
            segment_index,
            window_index,
            values,
        })?;
    }
    Ok(m)
}
