//! Numeric tabular data and index-based resample views.
//!
//! The accepted CSV dialect is deliberately narrow: comma separated, a single
//! header row, unquoted numeric cells and `.` as the decimal separator. Every
//! cell must parse to a finite `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("input is empty (no header row)")]
    MissingHeader,
    #[error("header field {index} is empty")]
    EmptyColumnName { index: usize },
    #[error("duplicate column name `{0}` in header")]
    DuplicateColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: missing value")]
    MissingCell { row: usize, column: String },
    #[error("row {row}, column `{column}`: `{text}` is not a finite number")]
    BadCell {
        row: usize,
        column: String,
        text: String,
    },
    #[error("no data rows after header")]
    NoRows,
    #[error("unknown column `{name}` (available: {available})")]
    UnknownColumn { name: String, available: String },
    #[error("column `{name}` has {found} values, expected {expected}")]
    Length {
        name: String,
        expected: usize,
        found: usize,
    },
}

/// Immutable table of named numeric columns, all of length `n_rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: IndexMap<String, Vec<f64>>,
    n_rows: usize,
}

impl Dataset {
    /// Builds a dataset from `(name, values)` pairs, checking every invariant.
    pub fn from_columns<I, S>(columns: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut map: IndexMap<String, Vec<f64>> = IndexMap::new();
        let mut n_rows = None;
        for (index, (name, values)) in columns.into_iter().enumerate() {
            let name = name.into();
            if name.is_empty() {
                return Err(DataError::EmptyColumnName { index });
            }
            if map.contains_key(&name) {
                return Err(DataError::DuplicateColumn(name));
            }
            let expected = *n_rows.get_or_insert(values.len());
            if values.len() != expected {
                return Err(DataError::Length {
                    name,
                    expected,
                    found: values.len(),
                });
            }
            if let Some(row) = values.iter().position(|v| !v.is_finite()) {
                return Err(DataError::BadCell {
                    row: row + 1,
                    text: values[row].to_string(),
                    column: name,
                });
            }
            map.insert(name, values);
        }
        match n_rows {
            Some(n) if n > 0 => Ok(Self {
                columns: map,
                n_rows: n,
            }),
            _ => Err(DataError::NoRows),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    /// Returns the stored column unmodified.
    pub fn column(&self, name: &str) -> Result<&[f64], DataError> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| self.unknown(name))
    }

    /// Arithmetic mean of each named column, in the order given.
    pub fn column_means<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<f64>, DataError> {
        names
            .iter()
            .map(|name| {
                let col = self.column(name.as_ref())?;
                Ok(col.iter().sum::<f64>() / col.len() as f64)
            })
            .collect()
    }

    /// The identity view over every row.
    pub fn full_view(&self) -> IndexView<'_> {
        IndexView {
            base: self,
            indices: (0..self.n_rows).collect(),
        }
    }

    /// A resample view. Fails if the index count differs from `n_rows` or
    /// any index is out of range.
    pub fn view(&self, indices: Vec<usize>) -> Option<IndexView<'_>> {
        if indices.len() != self.n_rows || indices.iter().any(|&i| i >= self.n_rows) {
            return None;
        }
        Some(IndexView {
            base: self,
            indices,
        })
    }

    /// Parses CSV text in the accepted dialect.
    pub fn parse_csv(text: &str) -> Result<Self, DataError> {
        let mut lines = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(DataError::MissingHeader)?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        for (index, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(DataError::EmptyColumnName { index });
            }
            if names[..index].contains(name) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }

        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row, (_, line)) in lines.enumerate() {
            // Rows are numbered from 1, counting data rows only.
            let row = row + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() {
                return Err(DataError::FieldCount {
                    row,
                    expected: names.len(),
                    found: fields.len(),
                });
            }
            for ((field, name), col) in fields.iter().zip(&names).zip(columns.iter_mut()) {
                let field = field.trim();
                if field.is_empty() {
                    return Err(DataError::MissingCell {
                        row,
                        column: name.clone(),
                    });
                }
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => col.push(v),
                    _ => {
                        return Err(DataError::BadCell {
                            row,
                            column: name.clone(),
                            text: field.to_string(),
                        })
                    }
                }
            }
        }
        if columns.first().is_none_or(Vec::is_empty) {
            return Err(DataError::NoRows);
        }
        Self::from_columns(names.into_iter().zip(columns))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_csv(&text)
    }

    /// Serializes with shortest round-trip float formatting, so
    /// `parse_csv(to_csv())` reproduces the dataset exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.column_names().collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in 0..self.n_rows {
            for (j, col) in self.columns.values().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", col[row]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    fn unknown(&self, name: &str) -> DataError {
        DataError::UnknownColumn {
            name: name.to_string(),
            available: self.column_names().collect::<Vec<_>>().join(", "),
        }
    }
}

/// A resample of a dataset expressed as row indices into it.
#[derive(Debug, Clone)]
pub struct IndexView<'a> {
    base: &'a Dataset,
    indices: Vec<usize>,
}

impl<'a> IndexView<'a> {
    pub fn base(&self) -> &'a Dataset {
        self.base
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Values of a column as seen through the view.
    pub fn column_iter(
        &self,
        name: &str,
    ) -> Result<impl ExactSizeIterator<Item = f64> + '_, DataError> {
        let col = self.base.column(name)?;
        Ok(self.indices.iter().map(move |&i| col[i]))
    }
}
