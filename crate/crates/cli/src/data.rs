//! CSV input and output. Input tables carry feature columns `x1..xd` and an
//! optional trailing response column `y`; every cell must parse as a finite
//! real. Output goes through one writer constructor so file and stdout paths
//! format identically (header row, '.' decimal separator, shortest
//! round-trip floats via `Display`).

use crate::CliError;
use covplan_core::conformal::Dataset;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

/// A parsed input table: rectangular finite features, responses if the file
/// had a `y` column. The dimension comes from the header, so it is defined
/// even for a table with no rows.
pub struct Table {
    dim: usize,
    features: Vec<Vec<f64>>,
    responses: Option<Vec<f64>>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn response(&self, i: usize) -> Option<f64> {
        self.responses.as_ref().map(|ys| ys[i])
    }

    pub fn has_responses(&self) -> bool {
        self.responses.is_some()
    }

    /// The table as a modeling dataset; the `y` column must be present.
    pub fn to_dataset(&self, role: &str) -> Result<Dataset, CliError> {
        let Some(ys) = &self.responses else {
            return Err(CliError::Invalid(format!("{role} file needs a y column")));
        };
        Ok(Dataset::new(self.features.clone(), ys.clone())?)
    }
}

/// Reads and validates one `x1..xd[,y]` table.
pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let schema_err = |msg: String| CliError::Invalid(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let has_y = headers.iter().last() == Some("y");
    let dim = headers.len() - usize::from(has_y);
    if dim == 0 {
        return Err(schema_err("expected feature columns x1..xd".into()));
    }
    for (i, name) in headers.iter().take(dim).enumerate() {
        let expected = format!("x{}", i + 1);
        if name != expected {
            return Err(schema_err(format!(
                "column {} is named {name:?}, expected {expected:?} \
                 (schema is x1..xd with an optional trailing y)",
                i + 1
            )));
        }
    }
    let mut features = Vec::new();
    let mut responses = has_y.then(Vec::new);
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut values = Vec::with_capacity(record.len());
        for (name, field) in headers.iter().zip(record.iter()) {
            let value: f64 = field.trim().parse().map_err(|_| {
                schema_err(format!("row {}, column {name}: {field:?} is not a number", line + 1))
            })?;
            if !value.is_finite() {
                return Err(schema_err(format!(
                    "row {}, column {name}: {value} is not finite",
                    line + 1
                )));
            }
            values.push(value);
        }
        if let Some(ys) = &mut responses {
            ys.push(values.pop().expect("record length matches the header"));
        }
        features.push(values);
    }
    Ok(Table { dim, features, responses })
}

/// CSV writer over a file or stdout.
pub fn csv_writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}
