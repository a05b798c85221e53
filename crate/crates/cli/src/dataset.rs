//! CSV ingestion.
//!
//! One sample per line, comma separated, one categorical label column. A
//! header is assumed when some feature cell of the first row is not a
//! number. Classes are indexed in lexicographic order of their names.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use subspace_core::data::one_hot;

use crate::error::{CliError, CliResult};

/// Which column holds the label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    /// The last column.
    #[default]
    Last,
    /// Zero-based position.
    Index(usize),
    /// Header name (requires a header row).
    Name(String),
}

impl LabelColumn {
    /// "last", a zero-based index, or a header name.
    pub fn parse(s: &str) -> Self {
        let t = s.trim();
        if t.eq_ignore_ascii_case("last") || t.is_empty() {
            LabelColumn::Last
        } else if let Ok(i) = t.parse::<usize>() {
            LabelColumn::Index(i)
        } else {
            LabelColumn::Name(t.to_string())
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    /// n×d raw (uncentered) features.
    pub x: DMatrix<f64>,
    /// n×c one-hot labels.
    pub y: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub header: Option<Vec<String>>,
}

impl LoadedData {
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        self.labels.iter().for_each(|&l| counts[l] += 1);
        counts
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_csv(path: &Path, label_column: &LabelColumn) -> CliResult<LoadedData> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut rows: Vec<(u64, csv::StringRecord)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push((line, record));
    }
    let Some((first_line, first)) = rows.first().cloned() else {
        return Err(parse_err(path, 0, "file has no rows"));
    };
    let width = first.len();
    if width < 2 {
        return Err(parse_err(path, first_line, "need at least one feature and a label column"));
    }

    let label_idx = match label_column {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(parse_err(path, first_line, format!("label column {i} but rows have {width} fields")))
        }
        LabelColumn::Name(name) => first.iter().position(|f| f == name).ok_or_else(|| {
            parse_err(path, first_line, format!("no header column named {name:?}"))
        })?,
    };
    let has_header = matches!(label_column, LabelColumn::Name(_))
        || first
            .iter()
            .enumerate()
            .any(|(j, f)| j != label_idx && f.parse::<f64>().is_err());
    let header = has_header.then(|| first.iter().map(str::to_string).collect::<Vec<_>>());
    let body = if has_header { &rows[1..] } else { &rows[..] };
    if body.is_empty() {
        return Err(parse_err(path, first_line, "no data rows after the header"));
    }

    let d = width - 1;
    let mut values = Vec::with_capacity(body.len() * d);
    let mut names = Vec::with_capacity(body.len());
    for (line, record) in body {
        if record.len() != width {
            return Err(parse_err(
                path,
                *line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                parse_err(path, *line, format!("column {} is not numeric: {field:?}", j + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_err(path, *line, format!("column {} is not finite", j + 1)));
            }
            values.push(v);
        }
        let label = &record[label_idx];
        if label.is_empty() {
            return Err(parse_err(path, *line, "empty label"));
        }
        names.push(label.to_string());
    }

    let mut classes: BTreeMap<String, usize> = names.iter().map(|n| (n.clone(), 0)).collect();
    if classes.len() < 2 {
        return Err(parse_err(
            path,
            body[0].0,
            format!("only one class ({:?}) present", names[0]),
        ));
    }
    for (i, v) in classes.values_mut().enumerate() {
        *v = i;
    }
    let labels: Vec<usize> = names.iter().map(|n| classes[n]).collect();
    let class_names: Vec<String> = classes.into_keys().collect();
    let x = DMatrix::from_row_slice(body.len(), d, &values);
    let y = one_hot(&labels, class_names.len())?;
    Ok(LoadedData {
        x,
        y,
        labels,
        class_names,
        header,
    })
}

/// Writes features plus a trailing `label` column, with a header row.
/// Values use the shortest representation that parses back exactly.
pub fn save_csv(path: &Path, x: &DMatrix<f64>, labels: &[String]) -> CliResult<()> {
    if labels.len() != x.nrows() {
        return Err(CliError::Config(format!(
            "{} labels for {} rows",
            labels.len(),
            x.nrows()
        )));
    }
    let mut out = String::new();
    let cols: Vec<String> = (1..=x.ncols()).map(|j| format!("f{j}")).collect();
    out.push_str(&cols.join(","));
    out.push_str(",label\n");
    for (i, label) in labels.iter().enumerate() {
        for j in 0..x.ncols() {
            out.push_str(&format!("{},", x[(i, j)]));
        }
        out.push_str(label);
        out.push('\n');
    }
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| CliError::io(path, e))
}
