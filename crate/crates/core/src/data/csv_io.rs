use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use ndarray::Array2;

use super::{BlockMatrix, Dataset};
use crate::{Error, Result};

/// Block name -> member feature names, in declaration order.
pub type BlockSpec = IndexMap<String, Vec<String>>;

/// Load a headed CSV file. Every column except `label_column` is a numeric
/// feature; labels must be integers (an integral float such as `1.0` is
/// accepted).
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    block_spec: Option<&BlockSpec>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column, block_spec)
}

pub fn read_csv<R: Read>(
    reader: R,
    label_column: &str,
    block_spec: Option<&BlockSpec>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::UnknownColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let n = feature_names.len();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            let bad = || Error::NonNumericCell {
                row: row + 1,
                column: headers[col].clone(),
                value: cell.to_string(),
            };
            if col == label_idx {
                labels.push(parse_label(cell).ok_or_else(bad)?);
            } else {
                let v: f64 = cell.parse().map_err(|_| bad())?;
                if !v.is_finite() {
                    return Err(bad());
                }
                values.push(v);
            }
        }
    }
    let features = Array2::from_shape_vec((labels.len(), n), values)
        .map_err(|e| Error::invalid(format!("ragged csv: {e}")))?;

    let blocks = block_spec
        .map(|spec| block_matrix_from_spec(spec, &feature_names))
        .transpose()?;
    Dataset::new(features, labels, feature_names, blocks)
}

fn parse_label(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    let v: f64 = cell.parse().ok()?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

pub(crate) fn block_matrix_from_spec(spec: &BlockSpec, names: &[String]) -> Result<BlockMatrix> {
    let mut block_names = Vec::with_capacity(spec.len());
    let mut members = Vec::with_capacity(spec.len());
    for (block, features) in spec {
        let idx = features
            .iter()
            .map(|f| {
                names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| Error::UnknownFeature(f.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        block_names.push(block.clone());
        members.push(idx);
    }
    BlockMatrix::new(block_names, members, names.len())
}

/// Write features followed by a label column named `y`. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(d, file)
}

pub(crate) fn write_csv_to<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names().iter().map(String::as_str).collect();
    header.push("y");
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(d.n_features() + 1);
    for (row, label) in d.features().rows().into_iter().zip(d.labels()) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(label.to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
