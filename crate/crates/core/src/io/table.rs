use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::volume::{ClassCatalog, ClassId};

/// Reads a comma-delimited dataset with a header row.
///
/// Every column except `label_column` is parsed as a real feature, in file order.
/// Label names are looked up in `catalog` when one is given (unknown names are an
/// error); otherwise ids are assigned in first-seen order. The returned catalog
/// is the one actually used.
pub fn load_csv_dataset(
    path: &Path,
    label_column: Option<&str>,
    catalog: Option<&ClassCatalog>,
) -> Result<(Dataset, ClassCatalog)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| {
            Error::format(path, format!("no label column {name:?} in header"))
        })?),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&i| Some(i) != label_idx).collect();
    let names: Vec<String> = feature_cols.iter().map(|&i| header[i].clone()).collect();

    let mut cat = catalog.cloned().unwrap_or_else(|| ClassCatalog::new(Vec::new()).unwrap());
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::format(
                path,
                format!(
                    "row {row} has {} fields, header has {}",
                    record.len(),
                    header.len()
                ),
            ));
        }
        for &c in &feature_cols {
            let cell = &record[c];
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: header[c].clone(),
                    value: cell.to_string(),
                })?;
            values.push(v);
        }
        if let Some(li) = label_idx {
            let name = &record[li];
            let id = match cat.id_of(name) {
                Some(id) => id,
                None if catalog.is_some() => return Err(Error::UnknownLabel(name.to_string())),
                None => cat.push(name)?,
            };
            labels.push(id);
        }
    }
    let ds = Dataset::new(names, values, label_idx.map(|_| labels))?;
    Ok((ds, cat))
}

/// Writes a dataset as CSV; labels go last under `label_column`, as catalog
/// names when a catalog is given and as numeric ids otherwise.
pub fn save_csv_dataset(
    data: &Dataset,
    path: &Path,
    label_column: &str,
    catalog: Option<&ClassCatalog>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let csv_err = |e: csv::Error| Error::format(path, e.to_string());
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    if data.labels().is_some() {
        header.push(label_column);
    }
    w.write_record(&header).map_err(csv_err)?;
    let label_text = |id: ClassId| -> Result<String> {
        match catalog {
            Some(c) => c
                .name_of(id)
                .map(str::to_string)
                .ok_or_else(|| Error::UnknownLabel(format!("class id {id}"))),
            None => Ok(id.to_string()),
        }
    };
    for (i, row) in data.rows().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = data.labels() {
            fields.push(label_text(l[i])?);
        }
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
