//! CSV readers and writers.
//!
//! Point clouds: one row per point, id first, coordinates after, optional
//! header. Matrices: dense, id header row and id column. Vectors: two
//! columns `(id, value)` with a header. Floats are written in shortest
//! round-trip form.

use std::path::Path;

use pnmc_core::geometry::PointCloud;
use pnmc_core::ising::IsingSample;
use pnmc_core::mat::Mat;

use crate::{Error, Result};

/// Column name that marks categorical labels in a point-cloud CSV; it is
/// excluded from the coordinates automatically.
pub const LABEL_COLUMN: &str = "label";

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn open_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
    Ok(csv::Writer::from_writer(file))
}

fn fmt_float(v: f64) -> String {
    format!("{v}")
}

fn parse_cell(cell: &str, line: u64) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| {
        Error::input_at(format!("cannot parse '{cell}' as a number"), line)
    })
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads a point cloud. The header row is optional: the first row counts as
/// data when every cell after the id parses as a number. `exclude` names
/// columns (header required) to drop from the coordinates; a column named
/// `label` becomes per-point labels.
pub fn read_point_cloud(path: &Path, exclude: &[String]) -> Result<PointCloud> {
    let mut reader = open_reader(path)?;
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::input(format!("{}: empty file", path.display()))),
    };
    if first.len() < 2 {
        return Err(Error::input_at(
            "need an id column plus at least one coordinate column",
            record_line(&first),
        ));
    }

    let has_header = first
        .iter()
        .skip(1)
        .any(|cell| cell.parse::<f64>().is_err());
    let columns: Vec<String> = if has_header {
        first.iter().map(str::to_string).collect()
    } else {
        let mut names = vec!["id".to_string()];
        names.extend((0..first.len() - 1).map(|i| format!("x{i}")));
        names
    };
    if !exclude.is_empty() && !has_header {
        return Err(Error::input(
            "column exclusion by name needs a header row".to_string(),
        ));
    }
    for name in exclude {
        if !columns.iter().any(|c| c == name) {
            return Err(Error::input(format!("no column named '{name}' to exclude")));
        }
    }
    let keep: Vec<usize> = (1..columns.len())
        .filter(|i| !exclude.contains(&columns[*i]) && columns[*i] != LABEL_COLUMN)
        .collect();
    let label_col = columns.iter().position(|c| c == LABEL_COLUMN);
    if keep.is_empty() {
        return Err(Error::input("all coordinate columns were excluded".to_string()));
    }

    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut handle = |record: &csv::StringRecord| -> Result<()> {
        let line = record_line(record);
        if record.len() != columns.len() {
            return Err(Error::input_at(
                format!(
                    "row has {} fields, expected {}",
                    record.len(),
                    columns.len()
                ),
                line,
            ));
        }
        ids.push(record[0].to_string());
        let mut row = Vec::with_capacity(keep.len());
        for &i in &keep {
            row.push(parse_cell(&record[i], line)?);
        }
        rows.push(row);
        if let Some(col) = label_col {
            labels.push(record[col].to_string());
        }
        Ok(())
    };

    if !has_header {
        handle(&first)?;
    }
    for record in records {
        handle(&record?)?;
    }
    let points = Mat::from_rows(&rows)?;
    let labels = label_col.map(|_| labels);
    Ok(PointCloud::new(points, ids, labels)?)
}

/// Writes a point cloud with header `id, x0..`, plus a trailing `label`
/// column when labels are present.
pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut writer = open_writer(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((0..cloud.dim()).map(|i| format!("x{i}")));
    if cloud.labels().is_some() {
        header.push(LABEL_COLUMN.to_string());
    }
    writer.write_record(&header)?;
    for i in 0..cloud.len() {
        let mut record = vec![cloud.ids()[i].clone()];
        record.extend(cloud.point(i).iter().map(|v| fmt_float(*v)));
        if let Some(labels) = cloud.labels() {
            record.push(labels[i].clone());
        }
        writer.write_record(&record)?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

/// Dense matrix with id header row and id column.
pub fn write_matrix_csv(path: &Path, ids: &[String], m: &Mat) -> Result<()> {
    let mut writer = open_writer(path)?;
    let mut header = vec!["id".to_string()];
    header.extend(ids.iter().cloned());
    writer.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut record = vec![id.clone()];
        record.extend(m.row(i).iter().map(|v| fmt_float(*v)));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

/// Reads a dense matrix written by [`write_matrix_csv`]; row ids must match
/// the header ids in order.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Mat)> {
    let mut reader = open_reader(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::input(format!("{}: empty file", path.display()))),
    };
    if header.get(0) != Some("id") {
        return Err(Error::input_at(
            "matrix header must start with 'id'",
            record_line(&header),
        ));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = ids.len();
    if n == 0 {
        return Err(Error::input("matrix header has no ids".to_string()));
    }
    let mut m = Mat::zeros(n, n);
    let mut row = 0usize;
    for record in records {
        let record = record?;
        let line = record_line(&record);
        if row >= n {
            return Err(Error::input_at(format!("more than {n} data rows"), line));
        }
        if record.len() != n + 1 {
            return Err(Error::input_at(
                format!("row has {} fields, expected {}", record.len(), n + 1),
                line,
            ));
        }
        if &record[0] != ids[row].as_str() {
            return Err(Error::input_at(
                format!(
                    "row id '{}' does not match header id '{}'",
                    &record[0], ids[row]
                ),
                line,
            ));
        }
        for j in 0..n {
            m[(row, j)] = parse_cell(&record[j + 1], line)?;
        }
        row += 1;
    }
    if row != n {
        return Err(Error::input(format!("{row} data rows for {n} header ids")));
    }
    Ok((ids, m))
}

/// Two-column vector `(id, value)` with a named value column.
pub fn write_vector_csv(
    path: &Path,
    ids: &[String],
    values: &[f64],
    value_name: &str,
) -> Result<()> {
    let mut writer = open_writer(path)?;
    writer.write_record(["id", value_name])?;
    for (id, v) in ids.iter().zip(values) {
        writer.write_record([id.as_str(), &fmt_float(*v)])?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

/// Reads `(id, value)` pairs. With `value_col = None` the file must have
/// exactly two columns; otherwise the named column is used (header
/// required either way).
pub fn read_vector_csv(path: &Path, value_col: Option<&str>) -> Result<(Vec<String>, Vec<f64>)> {
    let mut reader = open_reader(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(Error::input(format!("{}: empty file", path.display()))),
    };
    let col = match value_col {
        Some(name) => header
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::input(format!("no column named '{name}'")))?,
        None => {
            if header.len() != 2 {
                return Err(Error::input_at(
                    format!("expected 2 columns, found {}", header.len()),
                    record_line(&header),
                ));
            }
            1
        }
    };
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for record in records {
        let record = record?;
        let line = record_line(&record);
        if record.len() <= col {
            return Err(Error::input_at("row is missing the value column", line));
        }
        ids.push(record[0].to_string());
        values.push(parse_cell(&record[col], line)?);
    }
    Ok((ids, values))
}

/// Embedding CSV with header `id, D1..Dm`.
pub fn write_embedding_csv(path: &Path, ids: &[String], coords: &Mat) -> Result<()> {
    let mut writer = open_writer(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=coords.cols()).map(|i| format!("D{i}")));
    writer.write_record(&header)?;
    for (i, id) in ids.iter().enumerate() {
        let mut record = vec![id.clone()];
        record.extend(coords.row(i).iter().map(|v| fmt_float(*v)));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}

/// Sample export: `id, energy, magnetization, s0..s{L^2-1}` — ingestible as
/// a point cloud by excluding the two observable columns.
pub fn write_ising_csv(path: &Path, sample: &IsingSample) -> Result<()> {
    let mut writer = open_writer(path)?;
    let dim = sample.side * sample.side;
    let mut header = vec!["id".to_string(), "energy".to_string(), "magnetization".to_string()];
    header.extend((0..dim).map(|i| format!("s{i}")));
    writer.write_record(&header)?;
    for i in 0..sample.len() {
        let mut record = vec![
            format!("{i}"),
            fmt_float(sample.energies[i]),
            fmt_float(sample.magnetizations[i]),
        ];
        record.extend(sample.configurations[i].iter().map(|s| format!("{s}")));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(Error::from)?;
    Ok(())
}
