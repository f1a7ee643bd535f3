//! Plain-text file formats.
//!
//! Tensor series files:
//!
//! ```text
//! tsrs 1
//! K T d_1 .. d_K
//! <T · Π d_k floats, one time step per line, i_1 fastest>
//! ```
//!
//! Values are written with 17 significant digits so a write/read round trip
//! is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, TensorSeries};

const MAGIC: &str = "tsrs 1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse(format!("invalid number `{tok}`")))
}

fn parse_usize(tok: &str) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::Parse(format!("invalid integer `{tok}`")))
}

pub fn write_series<W: Write>(x: &TensorSeries, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    let dims: Vec<String> = x.dims().iter().map(|d| d.to_string()).collect();
    writeln!(w, "{} {} {}", x.order(), x.len(), dims.join(" "))?;
    for step in x.steps() {
        let line: Vec<String> = step.data().iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series<R: Read>(mut r: R) -> Result<TensorSeries> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(Error::Parse(format!("missing `{MAGIC}` header")));
    }
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| Error::Parse("missing shape line".into()))?
        .split_whitespace()
        .map(parse_usize)
        .collect::<Result<_>>()?;
    let (k, t) = match header.as_slice() {
        [k, t, ..] => (*k, *t),
        _ => return Err(Error::Parse("shape line needs K T d_1 .. d_K".into())),
    };
    if k == 0 || header.len() != k + 2 {
        return Err(Error::Parse(format!("shape line declares K={k} but lists {} dims", header.len().saturating_sub(2))));
    }
    let dims = header[2..].to_vec();
    let expected = t * dims.iter().product::<usize>();
    let values: Vec<f64> = lines.flat_map(str::split_whitespace).map(parse_f64).collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Parse(format!("expected {expected} values, found {}", values.len())));
    }
    TensorSeries::from_flat(dims, t, &values)
}

pub fn save_series(x: &TensorSeries, path: &Path) -> Result<()> {
    write_series(x, BufWriter::new(File::create(path)?))
}

pub fn load_series(path: &Path) -> Result<TensorSeries> {
    read_series(BufReader::new(File::open(path)?))
}

/// Named matrices as `matrix <name> <rows> <cols>` followed by one line per row.
pub fn write_labeled_matrices<W: Write>(mats: &[(String, &Matrix)], mut w: W) -> Result<()> {
    for (name, m) in mats {
        if name.contains(char::is_whitespace) || name.is_empty() {
            return Err(Error::InvalidParameter(format!("invalid matrix label `{name}`")));
        }
        writeln!(w, "matrix {name} {} {}", m.nrows(), m.ncols())?;
        for row in m.row_iter() {
            let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_labeled_matrices<R: BufRead>(r: R) -> Result<Vec<(String, Matrix)>> {
    let mut out = Vec::new();
    let mut lines = r.lines();
    while let Some(line) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let head: Vec<&str> = line.split_whitespace().collect();
        let [tag, name, rows, cols] = head.as_slice() else {
            return Err(Error::Parse(format!("expected `matrix <name> <rows> <cols>`, got `{line}`")));
        };
        if *tag != "matrix" {
            return Err(Error::Parse(format!("expected `matrix`, got `{tag}`")));
        }
        let (rows, cols) = (parse_usize(rows)?, parse_usize(cols)?);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let row = lines.next().ok_or_else(|| Error::Parse(format!("matrix {name} is truncated")))??;
            let vals: Vec<f64> = row.split_whitespace().map(parse_f64).collect::<Result<_>>()?;
            if vals.len() != cols {
                return Err(Error::Parse(format!("matrix {name}: row has {} values, expected {cols}", vals.len())));
            }
            data.extend(vals);
        }
        out.push((name.to_string(), Matrix::from_row_slice(rows, cols, &data)));
    }
    Ok(out)
}

pub fn load_labeled_matrices(path: &Path) -> Result<Vec<(String, Matrix)>> {
    read_labeled_matrices(BufReader::new(File::open(path)?))
}

/// Matrix as CSV with a `row,<prefix>1,<prefix>2,..` header.
pub fn write_matrix_csv<W: Write>(m: &Matrix, prefix: &str, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let mut header = vec!["row".to_string()];
    header.extend((1..=m.ncols()).map(|j| format!("{prefix}{j}")));
    w.write_record(&header)?;
    for (i, row) in m.row_iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric CSV as a `rows × cols` matrix. A first line that does not parse
/// as numbers is treated as a header.
pub fn read_numeric_csv<R: Read>(r: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: Result<Vec<f64>> = rec.iter().map(parse_f64).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Parse("no numeric rows".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("row {bad} has {} fields, expected {ncols}", rows[bad].len())));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Matrix::from_row_slice(flat.len() / ncols, ncols, &flat))
}

pub fn load_numeric_csv(path: &Path) -> Result<Matrix> {
    read_numeric_csv(BufReader::new(File::open(path)?))
}
