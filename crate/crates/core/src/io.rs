//! CSV readers and writers for panels, adjacency matrices and partitions.
//!
//! Panels are stored time-major: a header `time,<node ids>` followed by one
//! row per time point. Adjacency files have a header `node,<node ids>` and one
//! row per node. Partitions are `node,group` with one-based groups. Floats are
//! written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::simulate::{Network, Panel};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Table {
    header: Vec<String>,
    /// `(line, first column, numeric cells)`.
    rows: Vec<(usize, String, Vec<f64>)>,
}

fn parse_table(text: &str, file: &str) -> Result<Table> {
    let perr = |row: usize, msg: String| Error::Parse {
        file: file.to_string(),
        row,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| perr(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(perr(1, "header needs a label column and at least one data column".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            perr(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(perr(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let mut cells = Vec::with_capacity(rec.len() - 1);
        for (c, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| perr(line, format!("column `{}`: `{cell}` is not a number", header[c])))?;
            if !v.is_finite() {
                return Err(perr(line, format!("column `{}`: non-finite value", header[c])));
            }
            cells.push(v);
        }
        rows.push((line, rec[0].to_string(), cells));
    }
    if rows.is_empty() {
        return Err(perr(1, "no data rows".into()));
    }
    Ok(Table { header, rows })
}

fn read(path: &Path) -> Result<(String, String)> {
    Ok((fs::read_to_string(path)?, path.display().to_string()))
}

/// Node identifiers and the `N x T` panel matrix from time-major CSV text.
pub fn parse_panel_matrix(text: &str, file: &str) -> Result<(Vec<String>, DMatrix<f64>)> {
    let t = parse_table(text, file)?;
    let n = t.header.len() - 1;
    let data = DMatrix::from_fn(n, t.rows.len(), |i, s| t.rows[s].2[i]);
    Ok((t.header[1..].to_vec(), data))
}

pub fn parse_panel(text: &str, file: &str) -> Result<(Vec<String>, Panel)> {
    let (ids, data) = parse_panel_matrix(text, file)?;
    let panel = Panel::new(data).map_err(|e| Error::Parse {
        file: file.into(),
        row: 1,
        msg: e.to_string(),
    })?;
    Ok((ids, panel))
}

pub fn read_panel(path: &Path) -> Result<(Vec<String>, Panel)> {
    let (text, file) = read(path)?;
    parse_panel(&text, &file)
}

pub fn panel_to_csv(ids: &[String], data: &DMatrix<f64>) -> String {
    let mut s = String::from("time");
    for id in ids {
        s.push(',');
        s.push_str(id);
    }
    s.push('\n');
    for c in 0..data.ncols() {
        let _ = write!(s, "{}", c + 1);
        for i in 0..data.nrows() {
            s.push(',');
            s.push_str(&fmt_f64(data[(i, c)]));
        }
        s.push('\n');
    }
    s
}

/// Node identifiers and the validated network from adjacency CSV text.
pub fn parse_adjacency(text: &str, file: &str) -> Result<(Vec<String>, Network)> {
    let t = parse_table(text, file)?;
    let n = t.header.len() - 1;
    if t.rows.len() != n {
        return Err(Error::Parse {
            file: file.into(),
            row: t.rows.last().map_or(1, |r| r.0),
            msg: format!("adjacency has {} rows for {n} columns", t.rows.len()),
        });
    }
    let w = DMatrix::from_fn(n, n, |i, j| t.rows[i].2[j]);
    let net = Network::from_adjacency(w).map_err(|e| Error::Parse {
        file: file.into(),
        row: 1,
        msg: e.to_string(),
    })?;
    Ok((t.header[1..].to_vec(), net))
}

pub fn read_adjacency(path: &Path) -> Result<(Vec<String>, Network)> {
    let (text, file) = read(path)?;
    parse_adjacency(&text, &file)
}

pub fn adjacency_to_csv(ids: &[String], net: &Network) -> String {
    let w = net.adjacency();
    let mut s = String::from("node");
    for id in ids {
        s.push(',');
        s.push_str(id);
    }
    s.push('\n');
    for (i, id) in ids.iter().enumerate() {
        s.push_str(id);
        for j in 0..ids.len() {
            let _ = write!(s, ",{}", w[(i, j)] as u8);
        }
        s.push('\n');
    }
    s
}

/// A partition from `node,group` CSV text; nodes are matched against `ids`.
pub fn parse_groups(text: &str, file: &str, ids: &[String]) -> Result<GroupStructure> {
    let t = parse_table(text, file)?;
    let perr = |row: usize, msg: String| Error::Parse {
        file: file.into(),
        row,
        msg,
    };
    if t.header.len() != 2 {
        return Err(perr(1, "expected columns node,group".into()));
    }
    let mut labels = vec![None; ids.len()];
    for (line, node, cells) in &t.rows {
        let i = ids
            .iter()
            .position(|id| id == node)
            .ok_or_else(|| perr(*line, format!("unknown node `{node}`")))?;
        let g = cells[0];
        if g < 1.0 || g.fract() != 0.0 {
            return Err(perr(*line, format!("group label {g} is not a positive integer")));
        }
        if labels[i].replace(g as usize - 1).is_some() {
            return Err(perr(*line, format!("node `{node}` listed twice")));
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| perr(1, format!("node `{}` has no group", ids[i]))))
        .collect::<Result<Vec<_>>>()?;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    GroupStructure::new(k, labels).map_err(|e| perr(1, e.to_string()))
}

pub fn read_groups(path: &Path, ids: &[String]) -> Result<GroupStructure> {
    let (text, file) = read(path)?;
    parse_groups(&text, &file, ids)
}

pub fn groups_to_csv(ids: &[String], groups: &GroupStructure) -> String {
    let mut s = String::from("node,group\n");
    for (i, id) in ids.iter().enumerate() {
        let _ = writeln!(s, "{id},{}", groups.label(i) + 1);
    }
    s
}

pub fn matrix_to_csv(ids: &[String], m: &DMatrix<f64>) -> String {
    let mut s = String::from("node");
    for id in ids {
        s.push(',');
        s.push_str(id);
    }
    s.push('\n');
    for (i, id) in ids.iter().enumerate() {
        s.push_str(id);
        for j in 0..m.ncols() {
            s.push(',');
            s.push_str(&fmt_f64(m[(i, j)]));
        }
        s.push('\n');
    }
    s
}

/// Default node identifiers `1..=n`.
pub fn default_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Per-node z-scores with divisor `T`; a constant series is an error naming the node.
pub fn standardize_rows(data: &DMatrix<f64>, ids: &[String]) -> Result<DMatrix<f64>> {
    let t = data.ncols() as f64;
    let mut out = data.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let mean = row.iter().sum::<f64>() / t;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
        let sd = var.sqrt();
        if !(sd > 0.0) || sd <= 1e-14 * mean.abs() {
            return Err(Error::invalid(format!("series `{}` is constant", ids[i])));
        }
        for v in row.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}
