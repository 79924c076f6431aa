//! Network data: a symmetric response matrix, symmetric dyadic covariate
//! matrices, a diagonal-observed flag, and an optional observation mask used
//! for held-out dyads.
//!
//! Two on-disk formats are supported. The edge list format has a header
//! `i,j,y,x1..xp` (plus an optional `obs` column for masks) with 0-based node
//! ids and each unordered pair listed at most once; unlisted dyads default to
//! zero response and zero covariates. The dense format is a manifest of
//! `key = value` lines pointing at one matrix CSV per `y`/`x` entry.

use crate::error::{GlnemError, Result};
use crate::linalg::Mat;
use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct NetworkData {
    pub n: usize,
    /// Symmetric response matrix.
    pub y: Mat,
    /// Symmetric covariate matrices, one per covariate.
    pub x: Vec<Mat>,
    pub diagonal_observed: bool,
    /// Optional symmetric observation mask (1 = observed). Off-diagonal
    /// dyads only; the diagonal is governed by `diagonal_observed`.
    pub mask: Option<Vec<u8>>,
}

impl NetworkData {
    pub fn new(y: Mat, x: Vec<Mat>, diagonal_observed: bool) -> Result<Self> {
        let n = y.rows();
        if y.cols() != n {
            return Err(GlnemError::Data("response matrix must be square".into()));
        }
        for (k, xk) in x.iter().enumerate() {
            if xk.rows() != n || xk.cols() != n {
                return Err(GlnemError::Data(format!(
                    "covariate matrix {k} has shape {}x{}, expected {n}x{n}",
                    xk.rows(),
                    xk.cols()
                )));
            }
        }
        let data = NetworkData { n, y, x, diagonal_observed, mask: None };
        data.check_symmetry(1e-12)?;
        Ok(data)
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    pub fn check_symmetry(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if (self.y.at(i, j) - self.y.at(j, i)).abs() > tol {
                    return Err(GlnemError::Data(format!(
                        "response matrix is asymmetric at ({i},{j})"
                    )));
                }
                for (k, xk) in self.x.iter().enumerate() {
                    if (xk.at(i, j) - xk.at(j, i)).abs() > tol {
                        return Err(GlnemError::Data(format!(
                            "covariate {k} is asymmetric at ({i},{j})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn with_mask(mut self, mask: Vec<u8>) -> Result<Self> {
        if mask.len() != self.n * self.n {
            return Err(GlnemError::Data("mask shape mismatch".into()));
        }
        for i in 0..self.n {
            for j in 0..self.n {
                if mask[i * self.n + j] != mask[j * self.n + i] {
                    return Err(GlnemError::Data(format!("mask is asymmetric at ({i},{j})")));
                }
            }
        }
        self.mask = Some(mask);
        Ok(self)
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        if i == j && !self.diagonal_observed {
            return false;
        }
        match &self.mask {
            Some(m) => m[i * self.n + j] == 1,
            None => true,
        }
    }

    /// Observed dyads (i <= j) in lexicographic order: the canonical layout
    /// of all per-dyad vectors.
    pub fn dyads(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                if self.is_observed(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Returns a copy whose mask additionally hides `held_out` dyads.
    pub fn mask_out(&self, held_out: &[(usize, usize)]) -> NetworkData {
        let n = self.n;
        let mut mask = self
            .mask
            .clone()
            .unwrap_or_else(|| vec![1u8; n * n]);
        for &(i, j) in held_out {
            mask[i * n + j] = 0;
            mask[j * n + i] = 0;
        }
        let mut out = self.clone();
        out.mask = Some(mask);
        out
    }
}

/// Validates that all observed responses lie in the family's support,
/// reporting the first offending dyad.
pub fn check_family_support(
    data: &NetworkData,
    family: crate::families::Family,
) -> Result<()> {
    for (i, j) in data.dyads() {
        if let Err(e) = crate::families::check_support(family.kind, data.y.at(i, j)) {
            return Err(GlnemError::Data(format!("dyad ({i},{j}): {e}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkFormat {
    EdgeCsv,
    DenseCsv,
}

/// Loads a network from `path` in the requested format.
pub fn load_network(path: &Path, format: NetworkFormat) -> Result<NetworkData> {
    match format {
        NetworkFormat::EdgeCsv => load_edge_csv(path),
        NetworkFormat::DenseCsv => load_dense_manifest(path),
    }
}

fn parse_f64(tok: &str, line_no: usize) -> Result<f64> {
    tok.trim().parse::<f64>().map_err(|_| {
        GlnemError::Data(format!("line {line_no}: cannot parse '{tok}' as a number"))
    })
}

fn load_edge_csv(path: &Path) -> Result<NetworkData> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let (_, header) = lines
        .next()
        .ok_or_else(|| GlnemError::Data("empty edge file".into()))?;
    let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
    if cols.len() < 3 || cols[0] != "i" || cols[1] != "j" || cols[2] != "y" {
        return Err(GlnemError::Data(
            "edge header must start with i,j,y".into(),
        ));
    }
    let has_obs = cols.last() == Some(&"obs");
    let p = cols.len() - 3 - usize::from(has_obs);

    struct Row {
        i: usize,
        j: usize,
        y: f64,
        x: Vec<f64>,
        obs: bool,
    }
    let mut rows: Vec<Row> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut n = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != cols.len() {
            return Err(GlnemError::Data(format!(
                "line {line_no}: expected {} fields, found {}",
                cols.len(),
                toks.len()
            )));
        }
        let i = toks[0].trim().parse::<usize>().map_err(|_| {
            GlnemError::Data(format!("line {line_no}: bad node id '{}'", toks[0]))
        })?;
        let j = toks[1].trim().parse::<usize>().map_err(|_| {
            GlnemError::Data(format!("line {line_no}: bad node id '{}'", toks[1]))
        })?;
        let key = (i.min(j), i.max(j));
        if !seen.insert(key) {
            return Err(GlnemError::Data(format!(
                "line {line_no}: duplicate dyad ({i},{j})"
            )));
        }
        let y = parse_f64(toks[2], line_no)?;
        let mut x = Vec::with_capacity(p);
        for k in 0..p {
            x.push(parse_f64(toks[3 + k], line_no)?);
        }
        let obs = if has_obs {
            match toks[cols.len() - 1].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(GlnemError::Data(format!(
                        "line {line_no}: obs column must be 0 or 1, found '{other}'"
                    )))
                }
            }
        } else {
            true
        };
        n = n.max(i + 1).max(j + 1);
        rows.push(Row { i, j, y, x, obs });
    }
    if n == 0 {
        return Err(GlnemError::Data("edge file contains no dyads".into()));
    }

    let mut y = Mat::zeros(n, n);
    let mut xs = vec![Mat::zeros(n, n); p];
    let mut mask = vec![1u8; n * n];
    let mut any_masked = false;
    let mut diag_seen = 0usize;
    for row in &rows {
        *y.at_mut(row.i, row.j) = row.y;
        *y.at_mut(row.j, row.i) = row.y;
        for k in 0..p {
            *xs[k].at_mut(row.i, row.j) = row.x[k];
            *xs[k].at_mut(row.j, row.i) = row.x[k];
        }
        if row.i == row.j {
            diag_seen += 1;
        }
        if !row.obs {
            mask[row.i * n + row.j] = 0;
            mask[row.j * n + row.i] = 0;
            any_masked = true;
        }
    }
    let diagonal_observed = if diag_seen == 0 {
        false
    } else if diag_seen == n {
        true
    } else {
        return Err(GlnemError::Data(format!(
            "edge file lists {diag_seen} of {n} diagonal entries; list all or none"
        )));
    };
    let mut data = NetworkData::new(y, xs, diagonal_observed)?;
    if any_masked {
        data = data.with_mask(mask)?;
    }
    Ok(data)
}

fn load_dense_matrix(path: &Path) -> Result<Mat> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>> =
            t.split(',').map(|tok| parse_f64(tok, idx + 1)).collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(GlnemError::Data(format!("{}: empty matrix", path.display())));
    }
    let n = rows.len();
    for (idx, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(GlnemError::Data(format!(
                "{}: row {} has {} entries, expected {n}",
                path.display(),
                idx + 1,
                r.len()
            )));
        }
    }
    Ok(Mat::from_rows(&rows))
}

fn load_dense_manifest(path: &Path) -> Result<NetworkData> {
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut y_path = None;
    let mut x_paths = Vec::new();
    let mut diagonal_observed = false;
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, value) = t.split_once('=').ok_or_else(|| {
            GlnemError::Data(format!("manifest line {}: expected key = value", idx + 1))
        })?;
        match key.trim() {
            "y" => y_path = Some(dir.join(value.trim())),
            "x" => x_paths.push(dir.join(value.trim())),
            "diagonal_observed" => {
                diagonal_observed = value.trim() == "true";
            }
            other => {
                return Err(GlnemError::Data(format!(
                    "manifest line {}: unknown key '{other}'",
                    idx + 1
                )))
            }
        }
    }
    let y_path =
        y_path.ok_or_else(|| GlnemError::Data("manifest is missing the y entry".into()))?;
    let y = load_dense_matrix(&y_path)?;
    let mut xs = Vec::with_capacity(x_paths.len());
    for p in &x_paths {
        xs.push(load_dense_matrix(p)?);
    }
    NetworkData::new(y, xs, diagonal_observed)
}

/// Writes the network as an edge CSV (all dyads i <= j that carry data).
/// Float formatting is round-trip exact, so `load(save(d))` reproduces `d`.
pub fn save_network(data: &NetworkData, path: &Path) -> Result<()> {
    let mut out = String::new();
    let has_mask = data.mask.is_some();
    out.push_str("i,j,y");
    for k in 0..data.p() {
        out.push_str(&format!(",x{}", k + 1));
    }
    if has_mask {
        out.push_str(",obs");
    }
    out.push('\n');
    for i in 0..data.n {
        for j in i..data.n {
            if i == j && !data.diagonal_observed {
                continue;
            }
            out.push_str(&format!("{},{},{}", i, j, data.y.at(i, j)));
            for xk in &data.x {
                out.push_str(&format!(",{}", xk.at(i, j)));
            }
            if has_mask {
                out.push_str(if data.is_observed(i, j) { ",1" } else { ",0" });
            }
            out.push('\n');
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
