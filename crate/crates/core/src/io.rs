// Data sets: CSV ingestion and PCA projection.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Raw { source: String },
    Pca { source: String, components: usize, explained_variance: f64 },
}

/// An n x d numeric matrix, one observation per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub columns: Option<Vec<String>>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, columns: Option<Vec<String>>, source: impl Into<String>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || d == 0 {
            return domain("a data set needs at least one row and one column");
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return domain(format!("row {} has {} values, expected {d}", i + 1, r.len()));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return domain(format!("row {}, column {} is not a finite number", i + 1, j + 1));
            }
        }
        if let Some(c) = &columns {
            if c.len() != d {
                return domain(format!("{} column names for {d} columns", c.len()));
            }
        }
        Ok(Dataset { rows, columns, provenance: Provenance::Raw { source: source.into() } })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.rows[0].len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.d()).map(|j| self.column(j).iter().sum::<f64>() / self.n() as f64).collect()
    }

    /// max - min of each column.
    pub fn ranges(&self) -> Vec<f64> {
        (0..self.d())
            .map(|j| {
                let c = self.column(j);
                c.iter().copied().fold(f64::NEG_INFINITY, f64::max) - c.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ColumnSelector {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(s.parse::<usize>().map_or_else(|_| ColumnSelector::Name(s.to_string()), ColumnSelector::Index))
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Columns to keep (0-based indices or header names); all when `None`.
    pub columns: Option<Vec<ColumnSelector>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { delimiter: b',', has_header: true, columns: None }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, opts, &path.display().to_string())
}

pub fn read_csv<R: std::io::Read>(reader: R, opts: &CsvOptions, source: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let header: Option<Vec<String>> = if opts.has_header {
        Some(rdr.headers().map_err(|e| Error::Parse(format!("{source}: {e}")))?.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("{source}: {e}")))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    let width = header.as_ref().map(Vec::len).or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    let selected: Vec<usize> = match &opts.columns {
        None => (0..width).collect(),
        Some(sel) => sel
            .iter()
            .map(|c| match c {
                ColumnSelector::Index(i) if *i < width => Ok(*i),
                ColumnSelector::Index(i) => {
                    Err(Error::Parse(format!("{source}: column index {i} out of range (width {width})")))
                }
                ColumnSelector::Name(name) => header
                    .as_ref()
                    .and_then(|h| h.iter().position(|x| x == name))
                    .ok_or_else(|| Error::Parse(format!("{source}: no column named '{name}'"))),
            })
            .collect::<Result<_>>()?,
    };
    let first_data_line = if opts.has_header { 2 } else { 1 };
    let mut values = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let mut out = Vec::with_capacity(selected.len());
        for &j in &selected {
            let cell = row[j].as_str();
            let line = r + first_data_line;
            let name = header.as_ref().map_or_else(|| format!("{}", j + 1), |h| format!("{} ('{}')", j + 1, h[j]));
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                return Err(Error::Parse(format!("{source}: line {line}, column {name}: missing value")));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Parse(format!("{source}: line {line}, column {name}: cannot parse '{cell}' as a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "{source}: line {line}, column {name}: value '{cell}' is not finite"
                )));
            }
            out.push(v);
        }
        values.push(out);
    }
    let columns = header.map(|h| selected.iter().map(|&j| h[j].clone()).collect());
    Dataset::new(values, columns, source)
}

/// Scores on the top `k` principal components of the centred data
/// (eigenvectors of the sample covariance). Each direction is signed so
/// that its largest-magnitude loading is positive.
pub fn pca_project(data: &Dataset, k: usize) -> Result<Dataset> {
    let (n, d) = (data.n(), data.d());
    if k == 0 || k > n.min(d) {
        return domain(format!("PCA needs 1 <= k <= min(n, d) = {}, got {k}", n.min(d)));
    }
    let mean = data.mean();
    let x = DMatrix::from_fn(n, d, |i, j| data.rows[i][j] - mean[j]);
    let cov = x.transpose() * &x / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let kept: f64 = order[..k].iter().map(|&i| eig.eigenvalues[i].max(0.0)).sum();
    let mut dirs = DMatrix::zeros(d, k);
    for (c, &i) in order[..k].iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let lead = v.iter().copied().fold(0.0f64, |m, e| if e.abs() > m.abs() { e } else { m });
        if lead < 0.0 {
            v = -v;
        }
        dirs.set_column(c, &v);
    }
    let scores = x * dirs;
    let rows = (0..n).map(|i| scores.row(i).iter().copied().collect()).collect();
    let source = match &data.provenance {
        Provenance::Raw { source } | Provenance::Pca { source, .. } => source.clone(),
    };
    Ok(Dataset {
        rows,
        columns: Some((1..=k).map(|c| format!("PC{c}")).collect()),
        provenance: Provenance::Pca {
            source,
            components: k,
            explained_variance: if total > 0.0 { kept / total } else { 1.0 },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_numeric_csv_with_header() {
        let d = read_csv("a,b\n1,2\n3,4.5\n-1,0\n".as_bytes(), &CsvOptions::default(), "mem").unwrap();
        assert_eq!((d.n(), d.d()), (3, 2));
        assert_eq!(d.rows[1], vec![3.0, 4.5]);
        assert_eq!(d.columns, Some(vec!["a".into(), "b".into()]));
        let opts = CsvOptions { columns: Some(vec!["b".parse().unwrap()]), ..Default::default() };
        let d = read_csv("a,b\n1,2\n3,4.5\n".as_bytes(), &opts, "mem").unwrap();
        assert_eq!(d.rows, vec![vec![2.0], vec![4.5]]);
        let opts = CsvOptions { has_header: false, delimiter: b'\t', columns: None };
        let d = read_csv("1\t2\n3\t4\n".as_bytes(), &opts, "mem").unwrap();
        assert_eq!(d.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn bad_cells_are_located() {
        let e = read_csv("a,b\n1,2\n3,x\n".as_bytes(), &CsvOptions::default(), "mem").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("'b'") && msg.contains("'x'"), "{msg}");
        let e = read_csv("a,b\n1,\n".as_bytes(), &CsvOptions::default(), "mem").unwrap_err();
        assert!(e.to_string().contains("missing value"));
        assert!(read_csv("a,b\n1,2,3\n".as_bytes(), &CsvOptions::default(), "mem").is_err());
    }

    #[test]
    fn pca_rank_one_and_orthogonal() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.37 - 2.0;
                vec![t, -2.0 * t, 0.5 * t]
            })
            .collect();
        let d = Dataset::new(rows, None, "mem").unwrap();
        let p = pca_project(&d, 1).unwrap();
        match p.provenance {
            Provenance::Pca { explained_variance, .. } => assert!((explained_variance - 1.0).abs() < 1e-10),
            _ => panic!(),
        }
        // Orthogonal centred columns: the scores are the columns themselves, up to sign and order.
        let rows = vec![vec![3.0, 0.0], vec![-3.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let d = Dataset::new(rows.clone(), None, "mem").unwrap();
        let p = pca_project(&d, 2).unwrap();
        for (a, b) in p.rows.iter().zip(&rows) {
            assert!((a[0].abs() - b[0].abs()).abs() < 1e-12 && (a[1].abs() - b[1].abs()).abs() < 1e-12);
        }
        assert!(pca_project(&d, 3).is_err());
        assert!(pca_project(&d, 0).is_err());
    }
}
