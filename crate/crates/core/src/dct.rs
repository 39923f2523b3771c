//! Orthonormal 2D discrete cosine transform and truncated field
//! parameterization.
//!
//! Forward transform is the separable DCT-II with per-axis scale factors
//! `alpha_0 = sqrt(1/N)`, `alpha_k = sqrt(2/N)`; the inverse is its
//! transpose (DCT-III), so the pair is exactly orthonormal for any
//! `rows x cols` grid.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D grid of real values stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "field dims must be positive, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "field {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite field value at ({}, {})",
                i / cols,
                i % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::new(rows, cols, values)
    }

    pub(crate) fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Serializes as `rows,cols` followed by one comma-separated line per row.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("{},{}\n", self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.get(r, c));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "empty field file"))?;
        let dims: Vec<usize> = header
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(origin, 1, format!("bad `rows,cols` header: {e}")))?;
        if dims.len() != 2 {
            return Err(Error::parse(origin, 1, "header must be `rows,cols`"));
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut values = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (idx, line) in lines {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(origin, idx + 1, e.to_string()))?;
            if row.len() != cols {
                return Err(Error::parse(
                    origin,
                    idx + 1,
                    format!("expected {cols} values, got {}", row.len()),
                ));
            }
            values.extend(row);
            seen += 1;
        }
        if seen != rows {
            return Err(Error::parse(
                origin,
                seen + 1,
                format!("expected {rows} rows, got {seen}"),
            ));
        }
        Self::new(rows, cols, values).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    /// Writes the CSV form, creating missing parent directories.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::table::write_text(path, &self.to_csv_string())
    }
}

/// Retained-mode window in the top-left corner of the coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "size", rename_all = "lowercase")]
pub enum CoeffSelection {
    /// `{(i, j) : i < w, j < w}`
    Square(usize),
    /// `{(i, j) : i + j < w}`
    Triangle(usize),
}

impl CoeffSelection {
    pub fn width(&self) -> usize {
        match *self {
            CoeffSelection::Square(w) | CoeffSelection::Triangle(w) => w,
        }
    }

    fn contains(&self, i: usize, j: usize) -> bool {
        match *self {
            CoeffSelection::Square(w) => i < w && j < w,
            CoeffSelection::Triangle(w) => i + j < w,
        }
    }

    /// Number of retained coefficients (k2).
    pub fn len(&self) -> usize {
        match *self {
            CoeffSelection::Square(w) => w * w,
            CoeffSelection::Triangle(w) => w * (w + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0
    }

    pub fn check_fits(&self, rows: usize, cols: usize) -> Result<()> {
        let w = self.width();
        if w == 0 {
            return Err(Error::InvalidSelection("selection width must be >= 1".into()));
        }
        if w > rows || w > cols {
            return Err(Error::InvalidSelection(format!(
                "{self:?} does not fit a {rows}x{cols} coefficient matrix"
            )));
        }
        Ok(())
    }

    /// Selected `(row, col)` pairs in zig-zag order: anti-diagonals by
    /// increasing `i + j`, alternating direction as in JPEG scans.
    pub fn indices(&self) -> Vec<(usize, usize)> {
        let w = self.width();
        if w == 0 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(self.len());
        for d in 0..(2 * w - 1) {
            let diag = (0..=d).map(move |i| (i, d - i));
            let pairs: Vec<_> = if d % 2 == 1 {
                diag.collect()
            } else {
                diag.rev().collect()
            };
            out.extend(pairs.into_iter().filter(|&(i, j)| self.contains(i, j)));
        }
        out
    }
}

/// Truncated coefficient vector `theta` with the selection that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVector {
    pub theta: Vec<f64>,
    pub selection: CoeffSelection,
    pub field_dims: (usize, usize),
}

impl CoeffVector {
    pub fn new(theta: Vec<f64>, selection: CoeffSelection, field_dims: (usize, usize)) -> Result<Self> {
        selection.check_fits(field_dims.0, field_dims.1)?;
        if theta.len() != selection.len() {
            return Err(Error::InvalidSelection(format!(
                "{selection:?} retains {} coefficients, theta has {}",
                selection.len(),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite DCT coefficient".into()));
        }
        Ok(Self {
            theta,
            selection,
            field_dims,
        })
    }

    pub fn zeros(selection: CoeffSelection, field_dims: (usize, usize)) -> Result<Self> {
        Self::new(vec![0.0; selection.len()], selection, field_dims)
    }

    pub fn k2(&self) -> usize {
        self.theta.len()
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(theta, self.selection, self.field_dims)
    }

    /// Full coefficient matrix with unselected entries set to zero.
    pub fn padded(&self) -> DMatrix<f64> {
        let (rows, cols) = self.field_dims;
        let mut full = DMatrix::zeros(rows, cols);
        for (&(i, j), &t) in self.selection.indices().iter().zip(&self.theta) {
            full[(i, j)] = t;
        }
        full
    }
}

/// `n x n` matrix `C` with `C[k][s] = alpha_k cos(pi (2s+1) k / 2n)`.
pub(crate) fn cosine_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, s| {
        let alpha = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        alpha * (PI * (2 * s + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coefficient".into()));
    }
    Ok(())
}

pub fn dct2_forward(field: &SpatialField) -> DMatrix<f64> {
    let y = field.to_matrix();
    let cr = cosine_matrix(field.rows());
    let cc = cosine_matrix(field.cols());
    &cr * y * cc.transpose()
}

pub fn dct2_inverse(coeffs: &DMatrix<f64>) -> Result<SpatialField> {
    if coeffs.nrows() == 0 || coeffs.ncols() == 0 {
        return Err(Error::InvalidInput("empty coefficient matrix".into()));
    }
    check_finite(coeffs)?;
    let cr = cosine_matrix(coeffs.nrows());
    let cc = cosine_matrix(coeffs.ncols());
    SpatialField::from_matrix(&(cr.transpose() * coeffs * cc))
}

pub fn select_coeffs(full: &DMatrix<f64>, sel: CoeffSelection) -> Result<CoeffVector> {
    sel.check_fits(full.nrows(), full.ncols())?;
    let theta = sel.indices().into_iter().map(|(i, j)| full[(i, j)]).collect();
    CoeffVector::new(theta, sel, (full.nrows(), full.ncols()))
}

pub fn reconstruct(cv: &CoeffVector) -> Result<SpatialField> {
    dct2_inverse(&cv.padded())
}

/// Precomputed reconstruction for a fixed selection and grid, used inside
/// the sampler where the same map is evaluated every iteration.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    selection: CoeffSelection,
    dims: (usize, usize),
    /// One row-major field per retained coefficient.
    modes: Vec<Vec<f64>>,
}

impl Reconstructor {
    pub fn new(selection: CoeffSelection, dims: (usize, usize)) -> Result<Self> {
        selection.check_fits(dims.0, dims.1)?;
        let cr = cosine_matrix(dims.0);
        let cc = cosine_matrix(dims.1);
        let modes = selection
            .indices()
            .into_iter()
            .map(|(i, j)| {
                let mut m = Vec::with_capacity(dims.0 * dims.1);
                for r in 0..dims.0 {
                    for c in 0..dims.1 {
                        m.push(cr[(i, r)] * cc[(j, c)]);
                    }
                }
                m
            })
            .collect();
        Ok(Self { selection, dims, modes })
    }

    pub fn selection(&self) -> CoeffSelection {
        self.selection
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn field_values(&self, theta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.modes.len());
        let mut out = vec![0.0; self.dims.0 * self.dims.1];
        for (t, mode) in theta.iter().zip(&self.modes) {
            for (o, m) in out.iter_mut().zip(mode) {
                *o += t * m;
            }
        }
        out
    }

    /// Field value at one cell.
    pub fn value_at(&self, theta: &[f64], row: usize, col: usize) -> f64 {
        let idx = row * self.dims.1 + col;
        theta.iter().zip(&self.modes).map(|(t, m)| t * m[idx]).sum()
    }

    pub fn field(&self, theta: &[f64]) -> Result<SpatialField> {
        SpatialField::new(self.dims.0, self.dims.1, self.field_values(theta))
    }
}
