//! Uniform cell partition of `(-L, L)` and cell-averaged fields on it.
//!
//! Fields store one value per cell (finite-volume averages), so integrals are
//! midpoint sums `dx * sum(values)` and are exact for piecewise-constant data.

use std::io::Write;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Three-point Gauss–Legendre nodes and weights on `[-1, 1]`, weights scaled to sum to 1.
const GAUSS3: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 18.0), (0.0, 8.0 / 18.0), (0.774_596_669_241_483_4, 5.0 / 18.0)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    half_length: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(half_length: f64, n_cells: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::param(format!("half length must be positive, got {half_length}")));
        }
        if n_cells < 4 {
            return Err(Error::param(format!("need at least 4 cells, got {n_cells}")));
        }
        Ok(Self { half_length, n_cells })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Length of the domain, `2L`.
    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        -self.half_length + (i as f64 + 0.5) * self.dx()
    }

    /// Left edge of cell `i`; `edge(n_cells)` is the right boundary.
    pub fn edge(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        let k = ((x + self.half_length) / self.dx()).floor();
        (k.max(0.0) as usize).min(self.n_cells - 1)
    }

    /// Same grid refined by a factor of two.
    pub fn refined(&self) -> Self {
        Self { half_length: self.half_length, n_cells: 2 * self.n_cells }
    }
}

/// Signed cell-averaged field (potentials, first variations, perturbations).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::param(format!("field has {} values for {} cells", values.len(), grid.n_cells())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite value in cell {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![0.0; grid.n_cells()] }
    }

    pub fn constant(grid: Grid1D, value: f64) -> Self {
        Self { grid, values: vec![value; grid.n_cells()] }
    }

    /// Cell averages of `f` by three-point Gauss quadrature on every cell.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let half = 0.5 * grid.dx();
        let values = (0..grid.n_cells())
            .map(|i| {
                let c = grid.center(i);
                GAUSS3.iter().map(|&(node, w)| w * f(c + node * half)).sum()
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise `a*self + b*other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        same_grid(self, other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Field { grid: self.grid, values })
    }

    /// Mirror image `x -> -x`.
    pub fn reflected(&self) -> Field {
        let mut values = self.values.clone();
        values.reverse();
        Field { grid: self.grid, values }
    }

    /// `dx`-weighted inner product.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        same_grid(self, other)?;
        Ok(self.grid.dx() * self.values.iter().zip(&other.values).map(|(x, y)| x * y).sum::<f64>())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.center(i), v)?;
        }
        Ok(())
    }
}

fn same_grid(f: &Field, g: &Field) -> Result<()> {
    if f.grid == g.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Nonnegative cell-averaged density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField(Field);

impl DensityField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        Self::try_from(Field::new(grid, values)?)
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self(Field::zeros(grid))
    }

    pub fn constant(grid: Grid1D, value: f64) -> Result<Self> {
        Self::try_from(Field::constant(grid, value))
    }

    /// Cell averages of a nonnegative function.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::try_from(Field::from_fn(grid, f))
    }

    pub(crate) fn from_vec_unchecked(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= 0.0));
        Self(Field::from_vec_unchecked(grid, values))
    }

    pub fn mass(&self) -> f64 {
        integrate(self)
    }

    pub fn max_value(&self) -> f64 {
        self.values().iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<DensityField> {
        if !(factor >= 0.0) {
            return Err(Error::param("density scale factor must be nonnegative"));
        }
        Ok(Self(Field::from_vec_unchecked(*self.grid(), self.values().iter().map(|v| v * factor).collect())))
    }

    pub fn reflected(&self) -> DensityField {
        Self(self.0.reflected())
    }

    pub fn as_field(&self) -> &Field {
        &self.0
    }

    pub fn into_field(self) -> Field {
        self.0
    }
}

impl Deref for DensityField {
    type Target = Field;

    fn deref(&self) -> &Field {
        &self.0
    }
}

impl TryFrom<Field> for DensityField {
    type Error = Error;

    fn try_from(field: Field) -> Result<Self> {
        match field.values.iter().position(|v| *v < 0.0) {
            Some(i) => Err(Error::param(format!("density is negative in cell {i}: {}", field.values[i]))),
            None => Ok(Self(field)),
        }
    }
}

/// Two species on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPair {
    pub rho: DensityField,
    pub eta: DensityField,
}

impl DensityPair {
    pub fn new(rho: DensityField, eta: DensityField) -> Result<Self> {
        same_grid(&rho, &eta)?;
        Ok(Self { rho, eta })
    }

    pub fn grid(&self) -> &Grid1D {
        self.rho.grid()
    }

    /// Total density `rho + eta`.
    pub fn sigma(&self) -> DensityField {
        let values = self.rho.values().iter().zip(self.eta.values()).map(|(r, e)| r + e).collect();
        DensityField::from_vec_unchecked(*self.grid(), values)
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.rho.mass(), self.eta.mass())
    }

    /// Species exchanged.
    pub fn swapped(&self) -> DensityPair {
        DensityPair { rho: self.eta.clone(), eta: self.rho.clone() }
    }

    /// `x,rho,eta,sigma` rows at the cell centres.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,rho,eta,sigma")?;
        let grid = self.grid();
        for (i, (r, e)) in self.rho.values().iter().zip(self.eta.values()).enumerate() {
            writeln!(out, "{},{},{},{}", grid.center(i), r, e, r + e)?;
        }
        Ok(())
    }
}

/// Midpoint quadrature `dx * sum(f_i)`.
pub fn integrate(f: &Field) -> f64 {
    f.grid.dx() * f.values.iter().sum::<f64>()
}

/// `height` times the indicator of `[a, b]`, area-weighted on partially covered cells.
pub fn indicator_profile(grid: &Grid1D, a: f64, b: f64, height: f64) -> Result<DensityField> {
    let l = grid.half_length();
    if !(a < b) {
        return Err(Error::param(format!("indicator needs a < b, got [{a}, {b}]")));
    }
    if a < -l || b > l {
        return Err(Error::param(format!("indicator [{a}, {b}] leaves the domain (-{l}, {l})")));
    }
    if !(height >= 0.0 && height.is_finite()) {
        return Err(Error::param("indicator height must be nonnegative"));
    }
    let dx = grid.dx();
    let values = (0..grid.n_cells())
        .map(|i| {
            let lo = grid.edge(i).max(a);
            let hi = grid.edge(i + 1).min(b);
            if hi > lo {
                height * (hi - lo) / dx
            } else {
                0.0
            }
        })
        .collect();
    Ok(DensityField::from_vec_unchecked(*grid, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

/// Discrete `L^p` norm of `f - g`; `L1` and `L2` are `dx`-weighted.
pub fn lp_distance(f: &Field, g: &Field, p: Norm) -> Result<f64> {
    same_grid(f, g)?;
    let diffs = f.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs());
    let dx = f.grid.dx();
    Ok(match p {
        Norm::L1 => dx * diffs.sum::<f64>(),
        Norm::L2 => (dx * diffs.map(|d| d * d).sum::<f64>()).sqrt(),
        Norm::Inf => diffs.fold(0.0, f64::max),
    })
}

/// Reads a `x,value` field CSV back onto `grid`.
pub fn read_field_csv(grid: Grid1D, text: &str) -> Result<Field> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::MalformedCsv(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["x", "value"] {
        return Err(Error::MalformedCsv(format!("expected header `x,value`, got `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut values = Vec::with_capacity(grid.n_cells());
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::MalformedCsv(e.to_string()))?;
        let value = record.get(1).and_then(|v| v.parse().ok());
        values.push(value.ok_or_else(|| Error::MalformedCsv(format!("row {}: {record:?}", k + 1)))?);
    }
    Field::new(grid, values)
}
