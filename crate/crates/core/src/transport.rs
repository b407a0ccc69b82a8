//! Quadratic optimal transport on the line and the JKO minimising-movement step.
//!
//! A cell-averaged density has a piecewise-linear CDF, so its quantile
//! function is piecewise linear in the mass fraction and every quantity here
//! is computed from that exact representation:
//! `W2²(f, g) = ∫_0^1 |Q_f(s) - Q_g(s)|² ds` for the unit-mass normalisations.

use crate::energy::{EnergySpec, Functional};
use crate::error::{Error, Result};
use crate::grid::{DensityField, DensityPair, Field, Grid1D};
use crate::minimise::{descend, DescentTrace, MinimiserConfig, Objective};

/// Normalised cumulative distribution of a cell-averaged density.
#[derive(Debug, Clone)]
pub struct Cdf {
    grid: Grid1D,
    /// `levels[k]` is the mass fraction left of edge `k`; `levels[n] = 1`.
    levels: Vec<f64>,
    mass: f64,
}

impl Cdf {
    pub fn new(f: &DensityField) -> Result<Self> {
        Self::from_values(f.grid(), f.values())
    }

    fn from_values(grid: &Grid1D, values: &[f64]) -> Result<Self> {
        let total: f64 = values.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptySupport("transport needs positive mass"));
        }
        let mut levels = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        levels.push(0.0);
        for v in values {
            acc += v;
            levels.push(acc / total);
        }
        *levels.last_mut().unwrap() = 1.0;
        Ok(Self { grid: *grid, levels, mass: grid.dx() * total })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Normalised CDF at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= -g.half_length() {
            return 0.0;
        }
        if x >= g.half_length() {
            return 1.0;
        }
        let k = g.cell_of(x);
        let frac = ((x - g.edge(k)) / g.dx()).clamp(0.0, 1.0);
        self.levels[k] + frac * (self.levels[k + 1] - self.levels[k])
    }

    /// Cell carrying mass fraction `s`: smallest `k` with `levels[k+1] >= s`
    /// among cells of positive mass.
    fn cell_for(&self, s: f64) -> usize {
        let n = self.levels.len() - 1;
        let k = self.levels[1..].partition_point(|l| *l < s).min(n - 1);
        // skip empty cells that share the level
        let mut k = k;
        while k + 1 < n && self.levels[k + 1] <= self.levels[k] {
            k += 1;
        }
        k
    }

    /// Quantile at `s ∈ [0, 1]`; the ends map to the edges of the support.
    pub fn quantile(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        if s <= 0.0 {
            let k = self.levels.iter().position(|l| *l > 0.0).unwrap_or(1) - 1;
            return self.grid.edge(k);
        }
        let k = self.cell_for(s);
        self.affine_quantile(k, s)
    }

    // quantile inside cell k, extended affinely in s
    fn affine_quantile(&self, k: usize, s: f64) -> f64 {
        let (lo, hi) = (self.levels[k], self.levels[k + 1]);
        self.grid.edge(k) + (s - lo) / (hi - lo) * self.grid.dx()
    }
}

/// Quantiles at the mass fractions `(k + 1/2) / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRep {
    pub mass: f64,
    pub values: Vec<f64>,
}

impl QuantileRep {
    pub fn resolution(&self) -> usize {
        self.values.len()
    }
}

pub fn to_quantiles(f: &DensityField, m: usize) -> Result<QuantileRep> {
    if m == 0 {
        return Err(Error::param("quantile resolution must be positive"));
    }
    let cdf = Cdf::new(f)?;
    let values = (0..m).map(|k| cdf.quantile((k as f64 + 0.5) / m as f64)).collect();
    Ok(QuantileRep { mass: cdf.mass, values })
}

/// `W2` between the unit-mass normalisations of `f` and `g`, sampled at
/// `M = 4 n_cells` quantile levels.
pub fn w2(f: &DensityField, g: &DensityField) -> Result<f64> {
    w2_with_resolution(f, g, 4 * f.grid().n_cells())
}

pub fn w2_with_resolution(f: &DensityField, g: &DensityField, m: usize) -> Result<f64> {
    let qf = to_quantiles(f, m)?;
    let qg = to_quantiles(g, m)?;
    let sum: f64 = qf.values.iter().zip(&qg.values).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / m as f64).sqrt())
}

/// Exact `W2²` of the normalised piecewise-constant densities: integrates the
/// squared difference of the two piecewise-linear quantile functions between
/// the merged breakpoints.
pub fn w2_squared_exact(f: &DensityField, g: &DensityField) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(w2_squared_cdf(&Cdf::new(f)?, &Cdf::new(g)?))
}

fn w2_squared_cdf(a: &Cdf, b: &Cdf) -> f64 {
    let n = a.levels.len() - 1;
    let (mut i, mut j) = (0usize, 0usize);
    let mut s = 0.0;
    let mut total = 0.0;
    while s < 1.0 {
        while i < n - 1 && a.levels[i + 1] <= s {
            i += 1;
        }
        while j < n - 1 && b.levels[j + 1] <= s {
            j += 1;
        }
        let next = a.levels[i + 1].min(b.levels[j + 1]).min(1.0);
        if next > s {
            let d0 = a.affine_quantile(i, s) - b.affine_quantile(j, s);
            let d1 = a.affine_quantile(i, next) - b.affine_quantile(j, next);
            total += (next - s) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
        }
        s = next;
        if i == n - 1 && j == n - 1 && next >= 1.0 {
            break;
        }
    }
    total
}

/// Kantorovich potential `psi` of `½ W2²(f/|f|, g/|g|)` with respect to its
/// first argument: `psi'(x) = x - T(x)` with `T = Q_g ∘ F_f` the monotone map,
/// integrated from `-L` and normalised to zero mean.
pub fn kantorovich_gradient(f: &DensityField, g: &DensityField) -> Result<Field> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let values = potential(&Cdf::new(f)?, &Cdf::new(g)?);
    Ok(Field::from_vec_unchecked(*f.grid(), values))
}

fn potential(from: &Cdf, to: &Cdf) -> Vec<f64> {
    let grid = &from.grid;
    let dx = grid.dx();
    let n = grid.n_cells();
    let mut psi = Vec::with_capacity(n);
    let mut at_edge = 0.0;
    for i in 0..n {
        let x = grid.center(i);
        let slope = x - to.quantile(from.cdf(x));
        psi.push(at_edge + 0.5 * dx * slope);
        at_edge += dx * slope;
    }
    let mean = psi.iter().sum::<f64>() / n as f64;
    psi.iter_mut().for_each(|p| *p -= mean);
    psi
}

#[derive(Debug, Clone, PartialEq)]
pub struct JkoConfig {
    pub tau: f64,
    pub minimiser: MinimiserConfig,
    /// Quantile resolution for reported distances; `None` means `4 n_cells`.
    pub quantile_resolution: Option<usize>,
}

impl JkoConfig {
    pub fn new(tau: f64) -> Self {
        Self { tau, minimiser: MinimiserConfig::default(), quantile_resolution: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::param(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.quantile_resolution == Some(0) {
            return Err(Error::param("quantile resolution must be positive"));
        }
        self.minimiser.validate()
    }
}

/// `(1/2tau) d²(U, U_prev) + F(U)` with
/// `d² = m1 W2²(rho/m1, rho_prev/m1) + m2 W2²(eta/m2, eta_prev/m2)`.
pub struct JkoObjective {
    functional: Functional,
    prev_rho: Cdf,
    prev_eta: Cdf,
    tau: f64,
}

impl JkoObjective {
    pub fn new(prev: &DensityPair, spec: &EnergySpec, tau: f64) -> Result<Self> {
        Ok(Self { functional: Functional::new(*spec, prev.grid()), prev_rho: Cdf::new(&prev.rho)?, prev_eta: Cdf::new(&prev.eta)?, tau })
    }

    pub fn distance_squared(&self, pair: &DensityPair) -> Result<f64> {
        let a = Cdf::new(&pair.rho)?;
        let b = Cdf::new(&pair.eta)?;
        Ok(a.mass * w2_squared_cdf(&a, &self.prev_rho) + b.mass * w2_squared_cdf(&b, &self.prev_eta))
    }

    pub fn evaluate(&self, pair: &DensityPair) -> Result<f64> {
        Ok(self.distance_squared(pair)? / (2.0 * self.tau) + self.functional.energy(pair))
    }
}

impl Objective for JkoObjective {
    fn value(&self, rho: &[f64], eta: &[f64]) -> f64 {
        let grid = self.functional.grid();
        match (Cdf::from_values(grid, rho), Cdf::from_values(grid, eta)) {
            (Ok(a), Ok(b)) => {
                let d2 = a.mass * w2_squared_cdf(&a, &self.prev_rho) + b.mass * w2_squared_cdf(&b, &self.prev_eta);
                d2 / (2.0 * self.tau) + self.functional.energy_raw(rho, eta)
            }
            _ => f64::INFINITY,
        }
    }

    fn gradient(&self, rho: &[f64], eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let grid = self.functional.grid();
        let (mut g_rho, mut g_eta) = self.functional.first_variation_raw(rho, eta);
        let inv_tau = 1.0 / self.tau;
        if let Ok(a) = Cdf::from_values(grid, rho) {
            g_rho.iter_mut().zip(potential(&a, &self.prev_rho)).for_each(|(g, p)| *g += inv_tau * p);
        }
        if let Ok(b) = Cdf::from_values(grid, eta) {
            g_eta.iter_mut().zip(potential(&b, &self.prev_eta)).for_each(|(g, p)| *g += inv_tau * p);
        }
        (g_rho, g_eta)
    }
}

#[derive(Debug, Clone)]
pub struct JkoStep {
    pub pair: DensityPair,
    /// JKO objective at the returned pair.
    pub objective: f64,
    /// Free energy at the returned pair.
    pub energy: f64,
    /// Per-species `W2` moved during the step (quantile-sampled).
    pub moved: (f64, f64),
    pub descent: DescentTrace,
}

/// One minimising-movement step from `prev`.
pub fn jko_step(prev: &DensityPair, spec: &EnergySpec, config: &JkoConfig) -> Result<JkoStep> {
    config.validate()?;
    let objective = JkoObjective::new(prev, spec, config.tau)?;
    let descent = descend(&objective, prev, &config.minimiser)?;
    let pair = descent.final_pair.clone();
    let m = config.quantile_resolution.unwrap_or(4 * prev.grid().n_cells());
    let moved = (w2_with_resolution(&pair.rho, &prev.rho, m)?, w2_with_resolution(&pair.eta, &prev.eta, m)?);
    Ok(JkoStep { objective: objective.evaluate(&pair)?, energy: Functional::new(*spec, prev.grid()).energy(&pair), pair, moved, descent })
}

/// `n_steps` consecutive JKO steps; entry `k` is the state at `t = (k+1) tau`.
pub fn jko_chain(pair0: &DensityPair, spec: &EnergySpec, config: &JkoConfig, n_steps: usize) -> Result<Vec<JkoStep>> {
    let mut out: Vec<JkoStep> = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let prev = out.last().map(|s| &s.pair).unwrap_or(pair0);
        let next = jko_step(prev, spec, config)?;
        out.push(next);
    }
    Ok(out)
}
