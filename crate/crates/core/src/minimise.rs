//! Projected steepest descent over the mass-constrained nonnegative cone, and
//! the diagnostics used to read off segregation, gaps and criticality.

use std::io::Write;

use crate::energy::{EnergySpec, Functional};
use crate::error::{Error, Result};
use crate::grid::{DensityField, DensityPair, Field, Grid1D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Clip negatives, then rescale to the target mass.
    ClipRescale,
    /// Euclidean projection onto `{f >= 0, dx sum f = m}`.
    Simplex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimiserConfig {
    pub step0: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub tol_rel_energy: f64,
    pub max_iters: usize,
    /// Support threshold relative to `max sigma`.
    pub supp_eps: f64,
    pub projection: Projection,
    /// Cells by which a species may grow past its current support in one
    /// iteration; `None` lets mass appear anywhere.
    pub support_spread: Option<usize>,
}

impl Default for MinimiserConfig {
    fn default() -> Self {
        Self {
            step0: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            tol_rel_energy: 1e-10,
            max_iters: 100_000,
            supp_eps: 1e-6,
            projection: Projection::ClipRescale,
            support_spread: Some(1),
        }
    }
}

impl MinimiserConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.step0, self.armijo_c, self.tol_rel_energy, self.supp_eps];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_iters == 0 {
            return Err(Error::param("minimiser parameters must be positive"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::param("backtrack_factor must lie in (0, 1)"));
        }
        if self.armijo_c >= 1.0 {
            return Err(Error::param("armijo_c must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentRow {
    pub iter: usize,
    pub energy: f64,
    pub step_size: f64,
    pub overlap: f64,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub iterations: usize,
    /// Row 0 is the initial state (`step_size` 0).
    pub rows: Vec<DescentRow>,
    pub final_pair: DensityPair,
    pub converged: bool,
}

impl DescentTrace {
    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.energy)
    }

    pub fn final_energy(&self) -> f64 {
        self.rows.last().map(|r| r.energy).unwrap_or(f64::NAN)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,energy,step_size,overlap,gap")?;
        for r in &self.rows {
            let gap = r.gap.map(|g| g.to_string()).unwrap_or_else(|| "nan".into());
            writeln!(out, "{},{},{},{},{}", r.iter, r.energy, r.step_size, r.overlap, gap)?;
        }
        Ok(())
    }
}

/// Something projected descent can minimise over pairs with fixed masses.
pub trait Objective {
    fn value(&self, rho: &[f64], eta: &[f64]) -> f64;
    /// First variations with respect to `rho` and `eta`.
    fn gradient(&self, rho: &[f64], eta: &[f64]) -> (Vec<f64>, Vec<f64>);
}

impl Objective for Functional {
    fn value(&self, rho: &[f64], eta: &[f64]) -> f64 {
        self.energy_raw(rho, eta)
    }

    fn gradient(&self, rho: &[f64], eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.first_variation_raw(rho, eta)
    }
}

/// Clips negative values to zero and rescales to `target_mass`.
pub fn project(f: &Field, target_mass: f64) -> Result<DensityField> {
    if !(target_mass > 0.0 && target_mass.is_finite()) {
        return Err(Error::param("target mass must be positive"));
    }
    clip_rescale(f.values(), f.grid().dx(), target_mass).map(|v| DensityField::from_vec_unchecked(*f.grid(), v)).ok_or(Error::Infeasible)
}

/// Euclidean projection onto nonnegative fields of mass `target_mass`.
pub fn project_simplex(f: &Field, target_mass: f64) -> Result<DensityField> {
    if !(target_mass > 0.0 && target_mass.is_finite()) {
        return Err(Error::param("target mass must be positive"));
    }
    Ok(DensityField::from_vec_unchecked(*f.grid(), simplex(f.values(), f.grid().dx(), target_mass)))
}

fn clip_rescale(values: &[f64], dx: f64, mass: f64) -> Option<Vec<f64>> {
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let current = dx * clipped.iter().sum::<f64>();
    if current <= 0.0 {
        return None;
    }
    let scale = mass / current;
    Some(clipped.into_iter().map(|v| v * scale).collect())
}

// max(v - theta, 0) with dx * sum = mass
fn simplex(values: &[f64], dx: f64, mass: f64) -> Vec<f64> {
    let target = mass / dx;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - target) / (k + 1) as f64;
        if k + 1 == sorted.len() || sorted[k + 1] <= t {
            theta = t;
            break;
        }
    }
    values.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Projected steepest descent of `spec` from `pair0`, masses fixed to those of `pair0`.
pub fn minimise(spec: &EnergySpec, pair0: &DensityPair, config: &MinimiserConfig) -> Result<DescentTrace> {
    let functional = Functional::new(*spec, pair0.grid());
    descend(&functional, pair0, config)
}

/// Generic projected descent with Armijo backtracking.
///
/// The gradient of each species is shifted by its mean over the current
/// support (the mass multiplier) before the step, so fixed points satisfy
/// `dF/drho = c` on the support and `dF/drho >= c` off it.
pub fn descend<O: Objective + ?Sized>(objective: &O, pair0: &DensityPair, config: &MinimiserConfig) -> Result<DescentTrace> {
    config.validate()?;
    let grid = *pair0.grid();
    let dx = grid.dx();
    let (m1, m2) = pair0.masses();
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::EmptySupport("minimisation needs both masses positive"));
    }
    let mut rho = pair0.rho.values().to_vec();
    let mut eta = pair0.eta.values().to_vec();
    let mut energy = objective.value(&rho, &eta);
    let diag = |rho: &[f64], eta: &[f64]| {
        let p = raw_pair(&grid, rho, eta);
        (overlap(&p), gap_width(&p, config.supp_eps).ok())
    };
    let (ov, gap) = diag(&rho, &eta);
    let mut rows = vec![DescentRow { iter: 0, energy, step_size: 0.0, overlap: ov, gap }];

    let min_step = config.step0 * 1e-14;
    let mut step = config.step0;
    let mut converged = false;
    let mut iterations = 0;
    let mut quiet = 0;
    while iterations < config.max_iters {
        let (g_rho, g_eta) = objective.gradient(&rho, &eta);
        let d_rho = shift_by_support_mean(&g_rho, &rho);
        let d_eta = shift_by_support_mean(&g_eta, &eta);

        let mut accepted = None;
        while step >= min_step {
            let trial_rho = take_step(&rho, &d_rho, step, dx, m1, config);
            let trial_eta = take_step(&eta, &d_eta, step, dx, m2, config);
            if let (Some(tr), Some(te)) = (trial_rho, trial_eta) {
                let slope = dx
                    * (g_rho.iter().zip(tr.iter().zip(&rho)).map(|(g, (a, b))| g * (a - b)).sum::<f64>()
                        + g_eta.iter().zip(te.iter().zip(&eta)).map(|(g, (a, b))| g * (a - b)).sum::<f64>());
                let value = objective.value(&tr, &te);
                if slope < 0.0 && value <= energy + config.armijo_c * slope {
                    accepted = Some((tr, te, value));
                    break;
                }
            }
            step *= config.backtrack_factor;
        }
        let Some((tr, te, value)) = accepted else {
            // no representable step lowers the objective
            converged = true;
            break;
        };
        iterations += 1;
        let rel = (energy - value) / energy.abs().max(f64::MIN_POSITIVE);
        rho = tr;
        eta = te;
        energy = value;
        let (ov, gap) = diag(&rho, &eta);
        rows.push(DescentRow { iter: iterations, energy, step_size: step, overlap: ov, gap });
        step /= config.backtrack_factor;
        quiet = if rel < config.tol_rel_energy { quiet + 1 } else { 0 };
        if quiet >= 3 {
            converged = true;
            break;
        }
    }

    Ok(DescentTrace { iterations, rows, final_pair: raw_pair(&grid, &rho, &eta), converged })
}

fn raw_pair(grid: &Grid1D, rho: &[f64], eta: &[f64]) -> DensityPair {
    DensityPair { rho: DensityField::from_vec_unchecked(*grid, rho.to_vec()), eta: DensityField::from_vec_unchecked(*grid, eta.to_vec()) }
}

fn shift_by_support_mean(gradient: &[f64], density: &[f64]) -> Vec<f64> {
    let (sum, count) = gradient.iter().zip(density).filter(|(_, c)| **c > 0.0).fold((0.0, 0usize), |(s, k), (g, _)| (s + g, k + 1));
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    gradient.iter().map(|g| g - mean).collect()
}

fn take_step(x: &[f64], dir: &[f64], step: f64, dx: f64, mass: f64, config: &MinimiserConfig) -> Option<Vec<f64>> {
    let mut y: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - step * d).collect();
    if let Some(spread) = config.support_spread {
        let reach = dilated_support(x, spread);
        y.iter_mut().zip(reach).filter(|(_, r)| !r).for_each(|(v, _)| *v = 0.0);
    }
    match config.projection {
        Projection::ClipRescale => clip_rescale(&y, dx, mass),
        Projection::Simplex => Some(simplex(&y, dx, mass)),
    }
}

fn dilated_support(x: &[f64], spread: usize) -> Vec<bool> {
    let n = x.len();
    let mut reach = vec![false; n];
    for (i, _) in x.iter().enumerate().filter(|(_, v)| **v > 0.0) {
        let lo = i.saturating_sub(spread);
        let hi = (i + spread).min(n - 1);
        reach[lo..=hi].iter_mut().for_each(|r| *r = true);
    }
    reach
}

/// `∫ rho eta dx`.
pub fn overlap(pair: &DensityPair) -> f64 {
    pair.grid().dx() * pair.rho.values().iter().zip(pair.eta.values()).map(|(r, e)| r * e).sum::<f64>()
}

fn centroid(f: &DensityField) -> f64 {
    let g = f.grid();
    f.values().iter().enumerate().map(|(i, v)| v * g.center(i)).sum::<f64>() / f.values().iter().sum::<f64>()
}

/// Width of the empty interval between the left and the right species, read off
/// from cells above `supp_eps * max sigma`. Zero when the supports touch or overlap.
pub fn gap_width(pair: &DensityPair, supp_eps: f64) -> Result<f64> {
    let grid = pair.grid();
    let threshold = supp_eps * pair.sigma().max_value();
    let (left, right) = if pair.rho.mass() <= 0.0 || pair.eta.mass() <= 0.0 {
        return Err(Error::EmptySupport("gap needs both species"));
    } else if centroid(&pair.rho) <= centroid(&pair.eta) {
        (&pair.rho, &pair.eta)
    } else {
        (&pair.eta, &pair.rho)
    };
    let last_left = left.values().iter().rposition(|v| *v > threshold);
    let first_right = right.values().iter().position(|v| *v > threshold);
    match (last_left, first_right) {
        (Some(i), Some(j)) => Ok((grid.edge(j) - grid.edge(i + 1)).max(0.0)),
        _ => Err(Error::EmptySupport("species has no cell above the support threshold")),
    }
}

/// Criticality measures for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElResidual {
    /// Mass-weighted standard deviation of `dF/drho` over the support of `rho`,
    /// relative to its mean `c1`.
    pub rho: f64,
    pub eta: f64,
    /// Largest `(c1 - dF/drho) / |c1|` off the support, clamped at 0.
    pub rho_violation: f64,
    pub eta_violation: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ElResidual {
    pub fn max(&self) -> f64 {
        self.rho.max(self.eta)
    }
}

pub fn euler_lagrange_residual(spec: &EnergySpec, pair: &DensityPair, supp_eps: f64) -> Result<ElResidual> {
    let (xi_rho, xi_eta) = Functional::new(*spec, pair.grid()).first_variation(pair);
    let threshold = supp_eps * pair.sigma().max_value();
    let (rho, rho_violation, c1) = species_residual(pair.rho.values(), xi_rho.values(), threshold)?;
    let (eta, eta_violation, c2) = species_residual(pair.eta.values(), xi_eta.values(), threshold)?;
    Ok(ElResidual { rho, eta, rho_violation, eta_violation, c1, c2 })
}

fn species_residual(density: &[f64], potential: &[f64], threshold: f64) -> Result<(f64, f64, f64)> {
    let support: Vec<bool> = density.iter().map(|c| *c > threshold).collect();
    let weight: f64 = density.iter().zip(&support).filter(|(_, s)| **s).map(|(c, _)| c).sum();
    if !(weight > 0.0) {
        return Err(Error::EmptySupport("species has empty numeric support"));
    }
    let on = || density.iter().zip(potential).zip(&support).filter(|(_, s)| **s).map(|(cp, _)| cp);
    let mean = on().map(|(c, p)| c * p).sum::<f64>() / weight;
    let var = on().map(|(c, p)| c * (p - mean) * (p - mean)).sum::<f64>() / weight;
    let scale = mean.abs().max(f64::MIN_POSITIVE);
    let violation = potential.iter().zip(&support).filter(|(_, s)| !**s).map(|(p, _)| (mean - p) / scale).fold(0.0, f64::max);
    Ok((var.sqrt() / scale, violation, mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Kernel;
    use crate::grid::{indicator_profile, lp_distance, Norm};
    use crate::initial::{random_pair, InitialData};
    use approx::assert_relative_eq;

    fn g() -> Grid1D {
        Grid1D::new(1.0, 20).unwrap()
    }

    #[test]
    fn project_fixed_point() {
        let f = Field::constant(g(), 0.5);
        let p = project(&f, 1.0).unwrap();
        assert_eq!(p.values(), f.values());
    }

    #[test]
    fn project_clips_then_rescales() {
        let mut v = vec![1.0; 20];
        v[3] = -2.0;
        let p = project(&Field::new(g(), v).unwrap(), 2.0).unwrap();
        assert_eq!(p.values()[3], 0.0);
        let expected = 2.0 / (19.0 * g().dx());
        for (i, x) in p.values().iter().enumerate().filter(|(i, _)| *i != 3) {
            assert_relative_eq!(*x, expected, epsilon = 1e-14, max_relative = 1e-14);
            let _ = i;
        }
        assert_relative_eq!(p.mass(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn project_rejects_nonpositive() {
        assert!(matches!(project(&Field::constant(g(), -1.0), 1.0), Err(Error::Infeasible)));
        assert!(project(&Field::constant(g(), 1.0), 0.0).is_err());
    }

    #[test]
    fn simplex_projection_is_exact() {
        let v: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin()).collect();
        let f = Field::new(g(), v.clone()).unwrap();
        let p = project_simplex(&f, 0.8).unwrap();
        assert_relative_eq!(p.mass(), 0.8, epsilon = 1e-13);
        // shift is uniform on the support
        let shifts: Vec<f64> = v.iter().zip(p.values()).filter(|(_, q)| **q > 0.0).map(|(a, q)| a - q).collect();
        assert!(shifts.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-13));
    }

    #[test]
    fn overlap_examples() {
        let g = Grid1D::new(1.0, 100).unwrap();
        let half = DensityField::constant(g, 0.5).unwrap();
        assert_relative_eq!(overlap(&DensityPair::new(half.clone(), half).unwrap()), 0.5, epsilon = 1e-14);
        let p = InitialData::Blocks.build(&Grid1D::new(4.0, 80).unwrap()).unwrap();
        assert_eq!(overlap(&p), 0.0);
    }

    #[test]
    fn gap_width_examples() {
        let g = Grid1D::new(4.0, 400).unwrap();
        let rho = indicator_profile(&g, -2.0, -1.0, 1.0).unwrap();
        let eta = indicator_profile(&g, 1.0, 2.0, 1.0).unwrap();
        let p = DensityPair::new(rho.clone(), eta.clone()).unwrap();
        assert!((gap_width(&p, 1e-6).unwrap() - 2.0).abs() <= g.dx());
        // mirrored orientation
        assert!((gap_width(&p.swapped(), 1e-6).unwrap() - 2.0).abs() <= g.dx());
        let touching = DensityPair::new(rho, indicator_profile(&g, -1.0, 0.5, 1.0).unwrap()).unwrap();
        assert_eq!(gap_width(&touching, 1e-6).unwrap(), 0.0);
        let empty = DensityPair::new(eta, DensityField::zeros(g)).unwrap();
        assert!(gap_width(&empty, 1e-6).is_err());
    }

    #[test]
    fn residual_vanishes_at_mixed_constants() {
        let g = Grid1D::new(4.0, 100).unwrap();
        let p = DensityPair::new(DensityField::constant(g, 0.25).unwrap(), DensityField::constant(g, 0.1).unwrap()).unwrap();
        let r = euler_lagrange_residual(&EnergySpec::local(0.9).unwrap(), &p, 1e-6).unwrap();
        assert!(r.rho < 1e-14 && r.eta < 1e-14);
        assert_eq!(r.rho_violation, 0.0);
    }

    #[test]
    fn residual_detects_random_pairs() {
        let g = Grid1D::new(4.0, 100).unwrap();
        let p = random_pair(&g, 3, 1.0, 1.0).unwrap();
        let r = euler_lagrange_residual(&EnergySpec::local(0.9).unwrap(), &p, 1e-6).unwrap();
        assert!(r.rho > 1e-3 && r.eta > 1e-3, "{r:?}");
        let empty = DensityPair::new(p.rho.clone(), DensityField::zeros(g)).unwrap();
        assert!(euler_lagrange_residual(&EnergySpec::local(0.9).unwrap(), &empty, 1e-6).is_err());
    }

    #[test]
    fn descent_is_monotone_and_feasible() {
        let g = Grid1D::new(4.0, 100).unwrap();
        let p0 = random_pair(&g, 11, 2.0, 1.0).unwrap();
        for spec in [EnergySpec::local(-0.5).unwrap(), EnergySpec::nonlocal(-0.9, Kernel::indicator(1.0).unwrap()).unwrap()] {
            let cfg = MinimiserConfig { max_iters: 500, ..Default::default() };
            let trace = minimise(&spec, &p0, &cfg).unwrap();
            let e: Vec<f64> = trace.energies().collect();
            assert!(e.windows(2).all(|w| w[1] <= w[0]));
            let (m1, m2) = trace.final_pair.masses();
            assert_relative_eq!(m1, 2.0, epsilon = 1e-12);
            assert_relative_eq!(m2, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixing_minimiser_reaches_constants() {
        let g = Grid1D::new(4.0, 100).unwrap();
        let p0 = random_pair(&g, 5, 2.0, 2.0).unwrap();
        let trace = minimise(&EnergySpec::local(0.9).unwrap(), &p0, &MinimiserConfig::default()).unwrap();
        assert!(trace.converged);
        let c = Field::constant(g, 0.25);
        assert!(lp_distance(&trace.final_pair.rho, &c, Norm::Inf).unwrap() < 1e-3);
        assert!(lp_distance(&trace.final_pair.eta, &c, Norm::Inf).unwrap() < 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(MinimiserConfig { backtrack_factor: 1.0, ..Default::default() }.validate().is_err());
        assert!(MinimiserConfig { step0: 0.0, ..Default::default() }.validate().is_err());
        assert!(MinimiserConfig { max_iters: 0, ..Default::default() }.validate().is_err());
    }
}
