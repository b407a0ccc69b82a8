//! Explicit symmetric segregated critical points of the nonlocal energy for
//! `d ∈ (-1, 0)`, for the Picard and the indicator kernel.
//!
//! Both have `eta(x) = rho(-x)` with `supp rho ⊂ [-L, -r]`, leaving a gap of
//! width `2r` around the origin. Each profile carries unit mass per species.

use std::f64::consts::PI;

use crate::energy::{EnergySpec, Kernel};
use crate::error::{Error, Result};
use crate::grid::{DensityField, DensityPair, Grid1D};
use crate::minimise::{euler_lagrange_residual, ElResidual};

/// `-pi / (1 + pi)`: indicator-kernel gaps open only below this value.
pub fn critical_delta() -> f64 {
    -PI / (1.0 + PI)
}

/// Half gap width. `raw` is the formula value, `r = max(raw, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapValue {
    pub raw: f64,
    pub r: f64,
}

impl GapValue {
    fn new(raw: f64) -> Self {
        Self { raw, r: raw.max(0.0) }
    }
}

fn check_segregating(delta: f64) -> Result<()> {
    if delta > -1.0 && delta < 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("closed forms need delta in (-1, 0), got {delta}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must be positive, got {alpha}")))
    }
}

/// `r = alpha/2 (1 + pi (1+d)/d)`.
pub fn gap_indicator(alpha: f64, delta: f64) -> Result<GapValue> {
    check_alpha(alpha)?;
    check_segregating(delta)?;
    Ok(GapValue::new(0.5 * alpha * (1.0 + (1.0 + delta) / delta * PI)))
}

/// `r = L + alpha log((d + 2 sqrt(-e^{2L/alpha} d (1+d))) / ((4+4d) e^{2L/alpha} + d))`.
///
/// Evaluated with numerator and denominator divided by `e^{L/alpha}`. Fails
/// when the logarithm's argument is not positive.
pub fn gap_picard(half_length: f64, alpha: f64, delta: f64) -> Result<GapValue> {
    check_alpha(alpha)?;
    check_segregating(delta)?;
    if !(half_length > 0.0) {
        return Err(Error::param("half length must be positive"));
    }
    let decay = (-half_length / alpha).exp();
    let num = delta * decay + 2.0 * (-delta * (1.0 + delta)).sqrt();
    let den = (4.0 + 4.0 * delta) / decay + delta * decay;
    let arg = num / den;
    if !(arg > 0.0 && arg.is_finite()) {
        return Err(Error::Domain(format!(
            "picard gap formula has log argument {arg} at L = {half_length}, alpha = {alpha}, delta = {delta}"
        )));
    }
    Ok(GapValue::new(half_length + alpha * arg.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPointParams {
    pub half_length: f64,
    pub delta: f64,
    pub kernel: Kernel,
}

impl CriticalPointParams {
    pub fn new(half_length: f64, delta: f64, kernel: Kernel) -> Result<Self> {
        check_segregating(delta)?;
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::param("half length must be positive"));
        }
        Ok(Self { half_length, delta, kernel })
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha()
    }

    pub fn gap(&self) -> Result<GapValue> {
        match self.kernel {
            Kernel::Picard { alpha } => gap_picard(self.half_length, alpha, self.delta),
            Kernel::Indicator { alpha } => gap_indicator(alpha, self.delta),
        }
    }

    pub fn spec(&self) -> EnergySpec {
        EnergySpec::nonlocal(self.delta, self.kernel).expect("delta validated at construction")
    }

    /// Cell-averaged critical pair for the kernel of `self`.
    pub fn profile(&self, n_cells: usize) -> Result<DensityPair> {
        match self.kernel {
            Kernel::Picard { .. } => profile_picard(self, n_cells),
            Kernel::Indicator { .. } => profile_indicator(self, n_cells),
        }
    }
}

fn usable_gap(gap: GapValue, half_length: f64) -> Result<f64> {
    if gap.raw < 0.0 {
        return Err(Error::Domain(format!("no gap: formula gives r = {}", gap.raw)));
    }
    if gap.r >= half_length {
        return Err(Error::Domain(format!("gap r = {} swallows the domain (L = {half_length})", gap.r)));
    }
    Ok(gap.r)
}

fn mirrored_pair(grid: Grid1D, profile: impl Fn(f64) -> f64) -> Result<DensityPair> {
    let rho = DensityField::from_fn(grid, profile).map_err(|_| Error::Domain("closed-form profile is negative on its support".into()))?;
    let eta = rho.reflected();
    DensityPair::new(rho, eta)
}

/// Indicator kernel: with `lambda = d / (1+d) / (2 alpha) < 0`,
///
/// ```text
/// rho(x) = b [cos(lambda x + alpha lambda/2) + sin(lambda x + alpha lambda/2)]   on [r - alpha, -r]
/// rho(x) = rho(r - alpha)                                                       on [-L, r - alpha]
/// ```
///
/// with `b`, `h` the displayed normalisations. On `[-L, r - alpha]` the kernel
/// window of `x` misses the support of `eta`, so the constancy condition there
/// forces a plateau; the plateau height equals `h` and the pair has unit mass.
pub fn profile_indicator(params: &CriticalPointParams, n_cells: usize) -> Result<DensityPair> {
    let Kernel::Indicator { alpha } = params.kernel else {
        return Err(Error::param("profile_indicator needs the indicator kernel"));
    };
    let l = params.half_length;
    let delta = params.delta;
    let r = usable_gap(gap_indicator(alpha, delta)?, l)?;
    if alpha - r > l {
        return Err(Error::Domain(format!("kernel reach alpha - r = {} exceeds L = {l}: no plateau region", alpha - r)));
    }
    let lambda = delta / (1.0 + delta) / (2.0 * alpha);
    let phase = lambda * r - 0.5 * alpha * lambda;
    let h = 1.0 / (l + r - alpha - 2.0 / lambda / (1.0 + 1.0 / phase.tan()));
    let b = h / (phase.cos() + phase.sin());
    let arc = move |x: f64| {
        let u = lambda * x + 0.5 * alpha * lambda;
        b * (u.cos() + u.sin())
    };
    let plateau = arc(r - alpha);
    let grid = Grid1D::new(l, n_cells)?;
    mirrored_pair(grid, move |x| {
        if x <= r - alpha {
            plateau
        } else if x <= -r {
            arc(x)
        } else {
            0.0
        }
    })
}

/// Picard kernel: `rho(x) = c (e^{(x+r)/alpha} - 1)` on `[-L, -r]` with
/// `c = (alpha (1 - e^{-(L-r)/alpha}) - (L - r))^{-1}`, so `rho(-r) = 0`.
pub fn profile_picard(params: &CriticalPointParams, n_cells: usize) -> Result<DensityPair> {
    let Kernel::Picard { alpha } = params.kernel else {
        return Err(Error::param("profile_picard needs the Picard kernel"));
    };
    let l = params.half_length;
    let r = usable_gap(gap_picard(l, alpha, params.delta)?, l)?;
    let c = 1.0 / (alpha * (1.0 - (-(l - r) / alpha).exp()) - (l - r));
    let grid = Grid1D::new(l, n_cells)?;
    mirrored_pair(grid, move |x| if x <= -r { c * ((x + r) / alpha).exp_m1() } else { 0.0 })
}

/// One-line description of a closed-form critical point on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSummary {
    pub params: CriticalPointParams,
    pub gap: GapValue,
    pub mass_rho: f64,
    pub residual: ElResidual,
    pub pair: DensityPair,
}

impl CriticalSummary {
    pub const HEADER: &'static str = "kernel,alpha,delta,L,r_raw,r,mass_rho,el_residual";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.params.kernel.name(),
            self.params.alpha(),
            self.params.delta,
            self.params.half_length,
            self.gap.raw,
            self.gap.r,
            self.mass_rho,
            self.residual.max()
        )
    }
}

pub fn critical_summary(params: &CriticalPointParams, n_cells: usize, supp_eps: f64) -> Result<CriticalSummary> {
    let gap = params.gap()?;
    let pair = params.profile(n_cells)?;
    let residual = euler_lagrange_residual(&params.spec(), &pair, supp_eps)?;
    Ok(CriticalSummary { params: *params, gap, mass_rho: pair.rho.mass(), residual, pair })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn critical_delta_value() {
        assert!((critical_delta() + 0.7585).abs() < 1e-4);
        for alpha in [0.5, 1.0, 7.0] {
            let r = gap_indicator(alpha, critical_delta()).unwrap();
            assert!(r.raw.abs() < 1e-14 * alpha);
            assert_eq!(r.r, r.raw.max(0.0));
        }
    }

    #[test]
    fn indicator_gap_value() {
        // 1 + pi (0.1 / -0.9) = 1 - pi/9
        let expected = 1.0 - PI / 9.0;
        assert_relative_eq!(gap_indicator(2.0, -0.9).unwrap().r, expected, epsilon = 1e-15);
        assert!((expected - 0.65093).abs() < 1e-5);
        // linear in alpha
        let r1 = gap_indicator(1.0, -0.85).unwrap().r;
        assert_relative_eq!(gap_indicator(3.0, -0.85).unwrap().r, 3.0 * r1, epsilon = 1e-14);
        assert!(gap_indicator(1.0, 0.2).is_err());
        assert!(gap_indicator(0.0, -0.5).is_err());
    }

    #[test]
    fn picard_gap_values() {
        let g = gap_picard(10.0, 5.0, -0.9).unwrap();
        assert!((g.r - 1.103).abs() < 1e-3, "{g:?}");
        let g = gap_picard(5.0, 5.0, -0.9).unwrap();
        assert!((g.raw + 0.169).abs() < 2e-3, "{g:?}");
        assert_eq!(g.r, 0.0);
    }

    #[test]
    fn indicator_lambda_and_symmetry() {
        let params = CriticalPointParams::new(4.0, -0.9, Kernel::indicator(2.0).unwrap()).unwrap();
        let lambda: f64 = -0.9 / 0.1 / 4.0;
        assert_relative_eq!(lambda, -2.25, epsilon = 1e-15);
        let p = profile_indicator(&params, 400).unwrap();
        for i in 0..400 {
            assert_eq!(p.eta.values()[i], p.rho.values()[399 - i]);
        }
        assert_relative_eq!(p.rho.mass(), 1.0, epsilon = 1e-4);
        // rho vanishes right of -r
        let r = gap_indicator(2.0, -0.9).unwrap().r;
        let g = p.grid();
        for i in 0..400 {
            if g.edge(i) >= -r {
                assert_eq!(p.rho.values()[i], 0.0);
            }
        }
    }

    #[test]
    fn picard_boundary_condition_and_symmetry() {
        let params = CriticalPointParams::new(10.0, -0.9, Kernel::picard(5.0).unwrap()).unwrap();
        let p = profile_picard(&params, 400).unwrap();
        let r = params.gap().unwrap().r;
        let g = p.grid();
        let edge_cell = g.cell_of(-r);
        // the cell straddling -r carries only O(dx²) mass per unit length
        assert!(p.rho.values()[edge_cell] < p.rho.max_value() * 10.0 * g.dx());
        for i in 0..400 {
            assert_eq!(p.eta.values()[i], p.rho.values()[399 - i]);
        }
        assert!(p.rho.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn profiles_reject_missing_gap() {
        let no_gap = CriticalPointParams::new(4.0, -0.5, Kernel::indicator(2.0).unwrap()).unwrap();
        assert!(matches!(profile_indicator(&no_gap, 200), Err(Error::Domain(_))));
        let no_gap = CriticalPointParams::new(5.0, -0.9, Kernel::picard(5.0).unwrap()).unwrap();
        assert!(matches!(profile_picard(&no_gap, 200), Err(Error::Domain(_))));
        let narrow = CriticalPointParams::new(1.0, -0.9, Kernel::indicator(5.0).unwrap()).unwrap();
        assert!(matches!(profile_indicator(&narrow, 200), Err(Error::Domain(_))));
        let wrong = CriticalPointParams::new(4.0, -0.9, Kernel::picard(2.0).unwrap()).unwrap();
        assert!(profile_indicator(&wrong, 200).is_err());
    }

    #[test]
    fn residuals_are_mirror_symmetric() {
        for kernel in [Kernel::indicator(2.0).unwrap(), Kernel::picard(5.0).unwrap()] {
            let params = CriticalPointParams::new(10.0, -0.9, kernel).unwrap();
            let s = critical_summary(&params, 400, 1e-6).unwrap();
            assert!((s.residual.rho - s.residual.eta).abs() < 1e-12);
            assert!(s.residual.max() < 10.0 * 0.05, "{:?}", s.residual);
            assert!(s.csv_row().starts_with(kernel.name()));
        }
    }
}
