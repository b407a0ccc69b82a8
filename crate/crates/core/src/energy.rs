//! Free energies of the two-species system, their first variations, the
//! interaction kernels and their discrete convolution.
//!
//! With `sigma = rho + eta` the three functionals are
//!
//! ```text
//! local     (1+d)/2 ∫ sigma²  -  d ∫ rho eta
//! nonlocal  (1+d)/2 ∫ sigma²  -  d ∫ rho (K * eta)
//! relaxed   (1+d)/2 ∫ sigma²
//! ```
//!
//! where `d > -1` is the cross-diffusion perturbation.

use crate::error::{Error, Result};
use crate::grid::{indicator_profile, DensityField, DensityPair, Field, Grid1D};

/// Normalised even interaction kernel, `∫ K = 1` on the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `exp(-|x|/alpha) / (2 alpha)`, the fundamental solution of `id - alpha² ∂²`.
    Picard { alpha: f64 },
    /// `1_[-alpha, alpha](x) / (2 alpha)`.
    Indicator { alpha: f64 },
}

impl Kernel {
    pub fn picard(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Kernel::Picard { alpha })
    }

    pub fn indicator(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Kernel::Indicator { alpha })
    }

    /// Parses the config spelling `picard` / `indicator`.
    pub fn from_name(name: &str, alpha: f64) -> Result<Self> {
        match name {
            "picard" => Self::picard(alpha),
            "indicator" => Self::indicator(alpha),
            other => Err(Error::param(format!("unknown kernel `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Picard { .. } => "picard",
            Kernel::Indicator { .. } => "indicator",
        }
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            Kernel::Picard { alpha } | Kernel::Indicator { alpha } => alpha,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Kernel::Picard { alpha } => (-x.abs() / alpha).exp() / (2.0 * alpha),
            Kernel::Indicator { alpha } => {
                if x.abs() <= alpha {
                    0.5 / alpha
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_0^s K` for `s >= 0`.
    fn half_integral(&self, s: f64) -> f64 {
        match *self {
            Kernel::Picard { alpha } => -0.5 * (-s / alpha).exp_m1(),
            Kernel::Indicator { alpha } => 0.5 * s.min(alpha) / alpha,
        }
    }

    pub fn discretize(&self, grid: &Grid1D) -> DiscreteKernel {
        DiscreteKernel::new(*self, grid)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("kernel range alpha must be positive, got {alpha}")))
    }
}

/// Kernel weights for cell offsets `0..n_cells`, each the average of `K` over
/// the offset cell `[(k-1/2)dx, (k+1/2)dx]`.
///
/// Indicator weights are rescaled to unit discrete mass (a no-op unless
/// `alpha` exceeds the grid reach). Picard weights keep the exact mass of the
/// kernel restricted to the reach window `|x| < 2L`, which is all a density on
/// the domain ever sees.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    kernel: Kernel,
    grid: Grid1D,
    weights: Vec<f64>,
}

impl DiscreteKernel {
    pub fn new(kernel: Kernel, grid: &Grid1D) -> Self {
        let dx = grid.dx();
        let n = grid.n_cells();
        let mut weights: Vec<f64> = match kernel {
            Kernel::Picard { alpha } => {
                let tail = (0.5 * dx / alpha).sinh() / dx;
                (0..n)
                    .map(|k| if k == 0 { 2.0 * kernel.half_integral(0.5 * dx) / dx } else { (-(k as f64) * dx / alpha).exp() * tail })
                    .collect()
            }
            Kernel::Indicator { .. } => (0..n)
                .map(|k| {
                    if k == 0 {
                        2.0 * kernel.half_integral(0.5 * dx) / dx
                    } else {
                        let k = k as f64;
                        (kernel.half_integral((k + 0.5) * dx) - kernel.half_integral((k - 0.5) * dx)) / dx
                    }
                })
                .collect(),
        };
        if let Kernel::Indicator { .. } = kernel {
            let mass = discrete_mass(&weights, dx);
            weights.iter_mut().for_each(|w| *w /= mass);
        }
        Self { kernel, grid: *grid, weights }
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Weight for offset `|k|`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `dx * sum_k w_k` over all offsets `-(n-1)..=(n-1)`.
    pub fn mass(&self) -> f64 {
        discrete_mass(&self.weights, self.grid.dx())
    }

    /// `(K * f)_i = dx * sum_j w_|i-j| f_j`, `f` extended by zero outside the domain.
    pub fn convolve(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.grid.n_cells(), "convolution input has the wrong length");
        match self.kernel {
            Kernel::Picard { alpha } => self.convolve_exponential(f, alpha),
            Kernel::Indicator { .. } => self.convolve_banded(f),
        }
    }

    /// Plain `O(n²)` sum, left to right. Reference for the fast paths.
    pub fn convolve_direct(&self, f: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx();
        (0..f.len())
            .map(|i| {
                let mut acc = 0.0;
                for (j, fj) in f.iter().enumerate() {
                    acc += self.weights[i.abs_diff(j)] * fj;
                }
                dx * acc
            })
            .collect()
    }

    // w_k = A q^k for k >= 1: two exponential sweeps.
    fn convolve_exponential(&self, f: &[f64], alpha: f64) -> Vec<f64> {
        let n = f.len();
        let dx = self.grid.dx();
        let q = (-dx / alpha).exp();
        let a = (0.5 * dx / alpha).sinh() / dx;
        let w0 = self.weights[0];
        let mut left = vec![0.0; n];
        for i in 1..n {
            left[i] = q * (left[i - 1] + f[i - 1]);
        }
        let mut out = vec![0.0; n];
        let mut right = 0.0;
        for i in (0..n).rev() {
            out[i] = dx * (w0 * f[i] + a * (left[i] + right));
            right = q * (right + f[i]);
        }
        out
    }

    fn convolve_banded(&self, f: &[f64]) -> Vec<f64> {
        let dx = self.grid.dx();
        let band = self.weights.iter().rposition(|w| *w != 0.0).unwrap_or(0);
        (0..f.len())
            .map(|i| {
                let lo = i.saturating_sub(band);
                let hi = (i + band).min(f.len() - 1);
                let mut acc = 0.0;
                for (j, fj) in f.iter().enumerate().take(hi + 1).skip(lo) {
                    acc += self.weights[i.abs_diff(j)] * fj;
                }
                dx * acc
            })
            .collect()
    }
}

fn discrete_mass(weights: &[f64], dx: f64) -> f64 {
    dx * (weights[0] + 2.0 * weights[1..].iter().sum::<f64>())
}

/// Convolution `K * f` on the grid of `f`.
pub fn convolve(kernel: &Kernel, f: &Field) -> Field {
    let dk = kernel.discretize(f.grid());
    Field::from_vec_unchecked(*f.grid(), dk.convolve(f.values()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyForm {
    Local,
    Nonlocal(Kernel),
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySpec {
    delta: f64,
    form: EnergyForm,
}

impl EnergySpec {
    pub fn new(delta: f64, form: EnergyForm) -> Result<Self> {
        if !(delta.is_finite() && delta > -1.0) {
            return Err(Error::param(format!("delta must lie in (-1, inf), got {delta}")));
        }
        Ok(Self { delta, form })
    }

    pub fn local(delta: f64) -> Result<Self> {
        Self::new(delta, EnergyForm::Local)
    }

    pub fn nonlocal(delta: f64, kernel: Kernel) -> Result<Self> {
        Self::new(delta, EnergyForm::Nonlocal(kernel))
    }

    pub fn relaxed(delta: f64) -> Result<Self> {
        Self::new(delta, EnergyForm::Relaxed)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn form(&self) -> EnergyForm {
        self.form
    }

    pub fn with_form(&self, form: EnergyForm) -> Self {
        Self { delta: self.delta, form }
    }
}

/// An [`EnergySpec`] bound to a grid, with the discrete kernel precomputed.
#[derive(Debug, Clone)]
pub struct Functional {
    spec: EnergySpec,
    grid: Grid1D,
    kernel: Option<DiscreteKernel>,
}

impl Functional {
    pub fn new(spec: EnergySpec, grid: &Grid1D) -> Self {
        let kernel = match spec.form {
            EnergyForm::Nonlocal(k) => Some(k.discretize(grid)),
            _ => None,
        };
        Self { spec, grid: *grid, kernel }
    }

    pub fn spec(&self) -> &EnergySpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn check(&self, pair: &DensityPair) {
        assert_eq!(pair.grid(), &self.grid, "pair lives on a different grid than the functional");
    }

    pub fn energy(&self, pair: &DensityPair) -> f64 {
        self.check(pair);
        self.energy_raw(pair.rho.values(), pair.eta.values())
    }

    pub(crate) fn energy_raw(&self, rho: &[f64], eta: &[f64]) -> f64 {
        let d = self.spec.delta;
        let dx = self.grid.dx();
        let quad: f64 = rho.iter().zip(eta).map(|(r, e)| (r + e) * (r + e)).sum();
        let cross: f64 = match &self.kernel {
            None if self.spec.form == EnergyForm::Relaxed => 0.0,
            None => rho.iter().zip(eta).map(|(r, e)| r * e).sum(),
            Some(k) => rho.iter().zip(k.convolve(eta)).map(|(r, ke)| r * ke).sum(),
        };
        dx * (0.5 * (1.0 + d) * quad - d * cross)
    }

    /// `(dF/drho, dF/deta)`.
    pub fn first_variation(&self, pair: &DensityPair) -> (Field, Field) {
        self.check(pair);
        let (a, b) = self.first_variation_raw(pair.rho.values(), pair.eta.values());
        (Field::from_vec_unchecked(self.grid, a), Field::from_vec_unchecked(self.grid, b))
    }

    pub(crate) fn first_variation_raw(&self, rho: &[f64], eta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.spec.delta;
        let s: Vec<f64> = rho.iter().zip(eta).map(|(r, e)| (1.0 + d) * (r + e)).collect();
        match (&self.spec.form, &self.kernel) {
            (EnergyForm::Relaxed, _) => (s.clone(), s),
            (EnergyForm::Local, _) => {
                (s.iter().zip(eta).map(|(s, e)| s - d * e).collect(), s.iter().zip(rho).map(|(s, r)| s - d * r).collect())
            }
            (EnergyForm::Nonlocal(_), Some(k)) => {
                let k_eta = k.convolve(eta);
                let k_rho = k.convolve(rho);
                (s.iter().zip(&k_eta).map(|(s, ke)| s - d * ke).collect(), s.iter().zip(&k_rho).map(|(s, kr)| s - d * kr).collect())
            }
            (EnergyForm::Nonlocal(_), None) => unreachable!("nonlocal functional without kernel"),
        }
    }
}

pub fn energy(spec: &EnergySpec, pair: &DensityPair) -> f64 {
    Functional::new(*spec, pair.grid()).energy(pair)
}

pub fn first_variation(spec: &EnergySpec, pair: &DensityPair) -> (Field, Field) {
    Functional::new(*spec, pair.grid()).first_variation(pair)
}

/// Determinant of the local diffusion matrix `[[(1+d)rho, rho], [eta, (1+d)eta]]`.
pub fn diffusion_det(rho: f64, eta: f64, delta: f64) -> f64 {
    delta * (2.0 + delta) * rho * eta
}

/// Striped segregated pair `rho = sum_i 1[2i/(n+1), (2i+1)/(n+1))`, `eta = 1 - rho`,
/// written in the unit coordinate `s = (x + L) / 2L`.
///
/// Stripe edges must coincide with cell edges (`n + 1` divides `n_cells`) and
/// each stripe must hold at least four cells, so the pair is exactly segregated.
pub fn nonlsc_sequence(grid: &Grid1D, n: usize) -> Result<DensityPair> {
    if n == 0 {
        return Err(Error::param("stripe count n must be at least 1"));
    }
    let stripes = n + 1;
    let cells = grid.n_cells();
    if !cells.is_multiple_of(stripes) || cells / stripes < 4 {
        return Err(Error::param(format!("{cells} cells cannot resolve {stripes} stripes (need a multiple with >= 4 cells each)")));
    }
    let l = grid.half_length();
    let width = 2.0 * l / stripes as f64;
    let mut rho = vec![0.0; cells];
    for i in (0..stripes).step_by(2) {
        let a = -l + i as f64 * width;
        let stripe = indicator_profile(grid, a, (a + width).min(l), 1.0)?;
        rho.iter_mut().zip(stripe.values()).for_each(|(r, s)| *r += s);
    }
    // stripes are cell aligned, so values are exactly 0 or 1
    let rho: Vec<f64> = rho.into_iter().map(|r| r.round()).collect();
    let eta = rho.iter().map(|r| 1.0 - r).collect();
    DensityPair::new(DensityField::new(*grid, rho)?, DensityField::new(*grid, eta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_distance, Norm};
    use approx::assert_relative_eq;

    fn pair(rho: DensityField, eta: DensityField) -> DensityPair {
        DensityPair::new(rho, eta).unwrap()
    }

    #[test]
    fn kernel_validation() {
        assert!(Kernel::picard(0.0).is_err());
        assert!(Kernel::indicator(-1.0).is_err());
        assert!(Kernel::from_name("gauss", 1.0).is_err());
        assert!(EnergySpec::local(-1.0).is_err());
        assert!(EnergySpec::local(-0.999).is_ok());
    }

    #[test]
    fn discrete_kernel_masses() {
        let g = Grid1D::new(4.0, 400).unwrap();
        let ind = Kernel::indicator(0.5).unwrap().discretize(&g);
        assert_relative_eq!(ind.mass(), 1.0, epsilon = 1e-13);
        // alpha beyond the reach still renormalises
        let wide = Kernel::indicator(20.0).unwrap().discretize(&g);
        assert_relative_eq!(wide.mass(), 1.0, epsilon = 1e-13);
        // picard keeps the exact truncated mass 1 - exp(-(n-1/2)dx/alpha)
        let pic = Kernel::picard(1.0).unwrap().discretize(&g);
        let exact = 1.0 - (-(399.5 * g.dx())).exp();
        assert_relative_eq!(pic.mass(), exact, epsilon = 1e-12);
    }

    #[test]
    fn fast_convolutions_match_direct_sum() {
        let g = Grid1D::new(3.0, 120).unwrap();
        let f: Vec<f64> = (0..120).map(|i| ((i * 37 % 11) as f64).sin().abs()).collect();
        for k in [Kernel::picard(0.7).unwrap(), Kernel::indicator(0.83).unwrap(), Kernel::indicator(9.0).unwrap()] {
            let dk = k.discretize(&g);
            let fast = dk.convolve(&f);
            let slow = dk.convolve_direct(&f);
            for (a, b) in fast.iter().zip(&slow) {
                assert_relative_eq!(a, b, epsilon = 1e-13, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn indicator_convolution_of_constant_interior() {
        let g = Grid1D::new(4.0, 400).unwrap();
        let f = Field::constant(g, 0.3);
        let kf = convolve(&Kernel::indicator(0.5).unwrap(), &f);
        for (i, v) in kf.values().iter().enumerate() {
            let x = g.center(i);
            if 4.0 - x.abs() > 0.5 + g.dx() {
                assert_relative_eq!(*v, 0.3, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn indicator_convolution_of_dirac_is_plateau() {
        let g = Grid1D::new(4.0, 400).unwrap();
        let i0 = 150;
        let x0 = g.center(i0);
        let mut v = vec![0.0; 400];
        v[i0] = 1.0 / g.dx();
        let kf = convolve(&Kernel::indicator(0.5).unwrap(), &Field::new(g, v).unwrap());
        for (i, val) in kf.values().iter().enumerate() {
            let dist = (g.center(i) - x0).abs();
            if dist < 0.5 - g.dx() {
                assert_relative_eq!(*val, 1.0, epsilon = 1e-12);
            } else if dist > 0.5 + g.dx() {
                assert_eq!(*val, 0.0);
            }
        }
    }

    #[test]
    fn picard_convolution_of_dirac() {
        let g = Grid1D::new(4.0, 400).unwrap();
        let mut v = vec![0.0; 400];
        // unit mass split over the two cells adjacent to 0
        v[199] = 0.5 / g.dx();
        v[200] = 0.5 / g.dx();
        let kf = convolve(&Kernel::picard(1.0).unwrap(), &Field::new(g, v).unwrap());
        for (i, val) in kf.values().iter().enumerate() {
            let x = g.center(i);
            assert!((val - 0.5 * (-x.abs()).exp()).abs() < 2.0 * g.dx(), "x = {x}");
        }
    }

    #[test]
    fn local_energy_examples() {
        let g = Grid1D::new(1.0, 100).unwrap();
        let half = DensityField::constant(g, 0.5).unwrap();
        for d in [-0.9, -0.3, 0.0, 0.9, 3.0] {
            let spec = EnergySpec::local(d).unwrap();
            assert_relative_eq!(energy(&spec, &pair(half.clone(), half.clone())), 1.0 + d / 2.0, epsilon = 1e-13);
            let left = indicator_profile(&g, -1.0, 0.0, 1.0).unwrap();
            let right = indicator_profile(&g, 0.0, 1.0, 1.0).unwrap();
            assert_relative_eq!(energy(&spec, &pair(left, right)), 1.0 + d, epsilon = 1e-13);
            let z = DensityField::zeros(g);
            assert_eq!(energy(&spec, &pair(z.clone(), z)), 0.0);
        }
    }

    #[test]
    fn nonlocal_equals_relaxed_for_far_apart_supports() {
        let g = Grid1D::new(4.0, 400).unwrap();
        let rho = indicator_profile(&g, -3.0, -1.0, 0.7).unwrap();
        let eta = indicator_profile(&g, 1.0, 3.0, 0.4).unwrap();
        let p = pair(rho, eta);
        let d = -0.6;
        let nl = energy(&EnergySpec::nonlocal(d, Kernel::indicator(1.5).unwrap()).unwrap(), &p);
        let rx = energy(&EnergySpec::relaxed(d).unwrap(), &p);
        assert_relative_eq!(nl, rx, epsilon = 1e-14);
    }

    #[test]
    fn first_variation_examples() {
        let g = Grid1D::new(2.0, 40).unwrap();
        let c = DensityField::constant(g, 0.3).unwrap();
        let p = pair(c.clone(), c);
        let d = 0.7;
        let (a, b) = first_variation(&EnergySpec::local(d).unwrap(), &p);
        for v in a.values().iter().chain(b.values()) {
            assert_relative_eq!(*v, (2.0 + d) * 0.3, epsilon = 1e-14);
        }

        let rho = DensityField::from_fn(g, |x| 1.0 + 0.5 * x.sin()).unwrap();
        let eta = DensityField::from_fn(g, |x| (0.3 * x).exp()).unwrap();
        let p = pair(rho.clone(), eta);
        let (a, b) = first_variation(&EnergySpec::local(0.0).unwrap(), &p);
        let sigma = p.sigma();
        assert_eq!(lp_distance(&a, &sigma, Norm::Inf).unwrap(), 0.0);
        assert_eq!(lp_distance(&b, &sigma, Norm::Inf).unwrap(), 0.0);

        let k = Kernel::picard(0.8).unwrap();
        let d = -0.4;
        let p = pair(rho.clone(), DensityField::zeros(g));
        let (a, b) = first_variation(&EnergySpec::nonlocal(d, k).unwrap(), &p);
        let k_rho = convolve(&k, &rho);
        for i in 0..40 {
            assert_relative_eq!(a.values()[i], (1.0 + d) * rho.values()[i], epsilon = 1e-14);
            assert_relative_eq!(b.values()[i], (1.0 + d) * rho.values()[i] - d * k_rho.values()[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn diffusion_det_examples() {
        assert_eq!(diffusion_det(1.3, 0.2, 0.0), 0.0);
        assert_relative_eq!(diffusion_det(1.0, 1.0, -0.5), -0.75, epsilon = 1e-15);
        assert_relative_eq!(diffusion_det(2.0, 3.0, 1.0), 18.0, epsilon = 1e-15);
    }

    #[test]
    fn nonlsc_sequence_is_segregated_with_unit_sum() {
        let g = Grid1D::new(0.5, 5 * 9 * 4).unwrap();
        for n in [4, 8] {
            let p = nonlsc_sequence(&g, n).unwrap();
            assert!(p.sigma().values().iter().all(|s| *s == 1.0));
            assert_eq!(p.rho.dot(&p.eta).unwrap(), 0.0);
            let d = -0.5;
            assert_relative_eq!(energy(&EnergySpec::local(d).unwrap(), &p), 0.5 * (1.0 + d), epsilon = 1e-14);
        }
        assert!(nonlsc_sequence(&g, 6).is_err());
        assert!(nonlsc_sequence(&Grid1D::new(0.5, 10).unwrap(), 4).is_err());
        assert!(nonlsc_sequence(&g, 0).is_err());
    }
}
