//! Initial data used by the experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{indicator_profile, DensityField, DensityPair, Grid1D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    /// `rho = 1[-2.5,-0.5]`, `eta = 1[0.5,2.5]`.
    Blocks,
    /// `rho = 1/4 1[-2.5,-0.5] + 1/4 1[-1,1]`, `eta = 1/4 1[-1,1] + 1/4 1[0.5,2.5]`.
    PartiallyMixed,
    /// `rho = 1/2 1[-6,-4]`, `eta = 1/2 1[4,6]`.
    FarBlocks,
    /// `rho = 1/2 1[-2,0]`, `eta = 1/2 1[0,2]`.
    HalfBlocks,
    /// Smooth positive random fields with the given masses.
    Random { seed: u64, mass_rho: f64, mass_eta: f64 },
}

impl InitialData {
    pub fn from_name(name: &str, seed: u64, masses: (f64, f64)) -> Result<Self> {
        Ok(match name {
            "blocks" => Self::Blocks,
            "partial" => Self::PartiallyMixed,
            "far_blocks" => Self::FarBlocks,
            "half_blocks" => Self::HalfBlocks,
            "random" => Self::Random { seed, mass_rho: masses.0, mass_eta: masses.1 },
            other => return Err(Error::Config(format!("unknown initial datum `{other}`"))),
        })
    }

    pub fn build(&self, grid: &Grid1D) -> Result<DensityPair> {
        match *self {
            Self::Blocks => DensityPair::new(indicator_profile(grid, -2.5, -0.5, 1.0)?, indicator_profile(grid, 0.5, 2.5, 1.0)?),
            Self::PartiallyMixed => {
                let rho = add(&indicator_profile(grid, -2.5, -0.5, 0.25)?, &indicator_profile(grid, -1.0, 1.0, 0.25)?);
                let eta = add(&indicator_profile(grid, -1.0, 1.0, 0.25)?, &indicator_profile(grid, 0.5, 2.5, 0.25)?);
                DensityPair::new(rho, eta)
            }
            Self::FarBlocks => DensityPair::new(indicator_profile(grid, -6.0, -4.0, 0.5)?, indicator_profile(grid, 4.0, 6.0, 0.5)?),
            Self::HalfBlocks => DensityPair::new(indicator_profile(grid, -2.0, 0.0, 0.5)?, indicator_profile(grid, 0.0, 2.0, 0.5)?),
            Self::Random { seed, mass_rho, mass_eta } => random_pair(grid, seed, mass_rho, mass_eta),
        }
    }
}

fn add(a: &DensityField, b: &DensityField) -> DensityField {
    let values = a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
    DensityField::from_vec_unchecked(*a.grid(), values)
}

/// Random positive pair: a few smoothed uniform draws, scaled to the masses.
pub fn random_pair(grid: &Grid1D, seed: u64, mass_rho: f64, mass_eta: f64) -> Result<DensityPair> {
    if !(mass_rho > 0.0 && mass_eta > 0.0) {
        return Err(Error::param("random initial data need positive masses"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = |mass: f64| {
        let mut v: Vec<f64> = (0..grid.n_cells()).map(|_| rng.gen_range(0.05..1.0)).collect();
        for _ in 0..grid.n_cells() / 20 {
            v = smooth(&v);
        }
        let m = grid.dx() * v.iter().sum::<f64>();
        DensityField::from_vec_unchecked(*grid, v.into_iter().map(|x| x * mass / m).collect())
    };
    let rho = field(mass_rho);
    let eta = field(mass_eta);
    DensityPair::new(rho, eta)
}

fn smooth(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let l = v[i.saturating_sub(1)];
            let r = v[(i + 1).min(n - 1)];
            0.25 * l + 0.5 * v[i] + 0.25 * r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn preset_masses() {
        let g4 = Grid1D::new(4.0, 400).unwrap();
        let (a, b) = InitialData::Blocks.build(&g4).unwrap().masses();
        assert_relative_eq!(a, 2.0, epsilon = 1e-13);
        assert_relative_eq!(b, 2.0, epsilon = 1e-13);
        let (a, b) = InitialData::PartiallyMixed.build(&g4).unwrap().masses();
        assert_relative_eq!(a, 1.0, epsilon = 1e-13);
        assert_relative_eq!(b, 1.0, epsilon = 1e-13);
        let (a, _) = InitialData::HalfBlocks.build(&g4).unwrap().masses();
        assert_relative_eq!(a, 1.0, epsilon = 1e-13);
        let g10 = Grid1D::new(10.0, 400).unwrap();
        let (a, b) = InitialData::FarBlocks.build(&g10).unwrap().masses();
        assert_relative_eq!(a + b, 2.0, epsilon = 1e-13);
        assert!(InitialData::FarBlocks.build(&g4).is_err());
    }

    #[test]
    fn random_is_seeded() {
        let g = Grid1D::new(4.0, 100).unwrap();
        let a = random_pair(&g, 7, 2.0, 1.0).unwrap();
        let b = random_pair(&g, 7, 2.0, 1.0).unwrap();
        let c = random_pair(&g, 8, 2.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_relative_eq!(a.rho.mass(), 2.0, epsilon = 1e-12);
        assert!(a.rho.values().iter().all(|v| *v > 0.0));
    }
}
