//! Constrained minimisation of the local energy: constants for positive
//! delta, disjoint supports with a flat total for negative delta.

use crossdiff::initial::{random_pair, InitialData};
use crossdiff::minimise::{euler_lagrange_residual, minimise, overlap, MinimiserConfig};
use crossdiff::{EnergySpec, Grid1D};

fn main() -> crossdiff::Result<()> {
    let grid = Grid1D::new(4.0, 400)?;
    let config = MinimiserConfig::default();

    let blocks = InitialData::Blocks.build(&grid)?;
    for delta in [0.9, 0.0, -0.9] {
        let spec = EnergySpec::local(delta)?;
        let trace = minimise(&spec, &blocks, &config)?;
        let end = &trace.final_pair;
        let sigma = end.sigma();
        let spread = sigma.values().iter().fold(0.0f64, |a, v| a.max(*v)) - sigma.values().iter().fold(f64::MAX, |a, v| a.min(*v));
        println!(
            "blocks, delta = {delta:>4}: {:4} iterations, energy {:.6}, overlap {:.2e}, sigma spread {spread:.2e}, EL residual {:.2e}",
            trace.iterations,
            trace.final_energy(),
            overlap(end),
            euler_lagrange_residual(&spec, end, config.supp_eps)?.max()
        );
    }

    for seed in 0..3 {
        let pair0 = random_pair(&grid, seed, 2.0, 2.0)?;
        let trace = minimise(&EnergySpec::local(-0.9)?, &pair0, &config)?;
        println!("random seed {seed}, delta = -0.9: overlap {:.2e}", overlap(&trace.final_pair));
    }
    Ok(())
}
