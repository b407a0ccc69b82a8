//! Minimising movements with the exact 1D Wasserstein distance, compared
//! with the rescaled delta = 0 flow at the same times.

use crossdiff::dynamics::{evolve_reduced, SolverConfig};
use crossdiff::grid::lp_distance;
use crossdiff::initial::InitialData;
use crossdiff::minimise::overlap;
use crossdiff::transport::{jko_chain, JkoConfig};
use crossdiff::{EnergySpec, Grid1D, Norm};

fn main() -> crossdiff::Result<()> {
    let grid = Grid1D::new(4.0, 400)?;
    let pair0 = InitialData::Blocks.build(&grid)?;
    let spec = EnergySpec::local(-0.9)?;
    let tau = 0.05;
    let steps = jko_chain(&pair0, &spec, &JkoConfig::new(tau), 20)?;

    let times: Vec<f64> = (1..=steps.len()).map(|k| k as f64 * tau).collect();
    let reference =
        evolve_reduced(&pair0, -0.9, &SolverConfig { t_end: *times.last().unwrap(), output_times: times, ..Default::default() })?;

    println!("step      t    energy   W2(rho)   W2(eta)   overlap   L1 to PDE");
    for (k, (s, snap)) in steps.iter().zip(&reference.snapshots).enumerate() {
        let l1 = lp_distance(&s.pair.rho, &snap.pair.rho, Norm::L1)? + lp_distance(&s.pair.eta, &snap.pair.eta, Norm::L1)?;
        println!(
            "{:4} {:6.3} {:9.6} {:9.2e} {:9.2e} {:9.1e} {:11.3e}",
            k + 1,
            snap.t,
            s.energy,
            s.moved.0,
            s.moved.1,
            overlap(&s.pair),
            l1
        );
    }
    Ok(())
}
