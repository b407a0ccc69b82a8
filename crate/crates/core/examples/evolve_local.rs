//! Local system from two segregated blocks in the three regimes of delta.
//!
//! Run with `cargo run --release --example evolve_local`.

use crossdiff::dynamics::{evolve, SolverConfig};
use crossdiff::initial::InitialData;
use crossdiff::minimise::overlap;
use crossdiff::{EnergySpec, Field, Grid1D, Norm};

fn main() -> crossdiff::Result<()> {
    let grid = Grid1D::new(4.0, 200)?;
    let pair0 = InitialData::Blocks.build(&grid)?;
    let level = (pair0.rho.mass() + pair0.eta.mass()) / grid.length();

    for delta in [-0.9, 0.0, 0.9] {
        let config = SolverConfig { t_end: 400.0, dt_max: 1.0, steady_tol: Some(1e-10), trace_stride: 100, ..Default::default() };
        let traj = evolve(&pair0, &EnergySpec::local(delta)?, &config)?;
        let end = &traj.final_pair;
        let flat = crossdiff::grid::lp_distance(&end.sigma(), &Field::constant(grid, level), Norm::Inf)?;
        println!(
            "delta = {delta:>4}: stopped at t = {:8.2} after {:7} steps, overlap {:.3e}, |sigma - {level}|_inf = {flat:.2e}",
            traj.final_time,
            traj.steps,
            overlap(end)
        );
    }
    Ok(())
}
