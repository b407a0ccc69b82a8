//! Gap width of numerical minimisers of the nonlocal energy against the
//! closed-form value, over a range of delta. Points run in parallel.

use rayon::prelude::*;

use crossdiff::closedform::gap_indicator;
use crossdiff::initial::InitialData;
use crossdiff::minimise::{gap_width, minimise, MinimiserConfig};
use crossdiff::{EnergySpec, Grid1D, Kernel};

fn main() -> crossdiff::Result<()> {
    let alpha = 2.0;
    let grid = Grid1D::new(4.0, 400)?;
    let pair0 = InitialData::HalfBlocks.build(&grid)?;
    let deltas: Vec<f64> = (0..10).map(|k| -0.95 + 0.05 * k as f64).collect();

    let rows: Vec<(f64, f64, f64)> = deltas
        .par_iter()
        .map(|&d| {
            let spec = EnergySpec::nonlocal(d, Kernel::indicator(alpha)?)?;
            let trace = minimise(&spec, &pair0, &MinimiserConfig::default())?;
            Ok((d, 0.5 * gap_width(&trace.final_pair, 1e-6)?, gap_indicator(alpha, d)?.r))
        })
        .collect::<crossdiff::Result<_>>()?;

    println!("delta,r_measured,r_formula");
    for (d, m, f) in rows {
        println!("{d:.2},{m:.4},{f:.4}");
    }
    println!("# grid spacing {}", grid.dx());
    Ok(())
}
