//! Closed-form segregated critical points with a gap, for both kernels, and
//! their Euler-Lagrange residuals under grid refinement.

use crossdiff::closedform::{critical_delta, critical_summary, gap_indicator, CriticalPointParams, CriticalSummary};
use crossdiff::Kernel;

fn main() -> crossdiff::Result<()> {
    println!("indicator kernel opens a gap below delta = {:.6}", critical_delta());
    for delta in [-0.95, -0.9, -0.8, -0.7] {
        let g = gap_indicator(2.0, delta)?;
        println!("  alpha = 2, delta = {delta}: raw r = {:+.4}, r = {:.4}", g.raw, g.r);
    }

    println!("\n{}, n", CriticalSummary::HEADER);
    for kernel in [Kernel::indicator(5.0)?, Kernel::picard(5.0)?] {
        let params = CriticalPointParams::new(10.0, -0.9, kernel)?;
        for n in [200, 400, 800, 1600] {
            println!("{}, {n}", critical_summary(&params, n, 1e-6)?.csv_row());
        }
    }
    Ok(())
}
