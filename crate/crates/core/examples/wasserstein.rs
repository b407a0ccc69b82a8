//! One-dimensional quadratic optimal transport between cell-averaged
//! densities: exact distance, quantile sampling and the Kantorovich potential.

use crossdiff::transport::{kantorovich_gradient, w2, w2_squared_exact, w2_with_resolution, Cdf};
use crossdiff::{DensityField, Grid1D};

fn bump(grid: Grid1D, centre: f64, width: f64) -> crossdiff::Result<DensityField> {
    DensityField::from_fn(grid, |x| (-((x - centre) / width).powi(2)).exp())
}

fn main() -> crossdiff::Result<()> {
    let grid = Grid1D::new(4.0, 400)?;
    let f = bump(grid, -1.0, 0.3)?;
    let g = bump(grid, 1.5, 0.3)?;

    println!("exact W2           = {:.8}", w2_squared_exact(&f, &g)?.sqrt());
    println!("quantile W2 (4n)   = {:.8}", w2(&f, &g)?);
    for m in [16, 64, 256] {
        println!("quantile W2 (M={m:3}) = {:.8}", w2_with_resolution(&f, &g, m)?);
    }

    let cdf = Cdf::new(&f)?;
    println!("mass of f {:.4}, median at x = {:.4}", cdf.mass(), cdf.quantile(0.5));

    let psi = kantorovich_gradient(&f, &g)?;
    let i = grid.cell_of(-1.0);
    println!("potential slope near x = -1: {:.4}", (psi.values()[i + 1] - psi.values()[i - 1]) / (2.0 * grid.dx()));
    Ok(())
}
