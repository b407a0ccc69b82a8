//! Writes a snapshot CSV and its SVG line plot into a temporary directory.

use std::fs;

use crossdiff::closedform::CriticalPointParams;
use crossdiff::plot::{emit_plot_from_csv, PlotStyle};
use crossdiff::Kernel;

fn main() -> crossdiff::Result<()> {
    let params = CriticalPointParams::new(10.0, -0.9, Kernel::picard(5.0)?)?;
    let pair = params.profile(400)?;

    let mut csv = Vec::new();
    pair.write_csv(&mut csv)?;
    let csv = String::from_utf8(csv).expect("ascii");
    let svg = emit_plot_from_csv(&csv, &PlotStyle::titled("Picard critical point, alpha = 5"))?;

    let dir = std::env::temp_dir().join("crossdiff-svg-snapshot");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("profile.csv"), &csv)?;
    fs::write(dir.join("profile.svg"), &svg)?;
    println!("wrote {} ({} bytes of SVG)", dir.display(), svg.len());
    Ok(())
}
