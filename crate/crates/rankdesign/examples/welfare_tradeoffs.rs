//! Applicant welfare, societal utility and private utility across two-level
//! cutpoints, written as CSV to stdout.
//!
//! Run with `cargo run --release --example welfare_tradeoffs > profile.csv`.

use rankdesign::cli::sweep_rows;
use rankdesign::PopulationSpec;

fn main() -> rankdesign::Result<()> {
    let population = PopulationSpec::linear_sqrt_quadratic(2.0);
    let capacity = 0.2;
    let cs: Vec<f64> = (0..100).map(|i| 0.01 + 0.78 * i as f64 / 99.0).collect();

    let mut out = csv::Writer::from_writer(std::io::stdout());
    for (row, _) in sweep_rows(&population, capacity, &cs) {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}
