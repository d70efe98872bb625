// Moves standard MSP paths to von Mises margins and back, and evaluates the
// df of the general process through psi0.

use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::{make_grid, EFunction};
use maxstable::mc::Stream;
use maxstable::simulate::{general_msp_cdf, margin_transform, psi0, simulate_msp, MarginParams, StoppingRule};
use maxstable::Result;

pub fn run(paths: u64) -> Result<f64> {
    let grid = make_grid(21)?;
    let gen = GeneratorSpec::preset_g2(&grid);
    let stream = Stream::new(13, "margins");
    let mut worst: f64 = 0.0;
    for gamma in [-0.5, 0.0, 0.5] {
        let mp = MarginParams::constant(&grid, 2.0, 1.0, gamma)?;
        for r in 0..paths {
            let eta = simulate_msp(&gen, &grid, StoppingRule::ExactBound, &stream, r)?.eta;
            let zeta = margin_transform(&eta, &mp)?;
            let back = psi0(&EFunction::from_values(&grid, zeta.values, vec![])?, &mp)?;
            let back = back.standard().expect("within the support");
            for (x, y) in back.values().iter().zip(&eta.values) {
                worst = worst.max((x - y).abs());
            }
        }
        let level = EFunction::constant(&grid, 1.5);
        let p = general_msp_cdf(&level, &mp, &gen, &grid, 50_000, &stream.child("cdf"))?;
        println!("gamma {gamma:+.1}  P(zeta <= 1.5) {:.4}", p.p);
    }
    println!("round trip error {worst:.2e}");
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(200).map(|_| ())
}
