// Draws standard max-stable, generalized Pareto and copula paths and prints a
// coarse view of each. The stopping rule is exact for bounded generators.

use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::make_grid;
use maxstable::mc::Stream;
use maxstable::simulate::{simulate_copula, simulate_gpp, simulate_msp, StoppingRule};
use maxstable::Result;

pub fn run(paths: u64) -> Result<usize> {
    let grid = make_grid(11)?;
    let gen = GeneratorSpec::preset_g3(&grid);
    let stream = Stream::new(2024, "simulate_paths");
    let mut terms = 0;
    for r in 0..paths {
        let msp = simulate_msp(&gen, &grid, StoppingRule::ExactBound, &stream.child("msp"), r)?;
        let gpp = simulate_gpp(&gen, &grid, &stream.child("gpp"), r)?;
        let cop = simulate_copula(&gen, &grid, StoppingRule::ExactBound, &stream.child("copula"), r)?;
        terms += msp.terms.count;
        let show = |v: &[f64]| v.iter().step_by(5).map(|x| format!("{x:8.3}")).collect::<String>();
        println!("r{r:<3} eta {}  V {}  U {}", show(&msp.eta.values), show(&gpp.v.values), show(&cop.values));
    }
    println!("mean Poisson terms per MSP path: {:.1}", terms as f64 / paths as f64);
    Ok(terms)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(8).map(|_| ())
}
