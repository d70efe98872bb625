// Takahashi characterization: ||f||_D = sup|f| for one f without zeros
// forces the constant generator, and then m = 1.

use maxstable::dnorm::takahashi_test;
use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::{make_grid, EFunction};
use maxstable::mc::Stream;
use maxstable::Result;

pub fn run(n: u64) -> Result<Vec<bool>> {
    let grid = make_grid(51)?;
    let f = EFunction::from_fn(&grid, |t| -(1.0 + t * t))?;
    let mut out = Vec::new();
    for gen in [GeneratorSpec::constant(&grid), GeneratorSpec::preset_g3(&grid)] {
        let t = takahashi_test(&gen, &f, &grid, n, &Stream::new(17, gen.id()))?;
        println!("{:<8} delta {:.4}  m - 1 {:.4}  {:?}/{:?}", gen.id(), t.delta, t.m_minus_one, t.verdict_f, t.verdict_m);
        out.push(t.consistent);
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(50_000).map(|_| ())
}
