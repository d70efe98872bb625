// Checks E Z_t = 1 on the grid for a user-built generator, then estimates its
// generator constant. Two linear atoms h(t) = a + (b - a) t, probability 1/2 each.

use maxstable::generator::{generator_constant, validate_generator, GeneratorSpec};
use maxstable::gridfun::make_grid;
use maxstable::mc::Stream;
use maxstable::Result;

pub fn run(n: u64) -> Result<(bool, f64)> {
    let grid = make_grid(51)?;
    let gen = GeneratorSpec::linear_atoms(&grid, &[((0.5, 1.5), 0.5), ((1.5, 0.5), 0.5)])?.with_id("crossing");
    let report = validate_generator(&gen, &grid, n.max(1000), &Stream::new(1, "validate"))?;
    println!(
        "failing points {}  nonnegative {}  largest |z| {:.2}",
        report.failing_points().len(),
        report.nonnegative,
        report.max_z()
    );
    let m = generator_constant(&gen, &grid, n, &Stream::new(1, "m"))?;
    // Each atom peaks at 1.5.
    println!("m = {:.4} ± {:.4} (exact 1.5)", m.value, m.se);
    Ok((report.pass, m.value))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(50_000).map(|_| ())
}
