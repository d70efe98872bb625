// Monte Carlo D-norms of a few bank functions under each preset generator,
// next to the two bounds sup|f| and m sup|f|.

use maxstable::dnorm::dnorm_many;
use maxstable::generator::{generator_constant, GeneratorSpec};
use maxstable::gridfun::{make_grid, standard_bank};
use maxstable::mc::Stream;
use maxstable::Result;

pub fn run(n: u64) -> Result<Vec<(String, f64)>> {
    let grid = make_grid(101)?;
    let bank = standard_bank(&grid);
    let fs: Vec<_> = ["const_m1", "tent", "sin_a", "pm_const"]
        .iter()
        .map(|id| bank.get(id).unwrap().clone())
        .collect();
    let stream = Stream::new(7, "dnorm_estimation");
    let mut out = Vec::new();
    for gen in [
        GeneratorSpec::constant(&grid),
        GeneratorSpec::preset_g2(&grid),
        GeneratorSpec::preset_g3(&grid),
        GeneratorSpec::preset_clg(&grid),
    ] {
        let m = generator_constant(&gen, &grid, n, &stream.child(gen.id()).child("m"))?;
        println!("{} (m = {:.4} ± {:.4})", gen.id(), m.value, m.se);
        for (f, d) in fs.iter().zip(dnorm_many(&fs, &gen, &grid, n, &stream.child(gen.id()))?) {
            println!(
                "  {:<10} {:.4} ± {:.4}   in [{:.4}, {:.4}]",
                f.id(),
                d.value,
                d.se,
                f.sup_norm(),
                m.value * f.sup_norm()
            );
            out.push((format!("{}/{}", gen.id(), f.id()), d.value));
        }
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(100_000).map(|_| ())
}
