// Survivor bound P(eta > |s| f) >= 1 - exp(-|s| E inf|f|Z), then a sequence
// that lies in the functional domain of attraction even though
// P(eta_n > c) stays away from P(eta > c).

use maxstable::diagnose::{counterexample_run, survivor_check};
use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::{make_grid, standard_bank, EFunction};
use maxstable::mc::Stream;
use maxstable::Result;

pub fn run(n: u64) -> Result<(f64, f64)> {
    let grid = make_grid(101)?;
    let gen = GeneratorSpec::preset_g3(&grid);
    let one = EFunction::constant(&grid, -1.0).with_id("minus_one");
    let surv = survivor_check(&gen, &one, &[-0.5, -0.1, -0.01], n, &Stream::new(21, "survivor"))?;
    for r in &surv.rows {
        println!("s {:5.2}  P {:.4}  bound {:.4}  slope {:.3}", r.s, r.p.p, r.bound, r.slope);
    }
    let fs: Vec<_> = standard_bank(&grid).functions().to_vec();
    let ce = counterexample_run(&gen, &fs, -1.5, &[2, 10, 16], n, &Stream::new(21, "counterexample"))?;
    println!("P(eta > c) {:.4}", ce.p_exceed.p);
    for r in &ce.rows {
        println!("n {:>2}  P(eta_n > c) {:.4}  df deviation {:.4}", r.n, r.p_exceed_n.p, r.deviation);
    }
    let last = ce.rows.last().unwrap();
    Ok((ce.p_exceed.p, last.p_exceed_n.p))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(100_000).map(|_| ())
}
