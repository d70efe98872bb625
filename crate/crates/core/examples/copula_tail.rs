// Tail ratio (1 - H_f(s)) / (|s| ||f||_D) for the copula process exp(eta) - 1.
// The ratio tends to 1 as s -> 0.

use maxstable::diagnose::tail_equivalence;
use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::{make_grid, EFunction};
use maxstable::mc::Stream;
use maxstable::simulate::{Process, ProcessKind};
use maxstable::Result;

pub fn run(n: u64) -> Result<Vec<f64>> {
    let grid = make_grid(51)?;
    let process = Process::new(ProcessKind::ShiftedCopula, GeneratorSpec::preset_g2(&grid));
    let f = EFunction::from_fn(&grid, |t| -(0.5 + 0.5 * t))?.with_id("half_to_one");
    let rep = tail_equivalence(&process, &f, &[-0.4, -0.2, -0.1, -0.05], n, &Stream::new(11, "copula_tail"))?;
    for r in &rep.rows {
        println!("s {:5.2}  ratio {:.4} ± {:.4}  oracle {:.4}", r.s, r.ratio, r.se, r.oracle);
    }
    Ok(rep.rows.iter().map(|r| r.oracle).collect())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(100_000).map(|_| ())
}
