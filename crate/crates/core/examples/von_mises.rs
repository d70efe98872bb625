// Local shape r_f(c) of the spectral df near 0 for the copula process.
// It shrinks toward 0 with c, as it does for a GPP.

use maxstable::diagnose::von_mises_diagnostic;
use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::make_grid;
use maxstable::gridfun::EFunction;
use maxstable::mc::Stream;
use maxstable::simulate::{Process, ProcessKind};
use maxstable::Result;

pub fn run(n: u64) -> Result<bool> {
    let grid = make_grid(51)?;
    let process = Process::new(ProcessKind::ShiftedCopula, GeneratorSpec::preset_g2(&grid));
    let f = EFunction::constant(&grid, -1.0);
    let rep = von_mises_diagnostic(&process, &f, &[-0.4, -0.2, -0.1], n, &Stream::new(31, "vonmises"))?;
    for r in &rep.rows {
        println!("c {:5.2}  r {:+.4} ± {:.4}  exact {:+.4}", r.c, r.r, r.r_se, r.oracle_r);
    }
    Ok(rep.shrinking)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(200_000).map(|_| ())
}
