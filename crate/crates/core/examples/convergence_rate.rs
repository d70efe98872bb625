// Log-log slope of the df deviation for normalized GPP maxima. The exact
// deviation behaves like 1/n, so the slope is close to -1.

use maxstable::diagnose::rate_fit;
use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::{make_grid, standard_bank};
use maxstable::mc::Stream;
use maxstable::simulate::{Process, ProcessKind};
use maxstable::Result;

pub fn run(replicates: u64) -> Result<Option<f64>> {
    let grid = make_grid(51)?;
    let process = Process::new(ProcessKind::Gpp, GeneratorSpec::preset_g2(&grid));
    let bank = standard_bank(&grid);
    let fs: Vec<_> = bank.functions().iter().take(6).cloned().collect();
    let rep = rate_fit(&process, &fs, &[8, 16, 32, 64, 128, 256], replicates, &Stream::new(8, "rate"))?;
    for p in rep.points.iter().filter(|p| p.kept) {
        println!("{:<10} n {:>4}  deviation {:.3e}", p.f_id, p.n, p.deviation);
    }
    println!("slope {:?}", rep.slope);
    Ok(rep.slope)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(100_000).map(|_| ())
}
