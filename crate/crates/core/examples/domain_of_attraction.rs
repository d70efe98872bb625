// P(n max_i V_i <= f)^n for iid GPPs V_i approaches exp(-||f||_D) as n grows.

use maxstable::diagnose::{doa_curve, Norming};
use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::{make_grid, standard_bank};
use maxstable::mc::Stream;
use maxstable::simulate::{Process, ProcessKind};
use maxstable::Result;

pub fn run(replicates: u64) -> Result<Vec<f64>> {
    let grid = make_grid(51)?;
    let process = Process::new(ProcessKind::Gpp, GeneratorSpec::preset_g3(&grid));
    let f = standard_bank(&grid).get("tent").unwrap().clone();
    let curve = doa_curve(&process, Norming::default(), &f, &[1, 2, 4, 8, 16], replicates, &Stream::new(4, "doa"))?;
    for r in &curve.rows {
        println!("n {:>3}  P^n {:.4}  limit {:.4}  deviation {:+.4}", r.n, r.le_pow, r.model.p, r.dev_le);
    }
    Ok(curve.rows.iter().map(|r| r.dev_le).collect())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(200_000).map(|_| ())
}
