// n times the pointwise maximum of n iid standard MSPs has the same df as one
// copy: P(n max <= f) = exp(-||f||_D).

use maxstable::diagnose::empirical_df;
use maxstable::dnorm::msp_cdf;
use maxstable::generator::{GeneratorSpec, PathSample};
use maxstable::gridfun::{make_grid, standard_bank};
use maxstable::mc::Stream;
use maxstable::simulate::{simulate_paths, Process, ProcessKind};
use maxstable::Result;

pub fn run(replicates: u64) -> Result<f64> {
    let copies = 10;
    let grid = make_grid(41)?;
    let gen = GeneratorSpec::preset_g2(&grid);
    let process = Process::new(ProcessKind::StandardMsp, gen.clone());
    let stream = Stream::new(5, "max_stability");
    let (paths, _) = simulate_paths(&process, replicates * copies, &stream)?;
    let maxima: Vec<PathSample> = paths
        .chunks(copies as usize)
        .map(|block| {
            let mut m = block[0].clone();
            for p in &block[1..] {
                for (a, b) in m.values.iter_mut().zip(&p.values) {
                    *a = a.max(*b);
                }
            }
            m.values.iter_mut().for_each(|v| *v *= copies as f64);
            m
        })
        .collect();
    let mut worst: f64 = 0.0;
    for f in standard_bank(&grid).functions().iter().take(8) {
        let emp = empirical_df(&maxima, f)?;
        let model = msp_cdf(f, &gen, &grid, 100_000, &stream.child(f.id()))?;
        worst = worst.max((emp.p - model.p).abs());
        println!("{:<10} empirical {:.4}  model {:.4}", f.id(), emp.p, model.p);
    }
    println!("largest deviation {worst:.4}");
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(5_000).map(|_| ())
}
