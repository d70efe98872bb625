// Spectral df of a generalized Pareto process: 1 + s ||f||_D for |s| sup|f| <= 1/M.

use maxstable::diagnose::spectral_df;
use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::{make_grid, standard_bank};
use maxstable::mc::Stream;
use maxstable::simulate::{Process, ProcessKind};
use maxstable::Result;

pub fn run(n: u64) -> Result<f64> {
    let grid = make_grid(101)?;
    let process = Process::new(ProcessKind::Gpp, GeneratorSpec::preset_g3(&grid));
    let f = standard_bank(&grid).get("sin_b").unwrap().clone();
    let s = [-0.6, -0.5, -0.4, -0.3, -0.2, -0.1];
    let curve = spectral_df(&process, &f, &s, n, &Stream::new(3, "gpp_spectral"))?;
    for p in &curve.points {
        println!("s {:5.2}  H {:.4} ± {:.4}  1 + s D {:.4}  {}", p.s, p.estimate.p, p.estimate.se, p.model, if p.valid { "" } else { "(outside)" });
    }
    let fit = curve.linear_fit().expect("at least two valid points");
    println!("slope {:.4} vs D-norm {:.4}; max residual {:.2e}", fit.slope, curve.dnorm.value, fit.max_residual);
    Ok(fit.slope)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(100_000).map(|_| ())
}
