// Joint df of block suprema over unions of grid intervals. It equals the df
// of the path at a step function, so exp(-||step||_D) is the model.

use maxstable::diagnose::{block_max_df, block_step_function, GridInterval, IntervalUnion};
use maxstable::dnorm::msp_cdf;
use maxstable::generator::GeneratorSpec;
use maxstable::gridfun::make_grid;
use maxstable::mc::Stream;
use maxstable::simulate::{simulate_paths, Process, ProcessKind};
use maxstable::Result;

pub fn run(n: u64) -> Result<(f64, f64)> {
    let grid = make_grid(101)?;
    let gen = GeneratorSpec::preset_g3(&grid);
    let stream = Stream::new(12, "blocks");
    let (paths, _) = simulate_paths(&Process::new(ProcessKind::StandardMsp, gen.clone()), n, &stream)?;
    let blocks = vec![
        IntervalUnion::new(vec![GridInterval::from_range(&grid, 0.0, 0.3)?, GridInterval::from_range(&grid, 0.7, 1.0)?])?,
        IntervalUnion::new(vec![GridInterval::from_range(&grid, 0.3, 0.7)?])?,
    ];
    let thresholds = [-0.8, -1.2];
    let emp = block_max_df(&paths, &blocks, &thresholds)?;
    let step = block_step_function(&grid, &blocks, &thresholds)?;
    let model = msp_cdf(&step, &gen, &grid, 200_000, &stream.child("model"))?;
    println!("P(block maxima below thresholds) {:.4} ± {:.4}, model {:.4}", emp.p, emp.se, model.p);
    Ok((emp.p, model.p))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(20_000).map(|_| ())
}
