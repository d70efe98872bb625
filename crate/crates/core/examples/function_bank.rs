// Builds the standard 20-function bank on a 201-point grid, writes it as a
// whitespace table plus an override file, and reads it back.
//
//     cargo run --example function_bank -- data

use std::path::Path;

use maxstable::gridfun::{load_bank, make_grid, save_bank, standard_bank};

pub fn run(dir: &Path) -> maxstable::error::Result<usize> {
    let grid = make_grid(201)?;
    let bank = standard_bank(&grid);
    let (table, overrides) = (dir.join("bank.txt"), dir.join("bank_overrides.txt"));
    save_bank(&bank, &table, &overrides)?;
    let back = load_bank(&table, Some(&overrides))?;
    for (f, g) in bank.functions().iter().zip(back.functions()) {
        assert_eq!(f.values(), g.values(), "{}", f.id());
        println!("{:<16} sup {:.4}  overrides {}", f.id(), f.sup_norm(), f.overrides().len());
    }
    Ok(back.len())
}

#[allow(dead_code)]
fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| ".".into());
    let n = run(Path::new(&dir)).expect("bank round trip");
    println!("wrote {n} functions to {dir}");
}
