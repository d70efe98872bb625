//! Function banks: the canonical 20-function test bank and its plain-text format.
//!
//! Table file: `#` starts a comment line; the first non-comment line is a
//! header `t <id_1> … <id_k>`; every further line holds a grid point followed by
//! one value per function. Override sidecar: one `<id> <grid_index> <value>`
//! triple per non-comment line.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EFunction, Grid};
use crate::error::{Error, Result};

pub const STANDARD_BANK_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionBank {
    grid: Grid,
    functions: Vec<EFunction>,
}

impl FunctionBank {
    pub fn new(grid: &Grid, functions: Vec<EFunction>) -> Result<FunctionBank> {
        for (k, f) in functions.iter().enumerate() {
            grid.ensure_same(f.grid(), "function bank")?;
            if functions[..k].iter().any(|g| g.id() == f.id()) {
                return Err(Error::invalid(format!("duplicate function id {}", f.id())));
            }
        }
        Ok(FunctionBank {
            grid: grid.clone(),
            functions,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn functions(&self) -> &[EFunction] {
        &self.functions
    }

    pub fn get(&self, id: &str) -> Option<&EFunction> {
        self.functions.iter().find(|f| f.id() == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.functions.iter().map(|f| f.id())
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Each member rescaled to sup-norm `target` (zero functions are kept).
    pub fn scaled_to(&self, target: f64) -> FunctionBank {
        let functions = self
            .functions
            .iter()
            .map(|f| {
                let s = f.sup_norm();
                if s > 0.0 {
                    f.scale(target / s)
                } else {
                    f.clone()
                }
            })
            .collect();
        FunctionBank {
            grid: self.grid.clone(),
            functions,
        }
    }
}

/// The canonical bank: constants, ramps, sinusoid-modulated negatives,
/// two-block steps and point-mass-augmented variants, all in `Ē⁻[0,1]`.
pub fn standard_bank(grid: &Grid) -> FunctionBank {
    let f = |id: &str, g: &dyn Fn(f64) -> f64| {
        EFunction::from_fn(grid, g).expect("bank function").with_id(id)
    };
    let at = |t: f64| grid.nearest_index(t);
    let step = |split: f64, left: f64, right: f64| move |t: f64| if t < split { left } else { right };

    let sin_b = |t: f64| -(0.75 + 0.25 * (4.0 * PI * t).cos());
    let functions = vec![
        f("const_m1", &|_| -1.0),
        f("const_m05", &|_| -0.5),
        f("const_m2", &|_| -2.0),
        f("ramp_up", &|t| -t),
        f("ramp_down", &|t| -(1.0 - t)),
        f("ramp_half", &|t| -(1.0 + t) / 2.0),
        f("tent", &|t| -(1.0 - (2.0 * t - 1.0).abs())),
        f("valley", &|t| -(0.25 + (2.0 * t - 1.0).abs())),
        f("sin_a", &|t| -(1.0 + 0.5 * (2.0 * PI * t).sin())),
        f("sin_b", &sin_b),
        f("sin_c", &|t| -0.5 * (1.0 + (3.0 * PI * t).sin().powi(2))),
        f("quad", &|t| -(0.1 + 4.0 * t * (1.0 - t))),
        f("exp_decay", &|t| -(-3.0 * t).exp()),
        f("step_a", &step(0.5, -1.0, -0.5)),
        f("step_b", &step(0.5, -0.3, -1.5)),
        f("step_c", &step(0.3, -2.0, -0.2)),
        f("pm_const", &|_| -0.5).with_override(at(0.5), -1.5).expect("override"),
        f("pm_ramp", &|t| -t / 2.0).with_override(at(0.0), -1.0).expect("override"),
        EFunction::point_masses(grid, &[(at(0.25), -1.0), (at(0.75), -0.5)])
            .expect("point masses")
            .with_id("pm_only"),
        f("pm_sin", &sin_b)
            .with_override(at(0.1), -1.8)
            .and_then(|g| g.with_override(at(0.9), -0.2))
            .expect("override"),
    ];
    debug_assert_eq!(functions.len(), STANDARD_BANK_SIZE);
    FunctionBank::new(grid, functions).expect("standard bank ids are distinct")
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64> {
    tok.parse::<f64>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("bad number {tok:?}: {e}"),
    })
}

/// Loads a bank from a table file and an optional override sidecar.
pub fn load_bank(table: &Path, overrides: Option<&Path>) -> Result<FunctionBank> {
    let text = fs::read_to_string(table).map_err(|e| Error::io(table, e))?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines.next().ok_or_else(|| Error::Parse {
        path: table.to_path_buf(),
        line: 0,
        msg: "missing header".into(),
    })?;
    let mut cols = header.split_whitespace();
    if cols.next() != Some("t") {
        return Err(Error::Parse {
            path: table.to_path_buf(),
            line: hline,
            msg: "header must start with `t`".into(),
        });
    }
    let ids: Vec<String> = cols.map(str::to_string).collect();
    let mut points = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != ids.len() + 1 {
            return Err(Error::Parse {
                path: table.to_path_buf(),
                line: lineno,
                msg: format!("expected {} columns, found {}", ids.len() + 1, toks.len()),
            });
        }
        points.push(parse_f64(table, lineno, toks[0])?);
        for (col, tok) in columns.iter_mut().zip(&toks[1..]) {
            col.push(parse_f64(table, lineno, tok)?);
        }
    }
    let grid = Grid::from_points(points)?;

    let mut extra: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ids.len()];
    if let Some(path) = overrides {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, line) in content_lines(&text) {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg,
            };
            if toks.len() != 3 {
                return Err(bad(format!("expected `id index value`, got {line:?}")));
            }
            let k = ids
                .iter()
                .position(|id| id == toks[0])
                .ok_or_else(|| bad(format!("unknown function id {}", toks[0])))?;
            let idx: usize = toks[1]
                .parse()
                .map_err(|e| bad(format!("bad index {:?}: {e}", toks[1])))?;
            extra[k].push((idx, parse_f64(path, lineno, toks[2])?));
        }
    }

    let functions = ids
        .into_iter()
        .zip(columns)
        .zip(extra)
        .map(|((id, base), ov)| Ok(EFunction::from_values(&grid, base, ov)?.with_id(id)))
        .collect::<Result<Vec<_>>>()?;
    FunctionBank::new(&grid, functions)
}

/// Writes the table and the override sidecar. Values use the shortest
/// round-trip decimal form, so loading reproduces them exactly.
pub fn save_bank(bank: &FunctionBank, table: &Path, overrides: &Path) -> Result<()> {
    let mut out = String::from("# function bank: one row per grid point, one column per function\nt");
    for id in bank.ids() {
        out.push(' ');
        out.push_str(id);
    }
    out.push('\n');
    for (i, t) in bank.grid.points().iter().enumerate() {
        write!(out, "{t}").unwrap();
        for f in bank.functions() {
            write!(out, " {}", f.base()[i]).unwrap();
        }
        out.push('\n');
    }
    fs::write(table, out).map_err(|e| Error::io(table, e))?;

    let mut side = String::from("# point overrides: function_id grid_index value\n");
    for f in bank.functions() {
        for (i, v) in f.overrides() {
            writeln!(side, "{} {} {}", f.id(), i, v).unwrap();
        }
    }
    fs::write(overrides, side).map_err(|e| Error::io(overrides, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfun::{make_grid, Sign};

    #[test]
    fn standard_bank_is_nonpositive_and_distinct() {
        let g = make_grid(201).unwrap();
        let bank = standard_bank(&g);
        assert_eq!(bank.len(), STANDARD_BANK_SIZE);
        for f in bank.functions() {
            assert_eq!(f.sign(), Sign::Nonpositive, "{}", f.id());
            assert!(f.sup_norm() > 0.0);
        }
        assert_eq!(bank.get("pm_const").unwrap().eval(100).unwrap(), -1.5);
        assert_eq!(bank.get("pm_only").unwrap().eval(50).unwrap(), -1.0);
        assert_eq!(bank.get("pm_only").unwrap().eval(51).unwrap(), 0.0);
    }

    #[test]
    fn save_then_load_reproduces_bank() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(33).unwrap();
        let bank = standard_bank(&g);
        let (t, o) = (dir.path().join("bank.txt"), dir.path().join("ov.txt"));
        save_bank(&bank, &t, &o).unwrap();
        let loaded = load_bank(&t, Some(&o)).unwrap();
        assert_eq!(loaded.grid(), bank.grid());
        for (a, b) in loaded.functions().iter().zip(bank.functions()) {
            assert_eq!(a.id(), b.id());
            assert_eq!(a.values(), b.values());
            assert_eq!(a.overrides(), b.overrides());
        }
    }

    #[test]
    fn load_reports_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("bad.txt");
        fs::write(&t, "t a b\n0 -1 -1\n1 -1\n").unwrap();
        assert!(matches!(load_bank(&t, None), Err(Error::Parse { line: 3, .. })));
        fs::write(&t, "x a\n0 -1\n1 -1\n").unwrap();
        assert!(load_bank(&t, None).is_err());
        fs::write(&t, "t a\n0 -1\n1 -1\n").unwrap();
        let o = dir.path().join("o.txt");
        fs::write(&o, "zzz 0 -2\n").unwrap();
        assert!(load_bank(&t, Some(&o)).is_err());
        fs::write(&o, "a 1 -2\n").unwrap();
        assert_eq!(load_bank(&t, Some(&o)).unwrap().get("a").unwrap().eval(1).unwrap(), -2.0);
    }
}
