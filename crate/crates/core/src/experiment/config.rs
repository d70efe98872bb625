//! TOML experiment configuration and resolution of ids into objects.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnose::Norming;
use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::gridfun::{load_bank, make_grid, standard_bank, EFunction, FunctionBank, Grid, DEFAULT_GRID_SIZE};
use crate::mc::Stream;
use crate::simulate::{ProcessKind, StoppingRule};

/// Reference to every member of the function bank.
pub const BANK: &str = "bank";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; required.
    pub seed: u64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Bank table; the built-in standard bank when absent.
    pub bank: Option<PathBuf>,
    pub bank_overrides: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub generators: Vec<GeneratorDecl>,
    #[serde(default)]
    pub functions: Vec<FunctionDecl>,
    pub experiments: Vec<Experiment>,
    /// Directory against which relative paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDecl {
    pub prob: f64,
    /// Values at `t = 0` and `t = 1`, linear in between.
    pub linear: Option<[f64; 2]>,
    /// One value per grid point.
    pub values: Option<Vec<f64>>,
    /// `|f|` for a bank or declared function id.
    pub function: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDecl {
    pub id: String,
    /// `G2`, `G3`, `CLG` or `constant`.
    pub preset: Option<String>,
    /// `constant`, `finite_spectral` or `capped_log_gaussian`.
    pub family: Option<String>,
    #[serde(default)]
    pub atoms: Vec<AtomDecl>,
    pub sigma: Option<f64>,
    pub cap: Option<f64>,
    pub corr_length: Option<f64>,
    pub calibration: Option<Calibration>,
    pub calibration_n: Option<u64>,
    #[serde(default)]
    pub integrable_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDecl {
    pub id: String,
    pub constant: Option<f64>,
    /// Values at `t = 0` and `t = 1`, linear in between.
    pub linear: Option<[f64; 2]>,
    pub values: Option<Vec<f64>>,
    /// `(t, value)` overrides, snapped to the nearest grid point.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

fn bank_ref() -> Vec<String> {
    vec![BANK.to_string()]
}

fn default_copies() -> u64 {
    10
}

fn default_tol_df() -> f64 {
    0.02
}

fn default_gpp_scale() -> f64 {
    0.9
}

fn default_slope_range() -> [f64; 2] {
    [-1.3, -0.7]
}

fn default_margin_tol() -> f64 {
    1e-9
}

fn default_range() -> [f64; 2] {
    [-2.0, 0.0]
}

fn default_t_pair() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_df_n() -> u32 {
    10
}

fn default_min_n() -> u32 {
    4
}

fn default_true() -> bool {
    true
}

fn default_paths() -> u64 {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DnormCheck {
    /// `‖f‖_D = ‖f‖_∞` to 1e-12 with zero SE.
    Exact,
    /// `‖f‖_∞ ≤ ‖f‖_D ≤ m̂‖f‖_∞` within 3-SE bands.
    Sandwich,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateExpectation {
    #[default]
    Slope,
    /// All deviations within 3 SE of zero.
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockCase {
    /// One union of `[a, b]` ranges per block.
    pub blocks: Vec<Vec<[f64; 2]>>,
    pub thresholds: Vec<f64>,
}

/// One experiment; `kind` selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    #[serde(rename = "dnorm")]
    DNorm {
        id: String,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        n: u64,
        #[serde(default)]
        check: DnormCheck,
    },
    Generator {
        id: String,
        generator: String,
        n: u64,
        expected_m: Option<f64>,
        #[serde(default = "default_true")]
        validate: bool,
    },
    Fidi {
        id: String,
        generator: String,
        #[serde(default)]
        pairs: Vec<[f64; 2]>,
        #[serde(default)]
        random_pairs: usize,
        #[serde(default = "default_range")]
        range: [f64; 2],
        #[serde(default = "default_t_pair")]
        t: [f64; 2],
        n: u64,
    },
    MspMargins {
        id: String,
        generator: String,
        n: u64,
        points: Vec<f64>,
        rule: Option<StoppingRule>,
    },
    MaxStability {
        id: String,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        #[serde(default = "default_copies")]
        copies: u64,
        replicates: u64,
        #[serde(default = "default_tol_df")]
        tol: f64,
        rule: Option<StoppingRule>,
    },
    GppDf {
        id: String,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        n: u64,
        #[serde(default = "default_gpp_scale")]
        scale: f64,
    },
    Spectral {
        id: String,
        process: ProcessKind,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        /// Absolute `s` values.
        s: Option<Vec<f64>>,
        /// Fractions of the validity limit `1/(M‖f‖_∞)`.
        s_relative: Option<Vec<f64>>,
        n: u64,
        /// Rescale each function to this sup-norm first.
        normalize: Option<f64>,
    },
    Tail {
        id: String,
        process: ProcessKind,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        s: Vec<f64>,
        n: u64,
    },
    Doa {
        id: String,
        process: ProcessKind,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        n_values: Vec<u64>,
        replicates: u64,
        #[serde(default)]
        norming: NormingDecl,
    },
    Blocks {
        id: String,
        generator: String,
        cases: Vec<BlockCase>,
        n: u64,
        rule: Option<StoppingRule>,
    },
    Rate {
        id: String,
        process: ProcessKind,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        n_values: Vec<u64>,
        replicates: u64,
        #[serde(default = "default_slope_range")]
        slope_range: [f64; 2],
        #[serde(default)]
        expect: RateExpectation,
    },
    Survivor {
        id: String,
        generator: String,
        function: String,
        s: Vec<f64>,
        slope_s: Option<f64>,
        n: u64,
    },
    Counterexample {
        id: String,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        c: f64,
        n_values: Vec<u32>,
        replicates: u64,
        #[serde(default = "default_df_n")]
        df_n: u32,
        #[serde(default = "default_tol_df")]
        df_tol: f64,
        #[serde(default = "default_min_n")]
        separation_min_n: u32,
    },
    #[serde(rename = "vonmises")]
    VonMises {
        id: String,
        process: ProcessKind,
        generator: String,
        function: String,
        c: Vec<f64>,
        n: u64,
    },
    Margins {
        id: String,
        generator: String,
        #[serde(default = "default_paths")]
        paths: u64,
        /// `(a, b, γ)` constant margin triples.
        triples: Vec<[f64; 3]>,
        #[serde(default = "default_margin_tol")]
        tol: f64,
        rule: Option<StoppingRule>,
    },
    Takahashi {
        id: String,
        generator: String,
        #[serde(default = "bank_ref")]
        functions: Vec<String>,
        n: u64,
    },
    Simulate {
        id: String,
        process: ProcessKind,
        generator: String,
        #[serde(default = "default_paths")]
        paths: u64,
        rule: Option<StoppingRule>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormingDecl {
    pub a_exponent: f64,
    pub b: f64,
}

impl Default for NormingDecl {
    fn default() -> Self {
        let n = Norming::default();
        NormingDecl {
            a_exponent: n.a_exponent,
            b: n.b,
        }
    }
}

impl From<NormingDecl> for Norming {
    fn from(d: NormingDecl) -> Norming {
        Norming {
            a_exponent: d.a_exponent,
            b: d.b,
        }
    }
}

impl Experiment {
    pub fn id(&self) -> &str {
        use Experiment::*;
        match self {
            DNorm { id, .. }
            | Generator { id, .. }
            | Fidi { id, .. }
            | MspMargins { id, .. }
            | MaxStability { id, .. }
            | GppDf { id, .. }
            | Spectral { id, .. }
            | Tail { id, .. }
            | Doa { id, .. }
            | Blocks { id, .. }
            | Rate { id, .. }
            | Survivor { id, .. }
            | Counterexample { id, .. }
            | VonMises { id, .. }
            | Margins { id, .. }
            | Takahashi { id, .. }
            | Simulate { id, .. } => id,
        }
    }

    pub fn generator(&self) -> &str {
        use Experiment::*;
        match self {
            DNorm { generator, .. }
            | Generator { generator, .. }
            | Fidi { generator, .. }
            | MspMargins { generator, .. }
            | MaxStability { generator, .. }
            | GppDf { generator, .. }
            | Spectral { generator, .. }
            | Tail { generator, .. }
            | Doa { generator, .. }
            | Blocks { generator, .. }
            | Rate { generator, .. }
            | Survivor { generator, .. }
            | Counterexample { generator, .. }
            | VonMises { generator, .. }
            | Margins { generator, .. }
            | Takahashi { generator, .. }
            | Simulate { generator, .. } => generator,
        }
    }

    /// Function ids the experiment refers to (`bank` expands later).
    pub fn function_refs(&self) -> Vec<&str> {
        use Experiment::*;
        match self {
            DNorm { functions, .. }
            | MaxStability { functions, .. }
            | GppDf { functions, .. }
            | Spectral { functions, .. }
            | Tail { functions, .. }
            | Doa { functions, .. }
            | Rate { functions, .. }
            | Counterexample { functions, .. }
            | Takahashi { functions, .. } => functions.iter().map(String::as_str).collect(),
            Survivor { function, .. } | VonMises { function, .. } => vec![function.as_str()],
            _ => Vec::new(),
        }
    }

    /// Replicate-type counts; each must be ≥ 1.
    fn counts(&self) -> Vec<u64> {
        use Experiment::*;
        match self {
            DNorm { n, .. }
            | Generator { n, .. }
            | Fidi { n, .. }
            | MspMargins { n, .. }
            | GppDf { n, .. }
            | Spectral { n, .. }
            | Tail { n, .. }
            | Blocks { n, .. }
            | Survivor { n, .. }
            | VonMises { n, .. }
            | Takahashi { n, .. } => vec![*n],
            MaxStability { replicates, copies, .. } => vec![*replicates, *copies],
            Doa { replicates, .. } | Rate { replicates, .. } | Counterexample { replicates, .. } => vec![*replicates],
            Margins { paths, .. } | Simulate { paths, .. } => vec![*paths],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks ids, counts and references without running anything.
    pub fn validate(&self) -> Result<Resolved> {
        if self.experiments.is_empty() {
            return Err(Error::Config("no experiments declared".into()));
        }
        let resolved = Resolved::build(self)?;
        let mut seen = BTreeMap::new();
        for e in &self.experiments {
            if seen.insert(e.id().to_string(), ()).is_some() {
                return Err(Error::Config(format!("duplicate experiment id {}", e.id())));
            }
            if !e.id().chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::Config(format!("experiment id {:?} must be [A-Za-z0-9_-]", e.id())));
            }
            resolved.generator(e.generator())?;
            for r in e.function_refs() {
                if r != BANK {
                    resolved.function(r)?;
                }
            }
            if e.counts().contains(&0) {
                return Err(Error::Config(format!("experiment {}: replicate counts must be ≥ 1", e.id())));
            }
        }
        Ok(resolved)
    }
}

/// Generators and functions with ids resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub grid: Grid,
    pub bank: FunctionBank,
    pub extra: Vec<EFunction>,
    pub generators: Vec<GeneratorSpec>,
}

impl Resolved {
    fn build(cfg: &ExperimentConfig) -> Result<Resolved> {
        let (grid, bank) = match &cfg.bank {
            Some(table) => {
                let ov = cfg.bank_overrides.as_ref().map(|p| cfg.resolve_path(p));
                let bank = load_bank(&cfg.resolve_path(table), ov.as_deref())?;
                if bank.grid().len() != cfg.grid_size {
                    return Err(Error::Config(format!(
                        "bank has {} grid points but grid_size is {}",
                        bank.grid().len(),
                        cfg.grid_size
                    )));
                }
                (bank.grid().clone(), bank)
            }
            None => {
                let grid = make_grid(cfg.grid_size)?;
                let bank = standard_bank(&grid);
                (grid, bank)
            }
        };
        let mut extra = Vec::new();
        for d in &cfg.functions {
            if bank.get(&d.id).is_some() || extra.iter().any(|f: &EFunction| f.id() == d.id) || d.id == BANK {
                return Err(Error::Config(format!("function id {} declared twice", d.id)));
            }
            extra.push(build_function(&grid, d)?);
        }
        let mut r = Resolved {
            grid,
            bank,
            extra,
            generators: Vec::new(),
        };
        let master = Stream::new(cfg.seed, "generators");
        for d in &cfg.generators {
            if r.generators.iter().any(|g| g.id() == d.id) {
                return Err(Error::Config(format!("generator id {} declared twice", d.id)));
            }
            let g = build_generator(&r, d, &master.child(&d.id))?;
            r.generators.push(g);
        }
        // Presets are available under their own names unless redeclared.
        let presets = [
            GeneratorSpec::constant(&r.grid),
            GeneratorSpec::preset_g2(&r.grid),
            GeneratorSpec::preset_g3(&r.grid),
            GeneratorSpec::preset_clg(&r.grid),
        ];
        for p in presets {
            if r.generators.iter().all(|g| g.id() != p.id()) {
                r.generators.push(p);
            }
        }
        Ok(r)
    }

    pub fn generator(&self, id: &str) -> Result<&GeneratorSpec> {
        self.generators
            .iter()
            .find(|g| g.id() == id)
            .ok_or_else(|| Error::Config(format!("unknown generator id {id}")))
    }

    pub fn function(&self, id: &str) -> Result<&EFunction> {
        self.bank
            .get(id)
            .or_else(|| self.extra.iter().find(|f| f.id() == id))
            .ok_or_else(|| Error::Config(format!("unknown function id {id}")))
    }

    /// Expands `bank` and resolves the remaining ids, in order.
    pub fn functions(&self, refs: &[String]) -> Result<Vec<EFunction>> {
        let mut out = Vec::new();
        for r in refs {
            if r == BANK {
                out.extend(self.bank.functions().iter().cloned());
            } else {
                out.push(self.function(r)?.clone());
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty function list".into()));
        }
        Ok(out)
    }
}

fn build_function(grid: &Grid, d: &FunctionDecl) -> Result<EFunction> {
    let given = [d.constant.is_some(), d.linear.is_some(), d.values.is_some()];
    if given.iter().filter(|&&b| b).count() > 1 {
        return Err(Error::Config(format!(
            "function {}: give at most one of constant, linear, values",
            d.id
        )));
    }
    let base = if let Some(c) = d.constant {
        vec![c; grid.len()]
    } else if let Some([a, b]) = d.linear {
        grid.points().iter().map(|t| a + (b - a) * t).collect()
    } else if let Some(v) = &d.values {
        v.clone()
    } else {
        vec![0.0; grid.len()]
    };
    let overrides = d.points.iter().map(|&[t, v]| (grid.nearest_index(t), v)).collect();
    Ok(EFunction::from_values(grid, base, overrides)
        .map_err(|e| Error::Config(format!("function {}: {e}", d.id)))?
        .with_id(d.id.clone()))
}

fn build_generator(r: &Resolved, d: &GeneratorDecl, stream: &Stream) -> Result<GeneratorSpec> {
    let grid = &r.grid;
    let bad = |msg: String| Error::Config(format!("generator {}: {msg}", d.id));
    let g = match (d.preset.as_deref(), d.family.as_deref()) {
        (Some(_), Some(_)) => return Err(bad("give either preset or family".into())),
        (Some("G2"), None) => GeneratorSpec::preset_g2(grid),
        (Some("G3"), None) => GeneratorSpec::preset_g3(grid),
        (Some("CLG"), None) => GeneratorSpec::preset_clg(grid),
        (Some("constant"), None) | (None, Some("constant")) => GeneratorSpec::constant(grid),
        (Some(p), None) => return Err(bad(format!("unknown preset {p}"))),
        (None, Some("finite_spectral")) => {
            let mut atoms = Vec::new();
            for a in &d.atoms {
                let h = match (&a.linear, &a.values, &a.function) {
                    (Some([x, y]), None, None) => grid.points().iter().map(|t| x + (y - x) * t).collect(),
                    (None, Some(v), None) => v.clone(),
                    (None, None, Some(id)) => r.function(id)?.values().iter().map(|v| v.abs()).collect(),
                    _ => return Err(bad("each atom needs exactly one of linear, values, function".into())),
                };
                atoms.push((h, a.prob));
            }
            GeneratorSpec::finite_spectral(grid, atoms).map_err(|e| bad(e.to_string()))?
        }
        (None, Some("capped_log_gaussian")) => {
            let g = GeneratorSpec::capped_log_gaussian(
                grid,
                vec![d.sigma.unwrap_or(1.0); grid.len()],
                d.cap.unwrap_or(4.0),
                d.corr_length.unwrap_or(0.2),
            )
            .map_err(|e| bad(e.to_string()))?;
            match d.calibration.unwrap_or(Calibration::Exact) {
                Calibration::Exact => g.calibrate_exact()?,
                Calibration::MonteCarlo => g.calibrate_mc(d.calibration_n.unwrap_or(100_000), stream)?,
            }
        }
        (None, Some(f)) => return Err(bad(format!("unknown family {f}"))),
        (None, None) => return Err(bad("needs a preset or a family".into())),
    };
    let g = g.with_id(d.id.clone());
    Ok(if d.integrable_only {
        g.declare_integrable_only()
    } else {
        g
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
grid_size = 21

[[generators]]
id = "G2"
preset = "G2"

[[generators]]
id = "mine"
family = "finite_spectral"
atoms = [{ prob = 0.5, linear = [0.5, 1.5] }, { prob = 0.5, linear = [1.5, 0.5] }]

[[functions]]
id = "half"
constant = -0.5
points = [[0.5, -1.0]]

[[experiments]]
id = "a"
kind = "dnorm"
generator = "mine"
functions = ["half", "const_m1"]
n = 100
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let r = cfg.validate().unwrap();
        assert_eq!(r.grid.len(), 21);
        let half = r.function("half").unwrap();
        assert_eq!(half.eval(10).unwrap(), -1.0);
        assert_eq!(r.functions(&["bank".into()]).unwrap().len(), 20);
        assert_eq!(r.generator("mine").unwrap().as_bound(), Some(1.5));
        assert_eq!(cfg.formats, vec![Format::Csv]);
    }

    #[test]
    fn rejects_unknown_ids_and_missing_seed() {
        let bad = SAMPLE.replace("generator = \"mine\"", "generator = \"nope\"");
        let err = ExperimentConfig::from_toml(&bad).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
        let bad = SAMPLE.replace("\"half\", ", "\"missing\", ");
        let err = ExperimentConfig::from_toml(&bad).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("seed = 7", "")).is_err());
        let bad = SAMPLE.replace("n = 100", "n = 0");
        assert!(ExperimentConfig::from_toml(&bad).unwrap().validate().is_err());
        let bad = SAMPLE.replace("n = 100", "n = 100\nbogus = 1");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn every_kind_parses() {
        let text = r#"
seed = 1
[[experiments]]
id = "r"
kind = "rate"
process = "gpp"
generator = "G2"
n_values = [8, 16, 32, 64]
replicates = 10
[[experiments]]
id = "v"
kind = "vonmises"
process = "shifted_copula"
generator = "G2"
function = "const_m1"
c = [-0.1]
n = 10
[[experiments]]
id = "m"
kind = "msp_margins"
generator = "G2"
n = 10
points = [0.5]
rule = { fixed_k = 64 }
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiments.len(), 3);
        assert!(matches!(
            cfg.experiments[2],
            Experiment::MspMargins { rule: Some(StoppingRule::FixedK(64)), .. }
        ));
        let round = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(round, cfg);
    }
}
