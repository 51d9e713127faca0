//! Flat `key = value` configuration files.
//!
//! One entry per line. Blank lines and lines starting with `#` are ignored;
//! a `#` after a value starts a trailing comment. Keys are lowercase ASCII
//! identifiers and may appear once. Values are taken verbatim after trimming.
//!
//! Integrand keys:
//!
//! | key       | meaning                                              |
//! |-----------|------------------------------------------------------|
//! | `phi`     | `classical_tv`, `variable_exponent`, `double_phase`, `power_weighted` |
//! | `p`       | constant exponent, or `p_file` naming a grid file    |
//! | `a`       | constant weight, or `a_file`                         |
//! | `q`       | double phase exponent (constant)                     |
//! | `w`       | linear weight, or `w_file`                           |
//!
//! Solver keys: `lambda`, `tau`, `sigma`, `theta`, `max_iters`, `gap_tol`,
//! `newton_tol`, `newton_max`, `check_every`, `seed`. Relative file paths
//! resolve against the directory of the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::calculus::{Grid, ScalarImage};
use crate::error::{Error, Result};
use crate::phi::{PhiFamily, PhiField};
use crate::solver::SolverConfig;

use super::grid::{load_grid, save_grid};

/// Ordered key-value document.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        && key.as_bytes()[0].is_ascii_lowercase()
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected 'key = value', found '{content}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !valid_key(key) {
                return Err(Error::Config {
                    line,
                    message: format!("invalid key '{key}'"),
                });
            }
            if value.is_empty() {
                return Err(Error::Config {
                    line,
                    message: format!("missing value for '{key}'"),
                });
            }
            if let Some(prev) = kv.entries.iter().find(|e| e.key == key) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key '{key}' (first on line {})", prev.line),
                });
            }
            kv.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(kv)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{} = {}", e.key, e.value);
        }
        out
    }

    /// Inserts or replaces a value. Panics on an invalid key.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        assert!(valid_key(key), "invalid config key {key:?}");
        let value = value.to_string();
        match self.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value,
            None => self.entries.push(Entry {
                key: key.to_string(),
                value,
                line: 0,
            }),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map_or(0, |e| e.line)
    }

    /// Parses the value of `key` if present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| Error::Config {
                line: self.line_of(key),
                message: format!("invalid value '{v}' for '{key}'"),
            }),
        }
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?.ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing required key '{key}'"),
        })
    }

    /// Rejects keys outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self
            .entries
            .iter()
            .find(|e| !known.contains(&e.key.as_str()))
        {
            Some(e) => Err(Error::Config {
                line: e.line,
                message: format!("unknown key '{}'", e.key),
            }),
            None => Ok(()),
        }
    }
}

pub const PHI_KEYS: &[&str] = &["phi", "p", "p_file", "a", "a_file", "q", "w", "w_file"];

pub const SOLVER_KEYS: &[&str] = &[
    "lambda",
    "tau",
    "sigma",
    "theta",
    "max_iters",
    "gap_tol",
    "newton_tol",
    "newton_max",
    "check_every",
    "seed",
];

/// A parameter map given as a constant or as a grid file.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamSource {
    Constant(f64),
    File(PathBuf),
}

impl ParamSource {
    fn read(kv: &KeyValues, name: &str) -> Result<Option<Self>> {
        let file_key = format!("{name}_file");
        match (kv.parsed::<f64>(name)?, kv.get(&file_key)) {
            (Some(_), Some(_)) => Err(Error::Config {
                line: kv.line_of(&file_key),
                message: format!("'{name}' and '{file_key}' are mutually exclusive"),
            }),
            (Some(v), None) => Ok(Some(ParamSource::Constant(v))),
            (None, Some(path)) => Ok(Some(ParamSource::File(PathBuf::from(path)))),
            (None, None) => Ok(None),
        }
    }

    fn write(&self, kv: &mut KeyValues, name: &str) {
        match self {
            ParamSource::Constant(v) => kv.set(name, v),
            ParamSource::File(p) => kv.set(&format!("{name}_file"), p.display()),
        }
    }

    fn resolve(&self, grid: Grid, base: &Path) -> Result<ScalarImage> {
        match self {
            ParamSource::Constant(v) => Ok(ScalarImage::constant(grid, *v)),
            ParamSource::File(p) => {
                let map = load_grid(base.join(p))?;
                let g = map.grid();
                if (g.height, g.width) != (grid.height, grid.width) {
                    return Err(Error::Shape(format!(
                        "parameter map {} is {}x{}, image is {}x{}",
                        p.display(),
                        g.height,
                        g.width,
                        grid.height,
                        grid.width
                    )));
                }
                ScalarImage::from_vec(grid, map.into_vec())
            }
        }
    }
}

/// Integrand description as stored in a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiSpec {
    pub family: PhiFamily,
    pub p: Option<ParamSource>,
    pub a: Option<ParamSource>,
    pub q: Option<f64>,
    pub w: Option<ParamSource>,
}

impl PhiSpec {
    pub fn classical_tv() -> Self {
        PhiSpec {
            family: PhiFamily::ClassicalTv,
            p: None,
            a: None,
            q: None,
            w: None,
        }
    }

    /// Reads the integrand keys. `phi` defaults to `classical_tv`.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let family = match kv.get("phi") {
            None => PhiFamily::ClassicalTv,
            Some(name) => PhiFamily::parse(name).ok_or_else(|| Error::Config {
                line: kv.line_of("phi"),
                message: format!("unknown integrand family '{name}'"),
            })?,
        };
        let spec = PhiSpec {
            family,
            p: ParamSource::read(kv, "p")?,
            a: ParamSource::read(kv, "a")?,
            q: kv.parsed("q")?,
            w: ParamSource::read(kv, "w")?,
        };
        let (needs_p, needs_a, needs_w) = match family {
            PhiFamily::ClassicalTv => (false, false, false),
            PhiFamily::VariableExponent => (true, false, false),
            PhiFamily::DoublePhase => (false, true, false),
            PhiFamily::PowerWeighted => (false, false, true),
        };
        let check = |present: bool, needed: bool, key: &str| -> Result<()> {
            match (present, needed) {
                (false, true) => Err(Error::Config {
                    line: 0,
                    message: format!(
                        "family '{}' requires '{key}' or '{key}_file'",
                        family.name()
                    ),
                }),
                (true, false) => Err(Error::Config {
                    line: kv.line_of(key).max(kv.line_of(&format!("{key}_file"))),
                    message: format!("'{key}' does not apply to family '{}'", family.name()),
                }),
                _ => Ok(()),
            }
        };
        check(spec.p.is_some(), needs_p, "p")?;
        check(spec.a.is_some(), needs_a, "a")?;
        check(spec.w.is_some(), needs_w, "w")?;
        check(spec.q.is_some(), needs_a, "q")?;
        Ok(spec)
    }

    pub fn write_into(&self, kv: &mut KeyValues) {
        kv.set("phi", self.family.name());
        for (name, src) in [("p", &self.p), ("a", &self.a), ("w", &self.w)] {
            if let Some(s) = src {
                s.write(kv, name);
            }
        }
        if let Some(q) = self.q {
            kv.set("q", q);
        }
    }

    /// Builds the field on `grid`, loading parameter files relative to `base`.
    pub fn build(&self, grid: Grid, base: impl AsRef<Path>) -> Result<PhiField> {
        let base = base.as_ref();
        let get = |src: &Option<ParamSource>, key: &str| -> Result<ScalarImage> {
            src.as_ref()
                .ok_or_else(|| Error::Config {
                    line: 0,
                    message: format!("missing '{key}'"),
                })?
                .resolve(grid, base)
        };
        match self.family {
            PhiFamily::ClassicalTv => Ok(PhiField::classical_tv(grid)),
            PhiFamily::VariableExponent => PhiField::variable_exponent(get(&self.p, "p")?),
            PhiFamily::DoublePhase => {
                let q = self.q.ok_or_else(|| Error::Config {
                    line: 0,
                    message: "missing 'q'".into(),
                })?;
                PhiField::double_phase(get(&self.a, "a")?, q)
            }
            PhiFamily::PowerWeighted => PhiField::power_weighted(get(&self.w, "w")?),
        }
    }
}

fn constant_value(img: &ScalarImage) -> Option<f64> {
    let first = img.data()[0];
    img.data()
        .iter()
        .all(|v| v.to_bits() == first.to_bits())
        .then_some(first)
}

/// Describes `field` as config keys. Constant parameter maps become values;
/// others are written next to the config as `<stem>_<key>.grid`.
pub fn phi_field_to_config(
    field: &PhiField,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<KeyValues> {
    let dir = dir.as_ref();
    let source = |img: &ScalarImage, key: &str| -> Result<ParamSource> {
        match constant_value(img) {
            Some(v) => Ok(ParamSource::Constant(v)),
            None => {
                let name = format!("{stem}_{key}.grid");
                save_grid(img, dir.join(&name))?;
                Ok(ParamSource::File(PathBuf::from(name)))
            }
        }
    };
    let mut spec = PhiSpec::classical_tv();
    spec.family = field.family();
    if let Some(p) = field.p_field() {
        spec.p = Some(source(p, "p")?);
    }
    if let Some(a) = field.a_field() {
        spec.a = Some(source(a, "a")?);
        spec.q = field.q();
    }
    if let Some(w) = field.w_field() {
        spec.w = Some(source(w, "w")?);
    }
    let mut kv = KeyValues::new();
    spec.write_into(&mut kv);
    Ok(kv)
}

/// Writes `field` as `<dir>/<stem>.conf` plus any parameter grid files.
pub fn save_phi_field(field: &PhiField, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let kv = phi_field_to_config(field, dir, stem)?;
    let path = dir.join(format!("{stem}.conf"));
    kv.save(&path)?;
    Ok(path)
}

/// Reads an integrand config file and builds the field on `grid`.
pub fn load_phi_field(path: impl AsRef<Path>, grid: Grid) -> Result<PhiField> {
    let path = path.as_ref();
    let kv = KeyValues::load(path)?;
    kv.check_known(PHI_KEYS)?;
    let base = path.parent().unwrap_or(Path::new("."));
    PhiSpec::from_key_values(&kv)?.build(grid, base)
}

/// Solver settings from config keys on top of [`SolverConfig::new`].
pub fn solver_config_from(kv: &KeyValues, grid: Grid) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::new(kv.required("lambda")?, grid);
    if let Some(v) = kv.parsed("tau")? {
        cfg.tau = v;
    }
    if let Some(v) = kv.parsed("sigma")? {
        cfg.sigma = v;
    }
    if let Some(v) = kv.parsed("theta")? {
        cfg.theta = v;
    }
    if let Some(v) = kv.parsed("max_iters")? {
        cfg.max_iters = v;
    }
    if let Some(v) = kv.parsed("gap_tol")? {
        cfg.gap_tol = v;
    }
    if let Some(v) = kv.parsed("newton_tol")? {
        cfg.newton_tol = v;
    }
    if let Some(v) = kv.parsed("newton_max")? {
        cfg.newton_max = v;
    }
    if let Some(v) = kv.parsed("check_every")? {
        cfg.check_every = v;
    }
    if let Some(v) = kv.parsed("seed")? {
        cfg.seed = v;
    }
    cfg.validate(grid)?;
    Ok(cfg)
}

pub fn solver_config_into(cfg: &SolverConfig, kv: &mut KeyValues) {
    kv.set("lambda", cfg.lambda);
    kv.set("tau", cfg.tau);
    kv.set("sigma", cfg.sigma);
    kv.set("theta", cfg.theta);
    kv.set("max_iters", cfg.max_iters);
    kv.set("gap_tol", cfg.gap_tol);
    kv.set("newton_tol", cfg.newton_tol);
    kv.set("newton_max", cfg.newton_max);
    kv.set("check_every", cfg.check_every);
    kv.set("seed", cfg.seed);
}
