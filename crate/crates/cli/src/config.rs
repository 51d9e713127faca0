//! Run configuration assembled from a config file and command-line flags.
//!
//! Both sources are flat `key = value` documents. Flags override file
//! entries. Which keys are accepted depends on the command.

use std::path::{Path, PathBuf};

use rofphi_core::io::config::{solver_config_from, PHI_KEYS, SOLVER_KEYS};
use rofphi_core::io::{KeyValues, PhiSpec};
use rofphi_core::{Error, Grid, Result, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Denoise,
    Certify,
    Flow,
    CheckConditions,
    ConjugateTable,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Denoise => "denoise",
            Command::Certify => "certify",
            Command::Flow => "flow",
            Command::CheckConditions => "check-conditions",
            Command::ConjugateTable => "conjugate-table",
        }
    }

    fn specific_keys(self) -> &'static [&'static str] {
        match self {
            Command::Denoise => &["input", "output", "noise_sigma", "metrics"],
            Command::Certify => &["input", "output", "u", "xi"],
            Command::Flow => &[
                "input",
                "output",
                "noise_sigma",
                "metrics",
                "dt",
                "steps",
                "snapshot_every",
            ],
            Command::CheckConditions => &["input", "output", "height", "width"],
            Command::ConjugateTable => &[
                "input",
                "output",
                "height",
                "width",
                "row",
                "col",
                "s_max",
                "samples",
                "t_max",
                "oracle_samples",
            ],
        }
    }

    fn uses_solver(self) -> bool {
        matches!(self, Command::Denoise | Command::Certify | Command::Flow)
    }
}

/// Everything a command needs, validated up front.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub phi: PhiSpec,
    /// Solver keys. Defaults for the steps depend on the grid, so the
    /// [`SolverConfig`] is built once the image is known.
    pub solver: KeyValues,
    pub noise_sigma: f64,
    pub seed: u64,
    pub metrics_path: Option<PathBuf>,
    /// Directory that relative parameter-map paths resolve against.
    pub base_dir: PathBuf,
    /// Remaining command-specific keys.
    pub extra: KeyValues,
}

fn config_err(message: impl Into<String>) -> Error {
    Error::Config {
        line: 0,
        message: message.into(),
    }
}

impl RunConfig {
    /// Merges `overrides` on top of `file` and validates the result.
    pub fn from_sources(
        command: Command,
        file: Option<(&Path, KeyValues)>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let (mut kv, base_dir) = match file {
            Some((path, kv)) => (kv, path.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (KeyValues::new(), PathBuf::new()),
        };
        for (k, v) in overrides {
            // A flag replaces either form of a parameter map given in the file.
            for family_key in ["p", "a", "w"] {
                if k == family_key {
                    kv = without(&kv, &format!("{family_key}_file"));
                } else if *k == format!("{family_key}_file") {
                    kv = without(&kv, family_key);
                }
            }
            kv.set(k, v);
        }
        Self::from_key_values(command, &kv, base_dir)
    }

    pub fn from_key_values(command: Command, kv: &KeyValues, base_dir: PathBuf) -> Result<Self> {
        let mut known: Vec<&str> = PHI_KEYS.to_vec();
        known.extend_from_slice(command.specific_keys());
        if command.uses_solver() {
            known.extend_from_slice(SOLVER_KEYS);
        } else {
            known.push("seed");
        }
        kv.check_known(&known)?;

        let path = |key: &str| kv.get(key).map(|v| resolve(&base_dir, v));
        let input_path = path("input");
        let output_path = path("output");
        let needs_input = matches!(command, Command::Denoise | Command::Certify | Command::Flow);
        if needs_input && input_path.is_none() {
            return Err(config_err(format!("'{}' requires 'input'", command.name())));
        }
        if matches!(command, Command::Denoise | Command::Flow) && output_path.is_none() {
            return Err(config_err(format!(
                "'{}' requires 'output'",
                command.name()
            )));
        }
        if command == Command::Certify && (kv.get("u").is_none() || kv.get("xi").is_none()) {
            return Err(config_err("'certify' requires 'u' and 'xi'"));
        }
        if command == Command::Flow && (kv.get("dt").is_none() || kv.get("steps").is_none()) {
            return Err(config_err("'flow' requires 'dt' and 'steps'"));
        }
        if matches!(command, Command::Denoise | Command::Certify) && kv.get("lambda").is_none() {
            return Err(config_err(format!(
                "'{}' requires 'lambda'",
                command.name()
            )));
        }
        if matches!(command, Command::CheckConditions | Command::ConjugateTable)
            && input_path.is_none()
            && (kv.get("height").is_none() || kv.get("width").is_none())
        {
            return Err(config_err(format!(
                "'{}' requires 'input' or both 'height' and 'width'",
                command.name()
            )));
        }

        let noise_sigma = kv.parsed::<f64>("noise_sigma")?.unwrap_or(0.0);
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(config_err(format!(
                "noise_sigma must be >= 0, got {noise_sigma}"
            )));
        }
        let seed = kv.parsed::<u64>("seed")?.unwrap_or(0);
        let phi = PhiSpec::from_key_values(kv)?;

        let mut solver = KeyValues::new();
        let mut extra = KeyValues::new();
        for key in kv.keys() {
            let value = kv.get(key).expect("listed key");
            if SOLVER_KEYS.contains(&key) {
                solver.set(key, value);
            } else if command.specific_keys().contains(&key)
                && !matches!(key, "input" | "output" | "noise_sigma" | "metrics")
            {
                extra.set(key, value);
            }
        }
        if command == Command::Flow {
            solver.set("lambda", kv.get("dt").expect("checked"));
        }
        // Surface malformed numbers before any file is touched.
        for key in ["lambda", "tau", "sigma", "theta", "gap_tol", "newton_tol"] {
            solver.parsed::<f64>(key)?;
        }
        for key in ["max_iters", "newton_max", "check_every"] {
            solver.parsed::<usize>(key)?;
        }
        for key in [
            "height",
            "width",
            "row",
            "col",
            "samples",
            "oracle_samples",
            "steps",
            "snapshot_every",
        ] {
            extra.parsed::<usize>(key)?;
        }
        for key in ["s_max", "t_max", "dt"] {
            extra.parsed::<f64>(key)?;
        }

        Ok(RunConfig {
            command,
            input_path,
            output_path,
            phi,
            solver,
            noise_sigma,
            seed,
            metrics_path: path("metrics"),
            base_dir,
            extra,
        })
    }

    /// Solver settings on `grid`.
    pub fn solver_config(&self, grid: Grid) -> Result<SolverConfig> {
        let mut kv = self.solver.clone();
        kv.set("seed", self.seed);
        solver_config_from(&kv, grid)
    }

    pub fn extra_path(&self, key: &str) -> Option<PathBuf> {
        self.extra.get(key).map(|v| resolve(&self.base_dir, v))
    }
}

fn without(kv: &KeyValues, key: &str) -> KeyValues {
    let mut out = KeyValues::new();
    for k in kv.keys().filter(|k| *k != key) {
        out.set(k, kv.get(k).expect("listed key"));
    }
    out
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}
