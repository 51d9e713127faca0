use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use rofphi_cli::{error_json, exit_code_for, run, Command, RunConfig, EXIT_USAGE};
use rofphi_core::io::KeyValues;

/// Variable-growth total variation denoising with optimality certificates.
///
/// Every option can also be given in a `key = value` config file (`--config`);
/// the key is the option name with dashes replaced by underscores. Options on
/// the command line override the file.
///
/// Exit status: 0 success, 2 certificate failed, 64 usage or config error,
/// 65 unreadable or inconsistent data.
#[derive(Parser, Debug)]
#[command(name = "rofphi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Denoise an image and certify the result
    Denoise {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Input image (PGM, or `.grid` float format)
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        output: Option<PathBuf>,
        /// Standard deviation of Gaussian noise added to the input
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Metrics CSV path (default `<output>/metrics.csv`)
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Check a candidate pair (u, xi) against the optimality conditions
    Certify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Datum f
        #[arg(long)]
        input: Option<PathBuf>,
        /// Candidate minimiser
        #[arg(long)]
        u: Option<PathBuf>,
        /// Dual field prefix; reads `<xi>_x.grid` and `<xi>_y.grid`
        #[arg(long)]
        xi: Option<PathBuf>,
        /// Also write the report here
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the implicit Euler gradient flow
    Flow {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Trajectory CSV path (default `<output>/flow.csv`)
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Time step
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Write every k-th state
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Evaluate the structural conditions on the integrand
    CheckConditions {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        shape: ShapeArgs,
        /// Also write the JSON here
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Tabulate the conjugate at one pixel next to a brute-force evaluation
    ConjugateTable {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long)]
        row: Option<usize>,
        #[arg(long)]
        col: Option<usize>,
        /// Largest s in the table
        #[arg(long)]
        s_max: Option<f64>,
        /// Number of rows
        #[arg(long)]
        samples: Option<usize>,
        /// Upper end of the brute-force t grid
        #[arg(long)]
        t_max: Option<f64>,
        /// Points in the brute-force t grid
        #[arg(long)]
        oracle_samples: Option<usize>,
        /// Also write the CSV here
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Config file with `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Integrand: classical_tv, variable_exponent, double_phase, power_weighted
    #[arg(long)]
    phi: Option<String>,
    /// Constant exponent
    #[arg(long)]
    p: Option<f64>,
    /// Exponent map (float grid file)
    #[arg(long)]
    p_file: Option<PathBuf>,
    /// Constant double phase weight
    #[arg(long)]
    a: Option<f64>,
    /// Double phase weight map
    #[arg(long)]
    a_file: Option<PathBuf>,
    /// Double phase exponent
    #[arg(long)]
    q: Option<f64>,
    /// Constant linear weight
    #[arg(long)]
    w: Option<f64>,
    /// Linear weight map
    #[arg(long)]
    w_file: Option<PathBuf>,
    /// Seed for noise and the solver
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` entries, applied last
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative duality gap at which to stop
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    newton_max: Option<usize>,
    /// Iterations between gap evaluations
    #[arg(long)]
    check_every: Option<usize>,
}

#[derive(Args, Debug)]
struct ShapeArgs {
    /// Image whose grid is used
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
}

#[derive(Default)]
struct Pairs(Vec<(String, String)>);

impl Pairs {
    fn add<T: Display>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.0.push((key.to_string(), v.to_string()));
        }
    }

    fn path(&mut self, key: &str, value: &Option<PathBuf>) {
        self.add(key, &value.as_ref().map(|p| p.display()));
    }
}

impl Common {
    fn collect(&self, out: &mut Pairs) {
        out.add("phi", &self.phi);
        out.add("p", &self.p);
        out.path("p_file", &self.p_file);
        out.add("a", &self.a);
        out.path("a_file", &self.a_file);
        out.add("q", &self.q);
        out.add("w", &self.w);
        out.path("w_file", &self.w_file);
        out.add("seed", &self.seed);
    }
}

impl SolverArgs {
    fn collect(&self, out: &mut Pairs) {
        out.add("lambda", &self.lambda);
        out.add("tau", &self.tau);
        out.add("sigma", &self.sigma);
        out.add("theta", &self.theta);
        out.add("max_iters", &self.max_iters);
        out.add("gap_tol", &self.gap_tol);
        out.add("newton_tol", &self.newton_tol);
        out.add("newton_max", &self.newton_max);
        out.add("check_every", &self.check_every);
    }
}

impl ShapeArgs {
    fn collect(&self, out: &mut Pairs) {
        out.path("input", &self.input);
        out.add("height", &self.height);
        out.add("width", &self.width);
    }
}

fn to_run_config(cmd: Cmd) -> rofphi_core::Result<RunConfig> {
    let mut pairs = Pairs::default();
    let (command, common) = match cmd {
        Cmd::Denoise {
            common,
            solver,
            input,
            output,
            noise_sigma,
            metrics,
        } => {
            solver.collect(&mut pairs);
            pairs.path("input", &input);
            pairs.path("output", &output);
            pairs.add("noise_sigma", &noise_sigma);
            pairs.path("metrics", &metrics);
            (Command::Denoise, common)
        }
        Cmd::Certify {
            common,
            solver,
            input,
            u,
            xi,
            output,
        } => {
            solver.collect(&mut pairs);
            pairs.path("input", &input);
            pairs.path("u", &u);
            pairs.path("xi", &xi);
            pairs.path("output", &output);
            (Command::Certify, common)
        }
        Cmd::Flow {
            common,
            solver,
            input,
            output,
            noise_sigma,
            metrics,
            dt,
            steps,
            snapshot_every,
        } => {
            solver.collect(&mut pairs);
            pairs.path("input", &input);
            pairs.path("output", &output);
            pairs.add("noise_sigma", &noise_sigma);
            pairs.path("metrics", &metrics);
            pairs.add("dt", &dt);
            pairs.add("steps", &steps);
            pairs.add("snapshot_every", &snapshot_every);
            (Command::Flow, common)
        }
        Cmd::CheckConditions {
            common,
            shape,
            output,
        } => {
            shape.collect(&mut pairs);
            pairs.path("output", &output);
            (Command::CheckConditions, common)
        }
        Cmd::ConjugateTable {
            common,
            shape,
            row,
            col,
            s_max,
            samples,
            t_max,
            oracle_samples,
            output,
        } => {
            shape.collect(&mut pairs);
            pairs.add("row", &row);
            pairs.add("col", &col);
            pairs.add("s_max", &s_max);
            pairs.add("samples", &samples);
            pairs.add("t_max", &t_max);
            pairs.add("oracle_samples", &oracle_samples);
            pairs.path("output", &output);
            (Command::ConjugateTable, common)
        }
    };
    common.collect(&mut pairs);
    for item in &common.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| rofphi_core::Error::Config {
                line: 0,
                message: format!("--set expects KEY=VALUE, got '{item}'"),
            })?;
        pairs.0.push((k.trim().to_string(), v.trim().to_string()));
    }
    let file = match &common.config {
        Some(path) => Some((path.as_path(), KeyValues::load(path)?)),
        None => None,
    };
    RunConfig::from_sources(command, file, &pairs.0)
}

fn fail(err: &rofphi_core::Error) -> ExitCode {
    eprintln!("{}", error_json(err));
    ExitCode::from(exit_code_for(err))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    let body = serde_json::json!({
                        "error": { "kind": "usage", "message": e.kind().to_string(), "exit_code": EXIT_USAGE }
                    });
                    eprintln!("{body}");
                    ExitCode::from(EXIT_USAGE)
                }
            };
        }
    };
    let cfg = match to_run_config(cli.command) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    match run(&cfg) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", outcome.stdout.trim_end());
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => fail(&e),
    }
}
