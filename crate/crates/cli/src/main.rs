use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pretlab_core::experiment::{self, ExperimentConfig, ExperimentError, Format};
use serde_json::{Map, Value};

/// Experiments on multiplicative rotations along generalized Pythagorean
/// triples.
#[derive(Debug, Parser)]
#[command(name = "pretlab", version)]
struct Cli {
    /// JSON config ({"command", "params", "seed", "output", "format"});
    /// its entries override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the full result here; stdout otherwise.
    #[arg(long, global = true)]
    output: Option<String>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

fn json_arg(s: &str) -> Result<Value, String> {
    serde_json::from_str(s).map_err(|e| format!("invalid JSON: {e}"))
}

#[derive(Debug, Args)]
struct Triple {
    a: Option<u64>,
    b: Option<u64>,
    c: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify (a, b, c) as a = c, b = c, a + b = c or not Rado.
    Rado(Triple),
    /// The three binary quadratic forms of a triple.
    Forms(Triple),
    /// Parametrized solution (x, y, z) at (k, m, n).
    Solve {
        #[command(flatten)]
        t: Triple,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        n: Option<u64>,
    },
    /// omega_P(p) for primes up to a limit, and sum omega_P(p)/p.
    Omega {
        /// Coefficients as JSON, e.g. [1,0,1].
        #[arg(long, value_parser = json_arg)]
        form: Option<Value>,
        #[arg(long)]
        limit: Option<u64>,
    },
    /// Pretentious distance D(f, chi n^{it}; from, to).
    Distance {
        /// Function descriptor as JSON.
        #[arg(long, value_parser = json_arg)]
        f: Option<Value>,
        /// Character as JSON {"modulus", "index"}.
        #[arg(long, value_parser = json_arg)]
        chi: Option<Value>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
    },
    /// Elements of a Folner family (exhaustive or sampled).
    Folner {
        /// Family as JSON, e.g. {"kind":"phi_r","r":3}.
        #[arg(long, value_parser = json_arg)]
        spec: Option<Value>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Q_{delta,L} with its circle certificate.
    Qdelta {
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        l: Option<u64>,
        #[arg(long)]
        cap: Option<u64>,
        #[arg(long)]
        bits: Option<u32>,
    },
    /// Construct grid witnesses, or verify stored ones with --verify.
    Witness {
        /// Case name, e.g. AC_P2Reducible.
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        a: Option<u64>,
        #[arg(long)]
        b: Option<u64>,
        #[arg(long)]
        c: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Levels as JSON {"s","r","k","l"}; smallest admissible otherwise.
        #[arg(long, value_parser = json_arg)]
        levels: Option<Value>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        verify: Option<String>,
    },
    /// Lattice count of S_delta in [N]^2.
    Sdelta {
        #[command(flatten)]
        t: Triple,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        alpha_sq: Option<u64>,
    },
    /// Monochromatic solution search for a coloring by functions.
    Mono {
        #[command(flatten)]
        t: Triple,
        /// JSON list of function descriptors.
        #[arg(long, value_parser = json_arg)]
        functions: Option<Value>,
        /// Arc half-width in turns.
        #[arg(long)]
        delta_i: Option<f64>,
        #[arg(long)]
        k_max: Option<u64>,
        #[arg(long)]
        m_max: Option<u64>,
        #[arg(long)]
        raw_bound: Option<u64>,
    },
    /// Recurrence search on a rotation system.
    Recur {
        #[command(flatten)]
        t: Triple,
        #[arg(long, value_parser = json_arg)]
        functions: Option<Value>,
        /// JSON list of arcs {"center","half_width"} in turns.
        #[arg(long, value_parser = json_arg)]
        arcs: Option<Value>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        k_max: Option<u64>,
        #[arg(long)]
        m_max: Option<u64>,
        #[arg(long, value_parser = json_arg)]
        grid: Option<Value>,
    },
    /// Linear concentration experiment.
    ConcLin {
        #[arg(long, value_parser = json_arg)]
        f: Option<Value>,
        #[arg(long, value_parser = json_arg)]
        chi: Option<Value>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        a: Option<u64>,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        truncation: Option<u64>,
    },
    /// Quadratic concentration experiment.
    ConcQuad {
        #[arg(long, value_parser = json_arg)]
        f: Option<Value>,
        #[arg(long, value_parser = json_arg)]
        chi: Option<Value>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
        #[arg(long, value_parser = json_arg)]
        form: Option<Value>,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        a: Option<u64>,
        #[arg(long)]
        b: Option<u64>,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        truncation: Option<u64>,
    },
    /// Finite-stage factor criterion statistic.
    FactorCrit {
        #[arg(long, value_parser = json_arg)]
        f: Option<Value>,
        /// JSON, e.g. {"kind":"archimedean"}.
        #[arg(long, value_parser = json_arg)]
        kind: Option<Value>,
        #[arg(long)]
        r: Option<u64>,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Chu inequality on random finite probability spaces.
    Chu {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        max_atoms: Option<usize>,
        #[arg(long)]
        max_partitions: Option<usize>,
    },
}

#[derive(Default)]
struct Params(Map<String, Value>);

impl Params {
    fn set<T: Into<Value>>(mut self, key: &str, v: Option<T>) -> Self {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.into());
        }
        self
    }

    fn triple(self, t: &Triple) -> Self {
        self.set("a", t.a).set("b", t.b).set("c", t.c)
    }
}

impl Command {
    fn name_and_params(&self) -> (&'static str, Params) {
        let p = Params::default();
        match self {
            Command::Rado(t) => ("rado", p.triple(t)),
            Command::Forms(t) => ("forms", p.triple(t)),
            Command::Solve { t, k, m, n } => ("solve", p.triple(t).set("k", *k).set("m", *m).set("n", *n)),
            Command::Omega { form, limit } => ("omega", p.set("form", form.clone()).set("limit", *limit)),
            Command::Distance { f, chi, t, from, to } => (
                "distance",
                p.set("f", f.clone())
                    .set("chi", chi.clone())
                    .set("t", *t)
                    .set("from", *from)
                    .set("to", *to),
            ),
            Command::Folner { spec, samples } => ("folner", p.set("spec", spec.clone()).set("samples", *samples)),
            Command::Qdelta { delta, l, cap, bits } => (
                "qdelta",
                p.set("delta", *delta).set("l", *l).set("cap", *cap).set("bits", *bits),
            ),
            Command::Witness {
                case,
                a,
                b,
                c,
                delta,
                levels,
                count,
                samples,
                verify,
            } => (
                "witness",
                p.set("case", case.clone())
                    .set("a", *a)
                    .set("b", *b)
                    .set("c", *c)
                    .set("delta", *delta)
                    .set("levels", levels.clone())
                    .set("count", *count)
                    .set("samples", *samples)
                    .set("verify", verify.clone()),
            ),
            Command::Sdelta { t, delta, n, alpha_sq } => (
                "sdelta",
                p.triple(t).set("delta", *delta).set("n", *n).set("alpha_sq", *alpha_sq),
            ),
            Command::Mono {
                t,
                functions,
                delta_i,
                k_max,
                m_max,
                raw_bound,
            } => (
                "mono",
                p.triple(t)
                    .set("functions", functions.clone())
                    .set("delta_i", *delta_i)
                    .set("k_max", *k_max)
                    .set("m_max", *m_max)
                    .set("raw_bound", *raw_bound),
            ),
            Command::Recur {
                t,
                functions,
                arcs,
                eps,
                k_max,
                m_max,
                grid,
            } => (
                "recur",
                p.triple(t)
                    .set("functions", functions.clone())
                    .set("arcs", arcs.clone())
                    .set("eps", *eps)
                    .set("k_max", *k_max)
                    .set("m_max", *m_max)
                    .set("grid", grid.clone()),
            ),
            Command::ConcLin {
                f,
                chi,
                t,
                q,
                a,
                k,
                n,
                truncation,
            } => (
                "conc-lin",
                p.set("f", f.clone())
                    .set("chi", chi.clone())
                    .set("t", *t)
                    .set("q", *q)
                    .set("a", *a)
                    .set("k", *k)
                    .set("n", *n)
                    .set("truncation", *truncation),
            ),
            Command::ConcQuad {
                f,
                chi,
                t,
                form,
                q,
                a,
                b,
                k,
                n,
                truncation,
            } => (
                "conc-quad",
                p.set("f", f.clone())
                    .set("chi", chi.clone())
                    .set("t", *t)
                    .set("form", form.clone())
                    .set("q", *q)
                    .set("a", *a)
                    .set("b", *b)
                    .set("k", *k)
                    .set("n", *n)
                    .set("truncation", *truncation),
            ),
            Command::FactorCrit { f, kind, r, k, n, samples } => (
                "factor-crit",
                p.set("f", f.clone())
                    .set("kind", kind.clone())
                    .set("r", *r)
                    .set("k", *k)
                    .set("n", *n)
                    .set("samples", *samples),
            ),
            Command::Chu {
                count,
                max_atoms,
                max_partitions,
            } => (
                "chu",
                p.set("count", *count)
                    .set("max_atoms", *max_atoms)
                    .set("max_partitions", *max_partitions),
            ),
        }
    }
}

fn usage(msg: String) -> ExperimentError {
    ExperimentError::InvalidConfig(msg)
}

/// Flags first, then the config file on top.
fn resolve(cli: &Cli) -> Result<(ExperimentConfig, bool), ExperimentError> {
    let (name, params) = cli.command.name_and_params();
    let mut config = ExperimentConfig::new(name, Value::Object(params.0));
    config.seed = cli.seed.unwrap_or(0);
    config.output = cli.output.clone();
    let mut explicit_format = cli.format.is_some();
    if let Some(OutFormat::Json) = cli.format {
        config.format = Format::Json;
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let Value::Object(file) = file else {
            return Err(usage("config must be a JSON object".into()));
        };
        for (key, v) in file {
            match key.as_str() {
                "command" => {
                    if v.as_str() != Some(name) {
                        return Err(usage(format!("config is for {v}, not {name:?}")));
                    }
                }
                "params" => {
                    let Value::Object(over) = v else {
                        return Err(usage("params must be a JSON object".into()));
                    };
                    let Value::Object(base) = &mut config.params else { unreachable!() };
                    base.extend(over);
                }
                "seed" => config.seed = v.as_u64().ok_or_else(|| usage("seed must be a u64".into()))?,
                "output" => config.output = v.as_str().map(String::from),
                "format" => {
                    config.format = serde_json::from_value(v).map_err(|e| usage(format!("format: {e}")))?;
                    explicit_format = true;
                }
                other => return Err(usage(format!("unknown config key {other:?}"))),
            }
        }
    }
    Ok((config, explicit_format))
}

fn execute(cli: &Cli) -> Result<(), ExperimentError> {
    experiment::configure_threads_from_env()?;
    let (config, explicit_format) = resolve(cli)?;
    let run = experiment::run(&config)?;
    match &run.config.output {
        Some(path) => {
            let bytes = experiment::render(&run)?;
            std::fs::write(path, bytes).map_err(|e| ExperimentError::Io(format!("{path}: {e}")))?;
            println!("{}", run.report.summary);
        }
        None if explicit_format => {
            let bytes = experiment::render(&run)?;
            print!("{}", String::from_utf8_lossy(&bytes));
        }
        None => println!("{}", run.report.summary),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
