//! Command-line definitions and dispatch.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use miattack_core::bsc::{bsc_grid_oracle, kkt_report, solve_bsc, BscJoint, BscSolverConfig};
use miattack_core::info::svd;
use miattack_core::matrix_csv::parse_matrix;
use miattack_core::nats_to_bits;
use miattack_core::projection::{falling_bar, validate_attack, ProjectionProblem};
use miattack_core::scalar::{solve, ScalarProblem, ScalarSolverConfig};
use miattack_core::subset::{choose_subset, SubsetProblem};
use serde_json::{json, Map, Value};

use crate::config::{parse_list, Preset, SweepConfig};
use crate::error::{CliError, Result};
use crate::format::sig12;
use crate::plot::emit_plot_script;
use crate::sweep::run_sweep;

#[derive(Debug, Parser)]
#[command(name = "miattack", version, about = "Minimum mutual-information attacks on Gaussian and binary sources")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct OutputOpts {
    /// Print a JSON object instead of `key = value` lines.
    #[arg(long, global = true)]
    pub json: bool,
    /// Report information in bits instead of nats.
    #[arg(long, global = true)]
    pub bits: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scalar Gaussian source observed through additive Gaussian noise.
    #[command(allow_negative_numbers = true)]
    Scalar {
        #[arg(long)]
        a2: f64,
        #[arg(long)]
        sigma2: f64,
        #[arg(long = "d")]
        d: f64,
        /// Seeding mesh resolution of the solver.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Budget allocation for a linear projection of an i.i.d. Gaussian source.
    #[command(allow_negative_numbers = true)]
    Waterfill {
        /// Headerless row-major CSV holding H.
        #[arg(long, conflicts_with = "svals", required_unless_present = "svals")]
        matrix: Option<PathBuf>,
        /// Singular values of H, comma-separated.
        #[arg(long)]
        svals: Option<String>,
        #[arg(long = "d")]
        d: f64,
        /// Variance of each source coordinate.
        #[arg(long, default_value_t = 1.0)]
        source_variance: f64,
        /// Monte Carlo validation draws (needs --matrix).
        #[arg(long, requires = "matrix")]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Binary source with cell-dependent bit flips.
    #[command(allow_negative_numbers = true)]
    Bsc {
        /// Joint of (U, X) as a,b,c,d.
        #[arg(long)]
        joint: String,
        #[arg(long)]
        eps: f64,
        /// Also run the exhaustive mesh search at this resolution.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Overwrite k coordinates of a diagonal Gaussian source.
    Subset {
        /// Coordinate variances, comma-separated.
        #[arg(long)]
        vars: String,
        #[arg(short = 'k')]
        k: usize,
        #[command(flatten)]
        out: OutputOpts,
    },
    /// Run a parameter sweep and write CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// fig3, fig3-caption, fig3-text, fig4, fig4-caption, fig4-text, fig5,
    /// fig5-caption, fig5-text or fig6.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set alpha=0.1,0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Replace the seed list with a single seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seeding mesh resolution for scalar sweeps.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// CSV destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add a runtime_ms column (output is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Add an mi_bits column.
    #[arg(long)]
    pub bits: bool,
    /// Write a matplotlib script for the CSV here (needs --out).
    #[arg(long)]
    pub plot_script: Option<PathBuf>,
    /// Write the effective configuration here.
    #[arg(long)]
    pub save_config: Option<PathBuf>,
}

/// An ordered flat record.
struct Record {
    fields: Map<String, Value>,
    bits: bool,
}

impl Record {
    fn new(bits: bool) -> Self {
        Self { fields: Map::new(), bits }
    }

    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.fields.insert(key.to_string(), v.into());
    }

    /// Information field, converted and suffixed with its unit.
    fn info(&mut self, base: &str, nats: f64) {
        if self.bits {
            self.put(&format!("{base}_bits"), number(nats_to_bits(nats)));
        } else {
            self.put(&format!("{base}_nats"), number(nats));
        }
    }

    fn render(&self, json: bool) -> String {
        if json {
            let mut s = serde_json::to_string_pretty(&self.fields).expect("serializable record");
            s.push('\n');
            return s;
        }
        self.fields.iter().map(|(k, v)| format!("{k} = {}\n", text(v))).collect()
    }
}

/// JSON has no infinities; those become strings.
fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(sig12(x))
    }
}

fn numbers(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| number(*x)).collect())
}

fn text(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(sig12).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(text).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

fn write_out(out: &mut dyn Write, s: &str) -> Result<()> {
    out.write_all(s.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

/// Executes one parsed command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Scalar { a2, sigma2, d, grid, out: o } => {
            if grid < 2 {
                return Err(CliError::Config("grid must be at least 2".into()));
            }
            let p = ScalarProblem::new(a2, sigma2, d)?;
            let s = solve(&p, &ScalarSolverConfig { grid_resolution: grid, ..Default::default() })?;
            let mut r = Record::new(o.bits);
            r.put("a2", s.a2);
            r.put("sigma2", s.sigma2);
            r.put("D", s.d);
            r.put("x", s.x);
            r.put("y", s.y);
            r.put("ratio", s.ratio);
            r.info("mi", s.mi_nats);
            r.put("F", numbers(&s.f));
            write_out(out, &r.render(o.json))
        }
        Command::Waterfill { matrix, svals, d, source_variance, samples, seed, out: o } => {
            waterfill(matrix.as_deref(), svals.as_deref(), d, source_variance, samples, seed, o, out)
        }
        Command::Bsc { joint, eps, grid, out: o } => {
            let w: Vec<f64> = parse_list("joint", &joint)?;
            let [a, b, c, dd] = <[f64; 4]>::try_from(w)
                .map_err(|_| CliError::Config("--joint needs four comma-separated values".into()))?;
            let joint = BscJoint::new(a, b, c, dd)?;
            let s = solve_bsc(&joint, eps, &BscSolverConfig::default())?;
            let mut r = Record::new(o.bits);
            for (k, v) in ["a", "b", "c", "d"].iter().zip(joint.weights()) {
                r.put(k, v);
            }
            r.put("eps", eps);
            for (k, v) in ["p1", "p2", "p3", "p4"].iter().zip(s.flips.to_array()) {
                r.put(k, v);
            }
            r.put("cost", s.cost);
            r.info("mi", s.mi_nats);
            match kkt_report(&joint, eps, &s.flips, 1e-6) {
                Ok(k) => {
                    r.put("lambda_star", k.lambda_star);
                    r.put("stationarity_residuals", numbers(&k.stationarity_residuals));
                    let states: Vec<Value> =
                        k.coordinates.iter().map(|c| json!(format!("{c:?}").to_lowercase())).collect();
                    r.put("coordinates", states);
                    r.put("primal_feasible", k.primal_feasible);
                    r.put("complementary_slackness_residual", k.complementary_slackness_residual);
                    r.put("ratio_equality_residual", k.ratio_equality_residual.map_or(json!("not applicable"), number));
                }
                Err(e) => r.put("kkt", e.to_string()),
            }
            if let Some(res) = grid {
                let g = bsc_grid_oracle(&joint, eps, res)?;
                r.info("oracle_mi", g.mi_nats);
            }
            write_out(out, &r.render(o.json))
        }
        Command::Subset { vars, k, out: o } => {
            let p = SubsetProblem::new(parse_list("vars", &vars)?, k)?;
            let s = choose_subset(&p);
            let mut r = Record::new(o.bits);
            r.put("attacked", s.attacked.clone());
            r.info("residual_mi", s.residual_mi_nats);
            write_out(out, &r.render(o.json))
        }
        Command::Sweep(args) => sweep(args, out),
    }
}

#[allow(clippy::too_many_arguments)]
fn waterfill(
    matrix: Option<&Path>,
    svals: Option<&str>,
    d: f64,
    source_variance: f64,
    samples: Option<usize>,
    seed: u64,
    o: OutputOpts,
    out: &mut dyn Write,
) -> Result<()> {
    let h = match matrix {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            Some(parse_matrix(&text)?)
        }
        None => None,
    };
    let singular: Vec<f64> = match (&h, svals) {
        (Some(h), _) => svd(h)?.singular_values,
        (None, Some(s)) => parse_list("svals", s)?,
        (None, None) => return Err(CliError::Config("need --matrix or --svals".into())),
    };
    if singular.is_empty() || singular.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(CliError::Config("singular values must be positive".into()));
    }
    if !(source_variance.is_finite() && source_variance > 0.0) || !(d.is_finite() && d >= 0.0) {
        return Err(CliError::Config("need D >= 0 and a positive source variance".into()));
    }
    let mut sigma_sq: Vec<f64> = singular.iter().map(|s| s * s * source_variance).collect();
    sigma_sq.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sigma_sq.iter().sum();
    let mut r = Record::new(o.bits);
    r.put("D", d);
    r.put("sum_sigma_sq", total);
    r.put("sigma_sq", numbers(&sigma_sq));
    if d >= total {
        r.put("branch", "saturated");
        r.put("budgets", numbers(&sigma_sq));
        r.info("mi", 0.0);
    } else {
        let a = falling_bar(&sigma_sq, d)?;
        r.put("branch", "water-filling");
        r.put("tau", number(a.tau));
        r.put("budgets", numbers(&a.budgets));
        r.info("mi", a.mutual_information());
    }
    if let (Some(h), Some(n)) = (h, samples) {
        let v = validate_attack(&ProjectionProblem::with_source_variance(h, d, source_variance)?, n, seed)?;
        r.info("analytic_mi", v.analytic_mi);
        match v.empirical_mi {
            Some(e) => r.info("empirical_mi", e),
            None => r.put("empirical_mi", "degenerate"),
        }
        r.put("empirical_distortion", v.empirical_distortion);
        r.put("seed", seed);
    }
    write_out(out, &r.render(o.json))
}

fn sweep(args: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(p), _) => match p.parse::<Preset>()? {
            Preset::Custom => return Err(CliError::Config("custom sweeps need --config".into())),
            p => SweepConfig::preset(p)?,
        },
        (None, Some(path)) => SweepConfig::load(path)?,
        (None, None) => return Err(CliError::Config("need --preset or --config".into())),
    };
    for kv in &args.overrides {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(grid) = args.grid {
        cfg.grid = grid;
    }
    if let Some(path) = args.out {
        cfg.out = Some(path);
    }
    cfg.timing |= args.timing;
    cfg.validate()?;
    if args.plot_script.is_some() && cfg.out.is_none() {
        return Err(CliError::Config("--plot-script needs --out".into()));
    }
    if let Some(path) = &args.save_config {
        fs::write(path, cfg.to_kv()).map_err(|e| CliError::io(path, e))?;
    }
    let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let table = run_sweep(&cfg, jobs)?;
    let csv = table.to_csv_string(args.bits);
    match &cfg.out {
        Some(path) => fs::write(path, &csv).map_err(|e| CliError::io(path, e))?,
        None => write_out(out, &csv)?,
    }
    if let (Some(script), Some(csv_path)) = (&args.plot_script, &cfg.out) {
        let text = emit_plot_script(csv_path, cfg.kind)?;
        fs::write(script, text).map_err(|e| CliError::io(script, e))?;
    }
    Ok(())
}
