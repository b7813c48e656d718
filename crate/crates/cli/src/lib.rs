//! Command-line front end for the circle transport experiments.

use std::fs;
use std::io::Write;

use circle_ot::dynamics::{invariant_density, ExpandingMapSpec, InvariantDensity};
use circle_ot::experiments::{
    atomless_scan, bilipschitz_check, cantor_report, convex_split_check, derivative_slope_check, lacunary_field,
    mdim_separated_sets, nearly_invariant_family, non_frechet_counterexample, random_ball_pairs, spectrum_report,
    wasserstein_report, Check, FamilyParams, Report, SlopeReport,
};
use circle_ot::operators::{Field, Parity};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub mod literal;

use literal::{parse_field, parse_list, parse_map, parse_measure, parse_range, FieldSpec};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "circle-ot", version, about = "Optimal transport experiments for expanding circle maps")]
#[command(subcommand_required = false, arg_required_else_help = true)]
pub struct Cli {
    /// Expanding map, e.g. `d=2,eps=0.3`.
    #[arg(long, global = true, default_value = "d=2,eps=0")]
    pub map: String,
    /// Quantile resolution for transport.
    #[arg(long, global = true, env = "CIRCLE_OT_N", default_value_t = 4096)]
    pub n: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Report destination; nothing is written without it.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Recompute the verdict of a stored JSON report.
    #[arg(long, value_name = "REPORT")]
    pub verify: Option<String>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// W_p between two measure literals.
    Wasserstein {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        nu: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Slope test of W(Φ#(ρλ + tv), ρλ + t𝓛v).
    DerivativeCheck {
        #[arg(long)]
        field: String,
        #[arg(long, default_value = "1e-1:1e-4")]
        t: String,
        /// Field sampling grid (defaults to N).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Slope test of the convex-combination split at ρλ.
    ConvexSplit {
        #[arg(long, required = true)]
        field: Vec<String>,
        /// Comma-separated weights (default: equal).
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value = "1e-1:1e-4")]
        t: String,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Sawtooth field with vanishing derivative but first-order push-forward.
    Counterexample {
        #[arg(long, default_value_t = 4)]
        k: usize,
    },
    /// Family ρλ + Σ a_i v_i built from fixed fields of 𝓛.
    NearlyInvariant {
        #[arg(long, default_value = "1e-1:1e-3")]
        a: String,
        #[arg(long, default_value_t = 1e-2)]
        eta: f64,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Number of fixed fields.
        #[arg(long, default_value_t = 2)]
        count: usize,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Separated sets for the metric mean dimension lower bound.
    Mdim {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        alpha: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Bowen horizon.
        #[arg(long, default_value_t = 2)]
        steps: usize,
    },
    /// Atom detection along μ + tv.
    Atoms {
        #[arg(long, default_value = "uniform")]
        mu: String,
        #[arg(long)]
        field: String,
        /// Explicit t values; otherwise `t_count` uniform t in (0, 1].
        #[arg(long)]
        t: Option<String>,
        #[arg(long, default_value_t = 200)]
        t_count: usize,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Cantor field construction and atom scan.
    Cantor {
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[arg(long, default_value_t = 200)]
        t_count: usize,
    },
    /// Fixed fields of 𝓛 and the R_g estimate.
    Spectrum {
        #[arg(long, default_value_t = 2)]
        count: usize,
    },
    /// Bi-Lipschitz constants of a ↦ μ + Σ a_i v_i.
    Bilipschitz {
        #[arg(long, default_value = "uniform")]
        mu: String,
        #[arg(long, required = true)]
        field: Vec<String>,
        #[arg(long, default_value_t = 1e-2)]
        eta: f64,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long)]
        grid: Option<usize>,
    },
}

fn density(map: &ExpandingMapSpec, n: usize) -> Result<InvariantDensity, String> {
    if map.is_model() {
        Ok(InvariantDensity::uniform(n))
    } else {
        invariant_density(map, n, 1e-12, 500).map_err(|e| e.to_string())
    }
}

fn fields(specs: &[String]) -> Result<Vec<FieldSpec>, String> {
    specs.iter().map(|s| parse_field(s)).collect()
}

fn report<T: serde::Serialize + Check>(name: &str, params: Value, body: circle_ot::Result<T>) -> Result<Report, String> {
    let body = body.map_err(|e| e.to_string())?;
    Report::new(name, params, &body).map_err(|e| e.to_string())
}

fn map_json(map: &ExpandingMapSpec) -> Value {
    json!({ "degree": map.degree(), "epsilon": map.epsilon() })
}

/// Runs one experiment; the report `params` hold the full configuration.
fn execute(cli: &Cli, cmd: &Command) -> Result<Report, String> {
    let map = parse_map(&cli.map)?;
    let n = cli.n;
    if n == 0 {
        return Err("resolution N must be positive".into());
    }
    let base = json!({ "map": map_json(&map), "n": n, "seed": cli.seed });
    let with = |extra: Value| {
        let mut p = base.clone();
        p.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        p
    };
    match cmd {
        Command::Wasserstein { mu, nu, p } => {
            let (m, v) = (parse_measure(mu)?, parse_measure(nu)?);
            report("wasserstein", with(json!({ "mu": mu, "nu": nu, "p": p })), wasserstein_report(&m, &v, *p, n))
        }
        Command::DerivativeCheck { field, t, grid } => {
            let ts = parse_range(t)?;
            let grid = grid.unwrap_or(n);
            let v = parse_field(field)?.tangent(grid);
            let rho = density(&map, n)?;
            let params = with(json!({ "field": field, "t": ts, "grid": grid }));
            report("derivative-check", params, derivative_slope_check(&map, &rho, &v, &ts, n))
        }
        Command::ConvexSplit { field, weights, t, grid } => {
            let ts = parse_range(t)?;
            let grid = grid.unwrap_or(n);
            let specs = fields(field)?;
            let w = match weights {
                Some(w) => parse_list(w)?,
                None => vec![1.0 / specs.len() as f64; specs.len()],
            };
            if w.len() != specs.len() {
                return Err(format!("{} weights for {} fields", w.len(), specs.len()));
            }
            let terms: Vec<_> = w.iter().zip(&specs).map(|(&a, s)| (a, s.tangent(grid))).collect();
            let rho = density(&map, n)?;
            let params = with(json!({ "fields": field, "weights": w, "t": ts, "grid": grid }));
            report("convex-split", params, convex_split_check(&rho, &terms, &ts, n))
        }
        Command::Counterexample { k } => {
            report("counterexample", with(json!({ "k": k })), non_frechet_counterexample(*k, n))
        }
        Command::NearlyInvariant { a, eta, steps, eps, count, grid } => {
            let a_list = parse_range(a)?;
            let rho = density(&map, n)?;
            let grid = grid.unwrap_or(if map.is_model() { 1 << 17 } else { 1 << 15 });
            let params = FamilyParams { eta: *eta, a_list: a_list.clone(), k_steps: *steps, eps: *eps, grid, n };
            let config = with(json!({ "a": a_list, "eta": eta, "steps": steps, "eps": eps, "count": count, "grid": grid }));
            let body = if map.is_model() {
                let d = map.degree();
                let lacunary: Vec<_> = (0..*count)
                    .map(|i| {
                        let parity = if i % 2 == 0 { Parity::Cos } else { Parity::Sin };
                        lacunary_field(d, 1 + i / 2, 1 << 14, parity).map_err(|e| e.to_string())
                    })
                    .collect::<Result<_, _>>()?;
                let refs: Vec<&dyn Field> = lacunary.iter().map(|f| f as &dyn Field).collect();
                nearly_invariant_family(&map, &rho, &refs, &params)
            } else {
                let (_, fam) = spectrum_report(&map, &rho, n, *count).map_err(|e| e.to_string())?;
                let refs: Vec<&dyn Field> = fam.fields.iter().map(|f| f as &dyn Field).collect();
                nearly_invariant_family(&map, &rho, &refs, &params)
            };
            report("nearly-invariant", config, body)
        }
        Command::Mdim { k, alpha, p, steps } => {
            let params = with(json!({ "k": k, "alpha": alpha, "p": p, "steps": steps }));
            report("mdim", params, mdim_separated_sets(map.degree(), *k, *alpha, *p, *steps, cli.seed))
        }
        Command::Atoms { mu, field, t, t_count, grid } => {
            let ts = match t {
                Some(t) => parse_range(t)?,
                None if *t_count > 0 => (1..=*t_count).map(|j| j as f64 / *t_count as f64).collect(),
                None => return Err("t-count must be positive".into()),
            };
            let grid = grid.unwrap_or(n);
            let m = parse_measure(mu)?;
            let v = parse_field(field)?.tangent(grid);
            let params = with(json!({ "mu": mu, "field": field, "t": ts, "grid": grid }));
            report("atoms", params, atomless_scan(&m, &v, &ts, n))
        }
        Command::Cantor { depth, t_count } => {
            report("cantor", with(json!({ "depth": depth, "t_count": t_count })), cantor_report(*depth, *t_count, n))
        }
        Command::Spectrum { count } => {
            let rho = density(&map, n)?;
            let body = spectrum_report(&map, &rho, n, *count).map(|r| r.0);
            report("spectrum", with(json!({ "count": count })), body)
        }
        Command::Bilipschitz { mu, field, eta, pairs, grid } => {
            let grid = grid.unwrap_or(n);
            let m = parse_measure(mu)?;
            let vs: Vec<_> = fields(field)?.iter().map(|s| s.tangent(grid)).collect();
            let ab = random_ball_pairs(vs.len(), *eta, *pairs, cli.seed);
            let params = with(json!({ "mu": mu, "fields": field, "eta": eta, "pairs": pairs, "grid": grid }));
            report("bilipschitz", params, bilipschitz_check(&m, &vs, *eta, &ab, n))
        }
    }
}

/// Short summary for the verdict line.
fn headline(r: &Report) -> String {
    let s = &r.samples;
    let num = |v: &Value| v.as_f64().map(|x| format!("{x}")).unwrap_or_else(|| "n/a".into());
    match r.name.as_str() {
        "wasserstein" => format!("W_{} = {}", num(&s["p"]), num(&s["cost"])),
        "derivative-check" => {
            let at_floor = serde_json::from_value::<SlopeReport>(s["main"].clone()).is_ok_and(|m| m.is_within_floor());
            let main = if at_floor {
                "main series at discretization floor".to_string()
            } else {
                format!("slope {}", num(&s["main"]["fitted_slope"]))
            };
            format!("{main}, control slope {}", num(&s["control"]["fitted_slope"]))
        }
        "convex-split" => format!("slope {}", num(&s["fitted_slope"])),
        "counterexample" => format!("W = {}, bound {}", num(&s["distance"]), num(&s["lower_bound"])),
        "nearly-invariant" => format!("ratio decrease {}", num(&s["decrease_factor"])),
        "mdim" => format!("{} separated measures, eps {}", s["set_size"], num(&s["eps"])),
        "atoms" => format!("atom fraction {}", num(&s["fraction"])),
        "cantor" => format!("atom fraction {}", num(&s["scan"]["fraction"])),
        "spectrum" => format!("{} fields, R_g {}", s["fields"].as_array().map_or(0, Vec::len), num(&s["rg"])),
        "bilipschitz" => format!("ratios in [{}, {}]", num(&s["lower"]), num(&s["upper"])),
        _ => String::new(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        other => out.push_str(&format!("{prefix},{other}\n")),
    }
}

/// `series,t,distance` for slope reports, `key,value` rows otherwise.
pub fn to_csv(r: &Report) -> String {
    r.to_csv().unwrap_or_else(|_| {
        let mut out = String::from("key,value\n");
        flatten("", &r.samples, &mut out);
        out
    })
}

fn emit(cli: &Cli, r: &Report) -> Result<(), String> {
    let Some(path) = &cli.out else { return Ok(()) };
    let text = match cli.format {
        Format::Json => r.to_json().map_err(|e| e.to_string())? + "\n",
        Format::Csv => to_csv(r),
    };
    fs::write(path, text).map_err(|e| format!("{path}: {e}"))
}

fn verify(path: &str, out: &mut dyn Write) -> i32 {
    let checked = fs::read_to_string(path)
        .map_err(|e| format!("{path}: {e}"))
        .and_then(|s| Report::from_json(&s).map_err(|e| e.to_string()))
        .and_then(|r| r.recompute().map(|v| (r, v)).map_err(|e| e.to_string()));
    match checked {
        Ok((r, v)) if v == r.verdict => {
            let _ = writeln!(out, "{}: stored verdict {} reproduced", r.name, v);
            EXIT_PASS
        }
        Ok((r, v)) => {
            let _ = writeln!(out, "{}: stored verdict {} but recomputed {}", r.name, r.verdict, v);
            EXIT_FAIL
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Parses `argv`, runs the experiment and prints one verdict line to `out`.
pub fn run<I, S>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(out, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
        }
    };
    if let Some(path) = &cli.verify {
        return verify(path, out);
    }
    let Some(cmd) = &cli.command else {
        let _ = writeln!(out, "error: no subcommand given (see --help)");
        return EXIT_USAGE;
    };
    let result = execute(&cli, cmd).and_then(|r| emit(&cli, &r).map(|_| r));
    match result {
        Ok(r) => {
            let _ = writeln!(out, "{}: {} ({})", r.name, r.verdict, headline(&r));
            if r.verdict.is_pass() {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            EXIT_USAGE
        }
    }
}
