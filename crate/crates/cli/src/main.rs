mod emit;

use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use emit::{json_line, json_value, num, Csv, Format};
use lv3_core::analysis::faces::{
    face_flow_terminal, heteroclinic_match, heteroclinic_match_xz, Face,
};
use lv3_core::analysis::limit::{alpha_limit, omega_limit, LimitConfig, LimitKind};
use lv3_core::analysis::periodic::{period_profile, ray_points, PeriodicConfig};
use lv3_core::analysis::portrait::{portrait, PortraitConfig};
use lv3_core::analysis::sampling::DEFAULT_SEED;
use lv3_core::analysis::scan::{bifurcation_scan, Axis, ScanSpec, Slice};
use lv3_core::analysis::verify::{verify_theorem_a, verify_theorem_b, Verdict, VerifyConfig};
use lv3_core::darboux::{
    builtin_surfaces, certified_integrals, log_integral_value, solve_darboux, verify_invariance,
};
use lv3_core::darboux::{certify, FirstIntegralSpec, IntegralName};
use lv3_core::equilibria::{
    edge_spectrum_py, edge_spectrum_xz, interior_segment_r, interior_spectrum, singular_sets,
    SimplexPoint, State3,
};
use lv3_core::flow::{integrate, IntegrateOptions, Tolerances};
use lv3_core::{classify, Error, ParamVector};

const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Parser, Debug)]
#[command(
    name = "lv3",
    version,
    about = "Global dynamics of a 4-parameter Lotka-Volterra family on the simplex"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct KArg {
    /// Parameters k1,k2,k3,k4
    #[arg(long, value_parser = parse_k, allow_hyphen_values = true)]
    k: ParamVector,
}

#[derive(Args, Debug, Clone)]
struct Numerics {
    #[arg(long)]
    tol_rel: Option<f64>,
    #[arg(long)]
    tol_abs: Option<f64>,
    /// Integration horizon for limit-set runs
    #[arg(long)]
    horizon: Option<f64>,
}

impl Numerics {
    fn tol(&self) -> Result<Tolerances, CliError> {
        let d = Tolerances::default();
        Ok(Tolerances::new(
            self.tol_rel.unwrap_or(d.rel),
            self.tol_abs.unwrap_or(d.abs),
        )?)
    }

    fn limit(&self) -> Result<LimitConfig, CliError> {
        let mut cfg = LimitConfig {
            tol: self.tol()?,
            ..Default::default()
        };
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::Usage(format!(
                    "horizon must be positive, got {h}"
                )));
            }
            cfg.horizon = h;
            cfg.periodic.horizon_cap = h;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regime label and discriminant
    Classify {
        #[command(flatten)]
        k: KArg,
        #[arg(long)]
        format: Option<Format>,
    },
    /// Singular sets in the simplex, optionally with sampled spectra
    Equilibria {
        #[command(flatten)]
        k: KArg,
        #[arg(long)]
        spectrum: bool,
        /// Spectrum samples per set
        #[arg(long, default_value_t = 3)]
        samples: usize,
    },
    /// Cofactors, invariance residuals, integrating-factor kernel and certified integrals
    Darboux {
        #[command(flatten)]
        k: KArg,
    },
    /// Integrate one orbit
    Integrate {
        #[command(flatten)]
        k: KArg,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        p0: State3,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        backward: bool,
        /// Integrals to log, e.g. H,V
        #[arg(long, value_delimiter = ',')]
        monitor: Vec<String>,
        /// Resample on a uniform grid instead of the accepted steps
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        num: Numerics,
    },
    /// Omega- (or alpha-) limit set of one orbit
    LimitSet {
        #[command(flatten)]
        k: KArg,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        p0: State3,
        #[arg(long)]
        alpha: bool,
        #[command(flatten)]
        num: Numerics,
    },
    /// Periodic orbits and conserved integrals on S, boundary limit sets elsewhere
    VerifyA(VerifyArgs),
    /// Limit points on s_py and s_xz off S
    VerifyB(VerifyArgs),
    /// Leaf matching through an edge point
    Match {
        #[command(flatten)]
        k: KArg,
        #[arg(long)]
        x0: f64,
        #[arg(long, value_enum, default_value = "py")]
        edge: Edge,
    },
    /// Periods along a ray of starting points
    PeriodProfile {
        #[command(flatten)]
        k: KArg,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        base: State3,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        direction: State3,
        #[arg(long, default_value_t = 0.01)]
        start: f64,
        #[arg(long, default_value_t = 0.03)]
        step: f64,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Regimes and limit-set probes over a parameter slice such as 2,t,2,t
    Scan {
        #[arg(long, allow_hyphen_values = true)]
        slice: String,
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: (f64, f64),
        #[arg(long)]
        steps: usize,
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        s_range: Option<(f64, f64)>,
        #[arg(long)]
        s_steps: Option<usize>,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        p0: Option<State3>,
        #[command(flatten)]
        num: Numerics,
    },
    /// CSV bundle of sampled trajectories
    Portrait {
        #[command(flatten)]
        k: KArg,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 50.0)]
        t: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long)]
        backward: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        num: Numerics,
    },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    k: KArg,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Omit per-sample records
    #[arg(long)]
    summary: bool,
    #[command(flatten)]
    num: Numerics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Edge {
    Py,
    Xz,
}

fn parse_list(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!(
            "expected {n} comma-separated numbers, got {}",
            v.len()
        ));
    }
    Ok(v)
}

fn parse_k(s: &str) -> Result<ParamVector, String> {
    ParamVector::from_slice(&parse_list(s, 4)?).map_err(|e| e.to_string())
}

fn parse_point(s: &str) -> Result<State3, String> {
    let v = parse_list(s, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let v = parse_list(s, 2)?;
    Ok((v[0], v[1]))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(io::Error),
    Core(Error),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::ZeroParameter | Error::OutsideSimplex { .. } => {
                CliError::Usage(e.to_string())
            }
            e => CliError::Core(e),
        }
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn kind_code(kind: LimitKind) -> u8 {
    if kind.is_conclusive() {
        0
    } else {
        EXIT_INCONCLUSIVE
    }
}

fn monitors(k: &ParamVector, names: &[String]) -> Result<Vec<FirstIntegralSpec>, CliError> {
    names
        .iter()
        .map(|n| {
            IntegralName::parse(n.trim())
                .and_then(|name| FirstIntegralSpec::named(name, k))
                .ok_or_else(|| {
                    CliError::Usage(format!("unknown integral {n:?} (expected H, V, H~ or V~)"))
                })
        })
        .collect()
}

fn run<W: Write>(cli: Cli, out: &mut W) -> Result<u8, CliError> {
    match cli.command {
        Command::Classify {
            k: KArg { k },
            format,
        } => {
            let regime = classify(&k)?;
            match format {
                Some(Format::Json) => json_value(
                    out,
                    &json!({"k": k, "regime": regime.label(), "discriminant": k.discriminant(), "flags": regime}),
                )?,
                Some(Format::Csv) => {
                    let mut csv = Csv::new(out, &["regime", "discriminant"])?;
                    csv.row(&[regime.label(), num(k.discriminant())])?;
                }
                None => writeln!(out, "{}  discriminant {}", regime.label(), k.discriminant())?,
            }
            Ok(0)
        }
        Command::Equilibria {
            k: KArg { k },
            spectrum,
            samples,
        } => {
            for set in singular_sets(&k)? {
                json_line(out, &set)?;
            }
            if spectrum {
                let at = |i: usize| (i + 1) as f64 / (samples + 1) as f64;
                if interior_segment_r(&k)?.is_some() {
                    let z_max = k.k4 / (k.k3 + k.k4);
                    for i in 0..samples {
                        let rep = interior_spectrum(&k, z_max * at(i))?;
                        json_value(out, &json!({"set": "R", "spectrum": rep}))?;
                    }
                }
                for i in 0..samples {
                    json_value(
                        out,
                        &json!({"set": "R_py", "spectrum": edge_spectrum_py(&k, at(i))?}),
                    )?;
                }
                for i in 0..samples {
                    json_value(
                        out,
                        &json!({"set": "R_xz", "spectrum": edge_spectrum_xz(&k, at(i))?}),
                    )?;
                }
            }
            Ok(0)
        }
        Command::Darboux { k: KArg { k } } => {
            let surfaces: Vec<_> = builtin_surfaces(&k)
                .iter()
                .map(|s| {
                    let check = verify_invariance(s, &k);
                    json!({
                        "name": s.name,
                        "f": s.f.to_string(),
                        "cofactor": s.cofactor.to_string(),
                        "invariant": check.invariant,
                        "max_residual": check.max_residual,
                    })
                })
                .collect();
            let sol = solve_darboux(&k);
            let certs: Vec<_> = FirstIntegralSpec::all_named(&k)
                .iter()
                .map(|s| certify(s, &k))
                .collect();
            json_value(
                out,
                &json!({
                    "k": k,
                    "surfaces": surfaces,
                    "matrix": sol.matrix,
                    "rank": sol.rank,
                    "kernel": sol.kernel,
                    "subsystem_determinants": sol.subsystem_determinants,
                    "discriminant": sol.discriminant,
                    "certification": certs,
                }),
            )?;
            Ok(0)
        }
        Command::Integrate {
            k: KArg { k },
            p0,
            t,
            backward,
            monitor,
            dt,
            format,
            num: numerics,
        } => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Usage(format!("--t must be positive, got {t}")));
            }
            let specs = monitors(&k, &monitor)?;
            let opts = IntegrateOptions {
                monitor: specs.clone(),
                keep_dense: dt.is_some(),
                ..IntegrateOptions::with_tol(numerics.tol()?)
            };
            let t_end = if backward { -t } else { t };
            let traj = integrate(&k, &SimplexPoint::from_array(p0)?, t_end, &opts)?;
            let rows = match dt {
                Some(dt) if dt > 0.0 => traj.resample(dt),
                Some(dt) => {
                    return Err(CliError::Usage(format!("--dt must be positive, got {dt}")))
                }
                None => traj.samples.clone(),
            };
            let cols: Vec<String> = specs
                .iter()
                .map(|s| format!("log{}", s.name.as_str()))
                .collect();
            match format {
                Format::Csv => {
                    let mut header = vec!["t", "x", "y", "z"];
                    header.extend(cols.iter().map(String::as_str));
                    let mut csv = Csv::new(out, &header)?;
                    for (t, p) in &rows {
                        let mut f = vec![num(*t), num(p[0]), num(p[1]), num(p[2])];
                        for s in &specs {
                            f.push(num(log_integral_value(s, p)?));
                        }
                        csv.row(&f)?;
                    }
                }
                Format::Json => {
                    for (t, p) in &rows {
                        let mut rec = serde_json::Map::new();
                        rec.insert("t".into(), json!(t));
                        rec.insert("x".into(), json!(p[0]));
                        rec.insert("y".into(), json!(p[1]));
                        rec.insert("z".into(), json!(p[2]));
                        for (s, c) in specs.iter().zip(&cols) {
                            rec.insert(c.clone(), json!(log_integral_value(s, p)?));
                        }
                        json_value(out, &rec.into())?;
                    }
                }
            }
            Ok(if traj.completed { 0 } else { EXIT_INCONCLUSIVE })
        }
        Command::LimitSet {
            k: KArg { k },
            p0,
            alpha,
            num: numerics,
        } => {
            let cfg = numerics.limit()?;
            let rep = if alpha {
                alpha_limit(&k, &p0, &cfg)?
            } else {
                omega_limit(&k, &p0, &cfg)?
            };
            json_value(
                out,
                &json!({"k": k, "p0": p0, "limit": if alpha { "alpha" } else { "omega" }, "report": rep}),
            )?;
            Ok(kind_code(rep.kind))
        }
        Command::VerifyA(args) => verify_cmd(out, 'A', args),
        Command::VerifyB(args) => verify_cmd(out, 'B', args),
        Command::Match {
            k: KArg { k },
            x0,
            edge,
        } => {
            let (m, faces) = match edge {
                Edge::Py => (heteroclinic_match(&k, x0)?, [Face::Y, Face::Sigma]),
                Edge::Xz => (heteroclinic_match_xz(&k, x0)?, [Face::X, Face::Z]),
            };
            let f1 = face_flow_terminal(faces[0], &k, x0)?;
            let f2 = face_flow_terminal(faces[1], &k, x0)?;
            json_value(
                out,
                &json!({
                    "k": k,
                    "discriminant": k.discriminant(),
                    "match": m,
                    "face_flow": [f1, f2],
                    "face_flow_gap": (f1.terminal_abscissa - m.x1).abs().max((f2.terminal_abscissa - m.x2).abs()),
                }),
            )?;
            Ok(0)
        }
        Command::PeriodProfile {
            k: KArg { k },
            base,
            direction,
            start,
            step,
            n,
        } => {
            let offsets: Vec<f64> = (0..n).map(|i| start + step * i as f64).collect();
            let family = ray_points(&base, &direction, &offsets);
            let base_z = match interior_segment_r(&k)? {
                Some(r) if r.distance_to(&base) <= 1e-12 => Some(base[2]),
                _ => None,
            };
            let prof = period_profile(&k, &family, base_z, &PeriodicConfig::default())?;
            for (s, off) in prof.samples.iter().zip(&offsets) {
                json_value(out, &json!({"offset": off, "sample": s}))?;
            }
            let innermost = prof.samples.first().and_then(|s| s.period);
            json_value(
                out,
                &json!({
                    "strictly_increasing": prof.strictly_increasing,
                    "linear_period": prof.linear_period,
                    "innermost_ratio": innermost.zip(prof.linear_period).map(|(p, l)| p / l),
                }),
            )?;
            Ok(if prof.samples.iter().any(|s| s.period.is_none()) {
                EXIT_INCONCLUSIVE
            } else if prof.strictly_increasing {
                0
            } else {
                EXIT_FAIL
            })
        }
        Command::Scan {
            slice,
            range,
            steps,
            s_range,
            s_steps,
            p0,
            num: numerics,
        } => {
            let slice = Slice::parse(&slice)?;
            let s_axis = match (s_range, s_steps) {
                (Some((lo, hi)), Some(n)) => Some(Axis::new(lo, hi, n)?),
                (None, None) if slice.uses_s() => {
                    return Err(CliError::Usage(
                        "slice uses s: pass --s-range and --s-steps".into(),
                    ))
                }
                (None, None) => None,
                _ => {
                    return Err(CliError::Usage(
                        "--s-range and --s-steps go together".into(),
                    ))
                }
            };
            let mut spec = ScanSpec::new(slice, Axis::new(range.0, range.1, steps)?, s_axis);
            spec.limit = numerics.limit()?;
            if let Some(p) = p0 {
                spec.probe_start = p;
            }
            let rows = bifurcation_scan(&spec);
            for r in &rows {
                json_line(out, r)?;
            }
            Ok(
                if rows
                    .iter()
                    .any(|r| r.probe == Some(LimitKind::Inconclusive))
                {
                    EXIT_INCONCLUSIVE
                } else {
                    0
                },
            )
        }
        Command::Portrait {
            k: KArg { k },
            n,
            t,
            dt,
            backward,
            seed,
            num: numerics,
        } => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Usage(format!("--t must be positive, got {t}")));
            }
            let cfg = PortraitConfig {
                n,
                seed,
                t_end: if backward { -t } else { t },
                dt,
                opts: IntegrateOptions::with_tol(numerics.tol()?),
            };
            let bundle = portrait(&k, &cfg)?;
            let mut csv = Csv::new(out, &["id", "t", "x", "y", "z"])?;
            for tr in &bundle {
                for (t, p) in &tr.samples {
                    csv.row(&[tr.id.to_string(), num(*t), num(p[0]), num(p[1]), num(p[2])])?;
                }
            }
            Ok(0)
        }
    }
}

fn verify_cmd<W: Write>(out: &mut W, theorem: char, args: VerifyArgs) -> Result<u8, CliError> {
    let k = args.k.k;
    let cfg = VerifyConfig {
        n_samples: args.samples,
        seed: args.seed,
        limit: args.num.limit()?,
        ..Default::default()
    };
    let mut rep = if theorem == 'A' {
        verify_theorem_a(&k, &cfg)?
    } else {
        verify_theorem_b(&k, &cfg)?
    };
    let certified: Vec<&str> = certified_integrals(&k)
        .iter()
        .map(|s| s.name.as_str())
        .collect();
    if args.summary {
        rep.samples.clear();
    }
    let mut value = serde_json::to_value(&rep).map_err(io::Error::other)?;
    value["certified_integrals"] = json!(certified);
    value["exclusion_violations"] = json!(rep.exclusion_violations());
    json_value(out, &value)?;
    Ok(verdict_code(rep.verdict))
}

fn init_threads() {
    if let Some(n) = std::env::var("LV3_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            // only fails if a pool already exists
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli, &mut out).and_then(|code| {
        out.flush()?;
        Ok(code)
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("lv3: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Io(e)) => {
            eprintln!("lv3: i/o error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(CliError::Core(e)) => {
            eprintln!("lv3: {e}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
