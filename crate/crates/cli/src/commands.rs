use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use nsbox::crypto::{
    bb84_vs_chsh_comparison, crossing, key_advantage_curve, linear_grid, write_key_curve_csv,
};
use nsbox::num::{format_rational, int, parse_rational, rational_to_f64};
use nsbox::polytope::{
    chsh_facet_values, decompose_ns, is_local, monogamy_max, BellFunctional, Locality,
};
use nsbox::quantum::{chsh_mark_for_settings, Direction, SchmidtState, SettingFamily};
use nsbox::sim::{
    builtin_oracle, coin_game, estimate_recorded, EstimateConfig, InputKind, ModelRegistry,
    SettingGrid,
};
use nsbox::{AnyBox, Error, ExactBox};
use serde_json::{json, Value};

use crate::{Format, Frame};

pub const LOCAL: u8 = 0;
pub const NONLOCAL: u8 = 10;
pub const SIGNALING: u8 = 20;
pub const INVALID: u8 = 2;

/// Float boxes are projected onto this dyadic grid before exact analysis.
const FLOAT_BITS: u32 = 40;

#[derive(Debug)]
pub enum CliError {
    Io(PathBuf, io::Error),
    Core(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(..) => 1,
            CliError::Core(e) => match e {
                Error::Parse(_) | Error::UnknownModel(_) | Error::UnknownFamily(_) => 1,
                _ => INVALID,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_owned(), e))
}

fn stdout_io(e: io::Error) -> CliError {
    CliError::Io(PathBuf::from("<stdout>"), e)
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| stdout_io(e.into()))?;
    writeln!(out).map_err(stdout_io)
}

fn is_validation_error(e: &Error) -> bool {
    matches!(
        e,
        Error::ShapeMismatch(_)
            | Error::NegativeEntry { .. }
            | Error::NotNormalized { .. }
            | Error::IndexOutOfRange(_)
    )
}

fn load_box(path: &Path, tol: f64) -> Result<AnyBox> {
    Ok(AnyBox::from_json(&read(path)?, tol)?)
}

fn exact(b: &AnyBox) -> Result<ExactBox> {
    Ok(match b {
        AnyBox::Rational(c) => c.clone(),
        AnyBox::Float(c) => ExactBox::from_float_box(c, FLOAT_BITS)?,
    })
}

pub fn check(path: &Path, tol: f64) -> Result<u8> {
    let parsed = match AnyBox::from_json(&read(path)?, tol) {
        Ok(b) => b,
        Err(e) if is_validation_error(&e) => {
            print_json(&json!({
                "schema": 1,
                "verdict": "invalid",
                "error": e.to_string(),
            }))?;
            return Ok(INVALID);
        }
        Err(e) => return Err(e.into()),
    };
    let ns_tol = match parsed {
        AnyBox::Rational(_) => 0.0,
        AnyBox::Float(_) => tol,
    };
    let s = parsed.scenario();
    let mut report = json!({
        "schema": 1,
        "mode": parsed.mode(),
        "scenario": s,
    });
    let (ns, deviation) = match &parsed {
        AnyBox::Rational(c) => c.is_no_signaling(ns_tol),
        AnyBox::Float(c) => c.is_no_signaling(ns_tol),
    };
    report["no_signaling"] = json!({ "holds": ns, "max_deviation": deviation });
    if !ns {
        report["verdict"] = json!("signaling");
        print_json(&report)?;
        return Ok(SIGNALING);
    }
    let corr = exact(&parsed)?;
    if s.is_binary() {
        let facets = chsh_facet_values(&corr)?;
        report["chsh_facets"] = facets.iter().map(|v| json!(format_rational(v))).collect();
        report["ns_decomposition"] = decompose_ns(&corr)?.to_json();
    }
    let code = match is_local(&corr)? {
        Locality::Local(d) => {
            report["verdict"] = json!("local");
            report["decomposition"] = d.to_json();
            LOCAL
        }
        Locality::Nonlocal(c) => {
            report["verdict"] = json!("nonlocal");
            report["certificate"] = c.to_json();
            NONLOCAL
        }
    };
    print_json(&report)?;
    Ok(code)
}

fn load_family(spec: &str) -> Result<SettingFamily> {
    match SettingFamily::named(spec) {
        Ok(f) => Ok(f),
        Err(Error::UnknownFamily(_)) if Path::new(spec).is_file() => {
            serde_json::from_str(&read(Path::new(spec))?)
                .map_err(|e| Error::Parse(format!("{spec}: {e}")).into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn chsh(
    file: Option<&Path>,
    state: Option<f64>,
    settings: Option<&str>,
    frame: Frame,
    tol: f64,
) -> Result<u8> {
    let mark = match (file, state, settings) {
        (Some(path), _, _) => {
            let b = load_box(path, tol)?;
            let chsh = BellFunctional::chsh();
            match b {
                AnyBox::Rational(c) => rational_to_f64(&chsh.evaluate(&c)?),
                AnyBox::Float(c) => chsh.evaluate(&c)?,
            }
        }
        (None, Some(theta), Some(name)) => {
            let state = match frame {
                Frame::Singlet => SchmidtState::singlet_frame(theta)?,
                Frame::Schmidt => SchmidtState::new(theta)?,
            };
            chsh_mark_for_settings(&state, &load_family(name)?)?.0
        }
        _ => unreachable!("clap enforces a box file or --state with --settings"),
    };
    println!("{mark:.12}");
    Ok(0)
}

pub struct SimulateArgs {
    pub model: String,
    pub rounds: u64,
    pub seed: u64,
    pub sigma: f64,
    pub settings: Option<String>,
    pub transcript: Option<PathBuf>,
    pub workers: usize,
    pub format: Format,
}

#[derive(serde::Deserialize)]
struct PairSpec {
    a: Direction,
    b: Direction,
}

fn direction_grid(spec: &str, seed: u64) -> Result<SettingGrid> {
    if let Some(k) = spec.strip_prefix("random-") {
        let k: usize = k
            .parse()
            .map_err(|_| Error::Parse(format!("bad pair count in {spec:?}")))?;
        return Ok(SettingGrid::random_pairs(k, seed)?);
    }
    if let Ok(f) = SettingFamily::named(spec) {
        return Ok(SettingGrid::from_family(&f)?);
    }
    let text = read(Path::new(spec))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{spec}: {e}")))?;
    if doc.is_array() {
        let pairs: Vec<PairSpec> =
            serde_json::from_value(doc).map_err(|e| Error::Parse(format!("{spec}: {e}")))?;
        let pairs: Vec<_> = pairs.into_iter().map(|p| (p.a, p.b)).collect();
        Ok(SettingGrid::from_pairs(&pairs)?)
    } else {
        let f: SettingFamily =
            serde_json::from_value(doc).map_err(|e| Error::Parse(format!("{spec}: {e}")))?;
        Ok(SettingGrid::from_family(&f)?)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(path.to_owned(), e))
}

/// Top-level scalar fields of a JSON report as `field,value` rows.
fn write_flat_csv(report: &Value) -> Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["field", "value"]).map_err(csv_err)?;
    if let Value::Object(map) = report {
        for (k, v) in map {
            let cell = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            w.write_record([k.as_str(), cell.as_str()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(stdout_io)
}

pub fn simulate(args: SimulateArgs) -> Result<u8> {
    if args.rounds == 0 {
        return Err(Error::OutOfRange("--rounds must be at least 1".into()).into());
    }
    if args.model == "coin-game" {
        let (t, report) = coin_game(args.rounds, args.seed, args.workers, args.sigma)?;
        if let Some(path) = &args.transcript {
            let mut w = create(path)?;
            t.write_jsonl(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::Io(path.clone(), e))?;
        }
        match args.format {
            Format::Json => print_json(&report.to_json())?,
            Format::Csv => write_flat_csv(&report.to_json())?,
        }
        return Ok(if report.passed { 0 } else { 1 });
    }
    let registry = ModelRegistry::with_builtin();
    let model = registry.get(&args.model)?;
    let oracle = builtin_oracle(model.name())
        .ok_or_else(|| Error::UnknownModel(format!("{} has no oracle", model.name())))?;
    let grid = match model.inputs() {
        InputKind::Bits => {
            if args.settings.is_some() {
                return Err(Error::OutOfRange(format!(
                    "{} takes bit inputs; --settings does not apply",
                    model.name()
                ))
                .into());
            }
            SettingGrid::binary()
        }
        InputKind::Directions => {
            direction_grid(args.settings.as_deref().unwrap_or("random-20"), args.seed)?
        }
    };
    let cfg = EstimateConfig {
        workers: args.workers,
        sigma: args.sigma,
        ..EstimateConfig::new(args.rounds, args.seed)
    };
    let (_, report) = match &args.transcript {
        Some(path) => {
            let mut w = create(path)?;
            let res = estimate_recorded(model.as_ref(), &grid, &oracle, cfg, |r| {
                serde_json::to_writer(&mut w, r)
                    .map_err(|e| e.to_string())
                    .and_then(|_| w.write_all(b"\n").map_err(|e| e.to_string()))
                    .map_err(Error::Parse)
            })?;
            w.flush().map_err(|e| CliError::Io(path.clone(), e))?;
            res
        }
        None => nsbox::sim::estimate(model.as_ref(), &grid, &oracle, cfg)?,
    };
    match args.format {
        Format::Json => print_json(&report.to_json())?,
        Format::Csv => report.write_csv(io::stdout().lock())?,
    }
    Ok(if report.passed { 0 } else { 1 })
}

pub fn keyrate(pmin: f64, pmax: f64, steps: usize, tol: f64) -> Result<u8> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange(format!("--tol must be positive, got {tol}")).into());
    }
    let grid = linear_grid(pmin, pmax, steps)?;
    let curve = key_advantage_curve(&grid)?;
    let p = crossing(&curve, tol)?;
    write_key_curve_csv(io::stdout().lock(), &curve, p)?;
    Ok(0)
}

pub fn monogamy(step: &str, from: &str, to: &str) -> Result<u8> {
    let step = parse_rational(step)?;
    let (from, to) = (parse_rational(from)?, parse_rational(to)?);
    if step <= int(0) || step > int(1) {
        return Err(Error::OutOfRange(format!(
            "grid step must lie in (0, 1], got {}",
            format_rational(&step)
        ))
        .into());
    }
    if from > to {
        return Err(Error::OutOfRange("--from must not exceed --to".into()).into());
    }
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["m_ab", "max_m_ac", "m_ab_float", "max_m_ac_float"])
        .map_err(csv_err)?;
    let mut m = from;
    while m <= to {
        let r = monogamy_max(&m)?;
        w.write_record([
            format_rational(&r.m_ab),
            format_rational(&r.max_m_ac),
            rational_to_f64(&r.m_ab).to_string(),
            rational_to_f64(&r.max_m_ac).to_string(),
        ])
        .map_err(csv_err)?;
        m += &step;
    }
    w.flush().map_err(stdout_io)?;
    Ok(0)
}

pub fn compare() -> Result<u8> {
    print_json(&bb84_vs_chsh_comparison()?.to_json())?;
    Ok(0)
}
