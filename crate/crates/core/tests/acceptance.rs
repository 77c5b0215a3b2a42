//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::FRAC_PI_4;
use std::hash::{Hash, Hasher};
use std::process::ExitCode;
use std::time::Instant;

use nsbox::boxes;
use nsbox::crypto::{
    crossing, eve_attack_announced, eve_individual_attack, key_advantage_curve, linear_grid, qber,
    sift,
};
use nsbox::num::{format_rational, int, ratio, rational_to_f64, Rational};
use nsbox::polytope::{
    affine_dimension, cloning_feasible, decompose_ns, enumerate_deterministic, is_local,
    monogamy_max, ns_vertex_list, verify_vertex, BellFunctional, DEFAULT_CAP,
};
use nsbox::quantum::{
    chsh_mark_for_settings, max_chsh, tsirelson_value, SchmidtState, SearchConfig, SettingFamily,
};
use nsbox::rng::{self, Stream};
use nsbox::sim::{
    coin_game, estimate_recorded, exam1_guess_game, run, singlet_oracle, EstimateConfig, Model,
    OwnInputGuess, PrBoxSingletModel, RoundRecord, Schedule, SettingGrid, SimConfig,
    StatTestReport, TonerBaconModel,
};
use nsbox::{Correlation, ExactBox, Party, Scenario};
use rand::Rng;

const SIGMA: f64 = 4.0;
const MILLION: u64 = 1_000_000;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: nsbox::Error) -> String {
    e.to_string()
}

fn criterion_1() -> Outcome {
    let chsh = BellFunctional::chsh();
    let strategies = enumerate_deterministic(Scenario::binary(), DEFAULT_CAP).map_err(err)?;
    ensure(
        strategies.len() == 16,
        format!("{} strategies", strategies.len()),
    )?;
    let best = strategies
        .iter()
        .map(|s| chsh.on_strategy(s))
        .max()
        .unwrap();
    ensure(best == int(3), format!("max mark {best}"))?;
    Ok(format!("max over 16 deterministic strategies = {best}"))
}

fn criterion_2() -> Outcome {
    let m = BellFunctional::chsh()
        .evaluate(&boxes::pr_box())
        .map_err(err)?;
    ensure(m == int(4), format!("M = {m}"))?;
    Ok(format!("M(PR) = {m}"))
}

fn criterion_3() -> Outcome {
    let singlet = SchmidtState::singlet();
    let family = SettingFamily::named("chsh-optimal").map_err(err)?;
    let (m, _) = chsh_mark_for_settings(&singlet, &family).map_err(err)?;
    let gap = (m - tsirelson_value()).abs();
    ensure(gap < 1e-9, format!("singlet mark {m}"))?;

    let ceiling = tsirelson_value() + 1e-6;
    let mut r = rng::stream(3, 0, Stream::Settings);
    let mut thetas: Vec<f64> = (0..6).map(|_| r.random_range(0.0..=FRAC_PI_4)).collect();
    thetas.push(FRAC_PI_4);
    let mut best = 0f64;
    for (i, theta) in thetas.iter().enumerate() {
        let state = SchmidtState::new(*theta).map_err(err)?;
        let cfg = SearchConfig {
            restarts: 10_000,
            seed: i as u64,
            ..SearchConfig::default()
        };
        let opt = max_chsh(&state, &cfg).map_err(err)?;
        ensure(
            opt.value <= ceiling,
            format!("θ={theta}: search found {}", opt.value),
        )?;
        best = best.max(opt.value);
    }
    Ok(format!(
        "singlet |M − (2+√2)| = {gap:.1e}; best of {} searches × 10⁴ restarts = {best:.12}",
        thetas.len()
    ))
}

fn criterion_4() -> Outcome {
    let chsh = BellFunctional::chsh();
    for k in -10..=10 {
        let p = ratio(k, 10);
        let corr = boxes::isotropic(&p);
        let m = chsh.evaluate(&corr).map_err(err)?;
        ensure(m == int(3) + &p, format!("p={p}: M = {m}"))?;
        let local = is_local(&corr).map_err(err)?.is_local();
        ensure(local == (p <= int(0)), format!("p={p}: is_local = {local}"))?;
    }
    let p = 2f64.sqrt() - 1.0;
    let m = chsh.evaluate(&boxes::isotropic_f64(p)).map_err(err)?;
    let gap = (m - tsirelson_value()).abs();
    ensure(gap < 1e-12, format!("M(√2−1) = {m}"))?;
    Ok(format!(
        "M = 3+p exactly and local iff p ≤ 0 on p ∈ {{−1, …, 1}}; |M(√2−1) − (2+√2)| = {gap:.1e}"
    ))
}

fn criterion_5() -> Outcome {
    let s = Scenario::binary();
    let vertices = ns_vertex_list(s).map_err(err)?;
    ensure(vertices.len() == 24, format!("{} vertices", vertices.len()))?;
    let boxes: Vec<ExactBox> = vertices.iter().map(|v| v.correlation(s)).collect();
    for (i, b) in boxes.iter().enumerate() {
        ensure(verify_vertex(b).map_err(err)?, format!("vertex {i} fails"))?;
    }
    let dim = affine_dimension(&boxes);
    ensure(dim == 8, format!("dimension {dim}"))?;
    let mut r = rng::stream(5, 0, Stream::Settings);
    for case in 0..1000 {
        let w: Vec<i64> = (0..24).map(|_| r.random_range(0..8)).collect();
        let total: i64 = w.iter().sum::<i64>().max(1);
        let parts: Vec<(Rational, &ExactBox)> = w
            .iter()
            .zip(&boxes)
            .filter(|(w, _)| **w > 0)
            .map(|(w, b)| (ratio(*w, total), b))
            .collect();
        let corr = if parts.is_empty() {
            boxes[0].clone()
        } else {
            Correlation::mix(&parts).map_err(err)?
        };
        let d = decompose_ns(&corr).map_err(err)?;
        ensure(
            d.residual == int(0) && d.reconstruct() == corr,
            format!("case {case}: residual {}", d.residual),
        )?;
    }
    Ok("24 verified vertices, affine dimension 8, 10³ exact decompositions".into())
}

fn criterion_6() -> Outcome {
    let mut rows = Vec::new();
    for m in [int(2), ratio(5, 2), int(3), ratio(7, 2), int(4)] {
        let r = monogamy_max(&m).map_err(err)?;
        let expect = std::cmp::min(int(4), int(6) - &m);
        ensure(r.max_m_ac == expect, format!("M_AB={m}: {}", r.max_m_ac))?;
        if m > int(3) {
            ensure(r.max_m_ac <= int(3), format!("AC violates at M_AB={m}"))?;
        }
        rows.push(format!("({m}, {})", r.max_m_ac));
    }
    let v = cloning_feasible(&int(4), &int(4));
    let w = v.signaling_witness.as_ref();
    ensure(!v.feasible, "cloning (4,4) feasible")?;
    ensure(
        w.is_some_and(|w| w.signals),
        "missing b⊕c = x signaling witness",
    )?;
    Ok(format!(
        "max M_AC = {}; cloning(4,4) infeasible, b⊕c by x = {:?}",
        rows.join(" "),
        w.unwrap().parity_by_x
    ))
}

/// Order-sensitive digest of a round stream.
#[derive(Default)]
struct Digest(DefaultHasher, u64);

impl Digest {
    fn push(&mut self, r: &RoundRecord) {
        let h = &mut self.0;
        (r.round, r.setting, r.x, r.y, r.a, r.b).hash(h);
        (r.bits_communicated, r.prbox_uses, r.shared_digest).hash(h);
        if let Some(d) = r.directions {
            for c in d.iter().flat_map(|d| d.components()) {
                c.to_bits().hash(h);
            }
        }
        self.1 += 1;
    }

    fn finish(&self) -> (u64, u64) {
        (self.0.finish(), self.1)
    }
}

fn singlet_run(
    model: &dyn Model,
    grid: &SettingGrid,
    seed: u64,
    workers: usize,
) -> Result<((u64, u64), StatTestReport), String> {
    let cfg = EstimateConfig {
        workers,
        ..EstimateConfig::new(MILLION, seed)
    };
    let mut digest = Digest::default();
    let (_, report) = estimate_recorded(model, grid, &singlet_oracle, cfg, |r| {
        digest.push(r);
        Ok(())
    })
    .map_err(err)?;
    Ok((digest.finish(), report))
}

struct Reruns {
    checked: Vec<String>,
}

const WORKERS: [usize; 2] = [1, 3];

fn criterion_7(reruns: &mut Reruns) -> Outcome {
    let grid = SettingGrid::random_pairs(20, 7).map_err(err)?;
    let rounds = 20 * MILLION;
    let mut summary = Vec::new();
    for (model, seed) in [
        (&TonerBaconModel as &dyn Model, 71),
        (&PrBoxSingletModel, 72),
    ] {
        let (digest, report) = singlet_run(model, &grid, seed, 0)?;
        ensure(
            report.passed,
            format!("{}: max |z| = {}", model.name(), report.max_abs_z),
        )?;
        let r = model.resources();
        let t = report.resources;
        ensure(
            t.rounds == rounds
                && t.bits_communicated == rounds * r.bits_communicated as u64
                && t.prbox_uses == rounds * r.prbox_uses as u64,
            format!("{}: resource counters {t:?}", model.name()),
        )?;
        summary.push(format!(
            "{} max|z|={:.2} bits={} pr={}",
            model.name(),
            report.max_abs_z,
            t.bits_communicated,
            t.prbox_uses
        ));
        for w in WORKERS {
            let again = singlet_run(model, &grid, seed, w)?;
            if again != (digest, report.clone()) {
                return Err(format!("{}: rerun with {w} workers differs", model.name()));
            }
        }
        reruns.checked.push(model.name().to_string());
    }
    Ok(format!("20 pairs × 10⁶ rounds: {}", summary.join("; ")))
}

fn criterion_8(reruns: &mut Reruns) -> Outcome {
    let (t, report) = coin_game(MILLION, 8, 0, SIGMA).map_err(err)?;
    ensure(
        report.pattern_violations == 0,
        format!("{} pattern violations", report.pattern_violations),
    )?;
    ensure(
        report.heads_z.iter().all(|z| z.abs() < SIGMA),
        format!("heads z = {:?}", report.heads_z),
    )?;
    let chsh_z = report.chsh_z.ok_or("CHSH mark undefined")?;
    ensure(chsh_z.abs() < SIGMA, format!("CHSH z = {chsh_z}"))?;
    ensure(report.passed, "report verdict failed")?;
    for w in WORKERS {
        let again = coin_game(MILLION, 8, w, SIGMA).map_err(err)?;
        ensure(
            again == (t.clone(), report.clone()),
            format!("rerun with {w} workers differs"),
        )?;
    }
    reruns.checked.push("coin-game".into());
    Ok(format!(
        "0 violations in 10⁶ rounds; heads z = [{:.2}, {:.2}]; M = {:.6}",
        report.heads_z[0],
        report.heads_z[1],
        report.chsh_mark.unwrap_or(f64::NAN)
    ))
}

fn criterion_9(reruns: &mut Reruns) -> Outcome {
    let report = exam1_guess_game(&OwnInputGuess, MILLION, 9, 0, 0.5, SIGMA).map_err(err)?;
    ensure(report.passed, format!("z = {}", report.z))?;
    ensure(
        report.equal_input_failures == 0,
        "own-input guess failed on x = y",
    )?;
    let grid = SettingGrid::binary();
    let transcript = run(
        &OwnInputGuess,
        &grid,
        Schedule::Uniform(MILLION),
        SimConfig::new(9),
    )
    .map_err(err)?;
    for w in WORKERS {
        let again = exam1_guess_game(&OwnInputGuess, MILLION, 9, w, 0.5, SIGMA).map_err(err)?;
        ensure(again == report, format!("report with {w} workers differs"))?;
        let t = run(
            &OwnInputGuess,
            &grid,
            Schedule::Uniform(MILLION),
            SimConfig {
                seed: 9,
                workers: w,
            },
        )
        .map_err(err)?;
        ensure(
            t == transcript,
            format!("transcript with {w} workers differs"),
        )?;
    }
    reruns.checked.push("exam1-guess".into());
    Ok(format!(
        "success frequency {:.6} (z = {:.2}) over 10⁶ rounds",
        report.frequency, report.z
    ))
}

fn criterion_10() -> Outcome {
    for k in 0..=10 {
        let p = ratio(k, 10);
        let corr = boxes::isotropic(&p);
        let expect = (int(1) - &p) / int(2);
        let a = eve_individual_attack(&corr, Party::Bob).map_err(err)?;
        ensure(
            a.known_weight == expect && a.dual_bound == expect,
            format!("p={p}: I(B;E) = {}", a.known_weight),
        )?;
        ensure(
            a.information == rational_to_f64(&expect),
            format!("p={p}: information {} in bits", a.information),
        )?;
        let sifted = sift(&corr).map_err(err)?;
        for x in 0..2 {
            let ix = eve_attack_announced(&corr, Party::Bob, x).map_err(err)?;
            let residual = &ix.known_weight - qber(&sifted, 1 - x) * int(2);
            ensure(
                residual == int(0),
                format!("p={p}, x={x}: residual {}", format_rational(&residual)),
            )?;
        }
    }
    let curve = key_advantage_curve(&linear_grid(0.0, 1.0, 101).map_err(err)?).map_err(err)?;
    let p = crossing(&curve, 1e-6)
        .map_err(err)?
        .ok_or("advantage never changes sign")?;
    ensure(
        (0.308..=0.328).contains(&p),
        format!("crossing {p:.6} outside [0.308, 0.328]"),
    )?;
    Ok(format!(
        "I(B;E) = (1−p)/2 and I_x = 2·QBER_(1−x) exactly on p ∈ {{0, …, 1}}; crossing p = {p:.6}"
    ))
}

fn criterion_11() -> Outcome {
    let singlet = SchmidtState::singlet();
    let mark = |name: &str| -> Result<f64, String> {
        let f = SettingFamily::named(name).map_err(err)?;
        Ok(chsh_mark_for_settings(&singlet, &f).map_err(err)?.0)
    };
    let (bb84, chsh) = (mark("bb84")?, mark("chsh-protocol")?);
    ensure((bb84 - 2.0).abs() < 1e-9, format!("BB84 M = {bb84}"))?;
    ensure(
        (chsh - tsirelson_value()).abs() < 1e-9,
        format!("CHSH-protocol M = {chsh}"),
    )?;
    Ok(format!("BB84 M = {bb84:.12}; CHSH protocol M = {chsh:.12}"))
}

fn criterion_12(reruns: &Reruns) -> Outcome {
    ensure(
        reruns.checked.len() == 4,
        format!("only {:?} re-executed", reruns.checked),
    )?;
    Ok(format!(
        "{} identical across worker counts {{all cores, {}, {}}}",
        reruns.checked.join(", "),
        WORKERS[0],
        WORKERS[1]
    ))
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored.
    let start = Instant::now();
    let mut reruns = Reruns { checked: vec![] };
    let mut failed = 0;
    let mut report = |n: usize, outcome: Outcome, t: Instant| {
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS criterion {n:>2} ({secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({secs:.1}s): {msg}");
            }
        }
    };
    let t = Instant::now();
    report(1, criterion_1(), t);
    let t = Instant::now();
    report(2, criterion_2(), t);
    let t = Instant::now();
    report(3, criterion_3(), t);
    let t = Instant::now();
    report(4, criterion_4(), t);
    let t = Instant::now();
    report(5, criterion_5(), t);
    let t = Instant::now();
    report(6, criterion_6(), t);
    let t = Instant::now();
    report(7, criterion_7(&mut reruns), t);
    let t = Instant::now();
    report(8, criterion_8(&mut reruns), t);
    let t = Instant::now();
    report(9, criterion_9(&mut reruns), t);
    let t = Instant::now();
    report(10, criterion_10(), t);
    let t = Instant::now();
    report(11, criterion_11(), t);
    let t = Instant::now();
    report(12, criterion_12(&reruns), t);
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        12 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
