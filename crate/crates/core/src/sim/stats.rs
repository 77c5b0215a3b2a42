//! Binomial z-tests of simulated statistics against analytic predictions.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::corr::FloatBox;
use crate::error::{Error, Result};
use crate::quantum::{singlet_correlation, OutcomeDist};

use super::{
    run_with, tally, Model, ResourceTotals, RoundRecord, Schedule, Setting, SettingGrid, SimConfig,
    Tally,
};

/// Standard error of a Bernoulli mean with target `p` over `n` trials.
/// The target is clamped to `[1/(2n), 1 − 1/(2n)]`, so deterministic
/// predictions still get a positive error of order `1/n`.
pub fn bernoulli_se(p: f64, n: u64) -> f64 {
    let n = n as f64;
    let lo = 0.5 / n;
    let q = p.clamp(lo, 1.0 - lo);
    (q * (1.0 - q) / n).sqrt()
}

fn z_score(empirical: f64, target: f64, se: f64) -> f64 {
    if empirical == target {
        0.0
    } else {
        (empirical - target) / se
    }
}

/// One tested statistic of one setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub setting: usize,
    pub x: usize,
    pub y: usize,
    /// `P(a,b)` for a cell, `E` for the ±1 correlator, `PA(0)`/`PB(0)` for marginals.
    pub statistic: String,
    pub rounds: u64,
    pub empirical: f64,
    pub target: f64,
    pub std_error: f64,
    pub z: f64,
}

impl StatRow {
    fn bernoulli(
        setting: usize,
        x: usize,
        y: usize,
        statistic: String,
        hits: u64,
        n: u64,
        target: f64,
    ) -> Self {
        let empirical = hits as f64 / n as f64;
        let std_error = bernoulli_se(target, n);
        Self {
            setting,
            x,
            y,
            statistic,
            rounds: n,
            empirical,
            target,
            std_error,
            z: z_score(empirical, target, std_error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatTestReport {
    pub model: String,
    pub rounds_per_setting: u64,
    pub sigma: f64,
    pub rows: Vec<StatRow>,
    pub max_abs_z: f64,
    pub resources: ResourceTotals,
    pub passed: bool,
}

impl StatTestReport {
    pub fn to_json(&self) -> Value {
        let mut v = json!({ "schema": 1 });
        if let (Value::Object(m), Ok(Value::Object(rest))) = (&mut v, serde_json::to_value(self)) {
            m.extend(rest);
        }
        v
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub rounds_per_setting: u64,
    pub seed: u64,
    pub sigma: f64,
    pub workers: usize,
}

impl EstimateConfig {
    pub fn new(rounds_per_setting: u64, seed: u64) -> Self {
        Self {
            rounds_per_setting,
            seed,
            sigma: 4.0,
            workers: 0,
        }
    }
}

/// Singlet prediction for direction settings.
pub fn singlet_oracle(s: &Setting) -> Result<OutcomeDist> {
    match s {
        Setting::Directions { a, b } => Ok(singlet_correlation(a, b)),
        Setting::Bits { .. } => Err(Error::OutOfRange("singlet oracle needs directions".into())),
    }
}

/// `½ δ(a⊕b = xy)` for bit settings.
pub fn pr_box_oracle(s: &Setting) -> Result<OutcomeDist> {
    match s {
        Setting::Bits { x, y } => {
            let xy = (x & y) as usize;
            let mut d = [[0.0; 2]; 2];
            for (a, row) in d.iter_mut().enumerate() {
                for (b, p) in row.iter_mut().enumerate() {
                    *p = if a ^ b == xy { 0.5 } else { 0.0 };
                }
            }
            Ok(d)
        }
        Setting::Directions { .. } => {
            Err(Error::OutOfRange("PR-box oracle needs bit inputs".into()))
        }
    }
}

fn check_config(cfg: &EstimateConfig) -> Result<()> {
    if cfg.rounds_per_setting < 2 {
        return Err(Error::OutOfRange(format!(
            "need at least 2 rounds per setting, got {}",
            cfg.rounds_per_setting
        )));
    }
    if !(cfg.sigma > 0.0) {
        return Err(Error::OutOfRange(format!(
            "sigma threshold must be positive, got {}",
            cfg.sigma
        )));
    }
    Ok(())
}

/// Local-sign model: `a = sgn(â·λ)`, `b = −sgn(b̂·λ)` gives
/// `E = −(1 − 2θ/π)` for the angle `θ` between the directions.
pub fn local_sign_oracle(s: &Setting) -> Result<OutcomeDist> {
    match s {
        Setting::Directions { a, b } => {
            let theta = a.dot(b).clamp(-1.0, 1.0).acos();
            let e = -(1.0 - 2.0 * theta / std::f64::consts::PI);
            Ok([
                [(1.0 + e) / 4.0, (1.0 - e) / 4.0],
                [(1.0 - e) / 4.0, (1.0 + e) / 4.0],
            ])
        }
        Setting::Bits { .. } => Err(Error::OutOfRange(
            "local-sign oracle needs directions".into(),
        )),
    }
}

/// Each player outputs their own input.
pub fn own_input_oracle(s: &Setting) -> Result<OutcomeDist> {
    match s {
        Setting::Bits { x, y } => {
            let mut d = [[0.0; 2]; 2];
            d[*x as usize][*y as usize] = 1.0;
            Ok(d)
        }
        Setting::Directions { .. } => Err(Error::OutOfRange(
            "own-input oracle needs bit inputs".into(),
        )),
    }
}

pub fn uniform_oracle(_: &Setting) -> Result<OutcomeDist> {
    Ok([[0.25; 2]; 2])
}

pub type Oracle = fn(&Setting) -> Result<OutcomeDist>;

/// Analytic prediction for each built-in model.
pub fn builtin_oracle(model: &str) -> Option<Oracle> {
    Some(match model {
        "pr-box" => pr_box_oracle,
        "toner-bacon" | "prbox-singlet" => singlet_oracle,
        "local-sign" => local_sign_oracle,
        "own-input" => own_input_oracle,
        "random-guess" => uniform_oracle,
        _ => return None,
    })
}

/// Runs `rounds_per_setting` rounds for every setting of `grid` and tests
/// each cell, the correlator and both marginals against `oracle`.
pub fn estimate(
    model: &dyn Model,
    grid: &SettingGrid,
    oracle: &(dyn Fn(&Setting) -> Result<OutcomeDist> + Sync),
    cfg: EstimateConfig,
) -> Result<(FloatBox, StatTestReport)> {
    check_config(&cfg)?;
    let sim = SimConfig {
        seed: cfg.seed,
        workers: cfg.workers,
    };
    let t = tally(
        model,
        grid,
        Schedule::PerSetting(cfg.rounds_per_setting),
        sim,
    )?;
    report(model, grid, oracle, &cfg, &t)
}

/// [`estimate`], also handing every round record to `sink` in round order.
pub fn estimate_recorded(
    model: &dyn Model,
    grid: &SettingGrid,
    oracle: &(dyn Fn(&Setting) -> Result<OutcomeDist> + Sync),
    cfg: EstimateConfig,
    sink: impl FnMut(&RoundRecord) -> Result<()>,
) -> Result<(FloatBox, StatTestReport)> {
    check_config(&cfg)?;
    let sim = SimConfig {
        seed: cfg.seed,
        workers: cfg.workers,
    };
    let t = run_with(
        model,
        grid,
        Schedule::PerSetting(cfg.rounds_per_setting),
        sim,
        sink,
    )?;
    report(model, grid, oracle, &cfg, &t)
}

fn report(
    model: &dyn Model,
    grid: &SettingGrid,
    oracle: &(dyn Fn(&Setting) -> Result<OutcomeDist> + Sync),
    cfg: &EstimateConfig,
    t: &Tally,
) -> Result<(FloatBox, StatTestReport)> {
    let n = cfg.rounds_per_setting;
    let (empirical, _) = t.counts.to_correlation()?;
    let mut rows = Vec::new();
    for (k, setting) in grid.settings().iter().enumerate() {
        let (x, y) = grid.coords(k);
        let raw = oracle(setting)?;
        let target = |a: usize, b: usize| {
            let (ra, rb) = grid.flip(k, a as u8, b as u8);
            raw[ra as usize][rb as usize]
        };
        let count = |a, b| t.counts.cell(x, y, a, b);
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            rows.push(StatRow::bernoulli(
                k,
                x,
                y,
                format!("P({a},{b})"),
                count(a, b),
                n,
                target(a, b),
            ));
        }
        // E = 1 − 2·P(a≠b): same test as the disagreement frequency.
        let disagree = count(0, 1) + count(1, 0);
        let q = StatRow::bernoulli(
            k,
            x,
            y,
            String::new(),
            disagree,
            n,
            target(0, 1) + target(1, 0),
        );
        rows.push(StatRow {
            statistic: "E".into(),
            empirical: 1.0 - 2.0 * q.empirical,
            target: 1.0 - 2.0 * q.target,
            std_error: 2.0 * q.std_error,
            z: -q.z,
            ..q
        });
        rows.push(StatRow::bernoulli(
            k,
            x,
            y,
            "PA(0)".into(),
            count(0, 0) + count(0, 1),
            n,
            target(0, 0) + target(0, 1),
        ));
        rows.push(StatRow::bernoulli(
            k,
            x,
            y,
            "PB(0)".into(),
            count(0, 0) + count(1, 0),
            n,
            target(0, 0) + target(1, 0),
        ));
    }
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let report = StatTestReport {
        model: model.name().to_string(),
        rounds_per_setting: n,
        sigma: cfg.sigma,
        passed: max_abs_z < cfg.sigma,
        max_abs_z,
        rows,
        resources: t.totals,
    };
    Ok((empirical, report))
}
