//! The coin-tossing game and the exam-1 guessing game.

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::stats::bernoulli_se;
use super::{run, Model, PrBoxModel, Schedule, SettingGrid, SimConfig, Transcript};

fn with_schema<T: Serialize>(v: &T) -> Value {
    let mut out = json!({ "schema": 1 });
    if let (Value::Object(m), Ok(Value::Object(rest))) = (&mut out, serde_json::to_value(v)) {
        m.extend(rest);
    }
    out
}

fn z(empirical: f64, target: f64, se: f64) -> f64 {
    if empirical == target {
        0.0
    } else {
        (empirical - target) / se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoinGameReport {
    pub rounds: u64,
    /// Rounds breaking "some right hand → equal, both left → opposite".
    pub pattern_violations: u64,
    /// Heads (bit 0) per player.
    pub heads: [u64; 2],
    pub heads_z: [f64; 2],
    /// Empirical CHSH mark; absent until every hand combination occurred.
    pub chsh_mark: Option<f64>,
    pub chsh_std_error: Option<f64>,
    pub chsh_z: Option<f64>,
    pub sigma: f64,
    pub passed: bool,
}

impl CoinGameReport {
    pub fn to_json(&self) -> Value {
        with_schema(self)
    }
}

/// Each round both players pick a hand uniformly (right = 0, left = 1) and
/// read their coin from a shared PR box.
pub fn coin_game(
    rounds: u64,
    seed: u64,
    workers: usize,
    sigma: f64,
) -> Result<(Transcript, CoinGameReport)> {
    if rounds == 0 {
        return Err(Error::OutOfRange("rounds must be at least 1".into()));
    }
    let grid = SettingGrid::binary();
    let t = run(
        &PrBoxModel,
        &grid,
        Schedule::Uniform(rounds),
        SimConfig { seed, workers },
    )?;
    let mut violations = 0;
    let mut heads = [0u64; 2];
    let mut per_setting = [[0u64; 2]; 4];
    for r in &t.records {
        let ok = (r.a ^ r.b) as usize == r.x & r.y;
        violations += (!ok) as u64;
        heads[0] += (r.a == 0) as u64;
        heads[1] += (r.b == 0) as u64;
        per_setting[r.setting][ok as usize] += 1;
    }
    let se_half = bernoulli_se(0.5, rounds);
    let heads_z = heads.map(|h| z(h as f64 / rounds as f64, 0.5, se_half));
    let (mut mark, mut var) = (Some(0.0), 0.0);
    for [fail, win] in per_setting {
        let n = fail + win;
        if n == 0 {
            mark = None;
            break;
        }
        mark = mark.map(|m| m + win as f64 / n as f64);
        var += bernoulli_se(1.0, n).powi(2);
    }
    let chsh_std_error = mark.map(|_| var.sqrt());
    let chsh_z = mark.map(|m| z(m, 4.0, var.sqrt()));
    let passed = violations == 0
        && heads_z.iter().all(|v| v.abs() < sigma)
        && chsh_z.is_none_or(|v| v.abs() < sigma);
    let report = CoinGameReport {
        rounds,
        pattern_violations: violations,
        heads,
        heads_z,
        chsh_mark: mark,
        chsh_std_error,
        chsh_z,
        sigma,
        passed,
    };
    Ok((t, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuessReport {
    pub strategy: String,
    pub rounds: u64,
    pub successes: u64,
    pub frequency: f64,
    pub target: f64,
    pub std_error: f64,
    pub z: f64,
    /// Rounds with `x = y` and how many of them failed.
    pub equal_input_rounds: u64,
    pub equal_input_failures: u64,
    pub sigma: f64,
    pub passed: bool,
}

impl GuessReport {
    pub fn to_json(&self) -> Value {
        with_schema(self)
    }
}

/// Alice and Bob each try to output the other's input bit; a round is won
/// when both guesses are right. `target` is the expected win rate.
pub fn exam1_guess_game(
    strategy: &dyn Model,
    rounds: u64,
    seed: u64,
    workers: usize,
    target: f64,
    sigma: f64,
) -> Result<GuessReport> {
    if rounds == 0 {
        return Err(Error::OutOfRange("rounds must be at least 1".into()));
    }
    let grid = SettingGrid::binary();
    let (mut successes, mut eq, mut eq_fail) = (0, 0, 0);
    super::run_with(
        strategy,
        &grid,
        Schedule::Uniform(rounds),
        SimConfig { seed, workers },
        |r| {
            let win = r.a as usize == r.y && r.b as usize == r.x;
            successes += win as u64;
            if r.x == r.y {
                eq += 1;
                eq_fail += (!win) as u64;
            }
            Ok(())
        },
    )?;
    let frequency = successes as f64 / rounds as f64;
    let std_error = bernoulli_se(target, rounds);
    let zs = z(frequency, target, std_error);
    Ok(GuessReport {
        strategy: strategy.name().to_string(),
        rounds,
        successes,
        frequency,
        target,
        std_error,
        z: zs,
        equal_input_rounds: eq,
        equal_input_failures: eq_fail,
        sigma,
        passed: zs.abs() < sigma,
    })
}
