//! Seeded Monte Carlo engine for boxes, games and singlet simulations.
//!
//! Round `r` draws all of its randomness from streams keyed by
//! `(seed, r, label)`, so a round's record depends only on the seed, the
//! parameters and its index. Rounds are processed in fixed-size chunks;
//! chunk results are folded in chunk order, which makes tallies independent
//! of the worker count.

mod games;
mod models;
mod stats;

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::{SampleCounts, Scenario};
use crate::error::{Error, Result};
use crate::quantum::{Direction, SettingFamily};
use crate::rng::{self, Stream};

pub use games::{coin_game, exam1_guess_game, CoinGameReport, GuessReport};
pub use models::{
    bit_to_spin, cgmp_prbox_round, pr_box_round, sgn, spin_to_bit, toner_bacon_round, InputKind,
    LocalSignModel, Model, ModelRegistry, OwnInputGuess, Play, PrBoxModel, PrBoxSingletModel,
    RandomGuess, Resources, RoundContext, SharedRandomness, TonerBaconModel,
};
pub use stats::{
    bernoulli_se, builtin_oracle, estimate, estimate_recorded, local_sign_oracle, own_input_oracle,
    pr_box_oracle, singlet_oracle, uniform_oracle, EstimateConfig, Oracle, StatRow, StatTestReport,
};

/// Rounds per parallel work unit.
const CHUNK: u64 = 1 << 14;

/// What the parties are asked in one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Bits { x: u8, y: u8 },
    Directions { a: Direction, b: Direction },
}

/// Settings indexed by `(x, y)`, row-major, with optional per-input output
/// flips applied to every recorded outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingGrid {
    nx: usize,
    ny: usize,
    settings: Vec<Setting>,
    flip_a: Vec<bool>,
    flip_b: Vec<bool>,
}

impl SettingGrid {
    /// The four bit settings of the binary scenario.
    pub fn binary() -> Self {
        let settings = (0..4u8)
            .map(|k| Setting::Bits {
                x: k >> 1,
                y: k & 1,
            })
            .collect();
        Self {
            nx: 2,
            ny: 2,
            settings,
            flip_a: vec![false; 2],
            flip_b: vec![false; 2],
        }
    }

    /// Every Alice direction against every Bob direction, flips included.
    pub fn from_family(family: &SettingFamily) -> Result<Self> {
        let scenario = family.scenario()?;
        let settings = family
            .alice
            .iter()
            .flat_map(|a| {
                family
                    .bob
                    .iter()
                    .map(|b| Setting::Directions { a: *a, b: *b })
            })
            .collect();
        let pad =
            |f: &[bool], n: usize| (0..n).map(|i| f.get(i).copied().unwrap_or(false)).collect();
        Ok(Self {
            nx: scenario.nx,
            ny: scenario.ny,
            settings,
            flip_a: pad(&family.flip_alice, scenario.nx),
            flip_b: pad(&family.flip_bob, scenario.ny),
        })
    }

    /// A list of direction pairs, one per Alice input (`ny = 1`).
    pub fn from_pairs(pairs: &[(Direction, Direction)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::OutOfRange("setting list is empty".into()));
        }
        let settings = pairs
            .iter()
            .map(|(a, b)| Setting::Directions { a: *a, b: *b })
            .collect();
        Ok(Self {
            nx: pairs.len(),
            ny: 1,
            settings,
            flip_a: vec![false; pairs.len()],
            flip_b: vec![false],
        })
    }

    /// `k` independent uniformly random direction pairs.
    pub fn random_pairs(k: usize, seed: u64) -> Result<Self> {
        let pairs: Vec<_> = (0..k as u64)
            .map(|i| {
                let mut r = rng::stream(seed, i, Stream::Settings);
                (Direction::random(&mut r), Direction::random(&mut r))
            })
            .collect();
        Self::from_pairs(&pairs)
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            nx: self.nx,
            ny: self.ny,
            na: 2,
            nb: 2,
        }
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.ny, index % self.ny)
    }

    /// Output bits as recorded, after the grid's flips.
    pub fn flip(&self, index: usize, a: u8, b: u8) -> (u8, u8) {
        let (x, y) = self.coords(index);
        (a ^ self.flip_a[x] as u8, b ^ self.flip_b[y] as u8)
    }
}

/// How rounds are assigned to settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `n` consecutive rounds per setting, in grid order.
    PerSetting(u64),
    /// `n` rounds, each playing a uniformly drawn setting.
    Uniform(u64),
}

impl Schedule {
    pub fn total_rounds(&self, grid: &SettingGrid) -> u64 {
        match *self {
            Schedule::PerSetting(n) => n * grid.len() as u64,
            Schedule::Uniform(n) => n,
        }
    }

    fn setting_for(&self, grid: &SettingGrid, seed: u64, round: u64) -> usize {
        match *self {
            Schedule::PerSetting(n) => (round / n) as usize,
            Schedule::Uniform(_) => {
                rng::stream(seed, round, Stream::Inputs).random_range(0..grid.len())
            }
        }
    }
}

/// One line of a transcript.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub setting: usize,
    pub x: usize,
    pub y: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<[Direction; 2]>,
    pub a: u8,
    pub b: u8,
    pub bits_communicated: u32,
    pub prbox_uses: u32,
    pub shared_digest: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceTotals {
    pub rounds: u64,
    pub bits_communicated: u64,
    pub prbox_uses: u64,
}

impl ResourceTotals {
    fn add(&mut self, r: &RoundRecord) {
        self.rounds += 1;
        self.bits_communicated += r.bits_communicated as u64;
        self.prbox_uses += r.prbox_uses as u64;
    }

    fn merge(&mut self, o: &ResourceTotals) {
        self.rounds += o.rounds;
        self.bits_communicated += o.bits_communicated;
        self.prbox_uses += o.prbox_uses;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub seed: u64,
    pub model: String,
    pub records: Vec<RoundRecord>,
    pub totals: ResourceTotals,
}

impl Transcript {
    /// One JSON object per line, in round order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_records<R: BufRead>(r: R) -> Result<Vec<RoundRecord>> {
        let mut out = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(e.to_string()))?);
        }
        Ok(out)
    }
}

/// Aggregated outcome counts of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub counts: SampleCounts,
    pub totals: ResourceTotals,
}

impl Tally {
    fn new(scenario: Scenario) -> Self {
        Self {
            counts: SampleCounts::new(scenario),
            totals: ResourceTotals::default(),
        }
    }

    fn add(&mut self, r: &RoundRecord) {
        self.counts.add_cell(
            self.counts
                .scenario()
                .index(r.x, r.y, r.a as usize, r.b as usize),
            1,
        );
        self.totals.add(r);
    }

    fn merge(&mut self, o: &Tally) {
        self.counts.merge(&o.counts);
        self.totals.merge(&o.totals);
    }
}

/// Seed and parallelism of a run; `workers = 0` uses rayon's default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub workers: usize,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, workers: 0 }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::OutOfRange(format!("worker pool: {e}")))
    }
}

pub fn play_round(
    model: &dyn Model,
    grid: &SettingGrid,
    schedule: Schedule,
    seed: u64,
    round: u64,
) -> Result<RoundRecord> {
    let setting = schedule.setting_for(grid, seed, round);
    let ctx = RoundContext { seed, round };
    let s = &grid.settings[setting];
    let play = model.play(s, &ctx)?;
    let (a, b) = grid.flip(setting, play.a, play.b);
    let (x, y) = grid.coords(setting);
    let res = model.resources();
    Ok(RoundRecord {
        round,
        setting,
        x,
        y,
        directions: match s {
            Setting::Directions { a, b } => Some([*a, *b]),
            Setting::Bits { .. } => None,
        },
        a,
        b,
        bits_communicated: res.bits_communicated,
        prbox_uses: res.prbox_uses,
        shared_digest: play.shared_digest,
    })
}

/// Plays every round of `schedule`, handing records to `sink` in round
/// order, and returns the tally.
pub fn run_with(
    model: &dyn Model,
    grid: &SettingGrid,
    schedule: Schedule,
    cfg: SimConfig,
    mut sink: impl FnMut(&RoundRecord) -> Result<()>,
) -> Result<Tally> {
    let total = schedule.total_rounds(grid);
    if total == 0 {
        return Err(Error::OutOfRange("rounds must be at least 1".into()));
    }
    let pool = cfg.pool()?;
    let chunks = total.div_ceil(CHUNK);
    // Chunks are produced in parallel batches and consumed in order.
    let batch = (pool.current_num_threads() as u64 * 4).max(1);
    let mut tally = Tally::new(grid.scenario());
    let mut start = 0;
    while start < chunks {
        let end = (start + batch).min(chunks);
        let done: Vec<Result<Vec<RoundRecord>>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|c| {
                    (c * CHUNK..((c + 1) * CHUNK).min(total))
                        .map(|r| play_round(model, grid, schedule, cfg.seed, r))
                        .collect()
                })
                .collect()
        });
        for records in done {
            for r in records? {
                tally.add(&r);
                sink(&r)?;
            }
        }
        start = end;
    }
    Ok(tally)
}

/// Counts only; no records are kept.
pub fn tally(
    model: &dyn Model,
    grid: &SettingGrid,
    schedule: Schedule,
    cfg: SimConfig,
) -> Result<Tally> {
    let total = schedule.total_rounds(grid);
    if total == 0 {
        return Err(Error::OutOfRange("rounds must be at least 1".into()));
    }
    let pool = cfg.pool()?;
    let chunks: Vec<Result<Tally>> = pool.install(|| {
        (0..total.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut t = Tally::new(grid.scenario());
                for r in c * CHUNK..((c + 1) * CHUNK).min(total) {
                    t.add(&play_round(model, grid, schedule, cfg.seed, r)?);
                }
                Ok(t)
            })
            .collect()
    });
    let mut tally = Tally::new(grid.scenario());
    for t in chunks {
        tally.merge(&t?);
    }
    Ok(tally)
}

/// Full in-memory transcript.
pub fn run(
    model: &dyn Model,
    grid: &SettingGrid,
    schedule: Schedule,
    cfg: SimConfig,
) -> Result<Transcript> {
    let mut records = Vec::with_capacity(schedule.total_rounds(grid) as usize);
    let tally = run_with(model, grid, schedule, cfg, |r| {
        records.push(*r);
        Ok(())
    })?;
    Ok(Transcript {
        seed: cfg.seed,
        model: model.name().to_string(),
        records,
        totals: tally.totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transcripts_ignore_worker_count() {
        let grid = SettingGrid::random_pairs(3, 5).unwrap();
        let m = PrBoxSingletModel;
        let sched = Schedule::PerSetting(20_000);
        let one = run(
            &m,
            &grid,
            sched,
            SimConfig {
                seed: 11,
                workers: 1,
            },
        )
        .unwrap();
        let four = run(
            &m,
            &grid,
            sched,
            SimConfig {
                seed: 11,
                workers: 4,
            },
        )
        .unwrap();
        assert_eq!(one, four);
        let t = tally(
            &m,
            &grid,
            sched,
            SimConfig {
                seed: 11,
                workers: 3,
            },
        )
        .unwrap();
        assert_eq!(t.totals, one.totals);
        assert_eq!(
            t.totals,
            ResourceTotals {
                rounds: 60_000,
                bits_communicated: 0,
                prbox_uses: 60_000
            }
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let grid = SettingGrid::random_pairs(2, 1).unwrap();
        let t = run(
            &TonerBaconModel,
            &grid,
            Schedule::PerSetting(5),
            SimConfig::new(3),
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&c| c == b'\n').count(), 10);
        let back = Transcript::read_records(&buf[..]).unwrap();
        assert_eq!(back, t.records);
    }

    #[test]
    fn uniform_schedule_covers_grid() {
        let t = tally(
            &PrBoxModel,
            &SettingGrid::binary(),
            Schedule::Uniform(4000),
            SimConfig::new(2),
        )
        .unwrap();
        assert!(t.counts.per_setting_totals().iter().all(|&n| n > 800));
        assert!(matches!(
            tally(
                &PrBoxModel,
                &SettingGrid::binary(),
                Schedule::Uniform(0),
                SimConfig::new(2)
            ),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn grid_flips_apply() {
        let g = SettingGrid::from_family(&SettingFamily::named("chsh-optimal").unwrap()).unwrap();
        assert_eq!(g.flip(0, 0, 0), (1, 0));
        assert_eq!(g.len(), 4);
    }
}
