//! Simulation models and the name-keyed registry.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quantum::{dot, Direction};
use crate::rng::{self, mix64, Stream};

use super::Setting;

/// Communication and nonlocal resources consumed by one round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct Resources {
    pub bits_communicated: u32,
    pub prbox_uses: u32,
}

/// Per-round view of the counter-based randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundContext {
    pub seed: u64,
    pub round: u64,
}

impl RoundContext {
    pub fn rng(&self, label: Stream) -> rand_chacha::ChaCha8Rng {
        rng::stream(self.seed, self.round, label)
    }

    pub fn shared(&self) -> SharedRandomness {
        let mut r = self.rng(Stream::Shared);
        SharedRandomness {
            l1: rng::unit_vector(&mut r),
            l2: rng::unit_vector(&mut r),
        }
    }
}

/// Two independent uniform unit vectors known to both parties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedRandomness {
    pub l1: [f64; 3],
    pub l2: [f64; 3],
}

impl SharedRandomness {
    pub fn digest(&self) -> u64 {
        self.l1
            .iter()
            .chain(&self.l2)
            .fold(0u64, |h, v| mix64(h ^ v.to_bits()))
    }
}

/// `sgn` with the tie rule `sgn(0) = +1`.
pub fn sgn(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// Spin `+1 -> 0`, `−1 -> 1`.
pub fn spin_to_bit(s: i8) -> u8 {
    (s < 0) as u8
}

/// Outputs `a` uniform and `b = a ⊕ xy`.
pub fn pr_box_round<R: Rng + ?Sized>(x: u8, y: u8, rng: &mut R) -> (u8, u8) {
    let a = rng.random::<bool>() as u8;
    (a, a ^ (x & y & 1))
}

/// One bit of communication reproduces the singlet:
/// Alice outputs `−sgn(â·λ₁)` and sends `c = sgn(â·λ₁) sgn(â·λ₂)`;
/// Bob outputs `sgn(b̂·(λ₁ + c λ₂))`.
pub fn toner_bacon_round(a: &Direction, b: &Direction, shared: &SharedRandomness) -> (i8, i8) {
    let (ac, bc) = (a.components(), b.components());
    let s1 = sgn(dot(&ac, &shared.l1));
    let c = s1 * sgn(dot(&ac, &shared.l2));
    let alice = -s1;
    let mixed = [0, 1, 2].map(|k| shared.l1[k] + c as f64 * shared.l2[k]);
    let bob = sgn(dot(&bc, &mixed));
    (alice, bob)
}

/// One use of a PR box and no communication reproduces the singlet.
///
/// Alice feeds `x = [sgn(â·λ₁) ≠ sgn(â·λ₂)]`, Bob feeds
/// `y = [sgn(b̂·λ₊) ≠ sgn(b̂·λ₋)]` with `λ± = λ₁ ± λ₂`. With PR outputs
/// `(p, q)`, Alice outputs the bit `p ⊕ [sgn(â·λ₁) = +1]` and Bob outputs
/// `q ⊕ [sgn(b̂·λ₊) = −1]`. The output parity then equals that of the
/// one-bit model, and the PR coin makes both marginals uniform.
pub fn cgmp_prbox_round(
    a: &Direction,
    b: &Direction,
    shared: &SharedRandomness,
    prbox: &mut dyn FnMut(u8, u8) -> (u8, u8),
) -> (i8, i8) {
    let (ac, bc) = (a.components(), b.components());
    let s1 = sgn(dot(&ac, &shared.l1));
    let s2 = sgn(dot(&ac, &shared.l2));
    let plus = [0, 1, 2].map(|k| shared.l1[k] + shared.l2[k]);
    let minus = [0, 1, 2].map(|k| shared.l1[k] - shared.l2[k]);
    let sp = sgn(dot(&bc, &plus));
    let sm = sgn(dot(&bc, &minus));
    let x = (s1 != s2) as u8;
    let y = (sp != sm) as u8;
    let (p, q) = prbox(x, y);
    let alice_bit = p ^ (s1 > 0) as u8;
    let bob_bit = q ^ spin_to_bit(sp);
    (bit_to_spin(alice_bit), bit_to_spin(bob_bit))
}

pub fn bit_to_spin(b: u8) -> i8 {
    if b == 0 {
        1
    } else {
        -1
    }
}

/// Result of one round: output bits plus a digest of the shared randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Play {
    pub a: u8,
    pub b: u8,
    pub shared_digest: u64,
}

/// What a model expects as a round's question.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Bits,
    Directions,
}

/// A strategy for playing rounds. Implementations must be pure functions
/// of the setting and the round context.
pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn inputs(&self) -> InputKind;
    /// Exact per-round resource cost.
    fn resources(&self) -> Resources;
    fn play(&self, setting: &Setting, ctx: &RoundContext) -> Result<Play>;
}

fn want_bits(model: &dyn Model, setting: &Setting) -> Result<(u8, u8)> {
    match setting {
        Setting::Bits { x, y } => Ok((*x, *y)),
        Setting::Directions { .. } => Err(Error::IncompatibleSetting {
            model: model.name().into(),
            reason: "expects binary inputs".into(),
        }),
    }
}

fn want_directions<'s>(
    model: &dyn Model,
    setting: &'s Setting,
) -> Result<(&'s Direction, &'s Direction)> {
    match setting {
        Setting::Directions { a, b } => Ok((a, b)),
        Setting::Bits { .. } => Err(Error::IncompatibleSetting {
            model: model.name().into(),
            reason: "expects measurement directions".into(),
        }),
    }
}

fn coin_digest(ctx: &RoundContext) -> u64 {
    mix64(ctx.seed ^ mix64(ctx.round))
}

pub struct PrBoxModel;

impl Model for PrBoxModel {
    fn name(&self) -> &'static str {
        "pr-box"
    }

    fn description(&self) -> &'static str {
        "ideal PR box: a uniform, b = a xor xy"
    }

    fn inputs(&self) -> InputKind {
        InputKind::Bits
    }

    fn resources(&self) -> Resources {
        Resources {
            bits_communicated: 0,
            prbox_uses: 1,
        }
    }

    fn play(&self, setting: &Setting, ctx: &RoundContext) -> Result<Play> {
        let (x, y) = want_bits(self, setting)?;
        let (a, b) = pr_box_round(x, y, &mut ctx.rng(Stream::PrBox));
        Ok(Play {
            a,
            b,
            shared_digest: coin_digest(ctx),
        })
    }
}

pub struct TonerBaconModel;

impl Model for TonerBaconModel {
    fn name(&self) -> &'static str {
        "toner-bacon"
    }

    fn description(&self) -> &'static str {
        "singlet simulation with shared randomness and one communicated bit"
    }

    fn inputs(&self) -> InputKind {
        InputKind::Directions
    }

    fn resources(&self) -> Resources {
        Resources {
            bits_communicated: 1,
            prbox_uses: 0,
        }
    }

    fn play(&self, setting: &Setting, ctx: &RoundContext) -> Result<Play> {
        let (a, b) = want_directions(self, setting)?;
        let shared = ctx.shared();
        let (sa, sb) = toner_bacon_round(a, b, &shared);
        Ok(Play {
            a: spin_to_bit(sa),
            b: spin_to_bit(sb),
            shared_digest: shared.digest(),
        })
    }
}

pub struct PrBoxSingletModel;

impl Model for PrBoxSingletModel {
    fn name(&self) -> &'static str {
        "prbox-singlet"
    }

    fn description(&self) -> &'static str {
        "singlet simulation with shared randomness and one PR box, no communication"
    }

    fn inputs(&self) -> InputKind {
        InputKind::Directions
    }

    fn resources(&self) -> Resources {
        Resources {
            bits_communicated: 0,
            prbox_uses: 1,
        }
    }

    fn play(&self, setting: &Setting, ctx: &RoundContext) -> Result<Play> {
        let (a, b) = want_directions(self, setting)?;
        let shared = ctx.shared();
        let mut coin = ctx.rng(Stream::PrBox);
        let (sa, sb) = cgmp_prbox_round(a, b, &shared, &mut |x, y| pr_box_round(x, y, &mut coin));
        Ok(Play {
            a: spin_to_bit(sa),
            b: spin_to_bit(sb),
            shared_digest: shared.digest(),
        })
    }
}

/// Local hidden-variable model: each party outputs the sign of its
/// direction against the shared vector, Bob negated.
pub struct LocalSignModel;

impl Model for LocalSignModel {
    fn name(&self) -> &'static str {
        "local-sign"
    }

    fn description(&self) -> &'static str {
        "local model: a = sgn(a.l1), b = -sgn(b.l1)"
    }

    fn inputs(&self) -> InputKind {
        InputKind::Directions
    }

    fn resources(&self) -> Resources {
        Resources::default()
    }

    fn play(&self, setting: &Setting, ctx: &RoundContext) -> Result<Play> {
        let (a, b) = want_directions(self, setting)?;
        let shared = ctx.shared();
        let sa = sgn(dot(&a.components(), &shared.l1));
        let sb = -sgn(dot(&b.components(), &shared.l1));
        Ok(Play {
            a: spin_to_bit(sa),
            b: spin_to_bit(sb),
            shared_digest: shared.digest(),
        })
    }
}

/// Guessing-game strategy: each player answers with their own input.
pub struct OwnInputGuess;

impl Model for OwnInputGuess {
    fn name(&self) -> &'static str {
        "own-input"
    }

    fn description(&self) -> &'static str {
        "each player outputs their own input"
    }

    fn inputs(&self) -> InputKind {
        InputKind::Bits
    }

    fn resources(&self) -> Resources {
        Resources::default()
    }

    fn play(&self, setting: &Setting, ctx: &RoundContext) -> Result<Play> {
        let (x, y) = want_bits(self, setting)?;
        Ok(Play {
            a: x,
            b: y,
            shared_digest: coin_digest(ctx),
        })
    }
}

/// Guessing-game strategy: independent private coin flips.
pub struct RandomGuess;

impl Model for RandomGuess {
    fn name(&self) -> &'static str {
        "random-guess"
    }

    fn description(&self) -> &'static str {
        "each player outputs an independent uniform bit"
    }

    fn inputs(&self) -> InputKind {
        InputKind::Bits
    }

    fn resources(&self) -> Resources {
        Resources::default()
    }

    fn play(&self, setting: &Setting, ctx: &RoundContext) -> Result<Play> {
        want_bits(self, setting)?;
        let a = ctx.rng(Stream::AlicePrivate).random::<bool>() as u8;
        let b = ctx.rng(Stream::BobPrivate).random::<bool>() as u8;
        Ok(Play {
            a,
            b,
            shared_digest: coin_digest(ctx),
        })
    }
}

/// Models addressable by name.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    models: BTreeMap<&'static str, Arc<dyn Model>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(PrBoxModel));
        r.register(Arc::new(TonerBaconModel));
        r.register(Arc::new(PrBoxSingletModel));
        r.register(Arc::new(LocalSignModel));
        r.register(Arc::new(OwnInputGuess));
        r.register(Arc::new(RandomGuess));
        r
    }

    /// Replaces any model with the same name.
    pub fn register(&mut self, model: Arc<dyn Model>) {
        self.models.insert(model.name(), model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Model>> {
        self.models
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.models.keys().copied()
    }
}
