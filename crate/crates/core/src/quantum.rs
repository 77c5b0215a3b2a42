//! Correlations of projective spin measurements on two-qubit pure states.
//!
//! Outcome bit 0 stands for spin +1 and bit 1 for −1. Distributions are
//! `[[P(0,0), P(0,1)], [P(1,0), P(1,1)]]`.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::{Correlation, FloatBox, Scenario};
use crate::error::{Error, Result};
use crate::polytope::BellFunctional;
use crate::rng::{self, Stream};

pub type OutcomeDist = [[f64; 2]; 2];

const UNIT_TOL: f64 = 1e-12;

/// Unit vector on the Bloch (Poincaré) sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Direction([f64; 3]);

impl TryFrom<[f64; 3]> for Direction {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Direction::new(v)
    }
}

impl From<Direction> for [f64; 3] {
    fn from(d: Direction) -> Self {
        d.0
    }
}

impl Direction {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NotUnitVector(norm));
        }
        Ok(Self(v))
    }

    /// Normalizes any nonzero vector.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotUnitVector(norm));
        }
        Ok(Self([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Polar angle from +z, azimuth from +x.
    pub fn from_angles(polar: f64, azimuth: f64) -> Self {
        let (sp, cp) = polar.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Self([sp * ca, sp * sa, cp])
    }

    /// Direction at `angle` from +z towards +x.
    pub fn in_xz_plane(angle: f64) -> Self {
        Self::from_angles(angle, 0.0)
    }

    pub fn x() -> Self {
        Self([1.0, 0.0, 0.0])
    }

    pub fn y() -> Self {
        Self([0.0, 1.0, 0.0])
    }

    pub fn z() -> Self {
        Self([0.0, 0.0, 1.0])
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng::unit_vector(rng))
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn neg(&self) -> Self {
        Self([-self.0[0], -self.0[1], -self.0[2]])
    }
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `cos θ |00⟩ + sin θ |11⟩`. With the singlet flag set, Bob's qubit is
/// additionally rotated by `iσ_y`, giving `cos θ |01⟩ − sin θ |10⟩`; at
/// θ = π/4 that is the singlet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchmidtState {
    theta: f64,
    singlet: bool,
}

impl SchmidtState {
    /// Angles up to 1e-9 above π/4 are accepted and clamped, so that
    /// π/4 typed to ten digits works.
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_4 + 1e-9).contains(&theta) {
            return Err(Error::OutOfRange(format!(
                "Schmidt angle {theta} outside [0, π/4]"
            )));
        }
        Ok(Self {
            theta: theta.min(FRAC_PI_4),
            singlet: false,
        })
    }

    /// The singlet: maximally entangled, correlator `−â·b̂`.
    pub fn singlet() -> Self {
        Self {
            theta: FRAC_PI_4,
            singlet: true,
        }
    }

    /// Schmidt state in the singlet frame; `singlet_frame(π/4)` is the singlet.
    pub fn singlet_frame(theta: f64) -> Result<Self> {
        Ok(Self {
            singlet: true,
            ..Self::new(theta)?
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_singlet(&self) -> bool {
        self.singlet && self.is_maximally_entangled()
    }

    pub fn is_maximally_entangled(&self) -> bool {
        (self.theta - FRAC_PI_4).abs() < 1e-9
    }

    /// Bob's direction expressed in the computational frame.
    fn bob_frame(&self, b: &Direction) -> Direction {
        if self.singlet {
            let [x, y, z] = b.0;
            Direction([-x, y, -z])
        } else {
            *b
        }
    }

    /// Joint outcome distribution for measurement directions `a`, `b`.
    pub fn distribution(&self, a: &Direction, b: &Direction) -> OutcomeDist {
        if self.singlet && self.theta == FRAC_PI_4 {
            singlet_correlation(a, b)
        } else {
            schmidt_correlation(self, a, b)
        }
    }

    /// `⟨σ_a ⊗ σ_b⟩`.
    pub fn correlator(&self, a: &Direction, b: &Direction) -> f64 {
        if self.singlet && self.theta == FRAC_PI_4 {
            return -dot(&a.0, &b.0);
        }
        let (a, b) = (a.0, self.bob_frame(b).0);
        a[2] * b[2] + (2.0 * self.theta).sin() * (a[0] * b[0] - a[1] * b[1])
    }

    /// Closed-form maximal CHSH mark, `2 + √(1 + sin² 2θ)`.
    pub fn max_chsh_closed_form(&self) -> f64 {
        let s = (2.0 * self.theta).sin();
        2.0 + (1.0 + s * s).sqrt()
    }
}

fn sign(bit: usize) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `P(a,b) = (1 − s_a s_b â·b̂)/4`.
pub fn singlet_correlation(a: &Direction, b: &Direction) -> OutcomeDist {
    let c = a.dot(b);
    let mut d = [[0.0; 2]; 2];
    for (ia, row) in d.iter_mut().enumerate() {
        for (ib, p) in row.iter_mut().enumerate() {
            *p = (1.0 - sign(ia) * sign(ib) * c) / 4.0;
        }
    }
    d
}

/// `P(a,b) = ¼(1 + s_a⟨A⟩ + s_b⟨B⟩ + s_a s_b⟨AB⟩)` for `cos θ|00⟩ + sin θ|11⟩`.
pub fn schmidt_correlation(state: &SchmidtState, a: &Direction, b: &Direction) -> OutcomeDist {
    let c2 = (2.0 * state.theta).cos();
    let ea = c2 * a.0[2];
    let eb = c2 * state.bob_frame(b).0[2];
    let eab = state.correlator(a, b);
    let mut d = [[0.0; 2]; 2];
    for (ia, row) in d.iter_mut().enumerate() {
        for (ib, p) in row.iter_mut().enumerate() {
            let (sa, sb) = (sign(ia), sign(ib));
            *p = (1.0 + sa * ea + sb * eb + sa * sb * eab) / 4.0;
        }
    }
    d
}

/// Measurement directions per input, with optional output flips per input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingFamily {
    pub name: String,
    pub alice: Vec<Direction>,
    pub bob: Vec<Direction>,
    #[serde(default)]
    pub flip_alice: Vec<bool>,
    #[serde(default)]
    pub flip_bob: Vec<bool>,
}

pub const FAMILY_NAMES: [&str; 3] = ["chsh-optimal", "bb84", "chsh-protocol"];

impl SettingFamily {
    pub fn new(name: impl Into<String>, alice: Vec<Direction>, bob: Vec<Direction>) -> Self {
        let (na, nb) = (alice.len(), bob.len());
        Self {
            name: name.into(),
            alice,
            bob,
            flip_alice: vec![false; na],
            flip_bob: vec![false; nb],
        }
    }

    /// Built-in families:
    /// * `chsh-optimal`: Alice ẑ, x̂; Bob at ±45° in the x–z plane; Alice's
    ///   outputs flipped so singlet data follow the `a⊕b = xy` convention.
    /// * `bb84`: Alice ẑ, x̂; Bob ẑ, x̂; no flips.
    /// * `chsh-protocol`: same directions as `chsh-optimal` with the flip on
    ///   Bob's side instead.
    pub fn named(name: &str) -> Result<Self> {
        let diag_plus = Direction::in_xz_plane(FRAC_PI_4);
        let diag_minus = Direction::in_xz_plane(-FRAC_PI_4);
        match name {
            "chsh-optimal" => {
                let mut f = Self::new(
                    name,
                    vec![Direction::z(), Direction::x()],
                    vec![diag_plus, diag_minus],
                );
                f.flip_alice = vec![true, true];
                Ok(f)
            }
            "bb84" => Ok(Self::new(
                name,
                vec![Direction::z(), Direction::x()],
                vec![Direction::z(), Direction::x()],
            )),
            "chsh-protocol" => {
                let mut f = Self::new(
                    name,
                    vec![Direction::z(), Direction::x()],
                    vec![diag_plus, diag_minus],
                );
                f.flip_bob = vec![true, true];
                Ok(f)
            }
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    fn flips(&self) -> (Vec<bool>, Vec<bool>) {
        let pad =
            |f: &[bool], n: usize| (0..n).map(|i| f.get(i).copied().unwrap_or(false)).collect();
        (
            pad(&self.flip_alice, self.alice.len()),
            pad(&self.flip_bob, self.bob.len()),
        )
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.alice.len(), self.bob.len(), 2, 2)
    }

    /// Box of `state` measured with this family, output flips applied.
    pub fn correlation(&self, state: &SchmidtState) -> Result<FloatBox> {
        let s = self.scenario()?;
        let (fa, fb) = self.flips();
        let dists: Vec<Vec<OutcomeDist>> = self
            .alice
            .iter()
            .map(|a| self.bob.iter().map(|b| state.distribution(a, b)).collect())
            .collect();
        Correlation::from_fn(s, |x, y, a, b| {
            dists[x][y][a ^ fa[x] as usize][b ^ fb[y] as usize]
        })
    }
}

/// CHSH mark of `state` under `family`, with the generated box.
pub fn chsh_mark_for_settings(
    state: &SchmidtState,
    family: &SettingFamily,
) -> Result<(f64, FloatBox)> {
    if family.alice.len() != 2 || family.bob.len() != 2 {
        return Err(Error::ScenarioMismatch(
            "CHSH needs two settings per party".into(),
        ));
    }
    let corr = family.correlation(state)?;
    let m = BellFunctional::chsh().evaluate(&corr)?;
    Ok((m, corr))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    /// Coordinate sweeps per restart.
    pub sweeps: usize,
    /// Extra sweeps spent polishing the best restart.
    pub polish_sweeps: usize,
    pub seed: u64,
    pub max_restarts: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 10_000,
            sweeps: 4,
            polish_sweeps: 400,
            seed: 0,
            max_restarts: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshOptimum {
    pub value: f64,
    pub family: SettingFamily,
    /// Restart that produced the optimum.
    pub restart: usize,
}

/// Parameters: `(polar, azimuth)` for Alice's two directions, then Bob's.
type Params = [f64; 8];

fn params_directions(p: &Params) -> [Direction; 4] {
    [
        Direction::from_angles(p[0], p[1]),
        Direction::from_angles(p[2], p[3]),
        Direction::from_angles(p[4], p[5]),
        Direction::from_angles(p[6], p[7]),
    ]
}

/// `E00 + E01 + E10 − E11`; the mark is `2 + S/2`. Negating Bob's
/// directions flips the sign of S, so maximizing S covers output flips.
fn chsh_s(state: &SchmidtState, p: &Params) -> f64 {
    let [a0, a1, b0, b1] = params_directions(p);
    state.correlator(&a0, &b0) + state.correlator(&a0, &b1) + state.correlator(&a1, &b0)
        - state.correlator(&a1, &b1)
}

fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coordinate-wise golden-section ascent; the bracket half-width shrinks
/// geometrically from `width` each sweep.
fn refine(state: &SchmidtState, mut p: Params, sweeps: usize, mut width: f64) -> (Params, f64) {
    let mut best = chsh_s(state, &p);
    for _ in 0..sweeps {
        for i in 0..p.len() {
            let centre = p[i];
            let (arg, val) = golden_max(
                |t| {
                    let mut q = p;
                    q[i] = t;
                    chsh_s(state, &q)
                },
                centre - width,
                centre + width,
                48,
            );
            if val > best {
                best = val;
                p[i] = arg;
            }
        }
        width = (width * 0.7).max(1e-9);
    }
    (p, best)
}

/// Multi-start search for the largest CHSH mark of `state`. Restart `r`
/// draws its starting directions from the counter-based stream `(seed, r)`,
/// so the result does not depend on the thread count.
pub fn max_chsh(state: &SchmidtState, cfg: &SearchConfig) -> Result<ChshOptimum> {
    if cfg.restarts == 0 || cfg.restarts > cfg.max_restarts {
        return Err(Error::BudgetExceeded(format!(
            "{} restarts requested, allowed 1..={}",
            cfg.restarts, cfg.max_restarts
        )));
    }
    let (restart, params, _) = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, r as u64, Stream::Search);
            let mut p = [0.0; 8];
            for k in 0..4 {
                let v = rng::unit_vector(&mut rng);
                p[2 * k] = v[2].clamp(-1.0, 1.0).acos();
                p[2 * k + 1] = v[1].atan2(v[0]);
            }
            let (p, s) = refine(state, p, cfg.sweeps, PI / 2.0);
            (r, p, s)
        })
        .reduce(
            || (usize::MAX, [0.0; 8], f64::NEG_INFINITY),
            |x, y| {
                if y.2 > x.2 || (y.2 == x.2 && y.0 < x.0) {
                    y
                } else {
                    x
                }
            },
        );
    let (params, s) = refine(state, params, cfg.polish_sweeps, 0.05);
    let [a0, a1, b0, b1] = params_directions(&params);
    let family = SettingFamily::new("optimized", vec![a0, a1], vec![b0, b1]);
    Ok(ChshOptimum {
        value: 2.0 + s / 2.0,
        family,
        restart,
    })
}

/// Largest CHSH mark reachable with quantum correlations, `2 + √2`.
pub fn tsirelson_value() -> f64 {
    2.0 + std::f64::consts::SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use num_complex::Complex64 as C;
    use std::f64::consts::SQRT_2;

    /// `⟨ψ| Π_a ⊗ Π_b |ψ⟩` from explicit 4x4 algebra; independent of the closed forms.
    fn oracle(psi: [C; 4], a: &Direction, b: &Direction) -> OutcomeDist {
        let projector = |n: [f64; 3], s: f64| -> [[C; 2]; 2] {
            // (I + s n·σ)/2
            let half = 0.5;
            [
                [
                    C::new(half * (1.0 + s * n[2]), 0.0),
                    C::new(half * s * n[0], -half * s * n[1]),
                ],
                [
                    C::new(half * s * n[0], half * s * n[1]),
                    C::new(half * (1.0 - s * n[2]), 0.0),
                ],
            ]
        };
        let mut out = [[0.0; 2]; 2];
        for (ia, row) in out.iter_mut().enumerate() {
            for (ib, p) in row.iter_mut().enumerate() {
                let pa = projector(a.components(), sign(ia));
                let pb = projector(b.components(), sign(ib));
                let mut acc = C::new(0.0, 0.0);
                for i in 0..4 {
                    for j in 0..4 {
                        let m = pa[i >> 1][j >> 1] * pb[i & 1][j & 1];
                        acc += psi[i].conj() * m * psi[j];
                    }
                }
                *p = acc.re;
            }
        }
        out
    }

    fn schmidt_vector(theta: f64) -> [C; 4] {
        [
            C::new(theta.cos(), 0.0),
            C::new(0.0, 0.0),
            C::new(0.0, 0.0),
            C::new(theta.sin(), 0.0),
        ]
    }

    fn singlet_vector() -> [C; 4] {
        let h = 1.0 / SQRT_2;
        [
            C::new(0.0, 0.0),
            C::new(h, 0.0),
            C::new(-h, 0.0),
            C::new(0.0, 0.0),
        ]
    }

    fn max_diff(p: &OutcomeDist, q: &OutcomeDist) -> f64 {
        (0..4)
            .map(|k| (p[k >> 1][k & 1] - q[k >> 1][k & 1]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn singlet_examples() {
        let z = Direction::z();
        let d = singlet_correlation(&z, &z);
        assert_eq!(d[0][1] + d[1][0], 1.0);
        let d = singlet_correlation(&z, &Direction::x());
        assert!(d.iter().flatten().all(|&p| p == 0.25));
        let b = Direction::in_xz_plane(3.0 * FRAC_PI_4); // z·b = −1/√2
        let d = singlet_correlation(&z, &b);
        assert!((d[0][0] + d[1][1] - (1.0 + 1.0 / SQRT_2) / 2.0).abs() < 1e-15);
        for (a, b) in [(z, z), (z, b), (Direction::y(), b)] {
            assert!(
                max_diff(
                    &singlet_correlation(&a, &b),
                    &oracle(singlet_vector(), &a, &b)
                ) < 1e-14
            );
        }
    }

    #[test]
    fn not_unit_vector() {
        assert!(matches!(
            Direction::new([1.0, 1.0, 0.0]),
            Err(Error::NotUnitVector(_))
        ));
        assert!(Direction::normalized([0.0, 0.0, 0.0]).is_err());
        let json = "[0.0, 2.0, 0.0]";
        assert!(serde_json::from_str::<Direction>(json).is_err());
    }

    #[test]
    fn schmidt_examples() {
        let mut rng = stream(5, 0, Stream::Settings);
        let product = SchmidtState::new(0.0).unwrap();
        for _ in 0..20 {
            let (a, b) = (Direction::random(&mut rng), Direction::random(&mut rng));
            let d = schmidt_correlation(&product, &a, &b);
            let pa = [d[0][0] + d[0][1], d[1][0] + d[1][1]];
            let pb = [d[0][0] + d[1][0], d[0][1] + d[1][1]];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((d[i][j] - pa[i] * pb[j]).abs() < 1e-14);
                }
            }
        }
        let max = SchmidtState::new(FRAC_PI_4).unwrap();
        let (a, b) = (Direction::in_xz_plane(0.3), Direction::in_xz_plane(1.1));
        let (ac, bc) = (a.components(), b.components());
        assert!((max.correlator(&a, &b) - (ac[2] * bc[2] + ac[0] * bc[0])).abs() < 1e-15);
        let eighth = SchmidtState::new(FRAC_PI_4 / 2.0).unwrap();
        let d = schmidt_correlation(&eighth, &Direction::z(), &Direction::z());
        assert!((d[0][0] + d[1][1] - 1.0).abs() < 1e-15);
        assert!(
            max_diff(
                &d,
                &oracle(
                    schmidt_vector(FRAC_PI_4 / 2.0),
                    &Direction::z(),
                    &Direction::z()
                )
            ) < 1e-14
        );
        assert!(SchmidtState::new(1.0).is_err());
    }

    #[test]
    fn closed_form_matches_matrix_oracle() {
        let mut rng = stream(11, 0, Stream::Settings);
        for _ in 0..10_000 {
            let theta = rng.random::<f64>() * FRAC_PI_4;
            let (a, b) = (Direction::random(&mut rng), Direction::random(&mut rng));
            let state = SchmidtState::new(theta).unwrap();
            let diff = max_diff(
                &schmidt_correlation(&state, &a, &b),
                &oracle(schmidt_vector(theta), &a, &b),
            );
            assert!(diff < 1e-12, "theta={theta} diff={diff}");
        }
    }

    #[test]
    fn singlet_frame_matches_matrix_oracle() {
        // cos θ |01⟩ − sin θ |10⟩
        let frame_vector = |t: f64| {
            [
                C::new(0.0, 0.0),
                C::new(t.cos(), 0.0),
                C::new(-t.sin(), 0.0),
                C::new(0.0, 0.0),
            ]
        };
        let mut rng = stream(12, 0, Stream::Settings);
        for _ in 0..10_000 {
            let theta = rng.random::<f64>() * FRAC_PI_4;
            let (a, b) = (Direction::random(&mut rng), Direction::random(&mut rng));
            let state = SchmidtState::singlet_frame(theta).unwrap();
            let diff = max_diff(
                &state.distribution(&a, &b),
                &oracle(frame_vector(theta), &a, &b),
            );
            assert!(diff < 1e-12, "theta={theta} diff={diff}");
        }
        let s = SchmidtState::singlet_frame(0.7853981634).unwrap();
        assert!(s.is_singlet());
        let (m, _) =
            chsh_mark_for_settings(&s, &SettingFamily::named("chsh-optimal").unwrap()).unwrap();
        assert!((m - tsirelson_value()).abs() < 1e-9);
        assert!(SchmidtState::new(FRAC_PI_4 + 1e-8).is_err());
    }

    fn rotate(axis: [f64; 3], angle: f64, v: [f64; 3]) -> [f64; 3] {
        // Rodrigues' formula.
        let (s, c) = angle.sin_cos();
        let k = axis;
        let kv = dot(&k, &v);
        let cross = [
            k[1] * v[2] - k[2] * v[1],
            k[2] * v[0] - k[0] * v[2],
            k[0] * v[1] - k[1] * v[0],
        ];
        [0, 1, 2].map(|i| v[i] * c + cross[i] * s + k[i] * kv * (1.0 - c))
    }

    #[test]
    fn singlet_rotation_invariance() {
        let mut rng = stream(13, 0, Stream::Settings);
        for _ in 0..100 {
            let (a, b) = (Direction::random(&mut rng), Direction::random(&mut rng));
            let axis = rng::unit_vector(&mut rng);
            let angle = rng.random::<f64>() * 2.0 * PI;
            let ra = Direction::normalized(rotate(axis, angle, a.components())).unwrap();
            let rb = Direction::normalized(rotate(axis, angle, b.components())).unwrap();
            assert!(max_diff(&singlet_correlation(&a, &b), &singlet_correlation(&ra, &rb)) < 1e-12);
        }
    }

    #[test]
    fn named_family_marks() {
        let singlet = SchmidtState::singlet();
        for name in ["chsh-optimal", "chsh-protocol"] {
            let (m, corr) =
                chsh_mark_for_settings(&singlet, &SettingFamily::named(name).unwrap()).unwrap();
            assert!((m - tsirelson_value()).abs() < 1e-9, "{name}: {m}");
            assert!(corr.is_no_signaling(1e-12).0);
        }
        let (m, _) =
            chsh_mark_for_settings(&singlet, &SettingFamily::named("bb84").unwrap()).unwrap();
        assert!((m - 2.0).abs() < 1e-12);
        assert!(matches!(
            SettingFamily::named("nope"),
            Err(Error::UnknownFamily(_))
        ));
    }

    #[test]
    fn product_state_respects_local_bound() {
        let mut rng = stream(17, 0, Stream::Settings);
        let product = SchmidtState::new(0.0).unwrap();
        for _ in 0..1000 {
            let mut f = SettingFamily::new(
                "random",
                vec![Direction::random(&mut rng), Direction::random(&mut rng)],
                vec![Direction::random(&mut rng), Direction::random(&mut rng)],
            );
            f.flip_bob = vec![rng.random(), rng.random()];
            let (m, _) = chsh_mark_for_settings(&product, &f).unwrap();
            assert!(m <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn family_json_round_trip() {
        let f = SettingFamily::named("chsh-protocol").unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: SettingFamily = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn search_matches_closed_form() {
        let cfg = SearchConfig {
            restarts: 2000,
            ..SearchConfig::default()
        };
        for theta in [FRAC_PI_4, 0.0, FRAC_PI_4 / 2.0] {
            let state = SchmidtState::new(theta).unwrap();
            let opt = max_chsh(&state, &cfg).unwrap();
            let target = state.max_chsh_closed_form();
            assert!(
                (opt.value - target).abs() < 1e-6,
                "theta={theta}: {} vs {target}",
                opt.value
            );
            let (m, _) = chsh_mark_for_settings(&state, &opt.family).unwrap();
            assert!((m - opt.value).abs() < 1e-12);
        }
        assert!(
            (SchmidtState::new(FRAC_PI_4 / 2.0)
                .unwrap()
                .max_chsh_closed_form()
                - (2.0 + 1.5f64.sqrt()))
            .abs()
                < 1e-15
        );
        let singlet = max_chsh(&SchmidtState::singlet(), &cfg).unwrap();
        assert!((singlet.value - tsirelson_value()).abs() < 1e-6);
    }

    #[test]
    fn search_budget_and_determinism() {
        let state = SchmidtState::new(0.4).unwrap();
        let cfg = SearchConfig {
            restarts: 0,
            ..SearchConfig::default()
        };
        assert!(matches!(
            max_chsh(&state, &cfg),
            Err(Error::BudgetExceeded(_))
        ));
        let cfg = SearchConfig {
            restarts: 64,
            seed: 3,
            ..SearchConfig::default()
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| max_chsh(&state, &cfg));
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| max_chsh(&state, &cfg));
        assert_eq!(one.unwrap(), many.unwrap());
    }
}
