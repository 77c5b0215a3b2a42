//! Key distribution from no-signaling boxes against an individual-attack
//! eavesdropper who manufactures the boxes.
//!
//! Protocol: Alice and Bob feed uniform bits, Alice announces `x`, Bob sets
//! `b′ = b ⊕ xy`. Eve prepares a convex mixture of the 24 no-signaling
//! vertices and learns which vertex each round used. A deterministic vertex
//! reveals a party's bit when that bit does not depend on inputs Eve has
//! not seen; PR-class vertices reveal nothing.

use std::collections::BTreeMap;
use std::io::Write;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::corr::{ExactBox, Party, Scenario};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Outcome, Relation, Sense};
use crate::num::{
    binary_entropy, entropy, format_rational, int, rational_from_f64, rational_to_f64, Rational,
};
use crate::polytope::{
    decompose_over, ns_vertex_list, require_no_signaling, BellFunctional, Decomposition, Vertex,
};
use crate::quantum::{chsh_mark_for_settings, SchmidtState, SettingFamily};

/// Digits of the dyadic grid used when quantum (float) boxes enter the LPs.
pub const FLOAT_BOX_BITS: u32 = 40;

/// `(1+p)/2 · PR + (1−p)/2 · noise` with its parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicBox {
    pub p_nl: Rational,
    pub corr: ExactBox,
}

pub fn isotropic(p: &Rational) -> Result<IsotropicBox> {
    if p.abs() > Rational::one() {
        return Err(Error::OutOfRange(format!(
            "p_nl = {} outside [-1, 1]",
            format_rational(p)
        )));
    }
    Ok(IsotropicBox {
        p_nl: p.clone(),
        corr: crate::boxes::isotropic(p),
    })
}

/// A box after the public announcement of `x`, with Bob's bit replaced by
/// `b′ = b ⊕ xy`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiftedData {
    table: ExactBox,
}

fn require_binary(corr: &ExactBox) -> Result<()> {
    if corr.scenario().is_binary() {
        Ok(())
    } else {
        Err(Error::UnsupportedScenario)
    }
}

pub fn sift(corr: &ExactBox) -> Result<SiftedData> {
    require_binary(corr)?;
    let table = ExactBox::from_fn(Scenario::binary(), |x, y, a, b| {
        corr.get(x, y, a, b ^ (x & y)).clone()
    })?;
    Ok(SiftedData { table })
}

impl SiftedData {
    /// `P(a, b′ | x, y)`.
    pub fn table(&self) -> &ExactBox {
        &self.table
    }

    /// Sifted data is already in key form; sifting again changes nothing.
    pub fn sift(&self) -> SiftedData {
        self.clone()
    }

    pub fn disagreement(&self, x: usize, y: usize) -> Rational {
        self.table.get(x, y, 0, 1) + self.table.get(x, y, 1, 0)
    }

    /// Joint `P(a, b′ | x)` with `y` uniform.
    pub fn channel(&self, x: usize) -> [[Rational; 2]; 2] {
        let half = Rational::new(1.into(), 2.into());
        [0, 1].map(|a| {
            [0, 1].map(|b| (self.table.get(x, 0, a, b) + self.table.get(x, 1, a, b)) * &half)
        })
    }
}

/// `QBER_x = ½ Σ_y P(a ≠ b′ | x, y)`.
pub fn qber(sifted: &SiftedData, x: usize) -> Rational {
    (sifted.disagreement(x, 0) + sifted.disagreement(x, 1)) / int(2)
}

fn mutual_info(joint: &[[f64; 2]; 2]) -> f64 {
    let pa = [joint[0][0] + joint[0][1], joint[1][0] + joint[1][1]];
    let pb = [joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]];
    let flat = [joint[0][0], joint[0][1], joint[1][0], joint[1][1]];
    (entropy(&pa) + entropy(&pb) - entropy(&flat)).max(0.0)
}

/// `I(A; B′ | X)` in bits for uniform `x` and `y`.
pub fn mutual_info_ab(sifted: &SiftedData) -> f64 {
    (0..2)
        .map(|x| {
            mutual_info(
                &sifted
                    .channel(x)
                    .map(|row| row.map(|p| rational_to_f64(&p))),
            )
        })
        .sum::<f64>()
        / 2.0
}

/// Whether Eve, knowing the vertex (and `x` if announced), knows the
/// target party's key bit.
pub fn vertex_known(v: &Vertex, target: Party, announced: Option<usize>) -> bool {
    let Vertex::Deterministic(s) = v else {
        return false;
    };
    match (target, announced) {
        (Party::Alice, None) => s.alice_constant(),
        (Party::Alice, Some(_)) => true,
        (Party::Bob, None) => s.bob_constant(),
        // b′(y) = b(y) ⊕ xy must not depend on y.
        (Party::Bob, Some(x)) => s.bob[0] == s.bob[1] ^ (x & 1),
    }
}

/// Probability that the target key bit is 0, averaged over the inputs Eve
/// does not see.
fn key_bit_zero(corr: &ExactBox, target: Party, announced: Option<usize>) -> Rational {
    let xs: Vec<usize> = announced.map_or(vec![0, 1], |x| vec![x]);
    let mut sum = Rational::zero();
    let mut n = 0;
    for &x in &xs {
        for y in 0..2 {
            n += 1;
            sum += match target {
                Party::Alice => corr.get(x, y, 0, 0) + corr.get(x, y, 0, 1),
                // Without announcement the key bit is the raw b.
                Party::Bob => {
                    let flip = if announced.is_some() { x & y } else { 0 };
                    corr.get(x, y, 0, flip) + corr.get(x, y, 1, flip)
                }
            };
        }
    }
    sum / int(n)
}

fn key_bit_entropy(corr: &ExactBox, target: Party, announced: Option<usize>) -> f64 {
    binary_entropy(rational_to_f64(&key_bit_zero(corr, target, announced)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackDecomposition {
    pub target: Party,
    pub announced: Option<usize>,
    /// Optimal decomposition, with the least nonlocal weight among optima.
    pub decomposition: Decomposition,
    /// Weights over the 24 vertices in canonical order.
    pub weights: Vec<Rational>,
    pub known: Vec<bool>,
    /// Total weight of vertices revealing the key bit (the LP optimum).
    pub known_weight: Rational,
    /// Optimum of the dual LP; equals `known_weight`.
    pub dual_bound: Rational,
    /// Eve's information about the target key bit, in bits.
    pub information: f64,
}

impl AttackDecomposition {
    pub fn nonlocal_weight(&self) -> Rational {
        self.decomposition.nonlocal_weight()
    }

    pub fn to_json(&self) -> Value {
        let s = Scenario::binary();
        json!({
            "schema": 1,
            "target": match self.target { Party::Alice => "alice", Party::Bob => "bob" },
            "announced_x": self.announced,
            "known_weight": format_rational(&self.known_weight),
            "dual_bound": format_rational(&self.dual_bound),
            "information": self.information,
            "residual": format_rational(&self.decomposition.residual),
            "vertices": self.decomposition.components.iter().map(|c| {
                let i = c.vertex.canonical_index(s);
                json!({
                    "index": i,
                    "label": c.vertex.label(),
                    "weight": format_rational(&c.weight),
                    "known": self.known[i],
                })
            }).collect::<Vec<_>>(),
        })
    }
}

/// Dual of `max c·w  s.t.  Σ_j w_j V_j = t, w ≥ 0`, with free multipliers
/// split into positive and negative parts.
fn dual_optimum(target: &ExactBox, vertices: &[Vertex], c: &[Rational]) -> Rational {
    let s = target.scenario();
    let cells = s.cells();
    let boxes: Vec<ExactBox> = vertices.iter().map(|v| v.correlation(s)).collect();
    let mut lp = LinearProgram::new(2 * cells, Sense::Minimize);
    lp.set_objective(
        target
            .table()
            .iter()
            .enumerate()
            .flat_map(|(i, t)| [(i, t.clone()), (cells + i, -t.clone())]),
    );
    for (b, cj) in boxes.iter().zip(c) {
        let row = b
            .table()
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .flat_map(|(i, v)| [(i, v.clone()), (cells + i, -v.clone())]);
        lp.add_constraint(row, Relation::Ge, cj.clone());
    }
    match lp.solve() {
        Outcome::Optimal(sol) => sol.objective,
        _ => unreachable!("the primal is feasible and bounded"),
    }
}

fn attack(corr: &ExactBox, target: Party, announced: Option<usize>) -> Result<AttackDecomposition> {
    require_binary(corr)?;
    require_no_signaling(corr)?;
    let s = corr.scenario();
    let vertices = ns_vertex_list(s)?;
    let known: Vec<bool> = vertices
        .iter()
        .map(|v| vertex_known(v, target, announced))
        .collect();
    let c: Vec<Rational> = known
        .iter()
        .map(|&k| if k { Rational::one() } else { Rational::zero() })
        .collect();
    let objective: Vec<(usize, Rational)> = c
        .iter()
        .cloned()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .collect();

    let first = decompose_over(corr, &vertices, Sense::Maximize, objective.clone(), &[])
        .ok_or_else(|| Error::Infeasible("no-signaling box without vertex decomposition".into()))?;
    let known_weight: Rational = first
        .iter()
        .zip(&known)
        .filter(|(_, &k)| k)
        .map(|(w, _)| w)
        .sum();

    // Among optimal attacks, prefer the least PR-class weight.
    let pin = vec![(objective, Relation::Eq, known_weight.clone())];
    let nonlocal = (0..vertices.len())
        .filter(|&j| vertices[j].is_nonlocal())
        .map(|j| (j, Rational::one()));
    let weights = decompose_over(corr, &vertices, Sense::Minimize, nonlocal, &pin)
        .ok_or_else(|| Error::Infeasible("pinned attack LP".into()))?;

    let dual_bound = dual_optimum(corr, &vertices, &c);
    // I = Σ_v w_v (H(key) − H_v), with weights pooled exactly per vertex
    // bias so fully known or fully hidden groups contribute without
    // cancellation.
    let mut pooled: BTreeMap<Rational, Rational> = BTreeMap::new();
    for (w, v) in weights.iter().zip(&vertices).filter(|(w, _)| !w.is_zero()) {
        *pooled
            .entry(key_bit_zero(&v.correlation(s), target, announced))
            .or_insert_with(Rational::zero) += w;
    }
    let h_key = key_bit_entropy(corr, target, announced);
    let information = pooled
        .iter()
        .map(|(bias, w)| rational_to_f64(w) * (h_key - binary_entropy(rational_to_f64(bias))))
        .sum::<f64>()
        .max(0.0);
    Ok(AttackDecomposition {
        target,
        announced,
        decomposition: Decomposition::from_solution(s, &vertices, &weights, corr),
        weights,
        known,
        known_weight,
        dual_bound,
        information,
    })
}

/// Eve's best individual attack on the target's raw output bit, before any
/// input is announced.
pub fn eve_individual_attack(corr: &ExactBox, target: Party) -> Result<AttackDecomposition> {
    attack(corr, target, None)
}

/// Same, on the key bit after Alice has announced `x`.
pub fn eve_attack_announced(
    corr: &ExactBox,
    target: Party,
    x: usize,
) -> Result<AttackDecomposition> {
    if x > 1 {
        return Err(Error::IndexOutOfRange(format!("announced x = {x}")));
    }
    attack(corr, target, Some(x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoDisturbanceReport {
    /// `I_x(B;E)` after announcement of `x`.
    pub i_be: [f64; 2],
    pub qber: [f64; 2],
    /// `|I_x − 2·QBER_{1−x}|`.
    pub residuals: [f64; 2],
    /// Whether the input is an isotropic box, where the identity must hold.
    pub isotropic: bool,
}

impl InfoDisturbanceReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.residuals.iter().all(|r| *r <= tol)
    }
}

fn isotropic_parameter(corr: &ExactBox) -> Option<Rational> {
    let p = corr.get(0, 0, 0, 0) * int(8) - int(3);
    (p.abs() <= Rational::one() && crate::boxes::isotropic(&p) == *corr).then_some(p)
}

pub fn info_disturbance_check(corr: &ExactBox) -> Result<InfoDisturbanceReport> {
    let sifted = sift(corr)?;
    let i_be = [0, 1].map(|x| eve_attack_announced(corr, Party::Bob, x).map(|a| a.information));
    let i_be = [i_be[0].clone()?, i_be[1].clone()?];
    let qber = [0, 1].map(|x| rational_to_f64(&qber(&sifted, x)));
    let residuals = [0, 1].map(|x| (i_be[x] - 2.0 * qber[1 - x]).abs());
    Ok(InfoDisturbanceReport {
        i_be,
        qber,
        residuals,
        isotropic: isotropic_parameter(corr).is_some(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub p_nl: f64,
    pub qber: [f64; 2],
    pub i_ab: f64,
    pub i_be: f64,
    pub advantage: f64,
}

/// Key-rate figures of any no-signaling binary box.
pub fn key_rate(corr: &ExactBox, p_nl: f64) -> Result<KeyRateReport> {
    let sifted = sift(corr)?;
    let i_ab = mutual_info_ab(&sifted);
    let i_be = eve_individual_attack(corr, Party::Bob)?.information;
    Ok(KeyRateReport {
        p_nl,
        qber: [0, 1].map(|x| rational_to_f64(&qber(&sifted, x))),
        i_ab,
        i_be,
        advantage: i_ab - i_be,
    })
}

fn isotropic_key_rate(p: &Rational) -> Result<KeyRateReport> {
    if p.is_negative() || *p > Rational::one() {
        return Err(Error::OutOfRange(format!(
            "key analysis needs p_nl in [0, 1], got {}",
            format_rational(p)
        )));
    }
    key_rate(&isotropic(p)?.corr, rational_to_f64(p))
}

/// Key rates of isotropic boxes on `grid`, in grid order.
pub fn key_advantage_curve(grid: &[f64]) -> Result<Vec<KeyRateReport>> {
    grid.par_iter()
        .map(|&p| isotropic_key_rate(&rational_from_f64(p)?))
        .collect()
}

/// `steps` evenly spaced points from `pmin` to `pmax` inclusive.
pub fn linear_grid(pmin: f64, pmax: f64, steps: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&pmin) || !(0.0..=1.0).contains(&pmax) || pmin >= pmax {
        return Err(Error::OutOfRange(format!(
            "need 0 <= pmin < pmax <= 1, got [{pmin}, {pmax}]"
        )));
    }
    if steps < 2 {
        return Err(Error::OutOfRange(format!(
            "need at least 2 grid points, got {steps}"
        )));
    }
    Ok((0..steps)
        .map(|i| pmin + (pmax - pmin) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Locates the first sign change of the advantage along `curve` and refines
/// it by bisection on dyadic parameters until the bracket is below `tol`.
pub fn crossing(curve: &[KeyRateReport], tol: f64) -> Result<Option<f64>> {
    let Some(k) = curve
        .windows(2)
        .position(|w| (w[0].advantage > 0.0) != (w[1].advantage > 0.0))
    else {
        return Ok(None);
    };
    let mut lo = rational_from_f64(curve[k].p_nl)?;
    let mut hi = rational_from_f64(curve[k + 1].p_nl)?;
    let lo_positive = curve[k].advantage > 0.0;
    let half = Rational::new(1.into(), 2.into());
    while rational_to_f64(&(&hi - &lo)) > tol {
        let mid = (&lo + &hi) * &half;
        if (isotropic_key_rate(&mid)?.advantage > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(rational_to_f64(&((lo + hi) * half))))
}

/// CSV rows `p,qber,i_ab,i_be,advantage` followed by `crossing=<p|none>`.
/// The `qber` column is the average of both announced inputs.
pub fn write_key_curve_csv<W: Write>(
    mut w: W,
    curve: &[KeyRateReport],
    crossing: Option<f64>,
) -> Result<()> {
    let io = |e: std::io::Error| Error::Parse(e.to_string());
    writeln!(w, "p,qber,i_ab,i_be,advantage").map_err(io)?;
    for r in curve {
        let q = (r.qber[0] + r.qber[1]) / 2.0;
        writeln!(w, "{},{},{},{},{}", r.p_nl, q, r.i_ab, r.i_be, r.advantage).map_err(io)?;
    }
    match crossing {
        Some(p) => writeln!(w, "crossing={p:.6}"),
        None => writeln!(w, "crossing=none"),
    }
    .map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolEntry {
    pub family: String,
    pub chsh_mark: f64,
    pub violates_bell: bool,
    pub key: KeyRateReport,
    /// Positive advantage against the no-signaling eavesdropper.
    pub secure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolComparison {
    pub entries: Vec<ProtocolEntry>,
}

impl ProtocolComparison {
    pub fn to_json(&self) -> Value {
        json!({ "schema": 1, "entries": serde_json::to_value(&self.entries).unwrap_or(Value::Null) })
    }
}

/// Singlet statistics under the BB84 and CHSH-protocol setting families,
/// judged against the same eavesdropper.
pub fn bb84_vs_chsh_comparison() -> Result<ProtocolComparison> {
    let state = SchmidtState::singlet();
    let bell = BellFunctional::chsh();
    let entries = ["bb84", "chsh-protocol"]
        .iter()
        .map(|name| {
            let family = SettingFamily::named(name)?;
            let (mark, float_box) = chsh_mark_for_settings(&state, &family)?;
            let exact = ExactBox::from_float_box(&float_box, FLOAT_BOX_BITS)?;
            let local_bound = bell.local_bound.as_ref().map_or(3.0, rational_to_f64);
            let p_equiv = (mark - 3.0).max(0.0);
            let key = key_rate(&exact, p_equiv)?;
            Ok(ProtocolEntry {
                family: name.to_string(),
                chsh_mark: mark,
                violates_bell: mark > local_bound + 1e-9,
                secure: key.advantage > 0.0,
                key,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProtocolComparison { entries })
}
