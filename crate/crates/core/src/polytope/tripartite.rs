//! Three-party no-signaling LPs: CHSH monogamy and the no-cloning check.
//!
//! Variables are the 64 probabilities `P(a,b,c|x,y,z)` of the all-binary
//! tripartite scenario. Every pair marginal must be independent of the
//! third party's input, which also makes every single-party marginal
//! independent of both other inputs.

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::corr::{tripartite_index, TripartiteCorrelation};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Outcome, Relation, Sense};
use crate::num::{format_rational, int, Rational};

const IN: [usize; 3] = [2; 3];
const OUT: [usize; 3] = [2; 3];

fn var(xyz: [usize; 3], abc: [usize; 3]) -> usize {
    tripartite_index(IN, OUT, xyz, abc)
}

fn bits3() -> impl Iterator<Item = [usize; 3]> {
    (0..8).map(|k| [k >> 2, (k >> 1) & 1, k & 1])
}

/// CHSH mark between Alice and party `partner` (1 = Bob, 2 = Charly), read
/// with the remaining party's input fixed to 0.
fn chsh_row(partner: usize) -> Vec<(usize, Rational)> {
    let mut row = Vec::new();
    for x in 0..2 {
        for w in 0..2 {
            for abc in bits3() {
                if abc[0] ^ abc[partner] == x & w {
                    let mut xyz = [x, 0, 0];
                    xyz[partner] = w;
                    row.push((var(xyz, abc), Rational::one()));
                }
            }
        }
    }
    row
}

fn no_signaling_program(sense: Sense) -> LinearProgram {
    let mut lp = LinearProgram::new(64, sense);
    for xyz in bits3() {
        lp.add_constraint(
            bits3().map(|abc| (var(xyz, abc), Rational::one())),
            Relation::Eq,
            Rational::one(),
        );
    }
    // Pair (i, j) marginal must not depend on the input of k.
    for (i, j, k) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
        for u in 0..2 {
            for v in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        let mut row = Vec::with_capacity(4);
                        for r in 0..2 {
                            let mut xyz = [0; 3];
                            let mut abc = [0; 3];
                            xyz[i] = u;
                            xyz[j] = v;
                            abc[i] = p;
                            abc[j] = q;
                            abc[k] = r;
                            xyz[k] = 0;
                            row.push((var(xyz, abc), Rational::one()));
                            xyz[k] = 1;
                            row.push((var(xyz, abc), -Rational::one()));
                        }
                        lp.add_constraint(row, Relation::Eq, Rational::zero());
                    }
                }
            }
        }
    }
    lp
}

fn witness(values: Vec<Rational>) -> TripartiteCorrelation<Rational> {
    TripartiteCorrelation::new(IN, OUT, values, 0.0).expect("LP solutions satisfy normalization")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonogamyResult {
    pub m_ab: Rational,
    pub max_m_ac: Rational,
    /// A tripartite box attaining the optimum.
    pub witness: TripartiteCorrelation<Rational>,
}

/// Largest Alice–Charly CHSH mark over tripartite no-signaling boxes whose
/// Alice–Bob mark is at least `m_ab`.
pub fn monogamy_max(m_ab: &Rational) -> Result<MonogamyResult> {
    if *m_ab > int(4) {
        return Err(Error::InfeasibleTarget(format_rational(m_ab)));
    }
    let mut lp = no_signaling_program(Sense::Maximize);
    lp.set_objective(chsh_row(2));
    lp.add_constraint(chsh_row(1), Relation::Ge, m_ab.clone());
    match lp.solve() {
        Outcome::Optimal(sol) => Ok(MonogamyResult {
            m_ab: m_ab.clone(),
            max_m_ac: sol.objective,
            witness: witness(sol.values),
        }),
        Outcome::Infeasible => Err(Error::InfeasibleTarget(format_rational(m_ab))),
        Outcome::Unbounded => unreachable!("probabilities are bounded"),
    }
}

/// Arithmetic consequence of perfect PR correlation of Alice with both Bob
/// and Charly: `b⊕c = x(y⊕z)`, so at `y=1, z=0` Bob and Charly jointly read
/// Alice's input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalingWitness {
    pub y: usize,
    pub z: usize,
    /// `b⊕c` for `x = 0, 1`, identical for both values of `a`.
    pub parity_by_x: [usize; 2],
    pub signals: bool,
}

impl SignalingWitness {
    fn derive(y: usize, z: usize) -> Self {
        let mut parity_by_x = [0; 2];
        for x in 0..2 {
            let parities: Vec<usize> = (0..2)
                .map(|a| {
                    let b = a ^ (x & y);
                    let c = a ^ (x & z);
                    b ^ c
                })
                .collect();
            debug_assert!(parities.windows(2).all(|w| w[0] == w[1]));
            parity_by_x[x] = parities[0];
        }
        Self {
            y,
            z,
            parity_by_x,
            signals: parity_by_x[0] != parity_by_x[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloningVerdict {
    pub m_ab: Rational,
    pub m_ac: Rational,
    pub feasible: bool,
    pub witness: Option<TripartiteCorrelation<Rational>>,
    /// Present when both targets demand a perfect PR correlation.
    pub signaling_witness: Option<SignalingWitness>,
}

impl CloningVerdict {
    pub fn to_json(&self) -> Value {
        json!({
            "schema": 1,
            "m_ab": format_rational(&self.m_ab),
            "m_ac": format_rational(&self.m_ac),
            "feasible": self.feasible,
            "signaling_witness": self.signaling_witness.as_ref().map(|w| json!({
                "y": w.y,
                "z": w.z,
                "b_xor_c_by_x": w.parity_by_x,
                "signals": w.signals,
            })),
        })
    }
}

/// Is there a tripartite no-signaling box with `M_AB ≥ m_ab` and `M_AC ≥ m_ac`?
pub fn cloning_feasible(m_ab: &Rational, m_ac: &Rational) -> CloningVerdict {
    let mut lp = no_signaling_program(Sense::Minimize);
    lp.add_constraint(chsh_row(1), Relation::Ge, m_ab.clone());
    lp.add_constraint(chsh_row(2), Relation::Ge, m_ac.clone());
    let outcome = lp.solve();
    let four = int(4);
    let signaling_witness =
        (*m_ab >= four && *m_ac >= four).then(|| SignalingWitness::derive(1, 0));
    CloningVerdict {
        m_ab: m_ab.clone(),
        m_ac: m_ac.clone(),
        feasible: outcome.is_feasible(),
        witness: outcome.optimal().map(|s| witness(s.values)),
        signaling_witness,
    }
}
