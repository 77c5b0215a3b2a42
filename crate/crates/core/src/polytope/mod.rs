//! Local and no-signaling polytope geometry.
//!
//! Deterministic strategies are the vertices of the local polytope. In the
//! binary scenario the no-signaling polytope adds eight PR-class vertices,
//! one per CHSH-class facet. Membership and decompositions are solved with
//! the exact simplex in [`crate::lp`], so boxes lying on a facet are
//! classified correctly.

mod functional;
mod ns;
mod tripartite;

pub use functional::{chsh_facet_values, BellFunctional};
pub use ns::{affine_dimension, decompose_ns, ns_vertex_list, verify_vertex};
pub use tripartite::{
    cloning_feasible, monogamy_max, CloningVerdict, MonogamyResult, SignalingWitness,
};

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::corr::{Correlation, ExactBox, Scenario};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Outcome, Relation, Sense};
use crate::num::{format_rational, int, Rational, Scalar};

/// Default ceiling on `na^nx * nb^ny`.
pub const DEFAULT_CAP: u128 = 1_000_000;

/// A pair of response functions `x -> a`, `y -> b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicStrategy {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn correlation<T: Scalar>(&self, scenario: Scenario) -> Correlation<T> {
        Correlation::from_fn(scenario, |x, y, a, b| {
            if self.alice[x] == a && self.bob[y] == b {
                T::one()
            } else {
                T::zero()
            }
        })
        .expect("deterministic tables are normalized")
    }

    /// Position in the lexicographic enumeration of `scenario`.
    pub fn index(&self, scenario: Scenario) -> usize {
        let digits = |map: &[usize], base: usize| map.iter().fold(0, |acc, &v| acc * base + v);
        digits(&self.alice, scenario.na) * scenario.nb.pow(scenario.ny as u32)
            + digits(&self.bob, scenario.nb)
    }

    pub fn label(&self) -> String {
        let join = |m: &[usize]| m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("");
        format!("det(a={},b={})", join(&self.alice), join(&self.bob))
    }

    pub fn alice_constant(&self) -> bool {
        self.alice.windows(2).all(|w| w[0] == w[1])
    }

    pub fn bob_constant(&self) -> bool {
        self.bob.windows(2).all(|w| w[0] == w[1])
    }
}

fn strategy_count(scenario: Scenario) -> Option<u128> {
    let a = (scenario.na as u128).checked_pow(scenario.nx as u32)?;
    let b = (scenario.nb as u128).checked_pow(scenario.ny as u32)?;
    a.checked_mul(b)
}

/// All deterministic strategies in lexicographic order of `(alice, bob)`,
/// with input 0 as the most significant digit.
pub fn enumerate_deterministic(
    scenario: Scenario,
    cap: u128,
) -> Result<Vec<DeterministicStrategy>> {
    let needed = strategy_count(scenario).unwrap_or(u128::MAX);
    if needed > cap {
        return Err(Error::CapExceeded { needed, cap });
    }
    let maps = |n_in: usize, n_out: usize| -> Vec<Vec<usize>> {
        let total = n_out.pow(n_in as u32);
        (0..total)
            .map(|mut k| {
                let mut m = vec![0; n_in];
                for slot in m.iter_mut().rev() {
                    *slot = k % n_out;
                    k /= n_out;
                }
                m
            })
            .collect()
    };
    let alice = maps(scenario.nx, scenario.na);
    let bob = maps(scenario.ny, scenario.nb);
    Ok(alice
        .iter()
        .flat_map(|a| {
            bob.iter().map(move |b| DeterministicStrategy {
                alice: a.clone(),
                bob: b.clone(),
            })
        })
        .collect())
}

/// An extreme point used in a decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Vertex {
    Deterministic(DeterministicStrategy),
    /// `½ δ(a⊕b = xy ⊕ αx ⊕ βy ⊕ γ)` in the binary scenario.
    PrClass {
        alpha: u8,
        beta: u8,
        gamma: u8,
    },
}

impl Vertex {
    pub fn correlation(&self, scenario: Scenario) -> ExactBox {
        match self {
            Vertex::Deterministic(s) => s.correlation(scenario),
            Vertex::PrClass { alpha, beta, gamma } => crate::boxes::pr_class(*alpha, *beta, *gamma),
        }
    }

    /// Canonical index: strategies in lexicographic order, then (binary only)
    /// the eight PR-class vertices ordered by `(α, β, γ)`.
    pub fn canonical_index(&self, scenario: Scenario) -> usize {
        match self {
            Vertex::Deterministic(s) => s.index(scenario),
            Vertex::PrClass { alpha, beta, gamma } => {
                16 + 4 * *alpha as usize + 2 * *beta as usize + *gamma as usize
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Vertex::Deterministic(s) => s.label(),
            Vertex::PrClass { alpha, beta, gamma } => {
                format!("pr(alpha={alpha},beta={beta},gamma={gamma})")
            }
        }
    }

    pub fn is_nonlocal(&self) -> bool {
        matches!(self, Vertex::PrClass { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub vertex: Vertex,
    pub weight: Rational,
}

/// Convex weights over vertices; only nonzero weights are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub scenario: Scenario,
    pub components: Vec<Component>,
    /// Largest absolute reconstruction error; exactly zero for LP output.
    pub residual: Rational,
}

impl Decomposition {
    pub(crate) fn from_solution(
        scenario: Scenario,
        vertices: &[Vertex],
        weights: &[Rational],
        target: &ExactBox,
    ) -> Self {
        let components: Vec<Component> = vertices
            .iter()
            .zip(weights)
            .filter(|(_, w)| !w.is_zero())
            .map(|(v, w)| Component {
                vertex: v.clone(),
                weight: w.clone(),
            })
            .collect();
        let mut d = Self {
            scenario,
            components,
            residual: Rational::zero(),
        };
        d.residual = d.residual_against(target);
        d
    }

    pub fn reconstruct(&self) -> ExactBox {
        let boxes: Vec<ExactBox> = self
            .components
            .iter()
            .map(|c| c.vertex.correlation(self.scenario))
            .collect();
        let parts: Vec<(Rational, &ExactBox)> = self
            .components
            .iter()
            .zip(&boxes)
            .map(|(c, b)| (c.weight.clone(), b))
            .collect();
        Correlation::mix(&parts).expect("decomposition weights form a convex combination")
    }

    pub fn residual_against(&self, target: &ExactBox) -> Rational {
        let r = self.reconstruct();
        r.table()
            .iter()
            .zip(target.table())
            .map(|(p, q)| (p - q).abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn total_weight(&self) -> Rational {
        self.components.iter().map(|c| &c.weight).sum()
    }

    pub fn nonlocal_weight(&self) -> Rational {
        self.components
            .iter()
            .filter(|c| c.vertex.is_nonlocal())
            .map(|c| &c.weight)
            .sum()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": 1,
            "vertices": self.components.iter().map(|c| json!({
                "index": c.vertex.canonical_index(self.scenario),
                "label": c.vertex.label(),
                "weight": format_rational(&c.weight),
            })).collect::<Vec<_>>(),
            "residual": format_rational(&self.residual),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalityCertificate {
    pub functional: BellFunctional,
    pub value: Rational,
    pub local_bound: Rational,
    /// `value - local_bound`, strictly positive.
    pub margin: Rational,
}

impl NonlocalityCertificate {
    pub fn to_json(&self) -> Value {
        json!({
            "schema": 1,
            "functional": self.functional.name,
            "value": format_rational(&self.value),
            "value_float": self.value.to_f64(),
            "local_bound": format_rational(&self.local_bound),
            "margin": format_rational(&self.margin),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Locality {
    Local(Decomposition),
    Nonlocal(NonlocalityCertificate),
}

impl Locality {
    pub fn is_local(&self) -> bool {
        matches!(self, Locality::Local(_))
    }
}

/// Decomposes `target` over `vertices` by exact LP. Variables are the
/// vertex weights; one equality per cell. `objective` picks a canonical
/// solution among the feasible ones.
pub(crate) fn decompose_over(
    target: &ExactBox,
    vertices: &[Vertex],
    sense: Sense,
    objective: impl IntoIterator<Item = (usize, Rational)>,
    extra: &[(Vec<(usize, Rational)>, Relation, Rational)],
) -> Option<Vec<Rational>> {
    let s = target.scenario();
    let boxes: Vec<ExactBox> = vertices.iter().map(|v| v.correlation(s)).collect();
    let mut lp = LinearProgram::new(vertices.len(), sense);
    lp.set_objective(objective);
    for (cell, p) in target.table().iter().enumerate() {
        let row = boxes
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.table()[cell].is_zero())
            .map(|(j, b)| (j, b.table()[cell].clone()));
        lp.add_constraint(row, Relation::Eq, p.clone());
    }
    for (row, rel, rhs) in extra {
        lp.add_constraint(row.iter().cloned(), *rel, rhs.clone());
    }
    match lp.solve() {
        Outcome::Optimal(sol) => Some(sol.values),
        Outcome::Infeasible => None,
        Outcome::Unbounded => unreachable!("vertex weights are bounded by normalization"),
    }
}

pub(crate) fn require_no_signaling(corr: &ExactBox) -> Result<()> {
    let (ns, dev) = corr.is_no_signaling(0.0);
    if ns {
        Ok(())
    } else {
        Err(Error::NotNoSignaling(dev))
    }
}

/// Exact locality test: LP feasibility over the deterministic strategies.
/// Nonlocal boxes get a violated facet as certificate: the maximally
/// violated CHSH-class facet in the binary scenario (ties broken by
/// lexicographic `(α,β,γ)`), otherwise a separating functional from a
/// second LP.
pub fn is_local(corr: &ExactBox) -> Result<Locality> {
    is_local_with_cap(corr, DEFAULT_CAP)
}

pub fn is_local_with_cap(corr: &ExactBox, cap: u128) -> Result<Locality> {
    require_no_signaling(corr)?;
    let s = corr.scenario();
    let vertices: Vec<Vertex> = enumerate_deterministic(s, cap)?
        .into_iter()
        .map(Vertex::Deterministic)
        .collect();
    if let Some(w) = decompose_over(corr, &vertices, Sense::Minimize, [], &[]) {
        return Ok(Locality::Local(Decomposition::from_solution(
            s, &vertices, &w, corr,
        )));
    }
    if s.is_binary() {
        let values = chsh_facet_values(corr)?;
        let (best, value) =
            values.iter().enumerate().fold(
                (0, &values[0]),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
        let functional = BellFunctional::chsh_class(
            (best >> 2) as u8,
            ((best >> 1) & 1) as u8,
            (best & 1) as u8,
        );
        let local_bound = int(3);
        debug_assert!(
            *value > local_bound,
            "binary NS box outside the local polytope must violate a CHSH facet"
        );
        return Ok(Locality::Nonlocal(NonlocalityCertificate {
            margin: value - &local_bound,
            value: value.clone(),
            local_bound,
            functional,
        }));
    }
    separating_functional(corr, cap).map(Locality::Nonlocal)
}

/// Finds `c` in `[-1, 1]^cells` maximizing `c·P` subject to `c·D <= 0` for
/// every deterministic `D`.
fn separating_functional(corr: &ExactBox, cap: u128) -> Result<NonlocalityCertificate> {
    let s = corr.scenario();
    let n = s.cells();
    let strategies = enumerate_deterministic(s, cap)?;
    // Variables: u_0..u_n, v_0..v_n with c = u - v.
    let mut lp = LinearProgram::new(2 * n, Sense::Maximize);
    lp.set_objective(
        corr.table()
            .iter()
            .enumerate()
            .flat_map(|(i, p)| [(i, p.clone()), (n + i, -p)]),
    );
    for i in 0..2 * n {
        lp.add_constraint([(i, Rational::one())], Relation::Le, Rational::one());
    }
    for st in &strategies {
        let row = (0..s.nx).flat_map(|x| {
            (0..s.ny).flat_map(move |y| {
                let i = s.index(x, y, st.alice[x], st.bob[y]);
                [(i, Rational::one()), (n + i, -Rational::one())]
            })
        });
        lp.add_constraint(row.collect::<Vec<_>>(), Relation::Le, Rational::zero());
    }
    let sol = lp.solve().optimal().ok_or_else(|| {
        Error::Infeasible("separation LP has the zero functional as a feasible point".into())
    })?;
    let coeffs: Vec<Rational> = (0..n)
        .map(|i| &sol.values[i] - &sol.values[n + i])
        .collect();
    let mut functional = BellFunctional::new("separating", s, coeffs)?;
    let (local_bound, _) = functional.compute_local_bound(cap)?;
    functional.local_bound = Some(local_bound.clone());
    let value = functional.evaluate(corr)?;
    if value <= local_bound {
        return Err(Error::Infeasible(
            "separation LP found no violated functional".into(),
        ));
    }
    Ok(NonlocalityCertificate {
        margin: &value - &local_bound,
        value,
        local_bound,
        functional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes;
    use crate::num::ratio;

    #[test]
    fn strategy_counts() {
        assert_eq!(
            enumerate_deterministic(Scenario::binary(), DEFAULT_CAP)
                .unwrap()
                .len(),
            16
        );
        assert_eq!(
            enumerate_deterministic(Scenario::new(3, 1, 2, 2).unwrap(), DEFAULT_CAP)
                .unwrap()
                .len(),
            16
        );
        assert_eq!(
            enumerate_deterministic(Scenario::new(1, 1, 1, 1).unwrap(), DEFAULT_CAP)
                .unwrap()
                .len(),
            1
        );
        let err =
            enumerate_deterministic(Scenario::new(20, 20, 2, 2).unwrap(), DEFAULT_CAP).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn enumeration_is_lexicographic_and_indexed() {
        let s = Scenario::new(2, 3, 3, 2).unwrap();
        let all = enumerate_deterministic(s, DEFAULT_CAP).unwrap();
        for (i, st) in all.iter().enumerate() {
            assert_eq!(st.index(s), i);
        }
        for w in all.windows(2) {
            assert!((&w[0].alice, &w[0].bob) < (&w[1].alice, &w[1].bob));
        }
    }

    #[test]
    fn uniform_noise_is_local() {
        let Locality::Local(d) = is_local(&boxes::noise()).unwrap() else {
            panic!("noise is local")
        };
        assert_eq!(d.residual, Rational::zero());
        assert_eq!(d.reconstruct(), boxes::noise());
    }

    #[test]
    fn pr_box_certificate() {
        let Locality::Nonlocal(cert) = is_local(&boxes::pr_box()).unwrap() else {
            panic!("PR is nonlocal")
        };
        assert_eq!(cert.value, int(4));
        assert_eq!(cert.margin, int(1));
        assert_eq!(cert.functional, BellFunctional::chsh());
    }

    #[test]
    fn facet_point_is_local() {
        assert!(is_local(&boxes::isotropic(&int(0))).unwrap().is_local());
        assert!(!is_local(&boxes::isotropic(&ratio(1, 100)))
            .unwrap()
            .is_local());
    }

    #[test]
    fn signaling_rejected() {
        assert!(matches!(
            is_local(&boxes::swap_box()),
            Err(Error::NotNoSignaling(_))
        ));
    }

    #[test]
    fn certificate_picks_violated_class_member() {
        let pr = boxes::pr_class(1, 0, 1);
        let Locality::Nonlocal(cert) = is_local(&pr).unwrap() else {
            panic!()
        };
        assert_eq!(cert.functional, BellFunctional::chsh_class(1, 0, 1));
    }

    #[test]
    fn separating_functional_for_three_inputs() {
        // PR box embedded in a 3-input scenario (third input copies input 0).
        let s = Scenario::new(3, 2, 2, 2).unwrap();
        let pr = boxes::pr_box();
        let c = Correlation::from_fn(s, |x, y, a, b| pr.get(x.min(1) * (x % 2), y, a, b).clone())
            .unwrap();
        let Locality::Nonlocal(cert) = is_local(&c).unwrap() else {
            panic!("embedded PR box is nonlocal")
        };
        assert!(cert.margin > Rational::zero());
        assert_eq!(cert.functional.evaluate(&c).unwrap(), cert.value);
        // A local box in the same scenario is accepted.
        assert!(is_local(&Correlation::uniform(s)).unwrap().is_local());
    }
}
