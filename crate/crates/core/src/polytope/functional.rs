use crate::corr::{Correlation, Scenario};
use crate::error::{Error, Result};
use crate::num::{int, Rational, Scalar};

use super::{enumerate_deterministic, DeterministicStrategy};

/// Linear functional `Σ c(x,y,a,b) P(a,b|x,y)` with optional known bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    pub name: String,
    pub scenario: Scenario,
    /// Flat in `(x, y, a, b)` order.
    pub coeffs: Vec<Rational>,
    pub local_bound: Option<Rational>,
    /// `None` when unknown.
    pub quantum_bound: Option<f64>,
    pub ns_bound: Option<Rational>,
}

impl BellFunctional {
    pub fn new(name: impl Into<String>, scenario: Scenario, coeffs: Vec<Rational>) -> Result<Self> {
        if coeffs.len() != scenario.cells() {
            return Err(Error::ShapeMismatch(format!(
                "functional has {} coefficients, scenario has {} cells",
                coeffs.len(),
                scenario.cells()
            )));
        }
        Ok(Self {
            name: name.into(),
            scenario,
            coeffs,
            local_bound: None,
            quantum_bound: None,
            ns_bound: None,
        })
    }

    pub fn zero(scenario: Scenario) -> Self {
        Self::new("zero", scenario, vec![int(0); scenario.cells()]).expect("sizes match")
    }

    /// Success count of the game `a⊕b = xy ⊕ αx ⊕ βy ⊕ γ`. `(0,0,0)` is the
    /// CHSH mark M: local bound 3, quantum 2+√2, no-signaling 4.
    pub fn chsh_class(alpha: u8, beta: u8, gamma: u8) -> Self {
        let s = Scenario::binary();
        let coeffs = s
            .iter_cells()
            .map(|(x, y, a, b)| {
                let target = (x & y) ^ (alpha as usize & x) ^ (beta as usize & y) ^ gamma as usize;
                int((a ^ b == target) as i64)
            })
            .collect();
        let name = if (alpha, beta, gamma) == (0, 0, 0) {
            "chsh".to_string()
        } else {
            format!("chsh[alpha={alpha},beta={beta},gamma={gamma}]")
        };
        Self {
            name,
            scenario: s,
            coeffs,
            local_bound: Some(int(3)),
            quantum_bound: Some(2.0 + std::f64::consts::SQRT_2),
            ns_bound: Some(int(4)),
        }
    }

    pub fn chsh() -> Self {
        Self::chsh_class(0, 0, 0)
    }

    pub fn coefficient(&self, x: usize, y: usize, a: usize, b: usize) -> &Rational {
        &self.coeffs[self.scenario.index(x, y, a, b)]
    }

    /// Checks `local ≤ quantum ≤ ns` among the bounds that are present.
    pub fn bounds_consistent(&self) -> bool {
        let l = self.local_bound.as_ref().map(Scalar::to_f64);
        let n = self.ns_bound.as_ref().map(Scalar::to_f64);
        let ordered = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(lo), Some(hi)) => lo <= hi,
            _ => true,
        };
        match (&self.local_bound, &self.ns_bound) {
            (Some(l), Some(n)) if l > n => return false,
            _ => {}
        }
        ordered(l, self.quantum_bound) && ordered(self.quantum_bound, n)
    }

    pub fn evaluate<T: Scalar>(&self, corr: &Correlation<T>) -> Result<T> {
        if corr.scenario() != self.scenario {
            return Err(Error::ScenarioMismatch(format!(
                "{:?} vs {:?}",
                corr.scenario(),
                self.scenario
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(corr.table())
            .filter(|(c, _)| !num_traits::Zero::is_zero(*c))
            .fold(T::zero(), |acc, (c, p)| {
                acc + T::from_rational(c) * p.clone()
            }))
    }

    /// Value of the functional on one deterministic strategy.
    pub fn on_strategy(&self, st: &DeterministicStrategy) -> Rational {
        let s = self.scenario;
        (0..s.nx)
            .flat_map(|x| (0..s.ny).map(move |y| (x, y)))
            .map(|(x, y)| self.coefficient(x, y, st.alice[x], st.bob[y]))
            .sum()
    }

    /// Maximum over deterministic strategies; the first maximizer in
    /// lexicographic order is returned.
    pub fn compute_local_bound(&self, cap: u128) -> Result<(Rational, DeterministicStrategy)> {
        let mut best: Option<(Rational, DeterministicStrategy)> = None;
        for st in enumerate_deterministic(self.scenario, cap)? {
            let v = self.on_strategy(&st);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, st));
            }
        }
        Ok(best.expect("every scenario has at least one strategy"))
    }
}

/// The eight CHSH-class facet values, indexed by `4α + 2β + γ`.
pub fn chsh_facet_values<T: Scalar>(corr: &Correlation<T>) -> Result<Vec<T>> {
    if !corr.scenario().is_binary() {
        return Err(Error::UnsupportedScenario);
    }
    (0..8u8)
        .map(|k| BellFunctional::chsh_class(k >> 2, (k >> 1) & 1, k & 1).evaluate(corr))
        .collect()
}
