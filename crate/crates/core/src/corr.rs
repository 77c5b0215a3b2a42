//! Conditional probability tables `P(a,b|x,y)` over finite alphabets.
//!
//! Tables are stored flat in `(x, y, a, b)` order, settings-major, so each
//! `(x, y)` block of `na * nb` cells is one normalized distribution.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::num::{format_rational, parse_rational, Mode, Rational, Scalar, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
    pub nb: usize,
}

impl Scenario {
    pub fn new(nx: usize, ny: usize, na: usize, nb: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || na == 0 || nb == 0 {
            return Err(Error::ShapeMismatch(format!(
                "alphabet sizes must be positive, got ({nx},{ny},{na},{nb})"
            )));
        }
        Ok(Self { nx, ny, na, nb })
    }

    pub const fn binary() -> Self {
        Self {
            nx: 2,
            ny: 2,
            na: 2,
            nb: 2,
        }
    }

    pub fn is_binary(&self) -> bool {
        *self == Self::binary()
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.na * self.nb
    }

    pub fn settings(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.ny + y) * self.na + a) * self.nb + b
    }

    /// Inverse of [`Scenario::index`].
    pub fn coords(&self, i: usize) -> (usize, usize, usize, usize) {
        let b = i % self.nb;
        let a = (i / self.nb) % self.na;
        let y = (i / (self.nb * self.na)) % self.ny;
        let x = i / (self.nb * self.na * self.ny);
        (x, y, a, b)
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        (0..self.cells()).map(|i| self.coords(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation<T> {
    scenario: Scenario,
    table: Vec<T>,
}

pub type ExactBox = Correlation<Rational>;
pub type FloatBox = Correlation<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalReport {
    pub party: Party,
    pub input: usize,
    /// Output distribution at the other party's input 0.
    pub distribution: Vec<f64>,
    /// Largest change of any output probability across the other party's inputs.
    pub max_deviation: f64,
}

impl<T: Scalar> Correlation<T> {
    /// Validates a flat `(x, y, a, b)` table. Float mode allows `tol` slack in
    /// normalization; rational mode requires exact sums.
    pub fn new(scenario: Scenario, table: Vec<T>, tol: f64) -> Result<Self> {
        if table.len() != scenario.cells() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                scenario.cells(),
                table.len()
            )));
        }
        for (i, v) in table.iter().enumerate() {
            if v.is_negative() {
                let (x, y, a, b) = scenario.coords(i);
                return Err(Error::NegativeEntry {
                    x,
                    y,
                    a,
                    b,
                    value: v.to_f64(),
                });
            }
        }
        let block = scenario.na * scenario.nb;
        for (s, chunk) in table.chunks(block).enumerate() {
            let sum = chunk.iter().cloned().fold(T::zero(), |acc, v| acc + v);
            if !sum.near(&T::one(), tol) {
                return Err(Error::NotNormalized {
                    x: s / scenario.ny,
                    y: s % scenario.ny,
                    sum: sum.to_f64(),
                });
            }
        }
        Ok(Self { scenario, table })
    }

    /// Validates a nested `[x][y][a][b]` table.
    pub fn from_nested(
        scenario: Scenario,
        nested: Vec<Vec<Vec<Vec<T>>>>,
        tol: f64,
    ) -> Result<Self> {
        let shape = |what: &str, got: usize, want: usize| {
            Error::ShapeMismatch(format!("{what} dimension is {got}, expected {want}"))
        };
        if nested.len() != scenario.nx {
            return Err(shape("x", nested.len(), scenario.nx));
        }
        let mut flat = Vec::with_capacity(scenario.cells());
        for by_y in nested {
            if by_y.len() != scenario.ny {
                return Err(shape("y", by_y.len(), scenario.ny));
            }
            for by_a in by_y {
                if by_a.len() != scenario.na {
                    return Err(shape("a", by_a.len(), scenario.na));
                }
                for by_b in by_a {
                    if by_b.len() != scenario.nb {
                        return Err(shape("b", by_b.len(), scenario.nb));
                    }
                    flat.extend(by_b);
                }
            }
        }
        Self::new(scenario, flat, tol)
    }

    /// Builds a table from a closed form and validates it.
    pub fn from_fn(
        scenario: Scenario,
        mut f: impl FnMut(usize, usize, usize, usize) -> T,
    ) -> Result<Self> {
        let table = scenario
            .iter_cells()
            .map(|(x, y, a, b)| f(x, y, a, b))
            .collect();
        Self::new(scenario, table, DEFAULT_TOL)
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let v = T::one() / T::from_usize(scenario.na * scenario.nb);
        Self {
            scenario,
            table: vec![v; scenario.cells()],
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn mode(&self) -> Mode {
        T::MODE
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> &T {
        &self.table[self.scenario.index(x, y, a, b)]
    }

    pub fn nested(&self) -> Vec<Vec<Vec<Vec<T>>>> {
        let s = self.scenario;
        (0..s.nx)
            .map(|x| {
                (0..s.ny)
                    .map(|y| {
                        (0..s.na)
                            .map(|a| (0..s.nb).map(|b| self.get(x, y, a, b).clone()).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `P(out | input, other_input)` for one party.
    pub fn marginal_at(&self, party: Party, input: usize, other_input: usize) -> Vec<T> {
        let s = self.scenario;
        match party {
            Party::Alice => (0..s.na)
                .map(|a| {
                    (0..s.nb).fold(T::zero(), |acc, b| {
                        acc + self.get(input, other_input, a, b).clone()
                    })
                })
                .collect(),
            Party::Bob => (0..s.nb)
                .map(|b| {
                    (0..s.na).fold(T::zero(), |acc, a| {
                        acc + self.get(other_input, input, a, b).clone()
                    })
                })
                .collect(),
        }
    }

    pub fn marginal(&self, party: Party, input: usize) -> Result<(Vec<T>, MarginalReport)> {
        let s = self.scenario;
        let (n_in, n_other) = match party {
            Party::Alice => (s.nx, s.ny),
            Party::Bob => (s.ny, s.nx),
        };
        if input >= n_in {
            return Err(Error::IndexOutOfRange(format!(
                "{party:?} input {input} (alphabet size {n_in})"
            )));
        }
        let reference = self.marginal_at(party, input, 0);
        let mut max_deviation = 0.0f64;
        for other in 1..n_other {
            let m = self.marginal_at(party, input, other);
            for (p, q) in m.iter().zip(&reference) {
                max_deviation = max_deviation.max((p.clone() - q.clone()).to_f64().abs());
            }
        }
        let report = MarginalReport {
            party,
            input,
            distribution: reference.iter().map(Scalar::to_f64).collect(),
            max_deviation,
        };
        Ok((reference, report))
    }

    /// Largest dependence of either party's marginal on the far input.
    pub fn signaling_deviation(&self) -> f64 {
        let s = self.scenario;
        let alice = (0..s.nx).map(|x| {
            self.marginal(Party::Alice, x)
                .map(|(_, r)| r.max_deviation)
                .unwrap_or(0.0)
        });
        let bob = (0..s.ny).map(|y| {
            self.marginal(Party::Bob, y)
                .map(|(_, r)| r.max_deviation)
                .unwrap_or(0.0)
        });
        alice.chain(bob).fold(0.0, f64::max)
    }

    /// No-signaling test; exact in rational mode, `tol`-tolerant in float mode.
    /// Returns the verdict and the worst-case marginal deviation.
    pub fn is_no_signaling(&self, tol: f64) -> (bool, f64) {
        let s = self.scenario;
        let mut ok = true;
        for (party, n_in, n_other) in [(Party::Alice, s.nx, s.ny), (Party::Bob, s.ny, s.nx)] {
            for input in 0..n_in {
                let reference = self.marginal_at(party, input, 0);
                for other in 1..n_other {
                    let m = self.marginal_at(party, input, other);
                    ok &= m.iter().zip(&reference).all(|(p, q)| p.near(q, tol));
                }
            }
        }
        (ok, self.signaling_deviation())
    }

    /// Entrywise convex combination. Weights must be nonnegative and sum to 1
    /// (exactly in rational mode).
    pub fn mix(parts: &[(T, &Correlation<T>)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::WeightSumInvalid(0.0))?
            .1
            .scenario;
        let mut total = T::zero();
        for (w, c) in parts {
            if c.scenario != first {
                return Err(Error::ScenarioMismatch(format!(
                    "{:?} vs {:?}",
                    c.scenario, first
                )));
            }
            if w.is_negative() {
                return Err(Error::WeightSumInvalid(w.to_f64()));
            }
            total = total + w.clone();
        }
        if !total.near(&T::one(), DEFAULT_TOL) {
            return Err(Error::WeightSumInvalid(total.to_f64()));
        }
        let table = (0..first.cells())
            .map(|i| {
                parts.iter().fold(T::zero(), |acc, (w, c)| {
                    acc + w.clone() * c.table[i].clone()
                })
            })
            .collect();
        Ok(Self {
            scenario: first,
            table,
        })
    }

    pub fn to_float(&self) -> FloatBox {
        Correlation {
            scenario: self.scenario,
            table: self.table.iter().map(Scalar::to_f64).collect(),
        }
    }

    /// Largest absolute cell difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.scenario != other.scenario {
            return Err(Error::ScenarioMismatch(format!(
                "{:?} vs {:?}",
                self.scenario, other.scenario
            )));
        }
        Ok(self
            .table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| (p.clone() - q.clone()).to_f64().abs())
            .fold(0.0, f64::max))
    }

    /// Applies an elementary relabeling of the binary scenario.
    pub fn relabel(&self, sym: Relabeling) -> Result<Self> {
        if !self.scenario.is_binary() {
            return Err(Error::UnsupportedScenario);
        }
        let s = self.scenario;
        let table = s
            .iter_cells()
            .map(|(x, y, a, b)| {
                // New box at (x,y,a,b) reads the old box at the preimage.
                let ox = x ^ sym.flip_x as usize;
                let oy = y ^ sym.flip_y as usize;
                let oa = a ^ sym.flip_a as usize ^ (sym.flip_a_if_x as usize & x);
                let ob = b ^ sym.flip_b as usize ^ (sym.flip_b_if_y as usize & y);
                self.get(ox, oy, oa, ob).clone()
            })
            .collect();
        Ok(Self { scenario: s, table })
    }
}

/// Input and output bit flips of the binary scenario. Output flips may be
/// conditioned on the party's own input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Relabeling {
    pub flip_x: bool,
    pub flip_y: bool,
    pub flip_a: bool,
    pub flip_b: bool,
    pub flip_a_if_x: bool,
    pub flip_b_if_y: bool,
}

impl Relabeling {
    pub fn all() -> impl Iterator<Item = Relabeling> {
        (0u8..64).map(|m| Relabeling {
            flip_x: m & 1 != 0,
            flip_y: m & 2 != 0,
            flip_a: m & 4 != 0,
            flip_b: m & 8 != 0,
            flip_a_if_x: m & 16 != 0,
            flip_b_if_y: m & 32 != 0,
        })
    }
}

impl ExactBox {
    /// Exact rational copy of a float box. Binary-scenario boxes are
    /// rebuilt from rounded marginals and `P(0,0|x,y)` so the result is
    /// exactly no-signaling whenever the input is within float noise of it.
    pub fn from_float_box(f: &FloatBox, bits: u32) -> Result<Self> {
        use crate::num::rational_from_f64_rounded as round;
        let s = f.scenario;
        if s.is_binary() {
            let pa: Vec<Rational> = (0..2)
                .map(|x| round(f.marginal_at(Party::Alice, x, 0)[0], bits))
                .collect::<Result<_>>()?;
            let pb: Vec<Rational> = (0..2)
                .map(|y| round(f.marginal_at(Party::Bob, y, 0)[0], bits))
                .collect::<Result<_>>()?;
            let mut table = Vec::with_capacity(16);
            for x in 0..2 {
                for y in 0..2 {
                    let p00 = round(*f.get(x, y, 0, 0), bits)?;
                    let p01 = &pa[x] - &p00;
                    let p10 = &pb[y] - &p00;
                    let p11 = Rational::from_integer(1.into()) - &pa[x] - &pb[y] + &p00;
                    table.extend([p00, p01, p10, p11]);
                }
            }
            return Self::new(s, table, 0.0);
        }
        let mut table: Vec<Rational> = f
            .table
            .iter()
            .map(|&v| round(v, bits))
            .collect::<Result<_>>()?;
        // Put the rounding slack of each setting on its largest cell.
        let block = s.na * s.nb;
        for chunk in table.chunks_mut(block) {
            let sum: Rational = chunk.iter().sum();
            let (imax, _) = chunk
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1))
                .expect("nonempty block");
            chunk[imax] = &chunk[imax] + (Rational::from_integer(1.into()) - sum);
        }
        Self::new(s, table, 0.0)
    }
}

/// Per-cell counts of observed rounds, convertible to an empirical box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCounts {
    scenario: Scenario,
    counts: Vec<u64>,
}

impl SampleCounts {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            counts: vec![0; scenario.cells()],
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn record(&mut self, x: usize, y: usize, a: usize, b: usize) -> Result<()> {
        let s = self.scenario;
        if x >= s.nx || y >= s.ny || a >= s.na || b >= s.nb {
            return Err(Error::IndexOutOfRange(format!(
                "round ({x},{y},{a},{b}) outside {s:?}"
            )));
        }
        self.counts[s.index(x, y, a, b)] += 1;
        Ok(())
    }

    pub fn add_cell(&mut self, cell: usize, n: u64) {
        self.counts[cell] += n;
    }

    pub fn merge(&mut self, other: &SampleCounts) {
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
    }

    pub fn cell(&self, x: usize, y: usize, a: usize, b: usize) -> u64 {
        self.counts[self.scenario.index(x, y, a, b)]
    }

    pub fn setting_total(&self, x: usize, y: usize) -> u64 {
        let block = self.scenario.na * self.scenario.nb;
        let start = (x * self.scenario.ny + y) * block;
        self.counts[start..start + block].iter().sum()
    }

    pub fn per_setting_totals(&self) -> Vec<u64> {
        let s = self.scenario;
        (0..s.nx)
            .flat_map(|x| (0..s.ny).map(move |y| (x, y)))
            .map(|(x, y)| self.setting_total(x, y))
            .collect()
    }

    /// Empirical conditional frequencies plus the per-setting round counts.
    pub fn to_correlation(&self) -> Result<(FloatBox, Vec<u64>)> {
        let s = self.scenario;
        let totals = self.per_setting_totals();
        for (i, &n) in totals.iter().enumerate() {
            if n == 0 {
                return Err(Error::MissingSetting {
                    x: i / s.ny,
                    y: i % s.ny,
                });
            }
        }
        let block = s.na * s.nb;
        let table = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 / totals[i / block] as f64)
            .collect();
        Ok((Correlation::new(s, table, DEFAULT_TOL)?, totals))
    }
}

/// Empirical box from `(x, y, a, b)` rounds.
pub fn from_samples(
    scenario: Scenario,
    rounds: impl IntoIterator<Item = (usize, usize, usize, usize)>,
) -> Result<(FloatBox, Vec<u64>)> {
    let mut counts = SampleCounts::new(scenario);
    for (x, y, a, b) in rounds {
        counts.record(x, y, a, b)?;
    }
    counts.to_correlation()
}

/// Three-party box `P(a,b,c|x,y,z)`, flat in `(x,y,z,a,b,c)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteCorrelation<T> {
    inputs: [usize; 3],
    outputs: [usize; 3],
    table: Vec<T>,
}

impl<T: Scalar> TripartiteCorrelation<T> {
    pub fn new(inputs: [usize; 3], outputs: [usize; 3], table: Vec<T>, tol: f64) -> Result<Self> {
        if inputs.iter().chain(&outputs).any(|&n| n == 0) {
            return Err(Error::ShapeMismatch(
                "alphabet sizes must be positive".into(),
            ));
        }
        let block: usize = outputs.iter().product();
        let settings: usize = inputs.iter().product();
        if table.len() != block * settings {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                block * settings,
                table.len()
            )));
        }
        if let Some(i) = table.iter().position(Scalar::is_negative) {
            let (x, y, _, a, b, _) = tripartite_coords(inputs, outputs, i);
            return Err(Error::NegativeEntry {
                x,
                y,
                a,
                b,
                value: table[i].to_f64(),
            });
        }
        for (s, chunk) in table.chunks(block).enumerate() {
            let sum = chunk.iter().cloned().fold(T::zero(), |acc, v| acc + v);
            if !sum.near(&T::one(), tol) {
                return Err(Error::NotNormalized {
                    x: s / (inputs[1] * inputs[2]),
                    y: (s / inputs[2]) % inputs[1],
                    sum: sum.to_f64(),
                });
            }
        }
        Ok(Self {
            inputs,
            outputs,
            table,
        })
    }

    pub fn index(&self, xyz: [usize; 3], abc: [usize; 3]) -> usize {
        tripartite_index(self.inputs, self.outputs, xyz, abc)
    }

    pub fn get(&self, xyz: [usize; 3], abc: [usize; 3]) -> &T {
        &self.table[self.index(xyz, abc)]
    }

    /// Bipartite box between parties `i < j`, with the remaining party's
    /// input fixed to `other_input` and its output summed out.
    pub fn pair_marginal(&self, i: usize, j: usize, other_input: usize) -> Result<Correlation<T>> {
        if i >= j || j > 2 {
            return Err(Error::IndexOutOfRange(format!("party pair ({i},{j})")));
        }
        let k = 3 - i - j;
        let scenario = Scenario::new(
            self.inputs[i],
            self.inputs[j],
            self.outputs[i],
            self.outputs[j],
        )?;
        let table = scenario
            .iter_cells()
            .map(|(u, v, p, q)| {
                (0..self.outputs[k]).fold(T::zero(), |acc, r| {
                    let mut xyz = [0; 3];
                    let mut abc = [0; 3];
                    xyz[i] = u;
                    xyz[j] = v;
                    xyz[k] = other_input;
                    abc[i] = p;
                    abc[j] = q;
                    abc[k] = r;
                    acc + self.get(xyz, abc).clone()
                })
            })
            .collect();
        Correlation::new(scenario, table, DEFAULT_TOL.max(1e-12))
    }

    /// Full no-signaling: every pair marginal is independent of the third
    /// input and is itself no-signaling.
    pub fn is_no_signaling(&self, tol: f64) -> bool {
        [(0, 1), (0, 2), (1, 2)].into_iter().all(|(i, j)| {
            let k = 3 - i - j;
            let Ok(reference) = self.pair_marginal(i, j, 0) else {
                return false;
            };
            reference.is_no_signaling(tol).0
                && (1..self.inputs[k]).all(|z| {
                    self.pair_marginal(i, j, z)
                        .map(|m| {
                            m.table()
                                .iter()
                                .zip(reference.table())
                                .all(|(p, q)| p.near(q, tol))
                        })
                        .unwrap_or(false)
                })
        })
    }
}

pub(crate) fn tripartite_index(
    inputs: [usize; 3],
    outputs: [usize; 3],
    xyz: [usize; 3],
    abc: [usize; 3],
) -> usize {
    let setting = (xyz[0] * inputs[1] + xyz[1]) * inputs[2] + xyz[2];
    let cell = (abc[0] * outputs[1] + abc[1]) * outputs[2] + abc[2];
    setting * outputs.iter().product::<usize>() + cell
}

fn tripartite_coords(
    inputs: [usize; 3],
    outputs: [usize; 3],
    i: usize,
) -> (usize, usize, usize, usize, usize, usize) {
    let block: usize = outputs.iter().product();
    let (s, c) = (i / block, i % block);
    let z = s % inputs[2];
    let y = (s / inputs[2]) % inputs[1];
    let x = s / (inputs[1] * inputs[2]);
    let cc = c % outputs[2];
    let b = (c / outputs[2]) % outputs[1];
    let a = c / (outputs[1] * outputs[2]);
    (x, y, z, a, b, cc)
}

/// A box in either numeric mode, as read from or written to a box file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyBox {
    Rational(ExactBox),
    Float(FloatBox),
}

impl AnyBox {
    pub fn scenario(&self) -> Scenario {
        match self {
            AnyBox::Rational(c) => c.scenario(),
            AnyBox::Float(c) => c.scenario(),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            AnyBox::Rational(_) => Mode::Rational,
            AnyBox::Float(_) => Mode::Float,
        }
    }

    pub fn to_float(&self) -> FloatBox {
        match self {
            AnyBox::Rational(c) => c.to_float(),
            AnyBox::Float(c) => c.clone(),
        }
    }

    /// Parses a box document. Rational entries are `"num/den"` strings (or
    /// integers); float entries are JSON numbers.
    pub fn from_json(text: &str, tol: f64) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let scenario: Scenario = serde_json::from_value(
            doc.get("scenario")
                .cloned()
                .ok_or_else(|| Error::Parse("missing \"scenario\"".into()))?,
        )
        .map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        let scenario = Scenario::new(scenario.nx, scenario.ny, scenario.na, scenario.nb)?;
        let mode: Mode = serde_json::from_value(
            doc.get("mode")
                .cloned()
                .ok_or_else(|| Error::Parse("missing \"mode\"".into()))?,
        )
        .map_err(|e| Error::Parse(format!("mode: {e}")))?;
        let table = doc
            .get("table")
            .ok_or_else(|| Error::Parse("missing \"table\"".into()))?;
        match mode {
            Mode::Rational => {
                let nested = nested_map(table, &|v| match v {
                    Value::String(s) => parse_rational(s),
                    Value::Number(n) if n.is_i64() => {
                        Ok(Rational::from_integer(n.as_i64().unwrap_or(0).into()))
                    }
                    other => Err(Error::Parse(format!(
                        "rational entries must be \"num/den\" strings, got {other}"
                    ))),
                })?;
                Ok(AnyBox::Rational(Correlation::from_nested(
                    scenario, nested, tol,
                )?))
            }
            Mode::Float => {
                let nested = nested_map(table, &|v| {
                    v.as_f64().ok_or_else(|| {
                        Error::Parse(format!("float entries must be numbers, got {v}"))
                    })
                })?;
                Ok(AnyBox::Float(Correlation::from_nested(
                    scenario, nested, tol,
                )?))
            }
        }
    }

    pub fn to_json_value(&self) -> Value {
        match self {
            AnyBox::Rational(c) => box_document(c.scenario(), Mode::Rational, &c.nested(), |r| {
                Value::String(format_rational(r))
            }),
            AnyBox::Float(c) => box_document(c.scenario(), Mode::Float, &c.nested(), |&v| {
                serde_json::Number::from_f64(v)
                    .map(Value::Number)
                    .unwrap_or(Value::Null)
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("box documents always serialize")
    }
}

impl From<ExactBox> for AnyBox {
    fn from(c: ExactBox) -> Self {
        AnyBox::Rational(c)
    }
}

impl From<FloatBox> for AnyBox {
    fn from(c: FloatBox) -> Self {
        AnyBox::Float(c)
    }
}

fn box_document<T>(
    scenario: Scenario,
    mode: Mode,
    nested: &[Vec<Vec<Vec<T>>>],
    f: impl Fn(&T) -> Value,
) -> Value {
    let table = Value::Array(
        nested
            .iter()
            .map(|ys| {
                Value::Array(
                    ys.iter()
                        .map(|as_| {
                            Value::Array(
                                as_.iter()
                                    .map(|bs| Value::Array(bs.iter().map(&f).collect()))
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect(),
    );
    serde_json::json!({ "schema": 1, "scenario": scenario, "mode": mode, "table": table })
}

type Nested<T> = Vec<Vec<Vec<Vec<T>>>>;

fn nested_map<T>(v: &Value, leaf: &dyn Fn(&Value) -> Result<T>) -> Result<Nested<T>> {
    fn arr(v: &Value) -> Result<&Vec<Value>> {
        v.as_array()
            .ok_or_else(|| Error::Parse("table must be nested arrays [x][y][a][b]".into()))
    }
    arr(v)?
        .iter()
        .map(|ys| {
            arr(ys)?
                .iter()
                .map(|as_| {
                    arr(as_)?
                        .iter()
                        .map(|bs| arr(bs)?.iter().map(leaf).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes;
    use crate::num::{int, ratio};

    #[test]
    fn pr_box_validates() {
        let pr = boxes::pr_box();
        assert_eq!(pr.get(1, 1, 0, 1), &ratio(1, 2));
        assert_eq!(pr.get(1, 1, 0, 0), &int(0));
    }

    #[test]
    fn negative_entry_rejected() {
        let mut t = vec![0.25; 16];
        t[0] = -0.1;
        t[1] = 0.6;
        let err = Correlation::new(Scenario::binary(), t, DEFAULT_TOL).unwrap_err();
        assert!(matches!(
            err,
            Error::NegativeEntry {
                x: 0,
                y: 0,
                a: 0,
                b: 0,
                ..
            }
        ));
    }

    #[test]
    fn uniform_table_is_valid() {
        assert!(Correlation::new(Scenario::binary(), vec![ratio(1, 4); 16], 0.0).is_ok());
        assert!(Correlation::new(Scenario::binary(), vec![0.25; 16], DEFAULT_TOL).is_ok());
    }

    #[test]
    fn rational_mode_requires_exact_normalization() {
        let mut t = vec![ratio(1, 4); 16];
        t[3] = ratio(1, 4) + ratio(1, 1_000_000_000_000);
        let err = Correlation::new(Scenario::binary(), t, 1.0).unwrap_err();
        assert!(matches!(err, Error::NotNormalized { x: 0, y: 0, .. }));
        let mut f = vec![0.25; 16];
        f[3] += 1e-12;
        assert!(Correlation::new(Scenario::binary(), f, DEFAULT_TOL).is_ok());
    }

    #[test]
    fn shape_mismatch() {
        let err = Correlation::new(Scenario::binary(), vec![0.25; 15], DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
        assert!(Scenario::new(0, 2, 2, 2).is_err());
    }

    #[test]
    fn pr_marginals_are_uniform() {
        let (dist, report) = boxes::pr_box().marginal(Party::Alice, 0).unwrap();
        assert_eq!(dist, vec![ratio(1, 2), ratio(1, 2)]);
        assert_eq!(report.max_deviation, 0.0);
    }

    #[test]
    fn deterministic_marginal() {
        // a = x, b = 0
        let c = Correlation::<Rational>::from_fn(Scenario::binary(), |x, _, a, b| {
            if a == x && b == 0 {
                int(1)
            } else {
                int(0)
            }
        })
        .unwrap();
        let (dist, _) = c.marginal(Party::Alice, 1).unwrap();
        assert_eq!(dist, vec![int(0), int(1)]);
        assert!(matches!(
            c.marginal(Party::Bob, 2),
            Err(Error::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn isotropic_half_bob_marginal() {
        let c = boxes::isotropic(&ratio(1, 2));
        let (dist, _) = c.marginal(Party::Bob, 1).unwrap();
        assert_eq!(dist, vec![ratio(1, 2), ratio(1, 2)]);
    }

    #[test]
    fn signaling_box_detected() {
        let c = boxes::swap_box();
        let (ns, dev) = c.is_no_signaling(0.0);
        assert!(!ns);
        assert_eq!(dev, 1.0);
        assert!(boxes::pr_box().is_no_signaling(0.0).0);
    }

    #[test]
    fn mixing() {
        let pr = boxes::pr_box();
        let half = ratio(1, 2);
        assert_eq!(
            Correlation::mix(&[(half.clone(), &pr), (half, &pr)]).unwrap(),
            pr
        );
        let f = pr.to_float();
        assert!(matches!(
            Correlation::mix(&[(0.6, &f), (0.6, &f)]),
            Err(Error::WeightSumInvalid(_))
        ));
        let other = Correlation::<f64>::uniform(Scenario::new(3, 2, 2, 2).unwrap());
        assert!(matches!(
            Correlation::mix(&[(0.5, &f), (0.5, &other)]),
            Err(Error::ScenarioMismatch(_))
        ));
        assert!(matches!(
            Correlation::mix(&[(-0.5, &f), (1.5, &f)]),
            Err(Error::WeightSumInvalid(_))
        ));
    }

    #[test]
    fn isotropic_one_is_pr() {
        assert_eq!(boxes::isotropic(&int(1)), boxes::pr_box());
    }

    #[test]
    fn samples_frequency_definition() {
        let rounds = [(0, 0, 0, 0), (0, 1, 0, 0), (1, 0, 0, 0), (1, 1, 0, 0)];
        let (c, counts) = from_samples(Scenario::binary(), rounds).unwrap();
        assert_eq!(counts, vec![1, 1, 1, 1]);
        for x in 0..2 {
            for y in 0..2 {
                assert_eq!(*c.get(x, y, 0, 0), 1.0);
            }
        }
        let err = from_samples(Scenario::binary(), rounds[..3].iter().copied()).unwrap_err();
        assert_eq!(err, Error::MissingSetting { x: 1, y: 1 });
    }

    #[test]
    fn box_file_round_trip_is_exact() {
        let c = boxes::isotropic(&ratio(3, 7));
        let any = AnyBox::from(c);
        let text = any.to_json();
        assert!(text.contains("\"schema\": 1"));
        let back = AnyBox::from_json(&text, DEFAULT_TOL).unwrap();
        assert_eq!(back, any);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn box_file_float_mode() {
        let text = r#"{"scenario":{"nx":1,"ny":1,"na":2,"nb":2},"mode":"float","table":[[[[0.5,0.0],[0.0,0.5]]]]}"#;
        let b = AnyBox::from_json(text, DEFAULT_TOL).unwrap();
        assert_eq!(b.mode(), Mode::Float);
        let bad = r#"{"scenario":{"nx":1,"ny":1,"na":2,"nb":2},"mode":"rational","table":[[[[0.5,0.0],[0.0,0.5]]]]}"#;
        assert!(matches!(
            AnyBox::from_json(bad, DEFAULT_TOL),
            Err(Error::Parse(_))
        ));
        let short = r#"{"scenario":{"nx":1,"ny":1,"na":2,"nb":2},"mode":"float","table":[[[[1.0],[0.0]]]]}"#;
        assert!(matches!(
            AnyBox::from_json(short, DEFAULT_TOL),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn float_to_exact_projection() {
        let pr = boxes::pr_box();
        let back = ExactBox::from_float_box(&pr.to_float(), 40).unwrap();
        assert_eq!(back, pr);
    }

    #[test]
    fn tripartite_marginals() {
        // A, B, C all output the same uniform bit regardless of inputs.
        let table: Vec<Rational> = (0..64)
            .map(|i| {
                let c = i % 8;
                if c == 0 || c == 7 {
                    ratio(1, 2)
                } else {
                    int(0)
                }
            })
            .collect();
        let t = TripartiteCorrelation::new([2; 3], [2; 3], table, 0.0).unwrap();
        assert!(t.is_no_signaling(0.0));
        let ab = t.pair_marginal(0, 1, 1).unwrap();
        assert_eq!(ab.get(0, 0, 0, 0), &ratio(1, 2));
        assert!(t.pair_marginal(1, 0, 0).is_err());
    }
}
