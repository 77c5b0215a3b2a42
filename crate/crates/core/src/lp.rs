//! Exact rational two-phase simplex with Bland's anti-cycling rule.
//!
//! All variables are nonnegative. Constraints may be `<=`, `>=` or `=`;
//! redundant equality rows are detected and dropped after phase one.

use num_traits::{One, Signed, Zero};

use crate::num::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, Rational)>,
    relation: Relation,
    rhs: Rational,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    sense: Sense,
    objective: Vec<Rational>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<Rational>,
    pub objective: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal(Solution),
    Infeasible,
    Unbounded,
}

impl Outcome {
    pub fn optimal(self) -> Option<Solution> {
        match self {
            Outcome::Optimal(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        !matches!(self, Outcome::Infeasible)
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        Self {
            num_vars,
            sense,
            objective: vec![Rational::zero(); num_vars],
            rows: Vec::new(),
        }
    }

    /// Feasibility problem with a zero objective.
    pub fn feasibility(num_vars: usize) -> Self {
        Self::new(num_vars, Sense::Minimize)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn set_objective(&mut self, coeffs: impl IntoIterator<Item = (usize, Rational)>) {
        self.objective = vec![Rational::zero(); self.num_vars];
        for (j, c) in coeffs {
            self.objective[j] += c;
        }
    }

    pub fn add_constraint(
        &mut self,
        coeffs: impl IntoIterator<Item = (usize, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) {
        let mut dense = vec![Rational::zero(); self.num_vars];
        for (j, c) in coeffs {
            assert!(j < self.num_vars, "variable index {j} out of range");
            dense[j] += c;
        }
        let coeffs = dense
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .collect();
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Outcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// `rows x (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
    first_artificial: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars;
        let m = lp.rows.len();
        // Normalize to nonnegative right-hand sides.
        let rows: Vec<Row> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs.is_negative() {
                    Row {
                        coeffs: r.coeffs.iter().map(|(j, c)| (*j, -c)).collect(),
                        relation: match r.relation {
                            Relation::Le => Relation::Ge,
                            Relation::Ge => Relation::Le,
                            Relation::Eq => Relation::Eq,
                        },
                        rhs: -&r.rhs,
                    }
                } else {
                    r.clone()
                }
            })
            .collect();
        let num_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let num_artificial = rows.iter().filter(|r| r.relation != Relation::Le).count();
        let first_artificial = n + num_slack;
        let cols = first_artificial + num_artificial;

        let mut t = vec![vec![Rational::zero(); cols + 1]; m];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = first_artificial;
        for (i, row) in rows.iter().enumerate() {
            for (j, c) in &row.coeffs {
                t[i][*j] = c.clone();
            }
            t[i][cols] = row.rhs.clone();
            match row.relation {
                Relation::Le => {
                    t[i][slack] = Rational::one();
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -Rational::one();
                    slack += 1;
                    t[i][art] = Rational::one();
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t[i][art] = Rational::one();
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Self {
            t,
            basis,
            cols,
            first_artificial,
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Outcome {
        // Phase one: minimize the sum of artificials.
        if self.first_artificial < self.cols {
            let cost: Vec<Rational> = (0..self.cols)
                .map(|j| {
                    if j >= self.first_artificial {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect();
            match self.optimize(&cost, self.cols) {
                Some(()) => {}
                None => unreachable!("phase one is bounded below by zero"),
            }
            let infeasibility: Rational = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= self.first_artificial)
                .map(|(i, _)| self.t[i][self.cols].clone())
                .sum();
            if infeasibility.is_positive() {
                return Outcome::Infeasible;
            }
            self.evict_artificials();
        }

        // Phase two over the structural and slack columns.
        let mut cost = vec![Rational::zero(); self.cols];
        for (j, c) in lp.objective.iter().enumerate() {
            cost[j] = match lp.sense {
                Sense::Minimize => c.clone(),
                Sense::Maximize => -c,
            };
        }
        if self.optimize(&cost, self.first_artificial).is_none() {
            return Outcome::Unbounded;
        }
        let mut values = vec![Rational::zero(); lp.num_vars];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < lp.num_vars {
                values[b] = self.t[i][self.cols].clone();
            }
        }
        let objective = values.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
        Outcome::Optimal(Solution { values, objective })
    }

    /// Minimizes `cost · x` using columns `< allowed` as entering candidates.
    /// Returns `None` when unbounded.
    fn optimize(&mut self, cost: &[Rational], allowed: usize) -> Option<()> {
        loop {
            // Bland: lowest-index column with negative reduced cost.
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut d = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.t[i][j].is_zero() {
                        d -= &cost[b] * &self.t[i][j];
                    }
                }
                d.is_negative()
            });
            let Some(j) = entering else { return Some(()) };

            // Ratio test; ties go to the lowest basic variable index.
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.t.len() {
                let a = &self.t[i][j];
                if a.is_positive() {
                    let ratio = &self.t[i][self.cols] / a;
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let (i, _) = leave?;
            self.pivot(i, j);
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c].clone();
        for v in self.t[r].iter_mut() {
            if !v.is_zero() {
                *v /= &p;
            }
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Pivots zero-valued artificials out of the basis; rows where that is
    /// impossible are linearly dependent and get removed.
    fn evict_artificials(&mut self) {
        let mut i = 0;
        while i < self.t.len() {
            if self.basis[i] >= self.first_artificial {
                match (0..self.first_artificial).find(|&j| !self.t[i][j].is_zero()) {
                    Some(j) => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        self.t.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
}
