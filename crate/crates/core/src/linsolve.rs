//! Exact sparse linear solver over the rationals.
//!
//! Rows are eliminated online into an echelon basis whose pivot is the
//! smallest column of each stored row. Free variables are set to zero, so
//! the returned solution is determined by the column order alone.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::rational::Rational;

pub type SparseRow = Vec<(usize, Rational)>;

struct PivotRow {
    entries: Vec<(usize, Rational)>,
    rhs: Rational,
}

#[derive(Default)]
pub struct Echelon {
    pivots: HashMap<usize, PivotRow>,
}

impl Echelon {
    pub fn new() -> Self {
        Echelon::default()
    }

    /// Adds the equation `Σ a_j x_j = rhs`. Returns `false` if it contradicts
    /// the equations already added.
    pub fn push(&mut self, row: &[(usize, Rational)], rhs: Rational) -> bool {
        let mut r: BTreeMap<usize, Rational> = BTreeMap::new();
        for (c, a) in row {
            if !a.is_zero() {
                let e = r.entry(*c).or_insert_with(Rational::zero);
                *e += a;
            }
        }
        r.retain(|_, a| !a.is_zero());
        let mut rhs = rhs;
        let mut cursor = 0usize;
        loop {
            let next = r
                .range(cursor..)
                .find(|(c, _)| self.pivots.contains_key(c))
                .map(|(c, a)| (*c, a.clone()));
            let Some((col, factor)) = next else { break };
            let pivot = &self.pivots[&col];
            for (c, a) in &pivot.entries {
                let e = r.entry(*c).or_insert_with(Rational::zero);
                *e -= &factor * a;
                if e.is_zero() {
                    r.remove(c);
                }
            }
            rhs -= &factor * &pivot.rhs;
            cursor = col + 1;
        }
        let Some((&lead, lead_coeff)) = r.iter().next() else {
            return rhs.is_zero();
        };
        let inv = Rational::one() / lead_coeff;
        let entries = r.into_iter().map(|(c, a)| (c, a * &inv)).collect();
        self.pivots.insert(
            lead,
            PivotRow {
                entries,
                rhs: rhs * inv,
            },
        );
        true
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Back substitution with every free variable at zero.
    pub fn solution(&self, ncols: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); ncols];
        let mut cols: Vec<usize> = self.pivots.keys().copied().collect();
        cols.sort_unstable_by(|a, b| b.cmp(a));
        for c in cols {
            let row = &self.pivots[&c];
            let mut v = row.rhs.clone();
            for (j, a) in &row.entries {
                if *j != c && !x[*j].is_zero() {
                    v -= a * &x[*j];
                }
            }
            x[c] = v;
        }
        x
    }
}

/// Solves `A x = b` given row-wise sparse `A`; `None` when inconsistent.
pub fn solve(ncols: usize, rows: &[(SparseRow, Rational)]) -> Option<Vec<Rational>> {
    let mut ech = Echelon::new();
    for (row, rhs) in rows {
        if !ech.push(row, rhs.clone()) {
            return None;
        }
    }
    Some(ech.solution(ncols))
}
