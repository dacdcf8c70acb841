//! TSP instances, the tour-value polynomial, the doubling construction with
//! canonical tours, and the odd-set refutation pipeline.

mod refute;

pub use refute::{
    build_refutation, fold_generator, fold_substitution, odd_cut_squares, odd_set_slack,
    odd_set_split, parse_square_blocks,
    verify_refutation, RefutationCertificate, RefutationReport,
};

use std::fmt::Write as _;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::poly::{Polynomial, Var};
use crate::rational::{format_rational, parse_rational, Rational};

/// Distances `d(i, j) ≥ 0` for ordered pairs, satisfying the triangle
/// inequality. `d[i-1][j-1]`; the diagonal is zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TspInstance {
    n: usize,
    d: Vec<Vec<Rational>>,
}

impl TspInstance {
    pub fn new(d: Vec<Vec<Rational>>) -> Result<Self> {
        let n = d.len();
        if d.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeError("distance table is not square".into()));
        }
        for (i, row) in d.iter().enumerate() {
            if !row[i].is_zero() {
                return Err(Error::InvalidInput(format!("d({0},{0}) must be 0", i + 1)));
            }
            if let Some(j) = row.iter().position(|v| v.is_negative()) {
                return Err(Error::NotMetric(format!("d({},{}) is negative", i + 1, j + 1)));
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if d[i][k] > &d[i][j] + &d[j][k] {
                        return Err(Error::NotMetric(format!(
                            "d({},{}) = {} > d({},{}) + d({},{})",
                            i + 1,
                            k + 1,
                            format_rational(&d[i][k]),
                            i + 1,
                            j + 1,
                            j + 1,
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(TspInstance { n, d })
    }

    /// Shortest-path closure of arbitrary nonnegative weights, which is
    /// always metric.
    pub fn metric_closure(mut d: Vec<Vec<Rational>>) -> Result<Self> {
        let n = d.len();
        for (i, row) in d.iter_mut().enumerate() {
            if row.len() != n {
                return Err(Error::ShapeError("distance table is not square".into()));
            }
            row[i] = Rational::zero();
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = &d[i][k] + &d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        TspInstance::new(d)
    }

    pub fn uniform(n: usize, value: Rational) -> Self {
        let d = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Rational::zero() } else { value.clone() }).collect())
            .collect();
        TspInstance::new(d).expect("uniform distances are metric")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `d(i, j)`, 1-based.
    pub fn distance(&self, i: usize, j: usize) -> &Rational {
        &self.d[i - 1][j - 1]
    }

    /// The tour visiting vertex `i` at position `σ(i)`, with the cycle
    /// closed from position `n` back to position 1.
    pub fn tour_value(&self, sigma: &Permutation) -> Rational {
        let order = sigma.inverse();
        let n = self.n;
        (1..=n)
            .map(|p| self.distance(order.apply(p), order.apply(p % n + 1)).clone())
            .sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("TSP n={}\n", self.n);
        for i in 1..=self.n {
            for j in (1..=self.n).filter(|&j| j != i) {
                writeln!(out, "d {i} {j} {}", format_rational(self.distance(i, j))).expect("write");
            }
        }
        out
    }

    /// Reads `TSP n=<n>` followed by `d i j <value>` lines; values may be
    /// fractions or decimals and are kept exact.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty instance"))?;
        let n: usize = header
            .strip_prefix("TSP")
            .and_then(|r| crate::cert::header_field(r.trim(), "n"))
            .ok_or_else(|| Error::parse(ln, "expected `TSP n=<n>`"))?;
        let mut d: Vec<Vec<Option<Rational>>> = vec![vec![None; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = Some(Rational::zero());
        }
        for (ln, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::parse(ln, "expected `d i j <value>`");
            if t.len() != 4 || t[0] != "d" {
                return Err(bad());
            }
            let i: usize = t[1].parse().map_err(|_| bad())?;
            let j: usize = t[2].parse().map_err(|_| bad())?;
            if i == 0 || j == 0 || i > n || j > n || i == j {
                return Err(Error::parse(ln, format!("pair ({i},{j}) out of range")));
            }
            let v = parse_rational(t[3]).ok_or_else(bad)?;
            if d[i - 1][j - 1].replace(v).is_some() && i != j {
                return Err(Error::parse(ln, format!("d {i} {j} given twice")));
            }
        }
        let d = d
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v.ok_or_else(|| Error::InvalidInput(format!("missing d {} {}", i + 1, j + 1)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        TspInstance::new(d)
    }
}

/// `Σ_{u≠v, p} d(u,v) · y_{u,p} · y_{v,p+1}` with positions taken mod `n`.
pub fn val_polynomial(inst: &TspInstance) -> Polynomial {
    let n = inst.n;
    let mut p = Polynomial::zero();
    if n < 2 {
        return p;
    }
    for u in 1..=n {
        for v in (1..=n).filter(|&v| v != u) {
            let d = inst.distance(u, v);
            if d.is_zero() {
                continue;
            }
            for pos in 1..=n {
                let term = Polynomial::var(Var::tour(u, pos)) * Polynomial::var(Var::tour(v, pos % n + 1));
                p.add_scaled(&term, d);
            }
        }
    }
    p
}

/// Vertex `i` of the original instance becomes `2i-1` and its copy `i'`
/// becomes `2i`.
pub fn original(label: usize) -> usize {
    label.div_ceil(2)
}

/// The instance on `K_{2n}` with copies at distance zero.
pub fn double_instance(inst: &TspInstance) -> TspInstance {
    let n = inst.n;
    let d = (1..=2 * n)
        .map(|a| {
            (1..=2 * n)
                .map(|b| {
                    let (i, j) = (original(a), original(b));
                    if i == j {
                        Rational::zero()
                    } else {
                        inst.distance(i, j).clone()
                    }
                })
                .collect()
        })
        .collect();
    TspInstance::new(d).expect("doubling preserves the triangle inequality")
}

/// `Φ(σ)(i) = 2σ(i) - 1`, `Φ(σ)(i') = 2σ(i)`.
pub fn phi_map(sigma: &Permutation) -> Permutation {
    let images = sigma.images().iter().flat_map(|&p| [2 * p - 1, 2 * p]).collect();
    Permutation::from_images(images).expect("Φ is a bijection")
}

/// Whether every copy `i'` is visited right after `i`, starting at an odd
/// position, i.e. whether `τ` lies in the image of `Φ`.
pub fn is_canonical(tau: &Permutation) -> bool {
    tau.len() % 2 == 0
        && (1..=tau.len() / 2).all(|i| {
            let p = tau.apply(2 * i - 1);
            p % 2 == 1 && tau.apply(2 * i) == p + 1
        })
}

/// Moves each copy `i'` to immediately after `i`. The result is canonical
/// and, by the triangle inequality, no longer than `τ`.
pub fn canonicalize(tau: &Permutation, doubled: &TspInstance) -> Result<Permutation> {
    let len = tau.len();
    if len != doubled.n() || len % 2 == 1 {
        return Err(Error::SizeMismatch {
            expected: doubled.n(),
            found: len,
        });
    }
    let order = tau.inverse();
    let mut images = vec![0; len];
    let mut pos = 1;
    for p in 1..=len {
        let v = order.apply(p);
        if v % 2 == 1 {
            images[v - 1] = pos;
            images[v] = pos + 1;
            pos += 2;
        }
    }
    let out = Permutation::from_images(images).expect("relocation is a bijection");
    let (before, after) = (doubled.tour_value(tau), doubled.tour_value(&out));
    if after > before {
        return Err(Error::invariant(format!(
            "canonical tour value {} exceeds the input value {}",
            format_rational(&after),
            format_rational(&before)
        )));
    }
    Ok(out)
}

/// The `σ` with `Φ(σ) = τ` for canonical `τ`.
pub fn phi_inverse(tau: &Permutation) -> Option<Permutation> {
    if !is_canonical(tau) {
        return None;
    }
    let images = (1..=tau.len() / 2).map(|i| tau.apply(2 * i) / 2).collect();
    Permutation::from_images(images).ok()
}
