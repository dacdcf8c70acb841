use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use super::lemmas::{expand_row_raw, tour_lift_generator, tour_normal_form, tour_symmetric_to_constant};
use super::{
    bipartite_matchings, check_size, check_tour_poly, find_nonzero_tour, BipartiteMatching,
    TourCertificate, TourGen,
};
use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::linsolve::{Echelon, SparseRow};
use crate::matching::Method;
use crate::perm::Permutation;
use crate::poly::{Polynomial, Var};
use crate::rational::{format_rational, int, Rational};

/// Certifies `F ≡ 0` over `Q_n` with degree at most `2·deg F - 1`.
pub fn tour_derive_zero(
    f: &Polynomial,
    n: usize,
    method: Method,
    limits: &Limits,
) -> Result<TourCertificate> {
    check_size(n)?;
    check_tour_poly(f, n)?;
    let witness = find_nonzero_tour(f, n, limits).map_err(|e| match e {
        Error::OracleTooLarge { n, bound } => {
            Error::DerivationTooLarge(format!("tour oracle for n={n} exceeds bound {bound}"))
        }
        other => other,
    })?;
    if let Some((sigma, value)) = witness {
        return Err(Error::NotAMember {
            witness: sigma.to_string(),
            value: format_rational(&value),
        });
    }
    let bound = 2 * f.degree_or_neg() - 1;
    let cert = match method {
        Method::Direct => derive_direct(f, n, limits)?,
        Method::Inductive => {
            let d = f.degree().unwrap_or(0);
            if n > limits.max_tour_inductive_n || d > limits.max_inductive_degree {
                return Err(Error::DerivationTooLarge(format!(
                    "inductive method is limited to n <= {} and degree <= {}",
                    limits.max_tour_inductive_n, limits.max_inductive_degree
                )));
            }
            derive_inductive(f, n, limits)?
        }
    };
    let cert = cert.tighten();
    if cert.degree > bound.max(-1) {
        return Err(Error::invariant(format!(
            "derivation has degree {} above the bound {bound}",
            cert.degree
        )));
    }
    Ok(cert)
}

/// Searches for a certificate of `F ≡ 0` over `Q_n` of degree at most
/// `bound` without consulting the oracle.
pub fn tour_derive_zero_with_bound(
    f: &Polynomial,
    n: usize,
    bound: usize,
    limits: &Limits,
) -> Result<Option<TourCertificate>> {
    check_tour_poly(f, n)?;
    let (g, nf) = tour_normal_form(f, n)?;
    if g.is_zero() {
        return Ok(Some(nf.tighten()));
    }
    let d = g.degree().unwrap_or(0) as usize;
    if bound < d.max(1) {
        return Ok(None);
    }
    match solve_reduced(&g, n, bound, limits)? {
        Some(c) => Ok(Some(nf.then(&c)?.tighten())),
        None => Ok(None),
    }
}

fn derive_direct(f: &Polynomial, n: usize, limits: &Limits) -> Result<TourCertificate> {
    let (g, nf) = tour_normal_form(f, n)?;
    if g.is_zero() {
        return Ok(nf);
    }
    let d = g.degree().unwrap_or(0) as usize;
    for b in d.max(1)..=(2 * d - 1).max(1) {
        if let Some(c) = solve_reduced(&g, n, b, limits)? {
            return nf.then(&c);
        }
    }
    Err(Error::invariant(
        "no certificate within the degree bound for an ideal member",
    ))
}

#[derive(Clone, Copy)]
enum Line {
    Row(usize),
    Col(usize),
}

/// Unknowns `c` for `y_M·ROW(i)` (row `i` free) and `y_M·COL(j)` (column
/// `j` free) with `|M| < bound`, matched against `nf(F)` monomial by
/// monomial.
fn solve_reduced(
    g: &Polynomial,
    n: usize,
    bound: usize,
    limits: &Limits,
) -> Result<Option<TourCertificate>> {
    let index = bipartite_matchings(n, bound);
    let position: HashMap<&BipartiteMatching, usize> =
        index.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut columns: Vec<(Line, &BipartiteMatching)> = Vec::new();
    for m in index.iter().filter(|m| m.len() < bound) {
        for i in (1..=n).filter(|&i| !m.covers_row(i)) {
            columns.push((Line::Row(i), m));
        }
        for j in (1..=n).filter(|&j| !m.covers_col(j)) {
            columns.push((Line::Col(j), m));
        }
    }
    if columns.len() > limits.max_direct_unknowns {
        return Err(Error::DerivationTooLarge(format!(
            "{} unknowns exceed the cap {}",
            columns.len(),
            limits.max_direct_unknowns
        )));
    }
    let mut rows: Vec<SparseRow> = vec![Vec::new(); index.len()];
    for (c, &(line, m)) in columns.iter().enumerate() {
        rows[position[m]].push((c, -Rational::one()));
        let bigger: Vec<BipartiteMatching> = match line {
            Line::Row(i) => (1..=n)
                .filter(|&j| !m.covers_col(j))
                .map(|j| m.with_pair(i, j))
                .collect(),
            Line::Col(j) => (1..=n)
                .filter(|&i| !m.covers_row(i))
                .map(|i| m.with_pair(i, j))
                .collect(),
        };
        for big in bigger {
            if let Some(&r) = position.get(&big) {
                rows[r].push((c, Rational::one()));
            }
        }
    }
    let mut rhs = vec![Rational::zero(); index.len()];
    for (mono, c) in g.terms() {
        let m = BipartiteMatching::from_monomial(mono)
            .ok_or_else(|| Error::invariant("solver input not in normal form"))?;
        let r = *position
            .get(&m)
            .ok_or_else(|| Error::invariant("solver input exceeds the degree bound"))?;
        rhs[r] = c.clone();
    }
    let mut ech = Echelon::new();
    for (row, b) in rows.iter().zip(rhs) {
        if !ech.push(row, b) {
            return Ok(None);
        }
    }
    let solution = ech.solution(columns.len());
    let mut cert = Certificate::identity(n, g.clone());
    for (&(line, m), c) in columns.iter().zip(&solution) {
        if c.is_zero() {
            continue;
        }
        match line {
            Line::Row(i) => {
                cert.add_cofactor(TourGen::Row(i), &m.poly().scale(&-c));
                for &(k, j) in m.pairs() {
                    cert.add_cofactor(TourGen::col_adj(i, j, k), &m.without_pair(k, j).poly().scale(c));
                }
            }
            Line::Col(j) => {
                cert.add_cofactor(TourGen::Col(j), &m.poly().scale(&-c));
                for &(i, l) in m.pairs() {
                    cert.add_cofactor(TourGen::row_adj(i, l, j), &m.without_pair(i, l).poly().scale(c));
                }
            }
        }
    }
    cert.result = Polynomial::zero();
    cert.degree = bound as i64;
    Ok(Some(cert))
}

/// Row symmetrization through transposition claims, then reduction of the
/// row-symmetric polynomial to its constant.
fn derive_inductive(f: &Polynomial, n: usize, limits: &Limits) -> Result<TourCertificate> {
    let (g, nf) = tour_normal_form(f, n)?;
    if g.is_zero() {
        return Ok(nf);
    }
    let d = g.degree().unwrap_or(0);
    if d == 1 {
        let base = solve_reduced(&g, n, 1, limits)?
            .ok_or_else(|| Error::invariant("linear member without a degree-1 certificate"))?;
        return nf.then(&base);
    }
    let mut cert = Certificate::identity(n, g.clone());
    let mut h = g;
    for k in 2..=n {
        let weight = Rational::one() / int(k as i64);
        let mut next = h.clone();
        let mut step = Certificate::identity(n, h.clone());
        for j in 1..k {
            let tau = Permutation::transposition(n, j, k);
            let image = h.act(&tau)?;
            next.add_scaled(&image, &Rational::one());
            let diff = &h - &image;
            if diff.is_zero() {
                continue;
            }
            step.absorb(&transposition_claim(&diff, j, k, n, limits)?, &weight);
        }
        let next = next.scale(&weight);
        step.result = next.clone();
        cert = cert.then(&step)?;
        h = next;
    }
    let (c, sym) = tour_symmetric_to_constant(&h, n)?;
    if !c.is_zero() {
        return Err(Error::invariant(format!(
            "symmetrized member reduced to the nonzero constant {}",
            format_rational(&c)
        )));
    }
    let cert = cert.then(&sym)?;
    Ok(nf.then(&cert)?.with_degree(2 * d as i64 - 1))
}

/// `D ≡ 0` for `D = F - (a u)F`, rows `a` and `u` transposed.
fn transposition_claim(
    diff: &Polynomial,
    a: usize,
    u: usize,
    n: usize,
    limits: &Limits,
) -> Result<TourCertificate> {
    let d = diff.degree().unwrap_or(0) as i64;
    let mut cert = Certificate::identity(n, diff.clone());
    // (column of a, column of u) -> L with D ≡ Σ L · y_{a,b} · y_{u,v}
    let mut groups: BTreeMap<(usize, usize), Polynomial> = BTreeMap::new();
    let mut add = |m: &BipartiteMatching, c: &Rational| {
        let b = m.col_of(a).expect("row a covered");
        let v = m.col_of(u).expect("row u covered");
        let rest = m.without_pair(a, b).without_pair(u, v);
        groups
            .entry((b, v))
            .or_insert_with(Polynomial::zero)
            .add_term(rest.monomial(), c.clone());
    };
    for (mono, c) in diff.terms() {
        let m = BipartiteMatching::from_monomial(mono)
            .ok_or_else(|| Error::invariant("claim input not in normal form"))?;
        let missing = match (m.covers_row(a), m.covers_row(u)) {
            (true, true) => None,
            (true, false) => Some(u),
            (false, true) => Some(a),
            (false, false) => {
                return Err(Error::invariant(
                    "monomial independent of the transposed rows survived",
                ))
            }
        };
        match missing {
            None => add(&m, c),
            Some(row) => {
                let (rhs, e) = expand_row_raw(&m, row, n);
                cert.absorb(&e, c);
                for (big, _) in rhs.terms() {
                    add(&BipartiteMatching::from_monomial(big).expect("expansion"), c);
                }
            }
        }
    }
    for ((b, v), l) in groups {
        if l.is_zero() {
            continue;
        }
        cert.absorb(&sub_certificate(&l, (a, u), (b, v), n, limits)?, &Rational::one());
    }
    cert.result = Polynomial::zero();
    cert.degree = 2 * d - 1;
    Ok(cert)
}

/// Certifies `L · y_{ab} · y_{uv} ≡ 0` over `Q_n` by solving on the
/// `Q_{n-2}` left after deleting rows `a, u` and columns `b, v`, then lifting
/// once with row labels `n-1 ↦ a, n ↦ u` and column labels `n ↦ b, n-1 ↦ v`.
fn sub_certificate(
    l: &Polynomial,
    (a, u): (usize, usize),
    (b, v): (usize, usize),
    n: usize,
    limits: &Limits,
) -> Result<TourCertificate> {
    let mut row_images: Vec<usize> = (1..=n).filter(|&i| i != a && i != u).collect();
    let mut col_images: Vec<usize> = (1..=n).filter(|&j| j != b && j != v).collect();
    let sub_n = row_images.len();
    row_images.extend([a, u]);
    col_images.extend([v, b]);
    let rows = Permutation::from_images(row_images).expect("row relabeling");
    let cols = Permutation::from_images(col_images).expect("column relabeling");
    let (rows_inv, cols_inv) = (rows.inverse(), cols.inverse());
    let relabel = |p: &Polynomial, r: &Permutation, c: &Permutation| {
        p.map_vars(|var| {
            let (i, j) = var.ends();
            Var::tour(r.apply(i), c.apply(j))
        })
    };
    let local = relabel(l, &rows_inv, &cols_inv);
    let cert = if sub_n == 0 {
        if !local.is_zero() {
            return Err(Error::invariant("nonzero constant left on an empty sub-instance"));
        }
        Certificate::empty(0)
    } else {
        if let Some((sigma, value)) = find_nonzero_tour(&local, sub_n, limits)? {
            return Err(Error::invariant(format!(
                "sub-polynomial does not vanish on Q_{sub_n} (value {} at {sigma})",
                format_rational(&value)
            )));
        }
        derive_inductive(&local, sub_n, limits)?
    };
    let lifted = tour_lift_generator(&cert, sub_n + 1, sub_n + 2)?;
    Ok(lifted.map(n, |g| g.relabel(&rows, &cols), |p| relabel(p, &rows, &cols)))
}
