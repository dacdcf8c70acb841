//! Multilinear reduction shared by both ideals: powers are lowered with the
//! square generators and conflicting pairs are killed by the adjacency
//! generators.

use num_traits::Zero;

use crate::cert::{Certificate, Generator};
use crate::poly::{Monomial, Polynomial, Var};
use crate::rational::Rational;

/// Rewrites `f` into a combination of conflict-free multilinear monomials.
/// `square(v)` names the generator `v^2 - v` and `conflict(v, w)` the
/// generator equal to `v·w` when the two variables clash.
pub(crate) fn reduce<G: Generator>(
    f: &Polynomial,
    n: usize,
    square: impl Fn(Var) -> G,
    conflict: impl Fn(Var, Var) -> Option<G>,
) -> (Polynomial, Certificate<G>) {
    let mut cert = Certificate::identity(n, f.clone());
    let mut out = Polynomial::zero();
    for (m, c) in f.terms() {
        if let Some(reduced) = reduce_term(m, c, &mut cert, &square, &conflict) {
            out.add_term(reduced, c.clone());
        }
    }
    cert.result = out.clone();
    cert.degree = f.degree_or_neg();
    (out, cert)
}

fn reduce_term<G: Generator>(
    m: &Monomial,
    c: &Rational,
    cert: &mut Certificate<G>,
    square: &impl Fn(Var) -> G,
    conflict: &impl Fn(Var, Var) -> Option<G>,
) -> Option<Monomial> {
    debug_assert!(!c.is_zero());
    let mut current: Vec<(Var, u32)> = m.factors().to_vec();
    for i in 0..current.len() {
        let (v, e) = current[i];
        if e < 2 {
            continue;
        }
        let rest = Monomial::from_factors(
            current.iter().copied().enumerate().filter(|&(j, _)| j != i).map(|(_, f)| f).collect(),
        );
        for k in (2..=e).rev() {
            let q = rest.mul(&Monomial::from_factors(vec![(v, k - 2)]));
            cert.add_cofactor(square(v), &Polynomial::term(q, -c.clone()));
        }
        current[i].1 = 1;
    }
    let linear: Vec<Var> = current.iter().map(|&(v, _)| v).collect();
    let lin = Monomial::product(linear.iter().copied());
    for (i, &v) in linear.iter().enumerate() {
        for &w in &linear[i + 1..] {
            if let Some(g) = conflict(v, w) {
                let rest = Monomial::product(linear.iter().copied().filter(|&x| x != v && x != w));
                cert.add_cofactor(g, &Polynomial::term(rest, -c.clone()));
                return None;
            }
        }
    }
    Some(lin)
}
