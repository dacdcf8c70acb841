use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use num_traits::One;

use super::{check_size, check_tour_poly, BipartiteMatching, TourCertificate, TourGen};
use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::perm::Permutation;
use crate::poly::{act_var, Monomial, Polynomial, Var};
use crate::rational::{binomial, factorial, int, Rational};
use crate::reduce::reduce;

/// Rewrites `f` so that every monomial is a bipartite partial matching.
pub fn tour_normal_form(f: &Polynomial, n: usize) -> Result<(Polynomial, TourCertificate)> {
    check_tour_poly(f, n)?;
    Ok(reduce(
        f,
        n,
        |v| {
            let (i, j) = v.ends();
            TourGen::Rsq(i, j)
        },
        |v, w| {
            let ((i, j), (k, l)) = (v.ends(), w.ends());
            if i == k {
                Some(TourGen::row_adj(i, j, l))
            } else if j == l {
                Some(TourGen::col_adj(i, j, k))
            } else {
                None
            }
        },
    ))
}

fn check_matching(m: &BipartiteMatching, n: usize) -> Result<()> {
    if m.max_label() > n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: m.max_label(),
        });
    }
    Ok(())
}

/// `y_M ≡ Σ_v y_{M ∪ (a,v)}` for a row `a` not covered by `M`.
pub fn tour_expand_vertex(
    m: &BipartiteMatching,
    a: usize,
    n: usize,
) -> Result<(Polynomial, TourCertificate)> {
    check_matching(m, n)?;
    if a == 0 || a > n {
        return Err(Error::InvalidInput(format!("row {a} outside 1..={n}")));
    }
    if m.covers_row(a) {
        return Err(Error::RowCovered(a));
    }
    Ok(expand_row_raw(m, a, n))
}

pub(crate) fn expand_row_raw(m: &BipartiteMatching, a: usize, n: usize) -> (Polynomial, TourCertificate) {
    let y_m = m.poly();
    let mut cert = Certificate::identity(n, y_m.clone());
    cert.add_cofactor(TourGen::Row(a), &y_m);
    for &(k, j) in m.pairs() {
        cert.add_cofactor(TourGen::col_adj(a, j, k), &-&m.without_pair(k, j).poly());
    }
    let mut rhs = Polynomial::zero();
    for j in (1..=n).filter(|&j| !m.covers_col(j)) {
        rhs.add_term(m.with_pair(a, j).monomial(), Rational::one());
    }
    cert.result = rhs.clone();
    cert.degree = m.len() as i64 + 1;
    (rhs, cert)
}

/// `y_M ≡ Σ_i y_{M ∪ (i,b)}` for a column `b` not covered by `M`.
pub(crate) fn expand_col_raw(m: &BipartiteMatching, b: usize, n: usize) -> (Polynomial, TourCertificate) {
    let y_m = m.poly();
    let mut cert = Certificate::identity(n, y_m.clone());
    cert.add_cofactor(TourGen::Col(b), &y_m);
    for &(i, j) in m.pairs() {
        cert.add_cofactor(TourGen::row_adj(i, j, b), &-&m.without_pair(i, j).poly());
    }
    let mut rhs = Polynomial::zero();
    for i in (1..=n).filter(|&i| !m.covers_row(i)) {
        rhs.add_term(m.with_pair(i, b).monomial(), Rational::one());
    }
    cert.result = rhs.clone();
    cert.degree = m.len() as i64 + 1;
    (rhs, cert)
}

/// Injective extensions of `m` by `extra` pairs.
fn extensions(m: &BipartiteMatching, extra: usize, n: usize) -> Vec<BipartiteMatching> {
    if extra == 0 {
        return vec![m.clone()];
    }
    let last_new = |x: &BipartiteMatching| {
        x.pairs()
            .iter()
            .filter(|p| !m.pairs().contains(p))
            .map(|p| p.0)
            .max()
            .unwrap_or(0)
    };
    let mut out = Vec::new();
    for smaller in extensions(m, extra - 1, n) {
        let start = last_new(&smaller) + 1;
        for i in (start..=n).filter(|&i| !smaller.covers_row(i)) {
            for j in (1..=n).filter(|&j| !smaller.covers_col(j)) {
                out.push(smaller.with_pair(i, j));
            }
        }
    }
    out
}

/// `y_M ≡ (1/C(n-d, k-d)) Σ_{M' ⊇ M, |M'| = k} y_{M'}` with `d = |M|`.
pub fn tour_lift_matching(
    m: &BipartiteMatching,
    k: usize,
    n: usize,
) -> Result<(Polynomial, TourCertificate)> {
    check_size(n)?;
    check_matching(m, n)?;
    if k < m.len() || k > n {
        return Err(Error::InvalidLevel {
            level: k,
            min: m.len(),
            max: n,
        });
    }
    let mut memo = HashMap::new();
    lift_rec(m, k, n, &mut memo)?;
    let cert = memo.remove(m).expect("memoized");
    Ok((cert.result.clone(), cert))
}

fn lift_rec(
    m: &BipartiteMatching,
    k: usize,
    n: usize,
    memo: &mut HashMap<BipartiteMatching, TourCertificate>,
) -> Result<()> {
    if memo.contains_key(m) {
        return Ok(());
    }
    let d = m.len();
    if d == k {
        memo.insert(m.clone(), Certificate::identity(n, m.poly()).with_degree(k as i64));
        return Ok(());
    }
    let free_rows: Vec<usize> = (1..=n).filter(|&i| !m.covers_row(i)).collect();
    let free_cols: Vec<usize> = (1..=n).filter(|&j| !m.covers_col(j)).collect();
    let weight = Rational::one() / int(free_rows.len() as i64);
    let mut cert = Certificate::identity(n, m.poly());
    let mut result = Polynomial::zero();
    for &a in &free_rows {
        let (_, expansion) = expand_row_raw(m, a, n);
        cert.absorb(&expansion, &weight);
        for &v in &free_cols {
            let bigger = m.with_pair(a, v);
            lift_rec(&bigger, k, n, memo)?;
            let sub = &memo[&bigger];
            cert.absorb(sub, &weight);
            result.add_scaled(&sub.result, &weight);
        }
    }
    let mut expected = Polynomial::zero();
    let scale = Rational::one() / binomial(n - d, k - d);
    for big in extensions(m, k - d, n) {
        expected.add_term(big.monomial(), scale.clone());
    }
    if result != expected {
        return Err(Error::invariant(format!(
            "averaged lift of y_{{{m}}} does not match the extension sum"
        )));
    }
    cert.result = result;
    cert.degree = k as i64;
    memo.insert(m.clone(), cert);
    Ok(())
}

/// `1 ≡ Σ_{cols(M) = C} y_M`: every way of filling the columns `C` from
/// distinct rows, by expanding one column constraint at a time.
pub fn column_block(cols: &[usize], n: usize) -> Result<(Polynomial, TourCertificate)> {
    check_size(n)?;
    let mut sorted = cols.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cols.len() || sorted.iter().any(|&j| j == 0 || j > n) {
        return Err(Error::InvalidInput(format!("bad column set {cols:?}")));
    }
    let cert = block_rec(&BipartiteMatching::empty(), &sorted, n);
    Ok((cert.result.clone(), cert))
}

fn block_rec(m: &BipartiteMatching, cols: &[usize], n: usize) -> TourCertificate {
    let Some((&b, rest)) = cols.split_first() else {
        return Certificate::identity(n, m.poly()).with_degree(m.len() as i64);
    };
    let (rhs, mut cert) = expand_col_raw(m, b, n);
    let mut result = Polynomial::zero();
    for (mono, _) in rhs.terms() {
        let bigger = BipartiteMatching::from_monomial(mono).expect("expansion is a matching");
        let sub = block_rec(&bigger, rest, n);
        cert.absorb(&sub, &Rational::one());
        result.add_scaled(&sub.result, &Rational::one());
    }
    cert.result = result;
    cert.degree = (m.len() + cols.len()) as i64;
    cert
}

fn row_orbit(m: &Monomial, n: usize) -> Vec<Monomial> {
    let gens: Vec<Permutation> = (1..n).map(|i| Permutation::transposition(n, i, i + 1)).collect();
    let mut seen: HashSet<Monomial> = HashSet::from([m.clone()]);
    let mut queue = VecDeque::from([m.clone()]);
    while let Some(cur) = queue.pop_front() {
        for g in &gens {
            let next = cur.map_vars(|v| act_var(g, v));
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    let mut orbit: Vec<Monomial> = seen.into_iter().collect();
    orbit.sort();
    orbit
}

/// `Σ_{σ ∈ S_n} σF` under the row action.
pub fn row_orbit_sum(f: &Polynomial, n: usize) -> Polynomial {
    let group = factorial(n);
    let mut out = Polynomial::zero();
    for (m, c) in f.terms() {
        let orbit = row_orbit(m, n);
        let weight = c * &group / int(orbit.len() as i64);
        for image in orbit {
            out.add_term(image, weight.clone());
        }
    }
    out
}

/// For a row-symmetric normal-form polynomial, certifies `P ≡ c` using one
/// column block per column set.
pub fn tour_symmetric_to_constant(p: &Polynomial, n: usize) -> Result<(Rational, TourCertificate)> {
    check_size(n)?;
    let mut blocks: BTreeMap<Vec<usize>, (Rational, usize)> = BTreeMap::new();
    for (m, c) in p.terms() {
        let bm = BipartiteMatching::from_monomial(m)
            .ok_or_else(|| Error::invariant("polynomial is not in normal form"))?;
        if bm.is_empty() {
            continue;
        }
        let entry = blocks.entry(bm.columns()).or_insert_with(|| (c.clone(), 0));
        if &entry.0 != c {
            return Err(Error::invariant("polynomial is not row-symmetric"));
        }
        entry.1 += 1;
    }
    let constant = p.constant_term();
    let mut cert = Certificate::identity(n, Polynomial::constant(constant.clone()));
    let mut total = constant;
    for (cols, (a, count)) in &blocks {
        let full = factorial(n) / factorial(n - cols.len());
        if int(*count as i64) != full {
            return Err(Error::invariant("polynomial is not row-symmetric"));
        }
        let (_, block) = column_block(cols, n)?;
        cert.add_scaled(&block.reversed(), a);
        total += a;
    }
    if cert.source != *p || cert.result != Polynomial::constant(total.clone()) {
        return Err(Error::invariant("symmetric reduction lost terms"));
    }
    cert.degree = p.degree_or_neg();
    Ok((total, cert))
}

/// `Σ_{σ ∈ S_n} σF ≡ c_F` under the row action, computed by the engine.
pub fn tour_symmetrize_constant(
    f: &Polynomial,
    n: usize,
    limits: &Limits,
) -> Result<(Rational, TourCertificate)> {
    check_size(n)?;
    check_tour_poly(f, n)?;
    if n > limits.max_tour_symmetrize {
        return Err(Error::SymmetrizationTooLarge {
            n,
            bound: limits.max_tour_symmetrize,
        });
    }
    let sum = row_orbit_sum(f, n);
    let (reduced, nf) = tour_normal_form(&sum, n)?;
    let (c, sym) = tour_symmetric_to_constant(&reduced, n)?;
    Ok((c, nf.then(&sym)?.with_degree(f.degree_or_neg())))
}

/// The appendix's stated constant `(n-k)!·C(n,k)` for a degree-`k`
/// monomial; kept only to report against the computed value.
pub fn appendix_closed_form(n: usize, k: usize) -> Rational {
    factorial(n - k) * binomial(n, k)
}

/// Multiplies a certificate over `Q_{n-2}` by `y_{ab} y_{ba}` for the fresh
/// labels `a, b`, producing a certificate over `Q_n` of degree two higher.
pub fn tour_lift_generator(cert: &TourCertificate, a: usize, b: usize) -> Result<TourCertificate> {
    let old = cert.n;
    let n = old + 2;
    let (lo, hi) = (a.min(b), a.max(b));
    if lo != old + 1 || hi != old + 2 {
        return Err(Error::VertexCollision(a, b));
    }
    let y_ab = Polynomial::var(Var::tour(a, b));
    let y_ba = Polynomial::var(Var::tour(b, a));
    let both = &y_ab * &y_ba;
    let mut out = Certificate {
        n,
        degree: if cert.degree < 0 { -1 } else { cert.degree + 2 },
        source: &cert.source * &both,
        result: &cert.result * &both,
        cofactors: Default::default(),
    };
    for (g, q) in &cert.cofactors {
        out.add_cofactor(*g, &(q * &both));
        match *g {
            TourGen::Row(u) => {
                out.add_cofactor(TourGen::col_adj(u, a, b), &-&(q * &y_ab));
                out.add_cofactor(TourGen::col_adj(u, b, a), &-&(q * &y_ba));
            }
            TourGen::Col(v) => {
                out.add_cofactor(TourGen::row_adj(a, b, v), &-&(q * &y_ba));
                out.add_cofactor(TourGen::row_adj(b, a, v), &-&(q * &y_ab));
            }
            _ => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::Generator;
    use crate::rational::frac;
    use crate::tour::{enumerate_tours, evaluate_on_tour};
    use num_traits::Zero;

    fn y(i: usize, j: usize) -> Polynomial {
        Polynomial::var(Var::tour(i, j))
    }

    fn vanishes(p: &Polynomial, n: usize) -> bool {
        enumerate_tours(n, &Limits::default())
            .unwrap()
            .iter()
            .all(|s| evaluate_on_tour(p, s).is_zero())
    }

    #[test]
    fn normal_form_examples() {
        let (nf, cert) = tour_normal_form(&(&y(1, 1) * &y(1, 2)), 2).unwrap();
        assert!(nf.is_zero());
        assert!(cert.cofactors.contains_key(&TourGen::RowAdj(1, 1, 2)));
        assert!(cert.verify());
        let (nf, cert) = tour_normal_form(&(&y(1, 1) * &y(2, 1)), 2).unwrap();
        assert!(nf.is_zero());
        assert!(cert.cofactors.contains_key(&TourGen::ColAdj(1, 1, 2)));
        assert!(cert.verify());
        let (nf, cert) = tour_normal_form(&(&y(1, 1) * &y(1, 1)), 2).unwrap();
        assert_eq!(nf, y(1, 1));
        assert!(cert.verify());
    }

    #[test]
    fn expand_examples() {
        let (rhs, cert) = tour_expand_vertex(&BipartiteMatching::empty(), 1, 2).unwrap();
        assert_eq!(rhs, &y(1, 1) + &y(1, 2));
        assert!(cert.verify());
        let m = BipartiteMatching::new([(1, 1)]).unwrap();
        let (rhs, cert) = tour_expand_vertex(&m, 2, 3).unwrap();
        assert_eq!(rhs, &y(1, 1) * &(&y(2, 2) + &y(2, 3)));
        assert!(cert.verify());
        assert_eq!(cert.degree, 2);
        assert!(vanishes(&(&rhs - &m.poly()), 3));
        assert!(matches!(tour_expand_vertex(&m, 1, 3), Err(Error::RowCovered(1))));
    }

    #[test]
    fn lift_examples() {
        let (rhs, cert) = tour_lift_matching(&BipartiteMatching::empty(), 1, 3).unwrap();
        assert_eq!(rhs.num_terms(), 9);
        assert_eq!(rhs.coefficient(&Monomial::var(Var::tour(2, 3))), frac(1, 3));
        assert!(cert.verify());
        assert!(vanishes(&(&rhs - &Polynomial::one()), 3));

        let m = BipartiteMatching::new([(1, 1)]).unwrap();
        let (rhs, cert) = tour_lift_matching(&m, 1, 3).unwrap();
        assert_eq!(rhs, m.poly());
        assert!(cert.cofactors.is_empty());

        let (rhs, cert) = tour_lift_matching(&m, 2, 3).unwrap();
        assert_eq!(rhs.num_terms(), 4);
        assert_eq!(rhs.coefficient(&(&y(1, 1) * &y(2, 2)).terms().next().unwrap().0.clone()), frac(1, 2));
        assert!(cert.verify());
        assert!(vanishes(&(&rhs - &m.poly()), 3));
        assert!(matches!(tour_lift_matching(&m, 4, 3), Err(Error::InvalidLevel { .. })));
    }

    #[test]
    fn column_blocks() {
        let (rhs, cert) = column_block(&[1, 3], 3).unwrap();
        assert_eq!(rhs.num_terms(), 6);
        assert!(cert.verify());
        assert_eq!(cert.source, Polynomial::one());
        assert!(vanishes(&(&rhs - &Polynomial::one()), 3));
    }

    #[test]
    fn symmetrize_examples() {
        let limits = Limits::default();
        let (c, cert) = tour_symmetrize_constant(&y(1, 1), 3, &limits).unwrap();
        assert_eq!(c, int(2));
        assert!(cert.verify());
        assert_eq!(appendix_closed_form(3, 1), int(6));

        let (c, _) = tour_symmetrize_constant(&Polynomial::constant(int(2)), 3, &limits).unwrap();
        assert_eq!(c, int(12));

        let f = &y(1, 1) * &y(2, 2);
        let (c, cert) = tour_symmetrize_constant(&f, 4, &limits).unwrap();
        assert!(cert.verify());
        let sum = row_orbit_sum(&f, 4);
        assert!(vanishes(&(&sum - &Polynomial::constant(c.clone())), 4));
        assert_eq!(c, int(2));
        assert!(matches!(
            tour_symmetrize_constant(&y(1, 1), 8, &limits),
            Err(Error::SymmetrizationTooLarge { n: 8, bound: 7 })
        ));
    }

    #[test]
    fn lift_generator_examples() {
        for g in [TourGen::Row(1), TourGen::Col(2), TourGen::Rsq(1, 2)] {
            let cert = Certificate {
                n: 2,
                degree: g.degree() as i64,
                source: g.expand(2),
                result: Polynomial::zero(),
                cofactors: [(g, -Polynomial::one())].into_iter().collect(),
            };
            let lifted = tour_lift_generator(&cert, 3, 4).unwrap();
            assert!(lifted.verify(), "{g}: {:?}", lifted.check());
            assert_eq!(lifted.degree, cert.degree + 2);
        }
        let empty = Certificate::<TourGen>::empty(2);
        assert!(matches!(tour_lift_generator(&empty, 2, 4), Err(Error::VertexCollision(2, 4))));
    }
}
