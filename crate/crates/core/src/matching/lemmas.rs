use std::collections::{HashMap, HashSet, VecDeque};

use num_traits::One;

use super::{check_even, check_match_poly, DerivationCertificate, MatchGen, PartialMatching};
use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::perm::Permutation;
use crate::poly::{act_var, Monomial, Polynomial, Var};
use crate::rational::{binomial, factorial, int, Rational};
use crate::reduce::reduce;

/// Rewrites `f` so that every monomial is `x_M` for a partial matching `M`.
pub fn normal_form(f: &Polynomial, n: usize) -> Result<(Polynomial, DerivationCertificate)> {
    check_match_poly(f, n)?;
    Ok(reduce(
        f,
        n,
        |v| {
            let (a, b) = v.ends();
            MatchGen::Sq(a, b)
        },
        |v, w| {
            let (a, b) = v.ends();
            let (c, d) = w.ends();
            let centre = [a, b].into_iter().find(|&x| x == c || x == d)?;
            let other = |(p, q): (usize, usize)| if p == centre { q } else { p };
            Some(MatchGen::adj(centre, other((a, b)), other((c, d))))
        },
    ))
}

fn check_matching(m: &PartialMatching, n: usize) -> Result<()> {
    if m.max_vertex() > n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: m.max_vertex(),
        });
    }
    Ok(())
}

/// `x_M ≡ Σ_u x_{M ∪ {au}}` for a vertex `a` not covered by `M`.
pub fn expand_vertex(
    m: &PartialMatching,
    a: usize,
    n: usize,
) -> Result<(Polynomial, DerivationCertificate)> {
    check_matching(m, n)?;
    if a == 0 || a > n {
        return Err(Error::InvalidInput(format!("vertex {a} outside 1..={n}")));
    }
    if m.covers(a) {
        return Err(Error::VertexCovered(a));
    }
    Ok(expand_vertex_raw(m, a, n))
}

pub(crate) fn expand_vertex_raw(m: &PartialMatching, a: usize, n: usize) -> (Polynomial, DerivationCertificate) {
    let x_m = m.poly();
    let mut cert = Certificate::identity(n, x_m.clone());
    cert.add_cofactor(MatchGen::Deg(a), &x_m);
    for &(u, w) in m.edges() {
        let rest = m.without_edge(u, w).poly();
        cert.add_cofactor(MatchGen::adj(u, a, w), &-&rest);
        cert.add_cofactor(MatchGen::adj(w, a, u), &-&rest);
    }
    let mut rhs = Polynomial::zero();
    for u in (1..=n).filter(|&u| u != a && !m.covers(u)) {
        rhs.add_term(m.with_edge(a, u).monomial(), Rational::one());
    }
    cert.result = rhs.clone();
    cert.degree = m.len() as i64 + 1;
    (rhs, cert)
}

/// All matchings of size `size` using only `vertices`.
pub(crate) fn matchings_within(vertices: &[usize], size: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(
        vertices: &[usize],
        size: usize,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if current.len() == size {
            out.push(current.clone());
            return;
        }
        if vertices.len() < 2 * (size - current.len()) {
            return;
        }
        let (first, rest) = (vertices[0], &vertices[1..]);
        for i in 0..rest.len() {
            let mut remaining: Vec<usize> = rest.to_vec();
            let partner = remaining.remove(i);
            current.push((first, partner));
            go(&remaining, size, current, out);
            current.pop();
        }
        go(rest, size, current, out);
    }
    let mut out = Vec::new();
    go(vertices, size, &mut Vec::new(), &mut out);
    out
}

/// `Σ_{M' ⊇ M, |M'| = k} x_{M'}`.
fn extension_sum(m: &PartialMatching, k: usize, n: usize) -> Polynomial {
    let free: Vec<usize> = (1..=n).filter(|&v| !m.covers(v)).collect();
    let mut out = Polynomial::zero();
    for extra in matchings_within(&free, k - m.len()) {
        let mut edges = m.edges().to_vec();
        edges.extend(extra);
        let big = PartialMatching::new(edges).expect("disjoint extension");
        out.add_term(big.monomial(), Rational::one());
    }
    out
}

/// `x_M ≡ (1/C(n/2-d, k-d)) Σ_{M' ⊇ M, |M'| = k} x_{M'}` with `d = |M|`.
pub fn lift_matching(
    m: &PartialMatching,
    k: usize,
    n: usize,
) -> Result<(Polynomial, DerivationCertificate)> {
    check_even(n)?;
    check_matching(m, n)?;
    if k < m.len() || k > n / 2 {
        return Err(Error::InvalidLevel {
            level: k,
            min: m.len(),
            max: n / 2,
        });
    }
    let mut memo = HashMap::new();
    lift_rec(m, k, n, &mut memo)?;
    let cert = memo.remove(m).expect("memoized");
    Ok((cert.result.clone(), cert))
}

fn lift_rec(
    m: &PartialMatching,
    k: usize,
    n: usize,
    memo: &mut HashMap<PartialMatching, DerivationCertificate>,
) -> Result<()> {
    if memo.contains_key(m) {
        return Ok(());
    }
    let d = m.len();
    if d == k {
        memo.insert(m.clone(), Certificate::identity(n, m.poly()).with_degree(k as i64));
        return Ok(());
    }
    let free: Vec<usize> = (1..=n).filter(|&v| !m.covers(v)).collect();
    let weight = Rational::one() / int(free.len() as i64);
    let mut cert = Certificate::identity(n, m.poly());
    let mut result = Polynomial::zero();
    for &a in &free {
        let (_, expansion) = expand_vertex_raw(m, a, n);
        cert.absorb(&expansion, &weight);
        for &u in free.iter().filter(|&&u| u != a) {
            let bigger = m.with_edge(a, u);
            lift_rec(&bigger, k, n, memo)?;
            let sub = &memo[&bigger];
            cert.absorb(sub, &weight);
            result.add_scaled(&sub.result, &weight);
        }
    }
    let expected = extension_sum(m, k, n).scale(&(Rational::one() / binomial(n / 2 - d, k - d)));
    if result != expected {
        return Err(Error::invariant(format!(
            "averaged lift of x_{{{m}}} does not match the extension sum"
        )));
    }
    cert.result = result;
    cert.degree = k as i64;
    memo.insert(m.clone(), cert);
    Ok(())
}

/// Orbit of a monomial under the vertex action of `S_n`.
fn monomial_orbit(m: &Monomial, n: usize) -> Vec<Monomial> {
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

/// `Σ_{σ ∈ S_n} σF`, computed orbit by orbit with stabilizer multiplicities.
pub fn orbit_sum(f: &Polynomial, n: usize) -> Polynomial {
    let group = factorial(n);
    let mut out = Polynomial::zero();
    for (m, c) in f.terms() {
        let orbit = monomial_orbit(m, n);
        let weight = c * &group / int(orbit.len() as i64);
        for image in orbit {
            out.add_term(image, weight.clone());
        }
    }
    out
}

/// Number of partial matchings of size `k` in `K_n`.
fn partial_count(n: usize, k: usize) -> Rational {
    let mut pairings = Rational::one();
    for j in 0..k {
        pairings *= int((2 * j + 1) as i64);
    }
    binomial(n, 2 * k) * pairings
}

/// For an `S_n`-invariant polynomial in normal form, certifies `P ≡ c`.
pub fn symmetric_to_constant(p: &Polynomial, n: usize) -> Result<(Rational, DerivationCertificate)> {
    check_even(n)?;
    let mut by_size: HashMap<usize, (Rational, usize)> = HashMap::new();
    for (m, c) in p.terms() {
        if PartialMatching::from_monomial(m).is_none() {
            return Err(Error::invariant("polynomial is not in normal form"));
        }
        let entry = by_size
            .entry(m.degree() as usize)
            .or_insert_with(|| (c.clone(), 0));
        if &entry.0 != c {
            return Err(Error::invariant("polynomial is not S_n-symmetric"));
        }
        entry.1 += 1;
    }
    let constant = p.constant_term();
    let mut cert = Certificate::identity(n, Polynomial::constant(constant.clone()));
    let mut total = constant;
    let mut sizes: Vec<usize> = by_size.keys().copied().filter(|&k| k > 0).collect();
    sizes.sort_unstable();
    for k in sizes {
        let (a, count) = &by_size[&k];
        if int(*count as i64) != partial_count(n, k) {
            return Err(Error::invariant("polynomial is not S_n-symmetric"));
        }
        let (_, lift) = lift_matching(&PartialMatching::empty(), k, n)?;
        let factor = a * binomial(n / 2, k);
        cert.add_scaled(&lift.reversed(), &factor);
        total += factor;
    }
    if cert.source != *p || cert.result != Polynomial::constant(total.clone()) {
        return Err(Error::invariant("symmetric reduction lost terms"));
    }
    cert.degree = p.degree_or_neg();
    Ok((total, cert))
}

/// `Σ_{σ ∈ S_n} σF ≡ c_F`, with the certificate sourced at the orbit sum.
pub fn symmetrize_constant(
    f: &Polynomial,
    n: usize,
    limits: &Limits,
) -> Result<(Rational, DerivationCertificate)> {
    check_even(n)?;
    check_match_poly(f, n)?;
    if n > limits.max_symmetrize {
        return Err(Error::SymmetrizationTooLarge {
            n,
            bound: limits.max_symmetrize,
        });
    }
    let sum = orbit_sum(f, n);
    let (reduced, nf) = normal_form(&sum, n)?;
    let (c, sym) = symmetric_to_constant(&reduced, n)?;
    let cert = nf.then(&sym)?.with_degree(f.degree_or_neg());
    Ok((c, cert))
}

/// Multiplies a certificate over `K_{n-2}` by `x_{ab}` for the two fresh
/// vertices `a, b`, producing a certificate over `K_n` of degree one higher.
pub fn lift_generator(
    cert: &DerivationCertificate,
    a: usize,
    b: usize,
) -> Result<DerivationCertificate> {
    let old = cert.n;
    let n = old + 2;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if lo != old + 1 || hi != old + 2 {
        return Err(Error::VertexCollision(a, b));
    }
    let x_ab = Polynomial::var(Var::edge(a, b));
    let mut out = Certificate {
        n,
        degree: if cert.degree < 0 { -1 } else { cert.degree + 1 },
        source: &cert.source * &x_ab,
        result: &cert.result * &x_ab,
        cofactors: Default::default(),
    };
    for (g, q) in &cert.cofactors {
        let lifted = q * &x_ab;
        out.add_cofactor(*g, &lifted);
        if let MatchGen::Deg(v) = *g {
            out.add_cofactor(MatchGen::adj(a, b, v), &-q);
            out.add_cofactor(MatchGen::adj(b, a, v), &-q);
        }
    }
    Ok(out)
}
