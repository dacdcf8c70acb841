use std::fmt;
use std::fmt::Write as _;

use num_traits::{One, Signed};

use crate::cert::{header_field, Certificate};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::matching::{derive_zero, find_nonzero, DerivationCertificate, MatchGen, Method};
use crate::poly::{Kind, Monomial, Polynomial, Var};
use crate::rational::{format_rational, frac, int, parse_rational, Rational};

/// `m` (odd, `n/2` or `n/2 - 1`) and whether `U = {2m+1, 2m+2}` is present.
pub fn odd_set_split(n: usize) -> Result<(usize, bool)> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::InvalidSize(n));
    }
    let half = n / 2;
    Ok(if half % 2 == 1 { (half, false) } else { (half - 1, true) })
}

fn check_eps(eps: &Rational) -> Result<()> {
    if eps.is_negative() || *eps >= Rational::one() {
        return Err(Error::InvalidInput(format!(
            "eps = {} is outside [0, 1)",
            format_rational(eps)
        )));
    }
    Ok(())
}

/// For `S = [m]`: `f = (|S|-1)/2 + ε/2 - Σ_{E[S]} x` and
/// `rhs = ½ Σ_{u∈S, v∉S} x_{uv} - (1-ε)/2`, with the certificate
/// `f + ½ Σ_{u∈S} DEG(u) = rhs`.
pub fn odd_set_slack(
    n: usize,
    eps: &Rational,
) -> Result<(Polynomial, Polynomial, DerivationCertificate)> {
    if n < 10 {
        return Err(Error::InvalidSize(n));
    }
    let (m, _) = odd_set_split(n)?;
    check_eps(eps)?;
    let half = frac(1, 2);
    let mut f = Polynomial::constant(int(m as i64 - 1) * &half + eps * &half);
    let mut rhs = Polynomial::constant(-(Rational::one() - eps) * &half);
    for u in 1..=m {
        for v in u + 1..=m {
            f.add_term(Monomial::product([Var::edge(u, v)]), -Rational::one());
        }
        for v in m + 1..=n {
            rhs.add_term(Monomial::product([Var::edge(u, v)]), half.clone());
        }
    }
    let mut cert = Certificate::identity(n, f.clone());
    for u in 1..=m {
        cert.add_cofactor(MatchGen::Deg(u), &Polynomial::constant(half.clone()));
    }
    cert.result = rhs.clone();
    cert.degree = 1;
    if !cert.verify() {
        return Err(Error::invariant("odd-set certificate does not verify"));
    }
    Ok((f, rhs, cert))
}

enum Folded {
    Zero,
    One,
    Edge(usize, usize),
}

fn fold_edge(u: usize, v: usize, m: usize, with_u: bool) -> Folded {
    let (u, v) = (u.min(v), u.max(v));
    if v <= m {
        Folded::Edge(u, v)
    } else if u > m && v <= 2 * m {
        Folded::Edge(u - m, v - m)
    } else if with_u && (u, v) == (2 * m + 1, 2 * m + 2) {
        Folded::One
    } else {
        Folded::Zero
    }
}

/// `x_{2m+1,2m+2} ↦ 1` (when `U` is present), `x_{uv} ↦ x_{uv}` inside `S`,
/// `x_{u+m,v+m} ↦ x_{uv}` inside `T`, every other variable `↦ 0`.
pub fn fold_substitution(p: &Polynomial, n: usize) -> Result<Polynomial> {
    let (m, with_u) = odd_set_split(n)?;
    if p.max_label() > n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: p.max_label(),
        });
    }
    if p.kind()? == Some(Kind::Tour) {
        return Err(Error::KindMismatch);
    }
    Ok(p.substitute(|var| match var {
        Var::Match(a, b) => match fold_edge(a as usize, b as usize, m, with_u) {
            Folded::Zero => Polynomial::zero(),
            Folded::One => Polynomial::one(),
            Folded::Edge(u, v) => Polynomial::var(Var::edge(u, v)),
        },
        Var::Tour(..) => unreachable!("kind checked above"),
    }))
}

/// The image of a `P_n` generator under [`fold_substitution`]: another
/// generator of `P_m`, or `None` when it folds to zero.
pub fn fold_generator(g: &MatchGen, n: usize) -> Result<Option<MatchGen>> {
    let (m, with_u) = odd_set_split(n)?;
    let vertex = |v: usize| if v <= m { Some(v) } else if v <= 2 * m { Some(v - m) } else { None };
    Ok(match *g {
        MatchGen::Sq(u, v) => match fold_edge(u, v, m, with_u) {
            Folded::Edge(a, b) => Some(MatchGen::sq(a, b)),
            Folded::One | Folded::Zero => None,
        },
        MatchGen::Adj(c, v, w) => match (fold_edge(c, v, m, with_u), fold_edge(c, w, m, with_u)) {
            (Folded::Edge(..), Folded::Edge(..)) => {
                let c2 = vertex(c).expect("folded edge endpoint");
                Some(MatchGen::adj(c2, vertex(v).expect("endpoint"), vertex(w).expect("endpoint")))
            }
            _ => None,
        },
        MatchGen::Deg(v) => vertex(v).map(MatchGen::Deg),
    })
}

fn fold_certificate(cert: &DerivationCertificate, n: usize) -> Result<DerivationCertificate> {
    let (m, _) = odd_set_split(n)?;
    let mut out = Certificate::identity(m, fold_substitution(&cert.source, n)?);
    out.result = fold_substitution(&cert.result, n)?;
    out.degree = cert.degree;
    for (g, q) in &cert.cofactors {
        if let Some(g2) = fold_generator(g, n)? {
            out.add_cofactor(g2, &fold_substitution(q, n)?);
        }
    }
    Ok(out)
}

/// A certificate of `-(1-ε)/2 ≡ Σ g_j² + μ` over `P_m`, `m` odd, written as
/// `-(1-ε)/2 - Σ g_j² - μ + Σ q·gen = 0` with every product of degree at
/// most `2k - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefutationCertificate {
    pub m: usize,
    pub eps: Rational,
    pub k: usize,
    pub mu: Rational,
    pub squares: Vec<Polynomial>,
    pub cert: DerivationCertificate,
}

fn claimed_source(eps: &Rational, mu: &Rational, squares: &[Polynomial]) -> Polynomial {
    let mut p = Polynomial::constant(-(Rational::one() - eps) / int(2) - mu);
    for g in squares {
        p.add_scaled(&(g * g), &-Rational::one());
    }
    p
}

/// Checks `rhs ≡ Σ g_j² + μ` over `K_n` by the oracle, derives it, and
/// folds the derivation onto the odd clique `K_m`.
pub fn build_refutation(
    squares: &[Polynomial],
    mu: &Rational,
    eps: &Rational,
    n: usize,
    limits: &Limits,
) -> Result<RefutationCertificate> {
    let (_, rhs, _) = odd_set_slack(n, eps)?;
    if mu.is_negative() {
        return Err(Error::InvalidInput("mu must be nonnegative".into()));
    }
    for g in squares {
        crate::matching::check_match_poly(g, n)?;
    }
    let mut identity = rhs;
    identity.add_term(Monomial::one(), -mu.clone());
    for g in squares {
        identity.add_scaled(&(g * g), &-Rational::one());
    }
    if let Some((m, value)) = find_nonzero(&identity, n, limits)? {
        return Err(Error::NotAnSos(format!(
            "rhs - Σ g² - μ = {} at matching {m}",
            format_rational(&value)
        )));
    }
    let max_deg = squares.iter().filter_map(|g| g.degree()).max().unwrap_or(0) as usize;
    let k = 2 * max_deg + 1;
    let derivation = derive_zero(&identity, n, Method::Direct, limits)?;
    let folded = fold_certificate(&derivation, n)?.with_degree(2 * k as i64 - 1);
    let (m, _) = odd_set_split(n)?;
    let folded_squares = squares
        .iter()
        .map(|g| fold_substitution(g, n))
        .collect::<Result<Vec<_>>>()?;
    let out = RefutationCertificate {
        m,
        eps: eps.clone(),
        k,
        mu: mu.clone(),
        squares: folded_squares,
        cert: folded,
    };
    let report = verify_refutation(&out);
    if !report.valid {
        return Err(Error::invariant(format!(
            "folded refutation fails verification: {}",
            report.reason.unwrap_or_default()
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefutationReport {
    pub valid: bool,
    pub reason: Option<String>,
    pub k: usize,
    pub degree: i64,
}

impl fmt::Display for RefutationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            None => write!(f, "valid refutation, k={} degree={}", self.k, self.degree),
            Some(r) => write!(f, "invalid refutation: {r}"),
        }
    }
}

/// Purely syntactic: the embedded derivation verifies over `P_m` with the
/// stated source, `μ ≥ 0`, `ε ∈ [0, 1)`, `m` odd and degree `≤ 2k - 1`.
pub fn verify_refutation(r: &RefutationCertificate) -> RefutationReport {
    let fail = |reason: String| RefutationReport {
        valid: false,
        reason: Some(reason),
        k: r.k,
        degree: r.cert.degree,
    };
    if r.m % 2 == 0 {
        return fail(format!("m = {} is even", r.m));
    }
    if r.eps.is_negative() || r.eps >= Rational::one() {
        return fail(format!("eps = {} is outside [0, 1)", format_rational(&r.eps)));
    }
    if r.mu.is_negative() {
        return fail(format!("mu = {} is negative", format_rational(&r.mu)));
    }
    if r.cert.n != r.m {
        return fail(format!("derivation is over K_{} instead of K_{}", r.cert.n, r.m));
    }
    if r.squares.iter().any(|g| g.max_label() > r.m || g.kind().ok().flatten() == Some(Kind::Tour)) {
        return fail("a square uses variables outside K_m".into());
    }
    if r.cert.degree > 2 * r.k as i64 - 1 {
        return fail(format!("degree {} exceeds 2k-1 = {}", r.cert.degree, 2 * r.k - 1));
    }
    if r.cert.source != claimed_source(&r.eps, &r.mu, &r.squares) {
        return fail("derivation source is not -(1-eps)/2 - Σ g² - mu".into());
    }
    if !r.cert.result.is_zero() {
        return fail("derivation does not end in 0".into());
    }
    if let Err(v) = r.cert.check() {
        return fail(v.to_string());
    }
    RefutationReport {
        valid: true,
        reason: None,
        k: r.k,
        degree: r.cert.degree,
    }
}

impl RefutationCertificate {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "REFUTE m={} eps={} k={}\nMU {}\n",
            self.m,
            format_rational(&self.eps),
            self.k,
            format_rational(&self.mu)
        );
        for g in &self.squares {
            s.push_str("SQUARE\n");
            s.push_str(&g.to_text());
        }
        write!(s, "{}", self.cert.to_text()).expect("string write");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .collect();
        let (hl, header) = *lines.first().ok_or_else(|| Error::parse(1, "empty refutation"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || Error::parse(hl, "expected `REFUTE m=<m> eps=<p/q> k=<k>`");
        if toks.len() != 4 || toks[0] != "REFUTE" {
            return Err(bad_header());
        }
        let m: usize = header_field(toks[1], "m").ok_or_else(bad_header)?;
        let eps = toks[2]
            .strip_prefix("eps=")
            .and_then(parse_rational)
            .ok_or_else(bad_header)?;
        let k: usize = header_field(toks[3], "k").ok_or_else(bad_header)?;
        let (ml, mu_line) = *lines.get(1).ok_or_else(|| Error::parse(hl, "missing MU line"))?;
        let mu = mu_line
            .trim()
            .strip_prefix("MU")
            .and_then(|r| parse_rational(r.trim()))
            .ok_or_else(|| Error::parse(ml, "expected `MU <rational>`"))?;
        let cert_at = lines
            .iter()
            .position(|(_, l)| l.trim_start().starts_with("CERT"))
            .ok_or_else(|| Error::parse(hl, "missing embedded CERT block"))?;
        let mut squares = Vec::new();
        let mut body: Option<Vec<(usize, &str)>> = None;
        for &(ln, line) in &lines[2..cert_at] {
            if line.trim() == "SQUARE" {
                if let Some(b) = body.take() {
                    squares.push(Polynomial::parse_lines(b)?);
                }
                body = Some(Vec::new());
            } else {
                body.as_mut()
                    .ok_or_else(|| Error::parse(ln, "polynomial outside a SQUARE block"))?
                    .push((ln, line));
            }
        }
        if let Some(b) = body {
            squares.push(Polynomial::parse_lines(b)?);
        }
        let cert = Certificate::<MatchGen>::parse_lines(&lines[cert_at..])?;
        Ok(RefutationCertificate {
            m,
            eps,
            k,
            mu,
            squares,
            cert,
        })
    }
}

/// Squares for the cut-counting argument: with `c` the number of matching
/// edges leaving `S = {1..m}` and `t = (c-1)/2`, every matching has
/// `t ∈ {0, 1, 2}` and `t = ((3t - t²)/2)² + ((t² - t)/2)²`.
pub fn odd_cut_squares(n: usize) -> Result<Vec<Polynomial>> {
    let (m, _) = odd_set_split(n)?;
    let mut c = Polynomial::zero();
    for u in 1..=m {
        for v in m + 1..=n {
            c.add_term(Monomial::var(Var::edge(u, v)), Rational::one());
        }
    }
    let t = (&c - &Polynomial::one()).scale(&frac(1, 2));
    let t2 = &t * &t;
    Ok(vec![
        (&t.scale(&int(3)) - &t2).scale(&frac(1, 2)),
        (&t2 - &t).scale(&frac(1, 2)),
    ])
}

/// Polynomials written as `SQUARE` blocks.
pub fn parse_square_blocks(text: &str) -> Result<Vec<Polynomial>> {
    let mut squares = Vec::new();
    let mut body: Option<Vec<(usize, &str)>> = None;
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t == "SQUARE" {
            if let Some(b) = body.take() {
                squares.push(Polynomial::parse_lines(b)?);
            }
            body = Some(Vec::new());
        } else {
            body.as_mut()
                .ok_or_else(|| Error::parse(i + 1, "polynomial outside a SQUARE block"))?
                .push((i + 1, line));
        }
    }
    if let Some(b) = body {
        squares.push(Polynomial::parse_lines(b)?);
    }
    Ok(squares)
}
