//! Functions on solutions, the group actions on them, and the
//! symmetric-SDP-to-sum-of-squares transformer.

mod sdp;

pub use sdp::{formulation_to_sos, Objective, SdpFormulationData, SosDecomposition};

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::matching::{enumerate_perfect_matchings, PartialMatching, PerfectMatching};
use crate::perm::Permutation;
use crate::rational::{format_rational, parse_rational, Rational};
use crate::tour::enumerate_tours;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolutionSpace {
    /// Perfect matchings of `K_n`.
    Matching(usize),
    /// Tours, i.e. permutations of `[n]`.
    Tour(usize),
}

impl SolutionSpace {
    pub fn n(&self) -> usize {
        match *self {
            SolutionSpace::Matching(n) | SolutionSpace::Tour(n) => n,
        }
    }

    pub fn solutions(&self, limits: &Limits) -> Result<Solutions> {
        match *self {
            SolutionSpace::Matching(n) => {
                let list = enumerate_perfect_matchings(n, limits)?;
                let index = list.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
                Ok(Solutions::Matching { list, index })
            }
            SolutionSpace::Tour(n) => {
                let list = enumerate_tours(n, limits)?;
                let index = list.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
                Ok(Solutions::Tour { list, index })
            }
        }
    }
}

impl fmt::Display for SolutionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionSpace::Matching(n) => write!(f, "MATCH n={n}"),
            SolutionSpace::Tour(n) => write!(f, "TOUR n={n}"),
        }
    }
}

/// The solutions of a [`SolutionSpace`] in canonical order, with the index
/// lookup needed to act on them.
pub enum Solutions {
    Matching {
        list: Arc<Vec<PerfectMatching>>,
        index: HashMap<PerfectMatching, usize>,
    },
    Tour {
        list: Vec<Permutation>,
        index: HashMap<Permutation, usize>,
    },
}

impl Solutions {
    pub fn len(&self) -> usize {
        match self {
            Solutions::Matching { list, .. } => list.len(),
            Solutions::Tour { list, .. } => list.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, i: usize) -> String {
        match self {
            Solutions::Matching { list, .. } => list[i].to_string(),
            Solutions::Tour { list, .. } => list[i].to_string(),
        }
    }

    pub fn position(&self, tokens: &[&str]) -> Result<usize> {
        let missing = || Error::InvalidInput(format!("unknown solution `{}`", tokens.join(" ")));
        match self {
            Solutions::Matching { list, index } => {
                let n = list.first().map_or(0, |m| m.n());
                let m = PerfectMatching::parse(n, tokens)?;
                index.get(&m).copied().ok_or_else(missing)
            }
            Solutions::Tour { index, .. } => {
                let images = tokens
                    .iter()
                    .map(|t| t.parse::<usize>().map_err(|_| missing()))
                    .collect::<Result<Vec<_>>>()?;
                let sigma = Permutation::from_images(images)?;
                index.get(&sigma).copied().ok_or_else(missing)
            }
        }
    }

    /// Index of `g · s_i`.
    pub fn act(&self, g: &Permutation, i: usize) -> usize {
        match self {
            Solutions::Matching { list, index } => index[&list[i].act(g)],
            // g relabels rows: (g·σ)(g(i)) = σ(i)
            Solutions::Tour { list, index } => index[&list[i].compose(&g.inverse())],
        }
    }
}

/// A function on the solutions of `space`, tabulated in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SolutionFunction {
    pub n: usize,
    pub tour: bool,
    pub values: Vec<Rational>,
}

impl SolutionFunction {
    pub fn new(space: SolutionSpace, values: Vec<Rational>) -> Self {
        SolutionFunction {
            n: space.n(),
            tour: matches!(space, SolutionSpace::Tour(_)),
            values,
        }
    }

    pub fn from_fn(
        space: SolutionSpace,
        limits: &Limits,
        f: impl Fn(&Solutions, usize) -> Rational,
    ) -> Result<Self> {
        let sols = space.solutions(limits)?;
        let values = (0..sols.len()).map(|i| f(&sols, i)).collect();
        Ok(SolutionFunction::new(space, values))
    }

    /// Indicator of the edge `uv` on perfect matchings of `K_n`.
    pub fn edge_indicator(n: usize, u: usize, v: usize, limits: &Limits) -> Result<Self> {
        let list = enumerate_perfect_matchings(n, limits)?;
        Ok(SolutionFunction::new(
            SolutionSpace::Matching(n),
            list.iter()
                .map(|m| Rational::from_integer(i64::from(m.contains(u.min(v), u.max(v))).into()))
                .collect(),
        ))
    }

    pub fn space(&self) -> SolutionSpace {
        if self.tour {
            SolutionSpace::Tour(self.n)
        } else {
            SolutionSpace::Matching(self.n)
        }
    }

    /// `(g·h)(s) = h(g⁻¹·s)`.
    pub fn act(&self, g: &Permutation, sols: &Solutions) -> SolutionFunction {
        let mut values = vec![Rational::zero(); self.values.len()];
        for (i, v) in self.values.iter().enumerate() {
            values[sols.act(g, i)] = v.clone();
        }
        SolutionFunction {
            values,
            ..self.clone()
        }
    }

    pub fn to_text(&self, limits: &Limits) -> Result<String> {
        let sols = self.space().solutions(limits)?;
        let mut out = format!("FUNC {}\n", self.space());
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{} {}\n", sols.label(i), format_rational(v)));
        }
        Ok(out)
    }

    /// Reads `FUNC MATCH n=<n>` / `FUNC TOUR n=<n>` followed by one
    /// `<solution> <value>` line per solution.
    pub fn parse(text: &str, limits: &Limits) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty function file"))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let n = tokens
            .get(2)
            .and_then(|t| crate::cert::header_field::<usize>(t, "n"))
            .ok_or_else(|| Error::parse(ln, "expected `FUNC MATCH|TOUR n=<n>`"))?;
        let space = match (tokens.first(), tokens.get(1)) {
            (Some(&"FUNC"), Some(&"MATCH")) => SolutionSpace::Matching(n),
            (Some(&"FUNC"), Some(&"TOUR")) => SolutionSpace::Tour(n),
            _ => return Err(Error::parse(ln, "expected `FUNC MATCH|TOUR n=<n>`")),
        };
        let sols = space.solutions(limits)?;
        let mut values: Vec<Option<Rational>> = vec![None; sols.len()];
        for (ln, line) in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let (value, sol) = tokens.split_last().expect("non-empty line");
            let value = parse_rational(value).ok_or_else(|| Error::parse(ln, "bad value"))?;
            let i = sols.position(sol).map_err(|e| Error::parse(ln, e.to_string()))?;
            if values[i].replace(value).is_some() {
                return Err(Error::parse(ln, "solution listed twice"));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::InvalidInput(format!("no value for {}", sols.label(i)))))
            .collect::<Result<Vec<_>>>()?;
        Ok(SolutionFunction::new(space, values))
    }
}

/// An even permutation fixing `s` pointwise with `σ·M1 = M2`.
pub fn orbit_connector(
    m1: &PerfectMatching,
    m2: &PerfectMatching,
    s: &[usize],
) -> Result<Permutation> {
    let n = m1.n();
    if m2.n() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: m2.n(),
        });
    }
    let set: BTreeSet<usize> = s.iter().copied().collect();
    if set.len() != s.len() || set.iter().any(|&v| v == 0 || v > n) {
        return Err(Error::InvalidInput(format!("{s:?} is not a vertex set of K_{n}")));
    }
    if 2 * set.len() >= n {
        return Err(Error::InvalidInput(format!(
            "|S| = {} is not below n/2 = {}",
            set.len(),
            n / 2
        )));
    }
    if m1.matching().restricted_to(s) != m2.matching().restricted_to(s) {
        return Err(Error::InvalidInput("matchings differ inside S".into()));
    }
    let mut images = vec![0; n + 1];
    for &v in &set {
        images[v] = v;
        let (p1, p2) = (m1.partner(v), m2.partner(v));
        if !set.contains(&p1) {
            images[p1] = p2;
        }
    }
    let outside = |m: &PerfectMatching| -> Vec<(usize, usize)> {
        m.matching()
            .edges()
            .iter()
            .copied()
            .filter(|(u, v)| !set.contains(u) && !set.contains(v))
            .collect()
    };
    let (e1, e2) = (outside(m1), outside(m2));
    for (&(a, b), &(c, d)) in e1.iter().zip(&e2) {
        images[a] = c;
        images[b] = d;
    }
    let mut sigma = Permutation::from_images(images[1..].to_vec())
        .map_err(|_| Error::invariant("connector is not a bijection"))?;
    if !sigma.is_even() {
        let &(u, v) = e2
            .first()
            .ok_or_else(|| Error::invariant("no M2 edge disjoint from S"))?;
        sigma = Permutation::transposition(n, u, v).compose(&sigma);
    }
    if !sigma.is_even() || m1.act(&sigma) != *m2 || set.iter().any(|&v| sigma.apply(v) != v) {
        return Err(Error::invariant("orbit connector failed its own check"));
    }
    Ok(sigma)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JuntaReport {
    /// The vertex set `W`.
    pub support: Vec<usize>,
    /// Tours only: whether the value also needs the sign of `σ`.
    pub sign_dependent: bool,
}

impl fmt::Display for JuntaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w: Vec<String> = self.support.iter().map(|v| v.to_string()).collect();
        write!(f, "W = {{{}}}", w.join(","))?;
        if self.sign_dependent {
            write!(f, " + sign")?;
        }
        Ok(())
    }
}

/// The smallest vertex set `W` (lexicographically first among those of
/// minimum size) such that `h` depends only on the solution restricted to
/// `W`: the edges inside `W` for matchings, the positions of `W` for tours.
pub fn find_junta_support(h: &SolutionFunction, limits: &Limits) -> Result<JuntaReport> {
    let sols = h.space().solutions(limits)?;
    if sols.len() != h.values.len() {
        return Err(Error::SizeMismatch {
            expected: sols.len(),
            found: h.values.len(),
        });
    }
    let n = h.n;
    for size in 0..=n {
        for w in subsets(n, size) {
            let signs: &[bool] = if h.tour { &[false, true] } else { &[false] };
            for &with_sign in signs {
                if depends_only_on(h, &sols, &w, with_sign) {
                    return Ok(JuntaReport {
                        support: w,
                        sign_dependent: with_sign,
                    });
                }
            }
        }
    }
    Err(Error::invariant("no junta support found, not even the full vertex set"))
}

fn depends_only_on(h: &SolutionFunction, sols: &Solutions, w: &[usize], with_sign: bool) -> bool {
    let mut seen: HashMap<(Vec<usize>, bool), &Rational> = HashMap::new();
    for (i, value) in h.values.iter().enumerate() {
        let key = match sols {
            Solutions::Matching { list, .. } => {
                let inside: PartialMatching = list[i].matching().restricted_to(w);
                (inside.edges().iter().flat_map(|&(u, v)| [u, v]).collect(), false)
            }
            Solutions::Tour { list, .. } => (
                w.iter().map(|&v| list[i].apply(v)).collect(),
                with_sign && list[i].is_even(),
            ),
        };
        match seen.get(&key) {
            Some(&v) if v != value => return false,
            Some(_) => {}
            None => {
                seen.insert(key, value);
            }
        }
    }
    true
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for v in start..=n {
            if n - v + 1 < left {
                break;
            }
            cur.push(v);
            rec(v + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, n, size, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Alternating,
    Symmetric,
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "alternating" => Ok(Group::Alternating),
            "S" | "symmetric" => Ok(Group::Symmetric),
            other => Err(Error::InvalidInput(format!("unknown group `{other}`"))),
        }
    }
}

impl Group {
    /// A generating set: `(1 2)` and `(1 2 … n)` for `S_n`, the 3-cycles
    /// `(1 2 k)` for `A_n`.
    pub fn generators(&self, n: usize) -> Vec<Permutation> {
        match self {
            Group::Symmetric if n >= 2 => {
                let cycle = (2..=n).chain([1]).collect();
                vec![
                    Permutation::transposition(n, 1, 2),
                    Permutation::from_images(cycle).expect("cycle"),
                ]
            }
            Group::Alternating if n >= 3 => (3..=n)
                .map(|k| {
                    let mut images: Vec<usize> = (1..=n).collect();
                    images[0] = 2;
                    images[1] = k;
                    images[k - 1] = 1;
                    Permutation::from_images(images).expect("3-cycle")
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Whether `H` is closed under `(g·h)(s) = h(g⁻¹·s)` for all `g` in the
/// group. Closure under a generating set suffices since `H` is finite.
pub fn apply_group_check(h: &[SolutionFunction], group: Group, limits: &Limits) -> Result<bool> {
    let Some(first) = h.first() else {
        return Ok(true);
    };
    let space = first.space();
    if h.iter().any(|f| f.space() != space) {
        return Err(Error::InvalidInput("functions live on different solution sets".into()));
    }
    let sols = space.solutions(limits)?;
    if let Some(f) = h.iter().find(|f| f.values.len() != sols.len()) {
        return Err(Error::SizeMismatch {
            expected: sols.len(),
            found: f.values.len(),
        });
    }
    let set: BTreeSet<&Vec<Rational>> = h.iter().map(|f| &f.values).collect();
    for g in group.generators(space.n()) {
        for f in h {
            if !set.contains(&f.act(&g, &sols).values) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn pm(n: usize, text: &str) -> PerfectMatching {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        PerfectMatching::parse(n, &tokens).unwrap()
    }

    #[test]
    fn connector_identity_and_example() {
        let m = pm(6, "1-2 3-4 5-6");
        assert!(orbit_connector(&m, &m, &[1]).unwrap().is_even());
        let m2 = pm(6, "1-2 3-5 4-6");
        let sigma = orbit_connector(&m, &m2, &[1]).unwrap();
        assert!(sigma.is_even());
        assert_eq!(sigma.apply(1), 1);
        assert_eq!(m.act(&sigma), m2);
    }

    #[test]
    fn connector_rejects_bad_input() {
        let m = pm(4, "1-2 3-4");
        let m2 = pm(4, "1-3 2-4");
        assert!(matches!(orbit_connector(&m, &m2, &[1, 2]), Err(Error::InvalidInput(_))));
        let m6 = pm(6, "1-2 3-4 5-6");
        let m6b = pm(6, "1-3 2-4 5-6");
        assert!(matches!(orbit_connector(&m6, &m6b, &[1, 2]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn junta_examples() {
        let limits = Limits::default();
        let h = SolutionFunction::edge_indicator(6, 1, 2, &limits).unwrap();
        let r = find_junta_support(&h, &limits).unwrap();
        assert_eq!(r.support, vec![1, 2]);
        let c = SolutionFunction::new(SolutionSpace::Matching(6), vec![int(3); 15]);
        assert!(find_junta_support(&c, &limits).unwrap().support.is_empty());
        let sign = SolutionFunction::from_fn(SolutionSpace::Tour(4), &limits, |s, i| match s {
            Solutions::Tour { list, .. } => int(list[i].sign() as i64),
            _ => unreachable!(),
        })
        .unwrap();
        let r = find_junta_support(&sign, &limits).unwrap();
        assert!(r.support.is_empty());
        assert!(r.sign_dependent);
    }

    #[test]
    fn tour_position_junta() {
        let limits = Limits::default();
        let h = SolutionFunction::from_fn(SolutionSpace::Tour(4), &limits, |s, i| match s {
            Solutions::Tour { list, .. } => int((list[i].apply(2) == 3) as i64),
            _ => unreachable!(),
        })
        .unwrap();
        let r = find_junta_support(&h, &limits).unwrap();
        assert_eq!(r.support, vec![2]);
        assert!(!r.sign_dependent);
    }

    #[test]
    fn group_check_examples() {
        let limits = Limits::default();
        let all: Vec<SolutionFunction> = (1..=4)
            .flat_map(|u| (u + 1..=4).map(move |v| (u, v)))
            .map(|(u, v)| SolutionFunction::edge_indicator(4, u, v, &limits).unwrap())
            .collect();
        assert!(apply_group_check(&all, Group::Symmetric, &limits).unwrap());
        assert!(apply_group_check(&all, Group::Alternating, &limits).unwrap());
        assert!(!apply_group_check(&all[..1], Group::Symmetric, &limits).unwrap());
    }

    #[test]
    fn group_generators_have_expected_parity() {
        assert!(Group::Alternating.generators(6).iter().all(|g| g.is_even()));
        assert_eq!(Group::Symmetric.generators(5).len(), 2);
    }

    #[test]
    fn function_text_round_trip() {
        let limits = Limits::default();
        let h = SolutionFunction::edge_indicator(4, 1, 3, &limits).unwrap();
        let text = h.to_text(&limits).unwrap();
        assert!(text.starts_with("FUNC MATCH n=4\n1-2 3-4 0\n"));
        assert_eq!(SolutionFunction::parse(&text, &limits).unwrap(), h);
        let t = SolutionFunction::new(SolutionSpace::Tour(3), (0..6).map(int).collect());
        let text = t.to_text(&limits).unwrap();
        assert_eq!(SolutionFunction::parse(&text, &limits).unwrap(), t);
    }
}
