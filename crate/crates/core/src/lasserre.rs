//! Level-`k` Lasserre moment programs for TSP over partial bipartite
//! matchings, SDPA export, and verification of numeric SoS certificates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{One, Signed, Zero};

use crate::cert::{header_field, Generator};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::perm::Permutation;
use crate::poly::{Monomial, Polynomial};
use crate::rational::{format_rational, parse_rational, to_f64, Rational};
use crate::tour::{bipartite_matchings, tour_normal_form, BipartiteMatching, TourGen};
use crate::tsp::{val_polynomial, TspInstance};

pub const DEFAULT_TOL: f64 = 1e-7;

/// `Σ_{j ≤ ⌊k/2⌋} C(n,j)²·j!`, saturating.
pub fn basis_size(n: usize, k: usize) -> usize {
    count_matchings(n, k / 2)
}

fn count_matchings(n: usize, max_size: usize) -> usize {
    let mut total: usize = 0;
    let mut term: usize = 1;
    for j in 0..=max_size.min(n) {
        if j > 0 {
            // C(n,j)²·j! = C(n,j-1)²·(j-1)! · (n-j+1)²/j
            term = term
                .saturating_mul((n - j + 1) * (n - j + 1))
                .checked_div(j)
                .unwrap_or(usize::MAX);
        }
        total = total.saturating_add(term);
    }
    total
}

/// The monomials `y_M`, `|M| ≤ ⌊k/2⌋`, ordered by size then
/// lexicographically, with the empty matching first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MomentBasis {
    pub n: usize,
    pub k: usize,
    pub elements: Vec<BipartiteMatching>,
}

impl MomentBasis {
    pub fn new(n: usize, k: usize) -> Self {
        MomentBasis {
            n,
            k,
            elements: bipartite_matchings(n, k / 2),
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// `Σ coefficient·y_N = rhs` over moment indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, Rational)>,
    pub rhs: Rational,
}

#[derive(Clone, Debug)]
pub struct MomentProgram {
    pub n: usize,
    pub k: usize,
    pub basis: MomentBasis,
    /// `moments[0]` is the empty matching, normalized to 1.
    pub moments: Vec<BipartiteMatching>,
    index: HashMap<BipartiteMatching, usize>,
    /// Moment index of `x_M·x_M'` for each basis pair, `None` when the
    /// product reduces to 0.
    pub matrix: Vec<Vec<Option<usize>>>,
    pub constraints: Vec<LinearConstraint>,
    /// Objective coefficients by moment index; index 0 carries the constant.
    pub objective: Vec<(usize, Rational)>,
}

/// `x_M·x_M'` under the syntactic rule: the union if it is a partial
/// matching, otherwise 0.
pub fn product_matching(a: &BipartiteMatching, b: &BipartiteMatching) -> Option<BipartiteMatching> {
    let mut out = a.clone();
    for &(i, j) in b.pairs() {
        match a.col_of(i) {
            Some(c) if c == j => continue,
            Some(_) => return None,
            None if a.covers_col(j) => return None,
            None => out = out.with_pair(i, j),
        }
    }
    Some(out)
}

pub fn lasserre_build(inst: &TspInstance, k: usize, limits: &Limits) -> Result<MomentProgram> {
    let n = inst.n();
    if n == 0 {
        return Err(Error::InvalidSize(n));
    }
    if k < 2 {
        return Err(Error::InvalidLevel {
            level: k,
            min: 2,
            max: 2 * n,
        });
    }
    let size = basis_size(n, k);
    if size > limits.max_basis {
        return Err(Error::BasisTooLarge {
            size,
            cap: limits.max_basis,
        });
    }
    let basis = MomentBasis::new(n, k);
    let moments = bipartite_matchings(n, k);
    let index: HashMap<BipartiteMatching, usize> =
        moments.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();

    let matrix = basis
        .elements
        .iter()
        .map(|a| {
            basis
                .elements
                .iter()
                .map(|b| product_matching(a, b).map(|m| index[&m]))
                .collect()
        })
        .collect();

    // x_M·ROW(i) and x_M·COL(j); all other generator multiples reduce to 0 = 0.
    let mut rows: BTreeSet<LinearConstraint> = BTreeSet::new();
    for m in moments.iter().filter(|m| m.len() < k) {
        let base = index[m];
        for line in 1..=n {
            for by_row in [true, false] {
                let covered = if by_row { m.covers_row(line) } else { m.covers_col(line) };
                if covered {
                    continue;
                }
                let mut terms: Vec<(usize, Rational)> = (1..=n)
                    .filter(|&o| if by_row { !m.covers_col(o) } else { !m.covers_row(o) })
                    .map(|o| {
                        let ext = if by_row { m.with_pair(line, o) } else { m.with_pair(o, line) };
                        (index[&ext], Rational::one())
                    })
                    .collect();
                terms.push((base, -Rational::one()));
                terms.sort();
                rows.insert(LinearConstraint {
                    terms,
                    rhs: Rational::zero(),
                });
            }
        }
    }

    let (nf, _) = tour_normal_form(&val_polynomial(inst), n)?;
    let mut objective = Vec::new();
    for (mono, c) in nf.terms() {
        let m = BipartiteMatching::from_monomial(mono)
            .ok_or_else(|| Error::invariant(format!("normal form left {mono}")))?;
        let idx = index
            .get(&m)
            .ok_or_else(|| Error::invariant(format!("objective monomial {mono} above level {k}")))?;
        objective.push((*idx, c.clone()));
    }
    objective.sort();

    Ok(MomentProgram {
        n,
        k,
        basis,
        moments,
        index,
        matrix,
        constraints: rows.into_iter().collect(),
        objective,
    })
}

impl MomentProgram {
    pub fn moment_index(&self, m: &BipartiteMatching) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// `y_N = 1` when `N` is contained in the tour `σ`, else 0.
    pub fn rank_one_assignment(&self, sigma: &Permutation) -> Vec<Rational> {
        self.moments
            .iter()
            .map(|m| {
                if m.pairs().iter().all(|&(i, j)| sigma.apply(i) == j) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect()
    }

    fn check_len(&self, y: &[Rational]) -> Result<()> {
        if y.len() != self.moments.len() {
            return Err(Error::ShapeError(format!(
                "{} moment values for {} moments",
                y.len(),
                self.moments.len()
            )));
        }
        Ok(())
    }

    pub fn objective_value(&self, y: &[Rational]) -> Result<Rational> {
        self.check_len(y)?;
        Ok(self.objective.iter().map(|(i, c)| c * &y[*i]).sum())
    }

    pub fn moment_matrix(&self, y: &[Rational]) -> Result<Vec<Vec<Rational>>> {
        self.check_len(y)?;
        Ok(self
            .matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.map_or_else(Rational::zero, |i| y[i].clone()))
                    .collect()
            })
            .collect())
    }

    /// Normalization and every linear constraint hold exactly, and the moment
    /// matrix is PSD (exactly when `tol == 0`, else by eigenvalues).
    pub fn is_feasible(&self, y: &[Rational], tol: f64) -> Result<bool> {
        self.check_len(y)?;
        if !y[0].is_one() {
            return Ok(false);
        }
        for c in &self.constraints {
            let lhs: Rational = c.terms.iter().map(|(i, a)| a * &y[*i]).sum();
            if lhs != c.rhs {
                return Ok(false);
            }
        }
        let mm = self.moment_matrix(y)?;
        Ok(if tol == 0.0 {
            is_psd_exact(mm)
        } else {
            min_eigenvalue(&mm) >= -tol
        })
    }

    /// The SDPA sparse rendering, variables being the moments other than
    /// `y_∅`.
    pub fn to_sdpa(&self) -> String {
        SdpaFile::from_program(self).to_text()
    }

    pub fn to_index(&self) -> String {
        IndexManifest::from_program(self).to_text()
    }

    /// Writes `path` and the `.idx` manifest next to it.
    pub fn export_sdpa(&self, path: &Path) -> Result<(PathBuf, PathBuf)> {
        let idx = path.with_extension("idx");
        std::fs::write(path, self.to_sdpa())?;
        std::fs::write(&idx, self.to_index())?;
        Ok((path.to_path_buf(), idx))
    }
}

fn min_eigenvalue(m: &[Vec<Rational>]) -> f64 {
    let d = m.len();
    if d == 0 {
        return 0.0;
    }
    let mat = DMatrix::from_fn(d, d, |i, j| to_f64(&m[i][j]));
    SymmetricEigen::new(mat).eigenvalues.min()
}

/// Symmetric Gaussian elimination; a zero pivot needs a zero row.
pub fn is_psd_exact(mut a: Vec<Vec<Rational>>) -> bool {
    let d = a.len();
    for i in 0..d {
        for j in 0..i {
            if a[i][j] != a[j][i] {
                return false;
            }
        }
    }
    for p in 0..d {
        let pivot = a[p][p].clone();
        if pivot.is_negative() {
            return false;
        }
        if pivot.is_zero() {
            if a[p][p + 1..].iter().any(|v| !v.is_zero()) {
                return false;
            }
            continue;
        }
        let row: Vec<(usize, Rational)> = (p + 1..d)
            .filter(|&j| !a[p][j].is_zero())
            .map(|j| (j, a[p][j].clone()))
            .collect();
        for &(i, ref ai) in &row {
            let f = ai / &pivot;
            for &(j, ref aj) in &row {
                if j >= i {
                    let v = &a[i][j] - &f * aj;
                    a[i][j] = v.clone();
                    a[j][i] = v;
                }
            }
        }
    }
    true
}

/// A parsed SDPA sparse file.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpaFile {
    pub m: usize,
    /// Negative sizes mark diagonal blocks.
    pub block_sizes: Vec<i64>,
    pub c: Vec<f64>,
    /// `(matno, blkno, i, j, value)` with `i ≤ j`.
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

impl SdpaFile {
    /// `X = Σ F_i y_i − F_0 ⪰ 0`. Block 1 is the moment matrix; block 2,
    /// present when there are linear constraints, holds each equality as a
    /// pair of opposite diagonal entries.
    pub fn from_program(prog: &MomentProgram) -> SdpaFile {
        let m = prog.moments.len() - 1;
        let mut c = vec![0.0; m];
        for (i, coef) in &prog.objective {
            if *i > 0 {
                c[i - 1] = to_f64(coef);
            }
        }
        let mut exact: BTreeMap<(usize, usize, usize, usize), Rational> = BTreeMap::new();
        for (a, row) in prog.matrix.iter().enumerate() {
            for (b, e) in row.iter().enumerate().skip(a) {
                if let Some(idx) = e {
                    let v = if *idx == 0 { -Rational::one() } else { Rational::one() };
                    exact.insert((*idx, 1, a + 1, b + 1), v);
                }
            }
        }
        for (t, con) in prog.constraints.iter().enumerate() {
            let (pos, neg) = (2 * t + 1, 2 * t + 2);
            let mut shift = -con.rhs.clone();
            for (i, a) in &con.terms {
                if *i == 0 {
                    shift += a;
                } else {
                    exact.insert((*i, 2, pos, pos), a.clone());
                    exact.insert((*i, 2, neg, neg), -a.clone());
                }
            }
            if !shift.is_zero() {
                exact.insert((0, 2, pos, pos), -shift.clone());
                exact.insert((0, 2, neg, neg), shift);
            }
        }
        let mut block_sizes = vec![prog.basis.len() as i64];
        if !prog.constraints.is_empty() {
            block_sizes.push(-2 * prog.constraints.len() as i64);
        }
        SdpaFile {
            m,
            block_sizes,
            c,
            entries: exact
                .into_iter()
                .map(|((mat, blk, i, j), v)| (mat, blk, i, j, to_f64(&v)))
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "\"Lasserre moment relaxation").expect("write");
        writeln!(out, "{}", self.m).expect("write");
        writeln!(out, "{}", self.block_sizes.len()).expect("write");
        let sizes: Vec<String> = self.block_sizes.iter().map(|s| s.to_string()).collect();
        writeln!(out, "{}", sizes.join(" ")).expect("write");
        let c: Vec<String> = self.c.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", c.join(" ")).expect("write");
        for (mat, blk, i, j, v) in &self.entries {
            writeln!(out, "{mat} {blk} {i} {j} {v}").expect("write");
        }
        out
    }

    pub fn parse(text: &str) -> Result<SdpaFile> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("missing {what}")))
        };
        let nums = |lineno: usize, l: &str| -> Result<Vec<f64>> {
            l.split(|ch: char| ch.is_whitespace() || ",{}()".contains(ch))
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|_| Error::parse(lineno, format!("bad number {t}"))))
                .collect()
        };
        let (ln, l) = next("m")?;
        let m = nums(ln, l)?.first().copied().ok_or_else(|| Error::parse(ln, "missing m"))? as usize;
        let (ln, l) = next("nblocks")?;
        let nblocks =
            nums(ln, l)?.first().copied().ok_or_else(|| Error::parse(ln, "missing nblocks"))? as usize;
        let (ln, l) = next("block sizes")?;
        let block_sizes: Vec<i64> = nums(ln, l)?.into_iter().map(|v| v as i64).collect();
        if block_sizes.len() != nblocks {
            return Err(Error::parse(ln, "block size count differs from nblocks"));
        }
        let (ln, l) = next("c vector")?;
        let c = nums(ln, l)?;
        if c.len() != m {
            return Err(Error::parse(ln, format!("c has {} entries, expected {m}", c.len())));
        }
        let mut entries = Vec::new();
        for (ln, l) in lines {
            let v = nums(ln, l)?;
            if v.len() != 5 {
                return Err(Error::parse(ln, "entry needs 5 fields"));
            }
            entries.push((v[0] as usize, v[1] as usize, v[2] as usize, v[3] as usize, v[4]));
        }
        Ok(SdpaFile {
            m,
            block_sizes,
            c,
            entries,
        })
    }

    /// Largest coefficient-wise relative difference; structural differences
    /// give infinity.
    pub fn max_relative_error(&self, other: &SdpaFile) -> f64 {
        if self.m != other.m
            || self.block_sizes != other.block_sizes
            || self.entries.len() != other.entries.len()
        {
            return f64::INFINITY;
        }
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for (a, b) in self.c.iter().zip(&other.c) {
            if a != b {
                worst = worst.max(rel(*a, *b));
            }
        }
        for (a, b) in self.entries.iter().zip(&other.entries) {
            if (a.0, a.1, a.2, a.3) != (b.0, b.1, b.2, b.3) {
                return f64::INFINITY;
            }
            if a.4 != b.4 {
                worst = worst.max(rel(a.4, b.4));
            }
        }
        worst
    }
}

/// The `.idx` sidecar: matrix rows and SDPA variables as monomials, the
/// objective constant, and the equality behind each diagonal pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexManifest {
    pub n: usize,
    pub k: usize,
    pub constant: Rational,
    pub basis: Vec<BipartiteMatching>,
    /// Variable `i` (1-based) is `vars[i-1]`.
    pub vars: Vec<BipartiteMatching>,
    pub constraints: Vec<LinearConstraint>,
}

impl IndexManifest {
    pub fn from_program(prog: &MomentProgram) -> Self {
        let constant = prog
            .objective
            .iter()
            .find(|(i, _)| *i == 0)
            .map_or_else(Rational::zero, |(_, c)| c.clone());
        IndexManifest {
            n: prog.n,
            k: prog.k,
            constant,
            basis: prog.basis.elements.clone(),
            vars: prog.moments[1..].to_vec(),
            constraints: prog.constraints.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "IDX n={} k={} basis={} vars={} constraints={}\n",
            self.n,
            self.k,
            self.basis.len(),
            self.vars.len(),
            self.constraints.len()
        );
        writeln!(out, "CONSTANT {}", format_rational(&self.constant)).expect("write");
        for (i, m) in self.basis.iter().enumerate() {
            writeln!(out, "BASIS {} {}", i + 1, m.monomial()).expect("write");
        }
        for (i, m) in self.vars.iter().enumerate() {
            writeln!(out, "VAR {} {}", i + 1, m.monomial()).expect("write");
        }
        for (t, c) in self.constraints.iter().enumerate() {
            let terms: Vec<String> = c
                .terms
                .iter()
                .map(|(i, a)| format!("{}:{}", i, format_rational(a)))
                .collect();
            writeln!(
                out,
                "EQ {} {} {} = {}",
                2 * t + 1,
                2 * t + 2,
                terms.join(" "),
                format_rational(&c.rhs)
            )
            .expect("write");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| Error::parse(0, "empty manifest"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 6 || toks[0] != "IDX" {
            return Err(Error::parse(hl, "expected `IDX n=… k=… basis=… vars=… constraints=…`"));
        }
        let field = |t: &str, key: &str| -> Result<usize> {
            header_field(t, key).ok_or_else(|| Error::parse(hl, format!("bad {key}")))
        };
        let n = field(toks[1], "n")?;
        let k = field(toks[2], "k")?;
        let counts = [field(toks[3], "basis")?, field(toks[4], "vars")?, field(toks[5], "constraints")?];
        let mut manifest = IndexManifest {
            n,
            k,
            constant: Rational::zero(),
            basis: Vec::new(),
            vars: Vec::new(),
            constraints: Vec::new(),
        };
        let matching = |ln: usize, text: &str| -> Result<BipartiteMatching> {
            let p = Polynomial::parse(text)?;
            let (mono, _) = p
                .terms()
                .next()
                .ok_or_else(|| Error::parse(ln, "missing monomial"))?;
            BipartiteMatching::from_monomial(mono)
                .ok_or_else(|| Error::parse(ln, format!("{mono} is not a partial matching")))
        };
        for (ln, line) in lines {
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            match tag {
                "CONSTANT" => {
                    manifest.constant =
                        parse_rational(rest).ok_or_else(|| Error::parse(ln, "bad constant"))?;
                }
                "BASIS" | "VAR" => {
                    let (idx, mono) = rest.trim().split_once(' ').ok_or_else(|| Error::parse(ln, "bad entry"))?;
                    let list = if tag == "BASIS" { &mut manifest.basis } else { &mut manifest.vars };
                    if idx.parse::<usize>().ok() != Some(list.len() + 1) {
                        return Err(Error::parse(ln, format!("{tag} indices must be consecutive")));
                    }
                    list.push(matching(ln, mono)?);
                }
                "EQ" => {
                    let (lhs, rhs) = rest.split_once('=').ok_or_else(|| Error::parse(ln, "missing ="))?;
                    let mut terms = Vec::new();
                    for tok in lhs.split_whitespace().skip(2) {
                        let (i, a) = tok.split_once(':').ok_or_else(|| Error::parse(ln, "bad term"))?;
                        let i = i.parse().map_err(|_| Error::parse(ln, "bad index"))?;
                        let a = parse_rational(a).ok_or_else(|| Error::parse(ln, "bad coefficient"))?;
                        terms.push((i, a));
                    }
                    let rhs = parse_rational(rhs).ok_or_else(|| Error::parse(ln, "bad right-hand side"))?;
                    manifest.constraints.push(LinearConstraint { terms, rhs });
                }
                _ => return Err(Error::parse(ln, format!("unknown record {tag}"))),
            }
        }
        let found = [manifest.basis.len(), manifest.vars.len(), manifest.constraints.len()];
        if found != counts {
            return Err(Error::parse(hl, format!("header counts {counts:?} but found {found:?}")));
        }
        Ok(manifest)
    }
}

/// `val_I − C ≡ bᵀ·G·b + Σ q·g` with `b` the moment basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NumericSosCertificate {
    pub n: usize,
    pub k: usize,
    pub bound: Rational,
    pub gram: Vec<Vec<Rational>>,
    pub cofactors: BTreeMap<TourGen, Polynomial>,
}

impl NumericSosCertificate {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "NUMCERT n={} k={} C={}\nGRAM {}\n",
            self.n,
            self.k,
            format_rational(&self.bound),
            self.gram.len()
        );
        for row in &self.gram {
            let cells: Vec<String> = row.iter().map(format_rational).collect();
            writeln!(out, "{}", cells.join(" ")).expect("write");
        }
        for (g, q) in &self.cofactors {
            writeln!(out, "COFACTOR {g} :").expect("write");
            out.push_str(&q.to_text());
        }
        out
    }

    /// Numbers may be decimals; they are read exactly.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let (hl, header) = *lines.first().ok_or_else(|| Error::parse(0, "empty certificate"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "NUMCERT" {
            return Err(Error::parse(hl, "expected `NUMCERT n=… k=… C=…`"));
        }
        let n = header_field(toks[1], "n").ok_or_else(|| Error::parse(hl, "bad n"))?;
        let k = header_field(toks[2], "k").ok_or_else(|| Error::parse(hl, "bad k"))?;
        let bound = toks[3]
            .strip_prefix("C=")
            .and_then(parse_rational)
            .ok_or_else(|| Error::parse(hl, "bad C"))?;
        let (gl, gram_header) = *lines.get(1).ok_or_else(|| Error::parse(hl, "missing GRAM"))?;
        let size: usize = gram_header
            .strip_prefix("GRAM")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(gl, "expected `GRAM <size>`"))?;
        let mut gram = Vec::with_capacity(size);
        for &(ln, line) in lines.iter().skip(2).take(size) {
            let row: Vec<Rational> = line
                .split_whitespace()
                .map(|t| parse_rational(t).ok_or_else(|| Error::parse(ln, format!("bad number {t}"))))
                .collect::<Result<_>>()?;
            gram.push(row);
        }
        if gram.len() != size {
            return Err(Error::parse(gl, "Gram matrix is truncated"));
        }
        let mut cofactors: BTreeMap<TourGen, Polynomial> = BTreeMap::new();
        let mut current: Option<(TourGen, Vec<(usize, &str)>)> = None;
        let mut flush = |cur: Option<(TourGen, Vec<(usize, &str)>)>| -> Result<()> {
            if let Some((g, body)) = cur {
                let p = Polynomial::parse_lines(body)?;
                let entry = cofactors.entry(g).or_insert_with(Polynomial::zero);
                entry.add_scaled(&p, &Rational::one());
            }
            Ok(())
        };
        for &(ln, line) in lines.iter().skip(2 + size) {
            if let Some(rest) = line.strip_prefix("COFACTOR") {
                let rest = rest.trim().strip_suffix(':').unwrap_or(rest).trim();
                let id: Vec<&str> = rest.split_whitespace().collect();
                let g = TourGen::parse_id(&id)
                    .ok_or_else(|| Error::parse(ln, format!("unknown generator `{rest}`")))?;
                flush(current.take())?;
                current = Some((g, Vec::new()));
            } else {
                match current.as_mut() {
                    Some((_, body)) => body.push((ln, line)),
                    None => return Err(Error::parse(ln, "polynomial outside a COFACTOR block")),
                }
            }
        }
        flush(current)?;
        Ok(NumericSosCertificate {
            n,
            k,
            bound,
            gram,
            cofactors,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericReport {
    pub valid: bool,
    /// The certified lower bound `C`.
    pub bound: Rational,
    pub min_eigenvalue: f64,
    /// Largest residual coefficient magnitude after normal form.
    pub residual: f64,
    pub reason: Option<String>,
}

/// Checks the Gram matrix is PSD and that `val_I − C − bᵀGb − Σ q·g`
/// vanishes after [`tour_normal_form`], both within `tol`. With `tol == 0`
/// both checks are exact.
pub fn verify_numeric_certificate(
    inst: &TspInstance,
    cert: &NumericSosCertificate,
    tol: f64,
) -> Result<NumericReport> {
    let n = inst.n();
    if cert.n != n {
        return Err(Error::ShapeError(format!("certificate for n={} but instance has n={n}", cert.n)));
    }
    let basis = MomentBasis::new(n, cert.k);
    let b = basis.len();
    if cert.gram.len() != b || cert.gram.iter().any(|r| r.len() != b) {
        return Err(Error::ShapeError(format!("Gram matrix must be {b}x{b} for level {}", cert.k)));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be non-negative")));
    }
    let mut report = NumericReport {
        valid: false,
        bound: cert.bound.clone(),
        min_eigenvalue: min_eigenvalue(&cert.gram),
        residual: f64::INFINITY,
        reason: None,
    };

    for (g, q) in &cert.cofactors {
        if !g.valid_for(n) {
            report.reason = Some(format!("generator {g} is not valid for n={n}"));
            return Ok(report);
        }
        let deg = q.degree_or_neg() + g.degree() as i64;
        if deg > cert.k as i64 {
            report.reason = Some(format!("cofactor of {g} gives degree {deg} > {}", cert.k));
            return Ok(report);
        }
        if q.kind()? == Some(crate::poly::Kind::Match) {
            return Err(Error::KindMismatch);
        }
    }

    let mut rest = val_polynomial(inst);
    rest.add_term(Monomial::one(), -cert.bound.clone());
    for (g, q) in &cert.cofactors {
        rest.add_scaled(&(q * &g.expand(n)), &-Rational::one());
    }
    let (mut residual, _) = tour_normal_form(&rest, n)?;
    for (a, ma) in basis.elements.iter().enumerate() {
        for (c, mc) in basis.elements.iter().enumerate() {
            let w = &cert.gram[a][c];
            if w.is_zero() {
                continue;
            }
            if let Some(m) = product_matching(ma, mc) {
                residual.add_term(m.monomial(), -w.clone());
            }
        }
    }
    let worst = residual
        .terms()
        .map(|(_, c)| c.abs())
        .max()
        .unwrap_or_else(Rational::zero);
    report.residual = to_f64(&worst);

    let asym = (0..b)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (&cert.gram[i][j] - &cert.gram[j][i]).abs())
        .max()
        .unwrap_or_else(Rational::zero);

    let (psd, residual_ok, symmetric) = if tol == 0.0 {
        (is_psd_exact(cert.gram.clone()), worst.is_zero(), asym.is_zero())
    } else {
        (
            report.min_eigenvalue >= -tol,
            report.residual <= tol,
            to_f64(&asym) <= tol,
        )
    };
    report.reason = if !symmetric {
        Some(format!("Gram matrix is not symmetric (defect {})", to_f64(&asym)))
    } else if !psd {
        Some(format!("Gram matrix has eigenvalue {:e}", report.min_eigenvalue))
    } else if !residual_ok {
        Some(format!("identity residual {:e} exceeds tolerance", report.residual))
    } else {
        None
    };
    report.valid = report.reason.is_none();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use crate::tour::tour_derive_zero_with_bound;

    #[test]
    fn basis_sizes() {
        assert_eq!(basis_size(3, 2), 10);
        assert_eq!(basis_size(5, 4), 226);
        assert_eq!(basis_size(3, 3), 10);
        let prog = lasserre_build(&TspInstance::uniform(2, int(1)), 2, &Limits::default()).unwrap();
        let names: Vec<String> = prog.basis.elements.iter().map(|m| m.monomial().to_string()).collect();
        assert_eq!(names, ["1", "y1_1", "y1_2", "y2_1", "y2_2"]);
        for n in 2..=5 {
            for k in 2..=4 {
                assert_eq!(MomentBasis::new(n, k).len(), basis_size(n, k));
            }
        }
    }

    #[test]
    fn level_and_cap_errors() {
        let inst = TspInstance::uniform(3, int(1));
        assert!(matches!(
            lasserre_build(&inst, 1, &Limits::default()),
            Err(Error::InvalidLevel { .. })
        ));
        let tight = Limits {
            max_basis: 9,
            ..Limits::default()
        };
        assert_eq!(
            lasserre_build(&inst, 2, &tight).unwrap_err(),
            Error::BasisTooLarge { size: 10, cap: 9 }
        );
    }

    #[test]
    fn constant_term_goes_to_empty_moment() {
        let inst = TspInstance::uniform(3, int(0));
        let prog = lasserre_build(&inst, 2, &Limits::default()).unwrap();
        assert!(prog.objective.is_empty());
        let file = SdpaFile::from_program(&prog);
        assert!(file.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rank_one_assignments_feasible() {
        let inst = TspInstance::new(vec![
            vec![int(0), int(2), int(3)],
            vec![int(2), int(0), int(4)],
            vec![int(3), int(4), int(0)],
        ])
        .unwrap();
        let prog = lasserre_build(&inst, 2, &Limits::default()).unwrap();
        for sigma in Permutation::all(3) {
            let y = prog.rank_one_assignment(&sigma);
            assert!(prog.is_feasible(&y, 0.0).unwrap());
            assert!(prog.is_feasible(&y, 1e-9).unwrap());
            assert_eq!(prog.objective_value(&y).unwrap(), inst.tour_value(&sigma));
        }
        let mut bad = prog.rank_one_assignment(&Permutation::identity(3));
        bad[1] = int(2);
        assert!(!prog.is_feasible(&bad, 0.0).unwrap());
    }

    #[test]
    fn sdpa_round_trip() {
        let inst = TspInstance::new(vec![vec![int(0), frac(1, 3)], vec![frac(1, 3), int(0)]]).unwrap();
        let prog = lasserre_build(&inst, 2, &Limits::default()).unwrap();
        let text = prog.to_sdpa();
        let parsed = SdpaFile::parse(&text).unwrap();
        assert_eq!(parsed.block_sizes[0], 5);
        assert!(parsed.max_relative_error(&SdpaFile::from_program(&prog)) <= 1e-12);
        let idx = IndexManifest::parse(&prog.to_index()).unwrap();
        assert_eq!(idx, IndexManifest::from_program(&prog));
        assert_eq!(prog.to_sdpa(), text);
    }

    #[test]
    fn psd_exact() {
        assert!(is_psd_exact(vec![vec![int(1), int(1)], vec![int(1), int(1)]]));
        assert!(!is_psd_exact(vec![vec![int(1), int(2)], vec![int(2), int(1)]]));
        assert!(!is_psd_exact(vec![vec![int(0), int(1)], vec![int(1), int(0)]]));
        assert!(is_psd_exact(vec![vec![int(0), int(0)], vec![int(0), int(3)]]));
    }

    fn uniform_certificate(c: Rational) -> NumericSosCertificate {
        let inst = TspInstance::uniform(3, int(1));
        let f = &val_polynomial(&inst) - &Polynomial::constant(int(3));
        let cert = tour_derive_zero_with_bound(&f, 3, 2, &Limits::default()).unwrap().unwrap();
        NumericSosCertificate {
            n: 3,
            k: 2,
            bound: c,
            gram: vec![vec![int(0); 10]; 10],
            cofactors: cert.cofactors.iter().map(|(g, q)| (*g, -q.clone())).collect(),
        }
    }

    #[test]
    fn uniform_triangle_certificate() {
        let inst = TspInstance::uniform(3, int(1));
        let good = uniform_certificate(int(3));
        for tol in [0.0, DEFAULT_TOL] {
            let r = verify_numeric_certificate(&inst, &good, tol).unwrap();
            assert!(r.valid, "{:?}", r.reason);
            assert_eq!(r.bound, int(3));
        }
        let bad = uniform_certificate(frac(31, 10));
        let r = verify_numeric_certificate(&inst, &bad, DEFAULT_TOL).unwrap();
        assert!(!r.valid);
        assert!((r.residual - 0.1).abs() < 1e-12);
        let parsed = NumericSosCertificate::parse(&good.to_text()).unwrap();
        assert_eq!(parsed, good);
        let mut shape = good.clone();
        shape.gram.pop();
        assert!(matches!(
            verify_numeric_certificate(&inst, &shape, DEFAULT_TOL),
            Err(Error::ShapeError(_))
        ));
    }
}
