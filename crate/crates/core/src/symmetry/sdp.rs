use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{SolutionFunction, SolutionSpace};
use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::rational::{parse_rational, to_f64};

const PSD_CLAMP: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-9;

/// One objective `f` of the formulation with its affine linearization
/// `w^f(X) = ⟨W, X⟩ + w0`, guarantees and optional dual `(U^f, μ_f)`.
#[derive(Clone, Debug)]
pub struct Objective {
    pub f: SolutionFunction,
    pub w: DMatrix<f64>,
    pub w0: f64,
    pub c_tilde: f64,
    pub s_tilde: f64,
    pub dual: Option<(DMatrix<f64>, f64)>,
}

/// Per-solution PSD matrices `X^s` (canonical solution order) and the
/// objectives they linearize.
#[derive(Clone, Debug)]
pub struct SdpFormulationData {
    pub space: SolutionSpace,
    pub d: usize,
    pub x: Vec<DMatrix<f64>>,
    pub objectives: Vec<Objective>,
}

#[derive(Clone, Debug)]
pub struct SosDecomposition {
    pub d: usize,
    /// `√X^s` per solution; `h_ij(s)` is its `(i, j)` entry.
    pub h: Vec<DMatrix<f64>>,
    /// `√U^f`, the coefficients of the squares in the `h_kj`.
    pub coefficients: DMatrix<f64>,
    pub mu: f64,
    pub c_tilde: f64,
    /// `|C̃ − f(s) − Σ g² − μ|` per solution.
    pub residuals: Vec<f64>,
}

impl SosDecomposition {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// The functions `h_ij`, `i ≤ j`, as value tables.
    pub fn basis_functions(&self) -> Vec<((usize, usize), Vec<f64>)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in i..self.d {
                out.push(((i, j), self.h.iter().map(|m| m[(i, j)]).collect()));
            }
        }
        out
    }

    /// Number of pairwise distinct `h_ij` (up to `tol`).
    pub fn distinct_functions(&self, tol: f64) -> usize {
        let mut kept: Vec<Vec<f64>> = Vec::new();
        for (_, f) in self.basis_functions() {
            let same = |g: &Vec<f64>| f.iter().zip(g).all(|(a, b)| (a - b).abs() <= tol);
            if !kept.iter().any(same) {
                kept.push(f);
            }
        }
        kept.len()
    }

    /// Values of the squared polynomials `g_ij = Σ_k √U_ik h_kj` at
    /// solution `s`.
    pub fn squares(&self, s: usize) -> DMatrix<f64> {
        &self.coefficients * &self.h[s]
    }
}

/// The PSD square root, clamping eigenvalues in `[-1e-9, 0)` to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::ShapeError(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let asym = (m - m.transpose()).amax();
    if asym > PSD_CLAMP {
        return Err(Error::ShapeError(format!("matrix is not symmetric (defect {asym:e})")));
    }
    let eig = SymmetricEigen::new(m.clone());
    if let Some(&low) = eig.eigenvalues.iter().find(|&&l| l < -PSD_CLAMP) {
        return Err(Error::NotPsd(low));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Rewrites `C̃(f) − f(s) = Tr[U^f X^s] + μ_f` as
/// `Σ_{i,j} (Σ_k √U_ik h_kj(s))² + μ_f` with `h_ij(s) = √X^s_ij` and checks
/// the identity on every solution.
pub fn formulation_to_sos(data: &SdpFormulationData, f: usize) -> Result<SosDecomposition> {
    let obj = data
        .objectives
        .get(f)
        .ok_or_else(|| Error::InvalidInput(format!("no objective {f}")))?;
    let (u, mu) = obj
        .dual
        .as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("objective {f} has no dual certificate")))?;
    if *mu < 0.0 {
        return Err(Error::DualInvalid(format!("mu = {mu} is negative")));
    }
    if obj.f.values.len() != data.x.len() {
        return Err(Error::SizeMismatch {
            expected: data.x.len(),
            found: obj.f.values.len(),
        });
    }
    let values: Vec<f64> = obj.f.values.iter().map(to_f64).collect();
    let max_f = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_f > obj.s_tilde + IDENTITY_TOL {
        return Err(Error::InvalidInput(format!(
            "max f = {max_f} exceeds the soundness guarantee {}",
            obj.s_tilde
        )));
    }
    let d = data.d;
    for m in data.x.iter().chain([u, &obj.w]) {
        if m.shape() != (d, d) {
            return Err(Error::ShapeError(format!("expected {d}x{d}, got {:?}", m.shape())));
        }
    }
    let scale = IDENTITY_TOL * obj.c_tilde.abs().max(1.0);
    for (s, (x, &fs)) in data.x.iter().zip(&values).enumerate() {
        let lin = obj.w.dot(x) + obj.w0;
        if (lin - fs).abs() > scale {
            return Err(Error::InvalidInput(format!(
                "linearization gives {lin} instead of {fs} at solution {s}"
            )));
        }
    }
    let coefficients = psd_sqrt(u)?;
    let h = data.x.iter().map(psd_sqrt).collect::<Result<Vec<_>>>()?;
    let mut residuals = Vec::with_capacity(h.len());
    for (s, (root, &fs)) in h.iter().zip(&values).enumerate() {
        let g = &coefficients * root;
        let rhs = g.norm_squared() + mu;
        let residual = (obj.c_tilde - fs - rhs).abs();
        if residual > scale {
            return Err(Error::DualInvalid(format!(
                "residual {residual:e} at solution {s}"
            )));
        }
        residuals.push(residual);
    }
    Ok(SosDecomposition {
        d,
        h,
        coefficients,
        mu: *mu,
        c_tilde: obj.c_tilde,
        residuals,
    })
}

fn read_matrix(path: &Path, d: usize) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::with_capacity(d * d);
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rows += 1;
        let before = entries.len();
        for tok in line.split_whitespace() {
            let v = parse_rational(tok)
                .ok_or_else(|| Error::parse(ln + 1, format!("bad number `{tok}`")))?;
            entries.push(to_f64(&v));
        }
        if entries.len() - before != d {
            return Err(Error::ShapeError(format!("{}: row {rows} has wrong length", path.display())));
        }
    }
    if rows != d {
        return Err(Error::ShapeError(format!("{}: expected {d} rows, got {rows}", path.display())));
    }
    Ok(DMatrix::from_row_slice(d, d, &entries))
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.row_iter() {
        let parts: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", parts.join(" ")).expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

fn field<'a>(tokens: &[&'a str], key: &str, ln: usize) -> Result<&'a str> {
    tokens
        .iter()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| Error::parse(ln, format!("missing `{key}=`")))
}

fn number(tokens: &[&str], key: &str, ln: usize) -> Result<f64> {
    let raw = field(tokens, key, ln)?;
    parse_rational(raw)
        .map(|r| to_f64(&r))
        .ok_or_else(|| Error::parse(ln, format!("bad number for `{key}`")))
}

impl SdpFormulationData {
    /// Reads `manifest.txt` from `dir`:
    ///
    /// ```text
    /// SDP MATCH n=4 d=2
    /// X 1-2 3-4 = x1.mat
    /// OBJECTIVE F=f.func W=w.mat w0=0 C=1 S=1 U=u.mat mu=0
    /// ```
    ///
    /// Matrix files hold `d` rows of `d` numbers; `U`/`mu` are optional.
    pub fn load(dir: &Path, limits: &Limits) -> Result<Self> {
        let manifest = fs::read_to_string(dir.join("manifest.txt"))?;
        let mut lines = manifest
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty manifest"))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let n: usize = field(&tokens, "n", ln)?
            .parse()
            .map_err(|_| Error::parse(ln, "bad n"))?;
        let d: usize = field(&tokens, "d", ln)?
            .parse()
            .map_err(|_| Error::parse(ln, "bad d"))?;
        let space = match tokens.get(..2) {
            Some(["SDP", "MATCH"]) => SolutionSpace::Matching(n),
            Some(["SDP", "TOUR"]) => SolutionSpace::Tour(n),
            _ => return Err(Error::parse(ln, "expected `SDP MATCH|TOUR n=<n> d=<d>`")),
        };
        let sols = space.solutions(limits)?;
        let mut x: Vec<Option<DMatrix<f64>>> = vec![None; sols.len()];
        let mut objectives = Vec::new();
        for (ln, line) in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "X" => {
                    let eq = tokens
                        .iter()
                        .position(|&t| t == "=")
                        .ok_or_else(|| Error::parse(ln, "expected `X <solution> = <file>`"))?;
                    let file = tokens.get(eq + 1).ok_or_else(|| Error::parse(ln, "missing file"))?;
                    let s = sols
                        .position(&tokens[1..eq])
                        .map_err(|e| Error::parse(ln, e.to_string()))?;
                    x[s] = Some(read_matrix(&dir.join(file), d)?);
                }
                "OBJECTIVE" => {
                    let f = SolutionFunction::parse(
                        &fs::read_to_string(dir.join(field(&tokens, "F", ln)?))?,
                        limits,
                    )?;
                    if f.space() != space {
                        return Err(Error::parse(ln, "objective lives on another solution set"));
                    }
                    let dual = match field(&tokens, "U", ln) {
                        Ok(file) => Some((read_matrix(&dir.join(file), d)?, number(&tokens, "mu", ln)?)),
                        Err(_) => None,
                    };
                    objectives.push(Objective {
                        f,
                        w: read_matrix(&dir.join(field(&tokens, "W", ln)?), d)?,
                        w0: number(&tokens, "w0", ln)?,
                        c_tilde: number(&tokens, "C", ln)?,
                        s_tilde: number(&tokens, "S", ln)?,
                        dual,
                    });
                }
                other => return Err(Error::parse(ln, format!("unknown directive `{other}`"))),
            }
        }
        let x = x
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.ok_or_else(|| Error::InvalidInput(format!("no matrix for {}", sols.label(i)))))
            .collect::<Result<Vec<_>>>()?;
        Ok(SdpFormulationData {
            space,
            d,
            x,
            objectives,
        })
    }

    pub fn save(&self, dir: &Path, limits: &Limits) -> Result<()> {
        fs::create_dir_all(dir)?;
        let sols = self.space.solutions(limits)?;
        let mut manifest = format!("SDP {} d={}\n", self.space, self.d);
        for (s, m) in self.x.iter().enumerate() {
            let file = format!("x{}.mat", s + 1);
            write_matrix(&dir.join(&file), m)?;
            writeln!(manifest, "X {} = {file}", sols.label(s)).expect("string write");
        }
        for (k, obj) in self.objectives.iter().enumerate() {
            let (f, w) = (format!("f{}.func", k + 1), format!("w{}.mat", k + 1));
            fs::write(dir.join(&f), obj.f.to_text(limits)?)?;
            write_matrix(&dir.join(&w), &obj.w)?;
            write!(
                manifest,
                "OBJECTIVE F={f} W={w} w0={:?} C={:?} S={:?}",
                obj.w0, obj.c_tilde, obj.s_tilde
            )
            .expect("string write");
            if let Some((u, mu)) = &obj.dual {
                let file = format!("u{}.mat", k + 1);
                write_matrix(&dir.join(&file), u)?;
                write!(manifest, " U={file} mu={mu:?}").expect("string write");
            }
            manifest.push('\n');
        }
        fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }
}
