//! The `matchideal` command-line tool.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::lasserre::{lasserre_build, verify_numeric_certificate, NumericSosCertificate, DEFAULT_TOL};
use crate::limits::Limits;
use crate::matching::{
    derive_zero, enumerate_perfect_matchings, find_nonzero, normal_form, symmetrize_constant,
    DerivationCertificate, Method, PerfectMatching,
};
use crate::perm::Permutation;
use crate::poly::Polynomial;
use crate::rational::{format_rational, frac, parse_rational, Rational};
use crate::symmetry::{find_junta_support, formulation_to_sos, orbit_connector, SdpFormulationData, SolutionFunction};
use crate::tour::{tour_derive_zero, tour_normal_form, tour_symmetrize_constant, TourCertificate};
use crate::tsp::{
    build_refutation, canonicalize, double_instance, fold_substitution, is_canonical, odd_cut_squares,
    parse_square_blocks, phi_map, val_polynomial, verify_refutation, RefutationCertificate, TspInstance,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "matchideal", version, about = "Exact matching/tour ideal derivations, SoS certificates and Lasserre programs")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Instance size.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Lasserre level.
    #[arg(long, global = true)]
    pub level: Option<usize>,
    /// Slack parameter ε as a rational.
    #[arg(long, global = true)]
    pub eps: Option<String>,
    /// `direct` or `inductive`.
    #[arg(long, global = true, default_value = "direct")]
    pub method: String,
    /// Numeric tolerance; 0 makes the check exact.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Largest n for brute-force matching enumeration.
    #[arg(long = "max-oracle", global = true)]
    pub max_oracle: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Perfect-matching ideal P_n.
    #[command(subcommand)]
    Pm(PmCommand),
    /// Tour ideal Q_n.
    #[command(subcommand)]
    Tour(TourCommand),
    /// Symmetry tools.
    #[command(subcommand)]
    Sym(SymCommand),
    /// TSP instances, doubling and odd-set refutations.
    #[command(subcommand)]
    Tsp(TspCommand),
    /// Lasserre moment programs.
    #[command(subcommand)]
    Lasserre(LasserreCommand),
}

#[derive(Args, Debug)]
pub struct PolyArgs {
    /// Polynomial file.
    #[arg(long)]
    pub poly: PathBuf,
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the certificate.
    #[arg(long = "cert-out")]
    pub cert_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CertArgs {
    #[arg(long)]
    pub cert: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum PmCommand {
    /// List all perfect matchings of K_n.
    Enumerate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reduce to partial-matching monomials.
    Nf(PolyArgs),
    /// Certify F ≡ 0.
    Derive(PolyArgs),
    /// Check a certificate.
    Verify(CertArgs),
    /// The constant c with Σ_σ σF ≡ c.
    Symmetrize(PolyArgs),
    /// Count perfect matchings, or test a polynomial on all of them.
    Oracle {
        #[arg(long)]
        poly: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum TourCommand {
    /// Reduce to bipartite-matching monomials
    Nf(PolyArgs),
    /// Certify F ≡ 0 over Q_n
    Derive(PolyArgs),
    /// Check a certificate
    Verify(CertArgs),
    /// The constant c with Σ_σ σF ≡ c
    Symmetrize(PolyArgs),
}

#[derive(Subcommand, Debug)]
pub enum SymCommand {
    /// An even permutation fixing S and mapping M1 to M2.
    OrbitConnect {
        /// Edges such as `1-2 3-4`.
        #[arg(long)]
        m1: String,
        #[arg(long)]
        m2: String,
        /// Comma-separated vertices.
        #[arg(long, default_value = "")]
        set: String,
    },
    /// Smallest vertex support of a function on solutions.
    Junta {
        #[arg(long)]
        func: PathBuf,
    },
    /// Turn a symmetric SDP formulation with a dual into squares.
    Sdp2sos {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        objective: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum TspCommand {
    /// Tour value, or the polynomial val_I.
    Val {
        #[arg(long)]
        instance: PathBuf,
        /// Positions of vertices 1..n.
        #[arg(long)]
        tour: Option<String>,
    },
    /// The doubled instance on 2n vertices.
    Double {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Φ(σ) on the doubled labels.
    Phi {
        #[arg(long)]
        tour: String,
    },
    /// A canonical tour of the doubled instance no longer than τ.
    Canonicalize {
        /// The original instance.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        tour: String,
    },
    /// Apply the odd-clique folding substitution.
    Fold(PolyArgs),
    /// Build an odd-clique refutation.
    RefuteBuild {
        /// `SQUARE` blocks; the cut-counting squares if absent.
        #[arg(long)]
        squares: Option<PathBuf>,
        #[arg(long)]
        mu: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an odd-clique refutation
    RefuteVerify(CertArgs),
}

#[derive(Subcommand, Debug)]
pub enum LasserreCommand {
    /// Build the moment program and print its dimensions.
    Build {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Write `.dat-s` and `.idx` files.
    Export {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a numeric SoS certificate.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        cert: PathBuf,
    },
}

/// What a command produced: text for stdout and whether the checked
/// statement held.
struct Outcome {
    text: String,
    holds: bool,
}

impl Outcome {
    fn ok(text: impl Into<String>) -> Self {
        Outcome {
            text: text.into(),
            holds: true,
        }
    }

    fn verdict(holds: bool, text: impl Into<String>) -> Self {
        Outcome {
            text: text.into(),
            holds,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InternalInvariant(_) => EXIT_INVARIANT,
        Error::NotAMember { .. } | Error::NotAnSos(_) | Error::DualInvalid(_) | Error::NotPsd(_) => EXIT_FALSE,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            if out.holds {
                EXIT_OK
            } else {
                EXIT_FALSE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn limits(g: &Global) -> Limits {
    let mut l = Limits::from_env();
    if let Some(m) = g.max_oracle {
        l.max_oracle = m;
    }
    l
}

fn need_n(g: &Global) -> Result<usize> {
    g.n.ok_or_else(|| Error::InvalidInput("--n is required".into()))
}

fn eps(g: &Global) -> Result<Rational> {
    match &g.eps {
        None => Ok(Rational::from_integer(0.into())),
        Some(s) => parse_rational(s).ok_or_else(|| Error::InvalidInput(format!("bad --eps {s}"))),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_poly(path: &Path) -> Result<Polynomial> {
    Polynomial::parse(&read(path)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `text` to `out` or returns it for stdout.
fn emit(out: &Option<PathBuf>, text: String) -> Result<String> {
    match out {
        Some(p) => {
            write(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn parse_perm(s: &str) -> Result<Permutation> {
    let images: Vec<usize> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::InvalidInput(format!("bad tour entry `{t}`"))))
        .collect::<Result<_>>()?;
    Permutation::from_images(images)
}

fn read_instance(path: &Path) -> Result<TspInstance> {
    TspInstance::parse(&read(path)?)
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let limits = limits(g);
    match &cli.command {
        Command::Pm(cmd) => pm(cmd, g, &limits),
        Command::Tour(cmd) => tour(cmd, g, &limits),
        Command::Sym(cmd) => sym(cmd, g, &limits),
        Command::Tsp(cmd) => tsp(cmd, g, &limits),
        Command::Lasserre(cmd) => lasserre(cmd, g, &limits),
    }
}

fn verify_text<G: crate::cert::Generator>(cert: &crate::cert::Certificate<G>) -> Outcome {
    match cert.check() {
        Ok(()) => Outcome::ok(format!("valid degree={}\n", cert.degree)),
        Err(v) => Outcome::verdict(false, format!("invalid: {v}\n")),
    }
}

fn pm(cmd: &PmCommand, g: &Global, limits: &Limits) -> Result<Outcome> {
    let method: Method = g.method.parse()?;
    match cmd {
        PmCommand::Enumerate { out } => {
            let all = enumerate_perfect_matchings(need_n(g)?, limits)?;
            let text: String = all.iter().map(|m| format!("{m}\n")).collect();
            Ok(Outcome::ok(emit(out, text)?))
        }
        PmCommand::Oracle { poly } => {
            let n = need_n(g)?;
            match poly {
                None => Ok(Outcome::ok(format!("{}\n", enumerate_perfect_matchings(n, limits)?.len()))),
                Some(p) => match find_nonzero(&read_poly(p)?, n, limits)? {
                    None => Ok(Outcome::ok("vanishes on every perfect matching\n")),
                    Some((m, v)) => Ok(Outcome::verdict(
                        false,
                        format!("nonzero value {} at {m}\n", format_rational(&v)),
                    )),
                },
            }
        }
        PmCommand::Nf(a) => {
            let (p, cert) = normal_form(&read_poly(&a.poly)?, need_n(g)?)?;
            write_cert(&a.cert_out, &cert.to_text())?;
            Ok(Outcome::ok(emit(&a.out, p.to_text())?))
        }
        PmCommand::Derive(a) => {
            let cert = derive_zero(&read_poly(&a.poly)?, need_n(g)?, method, limits)?;
            Ok(Outcome::ok(emit(&a.out.clone().or_else(|| a.cert_out.clone()), cert.to_text())?))
        }
        PmCommand::Verify(a) => {
            let cert = DerivationCertificate::parse(&read(&a.cert)?)?;
            Ok(verify_text(&cert))
        }
        PmCommand::Symmetrize(a) => {
            let (c, cert) = symmetrize_constant(&read_poly(&a.poly)?, need_n(g)?, limits)?;
            write_cert(&a.cert_out, &cert.to_text())?;
            Ok(Outcome::ok(emit(&a.out, format!("{}\n", format_rational(&c)))?))
        }
    }
}

fn write_cert(path: &Option<PathBuf>, text: &str) -> Result<()> {
    if let Some(p) = path {
        write(p, text)?;
    }
    Ok(())
}

fn tour(cmd: &TourCommand, g: &Global, limits: &Limits) -> Result<Outcome> {
    let method: Method = g.method.parse()?;
    match cmd {
        TourCommand::Nf(a) => {
            let (p, cert) = tour_normal_form(&read_poly(&a.poly)?, need_n(g)?)?;
            write_cert(&a.cert_out, &cert.to_text())?;
            Ok(Outcome::ok(emit(&a.out, p.to_text())?))
        }
        TourCommand::Derive(a) => {
            let cert = tour_derive_zero(&read_poly(&a.poly)?, need_n(g)?, method, limits)?;
            Ok(Outcome::ok(emit(&a.out.clone().or_else(|| a.cert_out.clone()), cert.to_text())?))
        }
        TourCommand::Verify(a) => {
            let cert = TourCertificate::parse(&read(&a.cert)?)?;
            Ok(verify_text(&cert))
        }
        TourCommand::Symmetrize(a) => {
            let (c, cert) = tour_symmetrize_constant(&read_poly(&a.poly)?, need_n(g)?, limits)?;
            write_cert(&a.cert_out, &cert.to_text())?;
            Ok(Outcome::ok(emit(&a.out, format!("{}\n", format_rational(&c)))?))
        }
    }
}

fn sym(cmd: &SymCommand, g: &Global, limits: &Limits) -> Result<Outcome> {
    match cmd {
        SymCommand::OrbitConnect { m1, m2, set } => {
            let n = need_n(g)?;
            let tokens = |s: &str| -> Vec<String> { s.split_whitespace().map(str::to_string).collect() };
            let (t1, t2) = (tokens(m1), tokens(m2));
            let a = PerfectMatching::parse(n, &t1.iter().map(String::as_str).collect::<Vec<_>>())?;
            let b = PerfectMatching::parse(n, &t2.iter().map(String::as_str).collect::<Vec<_>>())?;
            let s: Vec<usize> = set
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse().map_err(|_| Error::InvalidInput(format!("bad vertex `{t}`"))))
                .collect::<Result<_>>()?;
            let sigma = orbit_connector(&a, &b, &s)?;
            Ok(Outcome::ok(format!("{sigma}\n")))
        }
        SymCommand::Junta { func } => {
            let h = SolutionFunction::parse(&read(func)?, limits)?;
            let report = find_junta_support(&h, limits)?;
            Ok(Outcome::ok(format!("{report}\n")))
        }
        SymCommand::Sdp2sos { dir, objective } => {
            let data = SdpFormulationData::load(dir, limits)?;
            let sos = formulation_to_sos(&data, *objective)?;
            let tol = g.tol.unwrap_or(1e-9);
            Ok(Outcome::ok(format!(
                "squares={} distinct={} mu={} residual={:e}\n",
                sos.h.len(),
                sos.distinct_functions(tol),
                sos.mu,
                sos.max_residual()
            )))
        }
    }
}

fn tsp(cmd: &TspCommand, g: &Global, limits: &Limits) -> Result<Outcome> {
    match cmd {
        TspCommand::Val { instance, tour } => {
            let inst = read_instance(instance)?;
            match tour {
                Some(t) => Ok(Outcome::ok(format!("{}\n", format_rational(&inst.tour_value(&parse_perm(t)?))))),
                None => Ok(Outcome::ok(val_polynomial(&inst).to_text())),
            }
        }
        TspCommand::Double { instance } => Ok(Outcome::ok(double_instance(&read_instance(instance)?).to_text())),
        TspCommand::Phi { tour } => {
            let tau = phi_map(&parse_perm(tour)?);
            let parity = if tau.is_even() { "even" } else { "odd" };
            Ok(Outcome::ok(format!("{tau}\n{parity}\n")))
        }
        TspCommand::Canonicalize { instance, tour } => {
            let doubled = double_instance(&read_instance(instance)?);
            let tau = parse_perm(tour)?;
            let canon = canonicalize(&tau, &doubled)?;
            if !is_canonical(&canon) {
                return Err(Error::invariant("canonicalize returned a non-canonical tour"));
            }
            Ok(Outcome::ok(format!(
                "{canon}\nvalue {} <= {}\n",
                format_rational(&doubled.tour_value(&canon)),
                format_rational(&doubled.tour_value(&tau))
            )))
        }
        TspCommand::Fold(a) => {
            let p = fold_substitution(&read_poly(&a.poly)?, need_n(g)?)?;
            Ok(Outcome::ok(emit(&a.out, p.to_text())?))
        }
        TspCommand::RefuteBuild { squares, mu, out } => {
            let n = g.n.unwrap_or(10);
            let eps = eps(g)?;
            let squares = match squares {
                Some(p) => parse_square_blocks(&read(p)?)?,
                None => odd_cut_squares(n)?,
            };
            let mu = match mu {
                Some(s) => parse_rational(s).ok_or_else(|| Error::InvalidInput(format!("bad --mu {s}")))?,
                None => &eps * &frac(1, 2),
            };
            let r = build_refutation(&squares, &mu, &eps, n, limits)?;
            Ok(Outcome::ok(emit(out, r.to_text())?))
        }
        TspCommand::RefuteVerify(a) => {
            let r = RefutationCertificate::parse(&read(&a.cert)?)?;
            let report = verify_refutation(&r);
            Ok(Outcome::verdict(report.valid, format!("{report}\n")))
        }
    }
}

fn lasserre(cmd: &LasserreCommand, g: &Global, limits: &Limits) -> Result<Outcome> {
    let level = || g.level.ok_or_else(|| Error::InvalidInput("--level is required".into()));
    match cmd {
        LasserreCommand::Build { instance } => {
            let prog = lasserre_build(&read_instance(instance)?, level()?, limits)?;
            let constant = prog
                .objective
                .iter()
                .find(|(i, _)| *i == 0)
                .map_or_else(|| "0".to_string(), |(_, c)| format_rational(c));
            Ok(Outcome::ok(format!(
                "basis {}\nmoments {}\nconstraints {}\nobjective terms {}\nobjective constant {}\n",
                prog.basis.len(),
                prog.moments.len(),
                prog.constraints.len(),
                prog.objective.len(),
                constant
            )))
        }
        LasserreCommand::Export { instance, out } => {
            let prog = lasserre_build(&read_instance(instance)?, level()?, limits)?;
            let (dat, idx) = prog.export_sdpa(out)?;
            Ok(Outcome::ok(format!("{}\n{}\n", dat.display(), idx.display())))
        }
        LasserreCommand::Verify { instance, cert } => {
            let inst = read_instance(instance)?;
            let cert = NumericSosCertificate::parse(&read(cert)?)?;
            let report = verify_numeric_certificate(&inst, &cert, g.tol.unwrap_or(DEFAULT_TOL))?;
            let text = match &report.reason {
                None => format!(
                    "valid C={} min_eigenvalue={:e} residual={:e}\n",
                    format_rational(&report.bound),
                    report.min_eigenvalue,
                    report.residual
                ),
                Some(r) => format!("invalid: {r}\n"),
            };
            Ok(Outcome::verdict(report.valid, text))
        }
    }
}
