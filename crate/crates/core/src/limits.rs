/// Size caps for the brute-force and factorial-time paths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Largest `n` for perfect-matching enumeration.
    pub max_oracle: usize,
    /// Largest `n` for enumerating all `n!` tours.
    pub max_tour_oracle: usize,
    /// Largest `n` for symmetrizing over `S_n` (matching ideal).
    pub max_symmetrize: usize,
    /// Largest `n` for row symmetrization over `S_n` (tour ideal).
    pub max_tour_symmetrize: usize,
    pub max_inductive_n: usize,
    pub max_tour_inductive_n: usize,
    pub max_inductive_degree: u32,
    /// Cap on unknowns in one exact cofactor solve.
    pub max_direct_unknowns: usize,
    /// Cap on the Lasserre moment basis size.
    pub max_basis: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_oracle: 12,
            max_tour_oracle: 8,
            max_symmetrize: 8,
            max_tour_symmetrize: 7,
            max_inductive_n: 8,
            max_tour_inductive_n: 7,
            max_inductive_degree: 3,
            max_direct_unknowns: 250_000,
            max_basis: 5000,
        }
    }
}

pub const MAX_ORACLE_ENV: &str = "MATCHIDEAL_MAX_ORACLE";

impl Limits {
    /// Defaults with `MATCHIDEAL_MAX_ORACLE` applied when set.
    pub fn from_env() -> Self {
        let mut limits = Limits::default();
        if let Some(v) = std::env::var(MAX_ORACLE_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
        {
            limits.max_oracle = v;
        }
        limits
    }
}
