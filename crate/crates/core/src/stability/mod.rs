//! Convergence certificates: Hurwitz polynomials, error-dynamics matrices,
//! Lyapunov solutions and the small-gain norm conditions.

mod lyapunov;
mod matrices;
mod polynomial;
mod report;

pub use lyapunov::{lyapunov_residual, lyapunov_solve};
pub use matrices::{
    build_error_matrices, leader_observer_matrix, leader_observer_polynomial,
    nonlinear_leader_observer_matrix, nonlinear_tracking_matrix, self_observer_matrix,
    self_observer_polynomial, theorem1_polynomials, theorem2_polynomial, tracking_matrix,
    tracking_polynomial, ErrorSystemMatrices, LinearPolynomials,
};
pub use polynomial::{eigenvalues, hurwitz, spectra_match, HurwitzVerdict, RealPolynomial, HURWITZ_MARGIN};
pub use report::{Certificate, Clause, StabilityReport, Verdict, Witness};

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::error::{check_len, DimensionMismatch};
use crate::graph::POSITIVE_DEFINITE_TOL;
use crate::sim::{Mode, Scenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("polynomial must be monic with a nonzero degree-0 prefix")]
    NotMonic,
    #[error("non-finite coefficient or entry")]
    NonFinite,
    #[error("polynomial has degree 0")]
    DegenerateDegree,
    #[error("matrix is not Hurwitz; the Lyapunov equation has no positive definite solution")]
    NotHurwitz,
    #[error("eta must be finite and positive, got {0}")]
    InvalidEta(f64),
    #[error(transparent)]
    DimensionMismatch(#[from] DimensionMismatch),
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Left and right sides of the two small-gain inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct NormConditions {
    /// `‖P_{0x,i}‖` for `i = 1..l`.
    pub leader_weight_norms: Vec<f64>,
    /// `‖P_{x,i}‖` for `i = 2..l`.
    pub self_weight_norms: Vec<f64>,
    pub leader_lhs: f64,
    /// `min(η₁ / 2‖Q₁‖, η₃ / 2‖Q₃‖)`.
    pub leader_rhs: f64,
    pub self_lhs: f64,
    /// `η₂ / 2‖Q₂‖`.
    pub self_rhs: f64,
}

impl NormConditions {
    pub fn leader_holds(&self) -> bool {
        self.leader_lhs < self.leader_rhs
    }

    pub fn self_holds(&self) -> bool {
        self.self_lhs < self.self_rhs
    }
}

/// `diag{ρ_first I, ..., ρ_i I, 0, ..., 0}` with `blocks` blocks of size `n`.
fn lipschitz_weight(rho: &[f64], first: usize, i: usize, blocks: usize, n: usize) -> DMatrix<f64> {
    let mut diag = vec![0.0; blocks * n];
    for m in first..=i {
        let b = m - first;
        diag[b * n..(b + 1) * n].fill(rho[m - 1]);
    }
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
}

/// Evaluates the two small-gain inequalities for Lipschitz constants `rho`
/// (`ρ_1..ρ_l`) and Lyapunov pairs for the leader observer (`q1`), the self
/// observer (`q2`) and the tracking error (`q3`).
#[allow(clippy::too_many_arguments)]
pub fn theorem2_norm_conditions(
    l: usize,
    rho: &[f64],
    q1: &DMatrix<f64>,
    eta1: f64,
    q2: &DMatrix<f64>,
    eta2: f64,
    q3: &DMatrix<f64>,
    eta3: f64,
) -> Result<NormConditions, StabilityError> {
    check_len("Lipschitz constants", l, rho.len())?;
    let n = q1.nrows() / l;
    check_len("leader observer Q", l * n, q1.nrows())?;
    check_len("self observer Q", (l - 1) * n, q2.nrows())?;
    check_len("tracking Q", l * n, q3.nrows())?;
    let leader_weight_norms: Vec<f64> = (1..=l)
        .map(|i| spectral_norm(&lipschitz_weight(rho, 1, i, l, n)))
        .collect();
    let self_weight_norms: Vec<f64> = (2..=l)
        .map(|i| spectral_norm(&lipschitz_weight(rho, 2, i, l - 1, n)))
        .collect();
    Ok(NormConditions {
        leader_lhs: leader_weight_norms.iter().sum(),
        leader_rhs: (eta1 / (2.0 * spectral_norm(q1))).min(eta3 / (2.0 * spectral_norm(q3))),
        self_lhs: self_weight_norms.iter().sum(),
        self_rhs: eta2 / (2.0 * spectral_norm(q2)),
        leader_weight_norms,
        self_weight_norms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    /// Candidate `η` values for every Lyapunov equation; each equation keeps
    /// the candidate with the largest `η / 2‖Q‖`.
    pub etas: Vec<f64>,
    pub rate_samples: usize,
    pub lipschitz_samples: usize,
    pub lipschitz_seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            etas: vec![1.0],
            rate_samples: 10_001,
            lipschitz_samples: 2_000,
            lipschitz_seed: 7,
        }
    }
}

/// Log-spaced `η` grid from `1e-3` to `1e3`.
pub fn eta_search_grid() -> Vec<f64> {
    (-6..=6).map(|k| 10f64.powf(k as f64 * 0.5)).collect()
}

fn polynomial_clause(name: String, p: &RealPolynomial) -> Clause {
    let v = hurwitz(p, HURWITZ_MARGIN).expect("certificate polynomials have degree >= 1");
    Clause::new(name, Verdict::from_bool(v.stable))
        .with("polynomial", Witness::Text(p.to_text()))
        .with("roots", Witness::Roots(v.roots))
}

fn coupling_clause(lambdas: &[f64]) -> Clause {
    Clause::new(
        "coupling_positive_definite",
        Verdict::from_bool(lambdas[0] > POSITIVE_DEFINITE_TOL),
    )
    .with("eigenvalues", Witness::Vector(lambdas.to_vec()))
}

fn rate_clause(s: &Scenario, opts: &CertifyOptions) -> Clause {
    match s.leader_input.audit_rate(s.horizon, opts.rate_samples) {
        Ok(a) => {
            let mut c = Clause::new("leader_input_rate", Verdict::from_bool(a.satisfied))
                .with("max_rate", Witness::Scalar(a.max_rate));
            if let Some(w) = a.bound {
                c = c.with("declared_bound", Witness::Scalar(w));
            }
            c
        }
        Err(e) => Clause::new("leader_input_rate", Verdict::Fail).with("error", Witness::Text(e.to_string())),
    }
}

fn all_pass(clauses: &[Clause]) -> bool {
    clauses.iter().all(|c| c.verdict == Verdict::Pass)
}

/// Certificate for linear agents.
pub fn check_theorem1(s: &Scenario) -> StabilityReport {
    check_theorem1_with(s, &CertifyOptions::default())
}

pub fn check_theorem1_with(s: &Scenario, opts: &CertifyOptions) -> StabilityReport {
    let lambdas = s.topology.matrices().eigenvalues;
    let polys = theorem1_polynomials(&s.gains, &lambdas);
    let mut clauses = vec![coupling_clause(&lambdas)];
    for (i, p) in polys.leader_observer.iter().enumerate() {
        clauses.push(
            polynomial_clause(format!("leader_observer_polynomial[{}]", i + 1), p)
                .with("lambda", Witness::Scalar(lambdas[i])),
        );
    }
    clauses.push(polynomial_clause("self_observer_polynomial".into(), &polys.self_observer));
    for (i, p) in polys.tracking.iter().enumerate() {
        clauses.push(
            polynomial_clause(format!("tracking_polynomial[{}]", i + 1), p)
                .with("lambda", Witness::Scalar(lambdas[i])),
        );
    }
    clauses.push(rate_clause(s, opts));
    StabilityReport {
        certificate: Certificate::Linear,
        clauses,
    }
}

/// Certificate for nonlinear agents.
pub fn check_theorem2(s: &Scenario) -> StabilityReport {
    check_theorem2_with(s, &CertifyOptions::default())
}

struct LyapunovPick {
    eta: f64,
    q: DMatrix<f64>,
}

/// Solves for each candidate `η` and keeps the largest `η / 2‖Q‖`.
fn best_lyapunov(f: &DMatrix<f64>, etas: &[f64]) -> Result<LyapunovPick, StabilityError> {
    let mut best: Option<(f64, LyapunovPick)> = None;
    for &eta in etas {
        let q = lyapunov_solve(f, eta)?;
        let margin = eta / (2.0 * spectral_norm(&q));
        if best.as_ref().is_none_or(|(m, _)| margin > *m) {
            best = Some((margin, LyapunovPick { eta, q }));
        }
    }
    best.map(|(_, p)| p).ok_or(StabilityError::InvalidEta(f64::NAN))
}

fn lyapunov_clause(
    name: &str,
    f: &DMatrix<f64>,
    prerequisites: bool,
    etas: &[f64],
) -> (Clause, Option<LyapunovPick>) {
    if !prerequisites {
        return (Clause::new(name, Verdict::NotEvaluated), None);
    }
    match best_lyapunov(f, etas) {
        Ok(pick) => {
            let residual = lyapunov_residual(f, &pick.q, pick.eta);
            let ok = residual < 1e-8 * pick.q.norm();
            let clause = Clause::new(name, Verdict::from_bool(ok))
                .with("eta", Witness::Scalar(pick.eta))
                .with("q_norm", Witness::Scalar(spectral_norm(&pick.q)))
                .with("residual", Witness::Scalar(residual))
                .with("q", Witness::Matrix(pick.q.clone()));
            (clause, Some(pick))
        }
        Err(e) => (
            Clause::new(name, Verdict::Fail).with("error", Witness::Text(e.to_string())),
            None,
        ),
    }
}

pub fn check_theorem2_with(s: &Scenario, opts: &CertifyOptions) -> StabilityReport {
    let l = s.order;
    let n = s.topology.n_followers();
    let gm = s.topology.matrices();
    let lambdas = &gm.eigenvalues;
    let polys = theorem1_polynomials(&s.gains, lambdas);
    let base = theorem2_polynomial(&s.gains.k);

    let coupling = coupling_clause(lambdas);
    let leader_polys: Vec<Clause> = polys
        .leader_observer
        .iter()
        .enumerate()
        .map(|(i, p)| {
            polynomial_clause(format!("leader_observer_polynomial[{}]", i + 1), p)
                .with("lambda", Witness::Scalar(lambdas[i]))
        })
        .collect();
    let self_poly = polynomial_clause("self_observer_polynomial".into(), &polys.self_observer);
    let tracking = polynomial_clause("tracking_polynomial".into(), &base);

    let m = build_error_matrices(l, &s.gains, &gm.coupling).expect("validated scenario");
    let roots = |p: &RealPolynomial, copies: usize| -> Vec<Complex<f64>> {
        let r = p.roots().expect("degree >= 1");
        (0..copies).flat_map(|_| r.clone()).collect()
    };
    let mut f4_expected: Vec<Complex<f64>> =
        polys.leader_observer.iter().flat_map(|p| roots(p, 1)).collect();
    f4_expected.extend(lambdas.iter().map(|&lam| Complex::new(-s.gains.c0(1) * lam, 0.0)));
    let spectra_ok = spectra_match(&eigenvalues(&m.f4), &f4_expected, 1e-6)
        && spectra_match(&eigenvalues(&m.f2), &roots(&polys.self_observer, n), 1e-6)
        && spectra_match(&eigenvalues(&m.f6), &roots(&base, n), 1e-6);
    let spectra = Clause::new("error_matrix_spectra", Verdict::from_bool(spectra_ok));

    let leader_ready = coupling.verdict == Verdict::Pass && all_pass(&leader_polys);
    let (q1_clause, q1) = lyapunov_clause("leader_observer_lyapunov", &m.f4, leader_ready, &opts.etas);
    let (q2_clause, q2) = lyapunov_clause(
        "self_observer_lyapunov",
        &m.f2,
        self_poly.verdict == Verdict::Pass,
        &opts.etas,
    );
    let (q3_clause, q3) =
        lyapunov_clause("tracking_lyapunov", &m.f6, tracking.verdict == Verdict::Pass, &opts.etas);

    let rho = s.nonlinearity.lipschitz().to_vec();
    let (leader_margin, self_margin) = match (&q1, &q2, &q3) {
        (Some(a), Some(b), Some(c)) => {
            let nc = theorem2_norm_conditions(l, &rho, &a.q, a.eta, &b.q, b.eta, &c.q, c.eta)
                .expect("shapes follow from the scenario");
            (
                Clause::new("leader_observer_gain_margin", Verdict::from_bool(nc.leader_holds()))
                    .with("lhs", Witness::Scalar(nc.leader_lhs))
                    .with("rhs", Witness::Scalar(nc.leader_rhs))
                    .with("weight_norms", Witness::Vector(nc.leader_weight_norms.clone())),
                Clause::new("self_observer_gain_margin", Verdict::from_bool(nc.self_holds()))
                    .with("lhs", Witness::Scalar(nc.self_lhs))
                    .with("rhs", Witness::Scalar(nc.self_rhs))
                    .with("weight_norms", Witness::Vector(nc.self_weight_norms.clone())),
            )
        }
        _ => {
            // Each margin needs its own Lyapunov pair(s); evaluate whatever is available.
            let leader = Clause::new("leader_observer_gain_margin", Verdict::NotEvaluated);
            let self_clause = match &q2 {
                Some(b) => {
                    let lhs: f64 = (2..=l)
                        .map(|i| spectral_norm(&lipschitz_weight(&rho, 2, i, l - 1, n)))
                        .sum();
                    let rhs = b.eta / (2.0 * spectral_norm(&b.q));
                    Clause::new("self_observer_gain_margin", Verdict::from_bool(lhs < rhs))
                        .with("lhs", Witness::Scalar(lhs))
                        .with("rhs", Witness::Scalar(rhs))
                }
                None => Clause::new("self_observer_gain_margin", Verdict::NotEvaluated),
            };
            (leader, self_clause)
        }
    };

    let audit = s
        .nonlinearity
        .audit_lipschitz(opts.lipschitz_samples, opts.lipschitz_seed);
    let lipschitz = Clause::new("lipschitz_bounds", Verdict::from_bool(audit.passed()))
        .with("declared", Witness::Vector(rho.clone()))
        .with("worst_sampled_ratio", Witness::Vector(audit.worst_ratio.clone()));

    let mut clauses = vec![coupling];
    clauses.extend(leader_polys);
    clauses.extend([
        self_poly,
        tracking,
        spectra,
        q1_clause,
        q2_clause,
        q3_clause,
        leader_margin,
        self_margin,
        rate_clause(s, opts),
        lipschitz,
    ]);
    StabilityReport {
        certificate: Certificate::Nonlinear,
        clauses,
    }
}

/// Certificate matching the scenario's agent model.
pub fn certify(s: &Scenario, opts: &CertifyOptions) -> StabilityReport {
    match s.mode {
        Mode::Linear => check_theorem1_with(s, opts),
        Mode::Nonlinear => check_theorem2_with(s, opts),
    }
}
