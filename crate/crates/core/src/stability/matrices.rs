//! Block matrices of the error dynamics and the polynomials that govern them.
//!
//! Error vectors are stacked by state order: `e = (e_1, e_2, ..., e_l)` with
//! each `e_m ∈ ℝ^N`. Blocks below are `N × N`.

use nalgebra::DMatrix;

use super::polynomial::RealPolynomial;
use super::StabilityError;
use crate::error::check_len;
use crate::observers::GainSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSystemMatrices {
    /// Leader-state observer, linear agents.
    pub f1: DMatrix<f64>,
    /// Self-state observer.
    pub f2: DMatrix<f64>,
    /// Tracking error, linear agents.
    pub f3: DMatrix<f64>,
    /// Leader-state observer, nonlinear agents.
    pub f4: DMatrix<f64>,
    /// Tracking error, nonlinear agents.
    pub f6: DMatrix<f64>,
}

fn place(target: &mut DMatrix<f64>, bi: usize, bj: usize, block: &DMatrix<f64>) {
    let n = block.nrows();
    target.view_mut((bi * n, bj * n), (n, n)).copy_from(block);
}

/// Identity superdiagonal with the given first block column.
fn observer_form(first_column: &[DMatrix<f64>]) -> DMatrix<f64> {
    let blocks = first_column.len();
    let n = first_column[0].nrows();
    let mut f = DMatrix::zeros(blocks * n, blocks * n);
    let eye = DMatrix::identity(n, n);
    for (b, block) in first_column.iter().enumerate() {
        place(&mut f, b, 0, block);
        if b + 1 < blocks {
            place(&mut f, b, b + 1, &eye);
        }
    }
    f
}

/// Identity superdiagonal with the given last block row.
fn controller_form(last_row: &[DMatrix<f64>]) -> DMatrix<f64> {
    let blocks = last_row.len();
    let n = last_row[0].nrows();
    let mut f = DMatrix::zeros(blocks * n, blocks * n);
    let eye = DMatrix::identity(n, n);
    for b in 0..blocks - 1 {
        place(&mut f, b, b + 1, &eye);
    }
    for (b, block) in last_row.iter().enumerate() {
        place(&mut f, blocks - 1, b, block);
    }
    f
}

/// Observer-form matrix for gains `g_2..g_l` and coupling `C`:
/// first block column `-g_2 C, -g_3 g_2 C, ..., -g_l g_2 C`.
fn estimation_matrix(g: &[f64], coupling: &DMatrix<f64>) -> DMatrix<f64> {
    let g2 = g[0];
    let column: Vec<_> = g
        .iter()
        .enumerate()
        .map(|(idx, &gm)| {
            let scale = if idx == 0 { g2 } else { gm * g2 };
            coupling * -scale
        })
        .collect();
    observer_form(&column)
}

pub fn leader_observer_matrix(c0: &[f64], h: &DMatrix<f64>) -> DMatrix<f64> {
    estimation_matrix(&c0[1..], h)
}

pub fn self_observer_matrix(r: &[f64], n: usize) -> DMatrix<f64> {
    estimation_matrix(r, &DMatrix::identity(n, n))
}

fn tracking_form(k: &[f64], first: DMatrix<f64>) -> DMatrix<f64> {
    let n = first.nrows();
    let mut row = vec![first];
    row.extend(k[1..].iter().map(|&km| DMatrix::identity(n, n) * -km));
    controller_form(&row)
}

pub fn tracking_matrix(k: &[f64], h: &DMatrix<f64>) -> DMatrix<f64> {
    tracking_form(k, h * -k[0])
}

pub fn nonlinear_tracking_matrix(k: &[f64], n: usize) -> DMatrix<f64> {
    tracking_form(k, DMatrix::identity(n, n) * -k[0])
}

/// `[[-c_{0,1} H, I, 0, ...], [0, F1]]`.
pub fn nonlinear_leader_observer_matrix(c0: &[f64], h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let l = c0.len();
    let mut f = DMatrix::zeros(l * n, l * n);
    place(&mut f, 0, 0, &(h * -c0[0]));
    place(&mut f, 0, 1, &DMatrix::identity(n, n));
    f.view_mut((n, n), ((l - 1) * n, (l - 1) * n))
        .copy_from(&leader_observer_matrix(c0, h));
    f
}

pub fn build_error_matrices(
    l: usize,
    gains: &GainSet,
    h: &DMatrix<f64>,
) -> Result<ErrorSystemMatrices, StabilityError> {
    let n = h.nrows();
    check_len("coupling matrix columns", n, h.ncols())?;
    check_len("gains.k", l, gains.k.len())?;
    check_len("gains.c0", l, gains.c0.len())?;
    check_len("gains.r", l - 1, gains.r.len())?;
    Ok(ErrorSystemMatrices {
        f1: leader_observer_matrix(&gains.c0, h),
        f2: self_observer_matrix(&gains.r, n),
        f3: tracking_matrix(&gains.k, h),
        f4: nonlinear_leader_observer_matrix(&gains.c0, h),
        f6: nonlinear_tracking_matrix(&gains.k, n),
    })
}

/// `s^{l-1} + g_2 λ s^{l-2} + g_2 λ Σ_{z=0}^{l-3} g_{l-z} s^z`, gains `g_2..g_l`.
fn estimation_polynomial(g: &[f64], lambda: f64) -> RealPolynomial {
    let g2 = g[0];
    let mut tail = vec![g2 * lambda];
    // Descending powers s^{l-3} .. s^0 carry g_3 .. g_l.
    tail.extend(g[1..].iter().map(|&gm| g2 * lambda * gm));
    RealPolynomial::monic(&tail).expect("finite gains")
}

/// Leader-state observer polynomial for one eigenvalue `λ` of `H`.
pub fn leader_observer_polynomial(c0: &[f64], lambda: f64) -> RealPolynomial {
    estimation_polynomial(&c0[1..], lambda)
}

pub fn self_observer_polynomial(r: &[f64]) -> RealPolynomial {
    estimation_polynomial(r, 1.0)
}

/// `s^l + k_l s^{l-1} + ... + k_2 s + k_1 λ`.
pub fn tracking_polynomial(k: &[f64], lambda: f64) -> RealPolynomial {
    let tail: Vec<f64> = k
        .iter()
        .enumerate()
        .rev()
        .map(|(idx, &km)| if idx == 0 { km * lambda } else { km })
        .collect();
    RealPolynomial::monic(&tail).expect("finite gains")
}

/// The polynomials the linear-agent certificate asks to be Hurwitz.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolynomials {
    /// One per eigenvalue of `H`.
    pub leader_observer: Vec<RealPolynomial>,
    pub self_observer: RealPolynomial,
    /// One per eigenvalue of `H`.
    pub tracking: Vec<RealPolynomial>,
}

pub fn theorem1_polynomials(gains: &GainSet, lambdas: &[f64]) -> LinearPolynomials {
    LinearPolynomials {
        leader_observer: lambdas
            .iter()
            .map(|&lam| leader_observer_polynomial(&gains.c0, lam))
            .collect(),
        self_observer: self_observer_polynomial(&gains.r),
        tracking: lambdas.iter().map(|&lam| tracking_polynomial(&gains.k, lam)).collect(),
    }
}

/// Base factor `s^l + Σ_z k_z s^{z-1}` of the nonlinear tracking polynomial;
/// its `N`-th power has the same roots.
pub fn theorem2_polynomial(k: &[f64]) -> RealPolynomial {
    tracking_polynomial(k, 1.0)
}
