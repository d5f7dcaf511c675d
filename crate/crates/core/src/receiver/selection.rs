//! Integer coefficient selection.
//!
//! Relaxes `min a^T (I + SNR H^T H)^{-1} a` over integers to the box
//! `a_k >= 1`, solves it by projected gradient, rounds, and keeps whichever
//! of the rounded point and the all-ones vector has the lower objective.

use nalgebra::{DMatrix, DVector};

use super::CoefficientVector;
use crate::error::{Error, Result};
use crate::linalg::{gram_regularized, largest_eigenvalue, spd_inverse};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOptions {
    pub max_iter: usize,
    /// Stop once an iterate moves less than this (Euclidean norm).
    pub step_tol: f64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub a: CoefficientVector,
    /// Solution of the continuous relaxation.
    pub relaxed: Vec<f64>,
    /// `a^T (I + SNR H^T H)^{-1} a` at the chosen `a`.
    pub objective: f64,
    pub iterations: usize,
    /// False when `max_iter` was hit; `relaxed` is then the last iterate.
    pub converged: bool,
    /// True when rounding lost to the all-ones vector.
    pub fell_back_to_ones: bool,
}

fn quad(m: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    a.dot(&(m * a))
}

pub fn select_coefficients(h: &DMatrix<f64>, snr: f64) -> Result<Selection> {
    select_coefficients_with(h, snr, SelectionOptions::default())
}

pub fn select_coefficients_with(
    h: &DMatrix<f64>,
    snr: f64,
    opts: SelectionOptions,
) -> Result<Selection> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::InvalidArgument(format!("snr must be positive and finite, got {snr}")));
    }
    let k = h.ncols();
    if k == 0 {
        return Err(Error::InvalidArgument("no devices".into()));
    }
    let q = spd_inverse(gram_regularized(h, snr))?;
    // Minimize 0.5 a^T Q a; the gradient Q a is L-Lipschitz.
    let lipschitz = largest_eigenvalue(&q, 10_000, 1e-13);
    let step = 1.0 / lipschitz;

    let mut a = DVector::from_element(k, 1.0);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let grad = &q * &a;
        let next = (&a - grad * step).map(|v| v.max(1.0));
        let moved = (&next - &a).norm();
        a = next;
        if moved < opts.step_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("coefficient selection hit {} iterations without converging", opts.max_iter);
    }

    let rounded = a.map(|v| v.round().max(1.0));
    let ones = DVector::from_element(k, 1.0);
    let (f_round, f_ones) = (quad(&q, &rounded), quad(&q, &ones));
    let (chosen, objective, fell_back_to_ones) = if f_round < f_ones {
        (rounded, f_round, false)
    } else {
        (ones, f_ones, true)
    };
    let a_int = CoefficientVector::new(chosen.iter().map(|&v| v as i64).collect())?;
    Ok(Selection {
        a: a_int,
        relaxed: a.iter().copied().collect(),
        objective,
        iterations,
        converged,
        fell_back_to_ones,
    })
}
