//! Discrete observability Gramian and its conditioning, for comparing the
//! minimal inertia parameterization against the redundant one.

use nalgebra::DMatrix;

use crate::core_math::dynamics::{propagate_body, InertiaModel};
use crate::core_math::jacobian::jacobian_f_model;
use crate::core_math::state::{Parameterization, TargetState};
use crate::estimator::filter::{measurement_matrix, transition_matrix};

/// Eigenvalues below this count as zero.
pub const SINGULAR_EIGENVALUE: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct GramianAccumulator {
    pub w_o: DMatrix<f64>,
    /// `Φ_{k/0}`.
    pub phi_chain: DMatrix<f64>,
    pub k: usize,
}

impl GramianAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            w_o: DMatrix::zeros(n, n),
            phi_chain: DMatrix::identity(n, n),
            k: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_o.nrows()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.w_o)
    }

    pub fn normalized_condition_number(&self) -> f64 {
        condition_number(&normalize(&self.w_o))
    }
}

/// `Φ_{k/0} ← Φ_k Φ_{k−1/0}`, `W ← W + Φ_{k/0}ᵀ Hᵀ H Φ_{k/0}`.
pub fn gramian_step(acc: &GramianAccumulator, phi: &DMatrix<f64>, h: &DMatrix<f64>) -> GramianAccumulator {
    assert_eq!(phi.shape(), (acc.dim(), acc.dim()), "Φ dimension");
    assert_eq!(h.ncols(), acc.dim(), "H dimension");
    let chain = phi * &acc.phi_chain;
    let hc = h * &chain;
    let mut w = &acc.w_o + hc.transpose() * &hc;
    let wt = w.transpose();
    w = 0.5 * (w + wt);
    GramianAccumulator { w_o: w, phi_chain: chain, k: acc.k + 1 }
}

/// `λ_max / λ_min` of a symmetric matrix; `+∞` when `λ_min` is (numerically) zero.
pub fn condition_number(w: &DMatrix<f64>) -> f64 {
    let e = w.clone().symmetric_eigenvalues();
    let (lo, hi) = (e.min(), e.max());
    if lo < SINGULAR_EIGENVALUE {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `D W D` with `D = diag(1/sqrt(Wᵢᵢ))`: unit-free, unit diagonal.
pub fn normalize(w: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = (0..w.nrows())
        .map(|i| if w[(i, i)] > 0.0 { 1.0 / w[(i, i)].sqrt() } else { 0.0 })
        .collect();
    DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] * d[i] * d[j])
}

/// Condition numbers for both parameterizations at one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramianRecord {
    pub k: usize,
    pub t: f64,
    pub minimal_raw: f64,
    pub minimal_normalized: f64,
    pub redundant_raw: f64,
    pub redundant_normalized: f64,
}

/// Linearization of both filters along a noise-free truth trajectory,
/// measured every `dt` for `epochs` epochs. Covariance substeps follow the
/// filter's `max_step`.
pub fn compare_parameterizations(
    x0: &TargetState,
    dt: f64,
    epochs: usize,
    max_step: f64,
) -> Vec<GramianRecord> {
    let params = [Parameterization::Minimal, Parameterization::Redundant];
    let mut accs: Vec<GramianAccumulator> = params.iter().map(|p| GramianAccumulator::new(p.dim())).collect();
    let model = InertiaModel::minimal(x0.sigma);
    let steps = ((dt / max_step) - 1e-9).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let mut x = *x0;
    let mut out = Vec::with_capacity(epochs);
    for k in 1..=epochs {
        let mut phis: Vec<DMatrix<f64>> = params.iter().map(|p| DMatrix::identity(p.dim(), p.dim())).collect();
        for _ in 0..steps {
            for (phi, p) in phis.iter_mut().zip(params) {
                *phi = transition_matrix(&jacobian_f_model(&x, &model, p), h) * &*phi;
            }
            x.body = propagate_body(&x.body, &model, h, 0.01);
        }
        for ((acc, phi), p) in accs.iter_mut().zip(&phis).zip(params) {
            *acc = gramian_step(acc, phi, &measurement_matrix(&x, p));
        }
        out.push(GramianRecord {
            k,
            t: k as f64 * dt,
            minimal_raw: accs[0].condition_number(),
            minimal_normalized: accs[0].normalized_condition_number(),
            redundant_raw: accs[1].condition_number(),
            redundant_normalized: accs[1].normalized_condition_number(),
        });
    }
    out
}
