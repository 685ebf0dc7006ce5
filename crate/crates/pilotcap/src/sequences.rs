//! Pilot matrix and power allocation construction for the three schemes
//! (capacity-achieving GWBE, WBE tight frames, finite orthogonal sequences)
//! plus the asymptotic SINR evaluation every scheme is judged by.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::majorization::{construct_symmetric, MajorizationError, SpectrumDiagonalPair};
use crate::model::{
    asymptotic_sinr_from_gram, effective_load, load_to_gamma, Allocation, FosGrouping, ModelError,
    PilotMatrix, PowerAllocation, SinrRequirements, DEFAULT_TOLERANCES,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SequenceError {
    #[error("pilot matrix has {pilots} columns but the power vector has {powers} entries")]
    DimensionMismatch { pilots: usize, powers: usize },
    #[error("total load {load} exceeds the pilot length {tau}; requirements are infeasible")]
    InfeasibleRequirements { load: f64, tau: usize },
    #[error("invalid frame dimensions K={k}, tau={tau}: K >= tau >= 1 required")]
    InvalidDimensions { k: usize, tau: usize },
    #[error("grouping does not match K={k}, tau={tau}")]
    InvalidGrouping { k: usize, tau: usize },
    #[error(transparent)]
    Construction(#[from] MajorizationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Asymptotic SINR of a pilot/power pair: `P_i / Σ_{j≠i} ρ_ji² P_j`.
/// Users with exactly orthogonal pilots get the `+inf` sentinel.
pub fn asymptotic_sinr(
    pilots: &PilotMatrix,
    powers: &PowerAllocation,
) -> Result<Vec<f64>, SequenceError> {
    if pilots.num_users() != powers.num_users() {
        return Err(SequenceError::DimensionMismatch {
            pilots: pilots.num_users(),
            powers: powers.num_users(),
        });
    }
    Ok(asymptotic_sinr_from_gram(pilots.gram(), powers.powers()))
}

/// Capacity-achieving pilot sequences and power allocation.
///
/// Targets are inflated so the total load fills the pilot budget exactly,
/// powers are set to `c·γ̂_i/(1+γ̂_i)`, and the pilot matrix is recovered
/// from a symmetric matrix with that diagonal and a flat rank-τ spectrum.
/// With `K ≤ τ` the problem is uncontaminated and orthogonal pilots with
/// equal powers are returned instead.
pub fn gwbe_design(req: &SinrRequirements, c: f64) -> Result<Allocation, SequenceError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(SequenceError::Model(ModelError::NonPositiveScale {
            value: c,
        }));
    }
    let k = req.num_users();
    let tau = req.tau();
    if k <= tau {
        return orthogonal_design(req, c);
    }
    let loads = req.loads();
    let total: f64 = loads.iter().sum();
    let tau_f = tau as f64;
    if total > tau_f * (1.0 + 1e-12) {
        return Err(SequenceError::InfeasibleRequirements { load: total, tau });
    }
    let inflated = inflate_loads(&loads, tau_f);
    gwbe_from_loads(&inflated, c, req)
}

/// Welch-bound-equality pilot sequences: a unit-norm tight frame with
/// `S Sᵀ = (K/τ) I`. For (K, τ) pairs with a known real equiangular
/// construction the frame is additionally equiangular with
/// `ρ_ij² = (K−τ)/((K−1)τ)` and the flag is set.
#[derive(Debug, Clone)]
pub struct WbeFrame {
    pub pilots: PilotMatrix,
    pub equiangular: bool,
}

pub fn wbe_sequences(k: usize, tau: usize) -> Result<WbeFrame, SequenceError> {
    if tau == 0 || k < tau {
        return Err(SequenceError::InvalidDimensions { k, tau });
    }
    if let Some(s) = equiangular_frame(k, tau) {
        return Ok(WbeFrame {
            pilots: PilotMatrix::new(s)?,
            equiangular: true,
        });
    }
    // General tight frame: run the flat-load design kernel with identical
    // loads τ/K, which yields S Sᵀ = (K/τ) I by construction.
    let f = tau as f64 / k as f64;
    let gamma = load_to_gamma(f);
    let req = SinrRequirements::new(vec![gamma; k], tau)?;
    let allocation = gwbe_from_loads(&vec![f; k], 1.0, &req)?;
    Ok(WbeFrame {
        pilots: allocation.pilots,
        equiangular: false,
    })
}

/// Finite-orthogonal-sequence pilots: every user transmits the standard
/// basis vector of its group, so `ρ_ij` is 1 within a group and 0 across.
pub fn fos_pilots(
    k: usize,
    tau: usize,
    grouping: &FosGrouping,
) -> Result<PilotMatrix, SequenceError> {
    if grouping.num_users() != k || grouping.tau() != tau {
        return Err(SequenceError::InvalidGrouping { k, tau });
    }
    let mut s = DMatrix::<f64>::zeros(tau, k);
    for (g, group) in grouping.groups().iter().enumerate() {
        for &user in group {
            s[(g, user)] = 1.0;
        }
    }
    Ok(PilotMatrix::new(s)?)
}

/// Power allocation used by the WBE and FOS baselines: `P_i = c·γ_i/(1+γ_i)`
/// with no target inflation.
pub fn scheme_powers(req: &SinrRequirements, c: f64) -> Result<PowerAllocation, SequenceError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(SequenceError::Model(ModelError::NonPositiveScale {
            value: c,
        }));
    }
    let p = req.gammas().iter().map(|&g| c * effective_load(g)).collect();
    Ok(PowerAllocation::new(p, c)?)
}

/// Inflates loads multiplicatively to sum exactly to τ. If proportional
/// scaling would push a user to a full pilot dimension (load ≥ 1), that
/// user is capped just below 1 and the remainder is redistributed
/// proportionally among the uncapped users.
fn inflate_loads(loads: &[f64], tau: f64) -> Vec<f64> {
    const CAP_EPS: f64 = 1e-9;
    let k = loads.len();
    let total: f64 = loads.iter().sum();
    if total >= tau {
        return loads.to_vec();
    }
    let scale = tau / total;
    let scaled: Vec<f64> = loads.iter().map(|&f| (f * scale).max(f)).collect();
    if scaled.iter().all(|&f| f < 1.0) {
        return scaled;
    }
    let cap = |f: f64| (1.0 - CAP_EPS).max(f);
    let mut capped = vec![false; k];
    loop {
        let mut budget = tau;
        let mut uncapped_total = 0.0;
        for i in 0..k {
            if capped[i] {
                budget -= cap(loads[i]);
            } else {
                uncapped_total += loads[i];
            }
        }
        if uncapped_total <= 0.0 {
            return loads.iter().map(|&f| cap(f)).collect();
        }
        let scale = budget / uncapped_total;
        let mut changed = false;
        for i in 0..k {
            if !capped[i] && loads[i] * scale >= 1.0 {
                capped[i] = true;
                changed = true;
            }
        }
        if !changed {
            return (0..k)
                .map(|i| {
                    if capped[i] {
                        cap(loads[i])
                    } else {
                        (loads[i] * scale).max(loads[i])
                    }
                })
                .collect();
        }
    }
}

/// Orthogonal pilots for the uncontaminated regime `K ≤ τ`: every user
/// gets its own pilot dimension, equal powers, infinite achieved SINR.
fn orthogonal_design(req: &SinrRequirements, c: f64) -> Result<Allocation, SequenceError> {
    let k = req.num_users();
    let tau = req.tau();
    let mut s = DMatrix::<f64>::zeros(tau, k);
    for i in 0..k {
        s[(i, i)] = 1.0;
    }
    let pilots = PilotMatrix::new(s)?;
    let powers = PowerAllocation::new(vec![c; k], c)?;
    Ok(Allocation::new(
        pilots,
        powers,
        vec![f64::INFINITY; k],
        req,
    )?)
}

/// Shared design kernel: from inflated loads summing to τ, build powers
/// `P_i = c f̂_i`, the flat spectrum `λ_1..τ = c`, and the pilot matrix
/// `S = Σ^½ Vᵀ D^−½`. Verifies `S D Sᵀ = Σ` before returning.
fn gwbe_from_loads(
    inflated: &[f64],
    c: f64,
    targets: &SinrRequirements,
) -> Result<Allocation, SequenceError> {
    let k = inflated.len();
    let tau = targets.tau();
    let powers_vec: Vec<f64> = inflated.iter().map(|&f| c * f).collect();

    let lo = inflated.iter().cloned().fold(f64::MAX, f64::min);
    let hi = inflated.iter().cloned().fold(f64::MIN, f64::max);
    let identical = hi - lo <= 1e-12 * hi.max(1.0);

    let s = if identical {
        equiangular_frame(k, tau)
    } else {
        None
    };
    let s = match s {
        Some(frame) => frame,
        None => schur_horn_pilots(inflated, c, tau)?,
    };

    // Eq. of the construction: S D Sᵀ must equal the flat spectrum c·I_τ.
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(powers_vec.clone()));
    let sds = &s * d * s.transpose();
    let mut residual: f64 = 0.0;
    for i in 0..tau {
        for j in 0..tau {
            let want = if i == j { c } else { 0.0 };
            residual = residual.max((sds[(i, j)] - want).abs());
        }
    }
    let tol = DEFAULT_TOLERANCES.construction * c.max(1.0);
    if residual > tol {
        return Err(SequenceError::Construction(
            MajorizationError::NumericalFailure { residual, tol },
        ));
    }

    let achieved: Vec<f64> = inflated
        .iter()
        .zip(targets.gammas())
        .map(|(&f, &g)| load_to_gamma(f).max(g))
        .collect();
    let pilots = PilotMatrix::new(s)?;
    let powers = PowerAllocation::new(powers_vec, c)?;
    Ok(Allocation::new(pilots, powers, achieved, targets)?)
}

/// Pilot matrix from the symmetric-construction route: build H with
/// diagonal `p = c·f̂` and spectrum `(c, …, c, 0, …)`, then map its
/// nonzero-eigenvalue basis V through `S = Σ^½ Vᵀ D^−½`.
fn schur_horn_pilots(inflated: &[f64], c: f64, tau: usize) -> Result<DMatrix<f64>, SequenceError> {
    let k = inflated.len();
    let mut spectrum = vec![0.0; k];
    for slot in spectrum.iter_mut().take(tau) {
        *slot = c;
    }
    let diagonal: Vec<f64> = inflated.iter().map(|&f| c * f).collect();
    let pair = SpectrumDiagonalPair::new(spectrum, diagonal.clone())?;
    let built = construct_symmetric(&pair, DEFAULT_TOLERANCES.construction)?;
    let v = built.v_block();
    let sqrt_c = c.sqrt();
    let mut s = DMatrix::<f64>::zeros(tau, k);
    for i in 0..k {
        let col_scale = sqrt_c / diagonal[i].sqrt();
        for t in 0..tau {
            s[(t, i)] = col_scale * v[(i, t)];
        }
    }
    Ok(s)
}

/// Known real equiangular tight frames: orthonormal bases (K = τ), the
/// regular simplex (K = τ + 1), and the six icosahedral diagonals (6, 3).
fn equiangular_frame(k: usize, tau: usize) -> Option<DMatrix<f64>> {
    if k == tau {
        return Some(DMatrix::identity(tau, k));
    }
    if k == tau + 1 {
        return Some(simplex_frame(tau));
    }
    if (k, tau) == (6, 3) {
        return Some(icosahedral_frame());
    }
    None
}

/// K = τ + 1 unit vectors in R^τ with pairwise correlation −1/τ, built
/// from the Helmert orthonormal basis of the hyperplane orthogonal to 1.
fn simplex_frame(tau: usize) -> DMatrix<f64> {
    let k = tau + 1;
    let mut u = DMatrix::<f64>::zeros(tau, k);
    for j in 1..=tau {
        let norm = 1.0 / ((j * (j + 1)) as f64).sqrt();
        for col in 0..j {
            u[(j - 1, col)] = norm;
        }
        u[(j - 1, j)] = -(j as f64) * norm;
    }
    // Columns of u have squared norm (K−1)/K = τ/K; rescale to unit.
    u * (k as f64 / tau as f64).sqrt()
}

/// The six diagonals of the icosahedron: pairwise squared correlation 1/5.
fn icosahedral_frame() -> DMatrix<f64> {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let scale = 1.0 / (1.0 + phi * phi).sqrt();
    let dirs = [
        [0.0, 1.0, phi],
        [0.0, -1.0, phi],
        [1.0, phi, 0.0],
        [-1.0, phi, 0.0],
        [phi, 0.0, 1.0],
        [phi, 0.0, -1.0],
    ];
    let mut s = DMatrix::<f64>::zeros(3, 6);
    for (i, dir) in dirs.iter().enumerate() {
        for (t, &x) in dir.iter().enumerate() {
            s[(t, i)] = x * scale;
        }
    }
    s
}
