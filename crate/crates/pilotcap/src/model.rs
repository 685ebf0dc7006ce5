//! Domain types shared by every module: SINR requirement sets, pilot
//! matrices with cached Gram matrices, power allocations, and simulation
//! scenarios. All types validate their invariants at construction and are
//! immutable afterwards, so they can be shared freely across threads.

use nalgebra::DMatrix;
use thiserror::Error;

/// Centralized numeric tolerances used by constructors and validity checks.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Structural checks: unit column norms, Gram consistency, sum matching.
    pub structural: f64,
    /// Agreement between the achieved SINR of an allocation and its targets.
    pub sinr_match: f64,
    /// Residual allowed for the symmetric-matrix construction kernel.
    pub construction: f64,
}

pub const DEFAULT_TOLERANCES: Tolerances = Tolerances {
    structural: 1e-9,
    sinr_match: 1e-6,
    construction: 1e-8,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("SINR target at index {index} must be positive, got {value}")]
    NonPositiveGamma { index: usize, value: f64 },
    #[error("SINR target at index {index} must be finite, got {value}")]
    NonFiniteGamma { index: usize, value: f64 },
    #[error("requirement set contains no users")]
    EmptyUserSet,
    #[error("pilot sequence length must be at least 1")]
    ZeroPilotLength,
    #[error("pilot column {index} has 2-norm {norm} but unit norm is required")]
    NonUnitColumn { index: usize, norm: f64 },
    #[error("power at index {index} must be positive and finite, got {value}")]
    NonPositivePower { index: usize, value: f64 },
    #[error("power scale constant must be positive and finite, got {value}")]
    NonPositiveScale { value: f64 },
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("achieved SINR {achieved} at index {index} is below the target {target}")]
    AchievedBelowTarget {
        index: usize,
        achieved: f64,
        target: f64,
    },
    #[error(
        "asymptotic SINR {computed} at index {index} does not match the stated value {stated}"
    )]
    SinrMismatch {
        index: usize,
        computed: f64,
        stated: f64,
    },
    #[error("invalid user grouping: {reason}")]
    InvalidGrouping { reason: String },
    #[error("antenna count must be at least 1")]
    ZeroAntennas,
    #[error("trial count must be at least 1")]
    ZeroTrials,
    #[error("noise variance must be nonnegative and finite, got {value}")]
    NegativeVariance { value: f64 },
}

/// The effective pilot load `f(x) = x / (1 + x)` of a SINR target.
///
/// Saturates at 1; an infinite target consumes exactly one orthogonal
/// pilot dimension, which is the convention used throughout.
pub fn effective_load(gamma: f64) -> f64 {
    if gamma.is_infinite() {
        1.0
    } else {
        gamma / (1.0 + gamma)
    }
}

/// Inverse of [`effective_load`]: the SINR target consuming load `f`.
pub fn load_to_gamma(f: f64) -> f64 {
    if f >= 1.0 {
        f64::INFINITY
    } else {
        f / (1.0 - f)
    }
}

/// Per-user SINR targets (linear scale) together with the pilot length.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrRequirements {
    gammas: Vec<f64>,
    tau: usize,
}

impl SinrRequirements {
    pub fn new(gammas: Vec<f64>, tau: usize) -> Result<Self, ModelError> {
        check_requirements(&gammas, tau)?;
        Ok(Self { gammas, tau })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn num_users(&self) -> usize {
        self.gammas.len()
    }

    /// Per-user effective loads `γ_i / (1 + γ_i)`.
    pub fn loads(&self) -> Vec<f64> {
        self.gammas.iter().copied().map(effective_load).collect()
    }

    /// Total effective load of the requirement set.
    pub fn total_load(&self) -> f64 {
        self.loads().iter().sum()
    }
}

fn check_requirements(gammas: &[f64], tau: usize) -> Result<(), ModelError> {
    if gammas.is_empty() {
        return Err(ModelError::EmptyUserSet);
    }
    if tau == 0 {
        return Err(ModelError::ZeroPilotLength);
    }
    for (index, &value) in gammas.iter().enumerate() {
        if !value.is_finite() {
            return Err(ModelError::NonFiniteGamma { index, value });
        }
        if value <= 0.0 {
            return Err(ModelError::NonPositiveGamma { index, value });
        }
    }
    Ok(())
}

/// Re-checks the invariants of an already constructed requirement set.
pub fn validate_requirements(req: &SinrRequirements) -> Result<(), ModelError> {
    check_requirements(&req.gammas, req.tau)
}

/// A τ×K matrix of unit-norm pilot columns with its cached Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    s: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl PilotMatrix {
    /// Validates unit column norms and caches the Gram matrix `SᵀS`.
    pub fn new(s: DMatrix<f64>) -> Result<Self, ModelError> {
        if s.ncols() == 0 {
            return Err(ModelError::EmptyUserSet);
        }
        if s.nrows() == 0 {
            return Err(ModelError::ZeroPilotLength);
        }
        for (index, col) in s.column_iter().enumerate() {
            let norm = col.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > DEFAULT_TOLERANCES.structural {
                return Err(ModelError::NonUnitColumn { index, norm });
            }
        }
        let gram = s.tr_mul(&s);
        Ok(Self { s, gram })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Gram matrix `SᵀS`; entry (i, j) is the cross-correlation ρ_ij.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn tau(&self) -> usize {
        self.s.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.s.ncols()
    }

    pub fn rho(&self, i: usize, j: usize) -> f64 {
        self.gram[(i, j)]
    }
}

/// Downlink transmit powers, one per user, plus the scale constant used
/// to build them.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    p: Vec<f64>,
    scale_c: f64,
}

impl PowerAllocation {
    pub fn new(p: Vec<f64>, scale_c: f64) -> Result<Self, ModelError> {
        if p.is_empty() {
            return Err(ModelError::EmptyUserSet);
        }
        if !(scale_c.is_finite() && scale_c > 0.0) {
            return Err(ModelError::NonPositiveScale { value: scale_c });
        }
        for (index, &value) in p.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::NonPositivePower { index, value });
            }
        }
        Ok(Self { p, scale_c })
    }

    pub fn powers(&self) -> &[f64] {
        &self.p
    }

    pub fn scale_c(&self) -> f64 {
        self.scale_c
    }

    pub fn num_users(&self) -> usize {
        self.p.len()
    }
}

/// Asymptotic (large antenna count) SINR of a pilot/power pair, computed
/// from cross-correlations only: `P_i / Σ_{j≠i} ρ_ji² P_j`.
///
/// Users with exactly orthogonal pilots see no interference and get the
/// `+inf` sentinel.
pub(crate) fn asymptotic_sinr_from_gram(gram: &DMatrix<f64>, powers: &[f64]) -> Vec<f64> {
    let k = powers.len();
    (0..k)
        .map(|i| {
            let mut interference = 0.0;
            for j in 0..k {
                if j != i {
                    let rho = gram[(j, i)];
                    interference += rho * rho * powers[j];
                }
            }
            if interference == 0.0 {
                f64::INFINITY
            } else {
                powers[i] / interference
            }
        })
        .collect()
}

/// Compares an achieved SINR against a stated one, treating two infinite
/// values as equal and switching to a relative tolerance above 1.
pub(crate) fn sinr_matches(computed: f64, stated: f64, tol: f64) -> bool {
    if computed.is_infinite() || stated.is_infinite() {
        return computed == stated;
    }
    (computed - stated).abs() <= tol * stated.abs().max(1.0)
}

/// A complete pilot/power design: the pilot matrix, the power vector, and
/// the SINR values the pair actually achieves (targets after inflation).
#[derive(Debug, Clone)]
pub struct Allocation {
    pub pilots: PilotMatrix,
    pub powers: PowerAllocation,
    pub achieved_gammas: Vec<f64>,
}

impl Allocation {
    /// Builds an allocation, checking that every achieved SINR meets its
    /// target and that the asymptotic SINR of the pair matches the stated
    /// achieved values.
    pub fn new(
        pilots: PilotMatrix,
        powers: PowerAllocation,
        achieved_gammas: Vec<f64>,
        targets: &SinrRequirements,
    ) -> Result<Self, ModelError> {
        let k = targets.num_users();
        if pilots.num_users() != k {
            return Err(ModelError::DimensionMismatch {
                expected: k,
                got: pilots.num_users(),
            });
        }
        if powers.num_users() != k {
            return Err(ModelError::DimensionMismatch {
                expected: k,
                got: powers.num_users(),
            });
        }
        if achieved_gammas.len() != k {
            return Err(ModelError::DimensionMismatch {
                expected: k,
                got: achieved_gammas.len(),
            });
        }
        for (index, (&achieved, &target)) in
            achieved_gammas.iter().zip(targets.gammas()).enumerate()
        {
            if achieved < target {
                return Err(ModelError::AchievedBelowTarget {
                    index,
                    achieved,
                    target,
                });
            }
        }
        let sinr = asymptotic_sinr_from_gram(pilots.gram(), powers.powers());
        for (index, (&computed, &stated)) in sinr.iter().zip(&achieved_gammas).enumerate() {
            if !sinr_matches(computed, stated, DEFAULT_TOLERANCES.sinr_match) {
                return Err(ModelError::SinrMismatch {
                    index,
                    computed,
                    stated,
                });
            }
        }
        Ok(Self {
            pilots,
            powers,
            achieved_gammas,
        })
    }
}

/// Partition of the K user indices (0-based) into τ disjoint groups that
/// share one orthogonal pilot each. With `K = qτ + r`, exactly `r` groups
/// have `q + 1` members and the rest have `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FosGrouping {
    groups: Vec<Vec<usize>>,
    num_users: usize,
}

impl FosGrouping {
    pub fn new(groups: Vec<Vec<usize>>, num_users: usize) -> Result<Self, ModelError> {
        let tau = groups.len();
        if tau == 0 {
            return Err(ModelError::ZeroPilotLength);
        }
        if num_users == 0 {
            return Err(ModelError::EmptyUserSet);
        }
        let q = num_users / tau;
        let r = num_users % tau;
        let mut large = 0usize;
        let mut small = 0usize;
        for group in &groups {
            if group.len() == q + 1 {
                large += 1;
            } else if group.len() == q {
                small += 1;
            } else {
                return Err(ModelError::InvalidGrouping {
                    reason: format!(
                        "group cardinality {} is neither {} nor {}",
                        group.len(),
                        q,
                        q + 1
                    ),
                });
            }
        }
        // When r = 0 the two cardinality classes coincide.
        if r != 0 && (large != r || small != tau - r) {
            return Err(ModelError::InvalidGrouping {
                reason: format!("expected {} groups of size {} and {} of size {}", r, q + 1, tau - r, q),
            });
        }
        let mut seen = vec![false; num_users];
        for group in &groups {
            for &user in group {
                if user >= num_users {
                    return Err(ModelError::InvalidGrouping {
                        reason: format!("user index {user} out of range for K={num_users}"),
                    });
                }
                if seen[user] {
                    return Err(ModelError::InvalidGrouping {
                        reason: format!("user index {user} appears in more than one group"),
                    });
                }
                seen[user] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(ModelError::InvalidGrouping {
                reason: "groups do not cover every user".to_string(),
            });
        }
        Ok(Self { groups, num_users })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn tau(&self) -> usize {
        self.groups.len()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Group index of a user.
    pub fn group_of(&self, user: usize) -> usize {
        self.groups
            .iter()
            .position(|g| g.contains(&user))
            .expect("user indices are covered by construction")
    }
}

/// Monte Carlo scenario: antenna count, noise variances, trial count, seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimScenario {
    pub m_antennas: usize,
    pub sigma_z_sq: f64,
    pub sigma_w_sq: f64,
    pub n_trials: usize,
    pub seed: u64,
}

impl SimScenario {
    pub fn new(
        m_antennas: usize,
        sigma_z_sq: f64,
        sigma_w_sq: f64,
        n_trials: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if m_antennas == 0 {
            return Err(ModelError::ZeroAntennas);
        }
        if n_trials == 0 {
            return Err(ModelError::ZeroTrials);
        }
        for &value in [sigma_z_sq, sigma_w_sq].iter() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::NegativeVariance { value });
            }
        }
        Ok(Self {
            m_antennas,
            sigma_z_sq,
            sigma_w_sq,
            n_trials,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_valid_requirements() {
        let req = SinrRequirements::new(vec![1.0, 1.0], 2).unwrap();
        assert_eq!(req.num_users(), 2);
        assert_eq!(req.tau(), 2);
        validate_requirements(&req).unwrap();
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        let err = SinrRequirements::new(vec![1.0, -0.5], 2).unwrap_err();
        assert_eq!(
            err,
            ModelError::NonPositiveGamma {
                index: 1,
                value: -0.5
            }
        );
    }

    #[test]
    fn rejects_empty_user_set() {
        assert_eq!(
            SinrRequirements::new(vec![], 3).unwrap_err(),
            ModelError::EmptyUserSet
        );
    }

    #[test]
    fn rejects_zero_pilot_length() {
        assert_eq!(
            SinrRequirements::new(vec![1.0], 0).unwrap_err(),
            ModelError::ZeroPilotLength
        );
    }

    #[test]
    fn rejects_non_finite_gamma() {
        let err = SinrRequirements::new(vec![f64::INFINITY], 1).unwrap_err();
        assert!(matches!(err, ModelError::NonFiniteGamma { index: 0, .. }));
    }

    #[test]
    fn pilot_matrix_requires_unit_columns() {
        let s = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let err = PilotMatrix::new(s).unwrap_err();
        assert!(matches!(err, ModelError::NonUnitColumn { index: 1, .. }));
    }

    #[test]
    fn pilot_matrix_gram_matches_recomputation() {
        let s = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, 0.6, 0.8]);
        let pilots = PilotMatrix::new(s.clone()).unwrap();
        let recomputed = s.tr_mul(&s);
        let diff = (pilots.gram() - &recomputed).abs().max();
        assert!(diff <= DEFAULT_TOLERANCES.structural);
        // Symmetric with unit diagonal.
        for i in 0..3 {
            assert!((pilots.gram()[(i, i)] - 1.0).abs() <= DEFAULT_TOLERANCES.structural);
            for j in 0..3 {
                assert_eq!(pilots.gram()[(i, j)], pilots.gram()[(j, i)]);
            }
        }
    }

    #[test]
    fn power_allocation_rejects_nonpositive_entries() {
        let err = PowerAllocation::new(vec![1.0, 0.0], 1.0).unwrap_err();
        assert!(matches!(err, ModelError::NonPositivePower { index: 1, .. }));
        let err = PowerAllocation::new(vec![1.0], -2.0).unwrap_err();
        assert!(matches!(err, ModelError::NonPositiveScale { .. }));
    }

    #[test]
    fn allocation_rejects_achieved_below_target() {
        let req = SinrRequirements::new(vec![2.0, 2.0], 1).unwrap();
        let s = DMatrix::from_column_slice(1, 2, &[1.0, 1.0]);
        let pilots = PilotMatrix::new(s).unwrap();
        let powers = PowerAllocation::new(vec![1.0, 1.0], 1.0).unwrap();
        // Shared pilot with equal powers achieves SINR 1 < 2.
        let err = Allocation::new(pilots, powers, vec![1.0, 1.0], &req).unwrap_err();
        assert!(matches!(err, ModelError::AchievedBelowTarget { .. }));
    }

    #[test]
    fn allocation_rejects_mismatched_sinr_claim() {
        let req = SinrRequirements::new(vec![1.0, 1.0], 1).unwrap();
        let s = DMatrix::from_column_slice(1, 2, &[1.0, 1.0]);
        let pilots = PilotMatrix::new(s).unwrap();
        let powers = PowerAllocation::new(vec![1.0, 1.0], 1.0).unwrap();
        let err = Allocation::new(pilots, powers, vec![2.0, 2.0], &req).unwrap_err();
        assert!(matches!(err, ModelError::SinrMismatch { .. }));
    }

    #[test]
    fn fos_grouping_cardinalities() {
        // K = 7, τ = 3 -> q = 2, r = 1: one group of 3, two of 2.
        FosGrouping::new(vec![vec![0, 3, 6], vec![1, 4], vec![2, 5]], 7).unwrap();
        let err = FosGrouping::new(vec![vec![0, 3], vec![1, 4, 6], vec![2, 5]], 7);
        assert!(err.is_ok(), "cardinality classes may appear in any order");
        let err = FosGrouping::new(vec![vec![0, 1, 2, 3], vec![4, 5], vec![6]], 7).unwrap_err();
        assert!(matches!(err, ModelError::InvalidGrouping { .. }));
    }

    #[test]
    fn fos_grouping_rejects_overlap_and_gaps() {
        let err = FosGrouping::new(vec![vec![0, 1], vec![1, 2]], 4).unwrap_err();
        assert!(matches!(err, ModelError::InvalidGrouping { .. }));
        let err = FosGrouping::new(vec![vec![0, 1], vec![2, 2]], 4).unwrap_err();
        assert!(matches!(err, ModelError::InvalidGrouping { .. }));
    }

    #[test]
    fn scenario_validation() {
        SimScenario::new(64, 0.1, 0.1, 10, 7).unwrap();
        assert!(SimScenario::new(0, 0.1, 0.1, 10, 7).is_err());
        assert!(SimScenario::new(8, -0.1, 0.1, 10, 7).is_err());
        assert!(SimScenario::new(8, 0.1, 0.1, 0, 7).is_err());
    }

    #[test]
    fn effective_load_saturates() {
        assert_eq!(effective_load(1.0), 0.5);
        assert_eq!(effective_load(f64::INFINITY), 1.0);
        assert_eq!(load_to_gamma(0.5), 1.0);
        assert_eq!(load_to_gamma(1.0), f64::INFINITY);
    }
}
