//! Majorization test and the constructive inverse eigenvalue problem:
//! build a real symmetric matrix with a prescribed diagonal and prescribed
//! spectrum. The construction chains at most K−1 plane (Givens) rotations,
//! each one fixing a single diagonal entry while preserving the spectrum.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::DEFAULT_TOLERANCES;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MajorizationError {
    #[error("vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("spectrum does not majorize the diagonal")]
    NotMajorized,
    #[error("spectrum sum {spectrum_sum} does not match diagonal sum {diagonal_sum}")]
    SumMismatch {
        spectrum_sum: f64,
        diagonal_sum: f64,
    },
    #[error("spectrum entries must be nonnegative, got {value} at index {index}")]
    InvalidSpectrum { index: usize, value: f64 },
    #[error("construction residual {residual} exceeds tolerance {tol}")]
    NumericalFailure { residual: f64, tol: f64 },
}

/// Whether `x` majorizes `y`: with both vectors sorted in decreasing order,
/// every prefix sum of `x` is at least the corresponding prefix sum of `y`.
/// Equality of the total sums is not required here; callers that need it
/// (the construction below) check it separately.
pub fn majorizes(x: &[f64], y: &[f64]) -> Result<bool, MajorizationError> {
    if x.len() != y.len() {
        return Err(MajorizationError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(majorizes_with_slack(x, y, 0.0))
}

/// Prefix comparison with an absolute slack, used internally so that sums
/// matching only up to floating-point error still count as majorized.
pub(crate) fn majorizes_with_slack(x: &[f64], y: &[f64], slack: f64) -> bool {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
    ys.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
    let mut px = 0.0;
    let mut py = 0.0;
    for (a, b) in xs.iter().zip(&ys) {
        px += a;
        py += b;
        if px < py - slack {
            return false;
        }
    }
    true
}

/// A spectrum/diagonal pair satisfying the preconditions of the symmetric
/// construction: equal sums and spectrum majorizing the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDiagonalPair {
    eigenvalues: Vec<f64>,
    diagonal: Vec<f64>,
}

impl SpectrumDiagonalPair {
    pub fn new(eigenvalues: Vec<f64>, diagonal: Vec<f64>) -> Result<Self, MajorizationError> {
        if eigenvalues.len() != diagonal.len() {
            return Err(MajorizationError::LengthMismatch {
                left: eigenvalues.len(),
                right: diagonal.len(),
            });
        }
        for (index, &value) in eigenvalues.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(MajorizationError::InvalidSpectrum { index, value });
            }
        }
        let spectrum_sum: f64 = eigenvalues.iter().sum();
        let diagonal_sum: f64 = diagonal.iter().sum();
        let scale = spectrum_sum.abs().max(1.0);
        if (spectrum_sum - diagonal_sum).abs() > DEFAULT_TOLERANCES.structural * scale {
            return Err(MajorizationError::SumMismatch {
                spectrum_sum,
                diagonal_sum,
            });
        }
        if !majorizes_with_slack(
            &eigenvalues,
            &diagonal,
            DEFAULT_TOLERANCES.structural * scale,
        ) {
            return Err(MajorizationError::NotMajorized);
        }
        Ok(Self {
            eigenvalues,
            diagonal,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }
}

/// Result of the symmetric construction: `h = q · diag(eigenvalues) · qᵀ`
/// with `diag(h)` equal to the prescribed diagonal. `eigenvalues` are sorted
/// in decreasing order, so the first `rank` columns of `q` span the
/// nonzero-eigenvalue subspace.
#[derive(Debug, Clone)]
pub struct SymmetricConstruction {
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
}

impl SymmetricConstruction {
    /// The K×rank block of `q` spanning the nonzero-eigenvalue subspace.
    pub fn v_block(&self) -> DMatrix<f64> {
        self.q.columns(0, self.rank).into_owned()
    }
}

/// Builds a real symmetric matrix with the pair's spectrum and diagonal.
///
/// Targets are processed largest first. Each step picks the adjacent pair
/// of remaining spectrum values bracketing the target and rotates in their
/// plane so the target lands on the diagonal; the pair is replaced by its
/// sum minus the target. The ordering is deterministic, so the output is
/// reproducible bit for bit.
pub fn construct_symmetric(
    pair: &SpectrumDiagonalPair,
    tol: f64,
) -> Result<SymmetricConstruction, MajorizationError> {
    let n = pair.len();

    // Spectrum sorted in decreasing order defines the working Λ.
    let mut lambda: Vec<f64> = pair.eigenvalues().to_vec();
    lambda.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));

    // Targets sorted in decreasing order, remembering original slots.
    let mut targets: Vec<(f64, usize)> = pair
        .diagonal()
        .iter()
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    targets.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite values").then(a.1.cmp(&b.1)));

    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, &l) in lambda.iter().enumerate() {
        a[(i, i)] = l;
    }
    let mut q = DMatrix::<f64>::identity(n, n);

    // Active spectrum values and the working-matrix position they occupy,
    // kept sorted in decreasing value order.
    let mut active: Vec<(f64, usize)> = lambda.iter().copied().zip(0..n).collect();
    // Working position assigned to each sorted target.
    let mut slot_of_target: Vec<usize> = vec![0; n];

    for (k, &(t, _)) in targets.iter().enumerate() {
        if active.len() == 1 {
            slot_of_target[k] = active[0].1;
            active.clear();
            break;
        }
        // Last active value still >= t; the element after it brackets t
        // from below. Clamping covers the degenerate all-equal tails.
        let hi = match active.iter().rposition(|&(v, _)| v >= t) {
            Some(j) if j + 1 < active.len() => j,
            Some(_) => active.len() - 2,
            None => 0,
        };
        let (va, pa) = active[hi];
        let (vb, pb) = active[hi + 1];
        let denom = va - vb;
        let (c, s) = if denom.abs() <= f64::EPSILON * va.abs().max(1.0) {
            (1.0, 0.0)
        } else {
            let c2 = ((t - vb) / denom).clamp(0.0, 1.0);
            (c2.sqrt(), (1.0 - c2).clamp(0.0, 1.0).sqrt())
        };
        if s != 0.0 {
            apply_rotation(&mut a, &mut q, pa, pb, c, s);
        }
        slot_of_target[k] = pa;
        let merged = va + vb - t;
        active.remove(hi + 1);
        active.remove(hi);
        // Insert keeping decreasing order; stable position for determinism.
        let at = active
            .iter()
            .position(|&(v, _)| v < merged)
            .unwrap_or(active.len());
        active.insert(at, (merged, pb));
    }
    if let Some(&(_, last_pos)) = active.first() {
        slot_of_target[n - 1] = last_pos;
    }

    // Permute rows/columns so the diagonal lands in the original order.
    let mut slot_of_original = vec![0usize; n];
    for (k, &(_, orig)) in targets.iter().enumerate() {
        slot_of_original[orig] = slot_of_target[k];
    }
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut q_out = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            h[(r, c)] = a[(slot_of_original[r], slot_of_original[c])];
            q_out[(r, c)] = q[(slot_of_original[r], c)];
        }
    }

    // Cleanup pass: rotations applied to rows and columns symmetrically
    // should leave H symmetric to the bit, but re-symmetrize on drift.
    let asym = max_abs_diff(&h, &h.transpose());
    if asym > tol / 10.0 {
        h = (&h + h.transpose()) * 0.5;
    }

    let rank = lambda.iter().filter(|&&l| l > 0.0).count();

    let mut residual: f64 = 0.0;
    for (i, &want) in pair.diagonal().iter().enumerate() {
        residual = residual.max((h[(i, i)] - want).abs());
    }
    let qtq = q_out.tr_mul(&q_out);
    let eye = DMatrix::<f64>::identity(n, n);
    residual = residual.max(max_abs_diff(&qtq, &eye));
    if residual > tol {
        return Err(MajorizationError::NumericalFailure { residual, tol });
    }

    Ok(SymmetricConstruction {
        h,
        q: q_out,
        eigenvalues: lambda,
        rank,
    })
}

/// Applies `Gᵀ A G` and `Gᵀ Q` for the plane rotation acting on rows and
/// columns `i` and `j`, chosen so the new (i, i) entry equals the target.
fn apply_rotation(a: &mut DMatrix<f64>, q: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    let n = a.nrows();
    for m in 0..n {
        let ai = a[(i, m)];
        let aj = a[(j, m)];
        a[(i, m)] = c * ai + s * aj;
        a[(j, m)] = -s * ai + c * aj;
    }
    for m in 0..n {
        let ai = a[(m, i)];
        let aj = a[(m, j)];
        a[(m, i)] = c * ai + s * aj;
        a[(m, j)] = -s * ai + c * aj;
    }
    for m in 0..n {
        let qi = q[(i, m)];
        let qj = q[(j, m)];
        q[(i, m)] = c * qi + s * qj;
        q[(j, m)] = -s * qi + c * qj;
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    /// Independent oracle: sorted eigenvalues from nalgebra's symmetric
    /// eigensolver, which shares no code with the construction above.
    fn eigen_oracle(h: &DMatrix<f64>) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev
    }

    #[test]
    fn majorizes_basic_cases() {
        assert!(majorizes(&[2.0, 0.0], &[1.0, 1.0]).unwrap());
        assert!(!majorizes(&[1.0, 1.0], &[2.0, 0.0]).unwrap());
        // Flat spectrum over τ = 3 slots vs six equal loads summing to 3.
        let e = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let p = [0.5; 6];
        assert!(majorizes(&e, &p).unwrap());
    }

    #[test]
    fn majorizes_rejects_length_mismatch() {
        let err = majorizes(&[1.0], &[1.0, 0.0]).unwrap_err();
        assert_eq!(err, MajorizationError::LengthMismatch { left: 1, right: 2 });
    }

    #[test]
    fn pair_rejects_sum_mismatch_and_non_majorized() {
        let err = SpectrumDiagonalPair::new(vec![2.0, 0.0], vec![1.0, 0.5]).unwrap_err();
        assert!(matches!(err, MajorizationError::SumMismatch { .. }));
        let err = SpectrumDiagonalPair::new(vec![1.0, 1.0], vec![2.0, 0.0]).unwrap_err();
        assert_eq!(err, MajorizationError::NotMajorized);
    }

    #[test]
    fn two_by_two_forced_up_to_sign() {
        let pair = SpectrumDiagonalPair::new(vec![2.0, 0.0], vec![1.0, 1.0]).unwrap();
        let built = construct_symmetric(&pair, 1e-8).unwrap();
        assert!((built.h[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((built.h[(1, 1)] - 1.0).abs() < 1e-12);
        assert!((built.h[(0, 1)].abs() - 1.0).abs() < 1e-12);
        assert_eq!(built.h[(0, 1)], built.h[(1, 0)]);
    }

    #[test]
    fn equal_spectrum_and_diagonal_gives_diagonal_matrix() {
        let pair = SpectrumDiagonalPair::new(vec![3.0, 2.0, 1.0], vec![3.0, 2.0, 1.0]).unwrap();
        let built = construct_symmetric(&pair, 1e-8).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        assert!(max_abs_diff(&built.h, &expected) < 1e-12);
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!(max_abs_diff(&built.q, &eye) < 1e-12);
    }

    #[test]
    fn flat_spectrum_against_eigen_oracle() {
        let e = vec![2.0, 2.0, 2.0, 0.0, 0.0, 0.0];
        let p = vec![1.0; 6];
        let pair = SpectrumDiagonalPair::new(e.clone(), p.clone()).unwrap();
        let built = construct_symmetric(&pair, 1e-8).unwrap();
        for i in 0..6 {
            assert!((built.h[(i, i)] - 1.0).abs() <= 1e-10);
        }
        let got = eigen_oracle(&built.h);
        let mut want = e.clone();
        want.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-8, "eigenvalue {g} vs {w}");
        }
        assert_eq!(built.rank, 3);
        // V block spans the range of H: H v = 2 v for each column.
        let v = built.v_block();
        let hv = &built.h * &v;
        assert!(max_abs_diff(&hv, &(&v * 2.0)) < 1e-10);
    }

    #[test]
    fn unsorted_diagonal_is_respected() {
        let pair =
            SpectrumDiagonalPair::new(vec![4.0, 3.0, 0.0, 0.0], vec![1.2, 2.9, 1.4, 1.5]).unwrap();
        let built = construct_symmetric(&pair, 1e-8).unwrap();
        for (i, want) in [1.2, 2.9, 1.4, 1.5].into_iter().enumerate() {
            assert!((built.h[(i, i)] - want).abs() <= 1e-10);
        }
        let got = eigen_oracle(&built.h);
        for (g, w) in got.iter().zip(&[4.0, 3.0, 0.0, 0.0]) {
            assert!((g - w).abs() <= 1e-8);
        }
    }

    proptest! {
        /// Flat spectrum on τ slots rescaled to Σp majorizes any positive p
        /// with max(p) ≤ Σp/τ, and the construction then succeeds with the
        /// contracted residuals.
        #[test]
        fn flat_spectrum_construction_succeeds(
            p in proptest::collection::vec(0.1f64..10.0, 2..24),
            tau_seed in 1usize..24,
        ) {
            let n = p.len();
            let tau = (tau_seed % n).max(1);
            let total: f64 = p.iter().sum();
            let lambda = total / tau as f64;
            let max_p = p.iter().cloned().fold(f64::MIN, f64::max);
            prop_assume!(max_p <= lambda);
            let mut e = vec![0.0; n];
            for slot in e.iter_mut().take(tau) {
                *slot = lambda;
            }
            prop_assert!(majorizes_with_slack(&e, &p, 1e-9 * total.max(1.0)));
            let pair = SpectrumDiagonalPair::new(e.clone(), p.clone()).unwrap();
            let built = construct_symmetric(&pair, 1e-8).unwrap();
            for (i, want) in p.iter().enumerate() {
                prop_assert!((built.h[(i, i)] - want).abs() <= 1e-8);
            }
            let got = eigen_oracle(&built.h);
            let mut want = e.clone();
            want.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-8);
            }
        }
    }
}
