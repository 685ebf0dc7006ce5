//! Admissibility predicates and capacity bounds for the three schemes,
//! achievable-SINR search, FOS grouping optimization, admissible-region
//! boundary sampling, and the validity check for finished allocations.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    asymptotic_sinr_from_gram, effective_load, load_to_gamma, Allocation, FosGrouping, ModelError,
    PilotMatrix, PowerAllocation, SinrRequirements, DEFAULT_TOLERANCES,
};

/// Pilot/power allocation schemes under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Gwbe,
    Wbe,
    Fos,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Gwbe => "gwbe",
            SchemeKind::Wbe => "wbe",
            SchemeKind::Fos => "fos",
        }
    }
}

/// How the FOS scheme picks its user grouping when a predicate is
/// evaluated for varying requirement sets.
#[derive(Debug, Clone)]
pub enum FosMode {
    /// Round-robin grouping: user k joins group k mod τ.
    Canonical,
    /// Exhaustive (small K) or LPT-with-swaps grouping minimizing the
    /// maximum group load, recomputed for every probed requirement set.
    Optimal,
    /// A caller-supplied grouping; only valid while K stays fixed.
    Fixed(FosGrouping),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CapacityError {
    #[error("requirements stay inadmissible even as the scale vanishes")]
    NoFeasibleScale,
    #[error("fixed users already exhaust the pilot budget: load {load} >= tau {tau}")]
    InfeasibleFixedPart { load: f64, tau: usize },
    #[error("grouping does not match the requirement set")]
    InvalidGrouping,
    #[error("invalid region axes: {reason}")]
    InvalidAxes { reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Upper bound on the admissible user count: `K ≤ √(τ·Σ(1 + 1/γ_i))`.
/// Returns whether the bound holds and the slack (right side minus K).
pub fn prop1_upper_bound_holds(req: &SinrRequirements) -> (bool, f64) {
    let sum: f64 = req.gammas().iter().map(|&g| 1.0 + 1.0 / g).sum();
    let rhs = (req.tau() as f64 * sum).sqrt();
    let slack = rhs - req.num_users() as f64;
    (slack >= 0.0, slack)
}

/// Sufficient (and for the GWBE construction, defining) admissibility
/// condition: total effective load at most τ. Returns the verdict and
/// the load itself.
pub fn gwbe_admissible(req: &SinrRequirements) -> (bool, f64) {
    let load = req.total_load();
    (load <= req.tau() as f64, load)
}

/// Maximum number of users admissible under an identical target γ:
/// `⌊(1 + 1/γ)·τ⌋`.
pub fn identical_gamma_capacity(gamma: f64, tau: usize) -> usize {
    debug_assert!(gamma > 0.0);
    let v = (1.0 + 1.0 / gamma) * tau as f64;
    // Nudge so boundaries that are exact in rational arithmetic survive
    // the floating-point detour (e.g. (1 + 1/3)·6 = 8).
    (v + 1e-9 * v.abs().max(1.0)).floor() as usize
}

/// WBE-scheme admissibility: `Σf ≤ min{τ, κ − (κ−1)·f_max}` with
/// `κ = (K−1)τ/(K−τ)`. With `K ≤ τ` the pilots are orthogonal and any
/// requirement set is admissible.
pub fn wbe_admissible(req: &SinrRequirements) -> bool {
    let k = req.num_users();
    let tau = req.tau();
    if k <= tau {
        return true;
    }
    let load = req.total_load();
    let f_max = req
        .gammas()
        .iter()
        .map(|&g| effective_load(g))
        .fold(f64::MIN, f64::max);
    let kappa = ((k - 1) * tau) as f64 / (k - tau) as f64;
    let rhs = (tau as f64).min(kappa - (kappa - 1.0) * f_max);
    load <= rhs
}

/// FOS-scheme admissibility for a specific grouping: every group's load
/// at most 1 and the total load at most τ.
pub fn fos_admissible(
    req: &SinrRequirements,
    grouping: &FosGrouping,
) -> Result<bool, CapacityError> {
    if grouping.num_users() != req.num_users() || grouping.tau() != req.tau() {
        return Err(CapacityError::InvalidGrouping);
    }
    let loads = req.loads();
    for group in grouping.groups() {
        let group_load: f64 = group.iter().map(|&u| loads[u]).sum();
        if group_load > 1.0 {
            return Ok(false);
        }
    }
    Ok(req.total_load() <= req.tau() as f64)
}

/// Round-robin grouping (user k joins group k mod τ), the implicit
/// assignment used by the region and sweep figures.
pub fn canonical_grouping(k: usize, tau: usize) -> FosGrouping {
    let mut groups = vec![Vec::new(); tau];
    for user in 0..k {
        groups[user % tau].push(user);
    }
    FosGrouping::new(groups, k).expect("round-robin grouping is balanced by construction")
}

/// Groupings with more users than this are optimized heuristically rather
/// than by exhaustive enumeration.
const EXHAUSTIVE_GROUPING_LIMIT: usize = 12;

/// Grouping minimizing the maximum group load under the mandated
/// cardinalities. Exhaustive for K ≤ 12, LPT with a swap-refinement pass
/// above; deterministic either way.
pub fn fos_optimal_grouping(req: &SinrRequirements) -> FosGrouping {
    let k = req.num_users();
    let tau = req.tau();
    let loads = req.loads();
    let groups = if k <= EXHAUSTIVE_GROUPING_LIMIT {
        exhaustive_grouping(&loads, tau)
    } else {
        lpt_grouping(&loads, tau)
    };
    FosGrouping::new(groups, k).expect("optimizer emits balanced cardinalities")
}

fn group_sizes(k: usize, tau: usize) -> Vec<usize> {
    let q = k / tau;
    let r = k % tau;
    (0..tau).map(|g| if g < r { q + 1 } else { q }).collect()
}

fn max_group_load(groups: &[Vec<usize>], loads: &[f64]) -> f64 {
    groups
        .iter()
        .map(|g| g.iter().map(|&u| loads[u]).sum::<f64>())
        .fold(f64::MIN, f64::max)
}

/// Enumerates every partition with the mandated cardinalities exactly once
/// (equal-size groups are only opened in index order) and keeps the first
/// partition achieving the minimal maximum load.
fn exhaustive_grouping(loads: &[f64], tau: usize) -> Vec<Vec<usize>> {
    let k = loads.len();
    let sizes = group_sizes(k, tau);
    let mut current: Vec<Vec<usize>> = vec![Vec::new(); tau];
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    let mut group_loads = vec![0.0f64; tau];

    fn recurse(
        user: usize,
        k: usize,
        sizes: &[usize],
        loads: &[f64],
        current: &mut Vec<Vec<usize>>,
        group_loads: &mut Vec<f64>,
        best: &mut Option<(f64, Vec<Vec<usize>>)>,
    ) {
        if user == k {
            let value = group_loads.iter().cloned().fold(f64::MIN, f64::max);
            if best.as_ref().map_or(true, |(b, _)| value < *b) {
                *best = Some((value, current.clone()));
            }
            return;
        }
        for g in 0..sizes.len() {
            if current[g].len() >= sizes[g] {
                continue;
            }
            // Open at most one empty group per size class.
            if current[g].is_empty()
                && (0..g).any(|h| sizes[h] == sizes[g] && current[h].is_empty())
            {
                continue;
            }
            current[g].push(user);
            group_loads[g] += loads[user];
            recurse(user + 1, k, sizes, loads, current, group_loads, best);
            group_loads[g] -= loads[user];
            current[g].pop();
        }
    }

    recurse(
        0,
        k,
        &sizes,
        loads,
        &mut current,
        &mut group_loads,
        &mut best,
    );
    best.expect("at least one balanced partition exists").1
}

/// Largest-load-first greedy into the least-loaded group with remaining
/// capacity, then pairwise swaps while they strictly reduce the load of
/// the fullest group involved.
fn lpt_grouping(loads: &[f64], tau: usize) -> Vec<Vec<usize>> {
    let k = loads.len();
    let sizes = group_sizes(k, tau);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| loads[b].partial_cmp(&loads[a]).unwrap().then(a.cmp(&b)));

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); tau];
    let mut group_loads = vec![0.0f64; tau];
    for &user in &order {
        let mut pick = None;
        for g in 0..tau {
            if groups[g].len() >= sizes[g] {
                continue;
            }
            match pick {
                None => pick = Some(g),
                Some(p) if group_loads[g] < group_loads[p] => pick = Some(g),
                _ => {}
            }
        }
        let g = pick.expect("capacities sum to K");
        groups[g].push(user);
        group_loads[g] += loads[user];
    }

    for _ in 0..1000 {
        let worst = (0..tau)
            .max_by(|&a, &b| group_loads[a].partial_cmp(&group_loads[b]).unwrap())
            .unwrap();
        let mut improved = false;
        'search: for other in 0..tau {
            if other == worst {
                continue;
            }
            for wi in 0..groups[worst].len() {
                for oi in 0..groups[other].len() {
                    let u = groups[worst][wi];
                    let v = groups[other][oi];
                    let new_worst = group_loads[worst] - loads[u] + loads[v];
                    let new_other = group_loads[other] - loads[v] + loads[u];
                    let before = group_loads[worst].max(group_loads[other]);
                    let after = new_worst.max(new_other);
                    if after < before - 1e-15 {
                        groups[worst][wi] = v;
                        groups[other][oi] = u;
                        group_loads[worst] = new_worst;
                        group_loads[other] = new_other;
                        improved = true;
                        break 'search;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    for g in groups.iter_mut() {
        g.sort_unstable();
    }
    groups
}

/// Evaluates the scheme's admissibility predicate for one requirement set.
pub fn scheme_admissible(
    req: &SinrRequirements,
    scheme: SchemeKind,
    fos: &FosMode,
) -> Result<bool, CapacityError> {
    match scheme {
        SchemeKind::Gwbe => Ok(gwbe_admissible(req).0),
        SchemeKind::Wbe => Ok(wbe_admissible(req)),
        SchemeKind::Fos => {
            let grouping = match fos {
                FosMode::Canonical => canonical_grouping(req.num_users(), req.tau()),
                FosMode::Optimal => fos_optimal_grouping(req),
                FosMode::Fixed(g) => g.clone(),
            };
            fos_admissible(req, &grouping)
        }
    }
}

const SCALE_FLOOR: f64 = 1e-9;
const SCALE_CEILING: f64 = 1e6;

/// Largest scale for which the scaled requirement pattern stays admissible
/// under the scheme, found by geometric bracketing plus bisection to the
/// given relative tolerance. Returns `+inf` if the pattern never becomes
/// inadmissible below the search ceiling.
pub fn achievable_sinr<F>(
    pattern: F,
    scheme: SchemeKind,
    tol: f64,
    fos: &FosMode,
) -> Result<f64, CapacityError>
where
    F: Fn(f64) -> SinrRequirements,
{
    let admissible = |x: f64| scheme_admissible(&pattern(x), scheme, fos);
    let mut lo = SCALE_FLOOR;
    if !admissible(lo)? {
        return Err(CapacityError::NoFeasibleScale);
    }
    let mut hi = lo;
    loop {
        if hi >= SCALE_CEILING {
            return Ok(f64::INFINITY);
        }
        hi = (hi * 2.0).min(SCALE_CEILING);
        if !admissible(hi)? {
            break;
        }
        lo = hi;
    }
    while hi - lo > tol * lo.max(tol) {
        let mid = 0.5 * (lo + hi);
        if admissible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Largest user count K for which the leveled pattern stays admissible;
/// ascending integer search over the level parameter.
pub fn max_admissible_users<F>(
    pattern: F,
    scheme: SchemeKind,
    fos: &FosMode,
) -> Result<usize, CapacityError>
where
    F: Fn(usize) -> SinrRequirements,
{
    let mut best = 0;
    for level in 1..=100_000 {
        let req = pattern(level);
        if scheme_admissible(&req, scheme, fos)? {
            best = req.num_users();
        } else {
            break;
        }
    }
    Ok(best)
}

/// One sampled boundary point: the grid coordinates of the leading free
/// axes and the maximal admissible value of the solved axis (0 when no
/// positive value is feasible, capped from above).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPoint {
    pub grid: Vec<f64>,
    pub height: f64,
}

/// Samples the upper boundary of a scheme's admissible region. The last
/// free axis is maximized for every grid point of the leading free axes;
/// all other users keep their template targets.
pub fn region_boundary(
    template: &SinrRequirements,
    free_axes: &[usize],
    scheme: SchemeKind,
    grids: &[Vec<f64>],
    cap: f64,
    fos_grouping: Option<&FosGrouping>,
) -> Result<Vec<RegionPoint>, CapacityError> {
    let k = template.num_users();
    let tau = template.tau();
    if free_axes.len() < 2 || free_axes.len() > 3 {
        return Err(CapacityError::InvalidAxes {
            reason: format!("need 2 or 3 free axes, got {}", free_axes.len()),
        });
    }
    if grids.len() + 1 != free_axes.len() {
        return Err(CapacityError::InvalidAxes {
            reason: format!(
                "expected {} grids for {} free axes",
                free_axes.len() - 1,
                free_axes.len()
            ),
        });
    }
    let mut seen = vec![false; k];
    for &axis in free_axes {
        if axis >= k {
            return Err(CapacityError::InvalidAxes {
                reason: format!("axis {axis} out of range for K={k}"),
            });
        }
        if seen[axis] {
            return Err(CapacityError::InvalidAxes {
                reason: format!("axis {axis} repeated"),
            });
        }
        seen[axis] = true;
    }
    if !(cap.is_finite() && cap > 0.0) {
        return Err(CapacityError::InvalidAxes {
            reason: format!("cap must be positive and finite, got {cap}"),
        });
    }
    for grid in grids {
        for &v in grid {
            if !(v.is_finite() && v > 0.0) {
                return Err(CapacityError::InvalidAxes {
                    reason: format!("grid value {v} must be positive and finite"),
                });
            }
        }
    }

    let fixed_load: f64 = template
        .gammas()
        .iter()
        .enumerate()
        .filter(|(i, _)| !seen[*i])
        .map(|(_, &g)| effective_load(g))
        .sum();
    if fixed_load >= tau as f64 {
        return Err(CapacityError::InfeasibleFixedPart {
            load: fixed_load,
            tau,
        });
    }

    let grouping = match scheme {
        SchemeKind::Fos => Some(match fos_grouping {
            Some(g) => {
                if g.num_users() != k || g.tau() != tau {
                    return Err(CapacityError::InvalidGrouping);
                }
                g.clone()
            }
            None => canonical_grouping(k, tau),
        }),
        _ => fos_grouping.map(|g| g.clone()),
    };

    // Row-major cartesian product of the leading-axis grids.
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for grid in grids {
        let mut next = Vec::with_capacity(points.len() * grid.len());
        for p in &points {
            for &v in grid {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }

    let solve_axis = *free_axes.last().unwrap();
    let results: Vec<RegionPoint> = points
        .into_par_iter()
        .map(|coords| {
            let mut gammas = template.gammas().to_vec();
            for (slot, &axis) in free_axes[..free_axes.len() - 1].iter().enumerate() {
                gammas[axis] = coords[slot];
            }
            let height = solve_boundary_height(
                &gammas,
                solve_axis,
                tau,
                scheme,
                cap,
                grouping.as_ref(),
            );
            RegionPoint {
                grid: coords,
                height,
            }
        })
        .collect();
    Ok(results)
}

/// Maximal admissible target on one axis given every other target. Closed
/// form where the binding constraint is linear in the axis load (GWBE,
/// FOS); bisection for WBE, whose max-term couples the constraint.
fn solve_boundary_height(
    gammas: &[f64],
    axis: usize,
    tau: usize,
    scheme: SchemeKind,
    cap: f64,
    grouping: Option<&FosGrouping>,
) -> f64 {
    let others_load: f64 = gammas
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != axis)
        .map(|(_, &g)| effective_load(g))
        .sum();
    let total_budget = tau as f64 - others_load;
    match scheme {
        SchemeKind::Gwbe => {
            if total_budget <= 0.0 {
                0.0
            } else {
                load_to_gamma(total_budget).min(cap)
            }
        }
        SchemeKind::Fos => {
            let grouping = grouping.expect("FOS boundary requires a grouping");
            let own_group = grouping.group_of(axis);
            for (g, group) in grouping.groups().iter().enumerate() {
                if g == own_group {
                    continue;
                }
                let load: f64 = group.iter().map(|&u| effective_load(gammas[u])).sum();
                if load > 1.0 {
                    return 0.0;
                }
            }
            let group_used: f64 = grouping.groups()[own_group]
                .iter()
                .filter(|&&u| u != axis)
                .map(|&u| effective_load(gammas[u]))
                .sum();
            let budget = (1.0 - group_used).min(total_budget);
            if budget <= 0.0 {
                0.0
            } else {
                load_to_gamma(budget).min(cap)
            }
        }
        SchemeKind::Wbe => {
            let admissible = |value: f64| {
                let mut probe = gammas.to_vec();
                probe[axis] = value;
                let req = SinrRequirements::new(probe, tau).expect("positive probe targets");
                wbe_admissible(&req)
            };
            let floor = 1e-12;
            if !admissible(floor) {
                return 0.0;
            }
            if admissible(cap) {
                return cap;
            }
            let (mut lo, mut hi) = (floor, cap);
            while hi - lo > 1e-10 * cap.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if admissible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    }
}

/// Residual report for a finished allocation against the null-space
/// validity condition and its claimed achieved SINRs.
#[derive(Debug, Clone)]
pub struct ValidityReport {
    /// `‖(T − Gᵀ∘G)·p‖_∞ / ‖p‖_∞` with `T = diag(1 + 1/γ̂_i)`.
    pub residual: f64,
    /// Asymptotic SINR minus claimed achieved SINR, per user.
    pub gaps: Vec<f64>,
    pub valid: bool,
}

pub fn verify_validity(allocation: &Allocation) -> ValidityReport {
    verify_validity_parts(
        &allocation.pilots,
        &allocation.powers,
        &allocation.achieved_gammas,
    )
}

/// Same report for loose parts, so perturbed or deliberately invalid
/// combinations can be examined too.
pub fn verify_validity_parts(
    pilots: &PilotMatrix,
    powers: &PowerAllocation,
    achieved_gammas: &[f64],
) -> ValidityReport {
    let k = powers.num_users();
    let gram = pilots.gram();
    let p = powers.powers();
    let mut residual: f64 = 0.0;
    let p_max = p.iter().cloned().fold(f64::MIN, f64::max);
    for i in 0..k {
        let t_ii = if achieved_gammas[i].is_infinite() {
            1.0
        } else {
            1.0 + 1.0 / achieved_gammas[i]
        };
        let mut row = t_ii * p[i];
        for j in 0..k {
            let rho = gram[(i, j)];
            row -= rho * rho * p[j];
        }
        residual = residual.max(row.abs());
    }
    residual /= p_max;
    let sinr = asymptotic_sinr_from_gram(gram, p);
    let gaps: Vec<f64> = sinr
        .iter()
        .zip(achieved_gammas)
        .map(|(&s, &g)| {
            if s.is_infinite() && g.is_infinite() {
                0.0
            } else {
                s - g
            }
        })
        .collect();
    let tol = DEFAULT_TOLERANCES.sinr_match;
    let valid = residual <= tol && gaps.iter().all(|&g| g >= -tol);
    ValidityReport {
        residual,
        gaps,
        valid,
    }
}
