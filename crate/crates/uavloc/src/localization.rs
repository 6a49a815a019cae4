//! Closed-form constrained least-squares (CLS) emitter estimation from one
//! frame of joint Doppler/ToA measurements.
//!
//! Pipeline: scale each Doppler sample by its ToA-implied range
//! (`f_bar_k = c * tau_k * f_k`), which makes the Doppler LS cost quadratic in
//! the emitter position. With one constant velocity per frame that quadratic
//! is rank-deficient and its minimizers form the line
//! `k1 * x + k2 * y = c11` ([`line_condition`]). Stacking the line on the
//! linearized ToA equations `B r = p` with `r = [x, y, x^2 + y^2]` gives the
//! augmented system `B+ r = p+` ([`assemble_cls`]), minimized subject to the
//! quadratic coupling `r_z = r_x^2 + r_y^2` via a Lagrange multiplier
//! ([`solve_cls`]).
//!
//! A straight UAV track makes the whole objective exactly symmetric under
//! reflection across the track (the ToA residuals are distances to on-track
//! points and the line condition's normal lies along the track), so for
//! collinear sample positions the estimate either comes as a mirror pair with
//! identical residual or sits on the track axis. [`solve_cls`] detects this,
//! solves the reduced two-unknown system in track-aligned coordinates and
//! reports the chosen root plus the mirror candidate in the diagnostics.
//! For non-collinear systems it root-finds the multiplier directly.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::measurement::{MeasurementFrame, SignalParams};

/// Velocities below this magnitude (m/s) carry no usable Doppler information.
const MIN_SPEED: f64 = 1e-12;

/// Relative threshold deciding whether the sample positions are collinear.
const COLLINEAR_TOL: f64 = 1e-9;

/// Relative tolerance on the constraint residual at an accepted multiplier.
const CONSTRAINT_TOL: f64 = 1e-9;

/// Range-scaled Doppler samples `f_bar_k = c * tau_k * f_k` (Hz * m).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeScaledDoppler {
    pub f_bar: Vec<f64>,
}

impl RangeScaledDoppler {
    pub fn compute(frame: &MeasurementFrame, params: &SignalParams) -> Self {
        let f_bar = frame
            .doppler
            .iter()
            .zip(&frame.toa)
            .map(|(f, tau)| params.c * tau * f)
            .collect();
        Self { f_bar }
    }
}

/// ToA-implied ranges `d_k = c * tau_k` in meters.
pub fn implied_ranges(frame: &MeasurementFrame, params: &SignalParams) -> Vec<f64> {
    frame.toa.iter().map(|tau| params.c * tau).collect()
}

/// The line of minimizers of the range-scaled Doppler cost:
/// `k1 * x + k2 * y = c11`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineCondition {
    pub k1: f64,
    pub k2: f64,
    pub c11: f64,
}

/// The augmented constrained LS system.
///
/// Rows `1..=K` of `b_plus` are `[-2 x_uk, -2 y_uk, +1]` with right-hand side
/// `p_k = d_k^2 - x_uk^2 - y_uk^2 - z_uk^2` (the height term keeps the system
/// exact for a ground emitter observed from altitude); the extra row is
/// `[k1, k2, 0]` with right-hand side `c11`. The quadratic coupling
/// `r_z = r_x^2 + r_y^2` is encoded as `r^T D r + 2 g^T r = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClsSystem {
    pub b_plus: DMatrix<f64>,
    pub p_plus: DVector<f64>,
    pub d_mat: Matrix3<f64>,
    pub g_vec: Vector3<f64>,
}

/// Which solution path produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateBranch {
    /// Constrained LS solution (constraint satisfied).
    Cls,
    /// Multiplier root-finding failed; unconstrained (lambda = 0) solution.
    UnconstrainedFallback,
    /// ToA-only system (either the comparison baseline or the fallback when
    /// the frame velocity is degenerate).
    ToaOnlyFallback,
}

/// Emitter estimate with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterEstimate {
    /// `[r_x (m), r_y (m), r_z (m^2)]` with `r_z = r_x^2 + r_y^2` on the CLS
    /// branch.
    pub r: Vector3<f64>,
    /// Lagrange multiplier of the returned solution.
    pub lambda: f64,
    /// `|B+ r - p+|^2` at the returned solution.
    pub residual: f64,
    /// `|r_z - r_x^2 - r_y^2|`.
    pub constraint_violation: f64,
    pub branch: EstimateBranch,
    /// Reflection of the estimate across the track line, when the geometry
    /// cannot distinguish the two (identical residual up to round-off).
    pub mirror: Option<Vector2<f64>>,
    /// Residual of the mirror candidate.
    pub mirror_residual: Option<f64>,
}

impl EmitterEstimate {
    /// Planar position estimate in meters.
    pub fn planar(&self) -> Vector2<f64> {
        Vector2::new(self.r.x, self.r.y)
    }
}

/// Options for assembling the augmented system.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClsOptions {
    /// Rescale the Doppler-derived row so its coefficient norm matches the
    /// mean ToA row norm. Off by default: the unweighted system is the
    /// reference formulation.
    pub normalize_doppler_row: bool,
}

/// The range-scaled Doppler LS cost at a candidate emitter position.
///
/// Quadratic and convex in the candidate; with one velocity per frame its
/// minimizer set is the [`line_condition`] line, which tests probe directly.
pub fn modified_ls_cost(
    candidate: Vector2<f64>,
    frame: &MeasurementFrame,
    params: &SignalParams,
) -> f64 {
    let gamma = params.gamma();
    let cand3 = Vector3::new(candidate.x, candidate.y, 0.0);
    let f_bar = RangeScaledDoppler::compute(frame, params).f_bar;
    frame
        .uav_states
        .iter()
        .zip(&f_bar)
        .map(|(state, fb)| {
            let term = fb - gamma * state.velocity.dot(&(state.position - cand3));
            term * term
        })
        .sum()
}

/// Normal matrix `A = [a1 | a2]` of the planar line system; its determinant
/// is zero to round-off whenever the frame velocity is constant.
pub fn line_normal_matrix(frame: &MeasurementFrame) -> Matrix2<f64> {
    let mut a1 = Vector2::zeros();
    let mut a2 = Vector2::zeros();
    for state in &frame.uav_states {
        let v = Vector2::new(state.velocity.x, state.velocity.y);
        a1 += state.velocity.x * v;
        a2 += state.velocity.y * v;
    }
    Matrix2::from_columns(&[a1, a2])
}

/// Derive the line of minimizers `k1 * x + k2 * y = c11` from one frame.
///
/// The two rows of the vector equation are proportional (constant velocity),
/// so the row scaled by the larger velocity component is used; with the
/// conventional along-x flight this is exactly the first row.
pub fn line_condition(frame: &MeasurementFrame, params: &SignalParams) -> Result<LineCondition> {
    let v = frame.velocity();
    let v_planar = Vector2::new(v.x, v.y);
    let speed = v_planar.norm();
    let gamma = params.gamma();
    if speed < MIN_SPEED || gamma <= 0.0 {
        // gamma == 0 blanks every Doppler sample, which degenerates the line
        // the same way a stationary UAV does.
        return Err(Error::DegenerateVelocity { speed });
    }

    let f_bar = RangeScaledDoppler::compute(frame, params).f_bar;
    let mut c_vec = Vector2::zeros();
    let mut vp_sum = Vector2::zeros();
    let mut v_sum = Vector2::zeros();
    for (state, fb) in frame.uav_states.iter().zip(&f_bar) {
        let vk = Vector2::new(state.velocity.x, state.velocity.y);
        c_vec += *fb * vk;
        vp_sum += state.velocity.dot(&state.position) * vk;
        v_sum += vk;
    }
    let c1 = -c_vec / gamma + vp_sum;

    let (scale, c11) = if v_planar.x.abs() >= v_planar.y.abs() {
        (v_planar.x, c1.x)
    } else {
        (v_planar.y, c1.y)
    };
    Ok(LineCondition {
        k1: scale * v_sum.x,
        k2: scale * v_sum.y,
        c11,
    })
}

/// ToA rows of the linearized system: `B` ((n)x3) and `p`.
fn build_toa_rows(frame: &MeasurementFrame, params: &SignalParams) -> (DMatrix<f64>, DVector<f64>) {
    let n = frame.len();
    let d = implied_ranges(frame, params);
    let b = DMatrix::from_fn(n, 3, |i, j| {
        let pos = frame.uav_states[i].position;
        match j {
            0 => -2.0 * pos.x,
            1 => -2.0 * pos.y,
            _ => 1.0,
        }
    });
    let p = DVector::from_fn(n, |i, _| {
        let pos = frame.uav_states[i].position;
        d[i] * d[i] - pos.x * pos.x - pos.y * pos.y - pos.z * pos.z
    });
    (b, p)
}

fn constraint_matrices() -> (Matrix3<f64>, Vector3<f64>) {
    (
        Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0),
        Vector3::new(0.0, 0.0, -0.5),
    )
}

/// Stack the ToA rows and the line-condition row into the augmented system.
pub fn assemble_cls(
    frame: &MeasurementFrame,
    line: &LineCondition,
    params: &SignalParams,
    opts: &ClsOptions,
) -> ClsSystem {
    let k_count = frame.len();
    let (b, p) = build_toa_rows(frame, params);

    let mut row_scale = 1.0;
    if opts.normalize_doppler_row {
        let mean_toa_norm = (0..k_count)
            .map(|i| b.row(i).norm())
            .sum::<f64>()
            / k_count as f64;
        let line_norm = (line.k1 * line.k1 + line.k2 * line.k2).sqrt();
        if line_norm > 0.0 {
            row_scale = mean_toa_norm / line_norm;
        }
    }

    let mut b_plus = DMatrix::zeros(k_count + 1, 3);
    b_plus.view_mut((0, 0), (k_count, 3)).copy_from(&b);
    b_plus[(k_count, 0)] = row_scale * line.k1;
    b_plus[(k_count, 1)] = row_scale * line.k2;
    b_plus[(k_count, 2)] = 0.0;

    let mut p_plus = DVector::zeros(k_count + 1);
    p_plus.rows_mut(0, k_count).copy_from(&p);
    p_plus[k_count] = row_scale * line.c11;

    let (d_mat, g_vec) = constraint_matrices();
    ClsSystem {
        b_plus,
        p_plus,
        d_mat,
        g_vec,
    }
}

fn residual_norm2(sys: &ClsSystem, r: &Vector3<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..sys.b_plus.nrows() {
        let row = sys.b_plus.row(i);
        let e = row[0] * r.x + row[1] * r.y + row[2] * r.z - sys.p_plus[i];
        acc += e * e;
    }
    acc
}

fn constraint_violation(r: &Vector3<f64>) -> f64 {
    (r.z - r.x * r.x - r.y * r.y).abs()
}

/// Sample positions implied by the ToA rows (`x = -b0/2`, `y = -b1/2`).
/// Rows with a zero third coefficient are line rows, not ToA rows.
fn split_rows(sys: &ClsSystem) -> (Vec<Vector2<f64>>, Vec<f64>, Vec<(Vector2<f64>, f64)>) {
    let mut positions = Vec::new();
    let mut toa_rhs = Vec::new();
    let mut line_rows = Vec::new();
    for i in 0..sys.b_plus.nrows() {
        let row = sys.b_plus.row(i);
        if row[2].abs() > 0.5 {
            positions.push(Vector2::new(-0.5 * row[0], -0.5 * row[1]));
            toa_rhs.push(sys.p_plus[i]);
        } else {
            line_rows.push((Vector2::new(row[0], row[1]), sys.p_plus[i]));
        }
    }
    (positions, toa_rhs, line_rows)
}

struct TrackFit {
    centroid: Vector2<f64>,
    tangent: Vector2<f64>,
    collinear: bool,
}

fn fit_track(positions: &[Vector2<f64>]) -> TrackFit {
    let n = positions.len() as f64;
    let centroid = positions.iter().sum::<Vector2<f64>>() / n;
    let mut cov = Matrix2::zeros();
    for q in positions {
        let d = q - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = nalgebra::SymmetricEigen::new(cov);
    let (i_max, i_min) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let spread2 = eig.eigenvalues[i_max].max(0.0);
    let off2 = eig.eigenvalues[i_min].max(0.0);
    let mut tangent = eig.eigenvectors.column(i_max).into_owned();
    // Canonical orientation: along the data ordering, so the reported mirror
    // side does not depend on eigensolver sign conventions.
    let dir = positions[positions.len() - 1] - positions[0];
    let along = tangent.dot(&dir);
    if along < 0.0 || (along == 0.0 && (tangent.x < 0.0 || (tangent.x == 0.0 && tangent.y < 0.0))) {
        tangent = -tangent;
    }
    let scale = spread2.sqrt().max(1e-6);
    TrackFit {
        centroid,
        tangent,
        collinear: off2.sqrt() <= COLLINEAR_TOL * scale,
    }
}

/// Solve `(M + lambda D) s = q - lambda g` for a symmetric 3x3 system.
/// Returns `None` when the shifted matrix is numerically singular.
fn shifted_solve3(
    m: &Matrix3<f64>,
    q: &Vector3<f64>,
    d: &Matrix3<f64>,
    g: &Vector3<f64>,
    lambda: f64,
) -> Option<Vector3<f64>> {
    let f = m + lambda * d;
    let scale = f.norm();
    if scale == 0.0 {
        return None;
    }
    let det = f.determinant();
    if det.abs() <= 1e-14 * scale.powi(3) {
        return None;
    }
    f.lu().solve(&(q - lambda * g))
}

fn phi3(r: &Vector3<f64>) -> f64 {
    r.x * r.x + r.y * r.y - r.z
}

/// Generic multiplier root-finding on the full 3-unknown system. Used when
/// the sample positions are not collinear (so no exact mirror symmetry
/// exists and the shifted normal matrix is invertible away from poles).
fn solve_generic(sys: &ClsSystem, branch: EstimateBranch) -> Result<EmitterEstimate> {
    let m = (sys.b_plus.transpose() * &sys.b_plus).fixed_view::<3, 3>(0, 0).into_owned();
    let q3 = (sys.b_plus.transpose() * &sys.p_plus).fixed_view::<3, 1>(0, 0).into_owned();
    let d = sys.d_mat;
    let g = sys.g_vec;

    let eig = nalgebra::SymmetricEigen::new(m);
    let mut sigma_max: f64 = 0.0;
    let mut sigma_min = f64::INFINITY;
    for &ev in eig.eigenvalues.iter() {
        sigma_max = sigma_max.max(ev.abs());
        sigma_min = sigma_min.min(ev.abs());
    }
    if sigma_max == 0.0 {
        return Err(Error::SingularSystem("zero normal matrix".into()));
    }
    let beta = sigma_min.max(1e-8 * sigma_max);

    let eval = |lambda: f64| -> Option<(f64, Vector3<f64>)> {
        shifted_solve3(&m, &q3, &d, &g, lambda).map(|r| (phi3(&r), r))
    };

    // Scan an expanding symmetric grid for sign changes of the constraint
    // residual, then bisect each bracket. Bisection runs that converge onto a
    // pole of phi (where the shifted matrix is singular) are rejected by the
    // tolerance check below.
    let mut grid = vec![0.0f64];
    for j in 0..=60 {
        let v = beta * (2.0f64).powi(j);
        grid.push(v);
        grid.push(-v);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let evals: Vec<(f64, Option<(f64, Vector3<f64>)>)> =
        grid.iter().map(|&l| (l, eval(l))).collect();
    if evals.iter().all(|(_, e)| e.is_none()) {
        return Err(Error::SingularSystem(
            "shifted normal matrix singular across the entire multiplier bracket".into(),
        ));
    }

    let tol_of = |r: &Vector3<f64>| CONSTRAINT_TOL * (1.0 + r.x * r.x + r.y * r.y + r.z.abs());

    let mut roots: Vec<(f64, Vector3<f64>)> = Vec::new();
    let mut push_root = |lambda: f64, r: Vector3<f64>, roots: &mut Vec<(f64, Vector3<f64>)>| {
        if phi3(&r).abs() <= tol_of(&r) {
            roots.push((lambda, r));
        }
    };

    for window in evals.windows(2) {
        let (la, ea) = (&window[0].0, &window[0].1);
        let (lb, eb) = (&window[1].0, &window[1].1);
        let (Some((pa, ra)), Some((pb, rb))) = (ea.as_ref(), eb.as_ref()) else {
            continue;
        };
        if pa.abs() <= tol_of(ra) {
            push_root(*la, *ra, &mut roots);
            continue;
        }
        if pb.abs() <= tol_of(rb) {
            continue; // picked up as the left endpoint of the next window
        }
        if pa.signum() == pb.signum() {
            continue;
        }
        let (mut lo, mut hi, mut phi_lo) = (*la, *lb, *pa);
        let mut last = None;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            match eval(mid) {
                Some((pm, rm)) => {
                    last = Some((mid, rm, pm));
                    if pm == 0.0 {
                        break;
                    }
                    if pm.signum() == phi_lo.signum() {
                        lo = mid;
                        phi_lo = pm;
                    } else {
                        hi = mid;
                    }
                }
                None => {
                    // Singular midpoint: nudge the bracket from the left.
                    lo = 0.5 * (lo + mid);
                }
            }
            if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs() + hi.abs()) {
                break;
            }
        }
        if let Some((lr, rr, _)) = last {
            push_root(lr, rr, &mut roots);
        }
    }

    // Also take the right endpoint of the last window if it is itself a root.
    if let Some((lb, Some((pb, rb)))) = evals.last().map(|(l, e)| (*l, e.clone())) {
        if pb.abs() <= tol_of(&rb) {
            roots.push((lb, rb));
        }
    }

    let best = roots
        .into_iter()
        .map(|(lambda, r)| {
            let res = residual_norm2(sys, &r);
            (lambda, r, res)
        })
        .min_by(|a, b| {
            a.2.partial_cmp(&b.2)
                .unwrap()
                .then(a.0.abs().partial_cmp(&b.0.abs()).unwrap())
        });

    match best {
        Some((lambda, r, res)) => Ok(EmitterEstimate {
            r,
            lambda,
            residual: res,
            constraint_violation: constraint_violation(&r),
            branch,
            mirror: None,
            mirror_residual: None,
        }),
        None => Err(Error::NoConstraintRoot),
    }
}

/// Constrained solve of the reduced track-frame system
/// `rows: [-2 x'_i, 1] . [x', zeta] = p'_i` subject to `zeta = x'^2`,
/// used when the unconstrained reduced solution has `zeta < x'^2` (the
/// off-track coordinate collapses to zero).
fn solve_reduced_binding(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<(Vector2<f64>, f64)> {
    let m = (a.transpose() * a).fixed_view::<2, 2>(0, 0).into_owned();
    let q = (a.transpose() * rhs).fixed_view::<2, 1>(0, 0).into_owned();
    let d = Matrix2::new(1.0, 0.0, 0.0, 0.0);
    let g = Vector2::new(0.0, -0.5);

    let eval = |lambda: f64| -> Option<(f64, Vector2<f64>)> {
        let f = m + lambda * d;
        let scale = f.norm();
        if scale == 0.0 {
            return None;
        }
        if f.determinant().abs() <= 1e-14 * scale * scale {
            return None;
        }
        f.lu().solve(&(q - lambda * g)).map(|s| (s.x * s.x - s.y, s))
    };

    let (phi0, s0) = eval(0.0).ok_or_else(|| {
        Error::SingularSystem("reduced normal matrix singular at lambda = 0".into())
    })?;
    let tol = |s: &Vector2<f64>| CONSTRAINT_TOL * (1.0 + s.x * s.x + s.y.abs());
    if phi0.abs() <= tol(&s0) {
        return Ok((s0, 0.0));
    }
    // phi(0) > 0 in the binding case; phi decreases toward -inf as lambda
    // grows (the shifted matrix stays positive definite for lambda >= 0).
    let m_eig = nalgebra::SymmetricEigen::new(m);
    let beta = m_eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v.abs()))
        .max(1e-8 * m_eig.eigenvalues.amax());
    let mut hi = beta;
    let mut expansions = 0;
    let phi_hi = loop {
        match eval(hi) {
            Some((p, _)) if p.signum() != phi0.signum() || p == 0.0 => break p,
            _ => {
                hi *= 2.0;
                expansions += 1;
                if expansions > 200 {
                    return Err(Error::NoConstraintRoot);
                }
            }
        }
    };
    let _ = phi_hi;
    let (mut lo, mut phi_lo) = (0.0, phi0);
    let mut best = None;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        match eval(mid) {
            Some((pm, sm)) => {
                best = Some((sm, mid, pm));
                if pm == 0.0 {
                    break;
                }
                if pm.signum() == phi_lo.signum() {
                    lo = mid;
                    phi_lo = pm;
                } else {
                    hi = mid;
                }
            }
            None => {
                lo = 0.5 * (lo + mid);
            }
        }
        if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
    }
    match best {
        Some((s, lambda, phi)) if phi.abs() <= tol(&s) => Ok((s, lambda)),
        _ => Err(Error::NoConstraintRoot),
    }
}

/// Solve for collinear sample positions via the track-aligned reduction.
fn solve_collinear(
    sys: &ClsSystem,
    positions: &[Vector2<f64>],
    toa_rhs: &[f64],
    line_rows: &[(Vector2<f64>, f64)],
    track: &TrackFit,
    branch: EstimateBranch,
) -> Result<EmitterEstimate> {
    let tangent = track.tangent;
    let normal = Vector2::new(-tangent.y, tangent.x);
    let centroid = track.centroid;

    let n_rows = positions.len() + line_rows.len();
    let mut a = DMatrix::zeros(n_rows, 2);
    let mut rhs = DVector::zeros(n_rows);
    for (i, (q, p)) in positions.iter().zip(toa_rhs).enumerate() {
        let rel = q - centroid;
        let x_t = tangent.dot(&rel);
        let y_t = normal.dot(&rel); // ~0 by collinearity
        a[(i, 0)] = -2.0 * x_t;
        a[(i, 1)] = 1.0;
        rhs[i] = p + q.norm_squared() - x_t * x_t - y_t * y_t;
    }
    for (j, (k, c)) in line_rows.iter().enumerate() {
        let i = positions.len() + j;
        let k_t = tangent.dot(k);
        let k_n = normal.dot(k);
        let k_norm = k.norm();
        if k_norm > 0.0 && k_n.abs() > 1e-6 * k_norm {
            // The line row is not parallel to the track; this cannot come
            // from a constant-velocity frame, so fall back to the generic
            // 3-unknown path.
            return solve_generic(sys, branch);
        }
        a[(i, 0)] = k_t;
        a[(i, 1)] = 0.0;
        rhs[i] = c - k.dot(&centroid);
    }

    let svd = nalgebra::SVD::new(a.clone(), true, true);
    let sv = &svd.singular_values;
    let sv_max = sv.amax();
    if sv_max == 0.0 || sv.min() <= 1e-10 * sv_max {
        return Err(Error::SingularSystem(
            "reduced track-frame system is rank deficient".into(),
        ));
    }
    let sol = svd
        .solve(&rhs, 1e-12 * sv_max)
        .map_err(|e| Error::SingularSystem(e.to_string()))?;
    let (x_t, zeta) = (sol[0], sol[1]);

    let disc = zeta - x_t * x_t;
    let (x_final, y_off, lambda) = if disc >= 0.0 {
        // Mirror pair: the off-track coordinate is determined only up to
        // sign; the multiplier of both constrained minimizers is exactly 0.
        (x_t, disc.sqrt(), 0.0)
    } else {
        let (s, lambda) = solve_reduced_binding(&a, &rhs)?;
        (s.x, 0.0, lambda)
    };

    let primary2 = centroid + x_final * tangent + y_off * normal;
    let mirror2 = centroid + x_final * tangent - y_off * normal;
    let primary = Vector3::new(primary2.x, primary2.y, primary2.norm_squared());
    let mirror = Vector3::new(mirror2.x, mirror2.y, mirror2.norm_squared());

    let residual = residual_norm2(sys, &primary);
    let mirror_residual = residual_norm2(sys, &mirror);

    Ok(EmitterEstimate {
        r: primary,
        lambda,
        residual,
        constraint_violation: constraint_violation(&primary),
        branch,
        mirror: Some(mirror2),
        mirror_residual: Some(mirror_residual),
    })
}

fn solve_system(sys: &ClsSystem, branch: EstimateBranch) -> Result<EmitterEstimate> {
    let (positions, toa_rhs, line_rows) = split_rows(sys);
    if positions.len() < 3 {
        return Err(Error::InsufficientMeasurements {
            required: 3,
            provided: positions.len(),
        });
    }
    let track = fit_track(&positions);
    if track.collinear {
        solve_collinear(sys, &positions, &toa_rhs, &line_rows, &track, branch)
    } else {
        solve_generic(sys, branch)
    }
}

/// Closed-form constrained LS solve of the augmented system.
///
/// Returns the estimate whose constraint residual is zero (to round-off on
/// the collinear path, to the multiplier tolerance otherwise). When the data
/// cannot distinguish the estimate from its reflection across the UAV track
/// the mirror candidate and its residual are reported in the diagnostics.
pub fn solve_cls(sys: &ClsSystem) -> Result<EmitterEstimate> {
    solve_system(sys, EstimateBranch::Cls)
}

/// Unconstrained (lambda = 0) solution of the augmented system; the fallback
/// when no multiplier root exists.
pub fn unconstrained_estimate(sys: &ClsSystem) -> Result<EmitterEstimate> {
    let svd = nalgebra::SVD::new(sys.b_plus.clone(), true, true);
    let sv_max = svd.singular_values.amax();
    if sv_max == 0.0 || svd.singular_values.min() <= 1e-12 * sv_max {
        return Err(Error::SingularSystem("unconstrained system rank deficient".into()));
    }
    let sol = svd
        .solve(&sys.p_plus, 1e-14 * sv_max)
        .map_err(|e| Error::SingularSystem(e.to_string()))?;
    let r = Vector3::new(sol[0], sol[1], sol[2]);
    Ok(EmitterEstimate {
        r,
        lambda: 0.0,
        residual: residual_norm2(sys, &r),
        constraint_violation: constraint_violation(&r),
        branch: EstimateBranch::UnconstrainedFallback,
        mirror: None,
        mirror_residual: None,
    })
}

/// Constrained LS estimate from the ToA rows alone (no Doppler row).
///
/// This is both the comparison baseline and the fallback when the frame
/// velocity is degenerate.
pub fn toa_only_estimate(frame: &MeasurementFrame, params: &SignalParams) -> Result<EmitterEstimate> {
    if frame.len() < 3 {
        return Err(Error::InsufficientMeasurements {
            required: 3,
            provided: frame.len(),
        });
    }
    let (b, p) = build_toa_rows(frame, params);
    let (d_mat, g_vec) = constraint_matrices();
    let sys = ClsSystem {
        b_plus: b,
        p_plus: p,
        d_mat,
        g_vec,
    };
    solve_system(&sys, EstimateBranch::ToaOnlyFallback)
}
