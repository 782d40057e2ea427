//! Periodic orbits: search, refinement, classification, continuation.
//!
//! Cycles are refined with Newton's method on the full-cycle system
//! `F_j(x) = G_w(x_j) - x_{j+1 mod q}` rather than on `G_w^q`; this keeps the
//! conditioning uniform along the orbit and its Jacobian is singular exactly
//! where the multiplier equals 1.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::Family;
use crate::jet::Jet2;
use crate::util::{fit_line, gcd, scale_of};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default tolerance for multiplier classification.
pub const CLASS_TOL: f64 = 1e-8;
/// Largest parabolic rotation denominator considered before reporting an
/// irrational neutral multiplier.
pub const P_MAX: u32 = 64;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Classification {
    Superattracting,
    AttractingHyperbolic,
    Parabolic { l: u32, p: u32 },
    Repelling,
    NeutralIrrational,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cycle {
    #[serde(skip)]
    pub w: Complex64,
    pub period: usize,
    #[serde(skip)]
    pub points: Vec<Complex64>,
    #[serde(skip)]
    pub multiplier: Complex64,
    pub classification: Classification,
    pub residual: f64,
}

impl Cycle {
    pub fn scale(&self) -> f64 {
        scale_of(&self.points)
    }

    pub fn is_parabolic(&self) -> bool {
        matches!(self.classification, Classification::Parabolic { .. })
    }

    /// Distance from `z` to the nearest cycle point, with its index.
    pub fn nearest_point(&self, z: Complex64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, &a) in self.points.iter().enumerate() {
            let d = (z - a).norm();
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

/// Classify a multiplier: superattracting, hyperbolic, parabolic `l/p`
/// (smallest `p <= P_MAX` with `|kappa^p - 1| <= p tol`), repelling, or
/// neutral irrational.
pub fn classify(kappa: Complex64, tol: f64) -> Classification {
    let m = kappa.norm();
    if m < tol {
        return Classification::Superattracting;
    }
    if m < 1.0 - tol {
        return Classification::AttractingHyperbolic;
    }
    if m > 1.0 + tol {
        return Classification::Repelling;
    }
    let mut power = ONE;
    for p in 1..=P_MAX {
        power *= kappa;
        if (power - ONE).norm() <= p as f64 * tol {
            let raw = (p as f64 * kappa.arg() / std::f64::consts::TAU).round() as i64;
            let l = raw.rem_euclid(p as i64) as u64;
            let g = gcd(l, p as u64).max(1);
            return Classification::Parabolic {
                l: (l / g) as u32,
                p: (p as u64 / g) as u32,
            };
        }
    }
    Classification::NeutralIrrational
}

fn build_cycle(fam: &Family, w: Complex64, points: Vec<Complex64>) -> Result<Cycle> {
    let q = points.len();
    let mut multiplier = ONE;
    let mut residual = 0.0_f64;
    for j in 0..q {
        let jet = fam.eval_jet(w, points[j], 1, 0)?;
        multiplier *= jet.dz(1);
        residual = residual.max((jet.value() - points[(j + 1) % q]).norm());
    }
    Ok(Cycle {
        w,
        period: q,
        classification: classify(multiplier, CLASS_TOL),
        multiplier,
        residual,
        points,
    })
}

/// Newton refinement of a period-`q` cycle of `G_w` from a seed orbit.
pub fn find_cycle(fam: &Family, w: Complex64, q: usize, seed: &[Complex64]) -> Result<Cycle> {
    if seed.len() != q || q == 0 {
        return Err(Error::Config(format!(
            "seed length {} does not match period {q}",
            seed.len()
        )));
    }
    let mut x: Vec<Complex64> = seed.to_vec();
    for _iter in 0..NEWTON_MAX_ITERS {
        let mut f = DVector::from_element(q, ZERO);
        let mut jac = DMatrix::from_element(q, q, ZERO);
        let mut residual = 0.0_f64;
        for j in 0..q {
            let jet = fam.eval_jet(w, x[j], 1, 0)?;
            f[j] = jet.value() - x[(j + 1) % q];
            residual = residual.max(f[j].norm());
            jac[(j, j)] = jet.dz(1);
            jac[(j, (j + 1) % q)] -= ONE;
        }
        let scale = scale_of(&x);
        if residual < NEWTON_TOL * scale {
            return build_cycle(fam, w, x);
        }
        let delta = jac
            .lu()
            .solve(&f)
            .ok_or(Error::SingularJacobian)?;
        for j in 0..q {
            x[j] -= delta[j];
            if !x[j].re.is_finite() || !x[j].im.is_finite() {
                return Err(Error::NoConvergence {
                    op: "find_cycle",
                    residual,
                    iters: _iter + 1,
                });
            }
        }
    }
    // Parabolic roots converge linearly; accept if the final residual is good.
    let mut residual = 0.0_f64;
    for j in 0..q {
        let v = fam.eval(w, x[j])?;
        residual = residual.max((v - x[(j + 1) % q]).norm());
    }
    if residual < NEWTON_TOL * scale_of(&x) {
        return build_cycle(fam, w, x);
    }
    Err(Error::NoConvergence {
        op: "find_cycle",
        residual,
        iters: NEWTON_MAX_ITERS,
    })
}

/// Newton on the augmented system `{cycle equations, Dg^q(x_0) = target}` in
/// the unknowns `(w, x_0, ..., x_{q-1})`. Locates the parameter at which the
/// cycle carries the prescribed multiplier (typically one of the roots of
/// unity at a bifurcation).
pub fn find_parabolic_pair(
    fam: &Family,
    q: usize,
    seed_w: Complex64,
    seed_points: &[Complex64],
    target: Complex64,
) -> Result<(Complex64, Cycle)> {
    if seed_points.len() != q || q == 0 {
        return Err(Error::Config(format!(
            "seed length {} does not match period {q}",
            seed_points.len()
        )));
    }
    let n = q + 1;
    let mut w = seed_w;
    let mut x: Vec<Complex64> = seed_points.to_vec();
    for iter in 0..80 {
        let mut f = DVector::from_element(n, ZERO);
        let mut jac = DMatrix::from_element(n, n, ZERO);
        let mut dzs = vec![ZERO; q];
        let mut dzzs = vec![ZERO; q];
        let mut dzws = vec![ZERO; q];
        let mut residual = 0.0_f64;
        for j in 0..q {
            let jet = fam.eval_jet(w, x[j], 2, 1)?;
            f[j] = jet.value() - x[(j + 1) % q];
            residual = residual.max(f[j].norm());
            dzs[j] = jet.dz(1);
            dzzs[j] = jet.dz(2);
            dzws[j] = jet.dzw();
            jac[(j, 1 + j)] = dzs[j];
            jac[(j, 1 + (j + 1) % q)] -= ONE;
            jac[(j, 0)] = jet.dw();
        }
        // Multiplier row. Products excluding one factor come from
        // prefix/suffix products so vanishing derivatives stay harmless.
        let mut prefix = vec![ONE; q + 1];
        for j in 0..q {
            prefix[j + 1] = prefix[j] * dzs[j];
        }
        let mut suffix = vec![ONE; q + 1];
        for j in (0..q).rev() {
            suffix[j] = suffix[j + 1] * dzs[j];
        }
        let kappa = prefix[q];
        f[q] = kappa - target;
        residual = residual.max(f[q].norm() * 0.1);
        let mut dk_dw = ZERO;
        for j in 0..q {
            let excl = prefix[j] * suffix[j + 1];
            jac[(q, 1 + j)] = dzzs[j] * excl;
            dk_dw += dzws[j] * excl;
        }
        jac[(q, 0)] = dk_dw;

        let scale = scale_of(&x).max(w.norm());
        if residual < NEWTON_TOL * scale {
            let cycle = build_cycle(fam, w, x)?;
            return Ok((w, cycle));
        }
        let delta = match jac.clone().lu().solve(&f) {
            Some(d) => d,
            None => return Err(Error::DegenerateJacobian),
        };
        w -= delta[0];
        for j in 0..q {
            x[j] -= delta[1 + j];
        }
        if !w.re.is_finite() || x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NoConvergence {
                op: "find_parabolic_pair",
                residual,
                iters: iter + 1,
            });
        }
    }
    Err(Error::NoConvergence {
        op: "find_parabolic_pair",
        residual: f64::NAN,
        iters: 80,
    })
}

/// Jet of `z -> G_w^steps(z)` at `z0`, truncated to orders `(kz, kw)`.
/// The parameter deviation is shared by every step, so the `dw` column of
/// the result is the transversality functional along the orbit segment.
pub fn iterate_jet(
    fam: &Family,
    w: Complex64,
    z0: Complex64,
    steps: usize,
    kz: usize,
    kw: usize,
) -> Result<Jet2> {
    let mut jet = Jet2::variable(z0, kz, kw);
    for _ in 0..steps {
        let base = jet.value();
        let g = fam.eval_jet(w, base, kz, kw)?;
        jet = g.compose_z(&jet.deviation());
    }
    Ok(jet)
}

/// Taylor expansion of the return map `G_w^q` at the cycle's base point.
pub fn return_map_jet(fam: &Family, cyc: &Cycle, kz: usize) -> Result<Jet2> {
    iterate_jet(fam, cyc.w, cyc.points[0], cyc.period, kz, 0)
}

/// Mixed-order variant carrying parameter derivatives.
pub fn return_map_jet_mixed(fam: &Family, cyc: &Cycle, kz: usize, kw: usize) -> Result<Jet2> {
    iterate_jet(fam, cyc.w, cyc.points[0], cyc.period, kz, kw)
}

#[derive(Debug, Clone, Serialize)]
pub enum RateEstimate {
    /// Distances shrink like `ratio^n`; for hyperbolic cycles the ratio
    /// approaches `|kappa|`.
    Geometric { ratio: f64 },
    /// Distances shrink like `C n^exponent`; parabolic convergence gives
    /// exponent close to `-1/p`.
    Polynomial { exponent: f64 },
    Unresolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    /// Index of the cycle point that attracts the marked value.
    pub attracted_to: usize,
    /// Total map iterations spent before the distance threshold was met.
    pub iterations: usize,
    pub final_distance: f64,
    pub rate: RateEstimate,
}

/// Iterate the marked value and detect convergence to the cycle: the
/// distance of `c_{nq+1}` to its nearest cycle point must fall below
/// `conv_tol` within `n_max` iterations.
pub fn basin_check(
    fam: &Family,
    w: Complex64,
    cyc: &Cycle,
    n_max: usize,
    conv_tol: f64,
) -> Result<ConvergenceReport> {
    let q = cyc.period;
    let mut z = fam.marked_value(w).map_err(|_| Error::NotAttracted { budget: n_max })?;
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut next_checkpoint = 1.0_f64;
    let mut steps = 0usize;
    let mut block = 0usize;
    loop {
        let (idx, dist) = cyc.nearest_point(z);
        if block as f64 >= next_checkpoint {
            history.push((block as f64, dist));
            next_checkpoint = (next_checkpoint * 1.05).max(next_checkpoint + 1.0);
        }
        if dist < conv_tol {
            return Ok(ConvergenceReport {
                attracted_to: idx,
                iterations: steps,
                final_distance: dist,
                rate: estimate_rate(cyc, &history),
            });
        }
        if steps >= n_max {
            return Err(Error::NotAttracted { budget: n_max });
        }
        for _ in 0..q {
            z = match fam.step(w, z) {
                Ok(v) => v,
                Err(_) => return Err(Error::NotAttracted { budget: n_max }),
            };
            steps += 1;
        }
        block += 1;
    }
}

fn estimate_rate(cyc: &Cycle, history: &[(f64, f64)]) -> RateEstimate {
    let usable: Vec<&(f64, f64)> = history.iter().filter(|(_, d)| *d > 0.0).collect();
    if usable.len() < 4 {
        return RateEstimate::Unresolved;
    }
    match cyc.classification {
        Classification::AttractingHyperbolic | Classification::Superattracting => {
            let tail = &usable[usable.len().saturating_sub(8)..];
            let (k0, d0) = **tail.first().unwrap();
            let (k1, d1) = **tail.last().unwrap();
            if k1 > k0 && d0 > 0.0 {
                RateEstimate::Geometric {
                    ratio: (d1 / d0).powf(1.0 / (k1 - k0)),
                }
            } else {
                RateEstimate::Unresolved
            }
        }
        Classification::Parabolic { .. } => {
            // Log-log fit over the second half of the recorded decay.
            let half = usable.len() / 2;
            let xs: Vec<f64> = usable[half..].iter().map(|(k, _)| k.ln()).collect();
            let ys: Vec<f64> = usable[half..].iter().map(|(_, d)| d.ln()).collect();
            let (slope, _, _) = fit_line(&xs, &ys);
            RateEstimate::Polynomial { exponent: slope }
        }
        _ => RateEstimate::Unresolved,
    }
}

/// Track a cycle along an explicit parameter path by re-running Newton at
/// each parameter, seeding from the previous solution.
pub fn track_cycle(fam: &Family, start: &Cycle, path: &[Complex64]) -> Result<Vec<Cycle>> {
    let mut out = Vec::with_capacity(path.len());
    let mut seed = start.points.clone();
    for &w in path {
        let cyc = find_cycle(fam, w, start.period, &seed)?;
        seed = cyc.points.clone();
        out.push(cyc);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Real continuation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct StepPolicy {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// |kappa - 1| window inside which stepping switches to arclength
    /// parametrization of (x, t).
    pub fold_window: f64,
    pub max_samples: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            initial_step: 1e-2,
            min_step: 1e-10,
            max_step: 5e-2,
            fold_window: 5e-2,
            max_samples: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchStatus {
    ReachedEndpoint,
    NewtonFailure,
    LeftDomain,
}

#[derive(Debug, Clone)]
pub struct CycleBranch {
    pub period: usize,
    pub samples: Vec<(f64, Cycle)>,
    pub status: BranchStatus,
}

impl CycleBranch {
    pub fn last_t(&self) -> f64 {
        self.samples.last().map(|(t, _)| *t).unwrap_or(f64::NAN)
    }

    /// Whether the parameter direction reversed along the branch (a fold was
    /// rounded by the arclength stepper).
    pub fn turned(&self) -> bool {
        let ts: Vec<f64> = self.samples.iter().map(|(t, _)| *t).collect();
        let mut seen_up = false;
        let mut seen_down = false;
        for pair in ts.windows(2) {
            if pair[1] > pair[0] + 1e-14 {
                seen_up = true;
            }
            if pair[1] < pair[0] - 1e-14 {
                seen_down = true;
            }
        }
        seen_up && seen_down
    }
}

struct RealCycleSystem<'a> {
    fam: &'a Family,
    q: usize,
}

impl RealCycleSystem<'_> {
    fn residual(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        let q = self.q;
        let w = Complex64::new(t, 0.0);
        let mut f = DVector::zeros(q);
        for j in 0..q {
            let v = self.fam.eval(w, Complex64::new(x[j], 0.0))?;
            f[j] = v.re - x[(j + 1) % q];
        }
        Ok(f)
    }

    fn jacobians(&self, t: f64, x: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let q = self.q;
        let w = Complex64::new(t, 0.0);
        let mut jx = DMatrix::zeros(q, q);
        let mut jt = DVector::zeros(q);
        for j in 0..q {
            let jet = self.fam.eval_jet(w, Complex64::new(x[j], 0.0), 1, 1)?;
            jx[(j, j)] = jet.dz(1).re;
            jx[(j, (j + 1) % q)] -= 1.0;
            jt[j] = jet.dw().re;
        }
        Ok((jx, jt))
    }

    fn newton_fixed_t(&self, t: f64, x: &mut DVector<f64>) -> Result<()> {
        for _ in 0..30 {
            let f = self.residual(t, x)?;
            let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            if f.amax() < NEWTON_TOL * scale {
                return Ok(());
            }
            let (jx, _) = self.jacobians(t, x)?;
            let delta = jx.lu().solve(&f).ok_or(Error::SingularJacobian)?;
            *x -= delta;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NoConvergence {
                    op: "continue_branch",
                    residual: f.amax(),
                    iters: 30,
                });
            }
        }
        Err(Error::NoConvergence {
            op: "continue_branch",
            residual: f64::NAN,
            iters: 30,
        })
    }

    /// Corrector for the arclength step: cycle equations plus the
    /// hyperplane through `pred` orthogonal to `tangent`.
    fn newton_arclength(
        &self,
        u: &mut DVector<f64>,
        pred: &DVector<f64>,
        tangent: &DVector<f64>,
    ) -> Result<()> {
        let q = self.q;
        for _ in 0..30 {
            let t = u[q];
            let x = u.rows(0, q).into_owned();
            let f = self.residual(t, &x)?;
            let plane: f64 = (0..=q).map(|i| tangent[i] * (u[i] - pred[i])).sum();
            let scale = u.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            if f.amax().max(plane.abs()) < NEWTON_TOL * scale {
                return Ok(());
            }
            let (jx, jt) = self.jacobians(t, &x)?;
            let mut aug = DMatrix::zeros(q + 1, q + 1);
            aug.view_mut((0, 0), (q, q)).copy_from(&jx);
            aug.view_mut((0, q), (q, 1)).copy_from(&jt);
            for i in 0..=q {
                aug[(q, i)] = tangent[i];
            }
            let mut rhs = DVector::zeros(q + 1);
            rhs.rows_mut(0, q).copy_from(&f);
            rhs[q] = plane;
            let delta = aug.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
            *u -= delta;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::NoConvergence {
                    op: "continue_branch",
                    residual: f.amax(),
                    iters: 30,
                });
            }
        }
        Err(Error::NoConvergence {
            op: "continue_branch",
            residual: f64::NAN,
            iters: 30,
        })
    }

    /// Unit tangent of the solution curve in (x, t), oriented along `orient`.
    fn tangent(&self, t: f64, x: &DVector<f64>, orient: &DVector<f64>) -> Result<DVector<f64>> {
        let q = self.q;
        let (jx, jt) = self.jacobians(t, x)?;
        let mut tau = DVector::zeros(q + 1);
        match jx.clone().lu().solve(&jt) {
            Some(xdot) => {
                for j in 0..q {
                    tau[j] = -xdot[j];
                }
                tau[q] = 1.0;
            }
            None => {
                // At a fold the x-Jacobian is singular; take the nullspace
                // direction of the bordered system instead (dt = 0 there).
                let mut aug = DMatrix::zeros(q + 1, q + 1);
                aug.view_mut((0, 0), (q, q)).copy_from(&jx);
                aug.view_mut((0, q), (q, 1)).copy_from(&jt);
                for i in 0..=q {
                    aug[(q, i)] = orient[i];
                }
                let mut rhs = DVector::zeros(q + 1);
                rhs[q] = 1.0;
                tau = aug
                    .lu()
                    .solve(&rhs)
                    .ok_or(Error::SingularJacobian)?;
            }
        }
        let norm = tau.norm();
        if norm == 0.0 {
            return Err(Error::SingularJacobian);
        }
        tau /= norm;
        if tau.dot(orient) < 0.0 {
            tau = -tau;
        }
        Ok(tau)
    }
}

/// Predictor-corrector continuation of a real cycle from `start.w` toward
/// `t_target`, switching to arclength stepping near multiplier-one folds.
/// The branch terminates when the parameter leaves the closed interval
/// spanned by the start and the target (possibly after rounding a fold), or
/// on an irrecoverable Newton failure, or when the orbit leaves the domain.
pub fn continue_branch(
    fam: &Family,
    start: &Cycle,
    t_target: f64,
    policy: &StepPolicy,
) -> Result<CycleBranch> {
    let q = start.period;
    if start.points.iter().any(|z| z.im.abs() > 1e-9) || start.w.im.abs() > 1e-9 {
        return Err(Error::Config(
            "real continuation requires a real starting cycle".into(),
        ));
    }
    let t_start = start.w.re;
    let (t_lo, t_hi) = if t_start <= t_target {
        (t_start, t_target)
    } else {
        (t_target, t_start)
    };
    let dir = if t_target >= t_start { 1.0 } else { -1.0 };
    let sys = RealCycleSystem { fam, q };

    let mut t = t_start;
    let mut x = DVector::from_iterator(q, start.points.iter().map(|z| z.re));
    sys.newton_fixed_t(t, &mut x)?;

    let mut samples = Vec::new();
    let record = |samples: &mut Vec<(f64, Cycle)>, t: f64, x: &DVector<f64>| -> Result<Classification> {
        let points: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let cyc = build_cycle(fam, Complex64::new(t, 0.0), points)?;
        let class = cyc.classification;
        samples.push((t, cyc));
        Ok(class)
    };
    record(&mut samples, t, &x)?;

    let mut h = policy.initial_step.min(policy.max_step);
    let mut orient = DVector::zeros(q + 1);
    orient[q] = dir;
    let mut arclength_mode = false;
    let mut status = BranchStatus::ReachedEndpoint;

    'outer: while samples.len() < policy.max_samples {
        let kappa = samples.last().map(|(_, c)| c.multiplier.re).unwrap_or(0.0);
        if !arclength_mode && (kappa - 1.0).abs() < policy.fold_window {
            arclength_mode = true;
        } else if arclength_mode && (kappa - 1.0).abs() > 2.0 * policy.fold_window {
            arclength_mode = false;
        }

        let step_ok = if arclength_mode {
            let tau = match sys.tangent(t, &x, &orient) {
                Ok(tau) => tau,
                Err(_) => {
                    status = BranchStatus::NewtonFailure;
                    break 'outer;
                }
            };
            let mut u = DVector::zeros(q + 1);
            u.rows_mut(0, q).copy_from(&x);
            u[q] = t;
            let pred = &u + &tau * h;
            let mut trial = pred.clone();
            match sys.newton_arclength(&mut trial, &pred, &tau) {
                Ok(()) => {
                    let dx = (trial.rows(0, q) - &x).amax();
                    if dx > 0.5 {
                        false
                    } else {
                        x.copy_from(&trial.rows(0, q));
                        t = trial[q];
                        orient = tau;
                        true
                    }
                }
                Err(Error::Domain { .. }) | Err(Error::Escape { .. }) => {
                    status = BranchStatus::LeftDomain;
                    break 'outer;
                }
                Err(_) => false,
            }
        } else {
            let t_new = (t + dir * h).clamp(t_lo, t_hi);
            // Secant/tangent predictor.
            let mut trial = x.clone();
            if let Ok((jx, jt)) = sys.jacobians(t, &x) {
                if let Some(xdot) = jx.lu().solve(&jt) {
                    trial -= xdot * (t_new - t);
                }
            }
            match sys.newton_fixed_t(t_new, &mut trial) {
                Ok(()) => {
                    let dx = (&trial - &x).amax();
                    if dx > 0.5 && h > policy.min_step * 4.0 {
                        false
                    } else {
                        x = trial;
                        t = t_new;
                        true
                    }
                }
                Err(Error::Domain { .. }) | Err(Error::Escape { .. }) => {
                    status = BranchStatus::LeftDomain;
                    break 'outer;
                }
                Err(_) => false,
            }
        };

        if step_ok {
            match record(&mut samples, t, &x) {
                Ok(_) => {}
                Err(_) => {
                    status = BranchStatus::LeftDomain;
                    break;
                }
            }
            h = (h * 1.4).min(policy.max_step);
            if x.amax() > fam.escape_radius() {
                status = BranchStatus::LeftDomain;
                break;
            }
            if (dir > 0.0 && t >= t_hi - 1e-14 && !arclength_mode)
                || (dir < 0.0 && t <= t_lo + 1e-14 && !arclength_mode)
                || t > t_hi + 1e-12
                || t < t_lo - 1e-12
            {
                status = BranchStatus::ReachedEndpoint;
                break;
            }
        } else {
            h *= 0.5;
            if h < policy.min_step {
                status = BranchStatus::NewtonFailure;
                break;
            }
        }
    }

    Ok(CycleBranch {
        period: q,
        samples,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fam(id: &str) -> Family {
        Family::builtin(id, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn quadratic_fixed_point_closed_form() {
        // z^2 + c at c = -0.5: fixed point (1 - sqrt(3)) / 2, kappa = 1 - sqrt(3).
        let f = fam("quad");
        let cyc = find_cycle(&f, c(-0.5, 0.0), 1, &[c(-0.3, 0.0)]).unwrap();
        let a0 = (1.0 - 3.0_f64.sqrt()) / 2.0;
        assert!((cyc.points[0] - c(a0, 0.0)).norm() < 1e-12);
        assert!((cyc.multiplier - c(2.0 * a0, 0.0)).norm() < 1e-12);
        assert_eq!(cyc.classification, Classification::AttractingHyperbolic);
    }

    #[test]
    fn basilica_two_cycle_is_superattracting() {
        let f = fam("quad");
        let cyc = find_cycle(&f, c(-1.0, 0.0), 2, &[c(0.1, 0.0), c(-0.9, 0.0)]).unwrap();
        let mut pts: Vec<f64> = cyc.points.iter().map(|z| z.re).collect();
        pts.sort_by(f64::total_cmp);
        assert!((pts[0] + 1.0).abs() < 1e-12 && pts[1].abs() < 1e-12);
        assert_eq!(cyc.classification, Classification::Superattracting);
        assert!(cyc.multiplier.norm() < 1e-12);
    }

    #[test]
    fn find_cycle_is_idempotent() {
        let f = fam("quad");
        let cyc = find_cycle(&f, c(-0.5, 0.0), 1, &[c(-0.3, 0.0)]).unwrap();
        let again = find_cycle(&f, c(-0.5, 0.0), 1, &cyc.points).unwrap();
        assert!((again.points[0] - cyc.points[0]).norm() <= 1e-13);
    }

    #[test]
    fn real_seeds_stay_real() {
        let f = fam("logistic");
        let cyc = find_cycle(&f, c(3.2, 0.0), 2, &[c(0.5, 0.0), c(0.8, 0.0)]).unwrap();
        for p in &cyc.points {
            assert!(p.im.abs() <= 1e-12);
        }
    }

    #[test]
    fn parabolic_pair_quadratic_fold() {
        let f = fam("quad");
        let (w, cyc) = find_parabolic_pair(&f, 1, c(0.2, 0.0), &[c(0.4, 0.0)], ONE).unwrap();
        assert!((w - c(0.25, 0.0)).norm() < 1e-10);
        assert!((cyc.points[0] - c(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn parabolic_pair_quadratic_flip() {
        let f = fam("quad");
        let (w, cyc) = find_parabolic_pair(&f, 1, c(-0.6, 0.0), &[c(-0.4, 0.0)], -ONE).unwrap();
        assert!((w - c(-0.75, 0.0)).norm() < 1e-10);
        assert!((cyc.points[0] - c(-0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn parabolic_pair_logistic_flip() {
        // kappa = 2 - w for the logistic fixed point: kappa = -1 at w = 3.
        let f = fam("logistic");
        let (w, cyc) = find_parabolic_pair(&f, 1, c(2.8, 0.0), &[c(0.6, 0.0)], -ONE).unwrap();
        assert!((w - c(3.0, 0.0)).norm() < 1e-10);
        assert!((cyc.points[0] - c(2.0 / 3.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn return_map_jet_at_quadratic_parabolic() {
        let f = fam("quad");
        let cyc = Cycle {
            w: c(0.25, 0.0),
            period: 1,
            points: vec![c(0.5, 0.0)],
            multiplier: ONE,
            classification: Classification::Parabolic { l: 0, p: 1 },
            residual: 0.0,
        };
        let jet = return_map_jet(&f, &cyc, 2).unwrap();
        assert!((jet.dz(1) - ONE).norm() < 1e-14);
        assert!((jet.dz(2) - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn return_map_jet_of_basilica() {
        // g^2(z) = (z^2-1)^2 - 1 = z^4 - 2 z^2 at the superattracting point 0:
        // kappa = 0 and D^2 g^2(0) = -4 by direct expansion.
        let f = fam("quad");
        let cyc = find_cycle(&f, c(-1.0, 0.0), 2, &[c(0.1, 0.0), c(-0.9, 0.0)]).unwrap();
        let base_zero = if cyc.points[0].norm() < 0.5 { cyc } else {
            // rotate so the cycle starts at 0
            let mut rot = find_cycle(&f, c(-1.0, 0.0), 2, &[c(-0.9, 0.0), c(0.1, 0.0)]).unwrap();
            rot.points.rotate_left(0);
            rot
        };
        let jet = return_map_jet(&f, &base_zero, 2).unwrap();
        assert!(jet.dz(1).norm() < 1e-12);
        assert!((jet.dz(2) - c(-4.0, 0.0)).norm() < 1e-11);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(ZERO, CLASS_TOL), Classification::Superattracting);
        assert_eq!(
            classify(c(-1.0, 0.0), CLASS_TOL),
            Classification::Parabolic { l: 1, p: 2 }
        );
        let third = Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        assert_eq!(
            classify(third, CLASS_TOL),
            Classification::Parabolic { l: 1, p: 3 }
        );
        let golden = Complex64::from_polar(1.0, std::f64::consts::TAU * 0.6180339887498949);
        assert_eq!(classify(golden, CLASS_TOL), Classification::NeutralIrrational);
        assert_eq!(classify(c(0.5, 0.0), CLASS_TOL), Classification::AttractingHyperbolic);
        assert_eq!(classify(c(1.5, 0.0), CLASS_TOL), Classification::Repelling);
    }

    #[test]
    fn basin_geometric_rate_matches_multiplier() {
        let f = fam("quad");
        let cyc = find_cycle(&f, c(-0.5, 0.0), 1, &[c(-0.3, 0.0)]).unwrap();
        let report = basin_check(&f, c(-0.5, 0.0), &cyc, 100_000, 1e-6).unwrap();
        assert_eq!(report.attracted_to, 0);
        match report.rate {
            RateEstimate::Geometric { ratio } => {
                assert!((ratio - 0.732).abs() < 0.02, "ratio {ratio}");
            }
            other => panic!("expected geometric rate, got {other:?}"),
        }
    }

    #[test]
    fn basin_escape_reports_not_attracted() {
        let f = fam("quad");
        let cyc = Cycle {
            w: c(1.0, 0.0),
            period: 1,
            points: vec![c(0.5, 0.5)],
            multiplier: ONE,
            classification: Classification::Repelling,
            residual: 0.0,
        };
        assert!(matches!(
            basin_check(&f, c(1.0, 0.0), &cyc, 10_000, 1e-6),
            Err(Error::NotAttracted { .. })
        ));
    }

    #[test]
    fn logistic_fixed_branch_reproduces_kappa() {
        let f = fam("logistic");
        let start = find_cycle(&f, c(1.5, 0.0), 1, &[c(0.3, 0.0)]).unwrap();
        let branch = continue_branch(&f, &start, 4.0, &StepPolicy::default()).unwrap();
        assert_eq!(branch.status, BranchStatus::ReachedEndpoint);
        assert!(branch.last_t() >= 4.0 - 1e-9);
        for (t, cyc) in &branch.samples {
            let expect = 2.0 - t;
            assert!(
                (cyc.multiplier.re - expect).abs() <= 1e-9,
                "kappa mismatch at t = {t}: {} vs {expect}",
                cyc.multiplier.re
            );
            let a = 1.0 - 1.0 / t;
            if *t > 1.2 {
                assert!((cyc.points[0].re - a).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn logistic_two_cycle_survives_past_flip() {
        let f = fam("logistic");
        let seed = [c(0.5, 0.0), c(0.8, 0.0)];
        let start = find_cycle(&f, c(3.2, 0.0), 2, &seed).unwrap();
        let branch = continue_branch(&f, &start, 4.0, &StepPolicy::default()).unwrap();
        assert_eq!(branch.status, BranchStatus::ReachedEndpoint);
        let (_, last) = branch.samples.last().unwrap();
        assert_eq!(last.classification, Classification::Repelling);
        // Multiplier along the two-cycle is 4 + 2w - w^2.
        for (t, cyc) in &branch.samples {
            let expect = 4.0 + 2.0 * t - t * t;
            assert!((cyc.multiplier.re - expect).abs() <= 1e-8, "at t = {t}");
        }
    }

    #[test]
    fn quadratic_branch_turns_at_the_fold() {
        let f = fam("quad");
        let start = find_cycle(&f, c(0.0, 0.0), 1, &[c(0.1, 0.0)]).unwrap();
        let branch = continue_branch(&f, &start, 0.5, &StepPolicy::default()).unwrap();
        assert!(branch.turned(), "branch should round the fold at c = 1/4");
        let max_t = branch
            .samples
            .iter()
            .map(|(t, _)| *t)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((max_t - 0.25).abs() < 1e-4, "fold located at {max_t}");
        // After the turn the branch walks back along the repelling sheet.
        let (_, last) = branch.samples.last().unwrap();
        assert_eq!(last.classification, Classification::Repelling);
    }

    #[test]
    fn quadratic_branch_survives_to_minus_two() {
        let f = fam("quad");
        let start = find_cycle(&f, c(0.0, 0.0), 1, &[c(0.1, 0.0)]).unwrap();
        let branch = continue_branch(&f, &start, -2.0, &StepPolicy::default()).unwrap();
        assert_eq!(branch.status, BranchStatus::ReachedEndpoint);
        assert!(branch.last_t() <= -2.0 + 1e-9);
        for (t, cyc) in &branch.samples {
            let a = (1.0 - (1.0 - 4.0 * t).sqrt()) / 2.0;
            assert!((cyc.points[0].re - a).abs() <= 1e-9);
        }
    }
}
