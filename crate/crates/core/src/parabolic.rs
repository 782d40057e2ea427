//! Leau-Fatou geometry at parabolic cycles: non-degeneracy, rotation data,
//! attracting/repelling directions, cusp sectors, and membership in the
//! local basin shell.
//!
//! Directions are stored as fractions of a full turn in `[0, 1)`. An
//! attracting direction `theta` satisfies `A_j e^{2 pi i p theta} < 0`,
//! where `A_j` is the leading coefficient of `g^{pq}` at the cycle point.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::{iterate_jet, Classification, Cycle};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::jet::K_Z_MAX;
use crate::util::{circle_dist, wrap_unit};

/// Iteration budget used by the grid certifications.
const GRID_BUDGET: usize = 200_000;
const CONV_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct PetalGeometry {
    pub period: usize,
    pub p: u32,
    pub l: u32,
    pub alpha: f64,
    /// Sector radius (the `tau` of the cusp sectors).
    pub radius: f64,
    #[serde(skip)]
    pub points: Vec<Complex64>,
    /// Leading coefficients `D^{p+1} g^{pq}(a_j) / (p+1)!` per cycle point.
    #[serde(skip)]
    pub leading: Vec<Complex64>,
    /// Attracting direction fractions per cycle point, sorted.
    pub theta_att: Vec<Vec<f64>>,
    /// Repelling direction fractions per cycle point, sorted.
    pub theta_rep: Vec<Vec<f64>>,
}

/// Compute petal geometry of a non-degenerate parabolic cycle: leading
/// coefficients of the `pq`-fold return map and the `p`-element direction
/// sets at each cycle point.
pub fn petal_geometry(fam: &Family, cyc: &Cycle, alpha: f64, radius: f64) -> Result<PetalGeometry> {
    let (l, p) = match cyc.classification {
        Classification::Parabolic { l, p } => (l, p),
        _ => return Err(Error::NotParabolic),
    };
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::Config(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let order = p as usize + 1;
    if order > K_Z_MAX {
        return Err(Error::Order {
            requested: order,
            cap: K_Z_MAX,
        });
    }
    let steps = p as usize * cyc.period;
    let mut leading = Vec::with_capacity(cyc.period);
    let mut theta_att = Vec::with_capacity(cyc.period);
    let mut theta_rep = Vec::with_capacity(cyc.period);
    for &a in &cyc.points {
        let jet = iterate_jet(fam, cyc.w, a, steps, order, 0)?;
        let a_lead = jet.get(order, 0);
        let scale = (1..=order)
            .map(|i| jet.get(i, 0).norm())
            .fold(1.0_f64, f64::max);
        if a_lead.norm() < 1e-10 * scale {
            return Err(Error::DegenerateParabolic {
                magnitude: a_lead.norm(),
            });
        }
        leading.push(a_lead);
        // A e^{2 pi i p theta} real negative <=> p theta + arg A / 2pi = 1/2 (mod 1).
        let base = a_lead.arg() / std::f64::consts::TAU;
        let mut att: Vec<f64> = (0..p)
            .map(|k| wrap_unit((0.5 - base + k as f64) / p as f64))
            .collect();
        let mut rep: Vec<f64> = (0..p)
            .map(|k| wrap_unit((-base + k as f64) / p as f64))
            .collect();
        att.sort_by(f64::total_cmp);
        rep.sort_by(f64::total_cmp);
        theta_att.push(att);
        theta_rep.push(rep);
    }
    Ok(PetalGeometry {
        period: cyc.period,
        p,
        l,
        alpha,
        radius,
        points: cyc.points.clone(),
        leading,
        theta_att,
        theta_rep,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SectorClass {
    RepellingCusp,
    AttractingCusp,
    Neither,
}

/// Classify `z` against the cusp sectors at cycle point `j`: writing
/// `z - a_j = s e^{2 pi i t}`, the point belongs to a cusp when
/// `|t - theta| < s^alpha` for a direction `theta` of the matching kind and
/// `0 < s < radius`. The repelling verdict takes precedence.
pub fn sector_membership(geom: &PetalGeometry, j: usize, z: Complex64) -> SectorClass {
    let delta = z - geom.points[j];
    let s = delta.norm();
    if s <= 0.0 || s >= geom.radius {
        return SectorClass::Neither;
    }
    let t = wrap_unit(delta.arg() / std::f64::consts::TAU);
    let bound = s.powf(geom.alpha);
    if geom.theta_rep[j].iter().any(|&th| circle_dist(t, th) < bound) {
        return SectorClass::RepellingCusp;
    }
    if geom.theta_att[j].iter().any(|&th| circle_dist(t, th) < bound) {
        return SectorClass::AttractingCusp;
    }
    SectorClass::Neither
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OmegaClass {
    Inside,
    Outside,
    Undecided,
}

/// Membership of `z` in the basin shell: the orbit must stay within `r` of
/// the cycle and converge to it. `Outside` as soon as the distance exceeds
/// `r`; `Inside` on convergence below 1e-9 or on monotone decay below `r/10`
/// through the last tenth of the budget; `Undecided` otherwise (parabolic
/// convergence is slow, so a three-valued answer is the honest one).
pub fn omega_membership(
    fam: &Family,
    cyc: &Cycle,
    r: f64,
    z: Complex64,
    budget: usize,
) -> OmegaClass {
    let window_start = budget.saturating_sub(budget / 10);
    let mut zk = z;
    let mut window_monotone = true;
    let mut window_below = true;
    let mut prev = f64::INFINITY;
    for n in 0..=budget {
        let (_, dist) = cyc.nearest_point(zk);
        if dist > r {
            return OmegaClass::Outside;
        }
        if dist < CONV_EPS {
            return OmegaClass::Inside;
        }
        if n >= window_start {
            if dist > prev * (1.0 + 1e-12) + 1e-18 {
                window_monotone = false;
            }
            if dist > r / 10.0 {
                window_below = false;
            }
        }
        prev = dist;
        zk = match fam.step(cyc.w, zk) {
            Ok(v) => v,
            Err(_) => return OmegaClass::Outside,
        };
    }
    if window_monotone && window_below {
        OmegaClass::Inside
    } else {
        OmegaClass::Undecided
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowerReport {
    pub tau: f64,
    pub r: f64,
    pub alpha: f64,
    pub grid_n: usize,
    pub inside: usize,
    pub outside: usize,
    pub undecided: usize,
    pub skipped: usize,
    /// Outside points not covered by the repelling cusp (expected empty).
    pub violation_count: usize,
    pub violations: Vec<(f64, f64)>,
    /// Longest time an inside point needed to enter an attracting cusp.
    pub max_entry_time: usize,
    /// Inside points that never entered an attracting cusp within budget.
    pub unresolved_entries: usize,
}

/// Grid certification of the flower picture at a non-degenerate parabolic
/// cycle: every grid point of `B(a_j, tau)` that escapes the `r`-shell must
/// lie in the repelling cusp, and every basin point must eventually enter an
/// attracting cusp; entry times are recorded.
pub fn flower_escape_check(
    fam: &Family,
    cyc: &Cycle,
    geom: &PetalGeometry,
    r: f64,
    grid_n: usize,
) -> Result<FlowerReport> {
    if grid_n < 2 {
        return Err(Error::Config("flower check needs grid_n >= 2".into()));
    }
    let tau = geom.radius;

    #[derive(Default)]
    struct Partial {
        inside: usize,
        outside: usize,
        undecided: usize,
        skipped: usize,
        violations: Vec<(f64, f64)>,
        max_entry: usize,
        unresolved: usize,
    }

    let mut report = FlowerReport {
        tau,
        r,
        alpha: geom.alpha,
        grid_n,
        inside: 0,
        outside: 0,
        undecided: 0,
        skipped: 0,
        violation_count: 0,
        violations: Vec::new(),
        max_entry_time: 0,
        unresolved_entries: 0,
    };

    for (j, &a) in geom.points.iter().enumerate() {
        // Row-parallel scan with deterministic row-major aggregation.
        let rows: Vec<Partial> = (0..grid_n)
            .into_par_iter()
            .map(|iy| {
                let mut part = Partial::default();
                let y = -tau + 2.0 * tau * iy as f64 / (grid_n - 1) as f64;
                for ix in 0..grid_n {
                    let x = -tau + 2.0 * tau * ix as f64 / (grid_n - 1) as f64;
                    let z = a + Complex64::new(x, y);
                    let s = (z - a).norm();
                    if s < 1e-12 || s >= tau {
                        part.skipped += 1;
                        continue;
                    }
                    match omega_membership(fam, cyc, r, z, GRID_BUDGET) {
                        OmegaClass::Outside => {
                            part.outside += 1;
                            if sector_membership(geom, j, z) != SectorClass::RepellingCusp {
                                part.violations.push((z.re, z.im));
                            }
                        }
                        OmegaClass::Inside => {
                            part.inside += 1;
                            match attracting_entry_time(fam, cyc, geom, z) {
                                Some(n) => part.max_entry = part.max_entry.max(n),
                                None => part.unresolved += 1,
                            }
                        }
                        OmegaClass::Undecided => part.undecided += 1,
                    }
                }
                part
            })
            .collect();

        for part in rows {
            report.inside += part.inside;
            report.outside += part.outside;
            report.undecided += part.undecided;
            report.skipped += part.skipped;
            report.max_entry_time = report.max_entry_time.max(part.max_entry);
            report.unresolved_entries += part.unresolved;
            report.violation_count += part.violations.len();
            for v in part.violations {
                if report.violations.len() < 100 {
                    report.violations.push(v);
                }
            }
        }
    }
    Ok(report)
}

/// First iterate index at which the orbit of `z` enters an attracting cusp
/// of any cycle point (or lands on the cycle to convergence accuracy).
fn attracting_entry_time(
    fam: &Family,
    cyc: &Cycle,
    geom: &PetalGeometry,
    z: Complex64,
) -> Option<usize> {
    let mut zk = z;
    for n in 0..GRID_BUDGET {
        let (_, dist) = cyc.nearest_point(zk);
        if dist < CONV_EPS {
            return Some(n);
        }
        for j in 0..geom.points.len() {
            if sector_membership(geom, j, zk) == SectorClass::AttractingCusp {
                return Some(n);
            }
        }
        zk = fam.step(cyc.w, zk).ok()?;
    }
    None
}

/// Classify a square grid around `center` for raster output.
pub fn omega_grid(
    fam: &Family,
    cyc: &Cycle,
    r: f64,
    center: Complex64,
    half_width: f64,
    grid_n: usize,
    budget: usize,
) -> Vec<OmegaClass> {
    (0..grid_n * grid_n)
        .into_par_iter()
        .map(|idx| {
            let iy = idx / grid_n;
            let ix = idx % grid_n;
            let x = center.re - half_width + 2.0 * half_width * ix as f64 / (grid_n - 1) as f64;
            let y = center.im - half_width + 2.0 * half_width * iy as f64 / (grid_n - 1) as f64;
            omega_membership(fam, cyc, r, Complex64::new(x, y), budget)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::find_cycle;
    use std::collections::BTreeMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);
    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn parabolic_cycle_at_origin(kappa: Complex64, p: u32) -> Cycle {
        Cycle {
            w: ZERO,
            period: 1,
            points: vec![ZERO],
            multiplier: kappa,
            classification: Classification::Parabolic { l: if p == 1 { 0 } else { 1 }, p },
            residual: 0.0,
        }
    }

    /// G_w(z) = z + z^2 + w, used at w = 0.
    fn plus_square() -> Family {
        Family::additive_polynomial("z-plus-z2", vec![ZERO, ONE, ONE])
    }

    /// G_w(z) = z - z^2 + w, used at w = 0.
    fn minus_square() -> Family {
        Family::additive_polynomial("z-minus-z2", vec![ZERO, ONE, -ONE])
    }

    #[test]
    fn plus_square_directions() {
        let fam = plus_square();
        let cyc = parabolic_cycle_at_origin(ONE, 1);
        let geom = petal_geometry(&fam, &cyc, 0.5, 0.05).unwrap();
        assert_eq!(geom.p, 1);
        assert!((geom.leading[0] - ONE).norm() < 1e-14);
        assert!((geom.theta_att[0][0] - 0.5).abs() < 1e-12);
        assert!(geom.theta_rep[0][0].abs() < 1e-12);
    }

    #[test]
    fn minus_square_swaps_directions() {
        let fam = minus_square();
        let cyc = parabolic_cycle_at_origin(ONE, 1);
        let geom = petal_geometry(&fam, &cyc, 0.5, 0.05).unwrap();
        assert!(geom.theta_att[0][0].abs() < 1e-12);
        assert!((geom.theta_rep[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_petal_flip_directions() {
        // g = -z + z^2: kappa = -1, p = 2; g^2 = z - 2 z^3 + O(z^4), so the
        // attracting axes sit on the real line and the repelling ones on the
        // imaginary line.
        let fam = Family::additive_polynomial("flip", vec![ZERO, -ONE, ONE]);
        let cyc = parabolic_cycle_at_origin(-ONE, 2);
        let geom = petal_geometry(&fam, &cyc, 0.5, 0.05).unwrap();
        assert_eq!(geom.p, 2);
        assert!((geom.leading[0] - c(-2.0, 0.0)).norm() < 1e-12);
        let att = &geom.theta_att[0];
        let rep = &geom.theta_rep[0];
        assert!((att[0] - 0.0).abs() < 1e-12 && (att[1] - 0.5).abs() < 1e-12);
        assert!((rep[0] - 0.25).abs() < 1e-12 && (rep[1] - 0.75).abs() < 1e-12);
        // Consecutive attracting directions differ by exactly 1/p.
        assert!((att[1] - att[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn three_petal_geometry() {
        // g = e^{2 pi i / 3} z + z^4: p = 3 petals.
        let kappa = Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        let fam = Family::additive_polynomial("third", vec![ZERO, kappa, ZERO, ZERO, ONE]);
        let cyc = parabolic_cycle_at_origin(kappa, 3);
        let geom = petal_geometry(&fam, &cyc, 0.5, 0.05).unwrap();
        assert_eq!(geom.theta_att[0].len(), 3);
        for pair in geom.theta_att[0].windows(2) {
            assert!((pair[1] - pair[0] - 1.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn directions_rotate_under_conjugation() {
        // Conjugating z + z^2 by z -> e^{i beta} z gives z + e^{-i beta} z^2;
        // every direction shifts by beta / 2 pi mod 1/p.
        let beta = 0.7_f64;
        let rot = Complex64::from_polar(1.0, -beta);
        let fam = Family::additive_polynomial("rotated", vec![ZERO, ONE, rot]);
        let cyc = parabolic_cycle_at_origin(ONE, 1);
        let geom = petal_geometry(&fam, &cyc, 0.5, 0.05).unwrap();
        let base = petal_geometry(&plus_square(), &cyc, 0.5, 0.05).unwrap();
        let shift = beta / std::f64::consts::TAU;
        assert!(circle_dist(geom.theta_att[0][0], wrap_unit(base.theta_att[0][0] + shift)) < 1e-10);
        assert!(circle_dist(geom.theta_rep[0][0], wrap_unit(base.theta_rep[0][0] + shift)) < 1e-10);
    }

    #[test]
    fn degenerate_symmetric_cycle_is_refused() {
        // The sine pitchfork cycle has D^2 g^2(a_0) = 0: the leading
        // coefficient vanishes by the odd symmetry and the geometry is
        // refused as degenerate.
        let sine = Family::builtin("sine-mult", &BTreeMap::new()).unwrap();
        let g = |a: f64| a.tan() + a;
        let (mut lo, mut hi) = (std::f64::consts::FRAC_PI_2 + 1e-9, std::f64::consts::PI - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let a0 = 0.5 * (lo + hi);
        let w0 = 1.0 / a0.cos();
        let cyc = find_cycle(&sine, c(w0, 0.0), 2, &[c(a0, 0.0), c(-a0, 0.0)]).unwrap();
        assert!(cyc.is_parabolic());
        match petal_geometry(&sine, &cyc, 0.5, 0.05) {
            Err(Error::DegenerateParabolic { magnitude }) => {
                assert!(magnitude < 1e-10, "leading coefficient {magnitude}");
            }
            other => panic!("expected DegenerateParabolic, got {other:?}"),
        }
    }

    #[test]
    fn sector_membership_examples() {
        let fam = plus_square();
        let cyc = parabolic_cycle_at_origin(ONE, 1);
        let geom = petal_geometry(&fam, &cyc, 0.5, 0.05).unwrap();
        assert_eq!(sector_membership(&geom, 0, c(-0.01, 0.0)), SectorClass::AttractingCusp);
        assert_eq!(sector_membership(&geom, 0, c(0.01, 0.0)), SectorClass::RepellingCusp);
        // s = 0.01, t = 1/4: s^alpha = 0.1 < 0.25 distance to both axes.
        assert_eq!(sector_membership(&geom, 0, c(0.0, 0.01)), SectorClass::Neither);
    }

    #[test]
    fn omega_membership_examples() {
        let fam = plus_square();
        let cyc = parabolic_cycle_at_origin(ONE, 1);
        assert_eq!(omega_membership(&fam, &cyc, 0.1, c(0.05, 0.0), 100_000), OmegaClass::Outside);
        assert_eq!(omega_membership(&fam, &cyc, 0.1, c(-0.05, 0.0), 100_000), OmegaClass::Inside);
        // Attracting case: a point close to the fixed point of z^2 - 0.5.
        let quad = Family::builtin("quad", &BTreeMap::new()).unwrap();
        let fx = find_cycle(&quad, c(-0.5, 0.0), 1, &[c(-0.3, 0.0)]).unwrap();
        let z = fx.points[0] + c(0.02, 0.01);
        assert_eq!(omega_membership(&quad, &fx, 0.05, z, 10_000), OmegaClass::Inside);
    }

    #[test]
    fn omega_membership_is_monotone_in_r() {
        let fam = plus_square();
        let cyc = parabolic_cycle_at_origin(ONE, 1);
        for &z in &[c(-0.04, 0.01), c(0.0, 0.03), c(-0.02, -0.02)] {
            let small = omega_membership(&fam, &cyc, 0.08, z, 50_000);
            let large = omega_membership(&fam, &cyc, 0.12, z, 50_000);
            if small == OmegaClass::Inside {
                assert_eq!(large, OmegaClass::Inside, "monotonicity at {z}");
            }
        }
    }

    #[test]
    fn flower_check_small_grid_has_no_violations() {
        let fam = plus_square();
        let cyc = parabolic_cycle_at_origin(ONE, 1);
        let geom = petal_geometry(&fam, &cyc, 0.5, 0.05).unwrap();
        let report = flower_escape_check(&fam, &cyc, &geom, 0.1, 31).unwrap();
        assert_eq!(report.violation_count, 0, "violations: {:?}", report.violations);
        assert!(report.outside > 0 && report.inside > 0);
        assert_eq!(report.unresolved_entries, 0);
    }

    #[test]
    fn flower_check_on_attracting_cycle_is_trivial() {
        // No Outside points appear in a small ball around an attracting
        // fixed point, so there is nothing to violate.
        let quad = Family::builtin("quad", &BTreeMap::new()).unwrap();
        let fx = find_cycle(&quad, c(-0.5, 0.0), 1, &[c(-0.3, 0.0)]).unwrap();
        let geom = PetalGeometry {
            period: 1,
            p: 1,
            l: 0,
            alpha: 0.5,
            radius: 0.01,
            points: fx.points.clone(),
            leading: vec![ONE],
            theta_att: vec![vec![0.5]],
            theta_rep: vec![vec![0.0]],
        };
        let report = flower_escape_check(&quad, &fx, &geom, 0.05, 21).unwrap();
        assert_eq!(report.outside, 0);
        assert_eq!(report.violation_count, 0);
    }
}
