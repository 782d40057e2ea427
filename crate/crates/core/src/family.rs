//! Two-variable analytic families `(w, z) -> G_w(z)` with jet evaluation.
//!
//! Builtins cover the additive form `G_w(z) = f(z) + w` and the
//! multiplicative form `G_w(z) = w f(z)`; custom families supply their own
//! jet evaluator. Derivatives always come from closed-form base jets, never
//! from finite differences.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{check_orders, Jet2};
use crate::region::Region;
use crate::series::Series;
use crate::util::SplitMix64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Form {
    Additive,
    Multiplicative,
    Custom,
}

/// Shape of the base map's real restriction at the marked critical point;
/// fixes the orientation of the real bifurcation statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriticalShape {
    Max,
    Min,
}

/// Closed-form Taylor data of the base map `f`: coefficients
/// `f(z), f'(z), f''(z)/2!, ...` up to the requested order.
pub trait BaseMap: Send + Sync {
    fn jet(&self, z: Complex64, k: usize) -> Result<Vec<Complex64>>;
}

/// Full jet evaluator for families that are neither additive nor
/// multiplicative in the parameter.
pub trait CustomFamily: Send + Sync {
    fn eval_jet(&self, w: Complex64, z: Complex64, kz: usize, kw: usize) -> Result<Jet2>;
}

enum Evaluator {
    Additive(Arc<dyn BaseMap>),
    Multiplicative(Arc<dyn BaseMap>),
    Custom(Arc<dyn CustomFamily>),
}

pub struct Family {
    id: String,
    form: Form,
    eval: Evaluator,
    marked_point: Complex64,
    param_name: String,
    dyn_domain: Region,
    param_domain: Region,
    real_symmetric: bool,
    odd: bool,
    escape_radius: f64,
    critical_shape: Option<CriticalShape>,
}

impl Family {
    /// Builtin registry. Constructor parameters (`d`, `b`, `ell`) come from
    /// `params`; the runtime parameter (`c` or `w`) does not.
    pub fn builtin(id: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        match id {
            "quad" => Ok(Self::power_family("quad", 2)),
            "power" => {
                let d = params.get("d").copied().unwrap_or(2.0);
                if d < 2.0 || d.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "power family needs integer degree d >= 2, got {d}"
                    )));
                }
                Ok(Self::power_family("power", d as u32))
            }
            "logistic" => Ok(Family {
                id: "logistic".into(),
                form: Form::Multiplicative,
                eval: Evaluator::Multiplicative(Arc::new(Logistic)),
                marked_point: Complex64::new(0.5, 0.0),
                param_name: "w".into(),
                dyn_domain: Region::FullPlane,
                param_domain: Region::FullPlane,
                real_symmetric: true,
                odd: false,
                escape_radius: 1e8,
                critical_shape: Some(CriticalShape::Max),
            }),
            "sine-mult" => Ok(Family {
                id: "sine-mult".into(),
                form: Form::Multiplicative,
                eval: Evaluator::Multiplicative(Arc::new(Sine)),
                marked_point: Complex64::new(FRAC_PI_2, 0.0),
                param_name: "w".into(),
                dyn_domain: Region::FullPlane,
                param_domain: Region::FullPlane,
                real_symmetric: true,
                odd: true,
                escape_radius: 1e8,
                critical_shape: Some(CriticalShape::Max),
            }),
            "sine2-mult" => Ok(Family {
                id: "sine2-mult".into(),
                form: Form::Multiplicative,
                eval: Evaluator::Multiplicative(Arc::new(SineSquared)),
                marked_point: Complex64::new(FRAC_PI_2, 0.0),
                param_name: "w".into(),
                dyn_domain: Region::FullPlane,
                param_domain: Region::FullPlane,
                real_symmetric: true,
                odd: false,
                escape_radius: 1e8,
                critical_shape: Some(CriticalShape::Max),
            }),
            "exp-mult" => Ok(Family {
                id: "exp-mult".into(),
                form: Form::Multiplicative,
                eval: Evaluator::Multiplicative(Arc::new(ExpLogistic)),
                marked_point: Complex64::new(-(2.0_f64.ln()), 0.0),
                param_name: "w".into(),
                dyn_domain: Region::FullPlane,
                param_domain: Region::FullPlane,
                real_symmetric: true,
                odd: false,
                escape_radius: 1e8,
                critical_shape: Some(CriticalShape::Max),
            }),
            "flat-add" => {
                let b = params.get("b").copied().unwrap_or(6.0);
                let ell = params.get("ell").copied().unwrap_or(1.0);
                if ell < 1.0 {
                    return Err(Error::Config(format!("flat-add needs ell >= 1, got {ell}")));
                }
                Ok(Family {
                    id: "flat-add".into(),
                    form: Form::Additive,
                    eval: Evaluator::Additive(Arc::new(FlatExp { b, ell })),
                    marked_point: ZERO,
                    param_name: "c".into(),
                    dyn_domain: Region::Rectangle {
                        re: (-1e8, 1e8),
                        im: (-1e-9, 1e-9),
                    },
                    param_domain: Region::Rectangle {
                        re: (-1e8, 1e8),
                        im: (-1e-9, 1e-9),
                    },
                    real_symmetric: true,
                    odd: false,
                    escape_radius: 1e8,
                    critical_shape: Some(CriticalShape::Min),
                })
            }
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    fn power_family(id: &str, d: u32) -> Self {
        Family {
            id: id.into(),
            form: Form::Additive,
            eval: Evaluator::Additive(Arc::new(Power { d })),
            marked_point: ZERO,
            param_name: "c".into(),
            dyn_domain: Region::FullPlane,
            param_domain: Region::FullPlane,
            real_symmetric: true,
            odd: false,
            escape_radius: 1e8,
            critical_shape: if d % 2 == 0 {
                Some(CriticalShape::Min)
            } else {
                None
            },
        }
    }

    pub fn builtin_ids() -> &'static [&'static str] {
        &[
            "quad",
            "power",
            "logistic",
            "sine-mult",
            "sine2-mult",
            "exp-mult",
            "flat-add",
        ]
    }

    /// A custom family from a jet evaluator.
    pub fn custom(
        id: &str,
        eval: Arc<dyn CustomFamily>,
        marked_point: Complex64,
        dyn_domain: Region,
        param_domain: Region,
    ) -> Self {
        Family {
            id: id.into(),
            form: Form::Custom,
            eval: Evaluator::Custom(eval),
            marked_point,
            param_name: "w".into(),
            dyn_domain,
            param_domain,
            real_symmetric: false,
            odd: false,
            escape_radius: 1e8,
            critical_shape: None,
        }
    }

    /// Additive family `G_w(z) = p(z) + w` from polynomial coefficients.
    pub fn additive_polynomial(id: &str, coeffs: Vec<Complex64>) -> Self {
        Family {
            id: id.into(),
            form: Form::Additive,
            eval: Evaluator::Additive(Arc::new(Polynomial { coeffs })),
            marked_point: ZERO,
            param_name: "c".into(),
            dyn_domain: Region::FullPlane,
            param_domain: Region::FullPlane,
            real_symmetric: false,
            odd: false,
            escape_radius: 1e8,
            critical_shape: None,
        }
    }

    pub fn with_flags(mut self, real_symmetric: bool, odd: bool) -> Self {
        self.real_symmetric = real_symmetric;
        self.odd = odd;
        self
    }

    pub fn with_escape_radius(mut self, radius: f64) -> Self {
        self.escape_radius = radius;
        self
    }

    pub fn with_marked_point(mut self, point: Complex64) -> Self {
        self.marked_point = point;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn param_name(&self) -> &str {
        &self.param_name
    }

    pub fn marked_point(&self) -> Complex64 {
        self.marked_point
    }

    pub fn dyn_domain(&self) -> &Region {
        &self.dyn_domain
    }

    pub fn param_domain(&self) -> &Region {
        &self.param_domain
    }

    pub fn is_real_symmetric(&self) -> bool {
        self.real_symmetric
    }

    pub fn is_odd(&self) -> bool {
        self.odd
    }

    pub fn escape_radius(&self) -> f64 {
        self.escape_radius
    }

    pub fn critical_shape(&self) -> Option<CriticalShape> {
        self.critical_shape
    }

    /// Marked value `c_1 = G_w(marked point)`.
    pub fn marked_value(&self, w: Complex64) -> Result<Complex64> {
        self.eval(w, self.marked_point)
    }

    fn check_domain(&self, w: Complex64, z: Complex64, op: &'static str) -> Result<()> {
        if !self.param_domain.contains(w) {
            return Err(Error::Domain {
                op,
                detail: format!("parameter {w} outside W ({})", self.param_domain.kind_name()),
            });
        }
        if !self.dyn_domain.contains(z) || z.norm() > self.escape_radius {
            return Err(Error::Domain {
                op,
                detail: format!("point {z} outside U ({})", self.dyn_domain.kind_name()),
            });
        }
        Ok(())
    }

    /// Taylor coefficients of `(u, v) -> G_{w+v}(z+u)` at `(0, 0)` truncated
    /// to orders `(kz, kw)`.
    pub fn eval_jet(&self, w: Complex64, z: Complex64, kz: usize, kw: usize) -> Result<Jet2> {
        check_orders(kz, kw)?;
        self.check_domain(w, z, "eval_jet")?;
        match &self.eval {
            Evaluator::Additive(base) => {
                let f = base.jet(z, kz)?;
                let mut jet = Jet2::zeros(kz, kw);
                for (i, &fi) in f.iter().enumerate() {
                    jet.set(i, 0, fi);
                }
                jet.set(0, 0, jet.value() + w);
                if kw >= 1 {
                    jet.set(0, 1, ONE);
                }
                Ok(jet)
            }
            Evaluator::Multiplicative(base) => {
                let f = base.jet(z, kz)?;
                let mut jet = Jet2::zeros(kz, kw);
                for (i, &fi) in f.iter().enumerate() {
                    jet.set(i, 0, w * fi);
                    if kw >= 1 {
                        jet.set(i, 1, fi);
                    }
                }
                Ok(jet)
            }
            Evaluator::Custom(custom) => {
                let jet = custom.eval_jet(w, z, kz, kw)?;
                if jet.kz() != kz || jet.kw() != kw {
                    return Err(Error::CrossCheck {
                        op: "eval_jet",
                        detail: "custom evaluator returned wrong jet shape".into(),
                    });
                }
                Ok(jet)
            }
        }
    }

    /// One-variable jet of `z -> G_w(z)` of arbitrary order: coefficients
    /// `G_w(z), G_w'(z), G_w''(z)/2!, ...`. Builtin forms have closed-form
    /// base jets at every order; custom families stay subject to the
    /// bivariate order cap.
    pub fn eval_z_jet(&self, w: Complex64, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
        self.check_domain(w, z, "eval_z_jet")?;
        match &self.eval {
            Evaluator::Additive(base) => {
                let mut f = base.jet(z, k)?;
                f[0] += w;
                Ok(f)
            }
            Evaluator::Multiplicative(base) => {
                let f = base.jet(z, k)?;
                Ok(f.into_iter().map(|fi| w * fi).collect())
            }
            Evaluator::Custom(custom) => {
                check_orders(k, 0)?;
                let jet = custom.eval_jet(w, z, k, 0)?;
                Ok((0..=k).map(|i| jet.get(i, 0)).collect())
            }
        }
    }

    pub fn eval(&self, w: Complex64, z: Complex64) -> Result<Complex64> {
        Ok(self.eval_jet(w, z, 0, 0)?.value())
    }

    /// `dG_w/dz`.
    pub fn deriv_z(&self, w: Complex64, z: Complex64) -> Result<Complex64> {
        Ok(self.eval_jet(w, z, 1, 0)?.dz(1))
    }

    /// `dG_w/dw`.
    pub fn deriv_w(&self, w: Complex64, z: Complex64) -> Result<Complex64> {
        Ok(self.eval_jet(w, z, 0, 1)?.dw())
    }

    /// Forward orbit `[z0, G(z0), ..., G^(n-1)(z0)]`; aborts with the partial
    /// orbit if an iterate leaves the domain.
    pub fn orbit(&self, w: Complex64, z0: Complex64, n: usize) -> Result<Vec<Complex64>> {
        let mut orbit = Vec::with_capacity(n);
        let mut z = z0;
        for step in 0..n {
            if !self.dyn_domain.contains(z) || z.norm() > self.escape_radius || !z.re.is_finite() {
                return Err(Error::Escape {
                    step,
                    modulus: z.norm(),
                    orbit,
                });
            }
            orbit.push(z);
            if step + 1 < n {
                z = self.eval(w, z)?;
            }
        }
        Ok(orbit)
    }

    /// Single iteration step (no domain re-check beyond `eval`).
    pub fn step(&self, w: Complex64, z: Complex64) -> Result<Complex64> {
        self.eval(w, z)
    }

    /// Checks declared flags and class conditions on deterministic samples.
    /// Failures are warnings, not fatal.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let mut rng = SplitMix64::new(0x7061_7261_6269_6675);
        let sample_box = 1.5;
        let n_samples = 48;

        // Real symmetry: G_{conj w}(conj z) = conj(G_w(z)).
        if self.real_symmetric {
            let mut worst = 0.0_f64;
            let mut ok = true;
            for _ in 0..n_samples {
                let w = Complex64::new(rng.next_in(-sample_box, sample_box), rng.next_in(-0.5, 0.5));
                let z = Complex64::new(rng.next_in(-sample_box, sample_box), rng.next_in(-0.5, 0.5));
                let (w, z) = self.clamp_real_domain(w, z);
                match (self.eval(w.conj(), z.conj()), self.eval(w, z)) {
                    (Ok(a), Ok(b)) => {
                        let d = (a - b.conj()).norm() / b.norm().max(1.0);
                        worst = worst.max(d);
                        if d > 1e-12 {
                            ok = false;
                        }
                    }
                    _ => {}
                }
            }
            checks.push(CheckResult::sampled("real-symmetry", ok, format!("max relative defect {worst:.3e}")));
        } else {
            checks.push(CheckResult::skipped("real-symmetry", "flag not declared"));
        }

        // Oddness: G_w(-z) = -G_w(z).
        if self.odd {
            let (ok, worst) = self.sample_oddness(&mut rng, n_samples, sample_box);
            checks.push(CheckResult::sampled("oddness", ok, format!("max relative defect {worst:.3e}")));
        } else {
            // Negative control: if the flag is off but the family is in fact
            // odd, that is fine; only a declared flag gets checked.
            checks.push(CheckResult::skipped("oddness", "flag not declared"));
        }

        // Form identities for dG/dw.
        match self.form {
            Form::Additive => {
                let mut ok = true;
                for _ in 0..n_samples {
                    let w = Complex64::new(rng.next_in(-sample_box, sample_box), 0.0);
                    let z = Complex64::new(rng.next_in(-sample_box, sample_box), 0.0);
                    let (w, z) = self.clamp_real_domain(w, z);
                    if let Ok(lw) = self.deriv_w(w, z) {
                        if (lw - ONE).norm() != 0.0 {
                            ok = false;
                        }
                    }
                }
                checks.push(CheckResult::sampled("additive-dw-is-one", ok, "dG/dw == 1 exactly".into()));
            }
            Form::Multiplicative => {
                let mut ok = true;
                let mut worst = 0.0_f64;
                for _ in 0..n_samples {
                    let w = Complex64::new(rng.next_in(0.5, sample_box), 0.0);
                    let z = Complex64::new(rng.next_in(-sample_box, sample_box), 0.0);
                    match (self.deriv_w(w, z), self.eval(w, z)) {
                        (Ok(lw), Ok(g)) => {
                            let f = g / w;
                            let d = (lw - f).norm() / f.norm().max(1.0);
                            worst = worst.max(d);
                            if d > 1e-14 {
                                ok = false;
                            }
                        }
                        _ => {}
                    }
                }
                checks.push(CheckResult::sampled(
                    "multiplicative-dw-is-f",
                    ok,
                    format!("max relative defect {worst:.3e}"),
                ));
            }
            Form::Custom => {
                checks.push(CheckResult::skipped("form-identity", "custom family"));
            }
        }

        // F-class separation V > B(0, diam D) > D needs bounded disk domains.
        match (&self.dyn_domain, self.form) {
            (Region::Disk { center, radius }, Form::Additive) => {
                let diam = 2.0 * radius;
                let reach = Complex64::new(center.0, center.1).norm() + radius;
                let ok = diam > reach;
                checks.push(CheckResult::sampled(
                    "class-f-separation",
                    ok,
                    format!("B(0, diam D) covers D: diam {diam:.3}, farthest point {reach:.3}"),
                ));
            }
            _ => checks.push(CheckResult::skipped(
                "class-f-separation",
                "no bounded disk domain declared",
            )),
        }

        // E-class condition (c): u/v stays in V; only spot checks are
        // feasible, so the verdict is recorded as sampled.
        if self.form == Form::Multiplicative {
            let mut ok = true;
            for _ in 0..n_samples {
                let u = rng.next_complex_in_disk(ZERO, sample_box);
                let v = rng.next_complex_in_disk(ZERO, sample_box);
                if v.norm() < 1e-3 {
                    continue;
                }
                if !self.dyn_domain.contains(u / v) && self.dyn_domain.contains(u) {
                    ok = false;
                }
            }
            checks.push(CheckResult::sampled("class-e-ratio", ok, "u/v membership on samples".into()));
        } else {
            checks.push(CheckResult::skipped("class-e-ratio", "not a multiplicative family"));
        }

        ValidationReport {
            family: self.id.clone(),
            checks,
        }
    }

    fn sample_oddness(&self, rng: &mut SplitMix64, n: usize, b: f64) -> (bool, f64) {
        let mut ok = true;
        let mut worst = 0.0_f64;
        for _ in 0..n {
            let w = Complex64::new(rng.next_in(-b, b), 0.0);
            let z = Complex64::new(rng.next_in(-b, b), 0.0);
            match (self.eval(w, -z), self.eval(w, z)) {
                (Ok(a), Ok(gz)) => {
                    let d = (a + gz).norm() / gz.norm().max(1.0);
                    worst = worst.max(d);
                    if d > 1e-12 {
                        ok = false;
                    }
                }
                _ => {}
            }
        }
        (ok, worst)
    }

    fn clamp_real_domain(&self, w: Complex64, z: Complex64) -> (Complex64, Complex64) {
        // Real-line-only families reject complex samples; project onto R.
        if let Region::Rectangle { im, .. } = self.dyn_domain {
            if im.1 - im.0 < 1e-6 {
                return (Complex64::new(w.re, 0.0), Complex64::new(z.re, 0.0));
            }
        }
        (w, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
    Sampled,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn sampled(name: &str, ok: bool, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            passed: ok,
            detail: format!("{detail} (sampled)"),
        }
    }

    fn skipped(name: &str, why: &str) -> Self {
        CheckResult {
            name: name.into(),
            status: CheckStatus::Skipped,
            passed: true,
            detail: why.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub family: String,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

// ---------------------------------------------------------------------------
// Builtin base maps
// ---------------------------------------------------------------------------

struct Power {
    d: u32,
}

impl BaseMap for Power {
    fn jet(&self, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
        let d = self.d as usize;
        let mut out = vec![ZERO; k + 1];
        // Binomial row: C(d, i) z^(d-i).
        let mut binom = 1.0_f64;
        for (i, slot) in out.iter_mut().enumerate().take(k + 1) {
            if i > d {
                break;
            }
            *slot = z.powu((d - i) as u32) * binom;
            binom = binom * (d - i) as f64 / (i + 1) as f64;
        }
        Ok(out)
    }
}

struct Logistic;

impl BaseMap for Logistic {
    fn jet(&self, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; k + 1];
        out[0] = z * (ONE - z);
        if k >= 1 {
            out[1] = ONE - z * 2.0;
        }
        if k >= 2 {
            out[2] = -ONE;
        }
        Ok(out)
    }
}

struct Sine;

impl BaseMap for Sine {
    fn jet(&self, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; k + 1];
        let mut fact = 1.0;
        for (i, slot) in out.iter_mut().enumerate() {
            if i > 0 {
                fact *= i as f64;
            }
            *slot = (z + Complex64::new(i as f64 * FRAC_PI_2, 0.0)).sin() / fact;
        }
        Ok(out)
    }
}

struct SineSquared;

impl BaseMap for SineSquared {
    fn jet(&self, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; k + 1];
        out[0] = z.sin() * z.sin();
        // d^i sin^2 z = 2^(i-1) sin(2z + (i-1) pi/2) for i >= 1.
        let mut fact = 1.0;
        let mut pow2 = 1.0;
        for i in 1..=k {
            fact *= i as f64;
            out[i] = (z * 2.0 + Complex64::new((i as f64 - 1.0) * FRAC_PI_2, 0.0)).sin() * pow2 / fact;
            pow2 *= 2.0;
        }
        Ok(out)
    }
}

struct ExpLogistic;

impl BaseMap for ExpLogistic {
    fn jet(&self, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
        // f = e^z - e^(2z); d^i f = e^z - 2^i e^(2z).
        let ez = z.exp();
        let e2z = (z * 2.0).exp();
        let mut out = vec![ZERO; k + 1];
        let mut fact = 1.0;
        let mut pow2 = 1.0;
        for (i, slot) in out.iter_mut().enumerate() {
            if i > 0 {
                fact *= i as f64;
                pow2 *= 2.0;
            }
            *slot = (ez - e2z * pow2) / fact;
        }
        Ok(out)
    }
}

struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl BaseMap for Polynomial {
    fn jet(&self, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
        // Repeated Horner with derivative accumulation.
        let mut out = vec![ZERO; k + 1];
        for &coeff in self.coeffs.iter().rev() {
            for i in (1..=k).rev() {
                let prev = out[i - 1];
                out[i] = out[i] * z + prev;
            }
            out[0] = out[0] * z + coeff;
        }
        Ok(out)
    }
}

/// Real-line family `b exp(-1/|x|^ell)` with the limit value 0 at 0; all
/// derivatives vanish at the flat critical point.
struct FlatExp {
    b: f64,
    ell: f64,
}

impl BaseMap for FlatExp {
    fn jet(&self, z: Complex64, k: usize) -> Result<Vec<Complex64>> {
        if z.im.abs() > 1e-9 {
            return Err(Error::Domain {
                op: "flat-add",
                detail: "family is defined on the real line only".into(),
            });
        }
        let x = z.re;
        let ax = x.abs();
        if ax == 0.0 || ax.powf(-self.ell) > 700.0 {
            return Ok(vec![ZERO; k + 1]);
        }
        // t(x) = |x|^(-ell) as a series in the deviation from x.
        let sign: f64 = if x > 0.0 { 1.0 } else { -1.0 };
        let mut t = Series::zeros(k + 1);
        let mut coeff = 1.0;
        for i in 0..=k {
            // d^i/ds^i s^(-ell) / i! at s = |x|, with the chain factor sign^i.
            t.c[i] = Complex64::new(coeff * ax.powf(-self.ell - i as f64) * sign.powi(i as i32), 0.0);
            coeff *= (-self.ell - i as f64) / (i as f64 + 1.0);
        }
        // f = b exp(-t): expand exp about -t(x).
        let t0 = t.c[0];
        let mut delta = t.scale(Complex64::new(-1.0, 0.0));
        delta.c[0] = ZERO;
        let mut exp_series = Series::zeros(k + 1);
        let mut fact = 1.0;
        for i in 0..=k {
            if i > 0 {
                fact *= i as f64;
            }
            exp_series.c[i] = (-t0).exp() / fact;
        }
        let f = exp_series.compose(&delta, k + 1).scale(Complex64::new(self.b, 0.0));
        Ok(f.c)
    }
}
