//! Complete Bernstein functions: the catalog of Laplace exponents and the
//! operations the spectral machinery needs from them.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::Error;

/// A complete Bernstein function `psi` on `[0, inf)` together with its
/// holomorphic extension to `C \ (-inf, 0]`.
pub trait LaplaceExponent: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, xi: f64) -> f64;

    fn deriv1(&self, xi: f64) -> f64;

    fn deriv2(&self, xi: f64) -> f64;

    fn eval_complex(&self, z: Complex64) -> Complex64;

    /// Boundary value `psi(-xi + i0)` for `xi > 0`, when known in closed form.
    fn boundary_upper(&self, _xi: f64) -> Option<Complex64> {
        None
    }

    /// `psi(x + h) - psi(x)` without cancellation when `h` is small.
    fn increment(&self, x: f64, h: f64) -> f64 {
        self.eval(x + h) - self.eval(x)
    }

    /// `lim psi(xi)` as `xi -> inf`; infinite for unbounded exponents.
    fn limit_at_infinity(&self) -> f64;

    fn is_unbounded(&self) -> bool {
        self.limit_at_infinity().is_infinite()
    }

    fn psi0(&self) -> f64 {
        self.eval(0.0)
    }

    /// Points `s > 0` where `s -> psi(-s + i0)` fails to be analytic
    /// (branch points and poles on the cut).
    fn cut_points(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Index of regular variation at infinity, for unbounded exponents.
    fn regular_variation_index(&self) -> Option<f64> {
        None
    }

    /// `Some(p)` when `psi(xi) = c xi^p`, so that eigenfunctions scale as
    /// `F_lambda(x) = F_1(lambda x)`.
    fn scaling_exponent(&self) -> Option<f64> {
        None
    }
}

/// One term `weight * xi / (xi + pole)` of a rational exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RationalTerm {
    pub weight: f64,
    pub pole: f64,
}

/// Serializable description of a catalog model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `xi^(alpha/2)`, `alpha` in `(0, 2]`; `alpha = 2` is Brownian motion.
    Stable { alpha: f64 },
    /// `sqrt(m^2 + xi) - m`.
    Relativistic { m: f64 },
    /// `xi^(alpha/2) + beta xi`.
    StablePlusDrift { alpha: f64, beta: f64 },
    /// `log(1 + xi)`.
    Gamma,
    /// `log(1 + log(1 + xi))`.
    LogLog,
    /// `xi / (1 + xi)`.
    CpExponential,
    Rational { terms: Vec<RationalTerm> },
    Sum { terms: Vec<ModelSpec> },
    Scaled { factor: f64, inner: Box<ModelSpec> },
}

impl ModelSpec {
    pub fn brownian() -> Self {
        ModelSpec::Stable { alpha: 2.0 }
    }

    fn validate(&self) -> Result<(), Error> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        match self {
            ModelSpec::Stable { alpha } => {
                if !(*alpha > 0.0 && *alpha <= 2.0) {
                    return bad(format!("stable index must lie in (0, 2], got {alpha}"));
                }
            }
            ModelSpec::Relativistic { m } => {
                if !(*m > 0.0 && m.is_finite()) {
                    return bad(format!("relativistic mass must be positive, got {m}"));
                }
            }
            ModelSpec::StablePlusDrift { alpha, beta } => {
                if !(*alpha > 0.0 && *alpha <= 2.0) {
                    return bad(format!("stable index must lie in (0, 2], got {alpha}"));
                }
                if !(*beta >= 0.0 && beta.is_finite()) {
                    return bad(format!("drift must be non-negative, got {beta}"));
                }
            }
            ModelSpec::Gamma | ModelSpec::LogLog | ModelSpec::CpExponential => {}
            ModelSpec::Rational { terms } => {
                if terms.is_empty() {
                    return bad("rational exponent needs at least one term".into());
                }
                for t in terms {
                    if !(t.weight > 0.0 && t.weight.is_finite() && t.pole > 0.0 && t.pole.is_finite()) {
                        return bad(format!(
                            "rational term needs positive weight and pole, got {} / {}",
                            t.weight, t.pole
                        ));
                    }
                }
            }
            ModelSpec::Sum { terms } => {
                if terms.is_empty() {
                    return bad("sum of zero exponents".into());
                }
                for t in terms {
                    t.validate()?;
                }
            }
            ModelSpec::Scaled { factor, inner } => {
                if !(*factor > 0.0 && factor.is_finite()) {
                    return bad(format!("scale factor must be positive, got {factor}"));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }
}

/// A validated catalog model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
}

pub fn build_model(spec: &ModelSpec) -> Result<Model, Error> {
    spec.validate()?;
    Ok(Model { spec: spec.clone() })
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

}

fn log1p_c(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let mut term = z;
        let mut s = Complex64::new(0.0, 0.0);
        for k in 1..=8 {
            let c = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            s += term * c;
            term *= z;
        }
        s
    } else {
        (z + 1.0).ln()
    }
}

/// Principal logarithm of a boundary value approached from the upper half-plane.
fn log_upper(w: Complex64) -> Complex64 {
    let im = if w.im > 0.0 { w.im } else { 0.0 };
    Complex64::new(w.norm().ln(), im.atan2(w.re))
}

fn stable_eval(p: f64, xi: f64) -> f64 {
    if p == 1.0 {
        xi
    } else if xi == 0.0 {
        0.0
    } else {
        xi.powf(p)
    }
}

fn stable_increment(p: f64, x: f64, h: f64) -> f64 {
    if p == 1.0 {
        h
    } else if x == 0.0 {
        stable_eval(p, h)
    } else {
        x.powf(p) * (p * (h / x).ln_1p()).exp_m1()
    }
}

fn stable_boundary(p: f64, xi: f64) -> Complex64 {
    if p == 1.0 {
        Complex64::new(-xi, 0.0)
    } else {
        let r = xi.powf(p);
        Complex64::new(r * (p * PI).cos(), r * (p * PI).sin())
    }
}

fn stable_complex(p: f64, z: Complex64) -> Complex64 {
    if p == 1.0 {
        z
    } else if z.re == 0.0 && z.im == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        (z.ln() * p).exp()
    }
}

impl ModelSpec {
    fn eval(&self, xi: f64) -> f64 {
        match self {
            ModelSpec::Stable { alpha } => stable_eval(alpha / 2.0, xi),
            ModelSpec::Relativistic { m } => xi / ((m * m + xi).sqrt() + m),
            ModelSpec::StablePlusDrift { alpha, beta } => stable_eval(alpha / 2.0, xi) + beta * xi,
            ModelSpec::Gamma => xi.ln_1p(),
            ModelSpec::LogLog => xi.ln_1p().ln_1p(),
            ModelSpec::CpExponential => xi / (1.0 + xi),
            ModelSpec::Rational { terms } => terms.iter().map(|t| t.weight * xi / (xi + t.pole)).sum(),
            ModelSpec::Sum { terms } => terms.iter().map(|t| t.eval(xi)).sum(),
            ModelSpec::Scaled { factor, inner } => factor * inner.eval(xi),
        }
    }

    fn deriv1(&self, xi: f64) -> f64 {
        match self {
            ModelSpec::Stable { alpha } => {
                let p = alpha / 2.0;
                if p == 1.0 {
                    1.0
                } else {
                    p * xi.powf(p - 1.0)
                }
            }
            ModelSpec::Relativistic { m } => 0.5 / (m * m + xi).sqrt(),
            ModelSpec::StablePlusDrift { alpha, beta } => {
                ModelSpec::Stable { alpha: *alpha }.deriv1(xi) + beta
            }
            ModelSpec::Gamma => 1.0 / (1.0 + xi),
            ModelSpec::LogLog => 1.0 / ((1.0 + xi) * (1.0 + xi.ln_1p())),
            ModelSpec::CpExponential => 1.0 / ((1.0 + xi) * (1.0 + xi)),
            ModelSpec::Rational { terms } => terms
                .iter()
                .map(|t| t.weight * t.pole / ((xi + t.pole) * (xi + t.pole)))
                .sum(),
            ModelSpec::Sum { terms } => terms.iter().map(|t| t.deriv1(xi)).sum(),
            ModelSpec::Scaled { factor, inner } => factor * inner.deriv1(xi),
        }
    }

    fn deriv2(&self, xi: f64) -> f64 {
        match self {
            ModelSpec::Stable { alpha } => {
                let p = alpha / 2.0;
                if p == 1.0 {
                    0.0
                } else {
                    p * (p - 1.0) * xi.powf(p - 2.0)
                }
            }
            ModelSpec::Relativistic { m } => {
                let s = m * m + xi;
                -0.25 / (s * s.sqrt())
            }
            ModelSpec::StablePlusDrift { alpha, .. } => ModelSpec::Stable { alpha: *alpha }.deriv2(xi),
            ModelSpec::Gamma => -1.0 / ((1.0 + xi) * (1.0 + xi)),
            ModelSpec::LogLog => {
                let g = xi.ln_1p();
                let a = (1.0 + xi) * (1.0 + g);
                -(2.0 + g) / (a * a)
            }
            ModelSpec::CpExponential => -2.0 / ((1.0 + xi) * (1.0 + xi) * (1.0 + xi)),
            ModelSpec::Rational { terms } => terms
                .iter()
                .map(|t| {
                    let d = xi + t.pole;
                    -2.0 * t.weight * t.pole / (d * d * d)
                })
                .sum(),
            ModelSpec::Sum { terms } => terms.iter().map(|t| t.deriv2(xi)).sum(),
            ModelSpec::Scaled { factor, inner } => factor * inner.deriv2(xi),
        }
    }

    fn eval_complex(&self, z: Complex64) -> Complex64 {
        match self {
            ModelSpec::Stable { alpha } => stable_complex(alpha / 2.0, z),
            ModelSpec::Relativistic { m } => z / ((z + m * m).sqrt() + m),
            ModelSpec::StablePlusDrift { alpha, beta } => stable_complex(alpha / 2.0, z) + z * *beta,
            ModelSpec::Gamma => log1p_c(z),
            ModelSpec::LogLog => log1p_c(log1p_c(z)),
            ModelSpec::CpExponential => z / (z + 1.0),
            ModelSpec::Rational { terms } => terms
                .iter()
                .map(|t| z * t.weight / (z + t.pole))
                .fold(Complex64::new(0.0, 0.0), |a, b| a + b),
            ModelSpec::Sum { terms } => terms
                .iter()
                .map(|t| t.eval_complex(z))
                .fold(Complex64::new(0.0, 0.0), |a, b| a + b),
            ModelSpec::Scaled { factor, inner } => inner.eval_complex(z) * *factor,
        }
    }

    fn boundary_upper(&self, xi: f64) -> Option<Complex64> {
        let real = |x: f64| Some(Complex64::new(x, 0.0));
        match self {
            ModelSpec::Stable { alpha } => Some(stable_boundary(alpha / 2.0, xi)),
            ModelSpec::Relativistic { m } => {
                let m2 = m * m;
                if xi < m2 {
                    real(-xi / ((m2 - xi).sqrt() + m))
                } else {
                    Some(Complex64::new(-m, (xi - m2).sqrt()))
                }
            }
            ModelSpec::StablePlusDrift { alpha, beta } => {
                Some(stable_boundary(alpha / 2.0, xi) - beta * xi)
            }
            ModelSpec::Gamma => Some(gamma_boundary(xi)),
            ModelSpec::LogLog => Some(log_upper(gamma_boundary(xi) + 1.0)),
            ModelSpec::CpExponential => real(-xi / (1.0 - xi)),
            ModelSpec::Rational { terms } => {
                real(terms.iter().map(|t| -t.weight * xi / (t.pole - xi)).sum())
            }
            ModelSpec::Sum { terms } => {
                let mut s = Complex64::new(0.0, 0.0);
                for t in terms {
                    s += t.boundary_upper(xi)?;
                }
                Some(s)
            }
            ModelSpec::Scaled { factor, inner } => inner.boundary_upper(xi).map(|v| v * *factor),
        }
    }

    fn increment(&self, x: f64, h: f64) -> f64 {
        match self {
            ModelSpec::Stable { alpha } => stable_increment(alpha / 2.0, x, h),
            ModelSpec::Relativistic { m } => {
                let m2 = m * m;
                h / ((m2 + x + h).sqrt() + (m2 + x).sqrt())
            }
            ModelSpec::StablePlusDrift { alpha, beta } => stable_increment(alpha / 2.0, x, h) + beta * h,
            ModelSpec::Gamma => (h / (1.0 + x)).ln_1p(),
            ModelSpec::LogLog => {
                let dg = (h / (1.0 + x)).ln_1p();
                (dg / (1.0 + x.ln_1p())).ln_1p()
            }
            ModelSpec::CpExponential => h / ((1.0 + x) * (1.0 + x + h)),
            ModelSpec::Rational { terms } => terms
                .iter()
                .map(|t| t.weight * t.pole * h / ((x + t.pole) * (x + h + t.pole)))
                .sum(),
            ModelSpec::Sum { terms } => terms.iter().map(|t| t.increment(x, h)).sum(),
            ModelSpec::Scaled { factor, inner } => factor * inner.increment(x, h),
        }
    }

    fn limit_at_infinity(&self) -> f64 {
        match self {
            ModelSpec::CpExponential => 1.0,
            ModelSpec::Rational { terms } => terms.iter().map(|t| t.weight).sum(),
            ModelSpec::Sum { terms } => terms.iter().map(|t| t.limit_at_infinity()).sum(),
            ModelSpec::Scaled { factor, inner } => factor * inner.limit_at_infinity(),
            _ => f64::INFINITY,
        }
    }

    fn cut_points(&self, out: &mut Vec<f64>) {
        match self {
            ModelSpec::Relativistic { m } => out.push(m * m),
            ModelSpec::Gamma | ModelSpec::CpExponential => out.push(1.0),
            ModelSpec::LogLog => {
                out.push(1.0 - (-1.0f64).exp());
                out.push(1.0);
            }
            ModelSpec::Rational { terms } => out.extend(terms.iter().map(|t| t.pole)),
            ModelSpec::Sum { terms } => terms.iter().for_each(|t| t.cut_points(out)),
            ModelSpec::Scaled { inner, .. } => inner.cut_points(out),
            _ => {}
        }
    }

    fn regular_variation_index(&self) -> Option<f64> {
        match self {
            ModelSpec::Stable { alpha } => Some(alpha / 2.0),
            ModelSpec::Relativistic { .. } => Some(0.5),
            ModelSpec::StablePlusDrift { alpha, beta } => Some(if *beta > 0.0 { 1.0 } else { alpha / 2.0 }),
            ModelSpec::Gamma | ModelSpec::LogLog => Some(0.0),
            ModelSpec::CpExponential | ModelSpec::Rational { .. } => None,
            ModelSpec::Sum { terms } => {
                let mut best: Option<f64> = None;
                for t in terms {
                    if t.limit_at_infinity().is_infinite() {
                        let r = t.regular_variation_index()?;
                        best = Some(best.map_or(r, |b: f64| b.max(r)));
                    }
                }
                best
            }
            ModelSpec::Scaled { inner, .. } => inner.regular_variation_index(),
        }
    }

    fn name(&self) -> String {
        match self {
            ModelSpec::Stable { alpha } if *alpha == 2.0 => "brownian".into(),
            ModelSpec::Stable { alpha } => format!("stable(alpha={alpha})"),
            ModelSpec::Relativistic { m } => format!("relativistic(m={m})"),
            ModelSpec::StablePlusDrift { alpha, beta } => format!("stable_plus_drift(alpha={alpha},beta={beta})"),
            ModelSpec::Gamma => "gamma".into(),
            ModelSpec::LogLog => "log_log".into(),
            ModelSpec::CpExponential => "cp_exponential".into(),
            ModelSpec::Rational { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| format!("{}/{}", t.weight, t.pole)).collect();
                format!("rational({})", parts.join(","))
            }
            ModelSpec::Sum { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| t.name()).collect();
                parts.join("+")
            }
            ModelSpec::Scaled { factor, inner } => format!("{factor}*({})", inner.name()),
        }
    }
}

fn gamma_boundary(xi: f64) -> Complex64 {
    if xi < 1.0 {
        Complex64::new((-xi).ln_1p(), 0.0)
    } else {
        Complex64::new((xi - 1.0).ln(), PI)
    }
}

impl LaplaceExponent for Model {
    fn scaling_exponent(&self) -> Option<f64> {
        fn walk(s: &ModelSpec) -> Option<f64> {
            match s {
                ModelSpec::Stable { alpha } => Some(alpha / 2.0),
                ModelSpec::Scaled { inner, .. } => walk(inner),
                _ => None,
            }
        }
        walk(&self.spec)
    }
    fn name(&self) -> String {
        self.spec.name()
    }
    fn eval(&self, xi: f64) -> f64 {
        self.spec.eval(xi)
    }
    fn deriv1(&self, xi: f64) -> f64 {
        self.spec.deriv1(xi)
    }
    fn deriv2(&self, xi: f64) -> f64 {
        self.spec.deriv2(xi)
    }
    fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.spec.eval_complex(z)
    }
    fn boundary_upper(&self, xi: f64) -> Option<Complex64> {
        self.spec.boundary_upper(xi)
    }
    fn increment(&self, x: f64, h: f64) -> f64 {
        self.spec.increment(x, h)
    }
    fn limit_at_infinity(&self) -> f64 {
        self.spec.limit_at_infinity()
    }
    fn cut_points(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.spec.cut_points(&mut v);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    }
    fn regular_variation_index(&self) -> Option<f64> {
        if self.is_unbounded() {
            self.spec.regular_variation_index()
        } else {
            None
        }
    }
}

/// Boundary value `psi(-xi + i0)`, from the closed form when available and
/// otherwise by Richardson extrapolation of `psi(-xi + i eps)`.
pub fn boundary_value(psi: &dyn LaplaceExponent, xi: f64) -> Complex64 {
    if let Some(v) = psi.boundary_upper(xi) {
        return v;
    }
    let eps = 1e-7 * xi.max(1e-300);
    let f1 = psi.eval_complex(Complex64::new(-xi, eps));
    let f2 = psi.eval_complex(Complex64::new(-xi, 2.0 * eps));
    f1 * 2.0 - f2
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest violation found (0 when none); units depend on the check.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub model: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub(crate) fn push(&mut self, name: &str, worst: f64, limit: f64) {
        self.checks.push(Check {
            name: name.into(),
            passed: worst <= limit,
            worst,
        });
    }
}

/// Logarithmic grid of `n` points between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if n == 1 {
                lo
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Numerical checks of the complete Bernstein property and of the internal
/// consistency of a model on a logarithmic grid.
pub fn validate_cbf(psi: &dyn LaplaceExponent, grid: &[f64]) -> ValidationReport {
    let mut r = ValidationReport {
        model: psi.name(),
        checks: Vec::new(),
    };
    let tiny = 1e-12;
    let mut sign = 0.0f64;
    let mut est_a = 0.0f64;
    let mut est_b = 0.0f64;
    let mut fd = 0.0f64;
    let mut inc = 0.0f64;
    for &xi in grid {
        let (v, d1, d2) = (psi.eval(xi), psi.deriv1(xi), psi.deriv2(xi));
        sign = sign.max((-v).max(0.0) / (v.abs() + tiny));
        sign = sign.max((-d1).max(0.0) / (d1.abs() + tiny));
        sign = sign.max(d2.max(0.0) / (d2.abs() + tiny));
        // 0 <= xi psi' <= psi and 0 <= -xi psi'' <= 2 psi'
        est_a = est_a.max((xi * d1 - v) / v.abs().max(tiny)).max(-xi * d1 / v.abs().max(tiny));
        est_b = est_b
            .max((-xi * d2 - 2.0 * d1) / d1.abs().max(tiny))
            .max(xi * d2 / d1.abs().max(tiny));
        let h = 1e-4 * xi;
        let c1 = (psi.increment(xi, h) - psi.increment(xi, -h)) / (2.0 * h);
        let h2 = 1e-3 * xi;
        let c2 = (psi.increment(xi, h2) + psi.increment(xi, -h2)) / (h2 * h2);
        fd = fd.max((c1 - d1).abs() / d1.abs().max(tiny));
        if d2 != 0.0 {
            fd = fd.max((c2 - d2).abs() / d2.abs().max(tiny));
        } else {
            fd = fd.max(c2.abs() * xi / d1.abs().max(tiny));
        }
        let direct = psi.eval(xi * 1.5) - v;
        inc = inc.max((psi.increment(xi, 0.5 * xi) - direct).abs() / psi.eval(1.5 * xi).max(tiny));
    }
    r.push("signs: psi >= 0, psi' >= 0, psi'' <= 0", sign, 0.0);
    r.push("0 <= xi psi' <= psi", est_a, 1e-10);
    r.push("0 <= -xi psi'' <= 2 psi'", est_b, 1e-10);
    r.push("derivatives agree with finite differences", fd, 1e-5);
    r.push("increment agrees with direct difference", inc, 1e-12);

    let mut real_axis = 0.0f64;
    let mut conj = 0.0f64;
    let mut upper = 0.0f64;
    let mut sector = 0.0f64;
    let mut boundary = 0.0f64;
    let cuts = psi.cut_points();
    let eps_angle: f64 = 0.1;
    for &xi in grid {
        let v = psi.eval(xi);
        let w = psi.eval_complex(Complex64::new(xi, 0.0));
        real_axis = real_axis.max((w - v).norm() / v.abs().max(tiny));
        for k in 1..8 {
            let theta = PI * k as f64 / 8.0;
            let z = Complex64::from_polar(xi, theta);
            let a = psi.eval_complex(z);
            let b = psi.eval_complex(z.conj());
            conj = conj.max((a.conj() - b).norm() / a.norm().max(tiny));
            upper = upper.max(-a.im / a.norm().max(tiny));
            if theta <= PI - eps_angle {
                let bound = psi.eval(xi) / (eps_angle / 2.0).sin();
                sector = sector.max((a.norm() - bound) / bound.max(tiny));
            }
        }
        let near_cut = cuts.iter().any(|&c| (xi - c).abs() < 1e-3 * c);
        if !near_cut {
            if let Some(b) = psi.boundary_upper(xi) {
                let eps = 1e-9 * xi;
                let f1 = psi.eval_complex(Complex64::new(-xi, eps));
                let f2 = psi.eval_complex(Complex64::new(-xi, 2.0 * eps));
                let rich = f1 * 2.0 - f2;
                boundary = boundary.max((rich - b).norm() / b.norm().max(1e-8));
            }
        }
    }
    r.push("complex extension agrees on the real axis", real_axis, 1e-12);
    r.push("conjugate symmetry", conj, 1e-12);
    r.push("upper half-plane maps into closed upper half-plane", upper, 1e-12);
    r.push("sector bound |psi(z)| <= psi(|z|) / sin(eps/2)", sector, 0.0);
    r.push("boundary values agree with the extension", boundary, 1e-5);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn catalog() -> Vec<Model> {
        let specs = vec![
            ModelSpec::Stable { alpha: 0.5 },
            ModelSpec::Stable { alpha: 1.0 },
            ModelSpec::Stable { alpha: 1.5 },
            ModelSpec::brownian(),
            ModelSpec::Relativistic { m: 1.0 },
            ModelSpec::StablePlusDrift { alpha: 1.0, beta: 0.5 },
            ModelSpec::Gamma,
            ModelSpec::LogLog,
            ModelSpec::CpExponential,
            ModelSpec::Rational {
                terms: vec![RationalTerm { weight: 5.0, pole: 1.0 }, RationalTerm { weight: 1.0, pole: 5.0 }],
            },
            ModelSpec::Sum {
                terms: vec![ModelSpec::Stable { alpha: 1.0 }, ModelSpec::Gamma],
            },
            ModelSpec::Scaled {
                factor: 3.0,
                inner: Box::new(ModelSpec::Relativistic { m: 2.0 }),
            },
        ];
        specs.iter().map(|s| build_model(s).unwrap()).collect()
    }

    #[test]
    fn every_catalog_entry_validates() {
        let grid = log_grid(1e-6, 1e6, 61);
        for m in catalog() {
            let r = validate_cbf(&m, &grid);
            for c in &r.checks {
                assert!(c.passed, "{}: {} worst {}", r.model, c.name, c.worst);
            }
        }
    }

    struct FlippedCurvature(Model);

    impl LaplaceExponent for FlippedCurvature {
        fn name(&self) -> String {
            "flipped".into()
        }
        fn eval(&self, xi: f64) -> f64 {
            self.0.eval(xi)
        }
        fn deriv1(&self, xi: f64) -> f64 {
            self.0.deriv1(xi)
        }
        fn deriv2(&self, xi: f64) -> f64 {
            -self.0.deriv2(xi)
        }
        fn eval_complex(&self, z: Complex64) -> Complex64 {
            self.0.eval_complex(z)
        }
        fn limit_at_infinity(&self) -> f64 {
            self.0.limit_at_infinity()
        }
    }

    #[test]
    fn corrupted_second_derivative_is_rejected() {
        let m = FlippedCurvature(build_model(&ModelSpec::Relativistic { m: 1.0 }).unwrap());
        let r = validate_cbf(&m, &log_grid(1e-3, 1e3, 25));
        assert!(!r.passed());
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(build_model(&ModelSpec::Stable { alpha: 2.5 }).is_err());
        assert!(build_model(&ModelSpec::Stable { alpha: 0.0 }).is_err());
        assert!(build_model(&ModelSpec::Relativistic { m: -1.0 }).is_err());
        assert!(build_model(&ModelSpec::Sum { terms: vec![] }).is_err());
        assert!(build_model(&ModelSpec::Rational { terms: vec![RationalTerm { weight: 1.0, pole: 0.0 }] }).is_err());
    }

    #[test]
    fn closed_form_boundary_values() {
        let rel = build_model(&ModelSpec::Relativistic { m: 1.0 }).unwrap();
        let b = rel.boundary_upper(5.0).unwrap();
        assert!((b - Complex64::new(-1.0, 2.0)).norm() < 1e-15);
        let g = build_model(&ModelSpec::Gamma).unwrap();
        let b = g.boundary_upper(3.0).unwrap();
        assert!((b - Complex64::new(2f64.ln(), PI)).norm() < 1e-15);
        let s = build_model(&ModelSpec::Stable { alpha: 1.0 }).unwrap();
        let b = s.boundary_upper(4.0).unwrap();
        assert!((b - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        // the two-pole example takes the value 8/3 at 1 and at -4 + i0
        let r = build_model(&ModelSpec::Rational {
            terms: vec![RationalTerm { weight: 5.0, pole: 1.0 }, RationalTerm { weight: 1.0, pole: 5.0 }],
        })
        .unwrap();
        assert!((r.eval(1.0) - 8.0 / 3.0).abs() < 1e-15);
        assert!((r.boundary_upper(4.0).unwrap().re - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn fallback_boundary_value_uses_extension() {
        let ll = build_model(&ModelSpec::LogLog).unwrap();
        struct NoBoundary<'a>(&'a Model);
        impl LaplaceExponent for NoBoundary<'_> {
            fn name(&self) -> String {
                "nb".into()
            }
            fn eval(&self, xi: f64) -> f64 {
                self.0.eval(xi)
            }
            fn deriv1(&self, xi: f64) -> f64 {
                self.0.deriv1(xi)
            }
            fn deriv2(&self, xi: f64) -> f64 {
                self.0.deriv2(xi)
            }
            fn eval_complex(&self, z: Complex64) -> Complex64 {
                self.0.eval_complex(z)
            }
            fn limit_at_infinity(&self) -> f64 {
                f64::INFINITY
            }
        }
        for &xi in &[0.3, 0.8, 2.0, 50.0] {
            let exact = ll.boundary_upper(xi).unwrap();
            let approx = boundary_value(&NoBoundary(&ll), xi);
            assert!((exact - approx).norm() < 1e-6, "{xi}: {exact} vs {approx}");
        }
    }

    fn arb_spec() -> impl Strategy<Value = ModelSpec> {
        let leaf = prop_oneof![
            (0.05f64..=2.0).prop_map(|alpha| ModelSpec::Stable { alpha }),
            (0.01f64..10.0).prop_map(|m| ModelSpec::Relativistic { m }),
            (0.05f64..=2.0, 0.0f64..5.0).prop_map(|(alpha, beta)| ModelSpec::StablePlusDrift { alpha, beta }),
            Just(ModelSpec::Gamma),
            Just(ModelSpec::LogLog),
            Just(ModelSpec::CpExponential),
            prop::collection::vec((0.01f64..10.0, 0.01f64..10.0), 1..4).prop_map(|v| ModelSpec::Rational {
                terms: v.into_iter().map(|(weight, pole)| RationalTerm { weight, pole }).collect()
            }),
        ];
        leaf.prop_recursive(2, 8, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 1..3).prop_map(|terms| ModelSpec::Sum { terms }),
                (0.1f64..10.0, inner).prop_map(|(factor, i)| ModelSpec::Scaled { factor, inner: Box::new(i) }),
            ]
        })
    }

    proptest! {
        #[test]
        fn cbf_estimates_hold(spec in arb_spec(), lx in -6.0f64..6.0) {
            let m = build_model(&spec).unwrap();
            let xi = 10f64.powf(lx);
            let (v, d1, d2) = (m.eval(xi), m.deriv1(xi), m.deriv2(xi));
            prop_assert!(v >= 0.0 && d1 >= 0.0 && d2 <= 0.0);
            prop_assert!(xi * d1 <= v * (1.0 + 1e-12));
            prop_assert!(-xi * d2 <= 2.0 * d1 * (1.0 + 1e-12));
        }

        #[test]
        fn increment_is_consistent(spec in arb_spec(), lx in -4.0f64..4.0, r in -0.9f64..3.0) {
            let m = build_model(&spec).unwrap();
            let x = 10f64.powf(lx);
            let direct = m.eval(x + r * x) - m.eval(x);
            let inc = m.increment(x, r * x);
            prop_assert!((inc - direct).abs() <= 1e-10 * m.eval(x).max(m.eval(x + r * x)) + 1e-300);
        }

        #[test]
        fn extension_maps_upper_half_plane_to_itself(spec in arb_spec(), lr in -4.0f64..4.0, th in 0.01f64..3.13) {
            let m = build_model(&spec).unwrap();
            let z = Complex64::from_polar(10f64.powf(lr), th);
            let w = m.eval_complex(z);
            prop_assert!(w.im >= -1e-12 * w.norm());
            let wc = m.eval_complex(z.conj());
            prop_assert!((wc - w.conj()).norm() <= 1e-12 * w.norm().max(1e-300));
        }
    }
}
