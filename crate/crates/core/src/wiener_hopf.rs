//! The auxiliary exponent `psi_lambda`, its Wiener-Hopf factor
//! `psi_lambda^dagger`, the phase shift `theta_lambda` and the normalisation
//! constant of the Laplace transform.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cbf::LaplaceExponent;
use crate::numerics::{integrate_de, DeRule, QuadratureResult, Tolerance};
use crate::Error;

/// Relative distance to `lambda^2` below which `psi_lambda` is replaced by its
/// first-order Taylor polynomial.
const REMOVABLE_RADIUS: f64 = 1e-7;

/// Everything that depends only on `psi` and `lambda`.
#[derive(Clone, Copy)]
pub struct WhContext<'a> {
    pub psi: &'a dyn LaplaceExponent,
    pub lambda: f64,
    /// `psi(lambda^2)`, `psi'(lambda^2)`, `psi''(lambda^2)`.
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub tol: Tolerance,
    pub rule: DeRule,
}

impl core::fmt::Debug for WhContext<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("WhContext")
            .field("psi", &self.psi.name())
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl<'a> WhContext<'a> {
    pub fn new(psi: &'a dyn LaplaceExponent, lambda: f64) -> Result<Self, Error> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        let l2 = lambda * lambda;
        let (p0, p1, p2) = (psi.eval(l2), psi.deriv1(l2), psi.deriv2(l2));
        if !(p0 > 0.0 && p1 > 0.0 && p0.is_finite() && p1.is_finite() && p2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "psi must be positive and strictly increasing at lambda^2 = {l2}"
            )));
        }
        Ok(WhContext {
            psi,
            lambda,
            p0,
            p1,
            p2,
            tol: Tolerance::new(1e-12, 1e-12),
            rule: DeRule::default(),
        })
    }

    /// `psi_lambda(lambda^2) = psi(lambda^2) / (lambda^2 psi'(lambda^2))`.
    pub fn value_at_lambda(&self) -> f64 {
        self.p0 / (self.lambda * self.lambda * self.p1)
    }

    /// `psi_lambda'(lambda^2) = psi |psi''| / (2 lambda^2 psi'^2)`.
    pub fn slope_at_lambda(&self) -> f64 {
        self.p0 * self.p2.abs() / (2.0 * self.lambda * self.lambda * self.p1 * self.p1)
    }

    /// `psi_lambda(xi)` given both `xi` and `r = xi / lambda^2 - 1`; whichever
    /// is the more accurate description of the point is used.
    pub fn psi_lambda_at(&self, xi: f64, r: f64) -> f64 {
        let l2 = self.lambda * self.lambda;
        if r.abs() < REMOVABLE_RADIUS {
            self.value_at_lambda() + l2 * r * self.slope_at_lambda()
        } else if r.abs() < 0.5 {
            r * self.p0 / self.psi.increment(l2, l2 * r)
        } else {
            -r * self.p0 / (self.p0 - self.psi.eval(xi))
        }
    }

    /// `psi_lambda(lambda^2 (1 + r))`, accurate for small `r`.
    pub fn psi_lambda_rel(&self, r: f64) -> f64 {
        let l2 = self.lambda * self.lambda;
        self.psi_lambda_at(l2 * (1.0 + r), r)
    }

    /// `psi_lambda(xi) = (1 - xi / lambda^2) / (1 - psi(xi) / psi(lambda^2))`.
    pub fn psi_lambda(&self, xi: f64) -> f64 {
        self.psi_lambda_at(xi, xi / (self.lambda * self.lambda) - 1.0)
    }

    pub fn psi_lambda_complex(&self, z: Complex64) -> Complex64 {
        let l2 = self.lambda * self.lambda;
        let r = z / l2 - 1.0;
        if r.norm() < REMOVABLE_RADIUS {
            return Complex64::new(self.value_at_lambda(), 0.0) + r * (l2 * self.slope_at_lambda());
        }
        -r / (-(self.psi.eval_complex(z) - self.p0) / self.p0)
    }

    /// `log psi_lambda(zeta^2)`.
    pub fn log_psi_lambda_sq(&self, zeta: f64) -> f64 {
        let u = zeta / self.lambda;
        self.psi_lambda_at(zeta * zeta, (u - 1.0) * (u + 1.0)).ln()
    }

    /// `c_lambda = sqrt(lambda^4 psi'(lambda^2) / psi(lambda^2))`.
    pub fn c_lambda(&self) -> f64 {
        let l2 = self.lambda * self.lambda;
        l2 * (self.p1 / self.p0).sqrt()
    }

    /// Phase shift `theta_lambda` in `[0, pi/2)`.
    pub fn theta(&self) -> Result<f64, Error> {
        // limit of the integrand at z = 1
        let at_one = -self.lambda * self.lambda * self.p2 / self.p1;
        let q = integrate_de(
            |z: f64, _, one_minus_z: f64| {
                let q = one_minus_z * (1.0 + z);
                if q < REMOVABLE_RADIUS {
                    return at_one;
                }
                let l2 = self.lambda * self.lambda;
                let outer = self.psi_lambda_at(l2 / (z * z), q / (z * z));
                let inner = self.psi_lambda_at(l2 * z * z, -q);
                (outer / inner).ln() / q
            },
            0.0,
            1.0,
            self.tol,
            &self.rule,
        )?;
        require(&q)?;
        Ok(q.value / PI)
    }

    /// Scales in `zeta` where `log psi_lambda(zeta^2)` changes character.
    fn scales(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.psi.cut_points().iter().map(|c| c.sqrt()).collect();
        v.push(self.lambda);
        v
    }

    /// `psi_lambda^dagger(xi)` for real `xi >= 0`.
    pub fn psi_dagger_real(&self, xi: f64) -> Result<f64, Error> {
        let l = |zeta: f64| self.log_psi_lambda_sq(zeta);
        dagger_real(&l, &self.scales(), xi, self.tol, &self.rule)
    }

    /// `psi_lambda^dagger(xi)` for `Re xi > 0`.
    pub fn psi_dagger(&self, xi: Complex64) -> Result<Complex64, Error> {
        if xi.im == 0.0 {
            return self.psi_dagger_real(xi.re).map(|v| Complex64::new(v, 0.0));
        }
        let l = |zeta: f64| self.log_psi_lambda_sq(zeta);
        dagger_complex(&l, &self.scales(), xi, self.tol, &self.rule)
    }

    /// `psi_lambda^dagger(i eta + 0)`, from `i eta + eps` with one Richardson step.
    pub fn psi_dagger_boundary(&self, eta: f64) -> Result<Complex64, Error> {
        let eps = 1e-6 * eta.abs().max(self.lambda);
        let f1 = self.psi_dagger(Complex64::new(eps, eta))?;
        let f2 = self.psi_dagger(Complex64::new(2.0 * eps, eta))?;
        Ok(f1 * 2.0 - f2)
    }
}

/// `log psi_lambda(zeta^2)` tabulated on a uniform grid in `u = log zeta`,
/// from which `psi_lambda^dagger` at many real points is a cheap sum.
///
/// The integrand `L(e^u) / (2 cosh(u - log xi))` is analytic in the strip
/// `|Im u| < pi/2`, so the trapezoid rule with step `h` has error of order
/// `exp(-pi^2 / h)`.
#[derive(Debug, Clone)]
pub struct DaggerGrid {
    step: f64,
    start: f64,
    zeta: Vec<f64>,
    log_psi: Vec<f64>,
    lo: f64,
    hi: f64,
}

/// Terms further than this from `log xi` (in `log zeta`) are below
/// `exp(-40)` relative and are skipped.
const WINDOW: f64 = 40.0;

impl DaggerGrid {
    pub const STEP: f64 = 0.25;

    /// Valid for `xi` in `[xi_min, xi_max]`.
    pub fn new(ctx: &WhContext<'_>, xi_min: f64, xi_max: f64) -> Self {
        let mut lo = xi_min.ln().min(ctx.lambda.ln());
        let mut hi = xi_max.ln().max(ctx.lambda.ln());
        for c in ctx.psi.cut_points() {
            let u = 0.5 * c.ln();
            lo = lo.min(u);
            hi = hi.max(u);
        }
        let (a, b) = (lo - LOG_MARGIN, hi + LOG_MARGIN);
        let n = ((b - a) / Self::STEP).ceil() as usize + 1;
        let mut zeta = Vec::with_capacity(n);
        let mut log_psi = Vec::with_capacity(n);
        for j in 0..n {
            let z = (a + j as f64 * Self::STEP).exp();
            zeta.push(z);
            log_psi.push(ctx.log_psi_lambda_sq(z));
        }
        DaggerGrid {
            step: Self::STEP,
            start: a,
            zeta,
            log_psi,
            lo: xi_min,
            hi: xi_max,
        }
    }

    pub fn covers(&self, xi: f64) -> bool {
        xi >= self.lo && xi <= self.hi
    }

    /// `psi_lambda^dagger(xi)` for real `xi` inside the covered range.
    pub fn eval(&self, xi: f64) -> f64 {
        let inv = 1.0 / xi;
        let v = xi.ln();
        let n = self.zeta.len();
        let first = (((v - WINDOW - self.start) / self.step).floor().max(0.0) as usize).min(n);
        let last = (((v + WINDOW - self.start) / self.step).ceil().max(0.0) as usize + 1).min(n);
        let mut s = 0.0;
        for (z, l) in self.zeta[first..last].iter().zip(&self.log_psi[first..last]) {
            let r = z * inv;
            s += l / (r + 1.0 / r);
        }
        (s * self.step / PI).exp()
    }
}

fn require<T>(q: &QuadratureResult<T>) -> Result<(), Error>
where
    T: crate::numerics::Scalar,
{
    if q.converged {
        Ok(())
    } else {
        Err(Error::NonConvergence {
            value: q.value.magnitude(),
            error: q.error_estimate,
            evaluations: q.evaluations,
        })
    }
}

/// Width, in `log zeta`, kept on either side of the outermost scale; the
/// integrand decays like `|u| exp(-|u|)` beyond it.
const LOG_MARGIN: f64 = 45.0;

/// `(1/pi) int_0^inf xi L(zeta) / (xi^2 + zeta^2) d zeta` with
/// `L(zeta) = log psi(zeta^2)`, integrated in `u = log zeta` with breakpoints
/// at every scale where the integrand changes character.
///
/// Close to the imaginary axis (`|Im xi| > Re xi`) the kernel has a peak of
/// width `Re xi` at `zeta = |Im xi|`; there `L(|Im xi|)` is subtracted on
/// `(0, 2 |Im xi|)` and its integral is added back in closed form.
fn dagger_exponent<L: Fn(f64) -> f64>(
    l: &L,
    scales: &[f64],
    xi: Complex64,
    tol: Tolerance,
    rule: &DeRule,
) -> Result<Complex64, Error> {
    if !(xi.re > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dagger transform needs Re xi > 0, got {xi}"
        )));
    }
    let a = xi.re;
    let b = xi.im.abs();
    let s = if xi.im >= 0.0 { 1.0 } else { -1.0 };
    let near_axis = b > a;
    let mut cuts: Vec<f64> = scales.iter().filter(|x| **x > 0.0 && x.is_finite()).map(|x| x.ln()).collect();
    cuts.push(xi.norm().ln());
    let (ln_b, ln_2b, lb) = if near_axis {
        let ln_b = b.ln();
        cuts.push(ln_b);
        cuts.push(ln_b + core::f64::consts::LN_2);
        (ln_b, ln_b + core::f64::consts::LN_2, l(b))
    } else {
        (f64::NAN, f64::NAN, 0.0)
    };
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let lo = cuts[0] - LOG_MARGIN;
    let hi = cuts[cuts.len() - 1] + LOG_MARGIN;
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(lo);
    bounds.extend_from_slice(&cuts);
    bounds.push(hi);

    let piece_tol = Tolerance::new(tol.abs / bounds.len() as f64, tol.rel);
    let mut total = Complex64::new(0.0, 0.0);
    for w in bounds.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        let subtract = near_axis && u1 <= ln_2b + 1e-15;
        let q = integrate_de(
            |u: f64, fa: f64, fb: f64| {
                let zeta = u.exp();
                if near_axis {
                    let zb = if u0 == ln_b {
                        b * fa.exp_m1()
                    } else if u1 == ln_b {
                        b * (-fb).exp_m1()
                    } else {
                        zeta - b
                    };
                    let den = Complex64::new(zb, s * a) * Complex64::new(zeta + b, -s * a);
                    let lz = if subtract { l(zeta) - lb } else { l(zeta) };
                    xi * (zeta * lz) / den
                } else {
                    xi * (zeta * l(zeta)) / (xi * xi + zeta * zeta)
                }
            },
            u0,
            u1,
            piece_tol,
            rule,
        )?;
        require(&q)?;
        total += q.value;
    }
    if near_axis {
        total += (Complex64::new(2.0 * b, 0.0) / xi).atan() * lb;
    }
    Ok(total / PI)
}

fn dagger_real<L: Fn(f64) -> f64>(
    l: &L,
    scales: &[f64],
    xi: f64,
    tol: Tolerance,
    rule: &DeRule,
) -> Result<f64, Error> {
    if xi == 0.0 {
        return Ok(l(0.0).exp().sqrt());
    }
    let mut cuts: Vec<f64> = scales.iter().filter(|x| **x > 0.0 && x.is_finite()).map(|x| x.ln()).collect();
    cuts.push(xi.ln());
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(cuts[0] - LOG_MARGIN);
    bounds.extend_from_slice(&cuts);
    bounds.push(cuts[cuts.len() - 1] + LOG_MARGIN);
    let piece_tol = Tolerance::new(tol.abs / bounds.len() as f64, tol.rel);
    let mut total = 0.0;
    for w in bounds.windows(2) {
        let q = integrate_de(
            |u: f64, _, _| {
                let zeta = u.exp();
                let r = zeta / xi;
                // xi zeta / (xi^2 + zeta^2) = 1 / (r + 1/r)
                l(zeta) / (r + 1.0 / r)
            },
            w[0],
            w[1],
            piece_tol,
            rule,
        )?;
        require(&q)?;
        total += q.value;
    }
    Ok((total / PI).exp())
}

fn dagger_complex<L: Fn(f64) -> f64>(
    l: &L,
    scales: &[f64],
    xi: Complex64,
    tol: Tolerance,
    rule: &DeRule,
) -> Result<Complex64, Error> {
    dagger_exponent(l, scales, xi, tol, rule).map(|e| e.exp())
}

/// `psi^dagger(xi)` of an arbitrary exponent, for `Re xi > 0`.
pub fn psi_dagger(psi: &dyn LaplaceExponent, xi: Complex64, tol: Tolerance) -> Result<Complex64, Error> {
    let l = |zeta: f64| psi.eval(zeta * zeta).ln();
    let rule = DeRule::default();
    let scales: Vec<f64> = psi.cut_points().iter().map(|c| c.sqrt()).collect();
    if xi.im == 0.0 {
        dagger_real(&l, &scales, xi.re, tol, &rule).map(|v| Complex64::new(v, 0.0))
    } else {
        dagger_complex(&l, &scales, xi, tol, &rule)
    }
}

/// `psi^dagger(xi)` on `C \ (-inf, 0]` through
/// `exp((1/pi) int_0^inf sqrt(xi) log psi(xi s^2) / (xi + s^2) ds)`.
pub fn psi_dagger_extended(
    psi: &dyn LaplaceExponent,
    xi: Complex64,
    tol: Tolerance,
) -> Result<Complex64, Error> {
    if xi.im == 0.0 && xi.re <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "extended dagger transform is undefined on the negative axis, got {xi}"
        )));
    }
    let r = xi.norm().sqrt();
    let sq = xi.sqrt();
    let f = |s: f64| sq * psi.eval_complex(xi * (s * s)).ln() / (xi + s * s);
    let q = integrate_de(
        |u: f64, _, _| f(r * u) * r + f(r / u) * (r / (u * u)),
        0.0,
        1.0,
        tol,
        &DeRule::default(),
    )?;
    require(&q)?;
    Ok((q.value / PI).exp())
}
