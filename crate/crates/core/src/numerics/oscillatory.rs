use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use super::{integrate_de, integrate_de_semi_infinite, DeRule, GaussLegendre, Tolerance};
use crate::Error;

/// Panel layout for `integrate_oscillatory`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorySpec {
    /// Dominant angular frequency of the integrand; panels are `pi / frequency` wide.
    pub frequency: f64,
    pub max_panels: usize,
    /// Gauss-Legendre order; each panel is also evaluated at twice this order
    /// and the difference is the error estimate.
    pub order: usize,
    pub max_bisections: u32,
    /// Fixed truncation point; when absent it is located from the envelope.
    pub truncation: Option<f64>,
}

impl OscillatorySpec {
    pub fn new(frequency: f64) -> Self {
        OscillatorySpec {
            frequency,
            max_panels: 20_000,
            order: 10,
            max_bisections: 8,
            truncation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatoryResult {
    pub value: f64,
    pub error_estimate: f64,
    pub truncation: f64,
    pub tail_bound: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Locates `L` with `envelope(L) <= threshold` (doubling, then bisection) and
/// keeps doubling while the envelope's tail integral exceeds `tail_target`.
/// Returns `(L, tail_bound, within_budget)`.
pub(crate) fn truncation_point<E: Fn(f64) -> f64>(
    envelope: &E,
    start: f64,
    limit: f64,
    threshold: f64,
    tail_target: f64,
) -> (f64, f64, bool) {
    let mut hi = start;
    let mut ok = true;
    while envelope(hi) > threshold {
        hi *= 2.0;
        if hi >= limit {
            hi = limit;
            ok = false;
            break;
        }
    }
    if ok && hi > start {
        let mut lo = 0.5 * hi;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if envelope(mid) > threshold {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * hi {
                break;
            }
        }
    }
    let rule = DeRule::default();
    let tail = |l: f64| {
        integrate_de_semi_infinite(|x| envelope(x).abs(), l, l, Tolerance::new(0.0, 1e-3), &rule)
            .map(|q| q.value)
            .unwrap_or(f64::INFINITY)
    };
    let mut tb = tail(hi);
    while ok && tb > tail_target {
        if hi * 2.0 > limit {
            ok = false;
            break;
        }
        hi *= 2.0;
        tb = tail(hi);
    }
    (hi, tb, ok)
}

struct Panels {
    low: GaussLegendre,
    high: GaussLegendre,
}

impl Panels {
    #[allow(clippy::too_many_arguments)]
    fn integrate<F: FnMut(f64) -> f64>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        abs_density: f64,
        rel: f64,
        depth: u32,
        evaluations: &mut usize,
    ) -> Result<(f64, f64), Error> {
        let mut eval = |x: f64| -> Result<f64, Error> {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { x })
            }
        };
        let mut g1 = 0.0;
        for (x, w) in self.low.mapped(a, b) {
            g1 += w * eval(x)?;
        }
        let mut g2 = 0.0;
        for (x, w) in self.high.mapped(a, b) {
            g2 += w * eval(x)?;
        }
        *evaluations += self.low.len() + self.high.len();
        let err = (g2 - g1).abs();
        if err <= abs_density * (b - a) + rel * g2.abs() || depth == 0 {
            return Ok((g2, err));
        }
        let m = 0.5 * (a + b);
        let (v1, e1) = self.integrate(f, a, m, abs_density, rel, depth - 1, evaluations)?;
        let (v2, e2) = self.integrate(f, m, b, abs_density, rel, depth - 1, evaluations)?;
        Ok((v1 + v2, e1 + e2))
    }
}

/// Integral of an oscillatory `f` over `(0, inf)`.
///
/// The range is truncated where `envelope` (a pointwise bound on `|f|`,
/// eventually decreasing) drops below `tol.abs / 10` and its tail integral is
/// below `tol.abs / 2`. The first panel uses tanh-sinh so that an integrable
/// singularity at the origin is allowed; the rest use Gauss-Legendre panels
/// aligned to half-periods.
pub fn integrate_oscillatory<F, E>(
    mut f: F,
    envelope: E,
    spec: &OscillatorySpec,
    tol: Tolerance,
) -> Result<OscillatoryResult, Error>
where
    F: FnMut(f64) -> f64,
    E: Fn(f64) -> f64,
{
    if !(spec.frequency > 0.0) || !spec.frequency.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!(
            "frequency hint must be positive, got {}",
            spec.frequency
        )));
    }
    let width = PI / spec.frequency;
    let abs = tol.abs.max(1e-300);
    let limit = width * spec.max_panels as f64;
    let (lambda_max, tail_bound, within_budget) = match spec.truncation {
        Some(l) => (l, 0.0, true),
        None => truncation_point(&envelope, width, limit, abs / 10.0, abs / 2.0),
    };
    let abs_density = 0.5 * abs / lambda_max;
    let mut evaluations = 0usize;

    let first_end = width.min(lambda_max);
    let first = integrate_de(
        |x, _, _| f(x),
        0.0,
        first_end,
        Tolerance::new(abs_density * first_end, tol.rel),
        &DeRule::default(),
    )?;
    evaluations += first.evaluations;
    let mut values: Vec<f64> = Vec::new();
    values.push(first.value);
    let mut error = first.error_estimate;

    let panels = Panels {
        low: GaussLegendre::new(spec.order),
        high: GaussLegendre::new(2 * spec.order),
    };
    let mut a = first_end;
    while a < lambda_max {
        let b = (a + width).min(lambda_max);
        let (v, e) = panels.integrate(
            &mut f,
            a,
            b,
            abs_density,
            tol.rel,
            spec.max_bisections,
            &mut evaluations,
        )?;
        values.push(v);
        error += e;
        a = b;
    }
    let value = super::pairwise_sum(&values);
    let error_estimate = error + tail_bound;
    Ok(OscillatoryResult {
        value,
        error_estimate,
        truncation: lambda_max,
        tail_bound,
        evaluations,
        converged: within_budget && error_estimate <= tol.bound(value),
    })
}

/// Laplace transform `int_0^inf exp(-xi x) f(x) dx` of a function known only
/// through evaluations, with `|f| <= bound` and oscillation frequency `frequency`.
pub fn laplace_of_sampled<F: FnMut(f64) -> f64>(
    mut f: F,
    xi: f64,
    bound: f64,
    frequency: f64,
    tol: Tolerance,
) -> Result<OscillatoryResult, Error> {
    if !(xi > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "Laplace variable must be positive, got {xi}"
        )));
    }
    integrate_oscillatory(
        |x| (-xi * x).exp() * f(x),
        |x| bound * (-xi * x).exp(),
        &OscillatorySpec::new(frequency.max(xi)),
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damped_sine_matches_closed_form() {
        // int_0^inf e^{-x} sin(10 x) dx = 10 / 101
        let r = integrate_oscillatory(
            |x| (-x).exp() * (10.0 * x).sin(),
            |x| (-x).exp(),
            &OscillatorySpec::new(10.0),
            Tolerance::new(1e-12, 0.0),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.value - 10.0 / 101.0).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn singular_start_and_gaussian_envelope() {
        // int_0^inf e^{-x^2} sin(x)/x^{1/2} dx, reference from the series
        // sum_k (-1)^k Gamma(k + 3/4) / (2 (2k+1)!)
        let mut reference = 0.0;
        let mut g = libm::tgamma(0.75);
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                g *= k as f64 - 0.25;
                fact *= (2 * k) as f64 * (2 * k + 1) as f64;
            }
            reference += if k % 2 == 0 { 1.0 } else { -1.0 } * g / (2.0 * fact);
        }
        let r = integrate_oscillatory(
            |x| (-x * x).exp() * x.sin() / x.sqrt(),
            |x| (-x * x).exp() / x.sqrt(),
            &OscillatorySpec::new(1.0),
            Tolerance::new(1e-12, 0.0),
        )
        .unwrap();
        assert!((r.value - reference).abs() < 1e-11, "{} vs {}", r.value, reference);
    }

    #[test]
    fn laplace_of_cosine() {
        let r = laplace_of_sampled(|x| (3.0 * x).cos(), 2.0, 1.0, 3.0, Tolerance::new(1e-12, 0.0)).unwrap();
        assert!((r.value - 2.0 / 13.0).abs() < 1e-11);
    }

    #[test]
    fn slow_envelope_exhausts_budget() {
        let mut spec = OscillatorySpec::new(1.0);
        spec.max_panels = 50;
        let r = integrate_oscillatory(
            |x| x.sin() / (1.0 + x),
            |x| 1.0 / (1.0 + x),
            &spec,
            Tolerance::new(1e-10, 0.0),
        )
        .unwrap();
        assert!(!r.converged);
    }
}
