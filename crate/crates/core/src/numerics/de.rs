use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

#[allow(unused_imports)]
use num_traits::Float;

use super::{pairwise_sum, QuadratureResult, Scalar, Tolerance};
use crate::Error;

/// Parameters of the tanh-sinh (double exponential) rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeRule {
    /// Finest level; the step at level `k` is `2^-k`.
    pub max_level: u32,
    /// Levels below this are never accepted, guarding against lucky agreement.
    pub min_level: u32,
    pub max_evaluations: usize,
    /// Nodes closer than this (relative to the interval length) to an
    /// endpoint are dropped.
    pub min_distance: f64,
}

impl Default for DeRule {
    fn default() -> Self {
        DeRule {
            max_level: 12,
            min_level: 3,
            max_evaluations: 4000,
            min_distance: 1e-100,
        }
    }
}

/// A tanh-sinh abscissa on `[a, b]` with its distances to both ends, so
/// integrands can avoid cancellation near the endpoints.
#[derive(Debug, Clone, Copy)]
pub struct DeNode {
    pub x: f64,
    pub from_a: f64,
    pub from_b: f64,
    pub weight: f64,
}

impl DeRule {
    fn t_max(&self) -> f64 {
        // distance ~ exp(-pi sinh t) relative to the length
        let d = self.min_distance.max(1e-300);
        (-d.ln() / core::f64::consts::PI).asinh()
    }

    fn node(a: f64, b: f64, t: f64) -> DeNode {
        let hw = 0.5 * (b - a);
        let u = FRAC_PI_2 * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        let near = hw * 2.0 * e / (1.0 + e);
        let far = hw * 2.0 / (1.0 + e);
        let (from_a, from_b) = if u >= 0.0 { (far, near) } else { (near, far) };
        let x = if u >= 0.0 { b - from_b } else { a + from_a };
        let weight = hw * FRAC_PI_2 * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        DeNode {
            x,
            from_a,
            from_b,
            weight,
        }
    }

    /// All nodes of `level` on `[a, b]`; the flag marks nodes that also belong
    /// to `level - 1`. Weights do not include the step `2^-level`.
    pub fn nodes(&self, a: f64, b: f64, level: u32) -> Vec<(DeNode, bool)> {
        let h = 0.5f64.powi(level as i32);
        let tm = self.t_max();
        let kmax = (tm / h).floor() as i64;
        let mut out = Vec::with_capacity(2 * kmax as usize + 1);
        for k in -kmax..=kmax {
            let n = Self::node(a, b, k as f64 * h);
            if n.weight > 0.0 && n.from_a > 0.0 && n.from_b > 0.0 {
                out.push((n, k % 2 == 0));
            }
        }
        out
    }
}

fn eval_node<T: Scalar, F: FnMut(f64, f64, f64) -> T>(
    f: &mut F,
    n: &DeNode,
    len: f64,
) -> Result<T, Error> {
    let v = f(n.x, n.from_a, n.from_b);
    if v.finite() {
        Ok(v * n.weight)
    } else if n.from_a.min(n.from_b) < 1e-12 * len {
        Ok(T::default())
    } else {
        Err(Error::NonFinite { x: n.x })
    }
}

/// Tanh-sinh quadrature of `f(x, x - a, b - x)` over `[a, b]`.
///
/// The integrand receives the distances to both endpoints computed without
/// cancellation. Levels are refined until successive estimates agree within
/// `tol`; an unconverged estimate is returned with `converged == false`.
pub fn integrate_de<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    rule: &DeRule,
) -> Result<QuadratureResult<T>, Error>
where
    T: Scalar,
    F: FnMut(f64, f64, f64) -> T,
{
    if !(a < b) {
        if a == b {
            return Ok(QuadratureResult {
                value: T::default(),
                error_estimate: 0.0,
                evaluations: 0,
                converged: true,
            });
        }
        return Err(Error::InvalidArgument(alloc::format!(
            "integration bounds out of order: [{a}, {b}]"
        )));
    }
    let len = b - a;
    let tm = rule.t_max();
    let mut terms: Vec<T> = Vec::new();
    let mut evaluations = 0usize;

    // level 0: step 1, all integer nodes
    let kmax = tm.floor() as i64;
    for k in -kmax..=kmax {
        let n = DeRule::node(a, b, k as f64);
        if n.weight > 0.0 && n.from_a > 0.0 && n.from_b > 0.0 {
            terms.push(eval_node(&mut f, &n, len)?);
            evaluations += 1;
        }
    }
    let mut sum = pairwise_sum(&terms);
    let mut estimate = sum;
    let mut error = f64::INFINITY;

    for level in 1..=rule.max_level {
        let h = 0.5f64.powi(level as i32);
        let kmax = (tm / h).floor() as i64;
        terms.clear();
        let mut k = -kmax;
        if k % 2 == 0 {
            k += 1;
        }
        while k <= kmax {
            let n = DeRule::node(a, b, k as f64 * h);
            if n.weight > 0.0 && n.from_a > 0.0 && n.from_b > 0.0 {
                terms.push(eval_node(&mut f, &n, len)?);
                evaluations += 1;
            }
            k += 2;
        }
        sum = sum + pairwise_sum(&terms);
        let next = sum * h;
        error = (next - estimate).magnitude();
        estimate = next;
        if level >= rule.min_level && error <= tol.bound(estimate.magnitude()) {
            return Ok(QuadratureResult {
                value: estimate,
                error_estimate: error,
                evaluations,
                converged: true,
            });
        }
        if evaluations >= rule.max_evaluations {
            break;
        }
    }
    Ok(QuadratureResult {
        value: estimate,
        error_estimate: error,
        evaluations,
        converged: false,
    })
}

/// Tanh-sinh at a single fixed level, with the level below used as the error
/// estimate. Useful when the same node set must be shared between calls.
pub fn integrate_de_fixed<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    level: u32,
    rule: &DeRule,
) -> Result<QuadratureResult<T>, Error>
where
    T: Scalar,
    F: FnMut(f64, f64, f64) -> T,
{
    let len = b - a;
    let nodes = rule.nodes(a, b, level);
    let mut fine = Vec::with_capacity(nodes.len());
    let mut coarse = Vec::with_capacity(nodes.len() / 2 + 1);
    for (n, is_coarse) in &nodes {
        let v = eval_node(&mut f, n, len)?;
        fine.push(v);
        if *is_coarse {
            coarse.push(v);
        }
    }
    let h = 0.5f64.powi(level as i32);
    let value = pairwise_sum(&fine) * h;
    let rough = pairwise_sum(&coarse) * (2.0 * h);
    Ok(QuadratureResult {
        value,
        error_estimate: (value - rough).magnitude(),
        evaluations: nodes.len(),
        converged: true,
    })
}

/// Integrates over consecutive pieces `[breaks[i], breaks[i+1]]`, splitting
/// the tolerance evenly.
pub fn integrate_de_with_gaps<T, F>(
    mut f: F,
    breaks: &[f64],
    tol: Tolerance,
    rule: &DeRule,
) -> Result<QuadratureResult<T>, Error>
where
    T: Scalar,
    F: FnMut(f64, f64, f64) -> T,
{
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    let piece_tol = Tolerance::new(tol.abs / pieces, tol.rel);
    let mut total = QuadratureResult {
        value: T::default(),
        error_estimate: 0.0,
        evaluations: 0,
        converged: true,
    };
    for w in breaks.windows(2) {
        let r = integrate_de(&mut f, w[0], w[1], piece_tol, rule)?;
        total.value = total.value + r.value;
        total.error_estimate += r.error_estimate;
        total.evaluations += r.evaluations;
        total.converged &= r.converged;
    }
    Ok(total)
}

/// Integral of `f` over `[a, inf)` through the map `x = a + scale * u / (1 - u)`.
pub fn integrate_de_semi_infinite<T, F>(
    mut f: F,
    a: f64,
    scale: f64,
    tol: Tolerance,
    rule: &DeRule,
) -> Result<QuadratureResult<T>, Error>
where
    T: Scalar,
    F: FnMut(f64) -> T,
{
    integrate_de(
        |u, du, one_minus_u| {
            let x = a + scale * u / one_minus_u;
            let _ = du;
            f(x) * (scale / (one_minus_u * one_minus_u))
        },
        0.0,
        1.0,
        tol,
        rule,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use num_complex::Complex64;

    fn tol() -> Tolerance {
        Tolerance::new(1e-14, 1e-13)
    }

    #[test]
    fn polynomial_and_endpoint_singularities() {
        let r = DeRule::default();
        let q = integrate_de(|x, _, _| x * x, 0.0, 1.0, tol(), &r).unwrap();
        assert!((q.value - 1.0 / 3.0).abs() < 1e-14);
        // 1/sqrt(x) on (0,1) = 2
        let q = integrate_de(|_, da, _| 1.0 / da.sqrt(), 0.0, 1.0, tol(), &r).unwrap();
        assert!((q.value - 2.0).abs() < 1e-12, "{}", q.value);
        // log singularity at the right end: int_0^1 ln(1-x) dx = -1
        let q = integrate_de(|_, _, db| db.ln(), 0.0, 1.0, tol(), &r).unwrap();
        assert!((q.value + 1.0).abs() < 1e-13);
    }

    #[test]
    fn semi_infinite_rules() {
        let r = DeRule::default();
        let q = integrate_de_semi_infinite(|x| (-x).exp(), 0.0, 1.0, tol(), &r).unwrap();
        assert!((q.value - 1.0).abs() < 1e-13);
        let q = integrate_de_semi_infinite(|x| 1.0 / (1.0 + x * x), 0.0, 1.0, tol(), &r).unwrap();
        assert!((q.value - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn complex_values_and_fixed_levels() {
        let r = DeRule::default();
        let q = integrate_de(
            |x, _, _| Complex64::new(x.cos(), x.sin()),
            0.0,
            PI,
            tol(),
            &r,
        )
        .unwrap();
        assert!((q.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
        let q = integrate_de_fixed(|x: f64, _, _| x.exp(), 0.0, 1.0, 6, &r).unwrap();
        assert!((q.value - (1f64.exp() - 1.0)).abs() < 1e-14);
        assert!(q.error_estimate < 1e-10);
    }

    #[test]
    fn interior_nan_is_reported() {
        let r = DeRule::default();
        let e = integrate_de(|x, _, _| if (x - 0.5).abs() < 0.2 { f64::NAN } else { 1.0 }, 0.0, 1.0, tol(), &r);
        assert!(matches!(e, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn node_distances_are_consistent() {
        let r = DeRule::default();
        for (n, _) in r.nodes(2.0, 5.0, 3) {
            assert!((n.from_a + n.from_b - 3.0).abs() < 1e-14);
            assert!(n.x >= 2.0 && n.x <= 5.0);
        }
    }
}
