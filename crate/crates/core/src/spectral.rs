//! Spectral formulas for the killed process: the transform `Pi` and its
//! adjoint, the transition density, the survival probability and the
//! first-passage density, together with numerical checks of the hypotheses
//! under which these formulas hold.

use alloc::{format, string::String, vec, vec::Vec};
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use serde::Serialize;

use crate::cbf::{log_grid, LaplaceExponent};
use crate::eigenfunction::Eigenfunction;
use crate::numerics::{kronrod21, pairwise_sum, truncation_point, DeRule, QuadratureResult, Tolerance};
use crate::Error;

/// Evaluates a node function at many spectral nodes. Results come back in
/// node order, so reductions do not depend on scheduling.
pub trait Executor: Sync {
    fn map(
        &self,
        nodes: &[f64],
        f: &(dyn Fn(f64) -> Result<Vec<f64>, Error> + Sync),
    ) -> Result<Vec<Vec<f64>>, Error>;
}

/// Evaluates nodes one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map(
        &self,
        nodes: &[f64],
        f: &(dyn Fn(f64) -> Result<Vec<f64>, Error> + Sync),
    ) -> Result<Vec<Vec<f64>>, Error> {
        nodes.iter().map(|&l| f(l)).collect()
    }
}

// ---------------------------------------------------------------------------
// Hypothesis checks

const GRID_MIN: f64 = 1e-6;
const GRID_MAX: f64 = 1e6;
const GRID_POINTS: usize = 241;
/// Far probes used to extrapolate the curvature ratio beyond the grid.
const FAR_PROBES: [f64; 2] = [1e-12, 1e12];
const MARGIN: f64 = 1.01;

/// Numerical verdict on the hypotheses of the spectral formulas at time `t`.
///
/// Asymptotic conditions cannot be verified on a finite grid; the curvature
/// ratio `xi |psi''| / psi'` is sampled on `[grid_min, grid_max]` plus far
/// probes, and tail integrability is decided from the local decay exponent
/// extrapolated in `log xi`. All booleans carry a 1% safety margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub t: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    /// `sup xi |psi''(xi)| / psi'(xi)`.
    pub a1_sup: f64,
    pub a1_ok: bool,
    /// `sqrt(psi'(xi^2) / psi(xi^2)) exp(-t psi(xi^2))` integrable in `xi > 1`.
    pub a2_ok: bool,
    /// Curvature ratio over the lowest decade.
    pub a3_limsup0: f64,
    /// Curvature ratio over the highest decade.
    pub a3_limsupinf: f64,
    pub a3_ok: bool,
    /// `exp(-t psi(xi^2))` integrable in `xi > 0`.
    pub pdt_ok: bool,
    /// The heat kernel formula holds exactly for `t` above this value;
    /// `None` when it holds for no `t`.
    pub pdt_threshold: Option<f64>,
    /// `sqrt(psi(xi^2) psi'(xi^2)) exp(-t psi(xi^2))` integrable in `xi > 1`.
    pub fptd_ok: bool,
    /// The same integrability for every `t > 0`.
    pub fptd_all_t_ok: bool,
}

impl ConditionReport {
    /// The conditions of the short proof of the survival formula fail while
    /// the weaker ones hold, so results rest on the general argument.
    pub fn outside_proved_regime(&self) -> bool {
        !self.a3_ok
    }
}

fn curvature_ratio(psi: &dyn LaplaceExponent, xi: f64) -> f64 {
    let d1 = psi.deriv1(xi);
    if d1 > 0.0 {
        xi * psi.deriv2(xi).abs() / d1
    } else {
        f64::INFINITY
    }
}

/// Local decay exponent `p(L) = -d log h / d L` in `L = log xi`, fitted as
/// `p_inf + q / L` from two far points.
#[derive(Debug, Clone, Copy)]
struct TailFit {
    p_inf: f64,
    q: f64,
}

const TAIL_POINTS: [f64; 2] = [30.0, 150.0];

fn log_slope(g: &dyn Fn(f64) -> f64, l: f64) -> f64 {
    let d = 1e-2 * l;
    (g(l + d) - g(l - d)) / (2.0 * d)
}

fn tail_fit(log_h: &dyn Fn(f64) -> f64) -> TailFit {
    let [l1, l2] = TAIL_POINTS;
    let p1 = -log_slope(log_h, l1);
    let p2 = -log_slope(log_h, l2);
    if p2 == f64::INFINITY || p1 == f64::INFINITY {
        return TailFit { p_inf: f64::INFINITY, q: 0.0 };
    }
    let p_inf = (p2 * l2 - p1 * l1) / (l2 - l1);
    TailFit { p_inf, q: (p1 - p_inf) * l1 }
}

impl TailFit {
    fn integrable(&self) -> bool {
        self.p_inf > MARGIN || (self.p_inf > 1.0 / MARGIN && self.q > MARGIN)
    }
}

/// Growth rate `lim d psi(e^{2L}) / dL`; infinite for power growth.
fn log_growth(psi: &dyn LaplaceExponent) -> f64 {
    let g = |l: f64| psi.eval((2.0 * l).exp());
    let [l1, l2] = TAIL_POINTS;
    let (s1, s2) = (log_slope(&g, l1), log_slope(&g, l2));
    let k = (s2 * l2 - s1 * l1) / (l2 - l1);
    if k.is_finite() {
        k.max(0.0)
    } else {
        f64::INFINITY
    }
}

pub fn check_conditions(psi: &dyn LaplaceExponent, t: f64) -> Result<ConditionReport, Error> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let grid = log_grid(GRID_MIN, GRID_MAX, GRID_POINTS);
    let ratios: Vec<f64> = grid.iter().map(|&x| curvature_ratio(psi, x)).collect();
    let far0 = curvature_ratio(psi, FAR_PROBES[0]);
    let far_inf = curvature_ratio(psi, FAR_PROBES[1]);
    let a1_sup = ratios.iter().copied().fold(far0.max(far_inf), f64::max);
    let decade0 = grid.iter().zip(&ratios).filter(|(x, _)| **x <= GRID_MIN * 10.0);
    let a3_limsup0 = decade0.map(|(_, r)| *r).fold(far0, f64::max);
    let decade_inf = grid.iter().zip(&ratios).filter(|(x, _)| **x >= GRID_MAX / 10.0);
    let a3_limsupinf = decade_inf.map(|(_, r)| *r).fold(far_inf, f64::max);

    let at = |l: f64| (2.0 * l).exp();
    let a2 = tail_fit(&|l| 0.5 * (psi.deriv1(at(l)).ln() - psi.eval(at(l)).ln()) - t * psi.eval(at(l)));
    let pdt = tail_fit(&|l| -t * psi.eval(at(l)));
    let fptd = tail_fit(&|l| 0.5 * (psi.deriv1(at(l)).ln() + psi.eval(at(l)).ln()) - t * psi.eval(at(l)));
    let fptd0 = tail_fit(&|l| 0.5 * (psi.deriv1(at(l)).ln() + psi.eval(at(l)).ln()));
    let growth = log_growth(psi);
    let pdt_threshold = if growth > 1e6 {
        Some(0.0)
    } else if growth > 1e-2 {
        Some(1.0 / growth)
    } else {
        None
    };
    Ok(ConditionReport {
        t,
        grid_min: GRID_MIN,
        grid_max: GRID_MAX,
        grid_points: GRID_POINTS,
        a1_sup,
        a1_ok: a1_sup * MARGIN < 2.0,
        a2_ok: a2.integrable(),
        a3_limsup0,
        a3_limsupinf,
        a3_ok: a3_limsup0 * MARGIN < 1.0 && a3_limsupinf * MARGIN < 1.0,
        pdt_ok: pdt.integrable(),
        pdt_threshold,
        fptd_ok: fptd.integrable(),
        fptd_all_t_ok: fptd0.integrable() || growth > 1e6 || (fptd0.p_inf > 1.0 / MARGIN && growth > 1e-2),
    })
}

// ---------------------------------------------------------------------------
// Eigenfunctions as a family in lambda

/// `lambda -> F_lambda`, built per node or, for power-law exponents, from the
/// single eigenfunction at `lambda = 1` through `F_lambda(x) = F_1(lambda x)`.
pub struct EigenFamily<'a> {
    psi: &'a dyn LaplaceExponent,
    base: Option<Eigenfunction<'a>>,
    tol: Tolerance,
}

impl<'a> EigenFamily<'a> {
    pub fn new(psi: &'a dyn LaplaceExponent, tol: Tolerance) -> Result<Self, Error> {
        let base = match psi.scaling_exponent() {
            Some(_) => Some(Eigenfunction::with_tolerance(psi, 1.0, tol)?),
            None => None,
        };
        Ok(EigenFamily { psi, base, tol })
    }

    pub fn exponent(&self) -> &'a dyn LaplaceExponent {
        self.psi
    }

    pub fn is_scaling(&self) -> bool {
        self.base.is_some()
    }

    /// `F_lambda(x)` for every `x` in `xs`.
    pub fn values(&self, lambda: f64, xs: &[f64]) -> Result<Vec<f64>, Error> {
        match &self.base {
            Some(ef) => xs.iter().map(|&x| ef.f(lambda * x)).collect(),
            None => {
                let ef = Eigenfunction::with_tolerance(self.psi, lambda, self.tol)?;
                xs.iter().map(|&x| ef.f(x)).collect()
            }
        }
    }

    pub fn theta(&self, lambda: f64) -> Result<f64, Error> {
        match &self.base {
            Some(ef) => Ok(ef.theta()),
            None => crate::WhContext::new(self.psi, lambda)?.theta(),
        }
    }
}

// ---------------------------------------------------------------------------
// Quadrature grids in lambda

/// A quadrature rule on `(0, truncation_lambda)` shared by every integrand
/// evaluated on it: tanh-sinh on the first half-period, which allows an
/// integrable singularity at the origin, and Kronrod panels of at most a
/// half-period beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub lambda_nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Weights of the embedded lower-order rule on the same nodes, zero where
    /// a node does not belong to it; the difference of the two sums is the
    /// discretisation error estimate.
    pub embedded_weights: Vec<f64>,
    pub truncation_lambda: f64,
    /// Bound on the integral of the envelope beyond the truncation point.
    pub tail_bound: f64,
    pub t_context: Option<f64>,
    panel_width: f64,
    first_level: u32,
}

const FIRST_LEVEL: u32 = 4;
const MIN_PANELS: f64 = 16.0;
const MAX_PANELS: f64 = 20_000.0;
const MAX_REFINEMENTS: usize = 2;

impl SpectralGrid {
    /// Grid on `(0, truncation_lambda)` for integrands oscillating at most at
    /// `frequency` in `lambda`.
    pub fn new(frequency: f64, truncation_lambda: f64, t_context: Option<f64>) -> Result<Self, Error> {
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(Error::InvalidArgument(format!("frequency must be positive, got {frequency}")));
        }
        if !(truncation_lambda > 0.0) || !truncation_lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "truncation must be positive and finite, got {truncation_lambda}"
            )));
        }
        let width = (PI / frequency).min(truncation_lambda / MIN_PANELS);
        if truncation_lambda / width > MAX_PANELS {
            return Err(Error::InvalidArgument(format!(
                "grid up to {truncation_lambda} at frequency {frequency} needs more than {MAX_PANELS} panels"
            )));
        }
        Ok(Self::build(width, FIRST_LEVEL, truncation_lambda, 0.0, t_context))
    }

    /// Grid truncated where `envelope`, a pointwise bound on the integrand,
    /// falls below `tol.abs / 10` with tail integral below `tol.abs / 2`.
    pub fn from_envelope(
        frequency: f64,
        envelope: &dyn Fn(f64) -> f64,
        tol: Tolerance,
        t_context: Option<f64>,
    ) -> Result<Self, Error> {
        if !(frequency > 0.0) || !frequency.is_finite() {
            return Err(Error::InvalidArgument(format!("frequency must be positive, got {frequency}")));
        }
        let half_period = PI / frequency;
        let abs = tol.abs.max(1e-300);
        let (lmax, tail, ok) = truncation_point(
            &|l: f64| envelope(l),
            half_period,
            half_period * MAX_PANELS,
            abs / 10.0,
            abs / 2.0,
        );
        let width = half_period.min(lmax / MIN_PANELS);
        let mut grid = Self::build(width, FIRST_LEVEL, lmax, tail, t_context);
        if !ok {
            grid.tail_bound = f64::INFINITY;
        }
        Ok(grid)
    }

    fn build(width: f64, first_level: u32, lmax: f64, tail_bound: f64, t_context: Option<f64>) -> Self {
        let mut lambda_nodes = Vec::new();
        let mut weights = Vec::new();
        let mut embedded_weights = Vec::new();
        let first = width.min(lmax);
        let rule = DeRule {
            min_distance: 1e-60,
            ..DeRule::default()
        };
        let h = 0.5f64.powi(first_level as i32);
        for (n, coarse) in rule.nodes(0.0, first, first_level) {
            // nodes within rounding of the right end carry negligible weight
            if n.x >= first || lambda_nodes.last().is_some_and(|&l| n.x <= l) {
                continue;
            }
            lambda_nodes.push(n.x);
            weights.push(n.weight * h);
            embedded_weights.push(if coarse { 2.0 * n.weight * h } else { 0.0 });
        }
        let mut a = first;
        while a < lmax * (1.0 - 1e-14) {
            let b = (a + width).min(lmax);
            for (x, wk, wg) in kronrod21(a, b) {
                lambda_nodes.push(x);
                weights.push(wk);
                embedded_weights.push(wg);
            }
            a = b;
        }
        SpectralGrid {
            lambda_nodes,
            weights,
            embedded_weights,
            truncation_lambda: lmax,
            tail_bound,
            t_context,
            panel_width: width,
            first_level,
        }
    }

    /// The same range with half-width panels and a finer first panel.
    pub fn refined(&self) -> Self {
        Self::build(
            0.5 * self.panel_width,
            self.first_level + 1,
            self.truncation_lambda,
            self.tail_bound,
            self.t_context,
        )
    }

    pub fn len(&self) -> usize {
        self.lambda_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_nodes.is_empty()
    }

    /// Integral of the sampled integrand and its error estimate (including
    /// the tail bound). Sums are pairwise in node order.
    pub fn integrate(&self, values: &[f64]) -> (f64, f64) {
        let fine: Vec<f64> = self.weights.iter().zip(values).map(|(w, v)| w * v).collect();
        let coarse: Vec<f64> = self.embedded_weights.iter().zip(values).map(|(w, v)| w * v).collect();
        let value = pairwise_sum(&fine);
        let embedded = pairwise_sum(&coarse);
        (value, (value - embedded).abs() + self.tail_bound)
    }
}

// ---------------------------------------------------------------------------
// Spectral integrals

/// One spectral integral with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralValue {
    pub value: f64,
    pub error_estimate: f64,
    pub truncation: f64,
    pub nodes: usize,
    pub converged: bool,
    /// The simpler sufficient conditions fail; see
    /// [`ConditionReport::outside_proved_regime`].
    pub outside_proved_regime: bool,
    /// A small negative value was replaced by zero.
    pub clipped: bool,
}

/// Where the integrand of [`Spectral::pi_transform`] lives.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// Compact support `[breaks[0], breaks[last]]`, smooth between breaks.
    Compact(Vec<f64>),
    /// `|f(x)| <= bound * exp(-rate x)` on `(0, inf)`.
    Exponential { rate: f64, bound: f64 },
}

/// Spectral formulas for one exponent, evaluated with a chosen executor.
pub struct Spectral<'a> {
    family: EigenFamily<'a>,
    exec: &'a dyn Executor,
    tol: Tolerance,
}

fn check_points(xs: &[f64], what: &str) -> Result<(), Error> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument(format!("no {what} values given")));
    }
    match xs.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        Some(x) => Err(Error::InvalidArgument(format!("{what} must be positive and finite, got {x}"))),
        None => Ok(()),
    }
}

fn transpose(rows: Vec<Vec<f64>>, k: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![Vec::with_capacity(rows.len()); k];
    for row in rows {
        for (j, v) in row.into_iter().enumerate() {
            cols[j].push(v);
        }
    }
    cols
}

impl<'a> Spectral<'a> {
    /// Serial evaluation.
    pub fn new(psi: &'a dyn LaplaceExponent, tol: Tolerance) -> Result<Self, Error> {
        Self::with_executor(psi, tol, &Serial)
    }

    pub fn with_executor(psi: &'a dyn LaplaceExponent, tol: Tolerance, exec: &'a dyn Executor) -> Result<Self, Error> {
        if !(tol.abs > 0.0) {
            return Err(Error::InvalidArgument(format!("absolute tolerance must be positive, got {}", tol.abs)));
        }
        let eigen_tol = Tolerance::new((tol.abs * 1e-2).clamp(1e-11, 1e-4), 1e-9);
        Ok(Spectral {
            family: EigenFamily::new(psi, eigen_tol)?,
            exec,
            tol,
        })
    }

    pub fn family(&self) -> &EigenFamily<'a> {
        &self.family
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    fn psi(&self) -> &'a dyn LaplaceExponent {
        self.family.psi
    }

    /// Integrates every component of `node` on `grid`, refining until each
    /// meets the tolerance.
    fn run(
        &self,
        mut grid: SpectralGrid,
        node: &(dyn Fn(f64) -> Result<Vec<f64>, Error> + Sync),
        k: usize,
        refine: bool,
    ) -> Result<Vec<SpectralValue>, Error> {
        let mut round = 0;
        loop {
            let rows = self.exec.map(&grid.lambda_nodes, node)?;
            let cols = transpose(rows, k);
            let out: Vec<SpectralValue> = cols
                .iter()
                .map(|c| {
                    let (value, error_estimate) = grid.integrate(c);
                    SpectralValue {
                        value,
                        error_estimate,
                        truncation: grid.truncation_lambda,
                        nodes: grid.len(),
                        converged: error_estimate <= self.tol.bound(value),
                        outside_proved_regime: false,
                        clipped: false,
                    }
                })
                .collect();
            let done = out.iter().all(|v| v.converged);
            // refining cannot fix a truncation that exceeded its budget
            if done || !refine || round == MAX_REFINEMENTS || !grid.tail_bound.is_finite() {
                return Ok(out);
            }
            grid = grid.refined();
            round += 1;
        }
    }

    fn clip(&self, mut v: SpectralValue, what: &'static str) -> Result<SpectralValue, Error> {
        if v.value < 0.0 {
            if v.value < -10.0 * self.tol.abs {
                return Err(Error::OutOfRange { what, value: v.value });
            }
            v.value = 0.0;
            v.clipped = true;
        }
        Ok(v)
    }

    /// `P_x(tau > t)` for each `x`.
    pub fn survival(&self, t: f64, xs: &[f64]) -> Result<Vec<SpectralValue>, Error> {
        check_points(xs, "starting point")?;
        let report = check_conditions(self.psi(), t)?;
        if !report.a1_ok {
            return Err(Error::Condition(format!(
                "sup xi |psi''(xi)| / psi'(xi) < 2 fails (sup = {:.6})",
                report.a1_sup
            )));
        }
        if !report.a2_ok {
            return Err(Error::Condition(format!(
                "sqrt(psi'(xi^2) / psi(xi^2)) exp(-t psi(xi^2)) is not integrable in xi > 1 at t = {t}"
            )));
        }
        let psi = self.psi();
        let weight = move |l: f64| {
            let s = l * l;
            (2.0 / PI) * (psi.deriv1(s) / psi.eval(s)).sqrt() * (-t * psi.eval(s)).exp()
        };
        let frequency = xs.iter().copied().fold(0.0, f64::max);
        let grid = SpectralGrid::from_envelope(frequency, &|l| 2.0 * weight(l), self.tol, Some(t))?;
        let node = |l: f64| -> Result<Vec<f64>, Error> {
            let w = weight(l);
            if w == 0.0 {
                return Ok(vec![0.0; xs.len()]);
            }
            Ok(self.family.values(l, xs)?.into_iter().map(|f| w * f).collect())
        };
        let out = self.run(grid, &node, xs.len(), true)?;
        out.into_iter()
            .map(|mut v| {
                v.outside_proved_regime = report.outside_proved_regime();
                let slack = self.tol.abs + v.error_estimate;
                if v.value < -slack || v.value > 1.0 + slack {
                    return Err(Error::OutOfRange {
                        what: "survival probability",
                        value: v.value,
                    });
                }
                Ok(v)
            })
            .collect()
    }

    /// Density of the first exit time at `t` for each `x`.
    pub fn fpt_density(&self, t: f64, xs: &[f64]) -> Result<Vec<SpectralValue>, Error> {
        check_points(xs, "starting point")?;
        let report = check_conditions(self.psi(), t)?;
        if !report.a1_ok {
            return Err(Error::Condition(format!(
                "sup xi |psi''(xi)| / psi'(xi) < 2 fails (sup = {:.6})",
                report.a1_sup
            )));
        }
        if !report.fptd_ok {
            return Err(Error::Condition(format!(
                "sqrt(psi(xi^2) psi'(xi^2)) exp(-t psi(xi^2)) is not integrable in xi > 1 at t = {t}"
            )));
        }
        let psi = self.psi();
        let weight = move |l: f64| {
            let s = l * l;
            (2.0 / PI) * (psi.deriv1(s) * psi.eval(s)).sqrt() * (-t * psi.eval(s)).exp()
        };
        let frequency = xs.iter().copied().fold(0.0, f64::max);
        let grid = SpectralGrid::from_envelope(frequency, &|l| 2.0 * weight(l), self.tol, Some(t))?;
        let node = |l: f64| -> Result<Vec<f64>, Error> {
            let w = weight(l);
            if w == 0.0 {
                return Ok(vec![0.0; xs.len()]);
            }
            Ok(self.family.values(l, xs)?.into_iter().map(|f| w * f).collect())
        };
        let out = self.run(grid, &node, xs.len(), true)?;
        out.into_iter()
            .map(|mut v| {
                v.outside_proved_regime = report.outside_proved_regime();
                self.clip(v, "first-passage density")
            })
            .collect()
    }

    /// Transition density `p_t(x, y)` of the killed process for each pair.
    pub fn heat_kernel(&self, t: f64, pairs: &[(f64, f64)]) -> Result<Vec<SpectralValue>, Error> {
        let mut points: Vec<f64> = pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
        check_points(&points, "position")?;
        let report = check_conditions(self.psi(), t)?;
        if !report.pdt_ok {
            let hint = match report.pdt_threshold {
                Some(t0) if t0 > 0.0 => format!("; for this exponent it holds only for t > {t0:.6}"),
                Some(_) => String::new(),
                None => String::from("; for this exponent it holds for no t"),
            };
            return Err(Error::Condition(format!(
                "exp(-t psi(xi^2)) is not integrable in xi > 0 at t = {t}{hint}"
            )));
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        let index = |x: f64| points.binary_search_by(|p| p.partial_cmp(&x).unwrap()).unwrap();
        let idx: Vec<(usize, usize)> = pairs.iter().map(|&(x, y)| (index(x), index(y))).collect();
        let psi = self.psi();
        let weight = move |l: f64| (2.0 / PI) * (-t * psi.eval(l * l)).exp();
        let frequency = pairs.iter().map(|(x, y)| x + y).fold(0.0, f64::max);
        let grid = SpectralGrid::from_envelope(frequency, &|l| 4.0 * weight(l), self.tol, Some(t))?;
        let node = |l: f64| -> Result<Vec<f64>, Error> {
            let w = weight(l);
            if w == 0.0 {
                return Ok(vec![0.0; idx.len()]);
            }
            let f = self.family.values(l, &points)?;
            Ok(idx.iter().map(|&(i, j)| w * (f[i] * f[j])).collect())
        };
        let out = self.run(grid, &node, idx.len(), true)?;
        out.into_iter().map(|v| self.clip(v, "heat kernel")).collect()
    }

    /// `Pi f(lambda) = int f(x) F_lambda(x) dx` for each `lambda`.
    pub fn pi_transform(
        &self,
        f: &(dyn Fn(f64) -> f64 + Sync),
        support: &Support,
        lambdas: &[f64],
    ) -> Result<Vec<QuadratureResult>, Error> {
        check_points(lambdas, "spectral parameter")?;
        let (breaks, tail) = match support {
            Support::Compact(b) => {
                if b.len() < 2 || b.iter().any(|x| !x.is_finite() || *x < 0.0) || b.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidArgument(String::from(
                        "compact support needs at least two increasing finite non-negative breakpoints",
                    )));
                }
                (b.clone(), 0.0)
            }
            Support::Exponential { rate, bound } => {
                if !(*rate > 0.0) || !(*bound >= 0.0) || !bound.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "exponential decay needs rate > 0 and a finite bound, got rate {rate} and bound {bound}"
                    )));
                }
                let target = self.tol.abs / 10.0;
                let end = ((2.0 * bound / (rate * target)).ln() / rate).max(1.0 / rate);
                let pieces = (rate * end / 2.0).ceil() as usize;
                let breaks = (0..=pieces).map(|k| end * k as f64 / pieces as f64).collect();
                (breaks, 2.0 * bound * (-rate * end).exp() / rate)
            }
        };
        let node = |lambda: f64| -> Result<Vec<f64>, Error> {
            let (xs, w, we) = transform_nodes(&breaks, lambda);
            let fx: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
            if let Some(i) = fx.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { x: xs[i] });
            }
            let vals = self.family.values(lambda, &xs)?;
            let fine: Vec<f64> = vals.iter().zip(&fx).zip(&w).map(|((a, b), w)| a * b * w).collect();
            let coarse: Vec<f64> = vals.iter().zip(&fx).zip(&we).map(|((a, b), w)| a * b * w).collect();
            let v = pairwise_sum(&fine);
            Ok(vec![v, (v - pairwise_sum(&coarse)).abs() + tail, xs.len() as f64])
        };
        let rows = self.exec.map(lambdas, &node)?;
        Ok(rows
            .into_iter()
            .map(|r| QuadratureResult {
                value: r[0],
                error_estimate: r[1],
                evaluations: r[2] as usize,
                converged: r[1] <= self.tol.bound(r[0]),
            })
            .collect())
    }

    /// `Pi* g(x) = int g(lambda) F_lambda(x) d lambda` on a given grid.
    pub fn pi_star(
        &self,
        g: &(dyn Fn(f64) -> f64 + Sync),
        xs: &[f64],
        grid: &SpectralGrid,
    ) -> Result<Vec<SpectralValue>, Error> {
        check_points(xs, "position")?;
        let gv: Vec<f64> = grid.lambda_nodes.iter().map(|&l| g(l)).collect();
        if let Some(i) = gv.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { x: grid.lambda_nodes[i] });
        }
        let peak = gv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let n = gv.len();
        let end = gv[n.saturating_sub(21)..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.0 && end > 1e-3 * peak {
            return Err(Error::InvalidArgument(format!(
                "g does not decay before the truncation point {} (|g| there is {end:.3e}, peak {peak:.3e})",
                grid.truncation_lambda
            )));
        }
        let node = |l: f64| -> Result<Vec<f64>, Error> {
            let w = g(l);
            if w == 0.0 {
                return Ok(vec![0.0; xs.len()]);
            }
            Ok(self.family.values(l, xs)?.into_iter().map(|f| w * f).collect())
        };
        self.run(grid.clone(), &node, xs.len(), false)
    }
}

/// Quadrature nodes for `int f(x) F_lambda(x) dx` over `[breaks[0], last]`:
/// Kronrod panels no wider than a half-period of `F_lambda`, with tanh-sinh
/// on a first panel starting at the origin (where `F_lambda` is not smooth).
fn transform_nodes(breaks: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut xs, mut w, mut we) = (Vec::new(), Vec::new(), Vec::new());
    let half_period = PI / lambda;
    for pair in breaks.windows(2) {
        let (mut a, b) = (pair[0], pair[1]);
        if a == 0.0 {
            let end = b.min(half_period);
            let level = 6;
            let h = 0.5f64.powi(level);
            let rule = DeRule {
                min_distance: 1e-30,
                ..DeRule::default()
            };
            for (n, coarse) in rule.nodes(0.0, end, level as u32) {
                if n.x >= end || xs.last().is_some_and(|&l| n.x <= l) {
                    continue;
                }
                xs.push(n.x);
                w.push(n.weight * h);
                we.push(if coarse { 2.0 * n.weight * h } else { 0.0 });
            }
            a = end;
        }
        let panels = ((b - a) / half_period).ceil().max(1.0);
        let width = (b - a) / panels;
        for i in 0..panels as usize {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == panels as usize { b } else { lo + width };
            if hi <= lo {
                continue;
            }
            for (x, wk, wg) in kronrod21(lo, hi) {
                xs.push(x);
                w.push(wk);
                we.push(wg);
            }
        }
    }
    (xs, w, we)
}

/// `P_x(tau > t)`, evaluated serially.
pub fn survival(psi: &dyn LaplaceExponent, t: f64, x: f64, tol: Tolerance) -> Result<SpectralValue, Error> {
    Ok(Spectral::new(psi, tol)?.survival(t, &[x])?[0])
}

/// First-passage density at `t` from `x`, evaluated serially.
pub fn fpt_density(psi: &dyn LaplaceExponent, t: f64, x: f64, tol: Tolerance) -> Result<SpectralValue, Error> {
    Ok(Spectral::new(psi, tol)?.fpt_density(t, &[x])?[0])
}

/// `p_t(x, y)`, evaluated serially.
pub fn heat_kernel(psi: &dyn LaplaceExponent, t: f64, x: f64, y: f64, tol: Tolerance) -> Result<SpectralValue, Error> {
    Ok(Spectral::new(psi, tol)?.heat_kernel(t, &[(x, y)])?[0])
}

/// `Pi f(lambda)`, evaluated serially.
pub fn pi_transform(
    psi: &dyn LaplaceExponent,
    f: &(dyn Fn(f64) -> f64 + Sync),
    support: &Support,
    lambda: f64,
    tol: Tolerance,
) -> Result<QuadratureResult, Error> {
    Ok(Spectral::new(psi, tol)?.pi_transform(f, support, &[lambda])?[0])
}

/// `Pi* g(x)` on `grid`, evaluated serially.
pub fn pi_star(
    psi: &dyn LaplaceExponent,
    g: &(dyn Fn(f64) -> f64 + Sync),
    x: f64,
    grid: &SpectralGrid,
    tol: Tolerance,
) -> Result<SpectralValue, Error> {
    Ok(Spectral::new(psi, tol)?.pi_star(g, &[x], grid)?[0])
}
