//! The eigenfunctions `F_lambda(x) = sin(lambda x + theta_lambda) - G_lambda(x)`
//! of the killed process, where `G_lambda` is the Laplace transform of a
//! non-negative density `gamma_lambda`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use once_cell::race::OnceBox;

use crate::cbf::{boundary_value, LaplaceExponent};
use crate::numerics::{kronrod21, pairwise_sum, DeRule, QuadratureResult, Tolerance};
use crate::wiener_hopf::{DaggerGrid, WhContext};
use crate::Error;

/// Points of the atom scan per decade of `xi / lambda`.
const ATOM_SCAN_PER_DECADE: usize = 50;
const ATOM_SCAN_DECADES: i32 = 4;

#[derive(Debug, Clone, Copy)]
struct TableNode {
    xi: f64,
    /// Quadrature weight times the density.
    mass: f64,
    coarse: bool,
    /// Beyond the last breakpoint.
    tail: bool,
}

/// `F_lambda` with its density table.
#[derive(Debug, Clone)]
pub struct Eigenfunction<'a> {
    ctx: WhContext<'a>,
    theta: f64,
    atoms: Vec<f64>,
    table: Vec<TableNode>,
    step: f64,
    table_level: u32,
    tol: Tolerance,
    grid: Option<DaggerGrid>,
    small_x: OnceBox<SmallXTail>,
}

/// Quadrature of `int_b^inf gamma(xi) exp(-x xi) d xi` for small `x`, `b` the
/// last breakpoint: tanh-sinh on `[b, 2b]`, then Kronrod panels of unit
/// length in `log xi`. Entries are `(xi, weight * density, embedded weight * density)`.
#[derive(Debug, Clone)]
struct SmallXTail {
    nodes: Vec<(f64, f64, f64)>,
}

/// Below this value of `lambda x` the table is not trusted and `G` is
/// integrated adaptively.
const SMALL_ARGUMENT: f64 = 1e-3;
/// Below this value of `lambda x` the small-x asymptote is used.
const TINY_ARGUMENT: f64 = 1e-40;
/// Tanh-sinh nodes closer than this (relative) to an endpoint are dropped.
const TABLE_MIN_DISTANCE: f64 = 1e-60;

impl<'a> Eigenfunction<'a> {
    pub fn new(psi: &'a dyn LaplaceExponent, lambda: f64) -> Result<Self, Error> {
        Self::with_tolerance(psi, lambda, Tolerance::new(1e-11, 1e-9))
    }

    pub fn with_tolerance(psi: &'a dyn LaplaceExponent, lambda: f64, tol: Tolerance) -> Result<Self, Error> {
        let ctx = WhContext::new(psi, lambda)?;
        let theta = ctx.theta()?;
        let mut ef = Eigenfunction {
            ctx,
            theta,
            atoms: Vec::new(),
            table: Vec::new(),
            step: 0.0,
            table_level: 0,
            tol,
            grid: None,
            small_x: OnceBox::new(),
        };
        ef.atoms = ef.scan_atoms();
        if ef.atoms.is_empty() {
            let b = ef.pieces();
            let lo = TABLE_MIN_DISTANCE * b[0] * 1e-3;
            let hi = b[b.len() - 1] / (TABLE_MIN_DISTANCE * TINY_ARGUMENT) * 1e3;
            ef.grid = Some(DaggerGrid::new(&ef.ctx, lo, hi));
            ef.build_table()?;
        }
        Ok(ef)
    }

    pub fn lambda(&self) -> f64 {
        self.ctx.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn context(&self) -> &WhContext<'a> {
        &self.ctx
    }

    /// Locations of atoms of the density, where `psi(-xi^2 + i0) = psi(lambda^2)`.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn table_level(&self) -> u32 {
        self.table_level
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    fn boundary_gap(&self, xi: f64) -> Complex64 {
        Complex64::new(self.ctx.p0, 0.0) - boundary_value(self.ctx.psi, xi * xi)
    }

    fn scan_atoms(&self) -> Vec<f64> {
        let lambda = self.ctx.lambda;
        let scale = self.ctx.p0.abs().max(1e-300);
        let flat = |d: Complex64| d.re.is_finite() && d.im.abs() <= 1e-12 * (d.re.abs() + scale);
        let n = 2 * ATOM_SCAN_DECADES as usize * ATOM_SCAN_PER_DECADE;
        let lo = lambda * 10f64.powi(-ATOM_SCAN_DECADES);
        let ratio = 10f64.powf(1.0 / ATOM_SCAN_PER_DECADE as f64);
        // irrational offset so grid points do not land on poles
        let mut grid: Vec<f64> = (0..=n).map(|k| lo * ratio.powf(k as f64 + core::f64::consts::FRAC_1_PI)).collect();
        grid.extend(self.ctx.psi.cut_points().iter().map(|c| c.sqrt() * (1.0 + 1e-9)));
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut atoms = Vec::new();
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (da, db) = (self.boundary_gap(a), self.boundary_gap(b));
            if !(flat(da) && flat(db)) || da.re.signum() == db.re.signum() {
                continue;
            }
            let (mut x0, mut x1, mut s0) = (a, b, da.re.signum());
            for _ in 0..200 {
                let m = 0.5 * (x0 + x1);
                let dm = self.boundary_gap(m).re;
                if dm.signum() == s0 {
                    x0 = m;
                    s0 = dm.signum();
                } else {
                    x1 = m;
                }
                if x1 - x0 <= 4.0 * f64::EPSILON * x1 {
                    break;
                }
            }
            let root = 0.5 * (x0 + x1);
            let d = self.boundary_gap(root);
            // a sign change through a pole of psi leaves a large gap behind
            if d.norm() <= 1e-6 * scale {
                atoms.push(root);
            }
        }
        atoms
    }

    /// `gamma_lambda(xi)`, the density of `G_lambda`.
    pub fn gamma_density(&self, xi: f64) -> Result<f64, Error> {
        if let Some(&a) = self.atoms.iter().find(|&&a| (a - xi).abs() <= 1e-6 * a.max(1.0)) {
            return Err(Error::Atom { xi: a });
        }
        self.density_unchecked(xi)
    }

    fn density_unchecked(&self, xi: f64) -> Result<f64, Error> {
        self.density_with(xi, self.grid.as_ref())
    }

    fn density_with(&self, xi: f64, grid: Option<&DaggerGrid>) -> Result<f64, Error> {
        if !(xi > 0.0) {
            return Ok(0.0);
        }
        let gap = self.boundary_gap(xi);
        if !(gap.re.is_finite() && gap.im.is_finite()) {
            return Ok(0.0);
        }
        let im = (Complex64::new(self.ctx.lambda * self.ctx.p1, 0.0) / gap).im;
        if im == 0.0 || !im.is_finite() {
            return Ok(0.0);
        }
        let dagger = match grid {
            Some(g) if g.covers(xi) => g.eval(xi),
            _ => self.ctx.psi_dagger_real(xi)?,
        };
        Ok(self.ctx.value_at_lambda().sqrt() / dagger * im / PI)
    }

    fn pieces(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.ctx.psi.cut_points().iter().map(|c| c.sqrt()).collect();
        b.push(self.ctx.lambda);
        b.retain(|x| *x > 0.0 && x.is_finite());
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup_by(|a, c| (*a - *c).abs() <= 1e-12 * c.abs());
        b
    }

    fn table_at_level(&self, level: u32) -> Result<Vec<TableNode>, Error> {
        let rule = DeRule {
            min_distance: TABLE_MIN_DISTANCE,
            ..DeRule::default()
        };
        let breaks = self.pieces();
        let cap = 1e12 * self.ctx.lambda.max(*breaks.last().unwrap());
        let mut out = Vec::new();
        let mut start = 0.0;
        for &b in &breaks {
            for (n, coarse) in rule.nodes(start, b, level) {
                let xi = if n.from_a < n.from_b { start + n.from_a } else { b - n.from_b };
                out.push((xi, n.weight, coarse, false));
            }
            start = b;
        }
        // tail xi = start / s for s in (0, 1)
        for (n, coarse) in rule.nodes(0.0, 1.0, level) {
            let s = n.x;
            let xi = start / s;
            if xi > cap {
                continue;
            }
            out.push((xi, n.weight * start / (s * s), coarse, true));
        }
        let mut table = Vec::with_capacity(out.len());
        for (xi, w, coarse, tail) in out {
            let g = self.density_unchecked(xi)?;
            if g != 0.0 {
                table.push(TableNode { xi, mass: w * g, coarse, tail });
            }
        }
        Ok(table)
    }

    fn build_table(&mut self) -> Result<(), Error> {
        let lambda = self.ctx.lambda;
        let probes = [SMALL_ARGUMENT / lambda, 1e-2 / lambda, 0.3 / lambda, 3.0 / lambda];
        let mut level = 3;
        loop {
            self.table = self.table_at_level(level)?;
            self.step = 0.5f64.powi(level as i32);
            self.table_level = level;
            let worst = probes
                .iter()
                .map(|&x| {
                    let q = self.g_table(x);
                    q.error_estimate / self.tol.bound(q.value)
                })
                .fold(0.0, f64::max);
            if worst <= 1.0 || level >= 8 {
                return Ok(());
            }
            level += 1;
        }
    }

    fn g_table(&self, x: f64) -> QuadratureResult {
        let mut fine = Vec::with_capacity(self.table.len());
        let mut coarse = Vec::with_capacity(self.table.len() / 2 + 1);
        for n in &self.table {
            let v = n.mass * (-x * n.xi).exp();
            fine.push(v);
            if n.coarse {
                coarse.push(v);
            }
        }
        let value = pairwise_sum(&fine) * self.step;
        let rough = pairwise_sum(&coarse) * (2.0 * self.step);
        let error_estimate = (value - rough).abs();
        QuadratureResult {
            value,
            error_estimate,
            evaluations: fine.len(),
            converged: error_estimate <= self.tol.bound(value),
        }
    }

    /// `F_lambda(0+)`: zero for unbounded `psi`, otherwise
    /// `lambda sqrt(psi'(lambda^2) / (psi(inf) - psi(lambda^2)))`.
    pub fn f_at_zero(&self) -> f64 {
        let lim = self.ctx.psi.limit_at_infinity();
        if lim.is_infinite() {
            0.0
        } else {
            self.ctx.lambda * (self.ctx.p1 / (lim - self.ctx.p0)).sqrt()
        }
    }

    fn build_small_x_tail(&self) -> Result<SmallXTail, Error> {
        let b = *self.pieces().last().expect("lambda is a breakpoint");
        let mut nodes = Vec::new();
        let level = 6;
        let h = 0.5f64.powi(level as i32);
        let rule = DeRule {
            min_distance: TABLE_MIN_DISTANCE,
            ..DeRule::default()
        };
        for (n, coarse) in rule.nodes(b, 2.0 * b, level) {
            let xi = if n.from_a < n.from_b { b + n.from_a } else { 2.0 * b - n.from_b };
            let g = self.density_unchecked(xi)?;
            nodes.push((xi, n.weight * h * g, if coarse { 2.0 * n.weight * h * g } else { 0.0 }));
        }
        // far enough that exp(-x xi) < exp(-50) for the smallest x handled here
        let u0 = (2.0 * b).ln();
        let u_end = (50.0 * self.ctx.lambda / TINY_ARGUMENT).ln();
        let panels = (u_end - u0).ceil().max(1.0) as usize;
        for k in 0..panels {
            let a = u0 + k as f64;
            for (u, wk, wg) in kronrod21(a, a + 1.0) {
                let xi = u.exp();
                let g = self.density_unchecked(xi)? * xi;
                nodes.push((xi, wk * g, wg * g));
            }
        }
        Ok(SmallXTail { nodes })
    }

    /// `G_lambda(x)` for `lambda x < SMALL_ARGUMENT`: the table below the last
    /// breakpoint and a quadrature that resolves `exp(-x xi)` above it.
    fn g_small(&self, x: f64) -> Result<QuadratureResult, Error> {
        let tail = self.small_x.get_or_try_init(|| self.build_small_x_tail().map(alloc::boxed::Box::new))?;
        let mut fine = Vec::new();
        let mut coarse = Vec::new();
        for n in self.table.iter().filter(|n| !n.tail) {
            let v = n.mass * (-x * n.xi).exp();
            fine.push(v * self.step);
            if n.coarse {
                coarse.push(v * 2.0 * self.step);
            }
        }
        for &(xi, w, we) in &tail.nodes {
            let e = (-x * xi).exp();
            if e == 0.0 {
                break;
            }
            fine.push(w * e);
            coarse.push(we * e);
        }
        let value = pairwise_sum(&fine);
        let error_estimate = (value - pairwise_sum(&coarse)).abs();
        Ok(QuadratureResult {
            value,
            error_estimate,
            evaluations: fine.len(),
            converged: error_estimate <= self.tol.bound(value),
        })
    }

    /// `G_lambda(x)` for `x >= 0` with an error estimate.
    pub fn g(&self, x: f64) -> Result<QuadratureResult, Error> {
        if let Some(&a) = self.atoms.first() {
            return Err(Error::Atom { xi: a });
        }
        if !(x >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("x must be non-negative, got {x}")));
        }
        let u = self.ctx.lambda * x;
        if u < SMALL_ARGUMENT {
            if u < TINY_ARGUMENT {
                let g0 = self.theta.sin() - self.f_at_zero();
                let f = self.small_x_asymptote(x).unwrap_or(0.0);
                return Ok(QuadratureResult { value: g0 - f, error_estimate: f, evaluations: 0, converged: true });
            }
            return self.g_small(x);
        }
        Ok(self.g_table(x))
    }

    /// `F_lambda(x) = sin(lambda x + theta) - G_lambda(x)`.
    pub fn f(&self, x: f64) -> Result<f64, Error> {
        if let Some(&a) = self.atoms.first() {
            return Err(Error::Atom { xi: a });
        }
        let u = self.ctx.lambda * x;
        if x == 0.0 {
            return Ok(self.f_at_zero());
        }
        if u < SMALL_ARGUMENT {
            if u < TINY_ARGUMENT {
                if let Ok(a) = self.small_x_asymptote(x) {
                    return Ok(a);
                }
            }
            return Ok((u + self.theta).sin() - self.g_small(x)?.value);
        }
        Ok((u + self.theta).sin() - self.g_table(x).value)
    }

    /// Laplace transform `c_lambda psi_lambda^dagger(xi) / (lambda^2 + xi^2)`, `Re xi > 0`.
    pub fn laplace_f(&self, xi: Complex64) -> Result<Complex64, Error> {
        let l2 = self.ctx.lambda * self.ctx.lambda;
        if xi.re == 0.0 && xi.im == 0.0 {
            return Ok(Complex64::new(self.ctx.c_lambda() / l2, 0.0));
        }
        let d = self.ctx.psi_dagger(xi)?;
        Ok(d * self.ctx.c_lambda() / (xi * xi + l2))
    }

    /// `int_0^inf G_lambda(x) dx = (cos theta - sqrt(lambda^2 psi' / psi)) / lambda`.
    pub fn g_mass(&self) -> f64 {
        let l = self.ctx.lambda;
        (self.theta.cos() - (l * l * self.ctx.p1 / self.ctx.p0).sqrt()) / l
    }

    /// Small-`x` behaviour `Gamma(1 + rho)^-1 sqrt(lambda^2 psi'(lambda^2) / psi(x^-2))`
    /// for `psi` regularly varying of index `rho` at infinity.
    pub fn small_x_asymptote(&self, x: f64) -> Result<f64, Error> {
        let rho = self.ctx.psi.regular_variation_index().ok_or_else(|| {
            Error::Condition("small-x asymptote needs an unbounded, regularly varying psi".into())
        })?;
        let l = self.ctx.lambda;
        Ok((l * l * self.ctx.p1 / self.ctx.psi.eval(1.0 / (x * x))).sqrt() / libm::tgamma(1.0 + rho))
    }
}
