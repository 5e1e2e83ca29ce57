//! Monte Carlo simulation of subordinate Brownian motion killed on leaving
//! `(0, inf)`, used as an independent check of the spectral formulas.
//!
//! Paths follow `x_{k+1} = x_k + sqrt(2 s_k) N` with `s_k` a subordinator
//! increment over `dt`, and are killed at the first grid time with
//! `x_k <= 0`. Killing is only detected at grid times, so survival
//! estimates are biased upwards; the bias shrinks with `dt`.

use std::io::{Read, Write};

use halfline_core::numerics::pairwise_sum;
use halfline_core::{Eigenfunction, LaplaceExponent, ModelSpec};
use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Draws subordinator increments `Z_dt`.
#[derive(Debug, Clone, PartialEq)]
pub enum SubordinatorSampler {
    /// Laplace exponent `xi^beta`, `0 < beta < 1`.
    Stable { beta: f64 },
    /// `sqrt(m^2 + xi) - m`: the 1/2-stable subordinator tilted by `exp(-m^2 s)`.
    Relativistic { m: f64 },
    /// `log(1 + xi)`.
    Gamma,
    /// `rate * xi / (xi + jump_rate)`: Poisson jumps with exponential sizes.
    CompoundPoisson { rate: f64, jump_rate: f64 },
    /// `beta * xi`.
    Drift { beta: f64 },
    /// Independent sum.
    Sum(Vec<SubordinatorSampler>),
    /// `factor * inner(xi)`, i.e. the inner subordinator run at `factor * dt`.
    TimeChanged { factor: f64, inner: Box<SubordinatorSampler> },
}

/// Rejection attempts before a relativistic draw gives up and reports it.
const MAX_REJECTIONS: u32 = 100_000;

/// Counters collected while sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub rejections: u64,
    /// Draws that hit the rejection cap and returned an unaccepted candidate.
    pub capped: u64,
}

impl Diagnostics {
    fn merge(self, o: Diagnostics) -> Diagnostics {
        Diagnostics {
            rejections: self.rejections + o.rejections,
            capped: self.capped + o.capped,
        }
    }
}

impl SubordinatorSampler {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Stable { alpha } if *alpha == 2.0 => SubordinatorSampler::Drift { beta: 1.0 },
            ModelSpec::Stable { alpha } => SubordinatorSampler::Stable { beta: alpha / 2.0 },
            ModelSpec::Relativistic { m } => SubordinatorSampler::Relativistic { m: *m },
            ModelSpec::StablePlusDrift { alpha, beta } => SubordinatorSampler::Sum(vec![
                Self::from_spec(&ModelSpec::Stable { alpha: *alpha })?,
                SubordinatorSampler::Drift { beta: *beta },
            ]),
            ModelSpec::Gamma => SubordinatorSampler::Gamma,
            ModelSpec::CpExponential => SubordinatorSampler::CompoundPoisson { rate: 1.0, jump_rate: 1.0 },
            ModelSpec::Rational { terms } => SubordinatorSampler::Sum(
                terms
                    .iter()
                    .map(|t| SubordinatorSampler::CompoundPoisson { rate: t.weight, jump_rate: t.pole })
                    .collect(),
            ),
            ModelSpec::Sum { terms } => {
                SubordinatorSampler::Sum(terms.iter().map(Self::from_spec).collect::<Result<_>>()?)
            }
            ModelSpec::Scaled { factor, inner } => SubordinatorSampler::TimeChanged {
                factor: *factor,
                inner: Box::new(Self::from_spec(inner)?),
            },
            ModelSpec::LogLog => {
                return Err(Error::Unsupported(
                    "no sampler is available for log(1 + log(1 + xi)); use the spectral commands".into(),
                ))
            }
        })
    }

    /// One increment over `dt > 0`.
    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, diag: &mut Diagnostics) -> f64 {
        match self {
            SubordinatorSampler::Stable { beta } => dt.powf(1.0 / beta) * kanter(*beta, rng),
            SubordinatorSampler::Relativistic { m } => {
                let mut tries = 0;
                loop {
                    let n: f64 = rng.sample(StandardNormal);
                    let s = dt * dt / (2.0 * n * n);
                    let u: f64 = rng.sample(Open01);
                    if u <= (-m * m * s).exp() {
                        return s;
                    }
                    tries += 1;
                    diag.rejections += 1;
                    if tries >= MAX_REJECTIONS {
                        diag.capped += 1;
                        return s;
                    }
                }
            }
            SubordinatorSampler::Gamma => Gamma::new(dt, 1.0).expect("positive shape").sample(rng),
            SubordinatorSampler::CompoundPoisson { rate, jump_rate } => {
                let k: f64 = Poisson::new(rate * dt).expect("positive mean").sample(rng);
                if k == 0.0 {
                    0.0
                } else {
                    Gamma::new(k, 1.0 / jump_rate).expect("positive shape").sample(rng)
                }
            }
            SubordinatorSampler::Drift { beta } => beta * dt,
            SubordinatorSampler::Sum(terms) => terms.iter().map(|t| t.sample(dt, rng, diag)).sum(),
            SubordinatorSampler::TimeChanged { factor, inner } => inner.sample(factor * dt, rng, diag),
        }
    }
}

/// Positive `beta`-stable variable with Laplace transform `exp(-xi^beta)`
/// (Kanter's representation).
fn kanter<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u: f64 = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    let a = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let b = (((1.0 - beta) * u).sin() / e).powf((1.0 - beta) / beta);
    a * b
}

/// Where one simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub alive: bool,
    /// Final position, or the first non-positive position for killed paths.
    pub position: f64,
    pub steps: u64,
}

impl PathOutcome {
    /// Position at the horizon for surviving paths.
    pub fn survivor(&self) -> Option<f64> {
        self.alive.then_some(self.position)
    }
}

fn step_count(t: f64, dt: f64) -> u64 {
    ((t / dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

fn check_path_args(x: f64, t: f64, dt: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Config(format!("starting point must be positive, got {x}")));
    }
    if !(dt > 0.0 && dt <= t) || !t.is_finite() {
        return Err(Error::Config(format!("need 0 < dt <= t, got dt = {dt}, t = {t}")));
    }
    Ok(())
}

/// Simulates one path from `x` up to `ceil(t / dt)` steps.
pub fn simulate_killed<R: Rng + ?Sized>(
    sampler: &SubordinatorSampler,
    x: f64,
    t: f64,
    dt: f64,
    rng: &mut R,
    diag: &mut Diagnostics,
) -> PathOutcome {
    let steps = step_count(t, dt);
    let mut pos = x;
    for k in 1..=steps {
        let s = sampler.sample(dt, rng, diag);
        let n: f64 = rng.sample(StandardNormal);
        pos += (2.0 * s).sqrt() * n;
        if pos <= 0.0 {
            return PathOutcome { alive: false, position: pos, steps: k };
        }
    }
    PathOutcome { alive: true, position: pos, steps }
}

/// Generator for replica `index`: one ChaCha stream per replica, so results
/// do not depend on how replicas are spread over workers.
pub fn replica_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Outcomes of `n` independent replicas, in replica order.
pub fn simulate_replicas(
    sampler: &SubordinatorSampler,
    x: f64,
    t: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<(Vec<PathOutcome>, Diagnostics)> {
    check_path_args(x, t, dt)?;
    let out: Vec<(PathOutcome, Diagnostics)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(seed, i);
            let mut d = Diagnostics::default();
            let o = simulate_killed(sampler, x, t, dt, &mut rng, &mut d);
            (o, d)
        })
        .collect();
    let diag = out.iter().fold(Diagnostics::default(), |a, (_, d)| a.merge(*d));
    Ok((out.into_iter().map(|(o, _)| o).collect(), diag))
}

/// Sample mean with standard error `sample std / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
}

impl McEstimate {
    pub(crate) fn from_samples(samples: &[f64], dt: f64, seed: u64) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let dev: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        McEstimate {
            value: mean,
            stderr: (var / n as f64).sqrt(),
            n,
            dt,
            seed,
        }
    }

    /// `(value - target) / stderr`; infinite when the estimate has no spread
    /// and misses the target.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(d)
        }
    }
}

/// Smallest sample size accepted by the estimators.
pub const MIN_SAMPLES: usize = 1000;

fn check_n(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::Config(format!("need at least {MIN_SAMPLES} replicas, got {n}")));
    }
    Ok(())
}

/// Fraction of paths from `x` still alive at `t`.
pub fn mc_survival(spec: &ModelSpec, x: f64, t: f64, n: usize, dt: f64, seed: u64) -> Result<McEstimate> {
    check_n(n)?;
    let sampler = SubordinatorSampler::from_spec(spec)?;
    let (paths, _) = simulate_replicas(&sampler, x, t, dt, n, seed)?;
    let ind: Vec<f64> = paths.iter().map(|p| if p.alive { 1.0 } else { 0.0 }).collect();
    Ok(McEstimate::from_samples(&ind, dt, seed))
}

/// Average of `F_lambda(X_t)` over surviving paths (zero for killed ones),
/// to be compared with `exp(-t psi(lambda^2)) F_lambda(x)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_eigen_check(
    spec: &ModelSpec,
    lambda: f64,
    x: f64,
    t: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<McEstimate> {
    check_n(n)?;
    let model = halfline_core::build_model(spec)?;
    let ef = Eigenfunction::new(&model, lambda)?;
    let sampler = SubordinatorSampler::from_spec(spec)?;
    let (paths, _) = simulate_replicas(&sampler, x, t, dt, n, seed)?;
    let values: Vec<f64> = paths
        .par_iter()
        .map(|p| match p.survivor() {
            Some(y) => ef.f(y),
            None => Ok(0.0),
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok(McEstimate::from_samples(&values, dt, seed))
}

/// The eigenvalue relation's right-hand side `exp(-t psi(lambda^2)) F_lambda(x)`.
pub fn eigen_target(psi: &dyn LaplaceExponent, lambda: f64, x: f64, t: f64) -> Result<f64> {
    let ef = Eigenfunction::new(psi, lambda)?;
    Ok((-t * psi.eval(lambda * lambda)).exp() * ef.f(x)?)
}

/// Density of surviving paths at `y`: the fraction alive in a bin of width
/// `width` centred at `y`, divided by `width`.
#[allow(clippy::too_many_arguments)]
pub fn mc_density(
    spec: &ModelSpec,
    x: f64,
    t: f64,
    y: f64,
    width: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<McEstimate> {
    check_n(n)?;
    if !(width > 0.0) || y - 0.5 * width < 0.0 {
        return Err(Error::Config(format!("bin [{}, {}] must lie in [0, inf)", y - 0.5 * width, y + 0.5 * width)));
    }
    let sampler = SubordinatorSampler::from_spec(spec)?;
    let (paths, _) = simulate_replicas(&sampler, x, t, dt, n, seed)?;
    let values: Vec<f64> = paths
        .iter()
        .map(|p| match p.survivor() {
            Some(z) if (z - y).abs() <= 0.5 * width => 1.0 / width,
            _ => 0.0,
        })
        .collect();
    Ok(McEstimate::from_samples(&values, dt, seed))
}

/// Writes outcomes as little-endian `f64` triples
/// `(position, alive as 0/1, steps)`.
pub fn write_dump<W: Write>(mut w: W, outcomes: &[PathOutcome]) -> Result<()> {
    for o in outcomes {
        w.write_all(&o.position.to_le_bytes())?;
        w.write_all(&(if o.alive { 1.0f64 } else { 0.0 }).to_le_bytes())?;
        w.write_all(&(o.steps as f64).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dump written by [`write_dump`].
pub fn read_dump<R: Read>(mut r: R) -> Result<Vec<PathOutcome>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 24 != 0 {
        return Err(Error::Parse(format!("dump length {} is not a multiple of 24 bytes", bytes.len())));
    }
    let word = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    Ok(bytes
        .chunks_exact(24)
        .map(|c| PathOutcome {
            position: word(&c[0..8]),
            alive: word(&c[8..16]) != 0.0,
            steps: word(&c[16..24]) as u64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use halfline_core::build_model;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn draws(spec: &ModelSpec, dt: f64, n: usize, seed: u64) -> Vec<f64> {
        let s = SubordinatorSampler::from_spec(spec).unwrap();
        let mut rng = replica_rng(seed, 0);
        let mut d = Diagnostics::default();
        (0..n).map(|_| s.sample(dt, &mut rng, &mut d)).collect()
    }

    fn catalog() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Stable { alpha: 0.8 },
            ModelSpec::Stable { alpha: 1.5 },
            ModelSpec::brownian(),
            ModelSpec::Relativistic { m: 1.0 },
            ModelSpec::StablePlusDrift { alpha: 1.0, beta: 0.5 },
            ModelSpec::Gamma,
            ModelSpec::CpExponential,
            ModelSpec::Rational {
                terms: vec![
                    halfline_core::RationalTerm { weight: 5.0, pole: 1.0 },
                    halfline_core::RationalTerm { weight: 1.0, pole: 5.0 },
                ],
            },
            ModelSpec::Scaled { factor: 2.0, inner: Box::new(ModelSpec::Gamma) },
        ]
    }

    #[test]
    fn increments_have_the_right_laplace_transform() {
        for (k, spec) in catalog().into_iter().enumerate() {
            let m = build_model(&spec).unwrap();
            let dt = 0.7;
            let z = draws(&spec, dt, 200_000, 11 + k as u64);
            assert!(z.iter().all(|v| *v >= 0.0));
            for xi in [0.5, 1.0, 2.0] {
                let v: Vec<f64> = z.iter().map(|s| (-xi * s).exp()).collect();
                let est = McEstimate::from_samples(&v, dt, 0);
                let target = (-dt * m.eval(xi)).exp();
                assert!((est.value - target).abs() <= 3.0 * est.stderr + 1e-12,
                    "{spec:?} xi={xi}: {} vs {target} (stderr {})", est.value, est.stderr);
            }
        }
    }

    #[test]
    fn gamma_increments_have_unit_mean() {
        let z = draws(&ModelSpec::Gamma, 1.0, 1_000_000, 3);
        let est = McEstimate::from_samples(&z, 1.0, 3);
        assert!(est.z_score(1.0).abs() < 3.0, "{est:?}");
    }

    #[test]
    fn relativistic_increments_have_mean_dt_over_2m() {
        // psi'(0) = 1 / (2m)
        let z = draws(&ModelSpec::Relativistic { m: 2.0 }, 1.0, 1_000_000, 5);
        let est = McEstimate::from_samples(&z, 1.0, 5);
        assert!(est.z_score(0.25).abs() < 3.0, "{est:?}");
    }

    #[test]
    fn half_stable_tail() {
        // Laplace exponent sqrt(xi): Z = 1 / (2 N^2), P(Z > z) = erf(1 / (2 sqrt z))
        let z = draws(&ModelSpec::Stable { alpha: 1.0 }, 1.0, 1_000_000, 9);
        for level in [1e2, 1e4] {
            let ind: Vec<f64> = z.iter().map(|v| if *v > level { 1.0 } else { 0.0 }).collect();
            let est = McEstimate::from_samples(&ind, 1.0, 9);
            let exact = statrs::function::erf::erf(0.5 / f64::sqrt(level));
            assert!(est.z_score(exact).abs() < 3.0, "{level}: {est:?} vs {exact}");
            let asymptote = 1.0 / (std::f64::consts::PI * level).sqrt();
            assert!((exact / asymptote - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn compound_poisson_is_mostly_zero_over_short_steps() {
        let z = draws(&ModelSpec::CpExponential, 1e-9, 1000, 1);
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn log_log_has_no_sampler() {
        assert!(matches!(SubordinatorSampler::from_spec(&ModelSpec::LogLog), Err(Error::Unsupported(_))));
    }

    #[test]
    fn far_start_survives() {
        let est = mc_survival(&ModelSpec::Stable { alpha: 1.5 }, 1e6, 1.0, 2000, 1e-2, 1).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn single_step_brownian_survival() {
        let (x, t) = (0.5, 1.0);
        let est = mc_survival(&ModelSpec::brownian(), x, t, 100_000, t, 2).unwrap();
        let exact = Normal::new(0.0, 1.0).unwrap().cdf(x / (2.0 * t).sqrt());
        assert!(est.z_score(exact).abs() < 3.0, "{est:?} vs {exact}");
        // grid-time killing overestimates survival
        assert!(exact > statrs::function::erf::erf(x / (2.0 * t.sqrt())));
    }

    #[test]
    fn survival_bias_shrinks_with_the_step() {
        let exact = statrs::function::erf::erf(0.5);
        let mut last = f64::INFINITY;
        for dt in [1e-1, 1e-2, 1e-3] {
            let est = mc_survival(&ModelSpec::brownian(), 1.0, 1.0, 20_000, dt, 4).unwrap();
            assert!(est.value < last + est.stderr, "dt {dt}: {} after {last}", est.value);
            assert!(est.value > exact - 3.0 * est.stderr);
            last = est.value;
        }
    }

    #[test]
    fn brownian_eigenfunction_relation_up_to_grid_killing_bias() {
        // Killing only at grid times acts like continuous killing at a barrier
        // moved down by 0.5826 sqrt(2 dt); compare against that shifted problem.
        let (lambda, x, t, dt) = (1.0, 1.0, 0.5, 1e-3);
        let est = mc_eigen_check(&ModelSpec::brownian(), lambda, x, t, 50_000, dt, 6).unwrap();
        let shift = 0.582_597_157_939_010_7 * (2.0 * dt).sqrt();
        let k = |z: f64| (-z * z / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt();
        let (a, b, n) = (-shift, 30.0, 20_000);
        let h = (b - a) / n as f64;
        let f = |y: f64| (k(y - x) - k(y + x + 2.0 * shift)) * (lambda * y).sin();
        let shifted = (1..n)
            .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
            .sum::<f64>()
            * h
            / 3.0
            + (f(a) + f(b)) * h / 3.0;
        assert!(est.z_score(shifted).abs() < 3.0, "{est:?} vs {shifted}");
        let exact = (-t * lambda * lambda).exp() * (lambda * x).sin();
        assert!(shifted - exact > 0.005);
    }

    #[test]
    fn results_do_not_depend_on_the_worker_count() {
        let spec = ModelSpec::Stable { alpha: 1.2 };
        let run = |threads| {
            crate::parallel::thread_pool(Some(threads))
                .unwrap()
                .install(|| mc_survival(&spec, 1.0, 0.2, 3000, 1e-2, 42).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        let c = run(2);
        assert_eq!(a, c);
        let d = crate::parallel::thread_pool(Some(1))
            .unwrap()
            .install(|| mc_survival(&spec, 1.0, 0.2, 3000, 1e-2, 43).unwrap());
        assert_ne!(a.value, d.value);
    }

    #[test]
    fn dump_round_trip() {
        let s = SubordinatorSampler::from_spec(&ModelSpec::Stable { alpha: 1.0 }).unwrap();
        let (paths, _) = simulate_replicas(&s, 0.5, 0.3, 0.01, 200, 8).unwrap();
        let mut buf = Vec::new();
        write_dump(&mut buf, &paths).unwrap();
        assert_eq!(buf.len(), 24 * paths.len());
        assert_eq!(read_dump(&buf[..]).unwrap(), paths);
        assert!(read_dump(&buf[..23]).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        let spec = ModelSpec::brownian();
        assert!(mc_survival(&spec, 1.0, 1.0, 10, 1e-2, 0).is_err());
        assert!(mc_survival(&spec, -1.0, 1.0, 1000, 1e-2, 0).is_err());
        assert!(mc_survival(&spec, 1.0, 1.0, 1000, 2.0, 0).is_err());
    }
}
