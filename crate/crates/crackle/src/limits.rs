//! Limiting objects: intensity measures of the Poisson limits, Fréchet and
//! Gumbel finite-dimensional laws for the maxima process, and the series
//! sampler for the stable partial-sum limit.
//!
//! Monte Carlo estimators use plain uniform proposals on compact boxes and a
//! uniform direction on the sphere; sampling the direction uniformly with
//! respect to surface measure realizes the d-dimensional polar Jacobian
//! without writing the sine products out. d = 1 uses the two-point sphere
//! `S^0 = {-1, +1}` with counting measure, so `s_0 = 2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::function::gamma::gamma;

use crate::distributions::Points;
use crate::error::{Error, Result};
use crate::topology::{evaluate_h, ConstraintH};

/// Surface area of the (d-1)-dimensional unit sphere in R^d:
/// `2 pi^{d/2} / Gamma(d/2)`, with `s_0 = 2` for d = 1.
pub fn sphere_surface_area(d: usize) -> f64 {
    match d {
        0 => panic!("dimension must be >= 1"),
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            let hd = d as f64 / 2.0;
            2.0 * std::f64::consts::PI.powf(hd) / gamma(hd)
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Tail parameters entering an intensity measure.
#[derive(Clone, Copy, Debug)]
pub enum TailParam {
    /// Heavy regularly varying tail with exponent alpha.
    HeavyAlpha(f64),
    /// Light tail with regime constant `c` (possibly infinite).
    LightC(f64),
}

/// Inputs of a limiting Poisson intensity: tuple size, dimension, tail
/// parameters, and the Monte Carlo estimate of `int h(0, y) dy`.
#[derive(Clone, Copy, Debug)]
pub struct IntensityParams {
    pub k: usize,
    pub d: usize,
    pub tail: TailParam,
    pub h_integral: f64,
    pub h_stderr: f64,
}

/// Monte Carlo estimate of `int_{(R^d)^{k-1}} h(0, y) dy` with its standard
/// error. The integrand vanishes outside `[-M, M]^{d(k-1)}` by the proximity
/// bound, so a uniform proposal on that box is exact in expectation.
pub fn integrate_h(
    constraint: &ConstraintH,
    d: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be positive"));
    }
    let k = constraint.tuple_size;
    let m = constraint.proximity_m;
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::domain("constraint must have a finite proximity bound"));
    }
    let dims = d * (k - 1);
    let volume = (2.0 * m).powi(dims as i32);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut tuple = vec![0.0; d * k];
    let mut hits = 0usize;
    for _ in 0..mc_samples {
        for v in tuple[d..].iter_mut() {
            *v = rng.random_range(-m..m);
        }
        if evaluate_h(constraint, Points::new(&tuple, d), 1.0)? {
            hits += 1;
        }
    }
    let n = mc_samples as f64;
    let p = hits as f64 / n;
    let se = (p * (1.0 - p) / n).sqrt();
    Ok((volume * p, volume * se))
}

/// Closed-form tail mass of the heavy intensity:
/// `nu_k{ x : ||x_i|| >= eta for all i } = s_{d-1} / ((alpha k - d) k!) * h_integral * eta^{-(alpha k - d)}`.
pub fn nu_heavy_tail_mass(
    k: usize,
    d: usize,
    alpha: f64,
    h_integral: f64,
    eta: f64,
) -> Result<f64> {
    let exponent = alpha * k as f64 - d as f64;
    if exponent <= 0.0 {
        return Err(Error::domain(format!(
            "finite tail mass requires alpha*k > d (alpha = {alpha}, k = {k}, d = {d})"
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::domain("eta must be positive"));
    }
    Ok(sphere_surface_area(d) / (exponent * factorial(k)) * h_integral * eta.powf(-exponent))
}

/// Intersection of `k` half-open boxes `(lo_i, hi_i]` in R^d; entries may be
/// infinite.
#[derive(Clone, Debug)]
pub struct RectRegion {
    pub lo: Vec<Vec<f64>>,
    pub hi: Vec<Vec<f64>>,
}

impl RectRegion {
    pub fn new(lo: Vec<Vec<f64>>, hi: Vec<Vec<f64>>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::domain("need matching lo/hi box lists"));
        }
        let d = lo[0].len();
        if lo.iter().chain(&hi).any(|v| v.len() != d) {
            return Err(Error::domain("boxes must share one dimension"));
        }
        Ok(RectRegion { lo, hi })
    }

    /// Componentwise intersection; `None` when empty.
    fn intersection(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.lo[0].len();
        let mut lo = vec![f64::NEG_INFINITY; d];
        let mut hi = vec![f64::INFINITY; d];
        for (l, h) in self.lo.iter().zip(&self.hi) {
            for j in 0..d {
                lo[j] = lo[j].max(l[j]);
                hi[j] = hi[j].min(h[j]);
            }
        }
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            None
        } else {
            Some((lo, hi))
        }
    }
}

/// The x-factor region of the heavy intensity.
#[derive(Clone, Debug)]
pub enum XRegion {
    /// Intersection of k half-open boxes (the rectangle form of the measure).
    Boxes(RectRegion),
    /// `{ x : ||x|| >= eta }` (the tail-mass region).
    NormAtLeast(f64),
}

/// Monte Carlo estimate of
/// `nu_k = (1/k!) int h(0,y) dy * int_region ||x||^{-alpha k} dx`
/// for a region bounded away from the origin.
///
/// The x-integral is importance sampled in polar form: a uniform direction
/// and a Pareto radius matched to the `rho^{d-1-alpha k}` kernel, so only the
/// region indicator is left to average.
pub fn nu_heavy_rectangle(
    region: &XRegion,
    k: usize,
    d: usize,
    alpha: f64,
    constraint: &ConstraintH,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let exponent = alpha * k as f64 - d as f64;
    if exponent <= 0.0 {
        return Err(Error::domain("alpha*k must exceed d"));
    }
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be positive"));
    }
    let (h_est, h_se) = integrate_h(constraint, d, mc_samples, crate::distributions::derive_seed(seed, 1))?;

    let (eta, boxes) = match region {
        XRegion::NormAtLeast(eta) => {
            if !(*eta > 0.0) {
                return Err(Error::domain("norm threshold must be positive"));
            }
            (*eta, None)
        }
        XRegion::Boxes(rect) => {
            let Some((lo, hi)) = rect.intersection() else {
                return Ok((0.0, 0.0));
            };
            let mut min2 = 0.0;
            for j in 0..d {
                let c = 0f64.clamp(lo[j], hi[j]);
                min2 += c * c;
            }
            let eta = min2.sqrt();
            if eta == 0.0 {
                return Err(Error::domain(
                    "region touches the origin; the x-integral diverges",
                ));
            }
            (eta, Some((lo, hi)))
        }
    };

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut theta = vec![0.0; d];
    for _ in 0..mc_samples {
        sample_sphere(&mut rng, &mut theta);
        let u: f64 = rng.random();
        let rho = eta * (1.0 - u).powf(-1.0 / exponent);
        let inside = match &boxes {
            None => true, // rho >= eta by construction
            Some((lo, hi)) => (0..d).all(|j| {
                let x = rho * theta[j];
                lo[j] < x && x <= hi[j]
            }),
        };
        if inside {
            hits += 1;
        }
    }
    let n = mc_samples as f64;
    let p = hits as f64 / n;
    let p_se = (p * (1.0 - p) / n).sqrt();
    let factor = sphere_surface_area(d) * eta.powf(-exponent) / (exponent * factorial(k));
    let estimate = factor * h_est * p;
    let stderr = if estimate > 0.0 {
        estimate * ((h_se / h_est).powi(2) + (p_se / p).powi(2)).sqrt()
    } else {
        factor * h_est * p_se
    };
    Ok((estimate, stderr))
}

/// Poisson mean of the light-tail limit at regime constant `c`
/// (`f64::INFINITY` selects the simplified form).
///
/// For finite `c` the triple integral over `(y, theta, rho)` is estimated
/// with a uniform box proposal for `y`, a uniform direction for `theta`, and
/// an Exp(k) proposal for `rho`.
pub fn poisson_mean_light(
    k: usize,
    d: usize,
    c: f64,
    constraint: &ConstraintH,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return Err(Error::domain("regime constant must be positive"));
    }
    let s = sphere_surface_area(d);
    let kf = k as f64;
    if c.is_infinite() {
        let (h_est, h_se) = integrate_h(constraint, d, mc_samples, seed)?;
        let factor = s / (factorial(k) * kf);
        return Ok((factor * h_est, factor * h_se));
    }
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be positive"));
    }
    let m = constraint.proximity_m;
    let dims = d * (k - 1);
    let volume = (2.0 * m).powi(dims as i32);
    let inv_c = 1.0 / c;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut tuple = vec![0.0; d * k];
    let mut theta = vec![0.0; d];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..mc_samples {
        for v in tuple[d..].iter_mut() {
            *v = rng.random_range(-m..m);
        }
        let w = if evaluate_h(constraint, Points::new(&tuple, d), 1.0)? {
            sample_sphere(&mut rng, &mut theta);
            let rho: f64 = {
                let e: f64 = Exp1.sample(&mut rng);
                e / kf
            };
            let mut dot_sum = 0.0;
            let mut admissible = true;
            for i in 1..k {
                let y = &tuple[i * d..(i + 1) * d];
                let dot: f64 = theta.iter().zip(y).map(|(a, b)| a * b).sum();
                if rho + inv_c * dot < 0.0 {
                    admissible = false;
                    break;
                }
                dot_sum += dot;
            }
            if admissible {
                (-inv_c * dot_sum).exp()
            } else {
                0.0
            }
        } else {
            0.0
        };
        sum += w;
        sum_sq += w * w;
    }
    let n = mc_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let factor = volume * s / (factorial(k) * kf);
    Ok((factor * mean, factor * (var / n).sqrt()))
}

/// Finite-dimensional law of the time-scaled extremal Fréchet limit:
/// `P(M_{t_i} <= eta_i, i = 1..K)`.
pub fn frechet_fidi(
    times: &[f64],
    thresholds: &[f64],
    k: usize,
    d: usize,
    alpha: f64,
    h_integral: f64,
) -> Result<f64> {
    validate_fidi(times, thresholds)?;
    if thresholds.iter().any(|&e| e <= 0.0) {
        return Err(Error::domain("Fréchet thresholds must be positive"));
    }
    let exponent = alpha * k as f64 - d as f64;
    if exponent <= 0.0 {
        return Err(Error::domain("alpha*k must exceed d"));
    }
    let coef = sphere_surface_area(d) / (factorial(k).powi(2) * exponent) * h_integral;
    let mut acc = 0.0;
    let mut t_prev = 0.0f64;
    for i in 0..times.len() {
        let min_eta = thresholds[i..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        acc += (times[i].powi(k as i32) - t_prev.powi(k as i32)) * min_eta.powf(-exponent);
        t_prev = times[i];
    }
    Ok((-coef * acc).exp())
}

/// The c-dependent prefactor integral of the Gumbel limit:
/// `int int e^{-c^{-1} sum <theta, y_i>} h(0, y) J(theta) dtheta dy`.
/// With `c = inf` this reduces to `s_{d-1} * int h`.
pub fn gumbel_prefactor(
    constraint: &ConstraintH,
    d: usize,
    c: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return Err(Error::domain("regime constant must be positive"));
    }
    let s = sphere_surface_area(d);
    if c.is_infinite() {
        let (h_est, h_se) = integrate_h(constraint, d, mc_samples, seed)?;
        return Ok((s * h_est, s * h_se));
    }
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be positive"));
    }
    let k = constraint.tuple_size;
    let m = constraint.proximity_m;
    let dims = d * (k - 1);
    let volume = (2.0 * m).powi(dims as i32);
    let inv_c = 1.0 / c;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut tuple = vec![0.0; d * k];
    let mut theta = vec![0.0; d];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..mc_samples {
        for v in tuple[d..].iter_mut() {
            *v = rng.random_range(-m..m);
        }
        let w = if evaluate_h(constraint, Points::new(&tuple, d), 1.0)? {
            sample_sphere(&mut rng, &mut theta);
            let mut dot_sum = 0.0;
            for i in 1..k {
                let y = &tuple[i * d..(i + 1) * d];
                dot_sum += theta.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
            }
            (-inv_c * dot_sum).exp()
        } else {
            0.0
        };
        sum += w;
        sum_sq += w * w;
    }
    let n = mc_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok((volume * s * mean, volume * s * (var / n).sqrt()))
}

/// Finite-dimensional law of the time-scaled extremal Gumbel limit, given the
/// prefactor integral from [`gumbel_prefactor`].
pub fn gumbel_fidi(
    times: &[f64],
    thresholds: &[f64],
    k: usize,
    prefactor_integral: f64,
) -> Result<f64> {
    validate_fidi(times, thresholds)?;
    let kf = k as f64;
    let coef = prefactor_integral / (factorial(k).powi(2) * kf);
    let mut acc = 0.0;
    let mut t_prev = 0.0f64;
    for i in 0..times.len() {
        let min_eta = thresholds[i..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        acc += (times[i].powi(k as i32) - t_prev.powi(k as i32)) * (-kf * min_eta).exp();
        t_prev = times[i];
    }
    Ok((-coef * acc).exp())
}

fn validate_fidi(times: &[f64], thresholds: &[f64]) -> Result<()> {
    if times.is_empty() || times.len() != thresholds.len() {
        return Err(Error::domain("need matching, non-empty times and thresholds"));
    }
    if times[0] < 0.0 || *times.last().unwrap() > 1.0 {
        return Err(Error::domain("times must lie in [0, 1]"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("times must be strictly increasing"));
    }
    Ok(())
}

/// Parameters of the truncated series representation of the stable limit.
#[derive(Clone, Copy, Debug)]
pub struct StableSeriesSpec {
    pub alpha: f64,
    pub n_terms: usize,
    pub c_alpha: f64,
}

pub const DEFAULT_SERIES_TERMS: usize = 100_000;

impl StableSeriesSpec {
    /// `C_alpha = ((2 alpha - 1)^{-1} int h)^{1/(2 alpha - 1)}`; the stable
    /// index is `2 alpha - 1`, which restricts `alpha` to (1, 1.5).
    pub fn new(alpha: f64, h_integral: f64, n_terms: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 1.5) {
            return Err(Error::domain(format!(
                "stable series requires alpha in (1, 1.5), got {alpha}"
            )));
        }
        if n_terms == 0 {
            return Err(Error::domain("series needs at least one term"));
        }
        let index = 2.0 * alpha - 1.0;
        Ok(StableSeriesSpec {
            alpha,
            n_terms,
            c_alpha: (h_integral / index).powf(1.0 / index),
        })
    }

    /// Variance proxy of the truncated remainder:
    /// `sum_{j > N} j^{-2/(2 alpha - 1)} ~ N^{1-q}/(q-1)` with `q = 2/(2 alpha - 1)`.
    pub fn tail_variance_bound(&self) -> f64 {
        let q = 2.0 / (2.0 * self.alpha - 1.0);
        (self.n_terms as f64).powf(1.0 - q) / (q - 1.0)
    }
}

/// One draw of the truncated stable series
/// `C_alpha sum_j r_j Gamma_j^{-1/(2 alpha - 1)}` with `Gamma_j` the jump
/// times of a unit-rate Poisson process and `r_j` fair signs.
pub fn stable_series_sample(spec: &StableSeriesSpec, seed: u64) -> f64 {
    stable_series_sample_flipped(spec, seed, false)
}

/// Same draw with every sign negated; negation is exact.
pub(crate) fn stable_series_sample_flipped(
    spec: &StableSeriesSpec,
    seed: u64,
    flip: bool,
) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let inv_index = -1.0 / (2.0 * spec.alpha - 1.0);
    let mut gamma = 0.0f64;
    let mut acc = 0.0f64;
    for _ in 0..spec.n_terms {
        let e: f64 = Exp1.sample(&mut rng);
        gamma += e;
        let sign = if rng.random::<bool>() != flip { 1.0 } else { -1.0 };
        acc += sign * gamma.powf(inv_index);
    }
    spec.c_alpha * acc
}

/// Uniform direction on `S^{d-1}` (fair sign when d = 1), written into `out`.
fn sample_sphere(rng: &mut ChaCha12Rng, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = z;
            norm2 += z * z;
        }
        if norm2 > 1e-300 {
            let inv = norm2.sqrt().recip();
            for v in out.iter_mut() {
                *v *= inv;
            }
            return;
        }
    }
}
