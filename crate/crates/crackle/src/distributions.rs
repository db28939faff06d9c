//! Spherically symmetric density families and Poisson cloud sampling.
//!
//! A [`RadialDensity`] is `f(x) = C * g(||x||)` where `g` is the unnormalized
//! radial profile of the family and `C` makes `f` a probability density.
//! Clouds are sampled by drawing a Poisson number of points, each as an
//! inverse-CDF radius times a uniform direction on the sphere.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::limits::sphere_surface_area;
use crate::quad::{gauss16, tanh_sinh};

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Parametric radial family of the density.
#[derive(Clone)]
pub enum Family {
    /// `f(x) = C / (1 + ||x||^alpha)` with `alpha > d`.
    HeavyPolynomial { alpha: f64 },
    /// `f(x) = C * exp(-||x||^tau / tau)` with `tau > 0`.
    LightVonMises { tau: f64 },
    /// `f(x) = C * exp(-psi(||x||))` for a user-supplied increasing C^2
    /// potential. Accepted for the contractibility experiment only.
    PluggablePsi {
        psi: RadialFn,
        psi_prime: RadialFn,
        psi_inv: RadialFn,
    },
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::HeavyPolynomial { alpha } => {
                write!(f, "HeavyPolynomial {{ alpha: {alpha} }}")
            }
            Family::LightVonMises { tau } => write!(f, "LightVonMises {{ tau: {tau} }}"),
            Family::PluggablePsi { .. } => write!(f, "PluggablePsi {{ .. }}"),
        }
    }
}

impl Family {
    /// Unnormalized radial profile `g(r)`.
    pub fn profile(&self, r: f64) -> f64 {
        match self {
            Family::HeavyPolynomial { alpha } => 1.0 / (1.0 + r.powf(*alpha)),
            Family::LightVonMises { tau } => (-r.powf(*tau) / tau).exp(),
            Family::PluggablePsi { psi, .. } => (-psi(r)).exp(),
        }
    }

    /// log g(r); used where `g` underflows.
    fn log_profile(&self, r: f64) -> f64 {
        match self {
            Family::HeavyPolynomial { alpha } => -(1.0 + r.powf(*alpha)).ln(),
            Family::LightVonMises { tau } => -r.powf(*tau) / tau,
            Family::PluggablePsi { psi, .. } => -psi(r),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if dim < 1 {
            return Err(Error::domain("dimension must be >= 1"));
        }
        match self {
            Family::HeavyPolynomial { alpha } => {
                if !alpha.is_finite() || *alpha <= dim as f64 {
                    return Err(Error::domain(format!(
                        "heavy polynomial tail requires alpha > d (got alpha = {alpha}, d = {dim}); \
                         the normalizing integral diverges otherwise"
                    )));
                }
            }
            Family::LightVonMises { tau } => {
                if !tau.is_finite() || *tau <= 0.0 {
                    return Err(Error::domain(format!(
                        "von Mises tail requires tau > 0 (got {tau})"
                    )));
                }
            }
            Family::PluggablePsi { .. } => {}
        }
        Ok(())
    }
}

/// Normalizing constant `C` such that `s_{d-1} C \int_0^\infty r^{d-1} g(r) dr = 1`.
///
/// Computed by tanh-sinh quadrature with the tail mapped onto (0, 1); relative
/// error of the quadrature is below 1e-10 for the supported families.
pub fn normalizing_constant(family: &Family, dim: usize) -> Result<f64> {
    family.validate(dim)?;
    let d = dim as f64;
    let head = tanh_sinh(|r| r.powf(d - 1.0) * family.profile(r), 0.0, 1.0, 1e-12);
    // r = 1/v maps [1, inf) to (0, 1]; integrand becomes v^{-d-1} g(1/v),
    // evaluated in log space so the light tails underflow cleanly.
    let tail = tanh_sinh(
        |v| {
            let log_term = family.log_profile(1.0 / v) - (d + 1.0) * v.ln();
            if log_term < -745.0 {
                0.0
            } else {
                log_term.exp()
            }
        },
        0.0,
        1.0,
        1e-12,
    );
    let integral = head + tail;
    if !integral.is_finite() || integral <= 0.0 {
        return Err(Error::domain(
            "radial integral is not finite; check the family parameters",
        ));
    }
    Ok(1.0 / (sphere_surface_area(dim) * integral))
}

/// Inverse-CDF machinery for the radial law `||X||`.
enum RadialLaw {
    /// Exact reduction `R = (tau G)^{1/tau}`, `G ~ Gamma(d/tau, 1)`.
    GammaReduction { tau: f64, shape: f64 },
    /// Cached monotone table over a log-spaced grid (heavy and pluggable).
    Table(QuantileTable),
}

struct QuantileTable {
    /// Cell edges, `edges[0] = 0`, strictly increasing.
    edges: Vec<f64>,
    /// Normalized CDF at the edges, `cdf[0] = 0`.
    cdf: Vec<f64>,
    /// Normalized radial pdf `r^{d-1} g(r) / total` at the edges.
    pdf: Vec<f64>,
    total: f64,
    tail: TailInverse,
}

enum TailInverse {
    /// `1 - F(r) ~ coef * r^{d - alpha} / total` beyond the grid.
    HeavyAsymptotic { alpha: f64, d: f64 },
    /// Mass beyond the grid is below 1e-20; clamp to the last edge.
    Clamp,
}

impl QuantileTable {
    fn build(family: &Family, dim: usize) -> Result<QuantileTable> {
        let d = dim as f64;
        let (r_max, n_cells, tail) = match family {
            Family::HeavyPolynomial { alpha } => {
                // place the grid end where the normalized tail mass drops
                // below ~1e-11 so only astronomically rare draws leave it
                let total_est = closed_form_radial_integral(*alpha, d);
                let gap = alpha - d;
                let r_max = ((gap * total_est * 1e-11).powf(-1.0 / gap)).max(1e6);
                let decades = (r_max.log10() + 8.0).ceil();
                let n_cells = if decades > 40.0 { 4096 } else { 2048 };
                (
                    r_max,
                    n_cells,
                    TailInverse::HeavyAsymptotic { alpha: *alpha, d },
                )
            }
            Family::PluggablePsi { psi, psi_inv, .. } => {
                let target = psi(1.0).max(0.0) + 50.0;
                let r_max = psi_inv(target).max(1.0);
                (r_max, 2048, TailInverse::Clamp)
            }
            Family::LightVonMises { .. } => unreachable!("light tails use the Gamma reduction"),
        };

        let r_min = 1e-8_f64.min(r_max * 1e-12);
        let mut edges = Vec::with_capacity(n_cells + 2);
        edges.push(0.0);
        let log_lo = r_min.ln();
        let log_hi = r_max.ln();
        for i in 0..=n_cells {
            let t = i as f64 / n_cells as f64;
            edges.push((log_lo + t * (log_hi - log_lo)).exp());
        }

        let w = |r: f64| {
            if r == 0.0 {
                if d > 1.0 {
                    0.0
                } else {
                    family.profile(0.0)
                }
            } else {
                (family.log_profile(r) + (d - 1.0) * r.ln()).exp()
            }
        };

        let mut cum = Vec::with_capacity(edges.len());
        cum.push(0.0);
        for i in 1..edges.len() {
            let cell = gauss16(w, edges[i - 1], edges[i]);
            cum.push(cum[i - 1] + cell);
        }

        let tail_mass = match &tail {
            TailInverse::HeavyAsymptotic { alpha, d } => heavy_tail_integral(*alpha, *d, r_max),
            TailInverse::Clamp => 0.0,
        };
        let total = cum.last().unwrap() + tail_mass;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::domain("radial law has no finite mass"));
        }

        let cdf: Vec<f64> = cum.iter().map(|c| c / total).collect();
        let pdf: Vec<f64> = edges.iter().map(|&r| w(r) / total).collect();
        Ok(QuantileTable {
            edges,
            cdf,
            pdf,
            total,
            tail,
        })
    }

    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let last = *self.cdf.last().unwrap();
        if u >= last {
            return match &self.tail {
                TailInverse::HeavyAsymptotic { alpha, d } => {
                    // invert the leading term of the tail integral
                    let mass = (1.0 - u) * self.total;
                    ((alpha - d) * mass).powf(1.0 / (d - alpha))
                }
                TailInverse::Clamp => *self.edges.last().unwrap(),
            };
        }
        // cell index: first edge with cdf >= u
        let hi = self.cdf.partition_point(|&c| c < u);
        let i = hi - 1;
        let (r0, r1) = (self.edges[i], self.edges[i + 1]);
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let h = r1 - r0;
        let delta = (f1 - f0) / h;
        if delta <= 0.0 {
            return r0;
        }
        // monotone cubic Hermite on the cell, slopes clamped Fritsch-Carlson style
        let m0 = self.pdf[i].min(3.0 * delta);
        let m1 = self.pdf[i + 1].min(3.0 * delta);
        let eval = |s: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            let val = h00 * f0 + h10 * h * m0 + h01 * f1 + h11 * h * m1;
            let d00 = 6.0 * s2 - 6.0 * s;
            let d10 = 3.0 * s2 - 4.0 * s + 1.0;
            let d01 = -6.0 * s2 + 6.0 * s;
            let d11 = 3.0 * s2 - 2.0 * s;
            let der = d00 * f0 + d10 * h * m0 + d01 * f1 + d11 * h * m1;
            (val, der)
        };
        // Newton with a bisection bracket
        let (mut lo, mut hi_s) = (0.0f64, 1.0f64);
        let mut s = ((u - f0) / (f1 - f0)).clamp(0.0, 1.0);
        for _ in 0..64 {
            let (val, der) = eval(s);
            let err = val - u;
            if err.abs() <= 1e-16 * (f1 - f0).max(1e-300) {
                break;
            }
            if err > 0.0 {
                hi_s = s;
            } else {
                lo = s;
            }
            let step = if der > 0.0 { s - err / der } else { f64::NAN };
            s = if step.is_finite() && step > lo && step < hi_s {
                step
            } else {
                0.5 * (lo + hi_s)
            };
            if hi_s - lo < 1e-15 {
                break;
            }
        }
        r0 + s * h
    }
}

/// `\int_r^\infty u^{d-1} / (1 + u^alpha) du`, unnormalized, via the
/// alternating expansion in `u^{-alpha}`; accurate for large `r`.
fn heavy_tail_integral(alpha: f64, d: f64, r: f64) -> f64 {
    let mut acc = 0.0;
    let mut sign = 1.0;
    for j in 1..=4 {
        let ja = alpha * j as f64;
        acc += sign * r.powf(d - ja) / (ja - d);
        sign = -sign;
    }
    acc
}

/// `\int_0^\infty r^{d-1}/(1+r^alpha) dr = (pi/alpha) / sin(pi d / alpha)`;
/// used only to size the quantile grid.
fn closed_form_radial_integral(alpha: f64, d: f64) -> f64 {
    (std::f64::consts::PI / alpha) / (std::f64::consts::PI * d / alpha).sin()
}

/// Regularized lower incomplete gamma CDF `P(shape, x)`.
fn gamma_cdf(shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(shape, x)
    }
}

/// Quantile of Gamma(shape, 1): Newton on `P(shape, x) = u` with a bisection
/// bracket; the shape = 1 case is the exact exponential quantile.
fn gamma_quantile(shape: f64, u: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&u));
    if u <= 0.0 {
        return 0.0;
    }
    if (shape - 1.0).abs() < 1e-14 {
        return -(-u).ln_1p();
    }
    if (shape - 0.5).abs() < 1e-14 {
        // Gamma(1/2, 1) is Z^2/2 for standard normal Z: erf(sqrt(x)) = u
        let z = statrs::function::erf::erf_inv(u);
        return z * z;
    }
    let lg = ln_gamma(shape);
    // initial guess: the classic two-branch starter below 1, Wilson-Hilferty above
    let mut x = if shape < 1.0 {
        let t = 1.0 - shape * (0.253 + 0.12 * shape);
        if u < t {
            t.powf(-1.0 / shape) * u.powf(1.0 / shape)
        } else {
            1.0 - ((1.0 - u) / (1.0 - t)).ln()
        }
    } else {
        let z = normal_quantile(u);
        let c = 1.0 / (9.0 * shape);
        let w = 1.0 - c + z * c.sqrt();
        (shape * w * w * w).max(1e-300)
    };
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    for _ in 0..128 {
        let p = gamma_cdf(shape, x);
        let err = p - u;
        if err > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        // density of Gamma(shape, 1) at x
        let ln_pdf = (shape - 1.0) * x.ln() - x - lg;
        let step = if ln_pdf > -700.0 {
            err / ln_pdf.exp()
        } else {
            f64::NAN
        };
        let proposal = x - step;
        let next = if proposal.is_finite() && proposal > lo && proposal < hi {
            proposal
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            (x * 2.0).max(1e-300)
        };
        if (next - x).abs() <= 1e-14 * x.abs() {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Acklam's rational approximation of the standard normal quantile; only an
/// initial guess for the gamma Newton iteration, so ~1e-9 accuracy suffices.
fn normal_quantile(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - P_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// A spherically symmetric probability density on R^d.
pub struct RadialDensity {
    family: Family,
    dim: usize,
    scale_c: f64,
    law: RadialLaw,
}

impl fmt::Debug for RadialDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialDensity")
            .field("family", &self.family)
            .field("dim", &self.dim)
            .field("scale_c", &self.scale_c)
            .finish()
    }
}

impl RadialDensity {
    pub fn heavy_polynomial(alpha: f64, dim: usize) -> Result<Self> {
        Self::new(Family::HeavyPolynomial { alpha }, dim)
    }

    pub fn light_von_mises(tau: f64, dim: usize) -> Result<Self> {
        Self::new(Family::LightVonMises { tau }, dim)
    }

    pub fn pluggable_psi(
        psi: RadialFn,
        psi_prime: RadialFn,
        psi_inv: RadialFn,
        dim: usize,
    ) -> Result<Self> {
        Self::new(
            Family::PluggablePsi {
                psi,
                psi_prime,
                psi_inv,
            },
            dim,
        )
    }

    fn new(family: Family, dim: usize) -> Result<Self> {
        let scale_c = normalizing_constant(&family, dim)?;
        let law = match &family {
            Family::LightVonMises { tau } => RadialLaw::GammaReduction {
                tau: *tau,
                shape: dim as f64 / tau,
            },
            _ => RadialLaw::Table(QuantileTable::build(&family, dim)?),
        };
        Ok(RadialDensity {
            family,
            dim,
            scale_c,
            law,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The normalizing constant `C`.
    pub fn scale_c(&self) -> f64 {
        self.scale_c
    }

    /// Density value at a point.
    pub fn density_at(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.scale_c * self.family.profile(norm(x))
    }

    /// Density as a function of the radius alone: `f(r e_1)`.
    pub fn density_radial(&self, r: f64) -> f64 {
        self.scale_c * self.family.profile(r)
    }

    /// CDF of the radial law `||X||`.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match &self.law {
            RadialLaw::GammaReduction { tau, shape } => {
                let x = r.powf(*tau) / tau;
                if (*shape - 1.0).abs() < 1e-14 {
                    -(-x).exp_m1()
                } else {
                    gamma_cdf(*shape, x)
                }
            }
            RadialLaw::Table(t) => {
                let rmax = *t.edges.last().unwrap();
                if r >= rmax {
                    match &t.tail {
                        TailInverse::HeavyAsymptotic { alpha, d } => {
                            1.0 - heavy_tail_integral(*alpha, *d, r) / t.total
                        }
                        TailInverse::Clamp => 1.0,
                    }
                } else {
                    let hi = t.edges.partition_point(|&e| e <= r);
                    let i = hi - 1;
                    let d = self.dim as f64;
                    let fam = &self.family;
                    let part = gauss16(
                        |u| {
                            if u == 0.0 {
                                if d > 1.0 {
                                    0.0
                                } else {
                                    fam.profile(0.0)
                                }
                            } else {
                                (fam.log_profile(u) + (d - 1.0) * u.ln()).exp()
                            }
                        },
                        t.edges[i],
                        r,
                    );
                    (t.cdf[i] + part / t.total).min(1.0)
                }
            }
        }
    }

    /// Radius `r` with `F_R(r) = u`.
    ///
    /// The light family inverts the exact Gamma reduction; the heavy and
    /// pluggable families use the cached monotone table.
    pub fn radial_quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::domain(format!(
                "quantile level must lie in [0, 1), got {u}"
            )));
        }
        Ok(self.quantile_unchecked(u))
    }

    fn quantile_unchecked(&self, u: f64) -> f64 {
        match &self.law {
            RadialLaw::GammaReduction { tau, shape } => {
                (tau * gamma_quantile(*shape, u)).powf(1.0 / tau)
            }
            RadialLaw::Table(t) => t.quantile(u),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Borrowed, row-major view of a set of d-dimensional points.
#[derive(Clone, Copy)]
pub struct Points<'a> {
    coords: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(coords: &'a [f64], dim: usize) -> Self {
        assert!(dim >= 1 && coords.len() % dim == 0);
        Points { coords, dim }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> &'a [f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &'a [f64] {
        self.coords
    }
}

/// A sampled Poisson cloud with its provenance.
pub struct PointCloud {
    density: Arc<RadialDensity>,
    coords: Vec<f64>,
    dim: usize,
    intensity_n: f64,
    seed: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn intensity_n(&self) -> f64 {
        self.intensity_n
    }

    pub fn density(&self) -> &Arc<RadialDensity> {
        &self.density
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn view(&self) -> Points<'_> {
        Points::new(&self.coords, self.dim)
    }

    /// Euclidean norms of all points, in cloud order.
    pub fn norms(&self) -> Vec<f64> {
        self.coords.chunks_exact(self.dim).map(norm).collect()
    }

    /// Reflect every point through the origin (used by symmetry checks).
    pub fn reflected(&self) -> PointCloud {
        PointCloud {
            density: Arc::clone(&self.density),
            coords: self.coords.iter().map(|v| -v).collect(),
            dim: self.dim,
            intensity_n: self.intensity_n,
            seed: self.seed,
        }
    }
}

/// Draws `N ~ Poisson(n)` points i.i.d. from the density. Deterministic in
/// `(n, density, seed)`.
pub fn sample_cloud(n: f64, density: &Arc<RadialDensity>, seed: u64) -> Result<PointCloud> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(Error::domain(format!("expected count must be >= 0, got {n}")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let count = if n == 0.0 {
        0
    } else {
        Poisson::new(n)
            .map_err(|e| Error::domain(format!("poisson intensity {n}: {e}")))?
            .sample(&mut rng) as usize
    };
    let dim = density.dim();
    let mut coords = Vec::with_capacity(count * dim);
    for _ in 0..count {
        let u: f64 = rng.random();
        let r = density.quantile_unchecked(u);
        sample_direction_into(dim, &mut rng, &mut coords, r);
    }
    Ok(PointCloud {
        density: Arc::clone(density),
        coords,
        dim,
        intensity_n: n,
        seed,
    })
}

/// Appends `r * theta` for a uniform direction `theta` on `S^{d-1}`.
/// In d = 1 the sphere is `{-1, +1}` and the direction is a fair sign.
fn sample_direction_into(dim: usize, rng: &mut ChaCha12Rng, out: &mut Vec<f64>, r: f64) {
    if dim == 1 {
        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        out.push(s * r);
        return;
    }
    loop {
        let start = out.len();
        let mut norm2 = 0.0;
        for _ in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            norm2 += z * z;
            out.push(z);
        }
        if norm2 > 1e-300 {
            let scale = r / norm2.sqrt();
            for v in &mut out[start..] {
                *v *= scale;
            }
            return;
        }
        out.truncate(start);
    }
}

/// Monte Carlo estimate of the `f`-mass of a union of balls, with its
/// standard error. Uniform proposals over the bounding box of the union.
pub fn union_of_balls_probability(
    centers: Points<'_>,
    r: f64,
    density: &RadialDensity,
    mc_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if centers.is_empty() {
        return Err(Error::domain("union of balls needs at least one center"));
    }
    if !(r > 0.0) {
        return Err(Error::domain("ball radius must be positive"));
    }
    if mc_samples == 0 {
        return Err(Error::domain("mc_samples must be positive"));
    }
    if centers.dim() != density.dim() {
        return Err(Error::domain("center dimension does not match the density"));
    }
    let dim = centers.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in centers.iter() {
        for j in 0..dim {
            lo[j] = lo[j].min(p[j] - r);
            hi[j] = hi[j].max(p[j] + r);
        }
    }
    let volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = vec![0.0; dim];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let r2 = r * r;
    for _ in 0..mc_samples {
        for j in 0..dim {
            x[j] = lo[j] + (hi[j] - lo[j]) * rng.random::<f64>();
        }
        let inside = centers.iter().any(|c| {
            let mut d2 = 0.0;
            for j in 0..dim {
                let t = x[j] - c[j];
                d2 += t * t;
            }
            d2 <= r2
        });
        let v = if inside { density.density_at(&x) } else { 0.0 };
        sum += v;
        sum_sq += v * v;
    }
    let m = mc_samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0);
    let stderr = volume * (var / m).sqrt();
    Ok((volume * mean, stderr))
}

/// Mixes a master seed with a replication index into an independent stream
/// seed (SplitMix64 finalizer over the pair).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::tanh_sinh;
    use proptest::prelude::*;

    fn heavy(alpha: f64, dim: usize) -> RadialDensity {
        RadialDensity::heavy_polynomial(alpha, dim).unwrap()
    }

    fn light(tau: f64, dim: usize) -> RadialDensity {
        RadialDensity::light_von_mises(tau, dim).unwrap()
    }

    #[test]
    fn normalizing_constants_match_closed_forms() {
        // alpha=3, d=1: C = 1 / (2 * 2 pi / (3 sqrt 3))
        let c = heavy(3.0, 1).scale_c();
        let exact = 1.0 / (2.0 * 2.0 * std::f64::consts::PI / (3.0 * 3f64.sqrt()));
        assert!((c - exact).abs() < 1e-10, "{c} vs {exact}");
        assert!((c - 0.41350).abs() < 5e-6);
        // tau=1, d=1: the two-sided exponential
        assert!((light(1.0, 1).scale_c() - 0.5).abs() < 1e-12);
        // tau=2, d=2: the standard Gaussian in the plane
        let c = light(2.0, 2).scale_c();
        assert!((c - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(RadialDensity::heavy_polynomial(1.0, 1).is_err(), "alpha <= d diverges");
        assert!(RadialDensity::heavy_polynomial(2.0, 2).is_err());
        assert!(RadialDensity::light_von_mises(0.0, 1).is_err());
        assert!(RadialDensity::heavy_polynomial(3.0, 0).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        // s_{d-1} C \int r^{d-1} g = 1 within 1e-8, quadrature oracle
        for dim in 1..=3usize {
            for density in [heavy(dim as f64 + 1.5, dim), light(1.0, dim), light(2.0, dim)] {
                let d = dim as f64;
                let fam = density.family().clone();
                let head = tanh_sinh(|r| r.powf(d - 1.0) * fam.profile(r), 0.0, 1.0, 1e-13);
                let tail = tanh_sinh(
                    |v| {
                        let e = fam.log_profile(1.0 / v) - (d + 1.0) * v.ln();
                        if e < -745.0 {
                            0.0
                        } else {
                            e.exp()
                        }
                    },
                    0.0,
                    1.0,
                    1e-13,
                );
                let total = crate::limits::sphere_surface_area(dim) * density.scale_c() * (head + tail);
                assert!((total - 1.0).abs() < 1e-8, "dim {dim}: {total}");
            }
        }
    }

    #[test]
    fn quantile_examples() {
        let d = heavy(3.0, 1);
        assert_eq!(d.radial_quantile(0.0).unwrap(), 0.0);
        assert!(d.radial_quantile(1.0).is_err());
        assert!(d.radial_quantile(-0.1).is_err());
        // median against a bisection-on-quadrature oracle
        let c = d.scale_c();
        let cdf = |r: f64| 2.0 * c * tanh_sinh(|s| 1.0 / (1.0 + s.powi(3)), 0.0, r, 1e-13);
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let q = d.radial_quantile(0.5).unwrap();
        assert!((q - oracle).abs() < 1e-7, "{q} vs {oracle}");

        // exponential radial law: F_R(r) = 1 - e^{-r}
        let e = light(1.0, 1);
        let u = 1.0 - (-2.0f64).exp();
        assert!((e.radial_quantile(u).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn quantile_cdf_round_trip() {
        let grid: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        for density in [heavy(2.0, 1), heavy(3.0, 2), light(2.0, 2), light(4.0, 1)] {
            for &u in &grid {
                let r = density.radial_quantile(u).unwrap();
                let back = density.radial_cdf(r);
                assert!(
                    (back - u).abs() < 1e-8,
                    "{:?}: u = {u}, r = {r}, F(r) = {back}",
                    density
                );
            }
        }
    }

    #[test]
    fn quantile_handles_extreme_tail_levels() {
        let d = heavy(2.0, 1);
        let r = d.radial_quantile(1.0 - 1e-15).unwrap();
        assert!(r.is_finite() && r > 1e10);
        let back = d.radial_cdf(r);
        assert!((back - (1.0 - 1e-15)).abs() < 1e-16);
    }

    #[test]
    fn pluggable_table_matches_light_family() {
        let tau = 2.0;
        let plug = RadialDensity::pluggable_psi(
            Arc::new(move |z: f64| z * z / 2.0),
            Arc::new(move |z: f64| z),
            Arc::new(move |y: f64| (2.0 * y).sqrt()),
            1,
        )
        .unwrap();
        let exact = light(tau, 1);
        assert!((plug.scale_c() - exact.scale_c()).abs() < 1e-10);
        for u in [0.05, 0.3, 0.6, 0.9, 0.99] {
            let a = plug.radial_quantile(u).unwrap();
            let b = exact.radial_quantile(u).unwrap();
            assert!((a - b).abs() < 1e-7 * b.max(1.0), "u = {u}: {a} vs {b}");
        }
    }

    #[test]
    fn empty_cloud_for_zero_intensity() {
        let density = Arc::new(heavy(2.0, 1));
        let cloud = sample_cloud(0.0, &density, 7).unwrap();
        assert_eq!(cloud.len(), 0);
    }

    #[test]
    fn poisson_counts_concentrate_at_n() {
        let density = Arc::new(light(1.0, 1));
        let n = 10_000.0;
        let reps = 200;
        let mean = (0..reps)
            .map(|i| sample_cloud(n, &density, derive_seed(5, i)).unwrap().len() as f64)
            .sum::<f64>()
            / reps as f64;
        // Poisson mean/variance identity: se of the mean is sqrt(n / reps)
        let band = 3.0 * (n / reps as f64).sqrt();
        assert!((mean - n).abs() < band, "mean {mean} outside {n} +- {band}");
    }

    #[test]
    fn heavy_tail_frequency_stabilizes() {
        // empirical P(||X|| > t) * t^(alpha-d) -> 2C/(alpha-d) for alpha=2, d=1
        let density = Arc::new(heavy(2.0, 1));
        let cloud = sample_cloud(1e5, &density, 11).unwrap();
        let norms = cloud.norms();
        let n = cloud.len() as f64;
        let want = 2.0 * density.scale_c();
        for t in [10.0, 20.0, 40.0] {
            let frac = norms.iter().filter(|&&v| v > t).count() as f64 / n;
            let scaled = frac * t;
            // binomial noise at P ~ 2C/t with 1e5 samples
            let se = 3.0 * (frac / n).sqrt() * t + 0.05 * want;
            assert!(
                (scaled - want).abs() < se,
                "t = {t}: {scaled} vs {want} (+- {se})"
            );
        }
    }

    #[test]
    fn sampled_directions_have_no_drift() {
        for dim in 1..=3usize {
            let density = Arc::new(light(2.0, dim));
            let cloud = sample_cloud(4000.0, &density, 23).unwrap();
            let mut mean_dir = vec![0.0; dim];
            for i in 0..cloud.len() {
                let p = cloud.point(i);
                let nm = point_norm_for_test(p);
                if nm > 0.0 {
                    for j in 0..dim {
                        mean_dir[j] += p[j] / nm;
                    }
                }
            }
            let n = cloud.len() as f64;
            let drift = mean_dir.iter().map(|v| v * v).sum::<f64>().sqrt() / n;
            assert!(drift <= 4.0 / n.sqrt(), "dim {dim}: drift {drift}");
        }
    }

    fn point_norm_for_test(p: &[f64]) -> f64 {
        p.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn same_seed_same_cloud_bitwise() {
        let density = Arc::new(heavy(2.5, 2));
        let a = sample_cloud(500.0, &density, 99).unwrap();
        let b = sample_cloud(500.0, &density, 99).unwrap();
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert_eq!(a.point(i), b.point(i));
        }
        let c = sample_cloud(500.0, &density, 100).unwrap();
        assert!(a.len() != c.len() || (0..a.len()).any(|i| a.point(i) != c.point(i)));
    }

    #[test]
    fn union_of_balls_single_center_is_the_radial_cdf() {
        let density = light(1.0, 1);
        let centers = [0.0];
        let (est, se) =
            union_of_balls_probability(Points::new(&centers, 1), 1.0, &density, 200_000, 13)
                .unwrap();
        let exact = 1.0 - (-1.0f64).exp();
        assert!((est - exact).abs() <= 3.0 * se, "{est} vs {exact} (se {se})");
    }

    #[test]
    fn union_of_balls_is_additive_on_disjoint_balls() {
        let density = light(1.0, 1);
        let both = [4.0, -4.0];
        let (joint, se_j) =
            union_of_balls_probability(Points::new(&both, 1), 1.0, &density, 400_000, 17).unwrap();
        let one = [4.0];
        let (single, se_s) =
            union_of_balls_probability(Points::new(&one, 1), 1.0, &density, 400_000, 19).unwrap();
        // symmetric centers: the union mass is twice the single-ball mass
        let tol = 3.0 * (se_j * se_j + 4.0 * se_s * se_s).sqrt();
        assert!((joint - 2.0 * single).abs() <= tol);
    }

    #[test]
    fn union_of_balls_vanishes_with_the_radius() {
        let density = light(1.0, 1);
        let centers = [0.5];
        let (est, _) =
            union_of_balls_probability(Points::new(&centers, 1), 1e-4, &density, 50_000, 29)
                .unwrap();
        assert!(est < 1e-3);
        assert!(
            union_of_balls_probability(Points::new(&centers, 1), 1.0, &density, 0, 1).is_err()
        );
    }

    #[test]
    fn derived_seeds_differ_across_indices() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert!(a != b && a != c && b != c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn quantile_is_monotone_in_u(
            alpha in 1.5f64..5.0,
            u1 in 0.0f64..0.98,
            du in 1e-6f64..0.01,
        ) {
            let density = heavy(alpha, 1);
            let a = density.radial_quantile(u1).unwrap();
            let b = density.radial_quantile(u1 + du).unwrap();
            prop_assert!(b >= a, "Q({}) = {a} > Q({}) = {b}", u1, u1 + du);
        }

        #[test]
        fn gamma_reduction_round_trips(
            tau in 0.3f64..4.0,
            u in 0.001f64..0.999,
        ) {
            let density = light(tau, 2);
            let r = density.radial_quantile(u).unwrap();
            let back = density.radial_cdf(r);
            prop_assert!((back - u).abs() < 1e-8, "u = {u}, F(Q(u)) = {back}");
        }
    }
}
