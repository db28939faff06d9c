//! The experiment engine: observable statistics on sampled clouds, replicated
//! campaigns, goodness-of-fit against the limiting Poisson laws, and the Palm
//! cross-check estimator.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::distributions::{derive_seed, sample_cloud, Points, RadialDensity};
use crate::error::{Error, Result};
use crate::geometry::{cech_complex, connected_components, NeighborIndex};
use crate::limits::{integrate_h, nu_heavy_tail_mass, poisson_mean_light};
use crate::scaling::{
    classify_regime, solve_r_heavy, solve_r_light, Regime, RnRule, ScalingSolution,
};
use crate::topology::{betti_numbers, evaluate_h, ConstraintH, ConstraintKind, SmallGraph};

fn point_norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Indices with norm >= cutoff, plus their coordinates as a packed buffer.
///
/// Components of the restricted graph that lie entirely at norm >= R are
/// exactly the components of the full-cloud graph there: any full-graph
/// neighbor of such a component sits within r_n of it, hence at norm
/// >= R - r_n, hence inside the restriction.
fn restrict_by_norm(cloud: Points<'_>, norms: &[f64], cutoff: f64) -> (Vec<u32>, Vec<f64>) {
    let dim = cloud.dim();
    let mut idx = Vec::new();
    let mut coords = Vec::new();
    for (i, &nm) in norms.iter().enumerate() {
        if nm >= cutoff {
            idx.push(i as u32);
            coords.extend_from_slice(cloud.get(i));
        }
    }
    let _ = dim;
    (idx, coords)
}

/// The crackle count: connected components of `G(cloud, r_n)` of size
/// exactly `k` whose points all have norm >= R and whose point set satisfies
/// the constraint at scale `r_n`.
pub fn count_crackle_tuples(
    cloud: Points<'_>,
    constraint: &ConstraintH,
    r_n: f64,
    big_r: f64,
) -> Result<u64> {
    if !(big_r > 0.0) {
        return Err(Error::domain("region radius must be positive"));
    }
    let k = constraint.tuple_size;
    let norms: Vec<f64> = cloud.iter().map(point_norm).collect();
    let (idx, coords) = restrict_by_norm(cloud, &norms, (big_r - r_n).max(0.0));
    let restricted = Points::new(&coords, cloud.dim());
    let mut count = 0u64;
    let mut buf = Vec::with_capacity(k * cloud.dim());
    for comp in connected_components(restricted, r_n) {
        if comp.len() != k {
            continue;
        }
        if comp.iter().any(|&j| norms[idx[j as usize] as usize] < big_r) {
            continue;
        }
        buf.clear();
        for &j in &comp {
            buf.extend_from_slice(restricted.get(j as usize));
        }
        if evaluate_h(constraint, Points::new(&buf, cloud.dim()), r_n)? {
            count += 1;
        }
    }
    Ok(count)
}

/// The correction term: number of (k+1)-subsets, all points at norm >= R,
/// whose own Čech complex at scale `r_n` is connected. Connectivity of a
/// subset depends only on the subset, so the count is taken inside the
/// connected components of the graph restricted to norm >= R.
pub fn count_connected_tuples(
    cloud: Points<'_>,
    k_plus_1: usize,
    r_n: f64,
    big_r: f64,
) -> Result<u64> {
    if k_plus_1 < 2 {
        return Err(Error::domain("tuple size must be at least 2"));
    }
    let norms: Vec<f64> = cloud.iter().map(point_norm).collect();
    let (_, coords) = restrict_by_norm(cloud, &norms, big_r);
    let restricted = Points::new(&coords, cloud.dim());
    let r2 = r_n * r_n;
    let mut total = 0u64;
    for comp in connected_components(restricted, r_n) {
        let m = comp.len();
        if m < k_plus_1 {
            continue;
        }
        // pairwise adjacency inside the component
        let adj: Vec<Vec<bool>> = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| {
                        a != b && {
                            let pa = restricted.get(comp[a] as usize);
                            let pb = restricted.get(comp[b] as usize);
                            pa.iter()
                                .zip(pb)
                                .map(|(x, y)| (x - y) * (x - y))
                                .sum::<f64>()
                                <= r2
                        }
                    })
                    .collect()
            })
            .collect();
        let mut subset = Vec::with_capacity(k_plus_1);
        total += count_connected_subsets(&adj, m, k_plus_1, 0, &mut subset);
    }
    Ok(total)
}

fn count_connected_subsets(
    adj: &[Vec<bool>],
    m: usize,
    want: usize,
    start: usize,
    subset: &mut Vec<usize>,
) -> u64 {
    if subset.len() == want {
        return if subset_connected(adj, subset) { 1 } else { 0 };
    }
    let remaining = want - subset.len();
    let mut acc = 0;
    for i in start..=m.saturating_sub(remaining) {
        subset.push(i);
        acc += count_connected_subsets(adj, m, want, i + 1, subset);
        subset.pop();
    }
    acc
}

fn subset_connected(adj: &[Vec<bool>], subset: &[usize]) -> bool {
    let s = subset.len();
    let mut seen = 1u64;
    let mut frontier = vec![0usize];
    while let Some(a) = frontier.pop() {
        for b in 0..s {
            if seen & (1 << b) == 0 && adj[subset[a]][subset[b]] {
                seen |= 1 << b;
                frontier.push(b);
            }
        }
    }
    seen.count_ones() as usize == s
}

/// `beta_{betti_index}` of the Čech complex built on the points of norm
/// strictly greater than R, at scale `r_n` (an empty complex has all Betti
/// numbers zero).
pub fn betti_outside_ball(
    cloud: Points<'_>,
    r_n: f64,
    big_r: f64,
    betti_index: usize,
) -> Result<u64> {
    let norms: Vec<f64> = cloud.iter().map(point_norm).collect();
    let dim = cloud.dim();
    let mut coords = Vec::new();
    for (i, &nm) in norms.iter().enumerate() {
        if nm > big_r {
            coords.extend_from_slice(cloud.get(i));
        }
    }
    if coords.is_empty() {
        return Ok(0);
    }
    let complex = cech_complex(Points::new(&coords, dim), r_n, betti_index + 1)?;
    let betti = betti_numbers(&complex, betti_index + 1)?;
    Ok(betti.get(betti_index) as u64)
}

/// Annuli census table: rows are annuli (outermost first), columns the
/// supplied constraints.
#[derive(Clone, Debug, Serialize)]
pub struct AnnuliTable {
    /// Inner radii, strictly decreasing; annulus `j` is
    /// `[radii[j], radii[j-1])` with an infinite outer radius for `j = 0`.
    pub radii: Vec<f64>,
    pub tuple_sizes: Vec<usize>,
    /// `counts[annulus][constraint]`.
    pub counts: Vec<Vec<u64>>,
}

/// Counts isolated components per annulus and per constraint. A component
/// belongs to the annulus containing its innermost point (the component's
/// distance from the origin); components reaching inside the smallest radius
/// are not tabulated.
pub fn annuli_census(
    cloud: Points<'_>,
    r_n: f64,
    radii: &[f64],
    constraints: &[ConstraintH],
) -> Result<AnnuliTable> {
    if radii.is_empty() || radii.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::domain("annuli radii must be strictly decreasing"));
    }
    if constraints.is_empty() {
        return Err(Error::domain("need at least one constraint"));
    }
    let norms: Vec<f64> = cloud.iter().map(point_norm).collect();
    let innermost = *radii.last().unwrap();
    let (idx, coords) = restrict_by_norm(cloud, &norms, (innermost - r_n).max(0.0));
    let restricted = Points::new(&coords, cloud.dim());
    let mut counts = vec![vec![0u64; constraints.len()]; radii.len()];
    let mut buf = Vec::new();
    for comp in connected_components(restricted, r_n) {
        let min_norm = comp
            .iter()
            .map(|&j| norms[idx[j as usize] as usize])
            .fold(f64::INFINITY, f64::min);
        if min_norm < innermost {
            continue;
        }
        let annulus = radii.partition_point(|&r| min_norm < r);
        for (ci, constraint) in constraints.iter().enumerate() {
            if comp.len() != constraint.tuple_size {
                continue;
            }
            buf.clear();
            for &j in &comp {
                buf.extend_from_slice(restricted.get(j as usize));
            }
            if evaluate_h(constraint, Points::new(&buf, cloud.dim()), r_n)? {
                counts[annulus][ci] += 1;
            }
        }
    }
    Ok(AnnuliTable {
        radii: radii.to_vec(),
        tuple_sizes: constraints.iter().map(|c| c.tuple_size).collect(),
        counts,
    })
}

/// The running-maximum path of the normalized first-point norms of
/// qualifying tuples; `f64::NEG_INFINITY` marks times before the first
/// qualifying tuple.
#[derive(Clone, Debug)]
pub struct MaximaPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MaximaPath {
    pub fn endpoint(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// For each `t`, the maximum of `(||X_{i_1}|| - d_kn) / c_kn` over isolated
/// k-components satisfying the constraint whose largest point index (1-based,
/// cloud order) is at most `floor(N t)`.
pub fn maxima_path(
    cloud: Points<'_>,
    constraint: &ConstraintH,
    r_n: f64,
    solution: &ScalingSolution,
    t_grid: &[f64],
) -> Result<MaximaPath> {
    if t_grid.is_empty()
        || t_grid.windows(2).any(|w| w[0] > w[1])
        || t_grid.iter().any(|&t| !(0.0..=1.0).contains(&t))
    {
        return Err(Error::domain("t grid must be sorted inside [0, 1]"));
    }
    let k = constraint.tuple_size;
    let n_points = cloud.len();
    let mut tuples: Vec<(usize, f64)> = Vec::new();
    let mut buf = Vec::new();
    for comp in connected_components(cloud, r_n) {
        if comp.len() != k {
            continue;
        }
        buf.clear();
        for &j in &comp {
            buf.extend_from_slice(cloud.get(j as usize));
        }
        if !evaluate_h(constraint, Points::new(&buf, cloud.dim()), r_n)? {
            continue;
        }
        let first = comp[0] as usize; // components are sorted: smallest index
        let last = *comp.last().unwrap() as usize + 1; // 1-based
        let value = (point_norm(cloud.get(first)) - solution.d_kn) / solution.c_kn;
        tuples.push((last, value));
    }
    tuples.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut values = Vec::with_capacity(t_grid.len());
    let mut running = f64::NEG_INFINITY;
    let mut pos = 0;
    for &t in t_grid {
        let allowed = (n_points as f64 * t).floor() as usize;
        while pos < tuples.len() && tuples[pos].0 <= allowed {
            running = running.max(tuples[pos].1);
            pos += 1;
        }
        values.push(running);
    }
    Ok(MaximaPath {
        times: t_grid.to_vec(),
        values,
    })
}

/// The partial-sum statistic `R_{2,n}^{-1} sum X_{i_1}` over isolated pairs
/// satisfying the constraint (d = 1, k = 2 only). The distance-based
/// constraints are symmetric under reflection through the origin, so the
/// statistic changes sign exactly when the cloud is reflected.
pub fn partial_sum_statistic(
    cloud: Points<'_>,
    r_n: f64,
    r_2n: f64,
    constraint: &ConstraintH,
) -> Result<f64> {
    if cloud.dim() != 1 || constraint.tuple_size != 2 {
        return Err(Error::Unsupported(
            "the stable partial-sum limit needs d = 1 and k = 2".into(),
        ));
    }
    if !(r_2n > 0.0) {
        return Err(Error::domain("normalizing radius must be positive"));
    }
    let mut acc = 0.0;
    let mut buf = Vec::with_capacity(2);
    for comp in connected_components(cloud, r_n) {
        if comp.len() != 2 {
            continue;
        }
        buf.clear();
        buf.push(cloud.get(comp[0] as usize)[0]);
        buf.push(cloud.get(comp[1] as usize)[0]);
        if evaluate_h(constraint, Points::new(&buf, 1), r_n)? {
            acc += buf[0]; // comp is sorted: first entry has the smaller index
        }
    }
    Ok(acc / r_2n)
}

/// Chi-square and total-variation comparison of integer counts against a
/// Poisson law with the given mean.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GofReport {
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub tv_distance: f64,
}

pub fn poisson_gof(counts: &[u64], lambda: f64) -> Result<GofReport> {
    if counts.is_empty() {
        return Err(Error::domain("need at least one count"));
    }
    if lambda < 0.0 {
        return Err(Error::domain("lambda must be non-negative"));
    }
    let n = counts.len() as f64;
    let max_count = *counts.iter().max().unwrap() as usize;
    let mut hist = vec![0u64; max_count + 1];
    for &c in counts {
        hist[c as usize] += 1;
    }
    if lambda == 0.0 {
        // degenerate law at zero
        let frac_zero = hist[0] as f64 / n;
        return Ok(GofReport {
            chi_square: if frac_zero == 1.0 { 0.0 } else { f64::INFINITY },
            dof: 0,
            p_value: if frac_zero == 1.0 { 1.0 } else { 0.0 },
            tv_distance: 1.0 - frac_zero,
        });
    }
    // Poisson pmf up to the largest observed count
    let mut q = Vec::with_capacity(max_count + 1);
    q.push((-lambda).exp());
    for j in 1..=max_count {
        let prev = q[j - 1];
        q.push(prev * lambda / j as f64);
    }
    let head: f64 = q.iter().sum();
    let tail_q = (1.0 - head).max(0.0);
    let tv = 0.5
        * (hist
            .iter()
            .zip(&q)
            .map(|(&o, &p)| (o as f64 / n - p).abs())
            .sum::<f64>()
            + tail_q);

    // pooled chi-square bins with expected count >= 5
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut o_acc = 0.0;
    let mut e_acc = 0.0;
    for j in 0..=max_count {
        o_acc += hist[j] as f64;
        e_acc += n * q[j];
        if e_acc >= 5.0 {
            observed.push(o_acc);
            expected.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    // the open tail bin
    o_acc += 0.0;
    e_acc += n * tail_q;
    if e_acc >= 5.0 || observed.is_empty() {
        observed.push(o_acc);
        expected.push(e_acc);
    } else {
        *observed.last_mut().unwrap() += o_acc;
        *expected.last_mut().unwrap() += e_acc;
    }
    let chi_square: f64 = observed
        .iter()
        .zip(&expected)
        .filter(|&(_, &e)| e > 0.0)
        .map(|(&o, &e)| (o - e) * (o - e) / e)
        .sum();
    let dof = observed.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).unwrap().cdf(chi_square)
    };
    Ok(GofReport {
        chi_square,
        dof,
        p_value,
        tv_distance: tv,
    })
}

/// Declarative description of a replicated census campaign.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub density: DensityConfig,
    pub dim: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub constraint: ConstraintConfig,
    #[serde(default)]
    pub r_n: RnRuleConfig,
    pub n: NGridConfig,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub contractibility: Option<ContractibilityConfig>,
}

fn default_k() -> usize {
    2
}

fn default_replications() -> usize {
    1
}

fn default_mc_samples() -> usize {
    200_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Heavy,
    Light,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    #[serde(default = "default_constraint_kind")]
    pub kind: ConstraintKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_edges: Option<Vec<(usize, usize)>>,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            kind: ConstraintKindName::Connected,
            gamma_edges: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKindName {
    Connected,
    BettiCycle,
    GammaIso,
}

fn default_constraint_kind() -> ConstraintKindName {
    ConstraintKindName::Connected
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RnRuleConfig {
    #[serde(default = "default_rule_name")]
    pub rule: RnRuleName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl Default for RnRuleConfig {
    fn default() -> Self {
        RnRuleConfig {
            rule: RnRuleName::Constant,
            value: None,
            s: None,
            p: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RnRuleName {
    Constant,
    PowerN,
    PowerLog,
}

fn default_rule_name() -> RnRuleName {
    RnRuleName::Constant
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGridConfig {
    pub grid: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> String {
    "out".to_string()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractibilityConfig {
    pub delta: f64,
    pub g: f64,
    #[serde(default = "default_sim_replications")]
    pub sim_replications: usize,
}

fn default_sim_replications() -> usize {
    200
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Config {
                location: "dim".into(),
                message: "dimension must be >= 1".into(),
            });
        }
        if !(2..=8).contains(&self.k) {
            return Err(Error::Config {
                location: "k".into(),
                message: "tuple size must lie in 2..=8".into(),
            });
        }
        if self.replications < 1 {
            return Err(Error::Config {
                location: "replications".into(),
                message: "need at least one replication".into(),
            });
        }
        if self.n.grid.is_empty() || self.n.grid.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Config {
                location: "n.grid".into(),
                message: "expected a non-empty grid of positive intensities".into(),
            });
        }
        if self.mc_samples == 0 {
            return Err(Error::Config {
                location: "mc_samples".into(),
                message: "mc_samples must be positive".into(),
            });
        }
        match self.density.family {
            FamilyName::Heavy => {
                let alpha = self.density.alpha.ok_or_else(|| Error::Config {
                    location: "density.alpha".into(),
                    message: "the heavy family needs alpha".into(),
                })?;
                if alpha <= self.dim as f64 {
                    return Err(Error::Config {
                        location: "density.alpha".into(),
                        message: format!(
                            "the tail exponent must satisfy alpha > d (alpha = {alpha}, d = {})",
                            self.dim
                        ),
                    });
                }
                if self.density.tau.is_some() {
                    return Err(Error::Config {
                        location: "density.tau".into(),
                        message: "tau does not apply to the heavy family".into(),
                    });
                }
            }
            FamilyName::Light => {
                let tau = self.density.tau.ok_or_else(|| Error::Config {
                    location: "density.tau".into(),
                    message: "the light family needs tau".into(),
                })?;
                if !(tau > 0.0) {
                    return Err(Error::Config {
                        location: "density.tau".into(),
                        message: "tau must be positive".into(),
                    });
                }
                if self.density.alpha.is_some() {
                    return Err(Error::Config {
                        location: "density.alpha".into(),
                        message: "alpha does not apply to the light family".into(),
                    });
                }
            }
        }
        match self.constraint.kind {
            ConstraintKindName::GammaIso => {
                let edges = self.constraint.gamma_edges.as_ref().ok_or_else(|| Error::Config {
                    location: "constraint.gamma_edges".into(),
                    message: "gamma-iso needs the target edge list".into(),
                })?;
                SmallGraph::new(self.k, &edges.iter().map(|&(a, b)| (a, b)).collect::<Vec<_>>())
                    .map_err(|e| Error::Config {
                        location: "constraint.gamma_edges".into(),
                        message: e.to_string(),
                    })?;
            }
            _ => {
                if self.constraint.gamma_edges.is_some() {
                    return Err(Error::Config {
                        location: "constraint.gamma_edges".into(),
                        message: "gamma_edges applies only to gamma-iso".into(),
                    });
                }
            }
        }
        let rule = self.rn_rule()?;
        rule.validate(self.k, self.dim, self.density.family == FamilyName::Heavy)
            .map_err(|e| Error::Config {
                location: "r_n".into(),
                message: e.to_string(),
            })?;
        if let Some(c) = &self.contractibility {
            if !(c.delta > 0.0 && c.g > 0.0) {
                return Err(Error::Config {
                    location: "contractibility".into(),
                    message: "delta and g must be positive".into(),
                });
            }
        }
        Ok(())
    }

    pub fn build_density(&self) -> Result<Arc<RadialDensity>> {
        let density = match self.density.family {
            FamilyName::Heavy => {
                RadialDensity::heavy_polynomial(self.density.alpha.unwrap_or(0.0), self.dim)?
            }
            FamilyName::Light => {
                RadialDensity::light_von_mises(self.density.tau.unwrap_or(0.0), self.dim)?
            }
        };
        Ok(Arc::new(density))
    }

    pub fn build_constraint(&self) -> Result<ConstraintH> {
        Ok(match self.constraint.kind {
            ConstraintKindName::Connected => ConstraintH::connected(self.k),
            ConstraintKindName::BettiCycle => ConstraintH::betti_cycle(self.k),
            ConstraintKindName::GammaIso => {
                let edges = self
                    .constraint
                    .gamma_edges
                    .clone()
                    .ok_or_else(|| Error::domain("gamma-iso needs gamma_edges"))?;
                ConstraintH::gamma_iso(SmallGraph::new(self.k, &edges)?)
            }
        })
    }

    pub fn rn_rule(&self) -> Result<RnRule> {
        Ok(match self.r_n.rule {
            RnRuleName::Constant => RnRule::Constant(self.r_n.value.unwrap_or(1.0)),
            RnRuleName::PowerN => RnRule::PowerN {
                s: self.r_n.s.ok_or_else(|| Error::Config {
                    location: "r_n.s".into(),
                    message: "power-n needs the exponent s".into(),
                })?,
            },
            RnRuleName::PowerLog => RnRule::PowerLog {
                p: self.r_n.p.ok_or_else(|| Error::Config {
                    location: "r_n.p".into(),
                    message: "power-log needs the exponent p".into(),
                })?,
            },
        })
    }

    pub fn is_heavy(&self) -> bool {
        self.density.family == FamilyName::Heavy
    }
}

/// Deterministic per-replication seed: the master seed mixed with the grid
/// index, then with the replication index.
pub fn replication_seed(master: u64, n_index: usize, replication: usize) -> u64 {
    derive_seed(derive_seed(master, n_index as u64), replication as u64)
}

/// One grid point of a census campaign.
#[derive(Clone, Debug, Serialize)]
pub struct CensusRun {
    pub n: f64,
    pub r_n: f64,
    pub r_kn: f64,
    pub region_radius: f64,
    pub counts: Vec<u64>,
    pub seeds: Vec<u64>,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub lambda_theory: f64,
    pub lambda_stderr: f64,
    pub gof: GofReport,
}

/// The full campaign report. Wall-clock metadata is kept out of the
/// serialized form so that reports are bitwise reproducible.
#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub k: usize,
    pub dim: usize,
    pub lambda_theory: f64,
    pub lambda_stderr: f64,
    pub runs: Vec<CensusRun>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Runs the replicated crackle census described by the config: for each `n`,
/// solves `R_{k,n}`, samples clouds in parallel with derived seeds, counts
/// crackle tuples, and fits the observed counts against the theoretical
/// Poisson mean.
pub fn run_replications(config: &ExperimentConfig) -> Result<CensusReport> {
    config.validate()?;
    let started = Instant::now();
    let density = config.build_density()?;
    let constraint = config.build_constraint()?;
    let rule = config.rn_rule()?;
    let master = config.seed;

    let (lambda_theory, lambda_stderr) = theoretical_lambda(config, &density, &constraint, &rule)?;

    let mut runs = Vec::with_capacity(config.n.grid.len());
    for (n_index, &n) in config.n.grid.iter().enumerate() {
        let r_n = rule.eval(n);
        let solution = if config.is_heavy() {
            solve_r_heavy(n, config.k, &density, r_n)?
        } else {
            solve_r_light(n, config.k, &density, r_n)?
        };
        let big_r = solution.r_kn;
        let seeds: Vec<u64> = (0..config.replications)
            .map(|rep| replication_seed(master, n_index, rep))
            .collect();
        let counts: Vec<u64> = seeds
            .par_iter()
            .map(|&seed| {
                let cloud = sample_cloud(n, &density, seed)?;
                count_crackle_tuples(cloud.view(), &constraint, r_n, big_r)
            })
            .collect::<Result<_>>()?;
        let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
        let variance = counts
            .iter()
            .map(|&c| (c as f64 - mean) * (c as f64 - mean))
            .sum::<f64>()
            / counts.len() as f64;
        let gof = poisson_gof(&counts, lambda_theory)?;
        runs.push(CensusRun {
            n,
            r_n,
            r_kn: solution.r_kn,
            region_radius: big_r,
            counts,
            seeds,
            empirical_mean: mean,
            empirical_variance: variance,
            lambda_theory,
            lambda_stderr,
            gof,
        });
    }
    Ok(CensusReport {
        k: config.k,
        dim: config.dim,
        lambda_theory,
        lambda_stderr,
        runs,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// The limiting Poisson mean for the configured family and constraint.
fn theoretical_lambda(
    config: &ExperimentConfig,
    density: &RadialDensity,
    constraint: &ConstraintH,
    rule: &RnRule,
) -> Result<(f64, f64)> {
    let h_seed = derive_seed(config.seed, 0x68_u64);
    if config.is_heavy() {
        let (h_est, h_se) = integrate_h(constraint, config.dim, config.mc_samples, h_seed)?;
        let alpha = config.density.alpha.unwrap();
        let lambda = nu_heavy_tail_mass(config.k, config.dim, alpha, h_est, 1.0)?;
        let scale = if h_est > 0.0 { lambda / h_est } else { 0.0 };
        Ok((lambda, scale * h_se))
    } else {
        let probe: Vec<f64> = [1e3, 1e4, 1e5, 1e6, 1e7]
            .into_iter()
            .chain(config.n.grid.iter().copied())
            .collect();
        match classify_regime(density, rule, config.k, &probe)? {
            Regime::Vanishing => Ok((0.0, 0.0)),
            Regime::NontrivialLimit(c) => {
                poisson_mean_light(config.k, config.dim, c, constraint, config.mc_samples, h_seed)
            }
        }
    }
}

/// Direct versus Palm estimates of the expected crackle count.
#[derive(Clone, Debug, Serialize)]
pub struct PalmReport {
    pub n: f64,
    pub direct: f64,
    pub direct_stderr: f64,
    pub palm: f64,
    pub palm_stderr: f64,
    pub combined_stderr: f64,
}

/// Cross-checks `E sum_i u_n(X_i, P_n)` against the Palm form
/// `(n^k / k!) E u_n(X_k, X_k + P_n')` with `X_k` a k-tuple sampled i.i.d.
/// from the density. `u_n` is the isolated-and-constrained indicator
/// restricted to norms >= R. Both sides are independent Monte Carlo
/// estimates; the Palm side averages `tuples_per_cloud` tuple draws against
/// each of `clouds` independent clouds and takes batch means.
pub fn palm_crosscheck(
    density: &Arc<RadialDensity>,
    constraint: &ConstraintH,
    n: f64,
    r_n: f64,
    big_r: f64,
    clouds: usize,
    tuples_per_cloud: usize,
    master_seed: u64,
) -> Result<PalmReport> {
    if n > 1000.0 {
        return Err(Error::domain(
            "the Palm cross-check is restricted to n <= 1000 (dense evaluation)",
        ));
    }
    if clouds < 2 || tuples_per_cloud == 0 {
        return Err(Error::domain("need >= 2 clouds and >= 1 tuple per cloud"));
    }
    let k = constraint.tuple_size;
    let dim = density.dim();

    let direct_counts: Vec<f64> = (0..clouds)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(derive_seed(master_seed, 0xD1), rep as u64);
            let cloud = sample_cloud(n, density, seed)?;
            Ok(count_crackle_tuples(cloud.view(), constraint, r_n, big_r)? as f64)
        })
        .collect::<Result<_>>()?;
    let (direct, direct_se) = mean_and_stderr(&direct_counts);

    let prefactor = n.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
    let palm_batches: Vec<f64> = (0..clouds)
        .into_par_iter()
        .map(|rep| {
            let cloud_seed = derive_seed(derive_seed(master_seed, 0x9A), rep as u64);
            let cloud = sample_cloud(n, density, cloud_seed)?;
            let index = NeighborIndex::build(cloud.view(), r_n);
            let mut rng =
                ChaCha12Rng::seed_from_u64(derive_seed(derive_seed(master_seed, 0x9B), rep as u64));
            let mut tuple = vec![0.0; k * dim];
            let mut hits = 0usize;
            for _ in 0..tuples_per_cloud {
                sample_tuple(density, &mut rng, &mut tuple);
                if palm_indicator(constraint, &tuple, dim, r_n, big_r, &index)? {
                    hits += 1;
                }
            }
            Ok(hits as f64 / tuples_per_cloud as f64)
        })
        .collect::<Result<_>>()?;
    let (palm_mean, palm_batch_se) = mean_and_stderr(&palm_batches);
    let palm = prefactor * palm_mean;
    let palm_se = prefactor * palm_batch_se;

    Ok(PalmReport {
        n,
        direct,
        direct_stderr: direct_se,
        palm,
        palm_stderr: palm_se,
        combined_stderr: (direct_se * direct_se + palm_se * palm_se).sqrt(),
    })
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn sample_tuple(density: &RadialDensity, rng: &mut ChaCha12Rng, out: &mut [f64]) {
    let dim = density.dim();
    let k = out.len() / dim;
    for i in 0..k {
        let u: f64 = rng.random();
        let r = density.radial_quantile(u).expect("u in [0,1)");
        let slot = &mut out[i * dim..(i + 1) * dim];
        if dim == 1 {
            slot[0] = if rng.random::<bool>() { r } else { -r };
        } else {
            loop {
                let mut norm2 = 0.0;
                for v in slot.iter_mut() {
                    let z: f64 = rand_distr::StandardNormal.sample(rng);
                    *v = z;
                    norm2 += z * z;
                }
                if norm2 > 1e-300 {
                    let scale = r / norm2.sqrt();
                    for v in slot.iter_mut() {
                        *v *= scale;
                    }
                    break;
                }
            }
        }
    }
}

use rand_distr::Distribution;

/// `u_n`: the tuple satisfies the constraint, is internally connected, has
/// all norms >= R, and no cloud point within r_n of any tuple point.
fn palm_indicator(
    constraint: &ConstraintH,
    tuple: &[f64],
    dim: usize,
    r_n: f64,
    big_r: f64,
    index: &NeighborIndex,
) -> Result<bool> {
    let k = tuple.len() / dim;
    for i in 0..k {
        let p = &tuple[i * dim..(i + 1) * dim];
        if point_norm(p) < big_r {
            return Ok(false);
        }
    }
    let points = Points::new(tuple, dim);
    if !evaluate_h(constraint, points, r_n)? {
        return Ok(false);
    }
    if !matches!(constraint.kind, ConstraintKind::Connected) {
        // the isolation indicator needs the tuple to form one component
        let g = SmallGraph::from_points(points, r_n)?;
        if !g.is_connected() {
            return Ok(false);
        }
    }
    for i in 0..k {
        let p = &tuple[i * dim..(i + 1) * dim];
        if index.has_neighbor_within(p, r_n) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The joint contractibility event in d = 1: `[-R0, R0]` is covered by the
/// union of radius-`r_n` balls centred at cloud points inside it, and no
/// point lies beyond `R1`.
///
/// Coverage of an interval by equal closed balls holds iff the first center
/// is within `r_n` of the left end, consecutive centers are within `2 r_n`,
/// and the last center is within `r_n` of the right end. The gaps are read
/// off a bucket scan (bucket width `r_n`), so the check is linear and needs
/// no sort.
pub fn contractibility_event(cloud: Points<'_>, r_n: f64, r0: f64, r1: f64) -> Result<bool> {
    if cloud.dim() != 1 {
        return Err(Error::Unsupported(
            "the coverage simulation is implemented for d = 1".into(),
        ));
    }
    if !(r_n > 0.0 && r0 > 0.0 && r1 > 0.0) {
        return Err(Error::domain("radii must be positive"));
    }
    let w = r_n;
    let nb = ((2.0 * r0) / w).ceil() as usize + 1;
    let mut bucket_min = vec![f64::INFINITY; nb];
    let mut bucket_max = vec![f64::NEG_INFINITY; nb];
    let mut any_inside = false;
    for p in cloud.iter() {
        let x = p[0];
        if x.abs() > r1 {
            return Ok(false);
        }
        if x.abs() <= r0 {
            let b = (((x + r0) / w) as usize).min(nb - 1);
            bucket_min[b] = bucket_min[b].min(x);
            bucket_max[b] = bucket_max[b].max(x);
            any_inside = true;
        }
    }
    if !any_inside {
        return Ok(false);
    }
    // points within one bucket are at most w = r_n apart, so only the gaps
    // across bucket boundaries and the two edges need checking
    let mut prev = f64::NEG_INFINITY;
    let mut first = true;
    for b in 0..nb {
        if bucket_max[b] == f64::NEG_INFINITY {
            continue;
        }
        if first {
            if bucket_min[b] - (-r0) > r_n {
                return Ok(false);
            }
            first = false;
        } else if bucket_min[b] - prev > 2.0 * r_n {
            return Ok(false);
        }
        prev = bucket_max[b];
    }
    Ok(r0 - prev <= r_n)
}

/// Empirical probability of the joint contractibility event over independent
/// replications with derived seeds.
pub fn contractibility_probability(
    density: &Arc<RadialDensity>,
    n: f64,
    r_n: f64,
    r0: f64,
    r1: f64,
    replications: usize,
    master_seed: u64,
) -> Result<f64> {
    if replications == 0 {
        return Err(Error::domain("need at least one replication"));
    }
    let hits: Vec<bool> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let cloud = sample_cloud(n, density, derive_seed(master_seed, rep as u64))?;
            contractibility_event(cloud.view(), r_n, r0, r1)
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&b| b).count() as f64 / replications as f64)
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RadialDensity;

    fn constraint2() -> ConstraintH {
        ConstraintH::connected(2)
    }

    #[test]
    fn crackle_count_hand_cases() {
        let c = constraint2();
        let coords = [0.0, 0.1, 10.0, 10.5];
        assert_eq!(
            count_crackle_tuples(Points::new(&coords, 1), &c, 1.0, 5.0).unwrap(),
            1
        );
        let coords_plus = [0.0, 0.1, 10.0, 10.5, 11.2];
        assert_eq!(
            count_crackle_tuples(Points::new(&coords_plus, 1), &c, 1.0, 5.0).unwrap(),
            0,
            "the component at 10 has grown to size 3"
        );
        let empty: [f64; 0] = [];
        assert_eq!(
            count_crackle_tuples(Points::new(&empty, 1), &c, 1.0, 5.0).unwrap(),
            0
        );
    }

    #[test]
    fn crackle_count_matches_unrestricted_evaluation() {
        // the norm >= R - r_n restriction is an exact optimization: compare
        // against counting on the full component list
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(77);
        let c = constraint2();
        for _ in 0..20 {
            let n = 60;
            let coords: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..30.0)).collect();
            let p = Points::new(&coords, 1);
            let big_r = rng.random_range(2.0..20.0);
            let fast = count_crackle_tuples(p, &c, 1.0, big_r).unwrap();
            let mut slow = 0;
            for comp in connected_components(p, 1.0) {
                if comp.len() == 2
                    && comp.iter().all(|&i| coords[i as usize].abs() >= big_r)
                {
                    slow += 1;
                }
            }
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn connected_tuple_counts_on_chains() {
        // 3-chain outside R: exactly one connected triple
        let coords = [10.0, 10.5, 11.0];
        assert_eq!(
            count_connected_tuples(Points::new(&coords, 1), 3, 1.0, 5.0).unwrap(),
            1
        );
        // 4-chain spaced 0.5: all four 3-subsets stay connected at r = 1
        let coords = [10.0, 10.5, 11.0, 11.5];
        assert_eq!(
            count_connected_tuples(Points::new(&coords, 1), 3, 1.0, 5.0).unwrap(),
            4
        );
        // everything below R contributes nothing
        assert_eq!(
            count_connected_tuples(Points::new(&coords, 1), 3, 1.0, 50.0).unwrap(),
            0
        );
    }

    #[test]
    fn connected_tuples_match_brute_force_subsets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(123);
        for _ in 0..20 {
            let n = 14;
            let coords: Vec<f64> = (0..n * 2).map(|_| rng.random_range(0.0..6.0)).collect();
            let p = Points::new(&coords, 2);
            let r_n = 1.0;
            let big_r = 1.5;
            let fast = count_connected_tuples(p, 3, r_n, big_r).unwrap();
            // brute force over all 3-subsets of the full cloud
            let norms: Vec<f64> = p.iter().map(point_norm).collect();
            let mut slow = 0u64;
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        if norms[a] < big_r || norms[b] < big_r || norms[c] < big_r {
                            continue;
                        }
                        let buf = [
                            coords[2 * a],
                            coords[2 * a + 1],
                            coords[2 * b],
                            coords[2 * b + 1],
                            coords[2 * c],
                            coords[2 * c + 1],
                        ];
                        if crate::topology::evaluate_h_tilde(Points::new(&buf, 2), r_n).unwrap() {
                            slow += 1;
                        }
                    }
                }
            }
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn betti_outside_ball_square_cycle() {
        // unit square centred at distance 2R from the origin, side 1, r = 1.2:
        // the four sides are edges, the diagonals sqrt(2) are not, no triangles
        let cx = 10.0;
        let coords = [
            cx, 0.0, //
            cx + 1.0, 0.0, //
            cx, 1.0, //
            cx + 1.0, 1.0,
        ];
        let b = betti_outside_ball(Points::new(&coords, 2), 1.2, 5.0, 1).unwrap();
        assert_eq!(b, 1);
        // nothing outside R means all Betti numbers vanish
        let b = betti_outside_ball(Points::new(&coords, 2), 1.2, 50.0, 1).unwrap();
        assert_eq!(b, 0);
    }

    #[test]
    fn sandwich_inequality_on_sampled_clouds() {
        // S_hat <= beta_{k-2}(outside) <= S_hat + L on sampled clouds (k = 3, d = 2)
        let density =
            Arc::new(RadialDensity::heavy_polynomial(3.0, 2).unwrap());
        let c = ConstraintH::betti_cycle(3);
        for rep in 0..10 {
            let cloud = sample_cloud(400.0, &density, 1000 + rep).unwrap();
            let sol = solve_r_heavy(400.0, 3, &density, 1.0).unwrap();
            let big_r = sol.r_kn;
            let s_hat = count_crackle_tuples(cloud.view(), &c, 1.0, big_r).unwrap();
            let l = count_connected_tuples(cloud.view(), 4, 1.0, big_r).unwrap();
            let beta = betti_outside_ball(cloud.view(), 1.0, big_r, 1).unwrap();
            assert!(
                s_hat <= beta && beta <= s_hat + l,
                "rep {rep}: S = {s_hat}, beta = {beta}, L = {l}"
            );
        }
    }

    #[test]
    fn annuli_census_hand_case() {
        // one isolated pair beyond R_2 and nothing else classifiable
        let coords = [20.0, 20.3, 6.0, 6.2, 6.4, 0.5];
        let constraints = [ConstraintH::connected(2), ConstraintH::connected(3)];
        let radii = [10.0, 5.0];
        let table =
            annuli_census(Points::new(&coords, 1), 1.0, &radii, &constraints).unwrap();
        assert_eq!(table.counts[0], vec![1, 0], "pair at 20 in [10, inf)");
        assert_eq!(table.counts[1], vec![0, 1], "triple at 6 in [5, 10)");
        // a cloud entirely inside the smallest radius gives an all-zero table
        let inner = [0.5, 1.0, 2.0];
        let table = annuli_census(Points::new(&inner, 1), 1.0, &radii, &constraints).unwrap();
        assert!(table.counts.iter().all(|row| row.iter().all(|&c| c == 0)));
    }

    #[test]
    fn annuli_rejects_unsorted_radii() {
        let coords = [1.0];
        assert!(annuli_census(
            Points::new(&coords, 1),
            1.0,
            &[5.0, 10.0],
            &[ConstraintH::connected(2)]
        )
        .is_err());
    }

    #[test]
    fn maxima_path_is_monotone_with_sentinel_start() {
        let sol = ScalingSolution {
            r_kn: 1.0,
            c_kn: 1.0,
            d_kn: 0.0,
            regime: None,
        };
        let coords = [5.0, 5.5, -8.0, -8.3, 0.0];
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let path = maxima_path(Points::new(&coords, 1), &constraint2(), 1.0, &sol, &grid).unwrap();
        assert_eq!(path.values[0], f64::NEG_INFINITY, "t = 0 admits no tuple");
        for w in path.values.windows(2) {
            assert!(w[1] >= w[0]);
        }
        // pair {0,1} has max index 2 -> enters at t >= 0.4; pair {2,3} at t >= 0.8
        assert_eq!(path.values[2], 5.0);
        assert_eq!(path.values[4], 8.0);
    }

    #[test]
    fn partial_sum_hand_cases() {
        let c = constraint2();
        let empty = [0.0; 0];
        assert_eq!(
            partial_sum_statistic(Points::new(&empty, 1), 1.0, 5.0, &c).unwrap(),
            0.0
        );
        let coords = [7.0, 7.5];
        let v = partial_sum_statistic(Points::new(&coords, 1), 1.0, 5.0, &c).unwrap();
        assert!((v - 1.4).abs() < 1e-15);
        // reflection negates the statistic exactly
        let coords = [7.0, 7.5, -3.0, -3.2, 0.5];
        let refl: Vec<f64> = coords.iter().map(|x| -x).collect();
        let a = partial_sum_statistic(Points::new(&coords, 1), 1.0, 5.0, &c).unwrap();
        let b = partial_sum_statistic(Points::new(&refl, 1), 1.0, 5.0, &c).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn partial_sum_rejects_unsupported_shapes() {
        let coords = [0.0, 0.0];
        assert!(
            partial_sum_statistic(Points::new(&coords, 2), 1.0, 5.0, &constraint2()).is_err()
        );
        assert!(partial_sum_statistic(
            Points::new(&coords, 1),
            1.0,
            5.0,
            &ConstraintH::connected(3)
        )
        .is_err());
    }

    #[test]
    fn gof_degenerate_law() {
        let report = poisson_gof(&[0, 0, 0], 0.0).unwrap();
        assert_eq!(report.tv_distance, 0.0);
        assert_eq!(report.p_value, 1.0);
        let report = poisson_gof(&[0, 1, 0, 0], 0.0).unwrap();
        assert!((report.tv_distance - 0.25).abs() < 1e-15);
        assert_eq!(report.p_value, 0.0);
    }

    #[test]
    fn gof_accepts_the_true_law_and_rejects_a_wrong_one() {
        use rand_distr::{Distribution, Poisson};
        let mut rng = ChaCha12Rng::seed_from_u64(4242);
        let poi = Poisson::new(0.7).unwrap();
        let mut accept = 0;
        let meta = 40;
        for _ in 0..meta {
            let counts: Vec<u64> = (0..10_000).map(|_| poi.sample(&mut rng) as u64).collect();
            let report = poisson_gof(&counts, 0.7).unwrap();
            if report.p_value > 0.01 {
                accept += 1;
            }
        }
        assert!(accept * 100 >= meta * 95, "accepted {accept}/{meta}");
        // Poi(0.7) data against lambda = 2: TV approaches the analytic 0.49
        let counts: Vec<u64> = (0..10_000).map(|_| poi.sample(&mut rng) as u64).collect();
        let report = poisson_gof(&counts, 2.0).unwrap();
        assert!(report.tv_distance > 0.3, "tv = {}", report.tv_distance);
    }

    #[test]
    fn replication_runs_are_deterministic_and_aggregate_correctly() {
        let config = ExperimentConfig {
            density: DensityConfig {
                family: FamilyName::Heavy,
                alpha: Some(2.0),
                tau: None,
            },
            dim: 1,
            k: 2,
            constraint: ConstraintConfig::default(),
            r_n: RnRuleConfig::default(),
            n: NGridConfig { grid: vec![2000.0] },
            replications: 8,
            seed: 99,
            output: OutputConfig::default(),
            mc_samples: 20_000,
            contractibility: None,
        };
        let a = run_replications(&config).unwrap();
        let b = run_replications(&config).unwrap();
        assert_eq!(a.runs[0].counts, b.runs[0].counts);
        let run = &a.runs[0];
        let mean = run.counts.iter().sum::<u64>() as f64 / run.counts.len() as f64;
        assert_eq!(run.empirical_mean, mean);
        // a single replication reproduces a lone crackle count
        let mut single = config.clone();
        single.replications = 1;
        let r = run_replications(&single).unwrap();
        assert_eq!(r.runs[0].counts.len(), 1);
        assert_eq!(r.runs[0].counts[0], a.runs[0].counts[0]);
    }

    #[test]
    fn replications_zero_is_rejected() {
        let mut config = ExperimentConfig {
            density: DensityConfig {
                family: FamilyName::Heavy,
                alpha: Some(2.0),
                tau: None,
            },
            dim: 1,
            k: 2,
            constraint: ConstraintConfig::default(),
            r_n: RnRuleConfig::default(),
            n: NGridConfig { grid: vec![100.0] },
            replications: 1,
            seed: 0,
            output: OutputConfig::default(),
            mc_samples: 1000,
            contractibility: None,
        };
        config.replications = 0;
        assert!(run_replications(&config).is_err());
    }

    #[test]
    fn palm_identity_within_stderr_and_trivial_zero() {
        let density = Arc::new(RadialDensity::heavy_polynomial(2.0, 1).unwrap());
        let c = constraint2();
        let n = 300.0;
        let sol = solve_r_heavy(n, 2, &density, 1.0).unwrap();
        let report =
            palm_crosscheck(&density, &c, n, 1.0, sol.r_kn, 60, 4000, 2024).unwrap();
        assert!(
            (report.direct - report.palm).abs() <= 3.0 * report.combined_stderr,
            "direct {} vs palm {} (se {})",
            report.direct,
            report.palm,
            report.combined_stderr
        );
        // an impossible region forces both estimators to zero
        let zero = palm_crosscheck(&density, &c, 100.0, 1.0, 1e9, 4, 100, 7).unwrap();
        assert_eq!(zero.direct, 0.0);
        assert_eq!(zero.palm, 0.0);
    }

    #[test]
    fn palm_rejects_large_n() {
        let density = Arc::new(RadialDensity::heavy_polynomial(2.0, 1).unwrap());
        assert!(
            palm_crosscheck(&density, &constraint2(), 5000.0, 1.0, 10.0, 4, 10, 1).is_err()
        );
    }
}
