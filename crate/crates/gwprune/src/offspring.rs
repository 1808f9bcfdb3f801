//! Offspring-distribution families and scalar functions of the pruning
//! parameter.
//!
//! A distribution `p` on {0, 1, 2, ...} with `p_1 < 1` is pruned at parameter
//! `u` by `p_k^(u) = u^(k-1) p_k` for `k >= 1`, the lost mass going to
//! `p_0^(u)`. The valid parameters form an interval `[0, ū]` where `ū` is the
//! largest `u` with `Σ_{k>=1} u^(k-1) p_k <= 1`. Everything downstream is a
//! scalar function of `u`: the generating function `g_u`, the mean `μ(u)`,
//! the extinction probability `F(u)` (least fixed point of `g_u`), the
//! conjugate `û = u F(u)`, and the ascension-time density `-F'(u)`.
//!
//! Infinite-support laws are kept in closed form so these functions are exact:
//! plain geometric tails, signed sums of geometric tails (closed under pruning
//! and produced by bridge distributions), and size-biased geometric tails.
//! Anything else is handled by truncation with the cap recorded on the value.

use crate::error::{Error, Result};
use crate::rng::Prng;
use rand::Rng;

/// Convention everywhere: `0^0 = 1`, so `k = 1` terms survive pruning at
/// `u = 0` (unary nodes are never pruned).
fn pow_km1(u: f64, k: usize) -> f64 {
    u.powi(k as i32 - 1)
}

/// One geometric tail `c · r^(k-1)`, `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GeomTerm {
    coef: f64,
    ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    /// Explicit probabilities `p_0 ..= p_K`.
    Finite(Vec<f64>),
    /// `p_k = Σ_i c_i r_i^(k-1)` for `k >= 1`; `p_0` is the complement.
    /// A single term is the plain geometric family of the examples; bridges
    /// of geometric laws add a second, negative term.
    GeometricSum(Vec<GeomTerm>),
    /// `p_k = c · k · r^(k-1)` for `k >= 1`; `p_0` is the complement (zero
    /// when this is the exact size-biasing of a proper geometric law).
    SizeBiasedGeometric { coef: f64, ratio: f64 },
}

/// Criticality of a pruned law at a given parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    SubCritical,
    Critical,
    SuperCritical,
}

/// A pruning parameter validated against a distribution's interval `[0, ū]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruningParameter(f64);

impl PruningParameter {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Sub-critical below 1, critical at 1, super-critical above.
    pub fn regime(self) -> Regime {
        if self.0 < 1.0 {
            Regime::SubCritical
        } else if self.0 > 1.0 {
            Regime::SuperCritical
        } else {
            Regime::Critical
        }
    }
}

/// A probability law on {0, 1, 2, ...} together with the cached quantities
/// every pruning computation needs: the mean `μ(1)`, the largest pruning
/// parameter `ū`, and the critical horizon `u1 = sup{u <= ū : μ(u) <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    family: Family,
    mean: f64,
    max_parameter: f64,
    critical_horizon: f64,
    truncation_cap: Option<usize>,
}

const PROB_TOL: f64 = 1e-12;
const FIXED_POINT_TOL: f64 = 1e-13;
const FIXED_POINT_ITER_CAP: usize = 1_000_000;

impl OffspringDistribution {
    /// Law with explicit probabilities `p_0 ..= p_K`.
    pub fn finite(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("finite support must include p_0"));
        }
        for (k, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < -PROB_TOL {
                return Err(Error::domain(format!("p_{k} = {p} is not a probability")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::domain(format!("probabilities sum to {sum}, not 1")));
        }
        let probs: Vec<f64> = probs.iter().map(|&p| p.max(0.0)).collect();
        Self::from_family(Family::Finite(probs), None)
    }

    /// The critical geometric family of the examples: `p_k = (1-β)² β^(k-1)`
    /// for `k >= 1` and `p_0 = β`.
    pub fn geometric_critical(beta: f64) -> Result<Self> {
        Self::geometric((1.0 - beta) * (1.0 - beta), beta)
    }

    /// General geometric law `p_k = α β^(k-1)` for `k >= 1`.
    pub fn geometric(alpha: f64, beta: f64) -> Result<Self> {
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::domain(format!(
                "geometric ratio {beta} outside (0,1)"
            )));
        }
        if !alpha.is_finite() || alpha <= 0.0 || alpha / (1.0 - beta) > 1.0 + PROB_TOL {
            return Err(Error::domain(format!(
                "geometric coefficient {alpha} leaves no mass for p_0"
            )));
        }
        Self::from_family(
            Family::GeometricSum(vec![GeomTerm {
                coef: alpha,
                ratio: beta,
            }]),
            None,
        )
    }

    /// Truncation fallback for laws outside the closed-form families:
    /// `p_k = pmf(k)` for `1 <= k <= cap`, the remaining tail folded into
    /// `p_0`. The cap is recorded on the value.
    pub fn from_pmf_truncated(pmf: impl Fn(usize) -> f64, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::domain("truncation cap must be positive"));
        }
        let mut probs = vec![0.0; cap + 1];
        let mut tail = 0.0;
        for (k, slot) in probs.iter_mut().enumerate().skip(1) {
            let p = pmf(k);
            if !p.is_finite() || p < 0.0 {
                return Err(Error::domain(format!(
                    "pmf({k}) = {p} is not a probability"
                )));
            }
            *slot = p;
            tail += p;
        }
        if tail > 1.0 + PROB_TOL {
            return Err(Error::domain("pmf mass on 1..=cap exceeds 1"));
        }
        probs[0] = (1.0 - tail).max(0.0);
        Self::from_family(Family::Finite(probs), Some(cap))
    }

    fn from_family(family: Family, truncation_cap: Option<usize>) -> Result<Self> {
        let mut d = OffspringDistribution {
            family,
            mean: 0.0,
            max_parameter: 0.0,
            critical_horizon: 0.0,
            truncation_cap,
        };
        let p1 = d.prob(1);
        if p1 >= 1.0 - PROB_TOL {
            return Err(Error::domain("p_1 < 1 is required"));
        }
        d.mean = d.pgf_derivative(1.0);
        d.max_parameter = d.compute_max_parameter()?;
        d.critical_horizon = d.compute_critical_horizon();
        Ok(d)
    }

    /// Parses a distribution literal: `finite:[p0,p1,...,pK]` or
    /// `geometric:beta` (the critical geometric family).
    pub fn parse_literal(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix("finite:") {
            let body = body.trim();
            let inner = body
                .strip_prefix('[')
                .and_then(|b| b.strip_suffix(']'))
                .ok_or_else(|| Error::parse(format!("expected finite:[p0,...], got `{s}`")))?;
            let probs = inner
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(format!("bad probability `{tok}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            Self::finite(probs)
        } else if let Some(body) = s.strip_prefix("geometric:") {
            let beta = body
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(format!("bad geometric parameter `{body}`")))?;
            Self::geometric_critical(beta)
        } else {
            Err(Error::parse(format!(
                "unknown distribution literal `{s}` (expected finite:[...] or geometric:beta)"
            )))
        }
    }

    /// `P(offspring = k)`.
    pub fn prob(&self, k: usize) -> f64 {
        match &self.family {
            Family::Finite(p) => p.get(k).copied().unwrap_or(0.0),
            Family::GeometricSum(terms) => {
                if k == 0 {
                    let tail: f64 = terms.iter().map(|t| t.coef / (1.0 - t.ratio)).sum();
                    (1.0 - tail).max(0.0)
                } else {
                    terms
                        .iter()
                        .map(|t| t.coef * pow_km1(t.ratio, k))
                        .sum::<f64>()
                        .max(0.0)
                }
            }
            Family::SizeBiasedGeometric { coef, ratio } => {
                if k == 0 {
                    let tail = coef / ((1.0 - ratio) * (1.0 - ratio));
                    (1.0 - tail).max(0.0)
                } else {
                    coef * k as f64 * pow_km1(*ratio, k)
                }
            }
        }
    }

    /// Generating function `g(s) = Σ p_k s^k`.
    pub fn pgf(&self, s: f64) -> f64 {
        match &self.family {
            Family::Finite(p) => p.iter().rev().fold(0.0, |acc, &pk| acc * s + pk),
            Family::GeometricSum(terms) => {
                let mut g = self.prob(0);
                for t in terms {
                    g += t.coef * s / (1.0 - t.ratio * s);
                }
                g
            }
            Family::SizeBiasedGeometric { coef, ratio } => {
                let d = 1.0 - ratio * s;
                self.prob(0) + coef * s / (d * d)
            }
        }
    }

    /// `g'(s) = Σ k p_k s^(k-1)`; at `s = u` this is the pruned mean `μ(u)`.
    pub fn pgf_derivative(&self, s: f64) -> f64 {
        match &self.family {
            Family::Finite(p) => {
                let mut acc = 0.0;
                for k in (1..p.len()).rev() {
                    acc = acc * s + k as f64 * p[k];
                }
                acc
            }
            Family::GeometricSum(terms) => terms
                .iter()
                .map(|t| {
                    let d = 1.0 - t.ratio * s;
                    t.coef / (d * d)
                })
                .sum(),
            Family::SizeBiasedGeometric { coef, ratio } => {
                let d = 1.0 - ratio * s;
                coef * (1.0 + ratio * s) / (d * d * d)
            }
        }
    }

    /// Mean `μ(1)` of the law itself.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Largest pruning parameter `ū = sup{u >= 0 : Σ u^(k-1) p_k <= 1}`.
    ///
    /// Infinite when no arity above 1 carries mass.
    pub fn max_parameter(&self) -> f64 {
        self.max_parameter
    }

    /// `u1 = sup{u in [0, ū] : μ(u) <= 1}`, the parameter where the pruned
    /// family stops having a mean below 1.
    pub fn critical_horizon(&self) -> f64 {
        self.critical_horizon
    }

    /// Truncation cap, when this law was built by [`Self::from_pmf_truncated`].
    pub fn truncation_cap(&self) -> Option<usize> {
        self.truncation_cap
    }

    pub fn is_critical(&self) -> bool {
        (self.mean - 1.0).abs() <= 1e-9
    }

    /// Largest arity with positive probability; `None` for unbounded support.
    pub fn support_max(&self) -> Option<usize> {
        match &self.family {
            Family::Finite(p) => Some(p.iter().rposition(|&x| x > 0.0).unwrap_or(0)),
            _ => None,
        }
    }

    /// Validates `0 <= u <= ū`.
    pub fn param(&self, u: f64) -> Result<PruningParameter> {
        if !u.is_finite() || u < 0.0 || u > self.max_parameter + 1e-12 {
            return Err(Error::domain(format!(
                "pruning parameter {u} outside [0, {}]",
                self.max_parameter
            )));
        }
        Ok(PruningParameter(u.min(self.max_parameter)))
    }

    /// The pruned law `p^(u)`: `p_k^(u) = u^(k-1) p_k` for `k >= 1`.
    pub fn prune_distribution(&self, u: f64) -> Result<Self> {
        let u = self.param(u)?.value();
        let family = match &self.family {
            Family::Finite(p) => {
                let mut q: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(k, &pk)| if k == 0 { 0.0 } else { pow_km1(u, k) * pk })
                    .collect();
                let tail: f64 = q.iter().sum();
                q[0] = (1.0 - tail).max(0.0);
                Family::Finite(q)
            }
            Family::GeometricSum(terms) => Family::GeometricSum(
                terms
                    .iter()
                    .map(|t| GeomTerm {
                        coef: t.coef,
                        ratio: u * t.ratio,
                    })
                    .collect(),
            ),
            Family::SizeBiasedGeometric { coef, ratio } => Family::SizeBiasedGeometric {
                coef: *coef,
                ratio: u * ratio,
            },
        };
        Self::from_family(family, self.truncation_cap)
    }

    /// Generating function of the pruned law,
    /// `g_u(s) = 1 - g(u)/u + g(us)/u`, extended by continuity at `u = 0`.
    pub fn pruned_pgf(&self, u: f64, s: f64) -> Result<f64> {
        let u = self.param(u)?.value();
        if !(0.0..=1.0 + 1e-12).contains(&s) {
            return Err(Error::domain(format!("pgf argument {s} outside [0, 1]")));
        }
        if u == 0.0 {
            let p1 = self.prob(1);
            return Ok(1.0 - p1 + p1 * s);
        }
        Ok(1.0 - self.pgf(u) / u + self.pgf(u * s) / u)
    }

    /// Pruned mean `μ(u) = Σ k u^(k-1) p_k = g'(u)`.
    pub fn mean_at(&self, u: f64) -> Result<f64> {
        let u = self.param(u)?.value();
        let m = self.pgf_derivative(u);
        if !m.is_finite() {
            return Err(Error::numeric(format!("mean series diverges at u = {u}")));
        }
        Ok(m)
    }

    /// `Σ_{k>=1} u^(k-1) p_k`; equals `1 - p_0^(u)` on `[0, ū]`.
    fn pruned_tail_mass(&self, u: f64) -> f64 {
        match &self.family {
            Family::Finite(p) => {
                let mut acc = 0.0;
                for k in (1..p.len()).rev() {
                    acc = acc * u + p[k];
                }
                acc
            }
            Family::GeometricSum(terms) => terms.iter().map(|t| t.coef / (1.0 - u * t.ratio)).sum(),
            Family::SizeBiasedGeometric { coef, ratio } => {
                let d = 1.0 - u * ratio;
                coef / (d * d)
            }
        }
    }

    /// `p_0^(u)` without constructing the pruned law.
    pub fn pruned_p0(&self, u: f64) -> Result<f64> {
        let u = self.param(u)?.value();
        Ok((1.0 - self.pruned_tail_mass(u)).max(0.0))
    }

    /// Derivative of the tail mass in `u`, for the Newton polish of `ū`.
    fn pruned_tail_mass_derivative(&self, u: f64) -> f64 {
        match &self.family {
            Family::Finite(p) => {
                let mut acc = 0.0;
                for k in (2..p.len()).rev() {
                    acc = acc * u + (k - 1) as f64 * p[k];
                }
                acc
            }
            Family::GeometricSum(terms) => terms
                .iter()
                .map(|t| {
                    let d = 1.0 - u * t.ratio;
                    t.coef * t.ratio / (d * d)
                })
                .sum(),
            Family::SizeBiasedGeometric { coef, ratio } => {
                let d = 1.0 - u * ratio;
                2.0 * coef * ratio / (d * d * d)
            }
        }
    }

    /// Radius beyond which the tail mass is no longer a convergent series.
    fn tail_radius(&self) -> f64 {
        match &self.family {
            Family::Finite(_) => f64::INFINITY,
            Family::GeometricSum(terms) => terms
                .iter()
                .filter(|t| t.ratio > 0.0)
                .map(|t| 1.0 / t.ratio)
                .fold(f64::INFINITY, f64::min),
            Family::SizeBiasedGeometric { ratio, .. } => {
                if *ratio > 0.0 {
                    1.0 / ratio
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn compute_max_parameter(&self) -> Result<f64> {
        // Closed forms for the single geometric tail and its size biasing.
        match &self.family {
            Family::GeometricSum(terms) if terms.len() == 1 && terms[0].ratio > 0.0 => {
                return Ok((1.0 - terms[0].coef) / terms[0].ratio);
            }
            Family::SizeBiasedGeometric { coef, ratio } if *ratio > 0.0 && *coef <= 1.0 => {
                return Ok((1.0 - coef.sqrt()) / ratio);
            }
            _ => {}
        }
        let radius = self.tail_radius();
        let h = |u: f64| self.pruned_tail_mass(u);
        // h(1) = 1 - p_0 <= 1, so ū >= 1 always. Find an upper bracket.
        let mut lo = 1.0;
        let mut hi = 1.0;
        let mut bracketed = false;
        for _ in 0..200 {
            let cand = if radius.is_finite() {
                radius - (radius - hi) / 2.0
            } else {
                hi * 2.0
            };
            if h(cand) > 1.0 {
                hi = cand;
                bracketed = true;
                break;
            }
            hi = cand;
            if !radius.is_finite() && hi > 1e12 {
                break;
            }
        }
        if !bracketed {
            // Tail mass never reaches 1: pruning is unconstrained (or, at a
            // finite radius, ū is the radius itself).
            return Ok(if radius.is_finite() {
                radius
            } else {
                f64::INFINITY
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 * hi.max(1.0) {
                break;
            }
        }
        // Newton polish; lands exactly on representable roots of polynomial
        // tails (the binary example gives ū = 2.0 exactly).
        let mut u = 0.5 * (lo + hi);
        for _ in 0..50 {
            let f = h(u) - 1.0;
            let df = self.pruned_tail_mass_derivative(u);
            if df <= 0.0 {
                break;
            }
            let next = u - f / df;
            if !next.is_finite() || next <= 0.0 || next >= radius {
                break;
            }
            if (next - u).abs() <= f64::EPSILON * u.abs() {
                u = next;
                break;
            }
            u = next;
        }
        Ok(u)
    }

    fn compute_critical_horizon(&self) -> f64 {
        if (self.mean - 1.0).abs() <= PROB_TOL {
            return 1.0;
        }
        let ub = self.max_parameter;
        let mu = |u: f64| self.pgf_derivative(u);
        if ub.is_finite() && mu(ub) <= 1.0 {
            return ub;
        }
        if !ub.is_finite() {
            // Unbounded interval: double until the mean passes 1.
            let mut hi = 1.0;
            for _ in 0..200 {
                if mu(hi) > 1.0 {
                    break;
                }
                hi *= 2.0;
                if hi > 1e12 {
                    return f64::INFINITY;
                }
            }
            let mut lo = hi / 2.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mu(mid) > 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        let (mut lo, mut hi) = if self.mean > 1.0 {
            (0.0, 1.0)
        } else {
            (1.0, ub)
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mu(mid) > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Extinction probability `F(u)` of the pruned law: the least nonnegative
    /// fixed point of `s -> g_u(s)`, found by monotone iteration from 0
    /// (which converges to the least root) with a Newton polish.
    pub fn extinction_probability(&self, u: f64) -> Result<f64> {
        let u = self.param(u)?.value();
        if u <= 1.0 {
            return Ok(1.0);
        }
        let gu = |s: f64| 1.0 - self.pgf(u) / u + self.pgf(u * s) / u;
        // Newton from the left of the least root of the convex map stays on
        // its side and converges quadratically, so a short monotone phase is
        // enough to start it; the plain iteration remains as a fallback and
        // honors the overall iteration cap.
        let newton = |mut s: f64| -> f64 {
            for _ in 0..100 {
                let res = gu(s) - s;
                if res.abs() < 1e-15 {
                    break;
                }
                let denom = self.pgf_derivative(u * s) - 1.0;
                if denom.abs() < 1e-14 {
                    break;
                }
                let next = (s - res / denom).clamp(0.0, 1.0);
                if (next - s).abs() < f64::EPSILON {
                    return next;
                }
                s = next;
            }
            s
        };
        let mut s = 0.0;
        let mut spent = 0usize;
        for _ in 0..256 {
            let next = gu(s).clamp(0.0, 1.0);
            let delta = next - s;
            s = next;
            spent += 1;
            if delta.abs() < FIXED_POINT_TOL * 0.1 {
                break;
            }
        }
        s = newton(s);
        while (gu(s) - s).abs() > FIXED_POINT_TOL * 0.1 && spent < FIXED_POINT_ITER_CAP {
            s = gu(s).clamp(0.0, 1.0);
            spent += 1;
            if spent % 4096 == 0 {
                s = newton(s);
            }
        }
        if (gu(s) - s).abs() > 1e-11 {
            return Err(Error::numeric(format!(
                "extinction fixed point did not converge at u = {u} (residual {})",
                (gu(s) - s).abs()
            )));
        }
        Ok(s.clamp(0.0, 1.0))
    }

    /// `F̄(u) = 1 - F(u)`, the non-extinction probability.
    pub fn survival(&self, u: f64) -> Result<f64> {
        Ok(1.0 - self.extinction_probability(u)?)
    }

    /// The conjugate parameter `û = u F(u)`; equals `u` for `u <= 1` and
    /// satisfies `g(û) - g(u) = û - u`.
    pub fn conjugate(&self, u: f64) -> Result<f64> {
        let f = self.extinction_probability(u)?;
        Ok(self.param(u)?.value() * f)
    }

    /// Inverse of `F̄` on `[1, ū]`, by bisection.
    pub fn survival_inverse(&self, x: f64) -> Result<f64> {
        let ub = self.max_parameter;
        if !ub.is_finite() {
            return Err(Error::domain("survival inverse needs a finite ū"));
        }
        let top = self.survival(ub)?;
        if !(0.0..=top + 1e-10).contains(&x) {
            return Err(Error::domain(format!(
                "survival value {x} outside attainable range [0, {top}]"
            )));
        }
        let x = x.min(top);
        let (mut lo, mut hi) = (1.0, ub);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid)? < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Density `-F'(u)` of the ascension time on `(1, ū)`, from the implicit
    /// differentiation of the fixed-point equation:
    /// `u (1 - g'(û)) F'(u) = 1 - g'(u) - F(u)(1 - g'(û))`.
    pub fn ascension_density(&self, u: f64) -> Result<f64> {
        let ub = self.max_parameter;
        if !(1.0 < u && u < ub) {
            return Err(Error::domain(format!(
                "density defined on (1, {ub}), got {u}"
            )));
        }
        let f = self.extinction_probability(u)?;
        let uhat = u * f;
        let d_hat = 1.0 - self.pgf_derivative(uhat);
        if d_hat.abs() < 1e-12 {
            return Err(Error::numeric(format!(
                "degenerate density denominator at u = {u}"
            )));
        }
        let fp = (1.0 - self.pgf_derivative(u) - f * d_hat) / (u * d_hat);
        Ok(-fp)
    }

    /// The size-biased law `p*_k = k p_k / μ(1)` of a critical or
    /// sub-critical distribution.
    pub fn size_biased(&self) -> Result<Self> {
        if self.mean <= 0.0 {
            return Err(Error::domain("size biasing needs a positive mean"));
        }
        if self.mean > 1.0 + 1e-9 {
            return Err(Error::domain(
                "size biasing is defined for critical or sub-critical laws",
            ));
        }
        let family = match &self.family {
            Family::Finite(p) => {
                let mut q: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(k, &pk)| k as f64 * pk / self.mean)
                    .collect();
                q[0] = 0.0;
                let sum: f64 = q.iter().sum();
                // Absorb rounding so the law stays exactly normalized.
                if let Some(last) = q.iter_mut().rev().find(|x| **x > 0.0) {
                    *last += 1.0 - sum;
                }
                Family::Finite(q)
            }
            Family::GeometricSum(terms) if terms.len() == 1 => Family::SizeBiasedGeometric {
                coef: terms[0].coef / self.mean,
                ratio: terms[0].ratio,
            },
            _ => {
                return Err(Error::domain(
                    "size biasing is not supported for this family",
                ));
            }
        };
        Self::from_family(family, self.truncation_cap)
    }

    /// The bridge law `p_{α,β}`: the offspring count grafted between pruning
    /// times `α` and `β`, `p_{α,β}(k) = (1 - (α/β)^(k-1)) p_k^(β) / p_0^(α)`
    /// for `k >= 1` and `p_{α,β}(0) = p_0^(β) / p_0^(α)`.
    pub fn bridge_distribution(&self, alpha: f64, beta: f64) -> Result<Self> {
        let alpha = self.param(alpha)?.value();
        let beta = self.param(beta)?.value();
        if alpha > beta {
            return Err(Error::domain(format!(
                "bridge needs alpha <= beta, got {alpha} > {beta}"
            )));
        }
        let p0_alpha = self.pruned_p0(alpha)?;
        if p0_alpha <= 0.0 {
            return Err(Error::domain(format!(
                "p_0^({alpha}) = 0: bridge undefined"
            )));
        }
        let family = match &self.family {
            Family::Finite(p) => {
                let mut q: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(k, &pk)| {
                        if k == 0 {
                            0.0
                        } else {
                            let ratio = if beta == 0.0 {
                                1.0
                            } else {
                                pow_km1(alpha / beta, k)
                            };
                            (1.0 - ratio) * pow_km1(beta, k) * pk / p0_alpha
                        }
                    })
                    .collect();
                let tail: f64 = q.iter().sum();
                q[0] = (1.0 - tail).max(0.0);
                Family::Finite(q)
            }
            Family::GeometricSum(terms) => {
                let mut out = Vec::with_capacity(2 * terms.len());
                for t in terms {
                    out.push(GeomTerm {
                        coef: t.coef / p0_alpha,
                        ratio: beta * t.ratio,
                    });
                    out.push(GeomTerm {
                        coef: -t.coef / p0_alpha,
                        ratio: alpha * t.ratio,
                    });
                }
                Family::GeometricSum(out)
            }
            Family::SizeBiasedGeometric { .. } => {
                return Err(Error::domain(
                    "bridge of a size-biased family is not supported",
                ));
            }
        };
        Self::from_family(family, self.truncation_cap)
    }

    /// Draws one offspring count by walking the mass function.
    pub fn sample_arity(&self, rng: &mut Prng) -> usize {
        let target: f64 = rng.random();
        let mut acc = self.prob(0);
        if target < acc {
            return 0;
        }
        let cap = match &self.family {
            Family::Finite(p) => p.len(),
            _ => 1 << 20,
        };
        let mut k = 1;
        let mut last_positive = 0;
        while k < cap {
            let pk = self.prob(k);
            if pk > 0.0 {
                last_positive = k;
            }
            acc += pk;
            if target < acc {
                return k;
            }
            k += 1;
        }
        // Rounding left a sliver of unreachable mass; clamp to the support.
        match &self.family {
            Family::Finite(_) => last_positive,
            _ => cap,
        }
    }
}

impl std::fmt::Display for OffspringDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.family {
            Family::Finite(p) => {
                write!(f, "finite:[")?;
                for (k, &pk) in p.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{pk}")?;
                }
                write!(f, "]")
            }
            Family::GeometricSum(terms) if terms.len() == 1 => {
                write!(f, "geometric-tail:{},{}", terms[0].coef, terms[0].ratio)
            }
            Family::GeometricSum(terms) => {
                write!(f, "geometric-sum:")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "({},{})", t.coef, t.ratio)?;
                }
                Ok(())
            }
            Family::SizeBiasedGeometric { coef, ratio } => {
                write!(f, "size-biased-geometric:{coef},{ratio}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    const TOL: f64 = 1e-12;

    fn binary() -> OffspringDistribution {
        OffspringDistribution::finite(vec![0.5, 0.0, 0.5]).unwrap()
    }

    fn geo() -> OffspringDistribution {
        OffspringDistribution::geometric_critical(0.5).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol,
            "expected {b}, got {a} (|diff| = {})",
            (a - b).abs()
        );
    }

    #[test]
    fn prune_binary() {
        let d = binary().prune_distribution(0.5).unwrap();
        close(d.prob(0), 0.75, TOL);
        close(d.prob(2), 0.25, TOL);
        close(d.prob(1), 0.0, TOL);
    }

    #[test]
    fn prune_at_one_is_identity() {
        let d = binary();
        let q = d.prune_distribution(1.0).unwrap();
        for k in 0..4 {
            close(q.prob(k), d.prob(k), TOL);
        }
        let g = geo();
        let q = g.prune_distribution(1.0).unwrap();
        for k in 0..10 {
            close(q.prob(k), g.prob(k), TOL);
        }
    }

    #[test]
    fn prune_geometric_supercritical() {
        let q = geo().prune_distribution(1.2).unwrap();
        close(q.prob(0), 0.375, TOL);
        for k in 1..8 {
            close(q.prob(k), 0.25 * 0.6f64.powi(k as i32 - 1), TOL);
        }
    }

    #[test]
    fn prune_at_zero_keeps_unary_mass() {
        let d = OffspringDistribution::finite(vec![0.2, 0.3, 0.5]).unwrap();
        let q = d.prune_distribution(0.0).unwrap();
        close(q.prob(1), 0.3, TOL);
        close(q.prob(0), 0.7, TOL);
        close(q.prob(2), 0.0, TOL);
    }

    #[test]
    fn prune_rejects_out_of_range() {
        assert!(binary().prune_distribution(2.5).is_err());
        assert!(binary().prune_distribution(-0.1).is_err());
    }

    #[test]
    fn pruned_pgf_values() {
        let d = binary();
        close(d.pruned_pgf(0.5, 0.0).unwrap(), 0.75, TOL);
        close(d.pruned_pgf(0.5, 1.0).unwrap(), 1.0, TOL);
        close(d.pruned_pgf(1.0, 0.3).unwrap(), d.pgf(0.3), TOL);
        close(geo().pruned_pgf(0.7, 1.0).unwrap(), 1.0, TOL);
    }

    #[test]
    fn pruned_pgf_matches_pruned_family() {
        for d in [binary(), geo()] {
            for u in [0.0, 0.2, 0.5, 0.9, 1.0] {
                let q = d.prune_distribution(u).unwrap();
                for s in [0.0, 0.3, 0.7, 1.0] {
                    close(d.pruned_pgf(u, s).unwrap(), q.pgf(s), 1e-12);
                }
            }
        }
    }

    #[test]
    fn mean_at_values() {
        close(binary().mean_at(0.5).unwrap(), 0.5, TOL);
        close(binary().mean_at(2.0).unwrap(), 2.0, TOL);
        close(geo().mean_at(1.0).unwrap(), 1.0, TOL);
    }

    #[test]
    fn max_parameter_values() {
        assert_eq!(binary().max_parameter(), 2.0);
        close(geo().max_parameter(), 1.5, TOL);
        let beta = 0.3;
        close(
            OffspringDistribution::geometric_critical(beta)
                .unwrap()
                .max_parameter(),
            2.0 - beta,
            TOL,
        );
    }

    #[test]
    fn max_parameter_truncated_cubic() {
        // p_k proportional to k^-3 is critical with ū = 1. The truncated
        // version keeps a polynomial tail, so its ū sits a bit above 1;
        // the frozen values come from an independent bisection oracle.
        let c = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let d = OffspringDistribution::from_pmf_truncated(|k| c / (k as f64).powi(3), 200).unwrap();
        assert_eq!(d.truncation_cap(), Some(200));
        close(d.mean(), 0.9969679509144191, 1e-9);
        close(d.max_parameter(), 1.0611626290603149, 1e-6);
        assert!((d.max_parameter() - 1.0).abs() < 0.1);
        close(d.prob(0), 0.26924459178687943, 1e-12);
    }

    #[test]
    fn max_parameter_infinite_without_branching() {
        let d = OffspringDistribution::finite(vec![0.6, 0.4]).unwrap();
        assert!(d.max_parameter().is_infinite());
    }

    #[test]
    fn extinction_values() {
        close(
            binary().extinction_probability(1.5).unwrap(),
            1.0 / 3.0,
            1e-13,
        );
        assert_eq!(binary().extinction_probability(1.0).unwrap(), 1.0);
        assert_eq!(binary().extinction_probability(0.4).unwrap(), 1.0);
        close(geo().extinction_probability(1.2).unwrap(), 0.625, 1e-12);
    }

    #[test]
    fn extinction_fixed_point_on_grid() {
        for d in [binary(), geo()] {
            let ub = d.max_parameter();
            for i in 0..=20 {
                let u = ub * i as f64 / 20.0;
                let f = d.extinction_probability(u).unwrap();
                close(d.pruned_pgf(u, f).unwrap(), f, 1e-12);
            }
        }
    }

    #[test]
    fn conjugate_values() {
        close(binary().conjugate(1.5).unwrap(), 0.5, 1e-12);
        close(binary().conjugate(0.8).unwrap(), 0.8, TOL);
        close(geo().conjugate(1.2).unwrap(), 0.75, 1e-12);
    }

    #[test]
    fn conjugate_duality_on_grid() {
        for d in [binary(), geo()] {
            let ub = d.max_parameter();
            for i in 1..=20 {
                let u = 1.0 + (ub - 1.0) * i as f64 / 20.0;
                let f = d.extinction_probability(u).unwrap();
                let uhat = u * f;
                close(d.pgf(uhat) - d.pgf(u), uhat - u, 1e-10);
                // The p_0 identity degenerates to 0/0 at ū where F vanishes.
                if f > 1e-9 {
                    close(
                        d.pruned_p0(uhat).unwrap(),
                        d.pruned_p0(u).unwrap() / f,
                        1e-10,
                    );
                }
            }
        }
    }

    #[test]
    fn survival_inverse_values() {
        close(binary().survival_inverse(0.5).unwrap(), 4.0 / 3.0, 1e-10);
        close(binary().survival_inverse(0.0).unwrap(), 1.0, 1e-10);
        close(binary().survival_inverse(1.0).unwrap(), 2.0, 1e-9);
        assert!(binary().survival_inverse(1.1).is_err());
    }

    #[test]
    fn survival_inverse_roundtrip() {
        for d in [binary(), geo()] {
            let ub = d.max_parameter();
            for i in 1..10 {
                let u = 1.0 + (ub - 1.0) * i as f64 / 10.0;
                let x = d.survival(u).unwrap();
                close(d.survival_inverse(x).unwrap(), u, 1e-9);
            }
        }
    }

    #[test]
    fn ascension_density_values() {
        close(binary().ascension_density(1.5).unwrap(), 8.0 / 9.0, 1e-10);
        let expected = 1.5 / 1.44 + 0.125 / 0.16;
        close(geo().ascension_density(1.2).unwrap(), expected, 1e-10);
        assert!(binary().ascension_density(1.0).is_err());
    }

    #[test]
    fn ascension_density_matches_finite_differences() {
        for d in [binary(), geo()] {
            let ub = d.max_parameter();
            for i in 1..10 {
                let u = 1.0 + (ub - 1.0) * i as f64 / 10.0;
                if u + 1e-5 >= ub {
                    continue;
                }
                let h = 1e-5;
                let fd = -(d.extinction_probability(u + h).unwrap()
                    - d.extinction_probability(u - h).unwrap())
                    / (2.0 * h);
                let dens = d.ascension_density(u).unwrap();
                assert!(
                    (dens - fd).abs() / dens.abs() < 1e-4,
                    "u={u}: {dens} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn ascension_density_integrates_to_one() {
        // Composite 8-point Gauss-Legendre; all nodes interior, so the open
        // interval (1, ū) is respected.
        let x8 = [
            -0.960_289_856_497_536_2,
            -0.796_666_477_413_626_7,
            -0.525_532_409_916_329,
            -0.183_434_642_495_65,
            0.183_434_642_495_65,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_2,
        ];
        let w8 = [
            0.101_228_536_290_376_25,
            0.222_381_034_453_374_47,
            0.313_706_645_877_887_3,
            0.362_683_783_378_362,
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_47,
            0.101_228_536_290_376_25,
        ];
        for d in [binary(), geo()] {
            let ub = d.max_parameter();
            let panels = 256;
            let mut total = 0.0;
            for p in 0..panels {
                let a = 1.0 + (ub - 1.0) * p as f64 / panels as f64;
                let b = 1.0 + (ub - 1.0) * (p + 1) as f64 / panels as f64;
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                for (x, w) in x8.iter().zip(w8.iter()) {
                    total += w * half * d.ascension_density(mid + half * x).unwrap();
                }
            }
            close(total, 1.0, 1e-6);
        }
    }

    #[test]
    fn size_biased_values() {
        let b = binary().size_biased().unwrap();
        close(b.prob(2), 1.0, TOL);
        close(b.prob(0), 0.0, TOL);
        let g = geo().size_biased().unwrap();
        for k in 1..8 {
            close(g.prob(k), k as f64 * 0.25 * 0.5f64.powi(k as i32 - 1), TOL);
        }
        close(g.prob(0), 0.0, TOL);
    }

    #[test]
    fn bridge_values() {
        let d = binary();
        let b = d.bridge_distribution(0.5, 1.0).unwrap();
        close(b.prob(0), 2.0 / 3.0, TOL);
        close(b.prob(2), 1.0 / 3.0, TOL);
        close(b.mean(), 2.0 / 3.0, TOL);

        let same = d.bridge_distribution(0.7, 0.7).unwrap();
        close(same.prob(0), 1.0, TOL);

        // Bridge mean identity (μ(β) - μ(α)) / p_0^(α) for the geometric family.
        let g = geo();
        let gb = g.bridge_distribution(0.4, 0.9).unwrap();
        let expected =
            (g.mean_at(0.9).unwrap() - g.mean_at(0.4).unwrap()) / g.pruned_p0(0.4).unwrap();
        close(gb.mean(), expected, 1e-10);
        let p0 = g.pruned_p0(0.9).unwrap() / g.pruned_p0(0.4).unwrap();
        close(gb.prob(0), p0, 1e-12);
    }

    #[test]
    fn sampling_matches_mass_function() {
        let d = geo().prune_distribution(0.8).unwrap();
        let mut rng = rng_from_seed(7);
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let k = d.sample_arity(&mut rng);
            counts[k.min(3)] += 1;
        }
        for (k, &count) in counts.iter().enumerate().take(3) {
            let freq = count as f64 / n as f64;
            let se = (d.prob(k) * (1.0 - d.prob(k)) / n as f64).sqrt();
            assert!((freq - d.prob(k)).abs() < 4.0 * se + 1e-9, "k={k}");
        }
    }

    #[test]
    fn literal_roundtrip() {
        let d = OffspringDistribution::parse_literal("finite:[0.5,0,0.5]").unwrap();
        assert_eq!(d, binary());
        let g = OffspringDistribution::parse_literal("geometric:0.5").unwrap();
        assert_eq!(g, geo());
        assert!(OffspringDistribution::parse_literal("pareto:2").is_err());
        assert!(OffspringDistribution::parse_literal("finite:[0.5,0.6]").is_err());
    }

    #[test]
    fn validation_rejects_bad_laws() {
        assert!(OffspringDistribution::finite(vec![0.5, 0.4]).is_err());
        assert!(OffspringDistribution::finite(vec![-0.1, 0.6, 0.5]).is_err());
        assert!(OffspringDistribution::finite(vec![0.0, 1.0]).is_err());
        assert!(OffspringDistribution::geometric(0.8, 0.5).is_err());
    }

    #[test]
    fn regime_classification() {
        let d = binary();
        assert_eq!(d.param(0.5).unwrap().regime(), Regime::SubCritical);
        assert_eq!(d.param(1.0).unwrap().regime(), Regime::Critical);
        assert_eq!(d.param(1.5).unwrap().regime(), Regime::SuperCritical);
    }

    #[test]
    fn critical_horizon_values() {
        assert_eq!(binary().critical_horizon(), 1.0);
        assert_eq!(geo().critical_horizon(), 1.0);
        let sub = OffspringDistribution::finite(vec![0.6, 0.0, 0.4]).unwrap();
        close(sub.critical_horizon(), 1.25, 1e-9);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arbitrary_finite() -> impl Strategy<Value = OffspringDistribution> {
            proptest::collection::vec(0.0f64..1.0, 3..7).prop_filter_map(
                "valid offspring law",
                |w| {
                    let total: f64 = w.iter().sum();
                    if total <= 0.0 {
                        return None;
                    }
                    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
                    if probs[1] >= 1.0 - 1e-6 {
                        return None;
                    }
                    OffspringDistribution::finite(probs).ok()
                },
            )
        }

        proptest! {
            #[test]
            fn pruned_law_is_normalized(d in arbitrary_finite(), t in 0.0f64..1.0) {
                let u = t * d.max_parameter().min(4.0);
                let q = d.prune_distribution(u).unwrap();
                let sum: f64 = (0..8).map(|k| q.prob(k)).sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!((d.pruned_pgf(u, 0.0).unwrap() - q.prob(0)).abs() < 1e-12);
            }

            #[test]
            fn pruning_is_a_semigroup(d in arbitrary_finite(), a in 0.01f64..1.0, b in 0.01f64..1.0) {
                let ub = d.max_parameter().min(4.0);
                let (alpha, beta) = (a.min(b) * ub, a.max(b) * ub);
                let two_step = d.prune_distribution(beta).unwrap()
                    .prune_distribution(alpha / beta).unwrap();
                let one_step = d.prune_distribution(alpha).unwrap();
                for k in 0..8 {
                    prop_assert!((two_step.prob(k) - one_step.prob(k)).abs() < 1e-12);
                }
            }

            #[test]
            fn extinction_is_a_fixed_point(d in arbitrary_finite(), t in 0.0f64..1.0) {
                let u = t * d.max_parameter().min(8.0);
                let f = d.extinction_probability(u).unwrap();
                prop_assert!((d.pruned_pgf(u, f).unwrap() - f).abs() < 1e-11);
            }

            #[test]
            fn conjugate_satisfies_duality(d in arbitrary_finite(), t in 0.0f64..1.0) {
                let ub = d.max_parameter().min(8.0);
                let u = 1.0 + t * (ub - 1.0);
                let uhat = d.conjugate(u).unwrap();
                // Below the critical horizon extinction is certain and the
                // conjugate is the identity; above it, û falls below u1.
                if u <= d.critical_horizon() {
                    prop_assert!((uhat - u).abs() < 1e-9);
                } else {
                    prop_assert!(uhat <= d.critical_horizon() + 1e-9);
                }
                prop_assert!((d.pgf(uhat) - d.pgf(u) - (uhat - u)).abs() < 1e-10);
            }
        }
    }
}
