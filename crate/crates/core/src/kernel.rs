//! Memory-kernel pairs `(k, l)` with `k ∗ l = 1`, their cumulative integrals,
//! product-integration convolution weights and the discrete relaxation family.
//!
//! The catalogue is closed:
//!
//! * `Fractional`: `k = g_{1-α}`, `l = g_α` with `g_β(t) = t^{β-1}/Γ(β)`.
//! * `FractionalExp`: `k = g_{1-α} e^{-γ₀t}`, `l = g_α e^{-γ₀t} + γ₀ (1 ∗ g_α e^{-γ₀·})`.
//! * `DistributedOrder`: `k = ∫₀¹ g_β dβ`, `l(t) = ∫₀^∞ e^{-st}/(1+s) ds = e^t E1(t)`.

use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::special::{
    exp_integral_e1_scaled, gamma, gamma_p, rgamma, EULER_GAMMA,
};

/// Lower and upper (exclusive) bounds for the order α.
pub const ALPHA_MIN: f64 = 0.05;
pub const ALPHA_MAX: f64 = 0.95;

/// Default number of Gauss-Legendre nodes in β for the distributed-order pair.
pub const DEFAULT_QUAD_DEPTH: usize = 64;

// Nodes per interval for increment integrals away from the origin.
const INTERVAL_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelVariant {
    Fractional { alpha: f64 },
    FractionalExp { alpha: f64, rate: f64 },
    DistributedOrder,
}

/// A kernel pair from the catalogue together with precomputed constants.
#[derive(Debug, Clone)]
pub struct KernelPair {
    variant: KernelVariant,
    quad_depth: usize,
    inner: Arc<PairConstants>,
}

#[derive(Debug)]
struct PairConstants {
    // Γ-derived scale factors for the fractional variants.
    inv_gamma_one_minus_alpha: f64,
    inv_gamma_alpha: f64,
    inv_gamma_two_minus_alpha: f64,
    inv_gamma_one_plus_alpha: f64,
    // β-quadrature for the distributed-order pair: (β, w/Γ(β), w/Γ(β+1)).
    beta_nodes: Vec<(f64, f64, f64)>,
    interval_rule: GaussLegendre,
    // L(1) and a smooth quadrature rule for the distributed-order L.
    dist_l_at_one: f64,
    smooth_rule: GaussLegendre,
}

impl KernelPair {
    pub fn new(variant: KernelVariant) -> Result<Self> {
        Self::with_quad_depth(variant, DEFAULT_QUAD_DEPTH)
    }

    pub fn fractional(alpha: f64) -> Result<Self> {
        Self::new(KernelVariant::Fractional { alpha })
    }

    pub fn fractional_exp(alpha: f64, rate: f64) -> Result<Self> {
        Self::new(KernelVariant::FractionalExp { alpha, rate })
    }

    pub fn distributed_order() -> Result<Self> {
        Self::new(KernelVariant::DistributedOrder)
    }

    pub fn with_quad_depth(variant: KernelVariant, quad_depth: usize) -> Result<Self> {
        if quad_depth == 0 {
            return Err(Error::Invalid("quad_depth must be positive".into()));
        }
        let alpha = match variant {
            KernelVariant::Fractional { alpha } => Some(alpha),
            KernelVariant::FractionalExp { alpha, rate } => {
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(domain("KernelPair", format!("rate γ0 = {rate} must be ≥ 0")));
                }
                Some(alpha)
            }
            KernelVariant::DistributedOrder => None,
        };
        if let Some(a) = alpha {
            if !(a > ALPHA_MIN && a < ALPHA_MAX) {
                return Err(domain(
                    "KernelPair",
                    format!("order α = {a} outside ({ALPHA_MIN}, {ALPHA_MAX})"),
                ));
            }
        }
        let a = alpha.unwrap_or(0.5);
        let beta_rule = GaussLegendre::new(quad_depth);
        let beta_nodes = beta_rule
            .mapped(0.0, 1.0)
            .map(|(b, w)| (b, w * rgamma(b), w * rgamma(b + 1.0)))
            .collect();
        let smooth_rule = GaussLegendre::new(24);
        let dist_l_at_one = distributed_cumulative_l_small(1.0, &smooth_rule);
        let inner = PairConstants {
            inv_gamma_one_minus_alpha: 1.0 / gamma(1.0 - a)?,
            inv_gamma_alpha: 1.0 / gamma(a)?,
            inv_gamma_two_minus_alpha: 1.0 / gamma(2.0 - a)?,
            inv_gamma_one_plus_alpha: 1.0 / gamma(1.0 + a)?,
            beta_nodes,
            interval_rule: GaussLegendre::new(INTERVAL_NODES),
            dist_l_at_one,
            smooth_rule,
        };
        Ok(Self {
            variant,
            quad_depth,
            inner: Arc::new(inner),
        })
    }

    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    pub fn quad_depth(&self) -> usize {
        self.quad_depth
    }

    /// Order α for the fractional variants.
    pub fn alpha(&self) -> Option<f64> {
        match self.variant {
            KernelVariant::Fractional { alpha } | KernelVariant::FractionalExp { alpha, .. } => {
                Some(alpha)
            }
            KernelVariant::DistributedOrder => None,
        }
    }

    /// Memory kernel `k(t)`, t > 0.
    pub fn k(&self, t: f64) -> Result<f64> {
        check_positive("kernel_k", t)?;
        Ok(self.k_unchecked(t))
    }

    /// Dual kernel `l(t)`, t > 0.
    pub fn l(&self, t: f64) -> Result<f64> {
        check_positive("kernel_l", t)?;
        Ok(self.l_unchecked(t))
    }

    /// `K(t) = ∫₀ᵗ k`, t ≥ 0.
    pub fn cumulative_k(&self, t: f64) -> Result<f64> {
        check_nonnegative("cumulative_k", t)?;
        Ok(self.cumulative_k_unchecked(t))
    }

    /// `L(t) = ∫₀ᵗ l`, t ≥ 0.
    pub fn cumulative_l(&self, t: f64) -> Result<f64> {
        check_nonnegative("cumulative_l", t)?;
        Ok(self.cumulative_l_unchecked(t))
    }

    /// `L(∞)`, or `None` when `l` is not integrable on the half line.
    pub fn l_integral(&self) -> Option<f64> {
        // Every catalogue l tends to a positive constant or decays like 1/t.
        None
    }

    pub(crate) fn k_unchecked(&self, t: f64) -> f64 {
        let c = &self.inner;
        match self.variant {
            KernelVariant::Fractional { alpha } => t.powf(-alpha) * c.inv_gamma_one_minus_alpha,
            KernelVariant::FractionalExp { alpha, rate } => {
                t.powf(-alpha) * c.inv_gamma_one_minus_alpha * (-rate * t).exp()
            }
            KernelVariant::DistributedOrder => {
                let lt = t.ln();
                c.beta_nodes
                    .iter()
                    .map(|&(b, w, _)| w * ((b - 1.0) * lt).exp())
                    .sum()
            }
        }
    }

    pub(crate) fn l_unchecked(&self, t: f64) -> f64 {
        let c = &self.inner;
        match self.variant {
            KernelVariant::Fractional { alpha } => t.powf(alpha - 1.0) * c.inv_gamma_alpha,
            KernelVariant::FractionalExp { alpha, rate } => {
                let singular = t.powf(alpha - 1.0) * c.inv_gamma_alpha * (-rate * t).exp();
                if rate == 0.0 {
                    singular
                } else {
                    singular + rate.powf(1.0 - alpha) * gamma_p(alpha, rate * t).unwrap_or(0.0)
                }
            }
            KernelVariant::DistributedOrder => {
                exp_integral_e1_scaled(t).expect("t > 0 checked by caller")
            }
        }
    }

    pub(crate) fn cumulative_k_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let c = &self.inner;
        match self.variant {
            KernelVariant::Fractional { alpha } => t.powf(1.0 - alpha) * c.inv_gamma_two_minus_alpha,
            KernelVariant::FractionalExp { alpha, rate } => {
                if rate == 0.0 {
                    t.powf(1.0 - alpha) * c.inv_gamma_two_minus_alpha
                } else {
                    rate.powf(alpha - 1.0) * gamma_p(1.0 - alpha, rate * t).unwrap_or(0.0)
                }
            }
            KernelVariant::DistributedOrder => {
                let lt = t.ln();
                c.beta_nodes
                    .iter()
                    .map(|&(b, _, w1)| w1 * (b * lt).exp())
                    .sum()
            }
        }
    }

    pub(crate) fn cumulative_l_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let c = &self.inner;
        match self.variant {
            KernelVariant::Fractional { alpha } => t.powf(alpha) * c.inv_gamma_one_plus_alpha,
            KernelVariant::FractionalExp { alpha, rate } => {
                if rate == 0.0 {
                    return t.powf(alpha) * c.inv_gamma_one_plus_alpha;
                }
                let x = rate * t;
                let p_a = gamma_p(alpha, x).unwrap_or(0.0);
                let p_a1 = gamma_p(alpha + 1.0, x).unwrap_or(0.0);
                rate.powf(-alpha) * p_a + rate.powf(1.0 - alpha) * t * p_a
                    - alpha * rate.powf(-alpha) * p_a1
            }
            KernelVariant::DistributedOrder => {
                if t <= 1.0 {
                    distributed_cumulative_l_small(t, &c.smooth_rule)
                } else {
                    c.dist_l_at_one + self.distributed_l_integral_above_one(t)
                }
            }
        }
    }

    // ∫₁ᵗ e^s E1(s) ds on panels [2^i, 2^{i+1}] where l ~ 1/s is smooth.
    fn distributed_l_integral_above_one(&self, t: f64) -> f64 {
        let rule = &self.inner.smooth_rule;
        let f = |s: f64| exp_integral_e1_scaled(s).expect("s ≥ 1");
        let mut acc = 0.0;
        let mut a = 1.0;
        while a < t {
            let b = (2.0 * a).min(t);
            acc += rule.integrate(f, a, b);
            a = b;
        }
        acc
    }

    /// `∫_a^b k(s) ds` for 0 ≤ a ≤ b.
    pub fn integral_k(&self, a: f64, b: f64) -> f64 {
        self.interval_integral(a, b, true)
    }

    /// `∫_a^b l(s) ds` for 0 ≤ a ≤ b.
    pub fn integral_l(&self, a: f64, b: f64) -> f64 {
        self.interval_integral(a, b, false)
    }

    /// Integral of `k` (or `l`) over `[mτ, (m+1)τ]`. The panel is centred at
    /// `(m + 1/2)τ` with half-width `τ/2` so that rounding in the grid
    /// endpoints does not leak into the weights.
    pub(crate) fn grid_increment(&self, m: usize, tau: f64, use_k: bool) -> f64 {
        if m == 0 {
            return if use_k {
                self.cumulative_k_unchecked(tau)
            } else {
                self.cumulative_l_unchecked(tau)
            };
        }
        let rule = &self.inner.interval_rule;
        let mid = (m as f64 + 0.5) * tau;
        let half = 0.5 * tau;
        if use_k {
            rule.integrate_centered(|s| self.k_unchecked(s), mid, half)
        } else {
            rule.integrate_centered(|s| self.l_unchecked(s), mid, half)
        }
    }

    fn interval_integral(&self, a: f64, b: f64, use_k: bool) -> f64 {
        debug_assert!(0.0 <= a && a <= b);
        let cumulative = |t: f64| {
            if use_k {
                self.cumulative_k_unchecked(t)
            } else {
                self.cumulative_l_unchecked(t)
            }
        };
        if b == a {
            return 0.0;
        }
        // Near the origin (relative to the interval length) the cumulative
        // difference is well conditioned and handles the singularity exactly.
        if a < 0.5 * (b - a) {
            return cumulative(b) - cumulative(a);
        }
        let rule = &self.inner.interval_rule;
        // Split so that every panel satisfies b_i / a_i ≤ 2.
        let mut acc = 0.0;
        let mut lo = a;
        while lo < b {
            let hi = (2.0 * lo).min(b);
            acc += if use_k {
                rule.integrate(|s| self.k_unchecked(s), lo, hi)
            } else {
                rule.integrate(|s| self.l_unchecked(s), lo, hi)
            };
            lo = hi;
        }
        acc
    }
}

// L(t) for 0 < t ≤ 1 from the series of E1:
// L(t) = -γ(e^t - 1) - (e^t - 1) ln t + Σ_{k≥1} t^k/(k·k!) - ∫₀ᵗ e^s S(s) ds,
// with S(s) = Σ_{k≥1} (-s)^k/(k·k!) entire.
fn distributed_cumulative_l_small(t: f64, rule: &GaussLegendre) -> f64 {
    let em1 = t.exp_m1();
    let mut pos_series = 0.0;
    let mut fact = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        fact *= t / kf;
        let term = fact / kf;
        pos_series += term;
        if term < 1e-18 {
            break;
        }
    }
    let s_fn = |s: f64| {
        let mut sum = 0.0;
        let mut f = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            f *= -s / kf;
            let term = f / kf;
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        s.exp() * sum
    };
    let smooth = rule.integrate(s_fn, 0.0, t);
    -EULER_GAMMA * em1 - em1 * t.ln() + pos_series - smooth
}

fn check_positive(what: &'static str, t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(what, format!("time {t} must be positive and finite")))
    }
}

fn check_nonnegative(what: &'static str, t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(what, format!("time {t} must be nonnegative and finite")))
    }
}

/// Uniform time grid `t_n = n·τ`, n = 0..=N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    step: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(step: f64, steps: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Invalid(format!("time step {step} must be positive")));
        }
        if steps == 0 {
            return Err(Error::Invalid("time grid needs at least one step".into()));
        }
        Ok(Self { step, steps })
    }

    /// Grid with step `step` covering `[0, horizon]`; the horizon must be an
    /// integer multiple of the step up to rounding.
    pub fn with_horizon(step: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Invalid(format!("horizon {horizon} must be positive")));
        }
        let n = (horizon / step).round();
        if n < 1.0 || ((n * step - horizon) / horizon).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "horizon {horizon} is not a multiple of the step {step}"
            )));
        }
        Self::new(step, n as usize)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }

    /// Grid with half the step over the same horizon.
    pub fn refined(&self) -> Self {
        Self {
            step: 0.5 * self.step,
            steps: 2 * self.steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightForm {
    /// `b_m`: discrete memory kernel acting on increments.
    KForm,
    /// `w_m = L(t_{m+1}) - L(t_m)`.
    LForm,
}

/// Rule used to build the k-form weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KWeightRule {
    /// `b_m = (K(t_{m+1}) - K(t_m))/τ` (piecewise-linear product integration).
    Cumulative,
    /// The exact discrete inverse of the l-weights: `Σ_{m≤n} b_m w_{n-m} = 1`.
    #[default]
    Dual,
}

/// Product-integration weights on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionWeights {
    form: WeightForm,
    step: f64,
    values: Vec<f64>,
}

impl ConvolutionWeights {
    pub fn form(&self) -> WeightForm {
        self.form
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when the sequence is nonnegative and nonincreasing up to rounding
    /// at the scale of its leading entry.
    pub fn is_monotone(&self) -> bool {
        let slack = 16.0 * f64::EPSILON * self.values.first().map_or(0.0, |v| v.abs());
        self.values.iter().all(|&v| v >= -slack)
            && self.values.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// `b_m = (K(t_{m+1}) - K(t_m))/τ`, m = 0..N-1.
pub fn k_weights(pair: &KernelPair, grid: &TimeGrid) -> Result<ConvolutionWeights> {
    let tau = grid.step();
    let values = increments(grid, |m| pair.grid_increment(m, tau, true) / tau)?;
    Ok(ConvolutionWeights {
        form: WeightForm::KForm,
        step: tau,
        values,
    })
}

/// `w_m = L(t_{m+1}) - L(t_m)`, m = 0..N-1.
pub fn l_weights(pair: &KernelPair, grid: &TimeGrid) -> Result<ConvolutionWeights> {
    let values = increments(grid, |m| pair.grid_increment(m, grid.step(), false))?;
    Ok(ConvolutionWeights {
        form: WeightForm::LForm,
        step: grid.step(),
        values,
    })
}

/// k-form weights for the chosen rule.
pub fn k_weights_with_rule(
    pair: &KernelPair,
    grid: &TimeGrid,
    rule: KWeightRule,
) -> Result<ConvolutionWeights> {
    match rule {
        KWeightRule::Cumulative => k_weights(pair, grid),
        KWeightRule::Dual => dual_k_weights(&l_weights(pair, grid)?),
    }
}

/// The k-form weights `b` with `Σ_{m=0}^{n} b_m w_{n-m} = 1` for every n.
pub fn dual_k_weights(lw: &ConvolutionWeights) -> Result<ConvolutionWeights> {
    if lw.form != WeightForm::LForm {
        return Err(Error::Invalid("dual weights need l-form input".into()));
    }
    let w = &lw.values;
    let w0 = w[0];
    if !(w0 > 0.0) {
        return Err(Error::Invalid(format!("leading l-weight {w0} must be positive")));
    }
    let mut b: Vec<f64> = Vec::with_capacity(w.len());
    for n in 0..w.len() {
        let acc: f64 = b.iter().zip(w[1..=n].iter().rev()).map(|(bm, wk)| bm * wk).sum();
        b.push((1.0 - acc) / w0);
    }
    Ok(ConvolutionWeights {
        form: WeightForm::KForm,
        step: lw.step,
        values: b,
    })
}

fn increments(grid: &TimeGrid, f: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(grid.steps());
    for m in 0..grid.steps() {
        let v = f(m);
        if !v.is_finite() {
            return Err(Error::Quadrature {
                what: "convolution weights",
                detail: format!("non-finite weight at index {m}"),
            });
        }
        values.push(v);
    }
    Ok(values)
}

/// `(w ⊛ v)_n = Σ_{j=1}^{n} w_{n-j} v_j` for n = 0..len(v)-1 (right-endpoint
/// product integration; the entry at n = 0 is zero).
pub fn discrete_conv(weights: &ConvolutionWeights, v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Invalid("empty sample sequence".into()));
    }
    if v.len() - 1 > weights.len() {
        return Err(Error::LengthMismatch {
            expected: weights.len() + 1,
            got: v.len(),
        });
    }
    let w = &weights.values;
    let mut out = vec![0.0; v.len()];
    for n in 1..v.len() {
        out[n] = (1..=n).map(|j| w[n - j] * v[j]).sum();
    }
    Ok(out)
}

/// Maximum of `|(k ∗ l)(t_n) - 1|` over grid points `t_n ≥ t_min`.
///
/// Interior subintervals use the midpoint value of `k` against the exact
/// l-increment; the last subinterval, where `k` is singular, uses the exact
/// k-increment `K(τ)` against the midpoint value of `l`.
pub fn verify_pair(pair: &KernelPair, grid: &TimeGrid, t_min: f64) -> Result<f64> {
    let tau = grid.step();
    if !(t_min > 0.0 && t_min < grid.horizon()) {
        return Err(Error::Invalid(format!("t_min {t_min} must lie in (0, T)")));
    }
    let n_steps = grid.steps();
    let w = l_weights(pair, grid)?.values;
    // k at (m + 1/2)τ, m = 1..N-1
    let k_mid: Vec<f64> = (0..n_steps)
        .map(|m| if m == 0 { 0.0 } else { pair.k_unchecked((m as f64 + 0.5) * tau) })
        .collect();
    let k_last = pair.cumulative_k_unchecked(tau);
    let start = ((t_min / tau).ceil() as usize).max(2);
    let mut worst: f64 = 0.0;
    for n in start..=n_steps {
        // interval j covers [t_{j-1}, t_j]; k argument is (n - j + 1/2)τ
        let mut acc = 0.0;
        for j in 1..n {
            acc += k_mid[n - j] * w[j - 1];
        }
        acc += k_last * pair.l_unchecked((n as f64 - 0.5) * tau);
        worst = worst.max((acc - 1.0).abs());
    }
    Ok(worst)
}

/// Samples of the relaxation function `s_γ`, the resolvent `r_γ`, `h_γ = γ r_γ`
/// and `k_γ = γ s_γ` on a uniform grid.
#[derive(Debug, Clone)]
pub struct RelaxationFamily {
    pub gamma: f64,
    pub grid: TimeGrid,
    /// `s_n`, n = 0..=N.
    pub s: Vec<f64>,
    /// `r_m` on `[t_m, t_{m+1}]`, m = 0..N-1.
    pub r: Vec<f64>,
    /// `h_m = -(s_{m+1} - s_m)/τ`, m = 0..N-1.
    pub h: Vec<f64>,
    /// `k_γ,n = γ s_n`, n = 0..=N.
    pub k_gamma: Vec<f64>,
    /// Max deviation between the k-form and the l-form Volterra solve, when
    /// the cross-check was requested.
    pub cross_check_gap: Option<f64>,
}

impl RelaxationFamily {
    /// `max_n |γ (1 ⊛ r)_n + s_n - 1|`.
    pub fn identity_residual(&self) -> f64 {
        let tau = self.grid.step();
        let mut acc = 0.0;
        let mut worst: f64 = (self.s[0] - 1.0).abs();
        for n in 1..self.s.len() {
            acc += tau * self.r[n - 1];
            worst = worst.max((self.gamma * acc + self.s[n] - 1.0).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RelaxationOptions {
    pub rule: KWeightRule,
    pub cross_check: bool,
}

/// Solves `Σ_{j≤n} b_{n-j}(s_j - s_{j-1}) = -γ s_n`, `s_0 = 1`, and derives
/// `h`, `r` and `k_γ`.
pub fn relaxation_family(
    pair: &KernelPair,
    gamma: f64,
    grid: &TimeGrid,
    opts: RelaxationOptions,
) -> Result<RelaxationFamily> {
    if !gamma.is_finite() {
        return Err(Error::Invalid(format!("rate {gamma} must be finite")));
    }
    let lw = l_weights(pair, grid)?;
    let b = match opts.rule {
        KWeightRule::Cumulative => k_weights(pair, grid)?,
        KWeightRule::Dual => dual_k_weights(&lw)?,
    };
    let s = solve_relaxation_kform(b.values(), gamma)?;
    let cross_check_gap = if opts.cross_check {
        let sl = solve_relaxation_lform(lw.values(), gamma)?;
        Some(
            s.iter()
                .zip(&sl)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let tau = grid.step();
    let h: Vec<f64> = s.windows(2).map(|p| -(p[1] - p[0]) / tau).collect();
    let r: Vec<f64> = if gamma == 0.0 {
        lw.values().iter().map(|w| w / tau).collect()
    } else {
        h.iter().map(|v| v / gamma).collect()
    };
    let k_gamma = s.iter().map(|v| gamma * v).collect();
    Ok(RelaxationFamily {
        gamma,
        grid: *grid,
        s,
        r,
        h,
        k_gamma,
        cross_check_gap,
    })
}

fn solve_relaxation_kform(b: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let pivot = b[0] + gamma;
    if !(pivot > 0.0) {
        return Err(Error::StepSize { pivot });
    }
    let n_steps = b.len();
    let mut s = Vec::with_capacity(n_steps + 1);
    s.push(1.0);
    // (b_0 + γ) s_n = b_{n-1} s_0 + Σ_{j=1}^{n-1} (b_{n-j-1} - b_{n-j}) s_j
    let diffs: Vec<f64> = b.windows(2).map(|p| p[0] - p[1]).collect();
    for n in 1..=n_steps {
        let mut rhs = b[n - 1] * s[0];
        for j in 1..n {
            rhs += diffs[n - j - 1] * s[j];
        }
        s.push(rhs / pivot);
    }
    Ok(s)
}

fn solve_relaxation_lform(w: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let pivot = 1.0 + gamma * w[0];
    if !(pivot > 0.0) {
        return Err(Error::StepSize { pivot });
    }
    let n_steps = w.len();
    let mut s = Vec::with_capacity(n_steps + 1);
    s.push(1.0);
    // s_n + γ Σ_{j=1}^{n} w_{n-j} s_j = 1
    for n in 1..=n_steps {
        let mut acc = 0.0;
        for j in 1..n {
            acc += w[n - j] * s[j];
        }
        s.push((1.0 - gamma * acc) / pivot);
    }
    Ok(s)
}

/// Minimum over n ≥ 1 of `H'(u_n) D_n[u] - D_n[H(u)]`, where
/// `D_n[v] = κ_0 (v_n - v_0) + Σ_{j=1}^{n-1} (κ_{n-j} - κ_{n-j-1})(v_j - v_0)` is
/// the discrete derivative of `κ ∗ (v - v_0)` for a bounded nonincreasing
/// kernel `κ` sampled on the grid.
pub fn check_convexity_inequality<H, DH>(
    kernel_samples: &[f64],
    h: H,
    dh: DH,
    u: &[f64],
    u0: f64,
) -> f64
where
    H: Fn(f64) -> f64,
    DH: Fn(f64) -> f64,
{
    let hu: Vec<f64> = u.iter().map(|&v| h(v)).collect();
    let h0 = h(u0);
    let derivative = |v: &[f64], v0: f64, n: usize| {
        let mut acc = kernel_samples[0] * (v[n] - v0);
        for j in 1..n {
            acc += (kernel_samples[n - j] - kernel_samples[n - j - 1]) * (v[j] - v0);
        }
        acc
    };
    let mut worst = f64::INFINITY;
    for n in 1..u.len().min(kernel_samples.len()) {
        let lhs = dh(u[n]) * derivative(u, u0, n);
        let rhs = derivative(&hu, h0, n);
        worst = worst.min(lhs - rhs);
    }
    worst
}

/// Discrete L1 error `τ Σ_n |(h ⊛ f)_n - f_n|` of the resolvent `h_γ` with
/// `γ = n_index` as an approximate identity.
pub fn approx_identity_error(
    pair: &KernelPair,
    n_index: f64,
    test_fn: &[f64],
    grid: &TimeGrid,
) -> Result<f64> {
    if test_fn.len() != grid.steps() + 1 {
        return Err(Error::LengthMismatch {
            expected: grid.steps() + 1,
            got: test_fn.len(),
        });
    }
    let fam = relaxation_family(pair, n_index, grid, RelaxationOptions::default())?;
    let tau = grid.step();
    let mut err = 0.0;
    for n in 1..test_fn.len() {
        let conv: f64 = (1..=n).map(|j| tau * fam.h[n - j] * test_fn[j]).sum();
        err += tau * (conv - test_fn[n]).abs();
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_adaptive, AdaptiveOptions};
    use crate::special::erfcx;
    use std::f64::consts::PI;

    fn grid(tau: f64, horizon: f64) -> TimeGrid {
        TimeGrid::with_horizon(tau, horizon).unwrap()
    }

    #[test]
    fn kernel_values() {
        let frac = KernelPair::fractional(0.5).unwrap();
        assert!((frac.k(1.0).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-14);
        assert!((frac.l(1.0).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-14);
        let fexp0 = KernelPair::fractional_exp(0.5, 0.0).unwrap();
        assert!((fexp0.k(1.0).unwrap() - frac.k(1.0).unwrap()).abs() < 1e-15);
        let dist = KernelPair::distributed_order().unwrap();
        // ∫₀¹ dβ/Γ(β), adaptive quadrature oracle
        assert!((dist.k(1.0).unwrap() - 0.541_235_734_328_670_6).abs() < 1e-12);
        assert!((dist.l(1.0).unwrap() - 0.596_347_362_323_194_6).abs() < 1e-13);
        assert!(frac.k(0.0).is_err());
        assert!(dist.l(-1.0).is_err());
    }

    #[test]
    fn fractional_exp_l_has_g_alpha_singularity() {
        let pair = KernelPair::fractional_exp(0.5, 1.0).unwrap();
        for &t in &[1e-6, 1e-8, 1e-10] {
            let ratio = pair.l(t).unwrap() * (PI * t).sqrt();
            assert!((ratio - 1.0).abs() < 2.0 * t.sqrt());
        }
    }

    #[test]
    fn cumulatives_closed_forms() {
        let frac = KernelPair::fractional(0.5).unwrap();
        let expect = 1.0 / crate::special::gamma(1.5).unwrap();
        assert!((frac.cumulative_l(1.0).unwrap() - expect).abs() < 1e-14);
        assert!((frac.cumulative_k(1.0).unwrap() - expect).abs() < 1e-14);
        for pair in [
            frac,
            KernelPair::fractional_exp(0.3, 2.0).unwrap(),
            KernelPair::distributed_order().unwrap(),
        ] {
            assert_eq!(pair.cumulative_k(0.0).unwrap(), 0.0);
            assert_eq!(pair.cumulative_l(0.0).unwrap(), 0.0);
            assert!(pair.cumulative_l(-1.0).is_err());
        }
    }

    // ∫₀ᵗ f with s = t v^6, which removes the endpoint singularity.
    fn substituted_integral(f: impl Fn(f64) -> f64, t: f64, opts: AdaptiveOptions) -> f64 {
        let g = |v: f64| {
            let s = t * v.powi(6);
            if s == 0.0 {
                0.0
            } else {
                6.0 * t * v.powi(5) * f(s)
            }
        };
        integrate_adaptive(g, 0.0, 1.0, opts).unwrap_or_else(|e| panic!("t={t}: {e:?}"))
    }

    #[test]
    fn cumulatives_match_independent_quadrature() {
        let opts = AdaptiveOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 5000,
        };
        for pair in [
            KernelPair::fractional_exp(0.3, 2.0).unwrap(),
            KernelPair::fractional_exp(0.7, 0.5).unwrap(),
            KernelPair::distributed_order().unwrap(),
        ] {
            for &t in &[0.01f64, 0.5, 1.0, 3.7, 40.0] {
                let kq = if pair.variant() == KernelVariant::DistributedOrder {
                    // K(t) = ∫₀¹ t^β/Γ(β+1) dβ; the β-rule makes k too singular
                    // at the origin for a quadrature in time.
                    integrate_adaptive(|b| t.powf(b) * rgamma(b + 1.0), 0.0, 1.0, opts).unwrap()
                } else {
                    substituted_integral(|s| pair.k_unchecked(s), t, opts)
                };
                let lq = substituted_integral(|s| pair.l_unchecked(s), t, opts);
                let kc = pair.cumulative_k(t).unwrap();
                let lc = pair.cumulative_l(t).unwrap();
                assert!(((kc - kq) / kq).abs() < 1e-8, "{:?} K({t}): {kc} vs {kq}", pair.variant());
                assert!(((lc - lq) / lq).abs() < 1e-8, "{:?} L({t}): {lc} vs {lq}", pair.variant());
            }
        }
    }

    #[test]
    fn weight_examples() {
        let pair = KernelPair::fractional(0.5).unwrap();
        let g = grid(0.01, 1.0);
        let w = l_weights(&pair, &g).unwrap();
        assert!((w.values()[0] - 0.112_837_916_709_551_26).abs() < 1e-14);
        let b = k_weights(&pair, &g).unwrap();
        assert!((b.values()[0] - 11.283_791_670_955_126).abs() < 1e-11);
        let total: f64 = b.values().iter().map(|v| v * g.step()).sum();
        let k_t = pair.cumulative_k(1.0).unwrap();
        assert!(((total - k_t) / k_t).abs() < 1e-12);
    }

    #[test]
    fn weights_are_monotone_for_catalogue() {
        for pair in [
            KernelPair::fractional(0.25).unwrap(),
            KernelPair::fractional(0.75).unwrap(),
            KernelPair::fractional_exp(0.5, 1.0).unwrap(),
            KernelPair::distributed_order().unwrap(),
        ] {
            for g in [grid(1e-3, 1.0), grid(0.1, 50.0)] {
                let w = l_weights(&pair, &g).unwrap();
                let b = k_weights(&pair, &g).unwrap();
                let d = dual_k_weights(&w).unwrap();
                for (name, x) in [("w", &w), ("b", &b), ("dual", &d)] {
                    let v = x.values();
                    let bad = v.windows(2).position(|p| p[1] > p[0]);
                    assert!(x.is_monotone(), "{:?} {name} {:?} at {bad:?}: {:?}", pair.variant(), g, bad.map(|i| (v[i], v[i + 1])));
                }
            }
        }
    }

    #[test]
    fn dual_weights_invert_l_weights() {
        let pair = KernelPair::distributed_order().unwrap();
        let g = grid(0.05, 10.0);
        let w = l_weights(&pair, &g).unwrap();
        let b = dual_k_weights(&w).unwrap();
        for n in 0..g.steps() {
            let s: f64 = (0..=n).map(|m| b.values()[m] * w.values()[n - m]).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_conv_examples() {
        let pair = KernelPair::fractional(0.5).unwrap();
        let g = grid(1e-3, 1.0);
        let w = l_weights(&pair, &g).unwrap();
        let zeros = vec![0.0; g.steps() + 1];
        assert!(discrete_conv(&w, &zeros).unwrap().iter().all(|&v| v == 0.0));
        let ones = vec![1.0; g.steps() + 1];
        let c = discrete_conv(&w, &ones).unwrap();
        for (n, v) in c.iter().enumerate() {
            assert!((v - pair.cumulative_l(g.time(n)).unwrap()).abs() < 1e-12);
        }
        let t = g.times();
        let c = discrete_conv(&w, &t).unwrap();
        // (g_α ∗ t)(1) = 1/Γ(2.5)
        assert!((c[g.steps()] - 0.752_252_778_063_675_1).abs() < 2e-3);
        assert!(matches!(
            discrete_conv(&w, &vec![0.0; g.steps() + 2]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn verify_pair_fractional() {
        let g = grid(1e-4, 1.0);
        let d = verify_pair(&KernelPair::fractional(0.5).unwrap(), &g, 0.1).unwrap();
        assert!(d <= 1e-2, "{d}");
        let d = verify_pair(&KernelPair::fractional(0.25).unwrap(), &g, 0.1).unwrap();
        assert!(d <= 2e-2, "{d}");
    }

    #[test]
    fn verify_pair_matches_high_precision_sum() {
        // Same sum at n = 3000, α = 0.25, evaluated with 30 significant digits.
        // The fractional pair is self-similar, so the value depends on n only.
        let pair = KernelPair::fractional(0.25).unwrap();
        let n = 3000;
        let g = TimeGrid::new(1.0 / n as f64, n).unwrap();
        let d = verify_pair(&pair, &g, 1.0 - 0.5 / n as f64).unwrap();
        assert!((d - 2.148_457_804_517_93e-6).abs() < 1e-13, "{d:e}");
    }

    #[test]
    fn verify_pair_distributed_order() {
        let g = grid(1e-3, 1.0);
        let d = verify_pair(&KernelPair::distributed_order().unwrap(), &g, 0.5).unwrap();
        assert!(d <= 3e-2, "{d}");
    }

    #[test]
    fn relaxation_trivial_rate() {
        let g = grid(1e-2, 1.0);
        let fam = relaxation_family(&KernelPair::fractional(0.5).unwrap(), 0.0, &g, Default::default())
            .unwrap();
        assert!(fam.s.iter().all(|&v| v == 1.0));
        assert!(fam.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relaxation_matches_mittag_leffler() {
        let g = grid(1e-4, 1.0);
        let pair = KernelPair::fractional(0.5).unwrap();
        let fam = relaxation_family(
            &pair,
            1.0,
            &g,
            RelaxationOptions {
                cross_check: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((fam.s[g.steps()] - 0.427_583_576_155_807).abs() < 1e-3);
        for (n, &s) in fam.s.iter().enumerate() {
            assert!((s - erfcx(g.time(n).sqrt())).abs() < 1e-3);
        }
        assert!(fam.cross_check_gap.unwrap() < 1e-10);
        assert!(fam.identity_residual() < 1e-10);
    }

    #[test]
    fn relaxation_negative_rate_grows() {
        let g = grid(1e-4, 0.1);
        let pair = KernelPair::fractional(0.5).unwrap();
        let fam = relaxation_family(&pair, -5.1304, &g, Default::default()).unwrap();
        let v = fam.s[g.steps()];
        assert!(((v - 27.50) / 27.50).abs() < 0.02, "{v}");
    }

    #[test]
    fn relaxation_pivot_error() {
        let g = grid(0.5, 1.0);
        let pair = KernelPair::fractional(0.5).unwrap();
        let err = relaxation_family(&pair, -100.0, &g, Default::default()).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }));
    }

    #[test]
    fn convexity_inequality_cases() {
        let g = grid(1e-3, 1.0);
        let pair = KernelPair::fractional(0.5).unwrap();
        let fam = relaxation_family(&pair, 2.0, &g, Default::default()).unwrap();
        let t = g.times();
        let u: Vec<f64> = t.iter().map(|v| v.sin()).collect();
        let lin = check_convexity_inequality(&fam.k_gamma, |y| y, |_| 1.0, &u, 0.0);
        assert!(lin.abs() < 1e-12);
        let sq = check_convexity_inequality(&fam.k_gamma, |y| y * y, |y| 2.0 * y, &u, 0.0);
        assert!(sq >= -1e-2);
        let u2: Vec<f64> = t.iter().map(|v| 1.0 + v).collect();
        let lg = check_convexity_inequality(&fam.k_gamma, |y| -y.ln(), |y| -1.0 / y, &u2, 1.0);
        assert!(lg >= -1e-2);
    }

    #[test]
    fn approx_identity_improves_with_rate() {
        let g = grid(1e-3, 1.0);
        let pair = KernelPair::fractional(0.5).unwrap();
        let zero = vec![0.0; g.steps() + 1];
        assert_eq!(approx_identity_error(&pair, 10.0, &zero, &g).unwrap(), 0.0);
        let f: Vec<f64> = g.times().iter().map(|t| t.sin()).collect();
        let e10 = approx_identity_error(&pair, 10.0, &f, &g).unwrap();
        let e100 = approx_identity_error(&pair, 100.0, &f, &g).unwrap();
        let e1000 = approx_identity_error(&pair, 1000.0, &f, &g).unwrap();
        assert!(e100 < e10 && e1000 < e100, "{e10} {e100} {e1000}");
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(0.1, 0).is_err());
        assert!(TimeGrid::with_horizon(0.3, 1.0).is_err());
        let g = TimeGrid::with_horizon(1e-3, 1.0).unwrap();
        assert_eq!(g.steps(), 1000);
        assert!((g.horizon() - 1.0).abs() < 1e-15);
    }
}
