use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_adaptive_with_breaks, AdaptiveOptions};

/// How `u^p` is continued to negative arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerExtension {
    /// `f(-u) = -f(u)`.
    #[default]
    Odd,
    /// `f(u) = 0` for `u < 0`.
    Zero,
}

/// Reaction term `f(u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    /// `c·u`.
    Linear { c: f64 },
    /// `u^p` on `u ≥ 0`, `p ≥ 1`.
    Power { p: f64, extension: PowerExtension },
    /// `u²`.
    Quadratic,
    /// `u² - u`.
    Nsy,
    /// `Σ c_i u^i`, ascending coefficients; the empty list is `f ≡ 0`.
    Polynomial { coeffs: Vec<f64> },
}

// Past this point the reciprocal integral is closed analytically.
const TAIL_START: f64 = 1e6;

impl Nonlinearity {
    pub fn zero() -> Self {
        Nonlinearity::Polynomial { coeffs: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Nonlinearity::Linear { c } if !c.is_finite() => {
                Err(Error::Invalid(format!("linear coefficient {c} must be finite")))
            }
            Nonlinearity::Power { p, .. } if !(*p >= 1.0) || !p.is_finite() => {
                Err(Error::Invalid(format!("power exponent {p} must be ≥ 1")))
            }
            Nonlinearity::Polynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::Invalid("polynomial coefficients must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Linear { c } => c * u,
            Nonlinearity::Power { p, extension } => {
                if u >= 0.0 {
                    u.powf(*p)
                } else {
                    match extension {
                        PowerExtension::Odd => -(-u).powf(*p),
                        PowerExtension::Zero => 0.0,
                    }
                }
            }
            Nonlinearity::Quadratic => u * u,
            Nonlinearity::Nsy => u * u - u,
            Nonlinearity::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Linear { c } => *c,
            Nonlinearity::Power { p, extension } => {
                if u >= 0.0 {
                    if *p == 1.0 {
                        1.0
                    } else {
                        p * u.powf(p - 1.0)
                    }
                } else {
                    match extension {
                        PowerExtension::Odd => p * (-u).powf(p - 1.0),
                        PowerExtension::Zero => 0.0,
                    }
                }
            }
            Nonlinearity::Quadratic => 2.0 * u,
            Nonlinearity::Nsy => 2.0 * u - 1.0,
            Nonlinearity::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * u + i as f64 * c),
        }
    }

    /// `f'(0)`.
    pub fn f0prime(&self) -> f64 {
        self.derivative(0.0)
    }

    /// Largest relative mismatch between `derivative` and a centred difference
    /// over the given points.
    pub fn derivative_self_test(&self, points: &[f64]) -> f64 {
        points
            .iter()
            .map(|&u| {
                let h = 1e-6 * u.abs().max(1e-2);
                let fd = (self.value(u + h) - self.value(u - h)) / (2.0 * h);
                let d = self.derivative(u);
                (fd - d).abs() / d.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// `F(y; y0) = ∫_{y0}^{y} dr / f(r)` for `y ≥ y0`, with `f > 0` on the range.
    pub fn reciprocal_integral(&self, y0: f64, y: f64) -> Result<f64> {
        if !(y >= y0) || !y.is_finite() {
            return Err(domain("reciprocal_integral", format!("need finite y ≥ y0, got {y0}, {y}")));
        }
        self.check_positive_on(y0, y)?;
        let breaks = geometric_breaks(y0, y);
        integrate_adaptive_with_breaks(|r| 1.0 / self.value(r), &breaks, reciprocal_options())
    }

    /// `F(∞; y0)`, or `None` when the integral diverges. Requires `f` positive
    /// and nondecreasing on `[y0, ∞)`.
    pub fn reciprocal_integral_to_infinity(&self, y0: f64) -> Result<Option<f64>> {
        let upper = TAIL_START.max(2.0 * y0.abs());
        self.check_positive_on(y0, upper)?;
        self.check_nondecreasing_on(y0, upper)?;
        let tail = match self.tail_beyond(upper) {
            Some(t) => t,
            None => return Ok(None),
        };
        let body = self.reciprocal_integral(y0, upper)?;
        Ok(Some(body + tail))
    }

    // ∫_Y^∞ dr/f(r) in closed form (leading-order for polynomials).
    fn tail_beyond(&self, y: f64) -> Option<f64> {
        match self {
            Nonlinearity::Linear { .. } => None,
            Nonlinearity::Power { p, .. } => {
                if *p <= 1.0 {
                    None
                } else {
                    Some(y.powf(1.0 - p) / (p - 1.0))
                }
            }
            Nonlinearity::Quadratic => Some(1.0 / y),
            Nonlinearity::Nsy => Some((y / (y - 1.0)).ln()),
            Nonlinearity::Polynomial { coeffs } => {
                let degree = coeffs.iter().rposition(|&c| c != 0.0)?;
                if degree < 2 {
                    return None;
                }
                let d = degree as f64;
                Some(y.powf(1.0 - d) / (coeffs[degree] * (d - 1.0)))
            }
        }
    }

    fn check_positive_on(&self, a: f64, b: f64) -> Result<()> {
        for r in sample_points(a, b) {
            let v = self.value(r);
            if !(v > 0.0) {
                return Err(domain(
                    "reciprocal_integral",
                    format!("f({r}) = {v} is not positive on [{a}, {b}]"),
                ));
            }
        }
        Ok(())
    }

    fn check_nondecreasing_on(&self, a: f64, b: f64) -> Result<()> {
        for r in sample_points(a, b) {
            if self.derivative(r) < 0.0 {
                return Err(domain(
                    "reciprocal_integral",
                    format!("f is decreasing at {r}"),
                ));
            }
        }
        Ok(())
    }
}

fn reciprocal_options() -> AdaptiveOptions {
    AdaptiveOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_intervals: 4000,
    }
}

fn geometric_breaks(a: f64, b: f64) -> Vec<f64> {
    let mut breaks = vec![a];
    if a > 0.0 {
        let mut x = 2.0 * a;
        while x < b {
            breaks.push(x);
            x *= 2.0;
        }
    }
    breaks.push(b);
    breaks
}

fn sample_points(a: f64, b: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=64).map(|i| a + (b - a) * i as f64 / 64.0).collect();
    pts.extend(geometric_breaks(a, b));
    pts
}
