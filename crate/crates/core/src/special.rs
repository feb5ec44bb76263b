//! Special functions and the chi-square, F and Student-t distributions.
//!
//! Quantiles invert the regularized incomplete gamma and beta functions by a
//! bracketed Newton iteration that falls back to bisection whenever a Newton
//! step leaves the current bracket.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("log_gamma requires a finite x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma_pos(a) + ln_gamma_pos(b) - ln_gamma_pos(a + b)
}

const MAX_ITER: usize = 200_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let log_prefix = -x + a * x.ln() - ln_gamma_pos(a);
    if x < a + 1.0 {
        // series
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum.ln() + log_prefix).exp().min(1.0)
    } else {
        // continued fraction for Q, modified Lentz
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (1.0 - (h.ln() + log_prefix).exp()).max(0.0)
    }
}

/// Continued fraction for the incomplete beta function.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`, taking `y = 1 - x` separately so
/// callers can pass it without cancellation.
pub fn beta_inc(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let log_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (log_front + beta_cf(a, b, x).ln() - a.ln()).exp()
    } else {
        1.0 - (log_front + beta_cf(b, a, y).ln() - b.ln()).exp()
    }
}

/// A continuous distribution with a quantile function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistSpec {
    Chi2 { dof: f64 },
    F { d1: f64, d2: f64 },
    StudentT { dof: f64 },
}

impl DistSpec {
    pub fn chi2(dof: f64) -> Self {
        DistSpec::Chi2 { dof }
    }

    pub fn f(d1: f64, d2: f64) -> Self {
        DistSpec::F { d1, d2 }
    }

    pub fn student_t(dof: f64) -> Self {
        DistSpec::StudentT { dof }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DistSpec::Chi2 { dof } | DistSpec::StudentT { dof } => dof > 0.0 && dof.is_finite(),
            DistSpec::F { d1, d2 } => d1 > 0.0 && d2 > 0.0 && d1.is_finite() && d2.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("degrees of freedom must be positive: {self:?}")))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            DistSpec::Chi2 { dof } => gamma_p(0.5 * dof, 0.5 * x),
            DistSpec::F { d1, d2 } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let num = d1 * x;
                beta_inc(0.5 * d1, 0.5 * d2, num / (num + d2), d2 / (num + d2))
            }
            DistSpec::StudentT { dof } => {
                let t2 = x * x;
                let tail = 0.5 * beta_inc(0.5 * dof, 0.5, dof / (dof + t2), t2 / (dof + t2));
                if x >= 0.0 {
                    1.0 - tail
                } else {
                    tail
                }
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            DistSpec::Chi2 { dof } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let k = 0.5 * dof;
                ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma_pos(k)).exp()
            }
            DistSpec::F { d1, d2 } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let ln = 0.5 * (d1 * (d1 * x).ln() + d2 * d2.ln() - (d1 + d2) * (d1 * x + d2).ln())
                    - x.ln()
                    - ln_beta(0.5 * d1, 0.5 * d2);
                ln.exp()
            }
            DistSpec::StudentT { dof } => (ln_gamma_pos(0.5 * (dof + 1.0))
                - ln_gamma_pos(0.5 * dof)
                - 0.5 * (dof * std::f64::consts::PI).ln()
                - 0.5 * (dof + 1.0) * (x * x / dof).ln_1p())
            .exp(),
        }
    }

    /// The `level` quantile, `level` in (0, 1).
    pub fn quantile(&self, level: f64) -> Result<f64> {
        quantile(*self, level)
    }
}

/// Inverse CDF by bracketed Newton iteration.
pub fn quantile(dist: DistSpec, level: f64) -> Result<f64> {
    dist.validate()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("quantile level must lie in (0, 1), got {level}")));
    }
    if let DistSpec::StudentT { .. } = dist {
        if level == 0.5 {
            return Ok(0.0);
        }
        if level < 0.5 {
            return Ok(-solve_positive(dist, 1.0 - level));
        }
    }
    Ok(solve_positive(dist, level))
}

/// Root of `cdf(x) = level` on the positive half-line.
fn solve_positive(dist: DistSpec, level: f64) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while dist.cdf(hi) < level {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..1000 {
        let f = dist.cdf(x) - level;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let dens = dist.pdf(x);
        let step = f / dens;
        let newton = x - step;
        if dens > 0.0 && newton > lo && newton < hi {
            x = newton;
            if step.abs() <= 1e-15 * x {
                break;
            }
        } else {
            x = 0.5 * (lo + hi);
        }
    }
    x
}
