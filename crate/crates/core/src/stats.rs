//! Upper-tail critical values of the Student-t and standard normal
//! distributions.
//!
//! CDFs come from the regularized incomplete gamma (normal) and incomplete
//! beta (t) functions; inverses use bracketed Newton steps that fall back to
//! bisection, iterated to machine precision.

use crate::error::{Error, Result};

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (n, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + n as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let front = (-x + a * x.ln() - ln_gamma(a)).exp();
    if x < a + 1.0 {
        // series for P
        let mut sum = 1.0 / a;
        let mut term = sum;
        let mut n = a;
        for _ in 0..1000 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        1.0 - front * sum
    } else {
        // Lentz continued fraction for Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        front * h
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    let q = 0.5 * gamma_q(0.5, 0.5 * z * z);
    if z >= 0.0 {
        1.0 - q
    } else {
        q
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Student-t CDF with `nu` degrees of freedom.
pub fn t_cdf(t: f64, nu: f64) -> f64 {
    let tail = 0.5 * beta_inc(0.5 * nu, 0.5, nu / (nu + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn t_pdf(t: f64, nu: f64) -> f64 {
    (ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (1.0 + t * t / nu).ln())
    .exp()
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Solve `cdf(x) = target` for x ≥ 0 with `cdf` increasing.
fn invert(target: f64, cdf: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while cdf(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(x) - target;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = f / pdf(x);
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// z_α with P(Z > z_α) = α.
pub fn normal_upper(alpha: f64) -> f64 {
    invert(1.0 - alpha, normal_cdf, normal_pdf)
}

/// t_{α,ν} with P(T_ν > t) = α.
pub fn t_upper(alpha: f64, nu: f64) -> f64 {
    invert(1.0 - alpha, |t| t_cdf(t, nu), |t| t_pdf(t, nu))
}

/// Upper-tail critical values `(t_{α,dof}, z_α)`.
pub fn critical_values(alpha: f64, dof: usize) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 0.5), got {alpha}"
        )));
    }
    if dof == 0 {
        return Err(Error::Config("degrees of freedom must be >= 1".into()));
    }
    Ok((t_upper(alpha, dof as f64), normal_upper(alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let (t, z) = critical_values(0.01, 29).unwrap();
        assert!((t - 2.462).abs() < 1e-3, "{t}");
        assert!((z - 2.3263).abs() < 1e-4, "{z}");
        let (t2, _) = critical_values(0.01, 2).unwrap();
        assert!((t2 - 6.965).abs() < 1e-3, "{t2}");
        let (t1, _) = critical_values(0.05, 1).unwrap();
        assert!((t1 - 6.3138).abs() < 1e-4, "{t1}");
        let (_, z5) = critical_values(0.025, 10).unwrap();
        assert!((z5 - 1.959964).abs() < 1e-6, "{z5}");
    }

    #[test]
    fn values_shrink_toward_zero_near_half() {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for a in [0.3, 0.4, 0.45, 0.49, 0.499, 0.4999] {
            let (t, z) = critical_values(a, 5).unwrap();
            assert!(t < prev.0 && z < prev.1);
            prev = (t, z);
        }
        assert!(prev.0 < 1e-3 && prev.1 < 1e-3);
    }

    #[test]
    fn domain_errors() {
        assert!(critical_values(0.5, 3).is_err());
        assert!(critical_values(0.0, 3).is_err());
        assert!(critical_values(0.1, 0).is_err());
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 1..20u32 {
            let fact: f64 = (1..n).map(f64::from).product();
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-10);
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }
}
