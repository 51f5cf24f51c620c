//! Kernel functions, kernel moments and rule-of-thumb bandwidths.
//!
//! The second-order Epanechnikov kernel `K(u) = 0.75 (1 - u^2)` on `[-1, 1]` is
//! used throughout. Jackknife bias correction is equivalent to smoothing with
//! the fourth-order kernel `K*(u) = 2 sqrt(2) K(sqrt(2) u) - K(u)`, which is
//! provided as a second family so both routes can be cross-checked.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule-of-thumb constant for the Epanechnikov kernel.
pub const ROT_CONSTANT: f64 = 2.34;

/// Standard deviation of the uniform distribution on `[0, 1]`; the scaled time
/// points `t / T` behave like a uniform design.
pub const UNIFORM_DESIGN_SCALE: f64 = 0.288_675_134_594_812_9; // 1 / sqrt(12)

const MOMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    FourthOrderEpanechnikov,
}

impl Kernel {
    /// Closed support of the kernel.
    pub fn support(self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => epanechnikov(u),
            Kernel::FourthOrderEpanechnikov => {
                let s = std::f64::consts::SQRT_2;
                2.0 * s * epanechnikov(s * u) - epanechnikov(u)
            }
        }
    }

    /// Scaled kernel `K_h(u) = K(u / h) / h`.
    #[inline]
    pub fn eval_scaled(self, u: f64, h: f64) -> f64 {
        self.eval(u / h) / h
    }

    /// Points inside the support where the kernel is not differentiable.
    fn breakpoints(self) -> Vec<f64> {
        match self {
            Kernel::Epanechnikov => vec![-1.0, 1.0],
            Kernel::FourthOrderEpanechnikov => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                vec![-1.0, -r, r, 1.0]
            }
        }
    }

    /// `mu_j = int u^j K(u) du` (or `nu_j = int u^j K(u)^2 du` when `squared`),
    /// computed by adaptive Simpson quadrature.
    pub fn moment(self, j: u32, squared: bool) -> Result<f64> {
        if j > 4 {
            return Err(Error::invalid(format!("kernel moment order {j} > 4")));
        }
        let f = |u: f64| {
            let k = self.eval(u);
            let k = if squared { k * k } else { k };
            u.powi(j as i32) * k
        };
        let bp = self.breakpoints();
        let pieces = (bp.len() - 1) as f64;
        let mut total = 0.0;
        for w in bp.windows(2) {
            total += adaptive_simpson(&f, w[0], w[1], MOMENT_TOL / pieces);
        }
        Ok(total)
    }

    /// `nu_0 = int K(u)^2 du`.
    pub fn nu0(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.6,
            Kernel::FourthOrderEpanechnikov => self
                .moment(0, true)
                .expect("order 0 is always in range"),
        }
    }
}

#[inline]
fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthKind {
    /// Node-wise preliminary fits: order `T^(-1/5)`.
    Preliminary,
    /// Pooled and post-grouping fits: order `(NT)^(-1/5)`.
    Pooled,
    /// Specification test: order `T^(-2/5)`.
    Test,
}

/// Rule-of-thumb bandwidth `2.34 * sigma * n^(-rate)` for the given stage.
///
/// For preliminary and pooled bandwidths callers pass
/// [`UNIFORM_DESIGN_SCALE`]; for the test bandwidth, the group residual scale.
pub fn rule_of_thumb(t_len: usize, n: usize, kind: BandwidthKind, sigma: f64) -> Result<f64> {
    if t_len < 2 {
        return Err(Error::invalid(format!("rule of thumb needs T >= 2, got {t_len}")));
    }
    if n < 1 {
        return Err(Error::invalid("rule of thumb needs N >= 1"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("rule of thumb needs sigma > 0, got {sigma}")));
    }
    let t = t_len as f64;
    let scale = match kind {
        BandwidthKind::Preliminary => t.powf(-0.2),
        BandwidthKind::Pooled => (n as f64 * t).powf(-0.2),
        BandwidthKind::Test => t.powf(-0.4),
    };
    Ok(ROT_CONSTANT * sigma * scale)
}

/// The four bandwidths used by the estimation pipeline, in scaled-time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    /// Preliminary node-wise bandwidth.
    pub h: f64,
    /// Pooled bandwidth for the information criterion.
    pub h1: f64,
    /// Post-grouping bandwidth.
    pub h2: f64,
    /// Test bandwidth; `None` means per-group rule of thumb from the null residuals.
    pub h3: Option<f64>,
}

impl Bandwidths {
    pub fn new(h: f64, h1: f64, h2: f64, h3: Option<f64>) -> Result<Self> {
        let check = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("bandwidth {name}={v} must lie in (0, 1)")))
            }
        };
        check("h", h)?;
        check("h1", h1)?;
        check("h2", h2)?;
        if let Some(h3) = h3 {
            check("h3", h3)?;
        }
        Ok(Bandwidths { h, h1, h2, h3 })
    }

    /// Rule-of-thumb defaults for an `n x t_len` panel.
    pub fn rule_of_thumb(n: usize, t_len: usize) -> Result<Self> {
        let h = rule_of_thumb(t_len, n, BandwidthKind::Preliminary, UNIFORM_DESIGN_SCALE)?;
        let h1 = rule_of_thumb(t_len, n, BandwidthKind::Pooled, UNIFORM_DESIGN_SCALE)?;
        Bandwidths::new(h, h1, h1, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epanechnikov_values() {
        let k = Kernel::Epanechnikov;
        assert_eq!(k.eval(0.0), 0.75);
        assert_eq!(k.eval(1.2), 0.0);
        assert_eq!(k.eval(-1.2), 0.0);
        assert!((k.eval(0.5) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn fourth_order_at_center() {
        let v = Kernel::FourthOrderEpanechnikov.eval(0.0);
        let expected = 0.75 * (2.0 * std::f64::consts::SQRT_2 - 1.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 1.37132).abs() < 1e-5);
    }

    #[test]
    fn fourth_order_vanishes_outside_support() {
        let k = Kernel::FourthOrderEpanechnikov;
        for u in [1.0000001, 1.5, -3.0, 10.0] {
            assert_eq!(k.eval(u), 0.0);
        }
    }

    #[test]
    fn moments_match_closed_forms() {
        let k = Kernel::Epanechnikov;
        assert!(k.moment(1, false).unwrap().abs() < 1e-12);
        assert!((k.moment(2, false).unwrap() - 0.2).abs() < 1e-10);
        assert!((k.moment(0, true).unwrap() - 0.6).abs() < 1e-10);
        assert!((k.moment(2, true).unwrap() - 3.0 / 35.0).abs() < 1e-10);
        assert!((k.moment(0, false).unwrap() - 1.0).abs() < 1e-10);
        assert!(k.moment(5, false).is_err());
    }

    #[test]
    fn fourth_order_moments() {
        let k = Kernel::FourthOrderEpanechnikov;
        assert!((k.moment(0, false).unwrap() - 1.0).abs() < 1e-8);
        assert!(k.moment(2, false).unwrap().abs() < 1e-8);
        assert!(k.moment(3, true).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rule_of_thumb_values() {
        let s = UNIFORM_DESIGN_SCALE;
        let h = rule_of_thumb(200, 1, BandwidthKind::Preliminary, s).unwrap();
        assert!((h - 2.34 * s * 200f64.powf(-0.2)).abs() < 1e-15);
        assert!((h - 0.23414).abs() < 1e-3);
        let h1 = rule_of_thumb(200, 100, BandwidthKind::Pooled, s).unwrap();
        assert!((h1 - 0.09326).abs() < 1e-3);
        let h3 = rule_of_thumb(300, 1, BandwidthKind::Test, 1.0).unwrap();
        assert!((h3 - 2.34 * 300f64.powf(-0.4)).abs() < 1e-15);
        assert!(rule_of_thumb(1, 5, BandwidthKind::Preliminary, s).is_err());
        assert!(rule_of_thumb(10, 0, BandwidthKind::Pooled, s).is_err());
        assert!(rule_of_thumb(10, 1, BandwidthKind::Test, 0.0).is_err());
    }

    #[test]
    fn bandwidths_validate_range() {
        assert!(Bandwidths::new(0.2, 0.1, 0.1, None).is_ok());
        assert!(Bandwidths::new(1.2, 0.1, 0.1, None).is_err());
        assert!(Bandwidths::new(0.2, 0.0, 0.1, None).is_err());
        assert!(Bandwidths::new(0.2, 0.1, 0.1, Some(-1.0)).is_err());
    }
}
