//! Closed-form profile family with exact derivatives and quadrature
//! normalization.
//!
//! The family is polynomial-times-exponential: with `g(s) = (1-s)^P
//! exp(-eta s)` on `[0, 1]`,
//!
//! * `Phi(y) = C_Phi g(|y|^2)` is the 2-D potential bump (radius 1),
//! * `phi = -Laplacian(Phi) = -4 C_Phi (g' + s g'')` with `s = |y|^2`,
//! * `psi(u) = C_psi u g(u^2)` is the odd 1-D pulse (radius 1).
//!
//! `P` controls edge smoothness (the profiles are `C^{P-1}`), `eta` an
//! interior exponential taper; both shape the Fourier tail that the
//! band-limited jet realization truncates. Derivatives are symbolic
//! compositions of `g`, `g'`, `g''`, `g'''`; nothing is differentiated
//! numerically. The constants `C_psi`, `C_Phi` are solved so that the
//! squared means are one:
//! `(1/2pi) int psi^2 = 1` and `(1/4pi^2) int phi^2 = 1`.

use crate::{Error, Result};

/// Shape parameters of the profile family.
#[derive(Clone, Copy, Debug)]
pub struct ProfileConfig {
    /// Edge exponent `P` (must be at least 4 so third derivatives exist
    /// and vanish at the support boundary).
    pub p_edge: u32,
    /// Interior exponential taper `eta >= 0`.
    pub eta: f64,
    /// Name of the family; only "poly-exp" is known.
    pub family: &'static str,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            p_edge: 9,
            eta: 2.0,
            family: "poly-exp",
        }
    }
}

/// Normalized profile set with closed-form evaluators.
#[derive(Clone, Debug)]
pub struct ProfileSet {
    pub config: ProfileConfig,
    /// Normalization of the 1-D pulse.
    pub c_psi: f64,
    /// Normalization of the 2-D potential.
    pub c_phi: f64,
}

/// Composite Simpson quadrature on `[a, b]` with `2m` panels.
fn simpson(a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

impl ProfileSet {
    /// Solve the normalization constants for a shape configuration.
    pub fn build(config: ProfileConfig) -> Result<Self> {
        if config.family != "poly-exp" {
            return Err(Error::ConfigError(format!(
                "unknown profile family '{}'",
                config.family
            )));
        }
        if config.p_edge < 4 {
            return Err(Error::ConfigError(
                "profile edge exponent must be at least 4".into(),
            ));
        }
        if !(config.eta >= 0.0 && config.eta.is_finite()) {
            return Err(Error::ConfigError("profile taper must be finite and >= 0".into()));
        }
        let mut set = ProfileSet {
            config,
            c_psi: 1.0,
            c_phi: 1.0,
        };
        // (1/2pi) int_{-1}^{1} psi^2 du = 1, psi even-squared: integrate on [0,1].
        let i_psi = 2.0 * simpson(0.0, 1.0, 50_000, |u| {
            let v = set.psi(u);
            v * v
        });
        set.c_psi = (2.0 * std::f64::consts::PI / i_psi).sqrt();
        // (1/4pi^2) int_{R^2} phi^2 dy = 1; radially, dy = pi ds on s = |y|^2.
        let i_phi = std::f64::consts::PI
            * simpson(0.0, 1.0, 50_000, |s| {
                let v = set.phi_radial(s);
                v * v
            });
        set.c_phi = (4.0 * std::f64::consts::PI * std::f64::consts::PI / i_phi).sqrt();
        Ok(set)
    }

    fn g(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - s;
        u.powi(self.config.p_edge as i32) * (-self.config.eta * s).exp()
    }

    fn g1(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        let p = self.config.p_edge as f64;
        let eta = self.config.eta;
        let u = 1.0 - s;
        -u.powi(self.config.p_edge as i32 - 1) * (-eta * s).exp() * (p + eta * u)
    }

    fn g2(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        let p = self.config.p_edge as f64;
        let eta = self.config.eta;
        let u = 1.0 - s;
        let a = eta * eta * u * u + 2.0 * p * eta * u + p * (p - 1.0);
        u.powi(self.config.p_edge as i32 - 2) * (-eta * s).exp() * a
    }

    fn g3(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        let p = self.config.p_edge as f64;
        let eta = self.config.eta;
        let u = 1.0 - s;
        let a = eta * eta * u * u + 2.0 * p * eta * u + p * (p - 1.0);
        -u.powi(self.config.p_edge as i32 - 3)
            * (-eta * s).exp()
            * ((p - 2.0 + eta * u) * a + 2.0 * eta * u * (eta * u + p))
    }

    /// 1-D pulse `psi(u)`, odd, supported on `[-1, 1]`.
    pub fn psi(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        self.c_psi * u * self.g(u * u)
    }

    /// First derivative of `psi`.
    pub fn psi_d1(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let s = u * u;
        self.c_psi * (self.g(s) + 2.0 * s * self.g1(s))
    }

    /// Second derivative of `psi`.
    pub fn psi_d2(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let s = u * u;
        self.c_psi * (6.0 * u * self.g1(s) + 4.0 * u * s * self.g2(s))
    }

    /// Third derivative of `psi`.
    pub fn psi_d3(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let s = u * u;
        self.c_psi
            * (6.0 * self.g1(s) + 24.0 * s * self.g2(s) + 8.0 * s * s * self.g3(s))
    }

    /// 2-D potential `Phi(y)`, radial, supported on `|y| <= 1`.
    pub fn cap_phi(&self, y1: f64, y2: f64) -> f64 {
        let s = y1 * y1 + y2 * y2;
        if s >= 1.0 {
            return 0.0;
        }
        self.c_phi * self.g(s)
    }

    /// Gradient of `Phi`.
    pub fn cap_phi_grad(&self, y1: f64, y2: f64) -> [f64; 2] {
        let s = y1 * y1 + y2 * y2;
        if s >= 1.0 {
            return [0.0, 0.0];
        }
        let d = 2.0 * self.c_phi * self.g1(s);
        [d * y1, d * y2]
    }

    /// Radial form of `phi = -Laplacian(Phi)` as a function of `s = |y|^2`.
    pub fn phi_radial(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        -4.0 * self.c_phi * (self.g1(s) + s * self.g2(s))
    }

    /// Bump `phi(y) = -Laplacian(Phi)(y)`.
    pub fn phi(&self, y1: f64, y2: f64) -> f64 {
        self.phi_radial(y1 * y1 + y2 * y2)
    }

    /// Gradient of `phi`.
    pub fn phi_grad(&self, y1: f64, y2: f64) -> [f64; 2] {
        let s = y1 * y1 + y2 * y2;
        if s >= 1.0 {
            return [0.0, 0.0];
        }
        // d/ds of the radial form, then the chain rule.
        let dr = -4.0 * self.c_phi * (2.0 * self.g2(s) + s * self.g3(s));
        [2.0 * y1 * dr, 2.0 * y2 * dr]
    }

    /// Quadrature value of `(1/2pi) int psi^2`.
    pub fn psi_square_mean(&self) -> f64 {
        simpson(0.0, 1.0, 50_000, |u| {
            let v = self.psi(u);
            v * v
        }) / std::f64::consts::PI
    }

    /// Quadrature value of `(1/4pi^2) int phi^2`.
    pub fn phi_square_mean(&self) -> f64 {
        std::f64::consts::PI
            * simpson(0.0, 1.0, 50_000, |s| {
                let v = self.phi_radial(s);
                v * v
            })
            / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
    }

    /// Quadrature value of `int_{R} psi` (vanishes: `psi` is odd).
    pub fn psi_mean(&self) -> f64 {
        simpson(-1.0, 1.0, 50_000, |u| self.psi(u))
    }

    /// Quadrature value of `int_{R^2} phi` (vanishes: `phi` is a Laplacian
    /// of a compactly supported function).
    pub fn phi_mean(&self) -> f64 {
        std::f64::consts::PI * simpson(0.0, 1.0, 50_000, |s| self.phi_radial(s))
    }
}
