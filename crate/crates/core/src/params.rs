//! Model parameters and the constants derived from them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::{gamma as gamma_fn, ln_gamma};

use crate::error::{BgkError, Result};

/// Relative tolerance used to detect the endpoint exponent for decimal input.
pub const ENDPOINT_RTOL: f64 = 1e-12;

/// Adiabatic exponent as supplied by the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Decimal(f64),
    Rational { num: u64, den: u64 },
}

impl Exponent {
    pub fn value(&self) -> f64 {
        match *self {
            Exponent::Decimal(g) => g,
            Exponent::Rational { num, den } => num as f64 / den as f64,
        }
    }
}

impl From<f64> for Exponent {
    fn from(g: f64) -> Self {
        Exponent::Decimal(g)
    }
}

impl FromStr for Exponent {
    type Err = BgkError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || BgkError::InvalidArgument(format!("cannot parse exponent '{s}'"));
        if let Some((p, q)) = s.split_once('/') {
            let num: u64 = p.trim().parse().map_err(|_| bad())?;
            let den: u64 = q.trim().parse().map_err(|_| bad())?;
            if den == 0 {
                return Err(bad());
            }
            Ok(Exponent::Rational { num, den })
        } else {
            s.parse::<f64>().map(Exponent::Decimal).map_err(|_| bad())
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Exponent::Decimal(g) => write!(f, "{g}"),
            Exponent::Rational { num, den } => write!(f, "{num}/{den}"),
        }
    }
}

/// Validated model parameters together with every derived constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n: usize,
    exponent: Exponent,
    gamma: f64,
    kappa: f64,
    tau: f64,
    epsilon: f64,
    d: f64,
    c1: f64,
    c2: f64,
    ln_c2: f64,
    c0: Option<f64>,
    c3: f64,
    is_endpoint: bool,
}

impl ModelParams {
    /// Validates the inputs and derives `d`, `c0`..`c3`.
    pub fn new(n: usize, gamma: impl Into<Exponent>, kappa: f64, tau: f64, epsilon: f64) -> Result<Self> {
        let exponent = gamma.into();
        if n == 0 {
            return Err(BgkError::UnsupportedDimension(n));
        }
        let upper = (n as f64 + 2.0) / n as f64;
        let raw = exponent.value();
        let (gamma, is_endpoint) = match exponent {
            Exponent::Rational { num, den } => {
                let lhs = num as u128 * n as u128;
                let rhs = den as u128 * (n as u128 + 2);
                if num <= den || lhs > rhs {
                    return Err(BgkError::GammaOutOfRange { gamma: raw, upper, n });
                }
                if lhs == rhs {
                    (upper, true)
                } else {
                    (raw, false)
                }
            }
            Exponent::Decimal(g) => {
                if !g.is_finite() || g <= 1.0 {
                    return Err(BgkError::GammaOutOfRange { gamma: g, upper, n });
                }
                if (g - upper).abs() <= ENDPOINT_RTOL * upper {
                    (upper, true)
                } else if g > upper {
                    return Err(BgkError::GammaOutOfRange { gamma: g, upper, n });
                } else {
                    (g, false)
                }
            }
        };
        for (name, value) in [("kappa", kappa), ("tau", tau)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(BgkError::NonPositiveParameter { name, value });
            }
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(BgkError::NegativeParameter { name: "epsilon", value: epsilon });
        }

        let nf = n as f64;
        let a = 1.0 / (gamma - 1.0);
        let d = if is_endpoint { 0.0 } else { (2.0 * a - nf).max(0.0) };
        let c1 = 2.0 * gamma * kappa / (gamma - 1.0);
        let ln_c2 = if is_endpoint {
            ln_gamma(nf / 2.0 + 1.0) - 0.5 * nf * (PI * kappa * (nf + 2.0)).ln()
        } else {
            -a * c1.ln() + ln_gamma(gamma * a) - 0.5 * nf * PI.ln() - ln_gamma(d / 2.0 + 1.0)
        };
        let c2 = ln_c2.exp();
        let c0 = if d > 0.0 { Some(2.0 * (0.5 * d * PI.ln() - ln_gamma(d / 2.0)).exp()) } else { None };
        let c3 = (-a * (2.0 * PI * gamma * kappa / (gamma - 1.0)).ln() + ln_gamma(gamma * a)).exp();

        Ok(Self { n, exponent, gamma, kappa, tau, epsilon, d, c1, c2, ln_c2, c0, c3, is_endpoint })
    }

    /// Same model with another regularization parameter.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.n, self.exponent, self.kappa, self.tau, epsilon)
    }

    /// Same model with another relaxation time.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.n, self.exponent, self.kappa, tau, self.epsilon)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn exponent(&self) -> Exponent {
        self.exponent
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn ln_c2(&self) -> f64 {
        self.ln_c2
    }
    /// `None` at the endpoint, where the internal-energy variable disappears.
    pub fn c0(&self) -> Option<f64> {
        self.c0
    }
    pub fn c3(&self) -> f64 {
        self.c3
    }
    pub fn is_endpoint(&self) -> bool {
        self.is_endpoint
    }

    /// Squared support radius of `M[rho, u]`.
    pub fn support_radius_sq(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            self.c1 * rho.powf(self.gamma - 1.0)
        }
    }

    pub fn support_radius(&self, rho: f64) -> f64 {
        self.support_radius_sq(rho).sqrt()
    }

    /// Pressure `kappa rho^gamma`.
    pub fn pressure(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            self.kappa * rho.powf(self.gamma)
        }
    }

    /// Key/value pairs echoed into output headers.
    pub fn header_pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("n".to_string(), self.n.to_string()),
            ("gamma".to_string(), self.exponent.to_string()),
            ("kappa".to_string(), fmt_f64(self.kappa)),
            ("tau".to_string(), fmt_f64(self.tau)),
            ("epsilon".to_string(), fmt_f64(self.epsilon)),
            ("d".to_string(), fmt_f64(self.d)),
            ("c1".to_string(), fmt_f64(self.c1)),
            ("c2".to_string(), fmt_f64(self.c2)),
            ("c3".to_string(), fmt_f64(self.c3)),
            ("is_endpoint".to_string(), self.is_endpoint.to_string()),
        ];
        if let Some(c0) = self.c0 {
            out.insert(8, ("c0".to_string(), fmt_f64(c0)));
        }
        if let Ok(l) = lambda_constant(self) {
            out.push(("lambda".to_string(), fmt_f64(l)));
        }
        out
    }
}

/// Shortest round-trip formatting for floats in headers and CSV cells.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

/// The constant multiplying `rho^{1-(gamma-1)/2} |u_a - u_b|` in the
/// Maxwellian L1 stability bound. Undefined at the endpoint.
pub fn lambda_constant(params: &ModelParams) -> Result<f64> {
    if params.is_endpoint {
        return Err(BgkError::EndpointUnsupported);
    }
    Ok(lambda_formula(params.gamma, params.kappa))
}

/// Stability constant for every admissible exponent.
///
/// Away from the endpoint this is [`lambda_constant`]. At the endpoint the
/// Maxwellian is a ball indicator, and the ball lemma gives
/// `2 c2 |B_{n-1}| c1^{(n-1)/2}`, which coincides with the continuous
/// extension of the same formula.
pub fn stability_constant(params: &ModelParams) -> f64 {
    if params.is_endpoint {
        let n = params.n as f64;
        2.0 * params.c2 * unit_ball_volume(params.n - 1) * params.c1.powf(0.5 * (n - 1.0))
    } else {
        lambda_formula(params.gamma, params.kappa)
    }
}

fn lambda_formula(gamma: f64, kappa: f64) -> f64 {
    let a = 1.0 / (gamma - 1.0);
    let ratio = (ln_gamma(a) - ln_gamma(a + 0.5)).exp();
    2.0 / PI.sqrt() * a * ratio * ((gamma - 1.0) / (2.0 * gamma * kappa)).sqrt()
}

/// Lebesgue measure of the unit ball in dimension `k`, with `|B_0| = 1`.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => return 1.0,
        1 => return 2.0,
        2 => return PI,
        _ => {}
    }
    let h = k as f64 / 2.0;
    PI.powf(h) / gamma_fn(h + 1.0)
}
