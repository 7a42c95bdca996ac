//! Concave, non-decreasing functions `g` on the positive reals and the
//! composed per-sample loss `F(v) = g(sqrt(v))` used on squared residual norms.
//!
//! The MM driver only ever needs two things from a penalty: a value (to report
//! the robust objective) and a supergradient (to build the weighted surrogate).
//! Supergradients of `F` are obtained by the chain rule
//! `F'(v) = g'(sqrt(v)) / (2 sqrt(v))`, which is valid for any element of the
//! superdifferential of `g` because `sqrt` is a concave bijection of the
//! positive reals and `g` is non-decreasing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower clamp on residual norms before computing weights.
pub const DEFAULT_R_FLOOR: f64 = 1e-8;
/// Default upper clamp on sample weights.
pub const DEFAULT_W_MAX: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ConcavePenalty {
    /// `g(u) = u`; the composed loss is the plain residual norm.
    Identity,
    /// `g(u) = u^q`, `0 < q <= 1`.
    Lq { q: f64 },
    /// `g(u) = log(eps + u)`.
    Log { eps: f64 },
    /// `g(u) = min(u, eps)`.
    CappedL1 { eps: f64 },
    /// Smoothly clipped absolute deviation with threshold `lambda` and shape `a > 2`.
    Scad { lambda: f64, a: f64 },
    /// Minimax concave penalty with threshold `lambda` and shape `gamma > 1`.
    Mcp { lambda: f64, gamma: f64 },
}

impl ConcavePenalty {
    pub fn identity() -> Self {
        ConcavePenalty::Identity
    }

    pub fn lq(q: f64) -> Result<Self> {
        Self::Lq { q }.validated()
    }

    pub fn log(eps: f64) -> Result<Self> {
        Self::Log { eps }.validated()
    }

    pub fn capped_l1(eps: f64) -> Result<Self> {
        Self::CappedL1 { eps }.validated()
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Self::Scad { lambda, a }.validated()
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Result<Self> {
        Self::Mcp { lambda, gamma }.validated()
    }

    /// Checks the parameter ranges. Every public constructor goes through here.
    pub fn validated(self) -> Result<Self> {
        use ConcavePenalty::*;
        let ok = match self {
            Identity => true,
            Lq { q } => q.is_finite() && q > 0.0 && q <= 1.0,
            Log { eps } | CappedL1 { eps } => eps.is_finite() && eps > 0.0,
            Scad { lambda, a } => lambda.is_finite() && lambda > 0.0 && a.is_finite() && a > 2.0,
            Mcp { lambda, gamma } => lambda.is_finite() && lambda > 0.0 && gamma.is_finite() && gamma > 1.0,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::Domain(format!("penalty parameters out of range: {self}")))
        }
    }

    /// `g(u)`.
    pub fn value(&self, u: f64) -> Result<f64> {
        check_arg(u, "u")?;
        use ConcavePenalty::*;
        Ok(match *self {
            Identity => u,
            Lq { q } => u.powf(q),
            Log { eps } => (eps + u).ln(),
            CappedL1 { eps } => u.min(eps),
            Scad { lambda, a } => {
                if u <= lambda {
                    lambda * u
                } else if u <= a * lambda {
                    (2.0 * a * lambda * u - u * u - lambda * lambda) / (2.0 * (a - 1.0))
                } else {
                    lambda * lambda * (a + 1.0) / 2.0
                }
            }
            Mcp { lambda, gamma } => {
                if u <= gamma * lambda {
                    lambda * u - u * u / (2.0 * gamma)
                } else {
                    gamma * lambda * lambda / 2.0
                }
            }
        })
    }

    /// A nonnegative supergradient of `g` at `u`.
    ///
    /// At kinks the right-sided slope is returned, so `CappedL1` at `u = eps`
    /// gives 0.
    pub fn supergradient(&self, u: f64) -> Result<f64> {
        check_arg(u, "u")?;
        use ConcavePenalty::*;
        Ok(match *self {
            Identity => 1.0,
            Lq { q } => {
                if q == 1.0 {
                    1.0
                } else if u == 0.0 {
                    return Err(Error::Domain(format!("supergradient of u^{q} is unbounded at u = 0")));
                } else {
                    q * u.powf(q - 1.0)
                }
            }
            Log { eps } => 1.0 / (eps + u),
            CappedL1 { eps } => {
                if u < eps {
                    1.0
                } else {
                    0.0
                }
            }
            Scad { lambda, a } => {
                if u < lambda {
                    lambda
                } else if u < a * lambda {
                    (a * lambda - u) / (a - 1.0)
                } else {
                    0.0
                }
            }
            Mcp { lambda, gamma } => {
                if u < gamma * lambda {
                    lambda - u / gamma
                } else {
                    0.0
                }
            }
        })
    }

    /// Per-sample loss on a squared residual norm: `F(v) = g(sqrt(v))`.
    pub fn loss(&self, v: f64) -> Result<f64> {
        check_arg(v, "v")?;
        self.value(v.sqrt())
    }

    /// Supergradient of `F` at `v > 0` by the chain rule, with no guards.
    pub fn loss_supergradient(&self, v: f64) -> Result<f64> {
        check_arg(v, "v")?;
        if v == 0.0 {
            return Err(Error::Domain("loss supergradient is unbounded at v = 0".into()));
        }
        let r = v.sqrt();
        Ok(self.supergradient(r)? / (2.0 * r))
    }

    /// Sample weight for a residual norm `r` (not squared).
    ///
    /// `r` is clamped below at `r_floor`; the result is clamped above at
    /// `w_max`. With both guards inactive this equals `loss_supergradient(r^2)`.
    pub fn weight(&self, r: f64, r_floor: f64, w_max: f64) -> Result<f64> {
        check_arg(r, "r")?;
        if !(r_floor > 0.0) || !r_floor.is_finite() {
            return Err(Error::Domain(format!("r_floor must be positive, got {r_floor}")));
        }
        let r = r.max(r_floor);
        let w = self.supergradient(r)? / (2.0 * r);
        Ok(w.min(w_max))
    }
}

fn check_arg(x: f64, name: &str) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("{name} must be finite, got {x}")));
    }
    if x < 0.0 {
        return Err(Error::Domain(format!("{name} must be nonnegative, got {x}")));
    }
    Ok(())
}

impl fmt::Display for ConcavePenalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ConcavePenalty::*;
        match self {
            Identity => write!(f, "identity"),
            Lq { q } => write!(f, "lq:q={q}"),
            Log { eps } => write!(f, "log:eps={eps}"),
            CappedL1 { eps } => write!(f, "capped:eps={eps}"),
            Scad { lambda, a } => write!(f, "scad:lambda={lambda},a={a}"),
            Mcp { lambda, gamma } => write!(f, "mcp:lambda={lambda},gamma={gamma}"),
        }
    }
}

impl FromStr for ConcavePenalty {
    type Err = Error;

    /// Parses descriptors such as `log:eps=1.0`, `scad:lambda=1,a=3.7` or `identity`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::PenaltyParse(s.to_string());
        let s = s.trim();
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), r.trim()),
            None => (s, ""),
        };
        let mut params: Vec<(&str, f64)> = Vec::new();
        if !rest.is_empty() {
            for kv in rest.split(',') {
                let (k, v) = kv.split_once('=').ok_or_else(bad)?;
                let v: f64 = v.trim().parse().map_err(|_| bad())?;
                params.push((k.trim(), v));
            }
        }
        let get =
            |key: &str| -> Result<f64> { params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(bad) };
        let expect_keys = |keys: &[&str]| -> Result<()> {
            if params.len() == keys.len() && params.iter().all(|(k, _)| keys.contains(k)) {
                Ok(())
            } else {
                Err(bad())
            }
        };
        let p = match name.to_ascii_lowercase().as_str() {
            "identity" => {
                expect_keys(&[])?;
                ConcavePenalty::Identity
            }
            "lq" => {
                expect_keys(&["q"])?;
                ConcavePenalty::Lq { q: get("q")? }
            }
            "log" => {
                expect_keys(&["eps"])?;
                ConcavePenalty::Log { eps: get("eps")? }
            }
            "capped" | "capped-l1" | "capped_l1" => {
                expect_keys(&["eps"])?;
                ConcavePenalty::CappedL1 { eps: get("eps")? }
            }
            "scad" => {
                expect_keys(&["lambda", "a"])?;
                ConcavePenalty::Scad {
                    lambda: get("lambda")?,
                    a: get("a")?,
                }
            }
            "mcp" => {
                expect_keys(&["lambda", "gamma"])?;
                ConcavePenalty::Mcp {
                    lambda: get("lambda")?,
                    gamma: get("gamma")?,
                }
            }
            _ => return Err(bad()),
        };
        p.validated()
    }
}

impl TryFrom<String> for ConcavePenalty {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ConcavePenalty> for String {
    fn from(p: ConcavePenalty) -> String {
        p.to_string()
    }
}
