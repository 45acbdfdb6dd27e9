//! Per-road fundamental diagram of the ARZ model.
//!
//! Every road carries the power-law pressure
//! `p(rho) = (v_ref / gamma) * (rho / rho_max)^gamma`, and the Lagrangian
//! attribute `w = v + p(rho)` labels the curve a state lives on. Along a fixed
//! curve `{w = c}` the flux `(c - p(rho)) * rho` is strictly concave, peaking at
//! the sonic point `sigma(c)`; demand and supply are the usual monotone
//! envelopes around that peak.
//!
//! Units are veh/km, km/h and veh/h throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Densities below this are treated as vacuum when converting from conservative variables.
pub const VACUUM_DENSITY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadParams {
    pub rho_max: f64,
    pub v_ref: f64,
    pub gamma: f64,
}

impl RoadParams {
    pub fn new(rho_max: f64, v_ref: f64, gamma: f64) -> Result<Self> {
        let params = Self {
            rho_max,
            v_ref,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    /// All three parameters finite and strictly positive. With `gamma > 0` the
    /// pressure satisfies `p' > 0` and `rho p'' + 2 p' > 0` on `rho > 0`.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("rho_max", self.rho_max),
            ("v_ref", self.v_ref),
            ("gamma", self.gamma),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(Error::Domain {
                what: "density",
                value: rho,
            });
        }
        Ok(self.p(rho))
    }

    pub fn pressure_inv(&self, value: f64) -> Result<f64> {
        if !(value >= 0.0) {
            return Err(Error::Domain {
                what: "pressure",
                value,
            });
        }
        Ok(self.p_inv(value))
    }

    pub fn sonic_point(&self, c: f64) -> Result<f64> {
        if !(c >= 0.0) {
            return Err(Error::Domain {
                what: "attribute",
                value: c,
            });
        }
        Ok(self.sigma(c))
    }

    /// Flux `(c - p(rho)) * rho` along the curve `{w = c}`.
    #[inline]
    pub fn flux_on_curve(&self, rho: f64, c: f64) -> f64 {
        (c - self.p(rho)) * rho
    }

    /// Maximal flux along `{w = c}`, attained at `sigma(c)`.
    #[inline]
    pub fn capacity(&self, c: f64) -> f64 {
        let sigma = self.sigma(c);
        self.flux_on_curve(sigma, c)
    }

    pub fn demand(&self, rho: f64, c: f64) -> f64 {
        debug_assert!(rho >= 0.0 && c >= 0.0);
        let sigma = self.sigma(c);
        if rho <= sigma {
            self.flux_on_curve(rho, c)
        } else {
            self.flux_on_curve(sigma, c)
        }
    }

    /// Zero once `p(rho)` exceeds `c`.
    pub fn supply(&self, rho: f64, c: f64) -> f64 {
        debug_assert!(rho >= 0.0 && c >= 0.0);
        let sigma = self.sigma(c);
        if rho <= sigma {
            self.flux_on_curve(sigma, c)
        } else {
            self.flux_on_curve(rho, c).max(0.0)
        }
    }

    /// Characteristic speeds `(v - rho p'(rho), v)`.
    pub fn eigenvalues(&self, state: TrafficState) -> (f64, f64) {
        // rho p'(rho) = gamma p(rho) for the power law
        let lambda1 = state.v - self.gamma * self.p(state.rho);
        (lambda1, state.v)
    }

    /// First-family characteristic speed of the state with density `rho` on `{w = c}`.
    #[inline]
    pub fn lambda1_on_curve(&self, rho: f64, c: f64) -> f64 {
        c - (1.0 + self.gamma) * self.p(rho)
    }

    /// Equilibrium speed `V(rho) = v_ref (1 - rho / rho_max)`, used to initialise scenarios.
    pub fn equilibrium_speed(&self, rho: f64) -> f64 {
        self.v_ref * (1.0 - rho / self.rho_max)
    }

    /// Maximum of the equilibrium flux `rho V(rho)`.
    pub fn equilibrium_capacity(&self) -> f64 {
        0.25 * self.v_ref * self.rho_max
    }

    /// Free-flow root of `rho V(rho) = q`.
    pub fn equilibrium_density_for_flux(&self, q: f64) -> Result<f64> {
        let cap = self.equilibrium_capacity();
        if !(q >= 0.0 && q <= cap) {
            return Err(Error::Domain {
                what: "equilibrium flux",
                value: q,
            });
        }
        let disc = (1.0 - q / cap).max(0.0).sqrt();
        Ok(2.0 * q / (self.v_ref * (1.0 + disc)))
    }

    #[inline]
    pub(crate) fn p(&self, rho: f64) -> f64 {
        self.v_ref / self.gamma * (rho / self.rho_max).powf(self.gamma)
    }

    #[inline]
    pub(crate) fn p_inv(&self, value: f64) -> f64 {
        self.rho_max * (value * self.gamma / self.v_ref).powf(1.0 / self.gamma)
    }

    #[inline]
    pub(crate) fn sigma(&self, c: f64) -> f64 {
        self.rho_max * (c * self.gamma / (self.v_ref * (1.0 + self.gamma))).powf(1.0 / self.gamma)
    }
}

/// Primitive state `(rho, v)` on one road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficState {
    pub rho: f64,
    pub v: f64,
}

impl TrafficState {
    pub fn new(rho: f64, v: f64) -> Result<Self> {
        let state = Self { rho, v };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::InvalidState(format!(
                "density must be finite and >= 0, got {}",
                self.rho
            )));
        }
        if !(self.v.is_finite() && self.v >= 0.0) {
            return Err(Error::InvalidState(format!(
                "speed must be finite and >= 0, got {}",
                self.v
            )));
        }
        Ok(())
    }

    /// State on the equilibrium curve `v = V(rho)`.
    pub fn equilibrium(params: &RoadParams, rho: f64) -> Result<Self> {
        if !(rho >= 0.0 && rho <= params.rho_max) {
            return Err(Error::InvalidState(format!(
                "equilibrium density must lie in [0, {}], got {rho}",
                params.rho_max
            )));
        }
        Self::new(rho, params.equilibrium_speed(rho).max(0.0))
    }

    /// Lagrangian attribute `w = v + p(rho)`.
    #[inline]
    pub fn attribute(&self, params: &RoadParams) -> f64 {
        self.v + params.p(self.rho)
    }

    #[inline]
    pub fn flux(&self) -> f64 {
        self.rho * self.v
    }

    pub fn conserved(&self, params: &RoadParams) -> Conserved {
        Conserved {
            rho: self.rho,
            y: self.rho * self.attribute(params),
        }
    }
}

/// Conservative variables `(rho, y)` with `y = rho w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub rho: f64,
    pub y: f64,
}

impl Conserved {
    /// Attribute `w = y / rho`; `v_ref` at vacuum.
    #[inline]
    pub fn attribute(&self, params: &RoadParams) -> f64 {
        if self.rho < VACUUM_DENSITY {
            params.v_ref
        } else {
            self.y / self.rho
        }
    }

    /// Back to primitive variables. Below [`VACUUM_DENSITY`] the speed is
    /// reported as `v_ref`; roundoff that would give `v < 0` is clamped to 0.
    pub fn to_state(&self, params: &RoadParams) -> TrafficState {
        if self.rho < VACUUM_DENSITY {
            return TrafficState {
                rho: self.rho.max(0.0),
                v: params.v_ref,
            };
        }
        let v = self.y / self.rho - params.p(self.rho);
        TrafficState {
            rho: self.rho,
            v: v.max(0.0),
        }
    }
}
