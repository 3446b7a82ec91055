//! Normalized `(τ, ν, β)` to range, radial velocity and direction of arrival.
//!
//! * `τ = 2 R Δf / c` (round-trip delay in units of the OFDM symbol length `1/Δf`)
//! * `ν = 2 v f_c T / c` (Doppler shift in units of `1/T`, centered to `[-½, ½)`)
//! * `β = d sin θ / λ` (centered to `[-½, ½)`; `β = sin θ / 2` for `d = λ/2`)

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::wrap01;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalScene {
    /// Carrier frequency `f_c` (Hz).
    pub fc: f64,
    /// Occupied bandwidth `B` (Hz).
    pub bandwidth: f64,
    /// Pulse repetition interval `T` (s).
    pub pri: f64,
    /// Subcarrier spacing `Δf` (Hz).
    pub subcarrier_spacing: f64,
    /// Element spacing `d` (m).
    pub element_spacing: f64,
}

impl PhysicalScene {
    /// Half-wavelength array at carrier `fc`.
    pub fn half_wavelength(fc: f64, bandwidth: f64, pri: f64, subcarrier_spacing: f64) -> Self {
        Self { fc, bandwidth, pri, subcarrier_spacing, element_spacing: SPEED_OF_LIGHT / fc / 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.fc, self.bandwidth, self.pri, self.subcarrier_spacing, self.element_spacing];
        if all.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Param(format!("physical quantities must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc
    }

    /// `c / (2B)`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub angle_deg: f64,
}

fn center(x: f64) -> f64 {
    let w = wrap01(x);
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

pub fn to_physical(r: [f64; 3], scene: &PhysicalScene) -> Result<PhysicalParams> {
    scene.validate()?;
    let [tau, nu, beta] = r;
    let range_m = SPEED_OF_LIGHT * wrap01(tau) / (2.0 * scene.subcarrier_spacing);
    let velocity_mps = center(nu) * SPEED_OF_LIGHT / (2.0 * scene.fc * scene.pri);
    let s = center(beta) * scene.wavelength() / scene.element_spacing;
    if s.abs() > 1.0 {
        return Err(Error::Param(format!("beta {beta} maps to sin(theta) = {s}, outside the arcsine domain")));
    }
    Ok(PhysicalParams { range_m, velocity_mps, angle_deg: s.asin().to_degrees() })
}

pub fn to_normalized(p: &PhysicalParams, scene: &PhysicalScene) -> Result<[f64; 3]> {
    scene.validate()?;
    let tau = 2.0 * p.range_m * scene.subcarrier_spacing / SPEED_OF_LIGHT;
    let nu = 2.0 * p.velocity_mps * scene.fc * scene.pri / SPEED_OF_LIGHT;
    let beta = scene.element_spacing * p.angle_deg.to_radians().sin() / scene.wavelength();
    Ok([wrap01(tau), wrap01(nu), wrap01(beta)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> PhysicalScene {
        PhysicalScene::half_wavelength(24e9, 100e6, 1e-4, 1e6)
    }

    #[test]
    fn zero_delay_is_zero_range() {
        assert_eq!(to_physical([0.0, 0.1, 0.1], &scene()).unwrap().range_m, 0.0);
    }

    #[test]
    fn quarter_beta_is_thirty_degrees() {
        let p = to_physical([0.1, 0.1, 0.25], &scene()).unwrap();
        assert!((p.angle_deg - 30.0).abs() < 1e-12);
        let p = to_physical([0.1, 0.1, 0.75], &scene()).unwrap();
        assert!((p.angle_deg + 30.0).abs() < 1e-12);
    }

    #[test]
    fn wide_spacing_leaves_arcsine_domain() {
        let s = PhysicalScene { element_spacing: scene().wavelength() / 4.0, ..scene() };
        assert!(to_physical([0.0, 0.0, 0.4], &s).is_err());
    }

    #[test]
    fn nonpositive_quantities_rejected() {
        assert!(to_physical([0.0; 3], &PhysicalScene { pri: 0.0, ..scene() }).is_err());
    }
}
