//! The Poincaré disk chart of H²(−a²).
//!
//! Geodesic distance from the origin and Euclidean disk radius are related by
//! `r = tanh(aR/2)`. Radii close to the ideal boundary lose all information in
//! `r` itself, so [`DiskRadius`] carries the complement `1 − r` alongside it.
//!
//! 1-form components are stored as disk-chart components; the metric enters
//! only through the two weights returned by [`conformal_weights`].

use crate::error::{invalid, Result};

/// Curvature and obstacle radius of the exterior domain. Viscosity is fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub a: f64,
    pub r0: f64,
}

impl DomainSpec {
    pub fn new(a: f64, r0: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid(format!(
                "curvature parameter a must be positive, got {a}"
            )));
        }
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(invalid(format!(
                "obstacle radius R0 must be positive, got {r0}"
            )));
        }
        Ok(Self { a, r0 })
    }

    pub const fn viscosity(&self) -> f64 {
        1.0
    }

    pub fn chart(&self) -> DiskChart {
        DiskChart { a: self.a }
    }
}

/// A disk radius together with its complement `1 − r`, both accurate to a few ulps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskRadius {
    r: f64,
    complement: f64,
}

impl DiskRadius {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && (0.0..1.0).contains(&r)) {
            return Err(invalid(format!("disk radius must lie in [0,1), got {r}")));
        }
        Ok(Self {
            r,
            complement: 1.0 - r,
        })
    }

    /// Build from the complement `1 − r`, which is the accurate quantity near the ideal boundary.
    pub fn from_complement(complement: f64) -> Result<Self> {
        if !(complement.is_finite() && complement > 0.0 && complement <= 1.0) {
            return Err(invalid(format!(
                "disk radius complement must lie in (0,1], got {complement}"
            )));
        }
        Ok(Self {
            r: 1.0 - complement,
            complement,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn complement(&self) -> f64 {
        self.complement
    }

    /// `1 − r²` evaluated without cancellation.
    pub fn one_minus_sq(&self) -> f64 {
        self.complement * (1.0 + self.r)
    }
}

/// The conformal chart: metric `σ(y)² δ` with `σ(y) = 2/(a(1−|y|²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskChart {
    pub a: f64,
}

impl DiskChart {
    pub fn conformal_factor(&self, y: [f64; 2]) -> Result<f64> {
        let s = one_minus_norm_sq(y)?;
        Ok(2.0 / (self.a * s))
    }

    pub fn volume_weight(&self, y: [f64; 2]) -> Result<f64> {
        let s = one_minus_norm_sq(y)?;
        Ok(volume_weight_from(self.a, s))
    }
}

/// Weights of the chart at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalWeights {
    /// Factor turning a Euclidean dot product of disk components into `g(u, v)`: `a²(1−|y|²)²/4`.
    pub pairing: f64,
    /// Density of the hyperbolic area form against `dy`: `4/(a²(1−|y|²)²)`.
    pub volume: f64,
}

/// Convert a geodesic radius to the disk radius `tanh(aR/2)`.
pub fn geodesic_to_disk(a: f64, big_r: f64) -> Result<DiskRadius> {
    if !(a.is_finite() && a > 0.0) {
        return Err(invalid(format!(
            "curvature parameter a must be positive, got {a}"
        )));
    }
    if !(big_r.is_finite() && big_r >= 0.0) {
        return Err(invalid(format!(
            "geodesic radius must be finite and nonnegative, got {big_r}"
        )));
    }
    let x = a * big_r;
    // 1 − tanh(x/2) = 2/(e^x + 1); tanh(x/2) = −expm1(−x)/(1 + e^{−x}).
    let complement = 2.0 / (x.exp() + 1.0);
    let r = if x < 1.0 {
        let e = (-x).exp_m1();
        -e / (2.0 + e)
    } else {
        1.0 - complement
    };
    Ok(DiskRadius { r, complement })
}

/// Convert a disk radius back to geodesic distance `(1/a) log((1+r)/(1−r))`.
pub fn disk_to_geodesic(a: f64, r: DiskRadius) -> Result<f64> {
    if !(a.is_finite() && a > 0.0) {
        return Err(invalid(format!(
            "curvature parameter a must be positive, got {a}"
        )));
    }
    let big_r = if r.r < 0.5 {
        (r.r.ln_1p() - (-r.r).ln_1p()) / a
    } else {
        ((2.0 - r.complement).ln() - r.complement.ln()) / a
    };
    Ok(big_r)
}

/// Convenience form of [`disk_to_geodesic`] taking a plain radius.
pub fn disk_to_geodesic_f64(a: f64, r: f64) -> Result<f64> {
    disk_to_geodesic(a, DiskRadius::new(r)?)
}

/// Pairing and volume weights at a disk point.
pub fn conformal_weights(chart: &DiskChart, y: [f64; 2]) -> Result<ConformalWeights> {
    let s = one_minus_norm_sq(y)?;
    Ok(weights_from(chart.a, s))
}

pub(crate) fn weights_from(a: f64, one_minus_sq: f64) -> ConformalWeights {
    ConformalWeights {
        pairing: pairing_weight_from(a, one_minus_sq),
        volume: volume_weight_from(a, one_minus_sq),
    }
}

pub(crate) fn pairing_weight_from(a: f64, one_minus_sq: f64) -> f64 {
    let q = a * one_minus_sq / 2.0;
    q * q
}

pub(crate) fn volume_weight_from(a: f64, one_minus_sq: f64) -> f64 {
    let q = 2.0 / (a * one_minus_sq);
    q * q
}

/// Radial derivative of the log conformal factor, `2r/(1−r²)`; drives the Christoffel terms.
pub(crate) fn log_factor_slope(r: f64, one_minus_sq: f64) -> f64 {
    2.0 * r / one_minus_sq
}

fn one_minus_norm_sq(y: [f64; 2]) -> Result<f64> {
    let n2 = y[0] * y[0] + y[1] * y[1];
    if !(n2.is_finite() && n2 < 1.0) {
        return Err(invalid(format!(
            "point ({}, {}) is not inside the unit disk",
            y[0], y[1]
        )));
    }
    Ok(1.0 - n2)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TANH_ONE: f64 = 0.761_594_155_955_764_9;

    #[test]
    fn origin_maps_to_origin() {
        assert_eq!(geodesic_to_disk(1.0, 0.0).unwrap().r(), 0.0);
        assert_eq!(disk_to_geodesic_f64(1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn tanh_one_from_two_curvatures() {
        let r1 = geodesic_to_disk(1.0, 2.0).unwrap().r();
        let r2 = geodesic_to_disk(2.0, 1.0).unwrap().r();
        assert!((r1 - TANH_ONE).abs() < 1e-15);
        assert!((r2 - TANH_ONE).abs() < 1e-15);
    }

    #[test]
    fn inverse_of_tanh_one() {
        let big_r = disk_to_geodesic_f64(1.0, TANH_ONE).unwrap();
        assert!((big_r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn half_radius_at_half_curvature() {
        let big_r = disk_to_geodesic_f64(0.5, 0.5).unwrap();
        assert!((big_r - 2.197_224_577_336_219_4).abs() < 1e-14);
    }

    #[test]
    fn weights_at_origin_and_midradius() {
        let w = conformal_weights(&DiskChart { a: 1.0 }, [0.0, 0.0]).unwrap();
        assert_eq!((w.pairing, w.volume), (0.25, 4.0));
        let w = conformal_weights(&DiskChart { a: 2.0 }, [0.0, 0.0]).unwrap();
        assert_eq!((w.pairing, w.volume), (1.0, 1.0));
        let w = conformal_weights(&DiskChart { a: 1.0 }, [0.3, 0.4]).unwrap();
        assert!((w.pairing - 0.140_625).abs() < 1e-16);
        assert!((w.volume - 1.0 / 0.140_625).abs() < 1e-12);
        assert!((w.pairing * w.volume - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chart_factor_matches_volume_weight() {
        let chart = DomainSpec::new(1.5, 1.0).unwrap().chart();
        assert!((chart.conformal_factor([0.0, 0.0]).unwrap() - 2.0 / 1.5).abs() < 1e-15);
        let y = [0.2, -0.7];
        let f = chart.conformal_factor(y).unwrap();
        assert!((f * f - chart.volume_weight(y).unwrap()).abs() < 1e-12 * f * f);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(geodesic_to_disk(1.0, -1.0).is_err());
        assert!(geodesic_to_disk(0.0, 1.0).is_err());
        assert!(geodesic_to_disk(1.0, f64::NAN).is_err());
        assert!(disk_to_geodesic_f64(1.0, 1.0).is_err());
        assert!(conformal_weights(&DiskChart { a: 1.0 }, [0.8, 0.6]).is_err());
        assert!(DomainSpec::new(1.0, 0.0).is_err());
    }

    #[test]
    fn far_radius_approaches_boundary() {
        let r = geodesic_to_disk(1.0, 50.0).unwrap();
        assert!(r.r() > 1.0 - 1e-12);
        assert!(r.complement() > 0.0);
    }

    proptest::proptest! {
        #[test]
        fn round_trip_within_tolerance(a in 0.1f64..4.0, big_r in 0.0f64..20.0) {
            let back = disk_to_geodesic(a, geodesic_to_disk(a, big_r).unwrap()).unwrap();
            proptest::prop_assert!((back - big_r).abs() <= 1e-12 * big_r.max(1.0));
        }

        #[test]
        fn chart_is_monotone(a in 0.1f64..4.0, r1 in 0.0f64..20.0, dr in 1e-6f64..5.0) {
            let lo = geodesic_to_disk(a, r1).unwrap();
            let hi = geodesic_to_disk(a, r1 + dr).unwrap();
            proptest::prop_assert!(lo.r() <= hi.r());
            proptest::prop_assert!(lo.complement() >= hi.complement());
        }

        #[test]
        fn pairing_and_volume_weights_are_reciprocal(a in 0.1f64..4.0, r in 0.0f64..0.99, t in 0.0f64..6.3) {
            let w = conformal_weights(&DiskChart { a }, [r * t.cos(), r * t.sin()]).unwrap();
            proptest::prop_assert!((w.pairing * w.volume - 1.0).abs() < 1e-12);
        }
    }
}
