//! Spherical geodesy on WGS-84 coordinates.
//!
//! Everything here uses the haversine model on a sphere of radius
//! [`EARTH_RADIUS_M`]. At pedestrian scales the ellipsoidal correction is far
//! below GPS error, so the spherical model is used throughout.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius (IUGG R1) in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Distance band thresholds, outermost first.
pub const BANDS_M: [u32; 5] = [500, 400, 300, 200, 100];

/// Outer edge of the proximity region. Nothing is announced beyond it.
pub const FAR_THRESHOLD_M: f64 = 500.0;

// Central angles below this are treated as coincident points for bearings.
const COINCIDENT_RAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid heading: {0}")]
    InvalidHeading(f64),
    #[error("bearing undefined between coincident or antipodal points")]
    UndefinedBearing,
}

/// A position in degrees. Latitude in [-90, 90], longitude in (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;
    fn try_from(raw: RawPoint) -> Result<Self, GeoError> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, GeoError> {
        let valid = lat_deg.is_finite()
            && lon_deg.is_finite()
            && (-90.0..=90.0).contains(&lat_deg)
            && lon_deg > -180.0
            && lon_deg <= 180.0;
        if valid {
            Ok(GeoPoint { lat: lat_deg, lon: lon_deg })
        } else {
            Err(GeoError::InvalidCoordinate { lat: lat_deg, lon: lon_deg })
        }
    }

    /// Builds a point from any finite longitude by wrapping it into (-180, 180].
    pub fn wrapped(lat_deg: f64, lon_deg: f64) -> Result<Self, GeoError> {
        if !lon_deg.is_finite() {
            return Err(GeoError::InvalidCoordinate { lat: lat_deg, lon: lon_deg });
        }
        GeoPoint::new(lat_deg, wrap_lon(lon_deg))
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.7}, {:.7})", self.lat, self.lon)
    }
}

fn wrap_lon(lon: f64) -> f64 {
    let mut l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l == -180.0 {
        l = 180.0;
    }
    l
}

/// Compass heading in degrees, normalized to [0, 360). 0 is true north,
/// clockwise positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Heading(f64);

impl Heading {
    pub fn new(deg: f64) -> Result<Self, GeoError> {
        if !deg.is_finite() {
            return Err(GeoError::InvalidHeading(deg));
        }
        let mut d = deg.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative inputs
        if d >= 360.0 {
            d = 0.0;
        }
        Ok(Heading(d))
    }

    pub fn deg(&self) -> f64 {
        self.0
    }

    /// Eight-point compass word for spoken guidance.
    pub fn cardinal(&self) -> &'static str {
        const NAMES: [&str; 8] = [
            "north",
            "northeast",
            "east",
            "southeast",
            "south",
            "southwest",
            "west",
            "northwest",
        ];
        NAMES[((self.0 + 22.5) / 45.0) as usize % 8]
    }
}

impl TryFrom<f64> for Heading {
    type Error = GeoError;
    fn try_from(deg: f64) -> Result<Self, GeoError> {
        Heading::new(deg)
    }
}

impl From<Heading> for f64 {
    fn from(h: Heading) -> f64 {
        h.0
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.0}°", self.0)
    }
}

fn haversine_term(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let p1 = a.lat.to_radians();
    let p2 = b.lat.to_radians();
    let half_dlat = (p2 - p1) * 0.5;
    let half_dlon = (b.lon - a.lon).to_radians() * 0.5;
    let s_lat = half_dlat.sin();
    let s_lon = half_dlon.sin();
    let h = s_lat * s_lat + p1.cos() * p2.cos() * s_lon * s_lon;
    h.clamp(0.0, 1.0)
}

fn central_angle(a: &GeoPoint, b: &GeoPoint) -> f64 {
    2.0 * haversine_term(a, b).sqrt().asin()
}

/// Great-circle distance in meters.
pub fn distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    EARTH_RADIUS_M * central_angle(a, b)
}

/// Initial great-circle bearing from `from` toward `to`.
pub fn bearing(from: &GeoPoint, to: &GeoPoint) -> Result<Heading, GeoError> {
    let delta = central_angle(from, to);
    if delta < COINCIDENT_RAD || PI - delta < COINCIDENT_RAD {
        return Err(GeoError::UndefinedBearing);
    }
    let p1 = from.lat.to_radians();
    let p2 = to.lat.to_radians();
    let dl = (to.lon - from.lon).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    Heading::new(y.atan2(x).to_degrees())
}

/// Point reached by travelling `dist_m` along the great circle leaving
/// `start` on `heading`.
pub fn destination(start: &GeoPoint, heading: Heading, dist_m: f64) -> GeoPoint {
    let dr = dist_m / EARTH_RADIUS_M;
    let p1 = start.lat.to_radians();
    let l1 = start.lon.to_radians();
    let b = heading.deg().to_radians();
    let sin_p2 = (p1.sin() * dr.cos() + p1.cos() * dr.sin() * b.cos()).clamp(-1.0, 1.0);
    let p2 = sin_p2.asin();
    let l2 = l1 + (b.sin() * dr.sin() * p1.cos()).atan2(dr.cos() - p1.sin() * sin_p2);
    let lat = p2.to_degrees().clamp(-90.0, 90.0);
    GeoPoint { lat, lon: wrap_lon(l2.to_degrees()) }
}

/// Point at `fraction` of the way along the great circle from `a` to `b`.
pub fn interpolate(a: &GeoPoint, b: &GeoPoint, fraction: f64) -> GeoPoint {
    let delta = central_angle(a, b);
    if delta < COINCIDENT_RAD || fraction <= 0.0 {
        return *a;
    }
    if fraction >= 1.0 {
        return *b;
    }
    let (p1, l1) = (a.lat.to_radians(), a.lon.to_radians());
    let (p2, l2) = (b.lat.to_radians(), b.lon.to_radians());
    let s = delta.sin();
    let wa = ((1.0 - fraction) * delta).sin() / s;
    let wb = (fraction * delta).sin() / s;
    let x = wa * p1.cos() * l1.cos() + wb * p2.cos() * l2.cos();
    let y = wa * p1.cos() * l1.sin() + wb * p2.cos() * l2.sin();
    let z = wa * p1.sin() + wb * p2.sin();
    let lat = z.atan2(x.hypot(y)).to_degrees().clamp(-90.0, 90.0);
    GeoPoint { lat, lon: wrap_lon(y.atan2(x).to_degrees()) }
}

/// Signed turn from `current` to `target` in (-180, 180]. Positive means
/// turn clockwise (right).
pub fn heading_error(current: Heading, target: Heading) -> f64 {
    let mut e = target.deg() - current.deg();
    if e > 180.0 {
        e -= 360.0;
    } else if e <= -180.0 {
        e += 360.0;
    }
    e
}

/// Where a distance to the intersection falls in the announcement scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProximityZone {
    /// Beyond 500 m.
    Far,
    /// Distance in (k - 100, k] for k in [`BANDS_M`].
    Band(u32),
    /// Within the arrival radius.
    Arrived,
}

impl ProximityZone {
    /// Ordering toward the intersection: Far = 0, bands 1..=5, Arrived = 6.
    pub fn rank(&self) -> u32 {
        match self {
            ProximityZone::Far => 0,
            ProximityZone::Band(k) => 6 - k / 100,
            ProximityZone::Arrived => 6,
        }
    }
}

pub fn zone_of(d_m: f64, arrival_radius_m: f64) -> ProximityZone {
    if d_m <= arrival_radius_m {
        ProximityZone::Arrived
    } else if d_m > FAR_THRESHOLD_M {
        ProximityZone::Far
    } else {
        let k = ((d_m / 100.0).ceil() as u32).clamp(1, 5) * 100;
        ProximityZone::Band(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::INFINITY).is_err());
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.0).is_err());
        assert!(GeoPoint::new(0.0, 180.0).is_ok());
        assert_eq!(GeoPoint::wrapped(0.0, -180.0).unwrap().lon_deg(), 180.0);
        assert_eq!(GeoPoint::wrapped(0.0, 190.0).unwrap().lon_deg(), -170.0);
    }

    #[test]
    fn distance_identity_and_antipode() {
        let a = p(40.742, -74.179);
        assert_eq!(distance(&a, &a), 0.0);
        let anti = distance(&p(0.0, 0.0), &p(0.0, 180.0));
        assert!((anti - PI * EARTH_RADIUS_M).abs() < 1e-6);
        assert!((anti - 20_015_114.442).abs() < 0.01);
    }

    #[test]
    fn cardinal_bearings() {
        let north = bearing(&p(0.0, 0.0), &p(1.0, 0.0)).unwrap();
        let east = bearing(&p(0.0, 0.0), &p(0.0, 1.0)).unwrap();
        assert!(north.deg().abs() < 1e-12);
        assert!((east.deg() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_bearing() {
        let a = p(10.0, 20.0);
        assert_eq!(bearing(&a, &a), Err(GeoError::UndefinedBearing));
        assert_eq!(
            bearing(&p(0.0, 0.0), &p(0.0, 180.0)),
            Err(GeoError::UndefinedBearing)
        );
    }

    #[test]
    fn heading_error_cases() {
        let h = |d| Heading::new(d).unwrap();
        assert_eq!(heading_error(h(10.0), h(10.0)), 0.0);
        assert_eq!(heading_error(h(350.0), h(10.0)), 20.0);
        assert_eq!(heading_error(h(10.0), h(350.0)), -20.0);
        assert_eq!(heading_error(h(90.0), h(270.0)), 180.0);
        assert_eq!(heading_error(h(270.0), h(90.0)), 180.0);
    }

    #[test]
    fn heading_normalizes() {
        assert_eq!(Heading::new(-90.0).unwrap().deg(), 270.0);
        assert_eq!(Heading::new(720.0).unwrap().deg(), 0.0);
        assert!(Heading::new(-1e-20).unwrap().deg() < 360.0);
        assert!(Heading::new(f64::NAN).is_err());
        assert_eq!(Heading::new(91.0).unwrap().cardinal(), "east");
        assert_eq!(Heading::new(350.0).unwrap().cardinal(), "north");
    }

    #[test]
    fn zones() {
        assert_eq!(zone_of(600.0, 15.0), ProximityZone::Far);
        assert_eq!(zone_of(500.0, 15.0), ProximityZone::Band(500));
        assert_eq!(zone_of(455.0, 15.0), ProximityZone::Band(500));
        assert_eq!(zone_of(400.0, 15.0), ProximityZone::Band(400));
        assert_eq!(zone_of(100.0, 15.0), ProximityZone::Band(100));
        assert_eq!(zone_of(15.5, 15.0), ProximityZone::Band(100));
        assert_eq!(zone_of(12.0, 15.0), ProximityZone::Arrived);
        assert_eq!(zone_of(0.0, 15.0), ProximityZone::Arrived);
    }

    #[test]
    fn destination_round_trip() {
        let c = p(40.7425, -74.1786);
        let h = Heading::new(250.0).unwrap();
        let s = destination(&c, h, 58.5);
        assert!((distance(&c, &s) - 58.5).abs() < 1e-9);
        let back = bearing(&c, &s).unwrap();
        assert!(heading_error(back, h).abs() < 1e-9);
    }

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let a = p(40.74232006054, -74.17925250834);
        let b = p(40.7425, -74.1786);
        let total = distance(&a, &b);
        assert_eq!(interpolate(&a, &b, 0.0), a);
        assert_eq!(interpolate(&a, &b, 1.0), b);
        let m = interpolate(&a, &b, 0.25);
        assert!((distance(&a, &m) - 0.25 * total).abs() < 1e-9);
        assert!((distance(&m, &b) - 0.75 * total).abs() < 1e-9);
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-89.9f64..89.9, -179.9f64..180.0).prop_map(|(a, b)| p(a, b))
    }

    proptest! {
        #[test]
        fn distance_symmetric(a in point(), b in point()) {
            prop_assert_eq!(distance(&a, &b), distance(&b, &a));
            prop_assert!(distance(&a, &b) >= 0.0);
        }

        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            prop_assert!(distance(&a, &c) <= distance(&a, &b) + distance(&b, &c) + 1e-6);
        }

        #[test]
        fn heading_error_antisymmetric(a in 0.0f64..360.0, b in 0.0f64..360.0) {
            let (ha, hb) = (Heading::new(a).unwrap(), Heading::new(b).unwrap());
            let e = heading_error(ha, hb);
            prop_assert!(e > -180.0 && e <= 180.0);
            prop_assert_eq!(heading_error(ha, ha), 0.0);
            if e.abs() < 180.0 - 1e-9 {
                prop_assert!((e + heading_error(hb, ha)).abs() < 1e-9);
            }
        }

        #[test]
        fn zone_monotone(d in 0.0f64..2000.0, step in 0.0f64..300.0, r in 1.0f64..50.0) {
            let nearer = (d - step).max(0.0);
            prop_assert!(zone_of(nearer, r).rank() >= zone_of(d, r).rank());
        }
    }
}
