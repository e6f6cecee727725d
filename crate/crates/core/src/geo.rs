//! Latitude/longitude points and great-circle distances.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS-ish geographic fix. Latitude in `[-90, 90]`, longitude in
/// `[-180, 180]`, both finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Haversine distance between two points, in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().asin()
}

/// Offset a point by meters north and east. Good to well under a meter at
/// the sub-kilometer scales the feature pipeline cares about.
pub fn offset_m(p: GeoPoint, north_m: f64, east_m: f64) -> GeoPoint {
    let meters_per_deg_lat = std::f64::consts::PI * EARTH_RADIUS_M / 180.0;
    let lat = p.lat + north_m / meters_per_deg_lat;
    let lon = p.lon + east_m / (meters_per_deg_lat * p.lat.to_radians().cos());
    GeoPoint::new(lat, lon)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent reference: spherical law of cosines. Agrees with the
    /// haversine formula away from antipodes; used only as a cross-check.
    fn law_of_cosines_m(a: GeoPoint, b: GeoPoint) -> f64 {
        let la = a.lat.to_radians();
        let lb = b.lat.to_radians();
        let dl = (b.lon - a.lon).to_radians();
        let c = (la.sin() * lb.sin() + la.cos() * lb.cos() * dl.cos()).clamp(-1.0, 1.0);
        EARTH_RADIUS_M * c.acos()
    }

    #[test]
    fn zero_distance() {
        let p = GeoPoint::new(32.07, 34.78);
        assert_eq!(haversine_m(p, p), 0.0);
    }

    #[test]
    fn matches_law_of_cosines_at_city_scale() {
        let a = GeoPoint::new(32.0700, 34.7800);
        let b = GeoPoint::new(32.0712, 34.7831);
        let h = haversine_m(a, b);
        let c = law_of_cosines_m(a, b);
        assert!((h - c).abs() < 0.01, "h={h} loc={c}");
        assert!(h > 250.0 && h < 400.0, "h={h}");
    }

    #[test]
    fn offset_roundtrips_distance() {
        let p = GeoPoint::new(-12.5, 130.8);
        for (n, e, want) in [(50.0, 0.0, 50.0), (0.0, 60.0, 60.0), (30.0, 40.0, 50.0)] {
            let q = offset_m(p, n, e);
            let d = haversine_m(p, q);
            assert!((d - want).abs() < 0.05, "want {want} got {d}");
        }
    }
}
