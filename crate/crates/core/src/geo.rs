//! Local planar geometry: projection about a site centre, satellite look
//! angles, and straight-line ray / footprint intersection heights.
//!
//! Heights are carried in whatever vertical datum the inputs use. All
//! functions here are pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius (IUGG), metres.
pub const MEAN_EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Largest horizontal separation accepted by [`project_to_local`].
pub const MAX_PROJECTION_SEPARATION_M: f64 = 10_000.0;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Smallest satellite ECEF norm accepted by [`look_angles`].
const MIN_SATELLITE_NORM_M: f64 = 6.5e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("point lies {0:.1} m from the projection centre (limit 10 km)")]
    OutOfRange(f64),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("invalid footprint: {0}")]
    InvalidFootprint(String),
    #[error("invalid ray: {0}")]
    InvalidRay(String),
    #[error("ray origin lies inside footprint `{0}`")]
    InsideFootprint(String),
    #[error("elevation bounds must satisfy lower < upper within [0, 90] (got {lower}, {upper})")]
    InvalidBounds { lower: f64, upper: f64 },
}

/// Geodetic position on the WGS84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, alt: f64) -> Result<Self, GeoError> {
        let p = GeoPoint { lat, lon, alt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.lat.is_finite() && self.lon.is_finite() && self.alt.is_finite()) {
            return Err(GeoError::InvalidCoordinate(format!("non-finite value in {self:?}")));
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(GeoError::InvalidCoordinate(format!("latitude {} outside [-90, 90]", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(GeoError::InvalidCoordinate(format!(
                "longitude {} outside [-180, 180]",
                self.lon
            )));
        }
        Ok(())
    }

    /// Earth-centred Earth-fixed coordinates in metres.
    pub fn to_ecef(&self) -> [f64; 3] {
        let (sin_lat, cos_lat) = self.lat.to_radians().sin_cos();
        let (sin_lon, cos_lon) = self.lon.to_radians().sin_cos();
        let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
        [
            (n + self.alt) * cos_lat * cos_lon,
            (n + self.alt) * cos_lat * sin_lon,
            (n * (1.0 - WGS84_E2) + self.alt) * sin_lat,
        ]
    }
}

/// Point in a local east/north frame, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
    pub alt: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64, alt: f64) -> Self {
        PlanarPoint { x, y, alt }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.alt.is_finite()
    }

    fn xy(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Equirectangular projection of `p` about `center`.
pub fn project_to_local(p: &GeoPoint, center: &GeoPoint) -> Result<PlanarPoint, GeoError> {
    p.validate()?;
    center.validate()?;
    let mut dlon = p.lon - center.lon;
    if dlon > 180.0 {
        dlon -= 360.0;
    } else if dlon < -180.0 {
        dlon += 360.0;
    }
    let x = MEAN_EARTH_RADIUS_M * center.lat.to_radians().cos() * dlon.to_radians();
    let y = MEAN_EARTH_RADIUS_M * (p.lat - center.lat).to_radians();
    let separation = x.hypot(y);
    if separation >= MAX_PROJECTION_SEPARATION_M {
        return Err(GeoError::OutOfRange(separation));
    }
    Ok(PlanarPoint { x, y, alt: p.alt })
}

/// Analytic inverse of [`project_to_local`].
pub fn unproject_from_local(p: &PlanarPoint, center: &GeoPoint) -> Result<GeoPoint, GeoError> {
    let cos_lat = center.lat.to_radians().cos();
    if cos_lat.abs() < 1e-12 {
        return Err(GeoError::Degenerate("projection centre at a pole".into()));
    }
    let lat = center.lat + (p.y / MEAN_EARTH_RADIUS_M).to_degrees();
    let mut lon = center.lon + (p.x / (MEAN_EARTH_RADIUS_M * cos_lat)).to_degrees();
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    GeoPoint::new(lat, lon, p.alt)
}

/// Azimuth (clockwise from north, `[0, 360)`) and elevation of a satellite
/// seen from `receiver`, both in degrees, relative to the local tangent plane
/// of the WGS84 ellipsoid.
pub fn look_angles(receiver: &GeoPoint, satellite_ecef: [f64; 3]) -> Result<(f64, f64), GeoError> {
    receiver.validate()?;
    let norm = satellite_ecef.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !norm.is_finite() || norm <= MIN_SATELLITE_NORM_M {
        return Err(GeoError::InvalidCoordinate(format!(
            "satellite ECEF norm {norm} m is not above {MIN_SATELLITE_NORM_M} m"
        )));
    }
    let rx = receiver.to_ecef();
    let d = [
        satellite_ecef[0] - rx[0],
        satellite_ecef[1] - rx[1],
        satellite_ecef[2] - rx[2],
    ];
    let range = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if range < 1e-3 {
        return Err(GeoError::Degenerate("satellite coincides with receiver".into()));
    }
    let (sin_lat, cos_lat) = receiver.lat.to_radians().sin_cos();
    let (sin_lon, cos_lon) = receiver.lon.to_radians().sin_cos();
    let east = -sin_lon * d[0] + cos_lon * d[1];
    let north = -sin_lat * cos_lon * d[0] - sin_lat * sin_lon * d[1] + cos_lat * d[2];
    let up = cos_lat * cos_lon * d[0] + cos_lat * sin_lon * d[1] + sin_lat * d[2];

    let azimuth = east.atan2(north).to_degrees().rem_euclid(360.0);
    // atan2 form of asin(up / range); stays well conditioned near zenith
    let elevation = up.atan2(east.hypot(north)).to_degrees();
    Ok((if azimuth >= 360.0 { 0.0 } else { azimuth }, elevation))
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90°.
pub(crate) fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        r.to_radians().sin_cos()
    }
}

/// Tangent of an elevation in degrees, exact at 0° and 45°.
pub(crate) fn tan_deg(deg: f64) -> f64 {
    if deg == 0.0 {
        0.0
    } else if deg == 45.0 {
        1.0
    } else {
        deg.to_radians().tan()
    }
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 - b.0, a.1 - b.1)
}

fn orientation(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

fn segments_touch(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let o1 = orientation(p1, p2, q1);
    let o2 = orientation(p1, p2, q2);
    let o3 = orientation(q1, q2, p1);
    let o4 = orientation(q1, q2, p2);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(p1, p2, q1))
        || (o2 == 0.0 && on_segment(p1, p2, q2))
        || (o3 == 0.0 && on_segment(q1, q2, p1))
        || (o4 == 0.0 && on_segment(q1, q2, p2))
}

/// A simple polygon building outline in the local planar frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Footprint {
    id: String,
    ring: Vec<PlanarPoint>,
    /// Geodetic centre the ring was projected about, when loaded from WGS84.
    origin: Option<GeoPoint>,
}

impl Footprint {
    /// Builds a footprint, checking that the ring is an open, simple polygon
    /// with at least three vertices and nonzero area.
    pub fn new(id: impl Into<String>, ring: Vec<PlanarPoint>) -> Result<Self, GeoError> {
        let id = id.into();
        let n = ring.len();
        if n < 3 {
            return Err(GeoError::InvalidFootprint(format!("{id}: ring needs at least 3 vertices, got {n}")));
        }
        if let Some(p) = ring.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(GeoError::InvalidFootprint(format!("{id}: non-finite vertex {p:?}")));
        }
        for i in 0..n {
            let a = ring[i].xy();
            let b = ring[(i + 1) % n].xy();
            if a == b {
                return Err(GeoError::InvalidFootprint(format!(
                    "{id}: repeated vertex at index {} (rings must not be closed explicitly)",
                    (i + 1) % n
                )));
            }
        }
        for i in 0..n {
            let (a1, a2) = (ring[i].xy(), ring[(i + 1) % n].xy());
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (b1, b2) = (ring[j].xy(), ring[(j + 1) % n].xy());
                if segments_touch(a1, a2, b1, b2) {
                    return Err(GeoError::InvalidFootprint(format!(
                        "{id}: edges {i} and {j} intersect (ring is not simple)"
                    )));
                }
            }
        }
        let fp = Footprint { id, ring, origin: None };
        if fp.signed_area().abs() <= 1e-9 {
            return Err(GeoError::InvalidFootprint(format!("{}: zero area", fp.id)));
        }
        Ok(fp)
    }

    pub fn with_origin(mut self, origin: GeoPoint) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn ring(&self) -> &[PlanarPoint] {
        &self.ring
    }

    pub fn origin(&self) -> Option<&GeoPoint> {
        self.origin.as_ref()
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.ring.len();
        0.5 * (0..n)
            .map(|i| cross(self.ring[i].xy(), self.ring[(i + 1) % n].xy()))
            .sum::<f64>()
    }

    pub fn edges(&self) -> impl Iterator<Item = (PlanarPoint, PlanarPoint)> + '_ {
        let n = self.ring.len();
        (0..n).map(move |i| (self.ring[i], self.ring[(i + 1) % n]))
    }

    /// True when `(x, y)` lies on the polygon boundary.
    pub fn on_boundary(&self, x: f64, y: f64) -> bool {
        let p = (x, y);
        self.edges().any(|(a, b)| {
            let (a, b) = (a.xy(), b.xy());
            let len = sub(b, a).0.hypot(sub(b, a).1);
            orientation(a, b, p).abs() <= 1e-12 * len.max(1.0) && on_segment(a, b, p)
        })
    }

    /// Even-odd containment test; boundary points count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        if self.on_boundary(x, y) {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > y) != (b.y > y) {
                let x_cross = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Footprint crs tag in the JSON document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FootprintCrs {
    #[serde(rename = "local-metres")]
    LocalMetres,
    #[serde(rename = "wgs84")]
    Wgs84,
}

/// On-disk footprint document. For `wgs84` each ring pair is `[lon, lat]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintDocument {
    pub id: String,
    pub crs: FootprintCrs,
    pub ring: Vec<[f64; 2]>,
}

impl FootprintDocument {
    pub fn from_footprint(fp: &Footprint) -> Self {
        FootprintDocument {
            id: fp.id.clone(),
            crs: FootprintCrs::LocalMetres,
            ring: fp.ring.iter().map(|p| [p.x, p.y]).collect(),
        }
    }

    /// Converts to a [`Footprint`]. WGS84 rings are projected about the mean
    /// of their vertices, which becomes the footprint origin. A trailing
    /// vertex equal to the first one is dropped.
    pub fn into_footprint(self) -> Result<Footprint, GeoError> {
        let mut ring = self.ring;
        if ring.len() > 3 && ring.first() == ring.last() {
            ring.pop();
        }
        match self.crs {
            FootprintCrs::LocalMetres => {
                let pts = ring.iter().map(|[x, y]| PlanarPoint::new(*x, *y, 0.0)).collect();
                Footprint::new(self.id, pts)
            }
            FootprintCrs::Wgs84 => {
                if ring.is_empty() {
                    return Err(GeoError::InvalidFootprint(format!("{}: empty ring", self.id)));
                }
                let n = ring.len() as f64;
                let lon = ring.iter().map(|p| p[0]).sum::<f64>() / n;
                let lat = ring.iter().map(|p| p[1]).sum::<f64>() / n;
                let center = GeoPoint::new(lat, lon, 0.0)?;
                let pts = ring
                    .iter()
                    .map(|[lon, lat]| project_to_local(&GeoPoint::new(*lat, *lon, 0.0)?, &center))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Footprint::new(self.id, pts)?.with_origin(center))
            }
        }
    }
}

/// Straight ray from a receiver towards a satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayPath {
    pub origin: PlanarPoint,
    /// Degrees clockwise from north, `[0, 360)`.
    pub azimuth: f64,
    /// Degrees above the horizontal, `[0, 90)`.
    pub elevation: f64,
}

impl RayPath {
    pub fn new(origin: PlanarPoint, azimuth: f64, elevation: f64) -> Result<Self, GeoError> {
        let ray = RayPath { origin, azimuth, elevation };
        ray.validate()?;
        Ok(ray)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.origin.is_finite() {
            return Err(GeoError::InvalidRay(format!("non-finite origin {:?}", self.origin)));
        }
        if !(0.0..360.0).contains(&self.azimuth) {
            return Err(GeoError::InvalidRay(format!("azimuth {} outside [0, 360)", self.azimuth)));
        }
        if !(0.0..=90.0).contains(&self.elevation) {
            return Err(GeoError::InvalidRay(format!("elevation {} outside [0, 90]", self.elevation)));
        }
        if self.elevation == 90.0 {
            return Err(GeoError::InvalidRay("elevation of exactly 90 degrees has no finite intersection height".into()));
        }
        Ok(())
    }

    /// Horizontal unit direction `(east, north)`.
    pub fn direction(&self) -> (f64, f64) {
        let (s, c) = sin_cos_deg(self.azimuth);
        (s, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    /// Entry point on the footprint boundary; `alt` is the intersection height.
    pub entry_point: PlanarPoint,
    pub horizontal_distance: f64,
    pub intersection_height: f64,
}

/// Height at which `ray` first crosses the footprint boundary.
///
/// Returns `Ok(None)` when the horizontal ray never reaches the footprint.
/// Among all edge crossings the one at minimum positive distance is taken:
/// an ascending ray is lowest where it enters the building.
pub fn ray_entry(ray: &RayPath, fp: &Footprint) -> Result<Option<Intersection>, GeoError> {
    ray.validate()?;
    let o = ray.origin.xy();
    if fp.contains(o.0, o.1) {
        return Err(GeoError::InsideFootprint(fp.id.clone()));
    }
    let dir = ray.direction();
    let mut best: Option<f64> = None;
    for (a, b) in fp.edges() {
        let e = sub(b.xy(), a.xy());
        let denom = cross(dir, e);
        if denom == 0.0 {
            // parallel edge; any collinear hit is also caught at a neighbouring vertex
            continue;
        }
        let w = sub(a.xy(), o);
        let t = cross(w, e) / denom;
        let s = cross(w, dir) / denom;
        if t > 0.0 && (0.0..=1.0).contains(&s) && best.is_none_or(|bt| t < bt) {
            best = Some(t);
        }
    }
    Ok(best.map(|t| {
        let height = ray.origin.alt + t * tan_deg(ray.elevation);
        Intersection {
            entry_point: PlanarPoint::new(o.0 + t * dir.0, o.1 + t * dir.1, height),
            horizontal_distance: t,
            intersection_height: height,
        }
    }))
}

/// Anything carrying a satellite elevation in degrees.
pub trait Elevated {
    fn elevation_deg(&self) -> f64;
}

/// Inclusive elevation window, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElevationBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ElevationBounds {
    fn default() -> Self {
        ElevationBounds { lower: 10.0, upper: 85.0 }
    }
}

impl ElevationBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self, GeoError> {
        let b = ElevationBounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lower.is_finite()
            && self.upper.is_finite()
            && self.lower < self.upper
            && self.lower >= 0.0
            && self.upper <= 90.0;
        if ok {
            Ok(())
        } else {
            Err(GeoError::InvalidBounds { lower: self.lower, upper: self.upper })
        }
    }

    pub fn contains(&self, elevation: f64) -> bool {
        self.lower <= elevation && elevation <= self.upper
    }
}

/// Keeps records whose elevation lies in `[lower, upper]`, preserving order.
pub fn elevation_filter<T: Elevated + Clone>(records: &[T], bounds: ElevationBounds) -> Result<Vec<T>, GeoError> {
    bounds.validate()?;
    Ok(records
        .iter()
        .filter(|r| bounds.contains(r.elevation_deg()))
        .cloned()
        .collect())
}
