//! Observation log and footprint loading, and assembly of the per-building
//! dataset of `(label, C/N0, intersection height)` tuples.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{
    self, project_to_local, ray_entry, Elevated, ElevationBounds, Footprint, FootprintDocument, GeoError, GeoPoint,
    PlanarPoint, RayPath,
};

/// Rows beyond this malformed fraction abort a load.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

const GEODETIC_HEADER: [&str; 9] = [
    "timestamp",
    "lat",
    "lon",
    "alt",
    "azimuth",
    "elevation",
    "cn0",
    "sat_id",
    "truth_label",
];
const PLANAR_HEADER: [&str; 9] = [
    "timestamp",
    "x",
    "y",
    "alt",
    "azimuth",
    "elevation",
    "cn0",
    "sat_id",
    "truth_label",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{malformed} of {rows} rows malformed (limit 10%); first: {first}")]
    TooManyMalformed {
        rows: usize,
        malformed: usize,
        first: String,
        report: Vec<MalformedRow>,
    },
    #[error("footprint document: {0}")]
    FootprintJson(#[from] serde_json::Error),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("no observation records supplied")]
    NoRecords,
    #[error("no observations intersect footprint `{0}`")]
    EmptyDataset(String),
    #[error("coordinate mismatch: {0}")]
    CrsMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthLabel {
    Open,
    Closed,
}

impl TruthLabel {
    pub fn is_open(self) -> bool {
        self == TruthLabel::Open
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TruthLabel::Open => "open",
            TruthLabel::Closed => "closed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Receiver {
    Geodetic(GeoPoint),
    Planar(PlanarPoint),
}

/// One received or blocked satellite signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub timestamp: f64,
    pub receiver: Receiver,
    pub sat_azimuth: f64,
    pub sat_elevation: f64,
    /// `None` marks a blocked signal.
    pub cn0: Option<f64>,
    pub sat_id: String,
    /// Evaluation only; estimators never read this.
    pub truth_label: Option<TruthLabel>,
}

impl ObservationRecord {
    pub fn is_blocked(&self) -> bool {
        self.cn0.is_none()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.timestamp.is_finite() {
            return Err("non-finite timestamp".into());
        }
        match &self.receiver {
            Receiver::Geodetic(p) => p.validate().map_err(|e| e.to_string())?,
            Receiver::Planar(p) if !p.is_finite() => return Err("non-finite receiver position".into()),
            Receiver::Planar(_) => {}
        }
        if !(0.0..360.0).contains(&self.sat_azimuth) {
            return Err(format!("azimuth {} outside [0, 360)", self.sat_azimuth));
        }
        if !(0.0..=90.0).contains(&self.sat_elevation) {
            return Err(format!("elevation {} outside [0, 90]", self.sat_elevation));
        }
        if let Some(cn0) = self.cn0 {
            if !(cn0 > 0.0 && cn0 < 80.0) {
                return Err(format!("cn0 {cn0} outside (0, 80)"));
            }
        }
        if self.sat_id.is_empty() {
            return Err("empty sat_id".into());
        }
        Ok(())
    }
}

impl Elevated for ObservationRecord {
    fn elevation_deg(&self) -> f64 {
        self.sat_elevation
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MalformedRow {
    /// 1-based line number in the file, header is line 1.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedObservations {
    pub records: Vec<ObservationRecord>,
    pub malformed: Vec<MalformedRow>,
    /// Rows repeating an earlier `(timestamp, sat_id)` pair; they are kept.
    pub duplicates: usize,
}

struct Columns {
    planar: bool,
    timestamp: usize,
    first: usize,
    second: usize,
    alt: usize,
    azimuth: usize,
    elevation: usize,
    cn0: usize,
    sat_id: usize,
    truth: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self, IngestError> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let need = |name: &str| find(name).ok_or_else(|| IngestError::Schema(format!("missing required column `{name}`")));
        let planar = match (find("lat"), find("lon"), find("x"), find("y")) {
            (Some(_), Some(_), _, _) => false,
            (_, _, Some(_), Some(_)) => true,
            _ => {
                return Err(IngestError::Schema(
                    "header needs either `lat,lon` or `x,y` receiver columns".into(),
                ))
            }
        };
        let (first, second) = if planar {
            (need("x")?, need("y")?)
        } else {
            (need("lat")?, need("lon")?)
        };
        Ok(Columns {
            planar,
            timestamp: need("timestamp")?,
            first,
            second,
            alt: need("alt")?,
            azimuth: need("azimuth")?,
            elevation: need("elevation")?,
            cn0: need("cn0")?,
            sat_id: need("sat_id")?,
            truth: find("truth_label"),
        })
    }

    fn parse(&self, row: &csv::StringRecord) -> Result<ObservationRecord, String> {
        let field = |i: usize| row.get(i).map(str::trim).ok_or_else(|| format!("missing field {}", i + 1));
        let num = |i: usize, name: &str| -> Result<f64, String> {
            let raw = field(i)?;
            raw.parse::<f64>().map_err(|_| format!("{name}: cannot parse `{raw}`"))
        };
        let a = num(self.first, if self.planar { "x" } else { "lat" })?;
        let b = num(self.second, if self.planar { "y" } else { "lon" })?;
        let alt = num(self.alt, "alt")?;
        let receiver = if self.planar {
            Receiver::Planar(PlanarPoint::new(a, b, alt))
        } else {
            Receiver::Geodetic(GeoPoint { lat: a, lon: b, alt })
        };
        let cn0 = match field(self.cn0)? {
            "" => None,
            raw => Some(raw.parse::<f64>().map_err(|_| format!("cn0: cannot parse `{raw}`"))?),
        };
        let truth_label = match self.truth.map(field).transpose()? {
            None | Some("") => None,
            Some("open") => Some(TruthLabel::Open),
            Some("closed") => Some(TruthLabel::Closed),
            Some(other) => return Err(format!("truth_label: unknown value `{other}`")),
        };
        let rec = ObservationRecord {
            timestamp: num(self.timestamp, "timestamp")?,
            receiver,
            sat_azimuth: num(self.azimuth, "azimuth")?,
            sat_elevation: num(self.elevation, "elevation")?,
            cn0,
            sat_id: field(self.sat_id)?.to_string(),
            truth_label,
        };
        rec.validate()?;
        Ok(rec)
    }
}

/// Parses an observation CSV from any reader.
pub fn parse_observations<R: Read>(reader: R) -> Result<LoadedObservations, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let cols = Columns::from_header(rdr.headers()?)?;
    let mut out = LoadedObservations::default();
    let mut seen = HashSet::new();
    let mut rows = 0usize;
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        rows += 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| cols.parse(&r));
        match parsed {
            Ok(rec) => {
                if !seen.insert((rec.timestamp.to_bits(), rec.sat_id.clone())) {
                    out.duplicates += 1;
                }
                out.records.push(rec);
            }
            Err(reason) => out.malformed.push(MalformedRow { line, reason }),
        }
    }
    if rows > 0 && out.malformed.len() as f64 > MAX_MALFORMED_FRACTION * rows as f64 {
        return Err(IngestError::TooManyMalformed {
            rows,
            malformed: out.malformed.len(),
            first: format!("line {}: {}", out.malformed[0].line, out.malformed[0].reason),
            report: out.malformed,
        });
    }
    for m in &out.malformed {
        warn!("skipping malformed row at line {}: {}", m.line, m.reason);
    }
    if out.duplicates > 0 {
        warn!("{} duplicate (timestamp, sat_id) rows kept", out.duplicates);
    }
    Ok(out)
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<LoadedObservations, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    parse_observations(std::io::BufReader::new(file))
}

/// Writes records in the observation CSV schema. All receivers must share
/// one coordinate kind. Numbers use the shortest round-trip representation.
pub fn write_observations<W: Write>(writer: W, records: &[ObservationRecord]) -> Result<(), IngestError> {
    let planar = match records.first().map(|r| &r.receiver) {
        Some(Receiver::Planar(_)) => true,
        Some(Receiver::Geodetic(_)) | None => false,
    };
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    wtr.write_record(if planar { PLANAR_HEADER } else { GEODETIC_HEADER })?;
    for r in records {
        let (a, b, alt) = match (&r.receiver, planar) {
            (Receiver::Planar(p), true) => (p.x, p.y, p.alt),
            (Receiver::Geodetic(g), false) => (g.lat, g.lon, g.alt),
            _ => return Err(IngestError::CrsMismatch("records mix planar and geodetic receivers".into())),
        };
        wtr.write_record([
            r.timestamp.to_string(),
            a.to_string(),
            b.to_string(),
            alt.to_string(),
            r.sat_azimuth.to_string(),
            r.sat_elevation.to_string(),
            r.cn0.map(|v| v.to_string()).unwrap_or_default(),
            r.sat_id.clone(),
            r.truth_label.map(|t| t.as_str().to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|source| IngestError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

pub fn save_observations(path: impl AsRef<Path>, records: &[ObservationRecord]) -> Result<(), IngestError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    write_observations(std::io::BufWriter::new(file), records)
}

pub fn load_footprint(path: impl AsRef<Path>) -> Result<Footprint, IngestError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    let doc: FootprintDocument = serde_json::from_str(&text)?;
    Ok(doc.into_footprint()?)
}

/// One footprint-intersecting observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationTuple {
    /// Working label, blank until an estimator assigns one.
    pub label: Option<bool>,
    pub cn0: Option<f64>,
    pub height: f64,
    pub truth: Option<TruthLabel>,
    /// Index of the source record in the input slice.
    pub source_index: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub recorded: usize,
    pub blocked: usize,
    pub elevation_filtered: usize,
    pub inside_footprint: usize,
    pub out_of_range: usize,
    pub missed: usize,
    pub intersecting: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildingDataset {
    pub building_id: String,
    pub tuples: Vec<ObservationTuple>,
    pub provenance: Provenance,
}

impl BuildingDataset {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        self.tuples.iter().map(|t| t.height)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub bounds: ElevationBounds,
    /// Ground elevation; receivers are placed 1 m above it when set.
    pub dem_altitude: Option<f64>,
}

/// Receiver position in the footprint's planar frame.
pub fn receiver_position(rec: &ObservationRecord, fp: &Footprint, dem_altitude: Option<f64>) -> Result<PlanarPoint, IngestError> {
    let mut p = match (&rec.receiver, fp.origin()) {
        (Receiver::Planar(p), None) => *p,
        (Receiver::Geodetic(g), Some(origin)) => project_to_local(g, origin)?,
        (Receiver::Planar(_), Some(_)) => {
            return Err(IngestError::CrsMismatch(
                "planar receiver coordinates with a wgs84 footprint".into(),
            ))
        }
        (Receiver::Geodetic(_), None) => {
            return Err(IngestError::CrsMismatch(
                "geodetic receiver coordinates with a local-metres footprint".into(),
            ))
        }
    };
    if let Some(ground) = dem_altitude {
        p.alt = ground + 1.0;
    }
    Ok(p)
}

/// Ray for a record, or `None` when its elevation has no finite intersection.
pub fn record_ray(rec: &ObservationRecord, origin: PlanarPoint) -> Result<RayPath, GeoError> {
    RayPath::new(origin, rec.sat_azimuth, rec.sat_elevation)
}

/// Filters by elevation, intersects every remaining record with the
/// footprint and keeps the intersecting ones, in input order.
pub fn build_dataset(
    records: &[ObservationRecord],
    fp: &Footprint,
    opts: &BuildOptions,
) -> Result<BuildingDataset, IngestError> {
    if records.is_empty() {
        return Err(IngestError::NoRecords);
    }
    opts.bounds.validate()?;
    let mut prov = Provenance::default();
    let mut tuples = Vec::new();
    for (idx, rec) in records.iter().enumerate() {
        if rec.is_blocked() {
            prov.blocked += 1;
        } else {
            prov.recorded += 1;
        }
        if !opts.bounds.contains(rec.sat_elevation) {
            prov.elevation_filtered += 1;
            continue;
        }
        let origin = match receiver_position(rec, fp, opts.dem_altitude) {
            Ok(p) => p,
            Err(IngestError::Geo(GeoError::OutOfRange(_))) => {
                prov.out_of_range += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let hit = match record_ray(rec, origin).and_then(|ray| ray_entry(&ray, fp)) {
            Ok(hit) => hit,
            Err(GeoError::InsideFootprint(_)) => {
                prov.inside_footprint += 1;
                continue;
            }
            // elevation exactly 90 degrees
            Err(GeoError::InvalidRay(_)) => {
                prov.elevation_filtered += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        match hit {
            Some(hit) => tuples.push(ObservationTuple {
                label: None,
                cn0: rec.cn0,
                height: hit.intersection_height,
                truth: rec.truth_label,
                source_index: idx,
            }),
            None => prov.missed += 1,
        }
    }
    if prov.inside_footprint > 0 {
        warn!(
            "{} observations discarded: receiver inside footprint `{}`",
            prov.inside_footprint,
            fp.id()
        );
    }
    prov.intersecting = tuples.len();
    if tuples.is_empty() {
        return Err(IngestError::EmptyDataset(fp.id().to_string()));
    }
    Ok(BuildingDataset { building_id: fp.id().to_string(), tuples, provenance: prov })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub epochs: usize,
    pub recorded: usize,
    pub blocked: usize,
    pub total: usize,
    pub intersecting: usize,
}

/// Counts in the style of a data-collection summary table. Epochs are the
/// distinct timestamps.
pub fn summarize(records: &[ObservationRecord], dataset: Option<&BuildingDataset>) -> DatasetSummary {
    let epochs = records.iter().map(|r| r.timestamp.to_bits()).collect::<HashSet<_>>().len();
    let blocked = records.iter().filter(|r| r.is_blocked()).count();
    DatasetSummary {
        epochs,
        recorded: records.len() - blocked,
        blocked,
        total: records.len(),
        intersecting: dataset.map_or(0, |d| d.tuples.len()),
    }
}

/// Ray/footprint entry for a record using the same options as
/// [`build_dataset`]; used to recompute tuple heights.
pub fn recompute_height(rec: &ObservationRecord, fp: &Footprint, opts: &BuildOptions) -> Result<Option<f64>, IngestError> {
    let origin = receiver_position(rec, fp, opts.dem_altitude)?;
    let ray = record_ray(rec, origin)?;
    Ok(geo::ray_entry(&ray, fp)?.map(|h| h.intersection_height))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "timestamp,lat,lon,alt,azimuth,elevation,cn0,sat_id,truth_label\n";

    fn square() -> Footprint {
        Footprint::new(
            "sq",
            vec![
                PlanarPoint::new(10.0, -10.0, 0.0),
                PlanarPoint::new(30.0, -10.0, 0.0),
                PlanarPoint::new(30.0, 10.0, 0.0),
                PlanarPoint::new(10.0, 10.0, 0.0),
            ],
        )
        .unwrap()
    }

    fn planar(az: f64, el: f64, cn0: Option<f64>) -> ObservationRecord {
        ObservationRecord {
            timestamp: 1.0,
            receiver: Receiver::Planar(PlanarPoint::new(0.0, 0.0, 0.0)),
            sat_azimuth: az,
            sat_elevation: el,
            cn0,
            sat_id: "G01".into(),
            truth_label: None,
        }
    }

    #[test]
    fn parses_received_and_blocked_rows() {
        let csv = format!("{HEADER}1600000000,51.52,-0.13,30.0,135.0,42.5,38.0,G01,\n1600000000,51.52,-0.13,30.0,200.0,20.0,,G02,closed\n");
        let loaded = parse_observations(csv.as_bytes()).unwrap();
        assert_eq!(loaded.records.len(), 2);
        let r = &loaded.records[0];
        assert_eq!(r.cn0, Some(38.0));
        assert_eq!(r.sat_id, "G01");
        assert_eq!(r.receiver, Receiver::Geodetic(GeoPoint { lat: 51.52, lon: -0.13, alt: 30.0 }));
        assert_eq!(r.truth_label, None);
        assert!(loaded.records[1].is_blocked());
        assert_eq!(loaded.records[1].truth_label, Some(TruthLabel::Closed));
    }

    #[test]
    fn malformed_rows_are_reported() {
        let mut csv = HEADER.to_string();
        for i in 0..20 {
            csv.push_str(&format!("{i},51.52,-0.13,30.0,135.0,42.5,38.0,G01,\n"));
        }
        csv.push_str("21,51.52,-0.13,30.0,135.0,95,38.0,G01,\n");
        let loaded = parse_observations(csv.as_bytes()).unwrap();
        assert_eq!(loaded.records.len(), 20);
        assert_eq!(loaded.malformed.len(), 1);
        assert_eq!(loaded.malformed[0].line, 22);
        assert!(loaded.malformed[0].reason.contains("elevation"));
    }

    #[test]
    fn too_many_malformed_rows_abort() {
        let csv = format!("{HEADER}1,51.52,-0.13,30.0,135.0,95,38.0,G01,\n2,51.52,-0.13,30.0,135.0,45,38.0,G01,\n");
        assert!(matches!(
            parse_observations(csv.as_bytes()),
            Err(IngestError::TooManyMalformed { malformed: 1, rows: 2, .. })
        ));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "timestamp,lat,lon,alt,azimuth,elevation,sat_id\n";
        assert!(matches!(parse_observations(csv.as_bytes()), Err(IngestError::Schema(_))));
    }

    #[test]
    fn duplicates_are_kept_and_counted() {
        let csv = format!("{HEADER}1,51.52,-0.13,30.0,135.0,42.5,38.0,G01,\n1,51.52,-0.13,30.0,135.0,42.5,38.0,G01,\n");
        let loaded = parse_observations(csv.as_bytes()).unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.duplicates, 1);
    }

    #[test]
    fn planar_header_variant() {
        let csv = "timestamp,x,y,alt,azimuth,elevation,cn0,sat_id,truth_label\n5,-3.5,2,1,90,45,,G07,open\n";
        let loaded = parse_observations(csv.as_bytes()).unwrap();
        assert_eq!(loaded.records[0].receiver, Receiver::Planar(PlanarPoint::new(-3.5, 2.0, 1.0)));
        let mut out = Vec::new();
        write_observations(&mut out, &loaded.records).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "timestamp,x,y,alt,azimuth,elevation,cn0,sat_id,truth_label\n5,-3.5,2,1,90,45,,G07,open\n");
    }

    #[test]
    fn missed_ray_gives_empty_dataset() {
        let recs = vec![planar(270.0, 30.0, Some(40.0))];
        assert!(matches!(
            build_dataset(&recs, &square(), &BuildOptions::default()),
            Err(IngestError::EmptyDataset(_))
        ));
        assert!(matches!(build_dataset(&[], &square(), &BuildOptions::default()), Err(IngestError::NoRecords)));
    }

    #[test]
    fn blocked_record_becomes_unlabelled_tuple() {
        let recs = vec![planar(90.0, 45.0, None)];
        let ds = build_dataset(&recs, &square(), &BuildOptions::default()).unwrap();
        assert_eq!(ds.tuples.len(), 1);
        let t = ds.tuples[0];
        assert_eq!((t.label, t.cn0, t.height), (None, None, 10.0));
        assert_eq!(ds.provenance.blocked, 1);
    }

    #[test]
    fn dem_override_sets_receiver_altitude() {
        let recs = vec![planar(90.0, 45.0, Some(30.0))];
        let opts = BuildOptions { dem_altitude: Some(24.0), ..Default::default() };
        let ds = build_dataset(&recs, &square(), &opts).unwrap();
        assert_eq!(ds.tuples[0].height, 35.0);
    }

    #[test]
    fn crs_mismatch_is_an_error() {
        let mut rec = planar(90.0, 45.0, Some(30.0));
        rec.receiver = Receiver::Geodetic(GeoPoint { lat: 51.0, lon: 0.0, alt: 0.0 });
        assert!(matches!(
            build_dataset(&[rec], &square(), &BuildOptions::default()),
            Err(IngestError::CrsMismatch(_))
        ));
    }

    #[test]
    fn inside_receivers_are_counted_not_fatal() {
        let mut inside = planar(90.0, 45.0, Some(30.0));
        inside.receiver = Receiver::Planar(PlanarPoint::new(20.0, 0.0, 0.0));
        let recs = vec![inside, planar(90.0, 45.0, Some(30.0))];
        let ds = build_dataset(&recs, &square(), &BuildOptions::default()).unwrap();
        assert_eq!(ds.provenance.inside_footprint, 1);
        assert_eq!(ds.tuples.len(), 1);
        assert_eq!(ds.tuples[0].source_index, 1);
    }

    #[test]
    fn summary_counts() {
        assert_eq!(summarize(&[], None), DatasetSummary::default());
        let mut recs: Vec<_> = (0..10).map(|_| planar(90.0, 45.0, Some(30.0))).collect();
        recs.extend((0..2).map(|_| planar(270.0, 45.0, None)));
        let ds = BuildingDataset {
            building_id: "x".into(),
            tuples: vec![
                ObservationTuple { label: None, cn0: None, height: 1.0, truth: None, source_index: 0 };
                7
            ],
            provenance: Provenance::default(),
        };
        let s = summarize(&recs, Some(&ds));
        assert_eq!((s.recorded, s.blocked, s.total, s.intersecting, s.epochs), (10, 2, 12, 7, 1));
    }

    proptest! {
        #[test]
        fn summary_identities(spec in proptest::collection::vec((0u8..4, any::<bool>(), 0.0f64..360.0), 0..60)) {
            let recs: Vec<_> = spec.iter().map(|(t, blocked, az)| {
                let mut r = planar(*az, 45.0, if *blocked { None } else { Some(35.0) });
                r.timestamp = f64::from(*t);
                r
            }).collect();
            let ds = build_dataset(&recs, &square(), &BuildOptions::default()).ok();
            let s = summarize(&recs, ds.as_ref());
            prop_assert_eq!(s.total, s.recorded + s.blocked);
            prop_assert!(s.intersecting <= s.total);
            prop_assert!(s.epochs <= 4);
        }
    }
}
