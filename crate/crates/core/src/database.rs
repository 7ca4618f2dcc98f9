//! Location-indexed image records and best-pair selection.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, match_bidirectional, FeatureParams, ViewFeatures};
use crate::image::GrayImage;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;
pub const DEFAULT_SEARCH_RADIUS_M: f64 = 100.0;
pub const DEFAULT_MIN_OVERLAP: usize = 30;
const CELL_METERS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoImageRecord {
    pub id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub image_path: PathBuf,
    /// Any trailing manifest columns, tab-joined.
    pub capture_meta: String,
}

/// Great-circle distance in meters.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

fn cell_degrees() -> f64 {
    (CELL_METERS / EARTH_RADIUS_M).to_degrees()
}

fn cell_of(lat: f64, lon: f64) -> (i64, i64) {
    let d = cell_degrees();
    ((lat / d).floor() as i64, (lon / d).floor() as i64)
}

/// Immutable grid-bucketed index over image records.
#[derive(Debug, Clone, Default)]
pub struct SceneIndex {
    records: Vec<GeoImageRecord>,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearbyRecord {
    pub record: GeoImageRecord,
    pub distance_m: f64,
}

impl SceneIndex {
    /// Builds an index from records, rejecting duplicate ids and invalid coordinates.
    pub fn from_records(records: Vec<GeoImageRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            check_coordinates(r.latitude, r.longitude)
                .map_err(|message| Error::ManifestParse { line: i + 1, message })?;
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            cells.entry(cell_of(r.latitude, r.longitude)).or_default().push(i);
        }
        Ok(Self { records, cells })
    }

    /// Reads a tab-separated manifest. Relative image paths resolve against
    /// the manifest's directory and must exist.
    pub fn ingest(manifest_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(manifest_path)
            .map_err(|e| Error::io(format!("reading manifest {}", manifest_path.display()), e))?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let record =
                parse_line(trimmed, base).map_err(|message| Error::ManifestParse { line: line_no, message })?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId(record.id));
            }
            if !record.image_path.is_file() {
                return Err(Error::MissingImage {
                    id: record.id,
                    path: record.image_path,
                });
            }
            records.push(record);
        }
        Self::from_records(records)
    }

    pub fn records(&self) -> &[GeoImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records within `radius_m` of the query, nearest first, ties by id.
    pub fn candidates_near(&self, lat: f64, lon: f64, radius_m: f64) -> Result<Vec<NearbyRecord>> {
        if !(radius_m > 0.0) {
            return Err(Error::Config(format!("search radius must be positive, got {radius_m}")));
        }
        check_coordinates(lat, lon).map_err(Error::Config)?;
        let mut out: Vec<NearbyRecord> = self
            .scan_set(lat, lon, radius_m)
            .into_iter()
            .filter_map(|i| {
                let r = &self.records[i];
                let d = haversine_m(lat, lon, r.latitude, r.longitude);
                (d <= radius_m).then(|| NearbyRecord {
                    record: r.clone(),
                    distance_m: d,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            a.distance_m
                .total_cmp(&b.distance_m)
                .then_with(|| a.record.id.cmp(&b.record.id))
        });
        Ok(out)
    }

    /// Record indices in grid cells overlapping the query's bounding box.
    fn scan_set(&self, lat: f64, lon: f64, radius_m: f64) -> Vec<usize> {
        let all = || (0..self.records.len()).collect();
        let dlat = (radius_m / EARTH_RADIUS_M).to_degrees();
        let max_lat = (lat.abs() + dlat).min(90.0);
        if max_lat >= 89.0 {
            return all();
        }
        let dlon = dlat / max_lat.to_radians().cos();
        if lon - dlon < -180.0 || lon + dlon > 180.0 {
            return all();
        }
        let (r0, c0) = cell_of(lat - dlat, lon - dlon);
        let (r1, c1) = cell_of(lat + dlat, lon + dlon);
        let span = (r1 - r0 + 1) as u128 * (c1 - c0 + 1) as u128;
        if span > self.cells.len() as u128 {
            return all();
        }
        let mut out = Vec::new();
        for r in r0..=r1 {
            for c in c0..=c1 {
                if let Some(v) = self.cells.get(&(r, c)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out
    }
}

fn check_coordinates(lat: f64, lon: f64) -> std::result::Result<(), String> {
    if !(lat.abs() <= 90.0) {
        return Err(format!("latitude {lat} outside [-90, 90]"));
    }
    if !(lon.abs() <= 180.0) {
        return Err(format!("longitude {lon} outside [-180, 180]"));
    }
    Ok(())
}

fn parse_line(line: &str, base: &Path) -> std::result::Result<GeoImageRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 4 {
        return Err(format!("expected 4 tab-separated fields, got {}", fields.len()));
    }
    let id = fields[0].trim();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let lat: f64 = fields[1]
        .trim()
        .parse()
        .map_err(|e| format!("latitude `{}`: {e}", fields[1]))?;
    let lon: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|e| format!("longitude `{}`: {e}", fields[2]))?;
    check_coordinates(lat, lon)?;
    let raw = fields[3].trim();
    if raw.is_empty() {
        return Err("empty image path".into());
    }
    let path = Path::new(raw);
    Ok(GeoImageRecord {
        id: id.to_string(),
        latitude: lat,
        longitude: lon,
        image_path: if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        },
        capture_meta: fields[4..].join("\t"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    /// Position in the candidate list passed to the ranking.
    pub index: usize,
    pub id: String,
    pub distance_m: f64,
    pub match_count: usize,
}

/// Candidates sorted by descending match count, then distance, then id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub ranking: Vec<RankedCandidate>,
}

impl CandidateSet {
    pub fn best_pair(&self) -> (&RankedCandidate, &RankedCandidate) {
        (&self.ranking[0], &self.ranking[1])
    }
}

/// Ranks described candidates by bidirectional match count against the
/// current view; fails if the second-best count is below `min_overlap`.
pub fn rank_candidates(
    current: &ViewFeatures,
    candidates: &[(&NearbyRecord, &ViewFeatures)],
    max_hamming: u32,
    min_overlap: usize,
) -> Result<CandidateSet> {
    if candidates.len() < 2 {
        return Err(Error::InsufficientCandidates(candidates.len()));
    }
    let mut ranking: Vec<RankedCandidate> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, (rec, feats))| RankedCandidate {
            index,
            id: rec.record.id.clone(),
            distance_m: rec.distance_m,
            match_count: match_bidirectional(&current.descriptors, &feats.descriptors, max_hamming).len(),
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.match_count
            .cmp(&a.match_count)
            .then(a.distance_m.total_cmp(&b.distance_m))
            .then_with(|| a.id.cmp(&b.id))
    });
    if ranking[1].match_count < min_overlap {
        return Err(Error::WeakOverlap {
            count: ranking[1].match_count,
            minimum: min_overlap,
        });
    }
    Ok(CandidateSet { ranking })
}

/// Feature-matches every candidate image against `current` and ranks them.
pub fn select_best_pair(
    current: &GrayImage,
    candidates: &[(NearbyRecord, GrayImage)],
    params: &FeatureParams,
    min_overlap: usize,
) -> Result<CandidateSet> {
    if candidates.len() < 2 {
        return Err(Error::InsufficientCandidates(candidates.len()));
    }
    let current_features = extract_features(current, params)?;
    let described: Vec<ViewFeatures> = candidates
        .par_iter()
        .map(|(_, img)| extract_features(img, params))
        .collect::<Result<_>>()?;
    let pairs: Vec<(&NearbyRecord, &ViewFeatures)> = candidates.iter().map(|c| &c.0).zip(&described).collect();
    rank_candidates(&current_features, &pairs, params.max_hamming, min_overlap)
}
