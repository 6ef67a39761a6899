//! Polygon maps of discrete geographic entities: parsing, point membership,
//! vertex-sharing adjacency, descriptive design matrices and one-hot codes.
//!
//! Map documents are JSON arrays of `{"key": "...", "boundary": [[lat, lon], ...]}`.
//! Every coordinate is quantized to 1e-6 degrees on ingest so that adjacency can
//! compare vertices exactly.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// Quantization step for coordinates, in degrees.
pub const COORD_RESOLUTION: f64 = 1e-6;
const COORD_SCALE: f64 = 1e6;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("malformed map document: {0}")]
    MalformedMap(String),
    #[error("duplicate entity key `{0}`")]
    DuplicateKey(String),
    #[error("entity `{key}` has {vertices} distinct ring vertices, need at least 3")]
    DegenerateRing { key: String, vertices: usize },
    #[error("non-finite coordinate ({lat}, {lon})")]
    NonFinite { lat: f64, lon: f64 },
    #[error("map has no entities")]
    EmptyMap,
    #[error("point ({lat}, {lon}) lies outside every entity")]
    OutsideMap { lat: f64, lon: f64 },
    #[error("unknown entity key `{0}`")]
    UnknownKey(String),
    #[error("design matrix: {0}")]
    Design(String),
    #[error("design matrix has no row for entity `{0}`")]
    MissingRow(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;

fn quantize(x: f64) -> f64 {
    (x * COORD_SCALE).round() / COORD_SCALE
}

/// A latitude/longitude pair quantized to [`COORD_RESOLUTION`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeoError::NonFinite { lat, lon });
        }
        Ok(Self {
            lat: quantize(lat),
            lon: quantize(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Integer micro-degree key; equal for two points iff they coincide after quantization.
    fn grid_key(&self) -> (i64, i64) {
        (
            (self.lat * COORD_SCALE).round() as i64,
            (self.lon * COORD_SCALE).round() as i64,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    key: String,
    /// Open ring: the closing vertex is not repeated.
    ring: Vec<GeoPoint>,
}

impl Entity {
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn ring(&self) -> &[GeoPoint] {
        &self.ring
    }

    /// Area centroid of the ring, falling back to the vertex mean for zero-area rings.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.ring.len();
        let (mut area2, mut cy, mut cx) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let a = self.ring[i];
            let b = self.ring[(i + 1) % n];
            let cross = a.lon * b.lat - b.lon * a.lat;
            area2 += cross;
            cx += (a.lon + b.lon) * cross;
            cy += (a.lat + b.lat) * cross;
        }
        if area2.abs() < 1e-18 {
            let lat = self.ring.iter().map(|p| p.lat).sum::<f64>() / n as f64;
            let lon = self.ring.iter().map(|p| p.lon).sum::<f64>() / n as f64;
            return (lat, lon);
        }
        (cy / (3.0 * area2), cx / (3.0 * area2))
    }

    /// Ray-casting containment with boundary points counted as inside.
    pub fn contains(&self, p: &GeoPoint) -> bool {
        let n = self.ring.len();
        let (px, py) = (p.lon, p.lat);
        for i in 0..n {
            if on_segment(p, &self.ring[i], &self.ring[(i + 1) % n]) {
                return true;
            }
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = (self.ring[i].lon, self.ring[i].lat);
            let (xj, yj) = (self.ring[j].lon, self.ring[j].lat);
            if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

fn on_segment(p: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> bool {
    const EPS: f64 = 1e-12;
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    let len = ((b.lon - a.lon).powi(2) + (b.lat - a.lat).powi(2)).sqrt();
    if cross.abs() > EPS * len.max(1.0) {
        return false;
    }
    p.lon >= a.lon.min(b.lon) - EPS
        && p.lon <= a.lon.max(b.lon) + EPS
        && p.lat >= a.lat.min(b.lat) - EPS
        && p.lat <= a.lat.max(b.lat) + EPS
}

/// What to do with a point that no entity contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutsidePolicy {
    #[default]
    Reject,
    NearestCentroid,
}

/// An ordered collection of keyed polygon entities.
#[derive(Debug, Clone, Default)]
pub struct GeoMap {
    entities: Vec<Entity>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawEntity {
    key: String,
    boundary: Vec<[f64; 2]>,
}

impl GeoMap {
    /// Builds a map from `(key, [(lat, lon), ...])` entries, in order.
    pub fn from_entries<K, I>(entries: I) -> Result<Self>
    where
        K: Into<String>,
        I: IntoIterator<Item = (K, Vec<(f64, f64)>)>,
    {
        let mut map = GeoMap::default();
        for (key, boundary) in entries {
            let key = key.into();
            let mut ring = boundary
                .into_iter()
                .map(|(lat, lon)| GeoPoint::new(lat, lon))
                .collect::<Result<Vec<_>>>()?;
            if ring.len() > 1 && ring.first().map(GeoPoint::grid_key) == ring.last().map(GeoPoint::grid_key) {
                ring.pop();
            }
            let distinct: HashSet<_> = ring.iter().map(GeoPoint::grid_key).collect();
            if distinct.len() < 3 {
                return Err(GeoError::DegenerateRing {
                    key,
                    vertices: distinct.len(),
                });
            }
            if map.index.contains_key(&key) {
                return Err(GeoError::DuplicateKey(key));
            }
            map.index.insert(key.clone(), map.entities.len());
            map.entities.push(Entity { key, ring });
        }
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entities.iter().map(|e| e.key.as_str())
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Serializes to the map document format, with rings written closed.
    pub fn to_json(&self) -> String {
        let raw: Vec<RawEntity> = self
            .entities
            .iter()
            .map(|e| RawEntity {
                key: e.key.clone(),
                boundary: e
                    .ring
                    .iter()
                    .chain(e.ring.first())
                    .map(|p| [p.lat, p.lon])
                    .collect(),
            })
            .collect();
        serde_json::to_string_pretty(&raw).expect("map serialization cannot fail")
    }
}

/// Parses a map document. Blank input yields an empty map.
pub fn parse_map(text: &str) -> Result<GeoMap> {
    if text.trim().is_empty() {
        return Ok(GeoMap::default());
    }
    let raw: Vec<RawEntity> =
        serde_json::from_str(text).map_err(|e| GeoError::MalformedMap(e.to_string()))?;
    GeoMap::from_entries(raw.into_iter().map(|r| {
        let boundary = r.boundary.into_iter().map(|[lat, lon]| (lat, lon)).collect();
        (r.key, boundary)
    }))
}

/// Index (in map order) of the entity containing `point`.
pub fn locate_index(point: &GeoPoint, map: &GeoMap, policy: OutsidePolicy) -> Result<usize> {
    if map.is_empty() {
        return Err(GeoError::EmptyMap);
    }
    if let Some(i) = map.entities.iter().position(|e| e.contains(point)) {
        return Ok(i);
    }
    match policy {
        OutsidePolicy::Reject => Err(GeoError::OutsideMap {
            lat: point.lat,
            lon: point.lon,
        }),
        OutsidePolicy::NearestCentroid => {
            let mut best = (0, f64::INFINITY);
            for (i, e) in map.entities.iter().enumerate() {
                let (clat, clon) = e.centroid();
                let d = (clat - point.lat).powi(2) + (clon - point.lon).powi(2);
                if d < best.1 {
                    best = (i, d);
                }
            }
            Ok(best.0)
        }
    }
}

/// Key of the first entity (in map order) whose polygon contains `point`.
pub fn locate<'a>(point: &GeoPoint, map: &'a GeoMap, policy: OutsidePolicy) -> Result<&'a str> {
    locate_index(point, map, policy).map(|i| map.entities[i].key.as_str())
}

/// Binary, symmetric, zero-diagonal entity adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix(Matrix);

impl AdjacencyMatrix {
    /// Wraps a 0/1 matrix. Returns `None` unless it is square, symmetric, binary with zero diagonal.
    pub fn from_matrix(m: Matrix) -> Option<Self> {
        let n = m.rows();
        if !m.is_square() {
            return None;
        }
        for i in 0..n {
            for j in 0..n {
                let x = m[(i, j)];
                if (x != 0.0 && x != 1.0) || x != m[(j, i)] || (i == j && x != 0.0) {
                    return None;
                }
            }
        }
        Some(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn is_adjacent(&self, l: usize, v: usize) -> bool {
        self.0[(l, v)] == 1.0
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    /// Connected components as a label per entity, numbered in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let n = self.dim();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = next;
            while let Some(u) = stack.pop() {
                for v in 0..n {
                    if self.is_adjacent(u, v) && label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

/// Entities `l != v` are adjacent iff their rings share a quantized vertex.
pub fn build_adjacency(map: &GeoMap) -> Result<AdjacencyMatrix> {
    let p = map.len();
    if p == 0 {
        return Err(GeoError::EmptyMap);
    }
    let mut owners: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (l, e) in map.entities.iter().enumerate() {
        for pt in &e.ring {
            let list = owners.entry(pt.grid_key()).or_default();
            if list.last() != Some(&l) {
                list.push(l);
            }
        }
    }
    let mut m = Matrix::zeros(p, p);
    for list in owners.values() {
        for (a, &l) in list.iter().enumerate() {
            for &v in &list[a + 1..] {
                if l != v {
                    m[(l, v)] = 1.0;
                    m[(v, l)] = 1.0;
                }
            }
        }
    }
    Ok(AdjacencyMatrix(m))
}

/// Per-entity descriptive features, rows aligned with the map's entity order.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    features: Vec<String>,
    values: Matrix,
}

impl DesignMatrix {
    /// Rows must already be in map order.
    pub fn new(features: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let values = if rows.is_empty() {
            Matrix::zeros(0, features.len())
        } else {
            Matrix::from_rows(rows).ok_or_else(|| GeoError::Design("ragged rows".into()))?
        };
        if values.cols() != features.len() {
            return Err(GeoError::Design(format!(
                "{} feature names for {} columns",
                features.len(),
                values.cols()
            )));
        }
        if !values.is_finite() {
            return Err(GeoError::Design("non-finite value".into()));
        }
        Ok(Self { features, values })
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.values.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.features
    }

    pub fn row(&self, l: usize) -> &[f64] {
        self.values.row(l)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.values
    }

    /// CSV with header `key,<feature names>`, rows in map order.
    pub fn to_csv(&self, map: &GeoMap) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["key".to_string()];
        header.extend(self.features.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (l, key) in map.keys().enumerate() {
            let mut rec = vec![key.to_string()];
            rec.extend(self.row(l).iter().map(|x| x.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Reads a `key,f1,...,fh` CSV table and permutes its rows into map order.
pub fn load_design_matrix(text: &str, map: &GeoMap) -> Result<DesignMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| GeoError::Design(e.to_string()))?
        .clone();
    if header.get(0) != Some("key") {
        return Err(GeoError::Design("first column must be `key`".into()));
    }
    let features: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; map.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GeoError::Design(e.to_string()))?;
        let key = record.get(0).unwrap_or_default();
        let l = map
            .index_of(key)
            .ok_or_else(|| GeoError::UnknownKey(key.to_string()))?;
        if rows[l].is_some() {
            return Err(GeoError::DuplicateKey(key.to_string()));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        GeoError::Design(format!("row {}: bad numeric cell `{cell}`", line + 2))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows[l] = Some(values);
    }
    let rows = rows
        .into_iter()
        .zip(map.keys())
        .map(|(r, key)| r.ok_or_else(|| GeoError::MissingRow(key.to_string())))
        .collect::<Result<Vec<_>>>()?;
    DesignMatrix::new(features, &rows)
}

/// One-hot membership code of length `p`.
pub fn one_hot(key: &str, map: &GeoMap) -> Result<Vec<f64>> {
    let l = map
        .index_of(key)
        .ok_or_else(|| GeoError::UnknownKey(key.to_string()))?;
    let mut v = vec![0.0; map.len()];
    v[l] = 1.0;
    Ok(v)
}

/// Unit-square grid map with `rows x cols` cells keyed `r{row}c{col}`, row-major.
/// Cell `(r, c)` spans latitude `[r, r+1]` and longitude `[c, c+1]`.
pub fn grid_map(rows: usize, cols: usize) -> GeoMap {
    let entries = (0..rows).flat_map(|r| {
        (0..cols).map(move |c| {
            let (y, x) = (r as f64, c as f64);
            (
                format!("r{r}c{c}"),
                vec![(y, x), (y, x + 1.0), (y + 1.0, x + 1.0), (y + 1.0, x)],
            )
        })
    });
    GeoMap::from_entries(entries).expect("grid cells are valid rings")
}
