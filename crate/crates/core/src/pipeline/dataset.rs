//! Patient table ingest.
//!
//! Columns are recognised by header: `f_*` numeric features (kept in header
//! order), `lat`, `lon`, `event` (0/1) and `time` (integer in `0..=T`).

use crate::geo::GeoPoint;
use crate::survival::EventRecord;

use super::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRow {
    pub features: Vec<f64>,
    pub coords: GeoPoint,
    pub record: EventRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientDataset {
    feature_names: Vec<String>,
    rows: Vec<PatientRow>,
    horizon: usize,
}

fn bad(msg: impl Into<String>) -> PipelineError {
    PipelineError::Dataset(msg.into())
}

impl PatientDataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<PatientRow>, horizon: usize) -> Result<Self> {
        if let Some(i) = rows.iter().position(|r| r.features.len() != feature_names.len()) {
            return Err(bad(format!(
                "row {i} has {} features, expected {}",
                rows[i].features.len(),
                feature_names.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.record.time() > horizon) {
            return Err(bad(format!("time {} beyond horizon {horizon}", r.record.time())));
        }
        Ok(Self {
            feature_names,
            rows,
            horizon,
        })
    }

    pub fn from_csv(text: &str, horizon: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| bad(format!("missing `{name}` column")))
        };
        let (lat, lon, event, time) = (find("lat")?, find("lon")?, find("event")?, find("time")?);
        let mut feature_cols = Vec::new();
        let mut feature_names = Vec::new();
        for (i, h) in header.iter().enumerate() {
            if h.starts_with("f_") {
                feature_cols.push(i);
                feature_names.push(h.to_string());
            } else if ![lat, lon, event, time].contains(&i) {
                return Err(bad(format!("unrecognised column `{h}`")));
            }
        }

        let mut rows = Vec::new();
        for (n, record) in reader.records().enumerate() {
            let line = n + 2;
            let record = record.map_err(|e| bad(e.to_string()))?;
            let num = |col: usize| -> Result<f64> {
                let cell = record.get(col).unwrap_or_default();
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(format!("line {line}: bad number `{cell}` in `{}`", &header[col])))
            };
            let features = feature_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?;
            let coords = GeoPoint::new(num(lat)?, num(lon)?)?;
            let e = match record.get(event).unwrap_or_default() {
                "0" => false,
                "1" => true,
                other => return Err(bad(format!("line {line}: event must be 0 or 1, got `{other}`"))),
            };
            let t_cell = record.get(time).unwrap_or_default();
            let t: usize = t_cell
                .parse()
                .map_err(|_| bad(format!("line {line}: bad time `{t_cell}`")))?;
            let record = EventRecord::new(e, t, horizon).map_err(|err| bad(format!("line {line}: {err}")))?;
            rows.push(PatientRow {
                features,
                coords,
                record,
            });
        }
        Self::new(feature_names, rows, horizon)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.feature_names.clone();
        header.extend(["lat", "lon", "event", "time"].map(String::from));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec: Vec<String> = r.features.iter().map(|x| x.to_string()).collect();
            rec.push(r.coords.lat().to_string());
            rec.push(r.coords.lon().to_string());
            rec.push(u8::from(r.record.event()).to_string());
            rec.push(r.record.time().to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[PatientRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.rows.iter().map(|r| r.record).collect()
    }
}
