use crate::geo::{self, GeoMap, OutsidePolicy};
use crate::spectral::{self, SpectralEmbedding};

use super::dataset::PatientRow;
use super::{PipelineError, Result, Variant};

/// Map-level artifacts shared by every instance of a variant.
#[derive(Debug, Clone, Copy)]
pub struct GeoArtifacts<'a> {
    pub map: &'a GeoMap,
    pub embedding: Option<&'a SpectralEmbedding>,
    pub policy: OutsidePolicy,
}

/// Non-geographic features followed by the variant's geographic block:
/// nothing, a `p`-long one-hot code, or the entity's `k`-long embedding row.
pub fn build_features(row: &PatientRow, variant: Variant, artifacts: &GeoArtifacts<'_>) -> Result<Vec<f64>> {
    let mut x = row.features.clone();
    match variant {
        Variant::NoGeo => {}
        Variant::Sbr => {
            let key = geo::locate(&row.coords, artifacts.map, artifacts.policy)?;
            x.extend(geo::one_hot(key, artifacts.map)?);
        }
        Variant::RrSa | Variant::RrSsaBin | Variant::RrSsaFull => {
            let embedding = artifacts.embedding.ok_or_else(|| {
                PipelineError::Config(format!("variant {variant} needs a spectral embedding"))
            })?;
            x.extend(spectral::enrich(&row.coords, artifacts.map, embedding, artifacts.policy)?);
        }
    }
    Ok(x)
}
