//! Batch extraction of texture features from an image manifest.

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use super::{texture_feature_names, GlcmParams, RgbImage, TextureFeatures};
use crate::error::{Error, Result};
use crate::ingest::{csv_error, csv_reader, strip_bom, write_view, FeatureView, SAMPLE_ID_HEADER};

pub const HANDCRAFTED_VIEW: &str = "handcrafted";
const IMAGE_PATH_HEADER: &str = "image_path";

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionFailure {
    pub sample_id: String,
    pub path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CorpusExtraction {
    pub view: FeatureView,
    pub failures: Vec<ExtractionFailure>,
}

/// Reads a `sample_id,image_path` manifest. Relative paths are resolved
/// against the manifest's directory.
fn read_manifest(manifest: &Path) -> Result<Vec<(String, PathBuf)>> {
    let origin = manifest.display().to_string();
    let file = File::open(manifest).map_err(|e| Error::io(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut records = csv_reader(file).into_records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(&origin, e))?,
        None => return Ok(Vec::new()),
    };
    let cells: Vec<&str> = header.iter().map(|c| strip_bom(c).trim()).collect();
    if cells != [SAMPLE_ID_HEADER, IMAGE_PATH_HEADER] {
        return Err(Error::Format {
            path: origin,
            message: format!("header must be {SAMPLE_ID_HEADER},{IMAGE_PATH_HEADER}"),
        });
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| csv_error(&origin, e))?;
        if rec.len() != 2 || rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::Format {
                path: origin,
                message: format!("line {line}: expected a sample id and an image path"),
            });
        }
        if !seen.insert(rec[0].to_string()) {
            return Err(Error::Validation(format!(
                "{origin}: line {line}: duplicate sample id {:?}",
                &rec[0]
            )));
        }
        entries.push((rec[0].to_string(), base.join(&rec[1])));
    }
    Ok(entries)
}

/// Extracts PFTAS and GLCM features for every image in `manifest` and writes
/// them, sorted by sample id, as the `handcrafted` view at `out_path`.
/// Images that fail to load are skipped and reported in `failures`.
pub fn extract_corpus(
    manifest: &Path,
    out_path: &Path,
    params: &GlcmParams,
) -> Result<CorpusExtraction> {
    params.validate()?;
    let mut entries = read_manifest(manifest)?;
    entries.sort();
    let names = texture_feature_names(params);

    let results: Vec<(String, PathBuf, Result<Vec<f64>>)> = entries
        .into_par_iter()
        .map(|(id, path)| {
            let features = RgbImage::load(&path)
                .and_then(|img| TextureFeatures::extract(&img, params))
                .map(|f| f.combined());
            (id, path, features)
        })
        .collect();

    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut failures = Vec::new();
    for (sample_id, path, features) in results {
        match features {
            Ok(f) => {
                ids.push(sample_id);
                values.extend(f);
            }
            Err(e) => failures.push(ExtractionFailure {
                sample_id,
                path,
                message: e.to_string(),
            }),
        }
    }
    let matrix =
        Array2::from_shape_vec((ids.len(), names.len()), values).expect("fixed feature length");
    let view = FeatureView::new(HANDCRAFTED_VIEW, ids, names, matrix)?;
    write_view(&view, out_path)?;
    Ok(CorpusExtraction { view, failures })
}
