//! Multi-view datasets on disk.
//!
//! A view file is a UTF-8 CSV whose header starts with `sample_id` followed by
//! one column per feature; every following row holds one sample. The labels
//! file is a CSV with the header `sample_id,label`. Views are aligned to a
//! single canonical sample order (lexicographic by id) when they are
//! assembled into a [`LabeledDataset`]. No scaling is applied to feature
//! values.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SAMPLE_ID_HEADER: &str = "sample_id";

/// One feature group over a set of samples: an `N x d` matrix with one row per sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureView {
    name: String,
    sample_ids: Vec<String>,
    feature_names: Vec<String>,
    matrix: Array2<f64>,
}

impl FeatureView {
    pub fn new(
        name: impl Into<String>,
        sample_ids: Vec<String>,
        feature_names: Vec<String>,
        matrix: Array2<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if feature_names.is_empty() {
            return Err(Error::Validation(format!(
                "view {name:?} has no feature columns"
            )));
        }
        if matrix.nrows() != sample_ids.len() {
            return Err(Error::Validation(format!(
                "view {name:?}: {} rows but {} sample ids",
                matrix.nrows(),
                sample_ids.len()
            )));
        }
        if matrix.ncols() != feature_names.len() {
            return Err(Error::Validation(format!(
                "view {name:?}: {} columns but {} feature names",
                matrix.ncols(),
                feature_names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(sample_ids.len());
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!(
                    "view {name:?}: duplicate sample id {id:?}"
                )));
            }
        }
        if let Some(((r, c), v)) = matrix.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "view {name:?}: non-finite value {v} at sample {:?}, feature {:?}",
                sample_ids[r], feature_names[c]
            )));
        }
        Ok(FeatureView {
            name,
            sample_ids,
            feature_names,
            matrix,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// A new view holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureView {
        FeatureView {
            name: self.name.clone(),
            sample_ids: rows.iter().map(|&r| self.sample_ids[r].clone()).collect(),
            feature_names: self.feature_names.clone(),
            matrix: self.matrix.select(Axis(0), rows),
        }
    }
}

/// Views aligned on a common, lexicographically ordered sample set, with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    views: Vec<FeatureView>,
    sample_ids: Vec<String>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn views(&self) -> &[FeatureView] {
        &self.views
    }

    pub fn view(&self, name: &str) -> Option<&FeatureView> {
        self.views.iter().find(|v| v.name() == name)
    }

    pub fn view_names(&self) -> Vec<&str> {
        self.views.iter().map(|v| v.name()).collect()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// Class index (into [`class_names`](Self::class_names)) of every sample, in canonical order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn label_of(&self, sample_id: &str) -> Option<&str> {
        let i = self
            .sample_ids
            .binary_search_by(|s| s.as_str().cmp(sample_id))
            .ok()?;
        Some(&self.class_names[self.labels[i]])
    }
}

pub(crate) fn strip_bom(s: &str) -> &str {
    s.strip_prefix('\u{feff}').unwrap_or(s)
}

pub(crate) fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader)
}

pub(crate) fn csv_error(path: &str, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_string(),
        message: e.to_string(),
    }
}

/// Parses a view file from any reader. `origin` is used in error messages.
pub fn read_view<R: Read>(reader: R, name: &str, origin: &str) -> Result<FeatureView> {
    let mut rdr = csv_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_error(origin, e))?,
        None => {
            return Err(Error::Format {
                path: origin.to_string(),
                message: "empty file, expected a header".into(),
            })
        }
    };
    let first = header.get(0).map(strip_bom).unwrap_or_default();
    if first != SAMPLE_ID_HEADER {
        return Err(Error::Format {
            path: origin.to_string(),
            message: format!("first header cell must be {SAMPLE_ID_HEADER:?}, found {first:?}"),
        });
    }
    let feature_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if feature_names.is_empty() {
        return Err(Error::Format {
            path: origin.to_string(),
            message: "header names no feature columns".into(),
        });
    }
    let d = feature_names.len();

    let mut sample_ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| csv_error(origin, e))?;
        if rec.len() != d + 1 {
            return Err(Error::Format {
                path: origin.to_string(),
                message: format!("line {line}: expected {} cells, found {}", d + 1, rec.len()),
            });
        }
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Validation(format!(
                "{origin}: line {line}: duplicate sample id {id:?}"
            )));
        }
        for (c, cell) in rec.iter().enumerate().skip(1) {
            let v = cell
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: origin.to_string(),
                    line,
                    column: c + 1,
                    column_name: feature_names[c - 1].clone(),
                    value: cell.to_string(),
                })?;
            values.push(v);
        }
        sample_ids.push(id);
    }
    let matrix =
        Array2::from_shape_vec((sample_ids.len(), d), values).expect("row lengths checked above");
    FeatureView::new(name, sample_ids, feature_names, matrix)
}

/// Loads a view file. The view is named after the file stem.
pub fn load_view(path: impl AsRef<Path>) -> Result<FeatureView> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "view".to_string());
    read_view(file, &name, &path.display().to_string())
}

/// Writes rows of `(id, values)` under a `sample_id` header. Values use the
/// shortest decimal form that parses back to the same bits.
pub(crate) fn write_table<'a, W, I>(writer: W, columns: &[String], rows: I) -> csv::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, ArrayView1<'a, f64>)>,
{
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = Vec::with_capacity(columns.len() + 1);
    header.push(SAMPLE_ID_HEADER.to_string());
    header.extend(columns.iter().cloned());
    wtr.write_record(&header)?;
    let mut cells = Vec::with_capacity(columns.len() + 1);
    for (id, row) in rows {
        cells.clear();
        cells.push(id.to_string());
        cells.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&cells)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_view_to<W: Write>(view: &FeatureView, writer: W) -> Result<()> {
    let rows = view
        .sample_ids
        .iter()
        .zip(view.matrix.rows())
        .map(|(id, row)| (id.as_str(), row));
    write_table(writer, &view.feature_names, rows).map_err(|e| Error::Serde(e.to_string()))
}

pub fn write_view(view: &FeatureView, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_view_to(view, std::io::BufWriter::new(file))
}

/// Reads a `sample_id,label` file into an id -> label map.
pub fn read_labels<R: Read>(reader: R, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv_reader(reader);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Format {
            path: origin.to_string(),
            message: "empty labels file".into(),
        })?
        .map_err(|e| csv_error(origin, e))?;
    let cells: Vec<&str> = header.iter().collect();
    if cells.len() != 2 || strip_bom(cells[0]) != SAMPLE_ID_HEADER || cells[1] != "label" {
        return Err(Error::Format {
            path: origin.to_string(),
            message: format!("labels header must be \"sample_id,label\", found {cells:?}"),
        });
    }
    let mut labels = BTreeMap::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| csv_error(origin, e))?;
        if rec.len() != 2 {
            return Err(Error::Format {
                path: origin.to_string(),
                message: format!("line {line}: expected 2 cells, found {}", rec.len()),
            });
        }
        let label = rec[1].trim();
        if label.is_empty() {
            return Err(Error::Label(format!("{origin}: line {line}: empty label")));
        }
        if labels
            .insert(rec[0].to_string(), label.to_string())
            .is_some()
        {
            return Err(Error::Label(format!(
                "{origin}: line {line}: sample id {:?} labelled twice",
                &rec[0]
            )));
        }
    }
    Ok(labels)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(file, &path.display().to_string())
}

/// Aligns views on a common sample order and attaches labels.
pub fn assemble_dataset(
    views: Vec<FeatureView>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let labels = load_labels(labels_path)?;
    assemble_with_labels(views, &labels)
}

/// Like [`assemble_dataset`] with labels already in memory. Labels for ids
/// absent from the views are ignored.
pub fn assemble_with_labels(
    views: Vec<FeatureView>,
    labels: &BTreeMap<String, String>,
) -> Result<LabeledDataset> {
    let Some(first) = views.first() else {
        return Err(Error::Validation("at least one view is required".into()));
    };
    let mut names = HashSet::new();
    for v in &views {
        if !names.insert(v.name()) {
            return Err(Error::Validation(format!(
                "duplicate view name {:?}",
                v.name()
            )));
        }
    }

    let reference: BTreeSet<&str> = first.sample_ids.iter().map(String::as_str).collect();
    let mut offending = BTreeSet::new();
    for v in &views[1..] {
        let ids: BTreeSet<&str> = v.sample_ids.iter().map(String::as_str).collect();
        offending.extend(reference.symmetric_difference(&ids).copied());
    }
    if !offending.is_empty() {
        return Err(Error::Alignment {
            offending: offending.into_iter().map(str::to_string).collect(),
        });
    }

    let sample_ids: Vec<String> = reference.iter().map(|s| s.to_string()).collect();
    let missing: Vec<&str> = sample_ids
        .iter()
        .filter(|id| !labels.contains_key(*id))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Label(format!(
            "no label for sample ids: {}",
            missing.join(", ")
        )));
    }
    if sample_ids.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 samples, found {}",
            sample_ids.len()
        )));
    }

    let class_names: Vec<String> = sample_ids
        .iter()
        .map(|id| labels[id].clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if class_names.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 classes, found {}",
            class_names.len()
        )));
    }
    let label_idx: Vec<usize> = sample_ids
        .iter()
        .map(|id| {
            class_names
                .binary_search(&labels[id])
                .expect("label collected above")
        })
        .collect();

    let views = views
        .into_iter()
        .map(|v| {
            let position: std::collections::HashMap<&str, usize> = v
                .sample_ids
                .iter()
                .enumerate()
                .map(|(i, s)| (s.as_str(), i))
                .collect();
            let order: Vec<usize> = sample_ids.iter().map(|id| position[id.as_str()]).collect();
            v.select_rows(&order)
        })
        .collect();

    Ok(LabeledDataset {
        views,
        sample_ids,
        labels: label_idx,
        class_names,
    })
}

/// Number of candidate features drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mtry {
    /// `floor(sqrt(d))`, at least 1.
    #[default]
    Sqrt,
    Count(usize),
}

impl Mtry {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            Mtry::Sqrt => n_features.isqrt().max(1),
            Mtry::Count(m) => m,
        }
    }
}

impl std::str::FromStr for Mtry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("sqrt") {
            return Ok(Mtry::Sqrt);
        }
        match s.parse::<usize>() {
            Ok(m) if m >= 1 => Ok(Mtry::Count(m)),
            _ => Err(Error::Parameter(format!(
                "mtry must be a positive integer or \"sqrt\", got {s:?}"
            ))),
        }
    }
}

impl Serialize for Mtry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Mtry::Sqrt => s.serialize_str("sqrt"),
            Mtry::Count(m) => s.serialize_u64(*m as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Mtry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(m) if m >= 1 => Ok(Mtry::Count(m as usize)),
            Raw::Int(m) => Err(serde::de::Error::custom(format!(
                "mtry must be positive, got {m}"
            ))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Experiment settings. The config file is TOML with these keys at top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_trees: usize,
    pub train_fraction: f64,
    pub n_repeats: usize,
    pub c_grid: Vec<f64>,
    pub rng_seed: u64,
    pub mtry: Mtry,
    /// Folds used to choose C inside each training split.
    pub cv_folds: usize,
    pub smo_tolerance: f64,
    pub smo_max_iter: usize,
    /// Clip negative eigenvalues of the training kernel before fitting the SVM.
    pub psd_repair: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_trees: 500,
            train_fraction: 0.75,
            n_repeats: 10,
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
            rng_seed: 0,
            mtry: Mtry::Sqrt,
            cv_folds: 5,
            smo_tolerance: crate::svm::SmoParams::default().tolerance,
            smo_max_iter: crate::svm::SmoParams::default().max_iter,
            psd_repair: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Parameter("n_trees must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.n_repeats == 0 {
            return Err(Error::Parameter("n_repeats must be positive".into()));
        }
        validate_c_grid(&self.c_grid)?;
        if let Mtry::Count(0) = self.mtry {
            return Err(Error::Parameter("mtry must be positive".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Parameter("cv_folds must be at least 2".into()));
        }
        if self.smo_tolerance.is_nan() || self.smo_tolerance <= 0.0 || self.smo_max_iter == 0 {
            return Err(Error::Parameter(
                "SMO tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Format {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn smo_params(&self) -> crate::svm::SmoParams {
        crate::svm::SmoParams {
            tolerance: self.smo_tolerance,
            max_iter: self.smo_max_iter,
        }
    }
}

pub(crate) fn validate_c_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parameter("c_grid must not be empty".into()));
    }
    if grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Parameter(format!(
            "c_grid values must be positive, got {grid:?}"
        )));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter(format!(
            "c_grid must be strictly increasing, got {grid:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view_from(name: &str, text: &str) -> Result<FeatureView> {
        read_view(text.as_bytes(), name, name)
    }

    #[test]
    fn parses_well_formed_file() {
        let v = view_from("v", "sample_id,f1,f2\na,1.0,2\nb,-3.5,4e2\nc,0,.25\n").unwrap();
        assert_eq!(v.n_samples(), 3);
        assert_eq!(v.n_features(), 2);
        assert_eq!(v.row(1).to_vec(), vec![-3.5, 400.0]);
        assert_eq!(v.feature_names(), &["f1".to_string(), "f2".to_string()]);
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let err = view_from("v", "sample_id,f\nimg001,1\nimg001,2\n").unwrap_err();
        assert!(
            matches!(err, Error::Validation(ref m) if m.contains("img001")),
            "{err}"
        );
    }

    #[test]
    fn nan_cell_names_its_location() {
        let err = view_from("v", "sample_id,f1,f2\na,1,2\nb,3,NaN\n").unwrap_err();
        match err {
            Error::Parse {
                line,
                column,
                column_name,
                value,
                ..
            } => {
                assert_eq!((line, column), (3, 3));
                assert_eq!(column_name, "f2");
                assert_eq!(value, "NaN");
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(matches!(
            view_from("v", "sample_id,f\na,inf\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            view_from("v", "sample_id,f\na,abc\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn malformed_headers_and_rows() {
        assert!(matches!(view_from("v", ""), Err(Error::Format { .. })));
        assert!(matches!(
            view_from("v", "id,f\na,1\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            view_from("v", "sample_id\na\n"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            view_from("v", "sample_id,f,g\na,1\n"),
            Err(Error::Format { .. })
        ));
        // header only is an empty view
        assert_eq!(view_from("v", "sample_id,f\n").unwrap().n_samples(), 0);
    }

    fn labels(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn assembly_aligns_to_lexicographic_order() {
        let v1 = view_from("one", "sample_id,x\nc,3\na,1\nb,2\n").unwrap();
        let v2 = view_from("two", "sample_id,y\nb,20\nc,30\na,10\n").unwrap();
        let ds = assemble_with_labels(vec![v1, v2], &labels(&[("a", "p"), ("b", "q"), ("c", "p")]))
            .unwrap();
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.views().len(), 2);
        assert_eq!(ds.sample_ids(), &["a", "b", "c"]);
        assert_eq!(
            ds.view("one").unwrap().matrix().column(0).to_vec(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            ds.view("two").unwrap().matrix().column(0).to_vec(),
            vec![10.0, 20.0, 30.0]
        );
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.label_of("b"), Some("q"));
    }

    #[test]
    fn mismatched_ids_name_both_sides() {
        let v1 = view_from("one", "sample_id,x\na,1\nb,2\n").unwrap();
        let v2 = view_from("two", "sample_id,x\na,1\nc,2\n").unwrap();
        let err =
            assemble_with_labels(vec![v1, v2], &labels(&[("a", "p"), ("b", "q"), ("c", "q")]))
                .unwrap_err();
        match err {
            Error::Alignment { offending } => assert_eq!(offending, vec!["b", "c"]),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_label_is_reported() {
        let v = view_from("one", "sample_id,x\na,1\nb,2\nc,3\n").unwrap();
        let err = assemble_with_labels(vec![v], &labels(&[("a", "p"), ("b", "q")])).unwrap_err();
        assert!(
            matches!(err, Error::Label(ref m) if m.contains('c')),
            "{err}"
        );
    }

    #[test]
    fn single_class_or_single_sample_is_rejected() {
        let v = view_from("one", "sample_id,x\na,1\nb,2\n").unwrap();
        assert!(assemble_with_labels(vec![v.clone()], &labels(&[("a", "p"), ("b", "p")])).is_err());
        let v1 = view_from("one", "sample_id,x\na,1\n").unwrap();
        assert!(assemble_with_labels(vec![v1], &labels(&[("a", "p")])).is_err());
        assert!(assemble_with_labels(vec![], &labels(&[])).is_err());
        let dup = vec![v.clone(), v];
        assert!(assemble_with_labels(dup, &labels(&[("a", "p"), ("b", "q")])).is_err());
    }

    #[test]
    fn four_balanced_classes_of_one_hundred() {
        let mut text = String::from("sample_id,f\n");
        let mut lab = BTreeMap::new();
        let classes = ["benign", "insitu", "invasive", "normal"];
        for i in 0..400 {
            text.push_str(&format!("img{i:03},{}\n", i as f64 * 0.5));
            lab.insert(format!("img{i:03}"), classes[i % 4].to_string());
        }
        let ds = assemble_with_labels(vec![view_from("v", &text).unwrap()], &lab).unwrap();
        assert_eq!(ds.n_samples(), 400);
        assert_eq!(ds.n_classes(), 4);
        for c in 0..4 {
            assert_eq!(ds.labels().iter().filter(|&&l| l == c).count(), 100);
        }
    }

    #[test]
    fn labels_file_format() {
        let l = read_labels("sample_id,label\na,x\nb,y\n".as_bytes(), "l").unwrap();
        assert_eq!(l.len(), 2);
        assert!(read_labels("id,label\na,x\n".as_bytes(), "l").is_err());
        assert!(read_labels("sample_id,label\na,x\na,y\n".as_bytes(), "l").is_err());
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.n_trees, 500);
        assert_eq!(cfg.train_fraction, 0.75);
        assert_eq!(cfg.n_repeats, 10);
        assert_eq!(cfg.c_grid, vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0]);
        cfg.validate().unwrap();

        let cfg =
            RunConfig::from_toml_str("n_trees = 50\nmtry = 3\nc_grid = [1.0, 10.0]\n").unwrap();
        assert_eq!(cfg.n_trees, 50);
        assert_eq!(cfg.mtry, Mtry::Count(3));
        assert_eq!(cfg.n_repeats, 10);
        let cfg = RunConfig::from_toml_str("mtry = \"sqrt\"\n").unwrap();
        assert_eq!(cfg.mtry, Mtry::Sqrt);

        assert!(RunConfig::from_toml_str("train_fraction = 1.0\n").is_err());
        assert!(RunConfig::from_toml_str("c_grid = []\n").is_err());
        assert!(RunConfig::from_toml_str("c_grid = [10.0, 1.0]\n").is_err());
        assert!(RunConfig::from_toml_str("c_grid = [0.0, 1.0]\n").is_err());
        assert!(RunConfig::from_toml_str("mtry = 0\n").is_err());
        assert!(RunConfig::from_toml_str("bogus = 1\n").is_err());
    }

    #[test]
    fn mtry_sqrt_floor() {
        assert_eq!(Mtry::Sqrt.resolve(1), 1);
        assert_eq!(Mtry::Sqrt.resolve(10), 3);
        assert_eq!(Mtry::Sqrt.resolve(16), 4);
        assert_eq!(Mtry::Sqrt.resolve(25088), 158);
        assert_eq!(Mtry::Count(7).resolve(100), 7);
    }
}
