//! On-disk bundle layout.
//!
//! ```text
//! <dir>/manifest.csv                      class_id,image_id,file
//! <dir>/class_<k>/features.csv            f0..f{L-1}, one row per image
//! <dir>/class_<k>/features_object.csv     same shape
//! <dir>/class_<k>/features_context.csv    same shape
//! <dir>/class_<k>/logodds.csv             class_0..class_{K-1}
//! ```
//!
//! Rows of the class files follow the order of that class's manifest rows.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{FeatureBundle, ScoreError};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const FEATURE_FILES: [&str; 3] = [
    "features.csv",
    "features_object.csv",
    "features_context.csv",
];
const LOGODDS_FILE: &str = "logodds.csv";

/// Everything read from a bundle directory.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSet {
    pub bundles: Vec<FeatureBundle>,
    /// Full log odds matrix (`m x K`) per bundle, same order as `bundles`.
    pub logodds: Vec<Array2<f64>>,
    /// Image ids per bundle, in row order.
    pub image_ids: Vec<Vec<String>>,
    /// Manifest `file` column per bundle.
    pub files: Vec<Vec<String>>,
}

impl BundleSet {
    /// Log odds of every distinct image (first occurrence wins), for relation scoring.
    pub fn relation_logodds(&self) -> Result<Array2<f64>, ScoreError> {
        let k = self.logodds.iter().map(|m| m.ncols()).min().unwrap_or(0);
        if self.logodds.iter().any(|m| m.ncols() != k) {
            return Err(ScoreError::InvalidBundle(
                "log odds widths differ between classes".into(),
            ));
        }
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        for (ids, m) in self.image_ids.iter().zip(&self.logodds) {
            for (id, row) in ids.iter().zip(m.rows()) {
                if seen.insert(id.clone()) {
                    rows.extend(row.iter().copied());
                }
            }
        }
        let n = rows.len() / k.max(1);
        Array2::from_shape_vec((n, k), rows).map_err(|e| ScoreError::InvalidBundle(e.to_string()))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScoreError + '_ {
    move |source| ScoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> ScoreError {
    ScoreError::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn class_dir(dir: &Path, class_id: usize) -> PathBuf {
    dir.join(format!("class_{class_id}"))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, ScoreError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file))
}

/// Reads a numeric matrix whose header must be `{prefix}0..{prefix}{n-1}`.
fn read_matrix(path: &Path, prefix: &str) -> Result<Array2<f64>, ScoreError> {
    let mut rdr = reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .clone();
    for (i, h) in header.iter().enumerate() {
        if h != format!("{prefix}{i}") {
            return Err(format_err(
                path,
                format!("header column {} is `{h}`, expected `{prefix}{i}`", i + 1),
            ));
        }
    }
    let width = header.len();
    if width == 0 {
        return Err(format_err(path, "empty header"));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                format_err(
                    path,
                    format!("row {}, column {}: `{field}` is not a number", r + 2, c + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(format_err(
                    path,
                    format!("row {}, column {}: non-finite value", r + 2, c + 1),
                ));
            }
            values.push(v);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, width), values).map_err(|e| format_err(path, e.to_string()))
}

struct ManifestRow {
    class_id: usize,
    image_id: String,
    file: String,
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, ScoreError> {
    let mut rdr = reader(path)?;
    let header = rdr
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["class_id", "image_id", "file"] {
        return Err(format_err(path, "header must be `class_id,image_id,file`"));
    }
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format_err(path, e.to_string()))?;
        let class_id = rec[0].trim().parse().map_err(|_| {
            format_err(
                path,
                format!("row {}: class_id `{}` is not an integer", r + 2, &rec[0]),
            )
        })?;
        out.push(ManifestRow {
            class_id,
            image_id: rec[1].to_string(),
            file: rec[2].to_string(),
        });
    }
    Ok(out)
}

/// Loads every class listed in `<dir>/manifest.csv`, in ascending class order.
pub fn load_bundles(dir: &Path) -> Result<BundleSet, ScoreError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut by_class: BTreeMap<usize, Vec<ManifestRow>> = BTreeMap::new();
    for row in read_manifest(&manifest_path)? {
        by_class.entry(row.class_id).or_default().push(row);
    }
    if by_class.is_empty() {
        return Err(format_err(&manifest_path, "no rows"));
    }
    let mut set = BundleSet {
        bundles: Vec::new(),
        logodds: Vec::new(),
        image_ids: Vec::new(),
        files: Vec::new(),
    };
    for (class_id, rows) in by_class {
        let cdir = class_dir(dir, class_id);
        let mut mats = Vec::with_capacity(3);
        for name in FEATURE_FILES {
            let path = cdir.join(name);
            let m = read_matrix(&path, "f")?;
            if m.nrows() != rows.len() {
                return Err(format_err(
                    &path,
                    format!("{} rows but the manifest lists {}", m.nrows(), rows.len()),
                ));
            }
            mats.push(m);
        }
        let lpath = cdir.join(LOGODDS_FILE);
        let logodds = read_matrix(&lpath, "class_")?;
        if logodds.nrows() != rows.len() {
            return Err(format_err(
                &lpath,
                format!(
                    "{} rows but the manifest lists {}",
                    logodds.nrows(),
                    rows.len()
                ),
            ));
        }
        if class_id >= logodds.ncols() {
            return Err(format_err(
                &lpath,
                format!("no column for class {class_id}"),
            ));
        }
        let c = logodds.column(class_id).to_vec();
        let f_context = mats.pop().expect("three matrices");
        let f_object = mats.pop().expect("three matrices");
        let f = mats.pop().expect("three matrices");
        set.bundles
            .push(FeatureBundle::new(class_id, f, f_object, f_context, c)?);
        set.logodds.push(logodds);
        set.image_ids
            .push(rows.iter().map(|r| r.image_id.clone()).collect());
        set.files.push(rows.into_iter().map(|r| r.file).collect());
    }
    Ok(set)
}

fn matrix_csv(m: &Array2<f64>, prefix: &str) -> String {
    let mut out = (0..m.ncols())
        .map(|i| format!("{prefix}{i}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in m.rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), ScoreError> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// Writes `set` in the layout read by [`load_bundles`].
pub fn write_bundles(dir: &Path, set: &BundleSet) -> Result<(), ScoreError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = String::from("class_id,image_id,file\n");
    for (i, b) in set.bundles.iter().enumerate() {
        let cdir = class_dir(dir, b.class_id);
        std::fs::create_dir_all(&cdir).map_err(io_err(&cdir))?;
        for (name, m) in FEATURE_FILES.iter().zip([&b.f, &b.f_object, &b.f_context]) {
            write_file(&cdir.join(name), &matrix_csv(m, "f"))?;
        }
        write_file(
            &cdir.join(LOGODDS_FILE),
            &matrix_csv(&set.logodds[i], "class_"),
        )?;
        for (id, file) in set.image_ids[i].iter().zip(&set.files[i]) {
            writeln!(manifest, "{},{id},{file}", b.class_id).expect("write to string");
        }
    }
    write_file(&dir.join(MANIFEST_FILE), &manifest)
}
