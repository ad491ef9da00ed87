use std::io;
use std::path::{Path, PathBuf};

use super::CausalSample;

/// Writes `x,y` rows for one sample.
pub fn write_scatterplot(path: &Path, sample: &CausalSample) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y"])?;
    for [x, y] in &sample.points {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()
}

/// Writes one CSV per sample plus a `manifest.csv` with `file,label` rows.
///
/// Returns the paths of the sample files in batch order.
pub fn write_minibatch(dir: &Path, samples: &[CausalSample]) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
    manifest.write_record(["file", "label"])?;
    let mut paths = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let name = format!("sample_{i:05}.csv");
        let path = dir.join(&name);
        write_scatterplot(&path, s)?;
        manifest.write_record([name, s.label.target().to_string()])?;
        paths.push(path);
    }
    manifest.flush()?;
    Ok(paths)
}
