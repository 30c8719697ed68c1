//! Plot data export: one CSV per (point, curve) with local and global bands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::inference::CurveBand;
use crate::pipeline::ResultRecord;

pub const CURVES: [&str; 4] = ["co", "quad", "amplitude", "phase"];

pub const HEADER: &str = "omega,local_median,local_lo,local_hi,global_median,global_lo,global_hi";

fn curve<'a>(bands: &'a crate::inference::ConfidenceBands<f64>, name: &str) -> &'a CurveBand<f64> {
    match name {
        "co" => &bands.co,
        "quad" => &bands.quad,
        "amplitude" => &bands.amplitude,
        _ => &bands.phase,
    }
}

/// File-name friendly form of a point label, `"10::90"` → `"10-90"`.
pub fn label_slug(label: &str) -> String {
    label.replace("::", "-").replace('%', "")
}

/// CSV text of one panel.
pub fn panel_csv(record: &ResultRecord, point: usize, name: &str) -> Result<String> {
    let missing = || Error::Config("record has no bands; run with band settings".into());
    let local = record.points.get(point).ok_or_else(|| {
        Error::InvalidParameter(format!("point index {point} out of range"))
    })?;
    let local = local.bands.as_ref().ok_or_else(missing)?;
    let global = record.global.bands.as_ref().ok_or_else(missing)?;
    if !CURVES.contains(&name) {
        return Err(Error::InvalidParameter(format!("unknown curve '{name}'")));
    }
    let (l, g) = (curve(local, name), curve(global, name));
    let mut out = String::with_capacity(local.omega.len() * 120);
    out.push_str(HEADER);
    out.push('\n');
    for (i, omega) in local.omega.iter().enumerate() {
        writeln!(
            out,
            "{omega},{},{},{},{},{},{}",
            l.median[i], l.lower[i], l.upper[i], g.median[i], g.lower[i], g.upper[i]
        )
        .expect("writing to a string");
    }
    Ok(out)
}

/// Writes `<prefix>_<point>_<curve>.csv` for every point and curve; returns
/// the paths in write order.
pub fn write_panels(record: &ResultRecord, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (i, p) in record.points.iter().enumerate() {
        for name in CURVES {
            let path = dir.join(format!("{prefix}_{}_{name}.csv", label_slug(&p.label)));
            std::fs::write(&path, panel_csv(record, i, name)?).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}
