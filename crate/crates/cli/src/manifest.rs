//! Manifest CSV: one row per image with optional contour and label inputs.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const MANIFEST_HEADER: [&str; 5] = [
    "image_id",
    "image_path",
    "contour_path",
    "labels_path",
    "fixations",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub image_id: String,
    pub image_path: PathBuf,
    pub contour_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    /// Whether fixation logs cover this image.
    pub has_fixations: bool,
}

impl ManifestRow {
    /// The first referenced input that does not exist.
    pub fn missing_input(&self) -> Option<&Path> {
        std::iter::once(self.image_path.as_path())
            .chain(self.contour_path.as_deref())
            .chain(self.labels_path.as_deref())
            .find(|p| !p.exists())
    }
}

fn parse_flag(value: &str, line: u64) -> Result<bool, CliError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" | "" => Ok(false),
        other => Err(CliError::Input(format!(
            "manifest line {line}: fixations flag must be true or false, got {other:?}"
        ))),
    }
}

/// Parses manifest text. Relative paths are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Input(format!("manifest header: {e}")))?;
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(CliError::Input(format!(
            "manifest header must be {}",
            MANIFEST_HEADER.join(",")
        )));
    }
    let resolve =
        |field: &str| -> Option<PathBuf> { (!field.is_empty()).then(|| base.join(field)) };
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("manifest: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let image_id = record[0].to_string();
        if image_id.is_empty() {
            return Err(CliError::Input(format!(
                "manifest line {line}: empty image_id"
            )));
        }
        if !seen.insert(image_id.clone()) {
            return Err(CliError::Input(format!(
                "manifest line {line}: duplicate image_id {image_id}"
            )));
        }
        let image_path = resolve(&record[1]).ok_or_else(|| {
            CliError::Input(format!("manifest line {line}: image_path is required"))
        })?;
        rows.push(ManifestRow {
            image_id,
            image_path,
            contour_path: resolve(&record[2]),
            labels_path: resolve(&record[3]),
            has_fixations: parse_flag(&record[4], line)?,
        });
    }
    Ok(rows)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}
