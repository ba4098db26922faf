//! Fixation records grouped per image.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FixationRecord {
    pub image_id: String,
    pub subject_id: String,
    /// 1-based viewing order within the subject's scanpath.
    pub ordinal: u32,
    pub x: f64,
    pub y: f64,
    pub duration_ms: f64,
}

impl FixationRecord {
    /// Pixel the fixation falls in (floor binning).
    pub fn pixel(&self) -> (usize, usize) {
        (self.x.floor() as usize, self.y.floor() as usize)
    }
}

/// All fixations recorded on one image, sorted by `(subject_id, ordinal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSet {
    image_id: String,
    records: Vec<FixationRecord>,
}

impl FixationSet {
    pub fn new(image_id: impl Into<String>, mut records: Vec<FixationRecord>) -> Result<Self> {
        let image_id = image_id.into();
        if let Some(r) = records.iter().find(|r| r.image_id != image_id) {
            return Err(Error::argument(format!(
                "record for image '{}' in fixation set of '{image_id}'",
                r.image_id
            )));
        }
        for r in &records {
            if r.ordinal == 0 {
                return Err(Error::argument(format!(
                    "subject '{}' has ordinal 0; ordinals are 1-based",
                    r.subject_id
                )));
            }
            if !(r.duration_ms >= 0.0) {
                return Err(Error::argument(format!(
                    "negative duration for subject '{}' ordinal {}",
                    r.subject_id, r.ordinal
                )));
            }
            if !r.x.is_finite() || !r.y.is_finite() {
                return Err(Error::argument("non-finite fixation coordinate"));
            }
        }
        records.sort_by(|a, b| {
            a.subject_id
                .cmp(&b.subject_id)
                .then(a.ordinal.cmp(&b.ordinal))
        });
        if let Some(pair) = records
            .windows(2)
            .find(|p| p[0].subject_id == p[1].subject_id && p[0].ordinal == p[1].ordinal)
        {
            return Err(Error::argument(format!(
                "duplicate ordinal {} for subject '{}'",
                pair[0].ordinal, pair[0].subject_id
            )));
        }
        Ok(FixationSet { image_id, records })
    }

    /// Builds a set where each point is its own subject's fixation at `ordinal`.
    pub fn from_points(image_id: &str, points: &[(f64, f64)], ordinal: u32) -> Result<Self> {
        let records = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| FixationRecord {
                image_id: image_id.to_string(),
                subject_id: format!("s{i}"),
                ordinal,
                x,
                y,
                duration_ms: 0.0,
            })
            .collect();
        Self::new(image_id, records)
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn records(&self) -> &[FixationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks that every fixation lies inside a `width x height` image.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        for r in &self.records {
            if !(r.x >= 0.0 && r.x < width as f64 && r.y >= 0.0 && r.y < height as f64) {
                return Err(Error::argument(format!(
                    "coordinate out of range: subject '{}' ordinal {} at ({}, {}) for a {width}x{height} image",
                    r.subject_id, r.ordinal, r.x, r.y
                )));
            }
        }
        Ok(())
    }

    /// Fixations kept for analysis. With `drop_first`, each subject's earliest
    /// fixation is removed.
    pub fn retained(&self, drop_first: bool) -> Vec<&FixationRecord> {
        let mut out = Vec::with_capacity(self.records.len());
        let mut prev_subject: Option<&str> = None;
        for r in &self.records {
            let first = prev_subject != Some(r.subject_id.as_str());
            prev_subject = Some(&r.subject_id);
            if !(drop_first && first) {
                out.push(r);
            }
        }
        out
    }

    /// Floor-binned pixels of the retained fixations, one entry per fixation.
    pub fn retained_pixels(&self, drop_first: bool) -> Vec<(usize, usize)> {
        self.retained(drop_first)
            .iter()
            .map(|r| r.pixel())
            .collect()
    }

    /// Returns a copy with the records of `other` appended.
    pub fn merged(&self, other: &FixationSet) -> Result<FixationSet> {
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        FixationSet::new(self.image_id.clone(), records)
    }
}

/// Groups records by image id, ordered by id.
pub fn group_by_image(records: Vec<FixationRecord>) -> Result<Vec<FixationSet>> {
    let mut groups: BTreeMap<String, Vec<FixationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.image_id.clone()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(id, rs)| FixationSet::new(id, rs))
        .collect()
}
