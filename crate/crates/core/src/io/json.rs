//! Versioned JSON documents. Every document carries `format_version` at
//! its top level.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corners::CornerCandidate;
use crate::error::{Error, Result};
use crate::geometry::ViewSpec;
use crate::hypotheses::LayoutModel;
use crate::lines::{GreatCircleSegment, VanishingBasis};
use crate::pipeline::{RunReport, StageTimings};
use crate::synthetic::SceneSpec;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Versioned<T> {
    format_version: u32,
    #[serde(flatten)]
    body: T,
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Versioned {
        format_version: FORMAT_VERSION,
        body: doc,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    #[derive(Deserialize)]
    struct Header {
        format_version: Option<u32>,
    }
    let header: Header = serde_json::from_str(text)?;
    match header.format_version {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(Error::Format(format!("unsupported format_version {v}"))),
        None => return Err(Error::Format("missing format_version".into())),
    }
    Ok(serde_json::from_str::<Versioned<T>>(text)?.body)
}

pub fn write_json<T: Serialize>(doc: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(doc)?).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json(&text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Output of the `lines` stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinesDoc {
    pub basis: VanishingBasis,
    /// Classified lines (the ones later stages use).
    pub segments: Vec<GreatCircleSegment>,
    /// Every fitted line, classified or not.
    #[serde(default)]
    pub all_segments: Vec<GreatCircleSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornersDoc {
    pub basis: VanishingBasis,
    pub corners: Vec<CornerCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesesDoc {
    pub basis: VanishingBasis,
    pub hypotheses: Vec<LayoutModel>,
}

/// The selected layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDoc {
    pub layout: LayoutModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Files of a synthetic scene directory, relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFiles {
    pub panorama: PathBuf,
    pub edge_map: PathBuf,
    pub normal_map: PathBuf,
    pub gt_labels: PathBuf,
    pub layout: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub spec: SceneSpec,
    pub rows: usize,
    pub edge_sigma_px: f64,
    pub files: SceneFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingsDoc {
    pub timings: StageTimings,
}

/// One perspective view handed to the networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub id: String,
    #[serde(flatten)]
    pub spec: ViewSpec,
    /// Input image, relative to the manifest.
    pub image: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelIds {
    #[serde(default)]
    pub edge: Option<String>,
    #[serde(default)]
    pub normal: Option<String>,
}

/// Batch of views for per-view inference. Outputs are expected in
/// `output_dir` as `<id>_edge.png` and `<id>_normal.png`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewBatchManifest {
    pub views: Vec<ViewEntry>,
    #[serde(default)]
    pub models: ModelIds,
    pub output_dir: PathBuf,
}

impl ViewBatchManifest {
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for v in &self.views {
            if !ids.insert(&v.id) {
                return Err(Error::Format(format!("duplicate view id {}", v.id)));
            }
            v.spec.validate()?;
        }
        if self.views.is_empty() {
            return Err(Error::Format("manifest lists no views".into()));
        }
        Ok(())
    }

    pub fn edge_output(&self, base: &Path, id: &str) -> PathBuf {
        base.join(&self.output_dir).join(format!("{id}_edge.png"))
    }

    pub fn normal_output(&self, base: &Path, id: &str) -> PathBuf {
        base.join(&self.output_dir).join(format!("{id}_normal.png"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::rectangle;

    #[test]
    fn version_is_written_and_checked() {
        let doc = LayoutDoc {
            layout: rectangle(-1.0, 1.0, -1.0, 1.0, 1.0),
            score: Some(0.5),
        };
        let text = to_json(&doc).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(from_json::<LayoutDoc>(&text).unwrap(), doc);
        let bumped = text.replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(
            from_json::<LayoutDoc>(&bumped),
            Err(Error::Format(_))
        ));
        let missing = text.replace("\"format_version\": 1,", "");
        assert!(matches!(
            from_json::<LayoutDoc>(&missing),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn manifest_rejects_duplicate_ids() {
        let spec = ViewSpec::new(nalgebra::Vector3::x_axis(), 70.0, 16).unwrap();
        let entry = ViewEntry {
            id: "v0".into(),
            spec,
            image: "v0.png".into(),
        };
        let mut m = ViewBatchManifest {
            views: vec![entry.clone(), entry],
            models: ModelIds::default(),
            output_dir: "out".into(),
        };
        assert!(m.validate().is_err());
        m.views[1].id = "v1".into();
        m.validate().unwrap();
        let back: ViewBatchManifest = from_json(&to_json(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
