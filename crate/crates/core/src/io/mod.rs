//! File formats: PNG rasters, versioned JSON documents, OBJ meshes, scene
//! directories and per-view batches.

mod json;
mod mesh;
mod png;
mod views;

pub use json::{
    from_json, read_json, to_json, write_json, CornersDoc, HypothesesDoc, LayoutDoc, LinesDoc,
    ModelIds, ReportDoc, SceneFiles, SceneManifest, TimingsDoc, ViewBatchManifest, ViewEntry,
    FORMAT_VERSION,
};
pub use mesh::{export_model, is_closed, layout_mesh, parse_obj, to_obj, Mesh};
pub use png::{
    corner_overlay, decode_normal, encode_normal, label_colour, line_overlay, read_labels,
    read_normals, read_panorama, read_probability, read_view_normals, read_view_probability,
    write_corner_overlay, write_labels, write_line_overlay, write_normals, write_panorama,
    write_probability, write_view, write_view_normals, write_view_probability,
};
pub use views::{load_view_maps, write_stub_outputs, write_view_batch};

use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::{InputPaths, PipelineInputs};
use crate::synthetic::{synthetic_inputs, SceneSpec};

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Load every input the paths name; the panorama is required.
pub fn load_inputs(paths: &InputPaths) -> Result<PipelineInputs> {
    let pano = paths
        .panorama
        .as_deref()
        .ok_or_else(|| Error::invalid("no panorama given"))?;
    Ok(PipelineInputs {
        panorama: read_panorama(pano)?,
        edge_map: paths
            .edge_map
            .as_deref()
            .map(read_probability)
            .transpose()?,
        normal_map: paths.normal_map.as_deref().map(read_normals).transpose()?,
        gt: paths.gt_labels.as_deref().map(read_labels).transpose()?,
    })
}

/// Render a synthetic scene into `dir`: panorama, edge map, normal map,
/// ground-truth labels, layout and a manifest tying them together.
pub fn write_scene(
    spec: &SceneSpec,
    rows: usize,
    edge_sigma_px: f64,
    dir: &Path,
) -> Result<SceneManifest> {
    let inputs = synthetic_inputs(spec, rows, edge_sigma_px)?;
    create_dir(dir)?;
    let files = SceneFiles {
        panorama: "panorama.png".into(),
        edge_map: "edge_map.png".into(),
        normal_map: "normals.png".into(),
        gt_labels: "gt_labels.png".into(),
        layout: "layout.json".into(),
    };
    write_panorama(&inputs.panorama, &dir.join(&files.panorama))?;
    if let Some(m) = &inputs.edge_map {
        write_probability(m, &dir.join(&files.edge_map))?;
    }
    if let Some(m) = &inputs.normal_map {
        write_normals(m, &dir.join(&files.normal_map))?;
    }
    if let Some(gt) = &inputs.gt {
        write_labels(gt, &dir.join(&files.gt_labels))?;
    }
    write_json(
        &LayoutDoc {
            layout: spec.layout(),
            score: None,
        },
        &dir.join(&files.layout),
    )?;
    let manifest = SceneManifest {
        spec: spec.clone(),
        rows,
        edge_sigma_px,
        files,
    };
    write_json(&manifest, &dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Input paths of a scene directory written by [`write_scene`].
pub fn scene_inputs(dir: &Path) -> Result<InputPaths> {
    let m: SceneManifest = read_json(&dir.join("manifest.json"))?;
    Ok(InputPaths {
        panorama: Some(dir.join(m.files.panorama)),
        edge_map: Some(dir.join(m.files.edge_map)),
        normal_map: Some(dir.join(m.files.normal_map)),
        gt_labels: Some(dir.join(m.files.gt_labels)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::eop;
    use crate::geometry::Dims;
    use crate::synthetic::generate_scene;

    #[test]
    fn scene_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec::random(6, 2, 4).unwrap();
        let m = write_scene(&spec, 64, 1.5, dir.path()).unwrap();
        assert_eq!(m.spec, spec);
        let inputs = load_inputs(&scene_inputs(dir.path()).unwrap()).unwrap();
        assert_eq!(inputs.panorama.dims(), Dims::panorama(64));
        let gt = generate_scene(&spec, Dims::panorama(64)).unwrap().labels;
        assert_eq!(
            eop(inputs.gt.as_ref().unwrap(), &gt).unwrap(),
            eop(&gt, &gt).unwrap()
        );
        let layout: LayoutDoc = read_json(&dir.path().join("layout.json")).unwrap();
        for (a, b) in layout.layout.polygon.iter().zip(&spec.polygon) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }
}
