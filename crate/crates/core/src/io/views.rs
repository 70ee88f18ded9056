use std::path::Path;

use rayon::prelude::*;

use super::create_dir;
use super::json::{read_json, write_json, ModelIds, ViewBatchManifest, ViewEntry};
use super::png::{
    read_view_normals, read_view_probability, write_view, write_view_normals,
    write_view_probability,
};
use crate::error::{Error, Result};
use crate::geometry::{
    golden_spiral_directions, project_to_view, stitch_avg_normals, stitch_max, Dims, EquirectImage,
    PerspectiveImage, ViewSpec,
};
use crate::pipeline::ViewConfig;
use crate::structural::{NormalMap, ProbabilityMap};

/// Cut the panorama into golden-spiral views, write them as PNGs and the
/// manifest as `dir/views.json`.
pub fn write_view_batch(
    pano: &EquirectImage,
    cfg: &ViewConfig,
    dir: &Path,
) -> Result<ViewBatchManifest> {
    create_dir(dir)?;
    let views = golden_spiral_directions(cfg.count)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(ViewEntry {
                id: format!("view_{i:03}"),
                spec: ViewSpec::new(c, cfg.fov_deg, cfg.resolution)?,
                image: format!("view_{i:03}.png").into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    views
        .par_iter()
        .try_for_each(|v| write_view(&project_to_view(pano, &v.spec)?, &dir.join(&v.image)))?;
    let manifest = ViewBatchManifest {
        views,
        models: ModelIds::default(),
        output_dir: "maps".into(),
    };
    write_json(&manifest, &dir.join("views.json"))?;
    Ok(manifest)
}

/// Write per-view outputs cut from panorama-sized maps, in place of the
/// networks. Normals are rotated into each view's frame.
pub fn write_stub_outputs(
    manifest: &ViewBatchManifest,
    base: &Path,
    edge_map: &ProbabilityMap,
    normals: &NormalMap,
) -> Result<()> {
    manifest.validate()?;
    create_dir(&base.join(&manifest.output_dir))?;
    let edge = EquirectImage::new(edge_map.dims(), 1, edge_map.values().to_vec())?;
    let nm = EquirectImage::new(
        normals.dims(),
        3,
        normals
            .normals()
            .iter()
            .flat_map(|n| {
                n.map(|u| [u.x as f32, u.y as f32, u.z as f32])
                    .unwrap_or([0.0; 3])
            })
            .collect(),
    )?;
    manifest.views.par_iter().try_for_each(|v| {
        write_view_probability(
            &project_to_view(&edge, &v.spec)?,
            &manifest.edge_output(base, &v.id),
        )?;
        let world = project_to_view(&nm, &v.spec)?;
        let rot = v.spec.rotation();
        let data = world
            .data
            .chunks(3)
            .flat_map(|c| {
                let w = crate::geometry::Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64);
                if w.norm() < 0.5 {
                    return [0.0; 3];
                }
                let local = rot.inverse_transform_vector(&w.normalize());
                [local.x as f32, local.y as f32, local.z as f32]
            })
            .collect();
        write_view_normals(
            &PerspectiveImage::new(world.resolution, 3, data)?,
            &manifest.normal_output(base, &v.id),
        )
    })
}

/// Stitch whatever per-view outputs exist. Each kind must be present for
/// every view or for none.
pub fn load_view_maps(
    manifest_path: &Path,
    dims: Dims,
) -> Result<(Option<ProbabilityMap>, Option<NormalMap>)> {
    let manifest: ViewBatchManifest = read_json(manifest_path)?;
    manifest.validate()?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let edges = manifest
        .views
        .iter()
        .map(|v| (v, manifest.edge_output(base, &v.id)))
        .collect::<Vec<_>>();
    let normals = manifest
        .views
        .iter()
        .map(|v| (v, manifest.normal_output(base, &v.id)))
        .collect::<Vec<_>>();
    fn all_or_none<T>(
        files: &[(&ViewEntry, std::path::PathBuf)],
        read: impl Fn(&Path) -> Result<PerspectiveImage> + Sync,
        stitch: impl Fn(&[(ViewSpec, PerspectiveImage)]) -> Result<T>,
        kind: &str,
    ) -> Result<Option<T>> {
        let present = files.iter().filter(|(_, p)| p.exists()).count();
        if present == 0 {
            return Ok(None);
        }
        if present != files.len() {
            return Err(Error::Format(format!(
                "{present} of {} {kind} views present",
                files.len()
            )));
        }
        let views = files
            .par_iter()
            .map(|(v, p)| {
                let img = read(p)?;
                if img.resolution != v.spec.resolution {
                    return Err(Error::Format(format!(
                        "{}: resolution differs from the manifest",
                        p.display()
                    )));
                }
                Ok((v.spec, img))
            })
            .collect::<Result<Vec<_>>>()?;
        stitch(&views).map(Some)
    }
    Ok((
        all_or_none(
            &edges,
            read_view_probability,
            |v| stitch_max(v, dims),
            "edge",
        )?,
        all_or_none(
            &normals,
            read_view_normals,
            |v| stitch_avg_normals(v, dims),
            "normal",
        )?,
    ))
}
