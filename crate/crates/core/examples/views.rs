//! Panorama geometry: pixel/ray conversion, golden-spiral view centres,
//! perspective projection and max-stitching.

use panolayout::geometry::{
    golden_spiral_directions, pixel_to_ray, project_to_view, ray_to_pixel, stitch_max,
    view_coverage, Dims, EquirectImage, PixelCoord, ViewSpec,
};

fn main() -> panolayout::error::Result<()> {
    let dims = Dims::panorama(128);
    let ray = pixel_to_ray(PixelCoord::new(32.0, 96.0), dims)?;
    let back = ray_to_pixel(&ray, dims)?;
    println!(
        "pixel (32, 96) -> ray {:.3?} -> pixel ({:.3}, {:.3})",
        ray.as_ref(),
        back.row,
        back.col
    );

    let centres = golden_spiral_directions(60)?;
    let views = centres
        .iter()
        .map(|&c| ViewSpec::new(c, 70.0, 96))
        .collect::<Result<Vec<_>, _>>()?;
    let cover = view_coverage(&views, dims)?;
    println!(
        "60 views cover every pixel: {} (min {} / max {} views per pixel)",
        cover.iter().all(|&n| n > 0),
        cover.iter().min().unwrap(),
        cover.iter().max().unwrap()
    );

    let pano = EquirectImage::from_fn(dims, 1, |row, _, _| (row % 16 == 0) as u8 as f32)?;
    let cut = views
        .iter()
        .map(|v| Ok((*v, project_to_view(&pano, v)?)))
        .collect::<panolayout::error::Result<Vec<_>>>()?;
    let stitched = stitch_max(&cut, dims)?;
    let lit = stitched.values().iter().filter(|&&v| v > 0.5).count();
    println!("stitched map: {lit} of {} pixels above 0.5", dims.len());
    Ok(())
}
