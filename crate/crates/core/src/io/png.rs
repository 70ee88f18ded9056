//! PNG encodings of panoramas, probability maps, normal maps, label images
//! and per-view rasters.
//!
//! * probability: 8-bit grey, value = grey / 255
//! * normals: 8-bit RGB, channel `c` decodes to `c / 255 · 2 − 1`; `(0, 0, 0)` is nil
//! * labels: X red, Y green, Z blue, none black

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Rgb, RgbImage};

use crate::corners::{CornerCandidate, Hemisphere};
use crate::error::{Error, Result};
use crate::evaluation::{Label, LabeledImage};
use crate::geometry::{pixel_of, Dims, EquirectImage, PerspectiveImage, UnitVec3, Vec3};
use crate::lines::{Axis, GreatCircleSegment, VanishingBasis};
use crate::structural::{rasterize_arc, NormalMap, ProbabilityMap};

fn load(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

fn save(img: &DynamicImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

fn panorama_dims(w: u32, h: u32, path: &Path) -> Result<Dims> {
    Dims::new(h as usize, w as usize).map_err(|_| {
        Error::Format(format!(
            "{}: {w}x{h} is not an equirectangular panorama (width must be twice the height)",
            path.display()
        ))
    })
}

#[inline]
fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Grey panorama in `[0, 1]`; colour inputs are converted to luma.
pub fn read_panorama(path: &Path) -> Result<EquirectImage> {
    let img = load(path)?.into_luma16();
    let dims = panorama_dims(img.width(), img.height(), path)?;
    EquirectImage::new(
        dims,
        1,
        img.pixels().map(|p| p.0[0] as f32 / 65535.0).collect(),
    )
}

/// 8-bit grey (1 channel) or RGB (3 channels) panorama.
pub fn write_panorama(img: &EquirectImage, path: &Path) -> Result<()> {
    let (w, h) = (img.dims().cols as u32, img.dims().rows as u32);
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    let out = match img.channels() {
        1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("sizes match")),
        3 => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("sizes match")),
        _ => DynamicImage::ImageLuma8(
            GrayImage::from_raw(
                w,
                h,
                img.to_gray().data().iter().map(|&v| to_u8(v)).collect(),
            )
            .expect("sizes match"),
        ),
    };
    save(&out, path)
}

pub fn read_probability(path: &Path) -> Result<ProbabilityMap> {
    let img = load(path)?.into_luma16();
    let dims = panorama_dims(img.width(), img.height(), path)?;
    ProbabilityMap::new(
        dims,
        img.pixels().map(|p| p.0[0] as f32 / 65535.0).collect(),
    )
}

pub fn write_probability(m: &ProbabilityMap, path: &Path) -> Result<()> {
    let d = m.dims();
    let bytes = m.values().iter().map(|&v| to_u8(v)).collect();
    save(
        &DynamicImage::ImageLuma8(
            GrayImage::from_raw(d.cols as u32, d.rows as u32, bytes).expect("sizes match"),
        ),
        path,
    )
}

/// Normal encoded as RGB; nil is black.
pub fn encode_normal(n: Option<&Vec3>) -> [u8; 3] {
    match n {
        None => [0, 0, 0],
        Some(n) => [0, 1, 2].map(|k| (((n[k] + 1.0) / 2.0).clamp(0.0, 1.0) * 255.0).round() as u8),
    }
}

/// Raw decoded vector (not renormalized); black decodes to nil.
pub fn decode_normal(c: [u8; 3]) -> Option<Vec3> {
    if c == [0, 0, 0] {
        return None;
    }
    Some(Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) / 255.0 * 2.0 - Vec3::repeat(1.0))
}

fn decode_unit(c: [u8; 3]) -> Option<UnitVec3> {
    decode_normal(c)
        .filter(|v| v.norm() > 0.5)
        .map(UnitVec3::new_normalize)
}

pub fn read_normals(path: &Path) -> Result<NormalMap> {
    let img = load(path)?.into_rgb8();
    let dims = panorama_dims(img.width(), img.height(), path)?;
    NormalMap::new(dims, img.pixels().map(|p| decode_unit(p.0)).collect())
}

pub fn write_normals(m: &NormalMap, path: &Path) -> Result<()> {
    let d = m.dims();
    let bytes = m
        .normals()
        .iter()
        .flat_map(|n| encode_normal(n.as_ref().map(|u| u.as_ref())))
        .collect();
    save(
        &DynamicImage::ImageRgb8(
            RgbImage::from_raw(d.cols as u32, d.rows as u32, bytes).expect("sizes match"),
        ),
        path,
    )
}

pub fn label_colour(l: Label) -> [u8; 3] {
    match l {
        Label::X => [255, 0, 0],
        Label::Y => [0, 255, 0],
        Label::Z => [0, 0, 255],
        Label::None => [0, 0, 0],
    }
}

pub fn read_labels(path: &Path) -> Result<LabeledImage> {
    let img = load(path)?.into_rgb8();
    let dims = panorama_dims(img.width(), img.height(), path)?;
    let labels = img
        .pixels()
        .map(|p| match p.0 {
            [255, 0, 0] => Ok(Label::X),
            [0, 255, 0] => Ok(Label::Y),
            [0, 0, 255] => Ok(Label::Z),
            [0, 0, 0] => Ok(Label::None),
            c => Err(Error::Format(format!(
                "{}: colour {c:?} is not a label",
                path.display()
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledImage::from_labels(dims, labels)
}

pub fn write_labels(l: &LabeledImage, path: &Path) -> Result<()> {
    let d = l.dims();
    let bytes = l.labels().iter().flat_map(|&x| label_colour(x)).collect();
    save(
        &DynamicImage::ImageRgb8(
            RgbImage::from_raw(d.cols as u32, d.rows as u32, bytes).expect("sizes match"),
        ),
        path,
    )
}

fn square(w: u32, h: u32, path: &Path) -> Result<usize> {
    if w != h || w < 2 {
        return Err(Error::Format(format!(
            "{}: view raster must be square, got {w}x{h}",
            path.display()
        )));
    }
    Ok(w as usize)
}

/// Per-view image fed to the networks (grey or RGB).
pub fn write_view(img: &PerspectiveImage, path: &Path) -> Result<()> {
    let r = img.resolution as u32;
    let bytes: Vec<u8> = img.data.iter().map(|&v| to_u8(v)).collect();
    let out = match img.channels {
        3 => DynamicImage::ImageRgb8(RgbImage::from_raw(r, r, bytes).expect("sizes match")),
        1 => DynamicImage::ImageLuma8(GrayImage::from_raw(r, r, bytes).expect("sizes match")),
        c => return Err(Error::invalid(format!("cannot write a {c}-channel view"))),
    };
    save(&out, path)
}

/// Per-view probability raster (1 channel).
pub fn read_view_probability(path: &Path) -> Result<PerspectiveImage> {
    let img = load(path)?.into_luma16();
    let res = square(img.width(), img.height(), path)?;
    PerspectiveImage::new(
        res,
        1,
        img.pixels().map(|p| p.0[0] as f32 / 65535.0).collect(),
    )
}

pub fn write_view_probability(img: &PerspectiveImage, path: &Path) -> Result<()> {
    if img.channels != 1 {
        return Err(Error::invalid("probability views have one channel"));
    }
    write_view(img, path)
}

/// Per-view normal raster (3 channels, view frame); nil pixels decode to 0.
pub fn read_view_normals(path: &Path) -> Result<PerspectiveImage> {
    let img = load(path)?.into_rgb8();
    let res = square(img.width(), img.height(), path)?;
    let data = img
        .pixels()
        .flat_map(|p| {
            let v = decode_unit(p.0)
                .map(|u| u.into_inner())
                .unwrap_or_else(Vec3::zeros);
            [v.x as f32, v.y as f32, v.z as f32]
        })
        .collect();
    PerspectiveImage::new(res, 3, data)
}

pub fn write_view_normals(img: &PerspectiveImage, path: &Path) -> Result<()> {
    if img.channels != 3 {
        return Err(Error::invalid("normal views have three channels"));
    }
    let r = img.resolution as u32;
    let bytes = img
        .data
        .chunks(3)
        .flat_map(|c| {
            let v = Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64);
            encode_normal((v.norm() > 0.5).then_some(&v))
        })
        .collect();
    save(
        &DynamicImage::ImageRgb8(RgbImage::from_raw(r, r, bytes).expect("sizes match")),
        path,
    )
}

/// Panorama with lines drawn in their axis colour (unclassified yellow).
pub fn line_overlay(pano: &EquirectImage, lines: &[GreatCircleSegment]) -> RgbImage {
    let d = pano.dims();
    let grey = pano.to_gray();
    let mut out: RgbImage = ImageBuffer::from_fn(d.cols as u32, d.rows as u32, |x, y| {
        let v = to_u8(grey.get(y as usize, x as usize, 0) * 0.6);
        Rgb([v, v, v])
    });
    for l in lines {
        let colour = match l.axis {
            Axis::X => [255, 0, 0],
            Axis::Y => [0, 255, 0],
            Axis::Z => [0, 0, 255],
            Axis::Unclassified => [255, 255, 0],
        };
        for (r, c) in rasterize_arc(l, d) {
            out.put_pixel(c as u32, r as u32, Rgb(colour));
        }
    }
    out
}

pub fn write_line_overlay(
    pano: &EquirectImage,
    lines: &[GreatCircleSegment],
    path: &Path,
) -> Result<()> {
    save(&DynamicImage::ImageRgb8(line_overlay(pano, lines)), path)
}

/// Line overlay plus a cross at each corner: magenta above the horizon,
/// cyan below.
pub fn corner_overlay(
    pano: &EquirectImage,
    lines: &[GreatCircleSegment],
    corners: &[CornerCandidate],
    basis: &VanishingBasis,
) -> RgbImage {
    let mut out = line_overlay(pano, lines);
    let d = pano.dims();
    for c in corners {
        let colour = match c.hemisphere {
            Hemisphere::Ceiling => [255, 0, 255],
            Hemisphere::Floor => [0, 255, 255],
        };
        let (r, col) = pixel_of(&basis.to_world(&c.dir), d);
        for k in -3isize..=3 {
            let rr = (r as isize + k).clamp(0, d.rows as isize - 1) as usize;
            out.put_pixel(d.wrap_col(col as isize + k) as u32, r as u32, Rgb(colour));
            out.put_pixel(col as u32, rr as u32, Rgb(colour));
        }
    }
    out
}

pub fn write_corner_overlay(
    pano: &EquirectImage,
    lines: &[GreatCircleSegment],
    corners: &[CornerCandidate],
    basis: &VanishingBasis,
    path: &Path,
) -> Result<()> {
    save(
        &DynamicImage::ImageRgb8(corner_overlay(pano, lines, corners, basis)),
        path,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn label_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let dims = Dims::panorama(2);
        use Label::*;
        let l = LabeledImage::from_labels(dims, vec![X, Y, Z, None, Z, Z, Y, X]).unwrap();
        let p = dir.path().join("l.png");
        write_labels(&l, &p).unwrap();
        assert_eq!(read_labels(&p).unwrap(), l);
    }

    #[test]
    fn probability_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let dims = Dims::panorama(4);
        let m = ProbabilityMap::new(dims, (0..32).map(|i| i as f32 / 31.0).collect()).unwrap();
        let p = dir.path().join("m.png");
        write_probability(&m, &p).unwrap();
        let back = read_probability(&p).unwrap();
        for (a, b) in m.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn non_panorama_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sq.png");
        GrayImage::new(8, 8).save(&p).unwrap();
        assert!(matches!(read_panorama(&p), Err(Error::Format(_))));
        assert!(matches!(
            read_panorama(&dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn nil_normals_survive() {
        let dir = tempfile::tempdir().unwrap();
        let dims = Dims::panorama(1);
        let m = NormalMap::new(
            dims,
            vec![
                None,
                Some(UnitVec3::new_normalize(Vec3::new(0.0, 0.0, -1.0))),
            ],
        )
        .unwrap();
        let p = dir.path().join("n.png");
        write_normals(&m, &p).unwrap();
        let back = read_normals(&p).unwrap();
        assert!(back.get(0).is_none());
        assert!((back.get(1).unwrap().z + 1.0).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn normal_codec_error_is_within_one_level(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let v = Vec3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let n = v.normalize();
            let back = decode_normal(encode_normal(Some(&n))).unwrap();
            for k in 0..3 {
                prop_assert!((back[k] - n[k]).abs() <= 1.0 / 255.0 + 1e-12);
            }
            prop_assert!((back.norm() - 1.0).abs() <= 2.0 / 255.0);
        }
    }
}
