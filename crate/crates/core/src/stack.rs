//! Tomographic slice-stack I/O.
//!
//! A stack is a directory of equally sized 2D images, one per z-slice,
//! ordered by natural numeric filename order. Exports are RGBA PNGs named
//! `slice_0000.png`, `slice_0001.png`, ... plus a `meta.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::volume::{Axis, Volume, Voxel};
use crate::{Error, Result, Vec3};

pub const META_FILE: &str = "meta.json";
const SLICE_PREFIX: &str = "slice_";

/// Contents of the `meta.json` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackMeta {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
}

impl StackMeta {
    pub fn of(volume: &Volume) -> Self {
        let s = volume.spacing();
        let o = volume.origin();
        StackMeta {
            dims: volume.dims(),
            spacing_mm: [s.x, s.y, s.z],
            origin_mm: [o.x, o.y, o.z],
        }
    }
}

fn is_slice_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "tif" | "tiff"))
            .unwrap_or(false)
}

/// Image files of a stack directory in slice order.
pub fn list_slices(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if is_slice_file(&path) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| {
        let a = a.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
        let b = b.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
        natord::compare(&a, &b)
    });
    Ok(files)
}

/// Loads a slice stack. Grayscale `g` becomes `(g, g, g, g)`; RGBA maps
/// channel-wise. The returned volume has origin zero and revision 0.
pub fn import_stack(dir: impl AsRef<Path>, spacing: Vec3) -> Result<Volume> {
    let dir = dir.as_ref();
    let files = list_slices(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyStack(dir.to_path_buf()));
    }

    let mut size = None;
    let mut voxels = Vec::new();
    for file in &files {
        let img = image::open(file).map_err(|source| Error::Image {
            file: file.clone(),
            source,
        })?;
        let (w, h) = (img.width(), img.height());
        let (ew, eh) = *size.get_or_insert((w, h));
        if (w, h) != (ew, eh) {
            return Err(Error::SliceDimensionMismatch {
                file: file.clone(),
                expected_w: ew,
                expected_h: eh,
                found_w: w,
                found_h: h,
            });
        }
        match img {
            DynamicImage::ImageLuma8(gray) => {
                voxels.extend(gray.pixels().map(|p| Voxel::gray(p.0[0])));
            }
            DynamicImage::ImageRgba8(rgba) => {
                voxels.extend(rgba.pixels().map(|p| Voxel::from_array(p.0)));
            }
            other => {
                return Err(Error::UnsupportedPixelFormat {
                    file: file.clone(),
                    format: format!("{:?}", other.color()),
                });
            }
        }
    }

    let (w, h) = size.expect("at least one slice");
    Volume::from_voxels([w as usize, h as usize, files.len()], spacing, voxels)
}

/// Loads a stack using spacing and origin from its `meta.json` when present,
/// falling back to `default_spacing` and a zero origin.
pub fn import_stack_with_meta(dir: impl AsRef<Path>, default_spacing: Vec3) -> Result<Volume> {
    let dir = dir.as_ref();
    match read_meta(dir)? {
        Some(meta) => {
            let volume = import_stack(dir, Vec3::from(meta.spacing_mm))?;
            Ok(volume.with_origin(Vec3::from(meta.origin_mm)))
        }
        None => import_stack(dir, default_spacing),
    }
}

pub fn read_meta(dir: impl AsRef<Path>) -> Result<Option<StackMeta>> {
    let path = dir.as_ref().join(META_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|source| Error::Json { path, source })
}

/// One axis-aligned slice as an RGBA image.
///
/// Image axes: z-slices are `nx` by `ny`, y-slices `nx` by `nz`, x-slices
/// `ny` by `nz`.
pub fn slice_image(volume: &Volume, axis: Axis, index: usize) -> Option<RgbaImage> {
    let [nx, ny, nz] = volume.dims();
    if index >= volume.dims()[axis.index()] {
        return None;
    }
    let voxels = volume.voxels();
    let at = |i: usize, j: usize, k: usize| voxels[i + nx * (j + ny * k)].to_array();
    let img = match axis {
        Axis::Z => RgbaImage::from_fn(nx as u32, ny as u32, |x, y| {
            image::Rgba(at(x as usize, y as usize, index))
        }),
        Axis::Y => RgbaImage::from_fn(nx as u32, nz as u32, |x, y| {
            image::Rgba(at(x as usize, index, y as usize))
        }),
        Axis::X => RgbaImage::from_fn(ny as u32, nz as u32, |x, y| {
            image::Rgba(at(index, x as usize, y as usize))
        }),
    };
    Some(img)
}

pub fn slice_file_name(k: usize) -> String {
    format!("{SLICE_PREFIX}{k:04}.png")
}

fn is_exported_slice(name: &str) -> bool {
    name.strip_prefix(SLICE_PREFIX)
        .and_then(|rest| rest.strip_suffix(".png"))
        .map(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
        .unwrap_or(false)
}

/// Writes `nz` RGBA PNG slices and `meta.json`, returning the slice count.
///
/// Stale `slice_NNNN.png` files from an earlier, deeper export are removed so
/// that re-importing the directory reproduces exactly this volume.
pub fn export_stack(volume: &Volume, dir: impl AsRef<Path>) -> Result<usize> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let stale = path
            .file_name()
            .and_then(|n| n.to_str())
            .map(is_exported_slice)
            .unwrap_or(false);
        if stale && path.is_file() {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }

    let nz = volume.dims()[2];
    for k in 0..nz {
        let path = dir.join(slice_file_name(k));
        let img = slice_image(volume, Axis::Z, k).expect("k < nz");
        img.save_with_format(&path, image::ImageFormat::Png)
            .map_err(|source| Error::Image { file: path, source })?;
    }

    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_string(&StackMeta::of(volume)).expect("meta serializes");
    fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))?;
    Ok(nz)
}
