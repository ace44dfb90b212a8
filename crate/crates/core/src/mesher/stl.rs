//! Binary STL: 80-byte header, little-endian u32 triangle count, then per
//! triangle a normal and three vertices as f32 followed by a u16 attribute.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::MeshModel;
use crate::{Error, Result};

pub const STL_HEADER_LEN: usize = 80;
const TRIANGLE_LEN: usize = 50;
const HEADER_TEXT: &[u8] = b"binary STL exported by morpho";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StlTriangle {
    pub normal: [f32; 3],
    pub vertices: [[f32; 3]; 3],
    pub attribute: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StlFile {
    pub header: [u8; STL_HEADER_LEN],
    pub triangles: Vec<StlTriangle>,
}

fn to_f32(v: &crate::Vec3) -> [f32; 3] {
    [v.x as f32, v.y as f32, v.z as f32]
}

/// Writes `mesh` as binary STL and returns the triangle count.
pub fn export_stl(mesh: &MeshModel, path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let count = u32::try_from(mesh.triangles.len()).map_err(|_| Error::InvalidStl {
        path: path.to_path_buf(),
        message: format!("{} triangles exceed the format limit", mesh.triangles.len()),
    })?;

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut header = [0u8; STL_HEADER_LEN];
    header[..HEADER_TEXT.len()].copy_from_slice(HEADER_TEXT);

    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        out.write_all(&header)?;
        out.write_all(&count.to_le_bytes())?;
        for (t, n) in mesh.triangles.iter().zip(&mesh.normals) {
            for x in to_f32(n) {
                out.write_all(&x.to_le_bytes())?;
            }
            for &v in t {
                for x in to_f32(&mesh.vertices[v as usize]) {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
            out.write_all(&0u16.to_le_bytes())?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))?;
    Ok(count as usize)
}

/// Parses a binary STL, checking that the size matches the declared count.
pub fn read_stl(path: impl AsRef<Path>) -> Result<StlFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let invalid = |message: String| Error::InvalidStl {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < STL_HEADER_LEN + 4 {
        return Err(invalid(format!("{} bytes is shorter than the preamble", bytes.len())));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = STL_HEADER_LEN + 4 + TRIANGLE_LEN * count;
    if bytes.len() != expected {
        return Err(invalid(format!(
            "{} bytes for {count} triangles, expected {expected}",
            bytes.len()
        )));
    }

    let f32_at = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let vec_at = |at: usize| [f32_at(at), f32_at(at + 4), f32_at(at + 8)];
    let triangles = (0..count)
        .map(|n| {
            let at = STL_HEADER_LEN + 4 + TRIANGLE_LEN * n;
            StlTriangle {
                normal: vec_at(at),
                vertices: [vec_at(at + 12), vec_at(at + 24), vec_at(at + 36)],
                attribute: u16::from_le_bytes(bytes[at + 48..at + 50].try_into().unwrap()),
            }
        })
        .collect();

    let mut header = [0u8; STL_HEADER_LEN];
    header.copy_from_slice(&bytes[..STL_HEADER_LEN]);
    Ok(StlFile { header, triangles })
}
