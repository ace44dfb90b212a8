//! Isosurface extraction and STL export.

mod cases;
mod stl;

use std::collections::HashMap;

pub use stl::{export_stl, read_stl, StlFile, StlTriangle, STL_HEADER_LEN};

use crate::volume::Volume;
use crate::Vec3;

/// Indexed triangle mesh in world millimeters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshModel {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// One unit normal per triangle, pointing from solid to empty.
    pub normals: Vec<Vec3>,
}

impl MeshModel {
    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    fn corners(&self, t: &[u32; 3]) -> [Vec3; 3] {
        t.map(|v| self.vertices[v as usize])
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = self.corners(t);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// Signed volume by the divergence theorem; positive for outward winding.
    pub fn enclosed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Number of triangles using each undirected edge.
    pub fn edge_uses(&self) -> HashMap<(u32, u32), usize> {
        let mut uses = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        uses
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        self.edge_uses().values().all(|&n| n == 2)
    }

    /// Every directed edge occurs once, so neighbors wind consistently.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                *directed.entry((t[e], t[(e + 1) % 3])).or_insert(0usize) += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// `V - E + F` over the vertices that triangles actually reference.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        let e = self.edge_uses().len() as i64;
        v - e + self.triangles.len() as i64
    }
}

/// Scalar field `a / 255` on the voxel grid, padded with one layer of zeros
/// on every side so surfaces touching the grid boundary still close.
struct PaddedField<'a> {
    volume: &'a Volume,
    dims: [i64; 3],
}

impl PaddedField<'_> {
    #[inline]
    fn value(&self, g: [i64; 3]) -> f64 {
        if (0..3).any(|a| g[a] < 0 || g[a] >= self.dims[a]) {
            return 0.0;
        }
        let [nx, ny, _] = self.dims;
        let at = g[0] + nx * (g[1] + ny * g[2]);
        f64::from(self.volume.voxels()[at as usize].a) / 255.0
    }

    fn world(&self, g: [i64; 3]) -> Vec3 {
        self.volume
            .voxel_to_world(&Vec3::new(g[0] as f64, g[1] as f64, g[2] as f64))
    }
}

/// Marching-cubes surface of the normalized alpha field at `isovalue`.
///
/// Samples at or above the isovalue count as solid. Edge crossings are placed
/// by linear interpolation, vertices are shared between neighboring cells,
/// and each cell polygon is fanned into triangles wound counter-clockwise
/// around the outward (solid to empty) normal.
pub fn polygonize(volume: &Volume, isovalue: f64) -> MeshModel {
    let dims = volume.dims().map(|n| n as i64);
    let field = PaddedField { volume, dims };
    let table = cases::table();

    // Padded grid spans -1..=n on each axis.
    let [px, py, _] = dims.map(|n| n + 2);
    let edge_key = |lower: [i64; 3], axis: usize| -> u64 {
        let [i, j, k] = lower.map(|c| c + 1);
        (((k * py + j) * px + i) as u64) * 3 + axis as u64
    };

    let mut mesh = MeshModel::default();
    let mut vertex_of: HashMap<u64, u32> = HashMap::new();
    let mut values = [0.0f64; 8];
    let mut cell_vertices = [0u32; 12];

    for ck in -1..dims[2] {
        for cj in -1..dims[1] {
            for ci in -1..dims[0] {
                let mut case = 0u8;
                for (c, value) in values.iter_mut().enumerate() {
                    let o = cases::corner_offset(c);
                    *value = field.value([ci + o[0] as i64, cj + o[1] as i64, ck + o[2] as i64]);
                    if *value >= isovalue {
                        case |= 1 << c;
                    }
                }
                let loops = &table[case as usize];
                if loops.is_empty() {
                    continue;
                }

                for l in loops {
                    for &e in l {
                        let (a, b) = cases::EDGES[e as usize];
                        let oa = cases::corner_offset(a);
                        let ob = cases::corner_offset(b);
                        let ga = [ci + oa[0] as i64, cj + oa[1] as i64, ck + oa[2] as i64];
                        let gb = [ci + ob[0] as i64, cj + ob[1] as i64, ck + ob[2] as i64];
                        let axis = (b - a).trailing_zeros() as usize;
                        let key = edge_key(ga, axis);
                        let id = *vertex_of.entry(key).or_insert_with(|| {
                            // Interpolate from the empty end toward the solid end.
                            let (ge, gs, ve, vs) = if values[a] >= isovalue {
                                (gb, ga, values[b], values[a])
                            } else {
                                (ga, gb, values[a], values[b])
                            };
                            let t = ((isovalue - ve) / (vs - ve)).clamp(0.0, 1.0);
                            let pe = field.world(ge);
                            let ps = field.world(gs);
                            mesh.vertices.push(pe + (ps - pe) * t);
                            (mesh.vertices.len() - 1) as u32
                        });
                        cell_vertices[e as usize] = id;
                    }
                    for w in 1..l.len() - 1 {
                        let tri = [
                            cell_vertices[l[0] as usize],
                            cell_vertices[l[w] as usize],
                            cell_vertices[l[w + 1] as usize],
                        ];
                        mesh.triangles.push(tri);
                    }
                }
            }
        }
    }

    mesh.normals = mesh
        .triangles
        .iter()
        .map(|t| triangle_normal(volume, mesh.corners(t)))
        .collect();
    mesh
}

fn triangle_normal(volume: &Volume, [a, b, c]: [Vec3; 3]) -> Vec3 {
    let n = (b - a).cross(&(c - a));
    let scale = (b - a).norm_squared().max((c - a).norm_squared());
    if n.norm() > 1e-12 * scale && n.norm() > 0.0 {
        return n.normalize();
    }
    // Degenerate triangle: fall back to the field's outward direction.
    let g = -volume.alpha_gradient(&((a + b + c) / 3.0));
    if g.norm() > 0.0 {
        g.normalize()
    } else {
        Vec3::z()
    }
}
