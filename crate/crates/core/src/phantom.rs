//! Synthetic test volumes with known geometry.

use crate::volume::{Volume, Voxel};
use crate::{Result, Vec3};

/// Voxels with `k <= top_k` hold `voxel`, everything above is empty.
///
/// With a linear ramp between the top material layer and the first empty
/// layer, the iso-surface sits at voxel z `top_k + 1 - iso / alpha`.
pub fn half_space(dims: [usize; 3], spacing: Vec3, top_k: usize, voxel: Voxel) -> Result<Volume> {
    let [nx, ny, nz] = dims;
    let mut voxels = vec![Voxel::EMPTY; nx * ny * nz];
    let filled = (top_k + 1).min(nz) * nx * ny;
    voxels[..filled].fill(voxel);
    Volume::from_voxels(dims, spacing, voxels)
}

/// Anti-aliased solid sphere. Coverage falls off linearly over one voxel
/// across the surface, so a 0.5 iso-surface reproduces the analytic sphere.
/// `center` and `radius` are in voxel units.
pub fn sphere(dims: [usize; 3], spacing: Vec3, center: Vec3, radius: f64) -> Result<Volume> {
    let [nx, ny, nz] = dims;
    let mut voxels = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let d = (Vec3::new(i as f64, j as f64, k as f64) - center).norm();
                let coverage = (0.5 - (d - radius)).clamp(0.0, 1.0);
                voxels.push(Voxel::gray((coverage * 255.0).round() as u8));
            }
        }
    }
    Volume::from_voxels(dims, spacing, voxels)
}

/// Sphere centered in a cube of side `n`.
pub fn centered_sphere(n: usize, radius: f64) -> Result<Volume> {
    let c = (n as f64 - 1.0) / 2.0;
    sphere([n, n, n], Vec3::new(1.0, 1.0, 1.0), Vec3::new(c, c, c), radius)
}

/// One white voxel in the middle of an otherwise empty cube of side `n`.
pub fn single_voxel(n: usize) -> Result<Volume> {
    let mut voxels = vec![Voxel::EMPTY; n * n * n];
    let m = n / 2;
    voxels[m + n * (m + n * m)] = Voxel::WHITE;
    Volume::from_voxels([n, n, n], Vec3::new(1.0, 1.0, 1.0), voxels)
}
