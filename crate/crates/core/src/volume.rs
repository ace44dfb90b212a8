//! Dense RGBA voxel volume with physical spacing and a world transform.
//!
//! Voxels are stored x-fastest: the voxel at `(i, j, k)` lives at
//! `i + nx * (j + ny * k)`. World coordinates are millimeters, and the
//! origin is the world position of the *center* of voxel `(0, 0, 0)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

/// One RGBA voxel, 8 bits per channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(C)]
pub struct Voxel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Voxel {
    pub const EMPTY: Voxel = Voxel::new(0, 0, 0, 0);
    pub const WHITE: Voxel = Voxel::new(255, 255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8, a: u8) -> Self {
        Voxel { r, g, b, a }
    }

    /// Grayscale value `g` as `(g, g, g, g)`: alpha doubles as radiodensity.
    pub const fn gray(g: u8) -> Self {
        Voxel::new(g, g, g, g)
    }

    /// A voxel is removed (or was never material) when all four channels are zero.
    pub fn is_empty(self) -> bool {
        self == Voxel::EMPTY
    }

    pub fn alpha(self) -> f64 {
        f64::from(self.a) / 255.0
    }

    pub fn to_array(self) -> [u8; 4] {
        [self.r, self.g, self.b, self.a]
    }

    pub fn from_array(c: [u8; 4]) -> Self {
        Voxel::new(c[0], c[1], c[2], c[3])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl VoxelIndex {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        VoxelIndex { i, j, k }
    }
}

/// Slice axis of a volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: Vec3,
    origin: Vec3,
    voxels: Vec<Voxel>,
    revision: u64,
}

impl Volume {
    /// An all-empty volume.
    pub fn new(dims: [usize; 3], spacing: Vec3) -> Result<Self> {
        Self::filled(dims, spacing, Voxel::EMPTY)
    }

    pub fn filled(dims: [usize; 3], spacing: Vec3, voxel: Voxel) -> Result<Self> {
        let len = checked_len(dims)?;
        Self::from_voxels(dims, spacing, vec![voxel; len])
    }

    pub fn from_voxels(dims: [usize; 3], spacing: Vec3, voxels: Vec<Voxel>) -> Result<Self> {
        let len = checked_len(dims)?;
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidVolume(format!(
                "spacing must be finite and positive, got ({}, {}, {})",
                spacing.x, spacing.y, spacing.z
            )));
        }
        if voxels.len() != len {
            return Err(Error::InvalidVolume(format!(
                "{} voxels supplied for dims {:?} ({} expected)",
                voxels.len(),
                dims,
                len
            )));
        }
        Ok(Volume {
            dims,
            spacing,
            origin: Vec3::zeros(),
            voxels,
            revision: 0,
        })
    }

    pub fn with_origin(mut self, origin: Vec3) -> Self {
        self.origin = origin;
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.min()
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn voxels(&self) -> &[Voxel] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn contains(&self, idx: VoxelIndex) -> bool {
        idx.i < self.dims[0] && idx.j < self.dims[1] && idx.k < self.dims[2]
    }

    #[inline]
    pub fn linear_index(&self, idx: VoxelIndex) -> usize {
        idx.i + self.dims[0] * (idx.j + self.dims[1] * idx.k)
    }

    pub fn index_of(&self, linear: usize) -> VoxelIndex {
        let [nx, ny, _] = self.dims;
        VoxelIndex::new(linear % nx, (linear / nx) % ny, linear / (nx * ny))
    }

    /// Panics if `idx` lies outside the volume.
    #[inline]
    pub fn get(&self, idx: VoxelIndex) -> Voxel {
        assert!(self.contains(idx), "voxel {idx:?} outside dims {:?}", self.dims);
        self.voxels[self.linear_index(idx)]
    }

    pub fn try_get(&self, idx: VoxelIndex) -> Option<Voxel> {
        self.contains(idx).then(|| self.voxels[self.linear_index(idx)])
    }

    /// Overwrites one voxel. Returns `false` (and leaves the revision alone)
    /// when the index is out of range or the value is unchanged.
    pub fn set(&mut self, idx: VoxelIndex, voxel: Voxel) -> bool {
        if !self.contains(idx) {
            return false;
        }
        let at = self.linear_index(idx);
        if self.voxels[at] == voxel {
            return false;
        }
        self.voxels[at] = voxel;
        self.revision += 1;
        true
    }

    /// Raw mutable access for bulk edits. The caller must call
    /// [`Volume::bump_revision`] once if anything changed.
    pub(crate) fn voxels_mut(&mut self) -> &mut [Voxel] {
        &mut self.voxels
    }

    pub(crate) fn bump_revision(&mut self) {
        self.revision += 1;
    }

    /// Continuous voxel coordinates of a world point.
    pub fn world_to_voxel(&self, p: &Vec3) -> Vec3 {
        (p - self.origin).component_div(&self.spacing)
    }

    pub fn voxel_to_world(&self, c: &Vec3) -> Vec3 {
        self.origin + c.component_mul(&self.spacing)
    }

    pub fn voxel_center(&self, idx: VoxelIndex) -> Vec3 {
        self.voxel_to_world(&Vec3::new(idx.i as f64, idx.j as f64, idx.k as f64))
    }

    /// World-space bounding box of the voxel centers.
    pub fn center_bounds(&self) -> (Vec3, Vec3) {
        let hi = Vec3::new(
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        );
        (self.origin, self.voxel_to_world(&hi))
    }

    #[inline]
    fn alpha_at(&self, i: usize, j: usize, k: usize) -> f64 {
        f64::from(self.voxels[i + self.dims[0] * (j + self.dims[1] * k)].a) / 255.0
    }

    /// Trilinear interpolation of normalized alpha over the eight surrounding
    /// voxel centers. Zero outside the voxel-center bounding box.
    pub fn sample_alpha(&self, p: &Vec3) -> f64 {
        let c = self.world_to_voxel(p);
        let mut base = [0usize; 3];
        let mut next = [0usize; 3];
        let mut t = [0.0f64; 3];
        for axis in 0..3 {
            let n = self.dims[axis];
            let x = c[axis];
            // NaN fails both comparisons and lands here too.
            if !(x >= 0.0 && x <= (n - 1) as f64) {
                return 0.0;
            }
            let b = if n == 1 { 0 } else { (x.floor() as usize).min(n - 2) };
            base[axis] = b;
            next[axis] = (b + 1).min(n - 1);
            t[axis] = x - b as f64;
        }
        let [x0, y0, z0] = base;
        let [x1, y1, z1] = next;
        let [tx, ty, tz] = t;

        let c00 = lerp(self.alpha_at(x0, y0, z0), self.alpha_at(x1, y0, z0), tx);
        let c10 = lerp(self.alpha_at(x0, y1, z0), self.alpha_at(x1, y1, z0), tx);
        let c01 = lerp(self.alpha_at(x0, y0, z1), self.alpha_at(x1, y0, z1), tx);
        let c11 = lerp(self.alpha_at(x0, y1, z1), self.alpha_at(x1, y1, z1), tx);
        let c0 = lerp(c00, c10, ty);
        let c1 = lerp(c01, c11, ty);
        lerp(c0, c1, tz)
    }

    /// Central-difference gradient of [`Volume::sample_alpha`], step half a
    /// voxel along each axis.
    pub fn alpha_gradient(&self, p: &Vec3) -> Vec3 {
        let mut g = Vec3::zeros();
        for axis in 0..3 {
            let h = 0.5 * self.spacing[axis];
            let mut fwd = *p;
            let mut back = *p;
            fwd[axis] += h;
            back[axis] -= h;
            g[axis] = (self.sample_alpha(&fwd) - self.sample_alpha(&back)) / (2.0 * h);
        }
        g
    }

    /// Inclusive index range of voxel centers that can lie within `radius`
    /// of `center`, or `None` if the box misses the grid.
    pub fn index_box(&self, center: &Vec3, radius: f64) -> Option<(VoxelIndex, VoxelIndex)> {
        let c = self.world_to_voxel(center);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for axis in 0..3 {
            let r = radius / self.spacing[axis];
            let min = (c[axis] - r).ceil();
            let max = (c[axis] + r).floor();
            let last = (self.dims[axis] - 1) as f64;
            if !(min <= last && max >= 0.0) || min > max {
                return None;
            }
            lo[axis] = min.max(0.0) as usize;
            hi[axis] = max.min(last) as usize;
        }
        Some((
            VoxelIndex::new(lo[0], lo[1], lo[2]),
            VoxelIndex::new(hi[0], hi[1], hi[2]),
        ))
    }

    /// Calls `f` for every voxel whose center lies within Euclidean distance
    /// `radius` of `center` (boundary inclusive).
    pub fn for_each_in_sphere(&self, center: &Vec3, radius: f64, mut f: impl FnMut(VoxelIndex, usize)) {
        let Some((lo, hi)) = self.index_box(center, radius) else {
            return;
        };
        let r2 = radius * radius;
        for k in lo.k..=hi.k {
            for j in lo.j..=hi.j {
                for i in lo.i..=hi.i {
                    let idx = VoxelIndex::new(i, j, k);
                    if (self.voxel_center(idx) - center).norm_squared() <= r2 {
                        f(idx, self.linear_index(idx));
                    }
                }
            }
        }
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn checked_len(dims: [usize; 3]) -> Result<usize> {
    if dims.contains(&0) {
        return Err(Error::InvalidVolume(format!("dims must be >= 1, got {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::InvalidVolume(format!("dims {dims:?} overflow")))
}
