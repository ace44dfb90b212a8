//! Subtractive sculpting: voxels under the probe sphere are zeroed and the
//! touched bounds are reported so renderers and meshers can update
//! incrementally.

use crate::haptics::ProbeState;
use crate::volume::{Volume, Voxel, VoxelIndex};
use crate::Vec3;

/// Inclusive voxel bounds of an edit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DirtyRegion {
    pub lo: VoxelIndex,
    pub hi: VoxelIndex,
    /// Volume revision after the edit was applied.
    pub revision_after: u64,
}

impl DirtyRegion {
    pub fn contains(&self, idx: VoxelIndex) -> bool {
        (self.lo.i..=self.hi.i).contains(&idx.i)
            && (self.lo.j..=self.hi.j).contains(&idx.j)
            && (self.lo.k..=self.hi.k).contains(&idx.k)
    }

    pub fn voxel_count(&self) -> usize {
        (self.hi.i - self.lo.i + 1) * (self.hi.j - self.lo.j + 1) * (self.hi.k - self.lo.k + 1)
    }

    /// Smallest region covering both; keeps the later revision.
    pub fn union(&self, other: &DirtyRegion) -> DirtyRegion {
        DirtyRegion {
            lo: VoxelIndex::new(
                self.lo.i.min(other.lo.i),
                self.lo.j.min(other.lo.j),
                self.lo.k.min(other.lo.k),
            ),
            hi: VoxelIndex::new(
                self.hi.i.max(other.hi.i),
                self.hi.j.max(other.hi.j),
                self.hi.k.max(other.hi.k),
            ),
            revision_after: self.revision_after.max(other.revision_after),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CarveReport {
    pub zeroed_count: usize,
    pub region: Option<DirtyRegion>,
}

impl CarveReport {
    pub fn is_noop(&self) -> bool {
        self.zeroed_count == 0
    }
}

/// Zeroes every voxel whose center lies within `radius` of `center`.
///
/// Voxels that are already empty are not counted. The revision advances by
/// exactly one when anything changed.
pub fn carve(volume: &mut Volume, center: &Vec3, radius: f64) -> CarveReport {
    if radius <= 0.0 || radius.is_nan() {
        return CarveReport::default();
    }
    let mut touched = Vec::new();
    volume.for_each_in_sphere(center, radius, |idx, at| touched.push((idx, at)));

    let voxels = volume.voxels_mut();
    let mut zeroed = 0usize;
    let mut bounds: Option<(VoxelIndex, VoxelIndex)> = None;
    for (idx, at) in touched {
        if voxels[at].is_empty() {
            continue;
        }
        voxels[at] = Voxel::EMPTY;
        zeroed += 1;
        bounds = Some(match bounds {
            None => (idx, idx),
            Some((lo, hi)) => (
                VoxelIndex::new(lo.i.min(idx.i), lo.j.min(idx.j), lo.k.min(idx.k)),
                VoxelIndex::new(hi.i.max(idx.i), hi.j.max(idx.j), hi.k.max(idx.k)),
            ),
        });
    }

    match bounds {
        None => CarveReport::default(),
        Some((lo, hi)) => {
            volume.bump_revision();
            CarveReport {
                zeroed_count: zeroed,
                region: Some(DirtyRegion {
                    lo,
                    hi,
                    revision_after: volume.revision(),
                }),
            }
        }
    }
}

/// Carves at the device position while the sculpt button is held and
/// sculpting is switched on.
pub fn sculpt_step(volume: &mut Volume, probe: &ProbeState, enabled: bool) -> CarveReport {
    if enabled && probe.sculpt_pressed {
        carve(volume, &probe.device_pos, probe.radius)
    } else {
        CarveReport::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opaque(n: usize) -> Volume {
        Volume::filled([n, n, n], Vec3::new(1.0, 1.0, 1.0), Voxel::WHITE).unwrap()
    }

    /// Voxels of `volume` within `radius` of `center`, by full enumeration.
    fn in_sphere(volume: &Volume, center: &Vec3, radius: f64) -> Vec<usize> {
        (0..volume.len())
            .filter(|&n| {
                let idx = volume.index_of(n);
                let p = Vec3::new(idx.i as f64, idx.j as f64, idx.k as f64).component_mul(&volume.spacing())
                    + volume.origin();
                (p - center).norm() <= radius
            })
            .collect()
    }

    #[test]
    fn carve_outside_is_noop() {
        let mut v = opaque(5);
        let r = carve(&mut v, &Vec3::new(50.0, 50.0, 50.0), 2.0);
        assert_eq!(r, CarveReport::default());
        assert_eq!(v.revision(), 0);
    }

    #[test]
    fn carve_center_unit_radius() {
        let mut v = opaque(5);
        let c = Vec3::new(2.0, 2.0, 2.0);
        assert_eq!(in_sphere(&v, &c, 1.0).len(), 7);
        let r = carve(&mut v, &c, 1.0);
        assert_eq!(r.zeroed_count, 7);
        assert_eq!(v.revision(), 1);
        let region = r.region.unwrap();
        assert_eq!(region.lo, VoxelIndex::new(1, 1, 1));
        assert_eq!(region.hi, VoxelIndex::new(3, 3, 3));
        assert_eq!(region.revision_after, 1);

        let again = carve(&mut v, &c, 1.0);
        assert_eq!(again.zeroed_count, 0);
        assert!(again.region.is_none());
        assert_eq!(v.revision(), 1);
    }

    #[test]
    fn sculpt_step_gating() {
        let mut v = opaque(5);
        let mut probe = ProbeState::new(Vec3::new(2.0, 2.0, 2.0), 1.0);
        assert!(sculpt_step(&mut v, &probe, true).is_noop());
        probe.sculpt_pressed = true;
        assert!(sculpt_step(&mut v, &probe, false).is_noop());
        assert_eq!(v.revision(), 0);
        assert_eq!(sculpt_step(&mut v, &probe, true).zeroed_count, 7);
    }

    #[test]
    fn region_is_tight_at_volume_edge() {
        let mut v = opaque(4);
        let r = carve(&mut v, &Vec3::new(-0.5, 0.0, 0.0), 1.2);
        let region = r.region.unwrap();
        assert_eq!(region.lo, VoxelIndex::new(0, 0, 0));
        // (0,0,0), (0,1,0) and (0,0,1) are within 1.2; (0,1,1) is 1.5 away.
        assert_eq!(region.hi, VoxelIndex::new(0, 1, 1));
        assert_eq!(r.zeroed_count, 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn carve_matches_enumeration_and_covers_changes(
            strokes in proptest::collection::vec((-1.0f64..9.0, -1.0f64..9.0, -1.0f64..9.0, 0.2f64..3.0), 1..8),
        ) {
            let mut v = opaque(8);
            let mut expected = vec![false; v.len()];
            for (x, y, z, r) in strokes {
                let before = v.clone();
                let rev = v.revision();
                let c = Vec3::new(x, y, z);
                for n in in_sphere(&v, &c, r) { expected[n] = true; }
                let report = carve(&mut v, &c, r);

                let changed: Vec<usize> = (0..v.len()).filter(|&n| v.voxels()[n] != before.voxels()[n]).collect();
                prop_assert_eq!(changed.len(), report.zeroed_count);
                prop_assert_eq!(report.region.is_none(), report.zeroed_count == 0);
                prop_assert_eq!(v.revision(), rev + u64::from(report.zeroed_count > 0));
                if let Some(region) = report.region {
                    for n in changed { prop_assert!(region.contains(v.index_of(n))); }
                }
                for n in 0..v.len() {
                    let (a, b) = (before.voxels()[n], v.voxels()[n]);
                    prop_assert!(b.r <= a.r && b.g <= a.g && b.b <= a.b && b.a <= a.a);
                }
            }
            for (voxel, &gone) in v.voxels().iter().zip(&expected) {
                prop_assert_eq!(voxel.is_empty(), gone);
            }
        }

        #[test]
        fn carving_commutes(
            a in (0.0f64..7.0, 0.0f64..7.0, 0.0f64..7.0, 0.5f64..3.0),
            b in (0.0f64..7.0, 0.0f64..7.0, 0.0f64..7.0, 0.5f64..3.0),
        ) {
            let (ca, cb) = (Vec3::new(a.0, a.1, a.2), Vec3::new(b.0, b.1, b.2));
            let mut ab = opaque(8);
            carve(&mut ab, &ca, a.3);
            carve(&mut ab, &cb, b.3);
            let mut ba = opaque(8);
            carve(&mut ba, &cb, b.3);
            carve(&mut ba, &ca, a.3);
            prop_assert_eq!(ab.voxels(), ba.voxels());
        }
    }
}
