//! Per-tick haptic rendering.
//!
//! A tick runs a fixed pipeline: the proxy (god-object) is moved toward the
//! device while staying outside solid material, a spring between device and
//! proxy yields the raw force, the luminosity of the material around the
//! contact point scales that force, and the result is optionally averaged
//! with the previous output and clamped to the device limit.

use serde::{Deserialize, Serialize};

use crate::volume::{Volume, Voxel};
use crate::{Error, Result, Vec3};

/// Rec. 709 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Relaxation passes that slide the proxy along the surface.
const RELAXATION_STEPS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HapticConfig {
    /// Spring stiffness, N/mm.
    pub stiffness_k: f64,
    /// Normalized alpha at or above which the field counts as solid.
    pub iso: f64,
    /// Radius of the luminosity sampling sphere, mm.
    pub sample_radius: f64,
    pub w_r: f64,
    pub w_g: f64,
    pub w_b: f64,
    pub haptics_enabled: bool,
    pub smoothing_enabled: bool,
    /// Output force limit, N.
    pub f_max: f64,
    pub tick_rate: u32,
}

impl Default for HapticConfig {
    fn default() -> Self {
        HapticConfig {
            stiffness_k: 0.5,
            iso: 0.5,
            sample_radius: 2.0,
            w_r: LUMA_WEIGHTS[0],
            w_g: LUMA_WEIGHTS[1],
            w_b: LUMA_WEIGHTS[2],
            haptics_enabled: true,
            smoothing_enabled: true,
            f_max: 7.0,
            tick_rate: 1000,
        }
    }
}

impl HapticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.stiffness_k.is_finite() && self.stiffness_k > 0.0) {
            return fail(format!("stiffness_k must be > 0, got {}", self.stiffness_k));
        }
        if !(self.iso > 0.0 && self.iso < 1.0) {
            return fail(format!("iso must lie in (0, 1), got {}", self.iso));
        }
        if !(self.sample_radius.is_finite() && self.sample_radius > 0.0) {
            return fail(format!("sample_radius must be > 0, got {}", self.sample_radius));
        }
        let weights = [self.w_r, self.w_g, self.w_b];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return fail(format!("luminosity weights must be finite and >= 0, got {weights:?}"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return fail(format!("luminosity weights must sum to 1, got {sum}"));
        }
        if !(self.f_max.is_finite() && self.f_max > 0.0) {
            return fail(format!("f_max must be > 0, got {}", self.f_max));
        }
        if self.tick_rate < 1 {
            return fail("tick_rate must be >= 1".into());
        }
        Ok(())
    }

    /// Weighted, opacity-scaled brightness of one voxel in [0, 1].
    #[inline]
    pub fn voxel_luminosity(&self, v: Voxel) -> f64 {
        let r = f64::from(v.r) / 255.0;
        let g = f64::from(v.g) / 255.0;
        let b = f64::from(v.b) / 255.0;
        let a = f64::from(v.a) / 255.0;
        (self.w_r * r + self.w_g * g + self.w_b * b) * a
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeState {
    pub device_pos: Vec3,
    /// Tool-tip sphere radius, mm.
    pub radius: f64,
    pub sculpt_pressed: bool,
}

impl ProbeState {
    pub fn new(device_pos: Vec3, radius: f64) -> Self {
        ProbeState {
            device_pos,
            radius,
            sculpt_pressed: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxyState {
    pub proxy_pos: Vec3,
    pub in_contact: bool,
}

impl ProxyState {
    pub fn free(pos: Vec3) -> Self {
        ProxyState {
            proxy_pos: pos,
            in_contact: false,
        }
    }
}

/// Everything computed during one tick.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForceSample {
    pub tick: u64,
    pub raw_f: Vec3,
    pub l_avg: f64,
    pub modulated_f: Vec3,
    pub output_f: Vec3,
    pub n_sampled: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Luminosity {
    pub l_avg: f64,
    pub n: usize,
}

fn is_solid(volume: &Volume, p: &Vec3, iso: f64) -> bool {
    volume.sample_alpha(p) >= iso
}

/// Last free point before the first solid sample on the segment `from -> to`.
///
/// `from` must be free and `to` solid. The segment is marched in half-voxel
/// steps so thin layers are not skipped, then the bracketing interval is
/// bisected down to `tol`. The returned point is always a free sample.
fn first_crossing(volume: &Volume, from: Vec3, to: Vec3, iso: f64, tol: f64) -> Vec3 {
    let delta = to - from;
    let len = delta.norm();
    if len <= tol {
        return from;
    }
    let step = 0.5 * volume.min_spacing();
    let n = (len / step).ceil().max(1.0) as usize;

    let mut free = from;
    let mut solid = to;
    for s in 1..=n {
        let p = if s == n {
            to
        } else {
            from + delta * (s as f64 / n as f64)
        };
        if is_solid(volume, &p, iso) {
            solid = p;
            break;
        }
        free = p;
    }

    while (solid - free).norm() > tol {
        let mid = 0.5 * (free + solid);
        if is_solid(volume, &mid, iso) {
            solid = mid;
        } else {
            free = mid;
        }
    }
    free
}

/// Unit directions to the 26 neighbors of a cell: faces, then edges, then corners.
fn search_directions() -> Vec<Vec3> {
    let mut dirs: Vec<Vec3> = Vec::with_capacity(26);
    for nonzero in 1..=3 {
        for dz in -1i32..=1 {
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if (dx != 0) as i32 + (dy != 0) as i32 + (dz != 0) as i32 == nonzero {
                        dirs.push(Vec3::new(dx as f64, dy as f64, dz as f64).normalize());
                    }
                }
            }
        }
    }
    dirs
}

/// Moves a buried point out of the material: downhill along the alpha
/// gradient while it is informative, otherwise by probing 26 directions at
/// growing radii until a free point turns up. The search always ends because
/// the field is zero outside the voxel-center bounding box.
fn escape_material(volume: &Volume, start: Vec3, iso: f64, tol: f64) -> Vec3 {
    let step = 0.5 * volume.min_spacing();
    let max_steps = 4 * volume.dims().iter().copied().max().unwrap_or(1) + 8;

    let mut p = start;
    for _ in 0..max_steps {
        let g = volume.alpha_gradient(&p);
        let norm = g.norm();
        if norm <= 1e-12 || norm.is_nan() {
            break;
        }
        let next = p - g * (step / norm);
        if !is_solid(volume, &next, iso) {
            return first_crossing(volume, next, p, iso, tol);
        }
        p = next;
    }

    let (lo, hi) = volume.center_bounds();
    let reach = (hi - lo).norm() + (p - 0.5 * (lo + hi)).norm() + 2.0 * step;
    let dirs = search_directions();
    let mut r = step;
    while r <= reach {
        for d in &dirs {
            let q = p + d * r;
            if !is_solid(volume, &q, iso) {
                return first_crossing(volume, q, p, iso, tol);
            }
        }
        r += step;
    }
    // Unreachable for finite inputs: beyond `reach` every direction is outside the grid.
    let mut out = p;
    out.z = hi.z + step;
    out
}

/// Advances the god-object proxy toward the device.
///
/// In free space the proxy coincides with the device. In contact it stops at
/// the first iso-surface crossing on the way from its previous position, then
/// slides tangentially for up to three relaxation passes so it can follow the
/// device along the surface. The proxy is never left inside solid material.
pub fn update_proxy(prev: &ProxyState, probe: &ProbeState, volume: &Volume, cfg: &HapticConfig) -> ProxyState {
    let iso = cfg.iso;
    let tol = volume.min_spacing() / 100.0;
    let goal = probe.device_pos;

    if !is_solid(volume, &goal, iso) {
        return ProxyState::free(goal);
    }

    let start = if is_solid(volume, &prev.proxy_pos, iso) {
        escape_material(volume, prev.proxy_pos, iso, tol)
    } else {
        prev.proxy_pos
    };

    let mut proxy = first_crossing(volume, start, goal, iso, tol);
    for _ in 0..RELAXATION_STEPS {
        let grad = volume.alpha_gradient(&proxy);
        let gnorm = grad.norm();
        if gnorm <= 1e-12 || gnorm.is_nan() {
            break;
        }
        let outward = -grad / gnorm;
        let offset = goal - proxy;
        let tangent = offset - outward * offset.dot(&outward);
        if tangent.norm() <= tol {
            break;
        }
        let candidate = proxy + tangent;
        proxy = if is_solid(volume, &candidate, iso) {
            first_crossing(volume, proxy, candidate, iso, tol)
        } else {
            first_crossing(volume, candidate, goal, iso, tol)
        };
    }

    ProxyState {
        proxy_pos: proxy,
        in_contact: true,
    }
}

/// Spring from device to proxy; zero when not in contact.
pub fn compute_raw_force(proxy: &ProxyState, probe: &ProbeState, cfg: &HapticConfig) -> Vec3 {
    if !proxy.in_contact {
        return Vec3::zeros();
    }
    (proxy.proxy_pos - probe.device_pos) * cfg.stiffness_k
}

/// Mean weighted luminosity of the voxels whose centers lie within `radius`
/// of `center`.
///
/// Only voxels that hold material are counted. A voxel whose four channels
/// are all zero has been carved away (or is background) and is not part of
/// the neighborhood. Returns `(0, 0)` for an empty neighborhood.
pub fn sample_luminosity(volume: &Volume, center: &Vec3, radius: f64, cfg: &HapticConfig) -> Luminosity {
    let voxels = volume.voxels();
    let mut sum = 0.0;
    let mut n = 0usize;
    volume.for_each_in_sphere(center, radius, |_, at| {
        let v = voxels[at];
        if !v.is_empty() {
            sum += cfg.voxel_luminosity(v);
            n += 1;
        }
    });
    if n == 0 {
        return Luminosity::default();
    }
    Luminosity {
        l_avg: (sum / n as f64).clamp(0.0, 1.0),
        n,
    }
}

pub fn modulate_force(raw_f: &Vec3, l_avg: f64, cfg: &HapticConfig) -> Vec3 {
    if cfg.haptics_enabled {
        raw_f * l_avg
    } else {
        *raw_f
    }
}

pub fn smooth_force(current: &Vec3, prev_output: &Vec3, cfg: &HapticConfig) -> Vec3 {
    if cfg.smoothing_enabled {
        (current + prev_output) * 0.5
    } else {
        *current
    }
}

/// Rescales `f` to magnitude `f_max` if it is longer, keeping its direction.
pub fn clamp_magnitude(f: &Vec3, f_max: f64) -> Vec3 {
    let norm = f.norm();
    if norm <= f_max {
        return *f;
    }
    let mut out = f * (f_max / norm);
    while out.norm() > f_max {
        out *= 1.0 - f64::EPSILON;
    }
    out
}

/// One haptic tick. Reads the volume only; sculpting for the same tick is
/// applied afterwards by the caller.
pub fn haptic_tick(
    probe: &ProbeState,
    proxy: &ProxyState,
    volume: &Volume,
    prev: &ForceSample,
    cfg: &HapticConfig,
    tick: u64,
) -> (ForceSample, ProxyState) {
    let proxy = update_proxy(proxy, probe, volume, cfg);
    let raw_f = compute_raw_force(&proxy, probe, cfg);
    let lum = if proxy.in_contact {
        sample_luminosity(volume, &proxy.proxy_pos, cfg.sample_radius, cfg)
    } else {
        Luminosity::default()
    };
    let modulated_f = modulate_force(&raw_f, lum.l_avg, cfg);
    let smoothed = smooth_force(&modulated_f, &prev.output_f, cfg);
    let output_f = clamp_magnitude(&smoothed, cfg.f_max);
    let sample = ForceSample {
        tick,
        raw_f,
        l_avg: lum.l_avg,
        modulated_f,
        output_f,
        n_sampled: lum.n,
    };
    (sample, proxy)
}
