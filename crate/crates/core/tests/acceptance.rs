//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.
//!
//! Run with `cargo test -p morpho-core --test acceptance`.

use std::path::Path;
use std::time::{Duration, Instant};

use morpho_core::haptics::{modulate_force, sample_luminosity, HapticConfig};
use morpho_core::mesher::{export_stl, polygonize};
use morpho_core::session::{write_trace, Session, SessionConfig, TrajectoryFrame};
use morpho_core::stack::{export_stack, import_stack};
use morpho_core::{carve, phantom, run_session, Vec3, Volume, Voxel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn unit() -> Vec3 {
    Vec3::new(1.0, 1.0, 1.0)
}

fn random_voxel(rng: &mut ChaCha8Rng) -> Voxel {
    // A quarter of the voxels are empty so the occupancy filter is exercised.
    if rng.random_bool(0.25) {
        Voxel::EMPTY
    } else {
        Voxel::new(rng.random(), rng.random(), rng.random(), rng.random())
    }
}

fn random_volume(rng: &mut ChaCha8Rng, max_side: usize) -> Volume {
    let dims = [
        rng.random_range(1..=max_side),
        rng.random_range(1..=max_side),
        rng.random_range(1..=max_side),
    ];
    let spacing = Vec3::new(
        rng.random_range(0.25..2.0),
        rng.random_range(0.25..2.0),
        rng.random_range(0.25..2.0),
    );
    let origin = Vec3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    let voxels = (0..dims[0] * dims[1] * dims[2]).map(|_| random_voxel(rng)).collect();
    Volume::from_voxels(dims, spacing, voxels).unwrap().with_origin(origin)
}

/// Luminosity average over every voxel of the volume, no index-box pruning.
fn luminosity_by_enumeration(volume: &Volume, center: &Vec3, radius: f64, cfg: &HapticConfig) -> (f64, usize) {
    let [nx, ny, nz] = volume.dims();
    let (mut sum, mut n) = (0.0f64, 0usize);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let v = volume.voxels()[i + nx * (j + ny * k)];
                let p = volume.origin() + Vec3::new(i as f64, j as f64, k as f64).component_mul(&volume.spacing());
                if (p - center).norm() > radius || v == Voxel::EMPTY {
                    continue;
                }
                let (r, g, b, a) = (
                    v.r as f64 / 255.0,
                    v.g as f64 / 255.0,
                    v.b as f64 / 255.0,
                    v.a as f64 / 255.0,
                );
                sum += (cfg.w_r * r + cfg.w_g * g + cfg.w_b * b) * a;
                n += 1;
            }
        }
    }
    if n == 0 {
        (0.0, 0)
    } else {
        (sum / n as f64, n)
    }
}

fn luminosity_oracle() -> Outcome {
    let started = Instant::now();
    let cfg = HapticConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1);
    let mut worst = 0.0f64;
    let mut queries = 0;
    for _ in 0..100 {
        let v = random_volume(&mut rng, 32);
        let (lo, hi) = v.center_bounds();
        for _ in 0..10 {
            let center = Vec3::new(
                rng.random_range(lo.x - 3.0..hi.x + 3.0),
                rng.random_range(lo.y - 3.0..hi.y + 3.0),
                rng.random_range(lo.z - 3.0..hi.z + 3.0),
            );
            let radius = rng.random_range(0.1..6.0);
            let got = sample_luminosity(&v, &center, radius, &cfg);
            let (expected, n) = luminosity_by_enumeration(&v, &center, radius, &cfg);
            ensure!(got.n == n, "N mismatch: {} vs {n}", got.n);
            worst = worst.max((got.l_avg - expected).abs());
            queries += 1;
        }
    }
    ensure!(worst < 1e-9, "max |diff| {worst:e} >= 1e-9");

    let white = Volume::filled([9, 9, 9], unit(), Voxel::WHITE).unwrap();
    let l = sample_luminosity(&white, &Vec3::new(4.0, 4.0, 4.0), 3.0, &cfg).l_avg;
    ensure!((l - 1.0).abs() < 1e-9, "white-opaque gave {l}");
    let red = Volume::filled([9, 9, 9], unit(), Voxel::new(255, 0, 0, 255)).unwrap();
    let l = sample_luminosity(&red, &Vec3::new(4.0, 4.0, 4.0), 3.0, &cfg).l_avg;
    ensure!((l - 0.2126).abs() < 1e-9, "red-opaque gave {l}");

    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{queries} queries, max diff {worst:.1e}, {elapsed:.2?}"))
}

fn modulation_and_toggles() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x2);
    for _ in 0..1000 {
        let raw = Vec3::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
        );
        let l: f64 = rng.random_range(0.0..=1.0);
        let on = HapticConfig::default();
        let off = HapticConfig {
            haptics_enabled: false,
            ..HapticConfig::default()
        };
        let m_on = modulate_force(&raw, l, &on);
        let m_off = modulate_force(&raw, l, &off);
        ensure!(m_on == raw * l, "enabled: {m_on:?} != {l} * {raw:?}");
        ensure!(m_off == raw, "disabled: {m_off:?} != {raw:?}");
        ensure!(m_on.norm() <= raw.norm(), "|F'| > |F|");
        ensure!(m_off.norm() <= raw.norm(), "|F'| > |F|");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("1000 samples, {elapsed:.2?}"))
}

/// White half-space: voxels with k <= 15 are opaque, the 0.5 iso-surface is
/// at z = 15.5 mm.
fn white_half_space() -> (Volume, f64) {
    (
        phantom::half_space([32, 32, 32], unit(), 15, Voxel::WHITE).unwrap(),
        15.5,
    )
}

fn half_space_force() -> Outcome {
    let started = Instant::now();
    let (volume, surface) = white_half_space();
    let k = 0.5;
    let cfg = SessionConfig {
        haptic: HapticConfig {
            stiffness_k: k,
            smoothing_enabled: false,
            ..HapticConfig::default()
        },
        ..SessionConfig::default()
    };
    // From 3 mm above the surface to 10 mm below it, 0.01 mm per tick.
    let frames: Vec<TrajectoryFrame> = (0..=1300)
        .map(|t| TrajectoryFrame::new(t, Vec3::new(16.3, 15.8, surface + 3.0 - 0.01 * t as f64), false))
        .collect();
    let out = run_session(volume, &frames, &cfg).unwrap();

    let mut contact = 0;
    let mut worst_mag = 0.0f64;
    let mut worst_angle = 0.0f64;
    for (s, f) in out.trace.iter().zip(&frames) {
        let d = surface - f.device_pos.z;
        if s.raw_f == Vec3::zeros() && d <= 0.0 {
            continue;
        }
        ensure!(d > -0.01, "force {:?} above the surface at tick {}", s.output_f, s.tick);
        contact += 1;
        let err = (s.output_f.norm() - k * d).abs();
        worst_mag = worst_mag.max(err);
        ensure!(
            err <= k * 0.5,
            "tick {}: |F| = {} vs k*d = {}",
            s.tick,
            s.output_f.norm(),
            k * d
        );
        if s.output_f.norm() > 0.0 {
            let angle = s
                .output_f
                .normalize()
                .dot(&Vec3::z())
                .clamp(-1.0, 1.0)
                .acos()
                .to_degrees();
            worst_angle = worst_angle.max(angle);
            ensure!(angle <= 2.0, "tick {}: direction {angle} deg off the normal", s.tick);
        }
    }
    ensure!(contact >= 900, "only {contact} in-contact ticks");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "{contact} contact ticks, max |F| error {worst_mag:.4} N, max angle {worst_angle:.3} deg, {elapsed:.2?}"
    ))
}

fn smoothing_convergence() -> Outcome {
    let (volume, surface) = white_half_space();
    let device = Vec3::new(16.0, 16.0, surface - 4.0);
    let frames: Vec<TrajectoryFrame> = (0..=30).map(|t| TrajectoryFrame::new(t, device, false)).collect();
    let smoothed = SessionConfig::default();
    let raw = SessionConfig {
        haptic: HapticConfig {
            smoothing_enabled: false,
            ..HapticConfig::default()
        },
        ..SessionConfig::default()
    };
    let a = run_session(volume.clone(), &frames, &smoothed).unwrap().trace;
    let b = run_session(volume, &frames, &raw).unwrap().trace;

    let target = b[0].output_f;
    ensure!(
        b.iter().all(|s| s.output_f == target),
        "unsmoothed output is not constant"
    );
    ensure!(target.norm() > 1.0, "penetration force too small: {target:?}");
    let mut prev_err = target.norm();
    for s in &a {
        let err = (target - s.output_f).norm();
        ensure!(
            (err - prev_err / 2.0).abs() < 1e-9,
            "tick {}: error {err} after {prev_err}",
            s.tick
        );
        prev_err = err;
    }
    Ok(format!("error after 31 ticks {prev_err:.2e}"))
}

/// 500 scripted frames sweeping a wobbling path through a 64^3 sphere, with
/// tick gaps and the button released on some stretches.
fn carve_script() -> Vec<TrajectoryFrame> {
    let mut tick = 0;
    (0..500)
        .map(|n| {
            let s = n as f64 / 499.0;
            let pos = Vec3::new(
                8.0 + 48.0 * s,
                31.5 + 12.0 * (6.0 * s * std::f64::consts::PI).sin(),
                31.5 + 9.0 * (4.0 * s * std::f64::consts::PI).cos(),
            );
            let sculpt = !(200..240).contains(&n) && n % 97 != 0;
            let frame = TrajectoryFrame::new(tick, pos, sculpt);
            tick += if n % 7 == 0 { 3 } else { 1 };
            frame
        })
        .collect()
}

fn carve_oracle() -> Outcome {
    let started = Instant::now();
    let volume = phantom::centered_sphere(64, 24.0).unwrap();
    let radius = 2.5;
    let cfg = SessionConfig {
        sculpt_enabled: true,
        probe_radius: radius,
        ..SessionConfig::default()
    };
    let frames = carve_script();
    let out = run_session(volume.clone(), &frames, &cfg).unwrap();

    // Brute force: a voxel is zeroed iff it held material and its center lies
    // within the probe sphere of some frame with the button down (held gap
    // ticks repeat such a frame, adding nothing new).
    let active: Vec<Vec3> = frames
        .iter()
        .filter(|f| f.sculpt_pressed)
        .map(|f| f.device_pos)
        .collect();
    let [nx, ny, _] = volume.dims();
    let mut mismatches = 0;
    let mut zeroed = 0;
    for (n, (before, after)) in volume.voxels().iter().zip(out.volume.voxels()).enumerate() {
        let p = Vec3::new((n % nx) as f64, ((n / nx) % ny) as f64, (n / (nx * ny)) as f64);
        let swept = active.iter().any(|c| (p - c).norm() <= radius);
        let expected = !before.is_empty() && swept;
        let actual = !before.is_empty() && after.is_empty();
        zeroed += usize::from(actual);
        if expected != actual || (!expected && before != after) {
            mismatches += 1;
        }
    }
    ensure!(
        mismatches == 0,
        "{mismatches} voxels differ from the swept-sphere union"
    );
    ensure!(zeroed > 1000, "only {zeroed} voxels carved");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{zeroed} voxels zeroed, exact match, {elapsed:.2?}"))
}

fn stack_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6);
    let dir = tempfile::tempdir().unwrap();
    let mut carved = 0;
    for n in 0..20 {
        let mut v = random_volume(&mut rng, 16);
        if n % 2 == 1 {
            let (lo, hi) = v.center_bounds();
            let c = lo + (hi - lo) * rng.random_range(0.2..0.8);
            if carve(&mut v, &c, rng.random_range(1.0..4.0)).zeroed_count > 0 {
                carved += 1;
            }
        }
        let path = dir.path().join(format!("v{n}"));
        let written = export_stack(&v, &path).map_err(|e| e.to_string())?;
        ensure!(
            written == v.dims()[2],
            "wrote {written} slices for nz = {}",
            v.dims()[2]
        );
        let back = import_stack(&path, v.spacing()).map_err(|e| e.to_string())?;
        ensure!(back.dims() == v.dims(), "dims {:?} != {:?}", back.dims(), v.dims());
        ensure!(back.voxels() == v.voxels(), "volume {n} differs after round trip");
    }
    ensure!(carved >= 5, "only {carved} post-carve volumes");
    Ok(format!("20 volumes ({carved} carved) identical"))
}

fn mesher_phantoms() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let single = polygonize(&phantom::single_voxel(3).unwrap(), 0.5);
    ensure!(single.is_watertight(), "single voxel mesh not watertight");
    ensure!(
        single.euler_characteristic() == 2,
        "single voxel chi = {}",
        single.euler_characteristic()
    );

    let r = 20.0;
    let sphere = polygonize(&phantom::centered_sphere(64, r).unwrap(), 0.5);
    ensure!(sphere.is_watertight(), "sphere mesh not watertight");
    let analytic = 4.0 * std::f64::consts::PI * r * r;
    let rel = (sphere.surface_area() - analytic).abs() / analytic;
    ensure!(rel < 0.05, "sphere area off by {:.2}%", 100.0 * rel);

    for (name, mesh) in [("single", &single), ("sphere", &sphere)] {
        let path = dir.path().join(format!("{name}.stl"));
        let count = export_stl(mesh, &path).map_err(|e| e.to_string())?;
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        ensure!(size == 84 + 50 * count, "{name}: {size} bytes for {count} triangles");
    }
    Ok(format!(
        "single voxel {} tris chi=2; sphere {} tris, area error {:.3}%",
        single.triangle_count(),
        sphere.triangle_count(),
        100.0 * rel
    ))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let volume = phantom::centered_sphere(64, 24.0).unwrap();
    let cfg = SessionConfig {
        sculpt_enabled: true,
        probe_radius: 2.5,
        ..SessionConfig::default()
    };
    let frames = carve_script();
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = run_session(volume.clone(), &frames, &cfg).unwrap();
        let csv = dir.path().join(format!("trace{run}.csv"));
        write_trace(&out.trace, &csv).unwrap();
        let stack = dir.path().join(format!("stack{run}"));
        export_stack(&out.volume, &stack).unwrap();
        outputs.push((std::fs::read(&csv).unwrap(), read_dir_bytes(&stack), out.dirty));
    }
    ensure!(outputs[0].0 == outputs[1].0, "trace CSVs differ");
    ensure!(outputs[0].1 == outputs[1].1, "exported stacks differ");
    ensure!(outputs[0].2 == outputs[1].2, "dirty regions differ");
    Ok(format!(
        "{} CSV bytes and {} stack files identical",
        outputs[0].0.len(),
        outputs[0].1.len()
    ))
}

fn tick_budget() -> Outcome {
    let n = 256;
    let volume = phantom::centered_sphere(n, 100.0).unwrap();
    let c = (n as f64 - 1.0) / 2.0;
    let cfg = SessionConfig {
        haptic: HapticConfig {
            sample_radius: 2.0,
            ..HapticConfig::default()
        },
        sculpt_enabled: true,
        probe_radius: 2.0,
    };
    let mut session = Session::new(volume, cfg).unwrap();

    // Skim along and into the sphere surface, sculpting in alternate blocks.
    let pos = |t: usize| {
        let s = t as f64 * 1e-4;
        let theta = 0.8 + 1.2 * s;
        let phi = 6.0 * s;
        let r = 100.0 + 1.5 * (t as f64 / 120.0).sin() - 1.0;
        Vec3::new(
            c + r * theta.sin() * phi.cos(),
            c + r * theta.sin() * phi.sin(),
            c + r * theta.cos(),
        )
    };
    for t in 0..200 {
        session.step(pos(t), false);
    }
    let mut latencies = Vec::with_capacity(10_000);
    let mut contacts = 0;
    let mut carved = 0;
    for t in 0..10_000 {
        let p = pos(200 + t);
        let sculpt = (t / 500) % 2 == 1;
        let started = Instant::now();
        let out = session.step(p, sculpt);
        latencies.push(started.elapsed());
        contacts += usize::from(out.proxy.in_contact);
        carved += out.carve.zeroed_count;
    }
    latencies.sort();
    let median = latencies[latencies.len() / 2];
    let p99 = latencies[latencies.len() * 99 / 100];
    ensure!(contacts > 1000, "only {contacts} contact ticks");
    ensure!(carved > 0, "nothing carved");
    ensure!(median < Duration::from_millis(1), "median {median:?}");
    ensure!(p99 < Duration::from_millis(2), "p99 {p99:?}");
    Ok(format!(
        "median {median:.2?}, p99 {p99:.2?}, {contacts} contact ticks, {carved} voxels carved"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("luminosity equals brute-force enumeration", luminosity_oracle),
        ("force modulation and haptics toggle", modulation_and_toggles),
        ("half-space force oracle", half_space_force),
        ("smoothing converges, error halving", smoothing_convergence),
        ("carve equals swept-sphere union", carve_oracle),
        ("stack export/import round trip", stack_round_trip),
        ("mesher watertight, sphere area, STL size", mesher_phantoms),
        ("replay determinism", determinism),
        ("tick latency budget on 256^3", tick_budget),
    ];

    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] {name}: {reason}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
