//! Fixed-rate session loop shared by batch replay and the live service.
//!
//! Every tick first renders forces against the volume as it stood at the
//! start of the tick, then applies that tick's sculpting. Edits therefore
//! become felt from the next tick on.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::haptics::{haptic_tick, ForceSample, HapticConfig, ProbeState, ProxyState};
use crate::sculpt::{sculpt_step, CarveReport, DirtyRegion};
use crate::volume::Volume;
use crate::{Error, Result, Vec3};

/// One recorded probe state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryFrame {
    pub tick: u64,
    pub device_pos: Vec3,
    pub sculpt_pressed: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameLine {
    tick: u64,
    pos: [f64; 3],
    sculpt: bool,
}

impl TrajectoryFrame {
    pub fn new(tick: u64, device_pos: Vec3, sculpt_pressed: bool) -> Self {
        TrajectoryFrame {
            tick,
            device_pos,
            sculpt_pressed,
        }
    }

    /// `{"tick":..,"pos":[x,y,z],"sculpt":..}`
    pub fn to_json_line(&self) -> String {
        let p = self.device_pos;
        serde_json::to_string(&FrameLine {
            tick: self.tick,
            pos: [p.x, p.y, p.z],
            sculpt: self.sculpt_pressed,
        })
        .expect("frame serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub haptic: HapticConfig,
    pub sculpt_enabled: bool,
    /// Tool-tip radius, mm; also the carving radius.
    pub probe_radius: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let haptic = HapticConfig::default();
        SessionConfig {
            probe_radius: haptic.sample_radius,
            haptic,
            sculpt_enabled: false,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.haptic.validate()?;
        if !(self.probe_radius.is_finite() && self.probe_radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "probe_radius must be > 0, got {}",
                self.probe_radius
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: SessionConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Ordered per-tick samples, ticks contiguous from 0.
pub type ForceTrace = Vec<ForceSample>;

/// Reads a JSON-lines trajectory. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryFrame>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_trajectory(reader: impl BufRead) -> Result<Vec<TrajectoryFrame>> {
    let mut frames: Vec<TrajectoryFrame> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io("<trajectory>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: FrameLine = serde_json::from_str(&line).map_err(|e| Error::MalformedFrame {
            line: line_no,
            message: e.to_string(),
        })?;
        if parsed.pos.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedFrame {
                line: line_no,
                message: "position must be finite".into(),
            });
        }
        if frames.last().is_some_and(|last| parsed.tick <= last.tick) {
            return Err(Error::NonIncreasingTick { line: line_no });
        }
        frames.push(TrajectoryFrame::new(parsed.tick, Vec3::from(parsed.pos), parsed.sculpt));
    }
    Ok(frames)
}

pub fn write_trajectory(frames: &[TrajectoryFrame], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for f in frames {
        text.push_str(&f.to_json_line());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Result of one tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickOutcome {
    pub sample: ForceSample,
    pub proxy: ProxyState,
    pub carve: CarveReport,
}

/// Stateful tick loop owning the volume.
#[derive(Clone, Debug)]
pub struct Session {
    volume: Volume,
    cfg: SessionConfig,
    proxy: Option<ProxyState>,
    last: ForceSample,
    next_tick: u64,
    trace: ForceTrace,
    dirty: Vec<DirtyRegion>,
}

/// Everything a finished session produced.
#[derive(Clone, Debug)]
pub struct SessionOutput {
    pub trace: ForceTrace,
    pub volume: Volume,
    pub dirty: Vec<DirtyRegion>,
}

impl Session {
    pub fn new(volume: Volume, cfg: SessionConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Session {
            volume,
            cfg,
            proxy: None,
            last: ForceSample::default(),
            next_tick: 0,
            trace: Vec::new(),
            dirty: Vec::new(),
        })
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn set_config(&mut self, cfg: SessionConfig) -> Result<()> {
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn proxy(&self) -> Option<&ProxyState> {
        self.proxy.as_ref()
    }

    /// Number of ticks executed so far, which is also the next tick number.
    pub fn ticks(&self) -> u64 {
        self.next_tick
    }

    pub fn trace(&self) -> &[ForceSample] {
        &self.trace
    }

    pub fn dirty_regions(&self) -> &[DirtyRegion] {
        &self.dirty
    }

    /// Runs one tick with the device at `device_pos`.
    pub fn step(&mut self, device_pos: Vec3, sculpt_pressed: bool) -> TickOutcome {
        let probe = ProbeState {
            device_pos,
            radius: self.cfg.probe_radius,
            sculpt_pressed,
        };
        let prev_proxy = self.proxy.unwrap_or(ProxyState::free(device_pos));
        let (sample, proxy) = haptic_tick(
            &probe,
            &prev_proxy,
            &self.volume,
            &self.last,
            &self.cfg.haptic,
            self.next_tick,
        );
        let carve = sculpt_step(&mut self.volume, &probe, self.cfg.sculpt_enabled);
        if let Some(region) = carve.region {
            self.dirty.push(region);
        }

        self.proxy = Some(proxy);
        self.last = sample;
        self.next_tick += 1;
        self.trace.push(sample);
        TickOutcome { sample, proxy, carve }
    }

    /// Runs frames in order. Ticks missing between frames repeat the previous
    /// frame; ticks before the first frame hold its position with the button
    /// released.
    pub fn run_frames(&mut self, frames: &[TrajectoryFrame]) -> Result<()> {
        let mut held: Option<(Vec3, bool)> = None;
        for (n, frame) in frames.iter().enumerate() {
            if frame.tick < self.next_tick {
                return Err(Error::NonIncreasingTick { line: n + 1 });
            }
            while self.next_tick < frame.tick {
                let (pos, sculpt) = held.unwrap_or((frame.device_pos, false));
                self.step(pos, sculpt);
            }
            self.step(frame.device_pos, frame.sculpt_pressed);
            held = Some((frame.device_pos, frame.sculpt_pressed));
        }
        Ok(())
    }

    pub fn finish(self) -> SessionOutput {
        SessionOutput {
            trace: self.trace,
            volume: self.volume,
            dirty: self.dirty,
        }
    }
}

/// Replays a trajectory against `volume` from tick 0.
pub fn run_session(volume: Volume, frames: &[TrajectoryFrame], cfg: &SessionConfig) -> Result<SessionOutput> {
    let mut session = Session::new(volume, cfg.clone())?;
    session.run_frames(frames)?;
    Ok(session.finish())
}

pub const TRACE_HEADER: &str = "tick,fx,fy,fz,l_avg,n_sampled,out_fx,out_fy,out_fz";

fn real(x: f64) -> String {
    // Ten significant digits: enough for 1e-9 relative round trips.
    format!("{x:.9e}")
}

/// One CSV row per sample; forces are the raw spring force and the final
/// output force.
pub fn write_trace(trace: &[ForceSample], path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for s in trace {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.tick,
                real(s.raw_f.x),
                real(s.raw_f.y),
                real(s.raw_f.z),
                real(s.l_avg),
                s.n_sampled,
                real(s.output_f.x),
                real(s.output_f.y),
                real(s.output_f.z),
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))?;
    Ok(trace.len())
}
