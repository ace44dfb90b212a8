//! Session state behind the service: message handling, the probe queue and
//! the tick step. Network code lives in [`crate::server`].

use std::collections::VecDeque;
use std::io::Cursor;
use std::path::PathBuf;

use base64::Engine as _;
use morpho_core::mesher::polygonize;
use morpho_core::session::{write_trace, Session, SessionConfig};
use morpho_core::stack::{export_stack, import_stack, slice_image};
use morpho_core::{export_stl, Axis, ForceSample, Vec3, Volume};

use crate::protocol::{ClientMessage, ServerMessage, SessionStatus, Toggles};

pub const PROBE_QUEUE_LIMIT: usize = 64;
pub const DEFAULT_DECIMATION: u32 = 16;

/// File work that runs on a snapshot, away from the tick loop.
#[derive(Debug)]
pub enum Job {
    Load {
        path: PathBuf,
        spacing: Vec3,
    },
    ExportVolume {
        path: PathBuf,
        snapshot: Volume,
    },
    ExportMesh {
        path: PathBuf,
        snapshot: Volume,
        isovalue: f64,
    },
    ExportTrace {
        path: PathBuf,
        snapshot: Vec<ForceSample>,
    },
}

#[derive(Debug)]
pub enum JobOutput {
    Loaded(Volume),
    Message(ServerMessage),
}

impl Job {
    pub fn run(self) -> JobOutput {
        let done = |op: &str, path: &PathBuf| ServerMessage::Done {
            op: op.into(),
            path: path.display().to_string(),
        };
        let result = match self {
            Job::Load { path, spacing } => {
                return match import_stack(&path, spacing) {
                    Ok(v) => JobOutput::Loaded(v),
                    Err(e) => JobOutput::Message(ServerMessage::error(e.to_string())),
                }
            }
            Job::ExportVolume { path, snapshot } => {
                export_stack(&snapshot, &path).map(|_| done("export_volume", &path))
            }
            Job::ExportMesh {
                path,
                snapshot,
                isovalue,
            } => export_stl(&polygonize(&snapshot, isovalue), &path).map(|_| done("export_mesh", &path)),
            Job::ExportTrace { path, snapshot } => write_trace(&snapshot, &path).map(|_| done("export_trace", &path)),
        };
        JobOutput::Message(result.unwrap_or_else(|e| ServerMessage::error(e.to_string())))
    }
}

/// Per-client force subscription.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ForceFilter {
    decimation: Option<u32>,
}

impl ForceFilter {
    pub fn subscribe(&mut self, decimation: u32) {
        self.decimation = Some(decimation.max(1));
    }

    pub fn is_subscribed(&self) -> bool {
        self.decimation.is_some()
    }

    /// Forwards a force message of `tick` every K ticks.
    pub fn wants(&self, tick: u64) -> bool {
        self.decimation.is_some_and(|k| tick.is_multiple_of(u64::from(k)))
    }
}

pub struct LiveSession {
    engine: Option<Session>,
    config: SessionConfig,
    queue: VecDeque<(Vec3, bool)>,
    held: Option<(Vec3, bool)>,
    dropped: u64,
    transient: Option<String>,
}

impl Default for LiveSession {
    fn default() -> Self {
        LiveSession::new(SessionConfig::default())
    }
}

impl LiveSession {
    pub fn new(config: SessionConfig) -> Self {
        LiveSession {
            engine: None,
            config,
            queue: VecDeque::new(),
            held: None,
            dropped: 0,
            transient: None,
        }
    }

    /// Starts with `volume` already loaded.
    pub fn with_volume(volume: Volume, config: SessionConfig) -> Self {
        let mut live = LiveSession::new(config);
        live.install(volume);
        live
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn engine(&self) -> Option<&Session> {
        self.engine.as_ref()
    }

    pub fn queued_probes(&self) -> usize {
        self.queue.len()
    }

    pub fn status(&self) -> SessionStatus {
        let volume = self.engine.as_ref().map(Session::volume);
        SessionStatus {
            volume_loaded: volume.is_some(),
            dims: volume.map(Volume::dims),
            revision: volume.map_or(0, Volume::revision),
            toggles: Toggles {
                haptics: self.config.haptic.haptics_enabled,
                smoothing: self.config.haptic.smoothing_enabled,
                sculpt: self.config.sculpt_enabled,
            },
            transient_message: self.transient.clone(),
            dropped_probes: self.dropped,
            tick: self.engine.as_ref().map_or(0, Session::ticks),
            f_max: self.config.haptic.f_max,
            probe_radius_mm: self.config.probe_radius,
        }
    }

    fn status_msg(&self) -> ServerMessage {
        ServerMessage::Status(self.status())
    }

    fn install(&mut self, volume: Volume) {
        self.engine = Some(Session::new(volume, self.config.clone()).expect("config was validated"));
        self.queue.clear();
        self.held = None;
    }

    /// Parses and handles one text frame, running any file work inline.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        match ClientMessage::parse(text) {
            Ok(msg) => self.handle_message(msg),
            Err(reason) => vec![ServerMessage::error(reason)],
        }
    }

    /// Handles a message to completion, running any file work inline.
    pub fn handle_message(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        let (mut out, job) = self.begin(msg);
        if let Some(job) = job {
            out.extend(self.complete(job.run()));
        }
        out
    }

    /// Applies the in-memory part of a message. File work comes back as a
    /// [`Job`] whose output must be passed to [`LiveSession::complete`].
    pub fn begin(&mut self, msg: ClientMessage) -> (Vec<ServerMessage>, Option<Job>) {
        match msg {
            ClientMessage::LoadVolume { path, spacing_mm } => {
                let spacing = Vec3::from(spacing_mm);
                if !spacing.iter().all(|s| s.is_finite() && *s > 0.0) {
                    return (
                        vec![ServerMessage::error("spacing_mm must be three positive numbers")],
                        None,
                    );
                }
                self.transient = Some("Loading Volume...".into());
                (
                    vec![self.status_msg()],
                    Some(Job::Load {
                        path: path.into(),
                        spacing,
                    }),
                )
            }
            ClientMessage::Probe { pos_mm, sculpt } => {
                let pos = Vec3::from(pos_mm);
                if self.engine.is_none() {
                    return (vec![ServerMessage::error("no volume loaded")], None);
                }
                if !pos.iter().all(|c| c.is_finite()) {
                    return (vec![ServerMessage::error("pos_mm must be finite")], None);
                }
                self.queue.push_back((pos, sculpt));
                if self.queue.len() > PROBE_QUEUE_LIMIT {
                    self.queue.pop_front();
                    self.dropped += 1;
                }
                (Vec::new(), None)
            }
            ClientMessage::SetConfig(patch) => {
                let cfg = patch.apply(&self.config);
                let applied = match &mut self.engine {
                    Some(engine) => engine.set_config(cfg.clone()),
                    None => cfg.validate(),
                };
                match applied {
                    Ok(()) => {
                        self.config = cfg;
                        (vec![self.status_msg()], None)
                    }
                    Err(e) => (vec![ServerMessage::error(e.to_string())], None),
                }
            }
            ClientMessage::GetSlice { axis, index } => (vec![self.slice(axis, index)], None),
            ClientMessage::ExportVolume { path } => self.export("Exporting Volume...", |v| Job::ExportVolume {
                path: path.into(),
                snapshot: v.clone(),
            }),
            ClientMessage::ExportMesh { path, isovalue } => {
                let iso = isovalue.unwrap_or(self.config.haptic.iso);
                if !(iso > 0.0 && iso <= 1.0) {
                    return (vec![ServerMessage::error("isovalue must be in (0, 1]")], None);
                }
                self.export("Exporting Mesh...", |v| Job::ExportMesh {
                    path: path.into(),
                    snapshot: v.clone(),
                    isovalue: iso,
                })
            }
            ClientMessage::ExportTrace { path } => {
                let Some(engine) = &self.engine else {
                    return (vec![ServerMessage::error("no volume loaded")], None);
                };
                let snapshot = engine.trace().to_vec();
                self.transient = Some("Exporting Trace...".into());
                (
                    vec![self.status_msg()],
                    Some(Job::ExportTrace {
                        path: path.into(),
                        snapshot,
                    }),
                )
            }
            ClientMessage::SubscribeForces { decimation } => {
                if decimation == 0 {
                    return (vec![ServerMessage::error("decimation must be at least 1")], None);
                }
                // The subscription itself is per client; see ForceFilter.
                (vec![self.status_msg()], None)
            }
        }
    }

    fn export(&mut self, label: &str, job: impl FnOnce(&Volume) -> Job) -> (Vec<ServerMessage>, Option<Job>) {
        let Some(engine) = &self.engine else {
            return (vec![ServerMessage::error("no volume loaded")], None);
        };
        let job = job(engine.volume());
        self.transient = Some(label.into());
        (vec![self.status_msg()], Some(job))
    }

    /// Finishes a job: installs a loaded volume or relays the completion, then
    /// clears the transient message.
    pub fn complete(&mut self, output: JobOutput) -> Vec<ServerMessage> {
        self.transient = None;
        match output {
            JobOutput::Loaded(volume) => {
                self.install(volume);
                vec![self.status_msg()]
            }
            JobOutput::Message(msg) => vec![msg, self.status_msg()],
        }
    }

    fn slice(&self, axis: Axis, index: i64) -> ServerMessage {
        let Some(engine) = &self.engine else {
            return ServerMessage::error("no volume loaded");
        };
        let volume = engine.volume();
        let extent = volume.dims()[axis.index()];
        let image = usize::try_from(index)
            .ok()
            .and_then(|i| slice_image(volume, axis, i).map(|img| (i, img)));
        let Some((index, image)) = image else {
            return ServerMessage::error(format!(
                "slice index {index} out of range 0..{extent} for axis {axis:?}"
            ));
        };
        let mut png = Vec::new();
        if let Err(e) = image.write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png) {
            return ServerMessage::error(format!("png encoding failed: {e}"));
        }
        ServerMessage::Slice {
            axis,
            index,
            png_base64: base64::engine::general_purpose::STANDARD.encode(png),
        }
    }

    /// Runs one tick. Uses the oldest queued probe, or holds the previous one
    /// when the queue is empty. Returns `None` until a volume is loaded and a
    /// probe has arrived.
    pub fn tick(&mut self) -> Option<TickReport> {
        let engine = self.engine.as_mut()?;
        let (pos, sculpt) = self.queue.pop_front().or(self.held)?;
        self.held = Some((pos, sculpt));
        let outcome = engine.step(pos, sculpt);
        Some(TickReport {
            force: ServerMessage::force(&outcome.sample, &outcome.proxy),
            carved: !outcome.carve.is_noop(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TickReport {
    pub force: ServerMessage,
    /// The tick removed material, so slices are stale.
    pub carved: bool,
}
