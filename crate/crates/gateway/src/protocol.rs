//! JSON messages exchanged with UI clients. Every message is an object with a
//! `type` tag; field names are part of the wire contract.

use morpho_core::{Axis, ForceSample, HapticConfig, ProxyState, SessionConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    LoadVolume {
        path: String,
        spacing_mm: [f64; 3],
    },
    Probe {
        pos_mm: [f64; 3],
        sculpt: bool,
    },
    SetConfig(ConfigPatch),
    GetSlice {
        axis: Axis,
        index: i64,
    },
    ExportVolume {
        path: String,
    },
    ExportMesh {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        isovalue: Option<f64>,
    },
    /// Full-rate force trace as CSV.
    ExportTrace {
        path: String,
    },
    SubscribeForces {
        #[serde(default = "default_decimation")]
        decimation: u32,
    },
}

fn default_decimation() -> u32 {
    crate::live::DEFAULT_DECIMATION
}

const CLIENT_TYPES: &[&str] = &[
    "load_volume",
    "probe",
    "set_config",
    "get_slice",
    "export_volume",
    "export_mesh",
    "export_trace",
    "subscribe_forces",
];

impl ClientMessage {
    /// Parses one text frame. The error string is meant for an `error` reply.
    pub fn parse(text: &str) -> Result<ClientMessage, String> {
        let value: Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
        let kind = match value.get("type") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err("message type must be a string".into()),
            None if value.is_object() => return Err("message has no type".into()),
            None => return Err("message must be a JSON object".into()),
        };
        if !CLIENT_TYPES.contains(&kind.as_str()) {
            return Err(format!("unknown message type: {kind}"));
        }
        serde_json::from_value(value).map_err(|e| format!("invalid {kind} message: {e}"))
    }

    /// Whether the message changes session state. Read-only clients may only
    /// send the others.
    pub fn is_mutating(&self) -> bool {
        !matches!(
            self,
            ClientMessage::GetSlice { .. } | ClientMessage::SubscribeForces { .. }
        )
    }
}

/// Partial configuration; absent fields keep their current value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_b: Option<f64>,
    #[serde(default, alias = "haptics", skip_serializing_if = "Option::is_none")]
    pub haptics_enabled: Option<bool>,
    #[serde(default, alias = "smoothing", skip_serializing_if = "Option::is_none")]
    pub smoothing_enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick_rate: Option<u32>,
    #[serde(default, alias = "sculpt", skip_serializing_if = "Option::is_none")]
    pub sculpt_enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_radius_mm: Option<f64>,
}

impl ConfigPatch {
    /// Returns `base` with the patch applied. A probe radius given without a
    /// sample radius moves both, so the felt and carved spheres stay equal.
    pub fn apply(&self, base: &SessionConfig) -> SessionConfig {
        let mut cfg = base.clone();
        let h: &mut HapticConfig = &mut cfg.haptic;
        macro_rules! take {
            ($($field:ident => $dst:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $dst = v; })*
            };
        }
        take!(
            stiffness_k => h.stiffness_k,
            iso => h.iso,
            sample_radius => h.sample_radius,
            w_r => h.w_r,
            w_g => h.w_g,
            w_b => h.w_b,
            haptics_enabled => h.haptics_enabled,
            smoothing_enabled => h.smoothing_enabled,
            f_max => h.f_max,
            tick_rate => h.tick_rate,
        );
        if let Some(r) = self.probe_radius_mm {
            cfg.probe_radius = r;
            if self.sample_radius.is_none() {
                cfg.haptic.sample_radius = r;
            }
        }
        if let Some(s) = self.sculpt_enabled {
            cfg.sculpt_enabled = s;
        }
        cfg
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toggles {
    pub haptics: bool,
    pub smoothing: bool,
    pub sculpt: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub volume_loaded: bool,
    pub dims: Option<[usize; 3]>,
    pub revision: u64,
    pub toggles: Toggles,
    pub transient_message: Option<String>,
    /// Probe messages discarded because the queue was full.
    pub dropped_probes: u64,
    pub tick: u64,
    pub f_max: f64,
    pub probe_radius_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Status(SessionStatus),
    Force {
        tick: u64,
        out_f: [f64; 3],
        l_avg: f64,
        in_contact: bool,
        raw_f: [f64; 3],
        modulated_f: [f64; 3],
    },
    Slice {
        axis: Axis,
        index: usize,
        png_base64: String,
    },
    Done {
        op: String,
        path: String,
    },
    Error {
        reason: String,
    },
}

impl ServerMessage {
    pub fn error(reason: impl Into<String>) -> Self {
        ServerMessage::Error { reason: reason.into() }
    }

    pub fn force(sample: &ForceSample, proxy: &ProxyState) -> Self {
        let a = |v: &morpho_core::Vec3| [v.x, v.y, v.z];
        ServerMessage::Force {
            tick: sample.tick,
            out_f: a(&sample.output_f),
            l_avg: sample.l_avg,
            in_contact: proxy.in_contact,
            raw_f: a(&sample.raw_f),
            modulated_f: a(&sample.modulated_f),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }

    pub fn parse(text: &str) -> serde_json::Result<ServerMessage> {
        serde_json::from_str(text)
    }
}
