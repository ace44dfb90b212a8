//! `morpho` command line.

use std::ffi::OsString;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use morpho_core::mesher::polygonize;
use morpho_core::session::{load_trajectory, write_trace, SessionConfig};
use morpho_core::stack::import_stack_with_meta;
use morpho_core::{export_stack, export_stl, phantom, run_session, Vec3, Voxel};
use serde_json::json;

use crate::live::LiveSession;

#[derive(Debug, Parser)]
#[command(name = "morpho", version, about = "Visuohaptic volume engine tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a slice stack and print its dimensions.
    Import {
        dir: PathBuf,
        /// Voxel spacing in mm, one value or x,y,z. Defaults to meta.json, then 1.
        #[arg(long, value_parser = parse_spacing)]
        spacing: Option<Vec3>,
    },
    /// Replay a trajectory against a stack and write the force trace.
    Replay {
        volume_dir: PathBuf,
        trajectory: PathBuf,
        /// Session configuration as JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "trace.csv")]
        trace: PathBuf,
        /// Write the carved volume here as a slice stack.
        #[arg(long)]
        export_dir: Option<PathBuf>,
        /// Also write a mesh of the carved volume.
        #[arg(long)]
        stl: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        isovalue: f64,
        #[arg(long, value_parser = parse_spacing)]
        spacing: Option<Vec3>,
    },
    /// Polygonize a stack into a binary STL.
    Mesh {
        dir: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        isovalue: f64,
        #[arg(long, value_parser = parse_spacing)]
        spacing: Option<Vec3>,
    },
    /// Start the WebSocket session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Overridden by MORPHO_PORT.
        #[arg(long, default_value_t = 8765)]
        port: u16,
        /// Stack to load at startup.
        #[arg(long)]
        volume: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic test stack.
    Phantom {
        kind: PhantomKind,
        /// Edge length in voxels.
        #[arg(long, default_value_t = 64)]
        dims: usize,
        /// Sphere radius in voxels. Defaults to a quarter of dims.
        #[arg(long)]
        r: Option<f64>,
        /// Highest filled slice of the half-space. Defaults to the middle.
        #[arg(long)]
        top: Option<usize>,
        /// Gray level of the material.
        #[arg(long, default_value_t = 255)]
        level: u8,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhantomKind {
    HalfSpace,
    Sphere,
    SingleVoxel,
}

fn parse_spacing(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let v = match parts[..] {
        [a] => Vec3::new(a, a, a),
        [x, y, z] => Vec3::new(x, y, z),
        _ => return Err("expected one value or x,y,z".into()),
    };
    if v.iter().all(|c| c.is_finite() && *c > 0.0) {
        Ok(v)
    } else {
        Err("spacing must be positive".into())
    }
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<SessionConfig> {
    Ok(match path {
        Some(p) => SessionConfig::from_json_file(p)?,
        None => SessionConfig::default(),
    })
}

fn load_stack(dir: &PathBuf, spacing: Option<Vec3>) -> anyhow::Result<morpho_core::Volume> {
    let default = Vec3::new(1.0, 1.0, 1.0);
    let mut volume = import_stack_with_meta(dir, default)?;
    if let Some(s) = spacing {
        volume =
            morpho_core::Volume::from_voxels(volume.dims(), s, volume.voxels().to_vec())?.with_origin(volume.origin());
    }
    Ok(volume)
}

fn port_override(port: u16) -> anyhow::Result<u16> {
    match std::env::var("MORPHO_PORT") {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("MORPHO_PORT={v:?} is not a port")),
        Err(_) => Ok(port),
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Import { dir, spacing } => {
            let v = load_stack(&dir, spacing)?;
            let [nx, ny, nz] = v.dims();
            let s = v.spacing();
            println!("{}", json!({ "dims": [nx, ny, nz], "spacing_mm": [s.x, s.y, s.z] }));
        }
        Command::Replay {
            volume_dir,
            trajectory,
            config,
            trace,
            export_dir,
            stl,
            isovalue,
            spacing,
        } => {
            let cfg = load_config(config.as_ref())?;
            let volume = load_stack(&volume_dir, spacing)?;
            let frames = load_trajectory(&trajectory)?;
            let out = run_session(volume, &frames, &cfg)?;
            let rows = write_trace(&out.trace, &trace)?;
            if let Some(dir) = &export_dir {
                export_stack(&out.volume, dir)?;
            }
            let triangles = match &stl {
                Some(path) => Some(export_stl(&polygonize(&out.volume, isovalue), path)?),
                None => None,
            };
            println!(
                "{}",
                json!({ "ticks": rows, "revision": out.volume.revision(), "edits": out.dirty.len(), "triangles": triangles })
            );
        }
        Command::Mesh {
            dir,
            output,
            isovalue,
            spacing,
        } => {
            if !(isovalue > 0.0 && isovalue <= 1.0) {
                bail!("isovalue must be in (0, 1]");
            }
            let volume = load_stack(&dir, spacing)?;
            let n = export_stl(&polygonize(&volume, isovalue), &output)?;
            println!("{}", json!({ "triangles": n, "path": output.display().to_string() }));
        }
        Command::Serve {
            host,
            port,
            volume,
            config,
        } => {
            let cfg = load_config(config.as_ref())?;
            let addr = SocketAddr::new(host, port_override(port)?);
            let live = match &volume {
                Some(dir) => LiveSession::with_volume(load_stack(dir, None)?, cfg),
                None => LiveSession::new(cfg),
            };
            let _ = tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .try_init();
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(crate::server::serve(addr, live))?;
        }
        Command::Phantom {
            kind,
            dims,
            r,
            top,
            level,
            output,
        } => {
            if dims == 0 {
                bail!("dims must be positive");
            }
            let unit = Vec3::new(1.0, 1.0, 1.0);
            let voxel = Voxel::gray(level);
            let n = dims as f64;
            let volume = match kind {
                PhantomKind::HalfSpace => {
                    phantom::half_space([dims; 3], unit, top.unwrap_or(dims / 2 - usize::from(dims > 1)), voxel)?
                }
                PhantomKind::Sphere => {
                    let c = (n - 1.0) / 2.0;
                    let mut v = phantom::sphere([dims; 3], unit, Vec3::new(c, c, c), r.unwrap_or(n / 4.0))?;
                    if level != 255 {
                        v = tint(v, level)?;
                    }
                    v
                }
                PhantomKind::SingleVoxel => {
                    let mut v = phantom::single_voxel(dims)?;
                    if level != 255 {
                        v = tint(v, level)?;
                    }
                    v
                }
            };
            let slices = export_stack(&volume, &output)?;
            println!(
                "{}",
                json!({ "dims": volume.dims(), "slices": slices, "path": output.display().to_string() })
            );
        }
    }
    Ok(())
}

/// Scales the color channels, keeping alpha.
fn tint(v: morpho_core::Volume, level: u8) -> anyhow::Result<morpho_core::Volume> {
    let scale = |c: u8| ((u16::from(c) * u16::from(level) + 127) / 255) as u8;
    let voxels = v
        .voxels()
        .iter()
        .map(|x| Voxel::new(scale(x.r), scale(x.g), scale(x.b), x.a))
        .collect();
    Ok(morpho_core::Volume::from_voxels(v.dims(), v.spacing(), voxels)?)
}

/// Runs the CLI and returns the process exit code: 0 on success, 2 on usage
/// errors, 1 on any other failure (with a JSON error line on stderr).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", json!({ "error": format!("{e:#}") }));
            1
        }
    }
}
