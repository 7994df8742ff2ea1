//! Scene JSON I/O with canonical serialization.
//!
//! The on-disk schema is documented in the repository README. Serialization
//! is deterministic: object keys are sorted (maps are backed by `BTreeMap`),
//! floats are quantized to 9 significant digits, and the drivable grid is
//! run-length encoded. `save(load(f))` reproduces a canonical file
//! byte-for-byte.

use super::{
    AgentBox, AgentCategory, AgentRole, AgentTrack, BevMap, Pose2D, Scene, SceneError, TrackPoint,
};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Format a float with at most 9 significant digits.
///
/// Plain decimal for moderate exponents, scientific otherwise; always
/// re-parses as a JSON float (never an integer). Idempotent under
/// parse-then-format, which is what makes canonical files stable.
pub(crate) fn fmt_canonical_f64(x: f64) -> String {
    assert!(x.is_finite(), "cannot serialize non-finite float");
    if x == 0.0 {
        return "0.0".to_string();
    }
    let sci = format!("{:.8e}", x);
    let (mant, exp_str) = sci.split_once('e').expect("{:e} output has exponent");
    let exp: i32 = exp_str.parse().expect("exponent is an integer");
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let body = if (-4..=12).contains(&exp) {
        if exp >= 0 {
            let e = exp as usize;
            if digits.len() > e {
                let int = &digits[..=e];
                let frac = &digits[e + 1..];
                if frac.is_empty() {
                    format!("{int}.0")
                } else {
                    format!("{int}.{frac}")
                }
            } else {
                format!("{}{}.0", digits, "0".repeat(e + 1 - digits.len()))
            }
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        }
    } else {
        let (first, rest) = digits.split_at(1);
        if rest.is_empty() {
            format!("{first}e{exp}")
        } else {
            format!("{first}.{rest}e{exp}")
        }
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        writer.write_all(fmt_canonical_f64(value).as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        writer.write_all(fmt_canonical_f64(value as f64).as_bytes())
    }
}

/// Serialize any JSON value in the canonical form (sorted keys come from the
/// default `BTreeMap`-backed `serde_json::Map`).
pub fn canonical_json_bytes(value: &Value) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter);
    serde::Serialize::serialize(value, &mut ser).expect("JSON value serialization cannot fail");
    buf.push(b'\n');
    buf
}

// ---------------------------------------------------------------------------
// Schema mirror for deserialization
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    map: MapFile,
    dt: f64,
    frames: u64,
    agents: Vec<AgentFile>,
    #[serde(default)]
    provenance: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    origin: [f64; 2],
    resolution: f64,
    rows: u64,
    cols: u64,
    drivable: DrivableFile,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DrivableFile {
    Flat(Vec<u8>),
    Rle { rle: Vec<u64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentFile {
    id: String,
    role: AgentRole,
    category: AgentCategory,
    dims: [f64; 3],
    track: Vec<TrackEntryFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackEntryFile {
    t: u64,
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
    present: bool,
}

fn decode_drivable(d: DrivableFile, rows: usize, cols: usize) -> Result<Vec<bool>, SceneError> {
    let n = rows * cols;
    match d {
        DrivableFile::Flat(v) => {
            if v.len() != n {
                return Err(SceneError::Parse(format!(
                    "map.drivable: expected {n} cells, got {}",
                    v.len()
                )));
            }
            v.iter()
                .map(|&b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(SceneError::Parse(format!(
                        "map.drivable: cells must be 0 or 1, got {other}"
                    ))),
                })
                .collect()
        }
        DrivableFile::Rle { rle } => {
            let mut out = Vec::with_capacity(n);
            let mut value = false;
            for (i, &run) in rle.iter().enumerate() {
                if run == 0 && i != 0 {
                    return Err(SceneError::Parse(
                        "map.drivable.rle: only the leading run may be zero".into(),
                    ));
                }
                out.extend(std::iter::repeat_n(value, run as usize));
                value = !value;
            }
            if out.len() != n {
                return Err(SceneError::Parse(format!(
                    "map.drivable.rle: runs sum to {}, expected {n}",
                    out.len()
                )));
            }
            Ok(out)
        }
    }
}

fn scene_from_file(file: SceneFile) -> Result<(Scene, Option<Value>), SceneError> {
    let rows = file.map.rows as usize;
    let cols = file.map.cols as usize;
    let drivable = decode_drivable(file.map.drivable, rows, cols)?;
    let map = BevMap {
        origin: file.map.origin,
        resolution: file.map.resolution,
        rows,
        cols,
        drivable,
    };
    let tracks = file
        .agents
        .into_iter()
        .map(|a| AgentTrack {
            agent: AgentBox {
                agent_id: a.id,
                length: a.dims[0],
                width: a.dims[1],
                height: a.dims[2],
                category: a.category,
                role: a.role,
            },
            points: a
                .track
                .into_iter()
                .map(|e| TrackPoint {
                    t: e.t as usize,
                    pose: Pose2D::new(e.x, e.y, e.heading),
                    speed: e.speed,
                    present: e.present,
                })
                .collect(),
        })
        .collect();
    let scene = Scene {
        map,
        tracks,
        num_frames: file.frames as usize,
        dt_annot: file.dt,
    };
    scene.validate()?;
    Ok((scene, file.provenance))
}

// ---------------------------------------------------------------------------
// Serialization to the canonical value tree
// ---------------------------------------------------------------------------

fn encode_drivable_rle(drivable: &[bool]) -> Vec<u64> {
    let mut runs = Vec::new();
    let mut value = false;
    let mut count: u64 = 0;
    for &cell in drivable {
        if cell == value {
            count += 1;
        } else {
            runs.push(count);
            value = cell;
            count = 1;
        }
    }
    runs.push(count);
    runs
}

fn role_str(role: AgentRole) -> &'static str {
    match role {
        AgentRole::Ego => "ego",
        AgentRole::Background => "background",
        AgentRole::Adversary => "adversary",
    }
}

fn category_str(cat: AgentCategory) -> &'static str {
    match cat {
        AgentCategory::Vehicle => "vehicle",
        AgentCategory::Pedestrian => "pedestrian",
        AgentCategory::Obstacle => "obstacle",
    }
}

/// Build the canonical JSON value for a scene (plus optional provenance).
pub fn scene_to_value(scene: &Scene, provenance: Option<&Value>) -> Value {
    let agents: Vec<Value> = scene
        .tracks
        .iter()
        .map(|track| {
            let entries: Vec<Value> = track
                .points
                .iter()
                .map(|p| {
                    json!({
                        "t": p.t as u64,
                        "x": p.pose.x,
                        "y": p.pose.y,
                        "heading": p.pose.heading,
                        "speed": p.speed,
                        "present": p.present,
                    })
                })
                .collect();
            json!({
                "id": track.agent.agent_id,
                "role": role_str(track.agent.role),
                "category": category_str(track.agent.category),
                "dims": [track.agent.length, track.agent.width, track.agent.height],
                "track": entries,
            })
        })
        .collect();
    let mut root = Map::new();
    root.insert(
        "map".into(),
        json!({
            "origin": [scene.map.origin[0], scene.map.origin[1]],
            "resolution": scene.map.resolution,
            "rows": scene.map.rows as u64,
            "cols": scene.map.cols as u64,
            "drivable": { "rle": encode_drivable_rle(&scene.map.drivable) },
        }),
    );
    root.insert("dt".into(), json!(scene.dt_annot));
    root.insert("frames".into(), json!(scene.num_frames as u64));
    root.insert("agents".into(), Value::Array(agents));
    if let Some(p) = provenance {
        root.insert("provenance".into(), p.clone());
    }
    Value::Object(root)
}

/// Canonical scene bytes, as written by [`save_scene`].
pub fn scene_to_canonical_bytes(scene: &Scene, provenance: Option<&Value>) -> Vec<u8> {
    canonical_json_bytes(&scene_to_value(scene, provenance))
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// Load and validate a scene file, ignoring any provenance block.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    load_scene_with_provenance(path).map(|(s, _)| s)
}

/// Load a scene plus its provenance block, when present.
pub fn load_scene_with_provenance(
    path: impl AsRef<Path>,
) -> Result<(Scene, Option<Value>), SceneError> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let file: SceneFile = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| SceneError::Parse(format!("{}: {}", e.path(), e.inner())))?;
    scene_from_file(file)
}

/// Write a validated scene in canonical form.
pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    save_scene_with_provenance(scene, None, path)
}

/// Write a validated scene plus an optional provenance block.
pub fn save_scene_with_provenance(
    scene: &Scene,
    provenance: Option<&Value>,
    path: impl AsRef<Path>,
) -> Result<(), SceneError> {
    scene.validate()?;
    let bytes = scene_to_canonical_bytes(scene, provenance);
    let mut f = fs::File::create(path.as_ref())?;
    f.write_all(&bytes)?;
    Ok(())
}
