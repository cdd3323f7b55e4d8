//! Reading and writing field bundles.
//!
//! A bundle is a directory holding `mesh.json`, an optional `bundle.json`
//! manifest, and one `frame_%04d.csv` per time step. Numbers are written in
//! shortest round-trip decimal form, so a load/save cycle is byte-stable.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldFrame, ScalarChannel, TimeVaryingField, TriangleMesh, Vec2};

pub const MESH_FILE: &str = "mesh.json";
pub const MANIFEST_FILE: &str = "bundle.json";

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.csv")
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

#[derive(Serialize, Deserialize)]
struct MeshDoc {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = read_to_string(path)?;
    let doc: MeshDoc = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?;
    TriangleMesh::new(doc.vertices, doc.triangles).map_err(|e| Error::parse(path, 1, e.to_string()))
}

pub fn mesh_to_json(mesh: &TriangleMesh) -> String {
    let doc = MeshDoc {
        vertices: mesh.vertices().to_vec(),
        triangles: mesh.triangles().to_vec(),
    };
    let mut s = serde_json::to_string(&doc).expect("mesh serializes");
    s.push('\n');
    s
}

/// Loads and validates a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<TimeVaryingField> {
    let mesh = load_mesh(&dir.join(MESH_FILE))?;
    let times = load_frame_times(dir)?;
    let mut frames = Vec::with_capacity(times.len());
    for (i, &time) in times.iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        frames.push(read_frame_csv(&path, i, time, mesh.vertex_count())?);
    }
    TimeVaryingField::new(mesh, frames)
}

/// Frame times of a bundle, from its manifest or, without one, one unit apart.
pub fn load_frame_times(dir: &Path) -> Result<Vec<f64>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        // No manifest: count consecutive frame files, unit time step.
        let count = (0..)
            .take_while(|&i| dir.join(frame_file_name(i)).exists())
            .count();
        if count == 0 {
            return Err(Error::io(
                dir.join(frame_file_name(0)),
                std::io::Error::new(std::io::ErrorKind::NotFound, "missing frame file"),
            ));
        }
        return Ok((0..count).map(|i| i as f64).collect());
    }
    let text = read_to_string(&manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(&manifest_path, e.line() as u64, e.to_string()))?;
    match (manifest.times, manifest.dt) {
        (Some(times), _) => {
            if times.len() != manifest.frames {
                return Err(Error::parse(
                    &manifest_path,
                    1,
                    format!(
                        "\"times\" has {} entries but \"frames\" is {}",
                        times.len(),
                        manifest.frames
                    ),
                ));
            }
            Ok(times)
        }
        (None, Some(dt)) => Ok((0..manifest.frames).map(|i| i as f64 * dt).collect()),
        (None, None) => Err(Error::parse(
            &manifest_path,
            1,
            "manifest needs either \"dt\" or \"times\"",
        )),
    }
}

fn read_frame_csv(path: &Path, index: usize, time: f64, vertex_count: usize) -> Result<FieldFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 || &header[0] != "vx" || &header[1] != "vy" {
        return Err(Error::parse(path, 1, "header must start with vx,vy"));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let mut vectors = Vec::with_capacity(vertex_count);
    let mut channels: Vec<Vec<f64>> = vec![Vec::with_capacity(vertex_count); names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        let mut values = record.iter().map(|field| {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("not a number: {field:?}")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::parse(
                    path,
                    line,
                    format!("non-finite value {field:?}"),
                ))
            }
        });
        let vx = values.next().unwrap()?;
        let vy = values.next().unwrap()?;
        vectors.push([vx, vy]);
        for (channel, value) in channels.iter_mut().zip(values) {
            channel.push(value?);
        }
    }
    if vectors.len() != vertex_count {
        return Err(Error::parse(
            path,
            vectors.len() as u64 + 1,
            format!(
                "row count mismatch: {} rows for {} mesh vertices",
                vectors.len(),
                vertex_count
            ),
        ));
    }
    Ok(FieldFrame {
        frame_index: index,
        time,
        vectors,
        scalars: names
            .into_iter()
            .zip(channels)
            .map(|(name, values)| ScalarChannel { name, values })
            .collect(),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

pub fn frame_to_csv(frame: &FieldFrame) -> String {
    let mut out = String::from("vx,vy");
    for channel in &frame.scalars {
        out.push(',');
        out.push_str(&channel.name);
    }
    out.push('\n');
    for (v, vector) in frame.vectors.iter().enumerate() {
        out.push_str(&fmt_f64(vector[0]));
        out.push(',');
        out.push_str(&fmt_f64(vector[1]));
        for channel in &frame.scalars {
            out.push(',');
            out.push_str(&fmt_f64(channel.values[v]));
        }
        out.push('\n');
    }
    out
}

/// Writes a bundle directory; the manifest always lists explicit frame times.
pub fn save_bundle(field: &TimeVaryingField, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(field.frames.len() + 2);
    let mesh_path = dir.join(MESH_FILE);
    write_file(&mesh_path, mesh_to_json(&field.mesh).as_bytes())?;
    written.push(mesh_path);

    let manifest = Manifest {
        frames: field.frames.len(),
        dt: None,
        times: Some(field.frames.iter().map(|f| f.time).collect()),
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string(&manifest).expect("manifest serializes");
    text.push('\n');
    write_file(&manifest_path, text.as_bytes())?;
    written.push(manifest_path);

    for frame in &field.frames {
        let path = dir.join(frame_file_name(frame.frame_index));
        write_file(&path, frame_to_csv(frame).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
