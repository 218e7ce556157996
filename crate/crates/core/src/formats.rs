//! File formats shared by the CLI, the simulator, and the tests.
//!
//! - Detection CSV with header `frame,camera,u,v,size,score`
//! - Ground-truth / track CSV with header `frame,id,x,y,z`
//! - Camera rig JSON: an array of objects with `id, fx, fy, cx, cy`,
//!   `rotation` (9 numbers, row-major world-to-camera) and `translation`
//!   (3 numbers)
//! - MOT report JSON (serialized [`crate::metrics::MotReport`])

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tracker::{CameraModel, Detection};

/// One `frame,id,x,y,z` row; used for both ground truth and tracker output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: u64,
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub fn write_detections<W: Write>(writer: W, detections: &[Detection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for det in detections {
        w.serialize(det)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_detections<R: Read>(reader: R) -> Result<Vec<Detection>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in r.deserialize() {
        let det: Detection = record?;
        det.validate()?;
        out.push(det);
    }
    Ok(out)
}

pub fn write_track_records<W: Write>(writer: W, records: &[TrackRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for rec in records {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_track_records<R: Read>(reader: R) -> Result<Vec<TrackRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in r.deserialize() {
        out.push(record?);
    }
    Ok(out)
}

/// JSON wire form of a camera.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraJson {
    id: usize,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: [f64; 9],
    translation: [f64; 3],
}

pub fn write_cameras<W: Write>(writer: W, cameras: &[CameraModel]) -> Result<()> {
    let wire: Vec<CameraJson> = cameras
        .iter()
        .map(|c| {
            let mut rotation = [0.0; 9];
            for row in 0..3 {
                for col in 0..3 {
                    rotation[row * 3 + col] = c.rotation[(row, col)];
                }
            }
            CameraJson {
                id: c.id,
                fx: c.fx,
                fy: c.fy,
                cx: c.cx,
                cy: c.cy,
                rotation,
                translation: [c.translation.x, c.translation.y, c.translation.z],
            }
        })
        .collect();
    serde_json::to_writer_pretty(writer, &wire)?;
    Ok(())
}

pub fn read_cameras<R: Read>(reader: R) -> Result<Vec<CameraModel>> {
    let wire: Vec<CameraJson> = serde_json::from_reader(reader)?;
    let mut cameras = Vec::with_capacity(wire.len());
    for c in wire {
        let camera = CameraModel {
            id: c.id,
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            rotation: Matrix3::from_row_slice(&c.rotation),
            translation: Vector3::new(c.translation[0], c.translation[1], c.translation[2]),
        };
        camera.validate()?;
        cameras.push(camera);
    }
    Ok(cameras)
}
