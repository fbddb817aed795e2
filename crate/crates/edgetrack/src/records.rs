//! Per-frame output records and their JSON Lines rendering.
//!
//! The log carries two kinds of lines. Event lines mark lifecycle changes:
//!
//! ```json
//! {"event":"create","id":1,"frame":31}
//! ```
//!
//! Frame lines snapshot the tracker output for one frame:
//!
//! ```json
//! {"frame":31,"tracks":[{"id":1,"box":[96,104,30,30]}],"detections":[[96,104,30,30]]}
//! ```
//!
//! Stage timings stay in memory only; they vary run to run and would break
//! byte-for-byte log comparison between identical runs.

use serde::Serialize;

use crate::blobs::Detection;
use crate::geometry::BoundingBox;

/// Wall-clock nanoseconds spent in each stage of one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub segment_ns: u64,
    pub blobs_ns: u64,
    pub track_ns: u64,
    pub manage_ns: u64,
    pub emit_ns: u64,
    pub total_ns: u64,
}

/// A live track as reported for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackSnapshot {
    pub id: u64,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackEventKind {
    Create,
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackEvent {
    pub kind: TrackEventKind,
    pub id: u64,
    pub frame: u64,
}

/// Everything the pipeline produced for one frame.
#[derive(Debug, Clone, Default)]
pub struct FrameRecord {
    pub frame: u64,
    pub detections: Vec<Detection>,
    pub tracks: Vec<TrackSnapshot>,
    /// Terminations first, then creations; id order within each group.
    pub events: Vec<TrackEvent>,
    pub timings: StageTimings,
}

/// End-of-run counters printed by the CLI.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunSummary {
    pub frames_processed: u64,
    pub frames_dropped: u64,
    pub tracks_created: u64,
    pub tracks_terminated: u64,
    pub mean_fps: f64,
    /// Most frames ever buffered between source and pipeline.
    pub buffer_high_water_mark: usize,
}

#[derive(Serialize)]
struct TrackLine<'a> {
    id: u64,
    #[serde(rename = "box")]
    bbox: &'a BoundingBox,
}

#[derive(Serialize)]
struct FrameLine<'a> {
    frame: u64,
    tracks: Vec<TrackLine<'a>>,
    detections: Vec<&'a BoundingBox>,
}

#[derive(Serialize)]
struct EventLine<'a> {
    event: &'a str,
    id: u64,
    frame: u64,
}

pub fn event_line_json(event: &TrackEvent) -> String {
    let line = EventLine {
        event: match event.kind {
            TrackEventKind::Create => "create",
            TrackEventKind::Terminate => "terminate",
        },
        id: event.id,
        frame: event.frame,
    };
    serde_json::to_string(&line).expect("event lines always serialize")
}

pub fn frame_line_json(record: &FrameRecord) -> String {
    let line = FrameLine {
        frame: record.frame,
        tracks: record
            .tracks
            .iter()
            .map(|t| TrackLine {
                id: t.id,
                bbox: &t.bbox,
            })
            .collect(),
        detections: record.detections.iter().map(|d| &d.bbox).collect(),
    };
    serde_json::to_string(&line).expect("frame lines always serialize")
}
