//! Track lifecycle: advance, stop, match, create.
//!
//! Per frame, in this order:
//!
//! 1. Every live track is advanced by its tracker. A track stops when the
//!    tracker fails or when its box gets within `edge_stop_margin` of the
//!    frame border (the object is leaving; a partially visible template
//!    would only drift).
//! 2. Current detections are matched against the previous frame's
//!    detections by IoU. The detection with the weakest best match is the
//!    new-object candidate: anything that overlaps yesterday's detections
//!    well is an object we already know about.
//! 3. The candidate becomes a track only if it also fails to overlap every
//!    live track estimate (IoU below `new_object_iou_threshold`). At most
//!    one track is created per frame; a second new object is picked up a
//!    frame later.
//!
//! Detected boxes never correct live tracks; trackers run free until they
//! stop. That keeps per-frame cost flat and makes lifecycle effects easy to
//! attribute: every created track traces back to exactly one detection.

use std::time::Instant;

use crate::blobs::Detection;
use crate::geometry::BoundingBox;
use crate::records::{TrackEvent, TrackEventKind, TrackSnapshot};
use crate::tracker::{tracker_init, TrackerBackend, TrackerKind, TrackerState};
use crate::videoio::Frame;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ManagerError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManagerConfig {
    /// Tracks stop when their box is closer than this to the frame edge.
    pub edge_stop_margin: u32,
    /// A candidate detection must overlap every live track below this to
    /// be treated as a new object.
    pub new_object_iou_threshold: f64,
}

impl Default for ManagerConfig {
    fn default() -> Self {
        ManagerConfig {
            edge_stop_margin: 4,
            new_object_iou_threshold: 0.3,
        }
    }
}

impl ManagerConfig {
    pub fn validate(&self) -> Result<(), ManagerError> {
        if !(0.0..=1.0).contains(&self.new_object_iou_threshold) {
            return Err(ManagerError::InvalidConfig(format!(
                "new_object_iou_threshold must be in [0, 1], got {}",
                self.new_object_iou_threshold
            )));
        }
        Ok(())
    }
}

/// Tracker selection plus the search context shared by all tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub kind: TrackerKind,
    /// Search region size relative to the box (2.0 doubles each side).
    pub context_factor: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            kind: TrackerKind::Fallback,
            context_factor: 2.0,
        }
    }
}

#[derive(Debug)]
pub struct Track {
    pub id: u64,
    pub created_frame: u64,
    state: TrackerState,
}

impl Track {
    pub fn bbox(&self) -> BoundingBox {
        self.state.bbox()
    }
}

/// What one manager step produced.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Live tracks after this frame, id order.
    pub tracks: Vec<TrackSnapshot>,
    /// Terminations first, then the creation, if any.
    pub events: Vec<TrackEvent>,
    /// Time spent advancing trackers, for stage accounting.
    pub track_ns: u64,
}

#[derive(Debug)]
pub struct ManagerState {
    cfg: ManagerConfig,
    backend: TrackerBackend,
    context_factor: f64,
    tracks: Vec<Track>,
    previous_detections: Vec<Detection>,
    next_id: u64,
    created_total: u64,
    terminated_total: u64,
}

/// Picks the detection least explained by the previous frame: the one whose
/// best IoU against `previous` is smallest. Ties go to the larger component,
/// then to scan order. `None` only when `current` is empty.
pub fn select_candidate<'a>(
    current: &'a [Detection],
    previous: &[Detection],
) -> Option<&'a Detection> {
    let score = |d: &Detection| {
        previous
            .iter()
            .map(|p| d.bbox.iou(&p.bbox))
            .fold(0.0f64, f64::max)
    };
    let mut best: Option<(&Detection, f64)> = None;
    for det in current {
        let s = score(det);
        let better = match best {
            None => true,
            Some((b, bs)) => s < bs || (s == bs && det.pixel_count > b.pixel_count),
        };
        if better {
            best = Some((det, s));
        }
    }
    best.map(|(d, _)| d)
}

impl ManagerState {
    pub fn new(cfg: ManagerConfig, tracker: &TrackerConfig) -> Result<Self, ManagerError> {
        cfg.validate()?;
        let backend = TrackerBackend::load(&tracker.kind)
            .map_err(|e| ManagerError::InvalidConfig(format!("tracker backend: {e}")))?;
        Ok(ManagerState {
            cfg,
            backend,
            context_factor: tracker.context_factor,
            tracks: Vec::new(),
            previous_detections: Vec::new(),
            next_id: 1,
            created_total: 0,
            terminated_total: 0,
        })
    }

    pub fn live_tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn created_total(&self) -> u64 {
        self.created_total
    }

    pub fn terminated_total(&self) -> u64 {
        self.terminated_total
    }

    /// True when the box does not sufficiently overlap any live track.
    pub fn is_new_object(&self, bbox: &BoundingBox) -> bool {
        self.tracks
            .iter()
            .all(|t| bbox.iou(&t.bbox()) < self.cfg.new_object_iou_threshold)
    }

    /// Advances every live track and drops the ones that stop. Returns the
    /// termination events in id order.
    pub fn advance_tracks(&mut self, frame: &Frame) -> Vec<TrackEvent> {
        let mut events = Vec::new();
        let margin = self.cfg.edge_stop_margin as i64;
        let mut kept = Vec::with_capacity(self.tracks.len());
        for mut track in std::mem::take(&mut self.tracks) {
            let stopped = match track.state.tracker_step(frame) {
                // Leaving the frame: stop while the estimate is still sane.
                Ok(bbox) => bbox.border_distance(frame.dims) < margin,
                // A failed tracker ends its own track, never the run.
                Err(_) => true,
            };
            if stopped {
                events.push(TrackEvent {
                    kind: TrackEventKind::Terminate,
                    id: track.id,
                    frame: frame.index,
                });
                self.terminated_total += 1;
            } else {
                kept.push(track);
            }
        }
        self.tracks = kept;
        events
    }

    /// Runs one full lifecycle step for `frame` with its detections.
    pub fn step(&mut self, frame: &Frame, detections: &[Detection]) -> StepResult {
        let started = Instant::now();
        let mut events = self.advance_tracks(frame);
        let track_ns = started.elapsed().as_nanos() as u64;

        if let Some(candidate) = select_candidate(detections, &self.previous_detections) {
            if self.is_new_object(&candidate.bbox) {
                // An uncroppable or undersized candidate is skipped; it can
                // try again on a later frame.
                if let Ok(state) =
                    tracker_init(frame, candidate.bbox, &self.backend, self.context_factor)
                {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.tracks.push(Track {
                        id,
                        created_frame: frame.index,
                        state,
                    });
                    self.created_total += 1;
                    events.push(TrackEvent {
                        kind: TrackEventKind::Create,
                        id,
                        frame: frame.index,
                    });
                }
            }
        }
        self.previous_detections = detections.to_vec();

        StepResult {
            tracks: self
                .tracks
                .iter()
                .map(|t| TrackSnapshot {
                    id: t.id,
                    bbox: t.bbox(),
                })
                .collect(),
            events,
            track_ns,
        }
    }

    #[cfg(test)]
    fn force_track_bbox(&mut self, id: u64, bbox: BoundingBox) {
        let track = self.tracks.iter_mut().find(|t| t.id == id).unwrap();
        track.state.set_bbox_for_tests(bbox);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameDims;
    use crate::rng::PixelRng;

    fn det(x: i32, y: i32, w: u32, h: u32, pixel_count: u64, frame: u64) -> Detection {
        Detection {
            bbox: BoundingBox::new(x, y, w, h),
            pixel_count,
            frame,
        }
    }

    /// Noise background with bright squares; same texture each frame.
    fn scene(dims: FrameDims, squares: &[(i32, i32, u32)], index: u64) -> Frame {
        let mut rng = PixelRng::new(4242, 0, 0);
        let mut luma: Vec<u8> = (0..dims.pixel_count())
            .map(|_| 70 + rng.next_below(50) as u8)
            .collect();
        for &(sx, sy, side) in squares {
            for y in sy..sy + side as i32 {
                for x in sx..sx + side as i32 {
                    if x >= 0 && y >= 0 && (x as u32) < dims.width && (y as u32) < dims.height {
                        luma[y as usize * dims.width as usize + x as usize] = 235;
                    }
                }
            }
        }
        let mut f = Frame::from_luma(dims, index, luma);
        f.timestamp_ns = index * 100_000_000;
        f
    }

    fn manager() -> ManagerState {
        ManagerState::new(ManagerConfig::default(), &TrackerConfig::default()).unwrap()
    }

    #[test]
    fn candidate_is_the_least_matched_detection() {
        let previous = vec![det(10, 10, 10, 10, 100, 1), det(50, 50, 10, 10, 100, 1)];
        // first overlaps previous[0] strongly, second is far from both
        let current = vec![det(11, 10, 10, 10, 100, 2), det(90, 90, 10, 10, 80, 2)];
        let c = select_candidate(&current, &previous).unwrap();
        assert_eq!(c.bbox, BoundingBox::new(90, 90, 10, 10));
    }

    #[test]
    fn candidate_ties_prefer_larger_then_scan_order() {
        let previous = vec![];
        // all scores are 0 against an empty previous frame
        let current = vec![
            det(10, 10, 10, 10, 100, 2),
            det(30, 10, 10, 10, 140, 2),
            det(50, 10, 10, 10, 140, 2),
        ];
        let c = select_candidate(&current, &previous).unwrap();
        assert_eq!(
            c.bbox,
            BoundingBox::new(30, 10, 10, 10),
            "larger wins, first of equals wins"
        );
        assert!(select_candidate(&[], &previous).is_none());
    }

    #[test]
    fn new_object_gate_is_strictly_below_threshold() {
        let dims = FrameDims::new(100, 100);
        let mut mgr = manager();
        let square = (20, 20, 10u32);
        let frame = scene(dims, &[square], 1);
        let d = det(20, 20, 10, 10, 100, 1);
        mgr.step(&frame, &[d]);
        assert_eq!(mgr.live_tracks().len(), 1);

        let candidate = BoundingBox::new(20, 20, 10, 10);
        assert!(!mgr.is_new_object(&candidate), "full overlap is never new");
        let disjoint = BoundingBox::new(60, 60, 10, 10);
        assert!(mgr.is_new_object(&disjoint));
        // 6x10 overlap of two 10x10 boxes: IoU 60/140 > 0.3, not new
        assert!(!mgr.is_new_object(&BoundingBox::new(24, 20, 10, 10)));
        // 1x10 overlap: IoU 10/190 < 0.3, new
        assert!(mgr.is_new_object(&BoundingBox::new(29, 20, 10, 10)));
    }

    #[test]
    fn first_detection_creates_a_track_with_id_one() {
        let dims = FrameDims::new(80, 60);
        let mut mgr = manager();
        let frame = scene(dims, &[(30, 20, 12)], 5);
        let result = mgr.step(&frame, &[det(30, 20, 12, 12, 144, 5)]);
        assert_eq!(result.events.len(), 1);
        assert_eq!(
            result.events[0],
            TrackEvent {
                kind: TrackEventKind::Create,
                id: 1,
                frame: 5
            }
        );
        assert_eq!(result.tracks.len(), 1);
        assert_eq!(result.tracks[0].bbox, BoundingBox::new(30, 20, 12, 12));
        assert_eq!(mgr.created_total(), 1);
    }

    #[test]
    fn at_most_one_creation_per_frame() {
        // Two objects appear at once but move at different speeds. Only one
        // track may be created per frame; the faster mover matches its own
        // previous detection worse and becomes the next frame's candidate.
        let dims = FrameDims::new(120, 80);
        let mut mgr = manager();
        let f1 = scene(dims, &[(20, 20, 10), (80, 40, 10)], 1);
        let dets = [det(20, 20, 10, 10, 100, 1), det(80, 40, 10, 10, 100, 1)];
        let r1 = mgr.step(&f1, &dets);
        assert_eq!(r1.tracks.len(), 1, "one creation per frame");
        assert_eq!(r1.tracks[0].bbox, BoundingBox::new(20, 20, 10, 10));

        // slow object +1 px (IoU 9/11), fast object +4 px (IoU 6/14)
        let f2 = scene(dims, &[(21, 20, 10), (84, 40, 10)], 2);
        let dets2 = [det(21, 20, 10, 10, 100, 2), det(84, 40, 10, 10, 100, 2)];
        let r2 = mgr.step(&f2, &dets2);
        assert_eq!(r2.tracks.len(), 2);
        let ids: Vec<u64> = r2.tracks.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![1, 2]);
        // and the second track is on the fast square
        assert_eq!(r2.tracks[1].bbox, BoundingBox::new(84, 40, 10, 10));
    }

    #[test]
    fn tracked_objects_do_not_respawn() {
        let dims = FrameDims::new(100, 100);
        let mut mgr = manager();
        let f1 = scene(dims, &[(40, 40, 12)], 1);
        mgr.step(&f1, &[det(40, 40, 12, 12, 144, 1)]);
        // Same object still detected on later frames: candidate every time
        // (it is the only detection) but never a new object.
        for i in 2..6 {
            let f = scene(dims, &[(40, 40, 12)], i);
            let r = mgr.step(&f, &[det(40, 40, 12, 12, 144, i)]);
            assert_eq!(r.tracks.len(), 1, "frame {i}");
            assert!(r.events.is_empty(), "frame {i}");
        }
        assert_eq!(mgr.created_total(), 1);
    }

    #[test]
    fn tracks_follow_moving_objects_without_detections() {
        let dims = FrameDims::new(100, 80);
        let mut mgr = manager();
        let f1 = scene(dims, &[(20, 30, 12)], 1);
        mgr.step(&f1, &[det(20, 30, 12, 12, 144, 1)]);
        // Object keeps moving; detections stop coming (e.g. absorbed).
        for i in 0..5 {
            let x = 23 + 3 * i;
            let f = scene(dims, &[(x, 30, 12)], (2 + i) as u64);
            let r = mgr.step(&f, &[]);
            assert_eq!(r.tracks.len(), 1);
            assert_eq!(r.tracks[0].bbox, BoundingBox::new(x, 30, 12, 12));
        }
    }

    #[test]
    fn leaving_the_frame_terminates_the_track() {
        let dims = FrameDims::new(100, 80);
        let mut mgr = manager();
        let f1 = scene(dims, &[(20, 30, 12)], 1);
        mgr.step(&f1, &[det(20, 30, 12, 12, 144, 1)]);

        // March the square left toward the edge. Termination must fire on
        // the frame where border distance first drops below the margin.
        let mut terminated_at = None;
        for i in 0..8u64 {
            let x = 20 - 3 * (i as i32 + 1);
            let f = scene(dims, &[(x, 30, 12)], 2 + i);
            let r = mgr.step(&f, &[]);
            if let Some(ev) = r.events.first() {
                assert_eq!(ev.kind, TrackEventKind::Terminate);
                assert_eq!(ev.id, 1);
                terminated_at = Some((x, 2 + i));
                assert!(r.tracks.is_empty());
                break;
            }
        }
        // x: 17, 14, ..., margin 4 first violated at x = 2
        assert_eq!(terminated_at, Some((2, 7)));
        assert_eq!(mgr.terminated_total(), 1);
    }

    #[test]
    fn tracker_failure_terminates_only_that_track() {
        let dims = FrameDims::new(100, 80);
        let mut mgr = manager();
        let squares = [(20, 20, 12), (60, 50, 12)];
        let f1 = scene(dims, &squares, 1);
        mgr.step(&f1, &[det(20, 20, 12, 12, 144, 1)]);
        let f2 = scene(dims, &squares, 2);
        mgr.step(
            &f2,
            &[det(20, 20, 12, 12, 144, 2), det(60, 50, 12, 12, 144, 2)],
        );
        assert_eq!(mgr.live_tracks().len(), 2);

        // Force track 1 into a state its tracker cannot step.
        mgr.force_track_bbox(1, BoundingBox::new(-9, 20, 12, 12));
        let f3 = scene(dims, &squares, 3);
        let r = mgr.step(&f3, &[]);
        assert_eq!(r.events.len(), 1);
        assert_eq!(r.events[0].kind, TrackEventKind::Terminate);
        assert_eq!(r.events[0].id, 1);
        assert_eq!(r.tracks.len(), 1);
        assert_eq!(r.tracks[0].id, 2);
    }

    #[test]
    fn ids_never_recycle() {
        let dims = FrameDims::new(100, 80);
        let mut mgr = manager();
        let f1 = scene(dims, &[(40, 30, 12)], 1);
        mgr.step(&f1, &[det(40, 30, 12, 12, 144, 1)]);
        // kill it by walking it out
        for i in 0..20u64 {
            let x = 40 - 4 * (i as i32 + 1);
            let f = scene(dims, &[(x, 30, 12)], 2 + i);
            if !mgr.step(&f, &[]).tracks.is_empty() {
                continue;
            }
            break;
        }
        assert_eq!(mgr.live_tracks().len(), 0);
        // a new object gets id 2, not a reused 1
        let f = scene(dims, &[(50, 50, 12)], 40);
        let r = mgr.step(&f, &[det(50, 50, 12, 12, 144, 40)]);
        assert_eq!(r.tracks[0].id, 2);
    }

    #[test]
    fn config_validation() {
        let bad = ManagerConfig {
            new_object_iou_threshold: 1.5,
            ..Default::default()
        };
        assert!(ManagerState::new(bad, &TrackerConfig::default()).is_err());
    }
}
