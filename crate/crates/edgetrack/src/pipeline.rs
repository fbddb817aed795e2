//! End-to-end processing loop.
//!
//! The first frame only initializes the background model. Every later frame
//! runs segment, model update, blob extraction, the track lifecycle step,
//! and output emission, with wall-clock timings recorded per stage.
//!
//! All randomness is seeded and all stage arithmetic deterministic, so two
//! runs over the same input with the same config produce byte-identical
//! logs, masks and model snapshots.

use std::path::PathBuf;
use std::time::Instant;

use crate::blobs::{extract_detections, BlobConfig, BlobError, Connectivity};
use crate::config::{render_flat, ConfigError, FlatConfig};
use crate::manager::{ManagerConfig, ManagerError, ManagerState, TrackerConfig};
use crate::records::{FrameRecord, RunSummary};
use crate::segmenter::{ForegroundMask, SegmenterConfig, SegmenterError, SegmenterState};
use crate::tracker::TrackerKind;
use crate::videoio::{
    open_source, DiskSink, Frame, FrameSink, FrameSource, LiveReplaySource, SinkSpec, VideoError,
};

/// Coarse classes for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Missing or unreadable input, unwritable output.
    Io,
    /// A config that can be rejected before processing starts.
    Config,
    /// Failure while frames were being processed.
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Segmenter(#[from] SegmenterError),
    #[error(transparent)]
    Blob(#[from] BlobError),
    #[error(transparent)]
    Manager(#[from] ManagerError),
}

impl PipelineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PipelineError::Video(_) => ErrorClass::Io,
            PipelineError::Config(_)
            | PipelineError::Blob(_)
            | PipelineError::Manager(_)
            | PipelineError::Segmenter(SegmenterError::InvalidConfig(_)) => ErrorClass::Config,
            PipelineError::Segmenter(SegmenterError::DimsMismatch { .. }) => ErrorClass::Runtime,
        }
    }
}

/// Where frames come from.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    /// Directory (image sequence) or `.y4m` file.
    pub path: PathBuf,
    /// Optional `prefix*suffix` filename filter for sequences.
    pub pattern: Option<String>,
    /// Nominal rate for sequences; y4m streams carry their own.
    pub fps: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            path: PathBuf::new(),
            pattern: None,
            fps: 10.0,
        }
    }
}

/// What to do when frames arrive faster than they are processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropPolicy {
    /// Offline mode: process every frame as fast as possible.
    ProcessEvery,
    /// Live mode: replay on the source clock and keep only the newest frame.
    DropToLatest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub segmenter: SegmenterConfig,
    pub blobs: BlobConfig,
    pub manager: ManagerConfig,
    pub tracker: TrackerConfig,
    pub drop_policy: DropPolicy,
    pub source: SourceSpec,
    pub sink: SinkSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            segmenter: SegmenterConfig::default(),
            blobs: BlobConfig::default(),
            manager: ManagerConfig::default(),
            tracker: TrackerConfig::default(),
            drop_policy: DropPolicy::ProcessEvery,
            source: SourceSpec::default(),
            sink: SinkSpec::all("out"),
        }
    }
}

impl PipelineConfig {
    /// Applies flat-file assignments over the defaults. Unknown keys are an
    /// error; every key consumed here is also produced by [`Self::dump`].
    pub fn from_flat(mut flat: FlatConfig) -> Result<Self, ConfigError> {
        let mut cfg = PipelineConfig::default();

        let s = &mut cfg.segmenter;
        if let Some(v) = flat.take_u32("segmenter.samples")? {
            s.n_samples = v;
        }
        if let Some(v) = flat.take_u32("segmenter.min_matches")? {
            s.min_matches = v;
        }
        if let Some(v) = flat.take_f32("segmenter.r_init")? {
            s.r_init = v;
        }
        if let Some(v) = flat.take_f32("segmenter.r_lower")? {
            s.r_lower = v;
        }
        if let Some(v) = flat.take_f32("segmenter.r_upper")? {
            s.r_upper = v;
        }
        if let Some(v) = flat.take_f32("segmenter.r_scale")? {
            s.r_scale = v;
        }
        if let Some(v) = flat.take_f32("segmenter.r_adapt")? {
            s.r_adapt = v;
        }
        if let Some(v) = flat.take_f32("segmenter.t_init")? {
            s.t_init = v;
        }
        if let Some(v) = flat.take_f32("segmenter.t_lower")? {
            s.t_lower = v;
        }
        if let Some(v) = flat.take_f32("segmenter.t_upper")? {
            s.t_upper = v;
        }
        if let Some(v) = flat.take_f32("segmenter.t_inc")? {
            s.t_inc = v;
        }
        if let Some(v) = flat.take_f32("segmenter.t_dec")? {
            s.t_dec = v;
        }
        if let Some(v) = flat.take_u64("segmenter.seed")? {
            s.seed = v;
        }

        let b = &mut cfg.blobs;
        if let Some(v) = flat.take_u64("blobs.min_area")? {
            b.min_area = v;
        }
        if let Some(v) = flat.take_u64("blobs.max_area")? {
            b.max_area = v;
        }
        if let Some(v) = flat.take_u32("blobs.border_margin")? {
            b.border_margin = v;
        }
        if let Some(v) = flat.take_u32("blobs.connectivity")? {
            b.connectivity = match v {
                4 => Connectivity::Four,
                8 => Connectivity::Eight,
                other => {
                    return Err(ConfigError::InvalidValue {
                        key: "blobs.connectivity".into(),
                        msg: format!("must be 4 or 8, got {other}"),
                    })
                }
            };
        }

        let m = &mut cfg.manager;
        if let Some(v) = flat.take_u32("manager.edge_stop_margin")? {
            m.edge_stop_margin = v;
        }
        if let Some(v) = flat.take_f64("manager.new_object_iou_threshold")? {
            m.new_object_iou_threshold = v;
        }

        if let Some(v) = flat.take_string("tracker.kind") {
            cfg.tracker.kind = parse_tracker_kind(&v).map_err(|msg| ConfigError::InvalidValue {
                key: "tracker.kind".into(),
                msg,
            })?;
        }
        if let Some(v) = flat.take_f64("tracker.context_factor")? {
            cfg.tracker.context_factor = v;
        }

        if let Some(v) = flat.take_string("pipeline.drop_policy") {
            cfg.drop_policy = match v.as_str() {
                "process_every" => DropPolicy::ProcessEvery,
                "drop_to_latest" => DropPolicy::DropToLatest,
                other => {
                    return Err(ConfigError::InvalidValue {
                        key: "pipeline.drop_policy".into(),
                        msg: format!("must be process_every or drop_to_latest, got {other}"),
                    })
                }
            };
        }

        if let Some(v) = flat.take_string("source.path") {
            cfg.source.path = PathBuf::from(v);
        }
        if let Some(v) = flat.take_string("source.pattern") {
            cfg.source.pattern = if v.is_empty() { None } else { Some(v) };
        }
        if let Some(v) = flat.take_f64("source.fps")? {
            if v <= 0.0 {
                return Err(ConfigError::InvalidValue {
                    key: "source.fps".into(),
                    msg: "must be positive".into(),
                });
            }
            cfg.source.fps = v;
        }

        if let Some(v) = flat.take_string("sink.dir") {
            cfg.sink.dir = PathBuf::from(v);
        }
        if let Some(v) = flat.take_bool("sink.masks")? {
            cfg.sink.write_masks = v;
        }
        if let Some(v) = flat.take_bool("sink.annotated")? {
            cfg.sink.write_annotated = v;
        }
        if let Some(v) = flat.take_bool("sink.log")? {
            cfg.sink.write_log = v;
        }

        flat.ensure_empty()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |e: String| ConfigError::Invalid(e);
        self.segmenter.validate().map_err(|e| wrap(e.to_string()))?;
        self.blobs.validate().map_err(|e| wrap(e.to_string()))?;
        self.manager.validate().map_err(|e| wrap(e.to_string()))?;
        if self.tracker.context_factor < 1.0 {
            return Err(wrap(format!(
                "tracker.context_factor must be at least 1.0, got {}",
                self.tracker.context_factor
            )));
        }
        Ok(())
    }

    /// The full effective configuration in the flat file format; parsing it
    /// back yields the same config.
    pub fn dump(&self) -> String {
        let s = &self.segmenter;
        let b = &self.blobs;
        let pairs = [
            ("segmenter.samples", s.n_samples.to_string()),
            ("segmenter.min_matches", s.min_matches.to_string()),
            ("segmenter.r_init", s.r_init.to_string()),
            ("segmenter.r_lower", s.r_lower.to_string()),
            ("segmenter.r_upper", s.r_upper.to_string()),
            ("segmenter.r_scale", s.r_scale.to_string()),
            ("segmenter.r_adapt", s.r_adapt.to_string()),
            ("segmenter.t_init", s.t_init.to_string()),
            ("segmenter.t_lower", s.t_lower.to_string()),
            ("segmenter.t_upper", s.t_upper.to_string()),
            ("segmenter.t_inc", s.t_inc.to_string()),
            ("segmenter.t_dec", s.t_dec.to_string()),
            ("segmenter.seed", s.seed.to_string()),
            ("blobs.min_area", b.min_area.to_string()),
            ("blobs.max_area", b.max_area.to_string()),
            ("blobs.border_margin", b.border_margin.to_string()),
            (
                "blobs.connectivity",
                match b.connectivity {
                    Connectivity::Four => "4".to_string(),
                    Connectivity::Eight => "8".to_string(),
                },
            ),
            (
                "manager.edge_stop_margin",
                self.manager.edge_stop_margin.to_string(),
            ),
            (
                "manager.new_object_iou_threshold",
                self.manager.new_object_iou_threshold.to_string(),
            ),
            (
                "tracker.kind",
                match &self.tracker.kind {
                    TrackerKind::Fallback => "fallback".to_string(),
                    TrackerKind::Model(p) => format!("model:{}", p.display()),
                },
            ),
            (
                "tracker.context_factor",
                self.tracker.context_factor.to_string(),
            ),
            (
                "pipeline.drop_policy",
                match self.drop_policy {
                    DropPolicy::ProcessEvery => "process_every".to_string(),
                    DropPolicy::DropToLatest => "drop_to_latest".to_string(),
                },
            ),
            ("source.path", self.source.path.display().to_string()),
            (
                "source.pattern",
                self.source.pattern.clone().unwrap_or_default(),
            ),
            ("source.fps", self.source.fps.to_string()),
            ("sink.dir", self.sink.dir.display().to_string()),
            ("sink.masks", self.sink.write_masks.to_string()),
            ("sink.annotated", self.sink.write_annotated.to_string()),
            ("sink.log", self.sink.write_log.to_string()),
        ];
        render_flat(pairs.iter().map(|(k, v)| (*k, v.clone())))
    }
}

/// `fallback` or `model:<path>`.
pub fn parse_tracker_kind(text: &str) -> Result<TrackerKind, String> {
    if text == "fallback" {
        return Ok(TrackerKind::Fallback);
    }
    if let Some(path) = text.strip_prefix("model:") {
        if path.is_empty() {
            return Err("model path is empty".into());
        }
        return Ok(TrackerKind::Model(PathBuf::from(path)));
    }
    Err(format!(
        "expected `fallback` or `model:<path>`, got `{text}`"
    ))
}

/// Frame-by-frame processing core, usable without any I/O.
pub struct Pipeline {
    config: PipelineConfig,
    segmenter: Option<SegmenterState>,
    manager: ManagerState,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let manager = ManagerState::new(config.manager, &config.tracker)?;
        Ok(Pipeline {
            config,
            segmenter: None,
            manager,
        })
    }

    pub fn manager(&self) -> &ManagerState {
        &self.manager
    }

    pub fn segmenter(&self) -> Option<&SegmenterState> {
        self.segmenter.as_ref()
    }

    /// Runs all stages for one frame. The first frame initializes the
    /// background model and yields an empty record with no mask. Timings
    /// cover the stages run here; `emit_ns` is filled by the caller that
    /// owns the sink, and `total_ns` then covers everything.
    pub fn process_frame(
        &mut self,
        frame: &Frame,
    ) -> Result<(FrameRecord, Option<ForegroundMask>), PipelineError> {
        let started = Instant::now();
        let mut record = FrameRecord {
            frame: frame.index,
            ..Default::default()
        };

        let state = match &mut self.segmenter {
            None => {
                self.segmenter = Some(SegmenterState::init_model(frame, self.config.segmenter)?);
                record.timings.segment_ns = started.elapsed().as_nanos() as u64;
                record.timings.total_ns = record.timings.segment_ns;
                return Ok((record, None));
            }
            Some(state) => state,
        };

        let t = Instant::now();
        let mask = state.segment(frame)?;
        state.update_model(frame, &mask)?;
        record.timings.segment_ns = t.elapsed().as_nanos() as u64;

        let t = Instant::now();
        record.detections = extract_detections(&mask, &self.config.blobs, frame.index)?;
        record.timings.blobs_ns = t.elapsed().as_nanos() as u64;

        let t = Instant::now();
        let step = self.manager.step(frame, &record.detections);
        let manage_total = t.elapsed().as_nanos() as u64;
        record.tracks = step.tracks;
        record.events = step.events;
        record.timings.track_ns = step.track_ns;
        record.timings.manage_ns = manage_total.saturating_sub(step.track_ns);

        record.timings.total_ns = started.elapsed().as_nanos() as u64;
        Ok((record, Some(mask)))
    }
}

/// Drives `source` through a [`Pipeline`] into `sink`. Records are returned
/// only when `keep_records` is set; long live runs should not keep them.
fn drive(
    config: &PipelineConfig,
    mut source: impl FrameSource,
    sink: &mut dyn FrameSink,
    keep_records: bool,
) -> Result<(RunSummary, Vec<FrameRecord>), PipelineError> {
    let mut pipeline = Pipeline::new(config.clone())?;
    let mut records = Vec::new();
    let mut frames_processed = 0u64;
    let run_started = Instant::now();

    while let Some(frame) = source.next_frame()? {
        let frame_started = Instant::now();
        let (mut record, mask) = pipeline.process_frame(&frame)?;
        let emit_started = Instant::now();
        sink.emit(&frame, mask.as_ref(), &record)?;
        record.timings.emit_ns = emit_started.elapsed().as_nanos() as u64;
        record.timings.total_ns = frame_started.elapsed().as_nanos() as u64;
        frames_processed += 1;
        if keep_records {
            records.push(record);
        }
    }
    sink.finish()?;

    let elapsed = run_started.elapsed().as_secs_f64();
    let summary = RunSummary {
        frames_processed,
        frames_dropped: source.dropped(),
        tracks_created: pipeline.manager.created_total(),
        tracks_terminated: pipeline.manager.terminated_total(),
        mean_fps: if elapsed > 0.0 {
            frames_processed as f64 / elapsed
        } else {
            0.0
        },
        buffer_high_water_mark: source.max_buffered(),
    };
    Ok((summary, records))
}

/// Opens the configured source and sink and processes the whole stream.
pub fn run(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    if config.source.path.as_os_str().is_empty() {
        return Err(ConfigError::Invalid("source.path is required".into()).into());
    }
    let source = open_source(
        &config.source.path,
        config.source.pattern.as_deref(),
        config.source.fps,
    )?;
    let mut sink = DiskSink::create(config.sink.clone())?;
    match config.drop_policy {
        DropPolicy::ProcessEvery => drive(config, source, &mut sink, false),
        DropPolicy::DropToLatest => drive(config, LiveReplaySource::new(source), &mut sink, false),
    }
    .map(|(summary, _)| summary)
}

/// Like [`run`] but with caller-provided source and sink; used by tests and
/// the benchmark harness.
pub fn run_with(
    config: &PipelineConfig,
    source: impl FrameSource,
    sink: &mut dyn FrameSink,
) -> Result<RunSummary, PipelineError> {
    drive(config, source, sink, false).map(|(summary, _)| summary)
}

/// Like [`run_with`] but also returns every frame record.
pub fn run_collect(
    config: &PipelineConfig,
    source: impl FrameSource,
    sink: &mut dyn FrameSink,
) -> Result<(RunSummary, Vec<FrameRecord>), PipelineError> {
    drive(config, source, sink, true)
}

/// Current resident set size of this process, if the platform exposes it.
pub fn resident_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmRSS:") {
            let kb: u64 = rest.trim().trim_end_matches(" kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}
