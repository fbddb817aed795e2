//! Throughput benchmark harness.
//!
//! For each requested object count the harness renders (or reuses) a
//! synthetic sequence, runs the full pipeline on it, waits until all objects
//! are simultaneously tracked, discards a warm-up window, and reports frame
//! time statistics over a fixed measurement window. Optionally samples a
//! power sensor file (a sysfs-style text file holding milliwatts) at one
//! second intervals while the run is in flight.
//!
//! Everything is offline and deterministic except the timings themselves.

pub mod reference;
pub mod scene;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::pipeline::{run_collect, PipelineConfig, PipelineError};
use crate::records::FrameRecord;
use crate::segmenter::ForegroundMask;
use crate::videoio::sink::{FrameSink, NullSink};
use crate::videoio::{Frame, ImageSequenceSource, VideoError};

pub use scene::{generate_sequence, SceneError, SyntheticSceneSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("run never reached {n} concurrent tracks")]
    NeverWarm { n: u32 },
    #[error("track count dropped below {n} at frame {frame}; the scene is not steady")]
    NotSustained { n: u32, frame: u64 },
    #[error("only {have} frames after warm-up, need {need}")]
    TooShort { have: usize, need: usize },
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dims: crate::geometry::FrameDims,
    pub object_size: u32,
    pub entry_interval: u32,
    /// Frames discarded after the last object is picked up.
    pub warmup_frames: u32,
    /// Frames the statistics are computed over.
    pub measure_frames: u32,
    pub seed: u64,
    /// Text file holding instantaneous draw in milliwatts.
    pub power_sensor: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dims: crate::geometry::FrameDims::QVGA,
            object_size: 20,
            entry_interval: 30,
            warmup_frames: 50,
            measure_frames: 300,
            seed: 1,
            power_sensor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub n_objects: u32,
    pub fps: f64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    /// Measured frames (the warm-up is not counted).
    pub frames: u32,
    pub power_mw: Option<f64>,
}

/// Samples a milliwatt sensor file, at most once per second.
pub struct PowerMeter {
    path: PathBuf,
    samples: Vec<f64>,
    last_sample: Option<Instant>,
}

impl PowerMeter {
    pub fn new(path: PathBuf) -> Self {
        PowerMeter {
            path,
            samples: Vec::new(),
            last_sample: None,
        }
    }

    /// Reads the sensor if a second has passed since the last attempt.
    /// Unreadable files are skipped, not fatal: on a host without the sensor
    /// the sweep still runs and the power column stays empty.
    pub fn maybe_sample(&mut self) {
        let due = self
            .last_sample
            .is_none_or(|t| t.elapsed() >= Duration::from_secs(1));
        if !due {
            return;
        }
        self.last_sample = Some(Instant::now());
        if let Ok(v) = read_power_mw(&self.path) {
            self.samples.push(v);
        }
    }

    pub fn mean_mw(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().sum::<f64>() / self.samples.len() as f64)
        }
    }
}

pub fn read_power_mw(path: &Path) -> std::io::Result<f64> {
    let text = std::fs::read_to_string(path)?;
    text.trim().parse::<f64>().map_err(|e| {
        std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("bad power reading: {e}"),
        )
    })
}

/// Sink adapter that polls a power meter once per emitted frame.
struct MeteredSink<'m, S> {
    inner: S,
    meter: Option<&'m mut PowerMeter>,
}

impl<S: FrameSink> FrameSink for MeteredSink<'_, S> {
    fn emit(
        &mut self,
        frame: &Frame,
        mask: Option<&ForegroundMask>,
        record: &FrameRecord,
    ) -> Result<(), VideoError> {
        self.inner.emit(frame, mask, record)?;
        if let Some(meter) = self.meter.as_deref_mut() {
            meter.maybe_sample();
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), VideoError> {
        self.inner.finish()
    }
}

/// Frames a sequence must hold so the measurement window fits: last entry,
/// time to cross into the detection zone, warm-up, measurement, slack.
fn frames_needed(n: u32, cfg: &BenchConfig) -> u32 {
    let last_entry = 2 + n.saturating_sub(1) * cfg.entry_interval;
    last_entry + 40 + cfg.warmup_frames + cfg.measure_frames + 10
}

fn sequence_dir(work_dir: &Path, n: u32) -> PathBuf {
    work_dir.join(format!("seq_{n}obj"))
}

/// Renders the sequence for `n` objects unless enough frames are already on
/// disk from an earlier sweep (generation is deterministic, so reuse is
/// safe).
fn ensure_sequence(n: u32, cfg: &BenchConfig, work_dir: &Path) -> Result<PathBuf, BenchError> {
    let dir = sequence_dir(work_dir, n);
    let needed = frames_needed(n, cfg);
    let have = match std::fs::read_dir(&dir) {
        Ok(entries) => entries.filter_map(|e| e.ok()).count() as u32,
        Err(_) => 0,
    };
    if have < needed {
        let spec = SyntheticSceneSpec {
            dims: cfg.dims,
            n_objects: n,
            object_size: cfg.object_size,
            frames: needed,
            entry_interval: cfg.entry_interval,
            seed: cfg.seed,
        };
        generate_sequence(&spec, &dir)?;
    }
    Ok(dir)
}

/// Statistics over one run's records. `warm` is the index of the first
/// record with all `n` tracks live.
fn summarize(
    n: u32,
    records: &[FrameRecord],
    warm: usize,
    cfg: &BenchConfig,
    power_mw: Option<f64>,
) -> Result<BenchRecord, BenchError> {
    let start = warm + cfg.warmup_frames as usize;
    let need = cfg.measure_frames as usize;
    if records.len() < start + need {
        return Err(BenchError::TooShort {
            have: records.len().saturating_sub(start),
            need,
        });
    }
    let window = &records[start..start + need];
    let mut ms: Vec<f64> = window
        .iter()
        .map(|r| r.timings.total_ns as f64 / 1e6)
        .collect();
    let mean_ms = ms.iter().sum::<f64>() / ms.len() as f64;
    ms.sort_by(|a, b| a.total_cmp(b));
    let rank = |q: f64| ms[((q * ms.len() as f64).ceil() as usize).clamp(1, ms.len()) - 1];
    Ok(BenchRecord {
        n_objects: n,
        fps: 1000.0 / mean_ms,
        mean_ms,
        p50_ms: rank(0.50),
        p99_ms: rank(0.99),
        frames: need as u32,
        power_mw,
    })
}

/// Runs the pipeline over the sequence for `n` objects and reports frame
/// time statistics. Also dumps per-frame timings as JSON lines to
/// `raw_out` when given, marking which frames fell in the measured window.
pub fn measure_one<W: Write>(
    n: u32,
    cfg: &BenchConfig,
    work_dir: &Path,
    mut raw_out: Option<W>,
) -> Result<BenchRecord, BenchError> {
    let dir = ensure_sequence(n, cfg, work_dir)?;
    let source = ImageSequenceSource::open(&dir, None, 10.0)?;

    let mut meter = cfg.power_sensor.clone().map(PowerMeter::new);
    let mut sink = MeteredSink {
        inner: NullSink,
        meter: meter.as_mut(),
    };
    let pipeline_cfg = PipelineConfig::default();
    let (_, records) = run_collect(&pipeline_cfg, source, &mut sink)?;

    let warm = records
        .iter()
        .position(|r| r.tracks.len() as u32 == n)
        .ok_or(BenchError::NeverWarm { n })?;
    if let Some(bad) = records[warm..].iter().find(|r| (r.tracks.len() as u32) < n) {
        return Err(BenchError::NotSustained {
            n,
            frame: bad.frame,
        });
    }

    let record = summarize(n, &records, warm, cfg, meter.and_then(|m| m.mean_mw()))?;

    if let Some(out) = raw_out.as_mut() {
        let start = warm + cfg.warmup_frames as usize;
        let end = start + cfg.measure_frames as usize;
        for (i, r) in records.iter().enumerate() {
            writeln!(
                out,
                "{{\"frame\":{},\"total_ms\":{:.6},\"tracks\":{},\"measured\":{}}}",
                r.frame,
                r.timings.total_ns as f64 / 1e6,
                r.tracks.len(),
                i >= start && i < end
            )?;
        }
    }
    Ok(record)
}

/// Full sweep: one record per requested object count. Sequences and raw
/// timing dumps live under `work_dir` (`seq_<n>obj/`, `raw_<n>obj.jsonl`).
pub fn measure(
    objects: &[u32],
    cfg: &BenchConfig,
    work_dir: &Path,
) -> Result<Vec<BenchRecord>, BenchError> {
    std::fs::create_dir_all(work_dir)?;
    let mut out = Vec::with_capacity(objects.len());
    for &n in objects {
        let raw = std::io::BufWriter::new(std::fs::File::create(
            work_dir.join(format!("raw_{n}obj.jsonl")),
        )?);
        out.push(measure_one(n, cfg, work_dir, Some(raw))?);
    }
    Ok(out)
}

/// CSV with `#` metadata comments; one row per object count, power column
/// empty when no sensor sample was collected.
pub fn write_csv<W: Write>(
    records: &[BenchRecord],
    cfg: &BenchConfig,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "# tracking throughput sweep")?;
    writeln!(w, "# frame: {}x{}", cfg.dims.width, cfg.dims.height)?;
    writeln!(
        w,
        "# object_size: {}  entry_interval: {}  seed: {}",
        cfg.object_size, cfg.entry_interval, cfg.seed
    )?;
    writeln!(
        w,
        "# warmup_frames: {}  measure_frames: {}",
        cfg.warmup_frames, cfg.measure_frames
    )?;
    writeln!(w, "n_objects,fps,mean_ms,p50_ms,p99_ms,frames,power_mw")?;
    for r in records {
        let power = r.power_mw.map_or(String::new(), |p| format!("{p:.1}"));
        writeln!(
            w,
            "{},{:.2},{:.3},{:.3},{:.3},{},{}",
            r.n_objects, r.fps, r.mean_ms, r.p50_ms, r.p99_ms, r.frames, power
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameDims;

    fn quick_cfg() -> BenchConfig {
        BenchConfig {
            dims: FrameDims::new(128, 96),
            object_size: 14,
            entry_interval: 10,
            warmup_frames: 10,
            measure_frames: 30,
            seed: 5,
            power_sensor: None,
        }
    }

    #[test]
    fn power_meter_averages_readings() {
        let dir = tempfile::tempdir().unwrap();
        let sensor = dir.path().join("power");
        std::fs::write(&sensor, "4200\n").unwrap();
        let mut meter = PowerMeter::new(sensor.clone());
        meter.maybe_sample();
        assert_eq!(meter.mean_mw(), Some(4200.0));
        // within the same second nothing new is read
        std::fs::write(&sensor, "9000\n").unwrap();
        meter.maybe_sample();
        assert_eq!(meter.samples.len(), 1);
    }

    #[test]
    fn missing_sensor_yields_no_mean() {
        let mut meter = PowerMeter::new(PathBuf::from("/nonexistent/power"));
        meter.maybe_sample();
        assert_eq!(meter.mean_mw(), None);
        assert!(read_power_mw(Path::new("/nonexistent/power")).is_err());
    }

    #[test]
    fn garbled_sensor_text_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let sensor = dir.path().join("power");
        std::fs::write(&sensor, "watts: many\n").unwrap();
        assert!(read_power_mw(&sensor).is_err());
    }

    #[test]
    fn csv_rows_match_records() {
        let cfg = BenchConfig::default();
        let records = vec![
            BenchRecord {
                n_objects: 1,
                fps: 12.345,
                mean_ms: 81.0,
                p50_ms: 80.5,
                p99_ms: 99.25,
                frames: 300,
                power_mw: Some(4200.0),
            },
            BenchRecord {
                n_objects: 2,
                fps: 8.0,
                mean_ms: 125.0,
                p50_ms: 124.0,
                p99_ms: 140.0,
                frames: 300,
                power_mw: None,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&records, &cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            rows[0],
            "n_objects,fps,mean_ms,p50_ms,p99_ms,frames,power_mw"
        );
        assert_eq!(rows[1], "1,12.35,81.000,80.500,99.250,300,4200.0");
        assert_eq!(rows[2], "2,8.00,125.000,124.000,140.000,300,");
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn empty_sweep_writes_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &BenchConfig::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().filter(|l| !l.starts_with('#')).count() == 1);
    }

    #[test]
    fn sweep_measures_a_single_object_scene() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_cfg();
        let records = measure(&[1], &cfg, dir.path()).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.n_objects, 1);
        assert_eq!(r.frames, 30);
        assert!(r.fps > 0.0);
        assert!(r.mean_ms > 0.0);
        assert!(r.p50_ms <= r.p99_ms);
        assert_eq!(r.power_mw, None);

        let raw = std::fs::read_to_string(dir.path().join("raw_1obj.jsonl")).unwrap();
        let lines: Vec<_> = raw.lines().collect();
        assert_eq!(lines.len(), frames_needed(1, &cfg) as usize);
        assert_eq!(raw.matches("\"measured\":true").count(), 30);
        assert!(lines[0].starts_with("{\"frame\":1,"));
    }

    #[test]
    fn sequences_are_reused_between_sweeps() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_cfg();
        measure(&[1], &cfg, dir.path()).unwrap();
        let seq = sequence_dir(dir.path(), 1);
        let stamp = |p: &Path| {
            std::fs::metadata(p.join("frame_000001.pgm"))
                .unwrap()
                .modified()
                .unwrap()
        };
        let before = stamp(&seq);
        measure(&[1], &cfg, dir.path()).unwrap();
        assert_eq!(
            stamp(&seq),
            before,
            "second sweep must not rewrite the sequence"
        );
    }

    #[test]
    fn impossible_track_targets_error_out() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_cfg();
        cfg.measure_frames = 5;
        // empty scene: zero objects never yields one track
        let spec = SyntheticSceneSpec {
            dims: cfg.dims,
            n_objects: 0,
            object_size: cfg.object_size,
            frames: 40,
            entry_interval: cfg.entry_interval,
            seed: cfg.seed,
        };
        let seq = sequence_dir(dir.path(), 1);
        generate_sequence(&spec, &seq).unwrap();
        // pad so ensure_sequence sees enough files and reuses the empty scene
        for i in spec.frames + 1..=frames_needed(1, &cfg) {
            let frame = spec.paint_frame(i as u64);
            let bytes = crate::videoio::pnm::encode_pgm(frame.dims, &frame.luma);
            std::fs::write(seq.join(format!("frame_{i:06}.pgm")), bytes).unwrap();
        }
        match measure_one::<std::io::Sink>(1, &cfg, dir.path(), None) {
            Err(BenchError::NeverWarm { n: 1 }) => {}
            other => panic!("expected NeverWarm, got {other:?}"),
        }
    }
}
