//! Jetson TX2 reference frame rates for the tracking pipeline, measured on
//! live 640x480 camera input with one to six simultaneously tracked objects.
//! Useful as an overlay when plotting a local throughput sweep: absolute
//! numbers differ across hosts, but the decay with object count should look
//! alike.
//!
//! `clocks` is either `normal` (power-governor defaults) or `max`
//! (jetson_clocks pinned to the ceiling). `mode` is the nvpmodel profile.

use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCurve {
    pub mode: &'static str,
    pub clocks: &'static str,
    /// fps for 1..=6 tracked objects.
    pub fps_by_objects: [f64; 6],
}

pub const JETSON_TX2_REFERENCE: [ReferenceCurve; 10] = [
    ReferenceCurve {
        mode: "max_n",
        clocks: "normal",
        fps_by_objects: [10.9, 8.6, 6.8, 5.4, 4.7, 3.9],
    },
    ReferenceCurve {
        mode: "max_q",
        clocks: "normal",
        fps_by_objects: [7.2, 5.1, 4.8, 3.9, 3.3, 2.9],
    },
    ReferenceCurve {
        mode: "max_p_core_all",
        clocks: "normal",
        fps_by_objects: [8.6, 6.5, 5.5, 4.5, 3.7, 3.2],
    },
    ReferenceCurve {
        mode: "max_p_arm",
        clocks: "normal",
        fps_by_objects: [10.4, 8.1, 6.2, 5.3, 4.5, 3.7],
    },
    ReferenceCurve {
        mode: "max_p_denver",
        clocks: "normal",
        fps_by_objects: [6.7, 5.6, 4.7, 4.3, 3.8, 3.4],
    },
    ReferenceCurve {
        mode: "max_n",
        clocks: "max",
        fps_by_objects: [16.2, 9.5, 7.4, 6.1, 5.2, 4.5],
    },
    ReferenceCurve {
        mode: "max_q",
        clocks: "max",
        fps_by_objects: [9.3, 6.7, 5.3, 4.3, 3.7, 3.2],
    },
    ReferenceCurve {
        mode: "max_p_core_all",
        clocks: "max",
        fps_by_objects: [13.1, 8.2, 6.4, 5.2, 4.4, 3.9],
    },
    ReferenceCurve {
        mode: "max_p_arm",
        clocks: "max",
        fps_by_objects: [12.5, 8.8, 6.8, 5.5, 4.7, 4.1],
    },
    ReferenceCurve {
        mode: "max_p_denver",
        clocks: "max",
        fps_by_objects: [9.0, 7.2, 5.8, 5.1, 4.2, 3.8],
    },
];

/// Writes the reference table as CSV for plotting next to a local sweep.
pub fn write_reference_csv<W: Write>(mut w: W) -> std::io::Result<()> {
    writeln!(w, "# Jetson TX2 reference frame rates")?;
    writeln!(w, "mode,clocks,n_objects,fps")?;
    for curve in &JETSON_TX2_REFERENCE {
        for (i, fps) in curve.fps_by_objects.iter().enumerate() {
            writeln!(w, "{},{},{},{}", curve.mode, curve.clocks, i + 1, fps)?;
        }
    }
    Ok(())
}
