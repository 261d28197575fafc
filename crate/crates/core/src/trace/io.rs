//! Trace CSV and cohort-config files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Orientation, TileGridSpec, ViewerTrace};
use crate::error::{Error, Result};

pub const TRACE_CSV_HEADER: [&str; 6] = [
    "viewer_id",
    "frame_index",
    "timestamp_s",
    "yaw_deg",
    "pitch_deg",
    "roll_deg",
];

/// Latency parameters for one viewer in a cohort file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewerEntry {
    pub id: u32,
    pub playback_latency_s: f64,
    pub buffer_s: f64,
    pub device_level: u8,
}

/// Parameters a cohort was (or should be) generated from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateSection {
    pub n_viewers: u32,
    pub duration_s: f64,
    pub correlation: f64,
    pub seed: u64,
}

/// Companion file to a trace CSV carrying per-viewer latencies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSection>,
    #[serde(default, rename = "viewer")]
    pub viewers: Vec<ViewerEntry>,
}

impl CohortFile {
    pub fn from_traces(traces: &[ViewerTrace], generate: Option<GenerateSection>) -> Self {
        Self {
            generate,
            viewers: traces
                .iter()
                .map(|t| ViewerEntry {
                    id: t.viewer_id,
                    playback_latency_s: t.playback_latency_s,
                    buffer_s: t.buffer_s,
                    device_level: t.device_level,
                })
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }
}

/// `traces.csv` -> `traces.cohort.toml`.
pub fn companion_cohort_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("cohort.toml")
}

/// Parsed trace rows, keyed by viewer, before latencies are attached.
pub type TraceRows = BTreeMap<u32, (u32, Vec<Orientation>)>;

pub fn write_trace_csv(path: &Path, traces: &[ViewerTrace], grid: &TileGridSpec) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_CSV_HEADER)?;
    let fps = grid.fps();
    for t in traces {
        for (i, o) in t.poses.iter().enumerate() {
            let frame = t.first_frame + i as u32;
            w.write_record([
                t.viewer_id.to_string(),
                frame.to_string(),
                (f64::from(frame) / fps).to_string(),
                o.yaw.to_string(),
                o.pitch.to_string(),
                o.roll.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_cohort(path: &Path, traces: &[ViewerTrace], generate: Option<GenerateSection>) -> Result<()> {
    CohortFile::from_traces(traces, generate).write(path)
}

/// Writes the trace CSV and its companion cohort file.
pub fn write_traces(
    path: &Path,
    traces: &[ViewerTrace],
    grid: &TileGridSpec,
    generate: Option<GenerateSection>,
) -> Result<()> {
    write_trace_csv(path, traces, grid)?;
    write_cohort(&companion_cohort_path(path), traces, generate)
}

pub fn read_trace_csv(path: &Path) -> Result<TraceRows> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(TRACE_CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column `{name}`", path.display())))?;
    }

    let mut out: TraceRows = BTreeMap::new();
    let mut current: Option<u32> = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| record.get(cols[k]).unwrap_or("").trim();
        let viewer: u32 = field(0)
            .parse()
            .map_err(|e| parse_err(line, format!("viewer_id: {e}")))?;
        let frame: u32 = field(1)
            .parse()
            .map_err(|e| parse_err(line, format!("frame_index: {e}")))?;
        let angle = |k: usize, name: &str| -> Result<f64> {
            field(k)
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("{name}: {e}")))
        };
        let yaw = angle(3, "yaw_deg")?;
        let pitch = angle(4, "pitch_deg")?;
        let roll = angle(5, "roll_deg")?;

        if current != Some(viewer) {
            if out.contains_key(&viewer) {
                return Err(parse_err(line, format!("rows for viewer {viewer} are not contiguous")));
            }
            out.insert(viewer, (frame, Vec::new()));
            current = Some(viewer);
        }
        let (first, poses) = out.get_mut(&viewer).expect("inserted above");
        let expected = *first + poses.len() as u32;
        if !poses.is_empty() && frame != expected {
            return Err(parse_err(
                line,
                format!("viewer {viewer}: frame_index {frame} follows {} (must increase by 1)", expected - 1),
            ));
        }
        poses.push(Orientation::new(yaw, pitch, roll));
    }
    Ok(out)
}

/// Loads a trace CSV and attaches latencies from its companion cohort file.
pub fn load_traces(path: &Path, grid: &TileGridSpec) -> Result<Vec<ViewerTrace>> {
    grid.validate()?;
    let rows = read_trace_csv(path)?;
    let cohort = CohortFile::read(&companion_cohort_path(path))?;
    let mut out = Vec::with_capacity(cohort.viewers.len());
    for entry in &cohort.viewers {
        let (first_frame, poses) = rows
            .get(&entry.id)
            .cloned()
            .ok_or_else(|| Error::Schema(format!("viewer {} has no trace rows", entry.id)))?;
        if usize::from(entry.device_level) >= grid.levels() {
            return Err(Error::Config(format!(
                "viewer {}: device level {} out of range",
                entry.id, entry.device_level
            )));
        }
        out.push(ViewerTrace {
            viewer_id: entry.id,
            first_frame,
            poses,
            playback_latency_s: entry.playback_latency_s,
            buffer_s: entry.buffer_s,
            device_level: entry.device_level,
        });
    }
    if let Some(extra) = rows.keys().find(|id| !cohort.viewers.iter().any(|v| v.id == **id)) {
        return Err(Error::Schema(format!("viewer {extra} has no cohort entry")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    const COHORT: &str = r#"
[[viewer]]
id = 1
playback_latency_s = 4.0
buffer_s = 2.0
device_level = 0

[[viewer]]
id = 2
playback_latency_s = 9.5
buffer_s = 2.0
device_level = 3
"#;

    #[test]
    fn two_viewer_file() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(
            dir.path(),
            "t.csv",
            "viewer_id,frame_index,timestamp_s,yaw_deg,pitch_deg,roll_deg\n\
             1,0,0,10,0,0\n1,1,0.033,11,0,0\n1,2,0.067,12,1,0\n\
             2,0,0,-50,5,0\n2,1,0.033,-49,5,0\n",
        );
        write(dir.path(), "t.cohort.toml", COHORT);
        let traces = load_traces(&csv, &TileGridSpec::default()).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].poses.len(), 3);
        assert_eq!(traces[1].poses.len(), 2);
        assert_eq!(traces[1].device_level, 3);
        assert!((traces[1].download_lag_s() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_frames_are_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(
            dir.path(),
            "t.csv",
            "viewer_id,frame_index,timestamp_s,yaw_deg,pitch_deg,roll_deg\n\
             1,0,0,10,0,0\n1,2,0.067,12,1,0\n1,1,0.033,11,0,0\n",
        );
        write(dir.path(), "t.cohort.toml", COHORT);
        match read_trace_csv(&csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(dir.path(), "t.csv", "viewer_id,frame_index,yaw_deg,pitch_deg\n1,0,1,2\n");
        assert!(matches!(read_trace_csv(&csv), Err(Error::Schema(_))));
    }

    #[test]
    fn bad_number_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(
            dir.path(),
            "t.csv",
            "viewer_id,frame_index,timestamp_s,yaw_deg,pitch_deg,roll_deg\n1,0,0,10,0,0\n1,1,0,abc,0,0\n",
        );
        match read_trace_csv(&csv) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("yaw_deg"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
