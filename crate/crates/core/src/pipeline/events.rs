//! Scripted event input.
//!
//! An event script is JSON lines `{"t": seconds, "type": "audio" | "image" | "reset", "path": file}`.
//! Audio paths name four-channel WAV files. Image paths name a frame
//! descriptor `{"boxes": file, "map": file, "width": px, "height": px}`
//! whose box file is candidate JSON lines and whose map is a PGM or tensor
//! file; width and height default to the map size. Relative paths resolve
//! against the file that mentions them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::machine::{Event, ImageFrame};
use crate::error::{Error, Result};
use crate::fusion::{CandidateSet, LocalizationMap};
use crate::sim::io::{list_wavs, read_wav};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Audio,
    Image,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptLine {
    pub t: f64,
    #[serde(rename = "type")]
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDescriptor {
    pub boxes: PathBuf,
    pub map: PathBuf,
    #[serde(default)]
    pub width: Option<u32>,
    #[serde(default)]
    pub height: Option<u32>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Parses a script; times must be finite and non-decreasing.
pub fn read_script(path: &Path) -> Result<Vec<ScriptLine>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let at = |msg: String| Error::format(path, format!("line {}: {msg}", i + 1));
        let mut line: ScriptLine = serde_json::from_str(raw).map_err(|e| at(e.to_string()))?;
        if !line.t.is_finite() || line.t < last {
            return Err(at(format!("time {} is not finite and non-decreasing", line.t)));
        }
        last = line.t;
        match (line.kind, &line.path) {
            (EventKind::Reset, _) => {}
            (_, None) => return Err(at("audio and image events need a path".into())),
            (_, Some(p)) => line.path = Some(resolve(path, p)),
        }
        lines.push(line);
    }
    Ok(lines)
}

pub fn read_frame(path: &Path) -> Result<ImageFrame> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let desc: FrameDescriptor = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let map = LocalizationMap::read(&resolve(path, &desc.map))?;
    let boxes = CandidateSet::read_jsonl(&resolve(path, &desc.boxes))?;
    let width = desc.width.unwrap_or(map.width() as u32);
    let height = desc.height.unwrap_or(map.height() as u32);
    Ok(ImageFrame {
        candidates: CandidateSet::new(boxes, width, height)?,
        map,
    })
}

/// Loads the file an event refers to.
pub fn load_event(line: &ScriptLine) -> Result<Event> {
    let path = || {
        line.path
            .as_deref()
            .ok_or_else(|| Error::invalid("event without a path"))
    };
    Ok(match line.kind {
        EventKind::Reset => Event::Reset,
        EventKind::Audio => Event::AudioWindow(read_wav(path()?)?),
        EventKind::Image => Event::Image(read_frame(path()?)?),
    })
}

/// Audio events for every WAV in `dir`, in file-name order, `window_s` apart.
pub fn replay_script(dir: &Path, window_s: f64) -> Result<Vec<ScriptLine>> {
    Ok(list_wavs(dir)?
        .into_iter()
        .enumerate()
        .map(|(i, p)| ScriptLine {
            t: i as f64 * window_s,
            kind: EventKind::Audio,
            path: Some(p),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_paths_resolve_and_times_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("events.jsonl");
        fs::write(
            &p,
            "{\"t\":0,\"type\":\"audio\",\"path\":\"a.wav\"}\n{\"t\":1,\"type\":\"reset\"}\n\n{\"t\":2,\"type\":\"image\",\"path\":\"/x/f.json\"}\n",
        )
        .unwrap();
        let s = read_script(&p).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].path.as_deref(), Some(dir.path().join("a.wav").as_path()));
        assert_eq!(s[2].path.as_deref(), Some(Path::new("/x/f.json")));

        fs::write(&p, "{\"t\":2,\"type\":\"reset\"}\n{\"t\":1,\"type\":\"reset\"}\n").unwrap();
        assert!(read_script(&p).is_err());
        fs::write(&p, "{\"t\":0,\"type\":\"audio\"}\n").unwrap();
        assert!(read_script(&p).is_err());
        fs::write(&p, "{\"t\":0,\"type\":\"chime\"}\n").unwrap();
        assert!(read_script(&p).is_err());
    }

    #[test]
    fn frame_descriptor_loads_boxes_and_map() {
        let dir = tempfile::tempdir().unwrap();
        let map = LocalizationMap::from_fn(4, 3, |r, _| r as f64 / 2.0).unwrap();
        map.write_pgm(&dir.path().join("m.pgm")).unwrap();
        fs::write(
            dir.path().join("b.jsonl"),
            "{\"class\":\"dog\",\"confidence\":0.7,\"x\":0,\"y\":1,\"w\":2,\"h\":2}\n",
        )
        .unwrap();
        let f = dir.path().join("frame.json");
        fs::write(&f, r#"{"boxes": "b.jsonl", "map": "m.pgm"}"#).unwrap();
        let frame = read_frame(&f).unwrap();
        assert_eq!((frame.candidates.image_width, frame.candidates.image_height), (4, 3));
        assert_eq!(frame.candidates.boxes[0].class, "dog");
        fs::write(&f, r#"{"boxes": "b.jsonl", "map": "m.pgm", "width": 1, "height": 1}"#).unwrap();
        assert!(read_frame(&f).is_err());
    }
}
