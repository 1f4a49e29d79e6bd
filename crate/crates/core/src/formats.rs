//! Keypoint-stream (`ZSRK`) and video-container (`ZSRV`) files.
//!
//! ```text
//! ZSRK: "ZSRK" | u32 T | T×13×(x, y, confidence) f32
//! ZSRV: "ZSRV" | u32 T | u32 H | u32 W | u32 C | T·H·W·C f32 pixels
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{FrameImage, Keypoint, KeypointFrame, NUM_KEYPOINTS};

pub const KEYPOINT_MAGIC: &[u8; 4] = b"ZSRK";
pub const VIDEO_MAGIC: &[u8; 4] = b"ZSRV";

/// Records every data file opened for reading.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccessLog {
    paths: Vec<PathBuf>,
}

impl AccessLog {
    pub fn record(&mut self, path: &Path) {
        self.paths.push(path.to_path_buf());
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }
}

fn open(path: &Path, log: &mut AccessLog) -> Result<BufReader<File>> {
    log.record(path);
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingFile(path.to_path_buf())),
        Err(e) => Err(e.into()),
    }
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_magic(r: &mut impl Read, magic: &[u8; 4], kind: &'static str) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)
        .map_err(|_| Error::format(kind, "file too short for magic"))?;
    if &m != magic {
        return Err(Error::format(kind, format!("bad magic {m:?}")));
    }
    Ok(())
}

fn read_f32s(r: &mut impl Read, n: usize, kind: &'static str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::format(kind, format!("truncated payload, expected {n} values")))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn expect_eof(r: &mut impl Read, kind: &'static str) -> Result<()> {
    let mut extra = [0u8; 1];
    match r.read(&mut extra)? {
        0 => Ok(()),
        _ => Err(Error::format(kind, "trailing bytes after payload")),
    }
}

pub fn encode_keypoints(frames: &[KeypointFrame]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + frames.len() * NUM_KEYPOINTS * 12);
    out.extend_from_slice(KEYPOINT_MAGIC);
    out.extend_from_slice(&(frames.len() as u32).to_le_bytes());
    for kf in frames {
        for p in kf.points() {
            for v in [p.x, p.y, p.confidence] {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_keypoints(r: &mut impl Read) -> Result<Vec<KeypointFrame>> {
    read_magic(r, KEYPOINT_MAGIC, "keypoint")?;
    let t = read_u32(r).map_err(|_| Error::format("keypoint", "missing frame count"))? as usize;
    let vals = read_f32s(r, t * NUM_KEYPOINTS * 3, "keypoint")?;
    expect_eof(r, "keypoint")?;
    let frames = vals
        .chunks_exact(NUM_KEYPOINTS * 3)
        .map(|chunk| {
            let mut pts = [Keypoint::new(0.0, 0.0, 0.0); NUM_KEYPOINTS];
            for (p, c) in pts.iter_mut().zip(chunk.chunks_exact(3)) {
                *p = Keypoint::new(c[0] as f64, c[1] as f64, c[2] as f64);
            }
            KeypointFrame::new(pts)
        })
        .collect();
    Ok(frames)
}

pub fn write_keypoints(path: &Path, frames: &[KeypointFrame]) -> Result<()> {
    std::fs::write(path, encode_keypoints(frames))?;
    Ok(())
}

pub fn read_keypoints(path: &Path, log: &mut AccessLog) -> Result<Vec<KeypointFrame>> {
    decode_keypoints(&mut open(path, log)?)
}

/// Frame count stored in a keypoint file header.
pub fn keypoint_frame_count(path: &Path, log: &mut AccessLog) -> Result<usize> {
    let mut r = open(path, log)?;
    read_magic(&mut r, KEYPOINT_MAGIC, "keypoint")?;
    Ok(read_u32(&mut r).map_err(|_| Error::format("keypoint", "missing frame count"))? as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VideoHeader {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// A decoded video: equally sized frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub frames: Vec<FrameImage>,
}

impl Video {
    pub fn header(&self) -> Result<VideoHeader> {
        let first = self
            .frames
            .first()
            .ok_or_else(|| Error::format("video", "video has no frames"))?;
        Ok(VideoHeader {
            frames: self.frames.len(),
            height: first.height(),
            width: first.width(),
            channels: first.channels(),
        })
    }
}

pub fn encode_video(video: &Video) -> Result<Vec<u8>> {
    let h = video.header()?;
    let mut out = Vec::with_capacity(20 + h.frames * h.height * h.width * h.channels * 4);
    out.extend_from_slice(VIDEO_MAGIC);
    for v in [h.frames, h.height, h.width, h.channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for f in &video.frames {
        if (f.height(), f.width(), f.channels()) != (h.height, h.width, h.channels) {
            return Err(Error::format("video", "frames differ in size"));
        }
        for &p in f.pixels() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    Ok(out)
}

fn decode_video_header(r: &mut impl Read) -> Result<VideoHeader> {
    read_magic(r, VIDEO_MAGIC, "video")?;
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        *d = read_u32(r).map_err(|_| Error::format("video", "truncated header"))? as usize;
    }
    let [frames, height, width, channels] = dims;
    if frames == 0 || height == 0 || width == 0 || channels == 0 {
        return Err(Error::format("video", format!("zero dimension in header {dims:?}")));
    }
    Ok(VideoHeader {
        frames,
        height,
        width,
        channels,
    })
}

pub fn decode_video(r: &mut impl Read) -> Result<Video> {
    let h = decode_video_header(r)?;
    let per = h.height * h.width * h.channels;
    let vals = read_f32s(r, h.frames * per, "video")?;
    expect_eof(r, "video")?;
    let frames = vals
        .chunks_exact(per)
        .map(|c| {
            FrameImage::new(h.height, h.width, h.channels, c.to_vec())
                .map_err(|e| Error::format("video", e.to_string()))
        })
        .collect::<Result<_>>()?;
    Ok(Video { frames })
}

pub fn write_video(path: &Path, video: &Video) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_video(video)?)?;
    w.flush()?;
    Ok(())
}

pub fn read_video(path: &Path, log: &mut AccessLog) -> Result<Video> {
    decode_video(&mut open(path, log)?)
}

pub fn read_video_header(path: &Path, log: &mut AccessLog) -> Result<VideoHeader> {
    decode_video_header(&mut open(path, log)?)
}
