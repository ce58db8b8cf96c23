use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{frame_diff, FlowField};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// `u, v, m`.
    #[default]
    Flow3,
    /// `u, v, m` followed by the standardized appearance frame.
    Flow6,
    /// RGB difference followed by the standardized appearance frame.
    Diff6,
}

impl ChannelMode {
    pub fn channels(self) -> usize {
        match self {
            ChannelMode::Flow3 => 3,
            ChannelMode::Flow6 | ChannelMode::Diff6 => 6,
        }
    }

    pub fn uses_flow(self) -> bool {
        !matches!(self, ChannelMode::Diff6)
    }
}

/// Per frame-pair `h x w x C` arrays, interleaved by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub mode: ChannelMode,
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<f32>>,
}

impl ChannelTensor {
    pub fn channels(&self) -> usize {
        self.mode.channels()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    #[inline]
    pub fn get(&self, t: usize, x: usize, y: usize, c: usize) -> f32 {
        self.frames[t][(y * self.width + x) * self.channels() + c]
    }

    /// Splits into consecutive tensors of at most `len` frame pairs.
    pub fn chunks(&self, len: usize) -> Vec<ChannelTensor> {
        self.frames
            .chunks(len.max(1))
            .map(|c| ChannelTensor {
                mode: self.mode,
                width: self.width,
                height: self.height,
                frames: c.to_vec(),
            })
            .collect()
    }
}

/// RGB appearance of every crop, each channel standardized over the clip.
fn standardized_appearance(crops: &[Frame]) -> Vec<Vec<f32>> {
    let rgb: Vec<Frame> = crops.iter().map(Frame::to_rgb).collect();
    let mut stats = [(0.0f64, 0.0f64); 3];
    let mut count = 0usize;
    for f in &rgb {
        for px in f.data().chunks_exact(3) {
            for c in 0..3 {
                let v = px[c] as f64;
                stats[c].0 += v;
                stats[c].1 += v * v;
            }
        }
        count += f.width() * f.height();
    }
    let norm: Vec<(f64, f64)> = stats
        .iter()
        .map(|&(s, sq)| {
            let mean = s / count as f64;
            let sd = (sq / count as f64 - mean * mean).max(0.0).sqrt();
            (mean, sd)
        })
        .collect();
    rgb.iter()
        .map(|f| {
            f.data()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let (mean, sd) = norm[i % 3];
                    if sd > 0.0 {
                        ((v as f64 - mean) / sd) as f32
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Packs motion and appearance into one tensor per frame pair. The
/// appearance channels of pair `t` come from its earlier frame. `flows` is
/// ignored (and may be empty) in `Diff6` mode.
pub fn compose_channels(flows: &[FlowField], crops: &[Frame], mode: ChannelMode) -> Result<ChannelTensor> {
    if crops.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 crops, got {}", crops.len())));
    }
    let (w, h) = (crops[0].width(), crops[0].height());
    if crops.iter().any(|c| (c.width(), c.height()) != (w, h)) {
        return Err(Error::format("crops differ in size"));
    }
    let pairs = crops.len() - 1;
    if mode.uses_flow() {
        if flows.len() != pairs {
            return Err(Error::format(format!(
                "{} flow fields for {} crops; expected {pairs}",
                flows.len(),
                crops.len()
            )));
        }
        if flows.iter().any(|f| (f.width, f.height) != (w, h)) {
            return Err(Error::format("flow fields and crops differ in size"));
        }
    }
    let appearance = match mode {
        ChannelMode::Flow3 => Vec::new(),
        _ => standardized_appearance(crops),
    };
    let c = mode.channels();
    let frames = (0..pairs)
        .map(|t| {
            let mut out = vec![0.0f32; w * h * c];
            match mode {
                ChannelMode::Flow3 | ChannelMode::Flow6 => {
                    let f = &flows[t];
                    for p in 0..w * h {
                        out[p * c] = f.u[p];
                        out[p * c + 1] = f.v[p];
                        out[p * c + 2] = f.m[p];
                    }
                }
                ChannelMode::Diff6 => {
                    let d = frame_diff(&crops[t].to_rgb(), &crops[t + 1].to_rgb())?;
                    for p in 0..w * h {
                        out[p * c..p * c + 3].copy_from_slice(&d.data[p * 3..p * 3 + 3]);
                    }
                }
            }
            if c == 6 {
                for p in 0..w * h {
                    out[p * c + 3..p * c + 6].copy_from_slice(&appearance[t][p * 3..p * 3 + 3]);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelTensor {
        mode,
        width: w,
        height: h,
        frames,
    })
}
