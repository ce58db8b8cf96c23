use proptest::prelude::*;

use resp_core::estimator::{
    compose_channels, estimate, motion_respiration_signal, ChannelMode, PipelineConfig,
};
use resp_core::flow::{crop_sequence, flow_pairs, normalize_flows, FlowAlgorithm};
use resp_core::harness::{synth_clip, SynthClip, SynthParams};
use resp_core::roi::{aggregate_roi, DetectionTrack};
use resp_core::signal::{psd_normalized, SpectralConfig};
use resp_core::{Box2D, ColorMode, Error, Frame, FrameSequence};

fn clip(bpm: f64, duration: f64, color_mode: ColorMode) -> SynthClip {
    synth_clip(&SynthParams {
        bpm,
        duration,
        color_mode,
        seed: 9,
        ..SynthParams::default()
    })
    .unwrap()
}

fn bpm_of(frames: &FrameSequence, track: &DetectionTrack, cfg: &PipelineConfig) -> f64 {
    estimate(frames, track, None, cfg).unwrap().bpm
}

fn diff6() -> PipelineConfig {
    let mut cfg = PipelineConfig {
        channel_mode: ChannelMode::Diff6,
        ..PipelineConfig::default()
    };
    cfg.flow.algorithm = FlowAlgorithm::FrameDiff;
    cfg
}

#[test]
fn static_clip_has_no_rate_in_flow_and_diff_modes() {
    let c = clip(24.0, 20.0, ColorMode::Rgb);
    let still = FrameSequence::new(vec![c.frames.frames()[0].clone(); 200], 10.0, ColorMode::Rgb).unwrap();
    for cfg in [PipelineConfig::default(), diff6()] {
        let err = estimate(&still, &c.detections, None, &cfg).unwrap_err();
        assert!(err.is_no_rate(), "{:?}: {err}", cfg.channel_mode);
    }
}

#[test]
fn estimate_is_deterministic() {
    let c = clip(30.0, 30.0, ColorMode::Ir);
    let cfg = PipelineConfig::default();
    let a = estimate(&c.frames, &c.detections, None, &cfg).unwrap();
    let b = estimate(&c.frames, &c.detections, None, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn motion_signal_peaks_at_the_breathing_frequency() {
    let c = clip(24.0, 60.0, ColorMode::Ir);
    let cfg = PipelineConfig::default();
    let roi = aggregate_roi(&c.detections, &cfg.roi).unwrap();
    let crops = crop_sequence(&c.frames, &roi, &cfg.flow).unwrap();
    let mut flows = flow_pairs(&crops, &cfg.flow).unwrap();
    normalize_flows(&mut flows, cfg.flow.normalization);
    let tensor = compose_channels(&flows, crops.frames(), ChannelMode::Flow3).unwrap();
    let signal = motion_respiration_signal(&tensor, crops.fps()).unwrap();
    let spectrum = psd_normalized(&signal, &SpectralConfig::default()).unwrap();
    let bin = signal.fs() / signal.len() as f64;
    assert!((spectrum.peak_frequency() - 0.4).abs() <= bin, "{}", spectrum.peak_frequency());
}

#[test]
fn diff6_and_chunked_runs_find_the_rate() {
    let c = clip(30.0, 60.0, ColorMode::Rgb);
    let chunked = PipelineConfig {
        chunk_frames: Some(180),
        ..PipelineConfig::default()
    };
    for cfg in [diff6(), chunked] {
        let bpm = bpm_of(&c.frames, &c.detections, &cfg);
        assert!((bpm - 30.0).abs() <= 0.5, "{:?} {bpm}", cfg.channel_mode);
    }
}

#[test]
fn stage_errors_are_labelled() {
    let c = clip(24.0, 5.0, ColorMode::Ir);
    let mut track = c.detections.clone();
    track.image_w += 1;
    let err = estimate(&c.frames, &track, None, &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.stage(), Some(resp_core::Stage::Input));
    assert!(matches!(err.root(), Error::Manifest(_)));
}

fn flip_vertically(c: &SynthClip) -> (FrameSequence, DetectionTrack) {
    let frames = c
        .frames
        .map_frames(|f| {
            let (w, h, ch) = f.dims();
            let mut data = Vec::with_capacity(f.data().len());
            for y in (0..h).rev() {
                data.extend_from_slice(&f.data()[y * w * ch..(y + 1) * w * ch]);
            }
            Frame::new(w, h, ch, data).unwrap()
        })
        .unwrap();
    let mut track = c.detections.clone();
    let h = track.image_h as f64;
    let flip = |b: Box2D| Box2D::new(b.x, h - b.y - b.h, b.w, b.h);
    for e in &mut track.entries {
        e.body = e.body.map(flip);
        e.face = e.face.map(flip);
    }
    (frames, track)
}

#[test]
fn vertical_flip_keeps_the_rate() {
    let c = clip(36.0, 60.0, ColorMode::Ir);
    let cfg = PipelineConfig::default();
    let base = bpm_of(&c.frames, &c.detections, &cfg);
    let (frames, track) = flip_vertically(&c);
    let flipped = bpm_of(&frames, &track, &cfg);
    assert!((base - flipped).abs() <= 0.5, "{base} vs {flipped}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn intensity_gain_barely_moves_the_rate(gain in 0.5f64..=2.0) {
        let c = clip(24.0, 60.0, ColorMode::Ir);
        let cfg = PipelineConfig::default();
        let base = bpm_of(&c.frames, &c.detections, &cfg);
        let scaled = c.frames.map_frames(|f| f.scaled(gain)).unwrap();
        let bpm = bpm_of(&scaled, &c.detections, &cfg);
        prop_assert!((bpm - base).abs() <= 0.5, "gain {gain}: {base} -> {bpm}");
    }
}
