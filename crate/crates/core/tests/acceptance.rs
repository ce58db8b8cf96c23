//! Acceptance run: one line per criterion, nonzero exit if any fails.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resp_core::estimator::{estimate, PipelineConfig};
use resp_core::flow::{farneback_flow, tvl1_flow, FlowConfig, FlowField};
use resp_core::frame::Plane;
use resp_core::harness::{
    enumerate_splits, evaluate, make_folds, synth_clip, write_synthetic_dataset, DatasetManifest, EvalReport, FoldSizes,
    SynthDatasetConfig, SynthParams,
};
use resp_core::roi::{aggregate_body_roi, chest_center, RoiConfig};
use resp_core::signal::{butter_bandpass_filtfilt, detrend, psd_mse, psd_normalized, Band, SpectralConfig, Waveform};
use resp_core::Box2D;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn wave(samples: Vec<f64>, fs: f64) -> Waveform {
    Waveform::new(samples, fs).unwrap()
}

fn random_signal(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| (2.0 * PI * freq * k as f64 / fs + 0.3).sin()).collect()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let engines = [("farneback", FlowConfig::default()), ("tvl1", FlowConfig::tvl1())];
    let mut worst: f64 = 0.0;
    for fps in [10.0, 30.0] {
        for bpm in [18.0, 24.0, 30.0, 36.0, 40.0] {
            let clip = synth_clip(&SynthParams {
                bpm,
                fps,
                duration: 60.0,
                amplitude_px: 2.0,
                noise_sigma: 2.0 / 255.0,
                seed: bpm as u64,
                ..SynthParams::default()
            })
            .unwrap();
            for (name, flow) in &engines {
                let cfg = PipelineConfig { flow: flow.clone(), ..PipelineConfig::default() };
                let got = estimate(&clip.frames, &clip.detections, None, &cfg)
                    .map_err(|e| format!("{name} {bpm} BPM @ {fps} fps: {e}"))?
                    .bpm;
                let err = (got - bpm).abs();
                ensure(err <= 0.5, || format!("{name} {bpm} BPM @ {fps} fps: estimated {got:.3}"))?;
                worst = worst.max(err);
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("20 runs, worst error {worst:.3} BPM, {:.1} s", elapsed.as_secs_f64()))
}

fn band_sanity() -> Outcome {
    let band = Band::default();
    ensure((band.lo, band.hi) == (0.3, 1.0), || format!("{band:?}"))?;
    ensure(band.bpm() == (18.0, 60.0), || format!("{:?}", band.bpm()))?;
    Ok("0.3-1.0 Hz = 18-60 BPM".into())
}

fn detrend_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let x = random_signal(seed, 600);
        let got = detrend(&wave(x.clone(), 10.0), 100.0).unwrap();
        let want = common::dense_detrend(&x, 100.0);
        let diff: Vec<f64> = got.samples().iter().zip(&want).map(|(a, b)| a - b).collect();
        let err = rms(&diff);
        ensure(err <= 1e-8, || format!("seed {seed}: rms {err:e}"))?;
        worst = worst.max(err);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut affine_max: f64 = 0.0;
    for _ in 0..20 {
        let (slope, offset) = (rng.random_range(-5.0..5.0), rng.random_range(-50.0..50.0));
        let line: Vec<f64> = (0..600).map(|i| slope * i as f64 + offset).collect();
        let out = detrend(&wave(line, 10.0), 100.0).unwrap();
        let m = out.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ensure(m <= 1e-9, || format!("affine {slope}x + {offset}: residual {m:e}"))?;
        affine_max = affine_max.max(m);
    }
    Ok(format!("worst rms {worst:.1e}, affine residual {affine_max:.1e}"))
}

/// Lag in `-max..=max` maximizing the cross-correlation of `a` and `b`.
fn best_lag(a: &[f64], b: &[f64], max: isize) -> isize {
    let n = a.len() as isize;
    let corr = |l: isize| {
        (0..n)
            .filter(|&i| (0..n).contains(&(i + l)))
            .map(|i| a[i as usize] * b[(i + l) as usize])
            .sum::<f64>()
    };
    (-max..=max).max_by(|&p, &q| corr(p).total_cmp(&corr(q))).unwrap()
}

fn zero_phase_filter() -> Outcome {
    let band = Band::default();
    for f in [0.35, 0.5, 0.9] {
        let x = tone(f, 10.0, 600);
        let y = butter_bandpass_filtfilt(&wave(x.clone(), 10.0), &band).unwrap();
        let lag = best_lag(&x[50..550], &y.samples()[50..550], 10);
        ensure(lag == 0, || format!("{f} Hz: lag {lag}"))?;
    }
    let x = tone(3.0, 10.0, 600);
    let y = butter_bandpass_filtfilt(&wave(x.clone(), 10.0), &band).unwrap();
    let db = 20.0 * (rms(&y.samples()[50..550]) / rms(&x[50..550])).log10();
    ensure(db < -6.0, || format!("3 Hz: {db:.2} dB"))?;
    Ok(format!("lag 0 at 0.35/0.5/0.9 Hz, 3 Hz at {db:.1} dB"))
}

fn psd_metric() -> Outcome {
    let cfg = SpectralConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let x = random_signal(1000 + seed, 300);
        let y = random_signal(2000 + seed, 300);
        let (a, b) = (wave(x.clone(), 10.0), wave(y.clone(), 10.0));
        ensure(psd_mse(&a, &a, &cfg).unwrap() == 0.0, || format!("seed {seed}: self distance nonzero"))?;
        let (ab, ba) = (psd_mse(&a, &b, &cfg).unwrap(), psd_mse(&b, &a, &cfg).unwrap());
        ensure((ab - ba).abs() <= 1e-15, || format!("seed {seed}: {ab:e} vs {ba:e}"))?;
        let want = common::dft_psd_mse(&x, &y, 10.0, &cfg);
        ensure((ab - want).abs() <= 1e-10, || format!("seed {seed}: mse {ab:e} vs oracle {want:e}"))?;
        let got = psd_normalized(&a, &cfg).unwrap();
        let oracle = common::dft_psd_normalized(&x, 10.0, &cfg);
        ensure(got.power.len() == oracle.len(), || format!("seed {seed}: length mismatch"))?;
        for (g, w) in got.power.iter().zip(&oracle) {
            worst = worst.max((g - w).abs());
        }
        ensure(worst <= 1e-10, || format!("seed {seed}: spectrum error {worst:e}"))?;
    }
    Ok(format!("20 seeds, worst spectrum error {worst:.1e}"))
}

fn flow_accuracy() -> Outcome {
    const SIZE: usize = 64;
    const MARGIN: usize = 8;
    let run = |name: &str, a: &Plane, b: &Plane| -> FlowField {
        match name {
            "farneback" => farneback_flow(a, b, &FlowConfig::default()).unwrap(),
            _ => tvl1_flow(a, b, &FlowConfig::tvl1()).unwrap(),
        }
    };
    let noise = common::noise_texture(11);
    let textures: [&dyn Fn(f64, f64) -> f64; 3] = [&common::texture_waves, &common::texture_blobs, &noise];
    let mut worst: f64 = 0.0;
    for (ti, tex) in textures.iter().enumerate() {
        for &(tx, ty) in &common::SHIFTS {
            let (a, b) = common::shifted_pair(*tex, SIZE, tx, ty);
            for name in ["farneback", "tvl1"] {
                let epe = run(name, &a, &b).interior_epe(tx as f32, ty as f32, MARGIN).unwrap();
                ensure(epe <= 0.25, || format!("{name} texture {ti} shift ({tx}, {ty}): EPE {epe}"))?;
                worst = worst.max(epe);
            }
        }
        let (a, _) = common::shifted_pair(*tex, SIZE, 0.0, 0.0);
        for name in ["farneback", "tvl1"] {
            let m = run(name, &a, &a).max_abs();
            ensure(m <= 1e-6, || format!("{name} texture {ti}: identical frames give {m:e}"))?;
        }
    }
    Ok(format!("24 shifted pairs, worst EPE {worst:.3} px"))
}

fn roi_oracle() -> Outcome {
    for seed in 0..100 {
        let track = common::random_track(seed);
        let cfg = RoiConfig::default();
        let got = aggregate_body_roi(&track, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let want = common::body_roi_oracle(&track, &cfg);
        ensure(got == want, || format!("seed {seed}: {got:?} vs {want:?}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..1000 {
        let body = Box2D::new(
            rng.random_range(0.0..200.0),
            rng.random_range(0.0..200.0),
            rng.random_range(2.0..150.0),
            rng.random_range(2.0..150.0),
        );
        let face = Box2D::new(rng.random_range(0.0..300.0), rng.random_range(0.0..300.0), 10.0, 12.0);
        let (cx, cy) = chest_center(&body, Some(&face), rng.random_range(0.05..0.95)).unwrap();
        let (ox, oy) = body.center();
        let kept = if body.w >= body.h { cy == oy } else { cx == ox };
        ensure(kept, || format!("sample {i}: off-axis coordinate moved"))?;
    }
    Ok("100 tracks exact, 1000 chest samples on axis".into())
}

fn protocol() -> Outcome {
    let subjects: Vec<String> = (0..18).map(|i| format!("s{i:02}")).collect();
    let folds = make_folds(&subjects, 6, FoldSizes::new(12, 3, 3), 0).map_err(|e| e.to_string())?;
    ensure(folds.len() == 6, || format!("{} folds", folds.len()))?;
    let mut tested: Vec<&String> = folds.iter().flat_map(|f| &f.test).collect();
    tested.sort();
    ensure(tested.len() == 18 && tested.iter().copied().eq(subjects.iter()), || {
        "test sets do not partition the subjects".into()
    })?;
    for f in &folds {
        f.check_partition(&subjects).map_err(|e| format!("fold {}: {e}", f.fold_index))?;
    }
    let splits = enumerate_splits(8, 3, 1).map_err(|e| e.to_string())?;
    ensure(splits.len() == 168, || format!("{} splits", splits.len()))?;
    Ok("6 folds partition 18 subjects, 168 splits".into())
}

struct Synthetic {
    _dir: tempfile::TempDir,
    manifest: DatasetManifest,
}

fn synthetic_manifest() -> Synthetic {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_synthetic_dataset(dir.path(), &SynthDatasetConfig::default()).unwrap();
    Synthetic { _dir: dir, manifest }
}

fn full_eval(manifest: &DatasetManifest) -> Result<EvalReport, String> {
    let folds = make_folds(&manifest.subjects(), 2, FoldSizes::new(4, 2, 6), 0).map_err(|e| e.to_string())?;
    let mut report = evaluate(manifest, &folds, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    report.seed = Some(0);
    Ok(report)
}

fn loopback_and_pipeline(data: &Synthetic, full: &EvalReport) -> Outcome {
    let m = &data.manifest;
    ensure(m.subjects().len() == 12, || format!("{} subjects", m.subjects().len()))?;
    let folds = make_folds(&m.subjects(), 2, FoldSizes::new(4, 2, 6), 0).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig { predictor: "loopback".into(), ..PipelineConfig::default() };
    let loopback = evaluate(m, &folds, &cfg).map_err(|e| e.to_string())?;
    let lm = loopback.mean.as_ref().ok_or("no loopback mean")?;
    ensure(lm.mae == 0.0 && lm.rmse == 0.0 && lm.pearson == Some(1.0), || format!("loopback {lm:?}"))?;
    let fm = full.mean.as_ref().ok_or("no pipeline mean")?;
    ensure(full.excluded_clips == 0, || format!("{} clips without a rate", full.excluded_clips))?;
    ensure(fm.mae <= 0.5, || format!("pipeline MAE {:.3}", fm.mae))?;
    Ok(format!("loopback 0/0/1, pipeline MAE {:.3} RMSE {:.3}", fm.mae, fm.rmse))
}

fn determinism(data: &Synthetic, first: &EvalReport) -> Outcome {
    let again = full_eval(&data.manifest)?;
    let (a, b) = (first.to_json(), again.to_json());
    ensure(a == b, || "report JSON differs between runs".into())?;
    Ok(format!("{} identical bytes", a.len()))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(detail) => {
            failures += 1;
            println!("FAIL  {name}: {detail}");
        }
    };

    report("synthetic end-to-end", guarded(synthetic_end_to_end));
    report("band sanity", guarded(band_sanity));
    report("detrend oracle", guarded(detrend_oracle));
    report("zero-phase filter", guarded(zero_phase_filter));
    report("psd metric", guarded(psd_metric));
    report("flow accuracy", guarded(flow_accuracy));
    report("roi oracle", guarded(roi_oracle));
    report("protocol", guarded(protocol));

    match guarded(|| {
        let data = synthetic_manifest();
        let full = full_eval(&data.manifest)?;
        report("loopback and pipeline evaluation", loopback_and_pipeline(&data, &full));
        report("determinism", determinism(&data, &full));
        Ok(String::new())
    }) {
        Ok(_) => {}
        Err(e) => {
            report("loopback and pipeline evaluation", Err(e.clone()));
            report("determinism", Err(e));
        }
    }

    if failures == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
