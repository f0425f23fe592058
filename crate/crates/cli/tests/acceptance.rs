//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion with the
//! measured value and the pinned tolerance, then exits nonzero if any failed.
//!
//! Runs as a plain binary so the lines always reach the console. Pass a
//! substring to run only matching criteria:
//! `cargo test -p earsight-cli --test acceptance -- fuzz`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use earsight::classifier::Classification;
use earsight::classifier::{importance_filter, ClassScore, PriorityList, DEFAULT_VOCABULARY};
use earsight::features::{phase_matrix, StftConfig};
use earsight::fusion::{
    dataset_metrics, iou, select_box, BBox, Candidate, CandidateSet, DoaGate, FusionConfig, LocalizationMap,
};
use earsight::model::{
    classical_doa, evaluate, stratified_split, train, ClassicalConfig, JerryNet, JerryNetConfig, Sample, Tensor,
    TrainConfig,
};
use earsight::pipeline::{
    alert_text, CycleMachine, Event, ImageFrame, LoopConfig, MessageKind, Perception, Record, RecordBody,
};
use earsight::seed::rng;
use earsight::sim::{
    make_dataset, make_dataset_with, synth_clip, ArrayGeometry, MultiChannelClip, SignalKind, SimConfig, SourceSpec,
};
use earsight::stats::{anova_oneway, tukey_hsd, RunGroup};
use earsight::{Direction, Error};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("doa-cnn-accuracy", cnn_accuracy),
        ("doa-classical-accuracy", classical_accuracy),
        ("gradient-check", gradient_check),
        ("ipd-oracle", ipd_oracle),
        ("iou-exhaustive-8x8", iou_exhaustive),
        ("box-selection-optimality", selection_optimality),
        ("importance-filter-table", importance_table),
        ("anova-tukey", anova_tukey),
        ("ciou-auc-fixtures", ciou_auc),
        ("loop-fuzz-10k", loop_fuzz),
        ("end-to-end-smoke", end_to_end),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        failed += usize::from(!pass);
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

const DATA_SEED: u64 = 2024;

/// 50 clips per class, SNR 15 to 30 dB, 80/20 stratified split.
fn cnn_accuracy() -> Outcome {
    const FLOOR: f64 = 0.85;
    const LIMIT_S: f64 = 900.0;
    let start = Instant::now();
    let clips = make_dataset(&ArrayGeometry::default(), 50, 2.0, 16_000, DATA_SEED)?;
    let stft = StftConfig::default();
    let samples = clips
        .iter()
        .map(|c| {
            Ok(Sample {
                input: phase_matrix(&c.clip, &stft)?,
                label: c.clip.label.expect("simulated clips are labeled"),
            })
        })
        .collect::<earsight::Result<Vec<_>>>()?;
    let [_, bins, frames] = samples[0].input.shape();
    let net = JerryNet::new(JerryNetConfig::default(), bins, frames)?;
    let cfg = TrainConfig {
        seed: DATA_SEED,
        ..TrainConfig::default()
    };
    let (params, _) = train(&net, &samples, &cfg)?;
    let labels: Vec<Direction> = samples.iter().map(|s| s.label).collect();
    let (_, held_out) = stratified_split(&labels, cfg.val_fraction, cfg.seed);
    let held: Vec<Sample> = held_out.iter().map(|&i| samples[i].clone()).collect();
    let acc = evaluate(&net, &params, &held)?.accuracy;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        acc >= FLOOR && secs < LIMIT_S && samples.len() == 450,
        format!(
            "held-out accuracy {acc:.4} on {} of {} clips (floor {FLOOR}), {secs:.0} s (limit {LIMIT_S} s)",
            held.len(),
            samples.len()
        ),
    ))
}

fn classical_accuracy() -> Outcome {
    const FLOOR: f64 = 0.99;
    let geometry = ArrayGeometry::default();
    let clips = make_dataset_with(&geometry, &SimConfig::default().noiseless(), 50, 2.0, 16_000, 7)?;
    let (mut correct, mut total) = (0, 0);
    for c in clips.iter().filter(|c| c.clip.label.is_some_and(Direction::is_compass)) {
        let est = classical_doa(&c.clip, &geometry, &StftConfig::default(), &ClassicalConfig::default())?;
        total += 1;
        correct += usize::from(Some(est.direction) == c.clip.label);
    }
    let acc = correct as f64 / total as f64;
    Ok((
        acc >= FLOOR,
        format!("{correct}/{total} noiseless compass clips = {acc:.4} (floor {FLOOR})"),
    ))
}

/// Central differences, ε = 1e-4, on the two-block toy network in f64.
fn gradient_check() -> Outcome {
    const EPS: f64 = 1e-4;
    const TOL: f64 = 1e-4;
    const LIMIT_S: f64 = 60.0;
    // Entries whose true gradient is zero up to roundoff compare absolutely.
    const FLOOR: f64 = 1e-8;
    let start = Instant::now();
    let net = JerryNet::new(JerryNetConfig::toy(), 8, 8)?;
    let mut worst: f64 = 0.0;
    let mut tensors = BTreeSet::new();
    for seed in 0..3u64 {
        let mut params = net.init_params(seed);
        for t in params.tensors.iter_mut().filter(|t| t.shape.len() == 1) {
            for (i, v) in t.data.iter_mut().enumerate() {
                *v = 0.05 * (i as f64 - 1.0);
            }
        }
        let data = (0..192u64)
            .map(|i| (((i * 2_654_435_761 + seed * 97) % 10_007) as f64 / 10_007.0 - 0.5) * 2.0)
            .collect();
        let x = Tensor::new([3, 8, 8], data)?;
        let label = Direction::from_index(seed as usize * 4).expect("index below 9");
        let (_, grads, _) = net.backward_tensor(&params, x.clone(), label)?;
        let mut flat = 0;
        for (t, g) in params.tensors.iter().zip(&grads.tensors) {
            tensors.insert(t.name.clone());
            for k in 0..t.data.len() {
                let mut plus = params.clone();
                plus.set_flat(flat + k, params.get_flat(flat + k) + EPS);
                let mut minus = params.clone();
                minus.set_flat(flat + k, params.get_flat(flat + k) - EPS);
                let numeric = (net.loss_tensor(&plus, x.clone(), label)?
                    - net.loss_tensor(&minus, x.clone(), label)?)
                    / (2.0 * EPS);
                let analytic = g.data[k];
                worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR));
            }
            flat += t.data.len();
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= TOL && secs < LIMIT_S,
        format!(
            "max relative error {worst:.2e} over {} tensors (tolerance {TOL:e}), {secs:.1} s (limit {LIMIT_S} s)",
            tensors.len()
        ),
    ))
}

/// Bin-centred tones from distant sources; the expected phase difference uses
/// plane-wave delays derived from the microphone positions.
fn ipd_oracle() -> Outcome {
    const TOL: f64 = 1e-3;
    let geometry = ArrayGeometry::default();
    let stft = StftConfig::default();
    let sr = 16_000.0;
    let c = geometry.speed_of_sound;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for d in Direction::COMPASS {
        let az = d.center_deg().expect("compass direction").to_radians();
        let toward = [az.sin(), az.cos(), 0.0];
        for k in [8usize, 21, 40, 100] {
            let f = k as f64 * sr / stft.window_len as f64;
            let source = SourceSpec::far_field(d, az.to_degrees(), 1.0e4, SignalKind::PureTone { freq_hz: f });
            let clip = synth_clip(&geometry, &source, 0.5, 16_000, 1)?;
            let pm = phase_matrix(&clip, &stft)?;
            let p0 = geometry.mic_positions[0];
            for j in 1..4 {
                let pj = geometry.mic_positions[j];
                let lead: f64 = (0..3).map(|a| (pj[a] - p0[a]) * toward[a]).sum();
                let dtau = -lead / c;
                let expected = 2.0 * PI * f * dtau;
                for t in 0..pm.num_frames() {
                    let err = wrap(pm.get(j - 1, k, t) - expected).abs();
                    worst = worst.max(err);
                    checked += 1;
                }
            }
        }
    }
    Ok((
        worst <= TOL,
        format!("max |error| {worst:.2e} rad over {checked} bins, 8 classes × 3 pairs (tolerance {TOL:e})"),
    ))
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

fn all_boxes(side: u32) -> Vec<BBox> {
    let mut out = Vec::new();
    for x in 0..side {
        for y in 0..side {
            for w in 1..=side - x {
                for h in 1..=side - y {
                    out.push(BBox::new(x, y, w, h).expect("valid box"));
                }
            }
        }
    }
    out
}

fn mask(b: &BBox, side: u32) -> u64 {
    let mut m = 0u64;
    for r in b.y..b.y + b.h {
        for c in b.x..b.x + b.w {
            m |= 1 << (r * side + c);
        }
    }
    m
}

fn iou_exhaustive() -> Outcome {
    const LIMIT_S: f64 = 10.0;
    let start = Instant::now();
    let boxes = all_boxes(8);
    let masks: Vec<u64> = boxes.iter().map(|b| mask(b, 8)).collect();
    let mut mismatches = 0usize;
    for (a, ma) in boxes.iter().zip(&masks) {
        for (b, mb) in boxes.iter().zip(&masks) {
            let pixel = f64::from((ma & mb).count_ones()) / f64::from((ma | mb).count_ones());
            mismatches += usize::from(iou(a, b) != pixel);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        mismatches == 0 && secs < LIMIT_S,
        format!(
            "{} box pairs, {mismatches} inexact (tolerance: exact), {secs:.2} s (limit {LIMIT_S} s)",
            boxes.len() * boxes.len()
        ),
    ))
}

/// Rescans every fixture by pixel enumeration and checks that no admitted
/// candidate beats the chosen one.
fn selection_optimality() -> Outcome {
    const FIXTURES: u64 = 1000;
    let mut dominated = 0usize;
    let mut wrong_error = 0usize;
    let mut selections = 0usize;
    for seed in 0..FIXTURES {
        let mut r = rng(seed);
        let (w, h) = (r.random_range(4..24u32), r.random_range(4..24u32));
        let values: Vec<f64> = (0..w * h).map(|_| r.random_range(0.0..1.0)).collect();
        let map = LocalizationMap::from_fn(w as usize, h as usize, |row, col| values[row * w as usize + col])?;
        let tau = r.random_range(0.5..1.0);
        let candidates: Vec<Candidate> = (0..r.random_range(1..9))
            .map(|i| {
                let (x, y) = (r.random_range(0..w), r.random_range(0..h));
                let bbox = BBox::new(x, y, r.random_range(1..=w - x), r.random_range(1..=h - y)).expect("in bounds");
                Candidate {
                    class: format!("c{i}"),
                    confidence: r.random_range(0.0..1.0),
                    bbox,
                }
            })
            .collect();
        let gate = DoaGate {
            enabled: seed % 2 == 1,
            ..DoaGate::default()
        };
        let doa = (seed % 4 == 1).then_some(Direction::Front);
        let set = CandidateSet::new(candidates.clone(), w, h)?;

        // Oracle: bounding rectangle of pixels strictly above tau, pixel IoU.
        let hot: Vec<(u32, u32)> = (0..h)
            .flat_map(|row| (0..w).map(move |col| (row, col)))
            .filter(|&(row, col)| values[(row * w + col) as usize] > tau)
            .collect();
        let admitted: Vec<&Candidate> = candidates
            .iter()
            .filter(|c| {
                let cx = f64::from(c.bbox.x) + f64::from(c.bbox.w) / 2.0;
                !(gate.enabled && doa.is_some()) || (cx >= f64::from(w) / 3.0 && cx <= 2.0 * f64::from(w) / 3.0)
            })
            .collect();
        let result = select_box(&set, &map, tau, doa, &gate);
        if hot.is_empty() {
            wrong_error += usize::from(!matches!(result, Err(Error::NoLocalizedRegion)));
            continue;
        }
        if admitted.is_empty() {
            wrong_error += usize::from(!matches!(result, Err(Error::GateEliminatedAll)));
            continue;
        }
        let (r0, r1) = (
            hot.iter().map(|p| p.0).min().unwrap(),
            hot.iter().map(|p| p.0).max().unwrap(),
        );
        let (c0, c1) = (
            hot.iter().map(|p| p.1).min().unwrap(),
            hot.iter().map(|p| p.1).max().unwrap(),
        );
        let pseudo = |row: u32, col: u32| row >= r0 && row <= r1 && col >= c0 && col <= c1;
        let pixel_iou = |b: &BBox| {
            let (mut inter, mut union) = (0u32, 0u32);
            for row in 0..h {
                for col in 0..w {
                    let inside = row >= b.y && row < b.y + b.h && col >= b.x && col < b.x + b.w;
                    inter += u32::from(inside && pseudo(row, col));
                    union += u32::from(inside || pseudo(row, col));
                }
            }
            f64::from(inter) / f64::from(union)
        };
        let Ok(sel) = result else {
            wrong_error += 1;
            continue;
        };
        selections += 1;
        let chosen_ok = admitted.iter().any(|c| c.bbox == sel.chosen.bbox);
        let best = admitted.iter().map(|c| pixel_iou(&c.bbox)).fold(0.0, f64::max);
        if !chosen_ok || pixel_iou(&sel.chosen.bbox) < best {
            dominated += 1;
        }
    }
    Ok((
        dominated == 0 && wrong_error == 0 && selections > FIXTURES as usize / 2,
        format!(
            "{FIXTURES} fixtures ({selections} selections): {dominated} dominated, {wrong_error} wrong outcomes (tolerance 0)"
        ),
    ))
}

fn importance_table() -> Outcome {
    let table = PriorityList::default();
    let custom = |names: &[&str]| PriorityList::new(names.iter().map(|s| s.to_string()).collect()).expect("distinct");
    #[allow(clippy::type_complexity)]
    let cases: Vec<(&str, Vec<(&str, f64)>, PriorityList, f64, Option<&str>)> = vec![
        (
            "rank beats prob",
            vec![("siren", 0.35), ("dog barking", 0.40), ("doorbell", 0.1)],
            table.clone(),
            0.3,
            Some("siren"),
        ),
        (
            "all at or below threshold",
            vec![("siren", 0.3), ("dog barking", 0.2), ("bike bell", 0.25)],
            table.clone(),
            0.3,
            None,
        ),
        (
            "singleton",
            vec![("doorbell", 0.31)],
            table.clone(),
            0.3,
            Some("doorbell"),
        ),
        ("exactly at threshold", vec![("siren", 0.3)], table.clone(), 0.3, None),
        (
            "just above threshold",
            vec![("siren", 0.300_000_1)],
            table.clone(),
            0.3,
            Some("siren"),
        ),
        (
            "boundary excludes better rank",
            vec![("siren", 0.3), ("dog barking", 0.31)],
            table.clone(),
            0.3,
            Some("dog barking"),
        ),
        (
            "unlisted tie by name",
            vec![("cat", 0.4), ("bird", 0.4)],
            table.clone(),
            0.3,
            Some("bird"),
        ),
        (
            "unlisted higher prob",
            vec![("cat", 0.5), ("bird", 0.45)],
            table.clone(),
            0.3,
            Some("cat"),
        ),
        (
            "listed beats unlisted",
            vec![("instruments", 0.31), ("cat", 0.6)],
            table.clone(),
            0.3,
            Some("instruments"),
        ),
        ("empty scores", vec![], table.clone(), 0.3, None),
        (
            "threshold 0 is strict",
            vec![("siren", 0.0), ("dog barking", 0.01)],
            table.clone(),
            0.0,
            Some("dog barking"),
        ),
        (
            "threshold 0 all zero",
            vec![("siren", 0.0), ("dog barking", 0.0)],
            table.clone(),
            0.0,
            None,
        ),
        (
            "threshold 1 admits nothing",
            vec![("siren", 1.0)],
            table.clone(),
            1.0,
            None,
        ),
        (
            "threshold 0.5",
            vec![("siren", 0.45), ("dog barking", 0.55)],
            table.clone(),
            0.5,
            Some("dog barking"),
        ),
        (
            "threshold 0.5 boundary pair",
            vec![("siren", 0.5), ("dog barking", 0.5)],
            table.clone(),
            0.5,
            None,
        ),
        (
            "custom priority",
            vec![("siren", 0.4), ("dog barking", 0.35)],
            custom(&["dog barking", "siren"]),
            0.3,
            Some("dog barking"),
        ),
        (
            "custom list omits winner",
            vec![("siren", 0.9), ("doorbell", 0.05)],
            custom(&["dog barking"]),
            0.3,
            Some("siren"),
        ),
        (
            "empty priority uses prob",
            vec![("siren", 0.35), ("dog barking", 0.4)],
            custom(&[]),
            0.3,
            Some("dog barking"),
        ),
        (
            "empty priority tie by name",
            vec![("siren", 0.4), ("dog barking", 0.4)],
            custom(&[]),
            0.3,
            Some("dog barking"),
        ),
        (
            "ranks 2 and 3",
            vec![("car honking", 0.32), ("bike bell", 0.33), ("siren", 0.30)],
            table.clone(),
            0.3,
            Some("car honking"),
        ),
        (
            "uniform over eight",
            DEFAULT_VOCABULARY.iter().map(|c| (*c, 0.125)).collect(),
            table.clone(),
            0.3,
            None,
        ),
        (
            "three equal probs",
            vec![("phone ringing", 0.31), ("doorbell", 0.31), ("person talking", 0.31)],
            table.clone(),
            0.3,
            Some("person talking"),
        ),
        (
            "unlisted only",
            vec![("alarm", 0.99)],
            table.clone(),
            0.3,
            Some("alarm"),
        ),
    ];
    let mut wrong = Vec::new();
    for (name, scores, priority, threshold, expected) in &cases {
        let scores: Vec<ClassScore> = scores.iter().map(|(c, p)| ClassScore::new(*c, *p)).collect();
        if importance_filter(&scores, priority, *threshold).as_deref() != *expected {
            wrong.push(*name);
        }
    }
    Ok((
        wrong.is_empty(),
        format!(
            "{} cases (3 examples + {} table rows), mismatches {wrong:?} (tolerance: exact)",
            cases.len(),
            cases.len() - 3
        ),
    ))
}

fn anova_tukey() -> Outcome {
    const TOL: f64 = 1e-9;
    let groups = |data: &[&[f64]]| -> Vec<RunGroup> {
        data.iter()
            .enumerate()
            .map(|(i, g)| RunGroup::new(format!("m{i}"), g.to_vec()))
            .collect()
    };
    let base: [&[f64]; 3] = [&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], &[3.0, 4.0, 5.0]];
    let a = anova_oneway(&groups(&base))?;
    let f_ok = (a.f - 3.0).abs() <= TOL && (a.ss_between - 6.0).abs() <= TOL && (a.ss_within - 6.0).abs() <= TOL;

    let tukey = tukey_hsd(&groups(&base), 0.05)?;
    let mut invariance: f64 = 0.0;
    for (shift, scale) in [(10.0, 1.0), (-3.5, 1.0), (0.0, 7.0), (0.0, 0.01), (2.0, 3.0)] {
        let moved: Vec<Vec<f64>> = base
            .iter()
            .map(|g| g.iter().map(|v| v * scale + shift).collect())
            .collect();
        let refs: Vec<&[f64]> = moved.iter().map(Vec::as_slice).collect();
        invariance = invariance.max((anova_oneway(&groups(&refs))?.f - a.f).abs());
        for (x, y) in tukey.rows.iter().zip(&tukey_hsd(&groups(&refs), 0.05)?.rows) {
            invariance = invariance.max((x.q_stat - y.q_stat).abs());
        }
    }

    let flat = anova_oneway(&groups(&[&[0.7, 0.7, 0.7], &[0.7, 0.7, 0.7]]))?;
    let degenerate_ok = flat.degenerate && flat.f == 0.0 && flat.p == 1.0;

    let six: Vec<RunGroup> = (0..6)
        .map(|m| {
            RunGroup::new(
                format!("m{m}"),
                (0..20)
                    .map(|r| 0.8 + 0.01 * f64::from(m) + 0.001 * f64::from(r))
                    .collect(),
            )
        })
        .collect();
    let df = anova_oneway(&six)?;
    let df_ok = (df.df_between, df.df_within) == (5, 114);

    Ok((
        f_ok && invariance <= TOL && degenerate_ok && df_ok,
        format!(
            "F = {} (expected 3.0, tolerance {TOL:e}); shift/scale drift {invariance:.1e} (tolerance {TOL:e}); \
             degenerate flag {}; df ({}, {}) for 6×20 runs",
            a.f, flat.degenerate, df.df_between, df.df_within
        ),
    ))
}

fn ciou_auc() -> Outcome {
    const TOL: f64 = 1e-12;
    let boxes: Vec<BBox> = (0..10).map(|i| BBox::new(i * 3, i, 2 + i, 3).expect("valid")).collect();
    let same: Vec<(Option<BBox>, BBox)> = boxes.iter().map(|b| (Some(*b), *b)).collect();
    let exact = dataset_metrics(&same, 0.5)?;
    let disjoint: Vec<(Option<BBox>, BBox)> = boxes
        .iter()
        .map(|b| (Some(BBox::new(b.x + b.w + 5, b.y, 1, 1).expect("valid")), *b))
        .collect();
    let apart = dataset_metrics(&disjoint, 0.5)?;
    // Success rate is 1 at threshold 0 and 0 at the other 20 points; the
    // trapezoid over the first 0.05-wide step gives 0.5 · 0.05.
    let hand_auc = 0.5 * (1.0 + 0.0) * 0.05;
    Ok((
        (exact.ciou_rate - 1.0).abs() <= TOL
            && (exact.auc - 1.0).abs() <= TOL
            && apart.ciou_rate == 0.0
            && (apart.auc - hand_auc).abs() <= TOL
            && apart.curve.len() == 21,
        format!(
            "identical: cIoU {} AUC {}; disjoint: cIoU {} AUC {} (expected 1/1 and 0/{hand_auc}, tolerance {TOL:e})",
            exact.ciou_rate, exact.auc, apart.ciou_rate, apart.auc
        ),
    ))
}

struct Scripted(ChaCha8Rng);

impl Perception for Scripted {
    fn direction(&mut self, _: &MultiChannelClip) -> earsight::Result<Direction> {
        Ok(Direction::from_index(self.0.random_range(0..9)).expect("index below 9"))
    }

    fn classify(&mut self, _: &MultiChannelClip) -> earsight::Result<Classification> {
        Ok(Classification {
            scores: vec![ClassScore::new("siren", 1.0)],
            selected: self.0.random_bool(0.8).then(|| "siren".to_string()),
        })
    }
}

/// ±`amp` on every channel; RMS level 20·log10(amp) + 94 dB.
fn square(amp: f64) -> MultiChannelClip {
    let x: Vec<f64> = (0..64).map(|n| if n % 2 == 0 { amp } else { -amp }).collect();
    MultiChannelClip::new(vec![x; 4], 16_000, None).expect("valid clip")
}

fn frame(hot: bool) -> ImageFrame {
    let map = LocalizationMap::from_fn(6, 6, |r, c| if hot && r < 3 && c < 3 { 0.9 } else { 0.1 }).expect("in range");
    let boxes = vec![Candidate {
        class: "thing".into(),
        confidence: 0.5,
        bbox: BBox::new(1, 1, 3, 3).expect("valid"),
    }];
    ImageFrame {
        candidates: CandidateSet::new(boxes, 6, 6).expect("in bounds"),
        map,
    }
}

fn loop_fuzz() -> Outcome {
    const EVENTS: usize = 10_000;
    const LIMIT_S: f64 = 30.0;
    const EDGES: [(&str, &str); 7] = [
        ("idle", "gated"),
        ("gated", "idle"),
        ("gated", "await_turn"),
        ("await_turn", "await_image"),
        ("await_image", "done"),
        ("await_image", "idle"),
        ("done", "idle"),
    ];
    let start = Instant::now();
    let cfg = LoopConfig::default();
    let mut r = rng(20_240_601);
    let mut perception = Scripted(rng(99));
    let mut machine = CycleMachine::new(cfg.clone(), FusionConfig::default());
    let (mut t, mut state, mut last_id) = (0.0, "idle".to_string(), 0u64);
    let (mut reentrancy, mut gate, mut alerts) = (0usize, 0usize, 0usize);
    for _ in 0..EVENTS {
        t += r.random_range(0.0..4.0);
        let roll = r.random_range(0.0..1.0);
        let (event, level) = if roll < 0.5 {
            let amp = 10f64.powf(r.random_range(-5.0..0.0));
            (
                Event::AudioWindow(square(amp)),
                Some(20.0 * amp.log10() + cfg.calibration_offset_db),
            )
        } else if roll < 0.9 {
            (Event::Image(frame(r.random_bool(0.8))), None)
        } else {
            (Event::Reset, None)
        };
        let records: Vec<Record> = machine.step(t, event, &mut perception);
        let mut opened = 0;
        for rec in &records {
            if let Some(id) = rec.cycle_id {
                reentrancy += usize::from(id < last_id);
                last_id = id;
            }
            match &rec.body {
                RecordBody::Transition { from, to } => {
                    reentrancy += usize::from(from != &state || !EDGES.contains(&(from.as_str(), to.as_str())));
                    opened += usize::from(to == "gated");
                    state = to.clone();
                }
                RecordBody::Message(m) if m.kind == MessageKind::DirectionAlert => {
                    alerts += 1;
                    gate += usize::from(level.is_none_or(|db| db < cfg.gate_db));
                }
                _ => {}
            }
        }
        reentrancy += usize::from(opened > 1);
        reentrancy += usize::from((state == "idle") == machine.is_active());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        reentrancy == 0 && gate == 0 && alerts > 100 && secs < LIMIT_S,
        format!(
            "{EVENTS} events, {alerts} alerts: {reentrancy} re-entrancy and {gate} gate violations (tolerance 0), \
             {secs:.2} s (limit {LIMIT_S} s)"
        ),
    ))
}

fn earsight(args: &[&str], dir: &Path) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_earsight"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`earsight {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// simulate → featurize → train (3 epochs) → fit-templates → loop on one loud clip.
fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir()?;
    let dir = tmp.path();
    earsight(&["simulate", "--per-class", "1", "--out", "data", "--seed", "7"], dir)?;
    earsight(&["featurize", "--data", "data", "--out", "features"], dir)?;
    earsight(
        &["train", "--data", "features", "--out", "model.ck", "--epochs", "3"],
        dir,
    )?;
    earsight(&["fit-templates", "--data", "data", "--out", "templates.json"], dir)?;

    // The first external (non-self) clip is the loud fixture.
    let fixture = (0..9)
        .map(|i| format!("data/clip_{i:04}"))
        .find(|stem| {
            let manifest: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap_or_default())
                    .unwrap_or_default();
            manifest["label"].as_str().is_some_and(|l| l != "self")
        })
        .ok_or("no external clip in the minimal dataset")?;
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(format!("{fixture}.json")))?)?;
    let class = manifest["sound_class"]
        .as_str()
        .ok_or("manifest without sound_class")?
        .to_string();
    fs::write(
        dir.join("events.jsonl"),
        format!("{{\"t\": 0.0, \"type\": \"audio\", \"path\": \"{fixture}.wav\"}}\n"),
    )?;
    let out = earsight(
        &[
            "loop",
            "--events",
            "events.jsonl",
            "--model",
            "model.ck",
            "--templates",
            "templates.json",
        ],
        dir,
    )?;

    let mut alerts = Vec::new();
    for line in out.lines() {
        let rec: serde_json::Value = serde_json::from_str(line)?;
        if rec["type"] == "message" && rec["kind"] == "direction_alert" {
            alerts.push(rec["text"].as_str().unwrap_or_default().to_string());
        }
    }
    let templated = |text: &str| Direction::COMPASS.iter().any(|d| text == alert_text(&class, *d));
    Ok((
        alerts.len() == 1 && templated(&alerts[0]),
        format!("alerts {alerts:?} (expected exactly one \"There is a {class} in the <direction>\")"),
    ))
}
