use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use super::histogram_pair;
use crate::gait::{extract_features, EventParams, GaitFeatureRow, FEATURE_NAMES, STEP_LENGTH_FEATURES};
use crate::identity::{evaluate_cv, Dataset, Hyper};
use crate::keypoint::{KeypointFrame, KeypointSequence, MarkerCalibration};
use crate::math;
use crate::mitigate::{mitigate_frame, snr_db, unit_open, Approach, Distribution, NoiseConfig};
use crate::synth::{generate_walker, render_frame, MarkerExtractor, RenderStyle, WalkerSpec};
use crate::{Error, Result};

fn default_clips() -> usize {
    4
}
fn default_duration() -> f64 {
    5.0
}
fn default_fps() -> f64 {
    30.0
}
fn default_width() -> u32 {
    320
}
fn default_height() -> u32 {
    240
}
fn default_mpp() -> f64 {
    0.01
}

/// A rendered walking corpus: every walker is recorded `clips_per_subject`
/// times, each clip with its own random gait phase and jitter stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub walkers: Vec<WalkerSpec>,
    #[serde(default = "default_clips")]
    pub clips_per_subject: usize,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    /// Scene scale used for step lengths.
    #[serde(default = "default_mpp")]
    pub meters_per_pixel: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(walkers: Vec<WalkerSpec>) -> Self {
        CorpusSpec {
            walkers,
            clips_per_subject: default_clips(),
            duration_s: default_duration(),
            fps: default_fps(),
            width: default_width(),
            height: default_height(),
            meters_per_pixel: default_mpp(),
            seed: 0,
        }
    }

    pub fn calibration(&self) -> MarkerCalibration {
        MarkerCalibration::new(0.0, 100.0, 100.0 * self.meters_per_pixel)
    }

    pub fn style(&self) -> RenderStyle {
        RenderStyle::new(self.width, self.height)
    }

    pub fn clips(&self) -> Vec<Clip> {
        let mut out = Vec::new();
        for w in &self.walkers {
            for c in 0..self.clips_per_subject {
                let index = out.len();
                let seed = math::derive_seed(self.seed, index as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut spec = w.clone();
                spec.phase = 2.0 * PI * unit_open(&mut rng);
                out.push(Clip {
                    index,
                    sequence_id: format!("{}-clip{c}", w.subject_id),
                    spec,
                    seed,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.walkers.is_empty() || self.clips_per_subject == 0 {
            return Err(Error::Validation("corpus has no clips".into()));
        }
        for w in &self.walkers {
            w.validate()?;
        }
        if !(self.meters_per_pixel.is_finite() && self.meters_per_pixel > 0.0) {
            return Err(Error::Validation("meters_per_pixel must be > 0".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("canvas must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub index: usize,
    pub sequence_id: String,
    pub spec: WalkerSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipOutcome {
    pub rows: Vec<GaitFeatureRow>,
    /// Finite per-frame SNRs (dB) over the full-body box.
    pub snr_db: Vec<f64>,
}

/// The grid of mitigation settings to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub approaches: Vec<Approach>,
    pub distributions: Vec<Distribution>,
    pub lambdas: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            approaches: Approach::ALL.to_vec(),
            distributions: Distribution::ALL.to_vec(),
            lambdas: alloc::vec![50.0, 100.0, 150.0, 200.0],
        }
    }
}

impl SweepGrid {
    pub fn cells(&self, kpm_patch_px: u32) -> Vec<NoiseConfig> {
        let mut out = Vec::new();
        for &a in &self.approaches {
            for &d in &self.distributions {
                for &l in &self.lambdas {
                    let mut cfg = NoiseConfig::new(a, d, l, 0);
                    cfg.kpm_patch_px = kpm_patch_px;
                    out.push(cfg);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub bins: usize,
    pub folds: usize,
    pub repeats: usize,
    pub hyper: Hyper,
    pub seed: u64,
    pub include_step_length: bool,
    pub events: EventParams,
    pub kpm_patch_px: u32,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            bins: 10,
            folds: 3,
            repeats: 2,
            hyper: Hyper::default(),
            seed: 0,
            include_step_length: false,
            events: EventParams::default(),
            kpm_patch_px: crate::mitigate::DEFAULT_KPM_PATCH_PX,
        }
    }
}

impl SweepParams {
    fn features(&self) -> Vec<usize> {
        (0..FEATURE_NAMES.len())
            .filter(|i| self.include_step_length || !STEP_LENGTH_FEATURES.contains(i))
            .collect()
    }
}

/// One row of the sweep. The baseline row has no approach or distribution
/// and lambda 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PutCell {
    pub approach: Option<Approach>,
    pub distribution: Option<Distribution>,
    pub lambda: f64,
    pub mean_jsd: f64,
    /// Cross-validated weighted F1 on the cell's features.
    pub accuracy: f64,
    /// Baseline accuracy minus this accuracy, in percentage points.
    pub accuracy_reduction: f64,
    /// Mean over frames with a finite SNR; `+inf` when nothing changed.
    pub mean_snr_db: f64,
    pub n_rows_g: usize,
    pub n_rows_gprime: usize,
    pub flags: Vec<String>,
}

impl PutCell {
    pub fn is_baseline(&self) -> bool {
        self.approach.is_none()
    }
}

/// Maps a function over items; lets callers supply parallelism.
pub trait Executor {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}

/// Renders one clip, optionally mitigates every frame, re-extracts keypoints
/// with a fresh marker extractor and runs gait extraction. The mitigation
/// seed is `cfg.seed` mixed with the clip index, so every clip sees its own
/// noise stream while equal clips agree across cells.
pub fn run_clip(clip: &Clip, corpus: &CorpusSpec, cfg: Option<&NoiseConfig>, params: &SweepParams) -> ClipOutcome {
    let style = corpus.style();
    let Ok((seq, _)) = generate_walker(&clip.spec, corpus.duration_s, corpus.fps, clip.seed) else {
        return ClipOutcome {
            rows: Vec::new(),
            snr_db: Vec::new(),
        };
    };
    let cfg = cfg.map(|c| NoiseConfig {
        seed: math::derive_seed(c.seed, clip.index as u64),
        ..*c
    });
    let mut extractor = MarkerExtractor::new(&style);
    let mut snrs = Vec::new();
    let mut frames = Vec::with_capacity(seq.frames.len());
    for f in &seq.frames {
        let Some(pose) = f.subject() else { continue };
        let ts = math::round(f.timestamp_s * 1e6) as u64;
        let (frame, record, _) = render_frame(pose, f.frame_index as u32, ts, &style);
        let observed = match &cfg {
            Some(cfg) => {
                let (mitigated, _) = mitigate_frame(&frame, Some(&record), cfg);
                if let Some(b) = record.boxes.first() {
                    if let Ok(s) = snr_db(&frame, &mitigated, b) {
                        if s.is_finite() {
                            snrs.push(s);
                        }
                    }
                }
                mitigated
            }
            None => frame,
        };
        frames.push(KeypointFrame {
            frame_index: f.frame_index,
            timestamp_s: f.timestamp_s,
            poses: alloc::vec![extractor.extract(&observed)],
        });
    }
    let observed = KeypointSequence {
        subject_id: seq.subject_id.clone(),
        sequence_id: clip.sequence_id.clone(),
        fps: seq.fps,
        frames,
    };
    let rows = extract_features(&observed, Some(&corpus.calibration()), &params.events)
        .map(|r| r.rows)
        .unwrap_or_default();
    ClipOutcome { rows, snr_db: snrs }
}

fn subject_values(rows: &[GaitFeatureRow], subject: &str, feature: usize) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.subject_id == subject)
        .filter_map(|r| r.values()[feature])
        .collect()
}

/// Mean JSD between the feature histograms of `g` and `g_prime`: averaged
/// over features per subject, then over subjects. A feature seen on only
/// one side counts as fully divergent; one seen on neither is skipped.
pub fn mean_jsd(g: &[GaitFeatureRow], g_prime: &[GaitFeatureRow], features: &[usize], bins: usize) -> Result<f64> {
    let subjects: BTreeSet<&str> = g.iter().chain(g_prime).map(|r| r.subject_id.as_str()).collect();
    let mut per_subject = Vec::new();
    for s in subjects {
        let mut scores = Vec::new();
        for &f in features {
            let a = subject_values(g, s, f);
            let b = subject_values(g_prime, s, f);
            match (a.is_empty(), b.is_empty()) {
                (true, true) => {}
                (false, false) => scores.push(histogram_pair(FEATURE_NAMES[f], &a, &b, bins)?.jsd()?),
                _ => scores.push(1.0),
            }
        }
        if !scores.is_empty() {
            per_subject.push(scores.iter().sum::<f64>() / scores.len() as f64);
        }
    }
    if per_subject.is_empty() {
        return Ok(0.0);
    }
    Ok(per_subject.iter().sum::<f64>() / per_subject.len() as f64)
}

/// Cross-validated accuracy of `rows`. Classes with fewer rows than folds
/// are dropped and flagged; with fewer than two classes left the accuracy
/// is the chance level `1 / n_classes` and the cell is flagged.
fn accuracy_of(rows: &[GaitFeatureRow], n_classes: usize, params: &SweepParams, flags: &mut Vec<String>) -> Result<f64> {
    let chance = 1.0 / n_classes.max(1) as f64;
    let data = Dataset::from_rows(rows, params.include_step_length);
    let (data, dropped) = data.without_small_classes(params.folds);
    if !dropped.is_empty() {
        flags.push(format!("dropped_classes={}", dropped.len()));
    }
    if data.classes().len() < 2 {
        flags.push(String::from("chance_placeholder"));
        return Ok(chance);
    }
    Ok(evaluate_cv(&data, &params.hyper, params.folds, params.repeats, params.seed)?.weighted_f1_mean)
}

/// Mean JSD, accuracy and flags of one cell given its baseline.
pub fn cell_metrics(
    g: &[GaitFeatureRow],
    g_prime: &[GaitFeatureRow],
    n_classes: usize,
    params: &SweepParams,
) -> Result<(f64, f64, Vec<String>)> {
    let mut flags = Vec::new();
    if g_prime.is_empty() {
        flags.push(String::from("empty_gprime"));
    }
    let jsd = mean_jsd(g, g_prime, &params.features(), params.bins)?;
    let acc = accuracy_of(g_prime, n_classes, params, &mut flags)?;
    Ok((jsd, acc, flags))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::INFINITY
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Runs the baseline and every grid cell over the corpus. Output is the
/// baseline row followed by cells in (approach, distribution, lambda) order.
pub fn run_put_sweep(corpus: &CorpusSpec, grid: &SweepGrid, params: &SweepParams, exec: &impl Executor) -> Result<Vec<PutCell>> {
    corpus.validate()?;
    let clips = corpus.clips();
    let baseline: Vec<ClipOutcome> = exec.map(&clips, |c| run_clip(c, corpus, None, params));
    let g: Vec<GaitFeatureRow> = baseline.into_iter().flat_map(|o| o.rows).collect();
    let baseline_data = Dataset::from_rows(&g, params.include_step_length);
    baseline_data.validate(Some(params.folds))?;
    let n_classes = baseline_data.classes().len();
    let base_acc = evaluate_cv(&baseline_data, &params.hyper, params.folds, params.repeats, params.seed)?.weighted_f1_mean;

    let mut cells = grid.cells(params.kpm_patch_px);
    cells.sort_by(|a, b| {
        (a.approach, a.distribution)
            .cmp(&(b.approach, b.distribution))
            .then(a.lambda.total_cmp(&b.lambda))
    });
    for c in &mut cells {
        c.seed = params.seed;
        c.validate()?;
    }
    let jobs: Vec<(usize, &Clip)> = (0..cells.len())
        .flat_map(|i| clips.iter().map(move |c| (i, c)))
        .collect();
    let outcomes = exec.map(&jobs, |&(i, clip)| run_clip(clip, corpus, Some(&cells[i]), params));
    let mut per_cell: BTreeMap<usize, (Vec<GaitFeatureRow>, Vec<f64>)> = BTreeMap::new();
    for (&(i, _), o) in jobs.iter().zip(outcomes) {
        let e = per_cell.entry(i).or_default();
        e.0.extend(o.rows);
        e.1.extend(o.snr_db);
    }
    let cell_inputs: Vec<(usize, Vec<GaitFeatureRow>, Vec<f64>)> =
        per_cell.into_iter().map(|(i, (r, s))| (i, r, s)).collect();
    let results = exec.map(&cell_inputs, |(i, rows, snrs)| {
        cell_metrics(&g, rows, n_classes, params).map(|(jsd, acc, flags)| PutCell {
            approach: Some(cells[*i].approach),
            distribution: Some(cells[*i].distribution),
            lambda: cells[*i].lambda,
            mean_jsd: jsd,
            accuracy: acc,
            accuracy_reduction: 100.0 * (base_acc - acc),
            mean_snr_db: mean(snrs),
            n_rows_g: g.len(),
            n_rows_gprime: rows.len(),
            flags,
        })
    });
    let mut out = Vec::with_capacity(results.len() + 1);
    out.push(PutCell {
        approach: None,
        distribution: None,
        lambda: 0.0,
        mean_jsd: 0.0,
        accuracy: base_acc,
        accuracy_reduction: 0.0,
        mean_snr_db: f64::INFINITY,
        n_rows_g: g.len(),
        n_rows_gprime: g.len(),
        flags: alloc::vec![String::from("baseline")],
    });
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(subject: &str, v: f64) -> GaitFeatureRow {
        let mut vals = [None; 10];
        vals[0] = Some(v);
        vals[1] = Some(v * 2.0);
        GaitFeatureRow::from_values(subject.into(), "q".into(), 0, vals)
    }

    #[test]
    fn identical_sets_have_zero_jsd() {
        let g = alloc::vec![row("a", 1.0), row("a", 2.0), row("b", 5.0)];
        assert_eq!(mean_jsd(&g, &g, &[0, 1, 2], 10).unwrap(), 0.0);
    }

    #[test]
    fn missing_side_is_fully_divergent() {
        let g = alloc::vec![row("a", 1.0), row("b", 5.0)];
        let gp = alloc::vec![row("a", 1.0)];
        // Subject a matches (0), subject b is gone (1).
        assert_eq!(mean_jsd(&g, &gp, &[0, 1], 10).unwrap(), 0.5);
    }

    #[test]
    fn empty_gprime_gets_chance_placeholder() {
        let g = alloc::vec![row("a", 1.0), row("b", 5.0)];
        let (jsd, acc, flags) = cell_metrics(&g, &[], 4, &SweepParams::default()).unwrap();
        assert_eq!(jsd, 1.0);
        assert_eq!(acc, 0.25);
        assert!(flags.iter().any(|f| f == "chance_placeholder"));
    }

    #[test]
    fn grid_cardinality() {
        assert_eq!(SweepGrid::default().cells(48).len(), 32);
    }
}
