//! Identification and Comparison dataset generation.
//!
//! Every sample is drawn from its own substream (see [`crate::rng`]), so a
//! dataset is a pure function of `(seed, parameters)` and samples can be
//! generated in parallel without changing the output.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    apply_similarity, apply_similarity_positions, perturb, perturb_appearance, Configuration, ObjectSpec, Shape,
    SimilarityParams, SIZE_RANGE, WORLD_SIDE,
};
use crate::rng::{purpose, substream};

/// Bumped whenever the sampling procedure changes.
pub const GENERATOR_VERSION: u32 = 1;

/// Upper rotation bounds of the five Comparison training stages.
pub const CURRICULUM_THETA_MAX: [f64; 5] = [
    PI / 10.0,
    PI / 2.0 + PI / 10.0,
    PI + PI / 10.0,
    3.0 * PI / 2.0 + PI / 10.0,
    TAU,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Identification,
    Comparison,
}

impl Task {
    pub fn configs_per_sample(self) -> usize {
        match self {
            Task::Identification => 1,
            Task::Comparison => 2,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Identification => "identification",
            Task::Comparison => "comparison",
        })
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Task> {
        match s {
            "ident" | "identification" => Ok(Task::Identification),
            "comp" | "comparison" => Ok(Task::Comparison),
            other => Err(Error::InvalidParameter(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentSample {
    pub label: u8,
    pub config: Configuration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompSample {
    pub label: u8,
    pub config1: Configuration,
    pub config2: Configuration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Ident(IdentSample),
    Comp(CompSample),
}

impl Sample {
    pub fn label(&self) -> u8 {
        match self {
            Sample::Ident(s) => s.label,
            Sample::Comp(s) => s.label,
        }
    }

    pub fn task(&self) -> Task {
        match self {
            Sample::Ident(_) => Task::Identification,
            Sample::Comp(_) => Task::Comparison,
        }
    }

    pub fn configs(&self) -> Vec<&Configuration> {
        match self {
            Sample::Ident(s) => vec![&s.config],
            Sample::Comp(s) => vec![&s.config1, &s.config2],
        }
    }

    pub fn configs_mut(&mut self) -> Vec<&mut Configuration> {
        match self {
            Sample::Ident(s) => vec![&mut s.config],
            Sample::Comp(s) => vec![&mut s.config1, &mut s.config2],
        }
    }
}

/// What a viewpoint change does to the non-positional features.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformMode {
    /// Only positions move; size and orientation stay part of the object's
    /// identity.
    #[default]
    Positions,
    /// Sizes scale with `s` and orientations turn with `phi`. Every object
    /// then carries `phi` and `s` in its own features relative to the
    /// reference, which a per-object model can exploit.
    Covariant,
}

impl TransformMode {
    pub fn apply(self, config: &Configuration, params: &SimilarityParams) -> Configuration {
        match self {
            TransformMode::Positions => apply_similarity_positions(config, params),
            TransformMode::Covariant => apply_similarity(config, params),
        }
    }
}

impl fmt::Display for TransformMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransformMode::Positions => "positions",
            TransformMode::Covariant => "covariant",
        })
    }
}

impl FromStr for TransformMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<TransformMode> {
        match s {
            "positions" => Ok(TransformMode::Positions),
            "covariant" => Ok(TransformMode::Covariant),
            other => Err(Error::InvalidParameter(format!("unknown transform mode {other:?}"))),
        }
    }
}

/// Generation parameters shared by all datasets of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub eps: f64,
    pub world_side: f64,
    pub size_range: (f64, f64),
    pub n_train: usize,
    pub n_eval: usize,
    pub seed: u64,
    pub transform: TransformMode,
}

impl GenConfig {
    pub fn identification_defaults(seed: u64) -> GenConfig {
        GenConfig {
            eps: 0.01,
            world_side: WORLD_SIDE,
            size_range: SIZE_RANGE,
            n_train: 10_000,
            n_eval: 5_000,
            seed,
            transform: TransformMode::Positions,
        }
    }

    pub fn comparison_defaults(seed: u64) -> GenConfig {
        GenConfig {
            n_train: 100_000,
            n_eval: 10_000,
            ..GenConfig::identification_defaults(seed)
        }
    }

    pub fn with_counts(mut self, n_train: usize, n_eval: usize) -> GenConfig {
        self.n_train = n_train;
        self.n_eval = n_eval;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_eval == 0 {
            return Err(Error::InvalidParameter("sample counts must be > 0".into()));
        }
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eps must be >= 0, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Metadata stored in the first line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub name: String,
    pub task: Task,
    pub n_min: usize,
    pub n_max: usize,
    pub theta_max: f64,
    pub eps: f64,
    pub seed: u64,
    #[serde(default)]
    pub distractors_max: usize,
    #[serde(default)]
    pub transform: TransformMode,
    pub generator_version: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn task(&self) -> Task {
        self.header.task
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.samples.iter().filter(|s| s.label() == 1).count();
        (self.samples.len() - pos, pos)
    }

    /// Mean object count per configuration.
    pub fn mean_n_obj(&self) -> f64 {
        let mut total = 0usize;
        let mut count = 0usize;
        for s in &self.samples {
            for c in s.configs() {
                total += c.len();
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total as f64 / count as f64
        }
    }

    pub fn max_n_obj(&self) -> usize {
        self.samples
            .iter()
            .flat_map(|s| s.configs().into_iter().map(Configuration::len))
            .max()
            .unwrap_or(0)
    }

    /// First `n` samples, keeping the header.
    pub fn truncated(&self, n: usize) -> Dataset {
        Dataset {
            header: self.header.clone(),
            samples: self.samples.iter().take(n).cloned().collect(),
        }
    }
}

/// Balanced labelling: even indices are positive.
fn label_for(index: usize) -> u8 {
    u8::from(index.is_multiple_of(2))
}

fn sample_object<R: Rng + ?Sized>(rng: &mut R) -> ObjectSpec {
    ObjectSpec {
        x: rng.gen::<f64>() * WORLD_SIDE,
        y: rng.gen::<f64>() * WORLD_SIDE,
        size: SIZE_RANGE.0 + rng.gen::<f64>() * (SIZE_RANGE.1 - SIZE_RANGE.0),
        orientation: rng.gen::<f64>() * TAU,
        color: [rng.gen(), rng.gen(), rng.gen()],
        shape: Shape::ALL[rng.gen_range(0..3)],
    }
}

pub fn sample_reference<R: Rng + ?Sized>(n_obj: usize, rng: &mut R) -> Result<Configuration> {
    if n_obj == 0 {
        return Err(Error::InvalidParameter("n_obj must be >= 1".into()));
    }
    Ok(Configuration::new(
        (0..n_obj).map(|_| sample_object(rng)).collect(),
    ))
}

/// Perturb every feature of `reference`, then apply `params`.
pub fn positive_from<R: Rng + ?Sized>(
    reference: &Configuration,
    eps: f64,
    params: &SimilarityParams,
    mode: TransformMode,
    rng: &mut R,
) -> Configuration {
    mode.apply(&perturb(reference, eps, rng), params)
}

/// Perturb appearance, resample every position uniformly, then apply `params`.
pub fn negative_from<R: Rng + ?Sized>(
    reference: &Configuration,
    eps: f64,
    params: &SimilarityParams,
    mode: TransformMode,
    rng: &mut R,
) -> Configuration {
    let mut c = perturb_appearance(reference, eps, rng);
    for o in &mut c.objects {
        o.x = rng.gen::<f64>() * WORLD_SIDE;
        o.y = rng.gen::<f64>() * WORLD_SIDE;
    }
    mode.apply(&c, params)
}

pub fn make_ident_positive<R: Rng + ?Sized>(
    reference: &Configuration,
    gen: &GenConfig,
    rng: &mut R,
) -> Configuration {
    let params = SimilarityParams::sample(rng, TAU);
    positive_from(reference, gen.eps, &params, gen.transform, rng)
}

pub fn make_ident_negative<R: Rng + ?Sized>(
    reference: &Configuration,
    gen: &GenConfig,
    rng: &mut R,
) -> Configuration {
    let params = SimilarityParams::sample(rng, TAU);
    negative_from(reference, gen.eps, &params, gen.transform, rng)
}

fn ident_sample(reference: &Configuration, gen: &GenConfig, purpose: u64, i: usize) -> Sample {
    let mut rng = substream(gen.seed, purpose, i as u64);
    let label = label_for(i);
    let config = if label == 1 {
        make_ident_positive(reference, gen, &mut rng)
    } else {
        make_ident_negative(reference, gen, &mut rng)
    };
    Sample::Ident(IdentSample { label, config })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationSets {
    pub reference: Configuration,
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

impl IdentificationSets {
    pub fn splits(&self) -> [&Dataset; 3] {
        [&self.train, &self.valid, &self.test]
    }
}

pub fn ident_name(n_obj: usize) -> String {
    format!("IDS_{n_obj}")
}

pub fn comp_name(n_min: usize, n_max: usize) -> String {
    format!("CDS_{n_min}_{n_max}")
}

pub fn gen_identification(n_obj: usize, gen: &GenConfig) -> Result<IdentificationSets> {
    let reference = sample_reference(
        n_obj,
        &mut substream(gen.seed, purpose::REFERENCE, n_obj as u64),
    )?;
    gen_identification_from(&ident_name(n_obj), reference, gen)
}

/// Identification splits around a caller-supplied reference configuration.
pub fn gen_identification_from(
    name: &str,
    reference: Configuration,
    gen: &GenConfig,
) -> Result<IdentificationSets> {
    gen.validate()?;
    if reference.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    let n = reference.len();
    let make = |suffix: &str, purpose: u64, count: usize| Dataset {
        header: DatasetHeader {
            name: format!("{name}{suffix}"),
            task: Task::Identification,
            n_min: n,
            n_max: n,
            theta_max: TAU,
            eps: gen.eps,
            seed: gen.seed,
            distractors_max: 0,
            transform: gen.transform,
            generator_version: GENERATOR_VERSION,
        },
        samples: (0..count)
            .into_par_iter()
            .map(|i| ident_sample(&reference, gen, purpose, i))
            .collect(),
    };
    let train = make("", purpose::TRAIN, gen.n_train);
    let valid = make("_valid", purpose::VALID, gen.n_eval);
    let test = make("_test", purpose::TEST, gen.n_eval);
    Ok(IdentificationSets {
        reference,
        train,
        valid,
        test,
    })
}

/// One Comparison pair with a random object count in `n_range`.
pub fn make_comp_sample<R: Rng + ?Sized>(
    n_range: (usize, usize),
    theta_max: f64,
    label: u8,
    gen: &GenConfig,
    rng: &mut R,
) -> Result<CompSample> {
    check_comp_args(n_range, theta_max)?;
    let n = rng.gen_range(n_range.0..=n_range.1);
    let config1 = sample_reference(n, rng)?;
    let params = SimilarityParams::sample(rng, theta_max);
    let config2 = if label == 1 {
        positive_from(&config1, gen.eps, &params, gen.transform, rng)
    } else {
        negative_from(&config1, gen.eps, &params, gen.transform, rng)
    };
    Ok(CompSample {
        label,
        config1,
        config2,
    })
}

fn check_comp_args(n_range: (usize, usize), theta_max: f64) -> Result<()> {
    if n_range.0 == 0 || n_range.0 > n_range.1 {
        return Err(Error::InvalidParameter(format!(
            "invalid object range {}..={}",
            n_range.0, n_range.1
        )));
    }
    if !(theta_max > 0.0 && theta_max <= TAU) {
        return Err(Error::InvalidParameter(format!(
            "theta_max must be in (0, 2π], got {theta_max}"
        )));
    }
    Ok(())
}

/// A single Comparison dataset with a fixed rotation bound.
pub fn gen_comparison_set(
    name: &str,
    n_range: (usize, usize),
    theta_max: f64,
    count: usize,
    purpose: u64,
    gen: &GenConfig,
) -> Result<Dataset> {
    gen.validate()?;
    check_comp_args(n_range, theta_max)?;
    let samples = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(gen.seed, purpose, i as u64);
            make_comp_sample(n_range, theta_max, label_for(i), gen, &mut rng).map(Sample::Comp)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        header: DatasetHeader {
            name: name.to_string(),
            task: Task::Comparison,
            n_min: n_range.0,
            n_max: n_range.1,
            theta_max,
            eps: gen.eps,
            seed: gen.seed,
            distractors_max: 0,
            transform: gen.transform,
            generator_version: GENERATOR_VERSION,
        },
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSets {
    pub train: Vec<Dataset>,
    pub valid: Dataset,
    pub test: Dataset,
}

pub fn gen_comparison_curriculum(n_range: (usize, usize), gen: &GenConfig) -> Result<ComparisonSets> {
    let base = comp_name(n_range.0, n_range.1);
    let train = CURRICULUM_THETA_MAX
        .iter()
        .enumerate()
        .map(|(k, &theta)| {
            gen_comparison_set(
                &format!("{base}_{k}"),
                n_range,
                theta,
                gen.n_train,
                purpose::TRAIN + k as u64,
                gen,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let valid = gen_comparison_set(
        &format!("{base}_valid"),
        n_range,
        TAU,
        gen.n_eval,
        purpose::VALID,
        gen,
    )?;
    let test = gen_comparison_set(
        &format!("{base}_test"),
        n_range,
        TAU,
        gen.n_eval,
        purpose::TEST,
        gen,
    )?;
    Ok(ComparisonSets { train, valid, test })
}

/// Append `n_d` fresh objects to every configuration of `sample`.
pub fn add_distractors<R: Rng + ?Sized>(sample: &Sample, n_d: usize, rng: &mut R) -> Sample {
    let mut out = sample.clone();
    for c in out.configs_mut() {
        for _ in 0..n_d {
            c.objects.push(sample_object(rng));
        }
    }
    out
}

/// Family-preserving name: the `_d{nd_max}` tag goes before a split suffix
/// (`_valid`, `_test`) or a curriculum stage index, so `IDS_5_valid`
/// becomes `IDS_5_d3_valid` and `CDS_3_8_2` becomes `CDS_3_8_d3_2`.
pub fn distractor_name(name: &str, task: Task, nd_max: usize) -> String {
    let tag = format!("_d{nd_max}");
    for suffix in ["_valid", "_test"] {
        if let Some(base) = name.strip_suffix(suffix) {
            return format!("{base}{tag}{suffix}");
        }
    }
    if task == Task::Comparison {
        if let Some((base, stage)) = name.rsplit_once('_') {
            if stage.len() == 1 && stage.chars().all(|c| c.is_ascii_digit()) && base.matches('_').count() >= 2 {
                return format!("{base}{tag}_{stage}");
            }
        }
    }
    format!("{name}{tag}")
}

/// Copy of `dataset` where each sample receives `n_d ~ U{0..=nd_max}`
/// distractors per configuration.
pub fn with_distractors(dataset: &Dataset, nd_max: usize, seed: u64) -> Dataset {
    let mut header = dataset.header.clone();
    header.name = distractor_name(&dataset.header.name, dataset.task(), nd_max);
    header.distractors_max = nd_max;
    let samples = dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = substream(seed, purpose::DISTRACTOR, i as u64);
            let n_d = rng.gen_range(0..=nd_max);
            add_distractors(s, n_d, &mut rng)
        })
        .collect();
    Dataset { header, samples }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    SamePoint,
    Line,
    ScatteredRedCircles,
    ColoredCircles,
    RandomDiverse,
}

impl PresetKind {
    pub const ALL: [PresetKind; 5] = [
        PresetKind::SamePoint,
        PresetKind::Line,
        PresetKind::ScatteredRedCircles,
        PresetKind::ColoredCircles,
        PresetKind::RandomDiverse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetKind::SamePoint => "same-point",
            PresetKind::Line => "line",
            PresetKind::ScatteredRedCircles => "scattered-red-circles",
            PresetKind::ColoredCircles => "colored-circles",
            PresetKind::RandomDiverse => "random-diverse",
        }
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<PresetKind> {
        PresetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

const PRESET_SIZE: f64 = 1.0;
const RED: [f64; 3] = [1.0, 0.0, 0.0];

fn red_circle(x: f64, y: f64) -> ObjectSpec {
    ObjectSpec {
        x,
        y,
        size: PRESET_SIZE,
        orientation: 0.0,
        color: RED,
        shape: Shape::Circle,
    }
}

pub fn preset_config<R: Rng + ?Sized>(
    kind: PresetKind,
    n_obj: usize,
    rng: &mut R,
) -> Result<Configuration> {
    if n_obj == 0 {
        return Err(Error::InvalidParameter("n_obj must be >= 1".into()));
    }
    let centre = WORLD_SIDE / 2.0;
    let objects = match kind {
        PresetKind::SamePoint => (0..n_obj).map(|_| red_circle(centre, centre)).collect(),
        PresetKind::Line => {
            let offset = (n_obj as f64 - 1.0) / 2.0;
            (0..n_obj)
                .map(|k| red_circle(centre + k as f64 - offset, centre))
                .collect()
        }
        PresetKind::ScatteredRedCircles => (0..n_obj)
            .map(|_| {
                red_circle(
                    rng.gen::<f64>() * WORLD_SIDE,
                    rng.gen::<f64>() * WORLD_SIDE,
                )
            })
            .collect(),
        PresetKind::ColoredCircles => (0..n_obj)
            .map(|_| {
                let mut o = red_circle(
                    rng.gen::<f64>() * WORLD_SIDE,
                    rng.gen::<f64>() * WORLD_SIDE,
                );
                o.color = [rng.gen(), rng.gen(), rng.gen()];
                o
            })
            .collect(),
        PresetKind::RandomDiverse => return sample_reference(n_obj, rng),
    };
    Ok(Configuration::new(objects))
}

/// Identification splits whose reference is a preset configuration.
pub fn gen_preset_identification(
    kind: PresetKind,
    n_obj: usize,
    gen: &GenConfig,
) -> Result<IdentificationSets> {
    let reference = preset_config(
        kind,
        n_obj,
        &mut substream(gen.seed, purpose::PRESET, n_obj as u64),
    )?;
    gen_identification_from(&format!("PRESET_{kind}_{n_obj}"), reference, gen)
}
