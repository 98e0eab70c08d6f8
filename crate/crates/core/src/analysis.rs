//! Decision heatmaps, the cross-range generalization matrix, sample-efficiency
//! sweeps, distractor evaluation, the easy/hard preset study, and the bench
//! experiment matrices built from them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    comp_name, gen_comparison_curriculum, gen_identification, gen_preset_identification,
    with_distractors, ComparisonSets, Dataset, GenConfig, IdentificationSets, PresetKind, Sample,
    Task,
};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, WORLD_SIDE};
use crate::models::{target_class, LayerKind, Model};
use crate::trainer::{
    evaluate, mean_std, run_bundle, run_matrix, DataBundle, MatrixResult, RunReport, TrainSpec,
};

/// Axis-aligned world rectangle covered by a heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Extent {
    pub const WORLD: Extent = Extent {
        x_min: 0.0,
        x_max: WORLD_SIDE,
        y_min: 0.0,
        y_max: WORLD_SIDE,
    };

    /// The world square, grown to whole units until every object fits.
    /// Transformed configurations routinely leave `[0, 20]²`.
    pub fn covering(config: &Configuration) -> Extent {
        let mut e = Extent::WORLD;
        for o in &config.objects {
            e.x_min = e.x_min.min(o.x.floor());
            e.x_max = e.x_max.max(o.x.ceil());
            e.y_min = e.y_min.min(o.y.floor());
            e.y_max = e.y_max.max(o.y.ceil());
        }
        e
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x_min..=self.x_max).contains(&p[0]) && (self.y_min..=self.y_max).contains(&p[1])
    }
}

/// `H = C₊ − C₋` as one object moves over a lattice.
///
/// `grid[p][q]` has the object at the centre of cell `(p, q)`, row `p`
/// along y and column `q` along x. The cell containing the object's true
/// position (`star_cell`) instead holds H for the unmodified input, so every
/// cell equals a forward pass with the object at [`Heatmap::cell_position`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid: Vec<Vec<f64>>,
    pub extent: Extent,
    pub object_index: usize,
    pub star: [f64; 2],
    pub star_cell: (usize, usize),
}

impl Heatmap {
    pub fn resolution(&self) -> usize {
        self.grid.len()
    }

    pub fn cell_center(&self, p: usize, q: usize) -> [f64; 2] {
        cell_center(&self.extent, self.resolution(), p, q)
    }

    pub fn cell_position(&self, p: usize, q: usize) -> [f64; 2] {
        if (p, q) == self.star_cell {
            self.star
        } else {
            self.cell_center(p, q)
        }
    }

    pub fn star_value(&self) -> f64 {
        self.grid[self.star_cell.0][self.star_cell.1]
    }
}

fn cell_center(e: &Extent, res: usize, p: usize, q: usize) -> [f64; 2] {
    let w = (e.x_max - e.x_min) / res as f64;
    let h = (e.y_max - e.y_min) / res as f64;
    [
        e.x_min + (q as f64 + 0.5) * w,
        e.y_min + (p as f64 + 0.5) * h,
    ]
}

fn cell_of(e: &Extent, res: usize, pos: [f64; 2]) -> (usize, usize) {
    let idx = |v: f64, lo: f64, hi: f64| {
        let k = ((v - lo) / (hi - lo) * res as f64).floor();
        (k.max(0.0) as usize).min(res - 1)
    };
    (idx(pos[1], e.y_min, e.y_max), idx(pos[0], e.x_min, e.x_max))
}

/// The configuration a heatmap varies: the Identification input, or the
/// first configuration of a Comparison pair.
pub fn heatmap_base(sample: &Sample) -> &Configuration {
    match sample {
        Sample::Ident(s) => &s.config,
        Sample::Comp(s) => &s.config1,
    }
}

/// Copy of `base` with object `index` moved to `pos`.
pub fn moved(base: &Configuration, index: usize, pos: [f64; 2]) -> Configuration {
    let mut c = base.clone();
    c.objects[index].x = pos[0];
    c.objects[index].y = pos[1];
    c
}

/// Model inputs for one heatmap cell. Comparison models see the base next
/// to its moved copy.
fn cell_rows<'a>(task: Task, base: &'a Configuration, moved: &'a Configuration) -> Vec<&'a Configuration> {
    match task {
        Task::Identification => vec![moved],
        Task::Comparison => vec![base, moved],
    }
}

/// `C₊ − C₋` for a row of logits.
pub fn score_gap(logits: [f64; 2]) -> f64 {
    logits[target_class(1)] - logits[target_class(0)]
}

const CELL_CHUNK: usize = 256;

pub fn heatmap(model: &Model, sample: &Sample, object_index: usize, res: usize) -> Result<Heatmap> {
    model.check_task(sample.task())?;
    if res == 0 {
        return Err(Error::InvalidParameter("heatmap resolution must be >= 1".into()));
    }
    let base = heatmap_base(sample);
    if object_index >= base.len() {
        return Err(Error::IndexOutOfRange {
            index: object_index,
            len: base.len(),
        });
    }
    let star = base.objects[object_index].position();
    let extent = Extent::covering(base);
    let star_cell = cell_of(&extent, res, star);
    let task = model.task();

    let cells: Vec<(usize, usize)> = (0..res).flat_map(|p| (0..res).map(move |q| (p, q))).collect();
    let values = cells
        .par_chunks(CELL_CHUNK)
        .map(|chunk| -> Result<Vec<f64>> {
            let configs: Vec<Configuration> = chunk
                .iter()
                .map(|&(p, q)| {
                    let pos = if (p, q) == star_cell {
                        star
                    } else {
                        cell_center(&extent, res, p, q)
                    };
                    moved(base, object_index, pos)
                })
                .collect();
            let rows: Vec<Vec<&Configuration>> =
                configs.iter().map(|c| cell_rows(task, base, c)).collect();
            let logits = model.logits_for(&model.prepare_configs(&rows)?)?;
            Ok(logits.into_iter().map(score_gap).collect())
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    let grid = values.chunks(res).map(<[f64]>::to_vec).collect();
    Ok(Heatmap {
        grid,
        extent,
        object_index,
        star,
        star_cell,
    })
}

/// Test accuracies of models trained on different object ranges, evaluated
/// on every test range. Rows are test ranges, columns training ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationMatrix {
    pub model: LayerKind,
    pub train: Vec<String>,
    pub test: Vec<String>,
    /// `cells[test][train]` is `(mean, std)` over seeds.
    pub cells: Vec<Vec<(f64, f64)>>,
}

impl GeneralizationMatrix {
    pub fn to_table(&self) -> String {
        let mut out = format!("{}: test \\ train", self.model);
        for t in &self.train {
            out.push('\t');
            out.push_str(t);
        }
        out.push('\n');
        for (name, row) in self.test.iter().zip(&self.cells) {
            out.push_str(name);
            for (m, s) in row {
                out.push_str(&format!("\t{m:.3} ± {s:.3}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `models[j]` holds the per-seed models trained on range `j`.
pub fn generalization_matrix(
    models: &[(String, Vec<Model>)],
    tests: &[(String, Dataset)],
) -> Result<GeneralizationMatrix> {
    let kind = models
        .iter()
        .flat_map(|(_, ms)| ms.first())
        .map(|m| m.config().layer)
        .next()
        .ok_or_else(|| Error::InvalidParameter("no models given".into()))?;
    for m in models.iter().flat_map(|(_, ms)| ms) {
        m.check_task(Task::Comparison)?;
        if m.config().layer != kind {
            return Err(Error::InvalidParameter(
                "a generalization matrix covers one model kind".into(),
            ));
        }
    }
    let cells = tests
        .iter()
        .map(|(_, data)| {
            models
                .iter()
                .map(|(_, ms)| {
                    let accs = ms
                        .par_iter()
                        .map(|m| evaluate(m, data))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(mean_std(&accs))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneralizationMatrix {
        model: kind,
        train: models.iter().map(|(n, _)| n.clone()).collect(),
        test: tests.iter().map(|(n, _)| n.clone()).collect(),
        cells,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub model: LayerKind,
    pub sizes: Vec<usize>,
    pub steps_per_epoch: usize,
    /// `accuracy[k][s]`: test accuracy at `sizes[k]` for seed `s`.
    pub accuracy: Vec<Vec<f64>>,
    pub runs: Vec<Vec<RunReport>>,
}

impl SweepResult {
    pub fn means(&self) -> Vec<(f64, f64)> {
        self.accuracy.iter().map(|a| mean_std(a)).collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{}\tsamples\taccuracy\n", self.model);
        for (size, (m, s)) in self.sizes.iter().zip(self.means()) {
            out.push_str(&format!("\t{size}\t{m:.3} ± {s:.3}\n"));
        }
        out
    }
}

fn truncate_bundle(bundle: &DataBundle, n: usize) -> DataBundle {
    DataBundle {
        name: format!("{}[..{n}]", bundle.name),
        train: bundle.train.iter().map(|d| d.truncated(n)).collect(),
        valid: bundle.valid.clone(),
        test: bundle.test.clone(),
    }
}

/// Train on the first `size` samples of each training set for each size,
/// cycling the data so every run takes the same optimizer steps per epoch:
/// `spec.steps_per_epoch` if set, else a full pass over the untruncated set.
pub fn sample_efficiency_sweep(
    kind: LayerKind,
    bundle: &DataBundle,
    sizes: &[usize],
    seeds: &[u64],
    spec: &TrainSpec,
) -> Result<SweepResult> {
    if sizes.is_empty() || !sizes.windows(2).all(|w| w[0] < w[1]) || sizes[0] == 0 {
        return Err(Error::InvalidParameter(
            "sweep sizes must be positive and strictly ascending".into(),
        ));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let full = bundle.train.iter().map(Dataset::len).max().unwrap_or(0);
    let steps = spec.steps_per_epoch.unwrap_or_else(|| spec.steps_for(full)).max(1);
    let spec = TrainSpec {
        steps_per_epoch: Some(steps),
        ..*spec
    };
    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let b = truncate_bundle(bundle, n);
            let config = crate::models::ModelConfig::for_dataset(kind, &b.train[0]);
            run_bundle(config, &b, &TrainSpec { seed, ..spec }).map(|(_, r)| r)
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<Vec<RunReport>> = runs.chunks(seeds.len()).map(<[RunReport]>::to_vec).collect();
    let accuracy = runs
        .iter()
        .map(|rs| rs.iter().map(|r| r.test_accuracy.unwrap_or(f64::NAN)).collect())
        .collect();
    Ok(SweepResult {
        model: kind,
        sizes: sizes.to_vec(),
        steps_per_epoch: steps,
        accuracy,
        runs,
    })
}

fn distractor_bundle(bundle: &DataBundle, nd_max: usize, seed: u64) -> DataBundle {
    // Distinct streams per split so the splits stay independent.
    let d = |data: &Dataset, k: u64| with_distractors(data, nd_max, seed.wrapping_add(k));
    DataBundle {
        name: format!("{}_d{nd_max}", bundle.name),
        train: bundle
            .train
            .iter()
            .enumerate()
            .map(|(k, t)| d(t, k as u64))
            .collect(),
        valid: d(&bundle.valid, 100),
        test: d(&bundle.test, 200),
    }
}

/// Train and test every model kind with `n_d ~ U{0..=nd_max}` distractors
/// added to both tasks. Each task has its own training spec.
#[allow(clippy::too_many_arguments)]
pub fn distractor_eval(
    kinds: &[LayerKind],
    ident: &[DataBundle],
    comp: &[DataBundle],
    nd_max: usize,
    seeds: &[u64],
    ident_spec: &TrainSpec,
    comp_spec: &TrainSpec,
    distractor_seed: u64,
) -> Result<MatrixResult> {
    let with = |bs: &[DataBundle]| -> Vec<DataBundle> {
        bs.iter()
            .map(|b| distractor_bundle(b, nd_max, distractor_seed))
            .collect()
    };
    let a = run_matrix(kinds, &[("Identification".to_string(), with(ident))], seeds, ident_spec)?;
    let b = run_matrix(kinds, &[("Comparison".to_string(), with(comp))], seeds, comp_spec)?;
    Ok(MatrixResult {
        groups: a.groups.into_iter().chain(b.groups).collect(),
        cells: a.cells.into_iter().chain(b.cells).collect(),
        params: a.params,
    })
}

pub fn ident_bundle(sets: IdentificationSets) -> DataBundle {
    DataBundle {
        name: sets.train.header.name.clone(),
        train: vec![sets.train],
        valid: sets.valid,
        test: sets.test,
    }
}

/// A Comparison bundle; without the curriculum only the full-rotation
/// stage is kept.
pub fn comp_bundle(name: String, sets: ComparisonSets, curriculum: bool) -> DataBundle {
    let train = if curriculum {
        sets.train
    } else {
        sets.train.into_iter().last().into_iter().collect()
    };
    DataBundle {
        name,
        train,
        valid: sets.valid,
        test: sets.test,
    }
}

/// Identification on each preset reference; one group per preset.
pub fn preset_study(
    presets: &[PresetKind],
    kinds: &[LayerKind],
    n_obj: usize,
    gen: &GenConfig,
    seeds: &[u64],
    spec: &TrainSpec,
) -> Result<MatrixResult> {
    let groups = presets
        .iter()
        .map(|&p| {
            gen_preset_identification(p, n_obj, gen)
                .map(|sets| (p.to_string(), vec![ident_bundle(sets)]))
        })
        .collect::<Result<Vec<_>>>()?;
    run_matrix(kinds, &groups, seeds, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
    /// Tiny sets and one pass per epoch, for checking the plumbing.
    Smoke,
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Scale> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            "smoke" => Ok(Scale::Smoke),
            other => Err(Error::InvalidParameter(format!("unknown scale {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchKind {
    Table1,
    Table2,
    GenMatrix,
    Sweep,
    Distractors,
    Presets,
}

impl BenchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchKind::Table1 => "table1",
            BenchKind::Table2 => "table2",
            BenchKind::GenMatrix => "gen-matrix",
            BenchKind::Sweep => "sweep",
            BenchKind::Distractors => "distractors",
            BenchKind::Presets => "presets",
        }
    }
}

impl fmt::Display for BenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<BenchKind> {
        [
            BenchKind::Table1,
            BenchKind::Table2,
            BenchKind::GenMatrix,
            BenchKind::Sweep,
            BenchKind::Distractors,
            BenchKind::Presets,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown bench {s:?}")))
    }
}

/// Dataset sizes and object ranges of one bench scale.
///
/// Desk scale keeps the full per-run sample counts for the small object
/// ranges and drops or subsamples the large ones, so each bench finishes in
/// well under an hour on a laptop:
///
/// | bench | desk | paper |
/// |---|---|---|
/// | table1 | IDS 5, 8 / 12 / 24; 5k train, 2k eval | IDS 3..=30 by range; 10k / 5k |
/// | table2 | CDS 3–8, 9–20; 10k per stage, 2k eval | CDS 3–8, 9–20, 21–30; 100k / 10k |
/// | gen-matrix | CDS 3–8, 9–20; 10k per stage, 2k eval | all three ranges; 100k / 10k |
/// | sweep | IDS_5 at 10..10k; CDS 3–8 at 100..10k | adds 100k for Comparison |
/// | distractors | IDS_5 and CDS 3–8, n_d ≤ 3; 10k, 2k eval | IDS 3..=8 and CDS 3–8; 10k / 100k |
/// | presets | five presets of 5 objects; 5k / 2k | 10k / 5k |
///
/// Desk and paper scales train with the optimizer step budget of the full-size runs
/// (one pass over 10k Identification or 100k Comparison samples per epoch),
/// cycling smaller training sets. Comparison accuracy depends on the step
/// count far more than on the sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleCounts {
    pub ident_train: usize,
    /// Identification training size of the sweep and distractor benches.
    pub ident_full_train: usize,
    pub ident_eval: usize,
    pub comp_train: usize,
    pub comp_eval: usize,
}

impl Scale {
    pub fn counts(self) -> ScaleCounts {
        match self {
            Scale::Desk => ScaleCounts {
                ident_train: 5_000,
                ident_full_train: 10_000,
                ident_eval: 2_000,
                comp_train: 10_000,
                comp_eval: 2_000,
            },
            Scale::Paper => ScaleCounts {
                ident_train: 10_000,
                ident_full_train: 10_000,
                ident_eval: 5_000,
                comp_train: 100_000,
                comp_eval: 10_000,
            },
            Scale::Smoke => ScaleCounts {
                ident_train: 64,
                ident_full_train: 100,
                ident_eval: 32,
                comp_train: 100,
                comp_eval: 32,
            },
        }
    }

    fn ident_groups(self) -> Vec<(&'static str, Vec<usize>)> {
        match self {
            Scale::Desk => vec![("3-8", vec![5, 8]), ("9-20", vec![12]), ("21-30", vec![24])],
            Scale::Smoke => vec![("3-8", vec![5]), ("9-20", vec![12])],
            Scale::Paper => vec![
                ("3-8", (3..=8).collect()),
                ("9-20", (9..=20).collect()),
                ("21-30", (21..=30).collect()),
            ],
        }
    }

    /// Training specs for Identification and Comparison.
    pub fn specs(self) -> (TrainSpec, TrainSpec) {
        let base = TrainSpec::new(0);
        match self {
            Scale::Smoke => (
                TrainSpec {
                    epochs: 2,
                    stage_epochs: 1,
                    ..base
                },
                TrainSpec {
                    epochs: 2,
                    stage_epochs: 1,
                    ..base
                },
            ),
            Scale::Desk | Scale::Paper => (ident_spec(&base), comp_spec(&base)),
        }
    }

    fn comp_ranges(self) -> Vec<(usize, usize)> {
        match self {
            Scale::Desk | Scale::Smoke => vec![(3, 8), (9, 20)],
            Scale::Paper => vec![(3, 8), (9, 20), (21, 30)],
        }
    }
}

/// Output of one bench run: a printable table plus every run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub bench: BenchKind,
    pub table: String,
    pub runs: Vec<RunReport>,
}

fn matrix_report(bench: BenchKind, m: MatrixResult) -> BenchReport {
    BenchReport {
        bench,
        table: m.to_table(),
        runs: m.cells.into_iter().flat_map(|c| c.runs).collect(),
    }
}

fn ident_gen(seed: u64, c: &ScaleCounts) -> GenConfig {
    GenConfig::identification_defaults(seed).with_counts(c.ident_train, c.ident_eval)
}

fn comp_sets(range: (usize, usize), seed: u64, c: &ScaleCounts) -> Result<DataBundle> {
    let gen = GenConfig::comparison_defaults(seed).with_counts(c.comp_train, c.comp_eval);
    let sets = gen_comparison_curriculum(range, &gen)?;
    Ok(comp_bundle(comp_name(range.0, range.1), sets, true))
}

/// Identification training with the step budget of a 10k-sample epoch.
pub fn ident_spec(base: &TrainSpec) -> TrainSpec {
    TrainSpec {
        steps_per_epoch: Some(base.steps_for(FULL_IDENT_TRAIN)),
        ..*base
    }
}

/// Comparison training with the step budget of a 100k-sample epoch.
pub fn comp_spec(base: &TrainSpec) -> TrainSpec {
    TrainSpec {
        steps_per_epoch: Some(base.steps_for(FULL_COMP_TRAIN)),
        ..*base
    }
}

pub const FULL_IDENT_TRAIN: usize = 10_000;
pub const FULL_COMP_TRAIN: usize = 100_000;

/// Run one experiment matrix end to end. All data come from `data_seed`;
/// model seeds are `seeds`.
pub fn bench(kind: BenchKind, scale: Scale, seeds: &[u64], data_seed: u64) -> Result<BenchReport> {
    let counts = scale.counts();
    let (spec, cspec) = scale.specs();
    let graph_kinds = LayerKind::GRAPH_KINDS;
    match kind {
        BenchKind::Table1 => {
            let groups = scale
                .ident_groups()
                .into_iter()
                .map(|(name, ns)| {
                    let bundles = ns
                        .iter()
                        .map(|&n| gen_identification(n, &ident_gen(data_seed, &counts)).map(ident_bundle))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((name.to_string(), bundles))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut kinds = graph_kinds.to_vec();
            kinds.push(LayerKind::Mlp);
            Ok(matrix_report(kind, run_matrix(&kinds, &groups, seeds, &spec)?))
        }
        BenchKind::Table2 => {
            let groups = scale
                .comp_ranges()
                .into_iter()
                .map(|r| Ok((format!("{}-{}", r.0, r.1), vec![comp_sets(r, data_seed, &counts)?])))
                .collect::<Result<Vec<_>>>()?;
            let mut kinds = graph_kinds.to_vec();
            kinds.push(LayerKind::Mlp);
            Ok(matrix_report(kind, run_matrix(&kinds, &groups, seeds, &cspec)?))
        }
        BenchKind::GenMatrix => {
            let bundles = scale
                .comp_ranges()
                .into_iter()
                .map(|r| comp_sets(r, data_seed, &counts))
                .collect::<Result<Vec<_>>>()?;
            let tests: Vec<(String, Dataset)> = bundles
                .iter()
                .map(|b| (b.name.clone(), b.test.clone()))
                .collect();
            let mut table = String::new();
            let mut runs = Vec::new();
            for k in graph_kinds {
                let mut trained = Vec::new();
                for b in &bundles {
                    let results = seeds
                        .par_iter()
                        .map(|&s| {
                            let config = crate::models::ModelConfig::for_dataset(k, &b.train[0]);
                            run_bundle(config, b, &TrainSpec { seed: s, ..cspec })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let (models, reports): (Vec<_>, Vec<_>) = results.into_iter().unzip();
                    runs.extend(reports);
                    trained.push((b.name.clone(), models));
                }
                table.push_str(&generalization_matrix(&trained, &tests)?.to_table());
            }
            Ok(BenchReport {
                bench: kind,
                table,
                runs,
            })
        }
        BenchKind::Sweep => {
            let ident = ident_bundle(gen_identification(
                5,
                &GenConfig::identification_defaults(data_seed).with_counts(counts.ident_full_train, counts.ident_eval),
            )?);
            let comp = comp_sets((3, 8), data_seed, &counts)?;
            let ident_sizes: Vec<usize> = [10, 100, 1_000, 10_000]
                .into_iter()
                .filter(|&n| n <= counts.ident_full_train)
                .collect();
            let comp_sizes: Vec<usize> = [100, 1_000, 10_000, 100_000]
                .into_iter()
                .filter(|&n| n <= counts.comp_train)
                .collect();
            let mut table = String::new();
            let mut runs = Vec::new();
            for (task, bundle, sizes, spec) in [
                ("identification", &ident, ident_sizes, &spec),
                ("comparison", &comp, comp_sizes, &cspec),
            ] {
                for k in graph_kinds {
                    let r = sample_efficiency_sweep(k, bundle, &sizes, seeds, spec)?;
                    table.push_str(&format!("{task}\t{}", r.to_table()));
                    runs.extend(r.runs.into_iter().flatten());
                }
            }
            Ok(BenchReport {
                bench: kind,
                table,
                runs,
            })
        }
        BenchKind::Distractors => {
            let ns: Vec<usize> = match scale {
                Scale::Desk | Scale::Smoke => vec![5],
                Scale::Paper => (3..=8).collect(),
            };
            let gen = GenConfig::identification_defaults(data_seed).with_counts(counts.ident_full_train, counts.ident_eval);
            let ident = ns
                .iter()
                .map(|&n| gen_identification(n, &gen).map(ident_bundle))
                .collect::<Result<Vec<_>>>()?;
            let comp = vec![comp_sets((3, 8), data_seed, &counts)?];
            let m = distractor_eval(&graph_kinds, &ident, &comp, 3, seeds, &spec, &cspec, data_seed)?;
            Ok(matrix_report(kind, m))
        }
        BenchKind::Presets => {
            let m = preset_study(
                &PresetKind::ALL,
                &graph_kinds,
                5,
                &ident_gen(data_seed, &counts),
                seeds,
                &spec,
            )?;
            Ok(matrix_report(kind, m))
        }
    }
}
