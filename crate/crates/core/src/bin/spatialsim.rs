use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spatialsim::analysis::{self, BenchKind, Scale};
use spatialsim::datagen::{
    gen_comparison_curriculum, gen_identification, gen_preset_identification, with_distractors,
    GenConfig, PresetKind, Task, TransformMode,
};
use spatialsim::io;
use spatialsim::models::{Checkpoint, LayerKind, ModelConfig};
use spatialsim::trainer::{evaluate, run_bundle, TrainSpec};
use spatialsim::{Error, Result};

#[derive(Parser)]
#[command(name = "spatialsim", version, about = "Spatial similarity benchmark: data, models, training and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate IDS_N, IDS_N_valid and IDS_N_test.
    GenIdent {
        #[arg(long)]
        n_obj: usize,
        #[arg(long, default_value_t = 10_000)]
        train: usize,
        #[arg(long, default_value_t = 5_000)]
        eval: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// positions | covariant
        #[arg(long, default_value = "positions")]
        transform: TransformMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the five curriculum stages CDS_A_B_0..4 plus valid and test.
    GenComp {
        #[arg(long)]
        n_min: usize,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 100_000)]
        train: usize,
        #[arg(long, default_value_t = 10_000)]
        eval: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "positions")]
        transform: TransformMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Copy every dataset in a directory with up to ND_MAX distractors per configuration.
    GenDistractors {
        #[arg(long)]
        base: PathBuf,
        #[arg(long, default_value_t = 3)]
        nd_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the base directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identification datasets around a preset reference configuration.
    GenPreset {
        /// same-point | line | scattered-red-circles | colored-circles | random-diverse
        #[arg(long)]
        kind: PresetKind,
        #[arg(long)]
        n_obj: usize,
        #[arg(long, default_value_t = 10_000)]
        train: usize,
        #[arg(long, default_value_t = 5_000)]
        eval: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint.
    Train {
        /// ident | comp
        #[arg(long)]
        task: Task,
        /// mpgnn | rds | deepset | mlp
        #[arg(long)]
        model: LayerKind,
        /// Directory with one dataset family, or a prefix like out/IDS_5.
        #[arg(long)]
        data: PathBuf,
        /// Epochs for single-set training; curriculum stages use --stage-epochs.
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 5)]
        stage_epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 128)]
        batch: usize,
        /// Fixed optimizer steps per epoch, cycling the data; default is one pass.
        #[arg(long)]
        steps_per_epoch: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Train Comparison models on the full-rotation stage only.
        #[arg(long)]
        no_curriculum: bool,
        /// Append the run report as a JSON line to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the accuracy of a checkpoint on a dataset file.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Write PREFIX.txt (numeric grid) and PREFIX.ppm for one sample and object.
    Heatmap {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[arg(long, default_value_t = 0)]
        object: usize,
        #[arg(long, default_value_t = 100)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment matrix and print its table.
    Bench {
        /// table1 | table2 | gen-matrix | sweep | distractors | presets
        which: BenchKind,
        /// Model seeds 0..K.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        /// desk | paper | smoke
        #[arg(long, default_value = "desk")]
        scale: Scale,
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        /// Append every run report as JSON lines to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn gen_config(defaults: GenConfig, train: usize, eval: usize, eps: f64) -> GenConfig {
    GenConfig {
        eps,
        ..defaults.with_counts(train, eval)
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn gen_distractors(base: &Path, nd_max: usize, seed: u64, out: &Path) -> Result<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(base)
        .map_err(|e| Error::io(base, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == io::DATASET_EXT))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no dataset files in {}",
            base.display()
        )));
    }
    for (k, f) in files.iter().enumerate() {
        let d = io::read_dataset(f)?;
        if d.header.distractors_max > 0 {
            continue;
        }
        let nd = with_distractors(&d, nd_max, seed.wrapping_add(k as u64));
        print_written(&io::write_datasets(out, [&nd])?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenIdent {
            n_obj,
            train,
            eval,
            eps,
            seed,
            transform,
            out,
        } => {
            let gen = GenConfig {
                transform,
                ..gen_config(GenConfig::identification_defaults(seed), train, eval, eps)
            };
            let sets = gen_identification(n_obj, &gen)?;
            print_written(&io::write_datasets(&out, sets.splits())?);
        }
        Command::GenComp {
            n_min,
            n_max,
            train,
            eval,
            eps,
            seed,
            transform,
            out,
        } => {
            let gen = GenConfig {
                transform,
                ..gen_config(GenConfig::comparison_defaults(seed), train, eval, eps)
            };
            let sets = gen_comparison_curriculum((n_min, n_max), &gen)?;
            let all = sets.train.iter().chain([&sets.valid, &sets.test]);
            print_written(&io::write_datasets(&out, all)?);
        }
        Command::GenDistractors {
            base,
            nd_max,
            seed,
            out,
        } => {
            let out = out.unwrap_or_else(|| base.clone());
            gen_distractors(&base, nd_max, seed, &out)?;
        }
        Command::GenPreset {
            kind,
            n_obj,
            train,
            eval,
            seed,
            out,
        } => {
            let gen = GenConfig::identification_defaults(seed).with_counts(train, eval);
            let sets = gen_preset_identification(kind, n_obj, &gen)?;
            print_written(&io::write_datasets(&out, sets.splits())?);
        }
        Command::Train {
            task,
            model,
            data,
            epochs,
            stage_epochs,
            lr,
            batch,
            steps_per_epoch,
            seed,
            out,
            no_curriculum,
            report,
        } => {
            let bundle = io::load_bundle(&data, task, !no_curriculum)?;
            let config = ModelConfig::for_dataset(model, &bundle.train[0]);
            let spec = TrainSpec {
                epochs,
                stage_epochs,
                lr,
                batch_size: batch,
                steps_per_epoch,
                ..TrainSpec::new(seed)
            };
            let (trained, r) = run_bundle(config, &bundle, &spec)?;
            io::write_checkpoint(&out, &Checkpoint::from_model(&trained))?;
            print!("{}", io::report_summary(&r));
            println!("parameters {}", trained.count_params());
            println!("wrote {}", out.display());
            if let Some(path) = report {
                io::append_reports(&path, &[r])?;
            }
        }
        Command::Eval { ckpt, data } => {
            let model = io::read_checkpoint(&ckpt)?.to_model()?;
            let dataset = io::read_dataset(&data)?;
            println!("{:.6}", evaluate(&model, &dataset)?);
        }
        Command::Heatmap {
            ckpt,
            data,
            sample,
            object,
            res,
            out,
        } => {
            let model = io::read_checkpoint(&ckpt)?.to_model()?;
            let dataset = io::read_dataset(&data)?;
            let s = dataset.samples.get(sample).ok_or(Error::IndexOutOfRange {
                index: sample,
                len: dataset.len(),
            })?;
            let h = analysis::heatmap(&model, s, object, res)?;
            let txt = out.with_extension("txt");
            let ppm = out.with_extension("ppm");
            io::write_grid(&txt, &h.grid)?;
            io::write_ppm(&ppm, &h.grid)?;
            let e = h.extent;
            println!(
                "extent x [{}, {}] y [{}, {}]; star ({:.4}, {:.4}) in cell {:?}, H = {:.6}",
                e.x_min, e.x_max, e.y_min, e.y_max, h.star[0], h.star[1], h.star_cell, h.star_value()
            );
            print_written(&[txt, ppm]);
        }
        Command::Bench {
            which,
            seeds,
            scale,
            data_seed,
            report,
        } => {
            if seeds == 0 {
                return Err(Error::InvalidParameter("--seeds must be >= 1".into()));
            }
            let seeds: Vec<u64> = (0..seeds).collect();
            let r = analysis::bench(which, scale, &seeds, data_seed)?;
            print!("{}", r.table);
            if let Some(path) = report {
                io::append_reports(&path, &r.runs)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
