//! File formats: line-delimited datasets, JSON checkpoints, run reports,
//! heatmap grids and rasters.
//!
//! A dataset file is UTF-8 text. Line 1 is `{"header":{...}}`; every other
//! line is one sample:
//!
//! ```text
//! {"label":1,"objects":[[x,y,size,orientation,r,g,b,square,circle,triangle],...]}
//! {"label":0,"objects1":[[...],...],"objects2":[[...],...]}
//! ```
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! reading a written file reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::datagen::{CompSample, Dataset, DatasetHeader, IdentSample, Sample, Task};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, FEATURE_DIM};
use crate::models::Checkpoint;
use crate::trainer::{DataBundle, RunReport};

pub const DATASET_EXT: &str = "jsonl";

fn push_float(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("write to string");
}

fn push_objects(out: &mut String, c: &Configuration) {
    out.push('[');
    for (k, o) in c.objects.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push('[');
        for (i, v) in o.feature_vector().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_float(out, *v);
        }
        out.push(']');
    }
    out.push(']');
}

/// One sample as a single line (without the trailing newline).
pub fn encode_sample(sample: &Sample) -> String {
    let mut s = String::with_capacity(256);
    match sample {
        Sample::Ident(x) => {
            write!(s, "{{\"label\":{},\"objects\":", x.label).expect("write to string");
            push_objects(&mut s, &x.config);
        }
        Sample::Comp(x) => {
            write!(s, "{{\"label\":{},\"objects1\":", x.label).expect("write to string");
            push_objects(&mut s, &x.config1);
            s.push_str(",\"objects2\":");
            push_objects(&mut s, &x.config2);
        }
    }
    s.push('}');
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordIn {
    label: u8,
    objects: Option<Vec<Vec<f64>>>,
    objects1: Option<Vec<Vec<f64>>>,
    objects2: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct HeaderLine {
    header: DatasetHeader,
}

fn config_from_rows(rows: Vec<Vec<f64>>) -> std::result::Result<Configuration, String> {
    if rows.is_empty() {
        return Err("configuration has no objects".into());
    }
    let mut flat = Vec::with_capacity(rows.len() * FEATURE_DIM);
    for r in rows {
        if r.len() != FEATURE_DIM {
            return Err(format!("object has {} features, expected {FEATURE_DIM}", r.len()));
        }
        flat.extend(r);
    }
    Configuration::from_features(&flat).map_err(|e| e.to_string())
}

/// Parse one sample line for a dataset of kind `task`.
pub fn decode_sample(line: &str, task: Task) -> std::result::Result<Sample, String> {
    let rec: RecordIn = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if rec.label > 1 {
        return Err(format!("label must be 0 or 1, got {}", rec.label));
    }
    match (task, rec.objects, rec.objects1, rec.objects2) {
        (Task::Identification, Some(o), None, None) => Ok(Sample::Ident(IdentSample {
            label: rec.label,
            config: config_from_rows(o)?,
        })),
        (Task::Comparison, None, Some(a), Some(b)) => Ok(Sample::Comp(CompSample {
            label: rec.label,
            config1: config_from_rows(a)?,
            config2: config_from_rows(b)?,
        })),
        (task, ..) => Err(format!("record does not match header task {task}")),
    }
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    for s in &dataset.samples {
        if s.task() != dataset.header.task {
            return Err(Error::TaskMismatch {
                expected: dataset.header.task.to_string(),
                found: s.task().to_string(),
            });
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = serde_json::json!({ "header": dataset.header });
    let write = |w: &mut BufWriter<File>, line: &str| -> Result<()> {
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    };
    write(&mut w, &serde_json::to_string(&header)?)?;
    for s in &dataset.samples {
        write(&mut w, &encode_sample(s))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: HeaderLine =
        serde_json::from_str(&first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    let header = header.header;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s = decode_sample(&line, header.task).map_err(|m| parse_err(i + 2, m))?;
        samples.push(s);
    }
    Ok(Dataset { header, samples })
}

pub fn dataset_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.{DATASET_EXT}"))
}

/// Write each dataset to `dir/<name>.jsonl`, creating `dir` if needed.
pub fn write_datasets<'a>(
    dir: &Path,
    datasets: impl IntoIterator<Item = &'a Dataset>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    datasets
        .into_iter()
        .map(|d| {
            let p = dataset_path(dir, &d.header.name);
            write_dataset(&p, d)?;
            Ok(p)
        })
        .collect()
}

/// Dataset family prefixes (`IDS_5`, `CDS_3_8`, ...) found in `dir`, keyed
/// by their validation file.
pub fn dataset_families(dir: &Path) -> Result<Vec<String>> {
    let suffix = format!("_valid.{DATASET_EXT}");
    let mut out: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .filter_map(|n| n.strip_suffix(&suffix).map(str::to_string))
        .collect();
    out.sort();
    Ok(out)
}

/// Load train/valid/test files of one family. `data` is either a directory
/// holding exactly one family or a path prefix such as `out/IDS_5`.
///
/// Comparison families load the five curriculum stages, or only the last
/// (full-rotation) stage when `curriculum` is false.
pub fn load_bundle(data: &Path, task: Task, curriculum: bool) -> Result<DataBundle> {
    let (dir, base) = if data.is_dir() {
        let fams = dataset_families(data)?;
        match fams.as_slice() {
            [one] => (data.to_path_buf(), one.clone()),
            [] => {
                return Err(Error::InvalidParameter(format!(
                    "no dataset found in {}",
                    data.display()
                )))
            }
            many => {
                return Err(Error::InvalidParameter(format!(
                    "{} holds several datasets ({}); pass a prefix like {}",
                    data.display(),
                    many.join(", "),
                    data.join(&many[0]).display()
                )))
            }
        }
    } else {
        let dir = data.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = data
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::InvalidParameter(format!("bad data path {}", data.display())))?
            .to_string();
        (dir, base)
    };
    let train = match task {
        Task::Identification => vec![read_dataset(&dataset_path(&dir, &base))?],
        Task::Comparison if curriculum => (0..5)
            .map(|k| read_dataset(&dataset_path(&dir, &format!("{base}_{k}"))))
            .collect::<Result<Vec<_>>>()?,
        Task::Comparison => vec![read_dataset(&dataset_path(&dir, &format!("{base}_4")))?],
    };
    let valid = read_dataset(&dataset_path(&dir, &format!("{base}_valid")))?;
    let test = read_dataset(&dataset_path(&dir, &format!("{base}_test")))?;
    for d in train.iter().chain([&valid, &test]) {
        if d.task() != task {
            return Err(Error::TaskMismatch {
                expected: task.to_string(),
                found: format!("{} ({})", d.task(), d.header.name),
            });
        }
    }
    Ok(DataBundle {
        name: base,
        train,
        valid,
        test,
    })
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string(ckpt)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Append one JSON line per report.
pub fn append_reports(path: &Path, reports: &[RunReport]) -> Result<()> {
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    for r in reports {
        let line = serde_json::to_string(r)?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Human-readable per-epoch summary of a run.
pub fn report_summary(r: &RunReport) -> String {
    let mut s = format!(
        "model {} seed {} data {}\n",
        r.model,
        r.seed,
        r.train_data.join(",")
    );
    s.push_str("epoch\tstage\tloss\ttrain_acc\tvalid_acc\n");
    for e in &r.epochs {
        let stage = e.stage.map_or("-".to_string(), |k| k.to_string());
        s.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\n",
            e.epoch, stage, e.train_loss, e.train_accuracy, e.valid_accuracy
        ));
    }
    if let Some(ep) = r.selected_epoch {
        s.push_str(&format!("selected epoch {ep}\n"));
    }
    if let Some(t) = r.test_accuracy {
        s.push_str(&format!("test accuracy {t:.4}\n"));
    }
    s.push_str(&format!(
        "steps {} time {:.1}s hash {}\n",
        r.total_steps, r.wall_time_secs, r.model_hash
    ));
    s
}

/// `rows` lines of whitespace-separated values.
pub fn write_grid(path: &Path, grid: &[Vec<f64>]) -> Result<()> {
    let mut s = String::new();
    for row in grid {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_grid(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|e| Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        msg: e.to_string(),
                    })
                })
                .collect()
        })
        .collect()
}

/// Diverging ramp: blue for negative, white at zero, red for positive,
/// saturating at `±scale`.
pub fn diverging_color(v: f64, scale: f64) -> [u8; 3] {
    let t = if scale > 0.0 {
        (v / scale).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let fade = |t: f64| (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        [255, fade(t), fade(t)]
    } else {
        [fade(t), fade(t), 255]
    }
}

/// Binary PPM (P6). Row 0 of `grid` is drawn at the top.
pub fn write_ppm(path: &Path, grid: &[Vec<f64>]) -> Result<()> {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    let scale = grid
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let mut bytes = format!("P6\n{cols} {rows}\n255\n").into_bytes();
    for row in grid {
        for &v in row {
            bytes.extend_from_slice(&diverging_color(v, scale));
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
