use std::fs;

use spatialsim::datagen::{
    gen_comparison_curriculum, gen_identification, Dataset, GenConfig, Sample, Task,
};
use spatialsim::io::{
    append_reports, dataset_families, load_bundle, read_checkpoint, read_dataset, write_checkpoint,
    write_dataset, write_datasets,
};
use spatialsim::models::{Checkpoint, LayerKind, Model, ModelConfig};
use spatialsim::trainer::{run_bundle, TrainSpec};
use spatialsim::Error;

fn ident_sets(n: usize, seed: u64, train: usize, eval: usize) -> spatialsim::datagen::IdentificationSets {
    gen_identification(n, &GenConfig::identification_defaults(seed).with_counts(train, eval)).unwrap()
}

#[test]
fn thousand_samples_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ident_sets(7, 3, 1000, 2);
    let p = dir.path().join("a.jsonl");
    write_dataset(&p, &sets.train).unwrap();
    let back = read_dataset(&p).unwrap();
    assert_eq!(back.len(), 1000);
    for (a, b) in sets.train.samples.iter().zip(&back.samples) {
        let (Sample::Ident(a), Sample::Ident(b)) = (a, b) else { panic!() };
        for (x, y) in a.config.objects.iter().zip(&b.config.objects) {
            for (u, v) in x.feature_vector().iter().zip(y.feature_vector()) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }
    assert_eq!(back, sets.train);

    let comp = gen_comparison_curriculum((3, 8), &GenConfig::comparison_defaults(1).with_counts(10, 1000)).unwrap();
    let q = dir.path().join("c.jsonl");
    write_dataset(&q, &comp.test).unwrap();
    assert_eq!(read_dataset(&q).unwrap(), comp.test);
}

#[test]
fn header_and_record_shape_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ident_sets(3, 0, 4, 4);
    let p = dir.path().join("x.jsonl");
    write_dataset(&p, &sets.train).unwrap();
    let text = fs::read_to_string(&p).unwrap().replace("\"identification\"", "\"comparison\"");
    fs::write(&p, text).unwrap();
    match read_dataset(&p) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }

    let mut mixed: Dataset = sets.train.clone();
    mixed.header.task = Task::Comparison;
    assert!(matches!(write_dataset(&p, &mixed), Err(Error::TaskMismatch { .. })));

    fs::write(&p, "").unwrap();
    assert!(matches!(read_dataset(&p), Err(Error::Parse { line: 1, .. })));
    fs::write(&p, "{\"nope\":1}\n").unwrap();
    assert!(matches!(read_dataset(&p), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn families_and_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let ids = ident_sets(5, 0, 8, 4);
    write_datasets(dir.path(), ids.splits()).unwrap();
    let b = load_bundle(dir.path(), Task::Identification, true).unwrap();
    assert_eq!(b.name, "IDS_5");
    assert_eq!(b.train[0], ids.train);
    assert!(matches!(
        load_bundle(dir.path(), Task::Comparison, true),
        Err(Error::Io { .. })
    ));

    let comp = gen_comparison_curriculum((3, 4), &GenConfig::comparison_defaults(0).with_counts(6, 4)).unwrap();
    write_datasets(dir.path(), comp.train.iter().chain([&comp.valid, &comp.test])).unwrap();
    assert_eq!(dataset_families(dir.path()).unwrap(), vec!["CDS_3_4", "IDS_5"]);
    assert!(matches!(
        load_bundle(dir.path(), Task::Identification, true),
        Err(Error::InvalidParameter(_))
    ));
    let c = load_bundle(&dir.path().join("CDS_3_4"), Task::Comparison, true).unwrap();
    assert_eq!(c.train.len(), 5);
    let last = load_bundle(&dir.path().join("CDS_3_4"), Task::Comparison, false).unwrap();
    assert_eq!(last.train, vec![comp.train[4].clone()]);
    assert!(matches!(
        load_bundle(&dir.path().join("IDS_5"), Task::Comparison, true),
        Err(Error::Io { .. })
    ));
}

#[test]
fn checkpoints_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let ids = ident_sets(4, 1, 32, 16);
    let bundle = spatialsim::analysis::ident_bundle(ids);
    let spec = TrainSpec {
        epochs: 1,
        batch_size: 8,
        ..TrainSpec::new(2)
    };
    let (m, r) = run_bundle(ModelConfig::graph(LayerKind::Rds, Task::Identification), &bundle, &spec).unwrap();
    let p = dir.path().join("sub/m.json");
    write_checkpoint(&p, &Checkpoint::from_model(&m)).unwrap();
    let back: Model = read_checkpoint(&p).unwrap().to_model().unwrap();
    assert_eq!(spatialsim::trainer::model_hash(&back), r.model_hash);

    fs::write(&p, "{").unwrap();
    assert!(matches!(read_checkpoint(&p), Err(Error::Format(_))));

    let rp = dir.path().join("runs.jsonl");
    append_reports(&rp, std::slice::from_ref(&r)).unwrap();
    append_reports(&rp, &[r.clone(), r.clone()]).unwrap();
    let text = fs::read_to_string(&rp).unwrap();
    assert_eq!(text.lines().count(), 3);
    let first: spatialsim::trainer::RunReport = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first.same_outcome(&r));
}
