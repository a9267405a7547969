use sarlab_core::dataset::{generate_dataset, DatasetSpec, GenerateOptions, Manifest};
use sarlab_core::sarb::{read_sarb, ArrayData};
use sarlab_core::Error;

const SPEC: &str = r#"{
    "base_seed": 100, "n_train": 4, "n_test": 2,
    "scene": {"n_points": [2, 3], "bounds": {"min": [0, -0.004, 0.046], "max": [0, 0.004, 0.054]}},
    "waveform": {"type": "pmcw", "fc": 435e9, "b": 5e9, "td": 1e-6, "ncode": 64, "nf": 8},
    "aperture": {"kind": "linear", "ny": 16, "z0": 0.0},
    "grid": {"axes": [{"min": -0.006, "max": 0.006, "count": 12}, {"min": 0.04, "max": 0.06, "count": 10}]},
    "shard_size": 3
}"#;

fn opts(workers: usize) -> GenerateOptions<'static> {
    GenerateOptions {
        workers: Some(workers),
        base_dir: ".".into(),
        ..Default::default()
    }
}

#[test]
fn manifest_on_disk_matches_samples() {
    let spec = DatasetSpec::from_json(SPEC).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&spec, dir.path(), &opts(2)).unwrap();
    let disk: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dataset.json")).unwrap()).unwrap();
    assert_eq!(disk, m);
    assert_eq!((m.counts.train, m.counts.test), (4, 2));
    assert!(m.failed.is_empty());
    let paths: Vec<&str> = m.samples.iter().map(|s| s.path.as_str()).collect();
    assert_eq!(paths[3], "train/shard_0001/sample_000003.sarb");
    assert_eq!(paths[4], "test/shard_0000/sample_000004.sarb");
    for s in &m.samples {
        assert_eq!(s.seed, 100 + s.index as u64);
        let arrays = read_sarb(&dir.path().join(&s.path)).unwrap();
        let names: Vec<&str> = arrays.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["lr_image", "hr_label", "scene", "config_hash"]);
        assert_eq!(arrays[0].data.shape(), &[12, 10]);
        let ArrayData::F64(scene) = &arrays[2].data else {
            panic!("scene dtype")
        };
        assert!((2..=3).contains(&scene.shape()[0]));
        for row in scene.rows() {
            assert!(row[1].abs() <= 0.004 && (0.046..=0.054).contains(&row[2]));
        }
    }
    let other = tempfile::tempdir().unwrap();
    let again = generate_dataset(&spec, other.path(), &opts(1)).unwrap();
    assert_eq!(again.samples, m.samples);
}

#[test]
fn simulated_high_resolution_pairs_share_the_grid() {
    let text = SPEC.replace(
        "\"shard_size\": 3",
        "\"shard_size\": 3, \"hr_mode\": \"simulate\", \
         \"hr\": {\"aperture\": {\"kind\": \"linear\", \"ny\": 48, \"z0\": 0.0}}",
    );
    let spec = DatasetSpec::from_json(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&spec, dir.path(), &opts(1)).unwrap();
    assert_eq!(m.samples.len(), 6);
    let arrays = read_sarb(&dir.path().join(&m.samples[0].path)).unwrap();
    let (ArrayData::C128(lr), ArrayData::C128(hr)) = (&arrays[0].data, &arrays[1].data) else {
        panic!("image dtype")
    };
    assert_eq!(lr.shape(), hr.shape());
    assert!(hr.iter().any(|v| v.norm() > 0.0));
    assert_ne!(lr, hr);
}

#[test]
fn failing_samples_are_listed_not_fatal() {
    // every scatterer lands on the center element
    let text = SPEC
        .replace("\"ny\": 16", "\"ny\": 15")
        .replace("[0, -0.004, 0.046]", "[0, 0, 0]")
        .replace("[0, 0.004, 0.054]", "[0, 0, 0]");
    let spec = DatasetSpec::from_json(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = generate_dataset(&spec, dir.path(), &opts(2)).unwrap();
    assert!(m.samples.is_empty());
    assert_eq!(m.failed.iter().map(|f| f.index).collect::<Vec<_>>(), [0, 1, 2, 3, 4, 5]);
    assert!(m.failed[0].error.contains("standoff"), "{}", m.failed[0].error);
}

#[test]
fn spec_errors_name_the_field() {
    let text = SPEC.replace("\"shard_size\": 3", "\"shard_size\": 3, \"bogus\": 1");
    assert!(matches!(DatasetSpec::from_json(&text), Err(Error::Invalid { .. })));
    let text = SPEC.replace("[2, 3]", "\"few\"");
    match DatasetSpec::from_json(&text) {
        Err(Error::Invalid { field, .. }) => assert_eq!(field, "scene.n_points"),
        other => panic!("{other:?}"),
    }
    let text = SPEC.replace("\"ny\": 16", "\"ny\": \"many\"");
    match DatasetSpec::from_json(&text) {
        Err(Error::Invalid { field, msg }) => {
            assert!(field.starts_with("aperture") && msg.contains("ny"), "{field}: {msg}")
        }
        other => panic!("{other:?}"),
    }
}
