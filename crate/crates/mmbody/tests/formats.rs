use std::collections::BTreeMap;
use std::fs;

use mmbody::formats::checkpoint::{load_checkpoint, save_checkpoint};
use mmbody::formats::lvol::{read_intensity_volume, read_label_volume, write_intensity_volume, write_label_volume};
use mmbody::formats::obj::{read_obj, write_obj};
use mmbody::formats::ply::{read_ply, write_ply};
use mmbody::formats::report::{read_report, read_scatter, write_report, write_scatter};
use mmbody::formats::tables::{read_targets, write_targets, Split};
use mmbody::Error;
use mmbody_core::loss::Normalizer;
use mmbody_core::meshkit::{OrientedPointCloud, TriMesh};
use mmbody_core::metrics::evaluate_predictions;
use mmbody_core::nn::{Model, ModelConfig};
use mmbody_core::scan::{IntensityVolume, Panel};
use mmbody_core::targets::{MaskedTargetVector, TARGET_COUNT};
use mmbody_core::train::Checkpoint;
use mmbody_core::volgrid::{GridGeometry, LabelVolume};

fn label_volume() -> LabelVolume {
    let g = GridGeometry::new([5, 4, 3], [2.0, 2.0, 2.5], [-4.0, 1.5, 0.0], 2).unwrap();
    let vox = (0..g.len()).map(|i| (i % 4) as u8).collect();
    let legend: BTreeMap<u8, String> = [(1, "SAT"), (2, "VAT"), (3, "muscle")].into_iter().map(|(k, v)| (k, v.to_string())).collect();
    LabelVolume::new(g, vox, legend).unwrap()
}

fn tetra() -> TriMesh {
    TriMesh::new(
        vec![[0.0, 0.0, 0.0], [10.1, 0.0, 0.0], [0.0, 10.0, 0.3], [1.0 / 3.0, 0.25, 10.0]],
        vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
    )
    .unwrap()
}

fn cloud() -> OrientedPointCloud {
    let pts = (0..50).map(|i| [i as f64 * 0.7, -(i as f64) / 3.0, 1000.0 + i as f64]).collect();
    let normals = (0..50)
        .map(|i| {
            let t = i as f64 * 0.1;
            let (s, c) = (t.sin(), t.cos());
            let n = [c * 0.6, s * 0.6, 0.8];
            let l = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            n.map(|v| v / l)
        })
        .collect();
    OrientedPointCloud::new(pts, normals).unwrap()
}

#[test]
fn label_volume_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("a.lvol.json");
    let v = label_volume();
    write_label_volume(&p, &v).unwrap();
    let back = read_label_volume(&p).unwrap();
    assert_eq!(back, v);
    let header = fs::read(&p).unwrap();
    let raw = fs::read(d.path().join("a.lvol.raw")).unwrap();
    let p2 = d.path().join("b.lvol.json");
    write_label_volume(&p2, &back).unwrap();
    assert_eq!(fs::read(&p2).unwrap(), header);
    assert_eq!(fs::read(d.path().join("b.lvol.raw")).unwrap(), raw);
    assert_eq!(raw.len(), 60);
    // x fastest
    assert_eq!(raw[1], 1);
    assert_eq!(raw[5], 1);
}

#[test]
fn label_volume_rejects_bad_input() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("a.lvol.json");
    write_label_volume(&p, &label_volume()).unwrap();
    fs::write(d.path().join("a.lvol.raw"), [0u8; 7]).unwrap();
    assert!(matches!(read_label_volume(&p), Err(Error::Format { .. })));
    write_label_volume(&p, &label_volume()).unwrap();
    let header = r#"{"dims":[5,4,3],"spacing_mm":[2.0,2.0,2.5],"origin_mm":[0.0,0.0,0.0],"height_axis":2,"labels":{"0":"background","1":"SAT","2":"VAT"}}"#;
    fs::write(&p, header).unwrap();
    assert!(matches!(read_label_volume(&p), Err(Error::Format { .. })));
    fs::write(&p, header.replace("\"height_axis\":2", "\"height_axis\":2,\"colour\":1")).unwrap();
    assert!(read_label_volume(&p).is_err());
    assert!(read_label_volume(&d.path().join("missing.lvol.json")).is_err());
    assert!(write_label_volume(&d.path().join("bad.json"), &label_volume()).is_err());
}

#[test]
fn intensity_volume_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("front.lvol.json");
    let g = GridGeometry::new([3, 4, 2], [1.9, 5.5, 1.9], [0.0; 3], 2).unwrap();
    let v = IntensityVolume::new(g, 1, (0..24).map(|i| i as f32 * 0.25).collect(), Panel::Front).unwrap();
    write_intensity_volume(&p, &v).unwrap();
    assert_eq!(read_intensity_volume(&p).unwrap(), v);
    assert!(fs::read_to_string(&p).unwrap().contains("\"panel\": \"front\""));
    assert!(read_label_volume(&p).is_err());
}

#[test]
fn obj_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a.obj"), d.path().join("b.obj"));
    write_obj(&a, &tetra()).unwrap();
    let m = read_obj(&a).unwrap();
    assert_eq!(m.vertices(), tetra().vertices());
    assert_eq!(m.triangles(), tetra().triangles());
    write_obj(&b, &m).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn obj_accepts_slashed_indices_and_rejects_quads() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("m.obj");
    fs::write(&p, "# c\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n").unwrap();
    assert_eq!(read_obj(&p).unwrap().triangles(), &[[0, 1, 2]]);
    fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 4 3\n").unwrap();
    assert!(read_obj(&p).is_err());
    fs::write(&p, "v 0 0 0\nf 1 2 3\n").unwrap();
    assert!(read_obj(&p).is_err());
}

#[test]
fn ply_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a.ply"), d.path().join("b.ply"));
    write_ply(&a, &cloud()).unwrap();
    let bytes = fs::read(&a).unwrap();
    let header = "ply\nformat binary_little_endian 1.0\nelement vertex 50\nproperty float x\nproperty float y\nproperty float z\nproperty float nx\nproperty float ny\nproperty float nz\nend_header\n";
    assert!(bytes.starts_with(header.as_bytes()));
    assert_eq!(bytes.len(), header.len() + 50 * 24);
    let pc = read_ply(&a).unwrap();
    assert_eq!(pc.len(), 50);
    assert!((pc.points[3][0] - 2.1).abs() < 1e-6);
    write_ply(&b, &pc).unwrap();
    assert_eq!(fs::read(&b).unwrap(), bytes);
}

#[test]
fn ply_rejects_malformed() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("a.ply");
    write_ply(&p, &cloud()).unwrap();
    let mut bytes = fs::read(&p).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&p, &bytes).unwrap();
    assert!(read_ply(&p).is_err());
    fs::write(&p, b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n").unwrap();
    assert!(read_ply(&p).is_err());
    fs::write(&p, b"nope").unwrap();
    assert!(read_ply(&p).is_err());
}

fn checkpoint() -> Checkpoint {
    let cfg = ModelConfig { encoder_widths: vec![8, 16], head_hidden: vec![12, 6], ..ModelConfig::desk() };
    let m = Model::new(&cfg, 4).unwrap();
    let mut n = Normalizer::identity();
    n.mean[0] = 171.25;
    n.std[0] = 9.5;
    Checkpoint { model: cfg, params: m.params, normalizer: n, seed: 4, points_per_sample: 256, epoch: 3 }
}

#[test]
fn checkpoint_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    save_checkpoint(&a, &checkpoint()).unwrap();
    let c = load_checkpoint(&a).unwrap();
    assert_eq!(c, checkpoint());
    save_checkpoint(&b, &c).unwrap();
    for f in ["checkpoint.json", "params.f64"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let manifest = fs::read_to_string(a.join("checkpoint.json")).unwrap();
    assert!(manifest.contains("\"scale_mm\": 1000.0"));
    assert!(manifest.contains("encoder.0.weight"));
}

#[test]
fn checkpoint_errors() {
    let d = tempfile::tempdir().unwrap();
    assert!(matches!(load_checkpoint(&d.path().join("none")), Err(Error::CheckpointNotFound(_))));
    save_checkpoint(d.path(), &checkpoint()).unwrap();
    let blob = d.path().join("params.f64");
    let mut bytes = fs::read(&blob).unwrap();
    bytes.pop();
    fs::write(&blob, bytes).unwrap();
    assert!(matches!(load_checkpoint(d.path()), Err(Error::Format { .. })));
}

fn targets() -> Vec<MaskedTargetVector> {
    (0..6)
        .map(|i| {
            let mut mask = [true; TARGET_COUNT];
            mask[5] = i % 2 == 0;
            MaskedTargetVector {
                id: format!("s{i}"),
                values: std::array::from_fn(|j| 10.0 * j as f64 + i as f64 * 1.5 + 0.1),
                mask,
            }
        })
        .collect()
}

#[test]
fn report_and_scatter_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let t = targets();
    let preds: Vec<[f64; TARGET_COUNT]> = t.iter().map(|x| x.values.map(|v| v * 1.01 + 0.3)).collect();
    let ev = evaluate_predictions("toy", &preds, &t).unwrap();
    let (a, b) = (d.path().join("a.json"), d.path().join("b.json"));
    write_report(&a, &ev.report).unwrap();
    let r = read_report(&a).unwrap();
    assert_eq!(r, ev.report);
    write_report(&b, &r).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let paths = write_scatter(d.path(), &ev.scatter).unwrap();
    assert_eq!(paths.len(), 11);
    let imvat = read_scatter(&d.path().join("scatter_IMVAT.csv")).unwrap();
    assert_eq!(imvat.len(), 3);
    assert_eq!(imvat, ev.scatter.iter().find(|s| s.name == "IMVAT").unwrap().pairs);
}

#[test]
fn report_schema_violations_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("r.json");
    fs::write(&p, r#"{"dataset":"x","per_target":[{"name":"height","unit":"cm","n":2,"mae":1.0,"std":0.5,"pearson":1.5}],"bfp":null,"notes":[]}"#).unwrap();
    assert!(read_report(&p).is_err());
    fs::write(&p, r#"{"dataset":"x","per_target":[],"bfp":null,"notes":[],"extra":1}"#).unwrap();
    assert!(read_report(&p).is_err());
    fs::write(&p, r#"{"dataset":"x","per_target":[],"bfp":null,"notes":[]}"#).unwrap();
    assert!(read_report(&p).is_ok());
}

#[test]
fn targets_csv_round_trip_with_missing_labels() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a.csv"), d.path().join("b.csv"));
    write_targets(&a, &targets()).unwrap();
    let back = read_targets(&a).unwrap();
    assert_eq!(back, targets().iter().map(|t| {
        let mut t = t.clone();
        for j in 0..TARGET_COUNT {
            if !t.mask[j] {
                t.values[j] = 0.0;
            }
        }
        t
    }).collect::<Vec<_>>());
    write_targets(&b, &back).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("id,height,chest,waist,hip,SAT,IMVAT,VAT,body,LT,MV\n"));
    assert!(text.lines().nth(2).unwrap().contains(",,"));
}

#[test]
fn split_is_eight_one_one_and_seeded() {
    let ids: Vec<String> = (0..200).map(|i| format!("b{i}")).collect();
    let s = Split::make(&ids, 3);
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (160, 20, 20));
    assert_eq!(s, Split::make(&ids, 3));
    assert_ne!(s, Split::make(&ids, 4));
    let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
    all.sort();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(all, sorted);
    let small = Split::make(&ids[..5], 0);
    assert_eq!((small.train.len(), small.val.len(), small.test.len()), (3, 1, 1));
}
