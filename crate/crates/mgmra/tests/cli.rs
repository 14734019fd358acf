use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mgmra::exit;

const SMALL: &str = "\
# a run small enough for tests
num_train_ids = 6
num_test_ids = 4
samples_per_id = 3
input_dim = 4
num_stripes = 2
hidden_dim = 8
feature_dim = 4
epochs = 2
batches_per_epoch = 2
p = 3
k = 2
proto_p = 2
proto_i = 2
eval_seeds = 3
";

fn mgmra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mgmra"))
        .args(args)
        .env("MGMRA_LOG_LEVEL", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_train_eval_pipeline_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (d1, d2) = (tmp.path().join("d1"), tmp.path().join("d2"));
    for d in [&d1, &d2] {
        let out = mgmra(&["synth", "--config", &cfg, "--seed", "7", "--out", p(d)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["train.mgmr", "query.mgmr", "gallery.mgmr"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let without_out = |d: &Path| -> String {
        let text = fs::read_to_string(d.join("resolved.cfg")).unwrap();
        text.lines().filter(|l| !l.starts_with("out = ")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(without_out(&d1), without_out(&d2));

    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    for r in [&r1, &r2] {
        let out = mgmra(&["train", "--config", &cfg, "--dataset", p(&d1), "--out", p(r), "--seed", "3"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["checkpoint.mgck", "loss.csv"] {
        assert_eq!(fs::read(r1.join(f)).unwrap(), fs::read(r2.join(f)).unwrap(), "{f}");
    }
    let loss = fs::read_to_string(r1.join("loss.csv")).unwrap();
    assert!(loss.starts_with("epoch,id,hc_tri,mem_sparsity,ins,sem,total\n1,"));
    assert_eq!(loss.lines().count(), 3);

    // the resolved configuration alone reproduces the run
    let r3 = tmp.path().join("r3");
    let resolved = r1.join("resolved.cfg");
    let out = mgmra(&["train", "--config", p(&resolved), "--out", p(&r3)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(r1.join("checkpoint.mgck")).unwrap(), fs::read(r3.join("checkpoint.mgck")).unwrap());

    let ck = r1.join("checkpoint.mgck");
    let (e1, e2) = (tmp.path().join("e1"), tmp.path().join("e2"));
    for e in [&e1, &e2] {
        let out = mgmra(&["eval", "--config", &cfg, "--checkpoint", p(&ck), "--dataset", p(&d1), "--out", p(e), "--dump-rankings"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("rank1="));
    }
    for f in ["metrics.csv", "rankings.csv"] {
        assert_eq!(fs::read(e1.join(f)).unwrap(), fs::read(e2.join(f)).unwrap(), "{f}");
    }
    let metrics = fs::read_to_string(e1.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "rank,cmc");
    assert_eq!(lines.len(), 1 + 4 + 1);
    assert!(lines[5].starts_with("mAP,"));

    let out = mgmra(&["eval", "--config", &cfg, "--checkpoint", p(&ck), "--dataset", p(&d1), "--mode", "proto"]);
    assert_eq!(code(&out), 0);

    let m = tmp.path().join("m");
    let out = mgmra(&["export-memory", "--checkpoint", p(&ck), "--out", p(&m)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mem = fs::read_to_string(m.join("memory.csv")).unwrap();
    // 2·N_c·𝒮·ℐ·𝒫 + 2·N_c·𝒮·ℐ + N_c·𝒮 rows with N_c = 6, plus header and two gates
    assert_eq!(mem.lines().count(), 1 + 48 + 24 + 6 + 2);
    assert!(mem.starts_with("level,row,c0,c1,c2,c3\n"));
}

#[test]
fn baseline_checkpoint_has_no_memory_to_export() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let d = tmp.path().join("d");
    assert_eq!(code(&mgmra(&["synth", "--config", &cfg, "--out", p(&d)])), 0);
    let r = tmp.path().join("r");
    let out = mgmra(&["train", "--config", &cfg, "--dataset", p(&d.join("train.mgmr")), "--out", p(&r), "--mgmra", "off"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let loss = fs::read_to_string(r.join("loss.csv")).unwrap();
    assert!(loss.lines().skip(1).all(|l| l.split(',').nth(3) == Some("0")));
    let out = mgmra(&["export-memory", "--checkpoint", p(&r.join("checkpoint.mgck")), "--out", p(&tmp.path().join("m"))]);
    assert_eq!(code(&out), exit::CONTRACT);
}

#[test]
fn gradcheck_passes_on_fresh_init() {
    let out = mgmra(&["gradcheck", "--instances", "2", "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("name,instances,max_rel_error\n"));
    assert!(table.lines().any(|l| l.starts_with("mg_mra_forward,2,")));
}

#[test]
fn ablate_prints_the_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = mgmra(&["ablate", "--config", &cfg, "--seeds", "2", "--out", p(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "seed,rank1_base,rank1_mgmra,map_base,map_mgmra");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("1,"));
    assert_eq!(fs::read_to_string(tmp.path().join("ablation.csv")).unwrap(), table);
}

#[test]
fn exit_codes_are_distinct() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&mgmra(&["frobnicate"])), exit::USAGE);
    assert_eq!(code(&mgmra(&[])), exit::USAGE);
    assert_eq!(code(&mgmra(&["--help"])), exit::OK);

    let missing = tmp.path().join("missing.mgmr");
    let out = mgmra(&["train", "--dataset", p(&missing), "--out", p(tmp.path())]);
    assert_eq!(code(&out), exit::IO);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.mgmr"));

    let bad_cfg = tmp.path().join("bad.cfg");
    fs::write(&bad_cfg, "seed = 1\nlearning_rate = 3\n").unwrap();
    let out = mgmra(&["synth", "--config", p(&bad_cfg), "--out", p(tmp.path())]);
    assert_eq!(code(&out), exit::CONFIG);
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    assert_eq!(code(&mgmra(&["synth"])), exit::CONFIG);
    let out = mgmra(&["train", "--set", "lr=0", "--dataset", p(&missing), "--out", p(tmp.path())]);
    assert_eq!(code(&out), exit::IO);

    let d = tmp.path().join("d");
    assert_eq!(code(&mgmra(&["synth", "--config", &small_config(tmp.path()), "--out", p(&d)])), 0);
    let bytes = fs::read(d.join("train.mgmr")).unwrap();
    let variants: [(&str, Vec<u8>, i32); 3] = [
        ("magic", [b"XXXX".as_slice(), &bytes[4..]].concat(), exit::BAD_MAGIC),
        ("version", [&bytes[..4], &7u32.to_le_bytes(), &bytes[8..]].concat(), exit::VERSION),
        ("truncated", bytes[..bytes.len() - 1].to_vec(), exit::TRUNCATED),
    ];
    for (name, content, expected) in variants {
        let path = tmp.path().join(format!("{name}.mgmr"));
        fs::write(&path, content).unwrap();
        let out = mgmra(&["train", "--dataset", p(&path), "--out", p(tmp.path())]);
        assert_eq!(code(&out), expected, "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn training_rejects_invalid_hyperparameters() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let d = tmp.path().join("d");
    assert_eq!(code(&mgmra(&["synth", "--config", &cfg, "--out", p(&d)])), 0);
    let out = mgmra(&["train", "--config", &cfg, "--dataset", p(&d), "--out", p(tmp.path()), "--lr", "0"]);
    assert_eq!(code(&out), exit::CONFIG);
}

#[test]
fn divergence_exits_with_health_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let d = tmp.path().join("d");
    assert_eq!(code(&mgmra(&["synth", "--config", &cfg, "--out", p(&d)])), 0);
    let out = mgmra(&["train", "--config", &cfg, "--dataset", p(&d), "--out", p(tmp.path()), "--lr", "1e200", "--set", "momentum=0"]);
    assert_eq!(code(&out), exit::HEALTH, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}

#[test]
fn csv_dataset_import_trains() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("d.csv");
    let mut text = String::from("id,modality,s0_d0,s0_d1,s1_d0,s1_d1\n");
    for id in 0..3 {
        for m in 0..2 {
            for s in 0..2 {
                let v = |k: i32| (id * 7 + m * 3 + s * 5 + k) % 11;
                text.push_str(&format!("{id},{m},{},{},{},{}\n", v(0), v(1), v(2), v(3)));
            }
        }
    }
    fs::write(&path, text).unwrap();
    let out = mgmra(&[
        "train", "--dataset", p(&path), "--out", p(tmp.path()), "--epochs", "1", "--p", "2", "--k", "1",
        "--proto-p", "1", "--proto-i", "1", "--set", "batches_per_epoch=1",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = fs::read_to_string(tmp.path().join("resolved.cfg")).unwrap();
    assert!(resolved.contains("input_dim = 2\n") && resolved.contains("num_stripes = 2\n"));
}
