//! Acceptance suite. Runs every criterion in sequence, prints one
//! `PASS`/`FAIL` line per criterion and exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mgmra::checkpoint;
use mgmra_core::ablation::{ablate_seed, AblationRow};
use mgmra_core::data::{generate, pk_sample, SynthConfig};
use mgmra_core::eval::{compute_cmc, compute_map, evaluate, EvalMode};
use mgmra_core::gradsuite::run_gradient_suite;
use mgmra_core::memory::{sg_mra_read, Gate, MemoryConfig, PrototypeMemory};
use mgmra_core::numerics::{Graph, Matrix, Rng};
use mgmra_core::trainer::{objective, Checkpoint, ClassMap, ModelParams, TrainConfig};
use mgmra_core::encoder::encode_graph;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn failed(e: impl std::fmt::Display) -> Verdict {
    verdict(false, format!("error: {e}"))
}

macro_rules! attempt {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return failed(e),
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("gradient suite", gradients),
        ("addressing invariants", addressing),
        ("hierarchy shape law", hierarchy),
        ("metric oracle equivalence", metrics),
        ("memory removal at inference", removal),
        ("directional ablation", ablation),
        ("chance-level sanity", chance),
        ("determinism", determinism),
        ("loss arithmetic", loss_arithmetic),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("AC{} {status} {name}: {} [{:.1}s]", i + 1, v.detail, start.elapsed().as_secs_f64());
        if !v.pass {
            failures += 1;
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

fn gradients() -> Verdict {
    let start = Instant::now();
    let entries = attempt!(run_gradient_suite(2024, 20));
    let elapsed = start.elapsed();
    let worst = entries.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error)).expect("nonempty suite");
    let bad: Vec<&str> = entries.iter().filter(|e| !(e.max_rel_error < 1e-4) || e.instances < 20).map(|e| e.name).collect();
    let pass = bad.is_empty() && elapsed < Duration::from_secs(120);
    verdict(
        pass,
        format!(
            "{} cases x 20 instances, worst {:.2e} ({}), {:.1}s of 120s{}",
            entries.len(),
            worst.max_rel_error,
            worst.name,
            elapsed.as_secs_f64(),
            if bad.is_empty() { String::new() } else { format!(", over tolerance: {bad:?}") }
        ),
    )
}

fn addressing() -> Verdict {
    let mut rng = Rng::new(7);
    let (mut sum_err, mut min_w, mut scale_err, mut recon_err) = (0.0f64, f64::INFINITY, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let rows = 1 + rng.below(48);
        let c = 2 + rng.below(15);
        let memory = Matrix::random_normal(rows, c, 1.0, &mut rng);
        let query = Matrix::random_normal(1, c, 1.0, &mut rng);
        let factor = 10f64.powf(rng.uniform(-3.0, 3.0));

        let mut g = Graph::new();
        let m = g.leaf(memory.clone());
        let q = g.leaf(query.clone());
        let qs = g.leaf(query.scale(factor));
        let (h, w) = attempt!(sg_mra_read(&mut g, q, m));
        let (_, ws) = attempt!(sg_mra_read(&mut g, qs, m));
        let (h, w, ws) = (g.value(h), g.value(w), g.value(ws));

        sum_err = sum_err.max((w.row(0).iter().sum::<f64>() - 1.0).abs());
        min_w = w.row(0).iter().fold(min_w, |a, &b| a.min(b));
        for (a, b) in w.row(0).iter().zip(ws.row(0)) {
            scale_err = scale_err.max((a - b).abs());
        }
        for j in 0..c {
            let expect: f64 = (0..rows).map(|r| w.get(0, r) * memory.get(r, j)).sum();
            recon_err = recon_err.max((h.get(0, j) - expect).abs());
        }
    }
    let pass = sum_err <= 1e-10 && min_w > 0.0 && scale_err <= 1e-9 && recon_err <= 1e-10;
    verdict(
        pass,
        format!("10000 reads, |sum-1| {sum_err:.1e}, min w {min_w:.2e}, scaling {scale_err:.1e}, reconstruction {recon_err:.1e}"),
    )
}

fn hierarchy() -> Verdict {
    let mut rng = Rng::new(11);
    let mut checked = Vec::new();
    for _ in 0..50 {
        checked.push((1 + rng.below(8), 1 + rng.below(6), 1 + rng.below(3), 1 + rng.below(10), 2 + rng.below(6)));
    }
    checked.push((6, 5, 1, 4, 8));
    let mut mismatches = 0;
    for &(p, i, s, nc, c) in &checked {
        let cfg = attempt!(MemoryConfig::new(p, i, s, nc, c));
        let law = (2 * nc * s * i * p, 2 * nc * s * i, nc * s);
        let memory = PrototypeMemory::init(cfg, &mut rng);
        let (part, ins, sem) = attempt!(memory.levels());
        if cfg.level_rows() != law || (part.rows(), ins.rows(), sem.rows()) != law {
            mismatches += 1;
        }
    }
    let default = attempt!(MemoryConfig::with_default_counts(4, 8));
    let mem = PrototypeMemory::init(default, &mut rng);
    let (part, ins, sem) = attempt!(mem.levels());
    let rows = (part.rows(), ins.rows(), sem.rows());
    let pass = mismatches == 0 && rows == (240, 40, 4);
    verdict(pass, format!("50 random configs, {mismatches} mismatches; default with 4 classes gives {rows:?}"))
}

/// Least common multiple of 1..=20, so every `hits/k` is an integer multiple of `1/L`.
const L: u128 = 232_792_560;

/// First-hit position and exact average precision as `(num, den)`.
fn brute_force(ranking: &[usize], qid: u32, gallery_ids: &[u32]) -> Option<(usize, u128, u128)> {
    let relevant: Vec<usize> = (0..ranking.len()).filter(|&k| gallery_ids[ranking[k]] == qid).collect();
    let first = *relevant.first()?;
    let num: u128 = relevant.iter().enumerate().map(|(n, &k)| (n as u128 + 1) * L / (k as u128 + 1)).sum();
    Some((first, num, relevant.len() as u128 * L))
}

fn metrics() -> Verdict {
    let mut rng = Rng::new(13);
    let (mut cmc_err, mut map_err, mut instances) = (0.0f64, 0.0f64, 0);
    let mut excluded_mismatch = 0;
    while instances < 200 {
        let gsize = 1 + rng.below(20);
        let nq = 1 + rng.below(12);
        let id_range = 1 + rng.below(8) as u32;
        let gallery_ids: Vec<u32> = (0..gsize).map(|_| rng.below(id_range as usize) as u32).collect();
        let query_ids: Vec<u32> = (0..nq).map(|_| rng.below(id_range as usize + 2) as u32).collect();
        let rankings: Vec<Vec<usize>> = (0..nq)
            .map(|_| {
                let mut r: Vec<usize> = (0..gsize).collect();
                rng.shuffle(&mut r);
                r
            })
            .collect();
        let oracle: Vec<_> = rankings.iter().zip(&query_ids).filter_map(|(r, &q)| brute_force(r, q, &gallery_ids)).collect();
        if oracle.is_empty() {
            continue;
        }
        instances += 1;
        let counted = oracle.len();
        let cmc = attempt!(compute_cmc(&rankings, &query_ids, &gallery_ids, gsize));
        let map = attempt!(compute_map(&rankings, &query_ids, &gallery_ids));
        for r in 0..gsize {
            let hits = oracle.iter().filter(|o| o.0 <= r).count();
            cmc_err = cmc_err.max((cmc.curve[r] - hits as f64 / counted as f64).abs());
        }
        // Σ num_q/den_q over a common denominator L·L, exact in integers.
        let num: u128 = oracle.iter().map(|&(_, n, d)| n * (L * L / d)).sum();
        let exact = num as f64 / (L * L * counted as u128) as f64;
        map_err = map_err.max((map.map - exact).abs());
        if cmc.excluded != nq - counted || map.excluded != nq - counted {
            excluded_mismatch += 1;
        }
    }
    let pass = cmc_err < 1e-12 && map_err < 1e-12 && excluded_mismatch == 0;
    verdict(
        pass,
        format!("200 instances, max |dCMC| {cmc_err:.1e}, max |dmAP| {map_err:.1e}, exclusion mismatches {excluded_mismatch}"),
    )
}

fn removal() -> Verdict {
    let split = attempt!(generate(&SynthConfig::default()));
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let trained = attempt!(mgmra_core::trainer::train(&cfg, &split.train)).checkpoint;
    let tmp = attempt!(tempfile::tempdir());
    let reload = |name: &str, ck: &Checkpoint| -> mgmra::Result<Checkpoint> {
        let path = tmp.path().join(name);
        checkpoint::save(&path, ck)?;
        checkpoint::load(&path)
    };
    let with_memory = |f: &dyn Fn(&PrototypeMemory) -> PrototypeMemory| -> Checkpoint {
        let mut ck = trained.clone();
        ck.params.memory = ck.params.memory.as_ref().map(f);
        ck
    };
    let zeroed = with_memory(&|m| {
        let c = m.config().feature_dim;
        PrototypeMemory::from_parts(*m.config(), Matrix::zeros(m.part_rows.rows(), c), Gate::constant(c, 0.0, 0.0), Gate::constant(c, 0.0, 0.0))
            .expect("same shapes")
    });
    let randomized = with_memory(&|m| PrototypeMemory::init(*m.config(), &mut Rng::new(99)));
    let mut stripped = trained.clone();
    stripped.params.memory = None;

    let variants = [("trained", trained.clone()), ("zeroed", zeroed), ("randomized", randomized), ("stripped", stripped)];
    let mut outputs = Vec::new();
    for (name, ck) in &variants {
        let ck = attempt!(reload(&format!("{name}.mgck"), ck));
        let report = attempt!(evaluate(&ck.params, &split.query, &split.gallery, EvalMode::Main, 10, 5));
        let path = tmp.path().join(format!("{name}.csv"));
        attempt!(mgmra::report::write_metrics_csv(&path, &report));
        outputs.push((report, attempt!(fs::read(&path))));
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    let bits_equal = outputs.windows(2).all(|w| {
        w[0].0.cmc.iter().zip(&w[1].0.cmc).all(|(a, b)| a.to_bits() == b.to_bits()) && w[0].0.map.to_bits() == w[1].0.map.to_bits()
    });
    verdict(
        identical && bits_equal,
        format!("trained/zeroed/randomized/stripped memory, Rank-1 {:.4}, mAP {:.4}, identical {}", outputs[0].0.rank1(), outputs[0].0.map, identical && bits_equal),
    )
}

fn ablation() -> Verdict {
    let start = Instant::now();
    let synth = SynthConfig::default();
    let cfg = TrainConfig::default();
    let mut rows: Vec<AblationRow> = Vec::new();
    for seed in 0..5 {
        rows.push(attempt!(ablate_seed(&synth, &cfg, seed, 10)));
    }
    let elapsed = start.elapsed();
    let n = rows.len() as f64;
    let base = rows.iter().map(|r| r.rank1_base).sum::<f64>() / n;
    let mgmra = rows.iter().map(|r| r.rank1_mgmra).sum::<f64>() / n;
    let nonneg = rows.iter().filter(|r| r.rank1_gain() >= 0.0).count();
    let gains: Vec<String> = rows.iter().map(|r| format!("{:+.4}", r.rank1_gain())).collect();
    let pass = mgmra >= base && nonneg >= 4 && elapsed < Duration::from_secs(600);
    verdict(
        pass,
        format!(
            "mean Rank-1 baseline {base:.4}, with memory {mgmra:.4}, per-seed gains [{}], {nonneg}/5 non-negative, {:.0}s of 600s",
            gains.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn chance() -> Verdict {
    let synth = SynthConfig::default();
    let split = attempt!(generate(&synth));
    let cfg = TrainConfig::default();
    let params = attempt!(ModelParams::init(&cfg, synth.num_train_ids));
    let report = attempt!(evaluate(&params, &split.query, &split.gallery, EvalMode::Main, 10, 0));
    let chance = 1.0 / synth.num_test_ids as f64;
    let r1 = report.rank1();
    verdict((r1 - chance).abs() <= 0.1, format!("untrained Rank-1 {r1:.4} over 10 evaluation seeds, chance {chance:.4}"))
}

fn mgmra_bin(args: &[&str]) -> std::io::Result<bool> {
    let out = Command::new(env!("CARGO_BIN_EXE_mgmra")).args(args).env("MGMRA_LOG_LEVEL", "error").output()?;
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    Ok(out.status.success())
}

fn determinism() -> Verdict {
    let tmp = attempt!(tempfile::tempdir());
    let p = |path: &Path| path.to_str().expect("utf-8 temp path").to_string();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let data = p(&dir.join("data"));
        let model = p(&dir.join("model"));
        let ck = p(&dir.join("model").join("checkpoint.mgck"));
        let eval = p(&dir.join("eval"));
        let steps: [Vec<&str>; 3] = [
            vec!["synth", "--seed", "17", "--out", &data],
            vec!["train", "--seed", "17", "--epochs", "3", "--dataset", &data, "--out", &model],
            vec!["eval", "--seed", "17", "--checkpoint", &ck, "--dataset", &data, "--out", &eval, "--dump-rankings"],
        ];
        for args in &steps {
            if !attempt!(mgmra_bin(args)) {
                return verdict(false, format!("`mgmra {}` failed", args[0]));
            }
        }
    }
    let files = [
        "data/train.mgmr",
        "data/query.mgmr",
        "data/gallery.mgmr",
        "model/checkpoint.mgck",
        "model/loss.csv",
        "eval/metrics.csv",
        "eval/rankings.csv",
    ];
    let mut differing = Vec::new();
    for f in files {
        let a = attempt!(fs::read(tmp.path().join("a").join(f)));
        let b = attempt!(fs::read(tmp.path().join("b").join(f)));
        if a != b {
            differing.push(f);
        }
    }
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs", files.len())
        } else {
            format!("differing artifacts: {differing:?}")
        },
    )
}

fn loss_arithmetic() -> Verdict {
    let cfg = TrainConfig::default();
    let w = cfg.weights;
    if (w.beta, w.lambda1, w.lambda2, w.lambda3) != (0.05, 0.1, 0.1, 1.0) {
        return verdict(false, format!("default weights {w:?}"));
    }
    let split = attempt!(generate(&SynthConfig::default()));
    let classes = ClassMap::new(&split.train);
    let mut worst = 0.0f64;
    let mut batches = 0;
    for seed in 0..5 {
        let params = attempt!(ModelParams::init(&TrainConfig { seed, ..cfg.clone() }, classes.len()));
        let memory = params.memory.as_ref().expect("memory enabled by default");
        for b in 0..4 {
            let mut rng = Rng::with_stream(seed, 100 + b);
            let batch = attempt!(pk_sample(&split.train, cfg.p, cfg.k, &mut rng));
            let records = split.train.records();
            let labels: Vec<usize> = attempt!(batch.iter().map(|&i| classes.class(records[i].identity)).collect());
            let modalities: Vec<u8> = batch.iter().map(|&i| records[i].modality).collect();
            let mut g = Graph::new();
            let enc = params.encoder.bind(&mut g);
            let mem = memory.bind(&mut g);
            let x = g.leaf(split.train.stack_stripes(&batch));
            let features = attempt!(encode_graph(&mut g, &enc, &params.encoder.config, x, &modalities));
            let (total, r) = attempt!(objective(
                &mut g,
                &features,
                &enc.classifiers,
                Some((&mem, memory.config())),
                &labels,
                &modalities,
                &w,
                &mut rng,
            ));
            let expect = r.id + r.hc_tri + 0.1 * r.mem_sparsity + 0.1 * r.ins + 1.0 * r.sem;
            let graph_total = g.value(total).get(0, 0);
            worst = worst.max((r.total - expect).abs()).max((graph_total - expect).abs());
            batches += 1;
        }
    }
    verdict(worst <= 1e-10, format!("{batches} batches, max |total - weighted sum| {worst:.1e}"))
}
