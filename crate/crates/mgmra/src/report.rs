//! CSV outputs.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use mgmra_core::ablation::AblationRow;
use mgmra_core::eval::EvalReport;
use mgmra_core::losses::LossReport;
use mgmra_core::memory::PrototypeMemory;

use crate::{Error, Result};

pub const LOSS_HEADER: [&str; 7] = ["epoch", "id", "hc_tri", "mem_sparsity", "ins", "sem", "total"];
pub const ABLATION_HEADER: [&str; 5] = ["seed", "rank1_base", "rank1_mgmra", "map_base", "map_mgmra"];

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(file))
}

fn finish(path: &Path, mut w: csv::Writer<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Malformed {
            path: path.to_path_buf(),
            detail: format!("{other:?}"),
        },
    }
}

/// One row per epoch, numbered from 1.
pub fn write_loss_csv(path: &Path, reports: &[LossReport]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(LOSS_HEADER).map_err(&err)?;
    for (e, r) in reports.iter().enumerate() {
        w.write_record([
            (e + 1).to_string(),
            r.id.to_string(),
            r.hc_tri.to_string(),
            r.mem_sparsity.to_string(),
            r.ins.to_string(),
            r.sem.to_string(),
            r.total.to_string(),
        ])
        .map_err(&err)?;
    }
    finish(path, w)
}

/// `rank,cmc` rows for ranks `1..=G`, then `mAP,<value>`.
pub fn write_metrics_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(["rank", "cmc"]).map_err(&err)?;
    for (r, v) in report.cmc.iter().enumerate() {
        w.write_record([(r + 1).to_string(), v.to_string()]).map_err(&err)?;
    }
    w.write_record(["mAP".to_string(), report.map.to_string()]).map_err(&err)?;
    finish(path, w)
}

/// Per evaluation seed and query, the ranked gallery record indices.
pub fn write_rankings_csv(path: &Path, report: &EvalReport, query_ids: &[u32]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(["eval_seed", "query", "identity", "ranking"]).map_err(&err)?;
    for (s, result) in report.per_seed.iter().enumerate() {
        for (q, order) in result.rankings.iter().enumerate() {
            let order: Vec<String> = order.iter().map(usize::to_string).collect();
            w.write_record([s.to_string(), q.to_string(), query_ids[q].to_string(), order.join(" ")])
                .map_err(&err)?;
        }
    }
    finish(path, w)
}

pub fn write_ablation_csv(out: &mut impl Write, rows: &[AblationRow]) -> std::io::Result<()> {
    writeln!(out, "{}", ABLATION_HEADER.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.seed, r.rank1_base, r.rank1_mgmra, r.map_base, r.map_mgmra
        )?;
    }
    Ok(())
}

/// Prototype rows of all three levels (`level,row,c0,…`) followed by the two
/// gates (`gate_ins` and `gate_sem` with `row` holding the bias).
pub fn write_memory_csv(path: &Path, memory: &PrototypeMemory) -> Result<()> {
    let (part, ins, sem) = memory.levels()?;
    let mut w = writer(path)?;
    let err = csv_err(path);
    let c = part.cols();
    let mut header = vec!["level".to_string(), "row".to_string()];
    header.extend((0..c).map(|j| format!("c{j}")));
    w.write_record(&header).map_err(&err)?;
    for (name, m) in [("part", &part), ("instance", &ins), ("semantic", &sem)] {
        for r in 0..m.rows() {
            let mut rec = vec![name.to_string(), r.to_string()];
            rec.extend(m.row(r).iter().map(f64::to_string));
            w.write_record(&rec).map_err(&err)?;
        }
    }
    for (name, gate) in [("gate_ins", &memory.gate_ins), ("gate_sem", &memory.gate_sem)] {
        let mut rec = vec![name.to_string(), gate.bias.get(0, 0).to_string()];
        rec.extend(gate.weight.data().iter().map(f64::to_string));
        w.write_record(&rec).map_err(&err)?;
    }
    finish(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mgmra_core::eval::{EvalMode, RankingResult};

    #[test]
    fn loss_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        let r = LossReport {
            id: 1.5,
            hc_tri: 0.25,
            mem_sparsity: 2.0,
            ins: 0.0,
            sem: 0.125,
            total: 2.075,
        };
        write_loss_csv(&path, &[r, r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "epoch,id,hc_tri,mem_sparsity,ins,sem,total\n1,1.5,0.25,2,0,0.125,2.075\n2,1.5,0.25,2,0,0.125,2.075\n"
        );
    }

    #[test]
    fn metrics_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let per = RankingResult {
            rankings: vec![vec![1, 0]],
            cmc: vec![0.0, 1.0],
            map: 0.5,
            excluded: 0,
        };
        let report = EvalReport {
            mode: EvalMode::Main,
            per_seed: vec![per],
            cmc: vec![0.0, 1.0],
            map: 0.5,
        };
        write_metrics_csv(&path, &report).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "rank,cmc\n1,0\n2,1\nmAP,0.5\n");
        write_rankings_csv(&path, &report, &[4]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "eval_seed,query,identity,ranking\n0,0,4,1 0\n"
        );
    }

    #[test]
    fn ablation_table_columns() {
        let mut out = Vec::new();
        let row = AblationRow {
            seed: 3,
            rank1_base: 0.5,
            rank1_mgmra: 0.75,
            map_base: 0.25,
            map_mgmra: 1.0,
        };
        write_ablation_csv(&mut out, &[row]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "seed,rank1_base,rank1_mgmra,map_base,map_mgmra\n3,0.5,0.75,0.25,1\n"
        );
    }
}
