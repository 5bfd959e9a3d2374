//! Per-run metrics and their CSV form.

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use super::Algorithm;

pub const CSV_HEADER: &str = "seed,algo,k,n_flows,cct_s,alloc_gbps,avg_hops,runtime_s";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub algo: Algorithm,
    pub k: usize,
    pub n_flows: usize,
    /// Coflow completion time, s. Online runs report the mean over coflows.
    pub cct_s: f64,
    /// Total rate given to the coflow, Gb/s.
    pub alloc_gbps: f64,
    /// Mean route length, hops.
    pub avg_hops: f64,
    /// Wall-clock scheduling time, s. Left empty in reproducible output.
    pub runtime_s: Option<f64>,
}

/// Writes a header and one row per record. Runtimes are written only when
/// `with_runtime` is set, since they differ between otherwise identical runs.
pub fn write_csv<W: io::Write>(records: &[MetricsRecord], out: W, with_runtime: bool) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        if with_runtime {
            w.serialize(r)?;
        } else {
            w.serialize(MetricsRecord {
                runtime_s: None,
                ..r.clone()
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> csv::Result<Vec<MetricsRecord>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Mean and standard deviation of the metrics of one (algorithm, k, N) group.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algo: Algorithm,
    pub k: usize,
    pub n_flows: usize,
    pub runs: usize,
    pub cct_mean: f64,
    pub cct_std: f64,
    pub alloc_mean: f64,
    pub hops_mean: f64,
    pub runtime_mean: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn summarize(records: &[MetricsRecord]) -> Vec<Summary> {
    let mut groups: BTreeMap<(usize, usize, Algorithm), Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.k, r.n_flows, r.algo)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((k, n_flows, algo), rs)| {
            let col = |f: fn(&MetricsRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (cct_mean, cct_std) = mean_std(&col(|r| r.cct_s));
            let runtimes: Option<Vec<f64>> = rs.iter().map(|r| r.runtime_s).collect();
            Summary {
                algo,
                k,
                n_flows,
                runs: rs.len(),
                cct_mean,
                cct_std,
                alloc_mean: mean_std(&col(|r| r.alloc_gbps)).0,
                hops_mean: mean_std(&col(|r| r.avg_hops)).0,
                runtime_mean: runtimes.map(|v| mean_std(&v).0),
            }
        })
        .collect()
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<10} k={:<3} n={:<4} runs={:<3} cct={:.3}±{:.3} s  alloc={:.3} Gb/s  hops={:.3}",
            self.algo.name(),
            self.k,
            self.n_flows,
            self.runs,
            self.cct_mean,
            self.cct_std,
            self.alloc_mean,
            self.hops_mean
        )?;
        if let Some(t) = self.runtime_mean {
            write!(f, "  runtime={t:.6} s")?;
        }
        Ok(())
    }
}
