//! Replicated screening experiments and their summary criteria: the
//! minimum model size `S`, per-variable selection proportions `P_e` and the
//! all-selected proportion `P_a`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::screening::{self, rank_positions, Method};
use crate::simgen::{self, SimScenario};

/// Quantile rule used for the IQR, recorded in outputs.
pub const QUANTILE_CONVENTION: &str = "linear interpolation between order statistics (type 7)";

/// Raw outcome of one replication. Rank positions are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub scenario_id: String,
    pub method: Method,
    pub rep: usize,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub realized_cr: f64,
    /// `(covariate index, rank position)` for each active covariate, by
    /// ascending index.
    pub active_ranks: Vec<(usize, usize)>,
}

impl ReplicationRecord {
    pub fn active_set(&self) -> Vec<usize> {
        self.active_ranks.iter().map(|&(k, _)| k).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub scenario_id: String,
    pub method: Method,
    pub s_median: f64,
    pub s_q1: f64,
    pub s_q3: f64,
    pub s_iqr: f64,
    /// Selection proportion of each active covariate (0-based index).
    pub p_e: BTreeMap<usize, f64>,
    pub p_a: f64,
    pub d_n: usize,
    pub replications: usize,
}

/// Smallest ranking prefix that contains every active covariate.
pub fn min_model_size(ranking: &[usize], active_set: &[usize]) -> Result<usize> {
    let p = ranking.len();
    if active_set.is_empty() {
        return Err(Error::Validation("empty active set".into()));
    }
    if let Some(&k) = active_set.iter().find(|&&k| k >= p) {
        return Err(Error::ActiveNotInRange { index: k + 1, p });
    }
    let pos = rank_positions(ranking);
    Ok(active_set.iter().map(|&k| pos[k]).max().unwrap_or(0))
}

/// `(P_e, P_a)` at model size `d_n`.
pub fn selection_proportions(
    records: &[ReplicationRecord],
    d_n: usize,
) -> Result<(BTreeMap<usize, f64>, f64)> {
    let first = records.first().ok_or(Error::EmptyRecords)?;
    let active = first.active_set();
    if let Some(r) = records.iter().find(|r| r.active_set() != active) {
        return Err(Error::Validation(format!(
            "replication {} has a different active set",
            r.rep
        )));
    }
    let m = records.len() as f64;
    let mut p_e = BTreeMap::new();
    for (j, &k) in active.iter().enumerate() {
        let hits = records
            .iter()
            .filter(|r| r.active_ranks[j].1 <= d_n)
            .count();
        p_e.insert(k, hits as f64 / m);
    }
    let all = records.iter().filter(|r| r.s <= d_n).count();
    Ok((p_e, all as f64 / m))
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = (m - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn aggregate(records: &[ReplicationRecord], d_n: usize) -> Result<EvalSummary> {
    let (p_e, p_a) = selection_proportions(records, d_n)?;
    let mut s: Vec<f64> = records.iter().map(|r| r.s as f64).collect();
    s.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    let first = &records[0];
    Ok(EvalSummary {
        scenario_id: first.scenario_id.clone(),
        method: first.method,
        s_median: quantile_sorted(&s, 0.5),
        s_q1: q1,
        s_q3: q3,
        s_iqr: q3 - q1,
        p_e,
        p_a,
        d_n,
        replications: records.len(),
    })
}

/// Groups records by `(scenario_id, method)` and summarizes each group,
/// in order of first appearance.
pub fn aggregate_groups(records: &[ReplicationRecord], d_n: Option<usize>) -> Result<Vec<EvalSummary>> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut order: Vec<(String, Method)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<ReplicationRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.scenario_id.clone(), r.method.to_string());
        if !groups.contains_key(&key) {
            order.push((r.scenario_id.clone(), r.method));
        }
        groups.entry(key).or_default().push(r.clone());
    }
    order
        .into_iter()
        .map(|(id, method)| {
            let g = &groups[&(id, method.to_string())];
            let d = d_n.unwrap_or_else(|| screening::default_cutoff(g[0].n).min(g[0].p));
            aggregate(g, d)
        })
        .collect()
}

/// Everything a replicated run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: EvalSummary,
    pub records: Vec<ReplicationRecord>,
    pub censoring_scale: f64,
}

/// Simulates and screens replication `rep` with a known censoring scale.
pub fn run_replication(
    scenario: &SimScenario,
    method: Method,
    scale: f64,
    rep: usize,
) -> Result<ReplicationRecord> {
    let generated = simgen::generate_replication(scenario, scale, rep as u64)?;
    let spec = KernelSpec::default();
    let result = screening::screen_with(method, &generated.dataset, &spec, &spec, None)?;
    let pos = result.rank_positions();
    let active_ranks: Vec<(usize, usize)> =
        generated.active_set.iter().map(|&k| (k, pos[k])).collect();
    Ok(ReplicationRecord {
        scenario_id: scenario.id(),
        method,
        rep,
        n: scenario.n,
        p: scenario.p,
        s: min_model_size(&result.ranking, &generated.active_set)?,
        realized_cr: generated.dataset.censoring_rate(),
        active_ranks,
    })
}

/// Runs `replications` independent replications on `jobs` worker threads.
/// Output is identical for every `jobs` value.
pub fn run_experiment(
    scenario: &SimScenario,
    method: Method,
    replications: usize,
    jobs: usize,
) -> Result<ExperimentOutput> {
    if replications == 0 {
        return Err(Error::EmptyRecords);
    }
    let scale = simgen::calibrated_scale(scenario)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records: Vec<ReplicationRecord> = pool.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|rep| {
                run_replication(scenario, method, scale, rep).map_err(|e| Error::Replication {
                    rep,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()
    })?;
    let d_n = screening::default_cutoff(scenario.n).min(scenario.p);
    Ok(ExperimentOutput {
        summary: aggregate(&records, d_n)?,
        records,
        censoring_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn record(rep: usize, ranks: &[(usize, usize)]) -> ReplicationRecord {
        ReplicationRecord {
            scenario_id: "t".into(),
            method: Method::Hsic,
            rep,
            n: 200,
            p: 100,
            s: ranks.iter().map(|r| r.1).max().unwrap(),
            realized_cr: 0.2,
            active_ranks: ranks.to_vec(),
        }
    }

    #[test]
    fn min_model_size_definition() {
        // positions 2, 7, 9 for covariates 0, 4, 9
        let ranking = vec![3, 0, 1, 2, 5, 6, 4, 7, 9, 8];
        assert_eq!(min_model_size(&ranking, &[0, 4, 9]).unwrap(), 9);
        assert_eq!(min_model_size(&ranking, &[3, 0]).unwrap(), 2);
        assert!(matches!(
            min_model_size(&ranking, &[10]),
            Err(Error::ActiveNotInRange { .. })
        ));
        assert!(min_model_size(&ranking, &[]).is_err());
    }

    #[test]
    fn proportions() {
        let recs = vec![record(0, &[(0, 1), (1, 2)])];
        let (pe, pa) = selection_proportions(&recs, 2).unwrap();
        assert_eq!(pe.values().copied().collect::<Vec<_>>(), vec![1.0, 1.0]);
        assert_eq!(pa, 1.0);

        let recs = vec![
            record(0, &[(0, 1), (1, 5)]),
            record(1, &[(0, 4), (1, 2)]),
            record(2, &[(0, 1), (1, 2)]),
            record(3, &[(0, 9), (1, 8)]),
        ];
        let (pe, pa) = selection_proportions(&recs, 3).unwrap();
        assert_eq!(pe[&0], 0.5);
        assert_eq!(pe[&1], 0.5);
        assert_eq!(pa, 0.25);
        assert!(matches!(selection_proportions(&[], 3), Err(Error::EmptyRecords)));
        let mixed = vec![record(0, &[(0, 1)]), record(1, &[(2, 1)])];
        assert!(selection_proportions(&mixed, 3).is_err());
    }

    #[test]
    fn summary_quantiles() {
        let recs: Vec<_> = (0..4).map(|i| record(i, &[(0, 5)])).collect();
        let s = aggregate(&recs, 10).unwrap();
        assert_eq!((s.s_median, s.s_iqr), (5.0, 0.0));

        let recs: Vec<_> = (1..=4).map(|i| record(i, &[(0, i)])).collect();
        let s = aggregate(&recs, 10).unwrap();
        assert_eq!(s.s_median, 2.5);
        assert_abs_diff_eq!(s.s_q1, 1.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s.s_q3, 3.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.s_iqr, 1.5, epsilon = 1e-15);

        let mut rev = recs.clone();
        rev.reverse();
        let t = aggregate(&rev, 10).unwrap();
        assert_eq!((t.s_median, t.s_iqr, t.p_a), (s.s_median, s.s_iqr, s.p_a));
    }

    #[test]
    fn groups_keep_first_seen_order() {
        let mut a = record(0, &[(0, 1)]);
        a.scenario_id = "z".into();
        let b = record(0, &[(0, 3)]);
        let out = aggregate_groups(&[a.clone(), b, a], Some(2)).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].scenario_id, "z");
        assert_eq!(out[0].replications, 2);
        assert_eq!(out[1].p_a, 0.0);
    }
}
