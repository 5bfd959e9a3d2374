//! MinCCT baselines: each flow picks one of `K` precomputed candidate paths
//! and rates come from OptBA.
//!
//! The choice is made by a path-based relaxation. Flow `i` may spread its
//! `q_i` over its candidates, the program minimizes `T` under link
//! capacities, and each flow is then rounded onto the candidate carrying
//! its largest share. When the number of possible assignments is small,
//! every assignment is tried instead, which makes the result exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coflow::{Coflow, Schedule};
use crate::lpcore::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::netgraph::{
    k_max_capacity_paths, k_shortest_max_capacity_paths, k_shortest_paths, LinkId, Network, Path,
};
use crate::optba::{optba_schedule, OptbaError, RoutingPlan};
use crate::verify::best_assignment;

/// Assignments up to this count are enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 256;

/// Default number of candidate paths per flow.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("flow {0} has no candidate path with bandwidth left")]
    NoCandidates(usize),
    #[error("coflow has no unfinished flow")]
    Empty,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Allocation(#[from] OptbaError),
}

impl BaselineError {
    pub fn is_capacity_shortage(&self) -> bool {
        matches!(
            self,
            BaselineError::NoCandidates(_) | BaselineError::Allocation(OptbaError::ZeroAvailable { .. })
        )
    }
}

/// How candidate paths are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Fewest hops.
    S,
    /// Widest bottleneck of available bandwidth.
    M,
    /// Widest, then fewest hops.
    SM,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::S, Variant::M, Variant::SM];

    pub fn name(self) -> &'static str {
        match self {
            Variant::S => "S",
            Variant::M => "M",
            Variant::SM => "SM",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(Variant::S),
            "M" => Ok(Variant::M),
            "SM" => Ok(Variant::SM),
            _ => Err(format!("unknown candidate variant `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub variant: Variant,
    pub flow_ids: Vec<usize>,
    pub paths: Vec<Vec<Path>>,
}

impl CandidateSet {
    pub fn assignment_count(&self) -> usize {
        self.paths
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
            .unwrap_or(usize::MAX)
    }
}

/// Up to `k` candidates per unfinished flow, on the current availability.
pub fn generate_candidates(net: &Network, coflow: &Coflow, variant: Variant, k: usize) -> CandidateSet {
    let enumerate = match variant {
        Variant::S => k_shortest_paths,
        Variant::M => k_max_capacity_paths,
        Variant::SM => k_shortest_max_capacity_paths,
    };
    let flows: Vec<_> = coflow.pending().collect();
    CandidateSet {
        variant,
        flow_ids: flows.iter().map(|f| f.id).collect(),
        paths: flows.iter().map(|f| enumerate(net, f.src, f.dst, k)).collect(),
    }
}

fn volumes(coflow: &Coflow, ids: &[usize]) -> Vec<f64> {
    ids.iter()
        .map(|&id| coflow.flow(id).map_or(0.0, |f| f.residual))
        .collect()
}

fn check(candidates: &CandidateSet) -> Result<(), BaselineError> {
    if candidates.flow_ids.is_empty() {
        return Err(BaselineError::Empty);
    }
    match candidates.paths.iter().position(Vec::is_empty) {
        Some(k) => Err(BaselineError::NoCandidates(candidates.flow_ids[k])),
        None => Ok(()),
    }
}

/// Chooses one candidate per flow and allocates rates with OptBA.
pub fn mincct(net: &Network, coflow: &Coflow, candidates: &CandidateSet) -> Result<Schedule, BaselineError> {
    check(candidates)?;
    if candidates.assignment_count() <= EXHAUSTIVE_LIMIT {
        let vols = volumes(coflow, &candidates.flow_ids);
        if let Some(best) = best_assignment(&candidates.flow_ids, &vols, &candidates.paths, &net.availability()) {
            return Ok(best);
        }
    }
    mincct_rounded(net, coflow, candidates)
}

/// The relaxation-and-rounding choice, without the exhaustive shortcut.
pub fn mincct_rounded(net: &Network, coflow: &Coflow, candidates: &CandidateSet) -> Result<Schedule, BaselineError> {
    check(candidates)?;
    let available = net.availability();
    let vols = volumes(coflow, &candidates.flow_ids);

    let mut lp = LinearProgram::new();
    let t = lp.add_var("T", 0.0, f64::INFINITY, 1.0);
    let y: Vec<Vec<usize>> = candidates
        .paths
        .iter()
        .enumerate()
        .map(|(i, paths)| {
            (0..paths.len())
                .map(|c| lp.add_var(format!("y{i}_{c}"), 0.0, f64::INFINITY, 0.0))
                .collect()
        })
        .collect();
    for (i, vars) in y.iter().enumerate() {
        lp.add_constraint(vars.iter().map(|&v| (v, 1.0)).collect(), Relation::Ge, vols[i]);
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); available.len()];
    for (i, paths) in candidates.paths.iter().enumerate() {
        for (c, p) in paths.iter().enumerate() {
            for &LinkId(l) in p.links() {
                rows[l].push((y[i][c], 1.0));
            }
        }
    }
    for (l, mut row) in rows.into_iter().enumerate() {
        if !row.is_empty() {
            row.push((t, -available[l]));
            lp.add_constraint(row, Relation::Le, 0.0);
        }
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(LpError::NotOptimal(sol.status).into());
    }

    let routes = y
        .iter()
        .enumerate()
        .map(|(i, vars)| {
            let slack = 1e-9 * vols[i].max(1.0);
            let mut pick = 0;
            for c in 1..vars.len() {
                if sol.values[vars[c]] > sol.values[vars[pick]] + slack {
                    pick = c;
                }
            }
            candidates.paths[i][pick].clone()
        })
        .collect();
    let plan = RoutingPlan::new(candidates.flow_ids.clone(), routes);
    Ok(optba_schedule(&plan, &vols, &available)?)
}

/// Generates candidates and runs [`mincct`].
pub fn mincct_variant(net: &Network, coflow: &Coflow, variant: Variant, k: usize) -> Result<Schedule, BaselineError> {
    mincct(net, coflow, &generate_candidates(net, coflow, variant, k))
}
