//! CEMP-Partial: per-edge corruption levels from triangle inconsistencies.
//!
//! Each edge starts at the plain mean of its triangle inconsistencies.
//! Iteration `t` then reweights every triangle `(i, j, k)` by how clean
//! its two side edges currently look,
//!
//! ```text
//! w = exp(-beta_t * (s_ik + s_jk))
//! s_ij <- sum(w * d_ijk) / sum(w)
//! ```
//!
//! with `beta_t` growing along a schedule. As `beta_t` rises, triangles
//! routed through suspicious edges stop voting, and the estimate `s_ij`
//! approaches the true corruption level of the edge. Edges without a
//! single informative triangle cannot be assessed at all; they are pinned
//! at 1 and flagged.

use crate::cycle::{all_inconsistencies, CycleInconsistencies};
use crate::graph::ViewingGraph;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CempError {
    #[error("initial reweighting strength {0} must be positive and finite")]
    BadInitial(f64),
    #[error("growth ratio {0} must be finite and at least 1")]
    BadGrowth(f64),
    #[error("cap {0} must be positive and finite")]
    BadCap(f64),
    #[error("estimates cover {got} edges but the cycle table covers {expected}")]
    EdgeMismatch { expected: usize, got: usize },
}

/// The reweighting strength over iterations: `min(initial * growth^t, cap)`.
///
/// The default matches the estimator's standard setting, `min(1.2^t, 40)`.
/// Uncapped geometric schedules are what the separation guarantee in
/// [`crate::eval`] reasons about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    initial: f64,
    growth: f64,
    cap: Option<f64>,
}

impl BetaSchedule {
    pub fn new(initial: f64, growth: f64, cap: Option<f64>) -> Result<Self, CempError> {
        if !initial.is_finite() || initial <= 0.0 {
            return Err(CempError::BadInitial(initial));
        }
        if !growth.is_finite() || growth < 1.0 {
            return Err(CempError::BadGrowth(growth));
        }
        if let Some(c) = cap {
            if !c.is_finite() || c <= 0.0 {
                return Err(CempError::BadCap(c));
            }
        }
        Ok(Self {
            initial,
            growth,
            cap,
        })
    }

    /// Pure geometric schedule without a cap.
    pub fn geometric(initial: f64, growth: f64) -> Result<Self, CempError> {
        Self::new(initial, growth, None)
    }

    pub fn value(&self, t: usize) -> f64 {
        let v = self.initial * self.growth.powi(t as i32);
        match self.cap {
            Some(c) => v.min(c),
            None => v,
        }
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            growth: 1.2,
            cap: Some(40.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CempConfig {
    /// Number of reweighting iterations.
    pub iterations: usize,
    pub schedule: BetaSchedule,
}

impl Default for CempConfig {
    fn default() -> Self {
        Self {
            iterations: 25,
            schedule: BetaSchedule::default(),
        }
    }
}

/// Estimated corruption level per edge, aligned to the graph edge list.
///
/// Values live in `[0, 1]`: 0 means the edge looks clean, 1 fully
/// corrupted. An edge with no informative triangle carries no evidence;
/// its value is pinned at 1 and [`CorruptionEstimates::has_evidence`]
/// reports `false` for it.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionEstimates {
    values: Vec<f64>,
    evidence: Vec<bool>,
}

impl CorruptionEstimates {
    pub(crate) fn from_parts(values: Vec<f64>, evidence: Vec<bool>) -> Self {
        debug_assert_eq!(values.len(), evidence.len());
        Self { values, evidence }
    }

    pub fn edge_count(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, edge: usize) -> f64 {
        self.values[edge]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn has_evidence(&self, edge: usize) -> bool {
        self.evidence[edge]
    }

    pub fn evidence(&self) -> &[bool] {
        &self.evidence
    }
}

/// Per-edge mean inconsistency, the estimator's starting point.
pub fn cemp_init(table: &CycleInconsistencies) -> CorruptionEstimates {
    let mut values = Vec::with_capacity(table.edge_count());
    let mut evidence = Vec::with_capacity(table.edge_count());
    for e in 0..table.edge_count() {
        let terms = table.terms(e);
        if terms.is_empty() {
            values.push(1.0);
            evidence.push(false);
        } else {
            values.push(terms.iter().map(|t| t.value).sum::<f64>() / terms.len() as f64);
            evidence.push(true);
        }
    }
    CorruptionEstimates { values, evidence }
}

/// One reweighting pass at strength `beta`.
///
/// Weighted sums run in ascending co-node order per edge, so the result
/// is independent of the parallel schedule. The largest weight in each
/// sum is normalized to 1 before exponentiation, which keeps the
/// denominator away from underflow at extreme `beta`.
pub fn cemp_iterate(
    table: &CycleInconsistencies,
    current: &CorruptionEstimates,
    beta: f64,
) -> Result<CorruptionEstimates, CempError> {
    if current.edge_count() != table.edge_count() {
        return Err(CempError::EdgeMismatch {
            expected: table.edge_count(),
            got: current.edge_count(),
        });
    }
    let values: Vec<f64> = (0..table.edge_count())
        .into_par_iter()
        .map(|e| {
            let terms = table.terms(e);
            if terms.is_empty() {
                return 1.0;
            }
            let shift = terms
                .iter()
                .map(|t| current.value(t.edge_ik) + current.value(t.edge_jk))
                .fold(f64::INFINITY, f64::min);
            let mut num = 0.0;
            let mut den = 0.0;
            for t in terms {
                let exponent = current.value(t.edge_ik) + current.value(t.edge_jk) - shift;
                let w = (-beta * exponent).exp();
                num += w * t.value;
                den += w;
            }
            num / den
        })
        .collect();
    Ok(CorruptionEstimates {
        values,
        evidence: current.evidence.clone(),
    })
}

/// Runs the estimator on a prebuilt cycle table.
pub fn cemp_with_table(table: &CycleInconsistencies, cfg: &CempConfig) -> CorruptionEstimates {
    let mut s = cemp_init(table);
    for t in 0..cfg.iterations {
        s = cemp_iterate(table, &s, cfg.schedule.value(t)).expect("table size is fixed");
    }
    s
}

/// Runs the estimator and keeps every iterate `s^(0) ... s^(T)`.
///
/// Iterate `t + 1` is produced at strength `beta_t`, so entry `t` of the
/// result is comparable against bounds stated in terms of `beta_t`.
pub fn cemp_history(table: &CycleInconsistencies, cfg: &CempConfig) -> Vec<CorruptionEstimates> {
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    history.push(cemp_init(table));
    for t in 0..cfg.iterations {
        let next = cemp_iterate(table, history.last().unwrap(), cfg.schedule.value(t))
            .expect("table size is fixed");
        history.push(next);
    }
    history
}

/// Builds the triangle table for `graph` and runs the estimator on it.
pub fn cemp_partial(graph: &ViewingGraph, cfg: &CempConfig) -> CorruptionEstimates {
    cemp_with_table(&all_inconsistencies(graph), cfg)
}
