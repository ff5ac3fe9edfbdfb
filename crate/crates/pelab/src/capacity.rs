//! Variational capacities as convex minimization problems.
//!
//! The ambient capacity minimizes the full Sobolev-type norm over functions
//! on the whole bounding grid that sit at 1 on the target; the prime-end
//! capacity works on the domain graph alone and translates a node in the
//! target into the constraint `u >= 1` on the node's contact cells (the
//! discrete trace of the liminf condition; nodes carry no measure).

use serde_json::{json, Value};

use crate::energy::{graph_for, GridFunction, Support};
use crate::error::{Error, Result};
use crate::grid::{CellSet, GridDomain};
use crate::metrics::maz_separation;
use crate::prime_end::{pullback, pushforward, NodeCensus, PrimeEndSet};
use crate::solver::{minimize_p_energy, SolverOpts};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CapacityKind {
    AmbientCp,
    PrimeEndCp,
}

/// Constraint set and exponent for one capacity evaluation.
pub struct CapacityProblem<'a> {
    pub dom: &'a GridDomain,
    pub census: &'a NodeCensus,
    /// Target cells (ambient indices) and target nodes.
    pub target: PrimeEndSet,
    pub kind: CapacityKind,
    pub p: f64,
    /// Optional outer condenser plate: cells clamped to zero.
    pub zero_set: Option<CellSet>,
    pub opts: SolverOpts,
}

#[derive(Clone, Debug)]
pub struct CapacityResult {
    pub value: f64,
    pub minimizer: GridFunction,
    pub iterations: usize,
    pub residual: f64,
}

impl CapacityResult {
    pub fn to_json(&self, kind: CapacityKind, p: f64) -> Value {
        json!({
            "kind": match kind { CapacityKind::AmbientCp => "ambient_cp", CapacityKind::PrimeEndCp => "prime_end_cp" },
            "p": p,
            "value": self.value,
            "iterations": self.iterations,
            "residual": self.residual,
        })
    }
}

/// Evaluate a capacity: minimize `lp_term + gradient_term` subject to
/// `u = 1` on the target (clamping to `[0,1]` never increases the energy, so
/// the equality constraint loses nothing) and `u = 0` on the optional outer
/// plate.
pub fn capacity(prob: &CapacityProblem) -> Result<CapacityResult> {
    if prob.p <= 1.0 || !prob.p.is_finite() {
        return Err(Error::BadParameter(format!("p must be > 1, got {}", prob.p)));
    }
    if prob.target.cells.is_empty() && prob.target.nodes.is_empty() {
        return Err(Error::BadParameter(
            "empty capacity target; the empty set has capacity 0 by convention".into(),
        ));
    }
    let dom = prob.dom;
    let support = match prob.kind {
        CapacityKind::AmbientCp => Support::Ambient,
        CapacityKind::PrimeEndCp => Support::Omega,
    };
    let graph = graph_for(dom, support);
    let mut fixed: Vec<Option<f64>> = vec![None; dom.n_cells()];
    match prob.kind {
        CapacityKind::AmbientCp => {
            for idx in prob.target.cells.iter() {
                fixed[idx] = Some(1.0);
            }
            // node targets enter through their anchors, which are ambient cells
            for &k in &prob.target.nodes {
                fixed[dom.idx(prob.census.nodes[k].anchor)] = Some(1.0);
            }
        }
        CapacityKind::PrimeEndCp => {
            for idx in prob.target.cells.iter() {
                if dom.in_mask_idx(idx) {
                    fixed[idx] = Some(1.0);
                }
            }
            for &k in &prob.target.nodes {
                for &c in &prob.census.nodes[k].contact_cells {
                    fixed[dom.idx(c)] = Some(1.0);
                }
            }
        }
    }
    if fixed.iter().all(Option::is_none) {
        return Err(Error::BadParameter(
            "capacity target misses the computation grid".into(),
        ));
    }
    if let Some(zeros) = &prob.zero_set {
        for idx in zeros.iter() {
            if fixed[idx] == Some(1.0) {
                return Err(Error::BadParameter(
                    "zero plate overlaps the capacity target".into(),
                ));
            }
            fixed[idx] = Some(0.0);
        }
    }
    let out = minimize_p_energy(&graph, prob.p, &fixed, None, true, &prob.opts, None)?;
    let mut values = out.values;
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    let value = graph.p_energy(&values, prob.p, true);
    Ok(CapacityResult {
        value,
        minimizer: GridFunction::from_values(dom, support, values),
        iterations: out.iterations,
        residual: out.residual,
    })
}

/// Two-sided comparison of the capacities across the pushforward.
#[derive(Clone, Debug)]
pub struct CapacityComparison {
    pub cbar_pushforward: f64,
    pub cp_ambient: f64,
    pub cp_pullback: f64,
    /// `cbar(P(E)) <= Cp(E)` up to tolerance.
    pub pushforward_bound_holds: bool,
    /// `cbar(P(E)) <= Cp(P^{-1}(P(E)))` up to tolerance.
    pub pullback_bound_holds: bool,
    pub slack_pushforward: f64,
    pub slack_pullback: f64,
}

impl CapacityComparison {
    pub fn to_json(&self) -> Value {
        json!({
            "cbar_pushforward": self.cbar_pushforward,
            "cp_ambient": self.cp_ambient,
            "cp_pullback": self.cp_pullback,
            "pushforward_bound_holds": self.pushforward_bound_holds,
            "pullback_bound_holds": self.pullback_bound_holds,
            "slack_pushforward": self.slack_pushforward,
            "slack_pullback": self.slack_pullback,
        })
    }
}

/// Compute both sides of the pushforward/pullback capacity inequalities for
/// an ambient set and report the slack at tolerance `tol`.
pub fn compare_capacities(
    dom: &GridDomain,
    census: &NodeCensus,
    ambient_set: &CellSet,
    p: f64,
    opts: &SolverOpts,
    tol: f64,
) -> Result<CapacityComparison> {
    let fwd = pushforward(dom, census, ambient_set);
    let cbar = capacity(&CapacityProblem {
        dom,
        census,
        target: fwd.clone(),
        kind: CapacityKind::PrimeEndCp,
        p,
        zero_set: None,
        opts: *opts,
    })?
    .value;
    let cp = capacity(&CapacityProblem {
        dom,
        census,
        target: PrimeEndSet {
            cells: ambient_set.clone(),
            nodes: Default::default(),
        },
        kind: CapacityKind::AmbientCp,
        p,
        zero_set: None,
        opts: *opts,
    })?
    .value;
    let pulled = pullback(dom, census, &fwd);
    let cp_pull = capacity(&CapacityProblem {
        dom,
        census,
        target: PrimeEndSet {
            cells: pulled,
            nodes: Default::default(),
        },
        kind: CapacityKind::AmbientCp,
        p,
        zero_set: None,
        opts: *opts,
    })?
    .value;
    Ok(CapacityComparison {
        cbar_pushforward: cbar,
        cp_ambient: cp,
        cp_pullback: cp_pull,
        pushforward_bound_holds: cbar <= cp + tol,
        pullback_bound_holds: cbar <= cp_pull + tol,
        slack_pushforward: cp - cbar,
        slack_pullback: cp_pull - cbar,
    })
}

/// One row of the capacity-axioms report.
#[derive(Clone, Debug)]
pub struct AxiomsRow {
    pub label: String,
    pub holds: bool,
    pub slack: f64,
}

#[derive(Clone, Debug)]
pub struct AxiomsReport {
    pub values: Vec<f64>,
    pub rows: Vec<AxiomsRow>,
}

impl AxiomsReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "values": self.values,
            "checks": self.rows.iter().map(|r| json!({
                "check": r.label,
                "holds": r.holds,
                "slack": r.slack,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Check monotonicity on nested pairs, finite subadditivity of the union,
/// and the measure lower bound, all at tolerance `tol`.
pub fn capacity_axioms_check(
    dom: &GridDomain,
    census: &NodeCensus,
    sets: &[PrimeEndSet],
    p: f64,
    opts: &SolverOpts,
    tol: f64,
) -> Result<AxiomsReport> {
    if sets.len() < 2 {
        return Err(Error::BadParameter("axioms check needs >= 2 sets".into()));
    }
    let eval = |target: PrimeEndSet| -> Result<f64> {
        Ok(capacity(&CapacityProblem {
            dom,
            census,
            target,
            kind: CapacityKind::PrimeEndCp,
            p,
            zero_set: None,
            opts: *opts,
        })?
        .value)
    };
    let values: Vec<f64> = sets
        .iter()
        .map(|s| eval(s.clone()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for i in 0..sets.len() {
        for j in 0..sets.len() {
            if i == j {
                continue;
            }
            let nested = sets[i].cells.is_subset_of(&sets[j].cells)
                && sets[i].nodes.is_subset(&sets[j].nodes);
            if nested {
                rows.push(AxiomsRow {
                    label: format!("monotone: set{i} inside set{j}"),
                    holds: values[i] <= values[j] + tol,
                    slack: values[j] - values[i],
                });
            }
        }
    }
    let mut union = sets[0].clone();
    for s in &sets[1..] {
        union.cells.union_with(&s.cells);
        union.nodes.extend(s.nodes.iter().copied());
    }
    let union_value = eval(union)?;
    let sum: f64 = values.iter().sum();
    rows.push(AxiomsRow {
        label: "subadditive: union vs sum".into(),
        holds: union_value <= sum + tol,
        slack: sum - union_value,
    });
    for (i, (s, &v)) in sets.iter().zip(&values).enumerate() {
        let mut inside = dom.empty_set();
        for idx in s.cells.iter() {
            if dom.in_mask_idx(idx) {
                inside.insert(idx);
            }
        }
        let mu = inside.len() as f64 * dom.h() * dom.h();
        rows.push(AxiomsRow {
            label: format!("measure bound: set{i}"),
            holds: mu <= v + tol,
            slack: v - mu,
        });
    }
    Ok(AxiomsReport { values, rows })
}

/// Outer-regularity probe: capacities of the open dilations of a target
/// decrease monotonically down to the target's own capacity.
pub fn dilation_monotonicity(
    dom: &GridDomain,
    census: &NodeCensus,
    target_cells: &CellSet,
    radii_desc: &[f64],
    p: f64,
    opts: &SolverOpts,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for &r in radii_desc {
        let mut inside = dom.empty_set();
        for idx in target_cells.iter() {
            if dom.in_mask_idx(idx) {
                inside.insert(idx);
            }
        }
        let grown = if r > 0.0 {
            dom.neighborhood(&inside, r)?
        } else {
            inside
        };
        out.push(
            capacity(&CapacityProblem {
                dom,
                census,
                target: PrimeEndSet {
                    cells: grown,
                    nodes: Default::default(),
                },
                kind: CapacityKind::PrimeEndCp,
                p,
                zero_set: None,
                opts: *opts,
            })?
            .value,
        );
    }
    Ok(out)
}

/// Separation helper reused by experiments: guards that capacity fixtures
/// stay away from degenerate targets.
pub fn assert_positive_separation(dom: &GridDomain, a: &CellSet, b: &CellSet) -> Result<f64> {
    let sep = maz_separation(dom, a, b)?;
    if sep <= 0.0 {
        return Err(Error::BadParameter("fixture sets touch".into()));
    }
    Ok(sep)
}
