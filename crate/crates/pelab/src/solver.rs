//! p-harmonic Dirichlet and obstacle solves on the node-augmented grid.
//!
//! Boundary data lives on boundary nodes and is imposed on each node's
//! contact cells, so the two sides of a slit carry independent data. The
//! `p = 2` case reduces to one conjugate-gradient solve of the graph Laplace
//! equation; general `p` runs damped iteratively reweighted least squares
//! with epsilon-regularized weights, each inner step being a weighted
//! quadratic (with a primal-dual active set loop when an obstacle binds).

use std::collections::BTreeMap;

use crate::energy::{graph_for, EdgeGraph, GridFunction, Support};
use crate::error::{Error, Result};
use crate::grid::{Cell, GridDomain};
use crate::prime_end::NodeCensus;

/// Solver configuration; the defaults are the contract the tests pin.
#[derive(Clone, Copy, Debug)]
pub struct SolverOpts {
    /// Relative p-energy decrease below which IRLS stops.
    pub energy_tol: f64,
    /// Relative iterate change below which IRLS stops.
    pub iter_tol: f64,
    /// IRLS iteration cap.
    pub max_iters: usize,
    /// Inner conjugate-gradient relative residual target.
    pub cg_tol: f64,
    /// Weight regularization is `epsilon_scale * h`.
    pub epsilon_scale: f64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            energy_tol: 1e-9,
            iter_tol: 1e-8,
            max_iters: 500,
            cg_tol: 1e-12,
            epsilon_scale: 1e-8,
        }
    }
}

/// Jacobi-preconditioned conjugate gradients for the weighted graph system.
///
/// Unknowns are the active cells without a fixed value; `edge_w` and
/// `vert_w` are the quadratic weights. Deterministic: fixed iteration and
/// accumulation order, no parallelism.
fn solve_quadratic(
    graph: &EdgeGraph,
    edge_w: &[f64],
    vert_w: &[f64],
    fixed: &[Option<f64>],
    warm: Option<&[f64]>,
    cg_tol: f64,
) -> (Vec<f64>, usize, f64) {
    let n = graph.n;
    let mut free_of = vec![usize::MAX; n];
    let mut full_of = Vec::new();
    for idx in 0..n {
        if graph.active[idx] && fixed[idx].is_none() {
            free_of[idx] = full_of.len();
            full_of.push(idx);
        }
    }
    let m = full_of.len();
    let mut out: Vec<f64> = (0..n).map(|i| fixed[i].unwrap_or(0.0)).collect();
    if m == 0 {
        return (out, 0, 0.0);
    }

    let mut diag = vec![0.0f64; m];
    let mut rhs = vec![0.0f64; m];
    let mut pairs: Vec<(u32, u32, f64)> = Vec::new();
    for (e, &(a, b)) in graph.edges.iter().enumerate() {
        let (a, b) = (a as usize, b as usize);
        let w = edge_w[e];
        match (free_of[a], free_of[b]) {
            (usize::MAX, usize::MAX) => {}
            (fa, usize::MAX) => {
                diag[fa] += w;
                rhs[fa] += w * fixed[b].unwrap_or(0.0);
            }
            (usize::MAX, fb) => {
                diag[fb] += w;
                rhs[fb] += w * fixed[a].unwrap_or(0.0);
            }
            (fa, fb) => {
                diag[fa] += w;
                diag[fb] += w;
                pairs.push((fa as u32, fb as u32, w));
            }
        }
    }
    for (k, &idx) in full_of.iter().enumerate() {
        diag[k] += vert_w[idx];
    }

    let matvec = |u: &[f64], y: &mut [f64]| {
        for k in 0..m {
            y[k] = diag[k] * u[k];
        }
        for &(a, b, w) in &pairs {
            y[a as usize] -= w * u[b as usize];
            y[b as usize] -= w * u[a as usize];
        }
    };

    let mut x: Vec<f64> = match warm {
        Some(w) => full_of.iter().map(|&idx| w[idx]).collect(),
        None => vec![0.0; m],
    };
    let mut ax = vec![0.0; m];
    matvec(&x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let precond: Vec<f64> = diag.iter().map(|&d| 1.0 / d.max(1e-300)).collect();
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(r, p)| r * p).collect();
    let mut pdir = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let bnorm = rhs.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-300);
    let max_iters = 4 * m + 200;
    let mut iters = 0;
    let mut ap = vec![0.0; m];
    while iters < max_iters {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= cg_tol * bnorm {
            break;
        }
        matvec(&pdir, &mut ap);
        let pap: f64 = pdir.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for k in 0..m {
            x[k] += alpha * pdir[k];
            r[k] -= alpha * ap[k];
        }
        for k in 0..m {
            z[k] = r[k] * precond[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz.max(1e-300);
        rz = rz_new;
        for k in 0..m {
            pdir[k] = z[k] + beta * pdir[k];
        }
        iters += 1;
    }
    let residual = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
    for (k, &idx) in full_of.iter().enumerate() {
        out[idx] = x[k];
    }
    (out, iters, residual)
}

/// Gradient of the weighted quadratic objective at one cell.
fn quadratic_gradient_at(
    graph: &EdgeGraph,
    edge_w: &[f64],
    vert_w: &[f64],
    u: &[f64],
    targets: &[usize],
) -> BTreeMap<usize, f64> {
    let mut grad: BTreeMap<usize, f64> = targets.iter().map(|&c| (c, vert_w[c] * u[c])).collect();
    for (e, &(a, b)) in graph.edges.iter().enumerate() {
        let (a, b) = (a as usize, b as usize);
        let w = edge_w[e];
        if let Some(g) = grad.get_mut(&a) {
            *g += w * (u[a] - u[b]);
        }
        if let Some(g) = grad.get_mut(&b) {
            *g += w * (u[b] - u[a]);
        }
    }
    grad
}

/// Weighted quadratic minimization with a lower obstacle, by a primal-dual
/// active set loop: cells pinned at the obstacle are released when their
/// multiplier turns negative, free cells dropping below the obstacle are
/// pinned.
#[allow(clippy::too_many_arguments)]
fn solve_quadratic_obstacle(
    graph: &EdgeGraph,
    edge_w: &[f64],
    vert_w: &[f64],
    fixed: &[Option<f64>],
    psi: &[f64],
    active: &mut Vec<bool>,
    warm: Option<&[f64]>,
    cg_tol: f64,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = graph.n;
    let tol = 1e-12;
    let mut total_iters = 0;
    let mut last = (Vec::new(), 0usize, 0.0f64);
    for _round in 0..100 {
        let mut fixed2 = fixed.to_vec();
        for c in 0..n {
            if active[c] && fixed[c].is_none() {
                fixed2[c] = Some(psi[c]);
            }
        }
        let (u, iters, residual) = solve_quadratic(graph, edge_w, vert_w, &fixed2, warm, cg_tol);
        total_iters += iters.max(1);
        let mut changed = false;
        // release pinned cells whose multiplier points the wrong way
        let pinned: Vec<usize> = (0..n)
            .filter(|&c| active[c] && fixed[c].is_none() && graph.active[c])
            .collect();
        let grads = quadratic_gradient_at(graph, edge_w, vert_w, &u, &pinned);
        for (&c, &g) in &grads {
            if g < -tol {
                active[c] = false;
                changed = true;
            }
        }
        // pin free cells that dropped below the obstacle
        for c in 0..n {
            if graph.active[c] && fixed[c].is_none() && !active[c] && u[c] < psi[c] - tol {
                active[c] = true;
                changed = true;
            }
        }
        last = (u, total_iters, residual);
        if !changed {
            return Ok(last);
        }
    }
    Err(Error::NonConvergence {
        iterations: last.1,
        residual: last.2,
        best: Box::new(last.0),
    })
}

pub(crate) struct PMinimizeOut {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
}

/// Minimize the p-energy (optionally with mass term and lower obstacle)
/// subject to fixed values.
///
/// `p = 2` is a single quadratic solve; otherwise damped IRLS with weights
/// `(du^2 + eps^2)^{(p-2)/2}`, `eps = epsilon_scale * h`, stopping when the
/// relative energy decrease or the relative iterate change is small.
pub(crate) fn minimize_p_energy(
    graph: &EdgeGraph,
    p: f64,
    fixed: &[Option<f64>],
    psi: Option<&[f64]>,
    include_mass: bool,
    opts: &SolverOpts,
    init: Option<Vec<f64>>,
) -> Result<PMinimizeOut> {
    assert!(p > 1.0);
    let h = graph.h;
    let base_edge = h.powf(2.0 - p);
    let h2 = h * h;
    let mass_base: Vec<f64> = graph
        .active
        .iter()
        .map(|&a| if a && include_mass { h2 } else { 0.0 })
        .collect();
    let mut active_set = vec![false; graph.n];

    let quad = |edge_w: &[f64],
                vert_w: &[f64],
                warm: Option<&[f64]>,
                active_set: &mut Vec<bool>,
                cg_tol: f64|
     -> Result<(Vec<f64>, usize, f64)> {
        match psi {
            None => Ok(solve_quadratic(graph, edge_w, vert_w, fixed, warm, cg_tol)),
            Some(psi) => solve_quadratic_obstacle(
                graph, edge_w, vert_w, fixed, psi, active_set, warm, cg_tol,
            ),
        }
    };

    // plain Laplacian weights (h^0 = 1 per edge); these are the exact p = 2
    // weights and double as the warm start for general p
    let edge_w2 = vec![1.0f64; graph.edges.len()];
    let vert_w2 = mass_base.clone();

    if p == 2.0 {
        let (values, iterations, residual) =
            quad(&edge_w2, &vert_w2, init.as_deref(), &mut active_set, opts.cg_tol)?;
        let energy = graph.p_energy(&values, p, include_mass);
        return Ok(PMinimizeOut {
            values,
            iterations,
            residual,
            energy,
        });
    }

    let mut u = match init {
        Some(u0) => u0,
        None => {
            quad(&edge_w2, &vert_w2, None, &mut active_set, opts.cg_tol.max(1e-10))?.0
        }
    };
    // impose the constraints on the start iterate
    for c in 0..graph.n {
        if let Some(v) = fixed[c] {
            u[c] = v;
        }
        if let Some(psi) = psi {
            if graph.active[c] && u[c] < psi[c] {
                u[c] = psi[c];
            }
        }
    }
    let eps2 = (opts.epsilon_scale * h).powi(2);
    let mut energy = graph.p_energy(&u, p, include_mass);
    let mut last_rel = f64::INFINITY;
    let mut cg_tol_k = opts.cg_tol.max(1e-10);
    for it in 1..=opts.max_iters {
        let edge_w: Vec<f64> = graph
            .edges
            .iter()
            .map(|&(a, b)| {
                let du = u[a as usize] - u[b as usize];
                base_edge * (du * du + eps2).powf((p - 2.0) / 2.0)
            })
            .collect();
        let vert_w: Vec<f64> = mass_base
            .iter()
            .zip(&u)
            .map(|(&mb, &v)| mb * (v * v + eps2).powf((p - 2.0) / 2.0))
            .collect();
        let (cand, _, _) = quad(&edge_w, &vert_w, Some(&u), &mut active_set, cg_tol_k)?;
        // damped step: backtrack on the true p-energy
        let mut theta = 1.0;
        let mut next = u.clone();
        let mut next_energy;
        loop {
            for c in 0..graph.n {
                next[c] = u[c] + theta * (cand[c] - u[c]);
            }
            next_energy = graph.p_energy(&next, p, include_mass);
            if next_energy <= energy || theta < 1e-6 {
                break;
            }
            theta *= 0.5;
        }
        let du_max = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = next.iter().map(|v| v.abs()).fold(1.0, f64::max);
        let rel_energy = (energy - next_energy).max(0.0) / next_energy.abs().max(1e-300);
        u = next;
        energy = next_energy;
        last_rel = rel_energy;
        cg_tol_k = opts.cg_tol.max(1e-4 * rel_energy).min(1e-8);
        if rel_energy < opts.energy_tol || du_max / scale < opts.iter_tol {
            return Ok(PMinimizeOut {
                values: u,
                iterations: it,
                residual: rel_energy,
                energy,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        residual: last_rel,
        best: Box::new(u),
    })
}

/// Boundary datum rules; rules are evaluated at the imposition site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DataRule {
    X,
    Y,
    Const(f64),
}

impl DataRule {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            DataRule::X => x,
            DataRule::Y => y,
            DataRule::Const(c) => *c,
        }
    }
}

/// Boundary data on nodes: an optional coordinate rule, per-node overrides,
/// and additive per-node bumps (used by perturbation experiments).
#[derive(Clone, Debug, Default)]
pub struct BoundaryData {
    pub rule: Option<DataRule>,
    pub per_node: BTreeMap<usize, f64>,
    pub bump: BTreeMap<usize, f64>,
}

impl BoundaryData {
    pub fn from_rule(rule: DataRule) -> Self {
        BoundaryData {
            rule: Some(rule),
            ..Default::default()
        }
    }

    pub fn from_map(per_node: BTreeMap<usize, f64>) -> Self {
        BoundaryData {
            per_node,
            ..Default::default()
        }
    }

    pub fn with_bump(mut self, node: usize, delta: f64) -> Self {
        *self.bump.entry(node).or_insert(0.0) += delta;
        self
    }
}

/// Dirichlet problem: data on resolved boundary nodes, exponent `p`.
pub struct DirichletProblem<'a> {
    pub dom: &'a GridDomain,
    pub census: &'a NodeCensus,
    pub data: BoundaryData,
    pub p: f64,
    pub opts: SolverOpts,
}

impl<'a> DirichletProblem<'a> {
    pub fn new(dom: &'a GridDomain, census: &'a NodeCensus, data: BoundaryData, p: f64) -> Self {
        DirichletProblem {
            dom,
            census,
            data,
            p,
            opts: SolverOpts::default(),
        }
    }

    /// Translate node data into fixed contact-cell values. Nodes without a
    /// datum impose nothing; cells claimed by several nodes average their
    /// claims.
    pub(crate) fn fixed_values(&self) -> Result<Vec<Option<f64>>> {
        if self.p <= 1.0 || !self.p.is_finite() {
            return Err(Error::BadParameter(format!("p must be > 1, got {}", self.p)));
        }
        let n = self.dom.n_cells();
        let mut sum = vec![0.0f64; n];
        let mut count = vec![0u32; n];
        let mut any = false;
        for (k, node) in self.census.nodes.iter().enumerate() {
            if !node.resolved {
                continue;
            }
            let per_node = self.data.per_node.get(&k).copied();
            if per_node.is_none() && self.data.rule.is_none() {
                continue;
            }
            let bump = self.data.bump.get(&k).copied().unwrap_or(0.0);
            for &c in &node.contact_cells {
                let idx = self.dom.idx(c);
                let base = match per_node {
                    Some(v) => v,
                    None => {
                        let (x, y) = self.dom.center(c);
                        self.data.rule.unwrap().eval(x, y)
                    }
                };
                sum[idx] += base + bump;
                count[idx] += 1;
                any = true;
            }
        }
        if !any {
            return Err(Error::NoBoundaryData);
        }
        Ok((0..n)
            .map(|idx| {
                if count[idx] > 0 {
                    Some(sum[idx] / count[idx] as f64)
                } else {
                    None
                }
            })
            .collect())
    }
}

/// Solve the Dirichlet problem: unique minimizer of the edge p-energy among
/// functions with the given node data.
pub fn solve_dirichlet(prob: &DirichletProblem) -> Result<GridFunction> {
    solve_dirichlet_from(prob, None)
}

/// Same, but starting IRLS from a caller-provided iterate.
pub fn solve_dirichlet_from(
    prob: &DirichletProblem,
    init: Option<Vec<f64>>,
) -> Result<GridFunction> {
    let fixed = prob.fixed_values()?;
    let graph = graph_for(prob.dom, Support::Omega);
    let out = minimize_p_energy(&graph, prob.p, &fixed, None, false, &prob.opts, init)?;
    let mut f = GridFunction::from_values(prob.dom, Support::Omega, out.values);
    f.node_values = Some(effective_node_values(prob));
    Ok(f)
}

fn effective_node_values(prob: &DirichletProblem) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for (k, node) in prob.census.nodes.iter().enumerate() {
        if !node.resolved {
            continue;
        }
        let base = match prob.data.per_node.get(&k) {
            Some(&v) => Some(v),
            None => prob.data.rule.map(|r| {
                let (x, y) = prob.dom.center(node.anchor);
                r.eval(x, y)
            }),
        };
        if let Some(v) = base {
            out.insert(k, v + prob.data.bump.get(&k).copied().unwrap_or(0.0));
        }
    }
    out
}

/// Obstacle problem over a Dirichlet base: minimize among functions staying
/// above `psi`.
pub struct ObstacleProblem<'a> {
    pub base: DirichletProblem<'a>,
    /// Lower obstacle per cell; `NEG_INFINITY` marks an absent obstacle.
    pub psi: Vec<f64>,
}

pub fn solve_obstacle(prob: &ObstacleProblem) -> Result<GridFunction> {
    let fixed = prob.base.fixed_values()?;
    for idx in 0..prob.base.dom.n_cells() {
        if let Some(v) = fixed[idx] {
            if v < prob.psi[idx] - 1e-12 {
                return Err(Error::InfeasibleObstacle {
                    cell: prob.base.dom.cell(idx),
                });
            }
        }
    }
    let graph = graph_for(prob.base.dom, Support::Omega);
    let out = minimize_p_energy(
        &graph,
        prob.base.p,
        &fixed,
        Some(&prob.psi),
        false,
        &prob.base.opts,
        None,
    )?;
    Ok(GridFunction::from_values(
        prob.base.dom,
        Support::Omega,
        out.values,
    ))
}

/// Result of the discrete comparison-principle check `v <= u + tol`.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonReport {
    pub max_violation: f64,
    pub holds: bool,
}

/// Assert the comparison principle between a dominating and a dominated
/// solve; the report carries the worst interior violation.
pub fn comparison_check(
    dom: &GridDomain,
    upper: &GridFunction,
    lower: &GridFunction,
    tol: f64,
) -> ComparisonReport {
    let mut worst = f64::NEG_INFINITY;
    for c in dom.true_cells() {
        worst = worst.max(lower.value(dom, c) - upper.value(dom, c));
    }
    ComparisonReport {
        max_violation: worst.max(0.0),
        holds: worst <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate, DomainKind, DomainSpec};
    use crate::prime_end::build_boundary_nodes;

    fn square(h: f64) -> GridDomain {
        generate(&DomainSpec {
            kind: DomainKind::Square,
            h,
        })
        .unwrap()
        .0
    }

    fn strip(n: usize) -> GridDomain {
        let mut rows = vec!["0".repeat(n + 2)];
        rows.push(format!("0{}0", "1".repeat(n)));
        rows.push("0".repeat(n + 2));
        generate(&DomainSpec {
            kind: DomainKind::Custom { rows },
            h: 1.0 / (n + 1) as f64,
        })
        .unwrap()
        .0
    }

    /// End nodes of a 1xN strip (smallest/largest anchor x).
    fn strip_end_nodes(dom: &GridDomain, census: &NodeCensus) -> (usize, usize) {
        let left = census
            .ids_where(dom, |x, y| x < dom.h() / 2.0 && (y - dom.h()).abs() < 1e-12)[0];
        let right = census.ids_where(dom, |x, y| {
            x > (dom.nx() - 1) as f64 * dom.h() - dom.h() / 2.0 && (y - dom.h()).abs() < 1e-12
        })[0];
        (left, right)
    }

    #[test]
    fn constant_data_gives_constant_solution() {
        let dom = square(1.0 / 16.0);
        let census = build_boundary_nodes(&dom);
        for p in [1.5, 2.0, 3.0] {
            let prob = DirichletProblem::new(
                &dom,
                &census,
                BoundaryData::from_rule(DataRule::Const(0.7)),
                p,
            );
            let u = solve_dirichlet(&prob).unwrap();
            for c in dom.true_cells() {
                assert!((u.value(&dom, c) - 0.7).abs() < 1e-9, "p={p} cell {c:?}");
            }
        }
    }

    #[test]
    fn coordinate_data_is_reproduced_exactly_for_p2() {
        let dom = square(1.0 / 64.0);
        let census = build_boundary_nodes(&dom);
        let mut prob =
            DirichletProblem::new(&dom, &census, BoundaryData::from_rule(DataRule::X), 2.0);
        prob.opts.cg_tol = 1e-14;
        let u = solve_dirichlet(&prob).unwrap();
        let mut worst = 0.0f64;
        for c in dom.true_cells() {
            let (x, _) = dom.center(c);
            worst = worst.max((u.value(&dom, c) - x).abs());
        }
        assert!(worst <= 1e-10, "max error {worst}");
    }

    #[test]
    fn strip_ramps_are_affine_for_every_p() {
        let dom = strip(9);
        let census = build_boundary_nodes(&dom);
        let (left, right) = strip_end_nodes(&dom, &census);
        for p in [1.5, 2.0, 3.0] {
            let mut data = BTreeMap::new();
            data.insert(left, 0.0);
            data.insert(right, 1.0);
            let prob = DirichletProblem::new(&dom, &census, BoundaryData::from_map(data), p);
            let u = solve_dirichlet(&prob).unwrap();
            let mut worst = 0.0f64;
            for (k, c) in dom.true_cells().enumerate() {
                let want = k as f64 / 8.0;
                worst = worst.max((u.value(&dom, c) - want).abs());
            }
            assert!(worst <= 1e-7, "p={p} ramp error {worst}");
        }
    }

    #[test]
    fn maximum_principle_on_fixtures() {
        let h = 1.0 / 32.0;
        for spec in [DomainKind::Square, DomainKind::Slit, DomainKind::Comb { max_tooth: 4 }] {
            let dom = generate(&DomainSpec { kind: spec, h }).unwrap().0;
            let census = build_boundary_nodes(&dom);
            for p in [1.5, 2.0, 3.0] {
                let prob = DirichletProblem::new(
                    &dom,
                    &census,
                    BoundaryData::from_rule(DataRule::Y),
                    p,
                );
                let u = solve_dirichlet(&prob).unwrap();
                for c in dom.true_cells() {
                    let v = u.value(&dom, c);
                    assert!(v >= -1e-7 && v <= 1.0 + 1e-7, "p={p} value {v}");
                }
            }
        }
    }

    #[test]
    fn solutions_unique_across_initial_iterates() {
        let dom = square(1.0 / 16.0);
        let census = build_boundary_nodes(&dom);
        let prob = DirichletProblem::new(&dom, &census, BoundaryData::from_rule(DataRule::X), 3.0);
        let a = solve_dirichlet(&prob).unwrap();
        let skewed = vec![0.25; dom.n_cells()];
        let b = solve_dirichlet_from(&prob, Some(skewed)).unwrap();
        assert!(a.max_diff(&dom, &b) < 1e-7);
    }

    #[test]
    fn monotone_data_gives_monotone_solutions() {
        let dom = square(1.0 / 16.0);
        let census = build_boundary_nodes(&dom);
        for p in [1.5, 2.0, 3.0] {
            let pf = DirichletProblem::new(&dom, &census, BoundaryData::from_rule(DataRule::Y), p);
            let uf = solve_dirichlet(&pf).unwrap();
            let mut g = BoundaryData::from_rule(DataRule::Y);
            for k in 0..census.len() {
                g = g.with_bump(k, 0.1);
            }
            let pg = DirichletProblem::new(&dom, &census, g, p);
            let ug = solve_dirichlet(&pg).unwrap();
            let rep = comparison_check(&dom, &ug, &uf, 1e-7);
            assert!(rep.holds, "p={p} violation {}", rep.max_violation);
            // and the gap never exceeds the data gap
            assert!(ug.max_diff(&dom, &uf) <= 0.1 + 1e-7);
        }
    }

    #[test]
    fn perturbing_one_node_keeps_interior_ordering() {
        let h = 1.0 / 32.0;
        let dom = generate(&DomainSpec {
            kind: DomainKind::Slit,
            h,
        })
        .unwrap()
        .0;
        let census = build_boundary_nodes(&dom);
        let base = BoundaryData::from_rule(DataRule::Y);
        let bumped = base.clone().with_bump(0, 0.5);
        let pu = DirichletProblem::new(&dom, &census, bumped, 2.0);
        let pl = DirichletProblem::new(&dom, &census, base, 2.0);
        let u = solve_dirichlet(&pu).unwrap();
        let l = solve_dirichlet(&pl).unwrap();
        assert!(comparison_check(&dom, &u, &l, 1e-9).holds);
    }

    #[test]
    fn inactive_obstacle_equals_dirichlet() {
        let dom = square(1.0 / 16.0);
        let census = build_boundary_nodes(&dom);
        for p in [2.0, 3.0] {
            let prob = DirichletProblem::new(&dom, &census, BoundaryData::from_rule(DataRule::Y), p);
            let plain = solve_dirichlet(&prob).unwrap();
            let obst = ObstacleProblem {
                base: DirichletProblem::new(
                    &dom,
                    &census,
                    BoundaryData::from_rule(DataRule::Y),
                    p,
                ),
                psi: vec![f64::NEG_INFINITY; dom.n_cells()],
            };
            let constrained = solve_obstacle(&obst).unwrap();
            assert!(plain.max_diff(&dom, &constrained) < 1e-9, "p={p}");
        }
    }

    #[test]
    fn saturated_obstacle_returns_the_obstacle() {
        let dom = square(1.0 / 16.0);
        let census = build_boundary_nodes(&dom);
        let obst = ObstacleProblem {
            base: DirichletProblem::new(
                &dom,
                &census,
                BoundaryData::from_rule(DataRule::Const(1.0)),
                2.0,
            ),
            psi: vec![1.0; dom.n_cells()],
        };
        let u = solve_obstacle(&obst).unwrap();
        for c in dom.true_cells() {
            assert!((u.value(&dom, c) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn infeasible_obstacle_names_a_cell() {
        let dom = strip(9);
        let census = build_boundary_nodes(&dom);
        let (left, right) = strip_end_nodes(&dom, &census);
        let mut data = BTreeMap::new();
        data.insert(left, 0.0);
        data.insert(right, 1.0);
        let obst = ObstacleProblem {
            base: DirichletProblem::new(&dom, &census, BoundaryData::from_map(data), 2.0),
            psi: vec![0.75; dom.n_cells()],
        };
        let err = solve_obstacle(&obst).unwrap_err();
        assert!(matches!(err, Error::InfeasibleObstacle { .. }));
    }

    #[test]
    fn obstacle_complementarity_on_strip() {
        // data 0 and 1 at the ends, obstacle 0.75 away from the data cells
        let dom = strip(9);
        let census = build_boundary_nodes(&dom);
        let (left, right) = strip_end_nodes(&dom, &census);
        let mut data = BTreeMap::new();
        data.insert(left, 0.0);
        data.insert(right, 1.0);
        let mut psi = vec![f64::NEG_INFINITY; dom.n_cells()];
        for (k, c) in dom.true_cells().enumerate() {
            if k != 0 && k != 8 {
                psi[dom.idx(c)] = 0.75;
            }
        }
        let obst = ObstacleProblem {
            base: DirichletProblem::new(&dom, &census, BoundaryData::from_map(data), 2.0),
            psi: psi.clone(),
        };
        let u = solve_obstacle(&obst).unwrap();
        let cells: Vec<Cell> = dom.true_cells().collect();
        for (k, &c) in cells.iter().enumerate() {
            let v = u.value(&dom, c);
            assert!(v >= 0.75 - 1e-10 || k == 0 || k == 8);
            if k > 0 && k < 8 && v > psi[dom.idx(c)] + 1e-8 {
                // discrete stationarity away from the contact set
                let lap = 2.0 * v
                    - u.value(&dom, cells[k - 1])
                    - u.value(&dom, cells[k + 1]);
                assert!(lap.abs() < 1e-8, "residual {lap} at cell {k}");
            }
        }
    }

    #[test]
    fn no_data_is_rejected() {
        let dom = square(1.0 / 8.0);
        let census = build_boundary_nodes(&dom);
        let prob = DirichletProblem::new(&dom, &census, BoundaryData::default(), 2.0);
        assert!(matches!(
            solve_dirichlet(&prob).unwrap_err(),
            Error::NoBoundaryData
        ));
    }
}
