//! Discrete Mazurkiewicz completion and chain machinery.
//!
//! A boundary anchor is a complement cell adjacent to the mask. Each locally
//! distinct way of approaching an anchor from inside yields one
//! [`BoundaryNode`]; interior slit anchors therefore carry two nodes, one per
//! side, while the slit tip carries one because the approach wraps around it.
//! Nodes are the discrete singleton prime ends, and boundary data in the
//! solver lives on them rather than on ambient boundary cells.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{Cell, CellSet, GridDomain};
use crate::metrics::{maz_neighborhood, maz_separation};

/// One point of the completed boundary: an anchor plus a local approach side.
#[derive(Clone, Debug)]
pub struct BoundaryNode {
    pub anchor: Cell,
    pub approach_id: usize,
    /// Ball radius at which the local component count stabilized.
    pub stable_radius: f64,
    /// Inside 4-neighbors of the anchor belonging to this approach side.
    pub contact_cells: Vec<Cell>,
    /// Approach component at the stable radius.
    pub approach: CellSet,
    /// Nodes with an unstable component count are kept for reporting but
    /// excluded from the Dirichlet boundary.
    pub resolved: bool,
}

/// All boundary nodes of a domain, in deterministic anchor order.
#[derive(Clone, Debug, Default)]
pub struct NodeCensus {
    pub nodes: Vec<BoundaryNode>,
}

impl NodeCensus {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes_at(&self, anchor: Cell) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.anchor == anchor)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn resolved_ids(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.resolved)
            .map(|(k, _)| k)
            .collect()
    }

    /// Node ids whose anchor center satisfies a coordinate predicate.
    pub fn ids_where<F: Fn(f64, f64) -> bool>(&self, dom: &GridDomain, pred: F) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                let (x, y) = dom.center(n.anchor);
                pred(x, y)
            })
            .map(|(k, _)| k)
            .collect()
    }

    pub fn to_json(&self, dom: &GridDomain) -> Value {
        let items: Vec<Value> = self
            .nodes
            .iter()
            .map(|n| {
                let (x, y) = dom.center(n.anchor);
                json!({
                    "anchor": [n.anchor.i, n.anchor.j],
                    "anchor_xy": [x, y],
                    "approach_id": n.approach_id,
                    "stable_radius": n.stable_radius,
                    "resolved": n.resolved,
                    "contacts": n.contact_cells.len(),
                })
            })
            .collect();
        json!(items)
    }
}

/// Approach components of `anchor` inside `mask & B(anchor, rho)`: the
/// 4-connected ball pieces containing at least one contact cell, ordered by
/// their smallest cell index.
fn approach_components(dom: &GridDomain, anchor: Cell, rho: f64) -> Vec<CellSet> {
    let contacts = dom.anchor_contacts(anchor);
    let (ax, ay) = dom.center(anchor);
    let r2 = rho * rho * (1.0 + 1e-12);
    let pad = (rho / dom.h()).ceil() as isize + 1;
    let mut ball = dom.empty_set();
    for dj in -pad..=pad {
        for di in -pad..=pad {
            if let Some(c) = dom.step(anchor, di, dj) {
                if dom.in_mask(c) {
                    let (x, y) = dom.center(c);
                    if (x - ax).powi(2) + (y - ay).powi(2) <= r2 {
                        ball.insert(dom.idx(c));
                    }
                }
            }
        }
    }
    let mut comps: Vec<CellSet> = Vec::new();
    for &c in &contacts {
        if comps.iter().any(|s| s.contains(dom.idx(c))) {
            continue;
        }
        comps.push(dom.component_of_in(&ball, c));
    }
    comps.sort_by_key(|s| s.iter().next().unwrap_or(usize::MAX));
    comps
}

/// Construct the boundary nodes of a domain.
///
/// The component count around each anchor is computed at radii `2h, 3h, 4h`
/// and must agree across the last two; anchors that fail are flagged
/// unresolved and excluded from the Dirichlet boundary.
pub fn build_boundary_nodes(dom: &GridDomain) -> NodeCensus {
    let h = dom.h();
    let mut nodes = Vec::new();
    for anchor in dom.anchors() {
        let c2 = approach_components(dom, anchor, 2.0 * h);
        let c3 = approach_components(dom, anchor, 3.0 * h);
        let c4 = approach_components(dom, anchor, 4.0 * h);
        let resolved = c3.len() == c4.len();
        let (stable_radius, comps) = if resolved && c2.len() == c3.len() {
            (2.0 * h, c2)
        } else if resolved {
            (3.0 * h, c3)
        } else {
            (4.0 * h, c4)
        };
        for (approach_id, comp) in comps.into_iter().enumerate() {
            let contact_cells: Vec<Cell> = dom
                .anchor_contacts(anchor)
                .into_iter()
                .filter(|&c| comp.contains(dom.idx(c)))
                .collect();
            nodes.push(BoundaryNode {
                anchor,
                approach_id,
                stable_radius,
                contact_cells,
                approach: comp,
                resolved,
            });
        }
    }
    NodeCensus { nodes }
}

/// Nested levels with positively separated relative boundaries.
#[derive(Clone, Debug)]
pub struct Chain {
    pub levels: Vec<CellSet>,
    /// Mazurkiewicz separation lower bound between consecutive relative
    /// boundaries.
    pub separations: Vec<f64>,
    /// Anchors adjacent to the deepest level.
    pub impression_cells: Vec<Cell>,
    /// Neighborhood radii used by the constructing schedule, when known.
    pub level_radii: Option<Vec<f64>>,
}

impl Chain {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn to_json(&self, dom: &GridDomain) -> Value {
        json!({
            "levels": self.levels.iter().map(|l| l.iter().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "separations": self.separations,
            "impression": self
                .impression_cells
                .iter()
                .map(|c| vec![c.i, c.j])
                .collect::<Vec<_>>(),
            "impression_xy": self
                .impression_cells
                .iter()
                .map(|&c| {
                    let (x, y) = dom.center(c);
                    vec![x, y]
                })
                .collect::<Vec<_>>(),
        })
    }
}

/// Anchors (complement cells with inside contact) 4-adjacent to a set.
pub fn impression_anchors(dom: &GridDomain, set: &CellSet) -> Vec<Cell> {
    let mut out = BTreeSet::new();
    for idx in set.iter() {
        let c = dom.cell(idx);
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if let Some(n) = dom.step(c, di, dj) {
                if !dom.in_mask(n) && !dom.anchor_contacts(n).is_empty() {
                    out.insert(n);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Check the chain conditions on a nested list of cell sets.
///
/// (a) each level is connected, touches the boundary and contains the next;
/// (b) consecutive relative boundaries have positive Mazurkiewicz
/// separation; (c) the deepest level is adjacent to the boundary, which is
/// the finite-depth surrogate for the impression lying on it.
pub fn validate_chain(dom: &GridDomain, levels: Vec<CellSet>) -> Result<Chain> {
    if levels.is_empty() {
        return Err(Error::BadParameter("chain has no levels".into()));
    }
    for (k, level) in levels.iter().enumerate() {
        if level.is_empty() || !dom.is_connected_set(level) {
            return Err(Error::ChainRejected {
                level: k,
                condition: 'a',
                detail: "level is empty or disconnected".into(),
            });
        }
        let touches = level.iter().any(|idx| {
            let c = dom.cell(idx);
            [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .filter_map(|&(di, dj)| dom.step(c, di, dj))
                .any(|n| !dom.in_mask(n))
        });
        if !touches {
            return Err(Error::ChainRejected {
                level: k,
                condition: 'a',
                detail: "level closure does not meet the boundary".into(),
            });
        }
        if k + 1 < levels.len() && !levels[k + 1].is_subset_of(level) {
            return Err(Error::ChainRejected {
                level: k + 1,
                condition: 'a',
                detail: "levels are not nested".into(),
            });
        }
    }
    let mut separations = Vec::new();
    for k in 0..levels.len().saturating_sub(1) {
        let ba = dom.relative_boundary(&levels[k]);
        let bb = dom.relative_boundary(&levels[k + 1]);
        let sep = if ba.is_empty() || bb.is_empty() {
            // a level with empty relative boundary fills a whole component;
            // identical consecutive levels are caught below
            f64::INFINITY
        } else {
            maz_separation(dom, &ba, &bb)?
        };
        if sep <= 0.0 || levels[k] == levels[k + 1] {
            return Err(Error::ChainRejected {
                level: k + 1,
                condition: 'b',
                detail: "consecutive relative boundaries are not separated".into(),
            });
        }
        separations.push(sep);
    }
    let impression_cells = impression_anchors(dom, levels.last().unwrap());
    if impression_cells.is_empty() {
        return Err(Error::ChainRejected {
            level: levels.len() - 1,
            condition: 'c',
            detail: "no boundary anchor is adjacent to the deepest level".into(),
        });
    }
    Ok(Chain {
        levels,
        separations,
        impression_cells,
        level_radii: None,
    })
}

/// Does chain `a` divide chain `b`: every level of `b` contains some level
/// of `a`.
pub fn divides(a: &Chain, b: &Chain) -> bool {
    b.levels
        .iter()
        .all(|f| a.levels.iter().any(|e| e.is_subset_of(f)))
}

/// Mutual division.
pub fn equivalent(a: &Chain, b: &Chain) -> bool {
    divides(a, b) && divides(b, a)
}

/// Chain up to equivalence, flagged singleton when its impression shrinks to
/// one spot.
#[derive(Clone, Debug)]
pub struct End {
    pub representative: Chain,
    pub singleton: bool,
    /// Census id of the matching boundary node, when singleton.
    pub node: Option<usize>,
}

fn anchors_diameter(dom: &GridDomain, anchors: &[Cell]) -> f64 {
    let mut best = 0.0f64;
    for (k, &a) in anchors.iter().enumerate() {
        for &b in &anchors[k + 1..] {
            best = best.max(dom.dist(a, b));
        }
    }
    best
}

fn anchor_clusters(dom: &GridDomain, anchors: &[Cell]) -> usize {
    let mut remaining: BTreeSet<Cell> = anchors.iter().copied().collect();
    let mut clusters = 0;
    while let Some(&start) = remaining.iter().next() {
        clusters += 1;
        let mut stack = vec![start];
        remaining.remove(&start);
        while let Some(c) = stack.pop() {
            let near: Vec<Cell> = remaining
                .iter()
                .copied()
                .filter(|&o| c.i.abs_diff(o.i) <= 1 && c.j.abs_diff(o.j) <= 1)
                .collect();
            for o in near {
                remaining.remove(&o);
                stack.push(o);
            }
        }
    }
    clusters
}

/// Decide the singleton flag of a chain and bind the matching node.
///
/// At fixed spacing a true point impression shows up as an anchor set that
/// keeps shrinking with the level, while the stretched ends (double comb)
/// keep a level-independent anchor set. The flag compares the deepest
/// impression diameter against the first one.
pub fn end_of_chain(dom: &GridDomain, chain: Chain, census: &NodeCensus) -> End {
    let first_imp = impression_anchors(dom, &chain.levels[0]);
    let last_imp = &chain.impression_cells;
    let d_first = anchors_diameter(dom, &first_imp);
    let d_last = anchors_diameter(dom, last_imp);
    let shrank = d_last <= 0.75 * d_first || d_last <= 6.0 * dom.h();
    let singleton = shrank && anchor_clusters(dom, last_imp) == 1;
    let node = if singleton {
        let deepest = chain.levels.last().unwrap();
        census
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| last_imp.contains(&n.anchor))
            .map(|(k, n)| {
                let mut overlap = n.approach.clone();
                overlap.intersect_with(deepest);
                (overlap.len(), k)
            })
            .filter(|(overlap, _)| *overlap > 0)
            .max_by_key(|&(overlap, k)| (overlap, usize::MAX - k))
            .map(|(_, k)| k)
    } else {
        None
    };
    End {
        representative: chain,
        singleton,
        node,
    }
}

/// Shortest 4-connected path between two inside cells, for building curves.
fn bfs_path(dom: &GridDomain, from: Cell, to: Cell) -> Result<Vec<Cell>> {
    if from == to {
        return Ok(vec![from]);
    }
    let mut prev = vec![usize::MAX; dom.n_cells()];
    let mut seen = vec![false; dom.n_cells()];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(dom.idx(from));
    seen[dom.idx(from)] = true;
    while let Some(idx) = queue.pop_front() {
        if idx == dom.idx(to) {
            break;
        }
        for n in dom.neighbors4(dom.cell(idx)) {
            let nidx = dom.idx(n);
            if !seen[nidx] {
                seen[nidx] = true;
                prev[nidx] = idx;
                queue.push_back(nidx);
            }
        }
    }
    if !seen[dom.idx(to)] {
        return Err(Error::BadParameter(format!(
            "no path between ({},{}) and ({},{})",
            from.i, from.j, to.i, to.j
        )));
    }
    let mut path = vec![to];
    let mut idx = dom.idx(to);
    while idx != dom.idx(from) {
        idx = prev[idx];
        path.push(dom.cell(idx));
    }
    path.reverse();
    Ok(path)
}

/// Join waypoints (given in coordinates) into a 4-connected cell polyline.
pub fn rasterize_polyline(dom: &GridDomain, waypoints: &[(f64, f64)]) -> Result<Vec<Cell>> {
    if waypoints.is_empty() {
        return Err(Error::BadParameter("polyline needs waypoints".into()));
    }
    let snapped: Vec<Cell> = waypoints
        .iter()
        .map(|&(x, y)| {
            dom.snap(x, y)
                .ok_or_else(|| Error::BadParameter("empty domain".into()))
        })
        .collect::<Result<_>>()?;
    let mut cells = vec![snapped[0]];
    for pair in snapped.windows(2) {
        let leg = bfs_path(dom, pair[0], pair[1])?;
        cells.extend_from_slice(&leg[1..]);
    }
    Ok(cells)
}

/// Build the chain of a curve: levels are the connected pieces of shrinking
/// Mazurkiewicz neighborhoods of shrinking curve tails.
///
/// The curve must head to the boundary; a final cell farther than `2h` from
/// every anchor is rejected as an interior cluster point.
pub fn chain_of_curve(dom: &GridDomain, polyline: &[Cell]) -> Result<Chain> {
    if polyline.is_empty() {
        return Err(Error::BadParameter("polyline is empty".into()));
    }
    for pair in polyline.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.i.abs_diff(b.i) + a.j.abs_diff(b.j) > 1 {
            return Err(Error::BadParameter(
                "polyline steps must be 4-adjacent".into(),
            ));
        }
    }
    for &c in polyline {
        if !dom.in_mask(c) {
            return Err(Error::CellOutsideMask { cell: c });
        }
    }
    let h = dom.h();
    let end = *polyline.last().unwrap();
    let near_boundary = dom
        .anchors()
        .iter()
        .any(|&a| dom.dist(a, end) <= 2.0 * h + 1e-12);
    if !near_boundary {
        return Err(Error::InteriorClusterPoint);
    }

    let total_len = (polyline.len() - 1) as f64 * h;
    let extent = (dom.nx().max(dom.ny()) - 1) as f64 * h;
    let mut radius = extent / 4.0;
    let mut levels: Vec<CellSet> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    while radius >= 4.0 * h - 1e-12 {
        let keep_tail = 4.0 * radius;
        let start = if total_len <= keep_tail {
            0
        } else {
            polyline.len() - 1 - (keep_tail / h).floor() as usize
        };
        let tail = dom.set_from_cells(&polyline[start..]);
        let neighborhood = maz_neighborhood(dom, &tail, radius)?;
        let level = dom.component_of_in(&neighborhood, end);
        let acceptable = !level.is_empty()
            && levels.last().map_or(true, |prev| {
                level != *prev && level.is_subset_of(prev) && {
                    let ba = dom.relative_boundary(prev);
                    let bb = dom.relative_boundary(&level);
                    ba.is_empty()
                        || bb.is_empty()
                        || maz_separation(dom, &ba, &bb).map_or(false, |s| s > 0.0)
                }
            });
        if acceptable {
            levels.push(level);
            radii.push(radius);
        }
        radius /= 2.0;
    }
    if levels.is_empty() {
        return Err(Error::BadParameter(
            "curve produced no usable chain level".into(),
        ));
    }
    let mut chain = validate_chain(dom, levels)?;
    chain.level_radii = Some(radii);
    Ok(chain)
}

/// Nested ball-piece chain of a boundary node, radii `6h` then `3h`.
pub fn node_chain(dom: &GridDomain, node: &BoundaryNode) -> Result<Chain> {
    let seed = *node
        .contact_cells
        .first()
        .ok_or_else(|| Error::BadParameter("node has no contact cells".into()))?;
    let mut levels = Vec::new();
    for rho in [6.0 * dom.h(), 3.0 * dom.h()] {
        let comps = approach_components(dom, node.anchor, rho);
        let level = comps
            .into_iter()
            .find(|c| c.contains(dom.idx(seed)))
            .ok_or_else(|| Error::BadParameter("approach component vanished".into()))?;
        levels.push(level);
    }
    validate_chain(dom, levels)
}

/// Set in the node-augmented closure: inside cells plus node ids.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimeEndSet {
    pub cells: CellSet,
    pub nodes: BTreeSet<usize>,
}

/// Pushforward of an ambient cell set: its inside part plus every node whose
/// anchor lies in the set. Monotone, and open sets map to open sets.
pub fn pushforward(dom: &GridDomain, census: &NodeCensus, ambient: &CellSet) -> PrimeEndSet {
    let mut cells = ambient.clone();
    let mut mask_only = dom.empty_set();
    for idx in cells.iter() {
        if dom.in_mask_idx(idx) {
            mask_only.insert(idx);
        }
    }
    cells = mask_only;
    let nodes = census
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| ambient.contains(dom.idx(n.anchor)))
        .map(|(k, _)| k)
        .collect();
    PrimeEndSet { cells, nodes }
}

/// Pullback of a node-augmented set: its cells plus the anchors of its nodes.
pub fn pullback(dom: &GridDomain, census: &NodeCensus, set: &PrimeEndSet) -> CellSet {
    let mut out = set.cells.clone();
    for &k in &set.nodes {
        out.insert(dom.idx(census.nodes[k].anchor));
    }
    out
}

/// Per-level report row of the density diagnostic.
#[derive(Clone, Debug)]
pub struct DensityLevel {
    pub level: usize,
    pub nodes_meeting_level: usize,
    pub nearest_node_distance: f64,
}

/// For each chain level, confirm that some boundary node's approach enters
/// it; this is the finite-depth shadow of singleton ends being dense.
pub fn density_diagnostic(
    dom: &GridDomain,
    census: &NodeCensus,
    chains: &[Chain],
) -> Vec<Vec<DensityLevel>> {
    chains
        .iter()
        .map(|chain| {
            chain
                .levels
                .iter()
                .enumerate()
                .map(|(k, level)| {
                    let mut meeting = 0usize;
                    let mut nearest = f64::INFINITY;
                    for n in census.nodes.iter().filter(|n| n.resolved) {
                        if n.approach.intersects(level) {
                            meeting += 1;
                            let d = level
                                .iter()
                                .map(|idx| dom.dist(dom.cell(idx), n.anchor))
                                .fold(f64::INFINITY, f64::min);
                            nearest = nearest.min(d);
                        }
                    }
                    DensityLevel {
                        level: k,
                        nodes_meeting_level: meeting,
                        nearest_node_distance: nearest,
                    }
                })
                .collect()
        })
        .collect()
}

pub fn density_to_json(report: &[Vec<DensityLevel>]) -> Value {
    json!(report
        .iter()
        .map(|levels| {
            levels
                .iter()
                .map(|l| {
                    json!({
                        "level": l.level,
                        "nodes_meeting_level": l.nodes_meeting_level,
                        "nearest_node_distance": if l.nearest_node_distance.is_finite() {
                            json!(l.nearest_node_distance)
                        } else {
                            json!("inf")
                        },
                    })
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate, DomainKind, DomainSpec};

    fn square(h: f64) -> GridDomain {
        generate(&DomainSpec {
            kind: DomainKind::Square,
            h,
        })
        .unwrap()
        .0
    }

    fn slit(h: f64) -> GridDomain {
        generate(&DomainSpec {
            kind: DomainKind::Slit,
            h,
        })
        .unwrap()
        .0
    }

    fn comb(teeth: usize, h: f64) -> GridDomain {
        generate(&DomainSpec {
            kind: DomainKind::Comb { max_tooth: teeth },
            h,
        })
        .unwrap()
        .0
    }

    fn slit_anchor(dom: &GridDomain, x: f64) -> Cell {
        let col = (x / dom.h()).round() as usize;
        let row = (0.5 / dom.h()).round() as usize;
        Cell::new(col, row)
    }

    #[test]
    fn square_anchors_get_one_node_each() {
        let dom = square(1.0 / 16.0);
        let census = build_boundary_nodes(&dom);
        for anchor in dom.anchors() {
            let ids = census.nodes_at(anchor);
            assert_eq!(ids.len(), 1, "anchor {anchor:?}");
            assert!(census.nodes[ids[0]].resolved);
        }
    }

    #[test]
    fn slit_census_two_per_interior_anchor_one_at_tip() {
        let h = 1.0 / 32.0;
        let dom = slit(h);
        let census = build_boundary_nodes(&dom);
        let tip = slit_anchor(&dom, 0.5);
        assert_eq!(census.nodes_at(tip).len(), 1, "tip carries one node");
        for x in [0.625, 0.75, 0.875] {
            let anchor = slit_anchor(&dom, x);
            let ids = census.nodes_at(anchor);
            assert_eq!(ids.len(), 2, "interior slit anchor at x={x}");
            let a = &census.nodes[ids[0]].approach;
            let b = &census.nodes[ids[1]].approach;
            assert!(!a.intersects(b), "approach sides must be disjoint");
        }
    }

    #[test]
    fn comb_tooth_anchors_have_two_sides() {
        let h = 1.0 / 32.0;
        let dom = comb(4, h);
        let census = build_boundary_nodes(&dom);
        // mid-height anchor on the tooth at x = 1/2
        let anchor = Cell::new((0.5 / h).round() as usize, (0.25 / h).round() as usize);
        assert!(!dom.in_mask(anchor));
        assert_eq!(census.nodes_at(anchor).len(), 2);
    }

    #[test]
    fn identical_levels_rejected_by_condition_b() {
        let dom = square(1.0 / 8.0);
        let e = dom.set_from_cells(&dom.true_cells().take(20).collect::<Vec<_>>());
        let e = dom.component_of_in(&e, dom.cell(e.iter().next().unwrap()));
        let err = validate_chain(&dom, vec![e.clone(), e]).unwrap_err();
        match err {
            Error::ChainRejected { condition, .. } => assert_eq!(condition, 'b'),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_nested_levels_rejected_by_condition_a() {
        let dom = square(1.0 / 8.0);
        let a = dom.set_from_cells(&[Cell::new(1, 1), Cell::new(1, 2)]);
        let b = dom.set_from_cells(&[Cell::new(7, 7), Cell::new(7, 6)]);
        let err = validate_chain(&dom, vec![a, b]).unwrap_err();
        match err {
            Error::ChainRejected {
                level, condition, ..
            } => {
                assert_eq!((level, condition), (1, 'a'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn tip_ball_chain(dom: &GridDomain, radii: &[f64]) -> Vec<CellSet> {
        // connected piece around the slit tip, reached from just above it
        let tip = slit_anchor(dom, 0.5);
        let seed = dom.snap(0.5, 0.5 + dom.h()).unwrap();
        radii
            .iter()
            .map(|&r| {
                let ball = dom
                    .neighborhood(&dom.set_from_cells(&[tip]), r)
                    .unwrap();
                dom.component_of_in(&ball, seed)
            })
            .collect()
    }

    #[test]
    fn tip_ball_chain_is_accepted_with_tip_impression() {
        let h = 1.0 / 32.0;
        let dom = slit(h);
        let levels = tip_ball_chain(&dom, &[0.4, 0.2, 0.1]);
        let chain = validate_chain(&dom, levels).unwrap();
        assert!(chain.separations.iter().all(|&s| s > 0.0));
        let tip = slit_anchor(&dom, 0.5);
        assert!(chain.impression_cells.contains(&tip));
        for &c in &chain.impression_cells {
            assert!(dom.dist(c, tip) <= 0.1 + 2.0 * h + 1e-9);
        }
    }

    #[test]
    fn division_is_reflexive_and_respects_scaling() {
        let h = 1.0 / 32.0;
        let dom = slit(h);
        let a = validate_chain(&dom, tip_ball_chain(&dom, &[0.4, 0.2, 0.1])).unwrap();
        let b = validate_chain(&dom, tip_ball_chain(&dom, &[0.8, 0.4, 0.2, 0.1])).unwrap();
        assert!(divides(&a, &a));
        assert!(divides(&a, &b) && divides(&b, &a), "index-shifted scaling");
        assert!(equivalent(&a, &b));
        assert_eq!(a.impression_cells, b.impression_cells);
    }

    #[test]
    fn chains_on_opposite_slit_sides_do_not_divide() {
        let h = 1.0 / 32.0;
        let dom = slit(h);
        let census = build_boundary_nodes(&dom);
        let anchor = slit_anchor(&dom, 0.75);
        let ids = census.nodes_at(anchor);
        let up = node_chain(&dom, &census.nodes[ids[0]]).unwrap();
        let down = node_chain(&dom, &census.nodes[ids[1]]).unwrap();
        assert!(!divides(&up, &down));
        assert!(!divides(&down, &up));
    }

    #[test]
    fn node_chains_pass_validation_on_fixtures() {
        for dom in [square(1.0 / 16.0), slit(1.0 / 32.0), comb(4, 1.0 / 32.0)] {
            let census = build_boundary_nodes(&dom);
            for node in census.nodes.iter().filter(|n| n.resolved) {
                let chain = node_chain(&dom, node).unwrap();
                assert!(chain.separations.iter().all(|&s| s > 0.0));
            }
        }
    }

    #[test]
    fn straight_curve_gives_singleton_end_at_edge_midpoint() {
        let h = 1.0 / 32.0;
        let dom = square(h);
        let census = build_boundary_nodes(&dom);
        let poly = rasterize_polyline(&dom, &[(0.5, 0.5), (0.5, h)]).unwrap();
        let chain = chain_of_curve(&dom, &poly).unwrap();
        let target = Cell::new((0.5 / h).round() as usize, 0);
        assert!(chain.impression_cells.contains(&target));
        let end = end_of_chain(&dom, chain, &census);
        assert!(end.singleton);
        let node = &census.nodes[end.node.unwrap()];
        assert!(dom.dist(node.anchor, target) <= 6.0 * h);
    }

    #[test]
    fn spiral_into_slit_tip_stays_above() {
        let h = 1.0 / 32.0;
        let dom = slit(h);
        let census = build_boundary_nodes(&dom);
        let poly = rasterize_polyline(
            &dom,
            &[(0.75, 0.75), (0.55, 0.6), (0.5, 0.5 + h)],
        )
        .unwrap();
        let chain = chain_of_curve(&dom, &poly).unwrap();
        // deepest level stays on the upper side
        for idx in chain.levels.last().unwrap().iter() {
            let (_, y) = dom.center(dom.cell(idx));
            assert!(y > 0.5 - h / 2.0);
        }
        let tip = slit_anchor(&dom, 0.5);
        assert!(chain.impression_cells.contains(&tip));
        let end = end_of_chain(&dom, chain, &census);
        assert!(end.singleton);
    }

    #[test]
    fn interior_curve_rejected() {
        let dom = square(1.0 / 16.0);
        let poly = rasterize_polyline(&dom, &[(0.3, 0.5), (0.5, 0.5)]).unwrap();
        let err = chain_of_curve(&dom, &poly).unwrap_err();
        assert!(matches!(err, Error::InteriorClusterPoint));
    }

    #[test]
    fn pushforward_pullback_roundtrip_and_slit_doubling() {
        let h = 1.0 / 32.0;
        let dom = slit(h);
        let census = build_boundary_nodes(&dom);

        // interior set: pushforward is the identity on cells
        let blob = dom.set_from_cells(&[dom.snap(0.3, 0.3).unwrap(), dom.snap(0.3, 0.3 + h).unwrap()]);
        let pe = pushforward(&dom, &census, &blob);
        assert_eq!(pe.cells, blob);
        assert!(pe.nodes.is_empty());
        assert_eq!(pullback(&dom, &census, &pe), blob);

        // ambient set covering the slit picks up both node families
        let mut seg = dom.empty_set();
        let row = (0.5 / h).round() as usize;
        for i in (0.5 / h).round() as usize..dom.nx() - 1 {
            seg.insert(dom.idx(Cell::new(i, row)));
        }
        let pe = pushforward(&dom, &census, &seg);
        assert!(pe.cells.is_empty());
        let sides: BTreeSet<usize> = pe
            .nodes
            .iter()
            .map(|&k| census.nodes[k].approach_id)
            .collect();
        assert_eq!(sides.len(), 2, "both slit sides included");

        // pullback then pushforward regains the opposite side: the slit-disk
        // phenomenon P(P^{-1}(F)) not contained in F
        let upper: BTreeSet<usize> = pe
            .nodes
            .iter()
            .copied()
            .filter(|&k| {
                census.nodes[k]
                    .contact_cells
                    .iter()
                    .all(|c| dom.center(*c).1 > 0.5)
            })
            .collect();
        let mut upper_cells = dom.empty_set();
        for c in dom.true_cells() {
            if dom.center(c).1 > 0.5 {
                upper_cells.insert(dom.idx(c));
            }
        }
        let f = PrimeEndSet {
            cells: upper_cells,
            nodes: upper,
        };
        let back = pullback(&dom, &census, &f);
        let fwd = pushforward(&dom, &census, &back);
        assert!(
            !fwd.nodes.is_subset(&f.nodes),
            "lower-side nodes must appear"
        );

        // and P^{-1}(P(E)) never grows beyond E
        let e = seg;
        let pe = pushforward(&dom, &census, &e);
        let back = pullback(&dom, &census, &pe);
        assert!(back.is_subset_of(&e));
    }

    #[test]
    fn pushforward_monotone() {
        let h = 1.0 / 32.0;
        let dom = slit(h);
        let census = build_boundary_nodes(&dom);
        let mut small = dom.empty_set();
        let mut big = dom.empty_set();
        for c in dom.cells() {
            let (x, y) = dom.center(c);
            if x > 0.5 && y >= 0.45 && y <= 0.55 {
                small.insert(dom.idx(c));
            }
            if x > 0.4 && y >= 0.4 && y <= 0.6 {
                big.insert(dom.idx(c));
            }
        }
        let ps = pushforward(&dom, &census, &small);
        let pb = pushforward(&dom, &census, &big);
        assert!(ps.cells.is_subset_of(&pb.cells));
        assert!(ps.nodes.is_subset(&pb.nodes));
    }

    #[test]
    fn open_set_pushforward_reaches_approaches() {
        let h = 1.0 / 32.0;
        let dom = slit(h);
        let census = build_boundary_nodes(&dom);
        // open ball around a slit anchor
        let mut ball = dom.empty_set();
        let center = dom.center(slit_anchor(&dom, 0.75));
        for c in dom.cells() {
            let (x, y) = dom.center(c);
            if ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt() < 3.0 * h {
                ball.insert(dom.idx(c));
            }
        }
        let pe = pushforward(&dom, &census, &ball);
        for &k in &pe.nodes {
            let n = &census.nodes[k];
            // the approach component must meet the h-dilation of the set
            let grown = dom
                .neighborhood(&{
                    let mut inside = dom.empty_set();
                    for idx in ball.iter() {
                        if dom.in_mask_idx(idx) {
                            inside.insert(idx);
                        }
                    }
                    inside
                }, 1.01 * h)
                .unwrap();
            assert!(n.approach.intersects(&grown), "node {k} approach misses the set");
        }
    }

    #[test]
    fn density_diagnostic_covers_every_level() {
        let h = 1.0 / 32.0;
        let dom = comb(4, h);
        let census = build_boundary_nodes(&dom);
        let poly = rasterize_polyline(
            &dom,
            &[(0.9, 0.75), (0.45, 0.75), (0.45, 0.25), (0.3, 0.25)],
        )
        .unwrap();
        let chain = chain_of_curve(&dom, &poly).unwrap();
        let report = density_diagnostic(&dom, &census, std::slice::from_ref(&chain));
        for level in &report[0] {
            assert!(level.nodes_meeting_level >= 1);
            assert!(level.nearest_node_distance.is_finite());
        }
    }
}
