//! Bounded planar domains as masked cell grids.
//!
//! A [`GridDomain`] samples a bounded open set at the lattice points
//! `origin + (i*h, j*h)`; a cell is inside when its center is inside the set.
//! Removed segments (slits, comb teeth) are dilated to width `h` so that they
//! disconnect adjacent cell rows at every resolution. Features thinner than
//! `2h` are omitted by the generator and listed in a [`ClipReport`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

/// Grid cell addressed by its column `i` and row `j`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub fn new(i: usize, j: usize) -> Self {
        Cell { i, j }
    }
}

/// Neighbor structure used for topology operations on the mask.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Dense bitset over the linear cell indices of one grid.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CellSet {
    nbits: usize,
    words: Vec<u64>,
}

impl CellSet {
    pub fn new(nbits: usize) -> Self {
        CellSet {
            nbits,
            words: vec![0; (nbits + 63) / 64],
        }
    }

    pub fn capacity(&self) -> usize {
        self.nbits
    }

    pub fn insert(&mut self, idx: usize) {
        debug_assert!(idx < self.nbits);
        self.words[idx / 64] |= 1u64 << (idx % 64);
    }

    pub fn remove(&mut self, idx: usize) {
        self.words[idx / 64] &= !(1u64 << (idx % 64));
    }

    pub fn contains(&self, idx: usize) -> bool {
        idx < self.nbits && self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &CellSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &CellSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    /// Indices in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            let mut rem = bits;
            std::iter::from_fn(move || {
                if rem == 0 {
                    None
                } else {
                    let b = rem.trailing_zeros() as usize;
                    rem &= rem - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }
}

/// Bounded open connected planar set sampled on a regular lattice.
///
/// Invariants established at construction: the mask is nonempty, connected
/// under the declared connectivity, and no inside cell touches the grid
/// border (the complement is nonempty, so the set is genuinely bounded).
#[derive(Clone, Debug)]
pub struct GridDomain {
    nx: usize,
    ny: usize,
    h: f64,
    origin: (f64, f64),
    mask: Vec<bool>,
    connectivity: Connectivity,
}

impl GridDomain {
    pub fn new(
        nx: usize,
        ny: usize,
        h: f64,
        origin: (f64, f64),
        mask: Vec<bool>,
        connectivity: Connectivity,
    ) -> Result<Self> {
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::BadParameter(format!("h must be positive, got {h}")));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::BadParameter(format!(
                "grid must be at least 3x3, got {nx}x{ny}"
            )));
        }
        if mask.len() != nx * ny {
            return Err(Error::BadParameter(format!(
                "mask length {} does not match {nx}x{ny}",
                mask.len()
            )));
        }
        let dom = GridDomain {
            nx,
            ny,
            h,
            origin,
            mask,
            connectivity,
        };
        if dom.true_count() == 0 {
            return Err(Error::EmptyMask);
        }
        for c in dom.cells() {
            if dom.in_mask(c) && (c.i == 0 || c.j == 0 || c.i == nx - 1 || c.j == ny - 1) {
                return Err(Error::BadParameter(format!(
                    "cell ({},{}) touches the bounding box; the set must be strictly inside",
                    c.i, c.j
                )));
            }
        }
        let comps = dom.components();
        if comps.len() > 1 {
            return Err(Error::DisconnectedMask {
                largest: comps[0].len(),
                second: comps[1].len(),
            });
        }
        Ok(dom)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn idx(&self, c: Cell) -> usize {
        debug_assert!(c.i < self.nx && c.j < self.ny);
        c.j * self.nx + c.i
    }

    pub fn cell(&self, idx: usize) -> Cell {
        Cell::new(idx % self.nx, idx / self.nx)
    }

    pub fn in_mask(&self, c: Cell) -> bool {
        c.i < self.nx && c.j < self.ny && self.mask[self.idx(c)]
    }

    pub fn in_mask_idx(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn center(&self, c: Cell) -> (f64, f64) {
        (
            self.origin.0 + c.i as f64 * self.h,
            self.origin.1 + c.j as f64 * self.h,
        )
    }

    pub fn dist(&self, a: Cell, b: Cell) -> f64 {
        let (ax, ay) = self.center(a);
        let (bx, by) = self.center(b);
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.nx * self.ny).map(|idx| self.cell(idx))
    }

    pub fn true_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(|&c| self.in_mask(c))
    }

    pub fn true_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Area measure of the sampled set: `h^2` per inside cell.
    pub fn measure(&self) -> f64 {
        self.true_count() as f64 * self.h * self.h
    }

    /// Nearest inside cell to a point, ties broken by the smaller index.
    pub fn snap(&self, x: f64, y: f64) -> Option<Cell> {
        let mut best: Option<(f64, usize)> = None;
        for c in self.true_cells() {
            let (cx, cy) = self.center(c);
            let d2 = (cx - x).powi(2) + (cy - y).powi(2);
            let key = (d2, self.idx(c));
            if best.map_or(true, |b| key < b) {
                best = Some(key);
            }
        }
        best.map(|(_, idx)| self.cell(idx))
    }

    pub fn empty_set(&self) -> CellSet {
        CellSet::new(self.n_cells())
    }

    pub fn set_from_cells(&self, cells: &[Cell]) -> CellSet {
        let mut s = self.empty_set();
        for &c in cells {
            s.insert(self.idx(c));
        }
        s
    }

    pub fn set_cells(&self, set: &CellSet) -> Vec<Cell> {
        set.iter().map(|idx| self.cell(idx)).collect()
    }

    fn offsets(connectivity: Connectivity) -> &'static [(isize, isize)] {
        match connectivity {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }

    pub fn step(&self, c: Cell, di: isize, dj: isize) -> Option<Cell> {
        let i = c.i as isize + di;
        let j = c.j as isize + dj;
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            None
        } else {
            Some(Cell::new(i as usize, j as usize))
        }
    }

    /// Inside neighbors of an inside cell under the declared connectivity.
    pub fn cell_neighbors(&self, c: Cell) -> Result<Vec<Cell>> {
        if !self.in_mask(c) {
            return Err(Error::CellOutsideMask { cell: c });
        }
        Ok(Self::offsets(self.connectivity)
            .iter()
            .filter_map(|&(di, dj)| self.step(c, di, dj))
            .filter(|&n| self.in_mask(n))
            .collect())
    }

    /// Inside 4-neighbors regardless of the declared flag. Topology
    /// operations (components, chains, ball pieces) always use these so that
    /// width-`h` slits cannot be tunneled through.
    pub fn neighbors4(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        Self::offsets(Connectivity::Four)
            .iter()
            .filter_map(move |&(di, dj)| self.step(c, di, dj))
            .filter(|&n| self.in_mask(n))
    }

    /// Euclidean `r`-neighborhood: inside cells whose center lies within
    /// distance `r` of some center in `a`. Monotone in both arguments.
    pub fn neighborhood(&self, a: &CellSet, r: f64) -> Result<CellSet> {
        if a.is_empty() {
            return Err(Error::BadParameter("neighborhood of an empty set".into()));
        }
        if r < 0.0 || !r.is_finite() {
            return Err(Error::BadParameter(format!("radius must be >= 0, got {r}")));
        }
        let centers: Vec<(f64, f64)> = a.iter().map(|idx| self.center(self.cell(idx))).collect();
        let (mut lo_i, mut hi_i, mut lo_j, mut hi_j) = (self.nx, 0usize, self.ny, 0usize);
        for idx in a.iter() {
            let c = self.cell(idx);
            lo_i = lo_i.min(c.i);
            hi_i = hi_i.max(c.i);
            lo_j = lo_j.min(c.j);
            hi_j = hi_j.max(c.j);
        }
        let pad = (r / self.h).ceil() as usize + 1;
        let r2 = r * r * (1.0 + 1e-12) + 1e-300;
        let mut out = self.empty_set();
        for j in lo_j.saturating_sub(pad)..(hi_j + pad + 1).min(self.ny) {
            for i in lo_i.saturating_sub(pad)..(hi_i + pad + 1).min(self.nx) {
                let c = Cell::new(i, j);
                if !self.in_mask(c) {
                    continue;
                }
                let (x, y) = self.center(c);
                if centers
                    .iter()
                    .any(|&(ax, ay)| (x - ax).powi(2) + (y - ay).powi(2) <= r2)
                {
                    out.insert(self.idx(c));
                }
            }
        }
        Ok(out)
    }

    /// 4-connected components of the mask, largest first.
    pub fn components(&self) -> Vec<CellSet> {
        let mut seen = vec![false; self.n_cells()];
        let mut comps = Vec::new();
        for start in 0..self.n_cells() {
            if seen[start] || !self.mask[start] {
                continue;
            }
            let mut comp = self.empty_set();
            let mut queue = VecDeque::new();
            queue.push_back(start);
            seen[start] = true;
            while let Some(idx) = queue.pop_front() {
                comp.insert(idx);
                for n in self.neighbors4(self.cell(idx)) {
                    let nidx = self.idx(n);
                    if !seen[nidx] {
                        seen[nidx] = true;
                        queue.push_back(nidx);
                    }
                }
            }
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()));
        comps
    }

    /// 4-connected component of `set` containing `start` (inside cells only).
    pub fn component_of_in(&self, set: &CellSet, start: Cell) -> CellSet {
        let mut comp = self.empty_set();
        if !set.contains(self.idx(start)) || !self.in_mask(start) {
            return comp;
        }
        let mut queue = VecDeque::new();
        queue.push_back(self.idx(start));
        comp.insert(self.idx(start));
        while let Some(idx) = queue.pop_front() {
            for n in self.neighbors4(self.cell(idx)) {
                let nidx = self.idx(n);
                if set.contains(nidx) && !comp.contains(nidx) {
                    comp.insert(nidx);
                    queue.push_back(nidx);
                }
            }
        }
        comp
    }

    /// Whether a cell set is 4-connected.
    pub fn is_connected_set(&self, set: &CellSet) -> bool {
        match set.iter().next() {
            None => false,
            Some(first) => self.component_of_in(set, self.cell(first)).len() == set.len(),
        }
    }

    /// Inside relative boundary of a set: its cells with an inside 4-neighbor
    /// outside the set. Cells touching only the complement do not count.
    pub fn relative_boundary(&self, set: &CellSet) -> CellSet {
        let mut out = self.empty_set();
        for idx in set.iter() {
            let c = self.cell(idx);
            if self.neighbors4(c).any(|n| !set.contains(self.idx(n))) {
                out.insert(idx);
            }
        }
        out
    }

    /// Complement cells adjacent to the mask; these are the boundary anchors.
    pub fn anchors(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for c in self.cells() {
            if self.in_mask(c) {
                continue;
            }
            let touches = Self::offsets(Connectivity::Four)
                .iter()
                .filter_map(|&(di, dj)| self.step(c, di, dj))
                .any(|n| self.in_mask(n));
            if touches {
                out.push(c);
            }
        }
        out
    }

    /// Inside 4-neighbors of a complement cell.
    pub fn anchor_contacts(&self, anchor: Cell) -> Vec<Cell> {
        Self::offsets(Connectivity::Four)
            .iter()
            .filter_map(|&(di, dj)| self.step(anchor, di, dj))
            .filter(|&n| self.in_mask(n))
            .collect()
    }

    /// PBM "P1" text rendering of the mask; `1` marks inside cells, top row
    /// first.
    pub fn mask_pbm(&self) -> String {
        let mut s = String::new();
        s.push_str("P1\n");
        s.push_str(&format!("{} {}\n", self.nx, self.ny));
        for j in (0..self.ny).rev() {
            let row: Vec<&str> = (0..self.nx)
                .map(|i| if self.in_mask(Cell::new(i, j)) { "1" } else { "0" })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// JSON rendering of the mask, bottom row first (`j = 0` first).
    pub fn mask_json(&self) -> Value {
        let rows: Vec<String> = (0..self.ny)
            .map(|j| {
                (0..self.nx)
                    .map(|i| if self.in_mask(Cell::new(i, j)) { '1' } else { '0' })
                    .collect()
            })
            .collect();
        json!({
            "nx": self.nx,
            "ny": self.ny,
            "h": self.h,
            "origin": [self.origin.0, self.origin.1],
            "rows": rows,
        })
    }
}

/// Named domain generators.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    /// Unit square `(0,1)^2`.
    Square,
    /// Unit square minus teeth `{1/n} x [0,1/2]` for `n = 2..=max_tooth`.
    Comb { max_tooth: usize },
    /// Unit square minus alternating risers `{1/(2n)} x [0,1-1/n]` and
    /// hangers `{1/(2n+1)} x [1/n,1]` for `n = 2..=max_pair`.
    DoubleComb { max_pair: usize },
    /// Unit square minus the horizontal slit `[1/2,1) x {1/2}`.
    Slit,
    /// Annulus `r_inner < |x - (1/2,1/2)| < r_outer` inside the unit square.
    Annulus { r_inner: f64, r_outer: f64 },
    /// Explicit mask rows ('0'/'1'), bottom row first.
    Custom { rows: Vec<String> },
}

/// Generation request: a named set plus the sampling resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub h: f64,
}

/// One removed segment retained by the generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeptFeature {
    pub label: String,
    pub x: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub column: usize,
}

/// One removed segment omitted by the generator, with the reason.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmittedFeature {
    pub label: String,
    pub x: f64,
    pub reason: String,
}

/// Report of which thin features survived sampling at the requested `h`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ClipReport {
    pub kept: Vec<KeptFeature>,
    pub omitted: Vec<OmittedFeature>,
}

struct Segment {
    label: String,
    x: f64,
    y_min: f64,
    y_max: f64,
}

fn dist_to_vertical_segment(p: (f64, f64), seg: &Segment) -> f64 {
    let dx = p.0 - seg.x;
    let dy = if p.1 < seg.y_min {
        seg.y_min - p.1
    } else if p.1 > seg.y_max {
        p.1 - seg.y_max
    } else {
        0.0
    };
    (dx * dx + dy * dy).sqrt()
}

/// Greedy thinness filter: walk the candidate segments from right to left and
/// keep one only when it sits at least `2h` away from every kept segment and
/// from the side walls. Omitted segments are reported, never silently lost.
fn clip_segments(segments: Vec<Segment>, h: f64, report: &mut ClipReport) -> Vec<Segment> {
    let mut sorted = segments;
    sorted.sort_by(|a, b| b.x.partial_cmp(&a.x).unwrap());
    let min_gap = 2.0 * h - 1e-12;
    let mut kept: Vec<Segment> = Vec::new();
    for seg in sorted {
        if seg.x < min_gap || seg.x > 1.0 - min_gap {
            report.omitted.push(OmittedFeature {
                label: seg.label,
                x: seg.x,
                reason: format!("closer than 2h to a side wall (h={h})"),
            });
            continue;
        }
        match kept.iter().find(|k| (k.x - seg.x).abs() < min_gap) {
            Some(near) => report.omitted.push(OmittedFeature {
                label: seg.label,
                x: seg.x,
                reason: format!("gap {:.6} to {} is thinner than 2h", (near.x - seg.x).abs(), near.label),
            }),
            None => kept.push(seg),
        }
    }
    kept.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    kept
}

/// Sample a named domain at resolution `h`.
///
/// The mask is the cell-center sampling of the defining set with every
/// retained segment dilated to width `h`. Rejects empty or disconnected
/// samplings.
pub fn generate(spec: &DomainSpec) -> Result<(GridDomain, ClipReport)> {
    let h = spec.h;
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidSpec(format!("h must be positive, got {h}")));
    }
    if let DomainKind::Custom { rows } = &spec.kind {
        return generate_custom(rows, h);
    }
    let n = (1.0 / h).round();
    if (n * h - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!(
            "h={h} does not evenly divide the unit box"
        )));
    }
    if n < 4.0 {
        return Err(Error::InvalidSpec(format!("h={h} is too coarse")));
    }
    let n = n as usize;
    let (nx, ny) = (n + 1, n + 1);
    let mut report = ClipReport::default();

    let segments: Vec<Segment> = match &spec.kind {
        DomainKind::Square | DomainKind::Annulus { .. } | DomainKind::Slit => Vec::new(),
        DomainKind::Comb { max_tooth } => {
            if *max_tooth < 2 {
                return Err(Error::InvalidSpec("comb needs max_tooth >= 2".into()));
            }
            (2..=*max_tooth)
                .map(|k| Segment {
                    label: format!("tooth n={k}"),
                    x: 1.0 / k as f64,
                    y_min: 0.0,
                    y_max: 0.5,
                })
                .collect()
        }
        DomainKind::DoubleComb { max_pair } => {
            if *max_pair < 2 {
                return Err(Error::InvalidSpec("double comb needs max_pair >= 2".into()));
            }
            let mut v = Vec::new();
            for k in 2..=*max_pair {
                v.push(Segment {
                    label: format!("riser n={k}"),
                    x: 1.0 / (2 * k) as f64,
                    y_min: 0.0,
                    y_max: 1.0 - 1.0 / k as f64,
                });
                v.push(Segment {
                    label: format!("hanger n={k}"),
                    x: 1.0 / (2 * k + 1) as f64,
                    y_min: 1.0 / k as f64,
                    y_max: 1.0,
                });
            }
            v
        }
        DomainKind::Custom { .. } => unreachable!(),
    };

    let vertical = clip_segments(segments, h, &mut report);
    for seg in &vertical {
        report.kept.push(KeptFeature {
            label: seg.label.clone(),
            x: seg.x,
            y_min: seg.y_min,
            y_max: seg.y_max,
            column: (seg.x / h).round() as usize,
        });
    }
    if matches!(spec.kind, DomainKind::Slit) {
        report.kept.push(KeptFeature {
            label: "slit".into(),
            x: 0.5,
            y_min: 0.5,
            y_max: 0.5,
            column: (0.5f64 / h).round() as usize,
        });
    }

    if let DomainKind::Annulus { r_inner, r_outer } = spec.kind {
        if !(0.0 < r_inner && r_inner < r_outer && r_outer <= 0.5) {
            return Err(Error::InvalidSpec(format!(
                "annulus radii must satisfy 0 < r_inner < r_outer <= 0.5, got {r_inner}, {r_outer}"
            )));
        }
    }

    let half = h / 2.0 - 1e-12;
    let mut mask = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let x = i as f64 * h;
            let y = j as f64 * h;
            let mut inside = x > 1e-12 && x < 1.0 - 1e-12 && y > 1e-12 && y < 1.0 - 1e-12;
            if inside {
                match &spec.kind {
                    DomainKind::Annulus { r_inner, r_outer } => {
                        let r = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
                        inside = r > *r_inner + 1e-12 && r < *r_outer - 1e-12;
                    }
                    DomainKind::Slit => {
                        // horizontal segment [1/2, 1] x {1/2}, dilated to width h
                        let dx = if x < 0.5 { 0.5 - x } else { 0.0 };
                        let dy = (y - 0.5).abs();
                        if (dx * dx + dy * dy).sqrt() < half {
                            inside = false;
                        }
                    }
                    _ => {
                        for seg in &vertical {
                            if dist_to_vertical_segment((x, y), seg) < half {
                                inside = false;
                                break;
                            }
                        }
                    }
                }
            }
            mask[j * nx + i] = inside;
        }
    }

    let dom = GridDomain::new(nx, ny, h, (0.0, 0.0), mask, Connectivity::Four)?;
    Ok((dom, report))
}

fn generate_custom(rows: &[String], h: f64) -> Result<(GridDomain, ClipReport)> {
    if rows.is_empty() {
        return Err(Error::InvalidSpec("custom rows are empty".into()));
    }
    let nx = rows[0].len();
    let ny = rows.len();
    if rows.iter().any(|r| r.len() != nx) {
        return Err(Error::InvalidSpec("custom rows have uneven lengths".into()));
    }
    let mut mask = vec![false; nx * ny];
    for (j, row) in rows.iter().enumerate() {
        for (i, ch) in row.chars().enumerate() {
            mask[j * nx + i] = match ch {
                '1' => true,
                '0' => false,
                other => {
                    return Err(Error::InvalidSpec(format!(
                        "custom row {j} has unexpected character {other:?}"
                    )))
                }
            };
        }
    }
    let dom = GridDomain::new(nx, ny, h, (0.0, 0.0), mask, Connectivity::Four)?;
    Ok((dom, ClipReport::default()))
}

// --- JSON spec format: {"kind": ..., "parameters": {...}, "h": ...} ---

impl DomainSpec {
    pub fn to_json(&self) -> Value {
        let (kind, params) = match &self.kind {
            DomainKind::Square => ("square", json!({})),
            DomainKind::Comb { max_tooth } => ("comb", json!({ "teeth": max_tooth })),
            DomainKind::DoubleComb { max_pair } => ("double_comb", json!({ "teeth": max_pair })),
            DomainKind::Slit => ("slit", json!({})),
            DomainKind::Annulus { r_inner, r_outer } => {
                ("annulus", json!({ "r_inner": r_inner, "r_outer": r_outer }))
            }
            DomainKind::Custom { rows } => ("custom", json!({ "rows": rows })),
        };
        json!({ "kind": kind, "parameters": params, "h": self.h })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let kind_str = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidSpec("field 'kind' missing or not a string".into()))?;
        let h = v
            .get("h")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::InvalidSpec("field 'h' missing or not a number".into()))?;
        let params = v.get("parameters").cloned().unwrap_or_else(|| json!({}));
        let get_usize = |name: &str| -> Result<usize> {
            params
                .get(name)
                .and_then(Value::as_u64)
                .map(|n| n as usize)
                .ok_or_else(|| {
                    Error::InvalidSpec(format!("field 'parameters.{name}' missing or not an integer"))
                })
        };
        let get_f64 = |name: &str| -> Result<f64> {
            params.get(name).and_then(Value::as_f64).ok_or_else(|| {
                Error::InvalidSpec(format!("field 'parameters.{name}' missing or not a number"))
            })
        };
        let kind = match kind_str {
            "square" => DomainKind::Square,
            "comb" => DomainKind::Comb {
                max_tooth: get_usize("teeth")?,
            },
            "double_comb" => DomainKind::DoubleComb {
                max_pair: get_usize("teeth")?,
            },
            "slit" => DomainKind::Slit,
            "annulus" => DomainKind::Annulus {
                r_inner: get_f64("r_inner")?,
                r_outer: get_f64("r_outer")?,
            },
            "custom" => {
                let rows = params
                    .get("rows")
                    .and_then(Value::as_array)
                    .ok_or_else(|| {
                        Error::InvalidSpec("field 'parameters.rows' missing or not a list".into())
                    })?
                    .iter()
                    .map(|r| {
                        r.as_str().map(String::from).ok_or_else(|| {
                            Error::InvalidSpec("field 'parameters.rows' must hold strings".into())
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                DomainKind::Custom { rows }
            }
            other => {
                return Err(Error::InvalidSpec(format!(
                    "field 'kind' has unknown value {other:?}"
                )))
            }
        };
        Ok(DomainSpec { kind, h })
    }
}
