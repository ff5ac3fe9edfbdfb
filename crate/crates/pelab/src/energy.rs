//! Grid functions and the discrete Sobolev-type energy.
//!
//! The minimal upper gradient of a grid function is the edge difference
//! quotient, so the norm is a p-Dirichlet form: per 4-connected edge the
//! energy is `|u_a - u_b|^p * h^(2-p)` and the mass term is `h^2 * |u|^p`
//! per cell. Domain functions live on the mask; ambient functions live on
//! the whole bounding grid.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{Cell, GridDomain};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Support {
    Omega,
    Ambient,
}

/// Real values on grid cells, plus optional values on boundary nodes.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub values: Vec<f64>,
    pub support: Support,
    pub node_values: Option<BTreeMap<usize, f64>>,
    nx: usize,
    ny: usize,
    h: f64,
}

impl GridFunction {
    pub fn zeros(dom: &GridDomain, support: Support) -> Self {
        GridFunction {
            values: vec![0.0; dom.n_cells()],
            support,
            node_values: None,
            nx: dom.nx(),
            ny: dom.ny(),
            h: dom.h(),
        }
    }

    pub fn from_values(dom: &GridDomain, support: Support, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), dom.n_cells());
        GridFunction {
            values,
            support,
            node_values: None,
            nx: dom.nx(),
            ny: dom.ny(),
            h: dom.h(),
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(dom: &GridDomain, support: Support, f: F) -> Self {
        let values = (0..dom.n_cells())
            .map(|idx| {
                let (x, y) = dom.center(dom.cell(idx));
                f(x, y)
            })
            .collect();
        Self::from_values(dom, support, values)
    }

    pub fn value(&self, dom: &GridDomain, c: Cell) -> f64 {
        self.values[dom.idx(c)]
    }

    pub fn same_layout(&self, other: &GridFunction) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.h == other.h
    }

    /// Max-norm difference over cells where both functions are defined.
    pub fn max_diff(&self, dom: &GridDomain, other: &GridFunction) -> f64 {
        assert!(self.same_layout(other), "functions on different grids");
        let omega = self.support == Support::Omega || other.support == Support::Omega;
        (0..dom.n_cells())
            .filter(|&idx| !omega || dom.in_mask_idx(idx))
            .map(|idx| (self.values[idx] - other.values[idx]).abs())
            .fold(0.0, f64::max)
    }

    /// CSV rows `x,y,value` over the support.
    pub fn to_csv(&self, dom: &GridDomain) -> String {
        let mut out = String::from("x,y,value\n");
        for idx in 0..dom.n_cells() {
            if self.support == Support::Omega && !dom.in_mask_idx(idx) {
                continue;
            }
            let (x, y) = dom.center(dom.cell(idx));
            out.push_str(&format!("{x:.9},{y:.9},{:.12}\n", self.values[idx]));
        }
        out
    }
}

/// Pieces of the discrete Sobolev-type norm.
#[derive(Clone, Copy, Debug)]
pub struct EnergyReport {
    pub lp_term: f64,
    pub gradient_term: f64,
    pub norm_p: f64,
}

/// 4-connected weighted graph carrying the energy of one support choice.
#[derive(Clone, Debug)]
pub(crate) struct EdgeGraph {
    pub n: usize,
    /// Cell-index pairs, each edge of length `h`.
    pub edges: Vec<(u32, u32)>,
    /// Cells that carry values (mask for omega, everything for ambient).
    pub active: Vec<bool>,
    pub h: f64,
}

impl EdgeGraph {
    /// Gradient part of the p-energy.
    pub fn gradient_energy(&self, u: &[f64], p: f64) -> f64 {
        let w = self.h.powf(2.0 - p);
        self.edges
            .iter()
            .map(|&(a, b)| (u[a as usize] - u[b as usize]).abs().powf(p) * w)
            .sum()
    }

    /// Mass part of the p-energy.
    pub fn mass_energy(&self, u: &[f64], p: f64) -> f64 {
        let h2 = self.h * self.h;
        u.iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(v, _)| v.abs().powf(p) * h2)
            .sum()
    }

    pub fn p_energy(&self, u: &[f64], p: f64, include_mass: bool) -> f64 {
        self.gradient_energy(u, p) + if include_mass { self.mass_energy(u, p) } else { 0.0 }
    }
}

pub(crate) fn omega_graph(dom: &GridDomain) -> EdgeGraph {
    let mut edges = Vec::new();
    for c in dom.true_cells() {
        for (di, dj) in [(1isize, 0isize), (0, 1)] {
            if let Some(n) = dom.step(c, di, dj) {
                if dom.in_mask(n) {
                    edges.push((dom.idx(c) as u32, dom.idx(n) as u32));
                }
            }
        }
    }
    let active = (0..dom.n_cells()).map(|i| dom.in_mask_idx(i)).collect();
    EdgeGraph {
        n: dom.n_cells(),
        edges,
        active,
        h: dom.h(),
    }
}

pub(crate) fn ambient_graph(dom: &GridDomain) -> EdgeGraph {
    let mut edges = Vec::new();
    for c in dom.cells() {
        for (di, dj) in [(1isize, 0isize), (0, 1)] {
            if let Some(n) = dom.step(c, di, dj) {
                edges.push((dom.idx(c) as u32, dom.idx(n) as u32));
            }
        }
    }
    EdgeGraph {
        n: dom.n_cells(),
        edges,
        active: vec![true; dom.n_cells()],
        h: dom.h(),
    }
}

pub(crate) fn graph_for(dom: &GridDomain, support: Support) -> EdgeGraph {
    match support {
        Support::Omega => omega_graph(dom),
        Support::Ambient => ambient_graph(dom),
    }
}

/// Exact finite sums of both energy terms of `u`.
pub fn energy(dom: &GridDomain, u: &GridFunction, p: f64) -> Result<EnergyReport> {
    if p <= 1.0 || !p.is_finite() {
        return Err(Error::BadParameter(format!("p must be > 1, got {p}")));
    }
    let graph = graph_for(dom, u.support);
    let lp_term = graph.mass_energy(&u.values, p);
    let gradient_term = graph.gradient_energy(&u.values, p);
    Ok(EnergyReport {
        lp_term,
        gradient_term,
        norm_p: (lp_term + gradient_term).powf(1.0 / p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate, DomainKind, DomainSpec};
    use approx::assert_relative_eq;

    fn square(h: f64) -> GridDomain {
        generate(&DomainSpec {
            kind: DomainKind::Square,
            h,
        })
        .unwrap()
        .0
    }

    #[test]
    fn constant_has_no_gradient_energy() {
        let dom = square(1.0 / 16.0);
        let c = 3.0;
        let u = GridFunction::from_fn(&dom, Support::Omega, |_, _| c);
        let r = energy(&dom, &u, 2.0).unwrap();
        assert_eq!(r.gradient_term, 0.0);
        assert_relative_eq!(r.lp_term, c * c * dom.measure(), max_relative = 1e-12);
    }

    #[test]
    fn coordinate_field_gradient_tends_to_area() {
        let dom = square(1.0 / 64.0);
        let mut u = GridFunction::from_fn(&dom, Support::Omega, |x, _| x);
        for idx in 0..dom.n_cells() {
            if !dom.in_mask_idx(idx) {
                u.values[idx] = 0.0;
            }
        }
        let r = energy(&dom, &u, 2.0).unwrap();
        // 63x63 interior cells: 62 horizontal edges per row, each contributing h^2
        let h = dom.h();
        let expect = 62.0 * 63.0 * h * h;
        assert_relative_eq!(r.gradient_term, expect, max_relative = 1e-12);
        assert!((r.gradient_term - 1.0).abs() < 0.05, "within 5% of the area");
    }

    #[test]
    fn scaling_is_p_homogeneous() {
        let dom = square(1.0 / 16.0);
        for p in [1.5, 2.0, 3.0] {
            let u = GridFunction::from_fn(&dom, Support::Omega, |x, y| x * y - 0.3);
            let mut u2 = u.clone();
            for v in &mut u2.values {
                *v *= 2.0;
            }
            let r1 = energy(&dom, &u, p).unwrap();
            let r2 = energy(&dom, &u2, p).unwrap();
            let factor = 2f64.powf(p);
            assert_relative_eq!(r2.lp_term, factor * r1.lp_term, max_relative = 1e-10);
            assert_relative_eq!(
                r2.gradient_term,
                factor * r1.gradient_term,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn zero_norm_only_for_zero_function() {
        let dom = square(1.0 / 8.0);
        let z = GridFunction::zeros(&dom, Support::Omega);
        assert_eq!(energy(&dom, &z, 2.0).unwrap().norm_p, 0.0);
        let mut u = z.clone();
        u.values[dom.idx(dom.snap(0.5, 0.5).unwrap())] = 1e-6;
        assert!(energy(&dom, &u, 2.0).unwrap().norm_p > 0.0);
    }
}
