//! Artifact emission: JSON reports, CSV fields, SVG heatmaps, PBM masks.
//!
//! Every artifact embeds the run configuration (resolution, exponent,
//! tolerances, seed, tool version) so files are self-describing, and all
//! formatting is fixed-precision so re-runs are bit-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::energy::{GridFunction, Support};
use crate::error::{Error, Result};
use crate::grid::GridDomain;

pub fn tool_version() -> String {
    // a git describe string can be injected at build time; the package
    // version is the fallback
    option_env!("PELAB_GIT_DESCRIBE")
        .unwrap_or(env!("CARGO_PKG_VERSION"))
        .to_string()
}

/// Run configuration stamped into every artifact.
#[derive(Clone, Debug, Default)]
pub struct RunMeta {
    pub seed: u64,
    pub h: Option<f64>,
    pub p: Option<f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub extra: BTreeMap<String, String>,
}

impl RunMeta {
    pub fn new(seed: u64) -> Self {
        RunMeta {
            seed,
            ..Default::default()
        }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_tol(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }

    pub fn with_extra(mut self, key: &str, value: &str) -> Self {
        self.extra.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_json(&self) -> Value {
        json!({
            "tool": format!("pelab {}", tool_version()),
            "seed": self.seed,
            "h": self.h,
            "p": self.p,
            "tolerances": self.tolerances,
            "extra": self.extra,
        })
    }

    /// `# key=value` comment lines for CSV artifacts.
    pub fn csv_header(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# tool=pelab {}\n", tool_version()));
        out.push_str(&format!("# seed={}\n", self.seed));
        if let Some(h) = self.h {
            out.push_str(&format!("# h={h}\n"));
        }
        if let Some(p) = self.p {
            out.push_str(&format!("# p={p}\n"));
        }
        for (k, v) in &self.tolerances {
            out.push_str(&format!("# tol.{k}={v}\n"));
        }
        for (k, v) in &self.extra {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out
    }
}

pub fn write_string(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Wrap a payload with its meta block and write pretty JSON.
pub fn write_json(path: &Path, meta: &RunMeta, payload: Value) -> Result<()> {
    let doc = json!({ "meta": meta.to_json(), "data": payload });
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    write_string(path, &s)
}

pub fn write_csv(path: &Path, meta: &RunMeta, body: &str) -> Result<()> {
    let mut s = meta.csv_header();
    s.push_str(body);
    write_string(path, &s)
}

const RAMP: [(f64, f64, f64); 5] = [
    (0.267, 0.005, 0.329),
    (0.229, 0.322, 0.545),
    (0.128, 0.567, 0.551),
    (0.369, 0.789, 0.383),
    (0.993, 0.906, 0.144),
];

fn ramp_color(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let k = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - k as f64;
    let (r0, g0, b0) = RAMP[k];
    let (r1, g1, b1) = RAMP[k + 1];
    (
        ((r0 + (r1 - r0) * f) * 255.0).round() as u8,
        ((g0 + (g1 - g0) * f) * 255.0).round() as u8,
        ((b0 + (b1 - b0) * f) * 255.0).round() as u8,
    )
}

/// Cell-per-rect SVG heatmap of a grid function; complement cells render
/// light gray.
pub fn svg_heatmap(dom: &GridDomain, field: &GridFunction, title: &str, meta: &RunMeta) -> String {
    let (nx, ny) = (dom.nx(), dom.ny());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for idx in 0..dom.n_cells() {
        if field.support == Support::Omega && !dom.in_mask_idx(idx) {
            continue;
        }
        let v = field.values[idx];
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || hi <= lo {
        hi = lo + 1.0;
    }
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {nx} {ny}\" width=\"640\" height=\"640\">\n"
    ));
    s.push_str(&format!("<title>{title}</title>\n"));
    s.push_str(&format!(
        "<!-- pelab {} seed={} h={} p={} range=[{:.6e},{:.6e}] -->\n",
        tool_version(),
        meta.seed,
        meta.h.map_or("na".to_string(), |v| format!("{v}")),
        meta.p.map_or("na".to_string(), |v| format!("{v}")),
        lo,
        hi
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{nx}\" height=\"{ny}\" fill=\"#f0f0f0\"/>\n"
    ));
    for j in 0..ny {
        for i in 0..nx {
            let idx = j * nx + i;
            let y = ny - 1 - j;
            if field.support == Support::Omega && !dom.in_mask_idx(idx) {
                s.push_str(&format!(
                    "<rect x=\"{i}\" y=\"{y}\" width=\"1\" height=\"1\" fill=\"#d8d8d8\"/>\n"
                ));
                continue;
            }
            let v = field.values[idx];
            let t = (v - lo) / (hi - lo);
            let (r, g, b) = ramp_color(t);
            s.push_str(&format!(
                "<rect x=\"{i}\" y=\"{y}\" width=\"1\" height=\"1\" fill=\"rgb({r},{g},{b})\"/>\n"
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}
