//! Keypoint culling by local density and lighting.
//!
//! A quad-tree over the frame defines the neighbourhood of every keypoint. The leaf's
//! keypoint density and intensity contrast feed two sigmoids whose weighted sum is the
//! stability score; keypoints scoring below `s_min` are dropped.

use serde::{Deserialize, Serialize};

use crate::detect::Keypoint;
use crate::error::{Error, Result};
use crate::image::{GrayImage, Rect};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CullConfig {
    /// A node holding more keypoints than this is split.
    pub max_per_leaf: usize,
    pub max_depth: usize,
    /// Target density, keypoints per pixel.
    pub d_opt: f64,
    /// Sharpness of the density sigmoid.
    pub k: f64,
    /// Sensitivity of the lighting sigmoid.
    pub rho: f64,
    /// Contrast (intensity std-dev) at the lighting sigmoid midpoint.
    pub h_th: f64,
    pub w1: f64,
    pub w2: f64,
    pub s_min: f64,
    /// Use `C_light` instead of `1 - C_light` in the score, rewarding high-contrast leaves.
    pub invert_lighting_term: bool,
}

impl Default for CullConfig {
    fn default() -> Self {
        Self {
            max_per_leaf: 8,
            max_depth: 6,
            d_opt: 1e-3,
            k: 2000.0,
            rho: 0.15,
            h_th: 20.0,
            w1: 0.6,
            w2: 0.4,
            s_min: 0.3,
            invert_lighting_term: false,
        }
    }
}

impl CullConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("cull: {msg}")));
        if !(self.w1 >= 0.0 && self.w2 >= 0.0) || (self.w1 + self.w2 - 1.0).abs() > 1e-12 {
            return bad("w1 and w2 must be non-negative and sum to 1");
        }
        if !(0.0..=1.0).contains(&self.s_min) {
            return bad("s_min must lie in [0, 1]");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1");
        }
        if !(self.d_opt > 0.0) {
            return bad("d_opt must be > 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadNode {
    pub rect: Rect,
    pub depth: usize,
    /// Empty for leaves, otherwise top-left, top-right, bottom-left, bottom-right.
    pub children: Vec<QuadNode>,
    /// Keypoint indices; only populated on leaves.
    pub points: Vec<usize>,
}

impl QuadNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn leaves(&self) -> Vec<&QuadNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                out.push(n);
            } else {
                stack.extend(n.children.iter().rev());
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadTree {
    pub root: QuadNode,
}

/// Splits at the geometric center until a node holds at most `max_per_leaf` points, hits
/// `max_depth`, or is too thin to split. Points on a split line go right/bottom.
pub fn build_quadtree(keypoints: &[Keypoint], bounds: Rect, cfg: &CullConfig) -> Result<QuadTree> {
    if let Some(k) = keypoints.iter().find(|k| !bounds.contains(k.x, k.y)) {
        return Err(Error::KeypointOutOfBounds { x: k.x, y: k.y });
    }
    let pts: Vec<usize> = (0..keypoints.len()).collect();
    Ok(QuadTree { root: split(keypoints, bounds, 0, pts, cfg) })
}

fn split(kps: &[Keypoint], rect: Rect, depth: usize, points: Vec<usize>, cfg: &CullConfig) -> QuadNode {
    if points.len() <= cfg.max_per_leaf || depth >= cfg.max_depth || rect.w < 2 || rect.h < 2 {
        return QuadNode { rect, depth, children: Vec::new(), points };
    }
    let (lw, th) = (rect.w / 2, rect.h / 2);
    let (cx, cy) = ((rect.x + lw) as f64, (rect.y + th) as f64);
    let quads = [
        Rect::new(rect.x, rect.y, lw, th),
        Rect::new(rect.x + lw, rect.y, rect.w - lw, th),
        Rect::new(rect.x, rect.y + th, lw, rect.h - th),
        Rect::new(rect.x + lw, rect.y + th, rect.w - lw, rect.h - th),
    ];
    let mut buckets: [Vec<usize>; 4] = Default::default();
    for i in points {
        let right = kps[i].x >= cx;
        let bottom = kps[i].y >= cy;
        buckets[(bottom as usize) * 2 + right as usize].push(i);
    }
    let children = quads.into_iter().zip(buckets).map(|(r, b)| split(kps, r, depth + 1, b, cfg)).collect();
    QuadNode { rect, depth, children, points: Vec::new() }
}

/// Keypoints per pixel in a leaf.
pub fn density(leaf: &QuadNode) -> f64 {
    let area = leaf.rect.area();
    if area == 0 {
        return 0.0;
    }
    leaf.points.len() as f64 / area as f64
}

/// Population standard deviation of the intensities inside `rect`.
pub fn local_contrast(img: &GrayImage, rect: Rect) -> f64 {
    let view = img.view(rect);
    if view.is_empty() {
        return 0.0;
    }
    let (mut sum, mut sq) = (0u64, 0u64);
    for v in view.pixels() {
        sum += v as u64;
        sq += (v as u64) * (v as u64);
    }
    let n = view.rect().area() as f64;
    let mean = sum as f64 / n;
    (sq as f64 / n - mean * mean).max(0.0).sqrt()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn lighting_influence(h_c: f64, cfg: &CullConfig) -> f64 {
    sigmoid(cfg.rho * (h_c - cfg.h_th))
}

pub fn stability_score(density: f64, c_light: f64, cfg: &CullConfig) -> f64 {
    let lighting = if cfg.invert_lighting_term { c_light } else { 1.0 - c_light };
    cfg.w1 * sigmoid(cfg.k * (density - cfg.d_opt)) + cfg.w2 * lighting
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityRecord {
    pub index: usize,
    pub leaf: Rect,
    pub leaf_area: usize,
    pub density: f64,
    pub h_c: f64,
    pub c_light: f64,
    pub score: f64,
    pub culled: bool,
}

#[derive(Clone, Debug)]
pub struct CullOutcome {
    pub kept: Vec<Keypoint>,
    /// One record per input keypoint, in input order.
    pub report: Vec<StabilityRecord>,
    pub tree: QuadTree,
}

pub fn cull(keypoints: &[Keypoint], img: &GrayImage, cfg: &CullConfig) -> Result<CullOutcome> {
    let tree = build_quadtree(keypoints, img.bounds(), cfg)?;
    let mut report: Vec<Option<StabilityRecord>> = vec![None; keypoints.len()];
    for leaf in tree.root.leaves() {
        if leaf.points.is_empty() {
            continue;
        }
        let d = density(leaf);
        let h_c = local_contrast(img, leaf.rect);
        let c_light = lighting_influence(h_c, cfg);
        let score = stability_score(d, c_light, cfg);
        for &i in &leaf.points {
            report[i] = Some(StabilityRecord {
                index: i,
                leaf: leaf.rect,
                leaf_area: leaf.rect.area(),
                density: d,
                h_c,
                c_light,
                score,
                culled: score < cfg.s_min,
            });
        }
    }
    let report: Vec<StabilityRecord> = report.into_iter().map(|r| r.expect("every keypoint lands in a leaf")).collect();
    let kept = keypoints.iter().zip(&report).filter(|(_, r)| !r.culled).map(|(k, _)| *k).collect();
    Ok(CullOutcome { kept, report, tree })
}
