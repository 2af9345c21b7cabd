//! Coarse-grained path skeletons, surcharge accounting, break-point
//! detection with the cone condition, and energy-entropy diagnostics.
//!
//! The skeleton of a path is built greedily: starting from the first
//! vertex, hop to the first later vertex outside the ball of radius `K`
//! (in the directional decay norm) around the current skeleton point, and
//! append the path end when the loop stops. Skeleton hops measured
//! against a boundary dual then split into forward motion and surcharge,
//! and hops paying a surcharge of order `K` are the backtracking ones the
//! energy-entropy argument suppresses.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{inner, inner_unchecked, Cone, DualVector, LatticePath, Point};
use crate::renewal::regeneration_points;
use crate::saw::{enumeration_cap, SawDfs};
use crate::weights::SawModel;
use crate::wulff::WulffBody;

/// Coarse-grained subsequence of a path at scale `K`.
#[derive(Clone, Debug, Serialize)]
pub struct Skeleton {
    pub points: Vec<Point>,
    pub scale: f64,
    /// Indices of the skeleton points in the original path.
    pub indices: Vec<usize>,
}

/// Greedy skeleton construction at ball radius `K` in the body norm.
pub fn build_skeleton(path: &LatticePath, k_scale: f64, body: &WulffBody) -> Result<Skeleton> {
    if !(k_scale > 0.0) {
        return Err(Error::domain(format!(
            "skeleton scale must be positive, got {k_scale}"
        )));
    }
    let mut points = vec![path.vertices[0].clone()];
    let mut indices = vec![0usize];
    let mut anchor = 0usize;
    loop {
        let mut next = None;
        for (offset, v) in path.vertices[anchor + 1..].iter().enumerate() {
            // ties count as inside the ball
            if body.xi(&v.sub(&path.vertices[anchor])) > k_scale {
                next = Some(anchor + 1 + offset);
                break;
            }
        }
        match next {
            Some(idx) => {
                points.push(path.vertices[idx].clone());
                indices.push(idx);
                anchor = idx;
            }
            None => break,
        }
    }
    let last = path.vertices.len() - 1;
    if *indices.last().unwrap() != last {
        points.push(path.vertices[last].clone());
        indices.push(last);
    }
    Ok(Skeleton {
        points,
        scale: k_scale,
        indices,
    })
}

/// Per-hop surcharges of a skeleton against a boundary dual.
#[derive(Clone, Debug, Serialize)]
pub struct SurchargeReport {
    pub direction: DualVector,
    pub per_hop: Vec<f64>,
    pub total: f64,
}

/// How far outside the body a dual may sit before surcharges lose their
/// sign guarantee.
const GAUGE_TOL: f64 = 1e-6;

/// Surcharge cost of each skeleton hop, `xi(v) - (t, v)`, and the total.
///
/// `t` must lie in (or on) the body up to tolerance; outside duals can
/// produce negative surcharges and are rejected. Values within rounding
/// of zero are clamped to zero.
pub fn surcharge(skeleton: &Skeleton, t: &DualVector, body: &WulffBody) -> Result<SurchargeReport> {
    let gauge = body.dual_gauge(t)?;
    if gauge > 1.0 + GAUGE_TOL {
        return Err(Error::domain(format!(
            "dual lies outside the body (gauge {gauge:.6}); surcharges could be negative"
        )));
    }
    let mut per_hop = Vec::with_capacity(skeleton.points.len().saturating_sub(1));
    let mut total = 0.0;
    for w in skeleton.points.windows(2) {
        let v = w[1].sub(&w[0]);
        let xi = body.xi(&v);
        let raw = xi - inner(t, &v)?;
        // interpolation of the support samples can leave rounding-scale
        // negatives for interior duals
        let s = if raw < 0.0 && raw > -1e-9 * xi.abs().max(1.0) {
            0.0
        } else {
            raw
        };
        if s < 0.0 {
            return Err(Error::domain(format!(
                "negative surcharge {s:.3e} for hop {:?}; dual is inconsistent with the body",
                v.0
            )));
        }
        per_hop.push(s);
        total += s;
    }
    Ok(SurchargeReport {
        direction: t.clone(),
        per_hop,
        total,
    })
}

/// Indices of break points: regeneration points whose entire suffix stays
/// inside the translated ball-plus-cone set `K U + C_delta(t)`.
pub fn break_points(
    path: &LatticePath,
    t: &DualVector,
    k_scale: f64,
    delta: f64,
    body: &WulffBody,
) -> Result<Vec<usize>> {
    if !(k_scale > 0.0) {
        return Err(Error::domain("break-point scale must be positive"));
    }
    let cone = Cone::new(t.clone(), delta)?;
    let regens = regeneration_points(path, t)?;
    let mut out = Vec::new();
    for l in regens {
        let anchor = &path.vertices[l];
        let confined = path.vertices[l + 1..].iter().all(|v| {
            ball_plus_cone_contains(&v.sub(anchor), k_scale, &cone, body)
        });
        if confined {
            out.push(l);
        }
    }
    Ok(out)
}

/// Membership in the Minkowski sum of the `K`-ball of the body norm and
/// the open cone: is there a split `v = b + c` with `xi(b) <= K` and `c`
/// in the cone?
///
/// Minimizes `xi(v - c)` over the cone by nested section searches; the
/// objective is convex in `c` and the cone is convex, so the golden
/// sections converge. Diagnostic accuracy, not proof grade.
fn ball_plus_cone_contains(v: &Point, k_scale: f64, cone: &Cone, body: &WulffBody) -> bool {
    if body.xi(v) <= k_scale {
        return true;
    }
    if v.dim() == 1 {
        if cone_contains_real(cone, &[v.0[0] as f64], body) {
            return true;
        }
        // cone = a half-line; subtract its reach and test the ball
        let sign = if cone.axis.0[0] > 0.0 { 1.0 } else { -1.0 };
        let c = (v.0[0] as f64 * sign).max(0.0) * sign;
        return xi_real(body, &[v.0[0] as f64 - c]) <= k_scale;
    }
    if cone_contains_real(cone, &[v.0[0] as f64, v.0[1] as f64], body) {
        return true;
    }
    // 2D: the cone is an angular sector; minimize over direction and radius
    let sector = cone_sector(cone, body);
    let (lo, hi) = match sector {
        Some(s) => s,
        None => return false,
    };
    let mut best = f64::INFINITY;
    let probes = 48;
    for i in 0..=probes {
        let alpha = lo + (hi - lo) * i as f64 / probes as f64;
        let dir = [alpha.cos(), alpha.sin()];
        best = best.min(min_over_ray(v, &dir, body));
        if best <= k_scale {
            return true;
        }
    }
    best <= k_scale
}

fn xi_real(body: &WulffBody, v: &[f64]) -> f64 {
    match body.dim {
        1 => body.support[0] * v[0].abs(),
        _ => {
            let r = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if r == 0.0 {
                0.0
            } else {
                r * body.support_at_angle(v[1].atan2(v[0]))
            }
        }
    }
}

fn cone_contains_real(cone: &Cone, v: &[f64], body: &WulffBody) -> bool {
    let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    let proj: f64 = cone.axis.0.iter().zip(v).map(|(a, b)| a * b).sum();
    proj > (1.0 - cone.aperture) * xi_real(body, v)
}

/// Angular section of the cone, probed on a fine grid.
fn cone_sector(cone: &Cone, body: &WulffBody) -> Option<(f64, f64)> {
    let probes = 720;
    let mut angles = Vec::new();
    for i in 0..probes {
        let a = 2.0 * std::f64::consts::PI * i as f64 / probes as f64;
        if cone_contains_real(cone, &[a.cos(), a.sin()], body) {
            angles.push(a);
        }
    }
    if angles.is_empty() {
        return None;
    }
    // the sector is connected; unwrap against the axis angle
    let axis = cone.axis.0[1].atan2(cone.axis.0[0]);
    let tau = 2.0 * std::f64::consts::PI;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for a in angles {
        let mut rel = a - axis;
        while rel > std::f64::consts::PI {
            rel -= tau;
        }
        while rel < -std::f64::consts::PI {
            rel += tau;
        }
        lo = lo.min(rel);
        hi = hi.max(rel);
    }
    Some((axis + lo, axis + hi))
}

/// Minimum of `xi(v - r * dir)` over `r >= 0` by ternary search.
fn min_over_ray(v: &Point, dir: &[f64; 2], body: &WulffBody) -> f64 {
    let vf = [v.0[0] as f64, v.0[1] as f64];
    let mut lo = 0.0;
    let mut hi = 4.0 * (vf[0].abs() + vf[1].abs()) + 8.0;
    for _ in 0..80 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let f1 = xi_real(body, &[vf[0] - m1 * dir[0], vf[1] - m1 * dir[1]]);
        let f2 = xi_real(body, &[vf[0] - m2 * dir[0], vf[1] - m2 * dir[1]]);
        if f1 < f2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let r = 0.5 * (lo + hi);
    xi_real(body, &[vf[0] - r * dir[0], vf[1] - r * dir[1]])
}

/// Weight-resolved histogram of high-surcharge skeleton hops over all
/// enumerated walks from the origin to `target`.
#[derive(Clone, Debug, Serialize)]
pub struct SurchargeHistogram {
    pub target: Point,
    pub scale: f64,
    /// Surcharge threshold classifying a hop as backtracking.
    pub threshold: f64,
    /// total path weight by number of backtracking hops
    pub weight_by_count: BTreeMap<usize, f64>,
}

impl SurchargeHistogram {
    pub fn total_weight(&self) -> f64 {
        self.weight_by_count.values().sum()
    }

    /// Fraction of weight carried by paths with at least one
    /// backtracking hop.
    pub fn backtracking_fraction(&self) -> f64 {
        let total = self.total_weight();
        if total == 0.0 {
            return 0.0;
        }
        let back: f64 = self
            .weight_by_count
            .iter()
            .filter(|(&c, _)| c >= 1)
            .map(|(_, &w)| w)
            .sum();
        back / total
    }
}

/// Hops with surcharge at least `scale / 2` count as backtracking.
pub const BACKTRACK_THRESHOLD_FRACTION: f64 = 0.5;

/// Enumerate every walk `0 -> target` up to length `n_max`, skeletonize at
/// `k_scale`, and aggregate path weights by the number of high-surcharge
/// hops.
pub fn surcharge_histogram(
    model: &SawModel,
    target: &Point,
    n_max: u32,
    k_scale: f64,
    t: &DualVector,
    body: &WulffBody,
) -> Result<SurchargeHistogram> {
    let cap = enumeration_cap(model.dim);
    if n_max > cap {
        return Err(Error::resource(format!(
            "requested horizon {n_max} exceeds the d={} enumeration cap {cap}",
            model.dim
        )));
    }
    let gauge = body.dual_gauge(t)?;
    if gauge > 1.0 + GAUGE_TOL {
        return Err(Error::domain(format!(
            "dual lies outside the body (gauge {gauge:.6})"
        )));
    }
    let threshold = BACKTRACK_THRESHOLD_FRACTION * k_scale;
    let dfs = SawDfs::new(model.dim, n_max);
    let dim = model.dim;
    let mut weight_by_count: BTreeMap<usize, f64> = BTreeMap::new();
    let mut vertices: Vec<Point> = Vec::with_capacity(n_max as usize + 1);
    let weights: Vec<f64> = (0..=n_max)
        .map(|n| (-model.beta * n as f64).exp())
        .collect();

    let mut err: Option<Error> = None;
    dfs.run(|coords, depth, _| {
        vertices.truncate(depth);
        vertices.push(Point(coords[..dim].to_vec()));
        if depth == 0 || err.is_some() {
            return;
        }
        if vertices[depth] != *target {
            return;
        }
        let path = LatticePath {
            vertices: vertices.clone(),
        };
        let skeleton = match build_skeleton(&path, k_scale, body) {
            Ok(s) => s,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let mut count = 0usize;
        for w in skeleton.points.windows(2) {
            let v = w[1].sub(&w[0]);
            let s = body.xi(&v) - inner_unchecked(t, &v);
            if s >= threshold {
                count += 1;
            }
        }
        *weight_by_count.entry(count).or_insert(0.0) += weights[depth];
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(SurchargeHistogram {
        target: target.clone(),
        scale: k_scale,
        threshold,
        weight_by_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::saw_model;
    use crate::wulff::build_body;

    fn pt(coords: &[i64]) -> Point {
        Point(coords.to_vec())
    }

    fn body_1d_unit() -> WulffBody {
        // 1D body at beta = 1: xi(v) = |v|
        let model = saw_model(1.0, 1).unwrap();
        build_body(&model, 10, 2).unwrap()
    }

    #[test]
    fn skeleton_short_path_is_endpoints() {
        let body = body_1d_unit();
        let path = LatticePath::new((0..=2).map(|i| pt(&[i])).collect()).unwrap();
        let sk = build_skeleton(&path, 3.0, &body).unwrap();
        assert_eq!(sk.points, vec![pt(&[0]), pt(&[2])]);
    }

    #[test]
    fn skeleton_1d_straight_run() {
        let body = body_1d_unit();
        let path = LatticePath::new((0..=10).map(|i| pt(&[i])).collect()).unwrap();
        let sk = build_skeleton(&path, 3.0, &body).unwrap();
        assert_eq!(
            sk.points,
            vec![pt(&[0]), pt(&[4]), pt(&[8]), pt(&[10])],
            "greedy exits at the first vertex beyond each ball"
        );
    }

    #[test]
    fn skeleton_tiny_scale_keeps_every_vertex() {
        let body = body_1d_unit();
        let path = LatticePath::new((0..=5).map(|i| pt(&[i])).collect()).unwrap();
        let sk = build_skeleton(&path, 1e-9, &body).unwrap();
        assert_eq!(sk.points.len(), path.vertices.len());
    }

    #[test]
    fn skeleton_empty_path_single_point() {
        let body = body_1d_unit();
        let path = LatticePath::empty_at(pt(&[0]));
        let sk = build_skeleton(&path, 2.0, &body).unwrap();
        assert_eq!(sk.points, vec![pt(&[0])]);
    }

    #[test]
    fn surcharge_forward_hop_is_zero() {
        let body = body_1d_unit();
        let t = DualVector(body.duals[0].clone());
        let path = LatticePath::new(vec![pt(&[0]), pt(&[1]), pt(&[2])]).unwrap();
        let sk = build_skeleton(&path, 0.5, &body).unwrap();
        let rep = surcharge(&sk, &t, &body).unwrap();
        assert!(rep.per_hop.iter().all(|&s| s.abs() < 1e-9));
        assert!(rep.total.abs() < 1e-9);
    }

    #[test]
    fn surcharge_backward_hop_pays_double() {
        // 1D at beta=1: xi(v) = |v|, boundary dual t = 1; a hop of -2 pays
        // 2 - (-2) = 4
        let body = body_1d_unit();
        let t = DualVector(vec![body.duals[0][0]]);
        let sk = Skeleton {
            points: vec![pt(&[0]), pt(&[-2])],
            scale: 1.0,
            indices: vec![0, 1],
        };
        let rep = surcharge(&sk, &t, &body).unwrap();
        assert!((rep.per_hop[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn surcharge_zero_length_hop() {
        let body = body_1d_unit();
        let t = DualVector(vec![body.duals[0][0]]);
        let sk = Skeleton {
            points: vec![pt(&[0]), pt(&[0])],
            scale: 1.0,
            indices: vec![0, 0],
        };
        let rep = surcharge(&sk, &t, &body).unwrap();
        assert_eq!(rep.per_hop[0], 0.0);
    }

    #[test]
    fn surcharge_rejects_outside_dual() {
        let body = body_1d_unit();
        let t = DualVector(vec![3.0 * body.duals[0][0]]);
        let sk = Skeleton {
            points: vec![pt(&[0]), pt(&[1])],
            scale: 1.0,
            indices: vec![0, 1],
        };
        assert!(matches!(
            surcharge(&sk, &t, &body),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn break_points_1d_equal_regeneration_points() {
        let body = body_1d_unit();
        let t = DualVector(vec![body.duals[0][0]]);
        let path = LatticePath::new((0..=6).map(|i| pt(&[i])).collect()).unwrap();
        let breaks = break_points(&path, &t, 2.0, 0.1, &body).unwrap();
        let regens = regeneration_points(&path, &t).unwrap();
        assert_eq!(breaks, regens);
    }

    #[test]
    fn break_points_hook_has_none() {
        let model = saw_model(1.2, 2).unwrap();
        let body = build_body(&model, 8, 32).unwrap();
        // exactly axial dual scaled to the boundary
        let t = DualVector(vec![body.support[0], 0.0]);
        let path = LatticePath::new(vec![
            pt(&[0, 0]),
            pt(&[0, 1]),
            pt(&[1, 1]),
            pt(&[1, 0]),
        ])
        .unwrap();
        let regens = regeneration_points(&path, &t).unwrap();
        assert_eq!(regens, vec![2]);
        // suffix of the regeneration point leaves the small ball and sits
        // outside the forward cone
        let breaks = break_points(&path, &t, 0.05, 0.1, &body).unwrap();
        assert!(breaks.is_empty());
    }

    #[test]
    fn break_points_subset_of_regeneration_points() {
        let model = saw_model(1.2, 2).unwrap();
        let body = build_body(&model, 8, 32).unwrap();
        let t = DualVector(body.duals[0].clone());
        for walk in crate::weights::enumerate_saws(2, 7) {
            if walk.len() < 2 {
                continue;
            }
            let breaks = break_points(&walk, &t, 1.0, 0.2, &body).unwrap();
            let regens = regeneration_points(&walk, &t).unwrap();
            for b in &breaks {
                assert!(regens.contains(b));
            }
        }
    }

    #[test]
    fn break_points_empty_interior() {
        let body = body_1d_unit();
        let t = DualVector(vec![body.duals[0][0]]);
        let path = LatticePath::new(vec![pt(&[0]), pt(&[1])]).unwrap();
        assert!(break_points(&path, &t, 1.0, 0.1, &body)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn histogram_1d_forward_target_never_backtracks() {
        let model = saw_model(1.0, 1).unwrap();
        let body = body_1d_unit();
        let t = DualVector(vec![body.duals[0][0]]);
        let hist =
            surcharge_histogram(&model, &pt(&[4]), 10, 2.0, &t, &body).unwrap();
        assert_eq!(hist.weight_by_count.len(), 1);
        assert!(hist.weight_by_count.contains_key(&0));
        assert_eq!(hist.backtracking_fraction(), 0.0);
    }

    #[test]
    fn histogram_unreachable_target_empty() {
        let model = saw_model(1.0, 2).unwrap();
        let body = build_body(&model, 8, 32).unwrap();
        let t = DualVector(body.duals[0].clone());
        let hist =
            surcharge_histogram(&model, &pt(&[5, 0]), 3, 2.0, &t, &body).unwrap();
        assert!(hist.weight_by_count.is_empty());
    }

    #[test]
    fn histogram_backtracking_fraction_decreases_in_scale() {
        // unit-ball norm decouples the effect from near-critical bodies
        let model = saw_model(1.0, 2).unwrap();
        let body = WulffBody::circle(1.0, 64);
        let t = DualVector(vec![1.0, 0.0]);
        let mut last = f64::INFINITY;
        for k in [2.0, 3.0, 4.0] {
            let hist =
                surcharge_histogram(&model, &pt(&[6, 0]), 10, k, &t, &body).unwrap();
            let frac = hist.backtracking_fraction();
            assert!(
                frac < last,
                "fraction {frac} did not decrease at scale {k}"
            );
            last = frac;
        }
        assert!(last >= 0.0);
    }
}
