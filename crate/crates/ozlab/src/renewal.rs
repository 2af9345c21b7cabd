//! Regeneration-point detection, unique factorization of walks into
//! boundary and bulk irreducible pieces, the direct correlation function,
//! exact renewal-identity verification, mass-gap estimation, and
//! renewal-based long-distance extrapolation.
//!
//! The cut predicate is strict on the past and non-strict on the future:
//! an interior vertex `l` of a path is a regeneration point for the dual
//! `t` when `max_{j<l} (t,z_j) < (t,z_l) <= min_{j>l} (t,z_j)`. This tie
//! convention makes the factorization unique and turns the decomposition
//! into an exact bijection between walks and piece sequences, which is
//! what the residual check certifies.
//!
//! Cutting at every regeneration point yields four piece classes, each
//! characterized by a predicate on the rebased standalone piece:
//!
//! * `left`   — every vertex before the endpoint projects strictly below
//!              the endpoint; no interior regeneration point.
//! * `bulk`   — as `left`, and additionally no vertex projects below the
//!              start (slab confinement).
//! * `right`  — no vertex projects below the start; no interior
//!              regeneration point.
//! * `no_cut` — paths without any regeneration point; these never split
//!              and sit outside the convolution chain.
//!
//! Walks with at least one regeneration point decompose uniquely as
//! `left ++ bulk^k ++ right`, and every such concatenation is a valid
//! self-avoiding walk because consecutive pieces occupy disjoint
//! projection slabs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{inner, inner_unchecked, DualVector, LatticePath, Point, SpaceLengthSeries};
use crate::saw::{enumeration_cap, RayDecayEstimate, SawDfs, TwoPointTable};
use crate::weights::SawModel;

/// Indices of the regeneration points of `path` for the dual `t`,
/// ascending. Only interior indices qualify.
pub fn regeneration_points(path: &LatticePath, t: &DualVector) -> Result<Vec<usize>> {
    if t.is_zero() {
        return Err(Error::domain("regeneration dual must be nonzero"));
    }
    if t.dim() != path.dim() {
        return Err(Error::DimensionMismatch {
            left: t.dim(),
            right: path.dim(),
        });
    }
    let p: Vec<f64> = path.vertices.iter().map(|v| inner_unchecked(t, v)).collect();
    Ok(regeneration_points_from_projections(&p))
}

pub(crate) fn regeneration_points_from_projections(p: &[f64]) -> Vec<usize> {
    let n = p.len();
    if n < 3 {
        return Vec::new();
    }
    let mut suffix_min = vec![0.0; n];
    suffix_min[n - 1] = p[n - 1];
    for j in (0..n - 1).rev() {
        suffix_min[j] = p[j].min(suffix_min[j + 1]);
    }
    let mut out = Vec::new();
    let mut prefix_max = p[0];
    for l in 1..n - 1 {
        if prefix_max < p[l] && p[l] <= suffix_min[l + 1] {
            out.push(l);
        }
        prefix_max = prefix_max.max(p[l]);
    }
    out
}

/// The decomposition of one path at its regeneration points.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub left: LatticePath,
    pub bulk: Vec<LatticePath>,
    pub right: LatticePath,
    pub direction: DualVector,
}

impl Factorization {
    /// Reassemble the pieces; must reproduce the factorized path exactly.
    pub fn reassemble(&self) -> LatticePath {
        let mut path = self.left.clone();
        for b in &self.bulk {
            path = path.concat(b);
        }
        if !self.right.is_empty() {
            path = path.concat(&self.right);
        }
        path
    }
}

/// Cut `path` at every regeneration point. Without any regeneration point
/// the whole path becomes the left piece and bulk/right stay empty.
pub fn factorize(path: &LatticePath, t: &DualVector) -> Result<Factorization> {
    let cuts = regeneration_points(path, t)?;
    if cuts.is_empty() {
        return Ok(Factorization {
            left: path.clone(),
            bulk: Vec::new(),
            right: LatticePath::empty_at(path.end().clone()),
            direction: t.clone(),
        });
    }
    let piece = |a: usize, b: usize| LatticePath {
        vertices: path.vertices[a..=b].to_vec(),
    };
    let left = piece(0, cuts[0]);
    let bulk = cuts
        .windows(2)
        .map(|w| piece(w[0], w[1]))
        .collect::<Vec<_>>();
    let right = piece(cuts[cuts.len() - 1], path.vertices.len() - 1);
    Ok(Factorization {
        left,
        bulk,
        right,
        direction: t.clone(),
    })
}

/// Which piece classes a rebased standalone path belongs to.
#[derive(Clone, Copy, Default, Debug, PartialEq, Eq)]
pub struct PieceClasses {
    pub left: bool,
    pub bulk: bool,
    pub right: bool,
    pub no_cut: bool,
}

/// Classify a rebased path (projections relative to its start).
pub(crate) fn classify_projections(p: &[f64]) -> PieceClasses {
    let k = p.len() - 1;
    if k == 0 {
        return PieceClasses {
            left: false,
            bulk: false,
            right: false,
            no_cut: true,
        };
    }
    let no_regen = regeneration_points_from_projections(p).is_empty();
    let end = p[k];
    let mut below_start = false;
    let mut end_is_strict_max = true;
    for (j, &pj) in p.iter().enumerate() {
        if pj < p[0] {
            below_start = true;
        }
        if j < k && pj >= end {
            end_is_strict_max = false;
        }
    }
    PieceClasses {
        left: no_regen && end_is_strict_max,
        bulk: no_regen && end_is_strict_max && !below_start,
        right: no_regen && !below_start,
        no_cut: no_regen,
    }
}

/// Classify a path against the piece predicates for the dual `t`.
pub fn classify_piece(path: &LatticePath, t: &DualVector) -> Result<PieceClasses> {
    if t.is_zero() {
        return Err(Error::domain("classification dual must be nonzero"));
    }
    let start = inner(t, path.start())?;
    let p: Vec<f64> = path
        .vertices
        .iter()
        .map(|v| inner_unchecked(t, v) - start)
        .collect();
    Ok(classify_projections(&p))
}

/// Length-resolved weight sums over the four piece classes for one
/// decomposition dual at one horizon.
#[derive(Clone, Debug)]
pub struct DirectCorrelation {
    pub beta: f64,
    pub dim: usize,
    pub horizon: u32,
    pub direction: DualVector,
    pub left: SpaceLengthSeries,
    pub bulk: SpaceLengthSeries,
    pub right: SpaceLengthSeries,
    /// Paths with no regeneration point at all (includes the empty path).
    pub no_cut: SpaceLengthSeries,
}

/// Enumerate the piece classes exactly up to length `n_max`.
pub fn direct_correlation(model: &SawModel, t: &DualVector, n_max: u32) -> Result<DirectCorrelation> {
    if t.is_zero() {
        return Err(Error::domain("decomposition dual must be nonzero"));
    }
    if t.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            left: t.dim(),
            right: model.dim,
        });
    }
    let cap = enumeration_cap(model.dim);
    if n_max > cap {
        return Err(Error::resource(format!(
            "requested horizon {n_max} exceeds the d={} enumeration cap {cap}",
            model.dim
        )));
    }

    let dfs = SawDfs::new(model.dim, n_max);
    let levels = n_max as usize + 1;
    // dense accumulators: class x (grid index, length)
    let mut acc = vec![vec![0.0f64; dfs.grid_len() * levels]; 4];
    let weights: Vec<f64> = (0..levels)
        .map(|n| (-model.beta * n as f64).exp())
        .collect();
    let t_axis: Vec<f64> = t.0.clone();
    let mut projections: Vec<f64> = Vec::with_capacity(levels);

    dfs.run(|coords, depth, idx| {
        projections.truncate(depth);
        let p: f64 = coords
            .iter()
            .zip(&t_axis)
            .map(|(&c, &tc)| c as f64 * tc)
            .sum();
        projections.push(p);
        let classes = classify_projections(&projections);
        let w = weights[depth];
        let slot = idx * levels + depth;
        if classes.left {
            acc[0][slot] += w;
        }
        if classes.bulk {
            acc[1][slot] += w;
        }
        if classes.right {
            acc[2][slot] += w;
        }
        if classes.no_cut {
            acc[3][slot] += w;
        }
    });

    let mut series: Vec<SpaceLengthSeries> = (0..4)
        .map(|_| SpaceLengthSeries::new(model.dim, n_max))
        .collect();
    for idx in 0..dfs.grid_len() {
        let base = idx * levels;
        if acc.iter().all(|a| a[base..base + levels].iter().all(|&v| v == 0.0)) {
            continue;
        }
        let coords = dfs.decode(idx as i64);
        for (class, a) in acc.iter().enumerate() {
            for (n, &v) in a[base..base + levels].iter().enumerate() {
                if v != 0.0 {
                    series[class].add(Point(coords.clone()), n as u32, v);
                }
            }
        }
    }
    let no_cut = series.pop().unwrap();
    let right = series.pop().unwrap();
    let bulk = series.pop().unwrap();
    let left = series.pop().unwrap();

    debug_assert!(bulk
        .iter()
        .chain(left.iter())
        .all(|(x, _, _)| inner_unchecked(t, x) > 0.0));
    debug_assert!(right.iter().all(|(x, _, _)| inner_unchecked(t, x) >= 0.0));

    Ok(DirectCorrelation {
        beta: model.beta,
        dim: model.dim,
        horizon: n_max,
        direction: t.clone(),
        left,
        bulk,
        right,
        no_cut,
    })
}

/// Rebuild the two-point series from the piece classes,
/// `no_cut + left * (sum_k bulk^k) * right`, and return the largest
/// absolute coefficient discrepancy against the enumerated table over
/// displacements with `(t, x) > 0` and lengths up to the shared horizon.
///
/// The decomposition is a bijection, so the residual sits at floating
/// point rounding scale whenever table and classes agree on parameters.
pub fn renewal_residual(table: &TwoPointTable, dc: &DirectCorrelation) -> Result<f64> {
    if table.dim != dc.dim {
        return Err(Error::DimensionMismatch {
            left: table.dim,
            right: dc.dim,
        });
    }
    if table.horizon != dc.horizon || table.beta != dc.beta {
        return Err(Error::domain(format!(
            "table (beta={}, N={}) and direct correlation (beta={}, N={}) disagree",
            table.beta, table.horizon, dc.beta, dc.horizon
        )));
    }
    let chain = dc
        .left
        .convolve(&dc.bulk.geometric_sum()?)?
        .convolve(&dc.right)?;
    let mut residual: f64 = 0.0;
    let keys: std::collections::BTreeSet<(Point, u32)> = table
        .series
        .iter()
        .map(|(x, n, _)| (x.clone(), n))
        .chain(chain.iter().map(|(x, n, _)| (x.clone(), n)))
        .chain(dc.no_cut.iter().map(|(x, n, _)| (x.clone(), n)))
        .collect();
    for (x, n) in keys {
        if inner_unchecked(&dc.direction, &x) <= 0.0 {
            continue;
        }
        let lhs = table.series.get(&x, n);
        let rhs = dc.no_cut.get(&x, n) + chain.get(&x, n);
        residual = residual.max((lhs - rhs).abs());
    }
    Ok(residual)
}

/// Mass-gap record: the decay rate of the bulk kernel along a ray must
/// strictly exceed the decay rate of the full two-point function.
#[derive(Clone, Debug, Serialize)]
pub struct MassGapEstimate {
    pub xi_full: RayDecayEstimate,
    /// `None` encodes the infinite-support sentinel: the bulk kernel has
    /// fewer than three support points along the ray, so its decay rate
    /// is reported as +infinity.
    pub xi_direct: Option<RayDecayEstimate>,
    pub gap: f64,
    pub gap_lower: f64,
}

/// Estimate the mass gap along `direction`.
pub fn mass_gap_estimate(
    dc: &DirectCorrelation,
    table: &TwoPointTable,
    direction: &Point,
) -> Result<MassGapEstimate> {
    if direction.is_zero() {
        return Err(Error::domain("mass gap direction must be nonzero"));
    }
    let forward = inner(&dc.direction, direction)?;
    if forward <= 0.0 {
        return Err(Error::domain(format!(
            "direction {:?} has nonpositive projection {forward} on the decomposition dual",
            direction.0
        )));
    }
    let xi_full = crate::saw::decay_rate_estimate(table, direction)?;

    // ray sums of the bulk kernel
    let step_l1 = direction.l1_norm();
    let reach = dc.horizon as i64 / step_l1;
    let mut support = Vec::new();
    for k in 1..=reach {
        let v = dc.bulk.spatial_at(&direction.scale(k));
        if v > 0.0 {
            support.push((k, v));
        }
    }
    if support.len() < 3 {
        return Ok(MassGapEstimate {
            xi_full,
            xi_direct: None,
            gap: f64::INFINITY,
            gap_lower: f64::INFINITY,
        });
    }
    let bulk_table = TwoPointTable {
        beta: dc.beta,
        dim: dc.dim,
        horizon: dc.horizon,
        series: {
            let mut s = SpaceLengthSeries::new(dc.dim, dc.horizon);
            for (x, n, w) in dc.bulk.iter() {
                s.add(x.clone(), n, w);
            }
            s
        },
    };
    let xi_direct = crate::saw::decay_rate_estimate(&bulk_table, direction)?;
    let gap = xi_direct.value - xi_full.value;
    let gap_lower = xi_direct.bracket.0 - xi_full.bracket.1;
    Ok(MassGapEstimate {
        xi_full,
        xi_direct: Some(xi_direct),
        gap,
        gap_lower,
    })
}

/// Total mass of the tilted bulk kernel, `sum bulk(y, m) e^{(t', y)}`.
/// At a boundary dual this approaches 1 from below as the horizon grows.
pub fn tilted_step_mass(dc: &DirectCorrelation, tilt: &DualVector) -> Result<f64> {
    if tilt.dim() != dc.dim {
        return Err(Error::DimensionMismatch {
            left: tilt.dim(),
            right: dc.dim,
        });
    }
    let mut sum = 0.0;
    for (y, _, w) in dc.bulk.iter() {
        let e = inner_unchecked(tilt, y);
        if e > 700.0 {
            return Err(Error::Range(format!(
                "tilted mass overflows at displacement {:?}",
                y.0
            )));
        }
        sum += w * e.exp();
    }
    Ok(sum)
}

/// Predicted two-point values far beyond the enumeration horizon, from the
/// spatial renewal chain `no_cut + left * (sum_k bulk^{*k}) * right` with
/// the length variable summed out.
pub fn oz_extrapolate(
    dc: &DirectCorrelation,
    targets: &[Point],
) -> Result<std::collections::BTreeMap<Point, f64>> {
    let mut out = std::collections::BTreeMap::new();
    if targets.is_empty() {
        return Ok(out);
    }
    for x in targets {
        if x.dim() != dc.dim {
            return Err(Error::DimensionMismatch {
                left: x.dim(),
                right: dc.dim,
            });
        }
        if inner_unchecked(&dc.direction, x) <= 0.0 {
            return Err(Error::data(format!(
                "extrapolation target {:?} is not forward of the decomposition dual",
                x.0
            )));
        }
        out.insert(x.clone(), 0.0);
    }

    let left = dc.left.spatial();
    let bulk = dc.bulk.spatial();
    let right = dc.right.spatial();
    let no_cut = dc.no_cut.spatial();
    if bulk.is_empty() {
        for (x, g) in out.iter_mut() {
            *g = no_cut.get(x).copied().unwrap_or(0.0);
        }
        return Ok(out);
    }

    let max_proj = targets
        .iter()
        .map(|x| inner_unchecked(&dc.direction, x))
        .fold(f64::NEG_INFINITY, f64::max);
    let min_advance = bulk
        .keys()
        .map(|y| inner_unchecked(&dc.direction, y))
        .fold(f64::INFINITY, f64::min);
    debug_assert!(min_advance > 0.0);

    for (x, g) in out.iter_mut() {
        *g += no_cut.get(x).copied().unwrap_or(0.0);
    }

    // chain = left * bulk^k, accumulated against right at each k
    let mut chain = left;
    loop {
        // contract the chain with the right boundary class at the targets
        for (x, g) in out.iter_mut() {
            for (y, wr) in &right {
                if let Some(wl) = chain.get(&x.sub(y)) {
                    *g += wl * wr;
                }
            }
        }
        // advance by one bulk piece, pruning atoms that can no longer
        // reach any target (the kernel only moves forward) or whose
        // relative weight is below resolvable scale
        let mut next: std::collections::BTreeMap<Point, f64> = std::collections::BTreeMap::new();
        for (y, wb) in &bulk {
            for (z, wc) in &chain {
                let pos = z.add(y);
                if inner_unchecked(&dc.direction, &pos) > max_proj {
                    continue;
                }
                *next.entry(pos).or_insert(0.0) += wb * wc;
            }
        }
        if next.is_empty() {
            break;
        }
        let peak = next.values().fold(0.0f64, |a, &b| a.max(b));
        next.retain(|_, w| *w > peak * 1e-40);
        chain = next;
        let reachable = chain
            .keys()
            .any(|z| inner_unchecked(&dc.direction, z) <= max_proj);
        if !reachable {
            break;
        }
    }
    Ok(out)
}
