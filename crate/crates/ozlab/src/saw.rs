//! Exact length-truncated enumeration of weighted self-avoiding walks:
//! the two-point table, tilted susceptibilities, and ray decay estimates.
//!
//! Enumeration is a depth-first search over walk prefixes with the occupied
//! set held in a flat grid; self-avoidance breaks sub-path independence, so
//! nothing is memoized. Hard per-dimension caps keep runtimes bounded and
//! reproducible.

use crate::error::{Error, Result};
use crate::lattice::{inner, DualVector, Point, SpaceLengthSeries};
use crate::weights::SawModel;

/// Hard enumeration caps by dimension.
pub fn enumeration_cap(dim: usize) -> u32 {
    match dim {
        1 => 64,
        2 => 20,
        3 => 14,
        _ => 10,
    }
}

/// Flat-grid DFS over self-avoiding walk prefixes from the origin.
///
/// `visit` sees every prefix exactly once: the flat coordinates of the
/// current vertex chain (d * (depth+1) values) and the grid index of the
/// endpoint. Step order is fixed, so visit order is deterministic.
pub(crate) struct SawDfs {
    pub dim: usize,
    pub n_max: u32,
    strides: Vec<i64>,
    grid_len: usize,
    origin: i64,
}

impl SawDfs {
    pub fn new(dim: usize, n_max: u32) -> Self {
        let side = 2 * n_max as i64 + 1;
        let mut strides = vec![0i64; dim];
        let mut acc = 1i64;
        for axis in 0..dim {
            strides[axis] = acc;
            acc *= side;
        }
        let origin = (0..dim).map(|a| strides[a] * n_max as i64).sum();
        SawDfs {
            dim,
            n_max,
            strides,
            grid_len: acc as usize,
            origin,
        }
    }

    pub fn run(&self, mut visit: impl FnMut(&[i64], usize, usize)) {
        let mut occupied = vec![false; self.grid_len];
        let mut coords: Vec<i64> = vec![0; self.dim];
        let mut idx_stack: Vec<i64> = Vec::with_capacity(self.n_max as usize + 1);
        let mut step_stack: Vec<usize> = Vec::with_capacity(self.n_max as usize + 1);

        // step deltas in fixed order: +e1, -e1, +e2, -e2, ...
        let deltas: Vec<(usize, i64, i64)> = (0..self.dim)
            .flat_map(|a| [(a, 1i64, self.strides[a]), (a, -1i64, -self.strides[a])])
            .collect();

        occupied[self.origin as usize] = true;
        idx_stack.push(self.origin);
        visit(&coords, 0, self.origin as usize);
        if self.n_max == 0 {
            return;
        }
        step_stack.push(0);

        loop {
            let depth = step_stack.len() - 1; // vertices so far - 1
            let next_step = step_stack[depth];
            if next_step == deltas.len() || depth as u32 + 1 > self.n_max {
                // backtrack
                step_stack.pop();
                if step_stack.is_empty() {
                    break;
                }
                let idx = idx_stack.pop().unwrap();
                occupied[idx as usize] = false;
                let (axis, sign, _) = deltas[*step_stack.last().unwrap() - 1];
                coords[axis] -= sign;
                continue;
            }
            step_stack[depth] += 1;
            let (axis, sign, didx) = deltas[next_step];
            // the walk never leaves the +-n_max box, so no bounds check
            if coords[axis].abs() == self.n_max as i64 && coords[axis].signum() == sign {
                continue;
            }
            let idx = idx_stack[depth] + didx;
            if occupied[idx as usize] {
                continue;
            }
            occupied[idx as usize] = true;
            coords[axis] += sign;
            idx_stack.push(idx);
            visit(&coords, depth + 1, idx as usize);
            step_stack.push(0);
        }
    }

    /// Recover lattice coordinates from a grid index.
    pub fn decode(&self, mut idx: i64) -> Vec<i64> {
        let side = 2 * self.n_max as i64 + 1;
        let mut out = vec![0i64; self.dim];
        for c in out.iter_mut() {
            *c = idx % side - self.n_max as i64;
            idx /= side;
        }
        out
    }

    pub fn grid_len(&self) -> usize {
        self.grid_len
    }
}

/// Length-resolved two-point function of a walk model:
/// `series(x, n) = sum over n-step walks from 0 to x of the weight`.
#[derive(Clone, Debug)]
pub struct TwoPointTable {
    pub beta: f64,
    pub dim: usize,
    pub horizon: u32,
    pub series: SpaceLengthSeries,
}

/// Enumerate the exact two-point table up to length `n_max`.
pub fn enumerate_two_point(model: &SawModel, n_max: u32) -> Result<TwoPointTable> {
    let cap = enumeration_cap(model.dim);
    if n_max > cap {
        return Err(Error::resource(format!(
            "requested horizon {n_max} exceeds the d={} enumeration cap {cap}",
            model.dim
        )));
    }
    let dfs = SawDfs::new(model.dim, n_max);
    let levels = n_max as usize + 1;
    let mut accum = vec![0.0f64; dfs.grid_len() * levels];
    let weights: Vec<f64> = (0..levels)
        .map(|n| (-model.beta * n as f64).exp())
        .collect();
    dfs.run(|_, depth, idx| {
        accum[idx * levels + depth] += weights[depth];
    });

    let mut series = SpaceLengthSeries::new(model.dim, n_max);
    for idx in 0..dfs.grid_len() {
        let base = idx * levels;
        if accum[base..base + levels].iter().all(|&v| v == 0.0) {
            continue;
        }
        let coords = dfs.decode(idx as i64);
        for (n, &v) in accum[base..base + levels].iter().enumerate() {
            if v != 0.0 {
                series.add(Point(coords.clone()), n as u32, v);
            }
        }
    }
    Ok(TwoPointTable {
        beta: model.beta,
        dim: model.dim,
        horizon: n_max,
        series,
    })
}

/// Independent walk counter used as a cross-check oracle: a plain recursive
/// enumeration over `Vec<Point>` with a hash-set occupied check, sharing no
/// code with the grid DFS.
pub fn count_walks_reference(dim: usize, n_max: u32) -> Vec<u64> {
    use std::collections::HashSet;
    let mut counts = vec![0u64; n_max as usize + 1];
    let steps: Vec<Point> = (0..dim)
        .flat_map(|a| [Point::unit(dim, a), Point::unit(dim, a).scale(-1)])
        .collect();
    fn recurse(
        occupied: &mut HashSet<Point>,
        at: Point,
        depth: u32,
        n_max: u32,
        steps: &[Point],
        counts: &mut [u64],
    ) {
        counts[depth as usize] += 1;
        if depth == n_max {
            return;
        }
        for s in steps {
            let next = at.add(s);
            if occupied.insert(next.clone()) {
                recurse(occupied, next.clone(), depth + 1, n_max, steps, counts);
                occupied.remove(&next);
            }
        }
    }
    let mut occupied = HashSet::new();
    occupied.insert(Point::zero(dim));
    recurse(
        &mut occupied,
        Point::zero(dim),
        0,
        n_max,
        &steps,
        &mut counts,
    );
    counts
}

/// Exponentially tilted susceptibility at horizon `N`:
/// `sum over (x, n <= N) of exp((t,x)) g^(n)(x)`.
pub fn tilted_susceptibility(table: &TwoPointTable, t: &DualVector) -> Result<f64> {
    if t.dim() != table.dim {
        return Err(Error::DimensionMismatch {
            left: t.dim(),
            right: table.dim,
        });
    }
    let mut sum = 0.0;
    for (x, _, w) in table.series.iter() {
        sum += w * inner(t, x)?.exp();
    }
    Ok(sum)
}

/// A ray decay estimate: the value, a bracket, and the ratio sequence it
/// came from. `monotone_decreasing = false` is the divergence symptom for
/// couplings outside the convergent regime at this horizon.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RayDecayEstimate {
    pub value: f64,
    pub bracket: (f64, f64),
    pub ratios: Vec<(i64, f64)>,
    pub monotone_decreasing: bool,
    pub used_k: (i64, i64),
}

impl RayDecayEstimate {
    pub fn bracket_width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

/// Extra horizon left between the last usable multiple and the enumeration
/// horizon, so ratio estimates are not dominated by truncation.
const RAY_TRUNCATION_SLACK: u32 = 6;

/// Estimate the decay rate of `sum_n g^(n)(k * direction)` in `k`.
///
/// Successive ratios `r_k = -log(g((k+1) dir) / g(k dir))` are formed over
/// a truncation-guarded range; `r_K` at the largest guarded `k` is the
/// first-order Richardson extrapolation of the raw averages
/// `-(1/k) log g(k dir)` and is returned as the value. When the ratio
/// sequence decreases (the convergent regime) the bracket is spanned by
/// the last two ratios; a non-decreasing sequence is the divergence
/// symptom and widens the bracket to the full ratio range.
pub fn decay_rate_estimate(table: &TwoPointTable, direction: &Point) -> Result<RayDecayEstimate> {
    if direction.is_zero() {
        return Err(Error::domain("decay direction must be nonzero"));
    }
    if direction.dim() != table.dim {
        return Err(Error::DimensionMismatch {
            left: direction.dim(),
            right: table.dim,
        });
    }
    let step_l1 = direction.l1_norm();
    let reach = table.horizon as i64 / step_l1;
    let mut gs = Vec::new();
    for k in 1..=reach {
        let g = table.series.spatial_at(&direction.scale(k));
        if g > 0.0 {
            gs.push((k, g));
        }
    }
    if gs.len() < 3 {
        return Err(Error::data(format!(
            "need at least 3 reachable multiples of {:?} within horizon {}, found {}",
            direction.0,
            table.horizon,
            gs.len()
        )));
    }
    // guard against truncation-dominated tail values
    let guarded_max_k = ((table.horizon.saturating_sub(RAY_TRUNCATION_SLACK)) as i64) / step_l1;
    let mut usable: Vec<(i64, f64)> = gs.iter().copied().filter(|(k, _)| *k <= guarded_max_k).collect();
    if usable.len() < 3 {
        usable = gs[gs.len() - 3.min(gs.len())..].to_vec();
    }

    let mut ratios = Vec::new();
    for w in usable.windows(2) {
        let ((k0, g0), (k1, g1)) = (w[0], w[1]);
        if k1 == k0 + 1 {
            ratios.push((k0, g0.ln() - g1.ln()));
        }
    }
    if ratios.is_empty() {
        return Err(Error::data("no consecutive ray multiples to form ratios"));
    }

    let scale = ratios
        .iter()
        .map(|(_, r)| r.abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    let monotone = ratios
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 + 1e-12 * scale.max(1.0));

    let value = ratios[ratios.len() - 1].1;
    let bracket = if monotone && ratios.len() >= 2 {
        let rm1 = ratios[ratios.len() - 2].1;
        (value.min(rm1), value.max(rm1))
    } else {
        let lo = ratios.iter().map(|(_, r)| *r).fold(f64::INFINITY, f64::min);
        let hi = ratios
            .iter()
            .map(|(_, r)| *r)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };

    Ok(RayDecayEstimate {
        value,
        bracket,
        used_k: (usable[0].0, usable[usable.len() - 1].0),
        ratios,
        monotone_decreasing: monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::saw_model;

    fn pt(coords: &[i64]) -> Point {
        Point(coords.to_vec())
    }

    #[test]
    fn two_point_counts_match_reference_2d() {
        let beta = 0.9;
        let model = saw_model(beta, 2).unwrap();
        let table = enumerate_two_point(&model, 6).unwrap();
        let reference = count_walks_reference(2, 6);
        for n in 0..=6u32 {
            let total: f64 = table
                .series
                .iter()
                .filter(|(_, m, _)| *m == n)
                .map(|(_, _, w)| w)
                .sum();
            let walks = total * (beta * n as f64).exp();
            assert!(
                (walks - reference[n as usize] as f64).abs() < 1e-9 * reference[n as usize] as f64,
                "n={n}: {walks} vs {}",
                reference[n as usize]
            );
        }
        assert_eq!(&reference[1..5], &[4, 12, 36, 100]);
    }

    #[test]
    fn two_point_1d_straight_walks() {
        let model = saw_model(1.0, 1).unwrap();
        let table = enumerate_two_point(&model, 8).unwrap();
        for n in 1..=8 {
            let expect = (-(n as f64)).exp();
            assert_eq!(table.series.get(&pt(&[n]), n as u32), expect);
            assert_eq!(table.series.get(&pt(&[-n]), n as u32), expect);
            // nothing else at that length
            let count = table
                .series
                .iter()
                .filter(|(_, m, _)| *m == n as u32)
                .count();
            assert_eq!(count, 2);
        }
    }

    #[test]
    fn two_point_hand_sum_at_unit_displacement() {
        // sum over n <= 3 at x = (1,0) is e^{-beta} + 2 e^{-3 beta}
        for beta in [0.6, 1.0, 1.7] {
            let model = saw_model(beta, 2).unwrap();
            let table = enumerate_two_point(&model, 3).unwrap();
            let got = table.series.spatial_at(&pt(&[1, 0]));
            let expect = (-beta).exp() + 2.0 * (-3.0 * beta).exp();
            assert!((got - expect).abs() < 1e-14, "beta={beta}");
        }
    }

    #[test]
    fn two_point_start_row_and_parity() {
        let model = saw_model(0.8, 2).unwrap();
        let table = enumerate_two_point(&model, 7).unwrap();
        assert_eq!(table.series.get(&Point::zero(2), 0), 1.0);
        for (x, n, w) in table.series.iter() {
            assert!(w > 0.0);
            let l1 = x.l1_norm();
            assert!((n as i64) >= l1, "below l1 distance");
            assert_eq!((n as i64 - l1) % 2, 0, "parity violation at {x:?} n={n}");
            if n == 0 {
                assert!(x.is_zero());
            }
        }
    }

    #[test]
    fn two_point_point_group_symmetry_exact() {
        let model = saw_model(1.1, 2).unwrap();
        let table = enumerate_two_point(&model, 8).unwrap();
        for (x, n, w) in table.series.iter() {
            let images = [
                pt(&[-x.0[0], x.0[1]]),
                pt(&[x.0[0], -x.0[1]]),
                pt(&[x.0[1], x.0[0]]),
                pt(&[-x.0[1], -x.0[0]]),
            ];
            for img in images {
                assert_eq!(table.series.get(&img, n), w, "asymmetry at {x:?} n={n}");
            }
        }
    }

    #[test]
    fn cap_exceeded_names_cap() {
        let model = saw_model(1.0, 2).unwrap();
        let err = enumerate_two_point(&model, 21).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cap 20"), "{msg}");
    }

    #[test]
    fn tilted_susceptibility_zero_tilt_1d() {
        let model = saw_model(1.0, 1).unwrap();
        let table = enumerate_two_point(&model, 2).unwrap();
        let chi = tilted_susceptibility(&table, &DualVector(vec![0.0])).unwrap();
        let expect = 1.0 + 2.0 * (-1.0f64).exp() + 2.0 * (-2.0f64).exp();
        assert!((chi - expect).abs() < 1e-14);
    }

    #[test]
    fn tilted_susceptibility_horizon_zero_is_one() {
        let model = saw_model(0.5, 3).unwrap();
        let table = enumerate_two_point(&model, 0).unwrap();
        let chi = tilted_susceptibility(&table, &DualVector(vec![0.3, -0.2, 0.1])).unwrap();
        assert_eq!(chi, 1.0);
    }

    #[test]
    fn tilted_susceptibility_geometric_1d() {
        // t = (1), beta = 1: chi = 1 + sum_{n<=N} (1 + e^{-2n})
        let n_max = 6u32;
        let model = saw_model(1.0, 1).unwrap();
        let table = enumerate_two_point(&model, n_max).unwrap();
        let chi = tilted_susceptibility(&table, &DualVector(vec![1.0])).unwrap();
        let expect: f64 = 1.0
            + (1..=n_max)
                .map(|n| 1.0 + (-2.0 * n as f64).exp())
                .sum::<f64>();
        assert!((chi - expect).abs() < 1e-12);
    }

    #[test]
    fn tilted_susceptibility_monotone_in_horizon() {
        let model = saw_model(1.0, 2).unwrap();
        let t = DualVector(vec![0.4, 0.1]);
        let mut last = 0.0;
        for n in [2, 4, 6, 8] {
            let table = enumerate_two_point(&model, n).unwrap();
            let chi = tilted_susceptibility(&table, &t).unwrap();
            assert!(chi >= last);
            last = chi;
        }
    }

    #[test]
    fn decay_rate_1d_exact() {
        let model = saw_model(1.0, 1).unwrap();
        let table = enumerate_two_point(&model, 12).unwrap();
        let est = decay_rate_estimate(&table, &pt(&[1])).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
        assert!(est.bracket_width() < 1e-12);
        assert!(est.monotone_decreasing);
    }

    #[test]
    fn decay_rate_2d_supercritical_bracket() {
        let model = saw_model(2.0, 2).unwrap();
        let table = enumerate_two_point(&model, 14).unwrap();
        let est = decay_rate_estimate(&table, &pt(&[1, 0])).unwrap();
        assert!(
            est.value >= est.bracket.0 && est.value <= est.bracket.1,
            "value outside bracket"
        );
        assert!(est.bracket_width() < 0.05, "width {}", est.bracket_width());
        assert!(est.monotone_decreasing);
        // deep in the convergent regime the rate sits below beta
        assert!(est.value < 2.0 && est.value > 1.7);
    }

    #[test]
    fn decay_rate_zero_direction_errors() {
        let model = saw_model(1.0, 2).unwrap();
        let table = enumerate_two_point(&model, 6).unwrap();
        assert!(decay_rate_estimate(&table, &Point::zero(2)).is_err());
    }

    #[test]
    fn decay_rate_needs_three_multiples() {
        let model = saw_model(1.0, 2).unwrap();
        let table = enumerate_two_point(&model, 4).unwrap();
        // direction (2,1) has l1 = 3: only one multiple within horizon 4
        assert!(matches!(
            decay_rate_estimate(&table, &pt(&[2, 1])),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn decay_rate_subadditive_consistency() {
        let model = saw_model(1.5, 2).unwrap();
        let table = enumerate_two_point(&model, 12).unwrap();
        let along = decay_rate_estimate(&table, &pt(&[1, 0])).unwrap();
        let doubled = decay_rate_estimate(&table, &pt(&[2, 0])).unwrap();
        assert!(doubled.value <= 2.0 * along.value + 0.05);
    }
}
