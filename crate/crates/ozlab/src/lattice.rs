//! Lattice geometry and the space-length-resolved convolution algebra.
//!
//! Everything downstream (enumeration, renewal factorization, boundary
//! solving) is built on three things defined here: integer lattice points
//! with paths over a fixed step support, real dual vectors with the usual
//! scalar product, and sparse series indexed by `(displacement, length)`.
//!
//! All types are immutable after construction and all operations are pure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A point of the integer lattice `Z^d`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, serde::Serialize, serde::Deserialize)]
pub struct Point(pub Vec<i64>);

impl Point {
    pub fn zero(dim: usize) -> Self {
        Point(vec![0; dim])
    }

    /// Unit vector along `axis` (0-based).
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        Point(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: i64) -> Point {
        Point(self.0.iter().map(|c| c * k).collect())
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn euclid_norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt()
    }
}

/// A real dual vector, paired with lattice points through [`inner`].
#[derive(Clone, PartialEq, Debug, serde::Serialize, serde::Deserialize)]
pub struct DualVector(pub Vec<f64>);

impl DualVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn scale(&self, s: f64) -> DualVector {
        DualVector(self.0.iter().map(|c| c * s).collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Scalar product `(t, x)` between a dual vector and a lattice point.
pub fn inner(t: &DualVector, x: &Point) -> Result<f64> {
    if t.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            left: t.dim(),
            right: x.dim(),
        });
    }
    Ok(inner_unchecked(t, x))
}

/// As [`inner`] but without the dimension check, for hot loops.
#[inline]
pub fn inner_unchecked(t: &DualVector, x: &Point) -> f64 {
    t.0.iter().zip(&x.0).map(|(a, &b)| a * b as f64).sum()
}

/// Directional norm evaluator, supplied by a reconstructed correlation-length
/// body (or any positively homogeneous surrogate in tests).
pub trait DirectionalNorm {
    fn eval(&self, v: &Point) -> f64;
}

impl<F: Fn(&Point) -> f64> DirectionalNorm for F {
    fn eval(&self, v: &Point) -> f64 {
        self(v)
    }
}

/// An ordered lattice path. The empty path is a single vertex with no steps.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LatticePath {
    pub vertices: Vec<Point>,
}

impl LatticePath {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::domain("a path needs at least one vertex"));
        }
        let d = vertices[0].dim();
        if vertices.iter().any(|v| v.dim() != d) {
            return Err(Error::domain("path vertices of mixed dimension"));
        }
        Ok(LatticePath { vertices })
    }

    /// The empty path sitting at `at`.
    pub fn empty_at(at: Point) -> Self {
        LatticePath { vertices: vec![at] }
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].dim()
    }

    pub fn start(&self) -> &Point {
        &self.vertices[0]
    }

    pub fn end(&self) -> &Point {
        self.vertices.last().unwrap()
    }

    pub fn displacement(&self) -> Point {
        self.end().sub(self.start())
    }

    /// Consecutive steps all belong to `support`.
    pub fn steps_in_support(&self, support: &[Point]) -> bool {
        self.vertices
            .windows(2)
            .all(|w| support.contains(&w[1].sub(&w[0])))
    }

    /// True when the steps are unit steps and no vertex repeats.
    pub fn is_self_avoiding_unit(&self) -> bool {
        let unit = self
            .vertices
            .windows(2)
            .all(|w| w[1].sub(&w[0]).l1_norm() == 1);
        if !unit {
            return false;
        }
        let mut seen = std::collections::HashSet::with_capacity(self.vertices.len());
        self.vertices.iter().all(|v| seen.insert(v.clone()))
    }

    /// Concatenation: `other` is translated so its start coincides with
    /// `self`'s end. No admissibility check is performed here.
    pub fn concat(&self, other: &LatticePath) -> LatticePath {
        let shift = self.end().sub(other.start());
        let mut vertices = self.vertices.clone();
        vertices.extend(other.vertices.iter().skip(1).map(|v| v.add(&shift)));
        LatticePath { vertices }
    }

    /// Translate so the path starts at the origin.
    pub fn rebased(&self) -> LatticePath {
        let s = self.start().clone();
        LatticePath {
            vertices: self.vertices.iter().map(|v| v.sub(&s)).collect(),
        }
    }
}

/// A positive cone `C_delta(t)` along the dual direction `t`:
/// `v` belongs to it when `(t, v) > (1 - delta) * xi(v)`.
#[derive(Clone, Debug)]
pub struct Cone {
    pub axis: DualVector,
    pub aperture: f64,
}

impl Cone {
    pub fn new(axis: DualVector, aperture: f64) -> Result<Self> {
        if !(aperture > 0.0 && aperture < 1.0) {
            return Err(Error::domain(format!(
                "cone aperture must lie in (0,1), got {aperture}"
            )));
        }
        if axis.is_zero() {
            return Err(Error::domain("cone axis must be nonzero"));
        }
        Ok(Cone { axis, aperture })
    }

    pub fn contains(&self, v: &Point, norm: &impl DirectionalNorm) -> bool {
        if v.is_zero() {
            return false;
        }
        inner_unchecked(&self.axis, v) > (1.0 - self.aperture) * norm.eval(v)
    }
}

/// Sparse nonnegative series over `(displacement, length)` pairs, truncated
/// at a length horizon. Entries are kept in a `BTreeMap` so every iteration
/// order (and hence every floating-point reduction) is deterministic.
#[derive(Clone, PartialEq, Debug)]
pub struct SpaceLengthSeries {
    dim: usize,
    horizon: u32,
    entries: BTreeMap<(Point, u32), f64>,
}

impl SpaceLengthSeries {
    pub fn new(dim: usize, horizon: u32) -> Self {
        SpaceLengthSeries {
            dim,
            horizon,
            entries: BTreeMap::new(),
        }
    }

    /// The convolution unit: a single coefficient 1 at the origin, length 0.
    pub fn unit(dim: usize, horizon: u32) -> Self {
        let mut s = Self::new(dim, horizon);
        s.add(Point::zero(dim), 0, 1.0);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, x: &Point, n: u32) -> f64 {
        self.entries.get(&(x.clone(), n)).copied().unwrap_or(0.0)
    }

    /// Accumulate `w` at `(x, n)`. Entries beyond the horizon are dropped.
    pub fn add(&mut self, x: Point, n: u32, w: f64) {
        debug_assert_eq!(x.dim(), self.dim);
        if n > self.horizon || w == 0.0 {
            return;
        }
        *self.entries.entry((x, n)).or_insert(0.0) += w;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, u32, f64)> {
        self.entries.iter().map(|((x, n), &w)| (x, *n, w))
    }

    /// Sum of all coefficients.
    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Project the length variable out: `x -> sum_n coeff(x, n)`.
    pub fn spatial(&self) -> BTreeMap<Point, f64> {
        let mut out = BTreeMap::new();
        for (x, _, w) in self.iter() {
            *out.entry(x.clone()).or_insert(0.0) += w;
        }
        out
    }

    /// Sum over lengths at a single displacement.
    pub fn spatial_at(&self, x: &Point) -> f64 {
        self.entries
            .range((x.clone(), 0)..=(x.clone(), self.horizon))
            .map(|(_, &w)| w)
            .sum()
    }

    /// Space-length convolution `(a*b)(x,n) = sum a(y,m) b(x-y,n-m)`,
    /// truncated at the smaller horizon.
    pub fn convolve(&self, other: &SpaceLengthSeries) -> Result<SpaceLengthSeries> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let horizon = self.horizon.min(other.horizon);
        let mut out = SpaceLengthSeries::new(self.dim, horizon);
        for (xa, na, wa) in self.iter() {
            if na > horizon {
                continue;
            }
            for (xb, nb, wb) in other.iter() {
                let n = na + nb;
                if n > horizon {
                    continue;
                }
                out.add(xa.add(xb), n, wa * wb);
            }
        }
        Ok(out)
    }

    /// Geometric sum `sum_{k>=0} self^{*k}` truncated at the horizon; the
    /// `k = 0` term is the unit series.
    ///
    /// Every atom must have length at least 1, otherwise the sum need not
    /// terminate entry-wise.
    pub fn geometric_sum(&self) -> Result<SpaceLengthSeries> {
        if let Some(((x, _), _)) = self.entries.iter().find(|((_, n), _)| *n == 0) {
            return Err(Error::divergence(format!(
                "geometric sum of a series with a zero-length atom at {:?}",
                x.0
            )));
        }
        let mut total = SpaceLengthSeries::unit(self.dim, self.horizon);
        let mut power = SpaceLengthSeries::unit(self.dim, self.horizon);
        loop {
            power = power.convolve(self)?;
            if power.is_empty() {
                break;
            }
            for (x, n, w) in power.iter() {
                total.add(x.clone(), n, w);
            }
        }
        Ok(total)
    }

    /// CSV columns `x_1..x_d,n,coeff` in lexicographic row order.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let mut header = String::new();
        for i in 1..=self.dim {
            let _ = write!(header, "x_{i},");
        }
        header.push_str("n,coeff");
        writeln!(w, "{header}")?;
        for (x, n, coeff) in self.iter() {
            let mut row = String::new();
            for c in &x.0 {
                let _ = write!(row, "{c},");
            }
            let _ = write!(row, "{n},{}", fmt_f64(coeff));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn read_csv(r: &mut impl BufRead) -> Result<SpaceLengthSeries> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data("empty series CSV"))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 3 || cols[cols.len() - 1] != "coeff" || cols[cols.len() - 2] != "n" {
            return Err(Error::data("series CSV header must end with n,coeff"));
        }
        let dim = cols.len() - 2;
        let mut entries = BTreeMap::new();
        let mut horizon = 0u32;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != dim + 2 {
                return Err(Error::data(format!("bad series CSV row: {line}")));
            }
            let coords = parts[..dim]
                .iter()
                .map(|p| p.parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::data(format!("bad coordinate in row '{line}': {e}")))?;
            let n: u32 = parts[dim]
                .parse()
                .map_err(|e| Error::data(format!("bad length in row '{line}': {e}")))?;
            let w: f64 = parts[dim + 1]
                .parse()
                .map_err(|e| Error::data(format!("bad coefficient in row '{line}': {e}")))?;
            horizon = horizon.max(n);
            entries.insert((Point(coords), n), w);
        }
        Ok(SpaceLengthSeries {
            dim,
            horizon,
            entries,
        })
    }
}

/// Full-precision float formatting that survives a parse round-trip and
/// stays readable across the magnitudes this crate produces.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(coords: &[i64]) -> Point {
        Point(coords.to_vec())
    }

    #[test]
    fn inner_axis_projection() {
        let t = DualVector(vec![1.0, 0.0]);
        assert_eq!(inner(&t, &pt(&[3, 5])).unwrap(), 3.0);
    }

    #[test]
    fn inner_zero_vector() {
        let t = DualVector(vec![0.0, 0.0, 0.0]);
        assert_eq!(inner(&t, &pt(&[7, -2, 9])).unwrap(), 0.0);
    }

    #[test]
    fn inner_orthogonal() {
        let t = DualVector(vec![0.5, 0.5]);
        assert_eq!(inner(&t, &pt(&[2, -2])).unwrap(), 0.0);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let t = DualVector(vec![1.0]);
        assert!(matches!(
            inner(&t, &pt(&[1, 2])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn convolve_unit_is_identity() {
        let unit = SpaceLengthSeries::unit(2, 8);
        let mut b = SpaceLengthSeries::new(2, 8);
        b.add(pt(&[1, 0]), 1, 0.25);
        b.add(pt(&[0, -1]), 3, 0.5);
        let c = unit.convolve(&b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn convolve_single_atoms() {
        let mut a = SpaceLengthSeries::new(2, 10);
        a.add(pt(&[1, 0]), 1, 0.75);
        let c = a.convolve(&a).unwrap();
        assert_eq!(c.num_entries(), 1);
        assert_eq!(c.get(&pt(&[2, 0]), 2), 0.75 * 0.75);
    }

    #[test]
    fn convolve_hand_example_1d() {
        // atoms at x = +-1, length 1, weight e^{-beta}
        let beta: f64 = 0.7;
        let w = (-beta).exp();
        let mut a = SpaceLengthSeries::new(1, 6);
        a.add(pt(&[1]), 1, w);
        a.add(pt(&[-1]), 1, w);
        let c = a.convolve(&a).unwrap();
        assert!((c.get(&pt(&[0]), 2) - 2.0 * (-2.0 * beta).exp()).abs() < 1e-15);
        assert_eq!(c.get(&pt(&[2]), 2), w * w);
    }

    #[test]
    fn geometric_sum_empty_is_unit() {
        let c = SpaceLengthSeries::new(2, 5);
        assert_eq!(c.geometric_sum().unwrap(), SpaceLengthSeries::unit(2, 5));
    }

    #[test]
    fn geometric_sum_scalar_series() {
        let w: f64 = 0.5;
        let horizon = 7;
        let mut c = SpaceLengthSeries::new(1, horizon);
        c.add(pt(&[1]), 1, w);
        let g = c.geometric_sum().unwrap();
        for k in 0..=horizon {
            assert_eq!(g.get(&pt(&[k as i64]), k), w.powi(k as i32));
        }
        assert_eq!(g.num_entries(), horizon as usize + 1);
    }

    #[test]
    fn geometric_sum_matches_power_expansion_2d() {
        // Two atoms; oracle is the explicit expansion unit + c + c*c + ...
        // with hand-rolled map arithmetic, to order 4.
        let mut c = SpaceLengthSeries::new(2, 4);
        c.add(pt(&[1, 0]), 1, 0.5);
        c.add(pt(&[0, 1]), 2, 0.25);
        let g = c.geometric_sum().unwrap();

        let mut expect: BTreeMap<(Vec<i64>, u32), f64> = BTreeMap::new();
        expect.insert((vec![0, 0], 0), 1.0);
        // k-fold products over atom choices
        let atoms = [((1i64, 0i64), 1u32, 0.5f64), ((0, 1), 2, 0.25)];
        for k in 1..=4usize {
            let mut stack = vec![(0i64, 0i64, 0u32, 1.0f64, 0usize)];
            while let Some((x, y, n, w, depth)) = stack.pop() {
                if depth == k {
                    if n <= 4 {
                        *expect.entry((vec![x, y], n)).or_insert(0.0) += w;
                    }
                    continue;
                }
                for ((dx, dy), dn, dw) in atoms {
                    stack.push((x + dx, y + dy, n + dn, w * dw, depth + 1));
                }
            }
        }
        expect.retain(|_, w| *w != 0.0);
        for ((coords, n), w) in &expect {
            assert!(
                (g.get(&Point(coords.clone()), *n) - w).abs() < 1e-15,
                "mismatch at {coords:?} n={n}"
            );
        }
        assert_eq!(g.num_entries(), expect.len());
    }

    #[test]
    fn geometric_sum_rejects_zero_length_atom() {
        let mut c = SpaceLengthSeries::new(1, 5);
        c.add(pt(&[0]), 0, 0.1);
        assert!(matches!(c.geometric_sum(), Err(Error::Divergence(_))));
    }

    #[test]
    fn geometric_sum_satisfies_renewal_identity() {
        let mut c = SpaceLengthSeries::new(2, 6);
        c.add(pt(&[1, 0]), 1, 0.5);
        c.add(pt(&[1, 1]), 2, 0.125);
        c.add(pt(&[-1, 0]), 1, 0.25);
        let g = c.geometric_sum().unwrap();
        let mut rhs = c.convolve(&g).unwrap();
        rhs.add(Point::zero(2), 0, 1.0);
        assert_eq!(g, rhs);
    }

    #[test]
    fn csv_round_trip() {
        let mut s = SpaceLengthSeries::new(2, 9);
        s.add(pt(&[3, -1]), 4, 0.125);
        s.add(pt(&[-2, 5]), 9, 1.75e-20);
        s.add(pt(&[0, 0]), 0, 1.0);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let parsed = SpaceLengthSeries::read_csv(&mut buf.as_slice()).unwrap();
        for (x, n, w) in s.iter() {
            assert_eq!(parsed.get(x, n), w);
        }
        assert_eq!(parsed.num_entries(), s.num_entries());
    }

    #[test]
    fn path_concat_and_rebase() {
        let a = LatticePath::new(vec![pt(&[0, 0]), pt(&[0, 1]), pt(&[1, 1])]).unwrap();
        let b = LatticePath::new(vec![pt(&[0, 0]), pt(&[1, 0])]).unwrap();
        let c = a.concat(&b);
        assert_eq!(c.len(), 3);
        assert_eq!(c.end(), &pt(&[2, 1]));
        assert!(c.is_self_avoiding_unit());
        assert_eq!(c.rebased().start(), &pt(&[0, 0]));
    }

    #[test]
    fn cone_membership_basic() {
        let cone = Cone::new(DualVector(vec![1.0, 0.0]), 0.1).unwrap();
        let xi = |v: &Point| v.euclid_norm();
        assert!(cone.contains(&pt(&[5, 0]), &xi));
        assert!(!cone.contains(&pt(&[0, 5]), &xi));
        assert!(!cone.contains(&pt(&[-3, 0]), &xi));
        assert!(!cone.contains(&pt(&[0, 0]), &xi));
    }

    /// Dyadic coefficients keep every product and partial sum exactly
    /// representable, so the algebraic identities can be asserted exactly.
    fn dyadic_series(dim: usize) -> impl Strategy<Value = SpaceLengthSeries> {
        let entry = (
            prop::collection::vec(-2i64..=2, dim),
            1u32..=3,
            (1u32..=16).prop_map(|k| k as f64 / 16.0),
        );
        prop::collection::vec(entry, 0..5).prop_map(move |entries| {
            let mut s = SpaceLengthSeries::new(dim, 8);
            for (coords, n, w) in entries {
                s.add(Point(coords), n, w);
            }
            s
        })
    }

    proptest! {
        #[test]
        fn convolution_commutes(a in dyadic_series(2), b in dyadic_series(2)) {
            prop_assert_eq!(a.convolve(&b).unwrap(), b.convolve(&a).unwrap());
        }

        #[test]
        fn convolution_associates(
            a in dyadic_series(2),
            b in dyadic_series(2),
            c in dyadic_series(2),
        ) {
            let left = a.convolve(&b).unwrap().convolve(&c).unwrap();
            let right = a.convolve(&b.convolve(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn geometric_sum_identity(c in dyadic_series(2)) {
            let g = c.geometric_sum().unwrap();
            let mut rhs = c.convolve(&g).unwrap();
            rhs.add(Point::zero(2), 0, 1.0);
            prop_assert_eq!(g, rhs);
        }

        #[test]
        fn cone_positively_homogeneous(
            coords in prop::collection::vec(-6i64..=6, 2),
            k in 1i64..=4,
        ) {
            let v = Point(coords);
            prop_assume!(!v.is_zero());
            let cone = Cone::new(DualVector(vec![1.0, 0.25]), 0.2).unwrap();
            let xi = |p: &Point| 0.75 * p.euclid_norm();
            // stay away from the cone boundary so float scaling cannot flip
            let margin = inner_unchecked(&cone.axis, &v) - (1.0 - cone.aperture) * xi(&v);
            prop_assume!(margin.abs() > 1e-9 * v.euclid_norm());
            prop_assert_eq!(cone.contains(&v, &xi), cone.contains(&v.scale(k), &xi));
        }
    }
}
