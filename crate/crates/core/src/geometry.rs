//! Axis-aligned boxes, collocation point sets and their density statistics.

use std::io::{Read, Write};

use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KansaError, Result};

/// Points closer than this are considered the same point.
pub const COINCIDENCE_TOL: f64 = 1e-12;
const BOUNDARY_TOL: f64 = 1e-14;
const HALTON_PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];

/// An axis-aligned box `Π [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(KansaError::Geometry(format!(
                "box bounds must be nonempty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(KansaError::Geometry(format!(
                "box needs finite lower < upper in every axis, got {lower:?} / {upper:?}"
            )));
        }
        Ok(Domain { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// `[−1, 1]²`, the domain of all built-in experiments.
    pub fn reference_square() -> Self {
        Domain {
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn span(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    /// Max-norm distance from `x` to the boundary; negative outside the box.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| (x[i] - self.lower[i]).min(self.upper[i] - x[i]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `k`-th of `n` equispaced coordinates along `axis`, ends included.
    ///
    /// The fraction `k/(n−1)` is reduced first so nested grids produce
    /// bit-identical coordinates (e.g. every coarse node reappears exactly
    /// in a grid refined by 2 or 3).
    pub fn grid_coordinate(&self, axis: usize, k: usize, n: usize) -> f64 {
        debug_assert!(n >= 2 && k < n);
        if k == n - 1 {
            return self.upper[axis];
        }
        let g = k.gcd(&(n - 1)).max(1);
        let t = (k / g) as f64 / ((n - 1) / g) as f64;
        self.lower[axis] + self.span(axis) * t
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self::reference_square()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    /// Strictly inside the box.
    Interior,
    /// On the faces of the box.
    Boundary,
    /// Anywhere in the closed box (trial centers, evaluation grids).
    Closure,
}

/// A set of distinct points of a fixed dimension, tagged with where they lie.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    location: Location,
    domain: Domain,
}

impl PointSet {
    /// Validates dimensions, location and pairwise distinctness.
    pub fn new(domain: Domain, location: Location, coords: Vec<f64>) -> Result<Self> {
        let set = Self::new_unchecked(domain, location, coords)?;
        for (i, x) in set.iter().enumerate() {
            let dist = set.domain.boundary_distance(x);
            let ok = match location {
                Location::Interior => dist > 0.0,
                Location::Boundary => dist.abs() <= BOUNDARY_TOL,
                Location::Closure => dist >= -BOUNDARY_TOL,
            };
            if !ok {
                return Err(KansaError::Geometry(format!(
                    "point {i} {x:?} is not {location:?} to the box"
                )));
            }
        }
        if let Some((i, j)) = near_duplicates(&set.coords, set.dim, COINCIDENCE_TOL).first() {
            return Err(KansaError::Geometry(format!(
                "points {i} and {j} coincide within {COINCIDENCE_TOL}"
            )));
        }
        Ok(set)
    }

    fn new_unchecked(domain: Domain, location: Location, coords: Vec<f64>) -> Result<Self> {
        let dim = domain.dim();
        if coords.len() % dim != 0 {
            return Err(KansaError::Geometry(format!(
                "{} coordinates do not split into {dim}-vectors",
                coords.len()
            )));
        }
        Ok(PointSet {
            dim,
            coords,
            location,
            domain,
        })
    }

    pub fn from_points(domain: Domain, location: Location, points: &[Vec<f64>]) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != domain.dim()) {
            return Err(KansaError::Geometry(format!(
                "point {p:?} does not have dimension {}",
                domain.dim()
            )));
        }
        Self::new(domain, location, points.concat())
    }

    pub fn empty(domain: Domain, location: Location) -> Self {
        PointSet {
            dim: domain.dim(),
            coords: Vec::new(),
            location,
            domain,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn location(&self) -> Location {
        self.location
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// Flat row-major coordinates.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Set union; points of `other` within [`COINCIDENCE_TOL`] of a point of
    /// `self` are dropped. Returns the union and the number dropped.
    pub fn union(&self, other: &PointSet) -> Result<(PointSet, usize)> {
        if self.dim != other.dim || self.domain != other.domain {
            return Err(KansaError::Geometry(
                "cannot unite point sets over different domains".into(),
            ));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        let n_self = self.len();
        let mut drop = vec![false; self.len() + other.len()];
        for (i, j) in near_duplicates(&coords, self.dim, COINCIDENCE_TOL) {
            let (lo, hi) = (i.min(j), i.max(j));
            if lo < n_self && hi >= n_self {
                drop[hi] = true;
            }
        }
        let removed = drop.iter().filter(|d| **d).count();
        let kept = coords
            .chunks_exact(self.dim)
            .zip(&drop)
            .filter(|(_, d)| !**d)
            .flat_map(|(p, _)| p.iter().copied())
            .collect();
        let union = PointSet::new_unchecked(self.domain.clone(), Location::Closure, kept)?;
        Ok((union, removed))
    }

    /// One point per row, coordinates `x0, x1, ...` in axis order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record((0..self.dim).map(|i| format!("x{i}")))?;
        for p in self.iter() {
            w.write_record(p.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, domain: Domain, location: Location) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut coords = Vec::new();
        for record in r.records() {
            let record = record?;
            if record.len() != domain.dim() {
                return Err(KansaError::Geometry(format!(
                    "row has {} columns, expected {}",
                    record.len(),
                    domain.dim()
                )));
            }
            for field in record.iter() {
                coords.push(field.trim().parse::<f64>().map_err(|e| {
                    KansaError::Geometry(format!("bad coordinate {field:?}: {e}"))
                })?);
            }
        }
        Self::new(domain, location, coords)
    }
}

/// Pairs `(i, j)`, `i < j`, of points within `tol` of each other.
fn near_duplicates(coords: &[f64], dim: usize, tol: f64) -> Vec<(usize, usize)> {
    let n = coords.len() / dim;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| coords[a * dim].total_cmp(&coords[b * dim]));
    let mut pairs = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let xi = &coords[i * dim..(i + 1) * dim];
        for &j in &order[pos + 1..] {
            let xj = &coords[j * dim..(j + 1) * dim];
            if xj[0] - xi[0] > tol {
                break;
            }
            if xi.iter().zip(xj).all(|(a, b)| (a - b).abs() <= tol) {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs
}

/// Visits the `n^dim` tensor-grid nodes in lexicographic order (last axis fastest).
fn for_each_grid_node(domain: &Domain, n: usize, mut visit: impl FnMut(&[f64], bool)) {
    let dim = domain.dim();
    let mut index = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let total = n.pow(dim as u32);
    for _ in 0..total {
        let mut on_boundary = false;
        for axis in 0..dim {
            x[axis] = domain.grid_coordinate(axis, index[axis], n);
            on_boundary |= index[axis] == 0 || index[axis] == n - 1;
        }
        visit(&x, on_boundary);
        for axis in (0..dim).rev() {
            index[axis] += 1;
            if index[axis] < n {
                break;
            }
            index[axis] = 0;
        }
    }
}

fn check_grid_size(n_per_side: usize) -> Result<()> {
    if n_per_side < 2 {
        Err(KansaError::Geometry(format!(
            "a grid needs at least 2 points per side, got {n_per_side}"
        )))
    } else {
        Ok(())
    }
}

/// Splits the tensor grid with `n_per_side` nodes per axis into strictly
/// interior and boundary points (corners belong to the boundary).
pub fn regular_grid(domain: &Domain, n_per_side: usize) -> Result<(PointSet, PointSet)> {
    check_grid_size(n_per_side)?;
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for_each_grid_node(domain, n_per_side, |x, on_boundary| {
        if on_boundary {
            boundary.extend_from_slice(x);
        } else {
            interior.extend_from_slice(x);
        }
    });
    Ok((
        PointSet::new_unchecked(domain.clone(), Location::Interior, interior)?,
        PointSet::new_unchecked(domain.clone(), Location::Boundary, boundary)?,
    ))
}

/// All `n_per_side^d` nodes of the tensor grid on the closed box.
pub fn closed_grid(domain: &Domain, n_per_side: usize) -> Result<PointSet> {
    check_grid_size(n_per_side)?;
    let mut coords = Vec::with_capacity(n_per_side.pow(domain.dim() as u32) * domain.dim());
    for_each_grid_node(domain, n_per_side, |x, _| coords.extend_from_slice(x));
    PointSet::new_unchecked(domain.clone(), Location::Closure, coords)
}

/// Boundary nodes of the tensor grid with `n_per_side` nodes per axis.
pub fn boundary_grid(domain: &Domain, n_per_side: usize) -> Result<PointSet> {
    regular_grid(domain, n_per_side).map(|(_, boundary)| boundary)
}

/// Collocation sets refined relative to a trial grid with `z_grid_n` nodes
/// per side: `X` is the interior of the grid with spacing `h_Z/interior_divisor`
/// and `Y` the boundary of the grid with spacing `h_Z/boundary_divisor`, so
/// that the interior trial centers lie in `X` and the boundary ones in `Y`.
pub fn refined_collocation(
    domain: &Domain,
    z_grid_n: usize,
    interior_divisor: usize,
    boundary_divisor: usize,
) -> Result<(PointSet, PointSet)> {
    check_grid_size(z_grid_n)?;
    if !(1..=3).contains(&interior_divisor) {
        return Err(KansaError::Geometry(format!(
            "interior refinement must be 1, 1/2 or 1/3, got 1/{interior_divisor}"
        )));
    }
    if !(1..=2).contains(&boundary_divisor) {
        return Err(KansaError::Geometry(format!(
            "boundary refinement must be 1 or 1/2, got 1/{boundary_divisor}"
        )));
    }
    let (x, _) = regular_grid(domain, interior_divisor * (z_grid_n - 1) + 1)?;
    let y = boundary_grid(domain, boundary_divisor * (z_grid_n - 1) + 1)?;
    Ok((x, y))
}

/// Radical inverse of `index` in `base` (van der Corput).
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % b) as f64 * factor;
        index /= b;
        factor *= inv;
    }
    value
}

/// The first `n` Halton points (indices 1..=n, bases = first d primes),
/// mapped into the open box. Points within 1e-9 of a face are moved inward
/// by 1e-6 of the box width.
pub fn halton_points(domain: &Domain, n: usize) -> Result<PointSet> {
    let dim = domain.dim();
    if dim > HALTON_PRIMES.len() {
        return Err(KansaError::Geometry(format!(
            "Halton points are supported up to dimension {}, got {dim}",
            HALTON_PRIMES.len()
        )));
    }
    let mut coords = Vec::with_capacity(n * dim);
    for index in 1..=n as u64 {
        for axis in 0..dim {
            let t = radical_inverse(index, HALTON_PRIMES[axis]);
            let (lo, hi) = (domain.lower[axis], domain.upper[axis]);
            let span = hi - lo;
            let mut x = lo + span * t;
            if x - lo < 1e-9 {
                x += 1e-6 * span;
            } else if hi - x < 1e-9 {
                x -= 1e-6 * span;
            }
            coords.push(x);
        }
    }
    PointSet::new_unchecked(domain.clone(), Location::Interior, coords)
}

/// Fill distance `h`, separation distance `q` and mesh ratio `ρ = h/q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityStats {
    pub h: f64,
    pub q: f64,
    pub rho: f64,
}

/// Exact separation distance and a probe-grid estimate of the fill distance.
///
/// The fill distance is the largest distance from a probe to its nearest set
/// point, probing `resolution` points per side over the box (interior and
/// closure sets) or over its faces (boundary sets). It approaches the true
/// supremum from below as `resolution` grows.
pub fn density_stats(set: &PointSet, resolution: usize) -> Result<DensityStats> {
    if set.len() < 2 {
        return Err(KansaError::DegenerateSet(format!(
            "density statistics need at least 2 points, got {}",
            set.len()
        )));
    }
    check_grid_size(resolution)?;
    let q = 0.5 * min_pairwise_distance(set);
    let probes = match set.location() {
        Location::Boundary => boundary_grid(set.domain(), resolution)?,
        Location::Interior | Location::Closure => closed_grid(set.domain(), resolution)?,
    };
    let h = probes
        .coords()
        .par_chunks_exact(set.dim())
        .map(|probe| {
            set.iter()
                .map(|p| squared_distance(p, probe))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt();
    Ok(DensityStats { h, q, rho: h / q })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn min_pairwise_distance(set: &PointSet) -> f64 {
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let pi = set.point(i);
            (i + 1..set.len())
                .map(|j| squared_distance(pi, set.point(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_grids() {
        let d = Domain::reference_square();
        let (int, bdy) = regular_grid(&d, 3).unwrap();
        assert_eq!(int.len(), 1);
        assert_eq!(int.point(0), &[0.0, 0.0]);
        assert_eq!(bdy.len(), 8);
        let (int, bdy) = regular_grid(&d, 11).unwrap();
        assert_eq!((int.len(), bdy.len()), (81, 40));
        let (int, bdy) = regular_grid(&d, 2).unwrap();
        assert_eq!((int.len(), bdy.len()), (0, 4));
        assert!(regular_grid(&d, 1).is_err());
    }

    #[test]
    fn grid_points_are_valid_sets() {
        let d = Domain::reference_square();
        let (int, bdy) = regular_grid(&d, 21).unwrap();
        PointSet::new(d.clone(), Location::Interior, int.coords().to_vec()).unwrap();
        PointSet::new(d.clone(), Location::Boundary, bdy.coords().to_vec()).unwrap();
    }

    #[test]
    fn refined_collocation_counts() {
        let d = Domain::reference_square();
        let (x, y) = refined_collocation(&d, 11, 2, 2).unwrap();
        assert_eq!((x.len(), y.len()), (361, 80));
        let (_, y) = refined_collocation(&d, 21, 1, 2).unwrap();
        assert_eq!(y.len(), 160);
        let (x, _) = refined_collocation(&d, 11, 3, 1).unwrap();
        assert_eq!(x.len(), 29 * 29);
        assert!(refined_collocation(&d, 11, 4, 1).is_err());
        assert!(refined_collocation(&d, 11, 1, 3).is_err());
    }

    #[test]
    fn nested_grids_share_nodes_exactly() {
        let d = Domain::reference_square();
        for n in [5usize, 11, 16] {
            let (zi, zb) = regular_grid(&d, n).unwrap();
            for div in [2usize, 3] {
                let (x, y) = regular_grid(&d, div * (n - 1) + 1).unwrap();
                for p in zi.iter() {
                    assert!(x.iter().any(|q| q == p), "interior {p:?} missing for n={n} div={div}");
                }
                for p in zb.iter() {
                    assert!(y.iter().any(|q| q == p), "boundary {p:?} missing");
                }
            }
        }
    }

    #[test]
    fn halton_hand_values() {
        let unit = Domain::cube(0.0, 1.0, 2).unwrap();
        let h = halton_points(&unit, 3).unwrap();
        let expect = [[0.5, 1.0 / 3.0], [0.25, 2.0 / 3.0], [0.75, 1.0 / 9.0]];
        for (p, e) in h.iter().zip(expect) {
            assert_relative_eq!(p[0], e[0], epsilon = 1e-15);
            assert_relative_eq!(p[1], e[1], epsilon = 1e-15);
        }
        let line = Domain::cube(0.0, 1.0, 1).unwrap();
        let h = halton_points(&line, 4).unwrap();
        assert_eq!(h.coords(), &[0.5, 0.25, 0.75, 0.125]);
        assert!(halton_points(&unit, 0).unwrap().is_empty());
        assert!(halton_points(&Domain::cube(0.0, 1.0, 7).unwrap(), 3).is_err());
    }

    #[test]
    fn density_of_three_by_three_grid() {
        let d = Domain::reference_square();
        let all = closed_grid(&d, 3).unwrap();
        let s = density_stats(&all, 400).unwrap();
        assert_eq!(s.q, 0.5);
        assert!((s.h - 0.5f64.sqrt()).abs() <= 0.005, "h = {}", s.h);
        assert!((s.rho - 2f64.sqrt()).abs() <= 0.02);
    }

    #[test]
    fn density_of_two_points_on_a_segment() {
        let d = Domain::cube(0.0, 1.0, 1).unwrap();
        let set = PointSet::new(d, Location::Closure, vec![0.0, 1.0]).unwrap();
        let s = density_stats(&set, 101).unwrap();
        assert_eq!(s.q, 0.5);
        assert_eq!(s.h, 0.5);
    }

    #[test]
    fn boundary_fill_distance_is_measured_along_faces() {
        let d = Domain::reference_square();
        let y = boundary_grid(&d, 11).unwrap();
        let s = density_stats(&y, 201).unwrap();
        assert_relative_eq!(s.q, 0.1, max_relative = 1e-12);
        assert_relative_eq!(s.h, 0.1, max_relative = 1e-9);
    }

    #[test]
    fn degenerate_density() {
        let d = Domain::reference_square();
        let one = PointSet::new(d, Location::Interior, vec![0.0, 0.0]).unwrap();
        assert!(matches!(density_stats(&one, 10), Err(KansaError::DegenerateSet(_))));
    }

    #[test]
    fn validation_rejects_bad_sets() {
        let d = Domain::reference_square();
        assert!(PointSet::new(d.clone(), Location::Interior, vec![1.0, 0.0]).is_err());
        assert!(PointSet::new(d.clone(), Location::Boundary, vec![0.5, 0.0]).is_err());
        assert!(PointSet::new(d.clone(), Location::Closure, vec![0.1, 0.1, 0.1, 0.1]).is_err());
        assert!(PointSet::new(d.clone(), Location::Closure, vec![0.1, 0.1, 0.3]).is_err());
        assert!(Domain::new(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn union_drops_coincident_points() {
        let d = Domain::reference_square();
        let z = closed_grid(&d, 11).unwrap();
        let (_, y) = refined_collocation(&d, 11, 1, 2).unwrap();
        let (u, removed) = z.union(&y).unwrap();
        assert_eq!(removed, 40);
        assert_eq!(u.len(), 121 + 80 - 40);
    }

    #[test]
    fn csv_round_trip() {
        let d = Domain::reference_square();
        let h = halton_points(&d, 17).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let back = PointSet::read_csv(buf.as_slice(), d, Location::Interior).unwrap();
        assert_eq!(back, h);
    }
}
