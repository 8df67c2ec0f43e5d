//! Finite sublattices of Z^d with a killing boundary.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("box radius must be at least 1")]
    ZeroRadius,
    #[error("point {point} has dimension {got}, lattice has dimension {expected}")]
    DimensionMismatch { point: Point, got: usize, expected: usize },
    #[error("site set is empty")]
    EmptySiteSet,
    #[error("site {0} listed twice")]
    DuplicateSite(Point),
    #[error("site {0} lies outside the lattice")]
    OutsideLattice(Point),
}

/// A point of Z^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<i32>);

impl Point {
    pub fn origin(dim: usize) -> Self {
        Point(vec![0; dim])
    }

    /// Unit vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        Point(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn norm1(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs() as u64).sum()
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn scale(&self, k: i32) -> Self {
        Point(self.0.iter().map(|c| c * k).collect())
    }

    pub fn neg(&self) -> Self {
        self.scale(-1)
    }

    pub fn add(&self, other: &Point) -> Self {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn dist1(&self, other: &Point) -> u64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).unsigned_abs() as u64).sum()
    }

    /// Neighbor in direction `dir`, where `dir = 2 * axis + sign` and sign 0
    /// is the positive direction.
    pub fn step(&self, dir: usize) -> Self {
        let mut c = self.0.clone();
        let axis = dir / 2;
        c[axis] += if dir.is_multiple_of(2) { 1 } else { -1 };
        Point(c)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<Vec<i32>> for Point {
    fn from(v: Vec<i32>) -> Self {
        Point(v)
    }
}

/// Index of a site inside a [`Lattice`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl SiteId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub(crate) const OUTSIDE: u32 = u32::MAX;

/// A finite set of sites of Z^d. Every site has `2d` candidate neighbors;
/// those outside the set are arrow targets that absorb nothing.
#[derive(Clone, Debug)]
pub struct Lattice {
    dim: usize,
    radius: Option<u32>,
    points: Vec<Point>,
    index: HashMap<Point, SiteId>,
    // neighbors[site * 2d + dir], OUTSIDE when the target is not in the set
    neighbors: Vec<u32>,
}

impl Lattice {
    /// The 1-norm ball `{x : |x|_1 <= radius}`.
    pub fn ball(dim: usize, radius: u32) -> Result<Self, LatticeError> {
        if dim == 0 {
            return Err(LatticeError::ZeroDimension);
        }
        if radius == 0 {
            return Err(LatticeError::ZeroRadius);
        }
        let mut points = Vec::new();
        let mut cur = vec![0i32; dim];
        enumerate_ball(&mut cur, 0, radius as i64, &mut points);
        let mut lattice = Self::from_points_unchecked(dim, points);
        lattice.radius = Some(radius);
        Ok(lattice)
    }

    /// An arbitrary finite subset of Z^d, in the given order.
    pub fn from_sites(dim: usize, sites: Vec<Point>) -> Result<Self, LatticeError> {
        if dim == 0 {
            return Err(LatticeError::ZeroDimension);
        }
        if sites.is_empty() {
            return Err(LatticeError::EmptySiteSet);
        }
        let mut seen = std::collections::HashSet::new();
        for p in &sites {
            if p.dim() != dim {
                return Err(LatticeError::DimensionMismatch { point: p.clone(), got: p.dim(), expected: dim });
            }
            if !seen.insert(p.clone()) {
                return Err(LatticeError::DuplicateSite(p.clone()));
            }
        }
        Ok(Self::from_points_unchecked(dim, sites))
    }

    fn from_points_unchecked(dim: usize, points: Vec<Point>) -> Self {
        let index: HashMap<Point, SiteId> =
            points.iter().enumerate().map(|(i, p)| (p.clone(), SiteId(i as u32))).collect();
        let mut neighbors = Vec::with_capacity(points.len() * 2 * dim);
        for p in &points {
            for dir in 0..2 * dim {
                neighbors.push(index.get(&p.step(dir)).map_or(OUTSIDE, |s| s.0));
            }
        }
        Lattice { dim, radius: None, points, index, neighbors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Box radius for lattices built with [`Lattice::ball`].
    pub fn radius(&self) -> Option<u32> {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn degree(&self) -> usize {
        2 * self.dim
    }

    pub fn num_directed_edges(&self) -> usize {
        self.points.len() * 2 * self.dim
    }

    pub fn point(&self, site: SiteId) -> &Point {
        &self.points[site.index()]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn site(&self, p: &Point) -> Option<SiteId> {
        self.index.get(p).copied()
    }

    pub fn require_site(&self, p: &Point) -> Result<SiteId, LatticeError> {
        if p.dim() != self.dim {
            return Err(LatticeError::DimensionMismatch { point: p.clone(), got: p.dim(), expected: self.dim });
        }
        self.site(p).ok_or_else(|| LatticeError::OutsideLattice(p.clone()))
    }

    pub fn origin(&self) -> Option<SiteId> {
        self.site(&Point::origin(self.dim))
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.index.contains_key(p)
    }

    /// Neighbor of `site` in direction `dir`; `None` when it lies outside.
    #[inline]
    pub fn neighbor(&self, site: SiteId, dir: usize) -> Option<SiteId> {
        let n = self.neighbors[site.index() * 2 * self.dim + dir];
        (n != OUTSIDE).then_some(SiteId(n))
    }

    pub(crate) fn raw_neighbor(&self, edge: usize) -> u32 {
        self.neighbors[edge]
    }

    pub fn sites(&self) -> impl Iterator<Item = SiteId> + '_ {
        (0..self.points.len() as u32).map(SiteId)
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.radius == other.radius && self.points == other.points
    }
}

fn enumerate_ball(cur: &mut Vec<i32>, axis: usize, budget: i64, out: &mut Vec<Point>) {
    if axis == cur.len() {
        out.push(Point(cur.clone()));
        return;
    }
    for c in -budget..=budget {
        cur[axis] = c as i32;
        enumerate_ball(cur, axis + 1, budget - c.abs(), out);
    }
    cur[axis] = 0;
}
