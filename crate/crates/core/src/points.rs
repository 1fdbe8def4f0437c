//! Flat storage for collections of equal-dimension points.
//!
//! Samples, hypothesis sets and feature matrices all share [`PointSet`]: a
//! row-major buffer of `len * dim` coordinates. A single point is passed around
//! as a plain `&[f64]`.

use alloc::vec::Vec;
use core::slice::ChunksExact;

use crate::error::{check_dim, invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

/// The `N` hypotheses emitted for one input, or placed by a quantizer.
pub type HypothesisSet = PointSet;

impl PointSet {
    /// Builds a set from row-major coordinates. Every coordinate must be finite.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("point dimension must be at least 1"));
        }
        if coords.len() % dim != 0 {
            return Err(invalid("coordinate count is not a multiple of the dimension"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteInput("point set"));
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    pub fn from_points<I, P>(dim: usize, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut set = Self::empty(dim)?;
        for p in points {
            set.push(p.as_ref())?;
        }
        Ok(set)
    }

    /// One-dimensional set from scalars.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    /// Caller guarantees `coords.len() % dim == 0` and finiteness.
    pub(crate) fn from_raw(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && coords.len() % dim == 0);
        Self { dim, coords }
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        check_dim(self.dim, point.len())?;
        if point.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteInput("point"));
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Panics if `i >= len()`.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    #[inline]
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.coords
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter().map(|p| p[j]).collect()
    }

    /// Gathers the rows at `indices`, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self::from_raw(self.dim, coords)
    }

    /// Per-dimension mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = alloc::vec![0.0; self.dim];
        for p in self.iter() {
            for (m, c) in mean.iter_mut().zip(p) {
                *m += c;
            }
        }
        let n = self.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Per-dimension population variance.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut var = alloc::vec![0.0; self.dim];
        for p in self.iter() {
            for ((v, c), m) in var.iter_mut().zip(p).zip(&mean) {
                *v += (c - m) * (c - m);
            }
        }
        let n = self.len().max(1) as f64;
        var.iter_mut().for_each(|v| *v /= n);
        var
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a [f64];
    type IntoIter = ChunksExact<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

/// Paired features and labels, one row each per training tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: PointSet,
    pub labels: PointSet,
}

impl Dataset {
    pub fn new(features: PointSet, labels: PointSet) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(invalid("feature and label row counts differ"));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.dim()
    }

    pub fn label_dim(&self) -> usize {
        self.labels.dim()
    }

    /// `(x, y)` rows.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.features.iter().zip(self.labels.iter())
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(indices),
            labels: self.labels.select(indices),
        }
    }
}
