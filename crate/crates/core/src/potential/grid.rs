//! Box domains, lattice tags and grid functions.

use serde::{Deserialize, Serialize};

use crate::tolerances::check_dim;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

/// Closed face `{x_axis = lower}` or `{x_axis = upper}` of a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellTag {
    Interior,
    /// Boundary cell lying on an excluded face.
    Boundary,
    /// Boundary cell of the reduced boundary.
    ReducedBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Full,
    Reduced,
}

/// Axis-aligned box with a uniform lattice per axis. The reduced boundary
/// is the boundary minus the listed closed faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    #[serde(default)]
    excluded_faces: Vec<Face>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    #[serde(default)]
    excluded_faces: Vec<Face>,
}

impl TryFrom<RawBox> for BoxDomain {
    type Error = Error;
    fn try_from(r: RawBox) -> Result<Self> {
        BoxDomain::new(r.lower, r.upper, r.counts)?.with_excluded_faces(r.excluded_faces)
    }
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let n = lower.len();
        check_dim(n)?;
        if upper.len() != n || counts.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: upper.len().min(counts.len()) });
        }
        for i in 0..n {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::InvalidParameter(format!("axis {i}: need lower < upper")));
            }
            if counts[i] < 3 {
                return Err(Error::InvalidParameter(format!("axis {i}: at least 3 lattice points required")));
            }
        }
        Ok(Self { lower, upper, counts, excluded_faces: vec![] })
    }

    /// Lattice with spacing as close to `h` as the box allows.
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter("spacing must be positive".into()));
        }
        let counts = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| ((u - l) / h).round().max(2.0) as usize + 1)
            .collect();
        Self::new(lower, upper, counts)
    }

    /// Unit cube `[0,1]^n` with `m` points per axis.
    pub fn unit_cube(n: usize, m: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![1.0; n], vec![m; n])
    }

    pub fn with_excluded_faces(mut self, faces: Vec<Face>) -> Result<Self> {
        for f in &faces {
            if f.axis >= self.dim() {
                return Err(Error::InvalidParameter(format!("face axis {} out of range", f.axis)));
            }
        }
        self.excluded_faces = faces;
        Ok(self)
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

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn excluded_faces(&self) -> &[Face] {
        &self.excluded_faces
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] - 1) as f64
    }

    pub fn h_max(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.dim()).map(|i| self.spacing(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn diameter(&self) -> f64 {
        crate::jet::vnorm(&crate::jet::vsub(&self.upper, &self.lower))
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { self.upper[i] } else { self.lower[i] }).collect())
            .collect()
    }

    /// Multi-index of a linear index; the last axis varies fastest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let n = self.dim();
        let mut m = vec![0; n];
        for i in (0..n).rev() {
            m[i] = idx % self.counts[i];
            idx /= self.counts[i];
        }
        m
    }

    pub fn linear_index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn point_of(&self, m: &[usize]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                if m[i] + 1 == self.counts[i] {
                    self.upper[i]
                } else {
                    self.lower[i] + m[i] as f64 * self.spacing(i)
                }
            })
            .collect()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.point_of(&self.multi_index(idx))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }

    pub fn on_face(&self, idx: usize, face: Face) -> bool {
        let m = self.multi_index(idx);
        match face.side {
            Side::Lower => m[face.axis] == 0,
            Side::Upper => m[face.axis] + 1 == self.counts[face.axis],
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        m.iter().zip(&self.counts).any(|(i, c)| *i == 0 || *i + 1 == *c)
    }

    pub fn tag(&self, idx: usize) -> CellTag {
        if !self.is_boundary(idx) {
            CellTag::Interior
        } else if self.excluded_faces.iter().any(|f| self.on_face(idx, *f)) {
            CellTag::Boundary
        } else {
            CellTag::ReducedBoundary
        }
    }

    /// Boundary cells that carry boundary data under the given mode.
    pub fn is_designated_boundary(&self, idx: usize, mode: BoundaryMode) -> bool {
        match mode {
            BoundaryMode::Full => self.is_boundary(idx),
            BoundaryMode::Reduced => self.tag(idx) == CellTag::ReducedBoundary,
        }
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_boundary(i)).collect()
    }

    /// Distance from `x` to the boundary of the box.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| (x[i] - self.lower[i]).min(self.upper[i] - x[i]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Values on the lattice of a box; `-inf` is allowed only on the declared
/// blowup face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub domain: BoxDomain,
    pub values: Vec<f64>,
    #[serde(default)]
    pub blowup: Option<Face>,
}

impl GridFunction {
    pub fn new(domain: BoxDomain, values: Vec<f64>, blowup: Option<Face>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::DimensionMismatch { expected: domain.len(), got: values.len() });
        }
        for (i, v) in values.iter().enumerate() {
            if v.is_finite() {
                continue;
            }
            let allowed = *v == f64::NEG_INFINITY && blowup.is_some_and(|f| domain.on_face(i, f));
            if !allowed {
                return Err(Error::NonFinite(format!("grid value {v} at lattice point {:?}", domain.point(i))));
            }
        }
        Ok(Self { domain, values, blowup })
    }

    pub fn from_fn(domain: &BoxDomain, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..domain.len()).map(|i| f(&domain.point(i))).collect();
        Self::new(domain.clone(), values, None)
    }

    pub fn from_classical(domain: &BoxDomain, f: &dyn super::Classical) -> Result<Self> {
        let values: Vec<f64> = (0..domain.len()).map(|i| f.value(&domain.point(i))).collect();
        let blowup = if values.iter().any(|v| *v == f64::NEG_INFINITY) {
            f.blowup_face()
        } else {
            None
        };
        Self::new(domain.clone(), values, blowup)
    }

    pub fn get(&self, m: &[usize]) -> f64 {
        self.values[self.domain.linear_index(m)]
    }

    /// Largest absolute finite value.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolation; `None` outside the box or next to `-inf`.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let d = &self.domain;
        if !d.contains(x) {
            return None;
        }
        let n = d.dim();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for i in 0..n {
            let s = (x[i] - d.lower()[i]) / d.spacing(i);
            let k = (s.floor() as usize).min(d.counts()[i] - 2);
            base[i] = k;
            frac[i] = (s - k as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for mask in 0..1usize << n {
            let mut w = 1.0;
            let mut m = base.clone();
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    m[i] += 1;
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w == 0.0 {
                continue;
            }
            let v = self.get(&m);
            if !v.is_finite() {
                return None;
            }
            acc += w * v;
        }
        Some(acc)
    }

    /// Maximum of `values` over the cells selected by `pred`, with its index.
    pub fn max_where(&self, pred: impl Fn(usize) -> bool) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, v) in self.values.iter().enumerate() {
            if pred(i) && best.is_none_or(|(b, _)| *v > b) {
                best = Some((*v, i));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_partition_and_reduce() {
        let d = BoxDomain::unit_cube(2, 5)
            .unwrap()
            .with_excluded_faces(vec![Face { axis: 1, side: Side::Upper }])
            .unwrap();
        let mut counts = [0usize; 3];
        for i in 0..d.len() {
            match d.tag(i) {
                CellTag::Interior => counts[0] += 1,
                CellTag::Boundary => counts[1] += 1,
                CellTag::ReducedBoundary => counts[2] += 1,
            }
        }
        assert_eq!(counts, [9, 5, 11]);
    }

    #[test]
    fn no_exclusion_means_full_reduced_boundary() {
        let d = BoxDomain::unit_cube(3, 4).unwrap();
        for i in 0..d.len() {
            assert_eq!(d.is_designated_boundary(i, BoundaryMode::Full), d.is_designated_boundary(i, BoundaryMode::Reduced));
        }
    }

    #[test]
    fn index_roundtrip() {
        let d = BoxDomain::new(vec![0.0, -1.0, 2.0], vec![1.0, 1.0, 3.0], vec![3, 4, 5]).unwrap();
        for i in 0..d.len() {
            assert_eq!(d.linear_index(&d.multi_index(i)), i);
        }
        assert_eq!(d.point(d.len() - 1), vec![1.0, 1.0, 3.0]);
    }

    #[test]
    fn interpolation_reproduces_affine() {
        let d = BoxDomain::unit_cube(2, 11).unwrap();
        let g = GridFunction::from_fn(&d, |x| 2.0 * x[0] - x[1] + 0.5).unwrap();
        let v = g.interpolate(&[0.33, 0.71]).unwrap();
        assert!((v - (0.66 - 0.71 + 0.5)).abs() < 1e-12);
        assert!(g.interpolate(&[1.2, 0.0]).is_none());
    }

    #[test]
    fn neg_infinity_only_on_blowup_face() {
        let d = BoxDomain::unit_cube(1, 5).unwrap();
        let mut v = vec![0.0; 5];
        v[4] = f64::NEG_INFINITY;
        assert!(GridFunction::new(d.clone(), v.clone(), None).is_err());
        assert!(GridFunction::new(d, v, Some(Face { axis: 0, side: Side::Upper })).is_ok());
    }
}
