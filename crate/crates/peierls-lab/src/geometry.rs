//! Discrete globally hyperbolic spacetime: a time window times a periodic circle.

use crate::error::{LabError, Result};
use crate::tolerances::{CONE_ANGLE, NULL_REL, REACH_SLACK};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
}

impl Lattice {
    pub fn new(nt: usize, nx: usize, dt: f64, dx: f64) -> Result<Self> {
        if nt < 3 || nx < 3 {
            return Err(LabError::InvalidInput(format!(
                "lattice needs nt, nx >= 3 (got {nt} x {nx})"
            )));
        }
        if !(dt > 0.0 && dx > 0.0 && dt.is_finite() && dx.is_finite()) {
            return Err(LabError::InvalidInput("spacings must be positive".into()));
        }
        Ok(Self { nt, nx, dt, dx })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nt * self.nx
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, it: usize, ix: usize) -> usize {
        it * self.nx + ix
    }

    #[inline]
    pub fn coords(&self, node: usize) -> (usize, usize) {
        (node / self.nx, node % self.nx)
    }

    #[inline]
    pub fn wrap(&self, ix: isize) -> usize {
        ix.rem_euclid(self.nx as isize) as usize
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dt * self.dx
    }

    #[inline]
    pub fn t(&self, it: usize) -> f64 {
        it as f64 * self.dt
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.dx
    }

    /// Spatial period.
    pub fn period(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn check_node(&self, it: usize, ix: usize) -> Result<()> {
        if it >= self.nt || ix >= self.nx {
            return Err(LabError::InvalidInput(format!(
                "node ({it}, {ix}) outside {} x {} lattice",
                self.nt, self.nx
            )));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Lattice) -> bool {
        self.nt == other.nt && self.nx == other.nx && self.dt == other.dt && self.dx == other.dx
    }
}

/// Symmetric 2×2 tensor in (t, x) components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub tt: f64,
    pub tx: f64,
    pub xx: f64,
}

impl Sym2 {
    pub const fn new(tt: f64, tx: f64, xx: f64) -> Self {
        Self { tt, tx, xx }
    }

    pub const fn minkowski() -> Self {
        Self::new(-1.0, 0.0, 1.0)
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.tt * self.xx - self.tx * self.tx
    }

    pub fn inverse(&self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.xx / d, -self.tx / d, self.tt / d)
    }

    #[inline]
    pub fn quad(&self, a: f64, b: f64) -> f64 {
        self.tt * a * a + 2.0 * self.tx * a * b + self.xx * b * b
    }

    #[inline]
    pub fn bilinear(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        self.tt * a.0 * b.0 + self.tx * (a.0 * b.1 + a.1 * b.0) + self.xx * a.1 * b.1
    }

    pub fn scale(&self, s: f64) -> Sym2 {
        Sym2::new(self.tt * s, self.tx * s, self.xx * s)
    }

    pub fn neg(&self) -> Sym2 {
        self.scale(-1.0)
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.tt + o.tt, self.tx + o.tx, self.xx + o.xx)
    }

    #[inline]
    pub fn sqrt_abs_det(&self) -> f64 {
        self.det().abs().sqrt()
    }

    pub fn is_lorentzian(&self) -> bool {
        self.det() < 0.0 && self.tt.is_finite() && self.tx.is_finite() && self.xx.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.tt, self.tx, self.xx]
    }

    /// Null slopes dx/dt of this metric read as a metric on vectors, ordered (left, right).
    /// `None` unless Lorentzian with spacelike constant-t slices.
    pub fn null_slopes(&self) -> Option<(f64, f64)> {
        if !self.is_lorentzian() || self.xx <= 0.0 {
            return None;
        }
        let disc = (self.tx * self.tx - self.tt * self.xx).sqrt();
        let a = (-self.tx - disc) / self.xx;
        let b = (-self.tx + disc) / self.xx;
        Some((a.min(b), a.max(b)))
    }

    /// Projective timelike arc (centre angle, half width) of a Lorentzian form on vectors.
    fn timelike_arc(&self) -> (f64, f64) {
        let (a, b, c) = (self.tt, self.tx, self.xx);
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let l1 = mean - rad;
        let l2 = mean + rad;
        let centre = 0.5 * (2.0 * b).atan2(a - c) + FRAC_PI_2;
        let half = (-l1 / l2).sqrt().atan();
        (centre, half)
    }
}

/// Angle difference modulo π folded into [−π/2, π/2].
fn proj_angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(PI);
    if d > FRAC_PI_2 {
        d -= PI;
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpacetime {
    pub lattice: Lattice,
    metric: Vec<Sym2>,
    inverse: Vec<Sym2>,
    sqrt_det: Vec<f64>,
}

impl GridSpacetime {
    pub fn from_components(lattice: Lattice, metric: Vec<Sym2>) -> Result<Self> {
        if metric.len() != lattice.len() {
            return Err(LabError::GridMismatch(format!(
                "metric has {} nodes, lattice {}",
                metric.len(),
                lattice.len()
            )));
        }
        for (n, g) in metric.iter().enumerate() {
            if !g.is_lorentzian() || g.xx <= 0.0 {
                let (it, ix) = lattice.coords(n);
                return Err(LabError::InvalidInput(format!(
                    "metric at ({it}, {ix}) is not Lorentzian with spacelike slices: {g:?}"
                )));
            }
        }
        let inverse = metric.iter().map(Sym2::inverse).collect();
        let sqrt_det = metric.iter().map(Sym2::sqrt_abs_det).collect();
        Ok(Self { lattice, metric, inverse, sqrt_det })
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(f64, f64) -> Sym2) -> Result<Self> {
        let metric = (0..lattice.len())
            .map(|n| {
                let (it, ix) = lattice.coords(n);
                f(lattice.t(it), lattice.x(ix))
            })
            .collect();
        Self::from_components(lattice, metric)
    }

    pub fn minkowski(lattice: Lattice) -> Self {
        Self::from_components(lattice, vec![Sym2::minkowski(); lattice.len()])
            .expect("Minkowski metric is Lorentzian")
    }

    /// `Ω(t,x)²·diag(−1, 1)`.
    pub fn conformal(lattice: Lattice, omega: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::from_fn(lattice, |t, x| {
            let w = omega(t, x);
            Sym2::minkowski().scale(w * w)
        })
    }

    #[inline]
    pub fn metric(&self, node: usize) -> Sym2 {
        self.metric[node]
    }

    #[inline]
    pub fn inv(&self, node: usize) -> Sym2 {
        self.inverse[node]
    }

    #[inline]
    pub fn sqrt_det(&self, node: usize) -> f64 {
        self.sqrt_det[node]
    }

    pub fn metrics(&self) -> &[Sym2] {
        &self.metric
    }

    pub fn inverses(&self) -> &[Sym2] {
        &self.inverse
    }

    /// Future-directed unit normal vector (n^t, n^x) of the constant-t slice.
    pub fn future_normal(&self, node: usize) -> (f64, f64) {
        let gi = self.inverse[node];
        let s = (-gi.tt).sqrt();
        (-gi.tt / s, -gi.tx / s)
    }

    /// Reflection t ↦ T − t.
    pub fn time_reversed(&self) -> GridSpacetime {
        let lat = self.lattice;
        let metric = (0..lat.len())
            .map(|n| {
                let (it, ix) = lat.coords(n);
                let g = self.metric[lat.idx(lat.nt - 1 - it, ix)];
                Sym2::new(g.tt, -g.tx, g.xx)
            })
            .collect();
        GridSpacetime::from_components(lat, metric).expect("reflection preserves signature")
    }
}

/// Boolean mask over lattice nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub lattice: Lattice,
    mask: Vec<bool>,
}

impl NodeSet {
    pub fn empty(lattice: Lattice) -> Self {
        Self { lattice, mask: vec![false; lattice.len()] }
    }

    pub fn full(lattice: Lattice) -> Self {
        Self { lattice, mask: vec![true; lattice.len()] }
    }

    pub fn from_mask(lattice: Lattice, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != lattice.len() {
            return Err(LabError::GridMismatch("mask length".into()));
        }
        Ok(Self { lattice, mask })
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(usize, usize) -> bool) -> Self {
        let mask = (0..lattice.len())
            .map(|n| {
                let (it, ix) = lattice.coords(n);
                f(it, ix)
            })
            .collect();
        Self { lattice, mask }
    }

    pub fn from_nodes(lattice: Lattice, nodes: &[(usize, usize)]) -> Result<Self> {
        let mut s = Self::empty(lattice);
        for &(it, ix) in nodes {
            lattice.check_node(it, ix)?;
            s.insert(lattice.idx(it, ix));
        }
        Ok(s)
    }

    pub fn slice(lattice: Lattice, it: usize) -> Self {
        Self::from_fn(lattice, |t, _| t == it)
    }

    #[inline]
    pub fn contains(&self, node: usize) -> bool {
        self.mask[node]
    }

    #[inline]
    pub fn insert(&mut self, node: usize) {
        self.mask[node] = true;
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(n, _)| n)
    }

    fn zip(&self, o: &NodeSet, f: impl Fn(bool, bool) -> bool) -> NodeSet {
        assert!(self.lattice.same_shape(&o.lattice), "node sets on different lattices");
        NodeSet {
            lattice: self.lattice,
            mask: self.mask.iter().zip(&o.mask).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn union(&self, o: &NodeSet) -> NodeSet {
        self.zip(o, |a, b| a || b)
    }

    pub fn intersection(&self, o: &NodeSet) -> NodeSet {
        self.zip(o, |a, b| a && b)
    }

    pub fn difference(&self, o: &NodeSet) -> NodeSet {
        self.zip(o, |a, b| a && !b)
    }

    pub fn complement(&self) -> NodeSet {
        NodeSet { lattice: self.lattice, mask: self.mask.iter().map(|b| !b).collect() }
    }

    pub fn is_subset(&self, o: &NodeSet) -> bool {
        self.mask.iter().zip(&o.mask).all(|(&a, &b)| !a || b)
    }

    pub fn is_disjoint(&self, o: &NodeSet) -> bool {
        self.mask.iter().zip(&o.mask).all(|(&a, &b)| !(a && b))
    }

    /// Chebyshev dilation by `r` cells (periodic in x, clipped in t).
    pub fn dilate(&self, r: usize) -> NodeSet {
        let lat = self.lattice;
        let mut out = NodeSet::empty(lat);
        let r = r as isize;
        for n in self.iter() {
            let (it, ix) = lat.coords(n);
            for dtt in -r..=r {
                let t = it as isize + dtt;
                if t < 0 || t >= lat.nt as isize {
                    continue;
                }
                for dxx in -r..=r {
                    out.insert(lat.idx(t as usize, lat.wrap(ix as isize + dxx)));
                }
            }
        }
        out
    }

    /// Slices touched by the set as an inclusive range.
    pub fn time_extent(&self) -> Option<(usize, usize)> {
        let mut lo = None;
        let mut hi = None;
        for n in self.iter() {
            let it = n / self.lattice.nx;
            lo = Some(lo.map_or(it, |l: usize| l.min(it)));
            hi = Some(hi.map_or(it, |h: usize| h.max(it)));
        }
        lo.zip(hi)
    }

    pub fn to_nodes(&self) -> Vec<(usize, usize)> {
        self.iter().map(|n| self.lattice.coords(n)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovectorClass {
    FutureTimelike,
    PastTimelike,
    FutureNull,
    PastNull,
    Spacelike,
}

impl CovectorClass {
    pub fn is_future_causal(self) -> bool {
        matches!(self, Self::FutureTimelike | Self::FutureNull)
    }

    pub fn is_past_causal(self) -> bool {
        matches!(self, Self::PastTimelike | Self::PastNull)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub it: usize,
    pub ix: usize,
    pub xi_t: f64,
    pub xi_x: f64,
}

impl Covector {
    pub fn new(it: usize, ix: usize, xi_t: f64, xi_x: f64) -> Self {
        Self { it, ix, xi_t, xi_x }
    }

    pub fn is_zero(&self) -> bool {
        self.xi_t == 0.0 && self.xi_x == 0.0
    }
}

/// Classification of a nonzero covector against an inverse metric.
pub fn classify_with(ginv: &Sym2, xi_t: f64, xi_x: f64) -> CovectorClass {
    let q = ginv.quad(xi_t, xi_x);
    let norm2 = xi_t * xi_t + xi_x * xi_x;
    let orient = ginv.tt * xi_t + ginv.tx * xi_x;
    if q.abs() <= NULL_REL * norm2 {
        if orient < 0.0 {
            CovectorClass::FutureNull
        } else {
            CovectorClass::PastNull
        }
    } else if q < 0.0 {
        if orient < 0.0 {
            CovectorClass::FutureTimelike
        } else {
            CovectorClass::PastTimelike
        }
    } else {
        CovectorClass::Spacelike
    }
}

pub fn classify_covector(st: &GridSpacetime, xi: &Covector) -> Result<CovectorClass> {
    st.lattice.check_node(xi.it, xi.ix)?;
    if xi.is_zero() || !xi.xi_t.is_finite() || !xi.xi_x.is_finite() {
        return Err(LabError::InvalidInput("covector must be finite and nonzero".into()));
    }
    Ok(classify_with(&st.inv(st.lattice.idx(xi.it, xi.ix)), xi.xi_t, xi.xi_x))
}

/// Which metric's light cones drive a causal sweep.
#[derive(Debug, Clone, Copy)]
pub enum ConeMetric<'a> {
    Background,
    /// Per-node metric on vectors (e.g. the symbol metric ĝ).
    Other(&'a [Sym2]),
}

/// Lattice reach (lo, hi) per time step, always containing the nearest-neighbour stencil.
fn step_reach(g: Option<&Sym2>, ratio: f64, nx: usize) -> (isize, isize) {
    match g.and_then(Sym2::null_slopes) {
        Some((a, b)) => {
            let lo = (a * ratio + REACH_SLACK).floor().min(-1.0);
            let hi = (b * ratio - REACH_SLACK).ceil().max(1.0);
            let cap = nx as f64;
            (lo.max(-cap) as isize, hi.min(cap) as isize)
        }
        None => (-(nx as isize), nx as isize),
    }
}

fn sweep(st: &GridSpacetime, cone: ConeMetric<'_>, seed: &NodeSet, forward: bool) -> Result<NodeSet> {
    let lat = st.lattice;
    if !seed.lattice.same_shape(&lat) {
        return Err(LabError::GridMismatch("seed lattice".into()));
    }
    if seed.is_empty() {
        return Err(LabError::InvalidInput("causal sweep needs a nonempty seed".into()));
    }
    if let ConeMetric::Other(m) = cone {
        if m.len() != lat.len() {
            return Err(LabError::GridMismatch("cone metric length".into()));
        }
    }
    let ratio = lat.dt / lat.dx;
    let mut out = seed.clone();
    let order: Vec<usize> = if forward {
        (0..lat.nt - 1).collect()
    } else {
        (1..lat.nt).rev().collect()
    };
    for it in order {
        let next = if forward { it + 1 } else { it - 1 };
        for ix in 0..lat.nx {
            let n = lat.idx(it, ix);
            if !out.contains(n) {
                continue;
            }
            let g = match cone {
                ConeMetric::Background => st.metric(n),
                ConeMetric::Other(m) => m[n],
            };
            let (lo, hi) = step_reach(Some(&g), ratio, lat.nx);
            // Backward in time the cone slopes flip sign.
            let (lo, hi) = if forward { (lo, hi) } else { (-hi, -lo) };
            if hi - lo + 1 >= lat.nx as isize {
                for j in 0..lat.nx {
                    out.insert(lat.idx(next, j));
                }
            } else {
                for d in lo..=hi {
                    out.insert(lat.idx(next, lat.wrap(ix as isize + d)));
                }
            }
        }
    }
    Ok(out)
}

/// Discrete J⁺: closure of the seed under one-step future reach.
pub fn causal_future(st: &GridSpacetime, cone: ConeMetric<'_>, seed: &NodeSet) -> Result<NodeSet> {
    sweep(st, cone, seed, true)
}

/// Discrete J⁻: closure of the seed under one-step past reach.
pub fn causal_past(st: &GridSpacetime, cone: ConeMetric<'_>, seed: &NodeSet) -> Result<NodeSet> {
    sweep(st, cone, seed, false)
}

/// `g1 ≲ g2` node-wise: the open g1-timelike cone lies in the closed g2-causal cone.
pub fn metric_order_leq(st: &GridSpacetime, g1: &[Sym2], g2: &[Sym2]) -> Result<bool> {
    let n = st.lattice.len();
    if g1.len() != n || g2.len() != n {
        return Err(LabError::GridMismatch("metric field length".into()));
    }
    for (node, (a, b)) in g1.iter().zip(g2).enumerate() {
        if !a.is_lorentzian() || !b.is_lorentzian() {
            let (it, ix) = st.lattice.coords(node);
            return Err(LabError::InvalidInput(format!("non-Lorentzian metric at ({it}, {ix})")));
        }
        if !cone_leq(a, b) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Single-node version of [`metric_order_leq`].
pub fn cone_leq(g1: &Sym2, g2: &Sym2) -> bool {
    let (c1, w1) = g1.timelike_arc();
    let (c2, w2) = g2.timelike_arc();
    proj_angle_diff(c1, c2).abs() + w1 <= w2 + CONE_ANGLE
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(n: usize) -> Lattice {
        Lattice::new(n, n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn covector_classes_on_minkowski() {
        let st = GridSpacetime::minkowski(lat(4));
        let c = |a, b| classify_covector(&st, &Covector::new(1, 1, a, b)).unwrap();
        assert_eq!(c(1.0, 0.0), CovectorClass::FutureTimelike);
        assert_eq!(c(-1.0, 0.0), CovectorClass::PastTimelike);
        assert_eq!(c(0.0, 1.0), CovectorClass::Spacelike);
        assert_eq!(c(1.0, 1.0), CovectorClass::FutureNull);
        assert_eq!(c(-1.0, 1.0), CovectorClass::PastNull);
        assert!(classify_covector(&st, &Covector::new(1, 1, 0.0, 0.0)).is_err());
        assert!(classify_covector(&st, &Covector::new(9, 1, 1.0, 0.0)).is_err());
    }

    #[test]
    fn minkowski_future_cone_matches_predicate() {
        let l = Lattice::new(8, 21, 1.0, 1.0).unwrap();
        let st = GridSpacetime::minkowski(l);
        let seed = NodeSet::from_nodes(l, &[(0, 10)]).unwrap();
        let j = causal_future(&st, ConeMetric::Background, &seed).unwrap();
        let want = NodeSet::from_fn(l, |it, ix| (ix as isize - 10).unsigned_abs() <= it);
        assert_eq!(j, want);
    }

    #[test]
    fn full_slice_seed_gives_everything_later() {
        let l = lat(6);
        let st = GridSpacetime::minkowski(l);
        let j = causal_future(&st, ConeMetric::Background, &NodeSet::slice(l, 0)).unwrap();
        assert_eq!(j, NodeSet::full(l));
        let p = causal_past(&st, ConeMetric::Background, &NodeSet::slice(l, 0)).unwrap();
        assert_eq!(p, NodeSet::slice(l, 0));
    }

    #[test]
    fn conformal_cones_coincide() {
        let l = Lattice::new(10, 16, 0.5, 1.0).unwrap();
        let flat = GridSpacetime::minkowski(l);
        let conf = GridSpacetime::conformal(l, |t, x| 1.3 + 0.2 * (t + 0.7 * x).sin()).unwrap();
        let seed = NodeSet::from_nodes(l, &[(2, 5), (4, 11)]).unwrap();
        assert_eq!(
            causal_future(&flat, ConeMetric::Background, &seed).unwrap(),
            causal_future(&conf, ConeMetric::Background, &seed).unwrap()
        );
    }

    #[test]
    fn metric_order_examples() {
        let st = GridSpacetime::minkowski(lat(3));
        let n = 9;
        let m = vec![Sym2::minkowski(); n];
        let wide = vec![Sym2::new(-1.0, 0.0, 0.25); n];
        assert!(metric_order_leq(&st, &m, &m).unwrap());
        assert!(metric_order_leq(&st, &m, &wide).unwrap());
        assert!(!metric_order_leq(&st, &wide, &m).unwrap());
        let scaled: Vec<Sym2> = m.iter().map(|g| g.scale(3.7)).collect();
        assert!(metric_order_leq(&st, &m, &scaled).unwrap());
        assert!(metric_order_leq(&st, &scaled, &m).unwrap());
        let riem = vec![Sym2::new(1.0, 0.0, 1.0); n];
        assert!(metric_order_leq(&st, &m, &riem).is_err());
    }

    #[test]
    fn metric_order_matches_angular_sampling() {
        // Vectors on a fine angular mesh: g1-timelike must imply g2-causal.
        let implied = |g1: &Sym2, g2: &Sym2| {
            (0..20000).all(|k| {
                let th = PI * k as f64 / 20000.0;
                let (a, b) = (th.cos(), th.sin());
                g1.quad(a, b) >= -1e-9 || g2.quad(a, b) <= 1e-9
            })
        };
        let gs = [
            Sym2::minkowski(),
            Sym2::new(-1.0, 0.0, 0.25),
            Sym2::new(-1.0, 0.3, 1.0),
            Sym2::new(-2.0, -0.5, 0.7),
            Sym2::new(1.0, 1.5, 1.0),
        ];
        for a in &gs {
            for b in &gs {
                assert_eq!(cone_leq(a, b), implied(a, b), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn time_reversal_mirrors_cones() {
        let l = Lattice::new(9, 12, 0.6, 1.0).unwrap();
        let st = GridSpacetime::from_fn(l, |t, x| Sym2::new(-1.0 - 0.1 * t, 0.2 * x.sin(), 1.0)).unwrap();
        let rev = st.time_reversed();
        let seed = NodeSet::from_nodes(l, &[(7, 3)]).unwrap();
        let past = causal_past(&st, ConeMetric::Background, &seed).unwrap();
        let rseed = NodeSet::from_nodes(l, &[(1, 3)]).unwrap();
        let fut = causal_future(&rev, ConeMetric::Background, &rseed).unwrap();
        let reflected = NodeSet::from_fn(l, |it, ix| fut.contains(l.idx(l.nt - 1 - it, ix)));
        assert_eq!(past, reflected);
    }

    #[test]
    fn dilation_wraps_in_space_and_clips_in_time() {
        let l = lat(5);
        let s = NodeSet::from_nodes(l, &[(0, 0)]).unwrap().dilate(1);
        assert_eq!(s.count(), 6);
        assert!(s.contains(l.idx(1, 4)));
    }
}
