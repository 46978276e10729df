//! Field configurations, densities, test functions and seminorms.

use crate::error::{LabError, Result};
use crate::geometry::{GridSpacetime, Lattice, NodeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// A real scalar field sampled on every lattice node, row-major in (t, x).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub lattice: Lattice,
    pub values: Vec<f64>,
}

/// Coefficients of the coordinate volume element `dt∧dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub lattice: Lattice,
    pub coeffs: Vec<f64>,
}

macro_rules! grid_array {
    ($ty:ident, $field:ident) => {
        impl $ty {
            pub fn zeros(lattice: Lattice) -> Self {
                Self { lattice, $field: vec![0.0; lattice.len()] }
            }

            pub fn constant(lattice: Lattice, c: f64) -> Self {
                Self { lattice, $field: vec![c; lattice.len()] }
            }

            pub fn from_vec(lattice: Lattice, v: Vec<f64>) -> Result<Self> {
                if v.len() != lattice.len() {
                    return Err(LabError::GridMismatch(format!(
                        "{} values for {} nodes",
                        v.len(),
                        lattice.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(LabError::InvalidInput("non-finite entry".into()));
                }
                Ok(Self { lattice, $field: v })
            }

            /// Sample `f(t, x)` at node coordinates.
            pub fn from_fn(lattice: Lattice, f: impl Fn(f64, f64) -> f64) -> Self {
                let v = (0..lattice.len())
                    .map(|n| {
                        let (it, ix) = lattice.coords(n);
                        f(lattice.t(it), lattice.x(ix))
                    })
                    .collect();
                Self { lattice, $field: v }
            }

            pub fn from_node_fn(lattice: Lattice, f: impl Fn(usize, usize) -> f64) -> Self {
                let v = (0..lattice.len())
                    .map(|n| {
                        let (it, ix) = lattice.coords(n);
                        f(it, ix)
                    })
                    .collect();
                Self { lattice, $field: v }
            }

            #[inline]
            pub fn get(&self, it: usize, ix: usize) -> f64 {
                self.$field[self.lattice.idx(it, ix)]
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.$field
            }

            fn check(&self, o: &Self) -> Result<()> {
                if self.lattice.same_shape(&o.lattice) {
                    Ok(())
                } else {
                    Err(LabError::GridMismatch("operands live on different lattices".into()))
                }
            }

            pub fn add(&self, o: &Self) -> Self {
                self.check(o).expect("lattice mismatch");
                let v = self.$field.iter().zip(&o.$field).map(|(a, b)| a + b).collect();
                Self { lattice: self.lattice, $field: v }
            }

            pub fn sub(&self, o: &Self) -> Self {
                self.check(o).expect("lattice mismatch");
                let v = self.$field.iter().zip(&o.$field).map(|(a, b)| a - b).collect();
                Self { lattice: self.lattice, $field: v }
            }

            pub fn scale(&self, s: f64) -> Self {
                Self { lattice: self.lattice, $field: self.$field.iter().map(|a| a * s).collect() }
            }

            /// `self + s·o`.
            pub fn axpy(&self, s: f64, o: &Self) -> Self {
                self.check(o).expect("lattice mismatch");
                let v = self.$field.iter().zip(&o.$field).map(|(a, b)| a + s * b).collect();
                Self { lattice: self.lattice, $field: v }
            }

            pub fn mul(&self, o: &Self) -> Self {
                self.check(o).expect("lattice mismatch");
                let v = self.$field.iter().zip(&o.$field).map(|(a, b)| a * b).collect();
                Self { lattice: self.lattice, $field: v }
            }

            pub fn norm_inf(&self) -> f64 {
                self.$field.iter().fold(0.0, |m, a| m.max(a.abs()))
            }

            pub fn norm_l2(&self) -> f64 {
                (self.$field.iter().map(|a| a * a).sum::<f64>() * self.lattice.cell_area()).sqrt()
            }

            /// Nodes with a nonzero entry.
            pub fn nonzero_set(&self) -> NodeSet {
                NodeSet::from_mask(self.lattice, self.$field.iter().map(|a| *a != 0.0).collect())
                    .expect("same lattice")
            }

            /// Zero outside `set`.
            pub fn restrict(&self, set: &NodeSet) -> Self {
                let v = self
                    .$field
                    .iter()
                    .enumerate()
                    .map(|(n, a)| if set.contains(n) { *a } else { 0.0 })
                    .collect();
                Self { lattice: self.lattice, $field: v }
            }

            /// CSV with one row per time slice.
            pub fn to_csv(&self) -> String {
                let mut s = String::new();
                for it in 0..self.lattice.nt {
                    for ix in 0..self.lattice.nx {
                        if ix > 0 {
                            s.push(',');
                        }
                        let _ = write!(s, "{:e}", self.get(it, ix));
                    }
                    s.push('\n');
                }
                s
            }

            pub fn from_csv(lattice: Lattice, text: &str) -> Result<Self> {
                let mut v = Vec::with_capacity(lattice.len());
                for (row, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
                    for cell in line.split(',') {
                        let x: f64 = cell.trim().parse().map_err(|e| {
                            LabError::InvalidInput(format!("csv row {}: {e}", row + 1))
                        })?;
                        v.push(x);
                    }
                }
                Self::from_vec(lattice, v)
            }
        }
    };
}

grid_array!(FieldConfig, values);
grid_array!(Density, coeffs);

/// `⟨u, φ⟩ = Σ u·φ·dt·dx`.
pub fn pair(u: &Density, phi: &FieldConfig) -> Result<f64> {
    if !u.lattice.same_shape(&phi.lattice) {
        return Err(LabError::GridMismatch("pair: lattices differ".into()));
    }
    Ok(pair_raw(&u.coeffs, &phi.values) * u.lattice.cell_area())
}

#[inline]
pub(crate) fn pair_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `*_g u`: coefficients divided by `√|det g|`.
pub fn hodge_star(st: &GridSpacetime, u: &Density) -> Result<FieldConfig> {
    if !u.lattice.same_shape(&st.lattice) {
        return Err(LabError::GridMismatch("hodge_star".into()));
    }
    let v = u.coeffs.iter().enumerate().map(|(n, c)| c / st.sqrt_det(n)).collect();
    Ok(FieldConfig { lattice: u.lattice, values: v })
}

/// `φ·dμ_g` as a coordinate density.
pub fn to_density(st: &GridSpacetime, phi: &FieldConfig) -> Result<Density> {
    if !phi.lattice.same_shape(&st.lattice) {
        return Err(LabError::GridMismatch("to_density".into()));
    }
    let v = phi.values.iter().enumerate().map(|(n, p)| p * st.sqrt_det(n)).collect();
    Ok(Density { lattice: phi.lattice, coeffs: v })
}

impl FieldConfig {
    /// Reinterpret as density coefficients without weighting.
    pub fn as_density(&self) -> Density {
        Density { lattice: self.lattice, coeffs: self.values.clone() }
    }
}

impl Density {
    pub fn as_field(&self) -> FieldConfig {
        FieldConfig { lattice: self.lattice, values: self.coeffs.clone() }
    }
}

/// Compactly supported test function on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub field: FieldConfig,
}

/// Raised-cosine ramp: 1 at distance 0, decaying over `w` cells, 0 beyond.
fn ramp(d: usize, w: usize) -> f64 {
    if d == 0 {
        1.0
    } else if d <= w {
        0.5 * (1.0 + (PI * d as f64 / (w + 1) as f64).cos())
    } else {
        0.0
    }
}

fn periodic_dist(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

impl TestFunction {
    pub fn new(field: FieldConfig) -> Self {
        Self { field }
    }

    pub fn constant(lattice: Lattice, c: f64) -> Self {
        Self::new(FieldConfig::constant(lattice, c))
    }

    pub fn indicator(set: &NodeSet) -> Self {
        Self::new(FieldConfig::from_node_fn(set.lattice, |it, ix| {
            if set.contains(set.lattice.idx(it, ix)) {
                1.0
            } else {
                0.0
            }
        }))
    }

    /// Equal to 1 on slices `t0..=t1` and columns within `hx` of `xc`, with raised-cosine ramps
    /// of `ramp_w` cells outside.
    pub fn smooth_box(lattice: Lattice, t0: usize, t1: usize, xc: usize, hx: usize, ramp_w: usize) -> Self {
        Self::new(FieldConfig::from_node_fn(lattice, |it, ix| {
            let dt = if it < t0 {
                t0 - it
            } else if it > t1 {
                it - t1
            } else {
                0
            };
            let dxn = periodic_dist(ix, xc, lattice.nx).saturating_sub(hx);
            ramp(dt, ramp_w) * ramp(dxn, ramp_w)
        }))
    }

    /// Radial raised cosine of radius `r` cells centred on a node.
    pub fn bump(lattice: Lattice, it0: usize, ix0: usize, r: f64) -> Self {
        Self::new(FieldConfig::from_node_fn(lattice, |it, ix| {
            let a = it as f64 - it0 as f64;
            let b = periodic_dist(ix, ix0, lattice.nx) as f64;
            let rho = (a * a + b * b).sqrt() / r;
            if rho < 1.0 {
                0.5 * (1.0 + (PI * rho).cos())
            } else {
                0.0
            }
        }))
    }

    pub fn support(&self) -> NodeSet {
        self.field.nonzero_set()
    }

    pub fn lattice(&self) -> Lattice {
        self.field.lattice
    }

    #[inline]
    pub fn at(&self, node: usize) -> f64 {
        self.field.values[node]
    }

    /// `∫ f dμ_g`.
    pub fn integral(&self, st: &GridSpacetime) -> f64 {
        let l = st.lattice;
        self.field.values.iter().enumerate().map(|(n, f)| f * st.sqrt_det(n)).sum::<f64>() * l.cell_area()
    }

    /// Rescaled so that `∫ f dμ_g = 1`.
    pub fn normalized(&self, st: &GridSpacetime) -> Result<Self> {
        let s = self.integral(st);
        if s == 0.0 {
            return Err(LabError::InvalidInput("cannot normalize a test function with zero integral".into()));
        }
        Ok(Self::new(self.field.scale(1.0 / s)))
    }

    pub fn add(&self, o: &TestFunction) -> TestFunction {
        TestFunction::new(self.field.add(&o.field))
    }
}

/// Finite-difference operators used by seminorms and quadratic functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiffOp {
    Id,
    Dt,
    Dx,
    Dtt,
    Dtx,
    Dxx,
}

/// Up to six (Δt, Δx, weight) taps.
#[derive(Debug, Clone, Copy)]
pub struct Taps {
    pub n: usize,
    pub t: [(isize, isize, f64); 6],
}

impl Taps {
    fn from(list: &[(isize, isize, f64)]) -> Self {
        let mut t = [(0, 0, 0.0); 6];
        t[..list.len()].copy_from_slice(list);
        Self { n: list.len(), t }
    }

    pub fn iter(&self) -> impl Iterator<Item = &(isize, isize, f64)> {
        self.t[..self.n].iter()
    }
}

impl DiffOp {
    /// Operators whose squares sum to `|∇ʲφ|²_e` for `j ≤ k`, with multiplicities.
    pub fn up_to(k: usize) -> Vec<(DiffOp, f64)> {
        let mut v = vec![(DiffOp::Id, 1.0)];
        if k >= 1 {
            v.extend([(DiffOp::Dt, 1.0), (DiffOp::Dx, 1.0)]);
        }
        if k >= 2 {
            v.extend([(DiffOp::Dtt, 1.0), (DiffOp::Dtx, 2.0), (DiffOp::Dxx, 1.0)]);
        }
        v
    }

    pub fn order(self) -> usize {
        match self {
            DiffOp::Id => 0,
            DiffOp::Dt | DiffOp::Dx => 1,
            _ => 2,
        }
    }

    /// Taps at slice `it`: centred, periodic in x, one-sided in t at the window ends.
    pub fn taps(self, lat: &Lattice, it: usize) -> Taps {
        let (ht, hx) = (lat.dt, lat.dx);
        let last = lat.nt - 1;
        // First-difference offsets in t.
        let (ta, tb, tw) = if it == 0 {
            (0, 1, 1.0 / ht)
        } else if it == last {
            (-1, 0, 1.0 / ht)
        } else {
            (-1, 1, 0.5 / ht)
        };
        match self {
            DiffOp::Id => Taps::from(&[(0, 0, 1.0)]),
            DiffOp::Dt => Taps::from(&[(tb, 0, tw), (ta, 0, -tw)]),
            DiffOp::Dx => Taps::from(&[(0, 1, 0.5 / hx), (0, -1, -0.5 / hx)]),
            DiffOp::Dtt => {
                let c = if it == 0 {
                    1
                } else if it == last {
                    -1
                } else {
                    0
                };
                let w = 1.0 / (ht * ht);
                Taps::from(&[(c - 1, 0, w), (c, 0, -2.0 * w), (c + 1, 0, w)])
            }
            DiffOp::Dxx => {
                let w = 1.0 / (hx * hx);
                Taps::from(&[(0, -1, w), (0, 0, -2.0 * w), (0, 1, w)])
            }
            DiffOp::Dtx => {
                let w = tw * 0.5 / hx;
                Taps::from(&[(tb, 1, w), (tb, -1, -w), (ta, 1, -w), (ta, -1, w)])
            }
        }
    }

    /// Apply at a node.
    pub fn apply_at(self, phi: &[f64], lat: &Lattice, it: usize, ix: usize) -> f64 {
        let taps = self.taps(lat, it);
        taps.iter()
            .map(|&(a, b, w)| {
                let t = (it as isize + a) as usize;
                w * phi[lat.idx(t, lat.wrap(ix as isize + b))]
            })
            .sum()
    }

    pub fn apply(self, phi: &FieldConfig) -> FieldConfig {
        let lat = phi.lattice;
        FieldConfig::from_node_fn(lat, |it, ix| self.apply_at(&phi.values, &lat, it, ix))
    }

    /// `Dᵀ` applied to node weights `w` (scatter form).
    pub fn apply_transpose(self, w: &[f64], lat: &Lattice, out: &mut [f64]) {
        for it in 0..lat.nt {
            let taps = self.taps(lat, it);
            for ix in 0..lat.nx {
                let c = w[lat.idx(it, ix)];
                if c == 0.0 {
                    continue;
                }
                for &(a, b, tw) in taps.iter() {
                    let t = (it as isize + a) as usize;
                    out[lat.idx(t, lat.wrap(ix as isize + b))] += tw * c;
                }
            }
        }
    }
}

fn check_order(k: usize) -> Result<()> {
    if k > 2 {
        Err(LabError::UnsupportedOrder(k))
    } else {
        Ok(())
    }
}

fn pointwise_sq(phi: &FieldConfig, k: usize, it: usize, ix: usize) -> f64 {
    let lat = phi.lattice;
    DiffOp::up_to(k)
        .iter()
        .map(|&(op, m)| {
            let v = op.apply_at(&phi.values, &lat, it, ix);
            m * v * v
        })
        .sum()
}

/// `‖φ‖_{∞,k,K}` with flat auxiliary metric.
pub fn sup_seminorm(phi: &FieldConfig, k: usize, set: &NodeSet) -> Result<f64> {
    check_order(k)?;
    if set.is_empty() {
        return Err(LabError::InvalidInput("seminorm over an empty node set".into()));
    }
    if !set.lattice.same_shape(&phi.lattice) {
        return Err(LabError::GridMismatch("seminorm node set".into()));
    }
    let lat = phi.lattice;
    Ok(set
        .iter()
        .map(|n| {
            let (it, ix) = lat.coords(n);
            pointwise_sq(phi, k, it, ix).sqrt()
        })
        .fold(0.0, f64::max))
}

/// `‖φ‖_{∞,k,f}`.
pub fn sup_seminorm_weighted(phi: &FieldConfig, k: usize, f: &TestFunction) -> Result<f64> {
    check_order(k)?;
    let lat = phi.lattice;
    Ok((0..lat.len())
        .map(|n| {
            let (it, ix) = lat.coords(n);
            f.at(n).abs() * pointwise_sq(phi, k, it, ix).sqrt()
        })
        .fold(0.0, f64::max))
}

/// `‖φ‖²_{2,k,f} = Σ_{j≤k} ∫|f∇ʲφ|² dμ_e`.
pub fn sobolev_sq(phi: &FieldConfig, k: usize, f: &TestFunction) -> Result<f64> {
    check_order(k)?;
    if !f.lattice().same_shape(&phi.lattice) {
        return Err(LabError::GridMismatch("sobolev weight".into()));
    }
    let lat = phi.lattice;
    let s: f64 = (0..lat.len())
        .map(|n| {
            let fv = f.at(n);
            if fv == 0.0 {
                return 0.0;
            }
            let (it, ix) = lat.coords(n);
            fv * fv * pointwise_sq(phi, k, it, ix)
        })
        .sum();
    Ok(s * lat.cell_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sym2;

    fn lat() -> Lattice {
        Lattice::new(6, 8, 0.25, 0.5).unwrap()
    }

    #[test]
    fn pairing_basics() {
        let l = lat();
        let one = Density::constant(l, 1.0);
        let p = pair(&one, &FieldConfig::constant(l, 1.0)).unwrap();
        assert!((p - 6.0 * 8.0 * 0.125).abs() < 1e-14);
        let mut d = Density::zeros(l);
        d.coeffs[l.idx(2, 3)] = 1.0;
        let phi = FieldConfig::from_node_fn(l, |a, b| (a * 10 + b) as f64);
        assert_eq!(pair(&d, &phi).unwrap(), 23.0 * 0.125);
        let other = Lattice::new(6, 9, 0.25, 0.5).unwrap();
        assert!(pair(&one, &FieldConfig::zeros(other)).is_err());
    }

    #[test]
    fn hodge_star_conformal_factor() {
        let l = lat();
        let st = GridSpacetime::from_components(l, vec![Sym2::new(-4.0, 0.0, 4.0); l.len()]).unwrap();
        let u = Density::constant(l, 8.0);
        let s = hodge_star(&st, &u).unwrap();
        assert!(s.values.iter().all(|&v| v == 2.0));
        let phi = FieldConfig::from_fn(l, |t, x| (t + 2.0 * x).sin());
        let back = hodge_star(&st, &to_density(&st, &phi).unwrap()).unwrap();
        for (a, b) in back.values.iter().zip(&phi.values) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn constant_field_seminorms() {
        let l = lat();
        let phi = FieldConfig::constant(l, -3.0);
        let all = NodeSet::full(l);
        assert_eq!(sup_seminorm(&phi, 0, &all).unwrap(), 3.0);
        assert!((sup_seminorm(&phi, 1, &all).unwrap() - 3.0).abs() < 1e-12);
        assert!((sup_seminorm(&phi, 2, &all).unwrap() - 3.0).abs() < 1e-12);
        assert!(sup_seminorm(&phi, 3, &all).is_err());
        assert!(sup_seminorm(&phi, 0, &NodeSet::empty(l)).is_err());
        let f = TestFunction::constant(l, 1.0);
        assert!((sobolev_sq(&FieldConfig::constant(l, 1.0), 0, &f).unwrap() - 6.0).abs() < 1e-12);
        assert_eq!(sobolev_sq(&FieldConfig::zeros(l), 2, &f).unwrap(), 0.0);
    }

    #[test]
    fn sine_seminorm_against_direct_formula() {
        let l = Lattice::new(5, 16, 0.1, 0.25).unwrap();
        let period = l.period();
        let phi = FieldConfig::from_fn(l, |_, x| (2.0 * PI * x / period).sin());
        let a = 2.0 * PI * l.dx / period;
        let want = (0..l.nx)
            .map(|ix| {
                let s = (a * ix as f64).sin();
                let d = a.sin() / l.dx * (a * ix as f64).cos();
                (s * s + d * d).sqrt()
            })
            .fold(0.0, f64::max);
        let got = sup_seminorm(&phi, 1, &NodeSet::full(l)).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn end_slice_taps_are_one_sided() {
        let l = lat();
        let phi = FieldConfig::from_fn(l, |t, _| t * t);
        let dtt = DiffOp::Dtt.apply(&phi);
        for it in 0..l.nt {
            assert!((dtt.get(it, 2) - 2.0).abs() < 1e-10);
        }
        let dt = DiffOp::Dt.apply(&FieldConfig::from_fn(l, |t, _| 3.0 * t));
        assert!(dt.values.iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn transpose_is_adjoint() {
        let l = lat();
        let phi = FieldConfig::from_fn(l, |t, x| (3.0 * t).cos() + x * x);
        let w = FieldConfig::from_fn(l, |t, x| (t - x).sin());
        for op in [DiffOp::Id, DiffOp::Dt, DiffOp::Dx, DiffOp::Dtt, DiffOp::Dtx, DiffOp::Dxx] {
            let lhs = pair_raw(&op.apply(&phi).values, &w.values);
            let mut out = vec![0.0; l.len()];
            op.apply_transpose(&w.values, &l, &mut out);
            let rhs = pair_raw(&out, &phi.values);
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{op:?}");
        }
    }

    #[test]
    fn smooth_box_ramps() {
        let l = Lattice::new(12, 20, 1.0, 1.0).unwrap();
        let f = TestFunction::smooth_box(l, 4, 6, 10, 2, 2);
        assert_eq!(f.at(l.idx(5, 10)), 1.0);
        assert_eq!(f.at(l.idx(5, 12)), 1.0);
        assert!(f.at(l.idx(5, 13)) > 0.0 && f.at(l.idx(5, 13)) < 1.0);
        assert_eq!(f.at(l.idx(5, 15)), 0.0);
        assert_eq!(f.at(l.idx(1, 10)), 0.0);
        let st = GridSpacetime::minkowski(l);
        assert!((f.normalized(&st).unwrap().integral(&st) - 1.0).abs() < 1e-14);
    }
}
