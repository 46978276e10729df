//! Pointwise Lagrangian densities of jet order one and the corner-averaged local term.

use crate::error::{LabError, Result};
use crate::fields::{FieldConfig, TestFunction};
use crate::geometry::{GridSpacetime, Lattice, NodeSet, Sym2};
use std::fmt::Debug;
use std::sync::Arc;

/// Geometry available to a density at one node.
#[derive(Debug, Clone, Copy)]
pub struct NodeGeom {
    pub ginv: Sym2,
    pub sqrt_g: f64,
    pub t: f64,
    pub x: f64,
}

impl NodeGeom {
    pub fn at(st: &GridSpacetime, node: usize) -> Self {
        let lat = st.lattice;
        let (it, ix) = lat.coords(node);
        Self { ginv: st.inv(node), sqrt_g: st.sqrt_det(node), t: lat.t(it), x: lat.x(ix) }
    }

    pub fn from_metric(g: Sym2, t: f64, x: f64) -> Self {
        Self { ginv: g.inverse(), sqrt_g: g.sqrt_abs_det(), t, x }
    }
}

/// Value and derivatives of `ℓ(u)` in `u = (φ, ∂_tφ, ∂_xφ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet3 {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
    pub t: [[[f64; 3]; 3]; 3],
}

impl Jet3 {
    /// `Σ h_ij a_i b_j`.
    pub fn h_ab(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.h[i][j] * a[i] * b[j];
            }
        }
        s
    }

    /// Vector `Σ_jk t_ijk a_j b_k`.
    pub fn t_ab(&self, a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..3 {
                for k in 0..3 {
                    *o += self.t[i][j][k] * a[j] * b[k];
                }
            }
        }
        out
    }

    /// Matrix `Σ_k t_ijk a_k`.
    pub fn t_a(&self, a: &[f64; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let s = (0..3).map(|k| self.t[i][j][k] * a[k]).sum();
                out[i][j] = s;
                out[j][i] = s;
            }
        }
        out
    }

    /// Derivative of order `dirs.len()` contracted with the given directions.
    pub fn contract(&self, dirs: &[&[f64; 3]]) -> f64 {
        match dirs {
            [] => self.v,
            [a] => (0..3).map(|i| self.g[i] * a[i]).sum(),
            [a, b] => self.h_ab(a, b),
            [a, b, c] => {
                let v = self.t_ab(b, c);
                (0..3).map(|i| v[i] * a[i]).sum()
            }
            _ => 0.0,
        }
    }
}

/// A density `ℓ(x, φ, ∂φ)` returned as the coefficient of `dt∧dx`.
pub trait PointDensity: Debug + Send + Sync {
    fn name(&self) -> String;
    /// Jet to the requested order (0..=3); higher entries may be left zero.
    fn jet(&self, geom: &NodeGeom, u: [f64; 3], order: usize) -> Jet3;
}

/// Partials of `Φ(φ, X)` needed for the chain rule through `X = g⁻¹(p, p)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhiX {
    pub v: f64,
    pub p: f64,
    pub x: f64,
    pub pp: f64,
    pub px: f64,
    pub xx: f64,
    pub ppp: f64,
    pub ppx: f64,
    pub pxx: f64,
    pub xxx: f64,
}

/// Chain rule for `ℓ(φ, p) = Φ(φ, g⁻¹(p,p))`; symmetric entries are mirrored, not recomputed.
pub fn chain_phi_x(ginv: &Sym2, p: [f64; 2], f: &PhiX, order: usize) -> Jet3 {
    let gp = [ginv.tt * p[0] + ginv.tx * p[1], ginv.tx * p[0] + ginv.xx * p[1]];
    let q = [0.0, 2.0 * gp[0], 2.0 * gp[1]];
    let big_q = [
        [0.0, 0.0, 0.0],
        [0.0, 2.0 * ginv.tt, 2.0 * ginv.tx],
        [0.0, 2.0 * ginv.tx, 2.0 * ginv.xx],
    ];
    let d = |i: usize| if i == 0 { 1.0 } else { 0.0 };
    let mut j = Jet3 { v: f.v, ..Jet3::default() };
    if order >= 1 {
        for i in 0..3 {
            j.g[i] = f.p * d(i) + f.x * q[i];
        }
    }
    if order >= 2 {
        for a in 0..3 {
            for b in a..3 {
                let s = f.pp * d(a) * d(b)
                    + f.px * (d(a) * q[b] + d(b) * q[a])
                    + f.xx * q[a] * q[b]
                    + f.x * big_q[a][b];
                j.h[a][b] = s;
                j.h[b][a] = s;
            }
        }
    }
    if order >= 3 {
        for a in 0..3 {
            for b in a..3 {
                for c in b..3 {
                    let s = f.ppp * d(a) * d(b) * d(c)
                        + f.ppx * (d(a) * d(b) * q[c] + d(a) * d(c) * q[b] + d(b) * d(c) * q[a])
                        + f.pxx * (d(a) * q[b] * q[c] + d(b) * q[a] * q[c] + d(c) * q[a] * q[b])
                        + f.px * (d(a) * big_q[b][c] + d(b) * big_q[a][c] + d(c) * big_q[a][b])
                        + f.xxx * q[a] * q[b] * q[c]
                        + f.xx * (q[a] * big_q[b][c] + q[b] * big_q[a][c] + q[c] * big_q[a][b]);
                    for (i, jj, k) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                        j.t[i][jj][k] = s;
                    }
                }
            }
        }
    }
    j
}

/// `ℓ = −½√|g|·[X + (ε/2)(1+φ²)X² + m²φ²]`, `X = g⁻¹(dφ, dφ)`. Free field at ε = m = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleDensity {
    pub eps: f64,
    pub mass2: f64,
}

impl ExampleDensity {
    pub fn free() -> Self {
        Self { eps: 0.0, mass2: 0.0 }
    }

    pub fn phi_x(&self, sqrt_g: f64, phi: f64, x: f64) -> PhiX {
        let (e, m2) = (self.eps, self.mass2);
        let h = -0.5 * sqrt_g;
        let w = 1.0 + phi * phi;
        PhiX {
            v: h * (x + 0.5 * e * w * x * x + m2 * phi * phi),
            p: h * (e * phi * x * x + 2.0 * m2 * phi),
            x: h * (1.0 + e * w * x),
            pp: h * (e * x * x + 2.0 * m2),
            px: h * (2.0 * e * phi * x),
            xx: h * e * w,
            ppp: 0.0,
            ppx: h * 2.0 * e * x,
            pxx: h * 2.0 * e * phi,
            xxx: 0.0,
        }
    }
}

impl PointDensity for ExampleDensity {
    fn name(&self) -> String {
        if self.eps == 0.0 && self.mass2 == 0.0 {
            "free-field".into()
        } else {
            format!("example-eps(eps={}, mass2={})", self.eps, self.mass2)
        }
    }

    fn jet(&self, geom: &NodeGeom, u: [f64; 3], order: usize) -> Jet3 {
        let x = geom.ginv.quad(u[1], u[2]);
        chain_phi_x(&geom.ginv, [u[1], u[2]], &self.phi_x(geom.sqrt_g, u[0], x), order)
    }
}

/// `ℓ = −√|g|·(½m²φ² + ¼λφ⁴)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialDensity {
    pub mass2: f64,
    pub quartic: f64,
}

impl PointDensity for PotentialDensity {
    fn name(&self) -> String {
        format!("potential(mass2={}, quartic={})", self.mass2, self.quartic)
    }

    fn jet(&self, geom: &NodeGeom, u: [f64; 3], _order: usize) -> Jet3 {
        let s = -geom.sqrt_g;
        let (m, l, p) = (self.mass2, self.quartic, u[0]);
        let f = PhiX {
            v: s * (0.5 * m * p * p + 0.25 * l * p.powi(4)),
            p: s * (m * p + l * p.powi(3)),
            pp: s * (m + 3.0 * l * p * p),
            ppp: s * 6.0 * l * p,
            ..PhiX::default()
        };
        chain_phi_x(&geom.ginv, [u[1], u[2]], &f, 3)
    }
}

/// Flat jet norm `½(φ² + φ_t² + φ_x²)`; the pointwise integrand of a first-order Sobolev square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevDensity;

impl PointDensity for SobolevDensity {
    fn name(&self) -> String {
        "sobolev".into()
    }

    fn jet(&self, _geom: &NodeGeom, u: [f64; 3], _order: usize) -> Jet3 {
        let mut j = Jet3 { v: 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]), g: u, ..Jet3::default() };
        for i in 0..3 {
            j.h[i][i] = 1.0;
        }
        j
    }
}

/// `ℓ = c·2φ·∂_tφ = c·∂_t(φ²)`, a total divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalDivergenceDensity {
    pub c: f64,
}

impl PointDensity for TotalDivergenceDensity {
    fn name(&self) -> String {
        format!("total-divergence(c={})", self.c)
    }

    fn jet(&self, _geom: &NodeGeom, u: [f64; 3], _order: usize) -> Jet3 {
        let c = 2.0 * self.c;
        let mut j = Jet3 { v: c * u[0] * u[1], ..Jet3::default() };
        j.g = [c * u[1], c * u[0], 0.0];
        j.h[0][1] = c;
        j.h[1][0] = c;
        j
    }
}

/// `ℓ = a·φ + b·φ²·∂_xφ + c·φ·(∂_tφ)²`: polynomial density with nonzero third jet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicDensity {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PointDensity for CubicDensity {
    fn name(&self) -> String {
        format!("cubic(a={}, b={}, c={})", self.a, self.b, self.c)
    }

    fn jet(&self, geom: &NodeGeom, u: [f64; 3], _order: usize) -> Jet3 {
        let s = geom.sqrt_g;
        let (a, b, c) = (self.a * s, self.b * s, self.c * s);
        let (p, pt, px) = (u[0], u[1], u[2]);
        let mut j = Jet3 { v: a * p + b * p * p * px + c * p * pt * pt, ..Jet3::default() };
        j.g = [a + 2.0 * b * p * px + c * pt * pt, 2.0 * c * p * pt, b * p * p];
        let h00 = 2.0 * b * px;
        let h01 = 2.0 * c * pt;
        let h02 = 2.0 * b * p;
        let h11 = 2.0 * c * p;
        j.h = [[h00, h01, h02], [h01, h11, 0.0], [h02, 0.0, 0.0]];
        let mut set = |i: usize, k: usize, l: usize, v: f64| {
            for (x, y, z) in [(i, k, l), (i, l, k), (k, i, l), (k, l, i), (l, i, k), (l, k, i)] {
                j.t[x][y][z] = v;
            }
        };
        set(0, 0, 2, 2.0 * b);
        set(0, 1, 1, 2.0 * c);
        j
    }
}

/// One corner of the averaged first-order stencil at a node.
#[derive(Debug, Clone, Copy)]
pub struct Corner {
    /// Base node, its time neighbour, its space neighbour.
    pub nodes: [usize; 3],
    /// `1/(σ·dt)` and `1/(τ·dx)`.
    pub jt: f64,
    pub jx: f64,
    /// Averaging weight `1/(2·#valid σ)`.
    pub avg: f64,
}

impl Corner {
    #[inline]
    pub fn project(&self, v: &[f64]) -> [f64; 3] {
        let v0 = v[self.nodes[0]];
        [v0, self.jt * (v[self.nodes[1]] - v0), self.jx * (v[self.nodes[2]] - v0)]
    }

    /// `Jᵀy` scattered with weight `w`.
    #[inline]
    pub fn scatter(&self, y: &[f64; 3], w: f64, out: &mut [f64]) {
        let a = self.jt * y[1];
        let b = self.jx * y[2];
        out[self.nodes[0]] += w * (y[0] - a - b);
        out[self.nodes[1]] += w * a;
        out[self.nodes[2]] += w * b;
    }

    /// `J` as a 3×3 matrix, rows indexed by jet component.
    pub fn jmat(&self) -> [[f64; 3]; 3] {
        [[1.0, 0.0, 0.0], [-self.jt, self.jt, 0.0], [-self.jx, 0.0, self.jx]]
    }
}

/// The valid corners at `(it, ix)`.
pub fn corners_at(lat: &Lattice, it: usize, ix: usize) -> impl Iterator<Item = Corner> {
    let n = lat.idx(it, ix);
    let sig: Vec<isize> = [-1isize, 1]
        .into_iter()
        .filter(|s| {
            let t = it as isize + s;
            t >= 0 && t < lat.nt as isize
        })
        .collect();
    let avg = 1.0 / (2.0 * sig.len() as f64);
    let (dt, dx) = (lat.dt, lat.dx);
    let lat = *lat;
    sig.into_iter().flat_map(move |s| {
        [-1isize, 1].into_iter().map(move |tau| Corner {
            nodes: [n, lat.idx((it as isize + s) as usize, ix), lat.idx(it, lat.wrap(ix as isize + tau))],
            jt: 1.0 / (s as f64 * dt),
            jx: 1.0 / (tau as f64 * dx),
            avg,
        })
    })
}

/// `F(φ) = Σ_n f(n)·avg_corners ℓ(g(n), u)·dt·dx`, optionally evaluated at `φ − φ₀`.
#[derive(Debug, Clone)]
pub struct LocalTerm {
    pub st: Arc<GridSpacetime>,
    pub f: TestFunction,
    pub density: Arc<dyn PointDensity>,
    pub shift: Option<FieldConfig>,
}

impl LocalTerm {
    pub fn new(st: Arc<GridSpacetime>, f: TestFunction, density: Arc<dyn PointDensity>) -> Result<Self> {
        if !f.lattice().same_shape(&st.lattice) {
            return Err(LabError::GridMismatch("test function vs spacetime".into()));
        }
        Ok(Self { st, f, density, shift: None })
    }

    pub fn with_shift(mut self, phi0: FieldConfig) -> Self {
        self.shift = Some(phi0);
        self
    }

    fn shifted<'a>(&self, phi: &'a [f64]) -> std::borrow::Cow<'a, [f64]> {
        match &self.shift {
            None => std::borrow::Cow::Borrowed(phi),
            Some(s) => std::borrow::Cow::Owned(phi.iter().zip(&s.values).map(|(a, b)| a - b).collect()),
        }
    }

    /// Visit every weighted corner with `f(n) ≠ 0`.
    pub fn for_each_corner(&self, mut visit: impl FnMut(&NodeGeom, f64, &Corner)) {
        let lat = self.st.lattice;
        for n in 0..lat.len() {
            let fv = self.f.at(n);
            if fv == 0.0 {
                continue;
            }
            let geom = NodeGeom::at(&self.st, n);
            let (it, ix) = lat.coords(n);
            for c in corners_at(&lat, it, ix) {
                visit(&geom, fv * c.avg, &c);
            }
        }
    }

    pub fn value(&self, phi: &[f64]) -> f64 {
        let phi = self.shifted(phi);
        let mut s = 0.0;
        self.for_each_corner(|g, w, c| s += w * self.density.jet(g, c.project(&phi), 0).v);
        s * self.st.lattice.cell_area()
    }

    pub fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        let phi = self.shifted(phi);
        let mut out = vec![0.0; phi.len()];
        self.for_each_corner(|g, w, c| {
            let j = self.density.jet(g, c.project(&phi), 1);
            c.scatter(&j.g, w, &mut out);
        });
        out
    }

    pub fn hess_vec(&self, phi: &[f64], v: &[f64]) -> Vec<f64> {
        let phi = self.shifted(phi);
        let mut out = vec![0.0; phi.len()];
        self.for_each_corner(|g, w, c| {
            let j = self.density.jet(g, c.project(&phi), 2);
            let a = c.project(v);
            let y = [
                (0..3).map(|k| j.h[0][k] * a[k]).sum::<f64>(),
                (0..3).map(|k| j.h[1][k] * a[k]).sum::<f64>(),
                (0..3).map(|k| j.h[2][k] * a[k]).sum::<f64>(),
            ];
            c.scatter(&y, w, &mut out);
        });
        out
    }

    /// `D^{|B|}F[φ](v_B)` for every subset mask `B` of `dirs`.
    pub fn table(&self, phi: &[f64], dirs: &[&[f64]]) -> Vec<f64> {
        let phi = self.shifted(phi);
        let k = dirs.len();
        let mut out = vec![0.0; 1 << k];
        self.for_each_corner(|g, w, c| {
            let j = self.density.jet(g, c.project(&phi), k);
            let proj: Vec<[f64; 3]> = dirs.iter().map(|d| c.project(d)).collect();
            for (mask, o) in out.iter_mut().enumerate() {
                let sel: Vec<&[f64; 3]> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| &proj[b]).collect();
                *o += w * j.contract(&sel);
            }
        });
        let a = self.st.lattice.cell_area();
        out.iter().map(|x| x * a).collect()
    }

    /// Nodes the gradient can touch.
    pub fn structural_support(&self) -> NodeSet {
        self.f.support().dilate(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jet(d: &dyn PointDensity, geom: &NodeGeom, u: [f64; 3]) {
        let j = d.jet(geom, u, 3);
        let h = 1e-5;
        for i in 0..3 {
            let mut up = u;
            let mut um = u;
            up[i] += h;
            um[i] -= h;
            let (jp, jm) = (d.jet(geom, up, 3), d.jet(geom, um, 3));
            assert!(((jp.v - jm.v) / (2.0 * h) - j.g[i]).abs() < 1e-7 * (1.0 + j.g[i].abs()));
            for a in 0..3 {
                let fd = (jp.g[a] - jm.g[a]) / (2.0 * h);
                assert!((fd - j.h[i][a]).abs() < 1e-6 * (1.0 + fd.abs()), "{} h", d.name());
                for b in 0..3 {
                    let fd = (jp.h[a][b] - jm.h[a][b]) / (2.0 * h);
                    assert!((fd - j.t[i][a][b]).abs() < 1e-5 * (1.0 + fd.abs()), "{} t", d.name());
                }
            }
        }
    }

    #[test]
    fn density_jets_match_finite_differences() {
        let geom = NodeGeom::from_metric(Sym2::new(-1.3, 0.2, 0.9), 0.1, 0.2);
        let u = [0.4, -0.7, 0.3];
        fd_jet(&ExampleDensity { eps: 0.1, mass2: 0.5 }, &geom, u);
        fd_jet(&ExampleDensity::free(), &geom, u);
        fd_jet(&PotentialDensity { mass2: 1.0, quartic: 0.3 }, &geom, u);
        fd_jet(&CubicDensity { a: 0.3, b: 0.7, c: -0.4 }, &geom, u);
        fd_jet(&TotalDivergenceDensity { c: 1.0 }, &geom, u);
        fd_jet(&SobolevDensity, &geom, u);
    }

    #[test]
    fn third_jet_is_bitwise_symmetric() {
        let geom = NodeGeom::from_metric(Sym2::new(-1.1, 0.3, 0.8), 0.0, 0.0);
        let j = ExampleDensity { eps: 0.3, mass2: 0.0 }.jet(&geom, [0.2, 0.5, -0.9], 3);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(j.h[a][b], j.h[b][a]);
                for c in 0..3 {
                    assert_eq!(j.t[a][b][c], j.t[b][a][c]);
                    assert_eq!(j.t[a][b][c], j.t[a][c][b]);
                }
            }
        }
    }

    #[test]
    fn end_slices_have_two_corners() {
        let lat = Lattice::new(4, 5, 0.5, 1.0).unwrap();
        assert_eq!(corners_at(&lat, 0, 2).count(), 2);
        assert_eq!(corners_at(&lat, 1, 2).count(), 4);
        let w: f64 = corners_at(&lat, 3, 0).map(|c| c.avg).sum();
        assert_eq!(w, 1.0);
    }
}
