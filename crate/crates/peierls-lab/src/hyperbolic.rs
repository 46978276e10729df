//! Linear second-order hyperbolic operators on the lattice: stencils, Cauchy marching,
//! retarded/advanced/causal propagators and Σ-propagators.

use crate::error::{LabError, Result};
use crate::fields::{Density, FieldConfig};
use crate::geometry::{metric_order_leq, GridSpacetime, Lattice, Sym2};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::sync::Arc;

/// Nearest-neighbour operator: `(Sφ)(n) = Σ c[n][a][b]·φ(n + (a−1, b−1))`, periodic in x.
/// Output is a density coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub lattice: Lattice,
    pub coef: Vec<[[f64; 3]; 3]>,
}

impl Stencil {
    pub fn zeros(lattice: Lattice) -> Self {
        Self { lattice, coef: vec![[[0.0; 3]; 3]; lattice.len()] }
    }

    /// Multiplication by a nodal weight.
    pub fn diagonal(lattice: Lattice, d: &[f64]) -> Self {
        let mut s = Self::zeros(lattice);
        for (c, v) in s.coef.iter_mut().zip(d) {
            c[1][1] = *v;
        }
        s
    }

    /// Stencil slot of node `b` as seen from row `a`.
    pub fn offset(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        let lat = &self.lattice;
        let (ta, xa) = lat.coords(a);
        let (tb, xb) = lat.coords(b);
        let dt = tb as isize - ta as isize;
        let dx = (xb + lat.nx - xa) % lat.nx;
        let dx = match dx {
            0 => 0,
            1 => 1,
            d if d == lat.nx - 1 => -1,
            _ => return None,
        };
        if dt.abs() > 1 {
            return None;
        }
        Some(((dt + 1) as usize, (dx + 1) as usize))
    }

    pub fn add_entry(&mut self, a: usize, b: usize, v: f64) {
        let (i, j) = self.offset(a, b).expect("stencil entry beyond nearest neighbours");
        self.coef[a][i][j] += v;
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.offset(a, b).map_or(0.0, |(i, j)| self.coef[a][i][j])
    }

    #[inline]
    fn neighbour(&self, it: usize, ix: usize, i: usize, j: usize) -> Option<usize> {
        let t = it as isize + i as isize - 1;
        if t < 0 || t >= self.lattice.nt as isize {
            return None;
        }
        Some(self.lattice.idx(t as usize, self.lattice.wrap(ix as isize + j as isize - 1)))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let lat = self.lattice;
        let mut out = vec![0.0; lat.len()];
        for it in 0..lat.nt {
            for ix in 0..lat.nx {
                let n = lat.idx(it, ix);
                let c = &self.coef[n];
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        if c[i][j] != 0.0 {
                            if let Some(m) = self.neighbour(it, ix, i, j) {
                                s += c[i][j] * v[m];
                            }
                        }
                    }
                }
                out[n] = s;
            }
        }
        out
    }

    pub fn apply_field(&self, v: &FieldConfig) -> Density {
        Density { lattice: self.lattice, coeffs: self.apply(&v.values) }
    }

    pub fn axpy(&self, s: f64, o: &Stencil) -> Stencil {
        let mut out = self.clone();
        for (a, b) in out.coef.iter_mut().zip(&o.coef) {
            for i in 0..3 {
                for j in 0..3 {
                    a[i][j] += s * b[i][j];
                }
            }
        }
        out
    }

    /// Largest `|S(a,b) − S(b,a)|` relative to the largest entry.
    pub fn max_asymmetry(&self) -> f64 {
        let lat = self.lattice;
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for it in 0..lat.nt {
            for ix in 0..lat.nx {
                let a = lat.idx(it, ix);
                for i in 0..3 {
                    for j in 0..3 {
                        scale = scale.max(self.coef[a][i][j].abs());
                        if let Some(b) = self.neighbour(it, ix, i, j) {
                            worst = worst.max((self.coef[a][i][j] - self.entry(b, a)).abs());
                        }
                    }
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// True when every row couples to a single node on each neighbouring slice.
    pub fn is_explicit(&self) -> bool {
        self.coef.iter().all(|c| c[0][0] == 0.0 && c[0][2] == 0.0 && c[2][0] == 0.0 && c[2][2] == 0.0)
    }

    /// Coupling matrix of row slice `it` onto slice `it + (i − 1)`.
    fn slice_block(&self, it: usize, i: usize) -> DMatrix<f64> {
        let nx = self.lattice.nx;
        let mut m = DMatrix::zeros(nx, nx);
        for ix in 0..nx {
            let c = &self.coef[self.lattice.idx(it, ix)];
            for j in 0..3 {
                let col = self.lattice.wrap(ix as isize + j as isize - 1);
                m[(ix, col)] += c[i][j];
            }
        }
        m
    }
}

enum SliceSolver {
    Diagonal(Vec<f64>),
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SliceSolver {
    fn new(m: DMatrix<f64>, explicit: bool, it: usize) -> Result<Self> {
        let singular = || LabError::InvalidInput(format!("singular time-step block at slice {it}"));
        if explicit {
            let d: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)]).collect();
            if d.iter().any(|v| *v == 0.0 || !v.is_finite()) {
                return Err(singular());
            }
            Ok(SliceSolver::Diagonal(d))
        } else {
            let lu = m.lu();
            if !lu.is_invertible() {
                return Err(singular());
            }
            Ok(SliceSolver::Dense(lu))
        }
    }

    fn solve(&self, r: Vec<f64>) -> Vec<f64> {
        match self {
            SliceSolver::Diagonal(d) => r.iter().zip(d).map(|(a, b)| a / b).collect(),
            SliceSolver::Dense(lu) => {
                lu.solve(&DVector::from_vec(r)).expect("factorization checked invertible").data.into()
            }
        }
    }
}

/// Second-order linear operator `P` with principal symbol `ĝ⁻¹`; the stencil represents
/// `*_g⁻¹ P`, i.e. it maps functions to density coefficients.
#[derive(Debug, Clone)]
pub struct LinearHypOp {
    pub st: Arc<GridSpacetime>,
    pub stencil: Stencil,
    /// ĝ⁻¹ per node.
    pub principal: Vec<Sym2>,
    pub variational: bool,
}

/// Node-wise hyperbolicity summary of a [`LinearHypOp`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct HyperbolicityCheck {
    pub normally_hyperbolic: bool,
    pub first_bad_node: Option<(usize, usize)>,
    pub cfl_ratio: f64,
    pub cfl_node: (usize, usize),
    /// ĝ ≲ g, with ĝ the metric on vectors.
    pub within_background_cone: bool,
}

impl LinearHypOp {
    pub fn new(st: Arc<GridSpacetime>, stencil: Stencil, principal: Vec<Sym2>, variational: bool) -> Result<Self> {
        if !stencil.lattice.same_shape(&st.lattice) || principal.len() != st.lattice.len() {
            return Err(LabError::GridMismatch("operator vs spacetime".into()));
        }
        Ok(Self { st, stencil, principal, variational })
    }

    pub fn lattice(&self) -> Lattice {
        self.st.lattice
    }

    /// ĝ on vectors.
    pub fn symbol_metric(&self) -> Vec<Sym2> {
        self.principal.iter().map(Sym2::inverse).collect()
    }

    pub fn apply(&self, phi: &FieldConfig) -> Density {
        self.stencil.apply_field(phi)
    }

    /// Per-node check that ĝ is Lorentzian with spacelike constant-t slices, plus the
    /// Courant number `max |dx/dt|_ĝ · dt/dx`.
    pub fn check(&self) -> HyperbolicityCheck {
        let lat = self.lattice();
        let mut bad = None;
        let mut cfl = 0.0f64;
        let mut cfl_node = (0, 0);
        for (n, gi) in self.principal.iter().enumerate() {
            let ok = gi.det() < 0.0 && gi.tt < 0.0;
            let slopes = if ok { gi.inverse().null_slopes() } else { None };
            match slopes {
                Some((a, b)) => {
                    let r = a.abs().max(b.abs()) * lat.dt / lat.dx;
                    if r > cfl {
                        cfl = r;
                        cfl_node = lat.coords(n);
                    }
                }
                None => {
                    if bad.is_none() {
                        bad = Some(lat.coords(n));
                    }
                }
            }
        }
        let within = bad.is_none() && metric_order_leq(&self.st, &self.symbol_metric(), self.st.metrics()).unwrap_or(false);
        HyperbolicityCheck {
            normally_hyperbolic: bad.is_none(),
            first_bad_node: bad,
            cfl_ratio: if bad.is_none() { cfl } else { f64::INFINITY },
            cfl_node,
            within_background_cone: within,
        }
    }

    /// Factorize the time-step blocks; rejects non-hyperbolic or CFL-violating operators.
    pub fn propagator(&self) -> Result<Propagator> {
        let c = self.check();
        if let Some((it, ix)) = c.first_bad_node {
            return Err(LabError::NotHyperbolic { it, ix });
        }
        if c.cfl_ratio > 1.0 {
            return Err(LabError::Cfl { it: c.cfl_node.0, ix: c.cfl_node.1, ratio: c.cfl_ratio });
        }
        Propagator::new(self.st.clone(), self.stencil.clone())
    }
}

/// Cauchy data on slice `slice`: restriction and future normal derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub slice: usize,
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
}

impl CauchyData {
    pub fn zero(lat: &Lattice, slice: usize) -> Self {
        Self { slice, phi0: vec![0.0; lat.nx], phi1: vec![0.0; lat.nx] }
    }
}

/// Marching solver for a stencil `H`: `H φ = v` row by row.
///
/// The retarded solve fixes slice 0 to zero and uses rows `0..nt−1` to fill slices
/// `1..nt`; the advanced solve fixes the last slice and uses rows `1..nt` backwards. The
/// advanced solve is exactly the transpose of the retarded one when `H` is symmetric.
pub struct Propagator {
    pub st: Arc<GridSpacetime>,
    pub stencil: Stencil,
    fwd: Vec<SliceSolver>,
    bwd: Vec<SliceSolver>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator").field("lattice", &self.stencil.lattice).finish()
    }
}

impl Propagator {
    /// Build without hyperbolicity checks (used for independently discretized operators).
    pub fn new(st: Arc<GridSpacetime>, stencil: Stencil) -> Result<Self> {
        let lat = stencil.lattice;
        let explicit = stencil.is_explicit();
        let mut fwd = Vec::with_capacity(lat.nt - 1);
        for it in 0..lat.nt - 1 {
            fwd.push(SliceSolver::new(stencil.slice_block(it, 2), explicit, it)?);
        }
        let mut bwd = Vec::with_capacity(lat.nt - 1);
        for it in 1..lat.nt {
            bwd.push(SliceSolver::new(stencil.slice_block(it, 0), explicit, it)?);
        }
        Ok(Self { st, stencil, fwd, bwd })
    }

    pub fn lattice(&self) -> Lattice {
        self.stencil.lattice
    }

    /// Residual of row `it` excluding the slice being solved for.
    fn row_rhs(&self, phi: &[f64], rhs: &[f64], it: usize, skip: usize) -> Vec<f64> {
        let lat = self.lattice();
        (0..lat.nx)
            .map(|ix| {
                let n = lat.idx(it, ix);
                let c = &self.stencil.coef[n];
                let mut s = rhs[n];
                for i in 0..3 {
                    if i == skip {
                        continue;
                    }
                    for j in 0..3 {
                        if c[i][j] != 0.0 {
                            if let Some(m) = self.stencil.neighbour(it, ix, i, j) {
                                s -= c[i][j] * phi[m];
                            }
                        }
                    }
                }
                s
            })
            .collect()
    }

    fn set_slice(&self, phi: &mut [f64], it: usize, vals: &[f64]) {
        let nx = self.lattice().nx;
        phi[it * nx..(it + 1) * nx].copy_from_slice(vals);
    }

    /// Fill slices `from+1..nt` from rows `from..nt−1`.
    fn march_forward(&self, phi: &mut [f64], rhs: &[f64], from: usize) {
        for it in from..self.lattice().nt - 1 {
            let r = self.row_rhs(phi, rhs, it, 2);
            let next = self.fwd[it].solve(r);
            self.set_slice(phi, it + 1, &next);
        }
    }

    /// Fill slices `from−1..0` from rows `from..1`.
    fn march_backward(&self, phi: &mut [f64], rhs: &[f64], from: usize) {
        for it in (1..=from).rev() {
            let r = self.row_rhs(phi, rhs, it, 0);
            let prev = self.bwd[it - 1].solve(r);
            self.set_slice(phi, it - 1, &prev);
        }
    }

    fn check_source(&self, v: &Density) -> Result<()> {
        if !v.lattice.same_shape(&self.lattice()) {
            return Err(LabError::GridMismatch("source vs operator".into()));
        }
        Ok(())
    }

    /// Retarded solution: zero on slice 0, rows `0..nt−1` satisfied.
    pub fn delta_ret(&self, v: &Density) -> Result<FieldConfig> {
        self.check_source(v)?;
        let lat = self.lattice();
        let mut phi = vec![0.0; lat.len()];
        self.march_forward(&mut phi, &v.coeffs, 0);
        Ok(FieldConfig { lattice: lat, values: phi })
    }

    /// Advanced solution: zero on the last slice, rows `1..nt` satisfied.
    pub fn delta_adv(&self, v: &Density) -> Result<FieldConfig> {
        self.check_source(v)?;
        let lat = self.lattice();
        let mut phi = vec![0.0; lat.len()];
        self.march_backward(&mut phi, &v.coeffs, lat.nt - 1);
        Ok(FieldConfig { lattice: lat, values: phi })
    }

    /// Causal propagator `Δ = Δ_ret − Δ_adv`.
    pub fn causal(&self, v: &Density) -> Result<FieldConfig> {
        Ok(self.delta_ret(v)?.sub(&self.delta_adv(v)?))
    }

    fn normal_at(&self, it: usize, ix: usize) -> (f64, f64) {
        self.st.future_normal(self.lattice().idx(it, ix))
    }

    /// Solve `Hφ = v` on rows `1..nt−1` with the given data on slice `s ∈ [1, nt−2]`.
    pub fn solve_cauchy(&self, data: &CauchyData, source: &Density) -> Result<FieldConfig> {
        self.check_source(source)?;
        let lat = self.lattice();
        let s = data.slice;
        if s < 1 || s + 2 > lat.nt {
            return Err(LabError::InvalidInput(format!("Cauchy slice {s} needs a slice on each side")));
        }
        if data.phi0.len() != lat.nx || data.phi1.len() != lat.nx {
            return Err(LabError::GridMismatch("Cauchy data length".into()));
        }
        let nx = lat.nx;
        let mut phi = vec![0.0; lat.len()];
        self.set_slice(&mut phi, s, &data.phi0);
        // φ(s+1) − φ(s−1) from the normal-derivative datum.
        let d: Vec<f64> = (0..nx)
            .map(|ix| {
                let (nt_, nx_) = self.normal_at(s, ix);
                let p0 = &data.phi0;
                let dx0 = (p0[lat.wrap(ix as isize + 1)] - p0[lat.wrap(ix as isize - 1)]) / (2.0 * lat.dx);
                2.0 * lat.dt * (data.phi1[ix] - nx_ * dx0) / nt_
            })
            .collect();
        // Slices s±1 are still zero, so this is `v − A₀φ₀` on row s.
        let mut r = self.row_rhs(&phi, &source.coeffs, s, 3);
        let a_plus = self.stencil.slice_block(s, 2);
        let a_minus = self.stencil.slice_block(s, 0);
        let am_d = &a_minus * DVector::from_vec(d.clone());
        for ix in 0..nx {
            r[ix] += am_d[ix];
        }
        let lu = (a_plus + a_minus).lu();
        let next = lu
            .solve(&DVector::from_vec(r))
            .ok_or_else(|| LabError::InvalidInput("singular Cauchy block".into()))?;
        let next: Vec<f64> = next.data.into();
        let prev: Vec<f64> = next.iter().zip(&d).map(|(a, b)| a - b).collect();
        self.set_slice(&mut phi, s + 1, &next);
        self.set_slice(&mut phi, s - 1, &prev);
        self.march_forward(&mut phi, &source.coeffs, s + 1);
        self.march_backward(&mut phi, &source.coeffs, s - 1);
        Ok(FieldConfig { lattice: lat, values: phi })
    }

    /// `(ρ₀, ρ₁)` of a field on slice `s`.
    pub fn restrict(&self, phi: &FieldConfig, s: usize) -> Result<CauchyData> {
        let lat = self.lattice();
        if s < 1 || s + 2 > lat.nt {
            return Err(LabError::InvalidInput(format!("slice {s} has no neighbours on both sides")));
        }
        let v = &phi.values;
        let phi0: Vec<f64> = (0..lat.nx).map(|ix| v[lat.idx(s, ix)]).collect();
        let phi1 = (0..lat.nx)
            .map(|ix| {
                let (a, b) = self.normal_at(s, ix);
                let dt = (v[lat.idx(s + 1, ix)] - v[lat.idx(s - 1, ix)]) / (2.0 * lat.dt);
                let dx = (phi0[lat.wrap(ix as isize + 1)] - phi0[lat.wrap(ix as isize - 1)]) / (2.0 * lat.dx);
                a * dt + b * dx
            })
            .collect();
        Ok(CauchyData { slice: s, phi0, phi1 })
    }

    /// Homogeneous solve with one datum set to `u` and the other to zero.
    pub fn k_propagator(&self, j: usize, s: usize, u: &[f64]) -> Result<FieldConfig> {
        let lat = self.lattice();
        let mut data = CauchyData::zero(&lat, s);
        match j {
            0 => data.phi0 = u.to_vec(),
            1 => data.phi1 = u.to_vec(),
            _ => return Err(LabError::InvalidInput(format!("K-propagator index {j} (expected 0 or 1)"))),
        }
        self.solve_cauchy(&data, &Density::zeros(lat))
    }

    /// Zero-data inhomogeneous solve from slice `s`.
    pub fn delta_sigma(&self, s: usize, v: &Density) -> Result<FieldConfig> {
        self.solve_cauchy(&CauchyData::zero(&self.lattice(), s), v)
    }

    /// Row residual `Hφ − v` (density coefficients).
    pub fn residual(&self, phi: &FieldConfig, v: &Density) -> Vec<f64> {
        self.stencil.apply(&phi.values).iter().zip(&v.coeffs).map(|(a, b)| a - b).collect()
    }

    /// Collar source `v` with `Δv = u` for a homogeneous solution `u`, built from a
    /// future-side time cutoff switching on across slices `s..s+2`.
    pub fn reconstruct_solution(&self, u: &FieldConfig, s: usize) -> Result<Density> {
        let lat = self.lattice();
        if s < 2 || s + 4 > lat.nt {
            return Err(LabError::InvalidInput(format!("collar at slice {s} does not fit the window")));
        }
        let chi = |it: usize| match it {
            _ if it < s => 0.0,
            _ if it == s => 1.0 / 3.0,
            _ if it == s + 1 => 2.0 / 3.0,
            _ => 1.0,
        };
        let w = FieldConfig::from_node_fn(lat, |it, ix| chi(it) * u.values[lat.idx(it, ix)]);
        let hw = self.stencil.apply(&w.values);
        let coeffs =
            (0..lat.len()).map(|n| if (s - 1..=s + 2).contains(&lat.coords(n).0) { hw[n] } else { 0.0 }).collect();
        Ok(Density { lattice: lat, coeffs })
    }
}

/// Divergence-form operator `ψ ↦ −∂_a(K^{ab}∂_bψ) + qψ` discretized with midpoint
/// coefficients and centred mixed differences (independent of the variational stencil).
pub fn pde_stencil(lat: Lattice, k: &dyn Fn(f64, f64) -> Sym2, q: &dyn Fn(f64, f64) -> f64) -> Stencil {
    let mut s = Stencil::zeros(lat);
    let (dt, dx) = (lat.dt, lat.dx);
    for it in 0..lat.nt {
        for ix in 0..lat.nx {
            let n = lat.idx(it, ix);
            let (t, x) = (lat.t(it), lat.x(ix));
            let c = &mut s.coef[n];
            let (kp, km) = (k(t + 0.5 * dt, x).tt, k(t - 0.5 * dt, x).tt);
            c[2][1] -= kp / (dt * dt);
            c[0][1] -= km / (dt * dt);
            c[1][1] += (kp + km) / (dt * dt);
            let (kp, km) = (k(t, x + 0.5 * dx).xx, k(t, x - 0.5 * dx).xx);
            c[1][2] -= kp / (dx * dx);
            c[1][0] -= km / (dx * dx);
            c[1][1] += (kp + km) / (dx * dx);
            let w = 1.0 / (4.0 * dt * dx);
            let (ktp, ktm) = (k(t + dt, x).tx, k(t - dt, x).tx);
            let (kxp, kxm) = (k(t, x + dx).tx, k(t, x - dx).tx);
            c[2][2] -= (ktp + kxp) * w;
            c[2][0] += (ktp + kxm) * w;
            c[0][2] += (ktm + kxp) * w;
            c[0][0] -= (ktm + kxm) * w;
            c[1][1] += q(t, x);
        }
    }
    s
}

/// Which solution operator a resolvent check differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "slice")]
pub enum PropagatorKind {
    Ret,
    Adv,
    Sigma(usize),
    K0(usize),
    K1(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventReport {
    pub which: PropagatorKind,
    pub derivative_norm: f64,
    /// `‖∂_λ(X_λ u) + X′_λ Ṗ_λ X_λ u‖ / ‖∂_λ(X_λ u)‖`, `X′` the matching inhomogeneous solver.
    pub residual: f64,
}

fn apply_kind(p: &Propagator, which: PropagatorKind, input: &[f64]) -> Result<FieldConfig> {
    let lat = p.lattice();
    let density = || Density { lattice: lat, coeffs: input.to_vec() };
    match which {
        PropagatorKind::Ret => p.delta_ret(&density()),
        PropagatorKind::Adv => p.delta_adv(&density()),
        PropagatorKind::Sigma(s) => p.delta_sigma(s, &density()),
        PropagatorKind::K0(s) => p.k_propagator(0, s, input),
        PropagatorKind::K1(s) => p.k_propagator(1, s, input),
    }
}

/// Compare a Richardson-extrapolated central difference of `λ ↦ X_λ u` with the resolvent
/// formula `−X′_λ Ṗ_λ X_λ u`. `family(λ)` returns `(P_λ, Ṗ_λ)`; `input` is a density for
/// the inhomogeneous solvers and slice data for `K0`/`K1`.
pub fn resolvent_derivative_check(
    st: &Arc<GridSpacetime>,
    family: &dyn Fn(f64) -> Result<(Stencil, Stencil)>,
    lambda: f64,
    step: f64,
    which: PropagatorKind,
    input: &[f64],
) -> Result<ResolventReport> {
    let at = |l: f64| -> Result<Vec<f64>> {
        let (p, _) = family(l)?;
        Ok(apply_kind(&Propagator::new(st.clone(), p)?, which, input)?.values)
    };
    let central = |h: f64| -> Result<Vec<f64>> {
        let (a, b) = (at(lambda + h)?, at(lambda - h)?);
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect())
    };
    let (c1, c2) = (central(step)?, central(0.5 * step)?);
    let fd: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let (p, pdot) = family(lambda)?;
    let prop = Propagator::new(st.clone(), p)?;
    let x = apply_kind(&prop, which, input)?;
    let inner = pdot.apply(&x.values);
    let outer = match which {
        PropagatorKind::Ret => PropagatorKind::Ret,
        PropagatorKind::Adv => PropagatorKind::Adv,
        PropagatorKind::Sigma(s) | PropagatorKind::K0(s) | PropagatorKind::K1(s) => PropagatorKind::Sigma(s),
    };
    let formula = apply_kind(&prop, outer, &inner)?;
    let norm = fd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let diff = fd.iter().zip(&formula.values).fold(0.0f64, |a, (x, y)| a.max((x + y).abs()));
    Ok(ResolventReport { which, derivative_norm: norm, residual: if norm > 0.0 { diff / norm } else { diff } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::pair;

    fn wave(lat: Lattice) -> LinearHypOp {
        let st = Arc::new(GridSpacetime::minkowski(lat));
        let k = |_t: f64, _x: f64| Sym2::new(1.0, 0.0, -1.0);
        let stencil = pde_stencil(lat, &k, &|_, _| 0.0);
        let p = vec![Sym2::new(-1.0, 0.0, 1.0); lat.len()];
        LinearHypOp::new(st, stencil, p, true).unwrap()
    }

    #[test]
    fn zero_source_gives_zero() {
        let lat = Lattice::new(12, 10, 0.05, 0.1).unwrap();
        let p = wave(lat).propagator().unwrap();
        let z = Density::zeros(lat);
        assert!(p.delta_ret(&z).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(p.delta_sigma(4, &z).unwrap().values.iter().all(|v| *v == 0.0));
        assert!(p.k_propagator(1, 4, &vec![0.0; 10]).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cauchy_solve_reproduces_data_and_rows() {
        let lat = Lattice::new(16, 12, 0.05, 0.1).unwrap();
        let op = wave(lat);
        let p = op.propagator().unwrap();
        let data = CauchyData {
            slice: 6,
            phi0: (0..12).map(|i| (i as f64 * 0.5).sin()).collect(),
            phi1: (0..12).map(|i| (i as f64 * 0.3).cos()).collect(),
        };
        let src = Density::from_node_fn(lat, |it, ix| if it == 9 && ix == 3 { 1.0 } else { 0.0 });
        let phi = p.solve_cauchy(&data, &src).unwrap();
        let back = p.restrict(&phi, 6).unwrap();
        for i in 0..12 {
            assert!((back.phi0[i] - data.phi0[i]).abs() < 1e-13);
            assert!((back.phi1[i] - data.phi1[i]).abs() < 1e-10);
        }
        let r = p.residual(&phi, &src);
        for it in 1..lat.nt - 1 {
            for ix in 0..lat.nx {
                assert!(r[lat.idx(it, ix)].abs() < 1e-9, "row {it}");
            }
        }
    }

    #[test]
    fn transpose_relation_on_explicit_stencil() {
        let lat = Lattice::new(14, 10, 0.05, 0.1).unwrap();
        let p = wave(lat).propagator().unwrap();
        let f = Density::from_node_fn(lat, |it, ix| ((it * 7 + ix * 3) % 5) as f64 - 2.0);
        let h = Density::from_node_fn(lat, |it, ix| ((it * 2 + ix * 5) % 7) as f64 - 3.0);
        let a = pair(&f, &p.delta_ret(&h).unwrap()).unwrap();
        let b = pair(&h, &p.delta_adv(&f).unwrap()).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn superposition_of_partial_solves() {
        let lat = Lattice::new(16, 12, 0.05, 0.1).unwrap();
        let p = wave(lat).propagator().unwrap();
        let u0: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let u1: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let v = Density::from_node_fn(lat, |it, ix| if (it, ix) == (10, 5) { 2.0 } else { 0.0 });
        let full = p.solve_cauchy(&CauchyData { slice: 5, phi0: u0.clone(), phi1: u1.clone() }, &v).unwrap();
        let sum = p.k_propagator(0, 5, &u0).unwrap().add(&p.k_propagator(1, 5, &u1).unwrap()).add(&p.delta_sigma(5, &v).unwrap());
        assert!(full.sub(&sum).norm_inf() < 1e-10 * full.norm_inf());
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let lat = Lattice::new(8, 8, 0.2, 0.1).unwrap();
        assert!(matches!(wave(lat).propagator(), Err(LabError::Cfl { .. })));
    }

    #[test]
    fn resolvent_formulas_hold_for_mass_family() {
        let lat = Lattice::new(16, 16, 0.05, 0.1).unwrap();
        let st = Arc::new(GridSpacetime::minkowski(lat));
        let family = |l: f64| -> Result<(Stencil, Stencil)> {
            let k = |_t: f64, _x: f64| Sym2::new(1.0, 0.0, -1.0);
            Ok((pde_stencil(lat, &k, &move |_, _| 1.0 + l), pde_stencil(lat, &|_, _| Sym2::new(0.0, 0.0, 0.0), &|_, _| 1.0)))
        };
        let src: Vec<f64> = (0..lat.len()).map(|n| if (3..9).contains(&lat.coords(n).0) { (n as f64 * 0.37).sin() } else { 0.0 }).collect();
        let data: Vec<f64> = (0..lat.nx).map(|ix| (ix as f64 * 0.4).cos()).collect();
        for (which, input) in [
            (PropagatorKind::Ret, &src),
            (PropagatorKind::Adv, &src),
            (PropagatorKind::Sigma(6), &src),
            (PropagatorKind::K0(6), &data),
            (PropagatorKind::K1(6), &data),
        ] {
            let r = resolvent_derivative_check(&st, &family, 0.3, 1e-3, which, input).unwrap();
            assert!(r.derivative_norm > 0.0 && r.residual < 1e-6, "{which:?}: {}", r.residual);
        }
    }
}
