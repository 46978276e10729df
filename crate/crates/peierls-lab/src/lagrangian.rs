//! Generalized Lagrangians: the discrete action, Euler–Lagrange operator, exact Hessian
//! stencils, principal symbols and domains of hyperbolicity.

use crate::error::{LabError, Result};
use crate::fields::{Density, FieldConfig, TestFunction};
use crate::functionals::{spacetime_support, ExampleDensity, Functional, LocalTerm, NodeGeom, PointDensity, ProbePlan};
use crate::geometry::{GridSpacetime, Lattice, NodeSet, Sym2};
use crate::hyperbolic::{LinearHypOp, Stencil};
use crate::tolerances::CLASSIFY_REL;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum LagrangianKind {
    /// `−½[X + (ε/2)(1+φ²)X² + m²φ²]·dμ_g`, free field at `ε = m = 0`.
    Example { eps: f64, mass2: f64 },
    /// Squared local Sobolev seminorm of order `k`.
    Sobolev { k: usize },
    /// Any first-order point density.
    Local(Arc<dyn PointDensity>),
}

/// `f ↦ L(f)` on a fixed spacetime.
#[derive(Debug, Clone)]
pub struct GeneralizedLagrangian {
    pub st: Arc<GridSpacetime>,
    pub kind: LagrangianKind,
}

/// Derivative of the action computed with two different cutoffs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ElDerivative {
    pub value: f64,
    pub alternate: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainClass {
    SubluminalHyperbolic,
    Degenerate,
    Reversed,
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityDomain {
    pub classes: Vec<DomainClass>,
    /// `g⁻¹(dφ₀, dφ₀) + 1/(2ε(1+φ₀²))` per node.
    pub margin: Vec<f64>,
    pub counts: [usize; 3],
    /// True iff every node is subluminal-hyperbolic.
    pub nh_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrivialityReport {
    pub trivial: bool,
    /// Per probe test function: nodes of the estimated support outside the ramp region.
    pub excess: Vec<usize>,
}

/// Discrete gradient: centred differences, one-sided on the end slices.
pub fn discrete_gradient(lat: &Lattice, phi: &[f64], n: usize) -> (f64, f64) {
    let (it, ix) = lat.coords(n);
    let at = |t: usize, x: usize| phi[lat.idx(t, x)];
    let pt = if it == 0 {
        (at(1, ix) - at(0, ix)) / lat.dt
    } else if it == lat.nt - 1 {
        (at(it, ix) - at(it - 1, ix)) / lat.dt
    } else {
        (at(it + 1, ix) - at(it - 1, ix)) / (2.0 * lat.dt)
    };
    let px = (at(it, lat.wrap(ix as isize + 1)) - at(it, lat.wrap(ix as isize - 1))) / (2.0 * lat.dx);
    (pt, px)
}

/// `ĝ⁻¹ = (1 + kX)·g⁻¹ + 2k·(g⁻¹dφ)⊗(g⁻¹dφ)` with `k = ε(1+φ²)`.
pub fn example_principal(ginv: &Sym2, eps: f64, phi: f64, p: (f64, f64)) -> Sym2 {
    let k = eps * (1.0 + phi * phi);
    let x = ginv.quad(p.0, p.1);
    let v = (ginv.tt * p.0 + ginv.tx * p.1, ginv.tx * p.0 + ginv.xx * p.1);
    ginv.scale(1.0 + k * x).add(&Sym2::new(2.0 * k * v.0 * v.0, 2.0 * k * v.0 * v.1, 2.0 * k * v.1 * v.1))
}

/// Assemble `Σ_corners w·Jᵀ M J` into a stencil, `M` supplied per corner from the jet.
fn assemble(term: &LocalTerm, phi: &[f64], order: usize, block: impl Fn(&crate::functionals::Jet3, &crate::functionals::density::Corner) -> [[f64; 3]; 3]) -> Stencil {
    let lat = term.st.lattice;
    let mut s = Stencil::zeros(lat);
    term.for_each_corner(|geom, w, c| {
        let j = term.density.jet(geom, c.project(phi), order);
        let m = block(&j, c);
        let jm = c.jmat();
        let mut full = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for i in 0..3 {
                    for k in 0..3 {
                        acc += jm[i][a] * m[i][k] * jm[k][b];
                    }
                }
                full[a][b] = acc;
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                let sym = 0.5 * (full[a][b] + full[b][a]);
                s.add_entry(c.nodes[a], c.nodes[b], w * sym);
            }
        }
    });
    s
}

impl GeneralizedLagrangian {
    pub fn new(st: Arc<GridSpacetime>, kind: LagrangianKind) -> Self {
        Self { st, kind }
    }

    pub fn free_field(st: Arc<GridSpacetime>) -> Self {
        Self::new(st, LagrangianKind::Example { eps: 0.0, mass2: 0.0 })
    }

    pub fn example(st: Arc<GridSpacetime>, eps: f64, mass2: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite() && mass2.is_finite()) {
            return Err(LabError::InvalidInput(format!("example Lagrangian needs ε ≥ 0, got {eps}")));
        }
        Ok(Self::new(st, LagrangianKind::Example { eps, mass2 }))
    }

    pub fn sobolev(st: Arc<GridSpacetime>, k: usize) -> Result<Self> {
        if k > 2 {
            return Err(LabError::UnsupportedOrder(k));
        }
        Ok(Self::new(st, LagrangianKind::Sobolev { k }))
    }

    pub fn local(st: Arc<GridSpacetime>, density: Arc<dyn PointDensity>) -> Self {
        Self::new(st, LagrangianKind::Local(density))
    }

    pub fn lattice(&self) -> Lattice {
        self.st.lattice
    }

    pub fn name(&self) -> String {
        match &self.kind {
            LagrangianKind::Example { eps, mass2 } if *eps == 0.0 && *mass2 == 0.0 => "free-field".into(),
            LagrangianKind::Example { eps, mass2 } => format!("example-eps(eps={eps}, mass2={mass2})"),
            LagrangianKind::Sobolev { k } => format!("sobolev(k={k})"),
            LagrangianKind::Local(d) => d.name(),
        }
    }

    pub fn density(&self) -> Option<Arc<dyn PointDensity>> {
        match &self.kind {
            LagrangianKind::Example { eps, mass2 } => Some(Arc::new(ExampleDensity { eps: *eps, mass2: *mass2 })),
            LagrangianKind::Sobolev { .. } => None,
            LagrangianKind::Local(d) => Some(d.clone()),
        }
    }

    /// The functional `L(f)`.
    pub fn at(&self, f: &TestFunction) -> Result<Functional> {
        match (&self.kind, self.density()) {
            (LagrangianKind::Sobolev { k }, _) => Functional::sobolev_sq(f.clone(), *k, None),
            (_, Some(d)) => Functional::local_density(&self.st, f.clone(), d),
            _ => unreachable!("every non-Sobolev kind has a density"),
        }
    }

    /// `L(1)`, the action over the whole window.
    pub fn action(&self) -> Result<Functional> {
        self.at(&TestFunction::constant(self.lattice(), 1.0))
    }

    fn action_term(&self) -> Result<LocalTerm> {
        let d = self
            .density()
            .ok_or_else(|| LabError::InvalidInput(format!("{} has no pointwise density", self.name())))?;
        LocalTerm::new(self.st.clone(), TestFunction::constant(self.lattice(), 1.0), d)
    }

    /// `E(L)[φ]`, the exact gradient of the discrete action.
    pub fn el_operator(&self, phi: &FieldConfig) -> Result<Density> {
        self.action()?.gradient(phi)
    }

    /// `D^k L(f)[φ](dirs)` with `f ≡ 1` near the support of the first interior direction,
    /// recomputed with a second cutoff.
    pub fn el_derivative(&self, phi: &FieldConfig, dirs: &[&FieldConfig]) -> Result<ElDerivative> {
        let lat = self.lattice();
        if dirs.is_empty() || dirs.len() > 3 {
            return Err(LabError::UnsupportedOrder(dirs.len()));
        }
        let interior = |s: &NodeSet| match s.dilate(2).time_extent() {
            Some((a, b)) => a > 0 && b < lat.nt - 1,
            None => false,
        };
        let s = dirs
            .iter()
            .map(|d| d.nonzero_set())
            .find(interior)
            .ok_or_else(|| LabError::InvalidInput("every direction reaches the temporal boundary".into()))?;
        let core = s.dilate(2);
        let ring = s.dilate(4).difference(&core);
        let f1 = TestFunction::indicator(&core);
        let f2 = TestFunction::new(FieldConfig::from_node_fn(lat, |it, ix| {
            let n = lat.idx(it, ix);
            if core.contains(n) {
                1.0
            } else if ring.contains(n) {
                0.5 * (1.0 + (1.7 * it as f64 + 0.9 * ix as f64).sin())
            } else {
                0.0
            }
        }));
        let value = self.at(&f1)?.derivative(phi, dirs)?;
        let alternate = self.at(&f2)?.derivative(phi, dirs)?;
        Ok(ElDerivative { value, alternate, discrepancy: (value - alternate).abs() })
    }

    /// Exact Hessian of the discrete action at `φ₀` (density units).
    pub fn hessian_stencil(&self, phi0: &FieldConfig) -> Result<Stencil> {
        let term = self.action_term()?;
        Ok(assemble(&term, &phi0.values, 2, |j, _| j.h))
    }

    /// `ψ ↦ D³S[φ₀](w, ψ, ·)`: derivative of the Hessian along `w`.
    pub fn third_variation(&self, phi0: &FieldConfig, w: &FieldConfig) -> Result<Stencil> {
        let term = self.action_term()?;
        Ok(assemble(&term, &phi0.values, 3, |j, c| j.t_a(&c.project(&w.values))))
    }

    /// Closed-form ĝ⁻¹ per node from the discrete gradient of `φ₀`.
    pub fn principal_metric(&self, phi0: &FieldConfig) -> Result<Vec<Sym2>> {
        let lat = self.lattice();
        match &self.kind {
            LagrangianKind::Example { eps, .. } => Ok((0..lat.len())
                .map(|n| example_principal(&self.st.inv(n), *eps, phi0.values[n], discrete_gradient(&lat, &phi0.values, n)))
                .collect()),
            LagrangianKind::Local(d) => Ok((0..lat.len())
                .map(|n| {
                    let geom = NodeGeom::at(&self.st, n);
                    let (pt, px) = discrete_gradient(&lat, &phi0.values, n);
                    let h = d.jet(&geom, [phi0.values[n], pt, px], 2).h;
                    let s = -1.0 / geom.sqrt_g;
                    Sym2::new(s * h[1][1], s * h[1][2], s * h[2][2])
                })
                .collect()),
            LagrangianKind::Sobolev { .. } => {
                Err(LabError::InvalidInput("the Sobolev Lagrangian has an elliptic symbol".into()))
            }
        }
    }

    /// `E′(L)[φ₀]` with its closed-form principal symbol.
    pub fn linearize(&self, phi0: &FieldConfig) -> Result<LinearHypOp> {
        LinearHypOp::new(self.st.clone(), self.hessian_stencil(phi0)?, self.principal_metric(phi0)?, true)
    }

    /// Sign of `g⁻¹(dφ₀,dφ₀) + 1/(2ε(1+φ₀²))` per node.
    pub fn hyperbolicity_domain(&self, phi0: &FieldConfig) -> Result<HyperbolicityDomain> {
        let eps = match self.kind {
            LagrangianKind::Example { eps, .. } => eps,
            _ => return Err(LabError::InvalidInput("the domain classifier covers the example family".into())),
        };
        let lat = self.lattice();
        let mut classes = Vec::with_capacity(lat.len());
        let mut margin = Vec::with_capacity(lat.len());
        let mut counts = [0; 3];
        for n in 0..lat.len() {
            let (class, m) = if eps == 0.0 {
                (DomainClass::SubluminalHyperbolic, f64::INFINITY)
            } else {
                let (pt, px) = discrete_gradient(&lat, &phi0.values, n);
                let x = self.st.inv(n).quad(pt, px);
                let phi = phi0.values[n];
                let thr = 1.0 / (2.0 * eps * (1.0 + phi * phi));
                let m = x + thr;
                let class = if m.abs() <= CLASSIFY_REL * (x.abs() + thr) {
                    DomainClass::Degenerate
                } else if m > 0.0 {
                    DomainClass::SubluminalHyperbolic
                } else {
                    DomainClass::Reversed
                };
                (class, m)
            };
            counts[class as usize] += 1;
            classes.push(class);
            margin.push(m);
        }
        Ok(HyperbolicityDomain { nh_holds: counts[0] == lat.len(), classes, margin, counts })
    }

    /// Whether `supp L(f)` stays within the ramp region of every probe `f`.
    pub fn is_trivial(&self, probes: &[TestFunction], plan: &ProbePlan) -> Result<TrivialityReport> {
        triviality(|f| self.at(f), probes, plan)
    }

    /// `L − other` is trivial.
    pub fn equivalent_to(&self, other: &GeneralizedLagrangian, probes: &[TestFunction], plan: &ProbePlan) -> Result<TrivialityReport> {
        triviality(|f| Ok(self.at(f)?.sub(&other.at(f)?)), probes, plan)
    }
}

/// Nodes where `f` differs from some Chebyshev neighbour (the discrete `supp df`).
pub fn ramp_region(f: &TestFunction) -> NodeSet {
    let lat = f.lattice();
    NodeSet::from_fn(lat, |it, ix| {
        let v = f.field.get(it, ix);
        for dt in -1isize..=1 {
            let t = it as isize + dt;
            if t < 0 || t >= lat.nt as isize {
                continue;
            }
            for dx in -1isize..=1 {
                if f.field.get(t as usize, lat.wrap(ix as isize + dx)) != v {
                    return true;
                }
            }
        }
        false
    })
}

fn triviality(at: impl Fn(&TestFunction) -> Result<Functional>, probes: &[TestFunction], plan: &ProbePlan) -> Result<TrivialityReport> {
    if probes.is_empty() {
        return Err(LabError::InvalidInput("triviality needs probe test functions".into()));
    }
    let mut excess = Vec::with_capacity(probes.len());
    for f in probes {
        let lat = f.lattice();
        let rep = spacetime_support(&at(f)?, lat, plan)?;
        let allowed = ramp_region(f).dilate(2);
        excess.push(rep.support.difference(&allowed).count());
    }
    Ok(TrivialityReport { trivial: excess.iter().all(|e| *e == 0), excess })
}

/// Divergence-form coefficients `E′ψ = −∂_a(K^{ab}∂_bψ) + qψ` of a density linearized at
/// a smooth background, from exact jets (`q` uses a centred difference for `∂_a ℓ_{φ p_a}`).
pub fn divergence_form<'a>(
    density: Arc<dyn PointDensity>,
    metric: impl Fn(f64, f64) -> Sym2 + Clone + 'a,
    phi0: impl Fn(f64, f64) -> (f64, f64, f64) + Clone + 'a,
) -> (impl Fn(f64, f64) -> Sym2 + 'a, impl Fn(f64, f64) -> f64 + 'a) {
    let jet = {
        let (density, metric, phi0) = (density.clone(), metric.clone(), phi0.clone());
        move |t: f64, x: f64| {
            let geom = NodeGeom::from_metric(metric(t, x), t, x);
            let (v, pt, px) = phi0(t, x);
            density.jet(&geom, [v, pt, px], 2).h
        }
    };
    let jet2 = jet.clone();
    let k = move |t: f64, x: f64| {
        let h = jet(t, x);
        Sym2::new(h[1][1], h[1][2], h[2][2])
    };
    let q = move |t: f64, x: f64| {
        let e = 1e-5;
        let div = (jet2(t + e, x)[0][1] - jet2(t - e, x)[0][1]) / (2.0 * e)
            + (jet2(t, x + e)[0][2] - jet2(t, x - e)[0][2]) / (2.0 * e);
        jet2(t, x)[0][0] - div
    };
    (k, q)
}

/// Second moment `½Σ_m H_{nm}(ξ·(x_m − x_n))²/√|g|` of the Hessian row at the centre of a
/// 7×7 patch of spacing `h`: the discrete `λ⁻²e^{−λf}P(e^{λf})` coefficient for `df = ξ`.
fn patch_symbol(
    density: &Arc<dyn PointDensity>,
    metric: &dyn Fn(f64, f64) -> Sym2,
    phi0: &dyn Fn(f64, f64) -> f64,
    t: f64,
    x: f64,
    h: f64,
) -> Result<Sym2> {
    let lat = Lattice::new(7, 7, h, h)?;
    let (t0, x0) = (t - 3.0 * h, x - 3.0 * h);
    let st = Arc::new(GridSpacetime::from_fn(lat, |a, b| metric(t0 + a, x0 + b))?);
    let field = FieldConfig::from_fn(lat, |a, b| phi0(t0 + a, x0 + b));
    let lag = GeneralizedLagrangian::local(st.clone(), density.clone());
    let hs = lag.hessian_stencil(&field)?;
    let n = lat.idx(3, 3);
    let moment = |xi: (f64, f64)| {
        let c = &hs.coef[n];
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let d = xi.0 * (i as f64 - 1.0) * h + xi.1 * (j as f64 - 1.0) * h;
                s += 0.5 * c[i][j] * d * d;
            }
        }
        s / st.sqrt_det(n)
    };
    let tt = moment((1.0, 0.0));
    let xx = moment((0.0, 1.0));
    let tx = 0.5 * (moment((1.0, 1.0)) - tt - xx);
    Ok(Sym2::new(tt, tx, xx))
}

/// Symbol-limit estimate of ĝ⁻¹ at `(t, x)`: patch moments at `h` and `h/2`, Richardson-combined.
pub fn symbol_limit_probe(
    density: &Arc<dyn PointDensity>,
    metric: &dyn Fn(f64, f64) -> Sym2,
    phi0: &dyn Fn(f64, f64) -> f64,
    t: f64,
    x: f64,
    h: f64,
) -> Result<Sym2> {
    let a = patch_symbol(density, metric, phi0, t, x, h)?;
    let b = patch_symbol(density, metric, phi0, t, x, 0.5 * h)?;
    Ok(b.scale(4.0 / 3.0).add(&a.scale(-1.0 / 3.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::pair;

    fn curved(lat: Lattice) -> Arc<GridSpacetime> {
        Arc::new(GridSpacetime::from_fn(lat, |t, x| Sym2::new(-1.0 - 0.1 * (x).sin(), 0.05 * t.cos(), 1.0 + 0.1 * t * t)).unwrap())
    }

    fn field(lat: Lattice, a: f64) -> FieldConfig {
        FieldConfig::from_fn(lat, |t, x| a * ((1.3 * t).sin() + 0.7 * (2.0 * x).cos() + 0.3 * t * x))
    }

    #[test]
    fn hessian_stencil_matches_hess_vec_and_is_symmetric() {
        let lat = Lattice::new(10, 12, 0.1, 0.2).unwrap();
        let lag = GeneralizedLagrangian::example(curved(lat), 0.3, 0.5).unwrap();
        let phi = field(lat, 0.4);
        let v = field(lat, 1.0).scale(0.3).add(&FieldConfig::from_node_fn(lat, |it, ix| ((it + 2 * ix) % 3) as f64));
        let hs = lag.hessian_stencil(&phi).unwrap();
        assert_eq!(hs.max_asymmetry(), 0.0);
        let a = hs.apply(&v.values);
        let b = lag.action().unwrap().hess_vec(&phi, &v).unwrap();
        for (x, y) in a.iter().zip(&b.coeffs) {
            assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn third_variation_is_directional_derivative_of_hessian() {
        let lat = Lattice::new(8, 10, 0.1, 0.2).unwrap();
        let lag = GeneralizedLagrangian::example(curved(lat), 0.2, 0.0).unwrap();
        let phi = field(lat, 0.5);
        let w = FieldConfig::from_fn(lat, |t, x| (t + x).cos());
        let v = FieldConfig::from_fn(lat, |t, x| (2.0 * t - x).sin());
        let d3 = lag.third_variation(&phi, &w).unwrap().apply(&v.values);
        let h = 1e-5;
        let p = lag.hessian_stencil(&phi.axpy(h, &w)).unwrap().apply(&v.values);
        let m = lag.hessian_stencil(&phi.axpy(-h, &w)).unwrap().apply(&v.values);
        for i in 0..d3.len() {
            let fd = (p[i] - m[i]) / (2.0 * h);
            assert!((fd - d3[i]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn free_field_derivative_is_minus_metric_pairing() {
        let lat = Lattice::new(12, 12, 0.1, 0.1).unwrap();
        let st = Arc::new(GridSpacetime::minkowski(lat));
        let lag = GeneralizedLagrangian::free_field(st);
        let phi = field(lat, 1.0);
        let dir = TestFunction::bump(lat, 6, 6, 2.5).field;
        let d = lag.el_derivative(&phi, &[&dir]).unwrap();
        assert!(d.discrepancy <= 1e-12 * d.value.abs().max(1e-300));
        let e = lag.el_operator(&phi).unwrap();
        let p = pair(&e, &dir).unwrap();
        assert!((p - d.value).abs() <= 1e-12 * p.abs());
        let c = FieldConfig::constant(lat, 2.0);
        assert_eq!(lag.el_derivative(&c, &[&dir]).unwrap().value, 0.0);
    }

    #[test]
    fn boundary_directions_are_rejected() {
        let lat = Lattice::new(8, 8, 0.1, 0.1).unwrap();
        let lag = GeneralizedLagrangian::free_field(Arc::new(GridSpacetime::minkowski(lat)));
        let dir = TestFunction::bump(lat, 0, 3, 1.5).field;
        assert!(lag.el_derivative(&FieldConfig::zeros(lat), &[&dir]).is_err());
    }

    #[test]
    fn example_operator_vanishes_at_zero() {
        let lat = Lattice::new(8, 8, 0.1, 0.1).unwrap();
        let lag = GeneralizedLagrangian::example(curved(lat), 0.5, 0.0).unwrap();
        assert!(lag.el_operator(&FieldConfig::zeros(lat)).unwrap().coeffs.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn principal_metric_reduces_to_background_without_gradient() {
        let lat = Lattice::new(8, 8, 0.1, 0.1).unwrap();
        let st = curved(lat);
        let lag = GeneralizedLagrangian::example(st.clone(), 0.7, 0.0).unwrap();
        let p = lag.principal_metric(&FieldConfig::constant(lat, 0.8)).unwrap();
        for (n, g) in p.iter().enumerate() {
            assert_eq!(*g, st.inv(n));
        }
    }

    #[test]
    fn closed_form_symbol_matches_jet_symbol() {
        let lat = Lattice::new(8, 10, 0.1, 0.2).unwrap();
        let st = curved(lat);
        let phi = field(lat, 0.6);
        let a = GeneralizedLagrangian::example(st.clone(), 0.4, 0.0).unwrap().principal_metric(&phi).unwrap();
        let b = GeneralizedLagrangian::local(st, Arc::new(ExampleDensity { eps: 0.4, mass2: 0.0 })).principal_metric(&phi).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.as_array().iter().zip(y.as_array()) {
                assert!((p - q).abs() < 1e-12 * (1.0 + p.abs()));
            }
        }
    }

    #[test]
    fn symbol_probe_recovers_closed_form() {
        let density: Arc<dyn PointDensity> = Arc::new(ExampleDensity { eps: 0.3, mass2: 0.0 });
        let metric = |t: f64, x: f64| Sym2::new(-1.0 - 0.2 * x.sin(), 0.1 * t.cos(), 1.0 + 0.1 * t);
        let phi = |t: f64, x: f64| 0.4 * (t + 2.0 * x).sin();
        let (t, x) = (0.3f64, 0.7f64);
        let p = (0.4 * (t + 2.0 * x).cos(), 0.8 * (t + 2.0 * x).cos());
        let exact = example_principal(&metric(t, x).inverse(), 0.3, phi(t, x), p);
        let probe = symbol_limit_probe(&density, &metric, &phi, t, x, 0.01).unwrap();
        for (a, b) in exact.as_array().iter().zip(probe.as_array()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn total_divergence_is_trivial_and_free_field_is_not() {
        let lat = Lattice::new(16, 16, 0.1, 0.1).unwrap();
        let st = Arc::new(GridSpacetime::minkowski(lat));
        let probes = vec![TestFunction::smooth_box(lat, 5, 10, 8, 3, 1), TestFunction::indicator(&NodeSet::from_fn(lat, |it, ix| (4..12).contains(&it) && (3..13).contains(&ix)))];
        let plan = ProbePlan::new(5);
        let div = GeneralizedLagrangian::local(st.clone(), Arc::new(crate::functionals::TotalDivergenceDensity { c: 1.0 }));
        let r = div.is_trivial(&probes, &plan).unwrap();
        assert!(r.trivial, "{:?}", r.excess);
        let free = GeneralizedLagrangian::free_field(st);
        assert!(!free.is_trivial(&probes, &plan).unwrap().trivial);
    }
}
