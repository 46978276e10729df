//! Retarded and advanced products, the Peierls bracket and its Poisson-structure checks.

use crate::error::{LabError, Result};
use crate::fields::{pair, Density, FieldConfig};
use crate::functionals::{Functional, Kind, OuterMap};
use crate::geometry::{causal_future, causal_past, ConeMetric, NodeSet};
use crate::hyperbolic::Propagator;
use crate::lagrangian::GeneralizedLagrangian;
use crate::tolerances::{SUPPORT_FLOOR, SUPPORT_REL};
use serde::Serialize;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

const CACHE_LIMIT: usize = 64;

/// Anything with a value and a gradient density at a configuration.
pub trait Observable: Send + Sync + std::fmt::Debug {
    fn value_at(&self, phi: &FieldConfig) -> Result<f64>;
    fn gradient_at(&self, phi: &FieldConfig) -> Result<Density>;
    fn hess_vec_at(&self, _phi: &FieldConfig, _v: &FieldConfig) -> Result<Density> {
        Err(LabError::NotDifferentiable(format!("{self:?} has no second derivative")))
    }
    /// Gradient support at any φ stays inside the region the value depends on pointwise.
    fn is_local(&self) -> bool {
        false
    }
}

impl Observable for Functional {
    fn value_at(&self, phi: &FieldConfig) -> Result<f64> {
        self.value(phi)
    }
    fn gradient_at(&self, phi: &FieldConfig) -> Result<Density> {
        self.gradient(phi)
    }
    fn hess_vec_at(&self, phi: &FieldConfig, v: &FieldConfig) -> Result<Density> {
        self.hess_vec(phi, v)
    }
    fn is_local(&self) -> bool {
        match self.kind() {
            Kind::Constant(_) | Kind::Local(_) | Kind::Quadratic(_) => true,
            Kind::Kernel(k) => k.terms.is_empty(),
            Kind::Sum(v) => v.iter().all(|f| f.is_local()),
            Kind::ScalarMul(_, f) | Kind::Cutoff(_, f) => f.is_local(),
            Kind::Product(a, b) => {
                matches!(a.kind(), Kind::Constant(_)) && b.is_local() || matches!(b.kind(), Kind::Constant(_)) && a.is_local()
            }
            Kind::Compose(..) | Kind::SupNorm(_) => false,
        }
    }
}

/// `φ ↦ ⟨E(L)[φ], χ⟩`, an equation-of-motion functional.
#[derive(Debug, Clone)]
pub struct EomObservable {
    pub lagrangian: GeneralizedLagrangian,
    pub chi: FieldConfig,
}

impl Observable for EomObservable {
    fn value_at(&self, phi: &FieldConfig) -> Result<f64> {
        pair(&self.lagrangian.el_operator(phi)?, &self.chi)
    }
    fn gradient_at(&self, phi: &FieldConfig) -> Result<Density> {
        Ok(self.lagrangian.hessian_stencil(phi)?.apply_field(&self.chi))
    }
    fn hess_vec_at(&self, phi: &FieldConfig, v: &FieldConfig) -> Result<Density> {
        Ok(self.lagrangian.third_variation(phi, v)?.apply_field(&self.chi))
    }
    fn is_local(&self) -> bool {
        true
    }
}

struct CacheEntry {
    bits: Vec<u64>,
    prop: Arc<Propagator>,
}

/// A Lagrangian with its per-configuration propagators and a temporal margin.
pub struct BracketContext {
    pub lagrangian: GeneralizedLagrangian,
    /// Functional gradients must vanish on the first and last `margin` slices.
    pub margin: usize,
    cache: Mutex<HashMap<u64, Vec<CacheEntry>>>,
}

impl std::fmt::Debug for BracketContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BracketContext").field("lagrangian", &self.lagrangian.name()).field("margin", &self.margin).finish()
    }
}

impl BracketContext {
    pub fn new(lagrangian: GeneralizedLagrangian, margin: usize) -> Result<Arc<Self>> {
        if margin < 1 || 2 * margin >= lagrangian.lattice().nt {
            return Err(LabError::InvalidInput(format!("margin {margin} does not fit the window")));
        }
        Ok(Arc::new(Self { lagrangian, margin, cache: Mutex::new(HashMap::new()) }))
    }

    /// Propagators of `E′(L)[φ]`; rejects configurations outside the hyperbolic domain.
    pub fn propagator(&self, phi: &FieldConfig) -> Result<Arc<Propagator>> {
        let bits: Vec<u64> = phi.values.iter().map(|v| v.to_bits()).collect();
        let mut h = DefaultHasher::new();
        bits.hash(&mut h);
        let key = h.finish();
        if let Some(e) = self.cache.lock().expect("cache lock").get(&key).and_then(|v| v.iter().find(|e| e.bits == bits)) {
            return Ok(e.prop.clone());
        }
        let prop = Arc::new(self.lagrangian.linearize(phi)?.propagator()?);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.entry(key).or_default().push(CacheEntry { bits, prop: prop.clone() });
        Ok(prop)
    }

    fn check_margin(&self, d: &Density, what: &str) -> Result<()> {
        let lat = d.lattice;
        let bad = d.coeffs.iter().enumerate().find(|(n, v)| {
            let it = lat.coords(*n).0;
            **v != 0.0 && (it < self.margin || it + self.margin >= lat.nt)
        });
        match bad {
            Some((n, _)) => Err(LabError::Margin(format!("{what} gradient is nonzero at node {:?}", lat.coords(n)))),
            None => Ok(()),
        }
    }

    fn grad(&self, f: &dyn Observable, phi: &FieldConfig, what: &str) -> Result<Density> {
        let d = f.gradient_at(phi)?;
        self.check_margin(&d, what)?;
        Ok(d)
    }

    /// `T(a, b)`: the third variation in direction `a` applied to `b`.
    fn third(&self, phi: &FieldConfig, a: &FieldConfig, b: &FieldConfig) -> Result<Density> {
        Ok(self.lagrangian.third_variation(phi, a)?.apply_field(b))
    }
}

/// `R(F,G)(φ) = ⟨F′, Δ_ret G′⟩`.
pub fn retarded_product(ctx: &BracketContext, f: &dyn Observable, g: &dyn Observable, phi: &FieldConfig) -> Result<f64> {
    let p = ctx.propagator(phi)?;
    let fp = ctx.grad(f, phi, "first")?;
    let gp = ctx.grad(g, phi, "second")?;
    pair(&fp, &p.delta_ret(&gp)?)
}

/// `A(F,G) = R(G,F)`.
pub fn advanced_product(ctx: &BracketContext, f: &dyn Observable, g: &dyn Observable, phi: &FieldConfig) -> Result<f64> {
    retarded_product(ctx, g, f, phi)
}

/// `{F,G} = R(F,G) − R(G,F)`.
pub fn peierls_bracket(ctx: &BracketContext, f: &dyn Observable, g: &dyn Observable, phi: &FieldConfig) -> Result<f64> {
    Ok(retarded_product(ctx, f, g, phi)? - retarded_product(ctx, g, f, phi)?)
}

/// Gradient of `R(F,G)`: `F″Δ_ret G′ + G″Δ_adv F′ − T(Δ_adv F′, Δ_ret G′)`.
pub fn retarded_gradient(ctx: &BracketContext, f: &dyn Observable, g: &dyn Observable, phi: &FieldConfig) -> Result<Density> {
    let p = ctx.propagator(phi)?;
    let fp = ctx.grad(f, phi, "first")?;
    let gp = ctx.grad(g, phi, "second")?;
    let rg = p.delta_ret(&gp)?;
    let af = p.delta_adv(&fp)?;
    Ok(f.hess_vec_at(phi, &rg)?.add(&g.hess_vec_at(phi, &af)?).sub(&ctx.third(phi, &af, &rg)?))
}

/// `Y(F,G) = F″ΔG′ − T(Δ_adv F′, Δ_ret G′)`, so that `∇{F,G} = Y(F,G) − Y(G,F)`.
fn half_bracket_gradient(
    ctx: &BracketContext,
    p: &Propagator,
    f: &dyn Observable,
    fp: &Density,
    gp: &Density,
    phi: &FieldConfig,
) -> Result<Density> {
    let rg = p.delta_ret(gp)?;
    let cg = rg.sub(&p.delta_adv(gp)?);
    let af = p.delta_adv(fp)?;
    Ok(f.hess_vec_at(phi, &cg)?.sub(&ctx.third(phi, &af, &rg)?))
}

/// Gradient of `{F,G}`, antisymmetric in `(F,G)` bit for bit.
pub fn bracket_gradient(ctx: &BracketContext, f: &dyn Observable, g: &dyn Observable, phi: &FieldConfig) -> Result<Density> {
    let p = ctx.propagator(phi)?;
    let fp = ctx.grad(f, phi, "first")?;
    let gp = ctx.grad(g, phi, "second")?;
    Ok(half_bracket_gradient(ctx, &p, f, &fp, &gp, phi)?.sub(&half_bracket_gradient(ctx, &p, g, &gp, &fp, phi)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductKind {
    Retarded,
    Advanced,
    Bracket,
}

/// `R(F,G)`, `A(F,G)` or `{F,G}` as an observable of φ, for nested brackets.
#[derive(Debug, Clone)]
pub struct BracketObservable {
    pub ctx: Arc<BracketContext>,
    pub kind: ProductKind,
    pub f: Arc<dyn Observable>,
    pub g: Arc<dyn Observable>,
}

impl BracketObservable {
    pub fn new(ctx: &Arc<BracketContext>, kind: ProductKind, f: Arc<dyn Observable>, g: Arc<dyn Observable>) -> Self {
        Self { ctx: ctx.clone(), kind, f, g }
    }
}

impl Observable for BracketObservable {
    fn value_at(&self, phi: &FieldConfig) -> Result<f64> {
        let (f, g) = (self.f.as_ref(), self.g.as_ref());
        match self.kind {
            ProductKind::Retarded => retarded_product(&self.ctx, f, g, phi),
            ProductKind::Advanced => advanced_product(&self.ctx, f, g, phi),
            ProductKind::Bracket => peierls_bracket(&self.ctx, f, g, phi),
        }
    }
    fn gradient_at(&self, phi: &FieldConfig) -> Result<Density> {
        let (f, g) = (self.f.as_ref(), self.g.as_ref());
        match self.kind {
            ProductKind::Retarded => retarded_gradient(&self.ctx, f, g, phi),
            ProductKind::Advanced => retarded_gradient(&self.ctx, g, f, phi),
            ProductKind::Bracket => bracket_gradient(&self.ctx, f, g, phi),
        }
    }
}

fn arc(f: &Functional) -> Arc<dyn Observable> {
    Arc::new(f.clone())
}

fn rel(residual: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        residual / scale
    } else {
        residual
    }
}

fn scale_of(terms: &[f64]) -> f64 {
    terms.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[derive(Debug, Clone, Serialize)]
pub struct MasterIdentityReport {
    pub lhs_adv: f64,
    pub lhs_ret: f64,
    pub rhs: f64,
    pub residual_adv: f64,
    pub residual_ret: f64,
    pub scale: f64,
}

/// `{A(H,F),G} + {F,A(H,G)} − A(H,{F,G})`, its retarded analogue, and
/// `H″(Δ_adv F′, Δ_ret G′) − H″(Δ_ret F′, Δ_adv G′)`.
pub fn master_identity_residual(
    ctx: &Arc<BracketContext>,
    f: &Functional,
    g: &Functional,
    h: &Functional,
    phi: &FieldConfig,
) -> Result<MasterIdentityReport> {
    let (fa, ga, ha) = (arc(f), arc(g), arc(h));
    let fg = BracketObservable::new(ctx, ProductKind::Bracket, fa.clone(), ga.clone());
    let mut terms = Vec::new();
    let mut lhs = |kind: ProductKind| -> Result<f64> {
        let hf = BracketObservable::new(ctx, kind, ha.clone(), fa.clone());
        let hg = BracketObservable::new(ctx, kind, ha.clone(), ga.clone());
        let a = peierls_bracket(ctx, &hf, g, phi)?;
        let b = peierls_bracket(ctx, f, &hg, phi)?;
        let c = BracketObservable::new(ctx, kind, ha.clone(), Arc::new(fg.clone())).value_at(phi)?;
        terms.extend([a, b, c]);
        Ok(a + b - c)
    };
    let lhs_adv = lhs(ProductKind::Advanced)?;
    let lhs_ret = lhs(ProductKind::Retarded)?;
    let p = ctx.propagator(phi)?;
    let fp = ctx.grad(f, phi, "first")?;
    let gp = ctx.grad(g, phi, "second")?;
    let h2 = |a: &FieldConfig, b: &FieldConfig| -> Result<f64> { pair(&h.hess_vec(phi, a)?, b) };
    let r1 = h2(&p.delta_adv(&fp)?, &p.delta_ret(&gp)?)?;
    let r2 = h2(&p.delta_ret(&fp)?, &p.delta_adv(&gp)?)?;
    let rhs = r1 - r2;
    terms.extend([r1, r2]);
    let scale = scale_of(&terms);
    Ok(MasterIdentityReport {
        lhs_adv,
        lhs_ret,
        rhs,
        residual_adv: rel((lhs_adv - rhs).abs(), scale),
        residual_ret: rel((lhs_ret - rhs).abs(), scale),
        scale,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|` relative to the largest individual term.
    pub residual: f64,
    pub scale: f64,
}

/// Cyclic sum `{F,{G,H}} + {G,{H,F}} + {H,{F,G}}` against zero.
pub fn jacobi_residual(
    ctx: &Arc<BracketContext>,
    f: &dyn Observable,
    g: &dyn Observable,
    h: &dyn Observable,
    phi: &FieldConfig,
    owned: [Arc<dyn Observable>; 3],
) -> Result<IdentityReport> {
    let [fa, ga, ha] = owned;
    let inner = |a: &Arc<dyn Observable>, b: &Arc<dyn Observable>| BracketObservable::new(ctx, ProductKind::Bracket, a.clone(), b.clone());
    let t1 = peierls_bracket(ctx, f, &inner(&ga, &ha), phi)?;
    let t2 = peierls_bracket(ctx, g, &inner(&ha, &fa), phi)?;
    let t3 = peierls_bracket(ctx, h, &inner(&fa, &ga), phi)?;
    let lhs = t1 + t2 + t3;
    let scale = scale_of(&[t1, t2, t3]);
    Ok(IdentityReport { lhs, rhs: 0.0, residual: rel(lhs.abs(), scale), scale })
}

/// Jacobi residual for three functionals.
pub fn jacobi_functionals(ctx: &Arc<BracketContext>, f: &Functional, g: &Functional, h: &Functional, phi: &FieldConfig) -> Result<IdentityReport> {
    jacobi_residual(ctx, f, g, h, phi, [arc(f), arc(g), arc(h)])
}

/// `{F, GH}` against `{F,G}H + G{F,H}`.
pub fn leibniz_check(ctx: &BracketContext, f: &Functional, g: &Functional, h: &Functional, phi: &FieldConfig) -> Result<IdentityReport> {
    let lhs = peierls_bracket(ctx, f, &g.mul(h), phi)?;
    let a = peierls_bracket(ctx, f, g, phi)? * h.value(phi)?;
    let b = g.value(phi)? * peierls_bracket(ctx, f, h, phi)?;
    let rhs = a + b;
    let scale = scale_of(&[lhs, a, b]);
    Ok(IdentityReport { lhs, rhs, residual: rel((lhs - rhs).abs(), scale), scale })
}

/// `{ψ(F), G}` against `ψ′(F)·{F,G}` for a one-argument outer map.
pub fn derivation_check(ctx: &BracketContext, psi: &OuterMap, f: &Functional, g: &Functional, phi: &FieldConfig) -> Result<IdentityReport> {
    let composed = Functional::compose(psi.clone(), vec![f.clone()])?;
    let lhs = peierls_bracket(ctx, &composed, g, phi)?;
    let d = psi.jet(&[f.value(phi)?]).d1[0];
    let br = peierls_bracket(ctx, f, g, phi)?;
    let rhs = d * br;
    let scale = scale_of(&[lhs, rhs]);
    Ok(IdentityReport { lhs, rhs, residual: rel((lhs - rhs).abs(), scale), scale })
}

/// Richardson-extrapolated central difference of `t ↦ O(φ + t·w)` against `⟨∇O, w⟩`.
pub fn gradient_fd_check(obs: &dyn Observable, phi: &FieldConfig, w: &FieldConfig, step: f64) -> Result<IdentityReport> {
    let at = |t: f64| obs.value_at(&phi.axpy(t, w));
    let c = |h: f64| -> Result<f64> { Ok((at(h)? - at(-h)?) / (2.0 * h)) };
    let fd = (4.0 * c(0.5 * step)? - c(step)?) / 3.0;
    let an = pair(&obs.gradient_at(phi)?, w)?;
    let scale = scale_of(&[fd, an]);
    Ok(IdentityReport { lhs: fd, rhs: an, residual: rel((fd - an).abs(), scale), scale })
}

fn gradient_support(obs: &dyn Observable, probes: &[FieldConfig]) -> Result<NodeSet> {
    let lat = probes[0].lattice;
    let grads = probes.iter().map(|p| obs.gradient_at(p)).collect::<Result<Vec<_>>>()?;
    let peak = |g: &Density| g.coeffs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let global = grads.iter().fold(0.0f64, |a, g| a.max(peak(g)));
    let mut s = NodeSet::empty(lat);
    for g in &grads {
        let thr = (SUPPORT_REL * peak(g)).max(SUPPORT_FLOOR * global);
        for (n, v) in g.coeffs.iter().enumerate() {
            if v.abs() > thr {
                s.insert(n);
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportEntry {
    pub estimated: usize,
    pub allowed: usize,
    pub outside: usize,
    pub pass: bool,
}

impl SupportEntry {
    fn new(est: &NodeSet, allowed: &NodeSet) -> Self {
        let outside = est.difference(allowed).count();
        Self { estimated: est.count(), allowed: allowed.count(), outside, pass: outside == 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketSupportReport {
    pub support_f: usize,
    pub support_g: usize,
    pub retarded: SupportEntry,
    pub advanced: SupportEntry,
    pub bracket: SupportEntry,
    pub pass: bool,
}

/// Estimated supports of `R(F,G)`, `A(F,G)`, `{F,G}` over the probes against the cone laws
/// `J⁺(G)∩J⁻(F)`, `J⁺(F)∩J⁻(G)` and `(J⁺(F)∪J⁻(F))∩(J⁺(G)∪J⁻(G))`, taken in the symbol
/// metric of each probe and dilated by one node. Nonlocal arguments also admit their own
/// supports whenever the relevant intersection is nonempty.
pub fn bracket_support_check(
    ctx: &Arc<BracketContext>,
    f: Arc<dyn Observable>,
    g: Arc<dyn Observable>,
    probes: &[FieldConfig],
) -> Result<BracketSupportReport> {
    if probes.is_empty() {
        return Err(LabError::InvalidInput("support check needs probes".into()));
    }
    let lat = ctx.lagrangian.lattice();
    let st = &ctx.lagrangian.st;
    let sf = gradient_support(f.as_ref(), probes)?;
    let sg = gradient_support(g.as_ref(), probes)?;
    let local = f.is_local() && g.is_local();
    let mut allow_r = NodeSet::empty(lat);
    let mut allow_a = NodeSet::empty(lat);
    let mut allow_b = NodeSet::empty(lat);
    for p in probes {
        let metric = ctx.lagrangian.principal_metric(p)?;
        let cone = || ConeMetric::Other(&metric);
        let (fp, fm) = (causal_future(st, cone(), &sf)?, causal_past(st, cone(), &sf)?);
        let (gp, gm) = (causal_future(st, cone(), &sg)?, causal_past(st, cone(), &sg)?);
        let widen = |i: NodeSet| {
            let d = i.dilate(1);
            if !local && !i.is_empty() {
                d.union(&sf).union(&sg)
            } else {
                d
            }
        };
        allow_r = allow_r.union(&widen(gp.intersection(&fm)));
        allow_a = allow_a.union(&widen(fp.intersection(&gm)));
        allow_b = allow_b.union(&widen(fp.union(&fm).intersection(&gp.union(&gm))));
    }
    let est = |kind| gradient_support(&BracketObservable::new(ctx, kind, f.clone(), g.clone()), probes);
    let retarded = SupportEntry::new(&est(ProductKind::Retarded)?, &allow_r);
    let advanced = SupportEntry::new(&est(ProductKind::Advanced)?, &allow_a);
    let bracket = SupportEntry::new(&est(ProductKind::Bracket)?, &allow_b);
    let pass = retarded.pass && advanced.pass && bracket.pass;
    Ok(BracketSupportReport { support_f: sf.count(), support_g: sg.count(), retarded, advanced, bracket, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TestFunction;
    use crate::functionals::ExampleDensity;
    use crate::geometry::{GridSpacetime, Lattice};

    fn setup(eps: f64) -> (Arc<BracketContext>, Lattice) {
        let lat = Lattice::new(24, 16, 0.05, 0.1).unwrap();
        let st = Arc::new(GridSpacetime::minkowski(lat));
        let lag = GeneralizedLagrangian::example(st, eps, 0.0).unwrap();
        (BracketContext::new(lag, 2).unwrap(), lat)
    }

    fn local(ctx: &BracketContext, it: usize, ix: usize, eps: f64) -> Functional {
        let lat = ctx.lagrangian.lattice();
        let f = TestFunction::bump(lat, it, ix, 2.5);
        Functional::local_density(&ctx.lagrangian.st, f, Arc::new(ExampleDensity { eps, mass2: 1.0 })).unwrap()
    }

    fn linear(ctx: &BracketContext, it: usize, ix: usize) -> Functional {
        Functional::linear(&ctx.lagrangian.st, &TestFunction::bump(ctx.lagrangian.lattice(), it, ix, 2.5)).unwrap()
    }

    fn phi(lat: Lattice, a: f64) -> FieldConfig {
        FieldConfig::from_fn(lat, |t, x| a * ((2.0 * t + 0.3).sin() * (x * 3.0).cos() + 0.2 * t))
    }

    #[test]
    fn antisymmetry_and_exchange_are_exact() {
        let (ctx, lat) = setup(0.1);
        let (f, g) = (local(&ctx, 15, 8, 0.2), local(&ctx, 7, 6, 0.0));
        let p = phi(lat, 0.2);
        let fg = peierls_bracket(&ctx, &f, &g, &p).unwrap();
        let gf = peierls_bracket(&ctx, &g, &f, &p).unwrap();
        assert_eq!(fg + gf, 0.0);
        assert!(fg != 0.0);
        assert_eq!(peierls_bracket(&ctx, &f, &f, &p).unwrap(), 0.0);
        assert_eq!(advanced_product(&ctx, &f, &g, &p).unwrap(), retarded_product(&ctx, &g, &f, &p).unwrap());
        assert_eq!(retarded_product(&ctx, &f, &Functional::constant(3.0), &p).unwrap(), 0.0);
    }

    #[test]
    fn free_field_linear_bracket_is_field_independent() {
        let (ctx, lat) = setup(0.0);
        let (f, g) = (linear(&ctx, 16, 5), linear(&ctx, 8, 7));
        let b0 = peierls_bracket(&ctx, &f, &g, &phi(lat, 0.0)).unwrap();
        for a in [0.3, -1.0, 2.0] {
            let b = peierls_bracket(&ctx, &f, &g, &phi(lat, a)).unwrap();
            assert!((b - b0).abs() <= 1e-12 * b0.abs());
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let (ctx, lat) = setup(0.1);
        let (f, g) = (arc(&local(&ctx, 15, 8, 0.3)), arc(&local(&ctx, 8, 6, 0.1)));
        let p = phi(lat, 0.15);
        let w = FieldConfig::from_fn(lat, |t, x| (3.0 * t - x).cos() * (t * 2.0).sin());
        for kind in [ProductKind::Retarded, ProductKind::Advanced, ProductKind::Bracket] {
            let r = gradient_fd_check(&BracketObservable::new(&ctx, kind, f.clone(), g.clone()), &p, &w, 1e-3).unwrap();
            assert!(r.residual < 1e-6, "{kind:?}: {r:?}");
        }
    }

    #[test]
    fn identities_hold_for_the_epsilon_family() {
        let (ctx, lat) = setup(0.1);
        let (f, g, h) = (local(&ctx, 16, 8, 0.2), local(&ctx, 7, 5, 0.1), local(&ctx, 12, 9, 0.3));
        let p = phi(lat, 0.15);
        let m = master_identity_residual(&ctx, &f, &g, &h, &p).unwrap();
        assert!(m.residual_adv < 1e-9 && m.residual_ret < 1e-9, "{m:?}");
        let j = jacobi_functionals(&ctx, &f, &g, &h, &p).unwrap();
        assert!(j.residual < 1e-9, "{j:?}");
        assert_eq!(jacobi_functionals(&ctx, &f, &g, &g, &p).unwrap().lhs, 0.0);
        let l = leibniz_check(&ctx, &f, &g, &h, &p).unwrap();
        assert!(l.residual < 1e-12, "{l:?}");
        let d = derivation_check(&ctx, &OuterMap::Exp { scale: 0.5 }, &f, &g, &p).unwrap();
        assert!(d.residual < 1e-12, "{d:?}");
    }

    #[test]
    fn margin_is_enforced() {
        let (ctx, lat) = setup(0.0);
        let f = linear(&ctx, 1, 5);
        let g = linear(&ctx, 10, 5);
        assert!(matches!(peierls_bracket(&ctx, &f, &g, &phi(lat, 0.0)), Err(LabError::Margin(_))));
    }

    #[test]
    fn equation_of_motion_functional_is_degenerate() {
        let (ctx, lat) = setup(0.1);
        let chi = TestFunction::bump(lat, 12, 8, 3.0).field;
        let e = EomObservable { lagrangian: ctx.lagrangian.clone(), chi };
        let g = local(&ctx, 16, 4, 0.2);
        let p = phi(lat, 0.1);
        let b = peierls_bracket(&ctx, &e, &g, &p).unwrap();
        let scale = retarded_product(&ctx, &e, &g, &p).unwrap().abs();
        assert!(b.abs() <= 1e-10 * scale.max(1.0), "{b} vs {scale}");
    }

    #[test]
    fn support_laws_hold() {
        let (ctx, lat) = setup(0.1);
        // Backgrounds with φ_t·φ_x = 0 keep the slice blocks diagonal.
        let probes = vec![
            FieldConfig::zeros(lat),
            FieldConfig::from_fn(lat, |_, x| 0.2 * (3.0 * x).cos()),
            FieldConfig::from_fn(lat, |t, _| 0.1 * t * t),
        ];
        let f = arc(&local(&ctx, 16, 8, 0.2));
        let g = arc(&local(&ctx, 7, 8, 0.1));
        let r = bracket_support_check(&ctx, f.clone(), g.clone(), &probes).unwrap();
        assert!(r.pass, "{r:?}");
        let wide = Lattice::new(24, 32, 0.05, 0.1).unwrap();
        let lag = GeneralizedLagrangian::example(Arc::new(GridSpacetime::minkowski(wide)), 0.1, 0.0).unwrap();
        let ctx = BracketContext::new(lag, 2).unwrap();
        let far = arc(&local(&ctx, 11, 0, 0.1));
        let near = arc(&local(&ctx, 11, 16, 0.1));
        let probes = vec![FieldConfig::zeros(wide), FieldConfig::from_fn(wide, |_, x| 0.2 * (x * std::f64::consts::PI / 1.6).cos())];
        let r = bracket_support_check(&ctx, far, near, &probes).unwrap();
        assert!(r.pass && r.bracket.estimated == 0, "{r:?}");
    }
}
