//! The functional algebra: immutable expression trees with evaluation, derivatives to order
//! three, gradients and Hessian-vector products.

pub mod analysis;
pub mod catalogue;
pub mod density;
pub mod outer;

use crate::error::{LabError, Result};
use crate::fields::{pair_raw, Density, DiffOp, FieldConfig, TestFunction};
use crate::geometry::{GridSpacetime, Lattice, NodeSet};
use num_complex::Complex64;
use std::sync::Arc;

pub use analysis::{
    check_additivity, check_locality, decompose_small_support, spacetime_support, AdditivityReport,
    Decomposition, LocalityReport, ProbePlan, SupportReport,
};
pub use density::{
    CubicDensity, ExampleDensity, Jet3, LocalTerm, NodeGeom, PointDensity, PotentialDensity,
    SobolevDensity, TotalDivergenceDensity,
};
pub use outer::{OuterJet, OuterMap, Taylor3};

/// `Σ_j Σ_n f² |Dʲ(φ − φ₀)|² dt·dx`.
#[derive(Debug, Clone)]
pub struct QuadraticTerm {
    pub f: TestFunction,
    pub k: usize,
    pub shift: Option<FieldConfig>,
}

impl QuadraticTerm {
    pub fn new(f: TestFunction, k: usize) -> Result<Self> {
        if k > 2 {
            return Err(LabError::UnsupportedOrder(k));
        }
        Ok(Self { f, k, shift: None })
    }

    pub fn with_shift(mut self, phi0: FieldConfig) -> Self {
        self.shift = Some(phi0);
        self
    }

    fn lat(&self) -> Lattice {
        self.f.lattice()
    }

    fn psi(&self, phi: &[f64]) -> Vec<f64> {
        match &self.shift {
            None => phi.to_vec(),
            Some(s) => phi.iter().zip(&s.values).map(|(a, b)| a - b).collect(),
        }
    }

    fn apply(&self, op: DiffOp, v: &[f64]) -> Vec<f64> {
        let lat = self.lat();
        (0..lat.len())
            .map(|n| {
                if self.f.at(n) == 0.0 {
                    0.0
                } else {
                    let (it, ix) = lat.coords(n);
                    op.apply_at(v, &lat, it, ix)
                }
            })
            .collect()
    }

    fn table(&self, phi: &[f64], dirs: &[&[f64]]) -> Vec<f64> {
        let lat = self.lat();
        let psi = self.psi(phi);
        let k = dirs.len();
        let mut out = vec![0.0; 1 << k];
        let f2: Vec<f64> = self.f.field.values.iter().map(|f| f * f).collect();
        for (op, m) in DiffOp::up_to(self.k) {
            let dpsi = self.apply(op, &psi);
            let dv: Vec<Vec<f64>> = dirs.iter().map(|d| self.apply(op, d)).collect();
            for (mask, o) in out.iter_mut().enumerate() {
                let bits: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).collect();
                let s: f64 = match bits.as_slice() {
                    [] => (0..lat.len()).map(|n| f2[n] * dpsi[n] * dpsi[n]).sum(),
                    [a] => 2.0 * (0..lat.len()).map(|n| f2[n] * dpsi[n] * dv[*a][n]).sum::<f64>(),
                    [a, b] => 2.0 * (0..lat.len()).map(|n| f2[n] * dv[*a][n] * dv[*b][n]).sum::<f64>(),
                    _ => 0.0,
                };
                *o += m * s;
            }
        }
        out.iter().map(|x| x * lat.cell_area()).collect()
    }

    fn weighted_normal(&self, v: &[f64]) -> Vec<f64> {
        let lat = self.lat();
        let mut out = vec![0.0; lat.len()];
        for (op, m) in DiffOp::up_to(self.k) {
            let dv = self.apply(op, v);
            let w: Vec<f64> = (0..lat.len()).map(|n| 2.0 * m * self.f.at(n).powi(2) * dv[n]).collect();
            op.apply_transpose(&w, &lat, &mut out);
        }
        out
    }

    fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        self.weighted_normal(&self.psi(phi))
    }

    fn hess_vec(&self, v: &[f64]) -> Vec<f64> {
        self.weighted_normal(v)
    }

    pub fn structural_support(&self) -> NodeSet {
        self.f.support().dilate(2)
    }
}

/// `⟨ω, φ⟩ + ½ Σ_r c_r ⟨a_r, φ⟩²` with smooth densities `ω`, `a_r`.
#[derive(Debug, Clone)]
pub struct RegularKernel {
    pub omega: Density,
    pub terms: Vec<(f64, Density)>,
}

impl RegularKernel {
    fn area(&self) -> f64 {
        self.omega.lattice.cell_area()
    }

    fn p(&self, d: &Density, v: &[f64]) -> f64 {
        pair_raw(&d.coeffs, v) * self.area()
    }

    fn table(&self, phi: &[f64], dirs: &[&[f64]]) -> Vec<f64> {
        let k = dirs.len();
        let ap: Vec<f64> = self.terms.iter().map(|(_, a)| self.p(a, phi)).collect();
        let av: Vec<Vec<f64>> = dirs.iter().map(|d| self.terms.iter().map(|(_, a)| self.p(a, d)).collect()).collect();
        (0..1usize << k)
            .map(|mask| {
                let bits: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).collect();
                match bits.as_slice() {
                    [] => {
                        self.p(&self.omega, phi)
                            + 0.5 * self.terms.iter().zip(&ap).map(|((c, _), x)| c * x * x).sum::<f64>()
                    }
                    [a] => {
                        self.p(&self.omega, dirs[*a])
                            + self.terms.iter().enumerate().map(|(r, (c, _))| c * ap[r] * av[*a][r]).sum::<f64>()
                    }
                    [a, b] => self.terms.iter().enumerate().map(|(r, (c, _))| c * av[*a][r] * av[*b][r]).sum(),
                    _ => 0.0,
                }
            })
            .collect()
    }

    fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        let mut g = self.omega.coeffs.clone();
        for (c, a) in &self.terms {
            let s = c * self.p(a, phi);
            for (o, x) in g.iter_mut().zip(&a.coeffs) {
                *o += s * x;
            }
        }
        g
    }

    fn hess_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; v.len()];
        for (c, a) in &self.terms {
            let s = c * self.p(a, v);
            for (o, x) in g.iter_mut().zip(&a.coeffs) {
                *o += s * x;
            }
        }
        g
    }

    pub fn structural_support(&self) -> NodeSet {
        let mut s = self.omega.nonzero_set();
        for (_, a) in &self.terms {
            s = s.union(&a.nonzero_set());
        }
        s
    }
}

/// Domain restriction: `sup_set |φ| < radius`.
#[derive(Debug, Clone)]
pub enum Domain {
    SupBall { set: NodeSet, radius: f64 },
}

impl Domain {
    pub fn contains(&self, phi: &[f64]) -> bool {
        match self {
            Domain::SupBall { set, radius } => set.iter().all(|n| phi[n].abs() < *radius),
        }
    }
}

#[derive(Debug)]
pub enum Kind {
    Constant(f64),
    Local(LocalTerm),
    Quadratic(QuadraticTerm),
    Kernel(RegularKernel),
    Sum(Vec<Functional>),
    ScalarMul(Complex64, Functional),
    Product(Functional, Functional),
    Compose(OuterMap, Vec<Functional>),
    /// `sup_K |φ|`; evaluation only.
    SupNorm(NodeSet),
    /// `φ ↦ F(m·φ)`.
    Cutoff(FieldConfig, Functional),
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    domain: Option<Domain>,
    declared: Option<NodeSet>,
}

/// Immutable, cheaply cloneable functional expression.
#[derive(Debug, Clone)]
pub struct Functional(Arc<Node>);

/// All set partitions of the bits of `mask`, each block as a mask.
pub(crate) fn set_partitions(mask: usize) -> Vec<Vec<usize>> {
    if mask == 0 {
        return vec![vec![]];
    }
    let first = mask & mask.wrapping_neg();
    let rest = mask & !first;
    let mut out = Vec::new();
    // Choose which other elements join `first`'s block.
    let mut sub = rest;
    loop {
        let block = first | sub;
        for mut p in set_partitions(rest & !sub) {
            p.push(block);
            out.push(p);
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & rest;
    }
    out
}

fn check_len(lat_len: usize, phi: &[f64]) -> Result<()> {
    if phi.len() != lat_len {
        Err(LabError::GridMismatch(format!("field has {} nodes, functional expects {lat_len}", phi.len())))
    } else {
        Ok(())
    }
}

impl Functional {
    fn wrap(kind: Kind) -> Self {
        Functional(Arc::new(Node { kind, domain: None, declared: None }))
    }

    pub fn constant(c: f64) -> Self {
        Self::wrap(Kind::Constant(c))
    }

    pub fn local(term: LocalTerm) -> Self {
        Self::wrap(Kind::Local(term))
    }

    /// `L(f)(φ) = Σ f·ℓ` for a catalogue density.
    pub fn local_density(st: &Arc<GridSpacetime>, f: TestFunction, density: Arc<dyn PointDensity>) -> Result<Self> {
        Ok(Self::local(LocalTerm::new(st.clone(), f, density)?))
    }

    pub fn quadratic(q: QuadraticTerm) -> Self {
        Self::wrap(Kind::Quadratic(q))
    }

    /// `‖φ − φ₀‖²_{2,k,f}`.
    pub fn sobolev_sq(f: TestFunction, k: usize, shift: Option<FieldConfig>) -> Result<Self> {
        let mut q = QuadraticTerm::new(f, k)?;
        if let Some(s) = shift {
            q = q.with_shift(s);
        }
        Ok(Self::quadratic(q))
    }

    pub fn kernel(k: RegularKernel) -> Self {
        Self::wrap(Kind::Kernel(k))
    }

    /// `∫ fφ dμ_g`.
    pub fn linear(st: &GridSpacetime, f: &TestFunction) -> Result<Self> {
        let omega = crate::fields::to_density(st, &f.field)?;
        Ok(Self::kernel(RegularKernel { omega, terms: vec![] }))
    }

    /// `⟨ω, φ⟩`.
    pub fn pairing(omega: Density) -> Self {
        Self::kernel(RegularKernel { omega, terms: vec![] })
    }

    /// `exp(⟨ω, φ⟩)`.
    pub fn exp_pairing(omega: Density) -> Self {
        Self::compose(OuterMap::Exp { scale: 1.0 }, vec![Self::pairing(omega)]).expect("arity 1")
    }

    pub fn sum(terms: Vec<Functional>) -> Self {
        Self::wrap(Kind::Sum(terms))
    }

    pub fn add(&self, o: &Functional) -> Self {
        Self::sum(vec![self.clone(), o.clone()])
    }

    pub fn sub(&self, o: &Functional) -> Self {
        Self::sum(vec![self.clone(), o.scale(-1.0)])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::wrap(Kind::ScalarMul(Complex64::new(s, 0.0), self.clone()))
    }

    pub fn scale_complex(&self, z: Complex64) -> Self {
        Self::wrap(Kind::ScalarMul(z, self.clone()))
    }

    pub fn mul(&self, o: &Functional) -> Self {
        Self::wrap(Kind::Product(self.clone(), o.clone()))
    }

    pub fn compose(psi: OuterMap, args: Vec<Functional>) -> Result<Self> {
        psi.validate(args.len())?;
        Ok(Self::wrap(Kind::Compose(psi, args)))
    }

    /// `φ ↦ F(m·φ)`.
    pub fn cutoff(&self, m: FieldConfig) -> Self {
        Self::wrap(Kind::Cutoff(m, self.clone()))
    }

    pub fn sup_norm(set: NodeSet) -> Result<Self> {
        if set.is_empty() {
            return Err(LabError::InvalidInput("sup norm over an empty set".into()));
        }
        Ok(Self::wrap(Kind::SupNorm(set)))
    }

    fn rebuild(&self, domain: Option<Domain>, declared: Option<NodeSet>) -> Self {
        let kind = match &self.0.kind {
            Kind::Constant(c) => Kind::Constant(*c),
            Kind::Local(t) => Kind::Local(t.clone()),
            Kind::Quadratic(q) => Kind::Quadratic(q.clone()),
            Kind::Kernel(k) => Kind::Kernel(k.clone()),
            Kind::Sum(v) => Kind::Sum(v.clone()),
            Kind::ScalarMul(z, f) => Kind::ScalarMul(*z, f.clone()),
            Kind::Product(a, b) => Kind::Product(a.clone(), b.clone()),
            Kind::Compose(m, v) => Kind::Compose(m.clone(), v.clone()),
            Kind::SupNorm(s) => Kind::SupNorm(s.clone()),
            Kind::Cutoff(m, f) => Kind::Cutoff(m.clone(), f.clone()),
        };
        Functional(Arc::new(Node { kind, domain, declared }))
    }

    pub fn with_domain(&self, domain: Domain) -> Self {
        self.rebuild(Some(domain), self.0.declared.clone())
    }

    pub fn with_declared_support(&self, set: NodeSet) -> Self {
        self.rebuild(self.0.domain.clone(), Some(set))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn domain(&self) -> Option<&Domain> {
        self.0.domain.as_ref()
    }

    pub fn declared_support(&self) -> Option<&NodeSet> {
        self.0.declared.as_ref()
    }

    pub(crate) fn children(&self) -> Vec<&Functional> {
        match &self.0.kind {
            Kind::Sum(v) | Kind::Compose(_, v) => v.iter().collect(),
            Kind::ScalarMul(_, f) | Kind::Cutoff(_, f) => vec![f],
            Kind::Product(a, b) => vec![a, b],
            _ => vec![],
        }
    }

    /// Whether every domain restriction in the tree admits `phi`.
    pub fn admits(&self, phi: &[f64]) -> bool {
        self.0.domain.as_ref().is_none_or(|d| d.contains(phi)) && self.children().iter().all(|c| c.admits(phi))
    }

    fn check_domain(&self, phi: &[f64]) -> Result<()> {
        if self.admits(phi) {
            Ok(())
        } else {
            Err(LabError::OutsideDomain(self.describe()))
        }
    }

    pub fn is_real(&self) -> bool {
        match &self.0.kind {
            Kind::ScalarMul(z, f) => z.im == 0.0 && f.is_real(),
            _ => self.children().iter().all(|c| c.is_real()),
        }
    }

    /// `F*`: conjugates every complex scalar.
    pub fn involution(&self) -> Self {
        let kind = match &self.0.kind {
            Kind::Sum(v) => Kind::Sum(v.iter().map(Functional::involution).collect()),
            Kind::ScalarMul(z, f) => Kind::ScalarMul(z.conj(), f.involution()),
            Kind::Product(a, b) => Kind::Product(a.involution(), b.involution()),
            Kind::Compose(m, v) => Kind::Compose(m.clone(), v.iter().map(Functional::involution).collect()),
            Kind::Cutoff(m, f) => Kind::Cutoff(m.clone(), f.involution()),
            _ => return self.clone(),
        };
        Functional(Arc::new(Node { kind, domain: self.0.domain.clone(), declared: self.0.declared.clone() }))
    }

    pub fn describe(&self) -> String {
        match &self.0.kind {
            Kind::Constant(c) => format!("const({c})"),
            Kind::Local(t) => format!("local[{}]", t.density.name()),
            Kind::Quadratic(q) => format!("sobolev_sq(k={})", q.k),
            Kind::Kernel(k) if k.terms.is_empty() => "pairing".into(),
            Kind::Kernel(_) => "regular-kernel".into(),
            Kind::Sum(v) => format!("({})", v.iter().map(|f| f.describe()).collect::<Vec<_>>().join(" + ")),
            Kind::ScalarMul(z, f) if z.im == 0.0 => format!("{}·{}", z.re, f.describe()),
            Kind::ScalarMul(z, f) => format!("({z})·{}", f.describe()),
            Kind::Product(a, b) => format!("{}·{}", a.describe(), b.describe()),
            Kind::Compose(m, v) => {
                format!("{}({})", m.name(), v.iter().map(|f| f.describe()).collect::<Vec<_>>().join(", "))
            }
            Kind::SupNorm(_) => "sup_norm".into(),
            Kind::Cutoff(_, f) => format!("{}∘cutoff", f.describe()),
        }
    }

    /// Whether derivatives exist (no sup-norm nodes).
    pub fn is_differentiable(&self) -> bool {
        !matches!(self.0.kind, Kind::SupNorm(_)) && self.children().iter().all(|c| c.is_differentiable())
    }

    /// Nodes outside which the gradient vanishes by construction.
    pub fn structural_support(&self, lat: Lattice) -> NodeSet {
        let own = match &self.0.kind {
            Kind::Constant(_) => NodeSet::empty(lat),
            Kind::Local(t) => t.structural_support(),
            Kind::Quadratic(q) => q.structural_support(),
            Kind::Kernel(k) => k.structural_support(),
            Kind::SupNorm(s) => s.clone(),
            Kind::Cutoff(m, f) => f.structural_support(lat).intersection(&m.nonzero_set()),
            _ => self
                .children()
                .iter()
                .fold(NodeSet::empty(lat), |acc, c| acc.union(&c.structural_support(lat))),
        };
        match &self.0.declared {
            Some(d) => own.intersection(d),
            None => own,
        }
    }

    // ---- evaluation ----

    pub fn value(&self, phi: &FieldConfig) -> Result<f64> {
        self.value_raw(&phi.values)
    }

    pub fn value_raw(&self, phi: &[f64]) -> Result<f64> {
        self.check_domain(phi)?;
        self.val(phi)
    }

    fn val(&self, phi: &[f64]) -> Result<f64> {
        Ok(match &self.0.kind {
            Kind::Constant(c) => *c,
            Kind::Local(t) => {
                check_len(t.st.lattice.len(), phi)?;
                t.value(phi)
            }
            Kind::Quadratic(q) => {
                check_len(q.lat().len(), phi)?;
                q.table(phi, &[])[0]
            }
            Kind::Kernel(k) => {
                check_len(k.omega.lattice.len(), phi)?;
                k.table(phi, &[])[0]
            }
            Kind::Sum(v) => {
                let mut s = 0.0;
                for f in v {
                    s += f.val(phi)?;
                }
                s
            }
            Kind::ScalarMul(z, f) => {
                if z.im != 0.0 {
                    return Err(LabError::ComplexValued);
                }
                z.re * f.val(phi)?
            }
            Kind::Product(a, b) => a.val(phi)? * b.val(phi)?,
            Kind::Compose(m, v) => {
                let y = v.iter().map(|f| f.val(phi)).collect::<Result<Vec<_>>>()?;
                m.value(&y)
            }
            Kind::SupNorm(s) => s.iter().map(|n| phi[n].abs()).fold(0.0, f64::max),
            Kind::Cutoff(m, f) => f.val(&mul(m, phi)?)?,
        })
    }

    /// Value allowing complex scalar multiples.
    pub fn evaluate_complex(&self, phi: &FieldConfig) -> Result<Complex64> {
        self.check_domain(&phi.values)?;
        self.cval(&phi.values)
    }

    fn cval(&self, phi: &[f64]) -> Result<Complex64> {
        Ok(match &self.0.kind {
            Kind::Sum(v) => {
                let mut s = Complex64::new(0.0, 0.0);
                for f in v {
                    s += f.cval(phi)?;
                }
                s
            }
            Kind::ScalarMul(z, f) => z * f.cval(phi)?,
            Kind::Product(a, b) => a.cval(phi)? * b.cval(phi)?,
            Kind::Compose(_, v) if !v.iter().all(|f| f.is_real()) => return Err(LabError::ComplexValued),
            Kind::Cutoff(m, f) => f.cval(&mul(m, phi)?)?,
            _ => Complex64::new(self.val(phi)?, 0.0),
        })
    }

    /// `F^{(k)}[φ](dirs)` for `k ≤ 3`.
    pub fn derivative(&self, phi: &FieldConfig, dirs: &[&FieldConfig]) -> Result<f64> {
        let d: Vec<&[f64]> = dirs.iter().map(|f| f.values.as_slice()).collect();
        let t = self.table_raw(&phi.values, &d)?;
        Ok(t[t.len() - 1])
    }

    /// All mixed derivatives `D^{|B|}F[φ](v_B)` indexed by subset mask `B`.
    pub fn table_raw(&self, phi: &[f64], dirs: &[&[f64]]) -> Result<Vec<f64>> {
        if dirs.len() > 3 {
            return Err(LabError::UnsupportedOrder(dirs.len()));
        }
        for d in dirs {
            check_len(phi.len(), d)?;
        }
        self.check_domain(phi)?;
        self.tab(phi, dirs)
    }

    fn tab(&self, phi: &[f64], dirs: &[&[f64]]) -> Result<Vec<f64>> {
        let k = dirs.len();
        let size = 1usize << k;
        Ok(match &self.0.kind {
            Kind::Constant(c) => {
                let mut v = vec![0.0; size];
                v[0] = *c;
                v
            }
            Kind::Local(t) => {
                check_len(t.st.lattice.len(), phi)?;
                t.table(phi, dirs)
            }
            Kind::Quadratic(q) => {
                check_len(q.lat().len(), phi)?;
                q.table(phi, dirs)
            }
            Kind::Kernel(kr) => {
                check_len(kr.omega.lattice.len(), phi)?;
                kr.table(phi, dirs)
            }
            Kind::Sum(v) => {
                let mut out = vec![0.0; size];
                for f in v {
                    for (o, x) in out.iter_mut().zip(f.tab(phi, dirs)?) {
                        *o += x;
                    }
                }
                out
            }
            Kind::ScalarMul(z, f) => {
                if z.im != 0.0 {
                    return Err(LabError::ComplexValued);
                }
                f.tab(phi, dirs)?.iter().map(|x| z.re * x).collect()
            }
            Kind::Product(a, b) => {
                let (ta, tb) = (a.tab(phi, dirs)?, b.tab(phi, dirs)?);
                (0..size)
                    .map(|mask| {
                        // Leibniz: sum over sub-masks.
                        let mut s = 0.0;
                        let mut sub = mask;
                        loop {
                            s += ta[sub] * tb[mask & !sub];
                            if sub == 0 {
                                break;
                            }
                            sub = (sub - 1) & mask;
                        }
                        s
                    })
                    .collect()
            }
            Kind::Compose(m, v) => {
                let tabs = v.iter().map(|f| f.tab(phi, dirs)).collect::<Result<Vec<_>>>()?;
                let y: Vec<f64> = tabs.iter().map(|t| t[0]).collect();
                let jet = m.jet(&y);
                let n = v.len();
                let mut out = vec![0.0; size];
                out[0] = jet.v;
                for (mask, o) in out.iter_mut().enumerate().skip(1) {
                    // Faà di Bruno over set partitions of the mask.
                    for part in set_partitions(mask) {
                        let p = part.len();
                        let mut idx = vec![0usize; p];
                        loop {
                            let prod: f64 = part.iter().zip(&idx).map(|(blk, &i)| tabs[i][*blk]).product();
                            if prod != 0.0 {
                                *o += jet.partial(&idx) * prod;
                            }
                            let mut c = 0;
                            while c < p {
                                idx[c] += 1;
                                if idx[c] < n {
                                    break;
                                }
                                idx[c] = 0;
                                c += 1;
                            }
                            if c == p {
                                break;
                            }
                        }
                    }
                }
                out
            }
            Kind::SupNorm(_) => {
                if k > 0 {
                    return Err(LabError::NotDifferentiable("sup norm".into()));
                }
                vec![self.val(phi)?]
            }
            Kind::Cutoff(m, f) => {
                let md: Vec<Vec<f64>> = dirs.iter().map(|d| mul(m, d)).collect::<Result<_>>()?;
                let refs: Vec<&[f64]> = md.iter().map(|v| v.as_slice()).collect();
                f.tab(&mul(m, phi)?, &refs)?
            }
        })
    }

    /// Riesz representative of `F′[φ]` with respect to `pair`.
    pub fn gradient(&self, phi: &FieldConfig) -> Result<Density> {
        let g = self.gradient_raw(&phi.values)?;
        Density::from_vec(phi.lattice, g)
    }

    pub fn gradient_raw(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(phi)?;
        self.grad(phi)
    }

    fn grad(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let n = phi.len();
        Ok(match &self.0.kind {
            Kind::Constant(_) => vec![0.0; n],
            Kind::Local(t) => {
                check_len(t.st.lattice.len(), phi)?;
                t.gradient(phi)
            }
            Kind::Quadratic(q) => {
                check_len(q.lat().len(), phi)?;
                q.gradient(phi)
            }
            Kind::Kernel(k) => {
                check_len(k.omega.lattice.len(), phi)?;
                k.gradient(phi)
            }
            Kind::Sum(v) => {
                let mut out = vec![0.0; n];
                for f in v {
                    axpy(&mut out, 1.0, &f.grad(phi)?);
                }
                out
            }
            Kind::ScalarMul(z, f) => {
                if z.im != 0.0 {
                    return Err(LabError::ComplexValued);
                }
                f.grad(phi)?.iter().map(|x| z.re * x).collect()
            }
            Kind::Product(a, b) => {
                let mut out = vec![0.0; n];
                axpy(&mut out, b.val(phi)?, &a.grad(phi)?);
                axpy(&mut out, a.val(phi)?, &b.grad(phi)?);
                out
            }
            Kind::Compose(m, v) => {
                let y = v.iter().map(|f| f.val(phi)).collect::<Result<Vec<_>>>()?;
                let jet = m.jet(&y);
                let mut out = vec![0.0; n];
                for (i, f) in v.iter().enumerate() {
                    if jet.d1[i] != 0.0 {
                        axpy(&mut out, jet.d1[i], &f.grad(phi)?);
                    }
                }
                out
            }
            Kind::SupNorm(_) => return Err(LabError::NotDifferentiable("sup norm".into())),
            Kind::Cutoff(m, f) => mul(m, &f.grad(&mul(m, phi)?)?)?,
        })
    }

    /// Riesz representative of `F″[φ](v, ·)`.
    pub fn hess_vec(&self, phi: &FieldConfig, v: &FieldConfig) -> Result<Density> {
        let h = self.hess_vec_raw(&phi.values, &v.values)?;
        Density::from_vec(phi.lattice, h)
    }

    pub fn hess_vec_raw(&self, phi: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_len(phi.len(), v)?;
        self.check_domain(phi)?;
        self.hvp(phi, v)
    }

    fn hvp(&self, phi: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let n = phi.len();
        Ok(match &self.0.kind {
            Kind::Constant(_) => vec![0.0; n],
            Kind::Local(t) => {
                check_len(t.st.lattice.len(), phi)?;
                t.hess_vec(phi, v)
            }
            Kind::Quadratic(q) => {
                check_len(q.lat().len(), phi)?;
                q.hess_vec(v)
            }
            Kind::Kernel(k) => {
                check_len(k.omega.lattice.len(), phi)?;
                k.hess_vec(v)
            }
            Kind::Sum(fs) => {
                let mut out = vec![0.0; n];
                for f in fs {
                    axpy(&mut out, 1.0, &f.hvp(phi, v)?);
                }
                out
            }
            Kind::ScalarMul(z, f) => {
                if z.im != 0.0 {
                    return Err(LabError::ComplexValued);
                }
                f.hvp(phi, v)?.iter().map(|x| z.re * x).collect()
            }
            Kind::Product(a, b) => {
                let area = self.area_hint(phi)?;
                let (ga, gb) = (a.grad(phi)?, b.grad(phi)?);
                let mut out = vec![0.0; n];
                axpy(&mut out, b.val(phi)?, &a.hvp(phi, v)?);
                axpy(&mut out, a.val(phi)?, &b.hvp(phi, v)?);
                axpy(&mut out, pair_raw(&gb, v) * area, &ga);
                axpy(&mut out, pair_raw(&ga, v) * area, &gb);
                out
            }
            Kind::Compose(m, fs) => {
                let area = self.area_hint(phi)?;
                let y = fs.iter().map(|f| f.val(phi)).collect::<Result<Vec<_>>>()?;
                let jet = m.jet(&y);
                let k = fs.len();
                let grads = fs.iter().map(|f| f.grad(phi)).collect::<Result<Vec<_>>>()?;
                let gv: Vec<f64> = grads.iter().map(|g| pair_raw(g, v) * area).collect();
                let mut out = vec![0.0; n];
                for i in 0..k {
                    if jet.d1[i] != 0.0 {
                        axpy(&mut out, jet.d1[i], &fs[i].hvp(phi, v)?);
                    }
                    let c: f64 = (0..k).map(|j| jet.d2[i * k + j] * gv[j]).sum();
                    if c != 0.0 {
                        axpy(&mut out, c, &grads[i]);
                    }
                }
                out
            }
            Kind::SupNorm(_) => return Err(LabError::NotDifferentiable("sup norm".into())),
            Kind::Cutoff(m, f) => mul(m, &f.hvp(&mul(m, phi)?, &mul(m, v)?)?)?,
        })
    }

    /// Cell area of the first lattice found in the tree (1 for lattice-free trees, whose
    /// gradients vanish anyway).
    fn area_hint(&self, _phi: &[f64]) -> Result<f64> {
        Ok(self.lattice().map_or(1.0, |l| l.cell_area()))
    }

    /// Lattice of the first grid-carrying node.
    pub fn lattice(&self) -> Option<Lattice> {
        match &self.0.kind {
            Kind::Local(t) => Some(t.st.lattice),
            Kind::Quadratic(q) => Some(q.lat()),
            Kind::Kernel(k) => Some(k.omega.lattice),
            Kind::SupNorm(s) => Some(s.lattice),
            Kind::Cutoff(m, _) => Some(m.lattice),
            Kind::Constant(_) => None,
            _ => self.children().iter().find_map(|c| c.lattice()),
        }
    }
}

fn mul(m: &FieldConfig, v: &[f64]) -> Result<Vec<f64>> {
    check_len(m.values.len(), v)?;
    Ok(m.values.iter().zip(v).map(|(a, b)| a * b).collect())
}

#[inline]
pub(crate) fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::pair;
    use crate::geometry::Sym2;

    fn setup() -> (Arc<GridSpacetime>, Lattice) {
        let lat = Lattice::new(10, 12, 0.2, 0.25).unwrap();
        let st = GridSpacetime::from_fn(lat, |t, x| Sym2::new(-1.0 - 0.1 * t, 0.05 * x.sin(), 1.0 + 0.1 * x.cos()))
            .unwrap();
        (Arc::new(st), lat)
    }

    fn field(lat: Lattice, a: f64, b: f64) -> FieldConfig {
        FieldConfig::from_fn(lat, |t, x| a * (1.3 * t + 2.0 * x).sin() + b * (x - t).cos())
    }

    fn catalogue(st: &Arc<GridSpacetime>, lat: Lattice) -> Vec<Functional> {
        let f = TestFunction::smooth_box(lat, 3, 6, 6, 2, 2);
        let loc = Functional::local_density(st, f.clone(), Arc::new(ExampleDensity { eps: 0.2, mass2: 0.3 })).unwrap();
        let lin = Functional::linear(st, &f).unwrap();
        let q = Functional::sobolev_sq(f.clone(), 2, None).unwrap();
        let cub = Functional::local_density(st, f.clone(), Arc::new(CubicDensity { a: 0.1, b: 0.4, c: -0.3 })).unwrap();
        let ex = Functional::exp_pairing(to_omega(st, &f).scale(0.3));
        vec![
            loc.clone(),
            lin.clone(),
            q.clone(),
            ex.clone(),
            loc.mul(&lin),
            Functional::compose(OuterMap::Tanh, vec![cub.clone()]).unwrap(),
            Functional::compose(OuterMap::Ratio { index: 0 }, vec![ex.clone(), q.add(&Functional::constant(1.0))]).unwrap(),
            cub.add(&q.scale(-0.5)).mul(&ex),
        ]
    }

    fn to_omega(st: &GridSpacetime, f: &TestFunction) -> Density {
        crate::fields::to_density(st, &f.field).unwrap()
    }

    #[test]
    fn linear_functional_basics() {
        let (st, lat) = setup();
        let f = TestFunction::smooth_box(lat, 3, 5, 6, 1, 2).normalized(&st).unwrap();
        let g = Functional::linear(&st, &f).unwrap();
        assert!((g.value(&FieldConfig::constant(lat, 2.5)).unwrap() - 2.5).abs() < 1e-13);
        let phi = field(lat, 1.0, 0.5);
        let v = field(lat, -0.3, 1.0);
        let d1 = g.derivative(&phi, &[&v]).unwrap();
        assert!((d1 - pair(&to_omega(&st, &f), &v).unwrap()).abs() < 1e-14);
        assert_eq!(g.derivative(&phi, &[&v, &v]).unwrap(), 0.0);
        let u = FieldConfig::zeros(lat);
        assert!(matches!(g.derivative(&phi, &[&u, &u, &u, &u]), Err(LabError::UnsupportedOrder(4))));
    }

    #[test]
    fn sup_norm_functional() {
        let (_, lat) = setup();
        let k = NodeSet::from_nodes(lat, &[(2, 2), (3, 3)]).unwrap();
        let f = Functional::sup_norm(k).unwrap();
        assert_eq!(f.value(&FieldConfig::constant(lat, -3.0)).unwrap(), 3.0);
        assert!(f.gradient(&FieldConfig::zeros(lat)).is_err());
    }

    #[test]
    fn gradient_matches_first_derivative() {
        let (st, lat) = setup();
        let phi = field(lat, 0.4, 0.2);
        for f in catalogue(&st, lat) {
            let g = f.gradient(&phi).unwrap();
            for s in 0..5 {
                let v = field(lat, 0.3 + s as f64, -0.7 * s as f64);
                let a = pair(&g, &v).unwrap();
                let b = f.derivative(&phi, &[&v]).unwrap();
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-3), "{}: {a} vs {b}", f.describe());
            }
        }
    }

    #[test]
    fn hess_vec_matches_second_derivative() {
        let (st, lat) = setup();
        let phi = field(lat, 0.4, 0.2);
        let a = field(lat, 1.0, -0.5);
        let b = field(lat, -0.2, 0.9);
        for f in catalogue(&st, lat) {
            let h = pair(&f.hess_vec(&phi, &a).unwrap(), &b).unwrap();
            let d = f.derivative(&phi, &[&a, &b]).unwrap();
            assert!((h - d).abs() <= 1e-11 * d.abs().max(1e-3), "{}: {h} vs {d}", f.describe());
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let (st, lat) = setup();
        let phi = field(lat, 0.4, 0.2);
        let a = field(lat, 1.0, -0.5);
        let b = field(lat, -0.2, 0.9);
        let c = field(lat, 0.6, 0.1);
        for f in catalogue(&st, lat) {
            let t = f.table_raw(&phi.values, &[&a.values, &b.values, &c.values]).unwrap();
            let errs: Vec<f64> = [1e-3, 5e-4]
                .iter()
                .map(|&h| {
                    let p = phi.axpy(h, &c);
                    let m = phi.axpy(-h, &c);
                    let tp = f.table_raw(&p.values, &[&a.values, &b.values]).unwrap();
                    let tm = f.table_raw(&m.values, &[&a.values, &b.values]).unwrap();
                    ((tp[3] - tm[3]) / (2.0 * h) - t[7]).abs()
                })
                .collect();
            let scale = t[7].abs().max(1e-6);
            assert!(errs[1] <= 1e-4 * scale || errs[1] < 0.3 * errs[0], "{}: {errs:?}", f.describe());
        }
    }

    #[test]
    fn mixed_derivatives_are_symmetric() {
        let (st, lat) = setup();
        let phi = field(lat, 0.4, 0.2);
        let d = [field(lat, 1.0, -0.5), field(lat, -0.2, 0.9), field(lat, 0.6, 0.1)];
        for f in catalogue(&st, lat) {
            let base = f.derivative(&phi, &[&d[0], &d[1], &d[2]]).unwrap();
            for p in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let v = f.derivative(&phi, &[&d[p[0]], &d[p[1]], &d[p[2]]]).unwrap();
                assert!((v - base).abs() <= 1e-12 * base.abs().max(1e-6), "{}", f.describe());
            }
            let ab = f.derivative(&phi, &[&d[0], &d[1]]).unwrap();
            let ba = f.derivative(&phi, &[&d[1], &d[0]]).unwrap();
            assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1e-6));
        }
    }

    #[test]
    fn chain_rule_scalar_case() {
        let (st, lat) = setup();
        let f = TestFunction::smooth_box(lat, 3, 6, 6, 2, 2);
        let inner = Functional::local_density(&st, f, Arc::new(ExampleDensity { eps: 0.2, mass2: 0.3 })).unwrap();
        let outer = Functional::compose(OuterMap::Tanh, vec![inner.clone()]).unwrap();
        let phi = field(lat, 0.4, 0.2);
        let (a, b) = (field(lat, 1.0, -0.5), field(lat, -0.2, 0.9));
        let ti = inner.table_raw(&phi.values, &[&a.values, &b.values]).unwrap();
        let j = OuterMap::Tanh.jet(&[ti[0]]);
        let want = j.d2[0] * ti[1] * ti[2] + j.d1[0] * ti[3];
        let got = outer.derivative(&phi, &[&a, &b]).unwrap();
        assert!((got - want).abs() < 1e-14 * want.abs().max(1.0));
    }

    #[test]
    fn identity_composition_agrees() {
        let (st, lat) = setup();
        for f in catalogue(&st, lat) {
            let id = Functional::compose(OuterMap::Linear { coeffs: vec![1.0] }, vec![f.clone()]).unwrap();
            let phi = field(lat, 0.1, 0.3);
            assert_eq!(id.value(&phi).unwrap(), f.value(&phi).unwrap());
        }
    }

    #[test]
    fn set_partition_counts_are_bell_numbers() {
        assert_eq!(set_partitions(0b1).len(), 1);
        assert_eq!(set_partitions(0b11).len(), 2);
        assert_eq!(set_partitions(0b111).len(), 5);
        assert_eq!(set_partitions(0b1111).len(), 15);
    }

    #[test]
    fn involution_conjugates_scalars() {
        let (st, lat) = setup();
        let f = Functional::linear(&st, &TestFunction::smooth_box(lat, 3, 5, 6, 1, 2)).unwrap();
        let g = Functional::sobolev_sq(TestFunction::smooth_box(lat, 2, 4, 3, 1, 1), 1, None).unwrap();
        let z = Complex64::new(0.3, -1.2);
        let w = Complex64::new(-0.7, 0.4);
        let phi = field(lat, 0.5, 0.5);
        let h = f.scale_complex(z).mul(&g.scale_complex(w)).add(&f.scale_complex(w));
        let lhs = h.involution().evaluate_complex(&phi).unwrap();
        let rhs = h.evaluate_complex(&phi).unwrap().conj();
        assert!((lhs - rhs).norm() < 1e-14);
        assert!(matches!(h.value(&phi), Err(LabError::ComplexValued)));
        assert!(f.scale_complex(Complex64::new(2.0, 0.0)).value(&phi).is_ok());
    }

    #[test]
    fn domain_violation_is_reported() {
        let (st, lat) = setup();
        let f = TestFunction::smooth_box(lat, 3, 5, 6, 1, 2);
        let set = f.support();
        let g = Functional::linear(&st, &f).unwrap().with_domain(Domain::SupBall { set, radius: 1.0 });
        assert!(g.value(&FieldConfig::constant(lat, 0.5)).is_ok());
        assert!(matches!(g.value(&FieldConfig::constant(lat, 1.5)), Err(LabError::OutsideDomain(_))));
    }
}
