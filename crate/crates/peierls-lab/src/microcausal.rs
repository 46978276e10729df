//! Wave-front cone labels: the microcausal set Υ, its closed exhaustion Γ_{k,m}, conormal
//! checks for local functionals and the tensor-product label rule.

use crate::error::{LabError, Result};
use crate::functionals::{Functional, Kind};
use crate::geometry::{GridSpacetime, Sym2};
use crate::tolerances::NULL_REL;
use serde::Serialize;
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Zero,
    FutureCausal,
    PastCausal,
    Spacelike,
}

/// Covectors `ξ_j = (ξ_t, ξ_x)` attached to nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorTuple {
    pub nodes: Vec<usize>,
    pub xi: Vec<[f64; 2]>,
}

impl CovectorTuple {
    pub fn new(nodes: Vec<usize>, xi: Vec<[f64; 2]>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != xi.len() {
            return Err(LabError::InvalidInput("a covector tuple needs k ≥ 1 matching nodes and covectors".into()));
        }
        if xi.iter().all(|x| x[0] == 0.0 && x[1] == 0.0) {
            return Err(LabError::InvalidInput("all-zero covector tuple".into()));
        }
        Ok(Self { nodes, xi })
    }

    /// All covectors at one node.
    pub fn at_node(node: usize, xi: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(vec![node; xi.len()], xi)
    }

    pub fn k(&self) -> usize {
        self.xi.len()
    }

    pub fn scaled(&self, s: &[f64]) -> Self {
        let xi = self.xi.iter().zip(s).map(|(x, c)| [x[0] * c, x[1] * c]).collect();
        Self { nodes: self.nodes.clone(), xi }
    }
}

/// `ξ(n)` for the future unit normal `n`.
fn along_normal(st: &GridSpacetime, node: usize, xi: &[f64; 2]) -> f64 {
    let (nt, nx) = st.future_normal(node);
    xi[0] * nt + xi[1] * nx
}

/// Classify a covector against the closed cones of `g` at `node`.
pub fn label(st: &GridSpacetime, node: usize, xi: &[f64; 2]) -> Label {
    if xi[0] == 0.0 && xi[1] == 0.0 {
        return Label::Zero;
    }
    let q = st.inv(node).quad(xi[0], xi[1]);
    if q > NULL_REL * (xi[0] * xi[0] + xi[1] * xi[1]) {
        Label::Spacelike
    } else if along_normal(st, node, xi) > 0.0 {
        Label::FutureCausal
    } else {
        Label::PastCausal
    }
}

/// Microcausality of a label tuple; the zero label belongs to both closed cones.
pub fn upsilon_labels(labels: &[Label]) -> bool {
    let in_cone = |c: Label| labels.iter().all(|l| *l == c || *l == Label::Zero);
    !in_cone(Label::FutureCausal) && !in_cone(Label::PastCausal)
}

pub fn in_upsilon(st: &GridSpacetime, tuple: &CovectorTuple) -> Result<bool> {
    CovectorTuple::new(tuple.nodes.clone(), tuple.xi.clone())?;
    let labels: Vec<Label> = tuple.nodes.iter().zip(&tuple.xi).map(|(n, x)| label(st, *n, x)).collect();
    Ok(upsilon_labels(&labels))
}

/// `G_{ε_m} = g⁻¹ − ε_m·n⊗n` on covectors with `ε_m = ε₀·2^{−m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeFamily {
    pub eps0: f64,
}

impl Default for ConeFamily {
    fn default() -> Self {
        Self { eps0: 1.0 }
    }
}

impl ConeFamily {
    pub fn new(eps0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(LabError::InvalidInput(format!("cone family needs ε₀ > 0, got {eps0}")));
        }
        Ok(Self { eps0 })
    }

    pub fn eps(&self, m: usize) -> f64 {
        self.eps0 * 0.5f64.powi(m as i32)
    }

    pub fn covector_metric(&self, st: &GridSpacetime, node: usize, m: usize) -> Sym2 {
        let (a, b) = st.future_normal(node);
        let e = self.eps(m);
        st.inv(node).add(&Sym2::new(-e * a * a, -e * a * b, -e * b * b))
    }

    /// `ξ ≠ 0` outside the open `G_{ε_m}` cones.
    pub fn outside(&self, st: &GridSpacetime, node: usize, xi: &[f64; 2], m: usize) -> bool {
        !(xi[0] == 0.0 && xi[1] == 0.0) && self.covector_metric(st, node, m).quad(xi[0], xi[1]) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaType {
    A,
    B,
    C,
}

fn both_causal_present(labels: &[Label]) -> bool {
    labels.contains(&Label::FutureCausal) && labels.contains(&Label::PastCausal)
}

/// Membership in `Γ_{k,m}` and the type of a witnessing component.
pub fn in_gamma(st: &GridSpacetime, family: &ConeFamily, tuple: &CovectorTuple, m: usize) -> Result<Option<OmegaType>> {
    CovectorTuple::new(tuple.nodes.clone(), tuple.xi.clone())?;
    let labels: Vec<Label> = tuple.nodes.iter().zip(&tuple.xi).map(|(n, x)| label(st, *n, x)).collect();
    let causal_or_zero = |l: &Label| *l != Label::Spacelike;
    // Slots in the type-(a) product: either outside the ε_m cones or in the closed g-cones.
    let a_ok = labels.iter().zip(tuple.nodes.iter().zip(&tuple.xi)).all(|(l, (n, x))| {
        causal_or_zero(l) || family.outside(st, *n, x, m)
    });
    if a_ok && labels.contains(&Label::Spacelike) {
        return Ok(Some(OmegaType::A));
    }
    if labels.iter().all(|l| matches!(l, Label::FutureCausal | Label::PastCausal)) && both_causal_present(&labels) {
        return Ok(Some(OmegaType::B));
    }
    if labels.contains(&Label::Zero) && labels.iter().all(causal_or_zero) && both_causal_present(&labels) {
        return Ok(Some(OmegaType::C));
    }
    Ok(None)
}

/// Smallest `m ≤ m_max` with the tuple in `Γ_{k,m}`.
pub fn exhaustion_index(st: &GridSpacetime, family: &ConeFamily, tuple: &CovectorTuple, m_max: usize) -> Result<Option<usize>> {
    for m in 0..=m_max {
        if in_gamma(st, family, tuple, m)?.is_some() {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OmegaCounts {
    pub k: usize,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub total: u64,
    pub enumerated: [u64; 3],
    pub matches: bool,
}

/// Per-slot component alphabet of the Ω products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// Complement of both closed cones.
    Spacelike,
    /// Union of both closed cones.
    Causal,
    Future,
    Past,
    Zero,
}

fn classify_omega(slots: &[Slot]) -> Option<OmegaType> {
    let has = |s: Slot| slots.contains(&s);
    let only = |set: &[Slot]| slots.iter().all(|s| set.contains(s));
    if only(&[Slot::Spacelike, Slot::Causal]) && has(Slot::Spacelike) {
        Some(OmegaType::A)
    } else if only(&[Slot::Future, Slot::Past]) && has(Slot::Future) && has(Slot::Past) {
        Some(OmegaType::B)
    } else if only(&[Slot::Future, Slot::Past, Slot::Zero]) && has(Slot::Zero) && has(Slot::Future) && has(Slot::Past) {
        Some(OmegaType::C)
    } else {
        None
    }
}

/// Closed-form counts of the Ω components cross-checked against all `5^k` slot words.
pub fn omega_counts(k: usize) -> Result<OmegaCounts> {
    if !(1..=8).contains(&k) {
        return Err(LabError::InvalidInput(format!("omega counts cover 1 ≤ k ≤ 8, got {k}")));
    }
    let (p2, p3) = (2u64.pow(k as u32), 3u64.pow(k as u32));
    let (a, b, c) = (p2 - 1, p2 - 2, p3 + 3 - 3 * p2);
    let alphabet = [Slot::Spacelike, Slot::Causal, Slot::Future, Slot::Past, Slot::Zero];
    let mut enumerated = [0u64; 3];
    let mut word = vec![Slot::Zero; k];
    for code in 0..5usize.pow(k as u32) {
        let mut c = code;
        for s in word.iter_mut() {
            *s = alphabet[c % 5];
            c /= 5;
        }
        match classify_omega(&word) {
            Some(OmegaType::A) => enumerated[0] += 1,
            Some(OmegaType::B) => enumerated[1] += 1,
            Some(OmegaType::C) => enumerated[2] += 1,
            None => {}
        }
    }
    let total = p3 - p2;
    let matches = enumerated == [a, b, c] && a + b + c == total;
    Ok(OmegaCounts { k, a, b, c, total, enumerated, matches })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConormalClass {
    Local,
    Regular,
    NonlocalProduct,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConormalReport {
    pub class: ConormalClass,
    pub tuples_checked: usize,
    pub pass: bool,
}

fn is_regular(f: &Functional) -> bool {
    match f.kind() {
        Kind::Constant(_) | Kind::Kernel(_) => true,
        Kind::Sum(v) => v.iter().all(is_regular),
        Kind::ScalarMul(_, g) => is_regular(g),
        Kind::Product(a, b) => is_regular(a) && is_regular(b),
        Kind::Compose(_, v) => v.iter().all(is_regular),
        _ => false,
    }
}

/// Conormal directions of the second derivative lie in Υ: `(ξ,−ξ)` on the diagonal for local
/// functionals, plus the `(ξ,−ξ,0)` tensor terms for products of locals.
pub fn check_conormal_local(st: &GridSpacetime, f: &Functional, node: usize, samples: &[[f64; 2]]) -> Result<ConormalReport> {
    if is_regular(f) {
        return Ok(ConormalReport { class: ConormalClass::Regular, tuples_checked: 0, pass: true });
    }
    let class = if f.has_product_of_nonconstants() || matches!(f.kind(), Kind::Compose(..)) {
        ConormalClass::NonlocalProduct
    } else {
        ConormalClass::Local
    };
    let mut checked = 0;
    let mut pass = true;
    for xi in samples.iter().filter(|x| x[0] != 0.0 || x[1] != 0.0) {
        let neg = [-xi[0], -xi[1]];
        let mut tuples = vec![CovectorTuple::at_node(node, vec![*xi, neg])?];
        if class == ConormalClass::NonlocalProduct {
            for z in 0..3 {
                let mut v = vec![*xi, neg];
                v.insert(z, [0.0, 0.0]);
                tuples.push(CovectorTuple::at_node(node, v)?);
            }
        }
        for t in &tuples {
            checked += 1;
            pass &= in_upsilon(st, t)?;
        }
    }
    Ok(ConormalReport { class, tuples_checked: checked, pass })
}

pub type LabelSet = BTreeSet<Vec<Label>>;

/// Label words of a conormal (diagonal) bundle of order `k`: microcausal words with at
/// least two nonzero slots.
pub fn conormal_labels(k: usize) -> LabelSet {
    all_words(k).into_iter().filter(|w| upsilon_labels(w) && w.iter().filter(|l| **l != Label::Zero).count() >= 2).collect()
}

fn all_words(k: usize) -> Vec<Vec<Label>> {
    let alphabet = [Label::Zero, Label::FutureCausal, Label::PastCausal, Label::Spacelike];
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out.into_iter().flat_map(|w| alphabet.iter().map(move |l| [w.clone(), vec![*l]].concat())).collect();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductBound {
    pub labels: LabelSet,
    pub contained: bool,
    pub offending: Vec<Vec<Label>>,
}

/// `{a ++ b} ∪ {a ++ 0^l} ∪ {0^k ++ b}` for the tensor product of order-`k` and order-`l`
/// label sets, with its containment in the Υ predicate.
pub fn product_wf_bound(wf_f: &LabelSet, wf_g: &LabelSet, k: usize, l: usize) -> Result<ProductBound> {
    if wf_f.iter().any(|w| w.len() != k) || wf_g.iter().any(|w| w.len() != l) {
        return Err(LabError::InvalidInput("label word length does not match the order".into()));
    }
    let mut labels = LabelSet::new();
    for a in wf_f {
        for b in wf_g {
            labels.insert([a.clone(), b.clone()].concat());
        }
        labels.insert([a.clone(), vec![Label::Zero; l]].concat());
    }
    for b in wf_g {
        labels.insert([vec![Label::Zero; k], b.clone()].concat());
    }
    let offending: Vec<Vec<Label>> = labels.iter().filter(|w| !upsilon_labels(w)).cloned().collect();
    Ok(ProductBound { contained: offending.is_empty(), offending, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Lattice;

    fn flat() -> GridSpacetime {
        GridSpacetime::minkowski(Lattice::new(4, 4, 0.1, 0.1).unwrap())
    }

    #[test]
    fn labels_and_upsilon() {
        let st = flat();
        assert!(in_upsilon(&st, &CovectorTuple::at_node(0, vec![[0.2, 1.0]]).unwrap()).unwrap());
        assert!(!in_upsilon(&st, &CovectorTuple::at_node(0, vec![[1.0, 0.3]]).unwrap()).unwrap());
        assert!(in_upsilon(&st, &CovectorTuple::at_node(0, vec![[1.0, 0.3], [-1.0, -0.3]]).unwrap()).unwrap());
        assert!(!in_upsilon(&st, &CovectorTuple::at_node(0, vec![[1.0, 1.0], [2.0, -2.0]]).unwrap()).unwrap());
        assert!(CovectorTuple::at_node(0, vec![[0.0, 0.0]; 2]).is_err());
    }

    #[test]
    fn counts_match_enumeration() {
        let c = omega_counts(3).unwrap();
        assert_eq!((c.a, c.b, c.c, c.total), (7, 6, 6, 19));
        assert_eq!((omega_counts(1).unwrap().a, omega_counts(2).unwrap().total), (1, 5));
        assert!((1..=8).all(|k| omega_counts(k).unwrap().matches));
        assert!(omega_counts(9).is_err());
    }

    #[test]
    fn gamma_types_and_monotonicity() {
        let st = flat();
        let fam = ConeFamily::default();
        let k1 = CovectorTuple::at_node(0, vec![[0.9, 1.0]]).unwrap();
        let m = exhaustion_index(&st, &fam, &k1, 40).unwrap().unwrap();
        assert!(m > 0 && in_gamma(&st, &fam, &k1, m + 1).unwrap() == Some(OmegaType::A));
        let null = CovectorTuple::at_node(0, vec![[1.0, 1.0], [-1.0, 1.0]]).unwrap();
        assert_eq!(in_gamma(&st, &fam, &null, 0).unwrap(), Some(OmegaType::B));
        let zero = CovectorTuple::at_node(0, vec![[1.0, 0.0], [0.0, 0.0], [-2.0, 0.5]]).unwrap();
        assert_eq!(in_gamma(&st, &fam, &zero, 0).unwrap(), Some(OmegaType::C));
    }

    #[test]
    fn product_bound_predicate() {
        let spacelike: LabelSet = [vec![Label::Spacelike; 2]].into_iter().collect();
        assert!(product_wf_bound(&spacelike, &spacelike, 2, 2).unwrap().contained);
        assert!(product_wf_bound(&conormal_labels(2), &LabelSet::new(), 2, 1).unwrap().contained);
        let future: LabelSet = [vec![Label::FutureCausal; 2]].into_iter().collect();
        assert!(!product_wf_bound(&future, &future, 2, 2).unwrap().contained);
    }
}
