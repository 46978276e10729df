//! Probe-based diagnostics: space-time support, additivity, locality and small-support
//! decompositions.

use super::{Domain, Functional, Kind};
use crate::error::{LabError, Result};
use crate::fields::{FieldConfig, TestFunction};
use crate::geometry::{Lattice, NodeSet};
use crate::tolerances::{SUPPORT_FLOOR, SUPPORT_REL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

/// Chebyshev radius of the widest finite-difference stencil in the catalogue.
pub const STENCIL_RADIUS: usize = 2;

/// Seeded probe configurations: random nodal noise, smooth modes, localized bumps and a
/// scan of constants across the admissible range.
#[derive(Debug, Clone, Serialize)]
pub struct ProbePlan {
    pub seed: u64,
    pub random: usize,
    pub modes: usize,
    pub bumps: usize,
    pub constants: usize,
    pub amplitude: f64,
}

impl ProbePlan {
    pub fn new(seed: u64) -> Self {
        Self { seed, random: 6, modes: 6, bumps: 8, constants: 41, amplitude: 1.0 }
    }

    /// Largest radius `r` such that every domain in the tree admits `|φ| < r` on its set.
    fn radius(f: &Functional) -> Option<f64> {
        let own = f.domain().map(|d| match d {
            Domain::SupBall { radius, .. } => *radius,
        });
        f.children().iter().filter_map(|c| Self::radius(c)).chain(own).reduce(f64::min)
    }

    /// Probes admitted by the functional's domain (out-of-domain candidates are shrunk by
    /// halving, and dropped after 60 attempts).
    pub fn probes(&self, lat: Lattice, f: &Functional) -> (Vec<FieldConfig>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let amp = self.amplitude;
        let mut raw = Vec::new();
        for _ in 0..self.random {
            let v = (0..lat.len()).map(|_| rng.gen_range(-amp..amp)).collect();
            raw.push(FieldConfig { lattice: lat, values: v });
        }
        let (lt, lx) = ((lat.nt - 1) as f64 * lat.dt, lat.period());
        for _ in 0..self.modes {
            let (kt, kx) = (rng.gen_range(0.5..4.0), rng.gen_range(1..4) as f64);
            let (ph, a, c) = (rng.gen_range(0.0..6.3), rng.gen_range(-amp..amp), rng.gen_range(-amp..amp));
            raw.push(FieldConfig::from_fn(lat, |t, x| {
                c * 0.5 + a * (kt * std::f64::consts::PI * t / lt + 2.0 * std::f64::consts::PI * kx * x / lx + ph).sin()
            }));
        }
        for _ in 0..self.bumps {
            let (it, ix) = (rng.gen_range(0..lat.nt), rng.gen_range(0..lat.nx));
            let r = rng.gen_range(1.5..4.0);
            let a = rng.gen_range(-amp..amp);
            raw.push(TestFunction::bump(lat, it, ix, r).field.scale(a));
        }
        let cr = Self::radius(f).unwrap_or(amp);
        for j in 0..self.constants {
            let c = cr * (2.0 * (j + 1) as f64 / (self.constants + 1) as f64 - 1.0);
            raw.push(FieldConfig::constant(lat, c));
        }
        let mut out = Vec::with_capacity(raw.len());
        let mut skipped = 0;
        for mut p in raw {
            let mut tries = 0;
            while !f.admits(&p.values) && tries < 60 {
                p = p.scale(0.5);
                tries += 1;
            }
            if f.admits(&p.values) {
                out.push(p);
            } else {
                skipped += 1;
            }
        }
        (out, skipped)
    }
}

#[derive(Debug, Clone)]
pub struct SupportReport {
    pub support: NodeSet,
    pub probes_used: usize,
    pub probes_skipped: usize,
    /// `Some(ok)` when the functional declares a support.
    pub within_declared: Option<bool>,
}

/// Union over probes of `{n : |F′[φ](n)| > tol·max|F′[φ]|}`.
pub fn spacetime_support(f: &Functional, lat: Lattice, plan: &ProbePlan) -> Result<SupportReport> {
    let (probes, skipped) = plan.probes(lat, f);
    let mut support = NodeSet::empty(lat);
    let grads = probes.iter().map(|p| f.gradient_raw(&p.values)).collect::<Result<Vec<_>>>()?;
    let peak = |g: &[f64]| g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let global = grads.iter().fold(0.0f64, |a, g| a.max(peak(g)));
    for g in &grads {
        let m = peak(g);
        if m == 0.0 {
            continue;
        }
        let thr = (SUPPORT_REL * m).max(SUPPORT_FLOOR * global);
        for (n, v) in g.iter().enumerate() {
            if v.abs() > thr {
                support.insert(n);
            }
        }
    }
    let within_declared = f.declared_support().map(|d| support.is_subset(d));
    Ok(SupportReport { support, probes_used: probes.len(), probes_skipped: skipped, within_declared })
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditivityReport {
    pub pass: bool,
    pub worst_residual: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalityReport {
    pub pass: bool,
    pub worst_ratio: f64,
    pub trials: usize,
}

fn cheb(lat: &Lattice, a: usize, b: usize) -> usize {
    let (ta, xa) = lat.coords(a);
    let (tb, xb) = lat.coords(b);
    let dx = xa.abs_diff(xb);
    ta.abs_diff(tb).max(dx.min(lat.nx - dx))
}

/// Two nodes at Chebyshev distance ≥ `sep`, preferably inside `pool`.
fn separated_pair(lat: &Lattice, pool: &NodeSet, sep: usize, rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
    let nodes: Vec<usize> = pool.iter().collect();
    let all: Vec<usize> = (0..lat.len()).collect();
    for cand in [&nodes, &all] {
        if cand.is_empty() {
            continue;
        }
        for _ in 0..400 {
            let a = cand[rng.gen_range(0..cand.len())];
            let b = cand[rng.gen_range(0..cand.len())];
            if cheb(lat, a, b) >= sep {
                return Some((a, b));
            }
        }
    }
    None
}

/// Bump of Chebyshev radius 2 at `node`.
fn local_bump(lat: Lattice, node: usize, amp: f64) -> FieldConfig {
    let (it, ix) = lat.coords(node);
    TestFunction::bump(lat, it, ix, 2.5).field.scale(amp)
}

/// Centre separation that keeps two radius-2 bumps further apart than two stencil radii.
const CENTRE_SEP: usize = 2 + 2 + 2 * STENCIL_RADIUS + 1;

fn shrink_into_domain(f: &Functional, fields: &mut [FieldConfig], test: impl Fn(&[FieldConfig]) -> Vec<FieldConfig>) {
    for _ in 0..60 {
        if test(fields).iter().all(|p| f.admits(&p.values)) {
            return;
        }
        for x in fields.iter_mut() {
            *x = x.scale(0.5);
        }
    }
}

/// Randomized check of `F(φ₁+φ₂+φ₃) = F(φ₁+φ₂) − F(φ₂) + F(φ₂+φ₃)` for separated `φ₁`, `φ₃`.
pub fn check_additivity(f: &Functional, lat: Lattice, trials: usize, seed: u64) -> Result<AdditivityReport> {
    if trials == 0 {
        return Err(LabError::InvalidInput("additivity needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = f.structural_support(lat);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (a, b) = separated_pair(&lat, &pool, CENTRE_SEP, &mut rng)
            .ok_or_else(|| LabError::InvalidInput("lattice too small for separated probes".into()))?;
        let noise: Vec<f64> = (0..lat.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mut fs = vec![
            local_bump(lat, a, rng.gen_range(0.5..1.5)),
            FieldConfig { lattice: lat, values: noise },
            local_bump(lat, b, rng.gen_range(-1.5..-0.5)),
        ];
        let combos = |v: &[FieldConfig]| {
            vec![v[0].add(&v[1]).add(&v[2]), v[0].add(&v[1]), v[1].clone(), v[1].add(&v[2])]
        };
        shrink_into_domain(f, &mut fs, combos);
        let c = combos(&fs);
        let vals = c.iter().map(|p| f.value(p)).collect::<Result<Vec<_>>>()?;
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let r = (vals[0] - vals[1] + vals[2] - vals[3]).abs() / scale;
        worst = worst.max(r);
    }
    Ok(AdditivityReport { pass: worst <= 1e-10, worst_residual: worst, trials })
}

/// Randomized check that `F″[φ](v₁, v₂) = 0` for stencil-separated directions.
pub fn check_locality(f: &Functional, lat: Lattice, trials: usize, seed: u64) -> Result<LocalityReport> {
    if trials == 0 {
        return Err(LabError::InvalidInput("locality needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = f.structural_support(lat);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (a, b) = separated_pair(&lat, &pool, CENTRE_SEP, &mut rng)
            .ok_or_else(|| LabError::InvalidInput("lattice too small for separated probes".into()))?;
        let v1 = local_bump(lat, a, 1.0);
        let v2 = local_bump(lat, b, 1.0);
        let mut phi = vec![FieldConfig::from_node_fn(lat, |_, _| 0.0)];
        for x in phi[0].values.iter_mut() {
            *x = rng.gen_range(-0.5..0.5);
        }
        shrink_into_domain(f, &mut phi, |v| v.to_vec());
        let t = f.table_raw(&phi[0].values, &[&v1.values, &v2.values])?;
        let h11 = f.derivative(&phi[0], &[&v1, &v1])?;
        let h22 = f.derivative(&phi[0], &[&v2, &v2])?;
        let scale = h11.abs().max(h22.abs()).max((h11 * h22).abs().sqrt());
        let cross = t[3].abs();
        let r = if cross == 0.0 { 0.0 } else { cross / scale.max(f64::MIN_POSITIVE) };
        worst = worst.max(r);
    }
    Ok(LocalityReport { pass: worst <= 1e-10, worst_ratio: worst, trials })
}

/// Signed small-support pieces `F(φ) = Σ s_I F(φ·Σ_{i∈I} χ_i)`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// (coefficient, index set, piece).
    pub terms: Vec<(i64, Vec<usize>, Functional)>,
}

impl Decomposition {
    pub fn value(&self, phi: &FieldConfig) -> Result<f64> {
        let mut s = 0.0;
        for (c, _, f) in &self.terms {
            s += *c as f64 * f.value(phi)?;
        }
        Ok(s)
    }
}

fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    fn bk(r: Vec<usize>, mut p: Vec<usize>, mut x: Vec<usize>, adj: &[Vec<bool>], out: &mut Vec<Vec<usize>>) {
        if p.is_empty() && x.is_empty() {
            out.push(r);
            return;
        }
        while let Some(v) = p.pop() {
            let mut r2 = r.clone();
            r2.push(v);
            let p2 = p.iter().copied().filter(|&u| adj[v][u]).collect();
            let x2 = x.iter().copied().filter(|&u| adj[v][u]).collect();
            bk(r2, p2, x2, adj, out);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    bk(vec![], (0..adj.len()).rev().collect(), vec![], adj, &mut out);
    for c in out.iter_mut() {
        c.sort_unstable();
    }
    out.sort();
    out
}

/// Inclusion–exclusion over intersections of maximal cliques of the cover's overlap graph.
/// Cover elements overlap when their supports come within two stencil radii.
pub fn decompose_small_support(f: &Functional, lat: Lattice, cover: &[TestFunction], seed: u64) -> Result<Decomposition> {
    if cover.is_empty() {
        return Err(LabError::InvalidInput("empty cover".into()));
    }
    let rep = check_additivity(f, lat, 4, seed)?;
    if !rep.pass {
        return Err(LabError::NotAdditive(rep.worst_residual));
    }
    let n = cover.len();
    let grown: Vec<NodeSet> = cover.iter().map(|c| c.support().dilate(STENCIL_RADIUS)).collect();
    let adj: Vec<Vec<bool>> =
        (0..n).map(|i| (0..n).map(|j| i != j && !grown[i].is_disjoint(&grown[j])).collect()).collect();
    let cliques = maximal_cliques(&adj);
    if cliques.len() > 20 {
        return Err(LabError::InvalidInput("cover has too many maximal cliques".into()));
    }
    let mut coeff: BTreeMap<Vec<usize>, i64> = BTreeMap::new();
    for fam in 1usize..(1 << cliques.len()) {
        let mut inter: Option<Vec<usize>> = None;
        for (c, cl) in cliques.iter().enumerate() {
            if fam >> c & 1 == 1 {
                inter = Some(match inter {
                    None => cl.clone(),
                    Some(s) => s.into_iter().filter(|i| cl.contains(i)).collect(),
                });
            }
        }
        let sign = if fam.count_ones() % 2 == 1 { 1 } else { -1 };
        *coeff.entry(inter.unwrap_or_default()).or_insert(0) += sign;
    }
    let terms = coeff
        .into_iter()
        .filter(|(_, c)| *c != 0)
        .map(|(idx, c)| {
            let mut m = FieldConfig::zeros(lat);
            for &i in &idx {
                m = m.add(&cover[i].field);
            }
            (c, idx, f.cutoff(m))
        })
        .collect();
    Ok(Decomposition { terms })
}

impl Functional {
    /// Whether the tree contains a node of the given shape, used to label catalogue entries.
    pub fn has_product_of_nonconstants(&self) -> bool {
        match self.kind() {
            Kind::Product(a, b) => {
                !matches!(a.kind(), Kind::Constant(_)) && !matches!(b.kind(), Kind::Constant(_))
                    || a.has_product_of_nonconstants()
                    || b.has_product_of_nonconstants()
            }
            _ => self.children().iter().any(|c| c.has_product_of_nonconstants()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{ExampleDensity, OuterMap};
    use crate::geometry::GridSpacetime;
    use std::sync::Arc;

    #[test]
    fn clique_enumeration() {
        // Path 0-1-2 plus isolated 3.
        let mut adj = vec![vec![false; 4]; 4];
        adj[0][1] = true;
        adj[1][0] = true;
        adj[1][2] = true;
        adj[2][1] = true;
        assert_eq!(maximal_cliques(&adj), vec![vec![0, 1], vec![1, 2], vec![3]]);
    }

    #[test]
    fn constant_has_empty_support() {
        let lat = Lattice::new(8, 8, 0.5, 0.5).unwrap();
        let r = spacetime_support(&Functional::constant(2.0), lat, &ProbePlan::new(1)).unwrap();
        assert!(r.support.is_empty());
    }

    #[test]
    fn local_term_is_additive_and_local() {
        let lat = Lattice::new(24, 24, 0.5, 0.5).unwrap();
        let st = Arc::new(GridSpacetime::minkowski(lat));
        let f = TestFunction::smooth_box(lat, 4, 19, 12, 8, 2);
        let l = Functional::local_density(&st, f.clone(), Arc::new(ExampleDensity { eps: 0.1, mass2: 1.0 })).unwrap();
        assert!(check_additivity(&l, lat, 5, 3).unwrap().pass);
        assert!(check_locality(&l, lat, 5, 3).unwrap().pass);
        let e = Functional::compose(OuterMap::Exp { scale: 0.5 }, vec![Functional::linear(&st, &f).unwrap()]).unwrap();
        assert!(!check_additivity(&e, lat, 5, 3).unwrap().pass);
        assert!(!check_locality(&e, lat, 5, 3).unwrap().pass);
    }
}
