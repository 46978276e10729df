//! Verification suites. Each suite is standalone: it builds its own grids and contexts, draws
//! randomness only from the stream it is handed and reports named residuals and failures.

use super::config::{build_spacetime, ExperimentConfig, MetricSpec};
use crate::error::{LabError, Result};
use crate::fields::{pair, Density, FieldConfig, TestFunction};
use crate::functionals::catalogue::{exp_cutoff_example, partition_of_unity, sup_ball, BumpFunctional};
use crate::functionals::{
    check_additivity, check_locality, spacetime_support, CubicDensity, ExampleDensity, Functional, OuterMap,
    PointDensity, PotentialDensity, ProbePlan, SobolevDensity, TotalDivergenceDensity,
};
use crate::geometry::{causal_future, ConeMetric, GridSpacetime, Lattice, NodeSet, Sym2};
use crate::hyperbolic::{pde_stencil, resolvent_derivative_check, Propagator, PropagatorKind, Stencil};
use crate::lagrangian::{divergence_form, example_principal, symbol_limit_probe, DomainClass, GeneralizedLagrangian};
use crate::microcausal::{
    check_conormal_local, conormal_labels, exhaustion_index, in_gamma, in_upsilon, omega_counts, product_wf_bound,
    ConeFamily, CovectorTuple, Label, LabelSet,
};
use crate::peierls::{
    derivation_check, jacobi_functionals, leibniz_check, master_identity_residual, BracketContext,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

/// Registry in stable order: name and one-line description.
pub const SUITES: &[(&str, &str)] = &[
    ("greens-dalembert", "retarded solution of the wave equation against the d'Alembert formula, observed order"),
    ("support-cones", "retarded solutions vanish bitwise outside the discrete causal future of the source"),
    ("adjointness", "transpose advanced solver against an independent divergence-form backward solve"),
    ("resolvent", "lambda-derivatives of all propagators against the resolvent formulas"),
    ("master-identity", "bracket/product master identity for free and self-interacting fields"),
    ("jacobi-free-field", "Jacobi identity for quadratic functionals of the free field"),
    ("jacobi-epsilon", "Jacobi identity for the self-interacting example"),
    ("leibniz", "Leibniz rule and the smooth-function derivation property of the bracket"),
    ("additivity-locality", "additivity and locality classifiers over the functional catalogue"),
    ("cone-counts", "closed-form cone counts, exhaustion monotonicity and label algebra"),
    ("hyperbolicity-domains", "domain classifier on constructed witnesses and the symbol-limit probe"),
    ("bump-partition", "bump functionals and two-ball partitions of unity"),
    ("support-algebra", "supports of sums and products and the domain-dependent support example"),
];

pub fn describe(name: &str) -> Option<&'static str> {
    SUITES.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
}

/// Residuals, structured details, failing assertion identifiers and optional CSV tables.
#[derive(Debug, Default)]
pub struct SuiteOutcome {
    pub residuals: BTreeMap<String, f64>,
    pub details: Map<String, Value>,
    pub failures: Vec<String>,
    pub checks: usize,
    pub csv: Vec<(String, String)>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn check(&mut self, id: impl Into<String>, ok: bool) {
        self.checks += 1;
        if !ok {
            self.failures.push(id.into());
        }
    }

    /// Record `value` under `id` and require `value ≤ tol` (NaN fails).
    fn bound(&mut self, id: impl Into<String>, value: f64, tol: f64) {
        let id = id.into();
        self.residuals.insert(id.clone(), value);
        self.check(id, value <= tol);
    }

    fn detail(&mut self, key: &str, v: Value) {
        self.details.insert(key.into(), v);
    }
}

pub fn run_suite(name: &str, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    match name {
        "greens-dalembert" => greens_dalembert(cfg),
        "support-cones" => support_cones(rng),
        "adjointness" => adjointness(cfg, rng),
        "resolvent" => resolvent(cfg, rng),
        "master-identity" => master_identity(cfg, rng),
        "jacobi-free-field" => jacobi(cfg, rng, false),
        "jacobi-epsilon" => jacobi(cfg, rng, true),
        "leibniz" => leibniz(cfg, rng),
        "additivity-locality" => additivity_locality(cfg, rng),
        "cone-counts" => cone_counts(cfg, rng),
        "hyperbolicity-domains" => hyperbolicity_domains(cfg),
        "bump-partition" => bump_partition(cfg, rng),
        "support-algebra" => support_algebra(rng),
        other => Err(LabError::InvalidInput(format!("unknown suite '{other}'"))),
    }
}

/// Smooth x-periodic field: a few random modes with amplitude `amp`.
fn smooth_field(lat: Lattice, rng: &mut ChaCha8Rng, amp: f64) -> FieldConfig {
    let l = lat.period();
    let modes: Vec<(f64, f64, f64, f64)> = (1..=3)
        .map(|m| (rng.gen_range(-1.0..1.0) / m as f64, m as f64, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.5..2.0)))
        .collect();
    FieldConfig::from_fn(lat, |t, x| {
        amp * modes.iter().map(|(a, m, th, w)| a * (2.0 * PI * m * x / l + th).sin() * (w * t + th).cos()).sum::<f64>()
    })
}

fn noise(lat: Lattice, rng: &mut ChaCha8Rng, a: f64) -> Vec<f64> {
    (0..lat.len()).map(|_| rng.gen_range(-a..a)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Sup norm over slices `1..nt−1`; the end rows of the variational stencil are one-sided.
fn interior_max(lat: &Lattice, v: &[f64]) -> f64 {
    max_abs(&v[lat.nx..(lat.nt - 1) * lat.nx])
}

/// `Σ|u||φ|` cell-weighted: the roundoff scale of a pairing.
fn pair_scale(u: &Density, phi: &FieldConfig) -> f64 {
    u.coeffs.iter().zip(&phi.values).map(|(a, b)| (a * b).abs()).sum::<f64>() * u.lattice.cell_area()
}

// ---------------------------------------------------------------- greens-dalembert

/// `cos⁴(π(s−c)/(2w))` on `|s−c| < w`.
fn cos4(s: f64, c: f64, w: f64) -> f64 {
    if (s - c).abs() < w {
        (PI * (s - c) / (2.0 * w)).cos().powi(4)
    } else {
        0.0
    }
}

/// Antiderivative of [`cos4`] vanishing to the left of its support.
fn cos4_integral(s: f64, c: f64, w: f64) -> f64 {
    if s <= c - w {
        0.0
    } else if s >= c + w {
        0.75 * w
    } else {
        let u = PI * (s - c) / (2.0 * w);
        (2.0 * w / PI) * (3.0 * (u + PI / 2.0) / 8.0 + (2.0 * u).sin() / 4.0 + (4.0 * u).sin() / 32.0)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

const SRC_T: (f64, f64) = (0.3, 0.2);
const SRC_X: (f64, f64) = (1.0, 0.3);

/// `ψ(t,x) = −½∫a(t′)[B(x+t−t′) − B(x−t+t′)]dt′` solves `(−∂²_t + ∂²_x)ψ = a(t)b(x)`.
fn dalembert(t: f64, x: f64) -> f64 {
    let (tc, tw) = SRC_T;
    let (xc, xw) = SRC_X;
    let hi = t.min(tc + tw);
    let integrand = |s: f64| cos4(s, tc, tw) * (cos4_integral(x + t - s, xc, xw) - cos4_integral(x - t + s, xc, xw));
    -0.5 * simpson(integrand, tc - tw, hi, 400)
}

fn greens_dalembert(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let mut rows = Vec::new();
    for n in [32usize, 64, 128] {
        let dx = 2.0 / n as f64;
        let dt = 0.5 * dx;
        let lat = Lattice::new((0.75 / dt).round() as usize + 1, n, dt, dx)?;
        let st = Arc::new(GridSpacetime::minkowski(lat));
        let prop = GeneralizedLagrangian::free_field(st).linearize(&FieldConfig::zeros(lat))?.propagator()?;
        let src = Density::from_fn(lat, |t, x| cos4(t, SRC_T.0, SRC_T.1) * cos4(x, SRC_X.0, SRC_X.1));
        let psi = prop.delta_ret(&src)?;
        let exact = FieldConfig::from_fn(lat, dalembert);
        let err = interior_max(&lat, &psi.sub(&exact).values);
        rows.push((n, err, interior_max(&lat, &exact.values)));
    }
    let mut orders = Vec::new();
    for w in rows.windows(2) {
        orders.push((w[0].1 / w[1].1).log2());
    }
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    out.residuals.insert("min_observed_order".into(), min_order);
    out.check("greens.observed_order", min_order >= cfg.tolerances.greens_order);
    out.check("greens.nontrivial", rows.iter().all(|r| r.2 > 1e-3));
    out.detail(
        "refinement",
        json!(rows.iter().map(|(n, e, s)| json!({"n": n, "sup_error": e, "sup_exact": s})).collect::<Vec<_>>()),
    );
    out.detail("orders", json!(orders));
    let mut csv = String::from("n,sup_error,order\n");
    for (i, (n, e, _)) in rows.iter().enumerate() {
        let o = if i == 0 { String::new() } else { format!("{:.6}", orders[i - 1]) };
        let _ = writeln!(csv, "{n},{e:.9e},{o}");
    }
    out.csv.push(("greens-dalembert.csv".into(), csv));
    Ok(out)
}

// ---------------------------------------------------------------- support-cones

fn support_cones(rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let lat = Lattice::new(32, 32, 0.025, 0.05)?;
    let l = lat.period();
    let setups: Vec<(&str, GeneralizedLagrangian, FieldConfig)> = vec![
        ("minkowski-free", GeneralizedLagrangian::free_field(Arc::new(GridSpacetime::minkowski(lat))), FieldConfig::zeros(lat)),
        (
            "conformal-mass",
            GeneralizedLagrangian::example(build_spacetime(lat, &MetricSpec::Conformal { amplitude: 0.2 }).map_err(cfg_err)?, 0.0, 1.0)?,
            FieldConfig::zeros(lat),
        ),
        (
            "example-eps",
            GeneralizedLagrangian::example(Arc::new(GridSpacetime::minkowski(lat)), 0.1, 0.5)?,
            FieldConfig::from_fn(lat, |_, x| 0.3 * (2.0 * PI * x / l).cos()),
        ),
    ];
    let mut per_setup = Vec::new();
    for (si, (name, lag, phi0)) in setups.iter().enumerate() {
        let prop = lag.linearize(phi0)?.propagator()?;
        let metric = lag.principal_metric(phi0)?;
        let (mut leaks, mut reached) = (0usize, 0usize);
        let count = if si < 2 { 17 } else { 16 };
        for k in 0..count {
            let (it0, ix0) = (rng.gen_range(1..lat.nt - 4), rng.gen_range(0..lat.nx));
            let r = rng.gen_range(0..3usize) as isize;
            let src = Density::from_node_fn(lat, |it, ix| {
                let dt = it as isize - it0 as isize;
                let dx = ix as isize - ix0 as isize;
                let dx = dx.rem_euclid(lat.nx as isize).min((-dx).rem_euclid(lat.nx as isize));
                if dt.abs() <= r && dx <= r {
                    // deterministic per node but random per source
                    ((it * 31 + ix * 17 + k) as f64 * 0.618).sin() + 1.5
                } else {
                    0.0
                }
            });
            let psi = prop.delta_ret(&src)?;
            let allowed = causal_future(&lag.st, ConeMetric::Other(&metric), &src.nonzero_set())?.dilate(1);
            let outside = psi.values.iter().enumerate().filter(|(n, v)| **v != 0.0 && !allowed.contains(*n)).count();
            leaks += outside;
            reached += psi.values.iter().filter(|v| **v != 0.0).count();
            out.check(format!("support-cones.{name}.source{k}"), outside == 0);
        }
        per_setup.push(json!({"setup": name, "sources": count, "leaked_nodes": leaks, "nonzero_nodes": reached}));
        out.residuals.insert(format!("{name}.leaked_nodes"), leaks as f64);
        out.check(format!("support-cones.{name}.nontrivial"), reached > 0);
    }
    out.detail("setups", json!(per_setup));
    Ok(out)
}

fn cfg_err(e: super::config::ConfigError) -> LabError {
    LabError::InvalidInput(e.to_string())
}

// ---------------------------------------------------------------- adjointness

fn adjointness(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let (eps, mass2) = (0.2, 1.0);
    let l = 2.0;
    let lapse = move |x: f64| 1.0 + 0.2 * (2.0 * PI * x / l).sin();
    let metric = move |_t: f64, x: f64| Sym2::new(-lapse(x) * lapse(x), 0.0, 1.0);
    let phi0 = move |_t: f64, x: f64| (0.3 * (2.0 * PI * x / l).cos(), 0.0, -0.3 * 2.0 * PI / l * (2.0 * PI * x / l).sin());
    let density: Arc<dyn PointDensity> = Arc::new(ExampleDensity { eps, mass2 });
    let mut rows = Vec::new();
    for n in [32usize, 64, 128] {
        let dx = l / n as f64;
        let dt = 0.4 * dx;
        let lat = Lattice::new((0.8 / dt).round() as usize + 1, n, dt, dx)?;
        let st = Arc::new(GridSpacetime::from_fn(lat, metric)?);
        let lag = GeneralizedLagrangian::example(st.clone(), eps, mass2)?;
        let bg = FieldConfig::from_fn(lat, |t, x| phi0(t, x).0);
        let prop = lag.linearize(&bg)?.propagator()?;
        let (k, q) = divergence_form(density.clone(), metric, phi0);
        let indep = Propagator::new(st.clone(), pde_stencil(lat, &k, &q))?;
        let src = Density::from_fn(lat, |t, x| cos4(t, 0.55, 0.15) * cos4(x, 1.0, 0.3));
        let a = prop.delta_adv(&src)?;
        let b = indep.delta_adv(&src)?;
        let disc = interior_max(&lat, &a.sub(&b).values) / interior_max(&lat, &b.values);
        rows.push((n, dx, disc, disc / (dx * dx)));
        // Pairing identity with rough random densities.
        let f = Density { lattice: lat, coeffs: noise(lat, rng, 1.0) };
        let h = Density { lattice: lat, coeffs: noise(lat, rng, 1.0) };
        let (rh, af) = (prop.delta_ret(&h)?, prop.delta_adv(&f)?);
        let lhs = pair(&f, &rh)?;
        let rhs = pair(&h, &af)?;
        let scale = pair_scale(&f, &rh).max(pair_scale(&h, &af)).max(f64::MIN_POSITIVE);
        let rel = (lhs - rhs).abs() / scale;
        out.bound(format!("pairing.n{n}"), rel, cfg.tolerances.pairing_rel);
    }
    for w in rows.windows(2) {
        let ratio = w[1].3 / w[0].3;
        out.residuals.insert(format!("c_ratio.n{}", w[1].0), ratio);
        out.check(format!("adjointness.c_stable.n{}", w[1].0), (0.5..=2.0).contains(&ratio));
    }
    out.check("adjointness.h2_small", rows.iter().all(|r| r.2 < 1e-1));
    out.detail(
        "refinement",
        json!(rows.iter().map(|(n, h, d, c)| json!({"n": n, "h": h, "relative_discrepancy": d, "c": c})).collect::<Vec<_>>()),
    );
    Ok(out)
}

// ---------------------------------------------------------------- resolvent

fn resolvent(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let lat = Lattice::new(24, 24, 0.025, 0.05)?;
    let l = lat.period();
    let s = lat.nt / 2;
    let src: Vec<f64> =
        (0..lat.len()).map(|n| if (3..lat.nt - 3).contains(&lat.coords(n).0) { rng.gen_range(-1.0..1.0) } else { 0.0 }).collect();
    let data: Vec<f64> = (0..lat.nx).map(|ix| (2.0 * PI * ix as f64 / lat.nx as f64).cos() + rng.gen_range(-0.2..0.2)).collect();
    let kinds = [
        PropagatorKind::Ret,
        PropagatorKind::Adv,
        PropagatorKind::Sigma(s),
        PropagatorKind::K0(s),
        PropagatorKind::K1(s),
    ];
    let label = |k: PropagatorKind| match k {
        PropagatorKind::Ret => "ret".to_string(),
        PropagatorKind::Adv => "adv".to_string(),
        PropagatorKind::Sigma(_) => "sigma".to_string(),
        PropagatorKind::K0(_) => "k0".to_string(),
        PropagatorKind::K1(_) => "k1".to_string(),
    };
    let mut reports = Vec::new();

    // Mass family on a conformal background; Ṗ is exact since the Hessian is affine in m².
    let st = build_spacetime(lat, &MetricSpec::Conformal { amplitude: 0.15 }).map_err(cfg_err)?;
    let phi0 = FieldConfig::from_fn(lat, |_, x| 0.2 * (2.0 * PI * x / l).sin());
    let h0 = GeneralizedLagrangian::example(st.clone(), 0.1, 0.0)?.hessian_stencil(&phi0)?;
    let h1 = GeneralizedLagrangian::example(st.clone(), 0.1, 1.0)?.hessian_stencil(&phi0)?;
    let pdot = h1.axpy(-1.0, &h0);
    let mass = |lam: f64| -> Result<(Stencil, Stencil)> { Ok((h0.axpy(1.0 + lam, &pdot), pdot.clone())) };

    // ε family: Hessian along the line φ₀ + λw, Ṗ the third variation in w.
    let st2 = Arc::new(GridSpacetime::from_fn(lat, |_, x| {
        let a = 1.0 + 0.1 * (2.0 * PI * x / l).sin();
        Sym2::new(-a * a, 0.0, 1.0)
    })?);
    let lag = GeneralizedLagrangian::example(st2.clone(), 0.1, 0.5)?;
    let base = FieldConfig::from_fn(lat, |_, x| 0.25 * (2.0 * PI * x / l).cos());
    let w = FieldConfig::from_fn(lat, |_, x| 0.3 * (4.0 * PI * x / l).sin());
    let eps_family = |lam: f64| -> Result<(Stencil, Stencil)> {
        let phi = base.axpy(lam, &w);
        Ok((lag.hessian_stencil(&phi)?, lag.third_variation(&phi, &w)?))
    };

    for (family, stx, f) in [("mass", &st, &mass as &dyn Fn(f64) -> Result<(Stencil, Stencil)>), ("epsilon", &st2, &eps_family)] {
        for k in kinds {
            let input = if matches!(k, PropagatorKind::K0(_) | PropagatorKind::K1(_)) { &data } else { &src };
            let r = resolvent_derivative_check(stx, f, 0.2, 1e-3, k, input)?;
            let id = format!("{family}.{}", label(k));
            out.check(format!("resolvent.{id}.nonzero"), r.derivative_norm > 0.0);
            out.bound(format!("resolvent.{id}"), r.residual, cfg.tolerances.resolvent_rel);
            reports.push(json!({"family": family, "report": r}));
        }
    }
    out.detail("checks", json!(reports));
    Ok(out)
}

// ---------------------------------------------------------------- bracket suites

fn bracket_lattice() -> Result<Lattice> {
    Lattice::new(64, 64, 1.0 / 64.0, 1.0 / 32.0)
}

#[derive(Clone, Copy, PartialEq)]
enum Pool {
    Quadratic,
    Mixed,
}

/// Random catalogue functional centred within six columns of `x0`, so that triples stay
/// causally related.
fn bracket_functional(st: &Arc<GridSpacetime>, rng: &mut ChaCha8Rng, pool: Pool, margin: usize, x0: usize) -> Result<(Functional, String)> {
    let lat = st.lattice;
    let r: f64 = rng.gen_range(3.0..5.0);
    let pad = margin + r.ceil() as usize + 3;
    let it = rng.gen_range(pad..lat.nt - pad);
    let ix = lat.wrap(x0 as isize + rng.gen_range(-6..=6));
    let f = TestFunction::bump(lat, it, ix, r);
    let pick = rng.gen_range(0..3);
    let tag = format!("@({it},{ix}) r={r:.2}");
    Ok(match (pool, pick) {
        (Pool::Quadratic, 0) => (Functional::sobolev_sq(f, 1, None)?, format!("sobolev1{tag}")),
        (Pool::Quadratic, 1) => (Functional::sobolev_sq(f, 0, None)?, format!("sobolev0{tag}")),
        (Pool::Quadratic, _) => {
            let m = rng.gen_range(0.5..2.0);
            (Functional::local_density(st, f, Arc::new(PotentialDensity { mass2: m, quartic: 0.0 }))?, format!("mass{tag}"))
        }
        (Pool::Mixed, 0) => (Functional::linear(st, &f)?, format!("linear{tag}")),
        (Pool::Mixed, 1) => {
            let e = rng.gen_range(0.0..0.3);
            (Functional::local_density(st, f, Arc::new(ExampleDensity { eps: e, mass2: 1.0 }))?, format!("example{tag}"))
        }
        (Pool::Mixed, _) => {
            let q = rng.gen_range(0.0..0.5);
            (Functional::local_density(st, f, Arc::new(PotentialDensity { mass2: 1.0, quartic: q }))?, format!("quartic{tag}"))
        }
    })
}

fn bracket_setup(eps: Option<f64>, margin: usize) -> Result<Arc<BracketContext>> {
    let st = Arc::new(GridSpacetime::minkowski(bracket_lattice()?));
    let lag = match eps {
        None => GeneralizedLagrangian::free_field(st),
        Some(e) => GeneralizedLagrangian::example(st, e, 0.0)?,
    };
    BracketContext::new(lag, margin)
}

fn triple(ctx: &Arc<BracketContext>, rng: &mut ChaCha8Rng, pool: Pool) -> Result<(Vec<Functional>, Vec<String>)> {
    let st = ctx.lagrangian.st.clone();
    let mut fs = Vec::new();
    let mut names = Vec::new();
    let x0 = rng.gen_range(0..st.lattice.nx);
    for _ in 0..3 {
        let (f, n) = bracket_functional(&st, rng, pool, ctx.margin, x0)?;
        fs.push(f);
        names.push(n);
    }
    Ok((fs, names))
}

/// The configured context and named triple, when one is declared.
fn config_triple(cfg: &ExperimentConfig) -> Result<Option<(Arc<BracketContext>, Vec<Functional>)>> {
    if cfg.brackets.triple.is_empty() {
        return Ok(None);
    }
    let st = cfg.spacetime().map_err(cfg_err)?;
    let lag = cfg.lagrangian(st.clone()).map_err(cfg_err)?;
    let ctx = BracketContext::new(lag, cfg.brackets.margin.unwrap_or(2))?;
    let cat = cfg.functionals(&st).map_err(cfg_err)?;
    Ok(Some((ctx, cfg.brackets.triple.iter().map(|n| cat[n].clone()).collect())))
}

fn master_identity(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let margin = cfg.brackets.margin.unwrap_or(2);
    let tol = cfg.tolerances.identity_rel;
    let mut rows = Vec::new();
    for (name, eps, pool) in [("free-field", None, Pool::Quadratic), ("epsilon", Some(0.1), Pool::Mixed)] {
        let ctx = bracket_setup(eps, margin)?;
        for i in 0..5 {
            let (fs, names) = triple(&ctx, rng, pool)?;
            let phi = smooth_field(ctx.lagrangian.lattice(), rng, 0.2);
            let r = master_identity_residual(&ctx, &fs[0], &fs[1], &fs[2], &phi)?;
            out.check(format!("master.{name}.{i}.nontrivial"), r.scale > 0.0);
            out.bound(format!("master.{name}.{i}.adv"), r.residual_adv, tol);
            out.bound(format!("master.{name}.{i}.ret"), r.residual_ret, tol);
            rows.push(json!({"setup": name, "functionals": names, "report": r}));
        }
    }
    if let Some((ctx, fs)) = config_triple(cfg)? {
        let phi = smooth_field(ctx.lagrangian.lattice(), rng, 0.1);
        let r = master_identity_residual(&ctx, &fs[0], &fs[1], &fs[2], &phi)?;
        out.bound("master.config.adv", r.residual_adv, tol);
        out.bound("master.config.ret", r.residual_ret, tol);
        rows.push(json!({"setup": "config", "functionals": cfg.brackets.triple, "report": r}));
    }
    out.detail("triples", json!(rows));
    Ok(out)
}

fn jacobi(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, interacting: bool) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let margin = cfg.brackets.margin.unwrap_or(2);
    let tol = cfg.tolerances.identity_rel;
    let (name, eps, pool) = if interacting { ("epsilon", Some(0.1), Pool::Mixed) } else { ("free-field", None, Pool::Quadratic) };
    let ctx = bracket_setup(eps, margin)?;
    let mut rows = Vec::new();
    for i in 0..5 {
        let (fs, names) = triple(&ctx, rng, pool)?;
        let phi = smooth_field(ctx.lagrangian.lattice(), rng, 0.2);
        let r = jacobi_functionals(&ctx, &fs[0], &fs[1], &fs[2], &phi)?;
        out.check(format!("jacobi.{name}.{i}.nontrivial"), r.scale > 0.0);
        out.bound(format!("jacobi.{name}.{i}"), r.residual, tol);
        let d = jacobi_functionals(&ctx, &fs[0], &fs[1], &fs[1], &phi)?;
        out.check(format!("jacobi.{name}.{i}.degenerate_exact_zero"), d.lhs == 0.0);
        rows.push(json!({"functionals": names, "report": r, "degenerate_lhs": d.lhs}));
    }
    if interacting {
        if let Some((ctx, fs)) = config_triple(cfg)? {
            let phi = smooth_field(ctx.lagrangian.lattice(), rng, 0.1);
            let r = jacobi_functionals(&ctx, &fs[0], &fs[1], &fs[2], &phi)?;
            out.bound("jacobi.config", r.residual, tol);
            rows.push(json!({"functionals": cfg.brackets.triple, "report": r}));
        }
    }
    out.detail("setup", json!(name));
    out.detail("triples", json!(rows));
    Ok(out)
}

fn leibniz(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let tol = cfg.tolerances.leibniz_rel;
    let margin = cfg.brackets.margin.unwrap_or(2);
    let lat = Lattice::new(32, 32, 1.0 / 32.0, 1.0 / 16.0)?;
    let st = Arc::new(GridSpacetime::minkowski(lat));
    let ctx = BracketContext::new(GeneralizedLagrangian::example(st.clone(), 0.1, 0.0)?, margin)?;
    let mut rows = Vec::new();
    for i in 0..20 {
        let x0 = rng.gen_range(0..lat.nx);
        let (f, nf) = bracket_functional(&st, rng, Pool::Mixed, margin, x0)?;
        let (g, ng) = bracket_functional(&st, rng, Pool::Mixed, margin, x0)?;
        let (h0, nh) = bracket_functional(&st, rng, Pool::Mixed, margin, x0)?;
        // Every fourth triple composes H with exp.
        let (h, nh) = if i % 4 == 3 { (Functional::compose(OuterMap::Exp { scale: 0.5 }, vec![h0])?, format!("exp({nh})")) } else { (h0, nh) };
        let phi = smooth_field(lat, rng, 0.2);
        let r = leibniz_check(&ctx, &f, &g, &h, &phi)?;
        out.check(format!("leibniz.{i}.nontrivial"), r.scale > 0.0);
        out.bound(format!("leibniz.{i}"), r.residual, tol);
        rows.push(json!({"functionals": [nf, ng, nh], "report": r}));
    }
    let mut derivs = Vec::new();
    for i in 0..5 {
        let x0 = rng.gen_range(0..lat.nx);
        let (f, nf) = bracket_functional(&st, rng, Pool::Mixed, margin, x0)?;
        let (g, ng) = bracket_functional(&st, rng, Pool::Mixed, margin, x0)?;
        let phi = smooth_field(lat, rng, 0.2);
        let r = derivation_check(&ctx, &OuterMap::Exp { scale: 1.0 }, &f, &g, &phi)?;
        out.bound(format!("derivation.exp.{i}"), r.residual, tol);
        derivs.push(json!({"functionals": [nf, ng], "report": r}));
    }
    out.detail("triples", json!(rows));
    out.detail("derivation", json!(derivs));
    Ok(out)
}

// ---------------------------------------------------------------- additivity-locality

fn additivity_locality(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let lat = Lattice::new(32, 32, 0.05, 0.05)?;
    let st = build_spacetime(lat, &MetricSpec::Conformal { amplitude: 0.1 }).map_err(cfg_err)?;
    let f = || TestFunction::bump(lat, 16, 16, 9.0);
    let dens = |d: Arc<dyn PointDensity>| Functional::local_density(&st, f(), d);
    let lin = Functional::linear(&st, &f())?;
    let ex = dens(Arc::new(ExampleDensity { eps: 0.2, mass2: 1.0 }))?;
    let mut catalogue: Vec<(String, Functional, bool)> = vec![
        ("sobolev_sq.k0".into(), Functional::sobolev_sq(f(), 0, None)?, true),
        ("sobolev_sq.k1".into(), Functional::sobolev_sq(f(), 1, None)?, true),
        ("sobolev_sq.k2".into(), Functional::sobolev_sq(f(), 2, None)?, true),
        ("local.example".into(), ex.clone(), true),
        ("local.potential".into(), dens(Arc::new(PotentialDensity { mass2: 1.0, quartic: 0.3 }))?, true),
        ("local.sobolev".into(), dens(Arc::new(SobolevDensity))?, true),
        ("local.total-divergence".into(), dens(Arc::new(TotalDivergenceDensity { c: 1.0 }))?, true),
        ("local.cubic".into(), dens(Arc::new(CubicDensity { a: 1.0, b: 0.5, c: 0.2 }))?, true),
        ("linear".into(), lin.clone(), true),
        ("sum.local".into(), ex.add(&lin), true),
        ("exp_pairing".into(), Functional::exp_pairing(crate::fields::to_density(&st, &f().field)?), false),
        ("product.linear.linear".into(), lin.mul(&lin), false),
        ("product.example.linear".into(), ex.mul(&lin), false),
        ("compose.tanh.linear".into(), Functional::compose(OuterMap::Tanh, vec![lin.clone()])?, false),
    ];
    // Configured catalogue entries with a kind-determined expectation, on the configured grid.
    let cst = cfg.spacetime().map_err(cfg_err)?;
    let ccat = cfg.functionals(&cst).map_err(cfg_err)?;
    let mut configured = Vec::new();
    for spec in &cfg.functionals {
        use super::config::FunctionalSpec as S;
        let expect = match spec {
            S::Local { .. } | S::Linear { .. } | S::Sobolev { .. } => Some(true),
            S::ExpPairing { .. } | S::Product { .. } => Some(false),
            S::Compose { .. } => None,
        };
        if let Some(e) = expect {
            configured.push((format!("config.{}", spec.name()), ccat[spec.name()].clone(), e, cst.lattice));
        }
    }
    let mut rows = Vec::new();
    let mut mis = 0usize;
    let all = catalogue.drain(..).map(|(n, f, e)| (n, f, e, lat)).chain(configured);
    for (name, func, expect_local, flat) in all {
        let seed = rng.gen();
        let add = check_additivity(&func, flat, 12, seed)?;
        let loc = check_locality(&func, flat, 12, seed)?;
        let local = add.pass && loc.pass;
        let ok = local == expect_local && (expect_local || !loc.pass);
        mis += usize::from(!ok);
        out.check(format!("classify.{name}"), ok);
        rows.push(json!({
            "functional": name, "expected_local": expect_local, "classified_local": local,
            "additivity": add, "locality": loc,
        }));
    }
    out.residuals.insert("misclassifications".into(), mis as f64);
    out.detail("catalogue", json!(rows));
    Ok(out)
}

// ---------------------------------------------------------------- cone-counts

fn random_covector(rng: &mut ChaCha8Rng) -> [f64; 2] {
    match rng.gen_range(0..10) {
        0 => [0.0, 0.0],
        1 => {
            let s = rng.gen_range(0.2..2.0) * if rng.gen() { 1.0 } else { -1.0 };
            [s, if rng.gen() { s } else { -s }]
        }
        _ => [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
    }
}

fn cone_counts(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let _ = cfg;
    let mut out = SuiteOutcome::default();
    let mut table = Vec::new();
    let mut csv = String::from("k,a,b,c,total,enumerated_a,enumerated_b,enumerated_c\n");
    for k in 1..=8 {
        let c = omega_counts(k)?;
        let p2 = 2u64.pow(k as u32);
        let p3 = 3u64.pow(k as u32);
        let closed = (p2 - 1, p2 - 2, p3 + 3 - 3 * p2);
        out.check(format!("counts.k{k}.closed_form"), (c.a, c.b, c.c) == closed && c.total == p3 - p2);
        out.check(format!("counts.k{k}.enumeration"), c.matches);
        let _ = writeln!(csv, "{},{},{},{},{},{},{},{}", k, c.a, c.b, c.c, c.total, c.enumerated[0], c.enumerated[1], c.enumerated[2]);
        table.push(json!(c));
    }
    out.detail("counts", json!(table));
    out.csv.push(("cone-counts.csv".into(), csv));

    // Random tuples on a mildly curved background.
    let lat = Lattice::new(4, 4, 0.1, 0.1)?;
    let st = GridSpacetime::from_fn(lat, |t, x| Sym2::new(-1.0 - 0.3 * x, 0.2 * t, 1.0 + 0.1 * x))?;
    let fam = ConeFamily::default();
    let m_max = 64;
    for k in 1..=3 {
        let (mut mono, mut inside, mut cover, mut conic, mut in_ups) = (0, 0, 0, 0, 0);
        for _ in 0..10_000 {
            let xi: Vec<[f64; 2]> = (0..k).map(|_| random_covector(rng)).collect();
            if xi.iter().all(|x| x[0] == 0.0 && x[1] == 0.0) {
                continue;
            }
            let nodes: Vec<usize> = (0..k).map(|_| rng.gen_range(0..lat.len())).collect();
            let t = CovectorTuple::new(nodes, xi)?;
            let ups = in_upsilon(&st, &t)?;
            in_ups += usize::from(ups);
            let m = rng.gen_range(0..12);
            let g0 = in_gamma(&st, &fam, &t, m)?.is_some();
            let g1 = in_gamma(&st, &fam, &t, m + 1)?.is_some();
            mono += usize::from(g0 && !g1);
            inside += usize::from(g0 && !ups);
            let idx = exhaustion_index(&st, &fam, &t, m_max)?;
            cover += usize::from(ups != idx.is_some());
            let scales: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..10.0)).collect();
            let s = t.scaled(&scales);
            conic += usize::from(in_upsilon(&st, &s)? != ups || in_gamma(&st, &fam, &s, m)?.is_some() != g0);
        }
        out.check(format!("exhaustion.k{k}.monotone"), mono == 0);
        out.check(format!("exhaustion.k{k}.gamma_in_upsilon"), inside == 0);
        out.check(format!("exhaustion.k{k}.covers_upsilon"), cover == 0);
        out.check(format!("exhaustion.k{k}.conic"), conic == 0);
        out.detail(
            &format!("random_k{k}"),
            json!({"samples": 10_000, "in_upsilon": in_ups, "monotonicity_violations": mono,
                   "gamma_outside_upsilon": inside, "coverage_violations": cover, "conic_violations": conic}),
        );
    }

    // Label algebra: products of conormal and spacelike sets stay microcausal; causal ones do not.
    let spacelike: LabelSet = [vec![Label::Spacelike; 2]].into_iter().collect();
    let future: LabelSet = [vec![Label::FutureCausal; 2]].into_iter().collect();
    out.check("labels.spacelike_product", product_wf_bound(&spacelike, &spacelike, 2, 2)?.contained);
    out.check("labels.conormal_product", product_wf_bound(&conormal_labels(2), &conormal_labels(2), 2, 2)?.contained);
    out.check("labels.future_product_rejected", !product_wf_bound(&future, &future, 2, 2)?.contained);

    let flat = Arc::new(GridSpacetime::minkowski(Lattice::new(16, 16, 0.1, 0.1)?));
    let bump = TestFunction::bump(flat.lattice, 8, 8, 3.0);
    let local = Functional::local_density(&flat, bump.clone(), Arc::new(ExampleDensity { eps: 0.1, mass2: 1.0 }))?;
    let lin = Functional::linear(&flat, &bump)?;
    let samples: Vec<[f64; 2]> = (0..32).map(|_| random_covector(rng)).collect();
    let node = flat.lattice.idx(8, 8);
    for (name, f) in [("local", local.clone()), ("product", local.mul(&lin))] {
        let r = check_conormal_local(&flat, &f, node, &samples)?;
        out.check(format!("conormal.{name}"), r.pass && r.tuples_checked > 0);
    }
    Ok(out)
}

// ---------------------------------------------------------------- hyperbolicity-domains

fn hyperbolicity_domains(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let lat = Lattice::new(32, 16, 0.02, 0.05)?;
    let st = Arc::new(GridSpacetime::minkowski(lat));
    let eps = 0.5;
    let lag = GeneralizedLagrangian::example(st.clone(), eps, 0.0)?;
    let (it_star, phi_star) = (16usize, 0.5);
    let t_star = lat.t(it_star);
    let c = 1.0 / (2.0 * eps * (1.0 + phi_star * phi_star)).sqrt();
    let phi = |t: f64| c * (t - t_star) + phi_star;
    let witness = FieldConfig::from_fn(lat, |t, _| phi(t));
    let dom = lag.hyperbolicity_domain(&witness)?;
    let mut wrong = 0;
    for n in 0..lat.len() {
        let (it, _) = lat.coords(n);
        let expected = if it == it_star {
            DomainClass::Degenerate
        } else {
            let p = phi(lat.t(it));
            if -c * c + 1.0 / (2.0 * eps * (1.0 + p * p)) > 0.0 {
                DomainClass::SubluminalHyperbolic
            } else {
                DomainClass::Reversed
            }
        };
        wrong += usize::from(dom.classes[n] != expected);
    }
    out.residuals.insert("crossing.misclassified_nodes".into(), wrong as f64);
    out.check("domains.crossing_witness", wrong == 0);
    out.check("domains.crossing_has_all_classes", dom.counts.iter().all(|c| *c > 0));
    out.detail("crossing_counts", json!({"subluminal": dom.counts[0], "degenerate": dom.counts[1], "reversed": dom.counts[2]}));

    let l = lat.period();
    let calm = FieldConfig::from_fn(lat, |_, x| 0.3 * (2.0 * PI * x / l).sin());
    let dom2 = lag.hyperbolicity_domain(&calm)?;
    out.check("domains.spatial_witness_subluminal", dom2.nh_holds && dom2.counts[0] == lat.len());

    let density: Arc<dyn PointDensity> = Arc::new(ExampleDensity { eps: 0.3, mass2: 0.0 });
    let metric = |t: f64, x: f64| Sym2::new(-1.0 - 0.2 * x.sin(), 0.1 * t.cos(), 1.0 + 0.1 * t);
    let field = |t: f64, x: f64| 0.4 * (t + 2.0 * x).sin();
    let mut worst = 0.0f64;
    for (t, x) in [(0.3f64, 0.7f64), (0.1, 0.2), (0.8, 1.3), (0.5, -0.4)] {
        let g = 0.4 * (t + 2.0 * x).cos();
        let exact = example_principal(&metric(t, x).inverse(), 0.3, field(t, x), (g, 2.0 * g));
        let probe = symbol_limit_probe(&density, &metric, &field, t, x, 0.01)?;
        for (a, b) in exact.as_array().iter().zip(probe.as_array()) {
            worst = worst.max((a - b).abs());
        }
    }
    out.bound("symbol_probe.max_abs", worst, cfg.tolerances.symbol_abs);
    Ok(out)
}

// ---------------------------------------------------------------- bump-partition

fn bump_partition(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let lat = Lattice::new(24, 24, 0.05, 0.05)?;
    let f = TestFunction::bump(lat, 12, 12, 6.0);
    let phi0 = smooth_field(lat, rng, 0.5);
    let radius = 0.5;
    let b = BumpFunctional::new(f.clone(), 1, phi0.clone(), radius)?;
    out.check("bump.centre_is_one", b.functional.value(&phi0)? == 1.0);
    let outer = b.outer_radius();
    let (mut range_bad, mut outside_bad, mut outside_seen) = (0, 0, 0);
    for _ in 0..100 {
        let d = smooth_field(lat, rng, 1.0).add(&FieldConfig { lattice: lat, values: noise(lat, rng, 0.05) });
        let unit = Functional::sobolev_sq(f.clone(), 1, None)?.value(&d)?.sqrt();
        if unit == 0.0 {
            continue;
        }
        let s = rng.gen_range(0.0..2.0 * outer);
        let phi = phi0.axpy(s / unit, &d);
        let v = b.functional.value(&phi)?;
        range_bad += usize::from(!(0.0..=1.0).contains(&v));
        if b.seminorm(&phi)? >= outer * (1.0 + 1e-12) {
            outside_seen += 1;
            outside_bad += usize::from(v != 0.0);
        }
    }
    out.check("bump.range_0_1", range_bad == 0);
    out.check("bump.zero_outside_ball", outside_bad == 0 && outside_seen > 0);
    out.detail("bump", json!({"radius": radius, "outer_radius": outer, "probes": 100, "outside_probes": outside_seen}));

    // Two overlapping balls centred on φ₀ and φ₀ + 1.5R·ê.
    let e = smooth_field(lat, rng, 1.0);
    let e_norm = Functional::sobolev_sq(f.clone(), 1, None)?.value(&e)?.sqrt();
    let phi1 = phi0.axpy(1.5 * radius / e_norm, &e);
    let b1 = BumpFunctional::new(f.clone(), 1, phi1.clone(), radius)?;
    let parts = partition_of_unity(&[b.functional.clone(), b1.functional.clone()])?;
    let mut worst = 0.0f64;
    let mut covered = 0;
    for i in 0..=100 {
        let s = -0.5 + 2.5 * i as f64 / 100.0;
        let jitter = FieldConfig { lattice: lat, values: noise(lat, rng, 0.01) };
        let phi = phi0.axpy(s * 1.5 * radius / e_norm, &e).add(&jitter);
        let total = b.functional.value(&phi)? + b1.functional.value(&phi)?;
        if total <= 0.0 {
            continue;
        }
        covered += 1;
        let sum: f64 = parts.iter().map(|p| p.value(&phi)).collect::<Result<Vec<_>>>()?.iter().sum();
        worst = worst.max((sum - 1.0).abs());
    }
    out.check("partition.cover_nonempty", covered > 10);
    out.bound("partition.sum_minus_one", worst, cfg.tolerances.partition_abs);
    Ok(out)
}

// ---------------------------------------------------------------- support-algebra

fn catalogue_member(st: &Arc<GridSpacetime>, rng: &mut ChaCha8Rng) -> Result<(Functional, String)> {
    let lat = st.lattice;
    let (it, ix) = (rng.gen_range(3..lat.nt - 3), rng.gen_range(0..lat.nx));
    let r = rng.gen_range(1.5..3.5);
    let f = TestFunction::bump(lat, it, ix, r);
    let tag = format!("@({it},{ix})");
    Ok(match rng.gen_range(0..6) {
        0 => (Functional::linear(st, &f)?, format!("linear{tag}")),
        1 => (Functional::sobolev_sq(f, 1, None)?, format!("sobolev{tag}")),
        2 => (Functional::local_density(st, f, Arc::new(ExampleDensity { eps: 0.2, mass2: 1.0 }))?, format!("example{tag}")),
        3 => (Functional::local_density(st, f, Arc::new(PotentialDensity { mass2: 1.0, quartic: 0.5 }))?, format!("potential{tag}")),
        4 => (Functional::exp_pairing(crate::fields::to_density(st, &f.field)?), format!("exp_pairing{tag}")),
        _ => (Functional::compose(OuterMap::Tanh, vec![Functional::linear(st, &f)?])?, format!("tanh_linear{tag}")),
    })
}

fn support_algebra(rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::default();
    let lat = Lattice::new(16, 16, 0.1, 0.1)?;
    let st = Arc::new(GridSpacetime::minkowski(lat));
    let plan = ProbePlan::new(rng.gen());
    let supp = |f: &Functional| -> Result<NodeSet> { Ok(spacetime_support(f, lat, &plan)?.support) };
    let mut rows = Vec::new();
    let (mut sum_bad, mut prod_bad) = (0, 0);
    for i in 0..50 {
        let (f, nf) = catalogue_member(&st, rng)?;
        let (g, ng) = catalogue_member(&st, rng)?;
        let union = supp(&f)?.union(&supp(&g)?);
        let s = supp(&f.add(&g))?;
        let p = supp(&f.mul(&g))?;
        let (ok_s, ok_p) = (s.is_subset(&union), p.is_subset(&union));
        sum_bad += usize::from(!ok_s);
        prod_bad += usize::from(!ok_p);
        out.check(format!("support.pair{i}.sum"), ok_s);
        out.check(format!("support.pair{i}.product"), ok_p);
        rows.push(json!({"f": nf, "g": ng, "union": union.count(), "sum": s.count(), "product": p.count()}));
    }
    out.residuals.insert("sum_violations".into(), sum_bad as f64);
    out.residuals.insert("product_violations".into(), prod_bad as f64);
    out.detail("pairs", json!(rows));

    let small = Lattice::new(12, 12, 0.1, 0.1)?;
    let sst = GridSpacetime::minkowski(small);
    let f = TestFunction::bump(small, 6, 6, 2.5).normalized(&sst)?;
    let g = exp_cutoff_example(&sst, &f, 1.0)?;
    let plan = ProbePlan::new(3);
    let inner = spacetime_support(&g.with_domain(sup_ball(&f, 1.0)), small, &plan)?.support;
    let wide = spacetime_support(&g.with_domain(sup_ball(&f, 1.8)), small, &plan)?.support;
    out.check("cutoff_example.small_ball_empty", inner.is_empty());
    out.check("cutoff_example.large_ball_is_supp_f", wide == f.support());
    out.detail("cutoff_example", json!({"small_ball_support": inner.count(), "large_ball_support": wide.count(), "supp_f": f.support().count()}));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dalembert_oracle_matches_quadrature_of_antiderivative() {
        let (c, w) = SRC_X;
        let direct = simpson(|s| cos4(s, c, w), c - w, 1.1, 2000);
        assert!((cos4_integral(1.1, c, w) - direct).abs() < 1e-12);
        assert!((cos4_integral(5.0, c, w) - 0.75 * w).abs() < 1e-15);
        assert_eq!(dalembert(0.05, 1.0), 0.0);
    }

    #[test]
    fn registry_is_unique_and_complete() {
        let mut names: Vec<_> = SUITES.iter().map(|(n, _)| *n).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), SUITES.len());
        let cfg = ExperimentConfig::default();
        let mut rng = rand::SeedableRng::seed_from_u64(1);
        assert!(run_suite("nope", &cfg, &mut rng).is_err());
    }
}
