use peierls_lab::cli::ExperimentConfig;
use peierls_lab::fields::{pair, Density, FieldConfig, TestFunction};
use peierls_lab::functionals::{ExampleDensity, Functional};
use peierls_lab::geometry::{GridSpacetime, Lattice, NodeSet};
use peierls_lab::lagrangian::GeneralizedLagrangian;
use peierls_lab::microcausal::{in_upsilon, product_wf_bound, CovectorTuple, Label, LabelSet};
use peierls_lab::peierls::{peierls_bracket, BracketContext};
use proptest::prelude::*;
use std::sync::Arc;

fn ctx() -> (Arc<BracketContext>, Lattice) {
    let lat = Lattice::new(24, 16, 0.05, 0.1).unwrap();
    let lag = GeneralizedLagrangian::example(Arc::new(GridSpacetime::minkowski(lat)), 0.1, 0.5).unwrap();
    (BracketContext::new(lag, 2).unwrap(), lat)
}

fn local(ctx: &BracketContext, it: usize, ix: usize, eps: f64) -> Functional {
    let f = TestFunction::bump(ctx.lagrangian.lattice(), it, ix, 2.5);
    Functional::local_density(&ctx.lagrangian.st, f, Arc::new(ExampleDensity { eps, mass2: 1.0 })).unwrap()
}

fn field(lat: Lattice, a: f64, b: f64) -> FieldConfig {
    FieldConfig::from_fn(lat, |t, x| a * (2.0 * t + b).sin() * (x * std::f64::consts::PI / 0.8).cos())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bracket_is_exactly_antisymmetric(it1 in 7usize..17, it2 in 7usize..17, ix1 in 0usize..16, ix2 in 0usize..16,
                                         e in 0.0f64..0.3, a in -0.3f64..0.3, b in 0.0f64..3.0) {
        let (ctx, lat) = ctx();
        let (f, g) = (local(&ctx, it1, ix1, e), local(&ctx, it2, ix2, 0.1));
        let p = field(lat, a, b);
        let fg = peierls_bracket(&ctx, &f, &g, &p).unwrap();
        let gf = peierls_bracket(&ctx, &g, &f, &p).unwrap();
        prop_assert_eq!(fg + gf, 0.0);
    }

    #[test]
    fn bracket_is_bilinear(s in -2.0f64..2.0, u in -2.0f64..2.0, a in -0.2f64..0.2) {
        let (ctx, lat) = ctx();
        let (f, g, h) = (local(&ctx, 15, 8, 0.2), local(&ctx, 9, 6, 0.0), local(&ctx, 12, 10, 0.1));
        let p = field(lat, a, 0.4);
        let lhs = peierls_bracket(&ctx, &f.scale(s).add(&g.scale(u)), &h, &p).unwrap();
        let (x, y) = (peierls_bracket(&ctx, &f, &h, &p).unwrap(), peierls_bracket(&ctx, &g, &h, &p).unwrap());
        let scale = (s * x).abs().max((u * y).abs()).max(f64::MIN_POSITIVE);
        prop_assert!((lhs - s * x - u * y).abs() <= 1e-12 * scale);
    }

    #[test]
    fn retarded_and_advanced_solutions_are_transposes(seed in any::<u64>()) {
        let lat = Lattice::new(12, 10, 0.04, 0.1).unwrap();
        let lag = GeneralizedLagrangian::example(Arc::new(GridSpacetime::minkowski(lat)), 0.0, 1.0).unwrap();
        let p = lag.linearize(&FieldConfig::zeros(lat)).unwrap().propagator().unwrap();
        let v = |k: u64| Density::from_node_fn(lat, |it, ix| (((it * 13 + ix * 7) as u64 ^ seed.rotate_left(k as u32)) % 17) as f64 - 8.0);
        let (f, h) = (v(3), v(29));
        let (l, r) = (pair(&f, &p.delta_ret(&h).unwrap()).unwrap(), pair(&h, &p.delta_adv(&f).unwrap()).unwrap());
        prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(1.0));
    }

    #[test]
    fn upsilon_is_conic(xi in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..4),
                        scales in proptest::collection::vec(0.01f64..100.0, 3)) {
        prop_assume!(xi.iter().any(|(a, b)| *a != 0.0 || *b != 0.0));
        let st = GridSpacetime::minkowski(Lattice::new(4, 4, 0.1, 0.1).unwrap());
        let t = CovectorTuple::at_node(5, xi.iter().map(|(a, b)| [*a, *b]).collect()).unwrap();
        let s = t.scaled(&scales[..t.k()]);
        prop_assert_eq!(in_upsilon(&st, &t).unwrap(), in_upsilon(&st, &s).unwrap());
    }

    #[test]
    fn spacelike_words_are_closed_under_products(a in proptest::collection::vec(0usize..4, 2), b in proptest::collection::vec(0usize..4, 2)) {
        let labels = [Label::Zero, Label::FutureCausal, Label::PastCausal, Label::Spacelike];
        let mut wa: Vec<Label> = a.iter().map(|i| labels[*i]).collect();
        let mut wb: Vec<Label> = b.iter().map(|i| labels[*i]).collect();
        wa[0] = Label::Spacelike;
        wb[1] = Label::Spacelike;
        let fa: LabelSet = [wa].into_iter().collect();
        let fb: LabelSet = [wb].into_iter().collect();
        prop_assert!(product_wf_bound(&fa, &fb, 2, 2).unwrap().contained);
    }

    #[test]
    fn node_set_dilation_is_monotone(cells in proptest::collection::vec((0usize..10, 0usize..10), 1..6), r in 0usize..3) {
        let lat = Lattice::new(10, 10, 0.1, 0.1).unwrap();
        let s = NodeSet::from_nodes(lat, &cells).unwrap();
        let d = s.dilate(r);
        prop_assert!(s.is_subset(&d));
        prop_assert!(d.is_subset(&s.dilate(r + 1)));
        prop_assert_eq!(s.union(&d), d.clone());
    }

    #[test]
    fn config_round_trips_through_toml(seed in 0u64..(i64::MAX as u64), eps in 0.0f64..1.0, nt in 16usize..80) {
        let mut c = ExperimentConfig::default();
        c.seed = seed;
        c.lagrangian.eps = eps;
        c.grid.nt = nt;
        let text = toml::to_string(&c).unwrap();
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
    }
}
