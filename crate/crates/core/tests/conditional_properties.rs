mod common;

use common::*;
use crplus::conditional::{
    conditional_pmf_by_terms, default_intensity_curve, loss_given_one_default,
    loss_given_two_defaults, mixture_terms, stressed_pd, stressed_pd_given, writeoff_engine,
};
use crplus::engine::{LossEngine, StressVector};
use crplus::model::{Portfolio, SeverityDist};
use crplus::pmf::Pmf;
use proptest::prelude::*;

const L: usize = 600;

fn engine(p: &Portfolio) -> LossEngine {
    LossEngine::from_portfolio(p, L, 1e-9).expect("engine")
}

fn max_diff(a: &Pmf, b: &Pmf) -> f64 {
    (0..=L).map(|x| (a.prob(x) - b.prob(x)).abs()).fold(0.0, f64::max)
}

fn two_ids(p: &Portfolio, i: usize, j: usize) -> (String, String) {
    let m = p.obligors.len();
    let i = i % m;
    let j = (i + 1 + j % (m - 1)) % m;
    (p.obligors[i].id.clone(), p.obligors[j].id.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn two_default_scenarios_are_symmetric(p in arb_portfolio(), i in 0usize..5, j in 0usize..5, w in any::<bool>()) {
        let e = engine(&p);
        let (a, b) = two_ids(&p, i, j);
        let ab = loss_given_two_defaults(&e, &p, &a, &b, w, &[0.9]).unwrap();
        let ba = loss_given_two_defaults(&e, &p, &b, &a, w, &[0.9]).unwrap();
        prop_assert!(max_diff(&ab.conditional_pmf, &ba.conditional_pmf) < 1e-13);
        prop_assert!((ab.normalizer - ba.normalizer).abs() < 1e-15);
    }

    #[test]
    fn scenario_reports_are_normalized(p in arb_portfolio(), i in 0usize..5, j in 0usize..5, w in any::<bool>()) {
        let e = engine(&p);
        let (a, b) = two_ids(&p, i, j);
        for r in [
            loss_given_one_default(&e, &p, &a, w, &[0.9]).unwrap(),
            loss_given_two_defaults(&e, &p, &a, &b, w, &[0.9]).unwrap(),
        ] {
            let weights: f64 = r.mixture_weights.values().map(|v| v / r.normalizer).sum();
            prop_assert!((weights - 1.0).abs() < 1e-12);
            let pmf = &r.conditional_pmf;
            prop_assert!((pmf.total_mass() - (1.0 - pmf.tail_mass())).abs() < 1e-10);
            prop_assert!(pmf.tail_mass() < 1e-9);
        }
    }

    #[test]
    fn factored_route_matches_stressed_distribution_sum(p in arb_portfolio(), i in 0usize..5, j in 0usize..5) {
        let e = engine(&p);
        let (a, b) = two_ids(&p, i, j);
        let one = loss_given_one_default(&e, &p, &a, false, &[0.9]).unwrap();
        let one_ref = conditional_pmf_by_terms(&e, &p, &[&a]).unwrap();
        prop_assert!(max_diff(&one.conditional_pmf, &one_ref) < 1e-13);
        let two = loss_given_two_defaults(&e, &p, &a, &b, false, &[0.9]).unwrap();
        let two_ref = conditional_pmf_by_terms(&e, &p, &[&a, &b]).unwrap();
        prop_assert!(max_diff(&two.conditional_pmf, &two_ref) < 1e-13);
    }

    #[test]
    fn writeoff_matches_zeroed_system(p in arb_portfolio(), i in 0usize..5, j in 0usize..5) {
        let e = engine(&p);
        let (a, b) = two_ids(&p, i, j);
        let ids = [a.as_str(), b.as_str()];
        let r = loss_given_two_defaults(&e, &p, &a, &b, true, &[0.9]).unwrap();
        let (zeroed, ez) = writeoff_engine(&e, &p, &ids).unwrap();
        let reference = conditional_pmf_by_terms(&ez, &zeroed, &ids).unwrap();
        prop_assert!(max_diff(&r.conditional_pmf, &reference) < 1e-13);
        // Sector intensities are untouched by the write-off.
        for (m0, m1) in e.system().mu().iter().zip(ez.system().mu()) {
            prop_assert!((m0 - m1).abs() < 1e-15);
        }
    }

    #[test]
    fn bayes_coherence(p in arb_portfolio(), i in 0usize..5) {
        let e = engine(&p);
        let id = p.obligors[i % p.obligors.len()].id.clone();
        let pd = p.obligor(&id).unwrap().pd;
        prop_assume!(pd > 1e-6);
        let base = e.base_distribution().unwrap();
        let r = loss_given_one_default(&e, &p, &id, false, &[0.9]).unwrap();
        let curve = default_intensity_curve(&e, &p, &id).unwrap();
        for x in 0..=L {
            let bayes = curve[x].map_or(0.0, |c| c * base.prob(x) / pd);
            prop_assert!((r.conditional_pmf.prob(x) - bayes).abs() < 1e-12);
        }
    }

    #[test]
    fn silent_second_default_reduces_to_one(p in arb_portfolio(), i in 0usize..5, pd in 0.0f64..0.3) {
        // An extra idiosyncratic obligor with zero severity is an independent,
        // zero-impact event.
        let mut q = p.clone();
        q.obligors.push(obligor("silent", pd, {
            let mut w = vec![0.0; p.sectors.len() + 1];
            w[0] = 1.0;
            w
        }, SeverityDist::deterministic(0)));
        let e = engine(&q);
        let id = q.obligors[i % p.obligors.len()].id.clone();
        let one = loss_given_one_default(&e, &q, &id, false, &[0.9]).unwrap();
        let two = loss_given_two_defaults(&e, &q, &id, "silent", false, &[0.9]).unwrap();
        prop_assert!(max_diff(&one.conditional_pmf, &two.conditional_pmf) < 1e-12);
    }

    #[test]
    fn general_stressed_pd_agrees_with_pair_formula(p in arb_portfolio(), i in 0usize..5, j in 0usize..5) {
        let (a, b) = two_ids(&p, i, j);
        prop_assume!(p.obligor(&a).unwrap().pd > 1e-6);
        let closed = stressed_pd(&p, &b, &a).unwrap();
        let general = stressed_pd_given(&p, &b, &[&a]).unwrap();
        prop_assert!((closed - general).abs() < 1e-14);
        prop_assert!(closed >= p.obligor(&b).unwrap().pd);
    }
}

#[test]
fn single_stress_raises_the_mean() {
    let p = Portfolio {
        sectors: sectors(&[1.3]),
        obligors: vec![
            obligor("A", 0.2, vec![0.3, 0.7], SeverityDist::from_atoms([(1, 0.5), (4, 0.5)])),
            obligor("B", 0.1, vec![0.0, 1.0], SeverityDist::deterministic(2)),
        ],
    };
    let e = engine(&p);
    let base = e.loss_distribution(&StressVector::zero(1)).unwrap();
    let stressed = e.loss_distribution(&StressVector::unit(1, 1, None)).unwrap();
    assert!(stressed.mean() > base.mean());
}

#[test]
fn reference_mixture_descriptors() {
    let p = reference();
    let (terms, norm) = mixture_terms(&p, &["A", "B"]).unwrap();
    let keys: Vec<String> = terms.iter().map(|(s, _)| s.to_string()).collect();
    assert_eq!(keys, ["base", "+e_1", "+e_2", "+2e_1", "+2e_2", "+e_1+e_2"]);
    // w_A = (.2, .8, 0), w_B = (.3, .5, .2), alphas (.8, 1.5).
    let expected = [0.06, 0.2 * 0.5 + 0.8 * 0.3, 0.2 * 0.2, 0.8 * 0.5 * 1.8 / 0.8, 0.0, 0.8 * 0.2];
    for ((_, w), x) in terms.iter().zip(expected) {
        assert!((w - x).abs() < 1e-15);
    }
    assert!((norm - (1.0 + 0.4 / 0.8)).abs() < 1e-15);
}
