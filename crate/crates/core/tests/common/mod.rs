#![allow(dead_code)]

use crplus::model::{parse_portfolio, Obligor, Portfolio, Sector, SeverityDist};

/// Five obligors, two sectors plus the idiosyncratic one.
pub const REFERENCE_JSON: &str = include_str!("../data/reference.json");
pub const REFERENCE_L: usize = 200;
pub const REFERENCE_IDS: [&str; 5] = ["A", "B", "C", "D", "E"];

pub fn reference() -> Portfolio {
    parse_portfolio(REFERENCE_JSON).expect("reference portfolio is valid")
}

pub fn pairs() -> Vec<(&'static str, &'static str)> {
    let mut out = Vec::new();
    for (i, a) in REFERENCE_IDS.iter().enumerate() {
        for b in &REFERENCE_IDS[i + 1..] {
            out.push((*a, *b));
        }
    }
    out
}

pub fn obligor(id: &str, pd: f64, weights: Vec<f64>, severity: SeverityDist) -> Obligor {
    Obligor {
        id: id.into(),
        pd,
        weights,
        severity,
    }
}

pub fn sectors(alphas: &[f64]) -> Vec<Sector> {
    alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| Sector {
            id: format!("s{}", k + 1),
            alpha,
        })
        .collect()
}

/// `P[N = n]` for `N ~ Poisson(lambda)`, `n = 0..=max`, by the product form.
pub fn poisson_counts(lambda: f64, max: usize) -> Vec<f64> {
    let mut out = vec![(-lambda).exp()];
    for n in 1..=max {
        out.push(out[n - 1] * lambda / n as f64);
    }
    out
}

/// `P[N = n] = C(n + alpha - 1, n) (1 - delta)^alpha delta^n`, `n = 0..=max`.
pub fn negbin_counts(alpha: f64, delta: f64, max: usize) -> Vec<f64> {
    let mut out = vec![(1.0 - delta).powf(alpha)];
    for n in 1..=max {
        out.push(out[n - 1] * (alpha + n as f64 - 1.0) / n as f64 * delta);
    }
    out
}

/// Plain double loop, untruncated.
pub fn naive_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Aggregate loss pmf on `0..=max_loss` from claim-count probabilities and a
/// claim-size pmf, summing `counts[c] * q^{*c}` over the listed counts.
pub fn enumerate_compound(counts: &[f64], q: &[f64], max_loss: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_loss + 1];
    let mut power = vec![1.0];
    for &pc in counts {
        for (x, p) in power.iter().enumerate().take(max_loss + 1) {
            out[x] += pc * p;
        }
        power = naive_convolve(&power, q);
        power.truncate(max_loss + 1);
    }
    out
}

pub fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_crplus")
}

use proptest::prelude::*;

/// Small valid portfolios: 1..=3 sectors, 2..=5 obligors, pd <= 0.3,
/// alpha >= 0.5, severities on 0..=5 with at least one positive value.
pub fn arb_portfolio() -> impl Strategy<Value = Portfolio> {
    (1usize..=3, 2usize..=5).prop_flat_map(|(n, m)| {
        let alphas = prop::collection::vec(0.5f64..4.0, n);
        let obligors = prop::collection::vec(arb_obligor(n), m);
        (alphas, obligors).prop_map(|(alphas, mut obligors)| {
            for (i, o) in obligors.iter_mut().enumerate() {
                o.id = format!("O{i}");
            }
            Portfolio {
                sectors: sectors(&alphas),
                obligors,
            }
        })
    })
}

fn arb_obligor(n: usize) -> impl Strategy<Value = Obligor> {
    let weights = prop::collection::vec(prop_oneof![Just(0.0), 0.05f64..1.0], n + 1)
        .prop_filter("some loading", |w| w.iter().sum::<f64>() > 0.0)
        .prop_map(|w| {
            let s: f64 = w.iter().sum();
            let mut w: Vec<f64> = w.iter().map(|x| x / s).collect();
            let fix = 1.0 - w.iter().sum::<f64>();
            let top = (0..w.len())
                .max_by(|&a, &b| w[a].total_cmp(&w[b]))
                .unwrap();
            w[top] += fix;
            w
        });
    let severity = prop::collection::btree_map(0u64..=5, 0.05f64..1.0, 1..=3)
        .prop_filter("positive loss value", |m| m.keys().any(|&v| v > 0))
        .prop_map(|m| {
            let s: f64 = m.values().sum();
            let mut sev = SeverityDist::from_atoms(m.into_iter().map(|(v, p)| (v, p / s)));
            let fix = 1.0 - sev.total_probability();
            *sev.atoms.values_mut().next().unwrap() += fix;
            sev
        });
    (0.0f64..0.3, weights, severity).prop_map(|(pd, weights, severity)| Obligor {
        id: String::new(),
        pd,
        weights,
        severity,
    })
}
