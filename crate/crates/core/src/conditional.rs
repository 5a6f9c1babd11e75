//! Loss distributions conditional on the default of one or two obligors,
//! conditional default intensities given a loss level, and the
//! stressed-input-parameter alternative.
//!
//! Conditioning on obligor `A` turns the loss distribution into a weighted
//! mean of stressed distributions, shifted by an independent copy of `A`'s
//! severity:
//!
//! ```text
//! P[X = x | A] = w_A0 P_a[X = x - E_A] + sum_j w_Aj P_{a+e_j}[X = x - E_A]
//! ```
//!
//! For two obligors the mixture runs over the base, the single increments
//! `+e_j`, the double increments `+2e_j` (carrying the extra factor
//! `(a_j + 1) / a_j`) and the cross increments `+e_i+e_j`, normalized by
//! `1 + sum_k w_1k w_2k / a_k`.
//!
//! Raising sector `j`'s exponent by one multiplies the generating function by
//! a compound geometric factor `G_j`, so the mixtures are evaluated as
//!
//! ```text
//! one default:  P_a * H_A * (w_A0 + sum_j w_Aj G_j)
//! two defaults: P_a * H_1 * H_2 * [M_1 * M_2 + sum_j (w_1j w_2j / a_j) G_j^2] / norm
//! ```
//!
//! with `M_i` the single-default kernel of obligor `i`. That costs a handful
//! of dense convolutions regardless of `N`. [`conditional_pmf_by_terms`]
//! evaluates the same mixtures one stressed distribution at a time and serves
//! as the reference route.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{risk_report, EngineError, LossEngine, RiskReport, StressVector};
use crate::model::{Obligor, Portfolio};
use crate::pmf::{convolve_same, mixture, Pmf, PmfError};

#[derive(Debug, Error)]
pub enum ConditionalError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error("unknown obligor '{0}'")]
    UnknownObligor(String),
    #[error("obligors must be distinct, got '{0}' twice")]
    SameObligor(String),
    #[error("P[X = {x}] is zero; the conditional intensity is undefined")]
    ZeroProbability { x: usize },
    #[error("loss level {x} beyond the truncation limit {max_loss}")]
    BeyondTruncation { x: usize, max_loss: usize },
    #[error("the default of {0} has zero probability")]
    ZeroPd(String),
}

/// A conditional loss distribution with its mixture structure and risk
/// measures.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: Vec<String>,
    pub writeoff: bool,
    /// Weight of each stressed distribution before division by the
    /// normalizer, keyed by stress descriptor (`base`, `+e_2`, `+2e_1`,
    /// `+e_1+e_3`).
    pub mixture_weights: BTreeMap<String, f64>,
    pub normalizer: f64,
    #[serde(skip)]
    pub conditional_pmf: Pmf,
    pub risk: RiskReport,
}

/// Stressed distributions paired with their unnormalized weights.
pub type MixtureTerms = Vec<(StressVector, f64)>;

fn lookup<'a>(portfolio: &'a Portfolio, id: &str) -> Result<&'a Obligor, ConditionalError> {
    portfolio
        .obligor(id)
        .ok_or_else(|| ConditionalError::UnknownObligor(id.to_string()))
}

fn distinct_pair<'a>(
    portfolio: &'a Portfolio,
    a1: &str,
    a2: &str,
) -> Result<(&'a Obligor, &'a Obligor), ConditionalError> {
    if a1 == a2 {
        return Err(ConditionalError::SameObligor(a1.to_string()));
    }
    Ok((lookup(portfolio, a1)?, lookup(portfolio, a2)?))
}

/// `1 + sum_k w_1k w_2k / alpha_k`.
fn pair_normalizer(portfolio: &Portfolio, o1: &Obligor, o2: &Obligor) -> f64 {
    1.0 + portfolio
        .sectors
        .iter()
        .enumerate()
        .map(|(k, s)| o1.weights[k + 1] * o2.weights[k + 1] / s.alpha)
        .sum::<f64>()
}

/// Stressed distributions and weights of the one- or two-default mixture,
/// plus its normalizer. The weights sum to the normalizer.
pub fn mixture_terms(
    portfolio: &Portfolio,
    ids: &[&str],
) -> Result<(MixtureTerms, f64), ConditionalError> {
    let n = portfolio.num_sectors();
    match ids {
        [a] => {
            let o = lookup(portfolio, a)?;
            let mut terms = vec![(StressVector::zero(n), o.weights[0])];
            terms.extend((1..=n).map(|j| (StressVector::unit(n, j, None), o.weights[j])));
            Ok((terms, 1.0))
        }
        [a1, a2] => {
            let (o1, o2) = distinct_pair(portfolio, a1, a2)?;
            let (w1, w2) = (&o1.weights, &o2.weights);
            let mut terms = vec![(StressVector::zero(n), w1[0] * w2[0])];
            for j in 1..=n {
                terms.push((StressVector::unit(n, j, None), w1[0] * w2[j] + w1[j] * w2[0]));
            }
            for j in 1..=n {
                let alpha = portfolio.sectors[j - 1].alpha;
                terms.push((
                    StressVector::unit(n, j, Some(j)),
                    w1[j] * w2[j] * (alpha + 1.0) / alpha,
                ));
            }
            for i in 1..=n {
                for j in i + 1..=n {
                    terms.push((StressVector::unit(n, j, Some(i)), w1[i] * w2[j] + w1[j] * w2[i]));
                }
            }
            Ok((terms, pair_normalizer(portfolio, o1, o2)))
        }
        _ => panic!("conditioning supports one or two obligors, got {}", ids.len()),
    }
}

/// `w_A0 delta_0 + sum_j w_Aj G_j`: the factor that turns the base
/// distribution into the single-default mixture (before the severity shift).
fn single_kernel(engine: &LossEngine, o: &Obligor) -> Result<Pmf, ConditionalError> {
    let l = engine.max_loss();
    let zero = Pmf::point_mass(0, l);
    let mut kernels = Vec::new();
    for (j, &w) in o.weights.iter().enumerate().skip(1) {
        if w > 0.0 {
            kernels.push((w, engine.stress_kernel(j, 1)?));
        }
    }
    let mut parts: Vec<(f64, &Pmf)> = vec![(o.weights[0], &zero)];
    parts.extend(kernels.iter().map(|(w, k)| (*w, k.as_ref())));
    Ok(mixture(&parts)?)
}

fn joint_kernel(
    engine: &LossEngine,
    portfolio: &Portfolio,
    o1: &Obligor,
    o2: &Obligor,
    normalizer: f64,
) -> Result<Pmf, ConditionalError> {
    let product = convolve_same(&single_kernel(engine, o1)?, &single_kernel(engine, o2)?);
    let mut doubles = Vec::new();
    for (k, s) in portfolio.sectors.iter().enumerate() {
        let j = k + 1;
        let c = o1.weights[j] * o2.weights[j] / s.alpha;
        if c > 0.0 {
            doubles.push((c / normalizer, engine.stress_kernel(j, 2)?));
        }
    }
    let mut parts: Vec<(f64, &Pmf)> = vec![(1.0 / normalizer, &product)];
    parts.extend(doubles.iter().map(|(w, k)| (*w, k.as_ref())));
    Ok(mixture(&parts)?)
}

/// Shifts `pmf` by independent copies of the given severities.
fn shift_by_severities(pmf: &Pmf, severities: &[&Obligor]) -> Pmf {
    let l = pmf.max_loss();
    severities
        .iter()
        .fold(pmf.clone(), |acc, o| convolve_same(&acc, &o.severity.to_pmf(l)))
}

/// Normalized conditional loss pmf for the obligors `ids` on `engine`'s
/// system, via the kernel factorization.
fn conditional_pmf(
    engine: &LossEngine,
    portfolio: &Portfolio,
    ids: &[&str],
) -> Result<(Pmf, MixtureTerms, f64), ConditionalError> {
    let (terms, normalizer) = mixture_terms(portfolio, ids)?;
    let base = engine.base_distribution()?;
    let (kernel, obligors) = match ids {
        [a] => {
            let o = lookup(portfolio, a)?;
            (single_kernel(engine, o)?, vec![o])
        }
        [a1, a2] => {
            let (o1, o2) = distinct_pair(portfolio, a1, a2)?;
            (joint_kernel(engine, portfolio, o1, o2, normalizer)?, vec![o1, o2])
        }
        _ => unreachable!("mixture_terms validated the arity"),
    };
    let shifted = shift_by_severities(&base, &obligors);
    Ok((convolve_same(&shifted, &kernel), terms, normalizer))
}

/// Reference evaluation: sums the stressed loss distributions of
/// [`mixture_terms`] one by one, divides by the normalizer, and shifts by the
/// severities of `ids`.
pub fn conditional_pmf_by_terms(
    engine: &LossEngine,
    portfolio: &Portfolio,
    ids: &[&str],
) -> Result<Pmf, ConditionalError> {
    let (terms, normalizer) = mixture_terms(portfolio, ids)?;
    let mut dists = Vec::with_capacity(terms.len());
    for (stress, w) in &terms {
        if *w > 0.0 {
            dists.push((w / normalizer, engine.loss_distribution(stress)?));
        }
    }
    let parts: Vec<(f64, &Pmf)> = dists.iter().map(|(w, p)| (*w, p.as_ref())).collect();
    let mixed = mixture(&parts)?;
    let obligors = ids
        .iter()
        .map(|id| lookup(portfolio, id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(shift_by_severities(&mixed, &obligors))
}

/// Portfolio and engine with the severities of `ids` set to zero: the
/// write-off setting, where sector intensities are unchanged but the sector
/// polynomials pick up mass at 0.
pub fn writeoff_engine(
    engine: &LossEngine,
    portfolio: &Portfolio,
    ids: &[&str],
) -> Result<(Portfolio, LossEngine), ConditionalError> {
    for id in ids {
        lookup(portfolio, id)?;
    }
    let zeroed = portfolio.with_zero_severity(ids);
    let e = LossEngine::from_portfolio(&zeroed, engine.max_loss(), engine.tail_tolerance())?;
    Ok((zeroed, e))
}

fn scenario_report(
    engine: &LossEngine,
    portfolio: &Portfolio,
    ids: &[&str],
    writeoff: bool,
    thetas: &[f64],
) -> Result<ScenarioReport, ConditionalError> {
    let (pmf, terms, normalizer) = if writeoff {
        let (zeroed, e) = writeoff_engine(engine, portfolio, ids)?;
        conditional_pmf(&e, &zeroed, ids)?
    } else {
        conditional_pmf(engine, portfolio, ids)?
    };
    // Not renormalized: a conditional tail above the tolerance is reported
    // through `risk.approximate`.
    let mixture_weights = terms.iter().map(|(s, w)| (s.to_string(), *w)).collect();
    Ok(ScenarioReport {
        scenario: ids.iter().map(|s| s.to_string()).collect(),
        writeoff,
        mixture_weights,
        normalizer,
        risk: risk_report(&pmf, thetas, engine.tail_tolerance())?,
        conditional_pmf: pmf,
    })
}

/// Loss distribution conditional on the default of `obligor`. With
/// `writeoff`, the obligor's own loss is excluded (severity set to 0 and the
/// sector polynomials rebuilt).
pub fn loss_given_one_default(
    engine: &LossEngine,
    portfolio: &Portfolio,
    obligor: &str,
    writeoff: bool,
    thetas: &[f64],
) -> Result<ScenarioReport, ConditionalError> {
    scenario_report(engine, portfolio, &[obligor], writeoff, thetas)
}

/// Loss distribution conditional on the joint default of `a1` and `a2`.
pub fn loss_given_two_defaults(
    engine: &LossEngine,
    portfolio: &Portfolio,
    a1: &str,
    a2: &str,
    writeoff: bool,
    thetas: &[f64],
) -> Result<ScenarioReport, ConditionalError> {
    scenario_report(engine, portfolio, &[a1, a2], writeoff, thetas)
}

/// `E[prod_i D_i | X = x]` for every `x` on the grid; `None` where
/// `P[X = x] = 0`.
fn intensity_curve(
    engine: &LossEngine,
    portfolio: &Portfolio,
    ids: &[&str],
) -> Result<Vec<Option<f64>>, ConditionalError> {
    let (pmf, _, normalizer) = conditional_pmf(engine, portfolio, ids)?;
    let scale = expected_default_product(portfolio, ids)?;
    debug_assert!(
        ids.len() == 1 || {
            let p: f64 = ids.iter().map(|id| portfolio.obligor(id).map_or(0.0, |o| o.pd)).product();
            (scale - p * normalizer).abs() <= 1e-12 * scale.max(1.0)
        }
    );
    let base = engine.base_distribution()?;
    Ok(base
        .probs()
        .iter()
        .zip(pmf.probs())
        .map(|(&p, &c)| (p > 0.0).then(|| scale * c / p))
        .collect())
}

fn at_level(curve: &[Option<f64>], x: usize, max_loss: usize) -> Result<f64, ConditionalError> {
    match curve.get(x) {
        None => Err(ConditionalError::BeyondTruncation { x, max_loss }),
        Some(None) => Err(ConditionalError::ZeroProbability { x }),
        Some(Some(v)) => Ok(*v),
    }
}

/// `E[D_A | X = x]` for every loss level on the grid.
pub fn default_intensity_curve(
    engine: &LossEngine,
    portfolio: &Portfolio,
    obligor: &str,
) -> Result<Vec<Option<f64>>, ConditionalError> {
    intensity_curve(engine, portfolio, &[obligor])
}

/// `E[D_A | X = x]`, the approximation of `A`'s default probability given
/// the portfolio loss `x`.
pub fn cond_default_intensity(
    engine: &LossEngine,
    portfolio: &Portfolio,
    obligor: &str,
    x: usize,
) -> Result<f64, ConditionalError> {
    let curve = default_intensity_curve(engine, portfolio, obligor)?;
    at_level(&curve, x, engine.max_loss())
}

/// `E[D_1 D_2 | X = x]` for every loss level on the grid.
pub fn joint_intensity_curve(
    engine: &LossEngine,
    portfolio: &Portfolio,
    a1: &str,
    a2: &str,
) -> Result<Vec<Option<f64>>, ConditionalError> {
    intensity_curve(engine, portfolio, &[a1, a2])
}

/// `E[D_1 D_2 | X = x]`.
pub fn joint_cond_intensity(
    engine: &LossEngine,
    portfolio: &Portfolio,
    a1: &str,
    a2: &str,
    x: usize,
) -> Result<f64, ConditionalError> {
    let curve = joint_intensity_curve(engine, portfolio, a1, a2)?;
    at_level(&curve, x, engine.max_loss())
}

/// `E[D_1 D_2] = p_1 p_2 (1 + sum_k w_1k w_2k / alpha_k)`.
pub fn joint_default_intensity(
    portfolio: &Portfolio,
    a1: &str,
    a2: &str,
) -> Result<f64, ConditionalError> {
    let (o1, o2) = distinct_pair(portfolio, a1, a2)?;
    Ok(o1.pd * o2.pd * pair_normalizer(portfolio, o1, o2))
}

/// `E[S^c]` for a unit-mean Gamma factor with shape `alpha`.
fn gamma_moment(alpha: f64, c: u32) -> f64 {
    (0..c).map(|i| 1.0 + f64::from(i) / alpha).product()
}

/// `E[prod_i (sum_k w_ik S_k)]` over the listed obligors, expanding the
/// product over all sector index tuples.
pub fn factor_moment(portfolio: &Portfolio, ids: &[&str]) -> Result<f64, ConditionalError> {
    let obligors = ids
        .iter()
        .map(|id| lookup(portfolio, id))
        .collect::<Result<Vec<_>, _>>()?;
    fn expand(
        obligors: &[&Obligor],
        alphas: &[f64],
        counts: &mut Vec<u32>,
        coef: f64,
    ) -> f64 {
        let Some((first, rest)) = obligors.split_first() else {
            return coef
                * counts
                    .iter()
                    .zip(alphas)
                    .map(|(&c, &a)| gamma_moment(a, c))
                    .product::<f64>();
        };
        let mut total = expand(rest, alphas, counts, coef * first.weights[0]);
        for k in 1..first.weights.len() {
            let w = first.weights[k];
            if w == 0.0 {
                continue;
            }
            counts[k - 1] += 1;
            total += expand(rest, alphas, counts, coef * w);
            counts[k - 1] -= 1;
        }
        total
    }
    let alphas: Vec<f64> = portfolio.sectors.iter().map(|s| s.alpha).collect();
    let mut counts = vec![0; alphas.len()];
    Ok(expand(&obligors, &alphas, &mut counts, 1.0))
}

/// `E[prod_i D_i]` for distinct obligors: `prod_i p_i` times the factor
/// moment.
pub fn expected_default_product(portfolio: &Portfolio, ids: &[&str]) -> Result<f64, ConditionalError> {
    for (i, a) in ids.iter().enumerate() {
        if ids[..i].contains(a) {
            return Err(ConditionalError::SameObligor(a.to_string()));
        }
    }
    let pds: f64 = ids
        .iter()
        .map(|id| lookup(portfolio, id).map(|o| o.pd))
        .product::<Result<f64, _>>()?;
    Ok(pds * factor_moment(portfolio, ids)?)
}

/// Conditional PD of `b` given that `a` defaulted,
/// `E[D_a D_b] / p_a = p_b (1 + sum_k w_ak w_bk / alpha_k)`.
pub fn stressed_pd(portfolio: &Portfolio, b: &str, a: &str) -> Result<f64, ConditionalError> {
    let (ob, oa) = distinct_pair(portfolio, b, a)?;
    if oa.pd == 0.0 {
        return Err(ConditionalError::ZeroPd(a.to_string()));
    }
    Ok(ob.pd * pair_normalizer(portfolio, oa, ob))
}

/// Conditional PD of `b` given the joint default of every obligor in
/// `defaulted`: `E[D_b prod D_a] / E[prod D_a]`.
pub fn stressed_pd_given(
    portfolio: &Portfolio,
    b: &str,
    defaulted: &[&str],
) -> Result<f64, ConditionalError> {
    if defaulted.contains(&b) {
        return Err(ConditionalError::SameObligor(b.to_string()));
    }
    let denominator = expected_default_product(portfolio, defaulted)?;
    if denominator == 0.0 {
        return Err(ConditionalError::ZeroPd(defaulted.join(" and ")));
    }
    let mut all = defaulted.to_vec();
    all.push(b);
    Ok(expected_default_product(portfolio, &all)? / denominator)
}

/// The stressed-input-parameters portfolio for a default scenario: the
/// defaulted obligors removed and every other obligor's pd replaced by its
/// conditional pd given the scenario.
pub fn stressed_input_portfolio(
    portfolio: &Portfolio,
    defaulted: &[&str],
) -> Result<Portfolio, ConditionalError> {
    let mut out = portfolio.clone();
    out.obligors.retain(|o| !defaulted.contains(&o.id.as_str()));
    for o in &mut out.obligors {
        o.pd = stressed_pd_given(portfolio, &o.id, defaulted)?;
    }
    Ok(out)
}

/// Loss distribution of the stressed-input-parameters approach: the
/// re-parameterized portfolio, shifted by the defaulted obligors' own
/// severities unless `writeoff`.
pub fn stressed_input_distribution(
    engine: &LossEngine,
    portfolio: &Portfolio,
    defaulted: &[&str],
    writeoff: bool,
) -> Result<Pmf, ConditionalError> {
    let stressed = stressed_input_portfolio(portfolio, defaulted)?;
    let e = LossEngine::from_portfolio(&stressed, engine.max_loss(), engine.tail_tolerance())?;
    let base = e.base_distribution()?;
    if writeoff {
        return Ok((*base).clone());
    }
    let obligors = defaulted
        .iter()
        .map(|id| lookup(portfolio, id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(shift_by_severities(&base, &obligors))
}
