//! Monte Carlo simulation of the same factor model, used as an independent
//! check of the analytical engine and the conditional formulas.
//!
//! Each draw samples the sector factors `S_k ~ Gamma(alpha_k, 1/alpha_k)`
//! (`S_0 = 1`), then per obligor a default count
//! `D_A ~ Poisson(p_A sum_k w_Ak S_k)` and `D_A` independent severities.
//! Draw `i` uses ChaCha stream `i` of the seeded generator, so results do not
//! depend on how draws are scheduled.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::conditional::{expected_default_product, ConditionalError};
use crate::model::{validate, Diagnostic, Portfolio};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid portfolio: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidPortfolio(Vec<Diagnostic>),
    #[error("draws must be at least 1")]
    NoDraws,
    #[error(transparent)]
    Scenario(#[from] ConditionalError),
    #[error("no draw has a default of {0}; the conditional estimate is undefined")]
    NoAcceptedDraws(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub draws: u64,
    pub seed: u64,
    /// Keep a histogram of default counts per obligor.
    pub record_default_counts: bool,
}

impl SimConfig {
    pub fn new(draws: u64, seed: u64) -> Self {
        Self {
            draws,
            seed,
            record_default_counts: false,
        }
    }
}

/// Running sums of a per-draw quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Tally {
    pub sum: f64,
    pub sum_sq: f64,
}

impl Tally {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self, n: u64) -> f64 {
        self.sum / n as f64
    }

    /// Standard error of the mean over `n` draws.
    pub fn std_error(&self, n: u64) -> f64 {
        let n = n as f64;
        let m = self.sum / n;
        ((self.sum_sq / n - m * m).max(0.0) / n).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub config: SimConfig,
    pub obligor_ids: Vec<String>,
    pub sector_ids: Vec<String>,
    pub loss_counts: BTreeMap<u64, u64>,
    pub loss: Tally,
    /// `D_A` per obligor, in portfolio order.
    pub defaults: Vec<Tally>,
    /// `(S_k - 1)^2` per sector.
    pub factor_deviation_sq: Vec<Tally>,
    pub default_histograms: Option<Vec<BTreeMap<u64, u64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BucketEstimate {
    pub probability: f64,
    pub std_error: f64,
}

impl SimResult {
    pub fn draws(&self) -> u64 {
        self.config.draws
    }

    /// Empirical `P[X = x]` with its binomial standard error.
    pub fn loss_probability(&self, x: u64) -> BucketEstimate {
        let n = self.draws() as f64;
        let p = self.loss_counts.get(&x).copied().unwrap_or(0) as f64 / n;
        BucketEstimate {
            probability: p,
            std_error: (p * (1.0 - p) / n).sqrt(),
        }
    }

    pub fn summary(&self, portfolio: &Portfolio) -> SimSummary {
        let n = self.draws();
        SimSummary {
            seed: self.config.seed,
            draws: n,
            mean_loss: self.loss.mean(n),
            mean_loss_std_error: self.loss.std_error(n),
            obligors: self
                .obligor_ids
                .iter()
                .zip(&portfolio.obligors)
                .zip(&self.defaults)
                .map(|((id, o), t)| ObligorSummary {
                    id: id.clone(),
                    pd: o.pd,
                    mean_defaults: t.mean(n),
                    std_error: t.std_error(n),
                })
                .collect(),
            sectors: self
                .sector_ids
                .iter()
                .zip(&portfolio.sectors)
                .zip(&self.factor_deviation_sq)
                .map(|((id, s), t)| SectorSummary {
                    id: id.clone(),
                    alpha: s.alpha,
                    model_variance: 1.0 / s.alpha,
                    factor_variance: t.mean(n),
                    std_error: t.std_error(n),
                })
                .collect(),
        }
    }

    /// `loss,count,probability,std_error` for every observed loss.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("loss,count,probability,std_error\n");
        for &x in self.loss_counts.keys() {
            let e = self.loss_probability(x);
            out.push_str(&format!(
                "{x},{},{:e},{:e}\n",
                self.loss_counts[&x], e.probability, e.std_error
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObligorSummary {
    pub id: String,
    pub pd: f64,
    pub mean_defaults: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorSummary {
    pub id: String,
    pub alpha: f64,
    pub model_variance: f64,
    pub factor_variance: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub seed: u64,
    pub draws: u64,
    pub mean_loss: f64,
    pub mean_loss_std_error: f64,
    pub obligors: Vec<ObligorSummary>,
    pub sectors: Vec<SectorSummary>,
}

enum SeveritySampler {
    Point(u64),
    Table(Vec<u64>, WeightedIndex<f64>),
}

impl SeveritySampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            Self::Point(v) => *v,
            Self::Table(values, index) => values[index.sample(rng)],
        }
    }
}

struct Sampler<'a> {
    portfolio: &'a Portfolio,
    factors: Vec<Gamma<f64>>,
    severities: Vec<SeveritySampler>,
    base: ChaCha8Rng,
}

/// Buffers for one draw.
struct Draw {
    factors: Vec<f64>,
    defaults: Vec<u64>,
    losses: Vec<u64>,
    total: u64,
}

impl<'a> Sampler<'a> {
    fn new(portfolio: &'a Portfolio, cfg: &SimConfig) -> Result<Self, SimError> {
        let diagnostics = validate(portfolio);
        if !diagnostics.is_empty() {
            return Err(SimError::InvalidPortfolio(diagnostics));
        }
        if cfg.draws == 0 {
            return Err(SimError::NoDraws);
        }
        let factors = portfolio
            .sectors
            .iter()
            .map(|s| Gamma::new(s.alpha, 1.0 / s.alpha).expect("validated alpha"))
            .collect();
        let severities = portfolio
            .obligors
            .iter()
            .map(|o| match o.severity.as_deterministic() {
                Some(v) => SeveritySampler::Point(v),
                None => {
                    let values = o.severity.atoms.keys().copied().collect();
                    let index = WeightedIndex::new(o.severity.atoms.values().copied())
                        .expect("validated severity");
                    SeveritySampler::Table(values, index)
                }
            })
            .collect();
        Ok(Self {
            portfolio,
            factors,
            severities,
            base: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    fn buffers(&self) -> Draw {
        Draw {
            factors: vec![1.0; self.factors.len()],
            defaults: vec![0; self.severities.len()],
            losses: vec![0; self.severities.len()],
            total: 0,
        }
    }

    fn rng(&self, draw: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(draw);
        rng
    }

    /// `p_A^S = p_A (w_A0 + sum_k w_Ak S_k)`.
    fn intensity(&self, a: usize, factors: &[f64]) -> f64 {
        let o = &self.portfolio.obligors[a];
        let loading: f64 = o.weights[0]
            + o.weights[1..]
                .iter()
                .zip(factors)
                .map(|(w, s)| w * s)
                .sum::<f64>();
        o.pd * loading
    }

    fn draw(&self, rng: &mut ChaCha8Rng, d: &mut Draw) {
        for (s, g) in d.factors.iter_mut().zip(&self.factors) {
            *s = g.sample(rng);
        }
        d.total = 0;
        for a in 0..self.severities.len() {
            let lambda = self.intensity(a, &d.factors);
            let count = if lambda > 0.0 {
                Poisson::new(lambda).expect("finite intensity").sample(rng) as u64
            } else {
                0
            };
            let loss: u64 = (0..count).map(|_| self.severities[a].sample(rng)).sum();
            d.defaults[a] = count;
            d.losses[a] = loss;
            d.total += loss;
        }
    }
}

/// Runs `cfg.draws` independent draws and tallies the portfolio loss, the
/// default counts and the factor deviations.
pub fn simulate(portfolio: &Portfolio, cfg: SimConfig) -> Result<SimResult, SimError> {
    let sampler = Sampler::new(portfolio, &cfg)?;
    let mut d = sampler.buffers();
    let mut loss_counts = BTreeMap::new();
    let mut loss = Tally::default();
    let mut defaults = vec![Tally::default(); portfolio.obligors.len()];
    let mut factor_deviation_sq = vec![Tally::default(); portfolio.sectors.len()];
    let mut histograms = cfg
        .record_default_counts
        .then(|| vec![BTreeMap::new(); portfolio.obligors.len()]);
    for i in 0..cfg.draws {
        sampler.draw(&mut sampler.rng(i), &mut d);
        *loss_counts.entry(d.total).or_insert(0) += 1;
        loss.add(d.total as f64);
        for (t, &c) in defaults.iter_mut().zip(&d.defaults) {
            t.add(c as f64);
        }
        for (t, &s) in factor_deviation_sq.iter_mut().zip(&d.factors) {
            t.add((s - 1.0).powi(2));
        }
        if let Some(h) = histograms.as_mut() {
            for (h, &c) in h.iter_mut().zip(&d.defaults) {
                *h.entry(c).or_insert(0) += 1;
            }
        }
    }
    Ok(SimResult {
        config: cfg,
        obligor_ids: portfolio.obligors.iter().map(|o| o.id.clone()).collect(),
        sector_ids: portfolio.sectors.iter().map(|s| s.id.clone()).collect(),
        loss_counts,
        loss,
        defaults,
        factor_deviation_sq,
        default_histograms: histograms,
    })
}

/// Conditional loss pmf estimated by weighting each draw with
/// `prod_i D_i` and dividing by the exact `E[prod_i D_i]`.
#[derive(Debug, Clone, Serialize)]
pub struct WeightedEstimate {
    pub draws: u64,
    pub normalizer: f64,
    /// Indexed by loss, up to the largest loss with positive weight.
    pub buckets: Vec<BucketEstimate>,
}

/// Conditional loss pmf estimated from the draws with `D_A >= 1` only.
#[derive(Debug, Clone, Serialize)]
pub struct RejectionEstimate {
    pub accepted: u64,
    pub buckets: Vec<BucketEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OneDefaultEstimate {
    pub weighted: WeightedEstimate,
    pub rejection: RejectionEstimate,
}

fn scenario_indices(portfolio: &Portfolio, ids: &[&str]) -> Result<Vec<usize>, SimError> {
    expected_default_product(portfolio, ids)?;
    Ok(ids
        .iter()
        .map(|id| portfolio.obligor_index(id).expect("checked above"))
        .collect())
}

fn weighted_buckets(sums: &BTreeMap<u64, Tally>, draws: u64, scale: f64) -> Vec<BucketEstimate> {
    let len = sums.keys().next_back().map_or(0, |&x| x as usize + 1);
    let mut out = vec![
        BucketEstimate {
            probability: 0.0,
            std_error: 0.0
        };
        len
    ];
    for (&x, t) in sums {
        out[x as usize] = BucketEstimate {
            probability: t.mean(draws) / scale,
            std_error: t.std_error(draws) / scale,
        };
    }
    out
}

/// Draw loop shared by the conditional estimators. Calls `visit` with the
/// loss (excluding the scenario obligors' own losses under `writeoff`), the
/// weight `prod_i D_i`, and whether every scenario obligor defaulted.
fn scan_scenario(
    sampler: &Sampler,
    idx: &[usize],
    writeoff: bool,
    draws: u64,
    mut visit: impl FnMut(u64, f64, bool),
) {
    let mut d = sampler.buffers();
    for i in 0..draws {
        sampler.draw(&mut sampler.rng(i), &mut d);
        let own: u64 = idx.iter().map(|&a| d.losses[a]).sum();
        let x = if writeoff { d.total - own } else { d.total };
        let weight: f64 = idx.iter().map(|&a| d.defaults[a] as f64).product();
        visit(x, weight, idx.iter().all(|&a| d.defaults[a] > 0));
    }
}

/// Weighted estimate of the loss pmf given the default of one or two
/// obligors. Under `writeoff` the scenario obligors' own losses are excluded.
pub fn estimate_conditional(
    portfolio: &Portfolio,
    ids: &[&str],
    writeoff: bool,
    cfg: SimConfig,
) -> Result<WeightedEstimate, SimError> {
    assert!(
        matches!(ids.len(), 1 | 2),
        "conditioning supports one or two obligors"
    );
    let sampler = Sampler::new(portfolio, &cfg)?;
    let idx = scenario_indices(portfolio, ids)?;
    let normalizer = expected_default_product(portfolio, ids)?;
    let mut sums: BTreeMap<u64, Tally> = BTreeMap::new();
    scan_scenario(&sampler, &idx, writeoff, cfg.draws, |x, w, _| {
        if w > 0.0 {
            sums.entry(x).or_default().add(w);
        }
    });
    if sums.is_empty() || normalizer == 0.0 {
        return Err(SimError::NoAcceptedDraws(ids.join(" and ")));
    }
    // Draws with zero weight contribute zeros to every bucket's tally.
    Ok(WeightedEstimate {
        draws: cfg.draws,
        normalizer,
        buckets: weighted_buckets(&sums, cfg.draws, normalizer),
    })
}

/// Both estimators of the loss pmf given the default of `obligor`: the
/// `D_A`-weighted one, which targets the analytical conditional
/// distribution, and plain rejection on `D_A >= 1`.
pub fn estimate_conditional_one_default(
    portfolio: &Portfolio,
    obligor: &str,
    cfg: SimConfig,
) -> Result<OneDefaultEstimate, SimError> {
    let sampler = Sampler::new(portfolio, &cfg)?;
    let idx = scenario_indices(portfolio, &[obligor])?;
    let normalizer = expected_default_product(portfolio, &[obligor])?;
    let mut sums: BTreeMap<u64, Tally> = BTreeMap::new();
    let mut accepted_counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut accepted = 0u64;
    scan_scenario(&sampler, &idx, false, cfg.draws, |x, w, hit| {
        if hit {
            sums.entry(x).or_default().add(w);
            *accepted_counts.entry(x).or_insert(0) += 1;
            accepted += 1;
        }
    });
    if accepted == 0 || normalizer == 0.0 {
        return Err(SimError::NoAcceptedDraws(obligor.to_string()));
    }
    let len = accepted_counts.keys().next_back().map_or(0, |&x| x as usize + 1);
    let mut rejection = vec![
        BucketEstimate {
            probability: 0.0,
            std_error: 0.0
        };
        len
    ];
    let n = accepted as f64;
    for (&x, &c) in &accepted_counts {
        let p = c as f64 / n;
        rejection[x as usize] = BucketEstimate {
            probability: p,
            std_error: (p * (1.0 - p) / n).sqrt(),
        };
    }
    Ok(OneDefaultEstimate {
        weighted: WeightedEstimate {
            draws: cfg.draws,
            normalizer,
            buckets: weighted_buckets(&sums, cfg.draws, normalizer),
        },
        rejection: RejectionEstimate {
            accepted,
            buckets: rejection,
        },
    })
}

/// Monte Carlo estimates of both sides of
/// `E[1(X = x) prod_i D_i] = E[1(X + sum_i E'_i = x) prod_i p_i^S]`,
/// where the `E'_i` are fresh severity draws.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub obligors: Vec<String>,
    pub x: u64,
    pub draws: u64,
    pub left: f64,
    pub left_std_error: f64,
    pub right: f64,
    pub right_std_error: f64,
    /// `sqrt(se_left^2 + se_right^2)`.
    pub combined_std_error: f64,
    /// Standard error of the per-draw difference, which accounts for the
    /// shared draws.
    pub paired_std_error: f64,
    /// `|left - right| <= 3 combined_std_error`.
    pub agree: bool,
}

/// Estimates both sides of the identity from the same draws. `a2` is
/// omitted for the single-obligor form.
pub fn verify_fundamental_identity(
    portfolio: &Portfolio,
    a1: &str,
    a2: Option<&str>,
    x: u64,
    cfg: SimConfig,
) -> Result<IdentityReport, SimError> {
    let sampler = Sampler::new(portfolio, &cfg)?;
    let ids: Vec<&str> = std::iter::once(a1).chain(a2).collect();
    let idx = scenario_indices(portfolio, &ids)?;
    let (mut left, mut right, mut diff) = (Tally::default(), Tally::default(), Tally::default());
    let mut d = sampler.buffers();
    for i in 0..cfg.draws {
        let mut rng = sampler.rng(i);
        sampler.draw(&mut rng, &mut d);
        let l = if d.total == x {
            idx.iter().map(|&a| d.defaults[a] as f64).product()
        } else {
            0.0
        };
        let shift: u64 = idx.iter().map(|&a| sampler.severities[a].sample(&mut rng)).sum();
        let r = if d.total + shift == x {
            idx.iter().map(|&a| sampler.intensity(a, &d.factors)).product()
        } else {
            0.0
        };
        left.add(l);
        right.add(r);
        diff.add(l - r);
    }
    let n = cfg.draws;
    let (lse, rse) = (left.std_error(n), right.std_error(n));
    let combined = lse.hypot(rse);
    let (lm, rm) = (left.mean(n), right.mean(n));
    Ok(IdentityReport {
        obligors: ids.iter().map(|s| s.to_string()).collect(),
        x,
        draws: n,
        left: lm,
        left_std_error: lse,
        right: rm,
        right_std_error: rse,
        combined_std_error: combined,
        paired_std_error: diff.std_error(n),
        agree: (lm - rm).abs() <= 3.0 * combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Obligor, Sector, SeverityDist};

    fn ob(id: &str, pd: f64, weights: Vec<f64>, sev: SeverityDist) -> Obligor {
        Obligor {
            id: id.into(),
            pd,
            weights,
            severity: sev,
        }
    }

    fn one_sector(alpha: f64, obligors: Vec<Obligor>) -> Portfolio {
        Portfolio {
            sectors: vec![Sector {
                id: "s1".into(),
                alpha,
            }],
            obligors,
        }
    }

    #[test]
    fn zero_pd_gives_zero_loss() {
        let p = one_sector(
            0.7,
            vec![ob("A", 0.0, vec![0.5, 0.5], SeverityDist::deterministic(4))],
        );
        let r = simulate(&p, SimConfig::new(2_000, 1)).unwrap();
        assert_eq!(r.loss_counts, BTreeMap::from([(0, 2_000)]));
    }

    #[test]
    fn idiosyncratic_zero_bucket() {
        let p = Portfolio {
            sectors: vec![],
            obligors: vec![ob("A", 0.2, vec![1.0], SeverityDist::deterministic(2))],
        };
        let r = simulate(&p, SimConfig::new(200_000, 7)).unwrap();
        let e = r.loss_probability(0);
        assert!((e.probability - (-0.2f64).exp()).abs() < 3.0 * e.std_error);
        assert!(r.loss_counts.keys().all(|x| x % 2 == 0));
    }

    #[test]
    fn single_sector_zero_bucket_and_factor_variance() {
        let p = one_sector(
            1.0,
            vec![ob("A", 0.1, vec![0.0, 1.0], SeverityDist::deterministic(1))],
        );
        let r = simulate(&p, SimConfig::new(200_000, 11)).unwrap();
        let e = r.loss_probability(0);
        assert!((e.probability - 10.0 / 11.0).abs() < 3.0 * e.std_error);
        let n = r.draws();
        let v = &r.factor_deviation_sq[0];
        assert!((v.mean(n) - 1.0).abs() < 4.0 * v.std_error(n));
        let t = &r.defaults[0];
        assert!((t.mean(n) - 0.1).abs() < 4.0 * t.std_error(n));
    }

    #[test]
    fn small_shape_factor_variance() {
        let p = one_sector(
            0.3,
            vec![ob("A", 0.05, vec![0.0, 1.0], SeverityDist::deterministic(1))],
        );
        let r = simulate(&p, SimConfig::new(200_000, 5)).unwrap();
        let v = &r.factor_deviation_sq[0];
        assert!((v.mean(r.draws()) - 1.0 / 0.3).abs() < 4.0 * v.std_error(r.draws()));
    }

    #[test]
    fn deterministic_given_seed() {
        let p = one_sector(
            0.5,
            vec![
                ob("A", 0.3, vec![0.2, 0.8], SeverityDist::from_atoms([(1, 0.4), (3, 0.6)])),
                ob("B", 0.2, vec![1.0, 0.0], SeverityDist::deterministic(2)),
            ],
        );
        let cfg = SimConfig {
            draws: 5_000,
            seed: 99,
            record_default_counts: true,
        };
        let a = simulate(&p, cfg).unwrap();
        let b = simulate(&p, cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.loss_counts.values().sum::<u64>(), 5_000);
        let other = simulate(&p, SimConfig::new(5_000, 100)).unwrap();
        assert_ne!(a.loss_counts, other.loss_counts);
    }

    #[test]
    fn weighted_estimator_single_sector_mean() {
        // NB(2, 1/11) shifted by one has mean 1.2.
        let p = one_sector(
            1.0,
            vec![ob("A", 0.1, vec![0.0, 1.0], SeverityDist::deterministic(1))],
        );
        let est = estimate_conditional_one_default(&p, "A", SimConfig::new(200_000, 3)).unwrap();
        let mean: f64 = est
            .weighted
            .buckets
            .iter()
            .enumerate()
            .map(|(x, b)| x as f64 * b.probability)
            .sum();
        assert!((mean - 1.2).abs() < 0.02, "mean {mean}");
        assert!(est.rejection.accepted > 0);
        assert_eq!(est.rejection.buckets.first().map(|b| b.probability), Some(0.0));
    }

    #[test]
    fn zero_pd_scenario_errors() {
        let p = one_sector(
            1.0,
            vec![
                ob("A", 0.0, vec![0.0, 1.0], SeverityDist::deterministic(1)),
                ob("B", 0.2, vec![0.0, 1.0], SeverityDist::deterministic(1)),
            ],
        );
        assert!(matches!(
            estimate_conditional_one_default(&p, "A", SimConfig::new(1_000, 3)),
            Err(SimError::NoAcceptedDraws(_))
        ));
        assert!(matches!(
            estimate_conditional(&p, &["A", "B"], false, SimConfig::new(1_000, 3)),
            Err(SimError::NoAcceptedDraws(_))
        ));
    }

    #[test]
    fn identity_beyond_reachable_loss_is_zero() {
        let p = one_sector(
            1.0,
            vec![
                ob("A", 0.1, vec![0.0, 1.0], SeverityDist::deterministic(1)),
                ob("B", 0.1, vec![0.0, 1.0], SeverityDist::deterministic(1)),
            ],
        );
        let r = verify_fundamental_identity(&p, "A", Some("B"), 10_000, SimConfig::new(2_000, 1))
            .unwrap();
        assert_eq!((r.left, r.right), (0.0, 0.0));
        assert!(r.agree);
    }

    #[test]
    fn identity_rejects_bad_scenarios() {
        let p = one_sector(
            1.0,
            vec![ob("A", 0.1, vec![0.0, 1.0], SeverityDist::deterministic(1))],
        );
        assert!(verify_fundamental_identity(&p, "A", Some("A"), 1, SimConfig::new(10, 1)).is_err());
        assert!(verify_fundamental_identity(&p, "Q", None, 1, SimConfig::new(10, 1)).is_err());
        assert!(matches!(simulate(&p, SimConfig::new(0, 1)), Err(SimError::NoDraws)));
    }
}
