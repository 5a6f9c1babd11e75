//! Sector assembly and evaluation of the portfolio loss distribution.
//!
//! The portfolio loss is the sum of `N + 1` independent sector losses: a
//! compound Poisson idiosyncratic sector and `N` compound negative binomial
//! systematic sectors. [`SectorSystem`] holds the sector intensities, failure
//! probabilities and severity polynomials; [`LossEngine`] evaluates the loss
//! distribution for arbitrary exponent offsets (stress vectors) and memoizes
//! the intermediate convolutions.
//!
//! Stressing a sector increments the negative binomial exponent only. The
//! failure probabilities stay at their unstressed values, which is what the
//! conditional-default formulas require; re-assembling a portfolio with a
//! larger `alpha` would change `delta` and give a different distribution.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use serde::Serialize;
use thiserror::Error;

use crate::model::{validate, Diagnostic, Portfolio};
use crate::pmf::{compound_negbin, compound_poisson, convolve_same, Pmf, PmfError};

/// Default bound on the probability mass allowed beyond the truncation limit.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-9;
/// Standard deviations above the mean covered by [`suggest_max_loss`].
pub const AUTO_STDDEVS: f64 = 12.0;
/// Times the automatic limit may double before the tail check fails.
pub const AUTO_DOUBLINGS: u32 = 4;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid portfolio: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidPortfolio(Vec<Diagnostic>),
    #[error(transparent)]
    Pmf(#[from] PmfError),
    #[error("sector index {k} out of range (system has {n} sectors)")]
    SectorOutOfRange { k: usize, n: usize },
    #[error("the idiosyncratic sector cannot be stressed")]
    IdiosyncraticStress,
    #[error("stress vector has {got} entries, expected {expected}")]
    StressDimension { got: usize, expected: usize },
    #[error("exponent offset {0} outside the supported range 0..=2")]
    OffsetOutOfRange(u32),
    #[error("tail mass {tail_mass:e} beyond max loss {max_loss} exceeds tolerance {tolerance:e}")]
    Truncation {
        tail_mass: f64,
        tolerance: f64,
        max_loss: usize,
    },
}

/// Sector parameters derived from a portfolio; immutable once assembled.
#[derive(Debug, Clone)]
pub struct SectorSystem {
    mu: Vec<f64>,
    delta: Vec<f64>,
    q_polys: Vec<Option<Pmf>>,
    alphas: Vec<f64>,
    max_loss: usize,
}

impl SectorSystem {
    /// Computes `mu_k = sum_A w_Ak p_A`, `delta_k = mu_k / (mu_k + alpha_k)`
    /// and the severity polynomials `Q_k = (1/mu_k) sum_A w_Ak p_A H_A` on the
    /// grid `0..=max_loss`. Sectors with `mu_k = 0` are inert.
    pub fn assemble(p: &Portfolio, max_loss: usize) -> Result<Self, EngineError> {
        let diagnostics = validate(p);
        if !diagnostics.is_empty() {
            return Err(EngineError::InvalidPortfolio(diagnostics));
        }
        let dim = p.num_sectors() + 1;
        let mut mu = vec![0.0; dim];
        let mut raw_q = vec![vec![0.0; max_loss + 1]; dim];
        for o in &p.obligors {
            for (k, &w) in o.weights.iter().enumerate() {
                let intensity = w * o.pd;
                if intensity == 0.0 {
                    continue;
                }
                mu[k] += intensity;
                for (&v, &prob) in &o.severity.atoms {
                    if let Some(slot) = usize::try_from(v).ok().and_then(|v| raw_q[k].get_mut(v)) {
                        *slot += intensity * prob;
                    }
                }
            }
        }
        let q_polys = raw_q
            .into_iter()
            .zip(&mu)
            .map(|(q, &m)| {
                (m > 0.0).then(|| Pmf::from_raw(q.into_iter().map(|v| v / m).collect()))
            })
            .collect();
        let alphas: Vec<f64> = p.sectors.iter().map(|s| s.alpha).collect();
        let delta = alphas
            .iter()
            .zip(&mu[1..])
            .map(|(&a, &m)| m / (m + a))
            .collect();
        Ok(Self {
            mu,
            delta,
            q_polys,
            alphas,
            max_loss,
        })
    }

    /// Number of systematic sectors `N`.
    pub fn num_sectors(&self) -> usize {
        self.alphas.len()
    }

    pub fn max_loss(&self) -> usize {
        self.max_loss
    }

    /// `mu_k` for `k = 0..=N`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `delta_k` for sectors `k = 1..=N`, stored at index `k - 1`.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// `alpha_k` for sectors `k = 1..=N`, stored at index `k - 1`.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// The severity polynomial of sector `k`, `None` for an inert sector.
    pub fn q_poly(&self, k: usize) -> Option<&Pmf> {
        self.q_polys.get(k).and_then(Option::as_ref)
    }

    pub fn is_inert(&self, k: usize) -> bool {
        self.q_poly(k).is_none()
    }

    fn check_sector(&self, k: usize) -> Result<(), EngineError> {
        if k > self.num_sectors() {
            return Err(EngineError::SectorOutOfRange {
                k,
                n: self.num_sectors(),
            });
        }
        Ok(())
    }

    /// Loss distribution of sector `k` with its exponent raised by
    /// `exponent_offset`. Sector 0 is compound Poisson and admits no offset;
    /// sectors `k >= 1` are compound negative binomial with shape
    /// `alpha_k + exponent_offset` and the unstressed `delta_k`.
    pub fn sector_loss(&self, k: usize, exponent_offset: u32) -> Result<Pmf, EngineError> {
        self.check_sector(k)?;
        if k == 0 && exponent_offset > 0 {
            return Err(EngineError::IdiosyncraticStress);
        }
        let Some(q) = self.q_poly(k) else {
            return Ok(Pmf::point_mass(0, self.max_loss));
        };
        let pmf = if k == 0 {
            compound_poisson(self.mu[0], q, self.max_loss)?
        } else {
            let alpha = self.alphas[k - 1] + f64::from(exponent_offset);
            compound_negbin(alpha, self.delta[k - 1], q, self.max_loss)?
        };
        Ok(pmf)
    }

    /// Compound negative binomial with shape `exponent` and sector `j`'s
    /// `delta_j` and `Q_j`: the factor by which raising sector `j`'s exponent
    /// by `exponent` multiplies the generating function. Point mass at 0 for
    /// `exponent = 0` or an inert sector.
    pub fn stress_kernel(&self, j: usize, exponent: u32) -> Result<Pmf, EngineError> {
        self.check_sector(j)?;
        if j == 0 {
            return Err(EngineError::IdiosyncraticStress);
        }
        match self.q_poly(j) {
            Some(q) if exponent > 0 => Ok(compound_negbin(
                f64::from(exponent),
                self.delta[j - 1],
                q,
                self.max_loss,
            )?),
            _ => Ok(Pmf::point_mass(0, self.max_loss)),
        }
    }
}

/// Per-sector exponent offsets; entry `j - 1` applies to sector `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StressVector {
    offsets: Vec<u32>,
}

impl StressVector {
    /// Offsets restricted to `{0, 1, 2}`, the increments that occur when
    /// conditioning on one or two defaults.
    pub fn new(offsets: Vec<u32>) -> Result<Self, EngineError> {
        if let Some(&o) = offsets.iter().find(|&&o| o > 2) {
            return Err(EngineError::OffsetOutOfRange(o));
        }
        Ok(Self { offsets })
    }

    /// Any non-negative offsets.
    pub fn unbounded(offsets: Vec<u32>) -> Self {
        Self { offsets }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            offsets: vec![0; n],
        }
    }

    /// Offsets `+e_j` (or `+2e_j` when `i == j`) plus `+e_i`, for 1-based
    /// sector indices; pass `i = None` for a single increment.
    pub fn unit(n: usize, j: usize, i: Option<usize>) -> Self {
        let mut offsets = vec![0; n];
        offsets[j - 1] += 1;
        if let Some(i) = i {
            offsets[i - 1] += 1;
        }
        Self { offsets }
    }

    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    pub fn is_zero(&self) -> bool {
        self.offsets.iter().all(|&o| o == 0)
    }
}

impl fmt::Display for StressVector {
    /// `base`, `+e_3`, `+2e_1`, `+e_1+e_2`, ... with 1-based sector indices.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("base");
        }
        for (idx, &o) in self.offsets.iter().enumerate() {
            match o {
                0 => {}
                1 => write!(f, "+e_{}", idx + 1)?,
                _ => write!(f, "+{o}e_{}", idx + 1)?,
            }
        }
        Ok(())
    }
}

/// Prefix products and leave-one-out products of the unstressed sector pmfs.
#[derive(Debug)]
struct Partials {
    base: Arc<Pmf>,
    /// Index `j - 1`: convolution of every sector except `j`.
    leave_one_out: Vec<Pmf>,
}

/// Loss-distribution evaluator over a fixed [`SectorSystem`], with memoized
/// sector pmfs, leave-one-out partial products and scenario results.
///
/// Safe to share across threads; cached values are deterministic functions
/// of the system, so concurrent fills agree with serial evaluation.
#[derive(Debug)]
pub struct LossEngine {
    system: SectorSystem,
    tail_tolerance: f64,
    sectors: RwLock<HashMap<(usize, u32), Arc<Pmf>>>,
    kernels: RwLock<HashMap<(usize, u32), Arc<Pmf>>>,
    partials: OnceLock<Partials>,
    scenarios: RwLock<HashMap<StressVector, Arc<Pmf>>>,
}

fn memo(
    map: &RwLock<HashMap<(usize, u32), Arc<Pmf>>>,
    key: (usize, u32),
    compute: impl FnOnce() -> Result<Pmf, EngineError>,
) -> Result<Arc<Pmf>, EngineError> {
    if let Some(hit) = map.read().expect("cache lock").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let fresh = Arc::new(compute()?);
    let mut guard = map.write().expect("cache lock");
    Ok(Arc::clone(guard.entry(key).or_insert(fresh)))
}

impl LossEngine {
    pub fn new(system: SectorSystem, tail_tolerance: f64) -> Self {
        Self {
            system,
            tail_tolerance,
            sectors: RwLock::default(),
            kernels: RwLock::default(),
            partials: OnceLock::new(),
            scenarios: RwLock::default(),
        }
    }

    /// Assembles the sector system for `portfolio` and wraps it.
    pub fn from_portfolio(
        portfolio: &Portfolio,
        max_loss: usize,
        tail_tolerance: f64,
    ) -> Result<Self, EngineError> {
        Ok(Self::new(
            SectorSystem::assemble(portfolio, max_loss)?,
            tail_tolerance,
        ))
    }

    /// Engine on the grid suggested by [`suggest_max_loss`], doubled up to
    /// [`AUTO_DOUBLINGS`] times while the base distribution's tail mass
    /// exceeds `tail_tolerance`. The last truncation error is returned if
    /// no candidate passes.
    pub fn with_auto_limit(portfolio: &Portfolio, tail_tolerance: f64) -> Result<Self, EngineError> {
        let mut max_loss = suggest_max_loss(portfolio);
        let mut doublings = 0;
        loop {
            let engine = Self::from_portfolio(portfolio, max_loss, tail_tolerance)?;
            match engine.base_distribution() {
                Ok(_) => return Ok(engine),
                Err(EngineError::Truncation { .. }) if doublings < AUTO_DOUBLINGS => {
                    max_loss *= 2;
                    doublings += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn system(&self) -> &SectorSystem {
        &self.system
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    pub fn max_loss(&self) -> usize {
        self.system.max_loss
    }

    /// Memoized [`SectorSystem::sector_loss`].
    pub fn sector_loss(&self, k: usize, exponent_offset: u32) -> Result<Arc<Pmf>, EngineError> {
        memo(&self.sectors, (k, exponent_offset), || {
            self.system.sector_loss(k, exponent_offset)
        })
    }

    /// Memoized [`SectorSystem::stress_kernel`].
    pub fn stress_kernel(&self, j: usize, exponent: u32) -> Result<Arc<Pmf>, EngineError> {
        memo(&self.kernels, (j, exponent), || {
            self.system.stress_kernel(j, exponent)
        })
    }

    fn partials(&self) -> Result<&Partials, EngineError> {
        if let Some(p) = self.partials.get() {
            return Ok(p);
        }
        let n = self.system.num_sectors();
        let sectors = (0..=n)
            .map(|k| self.sector_loss(k, 0))
            .collect::<Result<Vec<_>, _>>()?;
        // prefix[k] = sectors 0..=k; suffix[k] = sectors k..=n.
        let mut prefix: Vec<Pmf> = Vec::with_capacity(n + 1);
        prefix.push((*sectors[0]).clone());
        for s in &sectors[1..] {
            let next = convolve_same(prefix.last().expect("non-empty"), s);
            prefix.push(next);
        }
        let mut suffix: Vec<Option<Pmf>> = vec![None; n + 2];
        for k in (1..=n).rev() {
            suffix[k] = Some(match &suffix[k + 1] {
                Some(rest) => convolve_same(&sectors[k], rest),
                None => (*sectors[k]).clone(),
            });
        }
        let leave_one_out = (1..=n)
            .map(|j| match &suffix[j + 1] {
                Some(rest) => convolve_same(&prefix[j - 1], rest),
                None => prefix[j - 1].clone(),
            })
            .collect();
        let base = Arc::new(prefix.pop().expect("non-empty"));
        Ok(self.partials.get_or_init(|| Partials {
            base,
            leave_one_out,
        }))
    }

    fn check_tail(&self, pmf: &Pmf) -> Result<(), EngineError> {
        if pmf.tail_mass() > self.tail_tolerance {
            return Err(EngineError::Truncation {
                tail_mass: pmf.tail_mass(),
                tolerance: self.tail_tolerance,
                max_loss: self.max_loss(),
            });
        }
        Ok(())
    }

    fn check_stress(&self, stress: &StressVector) -> Result<(), EngineError> {
        let n = self.system.num_sectors();
        if stress.offsets.len() != n {
            return Err(EngineError::StressDimension {
                got: stress.offsets.len(),
                expected: n,
            });
        }
        Ok(())
    }

    /// Unconditional loss distribution (zero stress).
    pub fn base_distribution(&self) -> Result<Arc<Pmf>, EngineError> {
        let base = Arc::clone(&self.partials()?.base);
        self.check_tail(&base)?;
        Ok(base)
    }

    /// Loss distribution with every sector exponent raised by its offset.
    ///
    /// Zero and single-sector stresses are served from the prefix and
    /// leave-one-out partial products; multi-sector stresses fold the
    /// memoized sector pmfs. Results are memoized per stress vector. Fails
    /// with [`EngineError::Truncation`] if the tail mass exceeds the
    /// configured tolerance.
    pub fn loss_distribution(&self, stress: &StressVector) -> Result<Arc<Pmf>, EngineError> {
        self.check_stress(stress)?;
        if let Some(hit) = self.scenarios.read().expect("cache lock").get(stress) {
            self.check_tail(hit)?;
            return Ok(Arc::clone(hit));
        }
        let stressed: Vec<usize> = (1..=stress.offsets.len())
            .filter(|&j| stress.offsets[j - 1] > 0)
            .collect();
        let pmf = match stressed.as_slice() {
            [] => Arc::clone(&self.partials()?.base),
            [j] => {
                let loo = &self.partials()?.leave_one_out[j - 1];
                let s = self.sector_loss(*j, stress.offsets[j - 1])?;
                Arc::new(convolve_same(loo, &s))
            }
            _ => Arc::new(self.fold_sectors(stress)?),
        };
        let pmf = Arc::clone(
            self.scenarios
                .write()
                .expect("cache lock")
                .entry(stress.clone())
                .or_insert(pmf),
        );
        self.check_tail(&pmf)?;
        Ok(pmf)
    }

    fn fold_sectors(&self, stress: &StressVector) -> Result<Pmf, EngineError> {
        let mut acc = (*self.sector_loss(0, 0)?).clone();
        for (idx, &o) in stress.offsets.iter().enumerate() {
            acc = convolve_same(&acc, &*self.sector_loss(idx + 1, o)?);
        }
        Ok(acc)
    }

    /// Reference evaluation that bypasses every cache: sector pmfs are
    /// recomputed and convolved in sector order.
    pub fn loss_distribution_uncached(&self, stress: &StressVector) -> Result<Pmf, EngineError> {
        self.check_stress(stress)?;
        let mut acc = self.system.sector_loss(0, 0)?;
        for (idx, &o) in stress.offsets.iter().enumerate() {
            acc = convolve_same(&acc, &self.system.sector_loss(idx + 1, o)?);
        }
        self.check_tail(&acc)?;
        Ok(acc)
    }
}

/// `ceil(mean + 12 sd)` of the portfolio loss, and at least the largest
/// single severity value.
pub fn suggest_max_loss(p: &Portfolio) -> usize {
    let mean = p.expected_loss();
    let sd = p.loss_variance().max(0.0).sqrt();
    let largest = p
        .obligors
        .iter()
        .map(|o| o.severity.max_value())
        .max()
        .unwrap_or(0);
    let heuristic = (mean + AUTO_STDDEVS * sd).ceil();
    (heuristic as usize).max(usize::try_from(largest).unwrap_or(usize::MAX)).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMeasures {
    pub theta: f64,
    pub quantile: usize,
    pub expected_shortfall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub mean: f64,
    pub variance: f64,
    pub tail_mass: f64,
    /// True when the tail mass exceeds the tolerance the report was built
    /// with; moments and shortfalls are then lower bounds.
    pub approximate: bool,
    pub levels: Vec<LevelMeasures>,
}

/// Mean, variance, and quantile and expected shortfall at each `theta`.
pub fn risk_report(pmf: &Pmf, thetas: &[f64], tail_tolerance: f64) -> Result<RiskReport, PmfError> {
    let levels = thetas
        .iter()
        .map(|&theta| {
            Ok(LevelMeasures {
                theta,
                quantile: pmf.quantile(theta)?,
                expected_shortfall: pmf.expected_shortfall(theta)?,
            })
        })
        .collect::<Result<Vec<_>, PmfError>>()?;
    Ok(RiskReport {
        mean: pmf.mean(),
        variance: pmf.variance(),
        tail_mass: pmf.tail_mass(),
        approximate: pmf.tail_mass() > tail_tolerance,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Obligor, Sector, SeverityDist};

    fn sector(id: &str, alpha: f64) -> Sector {
        Sector {
            id: id.into(),
            alpha,
        }
    }

    fn obligor(id: &str, pd: f64, weights: Vec<f64>, sev: SeverityDist) -> Obligor {
        Obligor {
            id: id.into(),
            pd,
            weights,
            severity: sev,
        }
    }

    fn single_sector(alpha: f64, pd: f64) -> Portfolio {
        Portfolio {
            sectors: vec![sector("s1", alpha)],
            obligors: vec![obligor("A", pd, vec![0.0, 1.0], SeverityDist::deterministic(1))],
        }
    }

    #[test]
    fn assemble_single_obligor() {
        let sys = SectorSystem::assemble(&single_sector(1.0, 0.1), 20).unwrap();
        assert_eq!(sys.mu(), &[0.0, 0.1]);
        assert!((sys.delta()[0] - 1.0 / 11.0).abs() < 1e-16);
        assert_eq!(sys.q_poly(1).unwrap(), &Pmf::point_mass(1, 20));
        assert!(sys.is_inert(0));
    }

    #[test]
    fn assemble_adds_intensities() {
        let mut p = single_sector(1.0, 0.1);
        p.obligors
            .push(obligor("B", 0.3, vec![0.0, 1.0], SeverityDist::deterministic(1)));
        let sys = SectorSystem::assemble(&p, 20).unwrap();
        assert!((sys.mu()[1] - 0.4).abs() < 1e-16);
        assert_eq!(sys.q_poly(1).unwrap(), &Pmf::point_mass(1, 20));
    }

    #[test]
    fn assemble_mixes_severities() {
        let p = Portfolio {
            sectors: vec![sector("s1", 2.0)],
            obligors: vec![
                obligor("A", 0.2, vec![0.0, 1.0], SeverityDist::deterministic(2)),
                obligor("B", 0.2, vec![0.0, 1.0], SeverityDist::deterministic(4)),
            ],
        };
        let sys = SectorSystem::assemble(&p, 10).unwrap();
        let q = sys.q_poly(1).unwrap();
        assert_eq!(q, &Pmf::from_atoms(&[(2, 0.5), (4, 0.5)], 10).unwrap());
    }

    #[test]
    fn assemble_rejects_invalid_portfolio() {
        let p = single_sector(0.0, 0.1);
        assert!(matches!(
            SectorSystem::assemble(&p, 10),
            Err(EngineError::InvalidPortfolio(_))
        ));
    }

    #[test]
    fn sector_loss_offsets_keep_delta() {
        let sys = SectorSystem::assemble(&single_sector(1.0, 0.1), 60).unwrap();
        let d: f64 = 1.0 / 11.0;
        let geo = sys.sector_loss(1, 0).unwrap();
        for n in 0..=50 {
            assert!((geo.prob(n) - (10.0 / 11.0) * d.powi(n as i32)).abs() < 1e-15);
        }
        let nb2 = sys.sector_loss(1, 1).unwrap();
        assert!((nb2.prob(0) - (10.0f64 / 11.0).powi(2)).abs() < 1e-15);
        assert!((nb2.prob(0) - 0.826446).abs() < 1e-6);
        assert!(matches!(
            sys.sector_loss(0, 1),
            Err(EngineError::IdiosyncraticStress)
        ));
        assert_eq!(sys.sector_loss(0, 0).unwrap(), Pmf::point_mass(0, 60));
        // High offsets are fine internally.
        assert!(sys.sector_loss(1, 7).is_ok());
    }

    #[test]
    fn inert_sector_is_point_mass_under_stress() {
        let p = Portfolio {
            sectors: vec![sector("s1", 1.0), sector("s2", 0.5)],
            obligors: vec![obligor("A", 0.1, vec![0.0, 1.0, 0.0], SeverityDist::deterministic(1))],
        };
        let sys = SectorSystem::assemble(&p, 10).unwrap();
        assert!(sys.is_inert(2));
        assert_eq!(sys.delta()[1], 0.0);
        for o in 0..3 {
            assert_eq!(sys.sector_loss(2, o).unwrap(), Pmf::point_mass(0, 10));
        }
    }

    #[test]
    fn empty_portfolio_is_point_mass() {
        let p = Portfolio {
            sectors: vec![sector("s1", 1.0)],
            obligors: vec![],
        };
        let e = LossEngine::from_portfolio(&p, 5, 1e-9).unwrap();
        assert_eq!(*e.base_distribution().unwrap(), Pmf::point_mass(0, 5));
    }

    #[test]
    fn idiosyncratic_portfolio_is_compound_poisson() {
        let p = Portfolio {
            sectors: vec![],
            obligors: vec![obligor("A", 0.2, vec![1.0], SeverityDist::deterministic(2))],
        };
        let e = LossEngine::from_portfolio(&p, 40, 1e-9).unwrap();
        let direct = compound_poisson(0.2, &Pmf::point_mass(2, 40), 40).unwrap();
        assert_eq!(*e.base_distribution().unwrap(), direct);
    }

    #[test]
    fn cached_and_uncached_agree() {
        let p = Portfolio {
            sectors: vec![sector("s1", 0.7), sector("s2", 1.6), sector("s3", 3.0)],
            obligors: vec![
                obligor("A", 0.2, vec![0.2, 0.5, 0.3, 0.0], SeverityDist::from_atoms([(1, 0.5), (3, 0.5)])),
                obligor("B", 0.4, vec![0.0, 0.1, 0.6, 0.3], SeverityDist::deterministic(2)),
                obligor("C", 0.3, vec![0.5, 0.0, 0.0, 0.5], SeverityDist::from_atoms([(0, 0.2), (4, 0.8)])),
            ],
        };
        let e = LossEngine::from_portfolio(&p, 150, 1e-9).unwrap();
        let stresses = [
            StressVector::zero(3),
            StressVector::unit(3, 1, None),
            StressVector::unit(3, 2, Some(2)),
            StressVector::unit(3, 1, Some(3)),
            StressVector::new(vec![1, 2, 1]).unwrap(),
        ];
        for s in &stresses {
            let cached = e.loss_distribution(s).unwrap();
            let again = e.loss_distribution(s).unwrap();
            assert!(Arc::ptr_eq(&cached, &again));
            let fresh = e.loss_distribution_uncached(s).unwrap();
            if s.is_zero() {
                assert_eq!(*cached, fresh);
            }
            for x in 0..=150 {
                assert!((cached.prob(x) - fresh.prob(x)).abs() < 1e-13, "{s} x={x}");
            }
        }
    }

    #[test]
    fn stress_kernel_factorizes_exponent_increment() {
        let p = Portfolio {
            sectors: vec![sector("s1", 0.6)],
            obligors: vec![obligor("A", 0.5, vec![0.1, 0.9], SeverityDist::from_atoms([(1, 0.3), (2, 0.7)]))],
        };
        let sys = SectorSystem::assemble(&p, 80).unwrap();
        let stressed = sys.sector_loss(1, 2).unwrap();
        let via_kernel = convolve_same(&sys.sector_loss(1, 0).unwrap(), &sys.stress_kernel(1, 2).unwrap());
        for x in 0..=80 {
            assert!((stressed.prob(x) - via_kernel.prob(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn stress_vector_api() {
        assert!(matches!(
            StressVector::new(vec![0, 3]),
            Err(EngineError::OffsetOutOfRange(3))
        ));
        assert_eq!(StressVector::zero(2).to_string(), "base");
        assert_eq!(StressVector::unit(3, 3, None).to_string(), "+e_3");
        assert_eq!(StressVector::unit(3, 1, Some(1)).to_string(), "+2e_1");
        assert_eq!(StressVector::unit(3, 2, Some(1)).to_string(), "+e_1+e_2");
        let e = LossEngine::from_portfolio(&single_sector(1.0, 0.1), 10, 1e-3).unwrap();
        assert!(matches!(
            e.loss_distribution(&StressVector::zero(2)),
            Err(EngineError::StressDimension { got: 2, expected: 1 })
        ));
    }

    #[test]
    fn truncation_is_reported() {
        let e = LossEngine::from_portfolio(&single_sector(1.0, 0.1), 3, 1e-9).unwrap();
        match e.base_distribution() {
            Err(EngineError::Truncation { tail_mass, .. }) => {
                assert!((tail_mass - (1.0f64 / 11.0).powi(4)).abs() < 1e-15)
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn risk_report_examples() {
        let four = Pmf::point_mass(4, 8);
        let r = risk_report(&four, &[0.99], 1e-9).unwrap();
        assert_eq!(r.levels[0].quantile, 4);
        assert!((r.levels[0].expected_shortfall - 4.0).abs() < 1e-12);
        assert_eq!((r.mean, r.variance), (4.0, 0.0));
        assert!(!r.approximate);

        let p = Pmf::from_atoms(&[(0, 0.5), (1, 0.3), (2, 0.2)], 2).unwrap();
        let r = risk_report(&p, &[0.75], 1e-9).unwrap();
        assert_eq!(r.levels[0].quantile, 1);
        assert!((r.levels[0].expected_shortfall - 1.8).abs() < 1e-12);

        let sys = SectorSystem::assemble(&single_sector(1.0, 0.1), 40).unwrap();
        let geo = sys.sector_loss(1, 0).unwrap();
        assert_eq!(risk_report(&geo, &[0.5], 1e-9).unwrap().levels[0].quantile, 0);
    }

    #[test]
    fn auto_limit_grows_until_the_tail_passes() {
        let p = Portfolio {
            sectors: vec![sector("s1", 0.3)],
            obligors: vec![obligor("A", 0.5, vec![0.0, 1.0], SeverityDist::deterministic(1))],
        };
        let first = suggest_max_loss(&p);
        let e = LossEngine::with_auto_limit(&p, 1e-9).unwrap();
        assert!(e.max_loss() > first);
        assert!(e.base_distribution().unwrap().tail_mass() <= 1e-9);
        let heavy = Portfolio {
            sectors: vec![sector("s1", 0.005)],
            obligors: vec![obligor("A", 2.0, vec![0.0, 1.0], SeverityDist::deterministic(1))],
        };
        assert!(matches!(
            LossEngine::with_auto_limit(&heavy, 1e-13),
            Err(EngineError::Truncation { .. })
        ));
    }

    #[test]
    fn suggested_limit_covers_the_bulk() {
        let l = suggest_max_loss(&single_sector(1.0, 0.1));
        // mean 0.1, sd sqrt(0.11)
        assert_eq!(l, (0.1 + 12.0 * 0.11f64.sqrt()).ceil() as usize);
    }
}
