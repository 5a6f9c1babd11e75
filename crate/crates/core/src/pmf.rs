//! Dense truncated probability mass functions on the integer loss grid
//! `0..=L`, the compound Poisson / negative binomial recursions, and the
//! discrete risk measures computed from them.
//!
//! Every [`Pmf`] carries the probability mass that lies beyond its truncation
//! limit as an explicit `tail_mass`, so callers can audit how much of the
//! distribution a given grid captures.

use std::fmt::Write as _;

use thiserror::Error;

/// Negative entries smaller than this in magnitude are treated as round-off.
const NEGATIVE_CLIP: f64 = 1e-14;
/// Largest admissible entry (a probability plus round-off).
const ENTRY_MAX: f64 = 1.0 + 1e-12;
/// Most negative admissible tail mass.
const TAIL_FLOOR: f64 = -1e-10;
/// Mixture weights must sum to one within this tolerance.
const MIXTURE_TOL: f64 = 1e-12;

/// Below this log value `exp` underflows to a subnormal or to zero, so the
/// recursions switch to scaled arithmetic.
const LOG_SCALED_START: f64 = -700.0;
const RESCALE_ABOVE: f64 = 1e250;
const RESCALE_FACTOR: f64 = 1e-250;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("truncation limits differ: {0} vs {1}")]
    MismatchedLimits(usize, usize),
    #[error("probability entry {value} at x={index} is out of range")]
    EntryOutOfRange { index: usize, value: f64 },
    #[error("entries sum to {0}, which exceeds 1")]
    MassExceedsOne(f64),
    #[error("intensity must be finite and non-negative, got {0}")]
    NegativeIntensity(f64),
    #[error("negative binomial shape must be finite and positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("failure probability must lie in [0, 1), got {0}")]
    DeltaOutOfRange(f64),
    #[error("mixture weights must be non-negative and sum to 1, got sum {0}")]
    MixtureWeights(f64),
    #[error("level theta must lie in (0, 1), got {0}")]
    ThetaOutOfRange(f64),
    #[error("quantile at theta={theta} unreachable: truncated support holds only {covered} (tail mass {tail_mass})")]
    QuantileUnreachable {
        theta: f64,
        covered: f64,
        tail_mass: f64,
    },
    #[error("malformed pmf csv: {0}")]
    Csv(String),
}

/// Probability mass function over the losses `0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl Pmf {
    /// Builds a pmf from dense probabilities; the tail mass is whatever is
    /// missing from 1. Round-off negatives above `-1e-14` are clipped to 0.
    pub fn from_probs(mut probs: Vec<f64>) -> Result<Self, PmfError> {
        assert!(!probs.is_empty(), "a pmf covers at least the loss 0");
        for (index, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -NEGATIVE_CLIP || *p > ENTRY_MAX {
                return Err(PmfError::EntryOutOfRange { index, value: *p });
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total = stable_sum(&probs);
        let tail_mass = 1.0 - total;
        if tail_mass < TAIL_FLOOR {
            return Err(PmfError::MassExceedsOne(total));
        }
        Ok(Self { probs, tail_mass })
    }

    /// Internal constructor for outputs of the algebra, whose entries are
    /// non-negative by construction.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        let tail_mass = 1.0 - stable_sum(&probs);
        Self { probs, tail_mass }
    }

    /// Point mass at `at` on the grid `0..=max_loss`. A point beyond the grid
    /// is all tail.
    pub fn point_mass(at: usize, max_loss: usize) -> Self {
        let mut probs = vec![0.0; max_loss + 1];
        if at <= max_loss {
            probs[at] = 1.0;
        }
        Self::from_raw(probs)
    }

    /// Builds a pmf on `0..=max_loss` from `(loss, probability)` atoms; atoms
    /// beyond the grid land in the tail.
    pub fn from_atoms(atoms: &[(usize, f64)], max_loss: usize) -> Result<Self, PmfError> {
        let mut probs = vec![0.0; max_loss + 1];
        let mut beyond = 0.0;
        for &(x, p) in atoms {
            if !p.is_finite() || !(0.0..=ENTRY_MAX).contains(&p) {
                return Err(PmfError::EntryOutOfRange { index: x, value: p });
            }
            match probs.get_mut(x) {
                Some(slot) => *slot += p,
                None => beyond += p,
            }
        }
        let total = stable_sum(&probs) + beyond;
        if total - 1.0 > -TAIL_FLOOR {
            return Err(PmfError::MassExceedsOne(total));
        }
        Ok(Self::from_raw(probs))
    }

    pub fn max_loss(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P[X = x]`, zero beyond the grid.
    pub fn prob(&self, x: usize) -> f64 {
        self.probs.get(x).copied().unwrap_or(0.0)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Mass on the truncated support, `1 - tail_mass`.
    pub fn total_mass(&self) -> f64 {
        1.0 - self.tail_mass
    }

    /// Re-grids onto `0..=max_loss`, padding with zeros or moving the cut
    /// entries into the tail.
    pub fn resized(&self, max_loss: usize) -> Pmf {
        let mut probs = self.probs.clone();
        probs.resize(max_loss + 1, 0.0);
        if max_loss < self.max_loss() {
            let cut = stable_sum(&self.probs[max_loss + 1..]);
            return Pmf {
                probs,
                tail_mass: self.tail_mass + cut,
            };
        }
        Pmf {
            probs,
            tail_mass: self.tail_mass,
        }
    }

    /// Expected loss over the truncated support.
    pub fn mean(&self) -> f64 {
        let terms: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(x, p)| x as f64 * p)
            .collect();
        stable_sum(&terms)
    }

    /// Variance over the truncated support (two-pass, around the truncated
    /// mean).
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let terms: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(x, p)| {
                let d = x as f64 - mean;
                d * d * p
            })
            .collect();
        let centred = stable_sum(&terms);
        // Correction for the missing mass so that the result equals
        // sum x^2 p - mean^2 even when the support mass is below one.
        centred + mean * mean * self.tail_mass
    }

    /// Smallest `x` with `P[X <= x] >= theta`.
    pub fn quantile(&self, theta: f64) -> Result<usize, PmfError> {
        check_theta(theta)?;
        let mut cdf = 0.0;
        for (x, p) in self.probs.iter().enumerate() {
            cdf += p;
            if cdf >= theta {
                return Ok(x);
            }
        }
        Err(PmfError::QuantileUnreachable {
            theta,
            covered: cdf,
            tail_mass: self.tail_mass,
        })
    }

    /// Expected shortfall with the discrete boundary adjustment:
    /// `(sum_{x>q} x p(x) + q (F(q) - theta)) / (1 - theta)`.
    pub fn expected_shortfall(&self, theta: f64) -> Result<f64, PmfError> {
        let q = self.quantile(theta)?;
        let cdf_q: f64 = self.probs[..=q].iter().sum();
        let upper: Vec<f64> = self.probs[q + 1..]
            .iter()
            .enumerate()
            .map(|(i, p)| (q + 1 + i) as f64 * p)
            .collect();
        Ok((stable_sum(&upper) + q as f64 * (cdf_q - theta)) / (1.0 - theta))
    }

    /// Serializes as `x,probability` rows for every grid point followed by a
    /// `# tail_mass=` trailer.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.probs.len() * 24 + 32);
        out.push_str("x,probability\n");
        for (x, p) in self.probs.iter().enumerate() {
            let _ = writeln!(out, "{x},{p:e}");
        }
        let _ = writeln!(out, "# tail_mass={:e}", self.tail_mass);
        out
    }

    /// Parses the format written by [`Pmf::to_csv`]. Missing grid points are
    /// zero; the recorded tail mass is kept as written.
    pub fn from_csv(text: &str) -> Result<Self, PmfError> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("x,probability") => {}
            other => return Err(PmfError::Csv(format!("bad header {other:?}"))),
        }
        let mut atoms: Vec<(usize, f64)> = Vec::new();
        let mut tail = None;
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("tail_mass=") {
                    let v: f64 = v
                        .parse()
                        .map_err(|e| PmfError::Csv(format!("tail mass {v:?}: {e}")))?;
                    tail = Some(v);
                }
                continue;
            }
            let (x, p) = line
                .split_once(',')
                .ok_or_else(|| PmfError::Csv(format!("row {line:?}")))?;
            let x: usize = x
                .trim()
                .parse()
                .map_err(|e| PmfError::Csv(format!("loss {x:?}: {e}")))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|e| PmfError::Csv(format!("probability {p:?}: {e}")))?;
            atoms.push((x, p));
        }
        let max_loss = atoms
            .iter()
            .map(|&(x, _)| x)
            .max()
            .ok_or_else(|| PmfError::Csv("no rows".into()))?;
        let mut probs = vec![0.0; max_loss + 1];
        for (x, p) in atoms {
            probs[x] = p;
        }
        let mut pmf = Pmf::from_probs(probs)?;
        if let Some(t) = tail {
            pmf.tail_mass = t;
        }
        Ok(pmf)
    }
}

fn check_theta(theta: f64) -> Result<(), PmfError> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(PmfError::ThetaOutOfRange(theta))
    }
}

/// Neumaier-compensated sum.
pub(crate) fn stable_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Index one past the last non-zero entry.
fn support_end(v: &[f64]) -> usize {
    v.iter().rposition(|&p| p != 0.0).map_or(0, |i| i + 1)
}

/// Truncated convolution `out[n] += sum_j a[j] b[n-j]` for `n < out.len()`.
fn convolve_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    let a = &a[..support_end(a)];
    let b = &b[..support_end(b)];
    // The shorter operand drives the outer loop so sparse kernels stay cheap.
    let (outer, inner) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let len = out.len();
    for (j, &w) in outer.iter().enumerate() {
        if j >= len {
            break;
        }
        if w == 0.0 {
            continue;
        }
        let m = (len - j).min(inner.len());
        for (o, &x) in out[j..j + m].iter_mut().zip(&inner[..m]) {
            *o += w * x;
        }
    }
}

/// Convolution of two pmfs on the same grid; mass pushed past the limit
/// accrues to the tail.
pub fn convolve(a: &Pmf, b: &Pmf) -> Result<Pmf, PmfError> {
    if a.max_loss() != b.max_loss() {
        return Err(PmfError::MismatchedLimits(a.max_loss(), b.max_loss()));
    }
    Ok(convolve_same(a, b))
}

/// [`convolve`] for callers that already guarantee equal grids.
pub(crate) fn convolve_same(a: &Pmf, b: &Pmf) -> Pmf {
    debug_assert_eq!(a.max_loss(), b.max_loss());
    let mut out = vec![0.0; a.probs.len()];
    convolve_into(&a.probs, &b.probs, &mut out);
    Pmf::from_raw(out)
}

/// Weighted mean of pmfs on a common grid. Weights must be non-negative and
/// sum to one within 1e-12.
pub fn mixture(components: &[(f64, &Pmf)]) -> Result<Pmf, PmfError> {
    let Some(&(_, first)) = components.first() else {
        return Err(PmfError::MixtureWeights(0.0));
    };
    let weights: Vec<f64> = components.iter().map(|&(w, _)| w).collect();
    let total = stable_sum(&weights);
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (total - 1.0).abs() > MIXTURE_TOL {
        return Err(PmfError::MixtureWeights(total));
    }
    let mut out = vec![0.0; first.probs.len()];
    for &(w, pmf) in components {
        if pmf.max_loss() != first.max_loss() {
            return Err(PmfError::MismatchedLimits(first.max_loss(), pmf.max_loss()));
        }
        if w == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(&pmf.probs) {
            *o += w * p;
        }
    }
    Ok(Pmf::from_raw(out))
}

/// Panjer recursion for the (a, b, 0) class:
/// `g_n = (1 / (1 - a q_0)) sum_{j=1..n} (a + b j / n) q_j g_{n-j}`,
/// started from `log g_0`. Runs in scaled arithmetic when `g_0` would
/// underflow; results below the smallest normal double are flushed to zero.
fn panjer(a: f64, b: f64, log_g0: f64, q: &[f64], max_loss: usize) -> Vec<f64> {
    let mut g = vec![0.0; max_loss + 1];
    let q_len = support_end(q);
    let q0 = q.first().copied().unwrap_or(0.0);
    let prefactor = 1.0 / (1.0 - a * q0);

    let mut log_scale = 0.0;
    if log_g0 >= LOG_SCALED_START {
        g[0] = log_g0.exp();
    } else {
        g[0] = 1.0;
        log_scale = log_g0;
    }
    let scaled = log_scale != 0.0;

    for n in 1..=max_loss {
        let upper = n.min(q_len.saturating_sub(1));
        let inv_n = 1.0 / n as f64;
        let mut acc = 0.0;
        for j in 1..=upper {
            let qj = q[j];
            if qj != 0.0 {
                acc += (a + b * j as f64 * inv_n) * qj * g[n - j];
            }
        }
        let mut v = prefactor * acc;
        if v < f64::MIN_POSITIVE {
            v = 0.0;
        }
        g[n] = v;
        if scaled && v > RESCALE_ABOVE {
            for x in &mut g[..=n] {
                *x *= RESCALE_FACTOR;
            }
            log_scale -= RESCALE_FACTOR.ln();
        }
    }

    if scaled {
        let factor_log = log_scale;
        for x in &mut g {
            if *x != 0.0 {
                let v = (x.ln() + factor_log).exp();
                *x = if v < f64::MIN_POSITIVE { 0.0 } else { v };
            }
        }
    }
    g
}

/// Compound Poisson pmf with generating function `exp(intensity (Q(z) - 1))`.
pub fn compound_poisson(intensity: f64, severity: &Pmf, max_loss: usize) -> Result<Pmf, PmfError> {
    if !intensity.is_finite() || intensity < 0.0 {
        return Err(PmfError::NegativeIntensity(intensity));
    }
    if intensity == 0.0 {
        return Ok(Pmf::point_mass(0, max_loss));
    }
    let q = severity.probs();
    let q0 = q[0];
    let log_g0 = intensity * (q0 - 1.0);
    Ok(Pmf::from_raw(panjer(0.0, intensity, log_g0, q, max_loss)))
}

/// Compound negative binomial pmf with generating function
/// `((1 - delta) / (1 - delta Q(z)))^alpha`.
pub fn compound_negbin(
    alpha: f64,
    delta: f64,
    severity: &Pmf,
    max_loss: usize,
) -> Result<Pmf, PmfError> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(PmfError::NonPositiveAlpha(alpha));
    }
    if !delta.is_finite() || !(0.0..1.0).contains(&delta) {
        return Err(PmfError::DeltaOutOfRange(delta));
    }
    if delta == 0.0 {
        return Ok(Pmf::point_mass(0, max_loss));
    }
    let q = severity.probs();
    let q0 = q[0];
    let log_g0 = alpha * ((1.0 - delta).ln() - (1.0 - delta * q0).ln());
    Ok(Pmf::from_raw(panjer(
        delta,
        (alpha - 1.0) * delta,
        log_g0,
        q,
        max_loss,
    )))
}
