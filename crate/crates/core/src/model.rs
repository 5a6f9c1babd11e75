//! Portfolio data model: sectors, obligors, severity distributions, the JSON
//! portfolio file format, and invariant checking.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pmf::Pmf;

/// Factor loadings of every obligor must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Severity probabilities must sum to one within this tolerance.
pub const SEVERITY_SUM_TOL: f64 = 1e-12;

/// Weight-map key of the idiosyncratic loading `w_{A0}`.
pub const IDIOSYNCRATIC: &str = "idiosyncratic";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed portfolio: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("obligor '{obligor}' references unknown sector '{sector}'")]
    UnknownSector { obligor: String, sector: String },
    #[error("obligor '{obligor}' lists severity value {value} more than once")]
    DuplicateSeverityPoint { obligor: String, value: u64 },
    #[error("invalid portfolio: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

/// Distribution of the loss incurred per default event, on non-negative
/// integer loss units.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityDist {
    pub atoms: BTreeMap<u64, f64>,
}

impl SeverityDist {
    pub fn deterministic(value: u64) -> Self {
        Self {
            atoms: BTreeMap::from([(value, 1.0)]),
        }
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let mut map = BTreeMap::new();
        for (v, p) in atoms {
            *map.entry(v).or_insert(0.0) += p;
        }
        Self { atoms: map }
    }

    /// The loss value if the severity is a point mass.
    pub fn as_deterministic(&self) -> Option<u64> {
        match self.atoms.iter().next() {
            Some((&v, &p)) if self.atoms.len() == 1 && p == 1.0 => Some(v),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(&v, &p)| v as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|(&v, &p)| (v as f64).powi(2) * p).sum()
    }

    pub fn max_value(&self) -> u64 {
        self.atoms.keys().next_back().copied().unwrap_or(0)
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.values().sum()
    }

    /// The severity as a pmf on `0..=max_loss`; values past the grid go to
    /// the tail.
    pub fn to_pmf(&self, max_loss: usize) -> Pmf {
        let atoms: Vec<(usize, f64)> = self
            .atoms
            .iter()
            .map(|(&v, &p)| (usize::try_from(v).unwrap_or(usize::MAX), p))
            .collect();
        Pmf::from_atoms(&atoms, max_loss).expect("validated severity")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub id: String,
    /// Gamma shape; the factor has unit mean and scale `1 / alpha`.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obligor {
    pub id: String,
    /// Expected default intensity over the horizon.
    pub pd: f64,
    /// Factor loadings, index 0 idiosyncratic, then one per sector.
    pub weights: Vec<f64>,
    pub severity: SeverityDist,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Portfolio {
    pub sectors: Vec<Sector>,
    pub obligors: Vec<Obligor>,
}

impl Portfolio {
    pub fn num_sectors(&self) -> usize {
        self.sectors.len()
    }

    pub fn obligor(&self, id: &str) -> Option<&Obligor> {
        self.obligors.iter().find(|o| o.id == id)
    }

    pub fn obligor_index(&self, id: &str) -> Option<usize> {
        self.obligors.iter().position(|o| o.id == id)
    }

    /// `sum_A p_A E[E_A]`.
    pub fn expected_loss(&self) -> f64 {
        self.obligors.iter().map(|o| o.pd * o.severity.mean()).sum()
    }

    /// Variance of the portfolio loss:
    /// `sum_A p_A E[E_A^2] + sum_k (sum_A w_Ak p_A E[E_A])^2 / alpha_k`.
    pub fn loss_variance(&self) -> f64 {
        let diversifiable: f64 = self
            .obligors
            .iter()
            .map(|o| o.pd * o.severity.second_moment())
            .sum();
        let systematic: f64 = self
            .sectors
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let el: f64 = self
                    .obligors
                    .iter()
                    .map(|o| o.weights.get(k + 1).copied().unwrap_or(0.0) * o.pd * o.severity.mean())
                    .sum();
                el * el / s.alpha
            })
            .sum();
        diversifiable + systematic
    }

    /// Copy with the listed obligors' severities replaced by a point mass at 0.
    pub fn with_zero_severity(&self, ids: &[&str]) -> Portfolio {
        let mut out = self.clone();
        for o in &mut out.obligors {
            if ids.contains(&o.id.as_str()) {
                o.severity = SeverityDist::deterministic(0);
            }
        }
        out
    }
}

/// Invariant that a [`Diagnostic`] reports as violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    NonPositiveAlpha,
    DuplicateSectorId,
    DuplicateObligorId,
    WeightDimension,
    WeightOutOfRange,
    WeightSum,
    NegativePd,
    EmptySeverity,
    SeverityProbabilityRange,
    SeveritySum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    /// e.g. `sector 's1'` or `obligor 'A'`.
    pub entity: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.detail)
    }
}

fn sector_entity(id: &str) -> String {
    format!("sector '{id}'")
}

fn obligor_entity(id: &str) -> String {
    format!("obligor '{id}'")
}

/// Checks every portfolio invariant. Returns an empty list iff the portfolio
/// is valid.
pub fn validate(p: &Portfolio) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |entity: String, rule: Rule, detail: String| {
        out.push(Diagnostic {
            entity,
            rule,
            detail,
        })
    };

    let mut seen = HashSet::new();
    for s in &p.sectors {
        if !seen.insert(s.id.as_str()) {
            push(sector_entity(&s.id), Rule::DuplicateSectorId, "duplicate sector id".into());
        }
        if !(s.alpha.is_finite() && s.alpha > 0.0) {
            push(
                sector_entity(&s.id),
                Rule::NonPositiveAlpha,
                format!("alpha must be finite and positive, got {}", s.alpha),
            );
        }
    }

    let dim = p.sectors.len() + 1;
    let mut seen = HashSet::new();
    for o in &p.obligors {
        let entity = obligor_entity(&o.id);
        if !seen.insert(o.id.as_str()) {
            push(entity.clone(), Rule::DuplicateObligorId, "duplicate obligor id".into());
        }
        if !(o.pd.is_finite() && o.pd >= 0.0) {
            push(entity.clone(), Rule::NegativePd, format!("pd must be finite and non-negative, got {}", o.pd));
        }
        if o.weights.len() != dim {
            push(
                entity.clone(),
                Rule::WeightDimension,
                format!("expected {dim} weights, got {}", o.weights.len()),
            );
        } else {
            if let Some(w) = o.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
                push(entity.clone(), Rule::WeightOutOfRange, format!("weight {w} outside [0, 1]"));
            }
            let sum: f64 = o.weights.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                push(entity.clone(), Rule::WeightSum, format!("weights sum to {sum}, expected 1"));
            }
        }
        let sev = &o.severity;
        if sev.atoms.is_empty() {
            push(entity.clone(), Rule::EmptySeverity, "severity has no support".into());
        } else {
            if let Some((v, pr)) = sev.atoms.iter().find(|(_, pr)| !(0.0..=1.0).contains(*pr)) {
                push(
                    entity.clone(),
                    Rule::SeverityProbabilityRange,
                    format!("severity probability {pr} at {v} outside [0, 1]"),
                );
            }
            let total = sev.total_probability();
            if (total - 1.0).abs() > SEVERITY_SUM_TOL {
                push(entity, Rule::SeveritySum, format!("severity probabilities sum to {total}, expected 1"));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Rescale each obligor's weights to sum to one before validation.
    pub renormalize_weights: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPortfolio {
    sectors: Vec<RawSector>,
    obligors: Vec<RawObligor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSector {
    id: String,
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObligor {
    id: String,
    pd: f64,
    #[serde(default)]
    weights: BTreeMap<String, f64>,
    severity: RawSeverity,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawSeverity {
    Deterministic { value: u64 },
    Pmf { values: Vec<(u64, f64)> },
}

pub fn parse_portfolio(text: &str) -> Result<Portfolio, ModelError> {
    parse_portfolio_with(text, ParseOptions::default())
}

pub fn parse_portfolio_with(text: &str, opts: ParseOptions) -> Result<Portfolio, ModelError> {
    let raw: RawPortfolio = serde_json::from_str(text)?;
    let index: HashMap<&str, usize> = raw
        .sectors
        .iter()
        .enumerate()
        .map(|(k, s)| (s.id.as_str(), k + 1))
        .collect();

    let mut obligors = Vec::with_capacity(raw.obligors.len());
    for ro in &raw.obligors {
        let mut weights = vec![0.0; raw.sectors.len() + 1];
        for (key, &w) in &ro.weights {
            let k = if key == IDIOSYNCRATIC {
                0
            } else {
                *index.get(key.as_str()).ok_or_else(|| ModelError::UnknownSector {
                    obligor: ro.id.clone(),
                    sector: key.clone(),
                })?
            };
            weights[k] = w;
        }
        if opts.renormalize_weights {
            let sum: f64 = weights.iter().sum();
            if sum > 0.0 && sum.is_finite() {
                weights.iter_mut().for_each(|w| *w /= sum);
            }
        }
        let severity = match &ro.severity {
            RawSeverity::Deterministic { value } => SeverityDist::deterministic(*value),
            RawSeverity::Pmf { values } => {
                let mut atoms = BTreeMap::new();
                for &(v, p) in values {
                    if atoms.insert(v, p).is_some() {
                        return Err(ModelError::DuplicateSeverityPoint {
                            obligor: ro.id.clone(),
                            value: v,
                        });
                    }
                }
                SeverityDist { atoms }
            }
        };
        obligors.push(Obligor {
            id: ro.id.clone(),
            pd: ro.pd,
            weights,
            severity,
        });
    }

    let portfolio = Portfolio {
        sectors: raw
            .sectors
            .into_iter()
            .map(|s| Sector {
                id: s.id,
                alpha: s.alpha,
            })
            .collect(),
        obligors,
    };
    let diagnostics = validate(&portfolio);
    if diagnostics.is_empty() {
        Ok(portfolio)
    } else {
        Err(ModelError::Invalid(diagnostics))
    }
}

/// Writes the portfolio file format. Zero weights are omitted; point-mass
/// severities are written as `deterministic`.
pub fn serialize_portfolio(p: &Portfolio) -> String {
    let raw = RawPortfolio {
        sectors: p
            .sectors
            .iter()
            .map(|s| RawSector {
                id: s.id.clone(),
                alpha: s.alpha,
            })
            .collect(),
        obligors: p
            .obligors
            .iter()
            .map(|o| {
                let weights = o
                    .weights
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(k, &w)| {
                        let key = if k == 0 {
                            IDIOSYNCRATIC.to_string()
                        } else {
                            p.sectors[k - 1].id.clone()
                        };
                        (key, w)
                    })
                    .collect();
                let severity = match o.severity.as_deterministic() {
                    Some(value) => RawSeverity::Deterministic { value },
                    None => RawSeverity::Pmf {
                        values: o.severity.atoms.iter().map(|(&v, &p)| (v, p)).collect(),
                    },
                };
                RawObligor {
                    id: o.id.clone(),
                    pd: o.pd,
                    weights,
                    severity,
                }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("portfolio serializes")
}
