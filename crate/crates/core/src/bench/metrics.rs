//! Experiment metrics. Ratios are exact; percentages are rendered at one
//! decimal with half-up rounding.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{muc_matches, CapabilityMatrix, ModelError, MucLabel};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("numerator {num} exceeds denominator {den}")]
    NumeratorTooLarge { num: u64, den: u64 },
    #[error("no decision pairs")]
    Empty,
    #[error("agreement by chance is 1 but the reviewers disagree")]
    DegenerateKappa,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two paired values, got {0}")]
    TooShort(usize),
    #[error("series is constant")]
    Constant,
    #[error("detector `{0}` has no successful run")]
    NoSuccessfulRun(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self, MetricError> {
        if den == 0 {
            return Err(MetricError::ZeroDenominator);
        }
        if num > den {
            return Err(MetricError::NumeratorTooLarge { num, den });
        }
        Ok(Self { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Percentage in tenths, rounded half up.
    pub fn percent_tenths(self) -> u64 {
        (self.num * 2000 + self.den) / (2 * self.den)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.percent_tenths();
        write!(f, "{}.{}%", t / 10, t % 10)
    }
}

pub fn precision(confirmed: u64, reviewed: u64) -> Result<Ratio, MetricError> {
    Ratio::new(confirmed, reviewed)
}

pub fn recall(hits: u64, known: u64) -> Result<Ratio, MetricError> {
    Ratio::new(hits, known)
}

pub fn empirical_rub(hits: u64, known: u64) -> Result<Ratio, MetricError> {
    Ratio::new(hits, known)
}

/// Fraction of misuses with at least one label the detector can detect.
pub fn conceptual_rub(
    matrix: &CapabilityMatrix,
    detector: &str,
    misuses: &[&BTreeSet<MucLabel>],
) -> Result<Ratio, MetricError> {
    let mut n = 0;
    for labels in misuses {
        if muc_matches(matrix, detector, labels)? {
            n += 1;
        }
    }
    Ratio::new(n, misuses.len() as u64)
}

/// Cohen's kappa for two raters with binary decisions. Computed in
/// integers: `(n*agree - S) / (n^2 - S)` where `S` sums the products of
/// marginal counts.
pub fn cohens_kappa(pairs: &[(bool, bool)]) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = pairs.len() as i128;
    let agree = pairs.iter().filter(|(a, b)| a == b).count() as i128;
    let a_yes = pairs.iter().filter(|p| p.0).count() as i128;
    let b_yes = pairs.iter().filter(|p| p.1).count() as i128;
    let chance = a_yes * b_yes + (n - a_yes) * (n - b_yes);
    let den = n * n - chance;
    if den == 0 {
        return if agree == n { Ok(1.0) } else { Err(MetricError::DegenerateKappa) };
    }
    Ok((n * agree - chance) as f64 / den as f64)
}

/// Decision pairs from a 2x2 confusion table `[[yes/yes, yes/no], [no/yes, no/no]]`.
pub fn pairs_from_confusion(table: [[usize; 2]; 2]) -> Vec<(bool, bool)> {
    let mut out = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            out.extend(std::iter::repeat_n((i == 0, j == 0), n));
        }
    }
    out
}

pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    if xs.len() != ys.len() {
        return Err(MetricError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricError::TooShort(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::Constant);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson's r over positions where both series have a value.
pub fn pearson_r_present(xs: &[Option<f64>], ys: &[Option<f64>]) -> Result<f64, MetricError> {
    if xs.len() != ys.len() {
        return Err(MetricError::LengthMismatch(xs.len(), ys.len()));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    pearson_r(&a, &b)
}

/// Per-(detector, version) finding counts; `None` marks a failed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub detectors: Vec<String>,
    pub rows: Vec<CountRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub project: String,
    pub version: String,
    pub counts: Vec<Option<u64>>,
}

impl CountTable {
    pub fn column(&self, d: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.counts[d].map(|c| c as f64)).collect()
    }

    fn maxima(&self) -> Result<Vec<u64>, MetricError> {
        (0..self.detectors.len())
            .map(|d| {
                self.rows
                    .iter()
                    .filter_map(|r| r.counts[d])
                    .max()
                    .ok_or_else(|| MetricError::NoSuccessfulRun(self.detectors[d].clone()))
            })
            .collect()
    }
}

/// Per version: each detector's count divided by that detector's maximum
/// over its successful runs, averaged over the detectors that succeeded.
/// `None` when no detector succeeded on the version.
pub fn normalized_findings(table: &CountTable) -> Result<Vec<Option<f64>>, MetricError> {
    let max = table.maxima()?;
    Ok(table
        .rows
        .iter()
        .map(|r| {
            let vals: Vec<f64> = r
                .counts
                .iter()
                .zip(&max)
                .filter_map(|(c, &m)| c.map(|c| if m == 0 { 0.0 } else { c as f64 / m as f64 }))
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect())
}

/// Picks the two highest- and two lowest-scoring versions and one random
/// other version, at most one per project, among versions where every
/// detector succeeded. Returns row indices in pick order.
pub fn sample_versions(table: &CountTable, seed: u64) -> Result<Vec<usize>, MetricError> {
    let scores = normalized_findings(table)?;
    let mut eligible: Vec<(usize, f64)> = table
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.counts.iter().all(Option::is_some))
        .filter_map(|(i, _)| scores[i].map(|s| (i, s)))
        .collect();
    eligible.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| table.rows[a.0].project.cmp(&table.rows[b.0].project))
            .then_with(|| table.rows[a.0].version.cmp(&table.rows[b.0].version))
    });
    let projects: BTreeSet<&str> = eligible.iter().map(|(i, _)| table.rows[*i].project.as_str()).collect();
    let mut used = BTreeSet::new();
    let mut picked = Vec::new();
    let take = |i: usize, used: &mut BTreeSet<String>, picked: &mut Vec<usize>| {
        if used.insert(table.rows[i].project.clone()) {
            picked.push(i);
            true
        } else {
            false
        }
    };
    if projects.len() < 5 {
        for (i, _) in &eligible {
            take(*i, &mut used, &mut picked);
        }
        return Ok(picked);
    }
    let mut n = 0;
    for (i, _) in &eligible {
        if n == 2 {
            break;
        }
        n += take(*i, &mut used, &mut picked) as usize;
    }
    n = 0;
    for (i, _) in eligible.iter().rev() {
        if n == 2 {
            break;
        }
        n += take(*i, &mut used, &mut picked) as usize;
    }
    let rest: Vec<usize> = eligible
        .iter()
        .map(|(i, _)| *i)
        .filter(|i| !used.contains(&table.rows[*i].project))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choice = rest[rng.random_range(0..rest.len())];
    picked.push(choice);
    Ok(picked)
}
