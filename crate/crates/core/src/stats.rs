//! Pearson chi-squared association tests on 2×2 tables.
//!
//! Rows are flag present / absent, columns are correct / incorrect:
//!
//! ```text
//!             correct  incorrect
//! flag          a          b
//! no flag       c          d
//! ```

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::taxonomy::ViewLabel;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StatsError {
    #[error("chi-squared statistic {0} is negative")]
    NegativeStatistic(f64),
    #[error("a row or column total is zero")]
    ZeroMarginal,
    #[error("empty table")]
    EmptyTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable2x2 { a, b, c, d }
    }

    /// Tallies `(flag, correct)` observations.
    pub fn from_flags(observations: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut t = ContingencyTable2x2::default();
        for (flag, correct) in observations {
            match (flag, correct) {
                (true, true) => t.a += 1,
                (true, false) => t.b += 1,
                (false, true) => t.c += 1,
                (false, false) => t.d += 1,
            }
        }
        t
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn transpose(&self) -> Self {
        ContingencyTable2x2::new(self.a, self.c, self.b, self.d)
    }

    fn marginals(&self) -> [f64; 4] {
        [
            (self.a + self.b) as f64,
            (self.c + self.d) as f64,
            (self.a + self.c) as f64,
            (self.b + self.d) as f64,
        ]
    }

    fn has_zero_marginal(&self) -> bool {
        self.marginals().contains(&0.0)
    }

    fn cross(&self) -> f64 {
        self.a as f64 * self.d as f64 - self.b as f64 * self.c as f64
    }
}

/// A chi-squared value; `zero_marginal` marks the degenerate case where the
/// statistic is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Chi2 {
    pub statistic: f64,
    pub zero_marginal: bool,
}

/// `N(ad − bc)² / ((a+b)(c+d)(a+c)(b+d))`; with Yates' correction `|ad − bc|`
/// is first reduced by `N/2` (floored at zero).
pub fn chi2_statistic(table: &ContingencyTable2x2, yates_correction: bool) -> Result<Chi2, StatsError> {
    let n = table.total() as f64;
    if n == 0.0 {
        return Err(StatsError::EmptyTable);
    }
    if table.has_zero_marginal() {
        return Ok(Chi2 {
            statistic: 0.0,
            zero_marginal: true,
        });
    }
    let mut diff = table.cross().abs();
    if yates_correction {
        diff = (diff - n / 2.0).max(0.0);
    }
    let [r1, r2, c1, c2] = table.marginals();
    Ok(Chi2 {
        statistic: n * diff * diff / (r1 * r2 * c1 * c2),
        zero_marginal: false,
    })
}

/// Upper tail of the chi-squared distribution with one degree of freedom,
/// `erfc(sqrt(x / 2))`.
pub fn chi2_sf(x: f64) -> Result<f64, StatsError> {
    if x < 0.0 || x.is_nan() {
        return Err(StatsError::NegativeStatistic(x));
    }
    Ok(libm::erfc(libm::sqrt(x / 2.0)))
}

pub fn phi_coefficient(table: &ContingencyTable2x2) -> Result<f64, StatsError> {
    if table.total() == 0 {
        return Err(StatsError::EmptyTable);
    }
    if table.has_zero_marginal() {
        return Err(StatsError::ZeroMarginal);
    }
    let [r1, r2, c1, c2] = table.marginals();
    Ok(table.cross() / libm::sqrt(r1 * r2 * c1 * c2))
}

/// Flag and outcome of one evaluated radiograph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoredRecord {
    pub label: ViewLabel,
    pub flag: bool,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssociationRow {
    pub label: ViewLabel,
    pub count: u64,
    pub flag_fraction: f64,
    pub correct_fraction: f64,
    pub table: ContingencyTable2x2,
    /// Yates-corrected statistic; `None` on a zero marginal.
    pub chi2: Option<f64>,
    pub p_value: Option<f64>,
}

/// One Yates-corrected test per label, sorted by canonical label string.
pub fn association_by_label(records: &[ScoredRecord]) -> Vec<AssociationRow> {
    let mut groups: BTreeMap<alloc::string::String, (ViewLabel, Vec<(bool, bool)>)> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.label.canonical())
            .or_insert_with(|| (r.label, Vec::new()))
            .1
            .push((r.flag, r.correct));
    }
    groups
        .into_values()
        .map(|(label, obs)| {
            let table = ContingencyTable2x2::from_flags(obs);
            let n = table.total() as f64;
            let chi = chi2_statistic(&table, true).ok().filter(|c| !c.zero_marginal);
            AssociationRow {
                label,
                count: table.total(),
                flag_fraction: (table.a + table.b) as f64 / n,
                correct_fraction: (table.a + table.c) as f64 / n,
                table,
                chi2: chi.map(|c| c.statistic),
                p_value: chi.and_then(|c| chi2_sf(c.statistic).ok()),
            }
        })
        .collect()
}

/// Aggregate test over all records.
pub fn overall_association(records: &[ScoredRecord]) -> (ContingencyTable2x2, Result<Chi2, StatsError>) {
    let table = ContingencyTable2x2::from_flags(records.iter().map(|r| (r.flag, r.correct)));
    (table, chi2_statistic(&table, true))
}
