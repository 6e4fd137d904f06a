//! Per-cell detection and error counts, plus the counts-file format.
//!
//! The file is comma-separated with a header row and one row per
//! (prepared basis, measured basis, intensity) cell:
//!
//! ```text
//! basis_prepared,basis_measured,intensity_label,n,m
//! Z,Z,mu,1523443,10882
//! ```
//!
//! Bases are `X`, `Y` or `Z`; intensity labels are `mu`, `nu` or `omega`.
//! Lines starting with `#` are ignored. Cells that do not appear count as zero.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::IntensityLabel;
use crate::linalg::Axis;

pub const COLUMNS: [&str; 5] = ["basis_prepared", "basis_measured", "intensity_label", "n", "m"];

/// Counts for one (Alice basis, Bob basis) pair, indexed by [`IntensityLabel::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub alice: Axis,
    pub bob: Axis,
    pub n: [f64; 3],
    pub m: [f64; 3],
}

impl CountsRecord {
    pub fn new(alice: Axis, bob: Axis) -> Self {
        Self { alice, bob, n: [0.0; 3], m: [0.0; 3] }
    }

    pub fn n_total(&self) -> f64 {
        self.n.iter().sum()
    }

    pub fn m_total(&self) -> f64 {
        self.m.iter().sum()
    }

    pub fn n_at(&self, k: IntensityLabel) -> f64 {
        self.n[k.index()]
    }

    pub fn m_at(&self, k: IntensityLabel) -> f64 {
        self.m[k.index()]
    }

    /// Error rate over all intensities, 0 when nothing was detected.
    pub fn error_rate(&self) -> f64 {
        let n = self.n_total();
        if n > 0.0 {
            self.m_total() / n
        } else {
            0.0
        }
    }

    /// Relabels errors as m → n − m when more than half the events are errors.
    ///
    /// A cross-basis cell whose correlation is negative carries the same
    /// information as its complement; the bounds downstream only accept
    /// error rates up to ½.
    pub fn flipped_to_minority(&self) -> Self {
        if self.m_total() > self.n_total() / 2.0 {
            let mut out = *self;
            for k in 0..3 {
                out.m[k] = self.n[k] - self.m[k];
            }
            out
        } else {
            *self
        }
    }

    pub fn validate(&self) -> Result<(), CountsError> {
        for k in IntensityLabel::ALL {
            let (n, m) = (self.n_at(k), self.m_at(k));
            let cell = |reason: String| CountsError::Cell { alice: self.alice, bob: self.bob, intensity: k, reason };
            if !n.is_finite() || !m.is_finite() {
                return Err(cell("counts must be finite".into()));
            }
            if n < 0.0 || m < 0.0 {
                return Err(cell(format!("negative count (n = {n}, m = {m})")));
            }
            if m > n {
                return Err(cell(format!("error count m = {m} exceeds detections n = {n}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CountsError {
    #[error("counts file: {0}")]
    Csv(#[from] csv::Error),
    #[error("counts file: {0}")]
    Io(#[from] std::io::Error),
    #[error("counts file is missing column '{0}'")]
    MissingColumn(&'static str),
    #[error("counts file line {line}: {reason}")]
    Row { line: u64, reason: String },
    #[error("cell {alice}{bob}/{intensity}: {reason}")]
    Cell { alice: Axis, bob: Axis, intensity: IntensityLabel, reason: String },
}

/// All counts of one block, keyed by basis pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountsSet {
    records: BTreeMap<(Axis, Axis), CountsRecord>,
}

#[derive(Debug, Deserialize)]
struct Row {
    basis_prepared: String,
    basis_measured: String,
    intensity_label: String,
    n: f64,
    m: f64,
}

impl CountsSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: CountsRecord) {
        self.records.insert((record.alice, record.bob), record);
    }

    pub fn get(&self, alice: Axis, bob: Axis) -> Option<&CountsRecord> {
        self.records.get(&(alice, bob))
    }

    /// The record for a pair, or an all-zero record if it was never measured.
    pub fn get_or_empty(&self, alice: Axis, bob: Axis) -> CountsRecord {
        self.get(alice, bob).copied().unwrap_or_else(|| CountsRecord::new(alice, bob))
    }

    pub fn records(&self) -> impl Iterator<Item = &CountsRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<(), CountsError> {
        self.records().try_for_each(CountsRecord::validate)
    }

    /// Parses and validates a counts file.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, CountsError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for col in COLUMNS {
            if !headers.iter().any(|h| h == col) {
                return Err(CountsError::MissingColumn(col));
            }
        }
        let mut set = CountsSet::new();
        let mut seen = std::collections::BTreeSet::new();
        let mut record = csv::StringRecord::new();
        while rdr.read_record(&mut record)? {
            let line = record.position().map_or(0, |p| p.line());
            let row: Row = record
                .deserialize(Some(&headers))
                .map_err(|e| CountsError::Row { line, reason: e.to_string() })?;
            let bad = |reason: String| CountsError::Row { line, reason };
            let alice: Axis = row.basis_prepared.parse().map_err(|e| bad(format!("basis_prepared: {e}")))?;
            let bob: Axis = row.basis_measured.parse().map_err(|e| bad(format!("basis_measured: {e}")))?;
            let k: IntensityLabel = row.intensity_label.parse().map_err(bad)?;
            if !(row.n.is_finite() && row.m.is_finite()) {
                return Err(bad("counts must be finite".into()));
            }
            if row.n < 0.0 || row.m < 0.0 {
                return Err(bad(format!("negative count (n = {}, m = {})", row.n, row.m)));
            }
            if row.m > row.n {
                return Err(bad(format!("error count m = {} exceeds detections n = {}", row.m, row.n)));
            }
            if !seen.insert((alice, bob, k)) {
                return Err(bad(format!("duplicate cell {alice}{bob}/{k}")));
            }
            let rec = set.records.entry((alice, bob)).or_insert_with(|| CountsRecord::new(alice, bob));
            rec.n[k.index()] = row.n;
            rec.m[k.index()] = row.m;
        }
        Ok(set)
    }

    /// Writes the counts in file order: pairs sorted by basis, then mu, nu, omega.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CountsError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(COLUMNS)?;
        for rec in self.records() {
            for k in IntensityLabel::ALL {
                w.write_record([
                    rec.alice.to_string(),
                    rec.bob.to_string(),
                    k.to_string(),
                    rec.n_at(k).to_string(),
                    rec.m_at(k).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
