//! Longitudinal response records and their CSV form.
//!
//! The file layout is a header `person_id,item_id,skill_id,attempt,correct`
//! followed by one row per response. Attempts are 1-based and must run
//! consecutively for every (person, skill) pair.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub person_id: u32,
    pub item_id: u32,
    pub skill_id: u32,
    pub attempt: u32,
    pub correct: u8,
}

/// A validated set of response records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResponsePanel {
    records: Vec<ResponseRecord>,
}

impl ResponsePanel {
    /// Validates the records. Order in the input does not matter.
    pub fn new(records: Vec<ResponseRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut attempts: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        for r in &records {
            if r.correct > 1 {
                return Err(Error::InvalidPanel(format!(
                    "correct must be 0 or 1, got {} (person {}, attempt {})",
                    r.correct, r.person_id, r.attempt
                )));
            }
            if !seen.insert((r.person_id, r.skill_id, r.attempt)) {
                return Err(Error::InvalidPanel(format!(
                    "duplicate attempt {} for person {} on skill {}",
                    r.attempt, r.person_id, r.skill_id
                )));
            }
            attempts.entry((r.person_id, r.skill_id)).or_default().push(r.attempt);
        }
        for ((person, skill), mut ts) in attempts {
            ts.sort_unstable();
            for (expected, t) in (1u32..).zip(&ts) {
                if *t != expected {
                    return Err(Error::InvalidPanel(format!(
                        "attempts for person {person} on skill {skill} are not consecutive from 1 (missing {expected})"
                    )));
                }
            }
        }
        Ok(ResponsePanel { records })
    }

    pub fn records(&self) -> &[ResponseRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn skills(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.records.iter().map(|r| r.skill_id).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Response sequences for one skill, ordered by person id, each sorted
    /// by attempt.
    pub fn sequences(&self, skill_id: u32) -> Vec<(u32, Vec<u8>)> {
        let mut by_person: BTreeMap<u32, Vec<(u32, u8)>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.skill_id == skill_id) {
            by_person.entry(r.person_id).or_default().push((r.attempt, r.correct));
        }
        by_person
            .into_iter()
            .map(|(person, mut seq)| {
                seq.sort_unstable_by_key(|&(t, _)| t);
                (person, seq.into_iter().map(|(_, x)| x).collect())
            })
            .collect()
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["person_id", "item_id", "skill_id", "attempt", "correct"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::InvalidPanel(format!(
                "header must be `{}`, got `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ResponseRecord>, _>>()?;
        Self::new(records)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if self.records.is_empty() {
            wtr.write_record(["person_id", "item_id", "skill_id", "attempt", "correct"])?;
        }
        for r in &self.records {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_csv_writer(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}
