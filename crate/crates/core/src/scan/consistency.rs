//! Replicate and trio consistency of per-sample calls.
//!
//! A call in one member of a replicate pair is inconsistent when the other
//! member has no matching call. A call in a child is inconsistent when
//! neither parent has a matching call. Only samples that some rule applies
//! to (replicate members and children) contribute to the totals; parents
//! are looked up but their own calls are not scored.

use std::collections::{BTreeMap, BTreeSet};

use super::Detection;
use crate::error::{Error, Result};

/// Half-open probe interval `(start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &Interval) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }
}

/// When two calls in different samples count as the same variant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum OverlapRule {
    /// Any shared probe.
    #[default]
    Any,
    /// Shared probes cover at least this fraction of both calls.
    Reciprocal(f64),
}

impl OverlapRule {
    pub fn matches(&self, a: &Interval, b: &Interval) -> bool {
        let shared = a.overlap(b);
        match *self {
            OverlapRule::Any => shared > 0,
            OverlapRule::Reciprocal(f) => {
                shared > 0
                    && shared as f64 >= f * a.len() as f64
                    && shared as f64 >= f * b.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trio {
    pub child: String,
    pub parents: (String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pedigree {
    pub replicates: Vec<(String, String)>,
    pub trios: Vec<Trio>,
}

impl Pedigree {
    /// Parses lines of `replicate <a> <b>` or `trio <child> <parent> <parent>`,
    /// whitespace or comma separated. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Pedigree::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            let bad = |message: &str| Error::Parse {
                line: k + 1,
                message: message.to_string(),
            };
            match fields.as_slice() {
                ["replicate", a, b] => out.replicates.push((a.to_string(), b.to_string())),
                ["trio", c, p, q] => out.trios.push(Trio {
                    child: c.to_string(),
                    parents: (p.to_string(), q.to_string()),
                }),
                ["replicate", ..] => return Err(bad("replicate needs exactly two samples")),
                ["trio", ..] => return Err(bad("trio needs child and two parents")),
                _ => return Err(bad("expected 'replicate' or 'trio'")),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConsistencyCounts {
    pub total: usize,
    pub inconsistent: usize,
}

/// Per-sample calls keyed by sample id; every sample in `sample_ids`
/// gets an entry, possibly empty.
pub fn per_sample_calls(detections: &[Detection], sample_ids: &[String]) -> BTreeMap<String, Vec<Interval>> {
    let mut calls: BTreeMap<String, Vec<Interval>> =
        sample_ids.iter().map(|id| (id.clone(), Vec::new())).collect();
    for d in detections {
        for &i in &d.carriers {
            if let Some(list) = calls.get_mut(&sample_ids[i]) {
                list.push(d.interval());
            }
        }
    }
    calls
}

pub fn consistency_report(
    calls: &BTreeMap<String, Vec<Interval>>,
    pedigree: &Pedigree,
    rule: OverlapRule,
) -> Result<ConsistencyCounts> {
    let lookup = |id: &str| -> Result<&[Interval]> {
        calls
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSample(id.to_string()))
    };

    // For every scored sample, the groups of relatives that must carry a
    // match: a replicate partner alone, or either parent.
    let mut requirements: BTreeMap<&str, Vec<Vec<&str>>> = BTreeMap::new();
    for (a, b) in &pedigree.replicates {
        lookup(a)?;
        lookup(b)?;
        requirements.entry(a).or_default().push(vec![b]);
        requirements.entry(b).or_default().push(vec![a]);
    }
    for trio in &pedigree.trios {
        lookup(&trio.child)?;
        lookup(&trio.parents.0)?;
        lookup(&trio.parents.1)?;
        requirements
            .entry(&trio.child)
            .or_default()
            .push(vec![&trio.parents.0, &trio.parents.1]);
    }

    let mut counts = ConsistencyCounts::default();
    for (sample, groups) in &requirements {
        let own: BTreeSet<Interval> = lookup(sample)?.iter().copied().collect();
        for call in &own {
            counts.total += 1;
            let mut ok = true;
            for group in groups {
                let mut matched = false;
                for relative in group {
                    if lookup(relative)?.iter().any(|other| rule.matches(call, other)) {
                        matched = true;
                        break;
                    }
                }
                ok &= matched;
            }
            if !ok {
                counts.inconsistent += 1;
            }
        }
    }
    Ok(counts)
}
