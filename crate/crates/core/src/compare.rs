//! The oracle: undoes the recorded transformations on the follow-up output
//! and compares it with the source output.
//!
//! Bit-strings are indexed by character position (position 0 is the
//! leftmost character, i.e. the highest clbit) in [`remap_distribution`];
//! the other helpers take clbit indices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{key_value, render_key, ExecutionOutcome, OutputDistribution, Phase, Probabilities};
use crate::campaign::abstract_message;
use crate::transforms::{OutputRelation, TransformKind, TransformRecord};

/// Default significance threshold for distribution differences.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("bit-string '{key}' does not have length {expected}")]
    LengthMismatch { key: String, expected: usize },
    #[error("mapping {0:?} is not a permutation of the bit positions")]
    NotAPermutation(Vec<usize>),
    #[error("partition groups overlap or leave clbit positions uncovered")]
    PositionOverlap,
    #[error("cannot compare an empty distribution")]
    EmptyDistribution,
}

fn is_permutation(m: &[usize]) -> bool {
    let mut seen = vec![false; m.len()];
    m.iter().all(|&x| x < m.len() && !std::mem::replace(&mut seen[x], true))
}

/// Output character `j` is input character `m[j]` (characters move by the
/// inverse of `m`).
pub fn remap_key(key: &str, m: &[usize]) -> String {
    let chars: Vec<char> = key.chars().collect();
    m.iter().map(|&j| chars[j]).collect()
}

fn check_keys<'a>(keys: impl IntoIterator<Item = &'a String>, n: usize) -> Result<(), CompareError> {
    match keys.into_iter().find(|k| k.len() != n) {
        Some(k) => Err(CompareError::LengthMismatch { key: k.clone(), expected: n }),
        None => Ok(()),
    }
}

/// Permutes the characters of every bit-string by `m⁻¹` (character-position
/// mapping); counts are preserved.
pub fn remap_distribution(d: &OutputDistribution, m: &[usize]) -> Result<OutputDistribution, CompareError> {
    if !is_permutation(m) {
        return Err(CompareError::NotAPermutation(m.to_vec()));
    }
    check_keys(d.counts.keys(), m.len())?;
    let counts = d.counts.iter().map(|(k, &v)| (remap_key(k, m), v)).collect();
    Ok(OutputDistribution { n_bits: d.n_bits, shots: d.shots, counts })
}

/// Character-position mapping equivalent to a qubit reordering whose
/// follow-up clbit `mapping[q]` carries source clbit `q`.
pub fn position_mapping(mapping: &[usize]) -> Vec<usize> {
    let n = mapping.len();
    (0..n).map(|j| n - 1 - mapping[n - 1 - j]).collect()
}

/// Drops the given clbits from every key, summing collapsing entries.
pub fn marginalize_key(key: &str, clbits: &[usize]) -> String {
    let n = key.len();
    key.chars().enumerate().filter(|(j, _)| !clbits.contains(&(n - 1 - j))).map(|(_, c)| c).collect()
}

pub fn marginalize_added_bits(d: &OutputDistribution, clbits: &[usize]) -> OutputDistribution {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for (k, &v) in &d.counts {
        *counts.entry(marginalize_key(k, clbits)).or_insert(0) += v;
    }
    let n_bits = d.n_bits - clbits.iter().filter(|&&b| b < d.n_bits).count();
    OutputDistribution { n_bits, shots: d.shots, counts }
}

/// Interleaves sub-keys back into a full key: bit `k` of group `g` lands on
/// clbit `groups[g][k]`.
fn interleave(a: &str, b: &str, groups: &[Vec<usize>; 2]) -> String {
    let n = groups[0].len() + groups[1].len();
    let mut value = 0u64;
    for (key, group) in [(a, &groups[0]), (b, &groups[1])] {
        let v = key_value(key).unwrap_or(0);
        for (k, &clbit) in group.iter().enumerate() {
            value |= ((v >> k) & 1) << clbit;
        }
    }
    render_key(value, n)
}

fn check_groups(groups: &[Vec<usize>; 2]) -> Result<usize, CompareError> {
    let n = groups[0].len() + groups[1].len();
    let mut seen = vec![false; n];
    for &b in groups.iter().flatten() {
        if b >= n || std::mem::replace(&mut seen[b], true) {
            return Err(CompareError::PositionOverlap);
        }
    }
    Ok(n)
}

/// Cartesian product of two sub-program distributions, with counts
/// proportional to `count_a · count_b` renormalized (largest remainder) to
/// `shots_a`.
pub fn product_distribution(
    da: &OutputDistribution,
    db: &OutputDistribution,
    clbits: &[Vec<usize>; 2],
) -> Result<OutputDistribution, CompareError> {
    let n = check_groups(clbits)?;
    check_keys(da.counts.keys(), clbits[0].len())?;
    check_keys(db.counts.keys(), clbits[1].len())?;
    let total = da.shots as u128 * db.shots as u128;
    if total == 0 {
        return Err(CompareError::EmptyDistribution);
    }
    let target = da.shots as u128;
    let mut cells: Vec<(String, u64, u128)> = Vec::new();
    for (ka, &ca) in &da.counts {
        for (kb, &cb) in &db.counts {
            let scaled = ca as u128 * cb as u128 * target;
            cells.push((interleave(ka, kb, clbits), (scaled / total) as u64, scaled % total));
        }
    }
    let assigned: u64 = cells.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    // Largest remainder first; ties by key for determinism.
    order.sort_by(|&i, &j| cells[j].2.cmp(&cells[i].2).then_with(|| cells[i].0.cmp(&cells[j].0)));
    for &i in order.iter().take((da.shots - assigned) as usize) {
        cells[i].1 += 1;
    }
    OutputDistribution::from_counts(n, cells.into_iter().map(|(k, v, _)| (k, v)))
        .map_err(|_| CompareError::PositionOverlap)
}

/// Exact-probability counterpart of [`product_distribution`].
pub fn product_probabilities(
    pa: &Probabilities,
    pb: &Probabilities,
    clbits: &[Vec<usize>; 2],
) -> Result<Probabilities, CompareError> {
    let n = check_groups(clbits)?;
    let mut probs = BTreeMap::new();
    for (ka, &a) in &pa.probs {
        for (kb, &b) in &pb.probs {
            *probs.entry(interleave(ka, kb, clbits)).or_insert(0.0) += a * b;
        }
    }
    Ok(Probabilities { n_bits: n, probs })
}

/// Two-sample Kolmogorov–Smirnov test over bit-strings ordered by their
/// binary value. Returns `(statistic, p_value)`.
pub fn ks_two_sample(da: &OutputDistribution, db: &OutputDistribution) -> Result<(f64, f64), CompareError> {
    if da.shots == 0 || db.shots == 0 {
        return Err(CompareError::EmptyDistribution);
    }
    if da.n_bits != db.n_bits {
        return Err(CompareError::LengthMismatch {
            key: db.counts.keys().next().cloned().unwrap_or_default(),
            expected: da.n_bits,
        });
    }
    let mut keys: Vec<(u64, &String)> =
        da.counts.keys().chain(db.counts.keys()).map(|k| (key_value(k).unwrap_or(0), k)).collect();
    keys.sort();
    keys.dedup();
    let (na, nb) = (da.shots as f64, db.shots as f64);
    let (mut ca, mut cb) = (0u64, 0u64);
    let mut statistic: f64 = 0.0;
    for (_, k) in keys {
        ca += da.get(k);
        cb += db.get(k);
        statistic = statistic.max((ca as f64 / na - cb as f64 / nb).abs());
    }
    let lambda = statistic * (na * nb / (na + nb)).sqrt();
    Ok((statistic, ks_p_value(lambda)))
}

/// Asymptotic Kolmogorov distribution tail `2 Σ (−1)^{k−1} e^{−2k²λ²}`.
pub fn ks_p_value(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100_000u32 {
        let k = f64::from(k);
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Which program crashed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Followup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictKind {
    Ok,
    CrashDifference { side: Side, phase: Phase, message: String },
    DistributionDifference { statistic: f64, p_value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    pub relation_used: OutputRelation,
}

impl Verdict {
    pub fn is_warning(&self) -> bool {
        !matches!(self.kind, VerdictKind::Ok)
    }
}

/// Outcome of the follow-up side: one run, or one per partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum FollowUpOutcome {
    Single { outcome: ExecutionOutcome },
    Partitioned { a: ExecutionOutcome, b: ExecutionOutcome },
}

impl FollowUpOutcome {
    /// The first crash among the follow-up runs.
    pub fn crash(&self) -> Option<(Phase, &str)> {
        let outcomes = match self {
            FollowUpOutcome::Single { outcome } => vec![outcome],
            FollowUpOutcome::Partitioned { a, b } => vec![a, b],
        };
        outcomes.into_iter().find_map(|o| match o {
            ExecutionOutcome::Crash { phase, message } => Some((*phase, message.as_str())),
            ExecutionOutcome::Success { .. } => None,
        })
    }
}

/// Maps the follow-up output back into the source's bit layout by undoing
/// the chain's records in reverse order.
pub fn undo_chain(chain: &[TransformRecord], follow: &FollowUpOutcome) -> Result<OutputDistribution, CompareError> {
    let mut records = chain.iter().rev();
    let mut d = match follow {
        FollowUpOutcome::Single { outcome } => outcome.distribution().cloned().ok_or(CompareError::EmptyDistribution)?,
        FollowUpOutcome::Partitioned { a, b } => {
            let Some(TransformKind::Partition { clbits, .. }) = records.next().map(|r| &r.kind) else {
                return Err(CompareError::PositionOverlap);
            };
            let (da, db) = (a.distribution(), b.distribution());
            product_distribution(da.ok_or(CompareError::EmptyDistribution)?, db.ok_or(CompareError::EmptyDistribution)?, clbits)?
        }
    };
    for r in records {
        d = match &r.kind {
            TransformKind::QubitOrder { mapping } => remap_distribution(&d, &position_mapping(mapping))?,
            TransformKind::AddRegister { added_clbits, .. } => marginalize_added_bits(&d, added_clbits),
            _ => d,
        };
    }
    Ok(d)
}

/// Exact-probability counterpart of [`undo_chain`] for a single follow-up
/// or the two partition halves.
pub fn undo_chain_exact(chain: &[TransformRecord], follow: &[Probabilities]) -> Result<Probabilities, CompareError> {
    let mut records = chain.iter().rev();
    let mut p = match follow {
        [single] => single.clone(),
        [a, b] => match records.next().map(|r| &r.kind) {
            Some(TransformKind::Partition { clbits, .. }) => product_probabilities(a, b, clbits)?,
            _ => return Err(CompareError::PositionOverlap),
        },
        _ => return Err(CompareError::EmptyDistribution),
    };
    for r in records {
        p = match &r.kind {
            TransformKind::QubitOrder { mapping } => {
                let m = position_mapping(mapping);
                check_keys(p.probs.keys(), m.len())?;
                Probabilities { n_bits: p.n_bits, probs: p.probs.iter().map(|(k, &v)| (remap_key(k, &m), v)).collect() }
            }
            TransformKind::AddRegister { added_clbits, .. } => {
                let mut probs = BTreeMap::new();
                for (k, &v) in &p.probs {
                    *probs.entry(marginalize_key(k, added_clbits)).or_insert(0.0) += v;
                }
                Probabilities { n_bits: p.n_bits - added_clbits.len(), probs }
            }
            _ => p,
        };
    }
    Ok(p)
}

/// Compares source and follow-up outcomes under the relation implied by
/// the transformation chain (the last record decides the relation).
pub fn check_relation(
    chain: &[TransformRecord],
    source: &ExecutionOutcome,
    follow: &FollowUpOutcome,
    threshold: f64,
) -> Verdict {
    let relation_used = chain.last().map_or(OutputRelation::Equivalence, |r| r.output_relation.clone());
    let verdict = |kind| Verdict { kind, relation_used: relation_used.clone() };
    match (source, follow.crash()) {
        (ExecutionOutcome::Crash { phase, message }, None) => {
            verdict(VerdictKind::CrashDifference { side: Side::Source, phase: *phase, message: message.clone() })
        }
        (ExecutionOutcome::Success { .. }, Some((phase, message))) => {
            verdict(VerdictKind::CrashDifference { side: Side::Followup, phase, message: message.to_string() })
        }
        (ExecutionOutcome::Crash { message: ms, .. }, Some((phase, mf))) => {
            if abstract_message(ms) == abstract_message(mf) {
                verdict(VerdictKind::Ok)
            } else {
                verdict(VerdictKind::CrashDifference { side: Side::Followup, phase, message: mf.to_string() })
            }
        }
        (ExecutionOutcome::Success { distribution }, None) => {
            let compared = undo_chain(chain, follow).and_then(|f| ks_two_sample(distribution, &f));
            match compared {
                Ok((statistic, p_value)) if p_value < threshold => {
                    verdict(VerdictKind::DistributionDifference { statistic, p_value })
                }
                Ok(_) => verdict(VerdictKind::Ok),
                // Outputs that cannot even be aligned are maximally different.
                Err(_) => verdict(VerdictKind::DistributionDifference { statistic: 1.0, p_value: 0.0 }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(n: usize, pairs: &[(&str, u64)]) -> OutputDistribution {
        OutputDistribution::from_counts(n, pairs.iter().map(|&(k, v)| (k, v))).unwrap()
    }

    #[test]
    fn worked_remap_example() {
        // m = {0→2, 1→0, 2→1} on character positions.
        let d = dist(3, &[("001", 5)]);
        let r = remap_distribution(&d, &[2, 0, 1]).unwrap();
        assert_eq!(r.counts, BTreeMap::from([("100".to_string(), 5)]));
    }

    #[test]
    fn remap_rejects_bad_input() {
        let d = dist(2, &[("01", 1)]);
        assert!(matches!(remap_distribution(&d, &[0, 0]), Err(CompareError::NotAPermutation(_))));
        assert!(matches!(remap_distribution(&d, &[0, 1, 2]), Err(CompareError::LengthMismatch { .. })));
    }

    #[test]
    fn marginalize_sums_collapsing_keys() {
        let d = dist(3, &[("000", 10), ("100", 2)]);
        let m = marginalize_added_bits(&d, &[2]);
        assert_eq!(m.counts, BTreeMap::from([("00".to_string(), 12)]));
        assert_eq!(m.n_bits, 2);
        assert_eq!(marginalize_added_bits(&d, &[]), d);
    }

    #[test]
    fn product_with_deterministic_factor() {
        let a = dist(1, &[("0", 1)]);
        let b = dist(2, &[("00", 300)]);
        let p = product_distribution(&a, &b, &[vec![0], vec![1, 2]]).unwrap();
        // Renormalized to the first factor's shots.
        assert_eq!(p.counts, BTreeMap::from([("000".to_string(), 1)]));
        let p = product_distribution(&b, &a, &[vec![1, 2], vec![0]]).unwrap();
        assert_eq!(p.counts, BTreeMap::from([("000".to_string(), 300)]));
    }

    #[test]
    fn product_places_bits_by_group() {
        let a = dist(1, &[("1", 10)]);
        let b = dist(1, &[("0", 5), ("1", 5)]);
        // Group A holds clbit 2, group B clbit 0; clbit 1 belongs to A too.
        let p = product_distribution(&a, &b, &[vec![1, 2], vec![0]]);
        assert!(p.is_err(), "group A has two clbits but one-bit keys");
        let a = dist(2, &[("10", 10)]);
        let p = product_distribution(&a, &b, &[vec![1, 2], vec![0]]).unwrap();
        assert_eq!(p.counts, BTreeMap::from([("100".to_string(), 5), ("101".to_string(), 5)]));
        assert!(matches!(
            product_distribution(&a, &b, &[vec![0, 1], vec![1]]),
            Err(CompareError::PositionOverlap)
        ));
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let d = dist(2, &[("00", 500), ("11", 524)]);
        assert_eq!(ks_two_sample(&d, &d).unwrap(), (0.0, 1.0));
        let a = dist(1, &[("0", 1000)]);
        let b = dist(1, &[("1", 1000)]);
        let (s, p) = ks_two_sample(&a, &b).unwrap();
        assert_eq!(s, 1.0);
        assert!(p < 1e-12);
        assert_eq!(ks_two_sample(&a, &b).unwrap(), ks_two_sample(&b, &a).unwrap());
    }

    #[test]
    fn ks_p_value_known_points() {
        // Kolmogorov distribution: P(K > 1.36) ≈ 0.049, P(K > 1.0) ≈ 0.27.
        assert!((ks_p_value(1.36) - 0.0494).abs() < 1e-3);
        assert!((ks_p_value(1.0) - 0.2700).abs() < 1e-3);
        assert_eq!(ks_p_value(0.0), 1.0);
    }

    #[test]
    fn position_mapping_matches_clbit_semantics() {
        // Source clbit q is follow-up clbit m(q).
        let m = [1, 2, 0];
        let source_key = "011"; // clbits 0 and 1 set
        let mut follow_value = 0u64;
        for (q, &mq) in m.iter().enumerate() {
            follow_value |= ((key_value(source_key).unwrap() >> q) & 1) << mq;
        }
        let follow_key = render_key(follow_value, 3);
        assert_eq!(remap_key(&follow_key, &position_mapping(&m)), source_key);
    }

    fn success(d: OutputDistribution) -> ExecutionOutcome {
        ExecutionOutcome::Success { distribution: d }
    }

    #[test]
    fn verdicts() {
        let d = dist(1, &[("0", 512), ("1", 512)]);
        let crash = |m: &str| ExecutionOutcome::Crash { phase: Phase::Qasm, message: m.into() };
        let single = |o| FollowUpOutcome::Single { outcome: o };
        let v = check_relation(&[], &success(d.clone()), &single(crash("boom")), 0.05);
        assert!(matches!(v.kind, VerdictKind::CrashDifference { side: Side::Followup, .. }));
        let v = check_relation(&[], &success(d.clone()), &single(success(d.clone())), 0.05);
        assert_eq!(v.kind, VerdictKind::Ok);
        let v = check_relation(&[], &crash("line 3 'a'"), &single(crash("line 4 'b'")), 0.05);
        assert_eq!(v.kind, VerdictKind::Ok);
        let v = check_relation(&[], &crash("x"), &single(crash("y")), 0.05);
        assert!(matches!(v.kind, VerdictKind::CrashDifference { side: Side::Followup, .. }));
        let skewed = dist(1, &[("0", 900), ("1", 124)]);
        let v = check_relation(&[], &success(d), &single(success(skewed)), 0.05);
        assert!(matches!(v.kind, VerdictKind::DistributionDifference { .. }));
    }
}
