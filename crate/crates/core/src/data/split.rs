use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of trailing observations held out by [`SplitPolicy::HoldoutLast20`].
pub const HOLDOUT_LEN: usize = 20;

/// Chronological train/test partitioning policy. Nothing is ever shuffled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SplitPolicy {
    #[serde(rename = "fraction_90_10")]
    Fraction90_10,
    #[serde(rename = "fraction_70_30")]
    Fraction70_30,
    #[serde(rename = "holdout_last_20")]
    HoldoutLast20,
}

impl SplitPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SplitPolicy::Fraction90_10 => "fraction_90_10",
            SplitPolicy::Fraction70_30 => "fraction_70_30",
            SplitPolicy::HoldoutLast20 => "holdout_last_20",
        }
    }

    /// Index of the first test item for `n` items: `⌊0.9n⌋`, `⌊0.7n⌋`, or `n − 20`.
    pub fn boundary(self, n: usize) -> Result<usize> {
        let b = match self {
            SplitPolicy::Fraction90_10 => n * 9 / 10,
            SplitPolicy::Fraction70_30 => n * 7 / 10,
            SplitPolicy::HoldoutLast20 => n.saturating_sub(HOLDOUT_LEN),
        };
        if b == 0 || b >= n {
            return Err(Error::Insufficient(format!(
                "{} split of {n} items leaves an empty partition",
                self.name()
            )));
        }
        Ok(b)
    }
}

impl std::str::FromStr for SplitPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fraction_90_10" => Ok(SplitPolicy::Fraction90_10),
            "fraction_70_30" => Ok(SplitPolicy::Fraction70_30),
            "holdout_last_20" => Ok(SplitPolicy::HoldoutLast20),
            other => Err(Error::Usage(format!("unknown split policy `{other}`"))),
        }
    }
}

/// A resolved split: items `[0, boundary)` train, `[boundary, total)` test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub policy: SplitPolicy,
    pub boundary: usize,
    pub total: usize,
}

impl SplitSpec {
    pub fn resolve(policy: SplitPolicy, total: usize) -> Result<Self> {
        Ok(Self {
            policy,
            boundary: policy.boundary(total)?,
            total,
        })
    }

    pub fn test_len(&self) -> usize {
        self.total - self.boundary
    }
}

/// Splits an ordered slice into its chronological train and test parts.
pub fn split<T>(items: &[T], policy: SplitPolicy) -> Result<(&[T], &[T], SplitSpec)> {
    let spec = SplitSpec::resolve(policy, items.len())?;
    let (train, test) = items.split_at(spec.boundary);
    Ok((train, test, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fraction_boundaries() {
        let items: Vec<usize> = (0..100).collect();
        let (tr, te, _) = split(&items, SplitPolicy::Fraction90_10).unwrap();
        assert_eq!((tr.len(), te.len()), (90, 10));
        let (tr, te, _) = split(&items, SplitPolicy::Fraction70_30).unwrap();
        assert_eq!((tr.len(), te.len()), (70, 30));
    }

    #[test]
    fn holdout_keeps_last_twenty() {
        let items: Vec<usize> = (0..120).collect();
        let (tr, te, _) = split(&items, SplitPolicy::HoldoutLast20).unwrap();
        assert_eq!(tr.len(), 100);
        assert_eq!(te, &items[100..]);
    }

    #[test]
    fn empty_partition_is_an_error() {
        assert!(SplitPolicy::HoldoutLast20.boundary(20).is_err());
        assert!(SplitPolicy::Fraction90_10.boundary(1).is_err());
    }

    proptest! {
        #[test]
        fn partitions_are_ordered_disjoint_and_exhaustive(n in 25usize..2000) {
            for policy in [SplitPolicy::Fraction90_10, SplitPolicy::Fraction70_30, SplitPolicy::HoldoutLast20] {
                let items: Vec<usize> = (0..n).collect();
                let (tr, te, spec) = split(&items, policy).unwrap();
                prop_assert_eq!(tr.len() + te.len(), n);
                prop_assert!(tr.last().unwrap() < te.first().unwrap());
                let expected = match policy {
                    SplitPolicy::Fraction90_10 => (0.9 * n as f64 + 1e-9).floor() as usize,
                    SplitPolicy::Fraction70_30 => (0.7 * n as f64 + 1e-9).floor() as usize,
                    SplitPolicy::HoldoutLast20 => n - 20,
                };
                prop_assert_eq!(spec.boundary, expected);
            }
        }
    }
}
