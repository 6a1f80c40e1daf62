use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

use super::Volume;

pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [7.0, 1.5, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

/// Split sizes by largest remainder: each part gets `floor(n r / sum r)`,
/// and the seats left over go to the largest fractional parts, ties to the
/// earlier part.
fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidConfig(format!("split ratios must be positive, got {ratios:?}")));
    }
    if n < ratios.len() {
        return Err(Error::InsufficientData(format!("{n} items cannot fill {} splits", ratios.len())));
    }
    let total: f64 = ratios.iter().sum();
    let quotas = ratios.map(|r| n as f64 * r / total);
    let mut sizes = quotas.map(|q| q.floor() as usize);
    let mut order = [0usize, 1, 2];
    let frac = |i: usize| quotas[i] - quotas[i].floor();
    // stable sort keeps the earlier part first among (near-)equal remainders
    order.sort_by(|&a, &b| {
        let (fa, fb) = (frac(a), frac(b));
        if (fa - fb).abs() < 1e-9 {
            std::cmp::Ordering::Equal
        } else {
            fb.total_cmp(&fa)
        }
    });
    let assigned: usize = sizes.iter().sum();
    for &i in order.iter().take(n - assigned) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

/// Shuffles `0..n` with `seed` and cuts it into train/val/test index lists,
/// each sorted ascending.
pub fn split_indices(n: usize, ratios: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let sizes = split_sizes(n, ratios)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let mut rest = idx.as_slice();
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (part, size) in parts.iter_mut().zip(sizes) {
        let (head, tail) = rest.split_at(size);
        *part = head.to_vec();
        part.sort_unstable();
        rest = tail;
    }
    Ok(parts)
}

/// Paired target/source volumes `(x0, x1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    items: Vec<(Volume, Volume)>,
    pub split: Option<Split>,
}

impl PairedDataset {
    pub fn new(items: Vec<(Volume, Volume)>, split: Option<Split>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (x0, x1) in &items {
            if x0.shape() != x1.shape() {
                return Err(Error::shape(x0.shape(), x1.shape()));
            }
            if x0.meta.subject_id != x1.meta.subject_id {
                return Err(Error::InvalidConfig(format!(
                    "pair mixes subjects `{}` and `{}`",
                    x0.meta.subject_id, x1.meta.subject_id
                )));
            }
            if !seen.insert(x0.meta.subject_id.clone()) {
                return Err(Error::InvalidConfig(format!("duplicate subject `{}`", x0.meta.subject_id)));
            }
        }
        Ok(Self { items, split })
    }

    pub fn items(&self) -> &[(Volume, Volume)] {
        &self.items
    }

    pub fn into_items(self) -> Vec<(Volume, Volume)> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Divides the dataset into train, validation and test parts.
    pub fn split(self, ratios: [f64; 3], seed: u64) -> Result<[PairedDataset; 3]> {
        let parts = split_indices(self.items.len(), ratios, seed)?;
        let mut slots: Vec<Option<(Volume, Volume)>> = self.items.into_iter().map(Some).collect();
        let mut take = |idx: &[usize], split: Split| PairedDataset {
            items: idx.iter().map(|&i| slots[i].take().expect("indices are disjoint")).collect(),
            split: Some(split),
        };
        Ok([
            take(&parts[0], Split::Train),
            take(&parts[1], Split::Val),
            take(&parts[2], Split::Test),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_by_largest_remainder() {
        assert_eq!(split_sizes(1000, DEFAULT_SPLIT_RATIOS).unwrap(), [700, 150, 150]);
        assert_eq!(split_sizes(10, DEFAULT_SPLIT_RATIOS).unwrap(), [7, 2, 1]);
        assert_eq!(split_sizes(20, DEFAULT_SPLIT_RATIOS).unwrap(), [14, 3, 3]);
        assert_eq!(split_sizes(3, DEFAULT_SPLIT_RATIOS).unwrap(), [2, 1, 0]);
        assert!(split_sizes(2, DEFAULT_SPLIT_RATIOS).is_err());
        assert!(split_sizes(10, [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn same_seed_same_membership() {
        let a = split_indices(50, DEFAULT_SPLIT_RATIOS, 9).unwrap();
        let b = split_indices(50, DEFAULT_SPLIT_RATIOS, 9).unwrap();
        let c = split_indices(50, DEFAULT_SPLIT_RATIOS, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn tagged(id: &str) -> (Volume, Volume) {
        let mut a = Volume::zeros([1, 1, 1]).unwrap();
        a.meta.subject_id = id.into();
        (a.clone(), a)
    }

    #[test]
    fn dataset_split_keeps_items() {
        let items: Vec<_> = (0..10).map(|i| tagged(&format!("s{i}"))).collect();
        let ds = PairedDataset::new(items, None).unwrap();
        let [tr, va, te] = ds.split(DEFAULT_SPLIT_RATIOS, 4).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (7, 2, 1));
        assert_eq!(te.split, Some(Split::Test));
        let mut ids: Vec<_> = [&tr, &va, &te]
            .iter()
            .flat_map(|d| d.items().iter().map(|(a, _)| a.meta.subject_id.clone()))
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 10);
    }

    #[test]
    fn dataset_validation() {
        assert!(PairedDataset::new(vec![tagged("a"), tagged("a")], None).is_err());
        let (a, _) = tagged("a");
        let (_, b) = tagged("b");
        assert!(PairedDataset::new(vec![(a.clone(), b)], None).is_err());
        let mut big = Volume::zeros([2, 1, 1]).unwrap();
        big.meta.subject_id = "a".into();
        assert!(PairedDataset::new(vec![(a, big)], None).is_err());
    }

    #[test]
    fn split_names_round_trip() {
        for s in Split::ALL {
            assert_eq!(s.to_string().parse::<Split>().unwrap(), s);
        }
        assert!("holdout".parse::<Split>().is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_the_index_set(n in 3usize..200, seed in any::<u64>()) {
            let parts = split_indices(n, DEFAULT_SPLIT_RATIOS, seed).unwrap();
            let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
            prop_assert_eq!(all.len(), n);
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
