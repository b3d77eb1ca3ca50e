use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Items held out per user: two for validation, two for test.
pub const HELD_OUT_PER_USER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeldOut {
    pub validation: [usize; 2],
    pub test: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub seed: u64,
    pub held_out: BTreeMap<usize, HeldOut>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRole {
    Validation,
    Test,
}

impl fmt::Display for SplitRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitRole::Validation => "val",
            SplitRole::Test => "test",
        })
    }
}

#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    /// Same index space as the input; held-out pairs removed entirely.
    pub train: Dataset,
    pub validation: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
    pub assignment: SplitAssignment,
}

/// Samples four distinct items per user; their whole sequences leave the
/// training set, two going to validation and two to test.
pub fn holdout_split(dataset: &Dataset, seed: u64) -> Result<HoldoutSplit> {
    let mut user_items: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_users()];
    for (u, i) in dataset.pairs() {
        user_items[u].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held_out = BTreeMap::new();
    let mut validation = Vec::with_capacity(2 * dataset.n_users());
    let mut test = Vec::with_capacity(2 * dataset.n_users());
    for (u, items) in user_items.iter().enumerate() {
        if items.len() <= HELD_OUT_PER_USER {
            return Err(Error::Precondition(format!(
                "user `{}` has {} distinct items, at least {} required for a holdout split",
                dataset.user_name(u),
                items.len(),
                HELD_OUT_PER_USER + 1
            )));
        }
        let picked = rand::seq::index::sample(&mut rng, items.len(), HELD_OUT_PER_USER);
        let picked: Vec<usize> = picked.iter().map(|k| items[k]).collect();
        let h = HeldOut {
            validation: [picked[0], picked[1]],
            test: [picked[2], picked[3]],
        };
        validation.extend(h.validation.iter().map(|&i| (u, i)));
        test.extend(h.test.iter().map(|&i| (u, i)));
        held_out.insert(u, h);
    }
    let removed: HashSet<(usize, usize)> = validation.iter().chain(test.iter()).copied().collect();
    let train = dataset.filter_events(|e| !removed.contains(&(e.user, e.item)));
    Ok(HoldoutSplit {
        train,
        validation,
        test,
        assignment: SplitAssignment { seed, held_out },
    })
}

/// Writes `user_idx,item_idx,role` rows.
pub fn write_split_manifest<W: Write>(split: &HoldoutSplit, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Validation(format!("write failed: {e}"));
    w.write_record(["user_idx", "item_idx", "role"]).map_err(err)?;
    for (role, pairs) in [(SplitRole::Validation, &split.validation), (SplitRole::Test, &split.test)] {
        for &(u, i) in pairs {
            w.write_record([u.to_string(), i.to_string(), role.to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Validation(format!("write failed: {e}")))?;
    Ok(())
}

pub fn read_split_manifest<R: Read>(reader: R) -> Result<Vec<(usize, usize, SplitRole)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |m: &str| Error::Parse {
            line,
            message: m.to_string(),
        };
        if record.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        let u = record[0].parse().map_err(|_| bad("bad user_idx"))?;
        let i = record[1].parse().map_err(|_| bad("bad item_idx"))?;
        let role = match &record[2] {
            "val" => SplitRole::Validation,
            "test" => SplitRole::Test,
            _ => return Err(bad("role must be val or test")),
        };
        out.push((u, i, role));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{InteractionEvent, TimeUnit};

    fn user_with_items(n: usize) -> Dataset {
        let events = (0..n)
            .flat_map(|i| {
                (0..3).map(move |k| InteractionEvent {
                    user: 0,
                    item: i,
                    t: k as f64,
                    listened: k % 2 == 0,
                })
            })
            .collect();
        Dataset::from_events(events, 1, n, TimeUnit::Hours).unwrap()
    }

    #[test]
    fn five_items_leave_one_for_training() {
        let d = user_with_items(5);
        let split = holdout_split(&d, 0).unwrap();
        assert_eq!(split.train.pairs().len(), 1);
        assert_eq!(split.validation.len(), 2);
        assert_eq!(split.test.len(), 2);
        assert_eq!(split.train.n_items(), 5);
    }

    #[test]
    fn same_seed_same_assignment() {
        let d = user_with_items(12);
        let a = holdout_split(&d, 3).unwrap();
        let b = holdout_split(&d, 3).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn different_seeds_give_distinct_splits() {
        let d = user_with_items(30);
        let splits: Vec<_> = (0..5).map(|s| holdout_split(&d, s).unwrap().assignment.held_out).collect();
        for a in 0..5 {
            for b in (a + 1)..5 {
                assert_ne!(splits[a], splits[b]);
            }
        }
    }

    #[test]
    fn too_few_items_names_the_user() {
        let d = user_with_items(4);
        let err = holdout_split(&d, 0).unwrap_err().to_string();
        assert!(err.contains("user `0`"), "{err}");
    }

    #[test]
    fn manifest_round_trip() {
        let d = user_with_items(8);
        let split = holdout_split(&d, 1).unwrap();
        let mut buf = Vec::new();
        write_split_manifest(&split, &mut buf).unwrap();
        let rows = read_split_manifest(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0], (0, split.validation[0].1, SplitRole::Validation));
        assert_eq!(rows[3], (0, split.test[1].1, SplitRole::Test));
    }
}
