//! Datasets: the unified [`Corpus`] and the readers that build it.
//!
//! Input files are tab-separated with a header row. The recognised columns
//! are `user_id`, `item_id`, `time`, and optionally `label`, `impression_id`,
//! `neg_items` (a bracketed list such as `[5,9]`) and situation columns
//! prefixed with `c_`. Metadata files carry `u_*` / `i_*` columns; a `_c`
//! suffix marks a categorical column and `_f` a numeric one.

mod cache;
mod codec;
mod context;
mod prep;
mod reader;
mod table;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use cache::{fingerprint_sources, load_cache, load_or_build, save_cache, Fingerprint, CACHE_MAGIC, CACHE_VERSION};
pub use context::read_context;
pub use prep::{
    derive_situation, k_core_filter, prep_dataset, read_raw_interactions, write_prepared, PrepConfig, PrepOutput,
    PreparedRow, RawFormat, RawInteraction, Situation, SplitSpec,
};
pub use reader::{read_base, read_impressions, read_sequential, ReaderOptions};

/// One of the three dataset partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

/// A value per split.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerSplit<T> {
    pub train: T,
    pub dev: T,
    pub test: T,
}

impl<T> PerSplit<T> {
    pub fn get(&self, split: Split) -> &T {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, split: Split) -> &mut T {
        match split {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }
}

/// A single (user, item, time) event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user: usize,
    pub item: usize,
    pub time: i64,
    pub label: Option<u8>,
    pub impression_id: Option<String>,
    /// Situation feature values aligned with the situation-scope features of
    /// the corpus schema. Categorical values hold their vocabulary index.
    pub situation: Vec<f64>,
    /// Evaluation candidates supplied by the dataset.
    pub neg_items: Option<Vec<usize>>,
    /// Materialized history (sequential reader only).
    pub history: Vec<usize>,
}

impl InteractionRecord {
    /// Records without a label are implicit feedback and count as positive.
    pub fn is_positive(&self) -> bool {
        self.label.is_none_or(|l| l == 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureScope {
    User,
    Item,
    Situation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Index 0 is reserved for values not seen in the train split.
    Categorical { cardinality: usize },
    Numeric { mean: f64, std: f64, constant: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDesc {
    pub name: String,
    pub scope: FeatureScope,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContextSchema {
    pub features: Vec<FeatureDesc>,
}

impl ContextSchema {
    pub fn scoped(&self, scope: FeatureScope) -> impl Iterator<Item = &FeatureDesc> {
        self.features.iter().filter(move |f| f.scope == scope)
    }

    pub fn count(&self, scope: FeatureScope) -> usize {
        self.scoped(scope).count()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpressionGroup {
    pub impression_id: String,
    pub user: usize,
    /// Earliest record time in the group.
    pub time: i64,
    pub items: Vec<usize>,
    pub labels: Vec<u8>,
    /// Situation of the group's first record.
    pub situation: Vec<f64>,
}

impl ImpressionGroup {
    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Raw integer ids mapped onto dense indices in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdMap {
    raw: Vec<i64>,
    #[serde(skip)]
    index: HashMap<i64, usize>,
}

impl IdMap {
    pub fn from_raw(raw: Vec<i64>) -> Self {
        let index = raw.iter().enumerate().map(|(i, &r)| (r, i)).collect();
        IdMap { raw, index }
    }

    pub fn get_or_insert(&mut self, raw: i64) -> usize {
        if let Some(&i) = self.index.get(&raw) {
            return i;
        }
        let i = self.raw.len();
        self.raw.push(raw);
        self.index.insert(raw, i);
        i
    }

    pub fn get(&self, raw: i64) -> Option<usize> {
        self.index.get(&raw).copied()
    }

    pub fn raw(&self, dense: usize) -> i64 {
        self.raw[dense]
    }

    pub fn raw_ids(&self) -> &[i64] {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Situation columns as read from the interaction files, kept until
/// [`read_context`] types them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawSituation {
    pub columns: Vec<String>,
    pub values: PerSplit<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub n_users: usize,
    pub n_items: usize,
    pub splits: PerSplit<Vec<InteractionRecord>>,
    /// Positive train interactions per user as (item, time), sorted by time.
    pub user_history: Vec<Vec<(usize, i64)>>,
    pub impressions: PerSplit<Vec<ImpressionGroup>>,
    pub schema: ContextSchema,
    /// `n_users` rows aligned with the user-scope features of `schema`.
    pub user_features: Vec<Vec<f64>>,
    /// `n_items` rows aligned with the item-scope features of `schema`.
    pub item_features: Vec<Vec<f64>>,
    pub user_ids: IdMap,
    pub item_ids: IdMap,
    pub raw_situation: RawSituation,
}

impl Corpus {
    pub fn records(&self, split: Split) -> &[InteractionRecord] {
        self.splits.get(split)
    }

    pub fn groups(&self, split: Split) -> &[ImpressionGroup] {
        self.impressions.get(split)
    }

    pub fn has_impressions(&self) -> bool {
        !self.impressions.train.is_empty()
    }

    /// The most recent `max_len` train positives of `user` strictly before
    /// `time`, oldest first.
    pub fn history_before(&self, user: usize, time: i64, max_len: usize) -> Vec<usize> {
        let hist = match self.user_history.get(user) {
            Some(h) => h,
            None => return Vec::new(),
        };
        let end = hist.partition_point(|&(_, t)| t < time);
        let start = end.saturating_sub(max_len);
        hist[start..end].iter().map(|&(i, _)| i).collect()
    }

    /// Train interaction count per item (positives only).
    pub fn item_popularity(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_items];
        for r in self.splits.train.iter().filter(|r| r.is_positive()) {
            counts[r.item] += 1;
        }
        counts
    }

    /// Sorted, deduplicated train-positive items per user.
    pub fn train_positive_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.n_users];
        for r in self.splits.train.iter().filter(|r| r.is_positive()) {
            sets[r.user].push(r.item);
        }
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        sets
    }

    /// Checks the structural invariants: id ranges, history order, label
    /// domain, neg-item rules and impression consistency.
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error::InvalidData;
        for split in Split::ALL {
            for r in self.records(split) {
                if r.user >= self.n_users || r.item >= self.n_items {
                    return Err(InvalidData(format!("{} record id out of range", split.name())));
                }
                if let Some(l) = r.label {
                    if l > 1 {
                        return Err(InvalidData(format!("label {l} is not binary")));
                    }
                }
                if let Some(neg) = &r.neg_items {
                    if neg.contains(&r.item) {
                        return Err(InvalidData("neg_items contains positive".into()));
                    }
                    let mut sorted = neg.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if sorted.len() != neg.len() {
                        return Err(InvalidData("neg_items contains duplicates".into()));
                    }
                    if neg.iter().any(|&i| i >= self.n_items) {
                        return Err(InvalidData("neg_items id out of range".into()));
                    }
                }
            }
            for g in self.groups(split) {
                if g.items.is_empty() || g.items.len() != g.labels.len() {
                    return Err(InvalidData(format!("impression {} malformed", g.impression_id)));
                }
            }
        }
        for h in &self.user_history {
            if h.windows(2).any(|w| w[0].1 > w[1].1) {
                return Err(InvalidData("user history not sorted by time".into()));
            }
        }
        Ok(())
    }
}
