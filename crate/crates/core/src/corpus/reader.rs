use std::collections::HashMap;
use std::path::Path;

use super::table::{parse_int_list, Table};
use super::{Corpus, IdMap, ImpressionGroup, InteractionRecord, PerSplit, RawSituation, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Base,
    Impression,
}

/// Reader settings that affect the built corpus (and therefore the cache
/// fingerprint).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReaderOptions {
    /// Materialize per-record histories of at most this many items.
    pub history_max: Option<usize>,
    /// Group rows by `impression_id`.
    pub impressions: bool,
}

impl ReaderOptions {
    pub fn describe(&self) -> String {
        format!("history_max={:?};impressions={}", self.history_max, self.impressions)
    }
}

/// Reads the three split files; dev/test rows may carry `neg_items`.
pub fn read_base(train: &Path, dev: &Path, test: &Path, _options: &ReaderOptions) -> Result<Corpus> {
    build([train, dev, test], Layout::Base)
}

/// [`read_base`] plus a per-record history of recent train positives.
pub fn read_sequential(train: &Path, dev: &Path, test: &Path, history_max: usize) -> Result<Corpus> {
    if history_max == 0 {
        return Err(Error::Config("history_max must be >= 1".into()));
    }
    let mut corpus = build([train, dev, test], Layout::Base)?;
    materialize_histories(&mut corpus, history_max);
    Ok(corpus)
}

/// Reads impression-formatted files and groups rows by `impression_id`.
pub fn read_impressions(train: &Path, dev: &Path, test: &Path, options: &ReaderOptions) -> Result<Corpus> {
    let mut corpus = build([train, dev, test], Layout::Impression)?;
    if let Some(max) = options.history_max {
        if max == 0 {
            return Err(Error::Config("history_max must be >= 1".into()));
        }
        materialize_histories(&mut corpus, max);
    }
    Ok(corpus)
}

pub(crate) fn materialize_histories(corpus: &mut Corpus, history_max: usize) {
    for split in Split::ALL {
        let records = std::mem::take(corpus.splits.get_mut(split));
        let records = records
            .into_iter()
            .map(|mut r| {
                r.history = corpus.history_before(r.user, r.time, history_max);
                r
            })
            .collect();
        *corpus.splits.get_mut(split) = records;
    }
}

fn build(paths: [&Path; 3], layout: Layout) -> Result<Corpus> {
    let tables = [Table::read(paths[0])?, Table::read(paths[1])?, Table::read(paths[2])?];
    let situation_columns: Vec<String> = tables[0]
        .header
        .iter()
        .filter(|h| h.starts_with("c_"))
        .cloned()
        .collect();

    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let mut splits: PerSplit<Vec<InteractionRecord>> = PerSplit::default();
    let mut raw_situation = RawSituation {
        columns: situation_columns.clone(),
        values: PerSplit::default(),
    };

    for (split, table) in Split::ALL.into_iter().zip(tables.iter()) {
        let c_user = table.require("user_id")?;
        let c_item = table.require("item_id")?;
        let c_time = table.require("time")?;
        let c_label = match layout {
            Layout::Impression => Some(table.require("label")?),
            Layout::Base => table.column("label"),
        };
        let c_imp = match layout {
            Layout::Impression => Some(table.require("impression_id")?),
            Layout::Base => table.column("impression_id"),
        };
        let c_neg = table.column("neg_items");
        let c_sit: Vec<Option<usize>> = situation_columns.iter().map(|c| table.column(c)).collect();

        let records = splits.get_mut(split);
        let sit_values = raw_situation.values.get_mut(split);
        for row in 0..table.rows.len() {
            let user = users.get_or_insert(table.int(row, c_user)?);
            let item = items.get_or_insert(table.int(row, c_item)?);
            let time = table.int(row, c_time)?;
            let label = match c_label {
                Some(c) => {
                    let v = &table.rows[row][c];
                    if v.is_empty() {
                        if layout == Layout::Impression {
                            return Err(table.parse_err(row, "missing label"));
                        }
                        None
                    } else {
                        match v.as_str() {
                            "0" => Some(0),
                            "1" => Some(1),
                            _ => return Err(table.parse_err(row, format!("label `{v}` is not 0 or 1"))),
                        }
                    }
                }
                None => None,
            };
            let impression_id = c_imp.and_then(|c| {
                let v = &table.rows[row][c];
                (!v.is_empty()).then(|| v.clone())
            });
            if layout == Layout::Impression && impression_id.is_none() {
                return Err(table.parse_err(row, "missing impression_id"));
            }
            let neg_items = match c_neg {
                Some(c) if !table.rows[row][c].is_empty() => {
                    let raw = parse_int_list(&table.rows[row][c])
                        .ok_or_else(|| table.parse_err(row, "malformed neg_items list"))?;
                    let dense: Vec<usize> = raw.into_iter().map(|r| items.get_or_insert(r)).collect();
                    if dense.contains(&item) {
                        return Err(table.parse_err(row, "neg_items contains positive"));
                    }
                    let mut sorted = dense.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if sorted.len() != dense.len() {
                        return Err(table.parse_err(row, "neg_items contains duplicates"));
                    }
                    Some(dense)
                }
                _ => None,
            };
            sit_values.push(
                c_sit
                    .iter()
                    .map(|c| c.map(|c| table.rows[row][c].clone()).unwrap_or_default())
                    .collect(),
            );
            records.push(InteractionRecord {
                user,
                item,
                time,
                label,
                impression_id,
                situation: Vec::new(),
                neg_items,
                history: Vec::new(),
            });
        }
    }

    if splits.train.is_empty() {
        return Err(Error::EmptyTrain);
    }

    let n_users = users.len();
    let n_items = items.len();
    let mut user_history: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n_users];
    for r in splits.train.iter().filter(|r| r.is_positive()) {
        user_history[r.user].push((r.item, r.time));
    }
    for h in &mut user_history {
        h.sort_by_key(|&(_, t)| t);
    }

    let impressions = match layout {
        Layout::Impression => group_impressions(&splits)?,
        Layout::Base => PerSplit::default(),
    };

    Ok(Corpus {
        n_users,
        n_items,
        splits,
        user_history,
        impressions,
        schema: Default::default(),
        user_features: vec![Vec::new(); n_users],
        item_features: vec![Vec::new(); n_items],
        user_ids: users,
        item_ids: items,
        raw_situation,
    })
}

fn group_impressions(splits: &PerSplit<Vec<InteractionRecord>>) -> Result<PerSplit<Vec<ImpressionGroup>>> {
    let mut owner: HashMap<&str, Split> = HashMap::new();
    let mut out: PerSplit<Vec<ImpressionGroup>> = PerSplit::default();
    for split in Split::ALL {
        let mut slot: HashMap<&str, usize> = HashMap::new();
        let groups = out.get_mut(split);
        for r in splits.get(split) {
            let id = r.impression_id.as_deref().expect("impression layout requires ids");
            if let Some(&other) = owner.get(id) {
                if other != split {
                    return Err(Error::InvalidData(format!(
                        "impression `{id}` spans splits {} and {}",
                        other.name(),
                        split.name()
                    )));
                }
            } else {
                owner.insert(id, split);
            }
            let label = r.label.expect("impression layout requires labels");
            match slot.get(id) {
                Some(&g) => {
                    let group = &mut groups[g];
                    if group.user != r.user {
                        return Err(Error::InvalidData(format!("impression `{id}` spans two users")));
                    }
                    group.items.push(r.item);
                    group.labels.push(label);
                    group.time = group.time.min(r.time);
                }
                None => {
                    slot.insert(id, groups.len());
                    groups.push(ImpressionGroup {
                        impression_id: id.to_string(),
                        user: r.user,
                        time: r.time,
                        items: vec![r.item],
                        labels: vec![label],
                        situation: Vec::new(),
                    });
                }
            }
        }
    }
    Ok(out)
}
