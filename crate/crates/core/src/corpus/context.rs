use std::collections::{HashMap, HashSet};
use std::path::Path;

use log::warn;

use super::table::Table;
use super::{ContextSchema, Corpus, FeatureDesc, FeatureKind, FeatureScope, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnType {
    Categorical,
    Numeric,
}

fn column_type(name: &str) -> Result<ColumnType> {
    if name.ends_with("_c") {
        Ok(ColumnType::Categorical)
    } else if name.ends_with("_f") {
        Ok(ColumnType::Numeric)
    } else {
        Err(Error::InvalidData(format!(
            "context column `{name}` must end in `_c` (categorical) or `_f` (numeric)"
        )))
    }
}

/// Types one raw column from the values observed on the train split.
struct Encoder {
    kind: FeatureKind,
    vocab: HashMap<String, usize>,
}

impl Encoder {
    fn fit<'a>(ty: ColumnType, train_values: impl Iterator<Item = &'a str>, name: &str) -> Result<Encoder> {
        match ty {
            ColumnType::Categorical => {
                let mut vocab = HashMap::new();
                for v in train_values.filter(|v| !v.is_empty()) {
                    let next = vocab.len() + 1;
                    vocab.entry(v.to_string()).or_insert(next);
                }
                Ok(Encoder {
                    kind: FeatureKind::Categorical {
                        cardinality: vocab.len() + 1,
                    },
                    vocab,
                })
            }
            ColumnType::Numeric => {
                let mut xs = Vec::new();
                for v in train_values.filter(|v| !v.is_empty()) {
                    xs.push(
                        v.parse::<f64>()
                            .map_err(|_| Error::InvalidData(format!("non-numeric value `{v}` in `{name}`")))?,
                    );
                }
                let n = xs.len() as f64;
                let (mean, std) = if xs.is_empty() {
                    (0.0, 0.0)
                } else {
                    let mean = xs.iter().sum::<f64>() / n;
                    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                    (mean, var.sqrt())
                };
                let constant = !(std > 1e-12);
                Ok(Encoder {
                    kind: FeatureKind::Numeric {
                        mean,
                        std: if constant { 1.0 } else { std },
                        constant,
                    },
                    vocab: HashMap::new(),
                })
            }
        }
    }

    /// Missing values become the unknown index or the train mean.
    fn encode(&self, raw: Option<&str>, name: &str) -> Result<f64> {
        match &self.kind {
            FeatureKind::Categorical { .. } => Ok(raw.and_then(|v| self.vocab.get(v)).copied().unwrap_or(0) as f64),
            FeatureKind::Numeric { mean, std, constant } => {
                let x = match raw.filter(|v| !v.is_empty()) {
                    Some(v) => v
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidData(format!("non-numeric value `{v}` in `{name}`")))?,
                    None => *mean,
                };
                Ok(if *constant { 0.0 } else { (x - mean) / std })
            }
        }
    }
}

struct MetaTable {
    columns: Vec<String>,
    /// Raw values per dense id; `None` when the id has no metadata row.
    rows: Vec<Option<Vec<String>>>,
}

fn read_meta(path: &Path, id_column: &str, prefix: &str, lookup: impl Fn(i64) -> Option<usize>, n: usize) -> Result<MetaTable> {
    let table = Table::read(path)?;
    let c_id = table.require(id_column)?;
    let cols: Vec<usize> = (0..table.header.len())
        .filter(|&c| table.header[c].starts_with(prefix))
        .collect();
    let columns: Vec<String> = cols.iter().map(|&c| table.header[c].clone()).collect();
    for name in &columns {
        column_type(name)?;
    }
    let mut rows = vec![None; n];
    let mut dropped = 0usize;
    for r in 0..table.rows.len() {
        let raw = table.int(r, c_id)?;
        match lookup(raw) {
            Some(dense) => rows[dense] = Some(cols.iter().map(|&c| table.rows[r][c].clone()).collect()),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        warn!("{}: dropped {dropped} metadata rows for unknown ids", path.display());
    }
    Ok(MetaTable { columns, rows })
}

/// Builds the context schema and feature tables.
///
/// Vocabularies and numeric statistics come from the train split only: ids
/// that occur in train for user/item metadata, train records for situation
/// columns.
pub fn read_context(
    mut corpus: Corpus,
    user_meta: Option<&Path>,
    item_meta: Option<&Path>,
    situation_columns: &[String],
) -> Result<Corpus> {
    let mut schema = ContextSchema::default();
    let train_users: HashSet<usize> = corpus.splits.train.iter().map(|r| r.user).collect();
    let train_items: HashSet<usize> = corpus.splits.train.iter().map(|r| r.item).collect();

    let mut entity_tables = |path: Option<&Path>,
                             id_column: &str,
                             prefix: &str,
                             scope: FeatureScope,
                             ids: &crate::corpus::IdMap,
                             train_ids: &HashSet<usize>,
                             n: usize|
     -> Result<Vec<Vec<f64>>> {
        let mut out = vec![Vec::new(); n];
        let Some(path) = path else { return Ok(out) };
        let meta = read_meta(path, id_column, prefix, |raw| ids.get(raw), n)?;
        for (col, name) in meta.columns.iter().enumerate() {
            let ty = column_type(name)?;
            let train_values = (0..n)
                .filter(|id| train_ids.contains(id))
                .filter_map(|id| meta.rows[id].as_ref().map(|r| r[col].as_str()));
            let enc = Encoder::fit(ty, train_values, name)?;
            for (id, row) in out.iter_mut().enumerate() {
                let raw = meta.rows[id].as_ref().map(|r| r[col].as_str());
                row.push(enc.encode(raw, name)?);
            }
            schema.features.push(FeatureDesc {
                name: name.clone(),
                scope,
                kind: enc.kind,
            });
        }
        Ok(out)
    };

    let user_features = entity_tables(
        user_meta,
        "user_id",
        "u_",
        FeatureScope::User,
        &corpus.user_ids,
        &train_users,
        corpus.n_users,
    )?;
    let item_features = entity_tables(
        item_meta,
        "item_id",
        "i_",
        FeatureScope::Item,
        &corpus.item_ids,
        &train_items,
        corpus.n_items,
    )?;

    for name in situation_columns {
        if !name.starts_with("c_") {
            return Err(Error::InvalidData(format!("situation column `{name}` must start with `c_`")));
        }
        let ty = column_type(name)?;
        let col = corpus
            .raw_situation
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidData(format!("situation column `{name}` not present in train file")))?;
        let raw = &corpus.raw_situation.values;
        let enc = Encoder::fit(ty, raw.train.iter().map(|row| row[col].as_str()), name)?;
        for split in Split::ALL {
            let values = raw.get(split);
            let records = corpus.splits.get_mut(split);
            for (r, row) in records.iter_mut().zip(values) {
                let v = row[col].as_str();
                r.situation.push(enc.encode((!v.is_empty()).then_some(v), name)?);
            }
        }
        schema.features.push(FeatureDesc {
            name: name.clone(),
            scope: FeatureScope::Situation,
            kind: enc.kind,
        });
    }

    for split in Split::ALL {
        let mut first: HashMap<&str, &[f64]> = HashMap::new();
        for r in corpus.splits.get(split) {
            if let Some(id) = r.impression_id.as_deref() {
                first.entry(id).or_insert(&r.situation);
            }
        }
        let first: HashMap<String, Vec<f64>> = first.into_iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect();
        for g in corpus.impressions.get_mut(split) {
            if let Some(s) = first.get(&g.impression_id) {
                g.situation = s.clone();
            }
        }
    }

    corpus.schema = schema;
    corpus.user_features = user_features;
    corpus.item_features = item_features;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use std::fs;
    use std::path::PathBuf;

    use super::*;
    use crate::corpus::{read_base, ReaderOptions};

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn corpus(dir: &Path) -> Corpus {
        let header = "user_id\titem_id\ttime\tc_weather_c\tc_temp_f\n";
        let train = write(dir, "train.tsv", &format!("{header}1\t1\t1\tsun\t1.0\n1\t2\t2\train\t3.0\n2\t3\t3\tsun\t2.0\n"));
        let dev = write(dir, "dev.tsv", &format!("{header}2\t4\t4\tsnow\t5.0\n"));
        let test = write(dir, "test.tsv", header);
        read_base(&train, &dev, &test, &ReaderOptions::default()).unwrap()
    }

    #[test]
    fn item_vocab_and_unknowns() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let c = corpus(d);
        // items 1,2,3 appear in train; 4 only in dev; 99 is unknown
        let meta = write(d, "item_meta.tsv", "item_id\ti_genre_c\ti_price_f\n1\t3\t1.0\n2\t7\t3.0\n3\t3\t2.0\n4\t11\t9.0\n99\t1\t1.0\n");
        let c = read_context(c, None, Some(&meta), &[]).unwrap();
        assert_eq!(c.schema.features.len(), 2);
        assert_eq!(c.schema.features[0].kind, FeatureKind::Categorical { cardinality: 3 });
        let genre: Vec<f64> = c.item_features.iter().map(|r| r[0]).collect();
        assert_eq!(genre, vec![1.0, 2.0, 1.0, 0.0]);
        let price: Vec<f64> = c.item_features.iter().take(3).map(|r| r[1]).collect();
        let std = (2.0f64 / 3.0).sqrt();
        for (p, raw) in price.iter().zip([1.0, 3.0, 2.0]) {
            assert!((p - (raw - 2.0) / std).abs() < 1e-12);
        }
    }

    #[test]
    fn numeric_standardization_by_hand() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let header = "user_id\titem_id\ttime\tc_x_f\n";
        let train = write(d, "train.tsv", &format!("{header}1\t1\t1\t1.0\n1\t2\t2\t3.0\n"));
        let dev = write(d, "dev.tsv", header);
        let test = write(d, "test.tsv", header);
        let c = read_base(&train, &dev, &test, &ReaderOptions::default()).unwrap();
        let c = read_context(c, None, None, &["c_x_f".to_string()]).unwrap();
        let vals: Vec<f64> = c.splits.train.iter().map(|r| r.situation[0]).collect();
        assert_eq!(vals, vec![-1.0, 1.0]);
    }

    #[test]
    fn situation_columns_and_missing_meta() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let c = corpus(d);
        let umeta = write(d, "user_meta.tsv", "user_id\tu_age_f\n1\t10\n");
        let cols = vec!["c_weather_c".to_string(), "c_temp_f".to_string()];
        let c = read_context(c, Some(&umeta), None, &cols).unwrap();
        // user 2 has no row: filled with the train mean, standardized to 0
        assert_eq!(c.user_features[1], vec![0.0]);
        // single train value: constant feature
        assert!(matches!(c.schema.features[0].kind, FeatureKind::Numeric { constant: true, .. }));
        assert_eq!(c.splits.train[0].situation[0], 1.0);
        assert_eq!(c.splits.train[1].situation[0], 2.0);
        // dev-only categorical value maps to unknown
        assert_eq!(c.splits.dev[0].situation[0], 0.0);
        assert_eq!(c.schema.count(FeatureScope::Situation), 2);
    }

    #[test]
    fn untyped_column_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let c = corpus(d);
        let meta = write(d, "item_meta.tsv", "item_id\ti_genre\n1\t3\n");
        assert!(read_context(c, None, Some(&meta), &[]).is_err());
    }
}
