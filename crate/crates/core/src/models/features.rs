use crate::corpus::{Corpus, FeatureKind, FeatureScope};
use crate::{Error, Result};

use super::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Source {
    UserId,
    ItemId,
    User(usize),
    Item(usize),
    Situation(usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Field {
    source: Source,
    offset: usize,
    /// `None` for numeric fields, which occupy a single feature slot.
    cardinality: Option<usize>,
}

/// Maps (user, item, situation) to sparse active features: one slot per
/// field, categorical values one-hot and numeric values carried as weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    fields: Vec<Field>,
    n_features: usize,
    user_table: Vec<Vec<f64>>,
    item_table: Vec<Vec<f64>>,
    n_situation: usize,
}

impl FeatureSpace {
    pub fn new(corpus: &Corpus, config: &ModelConfig) -> Self {
        let mut fields = Vec::new();
        let mut offset = 0;
        let mut push = |source, cardinality: Option<usize>| {
            fields.push(Field {
                source,
                offset,
                cardinality,
            });
            offset += cardinality.unwrap_or(1);
        };
        push(Source::UserId, Some(corpus.n_users));
        push(Source::ItemId, Some(corpus.n_items));
        let card = |k: &FeatureKind| match k {
            FeatureKind::Categorical { cardinality } => Some(*cardinality),
            FeatureKind::Numeric { .. } => None,
        };
        for (scope, include, make) in [
            (FeatureScope::User, config.include_user_features, Source::User as fn(usize) -> Source),
            (FeatureScope::Item, config.include_item_features, Source::Item),
            (FeatureScope::Situation, config.include_situation_features, Source::Situation),
        ] {
            if include {
                for (col, f) in corpus.schema.scoped(scope).enumerate() {
                    push(make(col), card(&f.kind));
                }
            }
        }
        FeatureSpace {
            n_features: offset,
            fields,
            user_table: corpus.user_features.clone(),
            item_table: corpus.item_features.clone(),
            n_situation: corpus.schema.count(FeatureScope::Situation),
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn n_users(&self) -> usize {
        self.fields[0].cardinality.unwrap()
    }

    pub fn n_items(&self) -> usize {
        self.fields[1].cardinality.unwrap()
    }

    fn uses_situation(&self) -> bool {
        self.fields.iter().any(|f| matches!(f.source, Source::Situation(_)))
    }

    /// `(feature index, value)` for every field, in field order.
    pub fn active(&self, user: usize, item: usize, situation: &[f64]) -> Result<Vec<(usize, f64)>> {
        if self.uses_situation() && situation.len() != self.n_situation {
            return Err(Error::Model(format!(
                "request carries {} situation values, model expects {}",
                situation.len(),
                self.n_situation
            )));
        }
        self.fields
            .iter()
            .map(|f| {
                let raw = match f.source {
                    Source::UserId => return Ok((f.offset + user, 1.0)),
                    Source::ItemId => return Ok((f.offset + item, 1.0)),
                    Source::User(c) => self.user_table[user][c],
                    Source::Item(c) => self.item_table[item][c],
                    Source::Situation(c) => situation[c],
                };
                Ok(match f.cardinality {
                    Some(card) => {
                        let v = raw as usize;
                        (f.offset + if raw >= 0.0 && v < card { v } else { 0 }, 1.0)
                    }
                    None => (f.offset, raw),
                })
            })
            .collect()
    }
}
