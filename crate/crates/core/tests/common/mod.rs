#![allow(dead_code)]

pub mod gradcheck;

use recflex::corpus::{
    ContextSchema, Corpus, FeatureDesc, FeatureKind, FeatureScope, IdMap, InteractionRecord, PerSplit,
};

pub fn record(user: usize, item: usize, time: i64) -> InteractionRecord {
    InteractionRecord {
        user,
        item,
        time,
        label: None,
        impression_id: None,
        situation: Vec::new(),
        neg_items: None,
        history: Vec::new(),
    }
}

/// Small corpus with one feature of each scope/kind combination used by the
/// context-aware models.
pub fn tiny_context_corpus(n_users: usize, n_items: usize) -> Corpus {
    let schema = ContextSchema {
        features: vec![
            FeatureDesc {
                name: "u_age_c".into(),
                scope: FeatureScope::User,
                kind: FeatureKind::Categorical { cardinality: 3 },
            },
            FeatureDesc {
                name: "i_price_f".into(),
                scope: FeatureScope::Item,
                kind: FeatureKind::Numeric {
                    mean: 0.0,
                    std: 1.0,
                    constant: false,
                },
            },
            FeatureDesc {
                name: "c_hour_c".into(),
                scope: FeatureScope::Situation,
                kind: FeatureKind::Categorical { cardinality: 4 },
            },
            FeatureDesc {
                name: "c_temp_f".into(),
                scope: FeatureScope::Situation,
                kind: FeatureKind::Numeric {
                    mean: 0.0,
                    std: 1.0,
                    constant: false,
                },
            },
        ],
    };
    let train: Vec<InteractionRecord> = (0..n_users * 3)
        .map(|k| {
            let mut r = record(k % n_users, (k * 7) % n_items, k as i64);
            r.situation = vec![(k % 4) as f64, (k as f64 * 0.37).sin()];
            r
        })
        .collect();
    let mut user_history = vec![Vec::new(); n_users];
    for r in &train {
        user_history[r.user].push((r.item, r.time));
    }
    Corpus {
        n_users,
        n_items,
        splits: PerSplit {
            train,
            dev: Vec::new(),
            test: Vec::new(),
        },
        user_history,
        impressions: PerSplit::default(),
        schema,
        user_features: (0..n_users).map(|u| vec![(u % 3) as f64]).collect(),
        item_features: (0..n_items).map(|i| vec![(i as f64 - n_items as f64 / 2.0) / 4.0]).collect(),
        user_ids: IdMap::from_raw((0..n_users as i64).collect()),
        item_ids: IdMap::from_raw((0..n_items as i64).collect()),
        raw_situation: Default::default(),
    }
}
