//! Raw-log preparation: k-core filtering, labeling, impression sessions,
//! situation extraction and a chronological split.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Datelike, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawInteraction {
    pub user: i64,
    pub item: i64,
    pub time: i64,
    pub rating: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RawFormat {
    /// Tab-separated with a `user_id item_id time [rating]` header.
    Tsv,
    /// `user::item::rating::timestamp` lines without a header.
    MovieLens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Situation {
    Hour,
    Weekday,
    Period,
}

impl Situation {
    pub fn column(self) -> &'static str {
        match self {
            Situation::Hour => "c_hour_c",
            Situation::Weekday => "c_weekday_c",
            Situation::Period => "c_period_c",
        }
    }

    pub fn parse(s: &str) -> Option<Situation> {
        match s.trim() {
            "hour" => Some(Situation::Hour),
            "weekday" => Some(Situation::Weekday),
            "period" => Some(Situation::Period),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    /// Fractions of split units for train/dev/test in time order.
    Ratios([f64; 3]),
    /// Units at or after `dev_start` go to dev, at or after `test_start` to test.
    Times { dev_start: i64, test_start: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub k_core: usize,
    pub split: SplitSpec,
    /// Impression length; 0 keeps one interaction per split unit and writes
    /// no `impression_id` column.
    pub session_len: usize,
    /// Ratings at or above this value are positive. Ignored without ratings.
    pub pos_threshold: f64,
    pub situations: Vec<Situation>,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            k_core: 5,
            split: SplitSpec::Ratios([0.8, 0.1, 0.1]),
            session_len: 20,
            pos_threshold: 4.0,
            situations: vec![Situation::Hour, Situation::Weekday, Situation::Period],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRow {
    pub user: i64,
    pub item: i64,
    pub time: i64,
    pub label: Option<u8>,
    pub impression_id: Option<String>,
    pub situation: Vec<i64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrepOutput {
    pub train: Vec<PreparedRow>,
    pub dev: Vec<PreparedRow>,
    pub test: Vec<PreparedRow>,
    pub has_labels: bool,
    pub has_impressions: bool,
    pub situation_columns: Vec<String>,
}

pub fn read_raw_interactions(path: &Path, format: RawFormat) -> Result<Vec<RawInteraction>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out = Vec::new();
    match format {
        RawFormat::MovieLens => {
            for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let f: Vec<&str> = line.trim().split("::").collect();
                if f.len() != 4 {
                    return Err(parse_err(n + 1, format!("expected 4 `::` fields, found {}", f.len())));
                }
                let int = |s: &str| s.parse::<i64>().map_err(|_| parse_err(n + 1, format!("bad integer `{s}`")));
                out.push(RawInteraction {
                    user: int(f[0])?,
                    item: int(f[1])?,
                    rating: Some(f[2].parse().map_err(|_| parse_err(n + 1, format!("bad rating `{}`", f[2])))?),
                    time: int(f[3])?,
                });
            }
        }
        RawFormat::Tsv => {
            let mut lines = text.lines().enumerate();
            let header: Vec<&str> = lines.next().map(|(_, h)| h.split('\t').map(str::trim).collect()).unwrap_or_default();
            let col = |name: &str| header.iter().position(|h| *h == name);
            let need = |name: &str| {
                col(name).ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.to_string(),
                })
            };
            let (cu, ci, ct) = (need("user_id")?, need("item_id")?, need("time")?);
            let cr = col("rating");
            for (n, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
                let f: Vec<&str> = line.split('\t').map(str::trim).collect();
                if f.len() != header.len() {
                    return Err(parse_err(n + 1, format!("expected {} fields, found {}", header.len(), f.len())));
                }
                let int = |s: &str| s.parse::<i64>().map_err(|_| parse_err(n + 1, format!("bad integer `{s}`")));
                out.push(RawInteraction {
                    user: int(f[cu])?,
                    item: int(f[ci])?,
                    time: int(f[ct])?,
                    rating: match cr {
                        Some(c) => Some(f[c].parse().map_err(|_| parse_err(n + 1, format!("bad rating `{}`", f[c])))?),
                        None => None,
                    },
                });
            }
        }
    }
    Ok(out)
}

/// Calendar features of a UTC timestamp: hour of day, day of week (Monday
/// is 0) and period of day (night, morning, afternoon, evening in 6-hour
/// buckets starting at midnight).
pub fn derive_situation(timestamp: i64, which: Situation) -> i64 {
    let dt = DateTime::from_timestamp(timestamp, 0).unwrap_or_default();
    match which {
        Situation::Hour => dt.hour() as i64,
        Situation::Weekday => dt.weekday().num_days_from_monday() as i64,
        Situation::Period => (dt.hour() / 6) as i64,
    }
}

/// Iteratively drops users and items with fewer than `k` positive
/// interactions. `positive[i]` flags interaction `i`. Returns the indices of
/// surviving interactions in input order.
pub fn k_core_filter(interactions: &[RawInteraction], positive: &[bool], k: usize) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..interactions.len()).collect();
    if k == 0 {
        return alive;
    }
    loop {
        let mut user_pos: HashMap<i64, usize> = HashMap::new();
        let mut item_pos: HashMap<i64, usize> = HashMap::new();
        for &i in &alive {
            let r = &interactions[i];
            user_pos.entry(r.user).or_default();
            item_pos.entry(r.item).or_default();
            if positive[i] {
                *user_pos.get_mut(&r.user).unwrap() += 1;
                *item_pos.get_mut(&r.item).unwrap() += 1;
            }
        }
        let before = alive.len();
        alive.retain(|&i| {
            let r = &interactions[i];
            user_pos[&r.user] >= k && item_pos[&r.item] >= k
        });
        if alive.len() == before {
            return alive;
        }
    }
}

struct Unit {
    rows: Vec<usize>,
    time: i64,
}

pub fn prep_dataset(raw: &[RawInteraction], config: &PrepConfig) -> Result<PrepOutput> {
    match &config.split {
        SplitSpec::Ratios(r) => {
            if r.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                return Err(Error::Config(format!("non-monotone split ratios {r:?}")));
            }
        }
        SplitSpec::Times { dev_start, test_start } => {
            if dev_start > test_start {
                return Err(Error::Config(format!(
                    "non-monotone split times: dev starts at {dev_start}, test at {test_start}"
                )));
            }
        }
    }

    let has_ratings = raw.iter().all(|r| r.rating.is_some()) && !raw.is_empty();
    let positive: Vec<bool> = raw
        .iter()
        .map(|r| !has_ratings || r.rating.unwrap() >= config.pos_threshold)
        .collect();
    let kept = k_core_filter(raw, &positive, config.k_core);
    if kept.is_empty() {
        return Err(Error::InvalidData(format!("{}-core filtering removed every interaction", config.k_core)));
    }

    // Split units: impression sessions per user, or single interactions.
    let mut units: Vec<Unit> = Vec::new();
    let mut impression_of: HashMap<usize, String> = HashMap::new();
    if config.session_len > 0 {
        let mut by_user: Vec<(i64, Vec<usize>)> = Vec::new();
        let mut slot: HashMap<i64, usize> = HashMap::new();
        for &i in &kept {
            let u = raw[i].user;
            let s = *slot.entry(u).or_insert_with(|| {
                by_user.push((u, Vec::new()));
                by_user.len() - 1
            });
            by_user[s].1.push(i);
        }
        for (user, mut rows) in by_user {
            rows.sort_by_key(|&i| raw[i].time);
            for (chunk_idx, chunk) in rows.chunks(config.session_len).enumerate() {
                let id = format!("{user}_{chunk_idx}");
                for &i in chunk {
                    impression_of.insert(i, id.clone());
                }
                units.push(Unit {
                    rows: chunk.to_vec(),
                    time: chunk.iter().map(|&i| raw[i].time).max().unwrap(),
                });
            }
        }
    } else {
        units = kept
            .iter()
            .map(|&i| Unit {
                rows: vec![i],
                time: raw[i].time,
            })
            .collect();
    }
    units.sort_by_key(|u| (u.time, u.rows[0]));

    let n = units.len();
    let (b1, b2) = match config.split {
        SplitSpec::Ratios(r) => {
            let tie_extend = |mut b: usize| {
                while b > 0 && b < n && units[b].time == units[b - 1].time {
                    b += 1;
                }
                b
            };
            let b1 = tie_extend(((r[0] * n as f64).round() as usize).min(n));
            let b2 = tie_extend((((r[0] + r[1]) * n as f64).round() as usize).clamp(b1, n));
            (b1, b2.max(b1))
        }
        SplitSpec::Times { dev_start, test_start } => (
            units.partition_point(|u| u.time < dev_start),
            units.partition_point(|u| u.time < test_start),
        ),
    };

    let label_col = has_ratings || config.session_len > 0;
    let to_row = |i: usize| PreparedRow {
        user: raw[i].user,
        item: raw[i].item,
        time: raw[i].time,
        label: label_col.then_some(positive[i] as u8),
        impression_id: impression_of.get(&i).cloned(),
        situation: config.situations.iter().map(|&s| derive_situation(raw[i].time, s)).collect(),
    };
    let collect = |range: std::ops::Range<usize>| -> Vec<PreparedRow> {
        units[range].iter().flat_map(|u| u.rows.iter().map(|&i| to_row(i))).collect()
    };
    Ok(PrepOutput {
        train: collect(0..b1),
        dev: collect(b1..b2),
        test: collect(b2..n),
        has_labels: label_col,
        has_impressions: config.session_len > 0,
        situation_columns: config.situations.iter().map(|s| s.column().to_string()).collect(),
    })
}

/// Writes `train.tsv`, `dev.tsv` and `test.tsv` into `dir`.
pub fn write_prepared(out: &PrepOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut header = vec!["user_id", "item_id", "time"];
    if out.has_labels {
        header.push("label");
    }
    if out.has_impressions {
        header.push("impression_id");
    }
    header.extend(out.situation_columns.iter().map(String::as_str));
    for (name, rows) in [("train.tsv", &out.train), ("dev.tsv", &out.dev), ("test.tsv", &out.test)] {
        let mut s = header.join("\t");
        s.push('\n');
        for r in rows.iter() {
            write!(s, "{}\t{}\t{}", r.user, r.item, r.time).unwrap();
            if let Some(l) = r.label {
                write!(s, "\t{l}").unwrap();
            }
            if let Some(id) = &r.impression_id {
                write!(s, "\t{id}").unwrap();
            }
            for v in &r.situation {
                write!(s, "\t{v}").unwrap();
            }
            s.push('\n');
        }
        let path = dir.join(name);
        fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn ri(user: i64, item: i64, time: i64) -> RawInteraction {
        RawInteraction {
            user,
            item,
            time,
            rating: None,
        }
    }

    #[test]
    fn calendar_features() {
        // 2000-01-01T13:30:00Z, a Saturday
        let t = 946_733_400;
        assert_eq!(derive_situation(t, Situation::Hour), 13);
        assert_eq!(derive_situation(t, Situation::Weekday), 5);
        assert_eq!(derive_situation(t, Situation::Period), 2);
        assert_eq!(derive_situation(0, Situation::Weekday), 3); // 1970-01-01 was a Thursday
        assert_eq!(derive_situation(23 * 3600, Situation::Period), 3);
    }

    #[test]
    fn k_core_fixpoint_by_hand() {
        // Users A(1), B(2), C(3); items x(10), y(11), z(12); k = 2.
        // A: x, z   B: x, y   C: y
        // Round 1: C has 1 positive -> dropped; z has 1 positive -> dropped.
        // Round 2: A now has only x (1) -> dropped; y has only B (1) -> dropped.
        // Round 3: B has only x, x has only B -> both dropped. Empty fixpoint.
        let data = vec![ri(1, 10, 1), ri(1, 12, 2), ri(2, 10, 3), ri(2, 11, 4), ri(3, 11, 5)];
        let pos = vec![true; data.len()];
        assert!(k_core_filter(&data, &pos, 2).is_empty());

        // Adding C-x and A-y makes every node degree >= 2 except z.
        let mut data2 = data.clone();
        data2.push(ri(3, 10, 6));
        data2.push(ri(1, 11, 7));
        let pos = vec![true; data2.len()];
        let kept = k_core_filter(&data2, &pos, 2);
        // only the A-z interaction (index 1) is removed
        assert_eq!(kept, vec![0, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn k_core_drops_low_users_then_rechecks_items() {
        // A has 2 positives, B has 5; items 1,2 touched by A only besides B
        let mut data = vec![ri(0, 100, 0), ri(0, 101, 1)];
        for (t, item) in [100, 101, 102, 103, 104].into_iter().enumerate() {
            data.push(ri(1, item, 10 + t as i64));
        }
        let pos = vec![true; data.len()];
        // k=5: A removed, then items have 1 positive each -> B falls too
        assert!(k_core_filter(&data, &pos, 5).is_empty());
        // k=1 keeps everything
        assert_eq!(k_core_filter(&data, &pos, 1).len(), data.len());
    }

    #[test]
    fn k_core_property_holds_on_output() {
        let mut rng_state = 7u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 33) as i64
        };
        let data: Vec<RawInteraction> = (0..2000).map(|t| ri(next() % 60, next() % 40, t)).collect();
        let pos: Vec<bool> = (0..data.len()).map(|i| i % 4 != 0).collect();
        let kept = k_core_filter(&data, &pos, 5);
        assert!(!kept.is_empty());
        let mut u: HashMap<i64, usize> = HashMap::new();
        let mut it: HashMap<i64, usize> = HashMap::new();
        for &i in &kept {
            if pos[i] {
                *u.entry(data[i].user).or_default() += 1;
                *it.entry(data[i].item).or_default() += 1;
            }
        }
        for &i in &kept {
            assert!(u.get(&data[i].user).copied().unwrap_or(0) >= 5);
            assert!(it.get(&data[i].item).copied().unwrap_or(0) >= 5);
        }
    }

    #[test]
    fn quantile_split_sizes() {
        let data: Vec<RawInteraction> = (0..100).map(|t| ri(t % 7, t % 11, t)).collect();
        let cfg = PrepConfig {
            k_core: 0,
            session_len: 0,
            situations: vec![],
            ..Default::default()
        };
        let out = prep_dataset(&data, &cfg).unwrap();
        assert_eq!((out.train.len(), out.dev.len(), out.test.len()), (80, 10, 10));
        let max_train = out.train.iter().map(|r| r.time).max().unwrap();
        let min_dev = out.dev.iter().map(|r| r.time).min().unwrap();
        let min_test = out.test.iter().map(|r| r.time).min().unwrap();
        assert!(max_train <= min_dev && min_dev <= min_test);
        assert!(out.train.iter().all(|r| r.label.is_none()));
    }

    #[test]
    fn ties_go_to_earlier_split() {
        let mut data: Vec<RawInteraction> = (0..100).map(|t| ri(t % 7, t % 11, t)).collect();
        // records 79 and 80 share a timestamp
        data[80].time = 79;
        let cfg = PrepConfig {
            k_core: 0,
            session_len: 0,
            situations: vec![],
            ..Default::default()
        };
        let out = prep_dataset(&data, &cfg).unwrap();
        assert_eq!(out.train.len(), 81);
        let max_train = out.train.iter().map(|r| r.time).max().unwrap();
        assert!(out.dev.iter().all(|r| r.time > max_train));
    }

    #[test]
    fn sessions_and_labels() {
        let mut data = Vec::new();
        for t in 0..45 {
            data.push(RawInteraction {
                user: 1,
                item: t % 9,
                time: t,
                rating: Some(if t % 3 == 0 { 2.0 } else { 5.0 }),
            });
        }
        let cfg = PrepConfig {
            k_core: 0,
            session_len: 20,
            split: SplitSpec::Times {
                dev_start: 30,
                test_start: 40,
            },
            ..Default::default()
        };
        let out = prep_dataset(&data, &cfg).unwrap();
        // sessions end at t=19, 39, 44
        assert_eq!((out.train.len(), out.dev.len(), out.test.len()), (20, 20, 5));
        assert!(out.train.iter().all(|r| r.impression_id.as_deref() == Some("1_0")));
        assert_eq!(out.train[0].label, Some(0));
        assert_eq!(out.train[1].label, Some(1));
        assert_eq!(out.train[0].situation.len(), 3);
    }

    #[test]
    fn prep_errors() {
        let data = vec![ri(1, 1, 1)];
        let cfg = PrepConfig::default();
        assert!(prep_dataset(&data, &cfg).unwrap_err().to_string().contains("removed every"));
        let bad = PrepConfig {
            split: SplitSpec::Ratios([0.9, -0.1, 0.2]),
            ..Default::default()
        };
        assert!(prep_dataset(&data, &bad).unwrap_err().to_string().contains("non-monotone"));
        let bad = PrepConfig {
            split: SplitSpec::Times {
                dev_start: 10,
                test_start: 5,
            },
            ..Default::default()
        };
        assert!(prep_dataset(&data, &bad).is_err());
    }

    #[test]
    fn written_files_read_back() {
        let data: Vec<RawInteraction> = (0..60)
            .map(|t| RawInteraction {
                user: t % 3,
                item: t % 5,
                time: 946_733_400 + t * 3600,
                rating: Some(((t % 5) + 1) as f64),
            })
            .collect();
        let cfg = PrepConfig {
            k_core: 2,
            session_len: 5,
            ..Default::default()
        };
        let out = prep_dataset(&data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_prepared(&out, dir.path()).unwrap();
        let d = dir.path();
        let c = crate::corpus::read_impressions(
            &d.join("train.tsv"),
            &d.join("dev.tsv"),
            &d.join("test.tsv"),
            &Default::default(),
        )
        .unwrap();
        let rows: usize = c.impressions.train.iter().map(|g| g.len()).sum();
        assert_eq!(rows, out.train.len());
        assert_eq!(c.raw_situation.columns, vec!["c_hour_c", "c_weekday_c", "c_period_c"]);
    }
}
