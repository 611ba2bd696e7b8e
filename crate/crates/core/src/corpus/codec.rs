//! Little-endian, length-prefixed binary encoding for cached corpora.

use super::{
    ContextSchema, Corpus, FeatureDesc, FeatureKind, FeatureScope, IdMap, ImpressionGroup, InteractionRecord,
    PerSplit, RawSituation, Split,
};
use crate::{Error, Result};

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }
    fn seq<T>(&mut self, xs: &[T], mut f: impl FnMut(&mut Self, &T)) {
        self.usize(xs.len());
        for x in xs {
            f(self, x);
        }
    }
    fn opt<T>(&mut self, x: &Option<T>, f: impl FnOnce(&mut Self, &T)) {
        match x {
            None => self.u8(0),
            Some(v) => {
                self.u8(1);
                f(self, v);
            }
        }
    }
    fn per_split<T>(&mut self, p: &PerSplit<T>, mut f: impl FnMut(&mut Self, &T)) {
        for s in Split::ALL {
            f(self, p.get(s));
        }
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::RebuildRequired("truncated cache".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::RebuildRequired("length overflow".into()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.usize()?;
        if n > self.buf.len() - self.pos {
            return Err(Error::RebuildRequired("corrupt length prefix".into()));
        }
        Ok(n)
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::RebuildRequired("invalid utf-8".into()))
    }
    fn seq<T>(&mut self, mut f: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        let n = self.len()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(f(self)?);
        }
        Ok(out)
    }
    fn opt<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<Option<T>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(f(self)?)),
            t => Err(Error::RebuildRequired(format!("bad option tag {t}"))),
        }
    }
    fn per_split<T>(&mut self, mut f: impl FnMut(&mut Self) -> Result<T>) -> Result<PerSplit<T>> {
        Ok(PerSplit {
            train: f(self)?,
            dev: f(self)?,
            test: f(self)?,
        })
    }
    pub fn finished(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn write_record(w: &mut Writer, r: &InteractionRecord) {
    w.usize(r.user);
    w.usize(r.item);
    w.i64(r.time);
    w.opt(&r.label, |w, &l| w.u8(l));
    w.opt(&r.impression_id, |w, s| w.str(s));
    w.seq(&r.situation, |w, &x| w.f64(x));
    w.opt(&r.neg_items, |w, xs| w.seq(xs, |w, &i| w.usize(i)));
    w.seq(&r.history, |w, &i| w.usize(i));
}

fn read_record(r: &mut Reader) -> Result<InteractionRecord> {
    Ok(InteractionRecord {
        user: r.usize()?,
        item: r.usize()?,
        time: r.i64()?,
        label: r.opt(|r| r.u8())?,
        impression_id: r.opt(|r| r.str())?,
        situation: r.seq(|r| r.f64())?,
        neg_items: r.opt(|r| r.seq(|r| r.usize()))?,
        history: r.seq(|r| r.usize())?,
    })
}

fn write_group(w: &mut Writer, g: &ImpressionGroup) {
    w.str(&g.impression_id);
    w.usize(g.user);
    w.i64(g.time);
    w.seq(&g.items, |w, &i| w.usize(i));
    w.seq(&g.labels, |w, &l| w.u8(l));
    w.seq(&g.situation, |w, &x| w.f64(x));
}

fn read_group(r: &mut Reader) -> Result<ImpressionGroup> {
    Ok(ImpressionGroup {
        impression_id: r.str()?,
        user: r.usize()?,
        time: r.i64()?,
        items: r.seq(|r| r.usize())?,
        labels: r.seq(|r| r.u8())?,
        situation: r.seq(|r| r.f64())?,
    })
}

fn write_feature(w: &mut Writer, f: &FeatureDesc) {
    w.str(&f.name);
    w.u8(match f.scope {
        FeatureScope::User => 0,
        FeatureScope::Item => 1,
        FeatureScope::Situation => 2,
    });
    match f.kind {
        FeatureKind::Categorical { cardinality } => {
            w.u8(0);
            w.usize(cardinality);
        }
        FeatureKind::Numeric { mean, std, constant } => {
            w.u8(1);
            w.f64(mean);
            w.f64(std);
            w.u8(constant as u8);
        }
    }
}

fn read_feature(r: &mut Reader) -> Result<FeatureDesc> {
    let name = r.str()?;
    let scope = match r.u8()? {
        0 => FeatureScope::User,
        1 => FeatureScope::Item,
        2 => FeatureScope::Situation,
        t => return Err(Error::RebuildRequired(format!("bad scope tag {t}"))),
    };
    let kind = match r.u8()? {
        0 => FeatureKind::Categorical {
            cardinality: r.usize()?,
        },
        1 => FeatureKind::Numeric {
            mean: r.f64()?,
            std: r.f64()?,
            constant: r.u8()? != 0,
        },
        t => return Err(Error::RebuildRequired(format!("bad kind tag {t}"))),
    };
    Ok(FeatureDesc { name, scope, kind })
}

fn write_table(w: &mut Writer, t: &[Vec<f64>]) {
    w.seq(t, |w, row| w.seq(row, |w, &x| w.f64(x)));
}

fn read_table(r: &mut Reader) -> Result<Vec<Vec<f64>>> {
    r.seq(|r| r.seq(|r| r.f64()))
}

pub(crate) fn encode_corpus(w: &mut Writer, c: &Corpus) {
    w.usize(c.n_users);
    w.usize(c.n_items);
    w.per_split(&c.splits, |w, recs| w.seq(recs, write_record));
    w.seq(&c.user_history, |w, h| {
        w.seq(h, |w, &(i, t)| {
            w.usize(i);
            w.i64(t);
        })
    });
    w.per_split(&c.impressions, |w, gs| w.seq(gs, write_group));
    w.seq(&c.schema.features, write_feature);
    write_table(w, &c.user_features);
    write_table(w, &c.item_features);
    w.seq(c.user_ids.raw_ids(), |w, &x| w.i64(x));
    w.seq(c.item_ids.raw_ids(), |w, &x| w.i64(x));
    w.seq(&c.raw_situation.columns, |w, s| w.str(s));
    w.per_split(&c.raw_situation.values, |w, rows| w.seq(rows, |w, row| w.seq(row, |w, s| w.str(s))));
}

pub(crate) fn decode_corpus(r: &mut Reader) -> Result<Corpus> {
    let n_users = r.usize()?;
    let n_items = r.usize()?;
    let splits = r.per_split(|r| r.seq(read_record))?;
    let user_history = r.seq(|r| r.seq(|r| Ok((r.usize()?, r.i64()?))))?;
    let impressions = r.per_split(|r| r.seq(read_group))?;
    let schema = ContextSchema {
        features: r.seq(read_feature)?,
    };
    let user_features = read_table(r)?;
    let item_features = read_table(r)?;
    let user_ids = IdMap::from_raw(r.seq(|r| r.i64())?);
    let item_ids = IdMap::from_raw(r.seq(|r| r.i64())?);
    let columns = r.seq(|r| r.str())?;
    let values = r.per_split(|r| r.seq(|r| r.seq(|r| r.str())))?;
    Ok(Corpus {
        n_users,
        n_items,
        splits,
        user_history,
        impressions,
        schema,
        user_features,
        item_features,
        user_ids,
        item_ids,
        raw_situation: RawSituation { columns, values },
    })
}
