use std::borrow::Cow;

use crate::params::ParamSet;
use crate::real::{DoubleDouble, Real};

/// Read access to a model's parameters in scalar type `T`, optionally with
/// one coordinate shifted by `delta`. Forward passes read through a view so
/// the same code serves plain `f64` scoring and the high-precision shadow
/// evaluation used for finite differences.
pub(crate) struct View<'a, T> {
    params: &'a ParamSet,
    delta: Option<(usize, usize, T)>,
}

impl<'a> View<'a, f64> {
    pub fn new(params: &'a ParamSet) -> Self {
        View { params, delta: None }
    }
}

impl<'a> View<'a, DoubleDouble> {
    /// `perturb = (tensor, flat index, h)`; the shift is exact.
    pub fn shadow(params: &'a ParamSet, perturb: Option<(usize, usize, f64)>) -> Self {
        View {
            params,
            delta: perturb.map(|(t, i, h)| (t, i, DoubleDouble::from_f64(h))),
        }
    }
}

impl<'a, T: Real> View<'a, T> {
    pub fn data(&self, t: usize) -> Cow<'a, [T]> {
        self.slice(t, 0, self.params.get(t).len())
    }

    pub fn row(&self, t: usize, r: usize) -> Cow<'a, [T]> {
        let n = self.params.get(t).row_len();
        self.slice(t, r * n, (r + 1) * n)
    }

    pub fn at(&self, t: usize, i: usize) -> T {
        self.slice(t, i, i + 1)[0]
    }

    fn slice(&self, t: usize, start: usize, end: usize) -> Cow<'a, [T]> {
        let raw = T::cast_slice(&self.params.get(t).data[start..end]);
        match self.delta {
            Some((dt, i, h)) if dt == t && (start..end).contains(&i) => {
                let mut v = raw.into_owned();
                v[i - start] += h;
                Cow::Owned(v)
            }
            _ => raw,
        }
    }
}
