//! JSON has no infinities, so non-finite floats serialize as the strings
//! `"inf"`, `"-inf"` and `"nan"`.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

pub(crate) fn extended<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else if *v < 0.0 {
        s.serialize_str("-inf")
    } else {
        s.serialize_str("nan")
    }
}

pub(crate) fn extended_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&Extended(*x))?;
    }
    seq.end()
}

/// A float that serializes through [`extended`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extended(pub f64);

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        extended(&self.0, s)
    }
}
