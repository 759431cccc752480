//! JSON helpers shared by the problem and partition files: doubles are
//! written as decimal strings with 17 significant digits, which round-trips
//! every finite `f64` exactly.

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::numerics::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_str(&format!("{:.16e}", self.0))
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a decimal number or a string holding one")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                v.trim()
                    .parse::<f64>()
                    .map(Num)
                    .map_err(|_| E::custom(format!("`{v}` is not a number")))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

pub fn vec_out(v: &[f64]) -> Vec<Num> {
    v.iter().map(|x| Num(*x)).collect()
}

pub fn vec_in(v: &[Num]) -> Vector {
    v.iter().map(|x| x.0).collect()
}

pub fn mat_out(m: &Matrix) -> Vec<Vec<Num>> {
    (0..m.rows()).map(|i| vec_out(m.row(i))).collect()
}

/// Rebuilds a matrix from nested rows; `cols` fixes the width when there are
/// no rows. Returns a message on ragged input.
pub fn mat_in(rows: &[Vec<Num>], cols: usize, field: &str) -> Result<Matrix, String> {
    let mut m = Matrix::zeros(0, cols);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(format!(
                "field `{field}`: row {i} has {} entries, expected {cols}",
                r.len()
            ));
        }
        m.push_row(&vec_in(r));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn finite_doubles_round_trip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let s = serde_json::to_string(&Num(x)).unwrap();
            let back: Num = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back.0.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn accepts_plain_numbers() {
        let v: Vec<Num> = serde_json::from_str("[1, -2.5, \"3e-1\"]").unwrap();
        assert_eq!(vec_in(&v), vec![1.0, -2.5, 0.3]);
    }
}
