//! Floating-point scalar used by embeddings and similarity search.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Serialize + DeserializeOwned + Send + Sync + 'static
{
    /// Converts from `f64`, saturating to the nearest representable value.
    fn of(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(Self::zero)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sequential dot product. The summation order is part of the contract: the
/// retrieval oracle in the tests relies on bit-identical scores.
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

/// Euclidean norm, summed in index order.
pub fn norm<F: Scalar>(v: &[F]) -> F {
    dot(v, v).sqrt()
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine<F: Scalar>(a: &[F], b: &[F]) -> F {
    let denom = norm(a) * norm(b);
    if denom == F::zero() {
        return F::zero();
    }
    dot(a, b) / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_of_self_is_one() {
        let v = [0.3f64, -1.2, 4.0];
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-12);
        let w = [0.3f32, -1.2, 4.0];
        assert!((cosine(&w, &w) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_vector_scores_zero() {
        assert_eq!(cosine(&[0.0f32; 3], &[1.0, 2.0, 3.0]), 0.0);
    }
}
