use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use super::KbError;
use crate::scalar::cosine;
use crate::Scalar;

/// Exact cosine top-k over an in-memory list of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<F> {
    dimension: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<F>>,
    known: BTreeSet<String>,
}

/// Orders hits so that the heap's maximum is the weakest one: lower score,
/// then larger id.
struct Hit<'a, F> {
    score: F,
    id: &'a str,
}

impl<F: Scalar> Hit<'_, F> {
    fn rank(&self, other: &Self) -> Ordering {
        // better hit = Less
        other.score.partial_cmp(&self.score).unwrap_or(Ordering::Equal).then_with(|| self.id.cmp(other.id))
    }
}

impl<F: Scalar> PartialEq for Hit<'_, F> {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}
impl<F: Scalar> Eq for Hit<'_, F> {}
impl<F: Scalar> PartialOrd for Hit<'_, F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Scalar> Ord for Hit<'_, F> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

impl<F: Scalar> VectorIndex<F> {
    pub fn new(dimension: usize) -> Self {
        VectorIndex { dimension, ids: Vec::new(), vectors: Vec::new(), known: BTreeSet::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<F>) -> Result<(), KbError> {
        let id = id.into();
        if vector.len() != self.dimension {
            return Err(KbError::DimensionMismatch { expected: self.dimension, found: vector.len() });
        }
        if !self.known.insert(id.clone()) {
            return Err(KbError::DuplicateId(id));
        }
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    /// Top `k` ids by descending cosine similarity, ties by ascending id.
    /// Returns `min(k, len)` hits.
    pub fn search(&self, query: &[F], k: usize) -> Vec<(String, F)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Hit<'_, F>> = BinaryHeap::with_capacity(k + 1);
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            let hit = Hit { score: cosine(query, v), id };
            if heap.len() < k {
                heap.push(hit);
            } else if heap.peek().is_some_and(|worst| hit < *worst) {
                heap.pop();
                heap.push(hit);
            }
        }
        heap.into_sorted_vec().into_iter().map(|h| (h.id.to_string(), h.score)).collect()
    }
}
