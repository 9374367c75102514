//! Two configurations that the linear assignment cost cannot tell apart.

use crate::error::Result;
use crate::simgeom::{cross_similarity, SimilarityMode, SimilarityTriple};
use crate::tensor::Tensor;

/// Both triples share the inter-set matrix `S` and view A's layout (a unit
/// square). View B is the same square in the first triple and four unit-spaced
/// collinear points in the second.
pub fn fig1b_instance() -> Result<[SimilarityTriple; 2]> {
    let mode = SimilarityMode::Euclidean;
    let square = Tensor::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])?;
    let line = Tensor::from_rows(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])?;
    let inter = cross_similarity(&square, &square, mode)?;
    let intra_a = inter.clone();
    let make = |b: &Tensor| -> Result<SimilarityTriple> {
        Ok(SimilarityTriple { inter: inter.clone(), intra_a: intra_a.clone(), intra_b: cross_similarity(b, b, mode)?, mode })
    };
    Ok([make(&square)?, make(&line)?])
}
