use crate::error::{GeomError, Result};
use crate::manifold::Tensor3;

/// Oriented triples `(a, b, c)` with `e_a × e_b = e_c` (0-based).
fn triples(dim: usize) -> Result<Vec<[usize; 3]>> {
    match dim {
        3 => Ok(vec![[0, 1, 2]]),
        // Lines {i, i+1, i+3} mod 7 of the Fano plane.
        7 => Ok((0..7).map(|i| [i, (i + 1) % 7, (i + 3) % 7]).collect()),
        other => Err(GeomError::UnsupportedDim(other)),
    }
}

/// Structure constants `A^k_ij` of the cross product, `e_i × e_j = A^k_ij e_k`.
pub fn cross_product_table(dim: usize) -> Result<Tensor3> {
    let mut a = Tensor3::zeros(dim);
    for [x, y, z] in triples(dim)? {
        // Each oriented triple generates its three cyclic products.
        for (i, j, k) in [(x, y, z), (y, z, x), (z, x, y)] {
            a[(k, i, j)] = 1.0;
            a[(k, j, i)] = -1.0;
        }
    }
    Ok(a)
}

pub fn cross_product(table: &Tensor3, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = table.dim();
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += table[(k, i, j)] * x[i] * y[j];
                }
            }
            s
        })
        .collect()
}
