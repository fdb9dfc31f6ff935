//! Dense matrix products with an optional row-parallel split.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, Axis};

use crate::par::Execution;

/// Below this many multiply-adds the parallel split costs more than it saves.
const PAR_MIN_FLOPS: usize = 1 << 18;

/// `a · b` for views of compatible shape. Callers check shapes.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, exec: Execution) -> Array2<f64> {
    let (m, k) = a.dim();
    let n = b.ncols();
    debug_assert_eq!(k, b.nrows());
    let mut out = Array2::<f64>::zeros((m, n));
    if m == 0 || n == 0 {
        return out;
    }
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && m * n * k.max(1) >= PAR_MIN_FLOPS && m > 1 {
        use rayon::prelude::*;
        let threads = rayon::current_num_threads().max(1);
        let chunk = m.div_ceil(threads).max(1);
        let pieces: Vec<_> = out
            .axis_chunks_iter_mut(Axis(0), chunk)
            .zip(a.axis_chunks_iter(Axis(0), chunk))
            .collect();
        pieces.into_par_iter().for_each(|(mut o, a_rows)| {
            general_mat_mul(1.0, &a_rows, &b, 0.0, &mut o);
        });
        return out;
    }
    let _ = (exec, PAR_MIN_FLOPS, Axis(0));
    general_mat_mul(1.0, &a, &b, 0.0, &mut out);
    out
}
