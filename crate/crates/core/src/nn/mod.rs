//! Dense ReLU networks with hand-written reverse mode, Adam, soft target
//! updates and a plain-text network file format.

mod adam;
mod checkpoint;
mod mlp;
mod policy;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_mlp, load_policy, save_mlp, save_policy};
pub use mlp::{soft_update, ForwardCache, Layer, Mlp, MlpGrad};
pub use policy::{PolicyGrad, PolicyHead, PolicyKind, LOG_STD_MAX, LOG_STD_MIN};

use ndarray::Array2;

/// Packs equally sized row vectors into a `(rows, width)` matrix.
pub fn stack_rows(rows: &[Vec<f64>], width: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows.len(), width));
    for (mut dst, src) in m.rows_mut().into_iter().zip(rows) {
        dst.as_slice_mut()
            .expect("standard layout")
            .copy_from_slice(src);
    }
    m
}
