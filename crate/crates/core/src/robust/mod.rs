//! Scalar robust-statistics kernels shared by the learners and diagnostics.

mod expectile;
mod huber;
mod moments;
mod normal;
mod quantile;

pub use expectile::{expectile_grad, expectile_loss, weighted_expectile, ExpectileParams};
pub use huber::{huber_grad, huber_location, huber_loss, HuberParams};
pub use moments::{kurtosis, mean};
pub use normal::{erf, erfc, inverse_normal_cdf, normal_cdf};
pub use quantile::{ensemble_quantile, lcb_coefficient, quantile_sorted, QuantileSpec};
