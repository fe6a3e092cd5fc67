//! Gromov delta-hyperbolicity estimation (worst, average, relative, full
//! distribution), manifold samplers for dimensionality calibration, and
//! distribution comparison statistics.

mod error;
mod gromov;
mod io;
mod matrix;
mod ranksum;
mod report;
mod sampler;

pub use error::{DeltaError, Result};
pub use gromov::{
    delta_avg, delta_worst, gromov_products, minmax_product, slack_matrix, AvgMode, SquareMatrix,
};
pub use io::{read_points_csv, write_histogram_csv, write_points_csv, write_report_json};
pub use matrix::{DistanceMatrix, MetricTag};
pub use ranksum::{rank_sum_test, Alternative, RankSumResult};
pub use report::{delta_distribution, histogram, DeltaConfig, DeltaReport, PointCloud, RunRecord, Stat};
pub use sampler::{sample_manifold, sample_tree_metric, ManifoldKind, SampledCloud};
