//! Articulatory space: tongue contours, isolation-forest pruning and
//! convex-hull area per speaker and speaking mode.

mod contour;
mod hull;
mod iforest;
mod space;

pub use contour::{read_contours_csv, ridge_track, write_contours_csv, RidgeParams, TongueContour};
pub use hull::{convex_hull, polygon_area, COORD_SCALE};
pub use iforest::{average_path_length, fit_iforest, ForestParams, IsolationForest, IsolationTree, Node};
pub use space::{
    articulatory_space, prune_outliers, write_hull_csv, write_speaker_svgs, ContourCloud, HullResult,
    SpaceParams, SpaceResult,
};

/// A 2-D point in image-pixel coordinates (x = column, y = row).
pub type Point = [f64; 2];
