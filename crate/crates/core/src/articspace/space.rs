use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contour::TongueContour;
use super::hull::{convex_hull, polygon_area};
use super::iforest::{fit_iforest, ForestParams};
use super::Point;
use crate::corpus::{Mode, UtteranceRecord};
use crate::error::{Error, Result};
use crate::{rng, svg};

/// All contour points of one speaker in one speaking mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourCloud {
    pub speaker: String,
    pub mode: Mode,
    pub points: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullResult {
    pub speaker: String,
    pub mode: Mode,
    pub n_points: usize,
    pub n_pruned: usize,
    pub vertices: Vec<Point>,
    /// Area in pixel².
    pub area: f64,
    /// Area in mm² when a pixel size was configured.
    pub area_mm2: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub contamination: f64,
    pub forest: ForestParams,
    pub seed: u64,
    /// Edge length of one pixel in millimetres, if known.
    pub mm_per_pixel: Option<f64>,
}

impl Default for SpaceParams {
    fn default() -> Self {
        Self {
            contamination: 0.02,
            forest: ForestParams::default(),
            seed: 0,
            mm_per_pixel: None,
        }
    }
}

/// Removes the ⌈contamination·N⌉ highest-scoring points. Equal scores are
/// removed in input order; survivors keep their input order. Returns the
/// pruned cloud and the number of removed points.
pub fn prune_outliers(
    cloud: &ContourCloud,
    contamination: f64,
    forest: ForestParams,
    seed: u64,
) -> Result<(ContourCloud, usize)> {
    if !(0.0..0.5).contains(&contamination) {
        return Err(Error::invalid(format!("contamination {contamination} outside [0, 0.5)")));
    }
    let n = cloud.points.len();
    let n_remove = (contamination * n as f64 - 1e-9).ceil().max(0.0) as usize;
    if n_remove == 0 {
        return Ok((cloud.clone(), 0));
    }
    if n_remove >= n {
        return Err(Error::invalid(format!(
            "pruning {n_remove} of {n} points would empty the cloud for {} {}",
            cloud.speaker, cloud.mode
        )));
    }
    let f = fit_iforest(&cloud.points, forest, seed)?;
    let scores = f.scores(&cloud.points);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut drop = vec![false; n];
    for &i in &order[..n_remove] {
        drop[i] = true;
    }
    let points = cloud
        .points
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(p, _)| *p)
        .collect();
    Ok((
        ContourCloud {
            speaker: cloud.speaker.clone(),
            mode: cloud.mode,
            points,
        },
        n_remove,
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceResult {
    pub hulls: Vec<HullResult>,
    /// Speakers observed in every mode present, with their per-mode areas.
    pub paired: BTreeMap<String, BTreeMap<Mode, f64>>,
}

impl SpaceResult {
    /// Hull area keyed by (speaker, mode) for the paired statistics.
    pub fn area_map(&self) -> BTreeMap<(String, Mode), f64> {
        self.paired
            .iter()
            .flat_map(|(s, m)| m.iter().map(move |(mode, a)| ((s.clone(), *mode), *a)))
            .collect()
    }
}

fn mode_index(m: Mode) -> u64 {
    match m {
        Mode::Modal => 0,
        Mode::Silent => 1,
        Mode::Whispered => 2,
    }
}

/// Pools contour points per speaker × mode, prunes them and measures the
/// convex hull. Each cloud uses a forest seed derived from (seed, speaker,
/// mode) so results do not depend on processing order.
pub fn articulatory_space(
    records: &[UtteranceRecord],
    contours: &HashMap<String, Vec<TongueContour>>,
    params: SpaceParams,
) -> Result<SpaceResult> {
    let mut clouds: BTreeMap<(String, Mode), Vec<Point>> = BTreeMap::new();
    for r in records {
        let cs = contours
            .get(&r.id)
            .ok_or_else(|| Error::invalid(format!("no contours for utterance {}", r.id)))?;
        let pts = clouds.entry((r.speaker.clone(), r.mode)).or_default();
        for c in cs {
            pts.extend_from_slice(&c.points);
        }
    }
    let hulls: Vec<HullResult> = clouds
        .into_par_iter()
        .map(|((speaker, mode), points)| {
            let cloud = ContourCloud { speaker, mode, points };
            let seed = rng::derive_seed(params.seed, &[rng::hash_str(&cloud.speaker), mode_index(mode)]);
            let (kept, n_pruned) = prune_outliers(&cloud, params.contamination, params.forest, seed)?;
            let vertices = convex_hull(&kept.points);
            let area = polygon_area(&vertices);
            Ok(HullResult {
                speaker: cloud.speaker,
                mode,
                n_points: cloud.points.len(),
                n_pruned,
                vertices,
                area,
                area_mm2: params.mm_per_pixel.map(|s| area * s * s),
            })
        })
        .collect::<Result<_>>()?;

    let modes: std::collections::BTreeSet<Mode> = hulls.iter().map(|h| h.mode).collect();
    let mut by_speaker: BTreeMap<String, BTreeMap<Mode, f64>> = BTreeMap::new();
    for h in &hulls {
        by_speaker.entry(h.speaker.clone()).or_default().insert(h.mode, h.area);
    }
    let paired = by_speaker
        .into_iter()
        .filter(|(s, m)| {
            let complete = m.len() == modes.len();
            if !complete {
                warn!("speaker {s} lacks some speaking modes; excluded from paired hull table");
            }
            complete
        })
        .collect();
    Ok(SpaceResult { hulls, paired })
}

/// `speaker,mode,n_points,n_pruned,area` (area in pixel², or mm² when a
/// pixel size was configured).
pub fn write_hull_csv(path: &Path, result: &SpaceResult) -> Result<()> {
    let mut s = String::from("speaker,mode,n_points,n_pruned,area\n");
    for h in &result.hulls {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            h.speaker,
            h.mode,
            h.n_points,
            h.n_pruned,
            h.area_mm2.unwrap_or(h.area)
        );
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// One SVG per speaker with a panel per mode: contours drawn lightly, the
/// hull outline dark.
pub fn write_speaker_svgs(
    dir: &Path,
    records: &[UtteranceRecord],
    contours: &HashMap<String, Vec<TongueContour>>,
    result: &SpaceResult,
    image_width: usize,
    image_height: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_speaker: BTreeMap<&str, Vec<&HullResult>> = BTreeMap::new();
    for h in &result.hulls {
        by_speaker.entry(&h.speaker).or_default().push(h);
    }
    for (speaker, hulls) in by_speaker {
        let panels: Vec<svg::HullPanel<'_>> = hulls
            .iter()
            .map(|h| svg::HullPanel {
                title: format!("{speaker} {} (area {:.1})", h.mode, h.area),
                contours: records
                    .iter()
                    .filter(|r| r.speaker == speaker && r.mode == h.mode)
                    .filter_map(|r| contours.get(&r.id))
                    .flatten()
                    .map(|c| c.points.as_slice())
                    .collect(),
                hull: &h.vertices,
            })
            .collect();
        let path = dir.join(format!("hull_{speaker}.svg"));
        fs::write(&path, svg::hull_overlay(&panels, image_width as f64, image_height as f64))
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cloud(points: Vec<Point>) -> ContourCloud {
        ContourCloud {
            speaker: "s".into(),
            mode: Mode::Modal,
            points,
        }
    }

    #[test]
    fn zero_contamination_is_identity() {
        let c = cloud(vec![[0.0, 0.0], [1.0, 1.0], [5.0, 2.0]]);
        let (kept, n) = prune_outliers(&c, 0.0, ForestParams::default(), 1).unwrap();
        assert_eq!((kept, n), (c, 0));
    }

    #[test]
    fn removes_ceiling_count_and_never_grows_the_hull() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for n in [10usize, 37, 101] {
            let c = cloud((0..n).map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 5.0]).collect());
            for frac in [0.01, 0.05, 0.2, 0.49] {
                let (kept, removed) = prune_outliers(&c, frac, ForestParams { n_trees: 20, sample_size: 64 }, 3).unwrap();
                assert_eq!(removed, (frac * n as f64).ceil() as usize);
                assert_eq!(kept.points.len(), n - removed);
                assert!(polygon_area(&convex_hull(&kept.points)) <= polygon_area(&convex_hull(&c.points)));
            }
        }
    }

    #[test]
    fn rejects_bad_contamination_and_emptying() {
        let c = cloud(vec![[0.0, 0.0]]);
        assert!(prune_outliers(&c, 0.5, ForestParams::default(), 0).is_err());
        assert!(prune_outliers(&c, 0.4, ForestParams::default(), 0).is_err());
    }
}
