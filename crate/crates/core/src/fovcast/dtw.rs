//! Dynamic time warping between head trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{angle_between, Orientation};

/// DTW outcome for a pair of viewers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub viewer_a: u32,
    pub viewer_b: u32,
    /// Accumulated great-circle cost along the optimal warping path, radians.
    pub dtw_distance: f64,
    pub similarity: f64,
}

pub fn similarity_from_distance(d: f64) -> f64 {
    1.0 / (1.0 + d)
}

/// Classical DTW over unit view vectors with great-circle point cost.
pub fn dtw_directions(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for pa in a {
        cur[0] = f64::INFINITY;
        for (j, pb) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = angle_between(pa, pb) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

pub fn dtw_distance(a: &[Orientation], b: &[Orientation]) -> Result<f64> {
    let da: Vec<_> = a.iter().map(Orientation::direction).collect();
    let db: Vec<_> = b.iter().map(Orientation::direction).collect();
    dtw_directions(&da, &db)
}

pub fn dtw_similarity(
    viewer_a: u32,
    traj_a: &[Orientation],
    viewer_b: u32,
    traj_b: &[Orientation],
) -> Result<SimilarityScore> {
    let d = dtw_distance(traj_a, traj_b)?;
    Ok(SimilarityScore {
        viewer_a,
        viewer_b,
        dtw_distance: d,
        similarity: similarity_from_distance(d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: &[(f64, f64)]) -> Vec<Orientation> {
        points.iter().map(|(y, p)| Orientation::yaw_pitch(*y, *p)).collect()
    }

    #[test]
    fn identical_trajectories() {
        let a = traj(&[(0.0, 0.0), (10.0, 5.0), (20.0, 5.0)]);
        let s = dtw_similarity(1, &a, 2, &a).unwrap();
        assert_eq!(s.dtw_distance, 0.0);
        assert_eq!(s.similarity, 1.0);
    }

    #[test]
    fn single_points() {
        let a = traj(&[(0.0, 0.0)]);
        let b = traj(&[(30.0, 0.0)]);
        let d = dtw_distance(&a, &b).unwrap();
        assert!((d - 30f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(matches!(dtw_distance(&[], &traj(&[(0.0, 0.0)])), Err(Error::EmptyTrajectory)));
    }

    /// Minimum path cost over every monotone warping path, by explicit
    /// recursive enumeration.
    fn enumerate_paths(a: &[Orientation], b: &[Orientation]) -> f64 {
        fn walk(a: &[Orientation], b: &[Orientation], i: usize, j: usize, acc: f64, best: &mut f64) {
            let acc = acc + a[i].angle_to(&b[j]);
            if i == a.len() - 1 && j == b.len() - 1 {
                *best = best.min(acc);
                return;
            }
            if i + 1 < a.len() {
                walk(a, b, i + 1, j, acc, best);
            }
            if j + 1 < b.len() {
                walk(a, b, i, j + 1, acc, best);
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                walk(a, b, i + 1, j + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(a, b, 0, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn matches_exhaustive_path_enumeration() {
        let a = traj(&[(0.0, 0.0), (12.0, 3.0), (25.0, 4.0), (31.0, -2.0), (40.0, 0.0)]);
        let b = traj(&[(-5.0, 1.0), (3.0, 2.0), (22.0, 8.0), (37.0, 1.0), (38.0, -3.0)]);
        let d = dtw_distance(&a, &b).unwrap();
        let oracle = enumerate_paths(&a, &b);
        assert!((d - oracle).abs() < 1e-12, "{d} vs {oracle}");
    }

    #[test]
    fn symmetric() {
        let a = traj(&[(0.0, 0.0), (12.0, 3.0), (25.0, 4.0)]);
        let b = traj(&[(170.0, 10.0), (-175.0, 12.0), (-160.0, 8.0), (-150.0, 9.0)]);
        assert_eq!(dtw_distance(&a, &b).unwrap(), dtw_distance(&b, &a).unwrap());
    }
}
