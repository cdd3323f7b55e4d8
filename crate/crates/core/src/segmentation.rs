//! Splitting trajectories into pieces of similar robustness.
//!
//! Slice-node minR values are mapped through a logistic curve into `[0, 1]`,
//! clustered with a 1D Gaussian KDE, cut into runs of equal label, and runs of
//! the same label separated by a short foreign run are bridged back together.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge_tree::{RobustnessValue, UnionFind};
use crate::tracking::{Provenance, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Logistic steepness.
    pub k: f64,
    /// KDE bandwidth on the logistic scale.
    pub sigma: f64,
    pub grid_size: usize,
    /// Longest foreign run, in slice nodes, that may be bridged over.
    pub bridge_gap: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            k: 0.5,
            sigma: 0.2,
            grid_size: 512,
            bridge_gap: 2,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "k must be positive, got {}",
                self.k
            )));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must lie in (0, 1], got {}",
                self.sigma
            )));
        }
        if self.grid_size < 64 {
            return Err(Error::InvalidArgument(format!(
                "grid size must be at least 64, got {}",
                self.grid_size
            )));
        }
        Ok(())
    }
}

/// `2 / (1 + exp(-k * minR)) - 1`, with `Unbounded` mapped to 1.
pub fn logistic(min_r: RobustnessValue, k: f64) -> f64 {
    match min_r {
        RobustnessValue::Finite(x) => 2.0 / (1.0 + (-k * x).exp()) - 1.0,
        RobustnessValue::Unbounded => 1.0,
    }
}

/// Gaussian KDE of `values` on `grid_size` evenly spaced points over `[0, 1]`.
pub fn kde_density(values: &[f64], sigma: f64, grid_size: usize) -> Vec<f64> {
    let last = (grid_size - 1) as f64;
    (0..grid_size)
        .map(|i| {
            let x = i as f64 / last;
            values
                .iter()
                .map(|&v| {
                    let z = (x - v) / sigma;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect()
}

/// Grid positions of the density's interior strict local minima, with each
/// plateau represented by its leftmost point.
pub fn density_minima(density: &[f64]) -> Vec<f64> {
    let last = (density.len() - 1) as f64;
    let mut plateaus: Vec<(usize, f64)> = Vec::new();
    for (i, &d) in density.iter().enumerate() {
        if plateaus.last().is_none_or(|&(_, last)| last != d) {
            plateaus.push((i, d));
        }
    }
    plateaus
        .windows(3)
        .filter(|w| w[1].1 < w[0].1 && w[1].1 < w[2].1)
        .map(|w| w[1].0 as f64 / last)
        .collect()
}

/// Cluster label of each value: the index of the density valley interval it
/// falls in, compacted to `0..clusters` in ascending order.
pub fn kde_cluster(values: &[f64], config: &SegmentationConfig) -> Vec<usize> {
    let minima = density_minima(&kde_density(values, config.sigma, config.grid_size));
    let raw: Vec<usize> = values
        .iter()
        .map(|&v| minima.partition_point(|&m| m < v))
        .collect();
    let mut used = raw.clone();
    used.sort_unstable();
    used.dedup();
    raw.iter()
        .map(|r| used.binary_search(r).expect("label is used"))
        .collect()
}

/// Node groups of one trajectory: each entry lists node positions ascending.
fn segment_groups(traj: &Trajectory, config: &SegmentationConfig) -> Option<Vec<Vec<usize>>> {
    let annotated: Vec<usize> = (0..traj.nodes.len())
        .filter(|&i| traj.nodes[i].is_annotated())
        .collect();
    if annotated.is_empty() {
        return None;
    }
    let values: Vec<f64> = annotated
        .iter()
        .map(|&i| logistic(traj.nodes[i].min_r.expect("annotated"), config.k))
        .collect();
    let labels = kde_cluster(&values, config);

    // Runs of equal label over the annotated sequence.
    let mut run_of = vec![0; annotated.len()];
    let mut runs: Vec<(usize, usize)> = Vec::new(); // (label, annotated count)
    for (j, &label) in labels.iter().enumerate() {
        match runs.last_mut() {
            Some(last) if last.0 == label => last.1 += 1,
            _ => runs.push((label, 1)),
        }
        run_of[j] = runs.len() - 1;
    }
    let mut uf = UnionFind::new(runs.len());
    for i in 0..runs.len().saturating_sub(2) {
        if runs[i].0 == runs[i + 2].0 && runs[i + 1].1 <= config.bridge_gap {
            uf.union(i, i + 2);
        }
    }

    // Every node follows the annotated node nearest in time among the two
    // bracketing it, the earlier one on ties.
    let mut group_of_run: Vec<usize> = (0..runs.len()).map(|r| uf.find(r)).collect();
    let mut next = 0;
    let mut node_run = vec![0; traj.nodes.len()];
    for (i, slot) in node_run.iter_mut().enumerate() {
        while next < annotated.len() && annotated[next] < i {
            next += 1;
        }
        let j = if annotated.get(next) == Some(&i) {
            next
        } else {
            match (
                next.checked_sub(1),
                (next < annotated.len()).then_some(next),
            ) {
                (Some(b), Some(a)) => {
                    let t = traj.nodes[i].t;
                    let (tb, ta) = (traj.nodes[annotated[b]].t, traj.nodes[annotated[a]].t);
                    if (ta - t).abs() < (tb - t).abs() {
                        a
                    } else {
                        b
                    }
                }
                (Some(b), None) => b,
                (None, Some(a)) => a,
                (None, None) => unreachable!(),
            }
        };
        *slot = run_of[j];
    }

    // Groups ordered by their first node.
    let mut order: Vec<usize> = Vec::new();
    for &r in &node_run {
        let g = group_of_run[r];
        if !order.contains(&g) {
            order.push(g);
        }
    }
    for g in group_of_run.iter_mut() {
        *g = order.iter().position(|x| x == g).expect("group ordered");
    }
    let mut groups = vec![Vec::new(); order.len()];
    for (i, &r) in node_run.iter().enumerate() {
        groups[group_of_run[r]].push(i);
    }
    Some(groups)
}

fn ranges(indices: &[usize]) -> Vec<[usize; 2]> {
    let mut out: Vec<[usize; 2]> = Vec::new();
    for &i in indices {
        match out.last_mut() {
            Some(r) if r[1] + 1 == i => r[1] = i,
            _ => out.push([i, i]),
        }
    }
    out
}

fn build_pieces(traj: &Trajectory, groups: Vec<Vec<usize>>) -> Vec<Trajectory> {
    if groups.len() == 1 {
        return vec![traj.clone()];
    }
    groups
        .into_iter()
        .map(|group| {
            let source_indices: Vec<usize> = group.iter().map(|&i| traj.nodes[i].index).collect();
            Trajectory {
                id: traj.id,
                provenance: Provenance::Piece {
                    source: traj.id,
                    ranges: ranges(&source_indices),
                },
                closed: false,
                nodes: group
                    .iter()
                    .enumerate()
                    .map(|(index, &i)| {
                        let mut node = traj.nodes[i].clone();
                        node.index = index;
                        node
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Pieces of one trajectory. A trajectory that does not split is returned
/// unchanged; otherwise pieces are numbered from `*next_id` upward.
pub fn segment_trajectory(
    traj: &Trajectory,
    config: &SegmentationConfig,
    next_id: &mut usize,
) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let mut pieces = match segment_groups(traj, config) {
        Some(groups) => build_pieces(traj, groups),
        None => {
            warn!(
                "trajectory {} has no annotated nodes; left unchanged",
                traj.id
            );
            vec![traj.clone()]
        }
    };
    number_pieces(&mut pieces, next_id);
    Ok(pieces)
}

fn number_pieces(pieces: &mut [Trajectory], next_id: &mut usize) {
    if pieces.len() > 1 {
        for piece in pieces {
            piece.id = *next_id;
            *next_id += 1;
        }
    }
}

/// Segments every trajectory. New pieces get ids above the largest input id.
pub fn segment_all(trajs: &[Trajectory], config: &SegmentationConfig) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let pieces: Vec<Vec<Trajectory>> = trajs
        .par_iter()
        .map(|traj| match segment_groups(traj, config) {
            Some(groups) => build_pieces(traj, groups),
            None => {
                warn!(
                    "trajectory {} has no annotated nodes; left unchanged",
                    traj.id
                );
                vec![traj.clone()]
            }
        })
        .collect();
    let mut next_id = trajs.iter().map(|t| t.id + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    for mut group in pieces {
        number_pieces(&mut group, &mut next_id);
        out.extend(group);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracking::TrajectoryNode;

    /// Robustness whose logistic value is `l` at `k`.
    fn inverse(l: f64, k: f64) -> RobustnessValue {
        RobustnessValue::Finite(-((2.0 / (l + 1.0)) - 1.0).ln() / k)
    }

    fn series_trajectory(ls: &[f64], k: f64) -> Trajectory {
        Trajectory {
            id: 0,
            provenance: Provenance::original(),
            closed: false,
            nodes: ls
                .iter()
                .enumerate()
                .map(|(i, &l)| TrajectoryNode {
                    index: i,
                    x: 0.0,
                    y: 0.0,
                    t: i as f64,
                    slice: Some(i),
                    cp_id: Some(0),
                    degree: Some(1),
                    min_r: Some(inverse(l, k)),
                })
                .collect(),
        }
    }

    fn dip_series() -> Vec<f64> {
        [(0.9, 14), (0.1, 2), (0.9, 15), (0.1, 9)]
            .iter()
            .flat_map(|&(l, n)| std::iter::repeat_n(l, n))
            .collect()
    }

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(RobustnessValue::Finite(0.0), 0.5), 0.0);
        assert_eq!(logistic(RobustnessValue::Unbounded, 0.5), 1.0);
        assert!((logistic(RobustnessValue::Finite(1.0), 0.5) - 0.244919).abs() < 1e-6);
        assert!((logistic(inverse(0.3, 2.0), 2.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn two_modes() {
        let mut values = vec![0.1; 20];
        values.extend([0.9; 20]);
        let config = SegmentationConfig::default();
        let labels = kde_cluster(&values, &config);
        assert_eq!(&labels[..20], &[0; 20]);
        assert_eq!(&labels[20..], &[1; 20]);
        let wide = SegmentationConfig {
            sigma: 0.45,
            ..config
        };
        assert!(kde_cluster(&values, &wide).iter().all(|&l| l == 0));
        assert!(kde_cluster(&[0.4; 7], &config).iter().all(|&l| l == 0));
    }

    #[test]
    fn plateau_minimum_uses_leftmost_point() {
        let d = [3.0, 1.0, 1.0, 1.0, 2.0, 0.5, 4.0];
        assert_eq!(density_minima(&d), vec![1.0 / 6.0, 5.0 / 6.0]);
    }

    #[test]
    fn dip_series_pieces() {
        let traj = series_trajectory(&dip_series(), 0.5);
        let mut next = 1;
        let pieces = segment_trajectory(&traj, &SegmentationConfig::default(), &mut next).unwrap();
        assert_eq!(pieces.len(), 3);
        let ranges: Vec<_> = pieces
            .iter()
            .map(|p| match &p.provenance {
                Provenance::Piece { ranges, .. } => ranges.clone(),
                _ => panic!(),
            })
            .collect();
        assert_eq!(ranges[0], vec![[0, 13], [16, 30]]);
        assert_eq!(ranges[1], vec![[14, 15]]);
        assert_eq!(ranges[2], vec![[31, 39]]);
        assert_eq!(pieces.iter().map(|p| p.id).collect::<Vec<_>>(), [1, 2, 3]);

        let strict = SegmentationConfig {
            bridge_gap: 0,
            ..Default::default()
        };
        assert_eq!(
            segment_trajectory(&traj, &strict, &mut next).unwrap().len(),
            4
        );
    }

    #[test]
    fn uniform_series_is_identity() {
        let traj = series_trajectory(&[0.7; 12], 0.5);
        let out = segment_all(std::slice::from_ref(&traj), &SegmentationConfig::default()).unwrap();
        assert_eq!(out, vec![traj]);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SegmentationConfig {
            sigma: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
