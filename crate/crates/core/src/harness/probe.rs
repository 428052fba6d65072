//! Distortion study over random logits matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::logits::LogitsMatrix;
use crate::projection::{distortion_with, ProjectionPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JlRow {
    pub d1: usize,
    pub d2: usize,
    /// Mean over seeds of the per-seed median pairwise distortion.
    pub median_distortion: f64,
    /// Mean over seeds of the per-seed maximum.
    pub mean_max_distortion: f64,
    pub worst_max_distortion: f64,
    /// Seeds whose maximum distortion stayed within `threshold`.
    pub seeds_within: usize,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JlStudy {
    pub rows: usize,
    pub cols: usize,
    pub points: usize,
    pub seeds: u64,
    /// Offset so different studies draw different point sets.
    pub point_seed: u64,
    pub threshold: f64,
}

impl Default for JlStudy {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 128,
            points: 32,
            seeds: 20,
            point_seed: 1000,
            threshold: 0.5,
        }
    }
}

impl JlStudy {
    /// Uniform `[-1, 1)` point set for one seed.
    pub fn points_for(&self, seed: u64) -> Vec<LogitsMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.point_seed + seed);
        (0..self.points)
            .map(|_| {
                let data = (0..self.rows * self.cols).map(|_| rng.random_range(-1.0..1.0)).collect();
                LogitsMatrix::from_dense(self.rows, self.cols, data).expect("finite by construction")
            })
            .collect()
    }

    /// One row per `(d1, d2)`; the projection for seed `s` uses seed `s`.
    pub fn run(&self, dims: &[(usize, usize)]) -> Result<Vec<JlRow>> {
        let point_sets: Vec<_> = (0..self.seeds).map(|s| self.points_for(s)).collect();
        dims.iter()
            .map(|&(d1, d2)| {
                let mut row = JlRow {
                    d1,
                    d2,
                    median_distortion: 0.0,
                    mean_max_distortion: 0.0,
                    worst_max_distortion: 0.0,
                    seeds_within: 0,
                    seeds: self.seeds as usize,
                };
                for (seed, points) in point_sets.iter().enumerate() {
                    let pair = ProjectionPair::build(self.cols, self.rows, d1, d2, seed as u64)?;
                    let r = distortion_with(points, &pair)?;
                    row.median_distortion += r.median_distortion;
                    row.mean_max_distortion += r.max_distortion;
                    row.worst_max_distortion = row.worst_max_distortion.max(r.max_distortion);
                    if r.max_distortion <= self.threshold {
                        row.seeds_within += 1;
                    }
                }
                row.median_distortion /= self.seeds as f64;
                row.mean_max_distortion /= self.seeds as f64;
                Ok(row)
            })
            .collect()
    }
}

pub fn jl_table(rows: &[JlRow]) -> String {
    let mut s = format!(
        "{:>5} {:>5} {:>6} {:>10} {:>10} {:>10} {:>8}\n",
        "d1", "d2", "d", "median", "mean max", "worst max", "within"
    );
    for r in rows {
        s += &format!(
            "{:>5} {:>5} {:>6} {:>10.5} {:>10.5} {:>10.5} {:>5}/{}\n",
            r.d1,
            r.d2,
            r.d1 * r.d2,
            r.median_distortion,
            r.mean_max_distortion,
            r.worst_max_distortion,
            r.seeds_within,
            r.seeds
        );
    }
    s
}
