//! Lloyd's k-means over Euclidean distance, plus the Davies-Bouldin index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each assignment step; never
    /// increases across iterations.
    pub objective_trace: Vec<f64>,
}

const MAX_ITERATIONS: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Within-cluster sum of squares for a given partition.
pub fn wcss(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Seeded Lloyd iterations: initial centroids are k distinct points chosen by
/// a deterministic RNG; assignment ties go to the lowest cluster index; a
/// cluster that loses all members keeps its previous centroid. Runs until the
/// assignment reaches a fixpoint or 300 iterations.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::domain(format!(
            "k = {k} out of range 1..={}",
            points.len()
        )));
    }
    let dims = points[0].len();
    if points.iter().any(|p| p.len() != dims) {
        return Err(Error::domain("points have inconsistent dimensions"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Prefer value-distinct starting points; duplicates would start clusters
    // on top of each other and leave some empty.
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    let pool: Vec<&Vec<f64>> = if distinct.len() >= k {
        distinct
    } else {
        points.iter().collect()
    };
    let mut centroids: Vec<Vec<f64>> = rand::seq::index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();

    let mut assignments: Vec<usize> = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let new_assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        trace.push(wcss(points, &new_assignments, &centroids));
        let converged = new_assignments == assignments;
        assignments = new_assignments;
        if converged {
            break;
        }

        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (sum, count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if *count > 0 {
                *c = sum.iter().map(|s| s / *count as f64).collect();
            }
        }
    }

    Ok(KMeansResult {
        assignments,
        centroids,
        iterations,
        objective_trace: trace,
    })
}

/// Davies-Bouldin index of a partition: the mean over clusters of the worst
/// (scatter_i + scatter_j) / centroid-distance ratio. Needs at least two
/// clusters, each non-empty. Coinciding centroids with positive scatter give
/// an infinite index.
pub fn dbi(points: &[Vec<f64>], assignments: &[usize], k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain(
            "Davies-Bouldin index needs at least 2 clusters",
        ));
    }
    if points.len() != assignments.len() {
        return Err(Error::domain("assignment length mismatch"));
    }
    let dims = points.first().map(|p| p.len()).unwrap_or(0);

    let mut counts = vec![0usize; k];
    let mut centroids = vec![vec![0.0; dims]; k];
    for (p, &a) in points.iter().zip(assignments) {
        if a >= k {
            return Err(Error::domain(format!("assignment {a} out of range")));
        }
        counts[a] += 1;
        for (c, v) in centroids[a].iter_mut().zip(p) {
            *c += v;
        }
    }
    if counts.contains(&0) {
        return Err(Error::domain("every cluster must be non-empty"));
    }
    for (c, &count) in centroids.iter_mut().zip(&counts) {
        for v in c.iter_mut() {
            *v /= count as f64;
        }
    }

    let scatter: Vec<f64> = (0..k)
        .map(|i| {
            let total: f64 = points
                .iter()
                .zip(assignments)
                .filter(|(_, &a)| a == i)
                .map(|(p, _)| sq_dist(p, &centroids[i]).sqrt())
                .sum();
            total / counts[i] as f64
        })
        .collect();

    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = sq_dist(&centroids[i], &centroids[j]).sqrt();
            let s = scatter[i] + scatter[j];
            let ratio = if d > 0.0 {
                s / d
            } else if s == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / k as f64)
}
