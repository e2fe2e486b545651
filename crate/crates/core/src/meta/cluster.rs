use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

pub const KMEANS_MAX_ITER: usize = 300;
const SHIFT_MAX_ITER: usize = 500;

#[inline]
fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Half the median pairwise distance. Falls back to half the largest
/// distance, then to 1, when the points are mostly or fully coincident.
pub fn default_bandwidth(points: &[Point]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for (i, &a) in points.iter().enumerate() {
        for &b in &points[i + 1..] {
            d.push(dist2(a, b).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if median > 0.0 {
        0.5 * median
    } else if d[m - 1] > 0.0 {
        0.5 * d[m - 1]
    } else {
        1.0
    }
}

/// Flat-kernel mean shift. Every point climbs to its mode; modes closer
/// than `bandwidth / 2` are merged, the mode reached by more points
/// winning. Centers come back sorted lexicographically.
pub fn mean_shift(points: &[Point], bandwidth: f64) -> Result<Vec<Point>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("mean-shift points"));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let bw2 = bandwidth * bandwidth;
    let tol2 = (1e-9 * bandwidth).powi(2);
    let modes: Vec<Point> = points
        .iter()
        .map(|&start| {
            let mut x = start;
            for _ in 0..SHIFT_MAX_ITER {
                // offsets from x keep coincident points exact
                let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
                for &p in points {
                    if dist2(p, x) <= bw2 {
                        sx += p[0] - x[0];
                        sy += p[1] - x[1];
                        n += 1;
                    }
                }
                let next = if n == 0 { x } else { [x[0] + sx / n as f64, x[1] + sy / n as f64] };
                let moved = dist2(next, x);
                x = next;
                if moved <= tol2 {
                    break;
                }
            }
            x
        })
        .collect();

    // group identical modes, count support
    let merge2 = (0.5 * bandwidth).powi(2);
    let mut distinct: Vec<(Point, usize)> = Vec::new();
    for m in modes {
        match distinct.iter_mut().find(|(c, _)| dist2(*c, m) <= tol2.max(1e-24)) {
            Some((_, n)) => *n += 1,
            None => distinct.push((m, 1)),
        }
    }
    distinct.sort_by(|a, b| b.1.cmp(&a.1).then(a.0[0].total_cmp(&b.0[0])).then(a.0[1].total_cmp(&b.0[1])));
    let mut centers: Vec<Point> = Vec::new();
    for (m, _) in distinct {
        if centers.iter().all(|&c| dist2(c, m) >= merge2) {
            centers.push(m);
        }
    }
    centers.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(centers)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Point>,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after every Lloyd iteration.
    pub sse_history: Vec<f64>,
}

fn nearest(centers: &[Point], p: Point) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, &c) in centers.iter().enumerate() {
        let d = dist2(c, p);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn kmeans_pp(points: &[Point], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut centers = vec![points[rng.gen_range(0..points.len())]];
    let mut d: Vec<f64> = points.iter().map(|&p| dist2(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[idx];
        centers.push(c);
        for (di, &p) in d.iter_mut().zip(points) {
            *di = di.min(dist2(p, c));
        }
    }
    centers
}

/// Lloyd's algorithm from a seeded k-means++ start.
pub fn k_means(points: &[Point], k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::ClusterCount { k, points: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp(points, k, &mut rng);
    let mut assignment: Vec<usize> = points.iter().map(|&p| nearest(&centers, p).0).collect();
    let mut sse_history = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let mut sums = vec![[0.0, 0.0, 0.0]; k];
        for (&a, &p) in assignment.iter().zip(points) {
            sums[a][0] += p[0] - centers[a][0];
            sums[a][1] += p[1] - centers[a][1];
            sums[a][2] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                *c = [c[0] + s[0] / s[2], c[1] + s[1] / s[2]];
            }
        }
        // an empty cluster takes over the point worst served by its center
        for c in 0..k {
            if sums[c][2] == 0.0 {
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        let di = dist2(points[i], centers[assignment[i]]);
                        let dj = dist2(points[j], centers[assignment[j]]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    })
                    .expect("points are non-empty");
                centers[c] = points[far];
                assignment[far] = c;
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(&centers, p).0).collect();
        sse_history.push(points.iter().zip(&next).map(|(&p, &a)| dist2(p, centers[a])).sum());
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(KMeansResult {
        centers,
        assignment,
        sse_history,
    })
}

/// Mean shift to find the number of modes, then k-means with that many
/// clusters.
pub fn cluster(points: &[Point], bandwidth: Option<f64>, seed: u64) -> Result<Vec<Point>> {
    let bw = bandwidth.unwrap_or_else(|| default_bandwidth(points));
    let modes = mean_shift(points, bw)?;
    let mut centers = k_means(points, modes.len(), seed)?.centers;
    centers.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(centers)
}

#[cfg(test)]
pub(crate) mod tests {
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    use super::*;

    /// Box-Muller normal.
    pub(crate) fn gaussian(rng: &mut impl Rng) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub(crate) fn blobs(means: &[Point], per: usize, sigma: f64, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        means
            .iter()
            .flat_map(|m| (0..per).map(|_| [m[0] + sigma * gaussian(&mut rng), m[1] + sigma * gaussian(&mut rng)]).collect::<Vec<_>>())
            .collect()
    }

    fn blob_means(pts: &[Point], per: usize) -> Vec<Point> {
        pts.chunks(per)
            .map(|c| {
                let n = c.len() as f64;
                [c.iter().map(|p| p[0]).sum::<f64>() / n, c.iter().map(|p| p[1]).sum::<f64>() / n]
            })
            .collect()
    }

    #[test]
    fn identical_points_give_one_center() {
        let pts = vec![[0.3, -0.2]; 7];
        assert_eq!(mean_shift(&pts, 0.1).unwrap(), vec![[0.3, -0.2]]);
        assert_eq!(cluster(&pts, None, 1).unwrap(), vec![[0.3, -0.2]]);
        assert!(mean_shift(&[], 1.0).is_err());
        assert!(mean_shift(&pts, 0.0).is_err());
    }

    #[test]
    fn two_tight_blobs() {
        let bw = 0.2;
        let pts = blobs(&[[0.0, 0.0], [2.0, 0.5]], 30, 0.005, 3);
        let means = blob_means(&pts, 30);
        let c = mean_shift(&pts, bw).unwrap();
        assert_eq!(c.len(), 2);
        for (a, b) in c.iter().zip(&means) {
            assert!(dist2(*a, *b).sqrt() < 0.1 * bw);
        }
        let km = k_means(&pts, 2, 9).unwrap();
        let mut kc = km.centers.clone();
        kc.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for (a, b) in kc.iter().zip(&means) {
            assert!(dist2(*a, *b).sqrt() < 1e-9);
        }
    }

    #[test]
    fn k_equal_to_point_count_is_exact() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [5.0, 5.0]];
        let r = k_means(&pts, 4, 2).unwrap();
        assert_eq!(*r.sse_history.last().unwrap(), 0.0);
        let mut c = r.centers.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        assert_eq!(c, vec![[0.0, 0.0], [0.0, 3.0], [1.0, 0.0], [5.0, 5.0]]);
        assert!(k_means(&pts, 5, 0).is_err());
        assert!(k_means(&pts, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn sse_never_increases(seed in 0u64..200, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point> = (0..40).map(|_| [rng.gen(), rng.gen()]).collect();
            let r = k_means(&pts, k, seed).unwrap();
            for w in r.sse_history.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn mean_shift_is_translation_equivariant(dx in -5.0f64..5.0, dy in -5.0f64..5.0, seed in 0u64..50) {
            let pts = blobs(&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]], 10, 0.02, seed);
            let moved: Vec<Point> = pts.iter().map(|p| [p[0] + dx, p[1] + dy]).collect();
            let a = mean_shift(&pts, 0.4).unwrap();
            let b = mean_shift(&moved, 0.4).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p[0] + dx - q[0]).abs() < 1e-9 && (p[1] + dy - q[1]).abs() < 1e-9);
            }
        }
    }
}
