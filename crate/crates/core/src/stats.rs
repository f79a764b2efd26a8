//! Small statistics helpers shared by the limit models and experiment
//! aggregations: means, population standard deviation, RMSE, tied ranks and
//! Spearman correlation.

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by n, not n-1), so a single
/// observation has spread 0 rather than NaN.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Root mean square error between two equal-length slices.
///
/// # Panics
/// Panics if the slices differ in length.
pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rmse over mismatched lengths");
    if a.is_empty() {
        return 0.0;
    }
    let ss = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>();
    (ss / a.len() as f64).sqrt()
}

/// Fractional ranks (1-based) with ties receiving the average of the ranks
/// they span, the convention Spearman correlation expects.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j share the value; average rank of (i+1)..=(j+1)
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation coefficient. Returns `None` when fewer than two
/// points are given or either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson over mismatched lengths");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Spearman rank correlation with average ranks on ties. `None` when
/// undefined (fewer than two pairs, or a constant vector).
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "spearman over mismatched lengths");
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    pearson(&rx, &ry)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_handle_ties() {
        assert_eq!(average_ranks(&[2.0, 4.0, 4.0]), vec![1.0, 2.5, 2.5]);
        assert_eq!(average_ranks(&[7.0, 7.0, 7.0]), vec![2.0, 2.0, 2.0]);
        assert!(average_ranks(&[]).is_empty());
    }

    #[test]
    fn spearman_worked_example() {
        // loss rounds {2,4,4} vs {1,3,2}
        let rho = spearman(&[2.0, 4.0, 4.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((rho - 0.8660254037844387).abs() < 1e-12);
    }

    #[test]
    fn spearman_perfect_and_reversed() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        let r = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_undefined_cases() {
        assert_eq!(spearman(&[1.0], &[2.0]), None);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn spearman_matches_naive_oracle_with_ties() {
        // oracle: quadratic-time rank assignment, then textbook Pearson
        fn naive_ranks(xs: &[f64]) -> Vec<f64> {
            xs.iter()
                .map(|&v| {
                    let less = xs.iter().filter(|&&w| w < v).count() as f64;
                    let equal = xs.iter().filter(|&&w| w == v).count() as f64;
                    less + (equal + 1.0) / 2.0
                })
                .collect()
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(404);
        for _ in 0..200 {
            let n = rng.random_range(2..40);
            // coarse integer values force plenty of ties
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
            let ours = spearman(&x, &y);
            let oracle = pearson(&naive_ranks(&x), &naive_ranks(&y));
            match (ours, oracle) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{a} vs {b}"),
                (a, b) => assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn rmse_symmetric() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 2.0, 5.0];
        assert_eq!(rmse(&a, &b), rmse(&b, &a));
    }
}
