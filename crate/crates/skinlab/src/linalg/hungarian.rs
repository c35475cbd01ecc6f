//! Matching two point sets in the complex plane one-to-one.

use num_complex::Complex64 as C64;

/// Minimum-cost perfect assignment on a square cost matrix (row-major).
/// Returns `assign[row] = col`. O(n³) shortest augmenting paths.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `pairs[i]` is the index in `b` matched to `a[i]`.
    pub pairs: Vec<usize>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    pub used_assignment: bool,
}

/// Nearest-neighbour matching; if two points of `a` claim the same point of
/// `b`, the whole problem is re-solved as a minimum-total-distance assignment.
pub fn match_points(a: &[C64], b: &[C64]) -> Matching {
    assert_eq!(a.len(), b.len(), "point sets must have equal size");
    let n = a.len();
    let nearest: Vec<usize> = a
        .iter()
        .map(|x| {
            (0..n)
                .min_by(|&i, &j| (b[i] - x).norm().total_cmp(&(b[j] - x).norm()))
                .unwrap_or(0)
        })
        .collect();
    let mut seen = vec![false; n];
    let injective = nearest
        .iter()
        .all(|&j| !std::mem::replace(&mut seen[j], true));
    let (pairs, used) = if injective {
        (nearest, false)
    } else {
        let cost: Vec<f64> = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| (y - x).norm()))
            .collect();
        (hungarian(&cost, n), true)
    };
    let distances: Vec<f64> = pairs
        .iter()
        .enumerate()
        .map(|(i, &j)| (a[i] - b[j]).norm())
        .collect();
    let max_distance = distances.iter().cloned().fold(0.0, f64::max);
    Matching {
        pairs,
        distances,
        max_distance,
        used_assignment: used,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &[f64], n: usize) -> f64 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        fn rec(k: usize, perm: &mut Vec<usize>, cost: &[f64], n: usize, best: &mut f64) {
            if k == n {
                *best = best.min((0..n).map(|i| cost[i * n + perm[i]]).sum());
                return;
            }
            for i in k..n {
                perm.swap(k, i);
                rec(k + 1, perm, cost, n, best);
                perm.swap(k, i);
            }
        }
        rec(0, &mut perm, cost, n, &mut best);
        best
    }

    #[test]
    fn hungarian_is_optimal_on_small_cases() {
        let mut x = 12345u64;
        for n in 1..=6 {
            let cost: Vec<f64> = (0..n * n)
                .map(|_| {
                    x = x.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (x >> 40) as f64 / 1e3
                })
                .collect();
            let a = hungarian(&cost, n);
            let mut s = a.clone();
            s.sort();
            assert_eq!(s, (0..n).collect::<Vec<_>>());
            let total: f64 = (0..n).map(|i| cost[i * n + a[i]]).sum();
            assert!((total - brute(&cost, n)).abs() < 1e-9);
        }
    }

    #[test]
    fn collision_triggers_assignment() {
        let a = [C64::new(0.0, 0.0), C64::new(0.1, 0.0)];
        let b = [C64::new(0.05, 0.0), C64::new(5.0, 0.0)];
        let m = match_points(&a, &b);
        assert!(m.used_assignment);
        let mut p = m.pairs.clone();
        p.sort();
        assert_eq!(p, vec![0, 1]);
    }

    #[test]
    fn permutation_is_recovered() {
        let a: Vec<C64> = (0..8).map(|i| C64::new(i as f64, -(i as f64))).collect();
        let b: Vec<C64> = a.iter().rev().map(|z| z + C64::new(1e-3, 0.0)).collect();
        let m = match_points(&a, &b);
        assert!(!m.used_assignment);
        assert!((m.max_distance - 1e-3).abs() < 1e-12);
        assert_eq!(m.pairs[0], 7);
    }
}
