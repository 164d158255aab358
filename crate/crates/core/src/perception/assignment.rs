//! Rectangular linear assignment (Hungarian method with potentials).

/// Minimum-cost assignment on an `n × m` cost matrix given row-major.
/// Every row is matched when `n <= m`, every column otherwise. Returns
/// `(row, col)` pairs sorted by row. Costs must be finite.
pub fn min_cost_assignment(costs: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = costs.len();
    if n == 0 {
        return Vec::new();
    }
    let m = costs[0].len();
    if m == 0 {
        return Vec::new();
    }
    assert!(costs.iter().all(|r| r.len() == m), "cost matrix must be rectangular");
    assert!(
        costs.iter().flatten().all(|c| c.is_finite()),
        "costs must be finite"
    );
    if n > m {
        let transposed: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| costs[i][j]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = solve(&transposed).into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        return pairs;
    }
    solve(costs)
}

// n <= m. 1-based potentials formulation; column 0 is a sentinel.
fn solve(a: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = a.len();
    let m = a[0].len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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
    let mut pairs: Vec<(usize, usize)> = (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}
