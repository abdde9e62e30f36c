/// Optimal assignment of every row to a distinct column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub cost: i64,
    /// Column chosen for each row.
    pub columns: Vec<usize>,
}

/// Minimum-cost assignment for an `n × m` matrix with `n ≤ m`, by shortest augmenting
/// paths with potentials. Returns `None` when there are more rows than columns.
pub fn min_cost_assignment(cost: &[Vec<i64>]) -> Option<Assignment> {
    let n = cost.len();
    if n == 0 {
        return Some(Assignment { cost: 0, columns: Vec::new() });
    }
    let m = cost[0].len();
    if n > m {
        return None;
    }
    const INF: i64 = i64::MAX / 4;
    // 1-based; column 0 is the virtual source.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut columns = vec![0usize; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            columns[row_of[j] - 1] = j - 1;
        }
    }
    let cost = columns.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Some(Assignment { cost, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(c: &[Vec<i64>]) -> i64 {
        fn go(c: &[Vec<i64>], i: usize, used: &mut Vec<bool>) -> i64 {
            if i == c.len() {
                return 0;
            }
            let mut best = i64::MAX;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(c[i][j] + go(c, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(c, 0, &mut vec![false; c[0].len()])
    }

    #[test]
    fn square() {
        let c = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = min_cost_assignment(&c).unwrap();
        assert_eq!(a.cost, 5);
        assert_eq!(a.cost, brute(&c));
    }

    #[test]
    fn rectangular_and_degenerate() {
        let c = vec![vec![7, 3, 9, 1], vec![2, 8, 4, 1]];
        assert_eq!(min_cost_assignment(&c).unwrap().cost, 3);
        assert!(min_cost_assignment(&[vec![1], vec![2]]).is_none());
        assert_eq!(min_cost_assignment(&[]).unwrap().cost, 0);
    }

    #[test]
    fn pseudo_random_against_brute_force() {
        let mut x: u64 = 0x9e3779b97f4a7c15;
        for _ in 0..200 {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let n = 1 + (x % 4) as usize;
            let m = n + ((x >> 8) % 3) as usize;
            let c: Vec<Vec<i64>> =
                (0..n).map(|i| (0..m).map(|j| ((x >> ((i * m + j) % 50)) % 20) as i64).collect()).collect();
            let a = min_cost_assignment(&c).unwrap();
            assert_eq!(a.cost, brute(&c));
            let mut cols = a.columns.clone();
            cols.sort();
            cols.dedup();
            assert_eq!(cols.len(), n);
        }
    }
}
