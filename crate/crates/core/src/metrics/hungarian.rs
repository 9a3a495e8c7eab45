/// Maximum-weight assignment on a rectangular weight matrix.
///
/// Returns, for each row, the matched column (or `None` when there are more
/// rows than columns). Shortest augmenting paths with potentials, `O(n³)`
/// on the padded square matrix.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let top = weights.iter().flatten().copied().fold(0.0, f64::max);
    // Minimise (top − w); padding cells cost `top` (weight 0).
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            top - weights[i][j]
        } else {
            top
        }
    };

    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    for (j, &i) in owner.iter().enumerate().skip(1) {
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(w: &[Vec<f64>], a: &[Option<usize>]) -> f64 {
        a.iter().enumerate().filter_map(|(i, j)| j.map(|j| w[i][j])).sum()
    }

    #[test]
    fn picks_the_heavier_diagonal() {
        let w = vec![vec![1.0, 3.0], vec![3.0, 1.0]];
        let a = max_weight_assignment(&w);
        assert_eq!(a, vec![Some(1), Some(0)]);
    }

    #[test]
    fn rectangular() {
        let w = vec![vec![5.0, 1.0, 2.0]];
        assert_eq!(max_weight_assignment(&w), vec![Some(0)]);
        let w = vec![vec![1.0], vec![4.0], vec![2.0]];
        let a = max_weight_assignment(&w);
        assert_eq!(total(&w, &a), 4.0);
        assert_eq!(a.iter().flatten().count(), 1);
    }

    #[test]
    fn greedy_would_fail_here() {
        let w = vec![vec![10.0, 9.0], vec![9.0, 0.0]];
        assert_eq!(total(&w, &max_weight_assignment(&w)), 18.0);
    }
}
