//! Maximum-weight bipartite assignment (Hungarian method with potentials).

/// Result of the square minimum-cost solve.
struct Solved {
    /// `row_to_col[i]` is the column matched to row `i`.
    row_to_col: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// O(n^3) shortest-augmenting-path Hungarian algorithm on a square matrix.
/// On return `u[i] + v[j] <= cost[i][j]` for all cells with equality on the
/// matched ones (complementary slackness).
fn solve_min_cost(cost: &[Vec<f64>]) -> Solved {
    let n = cost.len();
    // 1-based internals; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
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
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            row_to_col[col_owner[j] - 1] = j - 1;
        }
    }
    Solved {
        row_to_col,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

fn square_costs(weights: &[Vec<f64>], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let n = rows.max(cols);
    let mut cost = vec![vec![0.0; n]; n];
    for (i, row) in weights.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            cost[i][j] = -w;
        }
    }
    cost
}

fn real_pairs(row_to_col: &[usize], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    row_to_col
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < rows && j < cols)
        .map(|(i, &j)| (i, j))
        .collect()
}

fn dims(weights: &[Vec<f64>]) -> (usize, usize) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    assert!(
        weights.iter().all(|r| r.len() == cols),
        "weight matrix rows must have equal length"
    );
    (rows, cols)
}

/// One-to-one assignment of rows to columns maximizing the summed weight.
/// Every row (or every column, whichever side is smaller) is matched.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let (rows, cols) = dims(weights);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let solved = solve_min_cost(&square_costs(weights, rows, cols));
    real_pairs(&solved.row_to_col, rows, cols)
}

/// Maximizes `primary`; among all primary-optimal assignments, maximizes
/// `secondary`. Both matrices share a shape.
///
/// Optimal assignments are exactly the perfect matchings on edges with zero
/// reduced cost under the first solve's potentials, so the second solve is
/// restricted to those edges.
pub fn lexicographic_assignment(
    primary: &[Vec<f64>],
    secondary: &[Vec<f64>],
) -> Vec<(usize, usize)> {
    const TIGHT: f64 = 1e-9;

    let (rows, cols) = dims(primary);
    assert_eq!(dims(secondary), (rows, cols), "matrix shapes differ");
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let cost = square_costs(primary, rows, cols);
    let first = solve_min_cost(&cost);
    let n = cost.len();

    let sec_max = secondary
        .iter()
        .flatten()
        .fold(0.0f64, |m, &s| m.max(s.abs()));
    let forbidden = 1e3 * (n as f64) * (sec_max + 1.0);
    let mut cost2 = vec![vec![forbidden; n]; n];
    for i in 0..n {
        for j in 0..n {
            if cost[i][j] - first.u[i] - first.v[j] <= TIGHT {
                cost2[i][j] = if i < rows && j < cols {
                    -secondary[i][j]
                } else {
                    0.0
                };
            }
        }
    }
    let second = solve_min_cost(&cost2);

    let total = |r2c: &[usize]| -> f64 { (0..n).map(|i| cost[i][r2c[i]]).sum() };
    let uses_only_tight = (0..n).all(|i| cost2[i][second.row_to_col[i]] < forbidden);
    let chosen = if uses_only_tight
        && (total(&second.row_to_col) - total(&first.row_to_col)).abs() <= TIGHT * n as f64
    {
        &second.row_to_col
    } else {
        &first.row_to_col
    };
    real_pairs(chosen, rows, cols)
}
