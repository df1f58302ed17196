//! Geometric nested dissection for matrices whose unknowns carry coordinates.

use super::CsrMatrix;

/// Sets at or below this size are ordered as they come.
const LEAF: usize = 64;
/// Cut candidates tried per bisection, taken from the middle of the sorted coordinates.
const CANDIDATES: usize = 12;

/// Elimination order (`order[new] = old`) from recursive coordinate bisection.
///
/// Each set is cut by a plane normal to its longest axis; the separator is the
/// part of the upper side that is coupled to the lower side in the matrix
/// graph, so any cut yields a valid separator. Separators are numbered after
/// both halves. Among a few cut positions near the median the one with the
/// smallest separator wins.
pub fn nested_dissection(a: &CsrMatrix, points: &[[f64; 3]]) -> Vec<usize> {
    let n = a.nrows();
    assert_eq!(points.len(), n);
    let mut order = Vec::with_capacity(n);
    let mut mark = vec![0u32; n];
    let mut stamp = 0u32;
    let mut stack: Vec<(Vec<usize>, bool)> = vec![((0..n).collect(), false)];
    // a separator is pushed below its two halves so it is numbered after them
    while let Some((set, finished)) = stack.pop() {
        if finished || set.len() <= LEAF {
            order.extend_from_slice(&set);
            continue;
        }
        match bisect(a, points, &set, &mut mark, &mut stamp) {
            Some((lower, upper, sep)) => {
                stack.push((sep, true));
                stack.push((upper, false));
                stack.push((lower, false));
            }
            None => order.extend_from_slice(&set),
        }
    }
    debug_assert_eq!(order.len(), n);
    order
}

type Split = (Vec<usize>, Vec<usize>, Vec<usize>);

fn bisect(
    a: &CsrMatrix,
    points: &[[f64; 3]],
    set: &[usize],
    mark: &mut [u32],
    stamp: &mut u32,
) -> Option<Split> {
    let axis = (0..3)
        .max_by(|&p, &q| extent(points, set, p).total_cmp(&extent(points, set, q)))
        .expect("three axes");
    let mut coords: Vec<f64> = set.iter().map(|&i| points[i][axis]).collect();
    coords.sort_by(f64::total_cmp);
    let lo = coords.len() * 2 / 5;
    let hi = coords.len() * 3 / 5;
    let mut cuts: Vec<f64> = coords[lo..=hi].to_vec();
    cuts.dedup();
    if cuts.len() > CANDIDATES {
        let step = cuts.len() as f64 / CANDIDATES as f64;
        cuts = (0..CANDIDATES)
            .map(|i| cuts[(i as f64 * step) as usize])
            .collect();
    }

    let mut best: Option<(usize, f64)> = None;
    for &c in &cuts {
        let size = separator(a, points, set, axis, c, mark, stamp).len();
        if best.is_none_or(|(s, _)| size < s) {
            best = Some((size, c));
        }
    }
    let (_, c) = best?;
    let sep = separator(a, points, set, axis, c, mark, stamp);
    *stamp += 1;
    for &i in &sep {
        mark[i] = *stamp;
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &i in set {
        if mark[i] == *stamp {
            continue;
        }
        if points[i][axis] < c {
            lower.push(i);
        } else {
            upper.push(i);
        }
    }
    if lower.is_empty() || upper.is_empty() {
        return None;
    }
    Some((lower, upper, sep))
}

fn extent(points: &[[f64; 3]], set: &[usize], axis: usize) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in set {
        lo = lo.min(points[i][axis]);
        hi = hi.max(points[i][axis]);
    }
    hi - lo
}

/// Members of `set` at or above `c` that couple to a member below `c`.
fn separator(
    a: &CsrMatrix,
    points: &[[f64; 3]],
    set: &[usize],
    axis: usize,
    c: f64,
    mark: &mut [u32],
    stamp: &mut u32,
) -> Vec<usize> {
    *stamp += 1;
    for &i in set {
        if points[i][axis] < c {
            mark[i] = *stamp;
        }
    }
    set.iter()
        .copied()
        .filter(|&i| {
            points[i][axis] >= c
                && a.col_idx()[a.row_ptr()[i]..a.row_ptr()[i + 1]]
                    .iter()
                    .any(|&j| mark[j] == *stamp)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as c64;

    fn grid_laplacian(n: usize) -> (CsrMatrix, Vec<[f64; 3]>) {
        let id = |i: usize, j: usize, k: usize| i + n * (j + n * k);
        let mut t = Vec::new();
        let mut pts = vec![[0.0; 3]; n * n * n];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = id(i, j, k);
                    pts[p] = [i as f64, j as f64, k as f64];
                    t.push((p, p, c64::new(6.0, 0.0)));
                    for (di, dj, dk) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                        if i + di < n && j + dj < n && k + dk < n {
                            let q = id(i + di, j + dj, k + dk);
                            t.push((p, q, c64::new(-1.0, 0.0)));
                            t.push((q, p, c64::new(-1.0, 0.0)));
                        }
                    }
                }
            }
        }
        (CsrMatrix::from_triplets(pts.len(), pts.len(), &t), pts)
    }

    #[test]
    fn order_is_a_permutation() {
        let (a, pts) = grid_laplacian(9);
        let mut order = nested_dissection(&a, &pts);
        order.sort_unstable();
        assert_eq!(order, (0..a.nrows()).collect::<Vec<_>>());
    }

    #[test]
    fn top_separator_is_a_grid_plane_and_comes_last() {
        let n = 9;
        let (a, pts) = grid_laplacian(n);
        let order = nested_dissection(&a, &pts);
        let last = &order[order.len() - n * n..];
        let axis = (0..3)
            .find(|&ax| last.iter().all(|&i| pts[i][ax] == pts[last[0]][ax]))
            .expect("a plane");
        assert!((pts[last[0]][axis] - 4.0).abs() <= 1.0);
    }
}
