//! Kernel of small dense matrices by Gaussian elimination with partial
//! pivoting.

/// Reduced row echelon form computed in place. Returns the pivot columns.
/// A column is treated as free when its best remaining pivot is at most
/// `rel_threshold * max|a_ij|`.
pub fn rref(m: &mut [Vec<f64>], rel_threshold: f64) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let scale = m.iter().flatten().fold(0.0_f64, |s, v| s.max(v.abs()));
    let threshold = rel_threshold * scale;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, m[i][c].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if val <= threshold || val == 0.0 {
            continue;
        }
        m.swap(r, best);
        let p = m[r][c];
        m[r].iter_mut().for_each(|v| *v /= p);
        for i in 0..rows {
            if i != r && m[i][c] != 0.0 {
                let f = m[i][c];
                for j in 0..cols {
                    m[i][j] -= f * m[r][j];
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Basis of `{v : M v = 0}`. Vectors are scaled to unit max-norm with the
/// first nonzero entry positive.
pub fn kernel_basis(matrix: &[Vec<f64>], rel_threshold: f64) -> Vec<Vec<f64>> {
    let cols = matrix.first().map_or(0, Vec::len);
    let mut m = matrix.to_vec();
    let pivots = rref(&mut m, rel_threshold);
    let free = (0..cols).filter(|c| !pivots.contains(c));
    free.map(|f| {
        let mut v = vec![0.0; cols];
        v[f] = 1.0;
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[row][f];
        }
        normalize(&mut v);
        v
    })
    .collect()
}

pub fn normalize(v: &mut [f64]) {
    let n = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if n == 0.0 {
        return;
    }
    let sign = v.iter().find(|x| **x != 0.0).map_or(1.0, |x| x.signum());
    v.iter_mut().for_each(|x| *x *= sign / n);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn full_rank_has_trivial_kernel() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        assert!(kernel_basis(&m, 1e-12).is_empty());
    }

    #[test]
    fn rank_one_matrix() {
        let m = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]];
        let k = kernel_basis(&m, 1e-12);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(apply(&m, v).iter().all(|r| r.abs() < 1e-14));
            assert_eq!(v.iter().fold(0.0_f64, |a, b| a.max(b.abs())), 1.0);
            assert!(v.iter().find(|x| **x != 0.0).unwrap() > &0.0);
        }
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let m = vec![vec![0.0; 3]; 2];
        assert_eq!(kernel_basis(&m, 1e-12).len(), 3);
    }

    #[test]
    fn near_singular_pivot_is_treated_as_zero() {
        let m = vec![vec![1.0, 1.0], vec![1.0, 1.0 + 1e-15]];
        assert_eq!(kernel_basis(&m, 1e-12).len(), 1);
        assert_eq!(kernel_basis(&m, 0.0).len(), 0);
    }
}
