//! Dense LU factorization with partial pivoting for the small collocation
//! matrices (M ≲ 20). Row-major storage.

#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// Unit-lower L below the diagonal, U on and above it.
    lu: Vec<f64>,
    /// `perm[i]` is the original row sitting at position `i`.
    perm: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub column: usize,
    pub magnitude: f64,
}

impl LuFactors {
    /// Factorizes `a` (row-major `n × n`). Fails when a pivot magnitude drops
    /// to `min_pivot` or below.
    pub fn factor(a: &[f64], n: usize, min_pivot: f64) -> Result<Self, SingularPivot> {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, mag) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if !(mag > min_pivot) {
                return Err(SingularPivot {
                    column: k,
                    magnitude: mag,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                if l != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= l * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn lower(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[i * self.n + j],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        }
    }

    pub fn upper(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.lu[i * self.n + j]
        } else {
            0.0
        }
    }

    /// Solves `A x = rhs` into `out` by forward and back substitution.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(rhs.len(), n);
        for i in 0..n {
            let mut acc = rhs[self.perm[i]];
            for j in 0..i {
                acc -= self.lu[i * n + j] * out[j];
            }
            out[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = out[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * out[j];
            }
            out[i] = acc / self.lu[i * n + i];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.solve_into(rhs, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_permuted_product() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.5, 4.0];
        let f = LuFactors::factor(&a, 3, 1e-12).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| f.lower(i, k) * f.upper(k, j)).sum();
                assert!((v - a[f.permutation()[i] * 3 + j]).abs() < 1e-15);
            }
        }
        let x = f.solve(&[3.0, 2.0, 7.5]);
        let r: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum::<f64>())
            .collect();
        for (ri, bi) in r.iter().zip([3.0, 2.0, 7.5]) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_reports_column() {
        let a = [1.0, 2.0, 2.0, 4.0];
        let err = LuFactors::factor(&a, 2, 1e-12).unwrap_err();
        assert_eq!(err.column, 1);
    }
}
