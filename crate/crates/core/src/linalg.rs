//! Minimal dense symmetric linear algebra for the Newton inner loop.
//!
//! Problem dimension is p + g (covariates plus clusters), typically well
//! under a hundred, so plain dense Cholesky is the right tool.

/// Row-major symmetric matrix.
#[derive(Debug, Clone)]
pub(crate) struct SymMatrix {
    pub n: usize,
    pub a: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, a: vec![0.0; n * n] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }

    /// Lower-triangular Cholesky factor; `Err(k)` carries the pivot index
    /// that failed, which callers map to a column name.
    pub fn cholesky(&self) -> Result<Vec<f64>, usize> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.at(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(i);
                    }
                    l[i * n + j] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(l)
    }

    /// Solve `A x = b` via Cholesky.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, usize> {
        let l = self.cholesky()?;
        Ok(solve_with_factor(&l, self.n, b))
    }

    /// Full inverse via Cholesky (used for the standard-error block).
    pub fn inverse(&self) -> Result<SymMatrix, usize> {
        let l = self.cholesky()?;
        let n = self.n;
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = solve_with_factor(&l, n, &e);
            for (i, v) in col.into_iter().enumerate() {
                inv.a[i * n + j] = v;
            }
        }
        Ok(inv)
    }
}

fn solve_with_factor(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}
