//! Dense row-major matrices and column-pivoted Householder QR least squares.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate().take(self.rows) {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solution of a full-rank least-squares problem via pivoted QR.
#[derive(Debug, Clone)]
pub struct QrSolution {
    pub coefficients: Vec<f64>,
    /// `R` factor (upper triangular, `p × p`, pivoted column order).
    r: Vec<f64>,
    pivots: Vec<usize>,
}

impl QrSolution {
    /// Diagonal of `(AᵀA)⁻¹` in original column order.
    pub fn unscaled_covariance_diagonal(&self) -> Vec<f64> {
        let p = self.pivots.len();
        // Invert R column by column (back substitution on unit vectors).
        let mut rinv = vec![0.0; p * p];
        for col in 0..p {
            for row in (0..=col).rev() {
                let mut s = if row == col { 1.0 } else { 0.0 };
                for k in row + 1..=col {
                    s -= self.r[row * p + k] * rinv[k * p + col];
                }
                rinv[row * p + col] = s / self.r[row * p + row];
            }
        }
        let mut diag = vec![0.0; p];
        for j in 0..p {
            let s: f64 = (j..p).map(|l| rinv[j * p + l].powi(2)).sum();
            diag[self.pivots[j]] = s;
        }
        diag
    }
}

/// Rank deficiency found by the pivoted QR: the columns that were never
/// pivoted into the leading well-conditioned block.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDeficient {
    pub rank: usize,
    pub dependent: Vec<usize>,
}

/// Minimises `‖A x − b‖₂` with Householder QR and column pivoting.
///
/// Fails when the numerical rank is below the column count. Rank is decided
/// with the usual `max(m, n) · ε · |r₀₀|` threshold.
pub fn least_squares(a: &Matrix, b: &[f64]) -> Result<QrSolution, RankDeficient> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(b.len(), m, "rhs length");
    let mut q = a.data().to_vec();
    let mut rhs = b.to_vec();
    let mut pivots: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    let mut threshold = 0.0;
    let mut rank = 0;

    let col_norm2 = |q: &[f64], j: usize, from: usize| -> f64 {
        (from..m).map(|i| q[i * n + j].powi(2)).sum::<f64>()
    };

    for k in 0..steps {
        // Pivot: largest remaining column norm; ties keep the lowest index.
        let (best, best_norm2) =
            (k..n)
                .map(|j| (j, col_norm2(&q, j, k)))
                .fold(
                    (k, -1.0),
                    |acc, (j, v)| if v > acc.1 { (j, v) } else { acc },
                );
        if best != k {
            for i in 0..m {
                q.swap(i * n + k, i * n + best);
            }
            pivots.swap(k, best);
        }
        let norm = best_norm2.sqrt();
        if k == 0 {
            threshold = m.max(n) as f64 * f64::EPSILON * norm;
        }
        if norm <= threshold || norm == 0.0 {
            break;
        }

        // Householder vector v = x + sign(x0)‖x‖ e0, stored in place.
        let x0 = q[k * n + k];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let v0 = x0 - alpha;
        q[k * n + k] = v0;
        let vnorm2 = v0 * v0 + (k + 1..m).map(|i| q[i * n + k].powi(2)).sum::<f64>();
        for j in k + 1..n {
            let mut s = 0.0;
            for i in k..m {
                s += q[i * n + k] * q[i * n + j];
            }
            let f = 2.0 * s / vnorm2;
            for i in k..m {
                let v = q[i * n + k];
                q[i * n + j] -= f * v;
            }
        }
        let mut s = 0.0;
        for i in k..m {
            s += q[i * n + k] * rhs[i];
        }
        let f = 2.0 * s / vnorm2;
        for i in k..m {
            rhs[i] -= f * q[i * n + k];
        }
        q[k * n + k] = alpha;
        rank += 1;
    }

    if rank < n {
        let mut dependent = pivots[rank..].to_vec();
        dependent.sort_unstable();
        return Err(RankDeficient { rank, dependent });
    }

    let mut r = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            r[i * n + j] = q[i * n + j];
        }
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| r[i * n + j] * z[j]).sum();
        z[i] = (rhs[i] - s) / r[i * n + i];
    }
    let mut coefficients = vec![0.0; n];
    for (k, &col) in pivots.iter().enumerate() {
        coefficients[col] = z[k];
    }
    Ok(QrSolution {
        coefficients,
        r,
        pivots,
    })
}

/// Weighted least squares: rows with zero weight are dropped and the rest
/// scaled by `√w` before the QR solve.
pub fn weighted_least_squares(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
) -> Result<QrSolution, RankDeficient> {
    let p = x.cols();
    let mut data = Vec::new();
    let mut rhs = Vec::new();
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            let s = wi.sqrt();
            data.extend(x.row(i).iter().map(|v| v * s));
            rhs.push(y[i] * s);
        }
    }
    let a = Matrix::from_row_major(rhs.len(), p, data);
    least_squares(&a, &rhs)
}
