//! Selected eigenpairs of a real symmetric tridiagonal matrix: Sturm-sequence
//! bisection for eigenvalues above a threshold, then inverse iteration with a
//! partially pivoted LU factorization for the eigenvectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::domain(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn pivot_floor(&self) -> f64 {
        let max_off = self.off.iter().fold(0.0f64, |m, v| m.max(v * v));
        f64::MIN_POSITIVE.max(max_off * f64::MIN_POSITIVE / f64::EPSILON)
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via LDL^T pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let floor = self.pivot_floor();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.diag.len() {
            if i > 0 {
                q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            }
            if q.abs() < floor {
                q = -floor;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// All eigenvalues greater than `threshold`, in descending order.
    pub fn eigenvalues_above(&self, threshold: f64) -> Vec<f64> {
        let n = self.diag.len();
        let (_, g_hi) = self.gershgorin();
        let below = self.count_below(threshold);
        let scale = g_hi.abs().max(threshold.abs()).max(1.0);
        let tol = 4.0 * f64::EPSILON * scale;
        // Ascending index `idx` of each wanted eigenvalue, from the largest down.
        (below..n)
            .rev()
            .map(|idx| {
                let mut lo = threshold;
                let mut hi = g_hi + tol;
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.count_below(mid) > idx {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Unit (Euclidean) eigenvector for an accurate eigenvalue estimate.
    ///
    /// The iterate is orthogonalized against `previous` vectors so that close
    /// eigenvalues still yield an orthonormal set.
    pub fn eigenvector(&self, lambda: f64, previous: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let lu = ShiftedLu::factor(self, lambda);
        // Deterministic, non-degenerate start vector.
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64 * 0.618_033_988_75).fract() - 0.5))
            .collect();
        normalize(&mut v)?;
        for _ in 0..4 {
            lu.solve(&mut v);
            for p in previous {
                let proj: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(p).for_each(|(x, y)| *x -= proj * y);
            }
            normalize(&mut v)?;
        }
        Ok(v)
    }

    /// `||T v - lambda v||_inf`
    pub fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut r = (self.diag[i] - lambda) * v[i];
                if i > 0 {
                    r += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    r += self.off[i] * v[i + 1];
                }
                r.abs()
            })
            .fold(0.0, f64::max)
    }
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Numeric("inverse iteration collapsed".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

/// LU factorization of `T - lambda I` with partial pivoting (two superdiagonals).
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, lambda: f64) -> Self {
        let n = t.diag.len();
        let mut dl = t.off.clone();
        let mut du = t.off.clone();
        let mut d: Vec<f64> = t.diag.iter().map(|v| v - lambda).collect();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                let fact = if d[i] != 0.0 { dl[i] / d[i] } else { 0.0 };
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let floor = f64::EPSILON * scale;
        for v in d.iter_mut() {
            if v.abs() < floor {
                *v = if *v < 0.0 { -floor } else { floor };
            }
        }
        Self {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
        // Rescale to keep iterates finite near exact eigenvalues.
        let m = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 1e100 {
            b.iter_mut().for_each(|v| *v /= m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Discrete Laplacian: eigenvalues `-2 + 2 cos(k pi / (n + 1))`.
    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![-2.0; n], vec![1.0; n - 1]).unwrap()
    }

    #[test]
    fn sturm_count_matches_closed_form() {
        let n = 50;
        let t = laplacian(n);
        let exact: Vec<f64> = (1..=n)
            .map(|k| -2.0 + 2.0 * (k as f64 * PI / (n as f64 + 1.0)).cos())
            .collect();
        for x in [-3.0, -2.0, -1.0, -0.1, 0.5] {
            let expected = exact.iter().filter(|&&e| e < x).count();
            assert_eq!(t.count_below(x), expected);
        }
    }

    #[test]
    fn top_eigenpairs_of_laplacian() {
        let n = 400;
        let t = laplacian(n);
        let vals = t.eigenvalues_above(-0.05);
        let expected: Vec<f64> = (1..=n)
            .map(|k| -2.0 + 2.0 * (k as f64 * PI / (n as f64 + 1.0)).cos())
            .filter(|e| *e > -0.05)
            .collect();
        assert_eq!(vals.len(), expected.len());
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        for (v, e) in vals.iter().zip(&expected) {
            assert!((v - e).abs() < 1e-13, "{v} vs {e}");
            let vec = t.eigenvector(*v, &vecs).unwrap();
            assert!(t.residual(*v, &vec) < 1e-12);
            vecs.push(vec);
        }
        for i in 0..vecs.len() {
            for j in 0..vecs.len() {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(SymTridiagonal::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(SymTridiagonal::new(vec![], vec![]).is_err());
    }
}
