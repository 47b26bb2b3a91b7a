//! Dense linear algebra used by the operator and spectral modules.
//!
//! The symmetric eigensolver is Householder tridiagonalisation followed by
//! the implicit-shift QL iteration (the EISPACK `tred2`/`tql2` pair). The
//! general matrix exponential is degree-13 Padé with scaling and squaring.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending, eigenvectors
/// as orthonormal columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Largest `|a_ij - a_ji|`.
pub fn asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn is_symmetric(a: &Array2<f64>, tol: f64) -> bool {
    a.is_square() && asymmetry(a) <= tol
}

pub fn eig_symmetric(a: &Array2<f64>) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("eigensolver input"));
    }
    let dev = asymmetry(a);
    if dev > 1e-12 {
        return Err(Error::NotSymmetric(dev));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Array1::zeros(0),
            vectors: Array2::zeros((0, 0)),
        });
    }
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;
    Ok(canonical_order(d, v))
}

fn tridiagonalize(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = if f > 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e[..i].iter_mut() {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let g: f64 = (0..=i).map(|k| v[(k, i + 1)] * v[(k, j)]).sum();
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn ql_implicit(v: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let max_sweeps = 64 * n.max(1);
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::NoConvergence {
                        iterations: sweeps,
                        residual: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d[l + 2..].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let vk1 = v[(k, i + 1)];
                        let vk = v[(k, i)];
                        v[(k, i + 1)] = s * vk + c * vk1;
                        v[(k, i)] = c * vk - s * vk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn lexicographic(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Ascending eigenvalues, each eigenvector's first non-negligible component
/// made positive, near-ties ordered lexicographically by eigenvector.
fn canonical_order(values: Vec<f64>, mut vectors: Array2<f64>) -> SymmetricEigen {
    let n = values.len();
    for mut col in vectors.columns_mut() {
        if let Some(&first) = col.iter().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.mapv_inplace(|x| -x);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted_values = Array1::from_iter(order.iter().map(|&i| values[i]));
    let scale = values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] - values[order[end - 1]] <= 1e-9 * scale {
            end += 1;
        }
        order[start..end].sort_by(|&i, &j| lexicographic(vectors.column(i), vectors.column(j)));
        start = end;
    }
    let sorted_vectors = vectors.select(Axis(1), &order);
    SymmetricEigen {
        values: sorted_values,
        vectors: sorted_vectors,
    }
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.nrows(),
        });
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
            .unwrap_or(k);
        if lu[(pivot, k)] == 0.0 {
            return Err(Error::Argument("singular matrix".into()));
        }
        if pivot != k {
            for j in 0..n {
                lu.swap((k, j), (pivot, j));
            }
            for j in 0..x.ncols() {
                x.swap((k, j), (pivot, j));
            }
        }
        for i in k + 1..n {
            let factor = lu[(i, k)] / lu[(k, k)];
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                lu[(i, j)] -= factor * lu[(k, j)];
            }
            for j in 0..x.ncols() {
                x[(i, j)] -= factor * x[(k, j)];
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..x.ncols() {
            let tail: f64 = (k + 1..n).map(|i| lu[(k, i)] * x[(i, j)]).sum();
            x[(k, j)] = (x[(k, j)] - tail) / lu[(k, k)];
        }
    }
    Ok(x)
}

pub fn norm_one(a: &Array2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn norm_inf(a: &Array2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `e^A` by scaling and squaring with the [13/13] Padé approximant.
pub fn expm_pade(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::Dimension {
            expected: n,
            got: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    let norm = norm_one(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);
    let b = &PADE13;
    let ident = Array2::<f64>::eye(n);
    let a2 = scaled.dot(&scaled);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = scaled.dot(&(a6.dot(&inner_u) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]));
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = a6.dot(&inner_v) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let mut result = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    if result.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix exponential"));
    }
    Ok(result)
}

/// `V diag(f(λ)) Vᵀ` for a symmetric eigendecomposition.
pub fn spectral_function(eig: &SymmetricEigen, f: impl Fn(f64) -> f64) -> Array2<f64> {
    let weights = eig.values.mapv(f);
    let scaled = &eig.vectors * &weights.view().insert_axis(Axis(0));
    scaled.dot(&eig.vectors.t())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn oracle_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
        let mut v: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn check_decomposition(a: &Array2<f64>) {
        let eig = eig_symmetric(a).unwrap();
        let n = a.nrows();
        let qtq = eig.vectors.t().dot(&eig.vectors);
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[(i, j)] - target).abs() <= 1e-10);
            }
            let v = eig.vectors.column(i);
            let r = a.dot(&v) - &v * eig.values[i];
            assert!(r.iter().all(|x| x.abs() <= 1e-9), "residual too large");
        }
        for (x, y) in eig.values.iter().zip(oracle_eigenvalues(a)) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
        assert!(eig.values.windows(2).into_iter().all(|w| w[0] <= w[1]));
    }

    #[test]
    fn path_laplacian_spectrum() {
        // -2(1 - cos kπ/3), k = 0, 1, 2
        let a = array![[-1.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 1.0, -1.0]];
        let eig = eig_symmetric(&a).unwrap();
        for (x, y) in eig.values.iter().zip([-3.0, -1.0, 0.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        // zero eigenvector is constant with positive sign
        let v0 = eig.vectors.column(2);
        assert!(v0.iter().all(|x| (x - 1.0 / 3f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn zero_and_scalar_matrices() {
        let eig = eig_symmetric(&Array2::zeros((4, 4))).unwrap();
        assert!(eig.values.iter().all(|&x| x == 0.0));
        let eig = eig_symmetric(&array![[7.5]]).unwrap();
        assert_eq!(eig.values[0], 7.5);
        assert_eq!(eig.vectors[(0, 0)], 1.0);
        assert_eq!(eig_symmetric(&Array2::zeros((0, 0))).unwrap().values.len(), 0);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = array![[0.0, 1.0], [0.0, 0.0]];
        assert!(matches!(eig_symmetric(&a), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn degenerate_spectrum() {
        let mut a = Array2::ones((6, 6));
        a.diag_mut().fill(-5.0);
        check_decomposition(&a);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = array![[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x = array![[1.0], [-2.0], [0.5]];
        let b = a.dot(&x);
        let got = solve(&a, &b).unwrap();
        assert!((&got - &x).iter().all(|d| d.abs() < 1e-12));
        assert!(solve(&Array2::zeros((2, 2)), &Array2::zeros((2, 1))).is_err());
    }

    fn taylor_expm(a: &Array2<f64>) -> Array2<f64> {
        // scale so the series converges fast, then square back
        let s = 8;
        let scaled = a / 2f64.powi(s);
        let n = a.nrows();
        let mut term = Array2::<f64>::eye(n);
        let mut sum = term.clone();
        for k in 1..40 {
            term = term.dot(&scaled) / k as f64;
            sum = sum + &term;
        }
        for _ in 0..s {
            sum = sum.dot(&sum);
        }
        sum
    }

    #[test]
    fn pade_matches_taylor_and_rotation() {
        let a = array![[0.0, -1.0], [1.0, 0.0]] * 3.0;
        let e = expm_pade(&a).unwrap();
        let (c, s) = (3f64.cos(), 3f64.sin());
        let want = array![[c, -s], [s, c]];
        assert!((&e - &want).iter().all(|d| d.abs() < 1e-13));

        let b = array![[-2.0, 1.0, 1.0], [0.0, -1.0, 1.0], [3.0, 0.0, -3.0]] * 4.0;
        let e = expm_pade(&b).unwrap();
        let t = taylor_expm(&b);
        assert!((&e - &t).iter().all(|d| d.abs() < 1e-10));
        assert_eq!(expm_pade(&Array2::zeros((3, 3))).unwrap(), Array2::<f64>::eye(3));
    }

    proptest! {
        #[test]
        fn random_symmetric_decomposes(seed in proptest::collection::vec(-5.0f64..5.0, 36)) {
            let mut a = Array2::from_shape_vec((6, 6), seed).unwrap();
            let at = a.t().to_owned();
            a = (&a + &at) * 0.5;
            check_decomposition(&a);
        }
    }
}
