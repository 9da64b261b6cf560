//! Exact rational linear algebra for integer matrices, and the exact Parry data used by the
//! rational spectrum mode.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::bratteli::DiagramData;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Renders a rational as `p/q`, including a unit denominator.
pub fn format_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn from_integer_rows(rows: &[Vec<u64>]) -> Vec<Vec<Q>> {
    rows.iter().map(|r| r.iter().map(|&a| Q::from_integer(BigInt::from(a))).collect()).collect()
}

pub fn transpose(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len()).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn mat_mul(a: &[Vec<Q>], b: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(Q::zero(), |acc, k| acc + &row[k] * &b[k][j]))
                .collect()
        })
        .collect()
}

pub fn identity(n: usize) -> Vec<Vec<Q>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect()
}

pub fn mat_pow(a: &[Vec<Q>], k: usize) -> Vec<Vec<Q>> {
    let mut out = identity(a.len());
    for _ in 0..k {
        out = mat_mul(&out, a);
    }
    out
}

/// Reduced row echelon form and the pivot columns.
pub fn rref(m: &[Vec<Q>]) -> (Vec<Vec<Q>>, Vec<usize>) {
    let mut r: Vec<Vec<Q>> = m.to_vec();
    let rows = r.len();
    let cols = if rows == 0 { 0 } else { r[0].len() };
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let Some(p) = (row..rows).find(|&i| !r[i][col].is_zero()) else { continue };
        r.swap(row, p);
        let inv = r[row][col].recip();
        for x in r[row].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != row && !r[i][col].is_zero() {
                let factor = r[i][col].clone();
                for j in 0..cols {
                    let delta = &factor * &r[row][j];
                    r[i][j] -= delta;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    (r, pivots)
}

pub fn rank(m: &[Vec<Q>]) -> usize {
    rref(m).1.len()
}

/// `rank(A^k)`, computed exactly.
pub fn rank_of_power(rows: &[Vec<u64>], k: usize) -> usize {
    rank(&mat_pow(&from_integer_rows(rows), k))
}

/// A basis of the column space made of pivot columns.
pub fn column_basis(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let (_, pivots) = rref(m);
    pivots.iter().map(|&j| m.iter().map(|r| r[j].clone()).collect()).collect()
}

/// A basis of `{x : m x = 0}`, one vector per free column.
pub fn null_space(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let (r, pivots) = rref(m);
    let cols = if m.is_empty() { 0 } else { m[0].len() };
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![Q::zero(); cols];
            x[f] = Q::one();
            for (i, &p) in pivots.iter().enumerate() {
                x[p] = -r[i][f].clone();
            }
            x
        })
        .collect()
}

/// Exact Perron data for a diagram whose Perron eigenvalue is an integer: the eigenvalue and
/// the left eigenvector `A^T l = lambda l` normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactParry {
    pub lambda: BigInt,
    pub left: Vec<Q>,
}

pub fn exact_parry(d: &DiagramData) -> Option<ExactParry> {
    let rounded = d.lambda().round();
    if (d.lambda() - rounded).abs() > 1e-9 || rounded < 2.0 {
        return None;
    }
    let lambda = BigInt::from(rounded as u64);
    let lq = Q::from_integer(lambda.clone());
    let mut shifted = transpose(&from_integer_rows(&d.matrix));
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] -= &lq;
    }
    let ns = null_space(&shifted);
    if ns.len() != 1 {
        return None;
    }
    let v = &ns[0];
    let total = v.iter().fold(Q::zero(), |a, x| a + x);
    let left: Vec<Q> = v.iter().map(|x| x / &total).collect();
    if left.iter().any(|x| !x.is_positive()) {
        return None;
    }
    Some(ExactParry { lambda, left })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks() {
        assert_eq!(rank_of_power(&[vec![2]], 1), 1);
        assert_eq!(rank_of_power(&[vec![1, 1], vec![1, 1]], 2), 1);
        assert_eq!(rank_of_power(&[vec![1, 1], vec![1, 0]], 2), 2);
        assert_eq!(rank_of_power(&[vec![1, 1, 0], vec![0, 0, 1], vec![1, 1, 0]], 3), 2);
    }

    #[test]
    fn null_space_is_annihilated() {
        let m = vec![vec![q(1), q(2), q(3)], vec![q(2), q(4), q(6)]];
        let ns = null_space(&m);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let mv = mat_mul(&m, &v.iter().map(|x| vec![x.clone()]).collect::<Vec<_>>());
            assert!(mv.iter().all(|r| r[0].is_zero()));
        }
    }

    #[test]
    fn parry_vectors() {
        let d = DiagramData::new(vec![vec![1, 1], vec![1, 1]]).unwrap();
        let p = exact_parry(&d).unwrap();
        assert_eq!(p.lambda, BigInt::from(2));
        assert_eq!(p.left, vec![Q::new(1.into(), 2.into()), Q::new(1.into(), 2.into())]);
        let fib = DiagramData::new(vec![vec![1, 1], vec![1, 0]]).unwrap();
        assert!(exact_parry(&fib).is_none());
        assert_eq!(format_q(&q(3)), "3/1");
    }
}
