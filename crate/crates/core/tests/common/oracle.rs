//! Independent reference computations for tests.
//!
//! Deliberately shares nothing with the library's interpolation path: the
//! interpolant is found by Gauss-Jordan elimination on the Vandermonde
//! system, evaluation is term-by-term with explicit powers, and corruption
//! location enumerates every subset by bitmask.

#![allow(dead_code)]

use lagpar::Rational;

/// Coefficients (ascending) of the interpolant through `points`.
pub fn vandermonde_solve(points: &[(Rational, Rational)]) -> Vec<Rational> {
    let n = points.len();
    let mut rows: Vec<Vec<Rational>> = points
        .iter()
        .map(|(x, y)| {
            let mut row: Vec<Rational> = (0..n as u32).map(|j| x.pow(j)).collect();
            row.push(y.clone());
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !rows[r][col].is_zero()).expect("singular Vandermonde system");
        rows.swap(col, pivot);
        let inv = rows[col][col].checked_recip().unwrap();
        rows[col] = rows[col].iter().map(|v| v * &inv).collect();
        for r in 0..n {
            if r != col && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                let pivot_row = rows[col].clone();
                for (a, b) in rows[r].iter_mut().zip(&pivot_row) {
                    *a = &*a - &(&factor * b);
                }
            }
        }
    }
    let mut coeffs: Vec<Rational> = rows.into_iter().map(|row| row[n].clone()).collect();
    while coeffs.last().is_some_and(Rational::is_zero) {
        coeffs.pop();
    }
    coeffs
}

pub fn brute_eval(coeffs: &[Rational], x: &Rational) -> Rational {
    coeffs.iter().enumerate().map(|(i, c)| c * &x.pow(i as u32)).fold(Rational::zero(), |a, b| a + b)
}

pub fn int(n: i64) -> Rational {
    Rational::from(n)
}

pub fn ints(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&n| int(n)).collect()
}

/// Parity values at `x = k..k+m-1` for data at `x = 0..k-1`.
pub fn parity_values(values: &[Rational], m: usize) -> Vec<Rational> {
    let pts: Vec<_> = values.iter().enumerate().map(|(i, v)| (int(i as i64), v.clone())).collect();
    let c = vandermonde_solve(&pts);
    (values.len()..values.len() + m).map(|x| brute_eval(&c, &int(x as i64))).collect()
}

#[derive(Debug, PartialEq, Eq)]
pub enum Located {
    Unique { recovered: Vec<Rational>, suspects: Vec<u64> },
    Ambiguous,
}

/// Maximum agreement over every k-subset, enumerated by bitmask.
pub fn brute_locate(blocks: &[(u64, Rational)], k: usize) -> Located {
    let n = blocks.len();
    let mut best: Vec<(Vec<Rational>, Vec<bool>)> = Vec::new();
    let mut best_count = 0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let pts: Vec<_> =
            (0..n).filter(|i| mask & (1 << i) != 0).map(|i| (int(blocks[i].0 as i64), blocks[i].1.clone())).collect();
        let c = vandermonde_solve(&pts);
        let agree: Vec<bool> = blocks.iter().map(|(x, y)| &brute_eval(&c, &int(*x as i64)) == y).collect();
        let count = agree.iter().filter(|a| **a).count();
        if count > best_count {
            best_count = count;
            best.clear();
        }
        if count == best_count && !best.iter().any(|(bc, _)| *bc == c) {
            best.push((c, agree));
        }
    }
    if best.len() != 1 {
        return Located::Ambiguous;
    }
    let (c, agree) = &best[0];
    Located::Unique {
        recovered: (0..k).map(|i| brute_eval(c, &int(i as i64))).collect(),
        suspects: blocks.iter().zip(agree).filter(|(_, a)| !**a).map(|(b, _)| b.0).collect(),
    }
}
