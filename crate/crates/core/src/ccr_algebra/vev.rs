//! Vacuum expectation values of in-field polynomials.

use alloc::vec::Vec;

use ndarray::Array2;

use super::fields::FieldPoly;
use crate::scalar::C64;

/// `<phi(s_1) ... phi(s_n)>` as the sum over pairings of products of the
/// two-point function, each pair taken in operator order.
pub fn word_expectation(word: &[u32], dplus: &Array2<C64>) -> C64 {
    fn go(rest: &mut Vec<u32>, dplus: &Array2<C64>) -> C64 {
        if rest.is_empty() {
            return C64::new(1.0, 0.0);
        }
        if rest.len() % 2 == 1 {
            return C64::new(0.0, 0.0);
        }
        let first = rest.remove(0);
        let mut total = C64::new(0.0, 0.0);
        for k in 0..rest.len() {
            let partner = rest.remove(k);
            let v = dplus[[first as usize, partner as usize]];
            if v != C64::new(0.0, 0.0) {
                total += v * go(rest, dplus);
            }
            rest.insert(k, partner);
        }
        rest.insert(0, first);
        total
    }
    go(&mut word.to_vec(), dplus)
}

pub fn vacuum_expectation(poly: &FieldPoly<f64>, dplus: &Array2<C64>) -> C64 {
    poly.terms().map(|(m, c)| *c * word_expectation(m, dplus)).sum()
}

/// `<P_1 P_2 ... P_n>` without forming the operator product: the
/// expectation is multilinear in the factors.
pub fn product_expectation(factors: &[&FieldPoly<f64>], dplus: &Array2<C64>) -> C64 {
    fn go(factors: &[&FieldPoly<f64>], word: &mut Vec<u32>, coeff: C64, dplus: &Array2<C64>) -> C64 {
        match factors.split_first() {
            None => coeff * word_expectation(word, dplus),
            Some((head, tail)) => {
                let mut total = C64::new(0.0, 0.0);
                for (m, c) in head.terms() {
                    let len = word.len();
                    word.extend_from_slice(m);
                    total += go(tail, word, coeff * *c, dplus);
                    word.truncate(len);
                }
                total
            }
        }
    }
    go(factors, &mut Vec::new(), C64::new(1.0, 0.0), dplus)
}
