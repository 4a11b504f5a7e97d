//! Polynomials in the in-field with c-number commutators, kept in a
//! canonical site-ordered form.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::scalar::Coeff;

/// Nondecreasing list of site indices.
pub type Monomial = Vec<u32>;

/// Source of the c-number commutator `[phi(a), phi(b)] = i D(a, b)`.
pub trait Commutator<C> {
    fn commutator_value(&self, a: u32, b: u32) -> C;
}

#[derive(Debug, Clone, PartialEq)]
pub struct WickPolynomial<C> {
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coeff> Default for WickPolynomial<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> WickPolynomial<C> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    /// `phi_in(site)`.
    pub fn generator(site: u32) -> Self {
        let mut p = Self::zero();
        p.add_term(alloc::vec![site], C::one());
        p
    }

    /// `c * phi(site)^k`.
    pub fn power(site: u32, k: usize, c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(alloc::vec![site; k], c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &[u32]) -> Option<&C> {
        self.terms.get(m)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Adds `c * m` for a monomial already in canonical order.
    pub fn add_term(&mut self, m: Monomial, c: C) {
        debug_assert!(m.windows(2).all(|w| w[0] <= w[1]));
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                let v = e.get().clone() + c;
                if v.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &Self, s: &C) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone() * s.clone());
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, &-C::one());
        out
    }

    pub fn scale(&self, s: &C) -> Self {
        let mut out = Self::zero();
        out.add_scaled(self, s);
        out
    }

    /// Largest coefficient modulus, zero for the zero polynomial.
    pub fn max_coefficient(&self) -> f64 {
        self.terms.values().map(Coeff::modulus).fold(0.0, f64::max)
    }

    /// Adds `c * word` after reordering the word into canonical form. Each
    /// swap of a descent `phi(b) phi(a)`, `b > a`, contributes the
    /// contracted word with `[phi(b), phi(a)]`.
    pub fn add_word<T: Commutator<C> + ?Sized>(&mut self, word: &[u32], c: C, table: &T) {
        let mut stack: Vec<(Vec<u32>, C)> = alloc::vec![(word.to_vec(), c)];
        while let Some((mut w, c)) = stack.pop() {
            match w.windows(2).position(|p| p[0] > p[1]) {
                None => self.add_term(w, c),
                Some(j) => {
                    let comm = table.commutator_value(w[j], w[j + 1]);
                    if !comm.is_zero() {
                        let mut shorter = Vec::with_capacity(w.len() - 2);
                        shorter.extend_from_slice(&w[..j]);
                        shorter.extend_from_slice(&w[j + 2..]);
                        stack.push((shorter, c.clone() * comm));
                    }
                    w.swap(j, j + 1);
                    stack.push((w, c));
                }
            }
        }
    }

    /// Canonical form of a product of generators.
    pub fn normal_form<T: Commutator<C> + ?Sized>(word: &[u32], table: &T) -> Self {
        let mut p = Self::zero();
        p.add_word(word, C::one(), table);
        p
    }

    /// Operator product `self * other`.
    pub fn mul<T: Commutator<C> + ?Sized>(&self, other: &Self, table: &T) -> Self {
        let mut out = Self::zero();
        let mut word = Vec::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                word.clear();
                word.extend_from_slice(ma);
                word.extend_from_slice(mb);
                out.add_word(&word, ca.clone() * cb.clone(), table);
            }
        }
        out
    }

    /// `[self, other]` from the derivation rule: every pair of generators
    /// `(a_i, b_j)` contributes `[phi(a_i), phi(b_j)]` times the word
    /// `a_{<i} b_{<j} b_{>j} a_{>i}`.
    pub fn commutator<T: Commutator<C> + ?Sized>(&self, other: &Self, table: &T) -> Self {
        let mut out = Self::zero();
        let mut word = Vec::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let c = ca.clone() * cb.clone();
                for i in 0..ma.len() {
                    for j in 0..mb.len() {
                        let comm = table.commutator_value(ma[i], mb[j]);
                        if comm.is_zero() {
                            continue;
                        }
                        word.clear();
                        word.extend_from_slice(&ma[..i]);
                        word.extend_from_slice(&mb[..j]);
                        word.extend_from_slice(&mb[j + 1..]);
                        word.extend_from_slice(&ma[i + 1..]);
                        out.add_word(&word, c.clone() * comm, table);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::CRat;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    /// Antisymmetric integer table `D(a, b)`, commutator `i D(a, b)`.
    struct Table(Vec<Vec<i64>>);

    impl Table {
        fn new(n: usize, seed: u64) -> Self {
            let mut d = alloc::vec![alloc::vec![0i64; n]; n];
            let mut s = seed;
            for a in 0..n {
                for b in a + 1..n {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let v = ((s >> 33) % 7) as i64 - 3;
                    d[a][b] = v;
                    d[b][a] = -v;
                }
            }
            Table(d)
        }
    }

    impl Commutator<CRat> for Table {
        fn commutator_value(&self, a: u32, b: u32) -> CRat {
            CRat::new(BigRational::zero(), BigRational::from_integer(BigInt::from(self.0[a as usize][b as usize])))
        }
    }

    type P = WickPolynomial<CRat>;

    fn rat(n: i64) -> CRat {
        CRat::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
    }

    /// Reference reordering by repeated adjacent swaps anywhere in the word.
    fn brute(word: &[u32], t: &Table) -> P {
        fn go(w: Vec<u32>, c: CRat, t: &Table, out: &mut P) {
            if let Some(j) = (0..w.len().saturating_sub(1)).rev().find(|&j| w[j] > w[j + 1]) {
                let mut s = w.clone();
                s.swap(j, j + 1);
                go(s, c.clone(), t, out);
                let comm = t.commutator_value(w[j], w[j + 1]);
                let mut r = w[..j].to_vec();
                r.extend_from_slice(&w[j + 2..]);
                go(r, c * comm, t, out);
            } else {
                out.add_term(w, c);
            }
        }
        let mut out = P::zero();
        go(word.to_vec(), CRat::one(), t, &mut out);
        out
    }

    #[test]
    fn ordered_product_is_unchanged_and_swap_adds_commutator() {
        let t = Table::new(4, 1);
        assert_eq!(P::normal_form(&[1, 3], &t), {
            let mut p = P::zero();
            p.add_term(alloc::vec![1, 3], CRat::one());
            p
        });
        let swapped = P::normal_form(&[3, 1], &t);
        let mut expect = P::normal_form(&[1, 3], &t);
        expect.add_term(Vec::new(), t.commutator_value(3, 1));
        assert_eq!(swapped, expect);
    }

    #[test]
    fn generator_commutator_and_unit() {
        let t = Table::new(5, 7);
        let c = P::generator(2).commutator(&P::generator(4), &t);
        assert_eq!(c, P::constant(t.commutator_value(2, 4)));
        assert!(P::power(3, 2, rat(5)).commutator(&P::one(), &t).is_zero());
    }

    #[test]
    fn squares_commutator_matches_product_rule() {
        // [a^2, b^2] = a[a,b]b + a b[a,b] + [a,b]b a + b[a,b]a ... expanded directly.
        let t = Table::new(6, 3);
        let (a, b) = (P::power(4, 2, CRat::one()), P::power(1, 2, CRat::one()));
        let direct = a.mul(&b, &t).sub(&b.mul(&a, &t));
        let cab = t.commutator_value(4, 1);
        // [x^2, y^2] = 2c (xy + yx) with c = [x, y].
        let xy = P::normal_form(&[4, 1], &t);
        let yx = P::normal_form(&[1, 4], &t);
        let mut expect = xy;
        expect.add_assign(&yx);
        let expect = expect.scale(&(cab * rat(2)));
        assert_eq!(a.commutator(&b, &t), expect);
        assert_eq!(direct, expect);
    }

    fn poly_strategy(n: u32) -> impl Strategy<Value = P> {
        prop::collection::vec((prop::collection::vec(0..n, 0..4usize), -3i64..4), 1..4).prop_map(move |terms| {
            let t = Table::new(n as usize, 11);
            let mut p = P::zero();
            for (w, c) in terms {
                p.add_word(&w, rat(c), &t);
            }
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn normal_form_is_confluent(word in prop::collection::vec(0u32..6, 0..7)) {
            let t = Table::new(6, 11);
            prop_assert_eq!(P::normal_form(&word, &t), brute(&word, &t));
        }

        #[test]
        fn commutator_equals_difference_of_products(a in poly_strategy(6), b in poly_strategy(6)) {
            let t = Table::new(6, 11);
            prop_assert_eq!(a.commutator(&b, &t), a.mul(&b, &t).sub(&b.mul(&a, &t)));
        }

        #[test]
        fn jacobi_identity(a in poly_strategy(5), b in poly_strategy(5), c in poly_strategy(5)) {
            let t = Table::new(5, 11);
            let mut s = a.commutator(&b.commutator(&c, &t), &t);
            s.add_assign(&b.commutator(&c.commutator(&a, &t), &t));
            s.add_assign(&c.commutator(&a.commutator(&b, &t), &t));
            prop_assert!(s.is_zero());
        }

        #[test]
        fn leibniz_rule(a in poly_strategy(5), b in poly_strategy(5), c in poly_strategy(5)) {
            let t = Table::new(5, 11);
            let lhs = a.commutator(&b.mul(&c, &t), &t);
            let mut rhs = a.commutator(&b, &t).mul(&c, &t);
            rhs.add_assign(&b.mul(&a.commutator(&c, &t), &t));
            prop_assert_eq!(lhs, rhs);
        }
    }
}
