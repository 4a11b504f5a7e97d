//! Degree-truncated Wightman functionals with the commutative star product,
//! its exponential and logarithm, and insertion derivatives.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::scalar::{Coeff, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StarError {
    #[error("degree caps differ: {0} vs {1}")]
    CapMismatch(usize, usize),
    #[error("site dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("exponential needs a vanishing degree-0 component")]
    NotInIdeal,
    #[error("logarithm needs degree-0 component equal to one")]
    NotUnital,
    #[error("insertion of rank {rank} exceeds degree cap {cap}")]
    RankTooLarge { rank: usize, cap: usize },
}

fn from_int<C: Coeff>(n: i64) -> C {
    C::from_re(C::Re::from_int(n))
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// Dense rank-`rank` tensor with every slot ranging over `dim` values,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<C> {
    dim: usize,
    rank: usize,
    data: Vec<C>,
}

impl<C: Coeff> Tensor<C> {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        Self { dim, rank, data: vec![C::zero(); dim.pow(rank as u32)] }
    }

    pub fn scalar(c: C) -> Self {
        Self { dim: 0, rank: 0, data: vec![c] }
    }

    pub fn from_fn(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> C) -> Self {
        let mut t = Self::zeros(dim, rank);
        let mut idx = vec![0; rank];
        for flat in 0..t.data.len() {
            t.unflatten(flat, &mut idx);
            t.data[flat] = f(&idx);
        }
        t
    }

    pub fn from_data(dim: usize, rank: usize, data: Vec<C>) -> Self {
        assert_eq!(data.len(), dim.pow(rank as u32), "tensor data length");
        Self { dim, rank, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn data(&self) -> &[C] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C] {
        &mut self.data
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn unflatten(&self, mut flat: usize, idx: &mut [usize]) {
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
    }

    pub fn get(&self, idx: &[usize]) -> &C {
        &self.data[self.flatten(idx)]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut C {
        let f = self.flatten(idx);
        &mut self.data[f]
    }

    pub fn scale(&self, s: &C) -> Self {
        Self { dim: self.dim, rank: self.rank, data: self.data.iter().map(|v| v.clone() * s.clone()).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rank, self.data.len()), (other.rank, other.data.len()), "tensor shapes differ");
        Self {
            dim: self.dim.max(other.dim),
            rank: self.rank,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-C::one()))
    }

    pub fn conj(&self) -> Self {
        Self { dim: self.dim, rank: self.rank, data: self.data.iter().map(Coeff::conjugate).collect() }
    }

    pub fn max_modulus(&self) -> f64 {
        crate::scalar::max_modulus(&self.data)
    }

    /// `self(i) other(j)` on concatenated slots.
    pub fn outer(&self, other: &Self) -> Self {
        let dim = if self.rank == 0 { other.dim } else { self.dim };
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a.clone() * b.clone());
            }
        }
        Self { dim, rank: self.rank + other.rank, data }
    }

    /// Tensor with slots rearranged so that new slot `k` is old slot `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.rank);
        let mut old = vec![0; self.rank];
        Self::from_fn(self.dim, self.rank, |new| {
            for (k, &p) in perm.iter().enumerate() {
                old[p] = new[k];
            }
            self.get(&old).clone()
        })
    }

    /// Average over all slot permutations.
    pub fn symmetrize(&self) -> Self {
        if self.rank < 2 {
            return self.clone();
        }
        let mut acc = Self::zeros(self.dim, self.rank);
        for perm in permutations(self.rank) {
            acc = acc.add(&self.permute(&perm));
        }
        acc.scale(&(C::one() / from_int(factorial(self.rank))))
    }

    /// Largest deviation from any transposition of neighbouring slots.
    pub fn asymmetry(&self) -> f64 {
        (0..self.rank.saturating_sub(1))
            .map(|k| {
                let mut perm: Vec<usize> = (0..self.rank).collect();
                perm.swap(k, k + 1);
                self.sub(&self.permute(&perm)).max_modulus()
            })
            .fold(0.0, f64::max)
    }

    /// Applies `matrix[(new, old)]` to every slot.
    pub fn map_slots(&self, matrix: &ndarray::Array2<C>) -> Self {
        let (rows, cols) = matrix.dim();
        assert!(self.rank == 0 || cols == self.dim, "matrix width must match slot dimension");
        let mut cur = self.clone();
        for slot in 0..self.rank {
            let mut next = Self { dim: rows, rank: self.rank, data: Vec::new() };
            // Slots before `slot` already have dimension `rows`.
            let before = rows.pow(slot as u32);
            let after = cols.pow((self.rank - slot - 1) as u32);
            next.data = vec![C::zero(); before * rows * after];
            for b in 0..before {
                for r in 0..rows {
                    for c in 0..cols {
                        let m = &matrix[[r, c]];
                        if m.is_zero() {
                            continue;
                        }
                        let src = (b * cols + c) * after;
                        let dst = (b * rows + r) * after;
                        for a in 0..after {
                            let v = cur.data[src + a].clone() * m.clone();
                            next.data[dst + a] = next.data[dst + a].clone() + v;
                        }
                    }
                }
            }
            // Mixed dimensions only occur mid-loop; `dim` is final after the last slot.
            cur = next;
        }
        cur.dim = if self.rank == 0 { self.dim } else { rows };
        cur
    }

    /// Applies a square `matrix[(new, old)]` to one slot.
    pub fn map_slot(&self, slot: usize, matrix: &ndarray::Array2<C>) -> Self {
        assert!(slot < self.rank);
        let before = self.dim.pow(slot as u32);
        let after = self.dim.pow((self.rank - slot - 1) as u32);
        let mut out = Self::zeros(self.dim, self.rank);
        for b in 0..before {
            for r in 0..self.dim {
                for c in 0..self.dim {
                    let m = &matrix[[r, c]];
                    if m.is_zero() {
                        continue;
                    }
                    let src = (b * self.dim + c) * after;
                    let dst = (b * self.dim + r) * after;
                    for a in 0..after {
                        out.data[dst + a] = out.data[dst + a].clone() + self.data[src + a].clone() * m.clone();
                    }
                }
            }
        }
        out
    }

    /// `sum_{a,b} kernel(a, b) T(.., a @ i, .., b @ j, ..)` with the
    /// remaining slots kept in order.
    pub fn contract_pair(&self, i: usize, j: usize, kernel: &ndarray::Array2<C>) -> Self {
        assert!(i != j && i < self.rank && j < self.rank);
        let mut perm = alloc::vec![i, j];
        perm.extend((0..self.rank).filter(|&k| k != i && k != j));
        self.permute(&perm).contract_first_pair(kernel)
    }

    /// `sum_{a,b} kernel(a, b) T(a, b, rest)`.
    pub fn contract_first_pair(&self, kernel: &ndarray::Array2<C>) -> Self {
        assert!(self.rank >= 2, "pair contraction needs rank at least 2");
        let rest = self.dim.pow((self.rank - 2) as u32);
        let mut out = Self::zeros(self.dim, self.rank - 2);
        for a in 0..self.dim {
            for b in 0..self.dim {
                let k = &kernel[[a, b]];
                if k.is_zero() {
                    continue;
                }
                let base = (a * self.dim + b) * rest;
                for r in 0..rest {
                    out.data[r] = out.data[r].clone() + self.data[base + r].clone() * k.clone();
                }
            }
        }
        out
    }

    /// `sum_x w(x) f(x) T(x, rest)` over the first `f.rank()` slots.
    pub fn contract_leading(&self, f: &Self, weights: &[C]) -> Self {
        assert!(f.rank <= self.rank);
        let head = self.dim.pow(f.rank as u32);
        let rest = self.dim.pow((self.rank - f.rank) as u32);
        let mut out = Self::zeros(self.dim, self.rank - f.rank);
        let mut idx = vec![0; f.rank];
        for h in 0..head {
            if f.data[h].is_zero() {
                continue;
            }
            f.unflatten(h, &mut idx);
            let w = idx.iter().fold(f.data[h].clone(), |acc, &i| acc * weights[i].clone());
            for r in 0..rest {
                out.data[r] = out.data[r].clone() + self.data[h * rest + r].clone() * w.clone();
            }
        }
        out
    }

    /// `sum_x w(x) f(x) T(rest, x)` over the last `f.rank()` slots.
    pub fn contract_trailing(&self, f: &Self, weights: &[C]) -> Self {
        assert!(f.rank <= self.rank);
        let tail = self.dim.pow(f.rank as u32);
        let rest = self.dim.pow((self.rank - f.rank) as u32);
        let fw: Vec<C> = {
            let mut idx = vec![0; f.rank];
            (0..tail)
                .map(|t| {
                    f.unflatten(t, &mut idx);
                    idx.iter().fold(f.data[t].clone(), |acc, &i| acc * weights[i].clone())
                })
                .collect()
        };
        let mut out = Self::zeros(self.dim, self.rank - f.rank);
        for r in 0..rest {
            let mut acc = C::zero();
            for (t, w) in fw.iter().enumerate() {
                if !w.is_zero() {
                    acc = acc + self.data[r * tail + t].clone() * w.clone();
                }
            }
            out.data[r] = acc;
        }
        out
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else { break };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap_or(i);
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Set partitions of `0..n`, blocks listed by first element, elements in
/// increasing order.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(k: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if k == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(k);
            go(k + 1, n, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![k]);
        go(k + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), &mut out);
    out
}

/// Sequence `(W_0, W_1, ..., W_cap)` of tensors over lattice sites, with the
/// volume weights used for smearing.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional<C> {
    dim: usize,
    weights: Vec<C>,
    comps: Vec<Tensor<C>>,
}

impl<C: Coeff> Functional<C> {
    pub fn zero(cap: usize, weights: Vec<C>) -> Self {
        let dim = weights.len();
        let comps = (0..=cap).map(|n| Tensor::zeros(dim, n)).collect();
        Self { dim, weights, comps }
    }

    /// The unit `(1, 0, 0, ...)`.
    pub fn unit(cap: usize, weights: Vec<C>) -> Self {
        let mut f = Self::zero(cap, weights);
        f.comps[0].data[0] = C::one();
        f
    }

    pub fn cap(&self) -> usize {
        self.comps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[C] {
        &self.weights
    }

    pub fn component(&self, n: usize) -> &Tensor<C> {
        &self.comps[n]
    }

    pub fn component_mut(&mut self, n: usize) -> &mut Tensor<C> {
        &mut self.comps[n]
    }

    pub fn set_component(&mut self, n: usize, t: Tensor<C>) {
        assert_eq!(t.rank, n, "component rank");
        self.comps[n] = Tensor { dim: self.dim, ..t };
    }

    pub fn scalar_part(&self) -> &C {
        &self.comps[0].data[0]
    }

    fn check(&self, other: &Self) -> Result<(), StarError> {
        if self.cap() != other.cap() {
            return Err(StarError::CapMismatch(self.cap(), other.cap()));
        }
        if self.dim != other.dim {
            return Err(StarError::DimMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, StarError> {
        self.check(other)?;
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect();
        Ok(Self { comps, ..self.clone() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, StarError> {
        self.add(&other.scale(&-C::one()))
    }

    pub fn scale(&self, s: &C) -> Self {
        Self { comps: self.comps.iter().map(|t| t.scale(s)).collect(), ..self.clone() }
    }

    /// Keeps components up to `cap`.
    pub fn restrict(&self, cap: usize) -> Self {
        assert!(cap <= self.cap(), "restriction cannot raise the cap");
        Self { comps: self.comps[..=cap].to_vec(), ..self.clone() }
    }

    pub fn max_modulus(&self) -> f64 {
        self.comps.iter().map(Tensor::max_modulus).fold(0.0, f64::max)
    }

    /// `conj(W_n(x_n, ..., x_1)) = W_n(x_1, ..., x_n)` up to `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.comps.iter().all(|t| {
            let rev: Vec<usize> = (0..t.rank).rev().collect();
            t.sub(&t.permute(&rev).conj()).max_modulus() <= tol
        })
    }

    /// Subset-sum product: `(W * V)_n(x) = sum_S W(x_S) V(x_rest)`.
    pub fn star(&self, other: &Self) -> Result<Self, StarError> {
        self.check(other)?;
        let mut out = Self::zero(self.cap(), self.weights.clone());
        let dim = self.dim;
        for n in 0..=self.cap() {
            let target = &mut out.comps[n];
            let mut idx = vec![0; n];
            let mut left = Vec::with_capacity(n);
            let mut right = Vec::with_capacity(n);
            for mask in 0u32..(1 << n) {
                let k = mask.count_ones() as usize;
                let (a, b) = (&self.comps[k], &other.comps[n - k]);
                if a.data.iter().all(C::is_zero) || b.data.iter().all(C::is_zero) {
                    continue;
                }
                for flat in 0..dim.pow(n as u32) {
                    target.unflatten(flat, &mut idx);
                    left.clear();
                    right.clear();
                    for (s, &i) in idx.iter().enumerate() {
                        if mask & (1 << s) != 0 {
                            left.push(i);
                        } else {
                            right.push(i);
                        }
                    }
                    let v = a.get(&left).clone() * b.get(&right).clone();
                    target.data[flat] = target.data[flat].clone() + v;
                }
            }
        }
        Ok(out)
    }

    fn star_power_series(&self, coeffs: &[C]) -> Result<Self, StarError> {
        let mut acc = Self::zero(self.cap(), self.weights.clone());
        let mut power = Self::unit(self.cap(), self.weights.clone());
        for (k, c) in coeffs.iter().enumerate() {
            if k > 0 {
                power = power.star(self)?;
            }
            if !c.is_zero() {
                acc = acc.add(&power.scale(c))?;
            }
        }
        Ok(acc)
    }

    /// `sum_k W^k / k!`, exact because the series terminates at the cap.
    pub fn exp(&self) -> Result<Self, StarError> {
        if self.scalar_part().modulus() != 0.0 {
            return Err(StarError::NotInIdeal);
        }
        let coeffs: Vec<C> = (0..=self.cap()).map(|k| C::one() / from_int(factorial(k))).collect();
        self.star_power_series(&coeffs)
    }

    /// `-sum_k (1 - W)^k / k`.
    pub fn log(&self) -> Result<Self, StarError> {
        if (self.scalar_part().clone() - C::one()).modulus() > 1e-12 {
            return Err(StarError::NotUnital);
        }
        let mut shifted = Self::unit(self.cap(), self.weights.clone()).sub(self)?;
        shifted.comps[0].data[0] = C::zero();
        let coeffs: Vec<C> =
            (0..=self.cap()).map(|k| if k == 0 { C::zero() } else { -C::one() / from_int(k as i64) }).collect();
        shifted.star_power_series(&coeffs)
    }

    /// Truncated functional, `log W`.
    pub fn truncate(&self) -> Result<Self, StarError> {
        self.log()
    }

    /// Truncated functional from the cluster expansion: `W_n` is the sum over
    /// set partitions of products of truncated components, solved degree by
    /// degree.
    pub fn truncate_by_partitions(&self) -> Result<Self, StarError> {
        if (self.scalar_part().clone() - C::one()).modulus() > 1e-12 {
            return Err(StarError::NotUnital);
        }
        let mut out = Self::zero(self.cap(), self.weights.clone());
        for n in 1..=self.cap() {
            let mut rest = self.comps[n].clone();
            for partition in set_partitions(n).into_iter().filter(|p| p.len() > 1) {
                let term = Tensor::from_fn(self.dim, n, |idx| {
                    partition.iter().fold(C::one(), |acc, block| {
                        let sub: Vec<usize> = block.iter().map(|&i| idx[i]).collect();
                        acc * out.comps[block.len()].get(&sub).clone()
                    })
                });
                rest = rest.sub(&term);
            }
            out.comps[n] = rest;
        }
        Ok(out)
    }

    fn check_rank(&self, rank: usize) -> Result<(), StarError> {
        if rank > self.cap() {
            Err(StarError::RankTooLarge { rank, cap: self.cap() })
        } else {
            Ok(())
        }
    }

    /// Smears the first `f.rank()` arguments with `f`; the cap drops by the rank.
    pub fn derive_left(&self, f: &Tensor<C>) -> Result<Self, StarError> {
        self.check_rank(f.rank)?;
        let k = f.rank;
        let comps = (0..=self.cap() - k).map(|n| self.comps[n + k].contract_leading(f, &self.weights)).collect();
        Ok(Self { comps, ..self.clone() })
    }

    /// Smears the last `f.rank()` arguments with `f`.
    pub fn derive_right(&self, f: &Tensor<C>) -> Result<Self, StarError> {
        self.check_rank(f.rank)?;
        let k = f.rank;
        let comps = (0..=self.cap() - k).map(|n| self.comps[n + k].contract_trailing(f, &self.weights)).collect();
        Ok(Self { comps, ..self.clone() })
    }

    /// Pointwise insertion: fixes the first arguments to `left` and the last
    /// to `right`, without weights.
    pub fn insert_points(&self, left: &[usize], right: &[usize]) -> Result<Self, StarError> {
        let k = left.len() + right.len();
        self.check_rank(k)?;
        let comps = (0..=self.cap() - k)
            .map(|n| {
                let src = &self.comps[n + k];
                Tensor::from_fn(self.dim, n, |mid| {
                    let idx: Vec<usize> = left.iter().chain(mid).chain(right).copied().collect();
                    src.get(&idx).clone()
                })
            })
            .collect();
        Ok(Self { comps, ..self.clone() })
    }

    /// Right side of the chain rule for `D_left(f) D_right(g) exp(W^T)`:
    /// `W * sum_x w f(x_1..x_n) g(x_{n+1}..) sum_partitions *_blocks D_block W^T`.
    /// `self` is `W^T`. Intended for small ranks; the cost is `dim^(n+j)`
    /// times the number of partitions.
    pub fn chain_rule(&self, f: &Tensor<C>, g: &Tensor<C>) -> Result<Self, StarError> {
        let (n, j) = (f.rank, g.rank);
        self.check_rank(n + j)?;
        let low = self.cap() - n - j;
        let full = self.exp()?;
        let mut sum = Self::zero(low, self.weights.clone());
        let partitions = set_partitions(n + j);
        let mut xs = vec![0usize; n + j];
        for flat in 0..self.dim.pow((n + j) as u32) {
            let mut rem = flat;
            for x in xs.iter_mut().rev() {
                *x = rem % self.dim;
                rem /= self.dim;
            }
            let weight = xs.iter().fold(f.get(&xs[..n]).clone() * g.get(&xs[n..]).clone(), |acc, &x| {
                acc * self.weights[x].clone()
            });
            if weight.is_zero() {
                continue;
            }
            for partition in &partitions {
                let mut prod = Self::unit(low, self.weights.clone());
                for block in partition {
                    let left: Vec<usize> = block.iter().filter(|&&i| i < n).map(|&i| xs[i]).collect();
                    let right: Vec<usize> = block.iter().filter(|&&i| i >= n).map(|&i| xs[i]).collect();
                    let piece = self.insert_points(&left, &right)?.restrict_or_pad(low);
                    prod = prod.star(&piece)?;
                }
                sum = sum.add(&prod.scale(&weight))?;
            }
        }
        full.restrict(low).star(&sum)
    }

    fn restrict_or_pad(&self, cap: usize) -> Self {
        if cap <= self.cap() {
            return self.restrict(cap);
        }
        let mut out = Self::zero(cap, self.weights.clone());
        for (n, t) in self.comps.iter().enumerate() {
            out.comps[n] = t.clone();
        }
        out
    }
}
