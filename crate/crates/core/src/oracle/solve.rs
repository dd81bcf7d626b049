//! Expected absorption times by GTH-style elimination.
//!
//! The system `(I - Q) t = 1` is solved by Gaussian elimination in the
//! natural order without pivoting. The diagonal of each pivot row is never
//! formed as `1 - Q_ii`; it is recomputed as the total probability of
//! leaving the state (to the states still in the system plus the absorbing
//! set). Every quantity is then a sum or product of non-negative numbers, so
//! the float solve has no cancellation and keeps high relative accuracy
//! even when hitting times span dozens of orders of magnitude. The same
//! routine runs on exact rationals.

use num_traits::{One, Zero};
use std::ops::{Add, Div, Mul};

use super::OracleError;

pub(crate) trait Scalar:
    Clone + Zero + One + PartialEq + Add<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
}

impl<T> Scalar for T where
    T: Clone + Zero + One + PartialEq + Add<Output = T> + Mul<Output = T> + Div<Output = T>
{
}

/// Transient part of an absorbing chain. `q` is dense row-major `t x t`;
/// diagonal entries (self-loops) are ignored. `absorb[i]` is the
/// one-step probability of entering the absorbing set from `i`.
pub(crate) struct TransientSystem<T> {
    pub size: usize,
    pub q: Vec<T>,
    pub absorb: Vec<T>,
}

impl<T: Scalar> TransientSystem<T> {
    pub fn new(size: usize) -> Self {
        TransientSystem {
            size,
            q: vec![T::zero(); size * size],
            absorb: vec![T::zero(); size],
        }
    }

    pub fn add(&mut self, from: usize, to: usize, p: T) {
        let idx = from * self.size + to;
        self.q[idx] = self.q[idx].clone() + p;
    }

    pub fn add_absorb(&mut self, from: usize, p: T) {
        self.absorb[from] = self.absorb[from].clone() + p;
    }

    /// Every transient state must be able to reach the absorbing set.
    pub fn check_reachable(&self) -> Result<(), OracleError> {
        let t = self.size;
        let mut reach: Vec<bool> = self.absorb.iter().map(|a| !a.is_zero()).collect();
        let mut stack: Vec<usize> = (0..t).filter(|&i| reach[i]).collect();
        while let Some(j) = stack.pop() {
            #[allow(clippy::needless_range_loop)]
            for i in 0..t {
                if !reach[i] && i != j && !self.q[i * t + j].is_zero() {
                    reach[i] = true;
                    stack.push(i);
                }
            }
        }
        match reach.iter().position(|r| !r) {
            Some(state) => Err(OracleError::Unreachable { state }),
            None => Ok(()),
        }
    }

    /// Expected number of steps to absorption from every transient state.
    /// Consumes the system.
    pub fn solve(mut self) -> Result<Vec<T>, OracleError> {
        self.check_reachable()?;
        let t = self.size;
        let mut out = vec![T::zero(); t];
        let mut rhs: Vec<T> = vec![T::one(); t];
        for p in 0..t {
            let row = p * t;
            let mut leave = self.absorb[p].clone();
            for j in p + 1..t {
                leave = leave + self.q[row + j].clone();
            }
            if leave.is_zero() {
                return Err(OracleError::Unreachable { state: p });
            }
            for i in p + 1..t {
                let qip = self.q[i * t + p].clone();
                if qip.is_zero() {
                    continue;
                }
                let f = qip / leave.clone();
                for j in p + 1..t {
                    if j == i {
                        continue;
                    }
                    let qpj = &self.q[row + j];
                    if qpj.is_zero() {
                        continue;
                    }
                    let add = f.clone() * qpj.clone();
                    let idx = i * t + j;
                    self.q[idx] = self.q[idx].clone() + add;
                }
                self.absorb[i] = self.absorb[i].clone() + f.clone() * self.absorb[p].clone();
                rhs[i] = rhs[i].clone() + f * rhs[p].clone();
            }
            out[p] = leave;
        }
        let mut sol = vec![T::zero(); t];
        for p in (0..t).rev() {
            let row = p * t;
            let mut acc = rhs[p].clone();
            for (j, s) in sol.iter().enumerate().skip(p + 1) {
                let qpj = &self.q[row + j];
                if !qpj.is_zero() {
                    acc = acc + qpj.clone() * s.clone();
                }
            }
            sol[p] = acc / out[p].clone();
        }
        Ok(sol)
    }
}
