//! Prime-field arithmetic and incremental row reduction.

use crate::error::ModelError;

/// Largest prime below 2^32.
pub const DEFAULT_FIELD_ORDER: u64 = 4_294_967_291;

/// Smallest order accepted where a near-generic field is required.
pub const MIN_LARGE_FIELD: u64 = 1 << 16;

/// GF(p) for a prime `p < 2^32`; elements are stored reduced in `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, ModelError> {
        if p >= 1 << 32 || !is_prime(p) {
            return Err(ModelError::NotPrime(p));
        }
        Ok(Self { p })
    }

    /// A field of order at least 2^16.
    pub fn large(p: u64) -> Result<Self, ModelError> {
        if p < MIN_LARGE_FIELD {
            return Err(ModelError::FieldOrder(p));
        }
        Self::new(p).map_err(|_| ModelError::FieldOrder(p))
    }

    pub fn order(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// Inverse of a nonzero element.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(a != 0);
        self.pow(a, self.p - 2)
    }
}

/// Deterministic Miller-Rabin for 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let mulmod = |a: u64, b: u64| (u128::from(a) * u128::from(b) % u128::from(n)) as u64;
    let powmod = |mut a: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, a);
            }
            a = mulmod(a, a);
            e >>= 1;
        }
        acc
    };
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'bases: for &a in &BASES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// Row space kept in reduced row echelon form, grown one row at a time.
#[derive(Debug)]
pub struct EchelonBasis {
    field: PrimeField,
    cols: usize,
    /// Flat row storage, `rank * cols` entries.
    rows: Vec<u64>,
    /// Pivot column of each stored row.
    pivots: Vec<usize>,
    /// Row holding the pivot of each column, if any.
    pivot_row: Vec<Option<usize>>,
    scratch: Vec<u64>,
}

impl Clone for EchelonBasis {
    fn clone(&self) -> Self {
        Self {
            field: self.field,
            cols: self.cols,
            rows: self.rows.clone(),
            pivots: self.pivots.clone(),
            pivot_row: self.pivot_row.clone(),
            scratch: self.scratch.clone(),
        }
    }

    // Reuses the allocations; search code copies bases at every level.
    fn clone_from(&mut self, other: &Self) {
        self.field = other.field;
        self.cols = other.cols;
        self.rows.clone_from(&other.rows);
        self.pivots.clone_from(&other.pivots);
        self.pivot_row.clone_from(&other.pivot_row);
        self.scratch.clone_from(&other.scratch);
    }
}

impl EchelonBasis {
    pub fn new(field: PrimeField, cols: usize) -> Self {
        Self {
            field,
            cols,
            rows: Vec::new(),
            pivots: Vec::new(),
            pivot_row: vec![None; cols],
            scratch: vec![0; cols],
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn clear(&mut self) {
        self.rows.clear();
        self.pivots.clear();
        self.pivot_row.iter_mut().for_each(|p| *p = None);
    }

    /// Adds a row; returns true when it was innovative.
    pub fn insert(&mut self, row: &[u64]) -> bool {
        debug_assert_eq!(row.len(), self.cols);
        let f = self.field;
        let mut v = std::mem::take(&mut self.scratch);
        v.copy_from_slice(row);
        for (r, &pc) in self.pivots.iter().enumerate() {
            let c = v[pc];
            if c != 0 {
                let base = &self.rows[r * self.cols..(r + 1) * self.cols];
                for (x, &b) in v.iter_mut().zip(base) {
                    if b != 0 {
                        *x = f.sub(*x, f.mul(c, b));
                    }
                }
            }
        }
        let Some(pc) = v.iter().position(|&x| x != 0) else {
            self.scratch = v;
            return false;
        };
        let inv = f.inv(v[pc]);
        v.iter_mut().for_each(|x| *x = f.mul(*x, inv));
        // clear the new pivot column from the existing rows
        for r in 0..self.pivots.len() {
            let c = self.rows[r * self.cols + pc];
            if c != 0 {
                let row = &mut self.rows[r * self.cols..(r + 1) * self.cols];
                for (x, &b) in row.iter_mut().zip(&v) {
                    if b != 0 {
                        *x = f.sub(*x, f.mul(c, b));
                    }
                }
            }
        }
        self.pivot_row[pc] = Some(self.pivots.len());
        self.pivots.push(pc);
        self.rows.extend_from_slice(&v);
        self.scratch = v;
        true
    }

    /// True iff the unit vector `e_col` lies in the row space.
    ///
    /// In reduced form that happens exactly when the pivot row of `col` has
    /// no other nonzero entry.
    pub fn contains_unit(&self, col: usize) -> bool {
        match self.pivot_row[col] {
            None => false,
            Some(r) => {
                let row = &self.rows[r * self.cols..(r + 1) * self.cols];
                row.iter().enumerate().all(|(c, &x)| c == col || x == 0)
            }
        }
    }
}
