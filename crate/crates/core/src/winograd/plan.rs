//! Cook-Toom construction of Winograd minimal-filtering transforms.
//!
//! For F(m, r) with `n = m + r - 1` the plan interpolates the product
//! polynomial of an m-tap and an r-tap sequence at `n - 1` finite points
//! plus the point at infinity. Writing `V_m`, `V_r` for the evaluation
//! matrices and `C` for the interpolation matrix, linear convolution is
//! `C [(V_m h) . (V_r g)]`. Transposing that identity in `h` gives
//! correlation: `y = V_m^T [(V_r g) . (C^T d)]`, so `A = V_m`, `G = V_r`,
//! `B = C`.
//!
//! Each row of `B^T` is then rescaled to a primitive integer vector (the
//! reciprocal factor moves into `G`), which keeps the per-tile input
//! transform to additions and small integer scalings.

use std::fmt;

use num_rational::Ratio;

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

/// Evaluation points in the order they are consumed; the point at infinity
/// is always appended.
pub const CANONICAL_POINTS: [(i128, i128); 8] = [(0, 1), (1, 1), (-1, 1), (2, 1), (-2, 1), (1, 2), (-1, 2), (4, 1)];

/// Largest supported transform size `m + r - 1`.
pub const MAX_TILE: usize = 8;

/// Dense row-major matrix of exact rationals.
#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RatMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Rational::from_integer(0); rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<Rational>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Rational {
        self.data[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).iter().map(rat_to_f64).collect()).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = Rational> + '_ {
        self.data.iter().copied()
    }

    /// Gauss-Jordan inverse; `None` when singular.
    fn inverse(&self) -> Option<Self> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let zero = Rational::from_integer(0);
        let mut a = self.clone();
        let mut inv = Self::zeros(n, n);
        for i in 0..n {
            inv.set(i, i, Rational::from_integer(1));
        }
        for col in 0..n {
            let pivot = (col..n).find(|&r| a.get(r, col) != zero)?;
            if pivot != col {
                for j in 0..n {
                    let (x, y) = (a.get(col, j), a.get(pivot, j));
                    a.set(col, j, y);
                    a.set(pivot, j, x);
                    let (x, y) = (inv.get(col, j), inv.get(pivot, j));
                    inv.set(col, j, y);
                    inv.set(pivot, j, x);
                }
            }
            let p = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / p);
                inv.set(col, j, inv.get(col, j) / p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == zero {
                    continue;
                }
                for j in 0..n {
                    a.set(r, j, a.get(r, j) - f * a.get(col, j));
                    inv.set(r, j, inv.get(r, j) - f * inv.get(col, j));
                }
            }
        }
        Some(inv)
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.rows {
            list.entry(&self.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>());
        }
        list.finish()
    }
}

pub fn rat_to_f64(v: &Rational) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Transforms for the 1D minimal-filtering algorithm F(m, r).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinogradPlan {
    m: usize,
    r: usize,
    points: Vec<Rational>,
    /// `A^T`, m x n.
    at: RatMatrix,
    /// `G`, n x r.
    g: RatMatrix,
    /// `B^T`, n x n.
    bt: RatMatrix,
}

impl WinogradPlan {
    /// Build F(m, r) at the first `m + r - 2` canonical points plus infinity.
    pub fn new(m: usize, r: usize) -> Result<Self> {
        if m < 1 || r < 2 {
            return Err(Error::Unsupported(format!("F({m},{r}): need m >= 1 and r >= 2")));
        }
        let n = m + r - 1;
        if n > MAX_TILE {
            return Err(Error::Unsupported(format!("F({m},{r}): transform size {n} exceeds {MAX_TILE}")));
        }
        let points: Vec<Rational> = CANONICAL_POINTS[..n - 1].iter().map(|&(p, q)| Rational::new(p, q)).collect();

        let one = Rational::from_integer(1);
        let vandermonde = |cols: usize| {
            let mut v = RatMatrix::zeros(n, cols);
            for (i, p) in points.iter().enumerate() {
                let mut pow = one;
                for j in 0..cols {
                    v.set(i, j, pow);
                    pow *= p;
                }
            }
            // Infinity picks the leading coefficient.
            v.set(n - 1, cols - 1, one);
            v
        };
        let a = vandermonde(m);
        let mut g = vandermonde(r);
        let interp =
            vandermonde(n).inverse().ok_or_else(|| Error::Unsupported(format!("F({m},{r}): singular point set")))?;
        let mut bt = interp.transpose();
        let mut at = a.transpose();

        let zero = Rational::from_integer(0);
        for k in 0..n {
            let row = bt.row(k);
            let lcm_den = row.iter().fold(1i128, |l, v| l / gcd(l, *v.denom()) * v.denom());
            let gcd_num = row.iter().fold(0i128, |acc, v| gcd(acc, *v.numer()));
            let factor = Rational::new(lcm_den, gcd_num.max(1));
            for j in 0..n {
                bt.set(k, j, bt.get(k, j) * factor);
            }
            for j in 0..r {
                g.set(k, j, g.get(k, j) / factor);
            }
            // Infinity row: first nonzero of B^T positive, sign carried by A.
            let lead = bt.row(k).iter().copied().find(|v| *v != zero);
            if k == n - 1 && lead.is_some_and(|v| v < zero) {
                for j in 0..n {
                    bt.set(k, j, -bt.get(k, j));
                }
                for i in 0..m {
                    at.set(i, k, -at.get(i, k));
                }
            }
        }

        let plan = Self { m, r, points, at, g, bt };
        plan.check_basis()?;
        Ok(plan)
    }

    /// Exact check that `A^T[(G e_j) . (B^T e_k)] = e_{k-j}` for every pair of
    /// basis vectors, i.e. the plan computes valid correlation for all inputs.
    fn check_basis(&self) -> Result<()> {
        let n = self.tile();
        for i in 0..self.m {
            for j in 0..self.r {
                for k in 0..n {
                    let mut sum = Rational::from_integer(0);
                    for t in 0..n {
                        sum += self.at.get(i, t) * self.g.get(t, j) * self.bt.get(t, k);
                    }
                    let want = Rational::from_integer((k == i + j) as i128);
                    if sum != want {
                        return Err(Error::Unsupported(format!(
                            "F({},{}) failed basis check at output {i}, tap {j}, input {k}",
                            self.m, self.r
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Input tile extent `m + r - 1`, also the EWMM length.
    pub fn tile(&self) -> usize {
        self.m + self.r - 1
    }

    pub fn mults_per_tile(&self) -> usize {
        self.tile()
    }

    pub fn points(&self) -> &[Rational] {
        &self.points
    }

    pub fn at(&self) -> &RatMatrix {
        &self.at
    }

    pub fn a(&self) -> RatMatrix {
        self.at.transpose()
    }

    pub fn g(&self) -> &RatMatrix {
        &self.g
    }

    pub fn bt(&self) -> &RatMatrix {
        &self.bt
    }

    pub fn b(&self) -> RatMatrix {
        self.bt.transpose()
    }
}

/// Temporal and spatial plans for the hybrid FSB path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridPlan {
    pub temporal: WinogradPlan,
    pub spatial: WinogradPlan,
}

impl HybridPlan {
    /// F(m1, k) for the temporal stage and F(m2 x m2, r x r) for the
    /// depthwise stage.
    pub fn new(m1: usize, k: usize, m2: usize, r: usize) -> Result<Self> {
        Ok(Self { temporal: WinogradPlan::new(m1, k)?, spatial: WinogradPlan::new(m2, r)? })
    }
}
