//! Periodic hypercubic lattice `(Z/NZ)^d`, occupation configurations and
//! real-valued site fields.
//!
//! Sites are indexed row-major over `(x_1, ..., x_d)` with every coordinate in
//! `[0, N)`. Neighbor lookups go through precomputed forward/backward tables so
//! the hot loops in the simulator and the solver never do modular arithmetic.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("lattice needs d >= 1 and N >= 2, got d={d}, N={n}")]
    BadShape { d: usize, n: usize },
    #[error("site index {index} out of range for {sites} sites")]
    SiteOutOfRange { index: usize, sites: usize },
    #[error("swap needs two distinct sites, got {0} twice")]
    SameSite(usize),
    #[error("offset has {got} components, lattice dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

/// The discrete torus `T_N^d`.
///
/// Cloning is cheap: the neighbor tables are shared.
#[derive(Clone)]
pub struct TorusLattice {
    d: usize,
    n: usize,
    sites: usize,
    strides: Vec<usize>,
    // Layout: `fwd[x * d + i]` is the site `x + e_i`.
    fwd: Arc<[u32]>,
    bwd: Arc<[u32]>,
}

impl fmt::Debug for TorusLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusLattice")
            .field("d", &self.d)
            .field("n", &self.n)
            .finish()
    }
}

impl PartialEq for TorusLattice {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.n == other.n
    }
}

impl TorusLattice {
    pub fn new(d: usize, n: usize) -> Result<Self, LatticeError> {
        if d == 0 || n < 2 {
            return Err(LatticeError::BadShape { d, n });
        }
        let sites = n
            .checked_pow(d as u32)
            .filter(|&s| s <= u32::MAX as usize)
            .ok_or(LatticeError::BadShape { d, n })?;
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * n;
        }
        let mut fwd = vec![0u32; sites * d];
        let mut bwd = vec![0u32; sites * d];
        for x in 0..sites {
            for i in 0..d {
                let c = (x / strides[i]) % n;
                let up = if c + 1 == n { x - c * strides[i] } else { x + strides[i] };
                let down = if c == 0 {
                    x + (n - 1) * strides[i]
                } else {
                    x - strides[i]
                };
                fwd[x * d + i] = up as u32;
                bwd[x * d + i] = down as u32;
            }
        }
        Ok(Self {
            d,
            n,
            sites,
            strides,
            fwd: fwd.into(),
            bwd: bwd.into(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn site_count(&self) -> usize {
        self.sites
    }

    /// Number of forward bonds `(x, x + e_i)`; equals `d * N^d`.
    #[inline]
    pub fn bond_count(&self) -> usize {
        self.sites * self.d
    }

    #[inline]
    pub fn forward(&self, x: usize, i: usize) -> usize {
        self.fwd[x * self.d + i] as usize
    }

    #[inline]
    pub fn backward(&self, x: usize, i: usize) -> usize {
        self.bwd[x * self.d + i] as usize
    }

    /// The `2d` nearest neighbors of `x` as a multiset. For `N = 2` the sites
    /// `x + e_i` and `x - e_i` coincide and appear twice.
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).flat_map(move |i| [self.forward(x, i), self.backward(x, i)])
    }

    pub fn check_site(&self, x: usize) -> Result<(), LatticeError> {
        if x < self.sites {
            Ok(())
        } else {
            Err(LatticeError::SiteOutOfRange {
                index: x,
                sites: self.sites,
            })
        }
    }

    pub fn coords(&self, x: usize) -> Vec<usize> {
        (0..self.d).map(|i| (x / self.strides[i]) % self.n).collect()
    }

    /// Index of a coordinate vector; every component is reduced mod `N`.
    pub fn index(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        let n = self.n as i64;
        coords
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c.rem_euclid(n) as usize * s)
            .sum()
    }

    /// The site `x + offset`, torus-wrapped.
    pub fn shift(&self, x: usize, offset: &[i64]) -> usize {
        debug_assert_eq!(offset.len(), self.d);
        let n = self.n as i64;
        let mut out = 0;
        for (i, &s) in self.strides.iter().enumerate() {
            let c = ((x / s) % self.n) as i64 + offset[i];
            out += c.rem_euclid(n) as usize * s;
        }
        out
    }

    /// Table `t[x] = x + offset` for all sites.
    pub fn shift_table(&self, offset: &[i64]) -> Result<Vec<u32>, LatticeError> {
        if offset.len() != self.d {
            return Err(LatticeError::DimensionMismatch {
                expected: self.d,
                got: offset.len(),
            });
        }
        Ok((0..self.sites).map(|x| self.shift(x, offset) as u32).collect())
    }

    /// Macroscopic position `x / N` in `[0,1)^d`.
    pub fn position(&self, x: usize) -> Vec<f64> {
        let n = self.n as f64;
        self.coords(x).into_iter().map(|c| c as f64 / n).collect()
    }

    /// All macroscopic positions, flattened `[site * d + i]`.
    pub fn positions(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.sites * self.d);
        for x in 0..self.sites {
            out.extend(self.position(x));
        }
        out
    }
}

/// An occupation configuration `eta in {0,1}^{T_N^d}`, one bit per site.
#[derive(Clone, PartialEq)]
pub struct Configuration {
    lattice: TorusLattice,
    words: Vec<u64>,
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({:?}, ", self.lattice)?;
        for x in 0..self.lattice.site_count().min(128) {
            write!(f, "{}", self.get(x) as u8)?;
        }
        write!(f, ")")
    }
}

impl Configuration {
    pub fn empty(lattice: &TorusLattice) -> Self {
        Self {
            lattice: lattice.clone(),
            words: vec![0; lattice.site_count().div_ceil(64)],
        }
    }

    pub fn full(lattice: &TorusLattice) -> Self {
        let mut cfg = Self::empty(lattice);
        for x in 0..lattice.site_count() {
            cfg.set(x, true);
        }
        cfg
    }

    pub fn from_bits(lattice: &TorusLattice, bits: &[bool]) -> Result<Self, LatticeError> {
        if bits.len() != lattice.site_count() {
            return Err(LatticeError::SiteOutOfRange {
                index: bits.len(),
                sites: lattice.site_count(),
            });
        }
        let mut cfg = Self::empty(lattice);
        for (x, &b) in bits.iter().enumerate() {
            cfg.set(x, b);
        }
        Ok(cfg)
    }

    /// Configuration whose bit `x` is bit `x` of `state`; used for state
    /// enumeration on small lattices.
    pub fn from_state_index(lattice: &TorusLattice, state: u64) -> Self {
        let mut cfg = Self::empty(lattice);
        for x in 0..lattice.site_count() {
            cfg.set(x, (state >> x) & 1 == 1);
        }
        cfg
    }

    /// Inverse of [`Configuration::from_state_index`]; requires `N^d <= 64`.
    pub fn state_index(&self) -> u64 {
        assert!(self.lattice.site_count() <= 64);
        self.words[0]
    }

    #[inline]
    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    #[inline]
    pub fn get(&self, x: usize) -> bool {
        (self.words[x >> 6] >> (x & 63)) & 1 == 1
    }

    #[inline]
    pub fn value(&self, x: usize) -> f64 {
        if self.get(x) {
            1.0
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, occupied: bool) {
        let mask = 1u64 << (x & 63);
        if occupied {
            self.words[x >> 6] |= mask;
        } else {
            self.words[x >> 6] &= !mask;
        }
    }

    /// In-place `eta -> eta^x`.
    #[inline]
    pub fn flip(&mut self, x: usize) {
        self.words[x >> 6] ^= 1u64 << (x & 63);
    }

    /// In-place `eta -> eta^{x,y}`.
    #[inline]
    pub fn swap(&mut self, x: usize, y: usize) {
        if self.get(x) != self.get(y) {
            self.flip(x);
            self.flip(y);
        }
    }

    /// `eta^{x,y}` as a fresh configuration.
    pub fn swapped(&self, x: usize, y: usize) -> Result<Self, LatticeError> {
        self.lattice.check_site(x)?;
        self.lattice.check_site(y)?;
        if x == y {
            return Err(LatticeError::SameSite(x));
        }
        let mut out = self.clone();
        out.swap(x, y);
        Ok(out)
    }

    /// `eta^x` as a fresh configuration.
    pub fn flipped(&self, x: usize) -> Result<Self, LatticeError> {
        self.lattice.check_site(x)?;
        let mut out = self.clone();
        out.flip(x);
        Ok(out)
    }

    pub fn particle_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.lattice.site_count()).map(|x| self.get(x))
    }

    /// Writes the snapshot format: a header line `d N time seed`, then the
    /// `N^d` occupations as `0`/`1` characters in index order.
    pub fn write_snapshot<W: Write>(&self, mut w: W, time: f64, seed: u64) -> io::Result<()> {
        writeln!(w, "{} {} {} {}", self.lattice.dim(), self.lattice.side(), time, seed)?;
        let line: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        writeln!(w, "{line}")
    }

    /// Reads a snapshot, returning the configuration, time and seed.
    pub fn read_snapshot<R: BufRead>(r: R) -> Result<(Self, f64, u64), LatticeError> {
        let bad = |m: &str| LatticeError::Snapshot(m.to_string());
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("missing header"))?
            .map_err(|e| bad(&e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad("header must be `d N time seed`"));
        }
        let d: usize = fields[0].parse().map_err(|_| bad("bad d"))?;
        let n: usize = fields[1].parse().map_err(|_| bad("bad N"))?;
        let time: f64 = fields[2].parse().map_err(|_| bad("bad time"))?;
        let seed: u64 = fields[3].parse().map_err(|_| bad("bad seed"))?;
        let lattice = TorusLattice::new(d, n)?;
        let mut body = String::new();
        for line in lines {
            body.push_str(line.map_err(|e| bad(&e.to_string()))?.trim());
        }
        if body.len() != lattice.site_count() {
            return Err(bad("occupation string has wrong length"));
        }
        let mut cfg = Self::empty(&lattice);
        for (x, ch) in body.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => cfg.set(x, true),
                _ => return Err(bad("occupations must be 0 or 1")),
            }
        }
        Ok((cfg, time, seed))
    }
}

/// One real value per lattice site.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    lattice: TorusLattice,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(lattice: &TorusLattice, value: f64) -> Self {
        Self {
            lattice: lattice.clone(),
            values: vec![value; lattice.site_count()],
        }
    }

    pub fn from_values(lattice: &TorusLattice, values: Vec<f64>) -> Result<Self, LatticeError> {
        if values.len() != lattice.site_count() {
            return Err(LatticeError::SiteOutOfRange {
                index: values.len(),
                sites: lattice.site_count(),
            });
        }
        Ok(Self {
            lattice: lattice.clone(),
            values,
        })
    }

    /// Samples `g(x / N)` at every site.
    pub fn from_fn(lattice: &TorusLattice, g: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..lattice.site_count()).map(|x| g(&lattice.position(x))).collect();
        Self {
            lattice: lattice.clone(),
            values,
        }
    }

    /// The occupations of a configuration as a 0/1 field.
    pub fn from_configuration(cfg: &Configuration) -> Self {
        Self {
            lattice: cfg.lattice().clone(),
            values: cfg.iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    #[inline]
    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize) -> f64 {
        self.values[x]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Integral of the step-function embedding against `phi`, i.e.
    /// `(1/N^d) sum_x u_x phi(x/N)`.
    pub fn pairing(&self, phi: impl Fn(&[f64]) -> f64) -> f64 {
        let sum: f64 = (0..self.lattice.site_count())
            .map(|x| self.values[x] * phi(&self.lattice.position(x)))
            .sum();
        sum / self.lattice.site_count() as f64
    }

    /// Writes `site_index,value` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "site_index,value")?;
        for (x, v) in self.values.iter().enumerate() {
            writeln!(w, "{x},{v:e}")?;
        }
        Ok(())
    }
}

/// `Delta^N u(x) = N^2 sum_{|y-x|=1} (u(y) - u(x))`.
pub fn discrete_laplacian(u: &ScalarField) -> ScalarField {
    let lat = u.lattice();
    let n2 = (lat.side() * lat.side()) as f64;
    let mut out = unscaled_laplacian(u);
    out.values_mut().iter_mut().for_each(|v| *v *= n2);
    out
}

/// `(Delta u)_x = sum_{|y-x|=1} (u(y) - u(x))` without the `N^2` factor.
pub fn unscaled_laplacian(u: &ScalarField) -> ScalarField {
    let lat = u.lattice();
    let d = lat.dim();
    let vals = u.values();
    let out = (0..lat.site_count())
        .map(|x| {
            let mut acc = 0.0;
            for i in 0..d {
                acc += vals[lat.forward(x, i)] + vals[lat.backward(x, i)];
            }
            acc - 2.0 * d as f64 * vals[x]
        })
        .collect();
    ScalarField {
        lattice: lat.clone(),
        values: out,
    }
}

/// Forward differences `{N (u(x + e_i) - u(x))}_i`.
pub fn discrete_gradient(u: &ScalarField, x: usize) -> Vec<f64> {
    let lat = u.lattice();
    let n = lat.side() as f64;
    (0..lat.dim())
        .map(|i| n * (u.get(lat.forward(x, i)) - u.get(x)))
        .collect()
}

/// `max_x || grad^N u(x) ||` in the Euclidean norm.
pub fn sup_gradient_norm(u: &ScalarField) -> f64 {
    (0..u.lattice().site_count())
        .map(|x| discrete_gradient(u, x).iter().map(|g| g * g).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}
