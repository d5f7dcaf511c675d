//! Block-diagonal lattices built from a 2x2 base generator.
//!
//! The full generator is `diag{rho*G2, ..., rho*G2}`. It is never
//! materialised: every operation works one 2-dimensional block at a time,
//! which makes nearest-point search exact and linear in the dimension.

use rand::Rng;

use crate::error::{check_len, Error, Result};

/// Size of one generator block.
pub const BLOCK: usize = 2;

/// Half-width of the integer search window around the Babai estimate.
const SEARCH_RADIUS: i64 = 3;

/// Base generator used in the experiments, row-major.
pub const HEX_BLOCK: [[f64; 2]; 2] = [[0.25, 0.0], [0.125, 0.25]];

/// Exact per-dimension second moment of [`HEX_BLOCK`] at scale 1.
///
/// The Voronoi cell is the hexagon with vertices `(+-0.09375, +-0.125)` and
/// `(+-0.15625, 0)`; integrating `|x|^2` over it gives `31/6144`.
pub const HEX_BLOCK_SECOND_MOMENT: f64 = 31.0 / 6144.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    base: [[f64; 2]; 2],
    scale: f64,
    dimension: usize,
    generator: [[f64; 2]; 2],
    inverse: [[f64; 2]; 2],
    second_moment: Option<f64>,
}

/// A point of a [`Lattice`], kept in both real and integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub coords: Vec<f64>,
    pub integer_rep: Vec<i64>,
}

impl Lattice {
    /// Builds the lattice `diag{scale*base, ...}` of the given (even) dimension.
    pub fn new(base: [[f64; 2]; 2], scale: f64, dimension: usize) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lattice scale must be positive, got {scale}"
            )));
        }
        if dimension == 0 || dimension % BLOCK != 0 {
            return Err(Error::InvalidArgument(format!(
                "lattice dimension must be a positive multiple of {BLOCK}, got {dimension}"
            )));
        }
        let base_det = base[0][0] * base[1][1] - base[0][1] * base[1][0];
        if !base_det.is_finite() || base_det.abs() <= 1e-12 {
            return Err(Error::SingularGenerator(base_det));
        }
        let generator = [
            [scale * base[0][0], scale * base[0][1]],
            [scale * base[1][0], scale * base[1][1]],
        ];
        // Invertibility is judged on the base block: tiny scales stand in for
        // vanishing quantization and must stay constructible.
        let det = generator[0][0] * generator[1][1] - generator[0][1] * generator[1][0];
        let inverse = [
            [generator[1][1] / det, -generator[0][1] / det],
            [-generator[1][0] / det, generator[0][0] / det],
        ];
        Ok(Self {
            base,
            scale,
            dimension,
            generator,
            inverse,
            second_moment: None,
        })
    }

    /// The experiment lattice with `G2 = [[0.25, 0], [0.125, 0.25]]`.
    pub fn hexagonal(scale: f64, dimension: usize) -> Result<Self> {
        Self::new(HEX_BLOCK, scale, dimension)
    }

    /// Same generator and cached second moment, different dimension.
    pub fn with_dimension(&self, dimension: usize) -> Result<Self> {
        let mut lat = Self::new(self.base, self.scale, dimension)?;
        lat.second_moment = self.second_moment;
        Ok(lat)
    }

    /// Smallest valid lattice dimension that holds a `len`-vector.
    pub fn padded_dimension(len: usize) -> usize {
        len.max(1).div_ceil(BLOCK) * BLOCK
    }

    pub fn base_block(&self) -> [[f64; 2]; 2] {
        self.base
    }

    /// The scaled block `scale * base`.
    pub fn block_generator(&self) -> [[f64; 2]; 2] {
        self.generator
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Cell volume of one block, `|det(scale * base)|`.
    pub fn block_volume(&self) -> f64 {
        let g = &self.generator;
        (g[0][0] * g[1][1] - g[0][1] * g[1][0]).abs()
    }

    /// Cached per-dimension second moment.
    pub fn second_moment(&self) -> Result<f64> {
        self.second_moment.ok_or(Error::SecondMomentUnset)
    }

    /// Installs a known second moment (e.g. a golden constant scaled by `rho^2`).
    pub fn set_second_moment(&mut self, sigma_q2: f64) -> Result<()> {
        if !(sigma_q2.is_finite() && sigma_q2 >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "second moment must be non-negative, got {sigma_q2}"
            )));
        }
        self.second_moment = Some(sigma_q2);
        Ok(())
    }

    pub fn with_second_moment(mut self, sigma_q2: f64) -> Result<Self> {
        self.set_second_moment(sigma_q2)?;
        Ok(self)
    }

    /// Maps integer coordinates of one block to real coordinates.
    #[inline]
    pub fn block_point(&self, s: [i64; 2]) -> [f64; 2] {
        let g = &self.generator;
        let (s0, s1) = (s[0] as f64, s[1] as f64);
        [g[0][0] * s0 + g[0][1] * s1, g[1][0] * s0 + g[1][1] * s1]
    }

    /// Nearest lattice point to a single 2-vector.
    ///
    /// Candidates are the integer vectors within `SEARCH_RADIUS` of the Babai
    /// rounding estimate, visited in lexicographic order; only a strictly
    /// smaller distance replaces the incumbent, so ties resolve to the
    /// lexicographically smallest integer representation.
    pub fn quantize_block(&self, x: [f64; 2]) -> ([f64; 2], [i64; 2]) {
        let inv = &self.inverse;
        let b0 = (inv[0][0] * x[0] + inv[0][1] * x[1]).round() as i64;
        let b1 = (inv[1][0] * x[0] + inv[1][1] * x[1]).round() as i64;

        let mut best_s = [b0, b1];
        let mut best_p = self.block_point(best_s);
        let mut best_d = f64::INFINITY;
        for i in (b0 - SEARCH_RADIUS)..=(b0 + SEARCH_RADIUS) {
            for j in (b1 - SEARCH_RADIUS)..=(b1 + SEARCH_RADIUS) {
                let p = self.block_point([i, j]);
                let (e0, e1) = (x[0] - p[0], x[1] - p[1]);
                let d = e0 * e0 + e1 * e1;
                if d < best_d {
                    best_d = d;
                    best_s = [i, j];
                    best_p = p;
                }
            }
        }
        (best_p, best_s)
    }

    /// Nearest lattice point to `x` in Euclidean distance.
    ///
    /// The generator is block diagonal, so blockwise-nearest is globally
    /// nearest.
    pub fn quantize(&self, x: &[f64]) -> Result<LatticePoint> {
        check_len(self.dimension, x.len())?;
        let mut coords = Vec::with_capacity(x.len());
        let mut integer_rep = Vec::with_capacity(x.len());
        for block in x.chunks_exact(BLOCK) {
            let (p, s) = self.quantize_block([block[0], block[1]]);
            coords.extend_from_slice(&p);
            integer_rep.extend_from_slice(&s);
        }
        Ok(LatticePoint { coords, integer_rep })
    }

    /// One block of a dither uniform over the Voronoi cell of the origin.
    ///
    /// A uniform point of the fundamental parallelepiped is folded modulo the
    /// lattice, which carries the uniform measure onto the Voronoi cell.
    pub fn sample_dither_block<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let r0: f64 = rng.random();
        let r1: f64 = rng.random();
        let g = &self.generator;
        let u = [g[0][0] * r0 + g[0][1] * r1, g[1][0] * r0 + g[1][1] * r1];
        let (p, _) = self.quantize_block(u);
        [u[0] - p[0], u[1] - p[1]]
    }

    /// A full-dimension dither vector uniform over the Voronoi region.
    pub fn sample_dither<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.dimension);
        for _ in 0..self.dimension / BLOCK {
            d.extend_from_slice(&self.sample_dither_block(rng));
        }
        d
    }

    /// Monte Carlo estimate of the per-dimension second moment from
    /// `n_samples` block dithers. The result is cached on the lattice.
    pub fn estimate_second_moment<R: Rng + ?Sized>(
        &mut self,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be positive".into()));
        }
        let mut acc = 0.0;
        for _ in 0..n_samples {
            let d = self.sample_dither_block(rng);
            acc += d[0] * d[0] + d[1] * d[1];
        }
        let sigma_q2 = acc / (BLOCK as f64 * n_samples as f64);
        self.second_moment = Some(sigma_q2);
        Ok(sigma_q2)
    }

    /// Lattice point with the given integer coordinates.
    pub fn point_from_integers(&self, integer_rep: Vec<i64>) -> Result<LatticePoint> {
        check_len(self.dimension, integer_rep.len())?;
        let mut coords = Vec::with_capacity(integer_rep.len());
        for s in integer_rep.chunks_exact(BLOCK) {
            coords.extend_from_slice(&self.block_point([s[0], s[1]]));
        }
        Ok(LatticePoint { coords, integer_rep })
    }

    pub fn origin(&self) -> LatticePoint {
        LatticePoint {
            coords: vec![0.0; self.dimension],
            integer_rep: vec![0; self.dimension],
        }
    }

    /// `sum_k a_k * points[k]`, computed on integer coordinates.
    pub fn integer_combination(&self, a: &[i64], points: &[&LatticePoint]) -> Result<LatticePoint> {
        check_len(a.len(), points.len())?;
        let mut acc = vec![0i64; self.dimension];
        for (&ak, p) in a.iter().zip(points) {
            check_len(self.dimension, p.integer_rep.len())?;
            for (t, &s) in acc.iter_mut().zip(&p.integer_rep) {
                *t += ak * s;
            }
        }
        self.point_from_integers(acc)
    }
}

impl LatticePoint {
    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn is_origin(&self) -> bool {
        self.integer_rep.iter().all(|&s| s == 0)
    }
}
