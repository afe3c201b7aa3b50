//! Rademacher quadruples, shell-ordered matrix units and the inductive Haar
//! construction on `N_ν`, together with its coefficient expansion and the
//! commutative (diagonal) reduction.
//!
//! Element `j = 4^ν q + k` of the level-(ν+1) system is
//! `h_k ⊗ r_0` when `q = 0` and `e_k ⊗ r_q` otherwise, where `e_k` is the
//! `k`-th matrix unit of `N_ν` in shell order. The quadruple of step ν lives
//! in the trailing (least significant) tensor factor.

use std::fmt;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::algebra::{self, state_with_density, Alpha, Weight};
use crate::error::{Error, Result};
use crate::matrix::{schatten_norm, Exponent, SquareMatrix, C64, ZERO};

/// Gram residual tolerated when validating a quadruple.
pub const GRAM_TOLERANCE: f64 = 1e-12;

/// Largest level for which the dense element list is materialized.
pub const MAX_HAAR_LEVEL: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(Error::Domain(format!("unknown side {other:?}"))),
        }
    }
}

/// Four 2×2 matrices orthonormal for the level-one state: `ρ₁(r_j* r_k) = δ_jk`
/// on the left side, `ρ₁(r_j r_k*) = δ_jk` on the right side.
#[derive(Clone, Debug, PartialEq)]
pub struct RademacherQuad {
    side: Side,
    alpha: Alpha,
    r: [SquareMatrix; 4],
}

impl RademacherQuad {
    /// Validates the Gram condition; fails beyond [`GRAM_TOLERANCE`].
    pub fn new(side: Side, alpha: Alpha, r: [SquareMatrix; 4]) -> Result<Self> {
        if let Some(bad) = r.iter().find(|m| m.dim() != 2) {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: bad.dim(),
            });
        }
        let quad = RademacherQuad { side, alpha, r };
        let residual = quad.gram_residual();
        if residual.is_nan() || residual > GRAM_TOLERANCE {
            return Err(Error::Gram {
                residual,
                tolerance: GRAM_TOLERANCE,
            });
        }
        let r0 = schatten_norm(&quad.r[0], Exponent::Infinity)?;
        if r0 > 1.0 + 1e-12 {
            log::warn!(
                "custom quadruple has ‖r₀‖ = {r0:.6} > 1; basis constants need not stay bounded across levels"
            );
        }
        Ok(quad)
    }

    /// The standard quadruple
    /// `r₀ = 1, r₁ = diag(λ^{-1/2}, -λ^{1/2}), r₂ = flip, r₃ = [[0, -λ^{1/2}], [λ^{-1/2}, 0]]`,
    /// with `r₃` replaced by its adjoint on the right side.
    pub fn standard(alpha: Alpha, side: Side) -> Self {
        let s = alpha.lambda().sqrt();
        let r0 = SquareMatrix::identity(2);
        let r1 = SquareMatrix::from_real_rows(&[&[1.0 / s, 0.0], &[0.0, -s]]);
        let r2 = SquareMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let r3 = SquareMatrix::from_real_rows(&[&[0.0, -s], &[1.0 / s, 0.0]]);
        let r3 = match side {
            Side::Left => r3,
            Side::Right => r3.adjoint(),
        };
        RademacherQuad::new(side, alpha, [r0, r1, r2, r3])
            .expect("standard quadruple satisfies the Gram condition")
    }

    /// A random quadruple with `r₀ = 1`, obtained by Gram–Schmidt in the
    /// state inner product of the requested side.
    pub fn random<R: Rng + ?Sized>(alpha: Alpha, side: Side, rng: &mut R) -> Self {
        let density = alpha.base_density();
        let pair = |a: &SquareMatrix, b: &SquareMatrix| -> C64 {
            // linear in a, conjugate-linear in b
            let m = match side {
                Side::Left => &b.adjoint() * a,
                Side::Right => a * &b.adjoint(),
            };
            state_with_density(&density, &m).expect("2x2")
        };
        let mut out: Vec<SquareMatrix> = vec![SquareMatrix::identity(2)];
        while out.len() < 4 {
            let mut v = SquareMatrix::from_fn(2, |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            for r in &out {
                let c = pair(&v, r);
                v = &v - &r.scale(c);
            }
            let norm = pair(&v, &v).re.sqrt();
            if norm < 1e-6 {
                continue;
            }
            out.push(v.scale(C64::new(1.0 / norm, 0.0)));
        }
        let r: [SquareMatrix; 4] = out.try_into().expect("four elements");
        RademacherQuad::new(side, alpha, r).expect("Gram–Schmidt output is orthonormal")
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn r(&self) -> &[SquareMatrix; 4] {
        &self.r
    }

    /// `G[j][k] = ρ₁(r_j* r_k)` (left) or `ρ₁(r_j r_k*)` (right).
    pub fn gram_matrix(&self) -> SquareMatrix {
        let density = self.alpha.base_density();
        SquareMatrix::from_fn(4, |j, k| {
            let m = match self.side {
                Side::Left => &self.r[j].adjoint() * &self.r[k],
                Side::Right => &self.r[j] * &self.r[k].adjoint(),
            };
            state_with_density(&density, &m).expect("2x2")
        })
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_matrix().max_abs_diff(&SquareMatrix::identity(4))
    }

    /// The same quadruple with every element replaced by its adjoint, which
    /// turns a left system into a right one and vice versa.
    pub fn adjoint_mirror(&self) -> Result<Self> {
        let side = match self.side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        RademacherQuad::new(side, self.alpha, self.r.clone().map(|m| m.adjoint()))
    }
}

/// Square-shell enumeration of `ℕ × ℕ` (1-based):
/// `s(j, k) = (k-1)² + j` for `j ≤ k`, `j² - k + 1` otherwise.
pub fn shell_index(j: usize, k: usize) -> usize {
    assert!(j >= 1 && k >= 1, "shell indices are 1-based");
    if j <= k {
        (k - 1) * (k - 1) + j
    } else {
        j * j - k + 1
    }
}

/// Inverse of [`shell_index`].
pub fn shell_pair(s: usize) -> (usize, usize) {
    assert!(s >= 1, "shell indices are 1-based");
    let mut n = (s as f64).sqrt() as usize;
    while n * n < s {
        n += 1;
    }
    while n > 1 && (n - 1) * (n - 1) >= s {
        n -= 1;
    }
    let offset = s - (n - 1) * (n - 1);
    if offset <= n {
        (offset, n)
    } else {
        (n, n * n + 1 - s)
    }
}

/// 0-based `(row, col)` of the matrix units of an `n × n` matrix in shell
/// order, i.e. entry `j` sits where `shell_index(row + 1, col + 1) = j + 1`.
pub fn shell_positions(n: usize) -> Vec<(usize, usize)> {
    (1..=n * n)
        .map(|s| {
            let (j, k) = shell_pair(s);
            (j - 1, k - 1)
        })
        .collect()
}

pub fn matrix_units_shell(level: usize) -> Vec<SquareMatrix> {
    let n = 1usize << level;
    shell_positions(n)
        .into_iter()
        .map(|(r, c)| SquareMatrix::unit(n, r, c))
        .collect()
}

/// Finite non-commutative Haar system `h_0, …, h_{4^ν - 1}` on `N_ν`.
#[derive(Clone, Debug)]
pub struct HaarSystem {
    side: Side,
    alpha: Alpha,
    quads: Vec<RademacherQuad>,
    adjoints: Vec<[SquareMatrix; 4]>,
    elements: Vec<SquareMatrix>,
    sparse: Vec<Vec<(usize, C64)>>,
}

impl HaarSystem {
    /// Builds the system from one quadruple per level; `quads[0]` seeds
    /// level one and `quads[ν-1]` is used in the last inductive step.
    pub fn build(quads: Vec<RademacherQuad>) -> Result<Self> {
        let level = quads.len();
        if level == 0 {
            return Err(Error::Domain("a Haar system needs at least one level".into()));
        }
        if level > MAX_HAAR_LEVEL {
            return Err(Error::ScaleCap(format!(
                "Haar systems are materialized up to level {MAX_HAAR_LEVEL}, got {level}"
            )));
        }
        let side = quads[0].side;
        let alpha = quads[0].alpha;
        if let Some(q) = quads.iter().find(|q| q.side != side) {
            return Err(Error::Domain(format!(
                "quadruple sides disagree: {side} vs {}",
                q.side
            )));
        }
        if let Some(q) = quads.iter().find(|q| q.alpha != alpha) {
            return Err(Error::Domain(format!(
                "quadruple alphas disagree: {alpha} vs {}",
                q.alpha
            )));
        }

        let mut elements: Vec<SquareMatrix> = quads[0].r.to_vec();
        for (step, quad) in quads.iter().enumerate().skip(1) {
            let n = 1usize << step;
            let units = shell_positions(n);
            let mut next = Vec::with_capacity(4 * elements.len());
            for h in &elements {
                next.push(h.kron(&quad.r[0]));
            }
            for q in 1..4 {
                for &(row, col) in &units {
                    next.push(SquareMatrix::unit(n, row, col).kron(&quad.r[q]));
                }
            }
            elements = next;
        }
        let sparse = elements
            .iter()
            .map(|h| {
                h.as_slice()
                    .iter()
                    .enumerate()
                    .filter(|(_, z)| **z != ZERO)
                    .map(|(i, z)| (i, *z))
                    .collect()
            })
            .collect();
        let adjoints = quads.iter().map(|q| q.r.clone().map(|m| m.adjoint())).collect();
        Ok(HaarSystem {
            side,
            alpha,
            quads,
            adjoints,
            elements,
            sparse,
        })
    }

    /// The system built from the standard quadruple at every level.
    pub fn standard(alpha: Alpha, level: usize, side: Side) -> Result<Self> {
        Self::uniform(RademacherQuad::standard(alpha, side), level)
    }

    /// Replicates one quadruple across all levels.
    pub fn uniform(quad: RademacherQuad, level: usize) -> Result<Self> {
        Self::build(vec![quad; level])
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn level(&self) -> usize {
        self.quads.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.level()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn quads(&self) -> &[RademacherQuad] {
        &self.quads
    }

    pub fn elements(&self) -> &[SquareMatrix] {
        &self.elements
    }

    pub fn weight(&self) -> Weight {
        Weight::new(self.alpha, self.level()).expect("level validated at construction")
    }

    /// Worst Gram residual over the per-level quadruples.
    pub fn gram_residual(&self) -> f64 {
        self.quads.iter().map(|q| q.gram_residual()).fold(0.0, f64::max)
    }

    /// Coefficients `c` with `x = Σ c_j h_j`.
    ///
    /// Base level: `c_j = ρ₁(r_j* x)` (left) or `ρ₁(x r_j*)` (right). Higher
    /// levels peel off the trailing factor: `y_q = E((1 ⊗ r_q)* x)` (left) or
    /// `E(x (1 ⊗ r_q)*)` (right); `y_0` is expanded recursively and for
    /// `q ≠ 0` the entries of `y_q` are the coefficients of `e_k ⊗ r_q`.
    pub fn analyze(&self, x: &SquareMatrix) -> Result<Vec<C64>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        let density = self.alpha.base_density();
        let mut out = vec![ZERO; self.len()];
        self.analyze_into(self.level(), x.clone(), &density, &mut out);
        Ok(out)
    }

    fn analyze_into(&self, level: usize, x: SquareMatrix, density: &[f64; 2], out: &mut [C64]) {
        let adj = &self.adjoints[level - 1];
        if level == 1 {
            for (j, rj) in adj.iter().enumerate() {
                let m = match self.side {
                    Side::Left => rj * &x,
                    Side::Right => &x * rj,
                };
                out[j] = state_with_density(density, &m).expect("2x2");
            }
            return;
        }
        let block = 1usize << (2 * (level - 1));
        let n_low = 1usize << (level - 1);
        let mut head = None;
        for (q, rq) in adj.iter().enumerate() {
            let m = match self.side {
                Side::Left => algebra::tail_mul_left(rq, &x),
                Side::Right => algebra::tail_mul_right(&x, rq),
            };
            let y = algebra::weighted_partial_trace(&m, density).expect("even dimension");
            if q == 0 {
                head = Some(y);
            } else {
                for (k, (row, col)) in shell_positions(n_low).into_iter().enumerate() {
                    out[q * block + k] = y[(row, col)];
                }
            }
        }
        self.analyze_into(level - 1, head.expect("q = 0 visited"), density, &mut out[..block]);
    }

    /// `Σ c_j h_j`.
    pub fn synthesize(&self, coeffs: &[C64]) -> Result<SquareMatrix> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        let mut out = SquareMatrix::zeros(self.dim());
        let buf = out.as_mut_slice();
        for (c, nz) in coeffs.iter().zip(&self.sparse) {
            if *c == ZERO {
                continue;
            }
            for &(i, z) in nz {
                buf[i] += c * z;
            }
        }
        Ok(out)
    }

    /// Haar system whose elements are the adjoints of these, on the opposite
    /// side. It is the image of this system under `x ↦ x*`; partial sums are
    /// conjugated accordingly, so left norms on one side match right norms on
    /// the other.
    pub fn adjoint_elements(&self) -> Vec<SquareMatrix> {
        self.elements.iter().map(|h| h.adjoint()).collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct HaarJson {
    side: Side,
    alpha: Alpha,
    level: usize,
    quads: Vec<[SquareMatrix; 4]>,
}

impl Serialize for HaarSystem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HaarJson {
            side: self.side,
            alpha: self.alpha,
            level: self.level(),
            quads: self.quads.iter().map(|q| q.r.clone()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HaarSystem {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = HaarJson::deserialize(d)?;
        if raw.quads.len() != raw.level {
            return Err(D::Error::custom(format!(
                "level {} but {} quadruples",
                raw.level,
                raw.quads.len()
            )));
        }
        let quads = raw
            .quads
            .into_iter()
            .map(|r| RademacherQuad::new(raw.side, raw.alpha, r))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        HaarSystem::build(quads).map_err(D::Error::custom)
    }
}

/// Masses `m_α(I_k)` of the dyadic intervals `[k/2^ν, (k+1)/2^ν)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureTable {
    pub alpha: Alpha,
    pub level: usize,
    pub masses: Vec<f64>,
}

impl MeasureTable {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// CSV with columns `k, k/2^ν, mass`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "left_endpoint", "mass"])?;
        let n = self.masses.len() as f64;
        for (k, m) in self.masses.iter().enumerate() {
            out.write_record([k.to_string(), (k as f64 / n).to_string(), m.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Product of `α` over zero digits and `1-α` over one digits of `k`
/// (ν binary digits).
pub fn distorted_measure(alpha: Alpha, level: usize) -> Result<MeasureTable> {
    if level == 0 || level > algebra::MAX_LEVEL {
        return Err(Error::Domain(format!(
            "level must lie in 1..={}, got {level}",
            algebra::MAX_LEVEL
        )));
    }
    let masses = (0..1usize << level)
        .map(|k| {
            let ones = (k as u64).count_ones();
            alpha.digit_product(level as u32 - ones, ones)
        })
        .collect();
    Ok(MeasureTable {
        alpha,
        level,
        masses,
    })
}

/// Diagonal Haar system `χ_0, …, χ_{2^ν-1}` with its step-function values.
#[derive(Clone, Debug)]
pub struct CommutativeHaar {
    /// Diagonal matrices of dimension `2^ν`.
    pub chis: Vec<SquareMatrix>,
    /// `steps[j][k]` is the value of `χ_j` on the dyadic interval `I_k`.
    pub steps: Vec<Vec<f64>>,
    pub measure: MeasureTable,
}

/// `χ_0 = r_0`, `χ_1 = r_1`, `χ_{2^μ + k} = ε_k ⊗ r_1` for `0 ≤ k < 2^μ`,
/// each lifted to level ν by tensoring with identities.
pub fn commutative_haar(alpha: Alpha, level: usize) -> Result<CommutativeHaar> {
    if level == 0 || level > algebra::MAX_LEVEL {
        return Err(Error::Domain(format!(
            "level must lie in 1..={}, got {level}",
            algebra::MAX_LEVEL
        )));
    }
    let quad = RademacherQuad::standard(alpha, Side::Left);
    let r1: Vec<f64> = (0..2).map(|i| quad.r[1][(i, i)].re).collect();
    let n = 1usize << level;
    let mut steps = vec![vec![1.0; n]];
    for mu in 0..level {
        let block = n >> mu;
        for k in 0..1usize << mu {
            let mut v = vec![0.0; n];
            for (t, slot) in v[k * block..(k + 1) * block].iter_mut().enumerate() {
                *slot = if t < block / 2 { r1[0] } else { r1[1] };
            }
            steps.push(v);
        }
    }
    let chis = steps
        .iter()
        .map(|v| {
            let d: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
            SquareMatrix::from_diagonal(&d)
        })
        .collect();
    Ok(CommutativeHaar {
        chis,
        steps,
        measure: distorted_measure(alpha, level)?,
    })
}

/// For each Haar index `j` at level ν, the index of the χ it reduces to under
/// the diagonal expectation, or `None` when that expectation vanishes:
/// `j = 0`, or `4^μ ≤ j < 2·4^μ` with `e_{j - 4^μ}` a diagonal unit of `N_μ`.
pub fn commutative_selection(level: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; 1usize << (2 * level)];
    out[0] = Some(0);
    for mu in 0..level {
        let start = 1usize << (2 * mu);
        let n = 1usize << mu;
        for (k, (row, col)) in shell_positions(n).into_iter().enumerate() {
            if row == col {
                out[start + k] = Some((1usize << mu) + row);
            }
        }
    }
    out
}

/// Rank of the synthesis matrix whose columns are the flattened elements.
pub fn element_rank(elements: &[SquareMatrix]) -> usize {
    if elements.is_empty() {
        return 0;
    }
    let rows = elements[0].as_slice().len();
    let m = nalgebra::DMatrix::from_fn(rows, elements.len(), |i, j| elements[j].as_slice()[i]);
    m.rank(1e-10)
}
