//! Partial-sum projections and numerical lower bounds for their norms in
//! weighted Schatten spaces.
//!
//! A map `T` on `N_ν` is measured in the weighted norm `‖x W‖_p` (left) or
//! `‖W x‖_p` (right) with `W = A^{1/p}`. Conjugating by `W` turns this into the
//! plain Schatten-p norm of `T̃(y) = T(y W⁻¹) W` (resp. `W T(W⁻¹ y)`), which is
//! what the estimators work on. Every number they return is attained by an
//! explicit input, hence a certified lower bound for `‖T‖`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::Weight;
use crate::error::{Error, Result};
use crate::haar::{shell_positions, HaarSystem, RademacherQuad, Side};
use crate::matrix::{
    schatten_from_singular_values, svd, weighted_norm, Diagonal, Exponent,
    NormSide, NormSpec, SquareMatrix, C64, ZERO,
};

/// Default pass tolerance added to theoretical bounds.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Default level cap for certification runs.
pub const DEFAULT_LEVEL_CAP: usize = 4;

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

const SAMPLE_CHUNK: usize = 256;
const RESTART_STREAM_BASE: u64 = 1 << 40;

/// Anything with an analysis/synthesis pair over a spanning family.
pub trait ExpansionSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn analyze(&self, x: &SquareMatrix) -> Result<Vec<C64>>;
    fn synthesize(&self, coeffs: &[C64]) -> Result<SquareMatrix>;

    /// Keeps the first `m` coefficients.
    fn partial_sum(&self, m: usize, x: &SquareMatrix) -> Result<SquareMatrix> {
        if m > self.len() {
            return Err(Error::Domain(format!(
                "partial-sum index {m} exceeds system length {}",
                self.len()
            )));
        }
        let mut c = self.analyze(x)?;
        c[m..].fill(ZERO);
        self.synthesize(&c)
    }
}

impl ExpansionSystem for HaarSystem {
    fn dim(&self) -> usize {
        HaarSystem::dim(self)
    }
    fn len(&self) -> usize {
        HaarSystem::len(self)
    }
    fn analyze(&self, x: &SquareMatrix) -> Result<Vec<C64>> {
        HaarSystem::analyze(self, x)
    }
    fn synthesize(&self, coeffs: &[C64]) -> Result<SquareMatrix> {
        HaarSystem::synthesize(self, coeffs)
    }
}

/// Schur product of `x` with the mask of the first `m` shell-ordered units.
pub fn schur_project(level: usize, m: usize, x: &SquareMatrix) -> Result<SquareMatrix> {
    let n = 1usize << level;
    if x.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.dim(),
        });
    }
    schur_project_dim(m, x)
}

pub(crate) fn schur_project_dim(m: usize, x: &SquareMatrix) -> Result<SquareMatrix> {
    let n = x.dim();
    if m > n * n {
        return Err(Error::Domain(format!("m = {m} exceeds {}", n * n)));
    }
    let mut out = SquareMatrix::zeros(n);
    for (row, col) in shell_positions(n).into_iter().take(m) {
        out[(row, col)] = x[(row, col)];
    }
    Ok(out)
}

pub fn haar_partial_sum(sys: &HaarSystem, m: usize, x: &SquareMatrix) -> Result<SquareMatrix> {
    ExpansionSystem::partial_sum(sys, m, x)
}

/// Dense matrix of a linear map on `n × n` matrices acting on row-major
/// vectorizations.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    n: usize,
    mat: DMatrix<C64>,
}

impl LinearOperator {
    pub fn from_map(n: usize, f: impl Fn(&SquareMatrix) -> Result<SquareMatrix>) -> Result<Self> {
        let nn = n * n;
        let mut mat = DMatrix::zeros(nn, nn);
        for c in 0..nn {
            let y = f(&SquareMatrix::unit(n, c / n, c % n))?;
            for (r, z) in y.as_slice().iter().enumerate() {
                mat[(r, c)] = *z;
            }
        }
        Ok(LinearOperator { n, mat })
    }

    pub fn identity(n: usize) -> Self {
        LinearOperator {
            n,
            mat: DMatrix::identity(n * n, n * n),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn apply(&self, x: &SquareMatrix) -> SquareMatrix {
        assert_eq!(x.dim(), self.n);
        let v = DVector::from_column_slice(x.as_slice());
        let y = &self.mat * v;
        SquareMatrix::from_vec(self.n, y.as_slice().to_vec()).expect("square output")
    }

    /// Adjoint for the Hilbert–Schmidt pairing `tr(a* b)`.
    pub fn apply_adjoint(&self, z: &SquareMatrix) -> SquareMatrix {
        assert_eq!(z.dim(), self.n);
        let v = DVector::from_column_slice(z.as_slice());
        let y = self.mat.ad_mul(&v);
        SquareMatrix::from_vec(self.n, y.as_slice().to_vec()).expect("square output")
    }

    /// `x ↦ T(x*)*` as an operator.
    pub fn adjoint_conjugated(&self) -> LinearOperator {
        let n = self.n;
        let nn = n * n;
        let t = |r: usize| (r % n) * n + r / n;
        let mat = DMatrix::from_fn(nn, nn, |r, c| self.mat[(t(r), t(c))].conj());
        LinearOperator { n, mat }
    }
}

#[derive(Clone, Copy)]
pub enum MapKind<'a> {
    /// Partial sum of the first `m` terms of an expansion system.
    Basis {
        system: &'a dyn ExpansionSystem,
        m: usize,
    },
    /// Schur mask of the first `m` shell-ordered matrix units.
    Schur { dim: usize, m: usize },
}

/// A partial-sum projection with the weighted norm it is measured in.
#[derive(Clone)]
pub struct PartialSumMap<'a> {
    pub kind: MapKind<'a>,
    pub spec: NormSpec,
    pub density: Diagonal,
}

impl<'a> PartialSumMap<'a> {
    pub fn haar(sys: &'a HaarSystem, m: usize, spec: NormSpec) -> Result<Self> {
        Self::basis(sys, sys.weight().density().clone(), m, spec)
    }

    pub fn basis(
        system: &'a dyn ExpansionSystem,
        density: Diagonal,
        m: usize,
        spec: NormSpec,
    ) -> Result<Self> {
        if m > system.len() {
            return Err(Error::Domain(format!(
                "m = {m} exceeds system length {}",
                system.len()
            )));
        }
        if density.dim() != system.dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                found: density.dim(),
            });
        }
        Ok(PartialSumMap {
            kind: MapKind::Basis { system, m },
            spec,
            density,
        })
    }

    pub fn schur(weight: &Weight, m: usize, spec: NormSpec) -> Result<Self> {
        let dim = weight.dim();
        if m > dim * dim {
            return Err(Error::Domain(format!("m = {m} exceeds {}", dim * dim)));
        }
        Ok(PartialSumMap {
            kind: MapKind::Schur { dim, m },
            spec,
            density: weight.density().clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn apply(&self, x: &SquareMatrix) -> Result<SquareMatrix> {
        match self.kind {
            MapKind::Basis { system, m } => system.partial_sum(m, x),
            MapKind::Schur { m, .. } => schur_project_dim(m, x),
        }
    }

    /// Weighted norm of `x` in this map's norm.
    pub fn norm(&self, x: &SquareMatrix) -> Result<f64> {
        weighted_norm(x, &self.density, self.spec)
    }

    /// The map conjugated into plain Schatten-p coordinates.
    pub fn weighted_operator(&self) -> Result<LinearOperator> {
        let n = self.dim();
        let s = self.spec.p.reciprocal();
        let w: Vec<f64> = match self.spec.side {
            NormSide::Plain => vec![1.0; n],
            _ => self.density.values().iter().map(|v| v.powf(s)).collect(),
        };
        let side = self.spec.side;
        LinearOperator::from_map(n, |unit| {
            let (k, l) = first_nonzero(unit);
            let pre = match side {
                NormSide::Left => 1.0 / w[l],
                NormSide::Right => 1.0 / w[k],
                NormSide::Plain => 1.0,
            };
            let mut y = self.apply(&unit.scale(C64::new(pre, 0.0)))?;
            for i in 0..n {
                for j in 0..n {
                    let post = match side {
                        NormSide::Left => w[j],
                        NormSide::Right => w[i],
                        NormSide::Plain => 1.0,
                    };
                    y[(i, j)] *= post;
                }
            }
            Ok(y)
        })
    }
}

fn first_nonzero(unit: &SquareMatrix) -> (usize, usize) {
    let n = unit.dim();
    let idx = unit
        .as_slice()
        .iter()
        .position(|z| *z != ZERO)
        .expect("matrix unit");
    (idx / n, idx % n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sampling,
    PolarAscent,
    GridOracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sampling => "sampling",
            Method::PolarAscent => "polar_ascent",
            Method::GridOracle => "grid_oracle",
        })
    }
}

/// Which estimators run and with how much effort. Output is a deterministic
/// function of these fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationStrategy {
    /// Random trial inputs (rank-one; plus Gaussian ones when `p > 1`).
    pub samples: usize,
    /// Independent alternating-ascent restarts.
    pub restarts: usize,
    /// Iteration cap per restart.
    pub iterations: usize,
    /// Exhaustive sphere grid, only for 2×2 maps at `p = 1`.
    pub grid_oracle: bool,
    pub seed: u64,
}

impl Default for EstimationStrategy {
    fn default() -> Self {
        EstimationStrategy {
            samples: 10_000,
            restarts: 50,
            iterations: 200,
            grid_oracle: false,
            seed: DEFAULT_SEED,
        }
    }
}

impl EstimationStrategy {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sampling_only(samples: usize, seed: u64) -> Self {
        EstimationStrategy {
            samples,
            restarts: 0,
            iterations: 0,
            grid_oracle: false,
            seed,
        }
    }

    pub fn polar_only(restarts: usize, iterations: usize, seed: u64) -> Self {
        EstimationStrategy {
            samples: 0,
            restarts,
            iterations,
            grid_oracle: false,
            seed,
        }
    }

    pub fn grid_only() -> Self {
        EstimationStrategy {
            samples: 0,
            restarts: 0,
            iterations: 0,
            grid_oracle: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Estimator that attained `value`.
    pub method: Method,
    /// Number of objective evaluations spent.
    pub evaluations: usize,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_unit_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

fn random_gaussian<R: Rng>(n: usize, rng: &mut R) -> SquareMatrix {
    SquareMatrix::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Unit-norm trial input number `i` of a sampling stream.
fn trial_input<R: Rng>(n: usize, p: Exponent, i: usize, rng: &mut R) -> Result<SquareMatrix> {
    let rank_one = p == Exponent::one() || i.is_multiple_of(2);
    if rank_one {
        let u = random_unit_vector(n, rng);
        let v = random_unit_vector(n, rng);
        let x = SquareMatrix::outer(&u, &v);
        return Ok(x);
    }
    let x = random_gaussian(n, rng);
    let norm = crate::matrix::schatten_norm(&x, p)?;
    Ok(x.scale(C64::new(1.0 / norm, 0.0)))
}

/// `‖y‖_p`; inputs of the estimators are already unit-norm.
fn norm_p(y: &SquareMatrix, p: Exponent) -> Result<f64> {
    crate::matrix::schatten_norm(y, p)
}

/// Element `z` with `‖z‖_{p'} = 1` and `Re tr(z* y) = ‖y‖_p` (p' conjugate).
fn norming_element(y: &SquareMatrix, p: Exponent) -> Result<SquareMatrix> {
    let d = svd(y)?;
    let out = match p {
        Exponent::Finite(1.0) => d.polar_unitary(),
        Exponent::Infinity => d.recompose(|k, _| if k == 0 { 1.0 } else { 0.0 }),
        Exponent::Finite(p) => {
            let norm = schatten_from_singular_values(&d.s, Exponent::Finite(p));
            if norm == 0.0 {
                d.polar_unitary().scale(C64::new(1.0 / (d.s.len() as f64).powf(1.0 - 1.0 / p), 0.0))
            } else {
                d.recompose(|_, s| (s / norm).powf(p - 1.0))
            }
        }
    };
    Ok(out)
}

/// Best value over `count` random unit inputs drawn from `seed`.
pub fn sample_operator_norm(
    op: &LinearOperator,
    p: Exponent,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let n = op.dim();
    let chunks = count.div_ceil(SAMPLE_CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let mut rng = stream_rng(seed, c as u64);
            let mut best = 0.0f64;
            let start = c * SAMPLE_CHUNK;
            for i in start..count.min(start + SAMPLE_CHUNK) {
                let x = trial_input(n, p, i, &mut rng)?;
                best = best.max(norm_p(&op.apply(&x), p)?);
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(best.into_iter().fold(0.0, f64::max))
}

/// One alternating ascent run from the given unit-norm start: the
/// objective `‖T(x)‖_p` never decreases between iterations.
pub fn polar_ascent_from(
    op: &LinearOperator,
    p: Exponent,
    start: SquareMatrix,
    iterations: usize,
) -> Result<(f64, usize)> {
    let q = p.conjugate();
    let mut x = start;
    let mut value = norm_p(&op.apply(&x), p)?;
    let mut evals = 1;
    for _ in 0..iterations {
        let y = op.apply(&x);
        if y.max_abs() == 0.0 {
            break;
        }
        let z = norming_element(&y, p)?;
        let b = op.apply_adjoint(&z);
        if b.max_abs() == 0.0 {
            break;
        }
        let next = norming_element(&b, q)?;
        let next_value = norm_p(&op.apply(&next), p)?;
        evals += 1;
        let gain = next_value - value;
        if next_value > value {
            value = next_value;
            x = next;
        }
        if gain <= 1e-10 * value.max(1e-300) {
            break;
        }
    }
    Ok((value, evals))
}

pub fn polar_ascent(
    op: &LinearOperator,
    p: Exponent,
    restarts: usize,
    iterations: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let n = op.dim();
    let runs = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, RESTART_STREAM_BASE + r as u64);
            let start = trial_input(n, p, r, &mut rng)?;
            polar_ascent_from(op, p, start, iterations)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(runs
        .into_iter()
        .fold((0.0, 0), |(v, e), (rv, re)| (v.max(rv), e + re)))
}

/// Exhaustive search over rank-one inputs `u v*` of a map on 2×2 matrices,
/// with `u = (cos θ, e^{iφ} sin θ)` and likewise for `v`. At `p = 1` the
/// rank-one matrices are the extreme points of the unit ball, so this is a
/// brute-force value of the norm up to grid resolution. A coarse grid is
/// refined around its best cells in three further stages.
pub fn grid_oracle(op: &LinearOperator) -> Result<(f64, usize)> {
    if op.dim() != 2 {
        return Err(Error::Domain("the grid oracle handles 2x2 maps only".into()));
    }
    let mat: [[C64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| op.mat[(r, c)]));
    let eval = |t: &[f64; 4]| -> f64 {
        let u = [C64::new(t[0].cos(), 0.0), C64::from_polar(t[0].sin(), t[1])];
        let v = [C64::new(t[2].cos(), 0.0), C64::from_polar(t[2].sin(), t[3])];
        let x = [
            u[0] * v[0].conj(),
            u[0] * v[1].conj(),
            u[1] * v[0].conj(),
            u[1] * v[1].conj(),
        ];
        let mut y = [ZERO; 4];
        for (r, row) in mat.iter().enumerate() {
            y[r] = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        }
        let f2: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        let det = (y[0] * y[3] - y[1] * y[2]).norm();
        (f2 + 2.0 * det).max(0.0).sqrt()
    };

    const COARSE: usize = 24;
    const FINE: usize = 15;
    const KEEP: [usize; 3] = [6, 3, 2];
    let theta_step = FRAC_PI_2 / (COARSE - 1) as f64;
    let phi_step = 2.0 * PI / COARSE as f64;

    let mut evals = 0usize;
    let mut scored: Vec<(f64, [f64; 4])> = Vec::with_capacity(COARSE.pow(4));
    for a in 0..COARSE {
        for b in 0..COARSE {
            for c in 0..COARSE {
                for d in 0..COARSE {
                    let t = [
                        a as f64 * theta_step,
                        b as f64 * phi_step,
                        c as f64 * theta_step,
                        d as f64 * phi_step,
                    ];
                    scored.push((eval(&t), t));
                }
            }
        }
    }
    evals += scored.len();
    let mut steps = [theta_step, phi_step];
    for keep in KEEP {
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let centers: Vec<[f64; 4]> = scored.iter().take(keep).map(|s| s.1).collect();
        let best = scored[0];
        scored.clear();
        scored.push(best);
        let half = (FINE / 2) as f64;
        let local = [steps[0] / half, steps[1] / half];
        for center in centers {
            for a in 0..FINE {
                for b in 0..FINE {
                    for c in 0..FINE {
                        for d in 0..FINE {
                            let o = [a, b, c, d].map(|i| i as f64 - half);
                            let t = [
                                (center[0] + o[0] * local[0]).clamp(0.0, FRAC_PI_2),
                                center[1] + o[1] * local[1],
                                (center[2] + o[2] * local[0]).clamp(0.0, FRAC_PI_2),
                                center[3] + o[3] * local[1],
                            ];
                            scored.push((eval(&t), t));
                        }
                    }
                }
            }
        }
        evals += scored.len() - 1;
        steps = local;
    }
    let best = scored.iter().map(|s| s.0).fold(0.0, f64::max);
    Ok((best, evals))
}

/// Certified lower bound for the norm of `op` on plain Schatten-p.
pub fn estimate_operator_norm(
    op: &LinearOperator,
    p: Exponent,
    strategy: &EstimationStrategy,
) -> Result<Estimate> {
    let mut best = Estimate {
        value: 0.0,
        method: Method::Sampling,
        evaluations: 0,
    };
    let mut consider = |value: f64, method: Method, evals: usize| {
        best.evaluations += evals;
        if value > best.value {
            best.value = value;
            best.method = method;
        }
    };
    if strategy.samples > 0 {
        let v = sample_operator_norm(op, p, strategy.samples, strategy.seed)?;
        consider(v, Method::Sampling, strategy.samples);
    }
    if strategy.restarts > 0 {
        let (v, e) = polar_ascent(op, p, strategy.restarts, strategy.iterations, strategy.seed)?;
        consider(v, Method::PolarAscent, e);
    }
    if strategy.grid_oracle {
        if p != Exponent::one() {
            return Err(Error::Domain(
                "the grid oracle is exact only for p = 1".into(),
            ));
        }
        let (v, e) = grid_oracle(op)?;
        consider(v, Method::GridOracle, e);
    }
    Ok(best)
}

/// Certified lower bound for `sup ‖T x‖ / ‖x‖` in the map's weighted norm.
pub fn estimate_map_norm(map: &PartialSumMap<'_>, strategy: &EstimationStrategy) -> Result<Estimate> {
    estimate_operator_norm(&map.weighted_operator()?, map.spec.p, strategy)
}

/// Per-level upper bounds `c_1, …, c_ν` for the basis constant:
/// `c_1 = Σ_j ‖r_j‖ ‖r_j‖_{p,side}` and
/// `c_{ν+1} = max{c_ν ‖r_0‖², ‖r_0‖² + 2 Σ_{q≥1} ‖r_q‖²}`, where step ν+1 uses
/// its own quadruple.
pub fn theoretical_bound(quads: &[RademacherQuad], p: Exponent) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(quads.len());
    for (level, quad) in quads.iter().enumerate() {
        let ops = quad
            .r()
            .iter()
            .map(|r| crate::matrix::schatten_norm(r, Exponent::Infinity))
            .collect::<Result<Vec<f64>>>()?;
        if level == 0 {
            let w = Weight::new(quad.alpha(), 1)?;
            let spec = match quad.side() {
                Side::Left => NormSpec::left(p),
                Side::Right => NormSpec::right(p),
            };
            let mut c = 0.0;
            for (r, op) in quad.r().iter().zip(&ops) {
                c += op * weighted_norm(r, w.density(), spec)?;
            }
            out.push(c);
        } else {
            let r0 = ops[0] * ops[0];
            let tail: f64 = ops[1..].iter().map(|v| v * v).sum();
            let prev = out[level - 1];
            out.push((prev * r0).max(r0 + 2.0 * tail));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Inductive estimate for Haar systems.
    Inductive,
    /// The constant 2 for shell-ordered matrix units.
    Schur,
    /// Product-system certificate `3 c_A c_B`.
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub m: usize,
    pub estimate: f64,
    pub bound: f64,
    pub method: Option<Method>,
    pub samples: usize,
    pub seed: u64,
    pub pass: bool,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub system: String,
    pub alpha: String,
    pub level: String,
    pub p: Exponent,
    pub side: NormSide,
    pub bound_kind: BoundKind,
    pub rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<serde_json::Value>,
}

impl NormReport {
    /// True when every row passes; `m = 0` rows are excluded.
    pub fn passed(&self) -> bool {
        self.rows.iter().filter(|r| r.m > 0).all(|r| r.pass)
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn max_estimate(&self) -> f64 {
        self.rows.iter().map(|r| r.estimate).fold(0.0, f64::max)
    }

    /// CSV columns: alpha, level, p, side, m, estimate, bound, method,
    /// samples, seed, pass.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "alpha", "level", "p", "side", "m", "estimate", "bound", "method", "samples", "seed",
            "pass",
        ])?;
        for row in &self.rows {
            out.write_record([
                self.alpha.clone(),
                self.level.clone(),
                self.p.to_string(),
                self.side.to_string(),
                row.m.to_string(),
                row.estimate.to_string(),
                row.bound.to_string(),
                row.method.map_or_else(|| "none".to_string(), |m| m.to_string()),
                row.samples.to_string(),
                row.seed.to_string(),
                row.pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    /// Explicit partial-sum indices; `None` uses [`default_schedule`].
    pub schedule: Option<Vec<usize>>,
    pub tolerance: f64,
    pub level_cap: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            schedule: None,
            tolerance: DEFAULT_TOLERANCE,
            level_cap: DEFAULT_LEVEL_CAP,
        }
    }
}

/// All `m` for systems with at most 16 elements; otherwise powers of two,
/// block boundaries `q·4^μ`, and the full length.
pub fn default_schedule(len: usize) -> Vec<usize> {
    if len <= 16 {
        return (0..=len).collect();
    }
    let mut ms = vec![len];
    let mut p = 1;
    while p <= len {
        ms.push(p);
        p *= 2;
    }
    let mut block = 1;
    while block < len {
        for q in 1..4 {
            if q * block <= len {
                ms.push(q * block);
            }
        }
        block *= 4;
    }
    ms.sort_unstable();
    ms.dedup();
    ms
}

pub(crate) fn run_rows(
    schedule: &[usize],
    bound: f64,
    strategy: &EstimationStrategy,
    tolerance: f64,
    mut estimate: impl FnMut(usize) -> Result<Estimate>,
) -> Vec<ReportRow> {
    schedule
        .iter()
        .map(|&m| {
            if m == 0 {
                return ReportRow {
                    m,
                    estimate: 0.0,
                    bound,
                    method: None,
                    samples: 0,
                    seed: strategy.seed,
                    pass: true,
                    tolerance,
                    error: None,
                };
            }
            match estimate(m) {
                Ok(e) => ReportRow {
                    m,
                    estimate: e.value,
                    bound,
                    method: Some(e.method),
                    samples: e.evaluations,
                    seed: strategy.seed,
                    pass: e.value <= bound + tolerance,
                    tolerance,
                    error: None,
                },
                Err(err) => ReportRow {
                    m,
                    estimate: f64::NAN,
                    bound,
                    method: None,
                    samples: 0,
                    seed: strategy.seed,
                    pass: false,
                    tolerance,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect()
}

fn check_schedule(schedule: &[usize], len: usize) -> Result<()> {
    if let Some(&m) = schedule.iter().find(|&&m| m > len) {
        return Err(Error::Domain(format!("schedule entry {m} exceeds {len}")));
    }
    Ok(())
}

/// Estimates every scheduled partial-sum norm of a Haar system and compares
/// it with the inductive bound.
pub fn certify(
    sys: &HaarSystem,
    spec: NormSpec,
    strategy: &EstimationStrategy,
    opts: &CertifyOptions,
) -> Result<NormReport> {
    if sys.level() > opts.level_cap {
        return Err(Error::ScaleCap(format!(
            "level {} exceeds the certification cap {}",
            sys.level(),
            opts.level_cap
        )));
    }
    let matches = match (sys.side(), spec.side) {
        (Side::Left, NormSide::Left) | (Side::Right, NormSide::Right) => true,
        (_, NormSide::Plain) => sys.alpha().lambda() == 1.0,
        _ => false,
    };
    if !matches {
        return Err(Error::Domain(format!(
            "a {} Haar system is certified in the {} norm only",
            sys.side(),
            sys.side()
        )));
    }
    let schedule = opts
        .schedule
        .clone()
        .unwrap_or_else(|| default_schedule(sys.len()));
    check_schedule(&schedule, sys.len())?;
    let bound = *theoretical_bound(sys.quads(), spec.p)?
        .last()
        .expect("at least one level");
    let rows = run_rows(&schedule, bound, strategy, opts.tolerance, |m| {
        estimate_map_norm(&PartialSumMap::haar(sys, m, spec)?, strategy)
    });
    Ok(NormReport {
        system: "haar".into(),
        alpha: sys.alpha().to_string(),
        level: sys.level().to_string(),
        p: spec.p,
        side: spec.side,
        bound_kind: BoundKind::Inductive,
        rows,
        config: None,
    })
}

/// Matrix-unit partial sums (Schur masks) against the constant 2.
pub fn certify_schur(
    weight: &Weight,
    spec: NormSpec,
    strategy: &EstimationStrategy,
    opts: &CertifyOptions,
) -> Result<NormReport> {
    if weight.level() > opts.level_cap {
        return Err(Error::ScaleCap(format!(
            "level {} exceeds the certification cap {}",
            weight.level(),
            opts.level_cap
        )));
    }
    let len = weight.dim() * weight.dim();
    let schedule = opts.schedule.clone().unwrap_or_else(|| default_schedule(len));
    check_schedule(&schedule, len)?;
    let rows = run_rows(&schedule, 2.0, strategy, opts.tolerance, |m| {
        estimate_map_norm(&PartialSumMap::schur(weight, m, spec)?, strategy)
    });
    Ok(NormReport {
        system: "schur".into(),
        alpha: weight.alpha().to_string(),
        level: weight.level().to_string(),
        p: spec.p,
        side: spec.side,
        bound_kind: BoundKind::Schur,
        rows,
        config: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Alpha;
    use approx::assert_abs_diff_eq;

    fn third() -> Alpha {
        Alpha::from_ratio(1, 3).unwrap()
    }

    fn quick() -> EstimationStrategy {
        EstimationStrategy {
            samples: 400,
            restarts: 6,
            iterations: 60,
            grid_oracle: false,
            seed: 7,
        }
    }

    #[test]
    fn schur_project_edges() {
        let x = SquareMatrix::from_fn(4, |i, j| C64::new(i as f64 + 1.0, j as f64));
        assert_eq!(schur_project(2, 16, &x).unwrap(), x);
        assert!(schur_project(2, 0, &x).unwrap().is_zero());
        assert!(schur_project(2, 17, &x).is_err());
        let y = schur_project(2, 2, &x).unwrap();
        assert_eq!(y[(0, 0)], x[(0, 0)]);
        assert_eq!(y[(0, 1)], x[(0, 1)]);
        assert_eq!(y[(1, 1)], ZERO);
    }

    #[test]
    fn bounds_for_standard_quads() {
        let q = RademacherQuad::standard(Alpha::half(), Side::Left);
        let b = theoretical_bound(&vec![q; 3], Exponent::one()).unwrap();
        assert_abs_diff_eq!(b[0], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[1], 7.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[2], 7.0, epsilon = 1e-14);
        let q = RademacherQuad::standard(third(), Side::Left);
        let b = theoretical_bound(&vec![q; 3], Exponent::one()).unwrap();
        assert_abs_diff_eq!(b[0], 14.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[1], 11.0, epsilon = 1e-13);
        let q = RademacherQuad::standard(third(), Side::Right);
        let b = theoretical_bound(&vec![q; 2], Exponent::one()).unwrap();
        assert_abs_diff_eq!(b[0], 14.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn haar_partial_sum_edges() {
        let sys = HaarSystem::standard(third(), 2, Side::Left).unwrap();
        let w = sys.weight();
        let x = SquareMatrix::from_fn(4, |i, j| C64::new((i * 3 + j) as f64 * 0.1, 1.0 - j as f64));
        assert!(haar_partial_sum(&sys, 16, &x).unwrap().max_abs_diff(&x) < 1e-12);
        let one = haar_partial_sum(&sys, 1, &x).unwrap();
        let expect = SquareMatrix::identity(4).scale(w.state(&x).unwrap());
        assert!(one.max_abs_diff(&expect) < 1e-13);
        assert!(haar_partial_sum(&sys, 17, &x).is_err());
    }

    #[test]
    fn identity_map_estimates_one() {
        let sys = HaarSystem::standard(third(), 1, Side::Left).unwrap();
        for p in [Exponent::one(), Exponent::Finite(3.0), Exponent::Infinity] {
            let map = PartialSumMap::haar(&sys, 4, NormSpec::left(p)).unwrap();
            let e = estimate_map_norm(&map, &quick()).unwrap();
            assert!((e.value - 1.0).abs() < 1e-9, "{p}: {}", e.value);
        }
    }

    #[test]
    fn weighted_operator_matches_direct_norm_ratio() {
        let sys = HaarSystem::standard(third(), 2, Side::Left).unwrap();
        let spec = NormSpec::left(Exponent::Finite(3.0));
        let map = PartialSumMap::haar(&sys, 6, spec).unwrap();
        let op = map.weighted_operator().unwrap();
        let w = sys.weight();
        let wp: Vec<C64> = w.density().real_power_entries(1.0 / 3.0);
        let winv: Vec<C64> = w.density().real_power_entries(-1.0 / 3.0);
        let y = SquareMatrix::from_fn(4, |i, j| C64::new((i as f64).sin() + j as f64, 0.3 * i as f64));
        let x = y.diag_mul_right(&winv).unwrap();
        let direct = map.apply(&x).unwrap().diag_mul_right(&wp).unwrap();
        assert!(op.apply(&y).max_abs_diff(&direct) < 1e-12);
        let ratio = map.norm(&map.apply(&x).unwrap()).unwrap() / map.norm(&x).unwrap();
        let plain = norm_p(&op.apply(&y), spec.p).unwrap() / norm_p(&y, spec.p).unwrap();
        assert_abs_diff_eq!(ratio, plain, epsilon = 1e-12);
    }

    #[test]
    fn polar_ascent_is_monotone_and_beats_its_start() {
        let sys = HaarSystem::standard(third(), 2, Side::Left).unwrap();
        let map = PartialSumMap::haar(&sys, 5, NormSpec::left(Exponent::one())).unwrap();
        let op = map.weighted_operator().unwrap();
        let mut rng = stream_rng(1, 0);
        let start = trial_input(4, Exponent::one(), 0, &mut rng).unwrap();
        let v0 = norm_p(&op.apply(&start), Exponent::one()).unwrap();
        let (v, _) = polar_ascent_from(&op, Exponent::one(), start, 100).unwrap();
        assert!(v >= v0);
    }

    #[test]
    fn sampling_prefix_monotone() {
        let sys = HaarSystem::standard(third(), 2, Side::Left).unwrap();
        let map = PartialSumMap::haar(&sys, 9, NormSpec::left(Exponent::one())).unwrap();
        let op = map.weighted_operator().unwrap();
        let a = sample_operator_norm(&op, Exponent::one(), 300, 11).unwrap();
        let b = sample_operator_norm(&op, Exponent::one(), 900, 11).unwrap();
        assert!(a <= b);
    }

    #[test]
    fn grid_oracle_rejects_larger_maps_and_other_p() {
        let op = LinearOperator::identity(4);
        assert!(grid_oracle(&op).is_err());
        let op = LinearOperator::identity(2);
        let strat = EstimationStrategy::grid_only();
        assert!(estimate_operator_norm(&op, Exponent::Finite(2.0), &strat).is_err());
        let e = estimate_operator_norm(&op, Exponent::one(), &strat).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_shapes() {
        assert_eq!(default_schedule(4), vec![0, 1, 2, 3, 4]);
        assert_eq!(
            default_schedule(64),
            vec![1, 2, 3, 4, 8, 12, 16, 32, 48, 64]
        );
    }

    #[test]
    fn certify_rejects_mismatched_sides() {
        let sys = HaarSystem::standard(third(), 1, Side::Left).unwrap();
        let r = certify(&sys, NormSpec::right(Exponent::one()), &quick(), &CertifyOptions::default());
        assert!(r.is_err());
    }

    #[test]
    fn csv_layout() {
        let sys = HaarSystem::standard(Alpha::half(), 1, Side::Left).unwrap();
        let opts = CertifyOptions {
            schedule: Some(vec![0, 4]),
            ..Default::default()
        };
        let rep = certify(&sys, NormSpec::left(Exponent::one()), &quick(), &opts).unwrap();
        let csv = rep.to_csv_string().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "alpha,level,p,side,m,estimate,bound,method,samples,seed,pass"
        );
        assert!(lines.next().unwrap().starts_with("1/2,1,1,left,0,0,4,none,0,7,true"));
        assert!(rep.passed());
    }
}
