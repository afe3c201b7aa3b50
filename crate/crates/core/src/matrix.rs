//! Dense complex square matrices, Kronecker products, singular values and
//! (weighted) Schatten norms.
//!
//! Storage is row-major. Singular value decompositions are delegated to
//! `nalgebra`; everything else is done directly on the flat buffer since the
//! matrices handled here are small (at most a few hundred rows).

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Largest dimension accepted by the matrix kernel.
pub const MAX_DIM: usize = 4096;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 10_000;

#[derive(Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        SquareMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries; the length must be a perfect square.
    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("matrix dimension must be positive".into()));
        }
        if dim > MAX_DIM {
            return Err(Error::Domain(format!(
                "matrix dimension {dim} exceeds the supported maximum {MAX_DIM}"
            )));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = C64::new(v, 0.0);
            }
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// The matrix unit with a single one at `(row, col)`.
    pub fn unit(dim: usize, row: usize, col: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(row, col)] = ONE;
        m
    }

    /// Rank-one matrix `u v*`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i])
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn matmul(&self, rhs: &SquareMatrix) -> Result<SquareMatrix> {
        check_dims(self.dim, rhs.dim)?;
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(SquareMatrix { dim: n, data: out })
    }

    /// Multiplies on the left by a diagonal matrix given by its entries.
    pub fn diag_mul_left(&self, d: &[C64]) -> Result<SquareMatrix> {
        check_dims(self.dim, d.len())?;
        let n = self.dim;
        Ok(Self::from_fn(n, |i, j| d[i] * self.data[i * n + j]))
    }

    /// Multiplies on the right by a diagonal matrix given by its entries.
    pub fn diag_mul_right(&self, d: &[C64]) -> Result<SquareMatrix> {
        check_dims(self.dim, d.len())?;
        let n = self.dim;
        Ok(Self::from_fn(n, |i, j| self.data[i * n + j] * d[j]))
    }

    /// Kronecker product; the first factor indexes the most significant block.
    pub fn kron(&self, rhs: &SquareMatrix) -> SquareMatrix {
        let (na, nb) = (self.dim, rhs.dim);
        let n = na * nb;
        let mut out = vec![ZERO; n * n];
        for i in 0..na {
            for j in 0..na {
                let a = self.data[i * na + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..nb {
                    let row = (i * nb + k) * n + j * nb;
                    for l in 0..nb {
                        out[row + l] = a * rhs.data[k * nb + l];
                    }
                }
            }
        }
        SquareMatrix { dim: n, data: out }
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.data[i * n + j] == ZERO))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&z| z == ZERO)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> SquareMatrix {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        Self::from_fn(n, |i, j| m[(i, j)])
    }
}

#[inline]
fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &SquareMatrix {
    type Output = SquareMatrix;
    fn add(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in addition");
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &SquareMatrix {
    type Output = SquareMatrix;
    fn sub(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in subtraction");
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: &SquareMatrix) -> SquareMatrix {
        self.matmul(rhs).expect("dimension mismatch in product")
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SquareMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// JSON form: {"dim": n, "data": [[re, im], ...]} row-major. Hex-float strings
// such as "0x1.8p-1" are accepted in place of numbers on input.

#[derive(Serialize)]
struct MatrixOut<'a> {
    dim: usize,
    data: Vec<[f64; 2]>,
    #[serde(skip)]
    _marker: std::marker::PhantomData<&'a ()>,
}

#[derive(Deserialize)]
struct MatrixIn {
    dim: usize,
    data: Vec<[FloatLit; 2]>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FloatLit {
    Num(f64),
    Text(String),
}

impl FloatLit {
    fn value(&self) -> std::result::Result<f64, String> {
        match self {
            FloatLit::Num(v) => Ok(*v),
            FloatLit::Text(s) => parse_float_literal(s),
        }
    }
}

/// Parses a decimal or C99 hex-float literal (`[-]0x1.fffp-3`).
pub fn parse_float_literal(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) else {
        return t.parse::<f64>().map_err(|e| format!("bad float literal {s:?}: {e}"));
    };
    let (mantissa, exp) = match hex.find(['p', 'P']) {
        Some(i) => (&hex[..i], &hex[i + 1..]),
        None => (hex, "0"),
    };
    let exp: i32 = exp
        .parse()
        .map_err(|_| format!("bad hex-float exponent in {s:?}"))?;
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("empty hex-float mantissa in {s:?}"));
    }
    let digits = format!("{int_part}{frac_part}");
    if digits.len() > 15 {
        return Err(format!("hex-float mantissa too long in {s:?}"));
    }
    let bits = if digits.is_empty() {
        0
    } else {
        u64::from_str_radix(&digits, 16).map_err(|_| format!("bad hex digits in {s:?}"))?
    };
    let scale = exp - 4 * frac_part.len() as i32;
    let v = bits as f64 * 2f64.powi(scale);
    Ok(if neg { -v } else { v })
}

impl Serialize for SquareMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixOut {
            dim: self.dim,
            data: self.data.iter().map(|z| [z.re, z.im]).collect(),
            _marker: std::marker::PhantomData,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = MatrixIn::deserialize(deserializer)?;
        let data = raw
            .data
            .iter()
            .map(|[re, im]| Ok(C64::new(re.value()?, im.value()?)))
            .collect::<std::result::Result<Vec<_>, String>>()
            .map_err(D::Error::custom)?;
        SquareMatrix::from_vec(raw.dim, data).map_err(D::Error::custom)
    }
}

/// Strictly positive diagonal matrix, stored by its entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagonal {
    values: Vec<f64>,
}

impl Diagonal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("diagonal must have at least one entry".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!(
                "diagonal entries must be strictly positive, found {v}"
            )));
        }
        Ok(Diagonal { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kron(&self, rhs: &Diagonal) -> Diagonal {
        let values = self
            .values
            .iter()
            .flat_map(|&a| rhs.values.iter().map(move |&b| a * b))
            .collect();
        Diagonal { values }
    }

    pub fn to_matrix(&self) -> SquareMatrix {
        let v: Vec<C64> = self.values.iter().map(|&x| C64::new(x, 0.0)).collect();
        SquareMatrix::from_diagonal(&v)
    }

    /// Entries `values[k]^z` for a complex exponent.
    pub fn power_entries(&self, z: C64) -> Vec<C64> {
        self.values
            .iter()
            .map(|&v| (z * v.ln()).exp())
            .collect()
    }

    /// Real power `values[k]^s`.
    pub fn real_power_entries(&self, s: f64) -> Vec<C64> {
        self.values.iter().map(|&v| C64::new(v.powf(s), 0.0)).collect()
    }
}

/// Complex power of a positive diagonal matrix.
pub fn diag_power(w: &Diagonal, z: C64) -> SquareMatrix {
    SquareMatrix::from_diagonal(&w.power_entries(z))
}

/// Schatten exponent in `[1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            return Ok(Exponent::Infinity);
        }
        if p.is_nan() || p < 1.0 || !p.is_finite() {
            return Err(Error::Domain(format!("Schatten exponent must lie in [1, inf], got {p}")));
        }
        Ok(Exponent::Finite(p))
    }

    pub fn one() -> Self {
        Exponent::Finite(1.0)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// `1/p`, with `1/∞ = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// Hölder conjugate exponent.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(1.0) => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            t => {
                let p: f64 = t
                    .parse()
                    .map_err(|_| Error::Domain(format!("cannot parse exponent {s:?}")))?;
                Exponent::new(p)
            }
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match FloatLit::deserialize(d)? {
            FloatLit::Num(p) => Exponent::new(p).map_err(D::Error::custom),
            FloatLit::Text(t) => t.parse().map_err(D::Error::custom),
        }
    }
}

/// Which side the weight `A^{1/p}` multiplies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormSide {
    Plain,
    Left,
    Right,
}

impl fmt::Display for NormSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormSide::Plain => "plain",
            NormSide::Left => "left",
            NormSide::Right => "right",
        })
    }
}

impl std::str::FromStr for NormSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plain" => Ok(NormSide::Plain),
            "left" => Ok(NormSide::Left),
            "right" => Ok(NormSide::Right),
            other => Err(Error::Domain(format!(
                "side must be plain, left or right, got {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub p: Exponent,
    pub side: NormSide,
}

impl NormSpec {
    pub fn new(p: Exponent, side: NormSide) -> Self {
        NormSpec { p, side }
    }

    pub fn left(p: Exponent) -> Self {
        NormSpec::new(p, NormSide::Left)
    }

    pub fn right(p: Exponent) -> Self {
        NormSpec::new(p, NormSide::Right)
    }

    pub fn plain(p: Exponent) -> Self {
        NormSpec::new(p, NormSide::Plain)
    }
}

/// Singular values in nonincreasing order.
pub fn singular_values(x: &SquareMatrix) -> Result<Vec<f64>> {
    if x.dim == 1 {
        return Ok(vec![x.data[0].norm()]);
    }
    if x.dim == 2 {
        return Ok(singular_values_2x2(x));
    }
    let svd = nalgebra::linalg::SVD::try_new(x.to_nalgebra(), false, false, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericFailure("singular value decomposition did not converge".into()))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn singular_values_2x2(x: &SquareMatrix) -> Vec<f64> {
    let [a, b, c, d] = [x.data[0], x.data[1], x.data[2], x.data[3]];
    // eigenvalues of x*x, discriminant written without cancellation
    let p = a.norm_sqr() + c.norm_sqr();
    let q = b.norm_sqr() + d.norm_sqr();
    let off = (a.conj() * b + c.conj() * d).norm();
    let disc = (p - q).hypot(2.0 * off);
    let s1 = (0.5 * (p + q + disc)).sqrt();
    let det = (a * d - b * c).norm();
    let s2 = if s1 > 0.0 { (det / s1).min(s1) } else { 0.0 };
    vec![s1, s2]
}

/// Full SVD `x = U diag(s) V*`, singular values nonincreasing.
pub struct Svd {
    pub u: DMatrix<C64>,
    pub s: Vec<f64>,
    pub v_adj: DMatrix<C64>,
}

pub fn svd(x: &SquareMatrix) -> Result<Svd> {
    let raw = nalgebra::linalg::SVD::try_new(x.to_nalgebra(), true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericFailure("singular value decomposition did not converge".into()))?;
    let u = raw.u.expect("requested U");
    let v_t = raw.v_t.expect("requested V*");
    let n = x.dim;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw.singular_values[b].total_cmp(&raw.singular_values[a]));
    let s = order.iter().map(|&i| raw.singular_values[i]).collect();
    let u = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    let v_adj = DMatrix::from_fn(n, n, |i, j| v_t[(order[i], j)]);
    Ok(Svd { u, s, v_adj })
}

impl Svd {
    /// `U diag(f(s)) V*`.
    pub fn recompose(&self, f: impl Fn(usize, f64) -> f64) -> SquareMatrix {
        let n = self.s.len();
        let mut out = SquareMatrix::zeros(n);
        for k in 0..n {
            let w = f(k, self.s[k]);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let a = self.u[(i, k)] * w;
                for j in 0..n {
                    out.data[i * n + j] += a * self.v_adj[(k, j)];
                }
            }
        }
        out
    }

    /// Unitary polar factor `U V*`. Zero singular directions are paired by the
    /// full SVD bases, which amounts to completing them by the identity.
    pub fn polar_unitary(&self) -> SquareMatrix {
        self.recompose(|_, _| 1.0)
    }
}

pub fn schatten_from_singular_values(s: &[f64], p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => s.iter().copied().fold(0.0, f64::max),
        Exponent::Finite(1.0) => s.iter().sum(),
        Exponent::Finite(2.0) => s.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Exponent::Finite(p) => {
            let top = s.iter().copied().fold(0.0, f64::max);
            if top == 0.0 {
                return 0.0;
            }
            top * s.iter().map(|v| (v / top).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

pub fn schatten_norm(x: &SquareMatrix, p: Exponent) -> Result<f64> {
    if let Exponent::Finite(p) = p {
        if p == 2.0 {
            return Ok(x.frobenius_norm());
        }
    }
    Ok(schatten_from_singular_values(&singular_values(x)?, p))
}

/// Schatten norm after multiplying by `w^{1/p}` on the side selected by `spec`.
pub fn weighted_norm(x: &SquareMatrix, w: &Diagonal, spec: NormSpec) -> Result<f64> {
    check_dims(w.dim(), x.dim())?;
    let s = spec.p.reciprocal();
    if spec.side == NormSide::Plain || s == 0.0 {
        return schatten_norm(x, spec.p);
    }
    let d = w.real_power_entries(s);
    let y = match spec.side {
        NormSide::Left => x.diag_mul_right(&d)?,
        NormSide::Right => x.diag_mul_left(&d)?,
        NormSide::Plain => unreachable!(),
    };
    schatten_norm(&y, spec.p)
}
