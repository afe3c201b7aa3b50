//! Product states on the dyadic matrix tower `N_ν = M_{2^ν}`.
//!
//! The density of the state at level ν is the ν-fold Kronecker power of
//! `diag(α, 1-α)`, so diagonal entry `k` equals `α^{ν-z(k)} (1-α)^{z(k)}` with
//! `z(k)` the number of one bits of `k` (most significant bit first). Only
//! `α ∈ (0, 1/2]` is admitted; the mirror `α ↦ 1-α` gives the same algebra
//! with the diagonal reversed and is not modelled separately.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{Diagonal, SquareMatrix, C64, ZERO};

/// Largest level accepted when building weights.
pub const MAX_LEVEL: usize = 12;

/// The bias parameter α, kept as an exact ratio when it was given as one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alpha {
    value: f64,
    ratio: Option<(u64, u64)>,
}

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        let a = Alpha { value, ratio: None };
        a.validate()?;
        Ok(a)
    }

    pub fn from_ratio(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("alpha denominator must be nonzero".into()));
        }
        let g = gcd(num, den);
        let (num, den) = (num / g.max(1), den / g.max(1));
        let a = Alpha {
            value: num as f64 / den as f64,
            ratio: Some((num, den)),
        };
        a.validate()?;
        Ok(a)
    }

    pub fn half() -> Self {
        Alpha {
            value: 0.5,
            ratio: Some((1, 2)),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.ratio {
            Some((n, d)) => n > 0 && 2 * (n as u128) <= d as u128,
            None => self.value.is_finite() && self.value > 0.0 && self.value <= 0.5,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("alpha must lie in (0, 1/2], got {self}")))
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn ratio(&self) -> Option<(u64, u64)> {
        self.ratio
    }

    /// `λ = α / (1 - α)`.
    pub fn lambda(&self) -> f64 {
        match self.ratio {
            Some((n, d)) => n as f64 / (d - n) as f64,
            None => self.value / (1.0 - self.value),
        }
    }

    /// `α^zeros (1-α)^ones`, computed exactly-then-rounded for small ratios.
    pub fn digit_product(&self, zeros: u32, ones: u32) -> f64 {
        if let Some((n, d)) = self.ratio {
            let num = (n as u128)
                .checked_pow(zeros)
                .and_then(|a| ((d - n) as u128).checked_pow(ones).and_then(|b| a.checked_mul(b)));
            let den = (d as u128).checked_pow(zeros + ones);
            if let (Some(num), Some(den)) = (num, den) {
                if num < (1u128 << 100) && den < (1u128 << 100) {
                    return num as f64 / den as f64;
                }
            }
        }
        self.value.powi(zeros as i32) * (1.0 - self.value).powi(ones as i32)
    }

    /// The two-point density `diag(α, 1-α)`.
    pub fn base_density(&self) -> [f64; 2] {
        [self.digit_product(1, 0), self.digit_product(0, 1)]
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ratio {
            Some((n, d)) if d <= 1_000_000 => write!(f, "{n}/{d}"),
            _ => write!(f, "{}", self.value),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    /// Accepts `"1/3"` or a decimal literal; decimals with at most 18
    /// fractional digits are stored as exact ratios.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: u64 = n
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad alpha fraction {s:?}")))?;
            let d: u64 = d
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad alpha fraction {s:?}")))?;
            return Alpha::from_ratio(n, d);
        }
        let value: f64 = t
            .parse()
            .map_err(|_| Error::Domain(format!("bad alpha literal {s:?}")))?;
        if let Some((int, frac)) = t.split_once('.') {
            if int.chars().all(|c| c.is_ascii_digit())
                && frac.chars().all(|c| c.is_ascii_digit())
                && frac.len() <= 18
                && int.len() <= 1
            {
                let den = 10u64.pow(frac.len() as u32);
                let num = int.parse::<u64>().unwrap_or(0) * den + frac.parse::<u64>().unwrap_or(0);
                return Alpha::from_ratio(num, den);
            }
        }
        Alpha::new(value)
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.ratio {
            Some((_, d)) if d <= 1_000_000 => s.serialize_str(&self.to_string()),
            _ => s.serialize_f64(self.value),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Alpha::new(v).map_err(D::Error::custom),
            Raw::Text(t) => t.parse().map_err(D::Error::custom),
        }
    }
}

/// The state density `A_ν` at a given level.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    alpha: Alpha,
    level: usize,
    density: Diagonal,
}

impl Weight {
    pub fn new(alpha: Alpha, level: usize) -> Result<Self> {
        if level == 0 || level > MAX_LEVEL {
            return Err(Error::Domain(format!(
                "level must lie in 1..={MAX_LEVEL}, got {level}"
            )));
        }
        let n = 1usize << level;
        let values = (0..n)
            .map(|k| {
                let ones = (k as u64).count_ones();
                alpha.digit_product(level as u32 - ones, ones)
            })
            .collect();
        Ok(Weight {
            alpha,
            level,
            density: Diagonal::new(values)?,
        })
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        1 << self.level
    }

    pub fn density(&self) -> &Diagonal {
        &self.density
    }

    pub fn lambda(&self) -> f64 {
        self.alpha.lambda()
    }

    pub fn at_level(&self, level: usize) -> Result<Weight> {
        Weight::new(self.alpha, level)
    }

    /// `ρ_ν(x) = Tr(x A_ν)`.
    pub fn state(&self, x: &SquareMatrix) -> Result<C64> {
        state_with_density(self.density.values(), x)
    }
}

#[derive(Serialize, Deserialize)]
struct WeightJson {
    alpha: Alpha,
    level: usize,
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WeightJson {
            alpha: self.alpha,
            level: self.level,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = WeightJson::deserialize(d)?;
        Weight::new(raw.alpha, raw.level).map_err(D::Error::custom)
    }
}

/// `Tr(x D)` for a diagonal density given by its entries.
pub fn state_with_density(density: &[f64], x: &SquareMatrix) -> Result<C64> {
    if x.dim() != density.len() {
        return Err(Error::DimensionMismatch {
            expected: density.len(),
            found: x.dim(),
        });
    }
    Ok(density
        .iter()
        .enumerate()
        .map(|(k, &a)| x[(k, k)] * a)
        .sum())
}

pub fn state(w: &Weight, x: &SquareMatrix) -> Result<C64> {
    w.state(x)
}

/// `i_ν(x) = x ⊗ 1₂`.
pub fn embed(x: &SquareMatrix) -> SquareMatrix {
    x.kron(&SquareMatrix::identity(2))
}

#[derive(Clone, Debug)]
pub struct ModularContext {
    pub weight: Weight,
    pub t: f64,
}

impl ModularContext {
    pub fn new(weight: Weight, t: f64) -> Self {
        ModularContext { weight, t }
    }

    /// `σ_t(x) = A^{it} x A^{-it}`.
    pub fn flow(&self, x: &SquareMatrix) -> Result<SquareMatrix> {
        modular_flow(&self.weight, self.t, x)
    }
}

pub fn modular_flow(w: &Weight, t: f64, x: &SquareMatrix) -> Result<SquareMatrix> {
    let fwd = w.density.power_entries(C64::new(0.0, t));
    let back = w.density.power_entries(C64::new(0.0, -t));
    x.diag_mul_left(&fwd)?.diag_mul_right(&back)
}

/// `f_{x,y}(z) = Tr(A^{1+iz} x A^{-iz} y)`.
pub fn kms_function(w: &Weight, x: &SquareMatrix, y: &SquareMatrix, z: C64) -> Result<C64> {
    let i = C64::new(0.0, 1.0);
    let left = w.density.power_entries(C64::new(1.0, 0.0) + i * z);
    let right = w.density.power_entries(-(i * z));
    let xa = x.diag_mul_left(&left)?.diag_mul_right(&right)?;
    if y.dim() != xa.dim() {
        return Err(Error::DimensionMismatch {
            expected: xa.dim(),
            found: y.dim(),
        });
    }
    // Tr(M y) without forming the product
    let n = xa.dim();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += xa[(i, k)] * y[(k, i)];
        }
    }
    Ok(acc)
}

/// Weighted partial trace over the trailing tensor factor of dimension
/// `weights.len()`: returns `Tr₂(x (1 ⊗ diag(weights)))`.
pub fn weighted_partial_trace(x: &SquareMatrix, weights: &[f64]) -> Result<SquareMatrix> {
    let nb = weights.len();
    if nb == 0 || !x.dim().is_multiple_of(nb) {
        return Err(Error::Domain(format!(
            "dimension {} is not divisible by the factor dimension {nb}",
            x.dim()
        )));
    }
    let na = x.dim() / nb;
    let mut out = SquareMatrix::zeros(na);
    for i in 0..na {
        for j in 0..na {
            let mut acc = ZERO;
            for (k, &w) in weights.iter().enumerate() {
                acc += x[(i * nb + k, j * nb + k)] * w;
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// The level-reducing conditional expectation in reduced form: maps
/// `N_{ν+1}` onto `N_ν` with `a ⊗ b ↦ ρ₁(b) a`. `w` is the weight of the
/// larger algebra; compose with [`embed`] for the subalgebra-valued form.
pub fn expect_level(w: &Weight, x: &SquareMatrix) -> Result<SquareMatrix> {
    if x.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: x.dim(),
        });
    }
    if w.level() < 2 {
        return Err(Error::Domain(
            "expect_level needs a weight of level at least 2".into(),
        ));
    }
    weighted_partial_trace(x, &w.alpha.base_density())
}

/// Keeps the diagonal, zeroes everything else.
pub fn expect_diagonal(x: &SquareMatrix) -> SquareMatrix {
    let n = x.dim();
    SquareMatrix::from_fn(n, |i, j| if i == j { x[(i, i)] } else { ZERO })
}

/// `(1 ⊗ r) x` with `r` acting on the trailing factor.
pub(crate) fn tail_mul_left(r: &SquareMatrix, x: &SquareMatrix) -> SquareMatrix {
    let nb = r.dim();
    let n = x.dim();
    let na = n / nb;
    let mut out = SquareMatrix::zeros(n);
    for i in 0..na {
        for k in 0..nb {
            for kk in 0..nb {
                let c = r[(k, kk)];
                if c == ZERO {
                    continue;
                }
                let src = i * nb + kk;
                let dst = i * nb + k;
                for col in 0..n {
                    out[(dst, col)] += c * x[(src, col)];
                }
            }
        }
    }
    out
}

/// `x (1 ⊗ r)` with `r` acting on the trailing factor.
pub(crate) fn tail_mul_right(x: &SquareMatrix, r: &SquareMatrix) -> SquareMatrix {
    let nb = r.dim();
    let n = x.dim();
    let na = n / nb;
    let mut out = SquareMatrix::zeros(n);
    for j in 0..na {
        for l in 0..nb {
            for ll in 0..nb {
                let c = r[(ll, l)];
                if c == ZERO {
                    continue;
                }
                let src = j * nb + ll;
                let dst = j * nb + l;
                for row in 0..n {
                    out[(row, dst)] += x[(row, src)] * c;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn third() -> Alpha {
        Alpha::from_ratio(1, 3).unwrap()
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!("1/3".parse::<Alpha>().unwrap().ratio(), Some((1, 3)));
        assert_eq!("0.5".parse::<Alpha>().unwrap().ratio(), Some((1, 2)));
        assert_eq!("0.25".parse::<Alpha>().unwrap(), Alpha::from_ratio(1, 4).unwrap());
        assert!("0.7".parse::<Alpha>().is_err());
        assert!("0".parse::<Alpha>().is_err());
        assert!("2/3".parse::<Alpha>().is_err());
        let a = "0.3333333333".parse::<Alpha>().unwrap();
        assert!((a.value() - 1.0 / 3.0).abs() < 1e-9);
        assert_eq!(Alpha::half().lambda(), 1.0);
        assert_eq!(third().lambda(), 0.5);
    }

    #[test]
    fn weight_density_matches_kron_power() {
        let w = Weight::new(third(), 3).unwrap();
        let a1 = Diagonal::new(third().base_density().to_vec()).unwrap();
        let k = a1.kron(&a1).kron(&a1);
        for (x, y) in w.density().values().iter().zip(k.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-16);
        }
        let total: f64 = w.density().values().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn state_examples() {
        let w = Weight::new(third(), 2).unwrap();
        assert_abs_diff_eq!(w.state(&SquareMatrix::identity(4)).unwrap().re, 1.0, epsilon = 1e-15);
        let e0 = SquareMatrix::unit(4, 0, 0);
        assert_eq!(w.state(&e0).unwrap().re, 1.0 / 9.0);
        assert!(w.state(&SquareMatrix::identity(2)).is_err());
    }

    #[test]
    fn expect_level_examples() {
        let w = Weight::new(third(), 2).unwrap();
        let a = SquareMatrix::from_fn(2, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5));
        let e = expect_level(&w, &a.kron(&SquareMatrix::identity(2))).unwrap();
        assert!(e.max_abs_diff(&a) < 1e-15);
        let lam = third().lambda();
        let r1 = SquareMatrix::from_real_rows(&[&[1.0 / lam.sqrt(), 0.0], &[0.0, -lam.sqrt()]]);
        let e = expect_level(&w, &a.kron(&r1)).unwrap();
        assert!(e.max_abs() < 1e-15);
        assert!(expect_level(&w, &SquareMatrix::identity(2)).is_err());
    }

    #[test]
    fn expect_diagonal_examples() {
        let x = SquareMatrix::from_real_rows(&[&[1.0, 5.0], &[7.0, 2.0]]);
        assert_eq!(
            expect_diagonal(&x),
            SquareMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]])
        );
    }

    #[test]
    fn flow_at_zero_and_on_diagonals() {
        let w = Weight::new(third(), 1).unwrap();
        let x = SquareMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!(modular_flow(&w, 0.0, &x).unwrap().max_abs_diff(&x) < 1e-16);
        let d = SquareMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -4.0]]);
        assert!(modular_flow(&w, 2.3, &d).unwrap().max_abs_diff(&d) < 1e-15);
        let one = kms_function(&w, &SquareMatrix::identity(2), &SquareMatrix::identity(2), C64::new(0.4, -1.1)).unwrap();
        assert_abs_diff_eq!(one.re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(one.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn tail_products_match_kron() {
        let x = SquareMatrix::from_fn(4, |i, j| C64::new((i * 4 + j) as f64, (i as f64) - (j as f64)));
        let r = SquareMatrix::from_fn(2, |i, j| C64::new(i as f64 + 0.5, 2.0 * j as f64 - 1.0));
        let big = SquareMatrix::identity(2).kron(&r);
        assert!(tail_mul_left(&r, &x).max_abs_diff(&(&big * &x)) < 1e-13);
        assert!(tail_mul_right(&x, &r).max_abs_diff(&(&x * &big)) < 1e-13);
    }

    #[test]
    fn weight_json() {
        let w = Weight::new(third(), 2).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, r#"{"alpha":"1/3","level":2}"#);
        let back: Weight = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
        let num: Weight = serde_json::from_str(r#"{"alpha":0.25,"level":1}"#).unwrap();
        assert_eq!(num.density().values(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<Weight>(r#"{"alpha":0.75,"level":1}"#).is_err());
    }
}
