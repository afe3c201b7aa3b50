//! Finite tensor products `N ⊗ M` with product states: the left-factor
//! conditional expectation, the decomposition projections
//! `D_j z = (1 ⊗ y_j) E((1 ⊗ y_j)* z)`, shell-ordered product bases and their
//! partial-sum certification, and the `L^p` level embedding.

use serde::{Deserialize, Serialize};

use crate::algebra::{tail_mul_left, weighted_partial_trace, Alpha, Weight};
use crate::error::{Error, Result};
use crate::haar::{shell_index, shell_positions, HaarSystem, Side};
use crate::matrix::{Diagonal, Exponent, NormSide, NormSpec, SquareMatrix, C64, ZERO};
use crate::normlab::{
    estimate_map_norm, run_rows, theoretical_bound, BoundKind, CertifyOptions,
    EstimationStrategy, ExpansionSystem, NormReport, PartialSumMap,
};

/// Largest product dimension accepted for certification.
pub const MAX_PRODUCT_DIM: usize = 64;

/// Tensor product of two finite algebras with faithful diagonal states.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductAlgebra {
    left: Diagonal,
    right: Diagonal,
    joint: Diagonal,
}

impl ProductAlgebra {
    pub fn new(left: Diagonal, right: Diagonal) -> Result<Self> {
        for (name, d) in [("left", &left), ("right", &right)] {
            let t: f64 = d.values().iter().sum();
            if (t - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!(
                    "{name} factor density has trace {t}, expected 1"
                )));
            }
        }
        let joint = left.kron(&right);
        Ok(ProductAlgebra { left, right, joint })
    }

    pub fn from_weights(left: &Weight, right: &Weight) -> Result<Self> {
        Self::new(left.density().clone(), right.density().clone())
    }

    /// `φ = Tr/n` on `M_n`.
    pub fn normalized_trace(n: usize) -> Diagonal {
        Diagonal::new(vec![1.0 / n as f64; n]).expect("positive")
    }

    pub fn left_dim(&self) -> usize {
        self.left.dim()
    }

    pub fn right_dim(&self) -> usize {
        self.right.dim()
    }

    pub fn dim(&self) -> usize {
        self.joint.dim()
    }

    pub fn left_density(&self) -> &Diagonal {
        &self.left
    }

    pub fn right_density(&self) -> &Diagonal {
        &self.right
    }

    pub fn joint_density(&self) -> &Diagonal {
        &self.joint
    }

    pub fn state(&self, z: &SquareMatrix) -> Result<C64> {
        crate::algebra::state_with_density(self.joint.values(), z)
    }

    pub fn right_state(&self, y: &SquareMatrix) -> Result<C64> {
        crate::algebra::state_with_density(self.right.values(), y)
    }

    fn check(&self, z: &SquareMatrix) -> Result<()> {
        if z.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: z.dim(),
            });
        }
        Ok(())
    }
}

/// Reduced form of `E_N`: `x ⊗ y ↦ φ(y) x`.
pub fn expect_left_factor(pa: &ProductAlgebra, z: &SquareMatrix) -> Result<SquareMatrix> {
    pa.check(z)?;
    weighted_partial_trace(z, pa.right.values())
}

/// Orthonormal family `y_j` of the right factor, `φ(y_j* y_k) = δ_jk`, with its
/// projections `D_j`.
#[derive(Clone, Debug)]
pub struct DecompositionSystem {
    algebra: ProductAlgebra,
    ys: Vec<SquareMatrix>,
    adjoints: Vec<SquareMatrix>,
}

impl DecompositionSystem {
    pub fn new(algebra: ProductAlgebra, ys: Vec<SquareMatrix>) -> Result<Self> {
        let nb = algebra.right_dim();
        if let Some(y) = ys.iter().find(|y| y.dim() != nb) {
            return Err(Error::DimensionMismatch {
                expected: nb,
                found: y.dim(),
            });
        }
        let mut residual = 0.0f64;
        for (j, yj) in ys.iter().enumerate() {
            for (k, yk) in ys.iter().enumerate() {
                let g = algebra.right_state(&(&yj.adjoint() * yk))?;
                let target = if j == k { 1.0 } else { 0.0 };
                residual = residual.max((g - C64::new(target, 0.0)).norm());
            }
        }
        if residual > 1e-10 {
            return Err(Error::Gram {
                residual,
                tolerance: 1e-10,
            });
        }
        let adjoints = ys.iter().map(|y| y.adjoint()).collect();
        Ok(DecompositionSystem {
            algebra,
            ys,
            adjoints,
        })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn algebra(&self) -> &ProductAlgebra {
        &self.algebra
    }

    pub fn elements(&self) -> &[SquareMatrix] {
        &self.ys
    }

    /// `D_j z = (1 ⊗ y_j) E_N((1 ⊗ y_j)* z)`.
    pub fn project(&self, j: usize, z: &SquareMatrix) -> Result<SquareMatrix> {
        if j >= self.ys.len() {
            return Err(Error::Domain(format!(
                "decomposition index {j} out of range 0..{}",
                self.ys.len()
            )));
        }
        self.algebra.check(z)?;
        let reduced = expect_left_factor(&self.algebra, &tail_mul_left(&self.adjoints[j], z))?;
        Ok(reduced.kron(&self.ys[j]))
    }
}

pub fn decomposition_project(
    ds: &DecompositionSystem,
    j: usize,
    z: &SquareMatrix,
) -> Result<SquareMatrix> {
    ds.project(j, z)
}

/// Shell-ordered matrix units of `M_n`, scaled so that they are orthonormal
/// for `Tr/n` when `normalized` is set (`e_rc ↦ √n e_rc`).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixUnitSystem {
    n: usize,
    scale: f64,
    positions: Vec<(usize, usize)>,
}

impl MatrixUnitSystem {
    pub fn new(n: usize, normalized: bool) -> Self {
        MatrixUnitSystem {
            n,
            scale: if normalized { (n as f64).sqrt() } else { 1.0 },
            positions: shell_positions(n),
        }
    }

    pub fn trivial() -> Self {
        Self::new(1, true)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn elements(&self) -> Vec<SquareMatrix> {
        self.positions
            .iter()
            .map(|&(r, c)| SquareMatrix::unit(self.n, r, c).scale(C64::new(self.scale, 0.0)))
            .collect()
    }
}

impl ExpansionSystem for MatrixUnitSystem {
    fn dim(&self) -> usize {
        self.n
    }
    fn len(&self) -> usize {
        self.n * self.n
    }
    fn analyze(&self, x: &SquareMatrix) -> Result<Vec<C64>> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.dim(),
            });
        }
        Ok(self
            .positions
            .iter()
            .map(|&(r, c)| x[(r, c)] / self.scale)
            .collect())
    }
    fn synthesize(&self, coeffs: &[C64]) -> Result<SquareMatrix> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        let mut out = SquareMatrix::zeros(self.n);
        for (&(r, c), z) in self.positions.iter().zip(coeffs) {
            out[(r, c)] = z * self.scale;
        }
        Ok(out)
    }
}

/// One tensor factor of a product system.
#[derive(Clone, Debug)]
pub enum Factor {
    Haar(HaarSystem),
    /// Matrix units of `M_{2^level}` under the normalized trace.
    Units { level: usize, system: MatrixUnitSystem },
}

impl Factor {
    pub fn units(level: usize) -> Self {
        Factor::Units {
            level,
            system: MatrixUnitSystem::new(1 << level, true),
        }
    }

    pub fn trivial() -> Self {
        Self::units(0)
    }

    pub fn system(&self) -> &dyn ExpansionSystem {
        match self {
            Factor::Haar(h) => h,
            Factor::Units { system, .. } => system,
        }
    }

    pub fn density(&self) -> Diagonal {
        match self {
            Factor::Haar(h) => h.weight().density().clone(),
            Factor::Units { system, .. } => ProductAlgebra::normalized_trace(system.dim()),
        }
    }

    pub fn elements(&self) -> Vec<SquareMatrix> {
        match self {
            Factor::Haar(h) => h.elements().to_vec(),
            Factor::Units { system, .. } => system.elements(),
        }
    }

    /// Basis-constant bound of the factor in the given norm.
    pub fn bound(&self, spec: NormSpec) -> Result<f64> {
        match self {
            Factor::Haar(h) => {
                let ok = matches!(
                    (h.side(), spec.side),
                    (Side::Left, NormSide::Left) | (Side::Right, NormSide::Right)
                ) || (spec.side == NormSide::Plain && h.alpha().lambda() == 1.0);
                if !ok {
                    return Err(Error::Domain(format!(
                        "a {} Haar factor is certified in the {} norm only",
                        h.side(),
                        h.side()
                    )));
                }
                Ok(*theoretical_bound(h.quads(), spec.p)?.last().expect("nonempty"))
            }
            Factor::Units { system, .. } => Ok(if system.dim() == 1 { 1.0 } else { 2.0 }),
        }
    }

    fn label(&self) -> (String, String) {
        match self {
            Factor::Haar(h) => (h.alpha().to_string(), h.level().to_string()),
            Factor::Units { level, .. } => ("trace".to_string(), format!("u{level}")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FactorJson {
    Haar(HaarSystem),
    Units { units: usize, state: String },
}

impl Serialize for Factor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Factor::Haar(h) => FactorJson::Haar(h.clone()).serialize(s),
            Factor::Units { level, .. } => FactorJson::Units {
                units: *level,
                state: "normalized-trace".into(),
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Factor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match FactorJson::deserialize(d)? {
            FactorJson::Haar(h) => Ok(Factor::Haar(h)),
            FactorJson::Units { units, state } => {
                if state != "normalized-trace" {
                    return Err(D::Error::custom(format!("unsupported factor state {state:?}")));
                }
                Ok(Factor::units(units))
            }
        }
    }
}

/// All pairs `(j, k)` (0-based) of a `len_a × len_b` grid sorted by shell index.
pub fn shell_order(len_a: usize, len_b: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..len_a)
        .flat_map(|j| (0..len_b).map(move |k| (j, k)))
        .collect();
    pairs.sort_by_key(|&(j, k)| shell_index(j + 1, k + 1));
    pairs
}

/// `z_s = x_j ⊗ y_k` in shell order.
pub fn product_basis(xs: &[SquareMatrix], ys: &[SquareMatrix]) -> Vec<SquareMatrix> {
    shell_order(xs.len(), ys.len())
        .into_iter()
        .map(|(j, k)| xs[j].kron(&ys[k]))
        .collect()
}

/// Product system of two factor systems in shell order.
#[derive(Clone, Debug)]
pub struct ProductSystem {
    left: Factor,
    right: Factor,
    order: Vec<(usize, usize)>,
    algebra: ProductAlgebra,
}

#[derive(Serialize, Deserialize)]
struct ProductJson {
    left: Factor,
    right: Factor,
    order: String,
}

impl Serialize for ProductSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ProductJson {
            left: self.left.clone(),
            right: self.right.clone(),
            order: "shell".into(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProductSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ProductJson::deserialize(d)?;
        if raw.order != "shell" {
            return Err(D::Error::custom(format!("unsupported order {:?}", raw.order)));
        }
        ProductSystem::new(raw.left, raw.right).map_err(D::Error::custom)
    }
}

impl ProductSystem {
    pub fn new(left: Factor, right: Factor) -> Result<Self> {
        let algebra = ProductAlgebra::new(left.density(), right.density())?;
        let order = shell_order(left.system().len(), right.system().len());
        Ok(ProductSystem {
            left,
            right,
            order,
            algebra,
        })
    }

    pub fn left(&self) -> &Factor {
        &self.left
    }

    pub fn right(&self) -> &Factor {
        &self.right
    }

    pub fn algebra(&self) -> &ProductAlgebra {
        &self.algebra
    }

    pub fn order(&self) -> &[(usize, usize)] {
        &self.order
    }

    pub fn elements(&self) -> Vec<SquareMatrix> {
        product_basis(&self.left.elements(), &self.right.elements())
    }

    /// Coefficient grid `c[j][k]` of `z = Σ c[j][k] x_j ⊗ y_k`.
    pub fn coefficient_grid(&self, z: &SquareMatrix) -> Result<Vec<Vec<C64>>> {
        self.algebra.check(z)?;
        let a = self.left.system();
        let b = self.right.system();
        let (na, nb) = (a.dim(), b.dim());
        // analyze each block z[(·,k),(·,l)] in the left factor
        let mut by_block = vec![Vec::new(); nb * nb];
        for k in 0..nb {
            for l in 0..nb {
                let block = SquareMatrix::from_fn(na, |i, j| z[(i * nb + k, j * nb + l)]);
                by_block[k * nb + l] = a.analyze(&block)?;
            }
        }
        (0..a.len())
            .map(|j| {
                let m = SquareMatrix::from_fn(nb, |k, l| by_block[k * nb + l][j]);
                b.analyze(&m)
            })
            .collect()
    }

    pub fn synthesize_grid(&self, grid: &[Vec<C64>]) -> Result<SquareMatrix> {
        let a = self.left.system();
        let b = self.right.system();
        let mut coeffs_a = vec![ZERO; a.len()];
        let mut out = SquareMatrix::zeros(self.algebra.dim());
        for (j, row) in grid.iter().enumerate() {
            if row.iter().all(|z| *z == ZERO) {
                continue;
            }
            let yb = b.synthesize(row)?;
            coeffs_a.fill(ZERO);
            coeffs_a[j] = C64::new(1.0, 0.0);
            let xa = a.synthesize(&coeffs_a)?;
            out = &out + &xa.kron(&yb);
        }
        Ok(out)
    }

    /// `P_{ma} ⊗ Q_{mb}`: keep coefficients with `j < ma` and `k < mb`.
    pub fn factor_partial(&self, ma: usize, mb: usize, z: &SquareMatrix) -> Result<SquareMatrix> {
        let mut grid = self.coefficient_grid(z)?;
        for (j, row) in grid.iter_mut().enumerate() {
            for (k, c) in row.iter_mut().enumerate() {
                if j >= ma || k >= mb {
                    *c = ZERO;
                }
            }
        }
        self.synthesize_grid(&grid)
    }

    /// Decomposition system of the right factor's basis.
    pub fn decomposition(&self) -> Result<DecompositionSystem> {
        DecompositionSystem::new(self.algebra.clone(), self.right.elements())
    }
}

impl ExpansionSystem for ProductSystem {
    fn dim(&self) -> usize {
        self.algebra.dim()
    }
    fn len(&self) -> usize {
        self.order.len()
    }
    fn analyze(&self, z: &SquareMatrix) -> Result<Vec<C64>> {
        let grid = self.coefficient_grid(z)?;
        Ok(self.order.iter().map(|&(j, k)| grid[j][k]).collect())
    }
    fn synthesize(&self, coeffs: &[C64]) -> Result<SquareMatrix> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        let mut grid = vec![vec![ZERO; self.right.system().len()]; self.left.system().len()];
        for (&(j, k), c) in self.order.iter().zip(coeffs) {
            grid[j][k] = *c;
        }
        self.synthesize_grid(&grid)
    }
}

/// Schedule for product systems: everything up to 16 terms, otherwise full
/// shells `m₁²`, the row/column switch points `m₁² + m₁`, powers of two and
/// the full length.
pub fn product_schedule(len: usize) -> Vec<usize> {
    if len <= 16 {
        return (0..=len).collect();
    }
    let mut ms = vec![len];
    let mut s = 1;
    while s * s <= len {
        ms.push(s * s);
        if s * s + s <= len {
            ms.push(s * s + s);
        }
        s += 1;
    }
    let mut p = 1;
    while p <= len {
        ms.push(p);
        p *= 2;
    }
    ms.sort_unstable();
    ms.dedup();
    ms
}

/// Partial-sum norms of a shell-ordered product system against the derived
/// bound `3 c_A c_B`.
pub fn product_partial_sum_certify(
    system: &ProductSystem,
    spec: NormSpec,
    strategy: &EstimationStrategy,
    opts: &CertifyOptions,
) -> Result<NormReport> {
    let dim = system.algebra.dim();
    if dim > MAX_PRODUCT_DIM {
        return Err(Error::ScaleCap(format!(
            "product dimension {dim} exceeds {MAX_PRODUCT_DIM}"
        )));
    }
    let bound = 3.0 * system.left.bound(spec)? * system.right.bound(spec)?;
    let len = system.len();
    let schedule = opts.schedule.clone().unwrap_or_else(|| product_schedule(len));
    if let Some(&m) = schedule.iter().find(|&&m| m > len) {
        return Err(Error::Domain(format!("schedule entry {m} exceeds {len}")));
    }
    let density = system.algebra.joint_density().clone();
    let rows = run_rows(&schedule, bound, strategy, opts.tolerance, |m| {
        let map = PartialSumMap::basis(system, density.clone(), m, spec)?;
        estimate_map_norm(&map, strategy)
    });
    let (la, va) = system.left.label();
    let (lb, vb) = system.right.label();
    Ok(NormReport {
        system: "product".into(),
        alpha: format!("{la}x{lb}"),
        level: format!("{va}x{vb}"),
        p: spec.p,
        side: spec.side,
        bound_kind: BoundKind::Derived,
        rows,
        config: None,
    })
}

/// `x ⊗ A₁^{1/p}`, an isometry for the plain Schatten-p norm.
pub fn lp_embed(x: &SquareMatrix, alpha: Alpha, p: Exponent) -> Result<SquareMatrix> {
    let Exponent::Finite(p) = p else {
        return Err(Error::Domain(
            "the L^p embedding is isometric only for finite p".into(),
        ));
    };
    let a1 = Diagonal::new(alpha.base_density().to_vec())?;
    Ok(x.kron(&SquareMatrix::from_diagonal(&a1.real_power_entries(1.0 / p))))
}

/// Whether `ln λ₁ / ln λ₂` is (numerically) irrational, the factor-type
/// condition for products of two biased systems. Only recorded, never
/// required: a ratio is flagged rational when it is within `1e-9` of `p/q`
/// with `q ≤ 1000`.
pub fn log_ratio_irrational(alpha_a: Alpha, alpha_b: Alpha) -> bool {
    let (la, lb) = (alpha_a.lambda().ln(), alpha_b.lambda().ln());
    if la == 0.0 || lb == 0.0 {
        return false;
    }
    let r = la / lb;
    !(1..=1000).any(|q| {
        let p = (r * q as f64).round();
        (r - p / q as f64).abs() < 1e-9
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ONE;

    fn third() -> Alpha {
        Alpha::from_ratio(1, 3).unwrap()
    }

    fn sample(n: usize, seed: u64) -> SquareMatrix {
        SquareMatrix::from_fn(n, |i, j| {
            let t = (seed as f64 + 1.0) * (i as f64 * 1.7 + j as f64 * 0.3 + 0.1);
            C64::new(t.sin(), (1.3 * t).cos())
        })
    }

    fn pa() -> ProductAlgebra {
        ProductAlgebra::from_weights(
            &Weight::new(third(), 1).unwrap(),
            &Weight::new(Alpha::from_ratio(1, 4).unwrap(), 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn left_expectation_on_elementary_tensors() {
        let pa = pa();
        let x = sample(2, 1);
        assert!(expect_left_factor(&pa, &x.kron(&SquareMatrix::identity(2)))
            .unwrap()
            .max_abs_diff(&x)
            < 1e-15);
        // φ(diag(3, -1)) = 3/4 - 3/4 = 0 for α = 1/4
        let y = SquareMatrix::from_real_rows(&[&[3.0, 0.0], &[0.0, -1.0]]);
        assert!(expect_left_factor(&pa, &x.kron(&y)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn decomposition_on_basis_tensors() {
        let b = HaarSystem::standard(Alpha::from_ratio(1, 4).unwrap(), 1, Side::Left).unwrap();
        let ds = DecompositionSystem::new(pa(), b.elements().to_vec()).unwrap();
        let a = sample(2, 2);
        for j in 0..4 {
            let z = a.kron(&b.elements()[j]);
            for i in 0..4 {
                let d = ds.project(i, &z).unwrap();
                if i == j {
                    assert!(d.max_abs_diff(&z) < 1e-13);
                } else {
                    assert!(d.max_abs() < 1e-13);
                }
            }
        }
        assert!(ds.project(4, &a.kron(&a)).is_err());
    }

    #[test]
    fn decomposition_rejects_non_orthonormal_family() {
        let ys = vec![SquareMatrix::identity(2), SquareMatrix::identity(2)];
        assert!(matches!(DecompositionSystem::new(pa(), ys), Err(Error::Gram { .. })));
    }

    #[test]
    fn unit_decomposition_is_a_block_mask() {
        let units = MatrixUnitSystem::new(4, true);
        let alg = ProductAlgebra::new(
            Weight::new(Alpha::half(), 1).unwrap().density().clone(),
            ProductAlgebra::normalized_trace(4),
        )
        .unwrap();
        let ds = DecompositionSystem::new(alg, units.elements()).unwrap();
        let z = sample(8, 5);
        for (j, &(r, c)) in shell_positions(4).iter().enumerate() {
            let d = ds.project(j, &z).unwrap();
            let mask = SquareMatrix::from_fn(8, |i, k| {
                if i % 4 == r && k % 4 == c {
                    z[(i, k)]
                } else {
                    ZERO
                }
            });
            assert_eq!(d, mask);
        }
    }

    #[test]
    fn shell_product_order() {
        let xs: Vec<SquareMatrix> = (0..4).map(|i| sample(2, i)).collect();
        let ys: Vec<SquareMatrix> = (0..4).map(|i| sample(2, 10 + i)).collect();
        let z = product_basis(&xs, &ys);
        assert_eq!(z.len(), 16);
        assert_eq!(z[0], xs[0].kron(&ys[0]));
        assert_eq!(z[1], xs[0].kron(&ys[1]));
        assert_eq!(z[3], xs[1].kron(&ys[0]));
        let order = shell_order(3, 5);
        let mut seen = order.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 15);
    }

    #[test]
    fn trivial_right_factor_reduces_to_haar() {
        let h = HaarSystem::standard(third(), 2, Side::Left).unwrap();
        let ps = ProductSystem::new(Factor::Haar(h.clone()), Factor::trivial()).unwrap();
        let x = sample(4, 3);
        for m in [1, 5, 11, 16] {
            let a = ps.partial_sum(m, &x).unwrap();
            let b = h.partial_sum(m, &x).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-13);
        }
    }

    #[test]
    fn lp_embed_example_and_infinity() {
        let y = lp_embed(&SquareMatrix::identity(2), third(), Exponent::one()).unwrap();
        let expect = SquareMatrix::identity(2).kron(&SquareMatrix::from_diagonal(&[
            C64::new(1.0 / 3.0, 0.0),
            C64::new(2.0 / 3.0, 0.0),
        ]));
        assert!(y.max_abs_diff(&expect) < 1e-16);
        let n = crate::matrix::schatten_norm(&y, Exponent::one()).unwrap();
        assert!((n - 2.0).abs() < 1e-15);
        assert!(lp_embed(&SquareMatrix::identity(2), third(), Exponent::Infinity).is_err());
    }

    #[test]
    fn factor_json_roundtrip() {
        let ps = ProductSystem::new(
            Factor::Haar(HaarSystem::standard(Alpha::half(), 1, Side::Left).unwrap()),
            Factor::units(1),
        )
        .unwrap();
        let s = serde_json::to_string(&ps).unwrap();
        assert!(s.contains(r#""units":1"#) && s.contains(r#""order":"shell""#));
        let back: ProductSystem = serde_json::from_str(&s).unwrap();
        assert_eq!(back.len(), 16);
        let z = sample(4, 9);
        assert!(back.partial_sum(7, &z).unwrap().max_abs_diff(&ps.partial_sum(7, &z).unwrap()) < 1e-15);
    }

    #[test]
    fn irrationality_flag() {
        assert!(log_ratio_irrational(third(), Alpha::from_ratio(1, 4).unwrap()));
        // λ = 1/2 and λ = 1/4 = (1/2)^2
        assert!(!log_ratio_irrational(third(), Alpha::from_ratio(1, 5).unwrap()));
        let _ = ONE;
    }
}
