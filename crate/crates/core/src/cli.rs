//! Command-line surface: `gen-haar`, `certify` and `verify`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::algebra::{
    embed, expect_diagonal, expect_level, kms_function, modular_flow, Alpha, Weight,
};
use crate::error::{Error, Result};
use crate::haar::{
    commutative_haar, commutative_selection, distorted_measure, shell_index, shell_pair,
    shell_positions, HaarSystem, RademacherQuad, Side, GRAM_TOLERANCE, MAX_HAAR_LEVEL,
};
use crate::matrix::{schatten_norm, weighted_norm, Exponent, NormSide, NormSpec, SquareMatrix, C64};
use crate::normlab::{
    certify, certify_schur, CertifyOptions, EstimationStrategy, ExpansionSystem, NormReport,
    DEFAULT_LEVEL_CAP, DEFAULT_SEED, DEFAULT_TOLERANCE,
};
use crate::tensor::{
    expect_left_factor, log_ratio_irrational, lp_embed, product_partial_sum_certify, Factor,
    ProductSystem,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CERTIFY_FAILED: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Measure tables are cheap, so they get a larger default level cap.
pub const MEASURE_LEVEL_CAP: usize = 10;

#[derive(Parser, Debug)]
#[command(name = "ncbasis", version, about = "Non-commutative Haar systems and basis-constant certification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a Haar system and write it as JSON.
    GenHaar(GenHaarArgs),
    /// Estimate partial-sum projection norms and compare with the bounds.
    Certify(CertifyArgs),
    /// Run one of the invariant suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct GenHaarArgs {
    #[arg(long, default_value = "1/2")]
    pub alpha: Alpha,
    #[arg(long, default_value_t = 1)]
    pub level: usize,
    #[arg(long, default_value = "left")]
    pub side: Side,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertifySuite {
    Haar,
    Schur,
    Product,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// Rerun from a saved configuration or from a JSON report that embeds one.
    #[arg(long, conflicts_with_all = ["suite", "alpha", "level", "system"])]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub suite: Option<CertifySuite>,
    #[arg(long)]
    pub alpha: Option<Alpha>,
    #[arg(long)]
    pub level: Option<usize>,
    /// Haar system JSON written by `gen-haar`.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, default_value = "1")]
    pub p: Exponent,
    #[arg(long, default_value = "left")]
    pub side: NormSide,
    /// Comma-separated partial-sum indices.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    #[arg(long, env = "NCBASIS_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Also run the exhaustive sphere grid (2×2 maps, p = 1).
    #[arg(long)]
    pub grid_oracle: bool,
    /// Left factor of a product suite, e.g. `alpha=1/3,level=1` or `units=2`.
    #[arg(long)]
    pub left: Option<String>,
    #[arg(long)]
    pub right: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Lift the default level caps.
    #[arg(long)]
    pub unsafe_scale: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifySuite {
    Gram,
    Expansion,
    Expectation,
    Measure,
    Kms,
    Commutative,
    Tensor,
    Shell,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: VerifySuite,
    #[arg(long, default_value = "1/2")]
    pub alpha: Alpha,
    #[arg(long, default_value_t = 2)]
    pub level: usize,
    #[arg(long, default_value = "left")]
    pub side: Side,
    /// Modular time for the kms suite.
    #[arg(long, default_value_t = 0.3)]
    pub t: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, env = "NCBASIS_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub unsafe_scale: bool,
}

/// Everything that determines a certification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub suite: CertifySuite,
    pub alpha: Option<Alpha>,
    pub level: Option<usize>,
    pub side: NormSide,
    pub p: Exponent,
    pub schedule: Option<Vec<usize>>,
    pub strategy: EstimationStrategy,
    pub tolerance: f64,
    pub left: Option<String>,
    pub right: Option<String>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub unsafe_scale: bool,
}

impl RunConfig {
    pub fn from_args(args: &CertifyArgs) -> Self {
        let base = EstimationStrategy::default();
        RunConfig {
            command: "certify".into(),
            suite: args.suite.unwrap_or(CertifySuite::Haar),
            alpha: args.alpha,
            level: args.level,
            side: args.side,
            p: args.p,
            schedule: args.schedule.clone(),
            strategy: EstimationStrategy {
                samples: args.samples.unwrap_or(base.samples),
                restarts: args.restarts.unwrap_or(base.restarts),
                iterations: args.iterations.unwrap_or(base.iterations),
                grid_oracle: args.grid_oracle,
                seed: args.seed.unwrap_or(DEFAULT_SEED),
            },
            tolerance: DEFAULT_TOLERANCE,
            left: args.left.clone(),
            right: args.right.clone(),
            input: args.system.clone(),
            output: args.out.clone(),
            format: args.format,
            unsafe_scale: args.unsafe_scale,
        }
    }

    /// Accepts a bare configuration or a report with a `config` field.
    pub fn load(path: &Path) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(io::BufReader::new(File::open(path)?))?;
        let inner = value.get("config").cloned().unwrap_or(value);
        Ok(serde_json::from_value(inner)?)
    }

    fn options(&self) -> CertifyOptions {
        CertifyOptions {
            schedule: self.schedule.clone(),
            tolerance: self.tolerance,
            level_cap: if self.unsafe_scale {
                MAX_HAAR_LEVEL
            } else {
                DEFAULT_LEVEL_CAP
            },
        }
    }
}

/// Factor description `alpha=<a>[,level=<n>]` or `units=<μ>`.
pub fn parse_factor(spec: &str, side: Side) -> Result<Factor> {
    let mut alpha = None;
    let mut level = 1usize;
    let mut units = None;
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Domain(format!("expected key=value in factor spec, got {part:?}")))?;
        let bad = |_| Error::Domain(format!("invalid value {value:?} for {key}"));
        match key.trim() {
            "alpha" => alpha = Some(Alpha::from_str(value)?),
            "level" => level = value.trim().parse().map_err(bad)?,
            "units" => units = Some(value.trim().parse::<usize>().map_err(bad)?),
            other => return Err(Error::Domain(format!("unknown factor key {other:?}"))),
        }
    }
    match (alpha, units) {
        (Some(a), None) => Ok(Factor::Haar(HaarSystem::standard(a, level, side)?)),
        (None, Some(mu)) => {
            if mu > 3 {
                return Err(Error::ScaleCap(format!("units level {mu} exceeds 3")));
            }
            Ok(Factor::units(mu))
        }
        _ => Err(Error::Domain(format!(
            "factor spec needs exactly one of alpha= or units=, got {spec:?}"
        ))),
    }
}

fn haar_side(side: NormSide) -> Side {
    match side {
        NormSide::Right => Side::Right,
        _ => Side::Left,
    }
}

/// Runs a certification described by `cfg`.
pub fn run_certify(cfg: &RunConfig) -> Result<NormReport> {
    let spec = NormSpec::new(cfg.p, cfg.side);
    let opts = cfg.options();
    let strategy = &cfg.strategy;
    let mut metadata = serde_json::Map::new();
    let mut report = match cfg.suite {
        CertifySuite::Haar => {
            let sys = match &cfg.input {
                Some(path) => {
                    let sys: HaarSystem =
                        serde_json::from_reader(io::BufReader::new(File::open(path)?))?;
                    sys
                }
                None => HaarSystem::standard(
                    cfg.alpha.unwrap_or_else(Alpha::half),
                    cfg.level.unwrap_or(2),
                    haar_side(cfg.side),
                )?,
            };
            certify(&sys, spec, strategy, &opts)?
        }
        CertifySuite::Schur => {
            let level = cfg.level.unwrap_or(2);
            if level > opts.level_cap {
                return Err(Error::ScaleCap(format!(
                    "level {level} exceeds the certification cap {}",
                    opts.level_cap
                )));
            }
            let w = Weight::new(cfg.alpha.unwrap_or_else(Alpha::half), level)?;
            certify_schur(&w, spec, strategy, &opts)?
        }
        CertifySuite::Product => {
            let side = haar_side(cfg.side);
            let left = parse_factor(cfg.left.as_deref().unwrap_or("alpha=1/3"), side)?;
            let right = parse_factor(cfg.right.as_deref().unwrap_or("alpha=1/4"), side)?;
            if let (Factor::Haar(a), Factor::Haar(b)) = (&left, &right) {
                metadata.insert(
                    "log_ratio_irrational".into(),
                    json!(log_ratio_irrational(a.alpha(), b.alpha())),
                );
            }
            for (name, f) in [("left", &left), ("right", &right)] {
                if let Factor::Units { system, .. } = f {
                    metadata.insert(format!("{name}_units_scale"), json!(system.scale()));
                }
            }
            let sys = ProductSystem::new(left, right)?;
            product_partial_sum_certify(&sys, spec, strategy, &opts)?
        }
    };
    let mut config = serde_json::to_value(cfg)?;
    if !metadata.is_empty() {
        config["metadata"] = serde_json::Value::Object(metadata);
    }
    report.config = Some(config);
    Ok(report)
}

/// One named check of a verify suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(suite: VerifySuite, check: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Check {
            suite: format!("{suite:?}").to_lowercase(),
            check: check.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> SquareMatrix {
    SquareMatrix::from_fn(n, |_, _| {
        C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// Runs an invariant suite and returns one row per check.
pub fn run_verify(args: &VerifyArgs) -> Result<Vec<Check>> {
    use VerifySuite as S;
    let cap = if args.unsafe_scale {
        crate::algebra::MAX_LEVEL
    } else if args.suite == S::Measure {
        MEASURE_LEVEL_CAP
    } else {
        DEFAULT_LEVEL_CAP
    };
    if args.level > cap {
        return Err(Error::ScaleCap(format!("level {} exceeds the cap {cap}", args.level)));
    }
    let alpha = args.alpha;
    let level = args.level;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let suite = args.suite;
    let mut out = Vec::new();
    match suite {
        S::Gram => {
            for side in [Side::Left, Side::Right] {
                let q = RademacherQuad::standard(alpha, side);
                out.push(Check::new(suite, format!("quad_{side}"), q.gram_residual(), GRAM_TOLERANCE));
                let sys = HaarSystem::standard(alpha, level, side)?;
                out.push(Check::new(
                    suite,
                    format!("system_{side}"),
                    sys.gram_residual(),
                    GRAM_TOLERANCE,
                ));
            }
        }
        S::Expansion => {
            let sys = HaarSystem::standard(alpha, level, args.side)?;
            let mut worst = 0.0f64;
            for _ in 0..args.samples {
                let x = random_matrix(sys.dim(), &mut rng);
                let back = sys.synthesize(&sys.analyze(&x)?)?;
                worst = worst.max(back.max_abs_diff(&x) / x.max_abs());
            }
            out.push(Check::new(suite, "round_trip", worst, 1e-10));
        }
        S::Expectation => {
            let level = level.max(2);
            let w = Weight::new(alpha, level)?;
            let small = w.at_level(level - 1)?;
            let n = small.dim();
            let one = Weight::new(alpha, 1)?;
            let (mut elem, mut module, mut contract) = (0.0f64, 0.0f64, 0.0f64);
            let spec = NormSpec::left(Exponent::one());
            for _ in 0..args.samples {
                let a = random_matrix(n, &mut rng);
                let b = random_matrix(2, &mut rng);
                let e = expect_level(&w, &a.kron(&b))?;
                elem = elem.max(e.max_abs_diff(&a.scale(one.state(&b)?)));
                let x = random_matrix(2 * n, &mut rng);
                let c = random_matrix(n, &mut rng);
                let lhs = expect_level(&w, &(&(&embed(&a) * &x) * &embed(&c)))?;
                let rhs = &(&a * &expect_level(&w, &x)?) * &c;
                module = module.max(lhs.max_abs_diff(&rhs) / (1.0 + rhs.max_abs()));
                let big = weighted_norm(&x, w.density(), spec)?;
                let red = weighted_norm(&expect_level(&w, &x)?, small.density(), spec)?;
                contract = contract.max((red / big - 1.0).max(0.0));
            }
            out.push(Check::new(suite, "elementary_tensor", elem, 1e-12));
            out.push(Check::new(suite, "module_property", module, 1e-12));
            out.push(Check::new(suite, "contractive_left_p1", contract, 1e-12));
        }
        S::Measure => {
            let w = Weight::new(alpha, level)?;
            let table = distorted_measure(alpha, level)?;
            let mut worst = 0.0f64;
            for (k, mass) in table.masses.iter().enumerate() {
                let eps = SquareMatrix::unit(w.dim(), k, k);
                worst = worst.max((w.state(&eps)?.re - mass).abs());
            }
            out.push(Check::new(suite, "state_equals_mass", worst, 1e-15));
            out.push(Check::new(suite, "total_mass", (table.total() - 1.0).abs(), 1e-14));
        }
        S::Kms => {
            let w = Weight::new(alpha, level)?;
            let x = random_matrix(w.dim(), &mut rng);
            let y = random_matrix(w.dim(), &mut rng);
            let sx = modular_flow(&w, args.t, &x)?;
            let lower = kms_function(&w, &x, &y, C64::new(args.t, 0.0))?;
            let upper = kms_function(&w, &x, &y, C64::new(args.t, 1.0))?;
            let want_lower = w.state(&(&sx * &y))?;
            let want_upper = w.state(&(&y * &sx))?;
            out.push(Check::new(suite, "real_boundary", (lower - want_lower).norm(), 1e-10));
            out.push(Check::new(suite, "shifted_boundary", (upper - want_upper).norm(), 1e-10));
        }
        S::Commutative => {
            let ch = commutative_haar(alpha, level)?;
            let sys = HaarSystem::standard(alpha, level, Side::Left)?;
            let mut selection = 0.0f64;
            for (j, sel) in commutative_selection(level).into_iter().enumerate() {
                let d = expect_diagonal(&sys.elements()[j]);
                selection = selection.max(match sel {
                    Some(i) => d.max_abs_diff(&ch.chis[i]),
                    None => d.max_abs(),
                });
            }
            let exact = if alpha.lambda() == 1.0 { 0.0 } else { 1e-15 };
            out.push(Check::new(suite, "selection", selection, exact));
            if alpha.lambda() == 1.0 {
                let n = 1usize << level;
                let mut classical = 0.0f64;
                for (j, steps) in ch.steps.iter().enumerate() {
                    for (k, &v) in steps.iter().enumerate() {
                        let want = classical_haar(j, k, n);
                        classical = classical.max((v - want).abs());
                    }
                }
                out.push(Check::new(suite, "classical_haar", classical, 0.0));
            }
        }
        S::Tensor => tensor_checks(args, &mut rng, &mut out)?,
        S::Shell => {
            let mut bad = 0usize;
            let n = 64;
            let mut seen = vec![false; n * n + 1];
            for j in 1..=n {
                for k in 1..=n {
                    let s = shell_index(j, k);
                    if s > n * n || seen[s] || shell_pair(s) != (j, k) {
                        bad += 1;
                    } else {
                        seen[s] = true;
                    }
                }
            }
            for size in 1..=n {
                let pos = shell_positions(size);
                let mut grid = vec![false; size * size];
                for &(r, c) in &pos {
                    grid[r * size + c] = true;
                }
                if pos.len() != size * size || grid.iter().any(|g| !g) {
                    bad += 1;
                }
            }
            out.push(Check::new(suite, "bijection", bad as f64, 0.0));
        }
    }
    Ok(out)
}

/// Classical Haar function `χ_j` on the dyadic interval `I_k`, `k < n`.
fn classical_haar(j: usize, k: usize, n: usize) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let mu = usize::BITS - 1 - j.leading_zeros();
    let width = n >> mu;
    let start = (j - (1 << mu)) * width;
    if k < start || k >= start + width {
        0.0
    } else if k < start + width / 2 {
        1.0
    } else {
        -1.0
    }
}

fn tensor_checks(args: &VerifyArgs, rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let suite = VerifySuite::Tensor;
    let level = args.level.min(2);
    let a = HaarSystem::standard(args.alpha, level, args.side)?;
    let b = HaarSystem::standard(Alpha::from_ratio(1, 4)?, 1, args.side)?;
    let ps = ProductSystem::new(Factor::Haar(a.clone()), Factor::Haar(b.clone()))?;
    let ds = ps.decomposition()?;
    let n = ps.dim();
    let z = random_matrix(n, rng);
    let d: Vec<SquareMatrix> = (0..ds.len()).map(|j| ds.project(j, &z)).collect::<Result<_>>()?;
    let (mut orth, mut idem) = (0.0f64, 0.0f64);
    let mut sum = SquareMatrix::zeros(n);
    for (j, dj) in d.iter().enumerate() {
        sum = &sum + dj;
        for k in 0..ds.len() {
            let dk = ds.project(k, dj)?;
            if k == j {
                idem = idem.max(dk.max_abs_diff(dj));
            } else {
                orth = orth.max(dk.max_abs());
            }
        }
    }
    out.push(Check::new(suite, "d_orthogonal", orth, 1e-10));
    out.push(Check::new(suite, "d_idempotent", idem, 1e-10));
    out.push(Check::new(suite, "d_sum_identity", sum.max_abs_diff(&z), 1e-10));

    // two-term algebraic tensor against its expansion in the y basis
    let (a1, a2) = (random_matrix(a.dim(), rng), random_matrix(a.dim(), rng));
    let (b1, b2) = (random_matrix(2, rng), random_matrix(2, rng));
    let t = &a1.kron(&b1) + &a2.kron(&b2);
    let (c1, c2) = (b.analyze(&b1)?, b.analyze(&b2)?);
    let mut alg = 0.0f64;
    for (j, y) in b.elements().iter().enumerate() {
        let want = &a1.scale(c1[j]).kron(y) + &a2.scale(c2[j]).kron(y);
        alg = alg.max(ds.project(j, &t)?.max_abs_diff(&want));
    }
    out.push(Check::new(suite, "algebraic_tensor_formula", alg, 1e-12));

    let e = expect_left_factor(ps.algebra(), &a1.kron(&SquareMatrix::identity(2)))?;
    out.push(Check::new(suite, "left_expectation", e.max_abs_diff(&a1), 1e-14));

    let mut bi = 0.0f64;
    for (s, zs) in ps.elements().iter().enumerate() {
        for (i, c) in ps.analyze(zs)?.into_iter().enumerate() {
            let want = if i == s { 1.0 } else { 0.0 };
            bi = bi.max((c - C64::new(want, 0.0)).norm());
        }
    }
    out.push(Check::new(suite, "biorthogonal", bi, 1e-12));

    let mut shell = 0.0f64;
    let mut m1 = 1;
    while m1 * m1 <= ps.len() && m1 <= b.len() {
        let lhs = ps.partial_sum(m1 * m1, &z)?;
        let rhs = ps.factor_partial(m1, m1, &z)?;
        shell = shell.max(lhs.max_abs_diff(&rhs));
        m1 += 1;
    }
    out.push(Check::new(suite, "full_shell", shell, 1e-12));

    let mut iso = 0.0f64;
    for p in [1.0, 2.0, 3.0] {
        for _ in 0..20 {
            let x = random_matrix(a.dim(), rng);
            let e = Exponent::Finite(p);
            let before = schatten_norm(&x, e)?;
            let after = schatten_norm(&lp_embed(&x, args.alpha, e)?, e)?;
            iso = iso.max((after - before).abs() / before);
        }
    }
    out.push(Check::new(suite, "lp_isometry", iso, 1e-12));
    Ok(())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_checks(checks: &[Check], format: OutputFormat, w: &mut dyn Write) -> Result<()> {
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *w, checks)?;
            writeln!(w)?;
        }
        OutputFormat::Csv => {
            let mut out = csv::Writer::from_writer(&mut *w);
            for c in checks {
                out.serialize(c)?;
            }
            out.flush()?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericFailure(_) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn cmd_gen_haar(args: &GenHaarArgs) -> Result<i32> {
    let sys = HaarSystem::standard(args.alpha, args.level, args.side)?;
    let summary = format!(
        "elements: {}\ngram_residual: {:e}",
        sys.len(),
        sys.gram_residual()
    );
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            sys.write_json(&mut w)?;
            w.flush()?;
            println!("{summary}");
        }
        None => {
            let mut w = io::stdout().lock();
            sys.write_json(&mut w)?;
            writeln!(w)?;
            eprintln!("{summary}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_certify(args: &CertifyArgs) -> Result<i32> {
    let cfg = match &args.config {
        Some(path) => {
            let mut cfg = RunConfig::load(path)?;
            if args.out.is_some() {
                cfg.output = args.out.clone();
            }
            cfg
        }
        None => RunConfig::from_args(args),
    };
    let report = run_certify(&cfg)?;
    let mut w = open_output(cfg.output.as_deref())?;
    match cfg.format {
        OutputFormat::Json => {
            report.write_json(&mut w)?;
            writeln!(w)?;
        }
        OutputFormat::Csv => report.write_csv(&mut w)?,
    }
    w.flush()?;
    let failed = report.rows.iter().filter(|r| !r.pass).count();
    log::info!(
        "{} rows, {failed} failing, max estimate {}",
        report.rows.len(),
        report.max_estimate()
    );
    Ok(if report.has_errors() {
        EXIT_NUMERIC
    } else if report.passed() {
        EXIT_OK
    } else {
        EXIT_CERTIFY_FAILED
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let checks = run_verify(args)?;
    let mut w = open_output(args.out.as_deref())?;
    write_checks(&checks, args.format, &mut w)?;
    Ok(if checks.iter().all(|c| c.pass) {
        EXIT_OK
    } else {
        EXIT_CERTIFY_FAILED
    })
}

/// Parses `argv`, runs the command, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::GenHaar(a) => cmd_gen_haar(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_haar_values() {
        // n = 4: χ_1 = (1, 1, -1, -1), χ_3 = (0, 0, 1, -1)
        let c1: Vec<f64> = (0..4).map(|k| classical_haar(1, k, 4)).collect();
        assert_eq!(c1, vec![1.0, 1.0, -1.0, -1.0]);
        let c3: Vec<f64> = (0..4).map(|k| classical_haar(3, k, 4)).collect();
        assert_eq!(c3, vec![0.0, 0.0, 1.0, -1.0]);
    }

    #[test]
    fn factor_specs() {
        assert!(matches!(parse_factor("alpha=1/3", Side::Left), Ok(Factor::Haar(_))));
        assert!(matches!(
            parse_factor("units=2", Side::Left),
            Ok(Factor::Units { level: 2, .. })
        ));
        assert!(parse_factor("alpha=1/3,units=1", Side::Left).is_err());
        assert!(parse_factor("beta=2", Side::Left).is_err());
    }

    #[test]
    fn invalid_alpha_is_a_usage_error() {
        assert_eq!(run(["ncbasis", "gen-haar", "--alpha", "0.7"]), EXIT_USAGE);
    }

    #[test]
    fn scale_caps() {
        let code = run(["ncbasis", "verify", "--suite", "measure", "--level", "11"]);
        assert_eq!(code, EXIT_USAGE);
        let code = run(["ncbasis", "certify", "--level", "5", "--samples", "1", "--restarts", "0"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn verify_suites_pass_at_small_scale() {
        for suite in [
            VerifySuite::Gram,
            VerifySuite::Expansion,
            VerifySuite::Expectation,
            VerifySuite::Measure,
            VerifySuite::Kms,
            VerifySuite::Commutative,
            VerifySuite::Tensor,
        ] {
            let args = VerifyArgs {
                suite,
                alpha: Alpha::from_ratio(1, 3).unwrap(),
                level: 2,
                side: Side::Left,
                t: 0.3,
                samples: 20,
                seed: 7,
                format: OutputFormat::Csv,
                out: None,
                unsafe_scale: false,
            };
            for c in run_verify(&args).unwrap() {
                assert!(c.pass, "{c:?}");
            }
        }
    }
}
