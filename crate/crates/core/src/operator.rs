//! Constant-coefficient first-order operators `𝔸u = A(e(u))`.
//!
//! An operator is stored as the endomorphism `A` of `Sym(n)`, written as a
//! `d × d` matrix in the orthonormal basis of [`crate::sym`]. This makes the
//! compatibility condition on the coefficient maps hold by construction.
//!
//! The Fourier symbol is `𝔸[z] v = A(v ⊙ z)`. The operator is ℝ-elliptic if
//! the symbol is injective for every real `z ≠ 0`, and ℂ-elliptic if the same
//! holds over `ℂⁿ`. Classification here is sampling based: a positive sampled
//! minimum singular value is evidence, not proof, while the analytic witnesses
//! of the built-in operators are checked exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::QuadraticField;
use crate::rng;
use crate::sym::{sym_dim, SymCoords, SymMat, MAX_DIM, MAX_SYM};

/// Default residual threshold for ellipticity witnesses.
pub const DEFAULT_WITNESS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    FullStrain,
    Deviatoric,
    Custom,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::FullStrain => "full-strain",
            OperatorKind::Deviatoric => "deviatoric",
            OperatorKind::Custom => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderOperator {
    dim: usize,
    a: [[f64; MAX_SYM]; MAX_SYM],
    kind: OperatorKind,
}

impl FirstOrderOperator {
    /// `A = Id`, i.e. `𝔸u = e(u)`.
    pub fn full_strain(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut a = [[0.0; MAX_SYM]; MAX_SYM];
        for (i, row) in a.iter_mut().enumerate().take(sym_dim(dim)) {
            row[i] = 1.0;
        }
        Ok(Self {
            dim,
            a,
            kind: OperatorKind::FullStrain,
        })
    }

    /// `A ξ = ξ − (tr ξ / n) Id`.
    pub fn deviatoric(dim: usize) -> Result<Self> {
        let mut op = Self::full_strain(dim)?;
        let inv_n = 1.0 / dim as f64;
        for i in 0..dim {
            for j in 0..dim {
                op.a[i][j] -= inv_n;
            }
        }
        op.kind = OperatorKind::Deviatoric;
        Ok(op)
    }

    /// Custom endomorphism from a row-major `d × d` matrix in the orthonormal basis.
    pub fn from_matrix(dim: usize, row_major: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let d = sym_dim(dim);
        if row_major.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: row_major.len(),
            });
        }
        if row_major.iter().any(|x| !x.is_finite()) {
            return Err(invalid("matrix", "entries must be finite"));
        }
        let mut a = [[0.0; MAX_SYM]; MAX_SYM];
        for i in 0..d {
            for j in 0..d {
                a[i][j] = row_major[i * d + j];
            }
        }
        Ok(Self {
            dim,
            a,
            kind: OperatorKind::Custom,
        })
    }

    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "full-strain" => Self::full_strain(dim),
            "deviatoric" => Self::deviatoric(dim),
            other => Err(invalid(
                "operator",
                format!("unknown operator `{other}` (expected full-strain or deviatoric)"),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Row-major copy of the `d × d` matrix.
    pub fn matrix(&self) -> Vec<f64> {
        let d = sym_dim(self.dim);
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.a[i][j])
            .collect()
    }

    pub fn apply_coords(&self, c: &SymCoords) -> SymCoords {
        let d = sym_dim(self.dim);
        let mut out = SymCoords::zeros(self.dim);
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += self.a[i][j] * c.c[j];
            }
            out.c[i] = s;
        }
        out
    }

    /// `Aᵀ c`, the adjoint with respect to the Frobenius product.
    pub fn apply_transpose_coords(&self, c: &SymCoords) -> SymCoords {
        let d = sym_dim(self.dim);
        let mut out = SymCoords::zeros(self.dim);
        for j in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                s += self.a[i][j] * c.c[i];
            }
            out.c[j] = s;
        }
        out
    }

    pub fn apply(&self, xi: &SymMat) -> SymMat {
        self.apply_coords(&xi.coords()).to_matrix()
    }

    /// Real `d × n` matrix of `w ↦ A(w ⊙ z)` in coordinates.
    fn real_symbol_matrix(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let d = sym_dim(n);
        let mut m = DMatrix::zeros(d, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.apply_coords(&SymMat::sym_product(&e, z).coords());
            for i in 0..d {
                m[(i, j)] = col.c[i];
            }
        }
        m
    }

    /// Real `2d × 2n` representation of the complex symbol at `z = x + i y`,
    /// acting on `(Re v, Im v)` and producing `(Re, Im)` coordinates.
    fn stacked_symbol_matrix(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let d = sym_dim(n);
        let mx = self.real_symbol_matrix(x);
        let my = self.real_symbol_matrix(y);
        let mut m = DMatrix::zeros(2 * d, 2 * n);
        for i in 0..d {
            for j in 0..n {
                m[(i, j)] = mx[(i, j)];
                m[(i, n + j)] = -my[(i, j)];
                m[(d + i, j)] = my[(i, j)];
                m[(d + i, n + j)] = mx[(i, j)];
            }
        }
        m
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(invalid(
            "dim",
            format!("must be in 1..={MAX_DIM}, got {dim}"),
        ));
    }
    Ok(())
}

fn check_len(op: &FirstOrderOperator, len: usize) -> Result<()> {
    if len != op.dim {
        return Err(Error::DimensionMismatch {
            expected: op.dim,
            got: len,
        });
    }
    Ok(())
}

/// Complex symmetric `n × n` matrix `A(v ⊙ z)`, with `A` extended ℂ-linearly.
pub fn symbol(
    op: &FirstOrderOperator,
    z: &[Complex64],
    v: &[Complex64],
) -> Result<DMatrix<Complex64>> {
    check_len(op, z.len())?;
    check_len(op, v.len())?;
    let n = op.dim;
    let re = |c: &[Complex64]| c.iter().map(|x| x.re).collect::<Vec<_>>();
    let im = |c: &[Complex64]| c.iter().map(|x| x.im).collect::<Vec<_>>();
    let (vr, vi, zr, zi) = (re(v), im(v), re(z), im(z));
    // v ⊙ z = (vr⊙zr − vi⊙zi) + i (vr⊙zi + vi⊙zr)
    let real = SymMat::sym_product(&vr, &zr) - SymMat::sym_product(&vi, &zi);
    let imag = SymMat::sym_product(&vr, &zi) + SymMat::sym_product(&vi, &zr);
    let real = op.apply(&real);
    let imag = op.apply(&imag);
    Ok(DMatrix::from_fn(n, n, |j, k| {
        Complex64::new(real.get(j, k), imag.get(j, k))
    }))
}

/// `w ⊗_𝔸 z = A(w ⊙ z)` for real vectors.
pub fn tensor_a(op: &FirstOrderOperator, w: &[f64], z: &[f64]) -> Result<SymMat> {
    check_len(op, w.len())?;
    check_len(op, z.len())?;
    Ok(op.apply(&SymMat::sym_product(w, z)))
}

/// A complex pair `(v, z)` with `A(v ⊙ z) ≈ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Entries as `[re, im]`.
    pub v: Vec<[f64; 2]>,
    pub z: Vec<[f64; 2]>,
    /// `|A(v ⊙ z)| / (|v| |z|)`.
    pub residual: f64,
}

impl Witness {
    fn new(op: &FirstOrderOperator, v: &[Complex64], z: &[Complex64]) -> Result<Self> {
        let s = symbol(op, z, v)?;
        let norm = |c: &[Complex64]| c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let residual = s.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() / (norm(v) * norm(z));
        let pairs = |c: &[Complex64]| c.iter().map(|x| [x.re, x.im]).collect();
        Ok(Self {
            v: pairs(v),
            z: pairs(z),
            residual,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub operator: String,
    pub dim: usize,
    pub r_elliptic: bool,
    pub c_elliptic: bool,
    pub min_sigma_real: f64,
    pub min_sigma_complex: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub tol: f64,
}

/// Smallest singular value, and the corresponding right singular vector.
fn min_singular(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    // The symbol is tall (d ≥ n), so the SVD of mᵀm is cheap and the
    // smallest eigenpair gives the smallest singular pair.
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty spectrum");
    let vec = eig.eigenvectors.column(idx).iter().copied().collect();
    (val.max(0.0).sqrt(), vec)
}

fn max_singular(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    gram.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .sqrt()
}

/// Samples the real and complex unit spheres and reports the minimal
/// smallest singular value of the symbol. The first `k` samples do not depend
/// on `n_samples`, so the reported minima are nonincreasing in `n_samples`.
pub fn classify_ellipticity(
    op: &FirstOrderOperator,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<EllipticityReport> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let n = op.dim;
    let zero = vec![0.0; n];

    let mut min_real = f64::INFINITY;
    for i in 0..n {
        let mut e = zero.clone();
        e[i] = 1.0;
        min_real = min_real.min(min_singular(&op.real_symbol_matrix(&e)).0);
    }
    let mut rng_r = rng::stream(seed, 1);
    for _ in 0..n_samples {
        let z = rng::unit_vector(&mut rng_r, n);
        min_real = min_real.min(min_singular(&op.real_symbol_matrix(&z)).0);
    }

    let mut min_complex = f64::INFINITY;
    let mut best: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut rng_c = rng::stream(seed, 2);
    for _ in 0..n_samples {
        let s = rng::unit_vector(&mut rng_c, 2 * n);
        let (x, y) = s.split_at(n);
        let (sigma, vec) = min_singular(&op.stacked_symbol_matrix(x, y));
        if sigma < min_complex {
            min_complex = sigma;
            best = Some((x.to_vec(), y.to_vec(), vec));
        }
    }
    // Real directions are part of the complex sphere.
    min_complex = min_complex.min(min_real);

    let mut witness = None;
    if op.kind == OperatorKind::Deviatoric && n == 2 {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        witness = Some(Witness::new(op, &[one, i], &[one, -i])?);
    }
    if witness.is_none() && min_complex < tol {
        if let Some((x, y, vec)) = best {
            let z: Vec<Complex64> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| Complex64::new(*a, *b))
                .collect();
            let v: Vec<Complex64> = (0..n).map(|j| Complex64::new(vec[j], vec[n + j])).collect();
            witness = Some(Witness::new(op, &v, &z)?);
        }
    }
    if let Some(w) = &witness {
        min_complex = min_complex.min(w.residual);
    }
    let witness = witness.filter(|w| w.residual < tol);

    let r_elliptic = min_real > tol;
    let c_elliptic = r_elliptic && witness.is_none() && min_complex > tol;
    Ok(EllipticityReport {
        operator: op.name().to_string(),
        dim: n,
        r_elliptic,
        c_elliptic,
        min_sigma_real: min_real,
        min_sigma_complex: min_complex,
        witness,
        samples: n_samples,
        tol,
    })
}

/// Empirical `(κ₁, κ₂)` with `κ₁|w||z| ≤ |w ⊗_𝔸 z| ≤ κ₂|w||z|`.
///
/// For fixed `z` the extremes over unit `w` are the extreme singular values
/// of `w ↦ A(w ⊙ z)`; these are sampled over `z` and then refined by a
/// shrinking random search on the sphere.
pub fn kappa_bounds(op: &FirstOrderOperator, n_samples: usize, seed: u64) -> (f64, f64) {
    let n = op.dim;
    let lo = |z: &[f64]| min_singular(&op.real_symbol_matrix(z)).0;
    let hi = |z: &[f64]| max_singular(&op.real_symbol_matrix(z));
    let mut rng = rng::stream(seed, 3);
    let samples: Vec<Vec<f64>> = (0..n_samples.max(1))
        .map(|_| rng::unit_vector(&mut rng, n))
        .collect();

    let refine = |f: &dyn Fn(&[f64]) -> f64, sign: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        let (mut z, mut best) = samples
            .iter()
            .map(|z| (z.clone(), sign * f(z)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one sample");
        let mut step = 0.5;
        while step > 1e-10 {
            let mut improved = false;
            for _ in 0..(8 * n) {
                let dir = rng::unit_vector(rng, n);
                let mut cand: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
                let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
                cand.iter_mut().for_each(|x| *x /= norm);
                let val = sign * f(&cand);
                if val < best {
                    best = val;
                    z = cand;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        sign * best
    };
    let k1 = refine(&lo, 1.0, &mut rng);
    let k2 = refine(&hi, -1.0, &mut rng);
    (k1, k2)
}

/// Candidate kernel fields of degree at most two.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelField {
    /// `x ↦ M x + b`, `M = −Mᵀ`.
    RigidMotion {
        skew: Vec<Vec<f64>>,
        translation: Vec<f64>,
    },
    /// `x ↦ M x + b + 2 (a·x) x − |x|² a`, only for `n ≥ 3`.
    ConformalKilling {
        skew: Vec<Vec<f64>>,
        translation: Vec<f64>,
        a: Vec<f64>,
    },
    CustomPolynomial(QuadraticField),
}

impl KernelField {
    pub fn to_field(&self) -> Result<QuadraticField> {
        match self {
            KernelField::RigidMotion { skew, translation } => {
                QuadraticField::rigid(skew.clone(), translation)
            }
            KernelField::ConformalKilling {
                skew,
                translation,
                a,
            } => QuadraticField::conformal_killing(skew.clone(), translation, a),
            KernelField::CustomPolynomial(f) => {
                f.validate()?;
                Ok(f.clone())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            KernelField::RigidMotion { translation, .. }
            | KernelField::ConformalKilling { translation, .. } => translation.len(),
            KernelField::CustomPolynomial(f) => f.dim(),
        }
    }
}

/// Maximum of `|A(e(u)(x))|` over seeded sample points of `[lo, hi]` and its
/// corners, using the analytic symmetric gradient of `field`.
pub fn kernel_residual(
    op: &FirstOrderOperator,
    field: &KernelField,
    n_points: usize,
    lo: &[f64],
    hi: &[f64],
    seed: u64,
) -> Result<f64> {
    let n = op.dim;
    check_len(op, field.dim())?;
    check_len(op, lo.len())?;
    check_len(op, hi.len())?;
    if matches!(field, KernelField::ConformalKilling { .. }) && n < 3 {
        return Err(Error::Unsupported(format!(
            "conformal Killing fields need n >= 3; in n = {n} the deviatoric kernel is infinite-dimensional"
        )));
    }
    let u = field.to_field()?;
    let residual = |x: &[f64]| op.apply_coords(&u.strain(x).coords()).norm();
    let mut worst: f64 = 0.0;
    for corner in 0..(1usize << n) {
        let x: Vec<f64> = (0..n)
            .map(|i| if corner >> i & 1 == 1 { hi[i] } else { lo[i] })
            .collect();
        worst = worst.max(residual(&x));
    }
    let mut rng = rng::stream(seed, 4);
    for _ in 0..n_points {
        let x: Vec<f64> = (0..n)
            .map(|i| lo[i] + (hi[i] - lo[i]) * rand::Rng::random::<f64>(&mut rng))
            .collect();
        worst = worst.max(residual(&x));
    }
    Ok(worst)
}
