//! Exact pointwise multilinear algebra on metrics, 2-forms and curvature
//! tensors.
//!
//! Norm conventions (see `docs/conventions.md` for the calibration):
//! `|F|^2 = F_ij F^ij` with no 1/2, all rank-2 and rank-4 tensor norms are
//! full contractions against the metric, and the Weyl block norms `|W+|^2`,
//! `|W-|^2` are plain Frobenius norms of the 3x3 operator blocks. The
//! composition is `(A o B)_ij = A_i^p B_pj`, which makes the Maxwell stress
//! `eta = -F o F` positive semidefinite.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, Matrix3};

/// Relative spectral tolerance for accepting a metric as positive definite:
/// min eigenvalue must exceed `SPD_REL_TOL` times the max eigenvalue.
pub const SPD_REL_TOL: f64 = 1e-10;

/// Chart or bundle orientation, the sign of the volume form relative to the
/// coordinate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum Orientation {
    #[default]
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn reversed(self) -> Orientation {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }

    pub fn from_sign(s: i64) -> Result<Orientation> {
        match s {
            1 => Ok(Orientation::Positive),
            -1 => Ok(Orientation::Negative),
            other => Err(Error::InvalidArgument(format!(
                "orientation must be +1 or -1, got {other}"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Point types
// ---------------------------------------------------------------------------

/// A symmetric positive-definite bilinear form at a point.
#[derive(Debug, Clone)]
pub struct MetricPoint {
    dim: usize,
    m: DMatrix<f64>,
    inv: DMatrix<f64>,
    det: f64,
    min_eig: f64,
    max_eig: f64,
}

impl MetricPoint {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim || dim < 2 {
            return Err(Error::DimMismatch(format!(
                "metric must be square of dimension >= 2, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let sym_dev = (&m - m.transpose()).abs().max();
        let scale = m.abs().max().max(1.0);
        if sym_dev > 1e-12 * scale {
            return Err(Error::SymmetryViolation(format!(
                "metric asymmetry {sym_dev:.3e} exceeds tolerance"
            )));
        }
        let eig = m.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        let max_eig = eig.eigenvalues.max();
        if !(min_eig > SPD_REL_TOL * max_eig && min_eig > 0.0) {
            return Err(Error::NotSpd(format!(
                "min eigenvalue {min_eig:.3e} vs max {max_eig:.3e}"
            )));
        }
        let inv = m.clone().try_inverse().ok_or_else(|| {
            Error::NotSpd("metric is numerically singular".to_string())
        })?;
        let det = eig.eigenvalues.iter().product();
        Ok(MetricPoint {
            dim,
            m,
            inv,
            det,
            min_eig,
            max_eig,
        })
    }

    pub fn identity(dim: usize) -> Self {
        MetricPoint::new(DMatrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn sqrt_det(&self) -> f64 {
        self.det.sqrt()
    }

    pub fn eigen_range(&self) -> (f64, f64) {
        (self.min_eig, self.max_eig)
    }

    /// g(u, v)
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.m * v)[(0, 0)]
    }
}

/// An antisymmetric bilinear form at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormPoint {
    dim: usize,
    m: DMatrix<f64>,
}

impl TwoFormPoint {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim {
            return Err(Error::DimMismatch("2-form matrix must be square".into()));
        }
        let dev = (&m + m.transpose()).abs().max();
        let scale = m.abs().max().max(1.0);
        if dev > 1e-12 * scale {
            return Err(Error::SymmetryViolation(format!(
                "2-form symmetric part {dev:.3e} exceeds tolerance"
            )));
        }
        Ok(TwoFormPoint { dim, m })
    }

    pub fn zero(dim: usize) -> Self {
        TwoFormPoint {
            dim,
            m: DMatrix::zeros(dim, dim),
        }
    }

    /// `dx^i ∧ dx^j` scaled by `value` (0-based indices, i < j).
    pub fn basis(dim: usize, i: usize, j: usize, value: f64) -> Self {
        assert!(i < j && j < dim);
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] = value;
        m[(j, i)] = -value;
        TwoFormPoint { dim, m }
    }

    /// Build from canonical components listed over lexicographic pairs
    /// (0,1), (0,2), ..., (n-2,n-1).
    pub fn from_canonical(dim: usize, comps: &[f64]) -> Result<Self> {
        if comps.len() != dim * (dim - 1) / 2 {
            return Err(Error::DimMismatch(format!(
                "expected {} canonical components, got {}",
                dim * (dim - 1) / 2,
                comps.len()
            )));
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                m[(i, j)] = comps[k];
                m[(j, i)] = -comps[k];
                k += 1;
            }
        }
        Ok(TwoFormPoint { dim, m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn scale(&self, c: f64) -> Self {
        TwoFormPoint {
            dim: self.dim,
            m: &self.m * c,
        }
    }

    pub fn add(&self, other: &TwoFormPoint) -> Self {
        TwoFormPoint {
            dim: self.dim,
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &TwoFormPoint) -> Self {
        TwoFormPoint {
            dim: self.dim,
            m: &self.m - &other.m,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.m.abs().max()
    }
}

/// A symmetric bilinear form at a point (Ricci, stress, trace-free parts).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorPoint {
    dim: usize,
    m: DMatrix<f64>,
}

impl SymTensorPoint {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim {
            return Err(Error::DimMismatch("tensor matrix must be square".into()));
        }
        let dev = (&m - m.transpose()).abs().max();
        let scale = m.abs().max().max(1.0);
        if dev > 1e-12 * scale {
            return Err(Error::SymmetryViolation(format!(
                "tensor antisymmetric part {dev:.3e} exceeds tolerance"
            )));
        }
        Ok(SymTensorPoint { dim, m })
    }

    pub fn zero(dim: usize) -> Self {
        SymTensorPoint {
            dim,
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// trace with respect to g: `g^{ij} T_ij`
    pub fn trace_g(&self, g: &MetricPoint) -> f64 {
        (g.inverse() * &self.m).trace()
    }

    /// T minus its trace part: `T - (tr_g T / n) g`
    pub fn trace_free(&self, g: &MetricPoint) -> SymTensorPoint {
        let t = self.trace_g(g) / self.dim as f64;
        SymTensorPoint {
            dim: self.dim,
            m: &self.m - g.components() * t,
        }
    }

    /// Full contraction `T_ij T_kl g^ik g^jl`.
    pub fn norm2_g(&self, g: &MetricPoint) -> f64 {
        let up = g.inverse() * &self.m * g.inverse();
        self.m.iter().zip(up.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_g(&self, g: &MetricPoint) -> f64 {
        self.norm2_g(g).max(0.0).sqrt()
    }

    pub fn sub(&self, other: &SymTensorPoint) -> SymTensorPoint {
        SymTensorPoint {
            dim: self.dim,
            m: &self.m - &other.m,
        }
    }
}

/// Rank-4 curvature tensor with all indices lowered.
#[derive(Debug, Clone)]
pub struct RiemannPoint {
    dim: usize,
    c: Vec<f64>,
}

impl RiemannPoint {
    pub fn zeros(dim: usize) -> Self {
        RiemannPoint {
            dim,
            c: vec![0.0; dim * dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut r = RiemannPoint::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        r.set(i, j, k, l, f(i, j, k, l));
                    }
                }
            }
        }
        r
    }

    /// Constant-curvature tensor `R_ijkl = k (g_ik g_jl - g_il g_jk)`.
    pub fn constant_curvature(g: &MetricPoint, k: f64) -> Self {
        let gm = g.components();
        RiemannPoint::from_fn(g.dim(), |i, j, kk, l| {
            k * (gm[(i, kk)] * gm[(j, l)] - gm[(i, l)] * gm[(j, kk)])
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.c[((i * self.dim + j) * self.dim + k) * self.dim + l]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.c[((i * self.dim + j) * self.dim + k) * self.dim + l] = v;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    /// Max violations of (antisymmetry in both index pairs, pair symmetry,
    /// first Bianchi identity), in that order.
    pub fn symmetry_residuals(&self) -> (f64, f64, f64) {
        let n = self.dim;
        let (mut anti, mut pair, mut bianchi) = (0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        anti = anti.max((r + self.get(j, i, k, l)).abs());
                        anti = anti.max((r + self.get(i, j, l, k)).abs());
                        pair = pair.max((r - self.get(k, l, i, j)).abs());
                        bianchi = bianchi
                            .max((r + self.get(i, k, l, j) + self.get(i, l, j, k)).abs());
                    }
                }
            }
        }
        (anti, pair, bianchi)
    }

    pub fn check_symmetries(&self, tol: f64) -> Result<()> {
        let scale = 1.0 + self.max_abs();
        let (a, p, b) = self.symmetry_residuals();
        if a > tol * scale || p > tol * scale || b > tol * scale {
            return Err(Error::SymmetryViolation(format!(
                "Riemann symmetries violated: antisym {a:.3e}, pair {p:.3e}, bianchi {b:.3e} (scale {scale:.3e})"
            )));
        }
        Ok(())
    }

    /// Ricci contraction `Ric_jk = g^il R_ijlk`.
    pub fn ricci(&self, g: &MetricPoint) -> SymTensorPoint {
        let n = self.dim;
        let ginv = g.inverse();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    for l in 0..n {
                        s += ginv[(i, l)] * self.get(i, j, l, k);
                    }
                }
                m[(j, k)] = s;
            }
        }
        // symmetrize away roundoff before constructing
        let ms = (&m + m.transpose()) * 0.5;
        SymTensorPoint {
            dim: n,
            m: ms,
        }
    }

    /// Full contraction `R_ijkl R^ijkl`.
    pub fn norm2_g(&self, g: &MetricPoint) -> f64 {
        let n = self.dim;
        let ginv = g.inverse();
        // raise indices one at a time
        let mut a = self.c.clone();
        for pos in 0..4 {
            let mut b = vec![0.0; a.len()];
            let stride = n.pow((3 - pos) as u32);
            for flat in 0..a.len() {
                // index at `pos` decomposed out of flat
                let upper = flat / (stride * n);
                let idx = (flat / stride) % n;
                let lower = flat % stride;
                let mut s = 0.0;
                for q in 0..n {
                    s += ginv[(idx, q)] * a[(upper * n + q) * stride + lower];
                }
                b[flat] = s;
            }
            a = b;
        }
        self.c.iter().zip(a.iter()).map(|(x, y)| x * y).sum()
    }
}

/// Self-dual / anti-self-dual split of a 2-form in dimension 4.
#[derive(Debug, Clone)]
pub struct FormSplit {
    pub plus: TwoFormPoint,
    pub minus: TwoFormPoint,
}

/// The 4D curvature operator in block form: `wplus`/`wminus` are the
/// trace-free Weyl blocks on the star eigenspaces, `scalar` is the scalar
/// curvature, `mixed` is the trace-free Ricci block, and `basis` lists the
/// six operator-orthonormal 2-forms (three self-dual then three
/// anti-self-dual) in coordinate components.
#[derive(Debug, Clone)]
pub struct CurvatureBlocks {
    pub wplus: Matrix3<f64>,
    pub wminus: Matrix3<f64>,
    pub scalar: f64,
    pub mixed: Matrix3<f64>,
    pub basis: Vec<TwoFormPoint>,
}

impl CurvatureBlocks {
    /// Frobenius norm squared of the self-dual Weyl block.
    pub fn wplus_norm2(&self) -> f64 {
        self.wplus.iter().map(|x| x * x).sum()
    }

    pub fn wminus_norm2(&self) -> f64 {
        self.wminus.iter().map(|x| x * x).sum()
    }

    pub fn mixed_norm2(&self) -> f64 {
        self.mixed.iter().map(|x| x * x).sum()
    }

    /// Eigenvalues of `wplus`, sorted descending.
    pub fn wplus_eigenvalues(&self) -> [f64; 3] {
        sorted_eigs3(&self.wplus)
    }

    pub fn wminus_eigenvalues(&self) -> [f64; 3] {
        sorted_eigs3(&self.wminus)
    }
}

fn sorted_eigs3(m: &Matrix3<f64>) -> [f64; 3] {
    let e = m.symmetric_eigen().eigenvalues;
    let mut v = [e[0], e[1], e[2]];
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

fn check_dims(g: &MetricPoint, f: &TwoFormPoint) -> Result<()> {
    if g.dim() != f.dim() {
        return Err(Error::DimMismatch(format!(
            "metric dimension {} vs 2-form dimension {}",
            g.dim(),
            f.dim()
        )));
    }
    Ok(())
}

/// `|F|^2 = g^{ik} g^{jl} F_ij F_kl` (full contraction, no 1/2).
pub fn two_form_norm2(g: &MetricPoint, f: &TwoFormPoint) -> Result<f64> {
    check_dims(g, f)?;
    let up = g.inverse() * f.components() * g.inverse();
    Ok(f.components()
        .iter()
        .zip(up.iter())
        .map(|(a, b)| a * b)
        .sum())
}

/// Maxwell stress `eta_ij = g^{pq} F_ip F_jq = (-F o F)_ij`; positive
/// semidefinite with `tr_g eta = |F|^2`.
pub fn stress(g: &MetricPoint, f: &TwoFormPoint) -> Result<SymTensorPoint> {
    check_dims(g, f)?;
    let m = f.components() * g.inverse() * f.components().transpose();
    let sym = (&m + m.transpose()) * 0.5;
    Ok(SymTensorPoint {
        dim: g.dim(),
        m: sym,
    })
}

/// `(A o B)_ij = A_i^p B_pj` with the index raised by g.
pub fn compose(g: &MetricPoint, a: &TwoFormPoint, b: &TwoFormPoint) -> DMatrix<f64> {
    a.components() * g.inverse() * b.components()
}

fn eps4(i: usize, j: usize, k: usize, l: usize) -> f64 {
    let idx = [i, j, k, l];
    let mut seen = [false; 4];
    for &x in &idx {
        if x > 3 || seen[x] {
            return 0.0;
        }
        seen[x] = true;
    }
    let mut sign = 1.0;
    for a in 0..4 {
        for b in (a + 1)..4 {
            if idx[a] > idx[b] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Hodge star of a 2-form in dimension 4:
/// `(*F)_ij = (orient/2) sqrt(det g) eps_ijkl F^kl`.
pub fn hodge_star(g: &MetricPoint, orientation: Orientation, f: &TwoFormPoint) -> Result<TwoFormPoint> {
    check_dims(g, f)?;
    if g.dim() != 4 {
        return Err(Error::WrongDimension {
            expected: 4,
            got: g.dim(),
        });
    }
    let up = g.inverse() * f.components() * g.inverse();
    let c = 0.5 * orientation.sign() * g.sqrt_det();
    let mut m = DMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    let e = eps4(i, j, k, l);
                    if e != 0.0 {
                        s += e * up[(k, l)];
                    }
                }
            }
            m[(i, j)] = c * s;
        }
    }
    Ok(TwoFormPoint { dim: 4, m })
}

/// Split into self-dual and anti-self-dual parts: `F± = (F ± *F)/2`.
pub fn sd_split(g: &MetricPoint, orientation: Orientation, f: &TwoFormPoint) -> Result<FormSplit> {
    let star = hodge_star(g, orientation, f)?;
    Ok(FormSplit {
        plus: TwoFormPoint {
            dim: 4,
            m: (f.components() + star.components()) * 0.5,
        },
        minus: TwoFormPoint {
            dim: 4,
            m: (f.components() - star.components()) * 0.5,
        },
    })
}

/// Residuals of the split-stress identities
/// `eta0 = -2 F+ o F-` and `|eta0|^2 = |F+|^2 |F-|^2`:
/// returns `(|eta0 + 2 F+ o F-|_g, | |eta0|^2 - |F+|^2 |F-|^2 |)`.
pub fn lemma22_residuals(
    g: &MetricPoint,
    orientation: Orientation,
    f: &TwoFormPoint,
) -> Result<(f64, f64)> {
    let split = sd_split(g, orientation, f)?;
    let eta0 = stress(g, f)?.trace_free(g);
    let comp = compose(g, &split.plus, &split.minus);
    let m = eta0.components() + comp * 2.0;
    let up = g.inverse() * &m * g.inverse();
    let r1: f64 = m.iter().zip(up.iter()).map(|(a, b)| a * b).sum();
    let np = two_form_norm2(g, &split.plus)?;
    let nm = two_form_norm2(g, &split.minus)?;
    let r2 = (eta0.norm2_g(g) - np * nm).abs();
    Ok((r1.max(0.0).sqrt(), r2))
}

/// Symmetry tolerance applied to curvature tensors entering the block
/// decomposition.
pub const RIEMANN_SYM_TOL: f64 = 1e-6;

/// Decompose the 4D curvature operator over an adapted orthonormal basis of
/// self-dual and anti-self-dual 2-forms.
///
/// The frame comes from Gram-Schmidt on the coordinate basis (deterministic),
/// with the last leg flipped if needed to match `orientation`; the 2-form
/// basis is the lexicographic pair basis rotated into the star eigenbasis.
pub fn curvature_blocks(
    g: &MetricPoint,
    orientation: Orientation,
    rm: &RiemannPoint,
) -> Result<CurvatureBlocks> {
    if g.dim() != 4 || rm.dim() != 4 {
        return Err(Error::WrongDimension {
            expected: 4,
            got: g.dim().min(rm.dim()),
        });
    }
    rm.check_symmetries(RIEMANN_SYM_TOL)?;

    let frame = orthonormal_frame(g, orientation);
    let rf = frame_components(rm, &frame);

    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut m = [[0.0f64; 6]; 6];
    for (a, &(i, j)) in PAIRS.iter().enumerate() {
        for (b, &(k, l)) in PAIRS.iter().enumerate() {
            m[a][b] = rf[((i * 4 + j) * 4 + k) * 4 + l];
        }
    }

    // rotation from the lex pair basis to the star eigenbasis
    // rows: (12+34, 13-24, 14+23, 12-34, 13+24, 14-23)/sqrt(2)
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut p = [[0.0f64; 6]; 6];
    p[0][0] = s;
    p[0][5] = s;
    p[1][1] = s;
    p[1][4] = -s;
    p[2][2] = s;
    p[2][3] = s;
    p[3][0] = s;
    p[3][5] = -s;
    p[4][1] = s;
    p[4][4] = s;
    p[5][2] = s;
    p[5][3] = -s;

    let mut mp = [[0.0f64; 6]; 6];
    for a in 0..6 {
        for b in 0..6 {
            let mut acc = 0.0;
            for x in 0..6 {
                for y in 0..6 {
                    acc += p[a][x] * m[x][y] * p[b][y];
                }
            }
            mp[a][b] = acc;
        }
    }

    let ricci = rm.ricci(g);
    let scalar = ricci.trace_g(g);
    let r12 = scalar / 12.0;

    let sub = |off_r: usize, off_c: usize, diag: f64| {
        Matrix3::from_fn(|r, c| mp[off_r + r][off_c + c] - if r == c { diag } else { 0.0 })
    };
    let wplus = sub(0, 0, r12);
    let wminus = sub(3, 3, r12);
    let mixed = Matrix3::from_fn(|r, c| mp[r][3 + c]);

    // coordinate components of the star eigenbasis
    let coframe = frame
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotSpd("frame not invertible".into()))?;
    let mut basis = Vec::with_capacity(6);
    for row in &p {
        let mut comps = DMatrix::zeros(4, 4);
        for (b, &(a_idx, b_idx)) in PAIRS.iter().enumerate() {
            if row[b] == 0.0 {
                continue;
            }
            for i in 0..4 {
                for j in 0..4 {
                    comps[(i, j)] += row[b]
                        * (coframe[(a_idx, i)] * coframe[(b_idx, j)]
                            - coframe[(a_idx, j)] * coframe[(b_idx, i)]);
                }
            }
        }
        basis.push(TwoFormPoint { dim: 4, m: comps });
    }

    Ok(CurvatureBlocks {
        wplus,
        wminus,
        scalar,
        mixed,
        basis,
    })
}

/// Gram-Schmidt the coordinate basis into a g-orthonormal frame (columns),
/// flipping the last vector so the frame matches `orientation`.
fn orthonormal_frame(g: &MetricPoint, orientation: Orientation) -> DMatrix<f64> {
    let n = g.dim();
    let gm = g.components();
    let mut e = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let mut v = DVector::<f64>::zeros(n);
        v[k] = 1.0;
        for m in 0..k {
            let em = e.column(m).clone_owned();
            let proj = (em.transpose() * gm * &v)[(0, 0)];
            v -= &em * proj;
        }
        let norm = (v.transpose() * gm * &v)[(0, 0)].sqrt();
        v /= norm;
        e.set_column(k, &v);
    }
    if orientation.sign() * e.determinant() < 0.0 {
        let last = -e.column(n - 1).clone_owned();
        e.set_column(n - 1, &last);
    }
    e
}

/// Curvature components in a frame: `R_abcd = R_ijkl E^i_a E^j_b E^k_c E^l_d`,
/// contracted one index at a time.
fn frame_components(rm: &RiemannPoint, frame: &DMatrix<f64>) -> Vec<f64> {
    let n = rm.dim();
    let mut a = rm.c.clone();
    for _pos in 0..4 {
        // contract the leading index, rotating it to the back:
        // b[j,k,l,a] = sum_i a[i,j,k,l] E[i,a]
        let mut b = vec![0.0; a.len()];
        let tail = n * n * n;
        for rest in 0..tail {
            for anew in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += a[i * tail + rest] * frame[(i, anew)];
                }
                b[rest * n + anew] = s;
            }
        }
        a = b;
    }
    a
}

/// `| |Rm|^2 - (R^2/6 + 2 |Ric0|^2 + 4(|W+|^2 + |W-|^2)) |` with the curvature
/// norm and the trace-free Ricci norm as full contractions and the Weyl norms
/// in the operator convention. Zero in exact arithmetic.
pub fn norm_decomposition_residual(
    g: &MetricPoint,
    orientation: Orientation,
    rm: &RiemannPoint,
) -> Result<f64> {
    let blocks = curvature_blocks(g, orientation, rm)?;
    let ric0 = rm.ricci(g).trace_free(g);
    let lhs = rm.norm2_g(g);
    let rhs = blocks.scalar * blocks.scalar / 6.0
        + 2.0 * ric0.norm2_g(g)
        + 4.0 * (blocks.wplus_norm2() + blocks.wminus_norm2());
    Ok((lhs - rhs).abs())
}

/// Result of the odd-dimension kernel search: a g-unit vector annihilating
/// the Maxwell stress, plus the spectral data backing the claim.
#[derive(Debug, Clone)]
pub struct OddKernel {
    pub vector: DVector<f64>,
    pub min_eigenvalue: f64,
    pub eta_vv: f64,
}

/// In odd dimensions the stress `eta = -F o F` is positive semidefinite with
/// a nontrivial kernel; returns a g-unit kernel vector.
///
/// The kernel direction comes from the SVD of F: `eta(v, v) = |F v|^2_{g^-1}`
/// vanishes exactly on the null space of the (odd, hence singular) skew
/// matrix. The reported minimum eigenvalue is the g-generalized one,
/// computed by Cholesky whitening.
pub fn odd_kernel(g: &MetricPoint, f: &TwoFormPoint) -> Result<OddKernel> {
    check_dims(g, f)?;
    let n = g.dim();
    if n % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "kernel vector is only guaranteed in odd dimensions, got {n}"
        )));
    }
    let eta = stress(g, f)?;

    let svd = f.components().clone().svd(false, true);
    let vt = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("SVD of the 2-form failed".into()))?;
    let mut min_idx = 0;
    for i in 1..n {
        if svd.singular_values[i] < svd.singular_values[min_idx] {
            min_idx = i;
        }
    }
    let v = vt.row(min_idx).transpose();
    let norm = g.inner(&v, &v).sqrt();
    let v = v / norm;
    let eta_vv = (v.transpose() * eta.components() * &v)[(0, 0)];

    // g-generalized spectrum of eta for the nonnegativity certificate
    let chol = g
        .components()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("metric Cholesky failed".into()))?;
    let linv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::NotSpd("metric factor not invertible".into()))?;
    let a = &linv * eta.components() * linv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let min_eigenvalue = a.symmetric_eigen().eigenvalues.min();

    Ok(OddKernel {
        vector: v,
        min_eigenvalue,
        eta_vv,
    })
}
