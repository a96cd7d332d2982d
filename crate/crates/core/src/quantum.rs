//! Finite-dimensional state vectors, operators and density matrices.
//!
//! A Hilbert space is an ordered tensor product of named [`Factor`]s, one per
//! [`Subsystem`]. Amplitudes are stored row-major with the first factor as the
//! most significant index, so `|S2⟩⊗|D1⟩` in a path⊗marker space lives at
//! index `1 * 2 + 0`.
//!
//! Unitary evolution ([`apply_unitary`]) is norm preserving and reversible.
//! Projective measurement ([`project`]) consumes exactly one uniform draw and
//! returns the renormalized post-measurement state.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::uniform;
use crate::C64;

/// Tolerance for identities that hold exactly in exact arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for chains of operations.
pub const CHAIN_TOL: f64 = 1e-10;
/// Most negative eigenvalue a density matrix may carry.
pub const EIGEN_FLOOR: f64 = -1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    Path,
    Marker,
    Polarization,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub subsystem: Subsystem,
    pub index: usize,
    pub name: String,
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// One tensor factor: a subsystem together with the names of its basis states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    subsystem: Subsystem,
    names: Vec<String>,
}

impl Factor {
    pub fn new(subsystem: Subsystem, names: &[&str]) -> Self {
        assert!(!names.is_empty(), "a factor needs at least one basis state");
        Factor {
            subsystem,
            names: names.iter().map(|n| n.to_string()).collect(),
        }
    }

    /// Two slits, `S1` and `S2`.
    pub fn slits() -> Self {
        Factor::new(Subsystem::Path, &["S1", "S2"])
    }

    /// Two interferometer arms.
    pub fn arms() -> Self {
        Factor::new(Subsystem::Path, &["upper", "lower"])
    }

    /// Two which-path detector states, `D1` and `D2`.
    pub fn detectors() -> Self {
        Factor::new(Subsystem::Marker, &["D1", "D2"])
    }

    /// Linear polarization basis `H`, `V`.
    pub fn polarization() -> Self {
        Factor::new(Subsystem::Polarization, &["H", "V"])
    }

    pub fn subsystem(&self) -> Subsystem {
        self.subsystem
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn label(&self, index: usize) -> BasisLabel {
        BasisLabel {
            subsystem: self.subsystem,
            index,
            name: self.names[index].clone(),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Ordered tensor product of factors with distinct subsystems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Space {
    factors: Vec<Factor>,
}

impl Space {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidSelection("a space needs at least one factor".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if factors[..i].iter().any(|g| g.subsystem == f.subsystem) {
                return Err(Error::SubsystemCollision(f.subsystem));
            }
        }
        Ok(Space { factors })
    }

    pub fn single(factor: Factor) -> Self {
        Space {
            factors: vec![factor],
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).product()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::dim).collect()
    }

    pub fn subsystems(&self) -> Vec<Subsystem> {
        self.factors.iter().map(|f| f.subsystem).collect()
    }

    pub fn position(&self, subsystem: Subsystem) -> Option<usize> {
        self.factors.iter().position(|f| f.subsystem == subsystem)
    }

    pub fn tensor(&self, other: &Space) -> Result<Space> {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Space::new(factors)
    }

    /// Ordered basis as label tuples, one tuple per amplitude.
    pub fn basis(&self) -> Vec<Vec<BasisLabel>> {
        (0..self.dim())
            .map(|flat| {
                self.unflatten(flat)
                    .into_iter()
                    .zip(&self.factors)
                    .map(|(i, f)| f.label(i))
                    .collect()
            })
            .collect()
    }

    /// Flat index of the basis state named by one label per factor.
    pub fn index_of(&self, names: &[&str]) -> Option<usize> {
        if names.len() != self.factors.len() {
            return None;
        }
        let digits = names
            .iter()
            .zip(&self.factors)
            .map(|(n, f)| f.index_of(n))
            .collect::<Option<Vec<_>>>()?;
        Some(self.flatten(&digits))
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        for (k, f) in self.factors.iter().enumerate().rev() {
            digits[k] = flat % f.dim();
            flat /= f.dim();
        }
        digits
    }

    fn flatten(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (d, f)| acc * f.dim() + d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: Space,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes. The amplitudes need not be normalized.
    pub fn new(space: Space, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(StateVector {
            space,
            amplitudes: DVector::from_vec(amplitudes),
        })
    }

    /// Normalized superposition; `amplitudes` are rescaled to unit norm.
    pub fn superposition(space: Space, amplitudes: Vec<C64>) -> Result<Self> {
        StateVector::new(space, amplitudes)?.normalized()
    }

    pub fn basis_state(space: Space, index: usize) -> Result<Self> {
        let dim = space.dim();
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index + 1,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        StateVector::new(space, amps)
    }

    /// Basis state of a single factor, selected by name.
    pub fn labelled(factor: Factor, name: &str) -> Result<Self> {
        let index = factor
            .index_of(name)
            .ok_or_else(|| Error::InvalidSelection(format!("no basis state named {name}")))?;
        StateVector::basis_state(Space::single(factor), index)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub(crate) fn vector(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= EXACT_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n));
        }
        Ok(StateVector {
            space: self.space.clone(),
            amplitudes: self.amplitudes.unscale(n.sqrt()),
        })
    }

    /// Copy with the global phase fixed so the first non-negligible amplitude
    /// is real and positive.
    pub fn canonical_phase(&self) -> Self {
        let pivot = self
            .amplitudes
            .iter()
            .find(|a| a.norm() > EXACT_TOL)
            .copied()
            .unwrap_or(ONE);
        let phase = pivot.conj() / pivot.norm();
        StateVector {
            space: self.space.clone(),
            amplitudes: self.amplitudes.map(|a| a * phase),
        }
    }

    /// Component-wise comparison after removing the global phase.
    pub fn approx_eq_up_to_phase(&self, other: &StateVector, tol: f64) -> bool {
        if self.space != other.space {
            return false;
        }
        let a = self.canonical_phase();
        let b = other.canonical_phase();
        a.amplitudes
            .iter()
            .zip(b.amplitudes.iter())
            .all(|(x, y)| (x - y).norm() <= tol)
    }

    pub fn approx_eq(&self, other: &StateVector, tol: f64) -> bool {
        self.space == other.space
            && self
                .amplitudes
                .iter()
                .zip(other.amplitudes.iter())
                .all(|(x, y)| (x - y).norm() <= tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Unitary,
    Projector,
    Hermitian,
}

/// Square matrix tagged with a validated kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<C64>,
    kind: OperatorKind,
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_square(m: &DMatrix<C64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - DMatrix::identity(n, n)))
}

fn projector_defect(m: &DMatrix<C64>) -> f64 {
    max_abs(&(m * m - m)).max(max_abs(&(m.adjoint() - m)))
}

impl Operator {
    pub fn new(matrix: DMatrix<C64>, kind: OperatorKind) -> Result<Self> {
        check_square(&matrix)?;
        match kind {
            OperatorKind::Unitary => {
                let d = unitarity_defect(&matrix);
                if d > EXACT_TOL {
                    return Err(Error::NotUnitary(d));
                }
            }
            OperatorKind::Projector => {
                let d = projector_defect(&matrix);
                if d > EXACT_TOL {
                    return Err(Error::NotProjector(d));
                }
            }
            OperatorKind::Hermitian => {
                let d = max_abs(&(matrix.adjoint() - &matrix));
                if d > EXACT_TOL {
                    return Err(Error::NotHermitian(d));
                }
            }
        }
        Ok(Operator { matrix, kind })
    }

    pub fn unitary(matrix: DMatrix<C64>) -> Result<Self> {
        Operator::new(matrix, OperatorKind::Unitary)
    }

    pub fn projector(matrix: DMatrix<C64>) -> Result<Self> {
        Operator::new(matrix, OperatorKind::Projector)
    }

    pub fn hermitian(matrix: DMatrix<C64>) -> Result<Self> {
        Operator::new(matrix, OperatorKind::Hermitian)
    }

    /// Row-major convenience constructor.
    pub fn from_rows(dim: usize, entries: &[C64], kind: OperatorKind) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Operator::new(DMatrix::from_row_slice(dim, dim, entries), kind)
    }

    pub fn identity(dim: usize) -> Self {
        Operator {
            matrix: DMatrix::identity(dim, dim),
            kind: OperatorKind::Unitary,
        }
    }

    /// Rank-1 projector onto the ray through `state`.
    pub fn projector_onto(state: &StateVector) -> Result<Self> {
        let s = state.normalized()?;
        let v = s.vector();
        Operator::projector(v * v.adjoint())
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            matrix: self.matrix.adjoint(),
            kind: self.kind,
        }
    }

    /// `other` applied after `self`, i.e. the matrix product `other · self`.
    pub fn then(&self, other: &Operator) -> Result<Operator> {
        if self.kind != OperatorKind::Unitary || other.kind != OperatorKind::Unitary {
            return Err(Error::NotUnitary(f64::NAN));
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Operator::unitary(&other.matrix * &self.matrix)
    }

    /// Kronecker product; the kind is kept when both operands share it.
    pub fn kron(&self, other: &Operator) -> Operator {
        let kind = if self.kind == other.kind {
            self.kind
        } else {
            OperatorKind::Hermitian
        };
        Operator {
            matrix: self.matrix.kronecker(&other.matrix),
            kind,
        }
    }

    /// Lifts a single-factor operator to the full `space`, acting as the
    /// identity on every other factor.
    pub fn on_factor(&self, space: &Space, subsystem: Subsystem) -> Result<Operator> {
        let pos = space.position(subsystem).ok_or_else(|| {
            Error::InvalidSelection(format!("{subsystem:?} is not part of the space"))
        })?;
        let fdim = space.factors()[pos].dim();
        if fdim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: fdim,
                found: self.dim(),
            });
        }
        let mut out: Option<Operator> = None;
        for (k, f) in space.factors().iter().enumerate() {
            let piece = if k == pos {
                self.clone()
            } else {
                let mut id = Operator::identity(f.dim());
                id.kind = self.kind;
                id
            };
            out = Some(match out {
                None => piece,
                Some(acc) => acc.kron(&piece),
            });
        }
        Ok(out.expect("space has at least one factor"))
    }

    /// `1 - P` for a projector `P`.
    pub fn complement(&self) -> Result<Operator> {
        if self.kind != OperatorKind::Projector {
            return Err(Error::NotProjector(f64::NAN));
        }
        let n = self.dim();
        Operator::projector(DMatrix::identity(n, n) - &self.matrix)
    }

    /// Direct sum with an identity block, extending a unitary to `dim` modes.
    pub fn padded(&self, dim: usize) -> Result<Operator> {
        let n = self.dim();
        if dim < n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: dim,
            });
        }
        let mut m = DMatrix::identity(dim, dim);
        m.view_mut((0, 0), (n, n)).copy_from(&self.matrix);
        if self.kind == OperatorKind::Projector {
            for i in n..dim {
                m[(i, i)] = ZERO;
            }
        }
        Operator::new(m, self.kind)
    }

    /// `⟨s|A|s⟩`, real part.
    pub fn expectation(&self, s: &StateVector) -> Result<f64> {
        if s.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: s.dim(),
            });
        }
        Ok(s.vector().dotc(&(&self.matrix * s.vector())).re)
    }

    fn act(&self, s: &StateVector) -> StateVector {
        StateVector {
            space: s.space.clone(),
            amplitudes: &self.matrix * &s.amplitudes,
        }
    }
}

/// Hermitian, positive semi-definite, unit-trace matrix over a [`Space`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(space: Space, matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&matrix)?;
        if matrix.nrows() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: matrix.nrows(),
            });
        }
        let herm = max_abs(&(matrix.adjoint() - &matrix));
        if herm > EXACT_TOL {
            return Err(Error::InvalidDensity(format!("not hermitian ({herm:e})")));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > EXACT_TOL || trace.im.abs() > EXACT_TOL {
            return Err(Error::InvalidDensity(format!("trace {trace}")));
        }
        let min_eigen = SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eigen < EIGEN_FLOOR {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_eigen:e}"
            )));
        }
        Ok(DensityMatrix { space, matrix })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `Tr(ρ²)`; 1 for pure states.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Largest off-diagonal magnitude.
    pub fn max_coherence(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix[(i, j)].norm())
            .fold(0.0, f64::max)
    }

    /// `Tr(ρA)`, real part.
    pub fn expectation(&self, op: &Operator) -> Result<f64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.dim(),
            });
        }
        Ok((&self.matrix * op.matrix()).trace().re)
    }

    /// Born probabilities for a complete set of orthogonal projectors.
    pub fn probabilities(&self, projectors: &[Operator]) -> Result<Vec<f64>> {
        check_complete(projectors, self.dim())?;
        let raw = projectors
            .iter()
            .map(|p| self.expectation(p).map(|v| v.max(0.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(renormalize(raw))
    }
}

/// Tensor product of two states over disjoint subsystems.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let space = a.space.tensor(&b.space)?;
    Ok(StateVector {
        space,
        amplitudes: a.amplitudes.kronecker(&b.amplitudes),
    })
}

/// Process 2: unitary evolution.
pub fn apply_unitary(u: &Operator, s: &StateVector) -> Result<StateVector> {
    if u.kind != OperatorKind::Unitary {
        return Err(Error::NotUnitary(unitarity_defect(&u.matrix)));
    }
    if u.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: u.dim(),
        });
    }
    Ok(u.act(s))
}

/// `⟨a|b⟩`, antilinear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    if a.space != b.space {
        return Err(Error::BasisMismatch);
    }
    Ok(a.amplitudes.dotc(&b.amplitudes))
}

pub fn density_from_pure(s: &StateVector) -> Result<DensityMatrix> {
    let n = s.norm_sqr();
    if (n - 1.0).abs() > EXACT_TOL {
        return Err(Error::NotNormalized(n));
    }
    let v = &s.amplitudes;
    DensityMatrix::new(s.space.clone(), v * v.adjoint())
}

/// Traces out every subsystem not listed in `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[Subsystem]) -> Result<DensityMatrix> {
    let space = &rho.space;
    if keep.is_empty() {
        return Err(Error::InvalidSelection("nothing to keep".into()));
    }
    for s in keep {
        if space.position(*s).is_none() {
            return Err(Error::InvalidSelection(format!("{s:?} is not part of the space")));
        }
    }
    let kept: Vec<bool> = space
        .factors()
        .iter()
        .map(|f| keep.contains(&f.subsystem))
        .collect();
    if kept.iter().all(|k| *k) {
        return Err(Error::InvalidSelection(
            "keep must be a proper subset of the subsystems".into(),
        ));
    }
    let reduced = Space::new(
        space
            .factors()
            .iter()
            .zip(&kept)
            .filter(|(_, k)| **k)
            .map(|(f, _)| f.clone())
            .collect(),
    )?;

    let n = space.dim();
    let digits: Vec<Vec<usize>> = (0..n).map(|i| space.unflatten(i)).collect();
    let split = |d: &[usize]| -> (usize, Vec<usize>) {
        let mut kept_flat = 0;
        let mut traced = Vec::new();
        for ((digit, f), k) in d.iter().zip(space.factors()).zip(&kept) {
            if *k {
                kept_flat = kept_flat * f.dim() + digit;
            } else {
                traced.push(*digit);
            }
        }
        (kept_flat, traced)
    };
    let parts: Vec<(usize, Vec<usize>)> = digits.iter().map(|d| split(d)).collect();

    let m = reduced.dim();
    let mut out = DMatrix::from_element(m, m, ZERO);
    for i in 0..n {
        for j in 0..n {
            if parts[i].1 == parts[j].1 {
                out[(parts[i].0, parts[j].0)] += rho.matrix[(i, j)];
            }
        }
    }
    DensityMatrix::new(reduced, out)
}

/// Result of a two-outcome projective measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Whether the state was found in the range of the projector.
    pub outcome: bool,
    /// Post-measurement state, renormalized.
    pub collapsed: StateVector,
    /// `⟨s|P|s⟩`, the success probability, independent of the sampled outcome.
    pub probability: f64,
}

/// Process 1: measures `{P, 1-P}` with one uniform draw from `rng`.
pub fn project<R: Rng + ?Sized>(s: &StateVector, p: &Operator, rng: &mut R) -> Result<Projection> {
    project_with_draw(s, p, uniform(rng))
}

/// Measurement driven by an explicit uniform `u ∈ [0, 1)`: success iff `u < ⟨s|P|s⟩`.
pub fn project_with_draw(s: &StateVector, p: &Operator, u: f64) -> Result<Projection> {
    let probability = success_probability(s, p)?;
    project_onto(s, p, u < probability)
}

/// Collapses onto the requested outcome without sampling.
pub fn project_onto(s: &StateVector, p: &Operator, outcome: bool) -> Result<Projection> {
    let probability = success_probability(s, p)?;
    let branch = if outcome { probability } else { 1.0 - probability };
    if branch <= 0.0 {
        return Err(Error::ImpossibleOutcome);
    }
    let image = if outcome { p.act(s) } else { p.complement()?.act(s) };
    let collapsed = image.normalized().map_err(|_| Error::ImpossibleOutcome)?;
    Ok(Projection {
        outcome,
        collapsed,
        probability,
    })
}

fn success_probability(s: &StateVector, p: &Operator) -> Result<f64> {
    if p.kind != OperatorKind::Projector {
        return Err(Error::NotProjector(projector_defect(&p.matrix)));
    }
    let n = s.norm_sqr();
    if (n - 1.0).abs() > EXACT_TOL {
        return Err(Error::NotNormalized(n));
    }
    Ok(p.expectation(s)?.clamp(0.0, 1.0))
}

/// Born probabilities for a complete set of orthogonal projectors.
///
/// The entries are rescaled by their sum so they add to one up to the last
/// ulp; the rescaling only absorbs rounding, since completeness is checked.
pub fn born_probabilities(s: &StateVector, projectors: &[Operator]) -> Result<Vec<f64>> {
    check_complete(projectors, s.dim())?;
    let n = s.norm_sqr();
    if (n - 1.0).abs() > EXACT_TOL {
        return Err(Error::NotNormalized(n));
    }
    let raw = projectors
        .iter()
        .map(|p| p.expectation(s).map(|v| v.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(renormalize(raw))
}

/// Born probabilities in the computational basis.
pub fn basis_probabilities(s: &StateVector) -> Result<Vec<f64>> {
    let n = s.norm_sqr();
    if (n - 1.0).abs() > EXACT_TOL {
        return Err(Error::NotNormalized(n));
    }
    Ok(renormalize(s.amplitudes.iter().map(|a| a.norm_sqr()).collect()))
}

/// One projector per basis state of `space`.
pub fn computational_projectors(space: &Space) -> Vec<Operator> {
    let n = space.dim();
    (0..n)
        .map(|i| {
            let mut m = DMatrix::from_element(n, n, ZERO);
            m[(i, i)] = ONE;
            Operator {
                matrix: m,
                kind: OperatorKind::Projector,
            }
        })
        .collect()
}

fn renormalize(mut probs: Vec<f64>) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    probs
}

fn check_complete(projectors: &[Operator], dim: usize) -> Result<()> {
    let mut sum = DMatrix::from_element(dim, dim, ZERO);
    for p in projectors {
        if p.kind != OperatorKind::Projector {
            return Err(Error::NotProjector(projector_defect(&p.matrix)));
        }
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        sum += &p.matrix;
    }
    let defect = max_abs(&(sum - DMatrix::identity(dim, dim)));
    if defect > EXACT_TOL {
        return Err(Error::IncompleteProjectors(defect));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn slit(name: &str) -> StateVector {
        StateVector::labelled(Factor::slits(), name).unwrap()
    }

    fn det(name: &str) -> StateVector {
        StateVector::labelled(Factor::detectors(), name).unwrap()
    }

    fn slit_superposition(phase: f64) -> StateVector {
        StateVector::superposition(
            Space::single(Factor::slits()),
            vec![ONE, C64::from_polar(1.0, phase)],
        )
        .unwrap()
    }

    fn entangled() -> StateVector {
        let space = Space::new(vec![Factor::slits(), Factor::detectors()]).unwrap();
        let mut a = vec![ZERO; 4];
        a[space.index_of(&["S1", "D1"]).unwrap()] = ONE;
        a[space.index_of(&["S2", "D2"]).unwrap()] = ONE;
        StateVector::superposition(space, a).unwrap()
    }

    #[test]
    fn tensor_of_basis_states() {
        let s = tensor(&slit("S1"), &det("D1")).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        assert_eq!(s.space().basis()[0][1].name, "D1");
    }

    #[test]
    fn tensor_is_linear() {
        let s = tensor(&slit_superposition(0.0), &det("D1")).unwrap();
        let h = FRAC_1_SQRT_2;
        assert!(s.approx_eq(
            &StateVector::new(s.space().clone(), vec![c(h, 0.0), ZERO, c(h, 0.0), ZERO]).unwrap(),
            EXACT_TOL
        ));
    }

    #[test]
    fn tensor_hand_expanded_outer_product() {
        // (|S1> + i|S2>)/√2 ⊗ (|H> - |V>)/√2
        let a = StateVector::superposition(Space::single(Factor::slits()), vec![ONE, c(0.0, 1.0)])
            .unwrap();
        let b = StateVector::superposition(
            Space::single(Factor::polarization()),
            vec![ONE, c(-1.0, 0.0)],
        )
        .unwrap();
        let s = tensor(&a, &b).unwrap();
        let expected = [c(0.5, 0.0), c(-0.5, 0.0), c(0.0, 0.5), c(0.0, -0.5)];
        for (x, y) in s.amplitudes().iter().zip(expected) {
            assert!((x - y).norm() < EXACT_TOL);
        }
        assert!((s.norm_sqr() - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn tensor_rejects_shared_subsystem() {
        assert_eq!(
            tensor(&slit("S1"), &slit("S2")),
            Err(Error::SubsystemCollision(Subsystem::Path))
        );
    }

    #[test]
    fn identity_leaves_state_alone() {
        let s = slit_superposition(0.3);
        let out = apply_unitary(&Operator::identity(2), &s).unwrap();
        assert!(out.approx_eq(&s, EXACT_TOL));
    }

    #[test]
    fn pi_phase_flips_relative_sign() {
        let u = Operator::from_rows(
            2,
            &[ONE, ZERO, ZERO, C64::from_polar(1.0, PI)],
            OperatorKind::Unitary,
        )
        .unwrap();
        let out = apply_unitary(&u, &slit_superposition(0.0)).unwrap();
        assert!(out.approx_eq(&slit_superposition(PI), EXACT_TOL));
    }

    #[test]
    fn apply_unitary_rejects_bad_inputs() {
        let p = Operator::projector_onto(&slit("S1")).unwrap();
        assert!(matches!(apply_unitary(&p, &slit("S1")), Err(Error::NotUnitary(_))));
        assert!(matches!(
            apply_unitary(&Operator::identity(4), &slit("S1")),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = DMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(Operator::unitary(bad), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn inner_products() {
        assert!((inner_product(&slit("S1"), &slit("S1")).unwrap() - ONE).norm() < EXACT_TOL);
        assert_eq!(inner_product(&slit("S1"), &slit("S2")).unwrap(), ZERO);
        assert!(inner_product(&slit_superposition(0.0), &slit_superposition(PI))
            .unwrap()
            .norm()
            < EXACT_TOL);
        assert_eq!(inner_product(&slit("S1"), &det("D1")), Err(Error::BasisMismatch));
    }

    #[test]
    fn pure_densities() {
        let r = density_from_pure(&slit("S1")).unwrap();
        assert_eq!(r.entry(0, 0), ONE);
        assert_eq!(r.entry(1, 1), ZERO);

        let r = density_from_pure(&slit_superposition(0.0)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.entry(i, j) - c(0.5, 0.0)).norm() < EXACT_TOL);
            }
        }

        let r = density_from_pure(&slit_superposition(PI / 3.0)).unwrap();
        let expected_01 = C64::from_polar(0.5, -PI / 3.0);
        assert!((r.entry(0, 1) - expected_01).norm() < EXACT_TOL);
        assert!((r.entry(1, 0) - expected_01.conj()).norm() < EXACT_TOL);
        assert!((r.purity() - 1.0).abs() < EXACT_TOL);
        let sq = r.matrix() * r.matrix();
        assert!(max_abs(&(sq - r.matrix())) < EXACT_TOL);
    }

    #[test]
    fn density_requires_normalized_state() {
        let s = StateVector::new(Space::single(Factor::slits()), vec![ONE, ONE]).unwrap();
        assert!(matches!(density_from_pure(&s), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn tracing_orthogonal_markers_kills_coherence() {
        let rho = density_from_pure(&entangled()).unwrap();
        let path = partial_trace(&rho, &[Subsystem::Path]).unwrap();
        assert!((path.entry(0, 0).re - 0.5).abs() < EXACT_TOL);
        assert!((path.entry(1, 1).re - 0.5).abs() < EXACT_TOL);
        assert!(path.max_coherence() < EXACT_TOL);
    }

    #[test]
    fn tracing_product_marker_keeps_coherence() {
        let s = tensor(&slit_superposition(0.0), &det("D1")).unwrap();
        let path = partial_trace(&density_from_pure(&s).unwrap(), &[Subsystem::Path]).unwrap();
        assert!((path.entry(0, 1).re - 0.5).abs() < EXACT_TOL);
    }

    #[test]
    fn partial_distinguishability() {
        // (|S1,D1> + |S2,(D1+D2)/√2>)/√2
        let space = Space::new(vec![Factor::slits(), Factor::detectors()]).unwrap();
        let h = FRAC_1_SQRT_2;
        let s = StateVector::new(
            space,
            vec![c(h, 0.0), ZERO, c(0.5, 0.0), c(0.5, 0.0)],
        )
        .unwrap();
        let path = partial_trace(&density_from_pure(&s).unwrap(), &[Subsystem::Path]).unwrap();
        assert!((path.entry(0, 1).norm() - 1.0 / (2.0 * 2f64.sqrt())).abs() < EXACT_TOL);
    }

    #[test]
    fn partial_trace_selection_errors() {
        let rho = density_from_pure(&entangled()).unwrap();
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &[Subsystem::Path, Subsystem::Marker]).is_err());
        assert!(partial_trace(&rho, &[Subsystem::Polarization]).is_err());
    }

    #[test]
    fn projecting_an_eigenstate() {
        let p = Operator::projector_onto(&slit("S1")).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let r = project(&slit("S1"), &p, &mut rng).unwrap();
        assert!(r.outcome);
        assert!(r.collapsed.approx_eq(&slit("S1"), EXACT_TOL));
        assert_eq!(r.probability, 1.0);
    }

    #[test]
    fn projecting_entangled_state_onto_detector() {
        let s = entangled();
        let d1 = Operator::projector_onto(&det("D1"))
            .unwrap()
            .on_factor(s.space(), Subsystem::Marker)
            .unwrap();
        let r = project_with_draw(&s, &d1, 0.1).unwrap();
        assert!((r.probability - 0.5).abs() < EXACT_TOL);
        assert!(r.outcome);
        let expected = tensor(&slit("S1"), &det("D1")).unwrap();
        assert!(r.collapsed.approx_eq(&expected, EXACT_TOL));
        let miss = project_with_draw(&s, &d1, 0.9).unwrap();
        assert!(!miss.outcome);
        assert!(miss
            .collapsed
            .approx_eq(&tensor(&slit("S2"), &det("D2")).unwrap(), EXACT_TOL));
    }

    #[test]
    fn projection_probability_follows_phase() {
        let target = Operator::projector_onto(&slit_superposition(0.0)).unwrap();
        for theta in [0.0, PI / 2.0, PI] {
            let r = project_onto(&slit_superposition(theta), &target, true);
            let expected = (1.0 + theta.cos()) / 2.0;
            match r {
                Ok(r) => assert!((r.probability - expected).abs() < EXACT_TOL),
                Err(e) => {
                    assert_eq!(e, Error::ImpossibleOutcome);
                    assert!(expected < EXACT_TOL);
                }
            }
        }
    }

    #[test]
    fn forced_impossible_outcome_is_an_error() {
        let p = Operator::projector_onto(&slit("S2")).unwrap();
        assert_eq!(project_onto(&slit("S1"), &p, true), Err(Error::ImpossibleOutcome));
    }

    #[test]
    fn born_rule_examples() {
        let projectors = computational_projectors(&Space::single(Factor::slits()));
        assert_eq!(born_probabilities(&slit("S1"), &projectors).unwrap(), vec![1.0, 0.0]);
        let p = born_probabilities(&slit_superposition(0.0), &projectors).unwrap();
        assert!((p[0] - 0.5).abs() < EXACT_TOL && (p[1] - 0.5).abs() < EXACT_TOL);

        let s = entangled();
        let dets: Vec<Operator> = ["D1", "D2"]
            .iter()
            .map(|n| {
                Operator::projector_onto(&det(n))
                    .unwrap()
                    .on_factor(s.space(), Subsystem::Marker)
                    .unwrap()
            })
            .collect();
        let p = born_probabilities(&s, &dets).unwrap();
        assert!((p[0] - 0.5).abs() < EXACT_TOL && (p[1] - 0.5).abs() < EXACT_TOL);
    }

    #[test]
    fn incomplete_projector_set_is_rejected() {
        let only = vec![Operator::projector_onto(&slit("S1")).unwrap()];
        assert!(matches!(
            born_probabilities(&slit("S1"), &only),
            Err(Error::IncompleteProjectors(_))
        ));
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
            .prop_filter("non-zero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
            .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
    }

    fn rotation(theta: f64, phi: f64) -> Operator {
        Operator::from_rows(
            2,
            &[
                c(theta.cos(), 0.0),
                -C64::from_polar(theta.sin(), phi).conj(),
                C64::from_polar(theta.sin(), phi),
                c(theta.cos(), 0.0),
            ],
            OperatorKind::Unitary,
        )
        .unwrap()
    }

    fn space3() -> Space {
        Space::new(vec![Factor::slits(), Factor::detectors(), Factor::polarization()]).unwrap()
    }

    proptest! {
        #[test]
        fn unitary_chains_preserve_norm_and_reverse(
            amps in arb_state(8),
            angles in prop::collection::vec((0.0f64..PI, 0.0f64..2.0 * PI), 1..6),
        ) {
            let space = space3();
            let s = StateVector::superposition(space.clone(), amps).unwrap();
            let subsystems = [Subsystem::Path, Subsystem::Marker, Subsystem::Polarization];
            let mut out = s.clone();
            let mut ops = Vec::new();
            for (k, (t, p)) in angles.iter().enumerate() {
                let u = rotation(*t, *p).on_factor(&space, subsystems[k % 3]).unwrap();
                out = apply_unitary(&u, &out).unwrap();
                ops.push(u);
            }
            prop_assert!((out.norm_sqr() - 1.0).abs() < EXACT_TOL);
            for u in ops.iter().rev() {
                out = apply_unitary(&u.adjoint(), &out).unwrap();
            }
            prop_assert!(out.approx_eq(&s, CHAIN_TOL));
        }

        #[test]
        fn inner_product_is_conjugate_symmetric(a in arb_state(4), b in arb_state(4)) {
            let sp = Space::single(Factor::new(Subsystem::Path, &["a", "b", "c", "d"]));
            let a = StateVector::new(sp.clone(), a).unwrap();
            let b = StateVector::new(sp, b).unwrap();
            let ab = inner_product(&a, &b).unwrap();
            let ba = inner_product(&b, &a).unwrap();
            prop_assert!((ab - ba.conj()).norm() < EXACT_TOL);
        }

        #[test]
        fn projection_is_idempotent(amps in arb_state(4), target in arb_state(2), u in 0.0f64..1.0) {
            let space = Space::new(vec![Factor::slits(), Factor::polarization()]).unwrap();
            let s = StateVector::superposition(space.clone(), amps).unwrap();
            let t = StateVector::new(Space::single(Factor::polarization()), target).unwrap();
            let p = Operator::projector_onto(&t).unwrap()
                .on_factor(&space, Subsystem::Polarization).unwrap();
            let first = project_with_draw(&s, &p, u).unwrap();
            let second = project_onto(&first.collapsed, &p, first.outcome).unwrap();
            let second_prob = if first.outcome { second.probability } else { 1.0 - second.probability };
            prop_assert!((second_prob - 1.0).abs() < EXACT_TOL);
            prop_assert!(second.collapsed.approx_eq(&first.collapsed, EXACT_TOL));
        }

        #[test]
        fn reduced_state_reproduces_local_statistics(
            amps in arb_state(8),
            target in arb_state(2),
        ) {
            let space = space3();
            let s = StateVector::superposition(space.clone(), amps).unwrap();
            let t = StateVector::new(Space::single(Factor::polarization()), target).unwrap();
            let local = Operator::projector_onto(&t).unwrap();
            let local_set = vec![local.clone(), local.complement().unwrap()];
            let full_set: Vec<Operator> = local_set
                .iter()
                .map(|p| p.on_factor(&space, Subsystem::Polarization).unwrap())
                .collect();
            let full = born_probabilities(&s, &full_set).unwrap();
            let rho = density_from_pure(&s).unwrap();
            let reduced = partial_trace(&rho, &[Subsystem::Polarization]).unwrap();
            let local_p = reduced.probabilities(&local_set).unwrap();
            for (x, y) in full.iter().zip(&local_p) {
                prop_assert!((x - y).abs() < EXACT_TOL);
            }
            let sum: f64 = full.iter().sum();
            prop_assert!((sum - 1.0).abs() < EXACT_TOL);
        }

        #[test]
        fn orthogonal_and_identical_markers(path in arb_state(2), marker in arb_state(2)) {
            let p = StateVector::superposition(Space::single(Factor::slits()), path).unwrap();
            let m = StateVector::superposition(Space::single(Factor::detectors()), marker).unwrap();
            let a = m.amplitudes();
            let m_perp = StateVector::new(
                m.space().clone(),
                vec![-a[1].conj(), a[0].conj()],
            ).unwrap();
            let entangle = |m1: &StateVector, m2: &StateVector| {
                let s1 = tensor(&slit("S1"), m1).unwrap();
                let s2 = tensor(&slit("S2"), m2).unwrap();
                let amps: Vec<C64> = s1.amplitudes().iter().zip(s2.amplitudes())
                    .map(|(x, y)| p.amplitude(0) * x + p.amplitude(1) * y)
                    .collect();
                let s = StateVector::new(s1.space().clone(), amps).unwrap();
                partial_trace(&density_from_pure(&s).unwrap(), &[Subsystem::Path]).unwrap()
            };
            prop_assert!(entangle(&m, &m_perp).max_coherence() < EXACT_TOL);
            let same = entangle(&m, &m);
            let expected = (p.amplitude(0) * p.amplitude(1).conj()).norm();
            prop_assert!((same.max_coherence() - expected).abs() < EXACT_TOL);
        }
    }

    #[test]
    fn equal_superposition_with_identical_markers_has_half_coherence() {
        let s = tensor(&slit_superposition(0.7), &det("D2")).unwrap();
        let r = partial_trace(&density_from_pure(&s).unwrap(), &[Subsystem::Path]).unwrap();
        assert!((r.max_coherence() - 0.5).abs() < EXACT_TOL);
    }
}
