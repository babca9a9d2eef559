//! Concrete group models: tori, the Heisenberg group and its integer
//! nilmanifold, and SU(2).
//!
//! All models use left-invariant frames: `V_i f(g) = d/ds f(g·exp(s e_i))|₀`
//! where `e_1..e_d` are the first `d` algebra basis vectors.

pub mod heisenberg;
pub mod quaternion;
pub mod su2;

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Deref, Index};

pub use quaternion::Quaternion;

pub const MAX_TORUS_DIM: usize = 6;
/// Default step for central-difference directional derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Which concrete group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupModel {
    Torus(usize),
    HeisenbergNilmanifold,
    Heisenberg,
    Su2,
}

impl GroupModel {
    pub fn torus(d: usize) -> Result<Self> {
        if (1..=MAX_TORUS_DIM).contains(&d) {
            Ok(GroupModel::Torus(d))
        } else {
            Err(Error::invalid(
                "torus dimension",
                format!("{d} not in 1..={MAX_TORUS_DIM}"),
            ))
        }
    }

    /// Parses `torus:<d>`, `heisenberg-nilmanifold`, `heisenberg` or `su2`.
    pub fn parse(id: &str) -> Result<Self> {
        let unknown = || Error::UnknownModel { id: id.to_string() };
        match id.trim() {
            "heisenberg-nilmanifold" => Ok(GroupModel::HeisenbergNilmanifold),
            "heisenberg" | "heisenberg-free" => Ok(GroupModel::Heisenberg),
            "su2" => Ok(GroupModel::Su2),
            other => {
                let d = other
                    .strip_prefix("torus:")
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(unknown)?;
                if (1..=MAX_TORUS_DIM).contains(&d) {
                    Ok(GroupModel::Torus(d))
                } else {
                    Err(unknown())
                }
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            GroupModel::Torus(d) => format!("torus:{d}"),
            GroupModel::HeisenbergNilmanifold => "heisenberg-nilmanifold".into(),
            GroupModel::Heisenberg => "heisenberg".into(),
            GroupModel::Su2 => "su2".into(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            GroupModel::Torus(d) => *d,
            _ => 3,
        }
    }

    pub fn horizontal_rank(&self) -> usize {
        match self {
            GroupModel::Torus(d) => *d,
            _ => 2,
        }
    }

    pub fn step(&self) -> usize {
        match self {
            GroupModel::Torus(_) => 1,
            _ => 2,
        }
    }

    /// Number of coordinates in the flat representation of an element.
    pub fn coord_len(&self) -> usize {
        match self {
            GroupModel::Torus(d) => *d,
            GroupModel::Su2 => 4,
            _ => 3,
        }
    }

    pub fn chart(&self) -> &'static str {
        match self {
            GroupModel::Torus(_) => "angles in [0, 2π); Haar = Lebesgue, total mass (2π)^d",
            GroupModel::HeisenbergNilmanifold => {
                "exponential coordinates (x, y, z) in [0,1)³ after left lattice reduction; Haar = Lebesgue, volume 1"
            }
            GroupModel::Heisenberg => "exponential coordinates (x, y, z) ∈ ℝ³; Haar = Lebesgue",
            GroupModel::Su2 => {
                "unit quaternion (a, b, c, d); densities in the chart (b²+c², atan2(d,a), atan2(c,b)) where Haar is uniform"
            }
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self, GroupModel::Heisenberg)
    }

    /// Total Haar mass of the chart domain on which densities are normalized.
    pub fn haar_volume(&self) -> f64 {
        match self {
            GroupModel::Torus(d) => TAU.powi(*d as i32),
            GroupModel::HeisenbergNilmanifold | GroupModel::Su2 => 1.0,
            GroupModel::Heisenberg => f64::INFINITY,
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupModel::Torus(d) => GroupElement::Torus(Coords::zeros(*d)),
            GroupModel::HeisenbergNilmanifold | GroupModel::Heisenberg => GroupElement::Heisenberg([0.0; 3]),
            GroupModel::Su2 => GroupElement::Su2(Quaternion::ONE),
        }
    }

    /// Builds an element from flat coordinates, reducing or renormalizing.
    pub fn element(&self, coords: &[f64]) -> Result<GroupElement> {
        Ok(self.canonical(self.element_verbatim(coords)?))
    }

    /// Like [`GroupModel::element`] but keeps the coordinates bit for bit.
    pub(crate) fn element_verbatim(&self, coords: &[f64]) -> Result<GroupElement> {
        if coords.len() != self.coord_len() {
            return Err(Error::Format(format!(
                "{} expects {} coordinates, got {}",
                self.id(),
                self.coord_len(),
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::non_finite("element coordinates"));
        }
        let g = match self {
            GroupModel::Torus(_) => GroupElement::Torus(Coords::from_slice(coords)),
            GroupModel::Su2 => {
                let q = Quaternion::from_array([coords[0], coords[1], coords[2], coords[3]]);
                if q.norm() == 0.0 {
                    return Err(Error::Degenerate("zero quaternion".into()));
                }
                GroupElement::Su2(q)
            }
            _ => GroupElement::Heisenberg([coords[0], coords[1], coords[2]]),
        };
        Ok(g)
    }

    /// Brings a representative into canonical form: angles mod 2π,
    /// nilmanifold fundamental domain, unit quaternions.
    pub fn canonical(&self, g: GroupElement) -> GroupElement {
        match (self, g) {
            (GroupModel::Torus(_), GroupElement::Torus(mut a)) => {
                for v in a.as_mut_slice() {
                    *v = wrap_angle(*v);
                }
                GroupElement::Torus(a)
            }
            (GroupModel::HeisenbergNilmanifold, GroupElement::Heisenberg(h)) => {
                GroupElement::Heisenberg(heisenberg::reduce(h))
            }
            (GroupModel::Su2, GroupElement::Su2(q)) => GroupElement::Su2(q.normalized()),
            _ => g,
        }
    }

    pub fn check(&self, g: &GroupElement) -> Result<()> {
        let ok = match (self, g) {
            (GroupModel::Torus(d), GroupElement::Torus(a)) => a.len() == *d,
            (GroupModel::HeisenbergNilmanifold | GroupModel::Heisenberg, GroupElement::Heisenberg(_)) => true,
            (GroupModel::Su2, GroupElement::Su2(_)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ModelMismatch {
                expected: self.id(),
                found: g.kind_name(),
            })
        }
    }

    fn check_algebra(&self, v: &AlgebraVector) -> Result<()> {
        if v.len() != self.dimension() {
            return Err(Error::ModelMismatch {
                expected: format!("algebra vector of length {}", self.dimension()),
                found: format!("length {}", v.len()),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::non_finite("algebra vector"));
        }
        Ok(())
    }

    pub fn mul(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul_unchecked(g, h))
    }

    /// Product without kind checks; callers guarantee both belong to `self`.
    pub(crate) fn mul_unchecked(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let raw = match (g, h) {
            (GroupElement::Torus(a), GroupElement::Torus(b)) => {
                let mut c = *a;
                for (x, y) in c.as_mut_slice().iter_mut().zip(b.iter()) {
                    *x += *y;
                }
                GroupElement::Torus(c)
            }
            (GroupElement::Heisenberg(a), GroupElement::Heisenberg(b)) => {
                GroupElement::Heisenberg(heisenberg::mul(*a, *b))
            }
            (GroupElement::Su2(a), GroupElement::Su2(b)) => GroupElement::Su2(*a * *b),
            _ => unreachable!("mul_unchecked on mismatched kinds"),
        };
        self.canonical(raw)
    }

    /// Inverse of the representative. On the nilmanifold this is the reduced
    /// inverse of the canonical lift (cosets have no inverse).
    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        let raw = match g {
            GroupElement::Torus(a) => {
                let mut c = *a;
                for v in c.as_mut_slice() {
                    *v = -*v;
                }
                GroupElement::Torus(c)
            }
            GroupElement::Heisenberg(h) => GroupElement::Heisenberg(heisenberg::inverse(*h)),
            GroupElement::Su2(q) => GroupElement::Su2(q.conj()),
        };
        Ok(self.canonical(raw))
    }

    pub fn exp(&self, v: &AlgebraVector) -> Result<GroupElement> {
        self.check_algebra(v)?;
        Ok(self.exp_unchecked(v))
    }

    pub(crate) fn exp_unchecked(&self, v: &AlgebraVector) -> GroupElement {
        self.canonical(self.exp_raw(v))
    }

    fn exp_raw(&self, v: &AlgebraVector) -> GroupElement {
        match self {
            GroupModel::Torus(_) => GroupElement::Torus(v.0),
            GroupModel::Heisenberg | GroupModel::HeisenbergNilmanifold => GroupElement::Heisenberg([v[0], v[1], v[2]]),
            GroupModel::Su2 => GroupElement::Su2(Quaternion::exp_pure([v[0], v[1], v[2]])),
        }
    }

    /// `g · exp(v)`.
    pub fn translate(&self, g: &GroupElement, v: &AlgebraVector) -> Result<GroupElement> {
        self.check(g)?;
        self.check_algebra(v)?;
        Ok(self.translate_unchecked(g, v))
    }

    pub(crate) fn translate_unchecked(&self, g: &GroupElement, v: &AlgebraVector) -> GroupElement {
        self.mul_unchecked(g, &self.exp_raw(v))
    }

    /// Lie bracket in the fixed basis.
    pub fn bracket(&self, u: &AlgebraVector, v: &AlgebraVector) -> AlgebraVector {
        match self {
            GroupModel::Torus(d) => AlgebraVector::zeros(*d),
            GroupModel::Heisenberg | GroupModel::HeisenbergNilmanifold => {
                AlgebraVector::from_slice(&[0.0, 0.0, u[0] * v[1] - u[1] * v[0]])
            }
            GroupModel::Su2 => AlgebraVector::from_slice(&[
                2.0 * (u[1] * v[2] - u[2] * v[1]),
                2.0 * (u[2] * v[0] - u[0] * v[2]),
                2.0 * (u[0] * v[1] - u[1] * v[0]),
            ]),
        }
    }

    /// Unit algebra vector along generator `i` (zero-based).
    pub fn basis(&self, i: usize) -> AlgebraVector {
        let mut v = AlgebraVector::zeros(self.dimension());
        v.0.data[i] = 1.0;
        v
    }

    pub fn haar_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroupElement> {
        match self {
            GroupModel::Torus(d) => {
                let mut c = Coords::zeros(*d);
                for v in c.as_mut_slice() {
                    *v = rng.random::<f64>() * TAU;
                }
                Ok(GroupElement::Torus(c))
            }
            GroupModel::HeisenbergNilmanifold => Ok(GroupElement::Heisenberg([
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>(),
            ])),
            GroupModel::Su2 => loop {
                let q = Quaternion::new(
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                );
                if q.norm() > 1e-8 {
                    break Ok(GroupElement::Su2(q.normalized()));
                }
            },
            GroupModel::Heisenberg => Err(Error::Unsupported(
                "Haar sampling on the non-compact Heisenberg group".into(),
            )),
        }
    }

    /// Representative in the declared fundamental domain.
    pub fn reduce_to_fundamental_domain(&self, g: &GroupElement) -> Result<GroupElement> {
        match self {
            GroupModel::Torus(_) | GroupModel::HeisenbergNilmanifold => {
                self.check(g)?;
                Ok(self.canonical(*g))
            }
            _ => Err(Error::Unsupported(format!("{} has no lattice quotient", self.id()))),
        }
    }

    /// Carnot–Carathéodory distance for the unit frame `V_1..V_d`.
    pub fn cc_distance(&self, x: &GroupElement, y: &GroupElement) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        match (self, x, y) {
            (GroupModel::Torus(_), GroupElement::Torus(a), GroupElement::Torus(b)) => Ok(a
                .iter()
                .zip(b.iter())
                .map(|(p, q)| {
                    let d = wrap_angle(q - p);
                    let d = d.min(TAU - d);
                    d * d
                })
                .sum::<f64>()
                .sqrt()),
            (GroupModel::Heisenberg, GroupElement::Heisenberg(a), GroupElement::Heisenberg(b)) => Ok(
                heisenberg::distance_from_identity(heisenberg::mul(heisenberg::inverse(*a), *b)),
            ),
            (GroupModel::HeisenbergNilmanifold, GroupElement::Heisenberg(a), GroupElement::Heisenberg(b)) => {
                Ok(heisenberg::nil_distance(heisenberg::reduce(*a), heisenberg::reduce(*b)))
            }
            (GroupModel::Su2, GroupElement::Su2(a), GroupElement::Su2(b)) => su2::distance(*a, *b),
            _ => unreachable!("checked above"),
        }
    }

    /// `d½² := d_CC²/2`, the squared distance in the normalization of
    /// the short-time heat-kernel limit for `L = ½ Σ V_i²`.
    pub fn half_distance_sq(&self, x: &GroupElement, y: &GroupElement) -> Result<f64> {
        let d = self.cc_distance(x, y)?;
        Ok(0.5 * d * d)
    }

    /// Brackets the frame until the span stabilizes.
    pub fn bracket_generation_check(&self) -> BracketReport {
        let n = self.dimension();
        let mut layer: Vec<AlgebraVector> = (0..self.horizontal_rank()).map(|i| self.basis(i)).collect();
        let mut span = layer.clone();
        let mut rank = matrix_rank(&span, n);
        let mut step = 1;
        while rank < n && step < n + 1 {
            let mut next = Vec::new();
            for u in &layer {
                for i in 0..self.horizontal_rank() {
                    next.push(self.bracket(&self.basis(i), u));
                }
            }
            span.extend(next.iter().copied());
            let new_rank = matrix_rank(&span, n);
            if new_rank == rank {
                break;
            }
            rank = new_rank;
            layer = next;
            step += 1;
        }
        BracketReport {
            generating: rank == n,
            step,
            rank,
        }
    }
}

impl fmt::Display for GroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl std::str::FromStr for GroupModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GroupModel::parse(s)
    }
}

impl Serialize for GroupModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for GroupModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        GroupModel::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BracketReport {
    pub generating: bool,
    pub step: usize,
    pub rank: usize,
}

#[allow(clippy::needless_range_loop)]
fn matrix_rank(vs: &[AlgebraVector], n: usize) -> usize {
    let mut rows: Vec<Vec<f64>> = vs.iter().map(|v| v.to_vec()).collect();
    let mut rank = 0;
    for col in 0..n {
        let pivot = (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-12 {
            continue;
        }
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank {
                let f = rows[r][col] / rows[rank][col];
                for c in 0..n {
                    rows[r][c] -= f * rows[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// `x mod 2π` in `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    if (0.0..TAU).contains(&x) {
        return x;
    }
    if (-TAU..0.0).contains(&x) && x + TAU < TAU {
        return x + TAU;
    }
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Fixed-capacity real vector, at most six entries.
#[derive(Clone, Copy, PartialEq)]
pub struct Coords {
    data: [f64; MAX_TORUS_DIM],
    len: usize,
}

impl Coords {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_TORUS_DIM);
        Coords {
            data: [0.0; MAX_TORUS_DIM],
            len,
        }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut c = Coords::zeros(s.len());
        c.data[..s.len()].copy_from_slice(s);
        c
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.len]
    }
}

impl Deref for Coords {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data[..self.len]
    }
}

impl fmt::Debug for Coords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

/// Coefficients in the fixed algebra basis; the first `d` are horizontal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraVector(Coords);

impl AlgebraVector {
    pub fn zeros(n: usize) -> Self {
        AlgebraVector(Coords::zeros(n))
    }

    pub fn from_slice(s: &[f64]) -> Self {
        AlgebraVector(Coords::from_slice(s))
    }

    pub fn scale(mut self, s: f64) -> Self {
        for v in self.0.as_mut_slice() {
            *v *= s;
        }
        self
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(mut self, o: &AlgebraVector) -> Self {
        for (v, w) in self.0.as_mut_slice().iter_mut().zip(o.iter()) {
            *v += *w;
        }
        self
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.0.as_mut_slice()[i] = value;
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for AlgebraVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Serialize for AlgebraVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

/// A point of one of the models.
///
/// Flat coordinate order: torus angles `θ_1..θ_d`; Heisenberg `(x, y, z)`;
/// SU(2) quaternion `(a, b, c, d)` for `a + bi + cj + dk`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupElement {
    Torus(Coords),
    Heisenberg([f64; 3]),
    Su2(Quaternion),
}

impl GroupElement {
    pub fn coords(&self) -> Coords {
        match self {
            GroupElement::Torus(a) => *a,
            GroupElement::Heisenberg(h) => Coords::from_slice(h),
            GroupElement::Su2(q) => Coords::from_slice(&q.to_array()),
        }
    }

    fn kind_name(&self) -> String {
        match self {
            GroupElement::Torus(a) => format!("torus:{} element", a.len()),
            GroupElement::Heisenberg(_) => "heisenberg element".into(),
            GroupElement::Su2(_) => "su2 element".into(),
        }
    }

    pub fn as_heisenberg(&self) -> Option<[f64; 3]> {
        match self {
            GroupElement::Heisenberg(h) => Some(*h),
            _ => None,
        }
    }

    pub fn as_quaternion(&self) -> Option<Quaternion> {
        match self {
            GroupElement::Su2(q) => Some(*q),
            _ => None,
        }
    }
}

impl Index<usize> for GroupElement {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match self {
            GroupElement::Torus(a) => &a[i],
            GroupElement::Heisenberg(h) => &h[i],
            GroupElement::Su2(q) => match i {
                0 => &q.w,
                1 => &q.x,
                2 => &q.y,
                3 => &q.z,
                _ => panic!("quaternion index {i} out of range"),
            },
        }
    }
}

impl Serialize for GroupElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.coords().iter())
    }
}

/// A real function on a model, optionally with analytic frame derivatives.
pub trait ScalarField: Send + Sync {
    fn value(&self, g: &GroupElement) -> f64;

    /// `(V_i f)(g)` for zero-based generator index `i`, when known in closed form.
    fn directional(&self, _g: &GroupElement, _i: usize) -> Option<f64> {
        None
    }

    /// Fills `out[i] = (V_i f)(g)` for all `i < out.len()`. Returns false when
    /// some derivative has no closed form.
    fn horizontal_gradient(&self, g: &GroupElement, out: &mut [f64]) -> bool {
        for (i, o) in out.iter_mut().enumerate() {
            match self.directional(g, i) {
                Some(v) => *o = v,
                None => return false,
            }
        }
        true
    }
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn value(&self, g: &GroupElement) -> f64 {
        (**self).value(g)
    }
    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        (**self).directional(g, i)
    }
    fn horizontal_gradient(&self, g: &GroupElement, out: &mut [f64]) -> bool {
        (**self).horizontal_gradient(g, out)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Box<F> {
    fn value(&self, g: &GroupElement) -> f64 {
        (**self).value(g)
    }
    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        (**self).directional(g, i)
    }
    fn horizontal_gradient(&self, g: &GroupElement, out: &mut [f64]) -> bool {
        (**self).horizontal_gradient(g, out)
    }
}

impl<F: ScalarField + ?Sized> ScalarField for std::sync::Arc<F> {
    fn value(&self, g: &GroupElement) -> f64 {
        (**self).value(g)
    }
    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        (**self).directional(g, i)
    }
    fn horizontal_gradient(&self, g: &GroupElement, out: &mut [f64]) -> bool {
        (**self).horizontal_gradient(g, out)
    }
}

/// Scalar field from closures.
pub struct FnField<F, D = fn(&GroupElement, usize) -> f64> {
    f: F,
    d: Option<D>,
}

impl<F> FnField<F>
where
    F: Fn(&GroupElement) -> f64 + Send + Sync,
{
    pub fn new(f: F) -> Self {
        FnField { f, d: None }
    }
}

impl<F, D> FnField<F, D>
where
    F: Fn(&GroupElement) -> f64 + Send + Sync,
    D: Fn(&GroupElement, usize) -> f64 + Send + Sync,
{
    pub fn with_derivative(f: F, d: D) -> Self {
        FnField { f, d: Some(d) }
    }
}

impl<F, D> ScalarField for FnField<F, D>
where
    F: Fn(&GroupElement) -> f64 + Send + Sync,
    D: Fn(&GroupElement, usize) -> f64 + Send + Sync,
{
    fn value(&self, g: &GroupElement) -> f64 {
        (self.f)(g)
    }
    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        self.d.as_ref().map(|d| d(g, i))
    }
}

/// Constant field.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl ScalarField for Constant {
    fn value(&self, _: &GroupElement) -> f64 {
        self.0
    }
    fn directional(&self, _: &GroupElement, _: usize) -> Option<f64> {
        Some(0.0)
    }
}

/// Central difference `(f(g·exp(hV_i)) − f(g·exp(−hV_i)))/(2h)`, ignoring any
/// analytic derivative.
pub fn finite_difference<F: ScalarField + ?Sized>(
    model: &GroupModel,
    f: &F,
    g: &GroupElement,
    i: usize,
    h: f64,
) -> Result<f64> {
    let e = model.basis(i);
    let fp = f.value(&model.translate_unchecked(g, &e.scale(h)));
    let fm = f.value(&model.translate_unchecked(g, &e.scale(-h)));
    let v = (fp - fm) / (2.0 * h);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::non_finite(format!(
            "directional derivative V_{} at {:?}",
            i + 1,
            g.coords()
        )))
    }
}

/// `(V_i f)(g)` with zero-based `i`: the analytic derivative when supplied,
/// else a central difference with step `h`.
pub fn directional_derivative<F: ScalarField + ?Sized>(
    model: &GroupModel,
    f: &F,
    g: &GroupElement,
    i: usize,
    h: f64,
) -> Result<f64> {
    if i >= model.horizontal_rank() {
        return Err(Error::invalid(
            "generator index",
            format!("{} exceeds horizontal rank {}", i + 1, model.horizontal_rank()),
        ));
    }
    crate::error::ensure_positive("h", h)?;
    model.check(g)?;
    if let Some(v) = f.directional(g, i) {
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite(format!("analytic V_{} derivative", i + 1)))
        };
    }
    finite_difference(model, f, g, i, h)
}

/// Horizontal gradient `(V_1 f, …, V_d f)` padded to the algebra dimension.
pub fn horizontal_gradient<F: ScalarField + ?Sized>(
    model: &GroupModel,
    f: &F,
    g: &GroupElement,
) -> Result<AlgebraVector> {
    let mut v = AlgebraVector::zeros(model.dimension());
    for i in 0..model.horizontal_rank() {
        v.set(i, directional_derivative(model, f, g, i, DEFAULT_FD_STEP)?);
    }
    Ok(v)
}
