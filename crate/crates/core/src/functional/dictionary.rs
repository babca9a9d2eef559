//! Finite families of smooth test functions with analytic frame derivatives.

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupModel, Quaternion, ScalarField};
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// `cos(k·θ)` or `sin(k·θ)` on a torus.
#[derive(Clone, Debug)]
pub struct TorusTrig {
    pub k: Vec<f64>,
    pub sine: bool,
}

impl ScalarField for TorusTrig {
    fn value(&self, g: &GroupElement) -> f64 {
        let ph = phase(&self.k, g);
        if self.sine {
            ph.sin()
        } else {
            ph.cos()
        }
    }

    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        let ph = phase(&self.k, g);
        let ki = *self.k.get(i)?;
        Some(if self.sine { ki * ph.cos() } else { -ki * ph.sin() })
    }
}

fn phase(k: &[f64], g: &GroupElement) -> f64 {
    k.iter().zip(g.coords().iter()).map(|(a, b)| a * b).sum()
}

/// Characters `cos/sin 2π(mx + ny)` of the base torus of the nilmanifold.
#[derive(Clone, Copy, Debug)]
pub struct NilBase {
    pub m: f64,
    pub n: f64,
    pub sine: bool,
}

impl ScalarField for NilBase {
    fn value(&self, g: &GroupElement) -> f64 {
        let ph = TAU * (self.m * g[0] + self.n * g[1]);
        if self.sine {
            ph.sin()
        } else {
            ph.cos()
        }
    }

    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        // V₁ = ∂x − (y/2)∂z and V₂ = ∂y + (x/2)∂z act on x, y as plain partials
        let ph = TAU * (self.m * g[0] + self.n * g[1]);
        let c = TAU * [self.m, self.n].get(i)?;
        Some(if self.sine { c * ph.cos() } else { -c * ph.sin() })
    }
}

/// Weil–Brezin function of central frequency `k`:
///
/// ```text
/// F(x, y, z) = Σₙ φ(x + n) exp(2πik(z + xy/2 + ny)),
/// ```
///
/// with `φ(s) = exp(−π|k|s²)` (or `s·exp(−π|k|s²)` when `excited`). These
/// are invariant under the left lattice action.
#[derive(Clone, Copy, Debug)]
pub struct WeilBrezin {
    pub k: i32,
    pub excited: bool,
    pub imaginary: bool,
}

impl WeilBrezin {
    fn profile(&self, s: f64) -> (f64, f64) {
        let a = PI * self.k.unsigned_abs() as f64;
        let gauss = (-a * s * s).exp();
        if self.excited {
            (s * gauss, gauss * (1.0 - 2.0 * a * s * s))
        } else {
            (gauss, -2.0 * a * s * gauss)
        }
    }

    /// `(F, V₁F, V₂F)` as complex numbers `(re, im)`.
    fn eval(&self, g: &GroupElement) -> [(f64, f64); 3] {
        let (x, y, z) = (g[0], g[1], g[2]);
        let th = TAU * self.k as f64;
        let mut out = [(0.0, 0.0); 3];
        let reach = 4.5 / (self.k.unsigned_abs() as f64).sqrt();
        let lo = (-x - reach).floor() as i64;
        let hi = (-x + reach).ceil() as i64;
        for n in lo..=hi {
            let s = x + n as f64;
            let (phi, dphi) = self.profile(s);
            let (sn, cs) = (th * (z + 0.5 * x * y + n as f64 * y)).sin_cos();
            out[0].0 += phi * cs;
            out[0].1 += phi * sn;
            // the phase is annihilated by V₁; V₂ of the phase is θ(x + n)
            out[1].0 += dphi * cs;
            out[1].1 += dphi * sn;
            let w = phi * th * s;
            out[2].0 -= w * sn;
            out[2].1 += w * cs;
        }
        out
    }

    fn part(&self, c: (f64, f64)) -> f64 {
        if self.imaginary {
            c.1
        } else {
            c.0
        }
    }
}

impl ScalarField for WeilBrezin {
    fn value(&self, g: &GroupElement) -> f64 {
        self.part(self.eval(g)[0])
    }

    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        if i > 1 {
            return None;
        }
        Some(self.part(self.eval(g)[i + 1]))
    }

    fn horizontal_gradient(&self, g: &GroupElement, out: &mut [f64]) -> bool {
        let e = self.eval(g);
        for (i, o) in out.iter_mut().enumerate().take(2) {
            *o = self.part(e[i + 1]);
        }
        out.len() <= 2
    }
}

/// Matrix coefficients of SU(2) in the spin-½ and spin-1 representations,
/// written as polynomials in the quaternion components.
#[derive(Clone, Copy, Debug)]
pub enum Su2Coefficient {
    /// One quaternion component `w, x, y, z`.
    Half(usize),
    /// Entry `(r, c)` of the rotation matrix of `q`.
    One(usize, usize),
}

const UNITS: [Quaternion; 3] = [Quaternion::I, Quaternion::J, Quaternion::K];

impl Su2Coefficient {
    fn eval(&self, q: Quaternion) -> f64 {
        let [w, x, y, z] = q.to_array();
        match *self {
            Su2Coefficient::Half(i) => q.to_array()[i],
            Su2Coefficient::One(r, c) => match (r, c) {
                (0, 0) => 1.0 - 2.0 * (y * y + z * z),
                (0, 1) => 2.0 * (x * y - w * z),
                (0, 2) => 2.0 * (x * z + w * y),
                (1, 0) => 2.0 * (x * y + w * z),
                (1, 1) => 1.0 - 2.0 * (x * x + z * z),
                (1, 2) => 2.0 * (y * z - w * x),
                (2, 0) => 2.0 * (x * z - w * y),
                (2, 1) => 2.0 * (y * z + w * x),
                _ => 1.0 - 2.0 * (x * x + y * y),
            },
        }
    }

    fn gradient(&self, q: Quaternion) -> [f64; 4] {
        let [w, x, y, z] = q.to_array();
        match *self {
            Su2Coefficient::Half(i) => {
                let mut g = [0.0; 4];
                g[i] = 1.0;
                g
            }
            Su2Coefficient::One(r, c) => match (r, c) {
                (0, 0) => [0.0, 0.0, -4.0 * y, -4.0 * z],
                (0, 1) => [-2.0 * z, 2.0 * y, 2.0 * x, -2.0 * w],
                (0, 2) => [2.0 * y, 2.0 * z, 2.0 * w, 2.0 * x],
                (1, 0) => [2.0 * z, 2.0 * y, 2.0 * x, 2.0 * w],
                (1, 1) => [0.0, -4.0 * x, 0.0, -4.0 * z],
                (1, 2) => [-2.0 * x, -2.0 * w, 2.0 * z, 2.0 * y],
                (2, 0) => [-2.0 * y, 2.0 * z, -2.0 * w, 2.0 * x],
                (2, 1) => [2.0 * x, 2.0 * w, 2.0 * z, 2.0 * y],
                _ => [0.0, -4.0 * x, -4.0 * y, 0.0],
            },
        }
    }
}

impl ScalarField for Su2Coefficient {
    fn value(&self, g: &GroupElement) -> f64 {
        g.as_quaternion().map_or(f64::NAN, |q| self.eval(q))
    }

    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        let q = g.as_quaternion()?;
        // d/ds f(q·exp(s uᵢ)) = ∇f · (q uᵢ)
        let dq = (q * *UNITS.get(i)?).to_array();
        let grad = self.gradient(q);
        Some(grad.iter().zip(dq.iter()).map(|(a, b)| a * b).sum())
    }
}

/// One named dictionary member.
#[derive(Clone)]
pub struct DictEntry {
    pub name: String,
    pub f: Arc<dyn ScalarField>,
}

/// Ordered list of test functions standing in for all smooth functions.
#[derive(Clone)]
pub struct TestFunctionDictionary {
    pub id: String,
    pub model: GroupModel,
    pub entries: Vec<DictEntry>,
}

impl std::fmt::Debug for TestFunctionDictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunctionDictionary")
            .field("id", &self.id)
            .field("model", &self.model)
            .field("entries", &self.names())
            .finish()
    }
}

impl TestFunctionDictionary {
    pub fn custom(id: impl Into<String>, model: GroupModel, entries: Vec<DictEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("dictionary", "no functions"));
        }
        Ok(TestFunctionDictionary {
            id: id.into(),
            model,
            entries,
        })
    }

    /// Default dictionary of a compact model.
    pub fn standard(model: GroupModel) -> Result<Self> {
        match model {
            GroupModel::Torus(d) => Self::torus_trig(d, 3),
            GroupModel::HeisenbergNilmanifold => Ok(Self::nilmanifold()),
            GroupModel::Su2 => Ok(Self::su2()),
            GroupModel::Heisenberg => Err(Error::Unsupported(
                "test-function dictionaries are only defined on compact models".into(),
            )),
        }
    }

    /// Looks up a dictionary by id: `standard`, `trig:<max frequency>` (tori).
    pub fn by_id(model: GroupModel, id: &str) -> Result<Self> {
        if id == "standard" {
            return Self::standard(model);
        }
        if let (Some(f), GroupModel::Torus(d)) = (id.strip_prefix("trig:"), model) {
            let freq = f
                .parse::<usize>()
                .map_err(|_| Error::invalid("dictionary", format!("bad frequency in `{id}`")))?;
            return Self::torus_trig(d, freq);
        }
        Err(Error::invalid(
            "dictionary",
            format!("unknown dictionary `{id}` for {model}; valid: standard, trig:<n> (tori)"),
        ))
    }

    /// `cos(k·θ)`, `sin(k·θ)` for all `k` with `1 ≤ |k|₁ ≤ max_freq`, one
    /// representative per `±k`.
    pub fn torus_trig(d: usize, max_freq: usize) -> Result<Self> {
        let model = GroupModel::torus(d)?;
        if max_freq == 0 {
            return Err(Error::invalid("max_freq", "must be at least 1"));
        }
        let m = max_freq as i64;
        let mut entries = Vec::new();
        let mut k = vec![-m; d];
        loop {
            let l1: i64 = k.iter().map(|v| v.abs()).sum();
            let first = k.iter().find(|v| **v != 0).copied().unwrap_or(0);
            if l1 >= 1 && l1 <= m && first > 0 {
                let kf: Vec<f64> = k.iter().map(|&v| v as f64).collect();
                for sine in [false, true] {
                    entries.push(DictEntry {
                        name: format!("{}{:?}", if sine { "sin" } else { "cos" }, k),
                        f: Arc::new(TorusTrig { k: kf.clone(), sine }),
                    });
                }
            }
            let mut i = 0;
            while i < d {
                k[i] += 1;
                if k[i] <= m {
                    break;
                }
                k[i] = -m;
                i += 1;
            }
            if i == d {
                break;
            }
        }
        entries.sort_by_key(|e| e.name.len());
        Ok(TestFunctionDictionary {
            id: format!("trig:{max_freq}"),
            model,
            entries,
        })
    }

    fn nilmanifold() -> Self {
        let mut entries = Vec::new();
        for (m, n) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (2.0, 0.0), (0.0, 2.0)] {
            for sine in [false, true] {
                entries.push(DictEntry {
                    name: format!("{}(2π({m}x+{n}y))", if sine { "sin" } else { "cos" }),
                    f: Arc::new(NilBase { m, n, sine }),
                });
            }
        }
        for (k, excited) in [(1, false), (1, true), (2, false)] {
            for imaginary in [false, true] {
                entries.push(DictEntry {
                    name: format!(
                        "{}wb[k={k}{}]",
                        if imaginary { "im" } else { "re" },
                        if excited { ",excited" } else { "" }
                    ),
                    f: Arc::new(WeilBrezin { k, excited, imaginary }),
                });
            }
        }
        TestFunctionDictionary {
            id: "standard".into(),
            model: GroupModel::HeisenbergNilmanifold,
            entries,
        }
    }

    fn su2() -> Self {
        let mut entries = Vec::new();
        for (i, c) in ["w", "x", "y", "z"].iter().enumerate() {
            entries.push(DictEntry {
                name: format!("q.{c}"),
                f: Arc::new(Su2Coefficient::Half(i)),
            });
        }
        for r in 0..3 {
            for c in 0..3 {
                entries.push(DictEntry {
                    name: format!("R[{r}][{c}]"),
                    f: Arc::new(Su2Coefficient::One(r, c)),
                });
            }
        }
        TestFunctionDictionary {
            id: "standard".into(),
            model: GroupModel::Su2,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    /// Condition number of the Gram matrix `⟨fᵢ fⱼ⟩` on a sample.
    pub fn gram_condition(&self, samples: &[GroupElement]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "empty"));
        }
        let n = self.len();
        let mut g = DMatrix::<f64>::zeros(n, n);
        for x in samples {
            let v: Vec<f64> = self.entries.iter().map(|e| e.f.value(x)).collect();
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += v[i] * v[j];
                }
            }
        }
        g /= samples.len() as f64;
        let ev = SymmetricEigen::new(g).eigenvalues;
        let (lo, hi) = (ev.min(), ev.max());
        Ok(if lo <= 0.0 { f64::INFINITY } else { hi / lo })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::finite_difference;
    use crate::rng::path_rng;

    fn check_derivatives(dict: &TestFunctionDictionary, tol: f64) {
        let m = dict.model;
        let mut rng = path_rng(3, 0);
        for _ in 0..20 {
            let g = m.haar_sample(&mut rng).unwrap();
            for e in &dict.entries {
                for i in 0..m.horizontal_rank() {
                    let a = e.f.directional(&g, i).unwrap();
                    let fd = finite_difference(&m, e.f.as_ref(), &g, i, 1e-5).unwrap();
                    assert!(
                        (a - fd).abs() < tol * (1.0 + a.abs()),
                        "{} V_{i}: {a} vs {fd} at {:?}",
                        e.name,
                        g
                    );
                }
            }
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        check_derivatives(&TestFunctionDictionary::torus_trig(2, 3).unwrap(), 1e-8);
        check_derivatives(&TestFunctionDictionary::standard(GroupModel::Su2).unwrap(), 1e-8);
        check_derivatives(
            &TestFunctionDictionary::standard(GroupModel::HeisenbergNilmanifold).unwrap(),
            1e-7,
        );
    }

    #[test]
    fn weil_brezin_is_lattice_invariant() {
        use crate::group::heisenberg;
        let f = WeilBrezin {
            k: 1,
            excited: true,
            imaginary: false,
        };
        let g = [0.3, 0.8, 0.45];
        for (a, b, m) in [(1, 0, 0), (0, 1, 0), (1, 1, 2), (-2, 1, -1)] {
            let moved = heisenberg::mul(heisenberg::lattice_element(a, b, m), g);
            let v1 = f.value(&GroupElement::Heisenberg(g));
            let v2 = f.value(&GroupElement::Heisenberg(moved));
            assert!((v1 - v2).abs() < 1e-12, "{v1} vs {v2}");
        }
    }

    #[test]
    fn sizes_and_conditioning() {
        assert_eq!(TestFunctionDictionary::torus_trig(1, 3).unwrap().len(), 6);
        assert_eq!(TestFunctionDictionary::torus_trig(2, 3).unwrap().len(), 24);
        let mut rng = path_rng(5, 0);
        for m in [
            GroupModel::torus(2).unwrap(),
            GroupModel::HeisenbergNilmanifold,
            GroupModel::Su2,
        ] {
            let d = TestFunctionDictionary::standard(m).unwrap();
            let s: Vec<_> = (0..4000).map(|_| m.haar_sample(&mut rng).unwrap()).collect();
            let c = d.gram_condition(&s).unwrap();
            assert!(c < 1e3, "{m}: condition {c}");
        }
    }
}
