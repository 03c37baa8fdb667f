//! Parameterized Hamiltonian families and the named registry the scenario
//! runner uses to look them up.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use ndarray::array;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gp::Potential;
use crate::hamiltonian::{Hamiltonian, MatrixJson};
use crate::linalg::C64;

/// Named real parameters, e.g. `{"kappa": 1.0, "gamma": 0.5}`.
pub type Params = BTreeMap<String, f64>;

/// A Hamiltonian `h(R)` depending smoothly on real coordinates `R`.
pub trait HamiltonianBuilder: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Names of the coordinates making up `R`, in order.
    fn coordinates(&self) -> Vec<String>;

    fn build(&self, r: &[f64]) -> Result<Hamiltonian>;

    fn param_dim(&self) -> usize {
        self.coordinates().len()
    }

    fn check_dim(&self, r: &[f64]) -> Result<()> {
        let d = self.param_dim();
        if r.len() != d {
            return Err(Error::DimensionError { expected: d, found: r.len() });
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("{} coordinates", self.name())));
        }
        Ok(())
    }
}

/// The two-level PT-symmetric Hamiltonian `[[iγ, κ], [κ, −iγ]]`.
///
/// Eigenvalues are `±√(κ² − γ²)`: real for `|γ| < |κ|`, purely imaginary
/// for `|γ| > |κ|`, with an exceptional point at `|γ| = |κ|`.
pub fn pt2x2(kappa: f64, gamma: f64) -> Result<Hamiltonian> {
    Hamiltonian::new(array![
        [C64::new(0.0, gamma), C64::new(kappa, 0.0)],
        [C64::new(kappa, 0.0), C64::new(0.0, -gamma)]
    ])
}

/// Spin-1/2 in a field with an imaginary z offset:
/// `h = x σ_x + y σ_y + (z + iγ) σ_z`.
pub fn spin_half(r: [f64; 3], gamma: f64) -> Result<Hamiltonian> {
    let [x, y, z] = r;
    let zc = C64::new(z, gamma);
    Hamiltonian::new(array![[zc, C64::new(x, -y)], [C64::new(x, y), -zc]])
}

/// `pt2x2` with `R = (κ, γ)`.
#[derive(Debug, Clone, Copy)]
pub struct Pt2x2Builder {
    pub hbar: f64,
}

impl HamiltonianBuilder for Pt2x2Builder {
    fn name(&self) -> &str {
        "pt2x2"
    }

    fn coordinates(&self) -> Vec<String> {
        vec!["kappa".into(), "gamma".into()]
    }

    fn build(&self, r: &[f64]) -> Result<Hamiltonian> {
        self.check_dim(r)?;
        Hamiltonian::with_hbar(pt2x2(r[0], r[1])?.into_matrix(), self.hbar)
    }
}

/// `spin_half` with `R = (x, y, z)` and fixed imaginary offset `gamma`.
#[derive(Debug, Clone, Copy)]
pub struct SpinHalfBuilder {
    pub gamma: f64,
    pub hbar: f64,
}

impl HamiltonianBuilder for SpinHalfBuilder {
    fn name(&self) -> &str {
        "spin-half-in-field"
    }

    fn coordinates(&self) -> Vec<String> {
        vec!["x".into(), "y".into(), "z".into()]
    }

    fn build(&self, r: &[f64]) -> Result<Hamiltonian> {
        self.check_dim(r)?;
        Hamiltonian::with_hbar(spin_half([r[0], r[1], r[2]], self.gamma)?.into_matrix(), self.hbar)
    }
}

/// A fixed matrix regarded as a (trivial) function of `dims` coordinates.
#[derive(Debug, Clone)]
pub struct ConstantBuilder {
    pub name: String,
    pub hamiltonian: Hamiltonian,
    pub dims: usize,
}

impl HamiltonianBuilder for ConstantBuilder {
    fn name(&self) -> &str {
        &self.name
    }

    fn coordinates(&self) -> Vec<String> {
        (0..self.dims).map(|k| format!("r{k}")).collect()
    }

    fn build(&self, r: &[f64]) -> Result<Hamiltonian> {
        self.check_dim(r)?;
        Ok(self.hamiltonian.clone())
    }
}

/// Any closure `R ↦ h(R)`.
pub struct FnBuilder<F> {
    pub name: String,
    pub coordinates: Vec<String>,
    pub f: F,
}

impl<F> fmt::Debug for FnBuilder<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnBuilder").field("name", &self.name).finish()
    }
}

impl<F> HamiltonianBuilder for FnBuilder<F>
where
    F: Fn(&[f64]) -> Result<Hamiltonian> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn coordinates(&self) -> Vec<String> {
        self.coordinates.clone()
    }

    fn build(&self, r: &[f64]) -> Result<Hamiltonian> {
        self.check_dim(r)?;
        (self.f)(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub default: Option<f64>,
    pub description: String,
}

impl ParamSpec {
    fn number(name: &str, default: Option<f64>, description: &str) -> Self {
        Self { name: name.into(), kind: "number", default, description: description.into() }
    }
}

/// Catalog entry describing one registered builder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuilderSchema {
    pub name: String,
    /// `hamiltonian`, `matrix-file` or `potential`.
    pub kind: &'static str,
    pub description: String,
    /// Fixed parameters.
    pub parameters: Vec<ParamSpec>,
    /// Coordinates `R` the Hamiltonian depends on (empty for potentials).
    pub coordinates: Vec<String>,
}

type HamiltonianFactory = Arc<dyn Fn(&Params) -> Result<Arc<dyn HamiltonianBuilder>> + Send + Sync>;
type PotentialFactory = Arc<dyn Fn(&Params) -> Result<Potential> + Send + Sync>;

#[derive(Clone)]
enum Factory {
    Hamiltonian(HamiltonianFactory),
    Potential(PotentialFactory),
    MatrixFile,
}

#[derive(Clone)]
struct Entry {
    schema: BuilderSchema,
    factory: Factory,
}

/// Name → builder registry. [`Registry::default`] holds the built-in
/// families; matrices loaded from files can be added at run time.
#[derive(Clone)]
pub struct Registry {
    entries: BTreeMap<String, Entry>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

/// Look up a required parameter.
pub fn require(params: &Params, name: &str) -> Result<f64> {
    params
        .get(name)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("missing parameter `{name}`")))
}

fn optional(params: &Params, name: &str, default: f64) -> f64 {
    params.get(name).copied().unwrap_or(default)
}

impl Default for Registry {
    fn default() -> Self {
        let mut reg = Registry { entries: BTreeMap::new() };
        let hbar = || ParamSpec::number("hbar", Some(1.0), "reduced Planck constant");
        reg.insert(
            BuilderSchema {
                name: "pt2x2".into(),
                kind: "hamiltonian",
                description: "PT-symmetric dimer [[iγ, κ], [κ, −iγ]]".into(),
                parameters: vec![hbar()],
                coordinates: vec!["kappa".into(), "gamma".into()],
            },
            Factory::Hamiltonian(Arc::new(|p: &Params| {
                Ok(Arc::new(Pt2x2Builder { hbar: optional(p, "hbar", 1.0) }) as Arc<dyn HamiltonianBuilder>)
            })),
        );
        reg.insert(
            BuilderSchema {
                name: "spin-half-in-field".into(),
                kind: "hamiltonian",
                description: "x σx + y σy + (z + iγ) σz".into(),
                parameters: vec![
                    ParamSpec::number("gamma", Some(0.0), "imaginary σz field"),
                    hbar(),
                ],
                coordinates: vec!["x".into(), "y".into(), "z".into()],
            },
            Factory::Hamiltonian(Arc::new(|p: &Params| {
                Ok(Arc::new(SpinHalfBuilder {
                    gamma: optional(p, "gamma", 0.0),
                    hbar: optional(p, "hbar", 1.0),
                }) as Arc<dyn HamiltonianBuilder>)
            })),
        );
        reg.insert(
            BuilderSchema {
                name: "custom-matrix-file".into(),
                kind: "matrix-file",
                description: "fixed matrix loaded from {\"dim\", \"re\", \"im\"} JSON".into(),
                parameters: vec![ParamSpec {
                    name: "file".into(),
                    kind: "path",
                    default: None,
                    description: "path to the matrix JSON document".into(),
                }],
                coordinates: vec![],
            },
            Factory::MatrixFile,
        );
        reg.insert(
            BuilderSchema {
                name: "harmonic".into(),
                kind: "potential",
                description: "V(x) = m ω² (x − x0)² / 2".into(),
                parameters: vec![
                    ParamSpec::number("omega", Some(1.0), "trap frequency"),
                    ParamSpec::number("mass", Some(1.0), "particle mass"),
                    ParamSpec::number("x0", Some(0.0), "trap centre"),
                ],
                coordinates: vec![],
            },
            Factory::Potential(Arc::new(|p: &Params| {
                Ok(Potential::Harmonic {
                    omega: optional(p, "omega", 1.0),
                    mass: optional(p, "mass", 1.0),
                    x0: optional(p, "x0", 0.0),
                })
            })),
        );
        reg.insert(
            BuilderSchema {
                name: "complex-well".into(),
                kind: "potential",
                description: "harmonic trap plus PT-symmetric gain/loss i γ x exp(−x²/2w²)".into(),
                parameters: vec![
                    ParamSpec::number("omega", Some(1.0), "trap frequency"),
                    ParamSpec::number("mass", Some(1.0), "particle mass"),
                    ParamSpec::number("gamma", None, "gain/loss amplitude"),
                    ParamSpec::number("width", Some(1.0), "gain/loss width"),
                ],
                coordinates: vec![],
            },
            Factory::Potential(Arc::new(|p: &Params| {
                Ok(Potential::ComplexWell {
                    omega: optional(p, "omega", 1.0),
                    mass: optional(p, "mass", 1.0),
                    gamma: require(p, "gamma")?,
                    width: optional(p, "width", 1.0),
                })
            })),
        );
        reg
    }
}

impl Registry {
    fn insert(&mut self, schema: BuilderSchema, factory: Factory) {
        self.entries.insert(schema.name.clone(), Entry { schema, factory });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn catalog(&self) -> Vec<BuilderSchema> {
        self.entries.values().map(|e| e.schema.clone()).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Register a fixed matrix under `name`.
    pub fn register_matrix(&mut self, name: &str, h: Hamiltonian) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::InvalidInput(format!("builder `{name}` already registered")));
        }
        let dim = h.dim();
        let shared = Arc::new(h);
        let builder_name = name.to_string();
        self.insert(
            BuilderSchema {
                name: name.into(),
                kind: "hamiltonian",
                description: format!("fixed {dim}×{dim} matrix"),
                parameters: vec![],
                coordinates: vec![],
            },
            Factory::Hamiltonian(Arc::new(move |_p: &Params| {
                Ok(Arc::new(ConstantBuilder {
                    name: builder_name.clone(),
                    hamiltonian: (*shared).clone(),
                    dims: 0,
                }) as Arc<dyn HamiltonianBuilder>)
            })),
        );
        Ok(())
    }

    /// Load a `{"dim", "re", "im"}` document and register it under `name`.
    pub fn register_matrix_file(&mut self, name: &str, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let doc: MatrixJson = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        self.register_matrix(name, doc.to_hamiltonian()?)
    }

    fn entry(&self, name: &str) -> Result<&Entry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown builder `{name}`")))
    }

    /// Instantiate a Hamiltonian family with its fixed parameters.
    pub fn builder(&self, name: &str, params: &Params) -> Result<Arc<dyn HamiltonianBuilder>> {
        match &self.entry(name)?.factory {
            Factory::Hamiltonian(f) => f(params),
            Factory::MatrixFile => Err(Error::InvalidInput(
                "custom-matrix-file needs a `file`; register it first".into(),
            )),
            Factory::Potential(_) => Err(Error::InvalidInput(format!(
                "`{name}` is a potential, not a Hamiltonian"
            ))),
        }
    }

    /// Instantiate and evaluate at the point given by the coordinate entries
    /// of `params`.
    pub fn build_at(&self, name: &str, params: &Params) -> Result<Hamiltonian> {
        let b = self.builder(name, params)?;
        let r = b
            .coordinates()
            .iter()
            .map(|c| require(params, c))
            .collect::<Result<Vec<f64>>>()?;
        b.build(&r)
    }

    pub fn potential(&self, name: &str, params: &Params) -> Result<Potential> {
        match &self.entry(name)?.factory {
            Factory::Potential(f) => f(params),
            _ => Err(Error::InvalidInput(format!("`{name}` is not a potential"))),
        }
    }
}
