//! One runner per scenario kind. Each returns a JSON summary plus the tables
//! and full-precision snapshots to be written next to it.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use nhqm::builders::ConstantBuilder;
use nhqm::dynamics::{StateOptions, TraceRow};
use nhqm::fock::{FockWarning, DEFAULT_BOSON_CUTOFF};
use nhqm::geometric::track_mode;
use nhqm::gp::{check_uniqueness, ModeSelection};
use nhqm::io::pair;
use nhqm::prelude::*;

use crate::config::{Config, ConfigError, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Diagonalize,
    Evolve,
    Berry,
    Curvature,
    Adiabatic,
    Fock,
    Gp,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Diagonalize => "diagonalize",
            Kind::Evolve => "evolve",
            Kind::Berry => "berry",
            Kind::Curvature => "curvature",
            Kind::Adiabatic => "adiabatic",
            Kind::Fock => "fock",
            Kind::Gp => "gp",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Model(Error),
    Io(String),
}

impl RunError {
    /// 2 for physics failures, 1 for everything the user can fix in the input.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Model(e) if e.is_physics() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Model(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Model(e)
    }
}

type Run<T> = std::result::Result<T, RunError>;

pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub struct Outcome {
    pub summary: Value,
    pub tables: Vec<Table>,
    /// Written without rounding so they reload exactly.
    pub snapshots: Vec<(String, Value)>,
}

fn cpair(z: C64) -> Value {
    json!(pair(z))
}

fn cvec<'a>(it: impl IntoIterator<Item = &'a C64>) -> Value {
    Value::Array(it.into_iter().map(|z| cpair(*z)).collect())
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data serializes")
}

/// Zero out parts below `1e-14` of the spectral scale, which are roundoff.
fn chop(z: C64, scale: f64) -> C64 {
    let eps = 1e-14 * scale.max(1.0);
    let f = |x: f64| if x.abs() < eps { 0.0 } else { x };
    C64::new(f(z.re), f(z.im))
}

fn sorted(mut v: Vec<C64>) -> Vec<C64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

pub struct Context<'a> {
    pub cfg: &'a Config,
    pub seed: u64,
}

impl<'a> Context<'a> {
    fn root(&self) -> Section<'a> {
        self.cfg.root()
    }

    fn params(&self) -> Run<Params> {
        Ok(match self.root().section("parameters")? {
            Some(s) => s.params()?,
            None => Params::new(),
        })
    }

    fn registry(&self) -> Run<Registry> {
        let mut reg = Registry::default();
        if let Some(extra) = self.root().section("register")? {
            for name in extra.keys() {
                let file = extra.require_str(name)?;
                reg.register_matrix_file(name, &self.cfg.resolve(file))?;
            }
        }
        Ok(reg)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// The Hamiltonian family named by `builder`, or a fixed matrix given by
    /// `matrix`, `matrix_file` or `random_matrix`.
    fn family(&self) -> Run<Arc<dyn HamiltonianBuilder>> {
        let root = self.root();
        let params = self.params()?;
        let hbar = params.get("hbar").copied().unwrap_or(1.0);
        let constant = |name: &str, h: Hamiltonian| -> Run<Arc<dyn HamiltonianBuilder>> {
            let h = Hamiltonian::with_hbar(h.into_matrix(), hbar)?;
            Ok(Arc::new(ConstantBuilder { name: name.into(), hamiltonian: h, dims: 0 }))
        };
        if let Some(m) = root.get("matrix") {
            let doc: MatrixJson = serde_json::from_value(m.clone())
                .map_err(|e| root.invalid("matrix", format!("is not a {{dim, re, im}} document: {e}")))?;
            return constant("matrix", doc.to_hamiltonian()?);
        }
        let file = match root.str("builder")? {
            Some("custom-matrix-file") => Some(root.str("file")?.ok_or_else(|| root.missing("file"))?),
            _ => root.str("matrix_file")?,
        };
        if let Some(file) = file {
            let mut reg = Registry::default();
            reg.register_matrix_file("matrix_file", &self.cfg.resolve(file))?;
            return constant("matrix_file", reg.build_at("matrix_file", &Params::new())?);
        }
        if let Some(spec) = root.section("random_matrix")? {
            let n = spec.usize("dim")?.ok_or_else(|| spec.missing("dim"))?;
            if n == 0 {
                return Err(spec.invalid("dim", "must be at least 1").into());
            }
            let scale = spec.f64_or("scale", 1.0)?;
            let hermitian = spec.bool_or("hermitian", false)?;
            let mut rng = self.rng();
            let mut m = Array2::from_shape_fn((n, n), |_| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
            });
            if hermitian {
                m = (&m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
            }
            return constant("random_matrix", Hamiltonian::new(m)?);
        }
        let name = root.str("builder")?.ok_or_else(|| root.missing("builder"))?;
        let reg = self.registry()?;
        if !reg.contains(name) {
            return Err(root.invalid("builder", format!("names no registered builder: `{name}`")).into());
        }
        Ok(reg.builder(name, &params)?)
    }

    /// Coordinates of the family read from `parameters`.
    fn coordinates(&self, family: &dyn HamiltonianBuilder) -> Run<Vec<f64>> {
        let names = family.coordinates();
        if names.is_empty() {
            return Ok(vec![]);
        }
        let root = self.root();
        let section = root.section("parameters")?;
        let Some(p) = section else {
            return Err(root.missing("parameters").into());
        };
        Ok(names.iter().map(|n| p.require_f64(n)).collect::<std::result::Result<Vec<_>, _>>()?)
    }

    fn hamiltonian(&self) -> Run<Hamiltonian> {
        let family = self.family()?;
        let r = self.coordinates(family.as_ref())?;
        Ok(family.build(&r)?)
    }

    fn biortho(&self) -> Run<BiorthoOptions> {
        let mut o = BiorthoOptions::default();
        if let Some(t) = self.root().positive("tol_ep")? {
            o.tol_ep = t;
        }
        Ok(o)
    }

    fn mode(&self, dim: usize) -> Run<usize> {
        let j = self.root().usize_or("mode", 0)?;
        if j >= dim {
            return Err(self.root().invalid("mode", format!("must be below the dimension {dim}, got {j}")).into());
        }
        Ok(j)
    }

    fn path(&self, family: Arc<dyn HamiltonianBuilder>) -> Run<ParameterPath> {
        let p = self.root().require_section("path")?;
        let kind = p.require_str("type")?;
        let samples = p.usize_or("samples", 200)?;
        let path = match kind {
            "circle" => ParameterPath::circle(
                family,
                &p.require_f64_list("center")?,
                p.require_f64("radius")?,
                &p.require_f64_list("u")?,
                &p.require_f64_list("v")?,
                samples,
            )?,
            "polar-circle" => {
                ParameterPath::polar_circle(family, p.require_f64("r")?, p.require_f64("theta")?, samples)?
            }
            "polygon" => {
                let vertices = p.points("vertices")?.ok_or_else(|| p.missing("vertices"))?;
                ParameterPath::polygon(family, &vertices, p.usize_or("per_edge", 20)?)?
            }
            "points" => {
                let points = p.points("points")?.ok_or_else(|| p.missing("points"))?;
                ParameterPath::new(family, points, p.bool_or("closed", true)?)?
            }
            other => {
                return Err(p
                    .invalid("type", format!("must be circle, polar-circle, polygon or points, got `{other}`"))
                    .into())
            }
        };
        Ok(path)
    }

    fn gauge(&self, n: usize) -> Run<Gauge> {
        let root = self.root();
        Ok(match root.get("gauge") {
            None => Gauge::default(),
            Some(Value::String(s)) if s == "right-norm" => Gauge::RightNorm,
            Some(Value::Array(_)) => {
                let g = root.f64_list("gauge")?.unwrap_or_default();
                if g.len() != n {
                    return Err(root.invalid("gauge", format!("needs {n} weights, got {}", g.len())).into());
                }
                Gauge::Explicit(g)
            }
            Some(_) => Gauge::Uniform(
                root.positive("gauge")
                    .map_err(|_| root.invalid("gauge", "must be a positive number, a list or \"right-norm\""))?
                    .unwrap_or(1.0),
            ),
        })
    }

    fn initial(&self, sys: &BiorthoSystem) -> Run<Array1<C64>> {
        let root = self.root();
        let n = sys.dim();
        match root.get("initial") {
            None => Ok(sys.right(0).to_owned()),
            Some(Value::String(s)) if s == "random" => {
                let mut rng = self.rng();
                Ok(Array1::from_shape_fn(n, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            }
            Some(Value::Object(_)) => {
                let s = root.require_section("initial")?;
                if let Some(j) = s.usize("mode")? {
                    if j >= n {
                        return Err(s.invalid("mode", format!("must be below the dimension {n}")).into());
                    }
                    return Ok(sys.right(j).to_owned());
                }
                let psi = s.complex_list("psi")?.ok_or_else(|| s.missing("psi"))?;
                if psi.len() != n {
                    return Err(s.invalid("psi", format!("needs {n} components, got {}", psi.len())).into());
                }
                Ok(Array1::from(psi))
            }
            Some(_) => Err(root.invalid("initial", "must be \"random\", {\"mode\": j} or {\"psi\": [...]}").into()),
        }
    }
}

pub fn run(kind: Kind, ctx: &Context) -> Run<Outcome> {
    match kind {
        Kind::Diagonalize => diagonalize(ctx),
        Kind::Evolve => evolve(ctx),
        Kind::Berry => berry(ctx),
        Kind::Curvature => curvature(ctx),
        Kind::Adiabatic => adiabatic(ctx),
        Kind::Fock => fock(ctx),
        Kind::Gp => gp(ctx),
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn diagonalize(ctx: &Context) -> Run<Outcome> {
    let h = ctx.hamiltonian()?;
    let sys = diagonalize_biortho(&h, &ctx.biortho()?)?;
    let scale = sys.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eig: Vec<C64> = sys.eigenvalues().iter().map(|z| chop(*z, scale)).collect();
    let rec = (&sys.reconstruct() - h.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let hermitian = h.is_hermitian(BiorthoOptions::default().hermiticity_tol);
    let summary = json!({
        "kind": "diagonalize",
        "dim": h.dim(),
        "hbar": h.hbar(),
        "eigenvalues": cvec(&eig),
        "hermitian": hermitian,
        "condition_estimate": sys.condition_estimate(),
        "biortho_defect": sys.biortho_defect(),
        "reconstruction_error": rec,
    });
    let rows = eig.iter().enumerate().map(|(j, e)| vec![j as f64, e.re, e.im]).collect();
    let eigensystem = json!({
        "eigenvalues": cvec(sys.eigenvalues()),
        "right": to_value(&MatrixJson::from_matrix(sys.right_vectors())),
        "left": to_value(&MatrixJson::from_matrix(sys.left_vectors())),
    });
    Ok(Outcome {
        summary,
        tables: vec![Table { name: "spectrum".into(), header: header(&["mode", "re_E", "im_E"]), rows }],
        snapshots: vec![("hamiltonian".into(), to_value(&h.to_json())), ("eigensystem".into(), eigensystem)],
    })
}

fn evolve(ctx: &Context) -> Run<Outcome> {
    let root = ctx.root();
    let h = ctx.hamiltonian()?;
    let sys = Arc::new(diagonalize_biortho(&h, &ctx.biortho()?)?);
    let n = sys.dim();
    let psi0 = ctx.initial(&sys)?;
    let opts = StateOptions { normalize: root.bool_or("normalize", true)?, ..Default::default() };
    let state = CanonicalState::from_right(sys.clone(), &psi0.view(), &ctx.gauge(n)?, &opts)?;

    let t_max = root.positive("t_max")?.ok_or_else(|| root.missing("t_max"))?;
    let emax = sys.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dt = match root.positive("dt")? {
        Some(dt) => dt,
        None => 0.05 * h.hbar() / emax.max(1e-12),
    };
    let samples = root.usize_or("samples", 200)?.max(1);
    let method = root.str("method")?.unwrap_or("ode");

    let rows: Vec<TraceRow> = match method {
        "ode" => {
            let steps = (t_max / dt).ceil().max(1.0) as usize;
            let every = (steps / samples).max(1);
            let traj = evolve_ode(&state.fields(), &h, (0.0, t_max), dt, every)?;
            traj.times.iter().zip(&traj.fields).map(|(t, f)| TraceRow::from_fields(*t, f, &sys)).collect()
        }
        "spectral" => (0..=samples)
            .map(|k| TraceRow::from_state(&state.evolve_spectral(t_max * k as f64 / samples as f64)))
            .collect(),
        other => return Err(root.invalid("method", format!("must be \"ode\" or \"spectral\", got `{other}`")).into()),
    };

    let first = &rows[0];
    let last = rows.last().unwrap();
    let drift = |f: &dyn Fn(&TraceRow) -> C64| rows.iter().map(|r| (f(r) - f(first)).norm()).fold(0.0, f64::max);
    let final_state = state.evolve_spectral(t_max);
    let summary = json!({
        "kind": "evolve",
        "method": method,
        "dim": n,
        "t_max": t_max,
        "dt": dt,
        "rows": rows.len(),
        "eigenvalues": cvec(&sys.eigenvalues().iter().map(|z| chop(*z, emax)).collect::<Vec<_>>()),
        "gauge": state.gauge(),
        "initial_total_probability": cpair(first.total_probability),
        "final_total_probability": cpair(last.total_probability),
        "max_probability_drift": drift(&|r| r.total_probability),
        "initial_field_energy": cpair(first.field_energy),
        "max_energy_drift": drift(&|r| r.field_energy),
        "initial_norm_sq": first.norm_sqr,
        "final_norm_sq": last.norm_sqr,
    });
    Ok(Outcome {
        summary,
        tables: vec![Table {
            name: "trace".into(),
            header: TraceRow::header(n),
            rows: rows.iter().map(TraceRow::values).collect(),
        }],
        snapshots: vec![
            ("hamiltonian".into(), to_value(&h.to_json())),
            ("initial_state".into(), to_value(&state.to_json())),
            ("state".into(), to_value(&final_state.to_json())),
        ],
    })
}

fn path_table(path: &ParameterPath, frames: &[nhqm::geometric::ModeFrame]) -> Table {
    let mut head = vec!["sample".to_string()];
    head.extend(path.builder().coordinates());
    head.extend(["re_E", "im_E", "gap"].map(String::from));
    let rows = path
        .samples()
        .iter()
        .zip(frames)
        .enumerate()
        .map(|(k, (r, f))| {
            let mut row = vec![k as f64];
            row.extend(r);
            row.extend([f.energy.re, f.energy.im, f.gap]);
            row
        })
        .collect();
    Table { name: "path".into(), header: head, rows }
}

fn berry(ctx: &Context) -> Run<Outcome> {
    let family = ctx.family()?;
    let path = ctx.path(family.clone())?;
    let opts = ctx.biortho()?;
    let dim = family.build(&path.samples()[0])?.dim();
    let j = ctx.mode(dim)?;
    let report = geometric_phase_loop(&path, j, &opts)?;
    let frames = track_mode(&path, j, &opts)?;
    let mut summary = json!({
        "kind": "berry",
        "builder": family.name(),
        "samples": path.samples().len(),
        "closed": path.is_closed(),
    });
    merge(&mut summary, to_value(&report));
    Ok(Outcome { summary, tables: vec![path_table(&path, &frames)], snapshots: vec![] })
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn curvature(ctx: &Context) -> Run<Outcome> {
    let root = ctx.root();
    let family = ctx.family()?;
    let point = root.require_f64_list("point")?;
    family.check_dim(&point)?;
    let dim = family.build(&point)?.dim();
    let j = ctx.mode(dim)?;
    let delta = root.positive("delta")?;
    let right = berry_connection_right(family.as_ref(), &point, j, delta)?;
    let left = berry_connection_left(family.as_ref(), &point, j, delta)?;
    let curv = if point.len() == 3 {
        cvec(berry_curvature(family.as_ref(), &point, j, delta)?.iter())
    } else {
        Value::Null
    };
    let summary = json!({
        "kind": "curvature",
        "builder": family.name(),
        "point": point,
        "mode_index": j,
        "connection_right": cvec(right.iter()),
        "connection_left": cvec(left.iter()),
        "curvature": curv,
    });
    Ok(Outcome { summary, tables: vec![], snapshots: vec![] })
}

fn adiabatic(ctx: &Context) -> Run<Outcome> {
    let root = ctx.root();
    let family = ctx.family()?;
    let path = ctx.path(family.clone())?;
    let opts = ctx.biortho()?;
    let h0 = family.build(&path.samples()[0])?;
    let j = ctx.mode(h0.dim())?;
    let total = root.positive("total_time")?.ok_or_else(|| root.missing("total_time"))?;
    let dt = match root.positive("dt")? {
        Some(dt) => dt,
        None => {
            let emax = diagonalize_biortho(&h0, &opts)?.eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            0.1 * h0.hbar() / emax.max(1e-12)
        }
    };
    let run = adiabatic_evolve(&path, j, total, dt, &opts)?;
    let mut summary = json!({
        "kind": "adiabatic",
        "builder": family.name(),
        "samples": path.samples().len(),
        "total_time": total,
        "dt": dt,
    });
    merge(&mut summary, to_value(&run.report));
    let mut head = vec!["t".to_string()];
    head.extend(family.coordinates());
    head.extend(
        ["re_E", "im_E", "re_c", "im_c", "re_cbar", "im_cbar", "re_dynamical", "im_dynamical"].map(String::from),
    );
    let rows = run
        .trace
        .iter()
        .map(|s| {
            let mut row = vec![s.t];
            row.extend(&s.point);
            row.extend([
                s.energy.re,
                s.energy.im,
                s.c.re,
                s.c.im,
                s.c_bar.re,
                s.c_bar.im,
                s.dynamical_phase.re,
                s.dynamical_phase.im,
            ]);
            row
        })
        .collect();
    Ok(Outcome { summary, tables: vec![Table { name: "trace".into(), header: head, rows }], snapshots: vec![] })
}

fn fock(ctx: &Context) -> Run<Outcome> {
    let root = ctx.root();
    let statistics = root.str("statistics")?.unwrap_or("boson");
    let interacting = root.section("interacting")?;
    let energies = match root.complex_list("energies")? {
        Some(e) if interacting.is_none() => Some(e),
        Some(_) => return Err(root.invalid("energies", "cannot be combined with `interacting`").into()),
        None => None,
    };
    let h_prime = if energies.is_none() { Some(ctx.hamiltonian()?) } else { None };
    let modes = match (&energies, &h_prime) {
        (Some(e), _) => e.len(),
        (_, Some(h)) => h.dim(),
        _ => unreachable!(),
    };
    if modes == 0 {
        return Err(root.invalid("energies", "must not be empty").into());
    }
    let space = match statistics {
        "boson" => FockSpace::bosons(modes, root.usize_or("cutoff", DEFAULT_BOSON_CUTOFF)?)?,
        "fermion" => FockSpace::fermions(modes)?,
        other => return Err(root.invalid("statistics", format!("must be boson or fermion, got `{other}`")).into()),
    };
    let space = Arc::new(space);
    let mut warnings: Vec<FockWarning> = vec![];
    let (op, single) = match (interacting, energies) {
        (Some(int), _) => {
            let lambda = int.complex("lambda")?.unwrap_or(C64::new(0.0, 0.0));
            let pair = match int.get("pair_potential") {
                None => None,
                Some(v) => {
                    let doc: MatrixJson = serde_json::from_value(v.clone())
                        .map_err(|e| int.invalid("pair_potential", format!("is not a {{dim, re, im}} document: {e}")))?;
                    Some(doc.to_matrix()?)
                }
            };
            let h = h_prime.as_ref().unwrap();
            let built = build_interacting_hamiltonian(space.clone(), h.matrix(), lambda, pair.as_ref())?;
            warnings = built.warnings;
            (built.operator, None)
        }
        (None, Some(e)) => (build_free_hamiltonian(space.clone(), &e)?, Some(e)),
        (None, None) => {
            let h = h_prime.as_ref().unwrap();
            let sys = diagonalize_biortho(h, &ctx.biortho()?)?;
            let e = sys.eigenvalues().to_vec();
            (build_free_hamiltonian(space.clone(), &e)?, Some(e))
        }
    };
    let spectrum = op.spectrum()?;
    let scale = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let spectrum: Vec<C64> = sorted(spectrum.iter().map(|z| chop(*z, scale)).collect());
    let number = total_number_operator(space.clone());
    let ops = build_mode_operators(space.clone());
    let below: Vec<usize> = space
        .basis()
        .iter()
        .enumerate()
        .filter(|(_, occ)| occ.iter().zip(space.cutoffs()).all(|(n, c)| n < c))
        .map(|(i, _)| i)
        .collect();

    let mut head = vec!["state".to_string()];
    head.extend((0..modes).map(|j| format!("n{j}")));
    head.extend(["re_diag", "im_diag"].map(String::from));
    let rows = space
        .basis()
        .iter()
        .enumerate()
        .map(|(i, occ)| {
            let mut row = vec![i as f64];
            row.extend(occ.iter().map(|&n| n as f64));
            let d = op.matrix()[[i, i]];
            row.extend([d.re, d.im]);
            row
        })
        .collect();
    let summary = json!({
        "kind": "fock",
        "statistics": statistics,
        "modes": modes,
        "cutoffs": space.cutoffs(),
        "dim": space.dim(),
        "mode_energies": single.as_ref().map(|e| cvec(e.iter())),
        "spectrum": cvec(&spectrum),
        "diagonal": op.is_diagonal(),
        "number_commutator": number.commutator_norm(&op),
        "algebra_defect_below_cutoff": ops.algebra_defect(&below),
        "warnings": warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        summary,
        tables: vec![Table { name: "basis".into(), header: head, rows }],
        snapshots: vec![("hamiltonian".into(), to_value(&op.to_json()))],
    })
}

fn gp(ctx: &Context) -> Run<Outcome> {
    let root = ctx.root();
    let g = root.require_section("grid")?;
    let boundary = match g.str("boundary")?.unwrap_or("dirichlet") {
        "dirichlet" => Boundary::Dirichlet,
        "periodic" => Boundary::Periodic,
        other => return Err(g.invalid("boundary", format!("must be dirichlet or periodic, got `{other}`")).into()),
    };
    let grid = Grid1D::new(g.usize_or("n_points", 128)?, g.require_f64("x_min")?, g.require_f64("x_max")?, boundary)?;
    let kinetic = match root.section("kinetic")? {
        Some(k) => Kinetic { hbar: k.f64_or("hbar", 1.0)?, mass: k.f64_or("mass", 1.0)? },
        None => Kinetic::default(),
    };
    let potential = if let Some(file) = root.str("potential_file")? {
        let f = std::fs::File::open(ctx.cfg.resolve(file))
            .map_err(|e| root.invalid("potential_file", format!("cannot be opened: {e}")))?;
        Potential::from_csv(f)?
    } else {
        let p = root.require_section("potential")?;
        let name = p.require_str("name")?;
        let mut params = Params::new();
        for key in p.keys().filter(|k| *k != "name") {
            params.insert(key.clone(), p.require_f64(key)?);
        }
        let reg = ctx.registry()?;
        reg.potential(name, &params).map_err(|e| match e {
            Error::InvalidInput(msg) => RunError::Config(p.invalid("name", msg)),
            other => RunError::Model(other),
        })?
    };
    let coupling = root.complex("coupling")?.unwrap_or(C64::new(0.0, 0.0));
    let problem = GpProblem::new(grid, kinetic, &potential, coupling)?;
    let defaults = GpOptions::default();
    let selection = match root.complex("target")? {
        Some(z) => ModeSelection::Nearest(z),
        None => ModeSelection::Lowest,
    };
    let opts = GpOptions {
        selection,
        gauge: root.positive("gauge")?.unwrap_or(defaults.gauge),
        mix: root.f64_or("mix", defaults.mix)?,
        tol: root.positive("tol")?.unwrap_or(defaults.tol),
        max_iter: root.usize_or("max_iter", defaults.max_iter)?,
        biortho: ctx.biortho()?,
    };
    let sol = solve_self_consistent(&problem, &opts)?;
    let uniqueness = match root.f64_list("uniqueness_mixes")? {
        Some(mixes) => to_value(&check_uniqueness(&problem, &opts, &mixes)?),
        None => Value::Null,
    };
    let summary = json!({
        "kind": "gp",
        "grid": to_value(&grid),
        "spacing": grid.spacing(),
        "coupling": cpair(coupling),
        "mu": cpair(sol.mu),
        "residual": sol.residual,
        "iterations": sol.iterations,
        "fixed_point_defect": sol.fixed_point_defect,
        "normalization": cpair(grid.integrate(&sol.density())),
        "norm_sq": grid.integrate(&sol.psi.mapv(|z| C64::new(z.norm_sqr(), 0.0))).re,
        "gauge": sol.gauge,
        "uniqueness": uniqueness,
    });
    Ok(Outcome {
        summary,
        tables: vec![Table { name: "profile".into(), header: GPSolution::csv_header(), rows: sol.csv_rows(&grid) }],
        snapshots: vec![],
    })
}
