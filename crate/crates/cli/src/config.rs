//! Run configuration: a TOML document with nested sections. Coefficients,
//! nonlinearities and initial data are drawn from fixed named registries.

use std::f64::consts::PI;
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use hisd_core::dynamics::{SchemeParams, VSolver};
use hisd_core::fem::{build_mesh, AnalyticField, FemSpace, ProblemSpec};
use hisd_core::landscape::LandscapeParams;

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub discretization: DiscretizationConfig,
    pub scheme: SchemeConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub diffusion: DiffusionSelector,
    #[serde(default)]
    pub advection: AdvectionSelector,
    #[serde(default)]
    pub reaction: ReactionSelector,
    pub nonlinearity: NonlinearitySelector,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffusionSelector {
    /// a(x) = value * I
    Constant { value: f64 },
    /// a(x) = (base + amplitude sin(frequency x_1)) * I
    SinProfile { base: f64, amplitude: f64, frequency: f64 },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdvectionSelector {
    #[default]
    None,
    /// b(x) = (amplitude sin(frequency x_1), 0)
    Sin { amplitude: f64, frequency: f64 },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReactionSelector {
    #[default]
    None,
    Constant { value: f64 },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearitySelector {
    /// f(u) = sum_j coefficients[j] u^j
    Polynomial { coefficients: Vec<f64> },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub cells: Vec<usize>,
    pub tau: f64,
    pub final_time: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub k: usize,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
    #[serde(default = "default_guard_eps")]
    pub guard_eps: f64,
    #[serde(default = "yes")]
    pub orthonormal_terms: bool,
    #[serde(default)]
    pub v_solver: VSolverSelector,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_picard_tol() -> f64 {
    1e-12
}
fn default_picard_max() -> usize {
    50
}
fn default_guard_eps() -> f64 {
    1e-6
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VSolverSelector {
    #[default]
    FactorEach,
    FrozenShift,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub u: FieldSelector,
    pub v: DirectorSelector,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSelector {
    Zero,
    /// amplitude sin(frequency x)
    Sin { amplitude: f64, frequency: f64 },
    /// amplitude x sin(frequency x)
    XSin { amplitude: f64, frequency: f64 },
    /// sum_m coefficients[m-1] sin(m x)  (one-dimensional)
    SineSeries { coefficients: Vec<f64> },
    /// amplitude sin(mx pi x / Lx) sin(my pi y / Ly)
    Sin2d { amplitude: f64, mx: u32, my: u32 },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DirectorSelector {
    /// The first `count` L2-normalized Laplace eigenmodes of the domain.
    SineModes { count: usize },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    #[serde(default = "one_usize")]
    pub cadence: usize,
    #[serde(default = "default_spectrum_count")]
    pub spectrum_count: usize,
    #[serde(default = "yes")]
    pub write_fields: bool,
}

fn one_usize() -> usize {
    1
}
fn default_spectrum_count() -> usize {
    6
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    pub max_runs: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon_rel: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_abs: f64,
    #[serde(default = "default_dedup_tol")]
    pub dedup_tol: f64,
    #[serde(default = "default_residual_threshold")]
    pub residual_threshold: f64,
    #[serde(default = "default_upward")]
    pub upward_targets: Vec<usize>,
    #[serde(default = "one_u64")]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_dedup_tol() -> f64 {
    1e-2
}
fn default_residual_threshold() -> f64 {
    1e-3
}
fn default_upward() -> Vec<usize> {
    vec![1]
}
fn one_u64() -> u64 {
    1
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default)]
    pub tau_list: Vec<f64>,
    #[serde(default)]
    pub cells_list: Vec<usize>,
    pub reference_tau: f64,
    pub reference_cells: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let d = self.problem.dim;
        if d != 1 && d != 2 {
            bail!("problem.dim must be 1 or 2");
        }
        if self.problem.extents.len() != d || self.discretization.cells.len() != d {
            bail!("extents and cells must have {d} entries");
        }
        match (&self.initial.u, d) {
            (FieldSelector::Sin2d { .. }, 1) => bail!("sin2d initial data requires dim = 2"),
            (FieldSelector::Sin { .. } | FieldSelector::XSin { .. } | FieldSelector::SineSeries { .. }, 2) => {
                bail!("one-dimensional initial data used with dim = 2")
            }
            _ => {}
        }
        if let FieldSelector::Sin { frequency, .. } = self.initial.u {
            let l = self.problem.extents[0];
            if (frequency * l).sin().abs() > 1e-9 {
                bail!("sin initial data does not vanish at x = {l}");
            }
        }
        Ok(())
    }

    pub fn build_space(&self) -> anyhow::Result<FemSpace> {
        let mesh = build_mesh(self.problem.dim, &self.problem.extents, &self.discretization.cells)?;
        Ok(FemSpace::new(mesh))
    }

    pub fn build_problem(&self) -> ProblemSpec {
        problem_from(&self.problem)
    }

    pub fn scheme_params(&self) -> SchemeParams {
        SchemeParams {
            k: self.scheme.k,
            beta: self.scheme.beta,
            gamma: self.scheme.gamma,
            tau: self.discretization.tau,
            t_final: self.discretization.final_time,
            picard_tol: self.scheme.picard_tol,
            picard_max: self.scheme.picard_max,
            guard_eps: self.scheme.guard_eps,
            orthonormal_terms: self.scheme.orthonormal_terms,
            v_solver: match self.scheme.v_solver {
                VSolverSelector::FactorEach => VSolver::FactorEach,
                VSolverSelector::FrozenShift => VSolver::FrozenShift,
            },
        }
    }

    pub fn landscape_params(&self) -> Option<LandscapeParams> {
        self.landscape.as_ref().map(|l| LandscapeParams {
            epsilon_rel: l.epsilon_rel,
            epsilon_abs: l.epsilon_abs,
            dedup_tol: l.dedup_tol,
            residual_threshold: l.residual_threshold,
            max_runs: l.max_runs,
            upward_targets: l.upward_targets.clone(),
            seed: l.seed,
        })
    }

    pub fn initial_u(&self) -> Box<dyn AnalyticField + Send + Sync> {
        field_from(&self.initial.u, &self.problem)
    }

    pub fn initial_directors(&self) -> Vec<Box<dyn AnalyticField + Send + Sync>> {
        let DirectorSelector::SineModes { count } = self.initial.v;
        sine_mode_family(count, &self.problem)
    }
}

pub fn problem_from(p: &ProblemConfig) -> ProblemSpec {
    let (diffusion, a0): (hisd_core::fem::DiffusionFn, f64) = match p.diffusion {
        DiffusionSelector::Constant { value } => {
            (Arc::new(move |_| [[value, 0.0], [0.0, value]]), value)
        }
        DiffusionSelector::SinProfile { base, amplitude, frequency } => (
            Arc::new(move |x: [f64; 2]| {
                let v = base + amplitude * (frequency * x[0]).sin();
                [[v, 0.0], [0.0, v]]
            }),
            base - amplitude.abs(),
        ),
    };
    let advection: Option<hisd_core::fem::VelocityFn> = match p.advection {
        AdvectionSelector::None => None,
        AdvectionSelector::Sin { amplitude, frequency } => Some(Arc::new(move |x: [f64; 2]| {
            [amplitude * (frequency * x[0]).sin(), 0.0]
        })),
    };
    let reaction: Option<hisd_core::fem::SpatialFn> = match p.reaction {
        ReactionSelector::None => None,
        ReactionSelector::Constant { value } => Some(Arc::new(move |_| value)),
    };
    let NonlinearitySelector::Polynomial { coefficients } = &p.nonlinearity;
    let coeffs = coefficients.clone();
    let dcoeffs: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| j as f64 * c)
        .collect();
    let f = move |u: f64| horner(&coeffs, u);
    let fp = move |u: f64| horner(&dcoeffs, u);
    ProblemSpec {
        diffusion,
        advection,
        reaction,
        f: Arc::new(f),
        fprime: Arc::new(fp),
        a0,
    }
}

fn horner(c: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for &ci in c.iter().rev() {
        acc = acc * u + ci;
    }
    acc
}

struct Closed {
    value: Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    grad: Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
}

impl AnalyticField for Closed {
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        (self.grad)(x)
    }
}

fn field_from(sel: &FieldSelector, p: &ProblemConfig) -> Box<dyn AnalyticField + Send + Sync> {
    match sel.clone() {
        FieldSelector::Zero => Box::new(Closed {
            value: Box::new(|_| 0.0),
            grad: Box::new(|_| [0.0, 0.0]),
        }),
        FieldSelector::Sin { amplitude, frequency } => Box::new(Closed {
            value: Box::new(move |x| amplitude * (frequency * x[0]).sin()),
            grad: Box::new(move |x| [amplitude * frequency * (frequency * x[0]).cos(), 0.0]),
        }),
        FieldSelector::XSin { amplitude, frequency } => Box::new(Closed {
            value: Box::new(move |x| amplitude * x[0] * (frequency * x[0]).sin()),
            grad: Box::new(move |x| {
                [
                    amplitude
                        * ((frequency * x[0]).sin() + frequency * x[0] * (frequency * x[0]).cos()),
                    0.0,
                ]
            }),
        }),
        FieldSelector::SineSeries { coefficients } => {
            let c2 = coefficients.clone();
            Box::new(Closed {
                value: Box::new(move |x| {
                    coefficients
                        .iter()
                        .enumerate()
                        .map(|(m, c)| c * ((m + 1) as f64 * x[0]).sin())
                        .sum()
                }),
                grad: Box::new(move |x| {
                    [
                        c2.iter()
                            .enumerate()
                            .map(|(m, c)| {
                                let f = (m + 1) as f64;
                                c * f * (f * x[0]).cos()
                            })
                            .sum(),
                        0.0,
                    ]
                }),
            })
        }
        FieldSelector::Sin2d { amplitude, mx, my } => {
            let lx = p.extents[0];
            let ly = p.extents[1];
            let fx = mx as f64 * PI / lx;
            let fy = my as f64 * PI / ly;
            Box::new(Closed {
                value: Box::new(move |x| amplitude * (fx * x[0]).sin() * (fy * x[1]).sin()),
                grad: Box::new(move |x| {
                    [
                        amplitude * fx * (fx * x[0]).cos() * (fy * x[1]).sin(),
                        amplitude * fy * (fx * x[0]).sin() * (fy * x[1]).cos(),
                    ]
                }),
            })
        }
    }
}

/// The first `count` L2-normalized Dirichlet eigenmodes of the domain,
/// sorted by eigenvalue.
pub fn sine_mode_family(count: usize, p: &ProblemConfig) -> Vec<Box<dyn AnalyticField + Send + Sync>> {
    if p.dim == 1 {
        let l = p.extents[0];
        let amp = (2.0 / l).sqrt();
        (1..=count)
            .map(|i| {
                let f = i as f64 * PI / l;
                Box::new(Closed {
                    value: Box::new(move |x: [f64; 2]| amp * (f * x[0]).sin()),
                    grad: Box::new(move |x: [f64; 2]| [amp * f * (f * x[0]).cos(), 0.0]),
                }) as Box<dyn AnalyticField + Send + Sync>
            })
            .collect()
    } else {
        let lx = p.extents[0];
        let ly = p.extents[1];
        // modes ordered by (m/Lx)^2 + (n/Ly)^2, then lexicographically
        let mut modes: Vec<(f64, u32, u32)> = Vec::new();
        let cap = (count as f64).sqrt() as u32 + count as u32 + 2;
        for m in 1..=cap {
            for n in 1..=cap {
                let lam = (m as f64 / lx).powi(2) + (n as f64 / ly).powi(2);
                modes.push((lam, m, n));
            }
        }
        modes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let amp = 2.0 / (lx * ly).sqrt();
        modes
            .into_iter()
            .take(count)
            .map(|(_, m, n)| {
                let fx = m as f64 * PI / lx;
                let fy = n as f64 * PI / ly;
                Box::new(Closed {
                    value: Box::new(move |x: [f64; 2]| amp * (fx * x[0]).sin() * (fy * x[1]).sin()),
                    grad: Box::new(move |x: [f64; 2]| {
                        [
                            amp * fx * (fx * x[0]).cos() * (fy * x[1]).sin(),
                            amp * fy * (fx * x[0]).sin() * (fy * x[1]).cos(),
                        ]
                    }),
                }) as Box<dyn AnalyticField + Send + Sync>
            })
            .collect()
    }
}
