//! Command parameters as read from JSON config files. Flags are merged into
//! the same JSON object before it is validated, so both paths share one schema.

use serde::{Deserialize, Serialize};

use sl2kern::experiments::{AtomConfig, CharacterConfig};
use sl2kern::kernel::Parity;

fn unit() -> f64 {
    1.0
}

fn identity() -> [f64; 4] {
    [1.0, 0.0, 0.0, 1.0]
}

fn ten() -> u32 {
    10
}

fn one() -> u32 {
    1
}

/// Fields every command accepts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Common {
    pub seed: Option<u64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub panel_order: Option<usize>,
    pub max_panels: Option<usize>,
    pub output: Option<String>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub manifest: Option<String>,
}

impl Common {
    /// Fields set in `over` win.
    pub fn merged(&self, over: &Common) -> Common {
        Common {
            seed: over.seed.or(self.seed),
            rel_tol: over.rel_tol.or(self.rel_tol),
            abs_tol: over.abs_tol.or(self.abs_tol),
            panel_order: over.panel_order.or(self.panel_order),
            max_panels: over.max_panels.or(self.max_panels),
            output: over.output.clone().or(self.output.clone()),
            format: over.format.or(self.format),
            threads: over.threads.or(self.threads),
            manifest: over.manifest.clone().or(self.manifest.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvertParams {
    /// [a, b, c, d] with ad − bc = 1
    pub matrix: Option<[f64; 4]>,
    /// [x, y, theta]
    pub iwasawa: Option<[f64; 3]>,
    /// [phi, u, vartheta]
    pub cartan: Option<[f64; 3]>,
    /// [r1, c, r2, sign]
    pub bruhat: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    pub q: u64,
    /// ball u_R(γ) ≤ ball_u
    #[serde(default)]
    pub ball_u: Option<f64>,
    #[serde(default = "unit")]
    pub r: f64,
    /// |a|, |b|, |c|, |d| bounds
    #[serde(default)]
    pub entry_box: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicParams {
    pub l1: i32,
    pub l2: i32,
    pub nu: f64,
    #[serde(default)]
    pub nu_im: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NuKind {
    Principal,
    Exceptional,
    Discrete,
}

impl NuKind {
    pub fn name(self) -> &'static str {
        match self {
            NuKind::Principal => "principal",
            NuKind::Exceptional => "exceptional",
            NuKind::Discrete => "discrete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// ψ_Z(u), the radial shell bump
    Shell,
    /// the radial ball bump of radius δ
    Ball,
    /// an entry bump f(a, c, d)
    Weight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformParams {
    pub field: FieldKind,
    #[serde(default)]
    pub z: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    /// [A, C, D]
    #[serde(default)]
    pub scales: Option<[f64; 3]>,
    #[serde(default = "ten")]
    pub order: u32,
    #[serde(default = "principal")]
    pub nu_kind: NuKind,
    /// t for ν = it, ν itself for exceptional, k for discrete
    pub nus: Vec<f64>,
    pub ls: Vec<i32>,
    /// defaults to ℓ₂ = ℓ₁
    #[serde(default)]
    pub l2s: Option<Vec<i32>>,
    #[serde(default = "panels")]
    pub panels: usize,
}

fn principal() -> NuKind {
    NuKind::Principal
}

fn panels() -> usize {
    48
}

/// The kernel function of a lattice sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum WeightConfig {
    /// F(g) = f(a, c, d) for a dyadic bump with support scales A, C, D
    Entries {
        a: f64,
        c: f64,
        d: f64,
        delta: f64,
        #[serde(default = "ten")]
        order: u32,
        #[serde(default)]
        parity: Option<[Parity; 3]>,
    },
    /// F(n[x]a[y]k) = f(x, y) with support scales X, Y
    Iwasawa {
        x: f64,
        y: f64,
        delta: f64,
        #[serde(default = "ten")]
        order: u32,
        #[serde(default)]
        x_parity: Option<Parity>,
    },
    /// k_{Z,R}(g) = k_Z(u_R(g))
    Majorant {
        z: f64,
        #[serde(default = "unit")]
        r: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSumParams {
    pub q: u64,
    #[serde(default)]
    pub character: CharacterConfig,
    pub weight: WeightConfig,
    #[serde(default = "identity")]
    pub tau1: [f64; 4],
    #[serde(default = "identity")]
    pub tau2: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscrepancyParams {
    pub q: u64,
    #[serde(default)]
    pub character: CharacterConfig,
    pub weight: WeightConfig,
    pub alpha1: Vec<AtomConfig>,
    pub alpha2: Vec<AtomConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MajorantParams {
    /// Z values of k_Z, or the Z of the exceptional kernel
    pub z: Vec<f64>,
    #[serde(default)]
    pub exceptional: bool,
    /// angular cutoff L
    #[serde(default = "one")]
    pub l: u32,
    #[serde(default = "eta")]
    pub eta: f64,
    #[serde(default = "unit")]
    pub widening: f64,
    /// exceptional ν values, or t for ν = it with k_Z
    #[serde(default)]
    pub nus: Option<Vec<f64>>,
    /// CSV path for the transform table
    #[serde(default)]
    pub table: Option<String>,
}

fn eta() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    #[serde(default = "all")]
    pub suite: String,
}

fn all() -> String {
    "all".into()
}
