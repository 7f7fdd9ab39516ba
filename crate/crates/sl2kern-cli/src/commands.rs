//! One function per subcommand. Each returns the primary output and any
//! extra manifest fields.

use serde::Serialize;
use serde_json::{json, Value};

use sl2kern::arithmetic::{count_gamma0, enumerate_gamma0, LatticeQuery};
use sl2kern::experiments::{
    functional, kinvariant_experiment, pairing_with_counts, theorem_experiment, KinvConfig,
    TheoremConfig,
};
use sl2kern::harmonics::{phi_two_type, SpectralParameter, TypeProjection};
use sl2kern::kernel::{
    make_bump, IwasawaWeight, KernelError, KernelFunction, KernelWeight, Lattice, Parity,
    PointFunctional,
};
use sl2kern::lie_ops::SmoothField;
use sl2kern::majorants::{
    exceptional_kernel, k_skewed, k_z, MajorantCertificate, RadialBump, SkewedKernel,
};
use sl2kern::numerics::{QuadratureSpec, C64};
use sl2kern::sl2::{BruhatCoord, CartanCoord, GroupElement, IwasawaCoord};
use sl2kern::verify::{run_suite, Suite, VerifyOptions};

use crate::error::CliError;
use crate::params::*;

/// What a command produced.
pub struct Outcome {
    pub json: Value,
    /// header and rows, for commands with a CSV form
    pub csv: Option<(Vec<String>, Vec<Vec<String>>)>,
    /// emit `json` (an array) as one compact record per line
    pub lines: bool,
    /// the result is valid but a certification or assertion failed
    pub failed: bool,
    pub extra: Value,
}

impl Outcome {
    fn json<T: Serialize>(v: &T) -> Result<Self, CliError> {
        Ok(Outcome {
            json: serde_json::to_value(v)?,
            csv: None,
            lines: false,
            failed: false,
            extra: Value::Null,
        })
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn element(m: [f64; 4]) -> Result<GroupElement, CliError> {
    GroupElement::new(m[0], m[1], m[2], m[3]).map_err(|e| CliError::Config(e.to_string()))
}

// ---------------------------------------------------------------------------

pub fn convert(p: &ConvertParams) -> Result<Outcome, CliError> {
    let given = [
        p.matrix.is_some(),
        p.iwasawa.is_some(),
        p.cartan.is_some(),
        p.bruhat.is_some(),
    ];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(CliError::Config(
            "give exactly one of matrix, iwasawa, cartan, bruhat".into(),
        ));
    }
    let g = if let Some(m) = p.matrix {
        element(m)?
    } else if let Some([x, y, theta]) = p.iwasawa {
        if !(y > 0.0) {
            return Err(CliError::Config(format!("need y > 0, got {y}")));
        }
        GroupElement::from_iwasawa(&IwasawaCoord { x, y, theta })
    } else if let Some([phi, u, vartheta]) = p.cartan {
        if !(u >= 0.0) {
            return Err(CliError::Config(format!("need u ≥ 0, got {u}")));
        }
        GroupElement::from_cartan(&CartanCoord { phi, u, vartheta })
    } else {
        let [r1, c, r2, sign] = p.bruhat.unwrap();
        if !(c > 0.0) || (sign != 1.0 && sign != -1.0) {
            return Err(CliError::Config("bruhat needs c > 0 and sign ±1".into()));
        }
        GroupElement::from_bruhat(&BruhatCoord {
            r1,
            c,
            r2,
            sign: sign as i8,
        })
    };
    Outcome::json(&json!({
        "matrix": g.entries(),
        "iwasawa": g.to_iwasawa(),
        "cartan": g.to_cartan(),
        "bruhat": g.to_bruhat().ok(),
        "u": g.u(),
    }))
}

fn lattice_query(p: &LatticeParams) -> Result<LatticeQuery, CliError> {
    match (p.ball_u, p.entry_box) {
        (Some(u), None) => Ok(LatticeQuery::ball(p.q, p.r, u)),
        (None, Some([a, b, c, d])) => Ok(LatticeQuery::entry_box(p.q, a, b, c, d)),
        _ => Err(CliError::Config(
            "give exactly one of ball_u and entry_box".into(),
        )),
    }
}

pub fn count(p: &LatticeParams) -> Result<Outcome, CliError> {
    let s = count_gamma0(&lattice_query(p)?).map_err(KernelError::from)?;
    let mut out = Outcome::json(&s)?;
    out.csv = Some((
        ["total", "b0", "c0", "bc"].map(String::from).to_vec(),
        vec![[s.total, s.b0, s.c0, s.bc].map(|v| v.to_string()).to_vec()],
    ));
    Ok(out)
}

pub fn enumerate(p: &LatticeParams) -> Result<Outcome, CliError> {
    let ms = enumerate_gamma0(&lattice_query(p)?).map_err(KernelError::from)?;
    let rows: Vec<[i64; 4]> = ms.iter().map(|m| [m.a, m.b, m.c, m.d]).collect();
    let records: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "a": r[0], "b": r[1], "c": r[2], "d": r[3] }))
        .collect();
    let mut out = Outcome::json(&records)?;
    out.lines = true;
    out.csv = Some((
        ["a", "b", "c", "d"].map(String::from).to_vec(),
        rows.iter()
            .map(|r| r.map(|v| v.to_string()).to_vec())
            .collect(),
    ));
    Ok(out)
}

pub fn harmonic(p: &HarmonicParams, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    if !(p.u >= 0.0) {
        return Err(CliError::Config(format!("need u ≥ 0, got {}", p.u)));
    }
    let nu = C64::new(p.nu, p.nu_im);
    let v = phi_two_type(p.u, nu, p.l1, p.l2, spec).map_err(KernelError::from)?;
    let mut out =
        Outcome::json(&json!({ "l1": p.l1, "l2": p.l2, "nu": nu, "u": p.u, "value": v }))?;
    out.csv = Some((
        ["l1", "l2", "nu_re", "nu_im", "u", "re", "im"]
            .map(String::from)
            .to_vec(),
        vec![vec![
            p.l1.to_string(),
            p.l2.to_string(),
            num(p.nu),
            num(p.nu_im),
            num(p.u),
            num(v.re),
            num(v.im),
        ]],
    ));
    Ok(out)
}

fn spectral_parameter(kind: NuKind, v: f64) -> Result<SpectralParameter, CliError> {
    let r = match kind {
        NuKind::Principal => Ok(SpectralParameter::principal(v)),
        NuKind::Exceptional => SpectralParameter::exceptional(v),
        NuKind::Discrete => {
            if v.fract() != 0.0 || v < 0.0 {
                return Err(CliError::Config(format!(
                    "discrete weight must be a non-negative integer, got {v}"
                )));
            }
            SpectralParameter::discrete(v as u32)
        }
    };
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn entry_weight(
    a: f64,
    c: f64,
    d: f64,
    delta: f64,
    order: u32,
    parity: [Parity; 3],
) -> Result<KernelWeight, CliError> {
    Ok(KernelWeight::new(make_bump(
        &[a, c, d],
        delta,
        order,
        &parity,
    )?)?)
}

#[derive(Serialize)]
struct TransformRow {
    nu_kind: &'static str,
    nu: f64,
    l1: i32,
    l2: i32,
    re: f64,
    im: f64,
    err_est: f64,
}

pub fn transform_table(p: &TransformParams, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| CliError::Config(format!("field needs {name}")))
    };
    let (field, u_max) = match p.field {
        FieldKind::Shell => {
            let b = RadialBump::shell(need(p.z, "z")?)?;
            (b.field(), b.support().1)
        }
        FieldKind::Ball => {
            let b = RadialBump::ball(need(p.delta, "delta")?)?;
            (b.field(), b.support().1)
        }
        FieldKind::Weight => {
            let [a, c, d] = p
                .scales
                .ok_or_else(|| CliError::Config("weight needs scales".into()))?;
            let w = entry_weight(
                a,
                c,
                d,
                need(p.delta, "delta")?,
                p.order,
                [Parity::Positive; 3],
            )?;
            let m = w.entry_bounds();
            let u_max = (m.iter().map(|x| x * x).sum::<f64>() - 2.0) / 4.0;
            (
                SmoothField::new(move |g| KernelFunction::eval(&w, g)),
                u_max,
            )
        }
    };
    let mut rows = Vec::new();
    let pairs: Vec<(i32, i32)> = match &p.l2s {
        None => p.ls.iter().map(|&l| (l, l)).collect(),
        Some(l2s) => {
            p.ls.iter()
                .flat_map(|&a| l2s.iter().map(move |&b| (a, b)))
                .collect()
        }
    };
    for (l1, l2) in pairs {
        let params: Vec<SpectralParameter> = p
            .nus
            .iter()
            .map(|&v| spectral_parameter(p.nu_kind, v))
            .collect::<Result<_, _>>()?;
        for param in &params {
            param
                .check_types(l1, l2)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        let proj = TypeProjection::from_field(&field, l1, l2, u_max, p.panels, spec);
        for (&v, param) in p.nus.iter().zip(&params) {
            let e = proj.transform(param, spec).map_err(KernelError::from)?;
            rows.push(TransformRow {
                nu_kind: p.nu_kind.name(),
                nu: v,
                l1,
                l2,
                re: e.value.re,
                im: e.value.im,
                err_est: e.error,
            });
        }
    }
    let csv_rows = rows
        .iter()
        .map(|r| {
            vec![
                r.nu_kind.to_string(),
                num(r.nu),
                r.l1.to_string(),
                r.l2.to_string(),
                num(r.re),
                num(r.im),
                num(r.err_est),
            ]
        })
        .collect();
    let mut out = Outcome::json(&json!({ "u_max": u_max, "rows": rows }))?;
    out.csv = Some((
        ["nu_kind", "nu", "l1", "l2", "re", "im", "err_est"]
            .map(String::from)
            .to_vec(),
        csv_rows,
    ));
    Ok(out)
}

enum Built {
    Entries(KernelWeight),
    Iwasawa(IwasawaWeight),
    Majorant(SkewedKernel, MajorantCertificate),
}

impl Built {
    fn new(w: &WeightConfig, spec: &QuadratureSpec) -> Result<Self, CliError> {
        Ok(match *w {
            WeightConfig::Entries {
                a,
                c,
                d,
                delta,
                order,
                parity,
            } => Built::Entries(entry_weight(
                a,
                c,
                d,
                delta,
                order,
                parity.unwrap_or([Parity::Even; 3]),
            )?),
            WeightConfig::Iwasawa {
                x,
                y,
                delta,
                order,
                x_parity,
            } => {
                let par = [x_parity.unwrap_or(Parity::Even), Parity::Positive];
                Built::Iwasawa(IwasawaWeight::new(make_bump(&[x, y], delta, order, &par)?)?)
            }
            WeightConfig::Majorant { z, r } => {
                let (k, cert) = k_z(z, spec)?;
                Built::Majorant(k_skewed(&k, r)?, cert)
            }
        })
    }

    fn kernel(&self) -> &dyn KernelFunction {
        match self {
            Built::Entries(w) => w,
            Built::Iwasawa(w) => w,
            Built::Majorant(k, _) => k,
        }
    }

    fn extra(&self) -> Value {
        match self {
            Built::Majorant(_, c) => json!({ "certificate": c }),
            _ => Value::Null,
        }
    }
}

fn lattice(q: u64, chi: &sl2kern::experiments::CharacterConfig) -> Result<Lattice, CliError> {
    Ok(Lattice::with_character(chi.build(q)?))
}

fn pairing_outcome(
    a1: &PointFunctional,
    a2: &PointFunctional,
    w: &WeightConfig,
    lat: &Lattice,
    spec: &QuadratureSpec,
) -> Result<Outcome, CliError> {
    let built = Built::new(w, spec)?;
    let p = pairing_with_counts(a1, a2, built.kernel(), lat, spec)?;
    let mut out = Outcome::json(&p)?;
    out.extra = built.extra();
    Ok(out)
}

pub fn kernel_sum(p: &KernelSumParams, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let lat = lattice(p.q, &p.character)?;
    let a1 = PointFunctional::delta(element(p.tau1)?);
    let a2 = PointFunctional::delta(element(p.tau2)?);
    pairing_outcome(&a1, &a2, &p.weight, &lat, spec)
}

pub fn discrepancy(p: &DiscrepancyParams, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let lat = lattice(p.q, &p.character)?;
    pairing_outcome(
        &functional(&p.alpha1)?,
        &functional(&p.alpha2)?,
        &p.weight,
        &lat,
        spec,
    )
}

pub fn experiment(p: &TheoremConfig, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let r = theorem_experiment(p, spec)?;
    let mut out = Outcome::json(&r)?;
    out.failed = !r.positivity;
    out.extra = json!({ "certificates": r.certificates });
    Ok(out)
}

pub fn kinv_experiment(p: &KinvConfig, spec: &QuadratureSpec) -> Result<Outcome, CliError> {
    let r = kinvariant_experiment(p, spec)?;
    let mut out = Outcome::json(&r)?;
    out.failed = !r.positivity;
    Ok(out)
}

/// Default exceptional ν grid.
const EXCEPTIONAL_NUS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

pub fn majorant(
    p: &MajorantParams,
    spec: &QuadratureSpec,
) -> Result<(Outcome, Option<String>), CliError> {
    let header = ["z", "nu_kind", "nu", "l", "transform", "err_est"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    if p.exceptional {
        let &[z] = p.z.as_slice() else {
            return Err(CliError::Config(
                "the exceptional kernel takes a single z".into(),
            ));
        };
        let nus = p.nus.clone().unwrap_or(EXCEPTIONAL_NUS.to_vec());
        let params: Vec<SpectralParameter> = nus
            .iter()
            .map(|&v| spectral_parameter(NuKind::Exceptional, v))
            .collect::<Result<_, _>>()?;
        let (_, rep) = exceptional_kernel(z, p.l, p.eta, p.widening, &params, spec)?;
        for e in &rep.entries {
            rows.push(vec![
                num(z),
                "exceptional".into(),
                num(e.nu.re),
                e.l.to_string(),
                num(e.transform),
                num(e.error),
            ]);
        }
        let failed = rep.min_transform < -1e-8 * rep.scale;
        let extra = json!({ "c0": rep.c0 });
        let mut out = Outcome::json(&rep)?;
        out.failed = failed;
        out.extra = extra;
        out.csv = Some((header, rows));
        return Ok((out, p.table.clone()));
    }
    let mut certs = Vec::new();
    let mut failed = false;
    for &z in &p.z {
        let (k, cert) = k_z(z, spec)?;
        failed |= cert.max_violation > 0.0;
        if let Some(ts) = &p.nus {
            let prof = |u: f64| C64::new(k.kernel.eval_u(u), 0.0);
            let proj = TypeProjection::from_profile(&prof, 0, 0, k.kernel.support, 48);
            for &t in ts {
                let e = proj
                    .transform(&SpectralParameter::principal(t), spec)
                    .map_err(KernelError::from)?;
                rows.push(vec![
                    num(z),
                    "principal".into(),
                    num(t),
                    "0".into(),
                    num(e.value.re),
                    num(e.error),
                ]);
            }
        }
        certs.push(cert);
    }
    let mut out = Outcome::json(&json!({
        "C_maj": sl2kern::majorants::FROZEN_C_MAJ,
        "c_maj": sl2kern::majorants::FROZEN_C_SUPPORT,
        "c0": Value::Null,
        "certificates": certs,
    }))?;
    out.failed = failed;
    out.csv = Some((header, rows));
    Ok((out, p.table.clone()))
}

#[derive(Serialize)]
struct CheckRow<'a> {
    id: u32,
    name: &'a str,
    anchor: &'a str,
    residual: f64,
    threshold: f64,
    pass: bool,
    tolerance_limited: bool,
    recorded: &'a std::collections::BTreeMap<String, f64>,
    error: &'a Option<String>,
}

pub fn verify(
    p: &VerifyParams,
    seed: Option<u64>,
    spec: Option<QuadratureSpec>,
) -> Result<Outcome, CliError> {
    let suite: Suite = p.suite.parse().map_err(CliError::Config)?;
    let mut opts = VerifyOptions {
        spec,
        ..Default::default()
    };
    if let Some(s) = seed {
        opts.seed = s;
    }
    let rep = run_suite(suite, &opts);
    let checks: Vec<CheckRow> = rep
        .checks
        .iter()
        .map(|c| CheckRow {
            id: c.id,
            name: &c.name,
            anchor: &c.anchor,
            residual: c.residual,
            threshold: c.threshold,
            pass: c.pass,
            tolerance_limited: c.tolerance_limited,
            recorded: &c.recorded,
            error: &c.error,
        })
        .collect();
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                c.id.to_string(),
                c.name.to_string(),
                num(c.residual),
                num(c.threshold),
                c.pass.to_string(),
                c.tolerance_limited.to_string(),
            ]
        })
        .collect();
    let timings: Vec<Value> = rep
        .checks
        .iter()
        .map(|c| json!({ "id": c.id, "seconds": c.seconds }))
        .collect();
    let mut out = Outcome::json(&json!({
        "suite": rep.suite,
        "seed": rep.seed,
        "failures": rep.failures,
        "checks": checks,
    }))?;
    out.failed = rep.failures > 0;
    out.extra = json!({ "timings": timings });
    out.csv = Some((
        [
            "id",
            "name",
            "residual",
            "threshold",
            "pass",
            "tolerance_limited",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    ));
    Ok(out)
}
