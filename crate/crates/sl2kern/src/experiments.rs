//! Desk-scale runs of the bilinear discrepancy bound: the left side
//! |⟨α₁|ΔF|α₂⟩| against (AD)^{1/2}X₀^θ√(⟨α₁|Δk_{X₁²,R₁}|α₁⟩⟨α₂|Δk_{X₂²,R₂}|α₂⟩),
//! and the right-K-invariant variant with a Hecke sum in the first slot.

use serde::{Deserialize, Serialize};

use crate::arithmetic::{gcd, DirichletCharacter};
use crate::kernel::{
    automorphic_kernel, hecke_twisted_sum, main_term, make_bump, IwasawaWeight, KernelError,
    KernelFunction, KernelWeight, Lattice, Parity, PointFunctional,
};
use crate::majorants::{k_skewed, k_z, MajorantCertificate, MajorantKernel};
use crate::numerics::{QuadratureSpec, C64};
use crate::sl2::GroupElement;

/// Default spectral-gap exponent.
pub const DEFAULT_THETA: f64 = 7.0 / 64.0;

/// Diagonal pairings ⟨α|Δk|α⟩ count as nonnegative above −this·scale.
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum CharacterConfig {
    #[default]
    Principal,
    Kronecker {
        disc: i64,
    },
    /// χ(n) for n = 0..q−1 as [re, im] pairs.
    Table {
        values: Vec<[f64; 2]>,
    },
}

impl CharacterConfig {
    pub fn build(&self, q: u64) -> Result<DirichletCharacter, KernelError> {
        Ok(match self {
            CharacterConfig::Principal => DirichletCharacter::principal(q),
            CharacterConfig::Kronecker { disc } => DirichletCharacter::kronecker(*disc, q)?,
            CharacterConfig::Table { values } => {
                DirichletCharacter::table(q, values.iter().map(|v| C64::new(v[0], v[1])).collect())?
            }
        })
    }
}

/// One atom w·δ_τ; τ = (a, b, c, d) with ad − bc = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub matrix: [f64; 4],
    #[serde(default = "unit_weight")]
    pub weight: [f64; 2],
}

fn unit_weight() -> [f64; 2] {
    [1.0, 0.0]
}

pub(crate) fn identity_atoms() -> Vec<AtomConfig> {
    vec![AtomConfig {
        matrix: [1.0, 0.0, 0.0, 1.0],
        weight: unit_weight(),
    }]
}

fn default_order() -> u32 {
    10
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

pub fn functional(atoms: &[AtomConfig]) -> Result<PointFunctional, KernelError> {
    if atoms.is_empty() {
        return Err(KernelError::Config(
            "a functional needs at least one atom".into(),
        ));
    }
    let mut out = Vec::with_capacity(atoms.len());
    for a in atoms {
        let [x, y, z, w] = a.matrix;
        let g = GroupElement::new(x, y, z, w).map_err(|e| KernelError::Config(e.to_string()))?;
        out.push((g, C64::new(a.weight[0], a.weight[1])));
    }
    Ok(PointFunctional::new(out))
}

// ---------------------------------------------------------------------------
// the bilinear bound

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremConfig {
    pub q: u64,
    #[serde(default)]
    pub character: CharacterConfig,
    pub a: f64,
    pub c: f64,
    pub d: f64,
    pub delta: f64,
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default)]
    pub parity: Option<[Parity; 3]>,
    /// (X₀, X₁, X₂); defaults to (1, √(AD+1), √(AD+1))
    #[serde(default)]
    pub x: Option<[f64; 3]>,
    #[serde(default = "identity_atoms")]
    pub alpha1: Vec<AtomConfig>,
    #[serde(default = "identity_atoms")]
    pub alpha2: Vec<AtomConfig>,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

/// A prepared experiment.
#[derive(Debug, Clone)]
pub struct TheoremSetup {
    pub lattice: Lattice,
    pub weight: KernelWeight,
    pub alpha1: PointFunctional,
    pub alpha2: PointFunctional,
    pub x: [f64; 3],
    pub theta: f64,
}

impl TheoremSetup {
    pub fn from_config(cfg: &TheoremConfig) -> Result<Self, KernelError> {
        for (n, v) in [("A", cfg.a), ("C", cfg.c), ("D", cfg.d)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(KernelError::Config(format!(
                    "{n} must be positive, got {v}"
                )));
            }
        }
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) || cfg.a * cfg.d <= cfg.delta {
            return Err(KernelError::Config(format!(
                "need δ ∈ (0,1) and AD > δ, got δ = {}",
                cfg.delta
            )));
        }
        let parity = cfg.parity.unwrap_or([Parity::Even; 3]);
        let bump = make_bump(
            &[cfg.a, cfg.c, cfg.d],
            cfg.delta.min(0.5),
            cfg.order,
            &parity,
        )?;
        let ad = cfg.a * cfg.d;
        let x = cfg.x.unwrap_or([1.0, (ad + 1.0).sqrt(), (ad + 1.0).sqrt()]);
        Ok(TheoremSetup {
            lattice: Lattice::with_character(cfg.character.build(cfg.q)?),
            weight: KernelWeight::new(bump)?,
            alpha1: functional(&cfg.alpha1)?,
            alpha2: functional(&cfg.alpha2)?,
            x,
            theta: cfg.theta,
        })
    }

    /// The same problem for a[s]Γa[s]⁻¹: weight g ↦ F(a⁻¹ga) and atoms
    /// τ ↦ aτa⁻¹.
    pub fn conjugated(&self, s: f64) -> Self {
        let a = GroupElement::a(s);
        let conj = |f: &PointFunctional| {
            PointFunctional::new(
                f.atoms
                    .iter()
                    .map(|(t, w)| (a * *t * a.inv(), *w))
                    .collect(),
            )
        };
        TheoremSetup {
            lattice: self.lattice.conjugated(s),
            weight: self.weight.conjugated(s),
            alpha1: conj(&self.alpha1),
            alpha2: conj(&self.alpha2),
            x: self.x,
            theta: self.theta,
        }
    }

    /// (R₁, R₂) = (A/C, D/C) from the weight's support box.
    pub fn skews(&self) -> [f64; 2] {
        let [a, c, d] = self.weight.scales();
        [a / c, d / c]
    }
}

/// Lattice-point bookkeeping of a pairing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub enumerated: u64,
    pub supported: u64,
}

/// ⟨α₁|𝒦F|α₂⟩ and ⟨α₁|ΔF|α₂⟩ with the main term and its error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub kernel: C64,
    pub main: C64,
    pub discrepancy: C64,
    pub main_error: f64,
    pub counts: Counts,
}

pub fn pairing_with_counts<K: KernelFunction + ?Sized>(
    alpha1: &PointFunctional,
    alpha2: &PointFunctional,
    f: &K,
    lattice: &Lattice,
    spec: &QuadratureSpec,
) -> Result<Pairing, KernelError> {
    let m = main_term(f, lattice, spec)?;
    let mut kernel = C64::new(0.0, 0.0);
    let mut wsum1 = C64::new(0.0, 0.0);
    let mut wsum2 = C64::new(0.0, 0.0);
    let mut counts = Counts::default();
    for (t1, w1) in &alpha1.atoms {
        wsum1 += w1;
        for (t2, w2) in &alpha2.atoms {
            let s = automorphic_kernel(f, lattice, t1, t2)?;
            counts.enumerated += s.enumerated;
            counts.supported += s.supported;
            kernel += w1.conj() * w2 * s.value;
        }
    }
    for (_, w2) in &alpha2.atoms {
        wsum2 += w2;
    }
    let main = wsum1.conj() * wsum2 * m.value;
    Ok(Pairing {
        kernel,
        main,
        discrepancy: kernel - main,
        main_error: m.error * wsum1.norm() * wsum2.norm(),
        counts,
    })
}

/// ⟨α|Δk|α⟩ for a majorant, with the positivity verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalPairing {
    pub y: f64,
    pub r: f64,
    pub pairing: Pairing,
    /// max(|⟨α|𝒦k|α⟩|, |main|)
    pub scale: f64,
    pub positive: bool,
}

pub fn diagonal_pairing(
    alpha: &PointFunctional,
    k: &MajorantKernel,
    r: f64,
    lattice: &Lattice,
    spec: &QuadratureSpec,
) -> Result<DiagonalPairing, KernelError> {
    let kr = k_skewed(k, r)?;
    let p = pairing_with_counts(alpha, alpha, &kr, lattice, spec)?;
    let scale = p.kernel.norm().max(p.main.norm());
    let positive = p.discrepancy.re >= -POSITIVITY_TOL * scale;
    Ok(DiagonalPairing {
        y: k.z,
        r,
        pairing: p,
        scale,
        positive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub lhs: Pairing,
    pub kernels: [DiagonalPairing; 2],
    pub x: [f64; 3],
    pub skews: [f64; 2],
    pub counts: Counts,
    pub err_est: f64,
    pub positivity: bool,
    pub certificates: Vec<MajorantCertificate>,
}

/// Majorant tables keyed by Y, built on first use.
#[derive(Debug, Default)]
pub struct MajorantCache {
    tables: Vec<(MajorantKernel, MajorantCertificate)>,
}

impl MajorantCache {
    pub fn get(
        &mut self,
        y: f64,
        spec: &QuadratureSpec,
    ) -> Result<&(MajorantKernel, MajorantCertificate), KernelError> {
        if let Some(i) = self.tables.iter().position(|(k, _)| k.z == y) {
            return Ok(&self.tables[i]);
        }
        self.tables.push(k_z(y, spec)?);
        Ok(self.tables.last().unwrap())
    }
}

fn check_choice(x: &[f64; 3], need: f64) -> Result<(), KernelError> {
    if x.iter().any(|v| !(*v >= 1.0)) {
        return Err(KernelError::Config(format!("need every Xᵢ ≥ 1, got {x:?}")));
    }
    let prod = x[0] * x[1] * x[2];
    if prod < need * (1.0 - 1e-12) {
        return Err(KernelError::Config(format!(
            "need X₀X₁X₂ ≥ {need}, got {prod}"
        )));
    }
    if x[1] * x[1] <= 1.0 || x[2] * x[2] <= 1.0 {
        return Err(KernelError::Config(
            "need X₁, X₂ > 1 for the majorants".into(),
        ));
    }
    Ok(())
}

pub fn theorem_experiment(
    cfg: &TheoremConfig,
    spec: &QuadratureSpec,
) -> Result<TheoremReport, KernelError> {
    let setup = TheoremSetup::from_config(cfg)?;
    theorem_experiment_with(&setup, &mut MajorantCache::default(), spec)
}

/// Runs a prepared experiment; X₀X₁X₂ ≥ AD + 1 is required.
pub fn theorem_experiment_with(
    s: &TheoremSetup,
    cache: &mut MajorantCache,
    spec: &QuadratureSpec,
) -> Result<TheoremReport, KernelError> {
    let [a, _, d] = s.weight.scales();
    let ad = a * d;
    check_choice(&s.x, ad + 1.0)?;
    let skews = s.skews();
    let lhs = pairing_with_counts(&s.alpha1, &s.alpha2, &s.weight, &s.lattice, spec)?;
    let mut kernels = Vec::with_capacity(2);
    let mut certificates = Vec::new();
    for (i, alpha) in [&s.alpha1, &s.alpha2].into_iter().enumerate() {
        let y = s.x[i + 1] * s.x[i + 1];
        let (k, cert) = cache.get(y, spec)?;
        if !certificates.iter().any(|c: &MajorantCertificate| c.z == y) {
            certificates.push(cert.clone());
        }
        kernels.push(diagonal_pairing(alpha, k, skews[i], &s.lattice, spec)?);
    }
    let kernels = [kernels[0], kernels[1]];
    let k1 = kernels[0].pairing.discrepancy.re.max(0.0);
    let k2 = kernels[1].pairing.discrepancy.re.max(0.0);
    let pref = ad.sqrt() * s.x[0].powf(s.theta);
    let rhs = pref * (k1 * k2).sqrt();
    let lhs_abs = lhs.discrepancy.norm();
    let err_est = lhs.main_error
        + pref * 0.5 * (k2 * kernels[0].pairing.main_error / k1.max(f64::MIN_POSITIVE)).sqrt()
        + pref * 0.5 * (k1 * kernels[1].pairing.main_error / k2.max(f64::MIN_POSITIVE)).sqrt();
    Ok(TheoremReport {
        lhs_re: lhs.discrepancy.re,
        lhs_im: lhs.discrepancy.im,
        rhs,
        ratio: if rhs > 0.0 {
            lhs_abs / rhs
        } else {
            f64::INFINITY
        },
        lhs,
        kernels,
        x: s.x,
        skews,
        counts: Counts {
            enumerated: lhs.counts.enumerated
                + kernels
                    .iter()
                    .map(|k| k.pairing.counts.enumerated)
                    .sum::<u64>(),
            supported: lhs.counts.supported
                + kernels
                    .iter()
                    .map(|k| k.pairing.counts.supported)
                    .sum::<u64>(),
        },
        err_est,
        positivity: kernels.iter().all(|k| k.positive),
        certificates,
    })
}

// ---------------------------------------------------------------------------
// the right-K-invariant variant

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeckeWeight {
    pub h: u64,
    #[serde(default = "unit_weight")]
    pub weight: [f64; 2],
}

fn unit_beta() -> Vec<HeckeWeight> {
    vec![HeckeWeight {
        h: 1,
        weight: unit_weight(),
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinvConfig {
    pub q: u64,
    #[serde(default)]
    pub character: CharacterConfig,
    /// support scales of f(x, y): |x| ∈ [𝐗, 2𝐗], y ∈ [𝐘, 2𝐘]
    pub big_x: f64,
    pub big_y: f64,
    pub delta: f64,
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default)]
    pub x_parity: Option<Parity>,
    #[serde(default = "unit_beta")]
    pub beta: Vec<HeckeWeight>,
    /// H ≥ max h; defaults to the largest h in β
    #[serde(default)]
    pub h_max: Option<u64>,
    /// (Z₀, Z₁, Z₂); defaults to (1, √(𝐗/𝐘+1), √(𝐗/𝐘+1))
    #[serde(default)]
    pub z: Option<[f64; 3]>,
    #[serde(default = "identity_atoms")]
    pub alpha1: Vec<AtomConfig>,
    /// one functional per β entry, or a single one used for all
    #[serde(default)]
    pub alpha2: Vec<Vec<AtomConfig>>,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinvReport {
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub kernel1: DiagonalPairing,
    /// ⟨α₂,ₕ|Δk_{Z₂²,1}|α₂,ₕ⟩ per β entry
    pub kernel2: Vec<DiagonalPairing>,
    pub z: [f64; 3],
    pub h_max: u64,
    pub err_est: f64,
    pub positivity: bool,
    pub counts: Counts,
}

pub fn kinvariant_experiment(
    cfg: &KinvConfig,
    spec: &QuadratureSpec,
) -> Result<KinvReport, KernelError> {
    kinvariant_experiment_with(cfg, &mut MajorantCache::default(), spec)
}

pub fn kinvariant_experiment_with(
    cfg: &KinvConfig,
    cache: &mut MajorantCache,
    spec: &QuadratureSpec,
) -> Result<KinvReport, KernelError> {
    let (bx, by) = (cfg.big_x, cfg.big_y);
    if !(bx > 0.0 && by > 0.0) || !(cfg.delta > 0.0 && cfg.delta < 1.0) || bx / by <= cfg.delta {
        return Err(KernelError::Config(format!(
            "need 𝐗, 𝐘 > 0, δ ∈ (0,1), 𝐗/𝐘 > δ; got {bx}, {by}, {}",
            cfg.delta
        )));
    }
    let chi = cfg.character.build(cfg.q)?;
    let lattice = Lattice::with_character(chi);
    let xp = cfg.x_parity.unwrap_or(Parity::Even);
    let weight = IwasawaWeight::new(make_bump(
        &[bx, by],
        cfg.delta.min(0.5),
        cfg.order,
        &[xp, Parity::Positive],
    )?)?;
    if cfg.beta.is_empty() {
        return Err(KernelError::Config("β needs at least one entry".into()));
    }
    let h_max = cfg
        .h_max
        .unwrap_or_else(|| cfg.beta.iter().map(|b| b.h).max().unwrap());
    for b in &cfg.beta {
        if b.h == 0 || b.h > h_max || gcd(b.h as i64, cfg.q as i64) != 1 {
            return Err(KernelError::Config(format!(
                "β must live on 1 ≤ h ≤ H = {h_max} coprime to q; got h = {}",
                b.h
            )));
        }
    }
    let ratio_xy = bx / by;
    let z = cfg
        .z
        .unwrap_or([1.0, (ratio_xy + 1.0).sqrt(), (ratio_xy + 1.0).sqrt()]);
    check_choice(&z, ratio_xy + 1.0)?;
    let alpha1 = functional(&cfg.alpha1)?;
    let alpha2: Vec<PointFunctional> = match cfg.alpha2.len() {
        0 => vec![functional(&identity_atoms())?; cfg.beta.len()],
        1 => vec![functional(&cfg.alpha2[0])?; cfg.beta.len()],
        n if n == cfg.beta.len() => cfg
            .alpha2
            .iter()
            .map(|a| functional(a))
            .collect::<Result<_, _>>()?,
        n => {
            return Err(KernelError::Config(format!(
                "{n} second functionals for {} β entries",
                cfg.beta.len()
            )))
        }
    };
    let one = [(1u64, C64::new(1.0, 0.0))];
    let mut lhs = C64::new(0.0, 0.0);
    let main_err = main_term(&weight, &lattice, spec)?.error;
    let mut err_est = 0.0;
    for (b, a2) in cfg.beta.iter().zip(&alpha2) {
        let w = C64::new(b.weight[0], b.weight[1]);
        lhs += hecke_twisted_sum(&[(b.h, w)], &one, &alpha1, a2, &weight, &lattice, spec)?;
        err_est +=
            w.norm() * main_err * alpha1.total_weight() * a2.total_weight() * (b.h as f64).sqrt();
    }
    let y1 = z[1] * z[1];
    let y2 = z[2] * z[2];
    let kernel1 = {
        let (k, _) = cache.get(y1, spec)?;
        diagonal_pairing(&alpha1, k, bx, &lattice, spec)?
    };
    let mut kernel2 = Vec::new();
    let mut sum2 = 0.0;
    for (b, a2) in cfg.beta.iter().zip(&alpha2) {
        let (k, _) = cache.get(y2, spec)?;
        let p = diagonal_pairing(a2, k, 1.0, &lattice, spec)?;
        sum2 += (b.weight[0].powi(2) + b.weight[1].powi(2)) * p.pairing.discrepancy.re.max(0.0);
        kernel2.push(p);
    }
    let k1 = kernel1.pairing.discrepancy.re.max(0.0);
    let rhs = ratio_xy.sqrt() * (h_max as f64).sqrt() * z[0].powf(cfg.theta) * (k1 * sum2).sqrt();
    let mut counts = kernel1.pairing.counts;
    for k in &kernel2 {
        counts.enumerated += k.pairing.counts.enumerated;
        counts.supported += k.pairing.counts.supported;
    }
    let positivity = kernel1.positive && kernel2.iter().all(|k| k.positive);
    Ok(KinvReport {
        lhs_re: lhs.re,
        lhs_im: lhs.im,
        rhs,
        ratio: if rhs > 0.0 {
            lhs.norm() / rhs
        } else {
            f64::INFINITY
        },
        kernel1,
        kernel2,
        z,
        h_max,
        err_est,
        positivity,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::weighted_discrepancy;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::with_tol(1e-9, 1e-13)
    }

    fn config(q: u64, s: f64) -> TheoremConfig {
        TheoremConfig {
            q,
            character: CharacterConfig::Principal,
            a: s,
            c: s,
            d: s,
            delta: 0.25,
            order: 10,
            parity: None,
            x: None,
            alpha1: identity_atoms(),
            alpha2: identity_atoms(),
            theta: DEFAULT_THETA,
        }
    }

    #[test]
    fn rejects_bad_choices() {
        let mut c = config(5, 4.0);
        c.x = Some([1.0, 4.0, 4.0]);
        assert!(matches!(
            theorem_experiment(&c, &spec()),
            Err(KernelError::Config(_))
        ));
        c.x = Some([0.5, 8.0, 8.0]);
        assert!(matches!(
            theorem_experiment(&c, &spec()),
            Err(KernelError::Config(_))
        ));
    }

    #[test]
    fn small_theorem_run() {
        let mut cache = MajorantCache::default();
        let mut c = config(5, 4.0);
        c.alpha2 = vec![
            AtomConfig {
                matrix: [1.0, 0.0, 0.0, 1.0],
                weight: [1.0, 0.0],
            },
            AtomConfig {
                matrix: [2.0, 0.5, 0.0, 0.5],
                weight: [0.0, 0.5],
            },
        ];
        let s = TheoremSetup::from_config(&c).unwrap();
        let r = theorem_experiment_with(&s, &mut cache, &spec()).unwrap();
        assert!(r.positivity, "{r:?}");
        assert!(r.ratio.is_finite() && r.rhs > 0.0);
        let direct =
            weighted_discrepancy(&s.alpha1, &s.alpha2, &s.weight, &s.lattice, &spec()).unwrap();
        assert!((direct - C64::new(r.lhs_re, r.lhs_im)).norm() < 1e-12 * (1.0 + direct.norm()));
        // conjugation by a diagonal element changes nothing
        let t = s.conjugated(1.7);
        let rt = theorem_experiment_with(&t, &mut cache, &spec()).unwrap();
        assert!((r.lhs_re - rt.lhs_re).abs() < 1e-10 && (r.lhs_im - rt.lhs_im).abs() < 1e-10);
        let (k1, k1t) = (r.kernels[0].pairing.kernel, rt.kernels[0].pairing.kernel);
        assert!((k1 - k1t).norm() < 1e-10 * k1.norm());
        assert!((r.rhs - rt.rhs).abs() < 1e-8 * r.rhs);
    }

    #[test]
    fn kinv_reduces_to_plain_pairing() {
        let cfg = KinvConfig {
            q: 3,
            character: CharacterConfig::Principal,
            big_x: 4.0,
            big_y: 1.0,
            delta: 0.25,
            order: 10,
            x_parity: None,
            beta: unit_beta(),
            h_max: None,
            z: None,
            alpha1: vec![AtomConfig {
                matrix: [1.0, 0.3, 0.0, 1.0],
                weight: [1.0, 0.0],
            }],
            alpha2: vec![],
            theta: DEFAULT_THETA,
        };
        let r = kinvariant_experiment(&cfg, &spec()).unwrap();
        assert!(r.positivity && r.ratio.is_finite(), "{r:?}");
        let lattice = Lattice::gamma0(3);
        let w = IwasawaWeight::new(
            make_bump(&[4.0, 1.0], 0.25, 10, &[Parity::Even, Parity::Positive]).unwrap(),
        )
        .unwrap();
        let a1 = functional(&cfg.alpha1).unwrap();
        let direct =
            weighted_discrepancy(&a1, &PointFunctional::identity(), &w, &lattice, &spec()).unwrap();
        assert!((direct - C64::new(r.lhs_re, r.lhs_im)).norm() < 1e-12 * (1.0 + direct.norm()));
        // β on h not coprime to q is rejected
        let mut bad = cfg.clone();
        bad.beta = vec![HeckeWeight {
            h: 3,
            weight: unit_weight(),
        }];
        assert!(kinvariant_experiment(&bad, &spec()).is_err());
    }
}
