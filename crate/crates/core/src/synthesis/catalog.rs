//! Local time-minimal syntheses at a target point, by catalog label.

use serde::{Deserialize, Serialize};

use crate::extremal::{backward_bc_sweep, bang_from_singular, ArcEnd, ArcLabel, SweepOptions, SwitchKind};
use crate::liealg::ControlAffine;
use crate::linalg::Vec3;
use crate::series::{splitting_locus, LocusGrid, LocusKind, PolynomialSystem};
use crate::singular::{integrate_singular, singular_control_rate, SingularKind};

use super::strata::{trace_locus, LocusFn, StrataTolerances, StratumSample, TargetGrid, TargetPlane};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CatalogLabel {
    GenericPlus,
    GenericMinus,
    HyperbolicFold,
    EllipticFold,
    ParabolicNonAdmissibleHyperbolic,
    ParabolicNonAdmissibleElliptic,
    SaturatingCase1,
    SaturatingCase2,
    EllipticBifurcation,
    SemiBridge,
    Unclassified,
}

impl CatalogLabel {
    pub fn name(&self) -> &'static str {
        match self {
            CatalogLabel::GenericPlus => "generic+",
            CatalogLabel::GenericMinus => "generic-",
            CatalogLabel::HyperbolicFold => "hyperbolic-fold",
            CatalogLabel::EllipticFold => "elliptic-fold",
            CatalogLabel::ParabolicNonAdmissibleHyperbolic => "parabolic-nonadmissible-hyperbolic",
            CatalogLabel::ParabolicNonAdmissibleElliptic => "parabolic-nonadmissible-elliptic",
            CatalogLabel::SaturatingCase1 => "saturating-1",
            CatalogLabel::SaturatingCase2 => "saturating-2",
            CatalogLabel::EllipticBifurcation => "elliptic-bifurcation",
            CatalogLabel::SemiBridge => "semi-bridge",
            CatalogLabel::Unclassified => "unclassified",
        }
    }

    /// Arc sequences of the local synthesis, forward in time.
    pub fn policy(&self) -> &'static str {
        match self {
            CatalogLabel::GenericPlus => "σ+",
            CatalogLabel::GenericMinus => "σ-",
            CatalogLabel::HyperbolicFold | CatalogLabel::SemiBridge => "σ±σsσ∓",
            CatalogLabel::SaturatingCase1 | CatalogLabel::SaturatingCase2 => "σ±σ∓σs",
            CatalogLabel::EllipticFold | CatalogLabel::EllipticBifurcation => "σ+σ- | σ-σ+, cut",
            CatalogLabel::ParabolicNonAdmissibleHyperbolic | CatalogLabel::ParabolicNonAdmissibleElliptic => "σ±σ∓",
            CatalogLabel::Unclassified => "",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocusPoint {
    pub q: Vec3,
    pub t: f64,
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisLoci {
    /// First switching points of BC-extremals ending with `σ+`.
    pub w_plus: Vec<LocusPoint>,
    pub w_minus: Vec<LocusPoint>,
    /// First switches of bang extremals leaving the singular arc.
    pub w_s: Vec<LocusPoint>,
    /// Singular arcs ending on `𝒮` near the anchor, backward in time.
    pub gamma_s: Vec<LocusPoint>,
    pub c1: Vec<LocusPoint>,
    pub c12: Vec<LocusPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub label: CatalogLabel,
    pub policy: String,
    pub anchor: StratumSample,
    /// Model parameters.
    pub parameters: serde_json::Value,
    pub loci: SynthesisLoci,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisOptions {
    pub tol: StrataTolerances,
    /// Half-width of the validity box around the anchor.
    pub box_half: f64,
    /// Compute the supporting loci by backward sweeps.
    pub loci: bool,
    /// Target samples per axis around the anchor for the sweeps.
    pub loci_samples: usize,
    pub sweep: SweepOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            tol: StrataTolerances::default(),
            box_half: 0.3,
            loci: true,
            loci_samples: 5,
            sweep: SweepOptions {
                horizon: 0.5,
                max_arcs: 3,
                ..SweepOptions::default()
            },
        }
    }
}

fn in_box(q: &Vec3, c: &Vec3, half: f64) -> bool {
    (0..3).all(|i| (q[i] - c[i]).abs() <= half)
}

/// Whether the singular leaf through `q` meets `|u_s| ≤ 1` inside the box,
/// in either time direction.
fn leaf_admissible<M: ControlAffine>(sys: &M, q: &Vec3, half: f64) -> bool {
    [1.0, -1.0].iter().any(|dir| {
        integrate_singular(sys, q, dir * 4.0 * half, false).is_ok_and(|arc| {
            arc.states
                .iter()
                .zip(&arc.admissible)
                .any(|(s, ok)| *ok && in_box(s, q, half))
        })
    })
}

/// Label from the tags and sign data of the anchor.
pub fn classify_anchor<M: ControlAffine>(
    sys: &M,
    anchor: &StratumSample,
    opts: &SynthesisOptions,
) -> (CatalogLabel, Vec<String>) {
    let mut diag = Vec::new();
    let kind = anchor.classification.kind;
    if let Some(eps) = anchor.eps {
        let l = if eps > 0.0 { CatalogLabel::GenericPlus } else { CatalogLabel::GenericMinus };
        return (l, diag);
    }
    if anchor.on_exceptional || kind == SingularKind::Exceptional {
        diag.push(format!("𝒮 meets ℰ: n̂·F = {:e}, D″ = {:e}", anchor.n_f, anchor.classification.d_second));
        return (CatalogLabel::Unclassified, diag);
    }
    if anchor.semi_bridge {
        return (CatalogLabel::SemiBridge, diag);
    }
    let Some(u) = anchor.u_s else {
        diag.push(format!("D = {:e} vanishes on 𝒮 off the semi-bridge", anchor.classification.d));
        return (CatalogLabel::Unclassified, diag);
    };
    if anchor.saturated {
        return match singular_control_rate(sys, &anchor.q) {
            Ok(r) => {
                let rate = u.signum() * r;
                diag.push(format!("d|u_s|/dt = {rate:e}"));
                if rate < 0.0 {
                    (CatalogLabel::SaturatingCase1, diag)
                } else {
                    (CatalogLabel::SaturatingCase2, diag)
                }
            }
            Err(e) => {
                diag.push(e.to_string());
                (CatalogLabel::Unclassified, diag)
            }
        };
    }
    let hyperbolic = kind == SingularKind::Hyperbolic;
    if !hyperbolic && (u - 3.0).abs() <= opts.tol.saturation {
        return (CatalogLabel::EllipticBifurcation, diag);
    }
    let admissible = anchor.admissible || {
        let later = leaf_admissible(sys, &anchor.q, opts.box_half);
        if later {
            diag.push(format!("|u_s| = {:.6} at the anchor; the singular leaf is admissible inside the box", u.abs()));
        }
        later
    };
    let label = match (admissible, hyperbolic) {
        (true, true) => CatalogLabel::HyperbolicFold,
        (true, false) => CatalogLabel::EllipticFold,
        (false, true) => CatalogLabel::ParabolicNonAdmissibleHyperbolic,
        (false, false) => CatalogLabel::ParabolicNonAdmissibleElliptic,
    };
    (label, diag)
}

fn point(p: &crate::extremal::ExtremalPoint, eps: Option<f64>) -> LocusPoint {
    LocusPoint { q: p.q, t: p.t, eps }
}

/// W±, W_s and Γ_s around the anchor from backward BC-extremals. The
/// target samples are a grid around the anchor plus, for an anchor on `𝒮`,
/// points of `𝒮` traced through it.
pub fn sweep_loci<M: ControlAffine>(sys: &M, anchor: &StratumSample, opts: &SynthesisOptions) -> SynthesisLoci {
    let plane = TargetPlane::of(sys);
    let half = opts.box_half;
    let mut sweep = opts.sweep;
    sweep.arc.bounds = Some((anchor.q.map(|x| x - half), anchor.q.map(|x| x + half)));
    let n = opts.loci_samples.max(2);
    let h = 0.5 * half;
    let mut samples = vec![anchor.q];
    for i in 0..n {
        for j in 0..n {
            let du = -h + 2.0 * h * i as f64 / (n - 1) as f64;
            let dw = -h + 2.0 * h * j as f64 / (n - 1) as f64;
            samples.push(plane.point([anchor.coords[0] + du, anchor.coords[1] + dw]));
        }
    }
    if anchor.on_singular {
        let grid = TargetGrid::centered(anchor.coords, h, 2);
        let curve = trace_locus(sys, &plane, LocusFn::Singular, anchor.coords, h / (2 * n) as f64, &grid, 8 * n);
        samples.extend(curve.iter().map(|c| plane.point(*c)));
    }
    samples.retain(|q| sys.check_domain(q).is_ok());
    let chains = backward_bc_sweep(sys, &samples, &sweep);
    let mut loci = SynthesisLoci::default();
    for c in &chains {
        let Some(first) = c.arcs.first() else { continue };
        match first.label {
            ArcLabel::Singular => {
                loci.gamma_s.extend(first.points.iter().map(|p| point(p, None)));
                let (t0, t1) = (first.t0, first.t1);
                if t0 == t1 {
                    continue;
                }
                for k in 1..=4 {
                    let te = t0 + (t1 - t0) * k as f64 / 4.0;
                    for eps in [1.0, -1.0] {
                        if let Ok(b) = bang_from_singular(sys, first, te, eps, -sweep.horizon, &sweep.arc) {
                            if b.arc.end == ArcEnd::Switch {
                                loci.w_s.push(point(b.arc.end_point(), Some(eps)));
                            }
                        }
                    }
                }
            }
            label => {
                let Some(rec) = c.switches.iter().find(|r| r.t != 0.0 && r.kind == SwitchKind::Ordinary) else {
                    continue;
                };
                let p = LocusPoint { q: rec.q, t: rec.t, eps: label.sign() };
                if label == ArcLabel::Plus {
                    loci.w_plus.push(p);
                } else {
                    loci.w_minus.push(p);
                }
            }
        }
    }
    loci
}

/// Catalog label and supporting loci at a target point.
pub fn local_synthesis<M: ControlAffine + Serialize>(
    sys: &M,
    anchor: &StratumSample,
    opts: &SynthesisOptions,
) -> SynthesisReport {
    let (label, diagnostics) = classify_anchor(sys, anchor, opts);
    let loci = if opts.loci && label != CatalogLabel::Unclassified {
        sweep_loci(sys, anchor, opts)
    } else {
        SynthesisLoci::default()
    };
    SynthesisReport {
        label,
        policy: label.policy().to_string(),
        anchor: *anchor,
        parameters: serde_json::json!({ "model": sys.name(), "parameters": sys }),
        loci,
        diagnostics,
    }
}

/// Adds the splitting loci `C₁`, `C₁₂` from the series maps.
pub fn attach_splitting_loci<M: PolynomialSystem + Sync>(
    report: &mut SynthesisReport,
    model: &M,
    ord: u16,
    grid: &LocusGrid,
) -> crate::Result<()> {
    let conv = |v: Vec<crate::series::LocusSample>| -> Vec<LocusPoint> {
        v.into_iter()
            .map(|s| LocusPoint { q: s.point, t: s.t, eps: None })
            .collect()
    };
    report.loci.c1 = conv(splitting_locus(model, ord, LocusKind::C1, grid)?);
    report.loci.c12 = conv(splitting_locus(model, ord, LocusKind::C12, grid)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Tutorial;

    fn label_at(m: &Tutorial, q: Vec3) -> CatalogLabel {
        let s = StratumSample::from_state(m, &q, &StrataTolerances::default());
        classify_anchor(m, &s, &SynthesisOptions::default()).0
    }

    #[test]
    fn generic_sign() {
        let m = Tutorial::default();
        // n̂·[G,F] = 3c(y − z²)
        assert_eq!(label_at(&m, [0.0, 0.1, 0.0]), CatalogLabel::GenericMinus);
        assert_eq!(label_at(&m, [0.0, -0.1, 0.0]), CatalogLabel::GenericPlus);
    }

    #[test]
    fn tutorial_anchors() {
        let m = Tutorial::default();
        assert_eq!(label_at(&m, [0.0, 0.0025, -0.05]), CatalogLabel::HyperbolicFold);
        let zs = m.z_sat();
        assert_eq!(label_at(&m, [0.0, zs * zs, -zs]), CatalogLabel::SaturatingCase1);
        let zb = 1.0 / 18.0;
        assert_eq!(label_at(&m, [0.0, zb * zb, zb]), CatalogLabel::EllipticBifurcation);
        assert_eq!(label_at(&m, [0.0, 0.0, 0.0]), CatalogLabel::SemiBridge);
        let e = Tutorial::new(1.0, 5.0).unwrap();
        assert_eq!(label_at(&e, [0.0, 0.0016, 0.04]), CatalogLabel::EllipticFold);
    }
}
