//! Entropy-integral bounds `J(𝔽, C, δ)` and covering-number bounds.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::quad;

/// Relative tolerance of [`j_numeric`].
pub const J_NUMERIC_TOL: f64 = 1e-8;

/// How a J value was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntropyProvenance {
    Hoelder { m: usize, beta: f64 },
    Pl { r: usize, s: Vec<usize> },
    Vc { v: u32 },
    Numeric,
    Table,
    SemidevTransform { p: f64 },
    DivergenceTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyBound {
    pub delta: f64,
    pub value: f64,
    pub provenance: EntropyProvenance,
}

fn check_delta(delta: f64, hi: f64, what: &str) -> Result<()> {
    if delta > 0.0 && delta <= hi {
        Ok(())
    } else {
        Err(domain(format!("{what} is defined for delta in (0, {hi}], got {delta}")))
    }
}

/// `2δ√((3m+1)ln2 + (m/β)ln(2/δ))` for Hölder classes, δ ∈ (0, 1/2].
pub fn j_hoelder(m: usize, beta: f64, delta: f64) -> Result<EntropyBound> {
    if m == 0 {
        return Err(domain("parameter dimension must be positive"));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("Hoelder exponent must lie in (0,1], got {beta}")));
    }
    check_delta(delta, 0.5, "the Hoelder entropy bound")?;
    let m = m as f64;
    let value = 2.0 * delta * ((3.0 * m + 1.0) * LN_2 + (m / beta) * (2.0 / delta).ln()).sqrt();
    Ok(EntropyBound { delta, value, provenance: EntropyProvenance::Hoelder { m: m as usize, beta } })
}

/// `2δ√(Σln(s_i+1) + [8Σs_i + 30r + 1]ln2 + 2[Σs_i + 3r][1/2 + ln(r/δ)])` for
/// piecewise-linear classes with `r` cells of `s_i` constraints, δ ∈ (0, 1].
pub fn j_pl(r: usize, s: &[usize], delta: f64) -> Result<EntropyBound> {
    if r == 0 || s.len() != r || s.contains(&0) {
        return Err(domain(format!("need r >= 1 cells with s_i >= 1 constraints each, got r={r}, s={s:?}")));
    }
    check_delta(delta, 1.0, "the piecewise-linear entropy bound")?;
    let rf = r as f64;
    let ssum: f64 = s.iter().map(|&v| v as f64).sum();
    let logs: f64 = s.iter().map(|&v| (v as f64 + 1.0).ln()).sum();
    let inner = logs + (8.0 * ssum + 30.0 * rf + 1.0) * LN_2 + 2.0 * (ssum + 3.0 * rf) * (0.5 + (rf / delta).ln());
    Ok(EntropyBound {
        delta,
        value: 2.0 * delta * inner.sqrt(),
        provenance: EntropyProvenance::Pl { r, s: s.to_vec() },
    })
}

/// `√2·2^{p+2}J(δ/2^{p+2}) + √2δ[√ln2 + 2√ln(2^{p+4}/δ)]`, δ ∈ (0, 1).
pub fn j_semidev_transform<F>(base_j: F, p: f64, delta: f64) -> Result<EntropyBound>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(p.is_finite() && p >= 1.0) {
        return Err(domain(format!("semideviation order must be >= 1, got {p}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("the semideviation transform is defined for delta in (0,1), got {delta}")));
    }
    let scale = 2f64.powf(p + 2.0);
    let base = base_j(delta / scale)?;
    let value = 2f64.sqrt() * scale * base
        + 2f64.sqrt() * delta * (LN_2.sqrt() + 2.0 * (2f64.powf(p + 4.0) / delta).ln().sqrt());
    Ok(EntropyBound { delta, value, provenance: EntropyProvenance::SemidevTransform { p } })
}

/// `√2·J + 4δ√ln(1/δ) + √(2ln2)δ`, δ ∈ (0, 1/e].
pub fn j_divergence_transform(base_j_at_delta: f64, delta: f64) -> Result<EntropyBound> {
    check_delta(delta, (-1.0f64).exp(), "the divergence transform")?;
    let value = 2f64.sqrt() * base_j_at_delta + 4.0 * delta * (1.0 / delta).ln().sqrt() + (2.0 * LN_2).sqrt() * delta;
    Ok(EntropyBound { delta, value, provenance: EntropyProvenance::DivergenceTransform })
}

/// `eV(4√e/ε)^{2(V−1)}`, the explicit L² covering bound for VC-subgraph classes.
pub fn vc_covering_bound(v: u32, eps: f64) -> Result<f64> {
    check_vc(v, eps)?;
    let vf = f64::from(v);
    Ok(E * vf * (4.0 * E.sqrt() / eps).powf(2.0 * (vf - 1.0)))
}

/// `eV(2e/ε)^{V−1}`, the L¹ form; kept as a reference helper.
pub fn haussler_l1_bound(v: u32, eps: f64) -> Result<f64> {
    check_vc(v, eps)?;
    let vf = f64::from(v);
    Ok(E * vf * (2.0 * E / eps).powf(vf - 1.0))
}

fn check_vc(v: u32, eps: f64) -> Result<()> {
    if v < 2 {
        return Err(domain(format!("VC index must be at least 2, got {v}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("covering radius must lie in (0,1), got {eps}")));
    }
    Ok(())
}

/// `ε ↦ ln(2N̄(ε))` for the VC covering bound, written as `v ln(K/ε)`.
pub fn vc_log_covering(v: u32) -> impl Fn(f64) -> f64 {
    let (vv, k) = vc_matched_params(v);
    move |eps| vv * (k / eps).ln()
}

/// `(v, K)` with `ln(2N̄(ε)) = v ln(K/ε)` for the VC covering bound.
pub fn vc_matched_params(v: u32) -> (f64, f64) {
    let vf = f64::from(v);
    let exponent = 2.0 * (vf - 1.0);
    let k = 4.0 * E.sqrt() * (2.0 * E * vf).powf(1.0 / exponent);
    (exponent, k)
}

/// `J(δ) = ∫₀^δ √(covering_log_bound(ε)) dε` by quadrature after `ε = δu²`.
pub fn j_numeric<F: Fn(f64) -> f64>(covering_log_bound: F, delta: f64) -> Result<EntropyBound> {
    check_delta(delta, 1.0, "the numeric entropy integral")?;
    let q = quad::integrate(
        |u| {
            if u == 0.0 {
                return 0.0;
            }
            let g = covering_log_bound(delta * u * u);
            2.0 * delta * u * g.max(0.0).sqrt()
        },
        0.0,
        1.0,
        J_NUMERIC_TOL,
        0.0,
    )?;
    Ok(EntropyBound { delta, value: q.value, provenance: EntropyProvenance::Numeric })
}

/// `2√(v ln K)`, the closed-form majorant of `∫₀¹ √(v ln(K/ε)) dε`.
pub fn entropy_integral_upper(v: f64, k: f64) -> Result<f64> {
    if !(v >= 1.0 && v.is_finite()) {
        return Err(domain(format!("v must be >= 1, got {v}")));
    }
    if !(k >= E && k.is_finite()) {
        return Err(domain(format!("K must be >= e, got {k}")));
    }
    Ok(2.0 * (v * k.ln()).sqrt())
}

/// Quadrature of `∫₀¹ √(v ln(K/ε)) dε`, the left side of the majorant.
pub fn entropy_integral_lhs(v: f64, k: f64, rel_tol: f64) -> Result<f64> {
    entropy_integral_upper(v, k)?;
    let q = quad::integrate(
        |u| if u == 0.0 { 0.0 } else { 2.0 * u * (v * (k / (u * u)).ln()).sqrt() },
        0.0,
        1.0,
        rel_tol,
        0.0,
    )?;
    Ok(q.value)
}

/// `δ·2√(v ln(K/δ))`, the majorant of the VC entropy integral up to δ.
pub fn vc_majorant(v: u32, delta: f64) -> Result<f64> {
    check_delta(delta, 1.0, "the VC majorant")?;
    if v < 2 {
        return Err(domain(format!("VC index must be at least 2, got {v}")));
    }
    let (vv, k) = vc_matched_params(v);
    Ok(delta * entropy_integral_upper(vv, k / delta)?)
}

/// Where the J values feeding the deviation bounds come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntropySource {
    Hoelder {
        m: usize,
        beta: f64,
    },
    Pl {
        s: Vec<usize>,
    },
    Vc {
        v: u32,
    },
    /// User-supplied `(δ, J)` pairs; lookups must hit a tabulated δ exactly.
    Values {
        table: Vec<(f64, f64)>,
    },
}

impl EntropySource {
    pub fn j(&self, delta: f64) -> Result<EntropyBound> {
        match self {
            Self::Hoelder { m, beta } => j_hoelder(*m, *beta, delta),
            Self::Pl { s } => j_pl(s.len(), s, delta),
            Self::Vc { v } => {
                let mut b = j_numeric(vc_log_covering(*v), delta)?;
                b.provenance = EntropyProvenance::Vc { v: *v };
                Ok(b)
            }
            Self::Values { table } => table
                .iter()
                .find(|(d, _)| (d - delta).abs() <= 1e-15 * delta)
                .map(|&(_, value)| EntropyBound { delta, value, provenance: EntropyProvenance::Table })
                .ok_or_else(|| config(format!("no J value tabulated for delta = {delta}"))),
        }
    }

    pub fn j_value(&self, delta: f64) -> Result<f64> {
        self.j(delta).map(|b| b.value)
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Values { table } = self {
            if table.iter().any(|(d, v)| !(*d > 0.0 && *v >= 0.0 && v.is_finite())) {
                return Err(config("J table needs delta > 0 and finite values >= 0"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hoelder_values() {
        assert_abs_diff_eq!(j_hoelder(1, 1.0, 0.5).unwrap().value, (6.0 * LN_2).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(j_hoelder(1, 1.0, 0.25).unwrap().value, 1.10136, epsilon = 1e-5);
        assert!(j_hoelder(1, 1.0, 1e-300).unwrap().value < 1e-295);
        assert!(j_hoelder(1, 1.0, 0.6).is_err());
        assert!(j_hoelder(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn pl_values() {
        assert_abs_diff_eq!(j_pl(1, &[1], 1.0).unwrap().value, 2.0 * (40.0 * LN_2 + 4.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(j_pl(1, &[1], 0.5).unwrap().value, 6.1050, epsilon = 1e-4);
        assert!(j_pl(1, &[0], 0.5).is_err());
        assert!(j_pl(2, &[1], 0.5).is_err());
        assert!(j_pl(1, &[1], 1.5).is_err());
    }

    #[test]
    fn transforms() {
        let t = j_semidev_transform(|_| Ok(0.0), 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(t.value, 3.4728, epsilon = 1e-4);
        let t = j_semidev_transform(|d| j_hoelder(1, 1.0, d).map(|b| b.value), 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(t.value, 7.0048, epsilon = 1e-3);
        assert!(j_semidev_transform(|_| Ok(0.0), 1.0, 0.0).is_err());
        let d = j_divergence_transform(0.0, (-1.0f64).exp()).unwrap();
        assert_abs_diff_eq!(d.value, (4.0 + (2.0 * LN_2).sqrt()) / E, epsilon = 1e-14);
        assert_abs_diff_eq!(d.value, 1.904663, epsilon = 1e-6);
        let d = j_divergence_transform(1.0, 0.25).unwrap();
        assert_abs_diff_eq!(d.value, 2.88597, epsilon = 1e-5);
        assert!(j_divergence_transform(1.0, 0.5).is_err());
    }

    #[test]
    fn vc_values() {
        assert_abs_diff_eq!(vc_covering_bound(2, 0.5).unwrap(), 128.0 * E * E, epsilon = 1e-10);
        assert_abs_diff_eq!(vc_covering_bound(2, 1.0 - 1e-12).unwrap(), 32.0 * E * E, epsilon = 1e-8);
        assert!(vc_covering_bound(1, 0.5).is_err());
        assert!(vc_covering_bound(2, 1.0).is_err());
        assert_abs_diff_eq!(haussler_l1_bound(2, 0.5).unwrap(), 2.0 * E * 4.0 * E, epsilon = 1e-10);
    }

    #[test]
    fn vc_log_matches_direct() {
        for v in 2..=4 {
            let g = vc_log_covering(v);
            for eps in [0.01, 0.3, 0.9] {
                let direct = (2.0 * vc_covering_bound(v, eps).unwrap()).ln();
                assert_abs_diff_eq!(g(eps), direct, epsilon = 1e-10 * direct);
            }
        }
    }

    #[test]
    fn numeric_examples() {
        assert_abs_diff_eq!(j_numeric(|_| LN_2, 1.0).unwrap().value, LN_2.sqrt(), epsilon = 1e-10);
        let j = j_numeric(vc_log_covering(2), 0.5).unwrap().value;
        assert!(j.is_finite() && j <= vc_majorant(2, 0.5).unwrap());
    }

    #[test]
    fn majorant_examples() {
        assert_eq!(entropy_integral_upper(1.0, E).unwrap(), 2.0);
        assert_abs_diff_eq!(entropy_integral_upper(4.0, E).unwrap(), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(entropy_integral_upper(1.0, E * E).unwrap(), 8f64.sqrt(), epsilon = 1e-15);
        assert!(entropy_integral_upper(0.5, E).is_err());
        assert!(entropy_integral_upper(1.0, 2.0).is_err());
    }

    #[test]
    fn table_lookup() {
        let src = EntropySource::Values { table: vec![(0.25, 1.5)] };
        assert_eq!(src.j_value(0.25).unwrap(), 1.5);
        assert!(matches!(src.j_value(0.5), Err(Error::Config(_))));
    }
}
