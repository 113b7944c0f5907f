//! Spacetime mean curvature `𝓗 = (H^q − |P|^q)^{1/q}` and the quantities built on it.

use serde::Serialize;

use crate::ambient::AmbientPoint;
use crate::error::{Error, Result};
use crate::surface::{
    integral_mean, integrate, lp_norm, shape_report, tensor_norm, GraphSurface, SurfaceGeometry,
    Sym2,
};

/// `P = g^{ij} K̄(∂_iF, ∂_jF)` at every node.
pub fn trace_k(geo: &SurfaceGeometry) -> Result<Vec<f64>> {
    if geo.ids.time_symmetric() {
        return Ok(vec![0.0; geo.len()]);
    }
    geo.nodes
        .iter()
        .map(|n| {
            let k = geo.ids.extrinsic(&AmbientPoint::new(n.position)?)?;
            let mut kt = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let (a, b) = (&n.tangents[i], &n.tangents[j]);
                    let mut v = 0.0;
                    for x in 0..3 {
                        for y in 0..3 {
                            v += k[x][y] * a[x] * b[y];
                        }
                    }
                    kt[i][j] = v;
                }
            }
            Ok(n.trace(&kt))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StCurvature {
    pub q: f64,
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    pub hq: Vec<f64>,
    pub phi_prime: Vec<f64>,
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    pub hbar: f64,
}

impl StCurvature {
    /// `𝓗 − ħ`
    pub fn deviation(&self) -> Vec<f64> {
        self.hq.iter().map(|v| v - self.hbar).collect()
    }

    /// `u = P/H`, signed.
    pub fn ratio(&self) -> Vec<f64> {
        self.p.iter().zip(&self.h).map(|(p, h)| p / h).collect()
    }
}

pub fn st_curvature(geo: &SurfaceGeometry, p: &[f64], q: f64) -> Result<StCurvature> {
    let h = geo.mean_curvature();
    let mut hq = Vec::with_capacity(h.len());
    let mut worst: Option<(usize, f64)> = None;
    for (k, (hk, pk)) in h.iter().zip(p).enumerate() {
        let s = pk.abs() / hk;
        if !(*hk > 0.0) || !(s < 1.0) {
            let badness = if *hk > 0.0 { s } else { f64::INFINITY };
            if worst.is_none_or(|(_, b)| badness > b) {
                worst = Some((k, badness));
            }
            hq.push(f64::NAN);
            continue;
        }
        hq.push(hk * (1.0 - s.powf(q)).powf(1.0 / q));
    }
    if let Some((node, _)) = worst {
        return Err(Error::Admissibility {
            node,
            h: h[node],
            p: p[node],
        });
    }
    let hbar = integral_mean(&hq, geo);
    let phi_prime = h
        .iter()
        .zip(&hq)
        .map(|(a, b)| (a / b).powf(q - 1.0))
        .collect();
    Ok(StCurvature {
        q,
        p: p.to_vec(),
        theta_plus: h.iter().zip(p).map(|(a, b)| a + b).collect(),
        theta_minus: h.iter().zip(p).map(|(a, b)| a - b).collect(),
        h,
        hq,
        phi_prime,
        hbar,
    })
}

/// Convenience: `trace_k` followed by `st_curvature`.
pub fn evaluate(geo: &SurfaceGeometry, q: f64) -> Result<StCurvature> {
    let p = trace_k(geo)?;
    st_curvature(geo, &p, q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiCalculus {
    pub phi_prime: Vec<f64>,
    pub grad_h: Vec<[f64; 2]>,
    pub grad_hq: Vec<[f64; 2]>,
    /// `max |𝓗^{q−1}∇𝓗 − H^{q−1}∇H + |P|^{q−2}P∇P|`
    pub identity_residual: f64,
    /// `max |𝓗^{q−1}∇𝓗|`, the scale of the residual.
    pub identity_scale: f64,
}

pub fn phi_calculus(geo: &SurfaceGeometry, st: &StCurvature) -> Result<PhiCalculus> {
    let grid = &geo.grid;
    let q = st.q;
    let (ht, hp) = grid.spectral_derivative(&st.h)?;
    let (qt, qp) = grid.spectral_derivative(&st.hq)?;
    let (pt, pp) = grid.spectral_derivative(&st.p)?;
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for (k, n) in geo.nodes.iter().enumerate() {
        let a = st.hq[k].powf(q - 1.0);
        let b = st.h[k].powf(q - 1.0);
        let c = pow_signed(st.p[k], q);
        let lhs = [a * qt[k], a * qp[k]];
        let r = [
            lhs[0] - b * ht[k] + c * pt[k],
            lhs[1] - b * hp[k] + c * pp[k],
        ];
        residual = residual.max(n.pair_vec(r, r).max(0.0).sqrt());
        scale = scale.max(n.pair_vec(lhs, lhs).max(0.0).sqrt());
    }
    Ok(PhiCalculus {
        phi_prime: st.phi_prime.clone(),
        grad_h: ht.iter().zip(&hp).map(|(a, b)| [*a, *b]).collect(),
        grad_hq: qt.iter().zip(&qp).map(|(a, b)| [*a, *b]).collect(),
        identity_residual: residual,
        identity_scale: scale,
    })
}

/// `|x|^{q−2} x`
fn pow_signed(x: f64, q: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(q - 2.0) * x
    }
}

/// `α(s) = (1 − s^q)^{1/q}`
pub fn alpha(s: f64, q: f64) -> f64 {
    (1.0 - s.abs().powf(q)).powf(1.0 / q)
}

/// `β(s) = α(s) − 1`
pub fn beta(s: f64, q: f64) -> f64 {
    alpha(s, q) - 1.0
}

/// First and second derivatives of `u ↦ α(|u|)`, smooth in the signed ratio `u = P/H`.
pub fn alpha_derivatives(u: f64, q: f64) -> (f64, f64) {
    let au = u.abs();
    let w = 1.0 - au.powf(q);
    let d1 = -w.powf(1.0 / q - 1.0) * pow_signed(u, q);
    let d2 = -(q - 1.0) * au.powf(q - 2.0) * w.powf(1.0 / q - 2.0);
    (d1, d2)
}

/// Largest sampled `|α(s) − 1| / s^q` over `s ∈ (0, s_max]`.
pub fn alpha_bound_constant(q: f64, s_max: f64, samples: usize) -> f64 {
    (1..=samples)
        .map(|i| {
            let s = s_max * i as f64 / samples as f64;
            beta(s, q).abs() / s.powf(q)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReminderTensor {
    pub t: Vec<Sym2>,
}

/// `T` with `Hess 𝓗 = Hess H + T`, where `𝓗 = H α(P/H)`:
/// `T = β Hess H + H α′ Hess u + α′(∇H⊗∇u + ∇u⊗∇H) + H α″ ∇u⊗∇u`.
pub fn reminder_tensor(geo: &SurfaceGeometry, st: &StCurvature) -> Result<ReminderTensor> {
    let u = st.ratio();
    if let Some(node) = u.iter().position(|v| !(v.abs() < 1.0)) {
        return Err(Error::Admissibility {
            node,
            h: st.h[node],
            p: st.p[node],
        });
    }
    if st.p.iter().all(|p| *p == 0.0) {
        return Ok(ReminderTensor {
            t: vec![[[0.0; 2]; 2]; geo.len()],
        });
    }
    let q = st.q;
    let hess_h = geo.hessian(&st.h)?;
    let du = geo.grid.derivatives(&u)?;
    let hess_u = geo.hessian_from(&du);
    let (ht, hp) = geo.grid.spectral_derivative(&st.h)?;
    let t = (0..geo.len())
        .map(|k| {
            let (a1, a2) = alpha_derivatives(u[k], q);
            let b = beta(u[k], q);
            let h = st.h[k];
            let gh = [ht[k], hp[k]];
            let gu = [du.t[k], du.p[k]];
            let mut out = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = b * hess_h[k][i][j]
                        + h * a1 * hess_u[k][i][j]
                        + a1 * (gh[i] * gu[j] + gu[i] * gh[j])
                        + h * a2 * gu[i] * gu[j];
                }
            }
            out
        })
        .collect();
    Ok(ReminderTensor { t })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReminderCheck {
    /// `max ‖Hess 𝓗 − Hess H − T‖`
    pub residual: f64,
    /// `max ‖Hess 𝓗‖`
    pub scale: f64,
}

pub fn reminder_check(geo: &SurfaceGeometry, st: &StCurvature) -> Result<ReminderCheck> {
    let t = reminder_tensor(geo, st)?;
    let hq = geo.hessian(&st.hq)?;
    let hh = geo.hessian(&st.h)?;
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for (k, n) in geo.nodes.iter().enumerate() {
        let mut d = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] = hq[k][i][j] - hh[k][i][j] - t.t[k][i][j];
            }
        }
        residual = residual.max(tensor_norm(n, &d));
        scale = scale.max(tensor_norm(n, &hq[k]));
    }
    Ok(ReminderCheck { residual, scale })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundnessParams {
    pub sigma: f64,
    pub eta: f64,
    pub b1: f64,
    pub b2: f64,
}

impl RoundnessParams {
    pub fn new(sigma: f64) -> Self {
        RoundnessParams {
            sigma,
            eta: 1.0,
            b1: 10.0,
            b2: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundnessThresholds {
    pub a_l4: f64,
    pub area_low: f64,
    pub area_high: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
    pub a_func: f64,
    pub max_a: f64,
    pub min_kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundnessFlags {
    pub traceless: bool,
    pub area: bool,
    pub radii: bool,
    pub oscillation: bool,
    pub max_a: bool,
    pub kappa: bool,
}

impl RoundnessFlags {
    pub fn all(&self) -> bool {
        self.traceless && self.area && self.radii && self.oscillation && self.max_a && self.kappa
    }

    pub fn as_array(&self) -> [bool; 6] {
        [
            self.traceless,
            self.area,
            self.radii,
            self.oscillation,
            self.max_a,
            self.kappa,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundnessReport {
    pub params: RoundnessParams,
    pub a_l4: f64,
    pub area: f64,
    pub ratio_r: f64,
    pub ratio_big_r: f64,
    pub a_func: f64,
    pub max_a: f64,
    pub min_kappa: f64,
    pub osc_h: f64,
    pub h1: f64,
    pub thresholds: RoundnessThresholds,
    pub in_class: RoundnessFlags,
}

pub fn roundness_report(
    surface: &GraphSurface,
    geo: &SurfaceGeometry,
    st: &StCurvature,
    params: RoundnessParams,
) -> Result<RoundnessReport> {
    let shape = shape_report(surface, geo)?;
    let ao = geo.field(|n| n.ao_sq.max(0.0).sqrt());
    let a_l4 = lp_norm(&ao, geo, 4.0);
    let dev = st.deviation();
    let grad_sq = geo.gradient_sq(&st.hq)?;
    let grad_l4_4 = integrate(&grad_sq.iter().map(|v| v * v).collect::<Vec<_>>(), geo);
    let dev_l4_4 = lp_norm(&dev, geo, 4.0).powi(4);
    let s = params.sigma;
    let delta = geo.ids.delta;
    let a_func = params.eta * s.powi(-4) * dev_l4_4 + grad_l4_4;
    let max_a = geo.nodes.iter().fold(0.0f64, |m, n| m.max(n.a_sq.sqrt()));
    let min_kappa = geo
        .nodes
        .iter()
        .fold(f64::INFINITY, |m, n| m.min(n.kappa[0]));
    let (hmin, hmax) = st
        .h
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let h1 = (lp_norm(&dev, geo, 2.0).powi(2) + integrate(&grad_sq, geo)).sqrt();
    let pi = std::f64::consts::PI;
    let thresholds = RoundnessThresholds {
        a_l4: params.b1 * s.powf(-1.0 - delta),
        area_low: 3.5 * pi * s * s,
        area_high: 5.0 * pi * s * s,
        ratio_low: 2.0 / 3.0,
        ratio_high: 1.5,
        a_func: params.b2 * s.powf(-8.0 - 4.0 * delta),
        max_a: (5.0 / (2.0 * s * s)).sqrt(),
        min_kappa: 1.0 / (2.0 * s),
    };
    let ratio_r = shape.r_min / shape.sigma;
    let ratio_big_r = shape.r_max / shape.sigma;
    let in_class = RoundnessFlags {
        traceless: a_l4 < thresholds.a_l4,
        area: thresholds.area_low < shape.area && shape.area < thresholds.area_high,
        radii: thresholds.ratio_low < ratio_r
            && ratio_r <= ratio_big_r
            && ratio_big_r < thresholds.ratio_high,
        oscillation: a_func < thresholds.a_func,
        max_a: max_a < thresholds.max_a,
        kappa: min_kappa >= thresholds.min_kappa,
    };
    Ok(RoundnessReport {
        params,
        a_l4,
        area: shape.area,
        ratio_r,
        ratio_big_r,
        a_func,
        max_a,
        min_kappa,
        osc_h: hmax - hmin,
        h1,
        thresholds,
        in_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerezDiagnostic {
    /// `‖H − h‖_{L⁴}`
    pub lhs: f64,
    /// `‖Å‖_{L⁴}`
    pub ao_l4: f64,
    /// `lhs / ‖Å‖_{L⁴}`, absent when the surface is umbilic to round-off.
    pub ratio: Option<f64>,
}

pub fn perez_diagnostic(geo: &SurfaceGeometry) -> PerezDiagnostic {
    let h = geo.mean_curvature();
    let mean = integral_mean(&h, geo);
    let dev: Vec<f64> = h.iter().map(|v| v - mean).collect();
    let lhs = lp_norm(&dev, geo, 4.0);
    let ao_l4 = lp_norm(&geo.field(|n| n.ao_sq.max(0.0).sqrt()), geo, 4.0);
    let floor = 1e-10 * mean.abs() * geo.area.powf(0.25);
    PerezDiagnostic {
        lhs,
        ao_l4,
        ratio: (ao_l4 > floor).then(|| lhs / ao_l4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::InitialDataSet;
    use crate::surface::{geometry, SphericalGrid};

    fn grid(n: usize) -> SphericalGrid {
        SphericalGrid::new(n, 2 * n).unwrap()
    }

    // P stays positive on the test surfaces, so |P|^q is smooth for odd q too
    fn k_data() -> InitialDataSet {
        InitialDataSet::schwarzschild_with_k(1.0, 0.1, 2.0, [0.03, -0.01, 0.02])
    }

    #[test]
    fn pointwise_arithmetic() {
        let g = grid(8);
        // unit sphere centred away from the core: H = 2 everywhere
        let s = GraphSurface::sphere(&g, [0.0, 0.0, 5.0], 1.0).unwrap();
        let geo = geometry(&s, &InitialDataSet::euclidean()).unwrap();
        let p = vec![1.0; g.len()];
        let st = st_curvature(&geo, &p, 2.0).unwrap();
        assert!((st.hq[0] - 3f64.sqrt()).abs() < 1e-12);
        assert!((st.theta_plus[0] - 3.0).abs() < 1e-12);
        assert!((st.theta_minus[0] - 1.0).abs() < 1e-12);
        assert!((st.phi_prime[0] - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        let st4 = st_curvature(&geo, &p, 4.0).unwrap();
        assert!((st4.hq[0] - 15f64.powf(0.25)).abs() < 1e-12);
        for k in 0..g.len() {
            assert!((st.theta_plus[k] * st.theta_minus[k] - st.hq[k].powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn time_symmetric_data_reduce_to_mean_curvature() {
        let g = grid(12);
        let s = GraphSurface::ellipsoid(&g, [0.0; 3], [9.0, 10.0, 11.0]).unwrap();
        let geo = geometry(&s, &InitialDataSet::schwarzschild(1.0)).unwrap();
        let st = evaluate(&geo, 2.0).unwrap();
        assert_eq!(st.hq, st.h);
        assert!(st.phi_prime.iter().all(|v| *v == 1.0));
        let pc = phi_calculus(&geo, &st).unwrap();
        assert!(pc.identity_residual < 1e-10);
        let t = reminder_tensor(&geo, &st).unwrap();
        assert!(t.t.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn trace_matches_radial_contraction() {
        // centered sphere, no momentum: K̄ = a r^{-e}(δ − e nn) has tangential trace 2a r^{-e} u^{-4}
        let (a, e, r, m) = (0.1, 2.0, 10.0, 1.0);
        let ids = InitialDataSet::schwarzschild_with_k(m, a, e, [0.0; 3]);
        let g = grid(12);
        let s = GraphSurface::sphere(&g, [0.0; 3], r).unwrap();
        let geo = geometry(&s, &ids).unwrap();
        let p = trace_k(&geo).unwrap();
        let u4 = (1.0 + m / (2.0 * r)).powi(4);
        let expected = 2.0 * a * r.powf(-e) / u4;
        assert!(p.iter().all(|v| (v - expected).abs() < 1e-8 * expected));
    }

    #[test]
    fn mean_zero_and_inequalities() {
        let g = grid(16);
        let s = GraphSurface::sphere(&g, [0.5, 0.0, 0.0], 10.0)
            .unwrap()
            .perturbed(2, 2, 0.05)
            .unwrap();
        let geo = geometry(&s, &k_data()).unwrap();
        for q in [2.0, 3.0, 4.0] {
            let st = evaluate(&geo, q).unwrap();
            let dev = st.deviation();
            let abs: Vec<f64> = st.hq.iter().map(|v| v.abs()).collect();
            assert!(integrate(&dev, &geo).abs() < 1e-13 * integrate(&abs, &geo));
            for k in 0..g.len() {
                assert!(st.hq[k] <= st.h[k]);
                let lhs = st.hq[k].powf(q);
                let rhs = st.h[k].powf(q) - st.p[k].abs().powf(q);
                assert!((lhs - rhs).abs() < 1e-12 * rhs);
            }
        }
    }

    #[test]
    fn inadmissible_surface_is_rejected() {
        let g = grid(8);
        let s = GraphSurface::sphere(&g, [0.0; 3], 10.0).unwrap();
        let geo = geometry(&s, &InitialDataSet::euclidean()).unwrap();
        let mut p = vec![0.0; g.len()];
        p[17] = 0.5;
        match st_curvature(&geo, &p, 2.0) {
            Err(Error::Admissibility { node, .. }) => assert_eq!(node, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradient_identity_holds_to_discretization() {
        let g = grid(24);
        let s = GraphSurface::sphere(&g, [0.5, 0.2, 0.0], 10.0)
            .unwrap()
            .perturbed(2, 1, 0.03)
            .unwrap();
        let geo = geometry(&s, &k_data()).unwrap();
        for q in [2.0, 3.0, 4.0] {
            let pc = phi_calculus(&geo, &evaluate(&geo, q).unwrap()).unwrap();
            assert!(
                pc.identity_residual < 1e-7 * pc.identity_scale,
                "q={q}: {} vs {}",
                pc.identity_residual,
                pc.identity_scale
            );
        }
    }

    #[test]
    fn reminder_tensor_identity() {
        let g = grid(24);
        let s = GraphSurface::sphere(&g, [0.5, 0.2, 0.0], 10.0)
            .unwrap()
            .perturbed(2, 2, 0.02)
            .unwrap();
        let geo = geometry(&s, &k_data()).unwrap();
        for q in [2.0, 3.0, 4.0] {
            let c = reminder_check(&geo, &evaluate(&geo, q).unwrap()).unwrap();
            assert!(c.residual < 1e-6 * c.scale, "q={q}: {c:?}");
        }
    }

    #[test]
    fn alpha_derivatives_match_finite_differences() {
        for q in [2.0, 3.0, 4.0] {
            for u in [-0.4, -0.1, 0.05, 0.3] {
                let h = 1e-5;
                let (d1, d2) = alpha_derivatives(u, q);
                let f = |x: f64| alpha(x, q);
                let fd1 = (f(u + h) - f(u - h)) / (2.0 * h);
                let fd2 = (f(u + h) - 2.0 * f(u) + f(u - h)) / (h * h);
                assert!((d1 - fd1).abs() < 1e-8);
                assert!((d2 - fd2).abs() < 1e-4);
            }
            // |α − 1| ≤ c_q s^q with c_q finite
            let c = alpha_bound_constant(q, 0.5, 1000);
            assert!(c.is_finite() && c > 0.0 && c < 1.0);
        }
    }

    #[test]
    fn round_spheres_are_in_class() {
        let g = grid(16);
        let sigma = 20.0;
        for ids in [InitialDataSet::euclidean(), InitialDataSet::schwarzschild(1.0)] {
            let s = GraphSurface::sphere(&g, [0.0; 3], sigma).unwrap();
            let geo = geometry(&s, &ids).unwrap();
            let st = evaluate(&geo, 2.0).unwrap();
            let rep = roundness_report(&s, &geo, &st, RoundnessParams::new(sigma)).unwrap();
            assert!(rep.in_class.all(), "{rep:?}");
            assert_eq!(rep.in_class.traceless, rep.a_l4 < rep.thresholds.a_l4);
        }
    }

    #[test]
    fn elongated_ellipsoid_fails_area_bound() {
        let g = grid(24);
        let sigma = 40.0;
        let s = GraphSurface::ellipsoid(&g, [0.0; 3], [sigma, sigma, 1.5 * sigma]).unwrap();
        let geo = geometry(&s, &InitialDataSet::euclidean()).unwrap();
        let st = evaluate(&geo, 2.0).unwrap();
        let rep = roundness_report(&s, &geo, &st, RoundnessParams::new(sigma)).unwrap();
        // prolate spheroid area: 2πa²(1 + c/(a e) asin e), e² = 1 − a²/c²
        let (a, c) = (sigma, 1.5 * sigma);
        let ecc = (1.0f64 - a * a / (c * c)).sqrt();
        let area = 2.0 * std::f64::consts::PI * a * a * (1.0 + c / (a * ecc) * ecc.asin());
        assert!((rep.area - area).abs() < 1e-8 * area);
        assert!(area > rep.thresholds.area_high);
        assert!(!rep.in_class.area);
    }

    #[test]
    fn perez_ratio_behaviour() {
        let g = grid(24);
        let sph = GraphSurface::sphere(&g, [0.0; 3], 10.0).unwrap();
        let d = perez_diagnostic(&geometry(&sph, &InitialDataSet::euclidean()).unwrap());
        assert!(d.lhs < 1e-10 && d.ratio.is_none(), "{d:?}");
        let mut ratios = Vec::new();
        for ecc in [0.2, 0.05, 0.0125] {
            let s = GraphSurface::ellipsoid(&g, [0.0; 3], [10.0, 10.0, 10.0 * (1.0 + ecc)]).unwrap();
            let d = perez_diagnostic(&geometry(&s, &InitialDataSet::euclidean()).unwrap());
            ratios.push(d.ratio.unwrap());
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r < 10.0), "{ratios:?}");
        let s = sph.perturbed(3, 1, 1e-3).unwrap();
        let d = perez_diagnostic(&geometry(&s, &InitialDataSet::schwarzschild(1.0)).unwrap());
        assert!(d.ratio.unwrap().is_finite());
    }

    #[test]
    fn trace_decays_with_sphere_size() {
        let ids = k_data();
        let g = grid(12);
        let sig = [20.0, 40.0, 80.0];
        let maxp: Vec<f64> = sig
            .iter()
            .map(|r| {
                let s = GraphSurface::sphere(&g, [0.0; 3], *r).unwrap();
                let p = trace_k(&geometry(&s, &ids).unwrap()).unwrap();
                p.iter().fold(0.0f64, |a, v| a.max(v.abs()))
            })
            .collect();
        let slope = crate::ambient::loglog_slope(&sig, &maxp).unwrap();
        assert!(slope <= -1.5 - ids.delta + 0.2, "{slope}");
    }

    #[test]
    fn spacetime_correction_scaling() {
        // sup|𝓗 − H| ≲ σ^{−1−q/2−qδ}
        let ids = k_data();
        let g = grid(12);
        let sig = [20.0, 40.0, 80.0];
        for q in [2.0, 4.0] {
            let v: Vec<f64> = sig
                .iter()
                .map(|r| {
                    let s = GraphSurface::sphere(&g, [0.0; 3], *r).unwrap();
                    let st = evaluate(&geometry(&s, &ids).unwrap(), q).unwrap();
                    st.h.iter().zip(&st.hq).fold(0.0f64, |a, (h, k)| a.max((h - k).abs()))
                })
                .collect();
            let slope = crate::ambient::loglog_slope(&sig, &v).unwrap();
            assert!(slope <= -1.0 - q / 2.0 - q * ids.delta + 0.3, "q={q}: {slope}");
        }
    }
}
