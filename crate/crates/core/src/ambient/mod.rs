//! Asymptotically flat initial data sets `(ḡ, K̄)` in a single asymptotic chart.

mod adm;
mod curvature;
pub mod jet;

pub use adm::{
    adm_energy, adm_energy_rotated, decay_report, loglog_slope, AdmEstimate, DecayReport, SlopeEntry,
};
pub use curvature::{constraint_fields, curvature_tensors, ConstraintFields, CurvatureTensors};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use jet::Jet;

/// Inner radius of the chart; the compact core `|x| < R_MIN` is never evaluated.
pub const R_MIN: f64 = 2.0;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientPoint(pub Vec3);

impl AmbientPoint {
    pub fn new(x: Vec3) -> Result<Self> {
        let r = norm(&x);
        if !(r >= R_MIN) {
            return Err(Error::Domain { radius: r, r_min: R_MIN });
        }
        Ok(AmbientPoint(x))
    }

    pub fn radius(&self) -> f64 {
        norm(&self.0)
    }
}

/// Covariant metric components with first and second partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricJet2 {
    pub g: Mat3,
    /// `dg[c][a][b] = ∂_c g_ab`
    pub dg: [Mat3; 3],
    /// `ddg[c][e][a][b] = ∂_c ∂_e g_ab`
    pub ddg: [[Mat3; 3]; 3],
}

/// Covariant extrinsic tensor components with first partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicJet1 {
    pub k: Mat3,
    /// `dk[c][a][b] = ∂_c K_ab`
    pub dk: [Mat3; 3],
}

impl ExtrinsicJet1 {
    pub fn zero() -> Self {
        ExtrinsicJet1 {
            k: [[0.0; 3]; 3],
            dk: [[[0.0; 3]; 3]; 3],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.k.iter().flatten().all(|v| *v == 0.0)
            && self.dk.iter().flatten().flatten().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmbientKind {
    Euclidean,
    Schwarzschild {
        mass: f64,
    },
    /// Schwarzschild slice carrying `K̄ = a|x|^{-e}(δ - e n⊗n)` plus an optional
    /// Bowen–York linear-momentum term with momentum vector `momentum`.
    SchwarzschildWithK {
        mass: f64,
        a: f64,
        exponent: f64,
        #[serde(default)]
        momentum: Vec3,
    },
    /// Time-symmetric metric `δ + ∂ξ + ∂ξᵀ + ∂ξᵀ∂ξ + A|x|^{-p}(δ - p n⊗n)`
    /// with `p = 1/2 + δ` and a seeded vector field `ξ`.
    Perturbed {
        seed: u64,
        amplitude: f64,
    },
}

impl AmbientKind {
    pub fn name(&self) -> &'static str {
        match self {
            AmbientKind::Euclidean => "euclidean",
            AmbientKind::Schwarzschild { .. } => "schwarzschild",
            AmbientKind::SchwarzschildWithK { .. } => "schwarzschild_with_K",
            AmbientKind::Perturbed { .. } => "perturbed",
        }
    }

    pub const NAMES: [&'static str; 4] =
        ["euclidean", "schwarzschild", "schwarzschild_with_K", "perturbed"];
}

/// Seeded coefficients of the gauge field `ξ_c = A_c r^{1-p} + A_cd x_d r^{-p}`.
#[derive(Debug, Clone, PartialEq)]
struct GaugeProfile {
    vector: Vec3,
    matrix: Mat3,
}

impl GaugeProfile {
    fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vector = [0.0; 3];
        let mut matrix = [[0.0; 3]; 3];
        for v in vector.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for row in matrix.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        GaugeProfile { vector, matrix }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialDataSet {
    pub kind: AmbientKind,
    pub delta: f64,
    pub cbar: f64,
    gauge: Option<GaugeProfile>,
}

impl InitialDataSet {
    pub fn new(kind: AmbientKind, delta: f64, cbar: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(delta > 0.0 && delta <= 0.5) {
            problems.push(format!("delta = {delta}: δ ∈ (0, 1/2] required"));
        }
        if !(cbar > 0.0) {
            problems.push(format!("cbar = {cbar}: c̄ > 0 required"));
        }
        match &kind {
            AmbientKind::Schwarzschild { mass } | AmbientKind::SchwarzschildWithK { mass, .. }
                if !(*mass > 0.0) =>
            {
                problems.push(format!("mass = {mass}: m > 0 required for Schwarzschild kinds"));
            }
            _ => {}
        }
        if let AmbientKind::SchwarzschildWithK { exponent, .. } = &kind {
            if !(*exponent >= 1.5 + delta - 1e-12) {
                problems.push(format!(
                    "exponent = {exponent}: K̄ exponent ≥ 3/2 + δ required"
                ));
            }
        }
        if let AmbientKind::Perturbed { amplitude, .. } = &kind {
            if !(amplitude.abs() < 0.1) {
                problems.push(format!("amplitude = {amplitude}: |amplitude| < 0.1 required"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let gauge = match &kind {
            AmbientKind::Perturbed { seed, .. } => Some(GaugeProfile::from_seed(*seed)),
            _ => None,
        };
        Ok(InitialDataSet {
            kind,
            delta,
            cbar,
            gauge,
        })
    }

    pub fn euclidean() -> Self {
        Self::new(AmbientKind::Euclidean, 0.5, 1.0).expect("valid")
    }

    pub fn schwarzschild(mass: f64) -> Self {
        Self::new(AmbientKind::Schwarzschild { mass }, 0.5, 10.0).expect("valid")
    }

    pub fn schwarzschild_with_k(mass: f64, a: f64, exponent: f64, momentum: Vec3) -> Self {
        Self::new(
            AmbientKind::SchwarzschildWithK {
                mass,
                a,
                exponent,
                momentum,
            },
            0.5,
            10.0,
        )
        .expect("valid")
    }

    pub fn perturbed(seed: u64, amplitude: f64) -> Self {
        Self::new(AmbientKind::Perturbed { seed, amplitude }, 0.5, 10.0).expect("valid")
    }

    pub fn mass_parameter(&self) -> f64 {
        match self.kind {
            AmbientKind::Schwarzschild { mass } | AmbientKind::SchwarzschildWithK { mass, .. } => {
                mass
            }
            _ => 0.0,
        }
    }

    /// The same metric with `K̄` switched off.
    pub fn without_extrinsic(&self) -> Self {
        let mut out = self.clone();
        if let AmbientKind::SchwarzschildWithK { a, momentum, .. } = &mut out.kind {
            *a = 0.0;
            *momentum = [0.0; 3];
        }
        out
    }

    /// True when `K̄` vanishes identically.
    pub fn time_symmetric(&self) -> bool {
        match &self.kind {
            AmbientKind::SchwarzschildWithK { a, momentum, .. } => {
                *a == 0.0 && momentum.iter().all(|p| *p == 0.0)
            }
            _ => true,
        }
    }

    pub fn metric_jet(&self, p: &AmbientPoint) -> Result<MetricJet2> {
        check_point(p)?;
        let x = Jet::coordinates(&p.0);
        let comps = match &self.kind {
            AmbientKind::Euclidean => return Ok(flat_jet()),
            AmbientKind::Schwarzschild { mass } | AmbientKind::SchwarzschildWithK { mass, .. } => {
                return Ok(conformally_flat_jet(&p.0, *mass));
            }
            AmbientKind::Perturbed { amplitude, .. } => {
                let gauge = self.gauge.as_ref().expect("perturbed kind carries a profile");
                self.perturbed_metric(&x, *amplitude, gauge)
            }
        };
        Ok(collect_metric(&comps))
    }

    fn perturbed_metric(&self, x: &[Jet; 3], amp: f64, gauge: &GaugeProfile) -> [[Jet; 3]; 3] {
        let p = 0.5 + self.delta;
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let rp = r2.powf(-0.5 * p);
        let rp1 = r2.powf(-0.5 * (p + 1.0));
        let rp2 = r2.powf(-0.5 * (p + 2.0));
        // d[a][c] = ∂_a ξ_c
        let mut d = [[Jet::constant(0.0); 3]; 3];
        for (a, row) in d.iter_mut().enumerate() {
            for (c, out) in row.iter_mut().enumerate() {
                let mut v = rp1 * x[a] * ((1.0 - p) * gauge.vector[c]) + rp * gauge.matrix[c][a];
                for (dd, xd) in x.iter().enumerate() {
                    v = v - rp2 * x[a] * *xd * (p * gauge.matrix[c][dd]);
                }
                *out = v * amp;
            }
        }
        let mut g = [[Jet::constant(0.0); 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut v = d[a][b] + d[b][a];
                for c in 0..3 {
                    v = v + d[a][c] * d[b][c];
                }
                let iso = if a == b { rp } else { Jet::constant(0.0) };
                v = v + (iso - rp2 * x[a] * x[b] * p) * amp;
                if a == b {
                    v = v + 1.0;
                }
                g[a][b] = v;
            }
        }
        g
    }

    /// Metric components only.
    pub fn metric(&self, p: &AmbientPoint) -> Result<Mat3> {
        check_point(p)?;
        match &self.kind {
            AmbientKind::Euclidean => Ok(flat_jet().g),
            AmbientKind::Schwarzschild { mass } | AmbientKind::SchwarzschildWithK { mass, .. } => {
                let u = 1.0 + 0.5 * mass / p.radius();
                let u4 = u * u * u * u;
                Ok([[u4, 0.0, 0.0], [0.0, u4, 0.0], [0.0, 0.0, u4]])
            }
            AmbientKind::Perturbed { .. } => Ok(self.metric_jet(p)?.g),
        }
    }

    /// Extrinsic tensor components only.
    pub fn extrinsic(&self, p: &AmbientPoint) -> Result<Mat3> {
        check_point(p)?;
        let (a, e, mom) = match &self.kind {
            AmbientKind::SchwarzschildWithK {
                a,
                exponent,
                momentum,
                ..
            } => (*a, *exponent, *momentum),
            _ => return Ok([[0.0; 3]; 3]),
        };
        let x = &p.0;
        let r = norm(x);
        let n = [x[0] / r, x[1] / r, x[2] / r];
        let re = a * r.powf(-e);
        let by = 1.5 / (r * r);
        let pn = dot(&mom, &n);
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let kron = if i == j { 1.0 } else { 0.0 };
                k[i][j] = re * (kron - e * n[i] * n[j])
                    + by * (mom[i] * n[j] + mom[j] * n[i] - (kron - n[i] * n[j]) * pn);
            }
        }
        Ok(k)
    }

    pub fn extrinsic_jet(&self, p: &AmbientPoint) -> Result<ExtrinsicJet1> {
        check_point(p)?;
        let (a, e, mom) = match &self.kind {
            AmbientKind::SchwarzschildWithK {
                a,
                exponent,
                momentum,
                ..
            } => (*a, *exponent, *momentum),
            _ => return Ok(ExtrinsicJet1::zero()),
        };
        let x = Jet::coordinates(&p.0);
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let re = r2.powf(-0.5 * e);
        let re2 = r2.powf(-0.5 * e - 1.0);
        let r3 = r2.powf(-1.5);
        let r5 = r2.powf(-2.5);
        let px = x[0] * mom[0] + x[1] * mom[1] + x[2] * mom[2];
        let mut k = [[Jet::constant(0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let kron = if i == j { 1.0 } else { 0.0 };
                // a r^{-e} (δ_ij - e x_i x_j / r²)
                let mut v = re * (a * kron) - re2 * x[i] * x[j] * (a * e);
                // 3/(2r²) [p_i n_j + p_j n_i - (δ_ij - n_i n_j)(p·n)]
                v = v + (r3 * (x[j] * mom[i] + x[i] * mom[j])) * 1.5
                    - (r3 * px) * (1.5 * kron)
                    + (r5 * x[i] * x[j] * px) * 1.5;
                k[i][j] = v;
            }
        }
        let mut out = ExtrinsicJet1::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.k[i][j] = k[i][j].v;
                for c in 0..3 {
                    out.dk[c][i][j] = k[i][j].d[c];
                }
            }
        }
        Ok(out)
    }
}

fn check_point(p: &AmbientPoint) -> Result<()> {
    let r = p.radius();
    if !(r >= R_MIN) {
        return Err(Error::Domain { radius: r, r_min: R_MIN });
    }
    Ok(())
}

/// Isotropic Schwarzschild conformal factor `u = 1 + m/(2|x|)`.
pub fn conformal_factor(x: &[Jet; 3], mass: f64) -> Jet {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    r2.powf(-0.5) * (0.5 * mass) + 1.0
}

/// `u⁴δ` with its partials written out in closed form.
fn conformally_flat_jet(x: &Vec3, mass: f64) -> MetricJet2 {
    let r = norm(x);
    let (r3, r5) = (r * r * r, r * r * r * r * r);
    let u = 1.0 + 0.5 * mass / r;
    let du: Vec3 = [0, 1, 2].map(|c| -0.5 * mass * x[c] / r3);
    let mut out = flat_jet();
    let (u2, u3) = (u * u, u * u * u);
    for c in 0..3 {
        for e in 0..3 {
            let kron = if c == e { 1.0 } else { 0.0 };
            let ddu = -0.5 * mass * (kron / r3 - 3.0 * x[c] * x[e] / r5);
            let v = 12.0 * u2 * du[c] * du[e] + 4.0 * u3 * ddu;
            for a in 0..3 {
                out.ddg[c][e][a][a] = v;
            }
        }
        for a in 0..3 {
            out.dg[c][a][a] = 4.0 * u3 * du[c];
        }
    }
    for a in 0..3 {
        out.g[a][a] = u2 * u2;
    }
    out
}

fn flat_jet() -> MetricJet2 {
    let mut g = [[0.0; 3]; 3];
    for (a, row) in g.iter_mut().enumerate() {
        row[a] = 1.0;
    }
    MetricJet2 {
        g,
        dg: [[[0.0; 3]; 3]; 3],
        ddg: [[[[0.0; 3]; 3]; 3]; 3],
    }
}

fn collect_metric(c: &[[Jet; 3]; 3]) -> MetricJet2 {
    let mut out = flat_jet();
    for a in 0..3 {
        for b in 0..3 {
            // symmetrize to remove round-off asymmetry of the expressions
            let s = |f: &dyn Fn(&Jet) -> f64| 0.5 * (f(&c[a][b]) + f(&c[b][a]));
            out.g[a][b] = s(&|j| j.v);
            for k in 0..3 {
                out.dg[k][a][b] = s(&|j| j.d[k]);
                for l in 0..3 {
                    out.ddg[k][l][a][b] = s(&|j| 0.5 * (j.dd[k][l] + j.dd[l][k]));
                }
            }
        }
    }
    out
}

pub fn norm(x: &Vec3) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn invert3(m: &Mat3) -> Option<Mat3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut inv = [[0.0; 3]; 3];
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
    Some(inv)
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<InitialDataSet> {
        vec![
            InitialDataSet::euclidean(),
            InitialDataSet::schwarzschild(1.0),
            InitialDataSet::schwarzschild_with_k(1.0, 0.1, 2.0, [0.3, -0.2, 0.5]),
            InitialDataSet::perturbed(7, 0.01),
        ]
    }

    #[test]
    fn euclidean_jet_is_identity() {
        let j = InitialDataSet::euclidean()
            .metric_jet(&AmbientPoint::new([3.0, 4.0, 5.0]).unwrap())
            .unwrap();
        assert_eq!(j, flat_jet());
    }

    #[test]
    fn schwarzschild_isotropic_factor() {
        let j = InitialDataSet::schwarzschild(1.0)
            .metric_jet(&AmbientPoint::new([10.0, 0.0, 0.0]).unwrap())
            .unwrap();
        assert!((j.g[0][0] - 1.05f64.powi(4)).abs() < 1e-14);
        assert!((j.g[0][0] - 1.21550625).abs() < 1e-12);
        assert_eq!(j.g[0][1], 0.0);
        // hand-derived ∂_x u⁴ = 4u³·(-m x / (2 r³))
        let du = -10.0 / (2.0 * 1000.0);
        assert!((j.dg[0][0][0] - 4.0 * 1.05f64.powi(3) * du).abs() < 1e-14);
    }

    #[test]
    fn closed_form_jet_matches_jet_arithmetic() {
        let x = [7.0, -3.0, 4.5];
        let mass = 1.7;
        let closed = conformally_flat_jet(&x, mass);
        let u4 = conformal_factor(&Jet::coordinates(&x), mass).powf(4.0);
        for a in 0..3 {
            assert!((closed.g[a][a] - u4.v).abs() < 1e-14);
            for c in 0..3 {
                assert!((closed.dg[c][a][a] - u4.d[c]).abs() < 1e-14);
                for e in 0..3 {
                    assert!((closed.ddg[c][e][a][a] - u4.dd[c][e]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn interior_points_are_rejected() {
        assert!(matches!(
            AmbientPoint::new([1.0, 0.5, 0.0]),
            Err(Error::Domain { .. })
        ));
        let ids = InitialDataSet::schwarzschild(1.0);
        let p = AmbientPoint([0.5, 0.0, 0.0]);
        assert!(ids.metric_jet(&p).is_err());
        assert!(ids.extrinsic_jet(&p).is_err());
    }

    #[test]
    fn invalid_parameters_are_collected() {
        let err = InitialDataSet::new(AmbientKind::Schwarzschild { mass: -1.0 }, 0.7, 1.0)
            .unwrap_err();
        match err {
            Error::Config(list) => assert_eq!(list.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn first_derivatives_match_central_differences() {
        for ids in all_kinds() {
            for x in [[10.0, 3.0, -4.0], [-25.0, 7.0, 12.0], [3.0, 0.5, 1.0]] {
                let r = norm(&x);
                let h = 1e-4 * r;
                let j = ids.metric_jet(&AmbientPoint(x)).unwrap();
                let kj = ids.extrinsic_jet(&AmbientPoint(x)).unwrap();
                for c in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[c] += h;
                    xm[c] -= h;
                    let gp = ids.metric_jet(&AmbientPoint(xp)).unwrap();
                    let gm = ids.metric_jet(&AmbientPoint(xm)).unwrap();
                    let kp = ids.extrinsic_jet(&AmbientPoint(xp)).unwrap();
                    let km = ids.extrinsic_jet(&AmbientPoint(xm)).unwrap();
                    let scale_g: f64 = j.dg.iter().flatten().flatten().map(|v| v.abs()).fold(0.0, f64::max);
                    let scale_dd: f64 =
                        j.ddg.iter().flatten().flatten().flatten().map(|v| v.abs()).fold(0.0, f64::max);
                    let scale_k: f64 = kj.dk.iter().flatten().flatten().map(|v| v.abs()).fold(0.0, f64::max);
                    for a in 0..3 {
                        for b in 0..3 {
                            let fd = (gp.g[a][b] - gm.g[a][b]) / (2.0 * h);
                            assert!((fd - j.dg[c][a][b]).abs() <= 1e-6 * scale_g.max(1e-300) + 1e-15);
                            for e in 0..3 {
                                let fd2 = (gp.dg[e][a][b] - gm.dg[e][a][b]) / (2.0 * h);
                                assert!(
                                    (fd2 - j.ddg[c][e][a][b]).abs()
                                        <= 1e-6 * scale_dd.max(1e-300) + 1e-15
                                );
                            }
                            let fdk = (kp.k[a][b] - km.k[a][b]) / (2.0 * h);
                            assert!((fdk - kj.dk[c][a][b]).abs() <= 1e-6 * scale_k.max(1e-300) + 1e-15);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn jets_are_symmetric_and_deterministic() {
        for ids in all_kinds() {
            let p = AmbientPoint([4.0, -3.0, 6.0]);
            let j = ids.metric_jet(&p).unwrap();
            assert_eq!(j, ids.metric_jet(&p).unwrap());
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(j.g[a][b], j.g[b][a]);
                    for c in 0..3 {
                        assert_eq!(j.dg[c][a][b], j.dg[c][b][a]);
                        for e in 0..3 {
                            assert_eq!(j.ddg[c][e][a][b], j.ddg[e][c][a][b]);
                        }
                    }
                }
            }
            let k = ids.extrinsic_jet(&p).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    assert!((k.k[a][b] - k.k[b][a]).abs() < 1e-18);
                }
            }
        }
    }

    #[test]
    fn value_paths_agree_with_jets() {
        for ids in all_kinds() {
            let p = AmbientPoint([6.0, -2.0, 9.0]);
            let g = ids.metric(&p).unwrap();
            let k = ids.extrinsic(&p).unwrap();
            let gj = ids.metric_jet(&p).unwrap();
            let kj = ids.extrinsic_jet(&p).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    assert!((g[a][b] - gj.g[a][b]).abs() < 1e-15);
                    assert!((k[a][b] - kj.k[a][b]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn k_family_magnitude_at_ten() {
        // a r^{-2} (δ - 2 n n) at (10,0,0): diag(-1, 1, 1)·a/100
        let ids = InitialDataSet::schwarzschild_with_k(1.0, 0.1, 2.0, [0.0; 3]);
        let k = ids.extrinsic_jet(&AmbientPoint([10.0, 0.0, 0.0])).unwrap();
        assert!((k.k[0][0] + 1e-3).abs() < 1e-15);
        assert!((k.k[1][1] - 1e-3).abs() < 1e-15);
        assert!((k.k[2][2] - 1e-3).abs() < 1e-15);
        assert!(InitialDataSet::schwarzschild(1.0)
            .extrinsic_jet(&AmbientPoint([10.0, 0.0, 0.0]))
            .unwrap()
            .is_zero());
    }
}
