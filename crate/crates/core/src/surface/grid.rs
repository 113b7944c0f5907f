//! Gauss–Legendre × uniform-longitude grid with a real spherical-harmonic transform.
//!
//! Colatitude nodes are Gauss–Legendre points in `cos θ`, longitudes are
//! `φ_j = 2πj / n_phi`. Fields are stored row-major as `f[i * n_phi + j]`.
//! Coefficients use orthonormal real harmonics indexed by `ℓ² + ℓ + m`,
//! `m ∈ [-ℓ, ℓ]`, with `m < 0` carrying `sin(|m|φ)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

pub const MIN_N_THETA: usize = 8;
pub const MIN_N_PHI: usize = 16;

/// First and second angular derivatives of a field at the grid nodes.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub f: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub tt: Vec<f64>,
    pub tp: Vec<f64>,
    pub pp: Vec<f64>,
}

#[derive(Debug)]
struct Tables {
    // legendre[i][idx(l, m)] for m ≥ 0, normalized so that ∮ Y² = 1 (including √2 for m > 0)
    leg: Vec<Vec<f64>>,
    dleg: Vec<Vec<f64>>,
    ddleg: Vec<Vec<f64>>,
    cos_mp: Vec<Vec<f64>>,
    sin_mp: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SphericalGrid {
    n_theta: usize,
    n_phi: usize,
    lmax: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    gl_weights: Vec<f64>,
    weights: Vec<f64>,
    rotation: Option<[[f64; 3]; 3]>,
    tables: Arc<Tables>,
}

impl PartialEq for SphericalGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_theta == other.n_theta
            && self.n_phi == other.n_phi
            && self.lmax == other.lmax
            && self.rotation == other.rotation
    }
}

/// Index of `(ℓ, m ≥ 0)` in the per-ring Legendre tables.
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

pub fn sh_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Orthonormal associated Legendre values `P̄_ℓ^m(cos θ)` for `m ≤ ℓ ≤ lmax`,
/// scaled so that the real harmonic built from them has unit L² norm on S².
pub fn legendre_row(theta: f64, lmax: usize) -> Vec<f64> {
    let (ct, st) = (theta.cos(), theta.sin());
    let mut p = vec![0.0; tri(lmax, lmax) + 1];
    p[0] = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let prev = p[tri(m - 1, m - 1)];
            p[tri(m, m)] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * st * prev;
        }
        if m < lmax {
            p[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * ct * p[tri(m, m)];
        }
        for l in (m + 2)..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[tri(l, m)] = a * (ct * p[tri(l - 1, m)] - b * p[tri(l - 2, m)]);
        }
    }
    p
}

fn legendre_derivatives(theta: f64, lmax: usize, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (ct, st) = (theta.cos(), theta.sin());
    let mut dp = vec![0.0; p.len()];
    let mut ddp = vec![0.0; p.len()];
    for m in 0..=lmax {
        for l in m..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let lower = if l > m {
                ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt() * p[tri(l - 1, m)]
            } else {
                0.0
            };
            let d = (lf * ct * p[tri(l, m)] - lower) / st;
            dp[tri(l, m)] = d;
            ddp[tri(l, m)] =
                -ct / st * d - (lf * (lf + 1.0) - mf * mf / (st * st)) * p[tri(l, m)];
        }
    }
    (dp, ddp)
}

impl SphericalGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if n_theta < MIN_N_THETA {
            problems.push(format!("n_theta = {n_theta}: n_theta ≥ {MIN_N_THETA} required"));
        }
        if n_phi < MIN_N_PHI {
            problems.push(format!("n_phi = {n_phi}: n_phi ≥ {MIN_N_PHI} required"));
        }
        if !n_phi.is_multiple_of(2) {
            problems.push(format!("n_phi = {n_phi}: n_phi must be even"));
        }
        if n_phi < 2 * n_theta {
            problems.push(format!("n_phi = {n_phi}: n_phi ≥ 2·n_theta required"));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let lmax = n_theta - 1;
        let (x, w) = gauss_legendre(n_theta);
        // north to south
        let theta: Vec<f64> = x.iter().map(|c| c.acos()).collect();
        let phi: Vec<f64> = (0..n_phi)
            .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
            .collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for wi in &w {
            for _ in 0..n_phi {
                weights.push(wi * dphi);
            }
        }
        let mut leg = Vec::with_capacity(n_theta);
        let mut dleg = Vec::with_capacity(n_theta);
        let mut ddleg = Vec::with_capacity(n_theta);
        for &t in &theta {
            let mut p = legendre_row(t, lmax);
            let (mut dp, mut ddp) = legendre_derivatives(t, lmax, &p);
            for m in 1..=lmax {
                for l in m..=lmax {
                    let k = tri(l, m);
                    p[k] *= 2f64.sqrt();
                    dp[k] *= 2f64.sqrt();
                    ddp[k] *= 2f64.sqrt();
                }
            }
            leg.push(p);
            dleg.push(dp);
            ddleg.push(ddp);
        }
        let cos_mp = (0..=lmax)
            .map(|m| phi.iter().map(|p| (m as f64 * p).cos()).collect())
            .collect();
        let sin_mp = (0..=lmax)
            .map(|m| phi.iter().map(|p| (m as f64 * p).sin()).collect())
            .collect();
        Ok(SphericalGrid {
            n_theta,
            n_phi,
            lmax,
            theta,
            phi,
            gl_weights: w,
            weights,
            rotation: None,
            tables: Arc::new(Tables {
                leg,
                dleg,
                ddleg,
                cos_mp,
                sin_mp,
            }),
        })
    }

    /// The same quadrature with every node direction mapped through `rotation`.
    pub fn rotated(&self, rotation: [[f64; 3]; 3]) -> Self {
        let mut g = self.clone();
        g.rotation = Some(rotation);
        g
    }

    pub fn rotation(&self) -> Option<[[f64; 3]; 3]> {
        self.rotation
    }

    pub fn is_rotated(&self) -> bool {
        self.rotation.is_some()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn n_phi(&self) -> usize {
        self.n_phi
    }
    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn lmax(&self) -> usize {
        self.lmax
    }
    pub fn n_coeffs(&self) -> usize {
        (self.lmax + 1) * (self.lmax + 1)
    }
    pub fn theta(&self, i: usize) -> f64 {
        self.theta[i]
    }
    pub fn phi(&self, j: usize) -> f64 {
        self.phi[j]
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn gl_weights(&self) -> &[f64] {
        &self.gl_weights
    }

    /// Highest polynomial degree integrated exactly by the quadrature.
    pub fn exact_degree(&self) -> usize {
        (2 * self.n_theta - 1).min(self.n_phi - 1)
    }

    /// Whether a product of harmonics of total degree `degree` is integrated exactly.
    pub fn resolves(&self, degree: usize) -> bool {
        degree <= self.exact_degree()
    }

    /// Unit direction of node `(i, j)` in the chart, after the optional rotation.
    pub fn direction(&self, node: usize) -> [f64; 3] {
        let (i, j) = (node / self.n_phi, node % self.n_phi);
        let (st, ct) = self.theta[i].sin_cos();
        let (sp, cp) = self.phi[j].sin_cos();
        self.rotate([st * cp, st * sp, ct])
    }

    /// `(ω, ∂_θ ω, ∂_φ ω, ∂²_θθ ω, ∂²_θφ ω, ∂²_φφ ω)` at a node.
    pub fn frame(&self, node: usize) -> [[f64; 3]; 6] {
        let (i, j) = (node / self.n_phi, node % self.n_phi);
        let (st, ct) = self.theta[i].sin_cos();
        let (sp, cp) = self.phi[j].sin_cos();
        let w = [st * cp, st * sp, ct];
        let wt = [ct * cp, ct * sp, -st];
        let wp = [-st * sp, st * cp, 0.0];
        let wtt = [-w[0], -w[1], -w[2]];
        let wtp = [-ct * sp, ct * cp, 0.0];
        let wpp = [-st * cp, -st * sp, 0.0];
        [w, wt, wp, wtt, wtp, wpp].map(|v| self.rotate(v))
    }

    fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        match &self.rotation {
            None => v,
            Some(r) => [
                r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
                r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
                r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
            ],
        }
    }

    /// Quadrature `Σ w_ij f_ij` with fixed summation order.
    pub fn integrate_sphere(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn check_field(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::Numeric(format!(
                "field has {} values, grid has {}",
                f.len(),
                self.len()
            )));
        }
        if let Some(k) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {k}")));
        }
        Ok(())
    }

    /// Projects a grid field onto real harmonics of degree ≤ lmax.
    pub fn analyze(&self, f: &[f64]) -> Vec<f64> {
        let (nt, np, lmax) = (self.n_theta, self.n_phi, self.lmax);
        let dphi = 2.0 * PI / np as f64;
        let t = &self.tables;
        let mut coeffs = vec![0.0; self.n_coeffs()];
        let mut fc = vec![0.0; lmax + 1];
        let mut fs = vec![0.0; lmax + 1];
        for i in 0..nt {
            let row = &f[i * np..(i + 1) * np];
            for m in 0..=lmax {
                let (mut c, mut s) = (0.0, 0.0);
                for j in 0..np {
                    c += row[j] * t.cos_mp[m][j];
                    s += row[j] * t.sin_mp[m][j];
                }
                fc[m] = c * dphi * self.gl_weights[i];
                fs[m] = s * dphi * self.gl_weights[i];
            }
            let leg = &t.leg[i];
            for l in 0..=lmax {
                let base = l * l + l;
                coeffs[base] += leg[tri(l, 0)] * fc[0];
                for m in 1..=l {
                    let p = leg[tri(l, m)];
                    coeffs[base + m] += p * fc[m];
                    coeffs[base - m] += p * fs[m];
                }
            }
        }
        coeffs
    }

    /// Evaluates a harmonic expansion at the grid nodes.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        self.synth_with(coeffs, Part::Value)
    }

    /// Values and first/second angular derivatives of a harmonic expansion.
    pub fn derivatives_from_coeffs(&self, coeffs: &[f64]) -> Derivatives {
        Derivatives {
            f: self.synth_with(coeffs, Part::Value),
            t: self.synth_with(coeffs, Part::Theta),
            p: self.synth_with(coeffs, Part::Phi),
            tt: self.synth_with(coeffs, Part::ThetaTheta),
            tp: self.synth_with(coeffs, Part::ThetaPhi),
            pp: self.synth_with(coeffs, Part::PhiPhi),
        }
    }

    /// Spectral derivatives of a grid field (projected to degree ≤ lmax first).
    pub fn derivatives(&self, f: &[f64]) -> Result<Derivatives> {
        self.check_field(f)?;
        Ok(self.derivatives_from_coeffs(&self.analyze(f)))
    }

    /// `(∂_θ f, ∂_φ f)` of a grid field.
    pub fn spectral_derivative(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_field(f)?;
        let c = self.analyze(f);
        Ok((self.synth_with(&c, Part::Theta), self.synth_with(&c, Part::Phi)))
    }

    /// Band-limits a grid field to degree ≤ lmax.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        self.synthesize(&self.analyze(f))
    }

    fn synth_with(&self, coeffs: &[f64], part: Part) -> Vec<f64> {
        let (nt, np, lmax) = (self.n_theta, self.n_phi, self.lmax);
        let t = &self.tables;
        let mut out = vec![0.0; nt * np];
        let mut ac = vec![0.0; lmax + 1];
        let mut asn = vec![0.0; lmax + 1];
        for i in 0..nt {
            let leg = match part {
                Part::Value | Part::Phi | Part::PhiPhi => &t.leg[i],
                Part::Theta | Part::ThetaPhi => &t.dleg[i],
                Part::ThetaTheta => &t.ddleg[i],
            };
            for m in 0..=lmax {
                let (mut c, mut s) = (0.0, 0.0);
                for l in m..=lmax {
                    let p = leg[tri(l, m)];
                    let base = l * l + l;
                    c += p * coeffs[base + m];
                    if m > 0 {
                        s += p * coeffs[base - m];
                    }
                }
                ac[m] = c;
                asn[m] = s;
            }
            let row = &mut out[i * np..(i + 1) * np];
            for (j, v) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for m in 0..=lmax {
                    let (cm, sm) = (t.cos_mp[m][j], t.sin_mp[m][j]);
                    let mf = m as f64;
                    acc += match part {
                        Part::Value | Part::Theta | Part::ThetaTheta => ac[m] * cm + asn[m] * sm,
                        Part::Phi | Part::ThetaPhi => mf * (-ac[m] * sm + asn[m] * cm),
                        Part::PhiPhi => -mf * mf * (ac[m] * cm + asn[m] * sm),
                    };
                }
                *v = acc;
            }
        }
        out
    }

    /// Evaluates an expansion at an arbitrary direction `(θ, φ)`.
    pub fn evaluate_at(&self, coeffs: &[f64], theta: f64, phi: f64) -> f64 {
        let p = legendre_row(theta, self.lmax);
        let mut acc = 0.0;
        for l in 0..=self.lmax {
            let base = l * l + l;
            acc += p[tri(l, 0)] * coeffs[base];
            for m in 1..=l {
                let pm = p[tri(l, m)] * 2f64.sqrt();
                let (s, c) = (m as f64 * phi).sin_cos();
                acc += pm * (coeffs[base + m] * c + coeffs[base - m] * s);
            }
        }
        acc
    }

    /// Fraction of spectral energy in the top third of degrees.
    pub fn tail_fraction(&self, coeffs: &[f64]) -> f64 {
        let cut = self.lmax + 1 - (self.lmax + 1) / 3;
        let total: f64 = coeffs.iter().map(|c| c * c).sum();
        let tail: f64 = coeffs[cut * cut..].iter().map(|c| c * c).sum();
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Grid values of the real harmonic `Y_ℓm`.
    pub fn harmonic(&self, l: usize, m: i64) -> Vec<f64> {
        let mut c = vec![0.0; self.n_coeffs()];
        c[sh_index(l, m)] = 1.0;
        self.synthesize(&c)
    }
}

#[derive(Clone, Copy)]
enum Part {
    Value,
    Theta,
    Phi,
    ThetaTheta,
    ThetaPhi,
    PhiPhi,
}
