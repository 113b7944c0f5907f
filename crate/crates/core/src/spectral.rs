//! Laplace–Beltrami and stability-operator spectra on graph surfaces.
//!
//! `−Δ` is discretized by Galerkin projection onto the real spherical
//! harmonics of the grid, with the quadrature mass `∫ Y_a Y_b dμ` and
//! stiffness `∫ Y_a (−Δ Y_b) dμ`; the resulting generalized symmetric
//! eigenproblem is solved densely.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stcurv::evaluate;
use crate::surface::{integrate, lp_norm, SurfaceGeometry};

/// Relative gap between `λ₃` and `λ₄` below which the translational triple is ambiguous.
pub const CLUSTER_GAP: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    /// Eigenfields on the grid, orthonormal in `L²(dμ)`.
    #[serde(skip)]
    pub fields: Vec<Vec<f64>>,
    /// `max |∫ f_i f_j dμ − δ_ij|`
    pub orthonormality: f64,
    /// `‖A − Aᵀ‖ / ‖A‖` of the stiffness matrix before symmetrization.
    pub asymmetry: f64,
    /// Relative spread of `f₀` about its mean.
    pub constant_error: f64,
}

impl EigenSystem {
    /// Number of eigenvalues strictly below `c`.
    pub fn count_below(&self, c: f64) -> usize {
        self.values.iter().filter(|v| **v < c).count()
    }
}

fn inner(a: &[f64], b: &[f64], geo: &SurfaceGeometry) -> f64 {
    a.iter()
        .zip(b)
        .zip(&geo.mu_weights)
        .map(|((x, y), w)| x * y * w)
        .sum()
}

/// Lowest `k` eigenpairs of `−Δ`.
pub fn laplace_eigs(geo: &SurfaceGeometry, k: usize) -> Result<EigenSystem> {
    let grid = &geo.grid;
    if k == 0 || k > grid.len() / 4 {
        return Err(Error::Config(vec![format!(
            "requested {k} eigenpairs; 1 ≤ k ≤ {} required",
            grid.len() / 4
        )]));
    }
    let nb = grid.n_coeffs();
    let nn = grid.len();
    let mut basis = DMatrix::<f64>::zeros(nn, nb);
    let mut lap = DMatrix::<f64>::zeros(nn, nb);
    let mut e = vec![0.0; nb];
    for a in 0..nb {
        e[a] = 1.0;
        let d = grid.derivatives_from_coeffs(&e);
        let l = geo.laplacian_from(&d);
        for i in 0..nn {
            basis[(i, a)] = d.f[i];
            lap[(i, a)] = -l[i];
        }
        e[a] = 0.0;
    }
    let mut weighted = basis.clone();
    for i in 0..nn {
        let w = geo.mu_weights[i];
        for a in 0..nb {
            weighted[(i, a)] *= w;
        }
    }
    let mass = weighted.transpose() * &basis;
    let stiff = weighted.transpose() * &lap;
    let asym = (&stiff - stiff.transpose()).norm() / stiff.norm().max(f64::MIN_POSITIVE);
    let stiff = (&stiff + stiff.transpose()) * 0.5;

    let chol = mass.clone().cholesky().ok_or_else(|| {
        let eig = SymmetricEigen::new(mass.clone()).eigenvalues;
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        Error::Numeric(format!(
            "mass matrix not positive definite (eigenvalues in [{lo:e}, {hi:e}])"
        ))
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let c = &linv * stiff * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric(format!("symmetric eigensolver did not converge (n = {nb})"))
    })?;
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));

    let back = linv.transpose();
    let mut values = Vec::with_capacity(k);
    let mut fields = Vec::with_capacity(k);
    for &j in order.iter().take(k) {
        let mut coeffs = &back * eig.eigenvectors.column(j);
        let max = coeffs.amax();
        if let Some(lead) = coeffs.iter().find(|c| c.abs() > 1e-8 * max) {
            if *lead < 0.0 {
                coeffs.neg_mut();
            }
        }
        let f: Vec<f64> = (&basis * &coeffs).iter().copied().collect();
        values.push(eig.eigenvalues[j]);
        fields.push(f);
    }
    let mut ortho = 0.0f64;
    for i in 0..k {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((inner(&fields[i], &fields[j], geo) - target).abs());
        }
    }
    let f0 = &fields[0];
    let mean = integrate(f0, geo) / geo.area;
    let constant_error = f0.iter().fold(0.0f64, |a, v| a.max((v - mean).abs())) / mean.abs();
    Ok(EigenSystem {
        values,
        fields,
        orthonormality: ortho,
        asymmetry: asym,
        constant_error,
    })
}

/// `L^H w = Δw + w(|A|² + Ric(ν,ν))`
pub fn stability_apply(geo: &SurfaceGeometry, w: &[f64]) -> Result<Vec<f64>> {
    let lap = geo.laplacian(w)?;
    Ok(lap
        .iter()
        .zip(w)
        .zip(&geo.nodes)
        .map(|((l, w), n)| l + w * (n.a_sq + n.ric_nn))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitField {
    pub w0: Vec<f64>,
    pub wt: Vec<f64>,
    pub wd: Vec<f64>,
    pub warning: Option<String>,
}

/// `w = w⁰ + wᵗ + wᵈ` with `w⁰` the mean and `wᵗ` the projection onto `f₁, f₂, f₃`.
pub fn translational_split(w: &[f64], eigs: &EigenSystem, geo: &SurfaceGeometry) -> Result<SplitField> {
    if eigs.values.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "translational split needs 4 eigenpairs, got {}",
            eigs.values.len()
        )));
    }
    let mean = integrate(w, geo) / geo.area;
    let w0 = vec![mean; w.len()];
    let mut wt = vec![0.0; w.len()];
    for f in &eigs.fields[1..4] {
        let c = inner(w, f, geo);
        for (t, v) in wt.iter_mut().zip(f) {
            *t += c * v;
        }
    }
    let wd = (0..w.len()).map(|k| w[k] - w0[k] - wt[k]).collect();
    let warning = match eigs.values.get(4) {
        Some(l4) if (l4 - eigs.values[3]).abs() <= CLUSTER_GAP * l4.abs() => Some(format!(
            "λ₃ = {:e} and λ₄ = {l4:e} are degenerate; the translational span is ambiguous",
            eigs.values[3]
        )),
        _ => None,
    };
    Ok(SplitField { w0, wt, wd, warning })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormCheck {
    /// `∫ (L^H w) w dμ` of the mean-free part.
    pub value: f64,
    /// `−5E/σ_Σ³ · ‖w‖₂²`
    pub bound: f64,
    pub norm_sq: f64,
    /// Mean removed from the input.
    pub removed_mean: f64,
    /// `‖wᵗ‖² / ‖w‖²`
    pub translational_fraction: f64,
    pub satisfied: bool,
}

pub fn stability_form(
    geo: &SurfaceGeometry,
    eigs: &EigenSystem,
    energy: f64,
    w: &[f64],
) -> Result<FormCheck> {
    let mean = integrate(w, geo) / geo.area;
    let w: Vec<f64> = w.iter().map(|v| v - mean).collect();
    let lw = stability_apply(geo, &w)?;
    let value = inner(&lw, &w, geo);
    let norm_sq = inner(&w, &w, geo);
    let sigma = (geo.area / (4.0 * std::f64::consts::PI)).sqrt();
    let bound = -5.0 * energy / sigma.powi(3) * norm_sq;
    let split = translational_split(&w, eigs, geo)?;
    let translational_fraction = if norm_sq > 0.0 {
        inner(&split.wt, &split.wt, geo) / norm_sq
    } else {
        0.0
    };
    Ok(FormCheck {
        value,
        bound,
        norm_sq,
        removed_mean: mean,
        translational_fraction,
        satisfied: value <= bound,
    })
}

/// Constants `c_∞`, `c₂` that make the surface spectral-compatible at scale `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Compatibility {
    pub sigma: f64,
    pub c_inf: f64,
    pub c_2: f64,
}

pub fn compatibility(geo: &SurfaceGeometry, sigma: f64, delta: f64) -> Result<Compatibility> {
    let st = evaluate(geo, 2.0)?;
    let sigma_s = (geo.area / (4.0 * std::f64::consts::PI)).sqrt();
    let osc = st.h.iter().fold(0.0f64, |a, h| a.max((h - st.hbar).abs()));
    let c_inf = (sigma_s / sigma)
        .max(sigma / sigma_s)
        .max(osc * sigma.powf(1.5 + delta));
    let c_2 = lp_norm(&st.deviation(), geo, 2.0) * sigma.powf(1.0 + 2.0 * delta);
    Ok(Compatibility { sigma, c_inf, c_2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedEigenCheck {
    /// `|λ_i − ħ²/2 − 6m_H/σ_Σ³ − ∫Ric(ν,ν) f_i² dμ|`, `i = 1, 2, 3`
    pub residuals: [f64; 3],
    /// `|∫Ric(ν,ν) f_i f_j dμ|` for `(1,2), (1,3), (2,3)`
    pub cross: [f64; 3],
    pub compatibility: Compatibility,
}

pub fn refined_eigen_check(geo: &SurfaceGeometry, eigs: &EigenSystem, m_h: f64) -> Result<RefinedEigenCheck> {
    if eigs.values.len() < 4 {
        return Err(Error::InsufficientData("refined check needs 4 eigenpairs".into()));
    }
    let st = evaluate(geo, 2.0)?;
    let sigma = (geo.area / (4.0 * std::f64::consts::PI)).sqrt();
    let ric = geo.field(|n| n.ric_nn);
    let weighted = |i: usize, j: usize| {
        let prod: Vec<f64> = (0..ric.len())
            .map(|k| ric[k] * eigs.fields[i][k] * eigs.fields[j][k])
            .collect();
        integrate(&prod, geo)
    };
    let mut residuals = [0.0; 3];
    for (i, r) in residuals.iter_mut().enumerate() {
        let lam = eigs.values[i + 1];
        *r = (lam - 0.5 * st.hbar * st.hbar - 6.0 * m_h / sigma.powi(3) - weighted(i + 1, i + 1)).abs();
    }
    let cross = [weighted(1, 2).abs(), weighted(1, 3).abs(), weighted(2, 3).abs()];
    Ok(RefinedEigenCheck {
        residuals,
        cross,
        compatibility: compatibility(geo, sigma, geo.ids.delta)?,
    })
}

/// Best-aligned coordinate axis of a translational eigenfield and its distance to the model harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisAlignment {
    pub axis: usize,
    /// `|⟨f_i, x_a − z_a⟩| / (‖f_i‖ ‖x_a − z_a‖)`
    pub cosine: f64,
    /// `Σ_a cos²(f_i, x_a − z_a)`: share of `f_i` in the span of the coordinate functions
    pub span_fraction: f64,
    /// `‖f_i − f_i^δ‖₂` with `f_i^δ = ±√(3/4πσ⁴)(x_a − z_a)`
    pub distance: f64,
}

pub fn axis_alignment(geo: &SurfaceGeometry, eigs: &EigenSystem) -> Result<[AxisAlignment; 3]> {
    if eigs.values.len() < 4 {
        return Err(Error::InsufficientData("axis alignment needs 4 eigenpairs".into()));
    }
    let pos = geo.positions();
    let mut z = [0.0; 3];
    for a in 0..3 {
        z[a] = integrate(&pos.iter().map(|p| p[a]).collect::<Vec<_>>(), geo) / geo.area;
    }
    let coords: Vec<Vec<f64>> = (0..3)
        .map(|a| pos.iter().map(|p| p[a] - z[a]).collect())
        .collect();
    let sigma = (geo.area / (4.0 * std::f64::consts::PI)).sqrt();
    let scale = (3.0 / (4.0 * std::f64::consts::PI * sigma.powi(4))).sqrt();
    let mut out = [AxisAlignment {
        axis: 0,
        cosine: 0.0,
        span_fraction: 0.0,
        distance: 0.0,
    }; 3];
    let norms: Vec<f64> = coords.iter().map(|c| inner(c, c, geo).sqrt()).collect();
    for (i, slot) in out.iter_mut().enumerate() {
        let f = &eigs.fields[i + 1];
        let nf = inner(f, f, geo).sqrt();
        let (axis, dot) = (0..3)
            .map(|a| (a, inner(f, &coords[a], geo)))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .unwrap_or((0, 0.0));
        let nx = norms[axis];
        let span_fraction = (0..3)
            .map(|a| (inner(f, &coords[a], geo) / (nf * norms[a])).powi(2))
            .sum();
        let sign = dot.signum();
        let diff: Vec<f64> = f
            .iter()
            .zip(&coords[axis])
            .map(|(v, x)| v - sign * scale * x)
            .collect();
        *slot = AxisAlignment {
            axis,
            cosine: dot.abs() / (nf * nx),
            span_fraction,
            distance: inner(&diff, &diff, geo).sqrt(),
        };
    }
    Ok(out)
}
