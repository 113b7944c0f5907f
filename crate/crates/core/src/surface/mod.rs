//! Closed surfaces as radial graphs `F = z + ρ ω` over a spectral sphere grid.

mod geometry;
pub mod grid;

use serde::{Deserialize, Serialize};

use crate::ambient::{det3, dot, AmbientPoint, InitialDataSet, Vec3, R_MIN};
use crate::error::{Error, Result};

pub use geometry::{
    from_embedding, geometry, hessian_at, tensor_norm, Embedding, NodeGeometry, SurfaceGeometry,
    Sym2, GRAPH_BREAKDOWN,
};
pub use grid::{gauss_legendre, sh_index, Derivatives, SphericalGrid};

/// Recentering threshold on `ḡ(ν, ω)`.
pub const RECENTER_THRESHOLD: f64 = 0.3;
/// Spectral tail fraction above which a radial field is flagged under-resolved.
pub const TAIL_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSurface {
    pub center: Vec3,
    rho: Vec<f64>,
    grid: SphericalGrid,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    center: Vec3,
    n_theta: usize,
    n_phi: usize,
    rho: Vec<f64>,
}

impl GraphSurface {
    pub fn new(grid: &SphericalGrid, center: Vec3, rho: Vec<f64>) -> Result<Self> {
        let s = GraphSurface {
            center,
            rho,
            grid: grid.clone(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn sphere(grid: &SphericalGrid, center: Vec3, radius: f64) -> Result<Self> {
        Self::new(grid, center, vec![radius; grid.len()])
    }

    /// Axis-aligned ellipsoid `Σ (x_a − z_a)² / c_a² = 1`.
    pub fn ellipsoid(grid: &SphericalGrid, center: Vec3, axes: Vec3) -> Result<Self> {
        let rho = (0..grid.len())
            .map(|k| {
                let w = grid.direction(k);
                let q: f64 = (0..3).map(|a| (w[a] / axes[a]).powi(2)).sum();
                1.0 / q.sqrt()
            })
            .collect();
        Self::new(grid, center, rho)
    }

    /// Multiplies ρ by `1 + amp · √(4π/(2ℓ+1)) · Y_ℓm`, so `amp` is the relative size of a zonal bump.
    pub fn perturbed(&self, l: usize, m: i64, amp: f64) -> Result<Self> {
        let y = self.grid.harmonic(l, m);
        let scale = amp * (4.0 * std::f64::consts::PI / (2 * l + 1) as f64).sqrt();
        let rho = self
            .rho
            .iter()
            .zip(&y)
            .map(|(r, v)| r * (1.0 + scale * v))
            .collect();
        Self::new(&self.grid, self.center, rho)
    }

    pub fn from_coeffs(grid: &SphericalGrid, center: Vec3, coeffs: &[f64]) -> Result<Self> {
        Self::new(grid, center, grid.synthesize(coeffs))
    }

    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn coeffs(&self) -> Vec<f64> {
        self.grid.analyze(&self.rho)
    }

    /// Checks positivity, finiteness and that every point lies in the chart.
    pub fn validate(&self) -> Result<()> {
        self.grid.check_field(&self.rho)?;
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("surface center".into()));
        }
        if let Some(k) = self.rho.iter().position(|r| *r <= 0.0) {
            return Err(Error::Numeric(format!(
                "radial function not positive at node {k} (ρ = {})",
                self.rho[k]
            )));
        }
        for p in self.points() {
            AmbientPoint::new(p)?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Vec3> {
        (0..self.grid.len())
            .map(|k| {
                let w = self.grid.direction(k);
                let r = self.rho[k];
                [
                    self.center[0] + r * w[0],
                    self.center[1] + r * w[1],
                    self.center[2] + r * w[2],
                ]
            })
            .collect()
    }

    pub fn tail_fraction(&self) -> f64 {
        self.grid.tail_fraction(&self.coeffs())
    }

    pub fn under_resolved(&self) -> bool {
        self.tail_fraction() > TAIL_LIMIT
    }

    /// Re-expresses the same point set as a graph about `center`.
    ///
    /// Along each node ray `z + s ω` the root of `|v| − ρ(v/|v|)`, with `v`
    /// relative to the old center, is bracketed in `[0, max ρ + |z − z_old|]`
    /// and refined by the Illinois variant of regula falsi.
    pub fn recentered(&self, center: Vec3) -> Result<Self> {
        if self.grid.is_rotated() {
            return Err(Error::Numeric("recentering on a rotated grid".into()));
        }
        let coeffs = self.coeffs();
        let shift = [
            center[0] - self.center[0],
            center[1] - self.center[1],
            center[2] - self.center[2],
        ];
        let gap = |w: &Vec3, s: f64| {
            let v = [shift[0] + s * w[0], shift[1] + s * w[1], shift[2] + s * w[2]];
            let n = dot(&v, &v).sqrt();
            if n == 0.0 {
                return -self.grid.evaluate_at(&coeffs, 0.0, 0.0).abs();
            }
            let theta = (v[2] / n).clamp(-1.0, 1.0).acos();
            let phi = v[1].atan2(v[0]);
            n - self.grid.evaluate_at(&coeffs, theta, phi)
        };
        let hi0 = self.rho.iter().cloned().fold(0.0, f64::max) + dot(&shift, &shift).sqrt();
        let mut rho = Vec::with_capacity(self.grid.len());
        for k in 0..self.grid.len() {
            let w = self.grid.direction(k);
            let (mut a, mut b) = (0.0, 2.0 * hi0);
            let (mut fa, mut fb) = (gap(&w, a), gap(&w, b));
            if !(fa < 0.0 && fb > 0.0) {
                return Err(Error::Numeric(format!(
                    "recentering failed at node {k}: new center not enclosed"
                )));
            }
            let mut side = 0;
            let mut s = b;
            for _ in 0..200 {
                s = (a * fb - b * fa) / (fb - fa);
                let fs = gap(&w, s);
                if fs.abs() < 1e-15 * hi0 || (b - a) < 1e-15 * hi0 {
                    break;
                }
                if fs < 0.0 {
                    a = s;
                    fa = fs;
                    if side == -1 {
                        fb *= 0.5;
                    }
                    side = -1;
                } else {
                    b = s;
                    fb = fs;
                    if side == 1 {
                        fa *= 0.5;
                    }
                    side = 1;
                }
            }
            if !(s > 0.0) || gap(&w, s).abs() > 1e-10 * hi0 {
                return Err(Error::Numeric(format!("recentering failed at node {k}")));
            }
            rho.push(s);
        }
        let proj = self.grid.project(&rho);
        Self::new(&self.grid, center, proj)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Snapshot {
            center: self.center,
            n_theta: self.grid.n_theta(),
            n_phi: self.grid.n_phi(),
            rho: self.rho.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Snapshot = serde_json::from_str(text)?;
        let grid = SphericalGrid::new(s.n_theta, s.n_phi)?;
        Self::new(&grid, s.center, s.rho)
    }
}

/// `∫ f dμ` with the quadrature of `geo`.
pub fn integrate(field: &[f64], geo: &SurfaceGeometry) -> f64 {
    field.iter().zip(&geo.mu_weights).map(|(f, w)| f * w).sum()
}

pub fn integral_mean(field: &[f64], geo: &SurfaceGeometry) -> f64 {
    integrate(field, geo) / geo.area
}

/// `‖f‖_{L^p}`; `p = ∞` is a grid maximum.
pub fn lp_norm(field: &[f64], geo: &SurfaceGeometry, p: f64) -> f64 {
    if p.is_infinite() {
        return field.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    }
    let s: f64 = field
        .iter()
        .zip(&geo.mu_weights)
        .map(|(f, w)| f.abs().powf(p) * w)
        .sum();
    s.powf(1.0 / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeReport {
    pub area: f64,
    pub sigma: f64,
    /// `min |x|` over the nodes.
    pub r_min: f64,
    /// `max |x|` over the nodes.
    pub r_max: f64,
    pub volume: f64,
    pub barycenter: Vec3,
}

const VOLUME_NODES: usize = 32;

pub fn shape_report(surface: &GraphSurface, geo: &SurfaceGeometry) -> Result<ShapeReport> {
    let mut r_min = f64::INFINITY;
    let mut r_max = 0.0f64;
    let mut bary = [0.0; 3];
    for (n, w) in geo.nodes.iter().zip(&geo.mu_weights) {
        let r = dot(&n.position, &n.position).sqrt();
        r_min = r_min.min(r);
        r_max = r_max.max(r);
        for a in 0..3 {
            bary[a] += n.position[a] * w;
        }
    }
    for b in &mut bary {
        *b /= geo.area;
    }
    Ok(ShapeReport {
        area: geo.area,
        sigma: (geo.area / (4.0 * std::f64::consts::PI)).sqrt(),
        r_min,
        r_max,
        volume: enclosed_volume(surface, &geo.ids)?,
        barycenter: bary,
    })
}

/// Volume density `√det ḡ`, continued inside the excluded ball by its value on `|x| = R_MIN`.
pub fn volume_density(ids: &InitialDataSet, x: Vec3) -> Result<f64> {
    let r = dot(&x, &x).sqrt();
    let p = if r >= R_MIN {
        x
    } else if r > 0.0 {
        // nudge outward so rounding cannot land inside the ball
        let s = R_MIN / r * (1.0 + 4.0 * f64::EPSILON);
        [x[0] * s, x[1] * s, x[2] * s]
    } else {
        [R_MIN, 0.0, 0.0]
    };
    Ok(det3(&ids.metric(&AmbientPoint::new(p)?)?).sqrt())
}

/// `ḡ`-volume of the region enclosed by the graph, integrated along rays from its center.
pub fn enclosed_volume(surface: &GraphSurface, ids: &InitialDataSet) -> Result<f64> {
    let grid = surface.grid();
    let (x, w) = gauss_legendre(VOLUME_NODES);
    let z = surface.center;
    let mut total = 0.0;
    for (k, wk) in grid.weights().iter().enumerate() {
        let om = grid.direction(k);
        let rho = surface.rho()[k];
        // split the ray where it crosses |x| = R_MIN, where the density has a kink
        let b = dot(&z, &om);
        let c = dot(&z, &z) - R_MIN * R_MIN;
        let mut cuts = vec![0.0];
        let disc = b * b - c;
        if disc > 0.0 {
            for s in [-b - disc.sqrt(), -b + disc.sqrt()] {
                if s > 0.0 && s < rho {
                    cuts.push(s);
                }
            }
        }
        cuts.push(rho);
        let mut ray = 0.0;
        for seg in cuts.windows(2) {
            let (a, bnd) = (seg[0], seg[1]);
            let half = 0.5 * (bnd - a);
            let mid = 0.5 * (bnd + a);
            for (xi, wi) in x.iter().zip(&w) {
                let s = mid + half * xi;
                let p = [z[0] + s * om[0], z[1] + s * om[1], z[2] + s * om[2]];
                ray += wi * half * s * s * volume_density(ids, p)?;
            }
        }
        total += wk * ray;
    }
    Ok(total)
}
