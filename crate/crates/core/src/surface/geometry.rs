//! Intrinsic and extrinsic geometry of an embedded sphere, node by node.

use crate::ambient::{
    curvature_tensors, dot, AmbientPoint, InitialDataSet, Mat3, Vec3,
};
use crate::error::{Error, Result};

use super::grid::{Derivatives, SphericalGrid};
use super::GraphSurface;

/// Below this value of `ḡ(ν, ω)` the surface is no longer a radial graph.
pub const GRAPH_BREAKDOWN: f64 = 0.1;

pub type Sym2 = [[f64; 2]; 2];

/// Cartesian position and its first and second angular derivatives at each node.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub center: Vec3,
    /// `[F, ∂_θF, ∂_φF, ∂²_θθF, ∂²_θφF, ∂²_φφF]`
    pub jets: Vec<[Vec3; 6]>,
    /// Reference radial direction used for the graph test.
    pub radial: Vec<Vec3>,
    pub is_graph: bool,
}

impl Embedding {
    pub fn from_graph(surface: &GraphSurface) -> Self {
        let grid = surface.grid();
        let d = grid.derivatives_from_coeffs(&surface.coeffs());
        let z = surface.center;
        let mut jets = Vec::with_capacity(grid.len());
        let mut radial = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let [w, wt, wp, wtt, wtp, wpp] = grid.frame(k);
            let (r, rt, rp, rtt, rtp, rpp) = (surface.rho()[k], d.t[k], d.p[k], d.tt[k], d.tp[k], d.pp[k]);
            let comb = |terms: &[(f64, &Vec3)]| -> Vec3 {
                let mut out = [0.0; 3];
                for (c, v) in terms {
                    for a in 0..3 {
                        out[a] += c * v[a];
                    }
                }
                out
            };
            let pos = [z[0] + r * w[0], z[1] + r * w[1], z[2] + r * w[2]];
            jets.push([
                pos,
                comb(&[(rt, &w), (r, &wt)]),
                comb(&[(rp, &w), (r, &wp)]),
                comb(&[(rtt, &w), (2.0 * rt, &wt), (r, &wtt)]),
                comb(&[(rtp, &w), (rt, &wp), (rp, &wt), (r, &wtp)]),
                comb(&[(rpp, &w), (2.0 * rp, &wp), (r, &wpp)]),
            ]);
            radial.push(w);
        }
        Embedding {
            center: z,
            jets,
            radial,
            is_graph: true,
        }
    }

    /// General parametrized sphere from Cartesian component fields; derivatives are spectral.
    pub fn from_components(grid: &SphericalGrid, center: Vec3, comps: [&[f64]; 3]) -> Result<Self> {
        let d: Vec<Derivatives> = comps
            .iter()
            .map(|c| grid.derivatives(c))
            .collect::<Result<_>>()?;
        let mut jets = Vec::with_capacity(grid.len());
        let mut radial = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let pick = |f: fn(&Derivatives) -> &Vec<f64>| [f(&d[0])[k], f(&d[1])[k], f(&d[2])[k]];
            // positions are taken as given; only derivatives come from the transform
            let pos = [comps[0][k], comps[1][k], comps[2][k]];
            jets.push([
                pos,
                pick(|x| &x.t),
                pick(|x| &x.p),
                pick(|x| &x.tt),
                pick(|x| &x.tp),
                pick(|x| &x.pp),
            ]);
            let rel = [pos[0] - center[0], pos[1] - center[1], pos[2] - center[2]];
            let n = dot(&rel, &rel).sqrt();
            radial.push([rel[0] / n, rel[1] / n, rel[2] / n]);
        }
        Ok(Embedding {
            center,
            jets,
            radial,
            is_graph: false,
        })
    }
}

/// Geometric data at one node. Indices `0 = θ`, `1 = φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry {
    pub position: Vec3,
    pub tangents: [Vec3; 2],
    pub g: Sym2,
    pub g_inv: Sym2,
    pub sqrt_det: f64,
    /// Area density relative to the round measure `dΩ = sin θ dθ dφ`.
    pub density: f64,
    /// Contravariant unit normal `ν^a`.
    pub normal: Vec3,
    /// Covariant unit normal `ν_a`.
    pub normal_lower: Vec3,
    pub h: Sym2,
    pub mean_curvature: f64,
    pub a_sq: f64,
    pub ao_sq: f64,
    pub kappa: [f64; 2],
    /// `Γ^k_ij` of the induced metric, `christoffel[k][i][j]`.
    pub christoffel: [Sym2; 2],
    pub ambient_metric: Mat3,
    pub ric_nn: f64,
    pub ambient_scalar: f64,
    /// `ḡ(ν, ω)` against the radial direction.
    pub nu_dot_radial: f64,
}

impl NodeGeometry {
    /// `G(ν,ν) = Ric(ν,ν) − S/2` since ν is unit.
    pub fn einstein_nn(&self) -> f64 {
        self.ric_nn - 0.5 * self.ambient_scalar
    }

    /// Scalar curvature of the induced metric via the Gauss equation.
    pub fn intrinsic_scalar(&self) -> f64 {
        self.ambient_scalar - 2.0 * self.ric_nn + self.mean_curvature.powi(2) - self.a_sq
    }

    /// `g^{ik} g^{jl} a_ij b_kl`
    pub fn pair(&self, a: &Sym2, b: &Sym2) -> f64 {
        let gi = &self.g_inv;
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        s += gi[i][k] * gi[j][l] * a[i][j] * b[k][l];
                    }
                }
            }
        }
        s
    }

    /// `g^{ij} a_i b_j`
    pub fn pair_vec(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let gi = &self.g_inv;
        gi[0][0] * a[0] * b[0] + gi[0][1] * (a[0] * b[1] + a[1] * b[0]) + gi[1][1] * a[1] * b[1]
    }

    pub fn trace(&self, a: &Sym2) -> f64 {
        let gi = &self.g_inv;
        gi[0][0] * a[0][0] + 2.0 * gi[0][1] * a[0][1] + gi[1][1] * a[1][1]
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub grid: SphericalGrid,
    pub center: Vec3,
    pub nodes: Vec<NodeGeometry>,
    /// Quadrature weights for `dμ`: `w_ij · density_ij`.
    pub mu_weights: Vec<f64>,
    pub area: f64,
    pub ids: InitialDataSet,
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn bilinear(m: &Mat3, a: &Vec3, b: &Vec3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += m[i][j] * a[i] * b[j];
        }
    }
    s
}

/// Geometry of a radial graph surface in the given initial data set.
pub fn geometry(surface: &GraphSurface, ids: &InitialDataSet) -> Result<SurfaceGeometry> {
    surface.validate()?;
    from_embedding(surface.grid(), &Embedding::from_graph(surface), ids)
}

pub fn from_embedding(
    grid: &SphericalGrid,
    emb: &Embedding,
    ids: &InitialDataSet,
) -> Result<SurfaceGeometry> {
    let mut nodes = Vec::with_capacity(grid.len());
    for (k, jet) in emb.jets.iter().enumerate() {
        let node = node_geometry(grid, k, jet, &emb.radial[k], ids)?;
        if emb.is_graph && node.nu_dot_radial < GRAPH_BREAKDOWN {
            return Err(Error::GraphBreakdown {
                node: k,
                value: node.nu_dot_radial,
            });
        }
        nodes.push(node);
    }
    let mu_weights: Vec<f64> = nodes
        .iter()
        .zip(grid.weights())
        .map(|(n, w)| n.density * w)
        .collect();
    let area = mu_weights.iter().sum();
    Ok(SurfaceGeometry {
        grid: grid.clone(),
        center: emb.center,
        nodes,
        mu_weights,
        area,
        ids: ids.clone(),
    })
}

fn node_geometry(
    grid: &SphericalGrid,
    k: usize,
    jet: &[Vec3; 6],
    radial: &Vec3,
    ids: &InitialDataSet,
) -> Result<NodeGeometry> {
    let [pos, ft, fp, ftt, ftp, fpp] = jet;
    let point = AmbientPoint::new(*pos)?;
    let mjet = ids.metric_jet(&point)?;
    let curv = curvature_tensors(&mjet)?;
    let gb = &mjet.g;
    let gbi = &curv.g_inv;

    let tangents = [*ft, *fp];
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = bilinear(gb, &tangents[i], &tangents[j]);
        }
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::DegenerateImmersion { node: k, det });
    }
    let sqrt_det = det.sqrt();
    let g_inv = [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ];

    // covector normal to both tangents, then raise and normalize in ḡ
    let mut n = cross(ft, fp);
    if dot(&n, radial) < 0.0 {
        n = [-n[0], -n[1], -n[2]];
    }
    let mut up = [0.0; 3];
    for a in 0..3 {
        for b in 0..3 {
            up[a] += gbi[a][b] * n[b];
        }
    }
    let len = dot(&up, &n).sqrt();
    let normal = [up[0] / len, up[1] / len, up[2] / len];
    let normal_lower = [n[0] / len, n[1] / len, n[2] / len];
    let nu_dot_radial = dot(&normal_lower, radial);

    // h_ij = -ḡ(∇̄_i ∂_j F, ν), sign fixed so round spheres have H > 0
    let second = [[*ftt, *ftp], [*ftp, *fpp]];
    let gam = &curv.christoffel;
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = dot(&normal_lower, &second[i][j]);
            for a in 0..3 {
                let mut q = 0.0;
                for b in 0..3 {
                    for c in 0..3 {
                        q += gam[a][b][c] * tangents[i][b] * tangents[j][c];
                    }
                }
                acc += normal_lower[a] * q;
            }
            h[i][j] = -acc;
        }
    }
    h[1][0] = h[0][1];

    let mean_curvature = g_inv[0][0] * h[0][0] + 2.0 * g_inv[0][1] * h[0][1] + g_inv[1][1] * h[1][1];
    let mut a_sq = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for kk in 0..2 {
                for l in 0..2 {
                    a_sq += g_inv[i][kk] * g_inv[j][l] * h[i][j] * h[kk][l];
                }
            }
        }
    }
    let mut ao = h;
    for i in 0..2 {
        for j in 0..2 {
            ao[i][j] -= 0.5 * mean_curvature * g[i][j];
        }
    }
    let mut ao_sq = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for kk in 0..2 {
                for l in 0..2 {
                    ao_sq += g_inv[i][kk] * g_inv[j][l] * ao[i][j] * ao[kk][l];
                }
            }
        }
    }
    let split = (0.5 * ao_sq.max(0.0)).sqrt();
    let kappa = [0.5 * mean_curvature - split, 0.5 * mean_curvature + split];

    // ∂_k g_ij
    let dgb = &mjet.dg;
    let second_of = |a: usize, b: usize| -> &Vec3 { &second[a][b] };
    let mut dg = [[[0.0; 2]; 2]; 2];
    for kk in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for c in 0..3 {
                    v += bilinear(&dgb[c], &tangents[i], &tangents[j]) * tangents[kk][c];
                }
                v += bilinear(gb, second_of(kk, i), &tangents[j]);
                v += bilinear(gb, &tangents[i], second_of(kk, j));
                dg[kk][i][j] = v;
            }
        }
    }
    let mut christoffel = [[[0.0; 2]; 2]; 2];
    for kk in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for l in 0..2 {
                    v += 0.5 * g_inv[kk][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
                christoffel[kk][i][j] = v;
            }
        }
    }

    let ric_nn = bilinear(&curv.ricci, &normal, &normal);
    let theta = grid.theta(k / grid.n_phi());
    Ok(NodeGeometry {
        position: *pos,
        tangents,
        g,
        g_inv,
        sqrt_det,
        density: sqrt_det / theta.sin(),
        normal,
        normal_lower,
        h,
        mean_curvature,
        a_sq,
        ao_sq,
        kappa,
        christoffel,
        ambient_metric: *gb,
        ric_nn,
        ambient_scalar: curv.scalar,
        nu_dot_radial,
    })
}

impl SurfaceGeometry {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn field(&self, f: impl Fn(&NodeGeometry) -> f64) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }

    pub fn mean_curvature(&self) -> Vec<f64> {
        self.field(|n| n.mean_curvature)
    }

    pub fn min_nu_dot_radial(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.nu_dot_radial)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    /// `Δf = g^{ij}(∂_i∂_j f − Γ^k_ij ∂_k f)` with spectral derivatives.
    pub fn laplacian(&self, f: &[f64]) -> Result<Vec<f64>> {
        let d = self.grid.derivatives(f)?;
        Ok(self.laplacian_from(&d))
    }

    pub fn laplacian_from(&self, d: &Derivatives) -> Vec<f64> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(k, n)| n.trace(&hessian_at(n, d, k)))
            .collect()
    }

    /// Covariant Hessian at every node.
    pub fn hessian(&self, f: &[f64]) -> Result<Vec<Sym2>> {
        let d = self.grid.derivatives(f)?;
        Ok(self.hessian_from(&d))
    }

    pub fn hessian_from(&self, d: &Derivatives) -> Vec<Sym2> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(k, n)| hessian_at(n, d, k))
            .collect()
    }

    /// `|∇f|²` at every node.
    pub fn gradient_sq(&self, f: &[f64]) -> Result<Vec<f64>> {
        let (ft, fp) = self.grid.spectral_derivative(f)?;
        Ok(self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, n)| n.pair_vec([ft[k], fp[k]], [ft[k], fp[k]]))
            .collect())
    }
}

pub fn hessian_at(n: &NodeGeometry, d: &Derivatives, k: usize) -> Sym2 {
    let grad = [d.t[k], d.p[k]];
    let raw = [[d.tt[k], d.tp[k]], [d.tp[k], d.pp[k]]];
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = raw[i][j]
                - n.christoffel[0][i][j] * grad[0]
                - n.christoffel[1][i][j] * grad[1];
        }
    }
    out
}

/// `√(g^{ik} g^{jl} T_ij T_kl)`
pub fn tensor_norm(n: &NodeGeometry, t: &Sym2) -> f64 {
    n.pair(t, t).max(0.0).sqrt()
}
