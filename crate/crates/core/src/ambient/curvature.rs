use super::{invert3, AmbientPoint, ExtrinsicJet1, InitialDataSet, Mat3, MetricJet2, Vec3};
use crate::error::{Error, Result};

/// Curvature of the ambient metric at one point, all indices explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensors {
    pub g_inv: Mat3,
    /// `christoffel[c][a][b] = Γ^c_ab`
    pub christoffel: [Mat3; 3],
    /// Fully covariant `R_abcd` with `Ric_bd = g^{ac} R_abcd`.
    pub riemann: [[Mat3; 3]; 3],
    pub ricci: Mat3,
    pub scalar: f64,
    pub einstein: Mat3,
}

pub fn curvature_tensors(jet: &MetricJet2) -> Result<CurvatureTensors> {
    let g = &jet.g;
    let g_inv = invert3(g).ok_or(Error::SingularMetric)?;

    // Christoffel symbols of the first kind: Γ_{d,ab}
    let mut first = [[[0.0; 3]; 3]; 3];
    for d in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                first[d][a][b] = 0.5 * (jet.dg[a][d][b] + jet.dg[b][d][a] - jet.dg[d][a][b]);
            }
        }
    }
    let mut christoffel = [[[0.0; 3]; 3]; 3];
    for c in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for d in 0..3 {
                    s += g_inv[c][d] * first[d][a][b];
                }
                christoffel[c][a][b] = s;
            }
        }
    }

    let mut riemann = [[[[0.0; 3]; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    let second = 0.5
                        * (jet.ddg[b][c][a][d] + jet.ddg[a][d][b][c]
                            - jet.ddg[a][c][b][d]
                            - jet.ddg[b][d][a][c]);
                    let mut quad = 0.0;
                    for e in 0..3 {
                        quad += first[e][b][c] * christoffel[e][a][d]
                            - first[e][b][d] * christoffel[e][a][c];
                    }
                    riemann[a][b][c][d] = second + quad;
                }
            }
        }
    }

    let mut ricci = [[0.0; 3]; 3];
    for b in 0..3 {
        for d in 0..3 {
            let mut s = 0.0;
            for a in 0..3 {
                for c in 0..3 {
                    s += g_inv[a][c] * riemann[a][b][c][d];
                }
            }
            ricci[b][d] = s;
        }
    }
    let mut scalar = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            scalar += g_inv[a][b] * ricci[a][b];
        }
    }
    let mut einstein = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            einstein[a][b] = ricci[a][b] - 0.5 * scalar * g[a][b];
        }
    }
    Ok(CurvatureTensors {
        g_inv,
        christoffel,
        riemann,
        ricci,
        scalar,
        einstein,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintFields {
    pub mu: f64,
    pub j: Vec3,
}

impl ConstraintFields {
    /// `|μ̄| + |J̄|_ḡ`
    pub fn magnitude(&self, g_inv: &Mat3) -> f64 {
        let mut jj = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                jj += g_inv[a][b] * self.j[a] * self.j[b];
            }
        }
        self.mu.abs() + jj.max(0.0).sqrt()
    }
}

/// Energy and momentum densities induced by `(ḡ, K̄)` through the constraint equations.
pub fn constraint_fields(ids: &InitialDataSet, p: &AmbientPoint) -> Result<ConstraintFields> {
    let jet = ids.metric_jet(p)?;
    let k = ids.extrinsic_jet(p)?;
    let curv = curvature_tensors(&jet)?;
    Ok(constraints_from(&curv, &k))
}

pub(crate) fn constraints_from(curv: &CurvatureTensors, k: &ExtrinsicJet1) -> ConstraintFields {
    let gi = &curv.g_inv;
    let mut tr = 0.0;
    let mut sq = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            tr += gi[a][b] * k.k[a][b];
            for c in 0..3 {
                for d in 0..3 {
                    sq += gi[a][c] * gi[b][d] * k.k[a][b] * k.k[c][d];
                }
            }
        }
    }
    let mu = 0.5 * (curv.scalar - sq + tr * tr);

    // ∇_c K_ab
    let gam = &curv.christoffel;
    let mut nabla = [[[0.0; 3]; 3]; 3];
    for c in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                let mut v = k.dk[c][a][b];
                for e in 0..3 {
                    v -= gam[e][c][a] * k.k[e][b] + gam[e][c][b] * k.k[a][e];
                }
                nabla[c][a][b] = v;
            }
        }
    }
    let mut j = [0.0; 3];
    for (b, jb) in j.iter_mut().enumerate() {
        let mut v = 0.0;
        for a in 0..3 {
            for c in 0..3 {
                v += gi[a][c] * (nabla[c][a][b] - nabla[b][a][c]);
            }
        }
        *jb = v;
    }
    ConstraintFields { mu, j }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::InitialDataSet;

    fn at(x: [f64; 3]) -> AmbientPoint {
        AmbientPoint::new(x).unwrap()
    }

    #[test]
    fn euclidean_is_flat() {
        let jet = InitialDataSet::euclidean().metric_jet(&at([5.0, 1.0, 2.0])).unwrap();
        let c = curvature_tensors(&jet).unwrap();
        assert!(c.riemann.iter().flatten().flatten().flatten().all(|v| *v == 0.0));
        assert_eq!(c.scalar, 0.0);
        let cf = constraint_fields(&InitialDataSet::euclidean(), &at([5.0, 1.0, 2.0])).unwrap();
        assert_eq!(cf.mu, 0.0);
        assert_eq!(cf.j, [0.0; 3]);
    }

    // For `u⁴δ` with harmonic `u = 1 + m/2r`: Ric_rr = -2u''/u + 4u'²/u².
    #[test]
    fn schwarzschild_is_scalar_flat_and_vacuum() {
        let ids = InitialDataSet::schwarzschild(1.0);
        for x in [[10.0, 0.0, 0.0], [3.0, -4.0, 7.0], [-40.0, 5.0, 2.0]] {
            let p = at(x);
            let c = curvature_tensors(&ids.metric_jet(&p).unwrap()).unwrap();
            assert!(c.scalar.abs() < 1e-10, "S = {}", c.scalar);
            let cf = constraint_fields(&ids, &p).unwrap();
            assert!(cf.mu.abs() < 1e-9 && cf.j.iter().all(|v| v.abs() < 1e-9));
        }
        // radial-radial Ricci at (10,0,0)
        let (m, r) = (1.0, 10.0);
        let u = 1.0 + m / (2.0 * r);
        let du = -m / (2.0 * r * r);
        let ddu = m / (r * r * r);
        let ric_rr = -2.0 * ddu / u + 4.0 * du * du / (u * u);
        let c = curvature_tensors(&ids.metric_jet(&at([r, 0.0, 0.0])).unwrap()).unwrap();
        assert!((c.ricci[0][0] - ric_rr).abs() < 1e-14, "{} vs {}", c.ricci[0][0], ric_rr);
    }

    #[test]
    fn index_symmetries_and_bianchi() {
        for ids in [
            InitialDataSet::schwarzschild(1.0),
            InitialDataSet::perturbed(3, 0.05),
        ] {
            let c = curvature_tensors(&ids.metric_jet(&at([3.0, 2.0, -2.5])).unwrap()).unwrap();
            let r = &c.riemann;
            for a in 0..3 {
                for b in 0..3 {
                    for i in 0..3 {
                        assert!((c.christoffel[i][a][b] - c.christoffel[i][b][a]).abs() < 1e-15);
                    }
                    for cc in 0..3 {
                        for d in 0..3 {
                            assert!((r[a][b][cc][d] + r[b][a][cc][d]).abs() < 1e-10);
                            assert!((r[a][b][cc][d] + r[a][b][d][cc]).abs() < 1e-10);
                            assert!((r[a][b][cc][d] - r[cc][d][a][b]).abs() < 1e-10);
                            let bianchi = r[a][b][cc][d] + r[a][cc][d][b] + r[a][d][b][cc];
                            assert!(bianchi.abs() < 1e-10);
                        }
                    }
                    assert!((c.ricci[a][b] - c.ricci[b][a]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn singular_metric_is_reported() {
        let mut jet = InitialDataSet::euclidean().metric_jet(&at([3.0, 0.0, 0.0])).unwrap();
        jet.g[2][2] = 0.0;
        assert!(matches!(curvature_tensors(&jet), Err(Error::SingularMetric)));
    }
}
