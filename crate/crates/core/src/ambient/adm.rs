use serde::Serialize;

use super::{
    constraint_fields, curvature_tensors, AmbientPoint, InitialDataSet, Mat3, R_MIN,
};
use crate::error::{Error, Result};
use crate::surface::{geometry, integrate, GraphSurface, SphericalGrid};

/// Relative change under grid refinement above which an energy is flagged.
pub const UNDERRESOLVED_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmEstimate {
    pub energy: f64,
    /// Same integral with doubled resolution.
    pub refined: f64,
    pub underresolved: bool,
}

/// `E(R) = −(R/8π) ∮ G(ν_R, ν_R) dμ_R` over the coordinate sphere `|x| = R`.
pub fn adm_energy(ids: &InitialDataSet, radius: f64, grid: &SphericalGrid) -> Result<AdmEstimate> {
    if !(radius >= 2.0 * R_MIN) {
        return Err(Error::Domain {
            radius,
            r_min: 2.0 * R_MIN,
        });
    }
    let energy = flux(ids, radius, grid)?;
    let fine = SphericalGrid::new(2 * grid.n_theta(), 2 * grid.n_phi())?;
    let fine = match grid.rotation() {
        Some(r) => fine.rotated(r),
        None => fine,
    };
    let refined = flux(ids, radius, &fine)?;
    let diff = (refined - energy).abs();
    Ok(AdmEstimate {
        energy,
        refined,
        underresolved: diff > UNDERRESOLVED_TOL * energy.abs().max(1e-300) && diff > 1e-14,
    })
}

/// [`adm_energy`] on a rigidly rotated copy of the quadrature sphere.
pub fn adm_energy_rotated(
    ids: &InitialDataSet,
    radius: f64,
    grid: &SphericalGrid,
    rotation: Mat3,
) -> Result<AdmEstimate> {
    adm_energy(ids, radius, &grid.rotated(rotation))
}

fn flux(ids: &InitialDataSet, radius: f64, grid: &SphericalGrid) -> Result<f64> {
    let sphere = GraphSurface::sphere(grid, [0.0; 3], radius)?;
    let geo = geometry(&sphere, ids)?;
    let g_nn = geo.field(|n| n.einstein_nn());
    Ok(-radius / (8.0 * std::f64::consts::PI) * integrate(&g_nn, &geo))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEntry {
    pub quantity: &'static str,
    pub nominal: f64,
    pub values: Vec<f64>,
    /// Least-squares log-log slope; `None` when any sample vanishes.
    pub slope: Option<f64>,
}

impl SlopeEntry {
    pub fn within(&self, tol: f64) -> bool {
        self.slope.is_none_or(|s| s <= self.nominal + tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub radii: Vec<f64>,
    pub entries: Vec<SlopeEntry>,
}

impl DecayReport {
    pub fn get(&self, quantity: &str) -> Option<&SlopeEntry> {
        self.entries.iter().find(|e| e.quantity == quantity)
    }

    pub fn all_within(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.within(tol))
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn sample_directions() -> Vec<[f64; 3]> {
    // 6 axes, 12 edge midpoints, 8 corners, plus a few generic directions
    let mut dirs = Vec::new();
    for a in -1i32..=1 {
        for b in -1i32..=1 {
            for c in -1i32..=1 {
                if a != 0 || b != 0 || c != 0 {
                    dirs.push([a as f64, b as f64, c as f64]);
                }
            }
        }
    }
    dirs.extend([[0.3, -0.7, 0.2], [-0.5, 0.1, 0.9], [0.8, 0.4, -0.35]]);
    dirs.iter()
        .map(|d| {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            [d[0] / n, d[1] / n, d[2] / n]
        })
        .collect()
}

fn frob<const N: usize>(m: &[[f64; N]; N]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sampled decay magnitudes (maximum over a fixed direction set) and their log-log slopes.
pub fn decay_report(ids: &InitialDataSet, radii: &[f64]) -> Result<DecayReport> {
    if radii.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "decay report needs at least 3 radii, got {}",
            radii.len()
        )));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(vec!["radii must be strictly increasing".into()]));
    }
    let d = ids.delta;
    let names: [(&'static str, f64); 7] = [
        ("metric", -0.5 - d),
        ("metric_d1", -0.5 - d),
        ("metric_d2", -0.5 - d),
        ("k", -1.5 - d),
        ("k_d1", -1.5 - d),
        ("mu_j", -3.0 - d),
        ("scalar", -3.0 - d),
    ];
    let mut values = vec![Vec::with_capacity(radii.len()); names.len()];
    let dirs = sample_directions();
    for &r in radii {
        let mut mx = [0.0f64; 7];
        for dir in &dirs {
            let p = AmbientPoint::new([r * dir[0], r * dir[1], r * dir[2]])?;
            let jet = ids.metric_jet(&p)?;
            let kj = ids.extrinsic_jet(&p)?;
            let curv = curvature_tensors(&jet)?;
            let cf = constraint_fields(ids, &p)?;
            let mut gd = jet.g;
            for (a, row) in gd.iter_mut().enumerate() {
                row[a] -= 1.0;
            }
            let d1: f64 = jet.dg.iter().map(|m| frob(m).powi(2)).sum::<f64>().sqrt();
            let d2: f64 = jet
                .ddg
                .iter()
                .flatten()
                .map(|m| frob(m).powi(2))
                .sum::<f64>()
                .sqrt();
            let k1: f64 = kj.dk.iter().map(|m| frob(m).powi(2)).sum::<f64>().sqrt();
            let sample = [
                frob(&gd),
                r * d1,
                r * r * d2,
                frob(&kj.k),
                r * k1,
                cf.magnitude(&curv.g_inv),
                curv.scalar.abs(),
            ];
            for (m, s) in mx.iter_mut().zip(sample) {
                *m = m.max(s);
            }
        }
        // constraint densities are sums of second-derivative terms; below their
        // cancellation floor they are treated as exactly zero
        let floor = 1e-12 * mx[2] / (r * r);
        for (i, m) in mx.iter().enumerate() {
            let zero = *m < 1e-300 || (i >= 5 && *m < floor);
            values[i].push(if zero { 0.0 } else { *m });
        }
    }
    let entries = names
        .iter()
        .zip(values)
        .map(|((q, nominal), vals)| SlopeEntry {
            quantity: q,
            nominal: *nominal,
            slope: loglog_slope(radii, &vals),
            values: vals,
        })
        .collect();
    Ok(DecayReport {
        radii: radii.to_vec(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SphericalGrid {
        SphericalGrid::new(16, 32).unwrap()
    }

    #[test]
    fn euclidean_energy_vanishes() {
        let e = adm_energy(&InitialDataSet::euclidean(), 50.0, &grid()).unwrap();
        assert_eq!(e.energy, 0.0);
        assert!(!e.underresolved);
    }

    #[test]
    fn schwarzschild_energy_approaches_mass() {
        for (m, r, tol) in [(1.0, 100.0, 0.02), (1.0, 400.0, 0.005), (2.0, 200.0, 0.02)] {
            let e = adm_energy(&InitialDataSet::schwarzschild(m), r, &grid()).unwrap();
            assert!((e.energy - m).abs() / m < tol, "m={m} R={r}: {}", e.energy);
        }
    }

    #[test]
    fn energy_is_rotation_invariant() {
        let ids = InitialDataSet::perturbed(11, 0.05);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = [[c, -s, 0.0], [s * 0.6, c * 0.6, -0.8], [s * 0.8, c * 0.8, 0.6]];
        let a = adm_energy(&ids, 60.0, &grid()).unwrap().refined;
        let b = adm_energy_rotated(&ids, 60.0, &grid(), rot).unwrap().refined;
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-12), "{a} vs {b}");
    }

    #[test]
    fn decay_slopes() {
        let radii = [20.0, 40.0, 80.0, 160.0];
        let flat = decay_report(&InitialDataSet::euclidean(), &radii).unwrap();
        assert!(flat.entries.iter().all(|e| e.slope.is_none()));
        assert!(flat.entries.iter().all(|e| e.values.iter().all(|v| *v == 0.0)));

        let schw = decay_report(&InitialDataSet::schwarzschild(1.0), &radii).unwrap();
        let s = schw.get("metric").unwrap().slope.unwrap();
        assert!((s + 1.0).abs() < 0.05 && s <= -1.0 + 1e-9 + 0.05, "{s}");

        let pert = decay_report(&InitialDataSet::perturbed(7, 0.01), &radii).unwrap();
        for e in &pert.entries {
            assert!(e.within(0.2), "{} slope {:?} nominal {}", e.quantity, e.slope, e.nominal);
        }
        let k = InitialDataSet::schwarzschild_with_k(1.0, 0.1, 2.0, [0.2, 0.0, 0.1]);
        let kr = decay_report(&k, &[20.0, 40.0, 80.0]).unwrap();
        for q in ["k", "k_d1", "mu_j"] {
            assert!(kr.get(q).unwrap().within(1e-6), "{q}: {:?}", kr.get(q));
        }
    }

    #[test]
    fn too_few_radii() {
        let r = decay_report(&InitialDataSet::euclidean(), &[10.0, 20.0]);
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }
}
