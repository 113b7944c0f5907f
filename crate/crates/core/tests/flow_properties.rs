use stmcflow::ambient::InitialDataSet;
use stmcflow::flow::{evolve, limit_residual, FlowConfig, FlowState};
use stmcflow::mass::{drift_study, DriftSettings};
use stmcflow::surface::{enclosed_volume, geometry, shape_report, GraphSurface, SphericalGrid};

fn grid(n: usize) -> SphericalGrid {
    SphericalGrid::new(n, 2 * n).unwrap()
}

fn ellipsoid(center: [f64; 3]) -> GraphSurface {
    GraphSurface::ellipsoid(&grid(12), center, [4.0, 4.0, 4.8]).unwrap()
}

#[test]
fn centered_schwarzschild_sphere_converges_at_step_zero() {
    let s = GraphSurface::sphere(&grid(12), [0.0; 3], 20.0).unwrap();
    let trace = evolve(FlowState::new(s), &InitialDataSet::schwarzschild(1.0), &FlowConfig::new(2.0)).unwrap();
    assert!(trace.converged);
    assert_eq!(trace.final_state.step, 0);
    assert_eq!(trace.rows.len(), 1);
}

#[test]
fn stopping_flag_matches_final_residual() {
    let mut config = FlowConfig::new(2.0);
    config.stop_tol = 1e-7;
    let trace = evolve(FlowState::new(ellipsoid([0.0; 3])), &InitialDataSet::euclidean(), &config).unwrap();
    let last = trace.rows.last().unwrap();
    assert!(trace.converged && last.dev_inf / last.hbar < 1e-7);
    let before = &trace.rows[trace.rows.len() - 2];
    assert!(before.dev_inf / before.hbar >= 1e-7);
    assert!(trace.rows.windows(2).all(|w| w[1].t > w[0].t));
}

#[test]
fn limit_residual_decreases_along_the_flow() {
    let ids = InitialDataSet::euclidean();
    let mut config = FlowConfig::new(2.0);
    config.stop_tol = 1e-6;
    let trace = evolve(FlowState::new(ellipsoid([0.0; 3])), &ids, &config).unwrap();
    let res: Vec<f64> = trace.rows.iter().map(|r| r.limit_residual).collect();
    assert!(res[0] > 0.0);
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    let direct = limit_residual(&trace.final_state.surface, &ids, 2.0).unwrap();
    assert!((direct - res[res.len() - 1]).abs() < 1e-14);
}

#[test]
fn volume_drift_shrinks_at_fourth_order() {
    let ids = InitialDataSet::euclidean();
    let start = GraphSurface::ellipsoid(&grid(12), [0.0; 3], [4.0, 4.0, 6.0]).unwrap();
    let v0 = enclosed_volume(&start, &ids).unwrap();
    let drift = |cfl: f64| {
        let mut config = FlowConfig::new(2.0);
        config.cfl = cfl;
        config.t_max = 2.0;
        config.stop_tol = 1e-14;
        let trace = evolve(FlowState::new(start.clone()), &ids, &config).unwrap();
        assert!((trace.final_state.t - 2.0).abs() < 1e-12);
        (enclosed_volume(&trace.final_state.surface, &ids).unwrap() - v0).abs() / v0
    };
    let (a, b) = (drift(1.0), drift(0.5));
    assert!(a < 1e-6, "{a}");
    // round-off floor or fourth-order shrinkage
    assert!(b < 1e-13 || a / b > 10.0, "{a} {b}");
}

fn converge(start: &GraphSurface, recentering: bool) -> (GraphSurface, usize) {
    let mut config = FlowConfig::new(2.0);
    config.recentering = recentering;
    config.stop_tol = 1e-8;
    let trace = evolve(FlowState::new(start.clone()), &InitialDataSet::euclidean(), &config).unwrap();
    assert!(trace.converged, "{:?}", trace.error);
    (trace.final_state.surface, trace.recenterings)
}

fn barycenter(s: &GraphSurface) -> [f64; 3] {
    shape_report(s, &geometry(s, &InitialDataSet::euclidean()).unwrap())
        .unwrap()
        .barycenter
}

#[test]
fn graph_center_does_not_change_the_limit_set() {
    let ids = InitialDataSet::euclidean();
    let centered = ellipsoid([0.0; 3]);
    let shifted = centered.recentered([1.0, 0.0, 0.0]).unwrap();
    let (a, _) = converge(&centered, true);
    let (b, n) = converge(&shifted, false);
    assert_eq!(n, 0);
    let ra = limit_residual(&a, &ids, 2.0).unwrap();
    let rb = limit_residual(&b, &ids, 2.0).unwrap();
    assert!((ra - rb).abs() < 1e-6, "{ra} {rb}");
    let z = barycenter(&a);
    let (a, b) = (a.recentered(z).unwrap(), b.recentered(z).unwrap());
    let diff = a.rho().iter().zip(b.rho()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff < 1e-6 * 4.0, "{diff}");
}

#[test]
fn recentering_rescues_an_offset_graph() {
    // ν·ω starts just above the breakdown limit
    let start = GraphSurface::ellipsoid(&grid(32), [0.0; 3], [4.0, 4.0, 4.4])
        .unwrap()
        .recentered([3.82, 0.0, 0.0])
        .unwrap();
    let (limit, n) = converge(&start, true);
    assert!(n > 0);
    let z = barycenter(&limit);
    assert!(z.iter().all(|c| c.abs() < 1e-6), "{z:?}");
    // equal-volume round sphere
    let radius = (4.0f64 * 4.0 * 4.4).cbrt();
    let limit = limit.recentered(z).unwrap();
    let err = limit.rho().iter().fold(0.0f64, |m, r| m.max((r - radius).abs()));
    assert!(err < 1e-6 * radius, "{err}");
}

#[test]
fn drift_study_rotates_with_the_momentum() {
    let q = 2.0;
    let sigmas = [20.0, 30.0, 40.0];
    let settings = DriftSettings::new(q);
    let x = InitialDataSet::schwarzschild_with_k(1.0, 0.5, 2.0, [0.5, 0.0, 0.0]);
    let y = InitialDataSet::schwarzschild_with_k(1.0, 0.5, 2.0, [0.0, 0.5, 0.0]);
    let dx = drift_study(&x, q, &sigmas, &settings).unwrap();
    let dy = drift_study(&y, q, &sigmas, &settings).unwrap();
    for (zx, zy) in dx.z_final.iter().zip(&dy.z_final) {
        // rotation by π/2 about z maps (x, y, z) to (−y, x, z)
        let rotated = [-zx[1], zx[0], zx[2]];
        for k in 0..3 {
            assert!((rotated[k] - zy[k]).abs() < 1e-8, "{zx:?} {zy:?}");
        }
        assert!(zx[0].abs() > 1e-6);
    }
}
