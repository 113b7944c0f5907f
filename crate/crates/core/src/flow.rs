//! Volume-preserving q-spacetime mean curvature flow `∂ₜF = −(𝓗 − ħ)ν`.
//!
//! The surface stays a radial graph about its center `z`, and the flow is
//! realized on the radial function as `∂ₜρ = −(𝓗 − ħ)/ḡ(ω, ν)`, which has the
//! prescribed normal speed and differs from the normal flow by a tangential
//! reparametrization only.

use serde::Serialize;

use crate::ambient::{InitialDataSet, Vec3};
use crate::error::{Error, Result};
use crate::stcurv::{evaluate, roundness_report, RoundnessParams, RoundnessReport, StCurvature};
use crate::surface::{
    from_embedding, geometry, integrate, lp_norm, shape_report, Embedding, GraphSurface,
    SphericalGrid, SurfaceGeometry, RECENTER_THRESHOLD,
};

/// Stability interval of classical RK4 on the negative real axis.
const RK4_REAL_STABILITY: f64 = 2.78;
/// Halvings of `dt` tried before a rejected step aborts the run.
const MAX_REJECTIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundnessSettings {
    /// Fixed σ for the thresholds; the initial area radius when absent.
    pub sigma: Option<f64>,
    pub eta: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for RoundnessSettings {
    fn default() -> Self {
        RoundnessSettings {
            sigma: None,
            eta: 1.0,
            b1: 10.0,
            b2: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConfig {
    pub q: f64,
    pub cfl: f64,
    pub t_max: f64,
    /// Threshold on `‖𝓗 − ħ‖_∞ / ħ`.
    pub stop_tol: f64,
    pub report_every: usize,
    pub recentering: bool,
    pub max_steps: usize,
    /// Keep a copy of the surface at every report.
    pub keep_snapshots: bool,
    pub roundness: RoundnessSettings,
}

impl FlowConfig {
    pub fn new(q: f64) -> Self {
        FlowConfig {
            q,
            cfl: 0.8,
            t_max: 1e9,
            stop_tol: 1e-9,
            report_every: 10,
            recentering: true,
            max_steps: 200_000,
            keep_snapshots: false,
            roundness: RoundnessSettings::default(),
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.q >= 2.0) || !self.q.is_finite() {
            out.push(format!("q = {}: q ≥ 2 required", self.q));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            out.push(format!("cfl = {}: 0 < cfl ≤ 1 required", self.cfl));
        }
        if !(self.stop_tol > 0.0) {
            out.push(format!("stop_tol = {}: stop_tol > 0 required", self.stop_tol));
        }
        if !(self.t_max > 0.0) {
            out.push(format!("t_max = {}: t_max > 0 required", self.t_max));
        }
        if self.report_every == 0 {
            out.push("report_every = 0: report_every ≥ 1 required".into());
        }
        if self.max_steps == 0 {
            out.push("max_steps = 0: max_steps ≥ 1 required".into());
        }
        let r = &self.roundness;
        if !(r.eta > 0.0 && r.b1 > 0.0 && r.b2 > 0.0) {
            out.push("roundness eta, b1, b2 must be positive".into());
        }
        if let Some(s) = r.sigma {
            if !(s > 0.0) {
                out.push(format!("roundness sigma = {s}: σ > 0 required"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub surface: GraphSurface,
    pub t: f64,
    pub step: usize,
}

impl FlowState {
    pub fn new(surface: GraphSurface) -> Self {
        FlowState {
            surface,
            t: 0.0,
            step: 0,
        }
    }
}

/// Normal speed `f = 𝓗 − ħ` together with the geometry it was computed from.
#[derive(Debug, Clone)]
pub struct Speed {
    pub f: Vec<f64>,
    pub geo: SurfaceGeometry,
    pub st: StCurvature,
}

pub fn speed_field(surface: &GraphSurface, ids: &InitialDataSet, q: f64) -> Result<Speed> {
    let geo = geometry(surface, ids)?;
    let st = evaluate(&geo, q)?;
    let f = st.deviation();
    Ok(Speed { f, geo, st })
}

/// Band-limited `∂ₜρ = −f / ḡ(ω, ν)`.
fn rho_rate(speed: &Speed) -> Vec<f64> {
    let raw: Vec<f64> = speed
        .f
        .iter()
        .zip(&speed.geo.nodes)
        .map(|(f, n)| -f / n.nu_dot_radial)
        .collect();
    speed.geo.grid.project(&raw)
}

/// Parabolic time step `cfl · 2.78 / (max Φ′ · λ_max)` with `λ_max = L(L+1)/r²`,
/// `r = σ_Σ · min ρ / max ρ`.
pub fn stable_dt(speed: &Speed, surface: &GraphSurface, cfl: f64) -> f64 {
    let l = surface.grid().lmax() as f64;
    let (lo, hi) = surface
        .rho()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    let sigma = (speed.geo.area / (4.0 * std::f64::consts::PI)).sqrt();
    let r = sigma * lo / hi;
    let lam = l * (l + 1.0) / (r * r);
    let phi = speed.st.phi_prime.iter().fold(1.0f64, |a, v| a.max(*v));
    cfl * RK4_REAL_STABILITY / (phi * lam)
}

fn advance(surface: &GraphSurface, rate: &[f64], h: f64) -> Result<GraphSurface> {
    let rho: Vec<f64> = surface
        .rho()
        .iter()
        .zip(rate)
        .map(|(r, v)| r + h * v)
        .collect();
    GraphSurface::new(surface.grid(), surface.center, rho)
}

fn rk4(
    surface: &GraphSurface,
    ids: &InitialDataSet,
    q: f64,
    dt: f64,
    k1: Vec<f64>,
) -> Result<GraphSurface> {
    let k2 = rho_rate(&speed_field(&advance(surface, &k1, 0.5 * dt)?, ids, q)?);
    let k3 = rho_rate(&speed_field(&advance(surface, &k2, 0.5 * dt)?, ids, q)?);
    let k4 = rho_rate(&speed_field(&advance(surface, &k3, dt)?, ids, q)?);
    let rate: Vec<f64> = (0..k1.len())
        .map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
        .collect();
    let next = advance(surface, &rate, dt)?;
    let rho = surface.grid().project(next.rho());
    GraphSurface::new(surface.grid(), surface.center, rho)
}

/// One classical Runge–Kutta step of the graph flow.
pub fn step(state: &FlowState, ids: &InitialDataSet, config: &FlowConfig, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::Numeric(format!("time step {dt} is not positive")));
    }
    let speed = speed_field(&state.surface, ids, config.q)?;
    let surface = rk4(&state.surface, ids, config.q, dt, rho_rate(&speed))?;
    Ok(FlowState {
        surface,
        t: state.t + dt,
        step: state.step + 1,
    })
}

/// `max |H^q − |P|^q − ħ^q| / ħ^q`
pub fn limit_residual(surface: &GraphSurface, ids: &InitialDataSet, q: f64) -> Result<f64> {
    let geo = geometry(surface, ids)?;
    let st = evaluate(&geo, q)?;
    Ok(limit_residual_of(&st))
}

fn limit_residual_of(st: &StCurvature) -> f64 {
    let hq = st.hbar.powf(st.q);
    st.h
        .iter()
        .zip(&st.p)
        .map(|(h, p)| (h.powf(st.q) - p.abs().powf(st.q) - hq).abs() / hq)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub hbar: f64,
    pub dev_l2: f64,
    pub dev_inf: f64,
    pub grad_l4: f64,
    pub volume: f64,
    pub area: f64,
    pub sigma: f64,
    pub barycenter: Vec3,
    pub center: Vec3,
    pub limit_residual: f64,
    pub roundness: RoundnessReport,
}

/// Column order of the CSV trace.
pub const TRACE_COLUMNS: [&str; 33] = [
    "step",
    "t",
    "dt",
    "hbar",
    "dev_l2",
    "dev_inf",
    "rel_dev_inf",
    "grad_l4",
    "volume",
    "area",
    "sigma",
    "bary_x",
    "bary_y",
    "bary_z",
    "center_x",
    "center_y",
    "center_z",
    "limit_residual",
    "a_l4",
    "ratio_r",
    "ratio_big_r",
    "a_func",
    "max_a",
    "min_kappa",
    "osc_h",
    "h1",
    "in_traceless",
    "in_area",
    "in_radii",
    "in_oscillation",
    "in_max_a",
    "in_kappa",
    "in_class",
];

impl TraceRow {
    pub fn csv_values(&self) -> Vec<String> {
        let r = &self.roundness;
        let f = |v: f64| format!("{v:e}");
        let b = |v: bool| if v { "1".to_string() } else { "0".to_string() };
        let flags = r.in_class;
        vec![
            self.step.to_string(),
            f(self.t),
            f(self.dt),
            f(self.hbar),
            f(self.dev_l2),
            f(self.dev_inf),
            f(self.dev_inf / self.hbar),
            f(self.grad_l4),
            f(self.volume),
            f(self.area),
            f(self.sigma),
            f(self.barycenter[0]),
            f(self.barycenter[1]),
            f(self.barycenter[2]),
            f(self.center[0]),
            f(self.center[1]),
            f(self.center[2]),
            f(self.limit_residual),
            f(r.a_l4),
            f(r.ratio_r),
            f(r.ratio_big_r),
            f(r.a_func),
            f(r.max_a),
            f(r.min_kappa),
            f(r.osc_h),
            f(r.h1),
            b(flags.traceless),
            b(flags.area),
            b(flags.radii),
            b(flags.oscillation),
            b(flags.max_a),
            b(flags.kappa),
            b(flags.all()),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    pub final_state: FlowState,
    /// Set when the run stopped on an error; the rows up to that point are kept.
    pub error: Option<String>,
    pub recenterings: usize,
    pub snapshots: Vec<(usize, GraphSurface)>,
}

impl FlowTrace {
    pub fn final_residual(&self) -> Option<f64> {
        self.rows.last().map(|r| r.limit_residual)
    }

    pub fn to_csv(&self) -> String {
        let mut out = TRACE_COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_values().join(","));
            out.push('\n');
        }
        out
    }
}

fn report_row(
    state: &FlowState,
    speed: &Speed,
    dt: f64,
    params: RoundnessParams,
) -> Result<TraceRow> {
    let geo = &speed.geo;
    let shape = shape_report(&state.surface, geo)?;
    let grad_sq = geo.gradient_sq(&speed.st.hq)?;
    let grad_l4 = integrate(&grad_sq.iter().map(|v| v * v).collect::<Vec<_>>(), geo).powf(0.25);
    Ok(TraceRow {
        step: state.step,
        t: state.t,
        dt,
        hbar: speed.st.hbar,
        dev_l2: lp_norm(&speed.f, geo, 2.0),
        dev_inf: lp_norm(&speed.f, geo, f64::INFINITY),
        grad_l4,
        volume: shape.volume,
        area: shape.area,
        sigma: shape.sigma,
        barycenter: shape.barycenter,
        center: state.surface.center,
        limit_residual: limit_residual_of(&speed.st),
        roundness: roundness_report(&state.surface, geo, &speed.st, params)?,
    })
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::GraphBreakdown { .. }
            | Error::Admissibility { .. }
            | Error::Domain { .. }
            | Error::DegenerateImmersion { .. }
    )
}

/// Runs the flow until `‖𝓗 − ħ‖_∞/ħ < stop_tol`, `t_max` or `max_steps`.
///
/// Errors after the first step end the run but keep the trace; an error on
/// the initial surface is returned directly.
pub fn evolve(initial: FlowState, ids: &InitialDataSet, config: &FlowConfig) -> Result<FlowTrace> {
    config.validate()?;
    let q = config.q;
    let mut state = initial;
    let mut speed = speed_field(&state.surface, ids, q)?;
    let sigma0 = config
        .roundness
        .sigma
        .unwrap_or((speed.geo.area / (4.0 * std::f64::consts::PI)).sqrt());
    let params = RoundnessParams {
        sigma: sigma0,
        eta: config.roundness.eta,
        b1: config.roundness.b1,
        b2: config.roundness.b2,
    };
    let mut rows = Vec::new();
    let mut recenterings = 0;
    let mut snapshots = Vec::new();
    let mut dt_used = 0.0;
    let mut error = None;
    let converged = loop {
        if config.recentering && speed.geo.min_nu_dot_radial() < RECENTER_THRESHOLD {
            let bary = shape_report(&state.surface, &speed.geo)?.barycenter;
            state.surface = state.surface.recentered(bary)?;
            speed = speed_field(&state.surface, ids, q)?;
            recenterings += 1;
        }
        let dev_inf = lp_norm(&speed.f, &speed.geo, f64::INFINITY);
        if !dev_inf.is_finite() {
            error = Some("non-finite speed".to_string());
            break false;
        }
        let done = dev_inf / speed.st.hbar < config.stop_tol;
        let out_of_time = state.t >= config.t_max || state.step >= config.max_steps;
        if state.step.is_multiple_of(config.report_every) || done || out_of_time {
            rows.push(report_row(&state, &speed, dt_used, params)?);
            if config.keep_snapshots {
                snapshots.push((state.step, state.surface.clone()));
            }
        }
        if done {
            break true;
        }
        if out_of_time {
            break false;
        }
        let mut dt = stable_dt(&speed, &state.surface, config.cfl).min(config.t_max - state.t);
        let k1 = rho_rate(&speed);
        let mut attempt = 0;
        let next = loop {
            match rk4(&state.surface, ids, q, dt, k1.clone()) {
                Ok(s) => match speed_field(&s, ids, q) {
                    Ok(sp) => break Ok((s, sp)),
                    Err(e) if recoverable(&e) && attempt < MAX_REJECTIONS => {}
                    Err(e) => break Err(e),
                },
                Err(e) if recoverable(&e) && attempt < MAX_REJECTIONS => {}
                Err(e) => break Err(e),
            }
            attempt += 1;
            dt *= 0.5;
        };
        match next {
            Ok((s, sp)) => {
                state = FlowState {
                    surface: s,
                    t: state.t + dt,
                    step: state.step + 1,
                };
                speed = sp;
                dt_used = dt;
            }
            Err(e) => {
                error = Some(e.to_string());
                break false;
            }
        }
    };
    Ok(FlowTrace {
        rows,
        converged,
        final_state: state,
        error,
        recenterings,
        snapshots,
    })
}

/// Finite-difference residuals of the evolution identities along the normal flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub dt: f64,
    /// `∂g_ij = −2 f h_ij`
    pub metric: f64,
    /// `∂(dμ) = −f H dμ`
    pub measure: f64,
    /// `∂H = Δf + f(|A|² + Ric(ν,ν))`
    pub mean_curvature: f64,
}

const IDENTITY_SUBSTEPS: usize = 8;

fn normal_velocity(
    grid: &SphericalGrid,
    center: Vec3,
    comps: &[Vec<f64>; 3],
    ids: &InitialDataSet,
    q: f64,
) -> Result<(Vec<[f64; 3]>, SurfaceGeometry, Vec<f64>)> {
    let emb = Embedding::from_components(grid, center, [&comps[0], &comps[1], &comps[2]])?;
    let geo = from_embedding(grid, &emb, ids)?;
    let st = evaluate(&geo, q)?;
    let f = st.deviation();
    let v = geo
        .nodes
        .iter()
        .zip(&f)
        .map(|(n, fk)| [-fk * n.normal[0], -fk * n.normal[1], -fk * n.normal[2]])
        .collect();
    Ok((v, geo, f))
}

fn normal_flow(
    grid: &SphericalGrid,
    center: Vec3,
    start: &[Vec<f64>; 3],
    ids: &InitialDataSet,
    q: f64,
    dt: f64,
) -> Result<SurfaceGeometry> {
    let h = dt / IDENTITY_SUBSTEPS as f64;
    let mut x = start.clone();
    let shift = |x: &[Vec<f64>; 3], v: &[[f64; 3]], s: f64| -> [Vec<f64>; 3] {
        [0, 1, 2].map(|a| x[a].iter().zip(v).map(|(p, w)| p + s * w[a]).collect())
    };
    for _ in 0..IDENTITY_SUBSTEPS {
        let (k1, _, _) = normal_velocity(grid, center, &x, ids, q)?;
        let (k2, _, _) = normal_velocity(grid, center, &shift(&x, &k1, 0.5 * h), ids, q)?;
        let (k3, _, _) = normal_velocity(grid, center, &shift(&x, &k2, 0.5 * h), ids, q)?;
        let (k4, _, _) = normal_velocity(grid, center, &shift(&x, &k3, h), ids, q)?;
        let avg: Vec<[f64; 3]> = (0..k1.len())
            .map(|i| [0, 1, 2].map(|a| (k1[i][a] + 2.0 * k2[i][a] + 2.0 * k3[i][a] + k4[i][a]) / 6.0))
            .collect();
        x = shift(&x, &avg, h);
    }
    let emb = Embedding::from_components(grid, center, [&x[0], &x[1], &x[2]])?;
    from_embedding(grid, &emb, ids)
}

/// Central differences in `t` of `g_ij`, `dμ` and `H` against the right-hand sides at `t = 0`.
/// Each residual is a maximum over nodes relative to the maximum of its right-hand side.
pub fn evolution_identity_check(
    surface: &GraphSurface,
    ids: &InitialDataSet,
    q: f64,
    dt: f64,
) -> Result<IdentityResiduals> {
    let grid = surface.grid();
    let pts = surface.points();
    let comps: [Vec<f64>; 3] = [0, 1, 2].map(|a| pts.iter().map(|p| p[a]).collect());
    let center = surface.center;
    let (_, geo, f) = normal_velocity(grid, center, &comps, ids, q)?;
    let fwd = normal_flow(grid, center, &comps, ids, q, dt)?;
    let bwd = normal_flow(grid, center, &comps, ids, q, -dt)?;
    let lap = geo.laplacian(&f)?;

    let mut res = [0.0f64; 3];
    let mut scale = [0.0f64; 3];
    for (k, n) in geo.nodes.iter().enumerate() {
        let (a, b) = (&fwd.nodes[k], &bwd.nodes[k]);
        for i in 0..2 {
            for j in 0..2 {
                let lhs = (a.g[i][j] - b.g[i][j]) / (2.0 * dt);
                let rhs = -2.0 * f[k] * n.h[i][j];
                res[0] = res[0].max((lhs - rhs).abs());
                scale[0] = scale[0].max(rhs.abs());
            }
        }
        let lhs = (a.density - b.density) / (2.0 * dt);
        let rhs = -f[k] * n.mean_curvature * n.density;
        res[1] = res[1].max((lhs - rhs).abs());
        scale[1] = scale[1].max(rhs.abs());
        let lhs = (a.mean_curvature - b.mean_curvature) / (2.0 * dt);
        let rhs = lap[k] + f[k] * (n.a_sq + n.ric_nn);
        res[2] = res[2].max((lhs - rhs).abs());
        scale[2] = scale[2].max(rhs.abs());
    }
    let rel = |i: usize| if scale[i] > 0.0 { res[i] / scale[i] } else { res[i] };
    Ok(IdentityResiduals {
        dt,
        metric: rel(0),
        measure: rel(1),
        mean_curvature: rel(2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Least-squares slope of `log ‖𝓗 − ħ‖₂` against `t`.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
    pub energy: f64,
    /// `−E/(6σ³)`: the L² rate implied by `d/dt ∫(𝓗−ħ)² ≤ −(E/3σ³) ∫(𝓗−ħ)²`.
    pub bound: f64,
    /// `−E/(2σ³)`: the same with the constant `E/σ³`.
    pub bound_strong: f64,
}

/// Decades of `‖𝓗 − ħ‖₂` used by [`decay_fit`], counted back from the last report.
pub const FIT_DECADES: f64 = 2.0;

/// Exponential rate over the final two decades of the trace.
pub fn decay_fit(rows: &[TraceRow], energy: f64, sigma: f64) -> Result<DecayFit> {
    let last = rows
        .last()
        .ok_or_else(|| Error::InsufficientData("empty trace".into()))?
        .dev_l2;
    let first = rows.iter().map(|r| r.dev_l2).fold(0.0f64, f64::max);
    if !(last > 0.0) || (first / last).log10() < FIT_DECADES {
        return Err(Error::InsufficientData(format!(
            "‖𝓗−ħ‖₂ spans {:.2} decades, {FIT_DECADES} needed",
            if last > 0.0 { (first / last).log10() } else { 0.0 }
        )));
    }
    let cut = last * 10f64.powf(FIT_DECADES);
    let start = rows.iter().rposition(|r| r.dev_l2 >= cut).unwrap_or(0);
    let window: Vec<(f64, f64)> = rows[start..]
        .iter()
        .map(|r| (r.t, r.dev_l2.ln()))
        .collect();
    if window.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} reports in the fit window, 10 needed",
            window.len()
        )));
    }
    let n = window.len() as f64;
    let mt = window.iter().map(|p| p.0).sum::<f64>() / n;
    let my = window.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = window.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = window.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = window.iter().map(|p| (p.1 - my).powi(2)).sum();
    let rate = sty / stt;
    let r_squared = if syy > 0.0 { sty * sty / (stt * syy) } else { 1.0 };
    let s3 = sigma.powi(3);
    Ok(DecayFit {
        rate,
        r_squared,
        points: window.len(),
        energy,
        bound: -energy / (6.0 * s3),
        bound_strong: -energy / (2.0 * s3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> SphericalGrid {
        SphericalGrid::new(n, 2 * n).unwrap()
    }

    #[test]
    fn config_validation_lists_every_problem() {
        let mut c = FlowConfig::new(1.5);
        c.cfl = 0.0;
        c.stop_tol = -1.0;
        match c.validate() {
            Err(Error::Config(p)) => {
                assert_eq!(p.len(), 3);
                assert!(p[0].contains("q ≥ 2 required"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_spheres_are_stationary() {
        let g = grid(24);
        for ids in [InitialDataSet::euclidean(), InitialDataSet::schwarzschild(1.0)] {
            let s = GraphSurface::sphere(&g, [0.0; 3], 10.0).unwrap();
            let sp = speed_field(&s, &ids, 2.0).unwrap();
            assert!(sp.f.iter().all(|v| v.abs() < 1e-9));
            let next = step(&FlowState::new(s.clone()), &ids, &FlowConfig::new(2.0), 1.0).unwrap();
            let drift = next
                .surface
                .rho()
                .iter()
                .zip(s.rho())
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(drift < 1e-10, "{drift}");
            let tr = evolve(FlowState::new(s), &ids, &FlowConfig::new(2.0)).unwrap();
            assert!(tr.converged && tr.final_state.step == 0);
        }
    }

    #[test]
    fn ellipsoid_speed_sign() {
        let g = grid(16);
        let s = GraphSurface::ellipsoid(&g, [0.0; 3], [5.0, 5.0, 6.0]).unwrap();
        let sp = speed_field(&s, &InitialDataSet::euclidean(), 2.0).unwrap();
        let integral = integrate(&sp.f, &sp.geo);
        assert!(integral.abs() < 1e-13 * sp.st.hbar * sp.geo.area);
        // tips of the long axis curve more than the equator
        let nphi = g.n_phi();
        let north = sp.f[0];
        let equator = sp.f[(g.n_theta() / 2) * nphi];
        assert!(north > 0.0 && equator < 0.0, "{north} {equator}");
    }

    #[test]
    fn small_step_reduces_deviation() {
        let g = grid(16);
        let ids = InitialDataSet::euclidean();
        let s = GraphSurface::ellipsoid(&g, [0.0; 3], [5.0, 5.0, 6.0]).unwrap();
        let before = speed_field(&s, &ids, 2.0).unwrap();
        let cfg = FlowConfig::new(2.0);
        let dt = stable_dt(&before, &s, 0.5);
        let next = step(&FlowState::new(s), &ids, &cfg, dt).unwrap();
        let after = speed_field(&next.surface, &ids, 2.0).unwrap();
        assert!(lp_norm(&after.f, &after.geo, 2.0) < lp_norm(&before.f, &before.geo, 2.0));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let g = grid(12);
        let ids = InitialDataSet::schwarzschild(1.0);
        let s = GraphSurface::sphere(&g, [0.0; 3], 6.0)
            .unwrap()
            .perturbed(2, 0, 0.05)
            .unwrap();
        let cfg = FlowConfig::new(2.0);
        let run = |n: usize| {
            let dt = 0.4 / n as f64;
            let mut st = FlowState::new(s.clone());
            for _ in 0..n {
                st = step(&st, &ids, &cfg, dt).unwrap();
            }
            st.surface.rho().to_vec()
        };
        let (a, b, c) = (run(2), run(4), run(8));
        let e1 = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let e2 = b.iter().zip(&c).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn ellipsoid_converges_to_round_sphere() {
        let g = grid(16);
        let ids = InitialDataSet::euclidean();
        let s = GraphSurface::ellipsoid(&g, [0.0; 3], [5.0, 5.0, 6.0]).unwrap();
        let mut cfg = FlowConfig::new(2.0);
        cfg.stop_tol = 1e-9;
        let tr = evolve(FlowState::new(s), &ids, &cfg).unwrap();
        assert!(tr.converged, "{:?}", tr.error);
        let first = tr.rows.first().unwrap();
        let last = tr.rows.last().unwrap();
        assert!(last.roundness.osc_h / last.hbar < 1e-6);
        assert!(((last.volume - first.volume) / first.volume).abs() < 1e-6);
        // residual of the limit equation decreases along the trace
        assert!(last.limit_residual < first.limit_residual);
        let geo = geometry(&tr.final_state.surface, &ids).unwrap();
        assert!(geo.nodes.iter().all(|n| n.ao_sq.max(0.0).sqrt() < 1e-6));
    }

    #[test]
    fn identities_converge_at_second_order() {
        let g = grid(32);
        let k = InitialDataSet::schwarzschild_with_k(1.0, 0.05, 2.0, [0.01, 0.0, 0.0]);
        for ids in [InitialDataSet::euclidean(), InitialDataSet::schwarzschild(1.0), k] {
            let s = GraphSurface::ellipsoid(&g, [0.5, 0.0, 0.0], [6.0, 6.0, 7.0]).unwrap();
            let a = evolution_identity_check(&s, &ids, 2.0, 0.04).unwrap();
            let b = evolution_identity_check(&s, &ids, 2.0, 0.02).unwrap();
            for (x, y) in [
                (a.metric, b.metric),
                (a.measure, b.measure),
                (a.mean_curvature, b.mean_curvature),
            ] {
                assert!((x / y - 4.0).abs() < 0.2, "{x} / {y}");
                assert!(y < 1e-3, "{y}");
            }
        }
    }

    #[test]
    fn decay_fit_needs_two_decades() {
        let g = grid(12);
        let s = GraphSurface::sphere(&g, [0.0; 3], 5.0)
            .unwrap()
            .perturbed(2, 0, 0.05)
            .unwrap();
        let mut cfg = FlowConfig::new(2.0);
        cfg.stop_tol = 1e-3;
        let tr = evolve(FlowState::new(s.clone()), &InitialDataSet::euclidean(), &cfg).unwrap();
        assert!(matches!(
            decay_fit(&tr.rows, 0.0, 5.0),
            Err(Error::InsufficientData(_))
        ));
        cfg.stop_tol = 1e-8;
        cfg.report_every = 2;
        let tr = evolve(FlowState::new(s), &InitialDataSet::euclidean(), &cfg).unwrap();
        let fit = decay_fit(&tr.rows, 0.0, 5.0).unwrap();
        assert!(fit.rate < 0.0 && fit.bound == 0.0);
        // pure ℓ = 2 mode in flat space: rate −(6 − 2)/σ²
        assert!((fit.rate + 4.0 / 25.0).abs() < 0.02 * 4.0 / 25.0, "{fit:?}");
    }
}
