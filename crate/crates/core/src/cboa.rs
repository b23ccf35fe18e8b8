//! Ground-state potential-energy surfaces with the photon displacement
//! treated as an adiabatic coordinate: the electronic problem is solved at
//! fixed (R, q) with the displacement coupling added, giving a 2D surface
//! whose critical points, Hessians, and barriers feed transition-state
//! estimates of the cavity-modified rate.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::linalg::eigvalsh;
use crate::shin_metiu::{
    electron_potential, harmonic_fit, ElectronicStructureTable, ShinMetiuParams, Well,
};
use crate::units::{kelvin_to_beta, KB_HARTREE_PER_K};

/// Ground-state surface on an (R, q) grid, with the table that generated it
/// retained for off-grid evaluation.
pub struct CboaSurface {
    r_grid: Grid1D,
    q_nodes: Vec<f64>,
    /// (n_r, n_q)
    v: Mat<f64>,
    pub lambda: f64,
    pub omega_c: f64,
    table: ElectronicStructureTable,
    // column caches of the table for fast interpolation (upper triangle of
    // the dipole matrix, then the surfaces)
    v_cols: Vec<Vec<f64>>,
    mu_cols: Vec<Vec<f64>>,
}

/// Ground eigenvalue of the electronic Hamiltonian projected on the table's
/// states at one R slice, with the photon potential added:
/// min eig[ diag(V_m) + lambda omega q mu ] + omega^2 q^2 / 2.
pub fn ground_energy_projected(
    v_states: &[f64],
    mu: &Mat<f64>,
    lambda: f64,
    omega_c: f64,
    q: f64,
) -> Result<f64> {
    let n = v_states.len();
    if lambda == 0.0 {
        return Ok(v_states[0] + 0.5 * omega_c * omega_c * q * q);
    }
    let c = lambda * omega_c * q;
    let mut h = Mat::<f64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            h[(a, b)] = c * mu[(a, b)];
        }
        h[(a, a)] += v_states[a];
    }
    let vals = eigvalsh(h.as_ref())?;
    Ok(vals[0] + 0.5 * omega_c * omega_c * q * q)
}

/// Default photon-displacement grid: 64 points spanning +-4x the sum of the
/// perturbative displacement and the vacuum spread.
pub fn default_q_grid(table: &ElectronicStructureTable, lambda: f64, omega_c: f64) -> Vec<f64> {
    q_grid_spanning(table, lambda, omega_c, 4.0, 64, 0.0)
}

/// Displacement grid that additionally covers the thermal spread
/// sqrt(kT)/omega_c (needed by the frozen-photon rate average).
pub fn thermal_q_grid(
    table: &ElectronicStructureTable,
    lambda: f64,
    omega_c: f64,
    t_kelvin: f64,
    n: usize,
) -> Vec<f64> {
    let kt = KB_HARTREE_PER_K * t_kelvin;
    q_grid_spanning(table, lambda, omega_c, 5.0, n, 5.0 * kt.sqrt() / omega_c)
}

fn q_grid_spanning(
    table: &ElectronicStructureTable,
    lambda: f64,
    omega_c: f64,
    factor: f64,
    n: usize,
    extra: f64,
) -> Vec<f64> {
    let mu_max = table.mu00().iter().map(|m| m.abs()).fold(0.0f64, f64::max);
    let alpha_max = table.alpha0().iter().cloned().fold(0.0f64, f64::max);
    // the polarizability amplifies the displacement as 1/(1 - lambda^2 alpha)
    let enhance = (1.0 - lambda * lambda * alpha_max).max(0.25);
    let span =
        factor * (lambda * mu_max / (omega_c * enhance) + (0.5 / omega_c).sqrt()).max(1e-12)
            + extra;
    (0..n)
        .map(|i| -span + 2.0 * span * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn cboa_surface(
    table: &ElectronicStructureTable,
    lambda: f64,
    omega_c: f64,
    q_nodes: &[f64],
) -> Result<CboaSurface> {
    if !(omega_c > 0.0) || lambda < 0.0 {
        return Err(Error::InvalidParameter(
            "need omega_c > 0 and lambda >= 0".into(),
        ));
    }
    if q_nodes.len() < 5 {
        return Err(Error::InvalidParameter("q grid too short".into()));
    }
    let mu_max = table.mu00().iter().map(|m| m.abs()).fold(0.0f64, f64::max);
    let q_max = q_nodes.iter().map(|q| q.abs()).fold(0.0f64, f64::max);
    if lambda > 0.0 && q_max < 3.0 * lambda * mu_max / omega_c {
        return Err(Error::InvalidParameter(format!(
            "q grid (|q| <= {q_max:.3}) does not span 3x the perturbative displacement {:.3}",
            lambda * mu_max / omega_c
        )));
    }

    let n_r = table.n_r();
    let n_q = q_nodes.len();
    let rows: Vec<Vec<f64>> = (0..n_r)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let v_states: Vec<f64> = (0..table.n_states).map(|s| table.v_at(i, s)).collect();
            let mu = table.mu_at(i);
            q_nodes
                .iter()
                .map(|&q| ground_energy_projected(&v_states, mu, lambda, omega_c, q))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut v = Mat::<f64>::zeros(n_r, n_q);
    for i in 0..n_r {
        // the in-q minimum must be interior
        let row = &rows[i];
        let mut j_min = 0;
        for j in 0..n_q {
            v[(i, j)] = row[j];
            if row[j] < row[j_min] {
                j_min = j;
            }
        }
        if j_min == 0 || j_min + 1 == n_q {
            return Err(Error::Domain(format!(
                "q minimum at grid edge for R = {:.4}; widen the q grid",
                table.r_nodes()[i]
            )));
        }
    }

    let n_states = table.n_states;
    let v_cols: Vec<Vec<f64>> = (0..n_states).map(|s| table.surface(s)).collect();
    let mut mu_cols = Vec::with_capacity(n_states * (n_states + 1) / 2);
    for a in 0..n_states {
        for b in a..n_states {
            mu_cols.push((0..n_r).map(|i| table.mu_at(i)[(a, b)]).collect());
        }
    }

    Ok(CboaSurface {
        r_grid: table.r_grid().clone(),
        q_nodes: q_nodes.to_vec(),
        v,
        lambda,
        omega_c,
        table: table.clone(),
        v_cols,
        mu_cols,
    })
}

impl CboaSurface {
    pub fn r_grid(&self) -> &Grid1D {
        &self.r_grid
    }

    pub fn r_nodes(&self) -> &[f64] {
        self.r_grid.nodes()
    }

    pub fn q_nodes(&self) -> &[f64] {
        &self.q_nodes
    }

    pub fn values(&self) -> &Mat<f64> {
        &self.v
    }

    pub fn table(&self) -> &ElectronicStructureTable {
        &self.table
    }

    pub fn at(&self, r_index: usize, q_index: usize) -> f64 {
        self.v[(r_index, q_index)]
    }

    /// Fixed-q cut over the nuclear grid.
    pub fn column(&self, q_index: usize) -> Vec<f64> {
        (0..self.r_grid.len())
            .map(|i| self.v[(i, q_index)])
            .collect()
    }

    /// Off-grid evaluation via interpolation of the tabulated electronic
    /// structure (the smooth dipole gauge makes the interpolation valid).
    pub fn eval(&self, r: f64, q: f64) -> Result<f64> {
        let n = self.table.n_states;
        let mut v_states = Vec::with_capacity(n);
        for s in 0..n {
            v_states.push(
                self.r_grid
                    .interpolate(&self.v_cols[s], r)
                    .ok_or_else(|| Error::Domain(format!("R = {r} outside the grid")))?,
            );
        }
        let mut mu = Mat::<f64>::zeros(n, n);
        let mut idx = 0;
        for a in 0..n {
            for b in a..n {
                let val = self
                    .r_grid
                    .interpolate(&self.mu_cols[idx], r)
                    .ok_or_else(|| Error::Domain(format!("R = {r} outside the grid")))?;
                mu[(a, b)] = val;
                mu[(b, a)] = val;
                idx += 1;
            }
        }
        ground_energy_projected(&v_states, &mu, self.lambda, self.omega_c, q)
    }
}

/// Exact dense-grid ground energy at one (R, q) point: the full electron-grid
/// Hamiltonian with the displacement coupling added. The reference the
/// projected surface is validated against.
pub fn exact_ground_energy(
    p: &ShinMetiuParams,
    grid_x: &Grid1D,
    r: f64,
    q: f64,
    lambda: f64,
    omega_c: f64,
) -> Result<f64> {
    let coupling = lambda * omega_c * q;
    let mut v = Vec::with_capacity(grid_x.len());
    for &x in grid_x.nodes() {
        v.push(electron_potential(p, x, r)? + coupling * p.dipole(x, r));
    }
    let h = grid_x.hamiltonian_from_values(1.0, &v);
    let vals = eigvalsh(h.as_ref())?;
    Ok(vals[0] + 0.5 * omega_c * omega_c * q * q)
}

#[derive(Debug, Clone)]
pub struct MinimumPath {
    /// Per-R minimizing displacement.
    pub q_m: Vec<f64>,
    /// Surface value along the path.
    pub v_min: Vec<f64>,
    /// R values whose q profile had more than one local minimum (the global
    /// one was taken).
    pub multiple_minima_at: Vec<f64>,
}

/// Per-R minimization over the displacement, refined off-grid by golden
/// section around the winning node.
pub fn minimum_path(surface: &CboaSurface) -> Result<MinimumPath> {
    let n_r = surface.r_grid.len();
    let n_q = surface.q_nodes.len();
    let mut q_m = Vec::with_capacity(n_r);
    let mut v_min = Vec::with_capacity(n_r);
    let mut multi = Vec::new();
    for i in 0..n_r {
        let mut j_min = 0;
        let mut n_local = 0;
        for j in 0..n_q {
            if surface.v[(i, j)] < surface.v[(i, j_min)] {
                j_min = j;
            }
            if j > 0 && j + 1 < n_q {
                if surface.v[(i, j)] < surface.v[(i, j - 1)]
                    && surface.v[(i, j)] < surface.v[(i, j + 1)]
                {
                    n_local += 1;
                }
            }
        }
        if n_local > 1 {
            multi.push(surface.r_grid.nodes()[i]);
        }
        if j_min == 0 || j_min + 1 == n_q {
            return Err(Error::Domain("q minimum at grid edge".into()));
        }
        let r = surface.r_grid.nodes()[i];
        let spacing = surface.q_nodes[j_min + 1] - surface.q_nodes[j_min];
        let (q_star, v_star) = crate::grid::refine_extremum(
            |q| surface.eval(r, q).unwrap_or(f64::INFINITY),
            surface.q_nodes[j_min],
            spacing,
            1.0,
        );
        q_m.push(q_star);
        v_min.push(v_star);
    }
    Ok(MinimumPath {
        q_m,
        v_min,
        multiple_minima_at: multi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    Minimum,
    Saddle,
    Maximum,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub r: f64,
    pub q: f64,
    pub v: f64,
    /// Unweighted coordinate Hessian [[V_RR, V_Rq], [V_Rq, V_qq]].
    pub hessian: [[f64; 2]; 2],
    pub kind: CriticalKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub minima: Vec<CriticalPoint>,
    pub saddles: Vec<CriticalPoint>,
    /// Saddle energy minus the global minimum energy.
    pub barrier: f64,
}

/// Finite-difference steps for surface derivatives.
fn fd_steps(omega_c: f64) -> (f64, f64) {
    (1e-3, 1e-3 * (1.0 / omega_c).sqrt())
}

fn gradient_hessian(
    surface: &CboaSurface,
    r: f64,
    q: f64,
) -> Result<(f64, [f64; 2], [[f64; 2]; 2])> {
    let (hr, hq) = fd_steps(surface.omega_c);
    let f = |r, q| surface.eval(r, q);
    let f00 = f(r, q)?;
    let fp0 = f(r + hr, q)?;
    let fm0 = f(r - hr, q)?;
    let f0p = f(r, q + hq)?;
    let f0m = f(r, q - hq)?;
    let fpp = f(r + hr, q + hq)?;
    let fpm = f(r + hr, q - hq)?;
    let fmp = f(r - hr, q + hq)?;
    let fmm = f(r - hr, q - hq)?;
    let g = [(fp0 - fm0) / (2.0 * hr), (f0p - f0m) / (2.0 * hq)];
    let h_rr = (fp0 - 2.0 * f00 + fm0) / (hr * hr);
    let h_qq = (f0p - 2.0 * f00 + f0m) / (hq * hq);
    let h_rq = (fpp - fpm - fmp + fmm) / (4.0 * hr * hq);
    Ok((f00, g, [[h_rr, h_rq], [h_rq, h_qq]]))
}

fn classify(h: [[f64; 2]; 2]) -> CriticalKind {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let tr = h[0][0] + h[1][1];
    if det < 0.0 {
        CriticalKind::Saddle
    } else if tr > 0.0 {
        CriticalKind::Minimum
    } else {
        CriticalKind::Maximum
    }
}

fn newton_refine(surface: &CboaSurface, r0: f64, q0: f64) -> Result<CriticalPoint> {
    let mut r = r0;
    let mut q = q0;
    let mut v_prev = f64::MAX;
    for _ in 0..80 {
        let (v, g, h) = gradient_hessian(surface, r, q)?;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::Convergence(format!(
                "singular Hessian at ({r:.5}, {q:.3})"
            )));
        }
        let dr = (g[0] * h[1][1] - g[1] * h[0][1]) / det;
        let dq = (g[1] * h[0][0] - g[0] * h[1][0]) / det;
        r -= dr;
        q -= dq;
        if (v - v_prev).abs() < 1e-10 && dr.abs() < 1e-7 && dq.abs() < 1e-5 {
            let (v, _, h) = gradient_hessian(surface, r, q)?;
            return Ok(CriticalPoint {
                r,
                q,
                v,
                hessian: h,
                kind: classify(h),
            });
        }
        v_prev = v;
    }
    Err(Error::Convergence(format!(
        "critical-point search did not converge; last iterate ({r:.6}, {q:.4})"
    )))
}

/// Newton search from the bare-molecule critical configurations shifted to
/// the per-R displacement minimum.
pub fn critical_points(surface: &CboaSurface) -> Result<CriticalPointReport> {
    let table = &surface.table;
    let mass = table.params.m;
    let left = harmonic_fit(table, mass, Well::Left)?;
    let right = harmonic_fit(table, mass, Well::Right)?;
    let (r_top, _) = crate::shin_metiu::barrier_top(table)?;

    let q_seed = |r: f64| -> f64 {
        let mu = surface.table.mu00_interp(r).unwrap_or(0.0);
        let alpha = surface.table.alpha0_interp(r).unwrap_or(0.0);
        let denom = 1.0 - surface.lambda * surface.lambda * alpha;
        -(surface.lambda / surface.omega_c) * mu / denom.max(0.1)
    };

    let mut minima = Vec::new();
    let mut saddles = Vec::new();
    for (r0, expect_min) in [(left.r0, true), (right.r0, true), (r_top, false)] {
        let cp = newton_refine(surface, r0, q_seed(r0))?;
        match (cp.kind, expect_min) {
            (CriticalKind::Minimum, true) => minima.push(cp),
            (CriticalKind::Saddle, false) => saddles.push(cp),
            (kind, _) => {
                return Err(Error::Convergence(format!(
                    "critical point at ({:.4}, {:.4}) classified as {kind:?}, expected {}",
                    cp.r,
                    cp.q,
                    if expect_min { "minimum" } else { "saddle" }
                )))
            }
        }
    }
    let v_min = minima.iter().map(|m| m.v).fold(f64::MAX, f64::min);
    let barrier = saddles[0].v - v_min;
    Ok(CriticalPointReport {
        minima,
        saddles,
        barrier,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalModeReport {
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// omega_plus - omega_minus.
    pub rabi_splitting: f64,
    /// Zero-point energy (omega_plus + omega_minus)/2.
    pub e_zp: f64,
    /// e_zp minus the uncoupled (omega_c + omega_nu)/2 reference.
    pub zpe_shift: f64,
}

/// Mass-weighted normal modes from the finite-difference Hessian at a
/// minimum of the surface.
pub fn hessian_normal_modes(
    surface: &CboaSurface,
    r: f64,
    q: f64,
    mass: f64,
) -> Result<NormalModeReport> {
    let (_, _, h) = gradient_hessian(surface, r, q)?;
    let m = [
        [h[0][0] / mass, h[0][1] / mass.sqrt()],
        [h[1][0] / mass.sqrt(), h[1][1]],
    ];
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let l1 = tr / 2.0 - disc;
    let l2 = tr / 2.0 + disc;
    if l1 <= 0.0 {
        return Err(Error::Convergence(format!(
            "negative Hessian eigenvalue {l1:.3e} at supposed minimum ({r:.4}, {q:.4})"
        )));
    }
    let omega_minus = l1.sqrt();
    let omega_plus = l2.sqrt();
    let well = if r < 0.0 { Well::Left } else { Well::Right };
    let omega_nu = harmonic_fit(&surface.table, mass, well)?.omega_nu;
    let e_zp = 0.5 * (omega_plus + omega_minus);
    Ok(NormalModeReport {
        omega_plus,
        omega_minus,
        rabi_splitting: omega_plus - omega_minus,
        e_zp,
        zpe_shift: e_zp - 0.5 * (surface.omega_c + omega_nu),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeroPointCorrection {
    /// (sum of positive-mode frequencies at the saddle)/2 minus the
    /// zero-point energy at the global minimum.
    pub delta_zp: f64,
    pub corrected_barrier: f64,
}

/// Zero-point correction of the barrier from the critical-point Hessians,
/// discarding the negative-curvature direction at the saddle.
pub fn zero_point_correction(
    report: &CriticalPointReport,
    mass: f64,
) -> Result<ZeroPointCorrection> {
    let mw_freqs = |cp: &CriticalPoint| -> Vec<f64> {
        let m = [
            [cp.hessian[0][0] / mass, cp.hessian[0][1] / mass.sqrt()],
            [cp.hessian[1][0] / mass.sqrt(), cp.hessian[1][1]],
        ];
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        [tr / 2.0 - disc, tr / 2.0 + disc]
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| l.sqrt())
            .collect()
    };
    let global_min = report
        .minima
        .iter()
        .min_by(|a, b| a.v.partial_cmp(&b.v).unwrap())
        .ok_or_else(|| Error::Convergence("no minimum in report".into()))?;
    let saddle = report
        .saddles
        .first()
        .ok_or_else(|| Error::Convergence("no saddle in report".into()))?;
    let zp_min: f64 = mw_freqs(global_min).iter().sum::<f64>() / 2.0;
    let zp_ts: f64 = mw_freqs(saddle).iter().sum::<f64>() / 2.0;
    let delta_zp = zp_ts - zp_min;
    Ok(ZeroPointCorrection {
        delta_zp,
        corrected_barrier: report.barrier + delta_zp,
    })
}

/// Classical TST rate ratio from a barrier change; the prefactor cancels.
pub fn tst_rate_ratio(e_b_coupled: f64, e_b_bare: f64, t_kelvin: f64) -> f64 {
    (-(e_b_coupled - e_b_bare) * kelvin_to_beta(t_kelvin)).exp()
}

/// Gzipped CSV of (R, q, V) triples; a JSON metadata file goes next to it.
pub fn export_surface(surface: &CboaSurface, path: &std::path::Path) -> Result<()> {
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    let meta = serde_json::json!({
        "lambda": surface.lambda,
        "omega_c": surface.omega_c,
        "r_grid": surface.r_grid.spec(),
        "n_q": surface.q_nodes.len(),
        "n_states": surface.table.n_states,
    });
    std::fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Convergence(format!("metadata serialize: {e}")))?,
    )?;
    let file = std::fs::File::create(path)?;
    let mut gz = GzEncoder::new(file, Compression::default());
    writeln!(gz, "r,q,v")?;
    for (i, &r) in surface.r_grid.nodes().iter().enumerate() {
        for (j, &q) in surface.q_nodes.iter().enumerate() {
            writeln!(
                gz,
                "{},{},{}",
                crate::table_io::format_f64(r),
                crate::table_io::format_f64(q),
                crate::table_io::format_f64(surface.v[(i, j)])
            )?;
        }
    }
    gz.finish()?;
    Ok(())
}

/// Normal-mode frequencies of N molecular oscillators coupled to one photon
/// mode: the Hessian is diag(omega_v^2 x N, omega_c^2) with off-diagonal
/// photon couplings omega_c * lam_dmu_i (mass-weighted dipole derivative
/// times coupling).
pub fn collective_hessian_frequencies(
    omega_v: f64,
    omega_c: f64,
    lam_dmu: &[f64],
) -> Result<Vec<f64>> {
    let n = lam_dmu.len();
    let mut h = Mat::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        h[(i, i)] = omega_v * omega_v;
        h[(i, n)] = omega_c * lam_dmu[i];
        h[(n, i)] = omega_c * lam_dmu[i];
    }
    h[(n, n)] = omega_c * omega_c;
    let vals = eigvalsh(h.as_ref())?;
    vals.iter()
        .map(|&l| {
            if l <= 0.0 {
                Err(Error::Convergence(format!(
                    "collective Hessian eigenvalue {l:.3e} is not positive"
                )))
            } else {
                Ok(l.sqrt())
            }
        })
        .collect()
}
