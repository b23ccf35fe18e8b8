//! One-dimensional charge-transfer model: one electron and one mobile ion
//! between two fixed ions, with softened electron-ion attraction. Provides
//! the bare-molecule electronic structure (surfaces, dipoles, static
//! polarizability), vibrational levels, and harmonic well fits that every
//! other module consumes.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid1D, GridSpec};
use crate::linalg::{eigh, eigvalsh};
use crate::units::angstrom_to_bohr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShinMetiuParams {
    /// Nuclear charge (same for all three ions).
    pub z: f64,
    /// Fixed-ion separation (bohr).
    pub l: f64,
    /// Mobile-ion mass (electron masses).
    pub m: f64,
    /// Softening length of the electron-ion attraction (bohr).
    pub rc: f64,
}

impl Default for ShinMetiuParams {
    fn default() -> Self {
        ShinMetiuParams {
            z: 1.0,
            l: angstrom_to_bohr(10.0),
            m: 1836.0,
            rc: angstrom_to_bohr(1.5),
        }
    }
}

impl ShinMetiuParams {
    pub fn validate(&self) -> Result<()> {
        if self.z <= 0.0 || self.l <= 0.0 || self.m <= 0.0 || self.rc <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "all model constants must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Total dipole along the axis from the mobile charges: Z R - x.
    /// The fixed ions contribute a constant zero by symmetry.
    #[inline]
    pub fn dipole(&self, x: f64, r: f64) -> f64 {
        self.z * r - x
    }
}

/// Default electron grid: x in [-20, 20] bohr, 40 elements of order 8.
pub fn default_electron_grid() -> Grid1D {
    build_grid([-20.0, 20.0], 40, 8).expect("default electron grid")
}

/// Default nuclear grid: R in [-8.5, 8.5] bohr (inside the fixed-ion
/// singularities), 40 elements of order 8.
pub fn default_nuclear_grid() -> Grid1D {
    build_grid([-8.5, 8.5], 40, 8).expect("default nuclear grid")
}

pub fn default_electron_spec() -> GridSpec {
    GridSpec {
        min: -20.0,
        max: 20.0,
        n_elements: 40,
        order: 8,
    }
}

pub fn default_nuclear_spec() -> GridSpec {
    GridSpec {
        min: -8.5,
        max: 8.5,
        n_elements: 40,
        order: 8,
    }
}

/// Default number of retained electronic states.
pub const DEFAULT_N_STATES: usize = 17;

/// erf(r/rc)/r, with the series limit 2/(sqrt(pi) rc) at small r.
#[inline]
pub fn soft_coulomb(r: f64, rc: f64) -> f64 {
    let u = r.abs() / rc;
    if u < 1e-3 {
        let u2 = u * u;
        (2.0 / std::f64::consts::PI.sqrt()) * (1.0 - u2 / 3.0 + u2 * u2 / 10.0) / rc
    } else {
        libm::erf(u) / r.abs()
    }
}

/// Potential felt by the electron at x with the mobile ion at R, plus the
/// bare Coulomb repulsion of the mobile ion against the fixed ones.
pub fn electron_potential(p: &ShinMetiuParams, x: f64, r: f64) -> Result<f64> {
    let half = p.l / 2.0;
    if r.abs() >= half {
        return Err(Error::Domain(format!(
            "mobile ion at R={r} is not strictly between the fixed ions at +-{half}"
        )));
    }
    let z = p.z;
    let repulsion = z * z / (half - r) + z * z / (half + r);
    let attraction = z
        * (soft_coulomb(x - r, p.rc)
            + soft_coulomb(x - half, p.rc)
            + soft_coulomb(x + half, p.rc));
    Ok(repulsion - attraction)
}

/// Electronic eigenpairs at fixed R.
pub struct ElectronicSolution {
    pub r: f64,
    pub energies: Vec<f64>,
    /// Columns are eigenvectors on the electron grid nodes.
    pub states: Mat<f64>,
}

pub fn solve_electronic(
    p: &ShinMetiuParams,
    grid_x: &Grid1D,
    r: f64,
    n_states: usize,
) -> Result<ElectronicSolution> {
    p.validate()?;
    if grid_x.mean_spacing() > p.rc / 4.0 {
        return Err(Error::GridTooCoarse(format!(
            "electron grid spacing {:.3} does not resolve Rc={:.3} (need >= 4 nodes per Rc)",
            grid_x.mean_spacing(),
            p.rc
        )));
    }
    if n_states > grid_x.len() {
        return Err(Error::InvalidParameter(format!(
            "requested {n_states} states from a {}-point grid",
            grid_x.len()
        )));
    }
    let mut v = Vec::with_capacity(grid_x.len());
    for &x in grid_x.nodes() {
        v.push(electron_potential(p, x, r)?);
    }
    let h = grid_x.hamiltonian_from_values(1.0, &v);
    let sol = eigh(h.as_ref())?;
    let n = grid_x.len();
    let mut states = Mat::<f64>::zeros(n, n_states);
    for s in 0..n_states {
        for k in 0..n {
            states[(k, s)] = sol.vectors[(k, s)];
        }
    }
    Ok(ElectronicSolution {
        r,
        energies: sol.values[..n_states].to_vec(),
        states,
    })
}

/// Bare-molecule electronic structure on a nuclear grid: surfaces V_i(R),
/// dipole matrix mu_mn(R) projected on the field axis, and the static
/// polarizability alpha_0(R).
#[derive(Clone)]
pub struct ElectronicStructureTable {
    pub params: ShinMetiuParams,
    pub x_spec: GridSpec,
    pub n_states: usize,
    r_grid: Grid1D,
    /// (n_r, n_states)
    v: Mat<f64>,
    /// per R node, symmetric (n_states, n_states)
    mu: Vec<Mat<f64>>,
    alpha0: Vec<f64>,
}

impl ElectronicStructureTable {
    pub fn r_grid(&self) -> &Grid1D {
        &self.r_grid
    }

    pub fn r_nodes(&self) -> &[f64] {
        self.r_grid.nodes()
    }

    pub fn n_r(&self) -> usize {
        self.r_grid.len()
    }

    pub fn v_at(&self, r_index: usize, state: usize) -> f64 {
        self.v[(r_index, state)]
    }

    pub fn surface(&self, state: usize) -> Vec<f64> {
        (0..self.n_r()).map(|i| self.v[(i, state)]).collect()
    }

    pub fn mu_at(&self, r_index: usize) -> &Mat<f64> {
        &self.mu[r_index]
    }

    pub fn mu00(&self) -> Vec<f64> {
        (0..self.n_r()).map(|i| self.mu[i][(0, 0)]).collect()
    }

    pub fn alpha0(&self) -> &[f64] {
        &self.alpha0
    }

    pub(crate) fn from_parts(
        params: ShinMetiuParams,
        x_spec: GridSpec,
        n_states: usize,
        r_grid: Grid1D,
        v: Mat<f64>,
        mu: Vec<Mat<f64>>,
        alpha0: Vec<f64>,
    ) -> Self {
        ElectronicStructureTable {
            params,
            x_spec,
            n_states,
            r_grid,
            v,
            mu,
            alpha0,
        }
    }

    /// Interpolated ground-surface value at arbitrary R.
    pub fn v0_interp(&self, r: f64) -> Option<f64> {
        let col: Vec<f64> = self.surface(0);
        self.r_grid.interpolate(&col, r)
    }

    /// Interpolated dipole matrix at arbitrary R (relies on the smooth gauge).
    pub fn mu_interp(&self, r: f64) -> Option<Mat<f64>> {
        let n = self.n_states;
        let mut out = Mat::<f64>::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let col: Vec<f64> = (0..self.n_r()).map(|i| self.mu[i][(a, b)]).collect();
                let val = self.r_grid.interpolate(&col, r)?;
                out[(a, b)] = val;
                out[(b, a)] = val;
            }
        }
        Some(out)
    }

    pub fn mu00_interp(&self, r: f64) -> Option<f64> {
        let col = self.mu00();
        self.r_grid.interpolate(&col, r)
    }

    pub fn alpha0_interp(&self, r: f64) -> Option<f64> {
        self.r_grid.interpolate(&self.alpha0, r)
    }

    /// Interpolated excited surfaces at arbitrary R.
    pub fn v_interp(&self, r: f64) -> Option<Vec<f64>> {
        (0..self.n_states)
            .map(|s| {
                let col = self.surface(s);
                self.r_grid.interpolate(&col, r)
            })
            .collect()
    }

    /// Surface ordering invariant: V_i(R) <= V_j(R) for i < j at every R.
    pub fn check_ordering(&self) -> bool {
        for i in 0..self.n_r() {
            for s in 1..self.n_states {
                if self.v[(i, s)] < self.v[(i, s - 1)] {
                    return false;
                }
            }
        }
        true
    }
}

/// Electronic solves over every node of the nuclear grid, gauge-fixed:
/// eigenvector signs maximize overlap with the previous R slice, and the
/// first slice makes its largest-magnitude component positive.
pub fn scan_electronic(
    p: &ShinMetiuParams,
    grid_x: &Grid1D,
    grid_r: &Grid1D,
    n_states: usize,
) -> Result<Vec<ElectronicSolution>> {
    let half = p.l / 2.0;
    let [rmin, rmax] = grid_r.extent();
    if rmin <= -half || rmax >= half {
        return Err(Error::Domain(format!(
            "nuclear grid [{rmin}, {rmax}] reaches the fixed-ion positions +-{half}"
        )));
    }
    let mut slices: Vec<ElectronicSolution> = grid_r
        .nodes()
        .par_iter()
        .map(|&r| {
            solve_electronic(p, grid_x, r, n_states)
                .map_err(|e| Error::Convergence(format!("electronic solve at R={r}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;

    // Gauge pass.
    let nx = grid_x.len();
    for s in 0..n_states {
        let mut idx = 0;
        let mut best = 0.0f64;
        for k in 0..nx {
            if slices[0].states[(k, s)].abs() > best {
                best = slices[0].states[(k, s)].abs();
                idx = k;
            }
        }
        if slices[0].states[(idx, s)] < 0.0 {
            for k in 0..nx {
                slices[0].states[(k, s)] = -slices[0].states[(k, s)];
            }
        }
    }
    for i in 1..slices.len() {
        for s in 0..n_states {
            let mut overlap = 0.0;
            for k in 0..nx {
                overlap += slices[i - 1].states[(k, s)] * slices[i].states[(k, s)];
            }
            if overlap < 0.0 {
                for k in 0..nx {
                    slices[i].states[(k, s)] = -slices[i].states[(k, s)];
                }
            }
        }
    }
    Ok(slices)
}

/// Scan the electronic problem over the nuclear grid and tabulate surfaces,
/// dipoles, and the static polarizability.
pub fn bo_scan(
    p: &ShinMetiuParams,
    grid_x: &Grid1D,
    grid_r: &Grid1D,
    n_states: usize,
) -> Result<ElectronicStructureTable> {
    let slices = scan_electronic(p, grid_x, grid_r, n_states)?;
    Ok(table_from_slices(p, grid_x, grid_r, n_states, &slices))
}

/// Tabulate V_i(R), mu_mn(R), alpha_0(R) from gauge-fixed electronic slices.
pub fn table_from_slices(
    p: &ShinMetiuParams,
    grid_x: &Grid1D,
    grid_r: &Grid1D,
    n_states: usize,
    slices: &[ElectronicSolution],
) -> ElectronicStructureTable {
    let nx = grid_x.len();
    let n_r = grid_r.len();
    let x_nodes = grid_x.nodes();
    let mut v = Mat::<f64>::zeros(n_r, n_states);
    let mut mu = Vec::with_capacity(n_r);
    let mut alpha0 = Vec::with_capacity(n_r);
    for (i, slice) in slices.iter().enumerate() {
        for s in 0..n_states {
            v[(i, s)] = slice.energies[s];
        }
        let mut m = Mat::<f64>::zeros(n_states, n_states);
        for a in 0..n_states {
            for b in a..n_states {
                let mut x_ab = 0.0;
                for k in 0..nx {
                    x_ab += slice.states[(k, a)] * slice.states[(k, b)] * x_nodes[k];
                }
                let mut val = -x_ab;
                if a == b {
                    val += p.z * slice.r;
                }
                m[(a, b)] = val;
                m[(b, a)] = val;
            }
        }
        let mut a0 = 0.0;
        for s in 1..n_states {
            let gap = slice.energies[s] - slice.energies[0];
            a0 += 2.0 * m[(s, 0)] * m[(s, 0)] / gap;
        }
        mu.push(m);
        alpha0.push(a0);
    }

    ElectronicStructureTable {
        params: *p,
        x_spec: grid_x.spec(),
        n_states,
        r_grid: grid_r.clone(),
        v,
        mu,
        alpha0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Delocalized,
}

#[derive(Debug, Clone, Copy)]
pub struct VibLevel {
    pub energy: f64,
    pub side: Side,
    /// Expectation of sign(R) after localization within degenerate pairs.
    pub sign_r: f64,
}

/// Lowest nuclear eigenstates on the ground surface. Quasi-degenerate
/// tunneling pairs are rotated into left/right localized combinations before
/// labeling. Fails if an independent finite-difference discretization
/// disagrees beyond tolerance (grid too coarse).
pub fn vibrational_levels(
    table: &ElectronicStructureTable,
    mass: f64,
    n_levels: usize,
) -> Result<Vec<VibLevel>> {
    let grid = &table.r_grid;
    let v0 = table.surface(0);
    let h = grid.hamiltonian_from_values(mass, &v0);
    let sol = eigh(h.as_ref())?;
    if n_levels > sol.values.len() {
        return Err(Error::InvalidParameter(format!(
            "requested {n_levels} levels from a {}-point grid",
            sol.values.len()
        )));
    }

    // Independent check: second-order finite differences on a uniform grid,
    // potential carried over by high-order interpolation.
    let check = fd_levels(grid, &v0, mass, n_levels.min(6))?;
    for (i, e_fd) in check.iter().enumerate() {
        if (sol.values[i] - e_fd).abs() > 1e-6 {
            return Err(Error::GridTooCoarse(format!(
                "level {i}: DVR {:.9} vs FD {:.9} differ by more than 1e-6 hartree",
                sol.values[i], e_fd
            )));
        }
    }

    // Group quasi-degenerate levels and localize within each group.
    let pair_tol = 1e-7;
    let nodes = grid.nodes();
    let sgn: Vec<f64> = nodes
        .iter()
        .map(|&r| {
            if r > 1e-12 {
                1.0
            } else if r < -1e-12 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();

    let mut levels = Vec::with_capacity(n_levels);
    let mut i = 0;
    while i < n_levels {
        let mut j = i + 1;
        while j < n_levels && sol.values[j] - sol.values[j - 1] < pair_tol {
            j += 1;
        }
        let g = j - i;
        if g == 1 {
            let mut exp = 0.0;
            for k in 0..nodes.len() {
                exp += sol.vectors[(k, i)] * sol.vectors[(k, i)] * sgn[k];
            }
            levels.push(VibLevel {
                energy: sol.values[i],
                side: classify(exp),
                sign_r: exp,
            });
        } else {
            // Diagonalize sign(R) within the degenerate subspace.
            let mut s = Mat::<f64>::zeros(g, g);
            for a in 0..g {
                for b in 0..g {
                    let mut acc = 0.0;
                    for k in 0..nodes.len() {
                        acc += sol.vectors[(k, i + a)] * sol.vectors[(k, i + b)] * sgn[k];
                    }
                    s[(a, b)] = acc;
                }
            }
            let rot = eigh(s.as_ref())?;
            for a in 0..g {
                levels.push(VibLevel {
                    energy: sol.values[i + a],
                    side: classify(rot.values[a]),
                    sign_r: rot.values[a],
                });
            }
        }
        i = j;
    }
    Ok(levels)
}

fn classify(sign_r: f64) -> Side {
    if sign_r < -0.5 {
        Side::Left
    } else if sign_r > 0.5 {
        Side::Right
    } else {
        Side::Delocalized
    }
}

/// Fundamental vibrational transition: gap between the first two
/// quasi-degenerate groups.
pub fn fundamental_transition(levels: &[VibLevel]) -> Result<f64> {
    if levels.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least 3 levels for the fundamental".into(),
        ));
    }
    let pair_tol = 1e-6;
    let e0 = levels[0].energy;
    let mut g0_end = 1;
    while g0_end < levels.len() && levels[g0_end].energy - levels[g0_end - 1].energy < pair_tol {
        g0_end += 1;
    }
    if g0_end >= levels.len() {
        return Err(Error::Convergence("no excited group found".into()));
    }
    let g0_mean: f64 =
        levels[..g0_end].iter().map(|l| l.energy).sum::<f64>() / g0_end as f64;
    let mut g1_end = g0_end + 1;
    while g1_end < levels.len() && levels[g1_end].energy - levels[g1_end - 1].energy < pair_tol {
        g1_end += 1;
    }
    let g1_mean: f64 = levels[g0_end..g1_end].iter().map(|l| l.energy).sum::<f64>()
        / (g1_end - g0_end) as f64;
    let _ = e0;
    Ok(g1_mean - g0_mean)
}

fn fd_levels(grid: &Grid1D, v: &[f64], mass: f64, n: usize) -> Result<Vec<f64>> {
    // Second-order finite differences at two spacings, Richardson
    // extrapolated to kill the leading h^2 error.
    let coarse = fd_levels_at(grid, v, mass, n, 0.02)?;
    let fine = fd_levels_at(grid, v, mass, n, 0.01)?;
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect())
}

fn fd_levels_at(grid: &Grid1D, v: &[f64], mass: f64, n: usize, h: f64) -> Result<Vec<f64>> {
    let [lo, hi] = grid.extent();
    let m = ((hi - lo) / h).round() as usize;
    let h = (hi - lo) / m as f64;
    let npts = m - 1;
    let mut ham = Mat::<f64>::zeros(npts, npts);
    let t = 1.0 / (2.0 * mass * h * h);
    for i in 0..npts {
        let x = lo + (i + 1) as f64 * h;
        let vx = grid
            .interpolate(v, x)
            .ok_or_else(|| Error::Domain("FD point outside grid".into()))?;
        ham[(i, i)] = 2.0 * t + vx;
        if i + 1 < npts {
            ham[(i, i + 1)] = -t;
            ham[(i + 1, i)] = -t;
        }
    }
    let vals = eigvalsh(ham.as_ref())?;
    Ok(vals[..n].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Well {
    Left,
    Right,
}

/// Harmonic expansion of the ground surface around one well minimum.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicFit {
    /// Minimum position (bohr).
    pub r0: f64,
    /// Well depth reference V_0(r0) (hartree).
    pub v0: f64,
    /// Vibrational frequency from the curvature (hartree).
    pub omega_nu: f64,
    /// Dipole derivative mu'_0(r0) (a.u./bohr).
    pub dmu: f64,
    /// Vibrational transition dipole mu'_0(r0) / sqrt(2 M omega).
    pub mu_v: f64,
}

impl HarmonicFit {
    /// On-resonance Rabi splitting lambda * mu'_0(R0) / sqrt(M).
    pub fn rabi_splitting(&self, lambda: f64, mass: f64) -> f64 {
        lambda * self.dmu.abs() / mass.sqrt()
    }
}

pub fn harmonic_fit(
    table: &ElectronicStructureTable,
    mass: f64,
    well: Well,
) -> Result<HarmonicFit> {
    let nodes = table.r_nodes();
    let v0 = table.surface(0);
    let mu00 = table.mu00();

    // Locate the requested well's minimum node.
    let mut best: Option<(usize, f64)> = None;
    for (i, (&r, &v)) in nodes.iter().zip(&v0).enumerate() {
        let on_side = match well {
            Well::Left => r < 0.0,
            Well::Right => r > 0.0,
        };
        if on_side && best.map_or(true, |(_, bv)| v < bv) {
            best = Some((i, v));
        }
    }
    let (i_min, _) = best.ok_or_else(|| Error::Domain("no nodes on requested side".into()))?;
    let r_node = nodes[i_min];

    let window = 0.9;
    let [lo, hi] = table.r_grid.extent();
    if r_node - window < lo || r_node + window > hi {
        return Err(Error::Domain(format!(
            "well minimum at R={r_node:.3} sits too close to the grid edge for a fit"
        )));
    }
    let sel: Vec<usize> = (0..nodes.len())
        .filter(|&i| (nodes[i] - r_node).abs() <= window)
        .collect();
    if sel.len() < 7 {
        return Err(Error::GridTooCoarse(
            "fewer than 7 nodes in the fit window".into(),
        ));
    }

    // Quartic fit of V_0, cubic fit of mu_00, both centered on the node.
    let vfit = polyfit(&sel, nodes, &v0, r_node, 4)?;
    let mut r0 = r_node;
    for _ in 0..60 {
        let d1 = polyderiv(&vfit, r0 - r_node, 1);
        let d2 = polyderiv(&vfit, r0 - r_node, 2);
        let step = d1 / d2;
        r0 -= step;
        if step.abs() < 1e-13 {
            break;
        }
    }
    let curv = polyderiv(&vfit, r0 - r_node, 2);
    if curv <= 0.0 {
        return Err(Error::Convergence(format!(
            "non-positive curvature {curv} at fitted minimum"
        )));
    }
    let omega_nu = (curv / mass).sqrt();
    let v_min = polyderiv(&vfit, r0 - r_node, 0);

    let mfit = polyfit(&sel, nodes, &mu00, r_node, 3)?;
    let dmu = polyderiv(&mfit, r0 - r_node, 1);
    let mu_v = dmu / (2.0 * mass * omega_nu).sqrt();

    Ok(HarmonicFit {
        r0,
        v0: v_min,
        omega_nu,
        dmu,
        mu_v,
    })
}

/// Barrier top between the two wells of the ground surface: position and
/// value, parabolically refined.
pub fn barrier_top(table: &ElectronicStructureTable) -> Result<(f64, f64)> {
    let nodes = table.r_nodes();
    let v0 = table.surface(0);
    let left = harmonic_fit(table, 1.0, Well::Left)?; // mass irrelevant for position
    let right = harmonic_fit(table, 1.0, Well::Right)?;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..nodes.len() {
        if nodes[i] > left.r0 && nodes[i] < right.r0 {
            if best.map_or(true, |(_, bv)| v0[i] > bv) {
                best = Some((i, v0[i]));
            }
        }
    }
    let (i_top, _) = best.ok_or_else(|| Error::Domain("no nodes between the wells".into()))?;
    if i_top == 0 || i_top + 1 >= nodes.len() {
        return Err(Error::Domain("barrier top at grid edge".into()));
    }
    let h = (nodes[i_top + 1] - nodes[i_top - 1]) / 2.0;
    Ok(crate::grid::refine_extremum(
        |r| table.v0_interp(r).unwrap_or(f64::NEG_INFINITY),
        nodes[i_top],
        h,
        -1.0,
    ))
}

/// Refined well minimum of the ground surface: position and value on the
/// interpolated surface.
pub fn well_minimum(table: &ElectronicStructureTable, well: Well) -> Result<(f64, f64)> {
    let nodes = table.r_nodes();
    let v0 = table.surface(0);
    let mut best: Option<usize> = None;
    for i in 0..nodes.len() {
        let on_side = match well {
            Well::Left => nodes[i] < 0.0,
            Well::Right => nodes[i] > 0.0,
        };
        if on_side && best.map_or(true, |j| v0[i] < v0[j]) {
            best = Some(i);
        }
    }
    let i = best.ok_or_else(|| Error::Domain("no nodes on requested side".into()))?;
    if i == 0 || i + 1 >= nodes.len() {
        return Err(Error::Domain("well minimum at grid edge".into()));
    }
    let h = (nodes[i + 1] - nodes[i - 1]) / 2.0;
    Ok(crate::grid::refine_extremum(
        |r| table.v0_interp(r).unwrap_or(f64::INFINITY),
        nodes[i],
        h,
        1.0,
    ))
}

/// Bare barrier height: V(top) - V(deepest minimum), both refined on the
/// interpolated surface.
pub fn bare_barrier(table: &ElectronicStructureTable, _mass: f64) -> Result<f64> {
    let (_, v_top) = barrier_top(table)?;
    let (_, v_left) = well_minimum(table, Well::Left)?;
    let (_, v_right) = well_minimum(table, Well::Right)?;
    Ok(v_top - v_left.min(v_right))
}

fn polyfit(
    sel: &[usize],
    xs: &[f64],
    ys: &[f64],
    center: f64,
    degree: usize,
) -> Result<Vec<f64>> {
    let n = sel.len();
    let cols = degree + 1;
    let mut a = Mat::<f64>::zeros(n, cols);
    let mut b = vec![0.0; n];
    for (row, &i) in sel.iter().enumerate() {
        let dx = xs[i] - center;
        let mut p = 1.0;
        for c in 0..cols {
            a[(row, c)] = p;
            p *= dx;
        }
        b[row] = ys[i];
    }
    // Normal equations are adequate for these tiny, well-scaled systems.
    let mut ata = Mat::<f64>::zeros(cols, cols);
    let mut atb = vec![0.0; cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut s = 0.0;
            for r in 0..n {
                s += a[(r, i)] * a[(r, j)];
            }
            ata[(i, j)] = s;
        }
        let mut s = 0.0;
        for r in 0..n {
            s += a[(r, i)] * b[r];
        }
        atb[i] = s;
    }
    solve_small(&mut ata, &mut atb)?;
    Ok(atb)
}

fn solve_small(a: &mut Mat<f64>, b: &mut [f64]) -> Result<()> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[(r, col)].abs() > a[(piv, col)].abs() {
                piv = r;
            }
        }
        if a[(piv, col)].abs() < 1e-300 {
            return Err(Error::Convergence("singular fit matrix".into()));
        }
        if piv != col {
            for c in 0..n {
                let tmp = a[(col, c)];
                a[(col, c)] = a[(piv, c)];
                a[(piv, c)] = tmp;
            }
            b.swap(col, piv);
        }
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[(col, c)] * b[c];
        }
        b[col] = s / a[(col, col)];
    }
    Ok(())
}

fn polyderiv(coeffs: &[f64], dx: f64, order: usize) -> f64 {
    let mut total = 0.0;
    for (k, &c) in coeffs.iter().enumerate() {
        if k < order {
            continue;
        }
        let mut factor = 1.0;
        for j in 0..order {
            factor *= (k - j) as f64;
        }
        total += c * factor * dx.powi((k - order) as i32);
    }
    total
}
