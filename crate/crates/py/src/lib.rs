//! Python bindings: the model, scans, coupled rates, perturbative shifts,
//! nanogap electrostatics, and ensemble scaling, all behind a thin wrapper.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cavchem::cboa;
use cavchem::collective;
use cavchem::coupled;
use cavchem::error::Error as CoreError;
use cavchem::grid::GridSpec;
use cavchem::npom;
use cavchem::pert;
use cavchem::rates;
use cavchem::shin_metiu as sm;
use cavchem::units;
use cavchem::vec3::Vec3;

fn err(e: CoreError) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn spec_from(t: (f64, f64, usize, usize)) -> GridSpec {
    GridSpec {
        min: t.0,
        max: t.1,
        n_elements: t.2,
        order: t.3,
    }
}

#[pyclass(name = "ShinMetiuParams")]
struct PyParams {
    inner: sm::ShinMetiuParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (z=None, l=None, mass=None, rc=None))]
    fn new(z: Option<f64>, l: Option<f64>, mass: Option<f64>, rc: Option<f64>) -> PyResult<Self> {
        let d = sm::ShinMetiuParams::default();
        let inner = sm::ShinMetiuParams {
            z: z.unwrap_or(d.z),
            l: l.unwrap_or(d.l),
            m: mass.unwrap_or(d.m),
            rc: rc.unwrap_or(d.rc),
        };
        inner.validate().map_err(err)?;
        Ok(PyParams { inner })
    }

    #[getter]
    fn z(&self) -> f64 {
        self.inner.z
    }

    #[getter]
    fn l(&self) -> f64 {
        self.inner.l
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.m
    }

    #[getter]
    fn rc(&self) -> f64 {
        self.inner.rc
    }

    fn __repr__(&self) -> String {
        format!(
            "ShinMetiuParams(z={}, l={}, mass={}, rc={})",
            self.inner.z, self.inner.l, self.inner.m, self.inner.rc
        )
    }
}

#[pyclass(name = "ElectronicStructureTable")]
struct PyTable {
    inner: sm::ElectronicStructureTable,
}

#[pymethods]
impl PyTable {
    fn r_nodes(&self) -> Vec<f64> {
        self.inner.r_nodes().to_vec()
    }

    fn surface(&self, state: usize) -> PyResult<Vec<f64>> {
        if state >= self.inner.n_states {
            return Err(PyValueError::new_err(format!(
                "state {state} out of range ({})",
                self.inner.n_states
            )));
        }
        Ok(self.inner.surface(state))
    }

    fn mu00(&self) -> Vec<f64> {
        self.inner.mu00()
    }

    fn alpha0(&self) -> Vec<f64> {
        self.inner.alpha0().to_vec()
    }

    /// (r0, omega_nu, dmu, mu_v) for the requested well ("left"/"right").
    fn harmonic_fit(&self, well: &str) -> PyResult<(f64, f64, f64, f64)> {
        let fit = sm::harmonic_fit(&self.inner, self.inner.params.m, parse_well(well)?)
            .map_err(err)?;
        Ok((fit.r0, fit.omega_nu, fit.dmu, fit.mu_v))
    }

    fn barrier(&self) -> PyResult<f64> {
        sm::bare_barrier(&self.inner, self.inner.params.m).map_err(err)
    }

    /// Lowest nuclear levels as (energy, side) with side in {-1, 0, +1}.
    fn vibrational_levels(&self, n: usize) -> PyResult<Vec<(f64, i32)>> {
        let levels =
            sm::vibrational_levels(&self.inner, self.inner.params.m, n).map_err(err)?;
        Ok(levels
            .iter()
            .map(|l| {
                let side = match l.side {
                    sm::Side::Left => -1,
                    sm::Side::Right => 1,
                    sm::Side::Delocalized => 0,
                };
                (l.energy, side)
            })
            .collect())
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        cavchem::table_io::write_table(&self.inner, std::path::Path::new(path)).map_err(err)
    }

    /// Ground-surface barrier change of the second-order shifted path
    /// between the left minimum and the transition state.
    fn pert_barrier_change(&self, lambda: f64) -> PyResult<f64> {
        let (r_min, _) = sm::well_minimum(&self.inner, sm::Well::Left).map_err(err)?;
        let (r_top, _) = sm::barrier_top(&self.inner).map_err(err)?;
        let mu_min = self
            .inner
            .mu00_interp(r_min)
            .ok_or_else(|| PyRuntimeError::new_err("interpolation failed"))?;
        let mu_ts = self
            .inner
            .mu00_interp(r_top)
            .ok_or_else(|| PyRuntimeError::new_err("interpolation failed"))?;
        Ok(0.5 * lambda * lambda * (mu_min * mu_min - mu_ts * mu_ts))
    }

    /// Exact cavity Born-Oppenheimer barrier at one coupling.
    #[pyo3(signature = (lambda, omega_c=None))]
    fn cboa_barrier(&self, lambda: f64, omega_c: Option<f64>) -> PyResult<f64> {
        let mass = self.inner.params.m;
        let omega = match omega_c {
            Some(w) => w,
            None => {
                sm::harmonic_fit(&self.inner, mass, sm::Well::Left)
                    .map_err(err)?
                    .omega_nu
            }
        };
        let q = cboa::default_q_grid(&self.inner, lambda.max(1e-4), omega);
        let surface = cboa::cboa_surface(&self.inner, lambda, omega, &q).map_err(err)?;
        Ok(cboa::critical_points(&surface).map_err(err)?.barrier)
    }
}

fn parse_well(s: &str) -> PyResult<sm::Well> {
    match s {
        "left" => Ok(sm::Well::Left),
        "right" => Ok(sm::Well::Right),
        other => Err(PyValueError::new_err(format!(
            "well must be 'left' or 'right', got '{other}'"
        ))),
    }
}

/// Scan the electronic structure over the nuclear grid.
#[pyfunction]
#[pyo3(signature = (params, x_grid, r_grid, n_states=17))]
fn bo_scan(
    params: &PyParams,
    x_grid: (f64, f64, usize, usize),
    r_grid: (f64, f64, usize, usize),
    n_states: usize,
) -> PyResult<PyTable> {
    let gx = spec_from(x_grid).build().map_err(err)?;
    let gr = spec_from(r_grid).build().map_err(err)?;
    let inner = sm::bo_scan(&params.inner, &gx, &gr, n_states).map_err(err)?;
    Ok(PyTable { inner })
}

#[pyclass(name = "MolecularBasis")]
struct PyBasis {
    inner: coupled::MolecularBasis,
}

#[pymethods]
impl PyBasis {
    fn energies(&self) -> Vec<f64> {
        self.inner.energies.clone()
    }

    #[getter]
    fn omega_nu(&self) -> f64 {
        self.inner.omega_nu
    }

    #[getter]
    fn e_cut(&self) -> f64 {
        self.inner.e_cut
    }

    /// Photon-free thermal rate (a.u.).
    #[pyo3(signature = (temperature, t_f_fs=35.0))]
    fn bare_rate(&self, temperature: f64, t_f_fs: f64) -> PyResult<f64> {
        let tg = rates::TimeGrid::default();
        let res = rates::quantum_rate(
            &self.inner.rate_system(),
            temperature,
            units::fs_to_au(t_f_fs),
            &tg,
        )
        .map_err(err)?;
        Ok(res.k)
    }

    /// Coupled thermal rate and its ratio against the bare one.
    #[pyo3(signature = (lambda, temperature, omega_c=None, t_f_fs=35.0))]
    fn coupled_rate(
        &self,
        lambda: f64,
        temperature: f64,
        omega_c: Option<f64>,
        t_f_fs: f64,
    ) -> PyResult<(f64, f64)> {
        let omega = omega_c.unwrap_or(self.inner.omega_nu);
        let tg = rates::TimeGrid::default();
        let t_f = units::fs_to_au(t_f_fs);
        let bare = rates::quantum_rate(&self.inner.rate_system(), temperature, t_f, &tg)
            .map_err(err)?;
        if lambda == 0.0 {
            return Ok((bare.k, 1.0));
        }
        let mu_max = self
            .inner
            .table
            .mu00()
            .iter()
            .map(|m| m.abs())
            .fold(0.0f64, f64::max);
        let n_fock = coupled::n_fock_for(omega, lambda, temperature.max(450.0), mu_max, 8);
        let mode = coupled::CavityMode::new(omega, lambda, n_fock);
        let sys = coupled::coupled_system(&self.inner, &mode, &coupled::CoupledOptions::default())
            .map_err(err)?;
        let rs = sys.rate_system(&self.inner, None);
        let res = rates::quantum_rate(&rs, temperature, t_f, &tg).map_err(err)?;
        Ok((res.k, res.k / bare.k))
    }

    /// Reduced-dimension rate in the fast- or frozen-photon limit
    /// (`limit` in {"high", "low"}).
    #[pyo3(signature = (lambda, omega_c, limit, temperature, t_f_fs=35.0))]
    fn adiabatic_limit_rate(
        &self,
        lambda: f64,
        omega_c: f64,
        limit: &str,
        temperature: f64,
        t_f_fs: f64,
    ) -> PyResult<f64> {
        let which = match limit {
            "high" => rates::AdiabaticLimit::HighFrequency,
            "low" => rates::AdiabaticLimit::LowFrequency,
            other => {
                return Err(PyValueError::new_err(format!(
                    "limit must be 'high' or 'low', got '{other}'"
                )))
            }
        };
        rates::adiabatic_limit_rate(
            &self.inner,
            lambda,
            omega_c,
            which,
            temperature,
            units::fs_to_au(t_f_fs),
            &rates::TimeGrid::default(),
        )
        .map_err(err)
    }
}

/// Build the truncated molecular eigenbasis for rate calculations.
#[pyfunction]
#[pyo3(signature = (params, x_grid, r_grid, n_electronic=8, e_cut_quanta=10.0))]
fn molecular_eigenbasis(
    params: &PyParams,
    x_grid: (f64, f64, usize, usize),
    r_grid: (f64, f64, usize, usize),
    n_electronic: usize,
    e_cut_quanta: f64,
) -> PyResult<PyBasis> {
    let gx = spec_from(x_grid).build().map_err(err)?;
    let gr = spec_from(r_grid).build().map_err(err)?;
    let inner = coupled::molecular_eigenbasis(
        &params.inner,
        &gx,
        &gr,
        coupled::MolecularBasisOptions {
            n_electronic,
            e_cut: coupled::ECut::BarrierMargin {
                quanta: e_cut_quanta,
            },
        },
    )
    .map_err(err)?;
    Ok(PyBasis { inner })
}

/// Second-order shifted path value V0 - lambda^2 mu^2 / 2.
#[pyfunction]
fn pert_path_value(v0: f64, mu0: f64, lambda: f64) -> f64 {
    pert::pert_path_value(v0, mu0, lambda)
}

/// Displacement minimizing the second-order surface.
#[pyfunction]
fn q_min(mu0: f64, alpha0: f64, lambda: f64, omega_c: f64) -> PyResult<f64> {
    pert::q_min_value(mu0, alpha0, lambda, omega_c).map_err(err)
}

/// Effective photon curvature frequency.
#[pyfunction]
fn effective_frequency(alpha0: f64, lambda: f64, omega_c: f64) -> PyResult<f64> {
    pert::effective_frequency(alpha0, lambda, omega_c).map_err(err)
}

/// Vibrational zero-point shift -w_c Omega^2 / (4 w_v (w_c + w_v)).
#[pyfunction]
fn vibrational_zpe_shift(omega_c: f64, omega_v: f64, rabi: f64) -> PyResult<f64> {
    pert::vibrational_zpe_shift(omega_c, omega_v, rabi).map_err(err)
}

/// Multimode static shift: returns (total, debye, london) for a list of
/// (omega, lambda) modes.
#[pyfunction]
fn multimode_shift(mu0: f64, alpha0: f64, modes: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let set = pert::ModeSet(
        modes
            .into_iter()
            .map(|(omega, lambda)| pert::Mode { omega, lambda })
            .collect(),
    );
    let s = pert::multimode_shift(mu0, alpha0, &set).map_err(err)?;
    Ok((s.total, s.debye, s.london))
}

/// Quantized dipole mode of a lossless-metal sphere:
/// (omega_0, mu_eg, alpha_static).
#[pyfunction]
fn drude_sphere_mode(omega_p: f64, radius: f64) -> PyResult<(f64, f64, f64)> {
    let s = pert::sphere_modes(pert::DielectricModel::Drude { omega_p }, radius).map_err(err)?;
    Ok((s.omega_0, s.mu_eg, s.quantized_polarizability(0.0)))
}

/// Induced-field energy of a z dipole in the sphere-on-mirror gap
/// (all lengths in bohr).
#[pyfunction]
#[pyo3(signature = (mu_z, radius, gap, placement_fraction=0.5, tol=1e-10, max_images=10_000))]
fn npom_energy(
    mu_z: f64,
    radius: f64,
    gap: f64,
    placement_fraction: f64,
    tol: f64,
    max_images: usize,
) -> PyResult<f64> {
    let geom = npom::NpomGeometry {
        radius,
        gap,
        molecule: Vec3::Z * (gap * placement_fraction),
    };
    Ok(npom::npom_energy(Vec3::Z * mu_z, &geom, tol, max_images)
        .map_err(err)?
        .u)
}

/// Gap sweep rows as (gap_nm, delta_e_b_ev, lambda_eff, v_eff_nm3).
#[pyfunction]
#[pyo3(signature = (mu_min_z, mu_ts_z, radius_nm, gaps_nm, placement_fraction=0.5))]
fn npom_barrier_sweep(
    mu_min_z: f64,
    mu_ts_z: f64,
    radius_nm: f64,
    gaps_nm: Vec<f64>,
    placement_fraction: f64,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let gaps: Vec<f64> = gaps_nm.iter().map(|&g| units::nm_to_bohr(g)).collect();
    let rows = npom::npom_barrier_sweep(
        Vec3::Z * mu_min_z,
        Vec3::Z * mu_ts_z,
        units::nm_to_bohr(radius_nm),
        &gaps,
        placement_fraction,
        1e-10,
        10_000,
    );
    rows.into_iter()
        .map(|r| {
            let r = r.map_err(err)?;
            Ok((r.gap_nm, r.delta_e_b_ev, r.lambda_eff, r.v_eff_nm3))
        })
        .collect()
}

/// Collective barrier change for the most strongly coupled molecule:
/// (delta_e_b_hartree, weighted form, mean_cos_theta).
#[pyfunction]
#[pyo3(signature = (table, n, sphere_diameter_nm, shell_nm, min_dist_nm, seed=1, aligned=true))]
fn collective_barrier(
    table: &PyTable,
    n: usize,
    sphere_diameter_nm: f64,
    shell_nm: (f64, f64),
    min_dist_nm: f64,
    seed: u64,
    aligned: bool,
) -> PyResult<(f64, f64, f64)> {
    let omega0 = units::ev_to_hartree(3.0);
    let sphere = pert::sphere_modes(
        pert::DielectricModel::Drude {
            omega_p: omega0 * 3.0f64.sqrt(),
        },
        units::nm_to_bohr(sphere_diameter_nm / 2.0),
    )
    .map_err(err)?;
    let policy = if aligned {
        collective::OrientationPolicy::AlignedWithField
    } else {
        collective::OrientationPolicy::Isotropic
    };
    let ens = collective::sample_ensemble(
        n,
        &sphere,
        [units::nm_to_bohr(shell_nm.0), units::nm_to_bohr(shell_nm.1)],
        units::nm_to_bohr(min_dist_nm),
        seed,
        policy,
    )
    .map_err(err)?;
    let idx = collective::most_coupled(&ens);
    let b = collective::collective_barrier(&ens, idx, &table.inner, sm::Well::Left, sm::Well::Left)
        .map_err(err)?;
    Ok((b.delta_e_b, b.delta_e_b_weighted, ens.mean_cos_theta))
}

/// TST ratio exp(-(E_coupled - E_bare)/kT).
#[pyfunction]
fn tst_rate_ratio(e_b_coupled: f64, e_b_bare: f64, temperature: f64) -> f64 {
    cboa::tst_rate_ratio(e_b_coupled, e_b_bare, temperature)
}

#[pymodule]
fn cavchem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HARTREE_EV", units::HARTREE_EV)?;
    m.add("BOHR_NM", units::BOHR_NM)?;
    m.add("KB_HARTREE_PER_K", units::KB_HARTREE_PER_K)?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyBasis>()?;
    m.add_function(wrap_pyfunction!(bo_scan, m)?)?;
    m.add_function(wrap_pyfunction!(molecular_eigenbasis, m)?)?;
    m.add_function(wrap_pyfunction!(pert_path_value, m)?)?;
    m.add_function(wrap_pyfunction!(q_min, m)?)?;
    m.add_function(wrap_pyfunction!(effective_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(vibrational_zpe_shift, m)?)?;
    m.add_function(wrap_pyfunction!(multimode_shift, m)?)?;
    m.add_function(wrap_pyfunction!(drude_sphere_mode, m)?)?;
    m.add_function(wrap_pyfunction!(npom_energy, m)?)?;
    m.add_function(wrap_pyfunction!(npom_barrier_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(collective_barrier, m)?)?;
    m.add_function(wrap_pyfunction!(tst_rate_ratio, m)?)?;
    Ok(())
}
