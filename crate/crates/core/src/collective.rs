//! Many-molecule collective physics around a nanosphere: seeded random
//! placement in a shell, per-molecule couplings to the sphere's z-oriented
//! dipole mode, the collective square-term surface and barrier shifts, and
//! the direct dipole-dipole energy budget.

use rand::{RngExt, SeedableRng};
use rand::rngs::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pert::SphereMode;
use crate::shin_metiu::{well_minimum, ElectronicStructureTable, Well};
use crate::units::kelvin_to_beta;
use crate::vec3::{dipole_dipole_energy, dipole_field, Vec3};

/// N molecules around the sphere: positions, axis orientations, couplings to
/// the z dipole mode, and the derived alignment statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ensemble {
    pub positions: Vec<Vec3>,
    /// Molecular axis unit vectors (direction of positive molecular dipole).
    pub orientations: Vec<Vec3>,
    /// Coupling magnitudes lambda_i (a.u.).
    pub couplings: Vec<f64>,
    /// cos(theta_i): molecular axis against the local mode field.
    pub cos_theta: Vec<f64>,
    /// Mean coupling.
    pub mean_coupling: f64,
    /// lambda_i / mean.
    pub relative_couplings: Vec<f64>,
    /// Coupling-weighted mean alignment (1/N) sum lambda_r,i cos theta_i.
    pub mean_cos_theta: f64,
    pub seed: u64,
    pub sphere_radius: f64,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::MAX;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.min((self.positions[i] - self.positions[j]).norm());
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrientationPolicy {
    /// Axis along the local z-dipole-mode field.
    AlignedWithField,
    /// Axes alternate with/against the local field, canceling the
    /// coupling-weighted alignment exactly.
    AntisymmetricPairs,
    /// Uniformly random directions.
    Isotropic,
}

/// Local field direction of the sphere's z-oriented dipole mode.
fn mode_field_direction(at: Vec3) -> Vec3 {
    dipole_field(Vec3::Z, Vec3::ZERO, at).normalized()
}

/// Seeded rejection sampling of N points in a radial shell around the sphere
/// with a minimum pairwise distance; a cell grid keeps checks local.
pub fn sample_ensemble(
    n: usize,
    sphere_mode: &SphereMode,
    shell_from_surface: [f64; 2],
    min_dist: f64,
    seed: u64,
    orientation: OrientationPolicy,
) -> Result<Ensemble> {
    let a = sphere_mode.radius;
    let r_in = a + shell_from_surface[0];
    let r_out = a + shell_from_surface[1];
    if !(r_out > r_in) || !(r_in > a) || min_dist < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bad shell [{r_in}, {r_out}] around sphere radius {a}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // cell grid over the bounding cube
    let cell = min_dist.max(1e-9);
    let half_box = r_out + cell;
    let n_cells = ((2.0 * half_box) / cell).ceil() as i64;
    let key = |p: Vec3| -> (i64, i64, i64) {
        (
            (((p.x + half_box) / cell) as i64).clamp(0, n_cells - 1),
            (((p.y + half_box) / cell) as i64).clamp(0, n_cells - 1),
            (((p.z + half_box) / cell) as i64).clamp(0, n_cells - 1),
        )
    };
    let mut grid: std::collections::HashMap<(i64, i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    let mut positions: Vec<Vec3> = Vec::with_capacity(n);

    let budget = 5000usize.saturating_mul(n).max(100_000);
    let mut attempts = 0usize;
    while positions.len() < n {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Packing {
                achieved: positions.len(),
                requested: n,
            });
        }
        // uniform in shell volume
        let u: f64 = rng.random();
        let r = (u * (r_out.powi(3) - r_in.powi(3)) + r_in.powi(3)).cbrt();
        let cos_t: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let sin_t = (1.0f64 - cos_t * cos_t).max(0.0).sqrt();
        let p = Vec3 {
            x: r * sin_t * phi.cos(),
            y: r * sin_t * phi.sin(),
            z: r * cos_t,
        };
        let (kx, ky, kz) = key(p);
        let mut ok = true;
        'check: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &j in list {
                            if (positions[j] - p).norm() < min_dist {
                                ok = false;
                                break 'check;
                            }
                        }
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        grid.entry((kx, ky, kz)).or_default().push(positions.len());
        positions.push(p);
    }

    let orientations: Vec<Vec3> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let f = mode_field_direction(p);
            match orientation {
                OrientationPolicy::AlignedWithField => f,
                OrientationPolicy::AntisymmetricPairs => {
                    if i % 2 == 0 {
                        f
                    } else {
                        -f
                    }
                }
                OrientationPolicy::Isotropic => loop {
                    let v = Vec3 {
                        x: rng.random_range(-1.0..=1.0),
                        y: rng.random_range(-1.0..=1.0),
                        z: rng.random_range(-1.0..=1.0),
                    };
                    let n2 = v.norm2();
                    if n2 > 1e-6 && n2 <= 1.0 {
                        break v.normalized();
                    }
                },
            }
        })
        .collect();

    let (couplings, cos_theta) = mode_couplings(&positions, &orientations, sphere_mode)?;
    Ok(assemble(
        positions,
        orientations,
        couplings,
        cos_theta,
        seed,
        a,
    ))
}

fn assemble(
    positions: Vec<Vec3>,
    orientations: Vec<Vec3>,
    couplings: Vec<f64>,
    cos_theta: Vec<f64>,
    seed: u64,
    sphere_radius: f64,
) -> Ensemble {
    let n = positions.len();
    let mean_coupling = couplings.iter().sum::<f64>() / n as f64;
    let relative_couplings: Vec<f64> =
        couplings.iter().map(|&l| l / mean_coupling).collect();
    let mean_cos_theta = relative_couplings
        .iter()
        .zip(&cos_theta)
        .map(|(lr, c)| lr * c)
        .sum::<f64>()
        / n as f64;
    Ensemble {
        positions,
        orientations,
        couplings,
        cos_theta,
        mean_coupling,
        relative_couplings,
        mean_cos_theta,
        seed,
        sphere_radius,
    }
}

/// Per-molecule coupling magnitudes and alignment cosines against the
/// sphere's z-oriented dipole mode.
pub fn mode_couplings(
    positions: &[Vec3],
    orientations: &[Vec3],
    sphere: &SphereMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut couplings = Vec::with_capacity(positions.len());
    let mut cos_theta = Vec::with_capacity(positions.len());
    let pref = (2.0 / sphere.omega_0).sqrt() * sphere.mu_eg;
    for (p, n) in positions.iter().zip(orientations) {
        let r = p.norm();
        if r <= sphere.radius {
            return Err(Error::Domain(format!(
                "molecule at r = {r:.3} inside the sphere radius {:.3}",
                sphere.radius
            )));
        }
        let field = dipole_field(Vec3::Z, Vec3::ZERO, *p);
        couplings.push(pref * field.norm());
        cos_theta.push(n.dot(field.normalized()));
    }
    Ok((couplings, cos_theta))
}

/// Signed dipole projections of the non-reacting molecules at a declared
/// well configuration.
fn rest_field_sum(ens: &Ensemble, reacting: usize, mu_at_config: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..ens.len() {
        if i == reacting {
            continue;
        }
        s += ens.couplings[i] * mu_at_config * ens.cos_theta[i];
    }
    s
}

/// Effective 1D surface of the reacting molecule with the collective square
/// term: V(R) = V_0(R) - ((lam_1 mu_eps(R) + S)^2 - S^2)/2, where S collects
/// the fixed molecules.
pub fn collective_pes(
    ens: &Ensemble,
    reacting: usize,
    table: &ElectronicStructureTable,
    others_well: Well,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if reacting >= ens.len() {
        return Err(Error::InvalidParameter(format!(
            "reacting index {reacting} out of range"
        )));
    }
    let (r_min, _) = well_minimum(table, others_well)?;
    let mu_config = table
        .mu00_interp(r_min)
        .ok_or_else(|| Error::Domain("well minimum outside table".into()))?;
    let s_rest = rest_field_sum(ens, reacting, mu_config);
    let lam1 = ens.couplings[reacting];
    let c1 = ens.cos_theta[reacting];
    let mu00 = table.mu00();
    let v0 = table.surface(0);
    let v_eff: Vec<f64> = v0
        .iter()
        .zip(&mu00)
        .map(|(&v, &mu)| {
            let total = lam1 * mu * c1 + s_rest;
            v - 0.5 * (total * total - s_rest * s_rest)
        })
        .collect();
    Ok((table.r_nodes().to_vec(), v_eff))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectiveBarrier {
    /// Barrier change from the explicit square-term expression (hartree).
    pub delta_e_b: f64,
    /// Same quantity via the alignment-factored form; equal by algebra.
    pub delta_e_b_weighted: f64,
    /// Single-molecule (self) part of the change.
    pub self_term: f64,
    /// Cavity-mediated cross part of the change.
    pub cross_term: f64,
    pub e_b_bare: f64,
    pub e_b_coupled: f64,
}

/// Barrier change for one reacting molecule with the rest pinned at a well:
/// the explicit expression and its alignment-weighted rewriting, both
/// reported.
pub fn collective_barrier(
    ens: &Ensemble,
    reacting: usize,
    table: &ElectronicStructureTable,
    reactant_well: Well,
    others_well: Well,
) -> Result<CollectiveBarrier> {
    if reacting >= ens.len() {
        return Err(Error::InvalidParameter(format!(
            "reacting index {reacting} out of range"
        )));
    }
    let (r_react, v_react) = well_minimum(table, reactant_well)?;
    let (r_top, v_top) = crate::shin_metiu::barrier_top(table)?;
    let (r_others, _) = well_minimum(table, others_well)?;
    let mu_min = table
        .mu00_interp(r_react)
        .ok_or_else(|| Error::Domain("reactant minimum outside table".into()))?;
    let mu_ts = table
        .mu00_interp(r_top)
        .ok_or_else(|| Error::Domain("barrier top outside table".into()))?;
    let mu_others = table
        .mu00_interp(r_others)
        .ok_or_else(|| Error::Domain("others' minimum outside table".into()))?;

    let lam1 = ens.couplings[reacting];
    let c1 = ens.cos_theta[reacting];
    let mu1_min = mu_min * c1;
    let mu1_ts = mu_ts * c1;
    let e_b_bare = v_top - v_react;

    // explicit form
    let s_rest = rest_field_sum(ens, reacting, mu_others);
    let self_term = -0.5 * lam1 * lam1 * (mu1_ts * mu1_ts - mu1_min * mu1_min);
    let cross_term = -lam1 * s_rest * (mu1_ts - mu1_min);
    let delta_e_b = self_term + cross_term;

    // alignment-weighted form: N' lam_bar^2 <cos>' |mu| lam_r,1 (...)
    let n = ens.len();
    let n_rest = (n - 1) as f64;
    let mean_cos_rest = (0..n)
        .filter(|&i| i != reacting)
        .map(|i| ens.relative_couplings[i] * ens.cos_theta[i])
        .sum::<f64>()
        / n_rest;
    let cross_weighted = -n_rest
        * ens.mean_coupling
        * ens.mean_coupling
        * mean_cos_rest
        * mu_others
        * ens.relative_couplings[reacting]
        * (mu1_ts - mu1_min);
    let delta_weighted = self_term + cross_weighted;

    Ok(CollectiveBarrier {
        delta_e_b,
        delta_e_b_weighted: delta_weighted,
        self_term,
        cross_term,
        e_b_bare,
        e_b_coupled: e_b_bare + delta_e_b,
    })
}

/// Index of the most strongly coupled molecule.
pub fn most_coupled(ens: &Ensemble) -> usize {
    let mut best = 0;
    for i in 1..ens.len() {
        if ens.couplings[i] > ens.couplings[best] {
            best = i;
        }
    }
    best
}

/// Direct pairwise dipole-dipole energy with every molecule at the declared
/// configuration (sequential sum for bit-stable results).
pub fn dipole_dipole_sum(ens: &Ensemble, mu_at_config: f64) -> Result<f64> {
    let n = ens.len();
    let mus: Vec<Vec3> = (0..n)
        .map(|i| ens.orientations[i] * mu_at_config)
        .collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (ens.positions[i] - ens.positions[j]).norm();
            if d < 1e-9 {
                return Err(Error::Domain("coincident molecules".into()));
            }
            total += dipole_dipole_energy(mus[i], ens.positions[i], mus[j], ens.positions[j]);
        }
    }
    Ok(total)
}

/// Cavity-mediated collective energy: -(sum_i lambda_i mu_eps,i)^2 / 2.
pub fn dipole_sphere_energy(ens: &Ensemble, mu_at_config: f64) -> f64 {
    let s: f64 = (0..ens.len())
        .map(|i| ens.couplings[i] * mu_at_config * ens.cos_theta[i])
        .sum();
    -0.5 * s * s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyRow {
    pub n: usize,
    pub seed: u64,
    pub e_ds: f64,
    pub e_dd: f64,
    pub e_tot: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectiveEnergyReport {
    pub rows: Vec<EnergyRow>,
    /// Per-N (n, mean e_ds, mean e_dd, mean e_tot) over realizations.
    pub means: Vec<(usize, f64, f64, f64)>,
}

/// Dipole-sphere vs dipole-dipole decomposition over molecule counts and
/// seeded realizations.
pub fn energy_decomposition(
    n_list: &[usize],
    seeds: &[u64],
    sphere: &SphereMode,
    shell_from_surface: [f64; 2],
    min_dist: f64,
    mu_at_config: f64,
    orientation: OrientationPolicy,
) -> Result<CollectiveEnergyReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        for &seed in seeds {
            let ens = sample_ensemble(n, sphere, shell_from_surface, min_dist, seed, orientation)?;
            let e_ds = dipole_sphere_energy(&ens, mu_at_config);
            let e_dd = dipole_dipole_sum(&ens, mu_at_config)?;
            rows.push(EnergyRow {
                n,
                seed,
                e_ds,
                e_dd,
                e_tot: e_ds + e_dd,
            });
        }
    }
    let means = n_list
        .iter()
        .map(|&n| {
            let sel: Vec<&EnergyRow> = rows.iter().filter(|r| r.n == n).collect();
            let c = sel.len() as f64;
            (
                n,
                sel.iter().map(|r| r.e_ds).sum::<f64>() / c,
                sel.iter().map(|r| r.e_dd).sum::<f64>() / c,
                sel.iter().map(|r| r.e_tot).sum::<f64>() / c,
            )
        })
        .collect();
    Ok(CollectiveEnergyReport { rows, means })
}

/// TST suppression factor for a barrier change at temperature T.
pub fn rate_factor(delta_e_b: f64, t_kelvin: f64) -> f64 {
    (-delta_e_b * kelvin_to_beta(t_kelvin)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pert::{sphere_modes, DielectricModel};
    use crate::units::{ev_to_hartree, nm_to_bohr};
    use crate::vec3::vec3;

    fn test_sphere() -> SphereMode {
        // 4 nm radius, mode at 3 eV (presentation-only; cancels in Debye terms)
        let omega_0 = ev_to_hartree(3.0);
        let omega_p = omega_0 * 3.0f64.sqrt();
        sphere_modes(DielectricModel::Drude { omega_p }, nm_to_bohr(4.0)).unwrap()
    }

    #[test]
    fn single_molecule_in_shell() {
        let s = test_sphere();
        let ens = sample_ensemble(
            1,
            &s,
            [nm_to_bohr(1.0), nm_to_bohr(16.0)],
            nm_to_bohr(1.5),
            7,
            OrientationPolicy::AlignedWithField,
        )
        .unwrap();
        assert_eq!(ens.len(), 1);
        let r = ens.positions[0].norm();
        assert!(r >= s.radius + nm_to_bohr(1.0) && r <= s.radius + nm_to_bohr(16.0));
        assert!((ens.cos_theta[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_distances_respected_and_deterministic() {
        let s = test_sphere();
        let shell = [nm_to_bohr(1.0), nm_to_bohr(16.0)];
        let md = nm_to_bohr(1.5);
        let a = sample_ensemble(200, &s, shell, md, 42, OrientationPolicy::AlignedWithField)
            .unwrap();
        assert!(a.min_pair_distance() >= md);
        let b = sample_ensemble(200, &s, shell, md, 42, OrientationPolicy::AlignedWithField)
            .unwrap();
        for i in 0..200 {
            assert!((a.positions[i] - b.positions[i]).norm() == 0.0);
            assert!(a.couplings[i] == b.couplings[i]);
        }
        let c = sample_ensemble(200, &s, shell, md, 43, OrientationPolicy::AlignedWithField)
            .unwrap();
        assert!((a.positions[0] - c.positions[0]).norm() > 0.0);
    }

    #[test]
    fn packing_budget_error_reports_achieved() {
        let s = test_sphere();
        // unsatisfiable: thousands of molecules with a huge exclusion radius
        let err = sample_ensemble(
            5000,
            &s,
            [nm_to_bohr(1.0), nm_to_bohr(2.0)],
            nm_to_bohr(5.0),
            1,
            OrientationPolicy::AlignedWithField,
        );
        match err {
            Err(Error::Packing { achieved, requested }) => {
                assert!(achieved < requested);
            }
            other => panic!("expected packing error, got {other:?}"),
        }
    }

    #[test]
    fn on_axis_and_equatorial_coupling_factors() {
        let s = test_sphere();
        let r = s.radius * 3.0;
        let pref = (2.0 / s.omega_0).sqrt() * s.mu_eg;
        let (l, c) = mode_couplings(&[vec3(0.0, 0.0, r)], &[Vec3::Z], &s).unwrap();
        assert!((l[0] - pref * 2.0 / r.powi(3)).abs() < 1e-15 * l[0]);
        assert!((c[0] - 1.0).abs() < 1e-12);
        // equatorial: field factor 1/r^3, antiparallel to z
        let (l, c) = mode_couplings(&[vec3(r, 0.0, 0.0)], &[Vec3::Z], &s).unwrap();
        assert!((l[0] - pref / r.powi(3)).abs() < 1e-15 * l[0]);
        assert!((c[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_matches_perpendicular_mode_expression() {
        // lambda_i from the field formula equals sqrt(2/w) mu_eg / r^3 in the
        // perpendicular placement, the same expression the multimode shift
        // uses.
        let s = test_sphere();
        let r = s.radius * 5.0;
        let (l, _) = mode_couplings(&[vec3(r, 0.0, 0.0)], &[Vec3::Z], &s).unwrap();
        let modes = s.couplings_at(vec3(r, 0.0, 0.0), Vec3::Z).unwrap();
        // z mode is the only contributor there
        let lambda_z = modes.0[2].lambda;
        assert!((l[0] - lambda_z).abs() < 1e-15 * lambda_z);
    }

    #[test]
    fn molecule_inside_sphere_rejected() {
        let s = test_sphere();
        assert!(mode_couplings(&[vec3(0.0, 0.0, s.radius * 0.5)], &[Vec3::Z], &s).is_err());
    }

    #[test]
    fn collective_shift_depends_on_coherent_sum() {
        // two ensembles with equal sum lambda^2 mu^2 but different
        // (sum lambda mu)^2 give different collective energies
        let s = test_sphere();
        let base = sample_ensemble(
            8,
            &s,
            [nm_to_bohr(1.0), nm_to_bohr(6.0)],
            nm_to_bohr(1.5),
            11,
            OrientationPolicy::AlignedWithField,
        )
        .unwrap();
        let mut flipped = base.clone();
        for i in (0..8).step_by(2) {
            flipped.cos_theta[i] = -flipped.cos_theta[i];
        }
        let mu = 2.3;
        let sum_sq: f64 = base
            .couplings
            .iter()
            .zip(&base.cos_theta)
            .map(|(l, c)| (l * mu * c).powi(2))
            .sum();
        let sum_sq_flipped: f64 = flipped
            .couplings
            .iter()
            .zip(&flipped.cos_theta)
            .map(|(l, c)| (l * mu * c).powi(2))
            .sum();
        assert!((sum_sq - sum_sq_flipped).abs() < 1e-18);
        let e1 = dipole_sphere_energy(&base, mu);
        let e2 = dipole_sphere_energy(&flipped, mu);
        assert!((e1 - e2).abs() > 1e-12 * e1.abs());
    }

    #[test]
    fn antisymmetric_orientations_cancel_the_collective_term() {
        let s = test_sphere();
        let ens = sample_ensemble(
            40,
            &s,
            [nm_to_bohr(1.0), nm_to_bohr(10.0)],
            nm_to_bohr(1.5),
            3,
            OrientationPolicy::AntisymmetricPairs,
        )
        .unwrap();
        // pair cancellation is not exact because couplings differ pairwise;
        // construct an exactly canceling variant by equalizing pairs
        let mut exact = ens.clone();
        for i in (0..40).step_by(2) {
            exact.couplings[i + 1] = exact.couplings[i];
            exact.cos_theta[i + 1] = -exact.cos_theta[i];
        }
        let e = dipole_sphere_energy(&exact, 2.3);
        assert!(e.abs() < 1e-20);
    }

    #[test]
    fn two_dipole_textbook_energies() {
        let s = test_sphere();
        let d = nm_to_bohr(2.0);
        let far = s.radius * 100.0;
        // collinear aligned pair at distance d: -2 mu^2/d^3 (placed far from
        // the sphere so couplings are negligible)
        let mut ens = sample_ensemble(
            2,
            &s,
            [far, far * 2.0],
            d,
            5,
            OrientationPolicy::AlignedWithField,
        )
        .unwrap();
        ens.positions = vec![vec3(far, 0.0, 0.0), vec3(far, 0.0, d)];
        ens.orientations = vec![Vec3::Z, Vec3::Z];
        let mu = 1.4;
        let e = dipole_dipole_sum(&ens, mu).unwrap();
        assert!((e + 2.0 * mu * mu / d.powi(3)).abs() < 1e-15);
        // side by side
        ens.positions = vec![vec3(far, 0.0, 0.0), vec3(far + d, 0.0, 0.0)];
        let e = dipole_dipole_sum(&ens, mu).unwrap();
        assert!((e - mu * mu / d.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn weighted_barrier_form_is_an_identity() {
        let p = crate::shin_metiu::ShinMetiuParams::default();
        let gx = crate::grid::build_grid([-20.0, 20.0], 20, 6).unwrap();
        let gr = crate::grid::build_grid([-7.0, 7.0], 14, 6).unwrap();
        let table = crate::shin_metiu::bo_scan(&p, &gx, &gr, 8).unwrap();
        let s = test_sphere();
        let ens = sample_ensemble(
            60,
            &s,
            [nm_to_bohr(1.0), nm_to_bohr(12.0)],
            nm_to_bohr(1.5),
            9,
            OrientationPolicy::Isotropic,
        )
        .unwrap();
        let b = collective_barrier(&ens, most_coupled(&ens), &table, Well::Left, Well::Left)
            .unwrap();
        assert!(
            (b.delta_e_b - b.delta_e_b_weighted).abs() <= 1e-12 * b.delta_e_b.abs(),
            "{} vs {}",
            b.delta_e_b,
            b.delta_e_b_weighted
        );
    }

    #[test]
    fn aligned_ensemble_raises_barrier_backreaction_lowers_it() {
        let p = crate::shin_metiu::ShinMetiuParams::default();
        let gx = crate::grid::build_grid([-20.0, 20.0], 20, 6).unwrap();
        let gr = crate::grid::build_grid([-7.0, 7.0], 14, 6).unwrap();
        let table = crate::shin_metiu::bo_scan(&p, &gx, &gr, 8).unwrap();
        let s = test_sphere();
        let ens = sample_ensemble(
            300,
            &s,
            [nm_to_bohr(1.0), nm_to_bohr(16.0)],
            nm_to_bohr(1.5),
            17,
            OrientationPolicy::AlignedWithField,
        )
        .unwrap();
        let fwd = collective_barrier(&ens, most_coupled(&ens), &table, Well::Left, Well::Left)
            .unwrap();
        assert!(fwd.delta_e_b > 0.0, "suppression expected: {}", fwd.delta_e_b);
        // backreaction: reacting molecule starts in the right well, others left
        let bwd = collective_barrier(&ens, most_coupled(&ens), &table, Well::Right, Well::Left)
            .unwrap();
        assert!(bwd.cross_term < 0.0, "backreaction cross term: {}", bwd.cross_term);
        assert!(bwd.delta_e_b < fwd.delta_e_b);
    }

    #[test]
    fn zero_alignment_reduces_to_single_molecule_surface() {
        let p = crate::shin_metiu::ShinMetiuParams::default();
        let gx = crate::grid::build_grid([-20.0, 20.0], 20, 6).unwrap();
        let gr = crate::grid::build_grid([-7.0, 7.0], 14, 6).unwrap();
        let table = crate::shin_metiu::bo_scan(&p, &gx, &gr, 8).unwrap();
        let s = test_sphere();
        let mut ens = sample_ensemble(
            21,
            &s,
            [nm_to_bohr(1.0), nm_to_bohr(12.0)],
            nm_to_bohr(1.5),
            23,
            OrientationPolicy::AntisymmetricPairs,
        )
        .unwrap();
        // exact cancellation among the non-reacting molecules (1..21)
        for i in (1..20).step_by(2) {
            ens.couplings[i + 1] = ens.couplings[i];
            ens.cos_theta[i + 1] = -ens.cos_theta[i];
        }
        let reacting = 0;
        let (_, v_eff) = collective_pes(&ens, reacting, &table, Well::Left).unwrap();
        // with S_rest = 0 the curve is the single-molecule shifted path
        let lam = ens.couplings[reacting] * ens.cos_theta[reacting];
        let mu00 = table.mu00();
        for (i, &v) in v_eff.iter().enumerate() {
            let single =
                crate::pert::pert_path_value(table.v_at(i, 0), mu00[i], lam.abs());
            assert!((v - single).abs() < 1e-15);
        }
    }

    #[test]
    fn collective_energy_grows_superlinearly_for_aligned_dipoles() {
        // the cavity-mediated term is a coherent square: doubling N roughly
        // quadruples it (per-molecule shift linear in N)
        let s = test_sphere();
        let shell = [nm_to_bohr(1.0), nm_to_bohr(16.0)];
        let md = nm_to_bohr(1.5);
        let mean_eds = |n: usize| -> f64 {
            (0..6u64)
                .map(|seed| {
                    let ens = sample_ensemble(
                        n,
                        &s,
                        shell,
                        md,
                        seed,
                        OrientationPolicy::AlignedWithField,
                    )
                    .unwrap();
                    dipole_sphere_energy(&ens, 2.3)
                })
                .sum::<f64>()
                / 6.0
        };
        let e1 = mean_eds(400);
        let e2 = mean_eds(800);
        let ratio = e2 / e1;
        assert!(ratio > 2.8 && ratio < 5.5, "E_ds(2N)/E_ds(N) = {ratio}");
    }

    #[test]
    fn energy_report_n1_has_no_pair_term() {
        let s = test_sphere();
        let rep = energy_decomposition(
            &[1],
            &[1, 2, 3],
            &s,
            [nm_to_bohr(1.0), nm_to_bohr(16.0)],
            nm_to_bohr(1.5),
            2.3,
            OrientationPolicy::AlignedWithField,
        )
        .unwrap();
        for row in &rep.rows {
            assert!(row.e_dd == 0.0);
            assert!(row.e_tot == row.e_ds);
        }
    }
}
