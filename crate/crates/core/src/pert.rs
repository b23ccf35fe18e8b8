//! Second-order perturbation theory for the cavity-induced ground-state
//! shifts: the displaced-oscillator surface, its minimum path, the effective
//! photon frequency, the multimode (Casimir-Polder) shift, sphere-mode
//! quantization, the Debye/London decomposition near a polarizable sphere,
//! and the analysis of externally supplied potential/dipole scans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{ev_to_hartree, kelvin_to_beta, DEBYE_AU};
use crate::vec3::{dipole_field, Vec3};

/// Second-order surface value: V_0 + w^2 q^2/2 + lambda w q mu_0
/// - lambda^2 w^2 q^2 alpha_0 / 2.
pub fn pert_value(v0: f64, mu0: f64, alpha0: f64, lambda: f64, omega_c: f64, q: f64) -> Result<f64> {
    let stab = lambda * lambda * alpha0;
    if stab >= 1.0 {
        return Err(Error::Instability { value: stab });
    }
    Ok(v0 + 0.5 * omega_c * omega_c * q * q * (1.0 - stab) + lambda * omega_c * q * mu0)
}

/// Minimizing displacement q_m = -(lambda/w) mu_0 / (1 - lambda^2 alpha_0).
pub fn q_min_value(mu0: f64, alpha0: f64, lambda: f64, omega_c: f64) -> Result<f64> {
    let denom = 1.0 - lambda * lambda * alpha0;
    if denom <= 0.0 {
        return Err(Error::Instability {
            value: lambda * lambda * alpha0,
        });
    }
    Ok(-(lambda / omega_c) * mu0 / denom)
}

/// Potential profile along the displacement minimum: V_0 - lambda^2 mu_0^2/2
/// (fourth-order terms dropped).
#[inline]
pub fn pert_path_value(v0: f64, mu0: f64, lambda: f64) -> f64 {
    v0 - 0.5 * lambda * lambda * mu0 * mu0
}

/// Effective photon curvature frequency w_eff = w (1 - lambda^2 alpha_0 / 2).
pub fn effective_frequency(alpha0: f64, lambda: f64, omega_c: f64) -> Result<f64> {
    let stab = lambda * lambda * alpha0;
    if stab >= 1.0 {
        return Err(Error::Instability { value: stab });
    }
    Ok(omega_c * (1.0 - 0.5 * stab))
}

/// Zero-point shift from the vibrational contribution to the polarizability:
/// -w_c Omega_R^2 / (4 w_v (w_c + w_v)).
pub fn vibrational_zpe_shift(omega_c: f64, omega_v: f64, rabi: f64) -> Result<f64> {
    if !(omega_c > 0.0) || !(omega_v > 0.0) {
        return Err(Error::InvalidParameter(
            "frequencies must be positive".into(),
        ));
    }
    Ok(-omega_c * rabi * rabi / (4.0 * omega_v * (omega_c + omega_v)))
}

/// One quantized mode for the multimode shift.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Mode {
    pub omega: f64,
    pub lambda: f64,
}

/// A set of modes, e.g. from a quantized nanostructure.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModeSet(pub Vec<Mode>);

impl ModeSet {
    pub fn validate(&self) -> Result<()> {
        for m in &self.0 {
            if !(m.omega > 0.0) || m.lambda < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "mode with omega {} lambda {}",
                    m.omega, m.lambda
                )));
            }
        }
        Ok(())
    }

    /// Single-mode coupling strength giving the same total permanent-dipole
    /// (Debye) shift.
    pub fn lambda_eff(&self) -> f64 {
        self.0.iter().map(|m| m.lambda * m.lambda).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultimodeShift {
    pub total: f64,
    pub debye: f64,
    pub london: f64,
    /// Per-mode (debye, london) pairs.
    pub per_mode: Vec<(f64, f64)>,
}

/// Static second-order shift of a configuration with permanent dipole mu_0
/// and polarizability alpha_0 coupled to a set of modes:
/// sum_k -(lambda_k^2/2)(mu_0^2 + (w_k/2) alpha_0).
pub fn multimode_shift(mu0: f64, alpha0: f64, modes: &ModeSet) -> Result<MultimodeShift> {
    modes.validate()?;
    let mut per_mode = Vec::with_capacity(modes.0.len());
    let mut debye = 0.0;
    let mut london = 0.0;
    for m in &modes.0 {
        let d = -0.5 * m.lambda * m.lambda * mu0 * mu0;
        let l = -0.25 * m.lambda * m.lambda * m.omega * alpha0;
        per_mode.push((d, l));
        debye += d;
        london += l;
    }
    Ok(MultimodeShift {
        total: debye + london,
        debye,
        london,
        per_mode,
    })
}

/// Dielectric models for a quantized nanosphere.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum DielectricModel {
    /// Lossless metal: eps = 1 - w_p^2/w^2.
    Drude { omega_p: f64 },
    /// Single material resonance: eps = 1 + w_f^2/(w_ph^2 - w^2).
    Lorentz { omega_ph: f64, omega_f: f64 },
}

/// One of the three degenerate dipole modes of a small sphere, quantized as
/// a harmonic oscillator with transition dipole mu_eg.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SphereMode {
    /// Sphere radius (bohr).
    pub radius: f64,
    pub model: DielectricModel,
    pub omega_0: f64,
    pub mu_eg: f64,
}

/// Quantize the dipole response of a small sphere as a three-fold degenerate
/// oscillator; the returned mode applies to each Cartesian orientation.
pub fn sphere_modes(model: DielectricModel, radius: f64) -> Result<SphereMode> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let (omega_0, mu_eg) = match model {
        DielectricModel::Drude { omega_p } => {
            if !(omega_p > 0.0) {
                return Err(Error::InvalidParameter("omega_p must be positive".into()));
            }
            let w0 = omega_p / 3.0f64.sqrt();
            (w0, (w0 * radius.powi(3) / 2.0).sqrt())
        }
        DielectricModel::Lorentz { omega_ph, omega_f } => {
            if !(omega_ph > 0.0) || !(omega_f > 0.0) {
                return Err(Error::InvalidParameter(
                    "omega_ph and omega_f must be positive".into(),
                ));
            }
            let w0 = (omega_ph * omega_ph + omega_f * omega_f / 3.0).sqrt();
            (w0, omega_f * (radius.powi(3) / (6.0 * w0)).sqrt())
        }
    };
    Ok(SphereMode {
        radius,
        model,
        omega_0,
        mu_eg,
    })
}

impl SphereMode {
    /// Oscillator polarizability mu_eg^2 (1/(w0-w) + 1/(w0+w)).
    pub fn quantized_polarizability(&self, omega: f64) -> f64 {
        self.mu_eg * self.mu_eg
            * (1.0 / (self.omega_0 - omega) + 1.0 / (self.omega_0 + omega))
    }

    /// Coupling strengths of the three Cartesian dipole modes at a molecule
    /// position, projected on the molecular axis.
    pub fn couplings_at(&self, r_m: Vec3, molecular_axis: Vec3) -> Result<ModeSet> {
        if r_m.norm() <= self.radius {
            return Err(Error::Domain(format!(
                "molecule at r = {:.3} is not outside the sphere radius {:.3}",
                r_m.norm(),
                self.radius
            )));
        }
        let n = molecular_axis.normalized();
        let pref = (2.0 / self.omega_0).sqrt();
        let modes = [Vec3::X, Vec3::Y, Vec3::Z]
            .iter()
            .map(|&axis| {
                let field = dipole_field(axis * self.mu_eg, Vec3::ZERO, r_m);
                Mode {
                    omega: self.omega_0,
                    lambda: (pref * field.dot(n)).abs(),
                }
            })
            .collect();
        Ok(ModeSet(modes))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VdwDecomposition {
    pub debye: f64,
    pub london: f64,
    pub total: f64,
}

/// Debye/London split of the shift of a molecule (permanent dipole mu0 and
/// polarizability alpha0 along its axis) near the quantized sphere.
pub fn vdw_decomposition(
    sphere: &SphereMode,
    r_m: Vec3,
    molecular_axis: Vec3,
    mu0: f64,
    alpha0: f64,
) -> Result<VdwDecomposition> {
    let modes = sphere.couplings_at(r_m, molecular_axis)?;
    let shift = multimode_shift(mu0, alpha0, &modes)?;
    Ok(VdwDecomposition {
        debye: shift.debye,
        london: shift.london,
        total: shift.total,
    })
}

// ---------------------------------------------------------------------------
// Scan ingestion and analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateUnit {
    Degree,
    Radian,
    Bohr,
    Angstrom,
}

/// Externally supplied ground-state scan: energies and dipole vectors along
/// one coordinate, with an optional polarizability column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanTable {
    pub coordinate: Vec<f64>,
    pub unit: CoordinateUnit,
    /// Energies (hartree).
    pub v0: Vec<f64>,
    /// Dipole vectors (a.u.).
    pub mu: Vec<Vec3>,
    /// Static polarizability along the field axis (a.u.), when supplied.
    pub alpha0: Option<Vec<f64>>,
    /// Full period of an angular coordinate covered by the scan, if any.
    pub period: Option<f64>,
}

impl ScanTable {
    pub fn validate(&self) -> Result<()> {
        let n = self.coordinate.len();
        if n < 5 {
            return Err(Error::InvalidParameter("scan too short".into()));
        }
        if self.v0.len() != n || self.mu.len() != n {
            return Err(Error::InvalidParameter(
                "scan columns have unequal lengths".into(),
            ));
        }
        if let Some(a) = &self.alpha0 {
            if a.len() != n {
                return Err(Error::InvalidParameter(
                    "alpha0 column has a different length".into(),
                ));
            }
        }
        for w in self.coordinate.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(
                    "scan coordinate must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    /// Dipole projection on a laboratory axis.
    pub fn mu_along(&self, axis: Vec3) -> Vec<f64> {
        let n = axis.normalized();
        self.mu.iter().map(|m| m.dot(n)).collect()
    }
}

/// Parse the scan CSV format: a `# units:` comment declares the units, a
/// header row names the columns, data rows follow.
///
/// ```text
/// # units: coordinate=deg energy=ev dipole=debye
/// coordinate,v0,mu_x,mu_y,mu_z,alpha0
/// 0.0,1.25,0.0,0.0,1.1,38.2
/// ```
pub fn parse_scan_csv(text: &str) -> Result<ScanTable> {
    let mut unit = CoordinateUnit::Degree;
    let mut energy_ev = false;
    let mut dipole_debye = false;
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(units) = rest.strip_prefix("units:") {
                for tok in units.split_whitespace() {
                    let mut it = tok.splitn(2, '=');
                    let key = it.next().unwrap_or("");
                    let val = it.next().unwrap_or("");
                    match (key, val) {
                        ("coordinate", "deg") => unit = CoordinateUnit::Degree,
                        ("coordinate", "rad") => unit = CoordinateUnit::Radian,
                        ("coordinate", "bohr") => unit = CoordinateUnit::Bohr,
                        ("coordinate", "angstrom") => unit = CoordinateUnit::Angstrom,
                        ("energy", "hartree") => energy_ev = false,
                        ("energy", "ev") => energy_ev = true,
                        ("dipole", "au") => dipole_debye = false,
                        ("dipole", "debye") => dipole_debye = true,
                        _ => {
                            return Err(Error::Parse(format!(
                                "unknown unit declaration '{tok}'"
                            )))
                        }
                    }
                }
            }
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number '{s}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }

    let header = header.ok_or_else(|| Error::Parse("missing header row".into()))?;
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let c_coord = col("coordinate")?;
    let c_v0 = col("v0")?;
    let c_mx = col("mu_x")?;
    let c_my = col("mu_y")?;
    let c_mz = col("mu_z")?;
    let c_alpha = header.iter().position(|h| h == "alpha0");

    let ncols = header.len();
    let mut coordinate = Vec::new();
    let mut v0 = Vec::new();
    let mut mu = Vec::new();
    let mut alpha = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Parse(format!(
                "row {i} has {} fields, header has {ncols}",
                row.len()
            )));
        }
        coordinate.push(row[c_coord]);
        v0.push(if energy_ev {
            ev_to_hartree(row[c_v0])
        } else {
            row[c_v0]
        });
        let scale = if dipole_debye { DEBYE_AU } else { 1.0 };
        mu.push(Vec3 {
            x: row[c_mx] * scale,
            y: row[c_my] * scale,
            z: row[c_mz] * scale,
        });
        if let Some(c) = c_alpha {
            alpha.push(row[c]);
        }
    }

    let period = match unit {
        CoordinateUnit::Degree => Some(360.0),
        CoordinateUnit::Radian => Some(2.0 * std::f64::consts::PI),
        _ => None,
    };
    // Only treat the scan as periodic if it actually covers the period.
    let period = period.and_then(|p| {
        let span = coordinate.last()? - coordinate.first()?;
        let max_step = coordinate
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        if span >= p - 1.5 * max_step {
            Some(p)
        } else {
            None
        }
    });

    let table = ScanTable {
        coordinate,
        unit,
        v0,
        mu,
        alpha0: if c_alpha.is_some() { Some(alpha) } else { None },
        period,
    };
    table.validate()?;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationaryKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub coordinate: f64,
    pub value: f64,
    pub kind: StationaryKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanBarrier {
    /// Coordinate of the minimum the reaction starts from.
    pub from_minimum: f64,
    /// Coordinate of the maximum crossed.
    pub over_maximum: f64,
    pub height: f64,
    /// TST k(lambda)/k(0) for this barrier at the report temperature.
    pub rate_ratio_vs_bare: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanLambdaReport {
    pub lambda: f64,
    /// The shifted path V_0 - lambda^2 mu_eps^2 / 2 on the scan points.
    pub path: Vec<f64>,
    pub stationary: Vec<StationaryPoint>,
    pub barriers: Vec<ScanBarrier>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub temperature: f64,
    pub axis: Vec3,
    pub per_lambda: Vec<ScanLambdaReport>,
}

/// Stationary points of discretely sampled values, refined by local
/// parabolas; periodic scans wrap around.
fn stationary_points(
    coord: &[f64],
    values: &[f64],
    period: Option<f64>,
) -> Vec<StationaryPoint> {
    let n = coord.len();
    let mut out = Vec::new();
    let idx = |i: isize| -> Option<usize> {
        if period.is_some() {
            Some(((i % n as isize + n as isize) % n as isize) as usize)
        } else if i < 0 || i >= n as isize {
            None
        } else {
            Some(i as usize)
        }
    };
    let coord_at = |i: isize| -> Option<f64> {
        let j = idx(i)?;
        let mut x = coord[j];
        if let Some(p) = period {
            // unwrap relative to the window
            if i < 0 {
                x -= p;
            } else if i >= n as isize {
                x += p;
            }
        }
        Some(x)
    };
    for i in 0..n as isize {
        let (im, i0, ip) = match (idx(i - 1), idx(i), idx(i + 1)) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => continue,
        };
        if im == i0 || ip == i0 {
            continue;
        }
        let (vm, v0, vp) = (values[im], values[i0], values[ip]);
        let kind = if v0 < vm && v0 < vp {
            StationaryKind::Minimum
        } else if v0 > vm && v0 > vp {
            StationaryKind::Maximum
        } else {
            continue;
        };
        // parabola through the three points
        let (xm, x0, xp) = (
            coord_at(i - 1).unwrap(),
            coord_at(i).unwrap(),
            coord_at(i + 1).unwrap(),
        );
        let denom = (xm - x0) * (xm - xp) * (x0 - xp);
        let a = (xp * (v0 - vm) + x0 * (vm - vp) + xm * (vp - v0)) / denom;
        let b = (xp * xp * (vm - v0) + x0 * x0 * (vp - vm) + xm * xm * (v0 - vp)) / denom;
        let (x_star, v_star) = if a.abs() > 1e-300 {
            let x = -b / (2.0 * a);
            let c = vm - a * xm * xm - b * xm;
            (x, a * x * x + b * x + c)
        } else {
            (x0, v0)
        };
        out.push(StationaryPoint {
            coordinate: x_star,
            value: v_star,
            kind,
        });
    }
    out.sort_by(|p, q| p.coordinate.partial_cmp(&q.coordinate).unwrap());
    out
}

/// Shifted-path analysis of an ingested scan: the second-order path is
/// evaluated per coupling strength, stationary points are re-minimized, and
/// every adjacent minimum-to-maximum barrier is reported with its TST ratio
/// against the bare scan.
pub fn scan_analysis(
    scan: &ScanTable,
    lambdas: &[f64],
    axis: Vec3,
    t_kelvin: f64,
) -> Result<ScanReport> {
    scan.validate()?;
    let mu_eps = scan.mu_along(axis);
    let bare = stationary_points(&scan.coordinate, &scan.v0, scan.period);
    if bare.iter().filter(|p| p.kind == StationaryKind::Minimum).count() == 0 {
        return Err(Error::Domain("no interior minimum in the scan".into()));
    }

    let beta = kelvin_to_beta(t_kelvin);
    let mut per_lambda = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let path: Vec<f64> = scan
            .v0
            .iter()
            .zip(&mu_eps)
            .map(|(&v, &m)| pert_path_value(v, m, lambda))
            .collect();
        let stationary = stationary_points(&scan.coordinate, &path, scan.period);
        let mut barriers = Vec::new();
        // pair each minimum with its adjacent maxima (both directions)
        for (si, s) in stationary.iter().enumerate() {
            if s.kind != StationaryKind::Minimum {
                continue;
            }
            for &dir in &[1isize, -1isize] {
                let m = stationary.len() as isize;
                let mut j = si as isize + dir;
                if scan.period.is_some() {
                    j = (j % m + m) % m;
                }
                if j < 0 || j >= m {
                    continue;
                }
                let cand = &stationary[j as usize];
                if cand.kind == StationaryKind::Maximum {
                    let height = cand.value - s.value;
                    // bare barrier between the corresponding bare points
                    let bare_min = nearest(&bare, s.coordinate, StationaryKind::Minimum);
                    let bare_max = nearest(&bare, cand.coordinate, StationaryKind::Maximum);
                    let ratio = match (bare_min, bare_max) {
                        (Some(bm), Some(bx)) => {
                            let bare_height = bx.value - bm.value;
                            (-(height - bare_height) * beta).exp()
                        }
                        _ => f64::NAN,
                    };
                    barriers.push(ScanBarrier {
                        from_minimum: s.coordinate,
                        over_maximum: cand.coordinate,
                        height,
                        rate_ratio_vs_bare: ratio,
                    });
                }
            }
        }
        per_lambda.push(ScanLambdaReport {
            lambda,
            path,
            stationary,
            barriers,
        });
    }
    Ok(ScanReport {
        temperature: t_kelvin,
        axis,
        per_lambda,
    })
}

fn nearest(
    points: &[StationaryPoint],
    coord: f64,
    kind: StationaryKind,
) -> Option<&StationaryPoint> {
    points
        .iter()
        .filter(|p| p.kind == kind)
        .min_by(|a, b| {
            (a.coordinate - coord)
                .abs()
                .partial_cmp(&(b.coordinate - coord).abs())
                .unwrap()
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::vec3;

    #[test]
    fn pert_surface_limits() {
        // lambda = 0 -> V0 + w^2 q^2 / 2; q = 0 -> V0
        let v = pert_value(0.3, 2.0, 50.0, 0.0, 0.01, 3.0).unwrap();
        assert!((v - (0.3 + 0.5 * 1e-4 * 9.0)).abs() < 1e-15);
        let v = pert_value(0.3, 2.0, 50.0, 0.02, 0.01, 0.0).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
    }

    #[test]
    fn instability_guard() {
        assert!(matches!(
            pert_value(0.0, 1.0, 500.0, 0.05, 0.01, 1.0),
            Err(Error::Instability { .. })
        ));
        assert!(q_min_value(1.0, 400.0, 0.05, 0.01).is_err());
    }

    #[test]
    fn q_min_reductions_and_numeric_argmin() {
        assert!(q_min_value(0.0, 30.0, 0.02, 0.005).unwrap().abs() < 1e-15);
        let q = q_min_value(1.5, 0.0, 0.02, 0.005).unwrap();
        assert!((q + 0.02 * 1.5 / 0.005).abs() < 1e-12);
        // numeric argmin oracle over a dense q scan
        let (mu0, alpha0, lambda, omega) = (2.3, 80.0, 0.03, 0.0027);
        let q_formula = q_min_value(mu0, alpha0, lambda, omega).unwrap();
        let mut best = (0.0, f64::MAX);
        let mut q = -80.0;
        while q < 80.0 {
            let v = pert_value(0.0, mu0, alpha0, lambda, omega, q).unwrap();
            if v < best.1 {
                best = (q, v);
            }
            q += 0.001;
        }
        assert!((best.0 - q_formula).abs() < 2e-3, "{} vs {q_formula}", best.0);
    }

    #[test]
    fn path_value_and_symmetric_ts() {
        assert!((pert_path_value(1.0, 0.0, 0.05) - 1.0).abs() < 1e-15);
        // barrier change = lambda^2/2 (mu_min^2 - mu_ts^2)
        let lam = 0.03;
        let b0 = 0.5; // bare barrier
        let shifted = (b0 + pert_path_value(0.0, 0.0, lam)) - pert_path_value(-0.0, 2.0, lam);
        assert!((shifted - (b0 + 0.5 * lam * lam * 4.0)).abs() < 1e-15);
        // sign flip of the dipole leaves the shift alone
        assert!(
            (pert_path_value(0.3, 1.7, lam) - pert_path_value(0.3, -1.7, lam)).abs() < 1e-18
        );
    }

    #[test]
    fn effective_frequency_reduction() {
        assert!((effective_frequency(0.0, 0.1, 0.02).unwrap() - 0.02).abs() < 1e-18);
        let w = effective_frequency(100.0, 0.02, 0.01).unwrap();
        assert!((w - 0.01 * (1.0 - 0.5 * 4e-4 * 100.0)).abs() < 1e-15);
        // matches the q-curvature of the perturbative surface at q_m
        let (mu0, alpha0, lambda, omega) = (1.2, 60.0, 0.02, 0.003);
        let qm = q_min_value(mu0, alpha0, lambda, omega).unwrap();
        let h = 0.05;
        let f =
            |q: f64| pert_value(0.0, mu0, alpha0, lambda, omega, q).unwrap();
        let curv = (f(qm + h) - 2.0 * f(qm) + f(qm - h)) / (h * h);
        let w_fd = curv.sqrt();
        let w_eff = effective_frequency(alpha0, lambda, omega).unwrap();
        // w_eff is the first-order expansion of sqrt(w^2 (1 - l^2 a))
        assert!((w_fd - w_eff).abs() < 1e-4 * omega, "{w_fd} vs {w_eff}");
    }

    #[test]
    fn zpe_shift_resonant_magnitude() {
        // resonance, Omega = 0.2 w -> shift = -0.005 w
        let w = 0.003;
        let s = vibrational_zpe_shift(w, w, 0.2 * w).unwrap();
        assert!((s + 0.005 * w).abs() < 1e-18);
        assert!(vibrational_zpe_shift(w, w, 0.0).unwrap() == 0.0);
    }

    #[test]
    fn multimode_additivity_and_lambda_eff() {
        let m1 = ModeSet(vec![
            Mode { omega: 0.01, lambda: 0.02 },
            Mode { omega: 0.02, lambda: 0.01 },
        ]);
        let m2 = ModeSet(vec![Mode { omega: 0.05, lambda: 0.015 }]);
        let both = ModeSet([m1.0.clone(), m2.0.clone()].concat());
        let (mu0, a0) = (1.9, 40.0);
        let s1 = multimode_shift(mu0, a0, &m1).unwrap();
        let s2 = multimode_shift(mu0, a0, &m2).unwrap();
        let sb = multimode_shift(mu0, a0, &both).unwrap();
        assert!((sb.total - s1.total - s2.total).abs() < 1e-18);
        // lambda_eff reproduces the same Debye shift in one mode
        let leff = both.lambda_eff();
        let single = ModeSet(vec![Mode { omega: 1.0, lambda: leff }]);
        let sd = multimode_shift(mu0, 0.0, &single).unwrap();
        assert!((sd.debye - sb.debye).abs() < 1e-15);
        // single mode = path shift plus London term
        let one = ModeSet(vec![Mode { omega: 0.01, lambda: 0.02 }]);
        let s = multimode_shift(mu0, a0, &one).unwrap();
        let path_shift = pert_path_value(0.0, mu0, 0.02);
        assert!((s.debye - path_shift).abs() < 1e-15);
    }

    #[test]
    fn drude_sphere_quantization() {
        let a = 100.0;
        let wp = 0.2;
        let s = sphere_modes(DielectricModel::Drude { omega_p: wp }, a).unwrap();
        assert!((s.omega_0 - wp / 3.0f64.sqrt()).abs() < 1e-15);
        // alpha_q(0) = a^3 and the full frequency dependence matches the
        // classical sphere polarizability a^3 w0^2/(w0^2 - w^2)
        assert!((s.quantized_polarizability(0.0) - a.powi(3)).abs() < 1e-6);
        for w in [0.01, 0.05, 0.1] {
            let classical = a.powi(3) * s.omega_0 * s.omega_0
                / (s.omega_0 * s.omega_0 - w * w);
            assert!((s.quantized_polarizability(w) - classical).abs() < 1e-6 * classical.abs());
        }
    }

    #[test]
    fn lorentz_sphere_static_polarizability() {
        let a = 50.0;
        let (wph, wf) = (0.01, 0.004);
        let s = sphere_modes(DielectricModel::Lorentz { omega_ph: wph, omega_f: wf }, a).unwrap();
        // classical static value a^3 (eps0 - 1)/(eps0 + 2)
        let eps0 = 1.0 + wf * wf / (wph * wph);
        let classical = a.powi(3) * (eps0 - 1.0) / (eps0 + 2.0);
        assert!(
            (s.quantized_polarizability(0.0) - classical).abs() < 1e-9 * classical,
            "{} vs {classical}",
            s.quantized_polarizability(0.0)
        );
    }

    #[test]
    fn perpendicular_vdw_closed_forms() {
        // molecule on the x axis, dipole along z: Debye = -a_q(0) mu^2/(2 r^6),
        // London = -mu_eg^2 alpha / (2 r^6)
        let sphere = sphere_modes(DielectricModel::Drude { omega_p: 0.15 }, 80.0).unwrap();
        let r = 400.0;
        let (mu0, alpha0) = (2.3, 85.0);
        let d = vdw_decomposition(&sphere, vec3(r, 0.0, 0.0), Vec3::Z, mu0, alpha0).unwrap();
        let r6 = r.powi(6);
        let debye_expect = -sphere.quantized_polarizability(0.0) * mu0 * mu0 / (2.0 * r6);
        let london_expect = -sphere.mu_eg * sphere.mu_eg * alpha0 / (2.0 * r6);
        assert!(
            (d.debye - debye_expect).abs() < 1e-12 * debye_expect.abs(),
            "{} vs {debye_expect}",
            d.debye
        );
        assert!(
            (d.london - london_expect).abs() < 1e-12 * london_expect.abs(),
            "{} vs {london_expect}",
            d.london
        );
        // r^-6 scaling
        let d2 = vdw_decomposition(&sphere, vec3(2.0 * r, 0.0, 0.0), Vec3::Z, mu0, alpha0)
            .unwrap();
        assert!((d2.total / d.total - 1.0 / 64.0).abs() < 1e-12);
        // point-polarizability oracle: U = -(alpha_s/2) |E_mol(0)|^2
        let e_at_origin = dipole_field(Vec3::Z * mu0, vec3(r, 0.0, 0.0), Vec3::ZERO);
        let oracle = -0.5 * sphere.quantized_polarizability(0.0) * e_at_origin.norm2();
        assert!(
            (d.debye - oracle).abs() < 1e-12 * oracle.abs(),
            "{} vs {oracle}",
            d.debye
        );
    }

    #[test]
    fn molecule_inside_sphere_rejected() {
        let sphere = sphere_modes(DielectricModel::Drude { omega_p: 0.15 }, 80.0).unwrap();
        assert!(vdw_decomposition(&sphere, vec3(10.0, 0.0, 0.0), Vec3::Z, 1.0, 0.0).is_err());
    }

    fn synthetic_scan() -> ScanTable {
        // angular landscape with a zero-dipole global minimum at 180 deg, a
        // polar local minimum near 70 deg, and maxima at 0 and 120 deg
        let n = 180;
        let coordinate: Vec<f64> = (0..n).map(|i| 2.0 * i as f64).collect();
        let v0: Vec<f64> = coordinate
            .iter()
            .map(|&th| {
                let t = th.to_radians();
                0.002 * (0.948 * t.cos() + 0.474 * (2.0 * t).cos() + (3.0 * t).cos() + 1.474)
            })
            .collect();
        let mu: Vec<Vec3> = coordinate
            .iter()
            .map(|&th| Vec3::Z * (1.2 * (th.to_radians() / 2.0).cos()))
            .collect();
        ScanTable {
            coordinate,
            unit: CoordinateUnit::Degree,
            v0,
            mu,
            alpha0: None,
            period: Some(360.0),
        }
    }

    #[test]
    fn scan_zero_coupling_identity_and_zero_dipole_minimum() {
        let scan = synthetic_scan();
        let report = scan_analysis(&scan, &[0.0, 0.04], Vec3::Z, 300.0).unwrap();
        // lambda -> 0 reproduces the bare path exactly
        for (p, v) in report.per_lambda[0].path.iter().zip(&scan.v0) {
            assert!((p - v).abs() < 1e-18);
        }
        // the mu = 0 point (theta = 180) is untouched at any coupling
        let i180 = scan.coordinate.iter().position(|&c| c == 180.0).unwrap();
        assert!((report.per_lambda[1].path[i180] - scan.v0[i180]).abs() < 1e-18);
    }

    #[test]
    fn scan_barrier_sign_follows_dipole_difference() {
        let scan = synthetic_scan();
        let report = scan_analysis(&scan, &[0.0, 0.05], Vec3::Z, 300.0).unwrap();
        let barrier_from = |rep: &ScanLambdaReport, min_coord: f64| -> f64 {
            rep.barriers
                .iter()
                .filter(|b| (b.from_minimum - min_coord).abs() < 10.0)
                .map(|b| b.height)
                .fold(f64::MAX, f64::min)
        };
        // leaving the zero-dipole minimum at 180 deg gets easier when the
        // coupling lowers the adjacent maximum (its dipole is nonzero)
        let b_bare = barrier_from(&report.per_lambda[0], 180.0);
        let b_coup = barrier_from(&report.per_lambda[1], 180.0);
        assert!(b_coup < b_bare, "catalysis expected: {b_coup} vs {b_bare}");
        // the polar minimum at ~70 deg is stabilized (barrier to leave grows
        // if the minimum drops faster than the maximum)
        let rep = &report.per_lambda[1];
        let min70 = rep
            .stationary
            .iter()
            .filter(|p| p.kind == StationaryKind::Minimum && (p.coordinate - 70.0).abs() < 25.0)
            .count();
        assert!(min70 > 0, "polar minimum survives the coupling");
    }

    #[test]
    fn scan_minimum_relocation_detected() {
        // non-periodic well at 60 deg tilted by a dipole gradient: the
        // re-minimized position must move
        let n = 121;
        let coordinate: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let v0: Vec<f64> = coordinate
            .iter()
            .map(|&th| 0.01 * (1.0 - ((th - 60.0).to_radians()).cos()))
            .collect();
        let mu: Vec<Vec3> = coordinate
            .iter()
            .map(|&th| Vec3::Z * (0.5 + 1.5 * th / 120.0))
            .collect();
        let scan = ScanTable {
            coordinate,
            unit: CoordinateUnit::Degree,
            v0,
            mu,
            alpha0: None,
            period: None,
        };
        let report = scan_analysis(&scan, &[0.0, 0.06], Vec3::Z, 300.0).unwrap();
        let min_of = |rep: &ScanLambdaReport| {
            rep.stationary
                .iter()
                .filter(|p| p.kind == StationaryKind::Minimum)
                .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
                .unwrap()
                .coordinate
        };
        let bare_min = min_of(&report.per_lambda[0]);
        let shifted_min = min_of(&report.per_lambda[1]);
        assert!((bare_min - 60.0).abs() < 0.5);
        assert!(
            (shifted_min - bare_min).abs() > 3.0,
            "minimum should relocate: {bare_min} -> {shifted_min}"
        );
    }

    #[test]
    fn scan_csv_round_trip_units() {
        let text = "\
# units: coordinate=deg energy=ev dipole=debye
coordinate,v0,mu_x,mu_y,mu_z,alpha0
0.0,0.1,0.0,0.0,1.0,30.0
10.0,0.2,0.0,0.0,0.9,31.0
20.0,0.3,0.0,0.0,0.7,32.0
30.0,0.25,0.0,0.0,0.4,33.0
40.0,0.22,0.0,0.0,0.2,34.0
";
        let scan = parse_scan_csv(text).unwrap();
        assert_eq!(scan.coordinate.len(), 5);
        assert!((scan.v0[0] - ev_to_hartree(0.1)).abs() < 1e-15);
        assert!((scan.mu[0].z - DEBYE_AU).abs() < 1e-15);
        assert_eq!(scan.alpha0.as_ref().unwrap().len(), 5);
        assert!(scan.period.is_none(), "partial angular scans do not wrap");
    }

    #[test]
    fn scan_csv_missing_dipole_column_is_an_error() {
        let text = "\
coordinate,v0
0.0,0.1
10.0,0.2
20.0,0.3
30.0,0.25
40.0,0.22
";
        assert!(matches!(
            parse_scan_csv(text),
            Err(Error::MissingColumn(_))
        ));
    }
}
