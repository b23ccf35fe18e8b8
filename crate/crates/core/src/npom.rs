//! Image-charge/image-dipole electrostatics for grounded perfect conductors:
//! sphere, plane, and the sphere-above-plane nanogap built from the formally
//! infinite ping-pong image series. The induced-field energy of a permanent
//! dipole in the gap gives the barrier change and the effective single-mode
//! coupling for each gap size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{bohr_to_nm, hartree_to_ev};
use crate::vec3::{charge_field, dipole_field, potential, Vec3};

/// A point source: charge plus dipole at a position.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImageElement {
    pub position: Vec3,
    pub charge: f64,
    pub dipole: Vec3,
}

impl ImageElement {
    pub fn dipole_at(position: Vec3, dipole: Vec3) -> Self {
        ImageElement {
            position,
            charge: 0.0,
            dipole,
        }
    }

    pub fn field_at(&self, at: Vec3) -> Vec3 {
        let mut e = Vec3::ZERO;
        if self.charge != 0.0 {
            e = e + charge_field(self.charge, self.position, at);
        }
        if self.dipole.norm2() > 0.0 {
            e = e + dipole_field(self.dipole, self.position, at);
        }
        e
    }

    pub fn potential_at(&self, at: Vec3) -> f64 {
        potential(self.charge, self.dipole, self.position, at)
    }
}

/// Image of a charge+dipole source in a grounded conducting sphere.
/// The image sits at (R/r)^2 r and a dipole source always spawns both an
/// image charge and an image dipole.
pub fn image_in_sphere(src: &ImageElement, center: Vec3, radius: f64) -> Result<ImageElement> {
    let rel = src.position - center;
    let r = rel.norm();
    if r <= radius {
        return Err(Error::Domain(format!(
            "source at distance {r:.4} is inside the sphere of radius {radius:.4}"
        )));
    }
    if radius == 0.0 {
        return Ok(ImageElement {
            position: center,
            charge: 0.0,
            dipole: Vec3::ZERO,
        });
    }
    let k = radius / r;
    let position = center + rel * (k * k);
    let charge = -k * src.charge + radius / (r * r * r) * rel.dot(src.dipole);
    let rhat = rel * (1.0 / r);
    let dipole = (rhat * (2.0 * rhat.dot(src.dipole)) - src.dipole) * (k * k * k);
    Ok(ImageElement {
        position,
        charge,
        dipole,
    })
}

/// Mirror plane through `point` with unit normal `normal`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

/// Image of a charge+dipole source in a grounded conducting plane: mirrored
/// position, negated charge, normal dipole component preserved and
/// tangential flipped.
pub fn image_in_plane(src: &ImageElement, plane: &Plane) -> Result<ImageElement> {
    let n = plane.normal.normalized();
    let height = (src.position - plane.point).dot(n);
    if height.abs() < 1e-12 {
        return Err(Error::Domain("source sits on the mirror plane".into()));
    }
    let position = src.position - n * (2.0 * height);
    let dipole = n * (2.0 * src.dipole.dot(n)) - src.dipole;
    Ok(ImageElement {
        position,
        charge: -src.charge,
        dipole,
    })
}

/// Sphere of radius `radius` above the z = 0 mirror with gap `gap` between
/// the plane and the sphere's lowest point; the molecule sits in the gap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NpomGeometry {
    /// Sphere radius (bohr).
    pub radius: f64,
    /// Gap between mirror and sphere surface (bohr).
    pub gap: f64,
    /// Molecule position; default on the axis at the gap midpoint.
    pub molecule: Vec3,
}

impl NpomGeometry {
    pub fn midgap(radius: f64, gap: f64) -> Self {
        NpomGeometry {
            radius,
            gap,
            molecule: Vec3::Z * (gap / 2.0),
        }
    }

    pub fn sphere_center(&self) -> Vec3 {
        Vec3::Z * (self.gap + self.radius)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap > 0.0) || self.radius < 0.0 {
            return Err(Error::InvalidParameter(
                "need gap > 0 and radius >= 0".into(),
            ));
        }
        if self.molecule.z <= 0.0 || self.molecule.z >= self.gap {
            return Err(Error::Domain(format!(
                "molecule at z = {:.3} is not strictly inside the gap (0, {:.3})",
                self.molecule.z, self.gap
            )));
        }
        let to_center = self.molecule - self.sphere_center();
        if to_center.norm() <= self.radius {
            return Err(Error::Domain("molecule inside the sphere".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NpomEnergy {
    /// Induced-interaction energy U = -E_ind . mu / 2 (hartree).
    pub u: f64,
    /// Relative size of the last series increment.
    pub residual: f64,
    pub images_used: usize,
}

/// All images of one seed element under the alternating sphere/plane series,
/// plus the seed's direct images. Returns every generated element.
fn image_series(
    seed: &ImageElement,
    geom: &NpomGeometry,
    tol: f64,
    max_images: usize,
    observe_at: Vec3,
) -> Result<(Vec<ImageElement>, f64)> {
    let plane = Plane {
        point: Vec3::ZERO,
        normal: Vec3::Z,
    };
    let center = geom.sphere_center();
    let mut images: Vec<ImageElement> = Vec::new();
    // Two alternating chains: the latest element inside the sphere waits for
    // its plane image, and vice versa.
    let mut in_sphere = image_in_sphere(seed, center, geom.radius)?;
    let mut in_plane = image_in_plane(seed, &plane)?;
    let mut field = in_sphere.field_at(observe_at) + in_plane.field_at(observe_at);
    images.push(in_sphere);
    images.push(in_plane);
    let mut residual = f64::MAX;
    while images.len() < max_images {
        let next_sphere = image_in_sphere(&in_plane, center, geom.radius)?;
        let next_plane = image_in_plane(&in_sphere, &plane)?;
        let increment =
            next_sphere.field_at(observe_at) + next_plane.field_at(observe_at);
        field = field + increment;
        images.push(next_sphere);
        images.push(next_plane);
        in_sphere = next_sphere;
        in_plane = next_plane;
        residual = increment.norm() / field.norm().max(1e-300);
        if residual < tol {
            return Ok((images, residual));
        }
    }
    Err(Error::Convergence(format!(
        "image series not converged after {max_images} images (residual {residual:.2e})"
    )))
}

/// Induced-field energy of a point dipole in the nanogap.
pub fn npom_energy(
    mu: Vec3,
    geom: &NpomGeometry,
    tol: f64,
    max_images: usize,
) -> Result<NpomEnergy> {
    geom.validate()?;
    let seed = ImageElement::dipole_at(geom.molecule, mu);
    let (images, residual) = image_series(&seed, geom, tol, max_images, geom.molecule)?;
    let mut e_ind = Vec3::ZERO;
    for img in &images {
        e_ind = e_ind + img.field_at(geom.molecule);
    }
    Ok(NpomEnergy {
        u: -0.5 * e_ind.dot(mu),
        residual,
        images_used: images.len(),
    })
}

/// Total potential from the seed and all its images at a point; vanishes on
/// the conductor surfaces for a converged series.
pub fn npom_surface_potential(
    mu: Vec3,
    geom: &NpomGeometry,
    tol: f64,
    max_images: usize,
    at: Vec3,
) -> Result<f64> {
    geom.validate()?;
    let seed = ImageElement::dipole_at(geom.molecule, mu);
    let (images, _) = image_series(&seed, geom, tol, max_images, geom.molecule)?;
    let mut phi = seed.potential_at(at);
    for img in &images {
        phi += img.potential_at(at);
    }
    Ok(phi)
}

/// Multi-dipole gap energy: induced self+cross terms via the image series of
/// every source, plus the direct dipole-dipole sum.
pub fn npom_energy_multi(
    sources: &[(Vec3, Vec3)],
    geom: &NpomGeometry,
    tol: f64,
    max_images: usize,
) -> Result<f64> {
    if sources.is_empty() {
        return Ok(0.0);
    }
    let mut all_images = Vec::new();
    for &(pos, mu) in sources {
        let mut g = *geom;
        g.molecule = pos;
        g.validate()?;
        let seed = ImageElement::dipole_at(pos, mu);
        let (images, _) = image_series(&seed, geom, tol, max_images, pos)?;
        all_images.push(images);
    }
    let mut u = 0.0;
    for (i, &(pos, mu)) in sources.iter().enumerate() {
        let mut e_ind = Vec3::ZERO;
        for imgs in &all_images {
            for img in imgs {
                e_ind = e_ind + img.field_at(pos);
            }
        }
        u += -0.5 * e_ind.dot(mu);
        for &(pos2, mu2) in sources.iter().skip(i + 1) {
            u += crate::vec3::dipole_dipole_energy(mu, pos, mu2, pos2);
        }
    }
    Ok(u)
}

/// Energy of dipoles outside a single grounded sphere (one image each; used
/// as the full-electrostatics cross-check of the single-mode ensemble
/// treatment). Returns (induced part, direct dipole-dipole part).
pub fn sphere_image_energy(
    sources: &[(Vec3, Vec3)],
    center: Vec3,
    radius: f64,
) -> Result<(f64, f64)> {
    let images: Vec<ImageElement> = sources
        .iter()
        .map(|&(pos, mu)| image_in_sphere(&ImageElement::dipole_at(pos, mu), center, radius))
        .collect::<Result<Vec<_>>>()?;
    let mut induced = 0.0;
    let mut direct = 0.0;
    for (i, &(pos, mu)) in sources.iter().enumerate() {
        let mut e = Vec3::ZERO;
        for img in &images {
            e = e + img.field_at(pos);
        }
        induced += -0.5 * e.dot(mu);
        for &(pos2, mu2) in sources.iter().skip(i + 1) {
            direct += crate::vec3::dipole_dipole_energy(mu, pos, mu2, pos2);
        }
    }
    Ok((induced, direct))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NpomSweepRow {
    /// Gap (bohr).
    pub gap: f64,
    pub gap_nm: f64,
    /// Induced energy of the minimum-configuration dipole (hartree).
    pub u_min: f64,
    /// Induced energy of the transition-state dipole (hartree).
    pub u_ts: f64,
    /// Barrier change U(mu_TS) - U(mu_min) (hartree).
    pub delta_e_b: f64,
    pub delta_e_b_ev: f64,
    /// Effective single-mode coupling sqrt(-2 U)/|mu| (a.u.).
    pub lambda_eff: f64,
    /// 4 pi / lambda_eff^2 (bohr^3).
    pub v_eff: f64,
    pub v_eff_nm3: f64,
    pub images_used: usize,
    pub residual: f64,
}

/// Gap sweep of the barrier change for a (minimum, transition-state) dipole
/// pair; the molecule stays at the same fractional position in each gap.
pub fn npom_barrier_sweep(
    mu_min: Vec3,
    mu_ts: Vec3,
    radius: f64,
    gaps: &[f64],
    molecule_fraction: f64,
    tol: f64,
    max_images: usize,
) -> Vec<Result<NpomSweepRow>> {
    gaps.iter()
        .map(|&gap| {
            let geom = NpomGeometry {
                radius,
                gap,
                molecule: Vec3::Z * (gap * molecule_fraction),
            };
            let e_min = npom_energy(mu_min, &geom, tol, max_images)?;
            let e_ts = npom_energy(mu_ts, &geom, tol, max_images)?;
            let mu_norm = mu_min.norm();
            let lambda_eff = if e_min.u < 0.0 && mu_norm > 0.0 {
                (-2.0 * e_min.u).sqrt() / mu_norm
            } else {
                0.0
            };
            let v_eff = if lambda_eff > 0.0 {
                4.0 * std::f64::consts::PI / (lambda_eff * lambda_eff)
            } else {
                f64::INFINITY
            };
            let delta = e_ts.u - e_min.u;
            Ok(NpomSweepRow {
                gap,
                gap_nm: bohr_to_nm(gap),
                u_min: e_min.u,
                u_ts: e_ts.u,
                delta_e_b: delta,
                delta_e_b_ev: hartree_to_ev(delta),
                lambda_eff,
                v_eff,
                v_eff_nm3: v_eff * bohr_to_nm(1.0).powi(3),
                images_used: e_min.images_used.max(e_ts.images_used),
                residual: e_min.residual.max(e_ts.residual),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::vec3;

    #[test]
    fn classical_point_charge_image() {
        let src = ImageElement {
            position: vec3(0.0, 0.0, 10.0),
            charge: 2.0,
            dipole: Vec3::ZERO,
        };
        let img = image_in_sphere(&src, Vec3::ZERO, 4.0).unwrap();
        assert!((img.charge + 2.0 * 4.0 / 10.0).abs() < 1e-14);
        assert!((img.position.z - 16.0 / 10.0).abs() < 1e-14);
        assert!(img.dipole.norm() < 1e-15);
    }

    #[test]
    fn radial_dipole_total_induced_moment_is_point_polarizability_result() {
        // total sphere-frame moment mu' + r' q' = (R/r)^3 [3 rhat (rhat.mu) - mu]
        let r = 12.0;
        let radius = 5.0;
        let mu = vec3(0.0, 0.0, 1.7); // radial (source on z axis)
        let src = ImageElement::dipole_at(vec3(0.0, 0.0, r), mu);
        let img = image_in_sphere(&src, Vec3::ZERO, radius).unwrap();
        let total = img.dipole + img.position * img.charge;
        let k3 = (radius / r).powi(3);
        let expect = (vec3(0.0, 0.0, 3.0 * 1.7) - mu) * k3;
        assert!((total - expect).norm() < 1e-14);
    }

    #[test]
    fn sphere_boundary_potential_vanishes() {
        // source + image null the potential on the sphere surface
        let radius = 7.0;
        let src = ImageElement {
            position: vec3(3.0, -2.0, 15.0),
            charge: 0.8,
            dipole: vec3(0.4, 1.1, -0.9),
        };
        let img = image_in_sphere(&src, Vec3::ZERO, radius).unwrap();
        for &(th, ph) in &[(0.3, 0.9), (1.2, 4.0), (2.5, 2.2), (3.0, 5.8)] {
            let p = vec3(
                radius * f64::sin(th) * f64::cos(ph),
                radius * f64::sin(th) * f64::sin(ph),
                radius * f64::cos(th),
            );
            let phi = src.potential_at(p) + img.potential_at(p);
            let scale = src.potential_at(p).abs().max(1e-3);
            assert!(phi.abs() < 1e-10 * scale, "phi = {phi:.3e} at angle ({th},{ph})");
        }
    }

    #[test]
    fn plane_image_dipole_energies() {
        // perpendicular: U = -mu^2/(8 d^3); parallel: U = -mu^2/(16 d^3)
        let d = 6.0;
        let plane = Plane {
            point: Vec3::ZERO,
            normal: Vec3::Z,
        };
        let perp = ImageElement::dipole_at(vec3(0.0, 0.0, d), Vec3::Z * 1.3);
        let img = image_in_plane(&perp, &plane).unwrap();
        let u = -0.5 * img.field_at(perp.position).dot(perp.dipole);
        assert!((u + 1.3 * 1.3 / (8.0 * d * d * d)).abs() < 1e-15);

        let par = ImageElement::dipole_at(vec3(0.0, 0.0, d), Vec3::X * 1.3);
        let img = image_in_plane(&par, &plane).unwrap();
        let u = -0.5 * img.field_at(par.position).dot(par.dipole);
        assert!((u + 1.3 * 1.3 / (16.0 * d * d * d)).abs() < 1e-15);

        // boundary condition on the mirror
        for &(x, y) in &[(0.5, 0.0), (-3.0, 2.0), (10.0, -7.0)] {
            let at = vec3(x, y, 0.0);
            let phi = perp.potential_at(at)
                + image_in_plane(&perp, &plane).unwrap().potential_at(at);
            assert!(phi.abs() < 1e-14);
        }
    }

    #[test]
    fn on_plane_source_rejected() {
        let plane = Plane {
            point: Vec3::ZERO,
            normal: Vec3::Z,
        };
        let src = ImageElement::dipole_at(vec3(1.0, 1.0, 0.0), Vec3::Z);
        assert!(image_in_plane(&src, &plane).is_err());
    }

    #[test]
    fn sphere_removed_recovers_plane_energy() {
        let gap = 30.0;
        let geom = NpomGeometry {
            radius: 0.0,
            gap,
            molecule: Vec3::Z * 10.0,
        };
        let mu = Vec3::Z * 2.0;
        let res = npom_energy(mu, &geom, 1e-12, 100).unwrap();
        let plane_only = -4.0 / (8.0 * 1000.0);
        assert!(
            (res.u - plane_only).abs() < 1e-12 * plane_only.abs(),
            "{} vs {plane_only}",
            res.u
        );
    }

    #[test]
    fn huge_gap_recovers_isolated_plane() {
        // molecule near the mirror, sphere pushed far away
        let d = 8.0;
        let geom = NpomGeometry {
            radius: 300.0,
            gap: 1.0e5,
            molecule: Vec3::Z * d,
        };
        let mu = Vec3::Z * 1.9;
        let res = npom_energy(mu, &geom, 1e-12, 10_000).unwrap();
        let plane_only = -(1.9 * 1.9) / (8.0 * d * d * d);
        assert!(
            (res.u - plane_only).abs() < 1e-6 * plane_only.abs(),
            "{} vs {plane_only}",
            res.u
        );
    }

    #[test]
    fn energy_decreases_as_gap_shrinks() {
        let mu = Vec3::Z * 2.3;
        let radius = 378.0;
        let gaps: Vec<f64> = (0..12).map(|i| 15.0 + 6.0 * i as f64).collect();
        let rows = npom_barrier_sweep(mu, Vec3::ZERO, radius, &gaps, 0.5, 1e-10, 10_000);
        let mut last = f64::MIN;
        for row in rows {
            let row = row.unwrap();
            assert!(
                row.u_min > last,
                "U must become less negative as the gap widens"
            );
            last = row.u_min;
            // lambda_eff consistency: U = -lambda^2 mu^2 / 2
            let u_back = -0.5 * row.lambda_eff.powi(2) * mu.norm2();
            assert!((u_back - row.u_min).abs() < 1e-12 * row.u_min.abs());
        }
    }

    #[test]
    fn npom_boundary_potentials_vanish() {
        let geom = NpomGeometry::midgap(100.0, 20.0);
        let mu = vec3(0.4, 0.0, 2.0);
        // points on the mirror and on the sphere surface
        let center = geom.sphere_center();
        let probes = [
            vec3(3.0, 1.0, 0.0),
            vec3(-15.0, 4.0, 0.0),
            center + (vec3(0.1, 0.2, -1.0)).normalized() * 100.0,
            center + (vec3(-0.5, 0.3, -0.9)).normalized() * 100.0,
        ];
        for at in probes {
            let phi = npom_surface_potential(mu, &geom, 1e-12, 20_000, at).unwrap();
            // compare against the bare molecular potential scale at that point
            let bare = ImageElement::dipole_at(geom.molecule, mu)
                .potential_at(at)
                .abs()
                .max(1e-9);
            assert!(phi.abs() < 1e-8 * bare.max(1e-4), "phi = {phi:.3e}");
        }
    }

    #[test]
    fn superposition_of_two_dipoles() {
        let geom = NpomGeometry::midgap(80.0, 24.0);
        let a = (vec3(0.0, 0.0, 12.0), Vec3::Z * 1.4);
        let b = (vec3(6.0, 0.0, 9.0), vec3(0.5, 0.0, 1.0));
        let tol = 1e-12;
        let joint = npom_energy_multi(&[a, b], &geom, tol, 20_000).unwrap();
        let mut ga = geom;
        ga.molecule = a.0;
        let ua = npom_energy(a.1, &ga, tol, 20_000).unwrap().u;
        let mut gb = geom;
        gb.molecule = b.0;
        let ub = npom_energy(b.1, &gb, tol, 20_000).unwrap().u;
        // cross term: dipole a in the image field of b (reciprocity makes the
        // two cross contributions equal, each carrying 1/2)
        let seed_b = ImageElement::dipole_at(b.0, b.1);
        let (images_b, _) = image_series(&seed_b, &geom, tol, 20_000, a.0).unwrap();
        let mut e_cross = Vec3::ZERO;
        for img in &images_b {
            e_cross = e_cross + img.field_at(a.0);
        }
        let cross_images = -e_cross.dot(a.1);
        let direct = crate::vec3::dipole_dipole_energy(a.1, a.0, b.1, b.0);
        let expect = ua + ub + cross_images + direct;
        assert!(
            (joint - expect).abs() < 1e-10 * expect.abs(),
            "{joint} vs {expect}"
        );
    }

    #[test]
    fn geometric_series_convergence() {
        let geom = NpomGeometry::midgap(380.0, 17.0);
        let res = npom_energy(Vec3::Z * 2.3, &geom, 1e-10, 10_000).unwrap();
        assert!(res.residual < 1e-10);
        assert!(res.images_used < 2000);
    }
}
