//! Unit conversions. All internal quantities are in Hartree atomic units;
//! these constants convert at the boundaries only.

/// Hartree in electronvolt.
pub const HARTREE_EV: f64 = 27.211386;
/// Bohr radius in nanometer.
pub const BOHR_NM: f64 = 0.052917721;
/// Bohr radius in angstrom.
pub const BOHR_ANGSTROM: f64 = 0.52917721;
/// Boltzmann constant in hartree per kelvin.
pub const KB_HARTREE_PER_K: f64 = 3.166811563e-6;
/// One femtosecond in atomic time units.
pub const FS_ATOMIC: f64 = 41.34137;

/// Debye in atomic units of dipole moment.
pub const DEBYE_AU: f64 = 0.3934303;

#[inline]
pub fn ev_to_hartree(ev: f64) -> f64 {
    ev / HARTREE_EV
}

#[inline]
pub fn hartree_to_ev(h: f64) -> f64 {
    h * HARTREE_EV
}

#[inline]
pub fn nm_to_bohr(nm: f64) -> f64 {
    nm / BOHR_NM
}

#[inline]
pub fn bohr_to_nm(b: f64) -> f64 {
    b * BOHR_NM
}

#[inline]
pub fn angstrom_to_bohr(a: f64) -> f64 {
    a / BOHR_ANGSTROM
}

#[inline]
pub fn fs_to_au(fs: f64) -> f64 {
    fs * FS_ATOMIC
}

#[inline]
pub fn kelvin_to_beta(t: f64) -> f64 {
    1.0 / (KB_HARTREE_PER_K * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert!((ev_to_hartree(hartree_to_ev(0.3)) - 0.3).abs() < 1e-15);
        assert!((nm_to_bohr(bohr_to_nm(7.0)) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn room_temperature_scale() {
        // k_B * 300 K is about 0.95 kcal/mol ~ 9.5e-4 hartree
        let kt = KB_HARTREE_PER_K * 300.0;
        assert!(kt > 9.4e-4 && kt < 9.6e-4);
    }
}
