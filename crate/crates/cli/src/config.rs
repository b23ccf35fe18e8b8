//! Run configuration: strict TOML (unknown keys are errors) with defaults
//! matching the production setup. Every run emits its resolved form plus a
//! content hash that is embedded in all outputs.

use cavchem::cache::content_key;
use cavchem::grid::GridSpec;
use cavchem::shin_metiu::ShinMetiuParams;
use cavchem::units::angstrom_to_bohr;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grids: GridsSection,
    pub cavity: CavitySection,
    pub rates: RatesSection,
    pub sweep: SweepSection,
    pub npom: NpomSection,
    pub collective: CollectiveSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSection::default(),
            grids: GridsSection::default(),
            cavity: CavitySection::default(),
            rates: RatesSection::default(),
            sweep: SweepSection::default(),
            npom: NpomSection::default(),
            collective: CollectiveSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub z: f64,
    /// Fixed-ion separation (bohr).
    pub l: f64,
    pub mass: f64,
    /// Softening length (bohr).
    pub rc: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            z: 1.0,
            l: angstrom_to_bohr(10.0),
            mass: 1836.0,
            rc: angstrom_to_bohr(1.5),
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ShinMetiuParams {
        ShinMetiuParams {
            z: self.z,
            l: self.l,
            m: self.mass,
            rc: self.rc,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsSection {
    pub x: GridSpec,
    pub r: GridSpec,
    /// Electronic states tabulated by bo-scan and the surface builders.
    pub n_states: usize,
    /// Electronic states per slice in the molecular contraction.
    pub n_electronic: usize,
    /// Molecular cutoff: barrier top + this many vibrational quanta.
    pub e_cut_quanta: f64,
}

impl Default for GridsSection {
    fn default() -> Self {
        GridsSection {
            x: GridSpec {
                min: -20.0,
                max: 20.0,
                n_elements: 40,
                order: 8,
            },
            r: GridSpec {
                min: -8.5,
                max: 8.5,
                n_elements: 40,
                order: 8,
            },
            n_states: 17,
            n_electronic: 8,
            e_cut_quanta: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavitySection {
    pub lambda: f64,
    /// Mode frequency (hartree); omitted = resonance with the fitted
    /// vibrational frequency.
    pub omega_c: Option<f64>,
    /// Photon truncation; omitted = automatic.
    pub n_fock: Option<usize>,
    pub include_dipole_self_energy: bool,
    pub max_dim: usize,
}

impl Default for CavitySection {
    fn default() -> Self {
        CavitySection {
            lambda: 0.02,
            omega_c: None,
            n_fock: None,
            include_dipole_self_energy: false,
            max_dim: 12_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub temperature: f64,
    /// Arrhenius grid; omitted = 8 points over 250-450 K.
    pub temperatures: Option<Vec<f64>>,
    pub t_f_fs: f64,
    pub t_max_fs: f64,
    pub dt_fs: f64,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection {
            temperature: 300.0,
            temperatures: None,
            t_f_fs: 35.0,
            t_max_fs: 50.0,
            dt_fs: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub lambda_list: Vec<f64>,
    /// Frequency scan bounds as multiples of the vibrational frequency.
    pub omega_factor_min: f64,
    pub omega_factor_max: f64,
    pub omega_count: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            lambda_list: vec![0.0, 0.01, 0.02, 0.035],
            omega_factor_min: 0.2,
            omega_factor_max: 5.0,
            omega_count: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NpomSection {
    pub radius_nm: f64,
    pub gaps_nm: String,
    /// Molecule height as a fraction of the gap.
    pub placement_fraction: f64,
    pub tolerance: f64,
    pub max_images: usize,
}

impl Default for NpomSection {
    fn default() -> Self {
        NpomSection {
            radius_nm: 20.0,
            gaps_nm: "0.5:5:0.1".into(),
            placement_fraction: 0.5,
            tolerance: 1e-10,
            max_images: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectiveSection {
    /// Sphere diameter (nm).
    pub sphere_nm: f64,
    /// Shell of molecule distances from the sphere surface (nm).
    pub shell_nm: [f64; 2],
    pub min_dist_nm: f64,
    pub n_list: String,
    pub seeds: usize,
    /// Presentation-only mode energy (eV); cancels in the reported shifts.
    pub mode_energy_ev: f64,
}

impl Default for CollectiveSection {
    fn default() -> Self {
        CollectiveSection {
            sphere_nm: 8.0,
            shell_nm: [1.0, 16.0],
            min_dist_nm: 1.5,
            n_list: "100:6000:log8".into(),
            seeds: 10,
            mode_energy_ev: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub cache: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { cache: true }
    }
}

impl RunConfig {
    pub fn load(path: Option<&std::path::Path>) -> Result<Self, String> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("config parse error: {e}"))
            }
        }
    }

    /// Canonical JSON of the resolved config (plus seed), and its hash.
    pub fn resolved_json(&self, seed: u64) -> (String, String) {
        let value = serde_json::json!({
            "config": self,
            "seed": seed,
        });
        let text = serde_json::to_string_pretty(&value).expect("config serializes");
        let hash = content_key(&text);
        (text, hash)
    }
}

/// Parse "start:stop:step" (inclusive-ish stop) into a numeric list.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range '{spec}' is not start:stop:step"));
    }
    let start: f64 = parts[0].parse().map_err(|e| format!("bad start: {e}"))?;
    let stop: f64 = parts[1].parse().map_err(|e| format!("bad stop: {e}"))?;
    let step: f64 = parts[2].parse().map_err(|e| format!("bad step: {e}"))?;
    if step <= 0.0 || stop < start {
        return Err(format!("range '{spec}' is empty or inverted"));
    }
    let mut out = Vec::new();
    let mut x = start;
    while x <= stop + 1e-9 * step {
        out.push(x);
        x += step;
    }
    Ok(out)
}

/// Parse "min:max:logN" or "min:max:N" into a count list; a bare "log"
/// means 8 log-spaced points.
pub fn parse_count_list(spec: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("count list '{spec}' is not min:max:[log]N"));
    }
    let min: f64 = parts[0].parse().map_err(|e| format!("bad min: {e}"))?;
    let max: f64 = parts[1].parse().map_err(|e| format!("bad max: {e}"))?;
    let (log, n_str) = if let Some(rest) = parts[2].strip_prefix("log") {
        (true, rest)
    } else {
        (false, parts[2])
    };
    let n: usize = if log && n_str.is_empty() {
        8
    } else {
        n_str.parse().map_err(|e| format!("bad count: {e}"))?
    };
    if n < 1 || min <= 0.0 || max < min {
        return Err(format!("count list '{spec}' is empty or inverted"));
    }
    let mut out = Vec::new();
    for i in 0..n {
        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
        let v = if log {
            (min.ln() + t * (max.ln() - min.ln())).exp()
        } else {
            min + t * (max - min)
        };
        out.push(v.round() as usize);
    }
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let text = "[model]\nz = 1.0\nbanana = 3\n";
        let parsed: Result<RunConfig, _> = toml::from_str(text);
        assert!(parsed.is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.grids.n_states, 17);
        let (j1, h1) = c.resolved_json(1);
        let (j2, h2) = back.resolved_json(1);
        assert_eq!(j1, j2);
        assert_eq!(h1, h2);
        let (_, h3) = c.resolved_json(2);
        assert_ne!(h1, h3, "seed is part of the hash");
    }

    #[test]
    fn range_parsers() {
        let r = parse_range("0.5:1.0:0.25").unwrap();
        assert_eq!(r.len(), 3);
        assert!(parse_range("1:0:1").is_err());
        let c = parse_count_list("100:6000:log4").unwrap();
        assert_eq!(c.first(), Some(&100));
        assert_eq!(c.last(), Some(&6000));
        assert_eq!(parse_count_list("100:6000:log").unwrap().len(), 8);
        assert!(parse_count_list("0:10:log3").is_err());
    }
}
