mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cavchem::cache::{CachePayload, DiskCache};
use cavchem::cboa::{
    cboa_surface, critical_points, default_q_grid, export_surface, tst_rate_ratio,
    zero_point_correction,
};
use cavchem::collective::{
    collective_barrier, dipole_dipole_sum, dipole_sphere_energy, most_coupled, rate_factor,
    sample_ensemble, OrientationPolicy,
};
use cavchem::coupled::{
    coupled_system, molecular_eigenbasis, n_fock_for, CavityMode, CoupledOptions, ECut,
    MolecularBasis, MolecularBasisOptions,
};
use cavchem::error::Error as CoreError;
use cavchem::grid::Grid1D;
use cavchem::npom::{npom_barrier_sweep, NpomSweepRow};
use cavchem::pert::{
    parse_scan_csv, pert_path_value, scan_analysis, sphere_modes, DielectricModel,
};
use cavchem::rates::{
    arrhenius_fit, default_temperature_grid, quantum_rate, rate_vs_frequency, RateSystem,
    TimeGrid,
};
use cavchem::shin_metiu::{
    bare_barrier, bo_scan, harmonic_fit, well_minimum, ElectronicStructureTable, Well,
};
use cavchem::table_io::write_table;
use cavchem::units::{fs_to_au, hartree_to_ev, nm_to_bohr};
use cavchem::vec3::Vec3;

use config::{parse_count_list, parse_range, RunConfig};
use output::OutputDir;

#[derive(Parser)]
#[command(
    name = "cavchem",
    about = "Cavity-modified ground-state chemistry: exact rates, cavity surfaces, nanogap electrostatics, collective scaling",
    version
)]
struct Cli {
    /// Strict TOML configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Eigensystem cache directory; omitted = <out-dir>/cache.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate surfaces, dipoles, and polarizability over the nuclear grid.
    BoScan,
    /// Flux-side correlation rate at one coupling and temperature.
    QuantumRate {
        #[arg(long)]
        lambda: Option<f64>,
        /// Mode frequency (hartree); default resonant.
        #[arg(long)]
        omega_c: Option<f64>,
        #[arg(long)]
        temperature: Option<f64>,
    },
    /// Temperature sweep and Arrhenius fit per coupling strength.
    Arrhenius {
        /// Comma-separated coupling list; default from config.
        #[arg(long)]
        lambda_list: Option<String>,
    },
    /// Rate ratio across cavity frequencies at fixed coupling.
    RateVsFrequency {
        #[arg(long)]
        lambda: Option<f64>,
        /// Scan bounds as multiples of the vibrational frequency.
        #[arg(long)]
        omega_factors: Option<String>,
    },
    /// Ground-state (R, q) surface export.
    Cboa {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        omega_c: Option<f64>,
    },
    /// Critical points, barriers, zero-point corrections, TST ratios.
    Barriers {
        #[arg(long)]
        lambda_list: Option<String>,
    },
    /// Second-order barrier change vs the full surface, per coupling.
    Pert {
        #[arg(long)]
        lambda_list: Option<String>,
    },
    /// Shifted-path analysis of an external energy/dipole scan.
    ScanAnalyze {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long)]
        lambda_list: Option<String>,
        /// Field axis: x, y, or z.
        #[arg(long, default_value = "z")]
        axis: String,
    },
    /// Image-series gap sweep for the sphere-on-mirror geometry.
    NpomSweep {
        #[arg(long)]
        radius_nm: Option<f64>,
        /// start:stop:step in nm.
        #[arg(long)]
        gaps_nm: Option<String>,
        /// Electronic-structure table (CSV path) supplying the dipole pair.
        #[arg(long)]
        dipole_source: Option<PathBuf>,
    },
    /// Ensemble scaling around a nanosphere.
    Collective {
        /// min:max:[log]N molecule counts.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        sphere_nm: Option<f64>,
        /// min:max shell from the surface, nm.
        #[arg(long)]
        shell_nm: Option<String>,
        #[arg(long)]
        min_dist_nm: Option<f64>,
    },
    /// Emit the data behind a bundled figure id (fig2, fig3c, fig4, fig5, fig7).
    Reproduce { figure: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError {
            code: if e.is_validation() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 3,
            message: format!("io: {e}"),
        }
    }
}

/// Everything the physics commands need, built once.
struct Context {
    cfg: RunConfig,
    out: OutputDir,
    cache: Option<DiskCache>,
    seed: u64,
    grid_x: Grid1D,
    grid_r: Grid1D,
    tg: TimeGrid,
    t_f: f64,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self, CliError> {
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
        }
        let cfg = RunConfig::load(cli.config.as_deref()).map_err(CliError::validation)?;
        let (resolved, hash) = cfg.resolved_json(cli.seed);
        let out = OutputDir::new(&cli.out_dir, &resolved, &hash)?;
        let cache = if cfg.output.cache {
            let dir = cli
                .cache_dir
                .clone()
                .unwrap_or_else(|| cli.out_dir.join("cache"));
            Some(DiskCache::new(dir)?)
        } else {
            None
        };
        let grid_x = cfg.grids.x.build()?;
        let grid_r = cfg.grids.r.build()?;
        let tg = TimeGrid {
            t_max: fs_to_au(cfg.rates.t_max_fs),
            dt: fs_to_au(cfg.rates.dt_fs),
        };
        let t_f = fs_to_au(cfg.rates.t_f_fs);
        if t_f > tg.t_max {
            return Err(CliError::validation(format!(
                "t_f = {} fs exceeds t_max = {} fs",
                cfg.rates.t_f_fs, cfg.rates.t_max_fs
            )));
        }
        Ok(Context {
            cfg,
            out,
            cache,
            seed: cli.seed,
            grid_x,
            grid_r,
            tg,
            t_f,
        })
    }

    fn table(&self) -> Result<ElectronicStructureTable, CliError> {
        Ok(bo_scan(
            &self.cfg.model.params(),
            &self.grid_x,
            &self.grid_r,
            self.cfg.grids.n_states,
        )?)
    }

    fn basis(&self) -> Result<MolecularBasis, CliError> {
        Ok(molecular_eigenbasis(
            &self.cfg.model.params(),
            &self.grid_x,
            &self.grid_r,
            MolecularBasisOptions {
                n_electronic: self.cfg.grids.n_electronic,
                e_cut: ECut::BarrierMargin {
                    quanta: self.cfg.grids.e_cut_quanta,
                },
            },
        )?)
    }

    fn coupled_opts(&self) -> CoupledOptions {
        CoupledOptions {
            include_dipole_self_energy: self.cfg.cavity.include_dipole_self_energy,
            max_dim: self.cfg.cavity.max_dim,
        }
    }

    fn basis_key(&self) -> String {
        serde_json::json!({
            "model": self.cfg.model,
            "grids": self.cfg.grids,
        })
        .to_string()
    }

    /// Coupled rate inputs, through the disk cache when enabled.
    fn coupled_rate_system(
        &self,
        basis: &MolecularBasis,
        lambda: f64,
        omega_c: f64,
        n_fock: usize,
    ) -> Result<RateSystem, CliError> {
        let key = format!(
            "coupled-rate-system|{}|lambda={lambda:.17e}|omega={omega_c:.17e}|nfock={n_fock}|dse={}",
            self.basis_key(),
            self.cfg.cavity.include_dipole_self_energy,
        );
        let compute = || -> cavchem::Result<CachePayload> {
            let mode = CavityMode::new(omega_c, lambda, n_fock);
            let sys = coupled_system(basis, &mode, &self.coupled_opts())?;
            let rs = sys.rate_system(basis, None);
            let k = rs.energies.len();
            let mut payload = CachePayload::default();
            payload.insert("energies", vec![k], rs.energies.clone());
            payload.insert("theta", vec![k, k], rs.theta_flat());
            payload.meta = serde_json::json!({"lambda": lambda, "omega_c": omega_c, "n_fock": n_fock});
            Ok(payload)
        };
        let payload = match &self.cache {
            Some(cache) => cache.get_or_compute(&key, compute)?,
            None => compute()?,
        };
        let (_, energies) = payload.get("energies")?.clone();
        let (_, theta_flat) = payload.get("theta")?;
        Ok(RateSystem::from_flat(energies, theta_flat)?)
    }

    fn resolve_omega(&self, basis: &MolecularBasis, omega_c: Option<f64>) -> f64 {
        omega_c.or(self.cfg.cavity.omega_c).unwrap_or(basis.omega_nu)
    }

    fn auto_n_fock(&self, basis: &MolecularBasis, lambda: f64, omega_c: f64, t_max: f64) -> usize {
        self.cfg.cavity.n_fock.unwrap_or_else(|| {
            let mu_max = basis
                .table
                .mu00()
                .iter()
                .map(|m| m.abs())
                .fold(0.0f64, f64::max);
            n_fock_for(omega_c, lambda, t_max, mu_max, 8)
        })
    }
}

fn parse_lambda_list(arg: Option<&str>, cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let list = match arg {
        None => cfg.sweep.lambda_list.clone(),
        Some(s) => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::validation(format!("bad lambda '{t}': {e}")))
            })
            .collect::<Result<Vec<f64>, CliError>>()?,
    };
    if list.is_empty() {
        return Err(CliError::validation("empty coupling sweep list"));
    }
    Ok(list)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::new(&cli)?;
    match &cli.command {
        Command::BoScan => cmd_bo_scan(&ctx),
        Command::QuantumRate {
            lambda,
            omega_c,
            temperature,
        } => cmd_quantum_rate(&ctx, *lambda, *omega_c, *temperature),
        Command::Arrhenius { lambda_list } => cmd_arrhenius(&ctx, lambda_list.as_deref()),
        Command::RateVsFrequency {
            lambda,
            omega_factors,
        } => cmd_rate_vs_frequency(&ctx, *lambda, omega_factors.as_deref()),
        Command::Cboa { lambda, omega_c } => cmd_cboa(&ctx, *lambda, *omega_c),
        Command::Barriers { lambda_list } => cmd_barriers(&ctx, lambda_list.as_deref()),
        Command::Pert { lambda_list } => cmd_pert(&ctx, lambda_list.as_deref()),
        Command::ScanAnalyze {
            scan,
            lambda_list,
            axis,
        } => cmd_scan_analyze(&ctx, scan, lambda_list.as_deref(), axis),
        Command::NpomSweep {
            radius_nm,
            gaps_nm,
            dipole_source,
        } => cmd_npom(&ctx, *radius_nm, gaps_nm.as_deref(), dipole_source.as_deref()),
        Command::Collective {
            n,
            seeds,
            sphere_nm,
            shell_nm,
            min_dist_nm,
        } => cmd_collective(
            &ctx,
            n.as_deref(),
            *seeds,
            *sphere_nm,
            shell_nm.as_deref(),
            *min_dist_nm,
        ),
        Command::Reproduce { figure } => cmd_reproduce(&ctx, figure),
    }
}

fn cmd_bo_scan(ctx: &Context) -> Result<(), CliError> {
    let table = ctx.table()?;
    let path = ctx.out.path("table.csv");
    write_table(&table, &path)?;
    let mass = ctx.cfg.model.mass;
    let fit = harmonic_fit(&table, mass, Well::Left)?;
    let barrier = bare_barrier(&table, mass)?;
    ctx.out.write_json(
        "bo_scan_summary.json",
        &serde_json::json!({
            "omega_nu_hartree": fit.omega_nu,
            "omega_nu_mev": hartree_to_ev(fit.omega_nu) * 1000.0,
            "r0_bohr": fit.r0,
            "dmu_au_per_bohr": fit.dmu,
            "mu_v_au": fit.mu_v,
            "barrier_hartree": barrier,
            "barrier_ev": hartree_to_ev(barrier),
            "table_csv": path.display().to_string(),
        }),
    )?;
    println!("table written to {}", path.display());
    Ok(())
}

fn cmd_quantum_rate(
    ctx: &Context,
    lambda: Option<f64>,
    omega_c: Option<f64>,
    temperature: Option<f64>,
) -> Result<(), CliError> {
    let basis = ctx.basis()?;
    let lambda = lambda.unwrap_or(ctx.cfg.cavity.lambda);
    let t = temperature.unwrap_or(ctx.cfg.rates.temperature);
    let omega = ctx.resolve_omega(&basis, omega_c);
    let bare = quantum_rate(&basis.rate_system(), t, ctx.t_f, &ctx.tg)?;
    let rs = if lambda == 0.0 {
        basis.rate_system()
    } else {
        let n_fock = ctx.auto_n_fock(&basis, lambda, omega, t.max(450.0));
        ctx.coupled_rate_system(&basis, lambda, omega, n_fock)?
    };
    let res = quantum_rate(&rs, t, ctx.t_f, &ctx.tg)?;
    let rows: Vec<Vec<f64>> = res
        .times
        .iter()
        .zip(&res.c_ff)
        .map(|(&t, &c)| vec![t, t / fs_to_au(1.0), c])
        .collect();
    ctx.out
        .write_csv("correlation.csv", &["t_au", "t_fs", "c_ff"], &rows, None)?;
    ctx.out.write_json(
        "quantum_rate.json",
        &serde_json::json!({
            "lambda": lambda,
            "omega_c_hartree": omega,
            "temperature_k": t,
            "t_f_fs": ctx.cfg.rates.t_f_fs,
            "k_au": res.k,
            "k_per_second": res.k / 2.4188843265e-17,
            "rate_ratio_vs_bare": res.k / bare.k,
            "q_r": res.q_r,
            "warning": res.warning,
        }),
    )?;
    println!(
        "k({t} K, lambda={lambda}) = {:.6e} a.u.; ratio vs bare = {:.6}",
        res.k,
        res.k / bare.k
    );
    if res.warning.is_some() {
        return Err(CliError::numerical(res.warning.unwrap()));
    }
    Ok(())
}

fn cmd_arrhenius(ctx: &Context, lambda_list: Option<&str>) -> Result<(), CliError> {
    let lambdas = parse_lambda_list(lambda_list, &ctx.cfg)?;
    let basis = ctx.basis()?;
    let omega = ctx.resolve_omega(&basis, None);
    let temps = ctx
        .cfg
        .rates
        .temperatures
        .clone()
        .unwrap_or_else(default_temperature_grid);
    if temps.len() < 4 {
        return Err(CliError::validation(
            "need at least 4 temperatures for an Arrhenius fit",
        ));
    }
    let t_hot = temps.iter().cloned().fold(300.0f64, f64::max);
    let mut fits = Vec::new();
    for &lambda in &lambdas {
        let rs = if lambda == 0.0 {
            basis.rate_system()
        } else {
            let n_fock = ctx.auto_n_fock(&basis, lambda, omega, t_hot);
            ctx.coupled_rate_system(&basis, lambda, omega, n_fock)?
        };
        let mut rows = Vec::new();
        let mut points = Vec::new();
        for &t in &temps {
            let res = quantum_rate(&rs, t, ctx.t_f, &ctx.tg)?;
            points.push((t, res.k));
            rows.push(vec![t, 1.0 / t, res.k, (res.k / t).ln()]);
        }
        let fit = arrhenius_fit(&points)?;
        let footer = serde_json::json!({
            "lambda": lambda,
            "e_b_eff_hartree": fit.e_b_eff,
            "e_b_eff_ev": hartree_to_ev(fit.e_b_eff),
            "prefactor": fit.prefactor,
            "r_squared": fit.r_squared,
        });
        ctx.out.write_csv(
            &format!("arrhenius_lambda_{lambda:.4}.csv"),
            &["temperature_k", "inv_t", "k_au", "ln_k_over_t"],
            &rows,
            Some(&footer),
        )?;
        println!(
            "lambda={lambda}: E_b_eff = {:.6} ha ({:.4} eV), R^2 = {:.6}",
            fit.e_b_eff,
            hartree_to_ev(fit.e_b_eff),
            fit.r_squared
        );
        fits.push(footer);
    }
    ctx.out
        .write_json("arrhenius_fits.json", &serde_json::json!({"fits": fits}))?;
    Ok(())
}

fn cmd_rate_vs_frequency(
    ctx: &Context,
    lambda: Option<f64>,
    omega_factors: Option<&str>,
) -> Result<(), CliError> {
    let basis = ctx.basis()?;
    let lambda = lambda.unwrap_or(ctx.cfg.cavity.lambda);
    let (fmin, fmax, count) = match omega_factors {
        None => (
            ctx.cfg.sweep.omega_factor_min,
            ctx.cfg.sweep.omega_factor_max,
            ctx.cfg.sweep.omega_count,
        ),
        Some(s) => {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(CliError::validation(
                    "omega-factors must be min:max:count (multiples of the vibrational frequency)",
                ));
            }
            (
                parts[0]
                    .parse()
                    .map_err(|e| CliError::validation(format!("bad min: {e}")))?,
                parts[1]
                    .parse()
                    .map_err(|e| CliError::validation(format!("bad max: {e}")))?,
                parts[2]
                    .parse()
                    .map_err(|e| CliError::validation(format!("bad count: {e}")))?,
            )
        }
    };
    if count < 2 || fmin <= 0.0 || fmax <= fmin {
        return Err(CliError::validation("empty frequency scan"));
    }
    let omegas: Vec<f64> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            basis.omega_nu * (fmin.ln() + t * (fmax.ln() - fmin.ln())).exp()
        })
        .collect();
    let scan = rate_vs_frequency(
        &basis,
        lambda,
        &omegas,
        ctx.cfg.rates.temperature,
        ctx.t_f,
        &ctx.tg,
        &ctx.coupled_opts(),
    )?;
    let mut rows = Vec::new();
    let mut failed = 0usize;
    for pt in &scan.points {
        rows.push(vec![
            pt.omega_c,
            pt.omega_c / basis.omega_nu,
            pt.rate_ratio.unwrap_or(f64::NAN),
            pt.rate.unwrap_or(f64::NAN),
            pt.n_fock as f64,
        ]);
        if pt.error.is_some() {
            failed += 1;
            eprintln!(
                "omega_c = {:.5e}: {}",
                pt.omega_c,
                pt.error.as_deref().unwrap_or("")
            );
        }
    }
    ctx.out.write_csv(
        &format!("rate_vs_frequency_lambda_{lambda:.4}.csv"),
        &[
            "omega_c_hartree",
            "omega_over_omega_nu",
            "rate_ratio",
            "k_au",
            "n_fock",
        ],
        &rows,
        Some(&serde_json::json!({
            "lambda": lambda,
            "bare_rate_au": scan.bare_rate,
            "modulation": scan.modulation(),
        })),
    )?;
    println!(
        "modulation over [{fmin}, {fmax}] x omega_nu: {:?}",
        scan.modulation()
    );
    if failed > 0 {
        return Err(CliError::numerical(format!(
            "{failed} of {} frequency points failed",
            scan.points.len()
        )));
    }
    Ok(())
}

fn cmd_cboa(ctx: &Context, lambda: Option<f64>, omega_c: Option<f64>) -> Result<(), CliError> {
    let table = ctx.table()?;
    let basis_omega = harmonic_fit(&table, ctx.cfg.model.mass, Well::Left)?.omega_nu;
    let lambda = lambda.unwrap_or(ctx.cfg.cavity.lambda);
    let omega = omega_c.or(ctx.cfg.cavity.omega_c).unwrap_or(basis_omega);
    let q = default_q_grid(&table, lambda.max(1e-4), omega);
    let surface = cboa_surface(&table, lambda, omega, &q)?;
    let path = ctx.out.path("surface.csv.gz");
    export_surface(&surface, &path)?;
    println!("surface written to {}", path.display());
    Ok(())
}

fn cmd_barriers(ctx: &Context, lambda_list: Option<&str>) -> Result<(), CliError> {
    let lambdas = parse_lambda_list(lambda_list, &ctx.cfg)?;
    let table = ctx.table()?;
    let mass = ctx.cfg.model.mass;
    let omega = ctx
        .cfg
        .cavity
        .omega_c
        .unwrap_or(harmonic_fit(&table, mass, Well::Left)?.omega_nu);
    let bare = bare_barrier(&table, mass)?;
    let temperature = ctx.cfg.rates.temperature;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &lambda in &lambdas {
        let q = default_q_grid(&table, lambda.max(1e-4), omega);
        let surface = cboa_surface(&table, lambda, omega, &q)?;
        let report = critical_points(&surface)?;
        let zp = zero_point_correction(&report, mass)?;
        let ratio = tst_rate_ratio(report.barrier, bare, temperature);
        rows.push(vec![
            lambda,
            report.barrier,
            hartree_to_ev(report.barrier),
            zp.corrected_barrier,
            hartree_to_ev(zp.corrected_barrier),
            ratio,
        ]);
        reports.push(serde_json::json!({
            "lambda": lambda,
            "report": report,
            "zero_point": zp,
            "tst_ratio_vs_bare": ratio,
        }));
    }
    ctx.out.write_csv(
        "barriers.csv",
        &[
            "lambda",
            "barrier_hartree",
            "barrier_ev",
            "corrected_barrier_hartree",
            "corrected_barrier_ev",
            "tst_ratio",
        ],
        &rows,
        None,
    )?;
    ctx.out.write_json(
        "barriers.json",
        &serde_json::json!({
            "bare_barrier_hartree": bare,
            "omega_c_hartree": omega,
            "temperature_k": temperature,
            "per_lambda": reports,
        }),
    )?;
    println!("{} couplings analyzed; bare barrier {:.6} ha", lambdas.len(), bare);
    Ok(())
}

fn cmd_pert(ctx: &Context, lambda_list: Option<&str>) -> Result<(), CliError> {
    let lambdas = parse_lambda_list(lambda_list, &ctx.cfg)?;
    let table = ctx.table()?;
    let mass = ctx.cfg.model.mass;
    let omega = ctx
        .cfg
        .cavity
        .omega_c
        .unwrap_or(harmonic_fit(&table, mass, Well::Left)?.omega_nu);
    let bare = bare_barrier(&table, mass)?;
    let (r_min, v_min) = well_minimum(&table, Well::Left)?;
    let (r_top, v_top) = cavchem::shin_metiu::barrier_top(&table)?;
    let mu_min = table.mu00_interp(r_min).unwrap_or(f64::NAN);
    let mu_ts = table.mu00_interp(r_top).unwrap_or(f64::NAN);
    let temperature = ctx.cfg.rates.temperature;
    let mut rows = Vec::new();
    for &lambda in &lambdas {
        let pert_barrier =
            pert_path_value(v_top, mu_ts, lambda) - pert_path_value(v_min, mu_min, lambda);
        let q = default_q_grid(&table, lambda.max(1e-4), omega);
        let surface = cboa_surface(&table, lambda, omega, &q)?;
        let exact_barrier = critical_points(&surface)?.barrier;
        let change_ratio = if (exact_barrier - bare).abs() > 1e-14 {
            (pert_barrier - bare) / (exact_barrier - bare)
        } else {
            f64::NAN
        };
        rows.push(vec![
            lambda,
            pert_barrier,
            exact_barrier,
            hartree_to_ev(pert_barrier),
            hartree_to_ev(exact_barrier),
            change_ratio,
            tst_rate_ratio(pert_barrier, bare, temperature),
            tst_rate_ratio(exact_barrier, bare, temperature),
        ]);
    }
    ctx.out.write_csv(
        "pert_vs_exact.csv",
        &[
            "lambda",
            "pert_barrier_hartree",
            "exact_barrier_hartree",
            "pert_barrier_ev",
            "exact_barrier_ev",
            "change_ratio",
            "pert_tst_ratio",
            "exact_tst_ratio",
        ],
        &rows,
        Some(&serde_json::json!({"bare_barrier_hartree": bare})),
    )?;
    println!("{} couplings written", rows.len());
    Ok(())
}

fn cmd_scan_analyze(
    ctx: &Context,
    scan_path: &std::path::Path,
    lambda_list: Option<&str>,
    axis: &str,
) -> Result<(), CliError> {
    let lambdas = parse_lambda_list(lambda_list, &ctx.cfg)?;
    let axis = match axis {
        "x" => Vec3::X,
        "y" => Vec3::Y,
        "z" => Vec3::Z,
        other => {
            return Err(CliError::validation(format!(
                "axis must be x, y, or z (got '{other}')"
            )))
        }
    };
    let text = std::fs::read_to_string(scan_path).map_err(|e| {
        CliError::validation(format!("cannot read scan {}: {e}", scan_path.display()))
    })?;
    let scan = parse_scan_csv(&text)?;
    let report = scan_analysis(&scan, &lambdas, axis, ctx.cfg.rates.temperature)?;
    let value =
        serde_json::to_value(&report).map_err(|e| CliError::numerical(e.to_string()))?;
    ctx.out.write_json("scan_report.json", &value)?;
    println!(
        "scan report for {} couplings written to {}",
        lambdas.len(),
        ctx.out.path("scan_report.json").display()
    );
    Ok(())
}

fn npom_rows_to_csv(ctx: &Context, rows: &[cavchem::Result<NpomSweepRow>]) -> Result<usize, CliError> {
    let mut data = Vec::new();
    let mut failed = 0usize;
    for row in rows {
        match row {
            Ok(r) => data.push(vec![
                r.gap,
                r.gap_nm,
                r.u_min,
                r.u_ts,
                r.delta_e_b,
                r.delta_e_b_ev,
                r.lambda_eff,
                r.v_eff,
                r.v_eff_nm3,
                r.images_used as f64,
                r.residual,
            ]),
            Err(e) => {
                failed += 1;
                eprintln!("gap failed: {e}");
            }
        }
    }
    ctx.out.write_csv(
        "npom_sweep.csv",
        &[
            "gap_bohr",
            "gap_nm",
            "u_min_hartree",
            "u_ts_hartree",
            "delta_e_b_hartree",
            "delta_e_b_ev",
            "lambda_eff",
            "v_eff_bohr3",
            "v_eff_nm3",
            "images_used",
            "residual",
        ],
        &data,
        None,
    )?;
    Ok(failed)
}

fn cmd_npom(
    ctx: &Context,
    radius_nm: Option<f64>,
    gaps_nm: Option<&str>,
    dipole_source: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let radius_nm = radius_nm.unwrap_or(ctx.cfg.npom.radius_nm);
    let gaps_spec = gaps_nm.unwrap_or(&ctx.cfg.npom.gaps_nm);
    let gaps_nm = parse_range(gaps_spec).map_err(CliError::validation)?;
    if gaps_nm.is_empty() {
        return Err(CliError::validation("empty gap sweep"));
    }
    let table = match dipole_source {
        Some(path) => cavchem::table_io::read_table(path)?,
        None => ctx.table()?,
    };
    let (r_min, _) = well_minimum(&table, Well::Left)?;
    let (r_top, _) = cavchem::shin_metiu::barrier_top(&table)?;
    let mu_min = Vec3::Z
        * table
            .mu00_interp(r_min)
            .ok_or_else(|| CliError::numerical("dipole interpolation failed"))?;
    let mu_ts = Vec3::Z
        * table
            .mu00_interp(r_top)
            .ok_or_else(|| CliError::numerical("dipole interpolation failed"))?;
    let gaps: Vec<f64> = gaps_nm.iter().map(|&g| nm_to_bohr(g)).collect();
    let rows = npom_barrier_sweep(
        mu_min,
        mu_ts,
        nm_to_bohr(radius_nm),
        &gaps,
        ctx.cfg.npom.placement_fraction,
        ctx.cfg.npom.tolerance,
        ctx.cfg.npom.max_images,
    );
    let failed = npom_rows_to_csv(ctx, &rows)?;
    println!(
        "{} gaps written ({} failed); dipoles: mu_min = {:.4}, mu_ts = {:.4}",
        rows.len(),
        failed,
        mu_min.z,
        mu_ts.z
    );
    if failed > 0 {
        return Err(CliError::numerical(format!("{failed} gap points failed")));
    }
    Ok(())
}

fn cmd_collective(
    ctx: &Context,
    n: Option<&str>,
    seeds: Option<usize>,
    sphere_nm: Option<f64>,
    shell_nm: Option<&str>,
    min_dist_nm: Option<f64>,
) -> Result<(), CliError> {
    let cfg = &ctx.cfg.collective;
    let n_spec = n.unwrap_or(&cfg.n_list);
    let n_list = parse_count_list(n_spec).map_err(CliError::validation)?;
    let n_seeds = seeds.unwrap_or(cfg.seeds);
    if n_seeds == 0 || n_list.is_empty() {
        return Err(CliError::validation("empty collective sweep"));
    }
    let sphere_diameter_nm = sphere_nm.unwrap_or(cfg.sphere_nm);
    let shell = match shell_nm {
        None => cfg.shell_nm,
        Some(s) => {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 2 {
                return Err(CliError::validation("shell must be min:max in nm"));
            }
            [
                parts[0]
                    .parse()
                    .map_err(|e| CliError::validation(format!("bad shell min: {e}")))?,
                parts[1]
                    .parse()
                    .map_err(|e| CliError::validation(format!("bad shell max: {e}")))?,
            ]
        }
    };
    let min_dist = min_dist_nm.unwrap_or(cfg.min_dist_nm);
    let omega0 = cavchem::units::ev_to_hartree(cfg.mode_energy_ev);
    let sphere = sphere_modes(
        DielectricModel::Drude {
            omega_p: omega0 * 3.0f64.sqrt(),
        },
        nm_to_bohr(sphere_diameter_nm / 2.0),
    )?;
    let table = ctx.table()?;
    let (r_min, _) = well_minimum(&table, Well::Left)?;
    let mu_config = table
        .mu00_interp(r_min)
        .ok_or_else(|| CliError::numerical("dipole interpolation failed"))?;
    let temperature = ctx.cfg.rates.temperature;

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &n_mol in &n_list {
        let mut debs = Vec::new();
        for s in 0..n_seeds {
            let seed = ctx.seed.wrapping_add(s as u64);
            let ens = sample_ensemble(
                n_mol,
                &sphere,
                [nm_to_bohr(shell[0]), nm_to_bohr(shell[1])],
                nm_to_bohr(min_dist),
                seed,
                OrientationPolicy::AlignedWithField,
            )?;
            let idx = most_coupled(&ens);
            let b = collective_barrier(&ens, idx, &table, Well::Left, Well::Left)?;
            let e_ds = dipole_sphere_energy(&ens, mu_config);
            let e_dd = dipole_dipole_sum(&ens, mu_config)?;
            rows.push(vec![
                n_mol as f64,
                seed as f64,
                b.delta_e_b,
                hartree_to_ev(b.delta_e_b),
                rate_factor(b.delta_e_b, temperature),
                ens.mean_cos_theta,
                e_ds,
                e_dd,
                e_ds + e_dd,
            ]);
            debs.push(b.delta_e_b);
        }
        let mean = debs.iter().sum::<f64>() / debs.len() as f64;
        summary.push(serde_json::json!({
            "n": n_mol,
            "mean_delta_e_b_hartree": mean,
            "mean_delta_e_b_ev": hartree_to_ev(mean),
            "mean_rate_factor": rate_factor(mean, temperature),
        }));
    }
    ctx.out.write_csv(
        "collective.csv",
        &[
            "n",
            "seed",
            "delta_e_b_hartree",
            "delta_e_b_ev",
            "rate_factor",
            "mean_cos_theta",
            "e_ds_hartree",
            "e_dd_hartree",
            "e_tot_hartree",
        ],
        &rows,
        None,
    )?;
    ctx.out.write_json(
        "collective_summary.json",
        &serde_json::json!({
            "sphere_diameter_nm": sphere_diameter_nm,
            "shell_nm": shell,
            "min_dist_nm": min_dist,
            "temperature_k": temperature,
            "per_n": summary,
        }),
    )?;
    println!("{} rows written", rows.len());
    Ok(())
}

fn cmd_reproduce(ctx: &Context, figure: &str) -> Result<(), CliError> {
    match figure {
        "fig2" => cmd_arrhenius(ctx, Some("0,0.01,0.02,0.035")),
        "fig3c" => {
            // (lambda, exact barrier, corrected, TST ratio, quantum ratio)
            let basis = ctx.basis()?;
            let table = ctx.table()?;
            let mass = ctx.cfg.model.mass;
            let omega = basis.omega_nu;
            let bare_cboa = bare_barrier(&table, mass)?;
            let bare_rate = quantum_rate(&basis.rate_system(), ctx.cfg.rates.temperature, ctx.t_f, &ctx.tg)?;
            let temps = default_temperature_grid();
            let mut rows = Vec::new();
            for &lambda in &[0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035] {
                let (barrier, corrected) = if lambda == 0.0 {
                    let q = default_q_grid(&table, 1e-4, omega);
                    let s = cboa_surface(&table, 0.0, omega, &q)?;
                    let rep = critical_points(&s)?;
                    let zp = zero_point_correction(&rep, mass)?;
                    (rep.barrier, zp.corrected_barrier)
                } else {
                    let q = default_q_grid(&table, lambda, omega);
                    let s = cboa_surface(&table, lambda, omega, &q)?;
                    let rep = critical_points(&s)?;
                    let zp = zero_point_correction(&rep, mass)?;
                    (rep.barrier, zp.corrected_barrier)
                };
                let rs = if lambda == 0.0 {
                    basis.rate_system()
                } else {
                    let n_fock = ctx.auto_n_fock(&basis, lambda, omega, 450.0);
                    ctx.coupled_rate_system(&basis, lambda, omega, n_fock)?
                };
                let mut pts = Vec::new();
                for &t in &temps {
                    pts.push((t, quantum_rate(&rs, t, ctx.t_f, &ctx.tg)?.k));
                }
                let fit = arrhenius_fit(&pts)?;
                let k300 = quantum_rate(&rs, ctx.cfg.rates.temperature, ctx.t_f, &ctx.tg)?.k;
                rows.push(vec![
                    lambda,
                    barrier,
                    hartree_to_ev(barrier),
                    corrected,
                    fit.e_b_eff,
                    tst_rate_ratio(barrier, bare_cboa, ctx.cfg.rates.temperature),
                    k300 / bare_rate.k,
                ]);
            }
            ctx.out.write_csv(
                "fig3c.csv",
                &[
                    "lambda",
                    "cboa_barrier_hartree",
                    "cboa_barrier_ev",
                    "zp_corrected_barrier_hartree",
                    "arrhenius_barrier_hartree",
                    "tst_rate_ratio",
                    "quantum_rate_ratio",
                ],
                &rows,
                None,
            )?;
            println!("fig3c.csv written");
            Ok(())
        }
        "fig4" => cmd_pert(ctx, Some("0,0.01,0.02,0.03,0.04,0.05")),
        "fig5" => {
            for lambda in [0.005, 0.01, 0.02] {
                cmd_rate_vs_frequency(ctx, Some(lambda), Some("0.2:5:10"))?;
            }
            Ok(())
        }
        "fig7" => cmd_collective(ctx, None, None, None, None, None),
        other => Err(CliError::validation(format!(
            "unknown figure id '{other}' (known: fig2, fig3c, fig4, fig5, fig7)"
        ))),
    }
}
