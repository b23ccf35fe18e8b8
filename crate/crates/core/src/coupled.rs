//! Full electron-nucleus-photon eigensystem by staged diagonalization: the
//! bare 2D molecular problem is solved in a contracted basis of per-R
//! electronic states, truncated at an energy cutoff, and the photon mode is
//! then coupled in the retained molecular eigenbasis.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::linalg::eigh;
use crate::shin_metiu::{
    harmonic_fit, scan_electronic, table_from_slices, ElectronicStructureTable, ShinMetiuParams,
    Well,
};

/// One quantized cavity mode in the length-gauge displacement coupling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CavityMode {
    /// Mode frequency (hartree).
    pub omega_c: f64,
    /// Coupling strength lambda = sqrt(4 pi / V_eff) (a.u.).
    pub lambda: f64,
    /// Photon-number truncation (Fock states 0..n_fock-1).
    pub n_fock: usize,
    /// Polarization unit vector; the 1D model is taken perfectly aligned.
    pub polarization: [f64; 3],
}

impl CavityMode {
    pub fn new(omega_c: f64, lambda: f64, n_fock: usize) -> Self {
        CavityMode {
            omega_c,
            lambda,
            n_fock,
            polarization: [0.0, 0.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c > 0.0) {
            return Err(Error::InvalidParameter("omega_c must be positive".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParameter("lambda must be >= 0".into()));
        }
        if self.n_fock < 1 {
            return Err(Error::InvalidParameter("n_fock must be >= 1".into()));
        }
        let norm2: f64 = self.polarization.iter().map(|c| c * c).sum();
        if (norm2 - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "polarization must be a unit vector".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ECut {
    /// Barrier top plus `margin` vibrational quanta (the default, 10).
    BarrierMargin { quanta: f64 },
    Explicit(f64),
}

impl Default for ECut {
    fn default() -> Self {
        ECut::BarrierMargin { quanta: 10.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MolecularBasisOptions {
    /// Electronic states retained per R slice in the contraction.
    pub n_electronic: usize,
    pub e_cut: ECut,
}

impl Default for MolecularBasisOptions {
    fn default() -> Self {
        MolecularBasisOptions {
            n_electronic: 8,
            e_cut: ECut::default(),
        }
    }
}

/// Eigenpairs of the bare molecular Hamiltonian below the cutoff, with the
/// dipole matrix and the dividing-surface projector in that eigenbasis.
pub struct MolecularBasis {
    /// Retained eigenvalues, ascending (hartree).
    pub energies: Vec<f64>,
    /// Dipole matrix between retained states (a.u.).
    pub dipole: Mat<f64>,
    /// Retention cutoff (hartree).
    pub e_cut: f64,
    /// Reactant-side projector h(-R) in the retained basis.
    pub theta_reactant: Mat<f64>,
    /// Barrier top of the bare ground surface (hartree, absolute).
    pub barrier_top: f64,
    /// Harmonic vibrational frequency of the left well (hartree).
    pub omega_nu: f64,
    /// Mobile-ion mass used for the nuclear kinetic energy.
    pub mass: f64,
    /// Electronic-structure table from the same scan (n_electronic states).
    pub table: ElectronicStructureTable,
    /// Retained eigenvectors in the contracted (R-node x electronic) basis;
    /// column k is state k, row index = r_index * n_electronic + m.
    pub coeffs: Mat<f64>,
    pub n_electronic: usize,
    r_grid: Grid1D,
    /// Per-slice electronic eigenvectors (x-node, electronic state).
    electronic_states: Vec<Mat<f64>>,
}

/// Builds the molecular eigenbasis from raw grids by contracting each R slice
/// over its lowest electronic states and diagonalizing the resulting exact
/// matrix representation of the 2D Hamiltonian.
pub fn molecular_eigenbasis(
    p: &ShinMetiuParams,
    grid_x: &Grid1D,
    grid_r: &Grid1D,
    opts: MolecularBasisOptions,
) -> Result<MolecularBasis> {
    let n_el = opts.n_electronic;
    if n_el < 1 {
        return Err(Error::InvalidParameter("n_electronic must be >= 1".into()));
    }
    let slices = scan_electronic(p, grid_x, grid_r, n_el)?;
    let table = table_from_slices(p, grid_x, grid_r, n_el, &slices);

    let v0 = table.surface(0);
    let nodes = table.r_nodes();
    // Node-level well minima and the barrier top between them; refinement is
    // not needed for a cutoff.
    let mut i_left = None;
    let mut i_right = None;
    for i in 0..nodes.len() {
        if nodes[i] < 0.0 {
            if i_left.map_or(true, |j: usize| v0[i] < v0[j]) {
                i_left = Some(i);
            }
        } else if nodes[i] > 0.0 && i_right.map_or(true, |j: usize| v0[i] < v0[j]) {
            i_right = Some(i);
        }
    }
    let (i_left, i_right) = match (i_left, i_right) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Domain("no well on one side of R = 0".into())),
    };
    let barrier_top = v0[i_left..=i_right]
        .iter()
        .cloned()
        .fold(f64::MIN, f64::max);

    // Harmonic frequency of the left well; fall back to a 3-point parabola on
    // deliberately coarse grids.
    let omega_nu = match harmonic_fit(&table, p.m, Well::Left) {
        Ok(fit) => fit.omega_nu,
        Err(_) => {
            if i_left == 0 || i_left + 1 >= nodes.len() {
                return Err(Error::Domain("left minimum at grid edge".into()));
            }
            let (x0, x1, x2) = (nodes[i_left - 1], nodes[i_left], nodes[i_left + 1]);
            let (f0, f1, f2) = (v0[i_left - 1], v0[i_left], v0[i_left + 1]);
            let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
            let a = (x2 * (f1 - f0) + x1 * (f0 - f2) + x0 * (f2 - f1)) / denom;
            (2.0 * a / p.m).max(0.0).sqrt()
        }
    };

    let e_cut = match opts.e_cut {
        ECut::BarrierMargin { quanta } => barrier_top + quanta * omega_nu,
        ECut::Explicit(e) => {
            if e <= barrier_top {
                return Err(Error::InvalidParameter(format!(
                    "E_cut {e} is not above the barrier top {barrier_top}"
                )));
            }
            e
        }
    };

    let n_r = grid_r.len();
    let nx = grid_x.len();
    let dim = n_r * n_el;
    let kin = grid_r.kinetic();
    let mass = p.m;

    // Contracted H: (T_R/2M)_{ij} S^{ij}_{mn} + delta_ij delta_mn V_m(R_i).
    // The FEM-DVR kinetic matrix only connects same/adjacent elements, so
    // overlaps are computed where needed.
    let mut h = Mat::<f64>::zeros(dim, dim);
    for i in 0..n_r {
        for j in i..n_r {
            let t = kin[(i, j)] / (2.0 * mass);
            if t == 0.0 {
                continue;
            }
            for m in 0..n_el {
                for n in 0..n_el {
                    let mut s = 0.0;
                    for k in 0..nx {
                        s += slices[i].states[(k, m)] * slices[j].states[(k, n)];
                    }
                    let val = t * s;
                    h[(i * n_el + m, j * n_el + n)] += val;
                    if j != i {
                        h[(j * n_el + n, i * n_el + m)] += val;
                    }
                }
            }
        }
        for m in 0..n_el {
            h[(i * n_el + m, i * n_el + m)] += slices[i].energies[m];
        }
    }

    let sol = eigh(h.as_ref())?;
    let k_ret = sol.values.iter().take_while(|&&e| e <= e_cut).count();
    if k_ret < 2 {
        return Err(Error::TooFewStates {
            required: 2,
            got: k_ret,
        });
    }
    let energies = sol.values[..k_ret].to_vec();
    let mut coeffs = Mat::<f64>::zeros(dim, k_ret);
    for a in 0..k_ret {
        for i in 0..dim {
            coeffs[(i, a)] = sol.vectors[(i, a)];
        }
    }

    // Dipole in the retained basis: block-diagonal over R.
    let mut dipole = Mat::<f64>::zeros(k_ret, k_ret);
    for i in 0..n_r {
        let mu_i = table.mu_at(i);
        for a in 0..k_ret {
            for b in a..k_ret {
                let mut acc = 0.0;
                for m in 0..n_el {
                    for n in 0..n_el {
                        acc += coeffs[(i * n_el + m, a)]
                            * mu_i[(m, n)]
                            * coeffs[(i * n_el + n, b)];
                    }
                }
                dipole[(a, b)] += acc;
                if a != b {
                    dipole[(b, a)] += acc;
                }
            }
        }
    }

    let theta_reactant = theta_in_basis(&coeffs, grid_r.nodes(), n_el, 0.0);

    let electronic_states = slices.into_iter().map(|s| s.states).collect();

    Ok(MolecularBasis {
        energies,
        dipole,
        e_cut,
        theta_reactant,
        barrier_top,
        omega_nu,
        mass,
        table,
        coeffs,
        n_electronic: n_el,
        r_grid: grid_r.clone(),
        electronic_states,
    })
}

/// h(-R) with the node at the dividing surface counted half.
fn theta_node_weights(nodes: &[f64], r0: f64) -> Vec<f64> {
    nodes
        .iter()
        .map(|&r| {
            if (r - r0).abs() < 1e-10 {
                0.5
            } else if r < r0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn theta_in_basis(coeffs: &Mat<f64>, nodes: &[f64], n_el: usize, r0: f64) -> Mat<f64> {
    let k = coeffs.ncols();
    let w = theta_node_weights(nodes, r0);
    let mut theta = Mat::<f64>::zeros(k, k);
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for a in 0..k {
            for b in a..k {
                let mut acc = 0.0;
                for m in 0..n_el {
                    acc += coeffs[(i * n_el + m, a)] * coeffs[(i * n_el + m, b)];
                }
                let val = wi * acc;
                theta[(a, b)] += val;
                if a != b {
                    theta[(b, a)] += val;
                }
            }
        }
    }
    theta
}

impl MolecularBasis {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn r_grid(&self) -> &Grid1D {
        &self.r_grid
    }

    /// Reactant projector for an arbitrary dividing surface position.
    pub fn theta_for(&self, r0: f64) -> Mat<f64> {
        theta_in_basis(&self.coeffs, self.r_grid.nodes(), self.n_electronic, r0)
    }

    /// Symmetrized-delta DVR flux: the real antisymmetric G with Fbar = -iG,
    /// built from (P delta(s) + delta(s) P)/2M on the nuclear grid. The
    /// dividing surface must sit on a grid node.
    pub fn flux_delta(&self, r0: f64) -> Result<Mat<f64>> {
        let nodes = self.r_grid.nodes();
        let (i0, dist) = self.r_grid.nearest_node(r0);
        if dist > 1e-9 {
            return Err(Error::Domain(format!(
                "dividing surface at {r0} is not on a grid node (nearest at distance {dist:.2e})"
            )));
        }
        let d1 = self.r_grid.first_derivative();
        let w0 = self.r_grid.weights()[i0];
        let n_el = self.n_electronic;
        let n_r = nodes.len();
        let k = self.len();
        let nx = self.electronic_states[0].nrows();

        // S_{i,i0}[m,n] electronic overlaps against the dividing slice.
        let mut s_col = vec![Mat::<f64>::zeros(n_el, n_el); n_r];
        for i in 0..n_r {
            for m in 0..n_el {
                for n in 0..n_el {
                    let mut acc = 0.0;
                    for kx in 0..nx {
                        acc += self.electronic_states[i][(kx, m)]
                            * self.electronic_states[i0][(kx, n)];
                    }
                    s_col[i][(m, n)] = acc;
                }
            }
        }

        // G_c[(im),(jn)] = (1/2M) (D1[i,j] Delta_j + Delta_i D1[i,j]) S_ij[m,n]
        // with Delta = e_{i0} e_{i0}^T / w0; only rows/cols at i0 survive.
        let mut g = Mat::<f64>::zeros(k, k);
        let pref = 1.0 / (2.0 * self.mass * w0);
        for a in 0..k {
            for b in 0..k {
                let mut acc = 0.0;
                for i in 0..n_r {
                    let d = d1[(i, i0)];
                    if d == 0.0 {
                        continue;
                    }
                    // term <im| D1 Delta |i0 n> and its mirrored partner
                    for m in 0..n_el {
                        for n in 0..n_el {
                            let s = s_col[i][(m, n)];
                            if s == 0.0 {
                                continue;
                            }
                            acc += self.coeffs[(i * n_el + m, a)]
                                * d
                                * s
                                * self.coeffs[(i0 * n_el + n, b)];
                            // Delta D1 term: <i0 m| Delta D1 |j n> with j = i
                            acc -= self.coeffs[(i0 * n_el + n, a)]
                                * d
                                * s
                                * self.coeffs[(i * n_el + m, b)];
                        }
                    }
                }
                g[(a, b)] = pref * acc;
            }
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CoupledOptions {
    /// Add the lambda^2 mu^2 / 2 dipole self-energy term (off by default:
    /// the quasistatic coupling has no such term).
    pub include_dipole_self_energy: bool,
    /// Hard cap on the product-basis dimension.
    pub max_dim: usize,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions {
            include_dipole_self_energy: false,
            max_dim: 12_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoupledMeta {
    pub lambda: f64,
    pub omega_c: f64,
    pub n_fock: usize,
    pub n_molecular: usize,
    pub e_cut: f64,
}

/// Coupled Hamiltonian in the (molecular x Fock) product basis, ordered
/// photon-major: index = n * K + A.
pub fn build_coupled(
    basis: &MolecularBasis,
    mode: &CavityMode,
    opts: &CoupledOptions,
) -> Result<Mat<f64>> {
    mode.validate()?;
    let k = basis.len();
    let dim = k * mode.n_fock;
    if dim > opts.max_dim {
        return Err(Error::DimensionOverflow {
            dim,
            max: opts.max_dim,
        });
    }
    let omega = mode.omega_c;
    let g = mode.lambda * (omega / 2.0).sqrt();
    let mut h = Mat::<f64>::zeros(dim, dim);

    let dse = if opts.include_dipole_self_energy {
        let mut m2 = Mat::<f64>::zeros(k, k);
        for a in 0..k {
            for b in 0..k {
                let mut acc = 0.0;
                for c in 0..k {
                    acc += basis.dipole[(a, c)] * basis.dipole[(c, b)];
                }
                m2[(a, b)] = 0.5 * mode.lambda * mode.lambda * acc;
            }
        }
        Some(m2)
    } else {
        None
    };

    for n in 0..mode.n_fock {
        let base = n * k;
        for a in 0..k {
            h[(base + a, base + a)] = basis.energies[a] + omega * (n as f64 + 0.5);
            if let Some(m2) = &dse {
                for b in a..k {
                    h[(base + a, base + b)] += m2[(a, b)];
                    if b != a {
                        h[(base + b, base + a)] += m2[(a, b)];
                    }
                }
            }
        }
        if n + 1 < mode.n_fock {
            let upper = (n + 1) * k;
            let c = g * ((n + 1) as f64).sqrt();
            for a in 0..k {
                for b in 0..k {
                    let val = c * basis.dipole[(a, b)];
                    h[(base + a, upper + b)] = val;
                    h[(upper + b, base + a)] = val;
                }
            }
        }
    }
    Ok(h)
}

/// Eigenpairs of the coupled Hamiltonian.
pub struct CoupledEigensystem {
    pub energies: Vec<f64>,
    /// Columns are eigenvectors in the photon-major product basis.
    pub states: Mat<f64>,
    pub meta: CoupledMeta,
}

pub fn diagonalize_coupled(h: &Mat<f64>, meta: CoupledMeta) -> Result<CoupledEigensystem> {
    let n = h.nrows();
    let decomp = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?} (coupled dim {n})")))?;
    let energies: Vec<f64> = (0..n).map(|i| decomp.S()[i]).collect();
    Ok(CoupledEigensystem {
        energies,
        states: decomp.U().to_owned(),
        meta,
    })
}

/// Convenience: build + diagonalize.
pub fn coupled_system(
    basis: &MolecularBasis,
    mode: &CavityMode,
    opts: &CoupledOptions,
) -> Result<CoupledEigensystem> {
    let h = build_coupled(basis, mode, opts)?;
    diagonalize_coupled(
        &h,
        CoupledMeta {
            lambda: mode.lambda,
            omega_c: mode.omega_c,
            n_fock: mode.n_fock,
            n_molecular: basis.len(),
            e_cut: basis.e_cut,
        },
    )
}

impl CoupledEigensystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Projects a molecular-basis operator (diagonal in the photon index)
    /// onto the lowest `n_states` coupled eigenstates.
    pub fn project_molecular_operator(&self, op: &Mat<f64>, n_states: usize) -> Mat<f64> {
        let k = self.meta.n_molecular;
        let n_fock = self.meta.n_fock;
        let dim = self.dim();
        let l = n_states.min(dim);
        let v = self.states.as_ref().subcols(0, l);
        // W = (op ⊗ I) V, photon-block by photon-block.
        let mut w = Mat::<f64>::zeros(dim, l);
        for n in 0..n_fock {
            let block = v.subrows(n * k, k);
            let prod = op * block;
            for a in 0..k {
                for c in 0..l {
                    w[(n * k + a, c)] = prod[(a, c)];
                }
            }
        }
        v.transpose() * &w
    }
}

/// Photon truncation that covers thermal occupation, the coupling-induced
/// displacement, and a convergence buffer.
pub fn n_fock_for(omega_c: f64, lambda: f64, t_kelvin: f64, mu_max: f64, min_fock: usize) -> usize {
    let kt = crate::units::KB_HARTREE_PER_K * t_kelvin;
    let thermal = 21.0 * kt / omega_c;
    let displacement = 0.5 * lambda * lambda * mu_max * mu_max / omega_c;
    (thermal + displacement).ceil() as usize + 8usize.max(min_fock)
}
