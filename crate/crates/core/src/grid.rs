//! Finite-element discrete variable representation on Gauss-Lobatto points.
//!
//! The domain is split into elements, each carrying a Gauss-Lobatto rule of
//! the requested polynomial order. Element boundary points are shared
//! ("bridged") and the two outermost points are dropped, which imposes
//! Dirichlet boundary conditions. Matrix elements are evaluated by the
//! Gauss-Lobatto quadrature itself, which is exact for the polynomial
//! integrands appearing in the kinetic matrix.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Construction recipe for a [`Grid1D`]; serializable so grids can be rebuilt
/// exactly from file headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n_elements: usize,
    pub order: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid1D> {
        build_grid([self.min, self.max], self.n_elements, self.order)
    }
}

/// FEM-DVR grid with bridged Gauss-Lobatto nodes (interior points only).
#[derive(Debug, Clone)]
pub struct Grid1D {
    /// Interior nodes, strictly increasing.
    nodes: Vec<f64>,
    /// Bridged quadrature weights, one per node.
    weights: Vec<f64>,
    /// Matrix of -d^2/dx^2 in the orthonormal DVR basis; divide by 2m for
    /// kinetic energy. Symmetric positive semidefinite.
    kinetic: Mat<f64>,
    spec: GridSpec,
}

pub fn build_grid(extent: [f64; 2], n_elements: usize, order: usize) -> Result<Grid1D> {
    let [lo, hi] = extent;
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "degenerate extent [{lo}, {hi}]"
        )));
    }
    if n_elements < 1 {
        return Err(Error::InvalidParameter("n_elements must be >= 1".into()));
    }
    if order < 2 {
        return Err(Error::InvalidParameter("order must be >= 2".into()));
    }

    let (ref_nodes, ref_weights) = gauss_lobatto(order);
    let deriv = lagrange_derivative_matrix(&ref_nodes);
    let p = order; // points per element = p + 1

    let n_total = n_elements * p + 1;
    let width = (hi - lo) / n_elements as f64;
    let breaks: Vec<f64> = (0..=n_elements).map(|e| lo + e as f64 * width).collect();

    // Global (unbridged-index) nodes and accumulated weights.
    let mut nodes = vec![0.0; n_total];
    let mut weights = vec![0.0; n_total];
    // Raw second-derivative assembly before normalization.
    let mut kin = Mat::<f64>::zeros(n_total, n_total);

    let half = width / 2.0;
    for e in 0..n_elements {
        let center = (breaks[e] + breaks[e + 1]) / 2.0;
        let base = e * p;
        for k in 0..=p {
            nodes[base + k] = center + half * ref_nodes[k];
            weights[base + k] += half * ref_weights[k];
        }
        // K^e_{mn} = sum_k w_k L'_m(x_k) L'_n(x_k) / h_e  (reference-scaled)
        for m in 0..=p {
            for n in m..=p {
                let mut s = 0.0;
                for k in 0..=p {
                    s += ref_weights[k] * deriv[(k, m)] * deriv[(k, n)];
                }
                s /= half;
                kin[(base + m, base + n)] += s;
                if m != n {
                    kin[(base + n, base + m)] += s;
                }
            }
        }
    }
    // Endpoint duplicates coincide exactly by construction; enforce the shared
    // coordinate to kill rounding drift.
    for e in 1..n_elements {
        nodes[e * p] = breaks[e];
    }

    // Normalize to the orthonormal DVR basis and drop the two boundary nodes.
    let n_interior = n_total - 2;
    if n_interior < 1 {
        return Err(Error::InvalidParameter(
            "grid has no interior nodes".into(),
        ));
    }
    let mut kinetic = Mat::<f64>::zeros(n_interior, n_interior);
    for i in 0..n_interior {
        for j in 0..n_interior {
            kinetic[(i, j)] =
                kin[(i + 1, j + 1)] / (weights[i + 1] * weights[j + 1]).sqrt();
        }
    }

    Ok(Grid1D {
        nodes: nodes[1..n_total - 1].to_vec(),
        weights: weights[1..n_total - 1].to_vec(),
        kinetic,
        spec: GridSpec {
            min: lo,
            max: hi,
            n_elements,
            order,
        },
    })
}

impl Grid1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// -d^2/dx^2 in the DVR basis.
    pub fn kinetic(&self) -> &Mat<f64> {
        &self.kinetic
    }

    pub fn extent(&self) -> [f64; 2] {
        [self.spec.min, self.spec.max]
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Mean node spacing; a cheap resolution proxy.
    pub fn mean_spacing(&self) -> f64 {
        (self.spec.max - self.spec.min) / (self.len() + 1) as f64
    }

    /// Index of the node closest to `x`, and the distance to it.
    pub fn nearest_node(&self, x: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, &xi) in self.nodes.iter().enumerate() {
            let d = (xi - x).abs();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Hamiltonian kinetic/2m + diag(V(nodes)).
    pub fn hamiltonian(&self, mass: f64, potential: impl Fn(f64) -> f64) -> Mat<f64> {
        let n = self.len();
        let mut h = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = self.kinetic[(i, j)] / (2.0 * mass);
            }
            h[(i, i)] += potential(self.nodes[i]);
        }
        h
    }

    /// Same, with the potential given on the nodes.
    pub fn hamiltonian_from_values(&self, mass: f64, v: &[f64]) -> Mat<f64> {
        assert_eq!(v.len(), self.len());
        let n = self.len();
        let mut h = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = self.kinetic[(i, j)] / (2.0 * mass);
            }
            h[(i, i)] += v[i];
        }
        h
    }

    /// Antisymmetrized first-derivative matrix d/dx in the DVR basis
    /// (the momentum operator is -i times this).
    pub fn first_derivative(&self) -> Mat<f64> {
        let spec = self.spec;
        let p = spec.order;
        let (ref_nodes, ref_weights) = gauss_lobatto(p);
        let deriv = lagrange_derivative_matrix(&ref_nodes);
        let n_total = spec.n_elements * p + 1;
        let mut d_raw = Mat::<f64>::zeros(n_total, n_total);
        let width = (spec.max - spec.min) / spec.n_elements as f64;
        let half = width / 2.0;
        // <L_m | d/dx | L_n>_e = w_m * d_{mn} (reference weights; the element
        // scale h cancels between the weight and the derivative).
        for e in 0..spec.n_elements {
            let base = e * p;
            for m in 0..=p {
                for n in 0..=p {
                    d_raw[(base + m, base + n)] += ref_weights[m] * deriv[(m, n)];
                }
            }
        }
        // Bridged weights.
        let mut w = vec![0.0; n_total];
        for e in 0..spec.n_elements {
            let base = e * p;
            for k in 0..=p {
                w[base + k] += half * ref_weights[k];
            }
        }
        let n = self.len();
        let mut d = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let raw = d_raw[(i + 1, j + 1)] / (w[i + 1] * w[j + 1]).sqrt();
                d[(i, j)] = raw;
            }
        }
        // Antisymmetrize so that -i d/dx is Hermitian on the truncated basis.
        let mut out = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = 0.5 * (d[(i, j)] - d[(j, i)]);
            }
        }
        out
    }

    /// Barycentric Lagrange interpolation of nodal values at `x`, element by
    /// element. The two domain-boundary nodes carry no values (they were
    /// dropped for the Dirichlet conditions), so the first and last element
    /// interpolate over their interior points only. Returns None outside the
    /// extent.
    pub fn interpolate(&self, values: &[f64], x: f64) -> Option<f64> {
        assert_eq!(values.len(), self.len());
        let spec = self.spec;
        if x < spec.min || x > spec.max {
            return None;
        }
        let width = (spec.max - spec.min) / spec.n_elements as f64;
        let e = (((x - spec.min) / width) as usize).min(spec.n_elements - 1);
        let p = spec.order;
        // Global unbridged index range of element e is [e*p, e*p + p]; shift
        // by -1 for the dropped left boundary node.
        let mut xs = Vec::with_capacity(p + 1);
        let mut fs = Vec::with_capacity(p + 1);
        for k in 0..=p {
            let g = e * p + k;
            if g == 0 || g == spec.n_elements * p {
                continue;
            }
            xs.push(self.nodes[g - 1]);
            fs.push(values[g - 1]);
        }
        Some(barycentric(&xs, &fs, x))
    }
}

/// Iterated three-point parabolic vertex refinement of a smooth extremum.
/// `sign` is +1 to minimize, -1 to maximize. Differences are taken over a
/// step large enough to stand above rounding noise, so the refinement does
/// not stall on float-level flatness.
pub fn refine_extremum(f: impl Fn(f64) -> f64, x0: f64, h0: f64, sign: f64) -> (f64, f64) {
    let mut x = x0;
    let mut h = h0;
    for _ in 0..5 {
        let f0 = sign * f(x);
        let fp = sign * f(x + h);
        let fm = sign * f(x - h);
        let denom = fp - 2.0 * f0 + fm;
        if denom <= 1e3 * f64::EPSILON * f0.abs().max(1e-6) {
            break;
        }
        let dx = (0.5 * h * (fm - fp) / denom).clamp(-h, h);
        x += dx;
        h /= 8.0;
    }
    (x, f(x))
}

fn barycentric(xs: &[f64], fs: &[f64], x: f64) -> f64 {
    // Direct weight computation; fine for the small per-element point counts
    // used here.
    let n = xs.len();
    let mut w = vec![1.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[i] /= xs[i] - xs[j];
            }
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let dx = x - xs[i];
        if dx.abs() < 1e-14 {
            return fs[i];
        }
        let c = w[i] / dx;
        num += c * fs[i];
        den += c;
    }
    num / den
}

/// Legendre polynomial P_p and derivative P'_p at x, by recurrence.
fn legendre(p: usize, x: f64) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let mut pm1 = 1.0;
    let mut pk = x;
    for k in 1..p {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * pk - kf * pm1) / (kf + 1.0);
        pm1 = pk;
        pk = next;
    }
    // P'_p from the standard identity (valid for |x| != 1).
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        p as f64 * (pm1 - x * pk) / (1.0 - x * x)
    } else {
        // at the endpoints P'_p(+-1) = (+-1)^{p-1} p(p+1)/2
        let sign = if x > 0.0 {
            1.0
        } else if p % 2 == 0 {
            -1.0
        } else {
            1.0
        };
        sign * p as f64 * (p as f64 + 1.0) / 2.0
    };
    (pk, dp)
}

/// Gauss-Lobatto nodes and weights on [-1, 1] for polynomial order p
/// (p + 1 points including both endpoints).
pub fn gauss_lobatto(p: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(p >= 1);
    let n = p + 1;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[p] = 1.0;
    // Interior nodes are the roots of P'_p; Newton from Chebyshev-like guesses.
    for k in 1..p {
        let mut x = -(std::f64::consts::PI * k as f64 / p as f64).cos();
        for _ in 0..100 {
            let (pp, dp) = legendre(p, x);
            // P''_p from the Legendre ODE
            let d2p = (2.0 * x * dp - (p * (p + 1)) as f64 * pp) / (1.0 - x * x);
            let step = dp / d2p;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = x;
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Symmetrize to remove last-ulp asymmetry.
    for k in 0..n / 2 {
        let s = 0.5 * (nodes[n - 1 - k] - nodes[k]);
        nodes[k] = -s;
        nodes[n - 1 - k] = s;
    }
    let mut weights = vec![0.0; n];
    let c = 2.0 / (p * (p + 1)) as f64;
    for k in 0..n {
        let (pp, _) = legendre(p, nodes[k]);
        weights[k] = c / (pp * pp);
    }
    (nodes, weights)
}

/// d_{km} = L'_m(x_k) for the Lagrange cardinal functions on Gauss-Lobatto
/// points, indexed (evaluation point, function).
fn lagrange_derivative_matrix(nodes: &[f64]) -> Mat<f64> {
    let n = nodes.len();
    let p = n - 1;
    let mut d = Mat::<f64>::zeros(n, n);
    for k in 0..n {
        for m in 0..n {
            if k != m {
                let (pk, _) = legendre(p, nodes[k]);
                let (pm, _) = legendre(p, nodes[m]);
                d[(k, m)] = (pk / pm) / (nodes[k] - nodes[m]);
            }
        }
    }
    let corner = (p * (p + 1)) as f64 / 4.0;
    d[(0, 0)] = -corner;
    d[(p, p)] = corner;
    (1..p).for_each(|m| d[(m, m)] = 0.0);
    d
}
