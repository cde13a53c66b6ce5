//! Degenerate-level matrix connection via Gram-orthogonalized
//! uniform-coordinate frames, and the path-ordered holonomy.
//!
//! For a level of energy `E` and multiplicity `d` the frame solves
//! `(H_perp - E) Z = h` with `H_perp` the minor on the `n - d` "perp" rows
//! and `h = -H[perp, tail]`; the columns of `Z` extended by the standard
//! basis on the `tail` rows are orthonormalized in order (Gram-Schmidt,
//! equivalently the bordered Gram-determinant construction). The
//! construction is deterministic, so frames vary smoothly along a loop and
//! carry no per-sample phase freedom.
//!
//! Connection convention: sample entries are `A[a][b] = i <z_a | d z_b>`
//! (Hermitian), so `exp(i A)` transports state coefficients in the moving
//! frame and the `d = 1` case reduces to the Abelian engine with
//! `U = e^{i gamma}`.

use crate::error::{Error, Result};
use crate::linalg::{
    cr, determinant, eigh, expm_hermitian, fro_norm, identity, max_norm, solve_matrix,
    unitary_log, CMatrix, C64, I,
};
use crate::models::{ParameterLoop, ParametricHamiltonian};

/// Options for the degenerate-loop engine.
#[derive(Clone, Copy, Debug)]
pub struct HolonomyOptions {
    pub cond_scale: f64,
    /// Minimum gap separating the degenerate group from the rest.
    pub gap_tol: f64,
    /// Width of the degenerate cluster around the tracked energy.
    pub cluster_tol: f64,
    pub energy_drift_tol: f64,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        Self {
            cond_scale: 1e-8,
            gap_tol: 1e-6,
            cluster_tol: 1e-8,
            energy_drift_tol: 1e-8,
        }
    }
}

/// Orthonormal frame of a degenerate level in one uniform-coordinate chart.
#[derive(Clone, Debug)]
pub struct DegenerateFrame {
    pub energy: f64,
    pub multiplicity: usize,
    pub dim: usize,
    /// Distinguished rows carrying the standard-basis block (length d).
    pub tail: Vec<usize>,
    /// Complementary rows (length n - d).
    pub perp: Vec<usize>,
    /// Chart solution `Z = (H_perp - E)^{-1} h`, shape (n-d) x d.
    pub z_chart: CMatrix,
    /// Orthonormal eigenvectors as columns, shape n x d.
    pub frame: CMatrix,
    /// Largest eigenvector residual `||(H - E) z_a|| / ||H||`.
    pub residual: f64,
}

fn embed_chart_columns(
    n: usize,
    tail: &[usize],
    perp: &[usize],
    z: &CMatrix,
) -> CMatrix {
    let d = tail.len();
    let mut x = CMatrix::zeros(n, d);
    for a in 0..d {
        for (row, &i) in perp.iter().enumerate() {
            x[(i, a)] = z[(row, a)];
        }
        x[(tail[a], a)] = cr(1.0);
    }
    x
}

/// Build the degenerate frame for energy `e_m`, multiplicity `d_m`, with
/// the chart defined by the `tail` index set (the complement forms
/// `H_perp`). `tail = None` uses the default chart (last `d_m` rows).
pub fn degenerate_frame(
    h: &CMatrix,
    e_m: f64,
    d_m: usize,
    tail: Option<Vec<usize>>,
    cond_scale: f64,
) -> Result<DegenerateFrame> {
    let n = h.nrows();
    if d_m == 0 || d_m >= n {
        return Err(Error::InvalidArgument(format!(
            "multiplicity {d_m} out of range for dim {n}"
        )));
    }
    let tail = tail.unwrap_or_else(|| ((n - d_m)..n).collect());
    if tail.len() != d_m || tail.iter().any(|&i| i >= n) {
        return Err(Error::InvalidArgument("invalid tail index set".into()));
    }
    let perp: Vec<usize> = (0..n).filter(|i| !tail.contains(i)).collect();

    let mut minor = CMatrix::zeros(n - d_m, n - d_m);
    let mut rhs = CMatrix::zeros(n - d_m, d_m);
    for (r, &i) in perp.iter().enumerate() {
        for (s, &j) in perp.iter().enumerate() {
            minor[(r, s)] = h[(i, j)];
        }
        minor[(r, r)] -= cr(e_m);
        for (a, &j) in tail.iter().enumerate() {
            rhs[(r, a)] = -h[(i, j)];
        }
    }
    let det = determinant(&minor).norm();
    let tol = cr_threshold(h, n - d_m, cond_scale);
    if det < tol {
        return Err(Error::PivotSingular { det, tol });
    }
    let z = solve_matrix(&minor, &rhs).ok_or(Error::PivotSingular { det, tol })?;

    let x = embed_chart_columns(n, &tail, &perp, &z);
    let frame = crate::linalg::orthonormalize_columns(&x);

    let scale = fro_norm(h).max(1e-300);
    let mut residual = 0.0f64;
    for a in 0..d_m {
        let col = frame.column(a).into_owned();
        let r = (h * &col - &col * cr(e_m)).norm() / scale;
        residual = residual.max(r);
    }
    Ok(DegenerateFrame {
        energy: e_m,
        multiplicity: d_m,
        dim: n,
        tail,
        perp,
        z_chart: z,
        frame,
        residual,
    })
}

fn cr_threshold(h: &CMatrix, minor_size: usize, cond_scale: f64) -> f64 {
    let scale = fro_norm(h).max(1e-300);
    cond_scale * scale.powi(minor_size as i32)
}

/// Matrix-valued connection contracted with the step tangent, Hermitian.
#[derive(Clone, Debug)]
pub struct MatrixConnectionSample {
    pub a: CMatrix,
    /// Norm of the anti-Hermitian residue removed by symmetrization.
    pub skew_residue: f64,
}

fn compatible(a: &DegenerateFrame, b: &DegenerateFrame) -> Result<()> {
    if a.dim != b.dim
        || a.multiplicity != b.multiplicity
        || a.tail != b.tail
        || (a.energy - b.energy).abs() > 1e-6 * a.energy.abs().max(1.0)
    {
        return Err(Error::LevelMismatch);
    }
    Ok(())
}

/// Gram matrix `G[i][j] = delta_ij + <xi_i, xi_j>` of the extended chart
/// columns.
fn gram(z: &CMatrix) -> CMatrix {
    let d = z.ncols();
    let mut g = z.adjoint() * z;
    for i in 0..d {
        g[(i, i)] += cr(1.0);
    }
    g
}

/// Leading principal minor determinant `det(G[0..k, 0..k])`, with
/// `det(G_0) = 1`.
fn leading_minor_det(g: &CMatrix, k: usize) -> C64 {
    if k == 0 {
        return cr(1.0);
    }
    determinant(&g.view((0, 0), (k, k)).into_owned())
}

/// Cofactor coefficients of the bordered Gram-determinant construction:
/// `w_a = sum_r coeff[a][r] x_r` for `r <= a`, the (unnormalized)
/// Gram-Schmidt vector. The coefficient vector spans the kernel of the
/// first `a` rows of the Gram matrix restricted to columns `0..=a`, scaled
/// so the `x_a` coefficient is `det(Gamma_{a-1}) > 0`.
fn gram_cofactors(g: &CMatrix, d: usize) -> Vec<Vec<C64>> {
    let mut coeffs = Vec::with_capacity(d);
    for a in 0..d {
        let mut row_coeffs = vec![C64::default(); a + 1];
        if a == 0 {
            row_coeffs[0] = cr(1.0);
        } else {
            for r in 0..=a {
                let cols: Vec<usize> = (0..=a).filter(|&q| q != r).collect();
                let mut minor = CMatrix::zeros(a, a);
                for row in 0..a {
                    for (ci, &q) in cols.iter().enumerate() {
                        minor[(row, ci)] = g[(row, q)];
                    }
                }
                let sign = if (a + r) % 2 == 0 { 1.0 } else { -1.0 };
                row_coeffs[r] = determinant(&minor) * cr(sign);
            }
        }
        coeffs.push(row_coeffs);
    }
    coeffs
}

/// Closed-form connection sample from the chart data of two adjacent
/// frames: the Gram cofactor expansion of `i <z_a | d z_b>`, midpoint rule,
/// including the cofactor-derivative correction terms. Exactly Hermitian at
/// the discrete level; reduces to the Abelian midpoint formula for d = 1.
pub fn matrix_connection_closed_form(
    fa: &DegenerateFrame,
    fb: &DegenerateFrame,
) -> Result<MatrixConnectionSample> {
    compatible(fa, fb)?;
    let d = fa.multiplicity;
    let z_mid = (&fa.z_chart + &fb.z_chart).scale(0.5);
    let dz = &fb.z_chart - &fa.z_chart;
    let g_mid = gram(&z_mid);
    let g_a = gram(&fa.z_chart);
    let g_b = gram(&fb.z_chart);
    let coeff_mid = gram_cofactors(&g_mid, d);
    let coeff_a = gram_cofactors(&g_a, d);
    let coeff_b = gram_cofactors(&g_b, d);

    // norms ||w_a||^2 = det(G_{a-1}) det(G_a) at the midpoint
    let mut norms = Vec::with_capacity(d);
    for a in 0..d {
        let na = (leading_minor_det(&g_mid, a).re * leading_minor_det(&g_mid, a + 1).re).sqrt();
        norms.push(na);
    }

    // inner products <xi_r, d xi_s> and <d xi_r, xi_s> on chart columns
    let xi_d_dxi = z_mid.adjoint() * &dz; // entry (r,s) = <xi_r^mid, dxi_s>
    let dxi_d_xi = dz.adjoint() * &z_mid; // entry (r,s) = <dxi_r, xi_s^mid>

    let mut a_mat = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            // term 1: sum_{r<=a, s<=b} conj(C_r^a) C_s^b (<xi_r|dxi_s> - <dxi_r|xi_s>)
            let mut term1 = C64::default();
            for r in 0..=a {
                for s in 0..=b {
                    let w = coeff_mid[a][r].conj() * coeff_mid[b][s];
                    term1 += w * (xi_d_dxi[(r, s)] - dxi_d_xi[(r, s)]);
                }
            }
            // term 2: sum_{r<=a, s<=b} (conj(C_r^a) dC_s^b - conj(dC_r^a) C_s^b) <x_r|x_s>
            let mut term2 = C64::default();
            for r in 0..=a {
                for s in 0..=b {
                    let dca = coeff_b[a][r] - coeff_a[a][r];
                    let dcb = coeff_b[b][s] - coeff_a[b][s];
                    let w = coeff_mid[a][r].conj() * dcb - dca.conj() * coeff_mid[b][s];
                    term2 += w * g_mid[(r, s)];
                }
            }
            a_mat[(a, b)] = I * cr(0.5) * (term1 + term2) / cr(norms[a] * norms[b]);
        }
    }
    let skew = crate::linalg::hermiticity_residual(&a_mat);
    let a_sym = (&a_mat + a_mat.adjoint()).scale(0.5);
    Ok(MatrixConnectionSample {
        a: a_sym,
        skew_residue: skew,
    })
}

/// Numeric connection sample straight from the orthonormal frames:
/// `A[a][b] = i <z_a^mid | z_b(next) - z_b(prev)>`, Hermitized with the
/// skew residue recorded. Fails with `FrameDiscontinuity` if a frame
/// column jumped branches between the samples.
pub fn matrix_connection_numeric(
    fa: &DegenerateFrame,
    fb: &DegenerateFrame,
) -> Result<MatrixConnectionSample> {
    compatible(fa, fb)?;
    let d = fa.multiplicity;
    for a in 0..d {
        let overlap = (fa.frame.column(a).adjoint() * fb.frame.column(a))[(0, 0)].norm();
        if overlap < 0.5 {
            return Err(Error::FrameDiscontinuity { overlap });
        }
    }
    let mid = (&fa.frame + &fb.frame).scale(0.5);
    let diff = &fb.frame - &fa.frame;
    let raw = mid.adjoint() * diff * I;
    let skew = crate::linalg::hermiticity_residual(&raw);
    let a_sym = (&raw + raw.adjoint()).scale(0.5);
    Ok(MatrixConnectionSample {
        a: a_sym,
        skew_residue: skew,
    })
}

/// Result of a cyclic degenerate-level transport.
#[derive(Clone, Debug)]
pub struct NonAbelianHolonomy {
    pub u: CMatrix,
    pub unitarity_defect: f64,
    pub multiplicity: usize,
    /// Number of chart re-selections along the loop.
    pub pivot_switches: usize,
    /// Largest closed-form-vs-numeric sample mismatch seen along the loop.
    pub route_mismatch: f64,
}

/// Which per-step connection route drives the ordered product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnectionRoute {
    ClosedForm,
    Numeric,
}

fn best_tail(h: &CMatrix, e_m: f64, d: usize) -> Vec<usize> {
    let n = h.nrows();
    let mut best: (Vec<usize>, f64) = (((n - d)..n).collect(), -1.0);
    let mut tail: Vec<usize> = (0..d).collect();
    loop {
        let perp: Vec<usize> = (0..n).filter(|i| !tail.contains(i)).collect();
        let mut minor = CMatrix::zeros(n - d, n - d);
        for (r, &i) in perp.iter().enumerate() {
            for (s, &j) in perp.iter().enumerate() {
                minor[(r, s)] = h[(i, j)];
            }
            minor[(r, r)] -= cr(e_m);
        }
        let det = determinant(&minor).norm();
        if det > best.1 {
            best = (tail.clone(), det);
        }
        // next combination in lexicographic order
        let mut i = d;
        loop {
            if i == 0 {
                return best.0;
            }
            i -= 1;
            if tail[i] != i + n - d {
                break;
            }
        }
        tail[i] += 1;
        for j in (i + 1)..d {
            tail[j] = tail[j - 1] + 1;
        }
    }
}

/// Wilczek-Zee holonomy of the degenerate level containing sorted-spectrum
/// index `level` (multiplicity `d_m`), by the ordered product of single-step
/// exponentials of the chosen connection route.
pub fn holonomy(
    model: &ParametricHamiltonian,
    loop_: &ParameterLoop,
    level: usize,
    d_m: usize,
    route: ConnectionRoute,
    opts: &HolonomyOptions,
) -> Result<NonAbelianHolonomy> {
    let steps = loop_.steps;
    let h0 = model.eval(&loop_.at(0.0))?;
    let (vals0, _) = eigh(&h0);
    if level + d_m > vals0.len() {
        return Err(Error::InvalidArgument("level group out of range".into()));
    }
    let e_m: f64 = vals0[level..level + d_m].iter().sum::<f64>() / d_m as f64;

    let scale0 = fro_norm(&h0).max(1.0);
    let mut frames: Vec<DegenerateFrame> = Vec::with_capacity(steps + 1);
    let mut tail = best_tail(&h0, e_m, d_m);
    let mut pivot_switches = 0usize;
    for k in 0..=steps {
        let h = model.eval_unchecked(&loop_.sample(k));
        let (vals, _) = eigh(&h);
        let in_cluster = vals
            .iter()
            .filter(|&&v| (v - e_m).abs() <= opts.cluster_tol * scale0)
            .count();
        if in_cluster != d_m {
            let gap = vals
                .iter()
                .filter(|&&v| (v - e_m).abs() > opts.cluster_tol * scale0)
                .map(|&v| (v - e_m).abs())
                .fold(f64::INFINITY, f64::min);
            return Err(Error::MultiplicityDrift {
                gap,
                tol: opts.cluster_tol,
                sample: k,
            });
        }
        let outside_gap = vals
            .iter()
            .filter(|&&v| (v - e_m).abs() > opts.cluster_tol * scale0)
            .map(|&v| (v - e_m).abs())
            .fold(f64::INFINITY, f64::min);
        if outside_gap < opts.gap_tol {
            return Err(Error::LevelCrossing {
                gap: outside_gap,
                tol: opts.gap_tol,
                sample: k,
            });
        }
        let frame = match degenerate_frame(&h, e_m, d_m, Some(tail.clone()), opts.cond_scale) {
            Ok(f) => f,
            Err(Error::PivotSingular { .. }) => {
                let new_tail = best_tail(&h, e_m, d_m);
                let f = degenerate_frame(&h, e_m, d_m, Some(new_tail.clone()), opts.cond_scale)?;
                tail = new_tail;
                pivot_switches += 1;
                f
            }
            Err(e) => return Err(e),
        };
        frames.push(frame);
    }

    let mut u = identity(d_m);
    let mut route_mismatch = 0.0f64;
    for k in 0..steps {
        let (fa, fb) = (&frames[k], &frames[k + 1]);
        let step_u = if fa.tail == fb.tail {
            let sample = match route {
                ConnectionRoute::ClosedForm => matrix_connection_closed_form(fa, fb)?,
                ConnectionRoute::Numeric => matrix_connection_numeric(fa, fb)?,
            };
            if steps <= 512 {
                // cross-route diagnostic on coarse grids only (cost)
                let other = match route {
                    ConnectionRoute::ClosedForm => matrix_connection_numeric(fa, fb)?,
                    ConnectionRoute::Numeric => matrix_connection_closed_form(fa, fb)?,
                };
                route_mismatch = route_mismatch.max(max_norm(&(&sample.a - &other.a)));
            }
            expm_hermitian(&sample.a, I)
        } else {
            // chart switch: transport through the gauge-invariant frame
            // overlap, unitarized; c(k+1)_a = <z_a(k+1)|z_b(k)> c(k)_b
            let m = fb.frame.adjoint() * &fa.frame;
            polar_unitary(&m)
        };
        u = step_u * u;
    }
    let unitarity_defect = crate::linalg::unitarity_residual(&u);
    Ok(NonAbelianHolonomy {
        u,
        unitarity_defect,
        multiplicity: d_m,
        pivot_switches,
        route_mismatch,
    })
}

/// Unitary factor of the polar decomposition (for near-unitary inputs).
fn polar_unitary(m: &CMatrix) -> CMatrix {
    // U = M (M^dagger M)^{-1/2} via the Hermitian eigendecomposition
    let gram_m = m.adjoint() * m;
    let (vals, vecs) = eigh(&gram_m);
    let d = m.ncols();
    let mut inv_sqrt = CMatrix::zeros(d, d);
    for (k, &v) in vals.iter().enumerate() {
        inv_sqrt[(k, k)] = cr(1.0 / v.max(1e-300).sqrt());
    }
    m * (&vecs * inv_sqrt * vecs.adjoint())
}

/// Gauge-transform a connection sample path by the sampled unitary
/// `gauge[k]` (d x d, closed: gauge[steps] = gauge[0]).
///
/// The discrete law conjugates the per-step transport exactly,
/// `exp(i A'_k) = G_{k+1} exp(i A_k) G_k^dagger`, so the transformed
/// holonomy is `G_0 U G_0^dagger` with no discretization drift; `A'_k`
/// is second-order consistent with `G A G^dagger + i (dG) G^dagger`.
pub fn gauge_transform(
    samples: &[MatrixConnectionSample],
    gauge: &[CMatrix],
) -> Result<Vec<MatrixConnectionSample>> {
    if gauge.len() != samples.len() + 1 {
        return Err(Error::InvalidArgument(
            "need one gauge sample per loop sample (steps + 1)".into(),
        ));
    }
    let defect = max_norm(&(&gauge[gauge.len() - 1] - &gauge[0]));
    if defect > 1e-9 {
        return Err(Error::NonClosedGauge { defect });
    }
    let mut out = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        let step = expm_hermitian(&s.a, I);
        let conj = &gauge[k + 1] * step * gauge[k].adjoint();
        let a = unitary_log(&conj)?;
        out.push(MatrixConnectionSample {
            skew_residue: crate::linalg::hermiticity_residual(&a),
            a,
        });
    }
    Ok(out)
}

/// Ordered product of a connection sample path.
pub fn ordered_product(samples: &[MatrixConnectionSample]) -> CMatrix {
    let d = samples.first().map_or(1, |s| s.a.nrows());
    let mut u = identity(d);
    for s in samples {
        u = expm_hermitian(&s.a, I) * u;
    }
    u
}

/// Connection sample path along a loop (fixed chart), for gauge tests and
/// route comparisons.
pub fn connection_path(
    model: &ParametricHamiltonian,
    loop_: &ParameterLoop,
    level: usize,
    d_m: usize,
    route: ConnectionRoute,
    opts: &HolonomyOptions,
) -> Result<Vec<MatrixConnectionSample>> {
    let h0 = model.eval(&loop_.at(0.0))?;
    let (vals0, _) = eigh(&h0);
    let e_m: f64 = vals0[level..level + d_m].iter().sum::<f64>() / d_m as f64;
    let tail = best_tail(&h0, e_m, d_m);
    let mut frames = Vec::with_capacity(loop_.steps + 1);
    for k in 0..=loop_.steps {
        let h = model.eval_unchecked(&loop_.sample(k));
        frames.push(degenerate_frame(&h, e_m, d_m, Some(tail.clone()), opts.cond_scale)?);
    }
    let mut out = Vec::with_capacity(loop_.steps);
    for k in 0..loop_.steps {
        let s = match route {
            ConnectionRoute::ClosedForm => matrix_connection_closed_form(&frames[k], &frames[k + 1])?,
            ConnectionRoute::Numeric => matrix_connection_numeric(&frames[k], &frames[k + 1])?,
        };
        out.push(s);
    }
    Ok(out)
}
