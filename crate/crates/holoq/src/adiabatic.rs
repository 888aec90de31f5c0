//! Exact master-equation integration, adiabatic evolution by decoupled
//! Jordan blocks, the ladder integrator for multi-dimensional blocks, and
//! crossover-time diagnostics.
//!
//! Units: s = t/T is the dimensionless path parameter. Exact evolution
//! integrates d|rho>>/ds = T L(s) |rho>>. In the block-amplitude picture the
//! dynamical factor exp(T int_0^s lambda ds') is factored out per eigenvalue
//! group; the ladder feeding term p^(i+1) then enters the s-parametrized
//! equations multiplied by T.

use ndarray::{Array1, Array2};
use ndarray_linalg::Inverse;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::path::{sample_family, track_blocks, ParameterPath, SmoothBlockTrack, SuperoperatorFamily};
use crate::superop::{CoherenceVector, Superoperator};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn bilinear(bra: &Array1<C64>, ket: &Array1<C64>) -> C64 {
    bra.iter().zip(ket.iter()).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolutionMethod {
    Exact,
    Adiabatic,
}

/// Coherence-vector trajectory on a parameter grid.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub grid: Vec<f64>,
    pub states: Vec<CoherenceVector>,
    pub method: EvolutionMethod,
    pub total_time: f64,
    /// Richardson estimate |y_n - y_{n/2}| / 15 of the final-state error
    /// (exact integrator only).
    pub step_halving_error: Option<f64>,
}

impl EvolutionResult {
    pub fn final_state(&self) -> &CoherenceVector {
        self.states.last().expect("nonempty trajectory")
    }
}

fn rk4_run(
    family: &dyn SuperoperatorFamily,
    path: &ParameterPath,
    t_total: f64,
    rho0: &CoherenceVector,
    n_steps: usize,
) -> Result<Vec<Array1<C64>>> {
    let h = 1.0 / n_steps as f64;
    let scale = c(t_total, 0.);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut y = rho0.coeffs().clone();
    states.push(y.clone());
    let mut l_start = family.superoperator(path.evaluate(0.0).view())?;
    for k in 0..n_steps {
        let s = k as f64 * h;
        let stiffness = t_total * l_start.norm_inf() * h;
        if stiffness > 1.0 {
            return Err(Error::UnstableStep {
                stiffness,
                suggested: (n_steps as f64 * stiffness * 1.1).ceil() as usize,
            });
        }
        let l_mid = family.superoperator(path.evaluate(s + 0.5 * h).view())?;
        let l_end = family.superoperator(path.evaluate(s + h).view())?;
        let f = |l: &Superoperator, v: &Array1<C64>| l.matrix().dot(v).mapv(|x| x * scale);
        let k1 = f(&l_start, &y);
        let k2 = f(&l_mid, &(&y + &k1.mapv(|x| x * c(0.5 * h, 0.))));
        let k3 = f(&l_mid, &(&y + &k2.mapv(|x| x * c(0.5 * h, 0.))));
        let k4 = f(&l_end, &(&y + &k3.mapv(|x| x * c(h, 0.))));
        y = &y
            + &(k1 + k2.mapv(|x| x * c(2., 0.)) + k3.mapv(|x| x * c(2., 0.)) + k4)
                .mapv(|x| x * c(h / 6.0, 0.));
        states.push(y.clone());
        l_start = l_end;
    }
    Ok(states)
}

/// Fixed-step fourth-order integration of d|rho>>/ds = T L(s)|rho>>.
pub fn exact_evolve(
    family: &dyn SuperoperatorFamily,
    path: &ParameterPath,
    t_total: f64,
    rho0: &CoherenceVector,
    n_steps: usize,
) -> Result<EvolutionResult> {
    if !(t_total > 0.0) || !t_total.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "total time must be positive and finite, got {t_total}"
        )));
    }
    if n_steps < 2 {
        return Err(Error::InvalidArgument("need at least 2 steps".into()));
    }
    let d = family.hilbert_dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho0.dim(),
        });
    }
    let fine = rk4_run(family, path, t_total, rho0, n_steps)?;
    let step_halving_error = if n_steps % 2 == 0 {
        let coarse = rk4_run(family, path, t_total, rho0, n_steps / 2)?;
        let dev = fine
            .last()
            .unwrap()
            .iter()
            .zip(coarse.last().unwrap().iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        Some(dev / 15.0)
    } else {
        None
    };
    let grid = (0..=n_steps).map(|k| k as f64 / n_steps as f64).collect();
    let states = fine
        .into_iter()
        .map(|v| CoherenceVector::new(v, d))
        .collect::<Result<_>>()?;
    Ok(EvolutionResult {
        grid,
        states,
        method: EvolutionMethod::Exact,
        total_time: t_total,
        step_halving_error,
    })
}

/// Symmetric per-step transfer matrix between grid points a and b for a set
/// of 1-D block tracks: (N + M^-1)/2 with M, N the forward and reverse
/// overlap matrices.
fn transfer_matrix(tracks: &[&SmoothBlockTrack], a: usize, b: usize) -> Result<Array2<C64>> {
    let g = tracks.len();
    let m = Array2::from_shape_fn((g, g), |(i, j)| {
        bilinear(&tracks[i].left(a)[0], &tracks[j].right(b)[0])
    });
    let rev = Array2::from_shape_fn((g, g), |(i, j)| {
        bilinear(&tracks[i].left(b)[0], &tracks[j].right(a)[0])
    });
    let m_inv = m.inv().map_err(|_| Error::Resolution {
        s: a as f64 / tracks[0].n_grid() as f64,
        dist: f64::INFINITY,
        n_grid: tracks[0].n_grid(),
    })?;
    Ok((&rev + &m_inv).mapv(|x| x * c(0.5, 0.)))
}

/// Group track indices by cluster id.
fn cluster_groups(tracks: &[SmoothBlockTrack]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, t) in tracks.iter().enumerate() {
        match groups.iter_mut().find(|(cid, _)| *cid == t.cluster_id()) {
            Some((_, list)) => list.push(i),
            None => groups.push((t.cluster_id(), vec![i])),
        }
    }
    groups.into_iter().map(|(_, list)| list).collect()
}

/// Cumulative trapezoid of the group eigenvalue, Lambda_k = int_0^{s_k} lambda.
fn dynamical_integral(tracks: &[&SmoothBlockTrack]) -> Vec<C64> {
    let n = tracks[0].n_grid();
    let g = tracks.len() as f64;
    let lam = |k: usize| -> C64 {
        tracks.iter().map(|t| t.eigenvalue(k)).sum::<C64>() / c(g, 0.)
    };
    let h = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = c(0., 0.);
    out.push(acc);
    for k in 0..n {
        acc += (lam(k) + lam(k + 1)) * c(0.5 * h, 0.);
        out.push(acc);
    }
    out
}

/// Evolve the coherence vector in the decoupled-block approximation.
///
/// Nondegenerate and degenerate sets of 1-D blocks propagate through the
/// symmetric transfer matrices; eigenvalue groups containing a chain of
/// length two or more go through [`ladder_integrate`]. Dynamical factors
/// exp(T int lambda) are reattached per group on reassembly.
pub fn adiabatic_evolve(
    family: &dyn SuperoperatorFamily,
    path: &ParameterPath,
    t_total: f64,
    rho0: &CoherenceVector,
    cluster_tol: f64,
) -> Result<EvolutionResult> {
    if !(t_total > 0.0) || !t_total.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "total time must be positive and finite, got {t_total}"
        )));
    }
    let d = family.hilbert_dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho0.dim(),
        });
    }
    let samples = sample_family(path, family)?;
    let tracks = track_blocks(&samples, cluster_tol)?;
    let n = path.n_grid();
    let dim2 = d * d;

    let mut states: Vec<Array1<C64>> = vec![Array1::zeros(dim2); n + 1];
    for group in cluster_groups(&tracks) {
        let refs: Vec<&SmoothBlockTrack> = group.iter().map(|&i| &tracks[i]).collect();
        let dyn_int = dynamical_integral(&refs);
        if refs.iter().all(|t| t.chain_len() == 1) {
            let g = refs.len();
            let mut p: Array1<C64> = Array1::from_shape_fn(g, |i| {
                bilinear(&refs[i].left(0)[0], rho0.coeffs())
            });
            for k in 0..=n {
                let factor = (dyn_int[k] * c(t_total, 0.)).exp();
                for (i, t) in refs.iter().enumerate() {
                    let w = p[i] * factor;
                    states[k] = &states[k] + &t.right(k)[0].mapv(|x| x * w);
                }
                if k < n {
                    let tr = transfer_matrix(&refs, k, k + 1)?;
                    p = tr.dot(&p);
                }
            }
        } else {
            let ladder = ladder_integrate(&refs, t_total, rho0)?;
            for k in 0..=n {
                let factor = (dyn_int[k] * c(t_total, 0.)).exp();
                let mut slot = 0usize;
                for t in &ladder.tracks {
                    for j in 0..t.chain_len() {
                        let w = ladder.amplitudes[k][slot] * factor;
                        states[k] = &states[k] + &t.right(k)[j].mapv(|x| x * w);
                        slot += 1;
                    }
                }
            }
        }
    }

    let grid = path.grid();
    let states = states
        .into_iter()
        .map(|v| CoherenceVector::new(v, d))
        .collect::<Result<_>>()?;
    Ok(EvolutionResult {
        grid,
        states,
        method: EvolutionMethod::Adiabatic,
        total_time: t_total,
        step_halving_error: None,
    })
}

/// Amplitude history of one eigenvalue group integrated through the ladder
/// equations, together with the gauge-smoothed tracks the amplitudes refer
/// to (the gauge at s = 0 is the identity).
#[derive(Debug, Clone)]
pub struct LadderResult {
    pub grid: Vec<f64>,
    /// amplitudes[k] stacks the chain amplitudes of every block in the
    /// group, block by block, chain index ascending.
    pub amplitudes: Vec<Array1<C64>>,
    pub tracks: Vec<SmoothBlockTrack>,
    pub total_time: f64,
}

/// Upper-triangular Toeplitz gauge fitted to the step overlap of a chain;
/// transporting by it keeps the chain basis smooth without touching the
/// cross-block structure.
fn toeplitz_gauge(overlap: &Array2<C64>) -> Array2<C64> {
    let n = overlap.nrows();
    let mut g: Array2<C64> = Array2::zeros((n, n));
    for m in 0..n {
        let mut acc = c(0., 0.);
        for j in 0..n - m {
            acc += overlap[[j, j + m]];
        }
        let a = acc / c((n - m) as f64, 0.);
        for j in 0..n - m {
            g[[j, j + m]] = a;
        }
    }
    g
}

fn smooth_chain_gauges(tracks: &[&SmoothBlockTrack]) -> Result<Vec<SmoothBlockTrack>> {
    let n = tracks[0].n_grid();
    let mut out: Vec<SmoothBlockTrack> = tracks.iter().map(|t| (*t).clone()).collect();
    for t in &mut out {
        for k in 0..n {
            let len = t.chain_len();
            let overlap = Array2::from_shape_fn((len, len), |(i, j)| {
                bilinear(&t.left[k + 1][i], &t.right[k][j])
            });
            let g = toeplitz_gauge(&overlap);
            let g_inv = g.inv().map_err(|_| Error::TrackingOverlap {
                s: k as f64 / n as f64,
                modulus: 0.0,
            })?;
            // rights mix by g (columns), lefts by g_inv (rows)
            let old_r = t.right[k + 1].clone();
            let old_l = t.left[k + 1].clone();
            for j in 0..len {
                let mut v: Array1<C64> = Array1::zeros(old_r[0].len());
                for i in 0..len {
                    v = v + old_r[i].mapv(|x| x * g[[i, j]]);
                }
                t.right[k + 1][j] = v;
                let mut e: Array1<C64> = Array1::zeros(old_l[0].len());
                for i in 0..len {
                    e = e + old_l[i].mapv(|x| x * g_inv[[j, i]]);
                }
                t.left[k + 1][j] = e;
            }
        }
    }
    Ok(out)
}

/// Fourth-order derivative of the tracked right vectors at every grid point;
/// one-sided stencils at the ends (the smoothed gauge is not periodic).
fn chain_derivatives(track: &SmoothBlockTrack) -> Vec<Vec<Array1<C64>>> {
    let n = track.n_grid();
    let h = 1.0 / n as f64;
    let len = track.chain_len();
    let stencil = |k: usize, j: usize| -> Array1<C64> {
        let f = |i: usize| -> &Array1<C64> { &track.right[i][j] };
        let w = |v: &Array1<C64>, s: f64| v.mapv(|x| x * c(s / (12.0 * h), 0.));
        if k >= 2 && k + 2 <= n {
            w(f(k - 2), 1.0) + w(f(k - 1), -8.0) + w(f(k + 1), 8.0) + w(f(k + 2), -1.0)
        } else if k == 0 {
            w(f(0), -25.0) + w(f(1), 48.0) + w(f(2), -36.0) + w(f(3), 16.0) + w(f(4), -3.0)
        } else if k == 1 {
            w(f(0), -3.0) + w(f(1), -10.0) + w(f(2), 18.0) + w(f(3), -6.0) + w(f(4), 1.0)
        } else if k == n - 1 {
            w(f(n), 3.0) + w(f(n - 1), 10.0) + w(f(n - 2), -18.0) + w(f(n - 3), 6.0)
                + w(f(n - 4), -1.0)
        } else {
            w(f(n), 25.0) + w(f(n - 1), -48.0) + w(f(n - 2), 36.0) + w(f(n - 3), -16.0)
                + w(f(n - 4), 3.0)
        }
    };
    (0..=n)
        .map(|k| (0..len).map(|j| stencil(k, j)).collect())
        .collect()
}

/// Integrate the coupled ladder equations of one eigenvalue group:
/// dp_a^(i)/ds = T p_a^(i+1) - sum_{b,j} <<e_a^(i)| d/ds d_b^(j)>> p_b^(j).
///
/// The group tracks are first re-gauged by chainwise Toeplitz transport so
/// that finite differences of the basis are meaningful; the returned
/// amplitudes refer to that gauge (identical to the input gauge at s = 0,
/// where the initial state is projected).
pub fn ladder_integrate(
    tracks: &[&SmoothBlockTrack],
    t_total: f64,
    rho0: &CoherenceVector,
) -> Result<LadderResult> {
    if tracks.is_empty() {
        return Err(Error::InvalidArgument("no tracks given".into()));
    }
    if !(t_total > 0.0) || !t_total.is_finite() {
        return Err(Error::InvalidArgument("total time must be positive".into()));
    }
    let n = tracks[0].n_grid();
    let smoothed = smooth_chain_gauges(tracks)?;
    let n_amp: usize = smoothed.iter().map(|t| t.chain_len()).sum();

    // connection C_k and ladder shift
    let derivs: Vec<Vec<Vec<Array1<C64>>>> =
        smoothed.iter().map(chain_derivatives).collect();
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for (b, t) in smoothed.iter().enumerate() {
        for j in 0..t.chain_len() {
            slots.push((b, j));
        }
    }
    let a_mat = |k: usize| -> Array2<C64> {
        let mut a = Array2::zeros((n_amp, n_amp));
        for (row, &(bi, i)) in slots.iter().enumerate() {
            for (col, &(bj, j)) in slots.iter().enumerate() {
                a[[row, col]] = -bilinear(&smoothed[bi].left[k][i], &derivs[bj][k][j]);
            }
            // ladder feeding p^(i+1), scaled by T in s units
            if i + 1 < smoothed[bi].chain_len() {
                a[[row, row + 1]] += c(t_total, 0.);
            }
        }
        a
    };
    let a_nodes: Vec<Array2<C64>> = (0..=n).map(a_mat).collect();

    let h = 1.0 / n as f64;
    let max_norm = a_nodes
        .iter()
        .map(|a| {
            (0..n_amp)
                .map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let substeps = ((max_norm * h / 0.5).ceil() as usize).max(1);
    if substeps > 100_000 {
        return Err(Error::UnstableStep {
            stiffness: max_norm * h,
            suggested: n * substeps,
        });
    }

    // cubic interpolation of the connection between nodes
    let a_interp = |k: usize, theta: f64| -> Array2<C64> {
        if theta == 0.0 {
            return a_nodes[k].clone();
        }
        if theta == 1.0 {
            return a_nodes[k + 1].clone();
        }
        let (i0, t0) = if k == 0 {
            (0usize, theta)
        } else if k + 2 > n {
            (n - 3, theta + 2.0)
        } else {
            (k - 1, theta + 1.0)
        };
        // Lagrange cubic through nodes i0..i0+3 evaluated at i0 + t0
        let mut out: Array2<C64> = Array2::zeros((n_amp, n_amp));
        for j in 0..4 {
            let mut w = 1.0;
            for l in 0..4 {
                if l != j {
                    w *= (t0 - l as f64) / (j as f64 - l as f64);
                }
            }
            out = out + a_nodes[i0 + j].mapv(|x| x * c(w, 0.));
        }
        out
    };

    let mut p: Array1<C64> = Array1::from_shape_fn(n_amp, |row| {
        let (b, i) = slots[row];
        bilinear(&smoothed[b].left[0][i], rho0.coeffs())
    });
    let mut amplitudes = Vec::with_capacity(n + 1);
    amplitudes.push(p.clone());
    let hs = h / substeps as f64;
    for k in 0..n {
        for sub in 0..substeps {
            let th0 = sub as f64 / substeps as f64;
            let a0 = a_interp(k, th0);
            let am = a_interp(k, th0 + 0.5 / substeps as f64);
            let a1 = a_interp(k, th0 + 1.0 / substeps as f64);
            let k1 = a0.dot(&p);
            let k2 = am.dot(&(&p + &k1.mapv(|x| x * c(0.5 * hs, 0.))));
            let k3 = am.dot(&(&p + &k2.mapv(|x| x * c(0.5 * hs, 0.))));
            let k4 = a1.dot(&(&p + &k3.mapv(|x| x * c(hs, 0.))));
            p = &p
                + &(k1 + k2.mapv(|x| x * c(2., 0.)) + k3.mapv(|x| x * c(2., 0.)) + k4)
                    .mapv(|x| x * c(hs / 6.0, 0.));
        }
        amplitudes.push(p.clone());
    }

    Ok(LadderResult {
        grid: (0..=n).map(|k| k as f64 / n as f64).collect(),
        amplitudes,
        tracks: smoothed,
        total_time: t_total,
    })
}

/// Crossover-time samples per block and the max-ratio curve over a T grid.
#[derive(Debug, Clone)]
pub struct CrossoverReport {
    pub t_grid: Vec<f64>,
    /// per_block[t][alpha] = T_alpha^c at t_grid[t]; alpha indexes tracks.
    pub per_block: Vec<Vec<f64>>,
    pub max_ratio: Vec<f64>,
    pub n_grid: usize,
    pub cluster_tol: f64,
}

/// Phase-parallel-transported copy of every 1-D track: step overlaps are
/// rotated onto the positive real axis (modulus kept), making the amplitude
/// source and the bracket gauge deterministic.
fn transport_gauge(tracks: &[SmoothBlockTrack]) -> Vec<SmoothBlockTrack> {
    let mut out: Vec<SmoothBlockTrack> = tracks.to_vec();
    let n = out[0].n_grid();
    for t in &mut out {
        if t.chain_len() != 1 {
            continue;
        }
        for k in 0..n {
            let ov = bilinear(&t.left[k][0], &t.right[k + 1][0]);
            if ov.norm() == 0.0 {
                continue;
            }
            let u = (ov / c(ov.norm(), 0.)).conj();
            t.right[k + 1][0].mapv_inplace(|x| x * u);
            let inv = c(1., 0.) / u;
            t.left[k + 1][0].mapv_inplace(|x| x * inv);
        }
    }
    out
}

/// Adiabatic geometric amplitudes p(s_k) in the transported gauge.
fn geometric_amplitudes(
    track: &SmoothBlockTrack,
    rho0: &CoherenceVector,
) -> Vec<C64> {
    let n = track.n_grid();
    let mut p = bilinear(&track.left[0][0], rho0.coeffs());
    let mut out = Vec::with_capacity(n + 1);
    out.push(p);
    for k in 0..n {
        let m = bilinear(&track.left[k][0], &track.right[k + 1][0]);
        let rev = bilinear(&track.left[k + 1][0], &track.right[k][0]);
        let t = (rev + c(1., 0.) / m) * c(0.5, 0.);
        p *= t;
        out.push(p);
    }
    out
}

/// Crossover time T_alpha^c of Jordan block `alpha` (a track label), for
/// one-dimensional blocks:
///
/// max_s | sum_{beta != alpha} [ Q(0) - Q(s) e^{T Omega(s)}
///                               + int_0^s e^{T Omega} dQ/ds' ds' ] |
///
/// with Omega the integrated eigenvalue gap, V = p_beta <<e_a|dL/ds|d_b>>
/// and Q = V / omega^2. dL/ds uses periodic central differences of the
/// samples; dQ/ds uses central differences with one-sided ends.
pub fn crossover_time(
    samples: &[Superoperator],
    tracks: &[SmoothBlockTrack],
    t_total: f64,
    alpha: usize,
    rho0: &CoherenceVector,
) -> Result<f64> {
    if tracks.iter().any(|t| t.chain_len() != 1) {
        return Err(Error::InvalidArgument(
            "crossover time is defined for one-dimensional blocks only".into(),
        ));
    }
    let n = tracks[0].n_grid();
    if samples.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            got: samples.len(),
        });
    }
    let track_a = tracks
        .iter()
        .find(|t| t.label() == alpha)
        .ok_or_else(|| Error::InvalidArgument(format!("no track labeled {alpha}")))?;
    let cluster_tol = track_a.cluster_tol();
    let h = 1.0 / n as f64;

    let gauged = transport_gauge(tracks);
    let gauged_a = gauged.iter().find(|t| t.label() == alpha).unwrap();

    // dL/ds by periodic central differences
    let ldot: Vec<Array2<C64>> = (0..=n)
        .map(|k| {
            let prev = if k == 0 { n - 1 } else { k - 1 };
            let next = if k >= n { 1 } else { k + 1 };
            (samples[next].matrix() - samples[prev].matrix()).mapv(|x| x / c(2.0 * h, 0.))
        })
        .collect();

    let mut bracket_sum: Vec<C64> = vec![c(0., 0.); n + 1];
    for track_b in gauged.iter() {
        if track_b.label() == alpha {
            continue;
        }
        let lam_gap: Vec<C64> = (0..=n)
            .map(|k| track_b.eigenvalue(k) - gauged_a.eigenvalue(k))
            .collect();
        if lam_gap.iter().all(|w| w.norm() <= cluster_tol) {
            // same eigenvalue group: no adiabatic decoupling required
            continue;
        }
        for (k, w) in lam_gap.iter().enumerate() {
            if w.norm() < 1e-10 {
                return Err(Error::GapCollapse {
                    gap: w.norm(),
                    s: k as f64 / n as f64,
                });
            }
        }
        let p_b = geometric_amplitudes(track_b, rho0);
        let q: Vec<C64> = (0..=n)
            .map(|k| {
                let v = p_b[k]
                    * bilinear(
                        &gauged_a.left[k][0],
                        &ldot[k].dot(&track_b.right[k][0]),
                    );
                v / (lam_gap[k] * lam_gap[k])
            })
            .collect();
        let dq: Vec<C64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    (q[0] * c(-3., 0.) + q[1] * c(4., 0.) - q[2]) / c(2.0 * h, 0.)
                } else if k == n {
                    (q[n] * c(3., 0.) - q[n - 1] * c(4., 0.) + q[n - 2]) / c(2.0 * h, 0.)
                } else {
                    (q[k + 1] - q[k - 1]) / c(2.0 * h, 0.)
                }
            })
            .collect();
        // Omega(s) and the running integral of e^{T Omega} dQ/ds
        let mut omega = c(0., 0.);
        let mut integral = c(0., 0.);
        let mut prev_exp_dq = dq[0];
        for k in 0..=n {
            if k > 0 {
                omega += (lam_gap[k - 1] + lam_gap[k]) * c(0.5 * h, 0.);
            }
            let e = (omega * c(t_total, 0.)).exp();
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(Error::CrossoverOverflow { t: t_total });
            }
            let exp_dq = e * dq[k];
            if k > 0 {
                integral += (prev_exp_dq + exp_dq) * c(0.5 * h, 0.);
            }
            prev_exp_dq = exp_dq;
            bracket_sum[k] += q[0] - q[k] * e + integral;
        }
    }
    Ok(bracket_sum.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Max over blocks of T_alpha^c / T on a grid of total times.
pub fn max_ratio_curve(
    family: &dyn SuperoperatorFamily,
    path: &ParameterPath,
    cluster_tol: f64,
    t_grid: &[f64],
    rho0: &CoherenceVector,
) -> Result<CrossoverReport> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument(
            "T grid must be nonempty and positive".into(),
        ));
    }
    let samples = sample_family(path, family)?;
    let tracks = track_blocks(&samples, cluster_tol)?;
    let per_block: Vec<Vec<f64>> = t_grid
        .par_iter()
        .map(|&t| {
            tracks
                .iter()
                .map(|tr| crossover_time(&samples, &tracks, t, tr.label(), rho0))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let max_ratio = per_block
        .iter()
        .zip(t_grid)
        .map(|(row, &t)| row.iter().cloned().fold(0.0, f64::max) / t)
        .collect();
    Ok(CrossoverReport {
        t_grid: t_grid.to_vec(),
        per_block,
        max_ratio,
        n_grid: path.n_grid(),
        cluster_tol,
    })
}
