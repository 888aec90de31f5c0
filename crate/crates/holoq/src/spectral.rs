//! Jordan spectral structure of superoperators.
//!
//! Eigenvalues are clustered, generalized-eigenvector chains are built for
//! defective clusters, and the left basis is read off the inverse of the
//! right-basis matrix so that bi-orthonormality and completeness hold by
//! construction. Right chains satisfy
//! `L d_j = lambda d_j + d_{j-1}` (with `d_{-1} = 0`) and left rows satisfy
//! `e_i L = lambda e_i + e_{i+1}` (with `e_{n} = 0`).
//!
//! Left vectors are stored as bra rows: the pairing `<<E|x>>` is the plain
//! (bilinear) dot product `e . x`, no conjugation.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse, SVD};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::superop::Superoperator;

/// Rank threshold relative to the largest singular value.
const RANK_TOL: f64 = 1e-10;
/// Bi-orthonormality residual allowed after one refinement pass.
const BIORTH_TOL: f64 = 1e-10;

/// Default eigenvalue clustering tolerance, 1e-8 |L|.
pub fn default_cluster_tol(l: &Superoperator) -> f64 {
    1e-8 * l.norm_inf().max(1.0)
}

/// One Jordan block: eigenvalue, right chain kets and left chain bras.
#[derive(Debug, Clone)]
pub struct JordanBlockBasis {
    pub eigenvalue: C64,
    pub chain_len: usize,
    /// Right chain |d_j>>, j = 0 .. chain_len-1; d_0 is the eigenvector.
    pub right: Vec<Array1<C64>>,
    /// Left chain bras <<e_i|, i = 0 .. chain_len-1; e_{n-1} is the left
    /// eigenvector.
    pub left: Vec<Array1<C64>>,
}

/// Full clustered Jordan decomposition of a superoperator.
#[derive(Debug, Clone)]
pub struct JordanDecomposition {
    pub blocks: Vec<JordanBlockBasis>,
    pub dim: usize,
    pub cluster_tol: f64,
}

impl JordanDecomposition {
    /// Sum of chain lengths; equals the matrix dimension.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.chain_len).sum()
    }

    /// Indices of blocks whose eigenvalue lies within `cluster_tol` of the
    /// given block's eigenvalue (including itself).
    pub fn cluster_of(&self, block: usize) -> Vec<usize> {
        let lam = self.blocks[block].eigenvalue;
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| (b.eigenvalue - lam).norm() <= self.cluster_tol)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Residuals of the structural identities, reported as max norms.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    pub biorthonormality: f64,
    pub chain: f64,
    pub completeness: f64,
}

fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Nullspace basis of `a` from an SVD rank decision at `RANK_TOL * sigma_max`.
fn nullspace(a: &Array2<C64>) -> Result<Vec<Array1<C64>>> {
    let n = a.ncols();
    let (_, sigma, vt) = a.svd(false, true)?;
    let vt = vt.expect("requested V^T");
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let thresh = if smax == 0.0 { f64::INFINITY } else { RANK_TOL * smax };
    let mut basis = Vec::new();
    for (k, s) in sigma.iter().enumerate() {
        if *s <= thresh {
            basis.push(vt.row(k).mapv(|c| c.conj()));
        }
    }
    // singular values below the minimum dimension count; a wide nullspace of
    // a square matrix also includes rows of vt beyond sigma's length
    for k in sigma.len()..n {
        basis.push(vt.row(k).mapv(|c| c.conj()));
    }
    Ok(basis)
}

fn dotc(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Remove the orthogonal projection of `v` onto the span of `basis`
/// (assumed orthonormal) and return the residual.
fn project_out(v: &Array1<C64>, basis: &[Array1<C64>]) -> Array1<C64> {
    let mut r = v.clone();
    for b in basis {
        let c = dotc(b, &r);
        r = r - b.mapv(|x| x * c);
    }
    r
}

fn orthonormalize(vectors: &[Array1<C64>]) -> Vec<Array1<C64>> {
    let mut out: Vec<Array1<C64>> = Vec::new();
    for v in vectors {
        let r = project_out(v, &out);
        let n = r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-12 {
            out.push(r.mapv(|x| x / C64::new(n, 0.0)));
        }
    }
    out
}

struct Cluster {
    eigenvalue: C64,
    multiplicity: usize,
}

/// Union-find clustering of eigenvalues with |a - b| <= tol.
fn cluster_eigenvalues(vals: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = vals.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (vals[i] - vals[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    groups.into_iter().filter(|g| !g.is_empty()).collect()
}

/// Chains for one eigenvalue cluster: (chain_len, vectors d_0..d_{len-1}).
fn build_cluster_chains(
    a_shift: &Array2<C64>,
    multiplicity: usize,
) -> Result<Vec<Vec<Array1<C64>>>> {
    // nested nullspaces of powers
    let mut powers: Vec<Array2<C64>> = vec![a_shift.clone()];
    let mut nullspaces: Vec<Vec<Array1<C64>>> = vec![nullspace(a_shift)?];
    let mut nullities: Vec<usize> = vec![nullspaces[0].len()];
    if nullities[0] == 0 {
        return Err(Error::NonConvergence(format!(
            "cluster of multiplicity {multiplicity} has an empty numerical nullspace"
        )));
    }
    while *nullities.last().unwrap() < multiplicity {
        let next = powers.last().unwrap().dot(a_shift);
        let ns = nullspace(&next)?;
        if ns.len() <= *nullities.last().unwrap() {
            return Err(Error::NonConvergence(format!(
                "nullity stagnated at {} before reaching multiplicity {multiplicity}",
                ns.len()
            )));
        }
        nullities.push(ns.len());
        nullspaces.push(ns);
        powers.push(next);
        if powers.len() > multiplicity {
            return Err(Error::NonConvergence(
                "chain length exceeded cluster multiplicity".into(),
            ));
        }
    }
    if *nullities.last().unwrap() != multiplicity {
        return Err(Error::NonConvergence(format!(
            "nullity {} overshot multiplicity {multiplicity}",
            nullities.last().unwrap()
        )));
    }

    let kmax = nullities.len();
    // blocks_ge[k] = number of blocks with size >= k (1-based)
    let blocks_ge = |k: usize| -> usize {
        if k == 0 || k > kmax {
            return 0;
        }
        nullities[k - 1] - if k >= 2 { nullities[k - 2] } else { 0 }
    };

    // top-down selection of chain tops
    let mut tops: Vec<(usize, Array1<C64>)> = Vec::new();
    for k in (1..=kmax).rev() {
        let needed = blocks_ge(k) - blocks_ge(k + 1);
        if needed == 0 {
            continue;
        }
        // occupied directions inside N_k: N_{k-1} plus height-k elements of
        // taller chains
        let mut occupied: Vec<Array1<C64>> = if k >= 2 {
            nullspaces[k - 2].clone()
        } else {
            Vec::new()
        };
        for (h, t) in &tops {
            // element of that chain at height k is A^{h-k} t
            let mut v = t.clone();
            for _ in 0..(h - k) {
                v = a_shift.dot(&v);
            }
            occupied.push(v);
        }
        let occupied = orthonormalize(&occupied);
        let mut chosen = 0usize;
        let mut frame = occupied;
        // greedy max-residual selection keeps the choice deterministic
        let mut candidates: Vec<(f64, Array1<C64>)> = Vec::new();
        for cand in &nullspaces[k - 1] {
            let r = project_out(cand, &frame);
            let n = r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            candidates.push((n, cand.clone()));
        }
        while chosen < needed {
            let mut best = usize::MAX;
            let mut best_norm = -1.0;
            for (i, (_, cand)) in candidates.iter().enumerate() {
                let r = project_out(cand, &frame);
                let n = r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if n > best_norm {
                    best_norm = n;
                    best = i;
                }
            }
            if best == usize::MAX || best_norm < 1e-10 {
                return Err(Error::NonConvergence(
                    "could not select an independent chain top".into(),
                ));
            }
            let (_, cand) = candidates.remove(best);
            let r = project_out(&cand, &frame);
            let n = r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            frame.push(r.mapv(|x| x / C64::new(n, 0.0)));
            tops.push((k, cand));
            chosen += 1;
        }
    }

    // chains from tops: d_j = A^{len-1-j} top
    let mut chains = Vec::new();
    for (len, top) in tops {
        let mut chain = vec![top];
        for _ in 1..len {
            let next = a_shift.dot(chain.last().unwrap());
            chain.push(next);
        }
        chain.reverse(); // now d_0 .. d_{len-1}
        let n0 = chain[0].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if n0 < 1e-300 {
            return Err(Error::NonConvergence("chain collapsed to zero".into()));
        }
        let chain: Vec<Array1<C64>> = chain
            .into_iter()
            .map(|v| v.mapv(|x| x / C64::new(n0, 0.0)))
            .collect();
        chains.push(chain);
    }
    // longest chains first; selection order breaks ties deterministically
    chains.sort_by(|a, b| b.len().cmp(&a.len()));
    Ok(chains)
}

/// Clustered Jordan decomposition with bi-orthonormal left/right bases.
pub fn decompose(l: &Superoperator, cluster_tol: f64) -> Result<JordanDecomposition> {
    if cluster_tol < 0.0 {
        return Err(Error::InvalidArgument(
            "cluster tolerance must be nonnegative".into(),
        ));
    }
    let a = l.matrix();
    let n = a.nrows();
    if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidArgument("superoperator has non-finite entries".into()));
    }
    let (vals, vecs) = a.eig()?;
    let vals: Vec<C64> = vals.to_vec();

    let mut clusters: Vec<(Cluster, Vec<usize>)> = cluster_eigenvalues(&vals, cluster_tol)
        .into_iter()
        .map(|idx| {
            let mean = idx.iter().map(|&i| vals[i]).sum::<C64>() / C64::new(idx.len() as f64, 0.0);
            (
                Cluster {
                    eigenvalue: mean,
                    multiplicity: idx.len(),
                },
                idx,
            )
        })
        .collect();
    // block ordering: Re descending, Im ascending
    clusters.sort_by(|(a, _), (b, _)| {
        b.eigenvalue
            .re
            .total_cmp(&a.eigenvalue.re)
            .then(a.eigenvalue.im.total_cmp(&b.eigenvalue.im))
    });

    let mut blocks_data: Vec<(C64, Vec<Array1<C64>>)> = Vec::new();
    for (cluster, idx) in &clusters {
        if cluster.multiplicity == 1 {
            let v = vecs.column(idx[0]).to_owned();
            let nv = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            blocks_data.push((cluster.eigenvalue, vec![v.mapv(|x| x / C64::new(nv, 0.0))]));
        } else {
            let mut shifted = a.clone();
            for i in 0..n {
                shifted[[i, i]] -= cluster.eigenvalue;
            }
            let chains = build_cluster_chains(&shifted, cluster.multiplicity)?;
            for chain in chains {
                blocks_data.push((cluster.eigenvalue, chain));
            }
        }
    }

    let total: usize = blocks_data.iter().map(|(_, c)| c.len()).sum();
    if total != n {
        return Err(Error::NonConvergence(format!(
            "chain dimensions sum to {total}, expected {n}"
        )));
    }

    // right-basis matrix S, columns in block order
    let mut s = Array2::zeros((n, n));
    let mut col = 0usize;
    for (_, chain) in &blocks_data {
        for v in chain {
            s.column_mut(col).assign(v);
            col += 1;
        }
    }

    let mut s_inv = s.inv().map_err(|_| Error::IllConditionedDecomposition {
        residual: f64::INFINITY,
        tol: BIORTH_TOL,
    })?;
    // one Newton refinement pass: X <- X + X (I - S X)
    let eye: Array2<C64> = Array2::eye(n);
    let defect = &eye - &s.dot(&s_inv);
    s_inv = &s_inv + &s_inv.dot(&defect);
    let residual = max_abs(&(&s_inv.dot(&s) - &eye));
    if residual > BIORTH_TOL {
        return Err(Error::IllConditionedDecomposition {
            residual,
            tol: BIORTH_TOL,
        });
    }

    let mut blocks = Vec::with_capacity(blocks_data.len());
    let mut row = 0usize;
    for (lam, chain) in blocks_data {
        let len = chain.len();
        let left: Vec<Array1<C64>> = (0..len).map(|i| s_inv.row(row + i).to_owned()).collect();
        row += len;
        blocks.push(JordanBlockBasis {
            eigenvalue: lam,
            chain_len: len,
            right: chain,
            left,
        });
    }

    Ok(JordanDecomposition {
        blocks,
        dim: n,
        cluster_tol,
    })
}

/// Max-norm residuals of bi-orthonormality, the chain relations, and
/// completeness. Diagnostic only; inputs are not mutated.
pub fn verify(dec: &JordanDecomposition, l: &Superoperator) -> ResidualReport {
    let n = dec.dim;
    let a = l.matrix();

    let mut s = Array2::zeros((n, n));
    let mut x = Array2::zeros((n, n));
    let mut col = 0usize;
    for block in &dec.blocks {
        for (j, v) in block.right.iter().enumerate() {
            s.column_mut(col + j).assign(v);
        }
        for (i, e) in block.left.iter().enumerate() {
            x.row_mut(col + i).assign(e);
        }
        col += block.chain_len;
    }
    let eye: Array2<C64> = Array2::eye(n);
    let biorth = max_abs(&(&x.dot(&s) - &eye));
    let completeness = max_abs(&(&s.dot(&x) - &eye));

    let mut chain_res: f64 = 0.0;
    for block in &dec.blocks {
        let lam = block.eigenvalue;
        for j in 0..block.chain_len {
            // L d_j - lam d_j - d_{j-1}
            let mut r = a.dot(&block.right[j]) - block.right[j].mapv(|v| v * lam);
            if j > 0 {
                r = r - &block.right[j - 1];
            }
            chain_res = chain_res.max(r.iter().map(|c| c.norm()).fold(0.0, f64::max));
            // e_i L - lam e_i - e_{i+1}
            let i = j;
            let mut rl = block.left[i].dot(a) - block.left[i].mapv(|v| v * lam);
            if i + 1 < block.chain_len {
                rl = rl - &block.left[i + 1];
            }
            chain_res = chain_res.max(rl.iter().map(|c| c.norm()).fold(0.0, f64::max));
        }
    }

    ResidualReport {
        biorthonormality: biorth,
        chain: chain_res,
        completeness,
    }
}
