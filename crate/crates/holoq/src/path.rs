//! Closed parameter curves, sampling of superoperator families along them,
//! and block tracking with gauge-jump removal.
//!
//! Tracking keeps the per-point bases produced by the decomposition and only
//! removes discontinuous branch jumps (a unit-phase rotation applied when a
//! step overlap strays outside a small sector around the positive real axis).
//! The loop sum of step logarithms is invariant under any per-point
//! rescaling, so this cleanup never alters closed-loop phases; it only keeps
//! every per-step factor on the principal branch. Within a degenerate
//! cluster the per-point basis is an arbitrary gauge section; downstream
//! holonomy products are exactly gauge covariant, so no alignment is forced
//! there.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{decompose, JordanBlockBasis, JordanDecomposition};
use crate::superop::Superoperator;

/// Step overlaps are rotated onto the positive real axis when their argument
/// exceeds this sector half-width.
const FLIP_SECTOR: f64 = std::f64::consts::PI / 8.0;
/// Minimum step-overlap modulus for a valid match.
const MATCH_MODULUS: f64 = 0.5;
/// Eigenvalue motion per step must stay below this fraction of the local gap.
const CONTINUITY_FRACTION: f64 = 0.2;

/// A curve s in [0,1] -> R(s) in parameter space with a uniform grid.
#[derive(Clone)]
pub struct ParameterPath {
    map: Arc<dyn Fn(f64) -> Array1<f64> + Send + Sync>,
    n_grid: usize,
    closed: bool,
}

impl ParameterPath {
    /// Closed curve; evaluation wraps s modulo 1 so R(1) is bitwise R(0).
    pub fn closed<F>(map: F, n_grid: usize) -> Result<Self>
    where
        F: Fn(f64) -> Array1<f64> + Send + Sync + 'static,
    {
        if n_grid < 16 {
            return Err(Error::GridTooCoarse(n_grid));
        }
        Ok(Self {
            map: Arc::new(map),
            n_grid,
            closed: true,
        })
    }

    pub fn open<F>(map: F, n_grid: usize) -> Result<Self>
    where
        F: Fn(f64) -> Array1<f64> + Send + Sync + 'static,
    {
        if n_grid < 16 {
            return Err(Error::GridTooCoarse(n_grid));
        }
        Ok(Self {
            map: Arc::new(map),
            n_grid,
            closed: false,
        })
    }

    pub fn evaluate(&self, s: f64) -> Array1<f64> {
        let s = if self.closed { s - s.floor() } else { s };
        (self.map)(s)
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Grid points s_k = k/N, k = 0..=N.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.n_grid)
            .map(|k| k as f64 / self.n_grid as f64)
            .collect()
    }

    /// Same curve with a different grid resolution.
    pub fn with_grid(&self, n_grid: usize) -> Result<Self> {
        if n_grid < 16 {
            return Err(Error::GridTooCoarse(n_grid));
        }
        Ok(Self {
            map: self.map.clone(),
            n_grid,
            closed: self.closed,
        })
    }
}

/// A family of superoperators over parameter space.
pub trait SuperoperatorFamily: Send + Sync {
    fn hilbert_dim(&self) -> usize;
    fn superoperator(&self, params: ArrayView1<f64>) -> Result<Superoperator>;
}

/// A family of Hamiltonians over parameter space (closed-system limit).
pub trait HamiltonianFamily: Send + Sync {
    fn hilbert_dim(&self) -> usize;
    fn hamiltonian(&self, params: ArrayView1<f64>) -> ndarray::Array2<C64>;
}

/// L(s_k) on the path grid. For closed paths the final sample is a bitwise
/// copy of the first.
pub fn sample_family(
    path: &ParameterPath,
    family: &dyn SuperoperatorFamily,
) -> Result<Vec<Superoperator>> {
    let n = path.n_grid();
    let last = if path.is_closed() { n } else { n + 1 };
    let mut samples: Vec<Superoperator> = (0..last)
        .into_par_iter()
        .map(|k| {
            let s = k as f64 / n as f64;
            family
                .superoperator(path.evaluate(s).view())
                .map_err(|e| Error::ModelEvaluation {
                    s,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    if path.is_closed() {
        samples.push(samples[0].clone());
    }
    Ok(samples)
}

/// One Jordan block followed along the path.
#[derive(Debug, Clone)]
pub struct SmoothBlockTrack {
    pub(crate) label: usize,
    pub(crate) cluster_id: usize,
    pub(crate) degeneracy: usize,
    pub(crate) chain_len: usize,
    pub(crate) closed: bool,
    pub(crate) cluster_tol: f64,
    pub(crate) n_grid: usize,
    pub(crate) eigenvalues: Vec<C64>,
    /// right[k][j] = |d_j>> at grid point k
    pub(crate) right: Vec<Vec<Array1<C64>>>,
    /// left[k][i] = <<e_i| at grid point k (bra row)
    pub(crate) left: Vec<Vec<Array1<C64>>>,
}

impl SmoothBlockTrack {
    pub fn label(&self) -> usize {
        self.label
    }

    pub fn cluster_id(&self) -> usize {
        self.cluster_id
    }

    /// Number of blocks sharing this track's eigenvalue cluster.
    pub fn degeneracy(&self) -> usize {
        self.degeneracy
    }

    pub fn chain_len(&self) -> usize {
        self.chain_len
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    /// Number of grid intervals N (points are 0..=N).
    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn eigenvalue(&self, k: usize) -> C64 {
        self.eigenvalues[k]
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn right(&self, k: usize) -> &[Array1<C64>] {
        &self.right[k]
    }

    pub fn left(&self, k: usize) -> &[Array1<C64>] {
        &self.left[k]
    }
}

struct ClusterRef {
    eigenvalue: C64,
    blocks: Vec<usize>,
}

/// Group block indices by exactly-equal stored eigenvalue (the decomposition
/// assigns the common cluster mean to every member).
fn clusters_of(dec: &JordanDecomposition) -> Vec<ClusterRef> {
    let mut out: Vec<ClusterRef> = Vec::new();
    for (i, b) in dec.blocks.iter().enumerate() {
        match out.last_mut() {
            Some(c) if c.eigenvalue == b.eigenvalue => c.blocks.push(i),
            _ => out.push(ClusterRef {
                eigenvalue: b.eigenvalue,
                blocks: vec![i],
            }),
        }
    }
    out
}

fn chain_multiset(dec: &JordanDecomposition) -> Vec<usize> {
    let mut lens: Vec<usize> = dec.blocks.iter().map(|b| b.chain_len).collect();
    lens.sort_unstable();
    lens
}

fn bilinear(bra: &Array1<C64>, ket: &Array1<C64>) -> C64 {
    bra.iter().zip(ket.iter()).map(|(a, b)| a * b).sum()
}

/// Rotate a block by a unit phase: rights by u, lefts by 1/u.
fn rotate_block(block: &mut JordanBlockBasis, u: C64) {
    for v in &mut block.right {
        v.mapv_inplace(|x| x * u);
    }
    let inv = C64::new(1.0, 0.0) / u;
    for e in &mut block.left {
        e.mapv_inplace(|x| x * inv);
    }
}

/// Follow the Jordan blocks of the sampled family along the path.
///
/// Requires an identical chain-length multiset at every grid point. Blocks
/// are matched between adjacent points cluster-by-cluster through eigenvalue
/// continuity, then vector-by-vector inside a cluster by dominant overlap
/// when one exists.
pub fn track_blocks(
    samples: &[Superoperator],
    cluster_tol: f64,
) -> Result<Vec<SmoothBlockTrack>> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "tracking needs at least two samples".into(),
        ));
    }
    let n = samples.len() - 1;
    let closed = samples[0] == samples[n];

    // per-point decompositions; for closed paths the endpoint reuses the
    // start decomposition so the loop closes exactly
    let interior = if closed { n } else { n + 1 };
    let mut decs: Vec<JordanDecomposition> = (0..interior)
        .into_par_iter()
        .map(|k| decompose(&samples[k], cluster_tol))
        .collect::<Result<_>>()?;
    if closed {
        decs.push(decs[0].clone());
    }

    let reference = chain_multiset(&decs[0]);
    for (k, dec) in decs.iter().enumerate() {
        if chain_multiset(dec) != reference {
            return Err(Error::StructureChange {
                s: k as f64 / n as f64,
                detail: format!(
                    "chain-length multiset {:?} differs from {:?}",
                    chain_multiset(dec),
                    reference
                ),
            });
        }
    }

    let m = decs[0].blocks.len();
    // track state: per track, the block index at the current point
    let mut cluster_ids: Vec<usize> = vec![0; m];
    for (cid, cluster) in clusters_of(&decs[0]).iter().enumerate() {
        for &b in &cluster.blocks {
            cluster_ids[b] = cid;
        }
    }

    let mut tracks: Vec<SmoothBlockTrack> = decs[0]
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| SmoothBlockTrack {
            label: i,
            cluster_id: cluster_ids[i],
            degeneracy: decs[0]
                .blocks
                .iter()
                .filter(|x| x.eigenvalue == b.eigenvalue)
                .count(),
            chain_len: b.chain_len,
            closed,
            cluster_tol,
            n_grid: n,
            eigenvalues: vec![b.eigenvalue],
            right: vec![b.right.clone()],
            left: vec![b.left.clone()],
        })
        .collect();

    for k in 0..n {
        let s_next = (k + 1) as f64 / n as f64;
        let cur: Vec<ClusterRef> = {
            // clusters of the *tracked* assignment at point k share ids
            let mut by_id: Vec<(usize, C64, Vec<usize>)> = Vec::new();
            for t in 0..m {
                let cid = tracks[t].cluster_id;
                let lam = tracks[t].eigenvalues[k];
                match by_id.iter_mut().find(|(id, _, _)| *id == cid) {
                    Some((_, _, list)) => list.push(t),
                    None => by_id.push((cid, lam, vec![t])),
                }
            }
            by_id
                .into_iter()
                .map(|(_, lam, list)| ClusterRef {
                    eigenvalue: lam,
                    blocks: list,
                })
                .collect()
        };
        let next = clusters_of(&decs[k + 1]);
        if next.len() != cur.len() {
            return Err(Error::StructureChange {
                s: s_next,
                detail: format!(
                    "cluster count changed from {} to {}",
                    cur.len(),
                    next.len()
                ),
            });
        }

        // eigenvalue-continuity matching of clusters
        let mut used = vec![false; next.len()];
        let mut cluster_match: Vec<usize> = vec![usize::MAX; cur.len()];
        for (ci, c) in cur.iter().enumerate() {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            let mut second_d = f64::INFINITY;
            for (cj, cand) in next.iter().enumerate() {
                if used[cj] {
                    continue;
                }
                let d = (cand.eigenvalue - c.eigenvalue).norm();
                if d < best_d {
                    second_d = best_d;
                    best_d = d;
                    best = cj;
                } else if d < second_d {
                    second_d = d;
                }
            }
            let gap = cur
                .iter()
                .enumerate()
                .filter(|(cj, _)| *cj != ci)
                .map(|(_, o)| (o.eigenvalue - c.eigenvalue).norm())
                .fold(f64::INFINITY, f64::min);
            let bound = CONTINUITY_FRACTION * gap;
            if best == usize::MAX || best_d > bound {
                return Err(Error::StructureChange {
                    s: s_next,
                    detail: format!(
                        "eigenvalue step {best_d:.3e} exceeds continuity bound {bound:.3e}"
                    ),
                });
            }
            if second_d.is_finite() && (second_d - best_d).abs() <= 1e-3 && second_d <= bound {
                return Err(Error::MatchingAmbiguity {
                    s: s_next,
                    first: best_d,
                    second: second_d,
                });
            }
            if next[best].blocks.len() != c.blocks.len() {
                return Err(Error::StructureChange {
                    s: s_next,
                    detail: format!(
                        "cluster degeneracy changed from {} to {}",
                        c.blocks.len(),
                        next[best].blocks.len()
                    ),
                });
            }
            used[best] = true;
            cluster_match[ci] = best;
        }

        let pinned_endpoint = closed && k + 1 == n;
        let mut new_assignment = vec![usize::MAX; m];
        if pinned_endpoint {
            // the endpoint decomposition is the s = 0 one; each track closes
            // onto the exact block it started from, so the loop holonomy is
            // never folded through a within-cluster permutation
            for (t, slot) in new_assignment.iter_mut().enumerate() {
                *slot = t;
            }
        } else {
            for (ci, c) in cur.iter().enumerate() {
                let target = &next[cluster_match[ci]];
                let order = match_within_cluster(&tracks, &decs[k + 1], c, target, k)?;
                for (slot, t) in c.blocks.iter().enumerate() {
                    new_assignment[*t] = target.blocks[order[slot]];
                }
            }
        }

        for t in 0..m {
            let bi = new_assignment[t];
            let mut block = decs[k + 1].blocks[bi].clone();
            // branch-jump removal for nondegenerate blocks; skipped at the
            // pinned endpoint so the closure stays bitwise aligned with s=0
            if tracks[t].degeneracy == 1 {
                let ov = bilinear(&tracks[t].left[k][0], &block.right[0]);
                if ov.norm() < MATCH_MODULUS {
                    return Err(Error::TrackingOverlap {
                        s: s_next,
                        modulus: ov.norm(),
                    });
                }
                if !pinned_endpoint && ov.arg().abs() > FLIP_SECTOR {
                    let u = (ov / C64::new(ov.norm(), 0.0)).conj();
                    rotate_block(&mut block, u);
                }
            }
            tracks[t].eigenvalues.push(block.eigenvalue);
            tracks[t].right.push(block.right);
            tracks[t].left.push(block.left);
        }
    }

    if closed {
        for track in tracks.iter_mut().filter(|t| t.degeneracy == 1) {
            untwist_closure(track);
        }
    }

    Ok(tracks)
}

/// Spread the closure gauge winding uniformly over the loop.
///
/// With the endpoint pinned to the s = 0 basis, a smoothly winding
/// per-point gauge lands its full winding angle kappa on the final step.
/// Rotating point k by exp(i kappa k/N) shifts every interior step angle by
/// +kappa/N and the final one by -kappa (N-1)/N; the loop sum of step
/// logarithms is unchanged exactly, while every individual factor returns
/// to a small angle.
fn untwist_closure(track: &mut SmoothBlockTrack) {
    let n = track.n_grid;
    let closing = bilinear(&track.left[n - 1][0], &track.right[n][0]);
    let kappa = closing.arg();
    if kappa.abs() < 1e-12 {
        return;
    }
    for k in 1..n {
        let u = C64::from_polar(1.0, kappa * k as f64 / n as f64);
        let inv = C64::new(1.0, 0.0) / u;
        for v in &mut track.right[k] {
            v.mapv_inplace(|x| x * u);
        }
        for e in &mut track.left[k] {
            e.mapv_inplace(|x| x * inv);
        }
    }
}

/// Order target-cluster blocks against the tracked ones. Returns for each
/// tracked slot the index into `target.blocks`. Falls back to stored order
/// when no dominant overlap pattern exists (degenerate gauge freedom).
fn match_within_cluster(
    tracks: &[SmoothBlockTrack],
    next_dec: &JordanDecomposition,
    cur: &ClusterRef,
    target: &ClusterRef,
    k: usize,
) -> Result<Vec<usize>> {
    let g = cur.blocks.len();
    if g == 1 {
        return Ok(vec![0]);
    }
    // overlap of tracked left eigen-bras with candidate right eigenvectors
    let mut score = vec![vec![0.0f64; g]; g];
    for (i, &t) in cur.blocks.iter().enumerate() {
        for (j, &b) in target.blocks.iter().enumerate() {
            // only compatible chain lengths can match
            if tracks[t].chain_len != next_dec.blocks[b].chain_len {
                score[i][j] = -1.0;
                continue;
            }
            score[i][j] =
                bilinear(&tracks[t].left[k][0], &next_dec.blocks[b].right[0]).norm();
        }
    }
    let mut order: Vec<usize> = vec![usize::MAX; g];
    let mut taken = vec![false; g];
    let mut dominant = true;
    for i in 0..g {
        let mut best = usize::MAX;
        let mut best_s = -1.0;
        let mut second = -1.0;
        for (j, &s) in score[i].iter().enumerate() {
            if taken[j] {
                continue;
            }
            if s > best_s {
                second = best_s;
                best_s = s;
                best = j;
            } else if s > second {
                second = s;
            }
        }
        if best == usize::MAX || best_s < MATCH_MODULUS || (best_s - second) <= 1e-3 {
            dominant = false;
            break;
        }
        taken[best] = true;
        order[i] = best;
    }
    if dominant {
        return Ok(order);
    }
    // gauge section: keep stored order, but chain lengths must still align
    let mut fallback: Vec<usize> = Vec::with_capacity(g);
    let mut used = vec![false; g];
    for &t in cur.blocks.iter() {
        let want = tracks[t].chain_len;
        let j = (0..g)
            .find(|&j| !used[j] && next_dec.blocks[target.blocks[j]].chain_len == want)
            .ok_or(Error::StructureChange {
                s: (k + 1) as f64 / tracks[t].n_grid as f64,
                detail: "chain lengths within cluster do not align".into(),
            })?;
        used[j] = true;
        fallback.push(j);
    }
    Ok(fallback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superop::{make_basis, total_superop, SuperopKind};
    use ndarray::{array, Array2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    struct ConstantFamily {
        sup: Superoperator,
    }

    impl SuperoperatorFamily for ConstantFamily {
        fn hilbert_dim(&self) -> usize {
            self.sup.dim()
        }
        fn superoperator(&self, _params: ArrayView1<f64>) -> Result<Superoperator> {
            Ok(self.sup.clone())
        }
    }

    /// Diagonal family with two eigenvalues crossing at s = 0.25.
    struct CrossingFamily;

    impl SuperoperatorFamily for CrossingFamily {
        fn hilbert_dim(&self) -> usize {
            2
        }
        fn superoperator(&self, params: ArrayView1<f64>) -> Result<Superoperator> {
            let s = params[0];
            let m = Array2::from_diag(&array![
                c(0., 0.),
                c(-0.2 - s, 0.),
                c(-0.7 + s, 0.),
                c(-2., 0.)
            ]);
            Superoperator::new(m, 2, SuperopKind::Total)
        }
    }

    fn line_path(n: usize) -> ParameterPath {
        ParameterPath::open(|s| array![s], n).unwrap()
    }

    #[test]
    fn closed_path_wraps_exactly() {
        let p = ParameterPath::closed(
            |s| array![(2.0 * std::f64::consts::PI * s).cos()],
            32,
        )
        .unwrap();
        let a = p.evaluate(0.0);
        let b = p.evaluate(1.0);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn constant_family_samples_identical() {
        let basis = make_basis(2).unwrap();
        let h = array![[c(0.5, 0.), c(0., 0.)], [c(0., 0.), c(-0.5, 0.)]];
        let sup = total_superop(&h, &[], &basis).unwrap();
        let fam = ConstantFamily { sup };
        let p = ParameterPath::closed(|s| array![s.cos()], 16).unwrap();
        let samples = sample_family(&p, &fam).unwrap();
        assert_eq!(samples.len(), 17);
        for s in &samples {
            assert_eq!(s, &samples[0]);
        }
    }

    #[test]
    fn dyadic_grids_nest_bitwise() {
        let p = line_path(32);
        let q = p.with_grid(64).unwrap();
        let coarse = p.grid();
        let fine = q.grid();
        for (k, s) in coarse.iter().enumerate() {
            assert_eq!(s.to_bits(), fine[2 * k].to_bits());
        }
    }

    #[test]
    fn tracking_constant_family_keeps_vectors() {
        let basis = make_basis(2).unwrap();
        let h = array![[c(0.7, 0.), c(0., 0.)], [c(0., 0.), c(-0.7, 0.)]];
        let sup = total_superop(&h, &[], &basis).unwrap();
        let fam = ConstantFamily { sup };
        let p = ParameterPath::closed(|_| array![0.0], 16).unwrap();
        let samples = sample_family(&p, &fam).unwrap();
        let tracks = track_blocks(&samples, 1e-9).unwrap();
        assert_eq!(tracks.len(), 4);
        for t in &tracks {
            for k in 1..=16 {
                for (a, b) in t.right[0][0].iter().zip(t.right[k][0].iter()) {
                    assert!((a - b).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn crossing_eigenvalues_raise_structure_error() {
        let p = line_path(64);
        let samples = sample_family(&p, &CrossingFamily).unwrap();
        let err = track_blocks(&samples, 1e-8).unwrap_err();
        match err {
            Error::StructureChange { s, .. } => {
                assert!((0.1..=0.4).contains(&s), "error at s = {s}");
            }
            other => panic!("expected structure change, got {other}"),
        }
    }
}
