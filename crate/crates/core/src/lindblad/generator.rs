//! Block-diagonal Liouvillian and its exponential.

use nalgebra::DVector;

use super::{CMat, OpenSystemModel, Segment};
use crate::error::{domain, Result};
use crate::C64;

type Sparse = Vec<Vec<(usize, C64)>>;

#[derive(Debug, Clone)]
pub struct Block {
    pub q: i64,
    pub pairs: Vec<(usize, usize)>,
}

/// Index bookkeeping for the truncated two-qubit ⊗ mode space.
#[derive(Debug, Clone)]
pub struct Space {
    n_max: usize,
    blocks: Vec<Block>,
    /// (block, position) for each (i, j), row-major.
    slot: Vec<(usize, usize)>,
}

impl Space {
    pub fn new(n_max: usize) -> Self {
        let m = n_max + 1;
        let dim = 4 * m;
        let exc = |i: usize| -> i64 {
            let s = i / m;
            ((s >> 1) + (s & 1) + i % m) as i64
        };
        let qmax = (n_max + 2) as i64;
        let mut blocks: Vec<Block> = (-qmax..=qmax).map(|q| Block { q, pairs: Vec::new() }).collect();
        let mut slot = vec![(0, 0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let b = (exc(i) - exc(j) + qmax) as usize;
                slot[i * dim + j] = (b, blocks[b].pairs.len());
                blocks[b].pairs.push((i, j));
            }
        }
        Self { n_max, blocks, slot }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        4 * self.levels()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn to_blocks(&self, rho: &CMat) -> Vec<DVector<C64>> {
        self.blocks
            .iter()
            .map(|b| DVector::from_iterator(b.pairs.len(), b.pairs.iter().map(|&(i, j)| rho[(i, j)])))
            .collect()
    }

    pub fn from_blocks(&self, v: &[DVector<C64>]) -> CMat {
        let mut rho = CMat::zeros(self.dim(), self.dim());
        for (b, vec) in self.blocks.iter().zip(v) {
            for (&(i, j), z) in b.pairs.iter().zip(vec.iter()) {
                rho[(i, j)] = *z;
            }
        }
        rho
    }

    pub fn active(&self, v: &[DVector<C64>]) -> Vec<bool> {
        v.iter().map(|b| b.iter().any(|z| z.norm_sqr() > 0.0)).collect()
    }

    /// Partial trace over the mode.
    pub fn reduce(&self, rho: &CMat) -> CMat {
        let m = self.levels();
        CMat::from_fn(4, 4, |a, b| (0..m).map(|n| rho[(a * m + n, b * m + n)]).sum())
    }

    /// Lowering operators (σ₁⁻, σ₂⁻, a) as dense matrices.
    pub fn lowering(&self) -> [CMat; 3] {
        let m = self.levels();
        let d = self.dim();
        let one = C64::new(1.0, 0.0);
        let mut s1 = CMat::zeros(d, d);
        let mut s2 = CMat::zeros(d, d);
        let mut a = CMat::zeros(d, d);
        for q1 in 0..2 {
            for q2 in 0..2 {
                for n in 0..m {
                    let i = (2 * q1 + q2) * m + n;
                    if q1 == 1 {
                        s1[((2 + q2) * m + n - 2 * m, i)] = one;
                    }
                    if q2 == 1 {
                        s2[(i - m, i)] = one;
                    }
                    if n > 0 {
                        a[(i - 1, i)] = C64::new((n as f64).sqrt(), 0.0);
                    }
                }
            }
        }
        [s1, s2, a]
    }
}

fn sparse(m: &CMat) -> Sparse {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != C64::new(0.0, 0.0)).map(|j| (j, m[(i, j)])).collect())
        .collect()
}

/// Liouvillian L(ρ) = Kρ + ρK† + Σ CρC†, K = −iH − ½ΣC†C, split by block.
pub struct Generator {
    pub blocks: Vec<CMat>,
}

impl Generator {
    pub fn hamiltonian(space: &Space, model: &OpenSystemModel, seg: &Segment) -> CMat {
        let [s1, s2, a] = space.lowering();
        let c = |x: f64| C64::new(x, 0.0);
        let mut h = (s1.adjoint() * &s1) * c(seg.nv_detuning[0])
            + (s2.adjoint() * &s2) * c(seg.nv_detuning[1])
            + (a.adjoint() * &a) * c(seg.mode_detuning);
        for (on, g, s) in [(seg.coupling_on[0], model.g1, &s1), (seg.coupling_on[1], model.g2, &s2)] {
            if on {
                let term = s.adjoint() * &a * g;
                h += &term + term.adjoint();
            }
        }
        h
    }

    pub fn collapse(space: &Space, model: &OpenSystemModel) -> Vec<CMat> {
        let [s1, s2, a] = space.lowering();
        let c = |x: f64| C64::new(x, 0.0);
        let mut ops = Vec::new();
        if model.kappa > 0.0 {
            ops.push(&a * c((2.0 * model.kappa * (1.0 + model.n_th)).sqrt()));
            if model.n_th > 0.0 {
                ops.push(a.adjoint() * c((2.0 * model.kappa * model.n_th).sqrt()));
            }
        }
        let gd = model.dephasing_rate();
        if gd > 0.0 {
            let id = CMat::identity(space.dim(), space.dim());
            for s in [&s1, &s2] {
                let sz = (s.adjoint() * s) * c(2.0) - &id;
                ops.push(sz * c((gd / 2.0).sqrt()));
            }
        }
        ops
    }

    pub fn build(space: &Space, model: &OpenSystemModel, seg: &Segment) -> Result<Self> {
        if space.n_max() != model.n_max {
            return domain("space and model cutoffs differ");
        }
        model.validate()?;
        let h = Self::hamiltonian(space, model, seg);
        let cs = Self::collapse(space, model);
        let mut k = h * C64::new(0.0, -1.0);
        for c in &cs {
            k -= (c.adjoint() * c) * C64::new(0.5, 0.0);
        }
        let ks = sparse(&k);
        let css: Vec<Sparse> = cs.iter().map(sparse).collect();
        let dim = space.dim();
        let blocks = space
            .blocks()
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let n = b.pairs.len();
                let mut l = CMat::zeros(n, n);
                for (row, &(i, j)) in b.pairs.iter().enumerate() {
                    for &(kk, z) in &ks[i] {
                        let (bb, col) = space.slot[kk * dim + j];
                        debug_assert_eq!(bb, bi);
                        l[(row, col)] += z;
                    }
                    for &(ll, z) in &ks[j] {
                        let (_, col) = space.slot[i * dim + ll];
                        l[(row, col)] += z.conj();
                    }
                    for c in &css {
                        for &(kk, zk) in &c[i] {
                            for &(ll, zl) in &c[j] {
                                let (_, col) = space.slot[kk * dim + ll];
                                l[(row, col)] += zk * zl.conj();
                            }
                        }
                    }
                }
                l
            })
            .collect();
        Ok(Self { blocks })
    }

    /// exp(L t) on the active blocks.
    pub fn propagator(&self, t: f64, active: &[bool]) -> Result<Propagator> {
        if !(t >= 0.0) {
            return domain("propagation time must be non-negative");
        }
        let blocks = self
            .blocks
            .iter()
            .zip(active)
            .map(|(l, &on)| on.then(|| (l * C64::new(t, 0.0)).exp()))
            .collect();
        Ok(Propagator { blocks })
    }

    /// Largest |Σ_i L_(ii),(kl)| over the zero block.
    pub fn trace_defect(&self, space: &Space) -> f64 {
        let (bi, b) = space.blocks().iter().enumerate().find(|(_, b)| b.q == 0).unwrap();
        let l = &self.blocks[bi];
        let diag: Vec<usize> = b.pairs.iter().enumerate().filter(|(_, (i, j))| i == j).map(|(r, _)| r).collect();
        (0..l.ncols())
            .map(|col| diag.iter().map(|&r| l[(r, col)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }
}

pub struct Propagator {
    blocks: Vec<Option<CMat>>,
}

impl Propagator {
    pub fn apply(&self, v: &[DVector<C64>]) -> Result<Vec<DVector<C64>>> {
        v.iter()
            .zip(&self.blocks)
            .map(|(x, p)| match p {
                Some(p) => Ok(p * x),
                None if x.iter().all(|z| z.norm_sqr() == 0.0) => Ok(x.clone()),
                None => domain("propagator missing for an occupied block"),
            })
            .collect()
    }
}
