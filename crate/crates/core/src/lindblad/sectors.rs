//! Block structure of the density matrix under a Lindblad generator.
//!
//! Let `P` be the finest partition of basis states such that `H` and every
//! `C^dag C` are block diagonal, every collapse operator maps each block into a
//! single block, and the initial state is block diagonal. Then `rho(t)` stays
//! block diagonal on `P` for all times, and only blocks reachable from the
//! initial support through the collapse maps are ever populated. The engine
//! stores and propagates exactly those blocks.
//!
//! Each block is Hermitian, so only its upper triangle is kept, column by
//! column. State vectors are split: the first half of the buffer holds real
//! parts and the second half imaginary parts.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{min_hermitian_eigenvalue, LindbladSystem};
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

const UNREACHED: usize = usize::MAX;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Reachable diagonal blocks of the density matrix.
#[derive(Clone, Debug)]
pub struct SectorLayout {
    dim: usize,
    blocks: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    block_of: Vec<usize>,
    local: Vec<usize>,
}

impl SectorLayout {
    /// A single block covering the whole space.
    pub fn dense(dim: usize) -> Self {
        Self::from_blocks(dim, vec![(0..dim).collect()])
    }

    fn from_blocks(dim: usize, blocks: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        let mut block_of = vec![UNREACHED; dim];
        let mut local = vec![UNREACHED; dim];
        let mut off = 0;
        for (b, members) in blocks.iter().enumerate() {
            offsets.push(off);
            off += packed_len(members.len());
            for (k, &i) in members.iter().enumerate() {
                block_of[i] = b;
                local[i] = k;
            }
        }
        offsets.push(off);
        SectorLayout {
            dim,
            blocks,
            offsets,
            block_of,
            local,
        }
    }

    /// Detect the block structure from the generator and the nonzero entries
    /// `(i, j)` of the initial density matrix.
    pub fn detect(sys: &LindbladSystem, support: &[(usize, usize)]) -> Result<Self> {
        let dim = sys.dim();
        if let Some(&(i, j)) = support.iter().find(|(i, j)| *i >= dim || *j >= dim) {
            return Err(Error::DimensionMismatch {
                context: format!("support entry ({i}, {j}) in a space of dimension {dim}"),
            });
        }
        if support.is_empty() {
            return Err(Error::InvalidState("initial state is zero".into()));
        }
        let mut uf = UnionFind::new(dim);
        for (i, j, _) in sys.hamiltonian().triplets() {
            uf.union(i, j);
        }
        for cdc in sys.jump_products() {
            for (i, j, _) in cdc.triplets() {
                uf.union(i, j);
            }
        }
        for &(i, j) in support {
            uf.union(i, j);
        }
        // every collapse operator must map a block into exactly one block
        loop {
            let mut changed = false;
            for c in sys.collapses() {
                let mut image: HashMap<usize, usize> = HashMap::new();
                for (i, j, _) in c.triplets() {
                    let src = uf.find(j);
                    let dst = uf.find(i);
                    match image.get(&src) {
                        Some(&prev) if uf.find(prev) != dst => {
                            changed |= uf.union(prev, dst);
                        }
                        Some(_) => {}
                        None => {
                            image.insert(src, dst);
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let mut images: Vec<HashMap<usize, usize>> = Vec::new();
        for c in sys.collapses() {
            let mut image = HashMap::new();
            for (i, j, _) in c.triplets() {
                image.insert(uf.find(j), uf.find(i));
            }
            images.push(image);
        }
        let mut reached: HashMap<usize, ()> = HashMap::new();
        let mut queue = VecDeque::new();
        for &(i, _) in support {
            let r = uf.find(i);
            if reached.insert(r, ()).is_none() {
                queue.push_back(r);
            }
        }
        while let Some(r) = queue.pop_front() {
            for image in &images {
                if let Some(&t) = image.get(&r) {
                    if reached.insert(t, ()).is_none() {
                        queue.push_back(t);
                    }
                }
            }
        }

        let mut id_of_root: HashMap<usize, usize> = HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for i in 0..dim {
            let r = uf.find(i);
            if !reached.contains_key(&r) {
                continue;
            }
            let id = *id_of_root.entry(r).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[id].push(i);
        }
        Ok(Self::from_blocks(dim, blocks))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Number of stored complex entries.
    pub fn storage_len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Stored position of `rho_ij`, and whether the stored value is its
    /// conjugate. `None` for entries outside the tracked blocks.
    pub fn flat_index(&self, i: usize, j: usize) -> Option<(usize, bool)> {
        let b = self.block_of[i];
        if b == UNREACHED || self.block_of[j] != b {
            return None;
        }
        let (li, lj) = (self.local[i], self.local[j]);
        Some(if li <= lj {
            (self.offsets[b] + packed_index(li, lj), false)
        } else {
            (self.offsets[b] + packed_index(lj, li), true)
        })
    }

    /// Precompute `tr(O rho)` as `sum_k a_k Re(p_k) + b_k Im(p_k)` over stored
    /// entries `p_k`.
    pub(crate) fn compile(&self, op: &SparseOperator) -> Vec<(usize, C64, C64)> {
        let mut acc: HashMap<usize, (C64, C64)> = HashMap::new();
        for (i, j, v) in op.triplets() {
            if let Some((k, conj)) = self.flat_index(j, i) {
                let e = acc.entry(k).or_insert((C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
                let i_unit = if conj { -C64::i() } else { C64::i() };
                e.0 += v;
                e.1 += v * i_unit;
            }
        }
        let mut list: Vec<_> = acc.into_iter().map(|(k, (a, b))| (k, a, b)).collect();
        list.sort_by_key(|e| e.0);
        list
    }

    pub(crate) fn evaluate(&self, list: &[(usize, C64, C64)], y: &[f64]) -> C64 {
        let m = self.storage_len();
        list.iter().map(|&(k, a, b)| a * y[k] + b * y[m + k]).sum()
    }

    fn block_planes<'a>(&self, y: &'a [f64], b: usize) -> (&'a [f64], &'a [f64]) {
        let m = self.storage_len();
        let r = self.offsets[b]..self.offsets[b + 1];
        (&y[r.clone()], &y[m + r.start..m + r.end])
    }
}

fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)`, `i <= j`, in a packed upper triangle.
#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

/// Block-diagonal density matrix on a [`SectorLayout`].
#[derive(Clone, Debug)]
pub struct SectorState {
    layout: Arc<SectorLayout>,
    pub(crate) data: Vec<f64>,
}

impl SectorState {
    pub(crate) fn new(layout: Arc<SectorLayout>, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), 2 * layout.storage_len());
        SectorState { layout, data }
    }

    /// Gather the upper triangles of the tracked blocks of `m`; everything
    /// else is dropped.
    pub fn from_dense(layout: Arc<SectorLayout>, m: &DMatrix<C64>) -> Self {
        let len = layout.storage_len();
        let mut data = vec![0.0; 2 * len];
        for (b, members) in layout.blocks.iter().enumerate() {
            let off = layout.offsets[b];
            for (cj, &j) in members.iter().enumerate() {
                for (ci, &i) in members.iter().enumerate().take(cj + 1) {
                    let v = m[(i, j)];
                    data[off + packed_index(ci, cj)] = v.re;
                    data[len + off + packed_index(ci, cj)] = v.im;
                }
            }
        }
        SectorState { layout, data }
    }

    /// `|psi><psi|` restricted to the tracked blocks (psi is normalized here).
    pub fn from_pure(layout: Arc<SectorLayout>, psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        if norm2 == 0.0 || !norm2.is_finite() {
            return Err(Error::InvalidState("state vector has zero norm".into()));
        }
        let len = layout.storage_len();
        let mut data = vec![0.0; 2 * len];
        for (b, members) in layout.blocks.iter().enumerate() {
            let off = layout.offsets[b];
            for (cj, &j) in members.iter().enumerate() {
                if psi[j] == C64::new(0.0, 0.0) {
                    continue;
                }
                let pj = psi[j].conj() / norm2;
                for (ci, &i) in members.iter().enumerate().take(cj + 1) {
                    let v = psi[i] * pj;
                    data[off + packed_index(ci, cj)] = v.re;
                    data[len + off + packed_index(ci, cj)] = v.im;
                }
            }
        }
        Ok(SectorState { layout, data })
    }

    pub fn layout(&self) -> &SectorLayout {
        &self.layout
    }

    /// `rho_ij`, zero outside the tracked blocks.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        let m = self.layout.storage_len();
        match self.layout.flat_index(i, j) {
            Some((k, false)) => C64::new(self.data[k], self.data[m + k]),
            Some((k, true)) => C64::new(self.data[k], -self.data[m + k]),
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.layout.dim, self.layout.dim);
        for b in 0..self.layout.blocks.len() {
            let blk = self.block_matrix(b);
            let members = &self.layout.blocks[b];
            for (cj, &j) in members.iter().enumerate() {
                for (ci, &i) in members.iter().enumerate() {
                    m[(i, j)] = blk[(ci, cj)];
                }
            }
        }
        m
    }

    pub fn block_matrix(&self, b: usize) -> DMatrix<C64> {
        let n = self.layout.blocks[b].len();
        let (p, q) = self.layout.block_planes(&self.data, b);
        DMatrix::from_fn(n, n, |i, j| {
            if i <= j {
                let k = packed_index(i, j);
                C64::new(p[k], q[k])
            } else {
                let k = packed_index(j, i);
                C64::new(p[k], -q[k])
            }
        })
    }

    pub fn trace(&self) -> C64 {
        trace(&self.layout, &self.data)
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.layout, &self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.layout.blocks.len())
            .map(|b| min_hermitian_eigenvalue(&self.block_matrix(b)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn expectation(&self, op: &SparseOperator) -> Result<C64> {
        if op.nrows() != self.layout.dim || op.ncols() != self.layout.dim {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "observable {}x{} on a state of dimension {}",
                    op.nrows(),
                    op.ncols(),
                    self.layout.dim
                ),
            });
        }
        Ok(self.layout.evaluate(&self.layout.compile(op), &self.data))
    }
}

pub(crate) fn trace(layout: &SectorLayout, y: &[f64]) -> C64 {
    let mut t = C64::new(0.0, 0.0);
    for (b, members) in layout.blocks.iter().enumerate() {
        let (p, q) = layout.block_planes(y, b);
        for j in 0..members.len() {
            let k = packed_index(j, j);
            t += C64::new(p[k], q[k]);
        }
    }
    t
}

/// Largest `|rho_ij - conj(rho_ji)|`; with packed storage only the diagonal
/// can deviate.
pub(crate) fn hermiticity_error(layout: &SectorLayout, y: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (b, members) in layout.blocks.iter().enumerate() {
        let (_, q) = layout.block_planes(y, b);
        for j in 0..members.len() {
            worst = worst.max(2.0 * q[packed_index(j, j)].abs());
        }
    }
    worst
}

/// `(rho + rho^dag) / 2`: clears the imaginary part of the diagonal.
pub(crate) fn hermitize(layout: &SectorLayout, y: &mut [f64]) {
    let m = layout.storage_len();
    for (b, members) in layout.blocks.iter().enumerate() {
        let off = m + layout.offsets[b];
        for j in 0..members.len() {
            y[off + packed_index(j, j)] = 0.0;
        }
    }
}

/// Real-valued compressed-row matrix.
struct RealCsr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl RealCsr {
    fn from_part(op: &SparseOperator, part: impl Fn(C64) -> f64) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..op.nrows() {
            for (j, v) in op.row(i) {
                let x = part(v);
                if x != 0.0 {
                    indices.push(j);
                    values.push(x);
                }
            }
            indptr.push(indices.len());
        }
        RealCsr {
            indptr,
            indices,
            values,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }
}

/// Complex sparse matrix stored as `re + i im`.
struct SplitCsr {
    re: RealCsr,
    im: RealCsr,
}

impl SplitCsr {
    fn new(op: &SparseOperator) -> Self {
        SplitCsr {
            re: RealCsr::from_part(op, |v| v.re),
            im: RealCsr::from_part(op, |v| v.im),
        }
    }
}

/// A collapse operator restricted to one source and one target block.
struct Jump {
    target: usize,
    /// Rows in the target block, columns in the source block.
    op: SplitCsr,
    /// `conj(C_jm)` grouped by source column `m`.
    by_column: Vec<Vec<(usize, C64)>>,
}

/// Lindblad right-hand side restricted to the tracked blocks (hbar = 1).
///
/// Each block is swept in tiles of [`TILE`] columns. A tile of `rho` is
/// expanded into a row-major scratch buffer so that `K = A rho` can be
/// gathered for the whole tile at once. The upper part of `K` lands in the
/// tile's output columns and, since `rho A^dag = K^dag`, the lower part lands
/// conjugated in the tile's rows of later columns. While a tile is resident,
/// it also feeds `C rho C^dag` into the blocks its jumps lead to.
pub(crate) struct BlockGenerator {
    layout: Arc<SectorLayout>,
    generators: Vec<SplitCsr>,
    /// Jumps grouped by source block.
    jumps: Vec<Vec<Jump>>,
    scratch: Scratch,
    kernel: Kernel,
}

#[derive(Default)]
struct Scratch {
    re: Vec<[f64; TILE]>,
    im: Vec<[f64; TILE]>,
    vre: Vec<[f64; TILE]>,
    vim: Vec<[f64; TILE]>,
}

/// Output columns per sweep.
const TILE: usize = 8;

impl BlockGenerator {
    pub(crate) fn new(sys: &LindbladSystem, layout: Arc<SectorLayout>) -> Result<Self> {
        let a = sys.effective_generator()?;
        let generators: Vec<_> = layout
            .blocks
            .iter()
            .map(|members| SplitCsr::new(&a.submatrix(members, members)))
            .collect();
        let nb = layout.blocks.len();
        let mut jumps: Vec<Vec<Jump>> = (0..nb).map(|_| Vec::new()).collect();
        for c in sys.collapses() {
            let mut target_of = vec![UNREACHED; nb];
            for (i, j, _) in c.triplets() {
                let b = layout.block_of[j];
                if b != UNREACHED {
                    target_of[b] = layout.block_of[i];
                }
            }
            for (b, members) in layout.blocks.iter().enumerate() {
                let t = target_of[b];
                if t == UNREACHED {
                    continue;
                }
                let op = c.submatrix(&layout.blocks[t], members);
                if op.nnz() == 0 {
                    continue;
                }
                let mut by_column = vec![Vec::new(); members.len()];
                for (j, m, v) in op.triplets() {
                    by_column[m].push((j, v.conj()));
                }
                jumps[b].push(Jump {
                    target: t,
                    op: SplitCsr::new(&op),
                    by_column,
                });
            }
        }
        Ok(BlockGenerator {
            layout,
            generators,
            jumps,
            scratch: Scratch::default(),
            kernel: Kernel::detect(),
        })
    }

    /// `dy = A rho + rho A^dag + sum C rho C^dag` on split packed buffers.
    pub(crate) fn apply(&mut self, y: &[f64], dy: &mut [f64]) {
        let layout = &*self.layout;
        let m = layout.storage_len();
        dy.fill(0.0);
        let (dre, dim) = dy.split_at_mut(m);
        for (b, op) in self.generators.iter().enumerate() {
            let n = layout.blocks[b].len();
            let rho = layout.block_planes(y, b);
            let jumps = &self.jumps[b];
            let rows = jumps
                .iter()
                .map(|j| layout.blocks[j.target].len())
                .max()
                .unwrap_or(0);
            let s = &mut self.scratch;
            s.re.resize(n, [0.0; TILE]);
            s.im.resize(n, [0.0; TILE]);
            s.vre.resize(rows, [0.0; TILE]);
            s.vim.resize(rows, [0.0; TILE]);
            for c0 in (0..n).step_by(TILE) {
                load_tile(rho, n, c0, &mut s.re[..n], &mut s.im[..n]);
                let own = layout.offsets[b]..layout.offsets[b + 1];
                let out = (&mut dre[own.clone()], &mut dim[own]);
                let tile = (&s.re[..n], &s.im[..n]);
                match self.kernel {
                    Kernel::Portable => own_tile(op, tile, n, c0, out),
                    // SAFETY: the variant is only constructed when the CPU
                    // reports both features.
                    #[cfg(target_arch = "x86_64")]
                    Kernel::Fma => unsafe { own_tile_fma(op, tile, n, c0, out) },
                }
                for jump in jumps {
                    let nt = layout.blocks[jump.target].len();
                    let (vre, vim) = (&mut s.vre[..nt], &mut s.vim[..nt]);
                    match self.kernel {
                        Kernel::Portable => gather_tile(&jump.op, tile, vre, vim),
                        // SAFETY: as above.
                        #[cfg(target_arch = "x86_64")]
                        Kernel::Fma => unsafe { gather_tile_fma(&jump.op, tile, vre, vim) },
                    }
                    let r = layout.offsets[jump.target]..layout.offsets[jump.target + 1];
                    let out = (&mut dre[r.clone()], &mut dim[r]);
                    scatter_jump(jump, c0, n, (vre, vim), out);
                }
            }
        }
        for b in 0..layout.blocks.len() {
            let off = layout.offsets[b];
            for j in 0..layout.blocks[b].len() {
                dim[off + packed_index(j, j)] = 0.0;
            }
        }
    }
}

/// `(sre, sim)[k][t] = rho_{k, c0 + t}`, zero past the last column.
fn load_tile(
    rho: (&[f64], &[f64]),
    n: usize,
    c0: usize,
    sre: &mut [[f64; TILE]],
    sim: &mut [[f64; TILE]],
) {
    let (p, q) = rho;
    let width = TILE.min(n - c0);
    if width < TILE {
        sre.fill([0.0; TILE]);
        sim.fill([0.0; TILE]);
    }
    let bases: [usize; TILE] = std::array::from_fn(|t| packed_index(0, c0 + t.min(width - 1)));
    // rows above the tile: one entry from each column
    for k in 0..c0 {
        for t in 0..width {
            sre[k][t] = p[bases[t] + k];
            sim[k][t] = q[bases[t] + k];
        }
    }
    // the square on the diagonal
    for k in c0..c0 + width {
        let tk = k - c0;
        for t in tk..width {
            sre[k][t] = p[bases[t] + k];
            sim[k][t] = q[bases[t] + k];
        }
        let base = packed_index(c0, k);
        for t in 0..tk {
            sre[k][t] = p[base + t];
            sim[k][t] = -q[base + t];
        }
    }
    // rows below the tile: a contiguous run in the packed column `k`
    for k in c0 + width..n {
        let base = packed_index(c0, k);
        for t in 0..width {
            sre[k][t] = p[base + t];
            sim[k][t] = -q[base + t];
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[inline(always)]
fn fused(a: f64, b: f64, c: f64) -> f64 {
    a.mul_add(b, c)
}

#[inline(always)]
fn unfused(a: f64, b: f64, c: f64) -> f64 {
    a * b + c
}

macro_rules! gather_row {
    ($madd:ident, $op:expr, $r:expr, $sre:expr, $sim:expr) => {{
        let mut ar = [0.0f64; TILE];
        let mut ai = [0.0f64; TILE];
        let (xi, xv) = $op.re.row($r);
        for (&k, &x) in xi.iter().zip(xv) {
            let (sr, si) = (&$sre[k], &$sim[k]);
            for t in 0..TILE {
                ar[t] = $madd(x, sr[t], ar[t]);
                ai[t] = $madd(x, si[t], ai[t]);
            }
        }
        let (yi, yv) = $op.im.row($r);
        for (&k, &y) in yi.iter().zip(yv) {
            let (sr, si) = (&$sre[k], &$sim[k]);
            for t in 0..TILE {
                ar[t] = $madd(-y, si[t], ar[t]);
                ai[t] = $madd(y, sr[t], ai[t]);
            }
        }
        (ar, ai)
    }};
}

macro_rules! own_tile_body {
    ($madd:ident, $op:ident, $tile:ident, $n:ident, $c0:ident, $out:ident) => {{
        let (sre, sim) = $tile;
        let (ore, oim) = $out;
        let width = TILE.min($n - $c0);
        let bases: [usize; TILE] = std::array::from_fn(|t| packed_index(0, $c0 + t));
        for r in 0..$n {
            let (ar, ai) = gather_row!($madd, $op, r, sre, sim);
            if r < $c0 {
                for t in 0..width {
                    ore[bases[t] + r] += ar[t];
                    oim[bases[t] + r] += ai[t];
                }
            } else if r < $c0 + width {
                let tr = r - $c0;
                for t in tr..width {
                    ore[bases[t] + r] += ar[t];
                    oim[bases[t] + r] += ai[t];
                }
                let base = packed_index($c0, r);
                for t in 0..=tr {
                    ore[base + t] += ar[t];
                    oim[base + t] -= ai[t];
                }
            } else {
                let base = packed_index($c0, r);
                for t in 0..width {
                    ore[base + t] += ar[t];
                    oim[base + t] -= ai[t];
                }
            }
        }
    }};
}

macro_rules! gather_tile_body {
    ($madd:ident, $op:ident, $tile:ident, $vre:ident, $vim:ident) => {{
        let (sre, sim) = $tile;
        for r in 0..$vre.len() {
            let (ar, ai) = gather_row!($madd, $op, r, sre, sim);
            $vre[r] = ar;
            $vim[r] = ai;
        }
    }};
}

type Tile<'a> = (&'a [[f64; TILE]], &'a [[f64; TILE]]);

/// `A rho + rho A^dag` restricted to one column tile of `rho`.
fn own_tile(op: &SplitCsr, tile: Tile, n: usize, c0: usize, out: (&mut [f64], &mut [f64])) {
    own_tile_body!(unfused, op, tile, n, c0, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn own_tile_fma(op: &SplitCsr, tile: Tile, n: usize, c0: usize, out: (&mut [f64], &mut [f64])) {
    own_tile_body!(fused, op, tile, n, c0, out)
}

/// `V = C rho[:, tile]`.
fn gather_tile(op: &SplitCsr, tile: Tile, vre: &mut [[f64; TILE]], vim: &mut [[f64; TILE]]) {
    gather_tile_body!(unfused, op, tile, vre, vim)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gather_tile_fma(op: &SplitCsr, tile: Tile, vre: &mut [[f64; TILE]], vim: &mut [[f64; TILE]]) {
    gather_tile_body!(fused, op, tile, vre, vim)
}

/// `C rho C^dag += sum_m V[:, m] conj(C[:, m])^T` over the tile's columns `m`,
/// upper triangle only.
fn scatter_jump(
    jump: &Jump,
    c0: usize,
    n: usize,
    v: (&[[f64; TILE]], &[[f64; TILE]]),
    out: (&mut [f64], &mut [f64]),
) {
    let (vre, vim) = v;
    let (ore, oim) = out;
    for t in 0..TILE.min(n - c0) {
        for &(j, w) in &jump.by_column[c0 + t] {
            let base = packed_index(0, j);
            for i in 0..=j {
                let (a, b) = (vre[i][t], vim[i][t]);
                ore[base + i] += a * w.re - b * w.im;
                oim[base + i] += a * w.im + b * w.re;
            }
        }
    }
}

/// Inner loop implementation, chosen once from the running CPU.
#[derive(Clone, Copy, Debug)]
enum Kernel {
    Portable,
    #[cfg(target_arch = "x86_64")]
    Fma,
}

impl Kernel {
    fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
            return Kernel::Fma;
        }
        Kernel::Portable
    }
}
