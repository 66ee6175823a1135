//! Relational weight parameterizations and the message-passing forward
//! passes.
//!
//! A layer's per-relation weights live in one of four forms: a full
//! `(R, in, out)` tensor, a basis decomposition (shared basis matrices
//! mixed per relation), a block-diagonal decomposition (with a full
//! matrix for the self-loop relation), or a plain diagonal. All of them
//! materialize to the same explicit tensor, and the three forward
//! branches (featureless, horizontally stacked, vertically stacked)
//! compute the same function; the reshape convention is row-major with
//! the relation as the outermost axis, matching the adjacency block
//! layout.

use crate::error::{Result, RgcnError};
use crate::graph::StackMode;
use crate::sparse::{
    contract_ni_rio_rno, contract_rio_rni_no, spmm, DenseMatrix, DenseTensor3, SparseMatrix,
};

/// Per-relation weights under one of the four parameterizations.
#[derive(Debug, Clone)]
pub enum RelationalWeights {
    /// Explicit `(R, in, out)` tensor.
    Full { weights: DenseTensor3 },
    /// `W_r = sum_b comps[r,b] * bases[b]` with `bases: (B, in, out)`,
    /// `comps: (R, B)`.
    Basis {
        bases: DenseTensor3,
        comps: DenseMatrix,
    },
    /// `num_blocks` diagonal blocks per non-self relation, stored as
    /// `((R-1) * B, in/B, out/B)` with flat index `r * B + b`; the last
    /// relation (the self-loop) carries a full `(in, out)` matrix.
    Block {
        blocks: DenseTensor3,
        self_loop: DenseMatrix,
        num_blocks: usize,
    },
    /// `W_r = diag(w[r])`, requiring `in == out`.
    Diagonal { diag: DenseMatrix },
}

impl RelationalWeights {
    pub fn relations(&self) -> usize {
        match self {
            RelationalWeights::Full { weights } => weights.dims().0,
            RelationalWeights::Basis { comps, .. } => comps.rows(),
            RelationalWeights::Block {
                blocks, num_blocks, ..
            } => blocks.dims().0 / num_blocks + 1,
            RelationalWeights::Diagonal { diag } => diag.rows(),
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            RelationalWeights::Full { weights } => weights.dims().1,
            RelationalWeights::Basis { bases, .. } => bases.dims().1,
            RelationalWeights::Block {
                blocks, num_blocks, ..
            } => blocks.dims().1 * num_blocks,
            RelationalWeights::Diagonal { diag } => diag.cols(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            RelationalWeights::Full { weights } => weights.dims().2,
            RelationalWeights::Basis { bases, .. } => bases.dims().2,
            RelationalWeights::Block {
                blocks, num_blocks, ..
            } => blocks.dims().2 * num_blocks,
            RelationalWeights::Diagonal { diag } => diag.cols(),
        }
    }

    /// Number of stored (trainable) values.
    pub fn param_count(&self) -> usize {
        match self {
            RelationalWeights::Full { weights } => {
                let (r, i, o) = weights.dims();
                r * i * o
            }
            RelationalWeights::Basis { bases, comps } => {
                let (b, i, o) = bases.dims();
                b * i * o + comps.rows() * comps.cols()
            }
            RelationalWeights::Block { blocks, self_loop, .. } => {
                let (rb, bi, bo) = blocks.dims();
                rb * bi * bo + self_loop.rows() * self_loop.cols()
            }
            RelationalWeights::Diagonal { diag } => diag.rows() * diag.cols(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RelationalWeights::Full { .. } => Ok(()),
            RelationalWeights::Basis { bases, comps } => {
                if comps.cols() != bases.dims().0 {
                    return Err(RgcnError::Config(format!(
                        "basis count mismatch: comps has {} columns, {} bases stored",
                        comps.cols(),
                        bases.dims().0
                    )));
                }
                Ok(())
            }
            RelationalWeights::Block {
                blocks, self_loop, num_blocks,
            } => {
                let (rb, bi, bo) = blocks.dims();
                if *num_blocks == 0 || rb % num_blocks != 0 {
                    return Err(RgcnError::Config(format!(
                        "block tensor dim0 {rb} not divisible by block count {num_blocks}"
                    )));
                }
                if self_loop.rows() != bi * num_blocks || self_loop.cols() != bo * num_blocks {
                    return Err(RgcnError::Config(format!(
                        "self-loop matrix is {}x{}, blocks assemble to {}x{}",
                        self_loop.rows(),
                        self_loop.cols(),
                        bi * num_blocks,
                        bo * num_blocks
                    )));
                }
                Ok(())
            }
            RelationalWeights::Diagonal { .. } => Ok(()),
        }
    }

    /// Expands to the explicit `(R, in, out)` weight tensor.
    pub fn materialize(&self) -> Result<DenseTensor3> {
        self.validate()?;
        match self {
            RelationalWeights::Full { weights } => Ok(weights.clone()),
            RelationalWeights::Basis { bases, comps } => {
                let (b_count, i, o) = bases.dims();
                let r_count = comps.rows();
                let mut out = DenseTensor3::zeros(r_count, i, o);
                for r in 0..r_count {
                    let out_slice = out.slice_mut(r);
                    for b in 0..b_count {
                        let c = comps.get(r, b);
                        if c == 0.0 {
                            continue;
                        }
                        for (ov, &bv) in out_slice.iter_mut().zip(bases.slice(b).iter()) {
                            *ov += c * bv;
                        }
                    }
                }
                Ok(out)
            }
            RelationalWeights::Block {
                blocks, self_loop, num_blocks,
            } => {
                let (rb, bi, bo) = blocks.dims();
                let rel_nonself = rb / num_blocks;
                let (in_dim, out_dim) = (bi * num_blocks, bo * num_blocks);
                let mut out = DenseTensor3::zeros(rel_nonself + 1, in_dim, out_dim);
                for r in 0..rel_nonself {
                    for b in 0..*num_blocks {
                        let block = blocks.slice(r * num_blocks + b);
                        for bi_row in 0..bi {
                            for bo_col in 0..bo {
                                out.set(
                                    r,
                                    b * bi + bi_row,
                                    b * bo + bo_col,
                                    block[bi_row * bo + bo_col],
                                );
                            }
                        }
                    }
                }
                let self_slice = out.slice_mut(rel_nonself);
                self_slice.copy_from_slice(self_loop.data());
                Ok(out)
            }
            RelationalWeights::Diagonal { diag } => {
                let (r_count, d) = (diag.rows(), diag.cols());
                let mut out = DenseTensor3::zeros(r_count, d, d);
                for r in 0..r_count {
                    for i in 0..d {
                        out.set(r, i, i, diag.get(r, i));
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Activation applied after the bias add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    SoftmaxRows,
    Identity,
}

/// How relation contributions are combined. The paper sums; the mean is
/// exposed for deeper stacks where summed activations grow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelationAggregation {
    #[default]
    Sum,
    Mean,
}

/// Static description of one message-passing layer.
#[derive(Debug, Clone)]
pub struct LayerConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub relations: usize,
    pub activation: Activation,
    pub bias: bool,
    pub featureless: bool,
    pub stacking: StackMode,
    pub aggregation: RelationAggregation,
}

impl LayerConfig {
    pub fn new(in_dim: usize, out_dim: usize, relations: usize) -> Self {
        LayerConfig {
            in_dim,
            out_dim,
            relations,
            activation: Activation::Identity,
            bias: false,
            featureless: false,
            stacking: StackMode::Vertical,
            aggregation: RelationAggregation::Sum,
        }
    }
}

pub fn relu_in_place(data: &mut [f64]) {
    for v in data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Numerically safe row softmax (max subtraction).
pub fn softmax_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn apply_activation(mut m: DenseMatrix, activation: Activation) -> DenseMatrix {
    match activation {
        Activation::Identity => m,
        Activation::Relu => {
            relu_in_place(m.data_mut());
            m
        }
        Activation::SoftmaxRows => softmax_rows(&m),
    }
}

fn add_bias(m: &mut DenseMatrix, bias: &DenseMatrix) -> Result<()> {
    if bias.rows() != 1 || bias.cols() != m.cols() {
        return Err(RgcnError::dimension(format!(
            "bias is {}x{}, output has {} columns",
            bias.rows(),
            bias.cols(),
            m.cols()
        )));
    }
    let b = bias.row(0);
    for r in 0..m.rows() {
        for (v, &bv) in m.row_mut(r).iter_mut().zip(b.iter()) {
            *v += bv;
        }
    }
    Ok(())
}

fn scale_in_place(m: &mut DenseMatrix, factor: f64) {
    for v in m.data_mut() {
        *v *= factor;
    }
}

/// One relational graph convolution. Exactly one of the three branches
/// runs, selected by `cfg.featureless` and `cfg.stacking`:
///
/// * featureless: `H = act(A_h . reshape(W))` where the one-hot input is
///   never materialized;
/// * horizontal: `XW = contract(ni,rio->rno)` reshaped to `(R*N, out)`
///   then multiplied by `A_h`;
/// * vertical: `AX = A_v . X` reshaped to `(R, N, in)` then contracted
///   with `W` via `rio,rni->no`.
pub fn rgcn_forward(
    cfg: &LayerConfig,
    adjacency: &SparseMatrix,
    features: Option<&DenseMatrix>,
    weights: &RelationalWeights,
    bias: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    weights.validate()?;
    if cfg.relations != weights.relations() {
        return Err(RgcnError::dimension(format!(
            "layer expects {} relations, weights carry {}",
            cfg.relations,
            weights.relations()
        )));
    }
    let w = weights.materialize()?;
    let mut out = rgcn_forward_materialized(cfg, adjacency, features, &w)?;
    if let RelationAggregation::Mean = cfg.aggregation {
        scale_in_place(&mut out, 1.0 / cfg.relations as f64);
    }
    if cfg.bias {
        let bias = bias.ok_or_else(|| {
            RgcnError::Config("layer configured with bias but none provided".into())
        })?;
        add_bias(&mut out, bias)?;
    }
    Ok(apply_activation(out, cfg.activation))
}

fn rgcn_forward_materialized(
    cfg: &LayerConfig,
    adjacency: &SparseMatrix,
    features: Option<&DenseMatrix>,
    w: &DenseTensor3,
) -> Result<DenseMatrix> {
    let relations = cfg.relations;
    if cfg.featureless {
        if features.is_some() {
            return Err(RgcnError::Config(
                "featureless layer must not receive features".into(),
            ));
        }
        if cfg.stacking != StackMode::Horizontal {
            return Err(RgcnError::dimension(
                "featureless branch: adjacency must be horizontally stacked",
            ));
        }
        let n = adjacency.rows();
        if adjacency.cols() != relations * cfg.in_dim || cfg.in_dim != n {
            return Err(RgcnError::dimension(format!(
                "featureless branch: adjacency {}x{} incompatible with {} relations of {} nodes",
                adjacency.rows(),
                adjacency.cols(),
                relations,
                cfg.in_dim
            )));
        }
        let w_mat = w.clone().into_matrix();
        return spmm(adjacency, &w_mat);
    }

    let x = features.ok_or_else(|| {
        RgcnError::Config("non-featureless layer requires a feature matrix".into())
    })?;
    let n = x.rows();
    if x.cols() != cfg.in_dim {
        return Err(RgcnError::dimension(format!(
            "features are {}x{}, layer expects input dim {}",
            n,
            x.cols(),
            cfg.in_dim
        )));
    }
    match cfg.stacking {
        StackMode::Horizontal => {
            if adjacency.rows() != n || adjacency.cols() != relations * n {
                return Err(RgcnError::dimension(format!(
                    "horizontal branch: adjacency {}x{} incompatible with {} relations of {} nodes",
                    adjacency.rows(),
                    adjacency.cols(),
                    relations,
                    n
                )));
            }
            let xw = contract_ni_rio_rno(x, w)?;
            spmm(adjacency, &xw.into_matrix())
        }
        StackMode::Vertical => {
            if adjacency.rows() != relations * n || adjacency.cols() != n {
                return Err(RgcnError::dimension(format!(
                    "vertical branch: adjacency {}x{} incompatible with {} relations of {} nodes",
                    adjacency.rows(),
                    adjacency.cols(),
                    relations,
                    n
                )));
            }
            let ax = spmm(adjacency, x)?;
            let ax = DenseTensor3::from_matrix(ax, relations, n)?;
            contract_rio_rni_no(w, &ax)
        }
    }
}

/// Diagonal-weight message passing, `h = act(sum_r A_r E diag(w_r))`,
/// computed edge-by-edge on the vertically stacked adjacency in
/// `O(nnz * D)` without ever building a `D x D` matrix.
pub fn ergcn_forward(
    adjacency: &SparseMatrix,
    embeddings: &DenseMatrix,
    diag: &DenseMatrix,
    activation: Activation,
) -> Result<DenseMatrix> {
    let n = embeddings.rows();
    let d = embeddings.cols();
    let relations = diag.rows();
    if diag.cols() != d {
        return Err(RgcnError::dimension(format!(
            "diagonal weights have {} columns, embeddings have {}",
            diag.cols(),
            d
        )));
    }
    if adjacency.rows() != relations * n || adjacency.cols() != n {
        return Err(RgcnError::dimension(format!(
            "ergcn: adjacency {}x{} is not a vertical stack of {} relations over {} nodes",
            adjacency.rows(),
            adjacency.cols(),
            relations,
            n
        )));
    }
    let mut out = DenseMatrix::zeros(n, d);
    for (row, col, v) in adjacency.entries() {
        let rel = row / n;
        let node = row % n;
        let e_row = embeddings.row(col);
        let w_row = diag.row(rel);
        let o_row = out.row_mut(node);
        for ((o, &e), &w) in o_row.iter_mut().zip(e_row.iter()).zip(w_row.iter()) {
            *o += v * e * w;
        }
    }
    Ok(apply_activation(out, activation))
}

/// Affine map `x . w + b` applied row-wise.
#[derive(Debug, Clone)]
pub struct Affine {
    pub weight: DenseMatrix,
    pub bias: DenseMatrix,
}

impl Affine {
    pub fn new(weight: DenseMatrix, bias: DenseMatrix) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weight.cols() {
            return Err(RgcnError::dimension(format!(
                "affine bias is {}x{}, weight maps to {}",
                bias.rows(),
                bias.cols(),
                weight.cols()
            )));
        }
        Ok(Affine { weight, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Affine {
            weight: DenseMatrix::zeros(in_dim, out_dim),
            bias: DenseMatrix::zeros(1, out_dim),
        }
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = x.matmul(&self.weight)?;
        add_bias(&mut out, &self.bias)?;
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.cols()
    }
}

/// Bottleneck encoder: compress with `f`, run two message passes over the
/// compressed dimension, expand with `g`, and add the raw embeddings back:
/// `H1 = act(pass(A, f(E)))`, `H2 = E + g(act(pass(A, H1)))`.
pub fn crgcn_forward(
    adjacency: &SparseMatrix,
    embeddings: &DenseMatrix,
    compress: &Affine,
    layer1: &RelationalWeights,
    layer2: &RelationalWeights,
    expand: &Affine,
    stacking: StackMode,
) -> Result<DenseMatrix> {
    let d = embeddings.cols();
    let c = compress.weight.cols();
    if compress.weight.rows() != d {
        return Err(RgcnError::dimension(format!(
            "compression maps {} dims, embeddings have {}",
            compress.weight.rows(),
            d
        )));
    }
    if c >= d {
        return Err(RgcnError::Config(format!(
            "bottleneck must compress: {c} >= {d}"
        )));
    }
    if expand.weight.rows() != c || expand.weight.cols() != d {
        return Err(RgcnError::dimension(format!(
            "expansion is {}x{}, expected {}x{}",
            expand.weight.rows(),
            expand.weight.cols(),
            c,
            d
        )));
    }
    let relations = layer1.relations();
    let mut cfg = LayerConfig::new(c, c, relations);
    cfg.stacking = stacking;
    cfg.activation = Activation::Relu;

    let compressed = compress.apply(embeddings)?;
    let h1 = rgcn_forward(&cfg, adjacency, Some(&compressed), layer1, None)?;
    let h2 = rgcn_forward(&cfg, adjacency, Some(&h1), layer2, None)?;
    let expanded = expand.apply(&h2)?;
    let mut out = embeddings.clone();
    for (o, &e) in out.data_mut().iter_mut().zip(expanded.data().iter()) {
        *o += e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{augment, build_adjacency, KnowledgeGraph, Triple};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut StdRng, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn random_tensor(rng: &mut StdRng, d0: usize, d1: usize, d2: usize) -> DenseTensor3 {
        DenseTensor3::from_vec(
            d0,
            d1,
            d2,
            (0..d0 * d1 * d2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn random_kg(rng: &mut StdRng, n: usize, r: usize, edges: usize) -> KnowledgeGraph {
        let triples = (0..edges)
            .map(|_| {
                Triple::new(
                    rng.random_range(0..n),
                    rng.random_range(0..r),
                    rng.random_range(0..n),
                )
            })
            .collect();
        KnowledgeGraph::new(n, r, triples).unwrap()
    }

    /// Naive oracle: sum_r A_r X W_r on dense per-relation blocks.
    fn naive_dense_forward(
        a_v: &SparseMatrix,
        n: usize,
        x: &DenseMatrix,
        w: &DenseTensor3,
    ) -> DenseMatrix {
        let (relations, _, out_dim) = w.dims();
        let dense = a_v.to_dense();
        let mut out = DenseMatrix::zeros(n, out_dim);
        for r in 0..relations {
            let mut a_r = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a_r.set(i, j, dense.get(r * n + i, j));
                }
            }
            let w_r = DenseMatrix::from_vec(w.dims().1, out_dim, w.slice(r).to_vec()).unwrap();
            let prod = a_r.matmul(x).unwrap().matmul(&w_r).unwrap();
            for (o, &p) in out.data_mut().iter_mut().zip(prod.data().iter()) {
                *o += p;
            }
        }
        out
    }

    #[test]
    fn basis_identity_mixture_reproduces_bases() {
        let mut rng = StdRng::seed_from_u64(1);
        let r = 4;
        let bases = random_tensor(&mut rng, r, 3, 2);
        let comps = DenseMatrix::identity(r);
        let w = RelationalWeights::Basis {
            bases: bases.clone(),
            comps,
        };
        let materialized = w.materialize().unwrap();
        assert_eq!(materialized, bases);
    }

    #[test]
    fn block_single_block_is_dense() {
        let mut rng = StdRng::seed_from_u64(2);
        let blocks = random_tensor(&mut rng, 2, 3, 3); // 2 relations, B = 1
        let self_loop = random_matrix(&mut rng, 3, 3);
        let w = RelationalWeights::Block {
            blocks: blocks.clone(),
            self_loop: self_loop.clone(),
            num_blocks: 1,
        };
        let m = w.materialize().unwrap();
        assert_eq!(m.dims(), (3, 3, 3));
        assert_eq!(m.slice(0), blocks.slice(0));
        assert_eq!(m.slice(1), blocks.slice(1));
        assert_eq!(m.slice(2), self_loop.data());
    }

    #[test]
    fn block_off_diagonal_quadrants_are_zero() {
        let mut rng = StdRng::seed_from_u64(3);
        let blocks = random_tensor(&mut rng, 2, 2, 2); // 1 relation, B = 2, blocks 2x2
        let self_loop = random_matrix(&mut rng, 4, 4);
        let w = RelationalWeights::Block {
            blocks,
            self_loop,
            num_blocks: 2,
        };
        let m = w.materialize().unwrap();
        assert_eq!(m.dims(), (2, 4, 4));
        for i in 0..4 {
            for j in 0..4 {
                if (i < 2) != (j < 2) {
                    assert_eq!(m.get(0, i, j), 0.0, "off-diagonal ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn diagonal_equals_one_by_one_blocks() {
        let mut rng = StdRng::seed_from_u64(4);
        let r = 3;
        let d = 4;
        let diag = random_matrix(&mut rng, r, d);
        // 1x1 blocks: relation r's blocks along the diagonal, last relation full
        let mut blocks = DenseTensor3::zeros((r - 1) * d, 1, 1);
        for rel in 0..r - 1 {
            for b in 0..d {
                blocks.slice_mut(rel * d + b)[0] = diag.get(rel, b);
            }
        }
        let mut self_loop = DenseMatrix::zeros(d, d);
        for b in 0..d {
            self_loop.set(b, b, diag.get(r - 1, b));
        }
        let from_blocks = RelationalWeights::Block {
            blocks,
            self_loop,
            num_blocks: d,
        }
        .materialize()
        .unwrap();
        let from_diag = RelationalWeights::Diagonal { diag }.materialize().unwrap();
        assert!(from_blocks.max_abs_diff(&from_diag) < 1e-15);
    }

    #[test]
    fn parameter_count_formulas() {
        let (r, i, o, b) = (5usize, 8usize, 6usize, 2usize);
        let full = RelationalWeights::Full {
            weights: DenseTensor3::zeros(r, i, o),
        };
        assert_eq!(full.param_count(), r * i * o);
        let basis = RelationalWeights::Basis {
            bases: DenseTensor3::zeros(b, i, o),
            comps: DenseMatrix::zeros(r, b),
        };
        assert_eq!(basis.param_count(), b * i * o + r * b);
        let block = RelationalWeights::Block {
            blocks: DenseTensor3::zeros((r - 1) * b, i / b, o / b),
            self_loop: DenseMatrix::zeros(i, o),
            num_blocks: b,
        };
        assert_eq!(
            block.param_count(),
            (r - 1) * b * (i / b) * (o / b) + i * o
        );
    }

    #[test]
    fn all_three_branches_agree_with_naive_oracle() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let (n, r_base, in_dim, out_dim) = (5, 2, 3, 2);
            let g = random_kg(&mut rng, n, r_base, 8);
            let ag = augment(&g);
            let relations = ag.total_relations();
            let a_v =
                build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
                    .unwrap();
            let a_h =
                build_adjacency(&ag, StackMode::Horizontal, None, &mut StdRng::seed_from_u64(0))
                    .unwrap();
            let x = random_matrix(&mut rng, n, in_dim);
            let w = RelationalWeights::Full {
                weights: random_tensor(&mut rng, relations, in_dim, out_dim),
            };

            let mut cfg_v = LayerConfig::new(in_dim, out_dim, relations);
            cfg_v.stacking = StackMode::Vertical;
            let mut cfg_h = cfg_v.clone();
            cfg_h.stacking = StackMode::Horizontal;

            let out_v = rgcn_forward(&cfg_v, &a_v, Some(&x), &w, None).unwrap();
            let out_h = rgcn_forward(&cfg_h, &a_h, Some(&x), &w, None).unwrap();
            let naive = naive_dense_forward(&a_v, n, &x, &w.materialize().unwrap());

            assert!(out_v.max_abs_diff(&out_h) < 1e-9);
            assert!(out_v.max_abs_diff(&naive) < 1e-9);
        }
    }

    #[test]
    fn featureless_branch_equals_identity_features() {
        let mut rng = StdRng::seed_from_u64(6);
        let (n, r_base, out_dim) = (5, 2, 3);
        let g = random_kg(&mut rng, n, r_base, 7);
        let ag = augment(&g);
        let relations = ag.total_relations();
        let a_h = build_adjacency(&ag, StackMode::Horizontal, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let w = RelationalWeights::Full {
            weights: random_tensor(&mut rng, relations, n, out_dim),
        };

        let mut cfg_fl = LayerConfig::new(n, out_dim, relations);
        cfg_fl.featureless = true;
        cfg_fl.stacking = StackMode::Horizontal;
        let out_fl = rgcn_forward(&cfg_fl, &a_h, None, &w, None).unwrap();

        let mut cfg_h = LayerConfig::new(n, out_dim, relations);
        cfg_h.stacking = StackMode::Horizontal;
        let ident = DenseMatrix::identity(n);
        let out_ident = rgcn_forward(&cfg_h, &a_h, Some(&ident), &w, None).unwrap();
        assert!(out_fl.max_abs_diff(&out_ident) < 1e-12);
    }

    #[test]
    fn zero_weights_relu_gives_zero_output() {
        let g = KnowledgeGraph::new(3, 1, vec![Triple::new(0, 0, 1), Triple::new(1, 0, 2)]).unwrap();
        let ag = augment(&g);
        let a_v = build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let w = RelationalWeights::Full {
            weights: DenseTensor3::zeros(3, 2, 2),
        };
        let mut cfg = LayerConfig::new(2, 2, 3);
        cfg.activation = Activation::Relu;
        let x = DenseMatrix::from_vec(3, 2, vec![1.0; 6]).unwrap();
        let out = rgcn_forward(&cfg, &a_v, Some(&x), &w, None).unwrap();
        assert_eq!(out, DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn single_self_loop_node_passes_through_self_weight() {
        let g = KnowledgeGraph::new(1, 0, vec![]).unwrap();
        let ag = augment(&g);
        let a_v = build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let w_self = random_matrix(&mut rng, 2, 2);
        let w = RelationalWeights::Full {
            weights: DenseTensor3::from_vec(1, 2, 2, w_self.data().to_vec()).unwrap(),
        };
        let x = random_matrix(&mut rng, 1, 2);
        let cfg = LayerConfig::new(2, 2, 1);
        let out = rgcn_forward(&cfg, &a_v, Some(&x), &w, None).unwrap();
        let want = x.matmul(&w_self).unwrap();
        assert!(out.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn shape_mismatch_error_names_the_branch() {
        let a = SparseMatrix::empty(4, 4);
        let w = RelationalWeights::Full {
            weights: DenseTensor3::zeros(3, 2, 2),
        };
        let cfg = LayerConfig::new(2, 2, 3);
        let x = DenseMatrix::zeros(4, 2);
        let err = rgcn_forward(&cfg, &a, Some(&x), &w, None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("vertical"), "{err}");
    }

    #[test]
    fn ergcn_all_ones_reduces_to_neighborhood_sum() {
        let mut rng = StdRng::seed_from_u64(8);
        let g = random_kg(&mut rng, 6, 2, 10);
        let ag = augment(&g);
        let relations = ag.total_relations();
        let a_v = build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let e = random_matrix(&mut rng, 6, 4);
        let ones = DenseMatrix::from_vec(relations, 4, vec![1.0; relations * 4]).unwrap();
        let got = ergcn_forward(&a_v, &e, &ones, Activation::Identity).unwrap();
        // oracle: sum_r A_r E, i.e. collapse relation blocks of A_v * E
        let ax = spmm(&a_v, &e).unwrap();
        let mut want = DenseMatrix::zeros(6, 4);
        for r in 0..relations {
            for node in 0..6 {
                for dd in 0..4 {
                    let v = want.get(node, dd) + ax.get(r * 6 + node, dd);
                    want.set(node, dd, v);
                }
            }
        }
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn ergcn_matches_materialized_diagonal_forward() {
        let mut rng = StdRng::seed_from_u64(9);
        let g = random_kg(&mut rng, 7, 3, 12);
        let ag = augment(&g);
        let relations = ag.total_relations();
        let a_v = build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let d = 5;
        let e = random_matrix(&mut rng, 7, d);
        let diag = random_matrix(&mut rng, relations, d);
        let fused = ergcn_forward(&a_v, &e, &diag, Activation::Identity).unwrap();

        let w = RelationalWeights::Diagonal { diag };
        let cfg = LayerConfig::new(d, d, relations);
        let generic = rgcn_forward(&cfg, &a_v, Some(&e), &w, None).unwrap();
        assert!(fused.max_abs_diff(&generic) < 1e-12);
    }

    #[test]
    fn ergcn_single_relation_identity_embeddings_scales_adjacency_rows() {
        let g = KnowledgeGraph::new(3, 0, vec![]).unwrap(); // self-loops only
        let ag = augment(&g);
        let a_v = build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let e = DenseMatrix::identity(3);
        let diag = DenseMatrix::from_vec(1, 3, vec![2.0, 3.0, 4.0]).unwrap();
        let out = ergcn_forward(&a_v, &e, &diag, Activation::Identity).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { diag.get(0, i) } else { 0.0 };
                assert_eq!(out.get(i, j), want);
            }
        }
    }

    #[test]
    fn crgcn_zero_encoder_reproduces_embeddings_exactly() {
        let mut rng = StdRng::seed_from_u64(10);
        let g = random_kg(&mut rng, 6, 2, 9);
        let ag = augment(&g);
        let relations = ag.total_relations();
        let a_v = build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let (d, c) = (8, 3);
        let e = random_matrix(&mut rng, 6, d);
        let compress = Affine::new(random_matrix(&mut rng, d, c), DenseMatrix::zeros(1, c)).unwrap();
        let zero_w = RelationalWeights::Full {
            weights: DenseTensor3::zeros(relations, c, c),
        };
        let expand = Affine::zeros(c, d);
        let out = crgcn_forward(
            &a_v,
            &e,
            &compress,
            &zero_w,
            &zero_w.clone(),
            &expand,
            StackMode::Vertical,
        )
        .unwrap();
        assert_eq!(out, e);
    }

    #[test]
    fn crgcn_single_node_matches_hand_expansion() {
        let mut rng = StdRng::seed_from_u64(11);
        let g = KnowledgeGraph::new(1, 0, vec![]).unwrap();
        let ag = augment(&g);
        let a_v = build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let (d, c) = (3, 2);
        let e = random_matrix(&mut rng, 1, d);
        let f = Affine::new(random_matrix(&mut rng, d, c), random_matrix(&mut rng, 1, c)).unwrap();
        let w1 = random_matrix(&mut rng, c, c);
        let w2 = random_matrix(&mut rng, c, c);
        let l1 = RelationalWeights::Full {
            weights: DenseTensor3::from_vec(1, c, c, w1.data().to_vec()).unwrap(),
        };
        let l2 = RelationalWeights::Full {
            weights: DenseTensor3::from_vec(1, c, c, w2.data().to_vec()).unwrap(),
        };
        let gmap = Affine::new(random_matrix(&mut rng, c, d), random_matrix(&mut rng, 1, d)).unwrap();
        let got = crgcn_forward(&a_v, &e, &f, &l1, &l2, &gmap, StackMode::Vertical).unwrap();

        // hand expansion: h2 = e + g(relu(relu(f(e) w1) w2))
        let mut h1 = f.apply(&e).unwrap().matmul(&w1).unwrap();
        relu_in_place(h1.data_mut());
        let mut h2 = h1.matmul(&w2).unwrap();
        relu_in_place(h2.data_mut());
        let mut want = e.clone();
        for (o, &v) in want.data_mut().iter_mut().zip(gmap.apply(&h2).unwrap().data()) {
            *o += v;
        }
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn crgcn_rejects_non_compressing_bottleneck() {
        let g = KnowledgeGraph::new(2, 1, vec![Triple::new(0, 0, 1)]).unwrap();
        let ag = augment(&g);
        let a_v = build_adjacency(&ag, StackMode::Vertical, None, &mut StdRng::seed_from_u64(0))
            .unwrap();
        let e = DenseMatrix::zeros(2, 3);
        let f = Affine::zeros(3, 3);
        let w = RelationalWeights::Full {
            weights: DenseTensor3::zeros(3, 3, 3),
        };
        let gmap = Affine::zeros(3, 3);
        assert!(crgcn_forward(&a_v, &e, &f, &w, &w.clone(), &gmap, StackMode::Vertical).is_err());
    }

    #[test]
    fn permutation_equivariance_of_forward_passes() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..10 {
            let (n, r_base, in_dim, out_dim) = (6, 2, 3, 3);
            let g = random_kg(&mut rng, n, r_base, 9);
            let relations = 2 * r_base + 1;
            let x = random_matrix(&mut rng, n, in_dim);
            let w = RelationalWeights::Full {
                weights: random_tensor(&mut rng, relations, in_dim, out_dim),
            };

            // random permutation
            let mut perm: Vec<usize> = (0..n).collect();
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);

            let permuted_triples: Vec<Triple> = g
                .triples()
                .iter()
                .map(|t| Triple::new(perm[t.s], t.r, perm[t.o]))
                .collect();
            let pg = KnowledgeGraph::new(n, r_base, permuted_triples).unwrap();

            let a = build_adjacency(&augment(&g), StackMode::Vertical, None, &mut StdRng::seed_from_u64(0)).unwrap();
            let pa = build_adjacency(&augment(&pg), StackMode::Vertical, None, &mut StdRng::seed_from_u64(0)).unwrap();

            let mut px = DenseMatrix::zeros(n, in_dim);
            for i in 0..n {
                for j in 0..in_dim {
                    px.set(perm[i], j, x.get(i, j));
                }
            }

            let mut cfg = LayerConfig::new(in_dim, out_dim, relations);
            cfg.activation = Activation::Relu;
            let out = rgcn_forward(&cfg, &a, Some(&x), &w, None).unwrap();
            let pout = rgcn_forward(&cfg, &pa, Some(&px), &w, None).unwrap();
            for i in 0..n {
                for j in 0..out_dim {
                    assert!(
                        (pout.get(perm[i], j) - out.get(i, j)).abs() < 1e-9,
                        "row {i} not equivariant"
                    );
                }
            }
        }
    }
}
