//! Dense and sparse linear-algebra kernels.
//!
//! Everything message passing needs is expressed with four operations:
//! sparse-by-dense multiplication (`spmm`), a small fixed family of dense
//! tensor contractions (`dense_contract`), row normalization and block
//! stacking of per-relation adjacency matrices. All values are `f64`;
//! kernels are pure functions with a deterministic summation order
//! (entries sorted by column within each row), so repeated runs are
//! bit-identical.

use crate::error::{Result, RgcnError};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(RgcnError::dimension(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Plain dense matmul; the reference path for `spmm` oracles and small tests.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(RgcnError::dimension(format!(
                "matmul: ({}x{}) * ({}x{})",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        // ikj order keeps the inner loop contiguous on both operands.
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Contiguous rank-3 tensor, laid out row-major as `(dim0, dim1, dim2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dim0: usize,
    dim1: usize,
    dim2: usize,
    data: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(dim0: usize, dim1: usize, dim2: usize) -> Self {
        DenseTensor3 {
            dim0,
            dim1,
            dim2,
            data: vec![0.0; dim0 * dim1 * dim2],
        }
    }

    pub fn from_vec(dim0: usize, dim1: usize, dim2: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim0 * dim1 * dim2 {
            return Err(RgcnError::dimension(format!(
                "tensor data length {} does not match {}x{}x{}",
                data.len(),
                dim0,
                dim1,
                dim2
            )));
        }
        Ok(DenseTensor3 {
            dim0,
            dim1,
            dim2,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dim0, self.dim1, self.dim2)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim1 + b) * self.dim2 + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.dim1 + b) * self.dim2 + c] = v;
    }

    /// Slice covering `[a, :, :]` as a contiguous `(dim1 x dim2)` block.
    #[inline]
    pub fn slice(&self, a: usize) -> &[f64] {
        let n = self.dim1 * self.dim2;
        &self.data[a * n..(a + 1) * n]
    }

    #[inline]
    pub fn slice_mut(&mut self, a: usize) -> &mut [f64] {
        let n = self.dim1 * self.dim2;
        &mut self.data[a * n..(a + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Reinterprets `(d0, d1, d2)` as a `(d0*d1, d2)` matrix. The layouts
    /// coincide, so this is a move, not a shuffle.
    pub fn into_matrix(self) -> DenseMatrix {
        DenseMatrix {
            rows: self.dim0 * self.dim1,
            cols: self.dim2,
            data: self.data,
        }
    }

    /// Inverse of [`DenseTensor3::into_matrix`].
    pub fn from_matrix(m: DenseMatrix, dim0: usize, dim1: usize) -> Result<Self> {
        if m.rows != dim0 * dim1 {
            return Err(RgcnError::dimension(format!(
                "cannot reshape {} rows into {}x{}",
                m.rows, dim0, dim1
            )));
        }
        Ok(DenseTensor3 {
            dim0,
            dim1,
            dim2: m.cols,
            data: m.data,
        })
    }

    pub fn max_abs_diff(&self, other: &DenseTensor3) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Sparse matrix stored as sorted COO entries with a CSR-style row index.
///
/// Construction sums duplicate `(row, col)` coordinates once and then
/// freezes the pattern; `spmm` walks rows in column order so reductions
/// are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from COO entries; duplicates are summed, indices checked.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut coo: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in entries {
            if r >= rows || c >= cols {
                return Err(RgcnError::dimension(format!(
                    "entry ({r}, {c}) out of bounds for {rows}x{cols} sparse matrix"
                )));
            }
            coo.push((r, c, v));
        }
        coo.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        // merge duplicates in the sorted stream
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(coo.len());
        for (r, c, v) in coo {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }

        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let (col_idx, values): (Vec<usize>, Vec<f64>) =
            merged.into_iter().map(|(_, c, v)| (c, v)).unzip();
        Ok(SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix::from_entries(n, n, (0..n).map(|i| (i, i, 1.0))).expect("identity")
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        SparseMatrix::from_entries(rows, cols, std::iter::empty()).expect("empty")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries in (row, col) sorted order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.entries() {
            out.data[r * self.cols + c] += v;
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix::from_entries(self.cols, self.rows, self.entries().map(|(r, c, v)| (c, r, v)))
            .expect("transpose preserves bounds")
    }
}

/// Sparse-by-dense product `S * D`.
pub fn spmm(s: &SparseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    if s.cols != d.rows {
        return Err(RgcnError::dimension(format!(
            "spmm: sparse ({}x{}) incompatible with dense ({}x{})",
            s.rows, s.cols, d.rows, d.cols
        )));
    }
    let mut out = DenseMatrix::zeros(s.rows, d.cols);
    let w = d.cols;
    for r in 0..s.rows {
        let out_row = &mut out.data[r * w..(r + 1) * w];
        for k in s.row_ptr[r]..s.row_ptr[r + 1] {
            let v = s.values[k];
            let d_row = &d.data[s.col_idx[k] * w..(s.col_idx[k] + 1) * w];
            for (o, &x) in out_row.iter_mut().zip(d_row.iter()) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

/// `S^T * D` without materializing the transpose; rows of `S` are walked in
/// order, so the scatter order (and therefore the float reduction) is fixed.
pub fn spmm_t(s: &SparseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    if s.rows != d.rows {
        return Err(RgcnError::dimension(format!(
            "spmm_t: sparse ({}x{})^T incompatible with dense ({}x{})",
            s.rows, s.cols, d.rows, d.cols
        )));
    }
    let mut out = DenseMatrix::zeros(s.cols, d.cols);
    let w = d.cols;
    for r in 0..s.rows {
        let d_row = &d.data[r * w..(r + 1) * w];
        for k in s.row_ptr[r]..s.row_ptr[r + 1] {
            let v = s.values[k];
            let out_row = &mut out.data[s.col_idx[k] * w..(s.col_idx[k] + 1) * w];
            for (o, &x) in out_row.iter_mut().zip(d_row.iter()) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

/// The contractions message passing needs, by their einsum-style descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contraction {
    /// `ni,io->no`: plain matrix product.
    NiIoNo,
    /// `ni,rio->rno`: per-relation feature transform.
    NiRioRno,
    /// `rio,rni->no`: relation-summed transform of stacked messages.
    RioRniNo,
}

impl Contraction {
    pub fn parse(descriptor: &str) -> Result<Self> {
        let normalized: String = descriptor
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .replace("→", "->");
        match normalized.as_str() {
            "ni,io->no" => Ok(Contraction::NiIoNo),
            "ni,rio->rno" => Ok(Contraction::NiRioRno),
            "rio,rni->no" => Ok(Contraction::RioRniNo),
            _ => Err(RgcnError::UnsupportedContraction(descriptor.to_string())),
        }
    }
}

/// Operand/result wrapper for [`dense_contract`].
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Matrix(DenseMatrix),
    Tensor3(DenseTensor3),
}

impl Tensor {
    pub fn as_matrix(&self) -> Result<&DenseMatrix> {
        match self {
            Tensor::Matrix(m) => Ok(m),
            Tensor::Tensor3(_) => Err(RgcnError::dimension("expected a matrix operand")),
        }
    }

    pub fn as_tensor3(&self) -> Result<&DenseTensor3> {
        match self {
            Tensor::Tensor3(t) => Ok(t),
            Tensor::Matrix(_) => Err(RgcnError::dimension("expected a rank-3 operand")),
        }
    }
}

/// Dispatches one of the three supported contractions on boxed operands.
pub fn dense_contract(descriptor: &str, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    match Contraction::parse(descriptor)? {
        Contraction::NiIoNo => Ok(Tensor::Matrix(a.as_matrix()?.matmul(b.as_matrix()?)?)),
        Contraction::NiRioRno => Ok(Tensor::Tensor3(contract_ni_rio_rno(
            a.as_matrix()?,
            b.as_tensor3()?,
        )?)),
        Contraction::RioRniNo => Ok(Tensor::Matrix(contract_rio_rni_no(
            a.as_tensor3()?,
            b.as_tensor3()?,
        )?)),
    }
}

/// `out[r,n,o] = sum_i x[n,i] * w[r,i,o]`.
pub fn contract_ni_rio_rno(x: &DenseMatrix, w: &DenseTensor3) -> Result<DenseTensor3> {
    let (rel, w_in, w_out) = w.dims();
    if x.cols != w_in {
        return Err(RgcnError::dimension(format!(
            "ni,rio->rno: x has {} cols, w expects {}",
            x.cols, w_in
        )));
    }
    let n = x.rows;
    let mut out = DenseTensor3::zeros(rel, n, w_out);
    for r in 0..rel {
        let w_slice = w.slice(r);
        let out_slice = out.slice_mut(r);
        for row in 0..n {
            let x_row = x.row(row);
            let o_row = &mut out_slice[row * w_out..(row + 1) * w_out];
            for (i, &xv) in x_row.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let w_row = &w_slice[i * w_out..(i + 1) * w_out];
                for (o, &wv) in o_row.iter_mut().zip(w_row.iter()) {
                    *o += xv * wv;
                }
            }
        }
    }
    Ok(out)
}

/// `out[n,o] = sum_r sum_i w[r,i,o] * ax[r,n,i]`.
pub fn contract_rio_rni_no(w: &DenseTensor3, ax: &DenseTensor3) -> Result<DenseMatrix> {
    let (rel_w, w_in, w_out) = w.dims();
    let (rel_a, n, a_in) = ax.dims();
    if rel_w != rel_a || w_in != a_in {
        return Err(RgcnError::dimension(format!(
            "rio,rni->no: w is {:?}, stacked messages are {:?}",
            w.dims(),
            ax.dims()
        )));
    }
    let mut out = DenseMatrix::zeros(n, w_out);
    for r in 0..rel_w {
        let w_slice = w.slice(r);
        let a_slice = ax.slice(r);
        for row in 0..n {
            let a_row = &a_slice[row * a_in..(row + 1) * a_in];
            let o_row = &mut out.data[row * w_out..(row + 1) * w_out];
            for (i, &av) in a_row.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let w_row = &w_slice[i * w_out..(i + 1) * w_out];
                for (o, &wv) in o_row.iter_mut().zip(w_row.iter()) {
                    *o += av * wv;
                }
            }
        }
    }
    Ok(out)
}

/// Scales every nonempty row to sum to one; empty rows stay empty.
pub fn row_normalize(s: &SparseMatrix) -> Result<SparseMatrix> {
    for (r, c, v) in s.entries() {
        if v < 0.0 {
            return Err(RgcnError::Domain(format!(
                "row_normalize: negative entry {v} at ({r}, {c})"
            )));
        }
    }
    let mut out = s.clone();
    for r in 0..out.rows {
        let span = out.row_ptr[r]..out.row_ptr[r + 1];
        let sum: f64 = out.values[span.clone()].iter().sum();
        // rows already within the 1e-12 contract stay untouched, which also
        // makes the operation exactly idempotent
        if sum > 0.0 && (sum - 1.0).abs() > 1e-12 {
            for v in &mut out.values[span] {
                *v /= sum;
            }
        }
    }
    Ok(out)
}

fn check_square_uniform(mats: &[SparseMatrix]) -> Result<usize> {
    let first = mats
        .first()
        .ok_or_else(|| RgcnError::Argument("stack: empty matrix list".into()))?;
    if first.rows != first.cols {
        return Err(RgcnError::dimension(format!(
            "stack: matrices must be square, got {}x{}",
            first.rows, first.cols
        )));
    }
    let n = first.rows;
    for (i, m) in mats.iter().enumerate() {
        if m.rows != n || m.cols != n {
            return Err(RgcnError::dimension(format!(
                "stack: matrix {} is {}x{}, expected {}x{}",
                i, m.rows, m.cols, n, n
            )));
        }
    }
    Ok(n)
}

/// Concatenates per-relation `N x N` matrices into `(R*N) x N`; block `r`
/// occupies rows `[r*N, (r+1)*N)`.
pub fn stack_vertical(mats: &[SparseMatrix]) -> Result<SparseMatrix> {
    let n = check_square_uniform(mats)?;
    let entries = mats.iter().enumerate().flat_map(|(r, m)| {
        m.entries()
            .map(move |(i, j, v)| (r * n + i, j, v))
            .collect::<Vec<_>>()
    });
    SparseMatrix::from_entries(mats.len() * n, n, entries)
}

/// Concatenates per-relation `N x N` matrices into `N x (R*N)`; block `r`
/// occupies columns `[r*N, (r+1)*N)`.
pub fn stack_horizontal(mats: &[SparseMatrix]) -> Result<SparseMatrix> {
    let n = check_square_uniform(mats)?;
    let entries = mats.iter().enumerate().flat_map(|(r, m)| {
        m.entries()
            .map(move |(i, j, v)| (i, r * n + j, v))
            .collect::<Vec<_>>()
    });
    SparseMatrix::from_entries(n, mats.len() * n, entries)
}
