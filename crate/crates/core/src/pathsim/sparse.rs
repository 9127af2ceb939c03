use crate::error::{Error, Result};
use crate::hin::{EdgeTypeId, HinGraph, NodeId, NodeTypeId};

/// Path-count matrix in CSR layout.
///
/// Rows are labelled by `row_nodes` (all nodes of `row_type`, or a subset);
/// columns are local indices into `graph.nodes_of_type(col_type)`. Stored
/// values are strictly positive and columns strictly increase within a row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseCountMatrix {
    row_type: NodeTypeId,
    col_type: NodeTypeId,
    row_nodes: Vec<NodeId>,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<u64>,
}

impl SparseCountMatrix {
    /// 0/1 matrix of relation `r` walked from `from`-typed nodes to
    /// `to`-typed nodes.
    pub fn biadjacency(g: &HinGraph, from: NodeTypeId, r: EdgeTypeId, to: NodeTypeId) -> Self {
        let rows = g.nodes_of_type(from).to_vec();
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for &v in &rows {
            // adjacency is sorted by neighbor id, so local indices come out sorted
            for (u, e) in g.neighbors(v) {
                if *e == r && g.node_type(*u) == to {
                    col_indices.push(g.local_index(*u) as u32);
                }
            }
            row_offsets.push(col_indices.len());
        }
        let values = vec![1u64; col_indices.len()];
        SparseCountMatrix {
            row_type: from,
            col_type: to,
            row_nodes: rows,
            n_cols: g.nodes_of_type(to).len(),
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Selection matrix picking `rows` (all of type `ty`) out of the full
    /// type block.
    pub fn selection(g: &HinGraph, ty: NodeTypeId, rows: &[NodeId]) -> Result<Self> {
        let mut col_indices = Vec::with_capacity(rows.len());
        for &v in rows {
            if v.index() >= g.num_nodes() || g.node_type(v) != ty {
                return Err(Error::TypeMismatch(format!(
                    "node {} is not of type {}",
                    v.0,
                    g.schema().node_type_name(ty)
                )));
            }
            col_indices.push(g.local_index(v) as u32);
        }
        Ok(SparseCountMatrix {
            row_type: ty,
            col_type: ty,
            row_nodes: rows.to_vec(),
            n_cols: g.nodes_of_type(ty).len(),
            row_offsets: (0..=rows.len()).collect(),
            values: vec![1; rows.len()],
            col_indices,
        })
    }

    pub fn row_type(&self) -> NodeTypeId {
        self.row_type
    }

    pub fn col_type(&self) -> NodeTypeId {
        self.col_type
    }

    pub fn row_nodes(&self) -> &[NodeId] {
        &self.row_nodes
    }

    pub fn n_rows(&self) -> usize {
        self.row_nodes.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    /// Column indices and counts of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[u64]) {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, col: usize) -> u64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(col as u32)) {
            Ok(p) => vals[p],
            Err(_) => 0,
        }
    }

    /// Checked product `self · rhs`; aborts on 64-bit overflow.
    pub fn multiply(&self, rhs: &SparseCountMatrix) -> Result<SparseCountMatrix> {
        if self.n_cols != rhs.n_rows() || self.col_type != rhs.row_type {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.n_rows(),
                self.n_cols,
                rhs.n_rows(),
                rhs.n_cols
            )));
        }
        let overflow = || Error::Overflow("64-bit path count exceeded during matrix product".into());
        let mut acc = vec![0u64; rhs.n_cols];
        let mut touched: Vec<u32> = Vec::new();
        let mut row_offsets = Vec::with_capacity(self.n_rows() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.n_rows() {
            let (ac, av) = self.row(i);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = rhs.row(k as usize);
                for (&j, &b) in bc.iter().zip(bv) {
                    let slot = &mut acc[j as usize];
                    if *slot == 0 {
                        touched.push(j);
                    }
                    *slot = slot.checked_add(a.checked_mul(b).ok_or_else(overflow)?).ok_or_else(overflow)?;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_indices.push(j);
                values.push(acc[j as usize]);
                acc[j as usize] = 0;
            }
            touched.clear();
            row_offsets.push(col_indices.len());
        }
        Ok(SparseCountMatrix {
            row_type: self.row_type,
            col_type: rhs.col_type,
            row_nodes: self.row_nodes.clone(),
            n_cols: rhs.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Transpose of a full matrix (rows are every node of `row_type` in local
    /// order). `col_nodes` labels the new rows.
    pub fn transpose(&self, col_nodes: &[NodeId]) -> SparseCountMatrix {
        debug_assert_eq!(col_nodes.len(), self.n_cols);
        let mut row_offsets = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            row_offsets[c as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            row_offsets[i + 1] += row_offsets[i];
        }
        let mut fill = row_offsets[..self.n_cols].to_vec();
        let mut col_indices = vec![0u32; self.nnz()];
        let mut values = vec![0u64; self.nnz()];
        for i in 0..self.n_rows() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let p = fill[c as usize];
                col_indices[p] = i as u32;
                values[p] = v;
                fill[c as usize] += 1;
            }
        }
        SparseCountMatrix {
            row_type: self.col_type,
            col_type: self.row_type,
            row_nodes: col_nodes.to_vec(),
            n_cols: self.n_rows(),
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Dense copy, row-major. Test and debugging helper.
    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        (0..self.n_rows())
            .map(|i| {
                let mut row = vec![0u64; self.n_cols];
                let (cols, vals) = self.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    row[c as usize] = v;
                }
                row
            })
            .collect()
    }
}
