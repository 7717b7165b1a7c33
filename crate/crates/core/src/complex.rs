//! Oriented cell complexes and their signed incidence (coboundary) matrices.
//!
//! A [`SignedIncidence`] `D_k` maps k-cochains to (k+1)-cochains. It is stored
//! twice, once row-compressed and once column-compressed, so both `D x` and
//! `Dᵀ y` run in O(nnz) with a fixed summation order.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Sparse ±1 matrix with rows indexed by (k+1)-cells and columns by k-cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedIncidence {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    row_col: Vec<usize>,
    row_sign: Vec<i8>,
    col_ptr: Vec<usize>,
    col_row: Vec<usize>,
    col_sign: Vec<i8>,
}

impl SignedIncidence {
    /// Builds the matrix from `(row, col, sign)` triples.
    ///
    /// Within a row, entries keep the order in which they are given; that order
    /// fixes the summation order of [`apply`](Self::apply).
    pub fn from_entries(rows: usize, cols: usize, entries: &[(usize, usize, i8)]) -> Result<Self> {
        let mut per_row: Vec<Vec<(usize, i8)>> = vec![Vec::new(); rows];
        for &(r, c, s) in entries {
            if r >= rows {
                return Err(Error::BadReference { degree: 1, index: r, count: rows });
            }
            if c >= cols {
                return Err(Error::BadReference { degree: 0, index: c, count: cols });
            }
            if s != 1 && s != -1 {
                return Err(Error::InvalidArgument(format!("incidence sign {s} at ({r}, {c})")));
            }
            if per_row[r].iter().any(|&(c2, _)| c2 == c) {
                return Err(Error::InvalidArgument(format!("duplicate incidence entry ({r}, {c})")));
            }
            per_row[r].push((c, s));
        }

        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut row_col = Vec::with_capacity(entries.len());
        let mut row_sign = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        for row in &per_row {
            for &(c, s) in row {
                row_col.push(c);
                row_sign.push(s);
            }
            row_ptr.push(row_col.len());
        }

        // Column-compressed mirror, rows ascending within each column.
        let mut counts = vec![0usize; cols + 1];
        for &c in &row_col {
            counts[c + 1] += 1;
        }
        for i in 0..cols {
            counts[i + 1] += counts[i];
        }
        let col_ptr = counts.clone();
        let mut fill = counts;
        let mut col_row = vec![0usize; row_col.len()];
        let mut col_sign = vec![0i8; row_col.len()];
        for r in 0..rows {
            for k in row_ptr[r]..row_ptr[r + 1] {
                let c = row_col[k];
                col_row[fill[c]] = r;
                col_sign[fill[c]] = row_sign[k];
                fill[c] += 1;
            }
        }

        Ok(Self { rows, cols, row_ptr, row_col, row_sign, col_ptr, col_row, col_sign })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.row_col.len()
    }

    /// Entries of row `r` as `(col, sign)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.row_col[span.clone()].iter().copied().zip(self.row_sign[span].iter().copied())
    }

    /// Entries of column `c` as `(row, sign)`.
    pub fn col(&self, c: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        let span = self.col_ptr[c]..self.col_ptr[c + 1];
        self.col_row[span.clone()].iter().copied().zip(self.col_sign[span].iter().copied())
    }

    /// All entries in row-major storage order.
    pub fn entries(&self) -> Vec<(usize, usize, i8)> {
        (0..self.rows).flat_map(|r| self.row(r).map(move |(c, s)| (r, c, s))).collect()
    }

    /// `y = D x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        let mut y = vec![0.0; self.rows];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `x = Dᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, y.len())?;
        let mut x = vec![0.0; self.cols];
        self.apply_transpose_into(y, &mut x);
        Ok(x)
    }

    /// Unchecked `out = D x`; lengths are the caller's responsibility.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = x[self.row_col[k]];
                acc += if self.row_sign[k] > 0 { v } else { -v };
            }
            *o = acc;
        }
    }

    /// Unchecked `out = Dᵀ y`.
    pub fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let v = y[self.col_row[k]];
                acc += if self.col_sign[k] > 0 { v } else { -v };
            }
            *o = acc;
        }
    }

    /// Integer product `self · rhs`, returned densely (rows(self) × cols(rhs)).
    pub fn compose_dense(&self, rhs: &SignedIncidence) -> Result<Vec<Vec<i64>>> {
        check_len(self.cols, rhs.rows)?;
        let mut out = vec![vec![0i64; rhs.cols]; self.rows];
        for (r, row) in out.iter_mut().enumerate() {
            for (m, s1) in self.row(r) {
                for (c, s2) in rhs.row(m) {
                    row[c] += i64::from(s1) * i64::from(s2);
                }
            }
        }
        Ok(out)
    }

    /// Largest |entry| of `self · rhs`, in exact integer arithmetic.
    pub fn compose_max_abs(&self, rhs: &SignedIncidence) -> Result<i64> {
        check_len(self.cols, rhs.rows)?;
        let mut acc = vec![0i64; rhs.cols];
        let mut worst = 0;
        for r in 0..self.rows {
            let mut touched = Vec::new();
            for (m, s1) in self.row(r) {
                for (c, s2) in rhs.row(m) {
                    acc[c] += i64::from(s1) * i64::from(s2);
                    touched.push(c);
                }
            }
            for c in touched {
                worst = worst.max(acc[c].abs());
                acc[c] = 0;
            }
        }
        Ok(worst)
    }

    /// Dense integer copy, mainly for tests and small fixtures.
    pub fn to_dense(&self) -> Vec<Vec<i8>> {
        let mut d = vec![vec![0i8; self.cols]; self.rows];
        for (r, c, s) in self.entries() {
            d[r][c] = s;
        }
        d
    }

    fn map_entries(&self, f: impl Fn(usize, usize, i8) -> (usize, usize, i8)) -> Self {
        let e: Vec<_> = self.entries().into_iter().map(|(r, c, s)| f(r, c, s)).collect();
        Self::from_entries(self.rows, self.cols, &e).expect("relabeling preserves validity")
    }
}

/// Oriented cell complex of dimension `d = incidences.len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellComplex {
    counts: Vec<usize>,
    incidences: Vec<SignedIncidence>,
}

/// Oriented boundary description used to assemble a [`CellComplex`].
///
/// Edges are `(tail, head)` node pairs. Each higher cell of degree `k >= 2`
/// lists its boundary `(k-1)`-cells with a relative orientation sign.
#[derive(Clone, Debug, Default)]
pub struct ComplexSpec {
    pub n_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub higher: Vec<Vec<Vec<(usize, i8)>>>,
}

/// Per-cell ±1 orientation choice for one degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientationGauge {
    pub degree: usize,
    pub signs: Vec<i8>,
}

impl OrientationGauge {
    pub fn new(degree: usize, signs: Vec<i8>) -> Result<Self> {
        if let Some(&s) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("gauge sign {s}")));
        }
        Ok(Self { degree, signs })
    }

    /// Flips every cell of the degree.
    pub fn all(degree: usize, count: usize) -> Self {
        Self { degree, signs: vec![-1; count] }
    }
}

/// Assembles a complex from oriented boundary lists and verifies `D_{k+1} D_k = 0`.
pub fn build_complex(spec: &ComplexSpec) -> Result<CellComplex> {
    let mut incidences = Vec::new();
    let mut counts = vec![spec.n_nodes];
    if !spec.edges.is_empty() || !spec.higher.is_empty() {
        let mut entries = Vec::with_capacity(2 * spec.edges.len());
        for (e, &[t, h]) in spec.edges.iter().enumerate() {
            for v in [t, h] {
                if v >= spec.n_nodes {
                    return Err(Error::BadReference { degree: 0, index: v, count: spec.n_nodes });
                }
            }
            if t == h {
                return Err(Error::DegenerateCell(e));
            }
            entries.push((e, t, -1));
            entries.push((e, h, 1));
        }
        incidences.push(SignedIncidence::from_entries(spec.edges.len(), spec.n_nodes, &entries)?);
        counts.push(spec.edges.len());
    }
    for (offset, cells) in spec.higher.iter().enumerate() {
        let degree = offset + 2;
        let lower = counts[degree - 1];
        let mut entries = Vec::new();
        for (ci, boundary) in cells.iter().enumerate() {
            for &(b, s) in boundary {
                if b >= lower {
                    return Err(Error::BadReference { degree: degree - 1, index: b, count: lower });
                }
                entries.push((ci, b, s));
            }
        }
        incidences.push(SignedIncidence::from_entries(cells.len(), lower, &entries)?);
        counts.push(cells.len());
    }
    let complex = CellComplex { counts, incidences };
    complex.verify_chain()?;
    Ok(complex)
}

impl CellComplex {
    /// Wraps prebuilt incidences, checking dimensions and the chain property.
    pub fn from_incidences(incidences: Vec<SignedIncidence>) -> Result<Self> {
        let mut counts = Vec::new();
        if let Some(first) = incidences.first() {
            counts.push(first.cols());
        }
        for (k, d) in incidences.iter().enumerate() {
            check_len(counts[k], d.cols())?;
            counts.push(d.rows());
        }
        let c = Self { counts, incidences };
        c.verify_chain()?;
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.incidences.len()
    }

    /// Number of cells of degree `k`.
    pub fn count(&self, k: usize) -> usize {
        self.counts[k]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `D_k`, mapping k-cochains to (k+1)-cochains.
    pub fn incidence(&self, k: usize) -> &SignedIncidence {
        &self.incidences[k]
    }

    pub fn incidences(&self) -> &[SignedIncidence] {
        &self.incidences
    }

    /// Euler characteristic Σ (-1)^k n_k.
    pub fn euler_characteristic(&self) -> i64 {
        self.counts.iter().enumerate().map(|(k, &n)| if k % 2 == 0 { n as i64 } else { -(n as i64) }).sum()
    }

    /// Largest |entry| over all compositions `D_{k+1} D_k`.
    pub fn chain_defect(&self) -> i64 {
        self.incidences.windows(2).map(|w| w[1].compose_max_abs(&w[0]).expect("dimensions chain")).max().unwrap_or(0)
    }

    pub fn verify_chain(&self) -> Result<()> {
        for k in 0..self.incidences.len().saturating_sub(1) {
            check_len(self.incidences[k].rows(), self.incidences[k + 1].cols())?;
            if self.incidences[k + 1].compose_max_abs(&self.incidences[k])? != 0 {
                return Err(Error::ChainViolation(k + 1, k));
            }
        }
        Ok(())
    }

    /// Re-orients the cells of one degree.
    ///
    /// Column `c` of `D_k` and row `c` of `D_{k-1}` are multiplied by `ρ[c]`.
    pub fn flip_orientation(&self, gauge: &OrientationGauge) -> Result<Self> {
        let k = gauge.degree;
        if k >= self.counts.len() {
            return Err(Error::InvalidArgument(format!("no cells of degree {k}")));
        }
        check_len(self.counts[k], gauge.signs.len())?;
        let rho = &gauge.signs;
        let mut incidences = self.incidences.clone();
        if k < incidences.len() {
            incidences[k] = incidences[k].map_entries(|r, c, s| (r, c, s * rho[c]));
        }
        if k >= 1 {
            incidences[k - 1] = incidences[k - 1].map_entries(|r, c, s| (r, c, s * rho[r]));
        }
        Ok(Self { counts: self.counts.clone(), incidences })
    }

    /// Relabels degree-`k` cells: old cell `c` becomes cell `perm[c]`.
    pub fn permute_cells(&self, k: usize, perm: &[usize]) -> Result<Self> {
        if k >= self.counts.len() {
            return Err(Error::InvalidArgument(format!("no cells of degree {k}")));
        }
        let n = self.counts[k];
        if !is_permutation(perm, n) {
            return Err(Error::NotAPermutation(n));
        }
        let mut incidences = self.incidences.clone();
        if k < incidences.len() {
            incidences[k] = incidences[k].map_entries(|r, c, s| (r, perm[c], s));
        }
        if k >= 1 {
            incidences[k - 1] = incidences[k - 1].map_entries(|r, c, s| (perm[r], c, s));
        }
        Ok(Self { counts: self.counts.clone(), incidences })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ComplexDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ComplexDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

pub(crate) fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Serialized form: `{"n": [n0, n1, ...], "D": [{"rows", "cols", "entries": [[r, c, s], ...]}]}`.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ComplexDoc {
    pub n: Vec<usize>,
    #[serde(rename = "D")]
    pub d: Vec<IncidenceDoc>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct IncidenceDoc {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, i8)>,
}

impl From<&CellComplex> for ComplexDoc {
    fn from(c: &CellComplex) -> Self {
        ComplexDoc {
            n: c.counts.clone(),
            d: c.incidences
                .iter()
                .map(|d| IncidenceDoc { rows: d.rows(), cols: d.cols(), entries: d.entries() })
                .collect(),
        }
    }
}

impl TryFrom<ComplexDoc> for CellComplex {
    type Error = Error;

    fn try_from(doc: ComplexDoc) -> Result<Self> {
        let incidences = doc
            .d
            .iter()
            .map(|d| SignedIncidence::from_entries(d.rows, d.cols, &d.entries))
            .collect::<Result<Vec<_>>>()?;
        if incidences.is_empty() {
            return Ok(CellComplex { counts: doc.n, incidences });
        }
        let c = CellComplex::from_incidences(incidences)?;
        if c.counts != doc.n {
            return Err(Error::Serde(format!("cell counts {:?} disagree with incidences", doc.n)));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn triangle() -> CellComplex {
        build_complex(&ComplexSpec {
            n_nodes: 3,
            edges: vec![[0, 1], [1, 2], [2, 0]],
            higher: vec![vec![vec![(0, 1), (1, 1), (2, 1)]]],
        })
        .unwrap()
    }

    #[test]
    fn triangle_matches_hand_matrices() {
        let c = triangle();
        assert_eq!(c.incidence(0).to_dense(), vec![vec![-1, 1, 0], vec![0, -1, 1], vec![1, 0, -1]]);
        assert_eq!(c.incidence(1).to_dense(), vec![vec![1, 1, 1]]);
        assert_eq!(c.euler_characteristic(), 1);
    }

    #[test]
    fn single_edge() {
        let c = build_complex(&ComplexSpec { n_nodes: 2, edges: vec![[0, 1]], higher: vec![] }).unwrap();
        assert_eq!(c.dim(), 1);
        assert_eq!(c.incidence(0).to_dense(), vec![vec![-1, 1]]);
    }

    #[test]
    fn rejects_bad_input() {
        let degenerate = ComplexSpec { n_nodes: 2, edges: vec![[1, 1]], higher: vec![] };
        assert_eq!(build_complex(&degenerate), Err(Error::DegenerateCell(0)));
        let oob = ComplexSpec { n_nodes: 2, edges: vec![[0, 2]], higher: vec![] };
        assert!(matches!(build_complex(&oob), Err(Error::BadReference { .. })));
        // Face boundary with an inconsistent orientation.
        let broken = ComplexSpec {
            n_nodes: 3,
            edges: vec![[0, 1], [1, 2], [2, 0]],
            higher: vec![vec![vec![(0, 1), (1, -1), (2, 1)]]],
        };
        assert_eq!(build_complex(&broken), Err(Error::ChainViolation(1, 0)));
        let bad_face =
            ComplexSpec { n_nodes: 3, edges: vec![[0, 1], [1, 2], [2, 0]], higher: vec![vec![vec![(0, 1), (5, 1)]]] };
        assert!(matches!(build_complex(&bad_face), Err(Error::BadReference { degree: 1, .. })));
    }

    #[test]
    fn duplicate_and_bad_sign_entries_rejected() {
        assert!(SignedIncidence::from_entries(1, 2, &[(0, 0, 1), (0, 0, -1)]).is_err());
        assert!(SignedIncidence::from_entries(1, 2, &[(0, 0, 2)]).is_err());
    }

    #[test]
    fn matvec_dimension_checks() {
        let c = triangle();
        assert!(matches!(c.incidence(0).apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(c.incidence(1).apply_transpose(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn flip_single_edge() {
        let c = triangle();
        let g = OrientationGauge::new(1, vec![-1, 1, 1]).unwrap();
        let f = c.flip_orientation(&g).unwrap();
        assert_eq!(f.incidence(0).to_dense()[0], vec![1, -1, 0]);
        assert_eq!(f.incidence(1).to_dense(), vec![vec![-1, 1, 1]]);
        assert_eq!(f.flip_orientation(&g).unwrap(), c);
    }

    #[test]
    fn flip_whole_degree_negates_columns() {
        let c = triangle();
        let f = c.flip_orientation(&OrientationGauge::all(0, 3)).unwrap();
        let d = c.incidence(0).to_dense();
        let fd = f.incidence(0).to_dense();
        for r in 0..3 {
            for k in 0..3 {
                assert_eq!(fd[r][k], -d[r][k]);
            }
        }
    }

    #[test]
    fn permute_nodes_swaps_columns() {
        let c = triangle();
        let p = c.permute_cells(0, &[1, 0, 2]).unwrap();
        let d = c.incidence(0).to_dense();
        let pd = p.incidence(0).to_dense();
        for r in 0..3 {
            assert_eq!(pd[r][0], d[r][1]);
            assert_eq!(pd[r][1], d[r][0]);
            assert_eq!(pd[r][2], d[r][2]);
        }
        assert_eq!(c.permute_cells(0, &[0, 1, 2]).unwrap(), c);
        assert_eq!(c.permute_cells(0, &[0, 0, 2]), Err(Error::NotAPermutation(3)));
    }

    #[test]
    fn json_round_trip() {
        let c = triangle();
        let s = c.to_json().unwrap();
        assert!(s.contains("\"n\":[3,3,1]"));
        assert_eq!(CellComplex::from_json(&s).unwrap(), c);
    }
}
