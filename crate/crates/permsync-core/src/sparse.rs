//! Sparse 0/1 partial permutation blocks.
//!
//! A partial permutation matrix has at most one 1 per row and at most one
//! 1 per column; everything else is 0. Blocks are stored as sorted
//! coordinate lists, which keeps every operation here exact integer work:
//! composition is an index join, transposition a re-sort, dominance a
//! merge. [`SparseNonnegMatrix`] is the companion accumulator for weighted
//! sums of blocks, which are no longer 0/1 but stay sparse and nonnegative.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) out of bounds for a {rows}x{cols} block")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("row {row} holds more than one entry")]
    DuplicateRow { row: usize },
    #[error("column {col} holds more than one entry")]
    DuplicateColumn { col: usize },
    #[error("cannot combine a {left:?} block with a {right:?} block")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("value {value} at ({row}, {col}) is not a finite nonnegative number")]
    InvalidValue { row: usize, col: usize, value: f64 },
}

/// A 0/1 matrix with at most one nonzero per row and per column.
///
/// Entries are kept sorted by `(row, col)`. Zero-sized shapes are legal;
/// an empty entry list is the all-zero block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialPermutation {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize)>,
}

impl PartialPermutation {
    /// Builds a block from `(row, col)` positions of the ones, in any order.
    pub fn new(
        rows: usize,
        cols: usize,
        mut entries: Vec<(usize, usize)>,
    ) -> Result<Self, SparseError> {
        entries.sort_unstable();
        for &(r, c) in &entries {
            if r >= rows || c >= cols {
                return Err(SparseError::OutOfBounds {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
        }
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(SparseError::DuplicateRow { row: w[0].0 });
            }
        }
        let mut col_used = vec![false; cols];
        for &(_, c) in &entries {
            if col_used[c] {
                return Err(SparseError::DuplicateColumn { col: c });
            }
            col_used[c] = true;
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// The all-zero block.
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    /// Ones on the main diagonal up to `min(rows, cols)`.
    pub fn identity(rows: usize, cols: usize) -> Self {
        let entries = (0..rows.min(cols)).map(|d| (d, d)).collect();
        Self {
            rows,
            cols,
            entries,
        }
    }

    /// Entries assumed sorted by row with all invariants already holding.
    pub(crate) fn from_sorted_unchecked(
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize)>,
    ) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(r, c)| r < rows && c < cols));
        debug_assert!({
            let mut cols_seen: Vec<usize> = entries.iter().map(|&(_, c)| c).collect();
            cols_seen.sort_unstable();
            cols_seen.windows(2).all(|w| w[0] < w[1])
        });
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Positions of the ones, sorted by `(row, col)`.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    /// Column matched to `row`, if any.
    pub fn col_for_row(&self, row: usize) -> Option<usize> {
        self.entries
            .binary_search_by_key(&row, |&(r, _)| r)
            .ok()
            .map(|idx| self.entries[idx].1)
    }

    /// Row matched to `col`, if any. Linear scan; columns are not indexed.
    pub fn row_for_col(&self, col: usize) -> Option<usize> {
        self.entries.iter().find(|&&(_, c)| c == col).map(|&(r, _)| r)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.col_for_row(row) == Some(col)
    }

    pub fn transpose(&self) -> Self {
        let mut entries: Vec<(usize, usize)> =
            self.entries.iter().map(|&(r, c)| (c, r)).collect();
        entries.sort_unstable();
        Self {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    /// Matrix product `self * rhs`. The product of two partial permutations
    /// is again one, so no invariant re-check is needed.
    pub fn compose(&self, rhs: &Self) -> Result<Self, SparseError> {
        if self.cols != rhs.rows {
            return Err(SparseError::ShapeMismatch {
                left: (self.rows, self.cols),
                right: (rhs.rows, rhs.cols),
            });
        }
        let mut entries = Vec::new();
        for &(r, mid) in &self.entries {
            if let Some(c) = rhs.col_for_row(mid) {
                entries.push((r, c));
            }
        }
        Ok(Self::from_sorted_unchecked(self.rows, rhs.cols, entries))
    }

    /// `nnz(self * rhs)` without materializing the product.
    pub(crate) fn compose_count(&self, rhs: &Self) -> Result<usize, SparseError> {
        if self.cols != rhs.rows {
            return Err(SparseError::ShapeMismatch {
                left: (self.rows, self.cols),
                right: (rhs.rows, rhs.cols),
            });
        }
        Ok(self
            .entries
            .iter()
            .filter(|&&(_, mid)| rhs.col_for_row(mid).is_some())
            .count())
    }

    /// Entrywise `self <= other`. Blocks of different shape are never
    /// comparable, so the answer is `false` for them.
    pub fn is_dominated_by(&self, other: &Self) -> bool {
        if self.rows != other.rows || self.cols != other.cols {
            return false;
        }
        // Both lists are sorted, so subset containment is a single merge.
        let mut it = other.entries.iter().peekable();
        'outer: for e in &self.entries {
            while let Some(o) = it.peek() {
                if *o < e {
                    it.next();
                } else if *o == e {
                    it.next();
                    continue 'outer;
                } else {
                    return false;
                }
            }
            return false;
        }
        true
    }
}

/// Trace of `a * b * c` for a shape-compatible cycle of blocks.
///
/// This counts the closed match loops `r -> (via a) -> (via b) -> r`, the
/// quantity that triangle consistency checks compare against path counts.
pub fn trace_product3(
    a: &PartialPermutation,
    b: &PartialPermutation,
    c: &PartialPermutation,
) -> Result<usize, SparseError> {
    if a.cols != b.rows {
        return Err(SparseError::ShapeMismatch {
            left: (a.rows, a.cols),
            right: (b.rows, b.cols),
        });
    }
    if b.cols != c.rows || c.cols != a.rows {
        return Err(SparseError::ShapeMismatch {
            left: (b.rows, b.cols),
            right: (c.rows, c.cols),
        });
    }
    let mut closed = 0;
    for &(r, mid) in &a.entries {
        if let Some(l) = b.col_for_row(mid) {
            if c.col_for_row(l) == Some(r) {
                closed += 1;
            }
        }
    }
    Ok(closed)
}

/// Sparse matrix with finite, strictly positive stored values.
///
/// Used for weighted sums of partial permutation blocks. Duplicate
/// coordinates passed to [`SparseNonnegMatrix::from_triples`] are summed
/// in their input order, and exact zeros are dropped, so the stored form
/// is canonical: sorted by `(row, col)`, all values positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseNonnegMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseNonnegMatrix {
    pub fn from_triples(
        rows: usize,
        cols: usize,
        mut triples: Vec<(usize, usize, f64)>,
    ) -> Result<Self, SparseError> {
        for &(r, c, v) in &triples {
            if r >= rows || c >= cols {
                return Err(SparseError::OutOfBounds {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            if !v.is_finite() || v < 0.0 {
                return Err(SparseError::InvalidValue {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        // Stable sort keeps duplicates in input order, so their sum is
        // reproducible regardless of how the caller interleaved pushes.
        triples.sort_by_key(|&(r, c, _)| (r, c));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triples.len());
        for (r, c, v) in triples {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|&(_, _, v)| v > 0.0);
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `(row, col, value)` triples sorted by `(row, col)`, values positive.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }
}
