//! Variable schemes and cells of a contingency table.
//!
//! A scheme lists the number of levels `d_j >= 2` for each of `p >= 1`
//! categorical variables. Cells are 1-based level tuples; dense storage is
//! variable-major (the first variable has the largest stride, the last one
//! stride 1), so for a 2x2 scheme the linear order is
//! (1,1), (1,2), (2,1), (2,2).

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Default cap on the number of dense cells a single tensor may hold.
pub const DEFAULT_CELL_CAP: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableScheme {
    sizes: Vec<usize>,
}

impl VariableScheme {
    /// Builds a scheme from per-variable level counts. Every `d_j` must be
    /// at least 2 (a single-level variable carries no information and the
    /// corner parametrization degenerates).
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(CoreError::InvalidScheme("scheme needs p >= 1 variables".into()));
        }
        if let Some(&d) = sizes.iter().find(|&&d| d < 2) {
            return Err(CoreError::InvalidScheme(format!("every variable needs d_j >= 2, got {d}")));
        }
        Ok(VariableScheme { sizes })
    }

    /// Uniform scheme: `p` variables with `d` levels each.
    pub fn uniform(p: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; p])
    }

    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Levels of variable `j` (1-based variable index).
    pub fn size_of(&self, j: usize) -> usize {
        self.sizes[j - 1]
    }

    /// Total number of cells, with overflow detection.
    pub fn cell_count(&self) -> Result<usize> {
        self.sizes.iter().try_fold(1usize, |acc, &d| {
            acc.checked_mul(d)
                .ok_or_else(|| CoreError::CapExceeded("cell count overflows usize".into()))
        })
    }

    /// Total cells, errors above `cap`.
    pub fn cell_count_capped(&self, cap: usize) -> Result<usize> {
        let n = self.cell_count()?;
        if n > cap {
            return Err(CoreError::CapExceeded(format!("{n} cells exceed cap {cap}")));
        }
        Ok(n)
    }

    /// Linear offset of a 1-based cell, variable-major.
    pub fn offset(&self, cell: &[usize]) -> Result<usize> {
        if cell.len() != self.p() {
            return Err(CoreError::InvalidScheme(format!(
                "cell has {} coordinates, scheme has {}",
                cell.len(),
                self.p()
            )));
        }
        let mut off = 0usize;
        for (j, (&i, &d)) in cell.iter().zip(&self.sizes).enumerate() {
            if i < 1 || i > d {
                return Err(CoreError::InvalidScheme(format!(
                    "level {i} out of range 1..={d} for variable {}",
                    j + 1
                )));
            }
            off = off * d + (i - 1);
        }
        Ok(off)
    }

    /// Inverse of [`offset`](Self::offset): the 1-based cell at a linear index.
    pub fn cell_at(&self, mut index: usize) -> Vec<usize> {
        let mut cell = vec![1usize; self.p()];
        for j in (0..self.p()).rev() {
            cell[j] = index % self.sizes[j] + 1;
            index /= self.sizes[j];
        }
        cell
    }

    /// Iterates all cells in linear (variable-major) order.
    pub fn cells(&self) -> CellIter<'_> {
        CellIter { scheme: self, next: Some(vec![1; self.p()]) }
    }

    /// Header form used by the text formats: "d1,d2,...".
    pub fn header(&self) -> String {
        self.sizes.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
    }
}

pub struct CellIter<'a> {
    scheme: &'a VariableScheme,
    next: Option<Vec<usize>>,
}

impl<'a> Iterator for CellIter<'a> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        // increment the last coordinate, carrying leftward
        for j in (0..succ.len()).rev() {
            if succ[j] < self.scheme.sizes[j] {
                succ[j] += 1;
                self.next = Some(succ);
                break;
            }
            succ[j] = 1;
        }
        Some(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_schemes() {
        assert!(VariableScheme::new(vec![]).is_err());
        assert!(VariableScheme::new(vec![2, 1]).is_err());
        assert!(VariableScheme::new(vec![0]).is_err());
        assert!(VariableScheme::new(vec![2, 2]).is_ok());
    }

    #[test]
    fn offset_is_variable_major() {
        let s = VariableScheme::new(vec![2, 2]).unwrap();
        assert_eq!(s.offset(&[1, 1]).unwrap(), 0);
        assert_eq!(s.offset(&[1, 2]).unwrap(), 1);
        assert_eq!(s.offset(&[2, 1]).unwrap(), 2);
        assert_eq!(s.offset(&[2, 2]).unwrap(), 3);
    }

    #[test]
    fn offset_round_trips_with_cell_at() {
        let s = VariableScheme::new(vec![3, 2, 4]).unwrap();
        for (idx, cell) in s.cells().enumerate() {
            assert_eq!(s.offset(&cell).unwrap(), idx);
            assert_eq!(s.cell_at(idx), cell);
        }
        assert_eq!(s.cells().count(), 24);
    }

    #[test]
    fn rejects_out_of_range_cells() {
        let s = VariableScheme::new(vec![2, 3]).unwrap();
        assert!(s.offset(&[0, 1]).is_err());
        assert!(s.offset(&[1, 4]).is_err());
        assert!(s.offset(&[1]).is_err());
    }

    #[test]
    fn cell_cap_enforced() {
        let s = VariableScheme::uniform(25, 2).unwrap();
        assert!(s.cell_count_capped(DEFAULT_CELL_CAP).is_err());
        let t = VariableScheme::uniform(24, 2).unwrap();
        assert_eq!(t.cell_count_capped(DEFAULT_CELL_CAP).unwrap(), 1 << 24);
    }
}
