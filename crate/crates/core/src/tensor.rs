//! Dense probability tensors and unnormalized nonnegative tensors.
//!
//! Storage is a flat `Vec<f64>` in variable-major order (see
//! [`VariableScheme`]). Probability tensors keep their entries on the unit
//! simplex: construction accepts a total within `SIMPLEX_TOL` of 1 and then
//! divides by the exact sum, so downstream code can rely on the invariant.

use crate::error::{CoreError, Result};
use crate::scheme::{VariableScheme, DEFAULT_CELL_CAP};
use serde::{Deserialize, Serialize};

/// Tolerance on |sum - 1| accepted when constructing a probability tensor.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTensor {
    scheme: VariableScheme,
    entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonnegTensor {
    scheme: VariableScheme,
    entries: Vec<f64>,
}

fn check_nonneg_finite(entries: &[f64]) -> Result<()> {
    for &x in entries {
        if !x.is_finite() {
            return Err(CoreError::Numeric(format!("non-finite entry {x}")));
        }
        if x < 0.0 {
            return Err(CoreError::Numeric(format!("negative entry {x}")));
        }
    }
    Ok(())
}

impl ProbabilityTensor {
    /// Builds a probability tensor from dense entries in variable-major
    /// order. Entries must be nonnegative and sum to 1 within
    /// [`SIMPLEX_TOL`]; the stored entries are divided by the exact sum so
    /// the invariant holds sharply afterwards.
    pub fn from_entries(scheme: VariableScheme, entries: Vec<f64>) -> Result<Self> {
        let n = scheme.cell_count_capped(DEFAULT_CELL_CAP)?;
        if entries.len() != n {
            return Err(CoreError::InvalidInput(format!(
                "expected {n} entries, got {}",
                entries.len()
            )));
        }
        check_nonneg_finite(&entries)?;
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(CoreError::InvalidInput(format!(
                "entries sum to {sum}, outside 1 +/- {SIMPLEX_TOL}"
            )));
        }
        let mut t = ProbabilityTensor { scheme, entries };
        let inv = 1.0 / sum;
        for x in &mut t.entries {
            *x *= inv;
        }
        Ok(t)
    }

    /// Normalizes arbitrary nonnegative mass into a probability tensor.
    /// Used by evaluators whose raw sums drift from 1 by accumulated
    /// rounding; the division is part of their construction contract.
    pub fn from_unnormalized(scheme: VariableScheme, entries: Vec<f64>) -> Result<Self> {
        let n = scheme.cell_count_capped(DEFAULT_CELL_CAP)?;
        if entries.len() != n {
            return Err(CoreError::InvalidInput(format!(
                "expected {n} entries, got {}",
                entries.len()
            )));
        }
        check_nonneg_finite(&entries)?;
        let sum: f64 = entries.iter().sum();
        if sum <= 0.0 {
            return Err(CoreError::Numeric("total mass is zero".into()));
        }
        let inv = 1.0 / sum;
        let entries = entries.into_iter().map(|x| x * inv).collect();
        Ok(ProbabilityTensor { scheme, entries })
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Probability of a 1-based cell.
    pub fn get(&self, cell: &[usize]) -> Result<f64> {
        Ok(self.entries[self.scheme.offset(cell)?])
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.iter().all(|&x| x > 0.0)
    }

    /// Marginal distribution of the (1-based, strictly increasing) variable
    /// subset `vars`; the remaining variables are summed out.
    pub fn marginal(&self, vars: &[usize]) -> Result<ProbabilityTensor> {
        validate_var_subset(&self.scheme, vars)?;
        if vars.is_empty() {
            return Err(CoreError::InvalidInput("marginal needs at least one variable".into()));
        }
        let sub_sizes: Vec<usize> = vars.iter().map(|&j| self.scheme.size_of(j)).collect();
        let sub = VariableScheme::new(sub_sizes)?;
        let mut acc = vec![0.0; sub.cell_count()?];
        let mut sub_cell = vec![0usize; vars.len()];
        for (idx, cell) in self.scheme.cells().enumerate() {
            for (t, &j) in vars.iter().enumerate() {
                sub_cell[t] = cell[j - 1];
            }
            acc[sub.offset(&sub_cell)?] += self.entries[idx];
        }
        ProbabilityTensor::from_unnormalized(sub, acc)
    }

    /// Conditional distribution of the remaining variables given exact
    /// levels for the evidence variables. `evidence` pairs are
    /// (variable, level), 1-based; the result's variables keep their
    /// original relative order. Errors when the evidence event has zero
    /// probability or when no variable remains free.
    pub fn condition(&self, evidence: &[(usize, usize)]) -> Result<ProbabilityTensor> {
        let p = self.scheme.p();
        let mut fixed: Vec<Option<usize>> = vec![None; p];
        for &(j, level) in evidence {
            if j < 1 || j > p {
                return Err(CoreError::InvalidInput(format!("evidence variable {j} out of range")));
            }
            if level < 1 || level > self.scheme.size_of(j) {
                return Err(CoreError::InvalidInput(format!(
                    "evidence level {level} out of range for variable {j}"
                )));
            }
            if fixed[j - 1].replace(level).is_some() {
                return Err(CoreError::InvalidInput(format!("duplicate evidence for variable {j}")));
            }
        }
        let free: Vec<usize> = (1..=p).filter(|&j| fixed[j - 1].is_none()).collect();
        if free.is_empty() {
            return Err(CoreError::InvalidInput("conditioning fixes every variable".into()));
        }
        let sub = VariableScheme::new(free.iter().map(|&j| self.scheme.size_of(j)).collect())?;
        let mut acc = vec![0.0; sub.cell_count()?];
        let mut full = vec![0usize; p];
        for (sub_idx, sub_cell) in sub.cells().enumerate() {
            for (t, &j) in free.iter().enumerate() {
                full[j - 1] = sub_cell[t];
            }
            for j in 1..=p {
                if let Some(level) = fixed[j - 1] {
                    full[j - 1] = level;
                }
            }
            acc[sub_idx] = self.entries[self.scheme.offset(&full)?];
        }
        let mass: f64 = acc.iter().sum();
        if mass <= 0.0 {
            return Err(CoreError::ZeroProbabilityBlock("evidence event has zero probability".into()));
        }
        ProbabilityTensor::from_unnormalized(sub, acc)
    }

    /// Drops normalization, keeping the entries as plain nonnegative mass.
    pub fn to_nonneg(&self) -> NonnegTensor {
        NonnegTensor { scheme: self.scheme.clone(), entries: self.entries.clone() }
    }

    pub fn max_abs_diff(&self, other: &ProbabilityTensor) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl NonnegTensor {
    pub fn from_entries(scheme: VariableScheme, entries: Vec<f64>) -> Result<Self> {
        let n = scheme.cell_count_capped(DEFAULT_CELL_CAP)?;
        if entries.len() != n {
            return Err(CoreError::InvalidInput(format!(
                "expected {n} entries, got {}",
                entries.len()
            )));
        }
        check_nonneg_finite(&entries)?;
        Ok(NonnegTensor { scheme, entries })
    }

    pub fn zeros(scheme: VariableScheme) -> Result<Self> {
        let n = scheme.cell_count_capped(DEFAULT_CELL_CAP)?;
        Ok(NonnegTensor { scheme, entries: vec![0.0; n] })
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn get(&self, cell: &[usize]) -> Result<f64> {
        Ok(self.entries[self.scheme.offset(cell)?])
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Entrywise product. Schemes must match.
    pub fn hadamard(&self, other: &NonnegTensor) -> Result<NonnegTensor> {
        if self.scheme != other.scheme {
            return Err(CoreError::InvalidInput("scheme mismatch in hadamard".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).collect();
        Ok(NonnegTensor { scheme: self.scheme.clone(), entries })
    }

    /// Entrywise sum. Schemes must match.
    pub fn add(&self, other: &NonnegTensor) -> Result<NonnegTensor> {
        if self.scheme != other.scheme {
            return Err(CoreError::InvalidInput("scheme mismatch in add".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(NonnegTensor { scheme: self.scheme.clone(), entries })
    }

    /// Normalizes to a probability tensor; errors on zero total mass.
    pub fn normalize(&self) -> Result<ProbabilityTensor> {
        ProbabilityTensor::from_unnormalized(self.scheme.clone(), self.entries.clone())
    }

    pub fn max_abs_diff(&self, other: &NonnegTensor) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn validate_var_subset(scheme: &VariableScheme, vars: &[usize]) -> Result<()> {
    for w in vars.windows(2) {
        if w[0] >= w[1] {
            return Err(CoreError::InvalidInput("variable subset must be strictly increasing".into()));
        }
    }
    if let Some(&j) = vars.iter().find(|&&j| j < 1 || j > scheme.p()) {
        return Err(CoreError::InvalidInput(format!("variable {j} out of range")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scheme22() -> VariableScheme {
        VariableScheme::new(vec![2, 2]).unwrap()
    }

    #[test]
    fn simplex_tolerance_is_enforced() {
        let ok = ProbabilityTensor::from_entries(scheme22(), vec![0.25; 4]);
        assert!(ok.is_ok());
        let off = ProbabilityTensor::from_entries(scheme22(), vec![0.25, 0.25, 0.25, 0.26]);
        assert!(off.is_err());
        let neg = ProbabilityTensor::from_entries(scheme22(), vec![-0.1, 0.4, 0.35, 0.35]);
        assert!(neg.is_err());
    }

    #[test]
    fn construction_renormalizes_tiny_drift() {
        let drift = 1e-13;
        let t = ProbabilityTensor::from_entries(
            scheme22(),
            vec![0.25 + drift, 0.25, 0.25, 0.25],
        )
        .unwrap();
        let sum: f64 = t.entries().iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn marginal_sums_out_other_variables() {
        // hand-built 2x2: rows (0.1, 0.2), (0.3, 0.4)
        let t = ProbabilityTensor::from_entries(scheme22(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m1 = t.marginal(&[1]).unwrap();
        assert_abs_diff_eq!(m1.get(&[1]).unwrap(), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(m1.get(&[2]).unwrap(), 0.7, epsilon = 1e-15);
        let m2 = t.marginal(&[2]).unwrap();
        assert_abs_diff_eq!(m2.get(&[1]).unwrap(), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(m2.get(&[2]).unwrap(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn condition_renormalizes_the_slice() {
        let t = ProbabilityTensor::from_entries(scheme22(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        // condition on variable 1 = 2: slice (0.3, 0.4) / 0.7
        let c = t.condition(&[(1, 2)]).unwrap();
        assert_abs_diff_eq!(c.get(&[1]).unwrap(), 0.3 / 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(c.get(&[2]).unwrap(), 0.4 / 0.7, epsilon = 1e-15);
    }

    #[test]
    fn condition_rejects_zero_probability_evidence() {
        let t = ProbabilityTensor::from_entries(scheme22(), vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            t.condition(&[(1, 2)]),
            Err(CoreError::ZeroProbabilityBlock(_))
        ));
    }

    #[test]
    fn hadamard_and_add_are_entrywise() {
        let a = NonnegTensor::from_entries(scheme22(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = NonnegTensor::from_entries(scheme22(), vec![0.5, 0.5, 2.0, 0.25]).unwrap();
        let h = a.hadamard(&b).unwrap();
        assert_eq!(h.entries(), &[0.5, 1.0, 6.0, 1.0]);
        let s = a.add(&b).unwrap();
        assert_eq!(s.entries(), &[1.5, 2.5, 5.0, 4.25]);
    }

    #[test]
    fn marginal_of_product_structure_factorizes() {
        // independent 2x3: p(i,j) = r_i * c_j
        let r = [0.3, 0.7];
        let c = [0.2, 0.5, 0.3];
        let scheme = VariableScheme::new(vec![2, 3]).unwrap();
        let mut entries = Vec::new();
        for i in 0..2 {
            for j in 0..3 {
                entries.push(r[i] * c[j]);
            }
        }
        let t = ProbabilityTensor::from_entries(scheme, entries).unwrap();
        let m = t.marginal(&[2]).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(m.get(&[j + 1]).unwrap(), c[j], epsilon = 1e-15);
        }
        let cond = t.condition(&[(1, 1)]).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(cond.get(&[j + 1]).unwrap(), c[j], epsilon = 1e-15);
        }
    }
}
