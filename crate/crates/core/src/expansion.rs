//! Mixture expansions of probability tensors and unnormalized rank
//! witnesses.
//!
//! A PARAFAC expansion writes pi as a weighted sum of m product terms,
//! pi(c) = sum_h nu_h prod_j lambda^(j)_{h, c_j}. A Tucker expansion
//! replaces the weight vector by a core tensor with one axis per variable.
//! The collapsed form sits in between: variables are assigned to k groups
//! and variables in the same group share a core axis; k = 1 recovers
//! PARAFAC and k = p recovers Tucker.
//!
//! Evaluators accumulate raw products and then divide by the accumulated
//! sum; the division absorbs rounding drift of order cells * eps and is
//! part of the construction contract.

use crate::error::{CoreError, Result};
use crate::scheme::VariableScheme;
use crate::tensor::{NonnegTensor, ProbabilityTensor, SIMPLEX_TOL};

fn check_simplex(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(CoreError::InvalidInput(format!("{what}: entries must be nonnegative")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(CoreError::InvalidInput(format!("{what}: sum {sum} outside 1 +/- {SIMPLEX_TOL}")));
    }
    Ok(())
}

fn normalize_in_place(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    let inv = 1.0 / sum;
    for x in v {
        *x *= inv;
    }
}

/// Per-variable arm matrices: `arms[j][h]` is the level distribution of
/// variable `j+1` under latent class `h+1`. All classes share a common
/// count per variable.
fn check_arms(scheme: &VariableScheme, arms: &[Vec<Vec<f64>>], m: &[usize]) -> Result<()> {
    if arms.len() != scheme.p() {
        return Err(CoreError::InvalidInput(format!(
            "expected arms for {} variables, got {}",
            scheme.p(),
            arms.len()
        )));
    }
    for (j, per_var) in arms.iter().enumerate() {
        if per_var.len() != m[j] {
            return Err(CoreError::InvalidInput(format!(
                "variable {}: expected {} arms, got {}",
                j + 1,
                m[j],
                per_var.len()
            )));
        }
        for (h, arm) in per_var.iter().enumerate() {
            if arm.len() != scheme.sizes()[j] {
                return Err(CoreError::InvalidInput(format!(
                    "variable {} class {}: arm length {} != d_j {}",
                    j + 1,
                    h + 1,
                    arm.len(),
                    scheme.sizes()[j]
                )));
            }
            check_simplex(arm, &format!("arm (variable {}, class {})", j + 1, h + 1))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParafacExpansion {
    scheme: VariableScheme,
    weights: Vec<f64>,
    arms: Vec<Vec<Vec<f64>>>,
}

impl ParafacExpansion {
    pub fn new(scheme: VariableScheme, weights: Vec<f64>, arms: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(CoreError::InvalidInput("expansion needs at least one term".into()));
        }
        check_simplex(&weights, "weights")?;
        check_arms(&scheme, &arms, &vec![weights.len(); scheme.p()])?;
        let mut e = ParafacExpansion { scheme, weights, arms };
        normalize_in_place(&mut e.weights);
        for per_var in &mut e.arms {
            for arm in per_var {
                normalize_in_place(arm);
            }
        }
        Ok(e)
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn terms(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn arms(&self) -> &[Vec<Vec<f64>>] {
        &self.arms
    }

    pub fn eval(&self) -> Result<ProbabilityTensor> {
        let n = self.scheme.cell_count()?;
        let mut out = vec![0.0f64; n];
        for (idx, cell) in self.scheme.cells().enumerate() {
            let mut acc = 0.0;
            for h in 0..self.terms() {
                let mut prod = self.weights[h];
                for (j, &c) in cell.iter().enumerate() {
                    prod *= self.arms[j][h][c - 1];
                }
                acc += prod;
            }
            out[idx] = acc;
        }
        ProbabilityTensor::from_unnormalized(self.scheme.clone(), out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuckerExpansion {
    scheme: VariableScheme,
    /// Core probability tensor; axis j indexes the classes of variable j.
    core: ProbabilityTensor,
    arms: Vec<Vec<Vec<f64>>>,
}

impl TuckerExpansion {
    pub fn new(scheme: VariableScheme, core: ProbabilityTensor, arms: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if core.scheme().p() != scheme.p() {
            return Err(CoreError::InvalidInput(format!(
                "core has {} axes, scheme has {} variables",
                core.scheme().p(),
                scheme.p()
            )));
        }
        check_arms(&scheme, &arms, core.scheme().sizes())?;
        let mut e = TuckerExpansion { scheme, core, arms };
        for per_var in &mut e.arms {
            for arm in per_var {
                normalize_in_place(arm);
            }
        }
        Ok(e)
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn core(&self) -> &ProbabilityTensor {
        &self.core
    }

    pub fn arms(&self) -> &[Vec<Vec<f64>>] {
        &self.arms
    }

    pub fn eval(&self) -> Result<ProbabilityTensor> {
        let n = self.scheme.cell_count()?;
        let mut out = vec![0.0f64; n];
        for (idx, cell) in self.scheme.cells().enumerate() {
            let mut acc = 0.0;
            for (core_idx, core_cell) in self.core.scheme().cells().enumerate() {
                let mut prod = self.core.entries()[core_idx];
                if prod == 0.0 {
                    continue;
                }
                for (j, &c) in cell.iter().enumerate() {
                    prod *= self.arms[j][core_cell[j] - 1][c - 1];
                }
                acc += prod;
            }
            out[idx] = acc;
        }
        ProbabilityTensor::from_unnormalized(self.scheme.clone(), out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CTuckerExpansion {
    scheme: VariableScheme,
    /// 1-based group label per variable; group s shares core axis s.
    groups: Vec<usize>,
    /// Core probability tensor with one axis per group, m levels each.
    core: ProbabilityTensor,
    arms: Vec<Vec<Vec<f64>>>,
}

impl CTuckerExpansion {
    pub fn new(
        scheme: VariableScheme,
        groups: Vec<usize>,
        core: ProbabilityTensor,
        arms: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let k = core.scheme().p();
        if groups.len() != scheme.p() {
            return Err(CoreError::InvalidInput(format!(
                "expected {} group labels, got {}",
                scheme.p(),
                groups.len()
            )));
        }
        if let Some(&s) = groups.iter().find(|&&s| s < 1 || s > k) {
            return Err(CoreError::InvalidInput(format!("group label {s} outside 1..={k}")));
        }
        let m = core.scheme().sizes()[0];
        if core.scheme().sizes().iter().any(|&x| x != m) {
            return Err(CoreError::InvalidInput("core must have a uniform class count".into()));
        }
        check_arms(&scheme, &arms, &vec![m; scheme.p()])?;
        let mut e = CTuckerExpansion { scheme, groups, core, arms };
        for per_var in &mut e.arms {
            for arm in per_var {
                normalize_in_place(arm);
            }
        }
        Ok(e)
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn k(&self) -> usize {
        self.core.scheme().p()
    }

    pub fn m(&self) -> usize {
        self.core.scheme().sizes()[0]
    }

    pub fn core(&self) -> &ProbabilityTensor {
        &self.core
    }

    pub fn arms(&self) -> &[Vec<Vec<f64>>] {
        &self.arms
    }

    pub fn eval(&self) -> Result<ProbabilityTensor> {
        let n = self.scheme.cell_count()?;
        let k = self.k();
        let m = self.m();
        let mut out = vec![0.0f64; n];
        // per cell: group factors A_s(h) = prod_{j in group s} arm, then
        // sum over the core
        let mut group_factors = vec![vec![0.0f64; m]; k];
        for (idx, cell) in self.scheme.cells().enumerate() {
            for s in 0..k {
                for h in 0..m {
                    let mut prod = 1.0;
                    for (j, &c) in cell.iter().enumerate() {
                        if self.groups[j] == s + 1 {
                            prod *= self.arms[j][h][c - 1];
                        }
                    }
                    group_factors[s][h] = prod;
                }
            }
            let mut acc = 0.0;
            for (core_idx, core_cell) in self.core.scheme().cells().enumerate() {
                let mut prod = self.core.entries()[core_idx];
                if prod == 0.0 {
                    continue;
                }
                for s in 0..k {
                    prod *= group_factors[s][core_cell[s] - 1];
                }
                acc += prod;
            }
            out[idx] = acc;
        }
        ProbabilityTensor::from_unnormalized(self.scheme.clone(), out)
    }
}

/// Unnormalized nonnegative rank witness: a sum of product terms without
/// weights (scale lives in the arms). Witness combination tracks the rank
/// arithmetic of entrywise products (m * k terms) and sums (m + k terms).
#[derive(Debug, Clone, PartialEq)]
pub struct RankWitness {
    scheme: VariableScheme,
    /// `terms[h][j]` is the unnormalized arm of variable j+1 in term h+1.
    terms: Vec<Vec<Vec<f64>>>,
}

impl RankWitness {
    pub fn new(scheme: VariableScheme, terms: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for (h, term) in terms.iter().enumerate() {
            if term.len() != scheme.p() {
                return Err(CoreError::InvalidInput(format!(
                    "term {} has {} arms, scheme has {} variables",
                    h + 1,
                    term.len(),
                    scheme.p()
                )));
            }
            for (j, arm) in term.iter().enumerate() {
                if arm.len() != scheme.sizes()[j] {
                    return Err(CoreError::InvalidInput(format!(
                        "term {} variable {}: arm length mismatch",
                        h + 1,
                        j + 1
                    )));
                }
                if arm.iter().any(|&x| !x.is_finite() || x < 0.0) {
                    return Err(CoreError::Numeric("witness arms must be nonnegative".into()));
                }
            }
        }
        Ok(RankWitness { scheme, terms })
    }

    pub fn from_parafac(e: &ParafacExpansion) -> RankWitness {
        let terms = (0..e.terms())
            .map(|h| {
                (0..e.scheme().p())
                    .map(|j| {
                        let mut arm = e.arms()[j][h].clone();
                        if j == 0 {
                            for x in &mut arm {
                                *x *= e.weights()[h];
                            }
                        }
                        arm
                    })
                    .collect()
            })
            .collect();
        RankWitness { scheme: e.scheme().clone(), terms }
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn terms(&self) -> usize {
        self.terms.len()
    }

    pub fn term_arms(&self) -> &[Vec<Vec<f64>>] {
        &self.terms
    }

    pub fn eval(&self) -> Result<NonnegTensor> {
        let n = self.scheme.cell_count()?;
        let mut out = vec![0.0f64; n];
        for (idx, cell) in self.scheme.cells().enumerate() {
            let mut acc = 0.0;
            for term in &self.terms {
                let mut prod = 1.0;
                for (j, &c) in cell.iter().enumerate() {
                    prod *= term[j][c - 1];
                }
                acc += prod;
            }
            out[idx] = acc;
        }
        NonnegTensor::from_entries(self.scheme.clone(), out)
    }

    /// Witness for the entrywise product: one term per pair, arms
    /// multiplied entrywise. Term count is exactly m * k.
    pub fn hadamard(&self, other: &RankWitness) -> Result<RankWitness> {
        if self.scheme != other.scheme {
            return Err(CoreError::InvalidInput("scheme mismatch in witness hadamard".into()));
        }
        let mut terms = Vec::with_capacity(self.terms() * other.terms());
        for a in &self.terms {
            for b in &other.terms {
                let term: Vec<Vec<f64>> = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).collect())
                    .collect();
                terms.push(term);
            }
        }
        Ok(RankWitness { scheme: self.scheme.clone(), terms })
    }

    /// Witness for the entrywise sum: term concatenation, m + k terms.
    pub fn add(&self, other: &RankWitness) -> Result<RankWitness> {
        if self.scheme != other.scheme {
            return Err(CoreError::InvalidInput("scheme mismatch in witness add".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(RankWitness { scheme: self.scheme.clone(), terms })
    }

    /// Normalizes into a PARAFAC expansion, dropping zero-mass terms.
    /// Returns the expansion and the total mass that was scaled away.
    pub fn normalize(&self) -> Result<(ParafacExpansion, f64)> {
        let p = self.scheme.p();
        let mut weights = Vec::new();
        let mut arms: Vec<Vec<Vec<f64>>> = vec![Vec::new(); p];
        for term in &self.terms {
            let masses: Vec<f64> = term.iter().map(|arm| arm.iter().sum()).collect();
            let w: f64 = masses.iter().product();
            if w == 0.0 {
                continue;
            }
            weights.push(w);
            for (j, arm) in term.iter().enumerate() {
                arms[j].push(arm.iter().map(|x| x / masses[j]).collect());
            }
        }
        if weights.is_empty() {
            return Err(CoreError::Numeric("witness has zero total mass".into()));
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let e = ParafacExpansion::new(self.scheme.clone(), weights, arms)?;
        Ok((e, total))
    }
}

/// Constructive 2-D expansion. Given a nonnegative matrix `m2` (as a 2-D
/// tensor), baseline arms `lam1`/`lam2`, and level sets `h1`/`h2` covering
/// every cell where `m2` differs from the outer product lam1 x lam2, the
/// witness has 1 + |h1| + |h2| terms:
///
/// * baseline term: lam1 zeroed on h1 times lam2 zeroed on h2;
/// * one term per row in h1: that exact row of m2;
/// * one term per column in h2: that column restricted to rows outside h1.
///
/// Reconstruction is exact when the coverage precondition holds; it is
/// checked up to `tol` and violated cells produce an error.
pub fn construct_2d_expansion(
    m2: &NonnegTensor,
    lam1: &[f64],
    lam2: &[f64],
    h1: &[usize],
    h2: &[usize],
    tol: f64,
) -> Result<RankWitness> {
    let scheme = m2.scheme().clone();
    if scheme.p() != 2 {
        return Err(CoreError::InvalidInput("construct_2d_expansion needs a 2-D tensor".into()));
    }
    let (d1, d2) = (scheme.sizes()[0], scheme.sizes()[1]);
    if lam1.len() != d1 || lam2.len() != d2 {
        return Err(CoreError::InvalidInput("baseline arm lengths must match the scheme".into()));
    }
    if lam1.iter().chain(lam2).any(|&x| !x.is_finite() || x < 0.0) {
        return Err(CoreError::Numeric("baseline arms must be nonnegative".into()));
    }
    let check_levels = |h: &[usize], d: usize| -> Result<()> {
        if h.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::InvalidInput("level sets must be strictly increasing".into()));
        }
        if h.iter().any(|&c| c < 1 || c > d) {
            return Err(CoreError::InvalidInput("level out of range in level set".into()));
        }
        Ok(())
    };
    check_levels(h1, d1)?;
    check_levels(h2, d2)?;
    let in_h1 = |c: usize| h1.binary_search(&c).is_ok();
    let in_h2 = |c: usize| h2.binary_search(&c).is_ok();
    // coverage: outside h1 x h2 the matrix must equal the outer product
    for c1 in 1..=d1 {
        for c2 in 1..=d2 {
            if in_h1(c1) || in_h2(c2) {
                continue;
            }
            let want = lam1[c1 - 1] * lam2[c2 - 1];
            let got = m2.get(&[c1, c2])?;
            if (want - got).abs() > tol {
                return Err(CoreError::InvalidInput(format!(
                    "cell ({c1},{c2}) differs from the baseline by {} but is not covered",
                    (want - got).abs()
                )));
            }
        }
    }
    let mut terms = Vec::with_capacity(1 + h1.len() + h2.len());
    let base1: Vec<f64> =
        (1..=d1).map(|c| if in_h1(c) { 0.0 } else { lam1[c - 1] }).collect();
    let base2: Vec<f64> =
        (1..=d2).map(|c| if in_h2(c) { 0.0 } else { lam2[c - 1] }).collect();
    terms.push(vec![base1, base2]);
    for &r in h1 {
        let mut e = vec![0.0; d1];
        e[r - 1] = 1.0;
        let row: Vec<f64> = (1..=d2).map(|c2| m2.get(&[r, c2]).unwrap()).collect();
        terms.push(vec![e, row]);
    }
    for &c in h2 {
        let col: Vec<f64> = (1..=d1)
            .map(|c1| if in_h1(c1) { 0.0 } else { m2.get(&[c1, c]).unwrap() })
            .collect();
        let mut e = vec![0.0; d2];
        e[c - 1] = 1.0;
        terms.push(vec![col, e]);
    }
    RankWitness::new(scheme, terms)
}

/// Joins expansions of disjoint variable groups into a product
/// distribution over the union. `parts` pairs each group's (sorted,
/// 1-based) variables with its expansion; the groups must partition
/// 1..=p. The joint witness takes one term per combination, so the term
/// count is the product of the parts' term counts.
pub fn join_independent(
    parts: &[(Vec<usize>, ParafacExpansion)],
) -> Result<(ProbabilityTensor, ParafacExpansion)> {
    if parts.is_empty() {
        return Err(CoreError::InvalidInput("join needs at least one part".into()));
    }
    let p: usize = parts.iter().map(|(vars, _)| vars.len()).sum();
    let mut owner: Vec<Option<usize>> = vec![None; p];
    for (s, (vars, e)) in parts.iter().enumerate() {
        if vars.len() != e.scheme().p() {
            return Err(CoreError::InvalidInput(format!(
                "part {}: {} variables but expansion over {}",
                s + 1,
                vars.len(),
                e.scheme().p()
            )));
        }
        for (t, &j) in vars.iter().enumerate() {
            if j < 1 || j > p {
                return Err(CoreError::InvalidInput(format!("variable {j} out of range 1..={p}")));
            }
            if owner[j - 1].replace(s).is_some() {
                return Err(CoreError::InvalidInput(format!("variable {j} appears in two parts")));
            }
            if e.scheme().sizes()[t] == 0 {
                unreachable!();
            }
        }
    }
    if owner.iter().any(Option::is_none) {
        return Err(CoreError::InvalidInput("parts do not cover every variable".into()));
    }
    let mut sizes = vec![0usize; p];
    for (vars, e) in parts {
        for (t, &j) in vars.iter().enumerate() {
            sizes[j - 1] = e.scheme().sizes()[t];
        }
    }
    let scheme = VariableScheme::new(sizes)?;
    let m_total: usize = parts.iter().map(|(_, e)| e.terms()).product();
    let mut weights = Vec::with_capacity(m_total);
    let mut arms: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(m_total); p];
    let mut combo = vec![0usize; parts.len()];
    loop {
        let mut w = 1.0;
        for (s, (_, e)) in parts.iter().enumerate() {
            w *= e.weights()[combo[s]];
        }
        weights.push(w);
        for (s, (vars, e)) in parts.iter().enumerate() {
            for (t, &j) in vars.iter().enumerate() {
                arms[j - 1].push(e.arms()[t][combo[s]].clone());
            }
        }
        let mut s = parts.len();
        loop {
            if s == 0 {
                break;
            }
            s -= 1;
            combo[s] += 1;
            if combo[s] < parts[s].1.terms() {
                break;
            }
            combo[s] = 0;
        }
        if combo.iter().all(|&c| c == 0) {
            break;
        }
    }
    let joint = ParafacExpansion::new(scheme, weights, arms)?;
    let tensor = joint.eval()?;
    Ok((tensor, joint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simplex(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        for x in &mut v {
            *x /= s;
        }
        v
    }

    fn random_parafac(rng: &mut ChaCha8Rng, sizes: &[usize], m: usize) -> ParafacExpansion {
        let scheme = VariableScheme::new(sizes.to_vec()).unwrap();
        let weights = simplex(rng, m);
        let arms = sizes
            .iter()
            .map(|&d| (0..m).map(|_| simplex(rng, d)).collect())
            .collect();
        ParafacExpansion::new(scheme, weights, arms).unwrap()
    }

    /// Direct triple-loop evaluator, independent of the production path.
    fn oracle_parafac(e: &ParafacExpansion) -> Vec<f64> {
        let mut out = Vec::new();
        for cell in e.scheme().cells() {
            let mut acc = 0.0;
            for h in 0..e.terms() {
                let mut prod = e.weights()[h];
                for (j, &c) in cell.iter().enumerate() {
                    prod *= e.arms()[j][h][c - 1];
                }
                acc += prod;
            }
            out.push(acc);
        }
        let z: f64 = out.iter().sum();
        out.into_iter().map(|x| x / z).collect()
    }

    #[test]
    fn parafac_eval_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let e = random_parafac(&mut rng, &[3, 2, 4], 3);
        let t = e.eval().unwrap();
        for (a, b) in t.entries().iter().zip(oracle_parafac(&e)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_term_parafac_is_a_product_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let e = random_parafac(&mut rng, &[2, 3], 1);
        let t = e.eval().unwrap();
        for cell in e.scheme().cells() {
            let want = e.arms()[0][0][cell[0] - 1] * e.arms()[1][0][cell[1] - 1];
            assert_abs_diff_eq!(t.get(&cell).unwrap(), want, epsilon = 1e-15);
        }
    }

    #[test]
    fn ctucker_with_one_group_equals_parafac() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sizes = [3usize, 2, 3];
        let m = 4usize;
        let e = random_parafac(&mut rng, &sizes, m);
        let core = ProbabilityTensor::from_entries(
            VariableScheme::new(vec![m]).unwrap(),
            e.weights().to_vec(),
        )
        .unwrap();
        let c = CTuckerExpansion::new(
            e.scheme().clone(),
            vec![1, 1, 1],
            core,
            e.arms().to_vec(),
        )
        .unwrap();
        let diff = c.eval().unwrap().max_abs_diff(&e.eval().unwrap());
        assert!(diff <= 1e-14, "diff {diff}");
    }

    #[test]
    fn ctucker_with_p_groups_equals_tucker() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let sizes = vec![2usize, 3, 2];
        let m = 2usize;
        let scheme = VariableScheme::new(sizes.clone()).unwrap();
        let core_scheme = VariableScheme::uniform(3, m).unwrap();
        let core_entries = simplex(&mut rng, core_scheme.cell_count().unwrap());
        let core = ProbabilityTensor::from_entries(core_scheme, core_entries).unwrap();
        let arms: Vec<Vec<Vec<f64>>> = sizes
            .iter()
            .map(|&d| (0..m).map(|_| simplex(&mut rng, d)).collect())
            .collect();
        let tucker = TuckerExpansion::new(scheme.clone(), core.clone(), arms.clone()).unwrap();
        let ct = CTuckerExpansion::new(scheme, vec![1, 2, 3], core, arms).unwrap();
        let diff = tucker.eval().unwrap().max_abs_diff(&ct.eval().unwrap());
        assert!(diff <= 1e-14, "diff {diff}");
    }

    #[test]
    fn tucker_eval_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let sizes = vec![2usize, 2, 3];
        let m = 2usize;
        let scheme = VariableScheme::new(sizes.clone()).unwrap();
        let core_scheme = VariableScheme::uniform(3, m).unwrap();
        let core_entries = simplex(&mut rng, core_scheme.cell_count().unwrap());
        let core = ProbabilityTensor::from_entries(core_scheme.clone(), core_entries).unwrap();
        let arms: Vec<Vec<Vec<f64>>> = sizes
            .iter()
            .map(|&d| (0..m).map(|_| simplex(&mut rng, d)).collect())
            .collect();
        let e = TuckerExpansion::new(scheme.clone(), core.clone(), arms.clone()).unwrap();
        let t = e.eval().unwrap();
        for cell in scheme.cells() {
            let mut want = 0.0;
            for core_cell in core_scheme.cells() {
                let mut prod = core.get(&core_cell).unwrap();
                for j in 0..3 {
                    prod *= arms[j][core_cell[j] - 1][cell[j] - 1];
                }
                want += prod;
            }
            assert_abs_diff_eq!(t.get(&cell).unwrap(), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn hadamard_witness_tracks_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let a = RankWitness::from_parafac(&random_parafac(&mut rng, &[2, 3], 2));
        let b = RankWitness::from_parafac(&random_parafac(&mut rng, &[2, 3], 3));
        let h = a.hadamard(&b).unwrap();
        assert_eq!(h.terms(), 6);
        let want = a.eval().unwrap().hadamard(&b.eval().unwrap()).unwrap();
        assert!(h.eval().unwrap().max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn add_witness_tracks_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let a = RankWitness::from_parafac(&random_parafac(&mut rng, &[3, 2], 2));
        let b = RankWitness::from_parafac(&random_parafac(&mut rng, &[3, 2], 4));
        let s = a.add(&b).unwrap();
        assert_eq!(s.terms(), 6);
        let want = a.eval().unwrap().add(&b.eval().unwrap()).unwrap();
        assert!(s.eval().unwrap().max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn witness_normalization_recovers_the_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let a = RankWitness::from_parafac(&random_parafac(&mut rng, &[2, 2, 2], 3));
        let b = RankWitness::from_parafac(&random_parafac(&mut rng, &[2, 2, 2], 2));
        let h = a.hadamard(&b).unwrap();
        let (e, mass) = h.normalize().unwrap();
        let direct = h.eval().unwrap();
        assert_abs_diff_eq!(mass, direct.total_mass(), epsilon = 1e-12);
        let renorm = direct.normalize().unwrap();
        assert!(e.eval().unwrap().max_abs_diff(&renorm) <= 1e-12);
    }

    #[test]
    fn two_d_construction_reconstructs_exactly() {
        // baseline outer product perturbed in row 2 and column 3
        let u = [0.5, 1.5, 1.0];
        let v = [2.0, 1.0, 0.5];
        let scheme = VariableScheme::new(vec![3, 3]).unwrap();
        let mut entries = Vec::new();
        for c1 in 1..=3usize {
            for c2 in 1..=3usize {
                let mut x = u[c1 - 1] * v[c2 - 1];
                if c1 == 2 {
                    x += 0.7;
                }
                if c2 == 3 {
                    x *= 1.9;
                }
                entries.push(x);
            }
        }
        let m2 = NonnegTensor::from_entries(scheme, entries).unwrap();
        let w = construct_2d_expansion(&m2, &u, &v, &[2], &[3], 1e-12).unwrap();
        assert_eq!(w.terms(), 3);
        assert!(w.eval().unwrap().max_abs_diff(&m2) <= 1e-12);
    }

    #[test]
    fn two_d_construction_rejects_uncovered_cells() {
        let u = [1.0, 1.0];
        let v = [1.0, 1.0];
        let scheme = VariableScheme::new(vec![2, 2]).unwrap();
        // cell (1,1) differs but h1 = {2}, h2 = {2} leaves it uncovered
        let m2 = NonnegTensor::from_entries(scheme, vec![2.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(construct_2d_expansion(&m2, &u, &v, &[2], &[2], 1e-12).is_err());
    }

    #[test]
    fn join_independent_multiplies_marginals_and_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let e1 = random_parafac(&mut rng, &[2, 3], 2);
        let e2 = random_parafac(&mut rng, &[2, 2], 3);
        // interleave the variable groups: {1,3} and {2,4}
        let (joint, witness) =
            join_independent(&[(vec![1, 3], e1.clone()), (vec![2, 4], e2.clone())]).unwrap();
        assert_eq!(witness.terms(), 6);
        let t1 = e1.eval().unwrap();
        let t2 = e2.eval().unwrap();
        for cell in joint.scheme().cells() {
            let want = t1.get(&[cell[0], cell[2]]).unwrap() * t2.get(&[cell[1], cell[3]]).unwrap();
            assert_abs_diff_eq!(joint.get(&cell).unwrap(), want, epsilon = 1e-13);
        }
        assert!(witness.eval().unwrap().max_abs_diff(&joint) <= 1e-13);
    }

    #[test]
    fn join_rejects_overlap_and_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let e = random_parafac(&mut rng, &[2, 2], 2);
        assert!(join_independent(&[(vec![1, 2], e.clone()), (vec![2, 3], e.clone())]).is_err());
        let f = random_parafac(&mut rng, &[2], 2);
        assert!(join_independent(&[(vec![1], f.clone()), (vec![3], f)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn witness_arithmetic_is_exact(seed in 0u64..1000, ma in 1usize..4, mb in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = RankWitness::from_parafac(&random_parafac(&mut rng, &[2, 3], ma));
            let b = RankWitness::from_parafac(&random_parafac(&mut rng, &[2, 3], mb));
            let h = a.hadamard(&b).unwrap();
            let s = a.add(&b).unwrap();
            prop_assert_eq!(h.terms(), ma * mb);
            prop_assert_eq!(s.terms(), ma + mb);
            let ea = a.eval().unwrap();
            let eb = b.eval().unwrap();
            prop_assert!(h.eval().unwrap().max_abs_diff(&ea.hadamard(&eb).unwrap()) <= 1e-12);
            prop_assert!(s.eval().unwrap().max_abs_diff(&ea.add(&eb).unwrap()) <= 1e-12);
        }
    }
}
