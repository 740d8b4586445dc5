//! Corner-parametrized log-linear models over categorical variables.
//!
//! A model stores coefficients theta_E(i_E) indexed by a nonempty variable
//! subset E and one level per variable of E. The corner constraint pins
//! theta_E(i_E) = 0 whenever some coordinate sits at level 1, so only keys
//! with all levels >= 2 are representable; zeros are represented by absence.
//! The cell log-probability is theta_0 plus the sum of all stored
//! coefficients whose key agrees with the cell.
//!
//! Weak hierarchicality: a zero coefficient forces every coefficient of a
//! superset key with matching levels to zero. On the stored support this
//! becomes: every nonempty sub-key of a stored key must be stored. The
//! classical hierarchical property is stricter: the set of present subsets
//! must be downward closed *and* each present subset must carry its full
//! corner level family, so the support is exactly the one generated by a
//! generator. For binary variables the two properties coincide.

use crate::error::{CoreError, Result};
use crate::scheme::{VariableScheme, DEFAULT_CELL_CAP};
use crate::tensor::{NonnegTensor, ProbabilityTensor};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::{BTreeMap, BTreeSet};

/// One interaction key: variables strictly increasing, one level (>= 2)
/// per variable. Order 1 keys are main effects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InteractionKey {
    vars: Vec<usize>,
    levels: Vec<usize>,
}

impl InteractionKey {
    pub fn new(vars: Vec<usize>, levels: Vec<usize>) -> Result<Self> {
        if vars.is_empty() {
            return Err(CoreError::InvalidInput("interaction key needs at least one variable".into()));
        }
        if vars.len() != levels.len() {
            return Err(CoreError::InvalidInput("key vars and levels differ in length".into()));
        }
        if vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::InvalidInput("key variables must be strictly increasing".into()));
        }
        if vars.iter().any(|&j| j < 1) {
            return Err(CoreError::InvalidInput("key variables are 1-based".into()));
        }
        if levels.iter().any(|&l| l < 2) {
            return Err(CoreError::InvalidInput(
                "corner constraint: key levels must be >= 2 (level-1 coefficients are fixed to 0)".into(),
            ));
        }
        Ok(InteractionKey { vars, levels })
    }

    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// Number of participating variables.
    pub fn order(&self) -> usize {
        self.vars.len()
    }

    /// True when the key's coordinates agree with the (full, 1-based) cell.
    pub fn matches(&self, cell: &[usize]) -> bool {
        self.vars.iter().zip(&self.levels).all(|(&j, &l)| cell[j - 1] == l)
    }

    /// All nonempty proper sub-keys (subset of variables, same levels).
    pub fn proper_subkeys(&self) -> Vec<InteractionKey> {
        let k = self.vars.len();
        let mut out = Vec::new();
        // bitmask over participating variables; skip empty and full sets
        for mask in 1..((1usize << k) - 1) {
            let mut vars = Vec::new();
            let mut levels = Vec::new();
            for t in 0..k {
                if mask & (1 << t) != 0 {
                    vars.push(self.vars[t]);
                    levels.push(self.levels[t]);
                }
            }
            out.push(InteractionKey { vars, levels });
        }
        out
    }
}

/// Interaction support of a model, from the perspective of the rank
/// machinery: all order >= 2 keys, the order-2 subset, and for each
/// variable the levels that appear in some order-2 key (for weakly
/// hierarchical models every higher-order key projects onto stored
/// order-2 keys, so two-way terms determine the interacting levels).
#[derive(Debug, Clone)]
pub struct SupportSummary {
    p: usize,
    /// All stored keys of order >= 2.
    pub interactions: BTreeSet<InteractionKey>,
    /// Stored keys of order exactly 2.
    pub pairwise: BTreeSet<InteractionKey>,
    /// Per variable (index 0 = variable 1): levels occurring in some
    /// pairwise key.
    pub interacting_levels: Vec<BTreeSet<usize>>,
}

impl SupportSummary {
    /// Variables with no interacting levels at all.
    pub fn inactive(&self) -> Vec<usize> {
        (1..=self.p).filter(|&j| self.interacting_levels[j - 1].is_empty()).collect()
    }

    /// Variables that interact with at least one other variable.
    pub fn active(&self) -> Vec<usize> {
        (1..=self.p).filter(|&j| !self.interacting_levels[j - 1].is_empty()).collect()
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearModel {
    scheme: VariableScheme,
    /// Normalizing constant; `None` means "recompute on evaluation".
    theta0: Option<f64>,
    theta: BTreeMap<InteractionKey, f64>,
}

impl LogLinearModel {
    pub fn new(scheme: VariableScheme) -> Self {
        LogLinearModel { scheme, theta0: None, theta: BTreeMap::new() }
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn theta0(&self) -> Option<f64> {
        self.theta0
    }

    pub fn set_theta0(&mut self, theta0: Option<f64>) {
        self.theta0 = theta0;
    }

    /// Inserts or updates a coefficient. Setting 0 removes the key
    /// (absence encodes zero). Key coordinates are validated against the
    /// scheme.
    pub fn set(&mut self, key: InteractionKey, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(CoreError::Numeric(format!("non-finite coefficient {value}")));
        }
        if key.vars.iter().any(|&j| j > self.scheme.p()) {
            return Err(CoreError::InvalidInput(format!(
                "key variable out of range 1..={}",
                self.scheme.p()
            )));
        }
        for (&j, &l) in key.vars.iter().zip(&key.levels) {
            if l > self.scheme.size_of(j) {
                return Err(CoreError::InvalidInput(format!(
                    "level {l} out of range for variable {j} (d_j = {})",
                    self.scheme.size_of(j)
                )));
            }
        }
        if value == 0.0 {
            self.theta.remove(&key);
        } else {
            self.theta.insert(key, value);
        }
        Ok(())
    }

    pub fn get(&self, key: &InteractionKey) -> f64 {
        self.theta.get(key).copied().unwrap_or(0.0)
    }

    pub fn coefficients(&self) -> &BTreeMap<InteractionKey, f64> {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// First weak-hierarchy violation on the stored support: a stored key
    /// together with a missing (hence zero) sub-key. `None` means weakly
    /// hierarchical. With `ignore_main_effects`, order-1 sub-keys are not
    /// required to be present.
    pub fn weak_hierarchy_violation(
        &self,
        ignore_main_effects: bool,
    ) -> Option<(InteractionKey, InteractionKey)> {
        for key in self.theta.keys() {
            for sub in key.proper_subkeys() {
                if ignore_main_effects && sub.order() == 1 {
                    continue;
                }
                if !self.theta.contains_key(&sub) {
                    return Some((key.clone(), sub));
                }
            }
        }
        None
    }

    pub fn is_weakly_hierarchical(&self) -> bool {
        self.weak_hierarchy_violation(false).is_none()
    }

    /// Classical hierarchical property: present subsets are downward closed
    /// and every present subset carries all of its corner level
    /// combinations, i.e. the support is generated by a generator.
    pub fn is_hierarchical(&self) -> bool {
        let mut present: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for key in self.theta.keys() {
            *present.entry(key.vars.clone()).or_insert(0) += 1;
        }
        for (vars, &count) in &present {
            let full: usize = vars.iter().map(|&j| self.scheme.size_of(j) - 1).product();
            if count != full {
                return false;
            }
            if vars.len() > 1 {
                // downward closure over variable subsets
                let k = vars.len();
                for mask in 1..((1usize << k) - 1) {
                    let sub: Vec<usize> =
                        (0..k).filter(|t| mask & (1 << t) != 0).map(|t| vars[t]).collect();
                    if !present.contains_key(&sub) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn support_summary(&self) -> SupportSummary {
        let p = self.scheme.p();
        let mut interactions = BTreeSet::new();
        let mut pairwise = BTreeSet::new();
        let mut interacting_levels = vec![BTreeSet::new(); p];
        for key in self.theta.keys() {
            if key.order() >= 2 {
                interactions.insert(key.clone());
            }
            if key.order() == 2 {
                pairwise.insert(key.clone());
                for (&j, &l) in key.vars.iter().zip(&key.levels) {
                    interacting_levels[j - 1].insert(l);
                }
            }
        }
        SupportSummary { p, interactions, pairwise, interacting_levels }
    }

    /// Per-cell sum of matching coefficients, excluding theta_0.
    fn cell_scores(&self) -> Result<Vec<f64>> {
        let n = self.scheme.cell_count_capped(DEFAULT_CELL_CAP)?;
        let mut scores = vec![0.0f64; n];
        let p = self.scheme.p();
        // strides, variable-major
        let mut strides = vec![1usize; p];
        for j in (0..p.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * self.scheme.sizes()[j + 1];
        }
        for (key, &value) in &self.theta {
            let mut base = 0usize;
            let mut in_key = vec![false; p];
            for (&j, &l) in key.vars.iter().zip(&key.levels) {
                base += (l - 1) * strides[j - 1];
                in_key[j - 1] = true;
            }
            let free: Vec<(usize, usize)> = (0..p)
                .filter(|&t| !in_key[t])
                .map(|t| (strides[t], self.scheme.sizes()[t]))
                .collect();
            // odometer over the free variables
            let mut counters = vec![0usize; free.len()];
            loop {
                let off: usize =
                    base + counters.iter().zip(&free).map(|(&c, &(s, _))| c * s).sum::<usize>();
                scores[off] += value;
                let mut t = free.len();
                loop {
                    if t == 0 {
                        break;
                    }
                    t -= 1;
                    counters[t] += 1;
                    if counters[t] < free[t].1 {
                        break;
                    }
                    counters[t] = 0;
                }
                if counters.iter().all(|&c| c == 0) {
                    break;
                }
            }
        }
        Ok(scores)
    }

    /// Normalized probability tensor plus the theta_0 that achieves the
    /// normalization. Uses max-subtracted log-sum-exp, so arbitrary
    /// coefficient magnitudes cannot overflow; cells may underflow to 0.
    pub fn tensor(&self) -> Result<(ProbabilityTensor, f64)> {
        let scores = self.cell_scores()?;
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = scores.iter().map(|&s| (s - max).exp()).sum();
        if !sum_exp.is_finite() || sum_exp <= 0.0 {
            return Err(CoreError::Numeric("normalization failed".into()));
        }
        let log_z = max + sum_exp.ln();
        let entries: Vec<f64> = scores.iter().map(|&s| (s - log_z).exp()).collect();
        let t = ProbabilityTensor::from_unnormalized(self.scheme.clone(), entries)?;
        Ok((t, -log_z))
    }

    /// Unnormalized mass exp(theta_0 + score) with the stored theta_0
    /// (0 when unset). Errors on overflow.
    pub fn tensor_raw(&self) -> Result<NonnegTensor> {
        let theta0 = self.theta0.unwrap_or(0.0);
        let scores = self.cell_scores()?;
        let mut entries = Vec::with_capacity(scores.len());
        for s in scores {
            let v = (s + theta0).exp();
            if !v.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "exp overflow at score {s} + theta0 {theta0}"
                )));
            }
            entries.push(v);
        }
        NonnegTensor::from_entries(self.scheme.clone(), entries)
    }

    /// Inverts a strictly positive probability tensor into corner
    /// coefficients via the per-axis finite-difference (Moebius) transform:
    /// theta_E(i_E) = sum over F subseteq E of (-1)^{|E \ F|} log pi(cell
    /// matching i on F, level 1 elsewhere). Coefficients that come out
    /// exactly 0.0 are absent; small ones are kept (pruning is a separate,
    /// caller-driven step).
    pub fn from_tensor(t: &ProbabilityTensor) -> Result<LogLinearModel> {
        if !t.is_strictly_positive() {
            return Err(CoreError::Numeric(
                "inversion needs strictly positive entries".into(),
            ));
        }
        let scheme = t.scheme().clone();
        let p = scheme.p();
        let n = scheme.cell_count()?;
        let mut g: Vec<f64> = t.entries().iter().map(|&x| x.ln()).collect();
        let mut strides = vec![1usize; p];
        for j in (0..p.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * scheme.sizes()[j + 1];
        }
        // per-axis differences; cells at level 1 stay untouched within a
        // pass, so in-place updates are safe
        for j in 0..p {
            let d = scheme.sizes()[j];
            let s = strides[j];
            for off in 0..n {
                let level = (off / s) % d; // 0-based
                if level >= 1 {
                    g[off] -= g[off - level * s];
                }
            }
        }
        let mut model = LogLinearModel::new(scheme.clone());
        for (off, cell) in scheme.cells().enumerate() {
            let vars: Vec<usize> =
                (1..=p).filter(|&j| cell[j - 1] >= 2).collect();
            if vars.is_empty() {
                model.theta0 = Some(g[off]);
                continue;
            }
            if g[off] != 0.0 {
                let levels = vars.iter().map(|&j| cell[j - 1]).collect();
                model.theta.insert(InteractionKey { vars, levels }, g[off]);
            }
        }
        Ok(model)
    }

    /// Copy with all coefficients of magnitude < `eps` removed.
    pub fn prune(&self, eps: f64) -> LogLinearModel {
        let theta =
            self.theta.iter().filter(|(_, &v)| v.abs() >= eps).map(|(k, &v)| (k.clone(), v)).collect();
        LogLinearModel { scheme: self.scheme.clone(), theta0: self.theta0, theta }
    }

    /// Number of stored coefficients with magnitude below `eps`.
    pub fn count_below(&self, eps: f64) -> usize {
        self.theta.values().filter(|v| v.abs() < eps).count()
    }

    /// Hierarchical model generated by the maximal cliques of `graph`:
    /// every nonempty subset of a clique contributes its full corner level
    /// family, with coefficients drawn iid N(0, sigma2). Main effects of
    /// isolated vertices are included (a vertex is its own clique).
    pub fn random_from_graph<R: Rng>(
        scheme: &VariableScheme,
        graph: &Graph,
        sigma2: f64,
        rng: &mut R,
    ) -> Result<LogLinearModel> {
        if graph.n() != scheme.p() {
            return Err(CoreError::InvalidInput(format!(
                "graph has {} vertices, scheme has {} variables",
                graph.n(),
                scheme.p()
            )));
        }
        if sigma2 <= 0.0 {
            return Err(CoreError::InvalidInput("sigma2 must be positive".into()));
        }
        let mut keys: BTreeSet<InteractionKey> = BTreeSet::new();
        for clique in graph.maximal_cliques() {
            let k = clique.len();
            for mask in 1..(1usize << k) {
                let vars: Vec<usize> =
                    (0..k).filter(|t| mask & (1 << t) != 0).map(|t| clique[t]).collect();
                // all corner level combinations of this subset
                let sizes: Vec<usize> = vars.iter().map(|&j| scheme.size_of(j)).collect();
                let mut levels = vec![2usize; vars.len()];
                loop {
                    keys.insert(InteractionKey { vars: vars.clone(), levels: levels.clone() });
                    let mut t = levels.len();
                    loop {
                        if t == 0 {
                            break;
                        }
                        t -= 1;
                        levels[t] += 1;
                        if levels[t] <= sizes[t] {
                            break;
                        }
                        levels[t] = 2;
                    }
                    if levels.iter().all(|&l| l == 2) {
                        break;
                    }
                }
            }
        }
        let normal = Normal::new(0.0, sigma2.sqrt())
            .map_err(|e| CoreError::InvalidInput(e.to_string()))?;
        let mut model = LogLinearModel::new(scheme.clone());
        for key in keys {
            let mut v = normal.sample(rng);
            while v == 0.0 {
                v = normal.sample(rng);
            }
            model.theta.insert(key, v);
        }
        Ok(model)
    }
}

/// Simple undirected graph on 1-based vertices 1..=n (n <= 64), used to
/// describe interaction structures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<u64>,
}

impl Graph {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(CoreError::InvalidInput(format!("graph size {n} outside 1..=64")));
        }
        Ok(Graph { n, adj: vec![0; n] })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::new(n)?;
        for &(a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(CoreError::InvalidInput(format!("self-loop at vertex {a}")));
        }
        if a < 1 || a > self.n || b < 1 || b > self.n {
            return Err(CoreError::InvalidInput(format!("edge ({a},{b}) out of range 1..={}", self.n)));
        }
        self.adj[a - 1] |= 1 << (b - 1);
        self.adj[b - 1] |= 1 << (a - 1);
        Ok(())
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a >= 1 && b >= 1 && a <= self.n && b <= self.n && self.adj[a - 1] & (1 << (b - 1)) != 0
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 1..=self.n {
            for b in (a + 1)..=self.n {
                if self.has_edge(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Maximal cliques via Bron-Kerbosch with pivoting, returned sorted
    /// (members ascending, cliques in lexicographic order). Isolated
    /// vertices appear as singleton cliques.
    pub fn maximal_cliques(&self) -> Vec<Vec<usize>> {
        fn expand(g: &Graph, r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) {
            if p == 0 && x == 0 {
                out.push(r);
                return;
            }
            // pivot: vertex of p | x with most neighbours in p
            let mut pivot = 0usize;
            let mut best = -1i64;
            let mut px = p | x;
            while px != 0 {
                let v = px.trailing_zeros() as usize;
                px &= px - 1;
                let deg = (g.adj[v] & p).count_ones() as i64;
                if deg > best {
                    best = deg;
                    pivot = v;
                }
            }
            let mut candidates = p & !g.adj[pivot];
            while candidates != 0 {
                let v = candidates.trailing_zeros() as usize;
                candidates &= candidates - 1;
                let bit = 1u64 << v;
                expand(g, r | bit, p & g.adj[v], x & g.adj[v], out);
                p &= !bit;
                x |= bit;
            }
        }
        let all = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let mut masks = Vec::new();
        expand(self, 0, all, 0, &mut masks);
        let mut cliques: Vec<Vec<usize>> = masks
            .into_iter()
            .map(|m| (0..self.n).filter(|&v| m & (1 << v) != 0).map(|v| v + 1).collect())
            .collect();
        cliques.sort();
        cliques
    }
}
