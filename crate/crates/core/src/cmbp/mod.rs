//! Constrained polynomial belief-update rules.
//!
//! A rule maps a feature vector `(f0, ..., fD)` to the next belief through an
//! order-`n` polynomial `sum g[k1..kn] * f[k1] * ... * f[kn]` over sorted index
//! tuples `k1 <= ... <= kn`. In the six-feature layout the features are the
//! previous belief, the four SLU score sums and the constant 1.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};

pub mod constraints;
pub mod hill_climb;
pub mod io;
pub mod layout;

pub use constraints::{
    check_constraints, sample_feasible, ConstraintReport, ConstraintResult, DEFAULT_SAMPLES,
};
pub use hill_climb::{hill_climb, HillClimbConfig, HillClimbResult, Move};
pub use io::{format_coefficients, parse_coefficients, read_coefficients, write_coefficients};
pub use layout::{
    build_dst_topology, build_layered_topology, init_rpn_from_cmbp, DstLayout,
};

/// Index of the constant-1 feature in both DST layouts.
pub const CONSTANT_FEATURE: usize = 5;

pub const DST_FEATURE_NAMES: [&str; 10] = [
    "b_prev",
    "p_pos",
    "p_neg",
    "p_pos_other",
    "p_neg_other",
    "one",
    "canthelp",
    "select",
    "inform",
    "deny",
];

/// A sorted multiset of feature indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<usize>);

impl Monomial {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Monomial(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Repeated factors are raised with `powi`, the way the network's product
    /// nodes compute them, so both give bit-identical values.
    pub fn evaluate(&self, features: &[f64]) -> f64 {
        self.0
            .iter()
            .dedup_with_count()
            .map(|(n, &k)| features[k].powi(n as i32))
            .product()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(&index)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// All sorted index tuples of length `order` over `0..feature_count`, in
/// lexicographic order.
pub fn enumerate_monomials(feature_count: usize, order: usize) -> Vec<Monomial> {
    (0..feature_count)
        .combinations_with_replacement(order)
        .map(Monomial)
        .collect()
}

pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialModel {
    feature_count: usize,
    order: usize,
    coefficients: BTreeMap<Monomial, f64>,
    feature_names: Vec<String>,
}

impl PolynomialModel {
    pub fn new(feature_count: usize, order: usize) -> Result<Self> {
        if feature_count == 0 || order == 0 {
            return Err(Error::InvalidConfig(format!(
                "a polynomial model needs at least one feature and order >= 1 (got {feature_count}, {order})"
            )));
        }
        let feature_names = if feature_count <= DST_FEATURE_NAMES.len() && feature_count >= 6 {
            DST_FEATURE_NAMES[..feature_count]
                .iter()
                .map(|s| s.to_string())
                .collect()
        } else {
            (0..feature_count).map(|i| format!("f{i}")).collect()
        };
        Ok(PolynomialModel {
            feature_count,
            order,
            coefficients: BTreeMap::new(),
            feature_names,
        })
    }

    /// `b' = b + P+ - b P+`, i.e. `1 - (1 - b)(1 - P+)`, written at order 3
    /// by padding each monomial with the constant feature.
    pub fn demo_rule() -> Self {
        let mut m = PolynomialModel::new(6, 3).expect("valid shape");
        m.set(Monomial::new(vec![0, 5, 5]), 1.0).expect("valid");
        m.set(Monomial::new(vec![1, 5, 5]), 1.0).expect("valid");
        m.set(Monomial::new(vec![0, 1, 5]), -1.0).expect("valid");
        m
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn is_valid_monomial(&self, m: &Monomial) -> bool {
        m.order() == self.order && m.0.iter().all(|&k| k < self.feature_count)
    }

    /// Sets a coefficient; a zero value removes the entry.
    pub fn set(&mut self, monomial: Monomial, g: f64) -> Result<()> {
        if !self.is_valid_monomial(&monomial) {
            return Err(Error::InvalidConfig(format!(
                "monomial {monomial} is not valid for {} features at order {}",
                self.feature_count, self.order
            )));
        }
        if !g.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "coefficient of {monomial} is not finite"
            )));
        }
        if g == 0.0 {
            self.coefficients.remove(&monomial);
        } else {
            self.coefficients.insert(monomial, g);
        }
        Ok(())
    }

    pub fn get(&self, monomial: &Monomial) -> f64 {
        self.coefficients.get(monomial).copied().unwrap_or(0.0)
    }

    /// Nonzero coefficients in lexicographic monomial order.
    pub fn coefficients(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.coefficients.iter().map(|(m, &g)| (m, g))
    }

    pub fn nonzero_count(&self) -> usize {
        self.coefficients.len()
    }

    pub fn evaluate(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_count {
            return Err(Error::LengthMismatch {
                expected: self.feature_count,
                got: features.len(),
            });
        }
        Ok(self
            .coefficients
            .iter()
            .map(|(m, &g)| g * m.evaluate(features))
            .sum())
    }

    /// Exact partial derivative with respect to one feature.
    pub fn derivative(&self, feature: usize) -> Derivative {
        let mut terms: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (m, &g) in &self.coefficients {
            let count = m.0.iter().filter(|&&k| k == feature).count();
            if count == 0 {
                continue;
            }
            let mut reduced = m.0.clone();
            let pos = reduced.iter().position(|&k| k == feature).expect("present");
            reduced.remove(pos);
            *terms.entry(reduced).or_insert(0.0) += g * count as f64;
        }
        Derivative { terms }
    }

    /// Rewrites every monomial at a higher order by multiplying with the
    /// constant feature, which leaves the polynomial's value unchanged.
    pub fn pad_to_order(&self, order: usize, constant_index: usize) -> Result<Self> {
        if order < self.order || constant_index >= self.feature_count {
            return Err(Error::InvalidConfig(format!(
                "cannot pad order {} to {order} with constant feature {constant_index}",
                self.order
            )));
        }
        let mut out = PolynomialModel::new(self.feature_count, order)?;
        out.feature_names = self.feature_names.clone();
        for (m, g) in self.coefficients() {
            let mut idx = m.0.clone();
            idx.resize(order, constant_index);
            let padded = Monomial::new(idx);
            let prev = out.get(&padded);
            out.set(padded, prev + g)?;
        }
        Ok(out)
    }
}

/// Derivative polynomial as `reduced index tuple -> coefficient`.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivative {
    terms: BTreeMap<Vec<usize>, f64>,
}

impl Derivative {
    pub fn evaluate(&self, features: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(idx, &c)| c * idx.iter().map(|&k| features[k]).product::<f64>())
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|&c| c == 0.0)
    }
}
