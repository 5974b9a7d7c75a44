//! Symbolic expansion of one turn of an activation-free network.
//!
//! Every computation node is a polynomial in the current-turn input values
//! and the previous-turn values of whichever nodes feed recurrent edges.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

use super::{EdgeKind, Network, NodeId, NodeKind};

pub const DEFAULT_MAX_TERMS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Input node value at the current turn.
    Input(NodeId),
    /// Any node's value at the previous turn.
    Previous(NodeId),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Input(id) => write!(f, "u{id}"),
            Symbol::Previous(id) => write!(f, "u{id}[t-1]"),
        }
    }
}

/// Sorted `(symbol, exponent)` pairs; the empty term is the constant.
pub type Term = Vec<(Symbol, u32)>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    terms: BTreeMap<Term, f64>,
}

fn multiply_terms(a: &Term, b: &Term) -> Term {
    let mut out: Term = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn symbol(s: Symbol) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(vec![(s, 1)], 1.0);
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Term, f64)> {
        self.terms.iter().map(|(t, &c)| (t, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, term: &Term) -> f64 {
        self.terms.get(term).copied().unwrap_or(0.0)
    }

    /// Adds `c * term`, dropping the term if it cancels to exactly zero.
    pub fn add_term(&mut self, term: Term, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(term) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if *slot.get() == 0.0 {
                    slot.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Polynomial, scale: f64) {
        for (t, c) in other.terms() {
            self.add_term(t.clone(), scale * c);
        }
    }

    pub fn mul(&self, other: &Polynomial, cap: usize) -> Result<Polynomial> {
        let mut out = Polynomial::zero();
        for (ta, ca) in self.terms() {
            for (tb, cb) in other.terms() {
                out.add_term(multiply_terms(ta, tb), ca * cb);
                if out.len() > cap {
                    return Err(Error::TermCapExceeded { cap });
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, exponent: u32, cap: usize) -> Result<Polynomial> {
        let mut out = Polynomial::constant(1.0);
        for _ in 0..exponent {
            out = out.mul(self, cap)?;
        }
        Ok(out)
    }

    pub fn evaluate(&self, value: impl Fn(Symbol) -> f64) -> f64 {
        self.terms()
            .map(|(term, c)| {
                c * term
                    .iter()
                    .map(|&(s, e)| value(s).powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (term, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c:?}")?;
            for (s, e) in term {
                if *e == 1 {
                    write!(f, "*{s}")?;
                } else {
                    write!(f, "*{s}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Polynomial of every output node for a single turn.
///
/// Fails if any activation function other than `none` is configured, or if
/// any intermediate polynomial grows past `max_terms`.
pub fn expand_to_polynomial(
    network: &Network,
    max_terms: usize,
) -> Result<BTreeMap<NodeId, Polynomial>> {
    let topo = network.topology();
    if !topo.activation.is_none() {
        return Err(Error::ActivationPresent);
    }
    let mut polys: Vec<Polynomial> = vec![Polynomial::zero(); topo.node_count()];
    for &x in network.order() {
        let mut acc = match topo.nodes[x].kind {
            NodeKind::Input => Polynomial::symbol(Symbol::Input(x)),
            NodeKind::Sum => Polynomial::zero(),
            NodeKind::Product => Polynomial::constant(1.0),
            NodeKind::Activation => {
                let e = &topo.edges[network.incoming(x)[0]];
                polys[e.from].clone()
            }
        };
        for &ei in network.incoming(x) {
            let e = &topo.edges[ei];
            let source = match e.kind {
                EdgeKind::Recurrent => Polynomial::symbol(Symbol::Previous(e.from)),
                EdgeKind::Instant => polys[e.from].clone(),
            };
            match topo.nodes[x].kind {
                NodeKind::Sum => acc.add_scaled(&source, e.weight.unwrap_or(0.0)),
                NodeKind::Product => {
                    let factor = source.pow(e.multiplicity.unwrap_or(1), max_terms)?;
                    acc = acc.mul(&factor, max_terms)?;
                }
                _ => {}
            }
        }
        if acc.len() > max_terms {
            return Err(Error::TermCapExceeded { cap: max_terms });
        }
        polys[x] = acc;
    }
    Ok(topo
        .outputs
        .iter()
        .map(|&o| (o, polys[o].clone()))
        .collect())
}
