//! Plain-text coefficient files.
//!
//! ```text
//! cmbp 6 3
//! 0 5 5 1.0
//! 1 5 5 1.0
//! 0 1 5 -1.0
//! ```
//!
//! The header gives the feature count and the order; each following line is
//! one sorted index tuple and its coefficient. Blank lines and `#` comments
//! are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Monomial, PolynomialModel};

pub fn parse_coefficients(text: &str) -> Result<PolynomialModel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing `cmbp <features> <order>` header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (feature_count, order) = match fields.as_slice() {
        ["cmbp", d, n] => (
            d.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("bad feature count `{d}`")))?,
            n.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("bad order `{n}`")))?,
        ),
        _ => return Err(Error::parse(line_no, "expected header `cmbp <features> <order>`")),
    };
    let mut model = PolynomialModel::new(feature_count, order)
        .map_err(|e| Error::parse(line_no, e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();

    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != order + 1 {
            return Err(Error::parse(
                line_no,
                format!("expected {order} indices and a coefficient, got {} fields", fields.len()),
            ));
        }
        let mut idx = Vec::with_capacity(order);
        for f in &fields[..order] {
            let k: usize = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad index `{f}`")))?;
            if k >= feature_count {
                return Err(Error::parse(
                    line_no,
                    format!("index {k} out of range for {feature_count} features"),
                ));
            }
            idx.push(k);
        }
        if idx.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::parse(line_no, "indices must be sorted"));
        }
        let g: f64 = fields[order]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad coefficient `{}`", fields[order])))?;
        if !g.is_finite() {
            return Err(Error::parse(line_no, "coefficient is not finite"));
        }
        let mono = Monomial::new(idx);
        if !seen.insert(mono.clone()) {
            return Err(Error::parse(line_no, format!("duplicate monomial {mono}")));
        }
        model.set(mono, g)?;
    }
    Ok(model)
}

/// Nonzero coefficients only, in lexicographic monomial order.
pub fn format_coefficients(model: &PolynomialModel) -> String {
    let mut out = format!("cmbp {} {}\n", model.feature_count(), model.order());
    for (m, g) in model.coefficients() {
        let idx: Vec<String> = m.indices().iter().map(|k| k.to_string()).collect();
        let _ = writeln!(out, "{} {g:?}", idx.join(" "));
    }
    out
}

pub fn read_coefficients(path: impl AsRef<Path>) -> Result<PolynomialModel> {
    parse_coefficients(&fs::read_to_string(path)?)
}

pub fn write_coefficients(path: impl AsRef<Path>, model: &PolynomialModel) -> Result<()> {
    fs::write(path, format_coefficients(model))?;
    Ok(())
}
