//! Line-oriented text format for circuits.
//!
//! ```text
//! pcreg-v1 <num_vars> <root id>
//! <id> I <var> <value>
//! <id> P <child> <child> ...
//! <id> S <child>:<log theta> <child>:<log theta> ...
//! ```
//!
//! Unit ids are the circuit's topological indices. Parameters are written
//! with 17 significant digits so the decimal round-trip reproduces the exact
//! bits; `-inf` encodes a zero-probability edge. Blank lines and lines
//! starting with `#` are ignored. Variable arities are inferred from the
//! indicator values present in the file (at least 2 per variable).

use super::{Circuit, CircuitBuilder, ParamVector, UnitKind, UnitSpec};
use crate::error::{Error, Result};
use std::fmt::Write as _;

pub const FORMAT_TAG: &str = "pcreg-v1";

pub fn serialize(c: &Circuit, p: &ParamVector) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_TAG} {} {}", c.num_vars(), c.root());
    for u in c.units() {
        match c.kind(u) {
            UnitKind::Input => {
                let (var, value) = c.input_spec(u);
                let _ = writeln!(out, "{u} I {var} {value}");
            }
            UnitKind::Product => {
                let _ = write!(out, "{u} P");
                for ch in c.children(u) {
                    let _ = write!(out, " {ch}");
                }
                out.push('\n');
            }
            UnitKind::Sum => {
                let _ = write!(out, "{u} S");
                for (ch, e) in c.children(u).iter().zip(c.sum_edges(u)) {
                    let t = p.log_theta()[e];
                    if t == f64::NEG_INFINITY {
                        let _ = write!(out, " {ch}:-inf");
                    } else {
                        let _ = write!(out, " {ch}:{t:.17e}");
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn deserialize(text: &str) -> Result<(Circuit, ParamVector)> {
    let parse_err = |line: usize, message: String| Error::Parse { line, message };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty document".into()))?;
    let mut h = header.split_ascii_whitespace();
    let tag = h.next().unwrap_or("");
    if tag != FORMAT_TAG {
        return Err(Error::VersionMismatch {
            found: tag.to_string(),
            expected: FORMAT_TAG.to_string(),
        });
    }
    let num_vars: usize = h
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(header_no, "header: missing variable count".into()))?;
    let root: usize = h
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(header_no, "header: missing root id".into()))?;

    // ids may be sparse; map them to dense spec indices
    let mut id_of = std::collections::HashMap::new();
    let mut specs: Vec<UnitSpec> = Vec::new();
    let mut params: Vec<Option<Vec<f64>>> = Vec::new();
    let mut pending_children: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut last_valid = header_no;

    for (line_no, line) in lines {
        let mut toks = line.split_ascii_whitespace();
        let id: u64 = toks
            .next()
            .unwrap()
            .parse()
            .map_err(|_| parse_err(line_no, format!("expected a unit id (last valid line {last_valid})")))?;
        if id_of.contains_key(&id) {
            return Err(parse_err(line_no, format!("duplicate unit id {id}")));
        }
        let kind = toks
            .next()
            .ok_or_else(|| parse_err(line_no, "missing unit kind".into()))?;
        let spec_idx = specs.len();
        match kind {
            "I" => {
                let var: usize = toks
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(line_no, "input unit: missing variable".into()))?;
                let value: usize = toks
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(line_no, "input unit: missing value".into()))?;
                if var >= num_vars {
                    return Err(parse_err(
                        line_no,
                        format!("variable {var} out of range (num_vars = {num_vars})"),
                    ));
                }
                specs.push(UnitSpec::Input { var, value });
                params.push(None);
            }
            "P" => {
                let children: Vec<u64> = toks
                    .map(|t| {
                        t.parse()
                            .map_err(|_| parse_err(line_no, format!("bad child id `{t}`")))
                    })
                    .collect::<Result<_>>()?;
                if children.is_empty() {
                    return Err(parse_err(line_no, "product unit with no children".into()));
                }
                pending_children.push((spec_idx, children));
                specs.push(UnitSpec::Product { children: vec![] });
                params.push(None);
            }
            "S" => {
                let mut children = Vec::new();
                let mut theta = Vec::new();
                for t in toks {
                    let (ch, lt) = t.split_once(':').ok_or_else(|| {
                        parse_err(line_no, format!("sum edge `{t}` is not <child>:<log theta>"))
                    })?;
                    children.push(ch.parse::<u64>().map_err(|_| {
                        parse_err(line_no, format!("bad child id `{ch}`"))
                    })?);
                    theta.push(lt.parse::<f64>().map_err(|_| {
                        parse_err(line_no, format!("bad log parameter `{lt}`"))
                    })?);
                }
                if children.is_empty() {
                    return Err(parse_err(line_no, "sum unit with no children".into()));
                }
                pending_children.push((spec_idx, children));
                specs.push(UnitSpec::Sum { children: vec![] });
                params.push(Some(theta));
            }
            other => {
                return Err(parse_err(line_no, format!("unknown unit kind `{other}`")));
            }
        }
        id_of.insert(id, spec_idx);
        last_valid = line_no;
    }

    // resolve child ids now that the whole file is read
    for (spec_idx, raw) in pending_children {
        let resolved: Vec<usize> = raw
            .iter()
            .map(|r| {
                id_of.get(r).copied().ok_or_else(|| {
                    parse_err(
                        last_valid,
                        format!("unit {r} referenced but never defined (file may be truncated; last valid line {last_valid})"),
                    )
                })
            })
            .collect::<Result<_>>()?;
        match &mut specs[spec_idx] {
            UnitSpec::Sum { children } | UnitSpec::Product { children } => *children = resolved,
            UnitSpec::Input { .. } => unreachable!(),
        }
    }
    let root_spec = *id_of.get(&(root as u64)).ok_or_else(|| {
        parse_err(
            last_valid,
            format!("root unit {root} missing (file may be truncated; last valid line {last_valid})"),
        )
    })?;

    let mut builder = CircuitBuilder::from_specs(specs);
    builder.replace_params(params);
    let (c, p) = builder.build_with_params(root_spec)?;
    if c.num_vars() > num_vars {
        return Err(parse_err(
            last_valid,
            format!(
                "header declares {num_vars} variables but indicators reference {}",
                c.num_vars()
            ),
        ));
    }
    Ok((c, p))
}
