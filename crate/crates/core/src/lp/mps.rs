//! MPS export and import.
//!
//! Output uses the fixed-column layout with eight-character names. Numbers
//! are written in their shortest round-trip form, which can overflow the
//! twelve-character numeric field; every mainstream reader splits on
//! whitespace, and so does [`read_mps`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Sense, SparseLP, Triplet};
use crate::error::{Error, Result};

const OBJ: &str = "COST";

fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        plain
    } else {
        format!("{v:e}")
    }
}

fn row_name(i: usize) -> String {
    format!("R{i:07}")
}

fn col_name(j: usize) -> String {
    format!("C{j:07}")
}

/// Renders the LP as MPS text.
pub fn to_mps_string(lp: &SparseLP, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NAME          {name}");
    s.push_str("ROWS\n");
    let _ = writeln!(s, " N  {OBJ}");
    for (i, sense) in lp.senses.iter().enumerate() {
        let c = match sense {
            Sense::Ge => 'G',
            Sense::Eq => 'E',
            Sense::Le => 'L',
        };
        let _ = writeln!(s, " {c}  {}", row_name(i));
    }

    s.push_str("COLUMNS\n");
    let mut by_col: Vec<Vec<(u32, f64)>> = vec![Vec::new(); lp.num_vars()];
    for t in &lp.triplets {
        by_col[t.col as usize].push((t.row, t.coeff));
    }
    for (j, entries) in by_col.iter_mut().enumerate() {
        entries.sort_by_key(|e| e.0);
        let cn = col_name(j);
        let cost = lp.objective[j];
        if cost != 0.0 {
            let _ = writeln!(s, "    {cn:<8}  {OBJ:<8}  {:>12}", num(cost));
        }
        for &(r, v) in entries.iter() {
            if v != 0.0 {
                let _ = writeln!(s, "    {cn:<8}  {:<8}  {:>12}", row_name(r as usize), num(v));
            }
        }
        if cost == 0.0 && entries.iter().all(|e| e.1 == 0.0) {
            // keep empty columns visible to the reader
            let _ = writeln!(s, "    {cn:<8}  {OBJ:<8}  {:>12}", "0");
        }
    }

    s.push_str("RHS\n");
    for (i, &b) in lp.rhs.iter().enumerate() {
        if b != 0.0 {
            let _ = writeln!(s, "    RHS       {:<8}  {:>12}", row_name(i), num(b));
        }
    }

    s.push_str("BOUNDS\n");
    for (j, (&lo, &up)) in lp.var_lower.iter().zip(&lp.var_upper).enumerate() {
        let cn = col_name(j);
        match (lo.is_finite(), up.is_finite()) {
            (false, false) => {
                let _ = writeln!(s, " FR BND       {cn}");
            }
            (false, true) => {
                let _ = writeln!(s, " MI BND       {cn}");
                let _ = writeln!(s, " UP BND       {cn:<8}  {:>12}", num(up));
            }
            (true, _) => {
                if lo == up {
                    let _ = writeln!(s, " FX BND       {cn:<8}  {:>12}", num(lo));
                    continue;
                }
                if lo != 0.0 {
                    let _ = writeln!(s, " LO BND       {cn:<8}  {:>12}", num(lo));
                }
                if up.is_finite() {
                    let _ = writeln!(s, " UP BND       {cn:<8}  {:>12}", num(up));
                }
            }
        }
    }
    s.push_str("ENDATA\n");
    s
}

pub fn export_lp(lp: &SparseLP, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(to_mps_string(lp, "MFBOUNDS").as_bytes())?;
    f.flush()?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Ranges,
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::ParseError {
        line,
        message: format!("bad number {tok:?}"),
    })
}

/// Parses MPS text (fixed or free layout, minimisation, no ranges or
/// integer markers).
pub fn parse_mps(reader: impl BufRead) -> Result<SparseLP> {
    let mut section = Section::None;
    let mut obj_name = None;
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut senses = Vec::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut objective = Vec::new();
    let mut triplets = Vec::new();
    let mut rhs_entries = Vec::new();
    let mut bounds: Vec<(String, String, Option<f64>, usize)> = Vec::new();

    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = ln + 1;
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        if !line.starts_with(' ') {
            let head = line.split_whitespace().next().unwrap_or("");
            section = match head {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "RANGES" => Section::Ranges,
                "ENDATA" => break,
                other => {
                    return Err(Error::ParseError {
                        line: lineno,
                        message: format!("unknown section {other}"),
                    })
                }
            };
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::ParseError {
            line: lineno,
            message: msg.to_string(),
        };
        match section {
            Section::Rows => {
                let [kind, name] = toks[..] else {
                    return Err(bad("expected row type and name"));
                };
                let sense = match kind {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(name.to_string());
                        }
                        continue;
                    }
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    "L" => Sense::Le,
                    _ => return Err(bad("unknown row type")),
                };
                rows.insert(name.to_string(), senses.len());
                senses.push(sense);
            }
            Section::Columns => {
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(bad("expected column, row, value [, row, value]"));
                }
                let next = cols.len();
                let j = *cols.entry(toks[0].to_string()).or_insert(next);
                if j == objective.len() {
                    objective.push(0.0);
                }
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], lineno)?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        objective[j] += v;
                    } else {
                        let &r = rows.get(pair[0]).ok_or_else(|| bad("unknown row"))?;
                        if v != 0.0 {
                            triplets.push(Triplet {
                                row: r as u32,
                                col: j as u32,
                                coeff: v,
                            });
                        }
                    }
                }
            }
            Section::Rhs => {
                let body = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in body.chunks(2) {
                    if pair.len() != 2 {
                        return Err(bad("expected row, value"));
                    }
                    if Some(pair[0]) == obj_name.as_deref() {
                        continue;
                    }
                    let &r = rows.get(pair[0]).ok_or_else(|| bad("unknown row"))?;
                    rhs_entries.push((r, parse_num(pair[1], lineno)?));
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(bad("short bound line"));
                }
                let value = match toks.get(3) {
                    Some(t) => Some(parse_num(t, lineno)?),
                    None => None,
                };
                bounds.push((toks[0].to_string(), toks[2].to_string(), value, lineno));
            }
            Section::Ranges => return Err(bad("RANGES are not supported")),
            Section::None => return Err(bad("data outside a section")),
        }
    }

    let nv = objective.len();
    let mut rhs = vec![0.0; senses.len()];
    for (r, v) in rhs_entries {
        rhs[r] = v;
    }
    let mut lower = vec![0.0; nv];
    let mut upper = vec![f64::INFINITY; nv];
    for (kind, col, value, line) in bounds {
        let j = *cols.get(&col).ok_or(Error::ParseError {
            line,
            message: format!("unknown column {col}"),
        })?;
        let need = || {
            value.ok_or(Error::ParseError {
                line,
                message: "bound needs a value".into(),
            })
        };
        match kind.as_str() {
            "FR" => {
                lower[j] = f64::NEG_INFINITY;
                upper[j] = f64::INFINITY;
            }
            "MI" => lower[j] = f64::NEG_INFINITY,
            "PL" => upper[j] = f64::INFINITY,
            "LO" => lower[j] = need()?,
            "UP" => upper[j] = need()?,
            "FX" => {
                let v = need()?;
                lower[j] = v;
                upper[j] = v;
            }
            other => {
                return Err(Error::ParseError {
                    line,
                    message: format!("unsupported bound type {other}"),
                })
            }
        }
    }
    SparseLP::generic(objective, triplets, senses, rhs, lower, upper)
}

pub fn read_mps(path: impl AsRef<Path>) -> Result<SparseLP> {
    parse_mps(BufReader::new(std::fs::File::open(path)?))
}
