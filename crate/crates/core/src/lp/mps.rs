//! Fixed-format MPS reading and writing.
//!
//! Classical MPS has no objective sense; the writer records it in a comment
//! line `* SENSE: MAX` (or `MIN`) which the reader honours, along with the
//! free-MPS `OBJSENSE` section. A constant objective offset is carried as the
//! negated RHS entry of the objective row.
//!
//! Values are printed with the shortest representation that round-trips
//! exactly. Those longer than the 12-character field spill past column 36;
//! the reader tokenizes on whitespace so both layouts are accepted.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{Column, LpError, LpProblem, Relation, Row, Sense};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("MPS file has no {0} section")]
    MissingSection(&'static str),
    #[error(transparent)]
    Problem(#[from] LpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> MpsError {
    MpsError::Parse {
        line,
        message: message.into(),
    }
}

const OBJ_ROW: &str = "COST";

fn usable_names<'a>(names: impl Iterator<Item = Option<&'a str>>, reserved: &str) -> bool {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        match n {
            Some(s)
                if !s.is_empty()
                    && s.len() <= 8
                    && !s.contains(char::is_whitespace)
                    && s != reserved
                    && seen.insert(s) => {}
            _ => return false,
        }
    }
    true
}

fn fmt_value(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        format!("{s:>12}")
    } else {
        s
    }
}

fn entry_line(out: &mut String, code: &str, name: &str, target: &str, value: f64) {
    let _ = writeln!(
        out,
        " {code:<2} {name:<8}  {target:<8}  {}",
        fmt_value(value)
    );
}

/// Serializes a problem. Row and column labels are kept when every label
/// is present, unique and at most eight characters; otherwise all are
/// replaced by generated `R0000001` / `C0000001` names.
pub fn to_mps_string(problem: &LpProblem) -> String {
    let row_names: Vec<String> =
        if usable_names(problem.rows().iter().map(|r| r.name.as_deref()), OBJ_ROW) {
            problem.rows().iter().map(|r| r.name.clone().unwrap()).collect()
        } else {
            (1..=problem.n_rows()).map(|i| format!("R{i:07}")).collect()
        };
    let col_names: Vec<String> =
        if usable_names(problem.columns().iter().map(|c| c.name.as_deref()), "") {
            problem
                .columns()
                .iter()
                .map(|c| c.name.clone().unwrap())
                .collect()
        } else {
            (1..=problem.n_vars()).map(|j| format!("C{j:07}")).collect()
        };

    // column-wise view of the rows
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); problem.n_vars()];
    for (i, row) in problem.rows().iter().enumerate() {
        for &(j, a) in &row.entries {
            by_col[j].push((i, a));
        }
    }

    let mut out = String::new();
    let sense = match problem.sense() {
        Sense::Maximize => "MAX",
        Sense::Minimize => "MIN",
    };
    let _ = writeln!(out, "* SENSE: {sense}");
    let name = problem
        .name()
        .filter(|n| !n.is_empty() && !n.contains(char::is_whitespace))
        .unwrap_or("LP");
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for (row, name) in problem.rows().iter().zip(&row_names) {
        let code = match row.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(out, " {code}  {name}");
    }
    out.push_str("COLUMNS\n");
    for (j, col) in problem.columns().iter().enumerate() {
        let cname = &col_names[j];
        if col.cost != 0.0 || by_col[j].is_empty() {
            entry_line(&mut out, "", cname, OBJ_ROW, col.cost);
        }
        for &(i, a) in &by_col[j] {
            entry_line(&mut out, "", cname, &row_names[i], a);
        }
    }
    out.push_str("RHS\n");
    if problem.offset() != 0.0 {
        entry_line(&mut out, "", "RHS", OBJ_ROW, -problem.offset());
    }
    for (row, name) in problem.rows().iter().zip(&row_names) {
        if row.rhs != 0.0 {
            entry_line(&mut out, "", "RHS", name, row.rhs);
        }
    }
    out.push_str("RANGES\n");
    out.push_str("BOUNDS\n");
    for (col, cname) in problem.columns().iter().zip(&col_names) {
        let (l, u) = (col.lower, col.upper);
        if l == u {
            entry_line(&mut out, "FX", "BND", cname, l);
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND       {cname}");
            }
            (false, true) => {
                let _ = writeln!(out, " MI BND       {cname}");
                entry_line(&mut out, "UP", "BND", cname, u);
            }
            (true, _) => {
                if l != 0.0 {
                    entry_line(&mut out, "LO", "BND", cname, l);
                }
                if u.is_finite() {
                    entry_line(&mut out, "UP", "BND", cname, u);
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps(problem: &LpProblem, path: impl AsRef<Path>) -> Result<(), MpsError> {
    std::fs::write(path, to_mps_string(problem))?;
    Ok(())
}

pub fn read_mps(path: impl AsRef<Path>) -> Result<LpProblem, MpsError> {
    parse_mps(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    None,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

fn number(tok: &str, line: usize) -> Result<f64, MpsError> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid number `{tok}`")))
}

pub fn parse_mps(text: &str) -> Result<LpProblem, MpsError> {
    let mut sense = Sense::Minimize;
    let mut name: Option<String> = None;
    let mut section = Section::None;
    let mut seen_columns = false;
    let mut seen_rows = false;

    let mut obj_name: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Row> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut columns: Vec<Column> = Vec::new();
    let mut offset = 0.0;

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('*') {
            let c = comment.trim().to_ascii_uppercase();
            if let Some(s) = c.strip_prefix("SENSE:") {
                match s.trim() {
                    "MAX" | "MAXIMIZE" => sense = Sense::Maximize,
                    "MIN" | "MINIMIZE" => sense = Sense::Minimize,
                    other => return Err(parse_err(line_no, format!("unknown sense `{other}`"))),
                }
            }
            continue;
        }
        let header = !raw.starts_with(' ') && !raw.starts_with('\t');
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if header {
            section = match toks[0] {
                "NAME" => {
                    name = toks.get(1).map(|s| s.to_string());
                    Section::Name
                }
                "OBJSENSE" => {
                    if let Some(s) = toks.get(1) {
                        sense = parse_sense(s, line_no)?;
                    }
                    Section::ObjSense
                }
                "ROWS" => {
                    seen_rows = true;
                    Section::Rows
                }
                "COLUMNS" => {
                    seen_columns = true;
                    Section::Columns
                }
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => {
                    return Err(parse_err(
                        line_no,
                        format!("malformed section header `{other}`"),
                    ))
                }
            };
            if section == Section::End {
                break;
            }
            continue;
        }
        match section {
            Section::None | Section::Name | Section::End => {
                return Err(parse_err(line_no, "data line outside of a section"));
            }
            Section::ObjSense => sense = parse_sense(toks[0], line_no)?,
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(parse_err(line_no, "ROWS entry needs a type and a name"));
                }
                let rname = toks[1].to_string();
                let relation = match toks[0] {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(rname);
                        }
                        continue;
                    }
                    "L" => Relation::Le,
                    "G" => Relation::Ge,
                    "E" => Relation::Eq,
                    other => return Err(parse_err(line_no, format!("unknown row type `{other}`"))),
                };
                if row_index.insert(rname.clone(), rows.len()).is_some() {
                    return Err(parse_err(line_no, format!("duplicate row `{rname}`")));
                }
                rows.push(Row::new(Vec::new(), relation, 0.0).named(rname));
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1].contains("MARKER") {
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(parse_err(line_no, "COLUMNS entry needs 3 or 5 fields"));
                }
                let cname = toks[0];
                let j = match col_index.get(cname) {
                    Some(&j) => j,
                    None => {
                        columns.push(Column::new(0.0, f64::INFINITY, 0.0).named(cname));
                        col_index.insert(cname.to_string(), columns.len() - 1);
                        columns.len() - 1
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = number(pair[1], line_no)?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        columns[j].cost = v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        if rows[i].entries.iter().any(|e| e.0 == j) {
                            return Err(parse_err(
                                line_no,
                                format!("duplicate entry for `{cname}` in row `{}`", pair[0]),
                            ));
                        }
                        rows[i].entries.push((j, v));
                    } else {
                        return Err(parse_err(line_no, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Rhs => {
                // optional set name: 2 or 4 fields without it, 3 or 5 with it
                let fields = if toks.len() % 2 == 1 {
                    &toks[1..]
                } else {
                    &toks[..]
                };
                if fields.is_empty() {
                    return Err(parse_err(line_no, "empty RHS entry"));
                }
                for pair in fields.chunks(2) {
                    if pair.len() != 2 {
                        return Err(parse_err(line_no, "RHS entry needs name/value pairs"));
                    }
                    let v = number(pair[1], line_no)?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        offset = -v;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        rows[i].rhs = v;
                    } else {
                        return Err(parse_err(line_no, format!("unknown row `{}`", pair[0])));
                    }
                }
            }
            Section::Ranges => {
                return Err(parse_err(line_no, "RANGES entries are not supported"));
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(parse_err(line_no, "BOUNDS entry too short"));
                }
                let key = toks[0];
                let Some(&j) = col_index.get(toks[2]) else {
                    return Err(parse_err(line_no, format!("unknown column `{}`", toks[2])));
                };
                let value = || -> Result<f64, MpsError> {
                    let tok = toks
                        .get(3)
                        .ok_or_else(|| parse_err(line_no, format!("{key} bound needs a value")))?;
                    number(tok, line_no)
                };
                let col = &mut columns[j];
                match key {
                    "UP" => {
                        let v = value()?;
                        if v < 0.0 && col.lower == 0.0 {
                            col.lower = f64::NEG_INFINITY;
                        }
                        col.upper = v;
                    }
                    "LO" => col.lower = value()?,
                    "FX" => {
                        let v = value()?;
                        col.lower = v;
                        col.upper = v;
                    }
                    "FR" => {
                        col.lower = f64::NEG_INFINITY;
                        col.upper = f64::INFINITY;
                    }
                    "MI" => col.lower = f64::NEG_INFINITY,
                    "PL" => col.upper = f64::INFINITY,
                    other => {
                        return Err(parse_err(line_no, format!("unknown bound key `{other}`")))
                    }
                }
            }
        }
    }
    if !seen_rows {
        return Err(MpsError::MissingSection("ROWS"));
    }
    if !seen_columns {
        return Err(MpsError::MissingSection("COLUMNS"));
    }
    let mut problem = LpProblem::build(sense, columns, rows, offset)?;
    if let Some(n) = name {
        problem = problem.with_name(n);
    }
    Ok(problem)
}

fn parse_sense(tok: &str, line: usize) -> Result<Sense, MpsError> {
    match tok.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Ok(Sense::Maximize),
        "MIN" | "MINIMIZE" => Ok(Sense::Minimize),
        other => Err(parse_err(line, format!("unknown sense `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve, SolveOptions, Status};

    // The small example from the common MPS format description.
    const TESTPROB: &str = "\
NAME          TESTPROB
ROWS
 N  COST
 L  LIM1
 G  LIM2
 E  MYEQN
COLUMNS
    XONE      COST         1   LIM1         1
    XONE      LIM2         1
    YTWO      COST         2   LIM1         1
    YTWO      MYEQN       -1
    ZTHREE    COST         3   LIM2         1
    ZTHREE    MYEQN        1
RHS
    RHS1      LIM1         4   LIM2         1
    RHS1      MYEQN        7
BOUNDS
 UP BND1      XONE         4
 LO BND1      YTWO        -1
 UP BND1      YTWO         1
ENDATA
";

    #[test]
    fn reads_reference_example_field_by_field() {
        let p = parse_mps(TESTPROB).unwrap();
        assert_eq!(p.name(), Some("TESTPROB"));
        assert_eq!(p.sense(), Sense::Minimize);
        let names: Vec<_> = p.columns().iter().map(|c| c.name.as_deref().unwrap()).collect();
        assert_eq!(names, ["XONE", "YTWO", "ZTHREE"]);
        let costs: Vec<_> = p.columns().iter().map(|c| c.cost).collect();
        assert_eq!(costs, [1.0, 2.0, 3.0]);
        let bounds: Vec<_> = p.columns().iter().map(|c| (c.lower, c.upper)).collect();
        assert_eq!(bounds, [(0.0, 4.0), (-1.0, 1.0), (0.0, f64::INFINITY)]);
        let rows = p.rows();
        assert_eq!(rows[0].relation, Relation::Le);
        assert_eq!(rows[0].entries, [(0, 1.0), (1, 1.0)]);
        assert_eq!(rows[0].rhs, 4.0);
        assert_eq!(rows[1].relation, Relation::Ge);
        assert_eq!(rows[1].entries, [(0, 1.0), (2, 1.0)]);
        assert_eq!(rows[1].rhs, 1.0);
        assert_eq!(rows[2].relation, Relation::Eq);
        assert_eq!(rows[2].entries, [(1, -1.0), (2, 1.0)]);
        assert_eq!(rows[2].rhs, 7.0);

        // min x + 2y + 3z with z = 7 + y, y >= -1: y = -1, z = 6, x = 0
        let s = solve(&p, &SolveOptions::default());
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective_value - 16.0).abs() < 1e-9);
    }

    #[test]
    fn missing_columns_section_is_an_error() {
        let text = "NAME X\nROWS\n N  COST\n L  R1\nRHS\n    RHS R1 1\nENDATA\n";
        assert!(matches!(
            parse_mps(text),
            Err(MpsError::MissingSection("COLUMNS"))
        ));
    }

    #[test]
    fn malformed_header_and_bound_key() {
        let bad_header = TESTPROB.replace("BOUNDS", "BOUNDZ");
        assert!(matches!(parse_mps(&bad_header), Err(MpsError::Parse { .. })));
        let bad_key = TESTPROB.replace(" UP BND1      XONE", " XX BND1      XONE");
        let err = parse_mps(&bad_key).unwrap_err();
        assert!(err.to_string().contains("unknown bound key"));
    }

    #[test]
    fn writes_fixed_columns() {
        let p = parse_mps(TESTPROB).unwrap();
        let text = to_mps_string(&p);
        let line = text
            .lines()
            .find(|l| l.starts_with("    XONE") && l.contains("LIM1"))
            .unwrap();
        assert_eq!(&line[4..12], "XONE    ");
        assert_eq!(&line[14..22], "LIM1    ");
        assert_eq!(line[24..36].trim(), "1");
        assert_eq!(line.len(), 36);
    }

    #[test]
    fn round_trip_keeps_sense_offset_and_bounds() {
        let p = LpProblem::build(
            Sense::Maximize,
            vec![
                Column::new(f64::NEG_INFINITY, f64::INFINITY, 0.1),
                Column::new(f64::NEG_INFINITY, 3.5, 1.0 / 3.0),
                Column::new(2.0, 2.0, 0.0),
                Column::new(-1.0, f64::INFINITY, -7.0),
            ],
            vec![
                Row::new(vec![(0, 1.0), (1, 1.0 / 6.0)], Relation::Eq, 0.0),
                Row::new(vec![(1, -2.0), (3, 1e-3)], Relation::Ge, -4.25),
            ],
            123.456,
        )
        .unwrap();
        let back = parse_mps(&to_mps_string(&p)).unwrap();
        assert_eq!(back.sense(), Sense::Maximize);
        assert_eq!(back.offset(), 123.456);
        for (a, b) in p.columns().iter().zip(back.columns()) {
            assert_eq!((a.lower, a.upper, a.cost), (b.lower, b.upper, b.cost));
        }
        for (a, b) in p.rows().iter().zip(back.rows()) {
            assert_eq!((a.relation, a.rhs), (b.relation, b.rhs));
            assert_eq!(a.entries, b.entries);
        }
    }
}
