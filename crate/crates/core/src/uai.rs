//! Reader and writer for the UAI model format and the query/evidence files
//! that accompany it.
//!
//! A model file holds a preamble (`MARKOV` or `BAYES`), the variable count,
//! the cardinalities, the factor count, one scope line per factor, and then
//! every table prefixed by its entry count. Tables list the last scope
//! variable fastest. `#` starts a comment that runs to the end of the line.

use std::fmt::Write as _;

use thiserror::Error;

use crate::factor::{Factor, Scope, VarId};
use crate::model::{Assignment, GraphicalModel, ModelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: expected {expected}, found end of input")]
    UnexpectedEof { line: usize, expected: &'static str },
    #[error("line {line}: expected {expected}, found `{token}`")]
    BadToken { line: usize, token: String, expected: &'static str },
    #[error("line {line}: unknown preamble `{found}` (expected MARKOV or BAYES)")]
    BadPreamble { line: usize, found: String },
    #[error("line {line}: factor {factor} references variable {var}, model has {n_vars}")]
    ScopeOutOfRange { line: usize, factor: usize, var: usize, n_vars: usize },
    #[error("line {line}: factor {factor} declares {declared} entries, its scope needs {expected}")]
    TableLength { line: usize, factor: usize, declared: usize, expected: usize },
    #[error("line {line}: factor {factor} entry {value} is not a finite nonnegative number")]
    BadEntry { line: usize, factor: usize, value: f64 },
    #[error("line {line}: {message}")]
    Query { line: usize, message: String },
    #[error("line {line}: trailing data `{token}`")]
    Trailing { line: usize, token: String },
    #[error("input is not valid UTF-8")]
    Encoding,
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ParseError {
    /// Line the error points at, when it has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::UnexpectedEof { line, .. }
            | ParseError::BadToken { line, .. }
            | ParseError::BadPreamble { line, .. }
            | ParseError::ScopeOutOfRange { line, .. }
            | ParseError::TableLength { line, .. }
            | ParseError::BadEntry { line, .. }
            | ParseError::Query { line, .. }
            | ParseError::Trailing { line, .. } => Some(*line),
            _ => None,
        }
    }
}

struct Tokens<'a> {
    items: Vec<(&'a str, usize)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Tokens<'a> {
        let items: Vec<_> = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                l.split_whitespace().map(move |t| (t, i + 1))
            })
            .collect();
        let last_line = text.lines().count().max(1);
        Tokens { items, pos: 0, last_line }
    }

    fn next(&mut self, expected: &'static str) -> Result<(&'a str, usize), ParseError> {
        let t = self
            .items
            .get(self.pos)
            .copied()
            .ok_or(ParseError::UnexpectedEof { line: self.last_line, expected })?;
        self.pos += 1;
        Ok(t)
    }

    fn usize(&mut self, expected: &'static str) -> Result<(usize, usize), ParseError> {
        let (t, line) = self.next(expected)?;
        t.parse()
            .map(|v| (v, line))
            .map_err(|_| ParseError::BadToken { line, token: t.to_string(), expected })
    }

    fn f64(&mut self, expected: &'static str) -> Result<(f64, usize), ParseError> {
        let (t, line) = self.next(expected)?;
        t.parse()
            .map(|v| (v, line))
            .map_err(|_| ParseError::BadToken { line, token: t.to_string(), expected })
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.items.get(self.pos) {
            Some(&(t, line)) => Err(ParseError::Trailing { line, token: t.to_string() }),
            None => Ok(()),
        }
    }
}

pub fn load_uai_bytes(bytes: &[u8]) -> Result<GraphicalModel, ParseError> {
    load_uai(std::str::from_utf8(bytes).map_err(|_| ParseError::Encoding)?)
}

pub fn load_uai(text: &str) -> Result<GraphicalModel, ParseError> {
    let mut tok = Tokens::new(text);
    let (pre, line) = tok.next("preamble")?;
    if !pre.eq_ignore_ascii_case("MARKOV") && !pre.eq_ignore_ascii_case("BAYES") {
        return Err(ParseError::BadPreamble { line, found: pre.to_string() });
    }
    let (n, _) = tok.usize("variable count")?;
    let mut cards = Vec::with_capacity(n);
    for _ in 0..n {
        let (c, line) = tok.usize("cardinality")?;
        if c == 0 {
            return Err(ParseError::BadToken { line, token: "0".into(), expected: "cardinality >= 1" });
        }
        cards.push(c);
    }
    let (m, _) = tok.usize("factor count")?;
    let mut scopes = Vec::with_capacity(m);
    for factor in 0..m {
        let (k, _) = tok.usize("scope size")?;
        let mut vars = Vec::with_capacity(k);
        for _ in 0..k {
            let (v, line) = tok.usize("variable index")?;
            if v >= n {
                return Err(ParseError::ScopeOutOfRange { line, factor, var: v, n_vars: n });
            }
            if vars.contains(&VarId(v)) {
                return Err(ParseError::BadToken {
                    line,
                    token: v.to_string(),
                    expected: "distinct scope variables",
                });
            }
            vars.push(VarId(v));
        }
        let fc = vars.iter().map(|v| cards[v.0]).collect();
        scopes.push(Scope::new(vars, fc).map_err(ModelError::from)?);
    }
    let mut factors = Vec::with_capacity(m);
    for (factor, scope) in scopes.into_iter().enumerate() {
        let (declared, line) = tok.usize("table entry count")?;
        let expected = scope.config_count();
        if declared != expected {
            return Err(ParseError::TableLength { line, factor, declared, expected });
        }
        let mut table = Vec::with_capacity(expected);
        for _ in 0..expected {
            let (v, line) = tok.f64("table entry")?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(ParseError::BadEntry { line, factor, value: v });
            }
            table.push(v);
        }
        factors.push(Factor::new(scope, table).map_err(ModelError::from)?);
    }
    tok.finish()?;
    Ok(GraphicalModel::new(cards, factors)?)
}

fn parse_line_numbers(line: &str, lineno: usize) -> Result<Vec<usize>, ParseError> {
    line.split('#')
        .next()
        .unwrap_or("")
        .split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| ParseError::BadToken {
                line: lineno,
                token: t.to_string(),
                expected: "nonnegative integer",
            })
        })
        .collect()
}

/// Parses `e v_1 s_1 … v_e s_e` into evidence.
fn parse_evidence(nums: &[usize], lineno: usize, model: &GraphicalModel) -> Result<Assignment, ParseError> {
    let e = nums[0];
    if nums.len() != 1 + 2 * e {
        return Err(ParseError::Query {
            line: lineno,
            message: format!("evidence count {e} needs {} pairs, found {} numbers", e, nums.len() - 1),
        });
    }
    let mut evidence = Assignment::new();
    for pair in nums[1..].chunks(2) {
        let (v, s) = (pair[0], pair[1]);
        if v >= model.n_vars() {
            return Err(ParseError::Query { line: lineno, message: format!("evidence variable {v} out of range") });
        }
        if s >= model.card(VarId(v)) {
            return Err(ParseError::Query {
                line: lineno,
                message: format!("evidence state {s} out of range for variable {v}"),
            });
        }
        if evidence.insert(VarId(v), s).is_some() {
            return Err(ParseError::Query { line: lineno, message: format!("variable {v} evidenced twice") });
        }
    }
    Ok(evidence)
}

fn content_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.split('#').next().unwrap_or("").trim().is_empty())
        .collect()
}

/// Query file: decision variables on the first line, optional evidence on
/// the second.
pub fn load_query(text: &str, model: &GraphicalModel) -> Result<(Vec<VarId>, Assignment), ParseError> {
    let lines = content_lines(text);
    let Some(&(lineno, first)) = lines.first() else {
        return Err(ParseError::UnexpectedEof { line: 1, expected: "decision variable line" });
    };
    let nums = parse_line_numbers(first, lineno)?;
    let k = nums[0];
    if nums.len() != k + 1 {
        return Err(ParseError::Query {
            line: lineno,
            message: format!("declares {k} decision variables, lists {}", nums.len() - 1),
        });
    }
    let mut decision = Vec::with_capacity(k);
    for &v in &nums[1..] {
        if v >= model.n_vars() {
            return Err(ParseError::Query { line: lineno, message: format!("decision variable {v} out of range") });
        }
        if decision.contains(&VarId(v)) {
            return Err(ParseError::Query { line: lineno, message: format!("decision variable {v} listed twice") });
        }
        decision.push(VarId(v));
    }
    let evidence = match lines.get(1) {
        Some(&(ln, l)) => {
            let nums = parse_line_numbers(l, ln)?;
            let ev = parse_evidence(&nums, ln, model)?;
            if let Some(v) = ev.keys().find(|v| decision.contains(v)) {
                return Err(ParseError::Query {
                    line: ln,
                    message: format!("variable {} is both a decision and evidence", v.0),
                });
            }
            ev
        }
        None => Assignment::new(),
    };
    if let Some(&(ln, l)) = lines.get(2) {
        return Err(ParseError::Trailing { line: ln, token: l.trim().to_string() });
    }
    Ok((decision, evidence))
}

/// Standalone evidence file holding a single `e v_1 s_1 …` line.
pub fn load_evidence(text: &str, model: &GraphicalModel) -> Result<Assignment, ParseError> {
    let lines = content_lines(text);
    let Some(&(ln, l)) = lines.first() else {
        return Ok(Assignment::new());
    };
    if let Some(&(ln2, l2)) = lines.get(1) {
        return Err(ParseError::Trailing { line: ln2, token: l2.trim().to_string() });
    }
    parse_evidence(&parse_line_numbers(l, ln)?, ln, model)
}

/// Serializes the explicit factors of `model`; values print in shortest
/// round-trip form so reading the text back is lossless.
pub fn write_uai(model: &GraphicalModel) -> String {
    let mut out = String::from("MARKOV\n");
    let _ = writeln!(out, "{}", model.n_vars());
    let cards: Vec<String> = model.cards().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "{}", cards.join(" "));
    let factors = model.explicit_factors();
    let _ = writeln!(out, "{}", factors.len());
    for f in factors {
        let vars: Vec<String> = f.vars().iter().map(|v| v.0.to_string()).collect();
        let _ = writeln!(out, "{} {}", vars.len(), vars.join(" "));
    }
    for f in factors {
        out.push('\n');
        let _ = writeln!(out, "{}", f.len());
        let vals: Vec<String> = f.table().iter().map(|v| format!("{v:?}")).collect();
        for chunk in vals.chunks(16) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out
}

pub fn write_query(decision: &[VarId], evidence: &Assignment) -> String {
    let mut out = String::new();
    let d: Vec<String> = decision.iter().map(|v| v.0.to_string()).collect();
    let _ = writeln!(out, "{} {}", d.len(), d.join(" "));
    if !evidence.is_empty() {
        let pairs: Vec<String> = evidence.iter().map(|(v, s)| format!("{} {}", v.0, s)).collect();
        let _ = writeln!(out, "{} {}", evidence.len(), pairs.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let m = load_uai("MARKOV 1 2 1 1 0 2 0.3 0.7").unwrap();
        assert_eq!(m.n_vars(), 1);
        assert_eq!(m.factors().len(), 1);
        assert_eq!(m.factors()[0].table(), &[0.3, 0.7]);
    }

    #[test]
    fn bayes_preamble_is_equivalent() {
        let a = load_uai("MARKOV 1 2 1 1 0 2 0.3 0.7").unwrap();
        let b = load_uai("BAYES\n1\n2\n1\n1 0\n2\n0.3 0.7\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn table_length_mismatch_names_factor() {
        let text = "MARKOV\n2\n2 2\n2\n1 0\n2 0 1\n2 0.5 0.5\n3 1 2 3\n";
        let err = load_uai(text).unwrap_err();
        assert_eq!(err, ParseError::TableLength { line: 8, factor: 1, declared: 3, expected: 4 });
        assert!(err.to_string().contains("factor 1"));
    }

    #[test]
    fn comments_and_errors() {
        let text = "# header\nMARKOV # type\n2\n2 2\n1\n2 0 1 # pair\n4\n1 2 3 4\n";
        let m = load_uai(text).unwrap();
        assert_eq!(m.factors()[0].table(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(load_uai("GRID 1 2"), Err(ParseError::BadPreamble { line: 1, .. })));
        assert!(matches!(
            load_uai("MARKOV 1 2 1 1 3 2 0.1 0.2"),
            Err(ParseError::ScopeOutOfRange { factor: 0, var: 3, .. })
        ));
        assert!(matches!(
            load_uai("MARKOV 1 2 1 1 0 2 0.1"),
            Err(ParseError::UnexpectedEof { .. })
        ));
        assert!(matches!(
            load_uai("MARKOV 1 2 1 1 0 2 0.1 -3"),
            Err(ParseError::BadEntry { factor: 0, .. })
        ));
        assert!(matches!(load_uai("MARKOV 1 x"), Err(ParseError::BadToken { line: 1, .. })));
    }

    fn five_var_model() -> GraphicalModel {
        let ones = vec!["1"; 32].join(" ");
        load_uai(&format!("MARKOV 5 2 2 2 2 2 1 5 0 1 2 3 4 32 {ones}")).unwrap()
    }

    #[test]
    fn query_examples() {
        let m = five_var_model();
        let (d, e) = load_query("2 0 3\n", &m).unwrap();
        assert_eq!(d, vec![VarId(0), VarId(3)]);
        assert!(e.is_empty());

        let (_, e) = load_query("2 0 3\n1 4 1\n", &m).unwrap();
        assert_eq!(e.get(&VarId(4)), Some(&1));

        let err = load_query("2 0 3\n1 3 0\n", &m).unwrap_err();
        assert!(matches!(err, ParseError::Query { line: 2, .. }));
        assert!(matches!(load_query("1 7\n", &m), Err(ParseError::Query { line: 1, .. })));
        assert!(matches!(load_query("3 0 1\n", &m), Err(ParseError::Query { line: 1, .. })));
        assert!(matches!(load_query("", &m), Err(ParseError::UnexpectedEof { .. })));
    }

    #[test]
    fn evidence_file() {
        let m = five_var_model();
        let e = load_evidence("2 1 0 2 1\n", &m).unwrap();
        assert_eq!(e.len(), 2);
        assert!(load_evidence("1 1 5\n", &m).is_err());
        assert!(load_evidence("", &m).unwrap().is_empty());
    }

    #[test]
    fn write_then_read_is_lossless() {
        let text = "MARKOV\n3\n2 3 2\n2\n2 0 1\n1 2\n6\n0.1 0.2 0.30000000000000004 1e-300 5 6\n2\n0.25 0.75\n";
        let m = load_uai(text).unwrap();
        let again = load_uai(&write_uai(&m)).unwrap();
        assert_eq!(m, again);
        let mut ev = Assignment::new();
        ev.insert(VarId(2), 1);
        let q = write_query(&[VarId(0)], &ev);
        assert_eq!(load_query(&q, &m).unwrap(), (vec![VarId(0)], ev));
    }
}
