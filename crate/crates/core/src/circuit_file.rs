//! Text format for circuits.
//!
//! ```text
//! wires 5
//! # comment
//! t=1 h 2
//! t=2 cnot 2 3
//! t=3 prep 1 phi=0.3,0.7,1.1
//! t=3 prep_eta 1 alpha=0.6 beta=0,0.8 eta=1,0
//! t=4 raw 1 2 op="(0.7071067811865476+0i)·I + (0-0.7071067811865476i)·X1X2"
//! ```
//!
//! Wires in `raw` operators use the circuit's global numbering and must lie on the
//! listed wires.

use std::fmt::{self, Write as _};

use num_complex::Complex64;
use serde::Serialize;

use crate::engine::{Circuit, EngineError};
use crate::gates::{EtaPrep, EulerPrep, GateError, GateInstance, GateKind};
use crate::pauli::{parse_sum, MAX_WIRES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticKind {
    Syntax,
    Semantic,
}

impl DiagnosticKind {
    pub fn code(self) -> &'static str {
        match self {
            DiagnosticKind::Syntax => "E1",
            DiagnosticKind::Semantic => "E2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Semantic => "semantic error",
        };
        write!(f, "{}:{}: {} [{}]: {}", self.line, self.column, kind, self.kind.code(), self.message)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic { kind: DiagnosticKind::Syntax, line, column, message: message.into() }
}

fn semantic(line: usize, column: usize, message: impl Into<String>) -> Diagnostic {
    Diagnostic { kind: DiagnosticKind::Semantic, line, column, message: message.into() }
}

/// Splits on whitespace outside double quotes and drops a trailing `#` comment.
fn tokenize(line: &str, lineno: usize) -> Result<Vec<Token<'_>>, Diagnostic> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    let mut quoted = false;
    let col = |byte: usize| line[..byte].chars().count() + 1;
    for (i, ch) in line.char_indices() {
        if quoted {
            if ch == '"' {
                quoted = false;
            }
            continue;
        }
        match ch {
            '#' => {
                if let Some(s) = start.take() {
                    tokens.push(Token { text: &line[s..i], column: col(s) });
                }
                return Ok(tokens);
            }
            '"' => {
                quoted = true;
                start.get_or_insert(i);
            }
            c if c.is_whitespace() => {
                if let Some(s) = start.take() {
                    tokens.push(Token { text: &line[s..i], column: col(s) });
                }
            }
            _ => {
                start.get_or_insert(i);
            }
        }
    }
    if quoted {
        return Err(syntax(lineno, col(line.len()), "unterminated string"));
    }
    if let Some(s) = start {
        tokens.push(Token { text: &line[s..], column: col(s) });
    }
    Ok(tokens)
}

fn parse_reals(text: &str, count: usize, line: usize, column: usize) -> Result<Vec<f64>, Diagnostic> {
    let parts: Vec<_> = text.split(',').collect();
    if parts.len() != count {
        return Err(syntax(line, column, format!("expected {count} comma-separated numbers, got '{text}'")));
    }
    parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| syntax(line, column, format!("bad number '{p}'"))))
        .collect()
}

fn parse_complex(text: &str, line: usize, column: usize) -> Result<Complex64, Diagnostic> {
    let v = parse_reals(text, 2, line, column)?;
    Ok(Complex64::new(v[0], v[1]))
}

fn gate_semantic(e: GateError, line: usize, column: usize) -> Diagnostic {
    semantic(line, column, e.to_string())
}

/// Parses a circuit file into a validated [`Circuit`].
pub fn parse_circuit(text: &str) -> Result<Circuit, Diagnostic> {
    let mut n: Option<usize> = None;
    let mut gates = Vec::new();
    let mut last_time = 0;
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let tokens = tokenize(raw_line, lineno)?;
        let Some(first) = tokens.first() else { continue };
        let Some(width) = n else {
            if first.text != "wires" {
                return Err(syntax(lineno, first.column, "expected header `wires N`"));
            }
            let Some(count) = tokens.get(1) else {
                return Err(syntax(lineno, first.column + 5, "missing wire count"));
            };
            let w: usize = count
                .text
                .parse()
                .map_err(|_| syntax(lineno, count.column, format!("bad wire count '{}'", count.text)))?;
            if w == 0 || w > MAX_WIRES {
                return Err(semantic(lineno, count.column, format!("wire count must be in 1..={MAX_WIRES}")));
            }
            if let Some(extra) = tokens.get(2) {
                return Err(syntax(lineno, extra.column, "unexpected token after wire count"));
            }
            n = Some(w);
            continue;
        };
        let gate = parse_gate_line(&tokens, lineno, width)?;
        if gate.time < last_time {
            return Err(semantic(
                lineno,
                first.column,
                format!("time step {} precedes earlier step {last_time}", gate.time),
            ));
        }
        last_time = gate.time;
        gates.push((lineno, gate));
    }
    let Some(n) = n else {
        return Err(syntax(text.lines().count().max(1), 1, "missing header `wires N`"));
    };
    let lines: Vec<_> = gates.iter().map(|(l, g)| (*l, g.time, g.wires.clone())).collect();
    Circuit::new(n, gates.into_iter().map(|(_, g)| g).collect()).map_err(|e| {
        // locate the first line involved in the conflict
        let line = match &e {
            EngineError::WireConflict { wire, time } => lines
                .iter()
                .filter(|(_, t, ws)| t == time && ws.contains(wire))
                .nth(1)
                .map_or(0, |(l, _, _)| *l),
            _ => 0,
        };
        semantic(line, 1, e.to_string())
    })
}

fn parse_gate_line(tokens: &[Token<'_>], line: usize, n: usize) -> Result<GateInstance, Diagnostic> {
    let t_tok = &tokens[0];
    let time: usize = t_tok
        .text
        .strip_prefix("t=")
        .ok_or_else(|| syntax(line, t_tok.column, "expected `t=<step>`"))?
        .parse()
        .map_err(|_| syntax(line, t_tok.column + 2, format!("bad time step in '{}'", t_tok.text)))?;
    if time == 0 {
        return Err(semantic(line, t_tok.column + 2, "time steps start at 1"));
    }
    let name_tok = tokens.get(1).ok_or_else(|| syntax(line, t_tok.column, "missing gate name"))?;
    let name = name_tok.text;
    if !["h", "cnot", "cz", "x", "z", "prep", "prep_eta", "raw"].contains(&name) {
        return Err(syntax(line, name_tok.column, format!("unknown gate '{name}'")));
    }
    let mut wires = Vec::new();
    let mut params: Vec<(&str, &str, usize)> = Vec::new();
    for tok in &tokens[2..] {
        if let Some((k, v)) = tok.text.split_once('=') {
            if params.iter().any(|(key, _, _)| *key == k) {
                return Err(syntax(line, tok.column, format!("duplicate parameter '{k}'")));
            }
            params.push((k, v, tok.column + k.len() + 1));
        } else if !params.is_empty() {
            return Err(syntax(line, tok.column, "wire listed after parameters"));
        } else {
            let w: usize =
                tok.text.parse().map_err(|_| syntax(line, tok.column, format!("bad wire '{}'", tok.text)))?;
            if w == 0 || w > n {
                return Err(semantic(line, tok.column, format!("wire {w} out of range 1..={n}")));
            }
            if wires.iter().any(|(x, _)| *x == w) {
                return Err(semantic(line, tok.column, format!("wire {w} appears twice in one gate")));
            }
            wires.push((w, tok.column));
        }
    }
    let allowed: &[&str] = match name {
        "prep" => &["phi", "id"],
        "prep_eta" => &["alpha", "beta", "eta", "id", "eta_id"],
        "raw" => &["op"],
        _ => &[],
    };
    for (k, _, col) in &params {
        if !allowed.contains(k) {
            return Err(syntax(line, col - k.len() - 1, format!("unknown parameter '{k}' for {name}")));
        }
    }
    let get = |key: &str| params.iter().find(|(k, _, _)| *k == key).map(|(_, v, c)| (*v, *c));
    let require = |key: &str| get(key).ok_or_else(|| syntax(line, name_tok.column, format!("{name} needs {key}=")));
    let wire_list: Vec<usize> = wires.iter().map(|(w, _)| *w).collect();
    let kind = match name {
        "h" => GateKind::H,
        "cnot" => GateKind::Cnot,
        "cz" => GateKind::Cz,
        "x" => GateKind::X,
        "z" => GateKind::Z,
        "prep" => {
            let (v, c) = require("phi")?;
            let phi = parse_reals(v, 3, line, c)?;
            let id = get("id").map_or("phi", |(v, _)| v);
            GateKind::Prep(EulerPrep::new([phi[0], phi[1], phi[2]], id).map_err(|e| gate_semantic(e, line, c))?)
        }
        "prep_eta" => {
            let (a, ac) = require("alpha")?;
            let alpha = parse_reals(a, 1, line, ac)?[0];
            let (b, bc) = require("beta")?;
            let beta = parse_complex(b, line, bc)?;
            let (e, ec) = require("eta")?;
            let eta = parse_complex(e, line, ec)?;
            let p = EtaPrep::new(alpha, beta, eta).map_err(|e| gate_semantic(e, line, ac))?;
            GateKind::PrepEta(
                p.with_ids(get("id").map_or("psi", |(v, _)| v), get("eta_id").map_or("eta", |(v, _)| v)),
            )
        }
        "raw" => {
            let (v, c) = require("op")?;
            let inner = v
                .strip_prefix('"')
                .and_then(|s| s.strip_suffix('"'))
                .ok_or_else(|| syntax(line, c, "op must be double-quoted"))?;
            let global = parse_sum(inner, n).map_err(|e| syntax(line, c, e.to_string()))?;
            if wire_list.is_empty() {
                return Err(syntax(line, name_tok.column, "raw needs at least one wire"));
            }
            let local = global.restrict(&wire_list).map_err(|e| semantic(line, c, e.to_string()))?;
            GateKind::Raw(local)
        }
        _ => unreachable!("gate names checked above"),
    };
    let column = wires.first().map_or(name_tok.column, |(_, c)| *c);
    GateInstance::new(kind, wire_list, time).map_err(|e| gate_semantic(e, line, column))
}

/// Canonical text form; `parse_circuit(&to_text(c))` reproduces `c`.
pub fn to_text(circuit: &Circuit) -> String {
    let mut out = format!("wires {}\n", circuit.n());
    for g in circuit.gates() {
        let _ = write!(out, "t={} {}", g.time, g.kind.name());
        for w in &g.wires {
            let _ = write!(out, " {w}");
        }
        match &g.kind {
            GateKind::Prep(p) => {
                let _ = write!(out, " phi={},{},{}", p.phi[0], p.phi[1], p.phi[2]);
                if p.id != "phi" {
                    let _ = write!(out, " id={}", p.id);
                }
            }
            GateKind::PrepEta(p) => {
                let _ = write!(
                    out,
                    " alpha={} beta={},{} eta={},{}",
                    p.alpha, p.beta.re, p.beta.im, p.eta.re, p.eta.im
                );
                if p.state_id != "psi" {
                    let _ = write!(out, " id={}", p.state_id);
                }
                if p.eta_id != "eta" {
                    let _ = write!(out, " eta_id={}", p.eta_id);
                }
            }
            GateKind::Raw(local) => {
                let global = local.embed(circuit.n(), &g.wires).expect("raw wires validated by the circuit");
                let _ = write!(out, " op=\"{global}\"");
            }
            _ => {}
        }
        out.push('\n');
    }
    out
}
