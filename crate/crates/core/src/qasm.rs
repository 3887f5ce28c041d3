//! OpenQASM 2 reading and writing for the supported gate subset.
//!
//! Accepted gates are `h x cx cz rz rx u3 u` plus `measure`, `reset` and
//! `barrier`; anything else is rejected rather than decomposed. All quantum
//! registers are flattened into one wire index space in declaration order.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{ResizeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    /// A single register element, `q[3]`.
    Bit { reg: String, index: usize },
    /// A whole register, `q`.
    Register(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub name: String,
    pub params: Vec<f64>,
    pub operands: Vec<Operand>,
    /// Classical target of a `measure`, if any.
    pub target: Option<Operand>,
    pub line: usize,
}

/// A parsed program before it is lowered onto a single register.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QasmDocument {
    pub version: String,
    pub qregs: Vec<(String, usize)>,
    pub cregs: Vec<(String, usize)>,
    pub instructions: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Real(f64),
    Int(usize),
    Str(String),
    Sym(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> ResizeError {
    ResizeError::Parse { line, col, msg: msg.into() }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            bump(1, &mut i, &mut col);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            col += 2;
            loop {
                match chars.get(i) {
                    None => return Err(perr(tl, tc, "unterminated comment")),
                    Some('*') if chars.get(i + 1) == Some(&'/') => {
                        bump(2, &mut i, &mut col);
                        break;
                    }
                    Some('\n') => {
                        i += 1;
                        line += 1;
                        col = 1;
                    }
                    Some(_) => bump(1, &mut i, &mut col),
                }
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump(1, &mut i, &mut col);
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, col: tc });
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut real = false;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                real |= chars[i] == '.';
                bump(1, &mut i, &mut col);
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                real = true;
                bump(1, &mut i, &mut col);
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    bump(1, &mut i, &mut col);
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump(1, &mut i, &mut col);
                }
            }
            let s: String = chars[start..i].iter().collect();
            let tok = if real {
                Tok::Real(s.parse().map_err(|_| perr(tl, tc, format!("bad number {s:?}")))?)
            } else {
                Tok::Int(s.parse().map_err(|_| perr(tl, tc, format!("bad integer {s:?}")))?)
            };
            out.push(Token { tok, line: tl, col: tc });
        } else if c == '"' {
            let start = i + 1;
            bump(1, &mut i, &mut col);
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                bump(1, &mut i, &mut col);
            }
            if chars.get(i) != Some(&'"') {
                return Err(perr(tl, tc, "unterminated string"));
            }
            let s = chars[start..i].iter().collect();
            bump(1, &mut i, &mut col);
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            bump(2, &mut i, &mut col);
            out.push(Token { tok: Tok::Arrow, line: tl, col: tc });
        } else if "[](),;+-*/^{}".contains(c) {
            bump(1, &mut i, &mut col);
            out.push(Token { tok: Tok::Sym(c), line: tl, col: tc });
        } else {
            return Err(perr(tl, tc, format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.eof, |t| (t.line, t.col))
    }

    fn err(&self, msg: impl Into<String>) -> ResizeError {
        let (l, c) = self.here();
        perr(l, c, msg)
    }

    fn next(&mut self) -> Result<Token> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    fn int(&mut self) -> Result<usize> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err("expected integer")),
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<f64> {
        let mut v = self.term()?;
        loop {
            if self.eat_sym('+') {
                v += self.term()?;
            } else if self.eat_sym('-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        loop {
            if self.eat_sym('*') {
                v *= self.unary()?;
            } else if self.eat_sym('/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64> {
        if self.eat_sym('-') {
            return Ok(-self.unary()?);
        }
        if self.eat_sym('+') {
            return self.unary();
        }
        let (line, col) = self.here();
        match self.next()?.tok {
            Tok::Real(x) => Ok(x),
            Tok::Int(n) => Ok(n as f64),
            Tok::Ident(s) if s == "pi" => Ok(PI),
            Tok::Sym('(') => {
                let v = self.expr()?;
                self.expect_sym(')')?;
                Ok(v)
            }
            Tok::Ident(s) => Err(perr(line, col, format!("unsupported expression term {s:?}"))),
            _ => Err(perr(line, col, "expected angle expression")),
        }
    }

    fn operand(&mut self) -> Result<Operand> {
        let reg = self.ident()?;
        if self.eat_sym('[') {
            let index = self.int()?;
            self.expect_sym(']')?;
            Ok(Operand::Bit { reg, index })
        } else {
            Ok(Operand::Register(reg))
        }
    }

    fn operand_list(&mut self) -> Result<Vec<Operand>> {
        let mut ops = vec![self.operand()?];
        while self.eat_sym(',') {
            ops.push(self.operand()?);
        }
        Ok(ops)
    }
}

/// Parses text into a [`QasmDocument`] without resolving registers.
pub fn parse_document(text: &str) -> Result<QasmDocument> {
    let toks = tokenize(text)?;
    let lines = text.lines().count().max(1);
    let mut p = Parser { toks, pos: 0, eof: (lines, 1) };
    let mut doc = QasmDocument::default();
    while p.peek().is_some() {
        let (line, col) = p.here();
        let head = p.ident()?;
        match head.as_str() {
            "OPENQASM" => {
                doc.version = match p.next()?.tok {
                    Tok::Real(v) => format!("{v:.1}"),
                    Tok::Int(v) => v.to_string(),
                    _ => return Err(perr(line, col, "expected version number")),
                };
                if !doc.version.starts_with('2') {
                    return Err(perr(line, col, format!("unsupported OpenQASM version {}", doc.version)));
                }
            }
            "include" => match p.next()?.tok {
                Tok::Str(_) => {}
                _ => return Err(perr(line, col, "expected file name after include")),
            },
            "qreg" | "creg" => {
                let name = p.ident()?;
                p.expect_sym('[')?;
                let size = p.int()?;
                p.expect_sym(']')?;
                let regs = if head == "qreg" { &mut doc.qregs } else { &mut doc.cregs };
                if regs.iter().any(|(n, _)| *n == name) {
                    return Err(perr(line, col, format!("register {name} declared twice")));
                }
                regs.push((name, size));
            }
            "gate" | "opaque" | "if" => {
                return Err(ResizeError::UnsupportedGate { name: head, line });
            }
            _ => {
                let mut params = Vec::new();
                if p.eat_sym('(') {
                    if !p.eat_sym(')') {
                        params.push(p.expr()?);
                        while p.eat_sym(',') {
                            params.push(p.expr()?);
                        }
                        p.expect_sym(')')?;
                    }
                }
                let operands = p.operand_list()?;
                let mut target = None;
                if p.peek() == Some(&Tok::Arrow) {
                    p.pos += 1;
                    target = Some(p.operand()?);
                }
                doc.instructions.push(Instruction { name: head, params, operands, target, line });
            }
        }
        p.expect_sym(';')?;
    }
    Ok(doc)
}

fn gate_shape(name: &str) -> Option<(GateKind, usize, usize)> {
    // (kind, qubits, params)
    Some(match name {
        "h" => (GateKind::H, 1, 0),
        "x" => (GateKind::X, 1, 0),
        "cx" | "CX" => (GateKind::Cnot, 2, 0),
        "cz" => (GateKind::Cz, 2, 0),
        "rz" => (GateKind::Rz, 1, 1),
        "rx" => (GateKind::Rx, 1, 1),
        "u3" | "u" | "U" => (GateKind::U3, 1, 3),
        "measure" => (GateKind::Measure, 1, 0),
        "reset" => (GateKind::Reset, 1, 0),
        "barrier" => (GateKind::Barrier, 0, 0),
        _ => return None,
    })
}

impl QasmDocument {
    /// Lowers onto a single register, expanding whole-register operands.
    pub fn to_circuit(&self) -> Result<Circuit> {
        let mut offsets: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        let mut width = 0;
        for (name, size) in &self.qregs {
            offsets.insert(name.as_str(), (width, *size));
            width += size;
        }
        let cregs: BTreeMap<&str, usize> = self.cregs.iter().map(|(n, s)| (n.as_str(), *s)).collect();
        let mut circuit = Circuit::new(width);
        for ins in &self.instructions {
            let line = ins.line;
            let (kind, arity, nparams) = gate_shape(&ins.name)
                .ok_or_else(|| ResizeError::UnsupportedGate { name: ins.name.clone(), line })?;
            if ins.params.len() != nparams {
                return Err(perr(
                    line,
                    1,
                    format!("{} takes {nparams} parameters, got {}", ins.name, ins.params.len()),
                ));
            }
            if kind == GateKind::Measure {
                match &ins.target {
                    None => return Err(perr(line, 1, "measure needs a classical target")),
                    Some(Operand::Bit { reg, index }) => match cregs.get(reg.as_str()) {
                        Some(&size) if *index < size => {}
                        Some(_) => return Err(perr(line, 1, format!("index {index} out of range for {reg}"))),
                        None => return Err(perr(line, 1, format!("unknown classical register {reg}"))),
                    },
                    Some(Operand::Register(reg)) if !cregs.contains_key(reg.as_str()) => {
                        return Err(perr(line, 1, format!("unknown classical register {reg}")))
                    }
                    Some(_) => {}
                }
            } else if ins.target.is_some() {
                return Err(perr(line, 1, format!("unexpected '->' after {}", ins.name)));
            }

            let mut resolved: Vec<Vec<usize>> = Vec::new();
            for op in &ins.operands {
                let reg = match op {
                    Operand::Bit { reg, .. } | Operand::Register(reg) => reg,
                };
                let &(off, size) = offsets
                    .get(reg.as_str())
                    .ok_or_else(|| perr(line, 1, format!("unknown quantum register {reg}")))?;
                resolved.push(match op {
                    Operand::Bit { index, .. } if *index < size => vec![off + index],
                    Operand::Bit { index, .. } => {
                        return Err(perr(line, 1, format!("index {index} out of range for {reg}")))
                    }
                    Operand::Register(_) => (off..off + size).collect(),
                });
            }

            if kind == GateKind::Barrier {
                let wires: Vec<usize> = resolved.concat();
                circuit.push(Gate::barrier(wires)).map_err(|e| perr(line, 1, e.to_string()))?;
                continue;
            }
            if resolved.len() != arity {
                return Err(perr(line, 1, format!("{} takes {arity} qubits, got {}", ins.name, resolved.len())));
            }
            // Broadcast: every operand is a single bit or a register of common size.
            let n = resolved.iter().map(Vec::len).max().unwrap_or(1);
            if resolved.iter().any(|r| r.len() != 1 && r.len() != n) {
                return Err(perr(line, 1, "register sizes differ in broadcast"));
            }
            for k in 0..n {
                let wires: Vec<usize> = resolved.iter().map(|r| if r.len() == 1 { r[0] } else { r[k] }).collect();
                let gate = Gate::new(kind, wires, ins.params.clone()).map_err(|e| perr(line, 1, e.to_string()))?;
                circuit.push(gate).map_err(|e| perr(line, 1, e.to_string()))?;
            }
        }
        Ok(circuit)
    }
}

pub fn parse_qasm(text: &str) -> Result<Circuit> {
    parse_document(text)?.to_circuit()
}

fn angle(x: f64) -> String {
    // Rust's shortest round-trip formatting is exact on re-parse.
    let s = format!("{x:?}");
    if s.contains("inf") || s.contains("NaN") {
        "0".to_string()
    } else {
        s
    }
}

/// Writes `circuit` as OpenQASM 2 on register `q`.
///
/// Each reset directly following a measurement on the same wire is written
/// `reset_repetitions` times (clamped to 1..=3). Mid-circuit measurements get
/// their own classical bits after the `width` terminal ones. Variable blocks
/// have no QASM spelling and are written as comments.
pub fn emit_qasm(circuit: &Circuit, reset_repetitions: usize) -> String {
    let reps = reset_repetitions.clamp(1, 3);
    let width = circuit.width();
    let gates = circuit.gates();
    let mid_measures = gates.iter().filter(|g| g.kind == GateKind::Measure).count();
    let mut out = String::new();
    out.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    if width > 0 {
        let _ = writeln!(out, "qreg q[{width}];");
        let _ = writeln!(out, "creg c[{}];", width + mid_measures);
    }
    let mut last_on_wire: Vec<Option<GateKind>> = vec![None; width];
    let mut cbit = width;
    for g in gates {
        let q = |i: usize| format!("q[{}]", g.wires[i]);
        match g.kind {
            GateKind::Measure => {
                let _ = writeln!(out, "measure {} -> c[{cbit}];", q(0));
                cbit += 1;
            }
            GateKind::Reset => {
                let n = if last_on_wire[g.wires[0]] == Some(GateKind::Measure) { reps } else { 1 };
                for _ in 0..n {
                    let _ = writeln!(out, "reset {};", q(0));
                }
            }
            GateKind::Barrier => {
                let ws: Vec<String> = g.wires.iter().map(|w| format!("q[{w}]")).collect();
                let _ = writeln!(out, "barrier {};", ws.join(","));
            }
            GateKind::VariableBlock => {
                let ws: Vec<String> = g.wires.iter().map(|w| format!("q[{w}]")).collect();
                let _ = writeln!(out, "// unitary block on {}", ws.join(","));
            }
            GateKind::Cnot => {
                let _ = writeln!(out, "cx {},{};", q(0), q(1));
            }
            GateKind::Cz => {
                let _ = writeln!(out, "cz {},{};", q(0), q(1));
            }
            GateKind::H => {
                let _ = writeln!(out, "h {};", q(0));
            }
            GateKind::X => {
                let _ = writeln!(out, "x {};", q(0));
            }
            GateKind::Rz | GateKind::Rx => {
                let name = if g.kind == GateKind::Rz { "rz" } else { "rx" };
                let _ = writeln!(out, "{name}({}) {};", angle(g.params[0]), q(0));
            }
            GateKind::U3 => {
                let _ = writeln!(
                    out,
                    "u3({},{},{}) {};",
                    angle(g.params[0]),
                    angle(g.params[1]),
                    angle(g.params[2]),
                    q(0)
                );
            }
        }
        for &w in &g.wires {
            last_on_wire[w] = Some(g.kind);
        }
    }
    for w in 0..width {
        let _ = writeln!(out, "measure q[{w}] -> c[{w}];");
    }
    out
}
