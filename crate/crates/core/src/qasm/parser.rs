use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::lexer::{tokenize, Tok};
use super::{ParseError, ParseErrorKind, Pos};
use crate::circuit::{gate, Circuit, CompositeOp, GateOp, GateSpec, Instruction, ParamValue};

pub const MAX_QUBITS: usize = 64;
pub const MAX_CLBITS: usize = 64;
const MAX_EXPR_DEPTH: usize = 64;
const MAX_DEFS: usize = 4096;
const MAX_INSTRUCTIONS: usize = 200_000;

/// Gates declared by `qelib1.inc`; a local definition may not reuse these.
pub(crate) const QELIB1: &[&str] = &[
    "u3", "u2", "u1", "cx", "id", "u0", "u", "p", "x", "y", "z", "h", "s", "sdg", "t", "tdg", "rx", "ry", "rz",
    "sx", "sxdg", "cz", "cy", "swap", "ch", "ccx", "cswap", "crx", "cry", "crz", "cu1", "cp", "cu3", "csx", "cu",
    "rxx", "rzz", "rccx", "rc3x", "c3x", "c3sqrtx", "c4x", "U", "CX",
];

const KEYWORDS: &[&str] =
    &["OPENQASM", "include", "qreg", "creg", "gate", "opaque", "measure", "reset", "barrier", "if", "pi"];

/// Parses OpenQASM 2.0 text. Parameter-free `gate` definitions become
/// subcircuits; parameterized ones are expanded at each call site.
pub fn parse(text: &str) -> Result<Circuit, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        i: 0,
        qregs: Vec::new(),
        cregs: Vec::new(),
        defs: Vec::new(),
        def_index: BTreeMap::new(),
        circuit: Circuit::new(0, 0),
        measured: Vec::new(),
        emitted: 0,
    };
    p.program()?;
    let end = p.pos();
    p.circuit
        .validate()
        .map_err(|e| ParseError { pos: end, kind: ParseErrorKind::InvalidCircuit(e.to_string()) })?;
    Ok(p.circuit)
}

struct Reg {
    name: String,
    offset: usize,
    size: usize,
}

#[derive(Clone, Debug)]
enum Expr {
    Num(f64),
    Param(usize),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(fn(f64) -> f64, Box<Expr>),
}

impl Expr {
    fn eval(&self, env: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Param(i) => env[*i],
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env), b.eval(env));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => a.powf(b),
                }
            }
            Expr::Call(f, e) => f(e.eval(env)),
        }
    }
}

#[derive(Clone, Copy)]
enum Callee {
    Builtin { spec: &'static GateSpec, declared_params: usize, map: fn(&[f64]) -> Vec<f64> },
    Def(usize),
}

struct BodyOp {
    callee: Callee,
    params: Vec<Expr>,
    args: Vec<usize>,
    pos: Pos,
}

struct Def {
    name: String,
    n_params: usize,
    n_qubits: usize,
    body: Vec<BodyOp>,
    /// Precompiled body of a parameter-free definition.
    compiled: Option<Circuit>,
    /// Instruction count including every nested definition table.
    weight: usize,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    qregs: Vec<Reg>,
    cregs: Vec<Reg>,
    defs: Vec<Def>,
    def_index: BTreeMap<String, usize>,
    circuit: Circuit,
    measured: Vec<bool>,
    emitted: usize,
}

fn same(v: &[f64]) -> Vec<f64> {
    v.to_vec()
}

fn alias(name: &str) -> Option<(&'static str, usize, fn(&[f64]) -> Vec<f64>)> {
    Some(match name {
        "U" | "u3" => ("u", 3, same),
        "CX" => ("cx", 0, same),
        "u1" => ("p", 1, same),
        "cu1" => ("cp", 1, same),
        "cu3" => ("cu", 3, |p| vec![p[0], p[1], p[2], 0.0]),
        "c3sqrtx" => ("c3sx", 0, same),
        "u0" => ("id", 1, |_| Vec::new()),
        _ => return None,
    })
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, pos: Pos, kind: ParseErrorKind) -> PResult<T> {
        Err(ParseError { pos, kind })
    }

    fn syntax<T>(&self, msg: String) -> PResult<T> {
        self.err(self.pos(), ParseErrorKind::Syntax(msg))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            let want = match &tok {
                Tok::Ident(s) => format!("'{s}'"),
                other => other.describe(),
            };
            self.syntax(format!("expected {want}, found {}", self.peek().describe()))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let pos = self.bump().1;
                Ok((s, pos))
            }
            other => self.syntax(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn integer(&mut self) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Number(s) if s.bytes().all(|b| b.is_ascii_digit()) => match s.parse::<u64>() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => self.err(self.pos(), ParseErrorKind::LimitExceeded(format!("integer {s} is too large"))),
            },
            other => self.syntax(format!("expected integer, found {}", other.describe())),
        }
    }

    fn program(&mut self) -> PResult<()> {
        self.expect(Tok::Ident("OPENQASM".into()))?;
        let pos = self.pos();
        match self.bump().0 {
            Tok::Number(v) if v == "2.0" || v == "2" => {}
            Tok::Number(v) => return self.err(pos, ParseErrorKind::Unsupported(format!("OPENQASM version {v}"))),
            other => return self.err(pos, ParseErrorKind::Syntax(format!("expected version, found {}", other.describe()))),
        }
        self.expect(Tok::Semi)?;
        while *self.peek() != Tok::Eof {
            self.statement()?;
        }
        Ok(())
    }

    fn statement(&mut self) -> PResult<()> {
        let pos = self.pos();
        let word = match self.peek() {
            Tok::Ident(s) => s.clone(),
            other => return self.syntax(format!("expected statement, found {}", other.describe())),
        };
        match word.as_str() {
            "include" => {
                self.bump();
                let p = self.pos();
                match self.bump().0 {
                    Tok::Str(s) if s == "qelib1.inc" => {}
                    Tok::Str(s) => return self.err(p, ParseErrorKind::Unsupported(format!("include \"{s}\""))),
                    other => return self.err(p, ParseErrorKind::Syntax(format!("expected file name, found {}", other.describe()))),
                }
                self.expect(Tok::Semi)?;
            }
            "qreg" | "creg" => {
                self.bump();
                self.register(word == "qreg")?;
            }
            "gate" => {
                self.bump();
                self.gate_def()?;
            }
            "measure" => {
                self.bump();
                self.measure(pos)?;
            }
            "barrier" => {
                self.bump();
                let args = self.arg_list()?;
                for (a, p) in &args {
                    self.qubit_arg(a, *p)?;
                }
                self.expect(Tok::Semi)?;
            }
            "opaque" | "reset" | "if" | "OPENQASM" => {
                return self.err(pos, ParseErrorKind::Unsupported(format!("'{word}' statement")));
            }
            _ => self.call(pos)?,
        }
        Ok(())
    }

    fn register(&mut self, quantum: bool) -> PResult<()> {
        let (name, pos) = self.ident()?;
        self.expect(Tok::LBracket)?;
        let size_pos = self.pos();
        let size = self.integer()?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::Semi)?;
        if self.qregs.iter().chain(&self.cregs).any(|r| r.name == name) {
            return self.err(pos, ParseErrorKind::DuplicateRegister(name));
        }
        if size == 0 {
            return self.err(size_pos, ParseErrorKind::Syntax("register size must be positive".into()));
        }
        let (regs, cap, total) = if quantum {
            (&mut self.qregs, MAX_QUBITS, self.circuit.n_qubits)
        } else {
            (&mut self.cregs, MAX_CLBITS, self.circuit.n_clbits)
        };
        if size > (cap - total) as u64 {
            let what = if quantum { "qubits" } else { "classical bits" };
            return Err(ParseError { pos: size_pos, kind: ParseErrorKind::LimitExceeded(format!("more than {cap} {what}")) });
        }
        let size = size as usize;
        regs.push(Reg { name, offset: total, size });
        if quantum {
            self.circuit.n_qubits += size;
            self.measured.resize(self.circuit.n_qubits, false);
        } else {
            self.circuit.n_clbits += size;
        }
        Ok(())
    }

    /// `name` or `name[index]`, unresolved.
    fn arg(&mut self) -> PResult<((String, Option<u64>), Pos)> {
        let (name, pos) = self.ident()?;
        let index = if self.eat(&Tok::LBracket) {
            let i = self.integer()?;
            self.expect(Tok::RBracket)?;
            Some(i)
        } else {
            None
        };
        Ok(((name, index), pos))
    }

    fn arg_list(&mut self) -> PResult<Vec<((String, Option<u64>), Pos)>> {
        let mut out = vec![self.arg()?];
        while self.eat(&Tok::Comma) {
            out.push(self.arg()?);
        }
        Ok(out)
    }

    fn resolve_in(&self, regs: &[Reg], arg: &(String, Option<u64>), pos: Pos) -> PResult<Option<Vec<usize>>> {
        let Some(reg) = regs.iter().find(|r| r.name == arg.0) else {
            return Ok(None);
        };
        Ok(Some(match arg.1 {
            None => (reg.offset..reg.offset + reg.size).collect(),
            Some(i) if i < reg.size as u64 => vec![reg.offset + i as usize],
            Some(i) => {
                return self.err(pos, ParseErrorKind::IndexOutOfRange { name: reg.name.clone(), index: i, size: reg.size })
            }
        }))
    }

    fn qubit_arg(&self, arg: &(String, Option<u64>), pos: Pos) -> PResult<Vec<usize>> {
        if let Some(q) = self.resolve_in(&self.qregs, arg, pos)? {
            return Ok(q);
        }
        if self.cregs.iter().any(|r| r.name == arg.0) {
            return self.syntax_at(pos, format!("'{}' is a classical register where a qubit is expected", arg.0));
        }
        self.err(pos, ParseErrorKind::UnknownRegister(arg.0.clone()))
    }

    fn clbit_arg(&self, arg: &(String, Option<u64>), pos: Pos) -> PResult<Vec<usize>> {
        if let Some(c) = self.resolve_in(&self.cregs, arg, pos)? {
            return Ok(c);
        }
        if self.qregs.iter().any(|r| r.name == arg.0) {
            return self.syntax_at(pos, format!("'{}' is a quantum register where a classical bit is expected", arg.0));
        }
        self.err(pos, ParseErrorKind::UnknownRegister(arg.0.clone()))
    }

    fn syntax_at<T>(&self, pos: Pos, msg: String) -> PResult<T> {
        self.err(pos, ParseErrorKind::Syntax(msg))
    }

    /// Expands register arguments into one operand list per application.
    fn broadcast(&self, groups: Vec<Vec<usize>>, pos: Pos) -> PResult<Vec<Vec<usize>>> {
        let width = groups.iter().map(Vec::len).filter(|&l| l > 1).fold(1, usize::max);
        for g in &groups {
            if g.len() != 1 && g.len() != width {
                return self.err(pos, ParseErrorKind::BroadcastMismatch(g.len(), width));
            }
        }
        Ok((0..width)
            .map(|k| groups.iter().map(|g| if g.len() == 1 { g[0] } else { g[k] }).collect())
            .collect())
    }

    fn measure(&mut self, pos: Pos) -> PResult<()> {
        let (qa, qp) = self.arg()?;
        self.expect(Tok::Arrow)?;
        let (ca, cp) = self.arg()?;
        self.expect(Tok::Semi)?;
        let q = self.qubit_arg(&qa, qp)?;
        let c = self.clbit_arg(&ca, cp)?;
        if q.len() != c.len() {
            return self.err(pos, ParseErrorKind::BroadcastMismatch(q.len(), c.len()));
        }
        for (q, c) in q.into_iter().zip(c) {
            self.measured[q] = true;
            self.push_top(Instruction::Measure { qubit: q, clbit: c }, pos)?;
        }
        Ok(())
    }

    fn push_top(&mut self, ins: Instruction, pos: Pos) -> PResult<()> {
        self.emitted += 1;
        if self.emitted > MAX_INSTRUCTIONS {
            return self.err(pos, ParseErrorKind::LimitExceeded(format!("more than {MAX_INSTRUCTIONS} instructions")));
        }
        self.circuit.instructions.push(ins);
        Ok(())
    }

    fn resolve_callee(&self, name: &str) -> Option<Callee> {
        if let Some(&i) = self.def_index.get(name) {
            return Some(Callee::Def(i));
        }
        if let Some((target, declared_params, map)) = alias(name) {
            return Some(Callee::Builtin { spec: gate(target)?, declared_params, map });
        }
        gate(name).map(|spec| Callee::Builtin { spec, declared_params: spec.param_count, map: same })
    }

    fn callee_shape(&self, c: Callee) -> (usize, usize) {
        match c {
            Callee::Builtin { spec, declared_params, .. } => (declared_params, spec.arity),
            Callee::Def(i) => (self.defs[i].n_params, self.defs[i].n_qubits),
        }
    }

    /// `name (exprs)? args` where expressions may use `formals`.
    fn call_head(&mut self, formals: &[String]) -> PResult<(Callee, String, Vec<Expr>, Vec<((String, Option<u64>), Pos)>, Pos)> {
        let (name, pos) = match self.peek().clone() {
            // `U` and `CX` are spelled like identifiers but are builtins.
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => (s, self.bump().1),
            other => return self.syntax(format!("expected gate name, found {}", other.describe())),
        };
        let params = if self.eat(&Tok::LParen) {
            let mut out = Vec::new();
            if !self.eat(&Tok::RParen) {
                out.push(self.expr(formals, 0)?);
                while self.eat(&Tok::Comma) {
                    out.push(self.expr(formals, 0)?);
                }
                self.expect(Tok::RParen)?;
            }
            out
        } else {
            Vec::new()
        };
        let args = self.arg_list()?;
        self.expect(Tok::Semi)?;
        let callee = match self.resolve_callee(&name) {
            Some(c) => c,
            None => return self.err(pos, ParseErrorKind::UnknownGate(name)),
        };
        let (n_params, n_qubits) = self.callee_shape(callee);
        if args.len() != n_qubits {
            return self.err(pos, ParseErrorKind::ArityMismatch { name, found: args.len(), declared: n_qubits });
        }
        if params.len() != n_params {
            return self.err(pos, ParseErrorKind::ParamCountMismatch { name, found: params.len(), declared: n_params });
        }
        Ok((callee, name, params, args, pos))
    }

    fn call(&mut self, pos: Pos) -> PResult<()> {
        let (callee, _, params, args, _) = self.call_head(&[])?;
        let values = self.eval_all(&params, &[], pos)?;
        let mut groups = Vec::new();
        for (a, p) in &args {
            groups.push(self.qubit_arg(a, *p)?);
        }
        for qubits in self.broadcast(groups, pos)? {
            for (k, q) in qubits.iter().enumerate() {
                if qubits[..k].contains(q) {
                    return self.err(pos, ParseErrorKind::RepeatedQubit);
                }
                if self.measured[*q] {
                    return self.err(pos, ParseErrorKind::InvalidCircuit(format!("operation on qubit {q} after it was measured")));
                }
            }
            let mut circuit = std::mem::replace(&mut self.circuit, Circuit::new(0, 0));
            let result = self.apply(&mut circuit, callee, &values, &qubits, pos);
            self.circuit = circuit;
            result?;
        }
        Ok(())
    }

    fn eval_all(&self, exprs: &[Expr], env: &[f64], pos: Pos) -> PResult<Vec<f64>> {
        exprs
            .iter()
            .map(|e| {
                let v = e.eval(env);
                if v.is_finite() {
                    Ok(v)
                } else {
                    self.syntax_at(pos, "parameter evaluates to a non-finite value".into())
                }
            })
            .collect()
    }

    fn apply(&mut self, target: &mut Circuit, callee: Callee, params: &[f64], qubits: &[usize], pos: Pos) -> PResult<()> {
        self.emitted += 1;
        if self.emitted > MAX_INSTRUCTIONS {
            return self.err(pos, ParseErrorKind::LimitExceeded(format!("more than {MAX_INSTRUCTIONS} instructions")));
        }
        match callee {
            Callee::Builtin { spec, map, .. } => {
                let params = map(params).into_iter().map(ParamValue::Literal).collect();
                target.instructions.push(Instruction::Gate(GateOp { gate: spec, params, qubits: qubits.to_vec(), adjoint: false }));
            }
            Callee::Def(i) => {
                if let Some(body) = &self.defs[i].compiled {
                    let name = self.defs[i].name.clone();
                    if !target.subcircuits.contains_key(&name) {
                        target.subcircuits.insert(name.clone(), body.clone());
                    }
                    target.instructions.push(Instruction::Composite(CompositeOp {
                        sub: name,
                        qubits: qubits.to_vec(),
                        clbits: Vec::new(),
                        inverted: false,
                    }));
                } else {
                    let ops: Vec<(Callee, Vec<Expr>, Vec<usize>, Pos)> = self.defs[i]
                        .body
                        .iter()
                        .map(|op| (op.callee, op.params.clone(), op.args.clone(), op.pos))
                        .collect();
                    for (c, exprs, args, p) in ops {
                        let values = self.eval_all(&exprs, params, p)?;
                        let mapped: Vec<usize> = args.iter().map(|&a| qubits[a]).collect();
                        self.apply(target, c, &values, &mapped, p)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn gate_def(&mut self) -> PResult<()> {
        let (name, pos) = match self.peek().clone() {
            Tok::Ident(s) => (s, self.bump().1),
            other => return self.syntax(format!("expected gate name, found {}", other.describe())),
        };
        if KEYWORDS.contains(&name.as_str()) {
            return self.syntax_at(pos, format!("'{name}' is a reserved word"));
        }
        let mut formals = Vec::new();
        if self.eat(&Tok::LParen) {
            if !self.eat(&Tok::RParen) {
                formals.push(self.ident()?.0);
                while self.eat(&Tok::Comma) {
                    formals.push(self.ident()?.0);
                }
                self.expect(Tok::RParen)?;
            }
        }
        let mut qargs = vec![self.ident()?.0];
        while self.eat(&Tok::Comma) {
            qargs.push(self.ident()?.0);
        }
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if *self.peek() == Tok::Eof {
                return self.syntax("unterminated gate body".into());
            }
            if *self.peek() == Tok::Ident("barrier".into()) {
                self.bump();
                let args = self.arg_list()?;
                self.expect(Tok::Semi)?;
                for ((a, idx), p) in args {
                    if idx.is_some() || !qargs.contains(&a) {
                        return self.syntax_at(p, format!("'{a}' is not an argument of gate '{name}'"));
                    }
                }
                continue;
            }
            let (callee, _, params, args, p) = self.call_head(&formals)?;
            let mut idx = Vec::new();
            for ((a, index), ap) in args {
                match (index, qargs.iter().position(|q| *q == a)) {
                    (None, Some(k)) if !idx.contains(&k) => idx.push(k),
                    (None, Some(_)) => return self.err(ap, ParseErrorKind::RepeatedQubit),
                    _ => return self.syntax_at(ap, format!("'{a}' is not an argument of gate '{name}'")),
                }
            }
            body.push(BodyOp { callee, params, args: idx, pos: p });
        }
        if self.def_index.contains_key(&name) || QELIB1.contains(&name.as_str()) {
            return self.err(pos, ParseErrorKind::DuplicateGateDef(name));
        }
        if self.defs.len() >= MAX_DEFS {
            return self.err(pos, ParseErrorKind::LimitExceeded(format!("more than {MAX_DEFS} gate definitions")));
        }
        let mut seen = qargs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != qargs.len() {
            return self.err(pos, ParseErrorKind::RepeatedQubit);
        }
        let mut def = Def { name: name.clone(), n_params: formals.len(), n_qubits: qargs.len(), body, compiled: None, weight: 0 };
        if def.n_params == 0 {
            let mut c = Circuit::new(def.n_qubits, 0);
            let ops: Vec<(Callee, Vec<Expr>, Vec<usize>, Pos)> =
                def.body.iter().map(|op| (op.callee, op.params.clone(), op.args.clone(), op.pos)).collect();
            for (callee, exprs, args, p) in ops {
                let values = self.eval_all(&exprs, &[], p)?;
                self.apply(&mut c, callee, &values, &args, p)?;
            }
            let weight = c.instructions.len()
                + c.subcircuits.keys().map(|k| self.defs[self.def_index[k]].weight).sum::<usize>();
            if weight > MAX_INSTRUCTIONS {
                return self.err(pos, ParseErrorKind::LimitExceeded(format!("gate '{name}' expands too far")));
            }
            def.weight = weight;
            def.compiled = Some(c);
        }
        self.def_index.insert(name, self.defs.len());
        self.defs.push(def);
        Ok(())
    }

    fn expr(&mut self, formals: &[String], depth: usize) -> PResult<Expr> {
        if depth > MAX_EXPR_DEPTH {
            return self.err(self.pos(), ParseErrorKind::LimitExceeded("expression nested too deeply".into()));
        }
        let mut lhs = self.term(formals, depth + 1)?;
        loop {
            let op = match self.peek() {
                Tok::Plus => '+',
                Tok::Minus => '-',
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term(formals, depth + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self, formals: &[String], depth: usize) -> PResult<Expr> {
        let mut lhs = self.power(formals, depth + 1)?;
        loop {
            let op = match self.peek() {
                Tok::Star => '*',
                Tok::Slash => '/',
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.power(formals, depth + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn power(&mut self, formals: &[String], depth: usize) -> PResult<Expr> {
        if depth > MAX_EXPR_DEPTH {
            return self.err(self.pos(), ParseErrorKind::LimitExceeded("expression nested too deeply".into()));
        }
        let base = self.unary(formals, depth + 1)?;
        if self.eat(&Tok::Caret) {
            let exp = self.power(formals, depth + 1)?;
            return Ok(Expr::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self, formals: &[String], depth: usize) -> PResult<Expr> {
        if depth > MAX_EXPR_DEPTH {
            return self.err(self.pos(), ParseErrorKind::LimitExceeded("expression nested too deeply".into()));
        }
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary(formals, depth + 1)?)));
        }
        if self.eat(&Tok::Plus) {
            return self.unary(formals, depth + 1);
        }
        let pos = self.pos();
        match self.bump().0 {
            Tok::Number(s) => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
                _ => self.syntax_at(pos, format!("invalid number {s}")),
            },
            Tok::LParen => {
                let e = self.expr(formals, depth + 1)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "pi" => Ok(Expr::Num(PI)),
            Tok::Ident(s) => {
                if let Some(k) = formals.iter().position(|f| *f == s) {
                    return Ok(Expr::Param(k));
                }
                let f: fn(f64) -> f64 = match s.as_str() {
                    "sin" => f64::sin,
                    "cos" => f64::cos,
                    "tan" => f64::tan,
                    "exp" => f64::exp,
                    "ln" => f64::ln,
                    "sqrt" => f64::sqrt,
                    _ => return self.syntax_at(pos, format!("unknown identifier '{s}' in expression")),
                };
                self.expect(Tok::LParen)?;
                let e = self.expr(formals, depth + 1)?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Call(f, Box::new(e)))
            }
            other => self.syntax_at(pos, format!("expected expression, found {}", other.describe())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\n";

    #[test]
    fn bell_program() {
        let c = parse(&format!("{HEADER}qreg qr[2];\ncreg cr[2];\nh qr[0];\ncx qr[0],qr[1];\nmeasure qr -> cr;\n")).unwrap();
        assert_eq!(c.n_qubits, 2);
        assert_eq!(c.instructions.len(), 4);
        assert_eq!(c.instructions[1], Instruction::gate("cx", &[], &[0, 1]));
        assert_eq!(c.measurements(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn empty_file_is_syntax_error_on_line_one() {
        let e = parse("").unwrap_err();
        assert_eq!(e.pos.line, 1);
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn subcircuit_called_with_classical_operands() {
        let text = format!(
            "{HEADER}gate subcircuit q0,q1 {{ rx(6.12) q0; cx q0,q1; }}\nqreg qr[2];\ncreg cr[2];\nsubcircuit qr[0],qr[1],cr[0],cr[1];\n"
        );
        let e = parse(&text).unwrap_err();
        assert_eq!(
            e.kind,
            ParseErrorKind::ArityMismatch { name: "subcircuit".into(), found: 4, declared: 2 }
        );
        assert_eq!(e.to_string(), "line 6:1: 'subcircuit' uses 4 qubits but is declared for 2 qubits");
    }

    #[test]
    fn duplicate_definitions() {
        let def = "gate ryy(theta) a,b { rx(pi/2) a; rx(pi/2) b; cx a,b; rz(theta) b; cx a,b; rx(-pi/2) a; rx(-pi/2) b; }\n";
        let e = parse(&format!("{HEADER}{def}{def}qreg q[2];")).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateGateDef("ryy".into()));
        assert_eq!(e.pos.line, 4);
        let e = parse(&format!("{HEADER}gate h a {{ x a; }}")).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateGateDef("h".into()));
    }

    #[test]
    fn unknown_gate() {
        let e = parse(&format!("{HEADER}qreg q[1];\nfoo q[0];")).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownGate("foo".into()));
        assert_eq!(e.to_string(), "line 4:1: Cannot find gate definition for 'foo'");
    }

    #[test]
    fn parameterized_definition_is_expanded() {
        let c = parse(&format!("{HEADER}gate g(a,b) x,y {{ rz(a*2) x; cry(b-pi) y,x; }}\nqreg q[2];\ng(0.5,1) q[1],q[0];")).unwrap();
        assert_eq!(c.instructions[0], Instruction::gate("rz", &[1.0], &[1]));
        assert_eq!(c.instructions[1], Instruction::gate("cry", &[1.0 - PI], &[0, 1]));
        assert!(c.subcircuits.is_empty());
    }

    #[test]
    fn parameter_free_definition_becomes_subcircuit() {
        let c = parse(&format!("{HEADER}gate a x {{ h x; }}\ngate b x,y {{ a x; cx x,y; }}\nqreg q[3];\nb q[2],q[0];")).unwrap();
        assert_eq!(
            c.instructions,
            vec![Instruction::Composite(CompositeOp { sub: "b".into(), qubits: vec![2, 0], clbits: vec![], inverted: false })]
        );
        assert!(c.subcircuits["b"].subcircuits.contains_key("a"));
    }

    #[test]
    fn broadcasting_and_multiple_registers() {
        let c = parse(&format!("{HEADER}qreg a[2];\nqreg b[2];\ncreg c[4];\ncx a,b;\nh a[1];\nbarrier a,b;\nmeasure b -> c[0];")).unwrap_err();
        assert!(matches!(c.kind, ParseErrorKind::BroadcastMismatch(2, 1)));
        let c = parse(&format!("{HEADER}qreg a[2];\nqreg b[2];\ncreg c[2];\ncx a,b;\nU(1,2,3) b[0];\nCX a[0],b[1];\nmeasure b -> c;")).unwrap();
        assert_eq!(c.n_qubits, 4);
        assert_eq!(c.instructions[0], Instruction::gate("cx", &[], &[0, 2]));
        assert_eq!(c.instructions[1], Instruction::gate("cx", &[], &[1, 3]));
        assert_eq!(c.instructions[2], Instruction::gate("u", &[1.0, 2.0, 3.0], &[2]));
        assert_eq!(c.measurements(), vec![(2, 0), (3, 1)]);
    }

    #[test]
    fn register_limits() {
        let e = parse(&format!("{HEADER}qreg q[99999999999999999999999];")).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::LimitExceeded(_)));
        let e = parse(&format!("{HEADER}qreg q[65];")).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::LimitExceeded(_)));
        let e = parse(&format!("{HEADER}qreg q[2];\nx q[2];")).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::IndexOutOfRange { .. }));
    }

    #[test]
    fn gate_after_measure_rejected() {
        let e = parse(&format!("{HEADER}qreg q[1];\ncreg c[1];\nmeasure q[0] -> c[0];\nx q[0];")).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::InvalidCircuit(_)));
    }

    #[test]
    fn deep_expressions_do_not_overflow() {
        let deep = "(".repeat(10_000);
        let e = parse(&format!("{HEADER}qreg q[1];\nrx({deep}1) q[0];")).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::LimitExceeded(_)));
        let minus = "-".repeat(10_000);
        assert!(parse(&format!("{HEADER}qreg q[1];\nrx({minus}1) q[0];")).is_err());
    }

    #[test]
    fn exponential_expansion_is_capped() {
        let mut text = format!("{HEADER}gate g0(a) x {{ rz(a) x; }}\n");
        for k in 1..30 {
            text.push_str(&format!("gate g{k}(a) x {{ g{}(a) x; g{}(a) x; }}\n", k - 1, k - 1));
        }
        text.push_str("qreg q[1];\ng29(1) q[0];");
        let e = parse(&text).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::LimitExceeded(_)));
    }
}
