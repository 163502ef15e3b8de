use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use super::parser::QELIB1;
use super::EmitError;
use crate::circuit::{catalog, inverse_circuit, Circuit, GateOp, Instruction};
use crate::defects::{Defect, DefectSet};

/// A `gate` definition: name, formal qubit names and body statements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateDef {
    pub name: String,
    pub qubit_args: Vec<String>,
    pub body: Vec<String>,
}

/// An OpenQASM 2.0 document in emission order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QasmDocument {
    pub version: String,
    pub includes: Vec<String>,
    pub gate_defs: Vec<GateDef>,
    pub register_decls: Vec<String>,
    pub statements: Vec<String>,
}

impl fmt::Display for QasmDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "OPENQASM {};", self.version)?;
        for inc in &self.includes {
            writeln!(f, "include \"{inc}\";")?;
        }
        for def in &self.gate_defs {
            writeln!(f, "gate {} {} {{", def.name, def.qubit_args.join(","))?;
            for line in &def.body {
                writeln!(f, "  {line}")?;
            }
            writeln!(f, "}}")?;
        }
        for decl in &self.register_decls {
            writeln!(f, "{decl}")?;
        }
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Exports `c` as OpenQASM 2.0 text.
pub fn emit(c: &Circuit) -> Result<String, EmitError> {
    emit_with(c, &DefectSet::none())
}

/// [`emit`] with planted defects applied.
pub fn emit_with(c: &Circuit, defects: &DefectSet) -> Result<String, EmitError> {
    Ok(document(c, defects)?.to_string())
}

fn document(c: &Circuit, defects: &DefectSet) -> Result<QasmDocument, EmitError> {
    let mut e = Emitter { defects, defs: Vec::new(), by_key: HashMap::new(), used: BTreeSet::new() };
    let qname = |q: usize| format!("qr[{q}]");
    let cname = |b: usize| format!("cr[{b}]");
    let mut statements = Vec::new();
    for ins in &c.instructions {
        statements.push(e.statement(ins, &c.subcircuits, &qname, &cname)?);
    }
    let mut register_decls = Vec::new();
    if c.n_qubits > 0 {
        register_decls.push(format!("qreg qr[{}];", c.n_qubits));
    }
    if c.n_clbits > 0 {
        register_decls.push(format!("creg cr[{}];", c.n_clbits));
    }
    Ok(QasmDocument {
        version: "2.0".into(),
        includes: vec!["qelib1.inc".into()],
        gate_defs: e.defs,
        register_decls,
        statements,
    })
}

/// Scientific notation with 17 significant digits; parses back to the same `f64`.
fn angle(v: f64) -> String {
    format!("{v:.16e}")
}

struct Emitter<'d> {
    defects: &'d DefectSet,
    defs: Vec<GateDef>,
    by_key: HashMap<String, String>,
    used: BTreeSet<String>,
}

fn reserved(name: &str) -> bool {
    QELIB1.contains(&name)
        || catalog().lookup(name).is_some()
        || matches!(name, "gate" | "qreg" | "creg" | "measure" | "barrier" | "reset" | "opaque" | "if" | "include" | "pi")
}

fn sanitize(name: &str) -> String {
    let mut s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if !s.starts_with(|c: char| c.is_ascii_lowercase()) {
        s.insert_str(0, "g_");
    }
    s
}

impl Emitter<'_> {
    fn gate_statement(&mut self, g: &GateOp, qname: &dyn Fn(usize) -> String) -> Result<String, EmitError> {
        let mut g = g.clone();
        if g.adjoint {
            g = GateOp { adjoint: false, ..g }.inverse();
        }
        let params = g
            .bound_params()
            .map_err(|e| EmitError::UnrepresentableConstruct(e.to_string()))?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(EmitError::UnrepresentableConstruct("non-finite parameter".into()));
        }
        let name = if g.adjoint { self.adjoint_def(&g)? } else { g.gate.name.to_string() };
        let mut s = name;
        if !params.is_empty() {
            let _ = write!(s, "({})", params.iter().map(|&p| angle(p)).collect::<Vec<_>>().join(","));
        }
        let args: Vec<String> = g.qubits.iter().map(|&q| qname(q)).collect();
        let _ = write!(s, " {};", args.join(","));
        Ok(s)
    }

    /// `<gate>_dg`, defined as the gate applied three times (the gates that
    /// need an adjoint marker all satisfy `g⁴ = I`).
    fn adjoint_def(&mut self, g: &GateOp) -> Result<String, EmitError> {
        if !g.params.is_empty() {
            return Err(EmitError::UnrepresentableConstruct(format!("adjoint of parameterized gate '{}'", g.gate.name)));
        }
        let key = format!("adjoint:{}", g.gate.name);
        if let Some(name) = self.by_key.get(&key) {
            return Ok(name.clone());
        }
        let args: Vec<String> = (0..g.gate.arity).map(|k| format!("q{k}")).collect();
        let line = format!("{} {};", g.gate.name, args.join(","));
        let name = self.fresh_name(&format!("{}_dg", g.gate.name));
        self.defs.push(GateDef { name: name.clone(), qubit_args: args, body: vec![line.clone(), line.clone(), line] });
        self.by_key.insert(key, name.clone());
        Ok(name)
    }

    fn fresh_name(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut k = 1;
        while self.used.contains(&name) || reserved(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        self.used.insert(name.clone());
        name
    }

    fn statement(
        &mut self,
        ins: &Instruction,
        table: &BTreeMap<String, Circuit>,
        qname: &dyn Fn(usize) -> String,
        cname: &dyn Fn(usize) -> String,
    ) -> Result<String, EmitError> {
        match ins {
            Instruction::Gate(g) => self.gate_statement(g, qname),
            Instruction::Measure { qubit, clbit } => Ok(format!("measure {} -> {};", qname(*qubit), cname(*clbit))),
            Instruction::Composite(op) => {
                let sub = table.get(&op.sub).ok_or_else(|| {
                    EmitError::UnrepresentableConstruct(format!("unknown subcircuit '{}'", op.sub))
                })?;
                if sub.has_measure() {
                    return Err(EmitError::UnrepresentableConstruct(format!(
                        "subcircuit '{}' measures into classical bits",
                        op.sub
                    )));
                }
                if sub.n_qubits == 0 {
                    return Err(EmitError::UnrepresentableConstruct(format!("subcircuit '{}' has no qubits", op.sub)));
                }
                let name = self.define(&op.sub, sub, op.inverted)?;
                let mut args: Vec<String> = op.qubits.iter().map(|&q| qname(q)).collect();
                if self.defects.contains(Defect::CompositeClbitExport) {
                    args.extend(op.clbits.iter().map(|&b| cname(b)));
                }
                Ok(format!("{name} {};", args.join(",")))
            }
        }
    }

    fn define(&mut self, base: &str, sub: &Circuit, inverted: bool) -> Result<String, EmitError> {
        let body = if inverted {
            inverse_circuit(sub).map_err(|e| EmitError::UnrepresentableConstruct(e.to_string()))?
        } else {
            sub.clone()
        };
        let key = format!("{base}\u{0}{}", serde_json::to_string(&body).expect("circuits serialize"));
        if let Some(name) = self.by_key.get(&key) {
            return Ok(name.clone());
        }
        let formals: Vec<String> = (0..body.n_qubits).map(|k| format!("q{k}")).collect();
        let qname = |q: usize| format!("q{q}");
        let cname = |_: usize| String::new();
        let mut lines = Vec::new();
        for ins in &body.instructions {
            lines.push(self.statement(ins, &body.subcircuits, &qname, &cname)?);
        }
        let plain = sanitize(base);
        let name = if self.defects.contains(Defect::DuplicateGateDef) {
            // The inverse reuses the forward definition's name.
            if self.used.contains(&plain) && !reserved(&plain) {
                plain
            } else {
                self.fresh_name(&plain)
            }
        } else if inverted {
            self.fresh_name(&format!("{plain}_dg"))
        } else {
            self.fresh_name(&plain)
        };
        self.defs.push(GateDef { name: name.clone(), qubit_args: formals, body: lines });
        self.by_key.insert(key, name.clone());
        Ok(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CompositeOp, ParamValue};
    use crate::qasm::{parse, ParseErrorKind};

    fn bell() -> Circuit {
        let mut c = Circuit::new(2, 2);
        c.gate("h", &[], &[0]).gate("cx", &[], &[0, 1]).measure_all();
        c
    }

    fn with_pair(clbits: bool) -> Circuit {
        let mut sub = Circuit::new(2, if clbits { 2 } else { 0 });
        sub.gate("rx", &[6.12], &[0]).gate("cx", &[], &[0, 1]);
        let mut c = Circuit::new(2, 2);
        c.subcircuits.insert("subcirc_0".into(), sub);
        let cl = if clbits { vec![0, 1] } else { vec![] };
        for inverted in [false, true] {
            c.push(Instruction::Composite(CompositeOp { sub: "subcirc_0".into(), qubits: vec![0, 1], clbits: cl.clone(), inverted }));
        }
        c.measure_all();
        c
    }

    #[test]
    fn bell_text() {
        let text = emit(&bell()).unwrap();
        assert!(text.starts_with("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n"));
        assert!(text.contains("h qr[0];"));
        assert!(text.contains("cx qr[0],qr[1];"));
        assert!(text.contains("measure qr[0] -> cr[0];"));
        assert_eq!(parse(&text).unwrap(), bell());
    }

    #[test]
    fn empty_circuit() {
        let text = emit(&Circuit::new(1, 1)).unwrap();
        assert_eq!(text, "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg qr[1];\ncreg cr[1];\n");
    }

    #[test]
    fn one_definition_per_subcircuit() {
        let mut c = with_pair(false);
        c.instructions.insert(0, c.instructions[0].clone());
        let text = emit(&c).unwrap();
        assert_eq!(text.matches("gate subcirc_0 ").count(), 1);
        assert_eq!(text.matches("gate subcirc_0_dg ").count(), 1);
        let back = parse(&text).unwrap();
        assert_eq!(emit(&back).unwrap(), text);
    }

    #[test]
    fn classical_operands_dropped_when_unused() {
        let text = emit(&with_pair(true)).unwrap();
        assert!(text.contains("subcirc_0 qr[0],qr[1];"));
        parse(&text).unwrap();
    }

    #[test]
    fn measuring_subcircuit_rejected() {
        let mut c = with_pair(true);
        c.subcircuits.get_mut("subcirc_0").unwrap().measure(0, 0);
        assert!(matches!(emit(&c), Err(EmitError::UnrepresentableConstruct(_))));
    }

    #[test]
    fn unbound_symbol_rejected() {
        let mut c = Circuit::new(1, 0);
        c.push(Instruction::Gate(GateOp::new("rx", vec![ParamValue::Symbol("a".into())], vec![0]).unwrap()));
        assert!(matches!(emit(&c), Err(EmitError::UnrepresentableConstruct(_))));
    }

    #[test]
    fn adjoint_gate_definition() {
        let mut c = Circuit::new(2, 0);
        c.push(Instruction::Gate(GateOp { adjoint: true, ..GateOp::lit("iswap", &[], &[1, 0]) }));
        let text = emit(&c).unwrap();
        assert!(text.contains("gate iswap_dg q0,q1 {"));
        assert!(text.contains("iswap_dg qr[1],qr[0];"));
        parse(&text).unwrap();
    }

    #[test]
    fn angles_roundtrip_exactly() {
        for v in [0.1, -2.0 / 3.0, std::f64::consts::TAU, 1e-300, 5e-324] {
            assert_eq!(angle(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn duplicate_definition_defect() {
        let text = emit_with(&with_pair(false), &DefectSet::only(Defect::DuplicateGateDef)).unwrap();
        assert_eq!(text.matches("gate subcirc_0 ").count(), 2);
        assert_eq!(parse(&text).unwrap_err().kind, ParseErrorKind::DuplicateGateDef("subcirc_0".into()));
    }

    #[test]
    fn classical_operand_defect() {
        let text = emit_with(&with_pair(true), &DefectSet::only(Defect::CompositeClbitExport)).unwrap();
        assert!(text.contains("subcirc_0 qr[0],qr[1],cr[0],cr[1];"));
        assert_eq!(
            parse(&text).unwrap_err().kind,
            ParseErrorKind::ArityMismatch { name: "subcirc_0".into(), found: 4, declared: 2 }
        );
    }

    #[test]
    fn reserved_subcircuit_names_are_renamed() {
        let mut sub = Circuit::new(1, 0);
        sub.gate("x", &[], &[0]);
        let mut c = Circuit::new(1, 0);
        c.subcircuits.insert("h".into(), sub);
        c.push(Instruction::Composite(CompositeOp { sub: "h".into(), qubits: vec![0], clbits: vec![], inverted: false }));
        let text = emit(&c).unwrap();
        assert!(text.contains("gate h_1 q0 {"));
        parse(&text).unwrap();
    }
}
