//! Basic types, constructor signatures and the gate table.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::Unitary;
use crate::syntax::Pos;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeclError {
    #[error("type `{0}` declared twice")]
    DuplicateType(String),
    #[error("constructor `{0}` declared twice")]
    DuplicateCons(String),
    #[error("gate `{0}` declared twice or shadows a built-in")]
    DuplicateGate(String),
    #[error("constructor `{cons}` of classical type `{ty}` takes quantum arguments")]
    QuantumInClassical { cons: String, ty: String },
    #[error("constructor `{cons}`: `{arg}` is not a {expected} basic type")]
    WrongArgKind { cons: String, arg: String, expected: &'static str },
    #[error("constructor `{cons}`: unknown type `{arg}`")]
    UnknownArgType { cons: String, arg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicType {
    pub name: String,
    pub quantum: bool,
    pub constructors: Vec<String>,
    pub pos: Pos,
}

/// `c :: B_c ; B_q -> B`
#[derive(Debug, Clone, PartialEq)]
pub struct ConsSig {
    pub name: String,
    pub classical: Vec<String>,
    pub quantum: Vec<String>,
    pub result: String,
    pub pos: Pos,
}

impl ConsSig {
    pub fn arity(&self) -> usize {
        self.classical.len() + self.quantum.len()
    }
}

#[derive(Debug, Clone)]
pub struct Decls {
    pub types: BTreeMap<String, BasicType>,
    pub cons: BTreeMap<String, ConsSig>,
    pub gates: BTreeMap<String, Unitary<f64>>,
    /// Declaration order of user gates, for printing.
    pub gate_order: Vec<String>,
}

impl Default for Decls {
    fn default() -> Self {
        Self::new()
    }
}

impl Decls {
    /// Built-ins: `Q` (no constructors), `Out` with `inj0, inj1 :: ;Q -> Out`,
    /// and the standard gate table.
    pub fn new() -> Self {
        let mut d = Decls { types: BTreeMap::new(), cons: BTreeMap::new(), gates: BTreeMap::new(), gate_order: Vec::new() };
        let p = Pos::default();
        d.add_type("Q", true, p).expect("fresh");
        d.add_type("Out", true, p).expect("fresh");
        for inj in ["inj0", "inj1"] {
            let sig = ConsSig { name: inj.into(), classical: vec![], quantum: vec!["Q".into()], result: "Out".into(), pos: p };
            d.add_cons(sig).expect("fresh");
        }
        for g in Unitary::<f64>::BUILTIN_NAMES {
            d.gates.insert(g.to_string(), Unitary::builtin(g).expect("built-in"));
        }
        d
    }

    pub fn add_type(&mut self, name: &str, quantum: bool, pos: Pos) -> Result<(), DeclError> {
        if self.types.contains_key(name) {
            return Err(DeclError::DuplicateType(name.into()));
        }
        self.types.insert(name.into(), BasicType { name: name.into(), quantum, constructors: vec![], pos });
        Ok(())
    }

    pub fn add_cons(&mut self, sig: ConsSig) -> Result<(), DeclError> {
        if self.cons.contains_key(&sig.name) {
            return Err(DeclError::DuplicateCons(sig.name));
        }
        if let Some(t) = self.types.get_mut(&sig.result) {
            t.constructors.push(sig.name.clone());
        }
        self.cons.insert(sig.name.clone(), sig);
        Ok(())
    }

    pub fn add_gate(&mut self, name: &str, u: Unitary<f64>, _pos: Pos) -> Result<(), DeclError> {
        if self.gates.contains_key(name) {
            return Err(DeclError::DuplicateGate(name.into()));
        }
        self.gates.insert(name.into(), u);
        self.gate_order.push(name.into());
        Ok(())
    }

    pub fn is_cons(&self, name: &str) -> bool {
        self.cons.contains_key(name)
    }

    pub fn is_quantum(&self, ty: &str) -> Option<bool> {
        self.types.get(ty).map(|t| t.quantum)
    }

    /// Signature constraints: classical types take no quantum arguments, and
    /// each argument type exists in the right class.
    pub fn validate(&self) -> Vec<(DeclError, Pos)> {
        let mut errs = Vec::new();
        for sig in self.cons.values() {
            let result_quantum = self.is_quantum(&sig.result).unwrap_or(false);
            if !result_quantum && !sig.quantum.is_empty() {
                errs.push((DeclError::QuantumInClassical { cons: sig.name.clone(), ty: sig.result.clone() }, sig.pos));
            }
            for (args, want_quantum, expected) in
                [(&sig.classical, false, "classical"), (&sig.quantum, true, "quantum")]
            {
                for a in args {
                    match self.is_quantum(a) {
                        None => errs.push((DeclError::UnknownArgType { cons: sig.name.clone(), arg: a.clone() }, sig.pos)),
                        Some(q) if q != want_quantum => errs.push((
                            DeclError::WrongArgKind { cons: sig.name.clone(), arg: a.clone(), expected },
                            sig.pos,
                        )),
                        _ => {}
                    }
                }
            }
        }
        errs
    }

    /// Preamble text that reparses to the user declarations.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        let mut types: Vec<&BasicType> = self.types.values().filter(|t| t.name != "Q" && t.name != "Out").collect();
        types.sort_by_key(|t| t.pos);
        for t in types {
            let kw = if t.quantum { "qdata" } else { "data" };
            let cons: Vec<String> = t
                .constructors
                .iter()
                .map(|c| {
                    let sig = &self.cons[c];
                    if sig.arity() == 0 {
                        c.clone()
                    } else {
                        format!("{}({}; {})", c, sig.classical.join(", "), sig.quantum.join(", "))
                    }
                })
                .collect();
            out.push_str(&format!("{kw} {} = {}\n", t.name, cons.join(" | ")));
        }
        for g in &self.gate_order {
            out.push_str(&format!("unitary {g} = {}\n", crate::syntax::fmt_matrix(&self.gates[g])));
        }
        out
    }
}
