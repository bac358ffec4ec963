//! VNN-LIB properties: box constraints on inputs `X_i` and linear
//! constraints on outputs `Y_j`, possibly under one `or` of `and`s.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::sexpr::{parse_all, Pos, SExpr};
use crate::error::{Error, Result};
use crate::model::{Bounds, Comparison, LinearConstraint, Property};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    X(usize),
    Y(usize),
}

#[derive(Debug, Clone, Default)]
struct LinExpr {
    coeffs: BTreeMap<Var, f64>,
    constant: f64,
}

impl LinExpr {
    fn constant(c: f64) -> Self {
        LinExpr {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    fn is_constant(&self) -> bool {
        self.coeffs.values().all(|a| *a == 0.0)
    }

    fn scale(mut self, k: f64) -> Self {
        self.coeffs.values_mut().for_each(|a| *a *= k);
        self.constant *= k;
        self
    }

    fn add(mut self, other: LinExpr) -> Self {
        for (v, a) in other.coeffs {
            *self.coeffs.entry(v).or_insert(0.0) += a;
        }
        self.constant += other.constant;
        self
    }
}

/// `expr cmp 0`.
#[derive(Debug, Clone)]
struct Atom {
    expr: LinExpr,
    cmp: Comparison,
    pos: Pos,
}

#[derive(Debug, Clone)]
enum Formula {
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    True,
    False,
}

impl Formula {
    fn atoms(&self, out: &mut Vec<Atom>) {
        match self {
            Formula::Atom(a) => out.push(a.clone()),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.atoms(out)),
            Formula::True | Formula::False => {}
        }
    }

    /// Disjunctive normal form; `[]` is false, `[[]]` is true.
    fn dnf(&self) -> Vec<Vec<Atom>> {
        match self {
            Formula::Atom(a) => vec![vec![a.clone()]],
            Formula::True => vec![vec![]],
            Formula::False => vec![],
            Formula::Or(fs) => fs.iter().flat_map(Formula::dnf).collect(),
            Formula::And(fs) => fs.iter().fold(vec![vec![]], |acc, f| conjoin(&acc, &f.dnf())),
        }
    }
}

fn conjoin(a: &[Vec<Atom>], b: &[Vec<Atom>]) -> Vec<Vec<Atom>> {
    a.iter()
        .flat_map(|x| {
            b.iter().map(move |y| {
                let mut c = x.clone();
                c.extend(y.iter().cloned());
                c
            })
        })
        .collect()
}

struct Declarations {
    inputs: BTreeMap<usize, Pos>,
    outputs: BTreeMap<usize, Pos>,
}

fn parse_var_name(name: &str) -> Option<Var> {
    let (kind, idx) = name.split_once('_')?;
    let idx: usize = idx.parse().ok()?;
    match kind {
        "X" => Some(Var::X(idx)),
        "Y" => Some(Var::Y(idx)),
        _ => None,
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let first = s.chars().next()?;
    if !(first.is_ascii_digit() || first == '-' || first == '+' || first == '.') {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl Declarations {
    fn term(&self, e: &SExpr) -> Result<LinExpr> {
        match e {
            SExpr::Atom(s, _) => {
                if let Some(v) = parse_number(s) {
                    return Ok(LinExpr::constant(v));
                }
                let declared = match parse_var_name(s) {
                    Some(v @ Var::X(i)) if self.inputs.contains_key(&i) => Some(v),
                    Some(v @ Var::Y(i)) if self.outputs.contains_key(&i) => Some(v),
                    _ => None,
                };
                let var = declared.ok_or_else(|| e.error(format!("unknown symbol '{s}'")))?;
                let mut expr = LinExpr::default();
                expr.coeffs.insert(var, 1.0);
                Ok(expr)
            }
            SExpr::List(items, _) => {
                let (head, args) = split_head(e, items)?;
                match head {
                    "+" => args.iter().try_fold(LinExpr::default(), |acc, a| Ok(acc.add(self.term(a)?))),
                    "-" => match args {
                        [] => Err(e.error("'-' needs an argument")),
                        [only] => Ok(self.term(only)?.scale(-1.0)),
                        [first, rest @ ..] => rest
                            .iter()
                            .try_fold(self.term(first)?, |acc, a| Ok(acc.add(self.term(a)?.scale(-1.0)))),
                    },
                    "*" => {
                        let mut factor = 1.0;
                        let mut variable: Option<LinExpr> = None;
                        for a in args {
                            let t = self.term(a)?;
                            if t.is_constant() {
                                factor *= t.constant;
                            } else if variable.is_some() {
                                return Err(a.error("non-linear term"));
                            } else {
                                variable = Some(t);
                            }
                        }
                        Ok(match variable {
                            Some(v) => v.scale(factor),
                            None => LinExpr::constant(factor),
                        })
                    }
                    "/" => match args {
                        [num, den] => {
                            let d = self.term(den)?;
                            if !d.is_constant() || d.constant == 0.0 {
                                return Err(den.error("non-linear term"));
                            }
                            Ok(self.term(num)?.scale(1.0 / d.constant))
                        }
                        _ => Err(e.error("'/' takes two arguments")),
                    },
                    other => Err(e.error(format!("unknown symbol '{other}'"))),
                }
            }
        }
    }

    fn formula(&self, e: &SExpr) -> Result<Formula> {
        match e {
            SExpr::Atom(s, _) => match s.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                _ => Err(e.error(format!("expected a constraint, found '{s}'"))),
            },
            SExpr::List(items, pos) => {
                let (head, args) = split_head(e, items)?;
                match head {
                    "and" => Ok(Formula::And(args.iter().map(|a| self.formula(a)).collect::<Result<_>>()?)),
                    "or" => Ok(Formula::Or(args.iter().map(|a| self.formula(a)).collect::<Result<_>>()?)),
                    "<=" | ">=" | "<" | ">" => {
                        let [lhs, rhs] = args else {
                            return Err(e.error(format!("'{head}' takes two arguments")));
                        };
                        let cmp = if head.starts_with('<') {
                            Comparison::Le
                        } else {
                            Comparison::Ge
                        };
                        let expr = self.term(lhs)?.add(self.term(rhs)?.scale(-1.0));
                        Ok(Formula::Atom(Atom { expr, cmp, pos: *pos }))
                    }
                    other => Err(e.error(format!("unknown symbol '{other}'"))),
                }
            }
        }
    }
}

fn split_head<'a>(e: &SExpr, items: &'a [SExpr]) -> Result<(&'a str, &'a [SExpr])> {
    match items.split_first() {
        Some((SExpr::Atom(h, _), rest)) => Ok((h.as_str(), rest)),
        Some((other, _)) => Err(other.error("expected an operator")),
        None => Err(e.error("empty expression")),
    }
}

fn declared_range(map: &BTreeMap<usize, Pos>, kind: &str) -> Result<usize> {
    for (expected, (&i, pos)) in map.iter().enumerate() {
        if i != expected {
            return Err(Error::parse(pos.line, pos.column, format!("{kind}_{expected} is not declared")));
        }
    }
    Ok(map.len())
}

/// Parses a VNN-LIB property.
pub fn parse_vnnlib(text: &str) -> Result<Property> {
    let forms = parse_all(text)?;
    let mut decls = Declarations {
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
    };
    let mut asserts = Vec::new();
    for form in &forms {
        let SExpr::List(items, _) = form else {
            return Err(form.error("expected a command"));
        };
        let (head, args) = split_head(form, items)?;
        match head {
            "declare-const" => {
                let [name, sort] = args else {
                    return Err(form.error("declare-const takes a name and a sort"));
                };
                if sort.as_atom() != Some("Real") {
                    return Err(sort.error("only Real constants are supported"));
                }
                let var = name
                    .as_atom()
                    .and_then(parse_var_name)
                    .ok_or_else(|| name.error("variables must be named X_i or Y_i"))?;
                let (map, idx) = match var {
                    Var::X(i) => (&mut decls.inputs, i),
                    Var::Y(i) => (&mut decls.outputs, i),
                };
                if map.insert(idx, name.pos()).is_some() {
                    return Err(name.error("duplicate declaration"));
                }
            }
            "assert" => {
                let [body] = args else {
                    return Err(form.error("assert takes one formula"));
                };
                asserts.push(body);
            }
            "set-logic" | "set-info" | "check-sat" | "get-model" | "exit" => {}
            other => return Err(form.error(format!("unknown symbol '{other}'"))),
        }
    }
    let n_in = declared_range(&decls.inputs, "X")?;
    let n_out = declared_range(&decls.outputs, "Y")?;
    if n_in == 0 {
        return Err(Error::parse(1, 1, "no input variables declared"));
    }
    if n_out == 0 {
        return Err(Error::parse(1, 1, "no output variables declared"));
    }

    let mut lower = vec![f64::NEG_INFINITY; n_in];
    let mut upper = vec![f64::INFINITY; n_in];
    let mut region: Vec<Vec<Atom>> = vec![vec![]];
    for body in asserts {
        let formula = decls.formula(body)?;
        let mut atoms = Vec::new();
        formula.atoms(&mut atoms);
        let touches_input = atoms.iter().any(|a| a.expr.coeffs.keys().any(|v| matches!(v, Var::X(_))));
        let touches_output = atoms.iter().any(|a| a.expr.coeffs.keys().any(|v| matches!(v, Var::Y(_))));
        if touches_input && touches_output {
            return Err(body.error("an assertion may not mix input and output variables"));
        }
        if !touches_input {
            region = conjoin(&region, &formula.dnf());
            continue;
        }
        let dnf = formula.dnf();
        let [conj] = dnf.as_slice() else {
            return Err(body.error("input constraints must form a single box"));
        };
        for atom in conj {
            let nonzero: Vec<(Var, f64)> =
                atom.expr.coeffs.iter().filter(|(_, a)| **a != 0.0).map(|(v, a)| (*v, *a)).collect();
            let [(Var::X(i), a)] = nonzero.as_slice() else {
                return Err(Error::parse(
                    atom.pos.line,
                    atom.pos.column,
                    "input constraints must bound a single variable",
                ));
            };
            // a*x + k cmp 0  =>  x cmp' -k/a
            let bound = -atom.expr.constant / a;
            let is_upper = (atom.cmp == Comparison::Le) == (*a > 0.0);
            if is_upper {
                upper[*i] = upper[*i].min(bound);
            } else {
                lower[*i] = lower[*i].max(bound);
            }
        }
    }

    let mut input_box = Vec::with_capacity(n_in);
    for i in 0..n_in {
        let pos = decls.inputs[&i];
        if !lower[i].is_finite() || !upper[i].is_finite() {
            return Err(Error::parse(pos.line, pos.column, format!("missing bound for X_{i}")));
        }
        if lower[i] > upper[i] {
            return Err(Error::parse(pos.line, pos.column, format!("empty range for X_{i}")));
        }
        input_box.push(Bounds::new(lower[i], upper[i]));
    }

    let output_region = region
        .into_iter()
        .map(|conj| {
            conj.into_iter()
                .map(|atom| {
                    let mut coeffs = vec![0.0; n_out];
                    for (v, a) in &atom.expr.coeffs {
                        if let Var::Y(j) = v {
                            coeffs[*j] = *a;
                        }
                    }
                    LinearConstraint::new(coeffs, atom.cmp, -atom.expr.constant)
                })
                .collect()
        })
        .collect();
    Property::new(input_box, n_out, output_region)
}

/// Parses several VNN-LIB files describing the same input box and joins
/// their output regions into one disjunction.
pub fn parse_vnnlib_files<S: AsRef<str>>(texts: &[S]) -> Result<Property> {
    let mut props = texts.iter().map(|t| parse_vnnlib(t.as_ref()));
    let first = props
        .next()
        .ok_or_else(|| Error::InvalidProperty("no property files given".into()))??;
    let mut region = first.output_region().to_vec();
    for p in props {
        let p = p?;
        if p.input_box() != first.input_box() || p.output_dim() != first.output_dim() {
            return Err(Error::InvalidProperty(
                "property files disagree on the input box or output arity".into(),
            ));
        }
        region.extend(p.output_region().iter().cloned());
    }
    Property::new(first.input_box().to_vec(), first.output_dim(), region)
}

/// Decimal rendering without exponent; always has a fractional part.
pub fn format_decimal(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}

fn emit_term(coeffs: &[f64]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(j, a)| {
            if *a == 1.0 {
                format!("Y_{j}")
            } else {
                format!("(* {} Y_{j})", format_decimal(*a))
            }
        })
        .collect();
    match terms.len() {
        0 => "0.0".to_string(),
        1 => terms.into_iter().next().expect("one term"),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

fn emit_constraint(c: &LinearConstraint) -> String {
    let op = match c.cmp {
        Comparison::Le => "<=",
        Comparison::Ge => ">=",
    };
    format!("({op} {} {})", emit_term(&c.coeffs), format_decimal(c.rhs))
}

/// Renders `property` as VNN-LIB. An empty output region is written as
/// `(assert false)`.
pub fn emit_vnnlib(property: &Property) -> String {
    let mut out = String::new();
    for i in 0..property.input_dim() {
        let _ = writeln!(out, "(declare-const X_{i} Real)");
    }
    for j in 0..property.output_dim() {
        let _ = writeln!(out, "(declare-const Y_{j} Real)");
    }
    out.push('\n');
    for (i, b) in property.input_box().iter().enumerate() {
        let _ = writeln!(out, "(assert (>= X_{i} {}))", format_decimal(b.lower));
        let _ = writeln!(out, "(assert (<= X_{i} {}))", format_decimal(b.upper));
    }
    out.push('\n');
    match property.output_region() {
        [] => out.push_str("(assert false)\n"),
        [single] => {
            for c in single {
                let _ = writeln!(out, "(assert {})", emit_constraint(c));
            }
        }
        many => {
            out.push_str("(assert (or\n");
            for conj in many {
                if conj.is_empty() {
                    out.push_str("  true\n");
                } else {
                    let parts: Vec<String> = conj.iter().map(emit_constraint).collect();
                    let _ = writeln!(out, "  (and {})", parts.join(" "));
                }
            }
            out.push_str("))\n");
        }
    }
    out
}
