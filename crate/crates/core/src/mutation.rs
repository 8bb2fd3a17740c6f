//! First-order source mutants of Python code.
//!
//! Every operator is a minimal textual rewrite at one syntax site found with
//! tree-sitter. Rewrite tables:
//!
//! | code | rewrite |
//! |------|---------|
//! | AOR  | `+`→`-`,`*`; `-`→`+`; `*`→`/`; `/`→`*`; `%`→`*`; `//`→`/`; `**`→`*` |
//! | AOD  | unary `-x`/`+x` → `x`; binary `a op b` → `a` |
//! | ROR  | `<`↔`>=`, `>`↔`<=`, `==`↔`!=` |
//! | COD  | `not x` → `x` |
//! | LOR  | `and`↔`or` |
//! | ZIL  | `for t in it:` → `for t in []:` |
//! | CRP  | integer `n`→`n+1`, non-empty string → empty, `True`↔`False` |
//! | BCR  | `break`↔`continue` |
//! | EXS  | one simple statement → `pass` (never a `return` alone in its block) |
//! | SIR  | drop one bound of a slice, `a[i:j]` → `a[:j]` / `a[i:]` |

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::Node;

use crate::model::{Provenance, VariantKind, VariantRecord};
use crate::surface::syntax::{parse_python, parses, ParseError};

/// Mutation operator codes, declared in alphabetical order so that the derived
/// ordering sorts by code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorCode {
    AOD,
    AOR,
    BCR,
    COD,
    CRP,
    EXS,
    LOR,
    ROR,
    SIR,
    ZIL,
}

impl OperatorCode {
    pub const ALL: [OperatorCode; 10] = [
        OperatorCode::AOD,
        OperatorCode::AOR,
        OperatorCode::BCR,
        OperatorCode::COD,
        OperatorCode::CRP,
        OperatorCode::EXS,
        OperatorCode::LOR,
        OperatorCode::ROR,
        OperatorCode::SIR,
        OperatorCode::ZIL,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorCode::AOD => "AOD",
            OperatorCode::AOR => "AOR",
            OperatorCode::BCR => "BCR",
            OperatorCode::COD => "COD",
            OperatorCode::CRP => "CRP",
            OperatorCode::EXS => "EXS",
            OperatorCode::LOR => "LOR",
            OperatorCode::ROR => "ROR",
            OperatorCode::SIR => "SIR",
            OperatorCode::ZIL => "ZIL",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            OperatorCode::AOD => "arithmetic operator deletion",
            OperatorCode::AOR => "arithmetic operator replacement",
            OperatorCode::BCR => "break/continue replacement",
            OperatorCode::COD => "conditional operator deletion",
            OperatorCode::CRP => "constant replacement",
            OperatorCode::EXS => "statement deletion",
            OperatorCode::LOR => "logical operator replacement",
            OperatorCode::ROR => "relational operator replacement",
            OperatorCode::SIR => "slice index removal",
            OperatorCode::ZIL => "zero iteration loop",
        }
    }
}

impl fmt::Display for OperatorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorCode {
    type Err = MutationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        OperatorCode::ALL
            .into_iter()
            .find(|op| op.as_str() == upper)
            .ok_or_else(|| MutationError::UnknownOperator(s.to_string()))
    }
}

/// Parses a comma-separated operator list such as `AOR,ROR`.
pub fn parse_operator_list(list: &str) -> Result<BTreeSet<OperatorCode>, MutationError> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("mutation site {start}..{end} no longer matches the code")]
    StaleSite { start: usize, end: usize },
    #[error("unknown mutation operator {0:?}")]
    UnknownOperator(String),
    #[error("max_mutants must be at least 1")]
    InvalidLimits,
}

/// One applicable rewrite: replace `code[start..end]` (which equals
/// `original_fragment`) with `replacement_fragment`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationSite {
    pub operator: OperatorCode,
    pub start: usize,
    pub end: usize,
    pub original_fragment: String,
    pub replacement_fragment: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationLimits {
    pub max_mutants: usize,
    pub operators: BTreeSet<OperatorCode>,
}

impl Default for MutationLimits {
    fn default() -> Self {
        MutationLimits {
            max_mutants: 100,
            operators: OperatorCode::ALL.into_iter().collect(),
        }
    }
}

fn aor_replacements(op: &str) -> &'static [&'static str] {
    match op {
        "+" => &["-", "*"],
        "-" => &["+"],
        "*" => &["/"],
        "/" => &["*"],
        "%" => &["*"],
        "//" => &["/"],
        "**" => &["*"],
        _ => &[],
    }
}

fn ror_replacement(op: &str) -> Option<&'static str> {
    Some(match op {
        "<" => ">=",
        ">=" => "<",
        ">" => "<=",
        "<=" => ">",
        "==" => "!=",
        "!=" => "==",
        _ => return None,
    })
}

const EXS_KINDS: &[&str] = &[
    "expression_statement",
    "return_statement",
    "raise_statement",
    "assert_statement",
    "delete_statement",
];

struct Collector<'a> {
    src: &'a str,
    sites: Vec<MutationSite>,
}

impl<'a> Collector<'a> {
    fn text(&self, node: Node) -> &'a str {
        &self.src[node.byte_range()]
    }

    fn push(&mut self, operator: OperatorCode, node: Node, replacement: impl Into<String>) {
        self.push_range(operator, node.start_byte(), node.end_byte(), replacement);
    }

    fn push_range(&mut self, operator: OperatorCode, start: usize, end: usize, replacement: impl Into<String>) {
        self.sites.push(MutationSite {
            operator,
            start,
            end,
            original_fragment: self.src[start..end].to_string(),
            replacement_fragment: replacement.into(),
        });
    }

    fn visit(&mut self, node: Node) {
        match node.kind() {
            "binary_operator" => self.binary(node),
            "unary_operator" => {
                if let (Some(op), Some(arg)) = (node.child_by_field_name("operator"), node.child_by_field_name("argument")) {
                    if matches!(self.text(op), "-" | "+") {
                        self.push(OperatorCode::AOD, node, self.text(arg));
                    }
                }
            }
            "comparison_operator" => {
                let mut cursor = node.walk();
                let ops: Vec<Node> = node.children(&mut cursor).filter(|c| !c.is_named()).collect();
                for op in ops {
                    if let Some(rep) = ror_replacement(self.text(op)) {
                        self.push(OperatorCode::ROR, op, rep);
                    }
                }
            }
            "boolean_operator" => {
                if let Some(op) = node.child_by_field_name("operator") {
                    let rep = if self.text(op) == "and" { "or" } else { "and" };
                    self.push(OperatorCode::LOR, op, rep);
                }
            }
            "not_operator" => {
                if let Some(arg) = node.child_by_field_name("argument") {
                    self.push(OperatorCode::COD, node, self.text(arg));
                }
            }
            "for_statement" => {
                if let Some(iter) = node.child_by_field_name("right") {
                    if self.text(iter) != "[]" {
                        self.push(OperatorCode::ZIL, iter, "[]");
                    }
                }
            }
            "integer" => {
                if let Some(next) = increment_int_literal(self.text(node)) {
                    self.push(OperatorCode::CRP, node, next);
                }
            }
            "string" => self.string(node),
            "true" => self.push(OperatorCode::CRP, node, "False"),
            "false" => self.push(OperatorCode::CRP, node, "True"),
            "break_statement" => self.push(OperatorCode::BCR, node, "continue"),
            "continue_statement" => self.push(OperatorCode::BCR, node, "break"),
            "slice" => {
                let mut cursor = node.walk();
                let bounds: Vec<Node> = node.children(&mut cursor).filter(|c| c.is_named()).collect();
                for b in bounds {
                    self.push(OperatorCode::SIR, b, "");
                }
            }
            "block" | "module" => self.statements(node),
            _ => {}
        }
        let mut cursor = node.walk();
        let children: Vec<Node> = node.children(&mut cursor).collect();
        for child in children {
            self.visit(child);
        }
    }

    fn binary(&mut self, node: Node) {
        let (Some(left), Some(op)) = (node.child_by_field_name("left"), node.child_by_field_name("operator")) else {
            return;
        };
        let reps = aor_replacements(self.text(op));
        if reps.is_empty() {
            return;
        }
        self.push(OperatorCode::AOD, node, self.text(left));
        for rep in reps {
            self.push(OperatorCode::AOR, op, *rep);
        }
    }

    fn string(&mut self, node: Node) {
        if is_docstring(node) {
            return;
        }
        let mut cursor = node.walk();
        let kids: Vec<Node> = node.children(&mut cursor).collect();
        let non_empty = kids
            .iter()
            .any(|k| matches!(k.kind(), "string_content" | "interpolation" | "escape_sequence"));
        let start = kids.iter().find(|k| k.kind() == "string_start");
        let end = kids.iter().find(|k| k.kind() == "string_end");
        if let (true, Some(s), Some(e)) = (non_empty, start, end) {
            let rep = format!("{}{}", self.text(*s), self.text(*e));
            self.push(OperatorCode::CRP, node, rep);
        }
    }

    fn statements(&mut self, block: Node) {
        let mut cursor = block.walk();
        let stmts: Vec<Node> = block
            .children(&mut cursor)
            .filter(|c| c.is_named() && c.kind() != "comment")
            .collect();
        let lone = stmts.len() == 1;
        for stmt in stmts {
            if !EXS_KINDS.contains(&stmt.kind()) {
                continue;
            }
            if stmt.kind() == "return_statement" && lone {
                continue;
            }
            if stmt.kind() == "expression_statement" && is_bare_literal(stmt) {
                continue;
            }
            self.push(OperatorCode::EXS, stmt, "pass");
        }
    }
}

/// A string that is the whole of an expression statement (docstring or no-op).
fn is_docstring(node: Node) -> bool {
    let mut parent = node.parent();
    if parent.is_some_and(|p| p.kind() == "concatenated_string") {
        parent = parent.and_then(|p| p.parent());
    }
    parent.is_some_and(|p| p.kind() == "expression_statement" && p.named_child_count() == 1)
}

fn is_bare_literal(stmt: Node) -> bool {
    stmt.named_child_count() == 1
        && stmt
            .named_child(0)
            .is_some_and(|c| matches!(c.kind(), "string" | "concatenated_string" | "ellipsis"))
}

/// `n + 1` for a Python integer literal; `None` for imaginary or oversized literals.
fn increment_int_literal(text: &str) -> Option<String> {
    let clean: String = text.chars().filter(|c| *c != '_').collect::<String>().to_ascii_lowercase();
    if clean.ends_with('j') {
        return None;
    }
    let value = if let Some(hex) = clean.strip_prefix("0x") {
        u128::from_str_radix(hex, 16).ok()?
    } else if let Some(oct) = clean.strip_prefix("0o") {
        u128::from_str_radix(oct, 8).ok()?
    } else if let Some(bin) = clean.strip_prefix("0b") {
        u128::from_str_radix(bin, 2).ok()?
    } else {
        clean.parse::<u128>().ok()?
    };
    Some(value.checked_add(1)?.to_string())
}

/// Every applicable site, in document order and then by operator code.
pub fn enumerate_sites(code: &str) -> Result<Vec<MutationSite>, MutationError> {
    let tree = parse_python(code)?;
    let mut c = Collector {
        src: code,
        sites: Vec::new(),
    };
    c.visit(tree.root_node());
    // stable: equal keys keep discovery order
    c.sites.sort_by_key(|s| (s.start, s.operator));
    Ok(c.sites)
}

/// Replaces exactly the site's fragment.
pub fn apply_mutation(code: &str, site: &MutationSite) -> Result<String, MutationError> {
    let stale = || MutationError::StaleSite {
        start: site.start,
        end: site.end,
    };
    let fragment = code.get(site.start..site.end).ok_or_else(stale)?;
    if fragment != site.original_fragment || site.original_fragment == site.replacement_fragment {
        return Err(stale());
    }
    let mut out = String::with_capacity(code.len() + site.replacement_fragment.len());
    out.push_str(&code[..site.start]);
    out.push_str(&site.replacement_fragment);
    out.push_str(&code[site.end..]);
    Ok(out)
}

/// Applies every selected site once, keeping mutants that parse, differ from
/// the original and from each other, up to `limits.max_mutants`.
pub fn generate_mutants(
    task_id: &str,
    code: &str,
    limits: &MutationLimits,
) -> Result<Vec<VariantRecord>, MutationError> {
    if limits.max_mutants == 0 {
        return Err(MutationError::InvalidLimits);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for site in enumerate_sites(code)? {
        if out.len() >= limits.max_mutants {
            break;
        }
        if !limits.operators.contains(&site.operator) {
            continue;
        }
        let mutant = apply_mutation(code, &site)?;
        if mutant == code || !parses(&mutant) || !seen.insert(mutant.clone()) {
            continue;
        }
        out.push(VariantRecord {
            variant_id: format!("{task_id}:mut:{:04}", out.len()),
            task_id: task_id.to_string(),
            variant_code: mutant,
            variant_kind: VariantKind::Mutated,
            provenance: Provenance::Mutated {
                operator: site.operator,
                start: site.start,
                end: site.end,
                replacement: site.replacement_fragment.clone(),
            },
            parses_ok: true,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PALINDROME: &str = "def is_palindrome(text: str) -> bool:\n    for i in range(len(text)):\n        if text[i] != text[len(text) - 1 - i]:\n            return False\n    return True\n";
    const PALINDROME_ROR: &str = "def is_palindrome(text: str) -> bool:\n    for i in range(len(text)):\n        if text[i] == text[len(text) - 1 - i]:\n            return False\n    return True\n";

    fn summary(code: &str) -> Vec<(OperatorCode, String, String)> {
        enumerate_sites(code)
            .unwrap()
            .into_iter()
            .map(|s| (s.operator, s.original_fragment, s.replacement_fragment))
            .collect()
    }

    #[test]
    fn binary_addition_sites() {
        let sites = summary("a + b\n");
        let expected = vec![
            (OperatorCode::AOD, "a + b".to_string(), "a".to_string()),
            (OperatorCode::EXS, "a + b".to_string(), "pass".to_string()),
            (OperatorCode::AOR, "+".to_string(), "-".to_string()),
            (OperatorCode::AOR, "+".to_string(), "*".to_string()),
        ];
        assert_eq!(sites, expected);
    }

    #[test]
    fn nothing_to_mutate() {
        assert!(enumerate_sites("def f(x):\n    pass\n").unwrap().is_empty());
        assert!(enumerate_sites("import os\n").unwrap().is_empty());
        assert!(enumerate_sites("\"\"\"doc\"\"\"\n").unwrap().is_empty());
    }

    #[test]
    fn ror_site_flips_palindrome_check() {
        let site = enumerate_sites(PALINDROME)
            .unwrap()
            .into_iter()
            .find(|s| s.operator == OperatorCode::ROR && s.original_fragment == "!=")
            .expect("ROR site at the comparison");
        assert_eq!(site.replacement_fragment, "==");
        assert_eq!(apply_mutation(PALINDROME, &site).unwrap(), PALINDROME_ROR);
    }

    #[test]
    fn unary_deletion() {
        let code = "def f(x):\n    return -x\n";
        let site = enumerate_sites(code)
            .unwrap()
            .into_iter()
            .find(|s| s.operator == OperatorCode::AOD)
            .unwrap();
        assert_eq!(apply_mutation(code, &site).unwrap(), "def f(x):\n    return x\n");
    }

    #[test]
    fn lone_return_is_never_deleted() {
        let code = "def f(x):\n    return x\n";
        assert!(summary(code).iter().all(|s| s.0 != OperatorCode::EXS));
        let code = "def f(x):\n    y = x\n    return y\n";
        let exs: Vec<_> = summary(code).into_iter().filter(|s| s.0 == OperatorCode::EXS).collect();
        assert_eq!(exs.len(), 2);
    }

    #[test]
    fn constant_and_keyword_rewrites() {
        let s = summary("x = 1\n");
        assert!(s.contains(&(OperatorCode::CRP, "1".into(), "2".into())));
        let s = summary("y = 0x_ff\nz = 'ab'\nw = True\n");
        assert!(s.contains(&(OperatorCode::CRP, "0x_ff".into(), "256".into())));
        assert!(s.contains(&(OperatorCode::CRP, "'ab'".into(), "''".into())));
        assert!(s.contains(&(OperatorCode::CRP, "True".into(), "False".into())));
        assert!(summary("z = ''\n").iter().all(|s| s.0 != OperatorCode::CRP));
        assert!(summary("z = 3j\n").iter().all(|s| s.0 != OperatorCode::CRP));
        let s = summary("for i in xs:\n    if i:\n        break\n    continue\n");
        assert!(s.contains(&(OperatorCode::BCR, "break".into(), "continue".into())));
        assert!(s.contains(&(OperatorCode::BCR, "continue".into(), "break".into())));
        assert!(s.contains(&(OperatorCode::ZIL, "xs".into(), "[]".into())));
    }

    #[test]
    fn logical_and_slice_rewrites() {
        let s = summary("r = not a and b[1:n]\n");
        assert!(s.contains(&(OperatorCode::LOR, "and".into(), "or".into())));
        assert!(s.contains(&(OperatorCode::COD, "not a".into(), "a".into())));
        let code = "r = b[1:n]\n";
        let muts: Vec<String> = enumerate_sites(code)
            .unwrap()
            .iter()
            .filter(|s| s.operator == OperatorCode::SIR)
            .map(|s| apply_mutation(code, s).unwrap())
            .collect();
        assert_eq!(muts, vec!["r = b[:n]\n", "r = b[1:]\n"]);
    }

    #[test]
    fn stale_sites_are_rejected() {
        let site = enumerate_sites("x = a + b\n").unwrap().remove(0);
        assert!(matches!(
            apply_mutation("x = a - b\n", &site),
            Err(MutationError::StaleSite { .. })
        ));
        assert!(matches!(apply_mutation("x", &site), Err(MutationError::StaleSite { .. })));
    }

    #[test]
    fn generate_respects_limits_and_provenance() {
        let all = generate_mutants("t", PALINDROME, &MutationLimits::default()).unwrap();
        let flipped = all.iter().find(|v| v.variant_code == PALINDROME_ROR).expect("ROR mutant");
        assert!(matches!(flipped.provenance, Provenance::Mutated { operator: OperatorCode::ROR, .. }));
        let one = generate_mutants(
            "t",
            PALINDROME,
            &MutationLimits {
                max_mutants: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], all[0]);
        assert_eq!(
            generate_mutants("t", PALINDROME, &MutationLimits { max_mutants: 0, ..Default::default() }),
            Err(MutationError::InvalidLimits)
        );
    }

    #[test]
    fn crp_only_on_straight_line_code() {
        let limits = MutationLimits {
            max_mutants: 10,
            operators: [OperatorCode::CRP].into_iter().collect(),
        };
        let muts = generate_mutants("t", "x = 1", &limits).unwrap();
        assert_eq!(muts.len(), 1);
        assert_eq!(muts[0].variant_code, "x = 2");
    }

    #[test]
    fn operator_list_parsing() {
        let ops = parse_operator_list("aor, ROR,").unwrap();
        assert_eq!(ops.into_iter().collect::<Vec<_>>(), vec![OperatorCode::AOR, OperatorCode::ROR]);
        assert!(parse_operator_list("XYZ").is_err());
    }
}
