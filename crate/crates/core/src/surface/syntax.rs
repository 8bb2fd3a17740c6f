//! Python parsing and the kind-labelled syntax trees compared by AST similarity.

use thiserror::Error;
use tree_sitter::{Node, Parser, Tree};

/// Default cap on syntax tree size.
pub const DEFAULT_NODE_CAP: usize = 5000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{side} does not parse: syntax error at byte {offset}")]
    Syntax { side: Side, offset: usize },
    #[error("{side} has {nodes} syntax nodes, above the cap of {cap}")]
    TooLarge { side: Side, nodes: usize, cap: usize },
}

impl ParseError {
    pub fn side(&self) -> Side {
        match self {
            ParseError::Syntax { side, .. } | ParseError::TooLarge { side, .. } => *side,
        }
    }

    pub(crate) fn on(self, side: Side) -> Self {
        match self {
            ParseError::Syntax { offset, .. } => ParseError::Syntax { side, offset },
            ParseError::TooLarge { nodes, cap, .. } => ParseError::TooLarge { side, nodes, cap },
        }
    }
}

/// Which operand of a comparison a [`ParseError`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Single,
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Single => "code",
            Side::Left => "left code",
            Side::Right => "right code",
        })
    }
}

/// Parses Python source with tree-sitter, rejecting any input containing
/// syntax errors or missing tokens.
pub fn parse_python(code: &str) -> Result<Tree, ParseError> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("python grammar is compatible with the linked tree-sitter");
    let tree = parser.parse(code, None).ok_or(ParseError::Syntax {
        side: Side::Single,
        offset: 0,
    })?;
    let root = tree.root_node();
    if root.has_error() {
        return Err(ParseError::Syntax {
            side: Side::Single,
            offset: first_error(root).unwrap_or(0),
        });
    }
    Ok(tree)
}

/// True if `code` parses as Python without errors.
pub fn parses(code: &str) -> bool {
    parse_python(code).is_ok()
}

fn first_error(node: Node) -> Option<usize> {
    if node.is_error() || node.is_missing() {
        return Some(node.start_byte());
    }
    let mut cursor = node.walk();
    let found = node
        .children(&mut cursor)
        .filter(|c| c.has_error())
        .find_map(first_error);
    found
}

/// Ordered, rooted tree labelled by syntactic category only.
///
/// Nodes are stored in preorder; `children[i]` lists the indices of node `i`'s
/// children left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    labels: Vec<String>,
    children: Vec<Vec<usize>>,
}

impl SyntaxTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        SyntaxTree {
            labels: vec![label.into()],
            children: vec![Vec::new()],
        }
    }

    /// Builds `label(children...)`.
    pub fn node(label: impl Into<String>, kids: Vec<SyntaxTree>) -> Self {
        let mut t = SyntaxTree::leaf(label);
        for kid in kids {
            let offset = t.labels.len();
            t.children[0].push(offset);
            t.labels.extend(kid.labels);
            t.children
                .extend(kid.children.into_iter().map(|c| c.into_iter().map(|i| i + offset).collect()));
        }
        t
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// S-expression rendering, mainly for diagnostics.
    pub fn to_sexp(&self) -> String {
        fn go(t: &SyntaxTree, n: usize, out: &mut String) {
            out.push_str(&t.labels[n]);
            if !t.children[n].is_empty() {
                out.push('(');
                for (i, c) in t.children[n].iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    go(t, *c, out);
                }
                out.push(')');
            }
        }
        let mut s = String::new();
        if !self.is_empty() {
            go(self, 0, &mut s);
        }
        s
    }
}

/// Parents whose anonymous operator tokens carry meaning and are kept as leaves.
const OPERATOR_PARENTS: &[&str] = &[
    "binary_operator",
    "comparison_operator",
    "boolean_operator",
    "unary_operator",
    "augmented_assignment",
];

/// Converts a parsed module into a [`SyntaxTree`].
///
/// Labels are node kinds. Identifier and literal text never appears: `True` and
/// `False` both become `boolean`, string literals keep only their interpolations,
/// comments are dropped, and of the anonymous tokens only operators survive.
pub fn syntax_tree(code: &str, cap: usize) -> Result<SyntaxTree, ParseError> {
    let tree = parse_python(code)?;
    let mut out = SyntaxTree {
        labels: Vec::new(),
        children: Vec::new(),
    };
    build(tree.root_node(), code.as_bytes(), &mut out, cap)?;
    Ok(out)
}

fn build(node: Node, src: &[u8], out: &mut SyntaxTree, cap: usize) -> Result<usize, ParseError> {
    if out.labels.len() >= cap {
        return Err(ParseError::TooLarge {
            side: Side::Single,
            nodes: out.labels.len() + 1,
            cap,
        });
    }
    let idx = out.labels.len();
    let label = match node.kind() {
        "true" | "false" => "boolean",
        k => k,
    };
    out.labels.push(label.to_string());
    out.children.push(Vec::new());

    let kind = node.kind();
    let keep_ops = OPERATOR_PARENTS.contains(&kind);
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        let keep = if kind == "string" {
            child.kind() == "interpolation"
        } else if child.is_named() {
            child.kind() != "comment"
        } else {
            keep_ops && is_operator_token(child, src)
        };
        if keep {
            let c = build(child, src, out, cap)?;
            out.children[idx].push(c);
        }
    }
    Ok(idx)
}

fn is_operator_token(node: Node, src: &[u8]) -> bool {
    let text = node.utf8_text(src).unwrap_or("");
    !matches!(text, "(" | ")" | "," | ":" | "")
}
