//! Surface similarity of two code texts: the mean of an inverse edit-distance
//! score and a syntax-tree similarity score.

pub mod edit;
pub mod syntax;
pub mod ted;

use serde::{Deserialize, Serialize};

pub use edit::{levenshtein, normalize_line_endings};
pub use syntax::{parse_python, parses, syntax_tree, ParseError, Side, SyntaxTree, DEFAULT_NODE_CAP};
pub use ted::tree_edit_distance;

/// Weights of the edit and AST components. The default is the unweighted mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceWeights {
    pub edit: f64,
    pub ast: f64,
}

impl Default for SurfaceWeights {
    fn default() -> Self {
        SurfaceWeights { edit: 0.5, ast: 0.5 }
    }
}

impl SurfaceWeights {
    /// Weights must be non-negative and sum to one.
    pub fn is_valid(&self) -> bool {
        self.edit >= 0.0 && self.ast >= 0.0 && ((self.edit + self.ast) - 1.0).abs() < 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub weights: SurfaceWeights,
    pub node_cap: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            weights: SurfaceWeights::default(),
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

/// Both components and their combination for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceBreakdown {
    pub edit: f64,
    pub ast: f64,
    pub surface: f64,
}

/// `1 - ED(c1, c2) / max(|c1|, |c2|)` on line-ending-normalized text; 1.0 when
/// both texts are empty.
pub fn edit_similarity(c1: &str, c2: &str) -> f64 {
    let a = normalize_line_endings(c1);
    let b = normalize_line_endings(c2);
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / longest as f64
}

/// `1 - TED(t1, t2) / (|t1| + |t2|)`.
pub fn tree_similarity(t1: &SyntaxTree, t2: &SyntaxTree) -> f64 {
    let total = t1.len() + t2.len();
    if total == 0 {
        return 1.0;
    }
    1.0 - tree_edit_distance(t1, t2) as f64 / total as f64
}

pub fn ast_similarity(c1: &str, c2: &str) -> Result<f64, ParseError> {
    ast_similarity_with_cap(c1, c2, DEFAULT_NODE_CAP)
}

pub fn ast_similarity_with_cap(c1: &str, c2: &str, cap: usize) -> Result<f64, ParseError> {
    let t1 = syntax_tree(c1, cap).map_err(|e| e.on(Side::Left))?;
    let t2 = syntax_tree(c2, cap).map_err(|e| e.on(Side::Right))?;
    Ok(tree_similarity(&t1, &t2))
}

pub fn surface_breakdown(c1: &str, c2: &str, cfg: &SurfaceConfig) -> Result<SurfaceBreakdown, ParseError> {
    let ast = ast_similarity_with_cap(c1, c2, cfg.node_cap)?;
    let edit = edit_similarity(c1, c2);
    let w = cfg.weights;
    Ok(SurfaceBreakdown {
        edit,
        ast,
        surface: w.edit * edit + w.ast * ast,
    })
}

/// Unweighted mean of [`edit_similarity`] and [`ast_similarity`].
pub fn surface_sim(c1: &str, c2: &str) -> Result<f64, ParseError> {
    surface_breakdown(c1, c2, &SurfaceConfig::default()).map(|b| b.surface)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_similarity_examples() {
        assert_eq!(edit_similarity("abc", "abc"), 1.0);
        assert_eq!(edit_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0);
        assert_eq!(edit_similarity("", "abc"), 0.0);
        assert_eq!(edit_similarity("", ""), 1.0);
        assert_eq!(edit_similarity("a\r\nb", "a\nb"), 1.0);
    }

    #[test]
    fn ast_similarity_ignores_renaming() {
        let a = "def f(xs):\n    total = 0\n    for x in xs:\n        total += x\n    return total\n";
        let b = "def g(items):\n    acc = 0\n    for item in items:\n        acc += item\n    return acc\n";
        assert_eq!(ast_similarity(a, b).unwrap(), 1.0);
        assert!(edit_similarity(a, b) < 1.0);
    }

    #[test]
    fn parse_errors_name_the_side() {
        let err = ast_similarity("x = 1\n", "x = (\n").unwrap_err();
        assert_eq!(err.side(), Side::Right);
        let err = surface_sim("def (", "x = 1\n").unwrap_err();
        assert_eq!(err.side(), Side::Left);
    }

    #[test]
    fn components_combine_by_weights() {
        let cfg = SurfaceConfig::default();
        let b = surface_breakdown("x = 1\n", "y = 2\n", &cfg).unwrap();
        assert_eq!(b.ast, 1.0);
        assert_eq!(b.surface, (b.edit + b.ast) / 2.0);
        let skewed = SurfaceConfig {
            weights: SurfaceWeights { edit: 1.0, ast: 0.0 },
            ..cfg
        };
        assert_eq!(surface_breakdown("x = 1\n", "y = 2\n", &skewed).unwrap().surface, b.edit);
        assert!(!SurfaceWeights { edit: 0.7, ast: 0.7 }.is_valid());
    }

    #[test]
    fn arithmetic_mean_of_components() {
        let b = SurfaceBreakdown {
            edit: 0.8,
            ast: 0.6,
            surface: 0.5 * 0.8 + 0.5 * 0.6,
        };
        assert!((b.surface - 0.7).abs() < 1e-15);
    }
}
