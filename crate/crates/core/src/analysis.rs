//! Question taxonomy and primitive-usage statistics.
//!
//! Natural-language questions are classified by regular expressions over the
//! lower-cased text. Programs are classified from their syntax tree: heads
//! give the operational dimensions, string literals naming vocabulary classes
//! give `Category` and `Scene`, and direction literals or direction heads give
//! `Direction`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{Builtin, Callee, Expr, ExprKind, Primitive, PrimitiveGroup, Program, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    Existence,
    Quantity,
    Coverage,
    Comparison,
    Category,
    Relation,
    Scene,
    Direction,
    Overlap,
}

impl Dimension {
    pub const ALL: [Dimension; 9] = [
        Dimension::Existence,
        Dimension::Quantity,
        Dimension::Coverage,
        Dimension::Comparison,
        Dimension::Category,
        Dimension::Relation,
        Dimension::Scene,
        Dimension::Direction,
        Dimension::Overlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Existence => "Existence",
            Dimension::Quantity => "Quantity",
            Dimension::Coverage => "Coverage",
            Dimension::Comparison => "Comparison",
            Dimension::Category => "Category",
            Dimension::Relation => "Relation",
            Dimension::Scene => "Scene",
            Dimension::Direction => "Direction",
            Dimension::Overlap => "Overlap",
        }
    }

    fn index(self) -> usize {
        Dimension::ALL.iter().position(|d| *d == self).expect("listed")
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type DimensionSet = BTreeSet<Dimension>;

/// The 18 direction tokens recognised as literals.
pub const DIRECTION_TOKENS: [&str; 18] = [
    "n", "s", "e", "w", "ne", "nw", "se", "sw", "north", "south", "east", "west", "tl", "tr", "bl", "br",
    "top", "bottom",
];

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Object and scene class vocabularies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    pub objects: BTreeSet<String>,
    pub scenes: BTreeSet<String>,
}

const OBJECTS: &str = include_str!("../vocab/objects.txt");
const SCENES: &str = include_str!("../vocab/scenes.txt");

fn norm_term(s: &str) -> String {
    s.trim().to_lowercase().replace(['_', '-'], " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_terms(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(norm_term)
        .collect()
}

impl Default for Vocab {
    fn default() -> Self {
        Self {
            objects: parse_terms(OBJECTS),
            scenes: parse_terms(SCENES),
        }
    }
}

impl Vocab {
    /// Reads one-term-per-line files; `#` starts a comment line.
    pub fn load(objects: &Path, scenes: &Path) -> Result<Self, AnalysisError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| AnalysisError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        Ok(Self {
            objects: parse_terms(&read(objects)?),
            scenes: parse_terms(&read(scenes)?),
        })
    }

    fn lookup(set: &BTreeSet<String>, literal: &str) -> bool {
        let t = norm_term(literal);
        if set.contains(&t) {
            return true;
        }
        ["es", "s"]
            .iter()
            .any(|suf| t.strip_suffix(suf).is_some_and(|stem| set.contains(stem)))
    }

    pub fn is_object(&self, literal: &str) -> bool {
        Self::lookup(&self.objects, literal)
    }

    pub fn is_scene(&self, literal: &str) -> bool {
        Self::lookup(&self.scenes, literal)
    }
}

fn re(pattern: &str) -> Regex {
    Regex::new(pattern).expect("static pattern")
}

static EXISTENCE: LazyLock<Regex> = LazyLock::new(|| re(r"\b(are there|is there|any)\b"));
static QUANTITY: LazyLock<Regex> =
    LazyLock::new(|| re(r"\b(how many|number of|count of)\b|\b(more|fewer)\b[^?.]*\bthan\b"));
static COVERAGE: LazyLock<Regex> =
    LazyLock::new(|| re(r"\b(area of|ratio of|how large|proportion of|percentage of|fraction of)\b"));
static COMPARISON: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(larger|smaller|largest|smallest|bigger|biggest|more|less|fewer|most|least|greater|greatest)\b|\bwhich\b[^?.]*\b\w+ or \w+\b")
});
static CATEGORY: LazyLock<Regex> = LazyLock::new(|| {
    re(concat!(
        r"\bwhat (type|kind|class|category) of (object|aircraft|airplane|plane|vehicle|ship|boat|vessel|building)s?\b",
        r"|\b(cargo ship|container ship|oil tanker|fishing vessel|fishing boat|passenger ship|cruise ship",
        r"|warship|aircraft carrier|sailboat|motorboat|tugboat|passenger car|dump truck|cargo truck",
        r"|small car|tractor|excavator|bus|truck|van|trailer|fighter jet|helicopter|boeing \d+|airbus a\d+)(e?s)?\b"
    ))
});
static SCENE: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(land use|land-use|rural|urban|what (kind|type) of scene|scene type|scene)\b")
});
static RELATION: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(near|nearest|next to|between|adjacent|close to|closest|beside|surrounding|distance)\b")
});
static DIRECTION: LazyLock<Regex> = LazyLock::new(|| {
    re(r"\b(north|south|east|west|northern|southern|eastern|western|northeast|northwest|southeast|southwest|top of|bottom of|left of|right of|upper|where is|where are|quadrant|corner)\b")
});
static OVERLAP: LazyLock<Regex> = LazyLock::new(|| re(r"\b(both|intersection|intersects?|overlap\w*)\b"));

/// Dimensions of a natural-language question.
pub fn classify_question(text: &str) -> DimensionSet {
    let t = text.to_lowercase();
    let rules: [(&Regex, Dimension); 9] = [
        (&EXISTENCE, Dimension::Existence),
        (&QUANTITY, Dimension::Quantity),
        (&COVERAGE, Dimension::Coverage),
        (&COMPARISON, Dimension::Comparison),
        (&CATEGORY, Dimension::Category),
        (&RELATION, Dimension::Relation),
        (&SCENE, Dimension::Scene),
        (&DIRECTION, Dimension::Direction),
        (&OVERLAP, Dimension::Overlap),
    ];
    let mut dims: DimensionSet = rules.iter().filter(|(r, _)| r.is_match(&t)).map(|(_, d)| *d).collect();
    apply_question_overrides(&mut dims, EXISTENCE.is_match(&t));
    dims
}

/// Comparison drops Existence; Scene drops Existence unless an explicit
/// existence trigger matched.
pub fn apply_question_overrides(dims: &mut DimensionSet, explicit_existence: bool) {
    let comparison = dims.contains(&Dimension::Comparison);
    let scene = dims.contains(&Dimension::Scene);
    if comparison || (scene && !explicit_existence) {
        dims.remove(&Dimension::Existence);
    }
}

fn string_literals<'a>(expr: &'a Expr, out: &mut Vec<&'a str>) {
    expr.walk(&mut |e| {
        if let ExprKind::Str(s) = &e.kind {
            out.push(s);
        }
    });
}

fn value_strings<'a>(v: &'a Value, out: &mut Vec<&'a str>) {
    match v {
        Value::Str(s) => out.push(s),
        Value::List(items) => items.iter().for_each(|i| value_strings(i, out)),
        _ => {}
    }
}

fn head(e: &Expr) -> Option<Builtin> {
    match &e.kind {
        ExprKind::Call(Callee::Builtin(b), _) => Some(*b),
        _ => None,
    }
}

/// Dimensions of a program. Phrase literals may also arrive through the
/// argument, so its string leaves are scanned alongside the program's own
/// literals. A Scene-class literal counts only when no object-class literal
/// is present; with an object present, scene phrases act as reference
/// regions for it.
pub fn classify_program(expr: &Expr, arg: Option<&Value>, vocab: &Vocab) -> DimensionSet {
    use Builtin as B;
    let mut dims = DimensionSet::new();
    let mut centroids = 0;
    expr.walk(&mut |e| match &e.kind {
        ExprKind::Call(Callee::Builtin(b), _) => match b {
            B::Exists => {
                dims.insert(Dimension::Existence);
            }
            B::Count | B::Len => {
                dims.insert(Dimension::Quantity);
            }
            B::Area => {
                dims.insert(Dimension::Coverage);
            }
            B::Argmin | B::Argmax | B::Largest | B::Smallest | B::FilterBy | B::Extreme => {
                dims.insert(Dimension::Comparison);
            }
            B::Distance | B::Nearest | B::Adjacent | B::MeanPosition => {
                dims.insert(Dimension::Relation);
            }
            B::Centroid => centroids += 1,
            B::Overlaps | B::Contains => {
                dims.insert(Dimension::Overlap);
            }
            B::Quadrant | B::Relpos | B::Grid | B::InCell => {
                dims.insert(Dimension::Direction);
            }
            _ => {}
        },
        ExprKind::If(cond, _, _) if head(cond).is_some_and(Builtin::is_ordering_comparator) => {
            dims.insert(Dimension::Comparison);
        }
        _ => {}
    });
    if centroids >= 2 {
        dims.insert(Dimension::Relation);
    }

    let mut own = Vec::new();
    string_literals(expr, &mut own);
    if own.iter().any(|s| DIRECTION_TOKENS.contains(&s.trim().to_lowercase().as_str())) {
        dims.insert(Dimension::Direction);
    }
    let mut phrases = own;
    if let Some(a) = arg {
        value_strings(a, &mut phrases);
    }
    let object = phrases.iter().any(|s| vocab.is_object(s));
    let scene = phrases.iter().any(|s| vocab.is_scene(s));
    if object {
        dims.insert(Dimension::Category);
    } else if scene {
        dims.insert(Dimension::Scene);
    }
    dims
}

/// Primitives invoked anywhere in the program, each listed once.
pub fn detect_primitives(expr: &Expr) -> BTreeSet<Primitive> {
    let mut out = BTreeSet::new();
    expr.walk(&mut |e| {
        if let Some(p) = head(e).and_then(Builtin::primitive) {
            out.insert(p);
        }
    });
    out
}

/// Whether the program calls the segmenter tool.
pub fn uses_segmenter(expr: &Expr) -> bool {
    let mut hit = false;
    expr.walk(&mut |e| hit |= head(e) == Some(Builtin::Segment));
    hit
}

/// One program of a corpus with the argument it was posed with.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub id: String,
    pub program: String,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveUsage {
    pub primitive: String,
    pub group: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDimensions {
    pub id: String,
    pub dimensions: Vec<Dimension>,
    pub primitives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageReport {
    pub corpus_size: usize,
    /// Items whose program no longer compiles; excluded from all counts.
    pub unparsed: Vec<String>,
    pub segmenter_count: usize,
    pub primitives: Vec<PrimitiveUsage>,
    pub dimensions: Vec<Dimension>,
    /// Node weight per dimension, in `dimensions` order.
    pub node_weights: Vec<usize>,
    /// Symmetric co-occurrence counts with a zero diagonal.
    pub cooccurrence: Vec<Vec<usize>>,
    pub items: Vec<ItemDimensions>,
}

fn group_name(g: PrimitiveGroup) -> &'static str {
    match g {
        PrimitiveGroup::Geometric => "geometric",
        PrimitiveGroup::Topological => "topological",
        PrimitiveGroup::Aggregation => "aggregation",
    }
}

/// Per-primitive program counts and dimension co-occurrence over a corpus.
pub fn corpus_stats(items: &[CorpusItem], vocab: &Vocab) -> UsageReport {
    let mut counts = vec![0usize; Primitive::ALL.len()];
    let mut nodes = vec![0usize; Dimension::ALL.len()];
    let mut edges = vec![vec![0usize; Dimension::ALL.len()]; Dimension::ALL.len()];
    let mut unparsed = Vec::new();
    let mut per_item = Vec::new();
    let mut segmenter_count = 0;
    for item in items {
        let Ok(prog) = Program::compile(&item.program) else {
            unparsed.push(item.id.clone());
            continue;
        };
        let arg = Value::List(item.args.clone());
        let dims = classify_program(prog.ast(), Some(&arg), vocab);
        let prims = detect_primitives(prog.ast());
        segmenter_count += usize::from(uses_segmenter(prog.ast()));
        for p in &prims {
            counts[Primitive::ALL.iter().position(|q| q == p).expect("listed")] += 1;
        }
        let idx: Vec<usize> = dims.iter().map(|d| d.index()).collect();
        for &i in &idx {
            nodes[i] += 1;
            for &j in &idx {
                if i != j {
                    edges[i][j] += 1;
                }
            }
        }
        per_item.push(ItemDimensions {
            id: item.id.clone(),
            dimensions: dims.into_iter().collect(),
            primitives: prims.iter().map(|p| p.name().to_string()).collect(),
        });
    }
    let n = per_item.len();
    let pct = |c: usize| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 };
    UsageReport {
        corpus_size: n,
        unparsed,
        segmenter_count,
        primitives: Primitive::ALL
            .iter()
            .zip(&counts)
            .map(|(p, &c)| PrimitiveUsage {
                primitive: p.name().to_string(),
                group: group_name(p.group()).to_string(),
                count: c,
                percent: pct(c),
            })
            .collect(),
        dimensions: Dimension::ALL.to_vec(),
        node_weights: nodes,
        cooccurrence: edges,
        items: per_item,
    }
}

impl UsageReport {
    pub fn count_of(&self, primitive: &str) -> Option<usize> {
        self.primitives.iter().find(|p| p.primitive == primitive).map(|p| p.count)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), AnalysisError> {
        let text = serde_json::to_string_pretty(self).expect("report serializes") + "\n";
        fs::write(path, text).map_err(|source| AnalysisError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Writes `primitives.csv`, `dimensions.csv` and `cooccurrence.csv`.
    pub fn write_csv(&self, dir: &Path) -> Result<(), AnalysisError> {
        let csv_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| AnalysisError::Csv { path, source }
        };
        fs::create_dir_all(dir).map_err(|source| AnalysisError::Io {
            path: dir.display().to_string(),
            source,
        })?;

        let path = dir.join("primitives.csv");
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        for p in &self.primitives {
            w.serialize(p).map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| csv_err(&path)(e.into()))?;

        let path = dir.join("dimensions.csv");
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["dimension", "weight"]).map_err(csv_err(&path))?;
        for (d, n) in self.dimensions.iter().zip(&self.node_weights) {
            w.write_record([d.name().to_string(), n.to_string()]).map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| csv_err(&path)(e.into()))?;

        let path = dir.join("cooccurrence.csv");
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        let mut header = vec!["dimension".to_string()];
        header.extend(self.dimensions.iter().map(|d| d.name().to_string()));
        w.write_record(&header).map_err(csv_err(&path))?;
        for (d, row) in self.dimensions.iter().zip(&self.cooccurrence) {
            let mut rec = vec![d.name().to_string()];
            rec.extend(row.iter().map(usize::to_string));
            w.write_record(&rec).map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| csv_err(&path)(e.into()))
    }
}
