use std::fmt;

/// Every callable head in the language: the primitives library, the
/// segmenter tool, and the small arithmetic/logic/list core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    // geometric
    Area,
    BBox,
    Centroid,
    Orientation,
    // topological
    Adjacent,
    Contains,
    Distance,
    Grid,
    InCell,
    Nearest,
    Overlaps,
    Quadrant,
    Relpos,
    // aggregation
    Argmin,
    Argmax,
    Components,
    Count,
    Exists,
    Extreme,
    FilterBy,
    Largest,
    Smallest,
    MeanPosition,
    Union,
    // tool registry
    Segment,
    // core
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    And,
    Or,
    Not,
    Nth,
    Len,
    Pair,
}

/// Arity bounds; `max = None` means variadic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arity {
    pub min: usize,
    pub max: Option<usize>,
}

impl Arity {
    const fn exactly(n: usize) -> Self {
        Self {
            min: n,
            max: Some(n),
        }
    }

    const fn at_least(n: usize) -> Self {
        Self { min: n, max: None }
    }

    pub fn accepts(&self, n: usize) -> bool {
        n >= self.min && self.max.is_none_or(|m| n <= m)
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(m) if m == self.min => write!(f, "{m}"),
            Some(m) => write!(f, "{}..={m}", self.min),
            None => write!(f, "{}+", self.min),
        }
    }
}

/// Entries of the primitives library as grouped for usage reporting.
/// `argmin`/`argmax` and `largest`/`smallest` are one entry each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Area,
    BBox,
    Centroid,
    Orientation,
    Adjacent,
    Contains,
    Distance,
    Grid,
    InCell,
    Nearest,
    Overlaps,
    Quadrant,
    Relpos,
    ArgExtremum,
    Components,
    Count,
    Exists,
    Extreme,
    FilterBy,
    SizeExtremum,
    MeanPosition,
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimitiveGroup {
    Geometric,
    Topological,
    Aggregation,
}

impl Primitive {
    pub const ALL: [Primitive; 22] = [
        Primitive::Area,
        Primitive::BBox,
        Primitive::Centroid,
        Primitive::Orientation,
        Primitive::Adjacent,
        Primitive::Contains,
        Primitive::Distance,
        Primitive::Grid,
        Primitive::InCell,
        Primitive::Nearest,
        Primitive::Overlaps,
        Primitive::Quadrant,
        Primitive::Relpos,
        Primitive::ArgExtremum,
        Primitive::Components,
        Primitive::Count,
        Primitive::Exists,
        Primitive::Extreme,
        Primitive::FilterBy,
        Primitive::SizeExtremum,
        Primitive::MeanPosition,
        Primitive::Union,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Area => "area",
            Primitive::BBox => "bbox",
            Primitive::Centroid => "centroid",
            Primitive::Orientation => "orientation",
            Primitive::Adjacent => "adjacent",
            Primitive::Contains => "contains",
            Primitive::Distance => "distance",
            Primitive::Grid => "grid",
            Primitive::InCell => "in_cell",
            Primitive::Nearest => "nearest",
            Primitive::Overlaps => "overlaps",
            Primitive::Quadrant => "quadrant",
            Primitive::Relpos => "relpos",
            Primitive::ArgExtremum => "argmin/argmax",
            Primitive::Components => "components",
            Primitive::Count => "count",
            Primitive::Exists => "exists",
            Primitive::Extreme => "extreme",
            Primitive::FilterBy => "filter_by",
            Primitive::SizeExtremum => "largest/smallest",
            Primitive::MeanPosition => "mean_position",
            Primitive::Union => "union",
        }
    }

    pub fn group(self) -> PrimitiveGroup {
        use Primitive::*;
        match self {
            Area | BBox | Centroid | Orientation => PrimitiveGroup::Geometric,
            Adjacent | Contains | Distance | Grid | InCell | Nearest | Overlaps | Quadrant
            | Relpos => PrimitiveGroup::Topological,
            _ => PrimitiveGroup::Aggregation,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const TABLE: &[(Builtin, &str)] = &[
    (Builtin::Area, "area"),
    (Builtin::BBox, "bbox"),
    (Builtin::Centroid, "centroid"),
    (Builtin::Orientation, "orientation"),
    (Builtin::Adjacent, "adjacent"),
    (Builtin::Contains, "contains"),
    (Builtin::Distance, "distance"),
    (Builtin::Grid, "grid"),
    (Builtin::InCell, "in_cell"),
    (Builtin::Nearest, "nearest"),
    (Builtin::Overlaps, "overlaps"),
    (Builtin::Quadrant, "quadrant"),
    (Builtin::Relpos, "relpos"),
    (Builtin::Argmin, "argmin"),
    (Builtin::Argmax, "argmax"),
    (Builtin::Components, "components"),
    (Builtin::Count, "count"),
    (Builtin::Exists, "exists"),
    (Builtin::Extreme, "extreme"),
    (Builtin::FilterBy, "filter_by"),
    (Builtin::Largest, "largest"),
    (Builtin::Smallest, "smallest"),
    (Builtin::MeanPosition, "mean_position"),
    (Builtin::Union, "union"),
    (Builtin::Segment, "segment"),
    (Builtin::Add, "+"),
    (Builtin::Sub, "-"),
    (Builtin::Mul, "*"),
    (Builtin::Div, "/"),
    (Builtin::Lt, "<"),
    (Builtin::Le, "<="),
    (Builtin::Gt, ">"),
    (Builtin::Ge, ">="),
    (Builtin::Eq, "="),
    (Builtin::And, "and"),
    (Builtin::Or, "or"),
    (Builtin::Not, "not"),
    (Builtin::Nth, "nth"),
    (Builtin::Len, "len"),
    (Builtin::Pair, "pair"),
];

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        TABLE.iter().find(|(_, n)| *n == name).map(|(b, _)| *b)
    }

    pub fn name(self) -> &'static str {
        TABLE.iter().find(|(b, _)| *b == self).unwrap().1
    }

    pub fn all() -> impl Iterator<Item = Builtin> {
        TABLE.iter().map(|(b, _)| *b)
    }

    pub fn arity(self) -> Arity {
        use Builtin::*;
        match self {
            Area | BBox | Centroid | Orientation | Components | Count | Exists | Union
            | Argmin | Argmax | Largest | Smallest | MeanPosition | Not | Len => {
                Arity::exactly(1)
            }
            Adjacent | Contains | Distance | Nearest | Overlaps | Quadrant | Relpos
            | Extreme | Segment | Div | Lt | Le | Gt | Ge | Eq | Nth | Pair => Arity::exactly(2),
            Grid | InCell => Arity::exactly(3),
            FilterBy => Arity::exactly(4),
            Sub => Arity {
                min: 1,
                max: Some(2),
            },
            Add | Mul => Arity::at_least(2),
            And | Or => Arity::at_least(1),
        }
    }

    /// Library entry this head belongs to, if it is a primitive.
    pub fn primitive(self) -> Option<Primitive> {
        use Builtin as B;
        Some(match self {
            B::Area => Primitive::Area,
            B::BBox => Primitive::BBox,
            B::Centroid => Primitive::Centroid,
            B::Orientation => Primitive::Orientation,
            B::Adjacent => Primitive::Adjacent,
            B::Contains => Primitive::Contains,
            B::Distance => Primitive::Distance,
            B::Grid => Primitive::Grid,
            B::InCell => Primitive::InCell,
            B::Nearest => Primitive::Nearest,
            B::Overlaps => Primitive::Overlaps,
            B::Quadrant => Primitive::Quadrant,
            B::Relpos => Primitive::Relpos,
            B::Argmin | B::Argmax => Primitive::ArgExtremum,
            B::Components => Primitive::Components,
            B::Count => Primitive::Count,
            B::Exists => Primitive::Exists,
            B::Extreme => Primitive::Extreme,
            B::FilterBy => Primitive::FilterBy,
            B::Largest | B::Smallest => Primitive::SizeExtremum,
            B::MeanPosition => Primitive::MeanPosition,
            B::Union => Primitive::Union,
            _ => return None,
        })
    }

    pub fn is_ordering_comparator(self) -> bool {
        matches!(self, Builtin::Lt | Builtin::Le | Builtin::Gt | Builtin::Ge)
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
