//! Indexed families `{f_t}` and their upper sums.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::dsl::{self, SExpr};
use super::expr::ExtFunction;
use crate::chain::{directed_limits, ChainSchedule, DirectedLimit, IndexSubset, TailBound, TailMode};
use crate::error::{Error, Result};
use crate::ext::{ExtValue, LimitValue};
use crate::geometry::Region;

/// Default number of generated members of a countable family.
pub const DEFAULT_CHAIN_DEPTH: usize = 20;

#[derive(Clone, Debug)]
pub struct Member {
    pub label: String,
    pub func: Arc<ExtFunction>,
}

/// Generator `k ↦ f_k` of a countable family.
#[derive(Clone)]
pub struct Generator(Arc<dyn Fn(usize) -> Result<ExtFunction> + Send + Sync>);

impl Generator {
    pub fn new(f: impl Fn(usize) -> Result<ExtFunction> + Send + Sync + 'static) -> Self {
        Generator(Arc::new(f))
    }
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Generator(..)")
    }
}

#[derive(Clone, Debug)]
struct Countable {
    start: usize,
    depth: usize,
    generator: Generator,
}

/// A decoupled tuple known to the family author, one point per member.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
}

/// Upper sum at a point with the limit information behind it.
#[derive(Clone, Debug, Serialize)]
pub struct UpperSum {
    pub value: LimitValue,
    pub radius: Option<f64>,
    pub inconclusive: bool,
    pub prefix_sums: Vec<LimitValue>,
}

/// A family `{f_t}` on `R^n`: finitely many fixed members plus, optionally,
/// a countable tail enumerated from `start`.
#[derive(Clone, Debug)]
pub struct FunctionFamily {
    name: String,
    dim: usize,
    fixed: Vec<Member>,
    countable: Option<Countable>,
    generated: Vec<Member>,
    tail_mode: TailMode,
    witnesses: Vec<Witness>,
    region: Option<Region>,
    chain: ChainSchedule,
}

impl FunctionFamily {
    pub fn finite(dim: usize, funcs: Vec<ExtFunction>) -> Result<Self> {
        let fixed = funcs
            .into_iter()
            .enumerate()
            .map(|(i, f)| Member {
                label: format!("t{}", i + 1),
                func: Arc::new(f),
            })
            .collect();
        Self::assemble("family".into(), dim, fixed, None, TailMode::Finite, Vec::new(), None)
    }

    /// Countable family `{f_k : k ≥ start}` truncated to `depth` members.
    pub fn countable(
        dim: usize,
        start: usize,
        depth: usize,
        generator: Generator,
        tail_mode: TailMode,
    ) -> Result<Self> {
        if matches!(tail_mode, TailMode::Finite) {
            return Err(Error::InvalidParameter("a countable family needs a tail mode".into()));
        }
        let c = Countable {
            start,
            depth,
            generator,
        };
        Self::assemble("family".into(), dim, Vec::new(), Some(c), tail_mode, Vec::new(), None)
    }

    fn assemble(
        name: String,
        dim: usize,
        fixed: Vec<Member>,
        countable: Option<Countable>,
        tail_mode: TailMode,
        witnesses: Vec<Witness>,
        region: Option<Region>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("family dimension must be >= 1"));
        }
        let mut generated = Vec::new();
        if let Some(c) = &countable {
            if c.depth == 0 {
                return Err(Error::InvalidParameter("chain depth must be >= 1".into()));
            }
            for k in c.start..c.start + c.depth {
                generated.push(Member {
                    label: format!("t[{k}]"),
                    func: Arc::new((c.generator.0)(k)?),
                });
            }
        }
        if fixed.is_empty() && generated.is_empty() {
            return Err(Error::Empty("family has no members"));
        }
        for m in fixed.iter().chain(&generated) {
            m.func.check_dim(dim)?;
        }
        if let Some(r) = &region {
            if r.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: r.dim(),
                });
            }
        }
        let total = fixed.len() + generated.len();
        for w in &witnesses {
            if w.points.len() != total || w.points.iter().any(|p| p.len() != dim) {
                return Err(Error::InvalidParameter(format!(
                    "witness {} needs {total} points of dimension {dim}",
                    w.k
                )));
            }
        }
        let chain = match &countable {
            None => ChainSchedule::finite(fixed.len()),
            Some(c) => {
                let nf = fixed.len();
                let prefixes = (0..generated.len())
                    .map(|j| IndexSubset::new((0..nf + j + 1).collect()))
                    .collect();
                let args = (0..generated.len()).map(|j| Some(c.start + j)).collect();
                ChainSchedule::new(prefixes, args)?
            }
        };
        Ok(FunctionFamily {
            name,
            dim,
            fixed,
            countable,
            generated,
            tail_mode,
            witnesses,
            region,
            chain,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_region(mut self, region: Region) -> Result<Self> {
        if region.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: region.dim(),
            });
        }
        self.region = Some(region);
        Ok(self)
    }

    pub fn with_witnesses(self, witnesses: Vec<Witness>) -> Result<Self> {
        Self::assemble(
            self.name,
            self.dim,
            self.fixed,
            self.countable,
            self.tail_mode,
            witnesses,
            self.region,
        )
    }

    /// Regenerates the countable part with a different truncation depth.
    pub fn with_depth(&self, depth: usize) -> Result<Self> {
        let Some(c) = &self.countable else {
            return Ok(self.clone());
        };
        let witnesses = if depth == c.depth { self.witnesses.clone() } else { Vec::new() };
        let c = Countable {
            depth,
            ..c.clone()
        };
        Self::assemble(
            self.name.clone(),
            self.dim,
            self.fixed.clone(),
            Some(c),
            self.tail_mode.clone(),
            witnesses,
            self.region.clone(),
        )
    }

    /// The family with one more member present in every prefix. Witness
    /// tuples are extended by repeating their first point.
    pub fn append(&self, label: &str, f: ExtFunction) -> Result<Self> {
        let mut fixed = self.fixed.clone();
        fixed.push(Member {
            label: label.into(),
            func: Arc::new(f),
        });
        let nf = self.fixed.len();
        let witnesses = self
            .witnesses
            .iter()
            .map(|w| {
                let mut points = w.points.clone();
                points.insert(nf, w.points[0].clone());
                Witness { k: w.k, points }
            })
            .collect();
        Self::assemble(
            self.name.clone(),
            self.dim,
            fixed,
            self.countable.clone(),
            self.tail_mode.clone(),
            witnesses,
            self.region.clone(),
        )
    }

    /// The family with fixed member `id` replaced; witnesses are kept.
    pub fn replace_fixed(&self, id: usize, f: ExtFunction) -> Result<Self> {
        let mut fixed = self.fixed.clone();
        let Some(m) = fixed.get_mut(id) else {
            return Err(Error::InvalidParameter(format!("no fixed member with id {id}")));
        };
        m.func = Arc::new(f);
        Self::assemble(
            self.name.clone(),
            self.dim,
            fixed,
            self.countable.clone(),
            self.tail_mode.clone(),
            self.witnesses.clone(),
            self.region.clone(),
        )
    }

    /// The family without fixed member `id`; witnesses lose that point.
    pub fn remove_fixed(&self, id: usize) -> Result<Self> {
        if id >= self.fixed.len() {
            return Err(Error::InvalidParameter(format!("no fixed member with id {id}")));
        }
        let mut fixed = self.fixed.clone();
        fixed.remove(id);
        let witnesses = self
            .witnesses
            .iter()
            .map(|w| {
                let mut points = w.points.clone();
                points.remove(id);
                Witness { k: w.k, points }
            })
            .collect();
        Self::assemble(
            self.name.clone(),
            self.dim,
            fixed,
            self.countable.clone(),
            self.tail_mode.clone(),
            witnesses,
            self.region.clone(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn tail_mode(&self) -> &TailMode {
        &self.tail_mode
    }

    pub fn is_finite(&self) -> bool {
        self.countable.is_none()
    }

    pub fn witnesses(&self) -> &[Witness] {
        &self.witnesses
    }

    /// Number of fixed members.
    pub fn fixed_len(&self) -> usize {
        self.fixed.len()
    }

    /// All members of the deepest prefix, in id order.
    pub fn members(&self) -> Vec<&Member> {
        self.fixed.iter().chain(&self.generated).collect()
    }

    pub fn member(&self, id: usize) -> Option<&Member> {
        if id < self.fixed.len() {
            self.fixed.get(id)
        } else {
            self.generated.get(id - self.fixed.len())
        }
    }

    /// Generator index of member `id`, for countable members.
    pub fn generator_index(&self, id: usize) -> Option<usize> {
        let c = self.countable.as_ref()?;
        (id >= self.fixed.len() && id < self.fixed.len() + self.generated.len())
            .then(|| c.start + id - self.fixed.len())
    }

    /// Prefix chain `S_0 ⊂ S_1 ⊂ …` of the enumeration.
    pub fn chain(&self) -> &ChainSchedule {
        &self.chain
    }

    pub fn subset_members(&self, s: &IndexSubset) -> Result<Vec<&Member>> {
        s.ids()
            .iter()
            .map(|id| {
                self.member(*id)
                    .ok_or_else(|| Error::InvalidParameter(format!("no member with id {id}")))
            })
            .collect()
    }

    /// `Σ_{t∈S} f_t(x)`.
    pub fn partial_sum(&self, s: &IndexSubset, x: &[f64]) -> Result<ExtValue> {
        self.check_point(x)?;
        Ok(self.subset_members(s)?.iter().map(|m| m.func.eval(x)).sum())
    }

    /// Tail bound oracle of the family, if declared.
    pub fn tail_bound(&self) -> Option<&TailBound> {
        match &self.tail_mode {
            TailMode::TailBounded { bound, .. } => Some(bound),
            _ => None,
        }
    }

    /// Upper sum `limsup_S Σ_{t∈S} f_t(x)` along the family's chain.
    pub fn upper_sum(&self, x: &[f64]) -> Result<UpperSum> {
        self.check_point(x)?;
        let chain = &self.chain;
        let mut sums = Vec::with_capacity(chain.depth());
        let mut acc = ExtValue::ZERO;
        let mut seen = 0usize;
        for s in chain.prefixes() {
            for id in &s.ids()[seen..] {
                acc = acc + self.member(*id).expect("chain id").func.eval(x);
            }
            seen = s.len();
            sums.push(LimitValue::from(acc));
        }
        let lim: DirectedLimit = directed_limits(&sums, chain, &self.tail_mode)?;
        Ok(UpperSum {
            value: lim.limsup,
            radius: lim.radius,
            inconclusive: lim.inconclusive,
            prefix_sums: sums,
        })
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        Ok(())
    }
}

/// Parses a family file.
///
/// ```text
/// # comment
/// t1 := (recip 0 +)
/// t[k] := (scale (pow 2 (neg k)) (abs 0))
/// index_start := 1
/// tail_mode := bounded          # finite | monotone | bounded | bounded-nonneg | unknown
/// tail_bound := (pow 2 (neg k))
/// chain_depth := 20
/// region := (box (-2 2))
/// witness[k] := (tuple (pt (/ 1 k)) (pt (/ 1 (* k k))))
/// witness_range := 1..100
/// ```
pub fn parse_family(text: &str) -> Result<FunctionFamily> {
    let stmts = statements(text)?;
    let mut fixed = Vec::new();
    let mut template: Option<SExpr> = None;
    let mut start = 0usize;
    let mut mode_name: Option<(String, usize)> = None;
    let mut bound: Option<SExpr> = None;
    let mut depth = DEFAULT_CHAIN_DEPTH;
    let mut region = None;
    let mut witness: Option<SExpr> = None;
    let mut witness_range: Option<(usize, usize)> = None;
    let mut name = "family".to_string();
    let mut seen = BTreeSet::new();

    for st in &stmts {
        let perr = |column: usize, message: String| Error::Parse {
            line: st.line,
            column,
            message,
        };
        if !seen.insert(st.key.clone()) {
            return Err(perr(1, format!("duplicate key '{}'", st.key)));
        }
        let sexpr = || dsl::parse_sexpr_at(&st.value, st.line, st.value_column);
        let word = st.value.trim();
        let integer = || {
            word.parse::<usize>()
                .map_err(|_| perr(st.value_column, format!("expected an integer, found '{word}'")))
        };
        match st.key.as_str() {
            "t[k]" => template = Some(sexpr()?),
            "index_start" => start = integer()?,
            "chain_depth" => depth = integer()?,
            "tail_mode" => mode_name = Some((word.to_string(), st.value_column)),
            "tail_bound" => bound = Some(sexpr()?),
            "region" => region = Some(dsl::region_from_sexpr(&sexpr()?)?),
            "witness[k]" => witness = Some(sexpr()?),
            "name" => name = word.to_string(),
            "witness_range" => {
                let (a, b) = word
                    .split_once("..")
                    .ok_or_else(|| perr(st.value_column, "expected a..b".into()))?;
                let a = a.trim().parse::<usize>();
                let b = b.trim().parse::<usize>();
                match (a, b) {
                    (Ok(a), Ok(b)) if a <= b => witness_range = Some((a, b)),
                    _ => return Err(perr(st.value_column, "expected a..b with a <= b".into())),
                }
            }
            key if key.starts_with('t') && key[1..].chars().all(|c| c.is_ascii_digit()) && key.len() > 1 => {
                let f = dsl::build_function(&sexpr()?, None)?;
                fixed.push(Member {
                    label: key.to_string(),
                    func: Arc::new(f),
                });
            }
            other => return Err(perr(1, format!("unknown key '{other}'"))),
        }
    }

    let bound_fn = match bound {
        Some(e) => {
            // evaluate once to surface errors early
            dsl::scalar(&e, Some(start as f64))?;
            let e = Arc::new(e);
            Some(TailBound::new(move |k| {
                dsl::scalar(&e, Some(k as f64)).unwrap_or(f64::INFINITY)
            }))
        }
        None => None,
    };
    let mode = match mode_name.as_ref().map(|(m, c)| (m.as_str(), *c)) {
        None if template.is_none() => TailMode::Finite,
        None => TailMode::Unknown,
        Some(("finite", _)) => TailMode::Finite,
        Some(("monotone", _)) => TailMode::MonotoneNondecreasing,
        Some(("unknown", _)) => TailMode::Unknown,
        Some((m @ ("bounded" | "bounded-nonneg"), c)) => TailMode::TailBounded {
            bound: bound_fn.clone().ok_or_else(|| Error::Parse {
                line: 1,
                column: c,
                message: "tail_mode bounded needs a tail_bound".into(),
            })?,
            nonnegative: m == "bounded-nonneg",
        },
        Some((other, c)) => {
            return Err(Error::Parse {
                line: stmts
                    .iter()
                    .find(|s| s.key == "tail_mode")
                    .map_or(1, |s| s.line),
                column: c,
                message: format!("unknown tail mode '{other}'"),
            })
        }
    };

    // dimension: the largest requirement, pinned by any vector literal
    let mut dim = region.as_ref().map_or(1, |r: &Region| r.dim());
    let mut pinned = region.as_ref().map(|r| r.dim());
    let mut probe: Vec<ExtFunction> = fixed.iter().map(|m| (*m.func).clone()).collect();
    if let Some(t) = &template {
        probe.push(dsl::build_function(t, Some(start as f64))?);
    }
    for f in &probe {
        let (lo, exact) = f.dim_requirement();
        dim = dim.max(lo);
        if let Some(e) = exact {
            if pinned.is_some_and(|p| p != e) {
                return Err(Error::Dimension {
                    expected: pinned.unwrap_or(e),
                    got: e,
                });
            }
            pinned = Some(e);
        }
    }
    if let Some(p) = pinned {
        dim = dim.max(p);
    }

    let countable = match template {
        Some(t) => {
            if matches!(mode, TailMode::Finite) {
                return Err(Error::InvalidParameter(
                    "a countable template needs tail_mode other than finite".into(),
                ));
            }
            let t = Arc::new(t);
            Some(Countable {
                start,
                depth,
                generator: Generator::new(move |k| dsl::build_function(&t, Some(k as f64))),
            })
        }
        None => None,
    };

    let mut witnesses = Vec::new();
    if let Some(w) = witness {
        let (a, b) = witness_range.unwrap_or((1, 10));
        for k in a..=b {
            witnesses.push(Witness {
                k,
                points: dsl::build_tuple(&w, Some(k as f64))?,
            });
        }
    }
    FunctionFamily::assemble(name, dim, fixed, countable, mode, witnesses, region)
}

struct Statement {
    key: String,
    value: String,
    line: usize,
    value_column: usize,
}

/// Splits a family file into `key := value` statements; values continue
/// over lines until parentheses balance.
fn statements(text: &str) -> Result<Vec<Statement>> {
    let mut out: Vec<Statement> = Vec::new();
    let mut open: Option<(Statement, i64)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let depth_of = |s: &str| {
            s.chars().fold(0i64, |d, c| match c {
                '(' => d + 1,
                ')' => d - 1,
                _ => d,
            })
        };
        if let Some((mut st, d)) = open.take() {
            st.value.push('\n');
            st.value.push_str(line);
            let d = d + depth_of(line);
            if d > 0 {
                open = Some((st, d));
            } else {
                out.push(st);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(p) = line.find(":=") else {
            let column = line.len() - line.trim_start().len() + 1;
            return Err(Error::Parse {
                line: line_no,
                column,
                message: "expected 'key := value'".into(),
            });
        };
        let key = line[..p].trim().to_string();
        let rest = &line[p + 2..];
        let lead = rest.len() - rest.trim_start().len();
        let st = Statement {
            key,
            value: rest.trim_start().to_string(),
            line: line_no,
            value_column: p + 3 + lead,
        };
        let d = depth_of(rest);
        if d > 0 {
            open = Some((st, d));
        } else {
            out.push(st);
        }
    }
    if let Some((st, _)) = open {
        return Err(Error::Parse {
            line: st.line,
            column: st.value_column,
            message: "unclosed '('".into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_sum_of_abs_pair() {
        let fam = parse_family("t1 := (abs 0)\nt2 := (dist (1) 1)\n").unwrap();
        assert_eq!(fam.dim(), 1);
        assert_eq!(fam.upper_sum(&[0.0]).unwrap().value.value(), 1.0);
    }

    #[test]
    fn geometric_norm_upper_sum() {
        let src = "t[k] := (scale (pow 2 (neg k)) (norm2))\n\
                   index_start := 1\n\
                   tail_mode := bounded\n\
                   tail_bound := (* 4 (pow 2 (neg k)))\n\
                   chain_depth := 30\n";
        // f_t(x) = 2^-t |x|, so at x = 4 the partial sums are 4(1 − 2^-K)
        let fam = parse_family(src).unwrap();
        let s = fam.upper_sum(&[4.0]).unwrap();
        let oracle: f64 = (1..=30).map(|t| 4.0 * 0.5f64.powi(t)).sum();
        assert_eq!(s.prefix_sums.last().unwrap().value(), oracle);
        assert!((s.value.value() - 4.0).abs() <= s.radius.unwrap());
    }

    #[test]
    fn indicator_outside_absorbs() {
        let fam = parse_family("t1 := (abs 0)\nt2 := (indicator-box (0 1))").unwrap();
        assert!(fam.upper_sum(&[2.0]).unwrap().value.is_pos_infinity());
    }

    #[test]
    fn multiline_values_and_comments() {
        let src = "# pair\nt1 := (sum (abs 0)\n   (const 1)) # trailing\nt2 := (abs 0)\n";
        let fam = parse_family(src).unwrap();
        assert_eq!(fam.members().len(), 2);
        assert_eq!(fam.upper_sum(&[1.0]).unwrap().value.value(), 3.0);
    }

    #[test]
    fn parse_errors_report_lines() {
        match parse_family("t1 := (abs 0)\nt2 := (abz 0)\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 8)),
            other => panic!("{other:?}"),
        }
        match parse_family("t1 (abs 0)") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(parse_family("t1 := (affine (1 2) 0)\nt2 := (affine (1) 0)").is_err());
    }

    #[test]
    fn witnesses_extend_on_append() {
        let src = "t1 := (recip 0 +)\nt2 := (recip 0 -)\n\
                   witness[k] := (tuple (pt (/ 1 k)) (pt (/ 1 (* k k))))\nwitness_range := 1..5\n";
        let fam = parse_family(src).unwrap();
        assert_eq!(fam.witnesses().len(), 5);
        let g = fam.append("c", ExtFunction::Const(3.0)).unwrap();
        assert_eq!(g.witnesses()[1].points.len(), 3);
        assert_eq!(g.witnesses()[1].points[2], vec![0.5]);
    }

    #[test]
    fn chain_prefixes_of_countable_family() {
        let src = "t[k] := (scale (pow 2 (neg k)) (abs 0))\ntail_mode := monotone\nchain_depth := 4\n";
        let fam = parse_family(src).unwrap();
        let chain = fam.chain();
        assert_eq!(chain.depth(), 4);
        assert_eq!(chain.last().ids(), &[0, 1, 2, 3]);
        assert_eq!(fam.generator_index(2), Some(2));
    }
}
