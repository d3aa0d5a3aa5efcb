//! Simple undirected graphs on at most 128 labeled vertices, small edge
//! templates, and the supporting index arithmetic.
//!
//! Graphs store one adjacency row per vertex as a fixed two-word bitmask, so
//! neighborhood intersections are a couple of ANDs and popcounts. That is the
//! entire performance story of the sampler hot path.

pub mod count;

use std::fmt;

use crate::{ErgmError, Result};

/// Hard cap imposed by the fixed-width row masks.
pub const MAX_VERTICES: usize = 64 * WORDS;

const WORDS: usize = 4;

/// Two-word vertex-set mask. Internal helper, deliberately minimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct VertexMask(pub [u64; WORDS]);

impl VertexMask {
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_VERTICES);
        let mut w = [0u64; WORDS];
        for (k, word) in w.iter_mut().enumerate() {
            let lo = k * 64;
            if n > lo {
                let bits = (n - lo).min(64);
                *word = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
            }
        }
        VertexMask(w)
    }

    #[inline]
    pub fn set(&mut self, v: usize) {
        self.0[v >> 6] |= 1u64 << (v & 63);
    }

    #[inline]
    pub fn clear(&mut self, v: usize) {
        self.0[v >> 6] &= !(1u64 << (v & 63));
    }

    #[inline]
    pub fn test(&self, v: usize) -> bool {
        self.0[v >> 6] >> (v & 63) & 1 == 1
    }

    #[inline]
    pub fn and(self, other: Self) -> Self {
        VertexMask(std::array::from_fn(|k| self.0[k] & other.0[k]))
    }

    #[inline]
    pub fn and_not(self, other: Self) -> Self {
        VertexMask(std::array::from_fn(|k| self.0[k] & !other.0[k]))
    }

    #[inline]
    pub fn count(self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    /// Visits set bits in increasing order.
    #[inline]
    pub fn for_each(self, mut f: impl FnMut(usize)) {
        for (k, mut word) in self.0.into_iter().enumerate() {
            while word != 0 {
                let b = word.trailing_zeros() as usize;
                f(k * 64 + b);
                word &= word - 1;
            }
        }
    }
}

/// An unordered vertex pair i < j, the sites the dynamics flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId {
    i: usize,
    j: usize,
}

impl EdgeId {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(ErgmError::DegenerateEdge);
        }
        Ok(EdgeId { i: a.min(b), j: a.max(b) })
    }

    pub fn endpoints(self) -> (usize, usize) {
        (self.i, self.j)
    }

    /// Position in the lexicographic order of pairs on n vertices:
    /// (0,1), (0,2), ..., (0,n-1), (1,2), ...
    pub fn index(self, n: usize) -> usize {
        debug_assert!(self.j < n);
        self.i * (2 * n - self.i - 1) / 2 + (self.j - self.i - 1)
    }

    pub fn from_index(n: usize, mut idx: usize) -> Self {
        for i in 0..n {
            let row = n - 1 - i;
            if idx < row {
                return EdgeId { i, j: i + 1 + idx };
            }
            idx -= row;
        }
        panic!("pair index out of range for n = {n}");
    }
}

pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// A simple graph on n labeled vertices with adjacency-row storage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeGraph {
    n: usize,
    rows: Vec<VertexMask>,
    m: usize,
}

impl EdgeGraph {
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_VERTICES {
            return Err(ErgmError::BadArgument(format!(
                "vertex count {n} outside 1..={MAX_VERTICES}"
            )));
        }
        Ok(EdgeGraph { n, rows: vec![VertexMask::default(); n], m: 0 })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut g = EdgeGraph::empty(n)?;
        for i in 0..n {
            let mut row = VertexMask::full(n);
            row.clear(i);
            g.rows[i] = row;
        }
        g.m = pair_count(n);
        Ok(g)
    }

    /// Builds from a bitmask over pair indices in lexicographic order;
    /// only sensible for small n (enumeration code).
    pub fn from_pair_mask(n: usize, mask: u64) -> Result<Self> {
        let np = pair_count(n);
        assert!(np <= 64, "pair mask only covers n with at most 64 pairs");
        let mut g = EdgeGraph::empty(n)?;
        for idx in 0..np {
            if mask >> idx & 1 == 1 {
                let e = EdgeId::from_index(n, idx);
                g.set_edge(e, true);
            }
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn has_edge(&self, e: EdgeId) -> bool {
        self.rows[e.i].test(e.j)
    }

    /// Sets edge presence; returns true when the state actually changed.
    #[inline]
    pub fn set_edge(&mut self, e: EdgeId, present: bool) -> bool {
        let had = self.rows[e.i].test(e.j);
        if had == present {
            return false;
        }
        if present {
            self.rows[e.i].set(e.j);
            self.rows[e.j].set(e.i);
            self.m += 1;
        } else {
            self.rows[e.i].clear(e.j);
            self.rows[e.j].clear(e.i);
            self.m -= 1;
        }
        true
    }

    pub(crate) fn row(&self, v: usize) -> VertexMask {
        self.rows[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.rows[v].count() as usize
    }

    pub fn common_neighbor_count(&self, i: usize, j: usize) -> usize {
        self.rows[i].and(self.rows[j]).count() as usize
    }

    /// True when every edge of self is an edge of other (same vertex count).
    pub fn is_subgraph_of(&self, other: &EdgeGraph) -> bool {
        self.n == other.n
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.and_not(*b) == VertexMask::default())
    }

    pub fn edges(&self) -> Vec<EdgeId> {
        let mut out = Vec::with_capacity(self.m);
        for i in 0..self.n {
            self.rows[i].for_each(|j| {
                if j > i {
                    out.push(EdgeId { i, j });
                }
            });
        }
        out
    }

    /// Text form: a header line "n <count>", then the edge bits over
    /// lexicographic pair indices, packed LSB-first into hex bytes.
    pub fn to_text(&self) -> String {
        let np = pair_count(self.n);
        let mut bytes = vec![0u8; np.div_ceil(8)];
        for idx in 0..np {
            if self.has_edge(EdgeId::from_index(self.n, idx)) {
                bytes[idx / 8] |= 1 << (idx % 8);
            }
        }
        let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
        format!("n {}\n{}", self.n, if hex.is_empty() { "-" } else { &hex })
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let mut lines = s.lines();
        let header = lines.next().ok_or_else(|| ErgmError::Parse("empty graph text".into()))?;
        let n: usize = header
            .strip_prefix("n ")
            .ok_or_else(|| ErgmError::Parse("graph header must be 'n <count>'".into()))?
            .trim()
            .parse()
            .map_err(|_| ErgmError::Parse("bad vertex count".into()))?;
        let hex = lines
            .next()
            .map(str::trim)
            .ok_or_else(|| ErgmError::Parse("missing edge bits".into()))?;
        let mut g = EdgeGraph::empty(n)?;
        if hex == "-" {
            return Ok(g);
        }
        if hex.len() % 2 != 0 {
            return Err(ErgmError::Parse("odd hex length".into()));
        }
        let np = pair_count(n);
        if hex.len() / 2 != np.div_ceil(8) {
            return Err(ErgmError::Parse(format!(
                "edge bits length {} does not match n = {n}",
                hex.len() / 2
            )));
        }
        for idx in 0..np {
            let byte = u8::from_str_radix(&hex[2 * (idx / 8)..2 * (idx / 8) + 2], 16)
                .map_err(|_| ErgmError::Parse("bad hex digit".into()))?;
            if byte >> (idx % 8) & 1 == 1 {
                g.set_edge(EdgeId::from_index(n, idx), true);
            }
        }
        Ok(g)
    }
}

/// A small pattern graph whose injective copies get counted in hosts.
///
/// Vertices are 0..v. Edgeless and disconnected templates are legal here
/// (edge-deletion identities produce them); the model layer imposes its own
/// stricter requirements.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    v: usize,
    edges: Vec<(usize, usize)>,
}

impl Template {
    pub const MAX_TEMPLATE_VERTICES: usize = 8;
    pub const MAX_TEMPLATE_EDGES: usize = 12;

    pub fn new(v: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if v == 0 || v > Self::MAX_TEMPLATE_VERTICES || edges.len() > Self::MAX_TEMPLATE_EDGES
        {
            return Err(ErgmError::TemplateTooLarge { v, e: edges.len() });
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(ErgmError::BadTemplate(format!("loop at vertex {a}")));
            }
            if a >= v || b >= v {
                return Err(ErgmError::BadTemplate(format!(
                    "edge ({a}, {b}) outside vertex range 0..{v}"
                )));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        if norm.len() != edges.len() {
            return Err(ErgmError::BadTemplate("duplicate edge".into()));
        }
        Ok(Template { v, edges: norm })
    }

    pub fn single_edge() -> Self {
        Template::new(2, &[(0, 1)]).unwrap()
    }

    pub fn two_star() -> Self {
        Template::new(3, &[(0, 1), (0, 2)]).unwrap()
    }

    pub fn triangle() -> Self {
        Template::new(3, &[(0, 1), (0, 2), (1, 2)]).unwrap()
    }

    pub fn path(v: usize) -> Result<Self> {
        let edges: Vec<_> = (0..v.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Template::new(v, &edges)
    }

    pub fn cycle(v: usize) -> Result<Self> {
        if v < 3 {
            return Err(ErgmError::BadTemplate("cycle needs at least 3 vertices".into()));
        }
        let edges: Vec<_> = (0..v).map(|i| (i, (i + 1) % v)).collect();
        Template::new(v, &edges)
    }

    pub fn complete(v: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..v {
            for j in i + 1..v {
                edges.push((i, j));
            }
        }
        Template::new(v, &edges)
    }

    /// Parses either a named shape ("edge", "two-star", "triangle",
    /// "path-4", "cycle-5", "complete-4") or an explicit "v:a-b,c-d" form
    /// with 1-based vertices.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "edge" => return Ok(Template::single_edge()),
            "two-star" | "twostar" | "2-star" => return Ok(Template::two_star()),
            "triangle" | "tri" => return Ok(Template::triangle()),
            _ => {}
        }
        for (prefix, ctor) in [
            ("path-", Template::path as fn(usize) -> Result<Template>),
            ("cycle-", Template::cycle),
            ("complete-", Template::complete),
        ] {
            if let Some(rest) = s.strip_prefix(prefix) {
                let v: usize =
                    rest.parse().map_err(|_| ErgmError::Parse(format!("bad size in {s:?}")))?;
                return ctor(v);
            }
        }
        let (v_part, e_part) = s
            .split_once(':')
            .ok_or_else(|| ErgmError::Parse(format!("unrecognized template {s:?}")))?;
        let v: usize =
            v_part.trim().parse().map_err(|_| ErgmError::Parse("bad vertex count".into()))?;
        let mut edges = Vec::new();
        let e_part = e_part.trim();
        if !e_part.is_empty() {
            for pair in e_part.split(',') {
                let (a, b) = pair
                    .trim()
                    .split_once('-')
                    .ok_or_else(|| ErgmError::Parse(format!("bad edge {pair:?}")))?;
                let a: usize =
                    a.trim().parse().map_err(|_| ErgmError::Parse("bad endpoint".into()))?;
                let b: usize =
                    b.trim().parse().map_err(|_| ErgmError::Parse("bad endpoint".into()))?;
                if a == 0 || b == 0 {
                    return Err(ErgmError::Parse("template vertices are 1-based".into()));
                }
                edges.push((a - 1, b - 1));
            }
        }
        Template::new(v, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.v
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, u: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == u || b == u).count()
    }

    pub fn has_isolated_vertex(&self) -> bool {
        (0..self.v).any(|u| self.degree(u) == 0)
    }

    /// Removes one edge by position, keeping the vertex set (possibly
    /// leaving isolated vertices behind).
    pub fn delete_edge(&self, idx: usize) -> Result<Self> {
        if idx >= self.edges.len() {
            return Err(ErgmError::BadArgument(format!("no edge at position {idx}")));
        }
        let mut edges = self.edges.clone();
        edges.remove(idx);
        Template::new(self.v, &edges)
    }

    /// Multi-line text form: a header "v <count>", then one "i j" line per
    /// edge with 1-based endpoints.
    pub fn to_text(&self) -> String {
        let mut out = format!("v {}", self.v);
        for (a, b) in &self.edges {
            out.push_str(&format!("\n{} {}", a + 1, b + 1));
        }
        out
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let header =
            lines.next().ok_or_else(|| ErgmError::Parse("empty template text".into()))?;
        let v: usize = header
            .strip_prefix("v ")
            .ok_or_else(|| ErgmError::Parse("template header must be 'v <count>'".into()))?
            .trim()
            .parse()
            .map_err(|_| ErgmError::Parse("bad vertex count".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let (a, b) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| ErgmError::Parse(format!("bad edge line {line:?}")))?;
            let a: usize =
                a.trim().parse().map_err(|_| ErgmError::Parse("bad endpoint".into()))?;
            let b: usize =
                b.trim().parse().map_err(|_| ErgmError::Parse("bad endpoint".into()))?;
            if a == 0 || b == 0 {
                return Err(ErgmError::Parse("template vertices are 1-based".into()));
            }
            edges.push((a - 1, b - 1));
        }
        Template::new(v, &edges)
    }

    /// Number of automorphisms, by brute force over vertex permutations.
    pub fn automorphism_count(&self) -> usize {
        let mut perm: Vec<usize> = (0..self.v).collect();
        let mut count = 0;
        permute(&mut perm, 0, &mut |p| {
            let ok = self.edges.iter().all(|&(a, b)| {
                let (x, y) = (p[a].min(p[b]), p[a].max(p[b]));
                self.edges.binary_search(&(x, y)).is_ok()
            });
            if ok {
                count += 1;
            }
        });
        count
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.v)?;
        for (k, (a, b)) in self.edges.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}-{}", a + 1, b + 1)?;
        }
        Ok(())
    }
}

fn permute(xs: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == xs.len() {
        visit(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, visit);
        xs.swap(k, i);
    }
}
