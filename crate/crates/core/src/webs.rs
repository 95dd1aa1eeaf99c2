//! Webs of stable weighted trees: enumeration up to equivalence, the
//! partial order generated by the three degeneration moves, and a brute
//! force check of the poset axioms.
//!
//! Weights are integer classes in units of the energy quantum. A web has a
//! principal tree rooted at the vortex on the surface and, for each of the
//! `k` cylindrical ends, an ordered chain of trees rooted at vortices on
//! the cylinder. Non-root vertices are sphere bubbles.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Result, VortexError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Role {
    PrincipalRoot,
    BranchRoot,
    Plain,
}

impl Role {
    fn tag(self) -> char {
        match self {
            Role::PrincipalRoot => 'P',
            Role::BranchRoot => 'B',
            Role::Plain => 'v',
        }
    }
}

/// A rooted tree with weighted vertices. Children are kept sorted by
/// their encoding, which makes equal trees structurally equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightedTree {
    pub role: Role,
    pub weight: i64,
    pub children: Vec<WeightedTree>,
}

/// One vertex of a flattened tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub role: Role,
    pub weight: i64,
    pub parent: Option<usize>,
}

impl WeightedTree {
    pub fn leaf(role: Role, weight: i64) -> Self {
        Self { role, weight, children: Vec::new() }
    }

    pub fn total_weight(&self) -> i64 {
        self.weight + self.children.iter().map(|c| c.total_weight()).sum::<i64>()
    }

    pub fn vertex_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.vertex_count()).sum::<usize>()
    }

    /// Sorts children recursively.
    pub fn canonical(&self) -> Self {
        let mut children: Vec<Self> = self.children.iter().map(|c| c.canonical()).collect();
        children.sort_by_key(|c| c.encode());
        Self { role: self.role, weight: self.weight, children }
    }

    /// Vertices in preorder with parent links.
    pub fn vertices(&self) -> Vec<Vertex> {
        fn walk(t: &WeightedTree, parent: Option<usize>, out: &mut Vec<Vertex>) {
            let me = out.len();
            out.push(Vertex { role: t.role, weight: t.weight, parent });
            for c in &t.children {
                walk(c, Some(me), out);
            }
        }
        let mut out = Vec::new();
        walk(self, None, &mut out);
        out
    }

    /// `<tag><weight>(<child>,...)`.
    pub fn encode(&self) -> String {
        let mut s = format!("{}{}", self.role.tag(), self.weight);
        if !self.children.is_empty() {
            let parts: Vec<String> = self.children.iter().map(|c| c.encode()).collect();
            s.push('(');
            s.push_str(&parts.join(","));
            s.push(')');
        }
        s
    }

    /// Stability of this vertex and all plain descendants.
    fn is_stable(&self) -> bool {
        let here = match self.role {
            Role::PrincipalRoot => self.weight >= 0,
            Role::BranchRoot => self.weight >= 0 && (self.weight > 0 || !self.children.is_empty()),
            Role::Plain => {
                // weight-0 bubbles need two children carrying energy
                self.weight > 0 || self.children.iter().filter(|c| c.total_weight() > 0).count() >= 2
            }
        };
        here && self.children.iter().all(|c| c.role == Role::Plain && c.is_stable())
    }
}

/// Sphere-bubble energetics of the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EnergyModel {
    /// `H_2(X; Z) = 0`: sphere bubbles carry no class.
    pub sphere_classes_trivial: bool,
    /// Energy per unit class.
    pub quantum: u32,
}

impl EnergyModel {
    pub fn new(sphere_classes_trivial: bool, quantum: u32) -> Result<Self> {
        if quantum == 0 {
            return Err(invalid("webs.quantum", "must be at least 1"));
        }
        Ok(Self { sphere_classes_trivial, quantum })
    }

    /// The linear target: no sphere classes, unit quantum.
    pub fn linear() -> Self {
        Self { sphere_classes_trivial: true, quantum: 1 }
    }

    pub fn energy(&self, weight: i64) -> i64 {
        weight * self.quantum as i64
    }

    fn plain_weights(&self, total: i64) -> Vec<i64> {
        if self.sphere_classes_trivial {
            vec![0]
        } else {
            (0..=total).collect()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Web {
    pub genus: u32,
    pub principal: WeightedTree,
    /// One ordered chain per end.
    pub chains: Vec<Vec<WeightedTree>>,
}

impl Web {
    pub fn k(&self) -> usize {
        self.chains.len()
    }

    pub fn total_weight(&self) -> i64 {
        self.principal.total_weight() + self.chains.iter().flatten().map(|t| t.total_weight()).sum::<i64>()
    }

    pub fn canonical(&self) -> Self {
        Self {
            genus: self.genus,
            principal: self.principal.canonical(),
            chains: self.chains.iter().map(|c| c.iter().map(|t| t.canonical()).collect()).collect(),
        }
    }

    /// Trees in all chains plus vertices; strictly decreased by every move.
    pub fn measure(&self) -> usize {
        let trees: usize = self.chains.iter().map(|c| c.len()).sum();
        let vertices: usize =
            self.principal.vertex_count() + self.chains.iter().flatten().map(|t| t.vertex_count()).sum::<usize>();
        trees + vertices
    }

    pub fn is_stable(&self) -> bool {
        self.principal.role == Role::PrincipalRoot
            && self.principal.is_stable()
            && self.chains.iter().flatten().all(|t| t.role == Role::BranchRoot && t.is_stable())
    }

    /// `web g=<genus> k=<k> B=<B>: <principal> | <chain> | ...`, with `-`
    /// for an empty chain.
    pub fn encode(&self) -> String {
        let chains: Vec<String> = self
            .chains
            .iter()
            .map(|c| {
                if c.is_empty() {
                    "-".to_string()
                } else {
                    c.iter().map(|t| t.encode()).collect::<Vec<_>>().join(" ")
                }
            })
            .collect();
        format!(
            "web g={} k={} B={}: {} | {}",
            self.genus,
            self.k(),
            self.total_weight(),
            self.principal.encode(),
            chains.join(" | ")
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let perr = |reason: &str| VortexError::Parse { line: 1, reason: reason.to_string() };
        let rest = line.trim().strip_prefix("web ").ok_or_else(|| perr("missing `web` prefix"))?;
        let (head, body) = rest.split_once(':').ok_or_else(|| perr("missing `:`"))?;
        let mut genus = None;
        let mut k = None;
        let mut total = None;
        for field in head.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| perr("malformed header field"))?;
            let v: i64 = value.parse().map_err(|_| perr("header value is not an integer"))?;
            match key {
                "g" => genus = Some(v),
                "k" => k = Some(v),
                "B" => total = Some(v),
                _ => return Err(perr("unknown header field")),
            }
        }
        let (genus, k, total) = match (genus, k, total) {
            (Some(g), Some(k), Some(b)) if g >= 0 && k >= 1 => (g as u32, k as usize, b),
            _ => return Err(perr("header needs g >= 0, k >= 1 and B")),
        };
        let mut parts = body.split('|').map(str::trim);
        let principal = parse_tree(parts.next().ok_or_else(|| perr("missing principal tree"))?)?;
        let mut chains = Vec::new();
        for part in parts {
            if part == "-" {
                chains.push(Vec::new());
            } else {
                chains.push(part.split_whitespace().map(parse_tree).collect::<Result<Vec<_>>>()?);
            }
        }
        let web = Web { genus, principal, chains }.canonical();
        if web.k() != k || web.total_weight() != total {
            return Err(perr("header does not match the trees"));
        }
        if !web.is_stable() {
            return Err(perr("web is not stable"));
        }
        Ok(web)
    }

    /// Graphviz description of the web.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph \"{name}\" {{\n");
        let mut next = 0usize;
        let mut emit = |t: &WeightedTree, out: &mut String| -> usize {
            let base = next;
            for (i, v) in t.vertices().iter().enumerate() {
                let shape = match v.role {
                    Role::PrincipalRoot => "doublecircle",
                    Role::BranchRoot => "box",
                    Role::Plain => "circle",
                };
                out.push_str(&format!("  n{} [label=\"{}\", shape={shape}];\n", base + i, v.weight));
                if let Some(p) = v.parent {
                    out.push_str(&format!("  n{} -> n{};\n", base + p, base + i));
                }
            }
            next += t.vertex_count();
            base
        };
        let root = emit(&self.principal, &mut out);
        for (i, chain) in self.chains.iter().enumerate() {
            let mut prev = root;
            for t in chain {
                let r = emit(t, &mut out);
                out.push_str(&format!("  n{prev} -> n{r} [style=dashed, label=\"end {}\"];\n", i + 1));
                prev = r;
            }
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for Web {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

fn parse_tree(s: &str) -> Result<WeightedTree> {
    fn node(bytes: &[u8], pos: &mut usize) -> Result<WeightedTree> {
        let perr = |reason: String| VortexError::Parse { line: 1, reason };
        let role = match bytes.get(*pos) {
            Some(b'P') => Role::PrincipalRoot,
            Some(b'B') => Role::BranchRoot,
            Some(b'v') => Role::Plain,
            other => {
                return Err(perr(format!("expected a role tag at {}, found {:?}", pos, other.map(|&b| b as char))))
            }
        };
        *pos += 1;
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        let weight: i64 = std::str::from_utf8(&bytes[start..*pos])
            .ok()
            .and_then(|w| w.parse().ok())
            .ok_or_else(|| perr(format!("expected a weight at {start}")))?;
        let mut children = Vec::new();
        if bytes.get(*pos) == Some(&b'(') {
            loop {
                *pos += 1;
                children.push(node(bytes, pos)?);
                match bytes.get(*pos) {
                    Some(b',') => continue,
                    Some(b')') => {
                        *pos += 1;
                        break;
                    }
                    _ => return Err(perr(format!("unbalanced children at {pos}"))),
                }
            }
        }
        Ok(WeightedTree { role, weight, children })
    }
    let bytes = s.as_bytes();
    let mut pos = 0;
    let t = node(bytes, &mut pos)?;
    if pos != bytes.len() {
        return Err(VortexError::Parse { line: 1, reason: format!("trailing input in `{s}`") });
    }
    Ok(t)
}

/// Memoised generators of canonical trees by total weight.
struct TreeCatalogue {
    model: EnergyModel,
    plain: HashMap<i64, Vec<WeightedTree>>,
}

impl TreeCatalogue {
    fn new(model: EnergyModel) -> Self {
        Self { model, plain: HashMap::new() }
    }

    /// Plain subtrees of the given positive total weight.
    fn plain(&mut self, total: i64) -> Vec<WeightedTree> {
        if let Some(v) = self.plain.get(&total) {
            return v.clone();
        }
        let mut out = Vec::new();
        for w in self.model.plain_weights(total) {
            // a weight-0 bubble splits its total over at least two children
            let max_part = if w == 0 { total - 1 } else { total - w };
            for children in self.forests(total - w, max_part) {
                let t = WeightedTree { role: Role::Plain, weight: w, children }.canonical();
                if t.is_stable() {
                    out.push(t);
                }
            }
        }
        out.sort();
        out.dedup();
        self.plain.insert(total, out.clone());
        out
    }

    /// Multisets of plain subtrees with the given total weight, each part at
    /// most `max_part`.
    fn forests(&mut self, total: i64, max_part: i64) -> Vec<Vec<WeightedTree>> {
        if total == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for part in (1..=max_part.min(total)).rev() {
            let trees = self.plain(part);
            for rest in self.forests(total - part, part) {
                // multisets: within equal parts keep trees non-decreasing
                let floor = rest.iter().filter(|t| t.total_weight() == part).cloned().min();
                for t in &trees {
                    if floor.as_ref().is_some_and(|f| t > f) {
                        continue;
                    }
                    let mut forest = rest.clone();
                    forest.push(t.clone());
                    out.push(forest);
                }
            }
        }
        out
    }

    fn rooted(&mut self, role: Role, total: i64) -> Vec<WeightedTree> {
        let mut out = Vec::new();
        for w in 0..=total {
            for children in self.forests(total - w, total - w) {
                let t = WeightedTree { role, weight: w, children }.canonical();
                if t.is_stable() {
                    out.push(t);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Ordered compositions of `total` into positive parts.
fn compositions(total: i64) -> Vec<Vec<i64>> {
    if total == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 1..=total {
        for mut rest in compositions(total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Splits of `total` into `k` ordered non-negative parts.
fn splits(total: i64, k: usize) -> Vec<Vec<i64>> {
    if k == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            splits(total - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn cartesian<T: Clone>(lists: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for prefix in &out {
            for item in list {
                let mut p = prefix.clone();
                p.push(item.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// All canonical webs of total class `class` with `k` ends, sorted by
/// encoding.
pub fn enumerate_webs(model: EnergyModel, class: i64, k: usize, genus: u32) -> Result<Vec<Web>> {
    if class < 1 {
        return Err(invalid("webs.B", format!("must be at least 1, found {class}")));
    }
    if k < 1 {
        return Err(invalid("webs.k", "need at least one end"));
    }
    let mut cat = TreeCatalogue::new(model);
    let mut chain_cache: HashMap<i64, Vec<Vec<WeightedTree>>> = HashMap::new();
    let mut out = Vec::new();
    for principal_total in 0..=class {
        let principals = cat.rooted(Role::PrincipalRoot, principal_total);
        for split in splits(class - principal_total, k) {
            let mut per_end = Vec::with_capacity(k);
            for &r in &split {
                chain_cache.entry(r).or_insert_with(|| {
                    let mut chains = Vec::new();
                    for comp in compositions(r) {
                        let options: Vec<Vec<WeightedTree>> =
                            comp.iter().map(|&t| cat.rooted(Role::BranchRoot, t)).collect();
                        chains.extend(cartesian(&options));
                    }
                    chains
                });
                per_end.push(chain_cache[&r].clone());
            }
            for chains in cartesian(&per_end) {
                for p in &principals {
                    out.push(Web { genus, principal: p.clone(), chains: chains.clone() });
                }
            }
        }
    }
    out.sort_by_key(|w| w.encode());
    Ok(out)
}

fn merge_into(target: &mut WeightedTree, source: WeightedTree) {
    target.weight += source.weight;
    target.children.extend(source.children);
}

/// Webs reached by one application of a move, canonicalised.
pub fn successors(web: &Web) -> Vec<Web> {
    let mut out = Vec::new();
    // (1) contract a plain-plain edge
    fn contractions(t: &WeightedTree) -> Vec<WeightedTree> {
        let mut out = Vec::new();
        for (i, c) in t.children.iter().enumerate() {
            if t.role == Role::Plain {
                let mut merged = t.clone();
                let child = merged.children.remove(i);
                merge_into(&mut merged, child);
                out.push(merged);
            }
            for replaced in contractions(c) {
                let mut copy = t.clone();
                copy.children[i] = replaced;
                out.push(copy);
            }
        }
        out
    }
    for p in contractions(&web.principal) {
        out.push(Web { principal: p, ..web.clone() });
    }
    for (i, chain) in web.chains.iter().enumerate() {
        for (j, tree) in chain.iter().enumerate() {
            for t in contractions(tree) {
                let mut w = web.clone();
                w.chains[i][j] = t;
                out.push(w);
            }
        }
    }
    // (2) merge adjacent branch roots
    for (i, chain) in web.chains.iter().enumerate() {
        for j in 0..chain.len().saturating_sub(1) {
            let mut w = web.clone();
            let next = w.chains[i].remove(j + 1);
            merge_into(&mut w.chains[i][j], next);
            out.push(w);
        }
    }
    // (3) absorb the first tree of a chain into the principal root
    for i in 0..web.k() {
        if !web.chains[i].is_empty() {
            let mut w = web.clone();
            let first = w.chains[i].remove(0);
            merge_into(&mut w.principal, first);
            out.push(w);
        }
    }
    let mut out: Vec<Web> = out.into_iter().map(|w| w.canonical()).collect();
    out.sort();
    out.dedup();
    out
}

fn check_compatible(a: &Web, b: &Web) -> Result<()> {
    if a.genus != b.genus || a.k() != b.k() || a.total_weight() != b.total_weight() {
        return Err(VortexError::IncompatibleWebs(format!(
            "(g, k, B) = ({}, {}, {}) vs ({}, {}, {})",
            a.genus,
            a.k(),
            a.total_weight(),
            b.genus,
            b.k(),
            b.total_weight()
        )));
    }
    Ok(())
}

/// `a` precedes `b` when `b` is reached from `a` by finitely many moves.
pub fn precedes(a: &Web, b: &Web) -> Result<bool> {
    check_compatible(a, b)?;
    let (a, b) = (a.canonical(), b.canonical());
    let mut seen = HashSet::from([a.clone()]);
    let mut queue = VecDeque::from([a]);
    while let Some(w) = queue.pop_front() {
        if w == b {
            return Ok(true);
        }
        // moves decrease the measure, so smaller webs never lead to b
        for s in successors(&w) {
            if s.measure() >= b.measure() && seen.insert(s.clone()) {
                queue.push_back(s);
            }
        }
    }
    Ok(false)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosetReport {
    pub elements: usize,
    /// Pairs `a < b` with `a != b`.
    pub relations: usize,
    pub hasse_edges: usize,
    pub maximal: Vec<String>,
    pub antisymmetric: bool,
    pub transitive: bool,
    /// A pair witnessing a failed axiom or a move leaving the set.
    pub violation: Option<(String, String)>,
}

impl PosetReport {
    pub fn is_poset(&self) -> bool {
        self.antisymmetric && self.transitive && self.violation.is_none()
    }
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn contains(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }
    fn is_subset(&self, other: &BitSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

/// Reachable sets, filled in order of increasing measure since every
/// move lowers it.
fn up_sets(webs: &[Web], succ: &[Vec<usize>]) -> Vec<BitSet> {
    let n = webs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| webs[i].measure());
    let mut up: Vec<BitSet> = (0..n).map(|_| BitSet::new(n)).collect();
    for &i in &order {
        let mut set = BitSet::new(n);
        set.insert(i);
        for &j in &succ[i] {
            if webs[j].measure() < webs[i].measure() {
                set.union_with(&up[j]);
            }
        }
        up[i] = set;
    }
    up
}

/// Hasse edges: `b` covers `a` when no `c` lies strictly between.
fn covers(succ: &[Vec<usize>], up: &[BitSet]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, list) in succ.iter().enumerate() {
        for &b in list {
            if !list.iter().any(|&c| c != b && up[c].contains(b)) && !out.contains(&(a, b)) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Checks the partial order axioms on a closed set of webs.
///
/// Reachability is built from one-move successors, so transitivity is
/// checked as `b` in `up(a)` implies `up(b)` contained in `up(a)`, and
/// antisymmetry both pairwise and through the strictly decreasing measure
/// on every move.
pub fn poset_check(webs: &[Web]) -> PosetReport {
    let webs: Vec<Web> = webs.iter().map(|w| w.canonical()).collect();
    let n = webs.len();
    let index: HashMap<&Web, usize> = webs.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let mut violation = None;
    let mut antisymmetric = true;
    let mut succ: Vec<Vec<usize>> = Vec::with_capacity(n);
    for w in &webs {
        let mut list = Vec::new();
        for s in successors(w) {
            if s.measure() >= w.measure() {
                antisymmetric = false;
                violation.get_or_insert((w.encode(), s.encode()));
            }
            match index.get(&s) {
                Some(&j) => list.push(j),
                None => {
                    violation.get_or_insert((w.encode(), s.encode()));
                }
            }
        }
        succ.push(list);
    }
    let up = up_sets(&webs, &succ);
    let mut transitive = true;
    let mut relations = 0;
    for a in 0..n {
        for b in 0..n {
            if a == b || !up[a].contains(b) {
                continue;
            }
            relations += 1;
            if up[b].contains(a) {
                antisymmetric = false;
                violation.get_or_insert((webs[a].encode(), webs[b].encode()));
            }
            if !up[b].is_subset(&up[a]) {
                transitive = false;
                violation.get_or_insert((webs[a].encode(), webs[b].encode()));
            }
        }
    }
    let hasse_edges = covers(&succ, &up).len();
    let maximal = (0..n).filter(|&i| (0..n).all(|j| j == i || !up[i].contains(j))).map(|i| webs[i].encode()).collect();
    PosetReport { elements: n, relations, hasse_edges, maximal, antisymmetric, transitive, violation }
}

/// Graphviz description of the Hasse diagram.
pub fn hasse_dot(webs: &[Web]) -> String {
    let webs: Vec<Web> = webs.iter().map(|w| w.canonical()).collect();
    let index: HashMap<&Web, usize> = webs.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let succ: Vec<Vec<usize>> =
        webs.iter().map(|w| successors(w).iter().filter_map(|s| index.get(s).copied()).collect()).collect();
    let up = up_sets(&webs, &succ);
    let mut out = String::from("digraph webs {\n  rankdir=BT;\n");
    for (i, w) in webs.iter().enumerate() {
        out.push_str(&format!("  w{i} [label=\"{}\"];\n", w.encode().replace('"', "'")));
    }
    for (i, j) in covers(&succ, &up) {
        out.push_str(&format!("  w{i} -> w{j};\n"));
    }
    out.push_str("}\n");
    out
}
