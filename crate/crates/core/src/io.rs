//! Text formats: the line-based edge list, extension files and extended Newick.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::extension::TreeExtension;
use crate::graph::{Digraph, PhyloClass, Rewrite, VertexId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("no arcs")]
    NoArcs,
    #[error("unknown directive {0:?}")]
    UnknownDirective(String),
    #[error("{directive} expects {expected} argument(s), found {found}")]
    Arity { directive: &'static str, expected: usize, found: usize },
    #[error("duplicate network header")]
    DuplicateHeader,
    #[error("duplicate arc ({0}, {1})")]
    DuplicateArc(VertexId, VertexId),
    #[error("self-loop on {0}")]
    SelfLoop(VertexId),
    #[error("label on non-leaf {0}")]
    LabelOnNonLeaf(VertexId),
    #[error("labeled vertex {0} is not the head of any arc")]
    LabelOnUnknownVertex(VertexId),
    #[error("vertex {0} is labeled twice")]
    LabeledTwice(VertexId),
    #[error("taxon {0:?} is used twice")]
    DuplicateTaxon(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("invalid tree extension: {0}")]
    InvalidExtension(String),
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unexpected character {0:?}")]
    Unexpected(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("missing ';'")]
    MissingSemicolon,
    #[error("hybrid #{0} is defined with conflicting children")]
    HybridConflict(String),
    #[error("hybrid #{0} has neither children nor a label")]
    EmptyHybrid(String),
    #[error("result is not a network: {0}")]
    NotNetwork(String),
}

/// A parse error with an optional 1-based line/column position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub pos: Option<(usize, usize)>,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            Some((l, c)) => write!(f, "line {l}, column {c}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

fn at(line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { pos: Some((line, col)), kind }
}

/// A network or tree file: an optional name and the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeListDocument {
    pub name: Option<String>,
    pub graph: Digraph,
}

/// Whitespace-separated tokens of one line with their 1-based columns,
/// stopping at a `#` that starts a token.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            if ch == '#' {
                break;
            }
            start = Some(i);
        }
    }
    out.into_iter().map(|(s, t)| (line[..s].chars().count() + 1, t)).collect()
}

fn arity(directive: &'static str, toks: &[(usize, &str)], expected: usize, line: usize) -> Result<(), ParseError> {
    if toks.len() - 1 != expected {
        return Err(at(line, toks[0].0, ParseErrorKind::Arity { directive, expected, found: toks.len() - 1 }));
    }
    Ok(())
}

pub fn parse_edgelist(text: &str) -> Result<EdgeListDocument, ParseError> {
    let mut name = None;
    let mut g = Digraph::new();
    let mut labels: Vec<(usize, usize, VertexId, String)> = Vec::new();
    let mut heads: BTreeMap<VertexId, ()> = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let toks = tokens(raw);
        let Some(&(col, directive)) = toks.first() else { continue };
        match directive {
            "network" => {
                arity("network", &toks, 1, line)?;
                if name.is_some() {
                    return Err(at(line, col, ParseErrorKind::DuplicateHeader));
                }
                name = Some(toks[1].1.to_string());
            }
            "A" => {
                arity("A", &toks, 2, line)?;
                let (u, v) = (VertexId::new(toks[1].1), VertexId::new(toks[2].1));
                if u == v {
                    return Err(at(line, toks[1].0, ParseErrorKind::SelfLoop(u)));
                }
                if g.has_arc(&u, &v) {
                    return Err(at(line, col, ParseErrorKind::DuplicateArc(u, v)));
                }
                g.insert_arc(&u, &v);
                heads.insert(v, ());
            }
            "L" => {
                arity("L", &toks, 2, line)?;
                labels.push((line, toks[1].0, VertexId::new(toks[1].1), toks[2].1.to_string()));
            }
            other => return Err(at(line, col, ParseErrorKind::UnknownDirective(other.to_string()))),
        }
    }
    if g.arc_count() == 0 {
        return Err(ParseError { pos: None, kind: ParseErrorKind::NoArcs });
    }
    let mut seen: HashMap<String, ()> = HashMap::new();
    for (line, col, v, taxon) in labels {
        if !heads.contains_key(&v) {
            return Err(at(line, col, ParseErrorKind::LabelOnUnknownVertex(v)));
        }
        if g.out_degree(&v) > 0 {
            return Err(at(line, col, ParseErrorKind::LabelOnNonLeaf(v)));
        }
        if g.label(&v).is_some() {
            return Err(at(line, col, ParseErrorKind::LabeledTwice(v)));
        }
        if seen.insert(taxon.clone(), ()).is_some() {
            return Err(at(line, col, ParseErrorKind::DuplicateTaxon(taxon)));
        }
        g.set_label(v, taxon).expect("checked above");
    }
    Ok(EdgeListDocument { name, graph: g })
}

/// Canonical text: header, then arcs, then labels, each sorted.
pub fn serialize_edgelist(doc: &EdgeListDocument) -> String {
    let mut out = String::new();
    if let Some(n) = &doc.name {
        out.push_str(&format!("network {n}\n"));
    }
    for (u, v) in doc.graph.arcs() {
        out.push_str(&format!("A {u} {v}\n"));
    }
    for (v, t) in doc.graph.labels() {
        out.push_str(&format!("L {v} {t}\n"));
    }
    out
}

/// Parses `E parent child` lines over the ids of `host` and validates the
/// result as a tree extension.
pub fn parse_extension(text: &str, host: Arc<Digraph>) -> Result<TreeExtension, ParseError> {
    let mut g = Digraph::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let toks = tokens(raw);
        let Some(&(col, directive)) = toks.first() else { continue };
        if directive != "E" {
            return Err(at(line, col, ParseErrorKind::UnknownDirective(directive.to_string())));
        }
        arity("E", &toks, 2, line)?;
        for &(c, id) in &toks[1..] {
            let v = VertexId::new(id);
            if !host.contains_vertex(&v) {
                return Err(at(line, c, ParseErrorKind::UnknownVertex(v)));
            }
        }
        let (p, c) = (VertexId::new(toks[1].1), VertexId::new(toks[2].1));
        if p == c {
            return Err(at(line, toks[1].0, ParseErrorKind::SelfLoop(p)));
        }
        if g.has_arc(&p, &c) {
            return Err(at(line, col, ParseErrorKind::DuplicateArc(p, c)));
        }
        g.insert_arc(&p, &c);
    }
    // a single-vertex host has an arc-free extension
    if g.vertex_count() == 0 && host.vertex_count() == 1 {
        g.add_vertex(host.vertices().next().unwrap().clone());
    }
    TreeExtension::new(g, host)
        .map_err(|e| ParseError { pos: None, kind: ParseErrorKind::InvalidExtension(e.to_string()) })
}

pub fn serialize_extension(ext: &TreeExtension) -> String {
    ext.gamma().arcs().map(|(p, c)| format!("E {p} {c}\n")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    children: Vec<Node>,
    name: Option<String>,
    hybrid: Option<String>,
}

struct NewickParser<'a> {
    text: &'a str,
    chars: Vec<(usize, char)>,
    i: usize,
}

impl<'a> NewickParser<'a> {
    fn pos(&self) -> (usize, usize) {
        let byte = self.chars.get(self.i).map_or(self.text.len(), |c| c.0);
        let before = &self.text[..byte];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
        (line, col)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { pos: Some(self.pos()), kind }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).map(|c| c.1)
    }

    fn skip_blank(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => self.i += 1,
                Some('[') => {
                    while self.peek() != Some(']') {
                        if self.peek().is_none() {
                            return Err(self.err(ParseErrorKind::UnexpectedEnd));
                        }
                        self.i += 1;
                    }
                    self.i += 1;
                }
                _ => return Ok(()),
            }
        }
    }

    fn node(&mut self) -> Result<Node, ParseError> {
        self.skip_blank()?;
        let mut children = Vec::new();
        if self.peek() == Some('(') {
            self.i += 1;
            loop {
                children.push(self.node()?);
                self.skip_blank()?;
                match self.peek() {
                    Some(',') => self.i += 1,
                    Some(')') => {
                        self.i += 1;
                        break;
                    }
                    Some(';') | None => return Err(self.err(ParseErrorKind::Unbalanced)),
                    Some(c) => return Err(self.err(ParseErrorKind::Unexpected(c))),
                }
            }
        }
        self.skip_blank()?;
        let name = self.name()?;
        let mut hybrid = None;
        if self.peek() == Some('#') {
            self.i += 1;
            let start = self.i;
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
                self.i += 1;
            }
            if start == self.i {
                return Err(self.err(self.peek().map_or(ParseErrorKind::UnexpectedEnd, ParseErrorKind::Unexpected)));
            }
            hybrid = Some(self.chars[start..self.i].iter().map(|c| c.1).collect());
        }
        self.skip_blank()?;
        while self.peek() == Some(':') {
            self.i += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit() || ".eE+-".contains(c)) {
                self.i += 1;
            }
            self.skip_blank()?;
        }
        if children.is_empty() && name.is_none() && hybrid.is_none() {
            return Err(self.err(self.peek().map_or(ParseErrorKind::UnexpectedEnd, ParseErrorKind::Unexpected)));
        }
        Ok(Node { children, name, hybrid })
    }

    fn name(&mut self) -> Result<Option<String>, ParseError> {
        if self.peek() == Some('\'') {
            self.i += 1;
            let mut s = String::new();
            loop {
                match self.peek() {
                    None => return Err(self.err(ParseErrorKind::UnexpectedEnd)),
                    Some('\'') if self.chars.get(self.i + 1).map(|c| c.1) == Some('\'') => {
                        s.push('\'');
                        self.i += 2;
                    }
                    Some('\'') => {
                        self.i += 1;
                        return Ok(Some(s));
                    }
                    Some(c) => {
                        s.push(c);
                        self.i += 1;
                    }
                }
            }
        }
        let start = self.i;
        while self.peek().is_some_and(|c| !c.is_whitespace() && !"()[]':;,#".contains(c)) {
            self.i += 1;
        }
        Ok((start < self.i).then(|| self.chars[start..self.i].iter().map(|c| c.1).collect()))
    }
}

struct Builder {
    g: Digraph,
    next: usize,
    hybrid_id: HashMap<String, VertexId>,
    hybrid_def: HashMap<String, Vec<Node>>,
    hybrid_label: HashMap<String, String>,
    labels: Vec<(VertexId, String)>,
}

impl Builder {
    fn fresh(&mut self) -> VertexId {
        let id = VertexId::new(format!("n{}", self.next));
        self.next += 1;
        id
    }

    fn visit(&mut self, node: &Node) -> Result<VertexId, ParseErrorKind> {
        let id = match &node.hybrid {
            Some(tag) => {
                if let Some(id) = self.hybrid_id.get(tag) {
                    let id = id.clone();
                    if !node.children.is_empty() {
                        match self.hybrid_def.get(tag) {
                            Some(prev) if *prev == node.children => return Ok(id),
                            Some(_) => return Err(ParseErrorKind::HybridConflict(tag.clone())),
                            None => {
                                self.hybrid_def.insert(tag.clone(), node.children.clone());
                                self.expand(&id, &node.children)?;
                            }
                        }
                    }
                    return Ok(id);
                }
                let id = self.fresh();
                self.g.add_vertex(id.clone());
                self.hybrid_id.insert(tag.clone(), id.clone());
                if let Some(n) = &node.name {
                    self.hybrid_label.insert(tag.clone(), n.clone());
                }
                if !node.children.is_empty() {
                    self.hybrid_def.insert(tag.clone(), node.children.clone());
                }
                id
            }
            None => {
                let id = self.fresh();
                self.g.add_vertex(id.clone());
                if node.children.is_empty() {
                    self.labels.push((id.clone(), node.name.clone().unwrap_or_default()));
                }
                id
            }
        };
        self.expand(&id, &node.children)?;
        Ok(id)
    }

    fn expand(&mut self, id: &VertexId, kids: &[Node]) -> Result<(), ParseErrorKind> {
        for k in kids {
            let c = self.visit(k)?;
            if c == *id || self.g.has_arc(id, &c) {
                return Err(ParseErrorKind::NotNetwork(format!("repeated child {c} below {id}")));
            }
            self.g.insert_arc(id, &c);
        }
        Ok(())
    }
}

/// Parses one rooted extended Newick string. Vertices are named `n0, n1, ...`
/// in preorder; all occurrences of a hybrid tag `#X` denote one vertex; a
/// childless hybrid takes its label from its first occurrence and gets a new
/// leaf below it carrying that label. Branch lengths, comments and internal
/// names are discarded and unary tree vertices are suppressed.
pub fn parse_enewick(text: &str) -> Result<Digraph, ParseError> {
    let mut p = NewickParser { text, chars: text.char_indices().collect(), i: 0 };
    let root = p.node()?;
    p.skip_blank()?;
    match p.peek() {
        Some(';') => p.i += 1,
        Some(')') => return Err(p.err(ParseErrorKind::Unbalanced)),
        Some(c) => return Err(p.err(ParseErrorKind::Unexpected(c))),
        None => return Err(p.err(ParseErrorKind::MissingSemicolon)),
    }
    p.skip_blank()?;
    if let Some(c) = p.peek() {
        return Err(p.err(ParseErrorKind::Unexpected(c)));
    }
    let whole = |kind| ParseError { pos: None, kind };
    let mut b = Builder {
        g: Digraph::new(),
        next: 0,
        hybrid_id: HashMap::new(),
        hybrid_def: HashMap::new(),
        hybrid_label: HashMap::new(),
        labels: Vec::new(),
    };
    b.visit(&root).map_err(whole)?;
    let mut tags: Vec<(String, VertexId)> = b.hybrid_id.iter().map(|(t, v)| (t.clone(), v.clone())).collect();
    tags.sort_by_key(|(_, v)| v.as_str()[1..].parse::<usize>().unwrap_or(0));
    for (tag, v) in tags {
        if b.g.out_degree(&v) > 0 {
            continue;
        }
        let Some(label) = b.hybrid_label.get(&tag).cloned() else {
            return Err(whole(ParseErrorKind::EmptyHybrid(tag)));
        };
        let leaf = b.fresh();
        b.g.insert_arc(&v, &leaf);
        b.labels.push((leaf, label));
    }
    let mut g = b.g;
    for (v, label) in b.labels {
        if label.is_empty() {
            continue;
        }
        if g.vertex_of_taxon(&label).is_some() {
            return Err(whole(ParseErrorKind::DuplicateTaxon(label)));
        }
        g.set_label(v, label).expect("leaf");
    }
    let unary: Vec<VertexId> = g.vertices().filter(|v| g.in_degree(v) == 1 && g.out_degree(v) == 1).cloned().collect();
    for v in unary {
        if g.in_degree(&v) == 1 && g.out_degree(&v) == 1 {
            g.apply(&Rewrite::Suppress(v)).expect("degrees checked");
        }
    }
    match g.classify() {
        PhyloClass::Tree | PhyloClass::Network => Ok(g),
        PhyloClass::Invalid(r) => Err(whole(ParseErrorKind::NotNetwork(r.to_string()))),
        other => Err(whole(ParseErrorKind::NotNetwork(format!("{other:?}")))),
    }
}
