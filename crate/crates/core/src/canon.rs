//! Interned canonical codes for rooted labeled trees.

use std::collections::HashMap;

use crate::graph::{Digraph, VertexId};

#[derive(Clone, PartialEq, Eq, Hash)]
enum Key {
    Leaf(String),
    Inner(Vec<u32>),
}

/// Two subtrees receive the same code from one book iff they are isomorphic
/// by a leaf-respecting isomorphism.
#[derive(Default)]
pub struct CodeBook {
    ids: HashMap<Key, u32>,
    pairs: HashMap<(u32, u32), u32>,
    next: u32,
}

impl CodeBook {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, key: Key) -> u32 {
        let next = &mut self.next;
        *self.ids.entry(key).or_insert_with(|| {
            *next += 1;
            *next - 1
        })
    }

    /// Same as `inner(vec![a, b])` without allocating.
    pub fn pair(&mut self, a: u32, b: u32) -> u32 {
        let key = if a <= b { (a, b) } else { (b, a) };
        let next = &mut self.next;
        *self.pairs.entry(key).or_insert_with(|| {
            *next += 1;
            *next - 1
        })
    }

    pub fn leaf(&mut self, taxon: &str) -> u32 {
        if let Some(&c) = self.ids.get(&Key::Leaf(taxon.to_string())) {
            return c;
        }
        self.intern(Key::Leaf(taxon.to_string()))
    }

    /// Code of an inner vertex from its children's codes (order irrelevant).
    pub fn inner(&mut self, mut kids: Vec<u32>) -> u32 {
        if kids.len() == 2 {
            return self.pair(kids[0], kids[1]);
        }
        kids.sort_unstable();
        self.intern(Key::Inner(kids))
    }

    /// Code of the subtree of `g` below `root`. With `skip_unary`, vertices
    /// with a single child take the child's code, i.e. they are suppressed.
    pub fn tree_code(&mut self, g: &Digraph, root: &VertexId, skip_unary: bool) -> u32 {
        let mut code: HashMap<&VertexId, u32> = HashMap::new();
        let mut stack = vec![(root, false)];
        while let Some((v, expanded)) = stack.pop() {
            let kids = g.children(v);
            if !expanded && !kids.is_empty() {
                stack.push((v, true));
                stack.extend(kids.iter().map(|c| (c, false)));
                continue;
            }
            let c = if kids.is_empty() {
                self.leaf(g.label(v).unwrap_or(""))
            } else if skip_unary && kids.len() == 1 {
                code[kids.first().unwrap()]
            } else {
                let cs = kids.iter().map(|k| code[k]).collect();
                self.inner(cs)
            };
            code.insert(v, c);
        }
        code[root]
    }
}
