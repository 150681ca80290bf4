//! Merkle binary prefix trie over 256-bit keys.
//!
//! Each leaf sits at the shallowest depth where its key prefix is unique among
//! stored keys, so the shape (and therefore the root) depends only on the key
//! set, never on insertion order. Along a shared prefix, internal nodes have an
//! empty sibling.
//!
//! ```text
//! empty    = H(EMPTY_TAG)
//! leaf     = H(LEAF_TAG ‖ key ‖ value_hash)
//! internal = H(INTERNAL_TAG ‖ left ‖ right)
//! ```
//!
//! Nodes are reference-counted and updates copy only the touched path, so a
//! cloned [`Trie`] is an O(1) immutable snapshot.

use alloc::sync::Arc;
use alloc::vec::Vec;

use sha2::{Digest, Sha512};

use crate::wire::{DecodeError, Reader, Writer};

pub type KeyHash = [u8; 32];
pub type NodeHash = [u8; 64];

pub const EMPTY_TAG: &[u8] = b"speranza/trie/empty/v1";
pub const LEAF_TAG: &[u8] = b"speranza/trie/leaf/v1";
pub const INTERNAL_TAG: &[u8] = b"speranza/trie/internal/v1";

pub const MAX_DEPTH: usize = 256;

pub fn empty_hash() -> NodeHash {
    Sha512::digest(EMPTY_TAG).into()
}

pub fn leaf_hash(key: &KeyHash, value: &NodeHash) -> NodeHash {
    let mut h = Sha512::new();
    h.update(LEAF_TAG);
    h.update(key);
    h.update(value);
    h.finalize().into()
}

pub fn internal_hash(left: &NodeHash, right: &NodeHash) -> NodeHash {
    let mut h = Sha512::new();
    h.update(INTERNAL_TAG);
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// Bit `i` of `key`, most significant bit first.
#[inline]
pub fn bit(key: &KeyHash, i: usize) -> bool {
    key[i / 8] >> (7 - i % 8) & 1 == 1
}

fn common_prefix_bits(a: &KeyHash, b: &KeyHash) -> usize {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let diff = x ^ y;
        if diff != 0 {
            return i * 8 + diff.leading_zeros() as usize;
        }
    }
    MAX_DEPTH
}

#[derive(Debug)]
enum Node<V> {
    Empty,
    Leaf {
        key: KeyHash,
        value_hash: NodeHash,
        value: Arc<V>,
    },
    Internal {
        hash: NodeHash,
        left: Arc<Node<V>>,
        right: Arc<Node<V>>,
    },
}

impl<V> Node<V> {
    fn hash(&self) -> NodeHash {
        match self {
            Node::Empty => empty_hash(),
            Node::Leaf { key, value_hash, .. } => leaf_hash(key, value_hash),
            Node::Internal { hash, .. } => *hash,
        }
    }

    fn internal(left: Arc<Node<V>>, right: Arc<Node<V>>) -> Self {
        Node::Internal {
            hash: internal_hash(&left.hash(), &right.hash()),
            left,
            right,
        }
    }
}

/// Leaf reached at the end of a lookup path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Empty,
    Leaf { key: KeyHash, value_hash: NodeHash },
}

impl Terminal {
    pub fn hash(&self) -> NodeHash {
        match self {
            Terminal::Empty => empty_hash(),
            Terminal::Leaf { key, value_hash } => leaf_hash(key, value_hash),
        }
    }
}

/// Sibling hashes from the root down to the terminal node. The direction
/// at depth `i` is bit `i` of the queried key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupProof {
    pub terminal: Terminal,
    pub siblings: Vec<NodeHash>,
}

/// Outcome of checking a [`LookupProof`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Claim<'a> {
    Present(&'a NodeHash),
    Absent,
}

impl LookupProof {
    /// Recomputes the root for `key` under `claim`; `None` if the proof cannot
    /// support that claim.
    pub fn root_for(&self, key: &KeyHash, claim: Claim<'_>) -> Option<NodeHash> {
        let depth = self.siblings.len();
        if depth > MAX_DEPTH {
            return None;
        }
        match (claim, &self.terminal) {
            (Claim::Present(v), Terminal::Leaf { key: k, value_hash }) => {
                if k != key || v != value_hash {
                    return None;
                }
            }
            (Claim::Present(_), Terminal::Empty) => return None,
            (Claim::Absent, Terminal::Leaf { key: k, .. }) => {
                // A different key must sit where the path ends, on our prefix.
                if k == key || common_prefix_bits(k, key) < depth {
                    return None;
                }
            }
            (Claim::Absent, Terminal::Empty) => {}
        }
        let mut h = self.terminal.hash();
        for (i, sib) in self.siblings.iter().enumerate().rev() {
            h = if bit(key, i) {
                internal_hash(sib, &h)
            } else {
                internal_hash(&h, sib)
            };
        }
        Some(h)
    }

    pub fn verify(&self, root: &NodeHash, key: &KeyHash, claim: Claim<'_>) -> bool {
        self.root_for(key, claim).is_some_and(|r| &r == root)
    }

    /// `u8 terminal ‖ [key ‖ value_hash] ‖ u16 depth ‖ empty bitmap ‖
    /// non-empty siblings`. Bit `i` of the bitmap (MSB-first) marks sibling
    /// `i` as the empty-subtree hash, which is then omitted.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(self.encoded_len());
        self.write(&mut w);
        w.finish()
    }

    pub fn encoded_len(&self) -> usize {
        let t = match self.terminal {
            Terminal::Empty => 1,
            Terminal::Leaf { .. } => 1 + 32 + 64,
        };
        let empty = empty_hash();
        let kept = self.siblings.iter().filter(|s| **s != empty).count();
        t + 2 + self.siblings.len().div_ceil(8) + 64 * kept
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        match &self.terminal {
            Terminal::Empty => {
                w.u8(0);
            }
            Terminal::Leaf { key, value_hash } => {
                w.u8(1).raw(key).raw(value_hash);
            }
        }
        let empty = empty_hash();
        let mut bitmap = alloc::vec![0u8; self.siblings.len().div_ceil(8)];
        for (i, s) in self.siblings.iter().enumerate() {
            if *s == empty {
                bitmap[i / 8] |= 0x80 >> (i % 8);
            }
        }
        w.u16(self.siblings.len() as u16).raw(&bitmap);
        for s in self.siblings.iter().filter(|s| **s != empty) {
            w.raw(s);
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let p = Self::read(&mut r)?;
        r.finish()?;
        Ok(p)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let terminal = match r.u8("terminal")? {
            0 => Terminal::Empty,
            1 => Terminal::Leaf {
                key: r.array("leaf key")?,
                value_hash: r.array("leaf value")?,
            },
            _ => return Err(DecodeError::Invalid("terminal")),
        };
        let depth = r.u16("depth")? as usize;
        if depth > MAX_DEPTH {
            return Err(DecodeError::Invalid("depth"));
        }
        let bitmap = r.raw(depth.div_ceil(8), "empty bitmap")?;
        if !depth.is_multiple_of(8) && bitmap[depth / 8] & (0xff >> (depth % 8)) != 0 {
            return Err(DecodeError::Invalid("empty bitmap padding"));
        }
        let empty = empty_hash();
        let mut siblings = Vec::with_capacity(depth);
        for i in 0..depth {
            if bitmap[i / 8] & (0x80 >> (i % 8)) != 0 {
                siblings.push(empty);
            } else {
                let s: NodeHash = r.array("sibling")?;
                if s == empty {
                    return Err(DecodeError::Invalid("unmarked empty sibling"));
                }
                siblings.push(s);
            }
        }
        Ok(Self { terminal, siblings })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrieError {
    #[error("duplicate key")]
    DuplicateKey,
}

/// An authenticated map from [`KeyHash`] to `V`, where each value is
/// represented in the tree by a caller-supplied hash.
#[derive(Debug)]
pub struct Trie<V> {
    root: Arc<Node<V>>,
    len: usize,
}

impl<V> Clone for Trie<V> {
    fn clone(&self) -> Self {
        Self {
            root: Arc::clone(&self.root),
            len: self.len,
        }
    }
}

impl<V> Default for Trie<V> {
    fn default() -> Self {
        Self {
            root: Arc::new(Node::Empty),
            len: 0,
        }
    }
}

impl<V> Trie<V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bulk construction; `items` may be in any order.
    pub fn from_items(mut items: Vec<(KeyHash, NodeHash, V)>) -> Result<Self, TrieError> {
        items.sort_unstable_by_key(|a| a.0);
        if items.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(TrieError::DuplicateKey);
        }
        let len = items.len();
        let mut slots: Vec<Option<(KeyHash, NodeHash, V)>> = items.into_iter().map(Some).collect();
        let root = build(&mut slots, 0);
        Ok(Self { root, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn root_hash(&self) -> NodeHash {
        self.root.hash()
    }

    pub fn get(&self, key: &KeyHash) -> Option<&Arc<V>> {
        let mut node = &self.root;
        let mut depth = 0;
        loop {
            match node.as_ref() {
                Node::Empty => return None,
                Node::Leaf { key: k, value, .. } => return (k == key).then_some(value),
                Node::Internal { left, right, .. } => {
                    node = if bit(key, depth) { right } else { left };
                    depth += 1;
                }
            }
        }
    }

    /// Value (if present) together with its membership or absence proof.
    pub fn prove(&self, key: &KeyHash) -> (Option<&Arc<V>>, LookupProof) {
        let mut siblings = Vec::new();
        let mut node = &self.root;
        let mut depth = 0;
        loop {
            match node.as_ref() {
                Node::Empty => {
                    return (
                        None,
                        LookupProof {
                            terminal: Terminal::Empty,
                            siblings,
                        },
                    )
                }
                Node::Leaf { key: k, value_hash, value } => {
                    let terminal = Terminal::Leaf {
                        key: *k,
                        value_hash: *value_hash,
                    };
                    let found = (k == key).then_some(value);
                    return (found, LookupProof { terminal, siblings });
                }
                Node::Internal { left, right, .. } => {
                    let (next, sib) = if bit(key, depth) { (right, left) } else { (left, right) };
                    siblings.push(sib.hash());
                    node = next;
                    depth += 1;
                }
            }
        }
    }

    /// Inserts or replaces; returns the previous value.
    pub fn insert(&mut self, key: KeyHash, value_hash: NodeHash, value: V) -> Option<Arc<V>> {
        let (root, prev) = insert(&self.root, 0, key, value_hash, Arc::new(value));
        self.root = root;
        if prev.is_none() {
            self.len += 1;
        }
        prev
    }

    /// In key order.
    pub fn iter(&self) -> impl Iterator<Item = (&KeyHash, &NodeHash, &Arc<V>)> {
        let mut stack = alloc::vec![&self.root];
        core::iter::from_fn(move || {
            while let Some(n) = stack.pop() {
                match n.as_ref() {
                    Node::Empty => {}
                    Node::Leaf { key, value_hash, value } => return Some((key, value_hash, value)),
                    Node::Internal { left, right, .. } => {
                        stack.push(right);
                        stack.push(left);
                    }
                }
            }
            None
        })
    }
}

fn build<V>(items: &mut [Option<(KeyHash, NodeHash, V)>], depth: usize) -> Arc<Node<V>> {
    match items.len() {
        0 => Arc::new(Node::Empty),
        1 => {
            let (key, value_hash, value) = items[0].take().expect("each slot taken once");
            Arc::new(Node::Leaf {
                key,
                value_hash,
                value: Arc::new(value),
            })
        }
        _ => {
            let split = items.partition_point(|it| !bit(&it.as_ref().expect("untaken").0, depth));
            let (l, r) = items.split_at_mut(split);
            let left = build(l, depth + 1);
            let right = build(r, depth + 1);
            Arc::new(Node::internal(left, right))
        }
    }
}

fn insert<V>(node: &Arc<Node<V>>, depth: usize, key: KeyHash, value_hash: NodeHash, value: Arc<V>) -> (Arc<Node<V>>, Option<Arc<V>>) {
    match node.as_ref() {
        Node::Empty => (Arc::new(Node::Leaf { key, value_hash, value }), None),
        Node::Leaf { key: k, value: old, .. } if *k == key => (Arc::new(Node::Leaf { key, value_hash, value }), Some(Arc::clone(old))),
        Node::Leaf { key: k, .. } => {
            // Push both leaves down until their paths diverge.
            let split = common_prefix_bits(k, &key);
            let new_leaf = Arc::new(Node::Leaf { key, value_hash, value });
            let mut sub = if bit(&key, split) {
                Node::internal(Arc::clone(node), new_leaf)
            } else {
                Node::internal(new_leaf, Arc::clone(node))
            };
            for d in (depth..split).rev() {
                let child = Arc::new(sub);
                let empty = Arc::new(Node::Empty);
                sub = if bit(&key, d) {
                    Node::internal(empty, child)
                } else {
                    Node::internal(child, empty)
                };
            }
            (Arc::new(sub), None)
        }
        Node::Internal { left, right, .. } => {
            if bit(&key, depth) {
                let (r, prev) = insert(right, depth + 1, key, value_hash, value);
                (Arc::new(Node::internal(Arc::clone(left), r)), prev)
            } else {
                let (l, prev) = insert(left, depth + 1, key, value_hash, value);
                (Arc::new(Node::internal(l, Arc::clone(right))), prev)
            }
        }
    }
}
