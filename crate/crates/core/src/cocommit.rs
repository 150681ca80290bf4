//! Identity co-commitments: Pedersen commitments to an identity string, linked
//! pairwise by equality proofs.
//!
//! A connected [`CoCommitGraph`] whose edges all verify shows that every node
//! commits to the same identity, without revealing which one.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand_core::CryptoRngCore;

use crate::group::{id_scalar, PrimeGroup};
use crate::pedersen::{self, Commitment, CommitmentKey, EqualityProof, PublicParams};
use crate::wire::{DecodeError, Reader, Writer};

pub use pedersen::CommitError;

pub fn coco_commit<G: PrimeGroup>(pp: &PublicParams<G>, id: &str, rng: &mut impl CryptoRngCore) -> (Commitment<G>, CommitmentKey<G>) {
    pedersen::commit(pp, &id_scalar::<G>(id), rng)
}

pub fn coco_verify<G: PrimeGroup>(pp: &PublicParams<G>, id: &str, c: &Commitment<G>, r: &CommitmentKey<G>) -> bool {
    pedersen::verify(pp, &id_scalar::<G>(id), c, r)
}

pub fn coco_prove<G: PrimeGroup>(
    pp: &PublicParams<G>,
    id: &str,
    c1: &Commitment<G>,
    r1: &CommitmentKey<G>,
    c2: &Commitment<G>,
    r2: &CommitmentKey<G>,
    rng: &mut impl CryptoRngCore,
) -> Result<EqualityProof<G>, CommitError> {
    pedersen::prove_eq(pp, &id_scalar::<G>(id), c1, r1, c2, r2, rng)
}

pub fn coco_verify_eq<G: PrimeGroup>(pp: &PublicParams<G>, c1: &Commitment<G>, c2: &Commitment<G>, proof: &EqualityProof<G>) -> bool {
    pedersen::verify_eq(pp, c1, c2, proof)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a node out of range")]
    OutOfRange(usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
}

/// Shape of a graph: node count and undirected edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GraphStructure {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GraphStructure {
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            nodes,
            edges: edges.into_iter().collect(),
        }
    }

    pub fn complete(n: usize) -> Self {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Edges normalized to `(min, max)`; fails unless the graph is simple.
    fn canonical_edges(&self) -> Result<Vec<(usize, usize)>, GraphError> {
        let mut seen = BTreeSet::new();
        self.edges
            .iter()
            .map(|&(a, b)| {
                if a >= self.nodes || b >= self.nodes {
                    return Err(GraphError::OutOfRange(a, b));
                }
                if a == b {
                    return Err(GraphError::SelfLoop(a));
                }
                let e = (a.min(b), a.max(b));
                if !seen.insert(e) {
                    return Err(GraphError::DuplicateEdge(e.0, e.1));
                }
                Ok(e)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode<G: PrimeGroup> {
    pub commitment: Commitment<G>,
    /// Present only for the party that created the node.
    pub key: Option<CommitmentKey<G>>,
}

/// Edge between nodes `i < j`; the proof is over `(c_i, c_j)` in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphEdge<G: PrimeGroup> {
    pub i: usize,
    pub j: usize,
    pub proof: EqualityProof<G>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoCommitGraph<G: PrimeGroup> {
    pub nodes: Vec<GraphNode<G>>,
    pub edges: Vec<GraphEdge<G>>,
}

impl<G: PrimeGroup> CoCommitGraph<G> {
    /// Copy with every commitment key removed.
    pub fn public(&self) -> Self {
        Self {
            nodes: self
                .nodes
                .iter()
                .map(|n| GraphNode {
                    commitment: n.commitment,
                    key: None,
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }

    /// `u32` node count, node encodings, `u32` edge count, then
    /// `(u32 i, u32 j, proof)` per edge. Keys are never serialized.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.nodes.len() as u32);
        for n in &self.nodes {
            w.raw(n.commitment.encode().as_ref());
        }
        w.u32(self.edges.len() as u32);
        for e in &self.edges {
            w.u32(e.i as u32).u32(e.j as u32).raw(&e.proof.to_bytes());
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let n = r.u32("node count")? as usize;
        let nodes = (0..n)
            .map(|_| {
                Ok(GraphNode {
                    commitment: Commitment(pedersen::read_element::<G>(&mut r, "node")?),
                    key: None,
                })
            })
            .collect::<Result<Vec<_>, DecodeError>>()?;
        let m = r.u32("edge count")? as usize;
        let edges = (0..m)
            .map(|_| {
                Ok(GraphEdge {
                    i: r.u32("edge i")? as usize,
                    j: r.u32("edge j")? as usize,
                    proof: EqualityProof::read(&mut r)?,
                })
            })
            .collect::<Result<Vec<_>, DecodeError>>()?;
        r.finish()?;
        Ok(Self { nodes, edges })
    }
}

/// One fresh commitment to `id` per node and one equality proof per edge.
pub fn fill_graph<G: PrimeGroup>(
    pp: &PublicParams<G>,
    structure: &GraphStructure,
    id: &str,
    rng: &mut impl CryptoRngCore,
) -> Result<CoCommitGraph<G>, GraphError> {
    let edges = structure.canonical_edges()?;
    let m = id_scalar::<G>(id);
    let opened: Vec<_> = (0..structure.nodes).map(|_| pedersen::commit(pp, &m, rng)).collect();
    let edges = edges
        .into_iter()
        .map(|(i, j)| {
            let (ci, ri) = &opened[i];
            let (cj, rj) = &opened[j];
            let proof = pedersen::prove_eq(pp, &m, ci, ri, cj, rj, rng).expect("nodes commit to the same id");
            GraphEdge { i, j, proof }
        })
        .collect();
    Ok(CoCommitGraph {
        nodes: opened
            .into_iter()
            .map(|(commitment, key)| GraphNode {
                commitment,
                key: Some(key),
            })
            .collect(),
        edges,
    })
}

/// True iff every edge is well-formed and its proof verifies.
pub fn verify_graph<G: PrimeGroup>(pp: &PublicParams<G>, graph: &CoCommitGraph<G>) -> bool {
    graph.edges.iter().all(|e| {
        e.i < e.j
            && e.j < graph.nodes.len()
            && pedersen::verify_eq(pp, &graph.nodes[e.i].commitment, &graph.nodes[e.j].commitment, &e.proof)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Ristretto, Toy1019, Toy1048571};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fill_and_verify<G: PrimeGroup>() {
        let pp = PublicParams::<G>::generate();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let empty = fill_graph(&pp, &GraphStructure::default(), "a@x", &mut rng).unwrap();
        assert!(empty.nodes.is_empty() && verify_graph(&pp, &empty));

        let one = fill_graph(&pp, &GraphStructure::new(2, [(1, 0)]), "a@x", &mut rng).unwrap();
        assert_eq!((one.nodes.len(), one.edges.len()), (2, 1));
        assert_eq!((one.edges[0].i, one.edges[0].j), (0, 1));
        assert!(verify_graph(&pp, &one));

        let k4 = fill_graph(&pp, &GraphStructure::complete(4), "a@x", &mut rng).unwrap();
        assert_eq!((k4.nodes.len(), k4.edges.len()), (4, 6));
        assert!(verify_graph(&pp, &k4));

        let isolated = fill_graph(&pp, &GraphStructure::new(3, []), "a@x", &mut rng).unwrap();
        assert!(verify_graph(&pp, &isolated));
    }

    #[test]
    fn fill_graph_verifies_on_both_backends() {
        fill_and_verify::<Ristretto>();
        fill_and_verify::<Toy1019>();
        fill_and_verify::<Toy1048571>();
    }

    #[test]
    fn structural_errors() {
        let pp = PublicParams::<Ristretto>::generate();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let bad = [
            (GraphStructure::new(2, [(0, 2)]), GraphError::OutOfRange(0, 2)),
            (GraphStructure::new(2, [(1, 1)]), GraphError::SelfLoop(1)),
            (GraphStructure::new(2, [(0, 1), (1, 0)]), GraphError::DuplicateEdge(0, 1)),
        ];
        for (s, err) in bad {
            assert_eq!(fill_graph(&pp, &s, "a", &mut rng).unwrap_err(), err);
        }
        let mut g = fill_graph(&pp, &GraphStructure::path(2), "a", &mut rng).unwrap();
        g.edges[0].j = 5;
        assert!(!verify_graph(&pp, &g));
    }

    #[test]
    fn adversarial_edge_rejected() {
        let pp = PublicParams::<Ristretto>::generate();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut g = fill_graph(&pp, &GraphStructure::path(3), "alice@x", &mut rng).unwrap();
        // Splice in a node committing to bob, with an edge proof borrowed from a
        // genuine bob-bob pair.
        let bob = fill_graph(&pp, &GraphStructure::path(2), "bob@x", &mut rng).unwrap();
        g.nodes[2] = bob.nodes[1].clone();
        g.edges[1].proof = bob.edges[0].proof;
        assert!(!verify_graph(&pp, &g));
    }

    #[test]
    fn coco_prove_rejects_distinct_ids() {
        let pp = PublicParams::<Ristretto>::generate();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (c1, r1) = coco_commit(&pp, "alice@x", &mut rng);
        let (c2, r2) = coco_commit(&pp, "bob@x", &mut rng);
        assert!(coco_prove(&pp, "alice@x", &c1, &r1, &c2, &r2, &mut rng).is_err());
        let (c3, r3) = coco_commit(&pp, "alice@x", &mut rng);
        assert_ne!(c1, c3);
        let p = coco_prove(&pp, "alice@x", &c1, &r1, &c3, &r3, &mut rng).unwrap();
        assert!(coco_verify_eq(&pp, &c1, &c3, &p));
    }

    #[test]
    fn empty_id_is_committable() {
        let pp = PublicParams::<Ristretto>::generate();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (c, r) = coco_commit(&pp, "", &mut rng);
        assert!(coco_verify(&pp, "", &c, &r));
        assert!(!coco_verify(&pp, "a", &c, &r));
    }

    #[test]
    fn serialization_drops_keys() {
        let pp = PublicParams::<Ristretto>::generate();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let g = fill_graph(&pp, &GraphStructure::complete(3), "a", &mut rng).unwrap();
        let bytes = g.to_bytes();
        assert_eq!(bytes.len(), 4 + 3 * 32 + 4 + 3 * (8 + 160));
        let back = CoCommitGraph::<Ristretto>::from_bytes(&bytes).unwrap();
        assert_eq!(back, g.public());
        assert!(verify_graph(&pp, &back));
    }
}
