//! Triple store, entity linking and per-candidate subgraph extraction.

mod matching;
pub mod normalize;
mod store;
mod subgraph;

pub use matching::match_entities;
pub use store::{load_triples, write_triples, EntityId, KnowledgeStore, RelationId, RelationSet, Triple, CONCEPTNET_RELATIONS, QLINK_NAME};
pub use subgraph::{
    attach_question_node, extract_subgraph, EdgeRecord, ExtractOptions, GraphEdge, GraphNode, NodeRecord, NodeRole, RelationalGraph,
    Subgraph, SubgraphRecord,
};
