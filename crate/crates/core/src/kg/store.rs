use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::normalize;

/// ConceptNet relations after the usual merge into 17 types.
pub const CONCEPTNET_RELATIONS: [&str; 17] = [
    "antonym",
    "atlocation",
    "capableof",
    "causes",
    "createdby",
    "isa",
    "desires",
    "hassubevent",
    "partof",
    "hascontext",
    "hasproperty",
    "madeof",
    "notcapableof",
    "notdesires",
    "receivesaction",
    "relatedto",
    "usedfor",
];

pub const QLINK_NAME: &str = "qlink";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub u16);

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Relation vocabulary. Ids `0..len()` are KG relations in file order; the
/// question-node relation takes id `len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSet {
    names: Vec<String>,
}

impl Default for RelationSet {
    fn default() -> Self {
        RelationSet {
            names: CONCEPTNET_RELATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl RelationSet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref().trim().to_lowercase();
            if n.is_empty() || n == QLINK_NAME {
                return Err(Error::Schema(format!("invalid relation name `{n}`")));
            }
            if !seen.insert(n.clone()) {
                return Err(Error::Schema(format!("duplicate relation `{n}`")));
            }
            out.push(n);
        }
        if out.is_empty() {
            return Err(Error::Schema("relation set is empty".into()));
        }
        Ok(RelationSet { names: out })
    }

    /// One relation name per line; `#` comments and blank lines skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let names: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self::new(&names)
    }

    /// Number of KG relations (QLink excluded).
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// KG relations plus QLink.
    pub fn total(&self) -> usize {
        self.names.len() + 1
    }

    pub fn qlink(&self) -> RelationId {
        RelationId(self.names.len() as u16)
    }

    pub fn id(&self, name: &str) -> Option<RelationId> {
        let name = name.trim().to_lowercase();
        if name == QLINK_NAME {
            return Some(self.qlink());
        }
        self.names.iter().position(|n| *n == name).map(|i| RelationId(i as u16))
    }

    pub fn name(&self, id: RelationId) -> &str {
        if id == self.qlink() {
            QLINK_NAME
        } else {
            &self.names[id.index()]
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// Immutable triple store. Entity ids follow the lexicographic order of
/// surface forms, so ids do not depend on triple insertion order.
#[derive(Debug, Clone)]
pub struct KnowledgeStore {
    relations: RelationSet,
    surfaces: Vec<String>,
    index: HashMap<String, EntityId>,
    triples: Vec<Triple>,
    outgoing: BTreeMap<(EntityId, RelationId), Vec<EntityId>>,
    neighbors: Vec<Vec<EntityId>>,
    max_tokens: usize,
}

impl KnowledgeStore {
    pub fn empty(relations: RelationSet) -> Self {
        Self::from_triples(relations, std::iter::empty::<(&str, &str, &str)>()).expect("empty store")
    }

    /// Builds a store from `(head, relation, tail)` surface triples.
    /// Surfaces are normalized, duplicates and self-loops dropped.
    pub fn from_triples<I, S>(relations: RelationSet, triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: AsRef<str>,
    {
        let mut raw = Vec::new();
        for (h, r, t) in triples {
            let rel = relations
                .id(r.as_ref())
                .filter(|id| *id != relations.qlink())
                .ok_or_else(|| Error::Schema(format!("unknown relation `{}`", r.as_ref())))?;
            let (h, t) = (normalize::surface(h.as_ref()), normalize::surface(t.as_ref()));
            if h.is_empty() || t.is_empty() {
                return Err(Error::Schema("empty entity surface".into()));
            }
            raw.push((h, rel, t));
        }
        Self::build(relations, raw)
    }

    fn build(relations: RelationSet, raw: Vec<(String, RelationId, String)>) -> Result<Self> {
        let vocab: BTreeSet<&str> = raw.iter().flat_map(|(h, _, t)| [h.as_str(), t.as_str()]).collect();
        let surfaces: Vec<String> = vocab.into_iter().map(str::to_string).collect();
        let index: HashMap<String, EntityId> = surfaces.iter().enumerate().map(|(i, s)| (s.clone(), EntityId(i as u32))).collect();

        let mut set = BTreeSet::new();
        for (h, r, t) in &raw {
            let (h, t) = (index[h], index[t]);
            if h == t {
                log::debug!("dropping self-loop on entity {h}");
                continue;
            }
            set.insert(Triple {
                head: h,
                relation: *r,
                tail: t,
            });
        }
        let triples: Vec<Triple> = set.into_iter().collect();

        let mut outgoing: BTreeMap<(EntityId, RelationId), Vec<EntityId>> = BTreeMap::new();
        let mut neighbors = vec![Vec::new(); surfaces.len()];
        for t in &triples {
            outgoing.entry((t.head, t.relation)).or_default().push(t.tail);
            neighbors[t.head.0 as usize].push(t.tail);
            neighbors[t.tail.0 as usize].push(t.head);
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        let max_tokens = surfaces.iter().map(|s| s.split('_').count()).max().unwrap_or(0);
        Ok(KnowledgeStore {
            relations,
            surfaces,
            index,
            triples,
            outgoing,
            neighbors,
            max_tokens,
        })
    }

    pub fn relations(&self) -> &RelationSet {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.surfaces.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity(&self, surface: &str) -> Option<EntityId> {
        self.index.get(&normalize::surface(surface)).copied()
    }

    pub fn surface(&self, id: EntityId) -> &str {
        &self.surfaces[id.0 as usize]
    }

    /// Longest surface form measured in tokens.
    pub fn max_surface_tokens(&self) -> usize {
        self.max_tokens
    }

    /// Tails of `entity` under `relation`, sorted.
    pub fn out_neighbors(&self, entity: EntityId, relation: RelationId) -> &[EntityId] {
        self.outgoing.get(&(entity, relation)).map_or(&[], Vec::as_slice)
    }

    /// Neighbors over any relation in either direction, sorted and unique.
    pub fn neighbors(&self, entity: EntityId) -> &[EntityId] {
        &self.neighbors[entity.0 as usize]
    }

    /// All triples whose head is `entity`, ordered by relation then tail.
    pub fn triples_from(&self, entity: EntityId) -> impl Iterator<Item = Triple> + '_ {
        self.outgoing
            .range((entity, RelationId(0))..=(entity, RelationId(u16::MAX)))
            .flat_map(move |(&(h, r), tails)| {
                tails.iter().map(move |&t| Triple {
                    head: h,
                    relation: r,
                    tail: t,
                })
            })
    }
}

/// Loads a `head<TAB>relation<TAB>tail` file. `#` lines and blank lines are
/// skipped.
pub fn load_triples(path: &Path, relations: RelationSet) -> Result<KnowledgeStore> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: line_no,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let rel = relations
            .id(fields[1])
            .filter(|id| *id != relations.qlink())
            .ok_or_else(|| Error::Schema(format!("line {line_no}: unknown relation `{}`", fields[1])))?;
        let (h, t) = (normalize::surface(fields[0]), normalize::surface(fields[2]));
        if h.is_empty() || t.is_empty() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: line_no,
                msg: "empty entity surface".into(),
            });
        }
        raw.push((h, rel, t));
    }
    KnowledgeStore::build(relations, raw)
}

/// Writes triples back out in the loader's format, in store order.
pub fn write_triples(store: &KnowledgeStore, path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in store.triples() {
        out.push_str(store.surface(t.head));
        out.push('\t');
        out.push_str(store.relations().name(t.relation));
        out.push('\t');
        out.push_str(store.surface(t.tail));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
