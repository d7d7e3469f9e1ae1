//! Input formats, identifier interning and the triple containers shared by
//! every later stage.
//!
//! All text formats are UTF-8, one record per line, tab separated, without a
//! header (the word-vector file is the exception and carries a `count dim`
//! header line). Blank lines are skipped; every error reports the 1-based
//! line number of the offending record.

mod parse;
mod planted;

pub use parse::{
    load_word_vectors, merge_triple_sets, parse_demonyms, parse_kb, parse_sentences, parse_train,
    parse_triples,
};
pub use planted::{
    generate_planted_kb, generate_planted_relation, PlantedKb, PLANTED_DISTRACTOR_SCORE,
    PLANTED_PRIMARY_SCORE,
};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_LINEAGE: AtomicU64 = AtomicU64::new(1);

/// Dense index of an entity (heads and tails share one id space).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

/// Dense index of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// Interned entity and relation names. Ids are assigned densely in order of
/// first sight, so identical inputs always produce identical ids.
///
/// Each vocabulary carries a lineage tag shared with its clones; triple sets
/// record the tag so that sets from unrelated vocabularies are never merged.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    lineage: u64,
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities && self.relations == other.relations
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self {
            lineage: NEXT_LINEAGE.fetch_add(1, Ordering::Relaxed),
            entities: Vec::new(),
            entity_index: HashMap::new(),
            relations: Vec::new(),
            relation_index: HashMap::new(),
        }
    }

    /// Rebuild a vocabulary from ordered name lists (checkpoint loading).
    pub fn from_names(entities: Vec<String>, relations: Vec<String>) -> Result<Self> {
        let mut vocab = Self::new();
        for name in entities {
            let before = vocab.entities.len();
            vocab.intern_entity(&name);
            if vocab.entities.len() == before {
                return Err(Error::invalid(format!("duplicate entity name {name:?}")));
            }
        }
        for name in relations {
            let before = vocab.relations.len();
            vocab.intern_relation(&name);
            if vocab.relations.len() == before {
                return Err(Error::invalid(format!("duplicate relation name {name:?}")));
            }
        }
        Ok(vocab)
    }

    pub(crate) fn lineage(&self) -> u64 {
        self.lineage
    }

    pub fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(name) {
            return id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(name.to_owned());
        self.entity_index.insert(name.to_owned(), id);
        id
    }

    pub fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(name) {
            return id;
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(name.to_owned());
        self.relation_index.insert(name.to_owned(), id);
        id
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entities.get(id.index()).map(String::as_str)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relations.get(id.index()).map(String::as_str)
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }
}

/// Deduplicated set of triples, iterated in insertion order, with a
/// `(head, relation) -> tails` adjacency index.
#[derive(Debug, Clone)]
pub struct TripleSet {
    lineage: u64,
    triples: Vec<Triple>,
    members: HashSet<Triple>,
    adjacency: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    groups: Vec<(EntityId, RelationId)>,
}

impl PartialEq for TripleSet {
    fn eq(&self, other: &Self) -> bool {
        self.triples == other.triples
    }
}

impl TripleSet {
    pub fn new(vocab: &Vocabulary) -> Self {
        Self {
            lineage: vocab.lineage(),
            triples: Vec::new(),
            members: HashSet::new(),
            adjacency: HashMap::new(),
            groups: Vec::new(),
        }
    }

    pub fn belongs_to(&self, vocab: &Vocabulary) -> bool {
        self.lineage == vocab.lineage()
    }

    /// Returns `false` when the triple was already present.
    pub fn insert(&mut self, triple: Triple) -> bool {
        if !self.members.insert(triple) {
            return false;
        }
        self.triples.push(triple);
        let key = (triple.head, triple.relation);
        let tails = self.adjacency.entry(key).or_default();
        if tails.is_empty() {
            self.groups.push(key);
        }
        tails.push(triple.tail);
        true
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.members.contains(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> + '_ {
        self.triples.iter()
    }

    pub fn as_slice(&self) -> &[Triple] {
        &self.triples
    }

    /// Tails of `(head, relation)` in insertion order.
    pub fn tails(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.adjacency
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// `(head, relation)` groups in order of first appearance.
    pub fn groups(&self) -> impl Iterator<Item = (EntityId, RelationId, &[EntityId])> + '_ {
        self.groups
            .iter()
            .map(move |&(h, r)| (h, r, self.adjacency[&(h, r)].as_slice()))
    }

    /// Writes `head<TAB>tail` lines for every triple of `relation`.
    pub fn write_kb<W: Write>(
        &self,
        vocab: &Vocabulary,
        relation: RelationId,
        out: &mut W,
    ) -> Result<()> {
        for t in self.triples.iter().filter(|t| t.relation == relation) {
            writeln!(
                out,
                "{}\t{}",
                name_of(vocab, t.head)?,
                name_of(vocab, t.tail)?
            )?;
        }
        Ok(())
    }

    /// Writes `head<TAB>relation<TAB>tail` lines (the extra-triples format).
    pub fn write_triples<W: Write>(&self, vocab: &Vocabulary, out: &mut W) -> Result<()> {
        for t in &self.triples {
            let rel = vocab.relation_name(t.relation).ok_or(Error::InvalidId {
                kind: "relation",
                id: t.relation.index(),
                len: vocab.n_relations(),
            })?;
            writeln!(
                out,
                "{}\t{}\t{}",
                name_of(vocab, t.head)?,
                rel,
                name_of(vocab, t.tail)?
            )?;
        }
        Ok(())
    }
}

pub(crate) fn name_of(vocab: &Vocabulary, id: EntityId) -> Result<&str> {
    vocab.entity_name(id).ok_or(Error::InvalidId {
        kind: "entity",
        id: id.index(),
        len: vocab.n_entities(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub score: u8,
}

/// Scored triples in file order. Scores lie in `0..=7`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledTriples {
    pub records: Vec<LabeledTriple>,
}

impl LabeledTriples {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledTriple> + '_ {
        self.records.iter()
    }

    /// Checks that every labeled triple is a member of `kb`.
    pub fn validate_against(&self, kb: &TripleSet) -> Result<()> {
        match self.records.iter().find(|r| !kb.contains(&r.triple)) {
            Some(r) => Err(Error::invalid(format!(
                "labeled triple ({}, {}, {}) is not in the knowledge base",
                r.triple.head, r.triple.relation, r.triple.tail
            ))),
            None => Ok(()),
        }
    }
}

/// Token sequences per entity, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentenceCorpus {
    sentences: BTreeMap<EntityId, Vec<Vec<String>>>,
}

impl SentenceCorpus {
    pub fn push(&mut self, entity: EntityId, tokens: Vec<String>) {
        self.sentences.entry(entity).or_default().push(tokens);
    }

    pub fn sentences(&self, entity: EntityId) -> &[Vec<String>] {
        self.sentences
            .get(&entity)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn n_entities(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Normalized demonym token to country token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DemonymTable {
    map: HashMap<String, String>,
}

impl DemonymTable {
    /// Adds a pair; re-adding an identical pair is a no-op.
    pub fn insert(&mut self, country: &str, demonym: &str) -> Result<()> {
        let key = normalize_token(demonym);
        let value = country_token(country);
        match self.map.get(&key) {
            Some(existing) if *existing != value => Err(Error::DemonymConflict {
                demonym: key,
                first: existing.clone(),
                second: value,
            }),
            Some(_) => Ok(()),
            None => {
                self.map.insert(key, value);
                Ok(())
            }
        }
    }

    pub fn country_for(&self, demonym: &str) -> Option<&str> {
        self.map.get(&normalize_token(demonym)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Country names become single tokens: internal whitespace runs become `_`.
pub fn country_token(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join("_")
}

const EDGE_PUNCTUATION: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')', '[', ']'];

fn normalize_token(raw: &str) -> String {
    raw.trim_matches(EDGE_PUNCTUATION).to_lowercase()
}

/// Whitespace split, edge punctuation stripped, lowercased; empty tokens dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}
