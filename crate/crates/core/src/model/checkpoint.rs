//! Binary snapshots of the full sampler state.
//!
//! Layout: 8-byte magic, little-endian `u32` format version, then a bincode
//! payload. Dishes are written in sorted order so equal states produce equal
//! bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AmbiguityClass, EmissionMode, Hyper, Lexicon, Model, ModelError, Structure};
use crate::corpus::{Corpus, Tag, Tagset};
use crate::pyp::{DishTables, Franchise, Restaurant};

const MAGIC: &[u8; 8] = b"LEXHMMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Snapshot {
    num_tags: u32,
    mode: EmissionMode,
    hyper: Hyper,
    corpus_fingerprint: u64,
    tags: Vec<Vec<Tag>>,
    classes: Vec<AmbiguityClass>,
    restaurants: Vec<(u32, Vec<(u32, DishTables)>)>,
    class_restaurant: Vec<(AmbiguityClass, DishTables)>,
}

/// Sampler state after `iteration` completed sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: u64,
    pub seed: u64,
    /// Caller-defined description of the sampler settings; resuming under
    /// different settings is refused by comparing this string.
    pub config: String,
    snapshot: Snapshot,
}

fn owned<D: Copy>(dishes: Vec<(D, &DishTables)>) -> Vec<(D, DishTables)> {
    dishes.into_iter().map(|(d, t)| (d, t.clone())).collect()
}

impl Checkpoint {
    pub fn capture(model: &Model, corpus: &Corpus, iteration: u64, seed: u64, config: String) -> Self {
        let restaurants = model
            .franchise()
            .restaurants()
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(i, r)| (i as u32, owned(r.sorted_dishes())))
            .collect();
        let lex = model.lexicon();
        Checkpoint {
            iteration,
            seed,
            config,
            snapshot: Snapshot {
                num_tags: model.tagset().size() as u32,
                mode: model.mode(),
                hyper: *model.hyper(),
                corpus_fingerprint: corpus.fingerprint(),
                tags: model.tags().to_vec(),
                classes: lex.classes().to_vec(),
                restaurants,
                class_restaurant: owned(lex.restaurant().sorted_dishes()),
            },
        }
    }

    pub fn num_tags(&self) -> usize {
        self.snapshot.num_tags as usize
    }

    pub fn mode(&self) -> EmissionMode {
        self.snapshot.mode
    }

    pub fn hyper(&self) -> &Hyper {
        &self.snapshot.hyper
    }

    /// Rebuilds the model, verifying that it belongs to `corpus` and that
    /// every count is consistent.
    pub fn restore(&self, corpus: &Corpus) -> Result<Model, ModelError> {
        let s = &self.snapshot;
        if s.corpus_fingerprint != corpus.fingerprint() {
            return Err(ModelError::Checkpoint("checkpoint was written for a different corpus".into()));
        }
        let num_tags = s.num_tags as usize;
        if num_tags == 0 || num_tags > AmbiguityClass::MAX_TAGS {
            return Err(ModelError::Corrupt(format!("tagset size {num_tags}")));
        }
        if s.classes.len() != corpus.num_types() {
            return Err(ModelError::Corrupt("class table does not match the corpus".into()));
        }
        let structure = Structure::new(Tagset::new(num_tags), s.mode, s.hyper, corpus);
        let mut restaurants: Vec<Restaurant<u32>> = vec![Restaurant::new(); structure.num_restaurants()];
        for (id, dishes) in &s.restaurants {
            let slot = restaurants
                .get_mut(*id as usize)
                .ok_or_else(|| ModelError::Corrupt(format!("restaurant {id} out of range")))?;
            *slot = Restaurant::from_parts(dishes.clone()).map_err(ModelError::Corrupt)?;
        }
        let crp = Restaurant::from_parts(s.class_restaurant.clone()).map_err(ModelError::Corrupt)?;
        let lexicon = Lexicon::from_parts(
            s.classes.clone(),
            Franchise::from_restaurants(vec![crp]),
            num_tags,
            s.hyper.class,
            s.hyper.p_geom,
        )?;
        let model = Model::from_parts(structure, Franchise::from_restaurants(restaurants), lexicon, s.tags.clone());
        model.check_invariants(corpus).map_err(ModelError::Corrupt)?;
        Ok(model)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), ModelError> {
        out.write_all(MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        bincode::serialize_into(&mut out, self).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, ModelError> {
        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|_| ModelError::Checkpoint("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(ModelError::Checkpoint("not a checkpoint file".into()));
        }
        let mut version = [0u8; 4];
        input
            .read_exact(&mut version)
            .map_err(|_| ModelError::Checkpoint("truncated header".into()))?;
        let version = u32::from_le_bytes(version);
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        bincode::deserialize_from(input).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }

    /// Writes to a temporary sibling and renames, so an interrupted save
    /// leaves the previous checkpoint intact.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let tmp = path.with_extension("tmp");
        {
            let file = fs::File::create(&tmp)?;
            self.write_to(std::io::BufWriter::new(file))?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let file = fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
