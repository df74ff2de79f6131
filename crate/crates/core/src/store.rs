//! Vocabularies, triples and knowledge-base splits.
//!
//! Triple files are three tab-separated columns (subject, relation, object)
//! holding names, one fact per line. Vocabulary files hold one name per
//! line, the line number being the id. A knowledge base saved to a directory
//! additionally carries a `manifest.json` naming its five files and counts.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the manifest written by [`KnowledgeBase::save`].
pub const MANIFEST_FILE: &str = "manifest.json";

/// An ordered list of distinct names with reverse lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NameTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl NameTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a table from names in id order. Duplicates are rejected.
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for name in names {
            let name = name.into();
            if table.index.contains_key(&name) {
                return Err(Error::Config(format!("duplicate vocabulary name {name:?}")));
            }
            table.intern(name);
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Returns the id of `name`, appending it if unseen.
    pub fn intern(&mut self, name: impl Into<String>) -> usize {
        let name = name.into();
        if let Some(&id) = self.index.get(&name) {
            return id;
        }
        let id = self.names.len();
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }
}

/// Entity and relation vocabularies with dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    pub entities: NameTable,
    pub relations: NameTable,
}

impl Vocab {
    pub fn new(entities: NameTable, relations: NameTable) -> Self {
        Self {
            entities,
            relations,
        }
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, name: &str) -> Result<usize> {
        self.entities.id(name).ok_or_else(|| Error::UnknownName {
            kind: "entity",
            token: name.to_string(),
        })
    }

    pub fn relation_id(&self, name: &str) -> Result<usize> {
        self.relations.id(name).ok_or_else(|| Error::UnknownName {
            kind: "relation",
            token: name.to_string(),
        })
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.check(t).is_ok()
    }

    /// Errors with the first id of `t` outside the vocabulary.
    pub fn check(&self, t: Triple) -> Result<()> {
        let (n, m) = (self.n_entities(), self.n_relations());
        for (kind, id, size) in [("entity", t.s, n), ("relation", t.r, m), ("entity", t.o, n)] {
            if id >= size {
                return Err(Error::IdOutOfRange { kind, id, size });
            }
        }
        Ok(())
    }
}

/// A (subject, relation, object) fact in dense ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub s: usize,
    pub r: usize,
    pub o: usize,
}

impl Triple {
    pub const fn new(s: usize, r: usize, o: usize) -> Self {
        Self { s, r, o }
    }
}

/// How [`load_triples`] treats names missing from the vocabulary.
#[derive(Debug)]
pub enum VocabMode<'a> {
    /// Unseen names extend the vocabulary.
    Build(&'a mut Vocab),
    /// Unseen names are an error.
    Fixed(&'a Vocab),
}

/// Triples read from one file, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadedTriples {
    pub triples: Vec<Triple>,
    pub duplicates: usize,
}

/// Reads a tab-separated triple file.
pub fn load_triples(path: impl AsRef<Path>, mode: VocabMode<'_>) -> Result<LoadedTriples> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_triples(BufReader::new(file), path, mode)
}

/// Same as [`load_triples`] over any reader; `origin` labels parse errors.
pub fn read_triples<R: BufRead>(
    reader: R,
    origin: &Path,
    mut mode: VocabMode<'_>,
) -> Result<LoadedTriples> {
    let mut seen = std::collections::HashSet::new();
    let mut out = LoadedTriples::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let (s, r, o) = (fields[0], fields[1], fields[2]);
        let triple = match &mut mode {
            VocabMode::Build(vocab) => Triple::new(
                vocab.entities.intern(s),
                vocab.relations.intern(r),
                vocab.entities.intern(o),
            ),
            VocabMode::Fixed(vocab) => Triple::new(
                vocab.entity_id(s)?,
                vocab.relation_id(r)?,
                vocab.entity_id(o)?,
            ),
        };
        if seen.insert(triple) {
            out.triples.push(triple);
        } else {
            out.duplicates += 1;
        }
    }
    Ok(out)
}

/// Writes triples as names, one per line.
pub fn save_triples(path: impl AsRef<Path>, vocab: &Vocab, triples: &[Triple]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    fn name<'a>(table: &'a NameTable, id: usize, kind: &'static str) -> Result<&'a str> {
        table.name(id).ok_or(Error::IdOutOfRange {
            kind,
            id,
            size: table.len(),
        })
    }
    for t in triples {
        writeln!(
            w,
            "{}\t{}\t{}",
            name(&vocab.entities, t.s, "entity")?,
            name(&vocab.relations, t.r, "relation")?,
            name(&vocab.entities, t.o, "entity")?
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_names(path: impl AsRef<Path>, table: &NameTable) -> Result<()> {
    let path = path.as_ref();
    let mut body = String::new();
    for name in table.names() {
        body.push_str(name);
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn load_names(path: impl AsRef<Path>) -> Result<NameTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let names = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    NameTable::from_names(names).map_err(|e| match e {
        Error::Config(msg) => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: msg,
        },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// JSON manifest describing a saved knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbManifest {
    pub entities: String,
    pub relations: String,
    pub train: String,
    pub valid: String,
    pub test: String,
    pub n: usize,
    pub m: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
}

/// Vocabulary plus train/valid/test splits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub vocab: Vocab,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    /// Duplicate lines dropped while loading, per split.
    pub duplicates: [usize; 3],
}

impl KnowledgeBase {
    /// Validates ids against the vocabulary and drops duplicates within each split.
    pub fn new(vocab: Vocab, train: Vec<Triple>, valid: Vec<Triple>, test: Vec<Triple>) -> Result<Self> {
        let mut duplicates = [0; 3];
        let mut splits = [train, valid, test];
        for (split, dups) in splits.iter_mut().zip(duplicates.iter_mut()) {
            let mut seen = std::collections::HashSet::with_capacity(split.len());
            for t in split.iter() {
                vocab.check(*t)?;
            }
            let before = split.len();
            split.retain(|t| seen.insert(*t));
            *dups = before - split.len();
        }
        let [train, valid, test] = splits;
        Ok(Self {
            vocab,
            train,
            valid,
            test,
            duplicates,
        })
    }

    /// Loads three split files, assigning ids in first-appearance order over
    /// train, then valid, then test.
    pub fn load_splits(train: &Path, valid: &Path, test: &Path) -> Result<Self> {
        let mut vocab = Vocab::default();
        let tr = load_triples(train, VocabMode::Build(&mut vocab))?;
        let va = load_triples(valid, VocabMode::Build(&mut vocab))?;
        let te = load_triples(test, VocabMode::Build(&mut vocab))?;
        Ok(Self {
            vocab,
            train: tr.triples,
            valid: va.triples,
            test: te.triples,
            duplicates: [tr.duplicates, va.duplicates, te.duplicates],
        })
    }

    /// Loads a directory. With a manifest the stored vocabulary fixes the ids;
    /// otherwise the directory must contain one `*train*`, `*valid*` (or
    /// `*dev*`) and `*test*` file with a `.txt` or `.tsv` extension.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.exists() {
            let train = find_split_file(dir, &["train"])?;
            let valid = find_split_file(dir, &["valid", "dev"])?;
            let test = find_split_file(dir, &["test"])?;
            return Self::load_splits(&train, &valid, &test);
        }
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: KbManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: manifest_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let vocab = Vocab::new(
            load_names(dir.join(&manifest.entities))?,
            load_names(dir.join(&manifest.relations))?,
        );
        let load = |file: &str| load_triples(dir.join(file), VocabMode::Fixed(&vocab));
        let (tr, va, te) = (load(&manifest.train)?, load(&manifest.valid)?, load(&manifest.test)?);
        let kb = Self {
            train: tr.triples,
            valid: va.triples,
            test: te.triples,
            duplicates: [tr.duplicates, va.duplicates, te.duplicates],
            vocab,
        };
        if kb.manifest() != manifest {
            return Err(Error::Parse {
                path: manifest_path,
                line: 0,
                message: "counts in manifest do not match the files".into(),
            });
        }
        Ok(kb)
    }

    pub fn manifest(&self) -> KbManifest {
        KbManifest {
            entities: "entities.txt".into(),
            relations: "relations.txt".into(),
            train: "train.tsv".into(),
            valid: "valid.tsv".into(),
            test: "test.tsv".into(),
            n: self.vocab.n_entities(),
            m: self.vocab.n_relations(),
            n_train: self.train.len(),
            n_valid: self.valid.len(),
            n_test: self.test.len(),
        }
    }

    /// Writes vocabularies, splits and manifest into `dir`, creating it.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = self.manifest();
        save_names(dir.join(&manifest.entities), &self.vocab.entities)?;
        save_names(dir.join(&manifest.relations), &self.vocab.relations)?;
        save_triples(dir.join(&manifest.train), &self.vocab, &self.train)?;
        save_triples(dir.join(&manifest.valid), &self.vocab, &self.valid)?;
        save_triples(dir.join(&manifest.test), &self.vocab, &self.test)?;
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

fn find_split_file(dir: &Path, keys: &[&str]) -> Result<PathBuf> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut hits = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let ext_ok = name.ends_with(".txt") || name.ends_with(".tsv");
        if ext_ok && keys.iter().any(|k| name.contains(k)) {
            hits.push(path);
        }
    }
    hits.sort();
    match hits.len() {
        1 => Ok(hits.pop().unwrap()),
        0 => Err(Error::io(
            dir.join(format!("*{}*", keys[0])),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no split file found"),
        )),
        _ => Err(Error::Config(format!(
            "ambiguous {} split in {}: {:?}",
            keys[0],
            dir.display(),
            hits
        ))),
    }
}
