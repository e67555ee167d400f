//! Raw interaction parsing, rating coarse-graining and probe splits.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, GraphStats, Link};

/// A column addressed by zero-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Schema("empty column reference".into()));
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Index(i) => write!(f, "{i}"),
            ColumnRef::Name(n) => f.write_str(n),
        }
    }
}

/// Layout of a delimited interaction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub user: ColumnRef,
    pub object: ColumnRef,
    /// Rating column; when set, every record must carry a parseable rating.
    pub rating: Option<ColumnRef>,
    /// Inclusive rating scale. Ratings outside it are record-level errors.
    pub rating_scale: Option<(f64, f64)>,
    /// Field separator. `"\t"`, `","`, `"::"` and `" "` are all accepted; a
    /// single space also collapses runs of whitespace.
    pub delimiter: String,
    pub has_header: bool,
}

impl Schema {
    /// Tab-separated `user item rating timestamp`, 1-5 stars (MovieLens `u.data`).
    pub fn movielens() -> Self {
        Schema {
            user: ColumnRef::Index(0),
            object: ColumnRef::Index(1),
            rating: Some(ColumnRef::Index(2)),
            rating_scale: Some((1.0, 5.0)),
            delimiter: "\t".into(),
            has_header: false,
        }
    }

    /// Two unary columns `user,object`.
    pub fn unary(delimiter: &str) -> Self {
        Schema {
            user: ColumnRef::Index(0),
            object: ColumnRef::Index(1),
            rating: None,
            rating_scale: None,
            delimiter: delimiter.into(),
            has_header: false,
        }
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        if self.delimiter == " " {
            line.split_whitespace().collect()
        } else {
            line.split(self.delimiter.as_str()).map(str::trim).collect()
        }
    }
}

/// Resolved positional schema.
struct Columns {
    user: usize,
    object: usize,
    rating: Option<usize>,
}

impl Columns {
    fn resolve(schema: &Schema, header: Option<&[&str]>) -> Result<Self> {
        let find = |c: &ColumnRef| -> Result<usize> {
            match (c, header) {
                (ColumnRef::Index(i), _) => Ok(*i),
                (ColumnRef::Name(n), Some(h)) => h
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| Error::Schema(format!("column '{n}' not found in header"))),
                (ColumnRef::Name(n), None) => Err(Error::Schema(format!(
                    "column '{n}' referenced by name but the input has no header"
                ))),
            }
        };
        let user = find(&schema.user)?;
        let object = find(&schema.object)?;
        if user == object {
            return Err(Error::Schema("user and object columns coincide".into()));
        }
        let rating = schema.rating.as_ref().map(find).transpose()?;
        if let Some(h) = header {
            let max = user.max(object).max(rating.unwrap_or(0));
            if max >= h.len() {
                return Err(Error::Schema(format!(
                    "column {max} beyond header width {}",
                    h.len()
                )));
            }
        }
        Ok(Columns {
            user,
            object,
            rating,
        })
    }
}

/// Bidirectional map between raw string ids and dense ids, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    raw: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(&id) = self.index.get(raw) {
            return id;
        }
        let id = self.raw.len() as u32;
        self.raw.push(raw.to_string());
        self.index.insert(raw.to_string(), id);
        id
    }

    pub fn get(&self, raw: &str) -> Option<u32> {
        self.index.get(raw).copied()
    }

    pub fn raw(&self, id: u32) -> Option<&str> {
        self.raw.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Keeps only ids with `keep[id]`, renumbering densely in the old order.
    /// Returns the new map and the old→new translation.
    fn compact(&self, keep: &[bool]) -> (IdMap, Vec<Option<u32>>) {
        let mut out = IdMap::new();
        let remap = self
            .raw
            .iter()
            .zip(keep)
            .map(|(r, &k)| k.then(|| out.intern(r)))
            .collect();
        (out, remap)
    }
}

/// One parsed record with dense ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: u32,
    pub object: u32,
    pub rating: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineErrorKind {
    MissingField,
    BadRating(String),
    RatingOutOfScale(String),
}

/// A skipped record and its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub kind: LineErrorKind,
}

#[derive(Debug, Clone, Default)]
pub struct Parsed {
    pub interactions: Vec<Interaction>,
    pub users: IdMap,
    pub objects: IdMap,
    pub errors: Vec<LineError>,
    pub lines_read: usize,
}

/// Parses a delimited interaction stream.
///
/// Blank lines and lines starting with `#` are ignored. Records that cannot
/// be used are skipped and reported in [`Parsed::errors`]; a schema that does
/// not match the input is a hard error.
pub fn parse_interactions<R: BufRead>(reader: R, schema: &Schema) -> Result<Parsed> {
    if schema.delimiter.is_empty() {
        return Err(Error::Schema("empty delimiter".into()));
    }
    let mut out = Parsed::default();
    let mut cols: Option<Columns> = None;
    if !schema.has_header {
        cols = Some(Columns::resolve(schema, None)?);
    }

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::Parse(format!("line {line_no}: {e}")))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = schema.split(trimmed);
        let c = match &cols {
            Some(c) => c,
            None => {
                cols = Some(Columns::resolve(schema, Some(&fields))?);
                continue;
            }
        };
        out.lines_read += 1;

        let (Some(user), Some(object)) = (fields.get(c.user), fields.get(c.object)) else {
            out.errors.push(LineError {
                line: line_no,
                kind: LineErrorKind::MissingField,
            });
            continue;
        };
        if user.is_empty() || object.is_empty() {
            out.errors.push(LineError {
                line: line_no,
                kind: LineErrorKind::MissingField,
            });
            continue;
        }
        let rating = match c.rating {
            None => None,
            Some(rc) => {
                let Some(raw) = fields.get(rc) else {
                    out.errors.push(LineError {
                        line: line_no,
                        kind: LineErrorKind::MissingField,
                    });
                    continue;
                };
                let value = match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        out.errors.push(LineError {
                            line: line_no,
                            kind: LineErrorKind::BadRating(raw.to_string()),
                        });
                        continue;
                    }
                };
                if let Some((lo, hi)) = schema.rating_scale {
                    if value < lo || value > hi {
                        out.errors.push(LineError {
                            line: line_no,
                            kind: LineErrorKind::RatingOutOfScale(raw.to_string()),
                        });
                        continue;
                    }
                }
                Some(value)
            }
        };
        let user = out.users.intern(user);
        let object = out.objects.intern(object);
        out.interactions.push(Interaction {
            user,
            object,
            rating,
        });
    }
    Ok(out)
}

/// Maps interactions to unary links: kept iff unrated or `rating >= threshold`.
pub fn coarse_grain(interactions: &[Interaction], threshold: Option<f64>) -> Vec<Link> {
    interactions
        .iter()
        .filter(|it| match (it.rating, threshold) {
            (Some(r), Some(t)) => r >= t,
            _ => true,
        })
        .map(|it| (it.user, it.object))
        .collect()
}

/// A coarse-grained graph together with the raw ids of its nodes.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: BipartiteGraph,
    pub users: IdMap,
    pub objects: IdMap,
}

impl Dataset {
    /// Coarse-grains `parsed` and builds the graph.
    ///
    /// With `drop_isolated`, users and objects left without any link are
    /// removed and the remaining ids renumbered in first-seen order.
    pub fn from_parsed(parsed: &Parsed, threshold: Option<f64>, drop_isolated: bool) -> Result<Self> {
        let links = coarse_grain(&parsed.interactions, threshold);
        if !drop_isolated {
            let graph = BipartiteGraph::build(&links, parsed.users.len(), parsed.objects.len())?;
            return Ok(Dataset {
                graph,
                users: parsed.users.clone(),
                objects: parsed.objects.clone(),
            });
        }
        let mut keep_u = vec![false; parsed.users.len()];
        let mut keep_o = vec![false; parsed.objects.len()];
        for &(u, o) in &links {
            keep_u[u as usize] = true;
            keep_o[o as usize] = true;
        }
        let (users, ru) = parsed.users.compact(&keep_u);
        let (objects, ro) = parsed.objects.compact(&keep_o);
        let links: Vec<Link> = links
            .iter()
            .map(|&(u, o)| (ru[u as usize].unwrap(), ro[o as usize].unwrap()))
            .collect();
        let graph = BipartiteGraph::build(&links, users.len(), objects.len())?;
        Ok(Dataset {
            graph,
            users,
            objects,
        })
    }

    pub fn load(path: &Path, schema: &Schema, threshold: Option<f64>) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let parsed = parse_interactions(BufReader::new(file), schema)?;
        Self::from_parsed(&parsed, threshold, true)
    }

    pub fn stats(&self) -> GraphStats {
        self.graph.stats()
    }
}

/// How probe links are drawn from the full graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SplitMethod {
    /// Exactly `round(fraction * E)` links, uniformly without replacement.
    Random { fraction: f64 },
    /// Each link to an object of degree `< threshold` independently with
    /// the given probability.
    LowDegree { threshold: usize, probability: f64 },
}

impl SplitMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SplitMethod::Random { fraction } => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "probe fraction must lie in (0, 1), got {fraction}"
                    )));
                }
            }
            SplitMethod::LowDegree {
                threshold,
                probability,
            } => {
                if threshold < 1 {
                    return Err(Error::InvalidParameter("degree threshold must be >= 1".into()));
                }
                if !(probability > 0.0 && probability <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "deletion probability must lie in (0, 1], got {probability}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for SplitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitMethod::Random { fraction } => write!(f, "random:{fraction}"),
            SplitMethod::LowDegree {
                threshold,
                probability,
            } => write!(f, "low-degree:{threshold}:{probability}"),
        }
    }
}

impl FromStr for SplitMethod {
    type Err = Error;

    /// `random:<q>` or `low-degree:<k>:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidParameter(format!("bad split spec '{s}'"));
        let m = match parts.as_slice() {
            ["random", q] => SplitMethod::Random {
                fraction: q.parse().map_err(|_| bad())?,
            },
            ["low-degree", k, p] => SplitMethod::LowDegree {
                threshold: k.parse().map_err(|_| bad())?,
                probability: p.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<SplitMethod> for String {
    fn from(m: SplitMethod) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for SplitMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A training graph and the links deleted from it.
#[derive(Debug, Clone)]
pub struct ProbeSplit {
    pub training: BipartiteGraph,
    probe: Vec<Link>,
    probe_offsets: Vec<usize>,
    pub method: SplitMethod,
    pub seed: u64,
}

impl ProbeSplit {
    /// Assembles a split from a training graph and probe links. The probe is
    /// sorted and deduplicated; links present in `training` are rejected.
    pub fn new(training: BipartiteGraph, mut probe: Vec<Link>, method: SplitMethod, seed: u64) -> Result<Self> {
        probe.sort_unstable();
        probe.dedup();
        for (index, &(u, o)) in probe.iter().enumerate() {
            if u as usize >= training.users() || o as usize >= training.objects() {
                return Err(Error::LinkOutOfRange {
                    index,
                    user: u,
                    object: o,
                    users: training.users(),
                    objects: training.objects(),
                });
            }
            if training.has_link(u as usize, o) {
                return Err(Error::InvalidParameter(format!(
                    "probe link ({u}, {o}) is also a training link"
                )));
            }
        }
        let mut probe_offsets = vec![0usize; training.users() + 1];
        for &(u, _) in &probe {
            probe_offsets[u as usize + 1] += 1;
        }
        for i in 0..training.users() {
            probe_offsets[i + 1] += probe_offsets[i];
        }
        Ok(ProbeSplit {
            training,
            probe,
            probe_offsets,
            method,
            seed,
        })
    }

    /// Deleted links in (user, object) order.
    pub fn probe(&self) -> &[Link] {
        &self.probe
    }

    /// Total probe size D.
    pub fn probe_len(&self) -> usize {
        self.probe.len()
    }

    /// Probe objects of `user`, ascending.
    pub fn probe_objects(&self, user: usize) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.probe[self.probe_offsets[user]..self.probe_offsets[user + 1]]
            .iter()
            .map(|&(_, o)| o)
    }

    /// D_i.
    pub fn probe_degree(&self, user: usize) -> usize {
        self.probe_offsets[user + 1] - self.probe_offsets[user]
    }

    /// Users with at least one deleted link, ascending.
    pub fn probe_users(&self) -> Vec<usize> {
        (0..self.training.users())
            .filter(|&i| self.probe_degree(i) > 0)
            .collect()
    }

    /// Probe users whose training profile became empty.
    pub fn isolated_probe_users(&self) -> Vec<u32> {
        (0..self.training.users())
            .filter(|&i| self.probe_degree(i) > 0 && self.training.user_degree(i) == 0)
            .map(|i| i as u32)
            .collect()
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            method: self.method,
            users: self.training.users(),
            objects: self.training.objects(),
            original_links: self.training.links() + self.probe.len(),
            training_links: self.training.links(),
            probe_links: self.probe.len(),
            probe_users: self.probe_users().len(),
            training_sha256: edge_list_sha256(self.training.edges()),
            probe_sha256: edge_list_sha256(self.probe.iter().copied()),
            isolated_probe_users: self.isolated_probe_users(),
        }
    }

    /// Writes `training.tsv`, `probe.tsv` and `split.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<SplitManifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_edge_list(&dir.join("training.tsv"), self.training.edges())?;
        write_edge_list(&dir.join("probe.tsv"), self.probe.iter().copied())?;
        let manifest = self.manifest();
        let path = dir.join("split.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Reproducibility record for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub method: SplitMethod,
    pub users: usize,
    pub objects: usize,
    pub original_links: usize,
    pub training_links: usize,
    pub probe_links: usize,
    pub probe_users: usize,
    pub training_sha256: String,
    pub probe_sha256: String,
    /// Users with deleted links but no remaining training links.
    pub isolated_probe_users: Vec<u32>,
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Moves exactly `round(fraction * E)` uniformly chosen links to the probe.
pub fn split_random(g: &BipartiteGraph, fraction: f64, seed: u64) -> Result<ProbeSplit> {
    let method = SplitMethod::Random { fraction };
    method.validate()?;
    let edges: Vec<Link> = g.edges().collect();
    let count = (fraction * edges.len() as f64).round() as usize;
    if count == 0 {
        return Err(Error::EmptyProbe(format!(
            "round({fraction} * {}) = 0",
            edges.len()
        )));
    }
    let mut rng = rng_for(seed);
    let mut chosen = vec![false; edges.len()];
    for i in index::sample(&mut rng, edges.len(), count) {
        chosen[i] = true;
    }
    partition(g, &edges, &chosen, method, seed)
}

/// Moves each link whose object has degree `< threshold` to the probe with
/// probability `probability`.
pub fn split_low_degree(g: &BipartiteGraph, threshold: usize, probability: f64, seed: u64) -> Result<ProbeSplit> {
    let method = SplitMethod::LowDegree {
        threshold,
        probability,
    };
    method.validate()?;
    let edges: Vec<Link> = g.edges().collect();
    let mut rng = rng_for(seed);
    let chosen: Vec<bool> = edges
        .iter()
        .map(|&(_, o)| g.object_degree(o as usize) < threshold && rng.gen::<f64>() < probability)
        .collect();
    if !chosen.iter().any(|&c| c) {
        return Err(Error::EmptyProbe(format!(
            "no link to an object of degree < {threshold} was selected"
        )));
    }
    partition(g, &edges, &chosen, method, seed)
}

pub fn split(g: &BipartiteGraph, method: &SplitMethod, seed: u64) -> Result<ProbeSplit> {
    match *method {
        SplitMethod::Random { fraction } => split_random(g, fraction, seed),
        SplitMethod::LowDegree {
            threshold,
            probability,
        } => split_low_degree(g, threshold, probability, seed),
    }
}

fn partition(g: &BipartiteGraph, edges: &[Link], chosen: &[bool], method: SplitMethod, seed: u64) -> Result<ProbeSplit> {
    let (mut training, mut probe) = (Vec::new(), Vec::new());
    for (&e, &c) in edges.iter().zip(chosen) {
        if c {
            probe.push(e);
        } else {
            training.push(e);
        }
    }
    let training = BipartiteGraph::from_canonical(training, g.users(), g.objects());
    ProbeSplit::new(training, probe, method, seed)
}

fn edge_list_text(edges: impl Iterator<Item = Link>) -> String {
    let mut s = String::new();
    for (u, o) in edges {
        s.push_str(&u.to_string());
        s.push('\t');
        s.push_str(&o.to_string());
        s.push('\n');
    }
    s
}

/// SHA-256 of the two-column text form of an edge list.
pub fn edge_list_sha256(edges: impl Iterator<Item = Link>) -> String {
    let digest = Sha256::digest(edge_list_text(edges).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `user<TAB>object` lines in the order given.
pub fn write_edge_list(path: &Path, edges: impl Iterator<Item = Link>) -> Result<()> {
    fs::write(path, edge_list_text(edges)).map_err(|e| Error::io(path, e))
}

pub fn read_edge_list(path: &Path) -> Result<Vec<Link>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            let mut it = l.split('\t');
            let mut next = || -> Result<u32> {
                it.next()
                    .and_then(|f| f.trim().parse().ok())
                    .ok_or_else(|| Error::Parse(format!("{}:{}: expected two integer columns", path.display(), n + 1)))
            };
            Ok((next()?, next()?))
        })
        .collect()
}

/// Writes `kind<TAB>dense<TAB>raw` lines for both id maps.
pub fn write_id_map(path: &Path, users: &IdMap, objects: &IdMap) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::new();
    for (kind, map) in [("user", users), ("object", objects)] {
        for (i, raw) in map.raw.iter().enumerate() {
            out.push_str(&format!("{kind}\t{i}\t{raw}\n"));
        }
    }
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_id_map(path: &Path) -> Result<(IdMap, IdMap)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut users, mut objects) = (IdMap::new(), IdMap::new());
    for (n, line) in text.lines().enumerate() {
        let mut it = line.splitn(3, '\t');
        let (Some(kind), Some(id), Some(raw)) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse(format!("{}:{}: malformed id map line", path.display(), n + 1)));
        };
        let map = match kind {
            "user" => &mut users,
            "object" => &mut objects,
            _ => return Err(Error::Parse(format!("{}:{}: unknown kind '{kind}'", path.display(), n + 1))),
        };
        if id.parse::<usize>().ok() != Some(map.len()) {
            return Err(Error::Parse(format!("{}:{}: ids must be dense and ascending", path.display(), n + 1)));
        }
        map.intern(raw);
    }
    Ok((users, objects))
}
