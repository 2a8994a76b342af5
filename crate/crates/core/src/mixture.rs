//! Compiles raw dataset files into one shuffled instruction-tuning mixture.
//!
//! Every dataset entry in a [`MixtureManifest`] runs a kind-specific rule
//! chain (merge per image, multiple-choice augmentation, capping, chunking,
//! prompt injection, cleaning and truncation). Results are concatenated in
//! manifest order and shuffled once with a seeded generator.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conversation::{Conversation, ImageRef, Modality, Role, TokenCounter, Turn};
use crate::datastore::{parse_conversation, read_lines};
use crate::error::{Error, Result};
use crate::geometry::ImageDim;
use crate::prompts;

pub const DEFAULT_TOKEN_LIMIT: usize = 2048;

/// Default rounds per chunk: strictly fewer than ten.
pub const DEFAULT_CHUNK_ROUNDS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    /// Short-answer VQA: `{image, question, answer}` rows, merged per image.
    VqaShort,
    /// Multiple choice: `{image?, question, choices, answer_index}` rows.
    Mc,
    /// Captioning: `{image, caption}` rows.
    Caption,
    /// Grounding: `{image, bbox, phrase}` rows, grouped per image.
    Region,
    /// Already-conversational visual records.
    VisualChat,
    /// Text-only conversations; cleaned and truncated to the token limit.
    TextChat,
}

fn default_true() -> bool {
    true
}

fn default_token_limit() -> usize {
    DEFAULT_TOKEN_LIMIT
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub kind: DatasetKind,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_prompt: Option<String>,
    /// Uniform cap on the dataset's conversation count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// Region datasets: annotations kept per image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_image_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_max_rounds: Option<usize>,
    /// Multiple choice: emit one replica per choice.
    #[serde(default = "default_true")]
    pub augment: bool,
}

impl DatasetEntry {
    pub fn new(name: impl Into<String>, kind: DatasetKind, path: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            kind,
            path: path.into(),
            format_prompt: None,
            cap: None,
            per_image_cap: None,
            chunk_max_rounds: None,
            augment: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureManifest {
    pub seed: u64,
    #[serde(default = "default_token_limit")]
    pub token_limit: usize,
    pub datasets: Vec<DatasetEntry>,
    /// Directory that relative dataset paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl MixtureManifest {
    /// Checks cross-field invariants, returning `(location, message)`.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        if self.token_limit == 0 {
            return Err(("token_limit".into(), "must be positive".into()));
        }
        let mut seen = HashSet::new();
        for (i, d) in self.datasets.iter().enumerate() {
            let at = |field: &str| format!("datasets[{i}].{field}");
            if d.name.trim().is_empty() {
                return Err((at("name"), "must be non-empty".into()));
            }
            if !seen.insert(d.name.as_str()) {
                return Err((at("name"), format!("duplicate dataset name `{}`", d.name)));
            }
            for (field, value) in [
                ("cap", d.cap),
                ("per_image_cap", d.per_image_cap),
                ("chunk_max_rounds", d.chunk_max_rounds),
            ] {
                if value == Some(0) {
                    return Err((at(field), "must be positive".into()));
                }
            }
            match &d.format_prompt {
                Some(p) if p.trim().is_empty() => {
                    return Err((at("format_prompt"), "must be non-empty".into()))
                }
                Some(_) if d.kind == DatasetKind::Region => {
                    return Err((
                        at("format_prompt"),
                        "region datasets use the fixed describe/locate prompts".into(),
                    ))
                }
                _ => {}
            }
            if d.per_image_cap.is_some() && d.kind != DatasetKind::Region {
                return Err((at("per_image_cap"), "only applies to region datasets".into()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }
}

/// Stable child seed for a labelled random stream.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 8 bytes"))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Appends `prompt` to every human turn.
pub fn inject_format_prompt(mut conv: Conversation, prompt: &str) -> Result<Conversation> {
    if prompt.trim().is_empty() {
        return Err(Error::InvalidInput("format prompt must be non-empty".into()));
    }
    for turn in conv.turns.iter_mut().filter(|t| t.role == Role::Human) {
        turn.text = prompts::append(&turn.text, prompt);
    }
    Ok(conv)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaRecord {
    pub image: ImageRef,
    pub question: String,
    pub answer: String,
}

/// Groups QA pairs by image; one conversation per image in first-seen order.
pub fn merge_qa_per_image(source: &str, records: &[VqaRecord]) -> Vec<Conversation> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut out: Vec<Conversation> = Vec::new();
    for r in records {
        let k = *index.entry(r.image.reference.as_str()).or_insert_with(|| {
            out.push(Conversation {
                id: format!("{source}/{}", out.len()),
                source: source.to_string(),
                image: Some(r.image.clone()),
                turns: Vec::new(),
            });
            out.len() - 1
        });
        out[k].turns.push(Turn::human(r.question.clone()));
        out[k].turns.push(Turn::assistant(r.answer.clone()));
    }
    out
}

/// Structural cleaning for text conversations. `false` means reject.
pub fn filter_text_chat(conv: &Conversation) -> bool {
    conv.turns.len() >= 2
        && conv.turns.first().map(|t| t.role) == Some(Role::Human)
        && conv.turns.windows(2).all(|w| w[0].role != w[1].role)
        && conv.turns.iter().all(|t| !t.text.trim().is_empty())
}

/// Drops trailing (human, assistant) pairs until the conversation fits in
/// `limit` tokens. `None` when even the first pair is too long.
pub fn truncate(
    mut conv: Conversation,
    counter: &dyn TokenCounter,
    limit: usize,
) -> Option<Conversation> {
    let mut total = 0;
    let mut keep = 0;
    for pair in conv.turns.chunks(2) {
        let cost = counter.count_turns(pair);
        if total + cost > limit {
            break;
        }
        total += cost;
        keep += pair.len();
    }
    // An odd trailing human turn carries no answer.
    keep -= keep % 2;
    if keep == 0 {
        return None;
    }
    conv.turns.truncate(keep);
    Some(conv)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCQuestion {
    pub question: String,
    pub choices: Vec<String>,
    pub answer_index: usize,
}

impl MCQuestion {
    pub fn validate(&self) -> Result<()> {
        if self.choices.len() < 2 {
            return Err(Error::validation("choices", "need at least two choices"));
        }
        if self.choices.len() > 26 {
            return Err(Error::validation("choices", "at most 26 choices can be lettered"));
        }
        if self.answer_index >= self.choices.len() {
            return Err(Error::validation(
                "answer_index",
                format!("{} out of range for {} choices", self.answer_index, self.choices.len()),
            ));
        }
        Ok(())
    }
}

/// Identity shared by conversations derived from one raw record.
#[derive(Debug, Clone)]
pub struct Stem {
    pub id: String,
    pub source: String,
    pub image: Option<ImageRef>,
}

impl Stem {
    fn conversation(&self, id: String, turns: Vec<Turn>) -> Conversation {
        Conversation { id, source: self.source.clone(), image: self.image.clone(), turns }
    }
}

fn letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

/// One lettered multiple-choice conversation per choice. Replica `i` rotates
/// the choices left by `i`, so the correct letter moves with it.
pub fn augment_mc(q: &MCQuestion, prompt: &str, stem: &Stem) -> Result<Vec<Conversation>> {
    q.validate()?;
    let k = q.choices.len();
    Ok((0..k).map(|i| mc_replica(q, prompt, stem, i)).collect())
}

fn mc_replica(q: &MCQuestion, prompt: &str, stem: &Stem, rotation: usize) -> Conversation {
    let k = q.choices.len();
    let mut human = q.question.clone();
    for j in 0..k {
        human.push('\n');
        human.push(letter(j));
        human.push_str(". ");
        human.push_str(&q.choices[(j + rotation) % k]);
    }
    let answer = (q.answer_index + k - rotation) % k;
    stem.conversation(
        format!("{}/{rotation}", stem.id),
        vec![Turn::human(prompts::append(&human, prompt)), Turn::assistant(letter(answer).to_string())],
    )
}

/// Keeps `k` uniformly chosen items, preserving their relative order.
fn sample_ordered<T>(items: Vec<T>, k: usize, rng: &mut impl RngCore) -> Vec<T> {
    let n = items.len();
    if k >= n {
        return items;
    }
    let mut keep = vec![false; n];
    for i in rand::seq::index::sample(rng, n, k) {
        keep[i] = true;
    }
    items.into_iter().zip(keep).filter_map(|(x, k)| k.then_some(x)).collect()
}

/// Uniform sample without replacement of at most `cap` items, in input order.
pub fn cap_sample<T>(items: Vec<T>, cap: usize, seed: u64) -> Result<Vec<T>> {
    if cap == 0 {
        return Err(Error::InvalidInput("cap must be positive".into()));
    }
    Ok(sample_ordered(items, cap, &mut rng_for(seed)))
}

/// Splits a conversation into chunks of at most `max_rounds` QA pairs.
/// Chunk ids get a `#index` suffix; a conversation that fits is unchanged.
pub fn chunk_rounds(conv: Conversation, max_rounds: usize) -> Result<Vec<Conversation>> {
    if max_rounds == 0 {
        return Err(Error::InvalidInput("max_rounds must be at least 1".into()));
    }
    if conv.rounds() <= max_rounds {
        return Ok(vec![conv]);
    }
    Ok(conv
        .turns
        .chunks(2 * max_rounds)
        .enumerate()
        .map(|(i, turns)| Conversation {
            id: format!("{}#{i}", conv.id),
            source: conv.source.clone(),
            image: conv.image.clone(),
            turns: turns.to_vec(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAnnotation {
    pub image: ImageDim,
    /// `[x1, y1, x2, y2]` in pixels.
    pub bbox: [f64; 4],
    pub phrase: String,
}

impl RegionAnnotation {
    pub fn validate(&self) -> Result<()> {
        let [x1, y1, x2, y2] = self.bbox;
        let (w, h) = (self.image.width as f64, self.image.height as f64);
        let ok = x1 >= 0.0 && x1 < x2 && x2 <= w && y1 >= 0.0 && y1 < y2 && y2 <= h;
        if !ok {
            return Err(Error::validation(
                "bbox",
                format!("{:?} is degenerate or outside {}x{}", self.bbox, w, h),
            ));
        }
        if self.phrase.trim().is_empty() {
            return Err(Error::validation("phrase", "must be non-empty"));
        }
        Ok(())
    }

    /// `[x1, y1, x2, y2]` normalized to the image size, three decimals.
    pub fn normalized_bbox(&self) -> String {
        let [x1, y1, x2, y2] = self.bbox;
        let (w, h) = (self.image.width as f64, self.image.height as f64);
        format!("[{:.3}, {:.3}, {:.3}, {:.3}]", x1 / w, y1 / h, x2 / w, y2 / h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionDirection {
    /// Box in, short description out.
    RegionToText,
    /// Phrase in, box out.
    TextToBbox,
}

/// One grounding QA pair. The direction is a seeded coin flip unless given.
pub fn format_region(
    ann: &RegionAnnotation,
    direction: Option<RegionDirection>,
    seed: u64,
) -> Result<(RegionDirection, [Turn; 2])> {
    ann.validate()?;
    let direction = direction.unwrap_or_else(|| {
        if rng_for(seed).gen_bool(0.5) {
            RegionDirection::RegionToText
        } else {
            RegionDirection::TextToBbox
        }
    });
    let bbox = ann.normalized_bbox();
    let turns = match direction {
        RegionDirection::RegionToText => [
            Turn::human(prompts::append(&bbox, prompts::REGION_DESCRIBE)),
            Turn::assistant(ann.phrase.clone()),
        ],
        RegionDirection::TextToBbox => [
            Turn::human(prompts::append(&ann.phrase, prompts::REGION_LOCATE)),
            Turn::assistant(bbox),
        ],
    };
    Ok((direction, turns))
}

/// Uniform subsample of `round(ratio * n)` items in original order.
pub fn subsample<T>(items: Vec<T>, ratio: f64, seed: u64) -> Result<Vec<T>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidInput(format!("ratio {ratio} must be in (0, 1]")));
    }
    let k = (ratio * items.len() as f64).round() as usize;
    Ok(sample_ordered(items, k, &mut rng_for(seed)))
}

#[derive(Debug, Deserialize)]
struct McRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    image: Option<ImageRef>,
    question: String,
    choices: Vec<String>,
    answer_index: usize,
}

#[derive(Debug, Deserialize)]
struct CaptionRecord {
    image: ImageRef,
    caption: String,
}

#[derive(Debug, Deserialize)]
struct RegionRecord {
    image: ImageRef,
    bbox: [f64; 4],
    phrase: String,
}

/// Parses every line of a dataset file, attaching the line number to errors.
fn parse_lines<T>(
    path: &Path,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<Vec<(usize, T)>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            parse(&text)
                .map(|v| (line, v))
                .map_err(|message| Error::Record { path: path.to_path_buf(), line, message })
        })
        .collect()
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> std::result::Result<T, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn record_error(path: &Path, line: usize, e: Error) -> Error {
    Error::Record { path: path.to_path_buf(), line, message: e.to_string() }
}

fn compile_dataset(
    manifest: &MixtureManifest,
    entry: &DatasetEntry,
    counter: &dyn TokenCounter,
) -> Result<Vec<Conversation>> {
    let path = manifest.resolve(&entry.path);
    let name = entry.name.as_str();
    let seed = |label: &str| derive_seed(manifest.seed, &format!("{name}/{label}"));

    let mut convs = match entry.kind {
        DatasetKind::VqaShort => {
            let rows: Vec<VqaRecord> =
                parse_lines(&path, parse_json)?.into_iter().map(|(_, r)| r).collect();
            merge_qa_per_image(name, &rows)
        }
        DatasetKind::Mc => {
            let prompt = entry.format_prompt.as_deref().unwrap_or(prompts::OPTION_LETTER);
            let mut out = Vec::new();
            for (i, (line, r)) in parse_lines(&path, parse_json::<McRecord>)?.into_iter().enumerate() {
                let stem = Stem {
                    id: format!("{name}/{}", r.id.unwrap_or_else(|| i.to_string())),
                    source: name.to_string(),
                    image: r.image,
                };
                let q = MCQuestion { question: r.question, choices: r.choices, answer_index: r.answer_index };
                q.validate().map_err(|e| record_error(&path, line, e))?;
                if entry.augment {
                    out.extend(augment_mc(&q, prompt, &stem)?);
                } else {
                    out.push(mc_replica(&q, prompt, &stem, 0));
                }
            }
            out
        }
        DatasetKind::Caption => {
            let prompt = entry.format_prompt.as_deref().unwrap_or(prompts::CAPTION);
            parse_lines(&path, parse_json::<CaptionRecord>)?
                .into_iter()
                .enumerate()
                .map(|(i, (_, r))| Conversation {
                    id: format!("{name}/{i}"),
                    source: name.to_string(),
                    image: Some(r.image),
                    turns: vec![Turn::human(prompt), Turn::assistant(r.caption)],
                })
                .collect()
        }
        DatasetKind::Region => compile_regions(entry, &path, seed("regions"))?,
        DatasetKind::VisualChat => parse_lines(&path, parse_conversation)?
            .into_iter()
            .map(|(line, mut c)| {
                c.validate().map_err(|e| record_error(&path, line, e))?;
                if c.modality() != Modality::Visual {
                    return Err(record_error(&path, line, Error::validation("image", "visual_chat records need an image")));
                }
                c.id = format!("{name}/{}", c.id);
                c.source = name.to_string();
                Ok(c)
            })
            .collect::<Result<_>>()?,
        DatasetKind::TextChat => parse_lines(&path, parse_conversation)?
            .into_iter()
            .filter_map(|(_, mut c)| {
                if c.image.is_some() || !filter_text_chat(&c) {
                    return None;
                }
                c.id = format!("{name}/{}", c.id);
                c.source = name.to_string();
                truncate(c, counter, manifest.token_limit)
            })
            .collect(),
    };

    if let Some(max_rounds) = entry.chunk_max_rounds {
        let mut chunked = Vec::with_capacity(convs.len());
        for c in convs {
            chunked.extend(chunk_rounds(c, max_rounds)?);
        }
        convs = chunked;
    }
    if let Some(cap) = entry.cap {
        convs = cap_sample(convs, cap, seed("cap"))?;
    }
    if let (Some(prompt), DatasetKind::VqaShort | DatasetKind::VisualChat | DatasetKind::TextChat) =
        (&entry.format_prompt, entry.kind)
    {
        convs = convs.into_iter().map(|c| inject_format_prompt(c, prompt)).collect::<Result<_>>()?;
    }
    Ok(convs)
}

/// Groups annotations per image, keeps at most `per_image_cap` of them, and
/// turns each into one grounding round.
fn compile_regions(entry: &DatasetEntry, path: &Path, seed: u64) -> Result<Vec<Conversation>> {
    let name = entry.name.as_str();
    let mut groups: Vec<(ImageRef, Vec<(usize, RegionAnnotation)>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (line, r) in parse_lines(path, parse_json::<RegionRecord>)? {
        let dim = r.image.dim().map_err(|e| record_error(path, line, e))?;
        let ann = RegionAnnotation { image: dim, bbox: r.bbox, phrase: r.phrase };
        ann.validate().map_err(|e| record_error(path, line, e))?;
        let k = *index.entry(r.image.reference.clone()).or_insert_with(|| {
            groups.push((r.image.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push((line, ann));
    }

    let mut rng = rng_for(seed);
    let mut out = Vec::with_capacity(groups.len());
    for (k, (image, anns)) in groups.into_iter().enumerate() {
        let anns = match entry.per_image_cap {
            Some(cap) => sample_ordered(anns, cap, &mut rng),
            None => anns,
        };
        let mut turns = Vec::with_capacity(anns.len() * 2);
        for (line, ann) in &anns {
            let (_, pair) =
                format_region(ann, None, rng.next_u64()).map_err(|e| record_error(path, *line, e))?;
            turns.extend(pair);
        }
        out.push(Conversation {
            id: format!("{name}/{k}"),
            source: name.to_string(),
            image: Some(image),
            turns,
        });
    }
    Ok(out)
}

/// Runs every dataset's rule chain, concatenates in manifest order and
/// shuffles once.
pub fn compile(manifest: &MixtureManifest, counter: &dyn TokenCounter) -> Result<Vec<Conversation>> {
    compile_with_threads(manifest, counter, 0)
}

/// Like [`compile`] with an explicit worker count (`0` = default pool,
/// `1` = sequential). Output does not depend on the count.
pub fn compile_with_threads(
    manifest: &MixtureManifest,
    counter: &dyn TokenCounter,
    threads: usize,
) -> Result<Vec<Conversation>> {
    manifest
        .validate()
        .map_err(|(location, message)| Error::InvalidInput(format!("manifest `{location}`: {message}")))?;

    let run = |entry: &DatasetEntry| {
        compile_dataset(manifest, entry, counter)
            .map_err(|e| Error::Dataset { dataset: entry.name.clone(), source: Box::new(e) })
    };
    let parts: Vec<Result<Vec<Conversation>>> = run_datasets(&manifest.datasets, threads, run);

    let mut all = Vec::new();
    for part in parts {
        all.extend(part?);
    }
    let mut ids = HashSet::with_capacity(all.len());
    if let Some(dup) = all.iter().find(|c| !ids.insert(c.id.as_str())) {
        return Err(Error::Dataset {
            dataset: dup.source.clone(),
            source: Box::new(Error::validation("id", format!("duplicate id `{}`", dup.id))),
        });
    }
    all.shuffle(&mut rng_for(derive_seed(manifest.seed, "shuffle")));
    Ok(all)
}

#[cfg(feature = "parallel")]
fn run_datasets<F>(entries: &[DatasetEntry], threads: usize, run: F) -> Vec<Result<Vec<Conversation>>>
where
    F: Fn(&DatasetEntry) -> Result<Vec<Conversation>> + Sync,
{
    use rayon::prelude::*;
    if threads == 1 {
        return entries.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
    match pool {
        Ok(pool) => pool.install(|| entries.par_iter().map(&run).collect()),
        Err(_) => entries.iter().map(run).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_datasets<F>(entries: &[DatasetEntry], _threads: usize, run: F) -> Vec<Result<Vec<Conversation>>>
where
    F: Fn(&DatasetEntry) -> Result<Vec<Conversation>>,
{
    entries.iter().map(run).collect()
}

/// Token-length histogram bucket width.
pub const HISTOGRAM_BUCKET: usize = 128;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MixtureStats {
    pub total: usize,
    pub per_source: BTreeMap<String, usize>,
    pub visual: usize,
    pub text: usize,
    /// Bucket lower bound -> conversation count.
    pub token_histogram: BTreeMap<usize, usize>,
    pub max_tokens: usize,
}

pub fn stats(mixture: &[Conversation], counter: &dyn TokenCounter) -> MixtureStats {
    let mut s = MixtureStats::default();
    for c in mixture {
        s.total += 1;
        *s.per_source.entry(c.source.clone()).or_default() += 1;
        match c.modality() {
            Modality::Visual => s.visual += 1,
            Modality::Text => s.text += 1,
        }
        let tokens = counter.count_turns(&c.turns);
        *s.token_histogram.entry(tokens / HISTOGRAM_BUCKET * HISTOGRAM_BUCKET).or_default() += 1;
        s.max_tokens = s.max_tokens.max(tokens);
    }
    s
}

impl std::fmt::Display for MixtureStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "total: {}", self.total)?;
        writeln!(f, "visual: {}", self.visual)?;
        writeln!(f, "text: {}", self.text)?;
        writeln!(f, "max_tokens: {}", self.max_tokens)?;
        for (source, n) in &self.per_source {
            writeln!(f, "source {source}: {n}")?;
        }
        for (bucket, n) in &self.token_histogram {
            writeln!(f, "tokens [{bucket}, {}): {n}", bucket + HISTOGRAM_BUCKET)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::WhitespaceCounter;

    fn chat(pairs: &[(&str, &str)]) -> Conversation {
        Conversation {
            id: "c".into(),
            source: "s".into(),
            image: None,
            turns: pairs.iter().flat_map(|(h, a)| [Turn::human(*h), Turn::assistant(*a)]).collect(),
        }
    }

    fn words(n: usize) -> String {
        vec!["w"; n].join(" ")
    }

    #[test]
    fn inject_appends_to_human_turns_only() {
        let c = chat(&[("What is the color of the shirt that the man is wearing?", "Yellow")]);
        let out = inject_format_prompt(c, prompts::SHORT_ANSWER).unwrap();
        assert_eq!(
            out.turns[0].text,
            "What is the color of the shirt that the man is wearing?\nAnswer the question using a single word or phrase."
        );
        assert_eq!(out.turns[1].text, "Yellow");

        let c = chat(&[("a", "1"), ("b", "2"), ("c", "3")]);
        let out = inject_format_prompt(c.clone(), "P.").unwrap();
        let changed = out.turns.iter().zip(&c.turns).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 3);
        assert!(inject_format_prompt(c, " ").is_err());
    }

    #[test]
    fn merge_groups_by_image() {
        let img = |r: &str| ImageRef::new(r, 10, 10);
        let row = |r: &str, q: &str| VqaRecord { image: img(r), question: q.into(), answer: "x".into() };
        let out = merge_qa_per_image("v", &[row("a", "1"), row("a", "2"), row("a", "3")]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].turns.len(), 6);
        let out = merge_qa_per_image("v", &[row("b", "1"), row("a", "1"), row("b", "2"), row("a", "2")]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].image.as_ref().unwrap().reference, "b");
        assert_eq!(out[0].turns[2].text, "2");
        assert!(out.iter().all(|c| c.turns.len() == 4));
    }

    #[test]
    fn filter_rules() {
        assert!(filter_text_chat(&chat(&[("hi", "hello")])));
        let mut c = chat(&[("hi", "hello")]);
        c.turns.swap(0, 1);
        assert!(!filter_text_chat(&c));
        assert!(!filter_text_chat(&chat(&[("hi", "   ")])));
        let mut c = chat(&[("hi", "hello")]);
        c.turns.pop();
        assert!(!filter_text_chat(&c));
    }

    #[test]
    fn truncate_rules() {
        let counter = WhitespaceCounter;
        let short = chat(&[(&words(50), &words(50))]);
        assert_eq!(truncate(short.clone(), &counter, 2048), Some(short));

        let p = words(300);
        let five = chat(&[(&p, &p), (&p, &p), (&p, &p), (&p, &p), (&p, &p)]);
        let out = truncate(five, &counter, 2048).unwrap();
        assert_eq!(out.rounds(), 3);
        assert_eq!(counter.count_turns(&out.turns), 1800);

        let huge = chat(&[(&words(1500), &words(1500))]);
        assert_eq!(truncate(huge, &counter, 2048), None);
    }

    #[test]
    fn mc_rotation() {
        let stem = Stem { id: "q".into(), source: "mc".into(), image: None };
        let q = MCQuestion { question: "Which?".into(), choices: vec!["x".into(), "y".into()], answer_index: 0 };
        let out = augment_mc(&q, prompts::OPTION_LETTER, &stem).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].turns[1].text, "A");
        assert_eq!(out[1].turns[1].text, "B");
        assert_eq!(
            out[1].turns[0].text,
            "Which?\nA. y\nB. x\nAnswer with the option's letter from the given choices directly."
        );

        let four = MCQuestion {
            question: "?".into(),
            choices: ["a", "b", "c", "d"].map(String::from).to_vec(),
            answer_index: 2,
        };
        let out = augment_mc(&four, "P", &stem).unwrap();
        assert_eq!(out.len(), 4);
        let letters: Vec<_> = out.iter().map(|c| c.turns[1].text.clone()).collect();
        assert_eq!(letters, ["C", "B", "A", "D"]);
        // Each replica's lettered answer names the right choice text.
        for c in &out {
            let ans = &c.turns[1].text;
            assert!(c.turns[0].text.contains(&format!("{ans}. c")));
        }

        let one = MCQuestion { question: "?".into(), choices: vec!["a".into()], answer_index: 0 };
        assert!(augment_mc(&one, "P", &stem).is_err());
    }

    #[test]
    fn cap_sample_rules() {
        let items: Vec<u32> = (0..100).collect();
        assert_eq!(cap_sample(items.clone(), 200, 1).unwrap(), items);
        let big: Vec<u32> = (0..100_000).collect();
        let a = cap_sample(big.clone(), 80_000, 7).unwrap();
        assert_eq!(a.len(), 80_000);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cap_sample(big, 80_000, 7).unwrap(), a);
        assert!(cap_sample(items, 0, 1).is_err());
    }

    #[test]
    fn chunking() {
        let pairs: Vec<(String, String)> = (0..25).map(|i| (format!("q{i}"), format!("a{i}"))).collect();
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let out = chunk_rounds(chat(&refs), 9).unwrap();
        let sizes: Vec<_> = out.iter().map(Conversation::rounds).collect();
        assert_eq!(sizes, [9, 9, 7]);
        assert_eq!(out[2].id, "c#2");
        assert_eq!(out[1].turns[0].text, "q9");

        let nine = chat(&refs[..9]);
        assert_eq!(chunk_rounds(nine.clone(), 9).unwrap(), vec![nine]);
        let sizes: Vec<_> = chunk_rounds(chat(&refs[..10]), 9).unwrap().iter().map(Conversation::rounds).collect();
        assert_eq!(sizes, [9, 1]);
    }

    #[test]
    fn region_formatting() {
        let ann = RegionAnnotation {
            image: ImageDim { width: 1000, height: 500 },
            bbox: [100.0, 50.0, 300.0, 250.0],
            phrase: "a dog".into(),
        };
        assert_eq!(ann.normalized_bbox(), "[0.100, 0.100, 0.300, 0.500]");
        let full = RegionAnnotation { bbox: [0.0, 0.0, 1000.0, 500.0], ..ann.clone() };
        assert_eq!(full.normalized_bbox(), "[0.000, 0.000, 1.000, 1.000]");

        let (d, turns) = format_region(&ann, Some(RegionDirection::TextToBbox), 0).unwrap();
        assert_eq!(d, RegionDirection::TextToBbox);
        assert_eq!(turns[0].text, format!("a dog\n{}", prompts::REGION_LOCATE));
        assert_eq!(turns[1].text, "[0.100, 0.100, 0.300, 0.500]");
        let (_, turns) = format_region(&ann, Some(RegionDirection::RegionToText), 0).unwrap();
        assert_eq!(turns[0].text, format!("[0.100, 0.100, 0.300, 0.500]\n{}", prompts::REGION_DESCRIBE));

        for seed in 0..20 {
            assert_eq!(format_region(&ann, None, seed).unwrap(), format_region(&ann, None, seed).unwrap());
        }
        let dirs: HashSet<_> = (0..64).map(|s| format_region(&ann, None, s).unwrap().0).collect();
        assert_eq!(dirs.len(), 2);

        let bad = RegionAnnotation { bbox: [300.0, 50.0, 100.0, 250.0], ..ann };
        assert!(format_region(&bad, None, 0).is_err());
    }

    #[test]
    fn subsample_rules() {
        let items: Vec<u32> = (0..1000).collect();
        assert_eq!(subsample(items.clone(), 0.5, 3).unwrap().len(), 500);
        assert_eq!(subsample(items.clone(), 1.0, 3).unwrap(), items);
        assert!(subsample(items.clone(), 0.0, 3).is_err());
        assert!(subsample(items, 1.5, 3).is_err());
        let big = vec![(); 665_000];
        assert_eq!(subsample(big, 0.1, 9).unwrap().len(), 66_500);
    }

    #[test]
    fn stats_rules() {
        let empty = stats(&[], &WhitespaceCounter);
        assert_eq!(empty, MixtureStats::default());
        let mix = vec![chat(&[("a b", "c")]), chat(&[(&words(200), "x")])];
        let s = stats(&mix, &WhitespaceCounter);
        assert_eq!((s.total, s.visual, s.text, s.max_tokens), (2, 0, 2, 201));
        assert_eq!(s.token_histogram, BTreeMap::from([(0, 1), (128, 1)]));
    }

    #[test]
    fn derive_seed_is_stable() {
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
    }
}
