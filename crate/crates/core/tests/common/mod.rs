//! Synthetic dataset fixtures shaped like the 665K instruction mixture.
#![allow(dead_code)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

/// Post-rule conversation counts per dataset. Each rounds to the published
/// per-dataset size in thousands, and together they sum to exactly 665,000.
pub const MIXTURE_COUNTS: [(&str, usize); 10] = [
    ("llava", 158_400),
    ("sharegpt", 40_400),
    ("vqav2", 83_200),
    ("gqa", 72_000),
    ("okvqa", 9_000),
    ("ocrvqa", 80_000),
    ("aokvqa", 66_000),
    ("textcaps", 22_000),
    ("refcoco", 48_000),
    ("vg", 86_000),
];

/// Published sizes in thousands, for the rounding check.
pub const MIXTURE_K: [(&str, usize); 10] = [
    ("llava", 158),
    ("sharegpt", 40),
    ("vqav2", 83),
    ("gqa", 72),
    ("okvqa", 9),
    ("ocrvqa", 80),
    ("aokvqa", 66),
    ("textcaps", 22),
    ("refcoco", 48),
    ("vg", 86),
];

const SHORT: &str = "Answer the question using a single word or phrase.";

fn writer(dir: &Path, name: &str) -> BufWriter<File> {
    BufWriter::new(File::create(dir.join(name)).unwrap())
}

fn line(w: &mut impl Write, v: serde_json::Value) {
    serde_json::to_writer(&mut *w, &v).unwrap();
    w.write_all(b"\n").unwrap();
}

fn image(prefix: &str, i: usize) -> serde_json::Value {
    json!({"ref": format!("{prefix}/{i:07}.jpg"), "width": 320 + (i % 7) * 97, "height": 240 + (i % 5) * 131})
}

fn words(n: usize, salt: usize) -> String {
    (0..n).map(|k| format!("w{}", (k + salt) % 97)).collect::<Vec<_>>().join(" ")
}

fn vqa(dir: &Path, file: &str, prefix: &str, images: usize, qas: impl Fn(usize) -> usize) {
    let mut w = writer(dir, file);
    let max = (0..images).map(&qas).max().unwrap_or(0);
    // Round-robin over images so QAs of one image are not contiguous.
    for q in 0..max {
        for i in (0..images).filter(|&i| qas(i) > q) {
            line(&mut w, json!({"image": image(prefix, i), "question": format!("Q{q} about {i}?"), "answer": format!("a{q}")}));
        }
    }
}

/// Writes all ten fixture files plus `manifest.toml` into `dir`.
pub fn write_mixture(dir: &Path, seed: u64) -> PathBuf {
    // Visual conversations, 1-3 rounds each.
    let mut w = writer(dir, "llava.jsonl");
    for i in 0..158_400 {
        let turns: Vec<_> = (0..1 + i % 3)
            .flat_map(|r| {
                [
                    json!({"role": "human", "text": format!("Describe part {r} of image {i}.")}),
                    json!({"role": "assistant", "text": words(20 + r * 5, i)}),
                ]
            })
            .collect();
        line(&mut w, json!({"id": format!("{i}"), "source": "llava", "modality": "visual", "image": image("coco", i), "turns": turns}));
    }
    drop(w);

    // Text conversations: 40,400 survive; some need truncation, some are
    // invalid, some cannot fit even one round.
    let mut w = writer(dir, "sharegpt.jsonl");
    for i in 0..40_400 {
        let (pairs, len) = if i % 50 == 0 { (5, 300) } else { (1 + i % 4, 40) };
        let turns: Vec<_> = (0..pairs)
            .flat_map(|_| {
                [json!({"from": "human", "value": words(len, i)}), json!({"from": "gpt", "value": words(len, i + 1)})]
            })
            .collect();
        line(&mut w, json!({"id": format!("sg{i}"), "source": "sharegpt", "modality": "text", "turns": turns}));
    }
    for i in 0..600 {
        let turns = if i % 2 == 0 {
            json!([{"role": "assistant", "text": "hi"}, {"role": "human", "text": "hello"}])
        } else {
            json!([{"role": "human", "text": "hi"}, {"role": "assistant", "text": "   "}])
        };
        line(&mut w, json!({"id": format!("bad{i}"), "source": "sharegpt", "modality": "text", "turns": turns}));
    }
    for i in 0..100 {
        let turns = json!([{"role": "human", "text": words(1500, i)}, {"role": "assistant", "text": words(1500, i)}]);
        line(&mut w, json!({"id": format!("long{i}"), "source": "sharegpt", "modality": "text", "turns": turns}));
    }
    drop(w);

    vqa(dir, "vqav2.jsonl", "vqav2", 83_200, |i| 1 + i % 3);
    vqa(dir, "gqa.jsonl", "gqa", 72_000, |_| 2);
    vqa(dir, "okvqa.jsonl", "okvqa", 9_000, |_| 1);
    vqa(dir, "ocrvqa.jsonl", "ocrvqa", 100_000, |i| 1 + i % 2);

    let mut w = writer(dir, "aokvqa.jsonl");
    for i in 0..16_500 {
        let choices: Vec<String> = (0..4).map(|c| format!("choice {c} of {i}")).collect();
        line(&mut w, json!({"image": image("aok", i), "question": format!("Which fits {i}?"), "choices": choices, "answer_index": i % 4}));
    }
    drop(w);

    let mut w = writer(dir, "textcaps.jsonl");
    for i in 0..22_000 {
        line(&mut w, json!({"image": image("tc", i), "caption": format!("A sign reading {i}.")}));
    }
    drop(w);

    let region = |w: &mut BufWriter<File>, prefix: &str, i: usize, k: usize| {
        let img = image(prefix, i);
        let (iw, ih) = (img["width"].as_u64().unwrap() as f64, img["height"].as_u64().unwrap() as f64);
        let x1 = (k % 5) as f64 * iw / 10.0;
        let y1 = (k % 3) as f64 * ih / 10.0;
        line(w, json!({"image": img, "bbox": [x1, y1, x1 + iw / 4.0, y1 + ih / 3.0], "phrase": format!("object {k} in {i}")}));
    };
    let mut w = writer(dir, "refcoco.jsonl");
    for i in 0..24_000 {
        for k in 0..12 {
            region(&mut w, "refcoco", i, k);
        }
    }
    drop(w);
    let mut w = writer(dir, "vg.jsonl");
    for i in 0..86_000 {
        for k in 0..1 + i % 14 {
            region(&mut w, "vg", i, k);
        }
    }
    drop(w);

    let manifest = format!(
        r#"seed = {seed}
token_limit = 2048

[[datasets]]
name = "llava"
kind = "visual_chat"
path = "llava.jsonl"

[[datasets]]
name = "sharegpt"
kind = "text_chat"
path = "sharegpt.jsonl"

[[datasets]]
name = "vqav2"
kind = "vqa_short"
path = "vqav2.jsonl"
format_prompt = "{SHORT}"

[[datasets]]
name = "gqa"
kind = "vqa_short"
path = "gqa.jsonl"
format_prompt = "{SHORT}"

[[datasets]]
name = "okvqa"
kind = "vqa_short"
path = "okvqa.jsonl"
format_prompt = "{SHORT}"

[[datasets]]
name = "ocrvqa"
kind = "vqa_short"
path = "ocrvqa.jsonl"
format_prompt = "{SHORT}"
cap = 80000

[[datasets]]
name = "aokvqa"
kind = "mc"
path = "aokvqa.jsonl"
format_prompt = "Answer with the option's letter from the given choices directly."
augment = true

[[datasets]]
name = "textcaps"
kind = "caption"
path = "textcaps.jsonl"
format_prompt = "Provide a one-sentence caption for the provided image."

[[datasets]]
name = "refcoco"
kind = "region"
path = "refcoco.jsonl"
chunk_max_rounds = 9

[[datasets]]
name = "vg"
kind = "region"
path = "vg.jsonl"
per_image_cap = 10
"#
    );
    let path = dir.join("manifest.toml");
    std::fs::write(&path, manifest).unwrap();
    path
}
