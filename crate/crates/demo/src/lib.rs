//! Browser bindings for the tiling planner.
//!
//! Every export returns a JSON string so the page can stay plain JavaScript.

use serde_json::json;
use wasm_bindgen::prelude::*;

use vlprep_core::featuremap::build_layout;
use vlprep_core::geometry::{default_candidates, fit_to_canvas, plan_for};
use vlprep_core::{plan_batches, Conversation, EncoderProfile, ImageDim, ImageRef, Registry, Turn};

const PATCH_SIDE: u32 = 14;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Tiling plan, feature layout and the score of every candidate grid.
#[wasm_bindgen]
pub fn plan_image(width: u32, height: u32, tile_side: u32) -> Result<String, String> {
    let dim = ImageDim::new(width, height).map_err(err)?;
    let set = default_candidates().with_tile_side(tile_side).map_err(err)?;
    let profile = EncoderProfile::new(tile_side, PATCH_SIDE, 8).map_err(err)?;
    let tiling = plan_for(dim, &set).map_err(err)?;
    let layout = build_layout(&tiling, &profile).map_err(err)?;
    let candidates: Vec<_> = set
        .shapes()
        .iter()
        .map(|g| {
            let fit = fit_to_canvas(dim, g.canvas(tile_side));
            json!({
                "grid": g.to_string(),
                "effective": fit.effective_pixels,
                "wasted": fit.wasted_pixels,
                "selected": *g == tiling.grid,
            })
        })
        .collect();
    Ok(json!({
        "tiling": tiling,
        "layout": layout,
        "patch_side": PATCH_SIDE,
        "candidates": candidates,
    })
    .to_string())
}

/// Names of the built-in evaluation benchmarks.
#[wasm_bindgen]
pub fn benchmarks() -> String {
    let names: Vec<_> = Registry::builtin().rules().iter().map(|r| r.name.clone()).collect();
    json!(names).to_string()
}

#[wasm_bindgen]
pub fn apply_eval_prompt(benchmark: &str, question: &str) -> Result<String, String> {
    Registry::builtin().apply_eval_prompt(question, benchmark).map_err(err)
}

/// Batch sequence for a synthetic mixture of `visual` image records and `text` text-only records.
#[wasm_bindgen]
pub fn batch_preview(visual: u32, text: u32, batch_size: u32, seed: u32) -> Result<String, String> {
    let mixture: Vec<Conversation> = (0..visual + text)
        .map(|i| Conversation {
            id: i.to_string(),
            source: "demo".into(),
            image: (i < visual).then(|| ImageRef::new("demo.jpg", 1, 1)),
            turns: vec![Turn::human("q"), Turn::assistant("a")],
        })
        .collect();
    let plan = plan_batches(&mixture, batch_size as usize, u64::from(seed)).map_err(err)?;
    let batches: Vec<_> = plan
        .batches
        .iter()
        .map(|b| json!({ "modality": b.modality, "size": b.ids.len() }))
        .collect();
    Ok(json!(batches).to_string())
}
