//! Feature-space layout of a tiled image.
//!
//! Each tile is encoded to a `pps x pps` grid of feature vectors (pps =
//! patches per side). Tile grids are merged into one large map, rows and
//! columns that only cover padding are discarded, and the remainder is
//! flattened after the global-context features with a row-end marker closing
//! every kept row.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    global_context_spec, plan_for, CandidateSet, GridShape, ImageDim, Rect, TilingPlan,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderProfile {
    pub tile_side: u32,
    pub patch_side: u32,
    pub feature_dim: usize,
}

impl Default for EncoderProfile {
    /// ViT-L/14 at 224 px: 16 patches per side. The stub emits 8 features.
    fn default() -> Self {
        Self { tile_side: 224, patch_side: 14, feature_dim: 8 }
    }
}

impl EncoderProfile {
    pub fn new(tile_side: u32, patch_side: u32, feature_dim: usize) -> Result<Self> {
        if tile_side == 0 || patch_side == 0 || !tile_side.is_multiple_of(patch_side) {
            return Err(Error::InvalidInput(format!(
                "tile side {tile_side} must be a positive multiple of patch side {patch_side}"
            )));
        }
        if feature_dim < 4 {
            return Err(Error::InvalidInput("feature_dim must be at least 4".into()));
        }
        Ok(Self { tile_side, patch_side, feature_dim })
    }

    pub fn patches_per_side(&self) -> u32 {
        self.tile_side / self.patch_side
    }
}

/// Row-major grid of feature vectors, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub rows: u32,
    pub cols: u32,
    pub dim: usize,
    values: Vec<f32>,
}

impl FeatureGrid {
    pub fn from_values(rows: u32, cols: u32, dim: usize, values: Vec<f32>) -> Result<Self> {
        let expected = rows as usize * cols as usize * dim;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols}x{dim} grid needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { rows, cols, dim, values })
    }

    pub fn filled(rows: u32, cols: u32, dim: usize, value: f32) -> Self {
        Self { rows, cols, dim, values: vec![value; rows as usize * cols as usize * dim] }
    }

    pub fn cell(&self, row: u32, col: u32) -> &[f32] {
        let start = (row as usize * self.cols as usize + col as usize) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn cell_mut(&mut self, row: u32, col: u32) -> &mut [f32] {
        let start = (row as usize * self.cols as usize + col as usize) * self.dim;
        &mut self.values[start..start + self.dim]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Single-channel image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self { width, height, pixels: vec![value; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f32) -> Self {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y));
        Self { width, height, pixels: pixels.collect() }
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn crop(&self, rect: Rect) -> GrayImage {
        GrayImage::from_fn(rect.width, rect.height, |x, y| self.get(rect.x + x, rect.y + y))
    }
}

/// Hook for pixel resampling. Only the geometry matters to this crate; real
/// pipelines plug in a proper interpolating resizer.
pub trait Resampler {
    fn resize(&self, src: &GrayImage, width: u32, height: u32) -> GrayImage;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NearestResampler;

impl Resampler for NearestResampler {
    fn resize(&self, src: &GrayImage, width: u32, height: u32) -> GrayImage {
        GrayImage::from_fn(width, height, |x, y| {
            let sx = (x as u64 * src.width as u64 / width as u64) as u32;
            let sy = (y as u64 * src.height as u64 / height as u64) as u32;
            src.get(sx.min(src.width - 1), sy.min(src.height - 1))
        })
    }
}

/// Resizes `image` into the plan's content box and pads the rest with `pad`.
pub fn render_canvas(
    image: &GrayImage,
    plan: &TilingPlan,
    resampler: &dyn Resampler,
    pad: f32,
) -> GrayImage {
    let content = resampler.resize(image, plan.scaled_content.width, plan.scaled_content.height);
    let r = plan.content_rect();
    GrayImage::from_fn(plan.canvas.width, plan.canvas.height, |x, y| {
        if x >= r.x && x < r.x + r.width && y >= r.y && y < r.y + r.height {
            content.get(x - r.x, y - r.y)
        } else {
            pad
        }
    })
}

/// Deterministic stand-in for a vision encoder: each patch becomes
/// `[mean, min, max, variance, 0, ...]` of its pixel block.
pub fn encode_tile_stub(tile: &GrayImage, profile: &EncoderProfile) -> Result<FeatureGrid> {
    let side = profile.tile_side;
    if tile.width != side || tile.height != side || tile.pixels.len() != (side * side) as usize {
        return Err(Error::ShapeMismatch(format!(
            "tile must be {side}x{side}, got {}x{}",
            tile.width, tile.height
        )));
    }
    if let Some(bad) = tile.pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("tile intensity {bad} outside [0, 1]")));
    }
    let pps = profile.patches_per_side();
    let ps = profile.patch_side;
    let n = (ps * ps) as f64;
    let mut grid = FeatureGrid::filled(pps, pps, profile.feature_dim, 0.0);
    for pr in 0..pps {
        for pc in 0..pps {
            let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for y in pr * ps..(pr + 1) * ps {
                for x in pc * ps..(pc + 1) * ps {
                    let v = tile.get(x, y);
                    sum += v as f64;
                    sum_sq += v as f64 * v as f64;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0);
            let cell = grid.cell_mut(pr, pc);
            cell[0] = mean as f32;
            cell[1] = lo;
            cell[2] = hi;
            cell[3] = var as f32;
        }
    }
    Ok(grid)
}

/// Stitches per-tile grids (row-major tile order) into one map.
pub fn merge_tiles(grid: GridShape, tiles: &[FeatureGrid]) -> Result<FeatureGrid> {
    if tiles.len() != grid.tiles() as usize {
        return Err(Error::ShapeMismatch(format!(
            "grid {grid} needs {} tiles, got {}",
            grid.tiles(),
            tiles.len()
        )));
    }
    let first = &tiles[0];
    let (pps, dim) = (first.rows, first.dim);
    if let Some(bad) = tiles.iter().position(|t| t.rows != pps || t.cols != pps || t.dim != dim) {
        return Err(Error::ShapeMismatch(format!(
            "tile {bad} is not {pps}x{pps}x{dim} like tile 0"
        )));
    }
    let (rows, cols) = (grid.rows * pps, grid.cols * pps);
    let mut values = Vec::with_capacity(rows as usize * cols as usize * dim);
    for r in 0..rows {
        for c in 0..cols {
            let tile = &tiles[((r / pps) * grid.cols + c / pps) as usize];
            values.extend_from_slice(tile.cell(r % pps, c % pps));
        }
    }
    FeatureGrid::from_values(rows, cols, dim, values)
}

/// Merged-feature rows and columns whose pixel strips touch image content.
///
/// A strip is discarded only when every pixel in it is padding.
pub fn unpad_layout(plan: &TilingPlan, profile: &EncoderProfile) -> Result<(Range<u32>, Range<u32>)> {
    let p = profile.patch_side;
    if !plan.canvas.width.is_multiple_of(p) || !plan.canvas.height.is_multiple_of(p) {
        return Err(Error::InvalidInput(format!(
            "canvas {}x{} is not divisible by patch side {p}",
            plan.canvas.width, plan.canvas.height
        )));
    }
    let kept = |lead: u32, len: u32| lead / p..(lead + len).div_ceil(p);
    Ok((
        kept(plan.pad_top, plan.scaled_content.height),
        kept(plan.pad_left, plan.scaled_content.width),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutPlan {
    pub grid: GridShape,
    pub merged_rows: u32,
    pub merged_cols: u32,
    pub kept_row_start: u32,
    pub kept_row_count: u32,
    pub kept_col_start: u32,
    pub kept_col_count: u32,
    pub rowend_count: u32,
    pub global_tokens: u32,
    pub highres_tokens: u32,
    pub total_tokens: u32,
}

impl LayoutPlan {
    pub fn kept_rows(&self) -> Range<u32> {
        self.kept_row_start..self.kept_row_start + self.kept_row_count
    }

    pub fn kept_cols(&self) -> Range<u32> {
        self.kept_col_start..self.kept_col_start + self.kept_col_count
    }
}

pub fn build_layout(plan: &TilingPlan, profile: &EncoderProfile) -> Result<LayoutPlan> {
    if plan.tile_side != profile.tile_side {
        return Err(Error::ShapeMismatch(format!(
            "plan tile side {} differs from encoder tile side {}",
            plan.tile_side, profile.tile_side
        )));
    }
    let (rows, cols) = unpad_layout(plan, profile)?;
    let pps = profile.patches_per_side();
    let kept_row_count = rows.end - rows.start;
    let kept_col_count = cols.end - cols.start;
    let global_tokens = pps * pps;
    let highres_tokens = kept_row_count * kept_col_count + kept_row_count;
    Ok(LayoutPlan {
        grid: plan.grid,
        merged_rows: plan.grid.rows * pps,
        merged_cols: plan.grid.cols * pps,
        kept_row_start: rows.start,
        kept_row_count,
        kept_col_start: cols.start,
        kept_col_count,
        rowend_count: kept_row_count,
        global_tokens,
        highres_tokens,
        total_tokens: global_tokens + highres_tokens,
    })
}

/// One position in the visual token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenItem {
    /// Row-major index into the global-context grid.
    Global { index: u32 },
    /// Cell of the merged high-resolution map.
    Grid { row: u32, col: u32 },
    /// Marker closing a kept row. Symbolic; id assignment is the tokenizer's job.
    RowEnd { row: u32 },
}

impl TokenItem {
    /// Feature vector behind this item, `None` for row-end markers.
    pub fn features<'a>(&self, merged: &'a FeatureGrid, global: &'a FeatureGrid) -> Option<&'a [f32]> {
        match *self {
            TokenItem::Global { index } => Some(global.cell(index / global.cols, index % global.cols)),
            TokenItem::Grid { row, col } => Some(merged.cell(row, col)),
            TokenItem::RowEnd { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub items: Vec<TokenItem>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn row_end_positions(&self) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t, TokenItem::RowEnd { .. }))
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn flatten(merged: &FeatureGrid, global: &FeatureGrid, layout: &LayoutPlan) -> Result<TokenSequence> {
    if merged.rows != layout.merged_rows || merged.cols != layout.merged_cols {
        return Err(Error::ShapeMismatch(format!(
            "merged map is {}x{}, layout expects {}x{}",
            merged.rows, merged.cols, layout.merged_rows, layout.merged_cols
        )));
    }
    if global.rows * global.cols != layout.global_tokens {
        return Err(Error::ShapeMismatch(format!(
            "global map has {} cells, layout expects {}",
            global.rows * global.cols,
            layout.global_tokens
        )));
    }
    let mut items = Vec::with_capacity(layout.total_tokens as usize);
    items.extend((0..layout.global_tokens).map(|index| TokenItem::Global { index }));
    for row in layout.kept_rows() {
        items.extend(layout.kept_cols().map(|col| TokenItem::Grid { row, col }));
        items.push(TokenItem::RowEnd { row });
    }
    Ok(TokenSequence { items })
}

/// Layout for an image of the given size: select, tile, lay out.
pub fn token_budget(
    dim: ImageDim,
    candidates: &CandidateSet,
    profile: &EncoderProfile,
) -> Result<LayoutPlan> {
    let plan = plan_for(dim, candidates)?;
    build_layout(&plan, profile)
}

/// Everything produced by running the stub pipeline over one image.
#[derive(Debug, Clone)]
pub struct EncodedImage {
    pub plan: TilingPlan,
    pub layout: LayoutPlan,
    pub merged: FeatureGrid,
    pub global: FeatureGrid,
    pub sequence: TokenSequence,
}

/// Plans, renders, encodes and flattens `image` with the stub encoder.
/// Tiles are encoded in parallel when the `parallel` feature is on; the
/// merge is keyed by tile index so the result matches sequential runs.
pub fn encode_image(
    image: &GrayImage,
    candidates: &CandidateSet,
    profile: &EncoderProfile,
    resampler: &dyn Resampler,
) -> Result<EncodedImage> {
    let dim = ImageDim::new(image.width, image.height)?;
    let plan = plan_for(dim, candidates)?;
    let layout = build_layout(&plan, profile)?;
    let canvas = render_canvas(image, &plan, resampler, 0.0);
    let crops: Vec<GrayImage> = plan.tiles.iter().map(|&r| canvas.crop(r)).collect();

    #[cfg(feature = "parallel")]
    let encoded: Result<Vec<FeatureGrid>> = {
        use rayon::prelude::*;
        crops.par_iter().map(|t| encode_tile_stub(t, profile)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let encoded: Result<Vec<FeatureGrid>> = crops.iter().map(|t| encode_tile_stub(t, profile)).collect();

    let merged = merge_tiles(plan.grid, &encoded?)?;
    let global_plan = global_context_spec(dim, profile.tile_side)?;
    let global_canvas = render_canvas(image, &global_plan, resampler, 0.0);
    let global = encode_tile_stub(&global_canvas, profile)?;
    let sequence = flatten(&merged, &global, &layout)?;
    Ok(EncodedImage { plan, layout, merged, global, sequence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_candidates, plan_tiling};

    fn profile() -> EncoderProfile {
        EncoderProfile::default()
    }

    #[test]
    fn stub_constant_tiles() {
        let p = profile();
        let zeros = encode_tile_stub(&GrayImage::filled(224, 224, 0.0), &p).unwrap();
        assert_eq!((zeros.rows, zeros.cols), (16, 16));
        assert!(zeros.values().iter().all(|&v| v == 0.0));
        let ones = encode_tile_stub(&GrayImage::filled(224, 224, 1.0), &p).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(ones.cell(r, c), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn stub_checkerboard_alternates_means() {
        let p = profile();
        let board = GrayImage::from_fn(224, 224, |x, y| ((x / 14 + y / 14) % 2) as f32);
        let g = encode_tile_stub(&board, &p).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                let expect = ((r + c) % 2) as f32;
                assert_eq!(g.cell(r, c)[0], expect);
                assert_eq!(g.cell(r, c)[3], 0.0);
            }
        }
    }

    #[test]
    fn stub_rejects_bad_buffers() {
        let p = profile();
        assert!(matches!(
            encode_tile_stub(&GrayImage::filled(223, 224, 0.0), &p),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(encode_tile_stub(&GrayImage::filled(224, 224, 1.5), &p).is_err());
    }

    #[test]
    fn merge_identity_and_size() {
        let t = FeatureGrid::from_values(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let one = GridShape { rows: 1, cols: 1 };
        assert_eq!(merge_tiles(one, std::slice::from_ref(&t)).unwrap(), t);

        let tiles: Vec<_> = (0..6).map(|i| FeatureGrid::filled(16, 16, 1, i as f32)).collect();
        let m = merge_tiles(GridShape { rows: 2, cols: 3 }, &tiles).unwrap();
        assert_eq!((m.rows, m.cols), (32, 48));
        for r in 0..32 {
            for c in 0..48 {
                assert_eq!(m.cell(r, c)[0], ((r / 16) * 3 + c / 16) as f32);
            }
        }
    }

    #[test]
    fn merge_rejects_mismatch() {
        let t = FeatureGrid::filled(2, 2, 1, 0.0);
        assert!(merge_tiles(GridShape { rows: 1, cols: 2 }, std::slice::from_ref(&t)).is_err());
        let u = FeatureGrid::filled(3, 3, 1, 0.0);
        assert!(merge_tiles(GridShape { rows: 1, cols: 2 }, &[t, u]).is_err());
    }

    #[test]
    fn unpad_examples() {
        let p = profile();
        let exact = plan_tiling(ImageDim::new(448, 224).unwrap(), GridShape { rows: 1, cols: 2 }, 224).unwrap();
        assert_eq!(unpad_layout(&exact, &p).unwrap(), (0..16, 0..32));

        let wide = plan_tiling(ImageDim::new(1000, 600).unwrap(), GridShape { rows: 2, cols: 3 }, 224).unwrap();
        let (rows, cols) = unpad_layout(&wide, &p).unwrap();
        assert_eq!(rows, 1..31);
        assert_eq!(cols, 0..48);

        // pad_top 13: strip [0, 14) holds content pixel 13.
        let mut boundary = exact.clone();
        boundary.pad_top = 13;
        boundary.pad_bottom = 13;
        boundary.scaled_content.height = 224 - 26;
        assert_eq!(unpad_layout(&boundary, &p).unwrap().0, 0..16);
    }

    #[test]
    fn layout_examples() {
        let set = default_candidates();
        let p = profile();
        let l = token_budget(ImageDim::new(224, 224).unwrap(), &set, &p).unwrap();
        assert_eq!((l.highres_tokens, l.global_tokens, l.total_tokens), (272, 256, 528));
        let l = token_budget(ImageDim::new(1000, 600).unwrap(), &set, &p).unwrap();
        assert_eq!((l.highres_tokens, l.total_tokens), (1470, 1726));
        let l = token_budget(ImageDim::new(448, 224).unwrap(), &set, &p).unwrap();
        assert_eq!((l.highres_tokens, l.total_tokens), (528, 784));
        let l = token_budget(ImageDim::new(672, 448).unwrap(), &set, &p).unwrap();
        assert_eq!(l.grid, GridShape { rows: 2, cols: 3 });
        assert_eq!((l.highres_tokens, l.total_tokens), (1568, 1824));
    }

    #[test]
    fn flatten_single_tile() {
        let p = profile();
        let plan = plan_tiling(ImageDim::new(224, 224).unwrap(), GridShape { rows: 1, cols: 1 }, 224).unwrap();
        let layout = build_layout(&plan, &p).unwrap();
        let merged = FeatureGrid::filled(16, 16, 8, 0.0);
        let seq = flatten(&merged, &merged, &layout).unwrap();
        assert_eq!(seq.len(), 528);
        let expected: Vec<usize> = (1..=16).map(|k| 256 + 17 * k - 1).collect();
        assert_eq!(seq.row_end_positions(), expected);
        assert!(seq.items[..256].iter().all(|t| matches!(t, TokenItem::Global { .. })));
    }

    #[test]
    fn flatten_rejects_wrong_shapes() {
        let p = profile();
        let plan = plan_tiling(ImageDim::new(448, 224).unwrap(), GridShape { rows: 1, cols: 2 }, 224).unwrap();
        let layout = build_layout(&plan, &p).unwrap();
        let g = FeatureGrid::filled(16, 16, 8, 0.0);
        assert!(flatten(&g, &g, &layout).is_err());
    }

    #[test]
    fn row_end_serializes_symbolically() {
        let json = serde_json::to_string(&TokenItem::RowEnd { row: 3 }).unwrap();
        assert_eq!(json, r#"{"kind":"ROW_END","row":3}"#);
    }

    #[test]
    fn encode_image_places_content() {
        // Bright image on a 2x3 canvas: padding rows encode to zero mean.
        let img = GrayImage::filled(1000, 600, 1.0);
        let out = encode_image(&img, &default_candidates(), &profile(), &NearestResampler).unwrap();
        assert_eq!(out.layout.total_tokens, 1726);
        assert_eq!(out.sequence.len(), 1726);
        assert_eq!(out.merged.cell(0, 0)[0], 0.0);
        assert_eq!(out.merged.cell(31, 10)[0], 0.0);
        assert_eq!(out.merged.cell(5, 10)[0], 1.0);
        // Global: 224x134 content, 45 px pad top/bottom; patch row 0 is pad.
        assert_eq!(out.global.cell(0, 0)[0], 0.0);
        assert_eq!(out.global.cell(8, 8)[0], 1.0);
    }
}
