//! Pixel-space geometry for any-resolution tiling.
//!
//! An input image is aspect-fit onto a canvas made of `rows x cols` square
//! tiles, centered, and padded. The canvas is then cut into tiles that are
//! encoded independently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default side of a square tile, in pixels.
pub const DEFAULT_TILE_SIDE: u32 = 224;

/// Upper bound on tiles per grid for the default candidate set.
pub const DEFAULT_MAX_TILES: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDim {
    pub width: u32,
    pub height: u32,
}

impl ImageDim {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    pub fn transpose(&self) -> Self {
        Self { width: self.height, height: self.width }
    }
}

/// Arrangement of tiles on a canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub rows: u32,
    pub cols: u32,
}

impl GridShape {
    pub fn new(rows: u32, cols: u32) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "grid shape must be positive, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn tiles(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn transpose(&self) -> Self {
        Self { rows: self.cols, cols: self.rows }
    }

    pub fn canvas(&self, tile_side: u32) -> ImageDim {
        ImageDim { width: self.cols * tile_side, height: self.rows * tile_side }
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Ordered set of candidate grids. List order is the final tie-break.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    tile_side: u32,
    max_tiles: u32,
    shapes: Vec<GridShape>,
}

impl CandidateSet {
    pub fn new(tile_side: u32, max_tiles: u32, shapes: Vec<GridShape>) -> Result<Self> {
        if tile_side == 0 {
            return Err(Error::InvalidInput("tile side must be positive".into()));
        }
        if shapes.is_empty() {
            return Err(Error::InvalidInput("candidate set is empty".into()));
        }
        for (i, s) in shapes.iter().enumerate() {
            if s.rows == 0 || s.cols == 0 {
                return Err(Error::InvalidInput(format!("candidate {i} has a zero side")));
            }
            if s.tiles() > max_tiles {
                return Err(Error::InvalidInput(format!(
                    "candidate {s} exceeds {max_tiles} tiles"
                )));
            }
            if shapes[..i].contains(s) {
                return Err(Error::InvalidInput(format!("duplicate candidate {s}")));
            }
        }
        Ok(Self { tile_side, max_tiles, shapes })
    }

    pub fn tile_side(&self) -> u32 {
        self.tile_side
    }

    pub fn max_tiles(&self) -> u32 {
        self.max_tiles
    }

    pub fn shapes(&self) -> &[GridShape] {
        &self.shapes
    }

    /// Same shapes on a different tile side.
    pub fn with_tile_side(&self, tile_side: u32) -> Result<Self> {
        Self::new(tile_side, self.max_tiles, self.shapes.clone())
    }
}

/// The 14 grids of up to six tiles: one-row strips, 2x2, 2x3, and their
/// transposes, on 224 px tiles. Self-transposes (1x1, 2x2) appear once.
pub fn default_candidates() -> CandidateSet {
    let listed = [(1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (2, 2), (2, 3)];
    let mut shapes: Vec<GridShape> = Vec::with_capacity(14);
    let originals = listed.iter().map(|&(rows, cols)| GridShape { rows, cols });
    let transposes = listed.iter().map(|&(rows, cols)| GridShape { rows: cols, cols: rows });
    for shape in originals.chain(transposes) {
        if !shapes.contains(&shape) {
            shapes.push(shape);
        }
    }
    CandidateSet::new(DEFAULT_TILE_SIDE, DEFAULT_MAX_TILES, shapes)
        .expect("default candidate set is valid")
}

/// How well an image fills a canvas under an aspect-preserving fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub scale: f64,
    pub scaled_width: u32,
    pub scaled_height: u32,
    pub effective_pixels: u64,
    pub wasted_pixels: u64,
}

/// Scaled content size of `dim` aspect-fit into `canvas`, using exact integer
/// arithmetic so `floor(side * scale)` never suffers rounding drift.
fn scaled_size(dim: ImageDim, canvas: ImageDim) -> (u32, u32) {
    let (w, h) = (dim.width as u64, dim.height as u64);
    let (cw, ch) = (canvas.width as u64, canvas.height as u64);
    // Width is the limiting side iff cw/w <= ch/h.
    if cw * h <= ch * w {
        let sh = (h * cw / w).clamp(1, ch);
        (cw as u32, sh as u32)
    } else {
        let sw = (w * ch / h).clamp(1, cw);
        (sw as u32, ch as u32)
    }
}

pub fn fit_to_canvas(dim: ImageDim, canvas: ImageDim) -> FitResult {
    let scale = f64::min(
        canvas.width as f64 / dim.width as f64,
        canvas.height as f64 / dim.height as f64,
    );
    let (scaled_width, scaled_height) = scaled_size(dim, canvas);
    let scaled_area = scaled_width as u64 * scaled_height as u64;
    let effective_pixels = scaled_area.min(dim.area());
    FitResult {
        scale,
        scaled_width,
        scaled_height,
        effective_pixels,
        wasted_pixels: canvas.area() - effective_pixels,
    }
}

/// Picks the grid that keeps the most image detail.
///
/// Candidates are ranked by effective pixels (descending), then wasted
/// pixels, then tile count, then list position.
pub fn select_resolution(dim: ImageDim, candidates: &CandidateSet) -> GridShape {
    let side = candidates.tile_side();
    let mut best: Option<(GridShape, FitResult)> = None;
    for &shape in candidates.shapes() {
        let fit = fit_to_canvas(dim, shape.canvas(side));
        let better = match &best {
            None => true,
            Some((cur, cur_fit)) => {
                let key = (std::cmp::Reverse(fit.effective_pixels), fit.wasted_pixels, shape.tiles());
                let cur_key =
                    (std::cmp::Reverse(cur_fit.effective_pixels), cur_fit.wasted_pixels, cur.tiles());
                key < cur_key
            }
        };
        if better {
            best = Some((shape, fit));
        }
    }
    best.expect("candidate set is never empty").0
}

/// Axis-aligned rectangle in canvas pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingPlan {
    pub input: ImageDim,
    pub grid: GridShape,
    pub tile_side: u32,
    pub canvas: ImageDim,
    pub scaled_content: ImageDim,
    pub pad_left: u32,
    pub pad_right: u32,
    pub pad_top: u32,
    pub pad_bottom: u32,
    /// Row-major.
    pub tiles: Vec<Rect>,
}

impl TilingPlan {
    /// Content rectangle on the canvas.
    pub fn content_rect(&self) -> Rect {
        Rect {
            x: self.pad_left,
            y: self.pad_top,
            width: self.scaled_content.width,
            height: self.scaled_content.height,
        }
    }
}

pub fn plan_tiling(dim: ImageDim, grid: GridShape, tile_side: u32) -> Result<TilingPlan> {
    if dim.width == 0 || dim.height == 0 {
        return Err(Error::InvalidInput("image dimensions must be positive".into()));
    }
    if grid.rows == 0 || grid.cols == 0 || tile_side == 0 {
        return Err(Error::InvalidInput("grid and tile side must be positive".into()));
    }
    let canvas = grid.canvas(tile_side);
    let (sw, sh) = scaled_size(dim, canvas);
    let (pad_x, pad_y) = (canvas.width - sw, canvas.height - sh);
    let tiles = (0..grid.rows)
        .flat_map(|r| {
            (0..grid.cols).map(move |c| Rect {
                x: c * tile_side,
                y: r * tile_side,
                width: tile_side,
                height: tile_side,
            })
        })
        .collect();
    Ok(TilingPlan {
        input: dim,
        grid,
        tile_side,
        canvas,
        scaled_content: ImageDim { width: sw, height: sh },
        pad_left: pad_x / 2,
        pad_right: pad_x - pad_x / 2,
        pad_top: pad_y / 2,
        pad_bottom: pad_y - pad_y / 2,
        tiles,
    })
}

/// Single-tile plan used for the low-resolution global view.
pub fn global_context_spec(dim: ImageDim, side: u32) -> Result<TilingPlan> {
    plan_tiling(dim, GridShape { rows: 1, cols: 1 }, side)
}

/// Selection followed by tiling on the candidate set's tile side.
pub fn plan_for(dim: ImageDim, candidates: &CandidateSet) -> Result<TilingPlan> {
    let grid = select_resolution(dim, candidates);
    plan_tiling(dim, grid, candidates.tile_side())
}
