use std::io::Write;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::nn::Scalar;
use crate::sim::{CellState, Grid};

/// One RGB colour per cell state, indexed by state code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Palette {
    pub empty: [u8; 3],
    pub tree: [u8; 3],
    pub fire: [u8; 3],
    pub ember: [u8; 3],
    pub burned_out: [u8; 3],
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            empty: [0, 0, 0],
            tree: [0, 153, 0],
            fire: [255, 0, 0],
            ember: [153, 51, 0],
            burned_out: [64, 64, 64],
        }
    }
}

impl Palette {
    pub fn color(&self, state: CellState) -> [u8; 3] {
        match state {
            CellState::Empty => self.empty,
            CellState::Tree => self.tree,
            CellState::Fire => self.fire,
            CellState::Ember => self.ember,
            CellState::BurnedOut => self.burned_out,
        }
    }

    /// Empty must be black and no two states may share a colour.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.empty != [0, 0, 0] {
            return Err(DatasetError::InvalidPalette(
                "empty cells must be black".into(),
            ));
        }
        for (i, a) in CellState::ALL.iter().enumerate() {
            for b in &CellState::ALL[i + 1..] {
                if self.color(*a) == self.color(*b) {
                    return Err(DatasetError::InvalidPalette(format!(
                        "{a:?} and {b:?} share a colour"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn state_of(&self, rgb: [u8; 3]) -> Option<CellState> {
        CellState::ALL.into_iter().find(|&s| self.color(s) == rgb)
    }

    /// Colour table indexed by state code, as `[0, 1]` floats.
    pub fn unit_table<T: Scalar>(&self) -> [[T; 3]; 5] {
        CellState::ALL.map(|s| self.color(s).map(|c| T::from_f64_lossy(c as f64 / 255.0)))
    }
}

/// Planar 8-bit RGB raster, channel-major (`3 × height × width`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let plane = self.width * self.height;
        let i = y * self.width + x;
        [self.data[i], self.data[plane + i], self.data[2 * plane + i]]
    }

    /// Binary PPM (P6).
    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let mut row = Vec::with_capacity(self.width * 3);
        for y in 0..self.height {
            row.clear();
            for x in 0..self.width {
                row.extend_from_slice(&self.pixel(x, y));
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

pub fn render_rgb(grid: &Grid<CellState>, palette: &Palette) -> Frame {
    let (w, h) = (grid.width(), grid.height());
    let plane = w * h;
    let mut data = vec![0u8; 3 * plane];
    for (i, &s) in grid.iter().enumerate() {
        let c = palette.color(s);
        data[i] = c[0];
        data[plane + i] = c[1];
        data[2 * plane + i] = c[2];
    }
    Frame {
        width: w,
        height: h,
        data,
    }
}

/// Inverse of [`render_rgb`] for an injective palette.
pub fn decode_rgb(frame: &Frame, palette: &Palette) -> Result<Grid<CellState>, DatasetError> {
    let mut cells = Vec::with_capacity(frame.width * frame.height);
    for y in 0..frame.height {
        for x in 0..frame.width {
            let rgb = frame.pixel(x, y);
            cells.push(
                palette
                    .state_of(rgb)
                    .ok_or(DatasetError::UnknownColor { x, y, rgb })?,
            );
        }
    }
    Ok(Grid::from_vec(frame.width, frame.height, cells))
}

/// Writes the `[0, 1]`-scaled planar RGB encoding of a code grid into `out`
/// (length `3 · codes.len()`).
pub fn render_codes_into<T: Scalar>(codes: &[u8], table: &[[T; 3]; 5], out: &mut [T]) {
    let plane = codes.len();
    debug_assert_eq!(out.len(), 3 * plane);
    let (r, rest) = out.split_at_mut(plane);
    let (g, b) = rest.split_at_mut(plane);
    for (i, &c) in codes.iter().enumerate() {
        let col = table[c as usize];
        r[i] = col[0];
        g[i] = col[1];
        b[i] = col[2];
    }
}
