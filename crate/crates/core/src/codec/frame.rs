use std::path::Path;

use crate::error::{Error, Result};
use crate::pgm::Pgm;

pub const DEFAULT_CTU_SIZE: usize = 64;

/// Axis-aligned pixel rectangle; used for CU regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.x + self.width <= width && self.y + self.height <= height
    }
}

/// Single-plane 8-bit picture partitioned into a CTU grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    ctu_size: usize,
    luma: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, luma: Vec<u8>) -> Result<Self> {
        Self::with_ctu_size(width, height, luma, DEFAULT_CTU_SIZE)
    }

    pub fn with_ctu_size(width: usize, height: usize, luma: Vec<u8>, ctu_size: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("frame dimensions {width}x{height}")));
        }
        if luma.len() != width * height {
            return Err(Error::invalid(format!(
                "luma length {} does not match {width}x{height}",
                luma.len()
            )));
        }
        if ctu_size == 0 || ctu_size % 8 != 0 {
            return Err(Error::invalid(format!("ctu size {ctu_size} is not a multiple of 8")));
        }
        Ok(Frame {
            width,
            height,
            ctu_size,
            luma,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let pgm = Pgm::read(path)?;
        if pgm.maxval != 255 {
            return Err(Error::parse(
                path.display().to_string(),
                1,
                format!("frame maxval {} (expected 255)", pgm.maxval),
            ));
        }
        let luma = pgm.samples.into_iter().map(|s| s as u8).collect();
        Self::new(pgm.width, pgm.height, luma)
    }

    pub fn to_pgm(&self) -> Pgm {
        Pgm {
            width: self.width,
            height: self.height,
            maxval: 255,
            samples: self.luma.iter().map(|&s| s as u16).collect(),
        }
    }

    pub fn write_pgm(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        self.to_pgm().write(path, comment)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ctu_size(&self) -> usize {
        self.ctu_size
    }

    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    pub fn luma_mut(&mut self) -> &mut [u8] {
        &mut self.luma
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    pub fn cu_cols(&self) -> usize {
        self.width.div_ceil(self.ctu_size)
    }

    pub fn cu_rows(&self) -> usize {
        self.height.div_ceil(self.ctu_size)
    }

    pub fn cu_count(&self) -> usize {
        self.cu_cols() * self.cu_rows()
    }

    /// Region of CU `index` in raster order, clipped to the frame.
    pub fn cu_rect(&self, index: usize) -> Rect {
        let cols = self.cu_cols();
        let x = (index % cols) * self.ctu_size;
        let y = (index / cols) * self.ctu_size;
        Rect::new(
            x,
            y,
            self.ctu_size.min(self.width - x),
            self.ctu_size.min(self.height - y),
        )
    }

    pub fn cu_rects(&self) -> impl Iterator<Item = Rect> + '_ {
        (0..self.cu_count()).map(move |i| self.cu_rect(i))
    }

    /// CU block as a `ctu_size`² array, zero beyond the frame edge.
    pub fn padded_block(&self, rect: Rect) -> Vec<u8> {
        let n = self.ctu_size;
        let mut block = vec![0u8; n * n];
        for row in 0..rect.height {
            let src = (rect.y + row) * self.width + rect.x;
            block[row * n..row * n + rect.width].copy_from_slice(&self.luma[src..src + rect.width]);
        }
        block
    }

    pub(crate) fn put_block(&mut self, rect: Rect, samples: &[u8]) {
        for row in 0..rect.height {
            let dst = (rect.y + row) * self.width + rect.x;
            self.luma[dst..dst + rect.width]
                .copy_from_slice(&samples[row * rect.width..(row + 1) * rect.width]);
        }
    }
}
