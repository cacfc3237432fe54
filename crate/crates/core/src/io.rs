//! Snapshot and image I/O.
//!
//! Binary snapshot layout: magic `ACA1`, then u32 little-endian width,
//! height, channels, step index, then width x height x channels f32
//! little-endian values, channel-outermost row-major. PGM emission is 8-bit
//! P5 with linear min/max scaling per channel; PGM ingestion accepts P2 and
//! P5 with maxval up to 255, mapped onto `[0, 1]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::float::Real;
use crate::grid::Grid;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"ACA1";

pub fn write_snapshot<T: Real>(path: impl AsRef<Path>, grid: &Grid<T>, step: u32) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(SNAPSHOT_MAGIC)?;
    for v in [
        grid.width() as u32,
        grid.height() as u32,
        grid.channels() as u32,
        step,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in grid.data() {
        out.write_all(&(v.to_f32().unwrap_or(f32::NAN)).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot<T: Real>(path: impl AsRef<Path>) -> Result<(Grid<T>, u32)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {magic:?}, expected ACA1"),
        });
    }
    let mut word = [0u8; 4];
    let mut header = [0u32; 4];
    for h in header.iter_mut() {
        input.read_exact(&mut word)?;
        *h = u32::from_le_bytes(word);
    }
    let [w, h, c, step] = header;
    let mut grid = Grid::new(w as usize, h as usize, c as usize)?;
    for (i, slot) in grid.data_mut().iter_mut().enumerate() {
        input.read_exact(&mut word).map_err(|_| Error::Parse {
            offset: 20 + i * 4,
            message: "truncated snapshot payload".to_string(),
        })?;
        *slot = T::of(f32::from_le_bytes(word) as f64);
    }
    Ok((grid, step))
}

/// Write one channel as an 8-bit binary PGM, linearly rescaled to the
/// channel's min/max (a constant channel maps to 0).
pub fn write_pgm<T: Real>(path: impl AsRef<Path>, grid: &Grid<T>, channel: usize) -> Result<()> {
    let plane = grid.channel(channel);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in plane {
        let v = v.f64();
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    for v in plane {
        let v = v.f64();
        let byte = if v.is_finite() {
            ((v - lo) * scale).round().clamp(0.0, 255.0) as u8
        } else {
            0
        };
        out.write_all(&[byte])?;
    }
    out.flush()?;
    Ok(())
}

struct PgmScanner {
    bytes: Vec<u8>,
    pos: usize,
}

impl PgmScanner {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Skip whitespace and `#` comment lines.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&[u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse {
                offset: start,
                message: "unexpected end of file".to_string(),
            });
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let start = self.pos;
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: "expected an unsigned integer".to_string(),
            })
    }
}

/// Read a P2 (ASCII) or P5 (binary) PGM as a single-channel grid in `[0, 1]`.
pub fn read_pgm<T: Real>(path: impl AsRef<Path>) -> Result<Grid<T>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let mut sc = PgmScanner { bytes, pos: 0 };

    let magic = sc.token()?.to_vec();
    let binary = match magic.as_slice() {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::Parse {
                offset: 0,
                message: format!("unsupported magic {:?}, expected P2 or P5", String::from_utf8_lossy(other)),
            })
        }
    };
    let width = sc.number()?;
    let height = sc.number()?;
    let maxval = sc.number()?;
    if maxval == 0 || maxval > 255 {
        return Err(sc.err(format!("maxval {maxval} out of supported range 1..=255")));
    }
    if width == 0 || height == 0 {
        return Err(sc.err("image dimensions must be positive"));
    }

    let mut grid = Grid::new(width, height, 1)?;
    let scale = 1.0 / maxval as f64;
    if binary {
        // exactly one separator byte after maxval
        sc.pos += 1;
        if sc.bytes.len() < sc.pos + width * height {
            return Err(Error::Parse {
                offset: sc.bytes.len(),
                message: format!(
                    "truncated P5 payload: need {} bytes, have {}",
                    width * height,
                    sc.bytes.len().saturating_sub(sc.pos)
                ),
            });
        }
        for i in 0..width * height {
            grid.data_mut()[i] = T::of(sc.bytes[sc.pos + i] as f64 * scale);
        }
    } else {
        for i in 0..width * height {
            let v = sc.number()?;
            if v > maxval {
                return Err(sc.err(format!("sample {v} exceeds maxval {maxval}")));
            }
            grid.data_mut()[i] = T::of(v as f64 * scale);
        }
    }
    Ok(grid)
}
