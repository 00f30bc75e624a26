//! Netpbm graymaps, plain (P2) and raw (P5), 8 or 16 bits.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major gray values.
    pub data: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Plain,
    Raw,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

impl Gray {
    pub fn parse(bytes: &[u8]) -> std::result::Result<Gray, String> {
        let encoding = match bytes.get(..2) {
            Some(b"P2") => Encoding::Plain,
            Some(b"P5") => Encoding::Raw,
            _ => return Err("not a P2 or P5 graymap".into()),
        };
        let mut cur = Cursor { bytes, pos: 2 };
        let mut header = [0u32; 3];
        for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
            *slot = cur
                .number()
                .ok_or_else(|| format!("missing or malformed {name}"))?;
        }
        let [width, height, maxval] = header.map(|v| v as usize);
        if width == 0 || height == 0 {
            return Err("empty image".into());
        }
        if maxval == 0 || maxval > 65535 {
            return Err(format!("maxval {maxval} outside 1..=65535"));
        }
        let n = width * height;
        let data: Vec<u32> = match encoding {
            Encoding::Plain => {
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(cur.number().ok_or("fewer pixels than width × height")?);
                }
                cur.skip_space();
                if cur.pos != bytes.len() {
                    return Err("trailing data after pixels".into());
                }
                v
            }
            Encoding::Raw => {
                match bytes.get(cur.pos) {
                    Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                    _ => return Err("missing separator before raster".into()),
                }
                let raster = &bytes[cur.pos..];
                let wide = maxval > 255;
                let need = if wide { 2 * n } else { n };
                if raster.len() != need {
                    return Err(format!(
                        "raster has {} bytes, expected {need}",
                        raster.len()
                    ));
                }
                if wide {
                    raster
                        .chunks_exact(2)
                        .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                        .collect()
                } else {
                    raster.iter().map(|&b| b as u32).collect()
                }
            }
        };
        if let Some(g) = data.iter().find(|&&g| g as usize > maxval) {
            return Err(format!("gray value {g} exceeds maxval {maxval}"));
        }
        Ok(Gray {
            width,
            height,
            maxval: maxval as u16,
            data: data.into_iter().map(|g| g as u16).collect(),
        })
    }

    pub fn read(path: &Path) -> Result<Gray> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Gray::parse(&bytes).map_err(|reason| Error::BadImageFormat {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn encode(&self, encoding: Encoding) -> Vec<u8> {
        match encoding {
            Encoding::Plain => {
                let mut s = format!("P2\n{} {}\n{}\n", self.width, self.height, self.maxval);
                for row in self.data.chunks(self.width) {
                    let line: Vec<String> = row.iter().map(|g| g.to_string()).collect();
                    s.push_str(&line.join(" "));
                    s.push('\n');
                }
                s.into_bytes()
            }
            Encoding::Raw => {
                let mut out =
                    format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
                if self.maxval > 255 {
                    out.extend(self.data.iter().flat_map(|g| g.to_be_bytes()));
                } else {
                    out.extend(self.data.iter().map(|&g| g as u8));
                }
                out
            }
        }
    }

    pub fn write(&self, path: &Path, encoding: Encoding) -> Result<()> {
        fs::write(path, self.encode(encoding)).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_both_encodings() {
        let g = Gray::parse(b"P2\n# hi\n2 1\n# there\n9\n0 9\n").unwrap();
        assert_eq!(g.data, vec![0, 9]);
        let raw = Gray::parse(b"P5 2 1 300\n\x00\x01\x01\x2c").unwrap();
        assert_eq!(raw.data, vec![1, 300]);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            &b"P3\n1 1\n1\n1\n"[..],
            b"P2\n2 2\n9\n1 2 3\n",
            b"P2\n1 1\n0\n0\n",
            b"P2\n1 1\n70000\n0\n",
            b"P2\n1 1\n9\n10\n",
            b"P5\n2 1\n255\n\x00",
        ] {
            assert!(
                Gray::parse(bad).is_err(),
                "{:?}",
                String::from_utf8_lossy(bad)
            );
        }
    }
}
