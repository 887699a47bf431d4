//! On-disk formats: 8-bit PNG frames, single-channel little-endian PFM
//! depth, SHA-256 file digests.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use exposlam_core::{DepthMap, Image};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Quantizes to 8 bits and writes a gray or RGB PNG.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let color = match img.channels() {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(CliError::data(path, format!("cannot store {c} channels as PNG"))),
    };
    image::save_buffer_with_format(path, &bytes, img.width() as u32, img.height() as u32, color, image::ImageFormat::Png)
        .map_err(|e| CliError::data(path, e))
}

/// Reads an 8-bit gray or RGB PNG into `[0, 1]` samples. Other layouts are converted to RGB.
pub fn read_png(path: &Path) -> Result<Image> {
    let dynamic = image::open(path).map_err(|e| CliError::data(path, e))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let (channels, raw) = match dynamic {
        image::DynamicImage::ImageLuma8(g) => (1, g.into_raw()),
        other => (3, other.into_rgb8().into_raw()),
    };
    Image::new(w, h, channels, raw.into_iter().map(|b| b as f64 / 255.0).collect()).map_err(|e| CliError::data(path, e))
}

/// PNG dimensions without decoding pixels.
pub fn png_dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|e| CliError::data(path, e))
}

/// Grayscale PFM (`Pf`), little-endian (negative scale), rows stored bottom to top.
pub fn write_pfm(path: &Path, depth: &DepthMap) -> Result<()> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = Vec::with_capacity(32 + w * h * 4);
    write!(out, "Pf\n{w} {h}\n-1.0\n").expect("in-memory write");
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(depth.get(x, y) as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(CliError::io(path))
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    let file = fs::File::open(path).map_err(CliError::io(path))?;
    let mut r = BufReader::new(file);
    let bad = |m: &str| CliError::data(path, format!("bad PFM: {m}"));
    let mut header = Vec::new();
    // three whitespace-terminated tokens: magic, "w h", scale
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        header.clear();
        let n = r.read_until(b'\n', &mut header).map_err(CliError::io(path))?;
        if n == 0 {
            return Err(bad("truncated header"));
        }
        let line = std::str::from_utf8(&header).map_err(|_| bad("header is not text"))?;
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    if tokens[0] != "Pf" {
        return Err(bad(if tokens[0] == "PF" { "color PFM not supported" } else { "magic is not Pf" }));
    }
    let w: usize = tokens[1].parse().map_err(|_| bad("width"))?;
    let h: usize = tokens[2].parse().map_err(|_| bad("height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("scale"));
    }
    let little = scale < 0.0;
    let mut raw = vec![0u8; w * h * 4];
    r.read_exact(&mut raw).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => bad("truncated data"),
        _ => CliError::Io { path: path.to_path_buf(), source: e },
    })?;
    let mut data = vec![0.0; w * h];
    for (i, c) in raw.chunks_exact(4).enumerate() {
        let b = [c[0], c[1], c[2], c[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (x, row) = (i % w, i / w);
        data[(h - 1 - row) * w + x] = v as f64;
    }
    DepthMap::new(w, h, data).map_err(|e| CliError::data(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn frame_name(index: usize) -> String {
    format!("{index:06}.png")
}

/// Indices of `%06d.png` files in `dir`, sorted; other files are ignored.
pub fn list_frames(dir: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(CliError::io(dir))? {
        let entry = entry.map_err(CliError::io(dir))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(stem) = name.strip_suffix(".png") {
            if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
                out.push(stem.parse().expect("six digits"));
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_roundtrip_and_orientation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.pfm");
        let d = DepthMap::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.5, 0.0]).unwrap();
        write_pfm(&p, &d).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        // first stored row is the bottom image row
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, 4.0);
        assert_eq!(read_pfm(&p).unwrap(), d);
    }

    #[test]
    fn big_endian_pfm_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("be.pfm");
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        fs::write(&p, bytes).unwrap();
        assert_eq!(read_pfm(&p).unwrap().data(), &[1.5, 2.5]);
    }

    #[test]
    fn truncated_pfm_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.pfm");
        fs::write(&p, b"Pf\n4 4\n-1.0\n\0\0").unwrap();
        assert_eq!(read_pfm(&p).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn png_roundtrip_is_exact_on_8_bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.png");
        let img = Image::new(4, 2, 3, (0..24).map(|i| (i * 10) as f64 / 255.0).collect()).unwrap();
        write_png(&p, &img).unwrap();
        assert_eq!(read_png(&p).unwrap(), img);
        assert_eq!(png_dimensions(&p).unwrap(), (4, 2));
    }

    #[test]
    fn frame_listing_ignores_strays() {
        let dir = tempfile::tempdir().unwrap();
        for n in ["000002.png", "000000.png", "notes.txt", "12.png", "000001.png.bak"] {
            fs::write(dir.path().join(n), b"").unwrap();
        }
        assert_eq!(list_frames(dir.path()).unwrap(), vec![0, 2]);
    }
}
