use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, LittleEndian, ReadBytesExt, WriteBytesExt};
use image::{GrayImage, ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::panorama::{Image, InstanceMask};
use crate::scalar::Real;

/// Single-channel PNG, 255 for set pixels.
pub fn write_mask_png(path: &Path, mask: &InstanceMask) -> Result<()> {
    let data = mask.data().iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, data)
        .ok_or_else(|| Error::Format("mask buffer size".into()))?;
    img.save(path)?;
    Ok(())
}

/// Any PNG; a pixel is set when its luma is at least 128.
pub fn read_mask_png(path: &Path) -> Result<InstanceMask> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = img.dimensions();
    InstanceMask::new(
        w as usize,
        h as usize,
        img.into_raw().into_iter().map(|v| u8::from(v >= 128)).collect(),
    )
}

/// 8-bit PNG from a 1- or 3-channel image with values in [0, 1].
pub fn write_png<T: Real>(path: &Path, img: &Image<T>) -> Result<()> {
    let to_u8 = |v: T| (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let data: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    match img.channels() {
        1 => GrayImage::from_raw(w, h, data).map(|i| i.save(path)),
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, data).map(|i| i.save(path)),
        c => return Err(Error::Format(format!("cannot write {c}-channel PNG"))),
    }
    .ok_or_else(|| Error::Format("image buffer size".into()))??;
    Ok(())
}

/// Reads a PNG as RGB with values in [0, 1].
pub fn read_png<T: Real>(path: &Path) -> Result<Image<T>> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| T::lit(f64::from(v) / 255.0)).collect();
    Image::new(w as usize, h as usize, 3, data)
}

/// Grayscale (`Pf`) or color (`PF`) PFM, little-endian, rows stored bottom-up.
pub fn write_pfm<T: Real>(path: &Path, img: &Image<T>) -> Result<()> {
    let tag = match img.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::Format(format!("cannot write {c}-channel PFM"))),
    };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "{tag}\n{} {}\n-1.0\n", img.width(), img.height())?;
    let row = img.width() * img.channels();
    for v in (0..img.height()).rev() {
        for &x in &img.data()[v * row..(v + 1) * row] {
            out.write_f32::<LittleEndian>(x.to_f64_lossy() as f32)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_pfm<T: Real>(path: &Path) -> Result<Image<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut tokens = Vec::new();
    let mut line = String::new();
    while tokens.len() < 4 {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("truncated PFM header".into()));
        }
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let channels = match tokens[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        t => return Err(Error::Format(format!("bad PFM tag `{t}`"))),
    };
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PFM size `{s}`")));
    let (w, h) = (parse(&tokens[1])?, parse(&tokens[2])?);
    let scale: f64 = tokens[3].parse().map_err(|_| Error::Format("bad PFM scale".into()))?;
    let row = w * channels;
    let mut data = vec![T::zero(); row * h];
    let mut buf = vec![0f32; row];
    for v in (0..h).rev() {
        if scale < 0.0 {
            r.read_f32_into::<LittleEndian>(&mut buf)?;
        } else {
            r.read_f32_into::<BigEndian>(&mut buf)?;
        }
        for (d, s) in data[v * row..(v + 1) * row].iter_mut().zip(&buf) {
            *d = T::lit(f64::from(*s));
        }
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes after PFM data".into()));
    }
    Image::new(w, h, channels, data)
}
