//! Little-endian binary dataset format.
//!
//! ```text
//! "TBDZ" | version u32 | I u32 | J u32 | K u32 | M_i u32 x I
//!        | scale f64 | noise power f64 x I
//! frames: K x (I x J x M_i complex64, (i, j, m) order)
//! truth:  n u32, then per track id u64 | birth u32 | death u32 | f64 x 4 per step
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::Complex;

use super::scenario::{Dataset, GroundTruthTrack, MeasurementFrame};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TBDZ";
pub const VERSION: u32 = 1;

/// Upper bound on any single header count, to reject garbage before
/// allocating.
const MAX_COUNT: u32 = 1 << 24;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetHeader {
    pub version: u32,
    pub n_snapshots: usize,
    pub n_steps: usize,
    pub dims: Vec<usize>,
    pub scale: f64,
    pub noise_power: Vec<f64>,
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(&mut w, data)?;
    w.flush()?;
    Ok(())
}

pub fn write_to<W: Write>(w: &mut W, data: &Dataset) -> Result<()> {
    let first = data.frames.first().ok_or_else(|| Error::Validation("dataset has no frames".into()))?;
    if data.noise_power.len() != first.n_dict() {
        return Err(Error::Dimension {
            what: "noise power per dictionary",
            expected: first.n_dict(),
            found: data.noise_power.len(),
        });
    }
    w.write_all(&MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_u32::<LE>(first.n_dict() as u32)?;
    w.write_u32::<LE>(first.n_snapshots as u32)?;
    w.write_u32::<LE>(data.frames.len() as u32)?;
    for &m in &first.dims {
        w.write_u32::<LE>(m as u32)?;
    }
    w.write_f64::<LE>(data.scale)?;
    for &e in &data.noise_power {
        w.write_f64::<LE>(e)?;
    }
    for f in &data.frames {
        if f.dims != first.dims || f.n_snapshots != first.n_snapshots {
            return Err(Error::Validation(format!("frame {} shape differs from the first frame", f.step)));
        }
        for c in &f.data {
            w.write_f32::<LE>(c.re)?;
            w.write_f32::<LE>(c.im)?;
        }
    }
    w.write_u32::<LE>(data.tracks.len() as u32)?;
    for t in &data.tracks {
        w.write_u64::<LE>(t.id)?;
        w.write_u32::<LE>(t.birth_step as u32)?;
        w.write_u32::<LE>(t.death_step as u32)?;
        for s in &t.states {
            for v in s {
                w.write_f64::<LE>(*v)?;
            }
        }
    }
    Ok(())
}

fn header_err(e: std::io::Error, what: &str) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::MalformedHeader(format!("file ends inside the header ({what})"))
    } else {
        Error::Io(e)
    }
}

fn payload_err(e: std::io::Error, what: String) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::TruncatedPayload(what)
    } else {
        Error::Io(e)
    }
}

fn read_count<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = r.read_u32::<LE>().map_err(|e| header_err(e, what))?;
    if v > MAX_COUNT {
        return Err(Error::MalformedHeader(format!("{what} = {v} is implausible")));
    }
    Ok(v as usize)
}

pub fn read_header<R: Read>(r: &mut R) -> Result<DatasetHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| header_err(e, "magic"))?;
    let version = r.read_u32::<LE>().map_err(|e| header_err(e, "version"))?;
    if magic != MAGIC || version != VERSION {
        return Err(Error::VersionMismatch { magic, version });
    }
    let n_dict = read_count(r, "I")?;
    let n_snapshots = read_count(r, "J")?;
    let n_steps = read_count(r, "K")?;
    if n_dict == 0 || n_snapshots == 0 {
        return Err(Error::MalformedHeader("I and J must be positive".into()));
    }
    let dims = (0..n_dict).map(|_| read_count(r, "M")).collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(Error::MalformedHeader("dictionary dimension 0".into()));
    }
    let scale = r.read_f64::<LE>().map_err(|e| header_err(e, "scale"))?;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::MalformedHeader(format!("normalization scale {scale}")));
    }
    let noise_power = (0..n_dict)
        .map(|_| r.read_f64::<LE>().map_err(|e| header_err(e, "noise power")))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetHeader { version, n_snapshots, n_steps, dims, scale, noise_power })
}

pub fn read_from<R: Read>(r: &mut R) -> Result<Dataset> {
    let h = read_header(r)?;
    let per_frame: usize = h.dims.iter().sum::<usize>() * h.n_snapshots;
    let mut frames = Vec::with_capacity(h.n_steps);
    for k in 1..=h.n_steps {
        let mut f = MeasurementFrame::zeros(k, h.dims.clone(), h.n_snapshots, h.scale);
        for c in f.data.iter_mut() {
            let re = r.read_f32::<LE>().map_err(|e| payload_err(e, format!("frame {k}")))?;
            let im = r.read_f32::<LE>().map_err(|e| payload_err(e, format!("frame {k}")))?;
            *c = Complex::new(re, im);
        }
        debug_assert_eq!(f.data.len(), per_frame);
        frames.push(f);
    }
    let n_tracks = r.read_u32::<LE>().map_err(|e| payload_err(e, "ground-truth count".into()))?;
    let mut tracks = Vec::with_capacity(n_tracks.min(MAX_COUNT) as usize);
    for n in 0..n_tracks {
        let what = || format!("ground-truth track {n}");
        let id = r.read_u64::<LE>().map_err(|e| payload_err(e, what()))?;
        let birth = r.read_u32::<LE>().map_err(|e| payload_err(e, what()))? as usize;
        let death = r.read_u32::<LE>().map_err(|e| payload_err(e, what()))? as usize;
        if death < birth || death - birth >= MAX_COUNT as usize {
            return Err(Error::TruncatedPayload(format!("{}: birth {birth} after death {death}", what())));
        }
        let mut states = Vec::with_capacity(death - birth + 1);
        for _ in birth..=death {
            let mut s = [0.0; 4];
            for v in s.iter_mut() {
                *v = r.read_f64::<LE>().map_err(|e| payload_err(e, what()))?;
            }
            states.push(s);
        }
        tracks.push(GroundTruthTrack { id, birth_step: birth, death_step: death, states });
    }
    Ok(Dataset { tracks, frames, noise_power: h.noise_power, scale: h.scale })
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    read_from(&mut r)
}
