//! MetaImage (.mhd/.raw) reader and writer for the subset this pipeline
//! needs: 3D, little-endian, uncompressed raw payloads.
//!
//! Header `DimSize`/`ElementSpacing`/`Offset` are x y z (MetaImage
//! convention); in memory everything is z y x. The reorder happens here.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::{ElementKind, Volume};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Header {
    dims_xyz: [usize; 3],
    spacing_xyz: [f64; 3],
    offset_xyz: [f64; 3],
    element_kind: ElementKind,
    data_file: String,
}

fn parse_header(text: &str) -> Result<Header> {
    let mut ndims = None;
    let mut dims = None;
    let mut spacing = None;
    let mut offset = [0.0f64; 3];
    let mut kind = None;
    let mut data_file = None;

    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let bad = |k: &str| Error::BadHeaderValue {
            key: k.to_string(),
            value: value.to_string(),
        };
        match key {
            "NDims" => {
                ndims = Some(value.parse::<usize>().map_err(|_| bad(key))?);
            }
            "DimSize" => {
                let v: Vec<usize> = value
                    .split_whitespace()
                    .map(|t| t.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(key))?;
                if v.len() != 3 {
                    return Err(bad(key));
                }
                dims = Some([v[0], v[1], v[2]]);
            }
            "ElementSpacing" | "ElementSize" => {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(|t| t.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(key))?;
                if v.len() != 3 {
                    return Err(bad(key));
                }
                if key == "ElementSpacing" || spacing.is_none() {
                    spacing = Some([v[0], v[1], v[2]]);
                }
            }
            "Offset" | "Position" | "Origin" => {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(|t| t.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(key))?;
                if v.len() != 3 {
                    return Err(bad(key));
                }
                offset = [v[0], v[1], v[2]];
            }
            "ElementType" => kind = Some(ElementKind::from_met_name(value)?),
            "ElementDataFile" => data_file = Some(value.to_string()),
            "ElementByteOrderMSB" => {
                if value.eq_ignore_ascii_case("true") {
                    return Err(Error::BadHeaderValue {
                        key: key.to_string(),
                        value: value.to_string(),
                    });
                }
            }
            _ => {} // tolerated: ObjectType, BinaryData, TransformMatrix, ...
        }
    }

    let ndims = ndims.ok_or_else(|| Error::MissingHeaderKey("NDims".into()))?;
    if ndims != 3 {
        return Err(Error::BadHeaderValue {
            key: "NDims".into(),
            value: ndims.to_string(),
        });
    }
    Ok(Header {
        dims_xyz: dims.ok_or_else(|| Error::MissingHeaderKey("DimSize".into()))?,
        spacing_xyz: spacing.ok_or_else(|| Error::MissingHeaderKey("ElementSpacing".into()))?,
        offset_xyz: offset,
        element_kind: kind.ok_or_else(|| Error::MissingHeaderKey("ElementType".into()))?,
        data_file: data_file.ok_or_else(|| Error::MissingHeaderKey("ElementDataFile".into()))?,
    })
}

fn decode(raw: &[u8], kind: ElementKind, n: usize) -> Result<Vec<f32>> {
    let expected = n * kind.byte_size();
    if raw.len() != expected {
        return Err(Error::RawSizeMismatch {
            expected,
            actual: raw.len(),
        });
    }
    let data = match kind {
        ElementKind::Uint8 => raw.iter().map(|&b| b as f32).collect(),
        ElementKind::Int16 => raw
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        ElementKind::Uint16 => raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        ElementKind::Float32 => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    };
    Ok(data)
}

fn encode(v: &Volume) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.len() * v.element_kind.byte_size());
    match v.element_kind {
        ElementKind::Uint8 => {
            for &x in &v.data {
                out.push(x as u8);
            }
        }
        ElementKind::Int16 => {
            for &x in &v.data {
                out.extend_from_slice(&(x as i16).to_le_bytes());
            }
        }
        ElementKind::Uint16 => {
            for &x in &v.data {
                out.extend_from_slice(&(x as u16).to_le_bytes());
            }
        }
        ElementKind::Float32 => {
            for &x in &v.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

/// Read a `.mhd` header and its raw payload into a [`Volume`].
pub fn read_volume(path: &Path) -> Result<Volume> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let header = parse_header(&text)?;
    let [nx, ny, nz] = header.dims_xyz;
    let n = nx * ny * nz;

    let raw = if header.data_file == "LOCAL" {
        // Payload follows the header in the same file. Re-read as bytes and
        // take the trailing chunk after the ElementDataFile line.
        let bytes = fs::read(path).map_err(io_err(path))?;
        let marker = b"ElementDataFile";
        let pos = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .ok_or_else(|| Error::MissingHeaderKey("ElementDataFile".into()))?;
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i + 1)
            .unwrap_or(bytes.len());
        bytes[line_end..].to_vec()
    } else {
        let raw_path = resolve_data_file(path, &header.data_file);
        fs::read(&raw_path).map_err(io_err(&raw_path))?
    };

    let data = decode(&raw, header.element_kind, n)?;
    let [sx, sy, sz] = header.spacing_xyz;
    let [ox, oy, oz] = header.offset_xyz;
    Volume::new((nz, ny, nx), (sz, sy, sx), (oz, oy, ox), header.element_kind, data)
}

fn resolve_data_file(header_path: &Path, data_file: &str) -> PathBuf {
    let p = Path::new(data_file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        header_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Write `v` as a `.mhd` header plus sibling `.raw` payload.
///
/// Files are written to a temp name and renamed so a crashed run never
/// leaves a half-written volume.
pub fn write_volume(v: &Volume, path: &Path) -> Result<()> {
    let raw_path = path.with_extension("raw");
    let raw_name = raw_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data.raw".to_string());

    let (nz, ny, nx) = v.dims;
    let (sz, sy, sx) = v.spacing;
    let (oz, oy, ox) = v.origin;
    let header = format!(
        "ObjectType = Image\n\
         NDims = 3\n\
         BinaryData = True\n\
         ElementByteOrderMSB = False\n\
         DimSize = {nx} {ny} {nz}\n\
         ElementSpacing = {sx} {sy} {sz}\n\
         Offset = {ox} {oy} {oz}\n\
         ElementType = {}\n\
         ElementDataFile = {raw_name}\n",
        v.element_kind.met_name()
    );

    write_atomic(path, header.as_bytes())?;
    write_atomic(&raw_path, &encode(v))
}

/// Write bytes via a temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}
