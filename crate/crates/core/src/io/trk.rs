//! TrackVis `.trk` reader/writer for the version-2, geometry-only subset
//! (no per-point scalars, no per-streamline properties), little-endian.
//!
//! Points are stored in "voxmm" space and mapped to world RAS millimetres
//! with `vox_to_ras * (p / voxel_size - 0.5)`. A header whose `vox_to_ras`
//! is all zeros (older writers) is taken to store world coordinates as-is.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::geometry::{det3, mat_vec, Matrix3, Point3, Streamline, Tractogram};

pub const TRK_HEADER_SIZE: usize = 1000;
const MAGIC: &[u8; 6] = b"TRACK\0";

#[derive(Debug, Error)]
pub enum TrkError {
    #[error("I/O error: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("bad magic {0:?}, expected \"TRACK\\0\"")]
    BadMagic([u8; 6]),
    #[error("unsupported TRK version {0} (only version 2 is supported)")]
    UnsupportedVersion(i32),
    #[error("header size field is {0}, expected 1000 (big-endian files are not supported)")]
    BadHeaderSize(i32),
    #[error("per-point scalars ({scalars}) or per-streamline properties ({properties}) are not supported")]
    UnsupportedScalars { scalars: i16, properties: i16 },
    #[error("truncated or inconsistent stream at byte {offset}: {detail}")]
    TruncatedStream { offset: usize, detail: String },
    #[error("header n_count {header} does not match {actual} streamlines")]
    CountMismatch { header: i32, actual: usize },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrkHeader {
    pub id_string: [u8; 6],
    pub dim: [i16; 3],
    pub voxel_size: [f32; 3],
    pub origin: [f32; 3],
    pub n_scalars: i16,
    pub n_properties: i16,
    /// Row-major 4x4.
    pub vox_to_ras: [[f32; 4]; 4],
    pub voxel_order: [u8; 4],
    pub n_count: i32,
    pub version: i32,
    pub hdr_size: i32,
}

impl TrkHeader {
    /// Header for world-space streamlines: 1 mm voxels and a `vox_to_ras`
    /// that makes the stored values equal world coordinates.
    pub fn world(n_count: usize) -> Self {
        Self {
            id_string: *MAGIC,
            dim: [256, 256, 256],
            voxel_size: [1.0; 3],
            origin: [0.0; 3],
            n_scalars: 0,
            n_properties: 0,
            vox_to_ras: [[1.0, 0.0, 0.0, 0.5], [0.0, 1.0, 0.0, 0.5], [0.0, 0.0, 1.0, 0.5], [0.0, 0.0, 0.0, 1.0]],
            voxel_order: *b"RAS\0",
            n_count: n_count as i32,
            version: 2,
            hdr_size: TRK_HEADER_SIZE as i32,
        }
    }

    fn is_legacy(&self) -> bool {
        self.vox_to_ras.iter().flatten().all(|&v| v == 0.0)
    }

    fn linear(&self) -> (Matrix3, Point3) {
        let m = &self.vox_to_ras;
        let lin = [
            [m[0][0] as f64, m[0][1] as f64, m[0][2] as f64],
            [m[1][0] as f64, m[1][1] as f64, m[1][2] as f64],
            [m[2][0] as f64, m[2][1] as f64, m[2][2] as f64],
        ];
        (lin, [m[0][3] as f64, m[1][3] as f64, m[2][3] as f64])
    }

    fn validate(&self) -> Result<(), TrkError> {
        if &self.id_string != MAGIC {
            return Err(TrkError::BadMagic(self.id_string));
        }
        if self.hdr_size != TRK_HEADER_SIZE as i32 {
            return Err(TrkError::BadHeaderSize(self.hdr_size));
        }
        if self.version != 2 {
            return Err(TrkError::UnsupportedVersion(self.version));
        }
        if self.n_scalars != 0 || self.n_properties != 0 {
            return Err(TrkError::UnsupportedScalars { scalars: self.n_scalars, properties: self.n_properties });
        }
        if self.n_count < 0 {
            return Err(TrkError::InvalidHeader(format!("negative n_count {}", self.n_count)));
        }
        if !self.is_legacy() {
            if self.voxel_size.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(TrkError::InvalidHeader(format!("voxel size {:?}", self.voxel_size)));
            }
            let (lin, _) = self.linear();
            if !(det3(&lin).abs() > 1e-12) {
                return Err(TrkError::InvalidHeader("singular vox_to_ras".into()));
            }
        }
        Ok(())
    }

    fn to_world(&self, p: [f32; 3]) -> Point3 {
        if self.is_legacy() {
            return [p[0] as f64, p[1] as f64, p[2] as f64];
        }
        let (lin, t) = self.linear();
        let vox = [
            p[0] as f64 / self.voxel_size[0] as f64 - 0.5,
            p[1] as f64 / self.voxel_size[1] as f64 - 0.5,
            p[2] as f64 / self.voxel_size[2] as f64 - 0.5,
        ];
        let w = mat_vec(&lin, &vox);
        [w[0] + t[0], w[1] + t[1], w[2] + t[2]]
    }

    fn world_to_stored(&self, inverse: &Option<(Matrix3, Point3)>, p: &Point3) -> [f32; 3] {
        match inverse {
            None => [p[0] as f32, p[1] as f32, p[2] as f32],
            Some((inv, t)) => {
                let v = mat_vec(inv, &[p[0] - t[0], p[1] - t[1], p[2] - t[2]]);
                [
                    ((v[0] + 0.5) * self.voxel_size[0] as f64) as f32,
                    ((v[1] + 0.5) * self.voxel_size[1] as f64) as f32,
                    ((v[2] + 0.5) * self.voxel_size[2] as f64) as f32,
                ]
            }
        }
    }

    pub fn encode(&self) -> [u8; TRK_HEADER_SIZE] {
        let mut b = [0u8; TRK_HEADER_SIZE];
        b[0..6].copy_from_slice(&self.id_string);
        for i in 0..3 {
            b[6 + 2 * i..8 + 2 * i].copy_from_slice(&self.dim[i].to_le_bytes());
            b[12 + 4 * i..16 + 4 * i].copy_from_slice(&self.voxel_size[i].to_le_bytes());
            b[24 + 4 * i..28 + 4 * i].copy_from_slice(&self.origin[i].to_le_bytes());
        }
        b[36..38].copy_from_slice(&self.n_scalars.to_le_bytes());
        b[238..240].copy_from_slice(&self.n_properties.to_le_bytes());
        for (i, v) in self.vox_to_ras.iter().flatten().enumerate() {
            b[440 + 4 * i..444 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        b[948..952].copy_from_slice(&self.voxel_order);
        b[988..992].copy_from_slice(&self.n_count.to_le_bytes());
        b[992..996].copy_from_slice(&self.version.to_le_bytes());
        b[996..1000].copy_from_slice(&self.hdr_size.to_le_bytes());
        b
    }

    /// Parses the fixed 1000-byte header without validating it.
    pub fn decode(b: &[u8]) -> Result<Self, TrkError> {
        if b.len() < TRK_HEADER_SIZE {
            return Err(TrkError::TruncatedStream { offset: b.len(), detail: "file shorter than the 1000-byte header".into() });
        }
        let i16_at = |o: usize| i16::from_le_bytes([b[o], b[o + 1]]);
        let i32_at = |o: usize| i32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let mut vox_to_ras = [[0f32; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                vox_to_ras[r][c] = f32_at(440 + 4 * (4 * r + c));
            }
        }
        Ok(Self {
            id_string: b[0..6].try_into().unwrap(),
            dim: [i16_at(6), i16_at(8), i16_at(10)],
            voxel_size: [f32_at(12), f32_at(16), f32_at(20)],
            origin: [f32_at(24), f32_at(28), f32_at(32)],
            n_scalars: i16_at(36),
            n_properties: i16_at(238),
            vox_to_ras,
            voxel_order: b[948..952].try_into().unwrap(),
            n_count: i32_at(988),
            version: i32_at(992),
            hdr_size: i32_at(996),
        })
    }
}

pub fn encode_trk(header: &TrkHeader, streamlines: &[Streamline]) -> Result<Vec<u8>, TrkError> {
    header.validate()?;
    if header.n_count as usize != streamlines.len() {
        return Err(TrkError::CountMismatch { header: header.n_count, actual: streamlines.len() });
    }
    let inverse = if header.is_legacy() {
        None
    } else {
        let (lin, t) = header.linear();
        Some((invert3(&lin), t))
    };
    let points: usize = streamlines.iter().map(Streamline::len).sum();
    let mut out = Vec::with_capacity(TRK_HEADER_SIZE + 4 * streamlines.len() + 12 * points);
    out.extend_from_slice(&header.encode());
    for s in streamlines {
        out.extend_from_slice(&(s.len() as i32).to_le_bytes());
        for p in s.points() {
            for v in header.world_to_stored(&inverse, p) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_trk(bytes: &[u8]) -> Result<(TrkHeader, Tractogram), TrkError> {
    let header = TrkHeader::decode(bytes)?;
    header.validate()?;
    let mut offset = TRK_HEADER_SIZE;
    let mut streamlines = Vec::with_capacity(header.n_count as usize);
    while offset < bytes.len() {
        if bytes.len() - offset < 4 {
            return Err(TrkError::TruncatedStream { offset, detail: "partial point count".into() });
        }
        let n = i32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap());
        if n < 2 {
            return Err(TrkError::TruncatedStream { offset, detail: format!("streamline with {n} points") });
        }
        let n = n as usize;
        let need = n.saturating_mul(12);
        if bytes.len() - offset - 4 < need {
            return Err(TrkError::TruncatedStream {
                offset,
                detail: format!("streamline {} declares {n} points but only {} bytes remain", streamlines.len(), bytes.len() - offset - 4),
            });
        }
        offset += 4;
        let mut pts = Vec::with_capacity(n);
        for c in bytes[offset..offset + need].chunks_exact(12) {
            let x = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let y = f32::from_le_bytes(c[4..8].try_into().unwrap());
            let z = f32::from_le_bytes(c[8..12].try_into().unwrap());
            pts.push(header.to_world([x, y, z]));
        }
        let s = Streamline::new(pts).map_err(|e| TrkError::TruncatedStream { offset, detail: e.to_string() })?;
        streamlines.push(s);
        offset += need;
    }
    if streamlines.len() != header.n_count as usize {
        return Err(TrkError::TruncatedStream {
            offset,
            detail: format!("header declares {} streamlines, stream holds {}", header.n_count, streamlines.len()),
        });
    }
    Ok((header, streamlines))
}

pub fn read_trk(path: &Path) -> Result<(TrkHeader, Tractogram), TrkError> {
    decode_trk(&fs::read(path)?)
}

pub fn write_trk(header: &TrkHeader, streamlines: &[Streamline], path: &Path) -> Result<(), TrkError> {
    fs::write(path, encode_trk(header, streamlines)?)?;
    Ok(())
}

fn invert3(a: &Matrix3) -> Matrix3 {
    let det = det3(a);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
        }
    }
    inv
}
