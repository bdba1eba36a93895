//! `.mwip` binary field archives.
//!
//! A 56-byte little-endian header followed by the values, `[level][point][component]`,
//! each value one `f64` (real kind) or two (complex kind, real part first).
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `MWIP` |
//! | 4 | 2 | format version (u16) |
//! | 6 | 2 | spatial dimension n (u16) |
//! | 8 | 4 | nodes per axis nx (u32) |
//! | 12 | 4 | time steps nt (u32); levels = nt + 1 |
//! | 16 | 2 | components (u16) |
//! | 18 | 1 | value kind: 0 real, 1 complex |
//! | 19 | 1 | layout tag, see [`Layout`] |
//! | 20 | 8 | final time T (f64) |
//! | 28 | 8 | h of a conjugated field, else 0 |
//! | 36 | 16 | ω of a conjugated field, else 0 |
//! | 52 | 1 | sign of a conjugated field (i8), else 0 |
//! | 53 | 3 | reserved, zero |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use mwip_core::geometry::Grid;
use mwip_core::potential::MatrixPotential;
use mwip_core::solver::{BoundaryField, Representation, Sign, WaveField};
use mwip_core::C64;

use crate::error::{CliError, CliResult};

pub const MAGIC: [u8; 4] = *b"MWIP";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 56;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Real,
    Complex,
}

/// What the points of a level are.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Grid nodes of a physical field.
    Physical = 0,
    /// Grid nodes of a conjugated field; `h`, `ω`, sign are meaningful.
    Conjugated = 1,
    /// Boundary quadrature points, in `Grid::boundary_points` order.
    Boundary = 2,
    /// Grid nodes of a matrix potential; components are entries, row-major.
    Potential = 3,
    /// Grid nodes of a derived scalar view such as a filtered inverse.
    Derived = 4,
}

impl Layout {
    fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Layout::Physical,
            1 => Layout::Conjugated,
            2 => Layout::Boundary,
            3 => Layout::Potential,
            4 => Layout::Derived,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchiveHeader {
    pub n: u16,
    pub nx: u32,
    pub nt: u32,
    pub components: u16,
    pub kind: ValueKind,
    pub layout: Layout,
    pub t_final: f64,
    pub h: f64,
    pub omega: [f64; 2],
    pub sign: i8,
}

impl ArchiveHeader {
    fn for_grid(grid: &Grid, components: usize, layout: Layout) -> Self {
        Self {
            n: grid.n() as u16,
            nx: grid.nx() as u32,
            nt: grid.nt() as u32,
            components: components as u16,
            kind: ValueKind::Complex,
            layout,
            t_final: grid.t_final(),
            h: 0.0,
            omega: [0.0; 2],
            sign: 0,
        }
    }

    pub fn points_per_level(&self) -> usize {
        let nx = self.nx as usize;
        match (self.layout, self.n) {
            (Layout::Boundary, 1) => 2,
            (Layout::Boundary, _) => 4 * nx,
            (_, n) => nx.pow(n as u32),
        }
    }

    /// Number of stored values, complex or real.
    pub fn element_count(&self) -> usize {
        (self.nt as usize + 1) * self.points_per_level() * self.components as usize
    }

    pub fn payload_bytes(&self) -> usize {
        let per = match self.kind {
            ValueKind::Real => 8,
            ValueKind::Complex => 16,
        };
        self.element_count() * per
    }

    pub fn grid(&self) -> CliResult<Grid> {
        Grid::new(self.n as usize, self.nx as usize, self.nt as usize, self.t_final)
            .map_err(|e| CliError::Archive(format!("header describes no valid grid: {e}")))
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&VERSION.to_le_bytes());
        b[6..8].copy_from_slice(&self.n.to_le_bytes());
        b[8..12].copy_from_slice(&self.nx.to_le_bytes());
        b[12..16].copy_from_slice(&self.nt.to_le_bytes());
        b[16..18].copy_from_slice(&self.components.to_le_bytes());
        b[18] = match self.kind {
            ValueKind::Real => 0,
            ValueKind::Complex => 1,
        };
        b[19] = self.layout as u8;
        b[20..28].copy_from_slice(&self.t_final.to_le_bytes());
        b[28..36].copy_from_slice(&self.h.to_le_bytes());
        b[36..44].copy_from_slice(&self.omega[0].to_le_bytes());
        b[44..52].copy_from_slice(&self.omega[1].to_le_bytes());
        b[52] = self.sign as u8;
        b
    }

    fn decode(b: &[u8; HEADER_LEN]) -> CliResult<Self> {
        if b[0..4] != MAGIC {
            return Err(CliError::Archive("bad magic, not an MWIP archive".into()));
        }
        let u16_at = |o: usize| u16::from_le_bytes([b[o], b[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let version = u16_at(4);
        if version != VERSION {
            return Err(CliError::Archive(format!("unsupported format version {version}")));
        }
        let kind = match b[18] {
            0 => ValueKind::Real,
            1 => ValueKind::Complex,
            k => return Err(CliError::Archive(format!("unknown value kind {k}"))),
        };
        let layout = Layout::from_tag(b[19])
            .ok_or_else(|| CliError::Archive(format!("unknown layout tag {}", b[19])))?;
        let header = Self {
            n: u16_at(6),
            nx: u32_at(8),
            nt: u32_at(12),
            components: u16_at(16),
            kind,
            layout,
            t_final: f64_at(20),
            h: f64_at(28),
            omega: [f64_at(36), f64_at(44)],
            sign: b[52] as i8,
        };
        if !(1..=2).contains(&header.n) || header.nx < 2 || header.components == 0 {
            return Err(CliError::Archive(format!("implausible header {header:?}")));
        }
        Ok(header)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldArchive {
    pub header: ArchiveHeader,
    pub values: Vec<C64>,
}

/// Stores real data as real when every imaginary part is `+0.0`, so the
/// round trip stays bitwise exact.
fn pick_kind(values: &[C64]) -> ValueKind {
    if values.iter().all(|v| v.im.to_bits() == 0) {
        ValueKind::Real
    } else {
        ValueKind::Complex
    }
}

impl FieldArchive {
    fn new(mut header: ArchiveHeader, values: Vec<C64>) -> Self {
        header.kind = pick_kind(&values);
        Self { header, values }
    }

    pub fn from_field(u: &WaveField) -> Self {
        let mut header = ArchiveHeader::for_grid(u.grid(), u.components(), Layout::Physical);
        if let Representation::Conjugated { h, omega, sign } = u.representation() {
            header.layout = Layout::Conjugated;
            header.h = h;
            header.omega = omega;
            header.sign = sign.value() as i8;
        }
        Self::new(header, u.data().to_vec())
    }

    pub fn from_boundary(b: &BoundaryField) -> Self {
        let header = ArchiveHeader::for_grid(b.grid(), b.components(), Layout::Boundary);
        Self::new(header, b.data().to_vec())
    }

    /// Samples `q` on every node of `grid`.
    pub fn from_potential(q: &MatrixPotential, grid: &Grid) -> CliResult<Self> {
        let m = q.dim();
        let nodes = grid.nodes();
        let mut level = vec![C64::new(0.0, 0.0); nodes * m * m];
        let mut values = Vec::with_capacity(grid.levels() * level.len());
        for k in 0..grid.levels() {
            q.fill_level(grid, k, &mut level)?;
            values.extend_from_slice(&level);
        }
        Ok(Self::new(ArchiveHeader::for_grid(grid, m * m, Layout::Potential), values))
    }

    /// A single-level field on the spatial nodes of `grid`.
    pub fn derived_level(grid: &Grid, components: usize, values: Vec<C64>) -> CliResult<Self> {
        let mut header = ArchiveHeader::for_grid(grid, components, Layout::Derived);
        header.nt = 0;
        if values.len() != header.element_count() {
            return Err(CliError::Archive(format!(
                "derived level needs {} values, got {}",
                header.element_count(),
                values.len()
            )));
        }
        Ok(Self::new(header, values))
    }

    pub fn to_field(&self) -> CliResult<WaveField> {
        let repr = match self.header.layout {
            Layout::Physical => Representation::Physical,
            Layout::Conjugated => Representation::Conjugated {
                h: self.header.h,
                omega: self.header.omega,
                sign: if self.header.sign < 0 { Sign::Minus } else { Sign::Plus },
            },
            other => {
                return Err(CliError::Archive(format!("{other:?} archive is not a wave field")))
            }
        };
        let grid = self.header.grid()?;
        Ok(WaveField::from_data(
            &grid,
            self.header.components as usize,
            repr,
            self.values.clone(),
        )?)
    }

    pub fn to_boundary(&self) -> CliResult<BoundaryField> {
        if self.header.layout != Layout::Boundary {
            return Err(CliError::Archive("not a boundary archive".into()));
        }
        let grid = self.header.grid()?;
        Ok(BoundaryField::from_data(
            &grid,
            self.header.components as usize,
            self.values.clone(),
        )?)
    }

    /// Grid-sampled potential; the archive grid must equal `grid`.
    pub fn to_potential(&self, grid: &Grid) -> CliResult<MatrixPotential> {
        if self.header.layout != Layout::Potential {
            return Err(CliError::Archive("not a potential archive".into()));
        }
        if self.header.grid()? != *grid {
            return Err(CliError::Archive(
                "potential archive was sampled on a different grid".into(),
            ));
        }
        let mm = self.header.components as usize;
        let m = (mm as f64).sqrt().round() as usize;
        if m * m != mm {
            return Err(CliError::Archive(format!("{mm} components is not a square matrix")));
        }
        let mut entries = vec![Vec::with_capacity(grid.levels() * grid.nodes()); mm];
        for chunk in self.values.chunks_exact(mm) {
            for (e, v) in entries.iter_mut().zip(chunk) {
                e.push(*v);
            }
        }
        Ok(MatrixPotential::sampled(grid, m, entries)?)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&self.header.encode())?;
        let mut buf = Vec::with_capacity(self.header.payload_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            if self.header.kind == ValueKind::Complex {
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        w.write_all(&buf)
    }

    pub fn read_from(r: &mut impl Read) -> CliResult<Self> {
        let mut head = [0u8; HEADER_LEN];
        r.read_exact(&mut head)
            .map_err(|e| CliError::Archive(format!("truncated header: {e}")))?;
        let header = ArchiveHeader::decode(&head)?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)
            .map_err(|e| CliError::Archive(format!("unreadable payload: {e}")))?;
        if payload.len() != header.payload_bytes() {
            return Err(CliError::Archive(format!(
                "payload has {} bytes, header declares {}",
                payload.len(),
                header.payload_bytes()
            )));
        }
        let f = |c: &[u8]| f64::from_le_bytes(c.try_into().unwrap());
        let values = match header.kind {
            ValueKind::Real => payload.chunks_exact(8).map(|c| C64::new(f(c), 0.0)).collect(),
            ValueKind::Complex => payload
                .chunks_exact(16)
                .map(|c| C64::new(f(&c[..8]), f(&c[8..])))
                .collect(),
        };
        Ok(Self { header, values })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }
}
