//! File formats.
//!
//! Binary files are little-endian. Both start with a common header
//!
//! ```text
//! magic [u8; 4] | version u32 | n1 u32 | n2 u32 | r f64 | a f64 | b f64 | k f64
//! ```
//!
//! `WGUS` (point-source data) continues with `(n1·n2)²` blocks of nine
//! complex128 values (`re`, `im`), each block row-major, blocks ordered by
//! receiver node then source node.
//!
//! `WGUM` (modal data matrix) continues with
//!
//! ```text
//! te u32 | tm u32 | noise_level f64 | seed u64 | id_len u32 | id [u8; id_len] | (te+tm)² complex128
//! ```
//!
//! Image volumes are written as CSV (`x1,x2,x3,value`, `x1` varying fastest)
//! or as legacy-VTK structured points with one scalar field `I2`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::DyadicField;
use crate::imaging::{DataMatrixU, ImageVolume, Lattice, LatticeAxis};
use crate::modes::WaveguideSpec;
use crate::operators::{MeasurementGrid, PointSourceData, Scene};

pub const POINT_SOURCE_MAGIC: &[u8; 4] = b"WGUS";
pub const DATA_MATRIX_MAGIC: &[u8; 4] = b"WGUM";
pub const FORMAT_VERSION: u32 = 1;

struct Header {
    grid: MeasurementGrid,
    k: f64,
}

fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], grid: &MeasurementGrid, k: f64) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&u32_of(grid.n1)?.to_le_bytes())?;
    w.write_all(&u32_of(grid.n2)?.to_le_bytes())?;
    for v in [grid.r, grid.spec.a(), grid.spec.b(), k] {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<Header> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n1 = read_u32(r)? as usize;
    let n2 = read_u32(r)? as usize;
    let (gr, a, b, k) = (read_f64(r)?, read_f64(r)?, read_f64(r)?, read_f64(r)?);
    let spec = WaveguideSpec::new(a, b).map_err(|e| Error::Format(e.to_string()))?;
    let grid = MeasurementGrid::new(spec, gr, n1, n2).map_err(|e| Error::Format(e.to_string()))?;
    Ok(Header { grid, k })
}

fn u32_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("{n} does not fit in u32")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn write_complex<W: Write>(w: &mut W, c: Complex64) -> Result<()> {
    w.write_all(&c.re.to_le_bytes())?;
    w.write_all(&c.im.to_le_bytes())?;
    Ok(())
}

fn read_complex<R: Read>(r: &mut R) -> Result<Complex64> {
    Ok(Complex64::new(read_f64(r)?, read_f64(r)?))
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

fn truncated(e: Error) -> Error {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => Error::Format("file is truncated".into()),
        other => other,
    }
}

pub fn write_point_source_data<W: Write>(w: &mut W, data: &PointSourceData) -> Result<()> {
    write_header(w, POINT_SOURCE_MAGIC, &data.grid, data.k)?;
    for block in &data.blocks {
        for i in 0..3 {
            for j in 0..3 {
                write_complex(w, block[(i, j)])?;
            }
        }
    }
    Ok(())
}

pub fn read_point_source_data<R: Read>(r: &mut R) -> Result<PointSourceData> {
    let inner = |r: &mut R| {
        let h = read_header(r, POINT_SOURCE_MAGIC)?;
        let nn = h.grid.len();
        let mut blocks = Vec::with_capacity(nn * nn);
        for _ in 0..nn * nn {
            let mut b = DyadicField::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    b[(i, j)] = read_complex(r)?;
                }
            }
            blocks.push(b);
        }
        expect_eof(r)?;
        Ok(PointSourceData {
            grid: h.grid,
            k: h.k,
            blocks,
        })
    };
    inner(r).map_err(truncated)
}

pub fn write_data_matrix<W: Write>(w: &mut W, u: &DataMatrixU) -> Result<()> {
    write_header(w, DATA_MATRIX_MAGIC, &u.grid, u.k)?;
    w.write_all(&u32_of(u.te)?.to_le_bytes())?;
    w.write_all(&u32_of(u.tm)?.to_le_bytes())?;
    w.write_all(&u.noise_level.to_le_bytes())?;
    w.write_all(&u.seed.to_le_bytes())?;
    let id = u.scene_id.as_bytes();
    w.write_all(&u32_of(id.len())?.to_le_bytes())?;
    w.write_all(id)?;
    for v in u.values() {
        write_complex(w, *v)?;
    }
    Ok(())
}

pub fn read_data_matrix<R: Read>(r: &mut R) -> Result<DataMatrixU> {
    let inner = |r: &mut R| {
        let h = read_header(r, DATA_MATRIX_MAGIC)?;
        let te = read_u32(r)? as usize;
        let tm = read_u32(r)? as usize;
        let noise_level = read_f64(r)?;
        let seed = read_u64(r)?;
        let id_len = read_u32(r)? as usize;
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id)?;
        let scene_id = String::from_utf8(id).map_err(|_| Error::Format("scene id is not UTF-8".into()))?;
        let dim = te + tm;
        let values = (0..dim * dim).map(|_| read_complex(r)).collect::<Result<Vec<_>>>()?;
        expect_eof(r)?;
        let mut u = DataMatrixU::from_values(te, tm, h.k, h.grid, values)?;
        u.noise_level = noise_level;
        u.seed = seed;
        u.scene_id = scene_id;
        Ok(u)
    };
    inner(r).map_err(truncated)
}

pub fn save_point_source_data(path: impl AsRef<Path>, data: &PointSourceData) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_point_source_data(&mut w, data)?;
    w.flush()?;
    Ok(())
}

pub fn load_point_source_data(path: impl AsRef<Path>) -> Result<PointSourceData> {
    read_point_source_data(&mut BufReader::new(File::open(path)?))
}

pub fn save_data_matrix(path: impl AsRef<Path>, u: &DataMatrixU) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_data_matrix(&mut w, u)?;
    w.flush()?;
    Ok(())
}

pub fn load_data_matrix(path: impl AsRef<Path>) -> Result<DataMatrixU> {
    read_data_matrix(&mut BufReader::new(File::open(path)?))
}

/// JSON sidecar describing the scene behind a data file.
pub fn save_scene(path: impl AsRef<Path>, scene: &Scene) -> Result<()> {
    std::fs::write(path, scene.to_json()?)?;
    Ok(())
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    Scene::from_json(&std::fs::read_to_string(path)?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// Writes the normalized values with header `x1,x2,x3,value`.
pub fn write_volume_csv<W: Write>(w: W, vol: &ImageVolume) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x1", "x2", "x3", "value"]).map_err(csv_err)?;
    for (i, v) in vol.values.iter().enumerate() {
        let p = vol.lattice.point(i);
        out.serialize((p.x1, p.x2, p.x3, *v)).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a CSV volume written by [`write_volume_csv`]; the lattice is
/// recovered from the distinct coordinates.
pub fn read_volume_csv<R: Read>(r: R) -> Result<ImageVolume> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x1", "x2", "x3", "value"] {
        return Err(Error::Format(format!("unexpected CSV header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<(f64, f64, f64, f64)>() {
        rows.push(rec.map_err(csv_err)?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyLattice);
    }
    let lattice = Lattice::new(
        axis_from(rows.iter().map(|r| r.0))?,
        axis_from(rows.iter().map(|r| r.1))?,
        axis_from(rows.iter().map(|r| r.2))?,
    );
    if lattice.len() != rows.len() {
        return Err(Error::Format(format!(
            "{} rows do not fill a {:?} lattice",
            rows.len(),
            lattice.dims()
        )));
    }
    let mut values = vec![f64::NAN; rows.len()];
    for (x1, x2, x3, v) in rows {
        let idx = lattice.index(lattice.x1.nearest(x1), lattice.x2.nearest(x2), lattice.x3.nearest(x3));
        values[idx] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Format("duplicate lattice nodes in CSV".into()));
    }
    Ok(ImageVolume::from_intensity(lattice, values))
}

fn axis_from(coords: impl Iterator<Item = f64>) -> Result<LatticeAxis> {
    let mut v: Vec<f64> = coords.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.len() == 1 {
        return Ok(LatticeAxis::single(v[0]));
    }
    let step = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
    for (i, x) in v.iter().enumerate() {
        if (v[0] + i as f64 * step - x).abs() > 1e-9 * step.abs().max(x.abs()) {
            return Err(Error::Format("coordinates are not uniformly spaced".into()));
        }
    }
    Ok(LatticeAxis::new(v[0], step, v.len()))
}

/// Legacy-VTK structured points, ASCII, one scalar field `I2`. Axes with a
/// single node get spacing 1.
pub fn write_volume_vtk<W: Write>(mut w: W, vol: &ImageVolume) -> Result<()> {
    let l = &vol.lattice;
    let axes = [l.x1, l.x2, l.x3];
    let spacing = |a: &LatticeAxis| if a.count > 1 { a.step } else { 1.0 };
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "imaging function I^2 (normalized)")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", axes[0].count, axes[1].count, axes[2].count)?;
    writeln!(w, "ORIGIN {} {} {}", axes[0].start, axes[1].start, axes[2].start)?;
    writeln!(
        w,
        "SPACING {} {} {}",
        spacing(&axes[0]),
        spacing(&axes[1]),
        spacing(&axes[2])
    )?;
    writeln!(w, "POINT_DATA {}", l.len())?;
    writeln!(w, "SCALARS I2 double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in &vol.values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn read_volume_vtk<R: Read>(r: R) -> Result<ImageVolume> {
    let lines: Vec<String> = BufReader::new(r).lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter().map(|s| s.trim()).filter(|s| !s.is_empty());
    let bad = |what: &str| Error::Format(format!("VTK: {what}"));
    let head = it.next().ok_or_else(|| bad("empty file"))?;
    if !head.starts_with("# vtk DataFile") {
        return Err(bad("missing version line"));
    }
    it.next().ok_or_else(|| bad("missing title"))?;
    if it.next() != Some("ASCII") {
        return Err(bad("only ASCII files are supported"));
    }
    if it.next() != Some("DATASET STRUCTURED_POINTS") {
        return Err(bad("dataset must be STRUCTURED_POINTS"));
    }
    let mut triple = |key: &str| -> Result<[f64; 3]> {
        let line = it.next().ok_or_else(|| bad(&format!("missing {key}")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(&format!("expected {key}, got {line:?}")));
        }
        let v: Vec<f64> = parts
            .map(|p| p.parse::<f64>().map_err(|_| bad(&format!("bad number {p:?}"))))
            .collect::<Result<_>>()?;
        <[f64; 3]>::try_from(v).map_err(|_| bad(&format!("{key} needs three values")))
    };
    let dims = triple("DIMENSIONS")?;
    let origin = triple("ORIGIN")?;
    let spacing = triple("SPACING")?;
    let ax = |i: usize| LatticeAxis::new(origin[i], spacing[i], dims[i] as usize);
    let lattice = Lattice::new(ax(0), ax(1), ax(2));
    let mut rest = it;
    let pd = rest.next().ok_or_else(|| bad("missing POINT_DATA"))?;
    let n: usize = pd
        .strip_prefix("POINT_DATA")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad("bad POINT_DATA line"))?;
    if n != lattice.len() {
        return Err(bad("POINT_DATA does not match DIMENSIONS"));
    }
    let scalars = rest.next().ok_or_else(|| bad("missing SCALARS"))?;
    if !scalars.starts_with("SCALARS") {
        return Err(bad("expected SCALARS"));
    }
    if rest.next().map(|s| s.starts_with("LOOKUP_TABLE")) != Some(true) {
        return Err(bad("expected LOOKUP_TABLE"));
    }
    let values: Vec<f64> = rest
        .flat_map(|l| l.split_whitespace())
        .map(|p| p.parse::<f64>().map_err(|_| bad(&format!("bad value {p:?}"))))
        .collect::<Result<_>>()?;
    if values.len() != n {
        return Err(bad(&format!("expected {n} values, found {}", values.len())));
    }
    Ok(ImageVolume::from_intensity(lattice, values))
}

pub fn save_volume_csv(path: impl AsRef<Path>, vol: &ImageVolume) -> Result<()> {
    write_volume_csv(BufWriter::new(File::create(path)?), vol)
}

pub fn load_volume_csv(path: impl AsRef<Path>) -> Result<ImageVolume> {
    read_volume_csv(BufReader::new(File::open(path)?))
}

pub fn save_volume_vtk(path: impl AsRef<Path>, vol: &ImageVolume) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_volume_vtk(&mut w, vol)?;
    w.flush()?;
    Ok(())
}

pub fn load_volume_vtk(path: impl AsRef<Path>) -> Result<ImageVolume> {
    read_volume_vtk(File::open(path)?)
}
