use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use nalgebra::{Matrix3, Vector3};
use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Ply, Property};

use crate::error::{Error, Result};
use crate::geometry::{Gaussian, GaussianSet, PointCloud, TriangleMesh};
use crate::scalar::Real;

const COV_KEYS: [&str; 6] = ["cov_xx", "cov_xy", "cov_xz", "cov_yy", "cov_yz", "cov_zz"];
const RGB_KEYS: [&str; 3] = ["red", "green", "blue"];

// ply-rs parses binary PLY fine but its binary writer emits wrong list
// lengths, so files are written by hand.
struct PlyOut {
    out: BufWriter<File>,
}

impl PlyOut {
    fn create(path: &Path, elements: &[(&str, usize, Vec<String>)]) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "ply\nformat binary_little_endian 1.0")?;
        for (name, count, props) in elements {
            writeln!(out, "element {name} {count}")?;
            for p in props {
                writeln!(out, "property {p}")?;
            }
        }
        writeln!(out, "end_header")?;
        Ok(Self { out })
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.out.write_f64::<LittleEndian>(v)?)
    }

    fn f32(&mut self, v: f32) -> Result<()> {
        Ok(self.out.write_f32::<LittleEndian>(v)?)
    }

    fn point<T: Real>(&mut self, p: &Vector3<T>) -> Result<()> {
        for v in p.iter() {
            self.f64(v.to_f64_lossy())?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn vertex_props(colors: bool) -> Vec<String> {
    let mut p: Vec<String> = ["x", "y", "z"].iter().map(|k| format!("double {k}")).collect();
    if colors {
        p.extend(RGB_KEYS.iter().map(|k| format!("uchar {k}")));
    }
    p
}

fn read(path: &Path) -> Result<Ply<DefaultElement>> {
    let mut f = BufReader::new(File::open(path)?);
    Ok(Parser::<DefaultElement>::new().read_ply(&mut f)?)
}

fn number(e: &DefaultElement, key: &str) -> Result<f64> {
    match e.get(key) {
        Some(Property::Double(v)) => Ok(*v),
        Some(Property::Float(v)) => Ok(f64::from(*v)),
        Some(Property::Int(v)) => Ok(f64::from(*v)),
        Some(Property::UInt(v)) => Ok(f64::from(*v)),
        Some(Property::Short(v)) => Ok(f64::from(*v)),
        Some(Property::UShort(v)) => Ok(f64::from(*v)),
        Some(Property::Char(v)) => Ok(f64::from(*v)),
        Some(Property::UChar(v)) => Ok(f64::from(*v)),
        _ => Err(Error::Format(format!("missing numeric property `{key}`"))),
    }
}

fn point<T: Real>(e: &DefaultElement) -> Result<Vector3<T>> {
    Ok(Vector3::new(
        T::lit(number(e, "x")?),
        T::lit(number(e, "y")?),
        T::lit(number(e, "z")?),
    ))
}

fn color(e: &DefaultElement) -> Option<[u8; 3]> {
    let [r, g, b] = RGB_KEYS.map(|k| e.get(k));
    match (r, g, b) {
        (Some(Property::UChar(r)), Some(Property::UChar(g)), Some(Property::UChar(b))) => {
            Some([*r, *g, *b])
        }
        _ => None,
    }
}

fn vertices(ply: &Ply<DefaultElement>) -> &[DefaultElement] {
    ply.payload.get("vertex").map(Vec::as_slice).unwrap_or(&[])
}

fn all_colors(elems: &[DefaultElement]) -> Option<Vec<[u8; 3]>> {
    let c: Vec<_> = elems.iter().map_while(color).collect();
    (c.len() == elems.len() && !c.is_empty()).then_some(c)
}

/// Binary little-endian PLY with double positions, optional RGB and a
/// `uchar`-counted `int` vertex-index list per face.
pub fn write_mesh_ply<T: Real>(path: &Path, mesh: &TriangleMesh<T>) -> Result<()> {
    let colors = mesh.colors();
    let mut w = PlyOut::create(
        path,
        &[
            ("vertex", mesh.vertices().len(), vertex_props(colors.is_some())),
            ("face", mesh.triangles().len(), vec!["list uchar int vertex_indices".into()]),
        ],
    )?;
    for (i, p) in mesh.vertices().iter().enumerate() {
        w.point(p)?;
        if let Some(c) = colors {
            w.out.write_all(&c[i])?;
        }
    }
    for t in mesh.triangles() {
        w.out.write_u8(3)?;
        for &i in t {
            let i = i32::try_from(i).map_err(|_| Error::Format("vertex index exceeds i32".into()))?;
            w.out.write_i32::<LittleEndian>(i)?;
        }
    }
    w.finish()
}

/// Reads a PLY mesh; polygons with more than three corners are fanned.
pub fn read_mesh_ply<T: Real>(path: &Path) -> Result<TriangleMesh<T>> {
    let ply = read(path)?;
    let elems = vertices(&ply);
    let verts = elems.iter().map(point).collect::<Result<Vec<_>>>()?;
    let mut tris = Vec::new();
    for f in ply.payload.get("face").map(Vec::as_slice).unwrap_or(&[]) {
        let idx: Vec<i64> = match f.get("vertex_indices").or_else(|| f.get("vertex_index")) {
            Some(Property::ListInt(v)) => v.iter().map(|&i| i64::from(i)).collect(),
            Some(Property::ListUInt(v)) => v.iter().map(|&i| i64::from(i)).collect(),
            Some(Property::ListShort(v)) => v.iter().map(|&i| i64::from(i)).collect(),
            Some(Property::ListUShort(v)) => v.iter().map(|&i| i64::from(i)).collect(),
            Some(Property::ListUChar(v)) => v.iter().map(|&i| i64::from(i)).collect(),
            _ => return Err(Error::Format("face without vertex index list".into())),
        };
        if idx.iter().any(|&i| i < 0) {
            return Err(Error::Format("negative vertex index".into()));
        }
        for k in 1..idx.len().saturating_sub(1) {
            tris.push([idx[0] as usize, idx[k] as usize, idx[k + 1] as usize]);
        }
    }
    let mesh = TriangleMesh::new(verts, tris)?;
    match all_colors(elems) {
        Some(c) => mesh.with_colors(c),
        None => Ok(mesh),
    }
}

pub fn write_cloud_ply<T: Real>(path: &Path, cloud: &PointCloud<T>) -> Result<()> {
    let colors = cloud.colors();
    let mut w = PlyOut::create(path, &[("vertex", cloud.len(), vertex_props(colors.is_some()))])?;
    for (i, p) in cloud.points().iter().enumerate() {
        w.point(p)?;
        if let Some(c) = colors {
            w.out.write_all(&c[i])?;
        }
    }
    w.finish()
}

pub fn read_cloud_ply<T: Real>(path: &Path) -> Result<PointCloud<T>> {
    let ply = read(path)?;
    let elems = vertices(&ply);
    let pts = elems.iter().map(point).collect::<Result<Vec<_>>>()?;
    match all_colors(elems) {
        Some(c) => PointCloud::with_colors(pts, c),
        None => PointCloud::new(pts),
    }
}

/// Gaussians as vertices carrying the six upper-triangle covariance entries,
/// float color in [0, 1] and opacity.
pub fn write_gaussians_ply<T: Real>(path: &Path, set: &GaussianSet<T>) -> Result<()> {
    let mut props = vertex_props(false);
    props.extend(COV_KEYS.iter().map(|k| format!("double {k}")));
    props.extend(["f_red", "f_green", "f_blue", "opacity"].iter().map(|k| format!("float {k}")));
    let mut w = PlyOut::create(path, &[("vertex", set.len(), props)])?;
    for g in set.elements() {
        w.point(&g.center)?;
        let c = &g.covariance;
        for v in [c[(0, 0)], c[(0, 1)], c[(0, 2)], c[(1, 1)], c[(1, 2)], c[(2, 2)]] {
            w.f64(v.to_f64_lossy())?;
        }
        for v in g.color {
            w.f32(v)?;
        }
        w.f32(g.opacity)?;
    }
    w.finish()
}

pub fn read_gaussians_ply<T: Real>(path: &Path) -> Result<GaussianSet<T>> {
    let ply = read(path)?;
    let mut out = Vec::new();
    for e in vertices(&ply) {
        let mut u = [0.0; 6];
        for (slot, k) in u.iter_mut().zip(COV_KEYS) {
            *slot = number(e, k)?;
        }
        let cov = Matrix3::new(u[0], u[1], u[2], u[1], u[3], u[4], u[2], u[4], u[5]).map(T::lit);
        let f = |k| number(e, k).map(|v| v as f32);
        out.push(Gaussian {
            center: point(e)?,
            covariance: cov,
            color: [f("f_red")?, f("f_green")?, f("f_blue")?],
            opacity: f("opacity")?,
        });
    }
    GaussianSet::new(out)
}
