use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::scalar::Real;

/// Loads every model in an OBJ file into one mesh, triangulating polygons.
pub fn read_obj<T: Real>(path: &Path) -> Result<TriangleMesh<T>> {
    let opts = tobj::LoadOptions { triangulate: true, single_index: false, ..Default::default() };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| Error::Format(e.to_string()))?;
    let mut verts = Vec::new();
    let mut tris = Vec::new();
    for m in &models {
        let base = verts.len();
        let p = &m.mesh.positions;
        verts.extend(p.chunks_exact(3).map(|c| {
            Vector3::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2]))
        }));
        tris.extend(m.mesh.indices.chunks_exact(3).map(|c| {
            [base + c[0] as usize, base + c[1] as usize, base + c[2] as usize]
        }));
    }
    TriangleMesh::new(verts, tris)
}

/// Writes positions with 17 significant digits so f64 input round-trips.
pub fn write_obj<T: Real>(path: &Path, mesh: &TriangleMesh<T>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in mesh.vertices() {
        writeln!(
            out,
            "v {:e} {:e} {:e}",
            v.x.to_f64_lossy(),
            v.y.to_f64_lossy(),
            v.z.to_f64_lossy()
        )?;
    }
    for t in mesh.triangles() {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    out.flush()?;
    Ok(())
}

/// Mesh loaded for alignment, re-centered on its bounding-box center.
#[derive(Clone, Debug)]
pub struct LoadedObject<T: Real> {
    pub mesh: TriangleMesh<T>,
    /// Center that was subtracted from every vertex.
    pub offset: Vector3<T>,
}

/// Reads `.obj` or `.ply` by extension and re-centers the result.
pub fn load_object_mesh<T: Real>(path: &Path) -> Result<LoadedObject<T>> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let mut mesh = match ext.as_deref() {
        Some("obj") => read_obj(path)?,
        Some("ply") => super::read_mesh_ply(path)?,
        _ => return Err(Error::Format(format!("unsupported mesh file {}", path.display()))),
    };
    let offset = mesh.recenter()?;
    Ok(LoadedObject { mesh, offset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::cuboid;

    #[test]
    fn obj_round_trip_and_recentering() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("box.obj");
        let m = cuboid::<f64>(Vector3::new(1.0, 2.0, 0.5)).map_vertices(|v| v + Vector3::new(3.0, 0.1, -1.0));
        write_obj(&path, &m).unwrap();
        // tobj parses positions as f32.
        let back: TriangleMesh<f64> = read_obj(&path).unwrap();
        // tobj renumbers vertices in first-use order; compare corners instead.
        assert_eq!(back.triangles().len(), m.triangles().len());
        for k in 0..m.triangles().len() {
            for (a, b) in back.triangle(k).iter().zip(m.triangle(k)) {
                assert!((a - b).norm() < 1e-6);
            }
        }
        let loaded = load_object_mesh::<f64>(&path).unwrap();
        assert!((loaded.offset - Vector3::new(3.0, 0.1, -1.0)).norm() < 1e-6);
        assert!(loaded.mesh.bbox().unwrap().center().norm() < 1e-6);
    }

    #[test]
    fn quads_are_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quad.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        let m: TriangleMesh<f64> = read_obj(&path).unwrap();
        assert_eq!(m.triangles().len(), 2);
        assert!((m.area() - 1.0).abs() < 1e-12);
    }
}
