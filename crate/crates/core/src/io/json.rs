use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnisotropicScale, ObjectWorldTransform, RigidExtrinsic, Rotation};
use crate::scalar::Real;

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// One compact JSON document per line.
pub fn write_jsonl<'a, S: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a S>,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads JSON-lines, skipping blank lines.
pub fn read_jsonl<D: DeserializeOwned>(path: &Path) -> Result<Vec<D>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Serialized object-to-world transform: rigid part as a `[w, x, y, z]`
/// quaternion and translation, per-axis scale, and the 4x4 row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    pub scale: [f64; 3],
    pub matrix: [f64; 16],
}

impl TransformRecord {
    pub fn from_transform<T: Real>(t: &ObjectWorldTransform<T>) -> Self {
        let f = |v: T| v.to_f64_lossy();
        let rigid = t.rigid();
        let m = t.matrix();
        Self {
            quaternion: rigid.rotation.wxyz().map(f),
            translation: [f(rigid.translation.x), f(rigid.translation.y), f(rigid.translation.z)],
            scale: [f(t.scale().factors().x), f(t.scale().factors().y), f(t.scale().factors().z)],
            matrix: std::array::from_fn(|k| f(m[(k / 4, k % 4)])),
        }
    }

    /// Rebuilds from the factored fields; the stored matrix must agree with
    /// them to 1e-6 relative.
    pub fn to_transform<T: Real>(&self) -> Result<ObjectWorldTransform<T>> {
        let [w, x, y, z] = self.quaternion.map(T::lit);
        let rot = Rotation::from_wxyz(w, x, y, z)?;
        let t = Vector3::from(self.translation.map(T::lit));
        let s = AnisotropicScale::from_vector(Vector3::from(self.scale.map(T::lit)))?;
        let out = ObjectWorldTransform::from_rigid_scale(RigidExtrinsic::new(rot, t), s);
        let m = out.matrix();
        let scale = self.matrix.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (k, v) in self.matrix.iter().enumerate() {
            if (m[(k / 4, k % 4)].to_f64_lossy() - v).abs() > 1e-6 * scale {
                return Err(Error::Format("transform matrix disagrees with its factors".into()));
            }
        }
        Ok(out)
    }
}
