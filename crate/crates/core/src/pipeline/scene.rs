use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    apply_transform_gaussians, apply_transform_points, GaussianSet, ObjectWorldTransform,
    PointCloud, TriangleMesh,
};
use crate::io::{write_cloud_ply, write_gaussians_ply, write_json, write_mesh_ply, TransformRecord};
use crate::scalar::Real;

/// Object geometry in its own frame.
#[derive(Clone, Debug, PartialEq)]
pub enum ObjectGeometry<T: Real> {
    Mesh(TriangleMesh<T>),
    Gaussians(GaussianSet<T>),
    Points(PointCloud<T>),
}

impl<T: Real> ObjectGeometry<T> {
    /// Vertices, Gaussians or points.
    pub fn element_count(&self) -> usize {
        match self {
            Self::Mesh(m) => m.vertices().len(),
            Self::Gaussians(g) => g.len(),
            Self::Points(p) => p.len(),
        }
    }

    pub fn transformed(&self, t: &ObjectWorldTransform<T>) -> Self {
        match self {
            Self::Mesh(m) => Self::Mesh(m.transformed(t)),
            Self::Gaussians(g) => Self::Gaussians(apply_transform_gaussians(t, g)),
            Self::Points(p) => Self::Points(apply_transform_points(t, p)),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Mesh(_) => "mesh",
            Self::Gaussians(_) => "gaussians",
            Self::Points(_) => "points",
        }
    }

    fn write_ply(&self, path: &Path) -> Result<()> {
        match self {
            Self::Mesh(m) => write_mesh_ply(path, m),
            Self::Gaussians(g) => write_gaussians_ply(path, g),
            Self::Points(p) => write_cloud_ply(path, p),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Background<T: Real> {
    Gaussians(GaussianSet<T>),
    Points(PointCloud<T>),
}

impl<T: Real> Background<T> {
    fn as_geometry(&self) -> ObjectGeometry<T> {
        match self {
            Self::Gaussians(g) => ObjectGeometry::Gaussians(g.clone()),
            Self::Points(p) => ObjectGeometry::Points(p.clone()),
        }
    }
}

/// One object to place: local geometry, its object-to-world transform and a
/// free-form provenance tag (which source or refiner produced the pose).
#[derive(Clone, Debug, PartialEq)]
pub struct SceneInstance<T: Real> {
    pub id: String,
    pub geometry: ObjectGeometry<T>,
    pub transform: ObjectWorldTransform<T>,
    pub provenance: String,
}

/// Placed instances plus the background, all in the world frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneGraph<T: Real> {
    instances: Vec<SceneInstance<T>>,
    world: Vec<ObjectGeometry<T>>,
    background: Background<T>,
}

pub fn fuse_scene<T: Real>(
    instances: Vec<SceneInstance<T>>,
    background: Background<T>,
) -> Result<SceneGraph<T>> {
    let mut seen = BTreeSet::new();
    for inst in &instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(Error::DuplicateId(inst.id.clone()));
        }
        if !inst.transform.matrix().iter().all(|v| v.is_finite_value()) {
            return Err(Error::NonFinite("instance transform"));
        }
    }
    let world = instances.iter().map(|i| i.geometry.transformed(&i.transform)).collect();
    Ok(SceneGraph { instances, world, background })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub kind: String,
    pub elements: usize,
    pub provenance: String,
    pub transform: TransformRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub instances: Vec<ManifestEntry>,
    pub background: String,
    pub background_elements: usize,
    pub total_elements: usize,
}

impl<T: Real> SceneGraph<T> {
    pub fn instances(&self) -> &[SceneInstance<T>] {
        &self.instances
    }

    /// World-frame geometry of instance `i`.
    pub fn world_geometry(&self, i: usize) -> &ObjectGeometry<T> {
        &self.world[i]
    }

    pub fn background(&self) -> &Background<T> {
        &self.background
    }

    pub fn element_count(&self) -> usize {
        self.world.iter().map(ObjectGeometry::element_count).sum::<usize>()
            + self.background.as_geometry().element_count()
    }

    /// World-frame meshes of the mesh instances, in instance order.
    pub fn world_meshes(&self) -> Vec<&TriangleMesh<T>> {
        self.world
            .iter()
            .filter_map(|g| match g {
                ObjectGeometry::Mesh(m) => Some(m),
                _ => None,
            })
            .collect()
    }

    /// Writes one world-frame PLY per instance, `background.ply` and
    /// `manifest.json` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<SceneManifest> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.instances.len());
        for (inst, world) in self.instances.iter().zip(&self.world) {
            let file = format!("instance_{}.ply", sanitize(&inst.id));
            world.write_ply(&dir.join(&file))?;
            entries.push(ManifestEntry {
                id: inst.id.clone(),
                file,
                kind: world.kind().into(),
                elements: world.element_count(),
                provenance: inst.provenance.clone(),
                transform: TransformRecord::from_transform(&inst.transform),
            });
        }
        let bg = self.background.as_geometry();
        bg.write_ply(&dir.join("background.ply"))?;
        let manifest = SceneManifest {
            instances: entries,
            background: "background.ply".into(),
            background_elements: bg.element_count(),
            total_elements: self.element_count(),
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
