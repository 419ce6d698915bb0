use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::descent::{descend, Objective};
use super::gradient::{chamfer_gradient, frozen_loss, Correspondences};
use super::mesh::cloud_radius;
use super::params::{AlignMethod, AlignmentRecord, LossBreakdown, OptimizerConfig, ParamVector, PoseParams};
use crate::error::{Error, Result};
use crate::geometry::{sample_mesh_surface, CameraIntrinsics, PinholeCamera, Rotation, TriangleMesh};
use crate::metrics::mask_loss;
use crate::panorama::InstanceMask;
use crate::raster::rasterize_triangles;
use crate::scalar::Real;

/// Silhouette term evaluated at a reduced raster size.
pub(crate) struct MaskTerm<'a, T: Real> {
    mesh: &'a TriangleMesh<T>,
    mask: InstanceMask,
    cam: PinholeCamera<T>,
}

impl<'a, T: Real> MaskTerm<'a, T> {
    pub(crate) fn new(mesh: &'a TriangleMesh<T>, gt_mask: &InstanceMask, cam: &PinholeCamera<T>, max_side: usize) -> Result<Self> {
        let k = &cam.intrinsics;
        if gt_mask.width() != k.width || gt_mask.height() != k.height {
            return Err(Error::ResolutionMismatch(gt_mask.width(), gt_mask.height(), k.width, k.height));
        }
        if gt_mask.is_empty() {
            return Err(Error::EmptyInput("instance mask has no pixels"));
        }
        // Subsample every `stride`-th pixel center; the reduced camera puts its
        // pixel centers exactly on those, so rasterizing it matches
        // subsampling a full-resolution raster.
        let stride = k.width.max(k.height).div_ceil(max_side.max(1)).max(1);
        let off = stride / 2;
        let w = (k.width - 1 - off) / stride + 1;
        let h = (k.height - 1 - off) / stride + 1;
        let st = T::from_usize_lossy(stride);
        let shift = T::from_usize_lossy(off) + T::lit(0.5);
        let half = T::lit(0.5);
        let small = CameraIntrinsics::new(k.fx / st, k.fy / st, (k.cx - shift) / st + half, (k.cy - shift) / st + half, w, h)?;
        Ok(Self {
            mesh,
            mask: InstanceMask::from_fn(w, h, |u, v| gt_mask.get(u * stride + off, v * stride + off)),
            cam: PinholeCamera::new(small, cam.extrinsic),
        })
    }

    pub(crate) fn render(&self, p: &PoseParams<T>) -> InstanceMask {
        let verts = p.apply_all(self.mesh.vertices());
        rasterize_triangles(&verts, self.mesh.triangles(), &self.cam).mask()
    }

    pub(crate) fn value(&self, p: &PoseParams<T>) -> T {
        T::lit(mask_loss(&self.mask, &self.render(p)).unwrap_or(2.0))
    }

    /// Length of one pixel at the depth of `center` (world point).
    pub(crate) fn pixel_length(&self, center: &Vector3<T>) -> T {
        let z = self.cam.extrinsic.apply(center).z;
        crate::scalar::max(z, T::lit(1e-6)) / self.cam.intrinsics.fx
    }

    /// Central differences over the ten packed parameters with steps of
    /// `pixels` image pixels at the object's depth.
    pub(crate) fn gradient(&self, p: &PoseParams<T>, center_local: &Vector3<T>, radius: T, pixels: f64) -> ParamVector<T> {
        let px = self.pixel_length(&p.apply(center_local)) * T::lit(pixels);
        let r = crate::scalar::max(radius, T::lit(1e-9));
        let base = p.to_vector();
        let mut g = ParamVector::from_fn(|k, _| {
            let h = match k {
                0..=3 => px / (T::lit(2.0) * r),
                4..=6 => px,
                _ => px / r,
            };
            let shifted = |sign: T| {
                let mut v = base;
                v[k] += h * sign;
                PoseParams::from_vector(&v).map(|q| self.value(&q)).unwrap_or(T::lit(2.0))
            };
            (shifted(T::one()) - shifted(-T::one())) / (T::lit(2.0) * h)
        });
        let q = p.quaternion.normalize();
        let gq: Vector4<T> = g.fixed_rows::<4>(0).into_owned();
        g.fixed_rows_mut::<4>(0).copy_from(&(gq - q * gq.dot(&q)));
        g
    }
}

struct RgbdObjective<'a, T: Real> {
    samples: Vec<Vector3<T>>,
    target: &'a [Vector3<T>],
    corr: Correspondences,
    mask: Option<MaskTerm<'a, T>>,
    weight: T,
    center: Vector3<T>,
    radius: T,
    fd_pixels: f64,
}

impl<T: Real> RgbdObjective<'_, T> {
    fn parts(&self, p: &PoseParams<T>) -> (T, Option<T>) {
        let cd = frozen_loss(p, &self.samples, self.target, &self.corr);
        (cd, self.mask.as_ref().map(|m| m.value(p)))
    }
}

impl<T: Real> Objective<T> for RgbdObjective<'_, T> {
    fn refresh(&mut self, p: &PoseParams<T>) -> Result<T> {
        self.corr = Correspondences::nearest(p, &self.samples, self.target, false)?;
        Ok(self.value(p))
    }

    fn value(&self, p: &PoseParams<T>) -> T {
        let (cd, m) = self.parts(p);
        cd + m.map_or(T::zero(), |m| m * self.weight)
    }

    fn gradient(&self, p: &PoseParams<T>) -> ParamVector<T> {
        let mut g = chamfer_gradient(p, &self.samples, self.target, &self.corr);
        if let Some(m) = &self.mask {
            g += m.gradient(p, &self.center, self.radius, self.fd_pixels) * self.weight;
        }
        g
    }

    fn smooth_gradient(&self, p: &PoseParams<T>) -> Option<ParamVector<T>> {
        self.mask.as_ref().map(|_| chamfer_gradient(p, &self.samples, self.target, &self.corr))
    }
}

fn sample_bounds<T: Real>(pts: &[Vector3<T>]) -> (Vector3<T>, Vector3<T>) {
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Derivative-free pattern search over rotation vector, translation and log
/// scale. Gradient steps stall on the plateaus of the silhouette term; probing
/// a few pixels away hops across them. Each sweep tries the coordinate axes,
/// seeded random directions (for coupled moves such as scale against depth)
/// and an extrapolation of the last successful move. Steps start at
/// `START_PIXELS`, halve after every sweep without improvement and double
/// after one with.
fn compass_polish<T: Real>(
    obj: &mut RgbdObjective<'_, T>,
    start: PoseParams<T>,
    cfg: &OptimizerConfig,
) -> Result<(PoseParams<T>, T, usize)> {
    const START_PIXELS: f64 = 8.0;
    const STOP_PIXELS: f64 = 0.01;
    const MAX_SWEEPS: usize = 300;
    let mut p = start;
    let mut cur = obj.refresh(&p)?;
    let Some(mask) = obj.mask.as_ref() else { return Ok((p, cur, 0)) };
    let px = mask.pixel_length(&p.apply(&obj.center));
    let r = crate::scalar::max(obj.radius, T::lit(1e-9));
    let dims = if cfg.optimize_scale { 9 } else { 6 };
    let (lo, hi) = sample_bounds(&obj.samples);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    // Moves are expressed in pixel units at the object's depth.
    let apply = |p: &PoseParams<T>, d: &[f64; 9], h: T| {
        let mut q = *p;
        let w = Vector3::new(T::lit(d[0]), T::lit(d[1]), T::lit(d[2])) * (h / r);
        q.quaternion = Rotation::from_rotation_vector(&w).compose(&p.rotation()).as_vector4();
        q.translation += Vector3::new(T::lit(d[3]), T::lit(d[4]), T::lit(d[5])) * h;
        q.log_scale += Vector3::new(T::lit(d[6]), T::lit(d[7]), T::lit(d[8])) * (h / r);
        q.clamp_scale(cfg.scale_min, cfg.scale_max);
        q
    };
    let mut pixels = START_PIXELS;
    let mut sweeps = 0;
    while pixels >= STOP_PIXELS && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let h = px * T::lit(pixels);
        let mut dirs: Vec<[f64; 9]> = Vec::with_capacity(4 * dims);
        for k in 0..dims {
            for sign in [1.0, -1.0] {
                let mut d = [0.0; 9];
                d[k] = sign;
                dirs.push(d);
            }
        }
        for _ in 0..dims {
            let mut d = [0.0; 9];
            for x in d.iter_mut().take(dims) {
                *x = rng.gen_range(-1.0..1.0);
            }
            let n = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            d.iter_mut().for_each(|x| *x /= n);
            dirs.push(d);
            dirs.push(d.map(|x| -x));
        }
        let before = p;
        let mut improved = false;
        for d in &dirs {
            let q = apply(&p, d, h);
            let v = obj.value(&q);
            if v < cur {
                p = q;
                cur = v;
                improved = true;
            }
        }
        if cfg.optimize_scale {
            // Scale about one face of the bounding box instead of the origin,
            // so the face seen by the camera can stay put.
            for a in 0..3 {
                for anchor in [lo[a], hi[a]] {
                    for sign in [T::one(), -T::one()] {
                        let mut q = p;
                        let dl = sign * h / r;
                        q.log_scale[a] += dl;
                        q.clamp_scale(cfg.scale_min, cfg.scale_max);
                        let s_old = p.scale_factors()[a];
                        let s_new = q.scale_factors()[a];
                        let axis = p.rotation_matrix().column(a).into_owned();
                        q.translation -= axis * ((s_new - s_old) * anchor);
                        let v = obj.value(&q);
                        if v < cur {
                            p = q;
                            cur = v;
                            improved = true;
                        }
                    }
                }
            }
        }
        if improved {
            // Pattern move: keep going in the direction of the sweep's net progress.
            let mut q = PoseParams::from_vector(&(p.to_vector() * T::lit(2.0) - before.to_vector()))?;
            q.clamp_scale(cfg.scale_min, cfg.scale_max);
            let v = obj.value(&q);
            if v < cur {
                p = q;
            }
        }
        cur = obj.refresh(&p)?;
        if improved {
            pixels = (pixels * 2.0).min(START_PIXELS);
        } else {
            pixels *= 0.5;
        }
    }
    Ok((p, cur, sweeps))
}

/// Fits the pose of `source_mesh` to a partial back-projected cloud plus an
/// instance mask seen from `cam`.
///
/// The objective is the target-to-source Chamfer distance plus
/// `cfg.mask_weight` times the mask loss of the rendered silhouette. The
/// mask gradient comes from central differences; a zero weight drops the
/// mask term.
pub fn opt_align_rgbd<T: Real>(
    partial_target: &[Vector3<T>],
    source_mesh: &TriangleMesh<T>,
    gt_mask: &InstanceMask,
    cam: &PinholeCamera<T>,
    init: &PoseParams<T>,
    cfg: &OptimizerConfig,
) -> Result<AlignmentRecord> {
    if partial_target.is_empty() {
        return Err(Error::EmptyInput("partial target cloud"));
    }
    let mask = MaskTerm::new(source_mesh, gt_mask, cam, cfg.mask_resolution)?;
    let samples = sample_mesh_surface(source_mesh, cfg.sample_count, cfg.seed)?.into_points();
    let (center, radius) = cloud_radius(&samples);
    let (_, target_radius) = cloud_radius(partial_target);
    let mut obj = RgbdObjective {
        samples,
        target: partial_target,
        corr: Correspondences::default(),
        mask: (cfg.mask_weight > 0.0).then_some(mask),
        weight: T::lit(cfg.mask_weight),
        center,
        radius,
        fd_pixels: cfg.mask_fd_pixels,
    };
    let scale = crate::scalar::max(crate::scalar::max(target_radius, radius), T::lit(1e-9));
    let mut out = descend(&mut obj, *init, cfg, scale)?;
    if obj.mask.is_some() {
        let (p, loss, sweeps) = compass_polish(&mut obj, out.params, cfg)?;
        if loss < out.loss {
            out.params = p;
            out.loss = loss;
        }
        out.iterations += sweeps;
    }
    obj.refresh(&out.params)?;
    let (cd, m) = obj.parts(&out.params);
    Ok(AlignmentRecord::from_params(
        AlignMethod::OptRgbd,
        &out.params,
        LossBreakdown { chamfer: cd.to_f64_lossy(), mask: m.map(|m| m.to_f64_lossy()), total: out.loss.to_f64_lossy() },
        out.initial_loss.to_f64_lossy(),
        out.iterations,
        out.status,
    ))
}
