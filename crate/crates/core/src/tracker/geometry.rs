//! Back-projection and multi-camera triangulation.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::tracker::{CameraModel, Detection, Support, Target3D, TrackerParams};

/// A world-frame ray with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

/// Ray through a detection's window center: origin at the camera center,
/// direction the normalized world-frame viewing ray.
pub fn back_project(camera: &CameraModel, detection: &Detection) -> Ray {
    let dir_cam = Vector3::new(
        (detection.u - camera.cx) / camera.fx,
        (detection.v - camera.cy) / camera.fy,
        1.0,
    );
    let dir_world = camera.rotation.transpose() * dir_cam;
    Ray {
        origin: camera.center(),
        direction: dir_world.normalize(),
    }
}

/// Closest distance between the two (infinite) lines carrying the rays.
pub fn ray_distance(a: &Ray, b: &Ray) -> f64 {
    let w = b.origin - a.origin;
    let cross = a.direction.cross(&b.direction);
    let denom = cross.norm();
    if denom < 1e-12 {
        // Parallel: distance of the offset orthogonal to the direction.
        (w - a.direction * w.dot(&a.direction)).norm()
    } else {
        (w.dot(&cross) / denom).abs()
    }
}

/// Least-squares point minimizing the summed squared distance to all rays.
fn rays_midpoint(rays: &[Ray]) -> Option<Vector3<f64>> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for ray in rays {
        let proj = Matrix3::identity() - ray.direction * ray.direction.transpose();
        a += proj;
        b += proj * ray.origin;
    }
    a.lu().solve(&b).map(|x| Vector3::from(x))
}

/// Fuse one frame's detections into 3D candidates.
///
/// Cross-camera detection pairs whose ray-to-ray distance is within
/// `eps_3d` are clustered greedily (best pair first, complete linkage, at
/// most one detection per camera). Each cluster's position is the
/// least-squares midpoint of its rays; its height comes from the window
/// sizes via the projection depths. Clusters seen by fewer than two cameras
/// carry no 3D information and are dropped.
pub fn triangulate(
    detections: &[Detection],
    cameras: &[CameraModel],
    params: &TrackerParams,
) -> Result<Vec<Target3D>> {
    let mut camera_ids: Vec<usize> = detections.iter().map(|d| d.camera).collect();
    camera_ids.sort_unstable();
    camera_ids.dedup();
    if camera_ids.len() < 2 {
        return Err(Error::InsufficientCameras {
            found: camera_ids.len(),
        });
    }

    let find_camera = |id: usize| -> Result<&CameraModel> {
        cameras
            .iter()
            .find(|c| c.id == id)
            .ok_or(Error::UnknownCamera(id))
    };

    let rays: Vec<Ray> = detections
        .iter()
        .map(|d| Ok(back_project(find_camera(d.camera)?, d)))
        .collect::<Result<_>>()?;

    // All admissible cross-camera pairs, best first.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..detections.len() {
        for j in (i + 1)..detections.len() {
            if detections[i].camera == detections[j].camera {
                continue;
            }
            let dist = ray_distance(&rays[i], &rays[j]);
            if dist <= params.eps_3d {
                pairs.push((dist, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut cluster_of: Vec<Option<usize>> = vec![None; detections.len()];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    // Complete linkage, one detection per camera.
    let compatible = |cluster: &[usize], det: usize| -> bool {
        cluster.iter().all(|&m| {
            detections[m].camera != detections[det].camera
                && ray_distance(&rays[m], &rays[det]) <= params.eps_3d
        })
    };
    for (_, i, j) in pairs {
        match (cluster_of[i], cluster_of[j]) {
            (None, None) => {
                cluster_of[i] = Some(clusters.len());
                cluster_of[j] = Some(clusters.len());
                clusters.push(vec![i, j]);
            }
            (Some(c), None) => {
                if compatible(&clusters[c], j) {
                    cluster_of[j] = Some(c);
                    clusters[c].push(j);
                }
            }
            (None, Some(c)) => {
                if compatible(&clusters[c], i) {
                    cluster_of[i] = Some(c);
                    clusters[c].push(i);
                }
            }
            (Some(_), Some(_)) => {}
        }
    }

    let mut targets = Vec::new();
    for members in &mut clusters {
        members.sort_unstable();
        let cluster_rays: Vec<Ray> = members.iter().map(|&m| rays[m]).collect();
        let Some(position) = rays_midpoint(&cluster_rays) else {
            log::warn!("degenerate ray cluster skipped ({} rays)", cluster_rays.len());
            continue;
        };
        let mut support = Vec::with_capacity(members.len());
        let mut height_sum = 0.0;
        let mut height_n = 0usize;
        for &m in members.iter() {
            let det = &detections[m];
            let cam = find_camera(det.camera)?;
            support.push(Support {
                camera: det.camera,
                detection: m,
                size: det.size,
            });
            let depth = (cam.rotation * position + cam.translation).z;
            if depth > 1e-6 {
                height_sum += det.size * depth / cam.fy;
                height_n += 1;
            }
        }
        if height_n == 0 {
            log::warn!("cluster behind all cameras skipped");
            continue;
        }
        support.sort_by_key(|s| s.camera);
        targets.push(Target3D {
            position,
            height: height_sum / height_n as f64,
            support,
        });
    }

    // Deterministic candidate order: by earliest supporting detection.
    targets.sort_by_key(|t| t.support.iter().map(|s| s.detection).min().unwrap_or(usize::MAX));
    Ok(targets)
}
