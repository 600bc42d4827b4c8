use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::gaussian::{Gaussian, GaussianId};
use crate::error::{Error, Result};

/// Gaussians closer to the camera than this are culled before sorting.
pub const NEAR_PLANE: f64 = 0.01;

/// Pinhole intrinsics. Pixel `(col, row)` has its centre at `(col + 0.5, row + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub max_range: f64,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        max_range: f64,
    ) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            max_range,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Square pixels, principal point at the image centre.
    pub fn from_hfov(width: usize, height: usize, hfov: f64, max_range: f64) -> Result<Self> {
        if !(hfov > 0.0 && hfov < std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!("hfov {hfov} out of (0, pi)")));
        }
        let f = width as f64 / (2.0 * (hfov / 2.0).tan());
        Self::new(
            f,
            f,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            max_range,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64
            && self.max_range > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid intrinsics {self:?}")))
        }
    }

    /// Single focal length used for radii.
    pub fn focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    pub fn hfov(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.fx)).atan()
    }

    pub fn vfov(&self) -> f64 {
        2.0 * (self.height as f64 / (2.0 * self.fy)).atan()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, uv: &Vector2<f64>) -> bool {
        uv.x >= 0.0 && uv.x < self.width as f64 && uv.y >= 0.0 && uv.y < self.height as f64
    }
}

/// World-from-camera rigid transform. The camera looks along its +z axis,
/// +x to the right of the image and +y down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = Self {
            rotation,
            translation,
        };
        if !pose.is_valid() {
            return Err(Error::InvalidConfig("rotation is not in SO(3)".into()));
        }
        Ok(pose)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_quaternion(translation: Vector3<f64>, w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quaternion::new(w, x, y, z);
        if !(q.norm() > 1e-12) || !q.coords.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("degenerate quaternion".into()));
        }
        let rot = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        Ok(Self {
            rotation: *rot.matrix(),
            translation,
        })
    }

    /// Camera of a ground robot at `(x, y)` with heading `yaw`, mounted level at `height`.
    pub fn from_planar(x: f64, y: f64, yaw: f64, height: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        let forward = Vector3::new(c, s, 0.0);
        let right = Vector3::new(s, -c, 0.0);
        let down = Vector3::new(0.0, 0.0, -1.0);
        Self {
            rotation: Matrix3::from_columns(&[right, down, forward]),
            translation: Vector3::new(x, y, height),
        }
    }

    pub fn is_valid(&self) -> bool {
        let r = &self.rotation;
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9;
        orth && (r.determinant() - 1.0).abs() < 1e-9 && self.translation.iter().all(|v| v.is_finite())
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.translation)
    }

    pub fn to_world(&self, cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * cam + self.translation
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGaussian {
    pub mu2d: Vector2<f64>,
    pub r2d: f64,
    pub depth: f64,
    pub source_id: GaussianId,
}

/// Perspective projection of a Gaussian's mean and radius. `None` when the
/// mean is not in front of the near plane.
pub fn project(
    id: GaussianId,
    g: &Gaussian,
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Option<ProjectedGaussian> {
    let pc = pose.to_camera(&g.mean);
    let depth = pc.z;
    if !(depth > NEAR_PLANE) {
        return None;
    }
    Some(ProjectedGaussian {
        mu2d: Vector2::new(intr.fx * pc.x / depth + intr.cx, intr.fy * pc.y / depth + intr.cy),
        r2d: intr.focal() * g.radius / depth,
        depth,
        source_id: id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn intr100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100, 10.0).unwrap()
    }

    #[test]
    fn principal_point_projection() {
        let g = Gaussian::new(Vector3::new(0.0, 0.0, 2.0), 0.1, 1.0, [1.0; 3]);
        let p = project(7, &g, &Pose::identity(), &intr100()).unwrap();
        assert_relative_eq!(p.mu2d, Vector2::new(50.0, 50.0));
        assert_relative_eq!(p.r2d, 5.0);
        assert_relative_eq!(p.depth, 2.0);
        assert_eq!(p.source_id, 7);
    }

    #[test]
    fn behind_camera_is_culled() {
        let g = Gaussian::new(Vector3::new(0.0, 0.0, -1.0), 0.1, 1.0, [1.0; 3]);
        assert!(project(0, &g, &Pose::identity(), &intr100()).is_none());
        let near = Gaussian::new(Vector3::new(0.0, 0.0, 0.005), 0.1, 1.0, [1.0; 3]);
        assert!(project(0, &near, &Pose::identity(), &intr100()).is_none());
    }

    #[test]
    fn planar_pose_is_rotation_and_looks_along_heading() {
        for yaw in [-3.0, -1.0, 0.0, 0.7, 2.5] {
            let pose = Pose::from_planar(1.0, 2.0, yaw, 0.3);
            assert!(pose.is_valid());
            assert_relative_eq!(pose.forward(), Vector3::new(yaw.cos(), yaw.sin(), 0.0), epsilon = 1e-12);
            // A point straight ahead lands on the principal point.
            let ahead = pose.translation + 3.0 * pose.forward();
            let g = Gaussian::new(ahead, 0.1, 1.0, [1.0; 3]);
            let p = project(0, &g, &pose, &intr100()).unwrap();
            assert_relative_eq!(p.mu2d, Vector2::new(50.0, 50.0), epsilon = 1e-9);
            // Up in the world is up in the image (smaller row).
            let above = Gaussian::new(ahead + Vector3::new(0.0, 0.0, 0.5), 0.1, 1.0, [1.0; 3]);
            assert!(project(0, &above, &pose, &intr100()).unwrap().mu2d.y < 50.0);
        }
    }

    #[test]
    fn quaternion_round_trip() {
        let pose = Pose::from_planar(0.5, -1.0, 0.8, 0.3);
        let q = pose.to_quaternion();
        let back = Pose::from_quaternion(pose.translation, q.w, q.i, q.j, q.k).unwrap();
        assert_relative_eq!(back.rotation, pose.rotation, epsilon = 1e-12);
    }

    #[test]
    fn fov_from_intrinsics() {
        let intr = CameraIntrinsics::from_hfov(64, 64, std::f64::consts::FRAC_PI_2, 5.0).unwrap();
        assert_relative_eq!(intr.fx, 32.0, epsilon = 1e-12);
        assert_relative_eq!(intr.hfov(), std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert!(CameraIntrinsics::new(10.0, 10.0, 0.0, 5.0, 10, 10, 1.0).is_err());
    }
}
