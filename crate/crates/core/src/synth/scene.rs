use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geom::{PinholeCamera, Pose};
use crate::imgproc::{DepthImage, Image};

use super::SynthError;

/// Smooth trigonometric intensity field over 3D position. Restricted to a
/// surface it yields a C-infinity texture with gradient bounded by
/// `amplitude * (|freq_a| + |freq_b|)`, which keeps finite-difference
/// Jacobian checks meaningful.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Texture {
    pub offset: f64,
    pub amplitude: f64,
    pub freq_a: [f64; 3],
    pub freq_b: [f64; 3],
    #[serde(default)]
    pub phase_a: f64,
    #[serde(default)]
    pub phase_b: f64,
}

impl Texture {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.offset - self.amplitude.abs() < 0.0 || self.offset + self.amplitude.abs() > 1.0 {
            return Err(SynthError::InvalidScene(format!(
                "texture range [{}, {}] escapes [0, 1]",
                self.offset - self.amplitude.abs(),
                self.offset + self.amplitude.abs()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, p: &Vector3<f64>) -> f64 {
        let a = Vector3::from(self.freq_a).dot(p) + self.phase_a;
        let b = Vector3::from(self.freq_b).dot(p) + self.phase_b;
        self.offset + self.amplitude * a.sin() * b.cos()
    }

    /// Spatial gradient of the field, for analytic image-gradient checks.
    pub fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let fa = Vector3::from(self.freq_a);
        let fb = Vector3::from(self.freq_b);
        let a = fa.dot(p) + self.phase_a;
        let b = fb.dot(p) + self.phase_b;
        self.amplitude * (a.cos() * b.cos() * fa - a.sin() * b.sin() * fb)
    }
}

/// Analytic scene primitive. Planes are infinite; spheres are solid shells.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
        texture: Texture,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        texture: Texture,
    },
}

impl Primitive {
    fn texture(&self) -> &Texture {
        match self {
            Primitive::Plane { texture, .. } | Primitive::Sphere { texture, .. } => texture,
        }
    }

    /// Smallest ray parameter t > t_min with origin + t * dir on the surface.
    fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        const T_MIN: f64 = 1e-9;
        match self {
            Primitive::Plane { point, normal, .. } => {
                let n = Vector3::from(*normal);
                let denom = n.dot(dir);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = n.dot(&(Vector3::from(*point) - origin)) / denom;
                (t > T_MIN).then_some(t)
            }
            Primitive::Sphere { center, radius, .. } => {
                let oc = origin - Vector3::from(*center);
                let a = dir.norm_squared();
                let half_b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sqrt_d = disc.sqrt();
                let t0 = (-half_b - sqrt_d) / a;
                let t1 = (-half_b + sqrt_d) / a;
                if t0 > T_MIN {
                    Some(t0)
                } else if t1 > T_MIN {
                    Some(t1)
                } else {
                    None
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub primitives: Vec<Primitive>,
}

impl SyntheticScene {
    pub fn new(primitives: Vec<Primitive>) -> Result<Self, SynthError> {
        if primitives.is_empty() {
            return Err(SynthError::InvalidScene("no primitives".into()));
        }
        for p in &primitives {
            p.texture().validate()?;
            if let Primitive::Sphere { radius, .. } = p {
                if !(*radius > 0.0) {
                    return Err(SynthError::InvalidScene(format!(
                        "sphere radius must be positive, got {radius}"
                    )));
                }
            }
            if let Primitive::Plane { normal, .. } = p {
                if Vector3::from(*normal).norm() < 1e-12 {
                    return Err(SynthError::InvalidScene("plane normal is zero".into()));
                }
            }
        }
        Ok(Self { primitives })
    }
}

/// Ray-cast the scene from a camera at `pose_world` (camera-to-world).
/// Depth is the camera-frame z of the nearest hit; misses get the invalid
/// depth sentinel and zero intensity.
pub fn render(
    scene: &SyntheticScene,
    cam: &PinholeCamera,
    pose_world: &Pose,
) -> (Image, DepthImage) {
    let mut intensity = Image::new(cam.width, cam.height);
    let mut depth = DepthImage::invalid(cam.width, cam.height);
    let origin = *pose_world.translation();
    let rot = *pose_world.rotation();
    for v in 0..cam.height {
        for u in 0..cam.width {
            // Camera-frame ray with unit z, so the hit parameter t equals
            // camera depth.
            let dir_cam = Vector3::new(
                (u as f64 - cam.cx) / cam.fx,
                (v as f64 - cam.cy) / cam.fy,
                1.0,
            );
            let dir_world = rot * dir_cam;
            let mut best: Option<(f64, &Primitive)> = None;
            for prim in &scene.primitives {
                if let Some(t) = prim.intersect(&origin, &dir_world) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, prim));
                    }
                }
            }
            if let Some((t, prim)) = best {
                let hit = origin + t * dir_world;
                intensity.set(u, v, prim.texture().eval(&hit).clamp(0.0, 1.0));
                depth.set(u, v, t);
            }
        }
    }
    (intensity, depth)
}
