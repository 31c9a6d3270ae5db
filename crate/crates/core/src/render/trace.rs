use rayon::prelude::*;

use super::sdf::SceneSdf;
use super::{Camera, Image, LightRig, Pixels, RenderError, RenderMode, RenderedView, SceneBounds};
use crate::math::Vec3;
use crate::scene::{validate, SceneProgram};

const OVER_RELAXATION: f64 = 1.6;

/// Sphere-tracing parameters, all scaled by the scene's bounding radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSettings {
    pub epsilon: f64,
    pub max_steps: usize,
    pub max_distance: f64,
}

impl TraceSettings {
    pub fn for_bounds(bounds: &SceneBounds) -> TraceSettings {
        TraceSettings { epsilon: 1e-4 * bounds.radius, max_steps: 256, max_distance: 8.0 * bounds.radius }
    }
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    t: f64,
    part: usize,
    normal: Vec3,
}

struct Tracer {
    sdf: SceneSdf,
    bounds: SceneBounds,
    settings: TraceSettings,
}

impl Tracer {
    fn new(program: &SceneProgram) -> Result<Tracer, RenderError> {
        if program.parts.is_empty() {
            return Err(RenderError::EmptyScene);
        }
        if let Some(d) = validate(program).first() {
            return Err(RenderError::InvalidScene(d.to_string()));
        }
        let bounds = SceneBounds::of(program)?;
        Ok(Tracer { sdf: SceneSdf::new(program), bounds, settings: TraceSettings::for_bounds(&bounds) })
    }

    fn trace(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        // clip the ray against the bounding sphere
        let oc = origin - self.bounds.center;
        let b = oc.dot(dir);
        let r = self.bounds.radius + 2.0 * self.settings.epsilon;
        let disc = b * b - (oc.norm_squared() - r * r);
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let exit = -b + sq;
        if exit < 0.0 {
            return None;
        }
        let start = (-b - sq).max(0.0);
        let limit = exit.min(start + self.settings.max_distance);
        // over-relaxed marching: steps of ω·d, falling back to a plain step
        // when consecutive unbounding spheres stop overlapping or a step
        // lands inside a part
        let mut t = start;
        let mut omega = OVER_RELAXATION;
        let (mut step, mut prev_radius) = (0.0f64, 0.0f64);
        for _ in 0..self.settings.max_steps {
            let p = origin + dir * t;
            let (d, part) = self.sdf.nearest(&p);
            let radius = d.abs();
            let failed = omega > 1.0 && (d < 0.0 || radius + prev_radius < step);
            if failed {
                step -= omega * step;
                omega = 1.0;
            } else {
                if d < self.settings.epsilon {
                    let normal = self.sdf.normal(part, &p, self.settings.epsilon);
                    return Some(Hit { t, part, normal });
                }
                step = d * omega;
            }
            prev_radius = radius;
            if t + step > limit && omega > 1.0 {
                step /= omega;
                omega = 1.0;
            }
            t += step;
            if t > limit {
                return None;
            }
        }
        None
    }

    fn trace_camera(&self, camera: &Camera) -> Vec<Option<Hit>> {
        let w = camera.width;
        (0..camera.height)
            .into_par_iter()
            .flat_map_iter(|y| {
                (0..w).map(move |x| self.trace(&camera.position, &camera.ray_direction(x, y)))
            })
            .collect()
    }

    fn image(&self, camera: &Camera, hits: &[Option<Hit>], lights: &LightRig, mode: RenderMode) -> Result<Image, RenderError> {
        let pixels = match mode {
            RenderMode::Albedo => Pixels::Rgb(
                hits.iter().map(|h| h.map_or([1.0; 3], |h| self.sdf.parts[h.part].albedo)).collect(),
            ),
            RenderMode::Shaded => Pixels::Rgb(
                hits.iter()
                    .map(|h| match h {
                        None => [1.0; 3],
                        Some(h) => {
                            let albedo = self.sdf.parts[h.part].albedo;
                            let light = lights.ambient
                                + lights
                                    .lights
                                    .iter()
                                    .map(|l| l.intensity * h.normal.dot(&l.direction).max(0.0))
                                    .sum::<f64>();
                            albedo.map(|c| (c * light).clamp(0.0, 1.0))
                        }
                    })
                    .collect(),
            ),
            RenderMode::Depth => Pixels::Depth(hits.iter().map(|h| h.map_or(f64::INFINITY, |h| h.t)).collect()),
            RenderMode::Mask => {
                if self.sdf.parts.len() > 255 {
                    return Err(RenderError::TooManyParts(self.sdf.parts.len()));
                }
                Pixels::Mask(hits.iter().map(|h| h.map_or(0, |h| (h.part + 1) as u8)).collect())
            }
        };
        Ok(Image { width: camera.width, height: camera.height, pixels })
    }
}

/// Renders one view of `program` in the requested mode.
pub fn render(program: &SceneProgram, camera: &Camera, lights: &LightRig, mode: RenderMode) -> Result<Image, RenderError> {
    camera.check()?;
    let tracer = Tracer::new(program)?;
    let hits = tracer.trace_camera(camera);
    tracer.image(camera, &hits, lights, mode)
}

/// Renders every camera in every mode, tracing each camera once.
pub fn render_views(
    program: &SceneProgram,
    cameras: &[Camera],
    lights: &LightRig,
    modes: &[RenderMode],
) -> Result<Vec<RenderedView>, RenderError> {
    let tracer = Tracer::new(program)?;
    let mut out = Vec::with_capacity(cameras.len() * modes.len());
    for camera in cameras {
        camera.check()?;
        let hits = tracer.trace_camera(camera);
        for &mode in modes {
            out.push(RenderedView { camera: camera.clone(), mode, image: tracer.image(camera, &hits, lights, mode)? });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::parse_program;

    fn cam() -> Camera {
        Camera::look_at(Vec3::new(3.0, 0.0, 0.0), Vec3::zeros()).with_resolution(33, 33)
    }

    #[test]
    fn unit_sphere_center_depth() {
        let p = parse_program("part \"s\" { sphere 1 pos [0,0,0] rot [0,0,0] rgb [0.2, 0.4, 0.6] }").unwrap();
        let depth = render(&p, &cam(), &LightRig::flat(), RenderMode::Depth).unwrap();
        let eps = 1e-4;
        let d = depth.depth(16, 16).unwrap();
        assert!((d - 2.0).abs() <= 2.0 * eps, "{d}");
        assert_eq!(depth.depth(0, 0).unwrap(), f64::INFINITY);
        let albedo = render(&p, &cam(), &LightRig::flat(), RenderMode::Albedo).unwrap();
        assert_eq!(albedo.rgb(16, 16).unwrap(), [0.2, 0.4, 0.6]);
        assert_eq!(albedo.rgb(0, 0).unwrap(), [1.0; 3]);
    }

    #[test]
    fn flat_light_shading_equals_albedo() {
        let p = parse_program(
            "part \"a\" { cuboid dims [1,1,1] pos [0,0.8,0] rot [0.3,0.2,0.1] rgb [0.9,0.1,0.3] }
             part \"b\" { torus 0.5 0.2 pos [0,-0.8,0] rot [1,0,0] rgb [0.1,0.8,0.3] }",
        )
        .unwrap();
        let shaded = render(&p, &cam(), &LightRig::flat(), RenderMode::Shaded).unwrap();
        let albedo = render(&p, &cam(), &LightRig::flat(), RenderMode::Albedo).unwrap();
        assert_eq!(shaded, albedo);
    }

    #[test]
    fn shaded_channels_bounded() {
        let p = parse_program("part \"s\" { sphere 1 pos [0,0,0] rot [0,0,0] rgb [1,1,1] }").unwrap();
        let rig = LightRig {
            lights: vec![super::super::DirectionalLight { direction: Vec3::x(), intensity: 5.0 }],
            ambient: 0.5,
        };
        let img = render(&p, &cam(), &rig, RenderMode::Shaded).unwrap();
        let Pixels::Rgb(px) = &img.pixels else { panic!() };
        assert!(px.iter().flatten().all(|c| (0.0..=1.0).contains(c)));
        assert_eq!(img.rgb(16, 16).unwrap(), [1.0; 3]);
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(
            render(&SceneProgram::default(), &cam(), &LightRig::flat(), RenderMode::Mask),
            Err(RenderError::EmptyScene)
        );
        let mut p = parse_program("part \"s\" { sphere 1 pos [0,0,0] rot [0,0,0] }").unwrap();
        p.parts[0].pose.position.x = f64::NAN;
        assert!(matches!(render(&p, &cam(), &LightRig::flat(), RenderMode::Mask), Err(RenderError::InvalidScene(_))));
    }
}
