use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::em::{ContrastMap, Grid2D, Point};
use crate::error::{Error, Result};
use crate::inversion::RoiIndexSet;

/// Planar primitive. Lengths in metres, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Circle { center: Point, radius: f64 },
    Triangle { vertices: [Point; 3] },
    /// Horizontal bar on top of a vertical stem; both `arm_length` long and
    /// `width` wide, the stem centered under the bar. `center` is the
    /// center of the bounding box.
    TShape { center: Point, arm_length: f64, width: f64 },
    /// `major` and `minor` are full axis lengths; `rotation` turns the
    /// major axis away from `x`.
    Ellipse { center: Point, major: f64, minor: f64, rotation: f64 },
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Shape::Circle { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) <= radius,
            Shape::Triangle { vertices: [a, b, c] } => {
                let (d1, d2, d3) = (cross(a, b, p), cross(b, c, p), cross(c, a, p));
                let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
                let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
                !(neg && pos)
            }
            Shape::TShape { center, arm_length, width } => {
                let (x, y) = (p[0] - center[0], p[1] - center[1]);
                let half = 0.5 * arm_length;
                let bar = x.abs() <= half && y <= half && y >= half - width;
                let stem = x.abs() <= 0.5 * width && y.abs() <= half;
                bar || stem
            }
            Shape::Ellipse { center, major, minor, rotation } => {
                let (s, c) = rotation.sin_cos();
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                (u / (0.5 * major)).powi(2) + (v / (0.5 * minor)).powi(2) <= 1.0
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Circle { radius, .. } => PI * radius * radius,
            Shape::Triangle { vertices: [a, b, c] } => 0.5 * cross(a, b, c).abs(),
            Shape::TShape { arm_length, width, .. } => 2.0 * arm_length * width - width * width,
            Shape::Ellipse { major, minor, .. } => PI * 0.25 * major * minor,
        }
    }

    /// `(xmin, ymin, xmax, ymax)`.
    pub fn bbox(&self) -> [f64; 4] {
        match *self {
            Shape::Circle { center, radius } => [center[0] - radius, center[1] - radius, center[0] + radius, center[1] + radius],
            Shape::Triangle { vertices } => {
                let xs = vertices.map(|v| v[0]);
                let ys = vertices.map(|v| v[1]);
                let min = |a: [f64; 3]| a.iter().copied().fold(f64::INFINITY, f64::min);
                let max = |a: [f64; 3]| a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                [min(xs), min(ys), max(xs), max(ys)]
            }
            Shape::TShape { center, arm_length, .. } => {
                let h = 0.5 * arm_length;
                [center[0] - h, center[1] - h, center[0] + h, center[1] + h]
            }
            Shape::Ellipse { center, major, minor, rotation } => {
                let (s, c) = rotation.sin_cos();
                let (a, b) = (0.5 * major, 0.5 * minor);
                let hx = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
                let hy = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
                [center[0] - hx, center[1] - hy, center[0] + hx, center[1] + hy]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub eps_r: f64,
    #[serde(default)]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub side_pixels: usize,
    pub extent_m: f64,
    pub shapes: Vec<ShapeSpec>,
}

/// Rasterized scene: contrast, support and the pixel bounding box of the support.
#[derive(Debug, Clone)]
pub struct Scene {
    pub grid: Grid2D,
    pub contrast: ContrastMap,
    pub support: Vec<usize>,
}

impl Scene {
    pub fn k_true(&self) -> usize {
        self.support.len()
    }

    /// `(row_min, col_min, row_max, col_max)` of the support.
    pub fn support_bbox(&self) -> Option<[usize; 4]> {
        let side = self.grid.side_pixels;
        self.support.iter().fold(None, |acc, &p| {
            let (r, c) = (p / side, p % side);
            Some(match acc {
                None => [r, c, r, c],
                Some([r0, c0, r1, c1]) => [r0.min(r), c0.min(c), r1.max(r), c1.max(c)],
            })
        })
    }
}

/// Equilateral triangle with its centroid at `center`, one vertex up.
pub fn equilateral_triangle(center: Point, area: f64) -> Shape {
    let side = (4.0 * area / 3f64.sqrt()).sqrt();
    let r = side / 3f64.sqrt();
    let v = |angle: f64| [center[0] + r * angle.cos(), center[1] + r * angle.sin()];
    Shape::Triangle { vertices: [v(PI / 2.0), v(PI / 2.0 + 2.0 * PI / 3.0), v(PI / 2.0 + 4.0 * PI / 3.0)] }
}

impl SceneSpec {
    fn on_grid(name: &str, shapes: Vec<ShapeSpec>) -> Self {
        Self { name: name.into(), side_pixels: 36, extent_m: 1.8, shapes }
    }

    /// Disk of radius 0.5 m, eps_r 1.5, at the origin.
    pub fn circle() -> Self {
        Self::on_grid("circle", vec![ShapeSpec { shape: Shape::Circle { center: [0.0, 0.0], radius: 0.5 }, eps_r: 1.5, sigma: 0.0 }])
    }

    /// Equilateral triangle of area 0.65 m^2, eps_r 2.
    pub fn triangle() -> Self {
        Self::on_grid("triangle", vec![ShapeSpec { shape: equilateral_triangle([0.0, 0.0], 0.65), eps_r: 2.0, sigma: 0.0 }])
    }

    /// T of arm length 1.1 m and width 0.24 m, eps_r 1.5. The small offset
    /// from the origin keeps the bar and stem edges off pixel centers.
    pub fn t_shape() -> Self {
        Self::on_grid(
            "t_shape",
            vec![ShapeSpec { shape: Shape::TShape { center: [0.02, 0.005], arm_length: 1.1, width: 0.24 }, eps_r: 1.5, sigma: 0.0 }],
        )
    }

    /// Two 0.12 m x 0.055 m ellipses, eps_r 2, side by side along `x` with
    /// the given center spacing. Major axes run along `y`; centers sit on
    /// pixel centers.
    pub fn ellipses(spacing: f64) -> Self {
        let (cx, cy) = (0.025, 0.025);
        let e = |x: f64| ShapeSpec {
            shape: Shape::Ellipse { center: [x, cy], major: 0.12, minor: 0.055, rotation: PI / 2.0 },
            eps_r: 2.0,
            sigma: 0.0,
        };
        let mut spec = Self::on_grid("ellipses", vec![e(cx - 0.5 * spacing), e(cx + 0.5 * spacing)]);
        spec.name = format!("ellipses_{spacing}");
        spec
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "circle" => Ok(Self::circle()),
            "triangle" => Ok(Self::triangle()),
            "t_shape" => Ok(Self::t_shape()),
            "ellipses" | "ellipses_0.3" => Ok(Self::ellipses(0.3)),
            "ellipses_0.1" => Ok(Self::ellipses(0.1)),
            other => Err(Error::Config(format!("unknown scene '{other}'"))),
        }
    }

    /// Moves every shape by `offset`.
    pub fn translated(mut self, offset: Point) -> Self {
        let mv = |p: &mut Point| {
            p[0] += offset[0];
            p[1] += offset[1];
        };
        for s in &mut self.shapes {
            match &mut s.shape {
                Shape::Circle { center, .. } | Shape::TShape { center, .. } | Shape::Ellipse { center, .. } => mv(center),
                Shape::Triangle { vertices } => vertices.iter_mut().for_each(mv),
            }
        }
        self
    }

    pub fn analytic_area(&self) -> f64 {
        self.shapes.iter().map(|s| s.shape.area()).sum()
    }
}

/// Rasterizes the scene: a pixel belongs to a shape when its center does.
/// Later shapes override earlier ones where they overlap.
pub fn build_scene(spec: &SceneSpec, omega_c: f64) -> Result<Scene> {
    let grid = Grid2D::new(spec.side_pixels, spec.extent_m)?;
    let half = 0.5 * spec.extent_m;
    let n = grid.len();
    let mut eps = vec![1.0; n];
    let mut sigma = vec![0.0; n];
    for (i, s) in spec.shapes.iter().enumerate() {
        let [x0, y0, x1, y1] = s.shape.bbox();
        if x0 < -half || y0 < -half || x1 > half || y1 > half {
            return Err(Error::invalid(format!("shape {i} of '{}' leaves the {} m domain", spec.name, spec.extent_m)));
        }
        for (p, &c) in grid.centers.iter().enumerate() {
            if s.shape.contains(c) {
                eps[p] = s.eps_r;
                sigma[p] = s.sigma;
            }
        }
    }
    let contrast = ContrastMap::from_materials(&grid, eps, sigma, omega_c)?;
    let support = contrast.support();
    Ok(Scene { grid, contrast, support })
}

/// Square ROI side lengths shrinking from `l_max` to `l_min` in `steps` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkSchedule {
    pub l_max: usize,
    pub l_min: usize,
    pub sides: Vec<usize>,
    pub pixel_counts: Vec<usize>,
}

pub fn shrink_schedule(l_max: usize, l_min: usize, steps: usize) -> Result<ShrinkSchedule> {
    if l_min > l_max || l_min == 0 {
        return Err(Error::invalid(format!("need 0 < L_min <= L_max, got {l_min} and {l_max}")));
    }
    if steps < 2 {
        return Err(Error::invalid("schedule needs at least 2 steps"));
    }
    let span = (l_max - l_min) as f64;
    let sides: Vec<usize> = (0..steps).map(|o| (l_max as f64 - o as f64 / (steps - 1) as f64 * span).round() as usize).collect();
    let pixel_counts = sides.iter().map(|s| s * s).collect();
    Ok(ShrinkSchedule { l_max, l_min, sides, pixel_counts })
}

impl ShrinkSchedule {
    /// Squares centered on the support's bounding box, shifted inside the grid.
    pub fn rois(&self, scene: &Scene) -> Result<Vec<RoiIndexSet>> {
        let side = scene.grid.side_pixels;
        let [r0, c0, r1, c1] = scene.support_bbox().ok_or_else(|| Error::EmptyRoi("scene has no scatterer".into()))?;
        let (rc, cc) = (0.5 * (r0 + r1) as f64, 0.5 * (c0 + c1) as f64);
        self.sides
            .iter()
            .map(|&len| {
                if len > side {
                    return Err(Error::invalid(format!("ROI side {len} exceeds grid side {side}")));
                }
                let start = |mid: f64| ((mid - 0.5 * (len as f64 - 1.0)).round().max(0.0) as usize).min(side - len);
                RoiIndexSet::square(side, start(rc), start(cc), len)
            })
            .collect()
    }
}

/// Side of the smallest pixel square holding the support, plus `margin` on each side.
pub fn enclosing_side(scene: &Scene, margin: usize) -> Result<usize> {
    let [r0, c0, r1, c1] = scene.support_bbox().ok_or_else(|| Error::EmptyRoi("scene has no scatterer".into()))?;
    Ok(((r1 - r0).max(c1 - c0) + 1 + 2 * margin).min(scene.grid.side_pixels))
}

/// Floor reported for an exact reconstruction.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// `10 log10(|chi_hat - chi|^2 / |chi|^2)`.
pub fn nmse(chi_hat: &[num_complex::Complex64], chi_true: &[num_complex::Complex64]) -> Result<f64> {
    if chi_hat.len() != chi_true.len() {
        return Err(Error::dim(format!("{} estimates for {} pixels", chi_hat.len(), chi_true.len())));
    }
    let den: f64 = chi_true.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::invalid("true contrast is zero"));
    }
    let num: f64 = chi_hat.iter().zip(chi_true).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(if num == 0.0 { NMSE_FLOOR_DB } else { (10.0 * (num / den).log10()).max(NMSE_FLOOR_DB) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    const OMEGA: f64 = 2.0 * PI * 28e9;

    fn components(scene: &Scene) -> usize {
        let side = scene.grid.side_pixels;
        let mut seen = vec![false; side * side];
        let mask = {
            let mut m = vec![false; side * side];
            scene.support.iter().for_each(|&p| m[p] = true);
            m
        };
        let mut count = 0;
        for &s in &scene.support {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(p) = stack.pop() {
                let (r, c) = (p / side, p % side);
                let nb = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
                for (nr, nc) in nb {
                    if nr < side && nc < side && mask[nr * side + nc] && !seen[nr * side + nc] {
                        seen[nr * side + nc] = true;
                        stack.push(nr * side + nc);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn circle_pixel_count_near_area() {
        let s = build_scene(&SceneSpec::circle(), OMEGA).unwrap();
        let want = PI * 100.0;
        assert!((s.k_true() as f64 - want).abs() <= 0.05 * want, "{}", s.k_true());
        assert!(s.support.iter().all(|&p| (s.contrast.chi[p] - Complex64::new(0.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn large_shapes_rasterize_within_five_percent() {
        for spec in [SceneSpec::circle(), SceneSpec::triangle(), SceneSpec::t_shape()] {
            let s = build_scene(&spec, OMEGA).unwrap();
            let area = s.k_true() as f64 * s.grid.cell_area;
            let want = spec.analytic_area();
            assert!((area - want).abs() <= 0.05 * want, "{}: {area} vs {want}", spec.name);
        }
    }

    #[test]
    fn ellipse_pairs_stay_separate() {
        for spacing in [0.3, 0.1] {
            let s = build_scene(&SceneSpec::ellipses(spacing), OMEGA).unwrap();
            assert_eq!(components(&s), 2, "spacing {spacing}");
            assert_eq!(s.k_true(), 6);
        }
    }

    #[test]
    fn empty_scene_is_vacuum() {
        let spec = SceneSpec { name: "empty".into(), side_pixels: 36, extent_m: 1.8, shapes: vec![] };
        let s = build_scene(&spec, OMEGA).unwrap();
        assert!(s.support.is_empty());
        assert!(s.contrast.chi.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn shape_outside_domain_rejected() {
        let spec = SceneSpec::circle().translated([0.5, 0.0]);
        assert!(build_scene(&spec, OMEGA).is_err());
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(shrink_schedule(36, 20, 5).unwrap().sides, vec![36, 32, 28, 24, 20]);
        assert_eq!(shrink_schedule(36, 22, 2).unwrap().sides, vec![36, 22]);
        assert_eq!(shrink_schedule(36, 22, 8).unwrap().pixel_counts[0], 1296);
        assert!(shrink_schedule(20, 36, 5).is_err());
    }

    #[test]
    fn schedule_squares_cover_centered_support() {
        let s = build_scene(&SceneSpec::circle(), OMEGA).unwrap();
        let l_min = enclosing_side(&s, 1).unwrap();
        assert_eq!(l_min, 22);
        let sched = shrink_schedule(36, l_min, 8).unwrap();
        let rois = sched.rois(&s).unwrap();
        assert_eq!(rois[0].p(), 1296);
        assert_eq!(rois.last().unwrap().p(), 484);
        assert!(s.support.iter().all(|&p| rois.last().unwrap().contains(p)));
    }

    #[test]
    fn nmse_examples() {
        let t = vec![Complex64::new(0.5, 0.1); 4];
        assert_eq!(nmse(&t, &t).unwrap(), NMSE_FLOOR_DB);
        assert!(nmse(&[Complex64::new(0.0, 0.0); 4], &t).unwrap().abs() < 1e-12);
        let d: Vec<_> = t.iter().map(|z| z * 2.0).collect();
        assert!(nmse(&d, &t).unwrap().abs() < 1e-12);
        assert!(nmse(&t, &[Complex64::new(0.0, 0.0); 4]).is_err());
    }
}
