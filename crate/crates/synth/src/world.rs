//! Procedural street geometry and ray casting.
//!
//! World frame matches the camera convention: +x right, +y down, +z along
//! the road. The ground plane sits at `y = camera_height`.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safedrive_core::lanes::LaneColor;
use safedrive_core::Point3D;
use serde::{Deserialize, Serialize};

use crate::spec::{LaneLineSpec, SceneSpec};

pub const SKY: [f32; 3] = [0.55, 0.7, 0.92];
pub const BRICK: [f32; 3] = [0.6, 0.4, 0.32];
pub const END_WALL: [f32; 3] = [0.4, 0.42, 0.5];
pub const YELLOW_PAINT: [f32; 3] = [0.9, 0.75, 0.15];
pub const WHITE_PAINT: [f32; 3] = [0.92, 0.92, 0.9];
const ASPHALT: f32 = 0.3;
const SIDEWALK: f32 = 0.42;

const SLOT_LENGTH: f64 = 2.5;
const PANEL_LENGTH: f64 = 1.5;
const PANEL_OFFSET: f64 = 0.5;
const PANEL_HEIGHT: f64 = 1.5;
const ROW_SPACING: f64 = 2.5;
const FIRST_ROW_ABOVE_GROUND: f64 = 2.9;
const PATCH_CELL: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Surface {
    Ground,
    LeftFacade,
    RightFacade,
    EndWall,
    Sky,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// `None` for sky.
    pub point: Option<Point3D>,
    pub surface: Surface,
    pub color: [f32; 3],
    pub paint: Option<LaneColor>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Patch {
    x0: f64,
    x1: f64,
    z0: f64,
    z1: f64,
    intensity: f32,
}

#[derive(Debug, Clone)]
pub struct World {
    ground_y: f64,
    facade_x: f64,
    facade_top: f64,
    z_start: f64,
    z_end: f64,
    road: (f64, f64),
    lines: Vec<LaneLineSpec>,
    rows: usize,
    slots: usize,
    /// Per side (left, right), `slots * rows` entries of 3x3 cell intensities.
    panels: [Vec<Option<[f32; 9]>>; 2],
    patch_cols: usize,
    patches: Vec<Option<Patch>>,
    texture_seed: u64,
}

/// Stateless lattice hash for procedural texture, uniform in [0, 1).
fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let mut h = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    h = h.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, x: f64, z: f64, scale: f64) -> f64 {
    let (fx, fz) = (x / scale, z / scale);
    let (i, j) = (fx.floor(), fz.floor());
    let (tx, tz) = (fx - i, fz - j);
    let (i, j) = (i as i64, j as i64);
    let a = lattice(seed, i, j);
    let b = lattice(seed, i + 1, j);
    let c = lattice(seed, i, j + 1);
    let d = lattice(seed, i + 1, j + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * tz
}

impl World {
    pub fn generate(spec: &SceneSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let f = &spec.facades;
        let ground_y = spec.camera_height;
        let facade_top = ground_y - f.height_m;
        let mut rows = 0;
        while ground_y - FIRST_ROW_ABOVE_GROUND - ROW_SPACING * rows as f64 - 0.5 * PANEL_HEIGHT >= facade_top {
            rows += 1;
        }
        let slots = ((f.z_end - f.z_start) / SLOT_LENGTH).floor().max(0.0) as usize;
        let mut side = |density: f64| -> Vec<Option<[f32; 9]>> {
            (0..slots * rows)
                .map(|_| {
                    let filled = rng.random_bool(density);
                    let cells: [f32; 9] = std::array::from_fn(|_| rng.random_range(0.05..0.55));
                    filled.then_some(cells)
                })
                .collect()
        };
        let panels = [side(f.density[0]), side(f.density[1])];

        let patch_cols = (2.0 * f.distance_m / PATCH_CELL).ceil() as usize;
        let patch_rows = ((f.z_end - f.z_start) / PATCH_CELL).ceil() as usize;
        let patches = (0..patch_cols * patch_rows)
            .map(|idx| {
                let filled = rng.random_bool(spec.ground_patch_density);
                let (w, l) = (rng.random_range(0.3..1.0), rng.random_range(0.3..1.0));
                let (ox, oz) = (
                    rng.random_range(0.0..PATCH_CELL - w),
                    rng.random_range(0.0..PATCH_CELL - l),
                );
                let intensity = rng.random_range(0.1f32..0.2);
                let x0 = -f.distance_m + (idx % patch_cols) as f64 * PATCH_CELL + ox;
                let z0 = f.z_start + (idx / patch_cols) as f64 * PATCH_CELL + oz;
                filled.then_some(Patch {
                    x0,
                    x1: x0 + w,
                    z0,
                    z1: z0 + l,
                    intensity,
                })
            })
            .collect();

        let road_center = -0.5 * spec.lane_width;
        Self {
            ground_y,
            facade_x: f.distance_m,
            facade_top,
            z_start: f.z_start,
            z_end: f.z_end,
            road: (road_center - spec.lane_width, road_center + spec.lane_width),
            lines: spec.lane_lines.clone(),
            rows,
            slots,
            panels,
            patch_cols,
            patches,
            texture_seed: spec.seed.wrapping_mul(0x2545_F491_4F6C_DD1D),
        }
    }

    fn row_center(&self, row: usize) -> f64 {
        self.ground_y - FIRST_ROW_ABOVE_GROUND - ROW_SPACING * row as f64
    }

    /// Cell intensity of the panel covering facade coordinate (y, z), if any.
    fn panel_at(&self, side: usize, y: f64, z: f64) -> Option<f32> {
        let s = (z - self.z_start) / SLOT_LENGTH;
        if s < 0.0 || s >= self.slots as f64 {
            return None;
        }
        let slot = s as usize;
        let local_z = z - self.z_start - slot as f64 * SLOT_LENGTH - PANEL_OFFSET;
        if !(0.0..PANEL_LENGTH).contains(&local_z) {
            return None;
        }
        for row in 0..self.rows {
            let local_y = y - (self.row_center(row) - 0.5 * PANEL_HEIGHT);
            if (0.0..PANEL_HEIGHT).contains(&local_y) {
                let cells = self.panels[side][slot * self.rows + row]?;
                let cz = ((local_z / PANEL_LENGTH) * 3.0).min(2.0) as usize;
                let cy = ((local_y / PANEL_HEIGHT) * 3.0).min(2.0) as usize;
                return Some(cells[cy * 3 + cz]);
            }
        }
        None
    }

    fn patch_at(&self, x: f64, z: f64) -> Option<f32> {
        let cx = (x + self.facade_x) / PATCH_CELL;
        let cz = (z - self.z_start) / PATCH_CELL;
        if cx < 0.0 || cz < 0.0 || cx >= self.patch_cols as f64 {
            return None;
        }
        let p = self
            .patches
            .get(cz as usize * self.patch_cols + cx as usize)?
            .as_ref()?;
        (x >= p.x0 && x < p.x1 && z >= p.z0 && z < p.z1).then_some(p.intensity)
    }

    pub fn paint_at(&self, x: f64, z: f64) -> Option<LaneColor> {
        self.lines.iter().find(|l| l.contains(x, z)).map(|l| l.color)
    }

    fn ground_color(&self, x: f64, z: f64, erase_paint: bool) -> ([f32; 3], Option<LaneColor>) {
        let paint = self.paint_at(x, z);
        if let (Some(c), false) = (paint, erase_paint) {
            let rgb = match c {
                LaneColor::Yellow => YELLOW_PAINT,
                LaneColor::White => WHITE_PAINT,
            };
            return (rgb, paint);
        }
        let base = if x >= self.road.0 && x <= self.road.1 {
            ASPHALT
        } else {
            SIDEWALK
        };
        let fine = value_noise(self.texture_seed, x, z, 0.08) - 0.5;
        let coarse = value_noise(self.texture_seed ^ 0xA5A5, x, z, 0.35) - 0.5;
        let mut v = base + (0.12 * fine + 0.06 * coarse) as f32;
        if let Some(p) = self.patch_at(x, z) {
            v = p + (0.03 * fine) as f32;
        }
        ([v; 3], if erase_paint { None } else { paint })
    }

    /// First surface hit by the ray `origin + t * dir`, t > 0.
    pub fn trace(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, erase_paint: bool) -> Hit {
        let mut best: Option<(f64, Surface)> = None;
        let mut consider = |t: f64, s: Surface| {
            if t > 1e-9 && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, s));
            }
        };
        if dir.y > 1e-12 {
            consider((self.ground_y - origin.y) / dir.y, Surface::Ground);
        }
        for (sign, surface) in [(-1.0, Surface::LeftFacade), (1.0, Surface::RightFacade)] {
            if dir.x * sign > 1e-12 {
                let t = (sign * self.facade_x - origin.x) / dir.x;
                let p = origin + dir * t;
                if p.y >= self.facade_top && p.y <= self.ground_y && p.z >= self.z_start && p.z <= self.z_end {
                    consider(t, surface);
                }
            }
        }
        if dir.z > 1e-12 {
            let t = (self.z_end - origin.z) / dir.z;
            let p = origin + dir * t;
            if p.y >= self.facade_top && p.y <= self.ground_y && p.x.abs() <= self.facade_x {
                consider(t, Surface::EndWall);
            }
        }
        let Some((t, surface)) = best else {
            return Hit {
                point: None,
                surface: Surface::Sky,
                color: SKY,
                paint: None,
            };
        };
        let p = origin + dir * t;
        let (color, paint) = match surface {
            Surface::Ground => self.ground_color(p.x, p.z, erase_paint),
            Surface::LeftFacade => (self.panel_at(0, p.y, p.z).map_or(BRICK, |v| [v; 3]), None),
            Surface::RightFacade => (self.panel_at(1, p.y, p.z).map_or(BRICK, |v| [v; 3]), None),
            Surface::EndWall => (END_WALL, None),
            Surface::Sky => unreachable!(),
        };
        Hit {
            point: Some(Point3D::from(p)),
            surface,
            color,
            paint,
        }
    }

    /// Corners of every panel cell: exact 3D positions of facade features.
    pub fn panel_corners(&self) -> Vec<Point3D> {
        let mut out = Vec::new();
        for (side, sign) in [(0usize, -1.0), (1, 1.0)] {
            for slot in 0..self.slots {
                for row in 0..self.rows {
                    if self.panels[side][slot * self.rows + row].is_none() {
                        continue;
                    }
                    let z0 = self.z_start + slot as f64 * SLOT_LENGTH + PANEL_OFFSET;
                    let y0 = self.row_center(row) - 0.5 * PANEL_HEIGHT;
                    for i in 0..=3 {
                        for j in 0..=3 {
                            out.push(Point3D::new(
                                sign * self.facade_x,
                                y0 + PANEL_HEIGHT * i as f64 / 3.0,
                                z0 + PANEL_LENGTH * j as f64 / 3.0,
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn ground_y(&self) -> f64 {
        self.ground_y
    }

    pub fn lines(&self) -> &[LaneLineSpec] {
        &self.lines
    }
}
