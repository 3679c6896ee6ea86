//! Indoor simulation scenarios: room, ceiling-mounted LIS, active users and
//! passive elements.
//!
//! The defaults reproduce the reference indoor setup (10.36 m square room, 8 m
//! ceiling, 259 x 259 elements at half-wavelength spacing, 9 users, 3 metal
//! cylinders and 10 humans). [`scaled_scenario`] shrinks the LIS and the room
//! together for desk-scale experiments.
//!
//! Conventions:
//! - the LIS grid is centered on the room ceiling; element `(i, j)` has flat
//!   index `n = j * n_x + i` and sits at `origin + (i, j) * spacing`;
//! - a passive element reflects from its footprint centroid at half its height,
//!   which is what [`PassiveElement::position`] stores;
//! - power quantities convert as `10^(dB / 10)`; reflection losses are stored as
//!   linear power ratios.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Side length of the reference room, meters.
pub const REFERENCE_ROOM_SIDE: f64 = 10.36;
/// Attempts per entity before placement gives up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub size_x: f64,
    pub size_y: f64,
    pub size_z: f64,
}

impl Room {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("room.size_x", self.size_x),
            ("room.size_y", self.size_y),
            ("room.size_z", self.size_z),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0.0..=self.size_x).contains(&p[0])
            && (0.0..=self.size_y).contains(&p[1])
            && (0.0..=self.size_z).contains(&p[2])
    }
}

/// Uniform planar array on the ceiling. Pixels of every radio map coincide with its elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LisArray {
    pub n_x: usize,
    pub n_y: usize,
    pub spacing: f64,
    pub height_z: f64,
    /// (x, y) of element (0, 0).
    pub origin: [f64; 2],
}

impl LisArray {
    /// Array centered on the ceiling of `room`.
    pub fn centered(room: &Room, n_x: usize, n_y: usize, spacing: f64) -> Self {
        let origin = [
            room.size_x / 2.0 - (n_x as f64 - 1.0) / 2.0 * spacing,
            room.size_y / 2.0 - (n_y as f64 - 1.0) / 2.0 * spacing,
        ];
        LisArray {
            n_x,
            n_y,
            spacing,
            height_z: room.size_z,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, room: &Room) -> Result<()> {
        if self.n_x == 0 || self.n_y == 0 {
            return Err(Error::invalid("lis.n_x/n_y", "must be >= 1"));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::invalid("lis.spacing", "must be > 0"));
        }
        let eps = 1e-9;
        if self.n_x as f64 * self.spacing > room.size_x + self.spacing + eps
            || self.n_y as f64 * self.spacing > room.size_y + self.spacing + eps
        {
            return Err(Error::invalid("lis", "array is larger than the room"));
        }
        Ok(())
    }

    /// Physical position of grid element (i, j).
    pub fn grid_position(&self, i: usize, j: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing,
            self.origin[1] + j as f64 * self.spacing,
            self.height_z,
        ]
    }

    pub fn element_position(&self, n: usize) -> Result<[f64; 3]> {
        if n >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            });
        }
        Ok(self.grid_position(n % self.n_x, n / self.n_x))
    }

    /// Fractional grid coordinates (column, row) to world (x, y).
    pub fn grid_to_world(&self, gx: f64, gy: f64) -> [f64; 2] {
        [
            self.origin[0] + gx * self.spacing,
            self.origin[1] + gy * self.spacing,
        ]
    }

    /// Nearest grid cell (column, row) to a world (x, y), clamped to the grid.
    pub fn nearest_cell(&self, x: f64, y: f64) -> (usize, usize) {
        let clamp = |v: f64, n: usize| v.round().clamp(0.0, (n - 1) as f64) as usize;
        (
            clamp((x - self.origin[0]) / self.spacing, self.n_x),
            clamp((y - self.origin[1]) / self.spacing, self.n_y),
        )
    }

    pub fn nearest_index(&self, x: f64, y: f64) -> usize {
        let (i, j) = self.nearest_cell(x, y);
        j * self.n_x + i
    }
}

/// Position of LIS element `n`. See [`LisArray::element_position`].
pub fn element_position(lis: &LisArray, n: usize) -> Result<[f64; 3]> {
    lis.element_position(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveUser {
    pub position: [f64; 3],
    /// Uplink transmit power, linear mW.
    pub tx_power_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeClass {
    MetalObject,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Footprint {
    Cylinder { radius: f64 },
    Rectangle { dx: f64, dy: f64 },
}

impl Footprint {
    /// Half extents of the axis-aligned bounding box.
    pub fn half_extent(&self) -> [f64; 2] {
        match *self {
            Footprint::Cylinder { radius } => [radius, radius],
            Footprint::Rectangle { dx, dy } => [dx / 2.0, dy / 2.0],
        }
    }

    fn scaled(self, s: f64) -> Self {
        match self {
            Footprint::Cylinder { radius } => Footprint::Cylinder { radius: radius * s },
            Footprint::Rectangle { dx, dy } => Footprint::Rectangle {
                dx: dx * s,
                dy: dy * s,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassiveElement {
    /// Reflection point: footprint centroid at half height.
    pub position: [f64; 3],
    pub class: PeClass,
    /// Linear power ratio in (0, 1].
    pub reflection_loss: f64,
    pub footprint: Footprint,
    pub height: f64,
}

impl PassiveElement {
    pub fn xy(&self) -> [f64; 2] {
        [self.position[0], self.position[1]]
    }

    pub fn overlaps(&self, other: &PassiveElement) -> bool {
        footprints_overlap(self.xy(), self.footprint, other.xy(), other.footprint)
    }

    pub fn covers(&self, p: [f64; 2]) -> bool {
        let c = self.xy();
        match self.footprint {
            Footprint::Cylinder { radius } => (p[0] - c[0]).hypot(p[1] - c[1]) <= radius,
            Footprint::Rectangle { dx, dy } => {
                (p[0] - c[0]).abs() <= dx / 2.0 && (p[1] - c[1]).abs() <= dy / 2.0
            }
        }
    }
}

fn footprints_overlap(a: [f64; 2], fa: Footprint, b: [f64; 2], fb: Footprint) -> bool {
    use Footprint::*;
    match (fa, fb) {
        (Cylinder { radius: ra }, Cylinder { radius: rb }) => {
            (a[0] - b[0]).hypot(a[1] - b[1]) < ra + rb
        }
        (Rectangle { dx: ax, dy: ay }, Rectangle { dx: bx, dy: by }) => {
            (a[0] - b[0]).abs() < (ax + bx) / 2.0 && (a[1] - b[1]).abs() < (ay + by) / 2.0
        }
        (Cylinder { radius }, Rectangle { dx, dy }) => circle_rect(a, radius, b, dx, dy),
        (Rectangle { dx, dy }, Cylinder { radius }) => circle_rect(b, radius, a, dx, dy),
    }
}

fn circle_rect(c: [f64; 2], r: f64, rc: [f64; 2], dx: f64, dy: f64) -> bool {
    let qx = c[0].clamp(rc[0] - dx / 2.0, rc[0] + dx / 2.0);
    let qy = c[1].clamp(rc[1] - dy / 2.0, rc[1] + dy / 2.0);
    (c[0] - qx).hypot(c[1] - qy) < r
}

/// A complete, immutable simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub room: Room,
    pub lis: LisArray,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
    /// Receiver noise power per element, linear mW.
    pub noise_power_mw: f64,
    pub aus: Vec<ActiveUser>,
    pub pes: Vec<PassiveElement>,
    #[serde(with = "rng::seed_serde")]
    pub rng_seed: u64,
}

impl Scenario {
    pub fn n_elements(&self) -> usize {
        self.lis.len()
    }

    pub fn k(&self) -> usize {
        self.aus.len()
    }

    pub fn humans(&self) -> impl Iterator<Item = &PassiveElement> {
        self.pes.iter().filter(|p| p.class == PeClass::Human)
    }

    pub fn objects(&self) -> impl Iterator<Item = &PassiveElement> {
        self.pes.iter().filter(|p| p.class == PeClass::MetalObject)
    }

    /// Ground-truth (x, y) of every human, meters.
    pub fn human_positions(&self) -> Vec<[f64; 2]> {
        self.humans().map(|p| p.xy()).collect()
    }

    pub fn object_positions(&self) -> Vec<[f64; 2]> {
        self.objects().map(|p| p.xy()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.lis.validate(&self.room)?;
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be > 0"));
        }
        if !(self.noise_power_mw.is_finite() && self.noise_power_mw >= 0.0) {
            return Err(Error::invalid("noise_power_mw", "must be >= 0"));
        }
        for (k, au) in self.aus.iter().enumerate() {
            if !self.room.contains(au.position) {
                return Err(Error::invalid(
                    "aus",
                    format!("user {k} lies outside the room"),
                ));
            }
            if !(au.tx_power_mw.is_finite() && au.tx_power_mw > 0.0) {
                return Err(Error::invalid("aus.tx_power_mw", "must be > 0"));
            }
            if au.position[2] >= self.lis.height_z {
                return Err(Error::invalid(
                    "aus",
                    format!("user {k} is not below the LIS"),
                ));
            }
        }
        for (r, pe) in self.pes.iter().enumerate() {
            if !self.room.contains(pe.position) {
                return Err(Error::invalid(
                    "pes",
                    format!("element {r} lies outside the room"),
                ));
            }
            if !(pe.reflection_loss > 0.0 && pe.reflection_loss <= 1.0) {
                return Err(Error::invalid(
                    "pes.reflection_loss",
                    format!("element {r}: {} not in (0, 1]", pe.reflection_loss),
                ));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format {
            kind: "scenario",
            reason: e.to_string(),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Format {
            kind: "scenario",
            reason: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }
}

/// Generator parameters. Defaults are the reference indoor setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub room: Room,
    pub n_x: usize,
    pub n_y: usize,
    pub wavelength: f64,
    pub au_height: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub k_aus: usize,
    pub r_obj: usize,
    pub r_hum: usize,
    pub object_radius: f64,
    pub object_height: f64,
    /// Human footprint (dx, dy), meters.
    pub human_size: [f64; 2],
    pub human_height: f64,
    /// Uniform draw range in dB, `[low, high]`.
    pub object_loss_db: [f64; 2],
    pub human_loss_db: [f64; 2],
    /// Minimum distance between any footprint (or user) and the walls.
    pub wall_margin: f64,
    /// Multiplier applied to every footprint.
    pub footprint_scale: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            room: Room {
                size_x: REFERENCE_ROOM_SIDE,
                size_y: REFERENCE_ROOM_SIDE,
                size_z: 8.0,
            },
            n_x: 259,
            n_y: 259,
            wavelength: 0.08,
            au_height: 1.8,
            tx_power_dbm: 20.0,
            noise_power_dbm: -97.0,
            k_aus: 9,
            r_obj: 3,
            r_hum: 10,
            object_radius: 0.43,
            object_height: 2.0,
            human_size: [0.5, 0.3],
            human_height: 1.7,
            object_loss_db: [-15.0, -10.0],
            human_loss_db: [-75.0, -30.0],
            wall_margin: 0.5,
            footprint_scale: 1.0,
        }
    }
}

impl ScenarioParams {
    /// Desk-scale variant: `n_side x n_side` elements, room side `n_side * spacing`.
    pub fn scaled(n_side: usize, k_aus: usize, r_obj: usize, r_hum: usize) -> Result<Self> {
        if n_side < 8 {
            return Err(Error::invalid(
                "n_side",
                format!("must be >= 8, got {n_side}"),
            ));
        }
        let base = ScenarioParams::default();
        let side = n_side as f64 * base.wavelength / 2.0;
        Ok(ScenarioParams {
            room: Room {
                size_x: side,
                size_y: side,
                ..base.room
            },
            n_x: n_side,
            n_y: n_side,
            k_aus,
            r_obj,
            r_hum,
            wall_margin: base.wall_margin.min(0.2 * side),
            footprint_scale: (side / REFERENCE_ROOM_SIDE).min(1.0),
            ..base
        })
    }

    pub fn spacing(&self) -> f64 {
        self.wavelength / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::invalid("wavelength", "must be > 0"));
        }
        if !(self.au_height > 0.0 && self.au_height < self.room.size_z) {
            return Err(Error::invalid(
                "au_height",
                "must lie strictly inside the room",
            ));
        }
        for (name, [lo, hi]) in [
            ("object_loss_db", self.object_loss_db),
            ("human_loss_db", self.human_loss_db),
        ] {
            if !(lo <= hi && hi <= 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("need low <= high <= 0 dB, got [{lo}, {hi}]"),
                ));
            }
        }
        if !(self.footprint_scale > 0.0) {
            return Err(Error::invalid("footprint_scale", "must be > 0"));
        }
        if !(self.wall_margin >= 0.0) {
            return Err(Error::invalid("wall_margin", "must be >= 0"));
        }
        LisArray::centered(&self.room, self.n_x, self.n_y, self.spacing()).validate(&self.room)
    }

    /// Draws a scenario. Placement and reflection losses use independent streams
    /// derived from `seed`, so they can be varied separately.
    pub fn generate(&self, seed: u64) -> Result<Scenario> {
        self.generate_with(
            seed,
            rng::derive_seed(seed, stream::PLACEMENT, 0),
            rng::derive_seed(seed, stream::REFLECTION, 0),
        )
    }

    /// As [`generate`](Self::generate) with explicit stream seeds. `record_seed`
    /// is stored as the scenario's identity.
    ///
    /// Passive elements are drawn before users, so for a fixed placement seed
    /// changing `k_aus` leaves the PE layout untouched.
    pub fn generate_with(
        &self,
        record_seed: u64,
        placement_seed: u64,
        reflection_seed: u64,
    ) -> Result<Scenario> {
        self.validate()?;
        let spacing = self.spacing();
        let lis = LisArray::centered(&self.room, self.n_x, self.n_y, spacing);
        let mut place = rng::rng_from_seed(placement_seed);
        let mut refl = rng::rng_from_seed(reflection_seed);

        let obj_fp = Footprint::Cylinder {
            radius: self.object_radius,
        }
        .scaled(self.footprint_scale);
        let hum_fp = Footprint::Rectangle {
            dx: self.human_size[0],
            dy: self.human_size[1],
        }
        .scaled(self.footprint_scale);

        let mut pes: Vec<PassiveElement> = Vec::with_capacity(self.r_obj + self.r_hum);
        let specs = std::iter::repeat_n(
            (PeClass::MetalObject, obj_fp, self.object_height),
            self.r_obj,
        )
        .chain(std::iter::repeat_n(
            (PeClass::Human, hum_fp, self.human_height),
            self.r_hum,
        ));
        for (idx, (class, footprint, height)) in specs.enumerate() {
            let he = footprint.half_extent();
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let Some(xy) = self.draw_xy(&mut place, he) else {
                    break;
                };
                let cand = PassiveElement {
                    position: [xy[0], xy[1], height / 2.0],
                    class,
                    reflection_loss: 1.0,
                    footprint,
                    height,
                };
                if pes.iter().all(|p| !p.overlaps(&cand)) {
                    placed = Some(cand);
                    break;
                }
            }
            match placed {
                Some(p) => pes.push(p),
                None => {
                    return Err(Error::Placement {
                        what: format!("passive element {idx} ({class:?})"),
                        attempts: MAX_PLACEMENT_ATTEMPTS,
                    })
                }
            }
        }

        let tx_power_mw = db_to_linear(self.tx_power_dbm);
        let mut aus = Vec::with_capacity(self.k_aus);
        for k in 0..self.k_aus {
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let Some(xy) = self.draw_xy(&mut place, [0.0, 0.0]) else {
                    break;
                };
                if pes.iter().all(|p| !p.covers(xy)) {
                    placed = Some(xy);
                    break;
                }
            }
            let xy = placed.ok_or_else(|| Error::Placement {
                what: format!("active user {k}"),
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })?;
            aus.push(ActiveUser {
                position: [xy[0], xy[1], self.au_height],
                tx_power_mw,
            });
        }

        for pe in &mut pes {
            let [lo, hi] = match pe.class {
                PeClass::MetalObject => self.object_loss_db,
                PeClass::Human => self.human_loss_db,
            };
            let db = if lo < hi {
                refl.random_range(lo..=hi)
            } else {
                lo
            };
            pe.reflection_loss = db_to_linear(db);
        }

        let scenario = Scenario {
            room: self.room,
            lis,
            wavelength: self.wavelength,
            noise_power_mw: db_to_linear(self.noise_power_dbm),
            aus,
            pes,
            rng_seed: record_seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Uniform (x, y) such that a box of the given half extents stays inside
    /// the wall margin. `None` if no such position exists.
    fn draw_xy<R: Rng>(&self, rng: &mut R, half_extent: [f64; 2]) -> Option<[f64; 2]> {
        let m = self.wall_margin;
        let lo_x = m + half_extent[0];
        let hi_x = self.room.size_x - m - half_extent[0];
        let lo_y = m + half_extent[1];
        let hi_y = self.room.size_y - m - half_extent[1];
        if lo_x > hi_x || lo_y > hi_y {
            return None;
        }
        Some([rng.random_range(lo_x..=hi_x), rng.random_range(lo_y..=hi_y)])
    }
}

/// Reference indoor scenario with placements drawn from `seed`.
pub fn default_scenario(seed: u64) -> Result<Scenario> {
    ScenarioParams::default().generate(seed)
}

/// Desk-scale scenario with an `n_side x n_side` LIS covering a `n_side * λ/2` room.
pub fn scaled_scenario(
    seed: u64,
    n_side: usize,
    k_aus: usize,
    r_obj: usize,
    r_hum: usize,
) -> Result<Scenario> {
    ScenarioParams::scaled(n_side, k_aus, r_obj, r_hum)?.generate(seed)
}
