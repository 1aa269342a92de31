//! Image-method ray tracing of specular boundary reflections in a box room.
//!
//! The room is the axis-aligned box `[0, length] x [0, width] x [0, height]`.
//! Each reflecting boundary is one of its six faces. For a surface sequence
//! `s1..sR` the transmitter is mirrored successively across `s1..sR`; the
//! reflection points are recovered backwards from the receiver and the path
//! is kept only if every segment crosses its surface inside the face.

use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioKind;
use crate::{distance_to_ns, lin_to_db, wrap_deg, Error, Result};

/// Tolerance on face extents and segment parameters, metres.
const EXTENT_TOL: f64 = 1e-9;

pub type Point3 = [f64; 3];

/// One boundary face of the box room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    /// Wall at x = 0.
    WallX0,
    /// Wall at x = length.
    WallX1,
    /// Wall at y = 0.
    WallY0,
    /// Wall at y = width.
    WallY1,
    /// z = 0
    Floor,
    /// z = height
    Ceiling,
}

impl Surface {
    pub const ALL: [Surface; 6] = [
        Surface::WallX0,
        Surface::WallX1,
        Surface::WallY0,
        Surface::WallY1,
        Surface::Floor,
        Surface::Ceiling,
    ];
    pub const WALLS: [Surface; 4] = [Surface::WallX0, Surface::WallX1, Surface::WallY0, Surface::WallY1];

    /// Normal axis (0 = x, 1 = y, 2 = z).
    pub fn axis(self) -> usize {
        match self {
            Surface::WallX0 | Surface::WallX1 => 0,
            Surface::WallY0 | Surface::WallY1 => 1,
            Surface::Floor | Surface::Ceiling => 2,
        }
    }

    /// Plane offset along [`Surface::axis`].
    pub fn offset(self, dims: Point3) -> f64 {
        match self {
            Surface::WallX0 | Surface::WallY0 | Surface::Floor => 0.0,
            Surface::WallX1 => dims[0],
            Surface::WallY1 => dims[1],
            Surface::Ceiling => dims[2],
        }
    }

    pub fn mirror(self, p: Point3, dims: Point3) -> Point3 {
        let mut q = p;
        let a = self.axis();
        q[a] = 2.0 * self.offset(dims) - p[a];
        q
    }

    /// Whether `p` (assumed on the plane) lies inside the face rectangle.
    fn contains(self, p: Point3, dims: Point3) -> bool {
        let a = self.axis();
        (0..3)
            .filter(|&k| k != a)
            .all(|k| p[k] >= -EXTENT_TOL && p[k] <= dims[k] + EXTENT_TOL)
    }
}

/// Rectangular room with a transmitter and a receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomGeometry {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub tx_pos: Point3,
    pub rx_pos: Point3,
    pub active_surfaces: Vec<Surface>,
    pub max_reflection_order: usize,
}

impl RoomGeometry {
    pub fn dims(&self) -> Point3 {
        [self.length, self.width, self.height]
    }

    pub fn distance(&self) -> f64 {
        norm(sub(self.rx_pos, self.tx_pos))
    }

    /// Azimuth (deg, room frame) of the direction from Rx towards Tx.
    pub fn los_arrival_az(&self) -> f64 {
        let v = sub(self.tx_pos, self.rx_pos);
        wrap_deg(v[1].atan2(v[0]).to_degrees())
    }

    fn inside(&self, p: Point3) -> bool {
        let d = self.dims();
        (0..3).all(|k| p[k] > 0.0 && p[k] < d[k])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::DegenerateGeometry("room dimensions must be positive".into()));
        }
        if !self.inside(self.tx_pos) {
            return Err(Error::DegenerateGeometry("tx outside the room".into()));
        }
        if !self.inside(self.rx_pos) {
            return Err(Error::DegenerateGeometry("rx outside the room".into()));
        }
        if self.distance() <= 0.0 {
            return Err(Error::DegenerateGeometry("tx and rx coincide".into()));
        }
        Ok(())
    }

    /// Default room and link for a scenario. For the office scenarios only
    /// the Tx-Rx separation is used, since nothing is traced there.
    pub fn preset(kind: ScenarioKind) -> Self {
        DropLayout::preset(kind).geometry_at(DropLayout::preset(kind).typical_rx)
    }
}

/// One traced propagation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedPath {
    /// ns
    pub toa: f64,
    /// Unfolded path length, m.
    pub length: f64,
    /// Azimuth of arrival at Rx, deg in [0, 360), room frame.
    pub aoa_az: f64,
    pub aoa_el: f64,
    /// Unit vector of departure at Tx.
    pub aod: Point3,
    pub reflection_order: usize,
    pub surfaces_hit: Vec<Surface>,
    /// Reflection points in propagation order.
    pub points: Vec<Point3>,
}

impl TracedPath {
    /// Amplitude gain `10^(-rl/20) / (4 pi f tau)` at `f_ghz`.
    pub fn gain(&self, f_ghz: f64, rl_db: f64) -> Result<f64> {
        path_gain(self, f_ghz, rl_db)
    }
}

/// Amplitude gain of a traced path at `f_ghz` given an aggregate reflection loss in dB.
pub fn path_gain(path: &TracedPath, f_ghz: f64, rl_db: f64) -> Result<f64> {
    friis_amplitude(path.toa, f_ghz, rl_db)
}

pub(crate) fn friis_amplitude(toa_ns: f64, f_ghz: f64, rl_db: f64) -> Result<f64> {
    if !(toa_ns > 0.0) {
        return Err(Error::param("toa", "must be > 0"));
    }
    if !(f_ghz > 0.0) {
        return Err(Error::param("f", "must be > 0"));
    }
    // GHz * ns cancels the 1e9 factors
    Ok(10f64.powf(-rl_db / 20.0) / (4.0 * std::f64::consts::PI * f_ghz * toa_ns))
}

/// Trace LoS plus every valid reflection path of order `1..=order_max`,
/// sorted by ToA.
pub fn trace(geom: &RoomGeometry, order_max: usize) -> Result<Vec<TracedPath>> {
    geom.validate()?;
    let dims = geom.dims();
    let mut surfaces = geom.active_surfaces.clone();
    surfaces.sort();
    surfaces.dedup();

    let mut out = vec![los_path(geom)];
    let mut seq: Vec<Surface> = Vec::with_capacity(order_max);
    let mut images: Vec<Point3> = Vec::with_capacity(order_max + 1);
    images.push(geom.tx_pos);
    extend(geom, dims, &surfaces, order_max, &mut seq, &mut images, &mut out);

    out.sort_by(|a, b| {
        a.toa
            .total_cmp(&b.toa)
            .then_with(|| a.reflection_order.cmp(&b.reflection_order))
            .then_with(|| a.surfaces_hit.cmp(&b.surfaces_hit))
    });
    Ok(out)
}

fn extend(
    geom: &RoomGeometry,
    dims: Point3,
    surfaces: &[Surface],
    order_max: usize,
    seq: &mut Vec<Surface>,
    images: &mut Vec<Point3>,
    out: &mut Vec<TracedPath>,
) {
    if seq.len() == order_max {
        return;
    }
    for &s in surfaces {
        if seq.last() == Some(&s) {
            continue;
        }
        let img = s.mirror(*images.last().unwrap(), dims);
        seq.push(s);
        images.push(img);
        if let Some(p) = realize(geom, dims, seq, images) {
            out.push(p);
        }
        extend(geom, dims, surfaces, order_max, seq, images, out);
        seq.pop();
        images.pop();
    }
}

fn los_path(geom: &RoomGeometry) -> TracedPath {
    let v = sub(geom.rx_pos, geom.tx_pos);
    let length = norm(v);
    let (az, el) = direction_angles(sub(geom.tx_pos, geom.rx_pos));
    TracedPath {
        toa: distance_to_ns(length),
        length,
        aoa_az: az,
        aoa_el: el,
        aod: scale(v, 1.0 / length),
        reflection_order: 0,
        surfaces_hit: Vec::new(),
        points: Vec::new(),
    }
}

/// Recover reflection points for the sequence; `None` if any segment misses its face.
fn realize(geom: &RoomGeometry, dims: Point3, seq: &[Surface], images: &[Point3]) -> Option<TracedPath> {
    let order = seq.len();
    let mut points = vec![[0.0; 3]; order];
    let mut target = geom.rx_pos;
    for k in (0..order).rev() {
        let s = seq[k];
        let src = images[k + 1];
        let a = s.axis();
        let plane = s.offset(dims);
        let denom = target[a] - src[a];
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = (plane - src[a]) / denom;
        if !(t > EXTENT_TOL && t < 1.0 - EXTENT_TOL) {
            return None;
        }
        let mut p = add(src, scale(sub(target, src), t));
        p[a] = plane;
        if !s.contains(p, dims) {
            return None;
        }
        points[k] = p;
        target = p;
    }
    // the first leg must actually leave Tx towards the first point inside the room
    let length = norm(sub(geom.rx_pos, images[order]));
    let first = sub(points[0], geom.tx_pos);
    let first_len = norm(first);
    if first_len < EXTENT_TOL {
        return None;
    }
    let (az, el) = direction_angles(sub(points[order - 1], geom.rx_pos));
    Some(TracedPath {
        toa: distance_to_ns(length),
        length,
        aoa_az: az,
        aoa_el: el,
        aod: scale(first, 1.0 / first_len),
        reflection_order: order,
        surfaces_hit: seq.to_vec(),
        points,
    })
}

/// Path lengths: LoS `L`, specular reflection off a parallel plane at `L_r` from Tx.
/// Returns `(delta_L [m], delta_phi [deg])`.
pub fn hallway_geometry_check(l_los: f64, l_r: f64) -> Result<(f64, f64)> {
    if !(l_los > 0.0) {
        return Err(Error::param("l_los", "must be > 0"));
    }
    if !(l_r > 0.0) {
        return Err(Error::param("l_r", "must be > 0"));
    }
    let two_lr = 2.0 * l_r;
    // rationalised form avoids cancellation for long links
    let delta_l = two_lr * two_lr / ((l_los * l_los + two_lr * two_lr).sqrt() + l_los);
    let delta_phi = (two_lr / l_los).atan().to_degrees();
    Ok((delta_l, delta_phi))
}

/// Where Tx sits and where Rx may be dropped for each scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropLayout {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub tx_pos: Point3,
    /// Inclusive Rx ranges per axis.
    pub rx_min: Point3,
    pub rx_max: Point3,
    /// Tx-Rx distance range, m.
    pub d_min: f64,
    pub d_max: f64,
    pub typical_rx: Point3,
    pub active_surfaces: Vec<Surface>,
    pub max_reflection_order: usize,
}

impl DropLayout {
    pub fn preset(kind: ScenarioKind) -> Self {
        match kind {
            // 10.15 x 7.9 m meeting room, 5.8 m ceiling, Tx near a corner
            ScenarioKind::MeetingRoom => DropLayout {
                length: 10.15,
                width: 7.9,
                height: 5.8,
                tx_pos: [0.6, 0.6, 1.2],
                rx_min: [1.5, 1.0, 1.2],
                rx_max: [9.6, 7.3, 1.2],
                d_min: 1.8,
                d_max: 9.5,
                typical_rx: [5.0, 4.0, 1.2],
                active_surfaces: Surface::WALLS.to_vec(),
                max_reflection_order: 3,
            },
            // 30 m hallway along x, Tx 0.8 m from the side wall
            ScenarioKind::Hallway => DropLayout {
                length: 32.0,
                width: 2.0,
                height: 3.0,
                tx_pos: [1.0, 0.8, 1.3],
                rx_min: [3.0, 0.6, 1.3],
                rx_max: [31.0, 1.4, 1.3],
                d_min: 2.0,
                d_max: 30.0,
                typical_rx: [11.0, 1.0, 1.3],
                // both ends open into the office
                active_surfaces: vec![Surface::WallY0, Surface::WallY1, Surface::Floor, Surface::Ceiling],
                max_reflection_order: 3,
            },
            // 30 x 20 m office; Tx in the cubicle area
            ScenarioKind::CubicleArea => DropLayout {
                length: 30.0,
                width: 20.0,
                height: 3.0,
                tx_pos: [2.0, 2.0, 1.3],
                rx_min: [3.0, 3.0, 1.3],
                rx_max: [16.0, 16.0, 1.3],
                d_min: 3.5,
                d_max: 14.0,
                typical_rx: [8.0, 6.0, 1.3],
                active_surfaces: Vec::new(),
                max_reflection_order: 0,
            },
            // Tx behind the hallway corner
            ScenarioKind::NLoS => DropLayout {
                length: 30.0,
                width: 20.0,
                height: 3.0,
                tx_pos: [2.0, 15.0, 1.3],
                rx_min: [3.0, 3.0, 1.3],
                rx_max: [22.0, 19.0, 1.3],
                d_min: 3.75,
                d_max: 20.0,
                typical_rx: [10.0, 18.0, 1.3],
                active_surfaces: Vec::new(),
                max_reflection_order: 0,
            },
        }
    }

    pub fn geometry_at(&self, rx: Point3) -> RoomGeometry {
        RoomGeometry {
            length: self.length,
            width: self.width,
            height: self.height,
            tx_pos: self.tx_pos,
            rx_pos: rx,
            active_surfaces: self.active_surfaces.clone(),
            max_reflection_order: self.max_reflection_order,
        }
    }

    /// Rejection-sample an Rx position inside the drop region and distance range.
    pub fn sample_rx<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Point3> {
        for _ in 0..10_000 {
            let mut p = [0.0; 3];
            for k in 0..3 {
                let (lo, hi) = (self.rx_min[k], self.rx_max[k]);
                p[k] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            }
            let d = norm(sub(p, self.tx_pos));
            if d >= self.d_min && d <= self.d_max {
                return Ok(p);
            }
        }
        Err(Error::DegenerateGeometry(
            "drop region does not intersect the distance range".into(),
        ))
    }

    /// Place Rx at distance `d` from Tx, preferring the direction of the typical Rx.
    pub fn rx_at_distance(&self, d: f64) -> Result<Point3> {
        let dir = sub(self.typical_rx, self.tx_pos);
        let n = norm(dir);
        let p = add(self.tx_pos, scale(dir, d / n));
        let g = self.geometry_at(p);
        g.validate()?;
        Ok(p)
    }
}

/// CSV rows `toa_ns,aoa_az_deg,aoa_el_deg,order,gain_db` at `f_ghz` with zero reflection loss.
pub fn paths_to_csv(paths: &[TracedPath], f_ghz: f64) -> String {
    let mut s = String::from("toa_ns,aoa_az_deg,aoa_el_deg,order,gain_db\n");
    for p in paths {
        let g = friis_amplitude(p.toa, f_ghz, 0.0).unwrap_or(0.0);
        s.push_str(&format!(
            "{:.6},{:.6},{:.6},{},{:.6}\n",
            p.toa,
            p.aoa_az,
            p.aoa_el,
            p.reflection_order,
            lin_to_db(g * g)
        ));
    }
    s
}

pub(crate) fn direction_angles(v: Point3) -> (f64, f64) {
    let n = norm(v);
    let az = wrap_deg(v[1].atan2(v[0]).to_degrees());
    let el = (v[2] / n).clamp(-1.0, 1.0).asin().to_degrees();
    (az, el)
}

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Point3, k: f64) -> Point3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}
