//! Mass-spring soft-body drop simulation and damaged-frame selection.
//!
//! Every mesh edge is a Hooke spring. On top of the edge springs each vertex
//! is pulled toward its position in the best rigid fit of the body's material
//! shape (shape matching), which gives the hollow surface mesh resistance to
//! folding flat. Offsets larger than the yield distance flow into the
//! material shape, so impacts leave permanent dents. Vertices share the total
//! mass equally; integration is semi-implicit Euler against an impenetrable
//! ground plane at `z = 0`.

use std::sync::Arc;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{self, BoxFace, TriMesh};
use crate::registration::{self, RansacParams, RigidTransform};
use crate::seed;

/// Parameters of one drop simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    /// Height of the lowest vertex above the ground at release (m).
    pub drop_height: f64,
    pub orientation: UnitQuaternion<f64>,
    /// Per-edge spring constant (N/m).
    pub stiffness: f64,
    /// Pull of each vertex toward the best rigid fit of the material shape,
    /// as a multiple of `stiffness`.
    pub shape_ratio: f64,
    /// Goal offset beyond which the material shape flows plastically (m).
    pub yield_distance: f64,
    /// Body-level viscous damping (N s/m), distributed over vertices by mass.
    pub damping: f64,
    /// Fraction of tangential velocity removed on ground contact.
    pub friction: f64,
    pub gravity: f64,
    pub dt: f64,
    pub max_time: f64,
    /// Simulated time between recorded frames (s).
    pub snapshot_interval: f64,
    /// Simulation stops once kinetic energy falls below this after the first
    /// ground contact (J).
    pub rest_energy: f64,
    pub total_mass: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            drop_height: 0.5,
            orientation: UnitQuaternion::identity(),
            stiffness: 200.0,
            shape_ratio: 1.0,
            yield_distance: 0.005,
            damping: 0.5,
            friction: 0.5,
            gravity: 9.81,
            dt: 1.0 / 2400.0,
            max_time: 2.0,
            snapshot_interval: 0.1,
            rest_energy: 1e-5,
            total_mass: 1.0,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Config {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if !(self.dt > 0.0) {
            return bad("dt", "must be positive");
        }
        if !(self.stiffness > 0.0) {
            return bad("stiffness", "must be positive");
        }
        if !(self.shape_ratio >= 0.0) {
            return bad("shape_ratio", "must be non-negative");
        }
        if !(self.yield_distance > 0.0) {
            return bad("yield_distance", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.friction) {
            return bad("friction", "must lie in [0, 1]");
        }
        if !(self.damping >= 0.0) {
            return bad("damping", "must be non-negative");
        }
        if !(self.total_mass > 0.0) {
            return bad("total_mass", "must be positive");
        }
        if !(self.max_time >= 0.0) || !(self.snapshot_interval > 0.0) {
            return bad(
                "max_time",
                "times must be non-negative with a positive snapshot interval",
            );
        }
        if !self.drop_height.is_finite() || !self.gravity.is_finite() {
            return bad("drop_height", "must be finite");
        }
        Ok(())
    }

    pub fn shape_stiffness(&self) -> f64 {
        self.shape_ratio * self.stiffness
    }

    /// Steps between recorded frames.
    pub fn snapshot_stride(&self) -> usize {
        ((self.snapshot_interval / self.dt).round() as usize).max(1)
    }
}

/// Ranges from which randomized drops are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimRanges {
    pub drop_height: [f64; 2],
    /// Sampled log-uniformly.
    pub stiffness: [f64; 2],
    pub damping: [f64; 2],
    pub friction: [f64; 2],
}

impl Default for SimRanges {
    fn default() -> Self {
        Self {
            drop_height: [0.2, 1.0],
            stiffness: [50.0, 500.0],
            damping: [0.1, 2.0],
            friction: [0.3, 0.9],
        }
    }
}

impl SimRanges {
    /// Draws height, orientation (uniform over rotations) and material
    /// parameters; the remaining fields come from `base`.
    pub fn sample(&self, base: &SimParams, seed: u64) -> SimParams {
        let mut rng = seed::rng(seed);
        let uniform = |rng: &mut seed::Rng, r: [f64; 2]| r[0] + (r[1] - r[0]) * rng.random::<f64>();
        let drop_height = uniform(&mut rng, self.drop_height);
        let stiffness = (uniform(&mut rng, [self.stiffness[0].ln(), self.stiffness[1].ln()])).exp();
        let damping = uniform(&mut rng, self.damping);
        let friction = uniform(&mut rng, self.friction);
        let orientation = uniform_rotation(&mut rng);
        SimParams {
            drop_height,
            orientation,
            stiffness,
            damping,
            friction,
            seed,
            ..base.clone()
        }
    }
}

/// Uniformly distributed rotation (Shoemake's method).
pub fn uniform_rotation(rng: &mut seed::Rng) -> UnitQuaternion<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let q = nalgebra::Quaternion::new(
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    );
    UnitQuaternion::from_quaternion(q)
}

/// Topology-derived data shared by all states of one body.
#[derive(Debug)]
pub struct SpringModel {
    rest: TriMesh,
    edges: Vec<[usize; 2]>,
}

impl SpringModel {
    pub fn new(rest: TriMesh) -> Result<Self> {
        rest.ensure_watertight()?;
        let edges = rest.edges();
        Ok(Self { rest, edges })
    }

    pub fn rest_mesh(&self) -> &TriMesh {
        &self.rest
    }

    pub fn spring_count(&self) -> usize {
        self.edges.len()
    }
}

/// Simulation state.
///
/// `material` is the body's current undeformed shape. It starts as the posed
/// rest mesh and drifts only through plastic flow, so spring rest lengths and
/// shape-matching goals are always measured on it.
#[derive(Debug, Clone)]
pub struct SoftBodyState {
    pub positions: Vec<Point3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub time: f64,
    pub material: Vec<Point3<f64>>,
    /// Rotation of the best rigid fit of `material` onto `positions`.
    pub orientation: UnitQuaternion<f64>,
    model: Arc<SpringModel>,
}

/// Energy split of a state (J).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub kinetic: f64,
    /// Edge springs plus shape-matching goals.
    pub elastic: f64,
    pub potential: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.elastic + self.potential
    }
}

impl PartialEq for SoftBodyState {
    fn eq(&self, other: &Self) -> bool {
        self.positions == other.positions
            && self.velocities == other.velocities
            && self.time == other.time
            && self.material == other.material
            && self.orientation == other.orientation
    }
}

fn mean(points: &[Point3<f64>]) -> Point3<f64> {
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

impl SoftBodyState {
    pub fn model(&self) -> &SpringModel {
        &self.model
    }

    pub fn mesh(&self) -> TriMesh {
        self.model
            .rest
            .with_vertices(self.positions.clone())
            .expect("state keeps the rest vertex count")
    }

    fn vertex_mass(&self, params: &SimParams) -> f64 {
        params.total_mass / self.positions.len() as f64
    }

    /// Per-vertex offset from the shape-matching goal.
    fn goal_offsets(&self) -> Vec<Vector3<f64>> {
        let cx = mean(&self.positions);
        let cm = mean(&self.material);
        let r = self.orientation.to_rotation_matrix();
        self.positions
            .iter()
            .zip(&self.material)
            .map(|(x, m)| (x - cx) - r * (m - cm))
            .collect()
    }

    /// Updates `orientation` to the rotational part of the current
    /// deformation, warm-started from the previous value.
    fn fit_orientation(&mut self) {
        let cx = mean(&self.positions);
        let cm = mean(&self.material);
        let mut a = nalgebra::Matrix3::zeros();
        for (x, m) in self.positions.iter().zip(&self.material) {
            a += (x - cx) * (m - cm).transpose();
        }
        let mut q = self.orientation;
        for _ in 0..20 {
            let r = q.to_rotation_matrix();
            let r = r.matrix();
            let mut num = Vector3::zeros();
            let mut den = 0.0;
            for c in 0..3 {
                num += r.column(c).cross(&a.column(c));
                den += r.column(c).dot(&a.column(c));
            }
            let omega = num / (den.abs() + 1e-9);
            let w = omega.norm();
            if w < 1e-12 {
                break;
            }
            q = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(omega / w), w) * q;
            q.renormalize();
        }
        self.orientation = q;
    }

    pub fn energy(&self, params: &SimParams) -> Energy {
        let m = self.vertex_mass(params);
        let kinetic = 0.5 * m * self.velocities.iter().map(|v| v.norm_squared()).sum::<f64>();
        let potential = m * params.gravity * self.positions.iter().map(|p| p.z).sum::<f64>();
        let springs: f64 = self
            .model
            .edges
            .iter()
            .map(|&[a, b]| {
                let rest = (self.material[a] - self.material[b]).norm();
                let stretch = (self.positions[a] - self.positions[b]).norm() - rest;
                0.5 * params.stiffness * stretch * stretch
            })
            .sum();
        let goals: f64 = self.goal_offsets().iter().map(|d| d.norm_squared()).sum::<f64>();
        Energy {
            kinetic,
            elastic: springs + 0.5 * params.shape_stiffness() * goals,
            potential,
        }
    }

    pub fn kinetic_energy(&self, params: &SimParams) -> f64 {
        0.5 * self.vertex_mass(params) * self.velocities.iter().map(|v| v.norm_squared()).sum::<f64>()
    }

    pub fn touches_ground(&self) -> bool {
        self.positions.iter().any(|p| p.z <= 0.0)
    }

    /// Advances the state by one semi-implicit Euler step of `params.dt`.
    pub fn advance(&mut self, params: &SimParams) -> Result<()> {
        let n = self.positions.len();
        let m = self.vertex_mass(params);
        let dt = params.dt;
        let mut force = vec![Vector3::new(0.0, 0.0, -m * params.gravity); n];
        for &[a, b] in &self.model.edges {
            let rest = (self.material[a] - self.material[b]).norm();
            let d = self.positions[b] - self.positions[a];
            let len = d.norm();
            if len > 0.0 {
                let f = d * (params.stiffness * (len - rest) / len);
                force[a] += f;
                force[b] -= f;
            }
        }
        self.fit_orientation();
        let offsets = self.goal_offsets();
        let kg = params.shape_stiffness();
        let inv_rot = self.orientation.inverse();
        for (i, d) in offsets.iter().enumerate() {
            force[i] -= d * kg;
            let len = d.norm();
            if len > params.yield_distance {
                self.material[i] += inv_rot * (d * (1.0 - params.yield_distance / len));
            }
        }
        let drag = params.damping / params.total_mass;
        for (i, f) in force.iter().enumerate() {
            let f = f - self.velocities[i] * (drag * m);
            self.velocities[i] += f * (dt / m);
            self.positions[i] += self.velocities[i] * dt;
            if self.positions[i].z < 0.0 {
                self.positions[i].z = 0.0;
                let v = &mut self.velocities[i];
                v.z = 0.0;
                v.x *= 1.0 - params.friction;
                v.y *= 1.0 - params.friction;
            }
        }
        self.time += dt;
        let sane = self
            .positions
            .iter()
            .zip(&self.velocities)
            .all(|(p, v)| p.coords.iter().all(|c| c.is_finite()) && v.norm() < 1e4);
        if sane {
            Ok(())
        } else {
            Err(Error::UnstableStep)
        }
    }
}

/// Poses the rest mesh: rotated about its centroid by the initial
/// orientation, centered over the origin, lowest vertex at `drop_height`.
pub fn init_softbody(mesh: &TriMesh, params: &SimParams) -> Result<SoftBodyState> {
    params.validate()?;
    let model = Arc::new(SpringModel::new(mesh.clone())?);
    let positions = posed_positions(mesh, params);
    Ok(SoftBodyState {
        velocities: vec![Vector3::zeros(); positions.len()],
        material: positions.clone(),
        positions,
        time: 0.0,
        orientation: UnitQuaternion::identity(),
        model,
    })
}

fn posed_positions(mesh: &TriMesh, params: &SimParams) -> Vec<Point3<f64>> {
    let c = mesh.centroid();
    let rotated: Vec<Point3<f64>> = mesh
        .vertices()
        .iter()
        .map(|p| Point3::from(params.orientation * (p - c)))
        .collect();
    let min_z = rotated.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    let shift = Vector3::new(0.0, 0.0, params.drop_height - min_z);
    rotated.iter().map(|p| p + shift).collect()
}

/// One integration step, returning the new state.
pub fn step(state: &SoftBodyState, params: &SimParams) -> Result<SoftBodyState> {
    let mut next = state.clone();
    next.advance(params)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub time: f64,
    pub mesh: TriMesh,
    pub volume_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: SimParams,
    pub rest_volume: f64,
    pub frames: Vec<Frame>,
}

/// Integrates until `max_time`, or until the body has touched the ground
/// and its kinetic energy has dropped below `rest_energy`. Frames are
/// recorded at release, every snapshot interval and at the final step.
pub fn run_drop(mesh: &TriMesh, params: &SimParams) -> Result<Trajectory> {
    let mut state = init_softbody(mesh, params)?;
    let rest_volume = mesh::mesh_volume(mesh)?;
    let stride = params.snapshot_stride();
    let total_steps = (params.max_time / params.dt).round() as usize;
    let frame = |s: &SoftBodyState| -> Frame {
        let m = s.mesh();
        let volume_ratio = mesh::signed_volume(&m) / rest_volume;
        Frame {
            time: s.time,
            mesh: m,
            volume_ratio,
        }
    };
    let mut frames = vec![frame(&state)];
    let mut contacted = false;
    for k in 1..=total_steps {
        state.advance(params)?;
        contacted |= state.touches_ground();
        let settled = contacted && state.kinetic_energy(params) < params.rest_energy;
        if k % stride == 0 || k == total_steps || settled {
            frames.push(frame(&state));
        }
        if settled {
            break;
        }
    }
    Ok(Trajectory {
        params: params.clone(),
        rest_volume,
        frames,
    })
}

/// Inclusive volume-ratio band for damaged frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumeBand {
    pub min: f64,
    pub max: f64,
}

impl Default for VolumeBand {
    fn default() -> Self {
        Self { min: 0.75, max: 0.90 }
    }
}

impl VolumeBand {
    pub fn contains(&self, ratio: f64) -> bool {
        ratio >= self.min && ratio <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingParams {
    pub iterations: u32,
    pub lambda: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            iterations: 10,
            lambda: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamagedFrame {
    /// Index into the trajectory's frames.
    pub frame: usize,
    pub time: f64,
    /// Smoothed mesh, still in the simulation (world) frame.
    pub mesh: TriMesh,
    /// Ratio of the unsmoothed frame.
    pub raw_volume_ratio: f64,
    /// Ratio after smoothing.
    pub volume_ratio: f64,
}

/// Keeps frames whose volume ratio lies in `band` and smooths them with the
/// volume restored afterwards. A frame whose smoothed ratio leaves the band
/// through rounding is dropped. An empty result means
/// the drop produced no suitable damage.
pub fn select_damaged_frames(
    trajectory: &Trajectory,
    band: &VolumeBand,
    smoothing: &SmoothingParams,
) -> Result<Vec<DamagedFrame>> {
    let mut out = Vec::new();
    for (i, f) in trajectory.frames.iter().enumerate() {
        if !band.contains(f.volume_ratio) {
            continue;
        }
        let smoothed = mesh::smooth_preserving_volume(&f.mesh, smoothing.iterations, smoothing.lambda)?;
        let ratio = mesh::signed_volume(&smoothed) / trajectory.rest_volume;
        if band.contains(ratio) {
            out.push(DamagedFrame {
                frame: i,
                time: f.time,
                mesh: smoothed,
                raw_volume_ratio: f.volume_ratio,
                volume_ratio: ratio,
            });
        }
    }
    Ok(out)
}

/// An original mesh paired with a deformed copy and the recovered rigid
/// motion between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationRecord {
    /// Rest mesh in its model frame.
    pub original: TriMesh,
    /// Deformed mesh in the simulation frame.
    pub deformed: TriMesh,
    /// Maps the model frame onto the deformed mesh.
    pub rigid_transform: RigidTransform,
    pub volume_ratio: f64,
    pub impact_face: BoxFace,
}

impl DeformationRecord {
    /// Deformed mesh pulled back into the original model frame.
    pub fn deformed_in_model_frame(&self) -> TriMesh {
        self.rigid_transform.inverse().apply_mesh(&self.deformed)
    }
}

/// Registers `deformed` against `original` (shared topology) and attributes
/// the deformation to the face of the original bounding box with the largest
/// mean residual.
pub fn track_deformation(original: &TriMesh, deformed: &TriMesh, seed: u64) -> Result<DeformationRecord> {
    if original.faces() != deformed.faces() {
        return Err(Error::InvalidArgument("meshes must share topology".into()));
    }
    let src = original.vertices();
    let dst = deformed.vertices();
    let fit = registration::ransac_rigid(src, dst, &RansacParams::for_points(src, seed))?;
    let residuals = registration::deformation_residuals(src, dst, &fit.transform)?;
    let bbox = mesh::aabb(original)?;
    let impact_face = registration::impact_face(src, &residuals, &bbox);
    Ok(DeformationRecord {
        original: original.clone(),
        deformed: deformed.clone(),
        rigid_transform: fit.transform,
        volume_ratio: mesh::mesh_volume(deformed)? / mesh::mesh_volume(original)?,
        impact_face,
    })
}

/// Output of a full damage-generation run.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageRun {
    pub trajectory: Trajectory,
    pub records: Vec<DeformationRecord>,
    /// Trajectory frame index of each record.
    pub frame_indices: Vec<usize>,
}

/// Drops `mesh`, keeps the frames inside the volume band and tracks each of
/// them. Registration runs on the raw frame; the record stores the smoothed
/// mesh.
pub fn generate_damage(
    mesh: &TriMesh,
    params: &SimParams,
    band: &VolumeBand,
    smoothing: &SmoothingParams,
) -> Result<DamageRun> {
    let trajectory = run_drop(mesh, params)?;
    let kept = select_damaged_frames(&trajectory, band, smoothing)?;
    let mut records = Vec::with_capacity(kept.len());
    let mut frame_indices = Vec::with_capacity(kept.len());
    for k in kept {
        let raw = &trajectory.frames[k.frame].mesh;
        let mut rec = track_deformation(mesh, raw, seed::derive_index(params.seed, k.frame as u64))?;
        rec.deformed = k.mesh;
        rec.volume_ratio = k.volume_ratio;
        records.push(rec);
        frame_indices.push(k.frame);
    }
    Ok(DamageRun {
        trajectory,
        records,
        frame_indices,
    })
}

/// Closed box mesh subdivided `rounds` times (386 vertices at 3 rounds).
pub fn parcel_mesh(half_extents: Vector3<f64>, rounds: u32) -> Result<TriMesh> {
    let b = mesh::OrientedBox3::axis_aligned(Point3::origin(), half_extents)?;
    mesh::subdivide(&mesh::build_box_mesh(&b), rounds)
}
