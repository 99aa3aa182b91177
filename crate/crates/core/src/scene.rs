//! World model: static map, moving obstacles with known trajectories, and the
//! exact collision function used for labels and final validation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    lerp_angle, obb_intersects_obb, obb_intersects_polygon, ConvexPolygon, Obb, PolygonError, Pose, Rect,
    State, Vec2,
};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid polygon #{index}: {source}")]
    Polygon { index: usize, source: PolygonError },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("sampling region has zero volume")]
    DegenerateRegion,
    #[error("sampling region lies outside the scene")]
    RegionOutOfScene,
    #[error("sample count must be positive")]
    EmptySample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticMap {
    pub bounds: Rect,
    pub polygons: Vec<ConvexPolygon>,
}

/// Boolean raster of the static map; a cell is occupied iff its center lies
/// inside some polygon.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub origin: Vec2,
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn center(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn occupied(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.cells[row * self.cols + col] = value;
    }

    /// Cell containing `p`, clamped to the grid.
    pub fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let c = ((p.x - self.origin.x) / self.resolution).floor();
        let r = ((p.y - self.origin.y) / self.resolution).floor();
        (
            (c.max(0.0) as usize).min(self.cols - 1),
            (r.max(0.0) as usize).min(self.rows - 1),
        )
    }
}

impl StaticMap {
    pub fn rasterize(&self, resolution: f64) -> OccupancyGrid {
        assert!(resolution > 0.0, "grid resolution must be positive");
        let cols = (self.bounds.width() / resolution).ceil().max(1.0) as usize;
        let rows = (self.bounds.height() / resolution).ceil().max(1.0) as usize;
        let mut grid = OccupancyGrid {
            origin: self.bounds.min,
            resolution,
            cols,
            rows,
            cells: vec![false; cols * rows],
        };
        for row in 0..rows {
            for col in 0..cols {
                let c = grid.center(col, row);
                let hit = self.polygons.iter().any(|p| p.contains_point(c));
                grid.set(col, row, hit);
            }
        }
        grid
    }
}

/// Rectangle moving along time-stamped waypoints (center pose).
#[derive(Debug, Clone, PartialEq)]
pub struct MovingObstacle {
    pub length: f64,
    pub width: f64,
    waypoints: Vec<State>,
}

impl MovingObstacle {
    pub fn new(length: f64, width: f64, waypoints: Vec<State>) -> Result<Self, SceneError> {
        if !(length > 0.0 && width > 0.0) {
            return Err(SceneError::Invalid("obstacle dimensions must be positive".into()));
        }
        if waypoints.len() < 2 {
            return Err(SceneError::Invalid("moving obstacle needs at least 2 waypoints".into()));
        }
        if waypoints.iter().any(|w| !w.is_finite()) {
            return Err(SceneError::Invalid("non-finite obstacle waypoint".into()));
        }
        if waypoints.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(SceneError::Invalid("waypoint times must be strictly increasing".into()));
        }
        Ok(Self {
            length,
            width,
            waypoints,
        })
    }

    /// Obstacle that keeps a constant velocity between `t0` and `t1`.
    pub fn straight(length: f64, width: f64, from: Pose, to: Pose, t0: f64, t1: f64) -> Result<Self, SceneError> {
        Self::new(length, width, vec![from.at(t0), to.at(t1)])
    }

    pub fn waypoints(&self) -> &[State] {
        &self.waypoints
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        let first = self.waypoints[0];
        let last = *self.waypoints.last().expect("at least two waypoints");
        if t <= first.t {
            return first.pose();
        }
        if t >= last.t {
            return last.pose();
        }
        let k = self.waypoints.partition_point(|w| w.t <= t);
        let a = self.waypoints[k - 1];
        let b = self.waypoints[k];
        let u = (t - a.t) / (b.t - a.t);
        Pose::new(
            a.x + u * (b.x - a.x),
            a.y + u * (b.y - a.y),
            lerp_angle(a.theta, b.theta, u),
        )
    }

    pub fn footprint_at(&self, t: f64) -> Obb {
        let p = self.pose_at(t);
        Obb::new(Vec2::new(p.x, p.y), p.theta, self.length, self.width)
    }
}

/// Robot rectangle; poses refer to the rear axle, the rectangle center sits
/// `rear_to_center` ahead of it along the heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotFootprint {
    pub length: f64,
    pub width: f64,
    #[serde(default)]
    pub rear_to_center: f64,
}

impl RobotFootprint {
    pub fn obb(&self, x: f64, y: f64, theta: f64) -> Obb {
        let (s, c) = theta.sin_cos();
        let center = Vec2::new(x + self.rear_to_center * c, y + self.rear_to_center * s);
        Obb::new(center, theta, self.length, self.width)
    }

    /// Farthest corner distance from the reference (rear axle) point.
    pub fn circumscribed_radius(&self) -> f64 {
        (self.rear_to_center.abs() + 0.5 * self.length).hypot(0.5 * self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub map: StaticMap,
    pub obstacles: Vec<MovingObstacle>,
    pub robot: RobotFootprint,
    /// Planning horizon; field training samples time in `[0, t_max]`.
    pub t_max: f64,
    pub start: Option<Pose>,
    pub goal: Option<Pose>,
}

/// Axis-aligned box in `(x, y, θ, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRegion {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub theta: (f64, f64),
    pub t: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledState {
    pub state: State,
    pub collision: bool,
}

impl Scene {
    pub fn new(map: StaticMap, obstacles: Vec<MovingObstacle>, robot: RobotFootprint, t_max: f64) -> Result<Self, SceneError> {
        if map.bounds.is_degenerate() {
            return Err(SceneError::Invalid("map bounds are degenerate".into()));
        }
        if !(robot.length > 0.0 && robot.width > 0.0) {
            return Err(SceneError::Invalid("robot dimensions must be positive".into()));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(SceneError::Invalid("t_max must be positive".into()));
        }
        Ok(Self {
            map,
            obstacles,
            robot,
            t_max,
            start: None,
            goal: None,
        })
    }

    pub fn bounds(&self) -> Rect {
        self.map.bounds
    }

    /// Whole-scene sampling box over the full heading range.
    pub fn full_region(&self) -> SampleRegion {
        let b = self.map.bounds;
        SampleRegion {
            x: (b.min.x, b.max.x),
            y: (b.min.y, b.max.y),
            theta: (-std::f64::consts::PI, std::f64::consts::PI),
            t: (0.0, self.t_max),
        }
    }

    /// Copy with every moving obstacle removed.
    pub fn without_moving_obstacles(&self) -> Scene {
        Scene {
            obstacles: Vec::new(),
            ..self.clone()
        }
    }

    fn out_of_bounds(&self, footprint: &Obb) -> bool {
        footprint
            .corners()
            .iter()
            .any(|&c| !self.map.bounds.contains(c))
    }

    /// Collision against bounds and static polygons only.
    pub fn in_static_collision(&self, x: f64, y: f64, theta: f64) -> bool {
        let fp = self.robot.obb(x, y, theta);
        self.out_of_bounds(&fp) || self.map.polygons.iter().any(|p| obb_intersects_polygon(&fp, p))
    }

    /// Ground-truth collision of the robot at `state`.
    pub fn in_collision(&self, state: State) -> bool {
        self.in_collision_with_obstacles_at(state, state.t)
    }

    /// Collision of the robot pose in `state` with obstacles posed at
    /// `obstacle_time` instead of `state.t`.
    pub fn in_collision_with_obstacles_at(&self, state: State, obstacle_time: f64) -> bool {
        if self.in_static_collision(state.x, state.y, state.theta) {
            return true;
        }
        let fp = self.robot.obb(state.x, state.y, state.theta);
        self.obstacles
            .iter()
            .any(|o| obb_intersects_obb(&fp, &o.footprint_at(obstacle_time)))
    }

    fn check_region(&self, region: &SampleRegion, count: usize) -> Result<(), SceneError> {
        if count == 0 {
            return Err(SceneError::EmptySample);
        }
        let widths = [
            region.x.1 - region.x.0,
            region.y.1 - region.y.0,
            region.theta.1 - region.theta.0,
            region.t.1 - region.t.0,
        ];
        if widths.iter().any(|w| !(*w > 0.0)) {
            return Err(SceneError::DegenerateRegion);
        }
        let b = self.map.bounds;
        let eps = 1e-9;
        if region.x.0 < b.min.x - eps
            || region.x.1 > b.max.x + eps
            || region.y.0 < b.min.y - eps
            || region.y.1 > b.max.y + eps
            || region.t.0 < -eps
            || region.t.1 > self.t_max + eps
        {
            return Err(SceneError::RegionOutOfScene);
        }
        Ok(())
    }

    /// Uniform samples from `region` labelled by [`Scene::in_collision`].
    pub fn sample_labeled_batch(&self, region: &SampleRegion, count: usize, seed: u64) -> Result<Vec<LabeledState>, SceneError> {
        self.check_region(region, count)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                let state = State::new(
                    rng.gen_range(region.x.0..region.x.1),
                    rng.gen_range(region.y.0..region.y.1),
                    rng.gen_range(region.theta.0..region.theta.1),
                    rng.gen_range(region.t.0..region.t.1),
                );
                LabeledState {
                    state,
                    collision: self.in_collision(state),
                }
            })
            .collect())
    }

    /// First colliding state among `substeps` interpolated states per segment.
    ///
    /// Pose and time are interpolated jointly (linear in x, y, t, shortest arc
    /// in θ), endpoints included.
    pub fn first_collision(&self, states: &[State], substeps: usize) -> Option<State> {
        let substeps = substeps.max(1);
        if let [only] = states {
            return self.in_collision(*only).then_some(*only);
        }
        for (k, w) in states.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let last = if k + 2 == states.len() { substeps } else { substeps - 1 };
            for s in 0..=last {
                let u = s as f64 / substeps as f64;
                let st = State::new(
                    a.x + u * (b.x - a.x),
                    a.y + u * (b.y - a.y),
                    lerp_angle(a.theta, b.theta, u),
                    a.t + u * (b.t - a.t),
                );
                if self.in_collision(st) {
                    return Some(st);
                }
            }
        }
        None
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let file: SceneFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SceneFile::from(self)).expect("scene serializes")
    }
}

/// On-disk scene document.
///
/// ```json
/// {
///   "bounds": [min_x, min_y, max_x, max_y],
///   "polygons": [[[x, y], ...], ...],
///   "obstacles": [{"length": 4.5, "width": 1.9, "waypoints": [[x, y, theta, t], ...]}],
///   "robot": {"length": 4.5, "width": 1.9, "rear_to_center": 1.4},
///   "t_max": 12.0,
///   "start": [x, y, theta],
///   "goal": [x, y, theta]
/// }
/// ```
///
/// Units are meters, radians and seconds. Obstacle waypoints give the
/// rectangle center; robot poses give the rear axle. `start` and `goal` are
/// optional defaults for the command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub bounds: [f64; 4],
    #[serde(default)]
    pub polygons: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleFile>,
    pub robot: RobotFootprint,
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleFile {
    pub length: f64,
    pub width: f64,
    pub waypoints: Vec<[f64; 4]>,
}

impl TryFrom<SceneFile> for Scene {
    type Error = SceneError;

    fn try_from(file: SceneFile) -> Result<Self, SceneError> {
        let [x0, y0, x1, y1] = file.bounds;
        let polygons = file
            .polygons
            .into_iter()
            .enumerate()
            .map(|(index, raw)| ConvexPolygon::try_from(raw).map_err(|source| SceneError::Polygon { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        let obstacles = file
            .obstacles
            .into_iter()
            .map(|o| {
                let wps = o
                    .waypoints
                    .into_iter()
                    .map(|[x, y, th, t]| State::new(x, y, th, t))
                    .collect();
                MovingObstacle::new(o.length, o.width, wps)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut scene = Scene::new(
            StaticMap {
                bounds: Rect::new(x0, y0, x1, y1),
                polygons,
            },
            obstacles,
            file.robot,
            file.t_max,
        )?;
        scene.start = file.start.map(|[x, y, th]| Pose::new(x, y, th));
        scene.goal = file.goal.map(|[x, y, th]| Pose::new(x, y, th));
        Ok(scene)
    }
}

impl From<&Scene> for SceneFile {
    fn from(s: &Scene) -> Self {
        let b = s.map.bounds;
        SceneFile {
            bounds: [b.min.x, b.min.y, b.max.x, b.max.y],
            polygons: s.map.polygons.iter().map(|p| p.clone().into()).collect(),
            obstacles: s
                .obstacles
                .iter()
                .map(|o| ObstacleFile {
                    length: o.length,
                    width: o.width,
                    waypoints: o.waypoints.iter().map(|w| [w.x, w.y, w.theta, w.t]).collect(),
                })
                .collect(),
            robot: s.robot,
            t_max: s.t_max,
            start: s.start.map(|p| [p.x, p.y, p.theta]),
            goal: s.goal.map(|p| [p.x, p.y, p.theta]),
            description: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn car() -> RobotFootprint {
        RobotFootprint {
            length: 4.5,
            width: 1.9,
            rear_to_center: 0.0,
        }
    }

    fn open_scene(obstacles: Vec<MovingObstacle>) -> Scene {
        let map = StaticMap {
            bounds: Rect::new(-50.0, -50.0, 50.0, 50.0),
            polygons: vec![],
        };
        Scene::new(map, obstacles, car(), 20.0).unwrap()
    }

    #[test]
    fn obstacle_pose_interpolation_and_clamping() {
        let o = MovingObstacle::new(
            4.5,
            1.9,
            vec![State::new(0.0, 0.0, 0.0, 0.0), State::new(10.0, 0.0, 0.0, 5.0)],
        )
        .unwrap();
        assert_eq!(o.pose_at(2.5), Pose::new(5.0, 0.0, 0.0));
        assert_eq!(o.pose_at(-1.0), Pose::new(0.0, 0.0, 0.0));
        assert_eq!(o.pose_at(99.0), Pose::new(10.0, 0.0, 0.0));
    }

    // Interpolating unit heading vectors densely and renormalizing gives the
    // shortest-arc midpoint independently of the angle arithmetic.
    #[test]
    fn heading_interpolates_through_pi() {
        let o = MovingObstacle::new(
            1.0,
            1.0,
            vec![State::new(0.0, 0.0, 3.0, 0.0), State::new(0.0, 0.0, -3.0, 1.0)],
        )
        .unwrap();
        let (a, b) = ((3.0f64).cos(), (3.0f64).sin());
        let (c, d) = ((-3.0f64).cos(), (-3.0f64).sin());
        let mx = 0.5 * (a + c);
        let my = 0.5 * (b + d);
        let oracle = my.atan2(mx);
        let got = o.pose_at(0.5).theta;
        assert_relative_eq!(got.cos(), oracle.cos(), epsilon = 1e-9);
        assert_relative_eq!(got.sin(), oracle.sin(), epsilon = 1e-9);
        assert_relative_eq!(crate::geometry::wrap_angle(got).abs(), PI, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_obstacles() {
        assert!(MovingObstacle::new(1.0, 1.0, vec![State::new(0.0, 0.0, 0.0, 0.0)]).is_err());
        assert!(MovingObstacle::new(
            1.0,
            1.0,
            vec![State::new(0.0, 0.0, 0.0, 1.0), State::new(0.0, 0.0, 0.0, 1.0)]
        )
        .is_err());
        assert!(MovingObstacle::new(0.0, 1.0, vec![State::new(0.0, 0.0, 0.0, 0.0), State::new(1.0, 0.0, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn crossing_obstacle_only_collides_at_its_time() {
        let o = MovingObstacle::straight(4.5, 1.9, Pose::new(0.0, -25.0, PI / 2.0), Pose::new(0.0, 25.0, PI / 2.0), 0.0, 10.0)
            .unwrap();
        let scene = open_scene(vec![o]);
        assert!(!scene.in_collision(State::new(0.0, 0.0, 0.0, 0.0)));
        assert!(scene.in_collision(State::new(0.0, 0.0, 0.0, 5.0)));
    }

    #[test]
    fn inside_static_polygon_always_collides() {
        let map = StaticMap {
            bounds: Rect::new(0.0, 0.0, 50.0, 50.0),
            polygons: vec![ConvexPolygon::rectangle(10.0, 10.0, 30.0, 30.0)],
        };
        let scene = Scene::new(map, vec![], car(), 10.0).unwrap();
        for t in [0.0, 3.0, 100.0] {
            assert!(scene.in_collision(State::new(20.0, 20.0, 0.4, t)));
        }
        assert!(!scene.in_collision(State::new(5.0, 5.0, 0.0, 0.0)));
        // leaving the map counts
        assert!(scene.in_collision(State::new(1.0, 25.0, 0.0, 0.0)));
    }

    #[test]
    fn rasterization_uses_cell_centers() {
        let map = StaticMap {
            bounds: Rect::new(0.0, 0.0, 4.0, 4.0),
            polygons: vec![ConvexPolygon::rectangle(0.9, 0.9, 2.1, 2.1)],
        };
        let grid = map.rasterize(1.0);
        assert_eq!((grid.cols, grid.rows), (4, 4));
        assert!(grid.occupied(1, 1));
        assert!(!grid.occupied(2, 2));
        assert!(!grid.occupied(0, 0));
    }

    #[test]
    fn sampling_contract() {
        let scene = {
            let map = StaticMap {
                bounds: Rect::new(0.0, 0.0, 50.0, 50.0),
                polygons: vec![ConvexPolygon::rectangle(20.0, 20.0, 40.0, 40.0)],
            };
            Scene::new(map, vec![], car(), 10.0).unwrap()
        };
        let free = SampleRegion {
            x: (5.0, 12.0),
            y: (5.0, 12.0),
            theta: (-PI, PI),
            t: (0.0, 10.0),
        };
        let batch = scene.sample_labeled_batch(&free, 200, 1).unwrap();
        assert!(batch.iter().all(|s| !s.collision));

        let inside = SampleRegion {
            x: (27.0, 33.0),
            y: (27.0, 33.0),
            ..free
        };
        assert!(scene.sample_labeled_batch(&inside, 200, 1).unwrap().iter().all(|s| s.collision));

        let a = scene.sample_labeled_batch(&free, 64, 99).unwrap();
        let b = scene.sample_labeled_batch(&free, 64, 99).unwrap();
        assert_eq!(a, b);

        let flat = SampleRegion { t: (2.0, 2.0), ..free };
        assert!(matches!(scene.sample_labeled_batch(&flat, 10, 0), Err(SceneError::DegenerateRegion)));
        assert!(matches!(scene.sample_labeled_batch(&free, 0, 0), Err(SceneError::EmptySample)));
        let outside = SampleRegion { x: (-5.0, 3.0), ..free };
        assert!(matches!(scene.sample_labeled_batch(&outside, 5, 0), Err(SceneError::RegionOutOfScene)));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let text = r#"{
            "bounds": [0, 0, 50, 50],
            "polygons": [[[10, 10], [20, 10], [20, 20], [10, 20]]],
            "obstacles": [{"length": 4.5, "width": 1.9, "waypoints": [[0, 5, 0, 0], [50, 5, 0, 4.5]]}],
            "robot": {"length": 4.5, "width": 1.9, "rear_to_center": 1.4},
            "t_max": 8,
            "start": [3, 3, 0],
            "goal": [45, 45, 1.57]
        }"#;
        let scene = Scene::from_json(text).unwrap();
        assert_eq!(scene.obstacles.len(), 1);
        assert_eq!(scene.start, Some(Pose::new(3.0, 3.0, 0.0)));
        let again = Scene::from_json(&scene.to_json()).unwrap();
        assert_eq!(again, scene);

        let bad = text.replace("[[10, 10], [20, 10], [20, 20], [10, 20]]", "[[10, 10], [20, 10]]");
        assert!(matches!(Scene::from_json(&bad), Err(SceneError::Parse(_)) | Err(SceneError::Polygon { .. })));
        let bad = text.replace("\"t_max\": 8", "\"t_max\": -1");
        assert!(matches!(Scene::from_json(&bad), Err(SceneError::Invalid(_))));
    }

    #[test]
    fn supersampled_check_finds_midsegment_contact() {
        let map = StaticMap {
            bounds: Rect::new(0.0, 0.0, 50.0, 50.0),
            polygons: vec![ConvexPolygon::rectangle(24.0, 20.0, 26.0, 30.0)],
        };
        let scene = Scene::new(map, vec![], car(), 10.0).unwrap();
        let states = [State::new(10.0, 25.0, 0.0, 0.0), State::new(40.0, 25.0, 0.0, 3.0)];
        assert!(!scene.in_collision(states[0]) && !scene.in_collision(states[1]));
        assert!(scene.first_collision(&states, 10).is_some());
    }
}
