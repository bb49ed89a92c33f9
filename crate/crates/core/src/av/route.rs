use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("a route needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("centerline point {0} repeats its predecessor")]
    RepeatedPoint(usize),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("route contains non-finite values")]
    NonFinite,
}

/// Planar pose in the AV (right-handed) frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// Nearest point on the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub segment: usize,
    /// Arc length from the first centerline point.
    pub s: f64,
    /// Signed perpendicular distance, positive to the left of travel.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    centerline: Vec<(f64, f64)>,
    lane_half_width: f64,
    target_speed: f64,
    goal: (f64, f64),
    goal_tolerance: f64,
    arc: Vec<f64>,
    curvature: Vec<f64>,
}

fn project_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64), lo: f64, hi: f64) -> (f64, f64, f64) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(lo, hi);
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    let dist = ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt();
    let side = dx * (p.1 - a.1) - dy * (p.0 - a.0);
    (t, dist, if side < 0.0 { -dist } else { dist })
}

/// The first and last segments extend past the route ends so the signed
/// distance stays continuous there.
fn nearest(centerline: &[(f64, f64)], p: (f64, f64)) -> (usize, f64, f64) {
    let mut best = (0, 0.0, f64::INFINITY, 0.0);
    let last = centerline.len() - 2;
    for (i, w) in centerline.windows(2).enumerate() {
        let lo = if i == 0 { f64::NEG_INFINITY } else { 0.0 };
        let hi = if i == last { f64::INFINITY } else { 1.0 };
        let (t, dist, signed) = project_segment(w[0], w[1], p, lo, hi);
        if dist < best.2 {
            best = (i, t, dist, signed);
        }
    }
    (best.0, best.1, best.3)
}

/// Signed distance to the nearest centerline segment, positive to the left
/// of the direction of travel. The centerline needs two or more points.
pub fn lateral_deviation(pose: Pose2, centerline: &[(f64, f64)]) -> f64 {
    nearest(centerline, (pose.x, pose.y)).2
}

impl Route {
    pub fn new(
        centerline: Vec<(f64, f64)>,
        lane_half_width: f64,
        target_speed: f64,
        goal: (f64, f64),
        goal_tolerance: f64,
    ) -> Result<Self, RouteError> {
        if centerline.len() < 2 {
            return Err(RouteError::TooFewPoints(centerline.len()));
        }
        let finite = centerline
            .iter()
            .chain(std::iter::once(&goal))
            .all(|(x, y)| x.is_finite() && y.is_finite());
        if !finite || !lane_half_width.is_finite() || !target_speed.is_finite() {
            return Err(RouteError::NonFinite);
        }
        if let Some(i) = centerline.windows(2).position(|w| w[0] == w[1]) {
            return Err(RouteError::RepeatedPoint(i + 1));
        }
        if !(lane_half_width > 0.0) {
            return Err(RouteError::NonPositive("lane_half_width"));
        }
        if !(target_speed > 0.0) {
            return Err(RouteError::NonPositive("target_speed"));
        }
        if !(goal_tolerance > 0.0) {
            return Err(RouteError::NonPositive("goal tolerance"));
        }
        let mut arc = vec![0.0];
        for w in centerline.windows(2) {
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            arc.push(arc.last().unwrap() + d);
        }
        // Discrete curvature at each vertex: heading change over the mean
        // length of the adjacent segments.
        let mut curvature = vec![0.0; centerline.len()];
        for i in 1..centerline.len() - 1 {
            let (a, b, c) = (centerline[i - 1], centerline[i], centerline[i + 1]);
            let h0 = (b.1 - a.1).atan2(b.0 - a.0);
            let h1 = (c.1 - b.1).atan2(c.0 - b.0);
            let turn = crate::geom::wrap_angle(h1 - h0).abs();
            curvature[i] = turn / (0.5 * (arc[i + 1] - arc[i - 1]));
        }
        Ok(Self {
            centerline,
            lane_half_width,
            target_speed,
            goal,
            goal_tolerance,
            arc,
            curvature,
        })
    }

    pub fn centerline(&self) -> &[(f64, f64)] {
        &self.centerline
    }

    pub fn lane_half_width(&self) -> f64 {
        self.lane_half_width
    }

    pub fn target_speed(&self) -> f64 {
        self.target_speed
    }

    pub fn goal(&self) -> (f64, f64) {
        self.goal
    }

    pub fn goal_tolerance(&self) -> f64 {
        self.goal_tolerance
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn project(&self, x: f64, y: f64) -> Projection {
        let (segment, t, deviation) = nearest(&self.centerline, (x, y));
        let s = self.arc[segment] + t * (self.arc[segment + 1] - self.arc[segment]);
        Projection {
            segment,
            s,
            deviation,
        }
    }

    /// Point at arc length `s`. Past the end the last segment is extended.
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let n = self.centerline.len();
        let i = match self.arc.partition_point(|&a| a <= s) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (a, b) = (self.centerline[i], self.centerline[i + 1]);
        let t = (s - self.arc[i]) / (self.arc[i + 1] - self.arc[i]);
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    }

    /// Largest vertex curvature within `[s0, s1]`.
    pub fn max_curvature(&self, s0: f64, s1: f64) -> f64 {
        self.arc
            .iter()
            .zip(&self.curvature)
            .filter(|(s, _)| **s >= s0 && **s <= s1)
            .map(|(_, k)| *k)
            .fold(0.0, f64::max)
    }

    pub fn goal_reached(&self, x: f64, y: f64) -> bool {
        ((x - self.goal.0).powi(2) + (y - self.goal.1).powi(2)).sqrt() <= self.goal_tolerance
    }
}
