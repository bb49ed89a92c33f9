use super::ControlError;

/// Piecewise-linear tire angle to normalized steer mapping.
///
/// Only the non-negative half is stored; negative angles mirror it, so the
/// map is odd by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SteerMap {
    max_tire_angle: f64,
    table: Vec<(f64, f64)>,
}

impl SteerMap {
    /// Pure scaling by the maximum tire angle.
    pub fn linear(max_tire_angle: f64) -> Result<Self, ControlError> {
        Self::new(max_tire_angle, vec![(0.0, 0.0), (max_tire_angle, 1.0)])
    }

    /// `half_table` runs from `(0, 0)` to `(max_tire_angle, 1)` with both
    /// columns strictly increasing.
    pub fn new(max_tire_angle: f64, half_table: Vec<(f64, f64)>) -> Result<Self, ControlError> {
        let bad = |reason: &str| Err(ControlError::MalformedSteerTable(reason.to_owned()));
        if !(max_tire_angle > 0.0) || !max_tire_angle.is_finite() {
            return bad("max tire angle must be positive");
        }
        if half_table.len() < 2 {
            return bad("table needs at least two points");
        }
        if half_table.iter().any(|(a, s)| !a.is_finite() || !s.is_finite()) {
            return bad("table entries must be finite");
        }
        if half_table[0] != (0.0, 0.0) {
            return bad("table must start at (0, 0)");
        }
        let last = half_table[half_table.len() - 1];
        if (last.0 - max_tire_angle).abs() > 1e-9 || last.1 != 1.0 {
            return bad("table must end at (max_tire_angle, 1)");
        }
        if half_table
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0) || !(w[1].1 > w[0].1))
        {
            return bad("table must be strictly increasing");
        }
        Ok(Self {
            max_tire_angle,
            table: half_table,
        })
    }

    pub fn max_tire_angle(&self) -> f64 {
        self.max_tire_angle
    }

    pub fn half_table(&self) -> &[(f64, f64)] {
        &self.table
    }

    /// Maps a tire angle to [-1, 1]; angles past the limit saturate.
    pub fn map(&self, tire_angle: f64) -> f64 {
        if tire_angle.is_nan() {
            return 0.0;
        }
        let a = tire_angle.abs();
        let magnitude = if a >= self.max_tire_angle {
            1.0
        } else {
            let i = self.table.partition_point(|&(x, _)| x <= a);
            let (x0, y0) = self.table[i - 1];
            let (x1, y1) = self.table[i];
            y0 + (y1 - y0) * (a - x0) / (x1 - x0)
        };
        magnitude.copysign(tire_angle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curved() -> SteerMap {
        SteerMap::new(0.6, vec![(0.0, 0.0), (0.2, 0.25), (0.4, 0.6), (0.6, 1.0)]).unwrap()
    }

    #[test]
    fn endpoints_and_origin() {
        let m = SteerMap::linear(0.61).unwrap();
        assert_eq!(m.map(0.0), 0.0);
        assert_eq!(m.map(0.61), 1.0);
        assert_eq!(m.map(-0.61), -1.0);
        assert_eq!(m.map(2.0), 1.0);
        assert_eq!(m.map(-2.0), -1.0);
    }

    #[test]
    fn interpolates_between_neighbours() {
        let m = curved();
        // Direct two-point interpolation between (0.2, 0.25) and (0.4, 0.6).
        let a = 0.33;
        let expected = 0.25 + (0.6 - 0.25) * (a - 0.2) / (0.4 - 0.2);
        assert!((m.map(a) - expected).abs() < 1e-12);
        assert_eq!(m.map(0.4), 0.6);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(SteerMap::new(0.6, vec![(0.0, 0.0)]).is_err());
        assert!(SteerMap::new(0.6, vec![(0.1, 0.0), (0.6, 1.0)]).is_err());
        assert!(SteerMap::new(0.6, vec![(0.0, 0.0), (0.5, 1.0)]).is_err());
        assert!(SteerMap::new(0.6, vec![(0.0, 0.0), (0.3, 0.7), (0.2, 0.8), (0.6, 1.0)]).is_err());
        assert!(SteerMap::new(0.6, vec![(0.0, 0.0), (0.3, 0.7), (0.4, 0.7), (0.6, 1.0)]).is_err());
        assert!(SteerMap::new(-1.0, vec![(0.0, 0.0), (-1.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn map_is_odd(a in -1.0f64..1.0) {
            let m = curved();
            prop_assert_eq!(m.map(-a), -m.map(a));
        }

        #[test]
        fn map_is_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let m = curved();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.map(lo) <= m.map(hi));
            prop_assert!(m.map(hi).abs() <= 1.0);
        }
    }
}
