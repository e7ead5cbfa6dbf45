/// Axis-aligned bounding box in world meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    /// Returns `None` unless `min <= max` componentwise and all values are finite.
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Option<Self> {
        let ok = (0..3).all(|i| min[i].is_finite() && max[i].is_finite() && min[i] <= max[i]);
        ok.then_some(Aabb { min, max })
    }

    pub fn from_center(center: [f64; 3], extents: [f64; 3]) -> Self {
        let half = extents.map(|e| e * 0.5);
        Aabb {
            min: [0, 1, 2].map(|i| center[i] - half[i]),
            max: [0, 1, 2].map(|i| center[i] + half[i]),
        }
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| 0.5 * (self.min[i] + self.max[i]))
    }

    pub fn extents(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.max[i] - self.min[i])
    }

    /// Positive overlap along one axis, zero when disjoint or touching.
    pub fn axis_overlap(&self, other: &Aabb, axis: usize) -> f64 {
        (self.max[axis].min(other.max[axis]) - self.min[axis].max(other.min[axis])).max(0.0)
    }

    pub fn overlap_volume(&self, other: &Aabb) -> f64 {
        (0..3).map(|i| self.axis_overlap(other, i)).product()
    }

    pub fn contains(&self, other: &Aabb, tol: f64) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] - tol && other.max[i] <= self.max[i] + tol)
    }
}

/// Overlap volume in cubic meters.
pub fn aabb_overlap(a: &Aabb, b: &Aabb) -> f64 {
    a.overlap_volume(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(at: [f64; 3]) -> Aabb {
        Aabb::new(at, [at[0] + 1.0, at[1] + 1.0, at[2] + 1.0]).unwrap()
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(aabb_overlap(&unit([0.0; 3]), &unit([0.0; 3])), 1.0);
        assert_eq!(aabb_overlap(&unit([0.0; 3]), &unit([1.0, 0.0, 0.0])), 0.0);
        // 0.5 * 1 * 1
        assert_eq!(aabb_overlap(&unit([0.0; 3]), &unit([0.5, 0.0, 0.0])), 0.5);
        assert_eq!(aabb_overlap(&unit([0.0; 3]), &unit([0.5, 0.5, 0.0])), 0.25);
    }

    #[test]
    fn invalid_boxes_are_rejected() {
        assert!(Aabb::new([1.0, 0.0, 0.0], [0.0, 1.0, 1.0]).is_none());
        assert!(Aabb::new([f64::NAN, 0.0, 0.0], [1.0, 1.0, 1.0]).is_none());
    }

    proptest! {
        #[test]
        fn overlap_is_symmetric_and_bounded(
            a in prop::array::uniform3(-5.0f64..5.0), ea in prop::array::uniform3(0.0f64..3.0),
            b in prop::array::uniform3(-5.0f64..5.0), eb in prop::array::uniform3(0.0f64..3.0),
        ) {
            let x = Aabb::from_center(a, ea);
            let y = Aabb::from_center(b, eb);
            let v = aabb_overlap(&x, &y);
            prop_assert_eq!(v, aabb_overlap(&y, &x));
            prop_assert!(v >= 0.0);
            let vx: f64 = ea.iter().product();
            let vy: f64 = eb.iter().product();
            prop_assert!(v <= vx.min(vy) + 1e-12);
        }

        #[test]
        fn separated_boxes_do_not_overlap(
            a in prop::array::uniform3(-5.0f64..5.0), e in prop::array::uniform3(0.01f64..3.0),
            axis in 0usize..3, gap in 0.0f64..2.0,
        ) {
            let x = Aabb::from_center(a, e);
            let mut c = a;
            c[axis] += e[axis] + gap;
            let y = Aabb::from_center(c, e);
            prop_assert!(aabb_overlap(&x, &y) < 1e-12);
        }
    }
}
