use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson).
///
/// Tangents start from the average of adjacent secants (zero at local
/// extrema) and are then scaled into the monotonicity region, so the
/// interpolant never overshoots its knots on a monotone interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCurve1D {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl SplineCurve1D {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Data("spline needs at least two knots".into()));
        }
        if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Data("non-finite spline knot".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Ordering("spline knots must be strictly increasing".into()));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();

        let mut m = vec![0.0; n];
        m[0] = secants[0];
        m[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            let (a, b) = (secants[k - 1], secants[k]);
            m[k] = if a * b > 0.0 { 0.5 * (a + b) } else { 0.0 };
        }
        for k in 0..n - 1 {
            let d = secants[k];
            if d == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let alpha = m[k] / d;
            let beta = m[k + 1] / d;
            let r2 = alpha * alpha + beta * beta;
            if r2 > 9.0 {
                let t = 3.0 / r2.sqrt();
                m[k] = t * alpha * d;
                m[k + 1] = t * beta * d;
            }
        }
        Ok(SplineCurve1D { xs, ys, slopes: m })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn first(&self) -> f64 {
        self.xs[0]
    }

    pub fn last(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Evaluates the interpolant; extrapolation is refused.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        if !(x >= self.first() && x <= self.last()) {
            return Err(Error::Range(format!("spline query {x} outside [{}, {}]", self.first(), self.last())));
        }
        let k = match self.xs.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => return Ok(self.ys[i]),
            Err(i) => i - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table2() -> SplineCurve1D {
        let months = [12.0, 18.0, 24.0, 36.0, 48.0, 60.0, 84.0, 120.0, 180.0, 240.0, 360.0];
        let pct = [-0.1450, -0.1850, -0.2050, -0.2375, -0.2550, -0.2650, -0.2675, -0.2625, -0.2475, -0.2325, -0.2050];
        let knots: Vec<(f64, f64)> = months.iter().zip(pct).map(|(m, p)| (m / 12.0, p / 100.0)).collect();
        SplineCurve1D::new(&knots).unwrap()
    }

    #[test]
    fn reproduces_table_knot() {
        assert_eq!(table2().interpolate(5.0).unwrap(), -0.002650);
    }

    #[test]
    fn stays_between_monotone_neighbours() {
        let v = table2().interpolate(12.0).unwrap();
        assert!((-0.002625..=-0.002475).contains(&v), "{v}");
    }

    #[test]
    fn two_knots_are_linear() {
        let s = SplineCurve1D::new(&[(1.0, 1.0), (2.0, 3.0)]).unwrap();
        assert!((s.interpolate(1.5).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn refuses_extrapolation() {
        let s = table2();
        assert!(matches!(s.interpolate(0.5), Err(Error::Range(_))));
        assert!(matches!(s.interpolate(31.0), Err(Error::Range(_))));
    }

    proptest! {
        #[test]
        fn no_overshoot_on_monotone_intervals(
            steps in prop::collection::vec((0.1f64..3.0, -1.0f64..1.0), 2..12),
            frac in 0.0f64..1.0,
        ) {
            let mut x = 0.0;
            let mut y = 0.0;
            let mut knots = vec![(x, y)];
            for (dx, dy) in &steps {
                x += dx;
                y += dy;
                knots.push((x, y));
            }
            let s = SplineCurve1D::new(&knots).unwrap();
            for (a, b) in knots.iter().zip(knots.iter().skip(1)) {
                let q = a.0 + frac * (b.0 - a.0);
                let v = s.interpolate(q).unwrap();
                let (lo, hi) = (a.1.min(b.1), a.1.max(b.1));
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} not in [{}, {}]", v, lo, hi);
            }
            for (kx, ky) in &knots {
                prop_assert_eq!(s.interpolate(*kx).unwrap(), *ky);
            }
        }
    }
}
