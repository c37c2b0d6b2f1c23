use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::HarmonicGrid;
use crate::scalar::{cis, CVector, Real, C};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// An LFMCW radar with a uniform linear half-wavelength array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadarSensor<T: Real> {
    pub position: [T; 2],
    /// Array broadside direction relative to the x axis, radians.
    pub orientation: T,
    pub chirp_rate: T,
    pub sample_interval: T,
    pub n_delay: usize,
    pub n_elements: usize,
    pub carrier: T,
}

impl<T: Real> RadarSensor<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_delay == 0 || self.n_elements == 0 {
            return Err(Error::Validation("sensor needs at least one delay sample and one element".into()));
        }
        for (name, v) in
            [("chirp rate", self.chirp_rate), ("sample interval", self.sample_interval), ("carrier", self.carrier)]
        {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Validation(format!("sensor {name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_delay * self.n_elements
    }

    pub fn grid(&self) -> HarmonicGrid {
        HarmonicGrid::new(self.n_delay, self.n_elements)
    }

    pub fn range(&self, p: [T; 2]) -> T {
        let dx = p[0] - self.position[0];
        let dy = p[1] - self.position[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Per-sample delay phase step `4 pi mu Ts d / c`.
    pub fn delay_phase(&self, d: T) -> T {
        T::lit(4.0) * T::pi() * self.chirp_rate * self.sample_interval * d / T::lit(SPEED_OF_LIGHT)
    }

    /// Angle of `p` off broadside, `atan2(p - p_s) - orientation`.
    pub fn angle(&self, p: [T; 2]) -> Result<T> {
        let dx = p[0] - self.position[0];
        let dy = p[1] - self.position[1];
        if dx == T::zero() && dy == T::zero() {
            return Err(self.degenerate(p));
        }
        Ok(dy.atan2(dx) - self.orientation)
    }

    /// The generating phasors `(u, v)` of the atom at `p`: the dictionary
    /// entry `m_d * M_theta + m_theta` equals `u^m_d v^m_theta`.
    pub fn phasors(&self, p: [T; 2]) -> Result<(C<T>, C<T>)> {
        let dx = p[0] - self.position[0];
        let dy = p[1] - self.position[1];
        let d = (dx * dx + dy * dy).sqrt();
        if !(d > T::zero()) {
            return Err(self.degenerate(p));
        }
        let (s, c) = self.orientation.sin_cos();
        let sin_theta = (dy * c - dx * s) / d;
        Ok((cis(self.delay_phase(d)), cis(T::pi() * sin_theta)))
    }

    pub fn steering_delay(&self, p: [T; 2]) -> Result<CVector<T>> {
        if !(self.range(p) > T::zero()) {
            return Err(self.degenerate(p));
        }
        Ok(self.steering_delay_at_range(self.range(p)))
    }

    /// Delay steering vector at range `d`; `d = 0` gives all ones.
    pub fn steering_delay_at_range(&self, d: T) -> CVector<T> {
        let step = self.delay_phase(d);
        CVector::from_fn(self.n_delay, |m, _| cis(step * T::lit(m as f64)))
    }

    pub fn steering_angle(&self, p: [T; 2]) -> Result<CVector<T>> {
        let theta = self.angle(p)?;
        Ok(self.steering_angle_at(theta))
    }

    pub fn steering_angle_at(&self, theta: T) -> CVector<T> {
        let step = T::pi() * theta.sin();
        CVector::from_fn(self.n_elements, |m, _| cis(step * T::lit(m as f64)))
    }

    /// Vectorized outer product of delay and angle steering vectors,
    /// delay-major.
    pub fn dictionary_eval(&self, p: [T; 2]) -> Result<CVector<T>> {
        let (u, v) = self.phasors(p)?;
        Ok(self.grid().atom(u, v))
    }

    /// Radar-range received power `c^2 / (f_c^2 (4 pi)^3 d^4)`.
    pub fn amplitude_power(&self, d: T) -> Result<T> {
        if !(d > T::zero()) {
            return Err(Error::Validation(format!("range must be positive, got {}", d.to_f64_lossy())));
        }
        let c = T::lit(SPEED_OF_LIGHT);
        let four_pi = T::lit(4.0) * T::pi();
        Ok(c * c / (self.carrier * self.carrier * four_pi.powi(3) * d.powi(4)))
    }

    fn degenerate(&self, p: [T; 2]) -> Error {
        Error::DegenerateGeometry { position: [p[0].to_f64_lossy(), p[1].to_f64_lossy()] }
    }
}

impl RadarSensor<f64> {
    /// 77 GHz sensor with chirp rate 8 MHz/us and 0.2 us sampling, array
    /// facing the diagonal of the first quadrant.
    pub fn automotive(position: [f64; 2], n_delay: usize, n_elements: usize) -> Self {
        Self {
            position,
            orientation: std::f64::consts::FRAC_PI_4,
            chirp_rate: 8e12,
            sample_interval: 2e-7,
            n_delay,
            n_elements,
            carrier: 77e9,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn sensor(md: usize, mt: usize) -> RadarSensor<f64> {
        RadarSensor::automotive([0.0, 0.0], md, mt)
    }

    #[test]
    fn delay_at_zero_range_is_ones() {
        let a = sensor(20, 10).steering_delay_at_range(0.0);
        assert!(a.iter().all(|x| (x - C::new(1.0, 0.0)).norm() == 0.0));
    }

    #[test]
    fn delay_phase_spans_fraction_of_cycle() {
        let s = sensor(20, 10);
        let d = SPEED_OF_LIGHT / (4.0 * s.chirp_rate * s.sample_interval * s.n_delay as f64);
        let a = s.steering_delay_at_range(d);
        let last = a[s.n_delay - 1].arg().rem_euclid(2.0 * PI);
        // with the 4 pi round-trip phase this range advances pi / M_d per
        // sample, so the last entry sits at (M_d - 1) / M_d of a half cycle
        let expected = PI * (s.n_delay as f64 - 1.0) / s.n_delay as f64;
        assert!((last - expected).abs() < 1e-9);
        assert_eq!(a[0], C::new(1.0, 0.0));
    }

    #[test]
    fn delay_entry_one_at_region_centre() {
        let s = sensor(20, 10);
        let d = 25.0 * 2f64.sqrt();
        let a = s.steering_delay([25.0, 25.0]).unwrap();
        let phase = 4.0 * PI * 8e12 * 2e-7 * d / 299_792_458.0;
        assert!((a[1] - C::new(phase.cos(), phase.sin())).norm() < 1e-12);
    }

    #[test]
    fn angle_steering_cases() {
        let s = sensor(2, 6);
        let broadside = s.steering_angle_at(0.0);
        assert!(broadside.iter().all(|x| (x - C::new(1.0, 0.0)).norm() < 1e-15));
        let endfire = s.steering_angle_at(FRAC_PI_2);
        for (m, x) in endfire.iter().enumerate() {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((x - C::new(sign, 0.0)).norm() < 1e-12);
        }
        assert!((s.angle([1.0, 1.0]).unwrap()).abs() < 1e-15);
        let diag = s.steering_angle([1.0, 1.0]).unwrap();
        assert!(diag.iter().all(|x| (x - C::new(1.0, 0.0)).norm() < 1e-12));
        assert_eq!(s.orientation, FRAC_PI_4);
    }

    #[test]
    fn dictionary_is_delay_major_outer_product() {
        let s = sensor(2, 2);
        let p = [3.0, 7.0];
        let ad = s.steering_delay(p).unwrap();
        let at = s.steering_angle(p).unwrap();
        let a = s.dictionary_eval(p).unwrap();
        let expected = [ad[0] * at[0], ad[0] * at[1], ad[1] * at[0], ad[1] * at[1]];
        for (x, y) in a.iter().zip(expected) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn dictionary_norm_is_m() {
        let s = sensor(20, 10);
        let a = s.dictionary_eval([17.0, 31.0]).unwrap();
        assert!((a.norm_squared() - 200.0).abs() < 1e-9);
        assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn coincident_target_is_degenerate() {
        let s = sensor(4, 4);
        assert!(matches!(s.dictionary_eval([0.0, 0.0]), Err(Error::DegenerateGeometry { .. })));
        assert!(matches!(s.steering_angle([0.0, 0.0]), Err(Error::DegenerateGeometry { .. })));
        assert!(matches!(s.steering_delay([0.0, 0.0]), Err(Error::DegenerateGeometry { .. })));
    }

    #[test]
    fn amplitude_power_law() {
        let s = sensor(4, 4);
        let p1 = s.amplitude_power(10.0).unwrap();
        let p2 = s.amplitude_power(20.0).unwrap();
        assert!((p1 / p2 - 16.0).abs() < 1e-10);
        assert!(s.amplitude_power(0.0).is_err());
        assert!(s.amplitude_power(-1.0).is_err());
    }

    #[test]
    fn amplitude_power_at_region_centre() {
        // regression constant for d = 25 sqrt 2 at 77 GHz, from the formula
        let d = 25.0 * 2f64.sqrt();
        let c = 299_792_458.0f64;
        let direct = c * c / (77e9f64.powi(2) * (4.0 * PI).powi(3) * d.powi(4));
        let v = sensor(4, 4).amplitude_power(d).unwrap();
        assert!((v - direct).abs() / direct < 1e-14);
        assert!((v - 4.8907e-15).abs() / v < 1e-3, "{v}");
    }

    #[test]
    fn single_precision_geometry() {
        let s = RadarSensor::<f32> {
            position: [0.0, 0.0],
            orientation: std::f32::consts::FRAC_PI_4,
            chirp_rate: 8e12,
            sample_interval: 2e-7,
            n_delay: 4,
            n_elements: 3,
            carrier: 77e9,
        };
        let a = s.dictionary_eval([10.0, 4.0]).unwrap();
        assert!((a.norm_squared() - 12.0).abs() < 1e-4);
    }
}
