//! Prior, state-transition and birth models shared by the simulator and the
//! tracker. Time is measured in steps (`dt = 1`).

use nalgebra::{Matrix2, Matrix4, Matrix4x2, Vector2, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant-velocity model, state `[px, py, vx, vy]`.
#[derive(Clone, Debug)]
pub struct KinematicTransition {
    pub f: Matrix4<f64>,
    pub w: Matrix4x2<f64>,
    pub driving_noise_cov: Matrix2<f64>,
    noise_chol: Matrix2<f64>,
}

impl KinematicTransition {
    pub fn new(driving_noise_cov: Matrix2<f64>) -> Result<Self> {
        let sym = (driving_noise_cov - driving_noise_cov.transpose()).abs().max();
        if sym > 1e-12 * driving_noise_cov.abs().max().max(1.0) {
            return Err(Error::Validation("driving noise covariance is not symmetric".into()));
        }
        let noise_chol = if driving_noise_cov == Matrix2::zeros() {
            Matrix2::zeros()
        } else {
            driving_noise_cov
                .cholesky()
                .ok_or_else(|| Error::Validation("driving noise covariance is not PSD".into()))?
                .l()
        };
        #[rustfmt::skip]
        let f = Matrix4::new(
            1.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let w = Matrix4x2::new(
            0.5, 0.0,
            0.0, 0.5,
            1.0, 0.0,
            0.0, 1.0,
        );
        Ok(Self { f, w, driving_noise_cov, noise_chol })
    }

    pub fn isotropic(var: f64) -> Result<Self> {
        Self::new(Matrix2::identity() * var)
    }

    /// `W Q W^T`.
    pub fn process_cov(&self) -> Matrix4<f64> {
        self.w * self.driving_noise_cov * self.w.transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &Vector4<f64>, rng: &mut R) -> Vector4<f64> {
        let q = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        self.f * x + self.w * (self.noise_chol * q)
    }
}

pub fn cv_sample<R: Rng + ?Sized>(t: &KinematicTransition, x: &Vector4<f64>, rng: &mut R) -> Vector4<f64> {
    t.sample(x, rng)
}

/// Parameterization of the gamma random-walk transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaForm {
    /// `G(next; shape = prev / c, scale = c)`: mean `prev`, variance `prev * c`.
    ShapeScale,
    /// `G(next; shape = c, scale = prev / c)`: mean `prev`, variance `prev^2 / c`.
    MeanConcentration,
}

/// Gamma random walk on a positive power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTransition {
    pub concentration: f64,
    pub form: GammaForm,
}

/// Floor applied to `prev` before it becomes a gamma parameter.
pub const GAMMA_PREV_FLOOR: f64 = 1e-12;

impl GammaTransition {
    pub fn new(concentration: f64, form: GammaForm) -> Result<Self> {
        if !(concentration > 0.0) || !concentration.is_finite() {
            return Err(Error::Validation(format!("gamma concentration must be positive, got {concentration}")));
        }
        Ok(Self { concentration, form })
    }

    /// `(shape, scale)` of the conditional for a given previous value.
    pub fn params(&self, prev: f64) -> (f64, f64) {
        let prev = prev.max(GAMMA_PREV_FLOOR);
        let c = self.concentration;
        match self.form {
            GammaForm::ShapeScale => (prev / c, c),
            GammaForm::MeanConcentration => (c, prev / c),
        }
    }

    pub fn mean(&self, prev: f64) -> f64 {
        let (k, s) = self.params(prev);
        k * s
    }

    pub fn variance(&self, prev: f64) -> f64 {
        let (k, s) = self.params(prev);
        k * s * s
    }

    /// Draws the next value; `prev` at or below zero is clamped to the floor.
    pub fn sample<R: Rng + ?Sized>(&self, prev: f64, rng: &mut R) -> f64 {
        let (k, s) = self.params(prev);
        let g = Gamma::new(k, s).expect("positive gamma parameters");
        g.sample(rng).max(f64::MIN_POSITIVE)
    }

    pub fn logpdf(&self, prev: f64, next: f64) -> f64 {
        if !(next > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (k, s) = self.params(prev);
        (k - 1.0) * next.ln() - next / s - statrs::function::gamma::ln_gamma(k) - k * s.ln()
    }
}

pub fn gamma_sample<R: Rng + ?Sized>(t: &GammaTransition, prev: f64, rng: &mut R) -> Result<f64> {
    if !(prev > 0.0) {
        return Err(Error::Validation(format!("previous power must be positive, got {prev}")));
    }
    Ok(t.sample(prev, rng))
}

pub fn gamma_logpdf(t: &GammaTransition, prev: f64, next: f64) -> Result<f64> {
    if !(prev > 0.0) {
        return Err(Error::Validation(format!("previous power must be positive, got {prev}")));
    }
    Ok(t.logpdf(prev, next))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalModel {
    pub p_s: f64,
}

impl SurvivalModel {
    pub fn new(p_s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_s) {
            return Err(Error::Validation(format!("survival probability {p_s} outside [0, 1]")));
        }
        Ok(Self { p_s })
    }

    pub fn predict(&self, r_prev: f64) -> f64 {
        survival_transition(self.p_s, r_prev)
    }
}

/// Predicted existence probability `p_s * r_prev`.
pub fn survival_transition(p_s: f64, r_prev: f64) -> f64 {
    p_s * r_prev
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Region {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.min[0]..=self.max[0]).contains(&p[0]) && (self.min[1]..=self.max[1]).contains(&p[1])
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]).max(0.0) * (self.max[1] - self.min[1]).max(0.0)
    }
}

/// Poisson birth process discretized into disjoint rectangular cells, each
/// of which hosts one potential new object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthModel {
    pub roi: Region,
    pub cell_size: [f64; 2],
    pub n_cells: [usize; 2],
    pub mean_births: f64,
    pub cell_mean: Vec<f64>,
    pub cell_existence: Vec<f64>,
    pub velocity_var: f64,
    pub power_max: f64,
}

impl BirthModel {
    /// Uniform spatial birth density over `roi`. A trailing partial row or
    /// column of cells is clipped to the ROI and weighted by its area.
    pub fn build(
        roi: Region,
        cell_size: [f64; 2],
        mean_births: f64,
        velocity_var: f64,
        power_max: f64,
    ) -> Result<Self> {
        let area = roi.area();
        if !(area > 0.0) {
            return Err(Error::Validation("birth region is empty".into()));
        }
        if !(cell_size[0] > 0.0 && cell_size[1] > 0.0) {
            return Err(Error::Validation("birth cell size must be positive".into()));
        }
        if !(mean_births >= 0.0) || !(velocity_var >= 0.0) || !(power_max > 0.0) {
            return Err(Error::Validation("birth intensities must be nonnegative".into()));
        }
        let nx = (((roi.max[0] - roi.min[0]) / cell_size[0]) - 1e-9).ceil().max(1.0) as usize;
        let ny = (((roi.max[1] - roi.min[1]) / cell_size[1]) - 1e-9).ceil().max(1.0) as usize;
        let mut model = Self {
            roi,
            cell_size,
            n_cells: [nx, ny],
            mean_births,
            cell_mean: Vec::with_capacity(nx * ny),
            cell_existence: Vec::with_capacity(nx * ny),
            velocity_var,
            power_max,
        };
        for q in 0..nx * ny {
            let mu = mean_births * model.cell(q).area() / area;
            model.cell_mean.push(mu);
            model.cell_existence.push(birth_existence(mu));
        }
        Ok(model)
    }

    pub fn n_cells_total(&self) -> usize {
        self.n_cells[0] * self.n_cells[1]
    }

    /// Cell `q`, row-major in y: `q = iy * nx + ix`.
    pub fn cell(&self, q: usize) -> Region {
        let (ix, iy) = (q % self.n_cells[0], q / self.n_cells[0]);
        let x0 = self.roi.min[0] + ix as f64 * self.cell_size[0];
        let y0 = self.roi.min[1] + iy as f64 * self.cell_size[1];
        Region::new(
            [x0, y0],
            [(x0 + self.cell_size[0]).min(self.roi.max[0]), (y0 + self.cell_size[1]).min(self.roi.max[1])],
        )
    }

    pub fn cell_center(&self, q: usize) -> [f64; 2] {
        let c = self.cell(q);
        [0.5 * (c.min[0] + c.max[0]), 0.5 * (c.min[1] + c.max[1])]
    }

    pub fn cell_of(&self, p: [f64; 2]) -> Option<usize> {
        if !self.roi.contains(p) {
            return None;
        }
        let ix = (((p[0] - self.roi.min[0]) / self.cell_size[0]) as usize).min(self.n_cells[0] - 1);
        let iy = (((p[1] - self.roi.min[1]) / self.cell_size[1]) as usize).min(self.n_cells[1] - 1);
        Some(iy * self.n_cells[0] + ix)
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.n_cells_total()).map(|q| self.cell_center(q)).collect()
    }

    /// Draws prior particles for a new object in cell `q`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        q: usize,
        n_kin: usize,
        n_power: usize,
        n_dict: usize,
        rng: &mut R,
    ) -> Result<BirthSample> {
        if q >= self.n_cells_total() {
            return Err(Error::Validation(format!("birth cell {q} out of range")));
        }
        let cell = self.cell(q);
        let sd = self.velocity_var.sqrt();
        let kin = (0..n_kin)
            .map(|_| {
                let x = rng.gen_range(cell.min[0]..cell.max[0]);
                let y = rng.gen_range(cell.min[1]..cell.max[1]);
                let vx: f64 = rng.sample(StandardNormal);
                let vy: f64 = rng.sample(StandardNormal);
                Vector4::new(x, y, sd * vx, sd * vy)
            })
            .collect();
        let power = (0..n_dict).map(|_| (0..n_power).map(|_| rng.gen_range(0.0..self.power_max)).collect()).collect();
        Ok(BirthSample { kin, power, existence: self.cell_existence[q] })
    }
}

/// `mu / (mu + 1)`: probability of one versus zero births in a cell.
pub fn birth_existence(mu: f64) -> f64 {
    mu / (mu + 1.0)
}

pub fn build_birth(
    roi: Region,
    cell_size: [f64; 2],
    mean_births: f64,
    velocity_var: f64,
    power_max: f64,
) -> Result<BirthModel> {
    BirthModel::build(roi, cell_size, mean_births, velocity_var, power_max)
}

#[derive(Clone, Debug)]
pub struct BirthSample {
    pub kin: Vec<Vector4<f64>>,
    /// `power[i][p]`.
    pub power: Vec<Vec<f64>>,
    pub existence: f64,
}
