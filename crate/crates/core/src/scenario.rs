//! Array geometry, steering vectors and seeded channel realizations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cr, CMat, CVec};
use crate::units::{db_to_linear, dbm_to_watts};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Element spacing in wavelengths (d/λ).
    pub spacing_over_wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(n_tx: usize, n_rx: usize, spacing_over_wavelength: f64) -> Result<Self> {
        let g = Self { n_tx, n_rx, spacing_over_wavelength };
        g.validate()?;
        Ok(g)
    }

    /// Half-wavelength spaced arrays.
    pub fn half_wavelength(n_tx: usize, n_rx: usize) -> Self {
        Self { n_tx, n_rx, spacing_over_wavelength: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(Error::InvalidInput("array sizes must be at least 1".into()));
        }
        if !(self.spacing_over_wavelength > 0.0) || !self.spacing_over_wavelength.is_finite() {
            return Err(Error::InvalidInput("element spacing must be positive".into()));
        }
        Ok(())
    }
}

fn ula_response(n: usize, spacing: f64, angle_deg: f64) -> CVec {
    let phase = 2.0 * PI * spacing * angle_deg.to_radians().sin();
    let scale = 1.0 / (n as f64).sqrt();
    CVec::from_iterator(n, (0..n).map(|i| Complex64::from_polar(scale, phase * i as f64)))
}

/// Unit-norm transmit steering vector `a_t(θ)`.
pub fn steering_tx(geometry: &ArrayGeometry, angle_deg: f64) -> CVec {
    ula_response(geometry.n_tx, geometry.spacing_over_wavelength, angle_deg)
}

/// Unit-norm receive steering vector `a_r(θ)`.
pub fn steering_rx(geometry: &ArrayGeometry, angle_deg: f64) -> CVec {
    ula_response(geometry.n_rx, geometry.spacing_over_wavelength, angle_deg)
}

/// A point reflector seen by the co-located arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScatterer {
    pub angle_deg: f64,
    /// `|β|²`, linear.
    pub power_gain: f64,
    /// `β`
    pub amplitude: Complex64,
}

impl PointScatterer {
    pub fn new(angle_deg: f64, power_gain: f64, phase: f64) -> Self {
        Self { angle_deg, power_gain, amplitude: Complex64::from_polar(power_gain.sqrt(), phase) }
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            angle_deg: self.angle_deg,
            power_gain: self.power_gain * factor * factor,
            amplitude: self.amplitude * factor,
        }
    }
}

/// Two-way response `A(θ) = a_r(θ) a_tᴴ(θ)` of a scatterer (without `β`).
pub fn effective_matrix(scatterer: &PointScatterer, geometry: &ArrayGeometry) -> CMat {
    let at = steering_tx(geometry, scatterer.angle_deg);
    let ar = steering_rx(geometry, scatterer.angle_deg);
    &ar * at.adjoint()
}

/// One realized problem instance in watts / linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub target: PointScatterer,
    pub interferers: Vec<PointScatterer>,
    /// `H_SI`, already scaled by `√α_SI`.
    pub si_channel: CMat,
    pub si_power: f64,
    pub uplink_channels: Vec<CVec>,
    pub downlink_channels: Vec<CVec>,
    pub noise_rx: f64,
    pub noise_dl: Vec<f64>,
    pub p_max_bs: f64,
    pub p_max_ul: Vec<f64>,
}

/// A scenario rescaled so that all noise powers equal one and transmit powers
/// are expressed in units of `power_unit` watts. SINRs are unchanged.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub scenario: Scenario,
    pub power_unit: f64,
}

impl Scenario {
    pub fn n_tx(&self) -> usize {
        self.geometry.n_tx
    }

    pub fn n_rx(&self) -> usize {
        self.geometry.n_rx
    }

    /// Number of uplink users.
    pub fn k(&self) -> usize {
        self.uplink_channels.len()
    }

    /// Number of downlink users.
    pub fn l(&self) -> usize {
        self.downlink_channels.len()
    }

    pub fn target_tx_steering(&self) -> CVec {
        steering_tx(&self.geometry, self.target.angle_deg)
    }

    pub fn target_rx_steering(&self) -> CVec {
        steering_rx(&self.geometry, self.target.angle_deg)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let (nt, nr) = (self.n_tx(), self.n_rx());
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        for s in std::iter::once(&self.target).chain(&self.interferers) {
            if !(-90.0..=90.0).contains(&s.angle_deg) {
                return bad("scatterer angle outside [-90, 90] degrees");
            }
            if !(s.power_gain >= 0.0) || !s.power_gain.is_finite() {
                return bad("scatterer power gain must be finite and nonnegative");
            }
            let tol = 1e-12 * s.power_gain.max(f64::MIN_POSITIVE);
            if (s.amplitude.norm_sqr() - s.power_gain).abs() > tol.max(1e-300) {
                return bad("scatterer amplitude inconsistent with its power gain");
            }
        }
        if self.interferers.iter().any(|i| i.angle_deg == self.target.angle_deg) {
            return bad("interferer angle coincides with the target angle");
        }
        if self.si_channel.shape() != (nr, nt) {
            return bad("SI channel has wrong dimensions");
        }
        if self.uplink_channels.iter().any(|h| h.len() != nr) {
            return bad("uplink channel has wrong dimension");
        }
        if self.downlink_channels.iter().any(|g| g.len() != nt) {
            return bad("downlink channel has wrong dimension");
        }
        if self.noise_dl.len() != self.l() || self.p_max_ul.len() != self.k() {
            return bad("per-user parameter lists do not match the user counts");
        }
        if !(self.noise_rx > 0.0) || self.noise_dl.iter().any(|&n| !(n > 0.0)) {
            return bad("noise powers must be positive");
        }
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.si_power)
            || !finite_nonneg(self.p_max_bs)
            || self.p_max_ul.iter().any(|&p| !finite_nonneg(p))
            || !self.noise_rx.is_finite()
            || self.noise_dl.iter().any(|n| !n.is_finite())
        {
            return bad("power fields must be finite and nonnegative");
        }
        Ok(())
    }

    /// Same instance with the uplink users removed.
    pub fn without_uplink(&self) -> Scenario {
        Scenario { uplink_channels: Vec::new(), p_max_ul: Vec::new(), ..self.clone() }
    }

    /// Same instance with the downlink users removed.
    pub fn without_downlink(&self) -> Scenario {
        Scenario { downlink_channels: Vec::new(), noise_dl: Vec::new(), ..self.clone() }
    }

    pub fn normalized(&self) -> Normalized {
        let unit = if self.p_max_bs > 0.0 { self.p_max_bs } else { 1.0 };
        let rx = (unit / self.noise_rx).sqrt();
        let scenario = Scenario {
            geometry: self.geometry,
            target: self.target.scaled(rx),
            interferers: self.interferers.iter().map(|s| s.scaled(rx)).collect(),
            si_channel: &self.si_channel * cr(rx),
            si_power: self.si_power * rx * rx,
            uplink_channels: self.uplink_channels.iter().map(|h| h * cr(rx)).collect(),
            downlink_channels: self
                .downlink_channels
                .iter()
                .zip(&self.noise_dl)
                .map(|(g, n)| g * cr((unit / n).sqrt()))
                .collect(),
            noise_rx: 1.0,
            noise_dl: vec![1.0; self.l()],
            p_max_bs: self.p_max_bs / unit,
            p_max_ul: self.p_max_ul.iter().map(|p| p / unit).collect(),
        };
        Normalized { scenario, power_unit: unit }
    }
}

/// Interference channels `B = Σ_{i≥1} β_i A(θ_i) + H_SI` and
/// `C = Σ_{i≥0} β_i A(θ_i) + H_SI`.
pub fn interference_channels(scenario: &Scenario) -> (CMat, CMat) {
    let g = &scenario.geometry;
    let mut b = scenario.si_channel.clone();
    for s in &scenario.interferers {
        b += effective_matrix(s, g) * s.amplitude;
    }
    let c = &b + effective_matrix(&scenario.target, g) * scenario.target.amplitude;
    (b, c)
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    /// d/λ
    pub spacing: f64,
}

/// Angle and power gain of a point scatterer. `power_dbm` is the gain `|β|²`
/// quoted on the same dBm scale as the noise powers, so that
/// `power_dbm - noise.rx_dbm` is the scatterer-to-noise ratio in dB at unit
/// transmit power in milliwatts; the linear gain is `10^(power_dbm/10)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererConfig {
    pub angle_deg: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiModel {
    /// Unit-modulus entries with i.i.d. uniform phases.
    #[default]
    RandomPhase,
    /// Entries `e^{-j2π d_pq/λ}` for parallel arrays `separation` wavelengths apart.
    Geometric,
    /// No residual self-interference.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiConfig {
    pub alpha_db: f64,
    #[serde(default)]
    pub model: SiModel,
    /// Array separation in wavelengths, geometric model only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsersConfig {
    pub k: usize,
    pub l: usize,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossConfig {
    pub xi0_db: f64,
    pub d0_m: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub rx_dbm: f64,
    pub dl_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub bs_dbm: f64,
    pub ul_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    #[default]
    Rayleigh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default)]
    pub fading: FadingModel,
    pub geometry: GeometryConfig,
    pub target: ScattererConfig,
    #[serde(default)]
    pub interferers: Vec<ScattererConfig>,
    pub si: SiConfig,
    pub users: UsersConfig,
    pub pathloss: PathlossConfig,
    pub noise: NoiseConfig,
    pub power: PowerConfig,
}

impl Default for ScenarioConfig {
    /// The reference setup: 8+8 half-wavelength ULAs, three uplink and three
    /// downlink users at 200 m, a target at 0° and interferers at -60° and 45°.
    fn default() -> Self {
        Self {
            seed: 0,
            fading: FadingModel::Rayleigh,
            geometry: GeometryConfig { n_tx: 8, n_rx: 8, spacing: 0.5 },
            target: ScattererConfig { angle_deg: 0.0, power_dbm: -100.0 },
            interferers: vec![
                ScattererConfig { angle_deg: -60.0, power_dbm: -90.0 },
                ScattererConfig { angle_deg: 45.0, power_dbm: -90.0 },
            ],
            si: SiConfig { alpha_db: -110.0, model: SiModel::RandomPhase, separation: None },
            users: UsersConfig { k: 3, l: 3, distance_m: 200.0 },
            pathloss: PathlossConfig { xi0_db: -30.0, d0_m: 1.0, kappa: 3.0 },
            noise: NoiseConfig { rx_dbm: -100.0, dl_dbm: -100.0 },
            power: PowerConfig { bs_dbm: 15.0, ul_dbm: 5.0 },
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always serializable")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Large-scale gain `ξ = ξ₀ (d/d₀)^{-κ}` of the user links.
    pub fn path_gain(&self) -> f64 {
        let p = &self.pathloss;
        db_to_linear(p.xi0_db) * (self.users.distance_m / p.d0_m).powf(-p.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        ArrayGeometry::new(self.geometry.n_tx, self.geometry.n_rx, self.geometry.spacing)
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.users.distance_m > 0.0) || !(self.pathloss.d0_m > 0.0) {
            return bad("distances must be positive");
        }
        if !self.noise.rx_dbm.is_finite() || !self.noise.dl_dbm.is_finite() {
            return bad("noise powers must be finite");
        }
        if self.si.model == SiModel::Geometric && !self.si.separation.is_some_and(|s| s > 0.0) {
            return bad("geometric SI model requires a positive si.separation");
        }
        Ok(())
    }
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Realize one instance. Deterministic in `config.seed`.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let geometry = ArrayGeometry::new(config.geometry.n_tx, config.geometry.n_rx, config.geometry.spacing)?;
    let (nt, nr) = (geometry.n_tx, geometry.n_rx);

    let mut scatterer = |s: &ScattererConfig| {
        let phase = rng.gen_range(0.0..2.0 * PI);
        PointScatterer::new(s.angle_deg, db_to_linear(s.power_dbm), phase)
    };
    let target = scatterer(&config.target);
    let interferers: Vec<_> = config.interferers.iter().map(&mut scatterer).collect();

    let si_power = match config.si.model {
        SiModel::None => 0.0,
        _ => db_to_linear(config.si.alpha_db),
    };
    let amp = si_power.sqrt();
    let si_channel = match config.si.model {
        SiModel::None => CMat::zeros(nr, nt),
        SiModel::RandomPhase => {
            CMat::from_fn(nr, nt, |_, _| Complex64::from_polar(amp, rng.gen_range(0.0..2.0 * PI)))
        }
        SiModel::Geometric => {
            let sep = config.si.separation.unwrap_or(1.0);
            let d = geometry.spacing_over_wavelength;
            CMat::from_fn(nr, nt, |p, q| {
                let dist = (((p as f64) - (q as f64)) * d).hypot(sep);
                Complex64::from_polar(amp, -2.0 * PI * dist)
            })
        }
    };

    let xi = config.path_gain();
    let uplink_channels: Vec<CVec> = (0..config.users.k)
        .map(|_| CVec::from_fn(nr, |_, _| complex_gaussian(&mut rng, xi)))
        .collect();
    let downlink_channels: Vec<CVec> = (0..config.users.l)
        .map(|_| CVec::from_fn(nt, |_, _| complex_gaussian(&mut rng, xi)))
        .collect();

    let scenario = Scenario {
        geometry,
        target,
        interferers,
        si_channel,
        si_power,
        uplink_channels,
        downlink_channels,
        noise_rx: dbm_to_watts(config.noise.rx_dbm),
        noise_dl: vec![dbm_to_watts(config.noise.dl_dbm); config.users.l],
        p_max_bs: dbm_to_watts(config.power.bs_dbm),
        p_max_ul: vec![dbm_to_watts(config.power.ul_dbm); config.users.k],
    };
    scenario.validate()?;
    Ok(scenario)
}
