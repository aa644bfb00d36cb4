//! Radio layer: topology, channel realization, regularized zero-forcing
//! beamforming, SINR, achievable rate and per-AP transmit power.
//!
//! Every function here is pure; randomness only enters through the RNG
//! handed to [`draw_channel`] and [`RadioTopology::sample`].

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;

/// Logarithm base used by the path-loss law `148.1 + 37.6 log(d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    Log2,
    Log10,
}

/// Scalar radio parameters. Defaults follow the simulation table of the
/// reference scenario (9 dBi, 8 dB shadowing, -102 dBm, 10 MHz, 600 m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub n_aps: usize,
    pub n_users_max: usize,
    pub antenna_gain_dbi: f64,
    pub shadowing_std_db: f64,
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    pub p_max_watts: f64,
    /// Regularization variance of the beamformer in watts; `None` uses the
    /// linear noise power.
    pub reg_noise_w: Option<f64>,
    pub path_loss_base: LogBase,
    pub min_distance_km: f64,
    pub max_distance_km: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            n_aps: 20,
            n_users_max: 50,
            antenna_gain_dbi: 9.0,
            shadowing_std_db: 8.0,
            noise_dbm: -102.0,
            bandwidth_hz: 10e6,
            p_max_watts: 1.0,
            reg_noise_w: None,
            path_loss_base: LogBase::Log2,
            min_distance_km: 0.01,
            max_distance_km: 0.6,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_aps == 0 || self.n_users_max == 0 {
            return Err(Error::Config("n_aps and n_users_max must be at least 1".into()));
        }
        if !(self.p_max_watts > 0.0) {
            return Err(Error::Config("p_max_watts must be positive".into()));
        }
        if !(self.min_distance_km > 0.0 && self.min_distance_km <= self.max_distance_km) {
            return Err(Error::Config(
                "distances must satisfy 0 < min_distance_km <= max_distance_km".into(),
            ));
        }
        if self.shadowing_std_db < 0.0 || !self.bandwidth_hz.is_finite() {
            return Err(Error::Config("invalid shadowing spread or bandwidth".into()));
        }
        if let Some(s) = self.reg_noise_w {
            if !(s > 0.0) {
                return Err(Error::Config("reg_noise_w must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// The beamformer's regularization variance (defaults to the noise power).
    pub fn reg_noise(&self) -> f64 {
        self.reg_noise_w.unwrap_or_else(|| self.noise_w())
    }
}

/// AP/user geometry plus the radio parameters it was drawn under.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioTopology {
    pub params: RadioParams,
    /// `n_aps x n_users_max` distances in km; column `m` belongs to user slot `m`.
    pub distances: DMatrix<f64>,
}

impl RadioTopology {
    pub fn new(params: RadioParams, distances: DMatrix<f64>) -> Result<Self> {
        params.validate()?;
        if distances.nrows() != params.n_aps || distances.ncols() != params.n_users_max {
            return Err(Error::Contract(format!(
                "distance matrix is {}x{}, expected {}x{}",
                distances.nrows(),
                distances.ncols(),
                params.n_aps,
                params.n_users_max
            )));
        }
        if distances.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Domain("distances must be positive and finite".into()));
        }
        Ok(Self { params, distances })
    }

    /// Uniform distances in `[min_distance_km, max_distance_km]` for every slot.
    pub fn sample<R: Rng + ?Sized>(params: RadioParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let mut distances = DMatrix::zeros(params.n_aps, params.n_users_max);
        for m in 0..params.n_users_max {
            for n in 0..params.n_aps {
                distances[(n, m)] = sample_distance(&params, rng);
            }
        }
        Ok(Self { params, distances })
    }

    /// Redraws the geometry of one user slot (a new user took it).
    pub fn redraw_slot<R: Rng + ?Sized>(&mut self, slot: usize, rng: &mut R) {
        for n in 0..self.params.n_aps {
            self.distances[(n, slot)] = sample_distance(&self.params, rng);
        }
    }
}

fn sample_distance<R: Rng + ?Sized>(params: &RadioParams, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    params.min_distance_km + u * (params.max_distance_km - params.min_distance_km)
}

/// Complex channel gains, with the fading and shadowing draws kept for introspection.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    /// `N x M`; column `m` is `h_m`.
    pub gains: DMatrix<C64>,
    pub fading: DMatrix<C64>,
    /// Linear shadowing coefficients.
    pub shadowing: DMatrix<f64>,
}

impl ChannelMatrix {
    /// Wraps raw gains (fixtures); fading is set to the gains and shadowing to one.
    pub fn from_gains(gains: DMatrix<C64>) -> Self {
        let shadowing = DMatrix::from_element(gains.nrows(), gains.ncols(), 1.0);
        Self { fading: gains.clone(), gains, shadowing }
    }

    pub fn n_aps(&self) -> usize {
        self.gains.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.gains.ncols()
    }

    /// Sub-matrix with the listed user columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            gains: self.gains.select_columns(cols),
            fading: self.fading.select_columns(cols),
            shadowing: self.shadowing.select_columns(cols),
        }
    }

    /// Text fixture form: one `n m re im` row per entry.
    pub fn to_rows_text(&self) -> String {
        let mut out = String::new();
        for m in 0..self.n_users() {
            for n in 0..self.n_aps() {
                let h = self.gains[(n, m)];
                out.push_str(&format!("{n} {m} {:e} {:e}\n", h.re, h.im));
            }
        }
        out
    }

    pub fn from_rows_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Contract(format!("bad channel row: {line}")));
            }
            let parse_err = |_| Error::Contract(format!("bad channel row: {line}"));
            let n: usize = f[0].parse().map_err(parse_err)?;
            let m: usize = f[1].parse().map_err(parse_err)?;
            let re: f64 = f[2].parse().map_err(|_| Error::Contract(line.to_string()))?;
            let im: f64 = f[3].parse().map_err(|_| Error::Contract(line.to_string()))?;
            rows.push((n, m, C64::new(re, im)));
        }
        let n_aps = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n_users = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != n_aps * n_users {
            return Err(Error::Contract("channel rows do not form a full matrix".into()));
        }
        let mut gains = DMatrix::from_element(n_aps, n_users, C64::new(0.0, 0.0));
        for (n, m, h) in rows {
            gains[(n, m)] = h;
        }
        Ok(Self::from_gains(gains))
    }
}

/// Per-user precoders `v_m` (columns) and the powers they were scaled to.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformingSet {
    pub vectors: DMatrix<C64>,
    pub powers: Vec<f64>,
}

impl BeamformingSet {
    pub fn zeros(n_aps: usize, n_users: usize) -> Self {
        Self {
            vectors: DMatrix::from_element(n_aps, n_users, C64::new(0.0, 0.0)),
            powers: vec![0.0; n_users],
        }
    }

    pub fn n_aps(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.vectors.ncols()
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Path loss in dB at distance `d_km`: `148.1 + 37.6 log(d)`.
pub fn path_loss_db(d_km: f64, base: LogBase) -> Result<f64> {
    if !(d_km > 0.0) || !d_km.is_finite() {
        return Err(Error::Domain(format!("path loss needs a positive distance, got {d_km}")));
    }
    let log = match base {
        LogBase::Log2 => d_km.log2(),
        LogBase::Log10 => d_km.log10(),
    };
    Ok(148.1 + 37.6 * log)
}

/// One channel entry `10^(-L/20) sqrt(gain * shadowing) g`.
pub fn channel_gain(path_loss_db: f64, antenna_gain_dbi: f64, shadowing_lin: f64, g: C64) -> C64 {
    let scale = 10f64.powf(-path_loss_db / 20.0) * (db_to_linear(antenna_gain_dbi) * shadowing_lin).sqrt();
    g * scale
}

/// Draws one channel realization for every user slot of the topology.
///
/// Per entry, in column-major order: a log-normal shadowing draw, then the
/// real and imaginary parts of a `CN(0, 1)` fading coefficient.
pub fn draw_channel<R: Rng + ?Sized>(topology: &RadioTopology, rng: &mut R) -> Result<ChannelMatrix> {
    let p = &topology.params;
    let (n_aps, n_users) = (p.n_aps, p.n_users_max);
    let zero = C64::new(0.0, 0.0);
    let mut gains = DMatrix::from_element(n_aps, n_users, zero);
    let mut fading = DMatrix::from_element(n_aps, n_users, zero);
    let mut shadowing = DMatrix::zeros(n_aps, n_users);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for m in 0..n_users {
        for n in 0..n_aps {
            let z: f64 = StandardNormal.sample(rng);
            let theta = db_to_linear(p.shadowing_std_db * z);
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let g = C64::new(re * half, im * half);
            let pl = path_loss_db(topology.distances[(n, m)], p.path_loss_base)?;
            gains[(n, m)] = channel_gain(pl, p.antenna_gain_dbi, theta, g);
            fading[(n, m)] = g;
            shadowing[(n, m)] = theta;
        }
    }
    Ok(ChannelMatrix { gains, fading, shadowing })
}

/// Regularized zero-forcing precoders:
/// `v_m = sqrt(p_m) A^-1 h_m / |A^-1 h_m|` with `A = I + sum_j h_j h_j^H / reg_noise`.
pub fn beamform(h: &ChannelMatrix, powers: &[f64], reg_noise: f64) -> Result<BeamformingSet> {
    let (n_aps, n_users) = (h.n_aps(), h.n_users());
    if powers.len() != n_users {
        return Err(Error::Contract(format!(
            "{} powers for {} users",
            powers.len(),
            n_users
        )));
    }
    if powers.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::Domain("beamforming powers must be finite and non-negative".into()));
    }
    if !(reg_noise > 0.0) {
        return Err(Error::Domain("regularization variance must be positive".into()));
    }
    if n_users == 0 {
        return Ok(BeamformingSet::zeros(n_aps, 0));
    }
    let gains = &h.gains;
    let scaled = gains.map(|z| z / reg_noise.sqrt());
    let a = DMatrix::<C64>::identity(n_aps, n_aps) + &scaled * scaled.adjoint();
    let solved = a
        .lu()
        .solve(gains)
        .ok_or_else(|| Error::Domain("regularized channel matrix is singular".into()))?;
    let mut vectors = DMatrix::from_element(n_aps, n_users, C64::new(0.0, 0.0));
    for m in 0..n_users {
        let col = solved.column(m);
        let norm = col.norm();
        if norm > 0.0 && norm.is_finite() && powers[m] > 0.0 {
            let s = powers[m].sqrt() / norm;
            vectors.set_column(m, &(col * C64::new(s, 0.0)));
        }
    }
    Ok(BeamformingSet { vectors, powers: powers.to_vec() })
}

/// SINR of user `m`: own received power over interference plus noise.
pub fn sinr(h: &ChannelMatrix, v: &BeamformingSet, noise_w: f64, m: usize) -> Result<f64> {
    check_dims(h, v)?;
    if m >= h.n_users() {
        return Err(Error::Contract(format!("user {m} out of range")));
    }
    let hm = h.gains.column(m);
    let mut signal = 0.0;
    let mut interference = 0.0;
    for j in 0..v.n_users() {
        let p = hm.dotc(&v.vectors.column(j)).norm_sqr();
        if j == m {
            signal = p;
        } else {
            interference += p;
        }
    }
    Ok(ratio(signal, interference + noise_w))
}

/// SINR of every user at once through `G = H^H V`.
pub fn sinr_all(h: &ChannelMatrix, v: &BeamformingSet, noise_w: f64) -> Result<Vec<f64>> {
    check_dims(h, v)?;
    let g = h.gains.adjoint() * &v.vectors;
    Ok((0..h.n_users())
        .map(|m| {
            let signal = g[(m, m)].norm_sqr();
            let interference: f64 = (0..v.n_users()).filter(|&j| j != m).map(|j| g[(m, j)].norm_sqr()).sum();
            ratio(signal, interference + noise_w)
        })
        .collect())
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn check_dims(h: &ChannelMatrix, v: &BeamformingSet) -> Result<()> {
    if h.n_aps() != v.n_aps() || h.n_users() != v.n_users() {
        return Err(Error::Contract("channel and beamformer dimensions differ".into()));
    }
    Ok(())
}

/// Achievable rate `ln(1 + sinr)` in nats per channel use.
pub fn rate(sinr_value: f64) -> Result<f64> {
    if !(sinr_value >= 0.0) {
        return Err(Error::Domain(format!("SINR must be non-negative, got {sinr_value}")));
    }
    Ok(sinr_value.ln_1p())
}

/// Transmit power of AP `n`: `sum_m |v_{n,m}|^2`.
pub fn ap_power(v: &BeamformingSet, n: usize) -> f64 {
    v.vectors.row(n).iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn path_loss_values() {
        assert_eq!(path_loss_db(1.0, LogBase::Log2).unwrap(), 148.1);
        assert_relative_eq!(path_loss_db(2.0, LogBase::Log2).unwrap(), 185.7, epsilon = 1e-12);
        // 148.1 + 37.6 * log2(0.6), log2(0.6) = -0.736965594166...
        assert_relative_eq!(
            path_loss_db(0.6, LogBase::Log2).unwrap(),
            120.39009365935064,
            epsilon = 1e-8
        );
        assert_relative_eq!(path_loss_db(10.0, LogBase::Log10).unwrap(), 185.7, epsilon = 1e-12);
        assert!(matches!(path_loss_db(0.0, LogBase::Log2), Err(Error::Domain(_))));
        assert!(matches!(path_loss_db(-1.0, LogBase::Log2), Err(Error::Domain(_))));
    }

    #[test]
    fn noise_conversion() {
        assert_relative_eq!(dbm_to_watts(-102.0), 6.309573444801929e-14, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0);
    }

    #[test]
    fn deterministic_gain_without_randomness() {
        let h = channel_gain(path_loss_db(1.0, LogBase::Log2).unwrap(), 9.0, 1.0, c(1.0, 0.0));
        let expect = 10f64.powf(-148.1 / 20.0) * 10f64.powf(0.45);
        assert_relative_eq!(h.norm(), expect, max_relative = 1e-12);
        assert_eq!(h.im, 0.0);
    }

    #[test]
    fn same_seed_same_channel() {
        let params = RadioParams { n_aps: 3, n_users_max: 4, ..Default::default() };
        let topo = RadioTopology::sample(params, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let a = draw_channel(&topo, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = draw_channel(&topo, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(topo.distances.iter().all(|d| (0.0..=0.6).contains(d)));
        assert!(a.gains.iter().all(|z| z.re.is_finite() && z.im.is_finite() && z.norm() > 0.0));
    }

    #[test]
    fn channel_matches_its_constituents() {
        let params = RadioParams { n_aps: 2, n_users_max: 3, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let topo = RadioTopology::sample(params, &mut rng).unwrap();
        let ch = draw_channel(&topo, &mut rng).unwrap();
        for m in 0..3 {
            for n in 0..2 {
                let pl = path_loss_db(topo.distances[(n, m)], LogBase::Log2).unwrap();
                let expect = channel_gain(pl, 9.0, ch.shadowing[(n, m)], ch.fading[(n, m)]);
                assert_relative_eq!(ch.gains[(n, m)].re, expect.re, max_relative = 1e-12);
                assert_relative_eq!(ch.gains[(n, m)].im, expect.im, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn fading_has_unit_power() {
        let params = RadioParams {
            n_aps: 10,
            n_users_max: 100,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let topo = RadioTopology::sample(params, &mut rng).unwrap();
        let mut acc = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let ch = draw_channel(&topo, &mut rng).unwrap();
            acc += ch.fading.iter().map(|g| g.norm_sqr()).sum::<f64>();
            count += ch.fading.len();
        }
        let mean = acc / count as f64;
        assert!((0.99..=1.01).contains(&mean), "mean |g|^2 = {mean}");
    }

    #[test]
    fn scalar_beamformer_carries_full_power() {
        let h = ChannelMatrix::from_gains(DMatrix::from_element(1, 1, c(0.3, -1.2)));
        let v = beamform(&h, &[4.0], 0.5).unwrap();
        assert_relative_eq!(v.vectors[(0, 0)].norm_sqr(), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn single_user_precoder_is_matched_filter() {
        let h = ChannelMatrix::from_gains(DMatrix::from_column_slice(
            3,
            1,
            &[c(0.5, 0.1), c(-0.2, 0.9), c(1.1, -0.4)],
        ));
        let v = beamform(&h, &[2.0], 0.7).unwrap();
        // Sherman-Morrison: A^-1 h = h / (1 + |h|^2 / s), so v = sqrt(p) h / |h|.
        let hn = h.gains.column(0).norm();
        for n in 0..3 {
            let expect = h.gains[(n, 0)] * (2f64.sqrt() / hn);
            assert_relative_eq!(v.vectors[(n, 0)].re, expect.re, max_relative = 1e-12);
            assert_relative_eq!(v.vectors[(n, 0)].im, expect.im, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_power_gives_zero_column() {
        let h = ChannelMatrix::from_gains(DMatrix::from_element(2, 2, c(1.0, 0.5)));
        let v = beamform(&h, &[0.0, 1.0], 1.0).unwrap();
        assert!(v.vectors.column(0).iter().all(|z| z.norm() == 0.0));
        assert!(beamform(&h, &[1.0], 1.0).is_err());
    }

    #[test]
    fn single_user_sinr_has_no_interference() {
        let h = ChannelMatrix::from_gains(DMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 2.0)]));
        let v = beamform(&h, &[1.5], 1.0).unwrap();
        let hv = h.gains.column(0).dotc(&v.vectors.column(0)).norm_sqr();
        assert_relative_eq!(sinr(&h, &v, 0.1, 0).unwrap(), hv / 0.1, max_relative = 1e-12);
    }

    #[test]
    fn zero_powers_zero_sinr() {
        let h = ChannelMatrix::from_gains(DMatrix::from_element(2, 3, c(0.4, 0.2)));
        let v = beamform(&h, &[0.0; 3], 1.0).unwrap();
        assert_eq!(sinr_all(&h, &v, 1e-3).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rate_values() {
        assert_eq!(rate(0.0).unwrap(), 0.0);
        assert_relative_eq!(rate(std::f64::consts::E - 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(rate(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn ap_power_picks_a_row() {
        let v = BeamformingSet {
            vectors: DMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(2.0, 0.0)]),
            powers: vec![5.0],
        };
        assert_eq!(ap_power(&v, 1), 4.0);
        let z = BeamformingSet::zeros(3, 2);
        assert!((0..3).all(|n| ap_power(&z, n) == 0.0));
    }

    #[test]
    fn channel_text_roundtrip() {
        let params = RadioParams { n_aps: 2, n_users_max: 3, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let topo = RadioTopology::sample(params, &mut rng).unwrap();
        let ch = draw_channel(&topo, &mut rng).unwrap();
        let back = ChannelMatrix::from_rows_text(&ch.to_rows_text()).unwrap();
        assert_eq!(back.gains, ch.gains);
    }
}
