//! FIM lattice, deformable steering vectors and multipath channel sampling.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::harness::config::ScenarioConfig;
use crate::ris::Sector;
use crate::scalar::Scalar;

pub type C<T> = Complex<T>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierConfig<T> {
    pub wavelength_m: T,
    /// `2π / wavelength`.
    pub wavenumber: T,
}

impl<T: Scalar> CarrierConfig<T> {
    pub fn from_wavelength(wavelength_m: T) -> Result<Self> {
        if !(wavelength_m > T::zero() && wavelength_m.is_finite()) {
            return Err(Error::arg(format!("wavelength must be positive, got {wavelength_m}")));
        }
        Ok(Self { wavelength_m, wavenumber: T::TAU() / wavelength_m })
    }
}

/// Fixed `(x, z)` lattice of an `m_x × m_z` planar array.
#[derive(Debug, Clone, PartialEq)]
pub struct FimGeometry<T> {
    pub m_x: usize,
    pub m_z: usize,
    pub d_x: T,
    pub d_z: T,
    pub x: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Scalar> FimGeometry<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Element `m` (0-based) sits at `x = d_x·(m mod m_x)`, `z = d_z·⌊m / m_x⌋`.
pub fn build_fim_geometry<T: Scalar>(m_x: usize, m_z: usize, d_x: T, d_z: T) -> Result<FimGeometry<T>> {
    if m_x == 0 || m_z == 0 {
        return Err(Error::arg(format!("element counts must be positive, got {m_x}×{m_z}")));
    }
    if !(d_x > T::zero() && d_z > T::zero()) {
        return Err(Error::arg("element spacings must be positive"));
    }
    let m = m_x * m_z;
    let x = (0..m).map(|i| d_x * T::of_usize(i % m_x)).collect();
    let z = (0..m).map(|i| d_z * T::of_usize(i / m_x)).collect();
    Ok(FimGeometry { m_x, m_z, d_x, d_z, x, z })
}

/// Per-element heights of the morphable surface.
#[derive(Debug, Clone, PartialEq)]
pub struct FimShape<T> {
    pub y: Vec<T>,
    pub y_min: T,
    pub y_max: T,
}

impl<T: Scalar> FimShape<T> {
    pub fn new(y: Vec<T>, y_min: T, y_max: T) -> Result<Self> {
        if !(y_max > y_min) {
            return Err(Error::arg("morphing range must be positive"));
        }
        if let Some((m, v)) = y.iter().enumerate().find(|(_, v)| !(**v >= y_min && **v <= y_max)) {
            return Err(Error::arg(format!("height y[{m}] = {v} outside [{y_min}, {y_max}]")));
        }
        Ok(Self { y, y_min, y_max })
    }

    /// All elements at `y_min`, i.e. a rigid planar array.
    pub fn flat(m: usize, y_min: T, y_max: T) -> Self {
        Self { y: vec![y_min; m], y_min, y_max }
    }

    pub fn range(&self) -> T {
        self.y_max - self.y_min
    }

    /// Signed distance to the nearest bound; negative when some height is out of range.
    pub fn bound_residual(&self) -> T {
        self.y.iter().map(|&v| (v - self.y_min).min(self.y_max - v)).fold(T::infinity(), T::min)
    }
}

fn steer_into<T: Scalar>(
    out: &mut [C<T>],
    geom: &FimGeometry<T>,
    y: &[T],
    azimuth: T,
    elevation: T,
    carrier: &CarrierConfig<T>,
    weight: C<T>,
) {
    let (st, ct) = elevation.sin_cos();
    let (sp, cp) = azimuth.sin_cos();
    let (kx, ky, kz) = (st * cp, st * sp, ct);
    for (m, o) in out.iter_mut().enumerate() {
        let phase = carrier.wavenumber * (geom.x[m] * kx + y[m] * ky + geom.z[m] * kz);
        *o = *o + weight * C::from_polar(T::one(), phase);
    }
}

/// `v_m = exp(jω(x_m sinθ cosφ + y_m sinθ sinφ + z_m cosθ))`.
pub fn steering_vector<T: Scalar>(
    geom: &FimGeometry<T>,
    shape: &FimShape<T>,
    azimuth: T,
    elevation: T,
    carrier: &CarrierConfig<T>,
) -> Result<Array1<C<T>>> {
    check_shape(geom, shape)?;
    let mut out = vec![C::new(T::zero(), T::zero()); geom.len()];
    steer_into(&mut out, geom, &shape.y, azimuth, elevation, carrier, C::new(T::one(), T::zero()));
    Ok(Array1::from(out))
}

fn check_shape<T: Scalar>(geom: &FimGeometry<T>, shape: &FimShape<T>) -> Result<()> {
    if shape.y.len() != geom.len() {
        return Err(Error::arg(format!(
            "shape has {} heights but the array has {} elements",
            shape.y.len(),
            geom.len()
        )));
    }
    Ok(())
}

/// Multipath description of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCluster<T> {
    pub gains: Vec<C<T>>,
    pub elevations: Vec<T>,
    pub azimuths: Vec<T>,
    pub per_path_power: Vec<T>,
    /// Large-scale fading `η`, equal to `Σ_p σ_p²`.
    pub total_pathloss: T,
}

impl<T: Scalar> PathCluster<T> {
    pub fn num_paths(&self) -> usize {
        self.gains.len()
    }
}

fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    let v: f64 = StandardNormal.sample(rng);
    T::of(v)
}

/// Draws `P` CSCG gains with uniform power profile `σ_p² = η/P` and angles
/// uniform on `[0, π)`.
pub fn sample_path_clusters<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    num_paths: usize,
    pathloss: T,
) -> Result<PathCluster<T>> {
    if num_paths == 0 {
        return Err(Error::arg("at least one path is required"));
    }
    if !(pathloss > T::zero() && pathloss.is_finite()) {
        return Err(Error::arg(format!("pathloss must be positive, got {pathloss}")));
    }
    let power = pathloss / T::of_usize(num_paths);
    let scale = (power * T::of(0.5)).sqrt();
    let mut gains = Vec::with_capacity(num_paths);
    let mut elevations = Vec::with_capacity(num_paths);
    let mut azimuths = Vec::with_capacity(num_paths);
    for _ in 0..num_paths {
        let re: T = standard_normal(rng);
        let im: T = standard_normal(rng);
        gains.push(C::new(re * scale, im * scale));
        elevations.push(T::of(rng.random::<f64>()) * T::PI());
        azimuths.push(T::of(rng.random::<f64>()) * T::PI());
    }
    Ok(PathCluster { gains, elevations, azimuths, per_path_power: vec![power; num_paths], total_pathloss: pathloss })
}

fn cluster_response_into<T: Scalar>(
    out: &mut [C<T>],
    geom: &FimGeometry<T>,
    y: &[T],
    cluster: &PathCluster<T>,
    carrier: &CarrierConfig<T>,
) {
    for p in 0..cluster.num_paths() {
        steer_into(out, geom, y, cluster.azimuths[p], cluster.elevations[p], carrier, cluster.gains[p]);
    }
}

/// `g(y) = Σ_p γ_p v(y, φ_p, ϑ_p)`.
pub fn bs_user_channel<T: Scalar>(
    geom: &FimGeometry<T>,
    shape: &FimShape<T>,
    cluster: &PathCluster<T>,
    carrier: &CarrierConfig<T>,
) -> Result<Array1<C<T>>> {
    check_shape(geom, shape)?;
    let mut out = vec![C::new(T::zero(), T::zero()); geom.len()];
    cluster_response_into(&mut out, geom, &shape.y, cluster, carrier);
    Ok(Array1::from(out))
}

/// `M × K_RIS` matrix whose column `k` is the deformable response towards RIS element `k`.
pub fn bs_ris_channel<T: Scalar>(
    geom: &FimGeometry<T>,
    shape: &FimShape<T>,
    clusters_per_element: &[PathCluster<T>],
    k_ris: usize,
    carrier: &CarrierConfig<T>,
) -> Result<Array2<C<T>>> {
    check_shape(geom, shape)?;
    if clusters_per_element.len() != k_ris {
        return Err(Error::arg(format!("expected {k_ris} BS–RIS clusters, got {}", clusters_per_element.len())));
    }
    let m = geom.len();
    let mut h = Array2::zeros((m, k_ris));
    let mut col = vec![C::new(T::zero(), T::zero()); m];
    for (k, cluster) in clusters_per_element.iter().enumerate() {
        col.iter_mut().for_each(|c| *c = C::new(T::zero(), T::zero()));
        cluster_response_into(&mut col, geom, &shape.y, cluster, carrier);
        for (i, v) in col.iter().enumerate() {
            h[(i, k)] = *v;
        }
    }
    Ok(h)
}

/// Multipath response of the rigid RIS array (heights identically zero).
pub fn ris_user_channel<T: Scalar>(
    ris_geometry: &FimGeometry<T>,
    cluster: &PathCluster<T>,
    carrier: &CarrierConfig<T>,
) -> Array1<C<T>> {
    let y = vec![T::zero(); ris_geometry.len()];
    let mut out = vec![C::new(T::zero(), T::zero()); ris_geometry.len()];
    cluster_response_into(&mut out, ris_geometry, &y, cluster, carrier);
    Array1::from(out)
}

/// `η(d) = C_0 · d^{−a}` with `d` in meters, optionally with extra penetration loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossLaw {
    pub ref_gain_db: f64,
    pub exponent: f64,
    pub extra_loss_db: f64,
}

impl PathlossLaw {
    pub fn gain(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(1.0);
        10f64.powf((self.ref_gain_db - self.extra_loss_db) / 10.0) * d.powf(-self.exponent)
    }
}

/// All channels of one task realized at a particular FIM shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    pub users: usize,
    pub subcarriers: usize,
    /// BS→user channels, indexed `u * N + n`, each of length `M`.
    pub g: Vec<Array1<C<T>>>,
    /// BS→RIS matrices per subcarrier, each `M × K_RIS`.
    pub h_br: Vec<Array2<C<T>>>,
    /// RIS→user channels, indexed `u * N + n`, each of length `K_RIS`.
    pub h_ru: Vec<Array1<C<T>>>,
    /// Noise power `σ_u^n²` in watts, `U × N`.
    pub noise_power: Array2<T>,
    pub sector_of_user: Vec<Sector>,
}

impl<T: Scalar> ChannelSet<T> {
    pub fn fim_elements(&self) -> usize {
        self.g.first().map_or(0, |v| v.len())
    }

    pub fn k_ris(&self) -> usize {
        self.h_ru.first().map_or(0, |v| v.len())
    }

    pub fn g(&self, u: usize, n: usize) -> &Array1<C<T>> {
        &self.g[u * self.subcarriers + n]
    }

    pub fn h_ru(&self, u: usize, n: usize) -> &Array1<C<T>> {
        &self.h_ru[u * self.subcarriers + n]
    }

    /// Same dimensions with every channel and noise term set to zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            users: self.users,
            subcarriers: self.subcarriers,
            g: self.g.iter().map(|v| Array1::zeros(v.len())).collect(),
            h_br: self.h_br.iter().map(|m| Array2::zeros(m.raw_dim())).collect(),
            h_ru: self.h_ru.iter().map(|v| Array1::zeros(v.len())).collect(),
            noise_power: Array2::zeros(self.noise_power.raw_dim()),
            sector_of_user: self.sector_of_user.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        let fin = |c: &C<T>| c.re.is_finite() && c.im.is_finite();
        self.g.iter().all(|v| v.iter().all(fin))
            && self.h_br.iter().all(|m| m.iter().all(fin))
            && self.h_ru.iter().all(|v| v.iter().all(fin))
            && self.noise_power.iter().all(|v| v.is_finite())
    }
}

/// One sampled user placement plus its small-scale fading: a meta-learning task.
///
/// BS-side channels depend on the FIM shape, which is a decision variable, so
/// the task keeps the path clusters and realizes a [`ChannelSet`] per shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Task<T> {
    pub fim: FimGeometry<T>,
    pub ris: FimGeometry<T>,
    pub carrier: CarrierConfig<T>,
    pub y_min: T,
    pub y_max: T,
    pub users: usize,
    pub subcarriers: usize,
    pub user_positions: Vec<[f64; 3]>,
    pub sector_of_user: Vec<Sector>,
    /// Direct-link pathloss per user.
    pub direct_pathloss: Vec<T>,
    /// BS→user clusters, indexed `u * N + n`.
    pub direct: Vec<PathCluster<T>>,
    /// BS→RIS clusters per subcarrier and RIS element.
    pub bs_ris: Vec<Vec<PathCluster<T>>>,
    pub h_ru: Vec<Array1<C<T>>>,
    pub noise_power: Array2<T>,
}

impl<T: Scalar> Task<T> {
    pub fn k_ris(&self) -> usize {
        self.ris.len()
    }

    pub fn flat_shape(&self) -> FimShape<T> {
        FimShape::flat(self.fim.len(), self.y_min, self.y_max)
    }

    pub fn channels(&self, shape: &FimShape<T>) -> Result<ChannelSet<T>> {
        let g = self
            .direct
            .iter()
            .map(|c| bs_user_channel(&self.fim, shape, c, &self.carrier))
            .collect::<Result<Vec<_>>>()?;
        let h_br = self
            .bs_ris
            .iter()
            .map(|cs| bs_ris_channel(&self.fim, shape, cs, self.k_ris(), &self.carrier))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelSet {
            users: self.users,
            subcarriers: self.subcarriers,
            g,
            h_br,
            h_ru: self.h_ru.clone(),
            noise_power: self.noise_power.clone(),
            sector_of_user: self.sector_of_user.clone(),
        })
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Users uniform in a ground-plane disc centered on the x-axis. The RIS plane
/// contains the x-axis, so transmission-sector users take the `y ≥ 0` half
/// and reflection-sector users the `y < 0` half.
pub fn place_users<R: Rng + ?Sized>(rng: &mut R, scenario: &ScenarioConfig) -> (Vec<[f64; 3]>, Vec<Sector>) {
    let geo = &scenario.geometry;
    let center = [geo.user_center_distance_m, 0.0, 0.0];
    let mut positions = Vec::with_capacity(scenario.users());
    let mut sectors = Vec::with_capacity(scenario.users());
    for u in 0..scenario.users() {
        let sector = if u < scenario.system.users_t { Sector::Transmission } else { Sector::Reflection };
        let r = geo.user_radius_m * rng.random::<f64>().sqrt();
        let mut angle = std::f64::consts::PI * rng.random::<f64>();
        if sector == Sector::Reflection {
            angle += std::f64::consts::PI;
        }
        positions.push([center[0] + r * angle.cos(), center[1] + r * angle.sin(), 0.0]);
        sectors.push(sector);
    }
    (positions, sectors)
}

pub fn direct_law(scenario: &ScenarioConfig) -> PathlossLaw {
    let g = &scenario.geometry;
    PathlossLaw { ref_gain_db: g.pathloss_ref_db, exponent: g.exponent_direct, extra_loss_db: g.direct_blockage_db }
}

pub fn ris_law(scenario: &ScenarioConfig) -> PathlossLaw {
    let g = &scenario.geometry;
    PathlossLaw { ref_gain_db: g.pathloss_ref_db, exponent: g.exponent_ris, extra_loss_db: 0.0 }
}

/// Samples user positions and every multipath channel of one episode.
pub fn sample_task<T: Scalar, R: Rng + ?Sized>(rng: &mut R, scenario: &ScenarioConfig) -> Result<Task<T>> {
    scenario.validate()?;
    let sys = &scenario.system;
    let carrier = CarrierConfig::from_wavelength(T::of(scenario.carrier_wavelength_m()))?;
    let fim = build_fim_geometry(sys.fim_mx, sys.fim_mz, T::of(sys.fim_dx_m), T::of(sys.fim_dz_m))?;
    let ris =
        build_fim_geometry(sys.ris_mx, sys.k_ris / sys.ris_mx, T::of(sys.ris_spacing_m), T::of(sys.ris_spacing_m))?;
    let y_max = T::of(sys.morph_range_wavelengths * scenario.carrier_wavelength_m());
    let (user_positions, sector_of_user) = place_users(rng, scenario);
    let bs = [0.0; 3];
    let ris_pos = scenario.geometry.ris_position_m;
    let direct = direct_law(scenario);
    let via_ris = ris_law(scenario);
    let (u_count, n_count) = (scenario.users(), sys.subcarriers);

    let direct_pathloss: Vec<T> = user_positions.iter().map(|&p| T::of(direct.gain(distance(bs, p)))).collect();
    let mut direct_clusters = Vec::with_capacity(u_count * n_count);
    for &eta in &direct_pathloss {
        for _ in 0..n_count {
            direct_clusters.push(sample_path_clusters(rng, sys.paths, eta)?);
        }
    }
    let eta_br = T::of(via_ris.gain(distance(bs, ris_pos)));
    let bs_ris = (0..n_count)
        .map(|_| (0..sys.k_ris).map(|_| sample_path_clusters(rng, sys.paths, eta_br)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    let mut h_ru = Vec::with_capacity(u_count * n_count);
    for &p in &user_positions {
        let eta = T::of(via_ris.gain(distance(ris_pos, p)));
        for _ in 0..n_count {
            let cluster = sample_path_clusters(rng, sys.paths, eta)?;
            h_ru.push(ris_user_channel(&ris, &cluster, &carrier));
        }
    }
    let noise_power = Array2::from_elem((u_count, n_count), T::of(scenario.noise_power_w()));
    Ok(Task {
        fim,
        ris,
        carrier,
        y_min: T::zero(),
        y_max,
        users: u_count,
        subcarriers: n_count,
        user_positions,
        sector_of_user,
        direct_pathloss,
        direct: direct_clusters,
        bs_ris,
        h_ru,
        noise_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn carrier() -> CarrierConfig<f64> {
        CarrierConfig::from_wavelength(0.125).unwrap()
    }

    #[test]
    fn carrier_wavenumber_product() {
        let c = carrier();
        assert!((c.wavenumber * c.wavelength_m - std::f64::consts::TAU).abs() < 1e-12);
        assert!(CarrierConfig::<f64>::from_wavelength(0.0).is_err());
    }

    #[test]
    fn lattice_coordinates() {
        let g = build_fim_geometry(1, 1, 0.05, 0.05).unwrap();
        assert_eq!((g.x.clone(), g.z.clone()), (vec![0.0], vec![0.0]));
        let g = build_fim_geometry(2, 1, 0.05, 0.05).unwrap();
        assert_eq!((g.x.clone(), g.z.clone()), (vec![0.0, 0.05], vec![0.0, 0.0]));
        let g = build_fim_geometry(2, 2, 0.05, 0.05).unwrap();
        assert_eq!((g.x[2], g.z[2]), (0.0, 0.05));
        assert!(build_fim_geometry::<f64>(0, 1, 0.05, 0.05).is_err());
        assert!(build_fim_geometry::<f64>(1, 1, 0.0, 0.05).is_err());
    }

    #[test]
    fn steering_special_cases() {
        let c = carrier();
        let g = build_fim_geometry(1, 1, 0.05, 0.05).unwrap();
        let v = steering_vector(&g, &FimShape::flat(1, 0.0, 0.06), 0.3, 1.1, &c).unwrap();
        assert_eq!(v[0], C::new(1.0, 0.0));

        // elevation 0 only sees z
        let g = build_fim_geometry(2, 2, 0.05, 0.05).unwrap();
        let shape = FimShape::new(vec![0.01, 0.02, 0.03, 0.04], 0.0, 0.0625).unwrap();
        let v = steering_vector(&g, &shape, 0.7, 0.0, &c).unwrap();
        for m in 0..4 {
            let want = C::from_polar(1.0, c.wavenumber * g.z[m]);
            assert!((v[m] - want).norm() < 1e-12);
        }

        // half-wavelength spacing broadside along x flips the sign
        let g = FimGeometry { m_x: 2, m_z: 1, d_x: 0.0625, d_z: 0.05, x: vec![0.0, 0.0625], z: vec![0.0, 0.0] };
        let v = steering_vector(&g, &FimShape::flat(2, 0.0, 0.0625), 0.0, std::f64::consts::FRAC_PI_2, &c).unwrap();
        assert!((v[0] - C::new(1.0, 0.0)).norm() < 1e-12);
        assert!((v[1] - C::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_length_mismatch() {
        let g = build_fim_geometry(2, 1, 0.05, 0.05).unwrap();
        let err = steering_vector(&g, &FimShape::flat(3, 0.0, 0.06), 0.0, 0.0, &carrier());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn cluster_power_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: PathCluster<f64> = sample_path_clusters(&mut rng, 1, 2.5).unwrap();
        assert_eq!(c.per_path_power, vec![2.5]);
        let c: PathCluster<f64> = sample_path_clusters(&mut rng, 4, 1.0).unwrap();
        assert_eq!(c.per_path_power, vec![0.25; 4]);
        for (&e, &a) in c.elevations.iter().zip(&c.azimuths) {
            assert!((0.0..std::f64::consts::PI).contains(&e));
            assert!((0.0..std::f64::consts::PI).contains(&a));
        }
        assert!(sample_path_clusters::<f64, _>(&mut rng, 0, 1.0).is_err());
        assert!(sample_path_clusters::<f64, _>(&mut rng, 2, 0.0).is_err());
    }

    #[test]
    fn destructive_pair_cancels() {
        let g = build_fim_geometry(2, 1, 0.05, 0.05).unwrap();
        let cluster = PathCluster {
            gains: vec![C::new(1.0, 0.0), C::new(-1.0, 0.0)],
            elevations: vec![0.4, 0.4],
            azimuths: vec![1.2, 1.2],
            per_path_power: vec![0.5, 0.5],
            total_pathloss: 1.0,
        };
        let h = bs_user_channel(&g, &FimShape::flat(2, 0.0, 0.06), &cluster, &carrier()).unwrap();
        assert!(h.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn ris_channel_cluster_count_checked() {
        let g = build_fim_geometry(2, 1, 0.05, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cl = vec![sample_path_clusters(&mut rng, 2, 1.0).unwrap()];
        let err = bs_ris_channel(&g, &FimShape::flat(2, 0.0, 0.06), &cl, 2, &carrier());
        assert!(err.is_err());
        let h = bs_ris_channel(&g, &FimShape::flat(2, 0.0, 0.06), &cl, 1, &carrier()).unwrap();
        let v = bs_user_channel(&g, &FimShape::flat(2, 0.0, 0.06), &cl[0], &carrier()).unwrap();
        assert_eq!(h.column(0).to_owned(), v);
    }

    #[test]
    fn pathloss_monotone_in_distance() {
        let law = PathlossLaw { ref_gain_db: -30.0, exponent: 3.5, extra_loss_db: 0.0 };
        assert!((law.gain(1.0) - 1e-3).abs() < 1e-15);
        for d in [2.0, 10.0, 35.0, 60.0] {
            assert!(law.gain(2.0 * d) < law.gain(d));
        }
    }

    #[test]
    fn doubling_user_distance_lowers_every_direct_pathloss() {
        let mut cfg = ScenarioConfig::default();
        let t1: Task<f64> = sample_task(&mut ChaCha8Rng::seed_from_u64(11), &cfg).unwrap();
        cfg.geometry.user_center_distance_m *= 2.0;
        cfg.geometry.user_radius_m *= 2.0;
        let t2: Task<f64> = sample_task(&mut ChaCha8Rng::seed_from_u64(11), &cfg).unwrap();
        for u in 0..t1.users {
            let d1 = distance([0.0; 3], t1.user_positions[u]);
            let d2 = distance([0.0; 3], t2.user_positions[u]);
            assert!((d2 - 2.0 * d1).abs() < 1e-9);
            assert!(t2.direct_pathloss[u] < t1.direct_pathloss[u]);
            for n in 0..t1.subcarriers {
                assert!(
                    t2.direct[u * t1.subcarriers + n].total_pathloss < t1.direct[u * t1.subcarriers + n].total_pathloss
                );
            }
        }
    }

    #[test]
    fn task_dimensions_reference_scenario() {
        let cfg = ScenarioConfig::default();
        let task: Task<f64> = sample_task(&mut ChaCha8Rng::seed_from_u64(1), &cfg).unwrap();
        let ch = task.channels(&task.flat_shape()).unwrap();
        assert_eq!(ch.g.len(), 32);
        assert!(ch.g.iter().all(|v| v.len() == 2));
        assert_eq!(ch.h_br.len(), 4);
        assert!(ch.h_br.iter().all(|m| m.dim() == (2, 16)));
        assert_eq!(ch.h_ru.len(), 32);
        assert!(ch.h_ru.iter().all(|v| v.len() == 16));
        assert_eq!(ch.noise_power.dim(), (8, 4));
        assert!(ch.is_finite());
        let t_users = ch.sector_of_user.iter().filter(|s| **s == Sector::Transmission).count();
        assert_eq!(t_users, 4);
    }

    #[test]
    fn task_is_pure_function_of_seed() {
        let cfg = ScenarioConfig::desk();
        let a: Task<f64> = sample_task(&mut ChaCha8Rng::seed_from_u64(9), &cfg).unwrap();
        let b: Task<f64> = sample_task(&mut ChaCha8Rng::seed_from_u64(9), &cfg).unwrap();
        assert_eq!(a, b);
        let c: Task<f64> = sample_task(&mut ChaCha8Rng::seed_from_u64(10), &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn users_land_in_their_half_disc() {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (pos, sec) = place_users(&mut rng, &cfg);
            for (p, s) in pos.iter().zip(&sec) {
                let r = ((p[0] - 40.0).powi(2) + p[1].powi(2)).sqrt();
                assert!(r <= 10.0 + 1e-12);
                match s {
                    Sector::Transmission => assert!(p[1] >= -1e-12),
                    Sector::Reflection => assert!(p[1] <= 1e-12),
                }
            }
        }
    }

    #[test]
    fn morphing_changes_phase_not_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = build_fim_geometry(2, 1, 0.05, 0.05).unwrap();
        let cluster: PathCluster<f64> = sample_path_clusters(&mut rng, 1, 1.0).unwrap();
        let a = bs_user_channel(&g, &FimShape::flat(2, 0.0, 0.06), &cluster, &carrier()).unwrap();
        let b =
            bs_user_channel(&g, &FimShape::new(vec![0.01, 0.05], 0.0, 0.06).unwrap(), &cluster, &carrier()).unwrap();
        for m in 0..2 {
            assert!((a[m].norm() - b[m].norm()).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn steering_entries_unit_modulus(
            heights in proptest::collection::vec(0.0f64..0.0625, 6),
            az in 0.0f64..std::f64::consts::PI,
            el in 0.0f64..std::f64::consts::PI,
        ) {
            let g = build_fim_geometry(3, 2, 0.05, 0.05).unwrap();
            let shape = FimShape::new(heights, 0.0, 0.0625).unwrap();
            let v = steering_vector(&g, &shape, az, el, &carrier()).unwrap();
            for e in v.iter() {
                prop_assert!((e.norm() - 1.0).abs() < 1e-12);
            }
            let flat = steering_vector(&g, &FimShape::flat(6, 0.0, 0.0625), az, el, &carrier()).unwrap();
            let rigid = ris_user_channel(&g, &PathCluster {
                gains: vec![C::new(1.0, 0.0)], elevations: vec![el], azimuths: vec![az],
                per_path_power: vec![1.0], total_pathloss: 1.0,
            }, &carrier());
            for m in 0..6 {
                prop_assert!((flat[m] - rigid[m]).norm() < 1e-12);
            }
        }
    }
}
