//! Stochastic lattice model of oblique-incidence film growth.
//!
//! Particles arrive as parallel rays tilted by the incidence angle and stick
//! at the first column whose surface they intercept, so taller features
//! capture flux meant for their neighbours, which is what roughens angled
//! films. Mobile particles then accommodate onto the lowest adjacent column
//! and relax by a bounded number of downhill hops; both moves are paid for
//! by the deposition-rate mobility budget. Contaminant particles stick where
//! they land and pin the surface around them. RMS roughness comes from a
//! 1+1D lattice; line-edge roughness from a 2+1D lattice with a frozen mask
//! wall that shadows the film edge.
//!
//! Lattice cells are cubes one monolayer on a side, so one lateral site and
//! one height step convert to length with the same constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Al(111)-like interplanar spacing; converts monolayers and lattice sites
/// to nanometres.
pub const DEFAULT_MONOLAYER_NM: f64 = 0.286;

/// Diffusion mobility constant k_d in steps*nm/s: hops per particle at
/// 1 nm/s deposition rate.
pub const K_DIFFUSION_NM_PER_S: f64 = 0.6;

/// Chamber contamination constant c0 in nm/s: impurity probability per
/// landing at 1 nm/s deposition rate.
pub const DEFAULT_CONTAMINATION_CONST_NM_PER_S: f64 = 0.004;

/// Half-width of the per-particle incidence spread, degrees. A crucible a
/// few centimetres across seen from hundreds of millimetres away subtends
/// about this much; it also keeps the lattice from locking onto rational
/// slopes at special angles.
pub const BEAM_DIVERGENCE_DEG: f64 = 2.0;

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("invalid {parameter}: {value} ({constraint})")]
    InvalidParameter {
        parameter: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("surface is empty")]
    EmptySurface,
    #[error("mask wall at {mask_ml} ML would be buried by a {film_ml} ML film")]
    MaskBuried { mask_ml: u32, film_ml: f64 },
    #[error("mask shadow spans {shadow_sites:.0} of {width} sites; widen the lattice or lower the wall")]
    MaskShadowTooWide { shadow_sites: f64, width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMode {
    /// Every particle lands on its launch column; no shadowing.
    RandomDeposition,
    /// Particles follow the tilted ray until a column intercepts it.
    BallisticShadowed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthConfig {
    pub lattice_width_sites: usize,
    pub target_mean_height_ml: f64,
    pub incidence_angle_deg: f64,
    pub diffusion_steps_per_particle: u32,
    /// Probability that a landing particle is an immobile contaminant.
    pub contamination_per_site: f64,
    pub rng_seed: u64,
    pub mode: GrowthMode,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            lattice_width_sites: 256,
            target_mean_height_ml: 52.0,
            incidence_angle_deg: 0.0,
            diffusion_steps_per_particle: 1,
            contamination_per_site: DEFAULT_CONTAMINATION_CONST_NM_PER_S / 0.6,
            rng_seed: 0,
            mode: GrowthMode::BallisticShadowed,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<(), GrowthError> {
        if self.lattice_width_sites < 16 {
            return Err(GrowthError::InvalidParameter {
                parameter: "lattice_width_sites",
                value: self.lattice_width_sites as f64,
                constraint: "must be >= 16",
            });
        }
        if !(self.target_mean_height_ml.is_finite() && self.target_mean_height_ml >= 0.0) {
            return Err(GrowthError::InvalidParameter {
                parameter: "target_mean_height_ml",
                value: self.target_mean_height_ml,
                constraint: "must be finite and >= 0",
            });
        }
        if !(self.incidence_angle_deg.is_finite()
            && (0.0..90.0).contains(&self.incidence_angle_deg))
        {
            return Err(GrowthError::InvalidParameter {
                parameter: "incidence_angle_deg",
                value: self.incidence_angle_deg,
                constraint: "must lie in [0, 90)",
            });
        }
        if !(self.contamination_per_site.is_finite()
            && (0.0..=1.0).contains(&self.contamination_per_site))
        {
            return Err(GrowthError::InvalidParameter {
                parameter: "contamination_per_site",
                value: self.contamination_per_site,
                constraint: "must lie in [0, 1]",
            });
        }
        Ok(())
    }
}

/// Grown 1+1D surface. `impurity_mask[c]` flags columns whose exposed top
/// cell is a contaminant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceRecord {
    pub heights: Vec<u32>,
    pub impurity_mask: Vec<bool>,
    pub config_echo: GrowthConfig,
    pub deposited_particles: u64,
}

/// Roughness summary attached to one electrode deposition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RoughnessReport {
    pub rms_nm: f64,
    pub ler_nm: f64,
    pub monolayer_nm: f64,
}

/// One-particle lattice state shared by the 1+1D and 2+1D engines: column
/// heights plus the top-cell impurity flags.
struct Lattice {
    heights: Vec<u32>,
    impurity: Vec<bool>,
    max_height: u32,
}

impl Lattice {
    fn new(columns: usize) -> Self {
        Self {
            heights: vec![0; columns],
            impurity: vec![false; columns],
            max_height: 0,
        }
    }
}

/// Walk a tilted ray across periodic columns starting above the surface and
/// return the landing column. `descent` is the height lost per column step
/// (cot of the incidence angle); an infinite descent lands on the start
/// column. A ray that dips below a column top while crossing it has struck
/// the exposed top and lands there; a ray that *enters* a column already
/// below its top has struck the sidewall between columns and lands on the
/// upstream column instead, which is what lets voids fill against steep
/// faces and makes the columns lean toward the source. A frozen wall column
/// (`wall`) swallows rays that cross it below the wall top.
fn trace_ray<F: Fn(usize) -> usize>(
    heights: &[u32],
    order: F,
    columns: usize,
    start: usize,
    start_z: f64,
    tangent: f64,
    wall: Option<(usize, u32)>,
) -> Option<usize> {
    if tangent == 0.0 {
        if let Some((wc, _)) = wall {
            if start == wc {
                return None;
            }
        }
        return Some(start);
    }
    let descent = 1.0 / tangent.abs();
    let forward = tangent > 0.0;
    let mut c = start;
    let mut z = start_z;
    let mut upstream = None;
    loop {
        let z_exit = z - descent;
        let top = heights[order(c)] as f64;
        if let Some((wc, wall_h)) = wall {
            if c == wc {
                if z_exit < wall_h as f64 {
                    return None;
                }
                upstream = Some(c);
                z = z_exit;
                c = step(c, columns, forward);
                continue;
            }
        }
        if z_exit < top {
            if z >= top {
                return Some(c);
            }
            // Sidewall hit; the start column never qualifies because rays
            // start above the whole surface.
            let prev = upstream.expect("sidewall hit requires a crossed column");
            if let Some((wc, _)) = wall {
                if prev == wc {
                    return None;
                }
            }
            return Some(prev);
        }
        upstream = Some(c);
        z = z_exit;
        c = step(c, columns, forward);
    }
}

fn step(c: usize, columns: usize, forward: bool) -> usize {
    if forward {
        (c + 1) % columns
    } else {
        (c + columns - 1) % columns
    }
}

/// Deposit one particle that already landed on column `c`.
///
/// The particle first draws its contaminant flag. Contaminants stick where
/// they land and pin the column. A mobile particle performs up to
/// `cfg_steps` downhill hops; a hop targets a random neighbour whose column
/// ends up at least one level below the particle's current perch, so every
/// hop strictly lowers the particle. Contaminant tops are sticky: a
/// particle landing on one stays, and hops never target one.
fn settle<N: Fn(usize, &mut Vec<usize>)>(
    lat: &mut Lattice,
    rng: &mut ChaCha8Rng,
    c: usize,
    neighbours: N,
    cfg_contamination: f64,
    cfg_steps: u32,
    scratch: &mut Vec<usize>,
) {
    let is_impurity = rng.gen::<f64>() < cfg_contamination;
    let cur = c;
    let mut beneath = lat.impurity[cur];
    lat.heights[cur] += 1;
    lat.impurity[cur] = is_impurity;
    if lat.heights[cur] > lat.max_height {
        lat.max_height = lat.heights[cur];
    }
    if is_impurity || beneath {
        return;
    }
    let mut cur = cur;
    for _ in 0..cfg_steps {
        scratch.clear();
        neighbours(cur, scratch);
        scratch.retain(|&nb| lat.heights[nb] + 2 <= lat.heights[cur] && !lat.impurity[nb]);
        if scratch.is_empty() {
            break;
        }
        let nb = scratch[rng.gen_range(0..scratch.len())];
        lat.heights[cur] -= 1;
        lat.impurity[cur] = beneath;
        beneath = lat.impurity[nb];
        lat.heights[nb] += 1;
        lat.impurity[nb] = false;
        if lat.heights[nb] > lat.max_height {
            lat.max_height = lat.heights[nb];
        }
        cur = nb;
    }
}

/// Grow a 1+1D film on a periodic lattice. Deterministic for a fixed
/// config: per particle the draws are launch column, sub-cell ray phase,
/// beam divergence, contaminant flag, then any relaxation choices.
pub fn grow_surface(cfg: &GrowthConfig) -> Result<SurfaceRecord, GrowthError> {
    cfg.validate()?;
    let w = cfg.lattice_width_sites;
    let particles = (cfg.target_mean_height_ml * w as f64).round() as u64;
    let mut lat = Lattice::new(w);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let base_rad = cfg.incidence_angle_deg.to_radians();
    let spread_rad = BEAM_DIVERGENCE_DEG.to_radians();
    let neighbours = |c: usize, out: &mut Vec<usize>| {
        out.push((c + w - 1) % w);
        out.push((c + 1) % w);
    };
    let mut scratch = Vec::with_capacity(4);
    for _ in 0..particles {
        let start = rng.gen_range(0..w);
        let phase = rng.gen::<f64>();
        let dev = spread_rad * (2.0 * rng.gen::<f64>() - 1.0);
        let landing = match cfg.mode {
            GrowthMode::RandomDeposition => start,
            GrowthMode::BallisticShadowed => {
                let z0 = lat.max_height as f64 + 1.0 + phase;
                trace_ray(&lat.heights, |c| c, w, start, z0, (base_rad + dev).tan(), None)
                    .expect("periodic lattice without wall always intercepts")
            }
        };
        settle(
            &mut lat,
            &mut rng,
            landing,
            &neighbours,
            cfg.contamination_per_site,
            cfg.diffusion_steps_per_particle,
            &mut scratch,
        );
    }
    Ok(SurfaceRecord {
        heights: lat.heights,
        impurity_mask: lat.impurity,
        config_echo: *cfg,
        deposited_particles: particles,
    })
}

/// RMS surface roughness: population standard deviation of the column
/// heights, converted to nanometres.
pub fn rms_roughness(surface: &SurfaceRecord, monolayer_nm: f64) -> Result<f64, GrowthError> {
    if surface.heights.is_empty() {
        return Err(GrowthError::EmptySurface);
    }
    if !(monolayer_nm.is_finite() && monolayer_nm > 0.0) {
        return Err(GrowthError::InvalidParameter {
            parameter: "monolayer_nm",
            value: monolayer_nm,
            constraint: "must be finite and > 0",
        });
    }
    let values: Vec<f64> = surface.heights.iter().map(|&h| h as f64).collect();
    let sigma = crate::stats::population_std(&values).expect("non-empty surface");
    Ok(sigma * monolayer_nm)
}

/// Line-edge roughness of a film grown against a straight mask wall.
///
/// The film grows on a 2+1D lattice, periodic in both lateral directions,
/// with one frozen wall column plane of height `edge_mask_height_ml` along
/// y. Rays travel perpendicular to the wall, so columns just past it sit in
/// its shadow and the film edge forms where columns first reach half the
/// target thickness. LER is the population standard deviation of that edge
/// position along the wall, converted with the lateral site size.
pub fn line_edge_roughness(
    cfg: &GrowthConfig,
    edge_mask_height_ml: u32,
    site_nm: f64,
) -> Result<f64, GrowthError> {
    let profile = edge_profile(cfg, edge_mask_height_ml)?;
    if !(site_nm.is_finite() && site_nm > 0.0) {
        return Err(GrowthError::InvalidParameter {
            parameter: "site_nm",
            value: site_nm,
            constraint: "must be finite and > 0",
        });
    }
    let positions: Vec<f64> = profile.iter().map(|&x| x as f64).collect();
    let sigma = crate::stats::population_std(&positions).expect("non-empty profile");
    Ok(sigma * site_nm)
}

/// Edge position per row for the 2+1D mask-wall growth; exposed for tests
/// and the roughness sweep tooling.
pub fn edge_profile(
    cfg: &GrowthConfig,
    edge_mask_height_ml: u32,
) -> Result<Vec<usize>, GrowthError> {
    cfg.validate()?;
    if (edge_mask_height_ml as f64) <= cfg.target_mean_height_ml {
        return Err(GrowthError::MaskBuried {
            mask_ml: edge_mask_height_ml,
            film_ml: cfg.target_mean_height_ml,
        });
    }
    let w = cfg.lattice_width_sites;
    let depth = w;
    let tan = cfg.incidence_angle_deg.to_radians().tan();
    let shadow = edge_mask_height_ml as f64 * tan;
    if shadow >= 0.75 * w as f64 {
        return Err(GrowthError::MaskShadowTooWide {
            shadow_sites: shadow,
            width: w,
        });
    }
    // Flatten (x, y) to x + w*y. The wall occupies x = w-1 for every y.
    let wall_x = w - 1;
    let mut lat = Lattice::new(w * depth);
    for y in 0..depth {
        lat.heights[wall_x + w * y] = edge_mask_height_ml;
    }
    lat.max_height = edge_mask_height_ml;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let base_rad = cfg.incidence_angle_deg.to_radians();
    let spread_rad = BEAM_DIVERGENCE_DEG.to_radians();
    let particles = (cfg.target_mean_height_ml * (w as f64) * depth as f64).round() as u64;
    let mut scratch = Vec::with_capacity(8);
    // Hops never enter the wall plane; rows wrap in y.
    let neighbours = |c: usize, out: &mut Vec<usize>| {
        let (x, y) = (c % w, c / w);
        if x > 0 {
            out.push(c - 1);
        }
        if x + 1 < wall_x {
            out.push(c + 1);
        }
        out.push(x + w * ((y + depth - 1) % depth));
        out.push(x + w * ((y + 1) % depth));
    };
    for _ in 0..particles {
        let start = rng.gen_range(0..w * depth);
        let phase = rng.gen::<f64>();
        let dev = spread_rad * (2.0 * rng.gen::<f64>() - 1.0);
        let (x0, y) = (start % w, start / w);
        // Rays stay in their own row; index row columns in ray order.
        let row = move |c: usize| c + w * y;
        let landing = match cfg.mode {
            GrowthMode::RandomDeposition => {
                if x0 == wall_x {
                    None
                } else {
                    Some(x0)
                }
            }
            GrowthMode::BallisticShadowed => {
                let z0 = lat.max_height as f64 + 1.0 + phase;
                trace_ray(
                    &lat.heights,
                    row,
                    w,
                    x0,
                    z0,
                    (base_rad + dev).tan(),
                    Some((wall_x, edge_mask_height_ml)),
                )
            }
        };
        // Rays the mask swallows never join the film.
        let Some(x_land) = landing else { continue };
        settle(
            &mut lat,
            &mut rng,
            x_land + w * y,
            &neighbours,
            cfg.contamination_per_site,
            cfg.diffusion_steps_per_particle,
            &mut scratch,
        );
    }
    let threshold = ((cfg.target_mean_height_ml / 2.0).round() as u32).max(1);
    let mut profile = Vec::with_capacity(depth);
    for y in 0..depth {
        let mut edge = wall_x;
        for x in 0..wall_x {
            if lat.heights[x + w * y] >= threshold {
                edge = x;
                break;
            }
        }
        profile.push(edge);
    }
    Ok(profile)
}

/// Map a deposition rate onto the two lattice mobility knobs: slow growth
/// buys diffusion hops but accumulates chamber contaminants, fast growth
/// quenches both. The opposing trends give the roughness-vs-rate minimum.
pub fn rate_to_mobility(
    rate_nm_per_s: f64,
    chamber_contamination_const: f64,
) -> Result<(u32, f64), GrowthError> {
    if !(rate_nm_per_s.is_finite() && rate_nm_per_s > 0.0) {
        return Err(GrowthError::InvalidParameter {
            parameter: "rate_nm_per_s",
            value: rate_nm_per_s,
            constraint: "must be finite and > 0",
        });
    }
    if !(chamber_contamination_const.is_finite() && chamber_contamination_const >= 0.0) {
        return Err(GrowthError::InvalidParameter {
            parameter: "chamber_contamination_const",
            value: chamber_contamination_const,
            constraint: "must be finite and >= 0",
        });
    }
    let steps = (K_DIFFUSION_NM_PER_S / rate_nm_per_s).round() as u32;
    let contamination = (chamber_contamination_const / rate_nm_per_s).min(1.0);
    Ok((steps, contamination))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(width: usize, target: f64, angle: f64, seed: u64) -> GrowthConfig {
        GrowthConfig {
            lattice_width_sites: width,
            target_mean_height_ml: target,
            incidence_angle_deg: angle,
            diffusion_steps_per_particle: 0,
            contamination_per_site: 0.0,
            rng_seed: seed,
            mode: GrowthMode::BallisticShadowed,
        }
    }

    #[test]
    fn zero_particles_give_flat_surface() {
        let s = grow_surface(&cfg(64, 0.0, 45.0, 1)).unwrap();
        assert!(s.heights.iter().all(|&h| h == 0));
        assert_eq!(rms_roughness(&s, DEFAULT_MONOLAYER_NM).unwrap(), 0.0);
        assert_eq!(s.deposited_particles, 0);
    }

    #[test]
    fn two_level_surface_has_one_monolayer_rms() {
        let mut s = grow_surface(&cfg(64, 0.0, 0.0, 1)).unwrap();
        for (i, h) in s.heights.iter_mut().enumerate() {
            *h = if i % 2 == 0 { 0 } else { 2 };
        }
        let rms = rms_roughness(&s, DEFAULT_MONOLAYER_NM).unwrap();
        assert!((rms - DEFAULT_MONOLAYER_NM).abs() < 1e-12, "got {rms}");
    }

    #[test]
    fn mass_is_conserved_exactly() {
        for seed in 0..5 {
            let mut c = cfg(128, 37.0, 55.0, seed);
            c.diffusion_steps_per_particle = 3;
            c.contamination_per_site = 0.02;
            let s = grow_surface(&c).unwrap();
            let total: u64 = s.heights.iter().map(|&h| h as u64).sum();
            assert_eq!(total, s.deposited_particles);
            assert_eq!(s.deposited_particles, (37.0f64 * 128.0).round() as u64);
        }
    }

    #[test]
    fn mean_height_tracks_target() {
        let s = grow_surface(&cfg(256, 52.0, 45.0, 3)).unwrap();
        let mean =
            s.heights.iter().map(|&h| h as f64).sum::<f64>() / s.heights.len() as f64;
        assert!(
            (mean - 52.0).abs() / 52.0 < 0.02,
            "mean {mean} strays from target"
        );
    }

    #[test]
    fn identical_configs_grow_identical_surfaces() {
        let mut c = cfg(128, 40.0, 60.0, 99);
        c.diffusion_steps_per_particle = 2;
        c.contamination_per_site = 0.01;
        let a = grow_surface(&c).unwrap();
        let b = grow_surface(&c).unwrap();
        assert_eq!(a, b);
        let mut c2 = c;
        c2.rng_seed = 100;
        assert_ne!(grow_surface(&c2).unwrap().heights, a.heights);
    }

    #[test]
    fn random_deposition_matches_poisson_statistics() {
        // Binomial column counts: RMS ~= sqrt(mean) for mean 100 ML.
        let mut total = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let mut c = cfg(256, 100.0, 0.0, seed);
            c.mode = GrowthMode::RandomDeposition;
            let s = grow_surface(&c).unwrap();
            total += rms_roughness(&s, 1.0).unwrap();
        }
        let mean_rms = total / seeds as f64;
        assert!(
            (mean_rms - 10.0).abs() / 10.0 < 0.10,
            "ensemble RMS {mean_rms} vs Poisson 10"
        );
    }

    #[test]
    fn shadowing_roughens_steep_angles() {
        let mut steep_sum = 0.0;
        let mut normal_sum = 0.0;
        for seed in 0..10 {
            let steep = grow_surface(&cfg(256, 52.0, 60.0, seed)).unwrap();
            let normal = grow_surface(&cfg(256, 52.0, 0.0, seed)).unwrap();
            steep_sum += rms_roughness(&steep, 1.0).unwrap();
            normal_sum += rms_roughness(&normal, 1.0).unwrap();
        }
        assert!(
            steep_sum > normal_sum,
            "60 deg ensemble {steep_sum} should exceed 0 deg {normal_sum}"
        );
    }

    #[test]
    fn ballistic_mode_is_rougher_than_random_at_steep_angles() {
        for angle in [30.0, 45.0, 60.0] {
            let mut bal = 0.0;
            let mut rd = 0.0;
            for seed in 0..8 {
                let c = cfg(256, 52.0, angle, seed);
                bal += rms_roughness(&grow_surface(&c).unwrap(), 1.0).unwrap();
                let mut cr = c;
                cr.mode = GrowthMode::RandomDeposition;
                rd += rms_roughness(&grow_surface(&cr).unwrap(), 1.0).unwrap();
            }
            assert!(bal >= rd, "shadowing must not smooth: {bal} < {rd} at {angle}");
        }
    }

    #[test]
    fn roughness_grows_with_thickness() {
        let mut last = 0.0;
        for target in [15.0, 52.0, 122.0] {
            let mut sum = 0.0;
            for seed in 0..8 {
                let s = grow_surface(&cfg(256, target, 45.0, seed)).unwrap();
                sum += rms_roughness(&s, 1.0).unwrap();
            }
            assert!(sum > last, "RMS should rise with thickness: {sum} at {target} ML");
            last = sum;
        }
    }

    #[test]
    fn optimal_regime_lands_near_one_nanometre() {
        // Near-normal incidence, 15 nm equivalent film, mobility from a
        // moderate rate: the median RMS should sit at the 1 nm order
        // (within a factor of two either way).
        let (steps, contam) = rate_to_mobility(0.4, DEFAULT_CONTAMINATION_CONST_NM_PER_S).unwrap();
        let mut vals = Vec::new();
        for seed in 0..15 {
            let c = GrowthConfig {
                lattice_width_sites: 512,
                target_mean_height_ml: 52.0,
                incidence_angle_deg: 0.0,
                diffusion_steps_per_particle: steps,
                contamination_per_site: contam,
                rng_seed: 1000 + seed,
                mode: GrowthMode::BallisticShadowed,
            };
            let s = grow_surface(&c).unwrap();
            vals.push(rms_roughness(&s, DEFAULT_MONOLAYER_NM).unwrap());
        }
        let med = crate::stats::median(&vals).unwrap();
        assert!(
            (0.5..=1.5).contains(&med),
            "optimal-regime RMS {med} nm should be 1 nm within 50%"
        );
    }

    #[test]
    fn diffusion_smooths_the_film() {
        let mut frozen = 0.0;
        let mut mobile = 0.0;
        for seed in 0..8 {
            let c0 = cfg(256, 52.0, 45.0, seed);
            frozen += rms_roughness(&grow_surface(&c0).unwrap(), 1.0).unwrap();
            let mut c3 = c0;
            c3.diffusion_steps_per_particle = 3;
            mobile += rms_roughness(&grow_surface(&c3).unwrap(), 1.0).unwrap();
        }
        assert!(mobile < frozen, "hops must smooth: {mobile} vs {frozen}");
    }

    #[test]
    fn contamination_pins_roughness_in() {
        let mut clean = 0.0;
        let mut dirty = 0.0;
        for seed in 0..8 {
            let mut c = cfg(256, 52.0, 45.0, seed);
            c.diffusion_steps_per_particle = 3;
            clean += rms_roughness(&grow_surface(&c).unwrap(), 1.0).unwrap();
            c.contamination_per_site = 0.05;
            dirty += rms_roughness(&grow_surface(&c).unwrap(), 1.0).unwrap();
        }
        assert!(dirty > clean, "contaminants should roughen: {dirty} vs {clean}");
    }

    #[test]
    fn rate_mapping_matches_the_two_laws() {
        let (s, c) = rate_to_mobility(0.2, DEFAULT_CONTAMINATION_CONST_NM_PER_S).unwrap();
        assert_eq!(s, 3);
        assert!((c - 0.02).abs() < 1e-12);
        let (s, c) = rate_to_mobility(0.6, DEFAULT_CONTAMINATION_CONST_NM_PER_S).unwrap();
        assert_eq!(s, 1);
        assert!((c - 0.004 / 0.6).abs() < 1e-12);
        let (s, c) = rate_to_mobility(1.5, DEFAULT_CONTAMINATION_CONST_NM_PER_S).unwrap();
        assert_eq!(s, 0);
        assert!((c - 0.004 / 1.5).abs() < 1e-12);
        // Fast-rate limit: both knobs vanish.
        let (s, c) = rate_to_mobility(1e6, DEFAULT_CONTAMINATION_CONST_NM_PER_S).unwrap();
        assert_eq!(s, 0);
        assert!(c < 1e-8);
        // Contamination saturates at probability one.
        let (_, c) = rate_to_mobility(1e-4, DEFAULT_CONTAMINATION_CONST_NM_PER_S).unwrap();
        assert_eq!(c, 1.0);
        assert!(rate_to_mobility(0.0, 0.004).is_err());
        assert!(rate_to_mobility(0.5, -1.0).is_err());
    }

    #[test]
    fn edge_profile_is_deterministic_and_mask_checked() {
        let mut c = cfg(64, 20.0, 45.0, 7);
        c.diffusion_steps_per_particle = 1;
        let a = edge_profile(&c, 26).unwrap();
        let b = edge_profile(&c, 26).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert!(matches!(
            edge_profile(&c, 10),
            Err(GrowthError::MaskBuried { .. })
        ));
        assert!(matches!(
            edge_profile(&c, 50),
            Err(GrowthError::MaskShadowTooWide { .. })
        ));
    }

    #[test]
    fn zero_material_has_zero_ler() {
        let c = cfg(32, 0.0, 45.0, 1);
        let ler = line_edge_roughness(&c, 5, DEFAULT_MONOLAYER_NM).unwrap();
        assert_eq!(ler, 0.0);
    }

    #[test]
    fn tilted_edges_are_rougher_than_normal_incidence() {
        let mut tilted = Vec::new();
        let mut normal = Vec::new();
        for seed in 0..10 {
            let mut c = cfg(96, 20.0, 45.0, seed);
            c.diffusion_steps_per_particle = 1;
            tilted.push(line_edge_roughness(&c, 30, 1.0).unwrap());
            c.incidence_angle_deg = 0.0;
            normal.push(line_edge_roughness(&c, 30, 1.0).unwrap());
        }
        let med = |v: &mut Vec<f64>| crate::stats::median(v).unwrap();
        assert!(
            med(&mut tilted) > med(&mut normal),
            "edge at 45 deg should fluctuate more"
        );
    }

    #[test]
    fn thicker_films_have_rougher_edges() {
        let mut thick = Vec::new();
        let mut thin = Vec::new();
        for seed in 0..10 {
            let mut c = cfg(96, 45.0, 30.0, seed);
            c.diffusion_steps_per_particle = 1;
            thick.push(line_edge_roughness(&c, 60, 1.0).unwrap());
            c.target_mean_height_ml = 15.0;
            thin.push(line_edge_roughness(&c, 60, 1.0).unwrap());
        }
        let med = |v: &mut Vec<f64>| crate::stats::median(v).unwrap();
        assert!(
            med(&mut thick) > med(&mut thin),
            "45 ML edge should fluctuate more than 15 ML"
        );
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let mut c = cfg(8, 10.0, 0.0, 1);
        assert!(c.validate().is_err());
        c.lattice_width_sites = 64;
        c.incidence_angle_deg = 90.0;
        assert!(c.validate().is_err());
        c.incidence_angle_deg = -5.0;
        assert!(c.validate().is_err());
        c.incidence_angle_deg = 30.0;
        c.contamination_per_site = 1.5;
        assert!(c.validate().is_err());
        c.contamination_per_site = 0.0;
        assert!(c.validate().is_ok());
    }
}
