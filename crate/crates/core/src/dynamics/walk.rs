//! Reinforced random walk: `X` moves by at most `M` per step, `Z` is drawn in
//! `[X/d, X]`, and above `z0` the chance of an upward move at `Z = z` decays
//! with the number of visits to `z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Scan length used to take suprema over `z`.
const Z_SCAN: u64 = 100_000;
/// Terms of `sum_m r(z, m)` below this are dropped.
const TERM_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reinforcement {
    /// `scale * exp(-eta * ceil(z / divisor) * (m + 1))`.
    Exponential { scale: f64, eta: f64, divisor: u64 },
    /// `rows[z][m - 1]`; entries outside the table are 0.
    Table { rows: Vec<Vec<f64>> },
}

impl Reinforcement {
    pub fn at(&self, z: u64, m: u64) -> f64 {
        match self {
            Reinforcement::Exponential { scale, eta, divisor } => {
                let zc = z.div_ceil(*divisor) as f64;
                scale * (-eta * zc * (m + 1) as f64).exp()
            }
            Reinforcement::Table { rows } => rows
                .get(z as usize)
                .and_then(|row| row.get((m as usize).wrapping_sub(1)))
                .copied()
                .unwrap_or(0.0),
        }
    }

    /// `sum_{m >= 1} r(z, m)`.
    pub fn visit_sum(&self, z: u64) -> f64 {
        match self {
            Reinforcement::Exponential { scale, eta, divisor } => {
                let q = (-eta * z.div_ceil(*divisor) as f64).exp();
                if q >= 1.0 {
                    return f64::INFINITY;
                }
                scale * q * q / (1.0 - q)
            }
            Reinforcement::Table { rows } => rows.get(z as usize).map(|r| r.iter().sum()).unwrap_or(0.0),
        }
    }

    /// `sum_{m >= 1} ln(1 - r(z, m))`, or `-inf` if some `r >= 1`.
    pub fn log_survival(&self, z: u64) -> f64 {
        let mut total = 0.0;
        let mut m = 1;
        loop {
            let r = self.at(z, m);
            if r >= 1.0 {
                return f64::NEG_INFINITY;
            }
            total += (-r).ln_1p();
            let exhausted = match self {
                Reinforcement::Exponential { .. } => r < TERM_FLOOR,
                Reinforcement::Table { rows } => m as usize >= rows.get(z as usize).map_or(0, Vec::len),
            };
            if exhausted {
                return total;
            }
            m += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub reinforcement: Reinforcement,
    /// Largest upward jump `M`.
    pub max_jump: u64,
    /// `Z` lies in `[X/d, X]`.
    pub d: f64,
    pub z0: u64,
    /// `A` with `sum_m r(z, m) < A / z` for `z >= z0`; computed when absent.
    pub sum_bound: Option<f64>,
    /// Upward probability while `Z < z0`; `p_max` when absent.
    #[serde(default)]
    pub low_up: Option<f64>,
    pub start: u64,
}

impl WalkParams {
    /// `r(z, m) = 5 exp(-0.1 z (m + 1))`, `d = 3`, `M = 3`, `z0 = 10`.
    pub fn default_exponential() -> Self {
        WalkParams {
            reinforcement: Reinforcement::Exponential {
                scale: 5.0,
                eta: 0.1,
                divisor: 1,
            },
            max_jump: 3,
            d: 3.0,
            z0: 10,
            sum_bound: None,
            low_up: None,
            start: 0,
        }
    }
}

/// Constants derived from valid walk parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkConstants {
    pub sum_bound: f64,
    /// `sup r(z, m)` over `z >= z0`.
    pub p_max: f64,
}

pub fn validate_walk(wp: &WalkParams) -> Result<WalkConstants, DynamicsError> {
    let bad = |msg: String| Err(DynamicsError::InvalidWalk(msg));
    if wp.max_jump == 0 {
        return bad("the maximal jump must be positive".into());
    }
    if !(wp.d.is_finite() && wp.d > 1.0) {
        return bad(format!("d must exceed 1, got {}", wp.d));
    }
    let z_end = match &wp.reinforcement {
        Reinforcement::Exponential { scale, eta, divisor } => {
            if !(scale.is_finite() && *scale >= 0.0 && eta.is_finite() && *eta > 0.0 && *divisor > 0) {
                return bad("exponential reinforcement needs scale >= 0, eta > 0, divisor > 0".into());
            }
            wp.z0 + Z_SCAN
        }
        Reinforcement::Table { rows } => {
            if rows.iter().flatten().any(|r| !r.is_finite() || *r < 0.0) {
                return bad("reinforcement table entries must be finite and nonnegative".into());
            }
            wp.z0.max(rows.len() as u64)
        }
    };

    let mut p_max: f64 = 0.0;
    let mut sup = 0.0f64;
    for z in wp.z0.max(1)..=z_end {
        let r1 = match &wp.reinforcement {
            Reinforcement::Exponential { .. } => wp.reinforcement.at(z, 1),
            Reinforcement::Table { rows } => rows
                .get(z as usize)
                .map(|row| row.iter().copied().fold(0.0, f64::max))
                .unwrap_or(0.0),
        };
        p_max = p_max.max(r1);
        sup = sup.max(z as f64 * wp.reinforcement.visit_sum(z));
    }
    if wp.z0 == 0 {
        p_max = p_max.max(match &wp.reinforcement {
            Reinforcement::Table { rows } => rows.first().map_or(0.0, |row| row.iter().copied().fold(0.0, f64::max)),
            e => e.at(0, 1),
        });
    }
    if p_max >= 1.0 {
        return bad(format!("r reaches {p_max} >= 1 above z0"));
    }
    if !sup.is_finite() {
        return bad("sum over visits diverges".into());
    }
    let sum_bound = match wp.sum_bound {
        Some(a) if a > sup => a,
        Some(a) => return bad(format!("sum bound {a} does not exceed sup z * sum_m r = {sup}")),
        None => sup * (1.0 + 1e-9) + f64::MIN_POSITIVE,
    };
    if let Some(p) = wp.low_up {
        if !(0.0..1.0).contains(&p) {
            return bad(format!("upward probability below z0 must lie in [0, 1), got {p}"));
        }
    }
    Ok(WalkConstants { sum_bound, p_max })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkReport {
    pub seed: u64,
    pub steps: u64,
    pub start: u64,
    pub sup: u64,
    pub final_x: u64,
    pub up_moves: u64,
    pub constants: WalkConstants,
}

/// Default coupling: with probability `r(Z, n_Z)` (or `low_up` below `z0`) the
/// walk jumps up uniformly by `1..=M`, otherwise it steps down by one.
/// Visit counts include the current visit.
pub fn reinforced_walk_run(wp: &WalkParams, horizon: u64, seed: u64) -> Result<WalkReport, DynamicsError> {
    let constants = validate_walk(wp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visits: Vec<u64> = Vec::new();
    let mut x = wp.start;
    let mut sup = x;
    let mut up_moves = 0;
    for _ in 0..horizon {
        let lo = (x as f64 / wp.d).ceil() as u64;
        let z = if x == 0 { 0 } else { rng.gen_range(lo.min(x)..=x) };
        if visits.len() <= z as usize {
            visits.resize(z as usize + 1, 0);
        }
        visits[z as usize] += 1;
        let p = if z >= wp.z0 {
            wp.reinforcement.at(z, visits[z as usize])
        } else {
            wp.low_up.unwrap_or(constants.p_max)
        };
        if rng.gen::<f64>() < p {
            x += rng.gen_range(1..=wp.max_jump);
            up_moves += 1;
        } else {
            x = x.saturating_sub(1);
        }
        sup = sup.max(x);
    }
    Ok(WalkReport {
        seed,
        steps: horizon,
        start: wp.start,
        sup,
        final_x: x,
        up_moves,
        constants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductBoundRow {
    pub x: u64,
    /// Smallest `z` in the product, `max(ceil((x - M) / d), z0)`.
    pub z_low: u64,
    pub log_product: f64,
    /// `(A / (1 - p_max)) ((d - 1) x + M + d) / (x - M)`.
    pub b: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductBoundSweep {
    pub constants: WalkConstants,
    pub rows: Vec<ProductBoundRow>,
    pub all_hold: bool,
}

/// Checks `prod_{z} prod_{m} (1 - r(z, m)) >= exp(-B)` for every `x` in the range,
/// with `z` running over `[(x - M)/d, x]` clipped below at `z0`.
pub fn product_bound_sweep(
    wp: &WalkParams,
    xs: std::ops::RangeInclusive<u64>,
) -> Result<ProductBoundSweep, DynamicsError> {
    let constants = validate_walk(wp)?;
    let m = wp.max_jump;
    let top = *xs.end();
    let survival: Vec<f64> = (0..=top)
        .map(|z| {
            if z >= wp.z0 {
                wp.reinforcement.log_survival(z)
            } else {
                0.0
            }
        })
        .collect();
    let mut rows = Vec::new();
    for x in xs {
        if x <= m {
            return Err(DynamicsError::InvalidWalk(format!(
                "sweep point {x} must exceed M = {m}"
            )));
        }
        let z_low = (((x - m) as f64) / wp.d).ceil().max(wp.z0 as f64) as u64;
        let log_product: f64 = (z_low..=x).map(|z| survival[z as usize]).sum();
        let b = constants.sum_bound / (1.0 - constants.p_max) * ((wp.d - 1.0) * x as f64 + m as f64 + wp.d)
            / (x - m) as f64;
        rows.push(ProductBoundRow {
            x,
            z_low,
            log_product,
            b,
            holds: log_product >= -b,
        });
    }
    Ok(ProductBoundSweep {
        constants,
        all_hold: rows.iter().all(|r| r.holds),
        rows,
    })
}
