//! Grid search over products of discretized simplices.
//!
//! Two uses: [`brute_force_nash`] lists every grid profile whose largest
//! unilateral deviation gain is at most `epsilon` (a desk-scale oracle), and
//! [`approximate_equilibrium`] finds the grid profile with the smallest such
//! gain, then refines it on successively finer local grids.
//!
//! Actions below `T - k` are strictly dominated when `k < T` and are left out
//! of the grid. All players but the last are enumerated; the last player's
//! candidates are generated only where its own gain stays within the bound.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use super::GameError;
use crate::queue::{cost_from_stats, schedule_unchecked, MixedProfile, ModelParams, State};
use crate::rational::to_f64;

pub const DEFAULT_GRID_CAP: u64 = 20_000_000;
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub step: f64,
    /// Defaults to [`grid_epsilon`] when `None`.
    pub epsilon: Option<f64>,
    /// Limit on the number of enumerated tuples of non-last players.
    pub cap: u64,
}

impl GridSpec {
    pub fn new(step: f64) -> Self {
        GridSpec {
            step,
            epsilon: None,
            cap: DEFAULT_GRID_CAP,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEquilibrium {
    pub profile: MixedProfile,
    pub max_deviation_gain: f64,
    pub resolution: u32,
    /// Grid units per player over the undominated actions `first_action..T`.
    pub units: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchResult {
    pub step: f64,
    pub epsilon: f64,
    pub first_action: usize,
    /// Sorted lexicographically by grid units, player by player.
    pub equilibria: Vec<GridEquilibrium>,
}

/// Pure-profile cost tables of the game restricted to the undominated actions.
struct ReducedGame {
    players: usize,
    period: usize,
    first: usize,
    actions: usize,
    /// `tables[i][idx]`: cost of player `i`; `idx` is row-major with player 0 most significant.
    tables: Vec<Vec<f64>>,
}

impl ReducedGame {
    fn new(params: &ModelParams, state: &State) -> Result<Self, GameError> {
        params.check_state(state)?;
        let players = params.players();
        let period = params.period();
        let k = state.total() as usize;
        let first = period.saturating_sub(k);
        let actions = period - first;
        let size = (actions as u64).checked_pow(players as u32).unwrap_or(u64::MAX);
        if size > 50_000_000 {
            return Err(GameError::EnumerationCap {
                needed: size,
                cap: 50_000_000,
            });
        }
        let size = size as usize;
        let mut tables = vec![vec![0.0; size]; players];
        let mut profile = vec![first; players];
        for idx in 0..size {
            let mut rest = idx;
            for j in (0..players).rev() {
                profile[j] = first + rest % actions;
                rest /= actions;
            }
            let stats = schedule_unchecked(period, state.counts(), &profile);
            for (i, table) in tables.iter_mut().enumerate() {
                table[idx] = to_f64(&cost_from_stats(params, state, &stats, profile[i], i));
            }
        }
        Ok(ReducedGame {
            players,
            period,
            first,
            actions,
            tables,
        })
    }

    fn spread(&self) -> f64 {
        self.tables
            .iter()
            .map(|t| {
                let (lo, hi) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
                    (lo.min(c), hi.max(c))
                });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Expected cost of each own action of `player` against the others in `xs`.
    fn action_costs(&self, player: usize, xs: &[Vec<f64>]) -> Vec<f64> {
        let a = self.actions;
        let mut costs = vec![0.0; a];
        let mut digits = vec![0usize; self.players];
        for &cost in &self.tables[player] {
            let weight: f64 = digits
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != player)
                .map(|(j, &d)| xs[j][d])
                .product();
            costs[digits[player]] += weight * cost;
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < a {
                    break;
                }
                *d = 0;
            }
        }
        costs
    }

    fn gain(&self, player: usize, xs: &[Vec<f64>], costs: &[f64]) -> f64 {
        let own: f64 = xs[player].iter().zip(costs).map(|(x, c)| x * c).sum();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        (own - min).max(0.0)
    }

    fn to_profile(&self, units: &[Vec<u32>], resolution: u32) -> MixedProfile {
        let strategies = units
            .iter()
            .map(|u| {
                let mut s = vec![0.0; self.period];
                for (b, &n) in u.iter().enumerate() {
                    s[self.first + b] = n as f64 / resolution as f64;
                }
                s
            })
            .collect();
        MixedProfile::new(strategies).expect("grid points are distributions")
    }
}

/// Integer box `[lo_b, hi_b]` per action for one player's grid units.
#[derive(Debug, Clone)]
struct UnitBox {
    lo: Vec<u32>,
    hi: Vec<u32>,
}

impl UnitBox {
    fn full(actions: usize, resolution: u32) -> Self {
        UnitBox {
            lo: vec![0; actions],
            hi: vec![resolution; actions],
        }
    }

    fn around(center: &[u32], scale: u32, window: u32, resolution: u32) -> Self {
        UnitBox {
            lo: center.iter().map(|&c| (c * scale).saturating_sub(window)).collect(),
            hi: center.iter().map(|&c| (c * scale + window).min(resolution)).collect(),
        }
    }

    /// All unit vectors inside the box summing to `resolution`, in lexicographic order.
    fn points(&self, resolution: u32) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut current = vec![0u32; self.lo.len()];
        self.fill(0, resolution, &mut current, &mut out);
        out
    }

    fn fill(&self, b: usize, remaining: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let last = b + 1 == self.lo.len();
        if last {
            if remaining >= self.lo[b] && remaining <= self.hi[b] {
                current[b] = remaining;
                out.push(current.clone());
            }
            return;
        }
        let rest_min: u32 = self.lo[b + 1..].iter().sum();
        let rest_max: u32 = self.hi[b + 1..].iter().sum();
        for n in self.lo[b]..=self.hi[b].min(remaining) {
            let left = remaining - n;
            if left < rest_min || left > rest_max {
                continue;
            }
            current[b] = n;
            self.fill(b + 1, left, current, out);
        }
    }
}

trait Sink {
    fn bound(&self) -> f64;
    fn offer(&mut self, gain: f64, units: &[Vec<u32>]);
}

struct ThresholdSink {
    epsilon: f64,
    found: Vec<(f64, Vec<Vec<u32>>)>,
}

impl Sink for ThresholdSink {
    fn bound(&self) -> f64 {
        self.epsilon
    }

    fn offer(&mut self, gain: f64, units: &[Vec<u32>]) {
        if gain <= self.epsilon {
            self.found.push((gain, units.to_vec()));
        }
    }
}

struct BestSink<'a> {
    shared: &'a AtomicU64,
    best: Option<(f64, Vec<Vec<u32>>)>,
}

impl Sink for BestSink<'_> {
    fn bound(&self) -> f64 {
        // Nonnegative floats order the same way as their bit patterns.
        f64::from_bits(self.shared.load(Ordering::Relaxed))
    }

    fn offer(&mut self, gain: f64, units: &[Vec<u32>]) {
        let better = match &self.best {
            None => true,
            Some((g, u)) => gain < *g || (gain == *g && units < u.as_slice()),
        };
        if better {
            self.best = Some((gain, units.to_vec()));
            self.shared.fetch_min(gain.to_bits(), Ordering::Relaxed);
        }
    }
}

struct Search<'a> {
    game: &'a ReducedGame,
    resolution: u32,
    /// Candidate grid points of players `0..N-1` (all but the last), as units and as floats.
    grids: Vec<Vec<(Vec<u32>, Vec<f64>)>>,
    last_box: UnitBox,
}

impl<'a> Search<'a> {
    fn new(game: &'a ReducedGame, resolution: u32, boxes: &[UnitBox], cap: u64) -> Result<Self, GameError> {
        let grids: Vec<Vec<(Vec<u32>, Vec<f64>)>> = boxes[..game.players - 1]
            .iter()
            .map(|b| {
                b.points(resolution)
                    .into_iter()
                    .map(|u| {
                        let x = u.iter().map(|&n| n as f64 / resolution as f64).collect();
                        (u, x)
                    })
                    .collect()
            })
            .collect();
        let tuples = grids
            .iter()
            .try_fold(1u64, |acc, g| acc.checked_mul(g.len() as u64))
            .unwrap_or(u64::MAX);
        if tuples > cap {
            return Err(GameError::EnumerationCap { needed: tuples, cap });
        }
        Ok(Search {
            game,
            resolution,
            grids,
            last_box: boxes[game.players - 1].clone(),
        })
    }

    fn run<S: Sink>(&self, first: usize, sink: &mut S) {
        let last_table = &self.game.tables[self.game.players - 1];
        let mut chosen = vec![first];
        let tensor = contract(last_table, &self.grids[0][first].1, self.game.actions);
        self.descend(1, &tensor, &mut chosen, sink);
    }

    fn descend<S: Sink>(&self, level: usize, tensor: &[f64], chosen: &mut Vec<usize>, sink: &mut S) {
        let players = self.game.players;
        if level == players - 1 {
            self.finish(tensor, chosen, sink);
            return;
        }
        for idx in 0..self.grids[level].len() {
            let next = contract(tensor, &self.grids[level][idx].1, self.game.actions);
            chosen.push(idx);
            self.descend(level + 1, &next, chosen, sink);
            chosen.pop();
        }
    }

    /// `costs` are the last player's expected costs against the chosen grid points.
    fn finish<S: Sink>(&self, costs: &[f64], chosen: &[usize], sink: &mut S) {
        let game = self.game;
        let last = game.players - 1;
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let gaps: Vec<f64> = costs.iter().map(|c| c - min).collect();
        let r = self.resolution;

        let mut xs: Vec<Vec<f64>> = chosen
            .iter()
            .enumerate()
            .map(|(j, &idx)| self.grids[j][idx].1.clone())
            .collect();
        xs.push(vec![0.0; game.actions]);
        let mut units: Vec<Vec<u32>> = chosen
            .iter()
            .enumerate()
            .map(|(j, &idx)| self.grids[j][idx].0.clone())
            .collect();
        units.push(vec![0; game.actions]);

        let mut current = vec![0u32; game.actions];
        let budget = |sink: &S| sink.bound() * r as f64 * (1.0 + BOUND_SLACK) + BOUND_SLACK;
        self.last_candidates(
            0,
            r,
            0.0,
            &gaps,
            &mut current,
            &mut |cand: &[u32], sink: &mut S| {
                let own_gain: f64 = cand.iter().zip(&gaps).map(|(&n, g)| n as f64 * g).sum::<f64>() / r as f64;
                if own_gain > sink.bound() + BOUND_SLACK {
                    return;
                }
                for (b, &n) in cand.iter().enumerate() {
                    xs[last][b] = n as f64 / r as f64;
                }
                let mut gain = game.gain(last, &xs, costs);
                for i in 0..last {
                    if gain > sink.bound() + BOUND_SLACK {
                        return;
                    }
                    let c = game.action_costs(i, &xs);
                    gain = gain.max(game.gain(i, &xs, &c));
                }
                units[last].copy_from_slice(cand);
                sink.offer(gain, &units);
            },
            sink,
            &budget,
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn last_candidates<S: Sink, F, B>(
        &self,
        b: usize,
        remaining: u32,
        spent: f64,
        gaps: &[f64],
        current: &mut Vec<u32>,
        visit: &mut F,
        sink: &mut S,
        budget: &B,
    ) where
        F: FnMut(&[u32], &mut S),
        B: Fn(&S) -> f64,
    {
        let lo = &self.last_box.lo;
        let hi = &self.last_box.hi;
        if b + 1 == lo.len() {
            if remaining >= lo[b] && remaining <= hi[b] && spent + remaining as f64 * gaps[b] <= budget(sink) {
                current[b] = remaining;
                visit(current, sink);
            }
            return;
        }
        let rest_min: u32 = lo[b + 1..].iter().sum();
        let rest_max: u32 = hi[b + 1..].iter().sum();
        for n in lo[b]..=hi[b].min(remaining) {
            let left = remaining - n;
            if left < rest_min || left > rest_max {
                continue;
            }
            let cost = spent + n as f64 * gaps[b];
            if cost > budget(sink) {
                break;
            }
            current[b] = n;
            self.last_candidates(b + 1, left, cost, gaps, current, visit, sink, budget);
        }
    }
}

/// Contracts the leading (most significant) axis of `tensor` with the weights `x`.
fn contract(tensor: &[f64], x: &[f64], actions: usize) -> Vec<f64> {
    let block = tensor.len() / actions;
    let mut out = vec![0.0; block];
    for (a, &w) in x.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let slice = &tensor[a * block..(a + 1) * block];
        for (o, &t) in out.iter_mut().zip(slice) {
            *o += w * t;
        }
    }
    out
}

fn resolution_of(step: f64) -> Result<u32, GameError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(GameError::Precondition(format!("grid step {step} must lie in (0, 1]")));
    }
    let r = (1.0 / step).round();
    if (r * step - 1.0).abs() > 1e-9 {
        return Err(GameError::Precondition(format!("grid step {step} must divide 1")));
    }
    Ok(r as u32)
}

/// Default tolerance for a grid of the given step: a quarter step times the
/// largest spread of any player's pure-profile costs.
pub fn grid_epsilon(params: &ModelParams, state: &State, step: f64) -> Result<f64, GameError> {
    Ok(step * ReducedGame::new(params, state)?.spread() / 4.0)
}

/// Every grid profile whose maximal deviation gain is at most `epsilon`.
///
/// Desk-scale oracle: at most 4 players, period at most 4, step at least 0.02.
pub fn brute_force_nash(params: &ModelParams, state: &State, spec: GridSpec) -> Result<GridSearchResult, GameError> {
    if params.players() > 4 || params.period() > 4 {
        return Err(GameError::Precondition(format!(
            "grid oracle is limited to N <= 4 and T <= 4, got N = {}, T = {}",
            params.players(),
            params.period()
        )));
    }
    if spec.step < 0.02 - 1e-12 {
        return Err(GameError::Precondition(format!(
            "grid step {} is below 0.02",
            spec.step
        )));
    }
    let resolution = resolution_of(spec.step)?;
    let game = ReducedGame::new(params, state)?;
    let epsilon = spec.epsilon.unwrap_or(spec.step * game.spread() / 4.0);
    let boxes = vec![UnitBox::full(game.actions, resolution); game.players];
    let search = Search::new(&game, resolution, &boxes, spec.cap)?;

    let mut found: Vec<(f64, Vec<Vec<u32>>)> = (0..search.grids[0].len())
        .into_par_iter()
        .flat_map_iter(|first| {
            let mut sink = ThresholdSink {
                epsilon,
                found: Vec::new(),
            };
            search.run(first, &mut sink);
            sink.found
        })
        .collect();
    found.sort_by(|a, b| a.1.cmp(&b.1));

    Ok(GridSearchResult {
        step: spec.step,
        epsilon,
        first_action: game.first,
        equilibria: found
            .into_iter()
            .map(|(gain, units)| GridEquilibrium {
                profile: game.to_profile(&units, resolution),
                max_deviation_gain: gain,
                resolution,
                units,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxSettings {
    /// Initial grid resolution (units per unit of probability).
    pub resolution: u32,
    /// Each round doubles the resolution inside a window around the incumbent.
    pub refine_rounds: u32,
    /// Half-width of the refinement window, in units of the finer grid.
    pub window: u32,
    pub cap: u64,
}

impl Default for ApproxSettings {
    fn default() -> Self {
        ApproxSettings {
            resolution: 10,
            refine_rounds: 4,
            window: 2,
            cap: DEFAULT_GRID_CAP,
        }
    }
}

/// Grid profile with the smallest maximal deviation gain (ties broken
/// lexicographically), refined on successively finer local grids.
pub fn approximate_equilibrium(
    params: &ModelParams,
    state: &State,
    settings: ApproxSettings,
) -> Result<GridEquilibrium, GameError> {
    if settings.resolution == 0 {
        return Err(GameError::Precondition("grid resolution must be positive".into()));
    }
    let game = ReducedGame::new(params, state)?;
    let mut resolution = settings.resolution;
    let mut boxes = vec![UnitBox::full(game.actions, resolution); game.players];
    let mut best = best_on_grid(&game, resolution, &boxes, settings.cap)?;
    for _ in 0..settings.refine_rounds {
        if best.0 == 0.0 {
            break;
        }
        let finer = resolution * 2;
        boxes = best
            .1
            .iter()
            .map(|u| UnitBox::around(u, 2, settings.window, finer))
            .collect();
        let candidate = best_on_grid(&game, finer, &boxes, settings.cap)?;
        resolution = finer;
        best = candidate;
    }
    Ok(GridEquilibrium {
        profile: game.to_profile(&best.1, resolution),
        max_deviation_gain: best.0,
        resolution,
        units: best.1,
    })
}

fn best_on_grid(
    game: &ReducedGame,
    resolution: u32,
    boxes: &[UnitBox],
    cap: u64,
) -> Result<(f64, Vec<Vec<u32>>), GameError> {
    let search = Search::new(game, resolution, boxes, cap)?;
    let shared = AtomicU64::new(f64::INFINITY.to_bits());
    let locals: Vec<(f64, Vec<Vec<u32>>)> = (0..search.grids[0].len())
        .into_par_iter()
        .filter_map(|first| {
            let mut sink = BestSink {
                shared: &shared,
                best: None,
            };
            search.run(first, &mut sink);
            sink.best
        })
        .collect();
    locals
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .ok_or(GameError::NoEquilibrium { resolution })
}
