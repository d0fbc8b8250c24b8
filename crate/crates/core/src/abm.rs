//! Continuous-space SIR agent-based epidemic model on the unit square.
//!
//! Day 0 seeds the initial infections. Each later day runs movement, then
//! transmission, then disease progression. Every random decision is keyed on
//! `(seed, day, agent, purpose)` through counter-based hashing, so the outcome of a
//! contact or a movement does not depend on how many draws were made before
//! it. Nearby parameter vectors therefore share most of their randomness.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{keyed_uniform, DayStream};

const MOVE_DISTANCE: u64 = 1;
const MOVE_HEADING: u64 = 2;
const TRANSMIT: u64 = 3;
const DEATH: u64 = 4;
const PLACE_X: u64 = 5;
const PLACE_Y: u64 = 6;

const MAX_GRID: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub population: usize,
    pub initial_infected: usize,
    pub days: usize,
    /// Significance level of the KS labelling test.
    pub alpha: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            population: 1000,
            initial_infected: 10,
            days: 41,
            alpha: 0.05,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_infected == 0 || self.initial_infected >= self.population {
            return Err(Error::Config(alloc::format!(
                "need 0 < initial_infected ({}) < population ({})",
                self.initial_infected,
                self.population
            )));
        }
        if self.days == 0 {
            return Err(Error::Config("days must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Alpha(self.alpha));
        }
        Ok(())
    }
}

/// Decoded model parameters, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpidemicParams {
    pub transmission: f64,
    pub reinfection: f64,
    pub death: f64,
    pub infection_period: u32,
    pub detection_time: u32,
    pub speed: f64,
    pub radius: f64,
}

impl EpidemicParams {
    pub const DIM: usize = 7;

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        check_dim(Self::DIM, v.len())?;
        let days = |x: f64| libm::round(x).max(0.0) as u32;
        Ok(Self {
            transmission: v[0],
            reinfection: v[1],
            death: v[2],
            infection_period: days(v[3]),
            detection_time: days(v[4]),
            speed: v[5].max(0.0),
            radius: v[6].max(0.0),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HealthState {
    Susceptible,
    Infected,
    Recovered,
    Dead,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agent {
    pub position: [f64; 2],
    pub state: HealthState,
    pub days_infected: u32,
    pub quarantined: bool,
}

impl Agent {
    pub fn susceptible(x: f64, y: f64) -> Self {
        Self {
            position: [x, y],
            state: HealthState::Susceptible,
            days_infected: 0,
            quarantined: false,
        }
    }

    pub fn infected(x: f64, y: f64) -> Self {
        Self {
            state: HealthState::Infected,
            ..Self::susceptible(x, y)
        }
    }

    #[inline]
    fn moves(&self) -> bool {
        self.state != HealthState::Dead && !self.quarantined
    }
}

/// Counts of agents per health state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Census {
    pub susceptible: usize,
    pub infected: usize,
    pub recovered: usize,
    pub dead: usize,
}

impl Census {
    pub fn total(&self) -> usize {
        self.susceptible + self.infected + self.recovered + self.dead
    }
}

/// Daily new-infection counts of one simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpidemicSeries(pub Vec<u64>);

impl EpidemicSeries {
    pub fn new(daily_new_infections: Vec<u64>) -> Self {
        Self(daily_new_infections)
    }

    pub fn days(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

/// The mutable agent population of one run.
#[derive(Debug, Clone)]
pub struct Population {
    agents: Vec<Agent>,
    seed: u64,
    day: u64,
    grid: Grid,
    newly_infected: Vec<bool>,
}

impl Population {
    /// Uniformly placed agents; the first `initial_infected` are infected.
    pub fn seeded(config: &SimulationConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let agents = (0..config.population)
            .map(|i| {
                let x = keyed_uniform(seed, 0, i as u64, PLACE_X);
                let y = keyed_uniform(seed, 0, i as u64, PLACE_Y);
                if i < config.initial_infected {
                    Agent::infected(x, y)
                } else {
                    Agent::susceptible(x, y)
                }
            })
            .collect();
        Ok(Self::from_agents(agents, seed))
    }

    pub fn from_agents(agents: Vec<Agent>, seed: u64) -> Self {
        Self {
            agents,
            seed,
            day: 0,
            grid: Grid::default(),
            newly_infected: Vec::new(),
        }
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn day(&self) -> u64 {
        self.day
    }

    pub fn census(&self) -> Census {
        let mut c = Census::default();
        for a in &self.agents {
            match a.state {
                HealthState::Susceptible => c.susceptible += 1,
                HealthState::Infected => c.infected += 1,
                HealthState::Recovered => c.recovered += 1,
                HealthState::Dead => c.dead += 1,
            }
        }
        c
    }

    /// Advances one day and returns the number of new infections.
    pub fn step(&mut self, params: &EpidemicParams) -> u64 {
        self.day += 1;
        self.move_agents(params.speed);
        let new = self.transmit(params);
        self.progress(params);
        new
    }

    fn move_agents(&mut self, speed: f64) {
        if speed == 0.0 {
            return;
        }
        let draws = DayStream::new(self.seed, self.day);
        for (i, a) in self.agents.iter_mut().enumerate() {
            if !a.moves() {
                continue;
            }
            let r = speed * draws.uniform(i as u64, MOVE_DISTANCE);
            let (cos, sin) = heading(&draws, i as u64);
            a.position[0] = reflect(a.position[0] + r * cos);
            a.position[1] = reflect(a.position[1] + r * sin);
        }
    }

    fn transmit(&mut self, params: &EpidemicParams) -> u64 {
        self.newly_infected.clear();
        self.newly_infected.resize(self.agents.len(), false);
        let beta = params.transmission;
        if beta <= 0.0 || !self.agents.iter().any(|a| a.state == HealthState::Infected) {
            return 0;
        }
        let reinfect = beta * params.reinfection;
        let radius = params.radius;
        let r2 = radius * radius;
        let n = self.agents.len() as u64;
        let draws = DayStream::new(self.seed, self.day);
        self.grid.rebuild(&self.agents, radius);
        let agents = &self.agents;
        let newly = &mut self.newly_infected;
        let mut count = 0;
        for (j, infector) in agents.iter().enumerate() {
            if infector.state != HealthState::Infected {
                continue;
            }
            let pj = infector.position;
            self.grid.for_each_neighbour(pj, |i| {
                let target = &agents[i];
                let p = match target.state {
                    HealthState::Susceptible => beta,
                    HealthState::Recovered => reinfect,
                    _ => return,
                };
                if newly[i] {
                    return;
                }
                let dx = target.position[0] - pj[0];
                let dy = target.position[1] - pj[1];
                // the draw is keyed on the pair, so the outcome is independent of visit order
                if dx * dx + dy * dy <= r2 && draws.uniform(j as u64 * n + i as u64, TRANSMIT) < p {
                    newly[i] = true;
                    count += 1;
                }
            });
        }
        for (a, &hit) in self.agents.iter_mut().zip(self.newly_infected.iter()) {
            if hit {
                a.state = HealthState::Infected;
                a.days_infected = 0;
                a.quarantined = false;
            }
        }
        count
    }

    fn progress(&mut self, params: &EpidemicParams) {
        let draws = DayStream::new(self.seed, self.day);
        for (i, a) in self.agents.iter_mut().enumerate() {
            if a.state != HealthState::Infected || self.newly_infected.get(i) == Some(&true) {
                continue;
            }
            a.days_infected += 1;
            if a.days_infected >= params.infection_period {
                a.state = if draws.uniform(i as u64, DEATH) < params.death {
                    HealthState::Dead
                } else {
                    HealthState::Recovered
                };
                a.days_infected = 0;
                a.quarantined = false;
            } else if a.days_infected >= params.detection_time {
                a.quarantined = true;
            }
        }
    }
}

/// Uniform unit direction.
#[inline]
fn heading(draws: &DayStream, agent: u64) -> (f64, f64) {
    let (sin, cos) = libm::sincos(TAU * draws.uniform(agent, MOVE_HEADING));
    (cos, sin)
}

/// Folds a coordinate back into [0, 1] by reflecting off the walls.
#[inline]
fn reflect(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        return x;
    }
    if (-1.0..0.0).contains(&x) {
        return -x;
    }
    if x > 1.0 && x <= 2.0 {
        return 2.0 - x;
    }
    let mut t = libm::fmod(x, 2.0);
    if t < 0.0 {
        t += 2.0;
    }
    if t > 1.0 {
        2.0 - t
    } else {
        t
    }
}

/// Uniform bucket grid over the unit square with cells at least one radius wide.
#[derive(Debug, Clone, Default)]
struct Grid {
    cells: usize,
    starts: Vec<usize>,
    members: Vec<usize>,
    fill: Vec<usize>,
    keys: Vec<usize>,
}

impl Grid {
    fn cell_of(&self, x: f64) -> usize {
        ((x * self.cells as f64) as usize).min(self.cells - 1)
    }

    fn rebuild(&mut self, agents: &[Agent], radius: f64) {
        self.keys.clear();
        // about one agent per cell is enough; finer grids only cost bookkeeping
        let by_density = (libm::sqrt(agents.len() as f64) as usize).max(1);
        let by_radius = if radius > 0.0 { (1.0 / radius) as usize } else { usize::MAX };
        self.cells = by_radius.min(by_density).clamp(1, MAX_GRID);
        let g = self.cells;
        self.starts.clear();
        self.starts.resize(g * g + 1, 0);
        for a in agents {
            let k = self.cell_of(a.position[1]) * g + self.cell_of(a.position[0]);
            self.keys.push(k);
        }
        for &k in &self.keys {
            self.starts[k + 1] += 1;
        }
        for c in 0..g * g {
            self.starts[c + 1] += self.starts[c];
        }
        self.members.clear();
        self.members.resize(agents.len(), 0);
        self.fill.clear();
        self.fill.extend_from_slice(&self.starts);
        for (i, &k) in self.keys.iter().enumerate() {
            self.members[self.fill[k]] = i;
            self.fill[k] += 1;
        }
    }

    /// Calls `visit` for every agent in the 3x3 block of cells around `p`.
    #[inline]
    fn for_each_neighbour(&self, p: [f64; 2], mut visit: impl FnMut(usize)) {
        let g = self.cells;
        let (cx, cy) = (self.cell_of(p[0]), self.cell_of(p[1]));
        for y in cy.saturating_sub(1)..=(cy + 1).min(g - 1) {
            let row = y * g;
            let lo = self.starts[row + cx.saturating_sub(1)];
            let hi = self.starts[row + (cx + 1).min(g - 1) + 1];
            for &i in &self.members[lo..hi] {
                visit(i);
            }
        }
    }
}

/// Runs the model for `config.days` days and returns the daily new infections.
pub fn simulate(params: &[f64], config: &SimulationConfig, seed: u64) -> Result<EpidemicSeries> {
    let params = EpidemicParams::from_slice(params)?;
    let mut population = Population::seeded(config, seed)?;
    let mut daily = Vec::with_capacity(config.days);
    daily.push(config.initial_infected as u64);
    for _ in 1..config.days {
        daily.push(population.step(&params));
    }
    Ok(EpidemicSeries(daily))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params(beta: f64) -> EpidemicParams {
        EpidemicParams {
            transmission: beta,
            reinfection: 0.0,
            death: 0.0,
            infection_period: 10,
            detection_time: 41,
            speed: 0.0,
            radius: 0.01,
        }
    }

    #[test]
    fn zero_transmission_only_seeds() {
        let cfg = SimulationConfig::default();
        let s = simulate(&[0.0, 0.5, 0.1, 10.0, 5.0, 0.3, 0.02], &cfg, 4).unwrap();
        assert_eq!(s.days(), 41);
        assert_eq!(s.0[0], 10);
        assert!(s.0[1..].iter().all(|&x| x == 0));
    }

    #[test]
    fn no_contact_no_infection() {
        let cfg = SimulationConfig::default();
        let s = simulate(&[1.0, 0.5, 0.1, 10.0, 5.0, 0.0, 0.0], &cfg, 4).unwrap();
        assert!(s.0[1..].iter().all(|&x| x == 0));
    }

    #[test]
    fn deterministic_and_dimension_checked() {
        let cfg = SimulationConfig::default();
        let p = [0.3, 0.2, 0.05, 12.0, 6.0, 0.05, 0.015];
        assert_eq!(simulate(&p, &cfg, 9).unwrap(), simulate(&p, &cfg, 9).unwrap());
        assert!(matches!(simulate(&p[..6], &cfg, 9), Err(Error::Dimension { .. })));
    }

    #[test]
    fn out_of_range_pair_does_not_infect() {
        let mut pop = Population::from_agents(
            vec![Agent::infected(0.1, 0.1), Agent::susceptible(0.5, 0.5)],
            1,
        );
        assert_eq!(pop.step(&params(1.0)), 0);
    }

    #[test]
    fn certain_transmission_at_distance_zero() {
        let mut pop = Population::from_agents(
            vec![Agent::infected(0.3, 0.3), Agent::susceptible(0.3, 0.3)],
            1,
        );
        assert_eq!(pop.step(&params(1.0)), 1);
        assert_eq!(pop.agents()[1].state, HealthState::Infected);
    }

    #[test]
    fn certain_death_at_end_of_period() {
        let mut a = Agent::infected(0.5, 0.5);
        a.days_infected = 10;
        let mut pop = Population::from_agents(vec![a], 1);
        let mut p = params(0.0);
        p.death = 1.0;
        pop.step(&p);
        assert_eq!(pop.agents()[0].state, HealthState::Dead);
        assert_eq!(pop.agents()[0].days_infected, 0);
    }

    #[test]
    fn bernoulli_rate_of_single_contact() {
        let trials = 10_000u64;
        let mut hits = 0;
        for seed in 0..trials {
            let mut pop = Population::from_agents(
                vec![Agent::infected(0.4, 0.4), Agent::susceptible(0.405, 0.4)],
                seed,
            );
            hits += pop.step(&params(0.3));
        }
        let rate = hits as f64 / trials as f64;
        assert!((rate - 0.3).abs() < 0.015, "{rate}");
    }

    #[test]
    fn detection_quarantines_and_freezes() {
        let mut p = params(0.0);
        p.detection_time = 2;
        p.speed = 0.5;
        let mut pop = Population::from_agents(vec![Agent::infected(0.5, 0.5)], 3);
        pop.step(&p);
        assert!(!pop.agents()[0].quarantined);
        pop.step(&p);
        assert!(pop.agents()[0].quarantined);
        let before = pop.agents()[0].position;
        pop.step(&p);
        assert_eq!(pop.agents()[0].position, before);
    }

    #[test]
    fn detection_after_period_never_quarantines() {
        let mut p = params(0.0);
        p.detection_time = 10;
        p.infection_period = 10;
        let mut pop = Population::from_agents(vec![Agent::infected(0.5, 0.5)], 3);
        for _ in 0..12 {
            pop.step(&p);
            assert!(!pop.agents()[0].quarantined);
        }
        assert_eq!(pop.agents()[0].state, HealthState::Recovered);
    }

    #[test]
    fn reinfection_gate() {
        let mut r = Agent::susceptible(0.2, 0.2);
        r.state = HealthState::Recovered;
        let mut p = params(1.0);
        p.reinfection = 0.0;
        let mut pop = Population::from_agents(vec![Agent::infected(0.2, 0.2), r], 5);
        assert_eq!(pop.step(&p), 0);
        p.reinfection = 1.0;
        let mut pop = Population::from_agents(vec![Agent::infected(0.2, 0.2), r], 5);
        assert_eq!(pop.step(&p), 1);
    }

    #[test]
    fn reflection_keeps_unit_interval() {
        for &x in &[-0.3, 1.2, 2.7, -3.9, 0.5, 1.0, 0.0] {
            let r = reflect(x);
            assert!((0.0..=1.0).contains(&r), "{x} -> {r}");
        }
        assert!((reflect(1.2) - 0.8).abs() < 1e-12);
        assert!((reflect(-0.3) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn invalid_config() {
        let mut cfg = SimulationConfig::default();
        cfg.initial_infected = cfg.population;
        assert!(cfg.validate().is_err());
        cfg.initial_infected = 1;
        cfg.days = 0;
        assert!(cfg.validate().is_err());
    }
}
