//! Wiring a resolved config into policies, environments and replicates.

use anyhow::{bail, Context};
use banlin_core::env::{regret_report, run_trajectory, Policy, RegretReport, Trajectory, TrajectorySummary};
use banlin_core::exp2::{cross_polytope, hypercube_corners, ExpertsGame, ExpertsParams};
use banlin_core::prelude::*;
use banlin_core::{exp2, hypercube};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ActionSpec, AdversarySpec, ExperimentConfig, Setting};
use crate::io::{read_points, Row};

/// Stream used for drawing `random` action sets; replicates use streams
/// `2r` and `2r + 1`.
pub const ACTION_SET_STREAM: u64 = u64::MAX;

/// Largest per-round estimator range against the bound the analysis needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeStats {
    pub max: f64,
    pub bound: f64,
    pub exceedances: usize,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: usize,
    pub rows: Vec<Row>,
    pub summary: TrajectorySummary,
    pub range: Option<RangeStats>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub theorem: TheoremBound,
    pub runs: Vec<SeedRun>,
    pub regret: RegretReport,
}

impl Experiment {
    pub fn range(&self) -> Option<RangeStats> {
        let mut it = self.runs.iter().filter_map(|r| r.range);
        let first = it.next()?;
        Some(it.fold(first, |acc, r| RangeStats {
            max: acc.max.max(r.max),
            bound: acc.bound,
            exceedances: acc.exceedances + r.exceedances,
        }))
    }
}

enum Player {
    Exp2(Box<Exp2State>),
    Hypercube,
    Ball { project: bool },
    Experts(ExpertsGame),
}

/// Everything shared by the replicates of one experiment.
pub struct Setup {
    pub env: Environment,
    pub theorem: TheoremBound,
    player: Player,
    tuning: Tuning,
    strict: bool,
    n: usize,
    seed: u64,
}

/// `n` points uniform on the unit sphere.
pub fn random_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ACTION_SET_STREAM);
    (0..n)
        .map(|_| loop {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > 1e-3 && r <= 1.0 {
                break x.iter().map(|v| v / r).collect();
            }
        })
        .collect()
}

pub fn action_points(spec: &ActionSpec, d: usize, n_points: usize, seed: u64) -> anyhow::Result<Vec<Vec<f64>>> {
    let pts = match spec {
        ActionSpec::CrossPolytope => cross_polytope(d),
        ActionSpec::Corners => hypercube_corners(d),
        ActionSpec::Random => random_points(n_points, d, seed),
        ActionSpec::File(p) => read_points(p)?,
    };
    if let Some(p) = pts.iter().find(|p| p.len() != d) {
        bail!("action set has points of dimension {}, expected d = {d}", p.len());
    }
    Ok(pts)
}

pub fn adversary(spec: &AdversarySpec, d: usize, n: usize) -> anyhow::Result<Adversary> {
    Ok(match spec {
        AdversarySpec::Zero => Adversary::Fixed(vec![0.0; d]),
        AdversarySpec::Fixed(None) => {
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            Adversary::Fixed(e)
        }
        AdversarySpec::Fixed(Some(z)) => Adversary::Fixed(z.clone()),
        AdversarySpec::IidL1Vertex => Adversary::IidL1Vertex,
        AdversarySpec::IidSphere => Adversary::IidSphere,
        AdversarySpec::Rotating(p) => Adversary::Rotating { period: *p },
        AdversarySpec::AdaptiveWorst => Adversary::AdaptiveWorst,
        AdversarySpec::File(p) => {
            let rows = read_points(p)?;
            if rows[0].len() != d {
                bail!("{}: loss vectors have {} coordinates, expected d = {d}", p.display(), rows[0].len());
            }
            if rows.len() < n {
                bail!("{}: {} loss vectors for a horizon of n = {n}", p.display(), rows.len());
            }
            Adversary::Sequence(rows)
        }
    })
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        let d = cfg.d;
        let tuning = cfg.tuning();
        let adv = adversary(&cfg.adversary, d, cfg.n)?;
        let (action_set, player, theorem) = match cfg.setting {
            Setting::Finite | Setting::Experts => {
                let spec = cfg.actions.clone().unwrap_or(ActionSpec::CrossPolytope);
                let big_n = cfg.big_n.unwrap_or(2 * d);
                let pts = action_points(&spec, d, big_n, cfg.seed)?;
                if cfg.setting == Setting::Finite {
                    let state = Exp2State::john(&pts, tuning).context("John's exploration for the action set")?;
                    let theorem = TheoremBound::Exp2John { n: cfg.n, d: state.dim(), actions: state.len() };
                    (ActionSet::Finite(pts), Player::Exp2(Box::new(state)), theorem)
                } else {
                    let game = ExpertsGame { base: pts.clone(), experts: big_n, context_size: cfg.context.unwrap_or(d) };
                    let theorem = TheoremBound::Exp2John { n: cfg.n, d, actions: big_n };
                    (ActionSet::Finite(pts), Player::Experts(game), theorem)
                }
            }
            Setting::Hypercube => (ActionSet::Hypercube(d), Player::Hypercube, TheoremBound::Hypercube { n: cfg.n, d }),
            Setting::Ball => (
                ActionSet::Ball(d),
                Player::Ball { project: cfg.project.unwrap_or(false) },
                TheoremBound::Ball { n: cfg.n, d },
            ),
        };
        let env = Environment::new(action_set, adv);
        env.validate_sequence()?;
        Ok(Self { env, theorem, player, tuning, strict: cfg.strict, n: cfg.n, seed: cfg.seed })
    }

    pub fn run_seed(&self, seed: usize) -> anyhow::Result<SeedRun> {
        let r = seed as u64;
        let (tr, range) = match &self.player {
            Player::Exp2(state) => {
                let mut p = Exp2Policy::new((**state).clone()).enforce_range(self.strict);
                let tr = self.play(&mut p, r)?;
                (tr, Some(RangeStats { max: p.max_range(), bound: exp2::RANGE_BOUND, exceedances: p.range_exceedances() }))
            }
            Player::Hypercube => {
                let mut p = HypercubePolicy::new(self.env.dim(), self.tuning)?.enforce_range(self.strict);
                let tr = self.play(&mut p, r)?;
                let stats = RangeStats { max: p.max_range(), bound: hypercube::RANGE_BOUND, exceedances: p.range_exceedances() };
                (tr, Some(stats))
            }
            Player::Ball { project } => {
                let d = self.env.dim();
                let mut p = BallPolicy::new(d, self.tuning)?.project(*project).enforce_range(self.strict);
                let tr = self.play(&mut p, r)?;
                let bound = self.tuning.eta * d as f64;
                (tr, Some(RangeStats { max: p.max_range(), bound, exceedances: p.range_exceedances() }))
            }
            Player::Experts(game) => {
                let params = ExpertsParams { tuning: self.tuning, enforce_range: self.strict };
                let tr = game.run(&self.env, params, self.n, self.seed, r).with_context(|| format!("seed {seed}"))?;
                (tr, None)
            }
        };
        let rows = tr
            .records
            .iter()
            .map(|rec| Row {
                t: rec.t,
                exploration: rec.exploration,
                loss: rec.loss,
                cum_loss: rec.cum_loss,
                cum_regret: rec.cum_regret,
            })
            .collect();
        Ok(SeedRun { seed, rows, summary: tr.summary, range })
    }

    fn play<P: Policy>(&self, p: &mut P, r: u64) -> anyhow::Result<Trajectory> {
        run_trajectory(p, &self.env, self.n, self.seed, r).with_context(|| format!("seed {r}"))
    }
}

/// Runs every replicate on a pool of `jobs` threads; results are in seed order.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> anyhow::Result<Experiment> {
    let setup = Setup::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let runs: Vec<SeedRun> =
        pool.install(|| (0..cfg.seeds).into_par_iter().map(|s| setup.run_seed(s)).collect::<anyhow::Result<_>>())?;
    let summaries: Vec<TrajectorySummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let regret = regret_report(&summaries, setup.theorem.value())?;
    Ok(Experiment { theorem: setup.theorem, runs, regret })
}
