//! Property batteries behind `stopkit check`. Each case is one seeded
//! instance (per epsilon where the suite sweeps several) and reports the
//! measured quantity next to the bound it must respect.

use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{round_probs_down, round_values_down};
use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::generate::{
    counterexample_pair, generate, random_bundling_instance, random_high_value_instance, random_instance,
    random_repeated_instance, Family, GenParams,
};
use crate::grouped::{group_by_identical_distribution, solve_grouped, state_count_check, Group, GroupedInstance};
use crate::model::{Instance, SchemeConfig};
use crate::preprocess::{bundle_above_one, rescale_high_values};
use crate::ptas::solve_ptas;
use crate::simulate::check_error_propagation;

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    ValuePerturb,
    ProbPerturb,
    Bundling,
    HighValue,
    ErrorProp,
    GameChain,
    GroupingSoundness,
    Counterexample,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::ValuePerturb,
        Suite::ProbPerturb,
        Suite::Bundling,
        Suite::HighValue,
        Suite::ErrorProp,
        Suite::GameChain,
        Suite::GroupingSoundness,
        Suite::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ValuePerturb => "lemma-value-perturb",
            Suite::ProbPerturb => "lemma-prob-perturb",
            Suite::Bundling => "claim-bundling",
            Suite::HighValue => "claim-high-value",
            Suite::ErrorProp => "lemma-error-prop",
            Suite::GameChain => "game-chain",
            Suite::GroupingSoundness => "grouping-soundness",
            Suite::Counterexample => "counterexample",
        }
    }

    /// Seeds run when the caller gives none.
    pub fn default_seeds(self) -> Range<u64> {
        match self {
            Suite::ErrorProp | Suite::GameChain => 0..50,
            Suite::HighValue => 0..100,
            Suite::Counterexample => 0..1,
            _ => 0..200,
        }
    }

    pub fn default_epsilons(self) -> Vec<f64> {
        match self {
            Suite::ValuePerturb | Suite::ProbPerturb => vec![0.1, 0.3],
            Suite::HighValue => vec![0.3],
            Suite::ErrorProp => vec![0.0, 0.1],
            Suite::GameChain => vec![0.25],
            _ => vec![],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub seeds: Range<u64>,
    pub epsilons: Vec<f64>,
    /// Monte-Carlo trials for the simulation suites.
    pub trials: u64,
}

impl CheckOptions {
    pub fn for_suite(suite: Suite) -> Self {
        let trials = match suite {
            Suite::GameChain => 20_000,
            _ => 100_000,
        };
        Self { seeds: suite.default_seeds(), epsilons: suite.default_epsilons(), trials }
    }
}

/// One measured quantity against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct Case {
    pub seed: u64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub quantity: String,
    pub value: f64,
    /// `value` must be at least this (`>=`), at most (`<=`) or within
    /// tolerance of it (`==`).
    pub relation: &'static str,
    pub bound: f64,
    pub pass: bool,
}

impl Case {
    fn build(seed: u64, n: usize, epsilon: Option<f64>, quantity: impl Into<String>) -> CaseBuilder {
        CaseBuilder(Case {
            seed,
            n,
            epsilon,
            quantity: quantity.into(),
            value: 0.0,
            relation: "",
            bound: 0.0,
            pass: false,
        })
    }
}

struct CaseBuilder(Case);

impl CaseBuilder {
    fn at_least(mut self, value: f64, bound: f64) -> Case {
        self.0.value = value;
        self.0.bound = bound;
        self.0.relation = ">=";
        self.0.pass = value >= bound;
        self.0
    }

    fn at_most(mut self, value: f64, bound: f64) -> Case {
        self.0.value = value;
        self.0.bound = bound;
        self.0.relation = "<=";
        self.0.pass = value <= bound;
        self.0
    }

    fn holds(mut self, ok: bool) -> Case {
        self.0.value = if ok { 1.0 } else { 0.0 };
        self.0.bound = 1.0;
        self.0.relation = "==";
        self.0.pass = ok;
        self.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seeds: [u64; 2],
    pub epsilons: Vec<f64>,
    pub trials: u64,
    pub cases: Vec<Case>,
    pub failures: usize,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Swarm size used by the game-chain battery for a seed: a multiple of 4 in
/// `[8, 200]`, so desk-profile blocks hold exactly their share of each class.
pub fn swarm_size(seed: u64) -> usize {
    8 + 4 * ((seed * 7) % 49) as usize
}

fn size(seed: u64, lo: usize, hi: usize) -> usize {
    lo + (seed as usize * 7919 + 13) % (hi - lo + 1)
}

fn per_seed<F>(opts: &CheckOptions, f: F) -> Result<Vec<Case>>
where
    F: Fn(u64) -> Result<Vec<Case>> + Sync,
{
    let seeds: Vec<u64> = opts.seeds.clone().collect();
    let nested: Vec<Vec<Case>> = seeds.par_iter().map(|&s| f(s)).collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

fn perturb_cases(opts: &CheckOptions, values: bool) -> Result<Vec<Case>> {
    per_seed(opts, |seed| {
        let inst = random_instance(size(seed, 1, 8), 3, seed)?;
        let opt = solve_exact(&inst)?.value;
        let mut out = Vec::new();
        for &eps in &opts.epsilons {
            let once = if values { round_values_down(&inst, eps) } else { round_probs_down(&inst, eps) };
            let both = round_probs_down(&round_values_down(&inst, eps), eps);
            let r1 = solve_exact(&once)?.value / opt;
            let r2 = solve_exact(&both)?.value / opt;
            let what = if values { "values" } else { "probs" };
            out.push(
                Case::build(seed, inst.n(), Some(eps), format!("ratio after rounding {what}"))
                    .at_least(r1, 1.0 / (1.0 + eps) - TOL),
            );
            out.push(
                Case::build(seed, inst.n(), Some(eps), "ratio after rounding both")
                    .at_least(r2, 1.0 / ((1.0 + eps) * (1.0 + eps)) - TOL),
            );
        }
        Ok(out)
    })
}

fn bundling_cases(opts: &CheckOptions) -> Result<Vec<Case>> {
    per_seed(opts, |seed| {
        let inst = random_bundling_instance(size(seed, 1, 8), seed)?;
        let (after, _) = bundle_above_one(&inst);
        let diff = (solve_exact(&inst)?.value - solve_exact(&after)?.value).abs();
        Ok(vec![Case::build(seed, inst.n(), None, "|OPT before - OPT after|").at_most(diff, TOL)])
    })
}

fn high_value_cases(opts: &CheckOptions) -> Result<Vec<Case>> {
    per_seed(opts, |seed| {
        let mut out = Vec::new();
        for &eps in &opts.epsilons {
            let inst = random_high_value_instance(size(seed, 2, 8), eps, seed)?;
            let (after, _) = rescale_high_values(&inst, eps)?;
            let x = solve_exact(&inst)?.value;
            let y = solve_exact(&after)?.value;
            out.push(Case::build(seed, inst.n(), Some(eps), "OPT(Y) - OPT(X)").at_least(y - x, -TOL));
            out.push(
                Case::build(seed, inst.n(), Some(eps), "OPT(Y) / OPT(X)").at_most(y / x, 1.0 + eps * eps + TOL / x),
            );
        }
        Ok(out)
    })
}

fn error_prop_cases(opts: &CheckOptions) -> Result<Vec<Case>> {
    // The simulations parallelize internally; seeds run in order.
    let mut out = Vec::new();
    for seed in opts.seeds.clone() {
        let inst = random_instance(size(seed, 1, 8), 3, seed)?;
        for &eps in &opts.epsilons {
            let r = check_error_propagation(&inst, eps, opts.trials, seed)?;
            for (name, sim) in [("floor oracle mean", r.floor), ("jittered oracle mean", r.jitter)] {
                out.push(
                    Case::build(seed, inst.n(), Some(eps), name).at_least(sim.mean, r.bound - 3.0 * sim.stderr - TOL),
                );
            }
        }
    }
    Ok(out)
}

fn chain_cases(opts: &CheckOptions, notes: &mut Vec<String>) -> Result<Vec<Case>> {
    let mut out = Vec::new();
    for seed in opts.seeds.clone() {
        let n = swarm_size(seed);
        let inst = generate(Family::SmallProbSwarm, n, seed, &GenParams::default())?;
        for &eps in &opts.epsilons {
            let config = SchemeConfig::desk(eps)?;
            let rep = solve_ptas(&inst, &config)?.game_chain(opts.trials, seed)?;
            if notes.is_empty() {
                notes.push(rep.profile_note.clone());
            }
            for c in rep.checks {
                out.push(Case::build(seed, n, Some(eps), c.name).at_most(c.lhs, c.rhs + c.margin));
            }
        }
    }
    Ok(out)
}

fn grouping_cases(opts: &CheckOptions) -> Result<Vec<Case>> {
    per_seed(opts, |seed| {
        let n = size(seed, 1, 12);
        let inst = random_repeated_instance(n, 1 + seed as usize % 4, 3, seed)?;
        let exact = solve_exact(&inst)?.value;
        let grouped = group_by_identical_distribution(&inst);
        let singletons = GroupedInstance::from_groups_unchecked(
            inst.variables.iter().map(|v| Group { representative: v.clone(), count: 1 }).collect(),
        );
        let g = solve_grouped(&grouped)?.value;
        let s = solve_grouped(&singletons)?.value;
        Ok(vec![
            Case::build(seed, n, None, "|grouped - exact|").at_most((g - exact).abs(), TOL),
            Case::build(seed, n, None, "|singleton groups - exact|").at_most((s - exact).abs(), TOL),
            Case::build(seed, n, None, "state count within bound").holds(state_count_check(&grouped).holds),
        ])
    })
}

fn counterexample_cases() -> Result<Vec<Case>> {
    let (a, b) = counterexample_pair();
    let half = crate::model::DiscreteDistribution::point(0.5);
    let mut out = Vec::new();
    for (name, x, expect) in [("X_A", &a, 0.625), ("X_B", &b, 0.5625)] {
        let dp = solve_exact(&Instance::new(vec![x.clone(), half.clone()])?)?;
        let theta = dp.threshold_at(crate::exact::SubsetKey::from_indices(&[1]))?;
        let v = x.expected_max_against(theta);
        out.push(
            Case::build(0, 2, None, format!("|E[max({name}, 1/2)] - {expect}|")).at_most((v - expect).abs(), 1e-12),
        );
    }
    let var = |d: &crate::model::DiscreteDistribution| {
        let m = d.mean();
        d.atoms().iter().map(|p| p.prob * (p.value - m) * (p.value - m)).sum::<f64>()
    };
    let same_moments = (a.mean() - b.mean()).abs() < 1e-12 && (var(&a) - var(&b)).abs() < 1e-12;
    out.push(Case::build(0, 2, None, "equal mean and variance").holds(same_moments));
    let gap = a.expected_max_against(0.5) - b.expected_max_against(0.5);
    out.push(Case::build(0, 2, None, "continuation gap a moment grouping cannot see").at_least(gap, 0.0625 - 1e-12));
    Ok(out)
}

pub fn run_suite(suite: Suite, opts: &CheckOptions) -> Result<SuiteReport> {
    if opts.seeds.is_empty() {
        return Err(Error::InvalidArgument("empty seed range".into()));
    }
    let mut notes = Vec::new();
    let cases = match suite {
        Suite::ValuePerturb => perturb_cases(opts, true)?,
        Suite::ProbPerturb => perturb_cases(opts, false)?,
        Suite::Bundling => bundling_cases(opts)?,
        Suite::HighValue => high_value_cases(opts)?,
        Suite::ErrorProp => error_prop_cases(opts)?,
        Suite::GameChain => chain_cases(opts, &mut notes)?,
        Suite::GroupingSoundness => grouping_cases(opts)?,
        Suite::Counterexample => counterexample_cases()?,
    };
    let failures = cases.iter().filter(|c| !c.pass).count();
    Ok(SuiteReport {
        suite,
        seeds: [opts.seeds.start, opts.seeds.end],
        epsilons: opts.epsilons.clone(),
        trials: opts.trials,
        pass: failures == 0,
        failures,
        cases,
        notes,
    })
}
