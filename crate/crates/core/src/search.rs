//! Evolutionary layer-wise epitome design under a crossbar budget.
//!
//! Each layer picks one option from its candidate list (including "no
//! epitome"); a combination's reward is the inverse of its latency or
//! energy, gated to zero when it uses more crossbars than the budget
//! allows. Every generation keeps the highest-reward feasible individuals
//! as parents and pairs each with one mutated child.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datapath::analyze_layer;
use crate::epitome::{build_schedule, EpitomeSpec};
use crate::error::{Error, Result};
use crate::mapping::{map_layer, MapPolicy, XbarConfig};
use crate::network::{LayerSpec, NetworkSpec};
use crate::perf::{evaluate_layer, HardwareProfile};

/// Search objective; the reward is its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Latency,
    Energy,
}

/// Per-layer candidate options. `None` keeps the plain convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCandidates {
    pub layer: String,
    pub options: Vec<Option<EpitomeSpec>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub layers: Vec<LayerCandidates>,
}

impl CandidateSet {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Argument("candidate set has no layers".into()));
        }
        for layer in &self.layers {
            if layer.options.is_empty() {
                return Err(Error::Argument(format!(
                    "layer `{}` has no candidate options",
                    layer.layer
                )));
            }
        }
        Ok(())
    }

    pub fn space_size(&self) -> u128 {
        self.layers
            .iter()
            .map(|l| l.options.len() as u128)
            .product()
    }
}

pub const CANDIDATES_SCHEMA_VERSION: u32 = 1;

/// On-disk candidate set schema. Layers must appear in network order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidatesFile {
    pub schema: u32,
    pub layers: Vec<CandidateRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub layer: String,
    pub options: Vec<CandidateOption>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CandidateOption {
    /// Keep the plain convolution.
    None,
    Epitome(crate::network::EpitomeRecord),
}

impl CandidatesFile {
    pub fn resolve(&self, network: &NetworkSpec, xbar: &XbarConfig) -> Result<CandidateSet> {
        if self.schema != CANDIDATES_SCHEMA_VERSION {
            return Err(Error::Argument(format!(
                "unsupported candidates schema version {} (expected {CANDIDATES_SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.layers.len() != network.layers.len() {
            return Err(Error::Argument(format!(
                "candidates file covers {} layers but the network has {}",
                self.layers.len(),
                network.layers.len()
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (record, layer) in self.layers.iter().zip(&network.layers) {
            if record.layer != layer.conv.name {
                return Err(Error::Argument(format!(
                    "candidate list `{}` does not match layer `{}`",
                    record.layer, layer.conv.name
                )));
            }
            let mut options = Vec::with_capacity(record.options.len());
            for option in &record.options {
                options.push(match option {
                    CandidateOption::None => None,
                    CandidateOption::Epitome(e) => {
                        let patch = match &e.patch {
                            Some(p) => crate::epitome::PatchDims {
                                h: p.h,
                                w: p.w,
                                c_in: p.c_in,
                                c_out: p.c_out,
                            },
                            None => {
                                crate::network::default_patch(&layer.conv, e.c_out, e.c_in, xbar)
                            }
                        };
                        let epi = EpitomeSpec {
                            c_out: e.c_out,
                            c_in: e.c_in,
                            h: e.h,
                            w: e.w,
                            patch,
                        };
                        epi.validate_for(&layer.conv)?;
                        Some(epi)
                    }
                });
            }
            layers.push(LayerCandidates {
                layer: record.layer.clone(),
                options,
            });
        }
        let set = CandidateSet { layers };
        set.validate()?;
        Ok(set)
    }

    pub fn from_set(set: &CandidateSet) -> CandidatesFile {
        CandidatesFile {
            schema: CANDIDATES_SCHEMA_VERSION,
            layers: set
                .layers
                .iter()
                .map(|l| CandidateRecord {
                    layer: l.layer.clone(),
                    options: l
                        .options
                        .iter()
                        .map(|o| match o {
                            None => CandidateOption::None,
                            Some(e) => CandidateOption::Epitome(crate::network::EpitomeRecord {
                                c_out: e.c_out,
                                c_in: e.c_in,
                                h: e.h,
                                w: e.w,
                                patch: Some(crate::network::PatchRecord {
                                    h: e.patch.h,
                                    w: e.patch.w,
                                    c_in: e.patch.c_in,
                                    c_out: e.patch.c_out,
                                }),
                            }),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Default candidate list: the plain convolution plus every shape from
/// `shapes` (as `rows x cols` targets) the layer can host.
pub fn default_candidates(
    network: &NetworkSpec,
    xbar: &XbarConfig,
    shapes: &[(usize, usize)],
) -> CandidateSet {
    CandidateSet {
        layers: network
            .layers
            .iter()
            .map(|layer| {
                let mut options: Vec<Option<EpitomeSpec>> = vec![None];
                for &(rows, cols) in shapes {
                    if let Some(epi) =
                        crate::network::uniform_epitome(&layer.conv, rows, cols, xbar)
                    {
                        if !options.contains(&Some(epi.clone())) {
                            options.push(Some(epi));
                        }
                    }
                }
                LayerCandidates {
                    layer: layer.conv.name.clone(),
                    options,
                }
            })
            .collect(),
    }
}

/// Index into each layer's candidate list.
pub type Combination = Vec<usize>;

/// Aggregate metrics of one combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub latency: f64,
    pub energy: f64,
    pub crossbars: u64,
}

impl EvalMetrics {
    pub fn objective(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Latency => self.latency,
            Objective::Energy => self.energy,
        }
    }
}

/// Maps a combination to its metrics. Implementations must be
/// deterministic; evaluations are memoized by combination.
pub trait CombinationEvaluator {
    fn evaluate(&self, combination: &[usize]) -> Result<EvalMetrics>;
}

/// Budget-gated inverse-objective reward: zero when the combination is
/// over budget, `1 / objective` otherwise.
pub fn reward(metrics: &EvalMetrics, objective: Objective, budget: u64) -> Result<f64> {
    if metrics.crossbars > budget {
        return Ok(0.0);
    }
    let value = metrics.objective(objective);
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::Evaluation(format!(
            "objective value {value} is not positive and finite"
        )));
    }
    Ok(1.0 / value)
}

/// Search hyperparameters.
#[derive(Debug, Clone, Serialize)]
pub struct SearchConfig {
    pub population_size: usize,
    pub max_iterations: usize,
    pub parent_count: usize,
    /// Per-layer probability of resetting a child's choice.
    pub mutation_rate: f64,
    pub seed: u64,
    pub objective: Objective,
    pub budget: u64,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.parent_count < 1 || self.population_size < self.parent_count {
            return Err(Error::Argument(
                "population_size >= parent_count >= 1 required".into(),
            ));
        }
        if !(self.mutation_rate > 0.0 && self.mutation_rate <= 1.0) {
            return Err(Error::Argument("mutation_rate must be in (0, 1]".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Argument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Best feasible combination found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResult {
    pub combination: Combination,
    pub metrics: EvalMetrics,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SearchOutcome {
    Feasible(BestResult),
    /// No combination within budget was ever seen.
    Infeasible,
}

/// One history row per generation. Best-so-far fields are zero until the
/// first feasible individual appears.
#[derive(Debug, Clone, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_reward: f64,
    pub best_crossbars: u64,
    pub best_objective: f64,
    pub feasible_count: usize,
}

/// Total order used for parent selection and the best-seen individual:
/// reward descending, then fewer crossbars, then lexicographic
/// combination order. Fixing the tie-break makes runs reproducible.
fn better(a: &BestResult, b: &BestResult) -> bool {
    match a.reward.total_cmp(&b.reward) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => match a.metrics.crossbars.cmp(&b.metrics.crossbars) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => a.combination < b.combination,
        },
    }
}

fn random_combination(rng: &mut ChaCha8Rng, candidates: &CandidateSet) -> Combination {
    candidates
        .layers
        .iter()
        .map(|l| rng.random_range(0..l.options.len()))
        .collect()
}

/// Resets `choice` to a different option of the layer, when one exists.
fn reset_choice(rng: &mut ChaCha8Rng, choice: usize, options: usize) -> usize {
    if options < 2 {
        return choice;
    }
    let other = rng.random_range(0..options - 1);
    if other >= choice {
        other + 1
    } else {
        other
    }
}

/// Each layer is independently reset to another candidate with the given
/// rate; at least one layer is always reset so a child never duplicates
/// its parent.
fn mutate(
    rng: &mut ChaCha8Rng,
    parent: &[usize],
    candidates: &CandidateSet,
    rate: f64,
) -> Combination {
    let mut child: Combination = parent
        .iter()
        .enumerate()
        .map(|(l, &choice)| {
            if rng.random::<f64>() < rate {
                reset_choice(rng, choice, candidates.layers[l].options.len())
            } else {
                choice
            }
        })
        .collect();
    if child == parent {
        let l = rng.random_range(0..child.len());
        child[l] = reset_choice(rng, child[l], candidates.layers[l].options.len());
    }
    child
}

/// Runs the evolutionary search and returns the best feasible combination
/// seen together with the per-generation history. Fully deterministic for
/// a given seed.
pub fn evolve(
    config: &SearchConfig,
    candidates: &CandidateSet,
    evaluator: &dyn CombinationEvaluator,
) -> Result<(SearchOutcome, Vec<GenerationRecord>)> {
    config.validate()?;
    candidates.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut memo: HashMap<Combination, EvalMetrics> = HashMap::new();
    let mut best: Option<BestResult> = None;
    let mut history = Vec::with_capacity(config.max_iterations);

    let mut population: Vec<Combination> = (0..config.population_size)
        .map(|_| random_combination(&mut rng, candidates))
        .collect();

    for generation in 0..config.max_iterations {
        let mut feasible: Vec<BestResult> = Vec::new();
        for combo in &population {
            let metrics = match memo.get(combo) {
                Some(m) => *m,
                None => {
                    let m = evaluator.evaluate(combo)?;
                    memo.insert(combo.clone(), m);
                    m
                }
            };
            if metrics.crossbars > config.budget {
                continue;
            }
            let individual = BestResult {
                combination: combo.clone(),
                metrics,
                reward: reward(&metrics, config.objective, config.budget)?,
            };
            if best.as_ref().is_none_or(|b| better(&individual, b)) {
                best = Some(individual.clone());
            }
            feasible.push(individual);
        }

        history.push(match &best {
            Some(b) => GenerationRecord {
                generation,
                best_reward: b.reward,
                best_crossbars: b.metrics.crossbars,
                best_objective: b.metrics.objective(config.objective),
                feasible_count: feasible.len(),
            },
            None => GenerationRecord {
                generation,
                best_reward: 0.0,
                best_crossbars: 0,
                best_objective: 0.0,
                feasible_count: 0,
            },
        });

        feasible.sort_by(|a, b| {
            if better(a, b) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });
        // duplicate combinations add nothing to an elitist parent set
        feasible.dedup_by(|a, b| a.combination == b.combination);
        feasible.truncate(config.parent_count);
        if feasible.is_empty() {
            // nothing under budget yet: reseed and keep exploring
            population = (0..config.population_size)
                .map(|_| random_combination(&mut rng, candidates))
                .collect();
            continue;
        }
        let mut next = Vec::with_capacity(config.population_size);
        for parent in &feasible {
            next.push(parent.combination.clone());
            next.push(mutate(
                &mut rng,
                &parent.combination,
                candidates,
                config.mutation_rate,
            ));
        }
        // keep the population at full strength with fresh uniform samples
        while next.len() < config.population_size {
            next.push(random_combination(&mut rng, candidates));
        }
        population = next;
    }

    Ok((
        best.map(SearchOutcome::Feasible)
            .unwrap_or(SearchOutcome::Infeasible),
        history,
    ))
}

pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 1_000_000;

/// Enumerates the whole candidate space and returns the true optimum under
/// the same ordering as `evolve`. Refuses spaces larger than `cap`.
pub fn exhaustive_best(
    candidates: &CandidateSet,
    evaluator: &dyn CombinationEvaluator,
    objective: Objective,
    budget: u64,
    cap: u128,
) -> Result<SearchOutcome> {
    candidates.validate()?;
    let size = candidates.space_size();
    if size > cap {
        return Err(Error::SpaceTooLarge { size, cap });
    }

    let mut best: Option<BestResult> = None;
    let mut combo: Combination = vec![0; candidates.layers.len()];
    loop {
        let metrics = evaluator.evaluate(&combo)?;
        if metrics.crossbars <= budget {
            let individual = BestResult {
                combination: combo.clone(),
                metrics,
                reward: reward(&metrics, objective, budget)?,
            };
            if best.as_ref().is_none_or(|b| better(&individual, b)) {
                best = Some(individual);
            }
        }
        // odometer increment in lexicographic order
        let mut done = true;
        for l in (0..combo.len()).rev() {
            combo[l] += 1;
            if combo[l] < candidates.layers[l].options.len() {
                done = false;
                break;
            }
            combo[l] = 0;
        }
        if done {
            break;
        }
    }
    Ok(best
        .map(SearchOutcome::Feasible)
        .unwrap_or(SearchOutcome::Infeasible))
}

/// Evaluator backed by the full mapping/trace/cost pipeline with analytic
/// traces. Per-layer candidate costs are computed once up front, so a
/// combination evaluates as a sum.
pub struct PipelineEvaluator {
    per_layer: Vec<Vec<EvalMetrics>>,
}

impl PipelineEvaluator {
    pub fn new(
        network: &NetworkSpec,
        candidates: &CandidateSet,
        xbar: &XbarConfig,
        policy: &MapPolicy,
        profile: &HardwareProfile,
        wrap: bool,
    ) -> Result<Self> {
        candidates.validate()?;
        if candidates.layers.len() != network.layers.len() {
            return Err(Error::Argument(format!(
                "candidate set covers {} layers but the network has {}",
                candidates.layers.len(),
                network.layers.len()
            )));
        }
        let mut per_layer = Vec::with_capacity(network.layers.len());
        for (layer, cands) in network.layers.iter().zip(&candidates.layers) {
            if cands.layer != layer.conv.name {
                return Err(Error::Argument(format!(
                    "candidate list `{}` does not match layer `{}`",
                    cands.layer, layer.conv.name
                )));
            }
            let mut options = Vec::with_capacity(cands.options.len());
            for option in &cands.options {
                let candidate_layer = LayerSpec {
                    conv: layer.conv.clone(),
                    epitome: option.clone(),
                    wrap: layer.wrap,
                };
                let mapping = map_layer(&candidate_layer, xbar, policy)?;
                let schedule = build_schedule(&layer.conv, &candidate_layer.deployed_epitome())?;
                let trace = analyze_layer(&schedule, &mapping, wrap || layer.wrap)?;
                let perf = evaluate_layer(&layer.conv.name, &trace, &mapping, profile)?;
                options.push(EvalMetrics {
                    latency: perf.latency,
                    energy: perf.energy,
                    crossbars: mapping.crossbars(),
                });
            }
            per_layer.push(options);
        }
        Ok(PipelineEvaluator { per_layer })
    }
}

impl CombinationEvaluator for PipelineEvaluator {
    fn evaluate(&self, combination: &[usize]) -> Result<EvalMetrics> {
        if combination.len() != self.per_layer.len() {
            return Err(Error::Argument(format!(
                "combination length {} does not match {} layers",
                combination.len(),
                self.per_layer.len()
            )));
        }
        let mut total = EvalMetrics {
            latency: 0.0,
            energy: 0.0,
            crossbars: 0,
        };
        for (layer, &choice) in self.per_layer.iter().zip(combination) {
            let m = layer
                .get(choice)
                .ok_or_else(|| Error::Argument(format!("candidate index {choice} out of range")))?;
            total.latency += m.latency;
            total.energy += m.energy;
            total.crossbars += m.crossbars;
        }
        Ok(total)
    }
}

/// Evaluator over a fixed metrics table, used by tests and fuzzing.
pub struct TableEvaluator {
    pub per_layer: Vec<Vec<EvalMetrics>>,
}

impl CombinationEvaluator for TableEvaluator {
    fn evaluate(&self, combination: &[usize]) -> Result<EvalMetrics> {
        let mut total = EvalMetrics {
            latency: 0.0,
            energy: 0.0,
            crossbars: 0,
        };
        for (layer, &choice) in self.per_layer.iter().zip(combination) {
            let m = layer[choice];
            total.latency += m.latency;
            total.energy += m.energy;
            total.crossbars += m.crossbars;
        }
        Ok(total)
    }
}
