//! Language-model scorers for the grounded baselines. The defaults are
//! deterministic stand-ins so baseline runs need no live model.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::belief::{belief_scene, HiddenPolicy, OracleMemo};
use super::{Choice, PlanningInput};

/// Usefulness of each candidate for the instruction, in `[0, 1]`.
pub trait LmScorer {
    fn name(&self) -> &str;
    fn score(&mut self, input: &PlanningInput<'_>, choices: &[Choice], texts: &[String]) -> Vec<f64>;
}

/// Next-word probabilities over the candidate-text trie.
pub trait LmTokenScorer {
    fn name(&self) -> &str;
    /// Called once per decision with the full candidate set.
    fn begin(&mut self, input: &PlanningInput<'_>, choices: &[Choice], texts: &[String]);
    /// Probability of each of `options` following `prefix`.
    fn next(&mut self, prefix: &[&str], options: &[&str]) -> Vec<f64>;
}

/// Scores the head of an oracle plan computed on the agent's belief, which
/// assumes unseen goal objects lie on the table: 0.9 for that step, 0.1 for
/// `done` (0.9 when the belief says the task is finished), 0 otherwise.
#[derive(Clone, Debug)]
pub struct BeliefOracleScorer {
    memo: OracleMemo,
    policy: HiddenPolicy,
}

impl Default for BeliefOracleScorer {
    fn default() -> Self {
        BeliefOracleScorer { memo: OracleMemo::default(), policy: HiddenPolicy::OnTable }
    }
}

pub const PREFERRED: f64 = 0.9;
pub const FALLBACK_DONE: f64 = 0.1;

impl LmScorer for BeliefOracleScorer {
    fn name(&self) -> &str {
        "belief-oracle"
    }

    fn score(&mut self, input: &PlanningInput<'_>, choices: &[Choice], _texts: &[String]) -> Vec<f64> {
        let belief = belief_scene(input.observation, input.goal, self.policy);
        let plan = self.memo.solve(&belief, input.goal);
        let head = plan.as_ref().map(|p| p.steps.first().cloned());
        choices
            .iter()
            .map(|c| match (c, &head) {
                (Choice::Done, Some(None)) => PREFERRED,
                (Choice::Done, _) => FALLBACK_DONE,
                (Choice::Step { invocation }, Some(Some(h))) if invocation == h => PREFERRED,
                _ => 0.0,
            })
            .collect()
    }
}

/// Scores looked up by candidate text; anything unlisted gets `default`.
#[derive(Clone, Debug, Default)]
pub struct FixedScorer {
    pub scores: BTreeMap<String, f64>,
    pub default: f64,
}

impl FixedScorer {
    pub fn new(pairs: &[(&str, f64)]) -> Self {
        FixedScorer { scores: pairs.iter().map(|(k, v)| (String::from(*k), *v)).collect(), default: 0.0 }
    }
}

impl LmScorer for FixedScorer {
    fn name(&self) -> &str {
        "fixed"
    }

    fn score(&mut self, _input: &PlanningInput<'_>, _choices: &[Choice], texts: &[String]) -> Vec<f64> {
        texts.iter().map(|t| self.scores.get(t).copied().unwrap_or(self.default)).collect()
    }
}

/// Same score for everything.
#[derive(Clone, Copy, Debug)]
pub struct UniformScorer(pub f64);

impl Default for UniformScorer {
    fn default() -> Self {
        UniformScorer(1.0)
    }
}

impl LmScorer for UniformScorer {
    fn name(&self) -> &str {
        "uniform"
    }

    fn score(&mut self, _input: &PlanningInput<'_>, choices: &[Choice], _texts: &[String]) -> Vec<f64> {
        alloc::vec![self.0; choices.len()]
    }
}

impl LmTokenScorer for UniformScorer {
    fn name(&self) -> &str {
        "uniform"
    }

    fn begin(&mut self, _input: &PlanningInput<'_>, _choices: &[Choice], _texts: &[String]) {}

    fn next(&mut self, _prefix: &[&str], options: &[&str]) -> Vec<f64> {
        alloc::vec![self.0; options.len()]
    }
}

/// Turns a whole-candidate scorer into next-word probabilities: the mass of
/// all candidates through `prefix + word` over the mass through `prefix`.
pub struct TrieMarginalScorer {
    inner: Box<dyn LmScorer>,
    scored: Vec<(Vec<String>, f64)>,
}

impl TrieMarginalScorer {
    pub fn new(inner: Box<dyn LmScorer>) -> Self {
        TrieMarginalScorer { inner, scored: Vec::new() }
    }

    fn mass(&self, prefix: &[&str]) -> f64 {
        self.scored
            .iter()
            .filter(|(toks, _)| toks.len() >= prefix.len() && toks.iter().zip(prefix).all(|(a, b)| a == b))
            .map(|(_, s)| *s)
            .sum()
    }
}

impl LmTokenScorer for TrieMarginalScorer {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn begin(&mut self, input: &PlanningInput<'_>, choices: &[Choice], texts: &[String]) {
        let scores = self.inner.score(input, choices, texts);
        self.scored = texts
            .iter()
            .zip(scores)
            .map(|(t, s)| (t.split_whitespace().map(String::from).collect(), s.max(0.0)))
            .collect();
    }

    fn next(&mut self, prefix: &[&str], options: &[&str]) -> Vec<f64> {
        let total = self.mass(prefix);
        let mut ext: Vec<&str> = prefix.to_vec();
        options
            .iter()
            .map(|o| {
                if total <= 0.0 {
                    return 0.0;
                }
                ext.push(o);
                let m = self.mass(&ext);
                ext.pop();
                m / total
            })
            .collect()
    }
}
