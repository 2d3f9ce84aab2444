//! Word-level beam search over the candidate-text trie, fusing next-word
//! probabilities with prefix grounding.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::affordance::Affordance;

use super::candidates::{candidate_text, enumerate_candidates_with};
use super::scorers::LmTokenScorer;
use super::{vocabulary, CandidateScore, DecisionFailure, Planner, PlannerDecision, PlanningInput};

pub const DEFAULT_BEAM_WIDTH: usize = 4;

pub struct GdPlanner {
    scorer: Box<dyn LmTokenScorer>,
    affordance: Box<dyn Affordance>,
    beam_width: usize,
    name: String,
}

impl GdPlanner {
    pub fn new(scorer: Box<dyn LmTokenScorer>, affordance: Box<dyn Affordance>, beam_width: usize) -> Self {
        let name = alloc::format!("gd/{}/{}", scorer.name(), affordance.name());
        GdPlanner { scorer, affordance, beam_width: beam_width.max(1), name }
    }
}

#[derive(Clone)]
struct Beam {
    len: usize,
    /// Any candidate whose text starts with this beam's words.
    witness: usize,
    lm: f64,
    score: f64,
    /// Candidate whose full text this beam spells, if any.
    complete: Option<usize>,
}

struct Trie<'t> {
    tokens: &'t [Vec<&'t str>],
    aff: &'t [f64],
}

impl<'t> Trie<'t> {
    fn through(&self, prefix: &[&str]) -> Vec<usize> {
        (0..self.tokens.len())
            .filter(|&k| self.tokens[k].len() >= prefix.len() && self.tokens[k][..prefix.len()] == prefix[..])
            .collect()
    }

    /// Prefix grounding: the best affordance among completions.
    fn grounding(&self, prefix: &[&str]) -> f64 {
        self.through(prefix).into_iter().map(|k| self.aff[k]).fold(0.0, f64::max)
    }

    /// Next words after `prefix`, in order of first appearance.
    fn children(&self, prefix: &[&str]) -> Vec<(&'t str, usize)> {
        let mut out: Vec<(&str, usize)> = Vec::new();
        for k in self.through(prefix) {
            if let Some(w) = self.tokens[k].get(prefix.len()) {
                if !out.iter().any(|(x, _)| x == w) {
                    out.push((w, k));
                }
            }
        }
        out
    }

    fn exact(&self, prefix: &[&str]) -> Option<usize> {
        (0..self.tokens.len()).find(|&k| self.tokens[k][..] == prefix[..])
    }
}

impl Planner for GdPlanner {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, input: &PlanningInput<'_>) -> PlannerDecision {
        let choices = enumerate_candidates_with(input.observation, &input.goal.relevant);
        let vocab = vocabulary(input);
        let texts: Vec<String> = choices.iter().map(|c| candidate_text(c, &vocab)).collect();
        let tokens: Vec<Vec<&str>> = texts.iter().map(|t| t.split_whitespace().collect()).collect();
        let aff: Vec<f64> = choices.iter().map(|c| self.affordance.score(input.world, c)).collect();
        let trie = Trie { tokens: &tokens, aff: &aff };
        self.scorer.begin(input, &choices, &texts);

        let mut beams = alloc::vec![Beam { len: 0, witness: 0, lm: 1.0, score: 1.0, complete: None }];
        let mut best: Option<(usize, f64)> = None;
        while !beams.is_empty() && !tokens.is_empty() {
            let mut pool: Vec<Beam> = Vec::new();
            for b in &beams {
                let prefix = &tokens[b.witness][..b.len];
                let kids = trie.children(prefix);
                if kids.is_empty() {
                    continue;
                }
                let words: Vec<&str> = kids.iter().map(|(w, _)| *w).collect();
                let probs = self.scorer.next(prefix, &words);
                for ((w, witness), p) in kids.iter().zip(probs) {
                    let mut ext = prefix.to_vec();
                    ext.push(w);
                    let lm = b.lm * p;
                    let complete = trie.exact(&ext);
                    let ground = trie.grounding(&ext);
                    let score = lm * ground;
                    if score > 0.0 {
                        pool.push(Beam { len: ext.len(), witness: *witness, lm, score, complete });
                    }
                }
            }
            // Stable sort keeps trie order among equal scores.
            pool.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(core::cmp::Ordering::Equal));
            pool.truncate(self.beam_width);
            for b in &pool {
                if let Some(k) = b.complete {
                    let full = b.lm * aff[k];
                    let better = match best {
                        None => full > 0.0,
                        Some((bk, bs)) => full > bs || (full == bs && k < bk),
                    };
                    if better {
                        best = Some((k, full));
                    }
                }
            }
            // Beams that spell a candidate and extend no further are finished.
            beams = pool.into_iter().filter(|b| !trie.children(&tokens[b.witness][..b.len]).is_empty()).collect();
        }

        let mut scores = Vec::with_capacity(choices.len());
        for (k, c) in choices.iter().enumerate() {
            let mut lm = 1.0;
            for i in 0..tokens[k].len() {
                let prefix = &tokens[k][..i];
                lm *= self.scorer.next(prefix, &tokens[k][i..=i])[0];
            }
            scores.push(CandidateScore {
                choice: c.clone(),
                text: texts[k].clone(),
                lm_score: lm,
                affordance: aff[k],
                product: lm * aff[k],
            });
        }
        let mut d = match best {
            Some((k, _)) => PlannerDecision::chose(choices[k].clone()),
            None => PlannerDecision::failed(DecisionFailure::NoFeasibleAction),
        };
        d.candidate_scores = Some(scores);
        d
    }
}
