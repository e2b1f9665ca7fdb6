// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic token-id prompt families with minimal corruptions.
//!
//! Vocabulary layout: ids `0..4` are markers (0 = query, 1 = copy), the next
//! quarter of the remaining ids are "names" and the rest are fillers.
//!
//! | family           | clean prompt             | target |
//! |------------------|--------------------------|--------|
//! | `binding-task`   | `A B f … f B Q`          | `A`    |
//! | `copy-task`      | `A f … f M`              | `A`    |
//! | `induction-like` | `A B f … f A`            | `B`    |
//!
//! Binding-task corruptions:
//!
//! - `swap-one`: first-sentence name `A` replaced by a fresh name `C`
//!   (`C B … B Q`).
//! - `swap-both`: the two name roles exchanged everywhere (`B A … A Q`).
//! - `swap-subject`: the second subject replaced by `A` (`A B … A Q`).
//!
//! `swap-both` and `swap-subject` both contain the target twice and the
//! distractor `B` once, so their surface features are identically
//! distributed; `swap-one` differs in both counts.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{rng_for, tag};
use crate::tensor::SurfaceMeta;

pub const QUERY_TOKEN: usize = 0;
pub const COPY_TOKEN: usize = 1;
const N_MARKERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptFamily {
    CopyTask,
    BindingTask,
    InductionLike,
}

impl PromptFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CopyTask => "copy-task",
            Self::BindingTask => "binding-task",
            Self::InductionLike => "induction-like",
        }
    }

    pub fn corruptions(self) -> &'static [Corruption] {
        use Corruption::*;
        match self {
            Self::CopyTask => &[Identity, TokenSwap],
            Self::BindingTask => &[Identity, SwapOne, SwapBoth, SwapSubject],
            Self::InductionLike => &[Identity, TokenSwap, PrefixSwap],
        }
    }

    fn min_tokens(self) -> usize {
        match self {
            Self::CopyTask => 2,
            Self::BindingTask => 5,
            Self::InductionLike => 4,
        }
    }
}

impl fmt::Display for PromptFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copy-task" => Ok(Self::CopyTask),
            "binding-task" | "ioi" => Ok(Self::BindingTask),
            "induction-like" | "induction" => Ok(Self::InductionLike),
            other => Err(invalid(format!("unknown prompt family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corruption {
    /// Debug corruption: corrupted prompt equals the clean one.
    Identity,
    SwapOne,
    SwapBoth,
    SwapSubject,
    TokenSwap,
    PrefixSwap,
}

impl Corruption {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::SwapOne => "swap-one",
            Self::SwapBoth => "swap-both",
            Self::SwapSubject => "swap-subject",
            Self::TokenSwap => "token-swap",
            Self::PrefixSwap => "prefix-swap",
        }
    }
}

impl fmt::Display for Corruption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Corruption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "swap-one" | "name-swap" => Ok(Self::SwapOne),
            "swap-both" | "abba" => Ok(Self::SwapBoth),
            "swap-subject" | "second-subject-swap" => Ok(Self::SwapSubject),
            "token-swap" => Ok(Self::TokenSwap),
            "prefix-swap" => Ok(Self::PrefixSwap),
            other => Err(invalid(format!("unknown corruption {other:?}"))),
        }
    }
}

/// Clean/corrupted prompt pair with its target token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub clean: Vec<usize>,
    pub corrupted: Vec<usize>,
    pub target: usize,
    /// The family's competing token (the other name, or the replacement).
    pub distractor: usize,
    pub meta: SurfaceMeta,
}

impl PromptPair {
    pub fn new(clean: Vec<usize>, corrupted: Vec<usize>, target: usize, distractor: usize) -> Self {
        let meta = surface_meta(&corrupted, target, distractor);
        Self {
            clean,
            corrupted,
            target,
            distractor,
            meta,
        }
    }
}

/// Surface features of a corrupted prompt.
pub fn surface_meta(corrupted: &[usize], target: usize, distractor: usize) -> SurfaceMeta {
    let count = |tok: usize| corrupted.iter().filter(|&&t| t == tok).count() as i64;
    let first_repeat_position = corrupted
        .iter()
        .enumerate()
        .find(|(i, t)| corrupted[..*i].contains(t))
        .map_or(-1, |(i, _)| i as i64);
    let mut distinct = corrupted.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    SurfaceMeta {
        target_count: count(target),
        distractor_count: count(distractor),
        first_repeat_position,
        distinct_tokens: distinct.len() as i64,
        prompt_length: corrupted.len() as i64,
        target_mod16: (target % 16) as i64,
    }
}

struct Vocab {
    names: std::ops::Range<usize>,
    fillers: std::ops::Range<usize>,
}

impl Vocab {
    fn new(vocab: usize, tokens: usize) -> Result<Self> {
        let rest = vocab.saturating_sub(N_MARKERS);
        let n_names = (rest / 4).max(3);
        let names = N_MARKERS..N_MARKERS + n_names;
        let fillers = names.end..vocab.max(names.end);
        if fillers.len() < tokens {
            return Err(invalid(format!(
                "vocab {vocab} too small for {tokens}-token prompts"
            )));
        }
        Ok(Self { names, fillers })
    }
}

/// Generates `n` prompt pairs of length `tokens` for one slice. All
/// corruptions of a family share the same clean prompts for a given seed.
pub fn gen_prompt_family(
    family: PromptFamily,
    corruption: Corruption,
    n: usize,
    tokens: usize,
    vocab: usize,
    seed: u64,
) -> Result<Vec<PromptPair>> {
    if n == 0 {
        return Err(invalid("need at least one prompt pair"));
    }
    if !family.corruptions().contains(&corruption) {
        return Err(invalid(format!(
            "corruption {corruption} is not defined for family {family}"
        )));
    }
    if tokens < family.min_tokens() {
        return Err(invalid(format!(
            "family {family} needs at least {} tokens",
            family.min_tokens()
        )));
    }
    let v = Vocab::new(vocab, tokens)?;
    let mut rng = rng_for(seed, &[tag(family.as_str())]);
    let pairs = (0..n)
        .map(|_| {
            let picked = sample(&mut rng, v.names.len(), 3);
            let a = v.names.start + picked.index(0);
            let b = v.names.start + picked.index(1);
            let c = v.names.start + picked.index(2);
            let fillers: Vec<usize> = sample(&mut rng, v.fillers.len(), tokens)
                .into_iter()
                .map(|i| v.fillers.start + i)
                .collect();
            build_pair(family, corruption, tokens, [a, b, c], &fillers)
        })
        .collect();
    Ok(pairs)
}

fn build_pair(
    family: PromptFamily,
    corruption: Corruption,
    t: usize,
    [a, b, c]: [usize; 3],
    fillers: &[usize],
) -> PromptPair {
    use Corruption::*;
    let mut clean = fillers[..t].to_vec();
    let (target, distractor);
    match family {
        PromptFamily::BindingTask => {
            clean[0] = a;
            clean[1] = b;
            clean[t - 2] = b;
            clean[t - 1] = QUERY_TOKEN;
            target = a;
            distractor = b;
        }
        PromptFamily::CopyTask => {
            clean[0] = a;
            clean[t - 1] = COPY_TOKEN;
            target = a;
            distractor = c;
        }
        PromptFamily::InductionLike => {
            clean[0] = a;
            clean[1] = b;
            clean[t - 1] = a;
            target = b;
            distractor = c;
        }
    }
    let mut corrupted = clean.clone();
    match (family, corruption) {
        (_, Identity) => {}
        (PromptFamily::BindingTask, SwapOne) => corrupted[0] = c,
        (PromptFamily::BindingTask, SwapBoth) => {
            for tok in corrupted.iter_mut() {
                if *tok == a {
                    *tok = b;
                } else if *tok == b {
                    *tok = a;
                }
            }
        }
        (PromptFamily::BindingTask, SwapSubject) => corrupted[t - 2] = a,
        (PromptFamily::CopyTask, TokenSwap) => corrupted[0] = c,
        (PromptFamily::InductionLike, TokenSwap) => corrupted[1] = c,
        (PromptFamily::InductionLike, PrefixSwap) => corrupted[0] = c,
        _ => unreachable!("validated against family corruptions"),
    }
    PromptPair::new(clean, corrupted, target, distractor)
}
