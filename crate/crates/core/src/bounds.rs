//! Piecewise-constant jump-rate envelopes.
//!
//! An envelope dominates the true jump rate along the flow started at the
//! last jump. It is stored as finite segments `[u_k, u_{k+1})` of offsets
//! from the anchor plus a tail: either a constant level on `[u_n, inf)` or a
//! lazy generator that appends fixed-width segments as the thinning clock
//! advances. The integrated envelope is continuous and piecewise linear, and
//! its inverse is exact up to floating-point rounding.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, PdmpError, Result};
use crate::model::{FlowSegment, PdmpModel, Window};
use crate::numeric::CompensatedSum;

/// Default quantile defining the adaptive head width `eps_n`.
pub const DEFAULT_EPSILON_QUANTILE: f64 = 0.05;

/// Upper limit on lazily generated segments in a single envelope.
const MAX_LAZY_SEGMENTS: usize = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundStrategy {
    Global,
    Local,
    OptimalP { epsilon: f64 },
    OptimalQ { epsilon: f64 },
    OptimalQAdaptive,
}

impl BoundStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundStrategy::OptimalP { epsilon } | BoundStrategy::OptimalQ { epsilon }
                if !(epsilon > 0.0 && epsilon.is_finite()) =>
            {
                Err(invalid("epsilon", format!("must be finite and > 0, got {epsilon}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for BoundStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundStrategy::Global => write!(f, "global"),
            BoundStrategy::Local => write!(f, "local"),
            BoundStrategy::OptimalP { epsilon } => write!(f, "optimal-p({epsilon})"),
            BoundStrategy::OptimalQ { epsilon } => write!(f, "optimal-q({epsilon})"),
            BoundStrategy::OptimalQAdaptive => write!(f, "optimal-q-adaptive"),
        }
    }
}

/// Knobs shared by every envelope construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeOptions {
    /// Tail probability defining `eps_n = -ln(q) / lower_rate`.
    pub epsilon_quantile: f64,
    /// Head width used when the lower local rate vanishes.
    pub epsilon_fallback: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            epsilon_quantile: DEFAULT_EPSILON_QUANTILE,
            epsilon_fallback: 10.0,
        }
    }
}

type LevelSource<'a> = Box<dyn FnMut(Window) -> f64 + 'a>;

enum Tail<'a> {
    Constant(f64),
    Lazy { width: f64, source: LevelSource<'a> },
}

pub struct RateEnvelope<'a> {
    anchor: f64,
    breaks: Vec<f64>,
    levels: Vec<f64>,
    cum: Vec<f64>,
    acc: CompensatedSum,
    tail: Tail<'a>,
}

impl fmt::Debug for RateEnvelope<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tail = match &self.tail {
            Tail::Constant(l) => format!("constant({l})"),
            Tail::Lazy { width, .. } => format!("lazy(width={width})"),
        };
        f.debug_struct("RateEnvelope")
            .field("anchor", &self.anchor)
            .field("breaks", &self.breaks)
            .field("levels", &self.levels)
            .field("tail", &tail)
            .finish()
    }
}

impl<'a> RateEnvelope<'a> {
    /// Single level on `[anchor, inf)`.
    pub fn constant(anchor: f64, level: f64) -> Self {
        Self::piecewise(anchor, &[], &[], level)
    }

    /// Finite segments with widths `widths[k]` and levels `levels[k]`,
    /// followed by `tail_level` on the remainder.
    pub fn piecewise(anchor: f64, widths: &[f64], levels: &[f64], tail_level: f64) -> Self {
        assert_eq!(widths.len(), levels.len());
        let mut env = Self {
            anchor,
            breaks: vec![0.0],
            levels: Vec::with_capacity(levels.len()),
            cum: vec![0.0],
            acc: CompensatedSum::new(),
            tail: Tail::Constant(tail_level),
        };
        for (&w, &l) in widths.iter().zip(levels) {
            env.push_segment(w, l);
        }
        env
    }

    /// Countably many segments `[k w, (k+1) w)` whose levels are produced on
    /// demand by `source`.
    pub fn lazy(anchor: f64, width: f64, source: impl FnMut(Window) -> f64 + 'a) -> Self {
        Self {
            anchor,
            breaks: vec![0.0],
            levels: Vec::new(),
            cum: vec![0.0],
            acc: CompensatedSum::new(),
            tail: Tail::Lazy {
                width,
                source: Box::new(source),
            },
        }
    }

    fn push_segment(&mut self, width: f64, level: f64) {
        let start = *self.breaks.last().expect("breaks never empty");
        self.breaks.push(start + width);
        self.levels.push(level);
        self.acc.add(level * width);
        self.cum.push(self.acc.value());
    }

    fn extend_once(&mut self) -> Result<bool> {
        let Tail::Lazy { width, source } = &mut self.tail else {
            return Ok(false);
        };
        let width = *width;
        let n = self.levels.len();
        if n >= MAX_LAZY_SEGMENTS {
            return Err(PdmpError::InfiniteHorizon {
                mass: self.acc.value(),
                target: f64::NAN,
            });
        }
        let start = n as f64 * width;
        let end = (n + 1) as f64 * width;
        let level = source(Window::new(start, end));
        if !(level >= 0.0 && level.is_finite()) {
            return Err(PdmpError::UnsupportedStrategy {
                strategy: "optimal-p".into(),
                reason: format!("segment level {level} on [{start}, {end})"),
            });
        }
        self.push_segment(width, level);
        Ok(true)
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Levels of the segments materialized so far.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Breakpoint offsets `u_0 = 0 < u_1 < ...` materialized so far.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn tail_level(&self) -> Option<f64> {
        match self.tail {
            Tail::Constant(l) => Some(l),
            Tail::Lazy { .. } => None,
        }
    }

    fn covered(&self) -> f64 {
        *self.breaks.last().expect("breaks never empty")
    }

    fn ensure_covers_offset(&mut self, offset: f64) -> Result<()> {
        while offset >= self.covered() {
            if !self.extend_once()? {
                break;
            }
        }
        Ok(())
    }

    fn segment_index(&self, offset: f64) -> Option<usize> {
        if offset >= self.covered() {
            return None;
        }
        // Half-open segments: a breakpoint belongs to the segment it starts.
        Some(self.breaks.partition_point(|&u| u <= offset) - 1)
    }

    /// Envelope level at absolute time `t >= anchor`.
    pub fn value(&mut self, t: f64) -> Result<f64> {
        let offset = self.offset_of(t)?;
        self.ensure_covers_offset(offset)?;
        Ok(match self.segment_index(offset) {
            Some(k) => self.levels[k],
            None => match self.tail {
                Tail::Constant(l) => l,
                Tail::Lazy { .. } => unreachable!("lazy envelope covers every offset"),
            },
        })
    }

    /// Integrated envelope `int_anchor^t level(s) ds`.
    pub fn integral(&mut self, t: f64) -> Result<f64> {
        let offset = self.offset_of(t)?;
        self.ensure_covers_offset(offset)?;
        Ok(match self.segment_index(offset) {
            Some(k) => self.cum[k] + self.levels[k] * (offset - self.breaks[k]),
            None => {
                let n = self.levels.len();
                let Tail::Constant(l) = self.tail else {
                    unreachable!("lazy envelope covers every offset")
                };
                self.cum[n] + l * (offset - self.breaks[n])
            }
        })
    }

    /// Inverse of the integrated envelope at mass `s >= 0`, as an absolute time.
    pub fn inverse(&mut self, s: f64) -> Result<f64> {
        match self.inverse_within(s, f64::INFINITY)? {
            Some((offset, _)) => Ok(self.anchor + offset),
            None => unreachable!("an unlimited inversion either succeeds or errors"),
        }
    }

    /// Inverse as an offset together with the level of the segment it falls
    /// in. Returns `None` when the offset would reach past `limit_offset`;
    /// lazy segments are only generated up to that limit.
    pub fn inverse_within(&mut self, s: f64, limit_offset: f64) -> Result<Option<(f64, f64)>> {
        if !(s >= 0.0) {
            return Err(invalid("s", format!("mass must be >= 0, got {s}")));
        }
        loop {
            let n = self.levels.len();
            if s < self.cum[n] {
                // First k with cum[k+1] > s; zero-level segments have no mass
                // and are skipped.
                let k = self.cum[1..].partition_point(|&c| c <= s);
                let offset = self.breaks[k] + (s - self.cum[k]) / self.levels[k];
                let offset = offset.min(self.breaks[k + 1]);
                return Ok((offset <= limit_offset).then_some((offset, self.levels[k])));
            }
            match self.tail {
                Tail::Constant(l) => {
                    if l <= 0.0 {
                        if self.covered() > limit_offset {
                            return Ok(None);
                        }
                        return Err(PdmpError::InfiniteHorizon {
                            mass: self.cum[n],
                            target: s,
                        });
                    }
                    let offset = self.breaks[n] + (s - self.cum[n]) / l;
                    return Ok((offset <= limit_offset).then_some((offset, l)));
                }
                Tail::Lazy { .. } => {
                    if self.covered() > limit_offset {
                        return Ok(None);
                    }
                    self.extend_once()?;
                }
            }
        }
    }

    fn offset_of(&self, t: f64) -> Result<f64> {
        let offset = t - self.anchor;
        if !(offset >= 0.0) {
            return Err(invalid("t", format!("{t} precedes envelope anchor {}", self.anchor)));
        }
        Ok(offset)
    }
}

fn checked_level(strategy: &str, level: f64) -> Result<f64> {
    if level >= 0.0 && level.is_finite() {
        Ok(level)
    } else {
        Err(PdmpError::UnsupportedStrategy {
            strategy: strategy.into(),
            reason: format!("rate bound evaluates to {level}"),
        })
    }
}

/// State-independent constant envelope.
pub fn build_global<'a, P: PdmpModel>(model: &P, anchor: f64) -> Result<RateEnvelope<'a>> {
    let level = model.global_rate_bound().ok_or_else(|| PdmpError::UnsupportedStrategy {
        strategy: "global".into(),
        reason: "model has no finite global rate bound".into(),
    })?;
    Ok(RateEnvelope::constant(anchor, checked_level("global", level)?))
}

/// Level of the local bound: rate supremum over flow bounds on `[0, inf)`,
/// never above the global bound when the model has one.
pub fn local_level<P: PdmpModel>(model: &P, seg: &FlowSegment<P::Mode>) -> Result<f64> {
    let bounds = model.voltage_bounds(seg, Window::WHOLE);
    let level = model.rate_sup_from_bounds(&seg.start.mode, bounds);
    checked_level("local", model.global_rate_bound().map_or(level, |g| level.min(g)))
}

/// Constant envelope adapted to the post-jump state.
pub fn build_local<'a, P: PdmpModel>(model: &P, seg: &FlowSegment<P::Mode>) -> Result<RateEnvelope<'a>> {
    Ok(RateEnvelope::constant(seg.start.time, local_level(model, seg)?))
}

/// Envelope on the regular partition `[k eps, (k+1) eps)`, generated lazily.
/// Each level is capped by the local level when that one is finite.
pub fn build_optimal_p<'a, P: PdmpModel>(
    model: &'a P,
    seg: &FlowSegment<P::Mode>,
    epsilon: f64,
) -> Result<RateEnvelope<'a>> {
    BoundStrategy::OptimalP { epsilon }.validate()?;
    let seg = *seg;
    let cap = local_level(model, &seg).unwrap_or(f64::INFINITY);
    Ok(RateEnvelope::lazy(seg.start.time, epsilon, move |w| {
        model.rate_sup_from_bounds(&seg.start.mode, model.voltage_bounds(&seg, w)).min(cap)
    }))
}

/// Two-piece envelope: sup over `[0, eps)` then the local level.
pub fn build_optimal_q<'a, P: PdmpModel>(
    model: &P,
    seg: &FlowSegment<P::Mode>,
    epsilon: f64,
) -> Result<RateEnvelope<'a>> {
    BoundStrategy::OptimalQ { epsilon }.validate()?;
    let head_bounds = model.voltage_bounds(seg, Window::new(0.0, epsilon));
    let tail = local_level(model, seg)?;
    let head = checked_level("optimal-q", model.rate_sup_from_bounds(&seg.start.mode, head_bounds).min(tail))?;
    Ok(RateEnvelope::piecewise(seg.start.time, &[epsilon], &[head], tail))
}

/// Lower local rate over the whole-flow voltage bounds.
pub fn lower_local_rate<P: PdmpModel>(model: &P, seg: &FlowSegment<P::Mode>) -> f64 {
    let bounds = model.voltage_bounds(seg, Window::WHOLE);
    model.rate_inf_from_bounds(&seg.start.mode, bounds)
}

/// Head width `eps_n = -ln(q) / lower_rate`; falls back to
/// `options.epsilon_fallback` when the lower rate vanishes.
pub fn adaptive_epsilon<P: PdmpModel>(model: &P, seg: &FlowSegment<P::Mode>, options: &EnvelopeOptions) -> f64 {
    epsilon_from_lower_rate(lower_local_rate(model, seg), options)
}

pub fn epsilon_from_lower_rate(lower_rate: f64, options: &EnvelopeOptions) -> f64 {
    if lower_rate > 0.0 && lower_rate.is_finite() {
        -options.epsilon_quantile.ln() / lower_rate
    } else {
        options.epsilon_fallback
    }
}

/// Envelope for `strategy` anchored at the start of `seg`.
pub fn build_envelope<'a, P: PdmpModel>(
    model: &'a P,
    seg: &FlowSegment<P::Mode>,
    strategy: BoundStrategy,
    options: &EnvelopeOptions,
) -> Result<RateEnvelope<'a>> {
    match strategy {
        BoundStrategy::Global => build_global(model, seg.start.time),
        BoundStrategy::Local => build_local(model, seg),
        BoundStrategy::OptimalP { epsilon } => build_optimal_p(model, seg, epsilon),
        BoundStrategy::OptimalQ { epsilon } => build_optimal_q(model, seg, epsilon),
        BoundStrategy::OptimalQAdaptive => {
            let eps = adaptive_epsilon(model, seg, options);
            build_optimal_q(model, seg, eps)
        }
    }
}
