//! Envelope and path invariants on states visited by HH trajectories.

use pdmp_thinning::bounds::build_envelope;
use pdmp_thinning::hh::{ChannelModel, HHParams, SubunitMode, SubunitModel};
use pdmp_thinning::{
    simulate_path, BoundStrategy, EnvelopeOptions, HybridState, PdmpModel, PulseCurrent, SimulationConfig,
};
use proptest::prelude::*;

const HORIZON: f64 = 10.0;

fn states<P: PdmpModel>(model: &P, initial: HybridState<P::Mode>, seed: u64, stream: u64) -> Vec<HybridState<P::Mode>> {
    let cfg = SimulationConfig::new(initial, HORIZON, BoundStrategy::OptimalQAdaptive).with_stream(seed, stream);
    simulate_path(model, &cfg).unwrap().0.post_jump_states
}

fn level_at<P: PdmpModel>(model: &P, state: HybridState<P::Mode>, s: BoundStrategy, t: f64) -> f64 {
    let seg = model.segment(state);
    build_envelope(model, &seg, s, &EnvelopeOptions::default()).unwrap().value(t).unwrap()
}

/// Global >= local >= optimal-p levels on a grid covering the rest of the horizon.
fn ordering_holds<P: PdmpModel>(model: &P, state: HybridState<P::Mode>) -> Result<(), String> {
    let g = level_at(model, state, BoundStrategy::Global, state.time);
    let l = level_at(model, state, BoundStrategy::Local, state.time);
    if g < l {
        return Err(format!("global {g} < local {l} at {state:?}"));
    }
    let seg = model.segment(state);
    for eps in [0.5, 0.1, 0.01] {
        let mut env = build_envelope(model, &seg, BoundStrategy::OptimalP { epsilon: eps }, &EnvelopeOptions::default()).unwrap();
        let span = HORIZON - state.time;
        for k in 0..=200 {
            let t = state.time + span * k as f64 / 200.0;
            let p = env.value(t).unwrap();
            if p > l {
                return Err(format!("optimal-p({eps}) {p} > local {l} at t = {t}, {state:?}"));
            }
        }
    }
    Ok(())
}

/// Largest envelope-minus-rate gap of optimal-p(eps) over `[t0, t0 + 1]`.
fn max_gap<P: PdmpModel>(model: &P, state: HybridState<P::Mode>, eps: f64) -> f64 {
    let seg = model.segment(state);
    let mut env = build_envelope(model, &seg, BoundStrategy::OptimalP { epsilon: eps }, &EnvelopeOptions::default()).unwrap();
    (0..2000)
        .map(|k| {
            let offset = k as f64 / 2000.0;
            let x = HybridState {
                voltage: model.flow(&seg, offset).unwrap(),
                time: state.time + offset,
                ..state
            };
            env.value(x.time).unwrap() - model.rate(&x)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn gaps_shrink<P: PdmpModel>(model: &P, state: HybridState<P::Mode>) -> Result<(), String> {
    let g: Vec<f64> = [0.5, 0.1, 0.02].iter().map(|&e| max_gap(model, state, e)).collect();
    let shrinking = g[1] <= g[0] && g[2] <= g[1] && (g[2] < g[0] || g[0] == 0.0);
    if shrinking {
        Ok(())
    } else {
        Err(format!("gaps {g:?} at {state:?}"))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn envelope_ordering_on_visited_states(stream in 0u64..1000, n in prop::sample::select(vec![1u32, 10, 30, 300])) {
        let su = SubunitModel::new(HHParams::standard(n)).unwrap();
        for x in states(&su, su.initial_state(), 31, stream).into_iter().step_by(7) {
            prop_assert_eq!(ordering_holds(&su, x), Ok(()));
        }
        let ch = ChannelModel::new(HHParams::standard(n)).unwrap();
        for x in states(&ch, ch.initial_state(), 32, stream).into_iter().step_by(7) {
            prop_assert_eq!(ordering_holds(&ch, x), Ok(()));
        }
    }

    #[test]
    fn path_stays_in_invariant_region(stream in 0u64..1000, n in prop::sample::select(vec![1u32, 10, 100]), driven: bool) {
        let mut p = HHParams::standard(n);
        if !driven {
            p = p.with_pulse(PulseCurrent::none());
        }
        let region = p.invariant_region();
        let su = SubunitModel::new(p).unwrap();
        let cfg = SimulationConfig::new(su.initial_state(), HORIZON, BoundStrategy::Local).with_stream(33, stream);
        let (traj, _) = simulate_path(&su, &cfg).unwrap();
        for (i, seg) in traj.segments.iter().enumerate() {
            let len = traj.segment_end(i) - seg.start.time;
            for k in 0..=20 {
                let v = su.flow(seg, len * k as f64 / 20.0).unwrap();
                prop_assert!(region.low - 1e-9 <= v && v <= region.high + 1e-9, "V = {} outside {:?}", v, region);
            }
        }
    }
}

proptest! {
    #[test]
    fn envelope_ordering_on_arbitrary_states(
        on in 0u32..=120,
        om in 0u32..=90,
        oh in 0u32..=30,
        v in -12.0f64..115.0,
        t0 in 0.0f64..9.5,
    ) {
        let su = SubunitModel::new(HHParams::standard(30)).unwrap();
        let x = HybridState::new(SubunitMode::new(on, om, oh), v, t0).unwrap();
        prop_assert_eq!(ordering_holds(&su, x), Ok(()));
    }
}

#[test]
fn no_current_region_is_rest_interval() {
    let r = HHParams::standard(1).with_pulse(PulseCurrent::none()).invariant_region();
    assert_eq!((r.low, r.high), (-12.0, 115.0));
}

#[test]
fn optimal_p_gap_shrinks_with_epsilon() {
    let su = SubunitModel::new(HHParams::standard(30)).unwrap();
    let ch = ChannelModel::new(HHParams::standard(30)).unwrap();
    let mut checked = 0;
    for stream in 0.. {
        for x in states(&su, su.initial_state(), 34, stream).into_iter().step_by(20) {
            gaps_shrink(&su, x).unwrap();
            checked += 1;
        }
        for x in states(&ch, ch.initial_state(), 35, stream).into_iter().step_by(20) {
            gaps_shrink(&ch, x).unwrap();
            checked += 1;
        }
        if checked >= 100 {
            break;
        }
    }
}
