//! Build every envelope for one post-jump state of the subunit model and
//! compare its levels with the true rate along the flow.

use pdmp_thinning::bounds::{adaptive_epsilon, build_envelope};
use pdmp_thinning::hh::{HHParams, SubunitMode, SubunitModel};
use pdmp_thinning::{BoundStrategy, EnvelopeOptions, HybridState, PdmpModel};

fn main() -> pdmp_thinning::Result<()> {
    let model = SubunitModel::new(HHParams::standard(30))?;
    let state = HybridState::new(SubunitMode::new(40, 10, 20), 5.0, 1.2)?;
    let seg = model.segment(state);
    let opts = EnvelopeOptions::default();
    println!("flow dV/dt = -{:.3} V + {:.3} + I(t)", seg.a, seg.b);
    println!("adaptive epsilon = {:.4} ms", adaptive_epsilon(&model, &seg, &opts));

    let strategies = [
        BoundStrategy::Global,
        BoundStrategy::Local,
        BoundStrategy::OptimalP { epsilon: 0.1 },
        BoundStrategy::OptimalQ { epsilon: 0.1 },
        BoundStrategy::OptimalQAdaptive,
    ];
    println!("{:>6} {:>10} {}", "offset", "rate", strategies.map(|s| format!("{:>18}", s.to_string())).join(""));
    let mut envs: Vec<_> = strategies
        .iter()
        .map(|&s| build_envelope(&model, &seg, s, &opts))
        .collect::<Result<_, _>>()?;
    for k in 0..8 {
        let offset = 0.05 * k as f64;
        let x = HybridState {
            voltage: model.flow(&seg, offset)?,
            time: state.time + offset,
            ..state
        };
        let mut line = format!("{offset:>6.2} {:>10.3}", model.rate(&x));
        for env in &mut envs {
            line.push_str(&format!("{:>18.3}", env.value(state.time + offset)?));
        }
        println!("{line}");
    }

    // The integrated envelope and its inverse.
    let env = &mut envs[2];
    let t = state.time + 0.37;
    let s = env.integral(t)?;
    println!("optimal-p: Lambda({t}) = {s:.6}, inverse gives {:.12}", env.inverse(s)?);
    Ok(())
}
