//! Plugging a new model into the thinning engine: a membrane with a single
//! two-state channel whose opening rate grows with the voltage.

use pdmp_thinning::model::VoltageBounds;
use pdmp_thinning::{
    simulate_path, BoundStrategy, FlowSegment, HybridState, PdmpModel, PulseCurrent, Result, RngStream, SimulationConfig,
};

struct Telegraph {
    drive: PulseCurrent,
}

impl Telegraph {
    fn open_rate(v: f64) -> f64 {
        0.5 + 0.02 * v.max(0.0)
    }

    const CLOSE_RATE: f64 = 1.0;
}

impl PdmpModel for Telegraph {
    type Mode = bool;

    fn segment(&self, state: HybridState<bool>) -> FlowSegment<bool> {
        // Open: dV/dt = -(V - 50); closed: dV/dt = -0.5 V.
        let (a, b) = if state.mode { (1.0, 50.0) } else { (0.5, 0.0) };
        FlowSegment { start: state, a, b }
    }

    fn drive(&self) -> PulseCurrent {
        self.drive
    }

    fn rate(&self, x: &HybridState<bool>) -> f64 {
        if x.mode {
            Self::CLOSE_RATE
        } else {
            Self::open_rate(x.voltage)
        }
    }

    fn sample_kernel(&self, x: &HybridState<bool>, _rng: &mut RngStream) -> Result<bool> {
        Ok(!x.mode)
    }

    fn rate_sup_from_bounds(&self, mode: &bool, b: VoltageBounds) -> f64 {
        if *mode {
            Self::CLOSE_RATE
        } else {
            Self::open_rate(b.high)
        }
    }

    fn is_valid_mode(&self, _mode: &bool) -> bool {
        true
    }
}

fn main() -> Result<()> {
    let model = Telegraph {
        drive: PulseCurrent::new(10.0, 2.0, 4.0)?,
    };
    let start = HybridState::new(false, 0.0, 0.0)?;
    for strategy in [BoundStrategy::Local, BoundStrategy::OptimalP { epsilon: 0.1 }] {
        let cfg = SimulationConfig::new(start, 20.0, strategy).with_stream(7, 0);
        let (traj, stats) = simulate_path(&model, &cfg)?;
        println!(
            "{strategy}: {} jumps, acceptance {:.3}",
            traj.jump_count(),
            stats.acceptance_ratio().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
