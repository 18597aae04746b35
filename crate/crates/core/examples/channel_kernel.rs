//! The channel-model transition law sampled in two stages (gate event, then
//! channel edge) agrees with the direct 28-edge kinetic scheme.

use pdmp_thinning::hh::channel::{decomposed_kernel, direct_kernel, ChannelEdge};
use pdmp_thinning::hh::{ChannelMode, ChannelModel, HHParams, KineticScheme};
use pdmp_thinning::RngStream;

fn main() -> pdmp_thinning::Result<()> {
    let params = HHParams::standard(10);
    let mode = ChannelMode {
        na: [[3, 1], [2, 1], [1, 0], [1, 1]],
        k: [2, 3, 2, 2, 1],
    };
    let v = 20.0;
    println!("eta(mode) = {:?}, conducting = {:?}", mode.eta(), mode.conducting());

    let two_stage = decomposed_kernel(&mode, params.gate_totals(), v)?;
    let direct = direct_kernel(&mode, v, KineticScheme::Standard)?;
    let prob = |k: &[(ChannelEdge, f64)], e: &ChannelEdge| k.iter().find(|x| x.0 == *e).map_or(0.0, |x| x.1);
    let mut tv = 0.0;
    println!("{:<28} {:>12} {:>12}", "edge", "two-stage", "direct");
    for (edge, p) in &direct {
        let q = prob(&two_stage, edge);
        tv += (p - q).abs();
        println!("{:<28} {:>12.8} {:>12.8}", format!("{edge:?}"), q, p);
    }
    println!("total variation: {:.2e}", 0.5 * tv);

    // Empirical frequencies of the sampler.
    let model = ChannelModel::new(params)?;
    let mut rng = RngStream::new(5, 0);
    let n = 200_000;
    let mut hits = std::collections::HashMap::new();
    for _ in 0..n {
        *hits.entry(model.sample_transition(&mode, v, &mut rng)?).or_insert(0u32) += 1;
    }
    let worst = direct
        .iter()
        .map(|(e, p)| (f64::from(*hits.get(e).unwrap_or(&0)) / n as f64 - p).abs())
        .fold(0.0, f64::max);
    println!("largest |empirical - exact| over {n} draws: {worst:.4}");
    Ok(())
}
