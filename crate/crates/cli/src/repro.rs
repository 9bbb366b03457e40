use clap::ValueEnum;
use duplex_core::analysis::{Metric, SweepConfig};
use duplex_core::flow::ObsLabel;
use duplex_core::protocol::Protocol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Memory error rate against rounds, d = 2..4, with and without post-selection.
    Fig1,
    /// Bell infidelity against p, no post-selection.
    Fig4a,
    /// Bell infidelity and yield against p from the same shots, post-selected.
    Fig4b,
    /// Isolated and interleaved memory thresholds.
    #[value(name = "appA")]
    AppA,
}

const BELL_P: [f64; 5] = [3e-4, 4.5e-4, 6.75e-4, 1e-3, 1.5e-3];

/// Pinned sweep configs as (panel, config).
pub fn panels(target: Target, seed: u64) -> Vec<(&'static str, SweepConfig)> {
    let base = |protocol, distances: &[usize], p: &[f64]| {
        let mut c = SweepConfig::new(protocol, distances.to_vec(), p.to_vec(), 200_000, seed);
        c.max_shots = Some(200_000);
        c
    };
    match target {
        Target::Fig1 => [("d", Protocol::Memory3cx), ("e", Protocol::MemoryBs)]
            .into_iter()
            .map(|(panel, protocol)| {
                let mut c = base(protocol, &[2, 3, 4], &[1e-3]);
                c.rounds = (1..=5).collect();
                c.postselect = true;
                (panel, c)
            })
            .collect(),
        Target::Fig4a | Target::Fig4b => {
            let mut c = base(Protocol::BellPrepLsMeas, &[2, 3, 4], &BELL_P);
            c.max_shots = Some(1_000_000);
            c.fit_window = Some((BELL_P[0], BELL_P[4]));
            c.postselect = target == Target::Fig4b;
            let panel = if target == Target::Fig4a { "a" } else { "b" };
            vec![(panel, c)]
        }
        Target::AppA => {
            let mut a = base(Protocol::Memory3cx, &[3, 5], &[1.5e-3, 2e-3, 2.5e-3, 3e-3, 4e-3, 5e-3]);
            a.metric = Some(Metric::LogicalError(ObsLabel::ZL1));
            let mut b = base(Protocol::MemoryBs, &[3, 5], &[4e-4, 6e-4, 8e-4, 1e-3, 1.25e-3, 1.5e-3, 2e-3]);
            b.metric = Some(Metric::LogicalError(ObsLabel::ZL2));
            let mut c = base(
                Protocol::InterleavedMemory,
                &[3, 5],
                &[8e-4, 1e-3, 1.25e-3, 1.5e-3, 2e-3, 2.5e-3, 3e-3],
            );
            c.metric = Some(Metric::LogicalError(ObsLabel::ZL1));
            let mut d = base(
                Protocol::InterleavedMemory,
                &[3, 5],
                &[3e-4, 4e-4, 6e-4, 8e-4, 1e-3, 1.25e-3, 1.5e-3],
            );
            d.metric = Some(Metric::LogicalError(ObsLabel::ZL2));
            vec![("a", a), ("b", b), ("c", c), ("d", d)]
        }
    }
}
