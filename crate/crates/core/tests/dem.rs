use duplex_core::circuit::{Basis, Op};
use duplex_core::dem::{extract_dem, fault_table, ChannelKind, NoisyCircuit};
use duplex_core::protocol::{Protocol, ProtocolConfig};
use duplex_core::sampler::{inject_fault, sample};

mod common;

use common::{noisy, worst_boundary_data_fault};

#[test]
fn annotation_count_matches_instruction_census() {
    let (c, _, nc) = noisy(&ProtocolConfig::new(Protocol::BellPrepLsMeas, 3, 2), 1e-3);
    let expected = c
        .instructions
        .iter()
        .filter(|i| matches!(i.op, Op::ResetZ | Op::ResetX | Op::H | Op::Cx | Op::MeasureZ | Op::MeasureX))
        .count();
    assert_eq!(nc.channels.len(), expected);
    let two_q = nc.channels.iter().filter(|c| matches!(c.kind, ChannelKind::Depolarize2(..))).count();
    assert_eq!(two_q, c.cx_count());
}

#[test]
fn double_annotation_is_rejected() {
    let (_, _, nc) = noisy(&ProtocolConfig::new(Protocol::Memory3cx, 2, 1), 1e-3);
    let mut chans = nc.channels.clone();
    chans.push(chans[0]);
    assert!(NoisyCircuit::with_channels(nc.circuit.clone(), chans).is_err());
}

/// The forward frame engine and the backward sensitivity sweep agree on every
/// single fault.
#[test]
fn frame_injection_matches_fault_table_exhaustively() {
    for p in Protocol::ALL {
        for d in [2, 3] {
            let (_, dm, nc) = noisy(&ProtocolConfig::new(p, d, 1), 1e-3);
            for (ci, term, sym) in fault_table(&nc, &dm) {
                assert_eq!(inject_fault(&nc, &dm, ci, term), sym, "{p} d={d} channel {ci} term {term}");
            }
        }
    }
}

#[test]
fn frame_injection_matches_fault_table_sampled_d4() {
    let mut cfg = ProtocolConfig::new(Protocol::InterleavedMemory, 4, 3);
    cfg.cx_after_round = Some(1);
    let (_, dm, nc) = noisy(&cfg, 1e-3);
    for (k, (ci, term, sym)) in fault_table(&nc, &dm).into_iter().enumerate() {
        if k % 97 == 0 {
            assert_eq!(inject_fault(&nc, &dm, ci, term), sym);
        }
    }
}

#[test]
fn bell_protocols_have_no_transversal_cx_hyperedges() {
    for p in [Protocol::BellPrep, Protocol::BellMeas, Protocol::BellPrepMeas, Protocol::BellPrepLsMeas] {
        for d in [2, 3, 4] {
            for t in [1, 2, 3] {
                let (c, dm, nc) = noisy(&ProtocolConfig::new(p, d, t), 1e-3);
                assert!(extract_dem(&nc, &dm).is_ok(), "{p} d={d} T={t}");
                assert!(worst_boundary_data_fault(&c, &dm) <= 2, "{p} d={d} T={t}");
            }
        }
    }
}

#[test]
fn mid_circuit_cx_data_faults_exceed_two_detectors() {
    let mut cfg = ProtocolConfig::new(Protocol::InterleavedMemory, 4, 3);
    cfg.cx_after_round = Some(1);
    let (c, dm, _) = noisy(&cfg, 1e-3);
    assert_eq!(worst_boundary_data_fault(&c, &dm), 4);
}

/// A single readout error in the round after a mid-circuit transversal CX is
/// seen by the conventional and the extended detector of that round and by
/// the next conventional one.
#[test]
fn mid_circuit_cx_readout_error_hyperedge() {
    let mut cfg = ProtocolConfig::new(Protocol::InterleavedMemory, 4, 3);
    cfg.cx_after_round = Some(1);
    let (_, dm, nc) = noisy(&cfg, 1e-3);
    let worst = fault_table(&nc, &dm)
        .into_iter()
        .filter(|(ci, _, _)| matches!(nc.channels[*ci].kind, ChannelKind::MeasurementFlip(_)))
        .map(|(_, _, sym)| {
            [Basis::X, Basis::Z]
                .iter()
                .map(|&b| sym.ones().filter(|&i| i < dm.detectors.len() && dm.detectors[i].basis == b).count())
                .max()
                .unwrap()
        })
        .max()
        .unwrap();
    assert_eq!(worst, 3);
}

/// A phase flip on a bulk BS data qubit right after the transversal CX is
/// seen by two conventional and two extended X detectors.
#[test]
fn phase_flip_after_transversal_cx_hits_four_x_detectors() {
    let d = 4;
    let mut cfg = ProtocolConfig::new(Protocol::InterleavedMemory, d, 3);
    cfg.cx_after_round = Some(1);
    let (c, dm, _) = noisy(&cfg, 1e-3);
    let seg = c.meta.segments.iter().find(|s| s.cx_perp).unwrap();
    // Last CX of the transversal layer acting on BS data row 1.
    let q = c.meta.bs_data[d + 1];
    let after = (seg.start..seg.end)
        .filter(|&k| c.instructions[k].op == Op::Cx && c.instructions[k].q1() == q)
        .find(|&k| c.meta.three_cx_data.contains(&c.instructions[k].q0()))
        .unwrap();
    let probe = NoisyCircuit::with_channels(
        c.clone(),
        vec![duplex_core::dem::Channel {
            after,
            kind: ChannelKind::Depolarize1(q),
            p: 1.0,
        }],
    )
    .unwrap();
    // Term 2 of a single-qubit channel is Z.
    let sym = inject_fault(&probe, &dm, 0, 2);
    let flagged: Vec<usize> = sym.ones().filter(|&b| b < dm.detectors.len()).collect();
    assert_eq!(flagged.len(), 4);
    assert!(flagged.iter().all(|&i| dm.detectors[i].basis == Basis::X));
}

#[test]
fn zero_noise_samples_are_clean() {
    let (_, dm, nc) = noisy(&ProtocolConfig::new(Protocol::BellPrepMeas, 3, 2), 0.0);
    let t = sample(&nc, &dm, 3000, 1);
    assert!((0..t.shots).all(|s| t.flagged(s).is_empty() && t.observable_mask(s) == 0));
}

#[test]
fn sampling_is_reproducible_and_round_trips() {
    let (_, dm, nc) = noisy(&ProtocolConfig::new(Protocol::MemoryBs, 3, 2), 5e-3);
    let a = sample(&nc, &dm, 2500, 42);
    let b = sample(&nc, &dm, 2500, 42);
    assert_eq!(a, b);
    let back = duplex_core::sampler::ShotTable::from_bytes(&a.to_bytes()).unwrap();
    assert_eq!(back, a);
}

/// Each detector's empirical flip rate matches the odd-parity probability of
/// the mechanisms touching it.
#[test]
fn detector_rates_match_dem_within_five_sigma() {
    let (_, dm, nc) = noisy(&ProtocolConfig::new(Protocol::Memory3cx, 2, 1), 2e-3);
    let dem = extract_dem(&nc, &dm).unwrap();
    let shots = 1_000_000;
    let t = sample(&nc, &dm, shots, 7);
    for d in 0..dm.detectors.len() {
        let prod: f64 = dem
            .mechanisms
            .iter()
            .filter(|m| m.detectors.contains(&d))
            .map(|m| 1.0 - 2.0 * m.probability)
            .product();
        let p = (1.0 - prod) / 2.0;
        let hits = (0..shots).filter(|&s| t.detector(s, d)).count() as f64;
        let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - shots as f64 * p).abs() < 5.0 * sigma, "D{d}: {hits} vs {}", shots as f64 * p);
    }
}

#[test]
fn dem_text_round_trips() {
    let (_, dm, nc) = noisy(&ProtocolConfig::new(Protocol::BellPrepMeas, 2, 1), 1e-3);
    let dem = extract_dem(&nc, &dm).unwrap();
    let text = dem.to_text();
    assert!(text.lines().nth(2).unwrap().starts_with("error("));
    let back = duplex_core::dem::DetectorErrorModel::parse(&text, true).unwrap();
    assert_eq!(back.mechanisms.len(), dem.mechanisms.len());
    assert_eq!(back.edges.len(), dem.edges.len());
    for (a, b) in back.mechanisms.iter().zip(&dem.mechanisms) {
        assert_eq!(a.detectors, b.detectors);
        assert!((a.probability - b.probability).abs() <= 1e-6 * b.probability);
    }
}
