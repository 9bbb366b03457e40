use duplex_core::circuit::{Basis, Circuit};
use duplex_core::circuitgen::build_circuit;
use duplex_core::codes::{bacon_shor_spec, conjugate_through_cx, downgraded_stabilizers, threecx_spec, PauliString};
use duplex_core::circuitgen::threecx_variant;
use duplex_core::flow::{
    derive_detectors, derive_unchecked, deterministic_parity_space, observable_values, verify_determinism,
    DetectorModel, ObsLabel,
};
use duplex_core::gf2::{self, BitVec};
use duplex_core::lattice::Layout;
use duplex_core::protocol::{LsOrder, Protocol, ProtocolConfig};
use duplex_core::tableau::{apply_pauli, run_circuit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn build(cfg: &ProtocolConfig) -> (Circuit, DetectorModel) {
    let layout = Layout::for_distance(cfg.d).unwrap();
    let c = build_circuit(cfg, &layout).unwrap();
    let dm = derive_detectors(&c).unwrap();
    (c, dm)
}

fn set_of(m: usize, meas: &[usize]) -> BitVec {
    BitVec::from_indices(m, meas.iter().copied())
}

#[test]
fn rule_detectors_lie_in_the_tableau_parity_space() {
    for p in Protocol::ALL {
        for basis in [Basis::Z, Basis::X] {
            let (c, dm) = build(&ProtocolConfig::new(p, 2, 2).with_basis(basis));
            let space = deterministic_parity_space(&c, c.num_measurements + 40, 3);
            let mut b = gf2::Basis::new(0);
            for v in space {
                b.insert(v);
            }
            for d in &dm.detectors {
                assert!(b.contains(&set_of(c.num_measurements, &d.meas)), "{p} D{}", d.id);
            }
        }
    }
}

#[test]
fn memory_3cx_d2_t1_detector_count_matches_oracle() {
    let (c, dm) = build(&ProtocolConfig::new(Protocol::Memory3cx, 2, 1));
    let space = deterministic_parity_space(&c, c.num_measurements + 40, 11);
    // The oracle space also holds the deterministic logical readout.
    assert_eq!(dm.observables.len(), 1);
    assert_eq!(dm.detectors.len() + 1, space.len());
    let mut all: Vec<BitVec> = dm.detectors.iter().map(|d| set_of(c.num_measurements, &d.meas)).collect();
    all.push(set_of(c.num_measurements, &dm.observables[0].meas));
    assert_eq!(gf2::rank(&all), space.len());
}

#[test]
fn ls_cross_check_detectors() {
    let (c, dm) = build(&ProtocolConfig::new(Protocol::BellPrepLsMeas, 3, 2));
    let xx_ls = dm.observable(ObsLabel::XxLs).unwrap().meas.clone();
    let zz_ls = dm.observable(ObsLabel::ZzLs).unwrap().meas.clone();
    let cross: Vec<_> = dm
        .detectors
        .iter()
        .filter(|d| d.meas.iter().any(|m| xx_ls.contains(m) || zz_ls.contains(m)))
        .collect();
    assert_eq!(cross.len(), 2);
    assert_eq!(cross.iter().filter(|d| d.basis == Basis::X).count(), 1);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let rec = run_circuit(&c, &mut rng, |_, _, _| {});
        let v = observable_values(&dm, &rec).unwrap();
        assert_eq!(v[&ObsLabel::XxLs], v[&ObsLabel::XxFinal]);
        assert_eq!(v[&ObsLabel::ZzLs], v[&ObsLabel::ZzFinal]);
        assert_eq!(v[&ObsLabel::XxFinal], 1);
        assert_eq!(v[&ObsLabel::ZzFinal], 1);
    }
}

/// Measuring the seam after the transversal CX disturbs the disentangled
/// X readout, so the derivation refuses it.
#[test]
fn ls_after_cx_order_is_rejected() {
    let mut cfg = ProtocolConfig::new(Protocol::BellPrepLsMeas, 3, 1);
    cfg.ls_order = LsOrder::AfterCx;
    let layout = Layout::for_distance(3).unwrap();
    let c = build_circuit(&cfg, &layout).unwrap();
    assert!(derive_detectors(&c).is_err());
}

#[test]
fn injected_bs_bit_flip_flips_zz_final() {
    let (c, dm) = build(&ProtocolConfig::new(Protocol::BellPrepMeas, 3, 1));
    let final_start = c.meta.segments.last().unwrap().start;
    let target = c.meta.bs_data[0];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let rec = run_circuit(&c, &mut rng, |k, t, idx| {
            if k == final_start {
                apply_pauli(t, idx.get(target).unwrap(), true, false);
            }
        });
        let v = observable_values(&dm, &rec).unwrap();
        assert_eq!(v[&ObsLabel::ZzFinal], -1);
        assert_eq!(v[&ObsLabel::XxFinal], 1);
    }
}

#[test]
fn gauge_outcomes_random_but_products_deterministic() {
    let (c, dm) = build(&ProtocolConfig::new(Protocol::MemoryBs, 3, 2).with_basis(Basis::Z));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let recs: Vec<Vec<bool>> = (0..30).map(|_| run_circuit(&c, &mut rng, |_, _, _| {})).collect();
    let varying = (0..c.num_measurements).filter(|&m| recs.iter().any(|r| r[m] != recs[0][m])).count();
    assert!(varying > 0);
    for r in &recs {
        assert!(dm.detector_bits(r).iter().all(|b| !b));
    }
}

/// Across a mid-circuit transversal CX, the BS Z detectors follow the
/// conjugated operator: the BS stabilizer before equals the product of the
/// 3CX stripe and the BS stabilizer after.
#[test]
fn transversal_cx_detectors_follow_conjugation() {
    let d = 3;
    let mut cfg = ProtocolConfig::new(duplex_core::protocol::Protocol::InterleavedMemory, d, 3);
    cfg.cx_after_round = Some(1);
    let (c, dm) = build(&cfg);
    let (bs, _) = bacon_shor_spec(d).unwrap();
    // Grid operators on 2*d*d qubits: 3CX at q, BS at d*d + q.
    let n = d * d;
    let cx: Vec<(usize, usize)> = (0..n).map(|q| (q, n + q)).collect();
    let stripes = downgraded_stabilizers(&threecx_spec(d, threecx_variant(1)).unwrap()).unwrap();
    for (j, s) in bs.z_gens.iter().enumerate() {
        let shifted = PauliString::z_on(s.support().map(|q| n + q));
        let after = conjugate_through_cx(&shifted, &cx).unwrap();
        let stripe = stripes.iter().filter(|p| p.is_z_type()).nth(j).unwrap();
        let expect = &PauliString::z_on(stripe.support()) * &shifted;
        assert_eq!(after.unsigned(), expect.unsigned());
    }
    // The round after the CX has one Z detector per BS Z stabilizer that
    // involves 3CX measurements too.
    let round = 2;
    let z_round: Vec<_> = dm.detectors.iter().filter(|x| x.round == round && x.basis == Basis::Z).collect();
    assert!(!z_round.is_empty());
    assert!(verify_determinism(&c, &dm, 20).ok());
}

#[test]
fn determinism_suite_small() {
    for p in Protocol::ALL {
        for d in [2, 3] {
            for t in [1, 2, 3] {
                let (c, dm) = build(&ProtocolConfig::new(p, d, t));
                let r = verify_determinism(&c, &dm, 10);
                assert!(r.ok(), "{p} d={d} T={t}: {:?}", r.violations);
                let dm2 = derive_unchecked(&c).unwrap();
                assert_eq!(dm, dm2);
            }
        }
    }
}
