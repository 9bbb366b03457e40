use duplex_core::analysis::{
    approximate_tomography, bell_report, chsh_bound, crossing_point, fit_power_law, shot_yy, Expectations,
    ShotRecord,
};
use nalgebra::{Complex, Matrix3, Matrix4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex<f64>;

fn pauli(k: usize) -> [[C; 2]; 2] {
    let (o, z, i) = (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 1.0));
    match k {
        0 => [[z, o], [o, z]],
        1 => [[z, -i], [i, z]],
        _ => [[o, z], [z, -o]],
    }
}

/// Random mixed state A A† / tr, with A a complex Gaussian-ish 4x4 matrix.
fn random_rho(rng: &mut ChaCha8Rng) -> [[C; 4]; 4] {
    let mut a = [[C::new(0.0, 0.0); 4]; 4];
    for row in a.iter_mut() {
        for x in row.iter_mut() {
            *x = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let mut rho = [[C::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            for k in 0..4 {
                rho[r][c] += a[r][k] * a[c][k].conj();
            }
        }
    }
    let tr: f64 = (0..4).map(|k| rho[k][k].re).sum();
    for row in rho.iter_mut() {
        for x in row.iter_mut() {
            *x /= tr;
        }
    }
    rho
}

/// All nine tr(rho sigma_i x sigma_j).
fn full_t(rho: &[[C; 4]; 4]) -> Matrix3<f64> {
    let mut t = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = (pauli(i), pauli(j));
            let mut acc = C::new(0.0, 0.0);
            for r in 0..4 {
                for c in 0..4 {
                    let op = a[r / 2][c / 2] * b[r % 2][c % 2];
                    acc += op * rho[c][r];
                }
            }
            t[(i, j)] = acc.re;
        }
    }
    t
}

#[test]
fn diagonal_chsh_is_a_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut gaps = 0;
    for _ in 0..1000 {
        let t = full_t(&random_rho(&mut rng));
        let diag = Matrix3::from_diagonal(&t.diagonal());
        let (lo, hi) = (chsh_bound(&diag), chsh_bound(&t));
        assert!(lo <= hi + 1e-12, "diag {lo} > full {hi}");
        if hi - lo > 1e-3 {
            gaps += 1;
        }
    }
    // Random states have off-diagonal correlations, so the bound is usually strict.
    assert!(gaps > 500);
}

#[test]
fn bell_state_correlations() {
    // |Phi+> has T = diag(1, -1, 1).
    let mut rho = [[C::new(0.0, 0.0); 4]; 4];
    for &r in &[0, 3] {
        for &c in &[0, 3] {
            rho[r][c] = C::new(0.5, 0.0);
        }
    }
    let t = full_t(&rho);
    assert!((t - Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, 1.0))).abs().max() < 1e-12);
    assert!((chsh_bound(&t) - 2.0 * 2f64.sqrt()).abs() < 1e-9);
    let m = approximate_tomography(&Expectations { xx: 1.0, yy: -1.0, zz: 1.0 });
    for r in 0..4 {
        for c in 0..4 {
            assert!((m[(r, c)] - rho[r][c].re).abs() < 1e-12);
        }
    }
}

#[test]
fn perfect_and_mixed_streams() {
    let perfect = vec![ShotRecord::new(1, 1, true); 1000];
    let rep = bell_report(&perfect, false).unwrap();
    assert_eq!(rep.fidelity, 1.0);
    assert_eq!(rep.yield_, 1.0);
    assert!((rep.chsh_lower_bound - 2.828427).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sign = |b: bool| if b { 1 } else { -1 };
    let mixed: Vec<ShotRecord> = (0..100_000).map(|_| ShotRecord::new(sign(rng.gen()), sign(rng.gen()), true)).collect();
    let rep = bell_report(&mixed, true).unwrap();
    assert!((rep.fidelity - 0.25).abs() < 0.01, "F = {}", rep.fidelity);
}

#[test]
fn empty_kept_set_is_an_error() {
    let shots = vec![ShotRecord::new(1, 1, false); 10];
    assert!(bell_report(&shots, true).is_err());
    assert!(bell_report(&[], false).is_err());
}

#[test]
fn crossing_and_fit_on_synthetic_curves() {
    // y = (p/0.003)^k crosses for every k at p = 0.003.
    let ps = [1e-3, 2e-3, 4e-3, 8e-3];
    let curve = |k: f64| ps.iter().map(|&p| (p, 0.1 * (p / 3e-3f64).powf(k))).collect::<Vec<_>>();
    let x = crossing_point(&curve(2.0), &curve(3.0)).unwrap();
    assert!((x - 3e-3).abs() < 1e-9);
    let fit = fit_power_law(&curve(2.5)).unwrap();
    assert!((fit.slope - 2.5).abs() < 1e-9);
    assert!(fit_power_law(&curve(2.5)[..2]).is_err());
}

fn pm() -> impl Strategy<Value = i8> {
    prop_oneof![Just(1i8), Just(-1i8)]
}

proptest! {
    #[test]
    fn yy_identity_in_reports(shots in prop::collection::vec((pm(), pm(), any::<bool>()), 1..200)) {
        let recs: Vec<ShotRecord> = shots.iter().map(|&(x, z, k)| ShotRecord::new(x, z, k)).collect();
        for r in &recs {
            prop_assert_eq!(r.yy, shot_yy(r.xx, r.zz));
        }
        let rep = bell_report(&recs, false).unwrap();
        let e = rep.exps;
        prop_assert!((rep.fidelity - (1.0 + e.xx - e.yy + e.zz) / 4.0).abs() < 1e-15);
        prop_assert!(e.xx.abs() <= 1.0 && e.yy.abs() <= 1.0 && e.zz.abs() <= 1.0);
        let fails = recs.iter().filter(|r| r.xx != 1 || r.zz != 1).count();
        prop_assert_eq!(rep.n_fail, fails);
    }

    #[test]
    fn chsh_ignores_signs_and_permutations(
        v in prop::array::uniform9(-1.0f64..1.0),
        signs in prop::array::uniform6(any::<bool>()),
        rp in 0usize..6,
        cp in 0usize..6,
    ) {
        let t = Matrix3::from_row_slice(&v);
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let s = |b: bool| if b { -1.0 } else { 1.0 };
        let u = Matrix3::from_fn(|r, c| {
            s(signs[r]) * s(signs[3 + c]) * t[(perms[rp][r], perms[cp][c])]
        });
        prop_assert!((chsh_bound(&t) - chsh_bound(&u)).abs() < 1e-9);
    }

    #[test]
    fn tomography_has_unit_trace(xx in -1.0f64..1.0, yy in -1.0f64..1.0, zz in -1.0f64..1.0) {
        let m: Matrix4<f64> = approximate_tomography(&Expectations { xx, yy, zz });
        prop_assert!((m.trace() - 1.0).abs() < 1e-12);
        prop_assert!((m - m.transpose()).abs().max() < 1e-15);
    }
}

#[test]
fn tomography_of_zero_is_maximally_mixed() {
    let m = approximate_tomography(&Expectations { xx: 0.0, yy: 0.0, zz: 0.0 });
    assert_eq!(m, Matrix4::identity() / 4.0);
}
