use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use separatrix::dynsys::*;
use separatrix::integrate::*;

fn two_eq() -> Competition {
    Competition::new(CompetitionParams::two_attractors()).unwrap()
}

fn three_eq() -> Competition {
    Competition::new(CompetitionParams::three_attractors()).unwrap()
}

fn random_ic(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(0.0..10.0)).collect()
}

#[test]
fn stable_equilibrium_stays_put() {
    let sys = two_eq();
    let cfg = IntegratorConfig {
        t_max: 50.0,
        ..Default::default()
    };
    for eq in attractors(&sys) {
        let loc = eq.location.clone().unwrap();
        let traj = integrate(&sys, &loc, &cfg).unwrap();
        for s in &traj.states {
            assert!(s.distance(&loc) < cfg.eps_attr);
        }
        let label = classify_basin(&sys, &loc, &attractors(&sys), &cfg);
        assert_eq!(label, BasinLabel::Converged(eq.id));
    }
}

#[test]
fn reference_initial_conditions() {
    let cfg = IntegratorConfig::default();
    let sys = two_eq();
    let label = classify_basin(&sys, &[7.0, 8.0, 4.0], &attractors(&sys), &cfg);
    assert!(
        matches!(label, BasinLabel::Converged(EqId(3) | EqId(4))),
        "{label:?}"
    );

    let sys = three_eq();
    let label = classify_basin(&sys, &[2.0, 10.0, 6.0], &attractors(&sys), &cfg);
    assert!(
        matches!(label, BasinLabel::Converged(EqId(1) | EqId(2) | EqId(3))),
        "{label:?}"
    );

    let sys = Hilker::new(HilkerParams::reference()).unwrap();
    let label = classify_basin(&sys, &[0.05, 0.01], &attractors(&sys), &cfg);
    assert_eq!(label, BasinLabel::Converged(EqId(0)));
}

#[test]
fn halving_tolerances_barely_moves_the_endpoint() {
    let sys = two_eq();
    let cfg = IntegratorConfig {
        t_max: 20.0,
        ..Default::default()
    };
    let fine = cfg.tightened(2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let ic = random_ic(&mut rng, 3);
        let a = integrate(&sys, &ic, &cfg).unwrap();
        let b = integrate(&sys, &ic, &fine).unwrap();
        let d = a.last_state().distance(b.last_state());
        assert!(
            d < 10.0 * cfg.eps_attr,
            "ic {ic:?}: endpoints differ by {d}"
        );
    }
}

#[test]
fn trajectories_stay_nonnegative() {
    let cfg = IntegratorConfig {
        t_max: 30.0,
        ..Default::default()
    };
    let floor = -10.0 * cfg.atol;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sys in [two_eq(), three_eq()] {
        for _ in 0..25 {
            let ic = random_ic(&mut rng, 3);
            let traj = integrate(&sys, &ic, &cfg).unwrap();
            assert!(
                traj.states.iter().flatten().all(|&v| v >= floor),
                "ic {ic:?}"
            );
        }
    }
    // The Hilker model keeps the orthant only where infection cannot push
    // the prey negative; stay below the diagonal I <= P.
    let sys = Hilker::new(HilkerParams::reference()).unwrap();
    for _ in 0..25 {
        let p: f64 = rng.gen_range(0.0..10.0);
        let i: f64 = rng.gen_range(0.0..=p.min(1.0) * 0.1);
        let traj = integrate(&sys, &[p, i], &cfg).unwrap();
        assert!(
            traj.states.iter().flatten().all(|&v| v >= floor),
            "ic {p}, {i}"
        );
    }
}

/// Tightening tolerances tenfold keeps the label of points well away from
/// the separatrix. "Well away" means every axis-aligned perturbation of
/// size `10 eps_attr` classifies like the point itself.
#[test]
fn classification_is_stable_under_tighter_tolerances() {
    let cfg = IntegratorConfig::default();
    let tight = cfg.tightened(10.0);
    let radius = 10.0 * cfg.eps_attr;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for sys in [two_eq(), three_eq()] {
        let attr = attractors(&sys);
        let mut compared = 0;
        let mut changed = 0;
        while compared < 500 {
            let ic = random_ic(&mut rng, 3);
            let label = classify_basin(&sys, &ic, &attr, &cfg);
            if label.attractor().is_none() {
                continue;
            }
            let interior = (0..3).all(|k| {
                [-radius, radius].iter().all(|&h| {
                    let mut q = ic.clone();
                    q[k] = (q[k] + h).max(0.0);
                    classify_basin(&sys, &q, &attr, &cfg) == label
                })
            });
            if !interior {
                continue;
            }
            compared += 1;
            if classify_basin(&sys, &ic, &attr, &tight) != label {
                changed += 1;
            }
        }
        assert!(
            changed * 100 < compared,
            "{changed} of {compared} labels changed"
        );
    }
}

#[test]
fn trajectory_csv_has_one_row_per_step() {
    let sys = two_eq();
    let cfg = IntegratorConfig {
        t_max: 1.0,
        ..Default::default()
    };
    let traj = integrate(&sys, &[1.0, 2.0, 3.0], &cfg).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x0,x1,x2"));
    assert_eq!(lines.count(), traj.times.len());
}
