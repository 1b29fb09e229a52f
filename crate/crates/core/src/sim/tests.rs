use super::*;

fn params(w: usize, h: usize) -> SimParams {
    SimParams {
        width: w,
        height: h,
        ..SimParams::default()
    }
}

fn state_from(
    w: usize,
    h: usize,
    cells: &[(usize, usize, CellState, f64)],
    fill: CellState,
) -> SimState {
    let mut states = Grid::new(w, h, fill);
    let mut heat = Grid::new(w, h, 0.0);
    for &(x, y, s, q) in cells {
        states[(x, y)] = s;
        heat[(x, y)] = q;
    }
    SimState {
        states,
        heat,
        step_index: 0,
    }
}

#[test]
fn full_density_single_seed() {
    let p = SimParams {
        density: 100.0,
        n_seeds: 1,
        i_seed: 2.0,
        q_th: 100.0,
        ..params(20, 20)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = init_forest(&p, &mut rng).unwrap();
    assert_eq!(s.count(CellState::Fire), 1);
    assert_eq!(s.count(CellState::Tree), 399);
    for (st, q) in s.states.iter().zip(s.heat.iter()) {
        match st {
            CellState::Fire => assert_eq!(*q, 200.0),
            _ => assert_eq!(*q, 0.0),
        }
    }
    assert_eq!(s.step_index, 0);
}

#[test]
fn empty_forest_cannot_be_seeded() {
    let p = SimParams {
        density: 0.0,
        ..params(10, 10)
    };
    let err = init_forest(&p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
    assert_eq!(err, SimError::NotEnoughTrees { trees: 0, seeds: 1 });
}

#[test]
fn invalid_params_name_the_field() {
    let p = SimParams {
        density: 101.0,
        ..SimParams::default()
    };
    match p.validate() {
        Err(SimError::InvalidParam { field, .. }) => assert_eq!(field, "density"),
        other => panic!("unexpected {other:?}"),
    }
    for (p, field) in [
        (
            SimParams {
                q_th: 0.0,
                ..SimParams::default()
            },
            "q_th",
        ),
        (
            SimParams {
                q_die: -1.0,
                ..SimParams::default()
            },
            "q_die",
        ),
        (
            SimParams {
                lambda: 0.0,
                ..SimParams::default()
            },
            "lambda",
        ),
        (
            SimParams {
                radius_r: 0,
                ..SimParams::default()
            },
            "radius_r",
        ),
        (
            SimParams {
                n_seeds: 0,
                ..SimParams::default()
            },
            "n_seeds",
        ),
    ] {
        assert!(matches!(p.validate(), Err(SimError::InvalidParam { field: f, .. }) if f == field));
    }
}

#[test]
fn tree_fraction_matches_density() {
    // Binomial: sigma per 251x251 run is sqrt(.76*.24/63001) ~ 0.0017.
    let p = SimParams {
        density: 76.0,
        ..SimParams::default()
    };
    let mut total = 0.0;
    for seed in 0..100 {
        let s = init_forest(&p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let occupied = s.count(CellState::Tree) + s.count(CellState::Fire);
        total += occupied as f64 / 63001.0;
    }
    let mean = total / 100.0;
    assert!((mean - 0.76).abs() < 0.01, "mean tree fraction {mean}");
}

#[test]
fn quiet_grid_only_advances_clock() {
    let s = state_from(5, 5, &[(2, 2, CellState::Tree, 42.0)], CellState::Tree);
    let n = step(&s, &params(5, 5));
    assert_eq!(n.states, s.states);
    assert_eq!(n.heat, s.heat);
    assert_eq!(n.step_index, 1);
}

#[test]
fn heat_transfer_below_threshold() {
    let p = SimParams {
        lambda: 0.1,
        q_th: 100.0,
        ..params(2, 1)
    };
    let s = state_from(
        2,
        1,
        &[(0, 0, CellState::Fire, 300.0), (1, 0, CellState::Tree, 0.0)],
        CellState::Empty,
    );
    let n = step(&s, &p);
    assert_eq!(n.states[(1, 0)], CellState::Tree);
    assert!((n.heat[(1, 0)] - 30.0).abs() < 1e-12);
}

#[test]
fn heat_transfer_ignites() {
    let p = SimParams {
        lambda: 0.3,
        q_th: 100.0,
        ..params(3, 1)
    };
    let s = state_from(
        3,
        1,
        &[
            (0, 0, CellState::Fire, 300.0),
            (1, 0, CellState::Tree, 90.0),
            (2, 0, CellState::Ember, 200.0),
        ],
        CellState::Empty,
    );
    let n = step(&s, &p);
    assert_eq!(n.states[(1, 0)], CellState::Fire);
    assert!((n.heat[(1, 0)] - 240.0).abs() < 1e-9);
}

#[test]
fn ignition_needs_strict_excess() {
    let p = SimParams {
        lambda: 0.5,
        q_th: 100.0,
        ..params(2, 1)
    };
    let s = state_from(
        2,
        1,
        &[
            (0, 0, CellState::Ember, 100.0),
            (1, 0, CellState::Tree, 50.0),
        ],
        CellState::Empty,
    );
    let n = step(&s, &p);
    assert_eq!(n.heat[(1, 0)], 100.0);
    assert_eq!(n.states[(1, 0)], CellState::Tree);
}

#[test]
fn ember_burns_out_with_zero_heat() {
    let p = SimParams {
        q_die: 60.0,
        ..params(1, 1)
    };
    let s = state_from(1, 1, &[(0, 0, CellState::Ember, 50.0)], CellState::Empty);
    let n = step(&s, &p);
    assert_eq!(n.states[(0, 0)], CellState::BurnedOut);
    assert_eq!(n.heat[(0, 0)], 0.0);
}

#[test]
fn fire_phase_lasts_one_step() {
    let p = SimParams {
        q_die: 40.0,
        ..params(1, 1)
    };
    let s0 = state_from(1, 1, &[(0, 0, CellState::Fire, 150.0)], CellState::Empty);
    let s1 = step(&s0, &p);
    assert_eq!(s1.states[(0, 0)], CellState::Ember);
    assert_eq!(s1.heat[(0, 0)], 110.0);
    let s2 = step(&s1, &p);
    assert_eq!(s2.states[(0, 0)], CellState::Ember);
    assert_eq!(s2.heat[(0, 0)], 70.0);
}

#[test]
fn three_by_three_hand_trace() {
    // Seed Q = 2 at the centre, lambda = 1, q_th = 1, huge q_die.
    // t1: all 8 neighbours receive 2 > 1 and ignite, the centre burns out.
    // t2: the ring burns out. Nothing left burning.
    let p = SimParams {
        lambda: 1.0,
        q_th: 1.0,
        i_seed: 2.0,
        q_die: 1e6,
        max_steps: 50,
        ..params(3, 3)
    };
    let s0 = state_from(3, 3, &[(1, 1, CellState::Fire, 2.0)], CellState::Tree);
    let traj = run_from(s0, &p);
    assert_eq!(traj.len(), 3);
    assert_eq!(traj[1].count(CellState::Fire), 8);
    assert_eq!(traj[1].states[(1, 1)], CellState::BurnedOut);
    assert!(traj[2].states.iter().all(|&s| s == CellState::BurnedOut));
    assert!(!traj[2].has_burning());
}

#[test]
fn run_respects_max_steps() {
    let p = SimParams {
        density: 100.0,
        max_steps: 5,
        ..params(40, 40)
    };
    let traj = run(&p).unwrap();
    assert_eq!(traj.len(), 6);
    assert_eq!(traj.last().unwrap().step_index, 5);
    for (t, s) in traj.iter().enumerate() {
        assert_eq!(s.step_index, t);
    }
}

#[test]
fn front_moves_at_most_one_cell_per_step() {
    let p = SimParams {
        density: 100.0,
        radius_r: 1,
        rng_seed: 11,
        max_steps: 60,
        ..params(41, 41)
    };
    let traj = run(&p).unwrap();
    let seed = traj[0].states.iter().position(|s| s.is_burning()).unwrap();
    let (sx, sy) = ((seed % 41) as i64, (seed / 41) as i64);
    let reach = |s: &SimState| {
        s.states
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != CellState::Tree)
            .map(|(i, _)| {
                ((i % 41) as i64 - sx)
                    .abs()
                    .max(((i / 41) as i64 - sy).abs())
            })
            .max()
            .unwrap()
    };
    for w in traj.windows(2) {
        assert!(reach(&w[1]) <= reach(&w[0]) + 1);
    }
}

#[test]
fn burning_mask_marks_fire_and_ember() {
    let s = state_from(
        4,
        1,
        &[
            (0, 0, CellState::Fire, 1.0),
            (1, 0, CellState::Ember, 1.0),
            (2, 0, CellState::BurnedOut, 0.0),
            (3, 0, CellState::Empty, 0.0),
        ],
        CellState::Tree,
    );
    assert_eq!(burning_mask(&s).as_slice(), &[1, 1, 0, 0]);

    let trees = state_from(3, 3, &[], CellState::Tree);
    assert!(burning_mask(&trees).iter().all(|&m| m == 0));

    let p = SimParams {
        density: 100.0,
        ..params(9, 9)
    };
    let s0 = init_forest(&p, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let mask = burning_mask(&s0);
    assert_eq!(mask.iter().filter(|&&m| m == 1).count(), 1);
    let i = mask.iter().position(|&m| m == 1).unwrap();
    assert_eq!(s0.states.as_slice()[i], CellState::Fire);
}

#[test]
fn cell_codes_round_trip() {
    for s in CellState::ALL {
        assert_eq!(CellState::from_code(s.code()), Some(s));
    }
    assert_eq!(CellState::from_code(5), None);
}

#[test]
fn summary_counts_burned_cells() {
    let p = SimParams {
        lambda: 1.0,
        q_th: 1.0,
        i_seed: 2.0,
        q_die: 1e6,
        ..params(3, 3)
    };
    let s0 = state_from(
        3,
        3,
        &[(1, 1, CellState::Fire, 2.0), (0, 0, CellState::Empty, 0.0)],
        CellState::Tree,
    );
    let summary = RunSummary::of(&run_from(s0, &p));
    assert_eq!(summary.trees, 8);
    assert_eq!(summary.burned, 8);
    assert!(summary.extinguished);
    assert_eq!(summary.burned_fraction, 1.0);
}
