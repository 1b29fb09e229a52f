use super::*;
use crate::sim::{burning_mask, run, SimParams, SimState};

fn fake_trajectory(len: usize) -> Vec<SimState> {
    let params = SimParams {
        width: 4,
        height: 3,
        density: 50.0,
        ..SimParams::default()
    };
    let mut rng = rand::rngs::mock::StepRng::new(0, 1);
    let base = crate::sim::init_forest(&params, &mut rng).unwrap();
    (0..len)
        .map(|i| {
            let mut s = base.clone();
            s.step_index = i;
            // Stamp the step into the grid so chunks can be told apart.
            *s.states.get_mut(i % 4, (i / 4) % 3) = CellState::ALL[i % 5];
            s
        })
        .collect()
}

fn starts(chunks: &[Chunk]) -> Vec<usize> {
    chunks.iter().map(|c| c.start_step).collect()
}

#[test]
fn chunking_boundaries() {
    assert_eq!(
        starts(&chunk_trajectory(&fake_trajectory(60), 0, 60, 10).unwrap()),
        vec![0]
    );
    assert_eq!(
        starts(&chunk_trajectory(&fake_trajectory(70), 0, 60, 10).unwrap()),
        vec![0, 10]
    );
    assert_eq!(
        starts(&chunk_trajectory(&fake_trajectory(69), 0, 60, 10).unwrap()),
        vec![0]
    );
    let c = chunk_trajectory(&fake_trajectory(200), 3, 60, 10).unwrap();
    assert_eq!(starts(&c), (0..=140).step_by(10).collect::<Vec<_>>());
    assert!(c.iter().all(|c| c.len() == 60 && c.sim_id == 3));
    assert_eq!(chunk_count(200, 60, 10), 15);
    assert!(chunk_trajectory(&fake_trajectory(59), 0, 60, 10)
        .unwrap()
        .is_empty());
    assert!(chunk_trajectory(&[], 0, 60, 10).unwrap().is_empty());
}

#[test]
fn chunking_rejects_zero_sizes() {
    let t = fake_trajectory(5);
    assert!(matches!(
        chunk_trajectory(&t, 0, 0, 10),
        Err(DatasetError::InvalidParam {
            field: "chunk_len",
            ..
        })
    ));
    assert!(matches!(
        chunk_trajectory(&t, 0, 60, 0),
        Err(DatasetError::InvalidParam {
            field: "stride",
            ..
        })
    ));
}

#[test]
fn consecutive_chunks_share_fifty_frames() {
    let traj = fake_trajectory(90);
    let c = chunk_trajectory(&traj, 0, 60, 10).unwrap();
    for pair in c.windows(2) {
        for t in 0..50 {
            assert_eq!(pair[0].frame_codes(t + 10), pair[1].frame_codes(t));
        }
        assert_ne!(pair[0].frame_codes(0), pair[1].frame_codes(0));
    }
    assert_eq!(c[1].grid(5), traj[15].states);
}

#[test]
fn empty_grid_renders_black() {
    let g = Grid::new(5, 4, CellState::Empty);
    let f = render_rgb(&g, &Palette::default());
    assert!(f.data().iter().all(|&v| v == 0));
    assert_eq!((f.width(), f.height()), (5, 4));
}

#[test]
fn single_tree_is_the_only_lit_pixel() {
    let mut g = Grid::new(3, 3, CellState::Empty);
    *g.get_mut(0, 0) = CellState::Tree;
    let f = render_rgb(&g, &Palette::default());
    let lit: Vec<_> = (0..3)
        .flat_map(|y| (0..3).map(move |x| (x, y)))
        .filter(|&(x, y)| f.pixel(x, y) != [0, 0, 0])
        .collect();
    assert_eq!(lit, vec![(0, 0)]);
    assert_eq!(f.pixel(0, 0), [0, 153, 0]);
}

#[test]
fn render_decode_round_trip() {
    let cells: Vec<CellState> = (0..20).map(|i| CellState::ALL[(i * 7) % 5]).collect();
    let g = Grid::from_vec(5, 4, cells);
    let p = Palette::default();
    p.validate().unwrap();
    assert_eq!(decode_rgb(&render_rgb(&g, &p), &p).unwrap(), g);
}

#[test]
fn palette_must_be_injective_with_black_empty() {
    let dup = Palette {
        ember: [255, 0, 0],
        ..Palette::default()
    };
    assert!(matches!(
        dup.validate(),
        Err(DatasetError::InvalidPalette(_))
    ));
    let lit_empty = Palette {
        empty: [1, 1, 1],
        ..Palette::default()
    };
    assert!(lit_empty.validate().is_err());
}

#[test]
fn chunk_frames_match_render() {
    let c = &chunk_trajectory(&fake_trajectory(60), 0, 60, 10).unwrap()[0];
    let p = Palette::default();
    let t = c.frames::<f64>(7..9, &p);
    assert_eq!(t.shape(), &[2, 3, 3, 4]);
    let f = render_rgb(&c.grid(8), &p);
    let expect: Vec<f64> = f.data().iter().map(|&v| v as f64 / 255.0).collect();
    assert_eq!(&t.data()[36..], &expect[..]);
}

#[test]
fn ppm_has_p6_header() {
    let f = render_rgb(&Grid::new(2, 1, CellState::Tree), &Palette::default());
    let mut buf = Vec::new();
    f.write_ppm(&mut buf).unwrap();
    assert!(buf.starts_with(b"P6\n2 1\n255\n"));
    assert_eq!(&buf[11..], &[0, 153, 0, 0, 153, 0]);
}

fn column_chunk(column: &[CellState]) -> Chunk {
    // 2x1 grid: AOI at (0,0) follows `column`, (1,0) stays empty.
    let codes = column.iter().flat_map(|s| [s.code(), 0]).collect();
    Chunk::from_codes(0, 0, 2, 1, codes).unwrap()
}

#[test]
fn labels_of_a_tree_that_never_burns() {
    let c = column_chunk(&[CellState::Tree; 60]);
    for mode in [LabelMode::Instantaneous, LabelMode::Latched] {
        assert_eq!(
            extract_aoi_labels(&c, AoiSpec::new(0, 0), mode).unwrap(),
            vec![0; 60]
        );
        assert_eq!(
            extract_aoi_labels(&c, AoiSpec::new(1, 0), mode).unwrap(),
            vec![0; 60]
        );
    }
}

#[test]
fn labels_of_a_five_step_burn() {
    let mut col = vec![CellState::Tree; 30];
    col.push(CellState::Fire);
    col.extend([CellState::Ember; 4]);
    col.resize(60, CellState::BurnedOut);
    let c = column_chunk(&col);
    let aoi = AoiSpec::new(0, 0);
    let inst = extract_aoi_labels(&c, aoi, LabelMode::Instantaneous).unwrap();
    let latched = extract_aoi_labels(&c, aoi, LabelMode::Latched).unwrap();
    for t in 0..60 {
        assert_eq!(inst[t], u8::from((30..35).contains(&t)), "t={t}");
        assert_eq!(latched[t], u8::from(t >= 30), "t={t}");
    }
}

#[test]
fn labels_reject_out_of_bounds_aoi() {
    let c = column_chunk(&[CellState::Tree; 3]);
    assert!(matches!(
        extract_aoi_labels(&c, AoiSpec::new(2, 0), LabelMode::Instantaneous),
        Err(DatasetError::AoiOutOfBounds { .. })
    ));
}

#[test]
fn labels_agree_with_burning_mask() {
    let params = SimParams {
        width: 24,
        height: 24,
        density: 80.0,
        max_steps: 80,
        rng_seed: 5,
        ..SimParams::default()
    };
    let traj = run(&params).unwrap();
    let chunks = chunk_trajectory(&traj, 0, 20, 10).unwrap();
    assert!(!chunks.is_empty());
    for c in &chunks {
        for aoi in aoi_grid_coords(24, 24).unwrap() {
            let labels = extract_aoi_labels(c, aoi, LabelMode::Instantaneous).unwrap();
            for (t, &l) in labels.iter().enumerate() {
                let mask = burning_mask(&traj[c.start_step + t]);
                assert_eq!(l, *mask.get(aoi.x, aoi.y));
            }
        }
    }
}

fn axis(coords: &[AoiSpec]) -> (Vec<usize>, Vec<usize>) {
    let mut xs: Vec<_> = coords.iter().map(|a| a.x).collect();
    let mut ys: Vec<_> = coords.iter().map(|a| a.y).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    (xs, ys)
}

#[test]
fn patch_centres() {
    let c = aoi_grid_coords(251, 251).unwrap();
    assert_eq!(c.len(), 9);
    assert!(c.contains(&AoiSpec::new(125, 125)));
    assert_eq!(axis(&c), (vec![41, 125, 209], vec![41, 125, 209]));

    let c = aoi_grid_coords(3, 3).unwrap();
    let mut all: Vec<_> = (0..3)
        .flat_map(|y| (0..3).map(move |x| AoiSpec::new(x, y)))
        .collect();
    all.sort_by_key(|a| (a.y, a.x));
    assert_eq!(c, all);

    assert_eq!(
        axis(&aoi_grid_coords(9, 9).unwrap()),
        (vec![1, 4, 7], vec![1, 4, 7])
    );
    assert!(aoi_grid_coords(2, 9).is_err());
}

#[test]
fn aoi_parses_from_text() {
    assert_eq!(
        "125,125".parse::<AoiSpec>().unwrap(),
        AoiSpec::new(125, 125)
    );
    assert_eq!(AoiSpec::new(3, 4).to_string(), "3,4");
    assert!("12".parse::<AoiSpec>().is_err());
}

fn small_config() -> DatasetConfig {
    DatasetConfig {
        sim: SimParams {
            width: 20,
            height: 20,
            density: 80.0,
            max_steps: 90,
            rng_seed: 11,
            ..SimParams::default()
        },
        train_sims: 3,
        test_sims: 2,
        chunk_len: 20,
        ..DatasetConfig::default()
    }
}

#[test]
fn generated_splits_are_disjoint_and_recountable() {
    let g = generate_dataset(&small_config(), 1).unwrap();
    let train_ids: Vec<u64> = g.train.manifest.sims.iter().map(|s| s.sim_id).collect();
    let test_ids: Vec<u64> = g.test.manifest.sims.iter().map(|s| s.sim_id).collect();
    assert_eq!(train_ids, vec![0, 1, 2]);
    assert_eq!(test_ids, vec![3, 4]);
    assert!(g.test.chunks.iter().all(|c| !train_ids.contains(&c.sim_id)));
    for ds in [&g.train, &g.test] {
        assert_eq!(ds.len(), ds.manifest.expected_chunk_count());
        assert_eq!(ds.manifest.chunks.len(), ds.len());
    }
}

#[test]
fn generation_matches_direct_simulation_and_ignores_threads() {
    let cfg = small_config();
    let one = generate_dataset(&cfg, 1).unwrap();
    let many = generate_dataset(&cfg, 3).unwrap();
    assert_eq!(one, many);

    let rec = &one.train.manifest.sims[1];
    let traj = run(&SimParams {
        rng_seed: rec.rng_seed,
        ..cfg.sim.clone()
    })
    .unwrap();
    assert_eq!(traj.len(), rec.length);
    let direct = chunk_trajectory(&traj, 1, cfg.chunk_len, cfg.stride).unwrap();
    let stored: Vec<_> = one
        .train
        .chunks
        .iter()
        .filter(|c| c.sim_id == 1)
        .cloned()
        .collect();
    assert_eq!(stored, direct);
}

#[test]
fn chunk_cap_limits_each_simulation() {
    let cfg = DatasetConfig {
        max_chunks_per_sim: Some(1),
        ..small_config()
    };
    let g = generate_dataset(&cfg, 1).unwrap();
    assert!(g.train.chunks.iter().all(|c| c.start_step == 0));
}

#[test]
fn sim_seeds_differ() {
    let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| sim_seed(7, i)).collect();
    assert_eq!(seeds.len(), 1000);
}

#[test]
fn label_maps_agree_with_aoi_labels() {
    let params = SimParams {
        width: 16,
        height: 16,
        density: 85.0,
        max_steps: 60,
        rng_seed: 2,
        ..SimParams::default()
    };
    let traj = run(&params).unwrap();
    let c = &chunk_trajectory(&traj, 0, 30, 10).unwrap()[0];
    for mode in [LabelMode::Instantaneous, LabelMode::Latched] {
        let maps = c.label_maps(5..30, mode);
        for aoi in aoi_grid_coords(16, 16).unwrap() {
            let labels = extract_aoi_labels(c, aoi, mode).unwrap();
            for t in 5..30 {
                assert_eq!(maps[(t - 5) * 256 + aoi.y * 16 + aoi.x], labels[t]);
            }
        }
    }
}
