use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sandman_core::airlink::{generate_frame, Constellation, FrameConfig, JammerKind, JammerProfile, Seed};
use sandman_core::numerics::{matmul_exact, matmul_herm_exact, matmul_ref, CMatrix, FixedFormat, FxMatrix};
use sandman_core::pe_array::{
    cannon_mm, cannon_mm_herm, mv_broadcast, run_block, throughput, throughput_of, tile_of, CycleModel, Direction,
    PEGrid, PhaseProgram,
};
use sandman_core::receiver::{detect_block, BlockInput, DetectorConfig, Step};

fn pe() -> FixedFormat {
    FixedFormat::new(14, 11).unwrap()
}

fn random_fx(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FxMatrix {
    let f = pe();
    let (lo, hi) = (f.min_mantissa(), f.max_mantissa());
    let data = (0..rows * cols)
        .map(|_| Complex::new(rng.random_range(lo..=hi), rng.random_range(lo..=hi)))
        .collect();
    FxMatrix::from_mantissas(rows, cols, f, rng.random_range(-3..=3), data).unwrap()
}

#[test]
fn cannon_matches_reference_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let model = CycleModel::default();
    for _ in 0..200 {
        let a = random_fx(&mut rng, 8, 8);
        let b = random_fx(&mut rng, 8, 8);
        let (c, cycles) = cannon_mm(&a, &b, &model).unwrap();
        assert_eq!(cycles, 7 + 8 + 7);
        assert_eq!(c, matmul_exact(&a, &b).unwrap());
        // the saturating reference sees the same values
        let CMatrix::Fixed(r) = matmul_ref(&CMatrix::Fixed(a.clone()), &CMatrix::Fixed(b.clone())).unwrap() else {
            panic!("fixed operands gave a float result");
        };
        let mut sat = Default::default();
        assert_eq!(c.requantize(r.fmt(), r.exp(), &mut sat), r);
    }
}

#[test]
fn hermitian_cannon_keeps_a_in_place() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let model = CycleModel::default();
    for _ in 0..200 {
        let a = random_fx(&mut rng, 8, 8);
        let b = random_fx(&mut rng, 8, 8);
        let (c, cycles) = cannon_mm_herm(&a, &b, &model).unwrap();
        assert_eq!(cycles, 7 + 8 + 7);
        assert_eq!(c, matmul_herm_exact(&a, &b).unwrap());

        let mut grid = PEGrid::new(1);
        grid.product_herm(&a, &b).unwrap();
        assert_eq!(grid.slices[0].a_register(), &tile_of(&a, 0, 0));
    }
}

#[test]
fn tiles_must_be_eight_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = random_fx(&mut rng, 8, 7);
    let b = random_fx(&mut rng, 7, 8);
    assert!(cannon_mm(&a, &b, &CycleModel::default()).is_err());
}

#[test]
fn broadcast_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let model = CycleModel::default();
    for _ in 0..50 {
        let e = random_fx(&mut rng, 32, 64);
        let x = random_fx(&mut rng, 64, 1);
        let j = random_fx(&mut rng, 32, 1);
        let (ex, c1) = mv_broadcast(&e, &x, Direction::Rows, &model).unwrap();
        assert_eq!(ex, matmul_exact(&e, &x).unwrap());
        assert_eq!(c1, 8 + 3);
        let (ej, c2) = mv_broadcast(&e, &j, Direction::Cols, &model).unwrap();
        assert_eq!(ej, matmul_herm_exact(&e, &j).unwrap());
        assert_eq!(c2, 8 + 3 + 2);
    }
    let e = random_fx(&mut rng, 32, 64);
    assert!(mv_broadcast(&e, &random_fx(&mut rng, 32, 1), Direction::Rows, &model).is_err());
    assert!(mv_broadcast(&e, &random_fx(&mut rng, 64, 1), Direction::Cols, &model).is_err());
}

#[test]
fn block_shapes_of_the_detector() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut grid = PEGrid::default();
    let h = random_fx(&mut rng, 32, 8);
    let s = random_fx(&mut rng, 8, 48);
    let e = random_fx(&mut rng, 32, 48);
    let yp = random_fx(&mut rng, 32, 16);
    let ph = random_fx(&mut rng, 16, 8);
    assert_eq!(grid.product(&h, &s).unwrap(), matmul_exact(&h, &s).unwrap());
    assert_eq!(grid.product(&yp, &ph).unwrap(), matmul_exact(&yp, &ph).unwrap());
    assert_eq!(grid.product_herm(&h, &e).unwrap(), matmul_herm_exact(&h, &e).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ragged_shapes_match(m in 1usize..40, n in 1usize..20, p in 1usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut grid = PEGrid::default();
        let a = random_fx(&mut rng, m, n);
        let b = random_fx(&mut rng, n, p);
        let c = random_fx(&mut rng, m, p);
        prop_assert_eq!(grid.product(&a, &b).unwrap(), matmul_exact(&a, &b).unwrap());
        prop_assert_eq!(grid.product_herm(&a, &c).unwrap(), matmul_herm_exact(&a, &c).unwrap());
    }
}

fn frames(n: u64) -> Vec<BlockInput> {
    let kinds = JammerKind::ALL;
    (0..n)
        .map(|i| {
            let c = Constellation::ALL[(i % 2) as usize];
            let cfg = FrameConfig::default().with_constellation(c);
            let jam = JammerProfile::new(kinds[(i / 2) as usize % kinds.len()]);
            let snr = -3.0 + (i % 7) as f64 * 2.0;
            BlockInput::from_frame(&generate_frame(&cfg, &jam, snr, Seed::plain(500 + i)).unwrap())
        })
        .collect()
}

#[test]
fn array_is_bit_identical_to_reference() {
    let cfg = DetectorConfig::fixed();
    let model = CycleModel::default();
    for input in frames(100) {
        let reference = detect_block(&input, &cfg).unwrap();
        let (got, _) = run_block(&input, &cfg, &model).unwrap();
        assert_eq!(got, reference);
    }
}

#[test]
fn float_mode_is_rejected() {
    let input = &frames(1)[0];
    assert!(run_block(input, &DetectorConfig::default(), &CycleModel::default()).is_err());
}

#[test]
fn cycles_follow_the_phase_program() {
    let cfg = DetectorConfig::fixed();
    let model = CycleModel::default();
    let fc = FrameConfig::default();
    let program = PhaseProgram::for_block(&fc, &cfg, &model);
    assert_eq!(program.cycles_per_iteration(), 62 + 13 + 11 + 20 + 14 + 8 + 64 + 6);
    assert_eq!(program.one_time_cycles(), 30 + 30 + 11 + 15 + 8);
    assert_eq!(program.cycles_per_block(), 94 + 10 * 198);

    for input in frames(10) {
        let (res, report) = run_block(&input, &cfg, &model).unwrap();
        if !res.degenerate_iterations.is_empty() {
            continue;
        }
        assert_eq!(report.cycles_per_block, program.cycles_per_block());
        assert_eq!(report.cycles_per_iteration, program.cycles_per_iteration());
        for ph in &program.phases {
            let calls = if ph.once { 1 } else { cfg.t_max as u64 };
            let got = report.per_phase[&ph.step];
            assert_eq!(got.calls, calls, "{}", ph.step);
        }
        assert_eq!(report.phase_cycles(Step::Residual), 620);
        assert_eq!(report.phase_cycles(Step::Gradient), 640);
        assert!(report.pe_utilization > 0.0 && report.pe_utilization <= 1.0);
    }
}

#[test]
fn block_size_and_throughput() {
    let cfg = DetectorConfig::fixed();
    let input = &frames(2)[1];
    let (_, report) = run_block(input, &cfg, &CycleModel::default()).unwrap();
    assert_eq!(report.bits_per_block, 8 * 48 * 4);

    let qpsk = FrameConfig::default();
    assert_eq!(qpsk.with_constellation(Constellation::Qpsk).bits_per_block(), 768);
    assert_eq!(qpsk.with_constellation(Constellation::Qam16).bits_per_block(), 1536);

    // 1536 bits in 1841 cycles at 320 MHz
    let r = throughput_of(1536, 1841, 320e6) / 1e6;
    assert!((r - 267.0).abs() < 0.2, "{r}");
    assert_eq!(throughput(&report, 0.0), 0.0);
    let t1 = throughput(&report, 100e6);
    let t3 = throughput(&report, 300e6);
    assert!((t3 - 3.0 * t1).abs() < 1e-6 * t3);
    let at320 = throughput(&report, 320e6) / 1e6;
    assert!((222.0..=334.0).contains(&at320), "{at320}");
}

#[test]
fn report_renders() {
    let cfg = DetectorConfig::fixed();
    let (_, report) = run_block(&frames(1)[0], &cfg, &CycleModel::default()).unwrap();
    let csv = report.to_csv();
    assert!(csv.starts_with("phase,calls,cycles,share\n"));
    assert!(csv.lines().any(|l| l.starts_with("7,10,640,")));
    assert!(csv.trim_end().ends_with(&format!("total,1,{},1.0000", report.cycles_per_block)));
    let table = report.text_table(320e6);
    assert!(table.contains("bits_per_block = 1536") || table.contains("bits_per_block = 768"));
}
