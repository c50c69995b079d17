use dctneuron::signal::{
    demap, map_bits, map_block, ofdm_demodulate, ofdm_modulate, ofdm_modulate_raw, Constellation, Dft, OfdmConfig,
    SymbolGrid,
};
use dctneuron::Complex64;
use proptest::prelude::*;

fn bits_strategy(order: usize, symbols: usize) -> impl Strategy<Value = Vec<u8>> {
    let k = order.trailing_zeros() as usize;
    proptest::collection::vec(0u8..2, k * symbols)
}

proptest! {
    #[test]
    fn map_demap_round_trip(order in prop::sample::select(vec![4usize, 16, 64]), symbols in 1usize..64, seed in any::<u64>()) {
        let k = order.trailing_zeros() as usize;
        let bits: Vec<u8> = (0..k * symbols).map(|i| ((seed >> (i % 64)) & 1) as u8 ^ (i % 3 == 0) as u8).collect();
        let grid = map_bits(&bits, order).unwrap();
        prop_assert_eq!(demap(&grid, order).unwrap(), bits);
    }

    #[test]
    fn parseval(values in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
        let data: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let energy: f64 = data.iter().map(|v| v.norm_sqr()).sum();
        let mut f = data.clone();
        Dft::new(64).forward(&mut f);
        let energy_f: f64 = f.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((energy - energy_f).abs() <= 1e-10 * energy.max(1.0));
    }

    #[test]
    fn modulated_peak_is_one(bits in bits_strategy(16, 64)) {
        let cfg = OfdmConfig::new(64, 4, 16).unwrap();
        let x = ofdm_modulate(&map_block(&bits, &cfg).unwrap(), &cfg).unwrap();
        prop_assert!((x.peak() - 1.0).abs() < 1e-12);
        prop_assert_eq!(x.len(), 68);
    }

    #[test]
    fn modulate_demodulate_round_trip(bits in bits_strategy(16, 32)) {
        let cfg = OfdmConfig::new(32, 3, 16).unwrap();
        let grid = map_block(&bits, &cfg).unwrap();
        let x = ofdm_modulate(&grid, &cfg).unwrap();
        let back = ofdm_demodulate(&x, &cfg).unwrap();
        for (a, b) in back.values.iter().zip(&grid.values) {
            prop_assert!((a * x.norm_scale - b).norm() < 1e-10);
        }
    }

    #[test]
    fn decisions_are_idempotent(re in -1.5f64..1.5, im in -1.5f64..1.5) {
        let cons = Constellation::new(16).unwrap();
        let d = cons.decide(Complex64::new(re, im));
        prop_assert_eq!(cons.decide(d), d);
        prop_assert!(cons.points().contains(&d));
    }
}

#[test]
fn unit_average_energy() {
    for order in [4, 16, 64] {
        let pts = Constellation::new(order).unwrap().points();
        let e: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        assert!((e - 1.0).abs() < 1e-12, "order {order}: {e}");
    }
}

#[test]
fn gray_neighbours_differ_in_one_bit() {
    let cons = Constellation::new(16).unwrap();
    let d = 2.0 * cons.half_min_distance();
    let mut bits_of = std::collections::HashMap::new();
    for v in 0..16u8 {
        let b: Vec<u8> = (0..4).map(|i| (v >> (3 - i)) & 1).collect();
        let p = cons.map(&b);
        bits_of.insert((format!("{:.6}", p.re), format!("{:.6}", p.im)), b);
    }
    let pts = cons.points();
    for p in &pts {
        for q in &pts {
            if ((p - q).norm() - d).abs() < 1e-9 {
                let a = &bits_of[&(format!("{:.6}", p.re), format!("{:.6}", p.im))];
                let b = &bits_of[&(format!("{:.6}", q.re), format!("{:.6}", q.im))];
                assert_eq!(a.iter().zip(b).filter(|(x, y)| x != y).count(), 1);
            }
        }
    }
}

#[test]
fn cyclic_prefix_copies_the_tail() {
    let cfg = OfdmConfig::new(16, 4, 4).unwrap();
    let grid = SymbolGrid::new((0..16).map(|k| Complex64::new(k as f64, -(k as f64))).collect());
    let raw = ofdm_modulate_raw(&grid, &cfg, &Dft::new(16)).unwrap();
    assert_eq!(&raw[..4], &raw[16..20]);
}

#[test]
fn wrong_lengths_are_rejected() {
    let cfg = OfdmConfig::new(16, 4, 16).unwrap();
    assert!(map_block(&[0; 7], &cfg).is_err());
    assert!(ofdm_modulate(&SymbolGrid::zeros(15), &cfg).is_err());
    assert!(OfdmConfig::new(16, 16, 16).is_err());
    assert!(OfdmConfig::new(16, 2, 8).is_err());
}
