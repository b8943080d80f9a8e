use coastseg::color::rgb_to_hsv;
use coastseg::components::{connected_components_2d, Connectivity};
use coastseg::losses::{loss_robust, HsvPriorParams, LossConfig, LossWeights};
use coastseg::metrics::{evaluate, Rho};
use coastseg::morphology::{coastline_band, dilate, erode, BinaryMask};
use coastseg::synth::{generate, make_benchmark, SceneSpec};
use coastseg::train::{train, TrainConfig};
use coastseg::{Grid2D, LabelMask, ProbMask, RgbImage};
use proptest::prelude::*;

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| {
        prop::collection::vec(any::<bool>(), h * w)
            .prop_map(move |bits| BinaryMask::from_fn(h, w, |i, j| bits[i * w + j]))
    })
}

fn transpose(m: &BinaryMask) -> BinaryMask {
    let (h, w) = m.dims();
    BinaryMask::from_fn(w, h, |i, j| m.is_set(j, i))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dilation_and_erosion_bracket_the_mask(m in mask_strategy(14), k in prop::sample::select(vec![1usize, 3, 5, 7])) {
        let d = dilate(&m, k).unwrap();
        let e = erode(&m, k).unwrap();
        prop_assert!(m.is_subset_of(&d));
        prop_assert!(e.is_subset_of(&m));
        // Erosion is dilation of the complement, complemented.
        prop_assert_eq!(e, dilate(&m.complement(), k).unwrap().complement());
    }

    #[test]
    fn coastline_is_where_both_classes_meet(m in mask_strategy(12), r in 1usize..3) {
        let k = 2 * r + 1;
        let band = coastline_band(&m, k).unwrap().to_mask();
        let (h, w) = m.dims();
        for i in 0..h {
            for j in 0..w {
                let mut seen = [false; 2];
                for a in i.saturating_sub(r)..(i + r + 1).min(h) {
                    for b in j.saturating_sub(r)..(j + r + 1).min(w) {
                        seen[usize::from(m.is_set(a, b))] = true;
                    }
                }
                prop_assert_eq!(band.is_set(i, j), seen[0] && seen[1], "pixel ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn component_statistics_survive_a_different_scan_order(m in mask_strategy(16)) {
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let a = connected_components_2d(&m, conn);
            let b = connected_components_2d(&transpose(&m), conn);
            prop_assert_eq!(a.component_count(), b.component_count());
            let mut x = a.areas().to_vec();
            let mut y = b.areas().to_vec();
            x.sort_unstable();
            y.sort_unstable();
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn every_loss_term_is_non_negative(seed in any::<u64>(), side in 3usize..10) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mask = ProbMask::new(Grid2D::from_fn(side, side, |_, _| rng.random())).unwrap();
        let labels = LabelMask::new(Grid2D::from_fn(side, side, |_, _| f64::from(u8::from(rng.random_bool(0.5))))).unwrap();
        let img = RgbImage::from_fn(side, side, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let hsv = rgb_to_hsv(&img);
        let params = HsvPriorParams { alpha_h: rng.random_range(-3.0..3.0), beta: rng.random_range(-1.0..1.0), ..Default::default() };
        let cfg = LossConfig { sea_min_area: 2, ..LossConfig::default().with_weights(LossWeights { ce: 1.0, hsv: 1.0, coast: 1.0, conn: 1.0, sea: 1.0 }) };
        let b = loss_robust(&mask, &labels, &hsv, &params, &cfg).unwrap();
        for v in [b.l_ce, b.l_hsv, b.l_coast, b.l_conn, b.l_sea, b.l_robust, b.l_smooth] {
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }

    #[test]
    fn evaluate_ignores_joint_pixel_order(bits in prop::collection::vec((any::<bool>(), 0.0f64..1.0), 1..60), shift in 0usize..60) {
        let n = bits.len();
        let labels = LabelMask::new(Grid2D::new(1, n, bits.iter().map(|b| f64::from(u8::from(b.0))).collect()).unwrap()).unwrap();
        let mask = ProbMask::new(Grid2D::new(1, n, bits.iter().map(|b| b.1).collect()).unwrap()).unwrap();
        let rot = |v: &[f64]| { let mut v = v.to_vec(); v.rotate_left(shift % n); v };
        let labels_r = LabelMask::new(Grid2D::new(1, n, rot(labels.values())).unwrap()).unwrap();
        let mask_r = ProbMask::new(Grid2D::new(1, n, rot(mask.values())).unwrap()).unwrap();
        prop_assert_eq!(evaluate(&mask, &labels, 0.5).unwrap(), evaluate(&mask_r, &labels_r, 0.5).unwrap());
    }

    #[test]
    fn pearson_is_invariant_under_positive_affine_maps(xs in prop::collection::vec(0.0f64..1.0, 3..40), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| if i % 2 == 0 { x * 0.5 } else { 1.0 - x }).collect();
        let r1 = Rho::from_samples(&xs, &ys);
        let r2 = Rho::from_samples(&xs.iter().map(|x| a * x + b).collect::<Vec<_>>(), &ys);
        prop_assert_eq!(r1.degenerate, r2.degenerate);
        prop_assert!((r1.rho - r2.rho).abs() < 1e-9);
    }
}

#[test]
fn flat_scene_is_half_water() {
    let (_, labels) = generate(&SceneSpec::flat(10, 7, 1)).unwrap();
    assert_eq!(labels.water_count(), 35);
}

#[test]
#[allow(clippy::needless_range_loop)]
fn water_pixels_center_on_the_requested_colour() {
    let mut spec = SceneSpec::flat(40, 40, 5);
    spec.jitter = 0.02;
    let (img, labels) = generate(&spec).unwrap();
    let hsv = rgb_to_hsv(&img);
    let (h, w) = labels.dims();
    let mut sums = [0.0; 3];
    let mut n = 0.0;
    for i in 0..h {
        for j in 0..w {
            if labels.get(i, j) == 1.0 {
                let p = hsv.pixel(i, j);
                #[allow(clippy::needless_range_loop)]
                for c in 0..3 {
                    sums[c] += p[c];
                }
                n += 1.0;
            }
        }
    }
    for c in 0..3 {
        // Jitter is uniform in +-0.02; 8-bit quantization adds at most about 1/255 per channel.
        assert!(
            (sums[c] / n - spec.water_hsv[c]).abs() < 0.02,
            "channel {c}"
        );
    }
}

#[test]
fn training_is_bit_reproducible() {
    let ds = make_benchmark(8, 0.75, 11).unwrap();
    let cfg = TrainConfig {
        epochs: 8,
        batch_size: 3,
        lipschitz_trials: 20,
        ..Default::default()
    };
    let (m1, r1) = train(&ds, &cfg).unwrap();
    let (m2, r2) = train(&ds, &cfg).unwrap();
    assert_eq!(m1, m2);
    // NaN-free reports compare exactly.
    assert_eq!(r1, r2);
}
