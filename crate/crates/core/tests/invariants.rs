//! Property-based invariants over random shapes, seeds and parameters.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use freqdeblur_core::attention::{fsas_forward, FftGranularity, FsasParams};
use freqdeblur_core::dataio::{gaussian_kernel, motion_kernel, psnr, Checkpoint, EntryData};
use freqdeblur_core::ffn::{dffn_forward, spectral_filter, DffnParams};
use freqdeblur_core::ops::{
    conv_depthwise3x3, conv_pointwise, fold_patches, layer_norm, softmax, unfold_patches,
};
use freqdeblur_core::params::materialize;
use freqdeblur_core::spectral::{circular_cross_correlate_oracle, correlate, fft2, ifft2};
use freqdeblur_core::training::{cosine_lr, loss_value};
use freqdeblur_core::{Eager, ParameterStore, Tensor};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_t(shape: &[usize], seed: u64) -> Tensor<f64> {
    Tensor::uniform(shape, -1.0, 1.0, &mut rng(seed)).unwrap()
}

fn rel(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.max_abs_diff(b).unwrap() / b.max_abs().max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fold_inverts_unfold(b in 1usize..3, c in 1usize..4, h in 2usize..30, w in 2usize..30, patch in prop::sample::select(vec![1usize, 2, 4, 8]), seed: u64) {
        prop_assume!(h.div_ceil(patch) * patch - h < h && w.div_ceil(patch) * patch - w < w);
        let x = rand_t(&[b, c, h, w], seed);
        let (tiles, layout) = unfold_patches(&x, patch).unwrap();
        let back = fold_patches(&tiles, &layout).unwrap();
        prop_assert_eq!(back.data(), x.data());
    }

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts(rows in 1usize..6, n in 1usize..20, shift in -50.0f64..50.0, seed: u64) {
        let x = Tensor::<f64>::uniform(&[rows, n], -10.0, 10.0, &mut rng(seed)).unwrap();
        let y = softmax(&x).unwrap();
        for r in y.data().chunks(n) {
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let ys = softmax(&x.map(|v| v + shift)).unwrap();
        prop_assert!(ys.max_abs_diff(&y).unwrap() < 1e-6);
    }

    #[test]
    fn layer_norm_is_affine_invariant(half in 1usize..4, a in 1.0f64..20.0, shift in -5.0f64..5.0, seed: u64) {
        // alternating signs with magnitude >= 0.5 keep every pixel's channel
        // variance well above the normalization epsilon
        let c = 2 * half;
        let mag = Tensor::<f64>::uniform(&[1, c, 5, 7], 0.5, 1.0, &mut rng(seed)).unwrap();
        let x = Tensor::from_fn(&[1, c, 5, 7], |i| if i[1] % 2 == 0 { mag.get(i) } else { -mag.get(i) }).unwrap();
        let ones = Tensor::<f64>::ones(&[c]).unwrap();
        let zeros = Tensor::<f64>::zeros(&[c]).unwrap();
        let y = layer_norm(&x, &ones, &zeros).unwrap();
        let y2 = layer_norm(&x.map(|v| a * v + shift), &ones, &zeros).unwrap();
        prop_assert!(y.max_abs_diff(&y2).unwrap() < 1e-5);
    }

    #[test]
    fn convs_are_linear(cin in 1usize..5, cout in 1usize..5, alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed: u64) {
        let x = rand_t(&[2, cin, 6, 9], seed);
        let y = rand_t(&[2, cin, 6, 9], seed ^ 1);
        let wp = rand_t(&[cout, cin, 1, 1], seed ^ 2);
        let wd = rand_t(&[cin, 1, 3, 3], seed ^ 3);
        let mix = x.scale(alpha).add(&y.scale(beta)).unwrap();
        let pw = |t: &Tensor<f64>| conv_pointwise(t, &wp, None).unwrap();
        let dw = |t: &Tensor<f64>| conv_depthwise3x3(t, &wd, None).unwrap();
        let lhs = pw(&mix);
        let rhs = pw(&x).scale(alpha).add(&pw(&y).scale(beta)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-5);
        let lhs = dw(&mix);
        let rhs = dw(&x).scale(alpha).add(&dw(&y).scale(beta)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-5);
    }

    #[test]
    fn correlation_matches_oracle(log_h in 0u32..5, log_w in 0u32..5, seed: u64) {
        let shape = [1usize << log_h, 1usize << log_w];
        let a = rand_t(&shape, seed);
        let b = rand_t(&shape, seed ^ 7);
        prop_assert!(rel(&correlate(&a, &b).unwrap(), &circular_cross_correlate_oracle(&b, &a).unwrap()) < 1e-10);
        let a32 = a.cast::<f32>();
        let b32 = b.cast::<f32>();
        let got = correlate(&a32, &b32).unwrap().cast::<f64>();
        prop_assert!(rel(&got, &circular_cross_correlate_oracle(&b, &a).unwrap()) < 1e-5);
    }

    #[test]
    fn spectra_of_real_planes_are_hermitian_and_keep_energy(h in 1usize..20, w in 1usize..20, seed: u64) {
        let x = rand_t(&[h, w], seed);
        let f = fft2(&x).unwrap();
        let (fh, fw) = (f.shape()[0], f.shape()[1]);
        let d = f.data();
        let scale = d.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for u in 0..fh {
            for v in 0..fw {
                let m = d[((fh - u) % fh) * fw + (fw - v) % fw].conj();
                prop_assert!((d[u * fw + v] - m).norm() <= 1e-5 * scale);
            }
        }
        let spatial: f64 = x.data().iter().map(|v| v * v).sum();
        let freq: f64 = d.iter().map(|c| c.norm_sqr()).sum::<f64>() / (fh * fw) as f64;
        prop_assert!((spatial - freq).abs() <= 1e-5 * spatial);
        prop_assert!(rel(&ifft2(&f).unwrap(), &x) < 1e-10);
    }

    #[test]
    fn single_and_double_precision_blocks_agree(c in 1usize..4, seed: u64) {
        let specs = FsasParams::<()>::specs("f", c);
        let store: ParameterStore<f64> = materialize(&specs, &mut rng(seed)).unwrap();
        let x = rand_t(&[1, c, 16, 16], seed ^ 9);
        let p64 = FsasParams::bind(&store, "f", 8, FftGranularity::Patch).unwrap();
        let s32 = store.cast::<f32>();
        let p32 = FsasParams::bind(&s32, "f", 8, FftGranularity::Patch).unwrap();
        let y64 = fsas_forward(&x, &p64).unwrap();
        let y32 = fsas_forward(&x.cast::<f32>(), &p32).unwrap().cast::<f64>();
        prop_assert!(rel(&y32, &y64) < 1e-4);

        let dspecs = DffnParams::<()>::specs("d", 2 * c, 2, 8).unwrap();
        let mut ds: ParameterStore<f64> = materialize(&dspecs, &mut rng(seed ^ 3)).unwrap();
        for v in ds.get_mut("d.quant_w").unwrap().data_mut() {
            *v = 0.5 + 0.25 * v.sin();
        }
        let xd = rand_t(&[1, 2 * c, 12, 20], seed ^ 5);
        let d64 = dffn_forward(&xd, &DffnParams::bind(&ds, "d", 8).unwrap()).unwrap();
        let ds32 = ds.cast::<f32>();
        let d32 = dffn_forward(&xd.cast::<f32>(), &DffnParams::bind(&ds32, "d", 8).unwrap()).unwrap().cast::<f64>();
        prop_assert!(rel(&d32, &d64) < 1e-4);
    }

    #[test]
    fn spectral_filter_is_linear_and_contractive(c in 1usize..4, alpha in -2.0f64..2.0, seed: u64) {
        let x = rand_t(&[1, c, 16, 16], seed);
        let y = rand_t(&[1, c, 16, 16], seed ^ 1);
        let w = Tensor::<f64>::uniform(&[c, 8, 8], -1.0, 1.0, &mut rng(seed ^ 2)).unwrap();
        let f = |t: &Tensor<f64>| spectral_filter(&mut Eager, t, &w, 8).unwrap();
        let lhs = f(&x.scale(alpha).add(&y).unwrap());
        let rhs = f(&x).scale(alpha).add(&f(&y)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-5);
        let (xt, _) = unfold_patches(&x, 8).unwrap();
        let (ft, _) = unfold_patches(&f(&x), 8).unwrap();
        for (a, b) in xt.data().chunks(64).zip(ft.data().chunks(64)) {
            let ea: f64 = a.iter().map(|v| v * v).sum();
            let eb: f64 = b.iter().map(|v| v * v).sum();
            prop_assert!(eb <= ea + 1e-5);
        }
    }

    #[test]
    fn blur_kernels_are_nonnegative_and_normalized(sigma in 0.5f64..3.0, length in 3.0f64..15.0, angle in 0.0f64..std::f64::consts::PI) {
        for k in [gaussian_kernel(sigma).unwrap(), motion_kernel(length, angle).unwrap()] {
            prop_assert!(k.data().iter().all(|&v| v >= 0.0));
            prop_assert!((k.sum() - 1.0).abs() < 1e-6);
            prop_assert!(k.shape()[0] % 2 == 1 && k.shape()[0] == k.shape()[1]);
        }
    }

    #[test]
    fn psnr_falls_as_noise_grows(seed: u64, a in 0.01f64..0.1) {
        let x = Tensor::<f64>::uniform(&[3, 8, 8], 0.0, 1.0, &mut rng(seed)).unwrap();
        let noise = rand_t(&[3, 8, 8], seed ^ 1);
        let p: Vec<f64> = [a, 2.0 * a, 4.0 * a]
            .iter()
            .map(|&s| psnr(&x, &x.add(&noise.scale(s)).unwrap(), 1.0).unwrap())
            .collect();
        prop_assert!(p[0] > p[1] && p[1] > p[2]);
        prop_assert!(psnr(&x, &x, 1.0).unwrap().is_infinite());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(shape in prop::collection::vec(1usize..5, 1..6), seed: u64, bytes in prop::collection::vec(any::<u8>(), 0..32)) {
        let mut r = rng(seed);
        let t64 = Tensor::<f64>::uniform(&shape, -1e3, 1e3, &mut r).unwrap();
        let t32 = Tensor::<f32>::uniform(&shape, -1e3, 1e3, &mut r).unwrap();
        let mut ck = Checkpoint::default();
        ck.push_tensor("a", &t64);
        ck.push_tensor("b", &t32);
        ck.push_bytes("meta.raw", bytes.clone());
        let back = Checkpoint::decode(&ck.encode().unwrap()).unwrap();
        prop_assert_eq!(&back, &ck);
        match &back.get("a").unwrap().data {
            EntryData::F64(v) => prop_assert!(v.iter().zip(t64.data()).all(|(p, q)| p.to_bits() == q.to_bits())),
            _ => prop_assert!(false, "dtype changed"),
        }
        prop_assert_eq!(&back.get("meta.raw").unwrap().data, &EntryData::Bytes(bytes));
    }

    #[test]
    fn schedule_is_monotone_and_bounded(total in 1usize..400, lo in 0.0f64..1e-4, span in 0.0f64..1e-2) {
        let hi = lo + span;
        let mut prev = f64::INFINITY;
        for s in 0..=total {
            let lr = cosine_lr(s, total, hi, lo);
            prop_assert!(lr <= prev && lr >= lo && lr <= hi);
            prev = lr;
        }
        prop_assert_eq!(cosine_lr(0, total, hi, lo), hi);
        prop_assert_eq!(cosine_lr(total, total, hi, lo), lo);
    }

    #[test]
    fn loss_is_nonnegative_and_zero_only_on_equality(seed: u64, weight in 0.0f64..1.0) {
        let a = rand_t(&[1, 3, 8, 8], seed);
        let b = rand_t(&[1, 3, 8, 8], seed ^ 1);
        prop_assert!(loss_value(&a, &b, weight).unwrap() > 0.0);
        prop_assert_eq!(loss_value(&a, &a, weight).unwrap(), 0.0);
    }
}
