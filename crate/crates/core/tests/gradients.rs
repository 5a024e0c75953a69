mod support;

use qrobust_core::classical::{self, ConvLayer, DenseHead};
use qrobust_core::quanv;
use qrobust_core::{Ansatz, AnsatzKind, Differentiable, Extractor, FeatureMap, Image, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

const H: f64 = 1e-5;

fn random_image(rng: &mut ChaCha8Rng) -> Image {
    // keep pixels away from the box edges so x ± h stays valid
    let px = (0..784).map(|_| rng.gen_range(0.01..0.99)).collect();
    Image::new(28, 28, px, rng.gen_range(0..10)).unwrap()
}

fn random_upstream(rng: &mut ChaCha8Rng) -> FeatureMap {
    FeatureMap::from_vec(
        14,
        14,
        4,
        (0..784).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn nudge(img: &Image, pixel: usize, delta: f64) -> Image {
    let mut px = img.pixels().to_vec();
    px[pixel] += delta;
    img.with_pixels(px).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn quanv_forward_matches_kronecker_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (i, kind) in AnsatzKind::ALL.iter().enumerate() {
        let ansatz = Ansatz::build(*kind, 4, i as u64).unwrap();
        let img = random_image(&mut rng);
        let f = quanv::quanv_forward(&img, &ansatz).unwrap();
        for r in (0..14).step_by(3) {
            for c in (0..14).step_by(4) {
                let patch = [
                    img.pixel(2 * r, 2 * c),
                    img.pixel(2 * r, 2 * c + 1),
                    img.pixel(2 * r + 1, 2 * c),
                    img.pixel(2 * r + 1, 2 * c + 1),
                ];
                let mut program: Vec<_> = patch
                    .iter()
                    .enumerate()
                    .map(|(q, p)| qrobust_core::Gate::Ry {
                        qubit: q,
                        theta: std::f64::consts::PI * p,
                    })
                    .collect();
                program.extend_from_slice(ansatz.gates());
                for k in 0..4 {
                    let z = oracle_z(&program, 4, k);
                    assert!((f.get(r, c, k) - z).abs() < 1e-10);
                }
            }
        }
        assert!(f.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn quanv_gradient_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..50 {
        let kind = AnsatzKind::ALL[case % 5];
        let ansatz = Ansatz::build(kind, 4, rng.gen()).unwrap();
        let img = random_image(&mut rng);
        let up = random_upstream(&mut rng);
        let grad = quanv::quanv_input_gradient(&img, &ansatz, &up).unwrap();
        let objective = |x: &Image| {
            dot(
                up.as_slice(),
                quanv::quanv_forward(x, &ansatz).unwrap().as_slice(),
            )
        };
        for _ in 0..20 {
            let p = rng.gen_range(0..784);
            let fd = (objective(&nudge(&img, p, H)) - objective(&nudge(&img, p, -H))) / (2.0 * H);
            assert!(
                (grad[p] - fd).abs() < 1e-6,
                "case {case} pixel {p}: {} vs {fd}",
                grad[p]
            );
        }
    }
}

#[test]
fn unentangled_filter_gradient_is_local() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ansatz = Ansatz::build(AnsatzKind::NoEnt, 4, 5).unwrap();
    let img = random_image(&mut rng);
    let (r, c) = (6, 9);
    for k in 0..4 {
        let mut up = FeatureMap::zeros(14, 14, 4);
        up.set(r, c, k, 1.0);
        let grad = quanv::quanv_input_gradient(&img, &ansatz, &up).unwrap();
        let own = (2 * r + k / 2) * 28 + 2 * c + k % 2;
        for (p, g) in grad.iter().enumerate() {
            if p != own {
                assert!(g.abs() < 1e-12, "pixel {p} leaked {g}");
            }
        }
        let fd = (quanv::quanv_forward(&nudge(&img, own, H), &ansatz)
            .unwrap()
            .get(r, c, k)
            - quanv::quanv_forward(&nudge(&img, own, -H), &ansatz)
                .unwrap()
                .get(r, c, k))
            / (2.0 * H);
        assert!((grad[own] - fd).abs() < 1e-6);
    }
}

#[test]
fn patch_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ansatz = Ansatz::build(AnsatzKind::ZzStar, 4, 8).unwrap();
    let img = random_image(&mut rng);
    let reference = quanv::quanv_forward(&img, &ansatz).unwrap();
    let mut patches = quanv::extract_patches(&img, 2, 2).unwrap();
    // reverse scan order, evaluate, then place by origin
    patches.reverse();
    let mut rebuilt = FeatureMap::zeros(14, 14, 4);
    for p in &patches {
        let mut s = quanv::encode_patch(p).unwrap();
        s.run(ansatz.gates()).unwrap();
        for (k, z) in s.expectations_z().into_iter().enumerate() {
            rebuilt.set(p.origin.0 / 2, p.origin.1 / 2, k, z);
        }
    }
    assert_eq!(rebuilt, reference);
}

#[test]
fn conv_matches_naive_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for seed in 0..10 {
        let mut kernels = [[0.0; 4]; 4];
        for w in kernels.iter_mut().flatten() {
            *w = rng.gen_range(-1.0..1.0);
        }
        let bias = [0.1, -0.2, 0.0, 0.05];
        let layer = ConvLayer::new(kernels, bias, seed);
        let img = random_image(&mut rng);
        let f = classical::conv_forward(&img, &layer).unwrap();
        for i in 0..14 {
            for j in 0..14 {
                for k in 0..4 {
                    let mut acc = bias[k];
                    for m in 0..2 {
                        for n in 0..2 {
                            acc +=
                                img.pixels()[(2 * i + m) * 28 + 2 * j + n] * kernels[k][2 * m + n];
                        }
                    }
                    assert!((f.get(i, j, k) - acc.max(0.0)).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn conv_gradient_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for seed in 0..20 {
        let layer = ConvLayer::random(seed);
        let img = random_image(&mut rng);
        let up = random_upstream(&mut rng);
        let acts = classical::conv_forward(&img, &layer).unwrap();
        let grad = classical::conv_input_gradient(&layer, &up, &acts).unwrap();
        let objective = |x: &Image| {
            dot(
                up.as_slice(),
                classical::conv_forward(x, &layer).unwrap().as_slice(),
            )
        };
        for _ in 0..20 {
            let p = rng.gen_range(0..784);
            let fd = (objective(&nudge(&img, p, H)) - objective(&nudge(&img, p, -H))) / (2.0 * H);
            assert!((grad[p] - fd).abs() < 1e-6);
        }
    }
}

#[test]
fn head_gradients_match_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let inputs = 12;
    for case in 0..20 {
        let head = DenseHead::random(inputs, 0.8, case);
        let features: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let label = rng.gen_range(0..10);
        let loss_of =
            |h: &DenseHead, x: &[f64]| -classical::softmax(&h.logits(x).unwrap())[label].ln();
        let probs = classical::softmax(&head.logits(&features).unwrap());
        let g = classical::loss_and_grads(&probs, label, &features, &head).unwrap();
        assert!((g.loss - loss_of(&head, &features)).abs() < 1e-12);

        for i in 0..inputs {
            let fd = central_difference(
                |v| {
                    let mut x = features.clone();
                    x[i] = v;
                    loss_of(&head, &x)
                },
                features[i],
                H,
            );
            assert!((g.features[i] - fd).abs() < 1e-6);
        }
        for _ in 0..15 {
            let w = rng.gen_range(0..10 * inputs);
            let fd = central_difference(
                |v| {
                    let mut ws = head.weights().to_vec();
                    ws[w] = v;
                    let h = DenseHead::from_parts(inputs, ws, head.bias().to_vec()).unwrap();
                    loss_of(&h, &features)
                },
                head.weights()[w],
                H,
            );
            assert!((g.weights[w] - fd).abs() < 1e-6);
        }
        for b in 0..10 {
            let fd = central_difference(
                |v| {
                    let mut bs = head.bias().to_vec();
                    bs[b] = v;
                    let h = DenseHead::from_parts(inputs, head.weights().to_vec(), bs).unwrap();
                    loss_of(&h, &features)
                },
                head.bias()[b],
                H,
            );
            assert!((g.bias[b] - fd).abs() < 1e-6);
        }
    }
}

#[test]
fn end_to_end_input_gradient_both_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let models = [
        Model::new(
            Extractor::Classical(ConvLayer::random(3)),
            DenseHead::random(784, 0.5, 4),
        ),
        Model::new(
            Extractor::Quantum(Ansatz::build(AnsatzKind::ZzFull, 4, 3).unwrap()),
            DenseHead::random(784, 0.5, 5),
        ),
    ];
    for model in &models {
        for _ in 0..20 {
            let img = random_image(&mut rng);
            let (loss, grad) = model.loss_and_input_gradient(&img).unwrap();
            let loss_at = |x: &Image| model.loss_and_input_gradient(x).unwrap().0;
            assert!((loss - loss_at(&img)).abs() == 0.0);
            for _ in 0..5 {
                let p = rng.gen_range(0..784);
                let fd = (loss_at(&nudge(&img, p, H)) - loss_at(&nudge(&img, p, -H))) / (2.0 * H);
                assert!(
                    (grad[p] - fd).abs() < 1e-5,
                    "{}: {} vs {fd}",
                    model.name(),
                    grad[p]
                );
            }
        }
    }
}
