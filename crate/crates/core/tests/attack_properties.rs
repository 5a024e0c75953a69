use proptest::prelude::*;
use qrobust_core::attacks::{self, AdversarialBatch, AttackSpec};
use qrobust_core::classical::{ConvLayer, DenseHead};
use qrobust_core::{Ansatz, AnsatzKind, AttackKind, Extractor, Image, Model};

fn models() -> Vec<Model> {
    vec![
        Model::new(
            Extractor::Classical(ConvLayer::random(21)),
            DenseHead::random(784, 0.3, 22),
        ),
        Model::new(
            Extractor::Quantum(Ansatz::build(AnsatzKind::ZzLinear, 4, 21).unwrap()),
            DenseHead::random(784, 0.3, 23),
        ),
    ]
}

fn image_strategy() -> impl Strategy<Value = Image> {
    (
        prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64], 784),
        0u8..10,
    )
        .prop_map(|(px, label)| Image::new(28, 28, px, label).unwrap())
}

fn linf(a: &Image, b: &Image) -> f64 {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn adversarials_stay_in_the_box(img in image_strategy(), eps in 0.0..0.4f64, which in 0usize..2) {
        let model = &models()[which];
        for kind in AttackKind::ALL {
            let adv = attacks::generate(model, &img, &AttackSpec::with_defaults(kind, eps)).unwrap();
            prop_assert!(linf(&adv, &img) <= eps + 1e-12);
            prop_assert!(adv.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert_eq!(adv.label(), img.label());
        }
    }

    #[test]
    fn single_full_step_pgd_is_fgsm(img in image_strategy(), eps in 0.0..0.4f64, which in 0usize..2) {
        let model = &models()[which];
        let f = attacks::fgsm(model, &img, &AttackSpec::fgsm(eps)).unwrap();
        let p = attacks::pgd(model, &img, &AttackSpec { step_size: eps, iterations: 1, ..AttackSpec::pgd(eps) }).unwrap();
        prop_assert_eq!(f, p);
    }

    #[test]
    fn momentum_free_mim_is_pgd_in_direction(img in image_strategy(), eps in 0.01..0.4f64) {
        // with μ = 0 the velocity is g/‖g‖₁, whose sign equals sign(g)
        let model = &models()[0];
        let m = attacks::mim(model, &img, &AttackSpec { momentum: 0.0, iterations: 3, ..AttackSpec::mim(eps) }).unwrap();
        let p = attacks::pgd(model, &img, &AttackSpec { iterations: 3, ..AttackSpec::pgd(eps) }).unwrap();
        prop_assert_eq!(m, p);
    }
}

#[test]
fn zero_epsilon_is_identity_and_clean_accuracy() {
    let imgs: Vec<Image> = (0..10)
        .map(|i| {
            Image::new(
                28,
                28,
                (0..784)
                    .map(|p| ((p * (i + 3)) % 17) as f64 / 16.0)
                    .collect(),
                i as u8,
            )
            .unwrap()
        })
        .collect();
    for model in models() {
        let clean = attacks::accuracy(&model, &imgs).unwrap();
        for kind in AttackKind::ALL {
            for img in &imgs {
                assert_eq!(
                    &attacks::generate(&model, img, &AttackSpec::with_defaults(kind, 0.0)).unwrap(),
                    img
                );
            }
            let grid: Vec<_> = [0.0, 0.1, 0.3]
                .iter()
                .map(|&e| AttackSpec::with_defaults(kind, e))
                .collect();
            let curve =
                attacks::evaluate_robustness(&model, &model.name(), "fp", &imgs, &grid).unwrap();
            curve.check_invariants().unwrap();
            assert_eq!(curve.accuracy_at(0.0), Some(clean));
        }
    }
}

#[test]
fn persisted_batch_replays_identically() {
    let ms = models();
    let imgs: Vec<Image> = (0..6)
        .map(|i| {
            Image::new(
                28,
                28,
                (0..784).map(|p| ((p + 5 * i) % 11) as f64 / 10.0).collect(),
                i as u8,
            )
            .unwrap()
        })
        .collect();
    let spec = AttackSpec::fgsm(0.2);
    let batch =
        AdversarialBatch::generate(&ms[0], ms[0].extractor.fingerprint_bytes(), &imgs, &spec)
            .unwrap();
    let mut buf = Vec::new();
    batch.write_to(&mut buf).unwrap();
    let back = AdversarialBatch::read_from(&mut &buf[..]).unwrap();
    assert_eq!(back, batch);
    let direct = attacks::transfer_attack(&ms[0], &ms[1], &imgs, &spec).unwrap();
    assert_eq!(back.accuracy_on(&ms[1]).unwrap(), direct);
    assert!(AdversarialBatch::read_from(&mut &buf[..buf.len() - 3]).is_err());
}
