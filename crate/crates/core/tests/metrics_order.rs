use qrobust_core::metrics::{self, MetricReport};
use qrobust_core::{Ansatz, AnsatzKind, StateVector};

#[test]
fn entanglement_ranks_no_ent_lowest() {
    let mut q = Vec::new();
    for kind in AnsatzKind::ALL {
        let a = Ansatz::build(kind, 4, 31).unwrap();
        q.push((kind, metrics::meyer_wallach(&a, 200, 5).unwrap()));
    }
    assert!(q[0].1.abs() < 1e-10);
    for &(kind, v) in &q[1..] {
        assert!(v > 0.0 && v <= 1.0, "{kind}: {v}");
    }
}

#[test]
fn unentangled_family_is_least_expressive() {
    let none = metrics::expressibility_kl(AnsatzKind::NoEnt, 4, 500, 75, 42).unwrap();
    let full = metrics::expressibility_kl(AnsatzKind::ZzFull, 4, 500, 75, 42).unwrap();
    assert!(none >= full, "{none} < {full}");
}

#[test]
fn haar_random_states_score_near_zero() {
    // Gaussian amplitudes normalized give Haar states; KL should be small
    use normal::gaussian;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut state = || {
        let amps: Vec<_> = (0..16)
            .map(|_| num_complex::Complex64::new(gaussian(&mut rng), gaussian(&mut rng)))
            .collect();
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amplitudes(amps.into_iter().map(|a| a / n).collect()).unwrap()
    };
    let fids: Vec<f64> = (0..4000)
        .map(|_| {
            let (a, b) = (state(), state());
            a.amplitudes()
                .iter()
                .zip(b.amplitudes())
                .map(|(x, y)| x.conj() * y)
                .sum::<num_complex::Complex64>()
                .norm_sqr()
        })
        .collect();
    let kl = metrics::kl_divergence(
        &metrics::fidelity_histogram(&fids, 25),
        &metrics::haar_bin_probabilities(4, 25),
    );
    assert!(kl < 0.05, "{kl}");
}

mod normal {
    use rand::Rng;

    pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

#[test]
fn report_is_reproducible() {
    let a = Ansatz::build(AnsatzKind::ZzStar, 4, 9).unwrap();
    let r1 = MetricReport::compute(&a, 100, 30, 1).unwrap();
    assert_eq!(r1, MetricReport::compute(&a, 100, 30, 1).unwrap());
    assert_eq!(
        r1.csv_row().split(',').count(),
        MetricReport::CSV_HEADER.split(',').count()
    );
}
