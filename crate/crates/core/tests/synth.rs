use probekit::kinetics::RateSet;
use probekit::synth::{expected_curve, sample_histogram, AcquisitionConfig};

#[test]
fn per_bin_means_match_expected_curve() {
    let rates = RateSet::new(1.1, 0.06, 0.005);
    let acq = AcquisitionConfig::covering(25.0, 100)
        .with_total_photons(&rates, 2e4)
        .unwrap()
        .with_background(0.5);
    let mu = expected_curve(&rates, &acq).unwrap();
    let n_seeds = 10_000;
    let mut sums = vec![0.0; mu.len()];
    for seed in 0..n_seeds {
        let h = sample_histogram(&rates, &acq.with_seed(seed)).unwrap();
        for (s, c) in sums.iter_mut().zip(&h.counts) {
            *s += c;
        }
    }
    let n = n_seeds as f64;
    let ok = sums
        .iter()
        .zip(&mu)
        .filter(|(s, m)| (*s / n - *m).abs() <= 3.0 * (*m / n).sqrt())
        .count();
    assert!(ok as f64 >= 0.99 * mu.len() as f64, "{ok} of {} bins within 3 SE", mu.len());
}

#[test]
fn expected_curve_never_below_background() {
    let rates = RateSet::new(0.3, 0.2, 0.05);
    let acq = AcquisitionConfig::covering(50.0, 500).with_background(2.0);
    assert!(expected_curve(&rates, &acq).unwrap().iter().all(|&m| m >= 2.0));
}
