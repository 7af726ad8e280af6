//! Cross-module properties checked against brute-force oracles.

use causepair::cep::{load_benchmark, write_corpus};
use causepair::eval::PerturbKind;
use causepair::igci::BaseMeasure;
use causepair::kernel::{gaussian_kernel_lipschitz, hsic_biased, hsic_gamma_pvalue, median_bandwidth};
use causepair::methods::Method;
use causepair::runner::{results_csv, run_corpus};
use causepair::simgen::{generate_pairs, scenario_params};
use causepair::stats::rng_stream;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normals<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn permutation_p(u: &[f64], v: &[f64], lu: f64, lv: f64, seed: u64) -> f64 {
    let observed = hsic_biased(u, v, lu, lv).unwrap();
    let mut rng = rng_stream(seed, 99);
    let mut w = v.to_vec();
    let mut hits = 0;
    for _ in 0..1000 {
        w.shuffle(&mut rng);
        if hsic_biased(u, &w, lu, lv).unwrap() >= observed {
            hits += 1;
        }
    }
    (1 + hits) as f64 / 1001.0
}

#[test]
fn gamma_pvalue_tracks_permutation_oracle() {
    let mut worst: f64 = 0.0;
    for t in 0..20u64 {
        let mut rng = rng_stream(t, 5);
        let n = 200;
        let u = normals(n, &mut rng);
        // dependence strength sweeps from none to moderate
        let s = 0.05 * (t % 5) as f64;
        let v: Vec<f64> = u
            .iter()
            .map(|a| {
                let e: f64 = StandardNormal.sample(&mut rng);
                s * a * a + e
            })
            .collect();
        let (lu, lv) = (median_bandwidth(&u).unwrap(), median_bandwidth(&v).unwrap());
        let gamma = hsic_gamma_pvalue(&u, &v, lu, lv).unwrap().p_value.unwrap();
        let perm = permutation_p(&u, &v, lu, lv, t);
        worst = worst.max((gamma - perm).abs());
    }
    assert!(worst <= 0.05, "largest gap {worst}");
}

#[test]
fn gamma_pvalues_are_calibrated_under_independence() {
    let mut p: Vec<f64> = (0..200u64)
        .map(|t| {
            let mut rng = rng_stream(t, 6);
            let u = normals(100, &mut rng);
            let v = normals(100, &mut rng);
            let (lu, lv) = (median_bandwidth(&u).unwrap(), median_bandwidth(&v).unwrap());
            hsic_gamma_pvalue(&u, &v, lu, lv).unwrap().p_value.unwrap()
        })
        .collect();
    p.sort_by(f64::total_cmp);
    let m = p.len() as f64;
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / m).abs().max(((i + 1) as f64 / m - x).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.1, "KS distance {ks}");
}

#[test]
fn strong_dependence_has_tiny_pvalue() {
    let u = normals(200, &mut rng_stream(3, 3));
    let l = median_bandwidth(&u).unwrap();
    let p = hsic_gamma_pvalue(&u, &u, l, l).unwrap().p_value.unwrap();
    assert!(p < 1e-4);
    assert!(permutation_p(&u, &u, l, l, 3) < 2.0 / 1001.0);
}

#[test]
fn hsic_is_lipschitz_in_the_second_argument() {
    for t in 0..100u64 {
        let mut rng = rng_stream(t, 8);
        let n = rng.random_range(5..60);
        let ell = rng.random_range(0.2..3.0);
        let u = normals(n, &mut rng);
        let v = normals(n, &mut rng);
        let scale: f64 = rng.random_range(0.001..2.0);
        let w: Vec<f64> = v
            .iter()
            .map(|a| {
                let e: f64 = StandardNormal.sample(&mut rng);
                a + scale * e
            })
            .collect();
        let gap = (hsic_biased(&u, &v, ell, ell).unwrap() - hsic_biased(&u, &w, ell, ell).unwrap()).abs();
        let dist = v.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let bound = 32.0 * gaussian_kernel_lipschitz(ell) / (n as f64).sqrt() * dist;
        assert!(gap <= bound, "trial {t}: {gap} > {bound}");
    }
}

#[test]
fn generated_corpus_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_params("SIM-c").unwrap();
    let pairs = generate_pairs(&cfg, 60, 4, 17).unwrap();
    write_corpus(dir.path(), &pairs).unwrap();
    let back = load_benchmark(dir.path()).unwrap();
    assert_eq!(back, pairs);
}

#[test]
fn batch_results_ignore_thread_count() {
    let cfg = scenario_params("SIM").unwrap();
    let pairs = generate_pairs(&cfg, 60, 6, 3).unwrap();
    let methods: Vec<Method> = ["ANM-Gauss", "ANM-HSIC-ds", "IGCI-slope", "IGCI-ent-3NN"]
        .iter()
        .map(|m| Method::parse(m, BaseMeasure::Uniform).unwrap())
        .collect();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| results_csv(&run_corpus(&pairs, &methods, PerturbKind::SmallNoise, 11)))
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one.lines().count(), 1 + 6 * 4);
}
