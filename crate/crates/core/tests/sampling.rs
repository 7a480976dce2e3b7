use haartrunc::ensembles::{sample, sample_dirichlet, sample_haar_orthogonal, sample_haar_unitary, EnsembleKind};
use haartrunc::montecarlo::stats::{chi_square_gof, ks_one_sample};
use haartrunc::montecarlo::Engine;
use haartrunc::rng::RngStream;
use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};

const Z: f64 = 4.0;

fn engine() -> Engine {
    Engine::new(2).unwrap()
}

#[test]
fn unitary_second_moment() {
    let acc = engine()
        .mean_var(1, 100_000, |rng, _| Ok(sample_haar_unitary(8, rng)?.get(0, 0).norm_sqr()))
        .unwrap();
    assert!(acc.estimate().agrees_with(0.125, Z), "{acc:?}");
}

#[test]
fn orthogonal_fourth_moment() {
    let acc = engine()
        .mean_var(2, 100_000, |rng, _| Ok(sample_haar_orthogonal(8, rng)?.get(0, 0).re.powi(4)))
        .unwrap();
    assert!(acc.estimate().agrees_with(0.0375, Z), "{acc:?}");
}

#[test]
fn permutations_are_uniform() {
    let perms = engine()
        .collect(3, 60_000, |rng, _| Ok(sample(EnsembleKind::Permutation, 3, rng)?.permutation().unwrap()))
        .unwrap();
    let code = |p: &[usize]| p[0] * 2 + usize::from(p[1] > p[2]);
    let mut counts = [0u64; 6];
    for p in &perms {
        counts[code(p)] += 1;
    }
    let res = chi_square_gof(&counts, &[10_000.0; 6]).unwrap();
    assert!(res.p_value > 1e-3, "{counts:?} {res:?}");
}

#[test]
fn first_entry_follows_its_beta_law() {
    for kind in [EnsembleKind::HaarUnitary, EnsembleKind::HaarOrthogonal] {
        let bp = kind.beta_prime().unwrap();
        let n = 16;
        let xs = engine()
            .collect(4, 10_000, |rng, _| Ok(sample(kind, n, rng)?.get(0, 0).norm_sqr()))
            .unwrap();
        let law = Beta::new(bp, (n as f64 - 1.0) * bp).unwrap();
        let ks = ks_one_sample(&xs, |x| law.cdf(x)).unwrap();
        assert!(ks.p_value > 1e-3, "{kind}: {ks:?}");
    }
}

#[test]
fn dirichlet_mean_and_block_variance() {
    let acc = engine()
        .mean_var_vec(5, 100_000, 2, |rng, _, buf| {
            let u = sample_dirichlet(8, 1.0, rng)?;
            assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let head: f64 = u[..3].iter().sum();
            buf.extend([u[0], (head - 3.0 / 8.0).powi(2)]);
            Ok(())
        })
        .unwrap();
    assert!(acc.get(0).estimate().agrees_with(0.125, Z), "{acc:?}");
    assert!(acc.get(1).estimate().agrees_with(15.0 / 576.0, Z), "{acc:?}");
}

#[test]
fn ks_p_values_are_uniform_under_the_null() {
    let p = engine()
        .collect(6, 2000, |rng, _| {
            let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
            Ok(ks_one_sample(&xs, |x| x.clamp(0.0, 1.0))?.p_value)
        })
        .unwrap();
    let mut counts = [0u64; 10];
    for v in p {
        counts[((v * 10.0) as usize).min(9)] += 1;
    }
    let res = chi_square_gof(&counts, &[200.0; 10]).unwrap();
    assert!(res.p_value > 1e-3, "{counts:?} {res:?}");
}

#[test]
fn same_stream_same_matrix() {
    let a = sample_haar_unitary(6, &mut RngStream::new(9, 3).rng()).unwrap();
    let b = sample_haar_unitary(6, &mut RngStream::new(9, 3).rng()).unwrap();
    let c = sample_haar_unitary(6, &mut RngStream::new(9, 4).rng()).unwrap();
    assert_eq!(a.entries(), b.entries());
    assert_ne!(a.entries(), c.entries());
}
