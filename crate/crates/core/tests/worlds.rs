use mbal_core::datagen::{gen_pricing_scenario, gen_shortest_path_scenario, PricingParams, Scenario, ShortestPathParams};
use mbal_core::hypothesis::{fit_erm, LinearPredictor, TrainerConfig};
use mbal_core::losses::SurrogateKind;
use mbal_core::rng::{self, Role};

fn shortest_path(seed: u64, params: ShortestPathParams) -> Scenario {
    Scenario::ShortestPath(gen_shortest_path_scenario(seed, params).unwrap())
}

#[test]
fn label_average_tracks_conditional_mean() {
    let scenario = shortest_path(42, ShortestPathParams::default());
    let mut r = rng::stream(1, 0, Role::Diagnostics);
    let x = scenario.sample_x(&mut r);
    let mean = scenario.conditional_mean(&x).unwrap();
    let n = 40_000;
    let mut acc = vec![0.0; mean.len()];
    for _ in 0..n {
        let noise = scenario.sample_noise(&mut r);
        for (a, c) in acc.iter_mut().zip(scenario.label_with_noise(&x, &noise).unwrap()) {
            *a += c;
        }
    }
    // multiplicative U[0.5, 1.5] noise: sd of each label is m / sqrt(12)
    for (a, m) in acc.iter().zip(&mean) {
        let se = m / (12.0 * n as f64).sqrt();
        assert!((a / n as f64 - m).abs() < 5.0 * se, "{} vs {m}", a / n as f64);
    }
}

#[test]
fn mixture_components_are_equally_likely() {
    let scenario = shortest_path(42, ShortestPathParams::default());
    let mut r = rng::stream(2, 0, Role::Diagnostics);
    let n = 60_000;
    let mut counts = [0usize; 6];
    for _ in 0..n {
        counts[scenario.sample_x_with_component(&mut r).1] += 1;
    }
    let se = (n as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 / 6.0).abs() < 5.0 * se, "{counts:?}");
    }
}

#[test]
fn generation_is_deterministic() {
    let a = shortest_path(9, ShortestPathParams::default());
    let b = shortest_path(9, ShortestPathParams::default());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_ne!(a, shortest_path(10, ShortestPathParams::default()));
    let p = gen_pricing_scenario(3, PricingParams::default()).unwrap();
    assert_eq!(p, gen_pricing_scenario(3, PricingParams::default()).unwrap());

    let draw = |s: &Scenario| {
        let mut r = rng::stream(5, 2, Role::Data);
        (0..20).map(|_| s.sample(&mut r)).collect::<Vec<_>>()
    };
    assert_eq!(draw(&a), draw(&a));
}

#[test]
fn json_round_trip_preserves_the_world() {
    let a = Scenario::Pricing(gen_pricing_scenario(7, PricingParams::default()).unwrap());
    assert_eq!(Scenario::from_json(&a.to_json().unwrap()).unwrap(), a);
}

#[test]
fn squared_loss_recovers_a_well_specified_linear_world() {
    let params = ShortestPathParams {
        eps_bar: 0.0,
        deg: 1,
        ..ShortestPathParams::default()
    };
    let Scenario::ShortestPath(world) = shortest_path(11, params) else {
        unreachable!()
    };
    let scenario = Scenario::ShortestPath(world.clone());
    let mut r = rng::stream(11, 0, Role::Data);
    let samples: Vec<_> = (0..300).map(|_| scenario.sample(&mut r)).collect();
    let cfg = TrainerConfig {
        step_size: 0.5,
        epochs_per_update: 20_000,
        tolerance: 1e-12,
        standardize: true,
        ..TrainerConfig::default()
    };
    let init = LinearPredictor::zeros(scenario.cost_dim(), scenario.feature_dim());
    let h = fit_erm(&init, SurrogateKind::Squared, &world.polytope, &samples, &[], 1.0, samples.len() as f64, &cfg).unwrap();
    let scale = (params.p as f64).sqrt();
    for (j, row) in world.coefficients.iter().enumerate() {
        for (k, b) in row.iter().enumerate() {
            assert!((h.get(j, k) - b / scale).abs() < 1e-3, "weight ({j},{k}) = {}", h.get(j, k));
        }
        assert!((h.get(j, params.p) - 2.0).abs() < 1e-3, "intercept {j} = {}", h.get(j, params.p));
    }
}
