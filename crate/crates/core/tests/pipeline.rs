use relscm::datagen::{generate_dataset, Design, GeneratorSpec};
use relscm::io::{load_dataset, load_draws, save_dataset, save_draws};
use relscm::queries::delta_contrast_posterior;
use relscm::*;

fn accelerated(replicates: usize, seed: u64) -> Vec<DeviceRecord> {
    generate_dataset(&GeneratorSpec {
        truth: ModelParams::reference(),
        constants: FixedConstants::default(),
        regime: Regime::AcceleratedStress,
        design: Design::FullFactorial { replicates },
        seed,
        jitter: false,
    })
    .unwrap()
}

fn quick() -> SamplerConfig {
    SamplerConfig {
        chains: 2,
        warmup: 500,
        draws: 1000,
        seed: 3,
        ..SamplerConfig::default()
    }
}

fn contrast_sd(draws: &PosteriorDraws) -> f64 {
    let from = Configuration::new(1, 1, 1, Humidity::Normal);
    let to = Configuration::new(2, 1, 1, Humidity::Normal);
    delta_contrast_posterior(&from, &to, Humidity::Normal, 3.6, draws, 0.95)
        .unwrap()
        .summary
        .sd
}

#[test]
fn files_round_trip_through_fit() {
    let dir = std::env::temp_dir().join(format!("relscm-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let data = accelerated(1, 9);
    let data_path = dir.join("data.csv");
    save_dataset(&data, &data_path).unwrap();
    let loaded = load_dataset(&data_path).unwrap();
    for (a, b) in loaded.iter().zip(&data) {
        assert_eq!((&a.id, a.config, a.regime), (&b.id, b.config, b.regime));
        for (m, n) in a.measurements.iter().zip(&b.measurements) {
            assert!((m.resistance - n.resistance).abs() <= 5e-7);
            assert!((m.time - n.time).abs() <= 5e-7);
        }
    }
    let again = dir.join("again.csv");
    save_dataset(&loaded, &again).unwrap();
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&data_path).unwrap());

    let draws = fit(&loaded, &FitSpec::new(Regime::AcceleratedStress), &quick()).unwrap();
    let draws_path = dir.join("draws.csv");
    save_draws(&draws, &draws_path).unwrap();
    let back = load_draws(&draws_path).unwrap();
    assert_eq!(back.rows(), draws.rows());
    assert_eq!(back.provenance(), draws.provenance());
    assert_eq!(contrast_sd(&back), contrast_sd(&draws));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn posterior_shrinks_with_more_replicates() {
    let spec = FitSpec::new(Regime::AcceleratedStress);
    let small = fit(&accelerated(2, 11), &spec, &quick()).unwrap();
    let large = fit(&accelerated(8, 11), &spec, &quick()).unwrap();
    let ratio = contrast_sd(&large) / contrast_sd(&small);
    // four times the devices halves the sd
    assert!((0.4..0.6).contains(&ratio), "sd ratio {ratio}");
}
