//! Cross-module integration: the brute-force scoring oracle on a
//! 5-individual fixture, and the evaluation-protocol invariants on a
//! seeded synthetic world.

use std::collections::BTreeMap;

use phenolink::classifier::{
    labeled_features, predict_profiles, train, train_test_split, TrainConfig,
};
use phenolink::genotype::{parse_raw_genotype, GenotypeCall, GenotypeRecord};
use phenolink::matcher::{
    population_sweep, rank_genomes, score_matrix, score_pair, sweep_matrix, EvalConfig,
    RankingMode, ScoreOptions,
};
use phenolink::model::{fit_conditional_tables, ConditionalModel, FitOptions};
use phenolink::panel::{Phenotype, SnpPanel};
use phenolink::profile::{oracle_substitute, PhenotypeProfile};
use phenolink::synth::{
    default_noise_levels, generate_features, generate_pool, pair_realistic, sample_profiles,
    FeatureLayout, PairedDataset, Provenance, WorldConfig, DEFAULT_BLOCK_DIM,
};

fn record(id: &str, lines: &str) -> GenotypeRecord {
    parse_raw_genotype(lines, &SnpPanel::default())
        .unwrap()
        .with_id(id)
}

fn profile(id: &str, sex: &str, hair: &str, eye: &str, skin: &str) -> PhenotypeProfile {
    PhenotypeProfile::new(id, &SnpPanel::default(), sex, hair, eye, skin).unwrap()
}

/// Five individuals with a mix of called, missing, and Y-marked SNPs.
fn five_individual_fixture() -> (Vec<GenotypeRecord>, Vec<PhenotypeProfile>, ConditionalModel) {
    let genotypes = vec![
        record(
            "a",
            "rs1129038\t15\t1\tAA\nrs916977\t15\t1\tCT\nrs12821256\t12\t1\tTT\nrs26722\t5\t1\tCC\n",
        ),
        record(
            "b",
            "rs1129038\t15\t1\tAG\nrs12821256\t12\t1\tTC\nrs35264875\t11\t1\tAT\nm1\tY\t1\tA\n",
        ),
        record(
            "c",
            "rs1129038\t15\t1\tGG\nrs916977\t15\t1\tCC\nrs26722\t5\t1\tCT\nrs16891982\t5\t1\tGG\n",
        ),
        record(
            "d",
            "rs1129038\t15\t1\tAA\nrs916977\t15\t1\tCT\nrs26722\t5\t1\tTT\nm2\tY\t1\tG\n",
        ),
        record("e", "rs35264875\t11\t1\tAA\nrs16891982\t5\t1\tGC\n"),
    ];
    let labels = vec![
        profile("a", "F", "blonde", "blue", "pale"),
        profile("b", "M", "brown", "brown", "intermediate"),
        profile("c", "F", "black", "brown", "dark"),
        profile("d", "M", "blonde", "blue", "pale"),
        profile("e", "F", "brown", "intermediate", "intermediate"),
    ];
    let model = fit_conditional_tables(
        &genotypes,
        &labels,
        &SnpPanel::default(),
        FitOptions::default(),
    )
    .unwrap();
    (genotypes, labels, model)
}

/// Independent oracle: the match probability computed as a plain product
/// in probability space, straight off the fitted tables, with no shared
/// code with the log-space implementation path.
fn oracle_pair_probability(
    z: &PhenotypeProfile,
    y: &GenotypeRecord,
    model: &ConditionalModel,
) -> f64 {
    let panel = model.panel();
    let mut product = 1.0f64;
    for p in Phenotype::ALL {
        let variant_idx = panel.variant_index(p, z.variant(p)).unwrap();
        if p == Phenotype::Sex {
            let matches = z.variant(p) == panel.sex_variant(y.has_y_calls);
            product *= if matches {
                1.0 - model.probability_floor()
            } else {
                model.probability_floor()
            };
            continue;
        }
        for snp in panel.snps(p) {
            let factor = match y.call(snp) {
                GenotypeCall::Called(pair) => model
                    .table(snp, pair)
                    .map(|dist| dist[variant_idx])
                    .unwrap_or(model.prior(p)[variant_idx]),
                GenotypeCall::Missing => model.prior(p)[variant_idx],
            };
            product *= factor;
        }
    }
    product
}

#[test]
fn score_pair_matches_exponent_space_oracle() {
    let (genotypes, labels, model) = five_individual_fixture();
    let opts = ScoreOptions::default();
    for z in &labels {
        for y in &genotypes {
            let implementation = score_pair(z, y, &model, opts);
            let oracle = oracle_pair_probability(z, y, &model).ln();
            assert!(
                (implementation - oracle).abs() < 1e-9,
                "{} vs {} for ({}, {})",
                implementation,
                oracle,
                z.individual_id,
                y.individual_id
            );
        }
    }
}

#[test]
fn ranking_matches_oracle_argsort() {
    let (genotypes, labels, model) = five_individual_fixture();
    for z in &labels {
        let ranked = rank_genomes(z, &genotypes, &model, ScoreOptions::default());
        // oracle argsort: probability descending, id ascending on ties
        let mut oracle: Vec<(String, f64)> = genotypes
            .iter()
            .map(|y| {
                (
                    y.individual_id.clone(),
                    oracle_pair_probability(z, y, &model),
                )
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        let got: Vec<&str> = ranked.iter().map(|(id, _)| id.as_str()).collect();
        let want: Vec<&str> = oracle.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(got, want, "permutation mismatch for probe {}", z.individual_id);
    }
}

#[test]
fn hair_score_is_product_of_two_table_lookups() {
    let (genotypes, labels, model) = five_individual_fixture();
    // individual b has both hair SNPs called
    let y = &genotypes[1];
    let z = &labels[1];
    let variant_idx = model
        .panel()
        .variant_index(Phenotype::Hair, z.variant(Phenotype::Hair))
        .unwrap();
    let mut expected = 1.0;
    for snp in model.panel().snps(Phenotype::Hair) {
        let pair = match y.call(snp) {
            GenotypeCall::Called(pair) => pair,
            GenotypeCall::Missing => panic!("fixture has both hair SNPs called"),
        };
        expected *= model.table(snp, pair).expect("call seen at fit time")[variant_idx];
    }
    let got = model
        .variant_given_genome(Phenotype::Hair, z.variant(Phenotype::Hair), y)
        .unwrap();
    assert!((got - expected).abs() / expected < 1e-12);
}

struct EvalWorld {
    dataset: PairedDataset,
    model: ConditionalModel,
    predicted: Vec<PhenotypeProfile>,
    truth: Vec<PhenotypeProfile>,
}

fn eval_world() -> EvalWorld {
    let panel = SnpPanel::default();
    let config = WorldConfig {
        pool_size: 400,
        ..WorldConfig::default()
    };
    let pool = generate_pool(&panel, &config, 501).unwrap();
    let genotypes: Vec<GenotypeRecord> = pool.iter().map(|m| m.genotype.clone()).collect();
    let pool_profiles: Vec<PhenotypeProfile> = pool.iter().map(|m| m.profile.clone()).collect();
    let model =
        fit_conditional_tables(&genotypes, &pool_profiles, &panel, FitOptions::default()).unwrap();

    let eval_profiles = sample_profiles(&pool, &panel, 150, 502, "ind-");
    let pairs = pair_realistic(&eval_profiles, &pool, &panel, 503).unwrap();
    let dataset = PairedDataset::build(
        pairs,
        &panel,
        FeatureLayout::uniform(DEFAULT_BLOCK_DIM),
        default_noise_levels(),
        Provenance::Realistic,
        504,
    )
    .unwrap();

    let train_profiles = sample_profiles(&pool, &panel, 600, 505, "tr-");
    let train_features = generate_features(
        &train_profiles,
        &panel,
        &dataset.layout,
        &dataset.noise,
        506,
    )
    .unwrap();
    let mut classifiers = BTreeMap::new();
    for p in Phenotype::ALL {
        let (inputs, labels) = labeled_features(&train_features, &train_profiles, &panel, p);
        let cfg = TrainConfig {
            seed: 507,
            epochs: 150,
            ..TrainConfig::default()
        };
        classifiers.insert(
            p,
            train(p, panel.variants(p).to_vec(), &inputs, &labels, &cfg).unwrap(),
        );
    }
    let ids: Vec<String> = dataset.individuals.iter().map(|i| i.id.clone()).collect();
    let features: Vec<_> = dataset.individuals.iter().map(|i| i.features.clone()).collect();
    let predicted = predict_profiles(&classifiers, &ids, &features, &panel);
    let truth = dataset.profiles();
    EvalWorld {
        dataset,
        model,
        predicted,
        truth,
    }
}

#[test]
fn zero_noise_features_train_to_perfect_accuracy() {
    let panel = SnpPanel::default();
    let pool = generate_pool(
        &panel,
        &WorldConfig {
            pool_size: 200,
            ..WorldConfig::default()
        },
        31,
    )
    .unwrap();
    let profiles = sample_profiles(&pool, &panel, 300, 32, "z-");
    let layout = FeatureLayout::uniform(DEFAULT_BLOCK_DIM);
    let noise: BTreeMap<Phenotype, f64> = Phenotype::ALL.into_iter().map(|p| (p, 0.0)).collect();
    let features = generate_features(&profiles, &panel, &layout, &noise, 33).unwrap();
    let (train_idx, test_idx) = train_test_split(profiles.len(), 0.6, 34);
    for p in Phenotype::ALL {
        let (inputs, labels) = labeled_features(&features, &profiles, &panel, p);
        let tr_in: Vec<Vec<f64>> = train_idx.iter().map(|&i| inputs[i].clone()).collect();
        let tr_la: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let te_in: Vec<Vec<f64>> = test_idx.iter().map(|&i| inputs[i].clone()).collect();
        let te_la: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
        let cfg = TrainConfig {
            seed: 35,
            epochs: 120,
            ..TrainConfig::default()
        };
        let model = train(p, panel.variants(p).to_vec(), &tr_in, &tr_la, &cfg).unwrap();
        assert_eq!(
            phenolink::classifier::accuracy(&model, &te_in, &te_la),
            1.0,
            "zero-noise {p} classifier below perfect accuracy"
        );
    }
}

#[test]
fn success_decreases_with_population_size() {
    let world = eval_world();
    let config = EvalConfig {
        ks: vec![1],
        population_sizes: vec![10, 30, 80, 150],
        trials: 60,
        seed: 9,
        ..EvalConfig::default()
    };
    let rows = population_sweep(
        &world.truth,
        &world.dataset.genotypes(),
        &world.dataset.identity_pairing(),
        &world.model,
        ScoreOptions::default(),
        &config,
    )
    .unwrap();
    let m = (world.truth.len() * config.trials) as f64;
    for pair in rows.windows(2) {
        let se = |r: &phenolink::matcher::SweepRow| (r.mean * (1.0 - r.mean) / m).sqrt();
        assert!(
            pair[1].mean <= pair[0].mean + 3.0 * (se(&pair[0]) + se(&pair[1])),
            "success rose from {} (n={}) to {} (n={})",
            pair[0].mean,
            pair[0].population_size,
            pair[1].mean,
            pair[1].population_size
        );
    }
    assert!(rows.last().unwrap().mean < rows[0].mean);
}

#[test]
fn oracle_probes_dominate_predicted_probes() {
    let world = eval_world();
    let config = EvalConfig {
        ks: vec![1, 5],
        population_sizes: vec![20, 60, 120],
        trials: 60,
        seed: 10,
        ..EvalConfig::default()
    };
    let genotypes = world.dataset.genotypes();
    let pairing = world.dataset.identity_pairing();
    let predicted = population_sweep(
        &world.predicted,
        &genotypes,
        &pairing,
        &world.model,
        ScoreOptions::default(),
        &config,
    )
    .unwrap();
    let oracle = population_sweep(
        &world.truth,
        &genotypes,
        &pairing,
        &world.model,
        ScoreOptions::default(),
        &config,
    )
    .unwrap();
    for (p, o) in predicted.iter().zip(&oracle) {
        assert!(
            o.mean >= p.mean,
            "oracle {} < predicted {} at n={} k={}",
            o.mean,
            p.mean,
            p.population_size,
            p.k
        );
    }
}

#[test]
fn eye_substitution_lands_between_predicted_and_oracle() {
    let world = eval_world();
    let config = EvalConfig {
        ks: vec![1],
        population_sizes: vec![100],
        trials: 100,
        seed: 11,
        ..EvalConfig::default()
    };
    let genotypes = world.dataset.genotypes();
    let pairing = world.dataset.identity_pairing();
    let run = |probes: &[PhenotypeProfile]| {
        population_sweep(
            probes,
            &genotypes,
            &pairing,
            &world.model,
            ScoreOptions::default(),
            &config,
        )
        .unwrap()[0]
            .mean
    };
    let eye_probes: Vec<PhenotypeProfile> = world
        .predicted
        .iter()
        .zip(&world.truth)
        .map(|(p, t)| oracle_substitute(p, t, &[Phenotype::Eye]))
        .collect();
    let predicted = run(&world.predicted);
    let eye = run(&eye_probes);
    let oracle = run(&world.truth);
    assert!(
        predicted < eye && eye < oracle,
        "expected predicted {predicted} < eye-substituted {eye} < oracle {oracle}"
    );
}

#[test]
fn adding_distractors_never_helps_in_expectation() {
    let world = eval_world();
    let matrix = score_matrix(
        &world.truth,
        &world.dataset.genotypes(),
        &world.model,
        ScoreOptions::default(),
    );
    let pairing = world.dataset.identity_pairing();
    let config = EvalConfig {
        ks: vec![1],
        population_sizes: vec![40, 41],
        trials: 100,
        seed: 12,
        ..EvalConfig::default()
    };
    let rows = sweep_matrix(&matrix, &pairing, &config, RankingMode::Scores).unwrap();
    let m = (world.truth.len() * config.trials) as f64;
    let se = (rows[0].mean * (1.0 - rows[0].mean) / m).sqrt();
    assert!(rows[1].mean <= rows[0].mean + 3.0 * se);
}
