//! Shared fixtures for the benchmark suite: a small synthetic dataset and
//! models fitted on it, sized so a bench run finishes in minutes.

use emns_core::forest::{fit_forest, ForestHyperparams};
use emns_core::lmem::{self, LmemModel, MultipoleBasis};
use emns_core::net::{train_mlp, MlpArchitecture, MlpModel, TrainSpec};
use emns_core::synth::{collect_dataset, SynthEmnsConfig};
use emns_core::types::Position;
use emns_core::{Dataset, ForestModel};

pub fn bench_config() -> SynthEmnsConfig {
    SynthEmnsConfig {
        seed: 7,
        ..SynthEmnsConfig::default()
    }
}

pub fn bench_dataset(n_currents: usize) -> Dataset {
    let (dataset, _meta) = collect_dataset(n_currents, &bench_config()).expect("generation");
    dataset
}

pub fn bench_lmem(train: &Dataset) -> LmemModel {
    let cfg = bench_config();
    let centers: Vec<Position> = cfg.coils.iter().map(|c| c.center).collect();
    let basis = MultipoleBasis::new(centers, 3).expect("basis");
    lmem::fit(train, basis, f64::INFINITY).expect("lmem fit")
}

pub fn bench_forest(train: &Dataset) -> ForestModel {
    let hp = ForestHyperparams {
        n_trees: 20,
        max_depth: 12,
        ..ForestHyperparams::default()
    };
    fit_forest(train, &hp).expect("forest fit")
}

pub fn bench_mlp(train: &Dataset) -> MlpModel {
    let spec = TrainSpec {
        max_epochs: 3,
        ..TrainSpec::default()
    };
    let (model, _history) = train_mlp(train, &MlpArchitecture::default(), &spec).expect("mlp fit");
    model
}
