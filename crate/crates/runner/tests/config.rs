use std::path::PathBuf;

use plmpc_core::learning::SeedStrategy;
use plmpc_core::scenarios::tiny_scenario;
use plmpc_runner::config::ScenarioConfig;
use plmpc_runner::{run_experiment, ExperimentConfig, RunOptions};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn usage(text: &str) -> String {
    match ExperimentConfig::from_toml(text) {
        Err(e) => {
            assert_eq!(e.exit_code(), 1, "{e}");
            e.to_string()
        }
        Ok(c) => panic!("accepted {c:?}"),
    }
}

#[test]
fn shipped_configs_load() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap();
            cfg.resolve_scenario().unwrap();
            assert!(cfg.output_dir.is_some(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

#[test]
fn defaults_fill_optional_sections() {
    let cfg = ExperimentConfig::from_toml("iterations = 3\nseed = 9\n[scenario]\nname = \"tiny\"\n").unwrap();
    assert_eq!(cfg, {
        let mut c = ExperimentConfig::for_scenario("tiny", 3, 9);
        c.output_dir = None;
        c
    });
    assert!(cfg.output.trajectories && cfg.output.shifted_costs && !cfg.output.dump_safe_sets);
    assert_eq!(cfg.tolerances.invariant, 1e-6);
}

#[test]
fn overrides_reach_the_scenario() {
    let text = r#"
iterations = 2
seed = 1

[scenario]
name = "tiny"
horizon = 3
seed_strategy = "vertex_interpolation"
alpha_target = 0.1
rpi_max_horizon = 77
candidate_cap = 5
"#;
    let spec = ExperimentConfig::from_toml(text).unwrap().resolve_scenario().unwrap();
    assert_eq!(spec.lmpc.horizon, 3);
    assert_eq!(spec.seed_strategy, SeedStrategy::VertexInterpolation);
    assert_eq!(spec.tube.alpha_target, 0.1);
    assert_eq!(spec.tube.max_horizon, 77);
}

#[test]
fn malformed_configs_are_usage_errors() {
    assert!(usage("seed = 1\n[scenario]\nname = \"tiny\"\n").contains("iterations"));
    assert!(usage("iterations = 0\nseed = 1\n[scenario]\nname = \"tiny\"\n").contains("at least 1"));
    assert!(usage("iterations = 1\nseed = 1\n[scenario]\nname = \"greenhouse\"\n").contains("unknown scenario"));
    assert!(usage("iterations = 1\nseed = 1\n[scenario]\n").contains("required"));
    assert!(usage("iterations = 1\nseed = 1\ncolour = 3\n[scenario]\nname = \"tiny\"\n").contains("colour"));
    let bad_box = "iterations = 1\nseed = 1\n[scenario]\nname = \"tiny\"\n[extensions.initial_offset]\nlower = [1.0]\nupper = [0.0]\n";
    assert!(usage(bad_box).contains("initial_offset"));
    let bad_dev = "iterations = 1\nseed = 1\n[scenario]\nname = \"tiny\"\n[extensions.deviation]\na_scale = -1.0\nb_scale = 0.0\n";
    assert!(usage(bad_dev).contains("deviation"));
}

#[test]
fn inline_scenario_round_trips_through_toml() {
    let mut cfg = ExperimentConfig::for_scenario("tiny", 2, 5);
    cfg.scenario = ScenarioConfig { inline: Some(Box::new(tiny_scenario().unwrap())), ..Default::default() };
    let text = toml::to_string(&cfg).unwrap();
    let back = ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(back, cfg);
    let both = format!("{text}\n").replace("[scenario.inline]", "[scenario]\nname = \"tiny\"\n[scenario.inline]");
    if both != text {
        assert!(ExperimentConfig::from_toml(&both).is_err());
    }
    // The inline copy runs exactly like the built-in.
    let a = run_experiment(&back, RunOptions::default()).unwrap();
    let b = run_experiment(&ExperimentConfig::for_scenario("tiny", 2, 5), RunOptions::default()).unwrap();
    let costs = |e: &plmpc_runner::Experiment| e.iterations.iter().map(|o| o.metrics.lmpc_cost).collect::<Vec<_>>();
    assert_eq!(costs(&a), costs(&b));
}
