//! Runs the checked-in fuzz seeds through each fuzz target's entry point,
//! so the targets' round-trip assertions hold on stable toolchains too.

use std::fs;
use std::path::PathBuf;

use dipt::checkpoint::{parse_checkpoint, write_checkpoint};
use dipt::graph::*;
use dipt_cli::dataset::InstanceRange;
use dipt_cli::params::{EvalParams, GradcheckParams, InferParams, SimIdssParams, SimSiParams, TrainParams};
use dipt_cli::run::Manifest;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn graph_seeds_round_trip() {
    for (p, text) in seeds("graph") {
        let g = parse_graph(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
    }
}

#[test]
fn instance_file_seeds_round_trip() {
    for (_, text) in seeds("observation") {
        let v = parse_observation(&text).unwrap();
        assert_eq!(parse_observation(&write_observation(&v)).unwrap(), v);
    }
    for (_, text) in seeds("seeds") {
        let v = parse_seeds(&text).unwrap();
        assert_eq!(parse_seeds(&write_seeds(&v)).unwrap(), v);
    }
    for (_, text) in seeds("forest") {
        let v = parse_forest(&text).unwrap();
        assert_eq!(parse_forest(&write_forest(&v)).unwrap(), v);
    }
    for (_, text) in seeds("scores") {
        let v = parse_scores(&text).unwrap();
        assert_eq!(parse_scores(&write_scores(&v)).unwrap(), v);
    }
}

#[test]
fn checkpoint_seeds_round_trip() {
    for (_, text) in seeds("checkpoint") {
        let m = parse_checkpoint(&text).unwrap();
        assert_eq!(write_checkpoint(&parse_checkpoint(&write_checkpoint(&m)).unwrap()), write_checkpoint(&m));
    }
}

#[test]
fn manifest_seeds_name_runs() {
    for (p, text) in seeds("manifest") {
        let m = Manifest::parse(&text).unwrap();
        let run = m.run().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(run.command(), m.command);
    }
}

#[test]
fn config_seeds_parse_as_some_command() {
    for (p, text) in seeds("config") {
        let hits = [
            toml::from_str::<SimSiParams>(&text).is_ok_and(|c| c.validate().is_ok()),
            toml::from_str::<SimIdssParams>(&text).is_ok_and(|c| c.idss_config(0).validate().is_ok()),
            toml::from_str::<TrainParams>(&text).is_ok_and(|c| c.train_config().validate().is_ok()),
            toml::from_str::<InferParams>(&text).is_ok_and(|c| c.inference_config().validate().is_ok()),
            toml::from_str::<GradcheckParams>(&text).is_ok_and(|c| c.config().validate().is_ok()),
            toml::from_str::<EvalParams>(&text).is_ok(),
        ];
        assert_eq!(hits.iter().filter(|&&h| h).count(), 1, "{}", p.display());
    }
}

#[test]
fn instance_range_seeds_round_trip() {
    for (_, text) in seeds("instance_range") {
        let r: InstanceRange = text.parse().unwrap();
        assert_eq!(r.to_string().parse::<InstanceRange>().unwrap(), r);
    }
}
