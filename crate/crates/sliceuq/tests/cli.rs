//! End-to-end CLI exercises through `cli_main`, covering exit codes and
//! the subcommand chain on a small phantom dataset.

use std::path::Path;

use sliceuq::cli::cli_main;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["sliceuq"];
    argv.extend_from_slice(args);
    cli_main(argv)
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["--version"]), 0);
    assert_eq!(run(&[]), 1);
    assert_eq!(run(&["--no-such-flag"]), 1);
    assert_eq!(run(&["info", "--input", "/no/such/file.mhd"]), 2);
}

#[test]
fn subcommand_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_owned();

    let data = p("data");
    assert_eq!(
        run(&["phantom", "--out", &data, "--seed", "3", "--cases", "3", "--members", "6"]),
        0
    );
    let case0 = format!("{data}/case_00");
    assert!(Path::new(&format!("{case0}/gt.mhd")).exists());
    assert!(Path::new(&format!("{case0}/member_05.mhd")).exists());

    let gt = format!("{case0}/gt.mhd");
    assert_eq!(run(&["info", "--input", &gt]), 0);

    let mean = p("mean.mhd");
    let label = p("label.mhd");
    assert_eq!(run(&["aggregate", "--ensemble-dir", &case0, "--mean", &mean, "--label", &label]), 0);

    let mjson = p("metrics.json");
    let mcsv = p("metrics.csv");
    assert_eq!(run(&["metrics", "--gt", &gt, "--pred", &label, "--json", &mjson, "--csv", &mcsv]), 0);
    assert!(std::fs::read_to_string(&mjson).unwrap().contains("\"schema\": 1"));

    let ucsv = p("uncertainty.csv");
    assert_eq!(run(&["uncertainty", "--ensemble-dir", &case0, "--csv", &ucsv]), 0);

    let rs = p("resampled.mhd");
    assert_eq!(run(&["resample", "--input", &gt, "--output", &rs, "--spacing", "3.6,1.25,1.25", "--mode", "nearest"]), 0);

    // crop specs are deterministic for a fixed seed
    let c1 = p("crops1.json");
    let c2 = p("crops2.json");
    assert_eq!(run(&["crops", "--label", &label, "--out", &c1, "--seed", "9"]), 0);
    assert_eq!(run(&["crops", "--label", &label, "--out", &c2, "--seed", "9"]), 0);
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());

    // pipeline over the generated data root, then model-level subcommands
    let rep = p("report");
    assert_eq!(run(&["pipeline", "--data", &data, "--out", &rep, "--seed", "5", "--folds", "3"]), 0);
    let records = format!("{rep}/records.csv");
    assert!(Path::new(&records).exists());

    let corr = p("correlation.json");
    assert_eq!(run(&["correlate", "--records", &records, "--out", &corr]), 0);

    let model = p("model_hd.json");
    assert_eq!(run(&["fit", "--records", &records, "--target", "hd", "--out", &model]), 0);
    let cv = p("cv_hd.json");
    assert_eq!(run(&["cv", "--records", &records, "--target", "hd", "--folds", "3", "--out", &cv]), 0);
    assert_eq!(run(&["predict", "--model", &model, "--value", "0.05"]), 0);

    let post = p("label_post.mhd");
    let report = p("postprocess.json");
    assert_eq!(
        run(&[
            "postprocess",
            "--ensemble-dir",
            &case0,
            "--model",
            &model,
            "--label-out",
            &post,
            "--report",
            &report,
        ]),
        0
    );
    assert!(Path::new(&post).exists());
    assert!(Path::new(&report).exists());
}
