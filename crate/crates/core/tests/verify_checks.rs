use wlp_core::report::{summarize, write_jsonl, Verdict};
use wlp_core::verify::{dispatch, run, CheckParams, CheckSpec, Context, RunConfig, WeightArg, THEOREM_IDS};
use wlp_core::{Error, Weight};

fn cfg(weight: &str, checks: Vec<CheckSpec>) -> RunConfig {
    RunConfig {
        weight: WeightArg(weight.parse().unwrap()),
        checks,
        ..Default::default()
    }
}

#[test]
fn every_id_passes_with_defaults() {
    let c = cfg("const:1", THEOREM_IDS.iter().map(|id| CheckSpec::new(id)).collect());
    let out = run(&c).unwrap();
    let s = summarize(&out.reports);
    assert!(s.all_pass(), "{:?}", s.failed);
    assert_eq!(s.counts.get(&Verdict::Inconclusive), None);
    for id in THEOREM_IDS {
        assert!(out.reports.iter().any(|r| r.theorem_id == id), "no report for {id}");
    }
    let names: Vec<&str> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["dela_spectrum_sigma4.csv", "sandwich_F_p2.csv"]);
    assert!(out.artifacts[0].contents.starts_with("frequency,re,im\n"));
    assert!(out.artifacts[1].contents.starts_with("u,F\n"));
    assert_eq!(out.artifacts[1].contents.lines().count(), 66);
}

#[test]
fn reports_are_sorted_by_id() {
    let c = cfg("power:0.5", ["holder", "commute", "suf"].iter().map(|id| CheckSpec::new(id)).collect());
    let out = run(&c).unwrap();
    let ids: Vec<&str> = out.reports.iter().map(|r| r.theorem_id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
}

#[test]
fn weights_outside_ap_are_inconclusive() {
    let c = cfg("power:2", vec![CheckSpec::new("suf"), CheckSpec::new("suwf"), CheckSpec::new("ruwf")]);
    let out = run(&c).unwrap();
    assert_eq!(out.reports.len(), 3);
    assert!(out.reports.iter().all(|r| r.verdict == Verdict::Inconclusive && r.note.is_some()));
    assert!(summarize(&out.reports).all_pass());
}

#[test]
fn small_normalizer_fails_the_r_bound() {
    let mut spec = CheckSpec::new("ruwf");
    spec.params = CheckParams {
        normalizer: Some(0.01),
        ..Default::default()
    };
    let out = run(&cfg("const:1", vec![spec])).unwrap();
    assert_eq!(out.reports[0].verdict, Verdict::Fail);
    assert!(out.reports[0].ratio > 4.0);
    assert_eq!(summarize(&out.reports).failed, vec!["ruwf:main".to_string()]);
}

#[test]
fn unknown_ids_are_rejected() {
    let c = cfg("const:1", vec![CheckSpec::new("nope")]);
    assert!(matches!(run(&c), Err(Error::UnknownTheorem(_))));
    let ctx = Context::new(&cfg("const:1", vec![])).unwrap();
    assert!(matches!(dispatch("nope", &CheckParams::default(), &ctx), Err(Error::UnknownTheorem(_))));
}

#[test]
fn check_errors_name_the_check() {
    let mut spec = CheckSpec::new("marchaud");
    spec.params.deltas = Some(vec![0.001]);
    let err = run(&cfg("const:1", vec![spec])).unwrap_err();
    assert!(err.to_string().starts_with("check `marchaud`"), "{err}");
}

#[test]
fn seed_changes_the_reports() {
    let bytes = |seed: u64| {
        let mut c = cfg("const:1", vec![CheckSpec::new("holder")]);
        c.ensemble.seed = seed;
        let mut buf = Vec::new();
        write_jsonl(&run(&c).unwrap().reports, &mut buf).unwrap();
        buf
    };
    assert_eq!(bytes(3), bytes(3));
    assert_ne!(bytes(3), bytes(4));
}

#[test]
fn per_check_weight_overrides_the_run_weight() {
    let mut spec = CheckSpec::new("holder");
    spec.params.weight = Some(WeightArg(Weight::power(0.5)));
    let out = run(&cfg("const:1", vec![spec])).unwrap();
    assert!(out.reports.iter().all(|r| r.params.weight.as_deref() == Some("power:0.5")));
}
