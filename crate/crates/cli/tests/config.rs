use circuitlab::config::{merge, parse, Model, Overrides};
use circuitlab::models::Parameters;
use circuitlab::CliError;
use serde_json::json;

fn schema_key(text: &str) -> Option<String> {
    match parse(text, &Overrides::default()) {
        Err(CliError::Schema { key, .. }) => key,
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn merge_is_recursive() {
    let mut base = json!({"a": {"b": 1, "c": 2}, "d": [1, 2]});
    merge(&mut base, json!({"a": {"c": 5, "e": 6}, "d": [3]}));
    assert_eq!(base, json!({"a": {"b": 1, "c": 5, "e": 6}, "d": [3]}));
}

#[test]
fn defaults_follow_the_figure() {
    let s = parse(r#"{"model": "goodwin", "parameters": {"figure": 3}}"#, &Overrides::default()).unwrap();
    let Parameters::Goodwin(g) = &s.parameters else { panic!() };
    assert_eq!(g.params.sigma_s, 0.015);
    assert_eq!(s.run.paths, 20);
    let s = parse(r#"{"model": "goodwin", "parameters": {"figure": 1}}"#, &Overrides::default()).unwrap();
    let Parameters::Goodwin(g) = &s.parameters else { panic!() };
    assert_eq!(g.params.omega, 0.0);
    assert_eq!(s.run.paths, 1);
}

#[test]
fn user_keys_override_preset_members() {
    let s = parse(
        r#"{"model": "keen", "parameters": {"params": {"a": 0.3}}, "run": {"dt": 0.002}}"#,
        &Overrides::default(),
    )
    .unwrap();
    let Parameters::Keen(k) = &s.parameters else { panic!() };
    assert_eq!(k.params.a, 0.3);
    assert_eq!(k.params.b, 0.20);
    assert_eq!(s.run.dt, 0.002);
    assert_eq!(s.run.horizon, 100.0);
}

#[test]
fn unknown_keys_are_named() {
    assert_eq!(schema_key(r#"{"model": "keen", "parameters": {"params": {"nu_ff": 1}}}"#).as_deref(), Some("parameters.params.nu_ff"));
    assert_eq!(schema_key(r#"{"model": "mmc", "run": {"pathz": 3}}"#).as_deref(), Some("run.pathz"));
    assert_eq!(schema_key(r#"{"model": "dividend", "extra": 1}"#).as_deref(), Some("config.extra"));
    assert_eq!(schema_key(r#"{"model": "goodwin", "parameters": {"figure": 7}}"#).as_deref(), Some("parameters.figure"));
    assert_eq!(schema_key(r#"{"model": "goodwin", "run": {"paths": 0}}"#).as_deref(), Some("run.paths"));
    assert_eq!(schema_key(r#"{"model": "goodwin", "version": 2}"#).as_deref(), Some("version"));
}

#[test]
fn wrong_types_and_bad_json_exit_two() {
    let e = parse(r#"{"model": "network", "run": {"dt": "fast"}}"#, &Overrides::default()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let e = parse("{not json", &Overrides::default()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let e = parse(r#"{"model": "nope"}"#, &Overrides::default()).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn overrides_apply_last() {
    let o = Overrides { seed: Some(9), paths: Some(3), out: Some("x".into()), svg: true };
    let s = parse(r#"{"model": "network", "run": {"seed": 4}}"#, &o).unwrap();
    assert_eq!((s.run.seed, s.run.paths), (9, 3));
    assert!(s.run.emit.svg);
    assert_eq!(s.out_dir(), std::path::PathBuf::from("x"));
}

#[test]
fn effective_config_round_trips() {
    for m in ["goodwin", "keen", "mmc", "ledger", "network", "wedge", "balance", "dividend"] {
        let s = parse(&format!(r#"{{"model": "{m}"}}"#), &Overrides::default()).unwrap();
        let again = parse(&s.effective_json(), &Overrides::default()).unwrap();
        assert_eq!(s, again, "{m}");
        assert_eq!(s.config_hash(), again.config_hash());
        assert_eq!(s.model.name(), m);
    }
}

#[test]
fn output_directory_does_not_change_the_hash() {
    let a = parse(r#"{"model": "ledger"}"#, &Overrides::default()).unwrap();
    let b = parse(r#"{"model": "ledger", "run": {"out": "elsewhere"}}"#, &Overrides::default()).unwrap();
    assert_eq!(a.config_hash(), b.config_hash());
    assert_eq!(a.model, Model::Ledger);
}

#[test]
fn shipped_scenarios_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            circuitlab::config::load(&path, &Overrides::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 13);
}
