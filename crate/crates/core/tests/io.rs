mod common;

use common::{rel, SEED};
use spinrelax::fitting::{fit, AdapterKind, ModelAdapter};
use spinrelax::io::{
    default_abscissa, format_trace, generate_synthetic, parse_trace, read_trace, write_trace,
    NoiseKind, RunConfig, SyntheticSpec,
};
use spinrelax::Error;

#[test]
fn hole_area_csv_feeds_ff_fit() {
    let mut body = String::from("# kind = HoleArea\n# temperature_K = 1.8\nt_s,y\n");
    let p = spinrelax::model::FFParams::new(1.91e-3, 1.3e-3);
    for i in 0..50 {
        let t = 6e-3 * i as f64 / 49.0;
        let y = 0.45 * spinrelax::dynamics::ff_population_deficit(&p, t).unwrap();
        body.push_str(&format!("{t},{y}\n"));
    }
    let trace = parse_trace(&body).unwrap();
    let r = fit(&ModelAdapter::new(AdapterKind::FFHoleDecay), &trace, &[]).unwrap();
    assert!(rel(r.get("t_ff").unwrap(), 1.91e-3) < 1e-4);
}

#[test]
fn synthetic_traces_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for kind in AdapterKind::ALL {
        let spec = SyntheticSpec {
            model: kind,
            truth: ModelAdapter::new(kind)
                .params
                .iter()
                .map(|p| (p.name.clone(), p.value))
                .collect(),
            noise: 0.01,
            noise_kind: NoiseKind::PeakFraction,
            abscissa: default_abscissa(kind),
            temperature: 4.0,
            kind: None,
        };
        let (trace, truth) = generate_synthetic(&spec, SEED).unwrap();
        assert_eq!(truth.seed, SEED);
        let path = dir.path().join(format!("{}.csv", kind.name()));
        write_trace(&path, &trace).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(format_trace(&back), format_trace(&trace), "{}", kind.name());
        assert!(ModelAdapter::new(kind).check_trace(&back).is_ok());
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("# kind = HoleArea\nt_s,y\n0,1\n1,x\n", 4),
        ("# kind = HoleArea\nt_s,y\n0,1\n1,2,3\n", 4),
        ("# kind = HoleArea\nt_s,y,sigma_y\n0,1,0\n", 3),
        ("# kind = HoleArea\n# kind = Echo2P\nt_s,y\n", 2),
    ];
    for (body, line) in cases {
        match parse_trace(body) {
            Err(Error::Parse { line: got, .. }) => assert_eq!(got, line, "{body}"),
            other => panic!("{body}: {other:?}"),
        }
    }
}

#[test]
fn config_round_trips_through_toml() {
    let text = "seed = 3\n[model]\nname = \"Echo2P\"\nfixed = { i0 = 1.0 }\n[chirp]\nspan_Hz = 2e6\nduration_s = 6e-5\n";
    let cfg = RunConfig::from_toml_str(text).unwrap();
    let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(cfg, again);
}
