use serde_json::Value;

use vstirap_web::{default_system, delay_scan_json, pump_spectrum_json, transit_json};

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn transit_with_defaults() {
    let v = parse(&transit_json("").unwrap());
    assert!((v["p_emit"].as_f64().unwrap() - 0.90).abs() < 0.03);
    let t = v["t_us"].as_array().unwrap();
    assert!(t.len() > 100 && t.len() <= 402);
    assert_eq!(v["dark_fidelity"].as_array().unwrap().len(), t.len());
}

#[test]
fn partial_parameters_and_errors() {
    let v = parse(&transit_json(r#"{"delay_us": -30}"#).unwrap());
    assert!(v["p_emit"].as_f64().unwrap() < 0.05);
    assert!(transit_json(r#"{"kappa_mhz": -1}"#).is_err());
    assert!(transit_json(r#"{"kapa_mhz": 1}"#)
        .unwrap_err()
        .contains("kapa_mhz"));
    assert!(parse(&default_system())["g0_mhz"].as_f64().unwrap() > 4.49);
}

#[test]
fn curves() {
    let d = parse(&delay_scan_json("", 30.0, 60.0, 4).unwrap());
    assert_eq!(d["x"].as_array().unwrap().len(), 4);
    assert!(delay_scan_json("", 0.0, 1.0, 1).is_err());
    let s =
        parse(&pump_spectrum_json(r#"{"delay_us": 35, "delta_c_mhz": -15}"#, 10.0, 11).unwrap());
    let centre = s["fit"]["center"].as_f64().unwrap();
    assert!((centre + 15.0).abs() < 1.0, "{centre}");
}
