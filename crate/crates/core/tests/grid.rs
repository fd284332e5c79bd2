use std::f64::consts::PI;

use proptest::prelude::*;
use wgident::grid::{add_noise, compute_noise_sigma, format_grid, parse_grid, read_grid, write_grid, GridField, NoiseSpec, SigmaMode};

fn sine(nx: usize, nt: usize) -> GridField {
    GridField::from_fn(1, nx, nt, 0.0, 1.0, (0.0, 1.0), |_, x, t| (2.0 * PI * x).sin() * (1.0 + t)).unwrap()
}

#[test]
fn sigma_examples() {
    let f = GridField::new(1, 8, 8, (0.0, 1.0), (0.0, 1.0), true, vec![5.0; 64]).unwrap();
    assert_eq!(compute_noise_sigma(&f, 0, 0.3, SigmaMode::Paper).unwrap(), 0.0);
    let alt: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 0.0 } else { 2.0 }).collect();
    let f = GridField::new(1, 8, 8, (0.0, 1.0), (0.0, 1.0), true, alt).unwrap();
    assert_eq!(compute_noise_sigma(&f, 0, 0.5, SigmaMode::Paper).unwrap(), 0.5);
    assert_eq!(compute_noise_sigma(&f, 0, 0.5, SigmaMode::Rms).unwrap(), 0.5);
    let g = f.scaled(3.0).unwrap();
    assert_eq!(compute_noise_sigma(&g, 0, 0.5, SigmaMode::Paper).unwrap(), 4.5);
    assert_eq!(compute_noise_sigma(&g, 0, 0.5, SigmaMode::Rms).unwrap(), 1.5);
    assert_eq!(compute_noise_sigma(&g, 0, 0.0, SigmaMode::Paper).unwrap(), 0.0);
    assert!(compute_noise_sigma(&g, 0, 1.5, SigmaMode::Paper).is_err());
    assert!(compute_noise_sigma(&g, 1, 0.5, SigmaMode::Paper).is_err());
}

#[test]
fn noise_variance_matches_sigma() {
    let f = sine(256, 128);
    let noisy = add_noise(&f, &NoiseSpec::new(0.1, 7)).unwrap();
    let sigma = compute_noise_sigma(&f, 0, 0.1, SigmaMode::Paper).unwrap();
    let d: Vec<f64> = noisy.values().iter().zip(f.values()).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (d.len() - 1) as f64;
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.05, "{var} vs {}", sigma * sigma);
}

#[test]
fn noise_is_deterministic_and_leaves_input() {
    let f = sine(64, 32);
    let copy = f.clone();
    let a = add_noise(&f, &NoiseSpec::new(0.2, 3)).unwrap();
    let b = add_noise(&f, &NoiseSpec::new(0.2, 3)).unwrap();
    let c = add_noise(&f, &NoiseSpec::new(0.2, 4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(f, copy);
}

#[test]
fn channels_get_their_own_sigma() {
    let f = GridField::from_fn(2, 64, 32, 0.0, 1.0, (0.0, 1.0), |c, x, _| (1 + 9 * c) as f64 * (2.0 * PI * x).sin()).unwrap();
    let noisy = add_noise(&f, &NoiseSpec::new(0.1, 1)).unwrap();
    let spread = |c: usize| {
        let d: Vec<f64> = noisy.channel(c).iter().zip(f.channel(c)).map(|(a, b)| a - b).collect();
        (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
    };
    // The default sigma scales with the square of the amplitude.
    let ratio = spread(1) / spread(0);
    assert!((ratio / 100.0 - 1.0).abs() < 0.1, "{ratio}");
}

#[test]
fn round_trip_through_file() {
    let f = GridField::from_fn(2, 16, 9, -2.0, 4.0, (0.5, 1.25), |c, x, t| (c as f64 + 1.0) * (x * t).exp() / 3.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.grid");
    write_grid(&f, &path).unwrap();
    let g = read_grid(&path).unwrap();
    assert_eq!(f, g);
    assert_eq!(g.n_channels(), 2);
}

#[test]
fn malformed_files_name_a_line() {
    let f = sine(8, 8);
    let text = format_grid(&f);
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    let short = lines.join("\n");
    let err = parse_grid(&short).unwrap_err().to_string();
    assert!(err.contains("line"), "{err}");
    let bad = text.replacen("nx 8", "nx eight", 1);
    assert!(parse_grid(&bad).unwrap_err().to_string().contains("line 3"));
    let nan = text.replacen(&format!("{:.16e}", f.values()[3]), "NaN", 1);
    assert!(parse_grid(&nan).is_err());
    assert!(parse_grid("").is_err());
    assert!(parse_grid(&format!("{text} 1.0")).is_err());
}

#[test]
fn invalid_fields_are_rejected() {
    assert!(GridField::new(1, 4, 8, (0.0, 1.0), (0.0, 1.0), true, vec![0.0; 32]).is_err());
    assert!(GridField::new(1, 8, 8, (1.0, 0.0), (0.0, 1.0), true, vec![0.0; 64]).is_err());
    assert!(GridField::new(1, 8, 8, (0.0, 1.0), (0.0, 1.0), true, vec![0.0; 63]).is_err());
    let mut v = vec![0.0; 64];
    v[5] = f64::NAN;
    assert!(GridField::new(1, 8, 8, (0.0, 1.0), (0.0, 1.0), true, v).is_err());
}

proptest! {
    #[test]
    fn any_field_round_trips(values in prop::collection::vec(-1e300f64..1e300, 64), x0 in -10.0f64..10.0, periodic: bool) {
        let f = GridField::new(1, 8, 8, (x0, x0 + 1.5), (0.0, 0.7), periodic, values).unwrap();
        prop_assert_eq!(parse_grid(&format_grid(&f)).unwrap(), f);
    }

    #[test]
    fn zero_nsr_is_identity(values in prop::collection::vec(-1e3f64..1e3, 64), seed: u64) {
        let f = GridField::new(1, 8, 8, (0.0, 1.0), (0.0, 1.0), true, values).unwrap();
        prop_assert_eq!(add_noise(&f, &NoiseSpec::new(0.0, seed)).unwrap(), f);
    }

    #[test]
    fn sigma_ignores_constant_shift(values in prop::collection::vec(-10.0f64..10.0, 64), shift in -100.0f64..100.0) {
        let f = GridField::new(1, 8, 8, (0.0, 1.0), (0.0, 1.0), true, values.clone()).unwrap();
        let g = f.with_values(values.iter().map(|v| v + shift).collect()).unwrap();
        let a = compute_noise_sigma(&f, 0, 0.3, SigmaMode::Paper).unwrap();
        let b = compute_noise_sigma(&g, 0, 0.3, SigmaMode::Paper).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-12));
    }
}
