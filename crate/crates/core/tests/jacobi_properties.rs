use pole_bounds::jacobi::{solve_sigma, WarpingFunction};
use pole_bounds::profile::{make_profile, ProfileConfig, ProfileSpec};
use proptest::prelude::*;

fn profile(params: &str) -> ProfileSpec {
    let js = format!(r#"{{"profile":{{"kind":"closed_form_G","params":{params}}},"m":2,"r_phi":"inf"}}"#);
    make_profile(&serde_json::from_str::<ProfileConfig>(&js).unwrap()).unwrap()
}

fn presets() -> Vec<(&'static str, ProfileSpec)> {
    vec![
        ("hyperbolic", profile(r#"{"family":"constant","value":1.0}"#)),
        ("hyperbolic_k2", profile(r#"{"family":"constant","value":4.0}"#)),
        ("polynomial", profile(r#"{"family":"polynomial","coefficients":[0.5,0,1]}"#)),
        ("negative_power_decay", profile(r#"{"family":"power_decay","amplitude":-2.0,"shift":1.0,"power":3.0}"#)),
    ]
}

const TOLS: [f64; 8] = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];

#[test]
fn defect_stays_below_tolerance() {
    for (name, p) in presets() {
        for tol in TOLS {
            let w = solve_sigma(&p, 10.0, tol).unwrap();
            assert!(w.max_defect <= tol, "{name} tol={tol:e}: defect {:e}", w.max_defect);
        }
    }
}

#[test]
fn halving_tolerance_halves_defect() {
    // below ~1e-9 the step controller sits at its roundoff floor
    for (name, p) in presets() {
        for tol in &TOLS[..6] {
            let a = solve_sigma(&p, 10.0, *tol).unwrap();
            let b = solve_sigma(&p, 10.0, tol / 2.0).unwrap();
            assert!(
                b.max_defect <= 0.5 * a.max_defect,
                "{name} tol={tol:e}: {:e} -> {:e}",
                a.max_defect,
                b.max_defect
            );
        }
    }
}

#[test]
fn small_radius_limit() {
    for (name, p) in presets() {
        let w = solve_sigma(&p, 2.0, 1e-10).unwrap();
        for r in [1e-6, 1e-4, 1e-2] {
            let ratio = w.state(r).sigma / r;
            assert!((ratio - 1.0).abs() < 1e-3, "{name} r={r}: {ratio}");
        }
    }
}

fn sinh_family(k2: f64, r: f64) -> (f64, f64) {
    if k2 > 0.0 {
        let k = k2.sqrt();
        ((k * r).sinh() / k, (k * r).cosh())
    } else if k2 < 0.0 {
        let k = (-k2).sqrt();
        ((k * r).sin() / k, (k * r).cos())
    } else {
        (r, 1.0)
    }
}

fn check_against_closed_form(w: &WarpingFunction, k2: f64, r: f64, tol: f64) -> Result<(), TestCaseError> {
    let v = w.state(r);
    let (s, ds) = sinh_family(k2, r);
    prop_assert!((v.sigma - s).abs() <= 1e3 * tol * s.abs().max(1.0), "σ({r}) = {} vs {s}", v.sigma);
    prop_assert!((v.sigma_prime - ds).abs() <= 1e3 * tol * ds.abs().max(1.0), "σ'({r}) = {} vs {ds}", v.sigma_prime);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_curvature_matches_closed_form(k2 in -1.0f64..4.0, frac in 0.0f64..1.0) {
        let p = profile(&format!(r#"{{"family":"constant","value":{k2}}}"#));
        // stay inside the first positivity window for negative G
        let r_max = if k2 < 0.0 { 0.9 * std::f64::consts::PI / (-k2).sqrt() } else { 4.0 };
        let r_max = r_max.min(4.0);
        let tol = 1e-9;
        let w = solve_sigma(&p, r_max, tol).unwrap();
        check_against_closed_form(&w, k2, (frac * r_max).max(1e-3), tol)?;
    }

    #[test]
    fn larger_g_grows_faster(a in 0.0f64..2.0, b in 0.0f64..2.0, r in 0.1f64..3.0) {
        // Sturm comparison: G1 ≤ G2 gives σ1 ≤ σ2
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let w1 = solve_sigma(&profile(&format!(r#"{{"family":"constant","value":{lo}}}"#)), 3.0, 1e-9).unwrap();
        let w2 = solve_sigma(&profile(&format!(r#"{{"family":"constant","value":{hi}}}"#)), 3.0, 1e-9).unwrap();
        prop_assert!(w1.state(r).sigma <= w2.state(r).sigma * (1.0 + 1e-9));
    }
}
