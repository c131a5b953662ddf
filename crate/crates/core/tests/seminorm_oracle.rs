use bvfrac::fields::catalog::catalog;
use bvfrac::kernel::Mollifier;
use bvfrac::mollify::{mollify, ResolutionPolicy};
use bvfrac::seminorm::{gagliardo_energy, profile_energy_for_field};
use serde_json::Value;

#[test]
fn shift_path_matches_profile_oracle_on_1d_step() {
    let c = catalog::<f64>("step1d_box", &Value::Null).unwrap();
    let hat = Mollifier::hat(1, 1.0, 1.0).unwrap();
    for eps in [1e-2, 1e-3] {
        let f = mollify(&c.field, &hat, eps, &c.domain.omega, &ResolutionPolicy::default()).unwrap();
        let shift = gagliardo_energy(&f, &c.domain.omega, 2.0).unwrap();
        let oracle = profile_energy_for_field(&c.field, &hat, eps, &c.domain.omega, 2.0).unwrap();
        let rel = (shift.value - oracle.value).abs() / oracle.value;
        assert!(rel < 0.01, "eps={eps}: {} vs {}", shift.value, oracle.value);
    }
}
