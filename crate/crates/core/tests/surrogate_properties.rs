mod common;

#[test]
fn three_properties_hold_on_scenario_instances() {
    let st = common::surrogate_suite(5, 100, 21);
    assert_eq!(st.bound_violations, 0);
    assert!(st.value_err <= 1e-9, "value gap {:e}", st.value_err);
    assert!(st.grad_err <= 1e-5, "gradient gap {:e}", st.grad_err);
}

#[test]
fn scalar_log_bound() {
    let (bad, gap) = common::log_bound_grid();
    assert_eq!(bad, 0);
    assert!(gap <= 1e-12);
}
