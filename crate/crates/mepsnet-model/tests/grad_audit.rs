//! Whole-model gradient audit on the smallest complete configuration.

use mepsnet_model::{grad_audit, MepsNetConfig, AUDIT_EPS};

#[test]
fn finite_differences_confirm_every_parameter_gradient() {
    let report = grad_audit(&MepsNetConfig::desk_tiny(), 8, 11).unwrap();
    println!(
        "audited {} parameters: max relative error {:.3e} in {:.2}s",
        report.n_params, report.max_rel_err, report.seconds
    );
    assert_eq!(report.n_params, 961);
    assert_eq!(report.eps, AUDIT_EPS);
    assert!(
        report.max_rel_err < 1e-6,
        "max relative error {}",
        report.max_rel_err
    );
    assert!(report.seconds < 60.0, "audit took {:.1}s", report.seconds);
}
