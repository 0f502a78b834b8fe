//! Built-in example systems, embedded verbatim from the `corpus/` directory
//! at the repository root.

/// Cubic Schrodinger flow in phase-amplitude variables.
pub const CUBIC_NLS: &str = include_str!("../../../corpus/cubic-nls.lag");

/// Logarithmic Schrodinger flow in phase-amplitude variables.
pub const LOG_NLS: &str = include_str!("../../../corpus/log-nls.lag");

/// Third-derivative shallow-water flow with an auxiliary field.
pub const KDV: &str = include_str!("../../../corpus/kdv.lag");

/// Fourth-order Schrodinger flow with two auxiliary fields.
pub const FOURTH_ORDER_NLS: &str = include_str!("../../../corpus/fourth-order-nls.lag");

/// Name / source pairs for every built-in system, in presentation order.
pub const BUILTINS: &[(&str, &str)] = &[
    ("cubic-nls", CUBIC_NLS),
    ("log-nls", LOG_NLS),
    ("kdv", KDV),
    ("fourth-order-nls", FOURTH_ORDER_NLS),
];

/// Look up a built-in system by name.
pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
