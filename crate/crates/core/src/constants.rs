//! Physical constants (SI, CODATA 2018/2022 where not exact by definition).

/// Planck constant (J·s), exact.
pub const H: f64 = 6.626_070_15e-34;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant (J/K), exact.
pub const KB: f64 = 1.380_649e-23;

/// Speed of light in vacuum (m/s), exact.
pub const C: f64 = 299_792_458.0;

/// Atomic mass unit (kg).
pub const AMU: f64 = 1.660_539_068_92e-27;
