//! Fresnel reflection at a lossy dielectric half-space.

use crate::error::{Error, Result};
use crate::scene::Material;
use num_complex::Complex64;

/// Vacuum permittivity, F/m.
const EPS0: f64 = 8.854_187_812_8e-12;

/// Field polarization relative to the plane of incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPolarization {
    /// E-field normal to the plane of incidence (TE / horizontal).
    Perpendicular,
    /// E-field in the plane of incidence (TM / vertical).
    Parallel,
}

/// Complex relative permittivity `eps_r - j sigma / (2 pi f eps0)` of a
/// material at the given carrier.
pub fn complex_permittivity(material: &Material, f_ghz: f64) -> Complex64 {
    let f_hz = f_ghz * 1e9;
    let sigma = material.conductivity_at(f_ghz);
    Complex64::new(
        material.rel_permittivity,
        -sigma / (2.0 * std::f64::consts::PI * f_hz * EPS0),
    )
}

/// Fresnel reflection coefficient for a plane wave arriving from vacuum at
/// `incidence_angle_rad` measured from the surface normal.
///
/// Sign convention: the parallel (TM) coefficient follows the standard
/// electromagnetic form `(eps cos t - sqrt(eps - sin^2 t)) / (eps cos t +
/// sqrt(eps - sin^2 t))`, which tends to -1 at grazing incidence for both
/// polarizations. That limit is what makes the flat-ground two-ray model
/// roll off at 40 dB per decade.
pub fn fresnel_reflection(
    material: &Material,
    f_ghz: f64,
    incidence_angle_rad: f64,
    pol: FieldPolarization,
) -> Result<Complex64> {
    if !(f_ghz > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive (got {f_ghz})")));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&incidence_angle_rad) {
        return Err(Error::Domain(format!(
            "incidence angle must lie in [0, pi/2) radians (got {incidence_angle_rad})"
        )));
    }
    let eps = complex_permittivity(material, f_ghz);
    let cos_t = incidence_angle_rad.cos();
    let sin2 = incidence_angle_rad.sin().powi(2);
    let root = (eps - Complex64::new(sin2, 0.0)).sqrt();
    let gamma = match pol {
        FieldPolarization::Perpendicular => (cos_t - root) / (cos_t + root),
        FieldPolarization::Parallel => (eps * cos_t - root) / (eps * cos_t + root),
    };
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless(eps_r: f64) -> Material {
        Material {
            name: "test".into(),
            rel_permittivity: eps_r,
            conductivity_s_per_m: 0.0,
            conductivity_exponent: None,
        }
    }

    #[test]
    fn normal_incidence_magnitude_is_one_third_for_eps_four() {
        // (1 - sqrt(4)) / (1 + sqrt(4)) = -1/3. The perpendicular branch
        // carries the minus sign; the parallel branch is +1/3 under the
        // standard TM convention (same physical reflection).
        let m = lossless(4.0);
        let gp = fresnel_reflection(&m, 2.0, 0.0, FieldPolarization::Perpendicular).unwrap();
        assert!((gp.re + 1.0 / 3.0).abs() < 1e-12 && gp.im.abs() < 1e-12, "{gp}");
        let gl = fresnel_reflection(&m, 2.0, 0.0, FieldPolarization::Parallel).unwrap();
        assert!((gl.re - 1.0 / 3.0).abs() < 1e-12 && gl.im.abs() < 1e-12, "{gl}");
        assert!((gp.norm() - gl.norm()).abs() < 1e-12);
    }

    #[test]
    fn grazing_incidence_approaches_unit_magnitude() {
        let m = lossless(4.0);
        let theta = std::f64::consts::FRAC_PI_2 - 1e-6;
        for pol in [FieldPolarization::Perpendicular, FieldPolarization::Parallel] {
            let g = fresnel_reflection(&m, 2.0, theta, pol).unwrap();
            assert!(g.norm() > 0.999, "{pol:?}: |gamma| = {}", g.norm());
        }
        // Parallel tends to -1 (phase reversal), which the two-ray ground
        // bounce depends on.
        let g = fresnel_reflection(&m, 2.0, theta, FieldPolarization::Parallel).unwrap();
        assert!(g.re < -0.999, "parallel grazing must reverse phase: {g}");
    }

    #[test]
    fn brewster_angle_nulls_parallel_reflection() {
        // For lossless eps_r = 4, tan(theta_B) = 2.
        let m = lossless(4.0);
        let theta_b = 2.0_f64.atan();
        let g = fresnel_reflection(&m, 2.0, theta_b, FieldPolarization::Parallel).unwrap();
        assert!(g.norm() < 1e-12, "|gamma| at Brewster = {}", g.norm());
        let gp = fresnel_reflection(&m, 2.0, theta_b, FieldPolarization::Perpendicular).unwrap();
        assert!(gp.norm() > 0.1, "perpendicular does not null");
    }

    #[test]
    fn passive_materials_never_amplify() {
        let mats = [lossless(2.0), lossless(15.0), Material::concrete()];
        for m in &mats {
            for i in 0..90 {
                let theta = (i as f64) * std::f64::consts::FRAC_PI_2 / 90.0;
                for pol in [FieldPolarization::Perpendicular, FieldPolarization::Parallel] {
                    let g = fresnel_reflection(m, 2.3, theta, pol).unwrap();
                    assert!(
                        g.norm() <= 1.0 + 1e-12,
                        "{} at {theta} rad {pol:?}: |gamma| = {}",
                        m.name,
                        g.norm()
                    );
                }
            }
        }
    }

    #[test]
    fn high_conductivity_behaves_like_a_mirror() {
        let metal = Material {
            name: "metal".into(),
            rel_permittivity: 1.0,
            conductivity_s_per_m: 1e7,
            conductivity_exponent: None,
        };
        let g = fresnel_reflection(&metal, 2.0, 0.3, FieldPolarization::Perpendicular).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-3, "|gamma| = {}", g.norm());
        assert!(g.re < -0.99, "metallic reflection reverses phase");
    }

    #[test]
    fn conductivity_adds_loss_and_phase() {
        let dry = lossless(5.31);
        let wet = Material::concrete();
        let gd = fresnel_reflection(&dry, 1.5, 0.5, FieldPolarization::Perpendicular).unwrap();
        let gw = fresnel_reflection(&wet, 1.5, 0.5, FieldPolarization::Perpendicular).unwrap();
        assert!(gw.im.abs() > 0.0, "lossy material must rotate phase");
        assert!((gd.im).abs() < 1e-15, "lossless stays real");
    }

    #[test]
    fn angle_domain_is_enforced() {
        let m = lossless(4.0);
        assert!(fresnel_reflection(&m, 2.0, std::f64::consts::FRAC_PI_2, FieldPolarization::Parallel).is_err());
        assert!(fresnel_reflection(&m, 2.0, -0.1, FieldPolarization::Parallel).is_err());
        assert!(fresnel_reflection(&m, 0.0, 0.1, FieldPolarization::Parallel).is_err());
    }
}
