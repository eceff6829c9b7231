//! CGS unit conversions. Lengths are cm, masses g, times s, stresses Barye (dyn/cm²).

/// 1 mmHg in Barye.
pub const MMHG_TO_BARYE: f64 = 1333.22;

pub fn mmhg_to_barye(p_mmhg: f64) -> f64 {
    p_mmhg * MMHG_TO_BARYE
}

/// 1 Pa = 10 Barye.
pub fn pascal_to_barye(p: f64) -> f64 {
    p * 10.0
}

/// 1 kg/m³ = 1e-3 g/cm³.
pub fn kg_per_m3_to_g_per_cm3(rho: f64) -> f64 {
    rho * 1.0e-3
}

pub fn meter_to_cm(l: f64) -> f64 {
    l * 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirteen_mmhg() {
        assert_eq!(mmhg_to_barye(13.0), 13.0 * 1333.22);
        assert!((mmhg_to_barye(13.0) - 17331.86).abs() < 1e-9);
    }
}
