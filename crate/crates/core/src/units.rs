//! Decibel conversions. Everything past the configuration boundary is linear
//! scale and watts.

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    10f64.powf((x_dbm - 30.0) / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn watts_to_dbm(x: f64) -> f64 {
    10.0 * x.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((dbm_to_watts(-100.0) - 1e-13).abs() < 1e-25);
        assert!((dbm_to_watts(15.0) - 0.031622776601683794).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(5.0)) - 5.0).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(-37.5)) + 37.5).abs() < 1e-12);
    }
}
