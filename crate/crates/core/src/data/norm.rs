use super::HsiCube;
use crate::error::{Error, Result};

/// Global min-max scaling to `[0, 1]`: one minimum and one maximum over all
/// `H·W·B` values, never per band.
pub fn mmnorm(cube: &HsiCube) -> Result<HsiCube> {
    let (lo, hi) = cube
        .values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi <= lo {
        return Err(Error::Degenerate(format!(
            "constant cube (every value is {lo}); min-max scaling is undefined"
        )));
    }
    let (lo, span) = (lo as f64, hi as f64 - lo as f64);
    let values = cube
        .values
        .iter()
        .map(|&v| ((v as f64 - lo) / span) as f32)
        .collect();
    Ok(HsiCube {
        values,
        ..cube.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_values() {
        let cube = HsiCube::new(1, 3, 1, vec![4.0, 2.0, 6.0]).unwrap();
        assert_eq!(mmnorm(&cube).unwrap().values, vec![0.5, 0.0, 1.0]);
    }

    #[test]
    fn unit_range_is_fixed_point() {
        let cube = HsiCube::new(2, 2, 1, vec![0.0, 0.25, 1.0, 0.75]).unwrap();
        assert_eq!(mmnorm(&cube).unwrap().values, cube.values);
    }

    #[test]
    fn constant_cube_is_degenerate() {
        let cube = HsiCube::new(2, 1, 2, vec![3.0; 4]).unwrap();
        assert!(matches!(mmnorm(&cube), Err(Error::Degenerate(_))));
    }

    #[test]
    fn random_cube_matches_scalar_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f32> = (0..4 * 5 * 6).map(|_| rng.random_range(-50.0..900.0)).collect();
        let cube = HsiCube::new(4, 5, 6, values.clone()).unwrap();
        let out = mmnorm(&cube).unwrap();
        let lo = values.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
        let hi = values.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
        for (o, v) in out.values.iter().zip(&values) {
            assert_eq!(*o, ((*v as f64 - lo) / (hi - lo)) as f32);
        }
        let min = out.values.iter().cloned().fold(f32::INFINITY, f32::min);
        let max = out.values.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!((min, max), (0.0, 1.0));
    }
}
