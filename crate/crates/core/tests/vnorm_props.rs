use proptest::prelude::*;
use veccontract::linalg::euclid;
use veccontract::vnorm::GainMatrix;

/// Non-negative `m × n` gain with a positive entry in every column.
fn definite_gain() -> impl Strategy<Value = (GainMatrix, usize)> {
    (1usize..5, 1usize..5).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..3.0, n), m),
            prop::collection::vec(0usize..m, n),
            prop::collection::vec(0.1f64..3.0, n),
        )
            .prop_map(move |(mut rows, pick, lift)| {
                for j in 0..n {
                    rows[pick[j]][j] += lift[j];
                }
                (GainMatrix::new(&rows).unwrap(), n)
            })
    })
}

fn vec_n(n: usize, b: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-b..b, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn homogeneity_and_triangle(
        (g, dx, dy, c) in definite_gain().prop_flat_map(|(g, n)| {
            (Just(g), vec_n(n, 10.0), vec_n(n, 10.0), -5.0f64..5.0)
        })
    ) {
        let nx = g.norm(&dx).unwrap();
        let scaled: Vec<f64> = dx.iter().map(|v| c * v).collect();
        let ns = g.norm(&scaled).unwrap();
        for (a, b) in ns.components().iter().zip(nx.components()) {
            prop_assert!((a - c.abs() * b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let sum: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a + b).collect();
        let nsum = g.norm(&sum).unwrap();
        let ny = g.norm(&dy).unwrap();
        for i in 0..g.rows() {
            prop_assert!(nsum.components()[i] <= nx.components()[i] + ny.components()[i] + 1e-9);
        }
    }

    #[test]
    fn definite_norm_vanishes_only_at_zero(
        (g, dx) in definite_gain().prop_flat_map(|(g, n)| (Just(g), vec_n(n, 1.0)))
    ) {
        let zero = vec![0.0; g.cols()];
        prop_assert!(g.norm(&zero).unwrap().components().iter().all(|&v| v == 0.0));
        if dx.iter().any(|&v| v != 0.0) {
            prop_assert!(g.norm(&dx).unwrap().components().iter().any(|&v| v > 0.0));
        }
    }

    #[test]
    fn squared_norm_convex(
        (g, dx, dy, l) in definite_gain().prop_flat_map(|(g, n)| {
            (Just(g), vec_n(n, 10.0), vec_n(n, 10.0), 0.0f64..=1.0)
        })
    ) {
        let mix: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| l * a + (1.0 - l) * b).collect();
        let (fm, fx, fy) = (
            g.norm_squared(&mix).unwrap(),
            g.norm_squared(&dx).unwrap(),
            g.norm_squared(&dy).unwrap(),
        );
        for i in 0..g.rows() {
            prop_assert!(fm[i] <= l * fx[i] + (1.0 - l) * fy[i] + 1e-9);
        }
    }

    #[test]
    fn rate_is_frechet_along_direction(
        (g, dx, h) in definite_gain().prop_flat_map(|(g, n)| (Just(g), vec_n(n, 5.0), vec_n(n, 5.0)))
    ) {
        prop_assert_eq!(g.norm_squared_rate(&dx, &h).unwrap(), g.frechet_apply(&dx, &h).unwrap());
    }
}

#[test]
fn all_ones_row_is_euclidean() {
    let g = GainMatrix::new(&[vec![1.0; 3]]).unwrap();
    let v = [3.0, -4.0, 12.0];
    assert_eq!(g.norm(&v).unwrap().components(), &[euclid(&v)]);
}

#[test]
fn non_definite_gain_flagged() {
    let g = GainMatrix::new(&[vec![1.0, 0.0]]).unwrap();
    assert!(!g.is_definite());
    assert_eq!(g.norm(&[0.0, 7.0]).unwrap().components(), &[0.0]);
}

#[test]
fn negative_and_ragged_rejected() {
    assert!(GainMatrix::new(&[vec![1.0, -1.0]]).is_err());
    assert!(GainMatrix::new(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    assert!(GainMatrix::new(&[vec![f64::NAN]]).is_err());
    let g = GainMatrix::identity(2);
    assert!(g.norm(&[1.0]).is_err());
}
