use lik::{to_matrix, to_rows};

#[test]
fn conversions_preserve_bits() {
    let rows = vec![vec![0.1, -2.5e-300, f64::MAX], vec![1.0 / 3.0, 0.0, -0.0]];
    let back = to_rows(&to_matrix(&rows).unwrap());
    for (a, b) in rows.iter().flatten().zip(back.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn shape_errors_name_the_failure() {
    let err = to_matrix(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
    assert!(err.to_string().starts_with("invalid-dimension"), "{err}");
}
