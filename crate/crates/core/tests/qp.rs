use plmpc_core::linalg::{Matrix, Vector};
use plmpc_core::qp::{solve_qp, QpProblem, QpSettings, QpStatus};

/// Six-variable box QP whose optimum was computed beforehand by projected
/// gradient descent run to stationarity.
#[test]
fn box_qp_matches_projected_gradient_oracle() {
    let h = [
        [2.517046, 0.45167100000000004, -0.22313600000000006, 0.1267490000000002, -0.786882, -1.203049],
        [0.45167100000000004, 2.598702, -0.23712100000000003, 0.4074600000000001, 0.7302170000000002, -0.7445990000000001],
        [-0.22313600000000006, -0.23712100000000003, 2.088036, -0.615566, 0.8125939999999999, 0.014030000000000055],
        [0.1267490000000002, 0.4074600000000001, -0.615566, 3.18455, -0.69325, 1.110878],
        [-0.786882, 0.7302170000000002, 0.8125939999999999, -0.69325, 2.131469, -0.373818],
        [-1.203049, -0.7445990000000001, 0.014030000000000055, 1.110878, -0.373818, 2.592119],
    ];
    let q = [-0.522, -1.985, 1.32, -1.382, -0.93, 1.521];
    let expected = [0.04852712783976337, 0.28411985195807204, -0.5, 0.6172579593937048, 0.6605857546233264, -0.5];
    let p = Matrix::from_fn(6, 6, |i, j| h[i][j]);
    let mut a = Matrix::zeros(12, 6);
    let mut b = Vector::zeros(12);
    for i in 0..6 {
        a[(i, i)] = 1.0;
        b[i] = 0.8;
        a[(6 + i, i)] = -1.0;
        b[6 + i] = 0.5;
    }
    let problem = QpProblem::new(p, Vector::from_column_slice(&q), a, b, Matrix::zeros(0, 6), Vector::zeros(0)).unwrap();
    let sol = solve_qp(&problem, &QpSettings::default());
    assert_eq!(sol.status, QpStatus::Optimal);
    for i in 0..6 {
        assert!((sol.x[i] - expected[i]).abs() <= 1e-7, "x[{i}] = {}", sol.x[i]);
    }
    assert!((problem.objective(&sol.x) - (-1.9221876959183084)).abs() <= 1e-9);
}
