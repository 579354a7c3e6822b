use nalgebra::DMatrix;

/// Table `F[(nu, nu')] = <e, nu | g, nu'>` for `nu < rows`, `nu' < cols`.
///
/// The excited-state oscillator is displaced by `lambda_v / omega_v`, so
/// `F = <nu| D(beta) |nu'>` with `beta = -lambda_v / omega_v`, filled by the
/// two-index recursion
/// `F[m+1, n] = (sqrt(n) F[m, n-1] + beta F[m, n]) / sqrt(m+1)`.
pub fn franck_condon_table(lambda_v: f64, omega_v: f64, rows: usize, cols: usize) -> DMatrix<f64> {
    let beta = -lambda_v / omega_v;
    let mut f = DMatrix::zeros(rows, cols);
    if rows == 0 || cols == 0 {
        return f;
    }
    f[(0, 0)] = (-0.5 * beta * beta).exp();
    for n in 1..cols {
        f[(0, n)] = -beta * f[(0, n - 1)] / (n as f64).sqrt();
    }
    for m in 0..rows - 1 {
        let norm = 1.0 / ((m + 1) as f64).sqrt();
        f[(m + 1, 0)] = beta * f[(m, 0)] * norm;
        for n in 1..cols {
            f[(m + 1, n)] = ((n as f64).sqrt() * f[(m, n - 1)] + beta * f[(m, n)]) * norm;
        }
    }
    f
}

/// Single Franck-Condon factor `<e, nu | g, nu'>`.
pub fn franck_condon(lambda_v: f64, omega_v: f64, nu: usize, nu_prime: usize) -> f64 {
    franck_condon_table(lambda_v, omega_v, nu + 1, nu_prime + 1)[(nu, nu_prime)]
}
