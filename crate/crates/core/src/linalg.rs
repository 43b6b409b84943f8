use nalgebra::DMatrix;

/// Moore-Penrose pseudoinverse via SVD; singular values below
/// `rel_cutoff * sigma_max` are treated as zero. Also returns the singular
/// values in decreasing order.
pub(crate) fn pseudo_inverse(m: &DMatrix<f64>, rel_cutoff: f64) -> (DMatrix<f64>, Vec<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_cutoff * sigma_max;

    let mut pinv = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            pinv += v_t.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    let mut values: Vec<f64> = sigma.iter().cloned().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    (pinv, values)
}
