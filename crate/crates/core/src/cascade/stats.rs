/// Sum that does not depend on input order: values are sorted first.
pub(crate) fn order_free_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    order_free_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub(crate) fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss = order_free_sum(values.iter().map(|x| (x - mean) * (x - mean)));
    (ss / (values.len() - 1) as f64).sqrt()
}

pub(crate) fn centroid2(points: impl Iterator<Item = [f64; 2]> + Clone) -> [f64; 2] {
    let n = points.clone().count() as f64;
    [
        order_free_sum(points.clone().map(|p| p[0])) / n,
        order_free_sum(points.map(|p| p[1])) / n,
    ]
}
