use crate::model::State;

/// Concentration function `P(eta) = max_y int_{y-eta}^{y+eta} sum_j |u_j|^2 dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationProfile {
    pub etas: Vec<f64>,
    pub values: Vec<f64>,
    /// `P` at the largest `eta` divided by the total mass.
    pub gamma_proxy: f64,
    pub total_mass: f64,
}

/// Evaluate the concentration function at the given window half-widths.
///
/// Window centers run over the grid nodes and windows wrap around the
/// periodic box; a window covers the nodes with `|x - y| <= eta`, capped at
/// the whole grid.
pub fn concentration(state: &State, etas: &[f64]) -> ConcentrationProfile {
    let grid = state.grid();
    let n = grid.n();
    let h = grid.spacing();
    let density: Vec<f64> = (0..n)
        .map(|m| state.components().iter().map(|f| f.values()[m].norm_sqr()).sum())
        .collect();
    // Prefix sums over two periods make every wrapped window contiguous.
    let mut prefix = Vec::with_capacity(2 * n + 1);
    prefix.push(0.0);
    for m in 0..2 * n {
        prefix.push(prefix[m] + density[m % n]);
    }
    let total = h * prefix[n];

    let mut sorted: Vec<f64> = etas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let values = sorted
        .iter()
        .map(|&eta| {
            let half = (eta.max(0.0) / h + 1e-9).floor() as usize;
            let width = (2 * half + 1).min(n);
            if width == n {
                return total;
            }
            let best = (0..n)
                .map(|c| {
                    let start = (c + n - half) % n;
                    prefix[start + width] - prefix[start]
                })
                .fold(0.0, f64::max);
            h * best
        })
        .collect::<Vec<_>>();
    let gamma_proxy = match values.last() {
        Some(&v) if total > 0.0 => v / total,
        _ => 0.0,
    };
    ConcentrationProfile { etas: sorted, values, gamma_proxy, total_mass: total }
}
