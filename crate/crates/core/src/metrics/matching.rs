use crate::direction::{angle_deg, Vec3};

/// Optimal one-to-one assignment between the references and predictions of
/// one class in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    /// `(ref index, pred index, angle in degrees)`, sorted by ref index.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_refs: Vec<usize>,
    pub unmatched_preds: Vec<usize>,
}

impl FrameMatch {
    pub fn total_angle_deg(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).sum()
    }
}

/// Minimum-total-angle assignment of `min(|refs|, |preds|)` pairs.
pub fn match_frame(refs: &[Vec3], preds: &[Vec3]) -> FrameMatch {
    let cost: Vec<Vec<f64>> = refs
        .iter()
        .map(|r| preds.iter().map(|p| angle_deg(*r, *p)).collect())
        .collect();
    let assignment = if refs.len() <= preds.len() {
        hungarian(&cost, refs.len(), preds.len())
    } else {
        // solve the transposed problem so rows never outnumber columns
        let t: Vec<Vec<f64>> = (0..preds.len())
            .map(|j| (0..refs.len()).map(|i| cost[i][j]).collect())
            .collect();
        let by_pred = hungarian(&t, preds.len(), refs.len());
        let mut by_ref = vec![None; refs.len()];
        for (j, i) in by_pred.into_iter().enumerate() {
            if let Some(i) = i {
                by_ref[i] = Some(j);
            }
        }
        by_ref
    };
    let mut pred_used = vec![false; preds.len()];
    let mut pairs = Vec::new();
    let mut unmatched_refs = Vec::new();
    for (i, a) in assignment.into_iter().enumerate() {
        match a {
            Some(j) => {
                pred_used[j] = true;
                pairs.push((i, j, cost[i][j]));
            }
            None => unmatched_refs.push(i),
        }
    }
    let unmatched_preds = (0..preds.len()).filter(|&j| !pred_used[j]).collect();
    FrameMatch {
        pairs,
        unmatched_refs,
        unmatched_preds,
    }
}

/// Shortest-augmenting-path Hungarian algorithm with potentials for an
/// `n x m` cost matrix, `n <= m`. Returns the column of each row.
fn hungarian(cost: &[Vec<f64>], n: usize, m: usize) -> Vec<Option<usize>> {
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays, index 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            out[row_of[j] - 1] = Some(j - 1);
        }
    }
    out
}
