//! k-nearest-neighbour voting.

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    pub k: usize,
    /// Training rows, after standardization when enabled.
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    /// Per-feature centre and scale applied to queries (and already applied
    /// to `points`), when standardization is on.
    pub standardize: Option<(Vec<f64>, Vec<f64>)>,
}

pub fn fit_knn<R: AsRef<[f64]>>(rows: &[R], labels: &[u8], k: usize, standardize: bool) -> Neighbors {
    let mut points: Vec<Vec<f64>> = rows.iter().map(|r| r.as_ref().to_vec()).collect();
    let scaling = standardize.then(|| {
        let dim = points.first().map_or(0, Vec::len);
        let n = points.len() as f64;
        let mut centre = vec![0.0; dim];
        for p in &points {
            centre.iter_mut().zip(p).for_each(|(c, x)| *c += x);
        }
        centre.iter_mut().for_each(|c| *c /= n);
        let mut scale = vec![0.0; dim];
        for p in &points {
            scale.iter_mut().zip(p).zip(&centre).for_each(|((s, x), c)| *s += (x - c) * (x - c));
        }
        // Constant features are left unscaled.
        scale.iter_mut().for_each(|s| *s = if *s > 0.0 { (*s / n).sqrt() } else { 1.0 });
        for p in &mut points {
            apply(p, &centre, &scale);
        }
        (centre, scale)
    });
    Neighbors {
        k,
        points,
        labels: labels.to_vec(),
        standardize: scaling,
    }
}

fn apply(x: &mut [f64], centre: &[f64], scale: &[f64]) {
    x.iter_mut().zip(centre).zip(scale).for_each(|((v, c), s)| *v = (*v - c) / s);
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Neighbors {
    pub fn effective_k(&self) -> usize {
        self.k.min(self.points.len())
    }

    /// Fraction of label-1 points among the `k` nearest, ties in distance
    /// going to the lower training index.
    pub fn vote(&self, query: &[f64]) -> f64 {
        let mut q = query.to_vec();
        if let Some((centre, scale)) = &self.standardize {
            apply(&mut q, centre, scale);
        }
        let k = self.effective_k();
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(&q, p), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, order);
        }
        let hits = dist[..k].iter().filter(|(_, i)| self.labels[*i] == 1).count();
        hits as f64 / k as f64
    }
}
