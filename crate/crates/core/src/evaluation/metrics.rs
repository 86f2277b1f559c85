use serde::{Deserialize, Serialize};

use crate::data::{MultiSeries, VariableCatalog};
use crate::error::{Error, Result};
use crate::inference::{argmax, Predictor};

/// `counts[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionCounts {
    pub fn new(n: usize) -> Self {
        ConfusionCounts {
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_matrix(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if counts.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("confusion matrix must be square".into()));
        }
        Ok(ConfusionCounts { counts })
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n()).map(|i| self.counts[i][i]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Relabels states: new state `i` is old state `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let counts = perm
            .iter()
            .map(|&i| perm.iter().map(|&j| self.counts[i][j]).collect())
            .collect();
        ConfusionCounts { counts }
    }
}

pub fn accuracy(confusion: &ConfusionCounts) -> Result<f64> {
    let total = confusion.total();
    if total == 0 {
        return Err(Error::Invalid("empty confusion matrix".into()));
    }
    Ok(confusion.correct() as f64 / total as f64)
}

/// Accuracy over the summed counts of every offset.
pub fn accuracy_all_offsets(per_offset: &[ConfusionCounts]) -> Result<f64> {
    let first = per_offset
        .first()
        .ok_or_else(|| Error::Invalid("no confusion matrices".into()))?;
    let mut pooled = ConfusionCounts::new(first.n());
    for c in per_offset {
        if c.n() != first.n() {
            return Err(Error::Invalid("confusion matrices differ in size".into()));
        }
        pooled.merge(c);
    }
    accuracy(&pooled)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutualInformation {
    pub raw_bits: f64,
    /// `raw_bits / H(true)`, zero when the truth is constant.
    pub normalized: f64,
    pub entropy_true: f64,
    pub entropy_predicted: f64,
}

fn entropy_bits(counts: impl Iterator<Item = u64>, total: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Plug-in mutual information between true and predicted states, in bits.
pub fn mutual_information(confusion: &ConfusionCounts) -> Result<MutualInformation> {
    let total = confusion.total();
    if total == 0 {
        return Err(Error::Invalid("empty confusion matrix".into()));
    }
    let t = total as f64;
    let n = confusion.n();
    let rows: Vec<u64> = confusion.counts.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..n).map(|j| confusion.counts.iter().map(|r| r[j]).sum()).collect();
    let mut raw = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = confusion.counts[i][j];
            if c > 0 {
                let pxy = c as f64 / t;
                raw += pxy * (c as f64 * t / (rows[i] as f64 * cols[j] as f64)).log2();
            }
        }
    }
    let raw = raw.max(0.0);
    let entropy_true = entropy_bits(rows.into_iter(), t);
    let entropy_predicted = entropy_bits(cols.into_iter(), t);
    let normalized = if entropy_true > 0.0 {
        (raw / entropy_true).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(MutualInformation {
        raw_bits: raw,
        normalized,
        entropy_true,
        entropy_predicted,
    })
}

/// Next-state prediction quality on held-out data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionEvaluation {
    /// Index `o - 1` holds offset `o`; offset 1 sees the full window.
    pub per_offset: Vec<ConfusionCounts>,
    pub per_offset_accuracy: Vec<f64>,
    pub accuracy: f64,
    pub accuracy_dtau: f64,
    pub mutual_information: MutualInformation,
}

/// Argmax predictions at every offset. For each position `t` with a full window
/// before it, offset `o` predicts the state at `t - o + 1` from the rows before it.
pub fn evaluate_predictions(predictor: &Predictor, series: &MultiSeries) -> Result<PredictionEvaluation> {
    if predictor.catalog() != &series.catalog {
        return Err(Error::CatalogMismatch {
            expected: predictor.catalog().hash(),
            found: series.catalog.hash(),
        });
    }
    let w = predictor.window_len();
    let n = series.catalog.n_states();
    let mut per_offset = vec![ConfusionCounts::new(n); w];
    for ind in &series.individuals {
        for t in w..ind.len() {
            for (o, conf) in per_offset.iter_mut().enumerate().map(|(i, c)| (i + 1, c)) {
                let end = t + 1 - o;
                let window = ind.window(t - w, end);
                let p = predictor.distribution_at(window, o)?;
                conf.add(ind.state_at(end, n), argmax(&p));
            }
        }
    }
    if per_offset[0].total() == 0 {
        return Err(Error::TooShort(format!("no evaluation window of {} ticks", w + 1)));
    }
    let per_offset_accuracy = per_offset.iter().map(accuracy).collect::<Result<Vec<_>>>()?;
    Ok(PredictionEvaluation {
        accuracy: accuracy_all_offsets(&per_offset)?,
        accuracy_dtau: per_offset_accuracy[0],
        mutual_information: mutual_information(&per_offset[0])?,
        per_offset_accuracy,
        per_offset,
    })
}

/// Transition counts `counts[from][to]` between consecutive states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SankeyJson {
    pub nodes: Vec<String>,
    pub links: Vec<SankeyLink>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SankeyLink {
    pub source: String,
    pub target: String,
    pub value: u64,
}

impl FlowMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        FlowMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    /// Adds the transitions of one state sequence.
    pub fn add_sequence(&mut self, states: &[usize]) {
        for pair in states.windows(2) {
            self.counts[pair[0]][pair[1]] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn to_json(&self) -> SankeyJson {
        let mut links = Vec::new();
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &value) in row.iter().enumerate() {
                if value > 0 {
                    links.push(SankeyLink {
                        source: self.labels[i].clone(),
                        target: self.labels[j].clone(),
                        value,
                    });
                }
            }
        }
        SankeyJson {
            nodes: self.labels.clone(),
            links,
        }
    }
}

/// Flows of one state sequence.
pub fn sankey_flows(catalog: &VariableCatalog, states: &[usize]) -> Result<FlowMatrix> {
    if states.len() < 2 {
        return Err(Error::TooShort("a flow needs at least two ticks".into()));
    }
    if let Some(&s) = states.iter().find(|&&s| s >= catalog.n_states()) {
        return Err(Error::Invalid(format!("state index {s} out of range")));
    }
    let mut f = FlowMatrix::new(catalog.states().to_vec());
    f.add_sequence(states);
    Ok(f)
}

/// Flows pooled over every individual of a series (or trace).
pub fn series_flows(series: &MultiSeries) -> FlowMatrix {
    let n = series.catalog.n_states();
    let mut f = FlowMatrix::new(series.catalog.states().to_vec());
    for ind in &series.individuals {
        let states: Vec<usize> = (0..ind.len()).map(|t| ind.state_at(t, n)).collect();
        f.add_sequence(&states);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let diag = ConfusionCounts::from_matrix(vec![vec![5, 0], vec![0, 7]]).unwrap();
        assert_eq!(accuracy(&diag).unwrap(), 1.0);
        let off = ConfusionCounts::from_matrix(vec![vec![0, 9], vec![0, 0]]).unwrap();
        assert_eq!(accuracy(&off).unwrap(), 0.0);
        let m = ConfusionCounts::from_matrix(vec![vec![3, 1], vec![2, 4]]).unwrap();
        assert_eq!(accuracy(&m).unwrap(), 0.7);
        assert!(accuracy(&ConfusionCounts::new(3)).is_err());
    }

    #[test]
    fn mutual_information_extremes() {
        let perfect = ConfusionCounts::from_matrix(vec![vec![50, 0], vec![0, 50]]).unwrap();
        let mi = mutual_information(&perfect).unwrap();
        assert!((mi.raw_bits - 1.0).abs() < 1e-15);
        assert!((mi.normalized - 1.0).abs() < 1e-15);
        let independent = ConfusionCounts::from_matrix(vec![vec![6, 3], vec![4, 2]]).unwrap();
        assert!(mutual_information(&independent).unwrap().raw_bits.abs() < 1e-15);
    }

    #[test]
    fn flows_examples() {
        let cat = VariableCatalog::synthetic(2, 0).unwrap();
        let f = sankey_flows(&cat, &[1; 10]).unwrap();
        assert_eq!(f.counts, vec![vec![0, 0], vec![0, 9]]);
        let alt: Vec<usize> = (0..9).map(|t| t % 2).collect();
        let f = sankey_flows(&cat, &alt).unwrap();
        assert_eq!(f.counts, vec![vec![0, 4], vec![4, 0]]);
        assert_eq!(f.to_json().links.len(), 2);
    }

    #[test]
    fn flows_hand_counted() {
        // a a b c a b: a->a, a->b, b->c, c->a, a->b
        let cat = VariableCatalog::synthetic(3, 0).unwrap();
        let f = sankey_flows(&cat, &[0, 0, 1, 2, 0, 1]).unwrap();
        assert_eq!(f.counts, vec![vec![1, 2, 0], vec![0, 0, 1], vec![1, 0, 0]]);
    }
}
