use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelId, Vocabulary, BACKGROUND};
use crate::error::{Error, Result};
use crate::raster::Grid;

/// How the metrics are averaged; echoed into run metadata.
pub const METRIC_CONVENTIONS: &str = "aPA: per-image pixel accuracy averaged over images. \
     mAGR: per-label recall averaged over the images containing that label, then averaged over labels \
     (background included).";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "aPA")]
    pub apa: f64,
    #[serde(rename = "mAGR")]
    pub magr: f64,
    /// Mean-over-images recall per label name, for labels present in the
    /// ground truth of at least one image.
    pub per_label_recall: BTreeMap<String, f64>,
}

/// Scores predicted label maps against ground truth.
pub fn evaluate(
    predicted: &[Grid<LabelId>],
    ground_truth: &[&Grid<LabelId>],
    vocabulary: &Vocabulary,
) -> Result<Metrics> {
    if predicted.len() != ground_truth.len() {
        return Err(Error::malformed(format!(
            "{} predictions for {} ground-truth maps",
            predicted.len(),
            ground_truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::malformed("nothing to evaluate"));
    }
    let mut accuracy = 0.0;
    let mut recalls: BTreeMap<LabelId, Vec<f64>> = BTreeMap::new();
    for (k, (pred, gt)) in predicted.iter().zip(ground_truth).enumerate() {
        if !pred.same_shape(gt) {
            return Err(Error::malformed(format!(
                "prediction {k} differs in size from its ground truth"
            )));
        }
        let mut hits: BTreeMap<LabelId, (usize, usize)> = BTreeMap::new();
        let mut correct = 0usize;
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            let e = hits.entry(g).or_default();
            e.1 += 1;
            if p == g {
                e.0 += 1;
                correct += 1;
            }
        }
        accuracy += correct as f64 / gt.len() as f64;
        for (l, (c, n)) in hits {
            recalls.entry(l).or_default().push(c as f64 / n as f64);
        }
    }
    let per_label: BTreeMap<LabelId, f64> = recalls
        .into_iter()
        .map(|(l, v)| (l, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let magr = per_label.values().sum::<f64>() / per_label.len() as f64;
    let per_label_recall = per_label
        .into_iter()
        .map(|(l, r)| {
            let name = vocabulary
                .name(l)
                .map_or_else(|| format!("label-{l}"), str::to_string);
            (name, r)
        })
        .collect();
    Ok(Metrics {
        apa: accuracy / predicted.len() as f64,
        magr,
        per_label_recall,
    })
}

/// Ground-truth maps of every image, or a data error naming the first
/// image without one.
pub fn ground_truths(corpus: &Corpus) -> Result<Vec<&Grid<LabelId>>> {
    corpus
        .images
        .iter()
        .map(|i| {
            i.ground_truth.as_ref().ok_or_else(|| {
                Error::InsufficientData(format!("image `{}` has no ground truth", i.id))
            })
        })
        .collect()
}

/// The predictor that labels every pixel background.
pub fn all_background(corpus: &Corpus) -> Vec<Grid<LabelId>> {
    corpus
        .images
        .iter()
        .map(|i| Grid::filled(i.width(), i.height(), BACKGROUND))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::new(vec!["background".into(), "a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn two_by_two_hand_arithmetic() {
        let gt = Grid::from_vec(2, 2, vec![1, 1, 2, 2]).unwrap();
        let pred = Grid::from_vec(2, 2, vec![1, 2, 2, 2]).unwrap();
        let m = evaluate(&[pred], &[&gt], &vocab()).unwrap();
        assert_eq!(m.apa, 0.75);
        assert_eq!(m.per_label_recall["a"], 0.5);
        assert_eq!(m.per_label_recall["b"], 1.0);
        assert_eq!(m.magr, 0.75);
    }

    #[test]
    fn perfect_prediction() {
        let gt = Grid::from_vec(3, 1, vec![0, 1, 2]).unwrap();
        let m = evaluate(std::slice::from_ref(&gt), &[&gt], &vocab()).unwrap();
        assert_eq!((m.apa, m.magr), (1.0, 1.0));
    }

    #[test]
    fn background_baseline_is_mean_background_fraction() {
        let g1 = Grid::from_vec(4, 1, vec![0, 0, 0, 1]).unwrap();
        let g2 = Grid::from_vec(2, 1, vec![0, 2]).unwrap();
        let pred = vec![Grid::filled(4, 1, 0), Grid::filled(2, 1, 0)];
        let m = evaluate(&pred, &[&g1, &g2], &vocab()).unwrap();
        assert_eq!(m.apa, (0.75 + 0.5) / 2.0);
        // labels a, b are never recalled; background always is
        assert_eq!(m.magr, 1.0 / 3.0);
    }

    #[test]
    fn mismatches_are_malformed() {
        let gt = Grid::filled(2, 2, 0u16);
        assert!(matches!(
            evaluate(&[Grid::filled(2, 1, 0)], &[&gt], &vocab()),
            Err(Error::MalformedInput(_))
        ));
        assert!(evaluate(&[], &[&gt], &vocab()).is_err());
    }
}
