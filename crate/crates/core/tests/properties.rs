use proptest::prelude::*;

use coparse::colabel::energy::shift_and_clamp;
use coparse::colabel::fit_cooccurrence;
use coparse::corpus::{LabelId, Partition};
use coparse::esvm::calibrate::Calibration;
use coparse::features::{chi_square, hog, Histogram40, HogTemplate, HISTOGRAM_BINS};
use coparse::graphcut::{alpha_expansion, LabelingProblem, PairwiseTerm};
use coparse::grouping::{solve_multicut, MulticutInstance, WeightedEdge};
use coparse::io::pnm::{decode_pgm, encode_pgm16};
use coparse::io::records::RleMask;
use coparse::raster::{Grid, Rect};

fn histogram() -> impl Strategy<Value = Histogram40> {
    prop::collection::vec(0.0..10.0f64, HISTOGRAM_BINS).prop_map(|v| {
        let mut raw = [0.0; HISTOGRAM_BINS];
        raw.copy_from_slice(&v);
        Histogram40::from_raw(&raw)
    })
}

fn grid<T: std::fmt::Debug + Clone>(
    cell: impl Strategy<Value = T> + Clone,
) -> impl Strategy<Value = Grid<T>> {
    (1..12usize, 1..12usize).prop_flat_map(move |(w, h)| {
        prop::collection::vec(cell.clone(), w * h)
            .prop_map(move |v| Grid::from_vec(w, h, v).unwrap())
    })
}

/// Random graph: node count, then a subset of the possible edges.
fn graph(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_nodes).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        let m = pairs.len();
        (Just(n), prop::collection::vec(any::<bool>(), m)).prop_map(move |(n, keep)| {
            let edges = pairs
                .iter()
                .zip(keep)
                .filter(|(_, k)| *k)
                .map(|(e, _)| *e)
                .collect();
            (n, edges)
        })
    })
}

fn labeling_problem() -> impl Strategy<Value = LabelingProblem> {
    (graph(7), 2..=4u16).prop_flat_map(|((n, edges), l)| {
        let unary = prop::collection::vec(prop::collection::vec(0.0..5.0f64, l as usize), n);
        let weights = prop::collection::vec(0.0..3.0f64, edges.len());
        (unary, weights).prop_map(move |(unary, weights)| LabelingProblem {
            candidates: vec![(0..l).collect(); n],
            unary,
            pairwise: edges
                .iter()
                .zip(&weights)
                .map(|(&(u, v), &w)| PairwiseTerm {
                    u,
                    v,
                    table: (0..l)
                        .flat_map(|a| (0..l).map(move |b| if a == b { 0.0 } else { w }))
                        .collect(),
                })
                .collect(),
        })
    })
}

proptest! {
    #[test]
    fn chi_square_is_a_symmetric_bounded_distance(a in histogram(), b in histogram()) {
        let d = chi_square(&a, &b);
        prop_assert!((d - chi_square(&b, &a)).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!(chi_square(&a, &a).abs() < 1e-12);
        prop_assert!((a.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn partition_round_trips_through_edge_labels((n, edges) in graph(9), raw in prop::collection::vec(0..4usize, 9)) {
        let p = Partition::from_assignment(&raw[..n]).connected_refinement(&edges);
        let labels = p.to_edge_labels(&edges);
        prop_assert_eq!(Partition::from_edge_labels(n, &edges, &labels), p.clone());
        prop_assert_eq!(Partition::from_assignment(&p.assignment), p);
    }

    #[test]
    fn multicut_never_worse_than_all_singletons((n, edges) in graph(8), ds in prop::collection::vec(0..=1u8, 28)) {
        let inst = MulticutInstance {
            node_count: n,
            edges: edges.iter().zip(&ds).map(|(&(u, v), &d)| WeightedEdge { u, v, d }).collect(),
            masks: Vec::new(),
        };
        let sol = solve_multicut(&inst, 0.5).unwrap();
        prop_assert!(sol.objective <= 1e-12);
        prop_assert_eq!(sol.partition.len(), n);
        // every region is connected
        prop_assert_eq!(sol.partition.connected_refinement(&edges), sol.partition);
    }

    #[test]
    fn expansion_only_descends(p in labeling_problem()) {
        let start = p.unary_argmin();
        let r = alpha_expansion(&p, &start, 10).unwrap();
        prop_assert!(r.energy <= p.energy(&start).unwrap() + 1e-12);
        prop_assert!((r.energy - p.energy(&r.labeling).unwrap()).abs() < 1e-9);
        prop_assert!(r.sweep_energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn cooccurrence_is_a_symmetric_distribution(
        pairs in prop::collection::vec((0..5u16, 0..5u16), 0..60)
    ) {
        let pairs: Vec<(LabelId, LabelId)> = pairs;
        let psi = fit_cooccurrence(&pairs, 5).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                prop_assert_eq!(psi.get(a, b).unwrap(), psi.get(b, a).unwrap());
                prop_assert!(psi.get(a, b).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn shifted_tables_start_at_zero(mut t in prop::collection::vec(-50.0..50.0f64, 1..20)) {
        let before = t.clone();
        shift_and_clamp(&mut t, 20.0);
        prop_assert!(t.contains(&0.0));
        prop_assert!(t.iter().all(|&v| (0.0..=20.0).contains(&v)));
        for i in 0..t.len() {
            for j in 0..t.len() {
                if before[i] < before[j] {
                    prop_assert!(t[i] <= t[j]);
                }
            }
        }
    }

    #[test]
    fn hog_descriptors_are_finite_and_sized(
        (cy, cx) in (2..6usize, 2..6usize),
        seed in any::<u64>()
    ) {
        let t = HogTemplate { cells_y: cy, cells_x: cx };
        let mut state = seed | 1;
        let patch = Grid::from_fn(t.pixel_width(), t.pixel_height(), |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 256) as f64
        });
        let d = hog(&patch, t).unwrap();
        prop_assert_eq!(d.values.len(), t.descriptor_len());
        prop_assert!(d.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn rle_masks_round_trip(mask in grid(any::<bool>())) {
        prop_assert_eq!(RleMask::encode(&mask).decode().unwrap(), mask);
    }

    #[test]
    fn pgm_round_trips(img in grid(any::<u16>())) {
        prop_assert_eq!(decode_pgm(&encode_pgm16(&img)).unwrap(), img);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(
        a in (0..20usize, 0..20usize, 1..10usize, 1..10usize),
        b in (0..20usize, 0..20usize, 1..10usize, 1..10usize)
    ) {
        let (ra, rb) = (Rect::new(a.0, a.1, a.2, a.3), Rect::new(b.0, b.1, b.2, b.3));
        let i = ra.iou(&rb);
        prop_assert!((0.0..=1.0).contains(&i));
        prop_assert_eq!(i, rb.iou(&ra));
        prop_assert_eq!(ra.iou(&ra), 1.0);
    }

    #[test]
    fn calibrated_scores_rise_with_raw_score(alpha in 0.01..10.0f64, beta in -3.0..3.0f64, x in -5.0..5.0f64, dx in 0.001..2.0f64) {
        let c = Calibration { alpha, beta };
        prop_assert!(c.score(x) <= c.score(x + dx));
        prop_assert!((c.score(beta) - 0.5).abs() < 1e-12);
    }
}
