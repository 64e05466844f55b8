use proptest::prelude::*;
use soficlab::*;

fn perm_of(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle().prop_map(|v| Permutation::new(v).unwrap())
}

fn perms(max: usize, count: usize) -> impl Strategy<Value = Vec<Permutation>> {
    (1..=max).prop_flat_map(move |n| proptest::collection::vec(perm_of(n), count))
}

fn pinj_of(n: usize) -> impl Strategy<Value = PartialInjection> {
    (perm_of(n), proptest::collection::vec(any::<bool>(), n)).prop_map(move |(p, keep)| {
        let map = (0..n).map(|x| keep[x].then(|| p.apply(x))).collect();
        PartialInjection::new(map).unwrap()
    })
}

/// 0/1 matrix with `m[y][x] = 1` iff `x ↦ y`, so composition is the matrix product.
fn matrix(p: &PartialInjection) -> Vec<Vec<u8>> {
    let n = p.n();
    let mut m = vec![vec![0; n]; n];
    for (x, y) in p.pairs() {
        m[y][x] = 1;
    }
    m
}

fn product(a: &[Vec<u8>], b: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn transpose(a: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i]).collect()).collect()
}

proptest! {
    #[test]
    fn composition_is_associative(p in perms(12, 3)) {
        let left = p[0].compose(&p[1]).unwrap().compose(&p[2]).unwrap();
        let right = p[0].compose(&p[1].compose(&p[2]).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn compose_applies_right_factor_first(p in perms(12, 2)) {
        let c = p[0].compose(&p[1]).unwrap();
        for x in 0..c.len() {
            prop_assert_eq!(c.apply(x), p[0].apply(p[1].apply(x)));
        }
    }

    #[test]
    fn inverse_and_powers(p in perms(12, 1), k in -7i64..7) {
        let p = &p[0];
        prop_assert!(p.compose(&p.inverse()).unwrap().is_identity());
        let mut slow = Permutation::identity(p.len());
        let step = if k < 0 { p.inverse() } else { p.clone() };
        for _ in 0..k.unsigned_abs() {
            slow = step.compose(&slow).unwrap();
        }
        prop_assert_eq!(p.pow(k), slow);
    }

    #[test]
    fn hamming_is_bi_invariant(p in perms(12, 3)) {
        let (a, b, u) = (&p[0], &p[1], &p[2]);
        let d = a.normalized_hamming(b).unwrap();
        prop_assert_eq!(u.compose(a).unwrap().normalized_hamming(&u.compose(b).unwrap()).unwrap(), d);
        prop_assert_eq!(a.compose(u).unwrap().normalized_hamming(&b.compose(u).unwrap()).unwrap(), d);
    }

    #[test]
    fn fixed_fraction_is_distance_to_identity(p in perms(12, 1)) {
        let p = &p[0];
        let d = p.normalized_hamming(&Permutation::identity(p.len())).unwrap();
        prop_assert_eq!(p.fixed_fraction(), Rational::from_integer(1) - d);
    }

    #[test]
    fn conjugation_formula(p in perms(10, 2)) {
        let (a, by) = (&p[0], &p[1]);
        let c = a.conjugate_by(by).unwrap();
        for x in 0..a.len() {
            prop_assert_eq!(c.apply(by.apply(x)), by.apply(a.apply(x)));
        }
    }

    #[test]
    fn cycles_rebuild_the_permutation(p in perms(12, 1)) {
        let p = &p[0];
        prop_assert_eq!(&Permutation::from_cycles(p.len(), &p.cycles()).unwrap(), p);
    }

    #[test]
    fn partial_injections_match_matrices((a, b) in (1..=6usize).prop_flat_map(|n| (pinj_of(n), pinj_of(n)))) {
        prop_assert_eq!(matrix(&a.compose(&b).unwrap()), product(&matrix(&a), &matrix(&b)));
        prop_assert_eq!(matrix(&a.inverse()), transpose(&matrix(&a)));
        let fixed: usize = (0..a.n()).map(|i| matrix(&a)[i][i] as usize).sum();
        prop_assert_eq!(a.fixed_points(), fixed);
    }

    #[test]
    fn rounding_keeps_one_point_per_column(images in (1..=40usize).prop_flat_map(|n| proptest::collection::vec(0..n, n))) {
        let n = images.len();
        let (w, moved) = round_to_permutation(&RowFunction::new(images.clone()).unwrap());
        let missed = (0..n).filter(|c| !images.contains(c)).count();
        prop_assert_eq!(moved, missed);
        prop_assert_eq!((0..n).filter(|&x| w.apply(x) != images[x]).count(), missed);
    }

    #[test]
    fn sum_of_pieces_reads_each_part((p, cuts) in perms(16, 3).prop_flat_map(|p| {
        let n = p[0].len();
        (Just(p), proptest::collection::vec(0..3usize, n))
    })) {
        let n = p[0].len();
        let parts: Vec<Vec<usize>> = (0..3).map(|i| (0..n).filter(|&x| cuts[x] == i).collect()).collect();
        let v = sum_of_pieces(&parts, &p).unwrap();
        for x in 0..n {
            prop_assert_eq!(v.apply(x), p[cuts[x]].apply(x));
        }
    }

    #[test]
    fn conjugated_partitions_line_up(cuts in (1..=20usize).prop_flat_map(|n| {
        proptest::collection::vec(0..3usize, n).prop_flat_map(|c| (Just(c.clone()), Just(c).prop_shuffle()))
    })) {
        let (a, b) = cuts;
        let n = a.len();
        let es: Vec<Vec<usize>> = (0..3).map(|i| (0..n).filter(|&x| a[x] == i).collect()).collect();
        let fs: Vec<Vec<usize>> = (0..3).map(|i| (0..n).filter(|&x| b[x] == i).collect()).collect();
        let u = conjugate_partitions(&es, &fs, n).unwrap();
        for x in 0..n {
            prop_assert_eq!(b[u.apply(x)], a[x]);
        }
        let s = conjugate_subsets(&es[0], &fs[0], n).unwrap();
        for &x in &es[0] {
            prop_assert_eq!(b[s.apply(x)], 0);
        }
    }

    #[test]
    fn aligned_labelings_agree((depth, l1, l2) in (0..=3u32, 1..=4usize).prop_flat_map(|(d, m)| {
        let labels: Vec<u32> = (0..m << d).map(|x| (x % (1 << d)) as u32 + 1).collect();
        (Just(d), Just(labels.clone()).prop_shuffle(), Just(labels).prop_shuffle())
    })) {
        let l1 = DyadicLabeling::new(depth, l1).unwrap();
        let l2 = DyadicLabeling::new(depth, l2).unwrap();
        let u = align_labelings(&l1, &l2).unwrap();
        for x in 0..l1.n() {
            prop_assert_eq!(l2.label(u.apply(x)), l1.label(x));
        }
    }

    #[test]
    fn word_reduction(signed in proptest::collection::vec(prop_oneof![1i64..=3, -3i64..=-1], 0..12)) {
        let w = Word::from_signed(&signed).unwrap();
        for pair in w.letters().windows(2) {
            prop_assert_ne!(pair[0], pair[1].inverse());
        }
        prop_assert!(w.concat(&w.inverse()).is_empty());
        prop_assert_eq!(Word::from_signed(&w.to_signed()).unwrap(), w.clone());
        let text = w.to_string();
        prop_assert_eq!(text.parse::<Word>().unwrap(), w);
    }
}

#[test]
fn word_balls_are_sorted_and_complete() {
    for gens in 1..=3 {
        for len in 0..=3 {
            let words = reduced_words(gens, len);
            assert_eq!(words.len(), soficlab::word::ball_size(gens, len));
            assert!(words.windows(2).all(|p| p[0].shortlex_cmp(&p[1]).is_lt()));
            // brute force: reduce every unreduced word of length ≤ len
            let mut seen = std::collections::BTreeSet::new();
            let mut frontier = vec![Vec::<i64>::new()];
            for _ in 0..len {
                let mut next = Vec::new();
                for w in &frontier {
                    for l in (1..=gens as i64).flat_map(|g| [g, -g]) {
                        let mut e = w.clone();
                        e.push(l);
                        next.push(e);
                    }
                }
                frontier.extend(next);
                frontier.sort();
                frontier.dedup();
            }
            for w in frontier {
                seen.insert(Word::from_signed(&w).unwrap().to_signed());
            }
            assert_eq!(seen.len(), words.len());
        }
    }
}

#[test]
fn linking_rejects_mismatched_structure() {
    let s1 = MatrixUnitSystem::from_frames(4, vec![vec![vec![0, 1], vec![2, 3]]]).unwrap();
    let s2 = MatrixUnitSystem::from_frames(4, vec![vec![vec![0], vec![1]], vec![vec![2], vec![3]]]).unwrap();
    assert!(link_matrix_units(&s1, &s2).is_err());
}
