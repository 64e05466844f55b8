use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use soficlab::*;

fn perm_of(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle().prop_map(|v| Permutation::new(v).unwrap())
}

fn free_base(max_n: usize, rank: usize) -> impl Strategy<Value = SoficApproximation> {
    (1..=max_n).prop_flat_map(move |n| {
        proptest::collection::vec(perm_of(n), rank)
            .prop_map(move |g| SoficApproximation::new(GroupSpec::free(rank), g, None).unwrap())
    })
}

fn word_strategy(gens: usize, max_len: usize) -> impl Strategy<Value = Word> {
    let g = gens as i64;
    proptest::collection::vec(prop_oneof![1..=g, -g..=-1], 0..=max_len).prop_map(|s| Word::from_signed(&s).unwrap())
}

/// Word evaluation by explicit composition of generator images, last letter first.
fn eval(gens: &[Permutation], w: &Word, x: usize) -> usize {
    w.letters().iter().rev().fold(x, |y, l| {
        let g = &gens[l.gen];
        if l.inv {
            g.images().iter().position(|&z| z == y).unwrap()
        } else {
            g.images()[y]
        }
    })
}

fn digit(code: usize, y: usize, a: usize) -> usize {
    code / a.pow(y as u32) % a
}

fn in_cylinder(base: &SoficApproximation, c: &CylinderSpec, xi: usize, code: usize, a: usize) -> bool {
    c.elements()
        .iter()
        .zip(c.symbols())
        .all(|(g, &s)| digit(code, eval(base.generators(), &g.inverse(), xi), a) == s as usize)
}

fn cylinder(gens: usize, alphabet: u32) -> impl Strategy<Value = CylinderSpec> {
    proptest::collection::vec((word_strategy(gens, 3), 0..alphabet), 0..=3).prop_map(|entries| {
        let mut words: Vec<Word> = Vec::new();
        let mut symbols = Vec::new();
        for (w, s) in entries {
            if !words.contains(&w) {
                words.push(w);
                symbols.push(s);
            }
        }
        CylinderSpec::new(words, symbols).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_product_law(pair in (1..=6usize, 1..=6usize).prop_flat_map(|(na, nb)| {
        (proptest::collection::vec(perm_of(na), 2), proptest::collection::vec(perm_of(nb), 2))
    }), w in word_strategy(2, 4)) {
        let a = SoficApproximation::new(GroupSpec::free(2), pair.0, None).unwrap();
        let b = SoficApproximation::new(GroupSpec::free(2), pair.1, None).unwrap();
        let t = a.tensor_pair(&b).unwrap();
        let nb = b.n();
        for x in 0..a.n() {
            for y in 0..nb {
                prop_assert_eq!(t.apply_word(&w, x * nb + y), eval(a.generators(), &w, x) * nb + eval(b.generators(), &w, y));
            }
        }
        let fixed = a.evaluate_word(&w).unwrap().fixed_points() * b.evaluate_word(&w).unwrap().fixed_points();
        prop_assert_eq!(t.word_trace(&w).unwrap(), Rational::new(fixed as u64, (a.n() * nb) as u64));
    }

    #[test]
    fn amplification_keeps_traces(a in free_base(8, 2), r in 1..=4usize, w in word_strategy(2, 5)) {
        let amp = a.amplify(r).unwrap();
        prop_assert_eq!(amp.word_trace(&w).unwrap(), a.word_trace(&w).unwrap());
        for x in 0..amp.n() {
            prop_assert_eq!(amp.apply_word(&w, x), eval(a.generators(), &w, x / r) * r + x % r);
        }
    }

    #[test]
    fn cylinder_traces_match_enumeration((base, alphabet, c) in (1..=2usize, 2..=3u32).prop_flat_map(|(rank, a)| {
        (free_base(5, rank), Just(a), cylinder(rank, a))
    })) {
        let b = bernoulli_extend(&base, alphabet, BernoulliMode::Exact).unwrap();
        let (n, a) = (base.n(), alphabet as usize);
        let fibre = a.pow(n as u32);
        let hits = (0..n * fibre).filter(|&p| in_cylinder(&base, &c, p / fibre, p % fibre, a)).count();
        prop_assert_eq!(b.cylinder_trace(&c).unwrap().trace, Rational::new(hits as u64, (n * fibre) as u64));
    }

    #[test]
    fn equivariance_defect_matches_enumeration((base, c, g) in (1..=2usize).prop_flat_map(|rank| {
        (free_base(5, rank), cylinder(rank, 2), word_strategy(rank, 2))
    })) {
        let b = bernoulli_extend(&base, 2, BernoulliMode::Exact).unwrap();
        let n = base.n();
        let fibre = 1usize << n;
        let shifted = CylinderSpec::new(c.elements().iter().map(|h| g.concat(h)).collect(), c.symbols().to_vec());
        // shifted elements may collide after reduction; such cylinders are not comparable
        prop_assume!(shifted.is_ok());
        let shifted = shifted.unwrap();
        let g_inv = g.inverse();
        let mut diff = 0usize;
        for xi in 0..n {
            for code in 0..fibre {
                let in_t = in_cylinder(&base, &c, eval(base.generators(), &g_inv, xi), code, 2);
                let in_s = in_cylinder(&base, &shifted, xi, code, 2);
                diff += (in_t != in_s) as usize;
            }
        }
        prop_assert_eq!(b.equivariance_defect(&g, &c).unwrap(), Rational::new(diff as u64, (n * fibre) as u64));
    }

    #[test]
    fn materialized_labels_read_the_enumerated_elements(base in free_base(4, 2), depth in 0..=3u32) {
        let b = bernoulli_extend(&base, 2, BernoulliMode::Exact).unwrap();
        let m = b.materialize(depth).unwrap();
        let elements = GroupSpec::free(2).enumerate_elements(depth as usize).unwrap();
        let n = base.n();
        let fibre = 1usize << n;
        for p in 0..n * fibre {
            let (xi, code) = (p / fibre, p % fibre);
            let bits = elements.iter().fold(0u32, |acc, h| {
                (acc << 1) | digit(code, eval(base.generators(), &h.inverse(), xi), 2) as u32
            });
            prop_assert_eq!(m.labeling.label(p), bits + 1);
            for i in 0..2 {
                prop_assert_eq!(m.approx.generator(i).apply(p), base.generator(i).apply(xi) * fibre + code);
            }
        }
    }

    #[test]
    fn bernoulli_stats_match_materialized((base, radius) in (1..=2usize).prop_flat_map(|r| (free_base(5, r), Just(r)))) {
        let b = bernoulli_extend(&base, 2, BernoulliMode::Exact).unwrap();
        let spec = NeighborhoodSpec::new(radius);
        let fast = bernoulli_local_stats(&b, &spec).unwrap();
        let slow = local_stats(&b.materialize(radius as u32).unwrap(), &spec, StatsMode::Exact).unwrap();
        prop_assert_eq!(fast.counts.keys().collect::<Vec<_>>(), slow.counts.keys().collect::<Vec<_>>());
        prop_assert_eq!(stats_distance(&fast, &slow).unwrap().0, Rational::from_integer(0));
    }

    #[test]
    fn wreath_matches_lamp_construction(base in free_base(4, 1), g1 in word_strategy(1, 2), g2 in word_strategy(1, 2)) {
        let b = bernoulli_extend(&base, 2, BernoulliMode::Exact).unwrap();
        let w = wreath_z2(&b).unwrap();
        let n = base.n();
        let fibre = 1usize << n;
        for p in 0..w.n() {
            let (ext, j) = (p / 2, p % 2);
            let (xi, code) = (ext / fibre, ext % fibre);
            // a 1 entry of the cylinder indicator becomes the 2×2 flip
            let lamp = if code >> xi & 1 == 1 { ext * 2 + (1 - j) } else { p };
            prop_assert_eq!(w.generator(1).apply(p), lamp);
            prop_assert_eq!(w.generator(0).apply(p), (base.generator(0).apply(xi) * fibre + code) * 2 + j);
        }
        // u_{g1} f_{g2} u_{g1}⁻¹ = f_{g1 g2}
        let u = w.evaluate_word(&g1).unwrap();
        let f2 = lamp_z2(&b, &g2).unwrap();
        let moved = u.compose(&f2).unwrap().compose(&u.inverse()).unwrap();
        let target = lamp_z2(&b, &g1.concat(&g2)).unwrap();
        prop_assert_eq!(moved, target);
    }

    #[test]
    fn integer_action_moves_cells(depth in 0..=3u32, m in 1..=4usize, p in 1..=5usize, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = Permutation::random(1 << depth, &mut rng);
        let n = m << depth;
        let a = integer_action_approx(depth, &cells, n, p).unwrap();
        let g = a.approx.generator(0);
        for x in 0..a.n() {
            let cell = a.labeling.label(x) as usize - 1;
            prop_assert_eq!(a.labeling.label(g.apply(x)) as usize - 1, cells.apply(cell));
        }
        for k in 1..p as i64 {
            prop_assert_eq!(g.pow(k).fixed_points(), 0);
        }
    }

    #[test]
    fn treeing_words_compose_partially((base, supports, w) in free_base(8, 2).prop_flat_map(|a| {
        let n = a.n();
        (Just(a), proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), 2), word_strategy(2, 4))
    })) {
        let n = base.n();
        let sets: Vec<Vec<usize>> = supports.iter().map(|s| (0..n).filter(|&x| s[x]).collect()).collect();
        let action = ActionApproximation::new(base.clone(), DyadicLabeling::trivial(n)).unwrap();
        let t = treeing_restrict(&action, &sets).unwrap();
        let f = t.evaluate(&w).unwrap();
        for x in 0..n {
            let expected = w.letters().iter().rev().try_fold(x, |y, l| {
                let g = base.generator(l.gen);
                if l.inv {
                    let z = g.inverse().apply(y);
                    supports[l.gen][z].then_some(z)
                } else {
                    supports[l.gen][y].then(|| g.apply(y))
                }
            });
            prop_assert_eq!(f.get(x), expected);
        }
        let stats = t.word_stats(2).unwrap();
        for s in stats {
            let f = t.evaluate(&s.word).unwrap();
            prop_assert_eq!(s.domain, Rational::new(f.domain_size() as u64, n as u64));
        }
    }

    #[test]
    fn full_treeing_equals_the_action(a in free_base(8, 2), radius in 1..=2usize) {
        let n = a.n();
        let action = ActionApproximation::new(a, DyadicLabeling::balanced(n, 0).unwrap()).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let t = treeing_restrict(&action, &[all.clone(), all]).unwrap();
        let spec = NeighborhoodSpec::new(radius).with_label_level(0);
        prop_assert_eq!(
            treeing_local_stats(&t, &spec, StatsMode::Exact).unwrap(),
            local_stats(&action, &spec, StatsMode::Exact).unwrap()
        );
    }

    #[test]
    fn product_action_is_diagonal(a in free_base(5, 2), f in free_base(4, 2), w in word_strategy(2, 3)) {
        let n = a.n();
        let action = ActionApproximation::new(a.clone(), DyadicLabeling::balanced(n, 0).unwrap()).unwrap();
        let p = product_action(&action, &f).unwrap();
        for x in 0..n {
            for y in 0..f.n() {
                prop_assert_eq!(p.approx.apply_word(&w, x * f.n() + y), eval(a.generators(), &w, x) * f.n() + eval(f.generators(), &w, y));
                prop_assert_eq!(p.labeling.label(x * f.n() + y), action.labeling.label(x));
            }
        }
    }

    #[test]
    fn common_roots_are_roots(cycles in 1..=12usize, length in 1..=9usize, seed in any::<u64>()) {
        // leftover groups need a power root, which exists iff the order is invertible mod the length
        let ok = |k: usize| cycles % k == 0 || (1..=length).any(|e| e * k % length == 1 % length);
        prop_assume!(ok(2) && ok(3));
        let (c, a, b) = common_root_base(cycles, length, 2, 3, seed).unwrap();
        prop_assert_eq!(a.pow(2), c.clone());
        prop_assert_eq!(b.pow(3), c.clone());
        prop_assert!(c.cycles().iter().all(|cy| cy.len() == length));
    }

    #[test]
    fn root_amalgam_agrees_on_h(log2_n in 2..=9u32, seed in any::<u64>()) {
        let glued = root_amalgam(log2_n, 1, seed).unwrap();
        prop_assert!(glued.h_residuals.iter().all(|r| *r == Rational::from_integer(0)));
        let a = &glued.action.approx;
        prop_assert_eq!(a.evaluate_word(&Word::power(0, 2)).unwrap(), a.evaluate_word(&Word::power(1, 3)).unwrap());
    }

    #[test]
    fn conjugate_h_parts_glue_exactly(a in free_base(12, 1), seed in any::<u64>()) {
        let n = a.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labeling = DyadicLabeling::random_balanced(n, 0, &mut rng).unwrap();
        let left = ActionApproximation::new(a.clone(), labeling.clone()).unwrap();
        let u = Permutation::random(n, &mut rng);
        let moved = SoficApproximation::new(GroupSpec::free(1), vec![a.generator(0).conjugate_by(&u).unwrap()], None).unwrap();
        let right = ActionApproximation::new(moved, labeling.transport(&u).unwrap()).unwrap();
        let h = [Word::power(0, 1)];
        let glued = amalgam_glue(&left, &right, &h, &h).unwrap();
        prop_assert!(glued.h_residuals.iter().all(|r| *r == Rational::from_integer(0)));
        prop_assert_eq!(glued.action.approx.generator(0), glued.action.approx.generator(1));
    }
}

#[test]
fn free_product_keeps_both_factors() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = SoficApproximation::new(GroupSpec::free(1), vec![Permutation::random(6, &mut rng)], None).unwrap();
    let b = SoficApproximation::new(GroupSpec::free(1), vec![Permutation::random(4, &mut rng)], None).unwrap();
    let left = ActionApproximation::new(a.clone(), DyadicLabeling::trivial(6)).unwrap();
    let right = ActionApproximation::new(b.clone(), DyadicLabeling::trivial(4)).unwrap();
    let glued = amalgam_glue(&left, &right, &[], &[]).unwrap();
    assert_eq!(glued.action.n(), 12);
    assert_eq!(glued.action.approx.generator(0), a.amplify(2).unwrap().generator(0));
    let right_gen = b.amplify(3).unwrap().generator(0).conjugate_by(&glued.conjugator).unwrap();
    assert_eq!(glued.action.approx.generator(1), &right_gen);
}

#[test]
fn wreath_over_a_cyclic_lamp_group() {
    let base = make_base(&GroupSpec::cyclic(3).unwrap(), 3, 0).unwrap();
    let b = bernoulli_extend(&base, 2, BernoulliMode::Exact).unwrap();
    let lamp = make_base(&GroupSpec::cyclic(3).unwrap(), 3, 0).unwrap();
    let w = wreath_general(&b, &lamp).unwrap();
    assert_eq!(w.n(), 3 * 8 * 3);
    assert_eq!(w.defect_report(2).unwrap().max_relator_defect, Rational::from_integer(0));
    // the lamp 3-cycle runs on the fibres whose cylinder bit is set, half of them
    assert_eq!(w.generator(1).fixed_fraction(), Rational::new(1, 2));
    let nonabelian = {
        let s3: Vec<Vec<usize>> = {
            let perms = [[0, 1, 2], [1, 0, 2], [0, 2, 1], [2, 1, 0], [1, 2, 0], [2, 0, 1]];
            let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
            perms.iter().map(|a| perms.iter().map(|b| idx([a[b[0]], a[b[1]], a[b[2]]])).collect()).collect()
        };
        make_base(&GroupSpec::table(s3, vec![1, 4]).unwrap(), 6, 0).unwrap()
    };
    assert!(matches!(wreath_general(&b, &nonabelian), Err(Error::InvalidGroup(_))));
}

#[test]
fn sampling_ignores_the_thread_count() {
    let base = make_base(&GroupSpec::integer(), 64, 0).unwrap();
    let b = bernoulli_extend(&base, 2, BernoulliMode::Sampled { samples: 20_000, seed: 3 }).unwrap();
    let c: CylinderSpec = "e=1; 1=0".parse().unwrap();
    let spec = NeighborhoodSpec::new(1);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| (b.cylinder_trace(&c).unwrap().trace, bernoulli_local_stats(&b, &spec).unwrap()))
    };
    assert_eq!(run(1), run(4));
}
