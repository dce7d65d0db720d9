//! Property tests for the structural laws: parser round trips, grafting
//! arithmetic, pole expansion and the variable actions.

use proptest::prelude::*;
use relmc_core::hopf::HElem;
use relmc_core::rational::rint;
use relmc_core::series::{
    act_variable, expand, expanded_equal_reliable, swap_variables, ExpansionOrder, SeriesWindow,
    SingularSeries, Var,
};
use relmc_core::tree::{graft, parse_tree, render_text, Tree};

fn arb_tree() -> impl Strategy<Value = Tree> {
    let leaf = prop::strategy::Just(Tree::Leaf);
    leaf.prop_recursive(4, 24, 4, |inner| {
        prop::collection::vec(inner, 0..4).prop_map(Tree::Node)
    })
}

fn arb_poly() -> impl Strategy<Value = SingularSeries> {
    prop::collection::vec(((0i64..3), (0i64..3), (-4i64..=4)), 0..5).prop_map(|terms| {
        let mut s = SingularSeries::scalar_zero(SeriesWindow::default());
        s.declare_var(Var::new("x"));
        s.declare_var(Var::new("y"));
        for (ex, ey, c) in terms {
            s.push_term(
                rint(c),
                &[],
                &[(Var::new("x"), ex), (Var::new("y"), ey)],
                0,
            )
            .unwrap();
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_render_round_trip(tree in arb_tree()) {
        let text = render_text(&tree);
        prop_assert_eq!(parse_tree(&text).unwrap(), tree);
    }
}

proptest! {
    #[test]
    fn grafting_conserves_leaves(q in arb_tree(), p in arb_tree(), i in 1usize..8) {
        prop_assume!(q.leaf_count() >= 1);
        let i = 1 + (i - 1) % q.leaf_count();
        let grafted = graft(&q, i, &p).unwrap();
        prop_assert_eq!(grafted.leaf_count(), q.leaf_count() + p.leaf_count() - 1);
    }

    #[test]
    fn expansion_is_a_ring_map(s in arb_poly(), t in arb_poly(), k in 1u32..3, flip in any::<bool>()) {
        // s gains a pole; t stays pole-free.
        let x = Var::new("x");
        let y = Var::new("y");
        let w = SeriesWindow::default();
        let pole = SingularSeries::pole(w, &x, &y, k).unwrap();
        let s = s.mul(&pole).unwrap();
        let ord = if flip {
            ExpansionOrder::new(vec![x, y])
        } else {
            ExpansionOrder::new(vec![y, x])
        };
        let lhs = expand(&s.mul(&t).unwrap(), &ord).unwrap();
        let rhs = expand(&s, &ord).unwrap().mul(&expand(&t, &ord).unwrap()).unwrap();
        prop_assert!(expanded_equal_reliable(&lhs, &rhs));
    }

    #[test]
    fn swap_is_an_involution(s in arb_poly(), k in 0u32..3) {
        let x = Var::new("x");
        let y = Var::new("y");
        let w = SeriesWindow::default();
        let s = if k > 0 {
            s.mul(&SingularSeries::pole(w, &x, &y, k).unwrap()).unwrap()
        } else {
            s
        };
        let twice = swap_variables(&swap_variables(&s, &x, &y).unwrap(), &x, &y).unwrap();
        prop_assert_eq!(twice, s);
    }

    #[test]
    fn action_module_law(s in arb_poly(), i in 0u32..3, j in 0u32..3) {
        use relmc_core::hopf::h_mul;
        let x = Var::new("x");
        let lhs = act_variable(&h_mul(&HElem::gen(i), &HElem::gen(j)), &x, &s).unwrap();
        let rhs = act_variable(
            &HElem::gen(i),
            &x,
            &act_variable(&HElem::gen(j), &x, &s).unwrap(),
        )
        .unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}
