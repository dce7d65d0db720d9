//! A genuinely singular binary generator: a rank-three module spanned by
//! the unit, a current and its derivative, whose self-pairing carries an
//! order-two pole. Membership, invariance at the derivation degree, OPE
//! extraction and null composition all run on it; composing it into its
//! own slot is the documented unsupported case.

use relmc_core::algebra::{make_custom_algebra, ope_extract};
use relmc_core::multimap::{
    compose, full_invariance_filter, make_multimap, HModule, LabelledTree, MultiError,
};
use relmc_core::rational::{rint, Rat};
use relmc_core::series::{SeriesWindow, SingularSeries, TermKey, Var};
use relmc_core::tree::parse_tree;
use num_traits::Zero;
use std::collections::BTreeMap;
use std::sync::Arc;

const VAC: usize = 0;
const CUR: usize = 1;
const DCUR: usize = 2;

fn current_module() -> Arc<HModule> {
    let zero3 = vec![vec![Rat::zero(); 3]; 3];
    let mut id3 = zero3.clone();
    for (i, row) in id3.iter_mut().enumerate() {
        row[i] = rint(1);
    }
    // D(1) sends the current to its derivative; everything else dies in
    // this truncation.
    let mut d1 = zero3.clone();
    d1[DCUR][CUR] = rint(1);
    Arc::new(
        HModule::new("V", 3, vec![id3, d1, zero3])
            .unwrap()
            .with_degrees(vec![0, 1, 2], 2),
    )
}

fn singular_binary() -> relmc_core::multimap::MultiMap {
    let module = current_module();
    let window = SeriesWindow::default();
    let lt = LabelledTree::new(
        parse_tree("(**)").unwrap(),
        vec![module.clone(), module.clone()],
        module.clone(),
    )
    .unwrap();
    let x1 = Var::new("x1");
    let x2 = Var::new("x2");
    let series = |terms: &[(i64, &[(Var, i64)], u32, usize)]| {
        let mut s = SingularSeries::zero(module.basis_space(), window);
        s.declare_var(x1.clone());
        s.declare_var(x2.clone());
        for (c, mono, pole_order, basis) in terms {
            let poles: Vec<(Var, Var, u32)> = if *pole_order > 0 {
                vec![(x1.clone(), x2.clone(), *pole_order)]
            } else {
                Vec::new()
            };
            s.push_term(rint(*c), &poles, mono, *basis).unwrap();
        }
        s
    };
    let mut table: BTreeMap<Vec<usize>, SingularSeries> = BTreeMap::new();
    table.insert(vec![VAC, VAC], series(&[(1, &[], 0, VAC)]));
    table.insert(
        vec![VAC, CUR],
        series(&[(1, &[], 0, CUR), (1, &[(Var::new("x2"), 1)], 0, DCUR)]),
    );
    table.insert(
        vec![CUR, VAC],
        series(&[(1, &[], 0, CUR), (1, &[(Var::new("x1"), 1)], 0, DCUR)]),
    );
    table.insert(vec![VAC, DCUR], series(&[(1, &[], 0, DCUR)]));
    table.insert(vec![DCUR, VAC], series(&[(1, &[], 0, DCUR)]));
    // The current pairs with itself through an order-two pole; derivative
    // entries follow by differentiating in the respective slot.
    table.insert(vec![CUR, CUR], series(&[(1, &[], 2, VAC)]));
    table.insert(vec![DCUR, CUR], series(&[(-2, &[], 3, VAC)]));
    table.insert(vec![CUR, DCUR], series(&[(2, &[], 3, VAC)]));
    table.insert(vec![DCUR, DCUR], series(&[(-6, &[], 4, VAC)]));
    // Invariance is exact at the derivation degree; higher degrees push
    // the derivative out of this truncation, so the bound is one.
    make_multimap(lt, window, 1, table).unwrap()
}

#[test]
fn singular_generator_is_accepted_and_invariant() {
    let f2 = singular_binary();
    assert!(f2.series(&[CUR, CUR]).has_poles());
    full_invariance_filter(&f2).unwrap();
}

#[test]
fn ope_sees_the_order_two_pole() {
    let module = current_module();
    let f2 = singular_binary();
    let alg = make_custom_algebra(module, f2, vec![rint(1), rint(0), rint(0)], 1).unwrap();
    let entries = ope_extract(&alg, CUR, CUR).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].0, 2);
    assert_eq!(
        entries[0].1.coeff(&TermKey::monomial_only(&[], VAC)),
        rint(1)
    );
    // Mixed pairing: regular part only.
    let entries = ope_extract(&alg, VAC, CUR).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].0, 0);
}

#[test]
fn null_composition_kills_the_pole() {
    // Pairing against the unit is regular, so composing the unit into
    // either slot leaves a pole-free one-variable expansion.
    let module = current_module();
    let f2 = singular_binary();
    let unit = relmc_core::multimap::nullary(
        module.clone(),
        vec![rint(1), rint(0), rint(0)],
        f2.window(),
        1,
    )
    .unwrap();
    for slot in 1..=2 {
        let composed = compose(&f2, slot, &unit).unwrap();
        assert_eq!(composed.arity(), 1);
        for (tuple, series) in composed.stored() {
            assert!(!series.has_poles(), "slot {slot}, tuple {tuple:?}");
        }
        // The current input reproduces its one-sided expansion.
        let s = composed.series(&[CUR]);
        assert_eq!(s.coeff(&TermKey::monomial_only(&[], CUR)), rint(1));
        assert_eq!(
            s.coeff(&TermKey::monomial_only(&[(Var::new("x1"), 1)], DCUR)),
            rint(1)
        );
    }
}

#[test]
fn composing_onto_a_singular_slot_is_rejected() {
    let f2 = singular_binary();
    let err = compose(&f2, 1, &f2).unwrap_err();
    assert!(matches!(err, MultiError::SlotSingularity), "{err}");
}
