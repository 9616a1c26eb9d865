use proptest::prelude::*;
use qecw::geometry::{commutes, Violation};
use qecw::{CodeKind, CodeLayout, Coord, PauliType};

#[test]
fn surface_layouts_validate() {
    for d in (3..=11).step_by(2) {
        let l = CodeLayout::rotated_surface(d).unwrap();
        assert!(l.validate().is_empty(), "d={d}: {:?}", l.validate());
        assert_eq!(l.num_data(), d * d);
        assert_eq!(l.num_stabilizers(), d * d - 1);
        assert_eq!(l.stabilizers_of(PauliType::X).count(), (d * d - 1) / 2);
        assert_eq!(l.logical_z.len(), d);
        assert_eq!(l.logical_x.len(), d);
        let weights: Vec<usize> = l.stabilizers.iter().map(|s| s.support.len()).collect();
        assert_eq!(weights.iter().filter(|&&w| w == 2).count(), 2 * (d - 1));
        assert!(weights.iter().all(|&w| w == 2 || w == 4));
    }
}

#[test]
fn repetition_layouts_validate() {
    for d in 3..=11 {
        let l = CodeLayout::repetition(d).unwrap();
        assert_eq!(l.kind, CodeKind::Repetition);
        assert!(l.validate().is_empty());
        assert_eq!(l.num_stabilizers(), d - 1);
        assert!(l.stabilizers.iter().all(|s| s.pauli_type == PauliType::Z && s.support.len() == 2));
        assert_eq!(l.stabilizers[0].ancilla, Coord::new(1, 0));
    }
}

#[test]
fn bad_distances_rejected() {
    assert!(CodeLayout::rotated_surface(4).is_err());
    assert!(CodeLayout::rotated_surface(1).is_err());
    assert!(CodeLayout::repetition(1).is_err());
}

#[test]
fn validate_reports_broken_layouts() {
    let mut l = CodeLayout::rotated_surface(3).unwrap();
    l.stabilizers[0].support.pop();
    assert!(!l.validate().is_empty());

    let mut l = CodeLayout::rotated_surface(3).unwrap();
    l.logical_x = l.logical_z.clone();
    assert!(l.validate().iter().any(|v| matches!(v, Violation::LogicalAnticommutes { .. } | Violation::LogicalsCommute)));

    let mut l = CodeLayout::rotated_surface(3).unwrap();
    let a = l.stabilizers[1].ancilla;
    l.stabilizers[0].ancilla = a;
    assert!(l.validate().iter().any(|v| matches!(v, Violation::DuplicateAncilla { .. })));
}

#[test]
fn ancilla_lookup_round_trips() {
    let l = CodeLayout::rotated_surface(5).unwrap();
    for (k, s) in l.stabilizers.iter().enumerate() {
        assert_eq!(l.stabilizer_at(s.ancilla), Some(k));
    }
    assert_eq!(l.stabilizer_at(Coord::new(0, 0)), None);
}

proptest! {
    #[test]
    fn commutation_is_symmetric(
        a in prop::collection::btree_set(0usize..9, 0..6),
        b in prop::collection::btree_set(0usize..9, 0..6),
        ta in any::<bool>(),
        tb in any::<bool>(),
    ) {
        let t = |x: bool| if x { PauliType::X } else { PauliType::Z };
        let (a, b): (Vec<usize>, Vec<usize>) = (a.into_iter().collect(), b.into_iter().collect());
        prop_assert_eq!(commutes(t(ta), &a, t(tb), &b), commutes(t(tb), &b, t(ta), &a));
        prop_assert!(commutes(t(ta), &a, t(ta), &b));
    }

    #[test]
    fn stabilizers_commute_pairwise(k in 0usize..5) {
        let l = CodeLayout::rotated_surface(3 + 2 * k).unwrap();
        for s in &l.stabilizers {
            for r in &l.stabilizers {
                prop_assert!(commutes(s.pauli_type, &s.support, r.pauli_type, &r.support));
            }
            prop_assert!(commutes(s.pauli_type, &s.support, PauliType::Z, &l.logical_z));
            prop_assert!(commutes(s.pauli_type, &s.support, PauliType::X, &l.logical_x));
        }
        prop_assert!(!commutes(PauliType::Z, &l.logical_z, PauliType::X, &l.logical_x));
    }
}
