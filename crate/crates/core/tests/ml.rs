use qecw::ml::{syndrome_index, CosetTable, LogicalClass};
use qecw::sim::PauliError;
use qecw::CodeLayout;

fn error_from_code(n: usize, code: u64) -> (PauliError, usize) {
    let mut e = PauliError::identity(n);
    let mut w = 0;
    for q in 0..n {
        let c = (code >> (2 * q)) & 3;
        e.x[q] = c & 1 != 0;
        e.z[q] = c & 2 != 0;
        w += usize::from(c != 0);
    }
    (e, w)
}

#[test]
fn coset_table_matches_direct_enumeration() {
    let l = CodeLayout::rotated_surface(3).unwrap();
    let n = l.num_data();
    for p in [0.01, 0.1, 0.3] {
        let table = CosetTable::new(&l, p).unwrap();
        let mut direct = vec![[0.0f64; 4]; table.num_syndromes()];
        for code in 0..(1u64 << (2 * n)) {
            let (e, w) = error_from_code(n, code);
            let prob = (p / 3.0).powi(w as i32) * (1.0 - p).powi((n - w) as i32);
            let s = syndrome_index(&l, &e.data_point(&l)).unwrap();
            let (fz, fx) = e.logical_flips(&l);
            direct[s][LogicalClass::from_flips(fz, fx) as usize] += prob;
        }
        let total: f64 = direct.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (s, row) in direct.iter().enumerate() {
            let c = table.probabilities(s);
            for class in LogicalClass::ALL {
                assert!((c.get(class) - row[class as usize]).abs() < 1e-12, "p={p} s={s} {class:?}");
            }
        }
        let fail: f64 = direct.iter().map(|r| r.iter().sum::<f64>() - r.iter().cloned().fold(0.0, f64::max)).sum();
        assert!((table.ml_failure_rate() - fail).abs() < 1e-12);
    }
}

#[test]
fn ml_failure_grows_with_noise() {
    let l = CodeLayout::rotated_surface(3).unwrap();
    let rates: Vec<f64> = [0.01, 0.05, 0.1, 0.15].iter().map(|&p| CosetTable::new(&l, p).unwrap().ml_failure_rate()).collect();
    assert!(rates.windows(2).all(|w| w[0] < w[1]));
    assert!((rates[2] - 0.10186).abs() < 5e-4, "{}", rates[2]);
    assert_eq!(CosetTable::new(&l, 0.0).unwrap().ml_failure_rate(), 0.0);
}

#[test]
fn ml_rejects_unsupported_layouts() {
    assert!(CosetTable::new(&CodeLayout::repetition(3).unwrap(), 0.1).is_err());
    assert!(CosetTable::new(&CodeLayout::rotated_surface(7).unwrap(), 0.1).is_err());
    assert!(CosetTable::new(&CodeLayout::rotated_surface(3).unwrap(), 1.5).is_err());
}
