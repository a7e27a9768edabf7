use proptest::prelude::*;

use ensat_core::tensor::{finite_diff_check, ParameterSet, MASK_SENTINEL};
use ensat_core::{Tape, Tensor};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_distributions(logits in matrix(4, 6), masked in prop::collection::vec(any::<bool>(), 24)) {
        let mut mask = Tensor::zeros(&[4, 6]);
        for (i, m) in masked.iter().enumerate() {
            // keep column 0 open so no row is fully masked
            if *m && i % 6 != 0 {
                mask.data_mut()[i] = MASK_SENTINEL;
            }
        }
        let mut tape = Tape::new();
        let x = tape.constant(logits);
        let p = tape.masked_softmax(x, Some(&mask)).unwrap();
        let p = tape.value(p);
        for r in 0..4 {
            let row = p.row(&[r]);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for (c, &x) in row.iter().enumerate() {
                if mask.at(&[r, c]) != 0.0 {
                    prop_assert_eq!(x, 0.0);
                }
            }
        }
    }

    #[test]
    fn matmul_gradient_matches_finite_differences(a in matrix(3, 4), b in matrix(4, 2)) {
        let mut params = ParameterSet::new();
        params.insert("a", a);
        params.insert("b", b);
        let report = finite_diff_check(&params, 1e-5, |tape, p| {
            let c = tape.matmul(p.get("a")?, p.get("b")?)?;
            Ok(tape.sum(c))
        })
        .unwrap();
        prop_assert!(report.max_rel_error < 1e-6);
    }

    #[test]
    fn transpose_twice_is_identity(a in matrix(3, 5)) {
        let mut tape = Tape::new();
        let x = tape.constant(a.clone());
        let t = tape.transpose(x).unwrap();
        let tt = tape.transpose(t).unwrap();
        prop_assert_eq!(tape.value(tt), &a);
    }
}

#[test]
fn softmax_hand_values() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
    let p = tape.softmax(x).unwrap();
    for (got, want) in tape.value(p).data().iter().zip([0.09003, 0.24473, 0.66524]) {
        assert!((got - want).abs() < 1e-5);
    }
}

#[test]
fn gradient_of_unused_parameter_is_zero() {
    let mut params = ParameterSet::new();
    params.insert("used", Tensor::new(vec![2], vec![1.0, -1.0]).unwrap());
    params.insert("unused", Tensor::new(vec![2], vec![3.0, 4.0]).unwrap());
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let y = tape.elu(bound.get("used").unwrap());
    let loss = tape.sum(y);
    let grads = tape.backward(loss).unwrap();
    let grads = bound.gradients(&tape, &grads);
    assert_eq!(grads["unused"].data(), &[0.0, 0.0]);
    assert!((grads["used"].data()[1] - (-1f64).exp()).abs() < 1e-15);
}
