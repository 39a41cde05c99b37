//! `pmtree demo-xor`: fit the two-hyperplane convex-difference classifier
//! on the four XOR corner points and print the result.

use pmtree::partition::xor_decompose;
use pmtree::{DenseMatrix, Error, Result};

pub fn run() -> Result<()> {
    let points = DenseMatrix::from_rows(vec![
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ])?;
    let labels = [false, true, true, false];
    let classifier = xor_decompose(&points, &labels)?;

    println!("XOR corners, decision = outer-positive AND NOT inner-positive:");
    let mut correct = 0;
    for (row, &label) in points.iter_rows().zip(&labels) {
        let predicted = classifier.predict(row)?;
        if predicted == label {
            correct += 1;
        }
        println!(
            "  ({}, {})  label {}  predicted {}",
            row[0],
            row[1],
            u8::from(label),
            u8::from(predicted)
        );
    }
    let outer = classifier.outer();
    let inner = classifier.inner();
    println!(
        "outer: normal [{:+.4}, {:+.4}]  offset {:+.4}",
        outer.normal()[0],
        outer.normal()[1],
        outer.offset()
    );
    println!(
        "inner: normal [{:+.4}, {:+.4}]  offset {:+.4}",
        inner.normal()[0],
        inner.normal()[1],
        inner.offset()
    );
    println!("correct {correct}/4");
    if correct == 4 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "classifier got only {correct}/4 corners right"
        )))
    }
}
