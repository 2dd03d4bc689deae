//! The two observations the estimator rests on, at toy scale: samples at the
//! same label variation are about equally accurate in two independent halves,
//! and the share of fully stable samples moves linearly with accuracy.
//!
//!     cargo run --release --example replication_studies

use lvr_core::corruptions::Corruption;
use lvr_core::estimator::EstimationConfig;
use lvr_core::studies::{area_agreement, severity_ladder, top_fraction_fit, ToySetup};

fn main() -> lvr_core::Result<()> {
    let setup = ToySetup::blobs(0)?;
    println!("{:>4}  {:>11}  {:>5} {:>5}  {:>7} {:>7}", "area", "lvr", "n1", "n2", "acc1", "acc2");
    for a in area_agreement(&setup.model, &setup.reference, &setup.new, 50, 50, 40)? {
        if let (Some(x), Some(y)) = (a.first_acc, a.second_acc) {
            println!(
                "{:>4}  ({:.2}, {:.2}]  {:>5} {:>5}  {x:>7.4} {y:>7.4}",
                a.area, a.lvr_low, a.lvr_high, a.first_size, a.second_size
            );
        }
    }

    let points = severity_ladder(&setup, Corruption::Brightness, &EstimationConfig::with_areas(50))?;
    let fit = top_fraction_fit(&points)?;
    for p in &points {
        println!("severity {}  accuracy {:.4}  top fraction {:.4}", p.severity, p.evaluation.real_acc, p.evaluation.top_fraction);
    }
    println!("top = {:.3} * acc + {:.3}, r = {:.4}", fit.slope, fit.intercept, fit.pearson_r);
    Ok(())
}
