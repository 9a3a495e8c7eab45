//! Compare thread partitions with the four metric families.
//!
//!     cargo run --example evaluate_partitions

use std::collections::BTreeMap;

use disentangle::metrics::{ari, evaluate_all, exact_match_prf, one_to_one, scaled_vi, Partition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = Partition::new([vec![1, 2], vec![3, 4]])?;
    let y = Partition::new([vec![1, 3], vec![2, 4]])?;
    println!("crossing partitions");
    println!("  scaled VI  {:.4}", scaled_vi(&x, &y)?);
    println!("  ARI        {:.4}", ari(&x, &y)?);
    println!("  1-1        {:.1}", one_to_one(&x, &y)?);

    let singles = Partition::new([vec![1], vec![2], vec![3], vec![4]])?;
    let whole = Partition::new([vec![1, 2, 3, 4]])?;
    println!("\nsingletons vs one cluster: scaled VI {:.4}", scaled_vi(&singles, &whole)?);

    let pred = Partition::new([vec![1, 2], vec![3], vec![4]])?;
    let gold = Partition::new([vec![1, 2], vec![3, 4]])?;
    let prf = exact_match_prf(&pred, &gold)?;
    println!("exact match: P {:.3} R {:.3} F1 {:.3}", prf.p, prf.r, prf.f1);

    // From reply-to links: threads are connected components.
    let gold_links: BTreeMap<u64, u64> = [(0, 0), (1, 0), (2, 2), (3, 1), (4, 2), (5, 5)].into();
    let pred_links: BTreeMap<u64, u64> = [(0, 0), (1, 0), (2, 2), (3, 3), (4, 2), (5, 4)].into();
    let report = evaluate_all(&pred_links, &gold_links)?;
    println!("\n{report}");
    println!("{}", report.to_json());
    Ok(())
}
