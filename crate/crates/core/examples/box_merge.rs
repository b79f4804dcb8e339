//! IoU and fragment mergence on hand-made boxes.

use medet::geometry::{iou, BBox};
use medet::mining::{merge_fragments, MinedProposal};
use medet::Embedding;

fn proposal(index: usize, b: [f64; 4], objectness: f64, e: &[f32]) -> medet::Result<MinedProposal> {
    Ok(MinedProposal {
        sources: vec![index],
        bbox: BBox::try_from(b)?,
        objectness,
        embedding: Embedding::new(e.to_vec())?,
        score: 0.0,
        merged: false,
    })
}

fn main() -> medet::Result<()> {
    let a = BBox::new(0.0, 0.0, 10.0, 10.0)?;
    let b = BBox::new(5.0, 5.0, 15.0, 15.0)?;
    println!("iou(a, b) = {:.6} (25/175)", iou(&a, &b));
    println!("enclose(a, b) = {:?}", a.enclose(&b).to_array());

    let items = vec![
        proposal(0, [0.0, 0.0, 10.0, 10.0], 0.9, &[1.0, 0.0])?,
        proposal(1, [1.0, 1.0, 11.0, 11.0], 0.6, &[0.0, 1.0])?,
        proposal(2, [40.0, 40.0, 50.0, 50.0], 0.8, &[1.0, 1.0])?,
    ];
    println!(
        "iou(0, 1) = {:.4} (81/119)",
        items[0].bbox.iou(&items[1].bbox)
    );
    let (merged, count) = merge_fragments(items, 0.6)?;
    println!("{count} merge(s), {} proposals left", merged.len());
    for p in &merged {
        println!(
            "  sources {:?} box {:?} objectness {} embedding {:?}",
            p.sources,
            p.bbox.to_array(),
            p.objectness,
            p.embedding.values()
        );
    }
    Ok(())
}
