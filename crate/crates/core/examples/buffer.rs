//! FIFO memory of selected embeddings: eviction order, the diversity
//! distance a candidate receives, and a checkpoint round trip.

use uds::buffer::BufferCheckpoint;
use uds::projection::Embedding;
use uds::{diversity_distance, MemoryBuffer};

fn point(x: f64, y: f64, step: usize) -> Embedding {
    Embedding::new(vec![x, y]).with_source(step, format!("p{step}"))
}

fn main() -> uds::Result<()> {
    let mut buffer = MemoryBuffer::new(3)?;
    for step in 0..5 {
        buffer.push_selected(vec![point(step as f64, 0.0, step)])?;
        let held: Vec<_> = buffer.entries().map(|e| e.source_sample.as_str()).collect();
        println!("after step {step}: {held:?}");
    }

    for (x, y) in [(3.0, 0.0), (3.0, 4.0), (-10.0, 0.0)] {
        let d = diversity_distance(&Embedding::new(vec![x, y]), &buffer)?;
        println!("candidate ({x}, {y}): mean distance to buffer {d:.4}");
    }

    let path = std::env::temp_dir().join("uds-example-buffer.json");
    buffer.to_checkpoint().save(&path)?;
    let restored = MemoryBuffer::from_checkpoint(BufferCheckpoint::load(&path)?)?;
    println!("restored {} of {} entries from {}", restored.len(), restored.capacity(), path.display());
    Ok(())
}
