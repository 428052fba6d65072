//! One selection step on a batch of toy-model logits. Prints each
//! candidate's nuclear norm, buffer distance and combined score.

use uds::harness::TOY_ALPHA;
use uds::selector::{uds_step, Candidate};
use uds::toy::{make_corpus, CorpusSpec, ModelSpec, ToyModel};
use uds::{MemoryBuffer, ProjectionPair, SelectionConfig};

fn main() -> uds::Result<()> {
    let spec = CorpusSpec::default();
    let corpus = make_corpus(&spec, 0)?;
    let model = ToyModel::init(ModelSpec::default(), 0)?;
    let sel = SelectionConfig { alpha: TOY_ALPHA, ..SelectionConfig::default() };
    let rows = spec.seq_len - 1;
    let pair = ProjectionPair::build(spec.vocab, rows, sel.d1, sel.d2, 0)?;
    let mut buffer = MemoryBuffer::new(sel.buffer_capacity)?;

    for (step, batch) in corpus.train.chunks(sel.batch_size).take(3).enumerate() {
        let candidates = batch
            .iter()
            .map(|s| {
                Ok(Candidate {
                    id: s.id.clone(),
                    logits: model.forward_padded(s.inputs())?,
                    response_mask: None,
                })
            })
            .collect::<uds::Result<Vec<_>>>()?;
        let out = uds_step(step, &candidates, &sel, &mut buffer, &pair)?;
        println!("step {step}: selected {:?}, buffer holds {}", out.selected, buffer.len());
        for r in &out.records {
            println!(
                "  {:>12}  intra {:8.3}  inter {:7.3}  total {:8.3}{}",
                r.sample_id,
                r.s_intra,
                r.s_inter,
                r.s_total,
                if r.selected { "  *" } else { "" }
            );
        }
    }
    Ok(())
}
