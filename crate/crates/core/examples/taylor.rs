//! First-order prediction of each sample's loss change under one SGD step,
//! against the change actually measured. Halving the step roughly halves
//! the relative gap.

use uds::taylor::{delta_logits_sgd, predicted_loss_delta, OneHotLabels};
use uds::toy::{make_corpus, CorpusSpec, ModelSpec, ToyModel};
use uds::softmax_rows;

fn main() -> uds::Result<()> {
    let corpus = make_corpus(&CorpusSpec::default(), 3)?;
    let model = ToyModel::init(ModelSpec::default(), 3)?;
    let batch = &corpus.train[..8];
    let grads = batch
        .iter()
        .map(|s| model.loss_and_grad(s).map(|(_, g)| g))
        .collect::<uds::Result<Vec<_>>>()?;
    let mean: Vec<f64> = (0..model.param_count())
        .map(|i| grads.iter().map(|g| g[i]).sum::<f64>() / grads.len() as f64)
        .collect();

    for lr in [0.4, 0.2, 0.1] {
        let after = model.with_params(model.params().iter().zip(&mean).map(|(p, g)| p - lr * g).collect());
        let mut gap = 0.0;
        for s in batch {
            let dl = delta_logits_sgd(&model, s.inputs(), &grads, lr)?;
            let labels = OneHotLabels::for_sample(s, dl.cols())?;
            let probs = softmax_rows(&model.forward_logits(s.inputs())?)?;
            let predicted = predicted_loss_delta(&dl, &probs, &labels)? / labels.labelled_rows() as f64;
            let actual = after.loss(s)? - model.loss(s)?;
            gap += ((actual - predicted) / predicted).abs() / batch.len() as f64;
            if lr == 0.4 && s.id == batch[0].id {
                println!("{}: predicted {predicted:.6}, actual {actual:.6}", s.id);
            }
        }
        println!("lr {lr}: mean relative gap {gap:.5}");
    }
    Ok(())
}
